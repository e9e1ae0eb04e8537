use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hlsl::learning::{conditionals, LearnConfig, Objective};
use hlsl::{learn_weights, synth, Database, PathClause};
use tempfile::TempDir;

fn hlsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hlsl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = hlsl(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth_dir(task: &str, seed: u64) -> (TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join(task);
    ok(&[
        "synth",
        "--task",
        task,
        "--seed",
        &seed.to_string(),
        "--out",
        s(&dir),
    ]);
    (tmp, dir)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn clause_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn model_lines(text: &str) -> Vec<(f64, String)> {
    text.lines()
        .skip(1)
        .map(|l| {
            let (w, c) = l.split_once('\t').unwrap();
            (w.parse().unwrap(), c.to_string())
        })
        .collect()
}

#[test]
fn example_one_generates_three_clauses() {
    let (_tmp, dir) = synth_dir("example1", 0);
    let args = [
        "generate",
        "--data",
        s(&dir),
        "--max-depth",
        "2",
        "--min-coverage",
        "1",
        "--set",
        "include_inverses=false",
    ];
    let text = ok(&args);
    let mut clauses: Vec<&str> = clause_lines(&text)
        .iter()
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    clauses.sort();
    assert_eq!(
        clauses,
        [
            "-> !Mentions(A,B)",
            "Cites(E1,E2) & Mentions(E2,E3) -> !Mentions(E1,E3)",
            "Cites(E1,E2) & Mentions(E2,E3) -> Mentions(E1,E3)",
        ]
    );
    assert_eq!(ok(&args), text);
}

#[test]
fn unsupported_coverage_leaves_priors_only() {
    let (_tmp, dir) = synth_dir("recovery", 1);
    let text = ok(&["generate", "--data", s(&dir), "--min-coverage", "100000"]);
    let lines = clause_lines(&text);
    assert_eq!(lines.len(), 1);
    assert!(lines[0].starts_with("-> !T(A,B)\t"));
}

#[test]
fn single_clause_learning_matches_library() {
    let (tmp, dir) = synth_dir("perfect", 3);
    let clause_file = tmp.path().join("one.tsv");
    std::fs::write(&clause_file, "R(E1,E2) -> T(E1,E2)\n").unwrap();
    let text = ok(&[
        "learn",
        "--data",
        s(&dir),
        "--set",
        "neg_ratio=inf",
        "--clauses",
        s(&clause_file),
    ]);
    let model = model_lines(&text);
    assert_eq!(model.len(), 1);

    let task = synth::perfect_signal(3);
    let db: Database = task.data.training_db().unwrap();
    let clause = PathClause::parse("R(E1,E2) -> T(E1,E2)", &task.data.schema).unwrap();
    let cfg = LearnConfig::default();
    let cond = conditionals(std::slice::from_ref(&clause), &db, cfg.exponent);
    let direct = learn_weights(&cond, &[0.0], Objective::Ppll, &cfg, cfg.max_iters).unwrap();
    assert!((model[0].0 - direct.weights[0]).abs() <= 1e-9 * direct.weights[0]);
}

#[test]
fn greedy_with_no_rounds_is_empty() {
    let (_tmp, dir) = synth_dir("recovery", 2);
    let text = ok(&[
        "learn",
        "--data",
        s(&dir),
        "--method",
        "gls",
        "--set",
        "gls_outer_iters=0",
        "--clauses",
        s(&dir.join("candidates.tsv")),
    ]);
    assert_eq!(text, "# hlsl-model v1\n");
}

#[test]
fn both_methods_keep_generating_rules() {
    let (tmp, dir) = synth_dir("recovery", 21);
    for method in ["ppll", "gls"] {
        let trace = tmp.path().join(format!("{method}.trace"));
        let text = ok(&[
            "learn",
            "--data",
            s(&dir),
            "--method",
            method,
            "--clauses",
            s(&dir.join("candidates.tsv")),
            "--trace",
            s(&trace),
        ]);
        let kept: Vec<String> = model_lines(&text).into_iter().map(|(_, c)| c).collect();
        for rule in synth::RECOVERY_RULES {
            assert!(kept.iter().any(|c| c == rule), "{method} lost {rule}");
        }
        let trace = std::fs::read_to_string(trace).unwrap();
        assert!(trace.starts_with("iteration\tobjective\tmax_gradient\telapsed_ms\n"));
        assert!(trace.lines().count() > 2);
    }
}

#[test]
fn empty_model_predicts_zero_with_chance_auc() {
    let (tmp, dir) = synth_dir("recovery", 4);
    let model = tmp.path().join("empty.tsv");
    std::fs::write(&model, "# hlsl-model v1\n").unwrap();
    let metrics = tmp.path().join("metrics.tsv");
    let preds = ok(&[
        "infer",
        "--data",
        s(&dir),
        "--model",
        s(&model),
        "--metrics",
        s(&metrics),
    ]);
    assert!(preds.lines().all(|l| l.ends_with("\t0")));
    let m = std::fs::read_to_string(metrics).unwrap();
    assert!(m.lines().nth(1).unwrap().starts_with("0.5\t"));
}

#[test]
fn perfect_signal_is_ranked_perfectly_at_any_width() {
    let (tmp, dir) = synth_dir("perfect", 5);
    let model = tmp.path().join("model.tsv");
    ok(&[
        "learn",
        "--data",
        s(&dir),
        "--clauses",
        s(&dir.join("candidates.tsv")),
        "--out",
        s(&model),
    ]);
    let mut outputs = Vec::new();
    for threads in ["1", "8"] {
        let preds = tmp.path().join(format!("p{threads}.tsv"));
        ok(&[
            "infer",
            "--threads",
            threads,
            "--data",
            s(&dir),
            "--model",
            s(&model),
            "--out",
            s(&preds),
        ]);
        let metrics = ok(&["eval", "--data", s(&dir), "--predictions", s(&preds)]);
        assert!(
            metrics.lines().nth(1).unwrap().starts_with("1\t"),
            "{metrics}"
        );
        outputs.push(std::fs::read(preds).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn bench_reports_both_methods() {
    let (_tmp, dir) = synth_dir("recovery", 6);
    let csv = ok(&[
        "bench",
        "--data",
        s(&dir),
        "--clauses",
        s(&dir.join("candidates.tsv")),
        "--counts",
        "1,3",
        "--repeats",
        "1",
    ]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,n,seconds");
    assert_eq!(lines.len(), 5);
    for line in &lines[1..] {
        let seconds: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(seconds > 0.0);
    }
    let too_many = hlsl(&[
        "bench",
        "--data",
        s(&dir),
        "--clauses",
        s(&dir.join("candidates.tsv")),
        "--counts",
        "99",
    ]);
    assert!(String::from_utf8_lossy(&too_many.stderr).starts_with("error: InvalidConfig:"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let (tmp, dir) = synth_dir("recovery", 7);
    let conf = tmp.path().join("run.conf");
    std::fs::write(
        &conf,
        format!("data={}\nmethod=gls\ngls_outer_iters=0\n", s(&dir)),
    )
    .unwrap();
    let candidates = dir.join("candidates.tsv");
    let from_file = ok(&["learn", "--config", s(&conf), "--clauses", s(&candidates)]);
    assert_eq!(from_file, "# hlsl-model v1\n");
    let flagged = ok(&[
        "learn",
        "--config",
        s(&conf),
        "--method",
        "ppll",
        "--clauses",
        s(&candidates),
    ]);
    assert!(model_lines(&flagged).len() >= 2);
}

#[test]
fn errors_are_single_coded_lines() {
    let (tmp, dir) = synth_dir("recovery", 8);
    let bad_model = tmp.path().join("bad.tsv");
    std::fs::write(&bad_model, "1\t-> !T(A,B)\n").unwrap();
    let empty = tmp.path().join("none.tsv");
    let missing = tmp.path().join("missing");
    std::fs::write(&empty, "# nothing\n").unwrap();
    let cases: Vec<(Vec<&str>, &str)> = vec![
        (
            vec!["infer", "--data", s(&dir), "--model", s(&bad_model)],
            "MissingHeader",
        ),
        (
            vec!["learn", "--data", s(&dir), "--clauses", s(&empty)],
            "NoCandidates",
        ),
        (vec!["learn", "--clauses", s(&empty)], "MissingPath"),
        (
            vec!["generate", "--data", s(&dir), "--set", "top_k=0"],
            "InvalidConfig",
        ),
        (vec!["generate", "--data", s(&missing)], "Io"),
        (vec!["frobnicate"], "InvalidArguments"),
    ];
    for (args, code) in cases {
        let out = hlsl(&args);
        assert!(!out.status.success());
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(
            err.starts_with(&format!("error: {code}: ")),
            "{args:?}: {err}"
        );
    }
}
