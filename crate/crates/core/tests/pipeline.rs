use std::collections::BTreeSet;

use hlsl::data::{read_records, PredId};
use hlsl::learning::LearnConfig;
use hlsl::model_io::{read_clauses, read_model, write_clauses, write_model};
use hlsl::*;
use proptest::prelude::*;

fn schema() -> Schema {
    let mut s = Schema::new();
    for p in ["p0", "p1", "p2"] {
        s.add(p, false).unwrap();
    }
    s.add("t", true).unwrap();
    s
}

#[test]
fn example_one_yields_rule_twin_and_prior() {
    let data = synth::example1();
    let db: Database = data.training_db().unwrap();
    let cfg = GenerationConfig {
        max_depth: 2,
        min_coverage: 1,
        include_inverses: false,
        ..GenerationConfig::default()
    };
    let got: BTreeSet<String> = generate_candidates(&db, &cfg)
        .unwrap()
        .iter()
        .map(|c| c.id().to_string())
        .collect();
    let want: BTreeSet<String> = [
        "Cites(E1,E2) & Mentions(E2,E3) -> Mentions(E1,E3)",
        "Cites(E1,E2) & Mentions(E2,E3) -> !Mentions(E1,E3)",
        "-> !Mentions(A,B)",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    assert_eq!(got, want);
}

#[test]
fn dataset_round_trips_through_directory() {
    let task = synth::recovery(2);
    let dir = tempfile::tempdir().unwrap();
    task.data.write_dir(dir.path()).unwrap();
    assert_eq!(Dataset::read_dir(dir.path()).unwrap(), task.data);
}

fn step() -> impl Strategy<Value = (PredId, bool)> {
    (0u32..3, any::<bool>()).prop_map(|(p, inv)| (PredId(p), inv))
}

proptest! {
    #[test]
    fn clause_text_round_trips(steps in prop::collection::vec(step(), 0..5), negated: bool) {
        let s = schema();
        let clause = PathClause::from_steps(&steps, PredId(3), negated, &s);
        let parsed = PathClause::parse(clause.id(), &s).unwrap();
        prop_assert_eq!(parsed.id(), clause.id());
        prop_assert_eq!(parsed.steps(), clause.steps());
        prop_assert_eq!(parsed.head_negated(), negated);
    }

    #[test]
    fn clause_and_model_files_round_trip(
        steps in prop::collection::vec(prop::collection::vec(step(), 1..4), 1..6),
        weights in prop::collection::vec(0.0..100.0f64, 6),
        coverage in 0usize..1000,
    ) {
        let s = schema();
        let clauses: Vec<PathClause> = steps
            .iter()
            .map(|st| PathClause::from_steps(st, PredId(3), false, &s).with_coverage(coverage))
            .collect();
        let mut buf = Vec::new();
        write_clauses(&clauses, &mut buf).unwrap();
        let back = read_clauses(buf.as_slice(), &s).unwrap();
        prop_assert_eq!(&back, &clauses);

        let model = Model::new(clauses.clone(), weights[..clauses.len()].to_vec()).unwrap();
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let read: Model = read_model(buf.as_slice(), &s).unwrap();
        for (a, b) in read.weights.iter().zip(&model.weights) {
            prop_assert!((a - b).abs() <= 1e-10 * b.max(1.0));
        }
        let mut again = Vec::new();
        write_model(&read, &mut again).unwrap();
        prop_assert_eq!(again, buf);
    }

    #[test]
    fn records_round_trip(values in prop::collection::vec(0.0..=1.0f64, 1..20)) {
        let records: Vec<AtomRecord> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| AtomRecord::new("p0", &format!("a{i}"), &format!("b{i}"), v))
            .collect();
        let text: String = records.iter().map(|r| r.to_tsv_line() + "\n").collect();
        prop_assert_eq!(read_records(text.as_bytes()).unwrap(), records);
    }

    #[test]
    fn auc_matches_pairwise_count(
        scored in prop::collection::vec((0u8..6, any::<bool>()), 2..60),
    ) {
        let scores: Vec<f64> = scored.iter().map(|&(s, _)| s as f64 / 5.0).collect();
        let labels: Vec<bool> = scored.iter().map(|&(_, l)| l).collect();
        let n_pos = labels.iter().filter(|&&l| l).count();
        prop_assume!(n_pos > 0 && n_pos < labels.len());
        let auc = auc_roc(&scores, &labels).unwrap().auc;
        prop_assert!((auc - hlsl_oracle::pairwise_auc(&scores, &labels)).abs() <= 1e-12);
        // invariant under strictly increasing transforms
        let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        prop_assert_eq!(auc_roc(&warped, &labels).unwrap().auc, auc);
        // reversing the ranking mirrors the score
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((auc_roc(&flipped, &labels).unwrap().auc - (1.0 - auc)).abs() <= 1e-12);
    }
}

#[test]
fn recovered_model_ranks_held_out_targets() {
    let task = synth::recovery(21);
    let train: Database = task.data.training_db().unwrap();
    let test: Database = task.data.test_db(false).unwrap();
    let candidates: Vec<PathClause> = task
        .candidates
        .iter()
        .map(|c| PathClause::parse(c, &task.data.schema).unwrap())
        .collect();
    let cfg = LearnConfig::default();
    let labels: Vec<bool> = task.data.test.iter().map(|r| r.value >= 0.5).collect();
    for model in [
        ppll_structure_learn(&candidates, &train, &cfg)
            .unwrap()
            .model,
        gls_structure_learn(&candidates, &train, &cfg)
            .unwrap()
            .model,
    ] {
        let solution = map_infer(&model, &test, &MapConfig::default());
        let scores: Vec<f64> = solution.values.iter().map(|&(_, y)| y).collect();
        let auc = auc_roc(&scores, &labels).unwrap().auc;
        assert!(auc >= 0.9, "auc {auc}");
    }
}
