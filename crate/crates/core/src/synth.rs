//! Seeded synthetic tasks with known generating rules.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{AtomRecord, Schema};
use crate::dataset::Dataset;

/// A dataset together with candidate clauses (in clause-file syntax) and the
/// subset of them that generated the labels.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthTask {
    pub data: Dataset,
    pub candidates: Vec<String>,
    pub true_rules: Vec<String>,
}

type Pair = (usize, usize);

fn entity(i: usize) -> String {
    format!("e{i:03}")
}

fn schema(evidence: &[&str], target: &str) -> Schema {
    let mut s = Schema::new();
    for p in evidence {
        s.add(p, false).expect("distinct names");
    }
    s.add(target, true).expect("distinct names");
    s
}

fn random_edges(rng: &mut ChaCha8Rng, n: usize, count: usize) -> BTreeSet<Pair> {
    let mut edges = BTreeSet::new();
    while edges.len() < count {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            edges.insert((a, b));
        }
    }
    edges
}

fn records(pred: &str, edges: &BTreeSet<Pair>) -> Vec<AtomRecord> {
    edges
        .iter()
        .map(|&(a, b)| AtomRecord::new(pred, &entity(a), &entity(b), 1.0))
        .collect()
}

/// Pairs `(a, c)` joined by `first(a, b) & second(b, c)` with distinct ends.
fn compose(first: &BTreeSet<Pair>, second: &BTreeSet<Pair>) -> BTreeSet<Pair> {
    let mut out = BTreeSet::new();
    for &(a, b) in first {
        for &(_, c) in second.range((b, 0)..(b + 1, 0)) {
            if a != c {
                out.insert((a, c));
            }
        }
    }
    out
}

/// Draws `count` distinct pairs outside `exclude`.
fn negatives(rng: &mut ChaCha8Rng, n: usize, count: usize, exclude: &BTreeSet<Pair>) -> Vec<Pair> {
    let mut out = BTreeSet::new();
    while out.len() < count {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b && !exclude.contains(&(a, b)) {
            out.insert((a, b));
        }
    }
    out.into_iter().collect()
}

/// Labels, shuffles and splits target pairs; `noise` flips each label.
fn split_targets(
    rng: &mut ChaCha8Rng,
    target: &str,
    positives: &BTreeSet<Pair>,
    negatives: &[Pair],
    noise: f64,
    train_fraction: f64,
) -> (Vec<AtomRecord>, Vec<AtomRecord>) {
    let mut labelled: Vec<(Pair, bool)> = positives
        .iter()
        .map(|&p| (p, true))
        .chain(negatives.iter().map(|&p| (p, false)))
        .collect();
    labelled.shuffle(rng);
    let rows: Vec<AtomRecord> = labelled
        .into_iter()
        .map(|((a, b), label)| {
            let flipped = rng.gen_bool(noise);
            let value = if label != flipped { 1.0 } else { 0.0 };
            AtomRecord::new(target, &entity(a), &entity(b), value)
        })
        .collect();
    let cut = (rows.len() as f64 * train_fraction).round() as usize;
    let (train, test) = rows.split_at(cut);
    (train.to_vec(), test.to_vec())
}

/// The three-atom citation example: one rule path of length two.
pub fn example1() -> Dataset {
    Dataset {
        schema: schema(&["Cites"], "Mentions"),
        observed: vec![AtomRecord::new("Cites", "Paper1", "Paper2", 1.0)],
        train: vec![
            AtomRecord::new("Mentions", "Paper2", "Gene", 1.0),
            AtomRecord::new("Mentions", "Paper1", "Gene", 1.0),
        ],
        test: Vec::new(),
    }
}

pub const RECOVERY_RULES: [&str; 2] =
    ["R1(E1,E2) & R2(E2,E3) -> T(E1,E3)", "R3(E1,E2) -> T(E1,E2)"];

pub const RECOVERY_DECOYS: [&str; 10] = [
    "R1(E1,E2) & R2(E2,E3) -> !T(E1,E3)",
    "R3(E1,E2) -> !T(E1,E2)",
    "D1(E1,E2) -> T(E1,E2)",
    "D2(E1,E2) -> T(E1,E2)",
    "D3(E1,E2) -> T(E1,E2)",
    "D4(E1,E2) -> T(E1,E2)",
    "D1(E1,E2) & D2(E2,E3) -> T(E1,E3)",
    "R1(E1,E2) & D3(E2,E3) -> T(E1,E3)",
    "D4(E1,E2) -> !T(E1,E2)",
    "D3(E1,E2) -> !T(E1,E2)",
];

/// Labels generated by [`RECOVERY_RULES`] with 5% label noise, two negatives
/// per positive, and decoy relations placed on about 15% of target pairs
/// independently of their labels. Candidates are the two rules, ten decoys
/// and the negative prior.
pub fn recovery(seed: u64) -> SynthTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 120;
    let r1 = random_edges(&mut rng, n, 120);
    let r2 = random_edges(&mut rng, n, 120);
    let r3 = random_edges(&mut rng, n, 50);
    let mut positives = compose(&r1, &r2);
    positives.extend(r3.iter().copied());
    let negs = negatives(&mut rng, n, 2 * positives.len(), &positives);
    let mut decoys: Vec<BTreeSet<Pair>> = (0..4).map(|_| random_edges(&mut rng, n, 60)).collect();
    for &pair in positives.iter().chain(&negs) {
        if rng.gen_bool(0.15) {
            decoys[rng.gen_range(0..4)].insert(pair);
        }
    }
    let (train, test) = split_targets(&mut rng, "T", &positives, &negs, 0.05, 0.7);
    let mut observed = records("R1", &r1);
    observed.extend(records("R2", &r2));
    observed.extend(records("R3", &r3));
    for (k, edges) in decoys.iter().enumerate() {
        observed.extend(records(&format!("D{}", k + 1), edges));
    }
    let mut candidates = vec![RECOVERY_RULES[0].to_string()];
    candidates.extend(RECOVERY_DECOYS[..5].iter().map(|s| s.to_string()));
    candidates.push(RECOVERY_RULES[1].to_string());
    candidates.extend(RECOVERY_DECOYS[5..].iter().map(|s| s.to_string()));
    candidates.push("-> !T(A,B)".to_string());
    SynthTask {
        data: Dataset {
            schema: schema(&["R1", "R2", "R3", "D1", "D2", "D3", "D4"], "T"),
            observed,
            train,
            test,
        },
        candidates,
        true_rules: RECOVERY_RULES.iter().map(|s| s.to_string()).collect(),
    }
}

/// `R(E1,E2) -> T(E1,E2)` holds exactly: every positive pair carries an `R`
/// edge and no negative does. The noise relation `S` avoids all target pairs.
pub fn perfect_signal(seed: u64) -> SynthTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 80;
    let r = random_edges(&mut rng, n, 120);
    let negs = negatives(&mut rng, n, 120, &r);
    let mut targets = r.clone();
    targets.extend(negs.iter().copied());
    let noise_edges: BTreeSet<Pair> = negatives(&mut rng, n, 120, &targets).into_iter().collect();
    let (train, test) = split_targets(&mut rng, "T", &r, &negs, 0.0, 0.6);
    let mut observed = records("R", &r);
    observed.extend(records("S", &noise_edges));
    SynthTask {
        data: Dataset {
            schema: schema(&["R", "S"], "T"),
            observed,
            train,
            test,
        },
        candidates: vec![
            "R(E1,E2) -> T(E1,E2)".to_string(),
            "S(E1,E2) -> T(E1,E2)".to_string(),
            "-> !T(A,B)".to_string(),
        ],
        true_rules: vec!["R(E1,E2) -> T(E1,E2)".to_string()],
    }
}

/// A larger task for runtime studies: eight random relations over 250
/// entities, labels from two length-two rules and one direct rule, at least
/// `min_targets` training targets. Candidates are left to clause generation.
pub fn scaling(seed: u64, min_targets: usize) -> SynthTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 250;
    let preds = ["P0", "P1", "P2", "P3", "P4", "P5", "P6", "P7"];
    let edges: Vec<BTreeSet<Pair>> = preds
        .iter()
        .map(|_| random_edges(&mut rng, n, 150))
        .collect();
    let mut positives = compose(&edges[0], &edges[1]);
    positives.extend(compose(&edges[2], &edges[3]));
    positives.extend(edges[4].iter().copied());
    let n_neg = (2 * positives.len()).max(min_targets);
    let negs = negatives(&mut rng, n, n_neg, &positives);
    let (train, _) = split_targets(&mut rng, "T", &positives, &negs, 0.05, 1.0);
    let mut observed = Vec::new();
    for (p, e) in preds.iter().zip(&edges) {
        observed.extend(records(p, e));
    }
    SynthTask {
        data: Dataset {
            schema: schema(&preds, "T"),
            observed,
            train,
            test: Vec::new(),
        },
        candidates: Vec::new(),
        true_rules: vec![
            "P0(E1,E2) & P1(E2,E3) -> T(E1,E3)".to_string(),
            "P2(E1,E2) & P3(E2,E3) -> T(E1,E3)".to_string(),
            "P4(E1,E2) -> T(E1,E2)".to_string(),
        ],
    }
}
