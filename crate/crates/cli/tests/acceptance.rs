//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers. Run with `cargo test -p namerec-cli --test acceptance`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use namerec_core::acg::{build_acg, AggregatedCallGraph};
use namerec_core::corpus::{extract_all, MethodRecord};
use namerec_core::embed::{self, init_embeddings, train, EmbeddingTable, TrainConfig};
use namerec_core::eval::{generate_synthetic_corpus, run_evaluation, EvalConfig};
use namerec_core::lexicon::Lexicon;
use namerec_core::recommend::{query_embedding, top_k};

fn record(name: &str, callees: &[&str]) -> MethodRecord {
    MethodRecord {
        name: name.to_string(),
        package_name: String::new(),
        path: String::new(),
        callees: callees.iter().map(|s| s.to_string()).collect(),
    }
}

/// Central finite differences over the loss; the independent check on the
/// analytic gradient.
#[allow(clippy::needless_range_loop)]
fn numeric_gradient(
    table: &EmbeddingTable,
    graph: &AggregatedCallGraph,
    alpha: f64,
    name: &str,
) -> Vec<f64> {
    const H: f64 = 1e-5;
    let idx = table.names().iter().position(|n| n == name).unwrap();
    let dim = table.dim();
    let mut pairs: Vec<(String, Vec<f64>)> = table
        .iter()
        .map(|(n, v)| (n.to_string(), v.to_vec()))
        .collect();
    let mut grad = vec![0.0; dim];
    for d in 0..dim {
        let original = pairs[idx].1[d];
        pairs[idx].1[d] = original + H;
        let plus = embed::loss(
            &EmbeddingTable::from_pairs(dim, pairs.clone()).unwrap(),
            graph,
            alpha,
        )
        .unwrap();
        pairs[idx].1[d] = original - H;
        let minus = embed::loss(
            &EmbeddingTable::from_pairs(dim, pairs.clone()).unwrap(),
            graph,
            alpha,
        )
        .unwrap();
        pairs[idx].1[d] = original;
        grad[d] = (plus - minus) / (2.0 * H);
    }
    grad
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    diff / norm(a).max(norm(b)).max(1e-12)
}

/// Criterion 1: analytic gradient vs central finite differences over 102
/// seeded random graphs, every node checked.
#[test]
fn acceptance_1_gradient_oracle() {
    use rand::{Rng, SeedableRng};
    let start = Instant::now();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20_240_501);
    let alphas = [0.1, 0.5, 0.9];
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for config in 0..102 {
        let node_count = rng.random_range(2..=20usize);
        let dim = rng.random_range(1..=8usize);
        let alpha = alphas[config % alphas.len()];
        let names: Vec<String> = (0..node_count).map(|i| format!("m{i:02}")).collect();
        let records: Vec<MethodRecord> = names
            .iter()
            .map(|caller| {
                let callees: Vec<&str> = names
                    .iter()
                    .filter(|_| rng.random_bool(0.2))
                    .map(|s| s.as_str())
                    .collect();
                record(caller, &callees)
            })
            .collect();
        let graph = build_acg(&records);
        let pairs: Vec<(String, Vec<f64>)> = graph
            .names()
            .iter()
            .map(|n| {
                let v: Vec<f64> = (0..dim)
                    .map(|_| {
                        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                        sign * rng.random_range(0.2..1.2)
                    })
                    .collect();
                (n.clone(), v)
            })
            .collect();
        let table = EmbeddingTable::from_pairs(dim, pairs).unwrap();
        for name in graph.names() {
            let analytic = embed::gradient(&table, &graph, alpha, name).unwrap();
            let numeric = numeric_gradient(&table, &graph, alpha, name);
            let err = relative_error(&analytic, &numeric);
            worst = worst.max(err);
            checked += 1;
            assert!(
                err < 1e-5,
                "criterion 1 FAILED: config {config}, node {name}, relative error {err}"
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "criterion 1 FAILED: runtime {elapsed:?} exceeds 10 s"
    );
    println!(
        "[PASS] criterion 1: gradient oracle, {checked} gradients over 102 graphs, \
         worst relative error {worst:.3e}, {elapsed:.2?}"
    );
}

/// Criterion 2: hand-derived loss and gradient values on the two-node,
/// one-edge, one-dimensional instance, exact to 1e-12.
#[test]
fn acceptance_2_hand_derived_values() {
    let graph = build_acg(&[record("a", &["b"])]);
    let table = EmbeddingTable::from_pairs(
        1,
        vec![("a".into(), vec![0.5]), ("b".into(), vec![1.0])],
    )
    .unwrap();
    let loss = embed::loss(&table, &graph, 0.5).unwrap();
    let grad_a = embed::gradient(&table, &graph, 0.5, "a").unwrap()[0];
    let grad_b = embed::gradient(&table, &graph, 0.5, "b").unwrap()[0];
    assert!((loss - 0.25).abs() < 1e-12, "criterion 2 FAILED: loss {loss}");
    assert!(
        (grad_a + 1.0).abs() < 1e-12,
        "criterion 2 FAILED: grad(a) {grad_a}"
    );
    assert!(
        (grad_b - 0.5).abs() < 1e-12,
        "criterion 2 FAILED: grad(b) {grad_b}"
    );
    println!(
        "[PASS] criterion 2: hand-derived values, loss {loss}, grad(a) {grad_a}, grad(b) {grad_b}"
    );
}

fn toy_graph() -> AggregatedCallGraph {
    build_acg(&[
        record("startApp", &["parseArgs", "loadConfig", "runAll"]),
        record("runAll", &["readData", "transformData", "writeData"]),
        record("transformData", &["normalizeRow", "clampRow"]),
        record("readData", &["openStream"]),
        record("writeData", &["openStream"]),
    ])
}

/// Criterion 3: 500 steps on the 10-node toy graph pull norms to 1 and at
/// least halve the loss. Negatives are 2 because the default count of 10,
/// sized for corpus-scale graphs, would sweep the whole eligible pool of a
/// 10-node graph every step.
#[test]
fn acceptance_3_norm_regularization() {
    let start = Instant::now();
    let graph = toy_graph();
    assert_eq!(graph.node_count(), 10);
    let cfg = TrainConfig {
        dim: 4,
        loops: 500,
        batch_size: 10,
        negatives: 2,
        alpha: 0.5,
        seed: 3,
        ..TrainConfig::default()
    };
    let initial = embed::loss(&init_embeddings(&graph, cfg.dim, cfg.seed), &graph, cfg.alpha)
        .unwrap();
    let outcome = train(&graph, &cfg).unwrap();
    let final_loss = embed::loss(&outcome.table, &graph, cfg.alpha).unwrap();
    let mean_norm_gap: f64 = outcome
        .table
        .iter()
        .map(|(_, v)| (norm(v) - 1.0).abs())
        .sum::<f64>()
        / outcome.table.len() as f64;
    let elapsed = start.elapsed();
    assert!(
        mean_norm_gap < 0.2,
        "criterion 3 FAILED: mean norm gap {mean_norm_gap}"
    );
    assert!(
        final_loss < 0.5 * initial,
        "criterion 3 FAILED: loss {initial} -> {final_loss}"
    );
    assert!(
        elapsed.as_secs_f64() < 5.0,
        "criterion 3 FAILED: runtime {elapsed:?} exceeds 5 s"
    );
    println!(
        "[PASS] criterion 3: norm regularization, mean norm gap {mean_norm_gap:.4}, \
         loss {initial:.4} -> {final_loss:.4}, {elapsed:.2?}"
    );
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_namerec")
}

fn run_cli(args: &[&str]) -> std::process::Output {
    let output = Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "namerec {:?} failed: {}",
        args,
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

/// Criterion 4: extraction plus graph building over the hand-written 5-file
/// fixture corpus reproduces the hand-enumerated node and edge sets
/// bit-exactly, through the CLI artifacts.
#[test]
fn acceptance_4_acg_oracle_equivalence() {
    let start = Instant::now();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let corpus = fixtures.join("corpus5");
    let expected = std::fs::read(fixtures.join("expected_acg.tsv")).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.jsonl");
    let graph = dir.path().join("acg.tsv");
    run_cli(&[
        "extract",
        "--root",
        corpus.to_str().unwrap(),
        "--out",
        records.to_str().unwrap(),
    ]);
    run_cli(&[
        "graph",
        "--records",
        records.to_str().unwrap(),
        "--out",
        graph.to_str().unwrap(),
    ]);
    let produced = std::fs::read(&graph).unwrap();
    let elapsed = start.elapsed();
    assert!(
        produced == expected,
        "criterion 4 FAILED: graph file differs from the hand enumeration"
    );
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "criterion 4 FAILED: runtime {elapsed:?} exceeds 1 s"
    );
    println!(
        "[PASS] criterion 4: ACG oracle equivalence, {} bytes bit-identical, {elapsed:.2?}",
        produced.len()
    );
}

/// Criterion 5: leave-one-out family recall on the 10x20 synthetic corpus
/// with 15-name private pools. A hit is any same-family name (sibling method
/// or private pool callee) in the top 10 after excluding the query's own
/// name. The 90% threshold was confirmed on the first seeded run (measured
/// 100%) and frozen; the exhaustively computed random-ranking baseline must
/// also be beaten.
#[test]
fn acceptance_5_synthetic_leave_one_out_recall() {
    let start = Instant::now();
    let corpus = generate_synthetic_corpus(10, 20, 15, 1).unwrap();
    let extracted = extract_all(&corpus.units, false);
    let records: Vec<MethodRecord> = extracted
        .iter()
        .flat_map(|e| e.records.iter().cloned())
        .collect();
    assert_eq!(records.len(), 200);
    let graph = build_acg(&records);
    let cfg = TrainConfig {
        dim: 32,
        loops: 1000,
        seed: 1,
        ..TrainConfig::default()
    };
    let table = train(&graph, &cfg).unwrap().table;

    let family_sets: Vec<BTreeSet<String>> =
        (0..10).map(|f| corpus.family_names(f)).collect();

    let mut hits = 0usize;
    let mut baseline_sum = 0.0f64;
    for method in &corpus.plan {
        let family = &family_sets[method.family];
        let exclude: BTreeSet<String> = [method.name.clone()].into();
        let (query, skipped) = query_embedding(&table, &method.callees).unwrap();
        assert!(skipped.is_empty(), "criterion 5: callee missing from table");
        let list = top_k(&table, &query, 10, &exclude).unwrap();
        if list.entries.iter().any(|c| family.contains(&c.name)) {
            hits += 1;
        }

        // Exhaustive random-ranking baseline: probability that a uniform
        // 10-subset of the candidate pool contains a same-family name.
        let candidates = (table.len() - 1) as f64;
        let family_count = (family.len() - 1) as f64;
        let mut miss = 1.0f64;
        for j in 0..10 {
            miss *= (candidates - family_count - j as f64) / (candidates - j as f64);
        }
        baseline_sum += 1.0 - miss;
    }
    let recall = hits as f64 / corpus.plan.len() as f64;
    let baseline = baseline_sum / corpus.plan.len() as f64;
    let elapsed = start.elapsed();
    assert!(
        recall >= 0.90,
        "criterion 5 FAILED: recall {recall:.4} below the frozen 0.90 threshold"
    );
    assert!(
        recall > baseline,
        "criterion 5 FAILED: recall {recall:.4} does not beat the random baseline {baseline:.4}"
    );
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "criterion 5 FAILED: runtime {elapsed:?} exceeds 60 s"
    );
    println!(
        "[PASS] criterion 5: leave-one-out recall {recall:.4} ({hits}/200) vs random baseline \
         {baseline:.4}, {elapsed:.2?}"
    );
}

/// Criterion 6: `evaluate --folds 5 --seed 7` over the synthetic corpus twice
/// produces byte-identical reports and per-fold embedding files.
#[test]
fn acceptance_6_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    run_cli(&[
        "synth",
        "--families",
        "6",
        "--methods",
        "10",
        "--pool",
        "8",
        "--seed",
        "5",
        "--out",
        corpus.to_str().unwrap(),
    ]);

    let evaluate = |out_dir: &Path| {
        let report = out_dir.join("report.json");
        let embs = out_dir.join("embs");
        run_cli(&[
            "evaluate",
            "--root",
            corpus.to_str().unwrap(),
            "--folds",
            "5",
            "--seed",
            "7",
            "--top",
            "10",
            "--dim",
            "16",
            "--loops",
            "200",
            "--batch",
            "50",
            "--negatives",
            "5",
            "--out",
            report.to_str().unwrap(),
            "--emb-dir",
            embs.to_str().unwrap(),
        ]);
        let mut blobs = vec![std::fs::read(&report).unwrap()];
        for fold in 1..=5 {
            blobs.push(std::fs::read(embs.join(format!("fold{fold}.txt"))).unwrap());
        }
        blobs
    };

    let first = evaluate(&dir.path().join("run1"));
    let second = evaluate(&dir.path().join("run2"));
    assert!(
        first == second,
        "criterion 6 FAILED: repeated evaluation is not byte-identical"
    );
    let bytes: usize = first.iter().map(Vec::len).sum();
    println!(
        "[PASS] criterion 6: determinism, report and 5 embedding files byte-identical \
         ({bytes} bytes compared)"
    );
}

/// Criterion 7 (optional): on a real corpus, getter/setter verb correctness
/// should not fall below the hint-absent category. Runs only when
/// REAL_CORPUS_DIR points at a Java tree; otherwise reports a skip. Not a
/// hard gate either way.
#[test]
fn acceptance_7_qualitative_trend_on_real_data() {
    let Some(root) = std::env::var_os("REAL_CORPUS_DIR") else {
        println!(
            "[SKIP] criterion 7: qualitative trend, set REAL_CORPUS_DIR to a Java tree to run"
        );
        return;
    };
    let root = PathBuf::from(root);
    let scan = namerec_core::corpus::scan_corpus(
        &root,
        &namerec_core::corpus::ScanOptions::default(),
    )
    .unwrap();
    let cleansed = namerec_core::corpus::cleanse(extract_all(&scan.units, true));
    let methods: usize = cleansed.kept.iter().map(|e| e.records.len()).sum();
    if methods < 200 {
        println!("[SKIP] criterion 7: qualitative trend, corpus has only {methods} methods");
        return;
    }
    let cfg = EvalConfig {
        folds: 5,
        top_k: 10,
        seed: 7,
        train: TrainConfig {
            dim: 64,
            loops: 2000,
            seed: 7,
            ..TrainConfig::default()
        },
        parallel: true,
    };
    let outcome = run_evaluation(&cleansed.kept, &Lexicon::shipped(), &cfg).unwrap();
    let getter = outcome.report.categories.verb.getter_setter;
    let absent = outcome.report.categories.verb.hint_absent;
    let holds = getter.ratio() >= absent.ratio();
    println!(
        "[{}] criterion 7: qualitative trend on {methods} methods, getter/setter \
         {:.2}% ({} / {}) vs hint-absent {:.2}% ({} / {})",
        if holds { "PASS" } else { "WARN" },
        100.0 * getter.ratio(),
        getter.correct,
        getter.total,
        100.0 * absent.ratio(),
        absent.correct,
        absent.total,
    );
}

/// Criterion 8: report arithmetic. Fold sums equal corpus totals, every
/// ratio is a probability, and the exclusion counters account for every
/// method that was dropped.
#[test]
fn acceptance_8_report_arithmetic() {
    let corpus = generate_synthetic_corpus(6, 10, 8, 44).unwrap();
    let extracted = extract_all(&corpus.units, false);
    let total_methods: u64 = extracted.iter().map(|e| e.records.len() as u64).sum();
    let cfg = EvalConfig {
        folds: 5,
        top_k: 10,
        seed: 7,
        train: TrainConfig {
            dim: 16,
            loops: 150,
            batch_size: 50,
            negatives: 5,
            seed: 7,
            ..TrainConfig::default()
        },
        parallel: false,
    };
    let report = run_evaluation(&extracted, &Lexicon::shipped(), &cfg)
        .unwrap()
        .report;

    let mut verb_sum = namerec_core::eval::CategoryCounts::default();
    let mut noun_sum = namerec_core::eval::CategoryCounts::default();
    for fold in &report.folds {
        verb_sum.merge(&fold.verb);
        noun_sum.merge(&fold.noun);
    }
    assert_eq!(verb_sum, report.categories.verb, "criterion 8 FAILED: verb fold sums");
    assert_eq!(noun_sum, report.categories.noun, "criterion 8 FAILED: noun fold sums");

    let verb_total = report.categories.verb.task_total();
    let noun_total = report.categories.noun.task_total();
    assert_eq!(report.tasks.verb, verb_total, "criterion 8 FAILED: verb task totals");
    assert_eq!(report.tasks.noun, noun_total, "criterion 8 FAILED: noun task totals");

    assert_eq!(
        verb_total.total + report.exclusions.no_verb + report.exclusions.no_known_callees,
        total_methods,
        "criterion 8 FAILED: verb accounting"
    );
    assert_eq!(
        noun_total.total + report.exclusions.no_noun + report.exclusions.no_known_callees,
        total_methods,
        "criterion 8 FAILED: noun accounting"
    );

    for counts in [
        report.categories.verb.getter_setter,
        report.categories.verb.hint_present,
        report.categories.verb.hint_absent,
        report.categories.verb.merged,
        report.categories.noun.getter_setter,
        report.categories.noun.hint_present,
        report.categories.noun.hint_absent,
        report.categories.noun.merged,
        report.tasks.verb,
        report.tasks.noun,
    ] {
        assert!(counts.correct <= counts.total, "criterion 8 FAILED: correct > total");
        assert!(
            (0.0..=1.0).contains(&counts.ratio()),
            "criterion 8 FAILED: ratio out of range"
        );
    }
    println!(
        "[PASS] criterion 8: report arithmetic over {total_methods} methods, verb {}/{}, \
         noun {}/{}, exclusions {:?}",
        report.tasks.verb.correct,
        report.tasks.verb.total,
        report.tasks.noun.correct,
        report.tasks.noun.total,
        report.exclusions
    );
}
