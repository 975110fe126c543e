//! Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Run with `cargo test -p debtscan --test acceptance`.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use debtscan::corpus::synthetic::{generate_synthetic_corpus, SyntheticConfig};
use debtscan::evaluation::{estimate_prevalence, weighted_auroc, BinaryMetrics};
use debtscan::features::FeatureRegistry;
use debtscan::gbm::{best_split, sigmoid, xentropy, xentropy_grad_hess, TrainConfig};
use debtscan::pipeline::{run_end_to_end, PipelineConfig, RunOutcome};
use debtscan::textprep::stem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Tolerances and budgets.
const FD_STEP: f64 = 1e-4;
const FD_TOL: f64 = 1e-6;
const FD_PAIRS: usize = 1_000;
const FD_BUDGET: Duration = Duration::from_secs(1);

const SPLIT_DATASETS: usize = 200;
const SPLIT_TOL: f64 = 1e-12;
const SPLIT_BUDGET: Duration = Duration::from_secs(10);

const METRIC_INSTANCES: usize = 500;
const METRIC_TOL: f64 = 1e-12;
const METRIC_BUDGET: Duration = Duration::from_secs(5);

const E2E_MIN_MARGIN: f64 = 0.05;
const E2E_BUDGET: Duration = Duration::from_secs(120);

const PREV_TRUE: f64 = 0.16;
const PREV_TOL: f64 = 0.02;
const PREV_NAIVE_MIN: f64 = 0.25;
const PREV_P_TD: f64 = 0.4;
const PREV_P_OTHER: f64 = 0.1;
const PREV_REPS: usize = 20;
const PREV_MIN_COVERED: usize = 15;
const PREV_BUDGET: Duration = Duration::from_secs(300);

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { name, pass, detail }
}

fn objective_gradient() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..FD_PAIRS {
        let f: f64 = rng.random_range(-6.0..6.0);
        let y: f64 = rng.random_range(0.0..=1.0);
        let (g, h) = xentropy_grad_hess(f, y);
        let fd_g = (xentropy(f + FD_STEP, y) - xentropy(f - FD_STEP, y)) / (2.0 * FD_STEP);
        let fd_h = (xentropy_grad_hess(f + FD_STEP, y).0 - xentropy_grad_hess(f - FD_STEP, y).0) / (2.0 * FD_STEP);
        worst = worst.max((g - fd_g).abs()).max((h - fd_h).abs());
    }
    let t = start.elapsed();
    check(
        "objective gradient/hessian vs finite differences",
        worst <= FD_TOL && t < FD_BUDGET,
        format!("{FD_PAIRS} pairs, max error {worst:.2e} (tol {FD_TOL:.0e}), {:.3}s", t.as_secs_f64()),
    )
}

fn split_search() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut mismatches = Vec::new();
    let mut found = 0;
    for case in 0..SPLIT_DATASETS {
        let n = rng.random_range(2..=50);
        let nf = rng.random_range(1..=5);
        let grid = rng.random_bool(0.5);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..nf)
                    .map(|_| {
                        if grid {
                            rng.random_range(0..6) as f64
                        } else {
                            rng.random_range(-10.0..10.0)
                        }
                    })
                    .collect()
            })
            .collect();
        // Dyadic gradients keep every partial sum exact, so equal partitions
        // give bit-equal gains whatever the summation order.
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-64..=64) as f64 / 64.0).collect();
        let h: Vec<f64> = (0..n).map(|_| rng.random_range(1..=64) as f64 / 256.0).collect();
        let min_leaf = rng.random_range(1..=5);
        let lambda = [0.0, 0.5, 1.0, 2.0][rng.random_range(0..4)];

        let members: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.85)).collect();
        let sub_rows: Vec<Vec<f64>> = members.iter().map(|&i| rows[i].clone()).collect();
        let sub_g: Vec<f64> = members.iter().map(|&i| g[i]).collect();
        let sub_h: Vec<f64> = members.iter().map(|&i| h[i]).collect();

        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let got = best_split(&refs, &members, &g, &h, &common::split_config(min_leaf, lambda));
        let want = common::brute_best_split(&sub_rows, &sub_g, &sub_h, min_leaf, lambda);
        let same = match (got, want) {
            (None, None) => true,
            (Some(s), Some((f, t, gain))) => {
                found += 1;
                s.feature == f && (s.threshold - t).abs() <= SPLIT_TOL && (s.gain - gain).abs() <= SPLIT_TOL
            }
            _ => false,
        };
        if !same {
            mismatches.push(case);
        }
    }
    let t = start.elapsed();
    check(
        "split search equals exhaustive search",
        mismatches.is_empty() && t < SPLIT_BUDGET,
        format!(
            "{SPLIT_DATASETS} datasets ({found} with a split), mismatches {mismatches:?}, {:.3}s",
            t.as_secs_f64()
        ),
    )
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut auroc_bad, mut pr_bad, mut const_bad, mut defined) = (0, 0, 0, 0);
    for _ in 0..METRIC_INSTANCES {
        let n = rng.random_range(1..=12);
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64 / 4.0).collect();
        let y: Vec<f64> = (0..n).map(|_| [0.0, 0.2, 0.5, 0.6, 1.0][rng.random_range(0..5)]).collect();
        let w: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.01..10.0) })
            .collect();
        let c = rng.random_range(0.1..5.0);
        let cw = vec![c; n];
        let ones = vec![1.0; n];

        let got = weighted_auroc(&s, &y, &w).ok();
        let want = common::brute_auroc(&s, &y, &w);
        defined += want.is_some() as usize;
        if !common::close(got, want, METRIC_TOL) {
            auroc_bad += 1;
        }
        let m = BinaryMetrics::compute(&s, &y, &w, 0.5).unwrap();
        let (acc, prec, rec) = common::hand_metrics(&s, &y, &w, 0.5);
        if !(common::close(m.accuracy, acc, METRIC_TOL)
            && common::close(m.precision, prec, METRIC_TOL)
            && common::close(m.recall, rec, METRIC_TOL))
        {
            pr_bad += 1;
        }
        let mc = BinaryMetrics::compute(&s, &y, &cw, 0.5).unwrap();
        let mu = BinaryMetrics::compute(&s, &y, &ones, 0.5).unwrap();
        let same = common::close(mc.accuracy, mu.accuracy, METRIC_TOL)
            && common::close(mc.precision, mu.precision, METRIC_TOL)
            && common::close(mc.recall, mu.recall, METRIC_TOL)
            && common::close(weighted_auroc(&s, &y, &cw).ok(), weighted_auroc(&s, &y, &ones).ok(), METRIC_TOL);
        if !same {
            const_bad += 1;
        }
    }
    let t = start.elapsed();
    check(
        "weighted metrics match pairwise/hand oracles",
        auroc_bad + pr_bad + const_bad == 0 && t < METRIC_BUDGET,
        format!(
            "{METRIC_INSTANCES} instances ({defined} with defined AUROC), failures auroc {auroc_bad} / \
             acc-prec-rec {pr_bad} / constant-weight {const_bad}, {:.3}s",
            t.as_secs_f64()
        ),
    )
}

fn e2e_config(dir: &std::path::Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.paths.out_dir = Some(dir.to_path_buf());
    cfg
}

fn e2e_benchmark(run: &Result<(RunOutcome, Duration), String>) -> Outcome {
    let name = "end-to-end synthetic benchmark";
    let (o, t) = match run {
        Ok(r) => r,
        Err(e) => return check(name, false, format!("run failed: {e}")),
    };
    let r = &o.report;
    let main = r.main.weighted.auroc.value.unwrap_or(f64::NAN);
    let kp = r.keyphrase.weighted.auroc.value.unwrap_or(f64::NAN);
    let pass = main - kp >= E2E_MIN_MARGIN && main > 0.5 && kp > 0.5 && *t < E2E_BUDGET;
    check(
        name,
        pass,
        format!(
            "{} tickets, {} labels, holdout {}: weighted AUROC model {main:.3} vs keyphrase(k={}) {kp:.3}, \
             margin {:.3} (min {E2E_MIN_MARGIN}), {:.1}s",
            r.n_tickets,
            r.n_labeled,
            r.n_holdout,
            r.keyphrase_k,
            main - kp,
            t.as_secs_f64()
        ),
    )
}

fn prevalence_recovery() -> Outcome {
    let start = Instant::now();
    let (_, truth) = generate_synthetic_corpus(&SyntheticConfig {
        n_tickets: 5000,
        td_rate: PREV_TRUE,
        seed: 21,
    })
    .unwrap();
    let mut covered = 0;
    let mut first = None;
    let mut worst_err: f64 = 0.0;
    for rep in 0..PREV_REPS as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep);
        let (mut y, mut p) = (Vec::new(), Vec::new());
        for &td in truth.values() {
            let pi = if td == 1 { PREV_P_TD } else { PREV_P_OTHER };
            if rng.random_bool(pi) {
                y.push(td as f64);
                p.push(pi);
            }
        }
        let est = estimate_prevalence(&y, &p, truth.len(), 500, 2000 + rep).unwrap();
        worst_err = worst_err.max((est.corrected_rate - PREV_TRUE).abs());
        if est.ci_lo <= PREV_TRUE && PREV_TRUE <= est.ci_hi {
            covered += 1;
        }
        first.get_or_insert(est);
    }
    let first = first.unwrap();
    let t = start.elapsed();
    let pass = (first.corrected_rate - PREV_TRUE).abs() <= PREV_TOL
        && first.naive_rate > PREV_NAIVE_MIN
        && covered >= PREV_MIN_COVERED
        && t < PREV_BUDGET;
    check(
        "prevalence recovery under 4x oversampling",
        pass,
        format!(
            "naive {:.3} (> {PREV_NAIVE_MIN}), corrected {:.3} (target {PREV_TRUE} ± {PREV_TOL}), \
             CI covers in {covered}/{PREV_REPS} (min {PREV_MIN_COVERED}), worst |err| {worst_err:.3}, {:.2}s",
            first.naive_rate,
            first.corrected_rate,
            t.as_secs_f64()
        ),
    )
}

fn hyperparameters(run: &Result<(RunOutcome, Duration), String>) -> Outcome {
    let name = "default hyperparameters and tree constraints";
    let d = TrainConfig::default();
    let defaults = d.num_trees == 60 && d.max_leaves == 9 && d.min_data_in_leaf == 10 && d.learning_rate == 0.04;
    let Ok((o, _)) = run else {
        return check(name, false, "synthetic run failed".into());
    };
    let max_leaves = o.model.trees.iter().map(|t| t.n_leaves()).max().unwrap_or(0);
    let min_leaf = o.model.trees.iter().flat_map(|t| t.leaf_counts()).min().unwrap_or(0);
    let split_trees = o.model.trees.iter().filter(|t| t.n_leaves() > 1).count();
    check(
        name,
        defaults && o.model.trees.len() == 60 && max_leaves <= 9 && min_leaf >= 10 && split_trees > 0,
        format!(
            "defaults {defaults}, {} trees ({split_trees} split), max leaves {max_leaves}, min leaf rows {min_leaf}",
            o.model.trees.len()
        ),
    )
}

fn sigmoid_anchors() -> Outcome {
    let a = format!("{:.3}", sigmoid(-0.76));
    let b = format!("{:.3}", sigmoid(-0.6));
    check("sigmoid anchors", a == "0.319" && b == "0.354", format!("-0.76 -> {a}, -0.6 -> {b}"))
}

fn registry() -> Outcome {
    let names: Vec<String> = FeatureRegistry::default().names().into_iter().map(String::from).collect();
    let expected = common::expected_feature_names();
    let layout = names == expected && names.len() == 105;
    let a = common::featurize_fixture();
    let b = common::featurize_fixture();
    let bits = |m: &debtscan::features::FeatureMatrix| -> Vec<u64> {
        m.rows.iter().flatten().map(|x| x.to_bits()).collect()
    };
    let identical = a.ids == b.ids && bits(&a) == bits(&b) && a.names() == expected;
    check(
        "feature registry layout and fixture determinism",
        layout && identical,
        format!(
            "{} names (expected 105, order match {}), fixture {} x {} bit-identical {identical}",
            names.len(),
            names == expected,
            a.n_rows(),
            a.n_cols()
        ),
    )
}

fn determinism(run: &Result<(RunOutcome, Duration), String>, first_dir: &std::path::Path) -> Outcome {
    let name = "run-all determinism";
    if let Err(e) = run {
        return check(name, false, format!("first run failed: {e}"));
    }
    let dir = tempfile::tempdir().unwrap();
    if let Err(e) = run_end_to_end(&e2e_config(dir.path())) {
        return check(name, false, format!("second run failed: {e}"));
    }
    let a = common::read_tree(first_dir);
    let b = common::read_tree(dir.path());
    let names_a: BTreeSet<_> = a.iter().map(|(p, _)| p.clone()).collect();
    let names_b: BTreeSet<_> = b.iter().map(|(p, _)| p.clone()).collect();
    let differing: Vec<String> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.display().to_string())
        .collect();
    check(
        name,
        names_a == names_b && differing.is_empty() && a.len() >= 10,
        format!("{} files compared, differing {differing:?}", a.len()),
    )
}

fn porter() -> Outcome {
    let pairs = common::porter_pairs();
    let wrong: Vec<&(String, String)> = pairs.iter().filter(|(w, s)| stem(w) != *s).collect();
    check(
        "Porter stemmer fixture",
        wrong.is_empty() && !pairs.is_empty(),
        format!(
            "{}/{} exact, first misses {:?}",
            pairs.len() - wrong.len(),
            pairs.len(),
            &wrong[..wrong.len().min(3)]
        ),
    )
}

fn main() -> ExitCode {
    // Cargo passes libtest flags such as `--nocapture`; nothing here is filterable.
    let e2e_dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let run = run_end_to_end(&e2e_config(e2e_dir.path()))
        .map(|o| (o, start.elapsed()))
        .map_err(|e| e.to_string());

    let outcomes = [
        objective_gradient(),
        split_search(),
        metric_oracles(),
        e2e_benchmark(&run),
        prevalence_recovery(),
        hyperparameters(&run),
        sigmoid_anchors(),
        registry(),
        determinism(&run, e2e_dir.path()),
        porter(),
    ];
    let mut failed = 0;
    for o in &outcomes {
        println!("{} {} — {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
        failed += !o.pass as usize;
    }
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
