//! Acceptance gate. Prints one line per criterion and fails if any
//! runnable criterion fails. Criteria that need the GMSC training file
//! print SKIP when it is absent; point `KACDP_GMSC_CSV` at the file or place
//! it at `data/cs-training.csv` in the workspace root to run them.
//!
//! The GMSC criteria train on ~120k rows; run them with `--release`.

mod common;

use std::fmt::Display;
use std::fs;
use std::path::PathBuf;

use kan_credit::baseline::train_logistic;
use kan_credit::checkpoint::{network_from_json, network_to_json};
use kan_credit::data::{load_gmsc_csv, split, Dataset, PreprocessPolicy, FEATURE_COLUMNS};
use kan_credit::explain::{edge_scores, export_dot, feature_attribution};
use kan_credit::metrics::{
    confusion_at_threshold, precision_recall_f1, roc_auc, ConfusionCounts, MetricReport,
};
use kan_credit::spline::KnotVector;
use kan_credit::training::{grad_check, mean_loss, train};
use kan_credit::{KanNetwork, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: impl Display) -> Outcome {
    if ok {
        Outcome::Pass(detail.to_string())
    } else {
        Outcome::Fail(detail.to_string())
    }
}

fn gradient_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for widths in [vec![2, 1], vec![10, 1], vec![10, 4, 1]] {
        for trial in 0..20 {
            let mut net = KanNetwork::init(&widths, 5, 3, trial).unwrap();
            common::randomize(&mut net, 0.5, &mut rng);
            let xs = common::random_rows(8, widths[0], &mut rng);
            let ys: Vec<u8> = (0..8).map(|_| u8::from(rng.gen_bool(0.5))).collect();
            worst = worst.max(grad_check(&net, &xs, &ys, 1e-5).unwrap());
        }
    }
    check(
        worst < 1e-4,
        format!("max relative error {worst:.3e} (limit 1e-4)"),
    )
}

fn spline_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut unity, mut deriv) = (0.0f64, 0.0f64);
    let mut support_ok = true;
    for _ in 0..1000 {
        let g = [3, 5, 10, 30, 50, 80][rng.gen_range(0..6)];
        let k = rng.gen_range(1..=4);
        let knots = KnotVector::new(-1.0, 1.0, g, k).unwrap();
        let x: f64 = rng.gen_range(-0.999..0.999);
        let b = knots.basis_values(x);
        unity = unity.max((b.iter().sum::<f64>() - 1.0).abs());
        support_ok &=
            b.iter().filter(|&&v| v != 0.0).count() <= k + 1 && b.iter().all(|&v| v >= 0.0);

        deriv = deriv.max(derivative_error(&knots, x));
    }
    check(
        unity < 1e-10 && deriv < 1e-5 && support_ok,
        format!(
            "unity error {unity:.2e}, derivative error {deriv:.2e}, local support {support_ok}"
        ),
    )
}

/// Worst relative gap between analytic basis derivatives and a five-point
/// central difference taken inside the polynomial piece containing `x`.
/// The stencil is exact for degree <= 4, so what remains is rounding.
fn derivative_error(knots: &KnotVector, x: f64) -> f64 {
    let dist = knots
        .knots()
        .iter()
        .map(|t| (t - x).abs())
        .fold(f64::MAX, f64::min);
    let h = (dist / 2.5).min(1e-2);
    let d = knots.basis_derivatives(x).unwrap();
    let at = |o: f64| knots.basis_values(x + o * h);
    let (p1, m1, p2, m2) = (at(1.0), at(-1.0), at(2.0), at(-2.0));
    let mut worst: f64 = 0.0;
    for i in 0..d.len() {
        let fd = (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * h);
        let scale = d[i].abs().max(fd.abs());
        if scale > 1e-8 {
            worst = worst.max((d[i] - fd).abs() / scale);
        }
    }
    worst
}

fn pairwise_auc(s: &[f64], y: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] == 1 && y[j] == 0 {
                pairs += 1.0;
                wins += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 200 {
        let n = rng.gen_range(2..=64);
        let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0..10) as f64 / 10.0).collect();
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.4))).collect();
        if !y.contains(&0) || !y.contains(&1) {
            continue;
        }
        worst = worst.max((roc_auc(&s, &y).unwrap() - pairwise_auc(&s, &y)).abs());
        done += 1;
    }

    let mut recount_ok = true;
    for _ in 0..100 {
        let s: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..1.0)).collect();
        let y: Vec<u8> = (0..50).map(|_| u8::from(rng.gen_bool(0.3))).collect();
        let c = confusion_at_threshold(&s, &y, 0.5, 1).unwrap();
        let tp = s
            .iter()
            .zip(&y)
            .filter(|(s, y)| **s >= 0.5 && **y == 1)
            .count();
        let fp = s
            .iter()
            .zip(&y)
            .filter(|(s, y)| **s >= 0.5 && **y == 0)
            .count();
        let fn_ = s
            .iter()
            .zip(&y)
            .filter(|(s, y)| **s < 0.5 && **y == 1)
            .count();
        let (p, r, f1) = precision_recall_f1(&c);
        let hp = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let hr = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let hf = if tp == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        };
        recount_ok &= (c.tp, c.fp, c.fn_) == (tp, fp, fn_)
            && (p - hp).abs() < 1e-12
            && (r - hr).abs() < 1e-12
            && (f1 - hf).abs() < 1e-12;
    }
    let unit = precision_recall_f1(&ConfusionCounts {
        tp: 1,
        fp: 1,
        tn: 0,
        fn_: 1,
    })
    .2;
    check(
        worst < 1e-12 && recount_ok && unit == 0.5,
        format!("AUC vs pairwise {worst:.1e} over 200 instances, recounts {recount_ok}, tp=fp=fn=1 gives F1 {unit}"),
    )
}

fn golden_dot_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/structure_3_2_1.dot")
}

fn determinism_and_roundtrip() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("cs-training.csv");
    fs::write(&data, common::synthetic_gmsc(500, 9)).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let args = [
            "kan-credit",
            "train",
            "--data",
            data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--width",
            "10,2,1",
            "--grid",
            "6",
            "--k",
            "3",
            "--steps",
            "10",
            "--baseline-steps",
            "20",
        ];
        assert_eq!(kan_credit::cli::run(args), 0);
        let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
        let settings: Vec<String> = manifest
            .lines()
            .filter(|l| !l.starts_with("out="))
            .map(String::from)
            .collect();
        (fs::read(out.join("metrics.txt")).unwrap(), settings)
    };
    let (ma, fa) = run("a");
    let (mb, fb) = run("b");
    let reports_equal = fa == fb && ma == mb;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut net = KanNetwork::init(&[10, 4, 1], 30, 4, 42).unwrap();
    let scaled: Vec<f64> = net
        .params()
        .iter()
        .map(|v| v * 10f64.powi(rng.gen_range(-30..30)))
        .collect();
    net.set_params(&scaled).unwrap();
    let back = network_from_json(&network_to_json(&net)).unwrap();
    let roundtrip = back == net
        && back
            .params()
            .iter()
            .zip(net.params())
            .all(|(a, b)| a.to_bits() == b.to_bits());

    let (dot, golden) = golden_dot();
    let golden_ok = dot == golden;
    check(
        reports_equal && roundtrip && golden_ok,
        format!("metric reports identical {reports_equal}, checkpoint exact {roundtrip}, DOT matches golden {golden_ok}"),
    )
}

fn golden_dot() -> (String, String) {
    let net = KanNetwork::init(&[3, 2, 1], 5, 3, 42).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows = common::random_rows(64, 3, &mut rng);
    let ds = Dataset::new(rows, (0..64).map(|i| (i % 2) as u8).collect()).unwrap();
    let labels: Vec<String> = FEATURE_COLUMNS[..3].iter().map(|s| s.to_string()).collect();
    let dot = export_dot(&net, &edge_scores(&net, &ds).unwrap(), &labels).unwrap();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(golden_dot_path(), &dot).unwrap();
    }
    let golden = fs::read_to_string(golden_dot_path()).unwrap_or_default();
    (dot, golden)
}

fn toy_training() -> Outcome {
    let data = common::separable_toy(200, 1);
    let cfg = TrainConfig {
        widths: vec![2, 1],
        grid_count: 5,
        degree: 3,
        learning_rate: 0.1,
        steps: 200,
        batch_size: -1,
        seed: 42,
        ..TrainConfig::default()
    };
    let (net, _) = train(&data, &cfg).unwrap();
    let kan_loss = mean_loss(&net, &data.features, &data.labels).unwrap();
    let logistic = train_logistic(&data, 0.1, 500, 42).unwrap();
    let (lr_loss, _) = kan_credit::baseline::logistic_loss_and_grad(&logistic, &data).unwrap();
    check(
        kan_loss < 0.05 && lr_loss < 0.05,
        format!("KAN loss {kan_loss:.4}, logistic loss {lr_loss:.4} (limit 0.05)"),
    )
}

fn gmsc_path() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("KACDP_GMSC_CSV") {
        return Some(PathBuf::from(p));
    }
    let local = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/cs-training.csv");
    local.is_file().then_some(local)
}

struct Gmsc {
    train: Dataset,
    test: Dataset,
}

impl Gmsc {
    fn fit(
        &self,
        widths: &[usize],
        grid: usize,
        lr: f64,
        steps: usize,
    ) -> (KanNetwork, MetricReport) {
        let cfg = TrainConfig {
            widths: widths.to_vec(),
            grid_count: grid,
            degree: 4,
            learning_rate: lr,
            steps,
            batch_size: -1,
            seed: 42,
            ..TrainConfig::default()
        };
        let (net, _) = train(&self.train, &cfg).unwrap();
        let scores: Vec<f64> = self
            .test
            .features
            .iter()
            .map(|x| net.predict_proba(x).unwrap())
            .collect();
        let report = MetricReport::evaluate(&scores, &self.test.labels).unwrap();
        (net, report)
    }
}

fn gmsc_criteria(results: &mut Vec<(usize, &'static str, Outcome)>) {
    const NAMES: [(usize, &str); 5] = [
        (4, "headline interpretable model"),
        (5, "grid sweep trend"),
        (6, "learning-rate collapse"),
        (7, "attribution ranking"),
        (8, "baseline ordering"),
    ];
    let Some(path) = gmsc_path() else {
        for (id, name) in NAMES {
            results.push((id, name, Outcome::Skip("GMSC file not present".into())));
        }
        return;
    };
    let records = load_gmsc_csv(&path).unwrap();
    let (train_ds, test_ds) = split(&records, 0.2, 42, PreprocessPolicy::default()).unwrap();
    let g = Gmsc {
        train: train_ds,
        test: test_ds,
    };

    let started = std::time::Instant::now();
    let (_, oi) = g.fit(&[10, 1], 80, 0.1, 100);
    let secs = started.elapsed().as_secs_f64();
    results.push((
        4,
        NAMES[0].1,
        check(
            oi.roc_auc >= 0.850 && oi.f1() >= 0.960,
            format!(
                "test AUC {:.4} (>= 0.850), F1 {:.4} (>= 0.960), {secs:.1}s",
                oi.roc_auc,
                oi.f1()
            ),
        ),
    ));

    let mut sweep = Vec::new();
    for grid in [3, 10, 50] {
        sweep.push((grid, g.fit(&[10, 1], grid, 0.1, 100).1));
    }
    sweep.push((80, oi.clone()));
    let gain = sweep[3].1.roc_auc - sweep[0].1.roc_auc;
    let f1s: Vec<f64> = sweep.iter().map(|(_, r)| r.f1()).collect();
    let spread =
        f1s.iter().cloned().fold(f64::MIN, f64::max) - f1s.iter().cloned().fold(f64::MAX, f64::min);
    let table: Vec<String> = sweep
        .iter()
        .map(|(g, r)| format!("G{g}:{:.4}", r.roc_auc))
        .collect();
    results.push((
        5,
        NAMES[1].1,
        check(
            gain >= 0.005 && spread < 0.002,
            format!(
                "AUC {} gain {gain:.4} (>= 0.005), F1 spread {spread:.4} (< 0.002)",
                table.join(" ")
            ),
        ),
    ));

    let fast = g.fit(&[10, 1], 10, 0.1, 200).1.roc_auc;
    let slow = g.fit(&[10, 1], 10, 0.001, 200).1.roc_auc;
    results.push((
        6,
        NAMES[2].1,
        check(
            slow <= fast - 0.05,
            format!("AUC lr=0.1 {fast:.4}, lr=0.001 {slow:.4} (gap >= 0.05)"),
        ),
    ));

    let (op, _) = g.fit(&[10, 4, 1], 30, 0.1, 100);
    let attr = feature_attribution(&op, &g.train).unwrap();
    let top: Vec<String> = attr.ranking.iter().map(|j| format!("x{j}")).collect();
    results.push((
        7,
        NAMES[3].1,
        check(
            attr.ranking[0] == 3 && attr.ranking[1] == 0 && attr.rank_of(9) >= 8,
            format!("ranking {}", top.join(" > ")),
        ),
    ));

    let logistic = train_logistic(&g.train, 0.1, 500, 42).unwrap();
    let scores: Vec<f64> = g
        .test
        .features
        .iter()
        .map(|x| logistic.predict(x).unwrap())
        .collect();
    let base = roc_auc(&scores, &g.test.labels).unwrap();
    results.push((
        8,
        NAMES[4].1,
        check(
            oi.roc_auc >= base - 0.002,
            format!("KAN AUC {:.4}, logistic AUC {base:.4}", oi.roc_auc),
        ),
    ));
}

fn main() {
    let mut results: Vec<(usize, &'static str, Outcome)> = vec![
        (1, "gradient oracle", gradient_oracle()),
        (2, "spline properties", spline_properties()),
        (3, "metric oracle", metric_oracle()),
    ];
    gmsc_criteria(&mut results);
    results.push((9, "determinism and round trip", determinism_and_roundtrip()));

    let toy = toy_training();
    let standalone_ok = results
        .iter()
        .filter(|(id, _, _)| matches!(id, 1 | 2 | 3 | 9))
        .all(|(_, _, o)| matches!(o, Outcome::Pass(_)))
        && matches!(toy, Outcome::Pass(_));
    let toy_detail = match &toy {
        Outcome::Pass(d) | Outcome::Fail(d) | Outcome::Skip(d) => d.clone(),
    };
    results.push((
        10,
        "standalone suite",
        check(
            standalone_ok,
            format!("criteria 1-3 and 9 plus toy training: {toy_detail}"),
        ),
    ));

    let mut failed = Vec::new();
    for (id, name, outcome) in &results {
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed.push(*id);
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {id:>2} {tag} {name}: {detail}");
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
