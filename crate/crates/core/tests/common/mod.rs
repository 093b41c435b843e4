#![allow(dead_code)]

use std::fmt::Write as _;

use kan_credit::data::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GMSC_HEADER: &str = ",SeriousDlqin2yrs,RevolvingUtilizationOfUnsecuredLines,age,NumberOfTime30-59DaysPastDueNotWorse,DebtRatio,MonthlyIncome,NumberOfOpenCreditLinesAndLoans,NumberOfTimes90DaysLate,NumberRealEstateLoansOrLines,NumberOfTime60-89DaysPastDueNotWorse,NumberOfDependents";

/// GMSC-shaped CSV text with a planted dependence on utilization, debt ratio
/// and late payments, heavy-tailed columns and some missing cells.
pub fn synthetic_gmsc(rows: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::from(GMSC_HEADER);
    out.push('\n');
    for i in 0..rows {
        let util: f64 = if rng.gen_bool(0.01) {
            rng.gen_range(2.0..5000.0)
        } else {
            rng.gen_range(0.0..1.2)
        };
        let age: i64 = rng.gen_range(21..95);
        let late30: i64 = if rng.gen_bool(0.15) {
            rng.gen_range(1..4)
        } else {
            0
        };
        let debt: f64 = if rng.gen_bool(0.05) {
            rng.gen_range(10.0..50000.0)
        } else {
            rng.gen_range(0.0..1.5)
        };
        let income = if rng.gen_bool(0.1) {
            None
        } else {
            Some(rng.gen_range(500.0..20000.0_f64).round())
        };
        let open: i64 = rng.gen_range(0..25);
        let late90: i64 = if rng.gen_bool(0.05) {
            rng.gen_range(1..3)
        } else {
            0
        };
        let estate: i64 = rng.gen_range(0..4);
        let late60: i64 = if rng.gen_bool(0.05) { 1 } else { 0 };
        let deps = if rng.gen_bool(0.03) {
            None
        } else {
            Some(rng.gen_range(0..5_i64))
        };

        let u = util.min(1.2);
        let d = debt.min(1.5);
        let z = -3.6
            + 2.4 * u
            + 1.8 * (d - 0.5).powi(2) * 2.0
            + 0.8 * late30 as f64
            + 1.2 * late90 as f64
            + 0.6 * late60 as f64
            - 0.02 * (age as f64 - 50.0);
        let p = 1.0 / (1.0 + (-z).exp());
        let label = u8::from(rng.gen_bool(p));
        let _ = writeln!(
            out,
            "{},{label},{util:.6},{age},{late30},{debt:.6},{},{open},{late90},{estate},{late60},{}",
            i + 1,
            income.map(|v| v.to_string()).unwrap_or_else(|| "NA".into()),
            deps.map(|v| v.to_string()).unwrap_or_default(),
        );
    }
    out
}

/// Two features in [-1, 1], label 1 iff x0 + x1 > 0, with a margin.
pub fn separable_toy(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    while xs.len() < n {
        let a: f64 = rng.gen_range(-1.0..1.0);
        let b: f64 = rng.gen_range(-1.0..1.0);
        if (a + b).abs() < 0.3 {
            continue;
        }
        ys.push(u8::from(a + b > 0.0));
        xs.push(vec![a, b]);
    }
    Dataset::new(xs, ys).unwrap()
}

pub fn random_rows(n: usize, d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

/// Sets every parameter of `net` to a uniform draw in `[-scale, scale]`.
pub fn randomize(net: &mut kan_credit::KanNetwork, scale: f64, rng: &mut impl Rng) {
    let p: Vec<f64> = (0..net.param_count())
        .map(|_| rng.gen_range(-scale..scale))
        .collect();
    net.set_params(&p).unwrap();
}
