//! GMSC ("Give Me Some Credit") ingestion, preprocessing and splitting.
//!
//! Preprocessing is fitted on training rows only: missing `MonthlyIncome`
//! takes the median of the observed incomes, missing `NumberOfDependents`
//! becomes 0, every column is winsorized at its lower/upper quantile and
//! then mapped affinely onto `[-1, 1]`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const LABEL_COLUMN: &str = "SeriousDlqin2yrs";

/// Feature columns in model input order `x0..x9`.
pub const FEATURE_COLUMNS: [&str; 10] = [
    "RevolvingUtilizationOfUnsecuredLines",
    "age",
    "NumberOfTime30-59DaysPastDueNotWorse",
    "DebtRatio",
    "MonthlyIncome",
    "NumberOfOpenCreditLinesAndLoans",
    "NumberOfTimes90DaysLate",
    "NumberRealEstateLoansOrLines",
    "NumberOfTime60-89DaysPastDueNotWorse",
    "NumberOfDependents",
];

/// Short human-readable description of each feature, same order.
pub const FEATURE_LEGEND: [&str; 10] = [
    "credit card utilization rate",
    "age",
    "times 30-59 days past due",
    "debt to monthly income ratio",
    "monthly income",
    "open credit lines and loans",
    "times 90+ days late",
    "real estate loans or lines",
    "times 60-89 days past due",
    "number of dependents",
];

pub const N_FEATURES: usize = 10;

const INCOME: usize = 4;
const DEPENDENTS: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub serious_dlqin_2yrs: u8,
    pub revolving_utilization: f64,
    pub age: i64,
    pub past_due_30_59: i64,
    pub debt_ratio: f64,
    pub monthly_income: Option<f64>,
    pub open_credit_lines: i64,
    pub past_due_90: i64,
    pub real_estate_loans: i64,
    pub past_due_60_89: i64,
    pub dependents: Option<i64>,
}

impl RawRecord {
    /// Feature values in `x0..x9` order; missing entries are NaN.
    pub fn feature_values(&self) -> [f64; N_FEATURES] {
        [
            self.revolving_utilization,
            self.age as f64,
            self.past_due_30_59 as f64,
            self.debt_ratio,
            self.monthly_income.unwrap_or(f64::NAN),
            self.open_credit_lines as f64,
            self.past_due_90 as f64,
            self.real_estate_loans as f64,
            self.past_due_60_89 as f64,
            self.dependents.map_or(f64::NAN, |d| d as f64),
        ]
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "na" | "NaN" | "nan")
}

fn is_index_column(name: &str) -> bool {
    let name = name.trim();
    name.is_empty() || name.eq_ignore_ascii_case("id") || name.starts_with("Unnamed")
}

pub fn load_gmsc_csv(path: &Path) -> Result<Vec<RawRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_gmsc(file)
}

/// Parses GMSC CSV text; columns are matched by header name.
pub fn read_gmsc<R: Read>(reader: R) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::HeaderMismatch(e.to_string()))?
        .clone();

    let find = |name: &str| -> Result<usize> {
        let hits: Vec<usize> = headers
            .iter()
            .enumerate()
            .filter(|(_, h)| h.trim() == name)
            .map(|(i, _)| i)
            .collect();
        match hits.as_slice() {
            [i] => Ok(*i),
            [] => Err(Error::HeaderMismatch(format!("missing column {name}"))),
            _ => Err(Error::HeaderMismatch(format!("duplicate column {name}"))),
        }
    };
    let label_col = find(LABEL_COLUMN)?;
    let cols: Vec<usize> = FEATURE_COLUMNS
        .iter()
        .map(|n| find(n))
        .collect::<Result<_>>()?;
    for (i, h) in headers.iter().enumerate() {
        if i != label_col && !cols.contains(&i) && !is_index_column(h) {
            return Err(Error::HeaderMismatch(format!("unexpected column {h:?}")));
        }
    }

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Parse { line, message };
        let cell = |c: usize| row.get(c).unwrap_or("").trim();

        let real = |c: usize, name: &str| -> Result<f64> {
            let v: f64 = cell(c)
                .parse()
                .map_err(|_| err(format!("{name}: cannot parse {:?}", cell(c))))?;
            if !v.is_finite() || v < 0.0 {
                return Err(err(format!(
                    "{name}: expected a finite value >= 0, got {v}"
                )));
            }
            Ok(v)
        };
        let int = |c: usize, name: &str| -> Result<i64> {
            let text = cell(c);
            let v: i64 = match text.parse() {
                Ok(v) => v,
                // integral values written as floats ("2.0")
                Err(_) => match text.parse::<f64>() {
                    Ok(f) if f.fract() == 0.0 && f.abs() < 1e15 => f as i64,
                    _ => return Err(err(format!("{name}: cannot parse {text:?} as an integer"))),
                },
            };
            if v < 0 {
                return Err(err(format!("{name}: expected a value >= 0, got {v}")));
            }
            Ok(v)
        };

        let label = match cell(label_col) {
            "0" | "0.0" => 0,
            "1" | "1.0" => 1,
            other => {
                return Err(err(format!(
                    "{LABEL_COLUMN}: expected 0 or 1, got {other:?}"
                )))
            }
        };
        let income = if is_missing(cell(cols[INCOME])) {
            None
        } else {
            Some(real(cols[INCOME], FEATURE_COLUMNS[INCOME])?)
        };
        let dependents = if is_missing(cell(cols[DEPENDENTS])) {
            None
        } else {
            Some(int(cols[DEPENDENTS], FEATURE_COLUMNS[DEPENDENTS])?)
        };
        records.push(RawRecord {
            serious_dlqin_2yrs: label,
            revolving_utilization: real(cols[0], FEATURE_COLUMNS[0])?,
            age: int(cols[1], FEATURE_COLUMNS[1])?,
            past_due_30_59: int(cols[2], FEATURE_COLUMNS[2])?,
            debt_ratio: real(cols[3], FEATURE_COLUMNS[3])?,
            monthly_income: income,
            open_credit_lines: int(cols[5], FEATURE_COLUMNS[5])?,
            past_due_90: int(cols[6], FEATURE_COLUMNS[6])?,
            real_estate_loans: int(cols[7], FEATURE_COLUMNS[7])?,
            past_due_60_89: int(cols[8], FEATURE_COLUMNS[8])?,
            dependents,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessPolicy {
    pub lower_quantile: f64,
    pub upper_quantile: f64,
}

impl Default for PreprocessPolicy {
    fn default() -> Self {
        Self {
            lower_quantile: 0.01,
            upper_quantile: 0.99,
        }
    }
}

/// Linear-interpolation quantile of sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnScaler {
    /// Replacement for missing values.
    pub fill: f64,
    /// Winsorization bounds; also the ends of the affine map to `[-1, 1]`.
    pub lower: f64,
    pub upper: f64,
}

impl ColumnScaler {
    pub fn transform(&self, v: f64) -> f64 {
        let v = if v.is_nan() { self.fill } else { v };
        let v = v.clamp(self.lower, self.upper);
        let width = self.upper - self.lower;
        if width > 0.0 {
            (2.0 * (v - self.lower) / width - 1.0).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn inverse(&self, z: f64) -> f64 {
        self.lower + (z + 1.0) / 2.0 * (self.upper - self.lower)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    pub policy: PreprocessPolicy,
    pub columns: Vec<ColumnScaler>,
}

impl Scaler {
    pub fn fit(records: &[RawRecord], policy: PreprocessPolicy) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput);
        }
        let rows: Vec<[f64; N_FEATURES]> = records.iter().map(RawRecord::feature_values).collect();
        let mut columns = Vec::with_capacity(N_FEATURES);
        for j in 0..N_FEATURES {
            let mut observed: Vec<f64> =
                rows.iter().map(|r| r[j]).filter(|v| !v.is_nan()).collect();
            observed.sort_by(f64::total_cmp);
            let fill = match j {
                INCOME if !observed.is_empty() => quantile_sorted(&observed, 0.5),
                _ => 0.0,
            };
            let mut filled: Vec<f64> = rows
                .iter()
                .map(|r| if r[j].is_nan() { fill } else { r[j] })
                .collect();
            filled.sort_by(f64::total_cmp);
            columns.push(ColumnScaler {
                fill,
                lower: quantile_sorted(&filled, policy.lower_quantile),
                upper: quantile_sorted(&filled, policy.upper_quantile),
            });
        }
        Ok(Self { policy, columns })
    }

    pub fn transform_row(&self, record: &RawRecord) -> Vec<f64> {
        record
            .feature_values()
            .iter()
            .zip(&self.columns)
            .map(|(&v, c)| c.transform(v))
            .collect()
    }

    pub fn transform(&self, records: &[RawRecord]) -> Dataset {
        Dataset {
            features: records.iter().map(|r| self.transform_row(r)).collect(),
            labels: records.iter().map(|r| r.serious_dlqin_2yrs).collect(),
            feature_names: FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect(),
            scaler: Some(self.clone()),
        }
    }

    /// `key=value` sidecar describing every column transform.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "lower_quantile={}", self.policy.lower_quantile);
        let _ = writeln!(out, "upper_quantile={}", self.policy.upper_quantile);
        for (j, c) in self.columns.iter().enumerate() {
            let name = FEATURE_COLUMNS[j];
            let _ = writeln!(out, "x{j}.name={name}");
            let _ = writeln!(out, "x{j}.fill={}", c.fill);
            let _ = writeln!(out, "x{j}.lower={}", c.lower);
            let _ = writeln!(out, "x{j}.upper={}", c.upper);
        }
        out
    }
}

/// Model-ready features in `[-1, 1]` with 0/1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
    pub scaler: Option<Scaler>,
}

impl Dataset {
    /// Wraps already-normalized rows; features are named `x0, x1, ...`.
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: features.len(),
                actual: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::InvalidLabel(bad));
        }
        let d = features.first().map_or(0, Vec::len);
        if let Some(r) = features.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: r.len(),
            });
        }
        Ok(Self {
            features,
            labels,
            feature_names: (0..d).map(|j| format!("x{j}")).collect(),
            scaler: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y == 1).count()
    }

    pub fn subset(&self, rows: &[usize]) -> Self {
        Self {
            features: rows.iter().map(|&i| self.features[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            scaler: self.scaler.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(LABEL_COLUMN);
        for j in 0..self.n_features() {
            let _ = write!(out, ",x{j}");
        }
        out.push('\n');
        for (row, y) in self.features.iter().zip(&self.labels) {
            let _ = write!(out, "{y}");
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Fits the scaler on all `records` and transforms them.
pub fn preprocess(records: &[RawRecord], policy: PreprocessPolicy) -> Result<Dataset> {
    Ok(Scaler::fit(records, policy)?.transform(records))
}

/// Stratified `(train, test)` row indices, each list ascending.
pub fn split_indices(
    labels: &[u8],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < 2 {
            return Err(Error::ClassTooSmall {
                label: class,
                count: members.len(),
            });
        }
        members.shuffle(&mut rng);
        let n_test =
            ((members.len() as f64 * test_fraction).round() as usize).clamp(1, members.len() - 1);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Stratified split; the scaler is fitted on the training rows and applied
/// unchanged to the test rows.
pub fn split(
    records: &[RawRecord],
    test_fraction: f64,
    seed: u64,
    policy: PreprocessPolicy,
) -> Result<(Dataset, Dataset)> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let labels: Vec<u8> = records.iter().map(|r| r.serious_dlqin_2yrs).collect();
    let (train_idx, test_idx) = split_indices(&labels, test_fraction, seed)?;
    let train_rows: Vec<RawRecord> = train_idx.iter().map(|&i| records[i].clone()).collect();
    let test_rows: Vec<RawRecord> = test_idx.iter().map(|&i| records[i].clone()).collect();
    let scaler = Scaler::fit(&train_rows, policy)?;
    Ok((scaler.transform(&train_rows), scaler.transform(&test_rows)))
}
