//! `kan-credit` command line: train, eval, explain, sweep, export-dot, curves.
//!
//! Every flag may also come from a `--config` file of `key=value` lines
//! (the same keys a run manifest contains); flags win over the file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::baseline::train_logistic;
use crate::checkpoint::{load_network, save_logistic, save_network};
use crate::data::{load_gmsc_csv, split, Dataset, PreprocessPolicy, FEATURE_LEGEND};
use crate::error::{Error, Result};
use crate::explain::{
    curves_csv, decision_path, edge_scores, export_dot, feature_attribution,
    sample_activation_curves,
};
use crate::metrics::{roc_curve, roc_curve_csv, MetricReport};
use crate::network::{sigmoid, KanNetwork};
use crate::training::{train, TrainConfig};

pub const GRID_SWEEP: [usize; 4] = [3, 10, 50, 80];
pub const LR_SWEEP: [f64; 3] = [0.1, 0.01, 0.001];
const GRID_SWEEP_STEPS: usize = 100;
const LR_SWEEP_STEPS: usize = 200;
const LR_SWEEP_GRID: usize = 10;

#[derive(Debug, Parser)]
#[command(name = "kan-credit", version, about = "KAN credit default prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a KAN (and the logistic baseline) on a stratified split.
    Train(CommonArgs),
    /// Evaluate a checkpoint on the test split.
    Eval(CommonArgs),
    /// Feature attribution, structure graph, activation curves, decision path.
    Explain(CommonArgs),
    /// Grid and learning-rate sweeps at width [10,1].
    Sweep(CommonArgs),
    /// Write the model structure as Graphviz DOT.
    #[command(name = "export-dot")]
    ExportDot(CommonArgs),
    /// Sample every learned activation on a uniform grid.
    Curves(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
struct CommonArgs {
    /// key=value file; explicit flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// GMSC CSV file
    #[arg(long)]
    data: Option<PathBuf>,
    /// Checkpoint to read (eval/explain/export-dot/curves)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Layer widths, e.g. 10,4,1
    #[arg(long)]
    width: Option<String>,
    #[arg(long)]
    grid: Option<usize>,
    /// Spline degree
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// -1 for full batch
    #[arg(long, allow_hyphen_values = true)]
    batch_size: Option<i64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    baseline_lr: Option<f64>,
    #[arg(long)]
    baseline_steps: Option<usize>,
    /// Test-split row for the decision-path report (explain)
    #[arg(long)]
    sample: Option<usize>,
    /// Points per activation curve
    #[arg(long)]
    points: Option<usize>,
    /// Concurrent sweep cells
    #[arg(long)]
    parallel: Option<usize>,
    /// Which sweep to run: grid, lr or both
    #[arg(long)]
    sweep: Option<String>,
    /// Grid values for the grid sweep, e.g. 3,10,50,80
    #[arg(long)]
    grids: Option<String>,
    /// Learning rates for the lr sweep, e.g. 0.1,0.01,0.001
    #[arg(long)]
    lrs: Option<String>,
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: PathBuf,
    pub train: TrainConfig,
    pub test_fraction: f64,
    pub baseline_lr: f64,
    pub baseline_steps: usize,
    pub sample: Option<usize>,
    pub points: usize,
    pub parallel: usize,
    pub sweep: String,
    pub grids: Vec<usize>,
    pub lrs: Vec<f64>,
    /// Architecture keys given explicitly (flag or config), for eval checks.
    explicit_arch: Vec<&'static str>,
    /// Sweep step override when `steps` was given explicitly.
    explicit_steps: Option<usize>,
}

fn parse_list<T: std::str::FromStr>(key: &str, text: &str) -> Result<Vec<T>> {
    let trimmed = text.trim().trim_start_matches('[').trim_end_matches(']');
    trimmed
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {s:?}")))
        })
        .collect()
}

fn parse_value<T: std::str::FromStr>(key: &str, text: &str) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {text:?}")))
}

fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("{}:{}: expected key=value", path.display(), i + 1))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

const CONFIG_KEYS: [&str; 23] = [
    "command",
    "data",
    "model",
    "out",
    "width",
    "grid",
    "k",
    "lr",
    "steps",
    "batch_size",
    "seed",
    "test_fraction",
    "baseline_lr",
    "baseline_steps",
    "sample",
    "points",
    "parallel",
    "sweep",
    "grids",
    "lrs",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
];

impl RunConfig {
    fn resolve(command: &str, args: &CommonArgs) -> Result<Self> {
        let mut file = match &args.config {
            Some(path) => read_config_file(path)?,
            None => BTreeMap::new(),
        };
        for key in file.keys() {
            let known = CONFIG_KEYS.contains(&key.as_str()) || key.starts_with("info.");
            if !known {
                return Err(Error::InvalidConfig(format!("unknown config key {key:?}")));
            }
        }
        let mut take = |key: &str, flag: Option<String>| -> Option<String> {
            let from_file = file.remove(key);
            flag.or(from_file).filter(|v| !v.is_empty())
        };

        let defaults = TrainConfig::default();
        let width = take("width", args.width.clone());
        let grid = take("grid", args.grid.map(|v| v.to_string()));
        let k = take("k", args.k.map(|v| v.to_string()));
        let mut explicit_arch = Vec::new();
        if width.is_some() {
            explicit_arch.push("width");
        }
        if grid.is_some() {
            explicit_arch.push("grid");
        }
        if k.is_some() {
            explicit_arch.push("k");
        }
        let steps = take("steps", args.steps.map(|v| v.to_string()))
            .map(|v| parse_value::<usize>("steps", &v))
            .transpose()?;

        let train = TrainConfig {
            widths: width.map_or(Ok(defaults.widths.clone()), |v| parse_list("width", &v))?,
            grid_count: grid.map_or(Ok(defaults.grid_count), |v| parse_value("grid", &v))?,
            degree: k.map_or(Ok(defaults.degree), |v| parse_value("k", &v))?,
            learning_rate: take("lr", args.lr.map(|v| v.to_string()))
                .map_or(Ok(defaults.learning_rate), |v| parse_value("lr", &v))?,
            steps: steps.unwrap_or(defaults.steps),
            batch_size: take("batch_size", args.batch_size.map(|v| v.to_string()))
                .map_or(Ok(defaults.batch_size), |v| parse_value("batch_size", &v))?,
            seed: take("seed", args.seed.map(|v| v.to_string()))
                .map_or(Ok(defaults.seed), |v| parse_value("seed", &v))?,
            adam_beta1: take("adam_beta1", None)
                .map_or(Ok(defaults.adam_beta1), |v| parse_value("adam_beta1", &v))?,
            adam_beta2: take("adam_beta2", None)
                .map_or(Ok(defaults.adam_beta2), |v| parse_value("adam_beta2", &v))?,
            adam_epsilon: take("adam_epsilon", None).map_or(Ok(defaults.adam_epsilon), |v| {
                parse_value("adam_epsilon", &v)
            })?,
        };
        let cfg = Self {
            command: command.to_string(),
            data: take("data", args.data.as_ref().map(|p| p.display().to_string()))
                .map(PathBuf::from),
            model: take(
                "model",
                args.model.as_ref().map(|p| p.display().to_string()),
            )
            .map(PathBuf::from),
            out: take("out", args.out.as_ref().map(|p| p.display().to_string()))
                .map_or_else(|| PathBuf::from("out"), PathBuf::from),
            test_fraction: take("test_fraction", args.test_fraction.map(|v| v.to_string()))
                .map_or(Ok(0.2), |v| parse_value("test_fraction", &v))?,
            baseline_lr: take("baseline_lr", args.baseline_lr.map(|v| v.to_string()))
                .map_or(Ok(0.1), |v| parse_value("baseline_lr", &v))?,
            baseline_steps: take("baseline_steps", args.baseline_steps.map(|v| v.to_string()))
                .map_or(Ok(500), |v| parse_value("baseline_steps", &v))?,
            sample: take("sample", args.sample.map(|v| v.to_string()))
                .map(|v| parse_value("sample", &v))
                .transpose()?,
            points: take("points", args.points.map(|v| v.to_string()))
                .map_or(Ok(101), |v| parse_value("points", &v))?,
            parallel: take("parallel", args.parallel.map(|v| v.to_string()))
                .map_or(Ok(1), |v| parse_value("parallel", &v))?,
            sweep: take("sweep", args.sweep.clone()).unwrap_or_else(|| "both".to_string()),
            grids: take("grids", args.grids.clone())
                .map_or(Ok(GRID_SWEEP.to_vec()), |v| parse_list("grids", &v))?,
            lrs: take("lrs", args.lrs.clone())
                .map_or(Ok(LR_SWEEP.to_vec()), |v| parse_list("lrs", &v))?,
            train,
            explicit_arch,
            explicit_steps: steps,
        };
        cfg.train.validate()?;
        if !matches!(cfg.sweep.as_str(), "grid" | "lr" | "both") {
            return Err(Error::InvalidConfig(format!(
                "sweep must be grid, lr or both, got {:?}",
                cfg.sweep
            )));
        }
        if cfg.parallel == 0 {
            return Err(Error::InvalidConfig("parallel must be at least 1".into()));
        }
        Ok(cfg)
    }

    /// `key=value` manifest; feeding it back through `--config` reproduces
    /// the run.
    pub fn manifest(&self) -> String {
        let t = &self.train;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("command", self.command.clone());
        kv(
            "data",
            self.data
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        kv(
            "model",
            self.model
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        kv("out", self.out.display().to_string());
        kv(
            "width",
            t.widths
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("grid", t.grid_count.to_string());
        kv("k", t.degree.to_string());
        kv("lr", t.learning_rate.to_string());
        kv("steps", t.steps.to_string());
        kv("batch_size", t.batch_size.to_string());
        kv("seed", t.seed.to_string());
        kv("adam_beta1", t.adam_beta1.to_string());
        kv("adam_beta2", t.adam_beta2.to_string());
        kv("adam_epsilon", t.adam_epsilon.to_string());
        kv("test_fraction", self.test_fraction.to_string());
        kv("baseline_lr", self.baseline_lr.to_string());
        kv("baseline_steps", self.baseline_steps.to_string());
        kv(
            "sample",
            self.sample.map(|s| s.to_string()).unwrap_or_default(),
        );
        kv("points", self.points.to_string());
        kv("parallel", self.parallel.to_string());
        kv("sweep", self.sweep.clone());
        kv(
            "grids",
            self.grids
                .iter()
                .map(|g| g.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv(
            "lrs",
            self.lrs
                .iter()
                .map(|g| g.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("info.version", env!("CARGO_PKG_VERSION").to_string());
        kv("info.f1_positive_class", "0".to_string());
        out
    }

    fn data_path(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("--data is required".into()))
    }

    fn model_path(&self) -> Result<&Path> {
        self.model
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("--model is required".into()))
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn prepare_out(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    write(&cfg.out.join("manifest.txt"), &cfg.manifest())
}

fn load_split(cfg: &RunConfig) -> Result<(Dataset, Dataset)> {
    let records = load_gmsc_csv(cfg.data_path()?)?;
    split(
        &records,
        cfg.test_fraction,
        cfg.train.seed,
        PreprocessPolicy::default(),
    )
}

fn kan_scores(net: &KanNetwork, ds: &Dataset) -> Result<Vec<f64>> {
    Ok(net.logits(&ds.features)?.into_iter().map(sigmoid).collect())
}

fn load_checked_model(cfg: &RunConfig) -> Result<KanNetwork> {
    let net = load_network(cfg.model_path()?)?;
    let t = &cfg.train;
    for key in &cfg.explicit_arch {
        let (ok, want, got) = match *key {
            "width" => (
                t.widths == net.widths,
                format!("{:?}", t.widths),
                format!("{:?}", net.widths),
            ),
            "grid" => (
                t.grid_count == net.grid_count,
                t.grid_count.to_string(),
                net.grid_count.to_string(),
            ),
            _ => (
                t.degree == net.degree,
                t.degree.to_string(),
                net.degree.to_string(),
            ),
        };
        if !ok {
            return Err(Error::CheckpointMismatch(format!(
                "{key}: requested {want}, checkpoint has {got}"
            )));
        }
    }
    Ok(net)
}

fn cmd_train(cfg: &RunConfig) -> Result<String> {
    prepare_out(cfg)?;
    let (train_ds, test_ds) = load_split(cfg)?;
    let (net, report) = train(&train_ds, &cfg.train)?;
    save_network(&net, &cfg.out.join("model.json"))?;
    write(&cfg.out.join("loss.csv"), &report.loss_csv())?;
    if let Some(scaler) = &train_ds.scaler {
        write(&cfg.out.join("scaler.txt"), &scaler.to_key_value())?;
    }

    let train_metrics = MetricReport::evaluate(&kan_scores(&net, &train_ds)?, &train_ds.labels)?;
    let test_scores = kan_scores(&net, &test_ds)?;
    let test_metrics = MetricReport::evaluate(&test_scores, &test_ds.labels)?;
    write(
        &cfg.out.join("roc_test.csv"),
        &roc_curve_csv(&roc_curve(&test_scores, &test_ds.labels)?),
    )?;

    let started = Instant::now();
    let logistic = train_logistic(
        &train_ds,
        cfg.baseline_lr,
        cfg.baseline_steps,
        cfg.train.seed,
    )?;
    let baseline_seconds = started.elapsed().as_secs_f64();
    save_logistic(&logistic, cfg.train.seed, &cfg.out.join("baseline.json"))?;
    let baseline_scores = test_ds
        .features
        .iter()
        .map(|x| logistic.predict(x))
        .collect::<Result<Vec<_>>>()?;
    let baseline_metrics = MetricReport::evaluate(&baseline_scores, &test_ds.labels)?;

    let mut metrics = String::new();
    let _ = writeln!(metrics, "train_rows={}", train_ds.len());
    let _ = writeln!(metrics, "test_rows={}", test_ds.len());
    let _ = writeln!(
        metrics,
        "final_train_loss={:.8}",
        report.loss_history.last().copied().unwrap_or(f64::NAN)
    );
    metrics.push_str(&train_metrics.to_key_value("train_"));
    metrics.push_str(&test_metrics.to_key_value("test_"));
    metrics.push_str(&baseline_metrics.to_key_value("baseline_test_"));
    write(&cfg.out.join("metrics.txt"), &metrics)?;

    let mut csv = format!("split,{}\n", MetricReport::CSV_HEADER);
    let _ = writeln!(csv, "train,{}", train_metrics.csv_row());
    let _ = writeln!(csv, "test,{}", test_metrics.csv_row());
    let _ = writeln!(csv, "baseline_test,{}", baseline_metrics.csv_row());
    write(&cfg.out.join("metrics.csv"), &csv)?;
    write(
        &cfg.out.join("timing.txt"),
        &format!(
            "train_seconds={:.3}\nbaseline_seconds={baseline_seconds:.3}\n",
            report.wall_seconds
        ),
    )?;
    Ok(metrics)
}

fn cmd_eval(cfg: &RunConfig) -> Result<String> {
    let net = load_checked_model(cfg)?;
    prepare_out(cfg)?;
    let (_, test_ds) = load_split(cfg)?;
    let scores = kan_scores(&net, &test_ds)?;
    let report = MetricReport::evaluate(&scores, &test_ds.labels)?;
    write(
        &cfg.out.join("roc_curve.csv"),
        &roc_curve_csv(&roc_curve(&scores, &test_ds.labels)?),
    )?;
    let text = report.to_key_value("test_");
    write(&cfg.out.join("eval_metrics.txt"), &text)?;
    Ok(text)
}

fn input_labels(net: &KanNetwork) -> Vec<String> {
    if net.n_inputs() == FEATURE_LEGEND.len() {
        FEATURE_LEGEND.iter().map(|s| s.to_string()).collect()
    } else {
        Vec::new()
    }
}

fn cmd_explain(cfg: &RunConfig) -> Result<String> {
    let net = load_checked_model(cfg)?;
    prepare_out(cfg)?;
    let (train_ds, test_ds) = load_split(cfg)?;
    if let Some(i) = cfg.sample {
        if i >= test_ds.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: test_ds.len(),
            });
        }
    }
    let report = feature_attribution(&net, &train_ds)?;
    write(&cfg.out.join("attribution.csv"), &report.to_csv())?;
    let scores = edge_scores(&net, &train_ds)?;
    write(
        &cfg.out.join("structure.dot"),
        &export_dot(&net, &scores, &input_labels(&net))?,
    )?;
    let curves = sample_activation_curves(&net, cfg.points)?;
    write(&cfg.out.join("curves.csv"), &curves_csv(&curves))?;
    let mut text = report.summary();
    if let Some(i) = cfg.sample {
        let path = decision_path(&net, &test_ds.features[i])?;
        write(&cfg.out.join("decision_path.csv"), &path.to_csv())?;
        write(&cfg.out.join("decision_path.txt"), &path.to_text())?;
        let _ = writeln!(text, "sample={i}");
        let _ = writeln!(text, "sample_label={}", test_ds.labels[i]);
        text.push_str(&path.to_text());
    }
    Ok(text)
}

fn cmd_export_dot(cfg: &RunConfig) -> Result<String> {
    let net = load_checked_model(cfg)?;
    prepare_out(cfg)?;
    let (train_ds, _) = load_split(cfg)?;
    let scores = edge_scores(&net, &train_ds)?;
    let dot = export_dot(&net, &scores, &input_labels(&net))?;
    write(&cfg.out.join("structure.dot"), &dot)?;
    Ok(dot)
}

fn cmd_curves(cfg: &RunConfig) -> Result<String> {
    let net = load_checked_model(cfg)?;
    prepare_out(cfg)?;
    let rows = sample_activation_curves(&net, cfg.points)?;
    let csv = curves_csv(&rows);
    write(&cfg.out.join("curves.csv"), &csv)?;
    Ok(format!("wrote {} curve points\n", rows.len()))
}

/// One finished sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub label: String,
    pub metrics: MetricReport,
    pub final_loss: f64,
    pub seconds: f64,
}

fn run_cells(
    cells: Vec<(String, TrainConfig)>,
    train_ds: &Dataset,
    test_ds: &Dataset,
    dir: &Path,
    parallel: usize,
) -> Result<Vec<SweepRow>> {
    let results: Mutex<Vec<Option<Result<SweepRow>>>> =
        Mutex::new((0..cells.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..parallel.min(cells.len()).max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cells.len() {
                    break;
                }
                let (label, tc) = &cells[i];
                let outcome = (|| {
                    let cell_dir = dir.join(label);
                    fs::create_dir_all(&cell_dir).map_err(|e| Error::io(&cell_dir, e))?;
                    let (net, report) = train(train_ds, tc)?;
                    let scores = kan_scores(&net, test_ds)?;
                    let metrics = MetricReport::evaluate(&scores, &test_ds.labels)?;
                    write(&cell_dir.join("loss.csv"), &report.loss_csv())?;
                    write(
                        &cell_dir.join("metrics.txt"),
                        &metrics.to_key_value("test_"),
                    )?;
                    save_network(&net, &cell_dir.join("model.json"))?;
                    Ok(SweepRow {
                        label: label.clone(),
                        metrics,
                        final_loss: *report.loss_history.last().expect("steps >= 1"),
                        seconds: report.wall_seconds,
                    })
                })();
                results.lock().expect("sweep worker panicked")[i] = Some(outcome);
            });
        }
    });
    results
        .into_inner()
        .expect("sweep worker panicked")
        .into_iter()
        .map(|r| r.expect("every cell runs"))
        .collect()
}

fn sweep_csv(key: &str, rows: &[SweepRow]) -> String {
    let mut out = format!("{key},roc_auc,f1,seconds\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.3}",
            r.label.split('_').nth(1).unwrap_or(&r.label),
            r.metrics.roc_auc,
            r.metrics.f1(),
            r.seconds
        );
    }
    out
}

fn sweep_metrics(key: &str, rows: &[SweepRow]) -> String {
    let mut out = format!("{key},roc_auc,f1,f1_class1,final_loss\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6},{:.8}",
            r.label.split('_').nth(1).unwrap_or(&r.label),
            r.metrics.roc_auc,
            r.metrics.f1(),
            r.metrics.minority.f1,
            r.final_loss
        );
    }
    out
}

fn cmd_sweep(cfg: &RunConfig) -> Result<String> {
    prepare_out(cfg)?;
    let (train_ds, test_ds) = load_split(cfg)?;
    let base = TrainConfig {
        widths: vec![train_ds.n_features(), 1],
        ..cfg.train.clone()
    };
    let mut text = String::new();
    if cfg.sweep != "lr" {
        let cells = cfg
            .grids
            .iter()
            .map(|&g| {
                let tc = TrainConfig {
                    grid_count: g,
                    learning_rate: 0.1,
                    steps: cfg.explicit_steps.unwrap_or(GRID_SWEEP_STEPS),
                    ..base.clone()
                };
                (format!("grid_{g}"), tc)
            })
            .collect();
        let rows = run_cells(cells, &train_ds, &test_ds, &cfg.out, cfg.parallel)?;
        write(&cfg.out.join("sweep_grid.csv"), &sweep_csv("grid", &rows))?;
        let m = sweep_metrics("grid", &rows);
        write(&cfg.out.join("sweep_grid_metrics.csv"), &m)?;
        text.push_str(&m);
    }
    if cfg.sweep != "grid" {
        let cells = cfg
            .lrs
            .iter()
            .map(|&lr| {
                let tc = TrainConfig {
                    grid_count: LR_SWEEP_GRID,
                    learning_rate: lr,
                    steps: cfg.explicit_steps.unwrap_or(LR_SWEEP_STEPS),
                    ..base.clone()
                };
                (format!("lr_{lr}"), tc)
            })
            .collect();
        let rows = run_cells(cells, &train_ds, &test_ds, &cfg.out, cfg.parallel)?;
        write(&cfg.out.join("sweep_lr.csv"), &sweep_csv("lr", &rows))?;
        let m = sweep_metrics("lr", &rows);
        write(&cfg.out.join("sweep_lr_metrics.csv"), &m)?;
        text.push_str(&m);
    }
    Ok(text)
}

/// Exit code for a failed command: 2 for data and usage problems, 1 for
/// internal inconsistencies.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::LengthMismatch { .. } | Error::ShapeMismatch(_) | Error::EmptyBatch => 1,
        _ => 2,
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    type Handler = fn(&RunConfig) -> Result<String>;
    let (name, args, handler): (&str, &CommonArgs, Handler) = match &cli.command {
        Command::Train(a) => ("train", a, cmd_train),
        Command::Eval(a) => ("eval", a, cmd_eval),
        Command::Explain(a) => ("explain", a, cmd_explain),
        Command::Sweep(a) => ("sweep", a, cmd_sweep),
        Command::ExportDot(a) => ("export-dot", a, cmd_export_dot),
        Command::Curves(a) => ("curves", a, cmd_curves),
    };
    match RunConfig::resolve(name, args).and_then(|cfg| handler(&cfg)) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.to_string());
            exit_code(&e)
        }
    }
}
