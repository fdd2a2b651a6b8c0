//! Cross-validated evaluation and lambda grid search.
//!
//! Each (repeat, fold) job orders its training split according to the
//! environment, trains one model, classifies the held-out fold and scores it.
//! Jobs run in parallel; results are always reported in (repeat, fold) order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::caea::{AgingPolicy, CaeaModel, CaeaParams, ClassId};
use crate::dataio::{
    derive_seed, make_folds, order_stream, Dataset, StreamMode, StreamOrder, TAG_STREAM,
};
use crate::error::{Error, Result};
use crate::hcaea::{fit_hierarchy, HcaeaTree, HierarchyParams, DEFAULT_RECURSE_MIN_K};
use crate::metrics::score_all;

pub const DEFAULT_AGE_MAX: u32 = 10;
pub const LAMBDA_GRID: [usize; 11] = [10, 12, 14, 16, 18, 20, 22, 24, 26, 28, 30];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Caea,
    Hcaea,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "caea" => Ok(Algorithm::Caea),
            "hcaea" => Ok(Algorithm::Hcaea),
            other => Err(Error::Config(format!("unknown algorithm '{other}'"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Algorithm::Caea => f.write_str("caea"),
            Algorithm::Hcaea => f.write_str("hcaea"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: String,
    pub algorithm: Algorithm,
    pub lambda: usize,
    pub age_max: u32,
    pub environment: StreamMode,
    pub repeats: usize,
    pub folds: usize,
    pub seed: u64,
    pub aging_policy: AgingPolicy,
    pub recurse_min_k: usize,
}

impl RunConfig {
    pub fn new(dataset: &str, algorithm: Algorithm, lambda: usize) -> Self {
        RunConfig {
            dataset: dataset.to_string(),
            algorithm,
            lambda,
            age_max: DEFAULT_AGE_MAX,
            environment: StreamMode::Stationary,
            repeats: 2,
            folds: 10,
            seed: 0,
            aging_policy: AgingPolicy::default(),
            recurse_min_k: DEFAULT_RECURSE_MIN_K,
        }
    }

    pub fn caea_params(&self) -> Result<CaeaParams> {
        Ok(CaeaParams::new(self.lambda, self.age_max)?.with_aging_policy(self.aging_policy))
    }

    pub fn hierarchy_params(&self) -> Result<HierarchyParams> {
        HierarchyParams::new(self.caea_params()?).with_recurse_min_k(self.recurse_min_k)
    }

    pub fn validate(&self) -> Result<()> {
        self.hierarchy_params()?;
        if self.repeats < 1 || self.folds < 2 {
            return Err(Error::Config(format!(
                "need repeats >= 1 and folds >= 2, got {}x{}",
                self.repeats, self.folds
            )));
        }
        Ok(())
    }
}

/// A trained CAEA model or HCAEA tree, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum TrainedModel {
    Caea(CaeaModel),
    Hcaea(HcaeaTree),
}

impl TrainedModel {
    pub fn predict_class(&self, x: &[f64]) -> Result<Option<ClassId>> {
        match self {
            TrainedModel::Caea(m) => m.predict_class(x),
            TrainedModel::Hcaea(t) => t.predict_tree(x).map(|p| p.class),
        }
    }

    /// Prototypes over all layers.
    pub fn node_count(&self) -> usize {
        match self {
            TrainedModel::Caea(m) => m.len(),
            TrainedModel::Hcaea(t) => t.prototype_count(),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TrainedModel::Caea(m) => m.len(),
            TrainedModel::Hcaea(t) => t.leaf_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TrainedModel::Caea(_) => 1,
            TrainedModel::Hcaea(t) => t.depth(),
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            TrainedModel::Caea(m) => m.is_empty(),
            TrainedModel::Hcaea(t) => t.root().model.is_empty(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn check_invariants(&self) -> Result<()> {
        match self {
            TrainedModel::Caea(m) => m.check_invariants(),
            TrainedModel::Hcaea(t) => t.check_invariants(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: TrainedModel = serde_json::from_str(s)?;
        model.check_invariants()?;
        Ok(model)
    }
}

/// A trained model with the class names its ids refer to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub class_names: Vec<String>,
    pub model: TrainedModel,
}

impl SavedModel {
    pub fn class_name(&self, id: ClassId) -> Option<&str> {
        self.class_names.get(id).map(String::as_str)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let saved: SavedModel = serde_json::from_str(s)?;
        saved.model.check_invariants()?;
        Ok(saved)
    }
}

/// Trains on `order` (indices into `ds`), presented in that order.
pub fn train(ds: &Dataset, config: &RunConfig, order: &[usize]) -> Result<TrainedModel> {
    match config.algorithm {
        Algorithm::Caea => {
            let mut model = CaeaModel::new(config.caea_params()?)?;
            for &i in order {
                model.learn_one(&ds.points[i], Some(ds.labels[i]))?;
            }
            Ok(TrainedModel::Caea(model))
        }
        Algorithm::Hcaea => {
            let points: Vec<Vec<f64>> = order.iter().map(|&i| ds.points[i].clone()).collect();
            let labels: Vec<Option<ClassId>> = order.iter().map(|&i| Some(ds.labels[i])).collect();
            Ok(TrainedModel::Hcaea(fit_hierarchy(
                &points,
                &labels,
                config.hierarchy_params()?,
            )?))
        }
    }
}

/// Trains on the whole dataset in the configured environment order.
pub fn train_full(ds: &Dataset, config: &RunConfig) -> Result<TrainedModel> {
    config.validate()?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let order = order_stream(
        &ds.labels,
        &all,
        StreamOrder {
            mode: config.environment,
            seed: derive_seed(config.seed, TAG_STREAM, u64::MAX, 0),
        },
    );
    train(ds, config, &order)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub repeat: usize,
    pub fold: usize,
    /// Set when the fold could not produce a usable model.
    pub failure: Option<String>,
    pub accuracy: Option<f64>,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    pub macro_f1: Option<f64>,
    pub node_count: usize,
    pub leaf_count: usize,
    pub depth: usize,
    pub train_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation (divides by n - 1); 0 for a single value.
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<MeanStd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(MeanStd { mean, std, n })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: RunConfig,
    pub dataset_name: String,
    pub instances: usize,
    pub dimensions: usize,
    pub classes: usize,
    pub folds: Vec<FoldRecord>,
    pub failed_folds: usize,
    pub aggregates: BTreeMap<String, MeanStd>,
}

impl EvalReport {
    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.aggregates.get(metric).map(|a| a.mean)
    }

    pub fn values(&self, metric: &str) -> Vec<f64> {
        self.folds
            .iter()
            .filter_map(|f| match metric {
                "accuracy" => f.accuracy,
                "nmi" => f.nmi,
                "ari" => f.ari,
                "macro_f1" => f.macro_f1,
                "node_count" => f.failure.is_none().then_some(f.node_count as f64),
                "leaf_count" => f.failure.is_none().then_some(f.leaf_count as f64),
                "depth" => f.failure.is_none().then_some(f.depth as f64),
                _ => None,
            })
            .collect()
    }
}

pub const REPORTED_METRICS: [&str; 7] = [
    "accuracy",
    "nmi",
    "ari",
    "macro_f1",
    "node_count",
    "leaf_count",
    "depth",
];

fn run_fold(
    ds: &Dataset,
    config: &RunConfig,
    train_idx: &[usize],
    test_idx: &[usize],
    repeat: usize,
    fold: usize,
) -> Result<FoldRecord> {
    let mut record = FoldRecord {
        repeat,
        fold,
        failure: None,
        accuracy: None,
        nmi: None,
        ari: None,
        macro_f1: None,
        node_count: 0,
        leaf_count: 0,
        depth: 0,
        train_seconds: 0.0,
    };
    let init = config.caea_params()?.init_size();
    if train_idx.len() < init {
        record.failure = Some(format!(
            "training split has {} points, fewer than the {init} needed to initialize",
            train_idx.len()
        ));
        return Ok(record);
    }
    let order = order_stream(
        &ds.labels,
        train_idx,
        StreamOrder {
            mode: config.environment,
            seed: derive_seed(config.seed, TAG_STREAM, repeat as u64, fold as u64),
        },
    );
    let start = Instant::now();
    let model = train(ds, config, &order)?;
    record.train_seconds = start.elapsed().as_secs_f64();
    record.node_count = model.node_count();
    record.leaf_count = model.leaf_count();
    record.depth = model.depth();
    if model.is_empty() {
        record.failure = Some("no prototype survived training".into());
        return Ok(record);
    }
    let mut predicted = Vec::with_capacity(test_idx.len());
    let mut truth = Vec::with_capacity(test_idx.len());
    for &i in test_idx {
        // Unlabelled prototypes never match a true class.
        predicted.push(model.predict_class(&ds.points[i])?.unwrap_or(usize::MAX));
        truth.push(ds.labels[i]);
    }
    let s = score_all(&predicted, &truth)?;
    record.accuracy = Some(s.accuracy);
    record.nmi = Some(s.nmi);
    record.ari = Some(s.ari);
    record.macro_f1 = Some(s.macro_f1);
    Ok(record)
}

/// Repeated stratified k-fold evaluation.
pub fn run_eval(ds: &Dataset, config: &RunConfig) -> Result<EvalReport> {
    config.validate()?;
    let plan = make_folds(&ds.labels, config.repeats, config.folds, config.seed)?;
    let jobs: Vec<(usize, usize)> = (0..config.repeats)
        .flat_map(|r| (0..config.folds).map(move |f| (r, f)))
        .collect();
    let folds = jobs
        .par_iter()
        .map(|&(r, f)| {
            let train_idx = plan.train_indices(r, f);
            let test_idx = plan.test_indices(r, f);
            run_fold(ds, config, &train_idx, &test_idx, r, f)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = EvalReport {
        config: config.clone(),
        dataset_name: ds.name.clone(),
        instances: ds.len(),
        dimensions: ds.dim(),
        classes: ds.n_classes(),
        failed_folds: folds.iter().filter(|f| f.failure.is_some()).count(),
        folds,
        aggregates: BTreeMap::new(),
    };
    for metric in REPORTED_METRICS {
        if let Some(agg) = MeanStd::of(&report.values(metric)) {
            report.aggregates.insert(metric.to_string(), agg);
        }
    }
    Ok(report)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const FOLDS_CSV_HEADER: &str = "dataset,algorithm,lambda,age_max,environment,seed,aging_policy,recurse_min_k,repeat,fold,status,accuracy,nmi,ari,macro_f1,node_count,leaf_count,depth,train_seconds,reason";

fn config_echo(c: &RunConfig) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        csv_field(&c.dataset),
        c.algorithm,
        c.lambda,
        c.age_max,
        c.environment,
        c.seed,
        c.aging_policy,
        c.recurse_min_k
    )
}

/// Per-fold CSV. Every row repeats the run configuration.
pub fn folds_csv(report: &EvalReport) -> String {
    let mut out = String::from(FOLDS_CSV_HEADER);
    out.push('\n');
    let echo = config_echo(&report.config);
    for f in &report.folds {
        let _ = writeln!(
            out,
            "{echo},{},{},{},{},{},{},{},{},{},{},{},{}",
            f.repeat,
            f.fold,
            if f.failure.is_some() { "failed" } else { "ok" },
            opt(f.accuracy),
            opt(f.nmi),
            opt(f.ari),
            opt(f.macro_f1),
            f.node_count,
            f.leaf_count,
            f.depth,
            f.train_seconds,
            csv_field(f.failure.as_deref().unwrap_or(""))
        );
    }
    out
}

/// Aggregate summary as JSON; contains no timing data.
pub fn summary_json(report: &EvalReport) -> Result<String> {
    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a RunConfig,
        dataset_name: &'a str,
        instances: usize,
        dimensions: usize,
        classes: usize,
        fold_count: usize,
        failed_folds: usize,
        failures: Vec<(usize, usize, &'a str)>,
        aggregates: &'a BTreeMap<String, MeanStd>,
    }
    let s = Summary {
        config: &report.config,
        dataset_name: &report.dataset_name,
        instances: report.instances,
        dimensions: report.dimensions,
        classes: report.classes,
        fold_count: report.folds.len(),
        failed_folds: report.failed_folds,
        failures: report
            .folds
            .iter()
            .filter_map(|f| f.failure.as_deref().map(|r| (f.repeat, f.fold, r)))
            .collect(),
        aggregates: &report.aggregates,
    };
    Ok(serde_json::to_string_pretty(&s)? + "\n")
}

/// Writes `folds.csv` and `summary.json` into `dir`.
pub fn write_eval(dir: &Path, report: &EvalReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("folds.csv"), folds_csv(report))?;
    std::fs::write(dir.join("summary.json"), summary_json(report)?)?;
    Ok(())
}

/// Quartiles by linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub lambdas: Vec<usize>,
    pub reports: Vec<EvalReport>,
    /// Lambda with the highest mean NMI; ties go to the smaller lambda.
    pub best_lambda: Option<usize>,
}

pub fn run_grid(ds: &Dataset, config: &RunConfig, lambdas: &[usize]) -> Result<GridReport> {
    if lambdas.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    let mut lambdas = lambdas.to_vec();
    lambdas.sort_unstable();
    lambdas.dedup();
    let mut reports = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let cfg = RunConfig {
            lambda,
            ..config.clone()
        };
        reports.push(run_eval(ds, &cfg)?);
    }
    let mut best: Option<(usize, f64)> = None;
    for r in &reports {
        if let Some(m) = r.mean("nmi") {
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((r.config.lambda, m));
            }
        }
    }
    Ok(GridReport {
        lambdas,
        reports,
        best_lambda: best.map(|(l, _)| l),
    })
}

/// Long-format NMI values: one row per (lambda, repeat, fold).
pub fn grid_values_csv(grid: &GridReport) -> String {
    let mut out =
        String::from("dataset,algorithm,environment,seed,lambda,repeat,fold,nmi,accuracy\n");
    for r in &grid.reports {
        for f in &r.folds {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                csv_field(&r.config.dataset),
                r.config.algorithm,
                r.config.environment,
                r.config.seed,
                r.config.lambda,
                f.repeat,
                f.fold,
                opt(f.nmi),
                opt(f.accuracy)
            );
        }
    }
    out
}

/// Box-plot statistics of NMI per lambda.
pub fn grid_summary_csv(grid: &GridReport) -> String {
    let mut out = String::from("lambda,n,mean,std,min,q1,median,q3,max,mean_accuracy,best\n");
    for r in &grid.reports {
        let mut v = r.values("nmi");
        v.sort_by(f64::total_cmp);
        let agg = MeanStd::of(&v);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.config.lambda,
            v.len(),
            opt(agg.map(|a| a.mean)),
            opt(agg.map(|a| a.std)),
            opt(v.first().copied()),
            opt((!v.is_empty()).then(|| quantile(&v, 0.25))),
            opt((!v.is_empty()).then(|| quantile(&v, 0.5))),
            opt((!v.is_empty()).then(|| quantile(&v, 0.75))),
            opt(v.last().copied()),
            opt(r.mean("accuracy")),
            grid.best_lambda == Some(r.config.lambda)
        );
    }
    out
}

/// Writes `grid_values.csv`, `grid_summary.csv` and `grid.json` into `dir`.
pub fn write_grid(dir: &Path, grid: &GridReport) -> Result<()> {
    #[derive(Serialize)]
    struct GridSummary<'a> {
        config: &'a RunConfig,
        lambdas: &'a [usize],
        best_lambda: Option<usize>,
        mean_nmi: BTreeMap<usize, Option<f64>>,
    }
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("grid_values.csv"), grid_values_csv(grid))?;
    std::fs::write(dir.join("grid_summary.csv"), grid_summary_csv(grid))?;
    let summary = GridSummary {
        config: &grid.reports[0].config,
        lambdas: &grid.lambdas,
        best_lambda: grid.best_lambda,
        mean_nmi: grid
            .reports
            .iter()
            .map(|r| (r.config.lambda, r.mean("nmi")))
            .collect(),
    };
    std::fs::write(
        dir.join("grid.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;
    Ok(())
}
