//! `caea` command-line harness: train, evaluate and grid-search CAEA / HCAEA.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use caea::dataio::{
    resolve_dataset, CsvOptions, Dataset, Delimiter, LabelColumn, StreamMode, DATA_DIR_ENV,
};
use caea::eval::{
    run_eval, run_grid, train_full, write_eval, write_grid, RunConfig, SavedModel, TrainedModel,
    DEFAULT_AGE_MAX, LAMBDA_GRID,
};
use caea::hcaea::DEFAULT_RECURSE_MIN_K;
use caea::{AgingPolicy, Error};
use clap::{Args, Parser, Subcommand};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_INTERNAL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "caea",
    version,
    about = "Online topological clustering with CAEA and HCAEA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a whole dataset and write the model as JSON.
    Train(TrainArgs),
    /// Repeated stratified cross-validation.
    Eval(RunArgs),
    /// Cross-validation over a grid of lambda values.
    Grid(GridArgs),
    /// Classify the rows of a CSV file with a saved model.
    Predict(PredictArgs),
    /// Print a summary of a saved model.
    Inspect(InspectArgs),
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset file, or a name listed in the data directory manifest.
    #[arg(long)]
    dataset: String,
    #[arg(long, env = DATA_DIR_ENV, default_value = "data")]
    data_dir: PathBuf,
    /// The file's first line is a header.
    #[arg(long)]
    header: bool,
    /// Zero-based label column; defaults to the last column.
    #[arg(long)]
    label_column: Option<usize>,
    /// Field separator: comma, tab or whitespace.
    #[arg(long, default_value = "comma")]
    delimiter: String,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "caea")]
    algorithm: String,
    #[arg(long, default_value_t = 20)]
    lambda: usize,
    #[arg(long, default_value_t = DEFAULT_AGE_MAX)]
    age_max: u32,
    /// stationary or nonstationary.
    #[arg(long, default_value = "stationary")]
    env: String,
    #[arg(long, default_value_t = 2)]
    repeats: usize,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// algorithm1 or prose.
    #[arg(long, default_value = "algorithm1")]
    aging_policy: String,
    #[arg(long, default_value_t = DEFAULT_RECURSE_MIN_K)]
    recurse_min_k: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated lambda values.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<usize>>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    model: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Data(_) | Error::Parse { .. } | Error::Io(_) | Error::Json(_) => EXIT_DATA,
        Error::DimensionMismatch { .. } | Error::InvalidArgument(_) => EXIT_DATA,
        Error::Invariant(_) | Error::InvalidState(_) => EXIT_INTERNAL,
    }
}

fn csv_options(d: &DataArgs) -> caea::Result<CsvOptions> {
    let delimiter = match d.delimiter.as_str() {
        "comma" | "," => Delimiter::Comma,
        "tab" => Delimiter::Tab,
        "whitespace" | "ws" => Delimiter::Whitespace,
        other => return Err(Error::Config(format!("unknown delimiter '{other}'"))),
    };
    Ok(CsvOptions {
        has_header: d.header,
        label_column: d.label_column.map_or(LabelColumn::Last, LabelColumn::Index),
        delimiter,
    })
}

fn load(d: &DataArgs) -> caea::Result<Dataset> {
    resolve_dataset(&d.dataset, &d.data_dir, csv_options(d)?)
}

fn run_config(a: &RunArgs) -> caea::Result<RunConfig> {
    let cfg = RunConfig {
        dataset: a.data.dataset.clone(),
        algorithm: a.algorithm.parse()?,
        lambda: a.lambda,
        age_max: a.age_max,
        environment: a.env.parse::<StreamMode>()?,
        repeats: a.repeats,
        folds: a.folds,
        seed: a.seed,
        aging_policy: a.aging_policy.parse::<AgingPolicy>()?,
        recurse_min_k: a.recurse_min_k,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(a: &TrainArgs) -> caea::Result<()> {
    let cfg = run_config(&a.run)?;
    let ds = load(&a.run.data)?;
    let start = Instant::now();
    let model = train_full(&ds, &cfg)?;
    let secs = start.elapsed().as_secs_f64();
    std::fs::create_dir_all(&a.run.out)?;
    let path = a.run.out.join("model.json");
    let saved = SavedModel {
        class_names: ds.class_names.clone(),
        model,
    };
    std::fs::write(&path, saved.to_json()?)?;
    println!(
        "{} on {}: {} nodes, {} leaves, depth {}, {:.3}s -> {}",
        cfg.algorithm,
        ds.name,
        saved.model.node_count(),
        saved.model.leaf_count(),
        saved.model.depth(),
        secs,
        path.display()
    );
    Ok(())
}

fn print_aggregates(report: &caea::eval::EvalReport) {
    for (metric, agg) in &report.aggregates {
        println!(
            "{metric:>10}: {:.3} ({:.3})  n={}",
            agg.mean, agg.std, agg.n
        );
    }
    if report.failed_folds > 0 {
        println!("{} fold(s) failed; see folds.csv", report.failed_folds);
    }
}

fn cmd_eval(a: &RunArgs) -> caea::Result<()> {
    let cfg = run_config(a)?;
    let ds = load(&a.data)?;
    let report = run_eval(&ds, &cfg)?;
    write_eval(&a.out, &report)?;
    println!(
        "{} {} lambda={} env={} {}x{} folds -> {}",
        ds.name,
        cfg.algorithm,
        cfg.lambda,
        cfg.environment,
        cfg.repeats,
        cfg.folds,
        a.out.display()
    );
    print_aggregates(&report);
    Ok(())
}

fn cmd_grid(a: &GridArgs) -> caea::Result<()> {
    let cfg = run_config(&a.run)?;
    let ds = load(&a.run.data)?;
    let lambdas = a.lambdas.clone().unwrap_or_else(|| LAMBDA_GRID.to_vec());
    let grid = run_grid(&ds, &cfg, &lambdas)?;
    write_grid(&a.run.out, &grid)?;
    for r in &grid.reports {
        println!(
            "lambda={:>3}  nmi={:.3}  accuracy={:.3}",
            r.config.lambda,
            r.mean("nmi").unwrap_or(f64::NAN),
            r.mean("accuracy").unwrap_or(f64::NAN)
        );
    }
    match grid.best_lambda {
        Some(l) => println!("best lambda by mean NMI: {l}"),
        None => println!("no lambda produced a scored fold"),
    }
    Ok(())
}

fn read_model(path: &Path) -> caea::Result<SavedModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    SavedModel::from_json(&text)
}

fn cmd_predict(a: &PredictArgs) -> caea::Result<()> {
    let saved = read_model(&a.model)?;
    let ds = load(&a.data)?;
    println!("index,predicted,truth");
    for (i, (x, &t)) in ds.points.iter().zip(&ds.labels).enumerate() {
        let p = saved
            .model
            .predict_class(x)?
            .and_then(|c| saved.class_name(c))
            .unwrap_or("");
        println!("{i},{p},{}", ds.class_names[t]);
    }
    Ok(())
}

fn cmd_inspect(a: &InspectArgs) -> caea::Result<()> {
    let saved = read_model(&a.model)?;
    let summary = match &saved.model {
        TrainedModel::Caea(m) => serde_json::json!({
            "kind": "caea",
            "params": m.params(),
            "nodes": m.len(),
            "edges": m.edges().len(),
            "components": m.component_count(),
            "v_threshold": m.v_threshold(),
            "mean_sigma": m.mean_sigma(),
            "input_count": m.input_count(),
            "classes": saved.class_names,
        }),
        TrainedModel::Hcaea(t) => serde_json::json!({
            "kind": "hcaea",
            "params": t.params(),
            "depth": t.depth(),
            "prototypes": t.prototype_count(),
            "leaves": t.leaf_count(),
            "root_nodes": t.root().model.len(),
            "root_children": t.root().children.len(),
            "training_points": t.training_len(),
            "classes": saved.class_names,
        }),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).map_err(Error::from)?
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Grid(a) => cmd_grid(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
