use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use frozencil::dataio::{load_dataset, make_task_schedule, save_dataset, DataFormat, ScheduleOrder, SynthSpec, TaskSchedule};
use frozencil::runner::{
    render_reports, run_experiment_on, ExperimentConfig, Method, OrderKind, ReportFormat, ResultsBundle, ScheduleConfig,
};
use frozencil::{Error, Result};

#[derive(Parser)]
#[command(name = "frozencil", version, about = "Replay-free class-incremental learning on frozen embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic Gaussian-cluster dataset.
    Synth(SynthArgs),
    /// Emit or inspect a task schedule as JSON.
    Schedule(ScheduleArgs),
    /// Run an experiment and write its results bundle.
    Run(RunArgs),
    /// Render one or more results bundles.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Embd,
    Csv,
}

impl From<FormatArg> for DataFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Embd => DataFormat::Embd,
            FormatArg::Csv => DataFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Contiguous,
    Shuffled,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 10.0)]
    mean_scale: f64,
    #[arg(long, default_value_t = 0.5)]
    noise_std: f64,
    /// Train,val,test fractions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.6, 0.2, 0.2])]
    splits: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to the output extension (.csv or EMBD).
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args)]
struct ScheduleArgs {
    /// Number of classes to split.
    #[arg(long, conflicts_with = "inspect")]
    classes: Option<usize>,
    #[arg(long, default_value_t = 2)]
    tasks: usize,
    #[arg(long, value_enum, default_value = "contiguous")]
    order: OrderArg,
    /// Seed for the shuffled order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Validate a schedule JSON file instead of generating one.
    #[arg(long)]
    inspect: Option<PathBuf>,
    /// Dataset to check class indices against.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; the flags below build one when absent.
    #[arg(long, conflicts_with_all = ["data", "method"])]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    data: Option<PathBuf>,
    /// Repeatable: mlp, single, joint or nmc:<variant>.
    #[arg(long)]
    method: Vec<String>,
    #[arg(long, default_value_t = 2)]
    tasks: usize,
    #[arg(long, value_enum, default_value = "contiguous")]
    order: OrderArg,
    #[arg(long, default_value_t = 0)]
    shuffle_seed: u64,
    /// Repeatable; defaults to 0, 1 and 2.
    #[arg(long)]
    seed: Vec<u64>,
    /// Write the bundle here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write final learner state blobs into this directory.
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    /// Include per-sample predictions in the bundle.
    #[arg(long)]
    dump_predictions: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Repeatable.
    #[arg(long, required = true)]
    bundle: Vec<PathBuf>,
    /// md, csv or json.
    #[arg(long, default_value = "md")]
    format: String,
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => Ok(std::fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n_classes: a.classes,
        dim: a.dim,
        samples_per_class: a.per_class,
        mean_scale: a.mean_scale,
        noise_std: a.noise_std,
        split_fractions: (a.splits[0], a.splits[1], a.splits[2]),
        seed: a.seed,
    };
    let ds = frozencil::dataio::generate_synthetic(&spec)?;
    let format = a.format.map(DataFormat::from).unwrap_or_else(|| DataFormat::from_path(&a.out));
    save_dataset(&ds, &a.out, format)?;
    eprintln!("wrote {} samples (d = {}, {} classes) to {}", ds.len(), ds.dim(), ds.num_classes(), a.out.display());
    Ok(())
}

fn schedule(a: ScheduleArgs) -> Result<()> {
    let dataset = a.data.as_deref().map(|p| load_dataset(p, DataFormat::from_path(p))).transpose()?;
    let sched = if let Some(path) = &a.inspect {
        let s: TaskSchedule = serde_json::from_str(&std::fs::read_to_string(path)?)
            .map_err(|e| Error::Config(format!("schedule: {e}")))?;
        if let Some(ds) = &dataset {
            s.check_classes(ds.num_classes())?;
        }
        s
    } else {
        let n = match (a.classes, &dataset) {
            (Some(n), _) => n,
            (None, Some(ds)) => ds.num_classes(),
            (None, None) => return Err(Error::Argument("give --classes, --data or --inspect".into())),
        };
        let order = match a.order {
            OrderArg::Contiguous => ScheduleOrder::Contiguous,
            OrderArg::Shuffled => ScheduleOrder::Shuffled(a.seed),
        };
        let s = make_task_schedule(n, a.tasks, order)?;
        if let Some(ds) = &dataset {
            s.check_classes(ds.num_classes())?;
        }
        s
    };
    println!("{}", serde_json::to_string(&sched)?);
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let mut config = match (&a.config, &a.data) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(data)) => {
            if a.method.is_empty() {
                return Err(Error::Config("--method is required without --config".into()));
            }
            let methods = a.method.iter().map(|m| m.parse::<Method>()).collect::<Result<Vec<_>>>()?;
            let order = match a.order {
                OrderArg::Contiguous => OrderKind::Contiguous,
                OrderArg::Shuffled => OrderKind::Shuffled,
            };
            let schedule =
                ScheduleConfig { tasks: Some(a.tasks), order, shuffle_seed: a.shuffle_seed, classes: None };
            ExperimentConfig::new(data.clone(), schedule, methods)
        }
        (None, None) => return Err(Error::Config("give --config or --data".into())),
    };
    if !a.seed.is_empty() {
        config.seeds = a.seed.clone();
    }
    config.dump_predictions |= a.dump_predictions;
    config.validate()?;
    let dataset = load_dataset(&config.dataset_path, config.format())?;
    let bundle = run_experiment_on(&config, &dataset, None, a.checkpoint_dir.as_deref())?;
    emit(&bundle.to_json(), a.out.as_deref())
}

fn report(a: ReportArgs) -> Result<()> {
    let format: ReportFormat = a.format.parse()?;
    let bundles = a
        .bundle
        .iter()
        .map(|p| ResultsBundle::from_json(&std::fs::read_to_string(p)?))
        .collect::<Result<Vec<_>>>()?;
    emit(&render_reports(&bundles, format)?, None)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Schedule(a) => schedule(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
