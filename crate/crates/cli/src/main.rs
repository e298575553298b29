use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lieflow::experiment::{self, Experiment, RunConfig, CONFIG_FILE};
use lieflow::flow::{TimeSchedule, DEFAULT_POWER};
use lieflow::Error;

#[derive(Parser, Debug)]
#[command(name = "lieflow", version, about = "Symmetry discovery by flow matching on Lie groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run config; missing fields take the experiment's defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Existing run directory; its config snapshot is used when --config is
    /// absent.
    #[arg(long, global = true)]
    run: Option<PathBuf>,

    /// Experiment preset (overrides the config).
    #[arg(long, global = true)]
    experiment: Option<String>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Training time schedule.
    #[arg(long, global = true, value_enum)]
    schedule: Option<ScheduleArg>,

    /// Exponent of the power schedule (implies --schedule power).
    #[arg(long, global = true)]
    n: Option<f64>,

    /// Euler steps T.
    #[arg(long, global = true)]
    steps: Option<usize>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Also render SVGs next to the CSV tables.
    #[arg(long, global = true)]
    svg: bool,

    /// Root for relative output directories.
    #[arg(long, global = true, env = "LIEFLOW_RUN_DIR", default_value = "runs")]
    run_root: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScheduleArg {
    Uniform,
    Power,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate train and test datasets and the manifest.
    Gen,
    /// Train the velocity network.
    Train {
        /// Continue from the checkpoint in the run directory.
        #[arg(long)]
        resume: bool,
    },
    /// Generate group elements and trajectories from the trained network.
    Sample {
        /// Number of generated elements (default from the config).
        #[arg(long)]
        count: Option<usize>,
    },
    /// Canonicalize, compute W1 and write the evaluation report.
    Eval,
    /// Emit plot tables for the run.
    Analyze,
    /// Train the scalar circle flow onto the C4 angles and emit its
    /// posterior tables.
    ScalarDemo,
}

fn load_config(cli: &Cli) -> Result<(RunConfig, PathBuf), Error> {
    let experiment = cli.experiment.as_deref().map(str::parse::<Experiment>).transpose()?;
    let source = match (&cli.config, &cli.run) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(run)) => Some(run.join(CONFIG_FILE)),
        (None, None) => None,
    };
    let text = match &source {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => String::new(),
    };
    let mut cfg = RunConfig::from_toml_for(&text, experiment)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match (cli.schedule, cli.n) {
        (Some(ScheduleArg::Uniform), Some(_)) => {
            return Err(Error::Config("--n applies to the power schedule only".into()));
        }
        (Some(ScheduleArg::Uniform), None) => cfg.train.schedule = TimeSchedule::Uniform,
        (Some(ScheduleArg::Power), n) => cfg.train.schedule = TimeSchedule::power(n.unwrap_or(DEFAULT_POWER)),
        (None, Some(n)) => cfg.train.schedule = TimeSchedule::power(n),
        (None, None) => {}
    }
    if let Some(steps) = cli.steps {
        cfg.sample.steps = steps;
        cfg.scalar.steps = steps;
    }
    if let Command::Sample { count: Some(c) } = cli.command {
        cfg.sample.count = c;
    }
    cfg.validate()?;
    let dir = match &cli.run {
        Some(run) => run.clone(),
        None => experiment::run_dir(&cfg, &cli.run_root),
    };
    Ok((cfg, dir))
}

fn print_paths(dir: &Path, paths: &[PathBuf]) {
    for p in paths {
        println!("{}", dir.join(p).display());
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let (cfg, dir) = load_config(cli)?;
    match cli.command {
        Command::Gen => {
            experiment::cmd_gen(&cfg, &dir)?;
            println!("{}", dir.display());
        }
        Command::Train { resume } => {
            let losses = experiment::cmd_train(&cfg, &dir, resume)?;
            if let Some(l) = losses.last() {
                println!("epochs {} final_loss {l:.6}", losses.len());
            }
        }
        Command::Sample { .. } => {
            experiment::cmd_sample(&cfg, &dir)?;
            println!("{}", dir.join(experiment::GENERATED_CSV).display());
        }
        Command::Eval => {
            let report = experiment::cmd_eval(&cfg, &dir)?;
            print!("{}", report.to_text());
        }
        Command::Analyze => {
            let out = experiment::emit_plot_data(&cfg, &dir, cli.svg)?;
            print_paths(&dir, &out);
        }
        Command::ScalarDemo => {
            let out = experiment::cmd_scalar_demo(&cfg, &dir, cli.svg)?;
            print_paths(&dir, &out);
        }
    }
    Ok(())
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::ExpRange { .. } => "exp_range",
        Error::CutLocus { .. } => "cut_locus",
        Error::LogDomain { .. } => "log_domain",
        Error::Singular { .. } => "singular",
        Error::Contract(_) => "contract",
        Error::Config(_) => "config",
        Error::Divergence { .. } => "divergence",
        Error::Generation { .. } => "generation",
        Error::RetriesExhausted { .. } => "retries_exhausted",
        Error::Incompatible(_) => "incompatible",
        Error::Parse { .. } => "parse",
        Error::MissingInputs(_) => "missing_inputs",
        Error::Io { .. } => "io",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            let msg = e.to_string().replace('\n', " ");
            eprintln!("lieflow-error\tkind={}\tcode={code}\tmessage={msg}", kind(&e));
            log::debug!("{e:?}");
            ExitCode::from(code as u8)
        }
    }
}
