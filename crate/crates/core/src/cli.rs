//! Command-line front end.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 when the command
//! itself fails.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::descent::{self, FixedBatch, SupportMask};
use crate::error::{Error, Result};
use crate::eval;
use crate::harness::{self, DescentOverrides, ExperimentSpec, InitOverrides, Method};
use crate::init;
use crate::matrix_io;
use crate::model::{self, Dictionary, GenerativeConfig, SampleSet};
use crate::rng;

const SAMPLE_STREAM: u64 = 0x5a3f;
const ALGO_STREAM: u64 = 0xa160;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dsparse", version, about = "Double-sparse dictionary learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a ground-truth dictionary and samples drawn from it.
    Generate(GenerateArgs),
    /// Run one initialization and write the starting dictionary.
    Init(RunArgs),
    /// Initialize, run descent and write the learned dictionary and trace.
    Learn(LearnArgs),
    /// Compare two dictionary files and print the metrics row.
    Eval(EvalArgs),
    /// Run a Monte Carlo sweep described by a JSON file.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON file with `model`, `init` and `descent` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    /// Number of samples.
    #[arg(long, short = 'p', default_value_t = 5000)]
    samples: usize,
    /// Overrides the model's noise level.
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Ours,
    Plain,
    PlainHt,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ours => Method::Ours,
            MethodArg::Plain => Method::Plain,
            MethodArg::PlainHt => Method::PlainHt,
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Sample matrix file, one observation per column.
    samples: PathBuf,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "ours")]
    method: MethodArg,
}

#[derive(Debug, Args)]
struct LearnArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Ground-truth dictionary; when given the trace records column errors.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    truth: PathBuf,
    estimate: PathBuf,
    #[arg(long, default_value_t = eval::NOISELESS_THRESHOLD)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the experiment's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the experiment's output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write zero wall times so the CSV depends only on the config.
    #[arg(long)]
    no_timing: bool,
}

/// Model and stage settings for the single-run subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "GenerativeConfig::block_benchmark")]
    pub model: GenerativeConfig,
    #[serde(default)]
    pub init: InitOverrides,
    #[serde(default)]
    pub descent: DescentOverrides,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: GenerativeConfig::block_benchmark(),
            init: InitOverrides::default(),
            descent: DescentOverrides::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }
}

fn load_run_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.model.seed = seed;
    }
    cfg.model.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn generate(args: &GenerateArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = load_run_config(&args.common)?;
    if let Some(noise) = args.noise {
        cfg.model.sigma_eps = noise;
    }
    let dict = model::generate_dictionary(&cfg.model)?;
    let mut rng = rng::stream(cfg.model.seed, SAMPLE_STREAM);
    let samples = model::draw_samples(&dict, &cfg.model, args.samples, &mut rng)?;
    let dir = &args.common.out;
    create_dir(dir)?;
    matrix_io::write_matrix(dir.join("dictionary.mat"), dict.entries().view())?;
    matrix_io::write_matrix(dir.join("samples.mat"), samples.observations.view())?;
    let _ = writeln!(stdout, "wrote {} samples to {}", args.samples, dir.display());
    Ok(())
}

fn load_samples(path: &Path, cfg: &RunConfig) -> Result<SampleSet> {
    let obs = matrix_io::read_matrix(path)?;
    SampleSet::from_observations(obs, cfg.model.sigma_eps)
}

fn run_init(args: &RunArgs, cfg: &RunConfig) -> Result<(SampleSet, init::InitOutcome, rng::StreamRng)> {
    let samples = load_samples(&args.samples, cfg)?;
    let method = Method::from(args.method);
    let init_cfg = cfg.init.resolve(&cfg.model, samples.len(), method.init_mode());
    let mut rng = rng::stream(cfg.model.seed, ALGO_STREAM);
    let outcome = init::initialize(&samples, &cfg.model, &init_cfg, &mut rng)?;
    Ok((samples, outcome, rng))
}

fn init_cmd(args: &RunArgs, stdout: &mut dyn Write) -> Result<()> {
    let cfg = load_run_config(&args.common)?;
    let (_, outcome, _) = run_init(args, &cfg)?;
    let dir = &args.common.out;
    create_dir(dir)?;
    matrix_io::write_matrix(dir.join("init.mat"), outcome.dictionary.entries().view())?;
    let stats = outcome.stats.to_string();
    write_text(&dir.join("init_stats.txt"), &stats)?;
    let _ = write!(stdout, "{stats}");
    Ok(())
}

fn learn_cmd(args: &LearnArgs, stdout: &mut dyn Write) -> Result<()> {
    let run = &args.run;
    let cfg = load_run_config(&run.common)?;
    let truth = args
        .truth
        .as_ref()
        .map(|p| matrix_io::read_matrix(p).map(Dictionary::from_matrix))
        .transpose()?;
    let (samples, outcome, _) = run_init(run, &cfg)?;
    let method = Method::from(run.method);
    let projected = method == Method::Ours;
    let descent_cfg = cfg.descent.resolve(&cfg.model, samples.len(), projected);
    let mask = if projected {
        SupportMask::from_dictionary(&outcome.dictionary)
    } else {
        SupportMask::full(cfg.model.n, cfg.model.m)
    };
    if descent_cfg.fresh_samples {
        return Err(Error::config("learn works on a fixed sample file; fresh_samples is not available"));
    }
    let mut source = FixedBatch::new(samples.observations);
    let out = descent::descend(
        &outcome.dictionary,
        &mask,
        &mut source,
        &cfg.model,
        &descent_cfg,
        truth.as_ref(),
    )?;

    let dir = &run.common.out;
    create_dir(dir)?;
    matrix_io::write_matrix(dir.join("init.mat"), outcome.dictionary.entries().view())?;
    matrix_io::write_matrix(dir.join("dictionary.mat"), out.dictionary.entries().view())?;
    write_text(&dir.join("init_stats.txt"), &outcome.stats.to_string())?;
    let mut trace = Vec::new();
    out.trace
        .write_csv(&mut trace)
        .expect("writing to a Vec cannot fail");
    let trace_path = dir.join("trace.csv");
    fs::write(&trace_path, trace).map_err(|e| Error::io(&trace_path, e))?;
    let _ = writeln!(stdout, "wrote {}", dir.join("dictionary.mat").display());
    Ok(())
}

fn eval_cmd(args: &EvalArgs, stdout: &mut dyn Write) -> Result<()> {
    let truth = Dictionary::from_matrix(matrix_io::read_matrix(&args.truth)?);
    let est = Dictionary::from_matrix(matrix_io::read_matrix(&args.estimate)?);
    let report = eval::report(&truth, &est, args.threshold)?;
    let _ = writeln!(stdout, "{}", eval::EvalReport::CSV_HEADER);
    let _ = writeln!(stdout, "{}", report.csv_row());
    Ok(())
}

fn experiment_cmd(args: &ExperimentArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut spec = ExperimentSpec::load(&args.config)?;
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    if let Some(out) = &args.out {
        spec.out_path = out.clone();
    }
    if args.no_timing {
        spec.record_wall_time = false;
    }
    let rows = harness::execute(&spec)?;
    let _ = harness::write_results_to(stdout, &rows);
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{rendered}");
            } else {
                let _ = write!(stdout, "{rendered}");
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => generate(a, stdout),
        Command::Init(a) => init_cmd(a, stdout),
        Command::Learn(a) => learn_cmd(a, stdout),
        Command::Eval(a) => eval_cmd(a, stdout),
        Command::Experiment(a) => experiment_cmd(a, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_RUNTIME
        }
    }
}
