//! Monte Carlo experiment runner.
//!
//! Every `(p, trial)` pair gets its own data stream, so all methods see the
//! same dictionary and samples; each `(method, p, trial)` additionally gets
//! its own algorithm stream. Trials run in parallel and are aggregated in a
//! fixed order, which makes the CSV a pure function of the experiment config.

use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descent::{self, DescentConfig, FixedBatch, SupportMask};
use crate::error::{Error, Result};
use crate::eval;
use crate::init::{self, InitConfig, InitMode, InitStats};
use crate::model::{self, Dictionary, GenerativeConfig, SampleSet};
use crate::rng::{self, StreamRng};

const DATA_TAG: u64 = 0xda7a;
const ALGO_TAG: u64 = 0xa160;

/// Cap on the first pool when the experiment leaves `p1` unset.
pub const DEFAULT_P1_CAP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Truncated initialization, projected descent.
    Ours,
    /// Full-covariance initialization, unprojected descent.
    Plain,
    /// Full covariance plus hard thresholding, unprojected descent.
    PlainHt,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ours, Method::Plain, Method::PlainHt];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Plain => "plain",
            Method::PlainHt => "plain_ht",
        }
    }

    pub fn init_mode(self) -> InitMode {
        match self {
            Method::Ours => InitMode::Truncated,
            Method::Plain => InitMode::PlainFull,
            Method::PlainHt => InitMode::FullWithHt,
        }
    }

    fn tag(self) -> u64 {
        match self {
            Method::Ours => 0,
            Method::Plain => 1,
            Method::PlainHt => 2,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown method {s:?}")))
    }
}

/// Optional overrides of the initialization defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitOverrides {
    pub p1: Option<usize>,
    pub p2: Option<usize>,
    pub score_floor_c: Option<f64>,
    pub ratio_c: Option<f64>,
    pub ratio_log_exponent: Option<f64>,
    pub sv1_floor_c: Option<f64>,
    pub sv2_cap_c: Option<f64>,
    pub dedup_dist: Option<f64>,
    pub max_trials: Option<usize>,
    pub target_norm: Option<f64>,
}

impl InitOverrides {
    /// Defaults for `p` samples with the overrides applied. `p1` defaults to
    /// `min(1000, p / 2)` and `p2` to the remainder.
    pub fn resolve(&self, model: &GenerativeConfig, p: usize, mode: InitMode) -> InitConfig {
        let p1 = self.p1.unwrap_or_else(|| DEFAULT_P1_CAP.min(p / 2));
        let p2 = self.p2.unwrap_or_else(|| p.saturating_sub(p1));
        let mut cfg = InitConfig::for_model(model, p1, p2).with_mode(mode);
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        apply!(score_floor_c, ratio_c, ratio_log_exponent, sv1_floor_c, sv2_cap_c, dedup_dist, max_trials);
        if self.target_norm.is_some() {
            cfg.target_norm = self.target_norm;
        }
        cfg
    }
}

/// Optional overrides of the descent defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescentOverrides {
    pub steps: Option<usize>,
    pub eta_c: Option<f64>,
    pub code_threshold: Option<f64>,
    pub fresh_samples: Option<bool>,
    pub batch: Option<usize>,
    pub clip_norm: Option<f64>,
}

impl DescentOverrides {
    /// Defaults for `p` samples with the overrides applied; the batch
    /// defaults to all `p` samples.
    pub fn resolve(&self, model: &GenerativeConfig, p: usize, projected: bool) -> DescentConfig {
        let mut cfg = DescentConfig::for_model(model, self.batch.unwrap_or(p));
        cfg.projected = projected;
        if let Some(v) = self.steps {
            cfg.steps = v;
        }
        if let Some(v) = self.eta_c {
            cfg.eta_c = v;
        }
        if let Some(v) = self.code_threshold {
            cfg.code_threshold = v;
        }
        if let Some(v) = self.fresh_samples {
            cfg.fresh_samples = v;
        }
        if self.clip_norm.is_some() {
            cfg.clip_norm = self.clip_norm;
        }
        cfg
    }
}

fn default_trials() -> usize {
    20
}

fn default_true() -> bool {
    true
}

fn default_out_path() -> PathBuf {
    PathBuf::from("results.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub model: GenerativeConfig,
    #[serde(default)]
    pub init: InitOverrides,
    #[serde(default)]
    pub descent: DescentOverrides,
    pub methods: Vec<Method>,
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    pub success_threshold: f64,
    #[serde(default = "default_out_path")]
    pub out_path: PathBuf,
    /// When false, `mean_wall_s` is written as 0 so the CSV depends on the
    /// config alone.
    #[serde(default = "default_true")]
    pub record_wall_time: bool,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec =
            serde_json::from_str(text).map_err(|e| Error::config(format!("experiment spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.trials < 1 {
            return Err(Error::config("trials must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods must be nonempty"));
        }
        if self.sample_sizes.is_empty() {
            return Err(Error::config("sample_sizes must be nonempty"));
        }
        if self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("sample_sizes must be strictly ascending"));
        }
        if !(self.success_threshold > 0.0) {
            return Err(Error::config("success_threshold must be positive"));
        }
        for &p in &self.sample_sizes {
            for method in &self.methods {
                let cfg = self.init.resolve(&self.model, p, method.init_mode());
                cfg.validate()?;
                if cfg.p1 + cfg.p2 > p {
                    return Err(Error::config(format!(
                        "p1 + p2 = {} exceeds the sample size {p}",
                        cfg.p1 + cfg.p2
                    )));
                }
                self.descent.resolve(&self.model, p, true).validate()?;
            }
        }
        Ok(())
    }
}

/// Result of a single `(method, p, trial)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub recovered: bool,
    /// `+inf` when initialization came up short or descent diverged.
    pub fro_error: f64,
    pub support_exact_frac: f64,
    pub wall_s: f64,
    pub init_stats: Option<InitStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub method: Method,
    pub p: usize,
    pub recovery_rate: f64,
    /// Mean over trials with a finite error; `inf` when there are none.
    pub mean_fro_error: f64,
    pub mean_wall_s: f64,
    pub trials: usize,
}

impl ResultRow {
    pub const CSV_HEADER: &'static str = "method,p,recovery_rate,mean_fro_error,mean_wall_s,trials";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.method, self.p, self.recovery_rate, self.mean_fro_error, self.mean_wall_s, self.trials
        )
    }

    fn aggregate(method: Method, p: usize, outcomes: &[TrialOutcome], record_wall_time: bool) -> Self {
        let trials = outcomes.len();
        let hits = outcomes.iter().filter(|o| o.recovered).count();
        let finite: Vec<f64> = outcomes.iter().map(|o| o.fro_error).filter(|e| e.is_finite()).collect();
        let mean_fro_error = if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        let mean_wall_s = if record_wall_time {
            outcomes.iter().map(|o| o.wall_s).sum::<f64>() / trials as f64
        } else {
            0.0
        };
        ResultRow {
            method,
            p,
            recovery_rate: hits as f64 / trials as f64,
            mean_fro_error,
            mean_wall_s,
            trials,
        }
    }
}

/// Dictionary and samples shared by every method for one `(p, trial)`.
pub fn trial_data(spec: &ExperimentSpec, p: usize, trial: usize) -> Result<(Dictionary, SampleSet)> {
    let mut rng = rng::stream(spec.master_seed, rng::stream_id(&[DATA_TAG, p as u64, trial as u64]));
    let dict = model::generate_dictionary_with(&spec.model, &mut rng)?;
    let samples = model::draw_samples(&dict, &spec.model, p, &mut rng)?;
    Ok((dict, samples))
}

fn algorithm_stream(spec: &ExperimentSpec, method: Method, p: usize, trial: usize) -> StreamRng {
    rng::stream(
        spec.master_seed,
        rng::stream_id(&[ALGO_TAG, method.tag(), p as u64, trial as u64]),
    )
}

/// Runs one trial: initialization, descent, evaluation.
pub fn run_trial(spec: &ExperimentSpec, method: Method, p: usize, trial: usize) -> Result<TrialOutcome> {
    let (truth, samples) = trial_data(spec, p, trial)?;
    let mut rng = algorithm_stream(spec, method, p, trial);
    let init_cfg = spec.init.resolve(&spec.model, p, method.init_mode());
    let projected = method == Method::Ours;
    let descent_cfg = spec.descent.resolve(&spec.model, p, projected);

    let failed = |wall_s: f64, init_stats: Option<InitStats>| TrialOutcome {
        recovered: false,
        fro_error: f64::INFINITY,
        support_exact_frac: 0.0,
        wall_s,
        init_stats,
    };

    let start = Instant::now();
    let init_out = match init::initialize(&samples, &spec.model, &init_cfg, &mut rng) {
        Ok(out) => out,
        Err(Error::Incomplete { .. }) => return Ok(failed(start.elapsed().as_secs_f64(), None)),
        Err(e) => return Err(e),
    };
    let mask = if projected {
        SupportMask::from_dictionary(&init_out.dictionary)
    } else {
        SupportMask::full(spec.model.n, spec.model.m)
    };
    let descended = if descent_cfg.fresh_samples {
        let mut source = descent::ModelSource {
            dictionary: &truth,
            model: &spec.model,
            rng: rng.clone(),
        };
        descent::descend(&init_out.dictionary, &mask, &mut source, &spec.model, &descent_cfg, None)
    } else {
        let mut source = FixedBatch::new(samples.observations);
        descent::descend(&init_out.dictionary, &mask, &mut source, &spec.model, &descent_cfg, None)
    };
    let wall_s = start.elapsed().as_secs_f64();
    let estimate = match descended {
        Ok(out) => out.dictionary,
        Err(Error::NonFinite { .. }) => return Ok(failed(wall_s, Some(init_out.stats))),
        Err(e) => return Err(e),
    };
    let report = eval::report(&truth, &estimate, spec.success_threshold)?;
    Ok(TrialOutcome {
        recovered: report.recovered,
        fro_error: report.fro_error,
        support_exact_frac: report.support_exact_frac,
        wall_s,
        init_stats: Some(init_out.stats),
    })
}

/// Runs every `(method, p)` cell of the sweep.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.methods.len() * spec.sample_sizes.len());
    for &method in &spec.methods {
        for &p in &spec.sample_sizes {
            let outcomes: Vec<TrialOutcome> = (0..spec.trials)
                .into_par_iter()
                .map(|t| run_trial(spec, method, p, t))
                .collect::<Result<_>>()?;
            rows.push(ResultRow::aggregate(method, p, &outcomes, spec.record_wall_time));
        }
    }
    Ok(rows)
}

pub fn write_results_to<W: Write + ?Sized>(out: &mut W, rows: &[ResultRow]) -> io::Result<()> {
    writeln!(out, "{}", ResultRow::CSV_HEADER)?;
    for row in rows {
        writeln!(out, "{}", row.csv_row())?;
    }
    Ok(())
}

/// Writes the CSV to a sibling temporary file and renames it into place.
pub fn write_results(path: impl AsRef<Path>, rows: &[ResultRow]) -> Result<()> {
    let path = path.as_ref();
    let mut tmp_name = path.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let mut out = BufWriter::new(file);
    write_results_to(&mut out, rows)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(&tmp, e))?;
    drop(out);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Runs the experiment and writes its CSV to `spec.out_path`.
pub fn execute(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let rows = run_experiment(spec)?;
    write_results(&spec.out_path, &rows)?;
    Ok(rows)
}
