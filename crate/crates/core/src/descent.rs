//! Projected approximate-gradient descent.
//!
//! Each step encodes the batch by thresholding `A^T y`, forms the gradient
//! surrogate `(1/p) sum (A x - y) sgn(x)^T`, masks it with the support
//! pattern of the initial estimate and takes a step of size
//! `eta_c * m / k`.

use std::io::{self, Write};
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval;
use crate::model::{self, Dictionary, GenerativeConfig, SparseCode};
use crate::rng::StreamRng;
use crate::spectral;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub steps: usize,
    /// Step size is `eta_c * m / k`.
    pub eta_c: f64,
    /// Code entries below this magnitude are zeroed.
    pub code_threshold: f64,
    /// Mask each gradient with the initial support pattern.
    pub projected: bool,
    /// Draw a new batch every step instead of reusing one.
    pub fresh_samples: bool,
    pub batch: usize,
    /// When set, scale the final estimate so its spectral norm is at most
    /// twice this.
    pub clip_norm: Option<f64>,
}

impl DescentConfig {
    pub fn for_model(model: &GenerativeConfig, batch: usize) -> Self {
        DescentConfig {
            steps: 25,
            eta_c: 0.5,
            code_threshold: model.coeff_min / 2.0,
            projected: true,
            fresh_samples: false,
            batch,
            clip_norm: None,
        }
    }

    pub fn step_size(&self, model: &GenerativeConfig) -> f64 {
        self.eta_c * model.m as f64 / model.k as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::config("descent needs at least one step"));
        }
        if !(self.eta_c > 0.0 && self.eta_c.is_finite()) {
            return Err(Error::config(format!("eta_c = {} must be positive", self.eta_c)));
        }
        if !(self.code_threshold > 0.0 && self.code_threshold.is_finite()) {
            return Err(Error::config(format!(
                "code_threshold = {} must be positive",
                self.code_threshold
            )));
        }
        if self.batch < 1 {
            return Err(Error::config("batch must be at least 1"));
        }
        Ok(())
    }
}

/// Binary `n x m` pattern; column `j` marks the allowed support of atom `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportMask {
    mask: Array2<f64>,
}

impl SupportMask {
    /// Ones exactly where `dict` is nonzero.
    pub fn from_dictionary(dict: &Dictionary) -> Self {
        SupportMask {
            mask: dict.entries().mapv(|v| if v != 0.0 { 1.0 } else { 0.0 }),
        }
    }

    pub fn full(n: usize, m: usize) -> Self {
        SupportMask {
            mask: Array2::ones((n, m)),
        }
    }

    pub fn from_bool(mask: &Array2<bool>) -> Self {
        SupportMask {
            mask: mask.mapv(|b| if b { 1.0 } else { 0.0 }),
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.mask.dim()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.mask[[i, j]] != 0.0
    }
}

/// One row of the descent trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    /// Max column error of the iterate after this step, when a reference is
    /// supplied.
    pub max_col_err: Option<f64>,
    pub grad_fro: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DescentTrace {
    /// Max column error of the starting point, when a reference is supplied.
    pub initial_error: Option<f64>,
    pub records: Vec<TraceRecord>,
}

impl DescentTrace {
    pub const CSV_HEADER: &'static str = "step,max_col_err,grad_fro,wall_ms";

    pub fn write_csv<W: Write + ?Sized>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            let err = r.max_col_err.map_or_else(|| "nan".to_string(), |e| e.to_string());
            writeln!(out, "{},{},{},{:.3}", r.step, err, r.grad_fro, r.wall_ms)?;
        }
        Ok(())
    }

    /// Error after each step, prefixed by the starting error.
    pub fn errors(&self) -> Option<Vec<f64>> {
        let mut out = vec![self.initial_error?];
        for r in &self.records {
            out.push(r.max_col_err?);
        }
        Some(out)
    }
}

#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub dictionary: Dictionary,
    pub trace: DescentTrace,
}

/// Supplies observation batches to [`descend`].
pub trait SampleSource {
    fn next_batch(&mut self, p: usize) -> Result<Array2<f64>>;
}

/// A fixed data set; every request returns (up to) its first `p` columns.
#[derive(Debug, Clone)]
pub struct FixedBatch {
    data: Array2<f64>,
}

impl FixedBatch {
    pub fn new(data: Array2<f64>) -> Self {
        FixedBatch { data }
    }
}

impl SampleSource for FixedBatch {
    fn next_batch(&mut self, p: usize) -> Result<Array2<f64>> {
        if p >= self.data.ncols() {
            Ok(self.data.clone())
        } else {
            Ok(self.data.slice(ndarray::s![.., ..p]).to_owned())
        }
    }
}

/// Draws fresh samples from the generative model on every request.
pub struct ModelSource<'a> {
    pub dictionary: &'a Dictionary,
    pub model: &'a GenerativeConfig,
    pub rng: StreamRng,
}

impl SampleSource for ModelSource<'_> {
    fn next_batch(&mut self, p: usize) -> Result<Array2<f64>> {
        Ok(model::draw_samples(self.dictionary, self.model, p, &mut self.rng)?.observations)
    }
}

fn threshold_in_place(x: &mut Array2<f64>, threshold: f64) {
    x.mapv_inplace(|v| if v.abs() < threshold { 0.0 } else { v });
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `threshold(A^T y)`: entries of magnitude below `threshold` are zeroed.
pub fn encode(a: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, threshold: f64) -> Result<SparseCode> {
    if a.nrows() != y.len() {
        return Err(Error::dims(format!(
            "dictionary has {} rows but the sample has length {}",
            a.nrows(),
            y.len()
        )));
    }
    let mut values: Array1<f64> = a.t().dot(&y);
    values.mapv_inplace(|v| if v.abs() < threshold { 0.0 } else { v });
    let support = values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .collect();
    Ok(SparseCode { support, values })
}

/// `(1/p) sum_i (A x_i - y_i) sgn(x_i)^T` with `x_i = threshold(A^T y_i)`.
pub fn approx_gradient(
    a: ArrayView2<'_, f64>,
    batch: ArrayView2<'_, f64>,
    threshold: f64,
) -> Result<Array2<f64>> {
    if a.nrows() != batch.nrows() {
        return Err(Error::dims(format!(
            "dictionary has {} rows but samples have {}",
            a.nrows(),
            batch.nrows()
        )));
    }
    if batch.ncols() == 0 {
        return Err(Error::dims("empty batch"));
    }
    let mut codes = a.t().dot(&batch);
    threshold_in_place(&mut codes, threshold);
    let residual = a.dot(&codes) - batch;
    let signs = codes.mapv(sign);
    Ok(residual.dot(&signs.t()) / batch.ncols() as f64)
}

/// Entrywise product with the mask.
pub fn project_mask(g: ArrayView2<'_, f64>, mask: &SupportMask) -> Result<Array2<f64>> {
    if g.dim() != mask.dim() {
        return Err(Error::dims(format!(
            "gradient is {:?} but the mask is {:?}",
            g.dim(),
            mask.dim()
        )));
    }
    Ok(&g * &mask.mask)
}

/// Runs `cfg.steps` updates `A <- A - eta * P_H(g)`.
pub fn descend(
    a0: &Dictionary,
    mask: &SupportMask,
    data: &mut dyn SampleSource,
    model: &GenerativeConfig,
    cfg: &DescentConfig,
    truth: Option<&Dictionary>,
) -> Result<DescentOutcome> {
    cfg.validate()?;
    if mask.dim() != a0.entries().dim() {
        return Err(Error::dims(format!(
            "initial estimate is {:?} but the mask is {:?}",
            a0.entries().dim(),
            mask.dim()
        )));
    }
    if let Some(t) = truth {
        if t.entries().dim() != a0.entries().dim() {
            return Err(Error::dims("reference dictionary has the wrong shape"));
        }
    }
    let eta = cfg.step_size(model);
    let mut a = a0.entries().to_owned();
    let mut trace = DescentTrace {
        initial_error: truth.map(|t| eval::max_column_error(t.entries().view(), a.view())).transpose()?,
        records: Vec::with_capacity(cfg.steps),
    };
    let fixed = if cfg.fresh_samples {
        None
    } else {
        Some(data.next_batch(cfg.batch)?)
    };

    for step in 0..cfg.steps {
        let start = Instant::now();
        let fresh;
        let batch = match &fixed {
            Some(b) => b,
            None => {
                fresh = data.next_batch(cfg.batch)?;
                &fresh
            }
        };
        let mut g = approx_gradient(a.view(), batch.view(), cfg.code_threshold)?;
        if cfg.projected {
            g = project_mask(g.view(), mask)?;
        }
        a.scaled_add(-eta, &g);
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step });
        }
        let grad_fro = spectral::frobenius(g.view());
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        let max_col_err = truth
            .map(|t| eval::max_column_error(t.entries().view(), a.view()))
            .transpose()?;
        trace.records.push(TraceRecord {
            step,
            max_col_err,
            grad_fro,
            wall_ms,
        });
    }

    if let Some(target) = cfg.clip_norm {
        let norm = spectral::spectral_norm(a.view())?;
        if norm > 2.0 * target {
            a *= 2.0 * target / norm;
        }
    }
    Ok(DescentOutcome {
        dictionary: Dictionary::from_matrix(a),
        trace,
    })
}

/// Column norms of `a`; handy when inspecting unnormalized iterates.
pub fn column_norms(a: &Dictionary) -> Array1<f64> {
    spectral::column_norms(a.entries().view())
}

/// Sum over atoms of `<g_j, a_j - a*_j>` restricted to the mask.
pub fn masked_correlation(
    g: ArrayView2<'_, f64>,
    a: ArrayView2<'_, f64>,
    truth: ArrayView2<'_, f64>,
    mask: &SupportMask,
) -> f64 {
    let diff = &a - &truth;
    let gm = &g * &mask.mask;
    gm.axis_iter(Axis(1))
        .zip(diff.axis_iter(Axis(1)))
        .map(|(gc, dc)| gc.dot(&dc))
        .sum()
}
