//! Generative model: column-sparse ground-truth dictionaries and the sparse
//! codes and noisy observations drawn from them.

use ndarray::{Array1, Array2, ArrayView1, ShapeBuilder};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};

/// Tolerance on column norms of generated dictionaries.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// Resample budget per column for [`Structure::RandomSparse`].
pub const MAX_COLUMN_RESAMPLES: usize = 100;

const DICTIONARY_STREAM: u64 = 0xd1c7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    /// `n/2` orthonormal 2x2 blocks `[1 1; 1 -1] / sqrt(2)`.
    BlockDiagonal,
    /// `r` random positions per column with magnitudes above the floor.
    RandomSparse,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoeffLaw {
    /// Nonzero code values are +1 or -1 with equal probability.
    Rademacher,
    /// Magnitude uniform on `[coeff_min, 1]` with a random sign.
    UniformSigned,
}

fn default_tau_floor() -> f64 {
    0.5
}

/// All parameters of the generative model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerativeConfig {
    /// Signal dimension.
    pub n: usize,
    /// Number of atoms.
    pub m: usize,
    /// Code sparsity.
    pub k: usize,
    /// Nonzeros per dictionary column.
    pub r: usize,
    /// Per-entry standard deviation of the additive Gaussian noise.
    #[serde(default)]
    pub sigma_eps: f64,
    /// Smallest nonzero code magnitude.
    #[serde(default = "one")]
    pub coeff_min: f64,
    /// Dictionary magnitudes are at least `tau_floor / sqrt(r)`.
    #[serde(default = "default_tau_floor")]
    pub tau_floor: f64,
    pub structure: Structure,
    #[serde(default = "rademacher")]
    pub coeff_law: CoeffLaw,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn rademacher() -> CoeffLaw {
    CoeffLaw::Rademacher
}

impl GenerativeConfig {
    /// The synthetic setup used throughout the benchmarks: 64x64 block
    /// diagonal synthesis matrix, 6-sparse Rademacher codes, no noise.
    pub fn block_benchmark() -> Self {
        GenerativeConfig {
            n: 64,
            m: 64,
            k: 6,
            r: 2,
            sigma_eps: 0.0,
            coeff_min: 1.0,
            tau_floor: 0.5,
            structure: Structure::BlockDiagonal,
            coeff_law: CoeffLaw::Rademacher,
            seed: 0,
        }
    }

    pub fn with_noise(mut self, sigma_eps: f64) -> Self {
        self.sigma_eps = sigma_eps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Minimum nonzero dictionary magnitude.
    pub fn tau(&self) -> f64 {
        self.tau_floor / (self.r as f64).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n < 1 {
            return fail("n must be at least 1".into());
        }
        if self.k < 1 || self.k > self.m {
            return fail(format!("k = {} must lie in [1, m = {}]", self.k, self.m));
        }
        if self.r < 1 || self.r > self.n {
            return fail(format!("r = {} must lie in [1, n = {}]", self.r, self.n));
        }
        if !(self.coeff_min > 0.0 && self.coeff_min <= 1.0) {
            return fail(format!("coeff_min = {} must lie in (0, 1]", self.coeff_min));
        }
        if !(self.sigma_eps >= 0.0 && self.sigma_eps.is_finite()) {
            return fail(format!("sigma_eps = {} must be finite and >= 0", self.sigma_eps));
        }
        if !(self.tau_floor > 0.0 && self.tau_floor <= 1.0) {
            return fail(format!("tau_floor = {} must lie in (0, 1]", self.tau_floor));
        }
        match self.structure {
            Structure::BlockDiagonal => {
                if self.n != self.m || self.n % 2 != 0 || self.r != 2 {
                    return fail(format!(
                        "block-diagonal structure needs n = m, n even and r = 2 (got n={}, m={}, r={})",
                        self.n, self.m, self.r
                    ));
                }
            }
            Structure::Identity => {
                if self.n != self.m || self.r != 1 {
                    return fail(format!(
                        "identity structure needs n = m and r = 1 (got n={}, m={}, r={})",
                        self.n, self.m, self.r
                    ));
                }
            }
            Structure::RandomSparse => {}
        }
        Ok(())
    }
}

/// Dense `n x m` dictionary with the nonzero pattern of every column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    entries: Array2<f64>,
    supports: Vec<Vec<usize>>,
}

impl Dictionary {
    /// Wraps a matrix; supports are the exact nonzero positions.
    pub fn from_matrix(entries: Array2<f64>) -> Self {
        let supports = entries
            .columns()
            .into_iter()
            .map(|c| {
                c.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        Dictionary { entries, supports }
    }

    /// Builds a dictionary from unit columns in order.
    pub fn from_columns(n: usize, columns: &[Array1<f64>]) -> Result<Self> {
        let mut entries = Array2::zeros((n, columns.len()));
        for (j, c) in columns.iter().enumerate() {
            if c.len() != n {
                return Err(Error::dims(format!("column {j} has length {}, expected {n}", c.len())));
            }
            entries.column_mut(j).assign(c);
        }
        Ok(Self::from_matrix(entries))
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn m(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<f64> {
        self.entries
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.entries.column(j)
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    /// Checks the generated-dictionary invariants: unit columns, `r` nonzeros
    /// per column and every nonzero at least `tau` in magnitude.
    pub fn check_generated(&self, r: usize, tau: f64) -> Result<()> {
        for (j, col) in self.entries.columns().into_iter().enumerate() {
            let norm = col.dot(&col).sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::config(format!("column {j} has norm {norm}")));
            }
            if self.supports[j].len() != r {
                return Err(Error::config(format!(
                    "column {j} has {} nonzeros, expected {r}",
                    self.supports[j].len()
                )));
            }
            if let Some(&i) = self.supports[j].iter().find(|&&i| col[i].abs() < tau) {
                return Err(Error::config(format!(
                    "entry ({i}, {j}) = {} is below the floor {tau}",
                    col[i]
                )));
            }
        }
        Ok(())
    }
}

/// A `k`-sparse code vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    /// Sorted support indices.
    pub support: Vec<usize>,
    /// Dense values, zero off the support.
    pub values: Array1<f64>,
}

impl SparseCode {
    pub fn single(m: usize, atom: usize, value: f64) -> Self {
        let mut values = Array1::zeros(m);
        values[atom] = value;
        SparseCode {
            support: vec![atom],
            values,
        }
    }
}

/// Observations stored column-per-sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    /// `n x p`, column-major so each sample is contiguous.
    pub observations: Array2<f64>,
    pub truth_codes: Option<Vec<SparseCode>>,
    pub noise_sigma: f64,
}

impl SampleSet {
    pub fn from_observations(observations: Array2<f64>, noise_sigma: f64) -> Result<Self> {
        if observations.ncols() < 1 {
            return Err(Error::dims("a sample set needs at least one column"));
        }
        let mut fortran = Array2::zeros(observations.raw_dim().f());
        fortran.assign(&observations);
        Ok(SampleSet {
            observations: fortran,
            truth_codes: None,
            noise_sigma,
        })
    }

    pub fn n(&self) -> usize {
        self.observations.nrows()
    }

    pub fn len(&self) -> usize {
        self.observations.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Builds the ground-truth dictionary; the random structure draws from
/// `cfg.seed`.
pub fn generate_dictionary(cfg: &GenerativeConfig) -> Result<Dictionary> {
    let mut rng = rng::stream(cfg.seed, DICTIONARY_STREAM);
    generate_dictionary_with(cfg, &mut rng)
}

pub fn generate_dictionary_with(cfg: &GenerativeConfig, rng: &mut StreamRng) -> Result<Dictionary> {
    cfg.validate()?;
    let (n, m) = (cfg.n, cfg.m);
    let dict = match cfg.structure {
        Structure::Identity => Dictionary::from_matrix(Array2::eye(n)),
        Structure::BlockDiagonal => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let mut a = Array2::zeros((n, m));
            for b in 0..n / 2 {
                let (i, j) = (2 * b, 2 * b + 1);
                a[[i, i]] = s;
                a[[i, j]] = s;
                a[[j, i]] = s;
                a[[j, j]] = -s;
            }
            Dictionary::from_matrix(a)
        }
        Structure::RandomSparse => {
            let tau = cfg.tau();
            let mut a = Array2::zeros((n, m));
            for j in 0..m {
                let col = random_sparse_column(n, cfg.r, tau, rng)
                    .ok_or(Error::GenerationFailure {
                        column: j,
                        attempts: MAX_COLUMN_RESAMPLES,
                    })?;
                a.column_mut(j).assign(&col);
            }
            Dictionary::from_matrix(a)
        }
    };
    Ok(dict)
}

fn random_sparse_column(n: usize, r: usize, tau: f64, rng: &mut StreamRng) -> Option<Array1<f64>> {
    for _ in 0..MAX_COLUMN_RESAMPLES {
        let mut col = Array1::zeros(n);
        for i in index::sample(rng, n, r) {
            let mag = rng.random_range(tau..=1.0);
            col[i] = if rng.random_bool(0.5) { mag } else { -mag };
        }
        let norm = col.dot(&col).sqrt();
        col /= norm;
        if col.iter().all(|v| *v == 0.0 || v.abs() >= tau) {
            return Some(col);
        }
    }
    None
}

/// Largest absolute inner product between two distinct columns.
pub fn mutual_coherence(dict: &Dictionary) -> Result<f64> {
    if dict.m() < 2 {
        return Err(Error::config("mutual coherence needs at least two atoms"));
    }
    let gram = dict.entries().t().dot(dict.entries());
    let mut best = 0.0f64;
    for ((i, j), v) in gram.indexed_iter() {
        if i != j {
            best = best.max(v.abs());
        }
    }
    Ok(best)
}

/// Draws a code with a uniformly random `k`-subset support.
pub fn draw_code(cfg: &GenerativeConfig, rng: &mut StreamRng) -> SparseCode {
    let mut support = index::sample(rng, cfg.m, cfg.k).into_vec();
    support.sort_unstable();
    let mut values = Array1::zeros(cfg.m);
    for &i in &support {
        let mag = match cfg.coeff_law {
            CoeffLaw::Rademacher => 1.0,
            CoeffLaw::UniformSigned => rng.random_range(cfg.coeff_min..=1.0),
        };
        values[i] = if rng.random_bool(0.5) { mag } else { -mag };
    }
    SparseCode { support, values }
}

/// `dict * code + noise` for a single sample.
pub fn observe(dict: &Dictionary, code: &SparseCode, sigma: f64, rng: &mut StreamRng) -> Array1<f64> {
    let mut y = Array1::zeros(dict.n());
    for &j in &code.support {
        y.scaled_add(code.values[j], &dict.column(j));
    }
    if sigma > 0.0 {
        let noise = Normal::new(0.0, sigma).expect("sigma is finite and positive");
        for v in y.iter_mut() {
            *v += noise.sample(rng);
        }
    }
    y
}

/// Draws `p` observations `y = A x + e` and records the codes.
pub fn draw_samples(
    dict: &Dictionary,
    cfg: &GenerativeConfig,
    p: usize,
    rng: &mut StreamRng,
) -> Result<SampleSet> {
    cfg.validate()?;
    if dict.n() != cfg.n || dict.m() != cfg.m {
        return Err(Error::dims(format!(
            "dictionary is {}x{} but the model says {}x{}",
            dict.n(),
            dict.m(),
            cfg.n,
            cfg.m
        )));
    }
    if p < 1 {
        return Err(Error::dims("need at least one sample"));
    }
    let mut observations = Array2::zeros((cfg.n, p).f());
    let mut codes = Vec::with_capacity(p);
    for i in 0..p {
        let code = draw_code(cfg, rng);
        observations
            .column_mut(i)
            .assign(&observe(dict, &code, cfg.sigma_eps, rng));
        codes.push(code);
    }
    Ok(SampleSet {
        observations,
        truth_codes: Some(codes),
        noise_sigma: cfg.sigma_eps,
    })
}
