//! Spectral initialization by pairwise reweighting.
//!
//! Two observations `u` and `v` are drawn from one pool and every sample of a
//! second pool is weighted by `<y, u><y, v>`. When the codes of `u` and `v`
//! share exactly one atom, the reweighted second moment is dominated by that
//! atom. The truncated variant first reads the atom's support off the
//! diagonal (the "scores"), then takes the leading eigenvector of the
//! covariance restricted to that support. The two baselines work on the
//! full `n x n` covariance, optionally hard-thresholding the result.

use std::fmt;
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, ShapeBuilder};
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dictionary, GenerativeConfig, SampleSet};
use crate::rng::StreamRng;
use crate::spectral::{self, SpectralPair, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Support test on the scores, then the reduced `r x r` covariance.
    Truncated,
    /// Full covariance, no support estimate.
    PlainFull,
    /// Full covariance followed by keeping the `r` largest entries.
    FullWithHt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    /// Size of the pool `u` and `v` are drawn from.
    pub p1: usize,
    /// Size of the averaging pool.
    pub p2: usize,
    /// Scores must reach `score_floor_c * k / (m r)`.
    pub score_floor_c: f64,
    /// Decay ratio must stay below `ratio_c * r / ln(n)^ratio_log_exponent`.
    pub ratio_c: f64,
    pub ratio_log_exponent: f64,
    /// Leading singular value must reach `sv1_floor_c * k / m`.
    pub sv1_floor_c: f64,
    /// Second singular value must stay below `sv2_cap_c * k / (m ln n)`.
    pub sv2_cap_c: f64,
    /// Sign-invariant distance a new atom must keep from accepted ones.
    pub dedup_dist: f64,
    pub max_trials: usize,
    pub mode: InitMode,
    /// When set, scale the result so its spectral norm is at most twice this.
    pub target_norm: Option<f64>,
}

impl InitConfig {
    /// Defaults for `model` with the given pool sizes.
    pub fn for_model(model: &GenerativeConfig, p1: usize, p2: usize) -> Self {
        InitConfig {
            p1,
            p2,
            score_floor_c: 0.5,
            ratio_c: 4.0,
            ratio_log_exponent: 2.0,
            sv1_floor_c: 0.5,
            sv2_cap_c: 1.0,
            dedup_dist: default_dedup_dist(model.n),
            max_trials: default_max_trials(model.m, model.k),
            mode: InitMode::Truncated,
            target_norm: None,
        }
    }

    pub fn with_mode(mut self, mode: InitMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p1 < 2 {
            return Err(Error::config(format!("p1 = {} must be at least 2", self.p1)));
        }
        if self.p2 < 1 {
            return Err(Error::config("p2 must be at least 1"));
        }
        for (name, v) in [
            ("score_floor_c", self.score_floor_c),
            ("ratio_c", self.ratio_c),
            ("ratio_log_exponent", self.ratio_log_exponent),
            ("sv1_floor_c", self.sv1_floor_c),
            ("sv2_cap_c", self.sv2_cap_c),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.dedup_dist > 0.0 && self.dedup_dist < std::f64::consts::SQRT_2) {
            return Err(Error::config(format!(
                "dedup_dist = {} must lie in (0, sqrt 2)",
                self.dedup_dist
            )));
        }
        if self.max_trials < 1 {
            return Err(Error::config("max_trials must be at least 1"));
        }
        if let Some(t) = self.target_norm {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::config(format!("target_norm = {t} must be positive")));
            }
        }
        Ok(())
    }
}

/// `2 / ln n`, capped at 1 for tiny `n`.
pub fn default_dedup_dist(n: usize) -> f64 {
    (2.0 / (n as f64).ln()).min(1.0)
}

/// `64 m ceil(m / k^2)`, at least `50 m`.
pub fn default_max_trials(m: usize, k: usize) -> usize {
    let per_atom = m.div_ceil(k * k).max(1);
    (64 * m * per_atom).max(50 * m)
}

/// A unit vector accepted as an atom estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateAtom {
    pub vector: Array1<f64>,
    /// Sorted nonzero positions, when the mode produces a sparse estimate.
    pub support: Option<Vec<usize>>,
    pub sigma1: f64,
    pub sigma2: f64,
    pub trial_index: usize,
}

/// Reweighted coordinate energies, one per signal coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub scores: Array1<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InitStats {
    pub trials: usize,
    pub accepted: usize,
    pub rejected_support: usize,
    pub rejected_spectral: usize,
    pub rejected_duplicate: usize,
    pub rejected_no_convergence: usize,
    pub wall_ms: f64,
}

impl fmt::Display for InitStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "trials={}", self.trials)?;
        writeln!(f, "accepted={}", self.accepted)?;
        writeln!(f, "rejected_support={}", self.rejected_support)?;
        writeln!(f, "rejected_spectral={}", self.rejected_spectral)?;
        writeln!(f, "rejected_duplicate={}", self.rejected_duplicate)?;
        writeln!(f, "rejected_no_convergence={}", self.rejected_no_convergence)?;
        writeln!(f, "wall_ms={:.3}", self.wall_ms)
    }
}

#[derive(Debug, Clone)]
pub struct InitOutcome {
    pub dictionary: Dictionary,
    pub atoms: Vec<CandidateAtom>,
    pub stats: InitStats,
}

fn check_pair(samples: ArrayView2<'_, f64>, u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Result<()> {
    let n = samples.nrows();
    if u.len() != n || v.len() != n {
        return Err(Error::dims(format!(
            "u and v must have length {n}, got {} and {}",
            u.len(),
            v.len()
        )));
    }
    if samples.ncols() == 0 {
        return Err(Error::dims("the averaging pool is empty"));
    }
    Ok(())
}

/// `<y_i, u><y_i, v>` for every column of `samples`.
fn pair_weights(samples: ArrayView2<'_, f64>, u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Array1<f64> {
    let wu = samples.t().dot(&u);
    let wv = samples.t().dot(&v);
    wu * wv
}

fn scores_from_weights(squares: ArrayView2<'_, f64>, w: &Array1<f64>) -> ScoreVector {
    let p = w.len() as f64;
    ScoreVector {
        scores: squares.dot(w) / p,
    }
}

fn covariance_from_weights(samples: ArrayView2<'_, f64>, w: &Array1<f64>) -> Result<SymMatrix> {
    let p = w.len() as f64;
    let mut weighted = samples.to_owned();
    for (mut col, wi) in weighted.axis_iter_mut(Axis(1)).zip(w.iter()) {
        col *= *wi / p;
    }
    SymMatrix::from_upper(weighted.dot(&samples.t()))
}

/// `e_l = (1/p) sum_i <y_i, u><y_i, v> y_il^2`.
pub fn compute_scores(
    samples: ArrayView2<'_, f64>,
    u: ArrayView1<'_, f64>,
    v: ArrayView1<'_, f64>,
) -> Result<ScoreVector> {
    check_pair(samples, u, v)?;
    let w = pair_weights(samples, u, v);
    let squares = samples.mapv(|y| y * y);
    Ok(scores_from_weights(squares.view(), &w))
}

/// Decides whether the scores single out one atom's support. Returns the
/// positions of the `r` largest scores on acceptance.
pub fn support_test(
    scores: &ScoreVector,
    r: usize,
    cfg: &InitConfig,
    model: &GenerativeConfig,
) -> Option<Vec<usize>> {
    let n = scores.scores.len();
    if n == 0 || r == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores.scores[b]
            .abs()
            .total_cmp(&scores.scores[a].abs())
            .then(a.cmp(&b))
    });
    let sorted: Vec<f64> = order.iter().map(|&i| scores.scores[i].abs()).collect();
    let floor = cfg.score_floor_c * model.k as f64 / (model.m as f64 * r as f64);
    let ln_n = (n as f64).ln();
    let cap = cfg.ratio_c * r as f64 / ln_n.powf(cfg.ratio_log_exponent);
    let found = (1..=r.min(n)).any(|rp| {
        let top = sorted[rp - 1];
        let next = sorted.get(rp).copied().unwrap_or(0.0);
        top > 0.0 && top >= floor && next / top < cap
    });
    if found {
        Some(order[..r.min(n)].to_vec())
    } else {
        None
    }
}

/// Reweighted covariance restricted to `support`, in the order given.
pub fn reduced_covariance(
    samples: ArrayView2<'_, f64>,
    u: ArrayView1<'_, f64>,
    v: ArrayView1<'_, f64>,
    support: &[usize],
) -> Result<SymMatrix> {
    check_pair(samples, u, v)?;
    if support.is_empty() {
        return Err(Error::dims("support must be nonempty"));
    }
    if let Some(&bad) = support.iter().find(|&&i| i >= samples.nrows()) {
        return Err(Error::dims(format!("support index {bad} out of range")));
    }
    let w = pair_weights(samples, u, v);
    covariance_from_weights(samples.select(Axis(0), support).view(), &w)
}

/// Reweighted covariance over all `n` coordinates.
pub fn full_covariance(
    samples: ArrayView2<'_, f64>,
    u: ArrayView1<'_, f64>,
    v: ArrayView1<'_, f64>,
) -> Result<SymMatrix> {
    check_pair(samples, u, v)?;
    let w = pair_weights(samples, u, v);
    covariance_from_weights(samples, &w)
}

/// Accepts when the top singular value is large and the second one small,
/// which happens when `u` and `v` share a single atom.
pub fn spectral_certificate(
    m: &SymMatrix,
    cfg: &InitConfig,
    model: &GenerativeConfig,
) -> Result<Option<SpectralPair>> {
    let pair = spectral::top2_default(m)?;
    let km = model.k as f64 / model.m as f64;
    let floor = cfg.sv1_floor_c * km;
    let cap = cfg.sv2_cap_c * km / (model.n as f64).ln();
    Ok((pair.sigma1 >= floor && pair.sigma2 < cap).then_some(pair))
}

/// `true` when `z` is farther than `dedup_dist` from every accepted atom,
/// up to sign.
pub fn dedup_accept(z: ArrayView1<'_, f64>, accepted: &[CandidateAtom], dedup_dist: f64) -> bool {
    accepted.iter().all(|l| {
        let (mut minus, mut plus) = (0.0, 0.0);
        for (a, b) in z.iter().zip(l.vector.iter()) {
            minus += (a - b) * (a - b);
            plus += (a + b) * (a + b);
        }
        minus.min(plus).sqrt() > dedup_dist
    })
}

/// Keeps the `r` largest-magnitude entries and renormalizes.
pub fn hard_threshold(z: &Array1<f64>, r: usize) -> (Array1<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..z.len()).collect();
    order.sort_by(|&a, &b| z[b].abs().total_cmp(&z[a].abs()).then(a.cmp(&b)));
    let mut keep: Vec<usize> = order.into_iter().take(r).collect();
    keep.sort_unstable();
    let mut out = Array1::zeros(z.len());
    for &i in &keep {
        out[i] = z[i];
    }
    let norm = out.dot(&out).sqrt();
    if norm > 0.0 {
        out /= norm;
    }
    (out, keep)
}

enum Verdict {
    Accept(CandidateAtom),
    NoSupport,
    NoCertificate,
    NoConvergence,
}

struct Pools {
    first: Array2<f64>,
    second: Array2<f64>,
    second_sq: Array2<f64>,
}

fn split_pools(samples: &SampleSet, cfg: &InitConfig, rng: &mut StreamRng) -> Pools {
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(rng);
    let gather = |ids: &[usize]| {
        let mut out = Array2::zeros((samples.n(), ids.len()).f());
        for (c, &i) in ids.iter().enumerate() {
            out.column_mut(c).assign(&samples.observations.column(i));
        }
        out
    };
    let first = gather(&idx[..cfg.p1]);
    let second = gather(&idx[cfg.p1..cfg.p1 + cfg.p2]);
    // Row-major so each score is a contiguous dot product.
    let second_sq = second.mapv(|y| y * y).as_standard_layout().into_owned();
    Pools {
        first,
        second,
        second_sq,
    }
}

fn certify(
    m: &SymMatrix,
    cfg: &InitConfig,
    model: &GenerativeConfig,
) -> Result<std::result::Result<SpectralPair, Verdict>> {
    match spectral_certificate(m, cfg, model) {
        Ok(Some(p)) => Ok(Ok(p)),
        Ok(None) => Ok(Err(Verdict::NoCertificate)),
        Err(Error::NoConvergence { .. }) => Ok(Err(Verdict::NoConvergence)),
        Err(e) => Err(e),
    }
}

fn evaluate_pair(
    pools: &Pools,
    ui: usize,
    vi: usize,
    trial: usize,
    model: &GenerativeConfig,
    cfg: &InitConfig,
) -> Result<Verdict> {
    let n = model.n;
    let u = pools.first.column(ui);
    let v = pools.first.column(vi);
    let w = pair_weights(pools.second.view(), u, v);

    match cfg.mode {
        InitMode::Truncated => {
            let scores = scores_from_weights(pools.second_sq.view(), &w);
            let Some(support) = support_test(&scores, model.r, cfg, model) else {
                return Ok(Verdict::NoSupport);
            };
            let m = covariance_from_weights(pools.second.select(Axis(0), &support).view(), &w)?;
            let pair = match certify(&m, cfg, model)? {
                Ok(p) => p,
                Err(verdict) => return Ok(verdict),
            };
            let mut z = Array1::zeros(n);
            for (t, &i) in support.iter().enumerate() {
                z[i] = pair.v1[t];
            }
            let mut sorted = support;
            sorted.sort_unstable();
            Ok(Verdict::Accept(CandidateAtom {
                vector: z,
                support: Some(sorted),
                sigma1: pair.sigma1,
                sigma2: pair.sigma2,
                trial_index: trial,
            }))
        }
        InitMode::PlainFull | InitMode::FullWithHt => {
            let m = covariance_from_weights(pools.second.view(), &w)?;
            let pair = match certify(&m, cfg, model)? {
                Ok(p) => p,
                Err(verdict) => return Ok(verdict),
            };
            let (vector, support) = if cfg.mode == InitMode::FullWithHt {
                let (z, keep) = hard_threshold(&pair.v1, model.r);
                (z, Some(keep))
            } else {
                (pair.v1.clone(), None)
            };
            Ok(Verdict::Accept(CandidateAtom {
                vector,
                support,
                sigma1: pair.sigma1,
                sigma2: pair.sigma2,
                trial_index: trial,
            }))
        }
    }
}

/// Runs the pair loop until `m` atoms are collected or the trial budget is
/// spent, returning whatever was accepted.
pub fn collect_atoms(
    samples: &SampleSet,
    model: &GenerativeConfig,
    cfg: &InitConfig,
    rng: &mut StreamRng,
) -> Result<(Vec<CandidateAtom>, InitStats)> {
    model.validate()?;
    cfg.validate()?;
    if samples.n() != model.n {
        return Err(Error::dims(format!(
            "samples have dimension {} but the model says {}",
            samples.n(),
            model.n
        )));
    }
    if samples.len() < cfg.p1 + cfg.p2 {
        return Err(Error::dims(format!(
            "need p1 + p2 = {} samples, got {}",
            cfg.p1 + cfg.p2,
            samples.len()
        )));
    }
    let start = Instant::now();
    let pools = split_pools(samples, cfg, rng);
    let mut stats = InitStats::default();
    let mut atoms: Vec<CandidateAtom> = Vec::with_capacity(model.m);

    while atoms.len() < model.m && stats.trials < cfg.max_trials {
        let trial = stats.trials;
        stats.trials += 1;
        let pick = index::sample(rng, cfg.p1, 2);
        match evaluate_pair(&pools, pick.index(0), pick.index(1), trial, model, cfg)? {
            Verdict::Accept(atom) => {
                if dedup_accept(atom.vector.view(), &atoms, cfg.dedup_dist) {
                    stats.accepted += 1;
                    atoms.push(atom);
                } else {
                    stats.rejected_duplicate += 1;
                }
            }
            Verdict::NoSupport => stats.rejected_support += 1,
            Verdict::NoCertificate => stats.rejected_spectral += 1,
            Verdict::NoConvergence => stats.rejected_no_convergence += 1,
        }
    }
    stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((atoms, stats))
}

/// Runs the initialization loop until `m` atoms are collected.
pub fn initialize(
    samples: &SampleSet,
    model: &GenerativeConfig,
    cfg: &InitConfig,
    rng: &mut StreamRng,
) -> Result<InitOutcome> {
    let (atoms, stats) = collect_atoms(samples, model, cfg, rng)?;

    if atoms.len() < model.m {
        return Err(Error::Incomplete {
            found: atoms.len(),
            wanted: model.m,
        });
    }
    let columns: Vec<Array1<f64>> = atoms.iter().map(|a| a.vector.clone()).collect();
    let mut dictionary = Dictionary::from_columns(model.n, &columns)?;
    if let Some(target) = cfg.target_norm {
        let norm = spectral::spectral_norm(dictionary.entries().view())?;
        let scale = (2.0 * target / norm).min(1.0);
        if scale < 1.0 {
            dictionary = Dictionary::from_matrix(dictionary.into_entries() * scale);
        }
    }
    Ok(InitOutcome {
        dictionary,
        atoms,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{draw_samples, generate_dictionary, Structure};
    use crate::rng;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng::seeded(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>() * 2.0 - 1.0)
    }

    fn score_oracle(y: &Array2<f64>, u: &Array1<f64>, v: &Array1<f64>) -> Vec<f64> {
        let (n, p) = y.dim();
        let mut e = vec![0.0; n];
        for l in 0..n {
            for i in 0..p {
                let (mut yu, mut yv) = (0.0, 0.0);
                for t in 0..n {
                    yu += y[[t, i]] * u[t];
                    yv += y[[t, i]] * v[t];
                }
                e[l] += yu * yv * y[[l, i]] * y[[l, i]];
            }
            e[l] /= p as f64;
        }
        e
    }

    fn benchmark_cfg() -> (GenerativeConfig, InitConfig) {
        let model = GenerativeConfig::block_benchmark();
        let cfg = InitConfig::for_model(&model, 1000, 2000);
        (model, cfg)
    }

    #[test]
    fn zero_probe_gives_zero_scores() {
        let y = random_matrix(6, 20, 1);
        let s = compute_scores(y.view(), Array1::zeros(6).view(), y.column(0)).unwrap();
        assert!(s.scores.iter().all(|e| *e == 0.0));
    }

    #[test]
    fn hand_computed_scores() {
        // Samples e1, e2 and e1 + e2 in R^4 with u = v = e1.
        let y = array![[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let e1 = array![1.0, 0.0, 0.0, 0.0];
        let s = compute_scores(y.view(), e1.view(), e1.view()).unwrap();
        assert_eq!(s.scores, array![2.0 / 3.0, 1.0 / 3.0, 0.0, 0.0]);
    }

    #[test]
    fn scores_match_triple_loop() {
        let y = random_matrix(9, 40, 2);
        let u = random_matrix(9, 1, 3).column(0).to_owned();
        let v = random_matrix(9, 1, 4).column(0).to_owned();
        let s = compute_scores(y.view(), u.view(), v.view()).unwrap();
        for (a, b) in s.scores.iter().zip(score_oracle(&y, &u, &v)) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn scores_are_the_covariance_diagonal() {
        let y = random_matrix(7, 30, 5);
        let (u, v) = (y.column(0), y.column(1));
        let s = compute_scores(y.view(), u, v).unwrap();
        let m = full_covariance(y.view(), u, v).unwrap();
        for l in 0..7 {
            assert!((s.scores[l] - m.entries()[[l, l]]).abs() <= 1e-12);
        }
    }

    #[test]
    fn reduced_is_restricted_full() {
        let y = random_matrix(8, 25, 6);
        let (u, v) = (y.column(3), y.column(4));
        let full = full_covariance(y.view(), u, v).unwrap();
        let support = [6, 1, 3];
        let red = reduced_covariance(y.view(), u, v, &support).unwrap();
        for (a, &i) in support.iter().enumerate() {
            for (b, &j) in support.iter().enumerate() {
                assert!((red.entries()[[a, b]] - full.entries()[[i, j]]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn covariance_input_checks() {
        let y = random_matrix(4, 5, 7);
        let short = Array1::zeros(3);
        assert!(compute_scores(y.view(), short.view(), y.column(0)).is_err());
        assert!(reduced_covariance(y.view(), y.column(0), y.column(1), &[]).is_err());
        assert!(reduced_covariance(y.view(), y.column(0), y.column(1), &[4]).is_err());
    }

    #[test]
    fn support_test_picks_a_clear_pair() {
        let (model, cfg) = benchmark_cfg();
        let mut scores = Array1::from_elem(64, 1e-4);
        scores[10] = 0.05;
        scores[11] = -0.05;
        let got = support_test(&ScoreVector { scores }, 2, &cfg, &model).unwrap();
        assert_eq!(got, vec![10, 11]);
    }

    #[test]
    fn support_test_rejects_flat_or_tiny_scores() {
        let (model, cfg) = benchmark_cfg();
        let flat = ScoreVector {
            scores: Array1::from_elem(64, 0.05),
        };
        assert!(support_test(&flat, 2, &cfg, &model).is_none());
        let zero = ScoreVector {
            scores: Array1::zeros(64),
        };
        assert!(support_test(&zero, 2, &cfg, &model).is_none());
        let mut tiny = Array1::zeros(64);
        tiny[0] = 1e-6;
        assert!(support_test(&ScoreVector { scores: tiny }, 2, &cfg, &model).is_none());
    }

    #[test]
    fn certificate_accepts_rank_one() {
        let (model, cfg) = benchmark_cfg();
        let km = model.k as f64 / model.m as f64;
        let a = array![0.6, 0.8];
        let outer = Array2::from_shape_fn((2, 2), |(i, j)| km * a[i] * a[j]);
        let pair = spectral_certificate(&SymMatrix::new(outer).unwrap(), &cfg, &model)
            .unwrap()
            .unwrap();
        assert!((pair.sigma1 - km).abs() < 1e-12);
        assert!(pair.sigma2 < 1e-12);
        assert!((pair.v1[0] - 0.6).abs() < 1e-10 && (pair.v1[1] - 0.8).abs() < 1e-10);
    }

    #[test]
    fn certificate_rejects_a_flat_spectrum() {
        let (model, cfg) = benchmark_cfg();
        let km = model.k as f64 / model.m as f64;
        let m = SymMatrix::new(Array2::eye(2) * km).unwrap();
        assert!(spectral_certificate(&m, &cfg, &model).unwrap().is_none());
    }

    fn atom(v: Array1<f64>) -> CandidateAtom {
        CandidateAtom {
            vector: v,
            support: None,
            sigma1: 1.0,
            sigma2: 0.0,
            trial_index: 0,
        }
    }

    #[test]
    fn dedup_is_sign_invariant() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let accepted = [atom(array![s, s, 0.0])];
        assert!(dedup_accept(array![1.0, 0.0, 0.0].view(), &[], 0.2));
        assert!(!dedup_accept(array![s, s, 0.0].view(), &accepted, 0.2));
        assert!(!dedup_accept(array![-s, -s, 0.0].view(), &accepted, 0.2));
        assert!(dedup_accept(array![s, -s, 0.0].view(), &accepted, 0.2));
        assert!(dedup_accept(array![0.0, 0.0, 1.0].view(), &accepted, 0.2));
    }

    #[test]
    fn hard_threshold_keeps_the_largest() {
        let (z, keep) = hard_threshold(&array![0.1, -3.0, 0.5, 4.0], 2);
        assert_eq!(keep, vec![1, 3]);
        assert!((z[1] + 0.6).abs() < 1e-15 && (z[3] - 0.8).abs() < 1e-15);
        assert_eq!((z[0], z[2]), (0.0, 0.0));
    }

    #[test]
    fn single_atom_model() {
        let model = GenerativeConfig {
            n: 1,
            m: 1,
            k: 1,
            r: 1,
            structure: Structure::Identity,
            ..GenerativeConfig::block_benchmark()
        };
        let dict = generate_dictionary(&model).unwrap();
        let samples = draw_samples(&dict, &model, 20, &mut rng::seeded(1)).unwrap();
        let cfg = InitConfig::for_model(&model, 10, 10);
        let out = initialize(&samples, &model, &cfg, &mut rng::seeded(2)).unwrap();
        assert_eq!(out.dictionary.entries(), &array![[1.0]]);
        assert_eq!(out.stats.accepted, 1);
    }

    #[test]
    fn impossible_floor_finds_nothing() {
        let (model, mut cfg) = benchmark_cfg();
        cfg.score_floor_c = 1e9;
        cfg.max_trials = 200;
        let dict = generate_dictionary(&model).unwrap();
        let samples = draw_samples(&dict, &model, 3000, &mut rng::seeded(3)).unwrap();
        let err = initialize(&samples, &model, &cfg, &mut rng::seeded(4)).unwrap_err();
        assert!(matches!(err, Error::Incomplete { found: 0, wanted: 64 }), "{err}");
    }

    #[test]
    fn too_few_samples() {
        let (model, cfg) = benchmark_cfg();
        let dict = generate_dictionary(&model).unwrap();
        let samples = draw_samples(&dict, &model, 100, &mut rng::seeded(3)).unwrap();
        assert!(matches!(
            initialize(&samples, &model, &cfg, &mut rng::seeded(4)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn config_validation() {
        let (_, cfg) = benchmark_cfg();
        assert!(cfg.validate().is_ok());
        let mut bad = cfg.clone();
        bad.p1 = 1;
        assert!(bad.validate().is_err());
        let mut bad = cfg.clone();
        bad.ratio_c = -1.0;
        assert!(bad.validate().is_err());
        let mut bad = cfg;
        bad.dedup_dist = 2.0;
        assert!(bad.validate().is_err());
        assert_eq!(default_max_trials(64, 6), 64 * 64 * 2);
        assert!((default_dedup_dist(64) - 2.0 / 64f64.ln()).abs() < 1e-15);
        assert_eq!(default_dedup_dist(2), 1.0);
    }

    #[test]
    fn stats_display_is_key_value() {
        let s = InitStats {
            trials: 3,
            accepted: 1,
            ..Default::default()
        };
        let text = s.to_string();
        assert!(text.lines().all(|l| l.contains('=')));
        assert!(text.contains("trials=3"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn scores_are_symmetric_in_the_pair(seed in any::<u64>()) {
            let y = random_matrix(5, 12, seed);
            let a = compute_scores(y.view(), y.column(0), y.column(1)).unwrap();
            let b = compute_scores(y.view(), y.column(1), y.column(0)).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn covariance_is_exactly_symmetric(seed in any::<u64>()) {
            let y = random_matrix(6, 15, seed);
            let m = full_covariance(y.view(), y.column(2), y.column(5)).unwrap();
            let e = m.entries();
            for i in 0..6 {
                for j in 0..6 {
                    prop_assert_eq!(e[[i, j]], e[[j, i]]);
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(4))]

        #[test]
        fn initialization_is_deterministic_with_unit_atoms(seed in 0u64..1000) {
            let (model, mut cfg) = benchmark_cfg();
            cfg.p1 = 300;
            cfg.p2 = 700;
            cfg.max_trials = 300;
            let dict = generate_dictionary(&model).unwrap();
            let samples = draw_samples(&dict, &model, 1000, &mut rng::seeded(seed)).unwrap();
            let run = |s| match initialize(&samples, &model, &cfg, &mut rng::seeded(s)) {
                Ok(out) => (out.atoms.iter().map(|a| a.vector.clone()).collect::<Vec<_>>(), out.stats.accepted),
                Err(Error::Incomplete { found, .. }) => (Vec::new(), found),
                Err(e) => panic!("{e}"),
            };
            let (a, na) = run(seed + 1);
            let (b, nb) = run(seed + 1);
            prop_assert_eq!(a.clone(), b);
            prop_assert_eq!(na, nb);
            for v in &a {
                prop_assert!((v.dot(v).sqrt() - 1.0).abs() < 1e-12);
            }
        }
    }
}
