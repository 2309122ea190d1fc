//! Small dense symmetric eigen-solvers.
//!
//! Matrices up to [`JACOBI_MAX_DIM`] go through cyclic Jacobi rotations.
//! Larger ones are reduced to tridiagonal form with Householder reflections
//! and finished with implicit-shift QL. Both return the full spectrum; the
//! callers here only need the two largest magnitudes and the leading vector.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

pub const JACOBI_MAX_DIM: usize = 32;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Relative symmetry tolerance accepted by [`SymMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

const QL_MAX_SWEEPS_PER_VALUE: usize = 30;

/// Dense symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    entries: Array2<f64>,
}

impl SymMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::dims(format!(
                "symmetric matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.nrows() == 0 {
            return Err(Error::dims("symmetric matrix must have dim >= 1"));
        }
        let n = entries.nrows();
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (entries[[i, j]], entries[[j, i]]);
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(1.0) {
                    return Err(Error::dims(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SymMatrix { entries })
    }

    /// Mirrors the upper triangle into the lower one.
    pub fn from_upper(mut entries: Array2<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n != entries.ncols() || n == 0 {
            return Err(Error::dims("symmetric matrix must be square with dim >= 1"));
        }
        for i in 0..n {
            for j in 0..i {
                entries[[i, j]] = entries[[j, i]];
            }
        }
        Ok(SymMatrix { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn scaled(&self, c: f64) -> SymMatrix {
        SymMatrix {
            entries: &self.entries * c,
        }
    }
}

/// The two largest singular values and the leading singular vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPair {
    pub sigma1: f64,
    pub sigma2: f64,
    /// Unit vector; its largest-magnitude entry is positive.
    pub v1: Array1<f64>,
    /// Signed eigenvalue belonging to `v1` (`sigma1 = |lambda1|`).
    pub lambda1: f64,
}

/// Full eigendecomposition of a symmetric matrix: eigenvalues in no
/// particular order and the matching eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

pub fn eigen_sym(m: &SymMatrix, max_iter: usize) -> Result<Eigen> {
    if m.dim() <= JACOBI_MAX_DIM {
        jacobi_cyclic(m.entries(), max_iter)
    } else {
        householder_ql(m.entries(), max_iter)
    }
}

/// Top two singular values (absolute eigenvalues) and leading vector.
pub fn top2(m: &SymMatrix, tol: f64, max_iter: usize) -> Result<SpectralPair> {
    let eig = eigen_sym(m, max_iter)?;
    let mut order: Vec<usize> = (0..eig.values.len()).collect();
    order.sort_by(|&a, &b| {
        eig.values[b]
            .abs()
            .total_cmp(&eig.values[a].abs())
            .then(a.cmp(&b))
    });
    let lead = order[0];
    let lambda1 = eig.values[lead];
    let sigma1 = lambda1.abs();
    let sigma2 = order.get(1).map_or(0.0, |&i| eig.values[i].abs());
    let mut v1 = eig.vectors.column(lead).to_owned();
    let norm = v1.dot(&v1).sqrt();
    v1 /= norm;
    canonicalize_sign(&mut v1);

    if sigma1 > 0.0 {
        let residual = m.entries().dot(&v1) - &v1 * lambda1;
        let res = residual.dot(&residual).sqrt();
        if !(res <= tol * sigma1) {
            return Err(Error::NoConvergence {
                iterations: max_iter,
                residual: res,
            });
        }
    }
    Ok(SpectralPair {
        sigma1,
        sigma2,
        v1,
        lambda1,
    })
}

pub fn top2_default(m: &SymMatrix) -> Result<SpectralPair> {
    top2(m, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

/// Largest singular value of a rectangular matrix.
pub fn spectral_norm(m: ArrayView2<'_, f64>) -> Result<f64> {
    let (rows, cols) = m.dim();
    if rows == 0 || cols == 0 {
        return Ok(0.0);
    }
    if rows == 1 || cols == 1 {
        return Ok(m.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    let gram = if cols <= rows { m.t().dot(&m) } else { m.dot(&m.t()) };
    let gram = SymMatrix::from_upper(gram)?;
    Ok(top2_default(&gram)?.sigma1.sqrt())
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub fn canonicalize_sign(v: &mut Array1<f64>) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
}

fn jacobi_cyclic(m: &Array2<f64>, max_sweeps: usize) -> Result<Eigen> {
    let n = m.nrows();
    let mut a = m.to_owned();
    let mut v = Array2::<f64>::eye(n);
    let fro2: f64 = a.iter().map(|x| x * x).sum();
    let target = f64::EPSILON * f64::EPSILON * fro2;

    let off2 = |a: &Array2<f64>| {
        let mut s = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                s += 2.0 * a[[p, q]] * a[[p, q]];
            }
        }
        s
    };

    let mut sweeps = 0;
    loop {
        let off = off2(&a);
        if off <= target {
            break;
        }
        if sweeps == max_sweeps {
            return Err(Error::NoConvergence {
                iterations: sweeps,
                residual: off.sqrt(),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                a[[p, q]] = 0.0;
                a[[q, p]] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    Ok(Eigen {
        values: a.diag().to_owned(),
        vectors: v,
    })
}

fn householder_ql(m: &Array2<f64>, max_iter: usize) -> Result<Eigen> {
    let n = m.nrows();
    let mut z = m.to_owned();
    let mut d = Array1::<f64>::zeros(n);
    let mut e = Array1::<f64>::zeros(n);
    tridiagonalize(&mut z, &mut d, &mut e);
    ql_implicit(&mut z, &mut d, &mut e, max_iter)?;
    Ok(Eigen {
        values: d,
        vectors: z,
    })
}

/// Householder reduction to tridiagonal form. On return `d` holds the
/// diagonal, `e[1..]` the subdiagonal and `z` the accumulated transform.
fn tridiagonalize(z: &mut Array2<f64>, d: &mut Array1<f64>, e: &mut Array1<f64>) {
    let n = z.nrows();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..i).map(|k| z[[i, k]].abs()).sum();
            if scale == 0.0 {
                e[i] = z[[i, l]];
            } else {
                for k in 0..i {
                    z[[i, k]] /= scale;
                    h += z[[i, k]] * z[[i, k]];
                }
                let f = z[[i, l]];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                z[[i, l]] = f - g;
                let mut f = 0.0;
                for j in 0..i {
                    z[[j, i]] = z[[i, j]] / h;
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += z[[j, k]] * z[[i, k]];
                    }
                    for k in j + 1..i {
                        g += z[[k, j]] * z[[i, k]];
                    }
                    e[j] = g / h;
                    f += e[j] * z[[i, j]];
                }
                let hh = f / (h + h);
                for j in 0..i {
                    let f = z[[i, j]];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        z[[j, k]] -= f * e[k] + g * z[[i, k]];
                    }
                }
            }
        } else {
            e[i] = z[[i, l]];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for i in 0..n {
        if d[i] != 0.0 {
            for j in 0..i {
                let mut g = 0.0;
                for k in 0..i {
                    g += z[[i, k]] * z[[k, j]];
                }
                for k in 0..i {
                    z[[k, j]] -= g * z[[k, i]];
                }
            }
        }
        d[i] = z[[i, i]];
        z[[i, i]] = 1.0;
        for j in 0..i {
            z[[j, i]] = 0.0;
            z[[i, j]] = 0.0;
        }
    }
}

/// Implicit-shift QL on the tridiagonal `(d, e)`, rotating `z` along.
fn ql_implicit(
    z: &mut Array2<f64>,
    d: &mut Array1<f64>,
    e: &mut Array1<f64>,
    max_iter: usize,
) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let cap = QL_MAX_SWEEPS_PER_VALUE.min(max_iter.max(1));
    let mut total = 0usize;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < n {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            if iter == cap {
                return Err(Error::NoConvergence {
                    iterations: total,
                    residual: e[l].abs(),
                });
            }
            iter += 1;
            total += 1;
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[mm] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            for i in (l..mm).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for k in 0..n {
                    let f = z[[k, i + 1]];
                    z[[k, i + 1]] = s * z[[k, i]] + c * f;
                    z[[k, i]] = c * z[[k, i]] - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
    Ok(())
}

/// Frobenius norm.
pub(crate) fn frobenius(m: ArrayView2<'_, f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean norms of the columns.
pub(crate) fn column_norms(m: ArrayView2<'_, f64>) -> Array1<f64> {
    m.map_axis(Axis(0), |c| c.dot(&c).sqrt())
}
