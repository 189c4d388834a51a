//! Small dense linear-algebra helpers.
//!
//! Matrices are `nalgebra::DMatrix<f64>`; the symmetric eigensolver is a
//! cyclic Jacobi sweep, which is plenty for the few-hundred-row condition
//! matrices the certificate checker builds.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Off-diagonal Frobenius norm at which the Jacobi sweep stops, relative to
/// the matrix scale (absolute for matrices with norm below one).
pub const JACOBI_TOLERANCE: f64 = 1e-12;

const JACOBI_MAX_SWEEPS: usize = 100;

/// `(S + Sᵀ) / 2`.
pub fn symmetric_part(s: &DMatrix<f64>) -> DMatrix<f64> {
    (s + s.transpose()) * 0.5
}

pub fn max_asymmetry(s: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..s.nrows() {
        for j in (i + 1)..s.ncols() {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    worst
}

/// Eigen-decomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct JacobiEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: DMatrix<f64>,
    pub sweeps: usize,
}

impl JacobiEigen {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "eigensolver needs a square matrix, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let mut m = a.clone();
        let mut v = DMatrix::<f64>::identity(n, n);
        let scale = m.norm().max(1.0);

        let mut sweeps = 0;
        while off_diagonal_norm(&m) > JACOBI_TOLERANCE * scale {
            if sweeps == JACOBI_MAX_SWEEPS {
                return Err(Error::Internal(format!(
                    "Jacobi eigensolver did not converge in {JACOBI_MAX_SWEEPS} sweeps"
                )));
            }
            sweeps += 1;
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut m, &mut v, p, q);
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
        let values = order.iter().map(|&i| m[(i, i)]).collect();
        let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
        Ok(Self {
            values,
            vectors,
            sweeps,
        })
    }

    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::INFINITY)
    }
}

fn off_diagonal_norm(m: &DMatrix<f64>) -> f64 {
    let mut sum = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j {
                sum += m[(i, j)] * m[(i, j)];
            }
        }
    }
    sum.sqrt()
}

// Classical Jacobi rotation zeroing m[p][q].
fn rotate(m: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize) {
    let apq = m[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = m[(p, p)];
    let aqq = m[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    let n = m.nrows();
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    JacobiEigen::new(a).map(|e| e.values)
}

/// Largest singular value, via the eigenvalues of `AᵀA`.
pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    let gram = a.transpose() * a;
    let top = JacobiEigen::new(&gram)?.max();
    Ok(top.max(0.0).sqrt())
}

/// `out = a · x` for slice-backed vectors.
#[inline]
pub fn matvec(a: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, xc) in x.iter().enumerate() {
            acc += a[(r, c)] * xc;
        }
        *o = acc;
    }
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}
