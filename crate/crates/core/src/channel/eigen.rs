//! Hermitian eigendecomposition by cyclic complex Jacobi rotations.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Off-diagonal Frobenius norm (relative to the full norm) at which the sweep stops.
pub const CONVERGENCE_TOL: f64 = 1e-12;

/// Eigenvalues with magnitude below this are treated as exact zeros.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-10;

/// Tolerated asymmetry `max |A - A^H|` before the input is rejected.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigen-pairs of a channel covariance: `Sigma = U diag(gamma) U^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<Complex64>,
}

impl EigenBasis {
    /// Eigenvalues, descending and non-negative.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvectors as the columns of a unitary matrix.
    pub fn vectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// `U diag(gamma) U^H`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for j in 0..n {
            let g = Complex64::from(self.eigenvalues[j]);
            for i in 0..n {
                scaled[(i, j)] *= g;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// `U diag(sqrt(gamma))`, a square-root factor of the covariance.
    pub fn sqrt_factor(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut f = self.vectors.clone();
        for j in 0..n {
            let g = Complex64::from(self.eigenvalues[j].sqrt());
            for i in 0..n {
                f[(i, j)] *= g;
            }
        }
        f
    }

    /// Rotates an antenna-domain vector into the eigenbasis: `U^H y`.
    pub fn rotate(&self, y: &[Complex64]) -> Vec<Complex64> {
        let n = self.dim();
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| self.vectors[(i, j)].conj() * y[i])
                    .sum::<Complex64>()
            })
            .collect()
    }

    /// Basis of an isotropic covariance `I_N`.
    pub fn identity(n: usize) -> Self {
        Self {
            eigenvalues: vec![1.0; n],
            vectors: DMatrix::identity(n, n),
        }
    }

    /// Basis with the given eigenvalues and identity eigenvectors, i.e. a
    /// diagonal covariance. Eigenvalues are sorted descending.
    pub fn diagonal(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::Domain(
                "eigenvalues must be finite and non-negative".into(),
            ));
        }
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let n = eigenvalues.len();
        Ok(Self {
            eigenvalues,
            vectors: DMatrix::identity(n, n),
        })
    }
}

fn off_diagonal_norm_sq(a: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s
}

/// Diagonalizes a Hermitian matrix.
///
/// Each rotation first removes the phase of the pivot `a_pq` with a diagonal
/// unitary and then applies a real Jacobi rotation to the resulting symmetric
/// 2x2 block. Iteration stops once the off-diagonal Frobenius norm falls below
/// [`CONVERGENCE_TOL`] relative to the matrix norm; at most `100 N^2`
/// rotations are attempted.
pub fn hermitian_eig(matrix: &DMatrix<Complex64>) -> Result<EigenBasis> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            n,
            matrix.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::Dimension("empty matrix".into()));
    }

    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            asym = asym.max((matrix[(i, j)] - matrix[(j, i)].conj()).norm());
        }
    }
    if asym > HERMITIAN_TOL {
        return Err(Error::NonHermitian(asym));
    }
    let mut a = (matrix + matrix.adjoint()) * Complex64::from(0.5);
    let mut v: DMatrix<Complex64> = DMatrix::identity(n, n);

    let total_sq: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let threshold = CONVERGENCE_TOL * total_sq.sqrt().max(1.0);
    let cap = 100 * n * n;
    let mut rotations = 0usize;

    while off_diagonal_norm_sq(&a).sqrt() > threshold {
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let b = apq.norm();
                if b <= f64::MIN_POSITIVE {
                    continue;
                }
                if rotations >= cap {
                    return Err(Error::NoConvergence(rotations));
                }
                rotations += 1;

                let phase = apq / b;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * b);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // G = diag(1, conj(phase)) * [[c, s], [-s, c]] acting on (p, q)
                let g_pp = Complex64::from(c);
                let g_pq = Complex64::from(s);
                let g_qp = -phase.conj() * s;
                let g_qq = phase.conj() * c;

                // A <- A G
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * g_pp + akq * g_qp;
                    a[(k, q)] = akp * g_pq + akq * g_qq;
                }
                // A <- G^H A
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = g_pp.conj() * apk + g_qp.conj() * aqk;
                    a[(q, k)] = g_pq.conj() * apk + g_qq.conj() * aqk;
                }
                a[(p, q)] = Complex64::from(0.0);
                a[(q, p)] = Complex64::from(0.0);
                a[(p, p)].im = 0.0;
                a[(q, q)].im = 0.0;
                // V <- V G
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * g_pp + vkq * g_qp;
                    v[(k, q)] = vkp * g_pq + vkq * g_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].re.total_cmp(&a[(i, i)].re));
    let mut eigenvalues = Vec::with_capacity(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut g = a[(src, src)].re;
        if g < -ZERO_EIGENVALUE_TOL {
            return Err(Error::NegativeEigenvalue(g));
        }
        if g.abs() < ZERO_EIGENVALUE_TOL {
            g = 0.0;
        }
        eigenvalues.push(g);
        vectors.set_column(dst, &v.column(src));
    }
    Ok(EigenBasis {
        eigenvalues,
        vectors,
    })
}
