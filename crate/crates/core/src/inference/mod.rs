//! Monte Carlo maximum likelihood, standard errors, and exact enumeration.

mod bootstrap;
mod exact;
mod mle;

use nalgebra::DMatrix;
use statrs::function::erf::erfc;

pub use bootstrap::{parametric_bootstrap, BootstrapConfig, BootstrapResult};
pub use exact::{state_space_bits, ExactModel, DEFAULT_MAX_BITS, HARD_MAX_BITS};
pub use mle::{approx_loglik_ratio, fisher_information, initial_eta, mcmc_mle, FitConfig, FitResult, TraceEntry};

/// Two-sided normal p-value, 2 (1 - Phi(|z|)).
pub fn p_value(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Inverse of a symmetric positive semidefinite matrix. Falls back to the
/// eigen pseudo-inverse when the matrix is singular; the second value lists
/// the coordinates involved in the singular directions.
pub fn spd_inverse(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<usize>) {
    let q = m.nrows();
    if q == 0 {
        return (m.clone(), Vec::new());
    }
    let eig = m.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let tol = top * 1e-10 * q as f64;
    let mut singular = Vec::new();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam <= tol {
            let v = eig.eigenvectors.column(k);
            for i in 0..q {
                if v[i].abs() > 0.1 && !singular.contains(&i) {
                    singular.push(i);
                }
            }
        }
    }
    singular.sort_unstable();
    if singular.is_empty() {
        if let Some(ch) = m.clone().cholesky() {
            return (ch.inverse(), singular);
        }
    }
    let mut inv = DMatrix::zeros(q, q);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > tol {
            let v = eig.eigenvectors.column(k);
            inv += (v * v.transpose()) / lam;
        }
    }
    (inv, singular)
}

/// Turns a row-major matrix into nested vectors for serialization.
pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_normal_tails() {
        // 2 (1 - Phi(z)) from standard normal tables
        for (z, p) in [(0.0, 1.0), (1.0, 0.317_310_507_862_914), (1.959_963_984_540_054, 0.05), (3.0, 0.002_699_796_063_260)] {
            assert!((p_value(z) - p).abs() < 1e-10, "{z}: {}", p_value(z) - p);
            assert_eq!(p_value(-z), p_value(z));
        }
    }

    #[test]
    fn inverse_and_singular_fallback() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (inv, sing) = spd_inverse(&m);
        assert!(sing.is_empty());
        assert!(((&m * &inv) - DMatrix::identity(2, 2)).amax() < 1e-12);

        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 4.0]);
        let (inv, sing) = spd_inverse(&s);
        assert_eq!(sing, vec![1]);
        assert!((inv[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((inv[(2, 2)] - 0.25).abs() < 1e-12);
        assert_eq!(inv[(1, 1)], 0.0);
    }
}
