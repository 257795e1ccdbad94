//! Block shrinkage of the empirical Fourier coefficients.
//!
//! The first d coefficients are contracted toward zero by the factor
//! (1 - c(d)/||theta_d||), where the explicit constant
//!
//!   c(d) = (d - 1) sigma_star^2 L sqrt(b - a) / (n (s_star + sqrt(d sigma_star / n)))
//!
//! is small enough that the contraction reduces the quadratic risk by at
//! least c^2(d) uniformly over the drift class. Coordinates beyond d are
//! never touched.

use crate::error::{Error, Result};
use crate::spectral::{wls_fit, BasisMatrix, PiecewiseEstimate, WeightVector};

/// Inputs and derived constant for the shrinkage step.
#[derive(Debug, Clone, Copy)]
pub struct ShrinkageConfig {
    /// Shrunk block size, 1 <= d <= n.
    pub d: usize,
    /// Variance bound sigma_star = 4 / ((b - a) eps).
    pub sigma_star: f64,
    /// Upper bound on sup over the class of S^2 on [a, b].
    pub s_star: f64,
    /// Class Lipschitz constant.
    pub lipschitz: f64,
    pub a: f64,
    pub b: f64,
    pub n: usize,
    /// Derived shrinkage constant c(d); zero when d = 1.
    pub c: f64,
}

impl ShrinkageConfig {
    pub fn new(
        d: usize,
        n: usize,
        lipschitz: f64,
        sigma_star: f64,
        s_star: f64,
        a: f64,
        b: f64,
    ) -> Result<Self> {
        if d == 0 || d > n {
            return Err(Error::invalid(format!(
                "block size d = {d} must satisfy 1 <= d <= n = {n}"
            )));
        }
        if !(sigma_star > 0.0) || !(s_star > 0.0) {
            return Err(Error::invalid(
                "variance and class bounds must be positive".to_string(),
            ));
        }
        let c = shrink_coefficient(d, n, sigma_star, s_star, lipschitz, a, b);
        Ok(ShrinkageConfig {
            d,
            sigma_star,
            s_star,
            lipschitz,
            a,
            b,
            n,
            c,
        })
    }
}

/// Conservative bound on sup S^2 over [a, b] for the whole class, from
/// |S(N)| <= L and Lipschitz chaining: |S(x)| <= L + L |x - N| <=
/// L (1 + N + max(|a|, |b|)).
pub fn class_sup_bound(lipschitz: f64, radius: f64, a: f64, b: f64) -> f64 {
    let reach = lipschitz * (1.0 + radius + a.abs().max(b.abs()));
    reach * reach
}

/// The explicit shrinkage constant; zero when d = 1 and decreasing in n.
pub fn shrink_coefficient(
    d: usize,
    n: usize,
    sigma_star: f64,
    s_star: f64,
    lipschitz: f64,
    a: f64,
    b: f64,
) -> f64 {
    let d = d as f64;
    let n = n as f64;
    (d - 1.0) * sigma_star * sigma_star * lipschitz * (b - a).sqrt()
        / (n * (s_star + (d * sigma_star / n).sqrt()))
}

/// Apply the block contraction: the first d coefficients are scaled by
/// (1 - c / ||theta_d||); the rest pass through. A zero first block (possible
/// only for degenerate synthetic input) passes through unshrunk.
pub fn shrink(theta_hat: &[f64], d: usize, c: f64) -> Vec<f64> {
    debug_assert!(d >= 1 && d <= theta_hat.len());
    debug_assert!(c >= 0.0);
    let block_norm = theta_hat[..d]
        .iter()
        .map(|t| t * t)
        .sum::<f64>()
        .sqrt();
    if block_norm == 0.0 || c == 0.0 {
        return theta_hat.to_vec();
    }
    let factor = 1.0 - c / block_norm;
    theta_hat
        .iter()
        .enumerate()
        .map(|(j, &t)| if j < d { factor * t } else { t })
        .collect()
}

/// Fit with the shrunk coefficients; identical mechanics to the plain
/// weighted fit, kept as its own entry point so call sites show which
/// estimator they build.
pub fn improved_fit(
    lambda: &WeightVector,
    theta_star: &[f64],
    basis: &BasisMatrix,
    gamma: bool,
) -> Result<PiecewiseEstimate> {
    wls_fit(lambda, theta_star, basis, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::GridSpec;
    use crate::spectral::build_basis;

    #[test]
    fn sup_bound_hand_values() {
        assert!((class_sup_bound(2.0, 3.0, -1.0, 1.0) - 100.0).abs() < 1e-12);
        assert!((class_sup_bound(1.0, 1.0, 0.0, 0.5) - 6.25).abs() < 1e-12);
        // The bound dominates the truth for the unit-rate OU drift on [-1, 1].
        let true_sup = 1.0;
        assert!(class_sup_bound(4.0, 3.0, -1.0, 1.0) >= true_sup);
    }

    #[test]
    fn coefficient_hand_value() {
        let c = shrink_coefficient(10, 100, 2.0, 4.0, 1.0, 0.0, 1.0);
        assert!((c - 0.0809495).abs() < 1e-6, "c = {c}");
    }

    #[test]
    fn coefficient_vanishes_at_d_one() {
        assert_eq!(shrink_coefficient(1, 50, 2.0, 4.0, 1.5, 0.0, 1.0), 0.0);
        let cfg = ShrinkageConfig::new(1, 50, 1.5, 2.0, 4.0, 0.0, 1.0).unwrap();
        assert_eq!(cfg.c, 0.0);
    }

    #[test]
    fn coefficient_decreases_in_n() {
        let mut prev = f64::INFINITY;
        for n in [20, 40, 80, 160, 320] {
            let c = shrink_coefficient(10, n, 2.0, 4.0, 1.0, 0.0, 1.0);
            assert!(c < prev);
            prev = c;
        }
    }

    #[test]
    fn shrink_hand_case() {
        let out = shrink(&[3.0, 4.0, 7.0], 2, 1.0);
        assert!((out[0] - 2.4).abs() < 1e-12);
        assert!((out[1] - 3.2).abs() < 1e-12);
        assert_eq!(out[2], 7.0);
    }

    #[test]
    fn shrink_identity_cases() {
        let theta = vec![1.0, -2.0, 3.0];
        assert_eq!(shrink(&theta, 2, 0.0), theta);
        let zeros = vec![0.0; 3];
        assert_eq!(shrink(&zeros, 2, 0.7), zeros);
    }

    #[test]
    fn shrink_contracts_only_the_first_block() {
        let theta = vec![0.5, -1.5, 2.0, -0.25, 0.75];
        let d = 3;
        let block_norm = (0.25f64 + 2.25 + 4.0).sqrt();
        let c = 0.4 * block_norm; // c below the norm: genuine contraction
        let out = shrink(&theta, d, c);
        for j in 0..d {
            assert!(out[j].abs() <= theta[j].abs());
            assert_eq!(out[j].signum(), theta[j].signum());
        }
        for j in d..theta.len() {
            assert_eq!(out[j], theta[j]);
        }
    }

    #[test]
    fn improved_fit_reduces_to_plain_fit_when_c_zero() {
        let grid = GridSpec::new(0.0, 1.0, 6).unwrap();
        let basis = build_basis(&grid).unwrap();
        let theta = vec![0.3, -0.2, 0.0, 0.1, 0.05, -0.4];
        let lambda = WeightVector::ones(6);
        let shrunk = shrink(&theta, 3, 0.0);
        let a = improved_fit(&lambda, &shrunk, &basis, true).unwrap();
        let b = wls_fit(&lambda, &theta, &basis, true).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn improved_fit_zero_off_gamma() {
        let grid = GridSpec::new(0.0, 1.0, 4).unwrap();
        let basis = build_basis(&grid).unwrap();
        let fit = improved_fit(
            &WeightVector::ones(4),
            &[1.0, 1.0, 1.0, 1.0],
            &basis,
            false,
        )
        .unwrap();
        assert!(fit.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_shrink_on_full_block() {
        // d = n and coefficients on a sphere of radius 2c: factor is 1/2.
        let n = 4;
        let c = 0.3;
        let theta = vec![2.0 * c, 0.0, 0.0, 0.0];
        let out = shrink(&theta, n, c);
        assert!((out[0] - c).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(ShrinkageConfig::new(0, 10, 1.5, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(ShrinkageConfig::new(11, 10, 1.5, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(ShrinkageConfig::new(2, 10, 1.5, -1.0, 1.0, 0.0, 1.0).is_err());
    }
}
