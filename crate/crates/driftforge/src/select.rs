//! Data-driven choice of the weight vector.
//!
//! The candidate family is a Pinsker-type grid of polynomially decaying
//! profiles indexed by a smoothness exponent and a scale. The selection rule
//! minimizes a penalized cost built from the shrunk coefficients, an
//! estimated cross term, and a variance-proportional penalty.

use std::io::Write;

use crate::error::{Error, Result};
use crate::shrink::{improved_fit, shrink, ShrinkageConfig};
use crate::spectral::{BasisMatrix, PiecewiseEstimate, SpectralData, WeightVector};

/// Penalty multiplier rho, restricted to the regime (0, 1/6) where the
/// oracle inequality holds. `exploratory` admits any value in (0, 1) and is
/// flagged through to reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rho {
    value: f64,
    flagged: bool,
}

impl Rho {
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0 && value < 1.0 / 6.0) {
            return Err(Error::invalid(format!(
                "rho must lie in (0, 1/6), got {value}; use an exploratory override to bypass"
            )));
        }
        Ok(Rho {
            value,
            flagged: false,
        })
    }

    /// Out-of-regime value admitted for exploratory runs; carries a flag.
    pub fn exploratory(value: f64) -> Result<Self> {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::invalid(format!(
                "exploratory rho must lie in (0, 1), got {value}"
            )));
        }
        Ok(Rho {
            value,
            flagged: !(value < 1.0 / 6.0),
        })
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    /// True when the value sits outside the theorem regime.
    #[inline]
    pub fn flagged(&self) -> bool {
        self.flagged
    }

    /// The oracle constant (1 + 6 rho) / (1 - 6 rho).
    pub fn oracle_factor(&self) -> f64 {
        (1.0 + 6.0 * self.value) / (1.0 - 6.0 * self.value)
    }
}

/// Finite family of weight vectors with their (beta, scale) indices.
#[derive(Debug, Clone)]
pub struct WeightFamily {
    pub members: Vec<WeightVector>,
    /// (beta, t) index of each retained member.
    pub index: Vec<(u32, u32)>,
    pub d: usize,
    pub n: usize,
}

/// Enumerate the Pinsker-type family
/// lambda_{(beta,t)}(j) = 1 for j <= d, max(0, 1 - (j/omega)^beta) beyond,
/// with omega = d + t * n^{1/(2 beta + 1)}. Duplicate vectors are dropped,
/// keeping the lowest enumeration index.
pub fn weight_family(n: usize, d: usize, beta_max: u32, t_max: u32) -> Result<WeightFamily> {
    if d == 0 || d > n {
        return Err(Error::invalid(format!(
            "family block size d = {d} must satisfy 1 <= d <= n = {n}"
        )));
    }
    if beta_max < 1 || t_max < 1 {
        return Err(Error::invalid(
            "family ranges beta_max and t_max must be at least 1".to_string(),
        ));
    }
    let mut members: Vec<WeightVector> = Vec::new();
    let mut index = Vec::new();
    for beta in 1..=beta_max {
        for t in 1..=t_max {
            let omega = d as f64 + t as f64 * (n as f64).powf(1.0 / (2.0 * beta as f64 + 1.0));
            let weights: Vec<f64> = (1..=n)
                .map(|j| {
                    if j <= d {
                        1.0
                    } else {
                        (1.0 - (j as f64 / omega).powi(beta as i32)).max(0.0)
                    }
                })
                .collect();
            let candidate = WeightVector::new(weights, d)?;
            if !members.iter().any(|m| m == &candidate) {
                members.push(candidate);
                index.push((beta, t));
            }
        }
    }
    Ok(WeightFamily {
        members,
        index,
        d,
        n,
    })
}

/// Estimated cross term: theta_tilde_j = theta_hat_j * theta_star_j -
/// ((b-a)/n) s_j.
pub fn theta_tilde(
    theta_hat: &[f64],
    theta_star: &[f64],
    s: &[f64],
    n: usize,
    a: f64,
    b: f64,
) -> Result<Vec<f64>> {
    if theta_hat.len() != theta_star.len() || theta_hat.len() != s.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} / {} / {}",
            theta_hat.len(),
            theta_star.len(),
            s.len()
        )));
    }
    let w = (b - a) / n as f64;
    Ok(theta_hat
        .iter()
        .zip(theta_star)
        .zip(s)
        .map(|((&th, &ts), &sj)| th * ts - w * sj)
        .collect())
}

/// Variance-proportional penalty P(lambda) = ((b-a)/n) sum lambda^2(j) s_j.
pub fn penalty(lambda: &WeightVector, s: &[f64], n: usize, a: f64, b: f64) -> f64 {
    debug_assert_eq!(lambda.len(), s.len());
    let w = (b - a) / n as f64;
    lambda
        .as_slice()
        .iter()
        .zip(s)
        .map(|(&l, &sj)| l * l * sj)
        .sum::<f64>()
        * w
}

/// Penalized cost J(lambda) = sum lambda^2 theta_star^2
/// - 2 sum lambda theta_tilde + rho P(lambda).
pub fn cost(
    lambda: &WeightVector,
    theta_star: &[f64],
    theta_tilde: &[f64],
    s: &[f64],
    rho: Rho,
    n: usize,
    a: f64,
    b: f64,
) -> f64 {
    let quad: f64 = lambda
        .as_slice()
        .iter()
        .zip(theta_star)
        .map(|(&l, &t)| l * l * t * t)
        .sum();
    let cross: f64 = lambda
        .as_slice()
        .iter()
        .zip(theta_tilde)
        .map(|(&l, &t)| l * t)
        .sum();
    quad - 2.0 * cross + rho.value() * penalty(lambda, s, n, a, b)
}

/// Outcome of the exhaustive cost minimization.
#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub lambda_hat: WeightVector,
    /// (beta, t) of the winner.
    pub alpha_hat: (u32, u32),
    /// Position of the winner in the family enumeration.
    pub selected: usize,
    /// Cost of every member, in enumeration order.
    pub cost_values: Vec<f64>,
    pub rho: Rho,
}

impl SelectionResult {
    /// CSV audit: one row per member with its index, cost, and selected flag.
    pub fn write_csv<W: Write>(&self, family: &WeightFamily, mut w: W) -> std::io::Result<()> {
        writeln!(w, "beta,t,cost,selected")?;
        for (i, ((beta, t), cost)) in family.index.iter().zip(&self.cost_values).enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                beta,
                t,
                crate::csvio::fmt_float(*cost),
                u8::from(i == self.selected)
            )?;
        }
        Ok(())
    }
}

/// Exhaustively evaluate the cost over the family; ties resolve to the
/// lowest enumeration index.
pub fn select(
    family: &WeightFamily,
    spectral: &SpectralData,
    theta_star: &[f64],
    rho: Rho,
) -> Result<SelectionResult> {
    if family.members.is_empty() {
        return Err(Error::invalid("weight family is empty".to_string()));
    }
    let n = family.n;
    let tilde = theta_tilde(
        &spectral.theta_hat,
        theta_star,
        &spectral.s,
        n,
        spectral.a,
        spectral.b,
    )?;
    let cost_values: Vec<f64> = family
        .members
        .iter()
        .map(|lambda| {
            cost(
                lambda,
                theta_star,
                &tilde,
                &spectral.s,
                rho,
                n,
                spectral.a,
                spectral.b,
            )
        })
        .collect();
    let mut best = 0;
    for (i, &c) in cost_values.iter().enumerate() {
        if c < cost_values[best] {
            best = i;
        }
    }
    Ok(SelectionResult {
        lambda_hat: family.members[best].clone(),
        alpha_hat: family.index[best],
        selected: best,
        cost_values,
        rho,
    })
}

/// Full adaptive pipeline on one set of observations: Fourier transform,
/// shrink, select, fit.
pub fn adaptive_estimate(
    obs: &crate::sequential::SequentialObservations,
    basis: &BasisMatrix,
    cfg: &ShrinkageConfig,
    family: &WeightFamily,
    rho: Rho,
) -> Result<(PiecewiseEstimate, SelectionResult)> {
    let spectral = SpectralData::from_observations(obs, basis)?;
    let theta_star = shrink(&spectral.theta_hat, cfg.d, cfg.c);
    let selection = select(family, &spectral, &theta_star, rho)?;
    let fit = improved_fit(&selection.lambda_hat, &theta_star, basis, spectral.gamma)?;
    Ok((fit, selection))
}
