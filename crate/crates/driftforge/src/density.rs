//! Numerical quadrature and the analytic invariant density of the diffusion.
//!
//! For an admissible drift the stationary law has density proportional to
//! exp{2 * integral of S from 0 to x}; the normalizer is computed by
//! composite quadrature over the effective support.

use serde::{Deserialize, Serialize};

use crate::drift::DriftSpec;
use crate::error::{Error, Result};

/// Composite quadrature rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadRule {
    Trapezoid,
    Midpoint,
}

/// Quadrature specification: `points` grid nodes on `[lower, upper]`.
///
/// The trapezoid rule evaluates at the nodes; the midpoint rule at the
/// midpoints of the `points - 1` panels between them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
    pub rule: QuadRule,
}

impl QuadratureSpec {
    pub fn new(lower: f64, upper: f64, points: usize, rule: QuadRule) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::invalid(format!(
                "quadrature interval is degenerate: [{lower}, {upper}]"
            )));
        }
        if points < 2 {
            return Err(Error::invalid(format!(
                "quadrature needs at least 2 points, got {points}"
            )));
        }
        Ok(QuadratureSpec {
            lower,
            upper,
            points,
            rule,
        })
    }

    /// Default support-wide quadrature for a drift: trapezoid, 20001 points on
    /// [-(radius+10), radius+10]. Class drifts decay at rate at least 1/L
    /// outside the radius, so the excluded tails are negligible.
    pub fn for_drift(drift: &DriftSpec) -> QuadratureSpec {
        let half = drift.radius + 10.0;
        QuadratureSpec {
            lower: -half,
            upper: half,
            points: 20_001,
            rule: QuadRule::Trapezoid,
        }
    }

    #[inline]
    pub fn panel_width(&self) -> f64 {
        (self.upper - self.lower) / (self.points as f64 - 1.0)
    }
}

/// Composite quadrature of `f` under the given spec.
pub fn integrate(f: impl Fn(f64) -> f64, quad: &QuadratureSpec) -> f64 {
    let w = quad.panel_width();
    match quad.rule {
        QuadRule::Trapezoid => {
            let mut sum = 0.5 * (f(quad.lower) + f(quad.upper));
            for i in 1..quad.points - 1 {
                sum += f(quad.lower + w * i as f64);
            }
            sum * w
        }
        QuadRule::Midpoint => {
            let mut sum = 0.0;
            for i in 0..quad.points - 1 {
                sum += f(quad.lower + w * (i as f64 + 0.5));
            }
            sum * w
        }
    }
}

/// Precomputed invariant density q(x) = exp{2 F(x)} / Z with F the
/// antiderivative of the drift anchored at 0 and Z the normalizer over the
/// quadrature support.
#[derive(Debug, Clone)]
pub struct InvariantDensity {
    quad: QuadratureSpec,
    nodes: Vec<f64>,
    /// Cumulative trapezoid antiderivative of the drift on the nodes.
    antiderivative: Vec<f64>,
    /// Antiderivative value at the anchor point 0.
    at_zero: f64,
    normalizer: f64,
    drift: DriftSpec,
}

impl InvariantDensity {
    pub fn new(drift: &DriftSpec, quad: &QuadratureSpec) -> Result<Self> {
        let w = quad.panel_width();
        let nodes: Vec<f64> = (0..quad.points)
            .map(|i| quad.lower + w * i as f64)
            .collect();
        let mut antiderivative = Vec::with_capacity(nodes.len());
        antiderivative.push(0.0);
        let mut acc = 0.0;
        let mut prev = drift.eval(nodes[0]);
        for &x in &nodes[1..] {
            let cur = drift.eval(x);
            acc += 0.5 * (prev + cur) * w;
            antiderivative.push(acc);
            prev = cur;
        }

        let mut me = InvariantDensity {
            quad: *quad,
            nodes,
            antiderivative,
            at_zero: 0.0,
            normalizer: 1.0,
            drift: drift.clone(),
        };
        me.at_zero = me.antiderivative_at(0.0);

        let z = integrate(|y| me.unnormalized(y), quad);
        if !z.is_finite() || z <= 0.0 {
            return Err(Error::UnnormalizableDensity(format!(
                "normalizer {} for drift {}",
                z, drift.label
            )));
        }
        me.normalizer = z;
        Ok(me)
    }

    /// Antiderivative of the drift at an arbitrary point: nearest-node value
    /// plus a single trapezoid panel, or a direct matched-spacing sum beyond
    /// the node range. Exact for affine drifts.
    fn antiderivative_at(&self, x: f64) -> f64 {
        let w = self.quad.panel_width();
        let lo = self.quad.lower;
        let hi = self.quad.upper;
        if x >= lo && x <= hi {
            let j = (((x - lo) / w).floor() as usize).min(self.nodes.len() - 2);
            let xj = self.nodes[j];
            self.antiderivative[j]
                + 0.5 * (self.drift.eval(xj) + self.drift.eval(x)) * (x - xj)
        } else {
            let (anchor, anchor_val) = if x < lo {
                (lo, 0.0)
            } else {
                (hi, *self.antiderivative.last().unwrap())
            };
            let span = x - anchor;
            let panels = (span.abs() / w).ceil().max(1.0) as usize;
            let step = span / panels as f64;
            let mut acc = anchor_val;
            let mut prev = self.drift.eval(anchor);
            for i in 1..=panels {
                let xi = anchor + step * i as f64;
                let cur = self.drift.eval(xi);
                acc += 0.5 * (prev + cur) * step;
                prev = cur;
            }
            acc
        }
    }

    #[inline]
    fn unnormalized(&self, x: f64) -> f64 {
        (2.0 * (self.antiderivative_at(x) - self.at_zero)).exp()
    }

    /// Density value at `x`; strictly positive on the effective support.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.unnormalized(x) / self.normalizer
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.quad
    }
}

/// One-shot evaluation of the invariant density at `x`.
pub fn invariant_density(drift: &DriftSpec, x: f64, quad: &QuadratureSpec) -> Result<f64> {
    Ok(InvariantDensity::new(drift, quad)?.eval(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{drift_by_label, DriftSpec};

    const SQRT_PI: f64 = 1.7724538509055159;

    fn ou() -> DriftSpec {
        drift_by_label("ou").unwrap()
    }

    #[test]
    fn ou_density_matches_closed_form_at_origin() {
        let quad = QuadratureSpec::for_drift(&ou());
        let q0 = invariant_density(&ou(), 0.0, &quad).unwrap();
        assert!((q0 - 1.0 / SQRT_PI).abs() < 1e-9, "q(0) = {q0}");
    }

    #[test]
    fn ou_density_matches_closed_form_on_probes() {
        let quad = QuadratureSpec::for_drift(&ou());
        let density = InvariantDensity::new(&ou(), &quad).unwrap();
        for i in 0..=100 {
            let x = -3.0 + 6.0 * i as f64 / 100.0;
            let expected = (-x * x).exp() / SQRT_PI;
            assert!(
                (density.eval(x) - expected).abs() < 1e-9,
                "x={x}: {} vs {expected}",
                density.eval(x)
            );
        }
    }

    #[test]
    fn odd_drift_gives_symmetric_density() {
        let drift = drift_by_label("cubic").unwrap();
        let quad = QuadratureSpec::for_drift(&drift);
        let density = InvariantDensity::new(&drift, &quad).unwrap();
        for i in 1..=20 {
            let x = 0.2 * i as f64;
            let diff = (density.eval(x) - density.eval(-x)).abs();
            assert!(diff < 1e-10, "asymmetry {diff} at x={x}");
        }
    }

    #[test]
    fn density_integrates_to_one_for_all_library_drifts() {
        for drift in crate::drift::drift_library() {
            let quad = QuadratureSpec::for_drift(&drift);
            let density = InvariantDensity::new(&drift, &quad).unwrap();
            let total = integrate(|x| density.eval(x), &quad);
            assert!(
                (total - 1.0).abs() < 1e-6,
                "{}: integral {total}",
                drift.label
            );
        }
    }

    #[test]
    fn density_positive_everywhere_on_support() {
        let quad = QuadratureSpec::for_drift(&ou());
        let density = InvariantDensity::new(&ou(), &quad).unwrap();
        for i in 0..200 {
            let x = -10.0 + 0.1 * i as f64;
            assert!(density.eval(x) > 0.0);
        }
    }

    #[test]
    fn non_class_drift_overflows_to_domain_error() {
        let drift = DriftSpec::new("explosive", 2.0, 20.0, |x| x).unwrap();
        let quad = QuadratureSpec::new(-30.0, 30.0, 2001, QuadRule::Trapezoid).unwrap();
        assert!(matches!(
            InvariantDensity::new(&drift, &quad),
            Err(Error::UnnormalizableDensity(_))
        ));
    }

    #[test]
    fn midpoint_rule_agrees_with_trapezoid() {
        let trap = QuadratureSpec::new(-13.0, 13.0, 20_001, QuadRule::Trapezoid).unwrap();
        let mid = QuadratureSpec::new(-13.0, 13.0, 20_001, QuadRule::Midpoint).unwrap();
        let a = invariant_density(&ou(), 0.7, &trap).unwrap();
        let b = invariant_density(&ou(), 0.7, &mid).unwrap();
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn quadrature_spec_validation() {
        assert!(QuadratureSpec::new(1.0, 1.0, 10, QuadRule::Trapezoid).is_err());
        assert!(QuadratureSpec::new(0.0, 1.0, 1, QuadRule::Trapezoid).is_err());
    }

    #[test]
    fn integrate_handles_polynomials() {
        let quad = QuadratureSpec::new(0.0, 1.0, 101, QuadRule::Trapezoid).unwrap();
        // Trapezoid is exact on affine integrands.
        assert!((integrate(|x| 2.0 * x + 1.0, &quad) - 2.0).abs() < 1e-12);
        let quad2 = QuadratureSpec::new(0.0, 1.0, 10_001, QuadRule::Midpoint).unwrap();
        assert!((integrate(|x| x * x, &quad2) - 1.0 / 3.0).abs() < 1e-8);
    }
}
