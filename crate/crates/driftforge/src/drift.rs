//! Drift specifications and the functional class they must belong to.
//!
//! A drift is admissible when it is globally Lipschitz, bounded at the
//! mean-reversion radius, and has derivative inside a strictly negative band
//! outside that radius. Those three conditions guarantee ergodicity of the
//! diffusion and existence of an invariant density.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// The unknown drift together with its certified class constants.
///
/// `lipschitz` is the global Lipschitz constant (must exceed 1) and
/// `radius` the mean-reversion radius: outside `[-radius, radius]` the
/// drift slope must stay in `[-lipschitz, -1/lipschitz]`.
#[derive(Clone)]
pub struct DriftSpec {
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Class constant L > 1.
    pub lipschitz: f64,
    /// Mean-reversion radius N; must exceed |a| + |b| for the interval in use.
    pub radius: f64,
    /// Human-readable label used in configs and CSV headers.
    pub label: String,
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftSpec")
            .field("label", &self.label)
            .field("lipschitz", &self.lipschitz)
            .field("radius", &self.radius)
            .finish()
    }
}

impl DriftSpec {
    pub fn new(
        label: impl Into<String>,
        lipschitz: f64,
        radius: f64,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(lipschitz > 1.0) {
            return Err(Error::invalid(format!(
                "Lipschitz constant must exceed 1, got {lipschitz}"
            )));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!(
                "mean-reversion radius must be positive and finite, got {radius}"
            )));
        }
        Ok(DriftSpec {
            eval: Arc::new(eval),
            lipschitz,
            radius,
            label: label.into(),
        })
    }

    /// Evaluate the drift at `x`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    /// The radius condition relative to an estimation interval `[a, b]`.
    pub fn covers_interval(&self, a: f64, b: f64) -> bool {
        self.radius > a.abs() + b.abs()
    }
}

/// Built-in drift library. Each entry carries certified class constants.
pub fn drift_library() -> Vec<DriftSpec> {
    vec![
        // Unit-rate Ornstein-Uhlenbeck: slope -1 everywhere, |S(3)| = 3 <= 4.
        DriftSpec::new("ou", 4.0, 3.0, |x| -x).unwrap(),
        // Rate-4 Ornstein-Uhlenbeck: sharper mean reversion, invariant density
        // peak sqrt(4/pi) ~ 1.13. |S(1)| = 4 <= 4.5, slope -4 in [-4.5, -2/9].
        DriftSpec::new("ou4", 4.5, 1.0, |x| -4.0 * x).unwrap(),
        // Smooth saturating drift: slope ranges in [-1.225, -0.1], |S(1)| = 0.6.
        DriftSpec::new("cubic", 1.5, 1.0, |x| -x.powi(3) / (1.0 + x * x) - 0.1 * x).unwrap(),
        // Piecewise-linear member: slope -1 inside [-1, 1], -1/2 outside.
        DriftSpec::new("piecewise", 2.0, 2.0, |x| {
            if x.abs() <= 1.0 {
                -x
            } else {
                -x.signum() * (1.0 + 0.5 * (x.abs() - 1.0))
            }
        })
        .unwrap(),
    ]
}

/// Look a drift up by its config label.
pub fn drift_by_label(label: &str) -> Option<DriftSpec> {
    drift_library().into_iter().find(|d| d.label == label)
}

/// Outcome of probing one class condition on a finite grid.
#[derive(Debug, Clone, Copy)]
pub struct ConditionCheck {
    /// Measured extremal value of the probed quantity.
    pub measured: f64,
    pub ok: bool,
}

/// Finite-sample diagnostics for membership in the drift class.
#[derive(Debug, Clone)]
pub struct MembershipReport {
    /// Max adjacent difference quotient |S(x)-S(y)|/|x-y| vs the Lipschitz constant.
    pub lipschitz: ConditionCheck,
    /// |S(radius)| vs the Lipschitz constant.
    pub value_at_radius: ConditionCheck,
    /// Min finite-difference slope outside the radius vs -L.
    pub slope_lower: ConditionCheck,
    /// Max finite-difference slope outside the radius vs -1/L.
    pub slope_upper: ConditionCheck,
    /// Radius strictly dominates |a| + |b|.
    pub radius_covers_interval: ConditionCheck,
    pub pass: bool,
}

/// Probe the class conditions on finite grids.
///
/// The Lipschitz quotient is checked on adjacent probe pairs, which bounds
/// the quotient over arbitrary pairs by the triangle inequality. The slope
/// band is probed by central differences on `[-(radius+10), -radius]` and
/// `[radius, radius+10]`.
pub fn check_class_membership(
    drift: &DriftSpec,
    a: f64,
    b: f64,
    probes: usize,
) -> Result<MembershipReport> {
    if probes < 100 {
        return Err(Error::invalid(format!(
            "membership check needs at least 100 probes, got {probes}"
        )));
    }
    let l = drift.lipschitz;
    let n = drift.radius;
    let lo = -(n + 10.0);
    let hi = n + 10.0;

    // Adjacent-pair Lipschitz quotient over the probe range.
    let step = (hi - lo) / (probes as f64 - 1.0);
    let mut max_quotient: f64 = 0.0;
    let mut prev = drift.eval(lo);
    for i in 1..probes {
        let x = lo + step * i as f64;
        let cur = drift.eval(x);
        max_quotient = max_quotient.max(((cur - prev) / step).abs());
        prev = cur;
    }
    // Allow a whisker of floating-point slack on an otherwise sharp bound.
    let lipschitz = ConditionCheck {
        measured: max_quotient,
        ok: max_quotient <= l * (1.0 + 1e-9),
    };

    let v = drift.eval(n).abs();
    let value_at_radius = ConditionCheck {
        measured: v,
        ok: v <= l * (1.0 + 1e-9),
    };

    // Central-difference slopes outside the radius, both tails.
    let side = probes / 2;
    let fd = step.min(1e-4);
    let mut slope_min = f64::INFINITY;
    let mut slope_max = f64::NEG_INFINITY;
    for tail in [-1.0f64, 1.0] {
        for i in 0..side {
            let x = tail * (n + 10.0 * (i as f64 + 0.5) / side as f64);
            let s = (drift.eval(x + fd) - drift.eval(x - fd)) / (2.0 * fd);
            slope_min = slope_min.min(s);
            slope_max = slope_max.max(s);
        }
    }
    let slope_lower = ConditionCheck {
        measured: slope_min,
        ok: slope_min >= -l * (1.0 + 1e-9),
    };
    let slope_upper = ConditionCheck {
        measured: slope_max,
        ok: slope_max <= -1.0 / l * (1.0 - 1e-9),
    };

    let radius_covers_interval = ConditionCheck {
        measured: a.abs() + b.abs(),
        ok: drift.covers_interval(a, b),
    };

    let pass = lipschitz.ok
        && value_at_radius.ok
        && slope_lower.ok
        && slope_upper.ok
        && radius_covers_interval.ok;

    Ok(MembershipReport {
        lipschitz,
        value_at_radius,
        slope_lower,
        slope_upper,
        radius_covers_interval,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_members_pass_their_certified_constants() {
        for drift in drift_library() {
            let report = check_class_membership(&drift, -0.3, 0.3, 10_000).unwrap();
            assert!(report.pass, "{} failed: {report:?}", drift.label);
        }
    }

    #[test]
    fn ou_with_large_enough_lipschitz_passes() {
        let drift = DriftSpec::new("ou", 4.0, 3.0, |x| -x).unwrap();
        let report = check_class_membership(&drift, -1.0, 1.0, 10_000).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn ou_fails_when_radius_value_exceeds_lipschitz() {
        // |S(3)| = 3 > 2 violates the bound at the radius even though the
        // slope band holds everywhere.
        let drift = DriftSpec::new("ou", 2.0, 3.0, |x| -x).unwrap();
        let report = check_class_membership(&drift, -1.0, 1.0, 10_000).unwrap();
        assert!(!report.value_at_radius.ok);
        assert!(report.slope_lower.ok && report.slope_upper.ok);
        assert!(!report.pass);
    }

    #[test]
    fn positive_slope_fails_the_band() {
        let drift = DriftSpec::new("expanding", 2.0, 1.0, |x| x).unwrap();
        let report = check_class_membership(&drift, -0.2, 0.2, 1_000).unwrap();
        assert!(!report.slope_upper.ok);
        assert!(!report.pass);
    }

    #[test]
    fn lipschitz_violation_is_detected() {
        let drift = DriftSpec::new("steep", 1.5, 1.0, |x| -2.0 * x).unwrap();
        let report = check_class_membership(&drift, -0.2, 0.2, 1_000).unwrap();
        assert!(!report.lipschitz.ok);
        assert!(!report.pass);
    }

    #[test]
    fn probe_count_precondition() {
        let drift = DriftSpec::new("ou", 4.0, 3.0, |x| -x).unwrap();
        assert!(check_class_membership(&drift, -1.0, 1.0, 99).is_err());
    }
}
