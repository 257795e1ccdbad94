//! Observation design: the spatial grid, the sample-size map n(T), and the
//! (t0, eps) parameter schedule with its admissibility conditions.

use crate::error::{Error, Result};

/// Minimal horizon for the estimation regime.
pub const MIN_HORIZON: f64 = 32.0;

/// Uniform grid x_k = a + (k/n)(b-a), k = 1..n, with kernel half-width
/// h = (b-a)/(2n). The windows [x_k - h, x_k + h] tile (a, b] and are
/// disjoint up to shared endpoints.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    /// Grid points, 0-based storage: points[k-1] = x_k.
    pub points: Vec<f64>,
    /// Kernel half-width.
    pub h: f64,
}

impl GridSpec {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a < b) {
            return Err(Error::invalid(format!("grid needs a < b, got [{a}, {b}]")));
        }
        if n < 2 {
            return Err(Error::invalid(format!("grid needs n >= 2, got {n}")));
        }
        let span = b - a;
        let points = (1..=n).map(|k| a + span * k as f64 / n as f64).collect();
        Ok(GridSpec {
            a,
            b,
            n,
            points,
            h: span / (2.0 * n as f64),
        })
    }

    /// x_k for 1-based k.
    #[inline]
    pub fn x(&self, k: usize) -> f64 {
        self.points[k - 1]
    }

    /// 0-based index of the window containing `y`, if any. A value exactly on
    /// a shared window edge is reported under the lower index; callers that
    /// need both memberships check the neighbor explicitly.
    #[inline]
    pub fn window_index(&self, y: f64) -> Option<usize> {
        let u = (y - self.a) / (self.b - self.a) * self.n as f64;
        let k = u.round();
        if (1.0..=self.n as f64).contains(&k) && (y - self.points[k as usize - 1]).abs() <= self.h
        {
            Some(k as usize - 1)
        } else {
            None
        }
    }
}

/// Free-function form of the grid constructor.
pub fn build_grid(a: f64, b: f64, n: usize) -> Result<GridSpec> {
    GridSpec::new(a, b, n)
}

/// Horizon-indexed estimation parameters: pre-estimation span t0, truncation
/// level eps, and grid size n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    /// Horizon T >= 32.
    pub horizon: f64,
    /// Span [0, t0) reserved for the density pre-estimate.
    pub warmup: f64,
    /// Density truncation level in (0, 1].
    pub trunc_level: f64,
    /// Grid size, n <= T.
    pub n: usize,
}

/// Default sample-size map n(T) = floor(T); satisfies n <= T and n/T -> 1.
pub fn choose_n(horizon: f64) -> Result<usize> {
    if !(horizon >= MIN_HORIZON) {
        return Err(Error::invalid(format!(
            "horizon must be at least {MIN_HORIZON}, got {horizon}"
        )));
    }
    Ok(horizon.floor() as usize)
}

/// The example schedule family: t0 = max(min(ln^4 T, T/2), 16) and
/// eps = sqrt(2) * t0^(-1/8), clamped to 1 against floating-point drift.
pub fn schedule_params(horizon: f64) -> Result<Schedule> {
    if !(horizon >= MIN_HORIZON) {
        return Err(Error::invalid(format!(
            "horizon must be at least {MIN_HORIZON}, got {horizon}"
        )));
    }
    let warmup = horizon.ln().powi(4).min(horizon / 2.0).max(16.0);
    let trunc_level = (std::f64::consts::SQRT_2 * warmup.powf(-0.125)).min(1.0);
    let schedule = Schedule {
        horizon,
        warmup,
        trunc_level,
        n: choose_n(horizon)?,
    };
    let report = validate_h1(&schedule);
    if !report.pass() {
        return Err(Error::Internal(format!(
            "example schedule violated its own admissibility conditions: {report:?}"
        )));
    }
    Ok(schedule)
}

/// Per-inequality admissibility report for a schedule.
#[derive(Debug, Clone, Copy)]
pub struct H1Report {
    /// 16 <= t0.
    pub warmup_lower: bool,
    /// t0 <= T/2.
    pub warmup_upper: bool,
    /// sqrt(2) * t0^(-1/8) <= eps.
    pub trunc_lower: bool,
    /// eps <= 1.
    pub trunc_upper: bool,
    /// n <= T (grid-size condition; reported alongside for convenience).
    pub n_bound: bool,
}

impl H1Report {
    /// Conjunction of the admissibility inequalities.
    pub fn pass(&self) -> bool {
        self.warmup_lower && self.warmup_upper && self.trunc_lower && self.trunc_upper
    }
}

/// Check each admissibility inequality separately.
///
/// Comparisons carry a 1e-12 relative slack so that schedules sitting exactly
/// on a bound (eps = 1 at T = 32) are not rejected for rounding.
pub fn validate_h1(s: &Schedule) -> H1Report {
    let slack = 1e-12;
    let eps_floor = std::f64::consts::SQRT_2 * s.warmup.powf(-0.125);
    H1Report {
        warmup_lower: s.warmup >= 16.0 * (1.0 - slack),
        warmup_upper: s.warmup <= s.horizon / 2.0 * (1.0 + slack),
        trunc_lower: s.trunc_level >= eps_floor * (1.0 - slack),
        trunc_upper: s.trunc_level <= 1.0 + slack,
        n_bound: s.n as f64 <= s.horizon * (1.0 + slack),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_matches_hand_computation() {
        let g = GridSpec::new(0.0, 1.0, 4).unwrap();
        assert_eq!(g.points, vec![0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.h, 0.125);

        let g = GridSpec::new(-1.0, 1.0, 2).unwrap();
        assert_eq!(g.points, vec![0.0, 1.0]);
        assert_eq!(g.h, 0.5);
    }

    #[test]
    fn degenerate_grid_rejected() {
        assert!(GridSpec::new(1.0, 1.0, 4).is_err());
        assert!(GridSpec::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn windows_tile_without_gaps() {
        let g = GridSpec::new(-0.3, 0.3, 7).unwrap();
        for k in 1..g.n {
            let right = g.x(k) + g.h;
            let left = g.x(k + 1) - g.h;
            assert!((right - left).abs() < 1e-15);
        }
    }

    #[test]
    fn window_index_locates_points() {
        let g = GridSpec::new(0.0, 1.0, 4).unwrap();
        assert_eq!(g.window_index(0.26), Some(0));
        assert_eq!(g.window_index(0.52), Some(1));
        assert_eq!(g.window_index(0.99), Some(3));
        assert_eq!(g.window_index(0.05), None);
        assert_eq!(g.window_index(1.2), None);
    }

    #[test]
    fn choose_n_is_floor() {
        assert_eq!(choose_n(100.0).unwrap(), 100);
        assert_eq!(choose_n(32.7).unwrap(), 32);
        assert!(choose_n(10.0).is_err());
    }

    #[test]
    fn choose_n_ratio_approaches_one() {
        for t in [100.0, 1_000.0, 10_000.0] {
            let n = choose_n(t).unwrap();
            assert!(n as f64 / t >= 0.99, "n/T = {} at T = {t}", n as f64 / t);
        }
    }

    #[test]
    fn schedule_at_regime_boundary() {
        let s = schedule_params(32.0).unwrap();
        assert_eq!(s.warmup, 16.0);
        assert!((s.trunc_level - 1.0).abs() < 1e-12);
        assert_eq!(s.n, 32);
    }

    #[test]
    fn schedule_at_t_1000() {
        let s = schedule_params(1000.0).unwrap();
        assert_eq!(s.warmup, 500.0);
        // sqrt(2) * 500^(-1/8)
        assert!((s.trunc_level - 0.6503449126).abs() < 1e-9);
    }

    #[test]
    fn schedule_below_regime_rejected() {
        assert!(schedule_params(31.0).is_err());
    }

    #[test]
    fn h1_detects_violations() {
        let ok = Schedule {
            horizon: 32.0,
            warmup: 16.0,
            trunc_level: 1.0,
            n: 32,
        };
        assert!(validate_h1(&ok).pass());

        let late_warmup = Schedule {
            horizon: 100.0,
            warmup: 60.0,
            trunc_level: 1.0,
            n: 100,
        };
        let r = validate_h1(&late_warmup);
        assert!(!r.warmup_upper && !r.pass());

        // eps floor at t0 = 16 is exactly 1, so 0.5 is inadmissible.
        let small_eps = Schedule {
            horizon: 100.0,
            warmup: 16.0,
            trunc_level: 0.5,
            n: 100,
        };
        let r = validate_h1(&small_eps);
        assert!(!r.trunc_lower && !r.pass());
    }

    #[test]
    fn example_family_is_admissible_over_the_whole_range() {
        let mut t = 32.0;
        while t <= 1e6 {
            let s = schedule_params(t).unwrap();
            assert!(validate_h1(&s).pass(), "H1 failed at T = {t}");
            t *= 1.37;
        }
    }
}
