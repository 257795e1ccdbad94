//! Sequential kernel reduction of a path to discrete regression data.
//!
//! The path is split at t0: the first segment feeds an occupation-time
//! density estimate, the second drives per-window stopped kernel integrals.
//! Stopping each window's integration when its accumulated kernel mass
//! reaches a threshold H_k equalizes the stochastic-term variance: the
//! stopped noise integral has quadratic variation exactly H_k, so the
//! standardized residuals are standard Gaussian.
//!
//! All continuous-time integrals are left-endpoint Riemann sums on the
//! simulation mesh; the final increment at the crossing is fractionally
//! clipped so the accumulated mass equals H_k exactly.

use std::io::Write;

use crate::design::{GridSpec, Schedule};
use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::simulate::DiffusionPath;

/// Raw and truncated density estimates on the grid.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    /// Occupation-time kernel estimate per grid point, >= 0.
    pub raw: Vec<f64>,
    /// Elementwise max(raw, trunc_level).
    pub truncated: Vec<f64>,
    pub trunc_level: f64,
}

/// First mesh index whose time is >= t, robust to mesh-boundary rounding.
#[inline]
fn mesh_split(t: f64, dt: f64) -> usize {
    (t / dt - 1e-9).ceil().max(0.0) as usize
}

/// Visit every window containing `y` (two windows share each edge point).
#[inline]
fn for_each_window(grid: &GridSpec, y: f64, mut visit: impl FnMut(usize)) {
    if let Some(k) = grid.window_index(y) {
        visit(k);
        let d = y - grid.points[k];
        if d == grid.h && k + 1 < grid.n {
            visit(k + 1);
        } else if d == -grid.h && k > 0 {
            visit(k - 1);
        }
    }
}

/// Occupation-time density estimate over the pre-estimation span [0, t0).
///
/// q_hat(x_k) = (1 / (2 t0 h)) * sum over mesh steps of 1{|y - x_k| <= h} dt.
pub fn estimate_density(path: &DiffusionPath, warmup: f64, grid: &GridSpec) -> Result<Vec<f64>> {
    if warmup > path.horizon {
        return Err(Error::invalid(format!(
            "pre-estimation span {warmup} exceeds the path horizon {}",
            path.horizon
        )));
    }
    if path.dt > warmup / 100.0 {
        return Err(Error::invalid(format!(
            "path mesh {} too coarse for pre-estimation span {warmup}",
            path.dt
        )));
    }
    let split = mesh_split(warmup, path.dt).min(path.steps());
    let mut occupation = vec![0.0f64; grid.n];
    for &y in &path.values[..split] {
        for_each_window(grid, y, |k| occupation[k] += path.dt);
    }
    let scale = 1.0 / (2.0 * warmup * grid.h);
    Ok(occupation.into_iter().map(|o| o * scale).collect())
}

/// Elementwise truncation from below at the level eps.
pub fn truncate_density(raw: &[f64], trunc_level: f64) -> Vec<f64> {
    raw.iter().map(|&q| q.max(trunc_level)).collect()
}

/// Build the full density estimate for a path segment.
pub fn density_estimate(
    path: &DiffusionPath,
    warmup: f64,
    grid: &GridSpec,
    trunc_level: f64,
) -> Result<DensityEstimate> {
    if !(trunc_level > 0.0 && trunc_level <= 1.0) {
        return Err(Error::invalid(format!(
            "truncation level must lie in (0, 1], got {trunc_level}"
        )));
    }
    let raw = estimate_density(path, warmup, grid)?;
    let truncated = truncate_density(&raw, trunc_level);
    Ok(DensityEstimate {
        raw,
        truncated,
        trunc_level,
    })
}

/// Kernel-mass thresholds H_k = (T - t0)(2 q_tilde(x_k) - eps^2) h.
///
/// Positivity is automatic: q_tilde >= eps gives 2 q_tilde - eps^2 >=
/// eps (2 - eps) > 0 for eps in (0, 1].
pub fn thresholds(q_tilde: &[f64], horizon: f64, warmup: f64, h: f64, trunc_level: f64) -> Vec<f64> {
    debug_assert!(warmup < horizon);
    let span = horizon - warmup;
    q_tilde
        .iter()
        .map(|&q| span * (2.0 * q - trunc_level * trunc_level) * h)
        .collect()
}

/// Outcome of the stopped kernel integration for every grid window.
#[derive(Debug, Clone)]
pub struct StoppingResult {
    /// Interpolated crossing times; T + dt sentinel where the threshold was
    /// never reached.
    pub tau: Vec<f64>,
    /// Stopped kernel estimates S_tilde_k (0 where not attained).
    pub s_tilde: Vec<f64>,
    /// Whether each window accumulated its full threshold by time T.
    pub attained: Vec<bool>,
    /// Approximation errors B_k, populated when the true drift was supplied.
    pub approx_error: Option<Vec<f64>>,
}

impl StoppingResult {
    pub fn all_attained(&self) -> bool {
        self.attained.iter().all(|&a| a)
    }
}

/// Run the per-window stopped kernel integration over [t0, T].
///
/// For each window the kernel mass accumulates dt per mesh step whose left
/// endpoint lies inside; the crossing step is clipped by w = (H - mass)/dt so
/// the final mass equals H exactly, and the same weight applies to the path
/// increment (and, when the truth is known, to the drift-difference term).
pub fn sequential_estimate(
    path: &DiffusionPath,
    grid: &GridSpec,
    warmup: f64,
    thresholds: &[f64],
    truth: Option<&DriftSpec>,
) -> Result<StoppingResult> {
    if thresholds.len() != grid.n {
        return Err(Error::invalid(format!(
            "threshold count {} does not match grid size {}",
            thresholds.len(),
            grid.n
        )));
    }
    if thresholds.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::invalid("thresholds must be positive".to_string()));
    }
    let n = grid.n;
    let dt = path.dt;
    let split = mesh_split(warmup, dt);
    let steps = path.steps();

    let mut mass = vec![0.0f64; n];
    let mut sum_dy = vec![0.0f64; n];
    let mut sum_b = vec![0.0f64; n];
    let mut tau = vec![path.horizon + dt; n];
    let mut done = vec![false; n];
    let mut remaining = n;

    for i in split..steps {
        if remaining == 0 {
            break;
        }
        let y = path.values[i];
        let dy = path.values[i + 1] - y;
        for_each_window(grid, y, |k| {
            if done[k] {
                return;
            }
            let room = thresholds[k] - mass[k];
            if dt >= room {
                let w = room / dt;
                sum_dy[k] += w * dy;
                if let Some(s) = truth {
                    sum_b[k] += w * (s.eval(y) - s.eval(grid.points[k])) * dt;
                }
                mass[k] = thresholds[k];
                tau[k] = i as f64 * dt + w * dt;
                done[k] = true;
                remaining -= 1;
            } else {
                mass[k] += dt;
                sum_dy[k] += dy;
                if let Some(s) = truth {
                    sum_b[k] += (s.eval(y) - s.eval(grid.points[k])) * dt;
                }
            }
        });
    }

    let s_tilde: Vec<f64> = (0..n)
        .map(|k| if done[k] { sum_dy[k] / thresholds[k] } else { 0.0 })
        .collect();
    let approx_error = truth.map(|_| {
        (0..n)
            .map(|k| if done[k] { sum_b[k] / thresholds[k] } else { 0.0 })
            .collect()
    });
    Ok(StoppingResult {
        tau,
        s_tilde,
        attained: done,
        approx_error,
    })
}

/// Heteroscedastic variances sigma_k^2 = n / ((T - t0)(q_tilde - eps^2/2)(b - a)).
///
/// Under the admissibility conditions the bound sigma_k^2 <= 4/((b-a) eps)
/// is a theorem; it is asserted here unconditionally.
pub fn variances(
    q_tilde: &[f64],
    horizon: f64,
    warmup: f64,
    n: usize,
    a: f64,
    b: f64,
    trunc_level: f64,
) -> Vec<f64> {
    let span = horizon - warmup;
    let bound = variance_bound(a, b, trunc_level);
    q_tilde
        .iter()
        .map(|&q| {
            let v = n as f64 / (span * (q - trunc_level * trunc_level / 2.0) * (b - a));
            assert!(
                v > 0.0 && v <= bound * (1.0 + 1e-9),
                "variance {v} violates the bound {bound}"
            );
            v
        })
        .collect()
}

/// The uniform variance bound sigma_star = 4 / ((b - a) eps).
#[inline]
pub fn variance_bound(a: f64, b: f64, trunc_level: f64) -> f64 {
    4.0 / ((b - a) * trunc_level)
}

/// The regression data extracted from one path.
#[derive(Debug, Clone)]
pub struct SequentialObservations {
    /// Regression responses Y_k = S_tilde_k * 1{all windows attained}.
    pub responses: Vec<f64>,
    /// Stopped kernel estimates before the indicator.
    pub s_tilde: Vec<f64>,
    pub tau: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub sigma_sq: Vec<f64>,
    /// True when every window reached its threshold by T.
    pub gamma: bool,
    /// Per-window attainment (diagnostics; gamma is their conjunction).
    pub attained: Vec<bool>,
    /// Approximation errors B_k when the true drift was supplied.
    pub approx_error: Option<Vec<f64>>,
    pub density: DensityEstimate,
}

impl SequentialObservations {
    /// CSV with columns k, x_k, Y_k, tau_k, H_k, sigma_sq_k, gamma.
    pub fn write_csv<W: Write>(&self, grid: &GridSpec, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,x_k,Y_k,tau_k,H_k,sigma_sq_k,gamma")?;
        for k in 0..grid.n {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                k + 1,
                crate::csvio::fmt_float(grid.points[k]),
                crate::csvio::fmt_float(self.responses[k]),
                crate::csvio::fmt_float(self.tau[k]),
                crate::csvio::fmt_float(self.thresholds[k]),
                crate::csvio::fmt_float(self.sigma_sq[k]),
                u8::from(self.gamma)
            )?;
        }
        Ok(())
    }
}

/// Full reduction: density estimate, thresholds, stopped integration,
/// variances, and the all-attained indicator.
pub fn regression_data(
    path: &DiffusionPath,
    grid: &GridSpec,
    schedule: &Schedule,
    truth: Option<&DriftSpec>,
) -> Result<SequentialObservations> {
    if schedule.warmup >= schedule.horizon {
        return Err(Error::invalid(
            "schedule warmup must be strictly below the horizon".to_string(),
        ));
    }
    if grid.n != schedule.n {
        return Err(Error::invalid(format!(
            "grid size {} does not match schedule n {}",
            grid.n, schedule.n
        )));
    }
    let density = density_estimate(path, schedule.warmup, grid, schedule.trunc_level)?;
    let h_values = thresholds(
        &density.truncated,
        schedule.horizon,
        schedule.warmup,
        grid.h,
        schedule.trunc_level,
    );
    let stopping = sequential_estimate(path, grid, schedule.warmup, &h_values, truth)?;
    let sigma_sq = variances(
        &density.truncated,
        schedule.horizon,
        schedule.warmup,
        schedule.n,
        grid.a,
        grid.b,
        schedule.trunc_level,
    );
    let gamma = stopping.all_attained();
    let responses = if gamma {
        stopping.s_tilde.clone()
    } else {
        vec![0.0; grid.n]
    };
    Ok(SequentialObservations {
        responses,
        s_tilde: stopping.s_tilde,
        tau: stopping.tau,
        thresholds: h_values,
        sigma_sq,
        gamma,
        attained: stopping.attained,
        approx_error: stopping.approx_error,
        density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::DriftSpec;
    use crate::simulate::{simulate_path_with, ZeroNoise};

    fn constant_path(value: f64, horizon: f64, dt: f64) -> DiffusionPath {
        let steps = (horizon / dt).floor() as usize;
        DiffusionPath {
            y0: value,
            dt,
            values: vec![value; steps + 1],
            horizon,
            seed: 0,
            drift_label: "stub".to_string(),
        }
    }

    #[test]
    fn density_of_constant_path_is_inverse_window_width() {
        let grid = GridSpec::new(0.0, 1.0, 4).unwrap();
        let path = constant_path(grid.x(2), 50.0, 0.5);
        let q = estimate_density(&path, 50.0, &grid).unwrap();
        assert!((q[1] - 1.0 / (2.0 * grid.h)).abs() < 1e-12);
        // Windows the path never visits live at zero.
        assert_eq!(q[3], 0.0);
    }

    #[test]
    fn density_rejects_coarse_mesh_and_long_warmup() {
        let grid = GridSpec::new(0.0, 1.0, 4).unwrap();
        let path = constant_path(0.5, 10.0, 0.5);
        assert!(estimate_density(&path, 20.0, &grid).is_err());
        assert!(estimate_density(&path, 10.0, &grid).is_err());
    }

    #[test]
    fn truncation_is_elementwise_max() {
        assert_eq!(truncate_density(&[0.3], 0.65), vec![0.65]);
        assert_eq!(truncate_density(&[0.8], 0.65), vec![0.8]);
        assert_eq!(truncate_density(&[0.65], 0.65), vec![0.65]);
    }

    #[test]
    fn threshold_arithmetic_matches_hand_values() {
        let h = thresholds(&[0.65], 1000.0, 500.0, 0.0005, 0.6498);
        assert!((h[0] - 0.21943999) .abs() < 1e-6, "H = {}", h[0]);

        let h = thresholds(&[1.0], 32.0, 16.0, 0.125, 1.0);
        assert!((h[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn thresholds_are_positive_for_admissible_inputs() {
        for eps in [0.1, 0.5, 0.9, 1.0] {
            for q in [eps, eps + 0.2, 2.0] {
                let h = thresholds(&[q], 100.0, 50.0, 0.01, eps);
                assert!(h[0] > 0.0);
            }
        }
    }

    #[test]
    fn stopped_integral_recovers_constant_drift() {
        // Path drifts slowly inside the window around x_2 = 0.5; kernel mass
        // accumulates at unit rate so the crossing lands at t0 + H exactly.
        let drift = DriftSpec::new("slow", 2.0, 1.0, |_| 0.01).unwrap();
        let path = simulate_path_with(&drift, 0.5, 16.0, 0.5, &mut ZeroNoise).unwrap();
        let grid = GridSpec::new(0.0, 1.0, 4).unwrap();
        let mut h = vec![2.0; 4];
        // Keep other windows unattainable so the test focuses on window 2.
        h[0] = 1e6;
        h[2] = 1e6;
        h[3] = 1e6;
        let result = sequential_estimate(&path, &grid, 0.0, &h, Some(&drift)).unwrap();
        assert!(result.attained[1]);
        assert!((result.tau[1] - 2.0).abs() < 1e-12);
        assert!((result.s_tilde[1] - 0.01).abs() < 1e-12);
        // Never-visited window gets the sentinel.
        assert!(!result.attained[3]);
        assert_eq!(result.tau[3], path.horizon + path.dt);
        // Constant drift has zero approximation error.
        assert!(result.approx_error.as_ref().unwrap()[1].abs() < 1e-15);
    }

    #[test]
    fn fractional_clipping_hits_threshold_exactly() {
        let drift = DriftSpec::new("flat", 2.0, 1.0, |_| 0.0).unwrap();
        let path = simulate_path_with(&drift, 0.5, 10.0, 0.5, &mut ZeroNoise).unwrap();
        let grid = GridSpec::new(0.0, 1.0, 4).unwrap();
        // 1.25 mass needs 2.5 steps: tau = 2 full steps + half a step.
        let h = vec![1e6, 1.25, 1e6, 1e6];
        let result = sequential_estimate(&path, &grid, 0.0, &h, None).unwrap();
        assert!((result.tau[1] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn variance_arithmetic_and_bound() {
        let v = variances(&[0.6498], 1000.0, 500.0, 1000, 0.0, 1.0, 0.6498);
        assert!((v[0] - 4.5591321).abs() < 1e-6, "sigma^2 = {}", v[0]);
        assert!(v[0] <= variance_bound(0.0, 1.0, 0.6498));
        assert!((variance_bound(0.0, 1.0, 1.0) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn variance_decreases_in_density() {
        let v = variances(&[0.7, 10.0], 100.0, 50.0, 100, 0.0, 1.0, 0.7);
        assert!(v[1] < v[0]);
    }

    #[test]
    fn variance_is_reciprocal_threshold() {
        // sigma_k^2 = 1/H_k: the two displays are algebraically identical.
        let q = [0.73, 0.9, 1.4];
        let (horizon, warmup, eps) = (400.0, 200.0, 0.73);
        let grid = GridSpec::new(-0.3, 0.3, 3).unwrap();
        let h = thresholds(&q, horizon, warmup, grid.h, eps);
        let v = variances(&q, horizon, warmup, 3, grid.a, grid.b, eps);
        for k in 0..3 {
            assert!((v[k] * h[k] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_failure_zeroes_responses() {
        let drift = DriftSpec::new("flat", 2.0, 1.0, |_| 0.0).unwrap();
        let path = simulate_path_with(&drift, 0.5, 40.0, 0.1, &mut ZeroNoise).unwrap();
        let grid = GridSpec::new(0.0, 1.0, 2).unwrap();
        let schedule = Schedule {
            horizon: 40.0,
            warmup: 16.0,
            trunc_level: 1.0,
            n: 2,
        };
        // Constant path at 0.5 sits in window 1 only; window 2 cannot attain.
        let obs = regression_data(&path, &grid, &schedule, None).unwrap();
        assert!(!obs.gamma);
        assert!(obs.responses.iter().all(|&y| y == 0.0));
        assert!(obs.attained[0]);
        assert!(!obs.attained[1]);
        // The raw stopped estimate is still recorded for diagnostics.
        assert!((obs.s_tilde[0]).abs() < 1e-12);
    }

    #[test]
    fn csv_has_expected_header_and_rows() {
        let drift = DriftSpec::new("flat", 2.0, 1.0, |_| 0.0).unwrap();
        let path = simulate_path_with(&drift, 0.5, 40.0, 0.1, &mut ZeroNoise).unwrap();
        let grid = GridSpec::new(0.0, 1.0, 2).unwrap();
        let schedule = Schedule {
            horizon: 40.0,
            warmup: 16.0,
            trunc_level: 1.0,
            n: 2,
        };
        let obs = regression_data(&path, &grid, &schedule, None).unwrap();
        let mut buf = Vec::new();
        obs.write_csv(&grid, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "k,x_k,Y_k,tau_k,H_k,sigma_sq_k,gamma");
        assert_eq!(lines.count(), 2);
    }
}
