//! Euler-Maruyama simulation of the scalar diffusion dy = S(y) dt + dw.
//!
//! Paths are reproducible: the generator is owned per call and seeded by the
//! caller, so identical inputs give bit-identical trajectories.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::drift::DriftSpec;
use crate::error::{Error, Result};

/// Source of standard normal increments. Implemented by the seeded generator
/// and by deterministic stubs used in tests.
pub trait NoiseSource {
    fn standard_normal(&mut self) -> f64;
}

/// ChaCha-backed Gaussian noise, stable across platforms for a given seed.
pub struct GaussianNoise {
    rng: ChaCha8Rng,
}

impl GaussianNoise {
    pub fn seeded(seed: u64) -> Self {
        GaussianNoise {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl NoiseSource for GaussianNoise {
    #[inline]
    fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

/// Noise stub that always returns zero; reduces the scheme to the
/// deterministic Euler recursion.
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    #[inline]
    fn standard_normal(&mut self) -> f64 {
        0.0
    }
}

/// A discretized trajectory on the uniform mesh i * dt, i = 0..=steps.
#[derive(Debug, Clone)]
pub struct DiffusionPath {
    /// Initial state y_0.
    pub y0: f64,
    /// Mesh width.
    pub dt: f64,
    /// States at mesh times; length floor(T/dt) + 1.
    pub values: Vec<f64>,
    /// Horizon T.
    pub horizon: f64,
    /// Seed used for the Gaussian increments (0 for stub-driven paths).
    pub seed: u64,
    /// Drift label recorded for CSV provenance.
    pub drift_label: String,
}

impl DiffusionPath {
    /// Mesh time of index `i`.
    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Number of mesh steps (values.len() - 1).
    #[inline]
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    /// Two-column CSV (time, value) with a provenance header comment.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# drift={} dt={} seed={} T={}",
            self.drift_label,
            crate::csvio::fmt_float(self.dt),
            self.seed,
            crate::csvio::fmt_float(self.horizon)
        )?;
        writeln!(w, "time,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(
                w,
                "{},{}",
                crate::csvio::fmt_float(self.time(i)),
                crate::csvio::fmt_float(*v)
            )?;
        }
        Ok(())
    }
}

/// Simulate with the seeded Gaussian generator.
pub fn simulate_path(
    drift: &DriftSpec,
    y0: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<DiffusionPath> {
    let mut noise = GaussianNoise::seeded(seed);
    let mut path = simulate_path_with(drift, y0, horizon, dt, &mut noise)?;
    path.seed = seed;
    Ok(path)
}

/// Simulate with an arbitrary noise source (stubs in tests).
///
/// values[i+1] = values[i] + S(values[i]) dt + sqrt(dt) g_i.
pub fn simulate_path_with(
    drift: &DriftSpec,
    y0: f64,
    horizon: f64,
    dt: f64,
    noise: &mut dyn NoiseSource,
) -> Result<DiffusionPath> {
    if !(horizon > 0.0) {
        return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
    }
    if !(dt > 0.0) || dt > horizon {
        return Err(Error::invalid(format!(
            "step must satisfy 0 < dt <= T, got dt={dt}, T={horizon}"
        )));
    }
    let steps = (horizon / dt).floor() as usize;
    let sqrt_dt = dt.sqrt();
    let mut values = Vec::with_capacity(steps + 1);
    values.push(y0);
    let mut y = y0;
    for _ in 0..steps {
        let s = drift.eval(y);
        if !s.is_finite() {
            return Err(Error::NonFiniteDrift { state: y });
        }
        y += s * dt + sqrt_dt * noise.standard_normal();
        values.push(y);
    }
    Ok(DiffusionPath {
        y0,
        dt,
        values,
        horizon,
        seed: 0,
        drift_label: drift.label.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::DriftSpec;

    fn ou() -> DriftSpec {
        DriftSpec::new("ou", 4.0, 3.0, |x| -x).unwrap()
    }

    #[test]
    fn zero_drift_zero_noise_stays_put() {
        let drift = DriftSpec::new("flat", 2.0, 1.0, |_| 0.0).unwrap();
        let path = simulate_path_with(&drift, 0.0, 2.0, 1.0, &mut ZeroNoise).unwrap();
        assert_eq!(path.values, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_noise_follows_euler_recursion() {
        let path = simulate_path_with(&ou(), 1.0, 1.0, 0.5, &mut ZeroNoise).unwrap();
        assert_eq!(path.values, vec![1.0, 0.5, 0.25]);
    }

    #[test]
    fn path_length_and_horizon() {
        let path = simulate_path(&ou(), 0.0, 2.5, 1.0, 7).unwrap();
        assert_eq!(path.values.len(), 3);
        assert!((path.dt * path.steps() as f64 - path.horizon).abs() <= path.dt);
    }

    #[test]
    fn seeded_paths_are_bit_identical() {
        let a = simulate_path(&ou(), 0.3, 5.0, 1e-2, 42).unwrap();
        let b = simulate_path(&ou(), 0.3, 5.0, 1e-2, 42).unwrap();
        assert_eq!(a.values, b.values);
        let c = simulate_path(&ou(), 0.3, 5.0, 1e-2, 43).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn bad_arguments_are_rejected() {
        assert!(simulate_path(&ou(), 0.0, 1.0, 0.0, 1).is_err());
        assert!(simulate_path(&ou(), 0.0, 1.0, -0.1, 1).is_err());
        assert!(simulate_path(&ou(), 0.0, -1.0, 0.1, 1).is_err());
        assert!(simulate_path(&ou(), 0.0, 1.0, 2.0, 1).is_err());
    }

    #[test]
    fn non_finite_drift_reports_state() {
        let drift = DriftSpec::new("blowup", 2.0, 1.0, |x| {
            if x > 0.5 {
                f64::NAN
            } else {
                1.0
            }
        })
        .unwrap();
        let err = simulate_path_with(&drift, 0.0, 10.0, 1.0, &mut ZeroNoise).unwrap_err();
        match err {
            crate::error::Error::NonFiniteDrift { state } => assert!(state > 0.5),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
