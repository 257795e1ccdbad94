//! Monte Carlo risk bench: experiment configs, paired risk-difference
//! estimates, oracle-inequality reports, and stopping-failure rates.
//!
//! Replications are independent tasks keyed by seed (base_seed + rep index)
//! and run in parallel; results are merged in rep order so reports are
//! byte-identical across runs and thread counts.

use std::io::Write;

use rayon::prelude::*;
use serde::Deserialize;

use crate::density::{integrate, QuadRule, QuadratureSpec};
use crate::design::{choose_n, schedule_params, validate_h1, GridSpec, Schedule};
use crate::drift::{drift_by_label, DriftSpec};
use crate::error::{Error, Result};
use crate::select::{adaptive_estimate, weight_family, Rho, WeightFamily};
use crate::sequential::{regression_data, variance_bound, SequentialObservations};
use crate::shrink::{class_sup_bound, improved_fit, shrink, ShrinkageConfig};
use crate::simulate::simulate_path;
use crate::spectral::{
    build_basis, empirical_norm_sq, fourier_coefficients, wls_fit, BasisMatrix, PiecewiseEstimate,
    SpectralData, WeightVector,
};

fn default_reps() -> usize {
    500
}
fn default_seed() -> u64 {
    1
}
fn default_dt() -> f64 {
    1e-3
}
fn default_rho() -> f64 {
    0.1
}
fn default_beta_max() -> u32 {
    3
}
fn default_t_max() -> u32 {
    10
}
fn default_quad_points() -> usize {
    2001
}
fn default_quad_rule() -> QuadRule {
    QuadRule::Trapezoid
}

/// Experiment description, loaded from flat TOML with typed keys.
/// Unknown keys are rejected outright.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Drift label from the built-in library.
    pub drift: String,
    pub a: f64,
    pub b: f64,
    /// Single horizon; alternative to `T_list`.
    #[serde(rename = "T")]
    pub horizon: Option<f64>,
    /// Multiple horizons for suites that sweep T.
    #[serde(rename = "T_list")]
    pub horizon_list: Option<Vec<f64>>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Admit rho outside (0, 1/6); flagged in every report row.
    #[serde(default)]
    pub rho_override: bool,
    /// Shrunk block size; defaults to floor(sqrt(n)).
    pub d: Option<usize>,
    #[serde(default = "default_beta_max")]
    pub beta_max: u32,
    #[serde(default = "default_t_max")]
    pub t_max: u32,
    /// Initial state of every simulated path.
    #[serde(default)]
    pub y0: f64,
    /// Pre-estimation span override; defaults to the example schedule.
    #[serde(rename = "t0")]
    pub warmup_override: Option<f64>,
    /// Truncation level override; defaults to the example schedule.
    #[serde(rename = "epsT")]
    pub trunc_override: Option<f64>,
    /// Grid size override, subject to n <= T.
    pub n: Option<usize>,
    /// Override for the class sup bound used in the shrinkage constant.
    pub s_star: Option<f64>,
    #[serde(default = "default_quad_points")]
    pub quad_points: usize,
    #[serde(default = "default_quad_rule")]
    pub quad_rule: QuadRule,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let drift = self.drift_spec()?;
        if !drift.covers_interval(self.a, self.b) {
            return Err(Error::Config(format!(
                "drift '{}' has radius {} <= |a| + |b| = {}",
                self.drift,
                drift.radius,
                self.a.abs() + self.b.abs()
            )));
        }
        if !(self.a < self.b) {
            return Err(Error::Config(format!(
                "estimation interval is degenerate: [{}, {}]",
                self.a, self.b
            )));
        }
        if self.reps < 1 {
            return Err(Error::Config("reps must be at least 1".to_string()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        let horizons = self.horizons()?;
        for &t in &horizons {
            self.schedule_for(t)?;
        }
        self.rho()?;
        Ok(())
    }

    pub fn drift_spec(&self) -> Result<DriftSpec> {
        drift_by_label(&self.drift)
            .ok_or_else(|| Error::Config(format!("unknown drift label '{}'", self.drift)))
    }

    pub fn horizons(&self) -> Result<Vec<f64>> {
        match (&self.horizon, &self.horizon_list) {
            (Some(t), None) => Ok(vec![*t]),
            (None, Some(list)) if !list.is_empty() => Ok(list.clone()),
            (Some(_), Some(_)) => Err(Error::Config(
                "specify either T or T_list, not both".to_string(),
            )),
            _ => Err(Error::Config("config needs T or a non-empty T_list".to_string())),
        }
    }

    pub fn rho(&self) -> Result<Rho> {
        if self.rho_override {
            Rho::exploratory(self.rho)
        } else {
            Rho::new(self.rho)
        }
    }

    /// Schedule for one horizon: the example family with config overrides,
    /// re-validated after overriding.
    pub fn schedule_for(&self, horizon: f64) -> Result<Schedule> {
        let mut schedule = schedule_params(horizon)?;
        if let Some(t0) = self.warmup_override {
            schedule.warmup = t0;
        }
        if let Some(eps) = self.trunc_override {
            schedule.trunc_level = eps;
        }
        if let Some(n) = self.n {
            schedule.n = n;
        } else {
            schedule.n = choose_n(horizon)?;
        }
        let report = validate_h1(&schedule);
        if !report.pass() || !report.n_bound {
            return Err(Error::Config(format!(
                "schedule overrides violate admissibility: {report:?}"
            )));
        }
        if self.dt > schedule.warmup / 100.0 {
            return Err(Error::Config(format!(
                "dt = {} too coarse for warmup {}",
                self.dt, schedule.warmup
            )));
        }
        Ok(schedule)
    }

    pub fn block_size(&self, n: usize) -> usize {
        self.d
            .unwrap_or_else(|| (n as f64).sqrt().floor() as usize)
            .clamp(1, n)
    }

    /// Quadrature for integral risks over the estimation interval.
    pub fn risk_quadrature(&self) -> Result<QuadratureSpec> {
        QuadratureSpec::new(self.a, self.b, self.quad_points, self.quad_rule)
    }
}

/// Everything derived from a config at one horizon; built once and shared
/// across replications.
pub struct ScaleSetup {
    pub drift: DriftSpec,
    pub schedule: Schedule,
    pub grid: GridSpec,
    pub basis: BasisMatrix,
    pub family: WeightFamily,
    pub shrink_cfg: ShrinkageConfig,
    pub rho: Rho,
    /// Fourier coefficients of the true drift on the grid.
    pub truth_spectrum: Vec<f64>,
    /// True drift at the grid points.
    pub truth_values: Vec<f64>,
    pub quad: QuadratureSpec,
}

impl ScaleSetup {
    pub fn build(cfg: &ExperimentConfig, horizon: f64) -> Result<ScaleSetup> {
        let drift = cfg.drift_spec()?;
        let schedule = cfg.schedule_for(horizon)?;
        let grid = GridSpec::new(cfg.a, cfg.b, schedule.n)?;
        let basis = build_basis(&grid)?;
        let d = cfg.block_size(schedule.n);
        let sigma_star = variance_bound(cfg.a, cfg.b, schedule.trunc_level);
        let s_star = cfg
            .s_star
            .unwrap_or_else(|| class_sup_bound(drift.lipschitz, drift.radius, cfg.a, cfg.b));
        let shrink_cfg = ShrinkageConfig::new(
            d,
            schedule.n,
            drift.lipschitz,
            sigma_star,
            s_star,
            cfg.a,
            cfg.b,
        )?;
        let family = weight_family(schedule.n, d, cfg.beta_max, cfg.t_max)?;
        let truth_values: Vec<f64> = grid.points.iter().map(|&x| drift.eval(x)).collect();
        let truth_spectrum = fourier_coefficients(&truth_values, &basis)?;
        Ok(ScaleSetup {
            drift,
            schedule,
            grid,
            basis,
            family,
            shrink_cfg,
            rho: cfg.rho()?,
            truth_spectrum,
            truth_values,
            quad: cfg.risk_quadrature()?,
        })
    }

    /// Simulate one path and reduce it to regression data.
    pub fn observe(&self, cfg: &ExperimentConfig, rep: usize) -> Result<SequentialObservations> {
        let seed = cfg.base_seed.wrapping_add(rep as u64);
        let path = simulate_path(
            &self.drift,
            cfg.y0,
            self.schedule.horizon,
            cfg.dt,
            seed,
        )?;
        regression_data(&path, &self.grid, &self.schedule, Some(&self.drift))
    }

    /// Empirical squared distance of an estimate from the true drift.
    pub fn risk_empirical(&self, estimate: &PiecewiseEstimate) -> f64 {
        let diff: Vec<f64> = estimate
            .values
            .iter()
            .zip(&self.truth_values)
            .map(|(e, t)| e - t)
            .collect();
        empirical_norm_sq(&diff, &self.grid)
    }

    /// Integral squared distance of an estimate from the true drift.
    pub fn risk_integral(&self, estimate: &PiecewiseEstimate) -> f64 {
        l2_risk(estimate, &self.drift, &self.quad)
    }
}

/// Quadrature of (estimate - S)^2 over the estimation interval.
pub fn l2_risk(estimate: &PiecewiseEstimate, drift: &DriftSpec, quad: &QuadratureSpec) -> f64 {
    integrate(
        |x| {
            let d = estimate.eval(x) - drift.eval(x);
            d * d
        },
        quad,
    )
}

/// Which estimator a bench run measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// Plain weighted least squares with a fixed weight vector.
    Wls,
    /// Shrinkage-improved fit with a fixed weight vector.
    Improved,
    /// Shrinkage plus data-driven weight selection.
    Adaptive,
}

impl EstimatorKind {
    fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Wls => "wls",
            EstimatorKind::Improved => "improved",
            EstimatorKind::Adaptive => "adaptive",
        }
    }
}

/// One aggregate line of a report.
#[derive(Debug, Clone, Default)]
pub struct ReportRow {
    pub suite: String,
    pub estimator: String,
    pub horizon: f64,
    pub n: usize,
    pub d: usize,
    pub rho: f64,
    pub rho_flagged: bool,
    pub reps: usize,
    pub reps_failed: usize,
    pub gamma_fail_rate: Option<f64>,
    pub risk_n_mean: Option<f64>,
    pub risk_n_se: Option<f64>,
    pub risk_l2_mean: Option<f64>,
    pub risk_l2_se: Option<f64>,
    pub delta_hat: Option<f64>,
    pub delta_se: Option<f64>,
    pub c: Option<f64>,
    pub c_sq: Option<f64>,
    pub sigma_star: Option<f64>,
    pub s_star: Option<f64>,
    pub oracle_min: Option<f64>,
    pub oracle_factor: Option<f64>,
    pub oracle_ratio: Option<f64>,
    pub residual_r_n: Option<f64>,
}

/// Aggregate Monte Carlo report: rows plus the true coefficient spectra per
/// horizon.
#[derive(Debug, Clone, Default)]
pub struct RiskReport {
    pub rows: Vec<ReportRow>,
    /// (horizon, theta_{j,n} of the true drift).
    pub truth_spectra: Vec<(f64, Vec<f64>)>,
}

const REPORT_COLUMNS: &str = "suite,estimator,T,n,d,rho,rho_flagged,reps,reps_failed,\
gamma_fail_rate,risk_n_mean,risk_n_se,risk_l2_mean,risk_l2_se,delta_hat,delta_se,\
c,c_sq,sigma_star,s_star,oracle_min,oracle_factor,oracle_ratio,residual_r_n";

fn opt(x: Option<f64>) -> String {
    x.map(crate::csvio::fmt_float).unwrap_or_default()
}

impl RiskReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{REPORT_COLUMNS}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.suite,
                r.estimator,
                crate::csvio::fmt_float(r.horizon),
                r.n,
                r.d,
                crate::csvio::fmt_float(r.rho),
                u8::from(r.rho_flagged),
                r.reps,
                r.reps_failed,
                opt(r.gamma_fail_rate),
                opt(r.risk_n_mean),
                opt(r.risk_n_se),
                opt(r.risk_l2_mean),
                opt(r.risk_l2_se),
                opt(r.delta_hat),
                opt(r.delta_se),
                opt(r.c),
                opt(r.c_sq),
                opt(r.sigma_star),
                opt(r.s_star),
                opt(r.oracle_min),
                opt(r.oracle_factor),
                opt(r.oracle_ratio),
                opt(r.residual_r_n)
            )?;
        }
        Ok(())
    }

    /// Sidecar CSV with the true drift spectrum per horizon.
    pub fn write_truth_spectra_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "T,j,theta_j")?;
        for (t, spectrum) in &self.truth_spectra {
            for (j, theta) in spectrum.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{}",
                    crate::csvio::fmt_float(*t),
                    j + 1,
                    crate::csvio::fmt_float(*theta)
                )?;
            }
        }
        Ok(())
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values
        .iter()
        .map(|v| {
            let d = v - mean;
            d * d
        })
        .sum::<f64>()
        / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn base_row(cfg: &ExperimentConfig, scale: &ScaleSetup, suite: &str, estimator: &str) -> ReportRow {
    ReportRow {
        suite: suite.to_string(),
        estimator: estimator.to_string(),
        horizon: scale.schedule.horizon,
        n: scale.schedule.n,
        d: scale.shrink_cfg.d,
        rho: scale.rho.value(),
        rho_flagged: scale.rho.flagged(),
        reps: cfg.reps,
        ..ReportRow::default()
    }
}

/// Per-rep estimator evaluation used by `mc_risk`.
fn rep_estimate(
    scale: &ScaleSetup,
    obs: &SequentialObservations,
    estimator: EstimatorKind,
    lambda: &WeightVector,
) -> Result<PiecewiseEstimate> {
    let spectral = SpectralData::from_observations(obs, &scale.basis)?;
    match estimator {
        EstimatorKind::Wls => wls_fit(lambda, &spectral.theta_hat, &scale.basis, spectral.gamma),
        EstimatorKind::Improved => {
            let theta_star = shrink(&spectral.theta_hat, scale.shrink_cfg.d, scale.shrink_cfg.c);
            improved_fit(lambda, &theta_star, &scale.basis, spectral.gamma)
        }
        EstimatorKind::Adaptive => Ok(adaptive_estimate(
            obs,
            &scale.basis,
            &scale.shrink_cfg,
            &scale.family,
            scale.rho,
        )?
        .0),
    }
}

/// Monte Carlo risk of one estimator across replications and horizons.
pub fn mc_risk(
    cfg: &ExperimentConfig,
    estimator: EstimatorKind,
    lambda: Option<&WeightVector>,
) -> Result<RiskReport> {
    let mut report = RiskReport::default();
    for horizon in cfg.horizons()? {
        let scale = ScaleSetup::build(cfg, horizon)?;
        let lambda_t = match lambda {
            Some(l) => {
                if l.len() != scale.schedule.n {
                    return Err(Error::invalid(format!(
                        "supplied weight vector has length {}, grid needs {}",
                        l.len(),
                        scale.schedule.n
                    )));
                }
                l.clone()
            }
            None => WeightVector::first_block(scale.schedule.n, scale.shrink_cfg.d)?,
        };
        let outcomes: Vec<Result<(f64, f64, bool)>> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                let obs = scale.observe(cfg, rep)?;
                let est = rep_estimate(&scale, &obs, estimator, &lambda_t)?;
                Ok((
                    scale.risk_empirical(&est),
                    scale.risk_integral(&est),
                    obs.gamma,
                ))
            })
            .collect();

        let mut risk_n = Vec::new();
        let mut risk_l2 = Vec::new();
        let mut gamma_failures = 0usize;
        let mut failures = 0usize;
        for outcome in outcomes {
            match outcome {
                Ok((rn, rl, gamma)) => {
                    risk_n.push(rn);
                    risk_l2.push(rl);
                    if !gamma {
                        gamma_failures += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
        let (rn_mean, rn_se) = mean_and_se(&risk_n);
        let (rl_mean, rl_se) = mean_and_se(&risk_l2);
        let mut row = base_row(cfg, &scale, "risk", estimator.label());
        row.reps_failed = failures;
        row.gamma_fail_rate = Some(gamma_failures as f64 / risk_n.len().max(1) as f64);
        row.risk_n_mean = Some(rn_mean);
        row.risk_n_se = Some(rn_se);
        row.risk_l2_mean = Some(rl_mean);
        row.risk_l2_se = Some(rl_se);
        row.c = Some(scale.shrink_cfg.c);
        row.c_sq = Some(scale.shrink_cfg.c * scale.shrink_cfg.c);
        row.sigma_star = Some(scale.shrink_cfg.sigma_star);
        row.s_star = Some(scale.shrink_cfg.s_star);
        report.rows.push(row);
        report
            .truth_spectra
            .push((horizon, scale.truth_spectrum.clone()));
    }
    Ok(report)
}

/// Paired-difference summary of the improved vs the plain estimator.
#[derive(Debug, Clone, Copy)]
pub struct DeltaSummary {
    pub delta_hat: f64,
    pub se: f64,
    pub c: f64,
    pub c_sq: f64,
}

/// Paired Monte Carlo estimate of the risk difference
/// E||improved - S||_n^2 - E||plain - S||_n^2. Both estimators see the same
/// simulated paths rep by rep.
pub fn delta_n(
    cfg: &ExperimentConfig,
    lambda: Option<&WeightVector>,
) -> Result<(DeltaSummary, RiskReport)> {
    let horizons = cfg.horizons()?;
    if horizons.len() != 1 {
        return Err(Error::invalid(
            "the paired improvement suite runs at a single horizon".to_string(),
        ));
    }
    let scale = ScaleSetup::build(cfg, horizons[0])?;
    let lambda_t = match lambda {
        Some(l) => l.clone(),
        None => WeightVector::first_block(scale.schedule.n, scale.shrink_cfg.d)?,
    };
    if lambda_t.len() != scale.schedule.n {
        return Err(Error::invalid(format!(
            "supplied weight vector has length {}, grid needs {}",
            lambda_t.len(),
            scale.schedule.n
        )));
    }

    let outcomes: Vec<Result<(f64, f64, f64, f64, bool)>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let obs = scale.observe(cfg, rep)?;
            let spectral = SpectralData::from_observations(&obs, &scale.basis)?;
            let plain = wls_fit(&lambda_t, &spectral.theta_hat, &scale.basis, spectral.gamma)?;
            let theta_star = shrink(&spectral.theta_hat, scale.shrink_cfg.d, scale.shrink_cfg.c);
            let improved = improved_fit(&lambda_t, &theta_star, &scale.basis, spectral.gamma)?;
            let r_plain = scale.risk_empirical(&plain);
            let r_improved = scale.risk_empirical(&improved);
            Ok((
                r_plain,
                r_improved,
                scale.risk_integral(&plain),
                scale.risk_integral(&improved),
                obs.gamma,
            ))
        })
        .collect();

    let mut plain_n = Vec::new();
    let mut improved_n = Vec::new();
    let mut plain_l2 = Vec::new();
    let mut improved_l2 = Vec::new();
    let mut diffs = Vec::new();
    let mut gamma_failures = 0usize;
    let mut failures = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok((rp, ri, lp, li, gamma)) => {
                diffs.push(ri - rp);
                plain_n.push(rp);
                improved_n.push(ri);
                plain_l2.push(lp);
                improved_l2.push(li);
                if !gamma {
                    gamma_failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }

    let (delta_hat, delta_se) = mean_and_se(&diffs);
    let c = scale.shrink_cfg.c;
    let summary = DeltaSummary {
        delta_hat,
        se: delta_se,
        c,
        c_sq: c * c,
    };

    let mut report = RiskReport::default();
    let gamma_rate = gamma_failures as f64 / diffs.len().max(1) as f64;
    for (label, rn, rl2) in [
        ("wls", &plain_n, &plain_l2),
        ("improved", &improved_n, &improved_l2),
    ] {
        let (rn_mean, rn_se) = mean_and_se(rn);
        let (rl_mean, rl_se) = mean_and_se(rl2);
        let mut row = base_row(cfg, &scale, "improve", label);
        row.reps_failed = failures;
        row.gamma_fail_rate = Some(gamma_rate);
        row.risk_n_mean = Some(rn_mean);
        row.risk_n_se = Some(rn_se);
        row.risk_l2_mean = Some(rl_mean);
        row.risk_l2_se = Some(rl_se);
        row.c = Some(c);
        row.c_sq = Some(c * c);
        row.sigma_star = Some(scale.shrink_cfg.sigma_star);
        row.s_star = Some(scale.shrink_cfg.s_star);
        report.rows.push(row);
    }
    let mut row = base_row(cfg, &scale, "improve", "delta");
    row.reps_failed = failures;
    row.gamma_fail_rate = Some(gamma_rate);
    row.delta_hat = Some(delta_hat);
    row.delta_se = Some(delta_se);
    row.c = Some(c);
    row.c_sq = Some(c * c);
    row.sigma_star = Some(scale.shrink_cfg.sigma_star);
    row.s_star = Some(scale.shrink_cfg.s_star);
    report.rows.push(row);
    report
        .truth_spectra
        .push((scale.schedule.horizon, scale.truth_spectrum.clone()));
    Ok((summary, report))
}

/// Oracle-inequality summary at one horizon.
#[derive(Debug, Clone, Copy)]
pub struct OracleSummary {
    pub horizon: f64,
    pub n: usize,
    pub adaptive_risk: f64,
    pub adaptive_se: f64,
    /// Smallest mean risk across the weight family (plain fits).
    pub oracle_min: f64,
    /// The theorem constant (1 + 6 rho)/(1 - 6 rho).
    pub oracle_factor: f64,
    /// adaptive_risk / oracle_min.
    pub oracle_ratio: f64,
    /// adaptive_risk - oracle_factor * oracle_min.
    pub residual: f64,
}

/// Run the adaptive procedure and every family member on shared paths.
pub fn oracle_report(cfg: &ExperimentConfig) -> Result<(Vec<OracleSummary>, RiskReport)> {
    let mut report = RiskReport::default();
    let mut summaries = Vec::new();
    for horizon in cfg.horizons()? {
        let scale = ScaleSetup::build(cfg, horizon)?;
        let members = scale.family.members.len();
        let outcomes: Vec<Result<(Vec<f64>, Vec<f64>, f64, f64, bool)>> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                let obs = scale.observe(cfg, rep)?;
                let spectral = SpectralData::from_observations(&obs, &scale.basis)?;
                let mut member_n = Vec::with_capacity(members);
                let mut member_l2 = Vec::with_capacity(members);
                for lambda in &scale.family.members {
                    let fit = wls_fit(lambda, &spectral.theta_hat, &scale.basis, spectral.gamma)?;
                    member_n.push(scale.risk_empirical(&fit));
                    member_l2.push(scale.risk_integral(&fit));
                }
                let (adaptive, _selection) = adaptive_estimate(
                    &obs,
                    &scale.basis,
                    &scale.shrink_cfg,
                    &scale.family,
                    scale.rho,
                )?;
                Ok((
                    member_n,
                    member_l2,
                    scale.risk_empirical(&adaptive),
                    scale.risk_integral(&adaptive),
                    obs.gamma,
                ))
            })
            .collect();

        let mut member_risks_n = vec![Vec::with_capacity(cfg.reps); members];
        let mut member_risks_l2 = vec![Vec::with_capacity(cfg.reps); members];
        let mut adaptive_n = Vec::with_capacity(cfg.reps);
        let mut adaptive_l2 = Vec::with_capacity(cfg.reps);
        let mut gamma_failures = 0usize;
        let mut failures = 0usize;
        for outcome in outcomes {
            match outcome {
                Ok((mn, ml, an, al, gamma)) => {
                    for (k, v) in mn.into_iter().enumerate() {
                        member_risks_n[k].push(v);
                    }
                    for (k, v) in ml.into_iter().enumerate() {
                        member_risks_l2[k].push(v);
                    }
                    adaptive_n.push(an);
                    adaptive_l2.push(al);
                    if !gamma {
                        gamma_failures += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }

        let gamma_rate = gamma_failures as f64 / adaptive_n.len().max(1) as f64;
        let mut oracle_min = f64::INFINITY;
        for (k, risks) in member_risks_n.iter().enumerate() {
            let (mean_n, se_n) = mean_and_se(risks);
            let (mean_l2, se_l2) = mean_and_se(&member_risks_l2[k]);
            oracle_min = oracle_min.min(mean_n);
            let (beta, t) = scale.family.index[k];
            let mut row = base_row(cfg, &scale, "oracle", &format!("member({beta};{t})"));
            row.reps_failed = failures;
            row.gamma_fail_rate = Some(gamma_rate);
            row.risk_n_mean = Some(mean_n);
            row.risk_n_se = Some(se_n);
            row.risk_l2_mean = Some(mean_l2);
            row.risk_l2_se = Some(se_l2);
            report.rows.push(row);
        }

        let (a_mean, a_se) = mean_and_se(&adaptive_n);
        let (al_mean, al_se) = mean_and_se(&adaptive_l2);
        let factor = scale.rho.oracle_factor();
        let residual = a_mean - factor * oracle_min;
        let mut row = base_row(cfg, &scale, "oracle", "adaptive");
        row.reps_failed = failures;
        row.gamma_fail_rate = Some(gamma_rate);
        row.risk_n_mean = Some(a_mean);
        row.risk_n_se = Some(a_se);
        row.risk_l2_mean = Some(al_mean);
        row.risk_l2_se = Some(al_se);
        row.c = Some(scale.shrink_cfg.c);
        row.c_sq = Some(scale.shrink_cfg.c * scale.shrink_cfg.c);
        row.sigma_star = Some(scale.shrink_cfg.sigma_star);
        row.s_star = Some(scale.shrink_cfg.s_star);
        row.oracle_min = Some(oracle_min);
        row.oracle_factor = Some(factor);
        row.oracle_ratio = Some(a_mean / oracle_min);
        row.residual_r_n = Some(residual);
        report.rows.push(row);
        report
            .truth_spectra
            .push((horizon, scale.truth_spectrum.clone()));

        summaries.push(OracleSummary {
            horizon,
            n: scale.schedule.n,
            adaptive_risk: a_mean,
            adaptive_se: a_se,
            oracle_min,
            oracle_factor: factor,
            oracle_ratio: a_mean / oracle_min,
            residual,
        });
    }
    Ok((summaries, report))
}

/// Stopping-failure rate per horizon.
#[derive(Debug, Clone, Copy)]
pub struct GammaRate {
    pub horizon: f64,
    pub rate: f64,
    pub reps: usize,
}

/// Fraction of replications on which some window missed its threshold.
pub fn gamma_failure_rate(cfg: &ExperimentConfig) -> Result<(Vec<GammaRate>, RiskReport)> {
    if cfg.reps < 500 {
        return Err(Error::invalid(format!(
            "the stopping-failure suite needs at least 500 reps per horizon, got {}",
            cfg.reps
        )));
    }
    let mut rates = Vec::new();
    let mut report = RiskReport::default();
    for horizon in cfg.horizons()? {
        let scale = ScaleSetup::build(cfg, horizon)?;
        let outcomes: Vec<Result<bool>> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| Ok(scale.observe(cfg, rep)?.gamma))
            .collect();
        let mut failures = 0usize;
        let mut errors = 0usize;
        let mut ok = 0usize;
        for outcome in outcomes {
            match outcome {
                Ok(gamma) => {
                    ok += 1;
                    if !gamma {
                        failures += 1;
                    }
                }
                Err(_) => errors += 1,
            }
        }
        let rate = failures as f64 / ok.max(1) as f64;
        rates.push(GammaRate {
            horizon,
            rate,
            reps: ok,
        });
        let mut row = base_row(cfg, &scale, "gamma", "gamma");
        row.reps_failed = errors;
        row.gamma_fail_rate = Some(rate);
        report.rows.push(row);
    }
    Ok((rates, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toml_config(body: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(body).unwrap()
    }

    fn small_config() -> ExperimentConfig {
        toml_config(
            r#"
            drift = "ou4"
            a = -0.3
            b = 0.3
            T = 32.0
            reps = 4
            base_seed = 11
            dt = 0.01
            rho = 0.1
            d = 4
            beta_max = 2
            t_max = 2
            quad_points = 401
            "#,
        )
    }

    #[test]
    fn config_parses_and_validates() {
        let cfg = small_config();
        assert_eq!(cfg.drift, "ou4");
        assert_eq!(cfg.horizons().unwrap(), vec![32.0]);
        let schedule = cfg.schedule_for(32.0).unwrap();
        assert_eq!(schedule.n, 32);
        assert_eq!(cfg.block_size(32), 4);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml_str(
            r#"
            drift = "ou4"
            a = -0.3
            b = 0.3
            T = 32.0
            tpyo = 1
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn bad_labels_intervals_and_rho_are_rejected() {
        assert!(ExperimentConfig::from_toml_str(
            r#"
            drift = "nope"
            a = -0.3
            b = 0.3
            T = 32.0
            "#,
        )
        .is_err());
        // Interval too wide for the drift radius.
        assert!(ExperimentConfig::from_toml_str(
            r#"
            drift = "ou4"
            a = -0.6
            b = 0.6
            T = 32.0
            "#,
        )
        .is_err());
        // rho outside the regime without the override.
        assert!(ExperimentConfig::from_toml_str(
            r#"
            drift = "ou4"
            a = -0.3
            b = 0.3
            T = 32.0
            rho = 0.5
            "#,
        )
        .is_err());
        // Same rho with the override parses and is flagged.
        let cfg = toml_config(
            r#"
            drift = "ou4"
            a = -0.3
            b = 0.3
            T = 32.0
            rho = 0.5
            rho_override = true
            "#,
        );
        assert!(cfg.rho().unwrap().flagged());
    }

    #[test]
    fn default_block_size_is_sqrt_n() {
        let cfg = toml_config(
            r#"
            drift = "ou4"
            a = -0.3
            b = 0.3
            T = 100.0
            "#,
        );
        assert_eq!(cfg.block_size(100), 10);
        assert_eq!(cfg.block_size(400), 20);
    }

    #[test]
    fn l2_risk_basics() {
        let grid = GridSpec::new(0.0, 1.0, 2).unwrap();
        let drift = DriftSpec::new("const", 2.0, 2.0, |_| 0.25).unwrap();
        let quad = QuadratureSpec::new(0.0, 1.0, 4001, QuadRule::Trapezoid).unwrap();
        // Estimate identical to the (constant) truth: zero risk.
        let exact = PiecewiseEstimate {
            grid: grid.clone(),
            values: vec![0.25, 0.25],
        };
        assert!(l2_risk(&exact, &drift, &quad) < 1e-15);
        // Constant offset c: risk c^2 (b - a).
        let offset = PiecewiseEstimate {
            grid: grid.clone(),
            values: vec![0.55, 0.55],
        };
        assert!((l2_risk(&offset, &drift, &quad) - 0.09).abs() < 1e-10);
    }

    #[test]
    fn l2_risk_piecewise_vs_linear_hand_value() {
        // Two cells on [0, 1] against S(x) = -x with values at the cell
        // centers of the negated identity: exact integral is 1/48.
        let grid = GridSpec::new(0.0, 1.0, 2).unwrap();
        let drift = DriftSpec::new("lin", 2.0, 2.0, |x| -x).unwrap();
        let est = PiecewiseEstimate {
            grid,
            values: vec![-0.25, -0.75],
        };
        let quad = QuadratureSpec::new(0.0, 1.0, 20_001, QuadRule::Midpoint).unwrap();
        let risk = l2_risk(&est, &drift, &quad);
        assert!((risk - 1.0 / 48.0).abs() < 1e-7, "risk = {risk}");
    }

    #[test]
    fn paired_delta_is_exactly_zero_when_c_vanishes() {
        let mut cfg = small_config();
        cfg.d = Some(1); // c(1) = 0
        let (summary, _) = delta_n(&cfg, None).unwrap();
        assert_eq!(summary.c, 0.0);
        assert_eq!(summary.delta_hat, 0.0);
        assert_eq!(summary.se, 0.0);
    }

    #[test]
    fn wls_with_block_weights_equals_improved_with_zero_c() {
        let mut cfg = small_config();
        cfg.d = Some(1);
        let a = mc_risk(&cfg, EstimatorKind::Wls, None).unwrap();
        let b = mc_risk(&cfg, EstimatorKind::Improved, None).unwrap();
        assert_eq!(a.rows[0].risk_n_mean, b.rows[0].risk_n_mean);
        assert_eq!(a.rows[0].risk_l2_mean, b.rows[0].risk_l2_mean);
    }

    #[test]
    fn report_csv_is_deterministic() {
        let cfg = small_config();
        let (_, r1) = delta_n(&cfg, None).unwrap();
        let (_, r2) = delta_n(&cfg, None).unwrap();
        let mut b1 = Vec::new();
        let mut b2 = Vec::new();
        r1.write_csv(&mut b1).unwrap();
        r2.write_csv(&mut b2).unwrap();
        assert_eq!(b1, b2);
    }

    #[test]
    fn gamma_suite_enforces_rep_floor() {
        let cfg = small_config();
        assert!(matches!(
            gamma_failure_rate(&cfg),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn oracle_report_produces_member_rows_and_summary() {
        let cfg = small_config();
        let (summaries, report) = oracle_report(&cfg).unwrap();
        assert_eq!(summaries.len(), 1);
        let s = &summaries[0];
        assert!(s.oracle_min.is_finite() && s.oracle_min > 0.0);
        assert!((s.oracle_factor - 4.0).abs() < 1e-12);
        assert!((s.residual - (s.adaptive_risk - 4.0 * s.oracle_min)).abs() < 1e-12);
        // Every family-member row's mean risk is >= the reported minimum.
        for row in report.rows.iter().filter(|r| r.estimator.starts_with("member")) {
            assert!(row.risk_n_mean.unwrap() >= s.oracle_min - 1e-15);
        }
    }
}
