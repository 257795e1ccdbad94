//! Scratch harness for tuning the shipped bench configs.

use driftforge::bench::{delta_n, gamma_failure_rate, oracle_report, EstimatorKind, ExperimentConfig};

fn cfg(body: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(body).unwrap()
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "gamma".to_string());

    match which.as_str() {
        "gamma" => {
            for dt in ["1e-3", "5e-4", "2e-4", "1e-4"] {
                let config = cfg(&format!(
                    r#"
                    drift = "ou4"
                    a = -0.3
                    b = 0.3
                    T_list = [100.0, 400.0]
                    reps = 500
                    base_seed = 1
                    dt = {dt}
                "#
                ));
                let start = std::time::Instant::now();
                let (rates, _) = gamma_failure_rate(&config).unwrap();
                for r in &rates {
                    println!(
                        "dt = {dt} T = {}: gamma-fail rate = {:.4} over {} reps",
                        r.horizon, r.rate, r.reps
                    );
                }
                println!("  ({:.1?})", start.elapsed());
            }
        }
        "gamma-ou" => {
            let config = cfg(r#"
                drift = "ou"
                a = -0.3
                b = 0.3
                T_list = [100.0, 400.0]
                reps = 500
                base_seed = 1
            "#);
            let (rates, _) = gamma_failure_rate(&config).unwrap();
            for r in rates {
                println!("unit OU T = {}: gamma-fail rate = {:.4} over {} reps", r.horizon, r.rate, r.reps);
            }
        }
        "improve" => {
            let config = cfg(r#"
                drift = "ou4"
                a = -0.3
                b = 0.3
                T = 400.0
                reps = 300
                d = 20
                base_seed = 1
                dt = 2e-4
            "#);
            let (s, report) = delta_n(&config, None).unwrap();
            println!(
                "delta_hat = {:.6} se = {:.6} c = {:.6} c^2 = {:.6} -> delta + 2se = {:.6} vs -c^2 = {:.6}",
                s.delta_hat, s.se, s.c, s.c_sq, s.delta_hat + 2.0 * s.se, -s.c_sq
            );
            for row in &report.rows {
                println!(
                    "  {}: risk_n = {:?} gamma_fail = {:?}",
                    row.estimator, row.risk_n_mean, row.gamma_fail_rate
                );
            }
        }
        "oracle" => {
            let config = cfg(r#"
                drift = "ou4"
                a = -0.3
                b = 0.3
                T_list = [100.0, 400.0]
                reps = 200
                base_seed = 1
                dt = 2e-4
            "#);
            let (summaries, _) = oracle_report(&config).unwrap();
            for s in summaries {
                println!(
                    "n = {}: adaptive = {:.5} (se {:.5}), min = {:.5}, ratio = {:.3}, residual = {:.5}",
                    s.n, s.adaptive_risk, s.adaptive_se, s.oracle_min, s.oracle_ratio, s.residual
                );
            }
        }
        "risk" => {
            let config = cfg(r#"
                drift = "ou4"
                a = -0.3
                b = 0.3
                T = 400.0
                reps = 100
                d = 20
                base_seed = 1
            "#);
            let report = mc(&config);
            for row in &report.rows {
                println!(
                    "{}: risk_n = {:.5} (se {:.5}) risk_l2 = {:.5} gamma_fail = {:.3}",
                    row.estimator,
                    row.risk_n_mean.unwrap(),
                    row.risk_n_se.unwrap(),
                    row.risk_l2_mean.unwrap(),
                    row.gamma_fail_rate.unwrap()
                );
            }
        }
        "density" => {
            // Occupation-density consistency at the origin for unit-rate OU:
            // 50 seeds, T = 1000 schedule (warmup 500), grid point at 0.
            use driftforge::{drift_by_label, estimate_density, simulate_path, GridSpec};
            let drift = drift_by_label("ou").unwrap();
            let grid = GridSpec::new(-0.5, 0.5, 1000).unwrap();
            let k0 = 499; // x_500 = 0
            assert!(grid.points[k0].abs() < 1e-12);
            let mut values = Vec::new();
            for seed in 0..50u64 {
                let path = simulate_path(&drift, 0.0, 500.0, 1e-3, 1000 + seed).unwrap();
                let q = estimate_density(&path, 500.0, &grid).unwrap();
                values.push(q[k0]);
            }
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let se = (var / n).sqrt();
            let target = 1.0 / std::f64::consts::PI.sqrt();
            println!(
                "q_hat(0): mean = {:.5}, se = {:.5}, target = {:.5}, |diff|/se = {:.2}",
                mean,
                se,
                target,
                (mean - target).abs() / se
            );
        }
        "residuals" => {
            // Pooled standardized residuals sqrt(H)(S_tilde - S - B) over
            // attained (rep, k) pairs at T = 100.
            use driftforge::{drift_by_label, regression_data, schedule_params, simulate_path, GridSpec};
            let drift = drift_by_label("ou4").unwrap();
            let schedule = schedule_params(100.0).unwrap();
            let grid = GridSpec::new(-0.3, 0.3, schedule.n).unwrap();
            let mut pooled = Vec::new();
            for rep in 0..150u64 {
                let path = simulate_path(&drift, 0.0, 100.0, 1e-3, 500 + rep).unwrap();
                let obs = regression_data(&path, &grid, &schedule, Some(&drift)).unwrap();
                let b = obs.approx_error.as_ref().unwrap();
                for k in 0..grid.n {
                    if obs.attained[k] {
                        let xi = obs.thresholds[k].sqrt()
                            * (obs.s_tilde[k] - drift.eval(grid.points[k]) - b[k]);
                        pooled.push(xi);
                    }
                }
            }
            let n = pooled.len() as f64;
            let mean = pooled.iter().sum::<f64>() / n;
            let var = pooled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            println!(
                "pooled xi over {} pairs: mean = {:.5}, var = {:.5}",
                pooled.len(),
                mean,
                var
            );
        }
        "gamma-seed" => {
            let config = cfg(r#"
                drift = "ou4"
                a = -0.3
                b = 0.3
                T_list = [100.0, 400.0]
                reps = 500
                base_seed = 777
                dt = 1e-4
            "#);
            let (rates, _) = gamma_failure_rate(&config).unwrap();
            for r in rates {
                println!("seed 777 T = {}: rate = {:.4}", r.horizon, r.rate);
            }
        }
        other => eprintln!("unknown probe '{other}'"),
    }
}

fn mc(config: &ExperimentConfig) -> driftforge::RiskReport {
    driftforge::bench::mc_risk(config, EstimatorKind::Adaptive, None).unwrap()
}
