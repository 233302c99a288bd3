//! Numerical checks of accuracy gating: Monte-Carlo study of the gated
//! estimator ([`gated`]) and exact enumeration over the toy policy
//! ([`exact`]).

pub mod exact;
pub mod gated;
pub mod moments;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exact::{
    check_gating_bound, exact_objective, exact_policy_gradient, finite_difference_check, ExactGradient, GatingBound,
    Objective,
};
pub use gated::{
    check_snr, population_snr_dec, population_snr_joint, population_var_joint, simulate_gated, simulate_gated_with,
    Gate, GatedEstimatorConfig, GatedEstimatorSample, SnrCheck, VarianceReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("invalid estimator config: {0}")]
    InvalidConfig(String),
    #[error("degenerate config: {0}")]
    DegenerateConfig(String),
}

/// Population moments of `G_dec` for one sweep setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSetting {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySweep {
    pub p_values: Vec<f64>,
    pub settings: Vec<EstimatorSetting>,
    pub n_samples: usize,
    pub seed: u64,
    pub identity_tol: f64,
    pub snr_tol: f64,
    pub closed_form_tol: f64,
}

impl TheorySweep {
    pub fn empty() -> Self {
        TheorySweep {
            p_values: vec![],
            settings: vec![],
            ..TheorySweep::default()
        }
    }
}

/// Two settings in dimensions 1 and 8: `μ = 2·1, Σ = I`, and an
/// alternating-sign mean with growing variances.
pub fn default_settings() -> Vec<EstimatorSetting> {
    let mut out = Vec::new();
    for d in [1usize, 8] {
        out.push(EstimatorSetting {
            mean: vec![2.0; d],
            cov: vec![1.0; d],
        });
        out.push(EstimatorSetting {
            mean: (0..d)
                .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * (0.5 + 0.25 * i as f64))
                .collect(),
            cov: (0..d).map(|i| 0.5 + 0.25 * i as f64).collect(),
        });
    }
    out
}

impl Default for TheorySweep {
    fn default() -> Self {
        TheorySweep {
            p_values: vec![0.1, 0.5, 0.9],
            settings: default_settings(),
            n_samples: 1_000_000,
            seed: 0,
            identity_tol: 0.02,
            snr_tol: gated::SNR_TOL,
            closed_form_tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryRow {
    pub setting: usize,
    pub dim: usize,
    pub p: f64,
    pub predicted_var: f64,
    pub empirical_var: f64,
    pub snr_lhs: f64,
    pub snr_rhs: f64,
    pub relative_error: f64,
    pub closed_form_snr: f64,
}

pub const THEORY_CSV_HEADER: &str = "p,predicted_var,empirical_var,snr_lhs,snr_rhs,relative_error";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<TheoryRow>,
    /// One line per failed check, naming the statement it checks.
    pub failures: Vec<String>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn csv(&self) -> String {
        let mut s = String::from(THEORY_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.p, r.predicted_var, r.empirical_var, r.snr_lhs, r.snr_rhs, r.relative_error
            ));
        }
        s
    }
}

fn strictly_inside(p: f64) -> bool {
    p > 0.0 && p < 1.0
}

/// Runs every (setting, p) pair and collects failures of the variance
/// identity, the SNR inequality, the closed-form SNR, and monotonicity of
/// the closed-form SNR in p.
pub fn run_sweep(sweep: &TheorySweep, gate: Gate, threads: usize) -> Result<SweepReport, LabError> {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (si, setting) in sweep.settings.iter().enumerate() {
        let mu_sq: f64 = setting.mean.iter().map(|m| m * m).sum();
        for (pi, &p) in sweep.p_values.iter().enumerate() {
            let cfg = GatedEstimatorConfig {
                p_acc: p,
                dec_mean: setting.mean.clone(),
                dec_cov: setting.cov.clone(),
                n_samples: sweep.n_samples,
                seed: sweep.seed.wrapping_add((si * sweep.p_values.len() + pi) as u64),
            };
            let at = format!("setting {si} (d={}) p={p}", setting.mean.len());
            let r = match simulate_gated_with(&cfg, gate, threads) {
                Ok(r) => r,
                Err(e @ LabError::DegenerateConfig(_)) => {
                    failures.push(format!("variance identity: {at}: {e}"));
                    continue;
                }
                Err(e) => return Err(e),
            };
            if r.relative_error > sweep.identity_tol {
                failures.push(format!(
                    "variance identity: {at}: relative error {:.4} > {}",
                    r.relative_error, sweep.identity_tol
                ));
            }
            let snr = gated::check_snr_report(&r, sweep.snr_tol).ok();
            let closed = population_snr_joint(p, &setting.mean, &setting.cov);
            if strictly_inside(p) {
                match snr {
                    Some(c) if !c.holds => failures.push(format!("SNR bound: {at}: {} > {}", c.lhs, c.rhs)),
                    None => failures.push(format!("SNR bound: {at}: zero variance")),
                    _ => {}
                }
                if mu_sq > 0.0 {
                    let err = (r.snr_joint - closed).abs() / closed;
                    if err > sweep.closed_form_tol {
                        failures.push(format!("closed-form SNR: {at}: relative error {err:.4}"));
                    }
                }
            }
            rows.push(TheoryRow {
                setting: si,
                dim: setting.mean.len(),
                p,
                predicted_var: r.predicted_var_joint,
                empirical_var: r.empirical_var_joint,
                snr_lhs: snr.map_or(r.snr_joint, |c| c.lhs),
                snr_rhs: snr.map_or(p * r.snr_dec, |c| c.rhs),
                relative_error: r.relative_error,
                closed_form_snr: closed,
            });
        }
        if mu_sq > 0.0 && !snr_increasing(&setting.mean, &setting.cov, 99) {
            failures.push(format!("SNR monotonicity: setting {si}"));
        }
    }
    Ok(SweepReport { rows, failures })
}

/// Closed-form joint SNR strictly increasing on the grid `i / (n+1)`.
pub fn snr_increasing(mean: &[f64], cov: &[f64], n: usize) -> bool {
    let grid: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
    grid.windows(2)
        .all(|w| population_snr_joint(w[1], mean, cov) > population_snr_joint(w[0], mean, cov))
}
