//! Monte-Carlo study of the accuracy-gated gradient estimator
//! `G_joint = I · G_dec`, `I ~ Bernoulli(p_acc)` independent of
//! `G_dec ~ N(μ, diag(σ²))`.
//!
//! Variance of a vector estimator is `E‖Z − E Z‖²` throughout. The variance
//! identity is tested against the same sample's moments of `G_dec`, so no
//! population quantity enters the comparison.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::moments::VecMoments;
use super::LabError;

/// Draws per shard. Shards are the unit of seeding and of parallelism, so
/// the result does not depend on the thread count.
pub const SHARD_SIZE: usize = 1 << 15;

/// Floor for the relative-error denominator.
pub const REL_EPS: f64 = 1e-12;

/// Relative slack allowed when checking the SNR inequality.
pub const SNR_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatedEstimatorConfig {
    pub p_acc: f64,
    pub dec_mean: Vec<f64>,
    /// Diagonal of the covariance of `G_dec`.
    pub dec_cov: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

impl GatedEstimatorConfig {
    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: &str| Err(LabError::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.p_acc) {
            return bad("p_acc must lie in [0, 1]");
        }
        if self.dec_mean.is_empty() {
            return bad("dimension must be at least 1");
        }
        if self.dec_mean.len() != self.dec_cov.len() {
            return bad("dec_mean and dec_cov must have the same dimension");
        }
        if self.dec_cov.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.dec_mean.iter().any(|m| !m.is_finite()) {
            return bad("moments must be finite with non-negative variances");
        }
        if self.n_samples == 0 {
            return bad("n_samples must be at least 1");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dec_mean.len()
    }
}

/// How the accuracy indicator is applied. `Leaky` lets a fraction of the
/// decoupled gradient through a closed gate and exists as a negative control
/// for the variance identity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum Gate {
    #[default]
    Indicator,
    Leaky(f64),
}

impl Gate {
    fn factor(self, open: bool) -> f64 {
        match (self, open) {
            (_, true) => 1.0,
            (Gate::Indicator, false) => 0.0,
            (Gate::Leaky(l), false) => l,
        }
    }
}

/// One draw of the gated estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct GatedEstimatorSample {
    pub indicator: u8,
    pub g_dec: Vec<f64>,
    pub g_joint: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub p_acc: f64,
    pub dim: usize,
    pub n_samples: usize,
    pub empirical_var_joint: f64,
    pub empirical_var_dec: f64,
    pub empirical_mean_dec_normsq: f64,
    pub empirical_mean_joint_normsq: f64,
    /// `p·Var̂(G_dec) + p(1−p)·‖Ê G_dec‖²` from the same draws.
    pub predicted_var_joint: f64,
    pub snr_joint: f64,
    pub snr_dec: f64,
    pub relative_error: f64,
}

fn draw_shard(cfg: &GatedEstimatorConfig, gate: Gate, shard: usize) -> (VecMoments, VecMoments) {
    let start = shard * SHARD_SIZE;
    let len = SHARD_SIZE.min(cfg.n_samples - start);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(shard as u64);
    let sd: Vec<f64> = cfg.dec_cov.iter().map(|v| v.sqrt()).collect();
    let d = cfg.dim();
    let mut dec = VecMoments::new(d);
    let mut joint = VecMoments::new(d);
    let mut sample = GatedEstimatorSample {
        indicator: 0,
        g_dec: vec![0.0; d],
        g_joint: vec![0.0; d],
    };
    for _ in 0..len {
        draw_into(&mut rng, cfg, &sd, gate, &mut sample);
        dec.push(&sample.g_dec);
        joint.push(&sample.g_joint);
    }
    (dec, joint)
}

fn draw_into<R: Rng + ?Sized>(rng: &mut R, cfg: &GatedEstimatorConfig, sd: &[f64], gate: Gate, out: &mut GatedEstimatorSample) {
    let open = rng.random_bool(cfg.p_acc);
    out.indicator = u8::from(open);
    let f = gate.factor(open);
    let slots = out.g_dec.iter_mut().zip(out.g_joint.iter_mut());
    for ((m, s), (dec, joint)) in cfg.dec_mean.iter().zip(sd).zip(slots) {
        let z: f64 = rng.sample(StandardNormal);
        *dec = m + s * z;
        *joint = f * *dec;
    }
}

/// First `n` draws of the estimator, for inspection.
pub fn draw_samples(cfg: &GatedEstimatorConfig, n: usize) -> Vec<GatedEstimatorSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sd: Vec<f64> = cfg.dec_cov.iter().map(|v| v.sqrt()).collect();
    (0..n)
        .map(|_| {
            let mut s = GatedEstimatorSample {
                indicator: 0,
                g_dec: vec![0.0; cfg.dim()],
                g_joint: vec![0.0; cfg.dim()],
            };
            draw_into(&mut rng, cfg, &sd, Gate::Indicator, &mut s);
            s
        })
        .collect()
}

fn accumulate(cfg: &GatedEstimatorConfig, gate: Gate, threads: usize) -> (VecMoments, VecMoments) {
    let shards = cfg.n_samples.div_ceil(SHARD_SIZE);
    let threads = threads.clamp(1, shards.max(1));
    let mut parts: Vec<(usize, (VecMoments, VecMoments))> = if threads == 1 {
        (0..shards).map(|s| (s, draw_shard(cfg, gate, s))).collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    scope.spawn(move || {
                        (t..shards)
                            .step_by(threads)
                            .map(|s| (s, draw_shard(cfg, gate, s)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("shard worker panicked"))
                .collect()
        })
    };
    parts.sort_by_key(|(s, _)| *s);
    let mut dec = VecMoments::new(cfg.dim());
    let mut joint = VecMoments::new(cfg.dim());
    for (_, (d, j)) in &parts {
        dec.merge(d);
        joint.merge(j);
    }
    (dec, joint)
}

fn snr(mean_normsq: f64, var: f64) -> f64 {
    if var > 0.0 {
        mean_normsq / var
    } else if mean_normsq == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn simulate_gated(cfg: &GatedEstimatorConfig) -> Result<VarianceReport, LabError> {
    simulate_gated_with(cfg, Gate::Indicator, 1)
}

pub fn simulate_gated_with(cfg: &GatedEstimatorConfig, gate: Gate, threads: usize) -> Result<VarianceReport, LabError> {
    cfg.validate()?;
    let (dec, joint) = accumulate(cfg, gate, threads);
    let p = cfg.p_acc;
    let var_dec = dec.variance();
    let var_joint = joint.variance();
    let mean_dec_sq = dec.mean_norm_sq();
    let predicted = p * var_dec + p * (1.0 - p) * mean_dec_sq;
    if predicted == 0.0 && var_joint != 0.0 {
        return Err(LabError::DegenerateConfig(format!(
            "predicted joint variance is 0 but empirical is {var_joint}"
        )));
    }
    Ok(VarianceReport {
        p_acc: p,
        dim: cfg.dim(),
        n_samples: cfg.n_samples,
        empirical_var_joint: var_joint,
        empirical_var_dec: var_dec,
        empirical_mean_dec_normsq: mean_dec_sq,
        empirical_mean_joint_normsq: joint.mean_norm_sq(),
        predicted_var_joint: predicted,
        snr_joint: snr(joint.mean_norm_sq(), var_joint),
        snr_dec: snr(mean_dec_sq, var_dec),
        relative_error: (var_joint - predicted).abs() / predicted.max(REL_EPS),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

/// `SNR̂(G_joint) ≤ p·SNR̂(G_dec)·(1 + tol)` on one simulated sample.
pub fn check_snr(cfg: &GatedEstimatorConfig) -> Result<SnrCheck, LabError> {
    check_snr_report(&simulate_gated(cfg)?, SNR_TOL)
}

pub fn check_snr_report(r: &VarianceReport, tol: f64) -> Result<SnrCheck, LabError> {
    if r.empirical_var_dec <= 0.0 || r.empirical_var_joint <= 0.0 {
        return Err(LabError::DegenerateConfig("SNR undefined for a zero-variance estimator".into()));
    }
    let lhs = r.snr_joint;
    let rhs = r.p_acc * r.snr_dec;
    Ok(SnrCheck {
        holds: lhs <= rhs * (1.0 + tol),
        lhs,
        rhs,
    })
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// `p·tr Σ + p(1−p)‖μ‖²`.
pub fn population_var_joint(p: f64, mean: &[f64], var: &[f64]) -> f64 {
    p * var.iter().sum::<f64>() + p * (1.0 - p) * norm_sq(mean)
}

/// `p‖μ‖² / (tr Σ + (1−p)‖μ‖²)`.
pub fn population_snr_joint(p: f64, mean: &[f64], var: &[f64]) -> f64 {
    let m = norm_sq(mean);
    p * m / (var.iter().sum::<f64>() + (1.0 - p) * m)
}

pub fn population_snr_dec(mean: &[f64], var: &[f64]) -> f64 {
    norm_sq(mean) / var.iter().sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: f64, mean: Vec<f64>, var: Vec<f64>, n: usize) -> GatedEstimatorConfig {
        GatedEstimatorConfig {
            p_acc: p,
            dec_mean: mean,
            dec_cov: var,
            n_samples: n,
            seed: 7,
        }
    }

    #[test]
    fn open_gate_copies_decoupled_draws() {
        let r = simulate_gated(&cfg(1.0, vec![1.0, -2.0], vec![0.5, 3.0], 50_000)).unwrap();
        assert_eq!(r.empirical_var_joint, r.empirical_var_dec);
        assert_eq!(r.relative_error, 0.0);
        let s = check_snr(&cfg(1.0, vec![1.0, -2.0], vec![0.5, 3.0], 50_000)).unwrap();
        assert_eq!(s.lhs, s.rhs);
        assert!(s.holds);
    }

    #[test]
    fn closed_gate_has_zero_variance() {
        let r = simulate_gated(&cfg(0.0, vec![2.0], vec![1.0], 10_000)).unwrap();
        assert_eq!(r.empirical_var_joint, 0.0);
        assert_eq!(r.relative_error, 0.0);
        assert!(check_snr(&cfg(0.0, vec![2.0], vec![1.0], 10_000)).is_err());
    }

    #[test]
    fn samples_satisfy_gating() {
        for s in draw_samples(&cfg(0.3, vec![1.0, 2.0], vec![1.0, 1.0], 1), 200) {
            for (j, d) in s.g_joint.iter().zip(&s.g_dec) {
                assert_eq!(*j, f64::from(s.indicator) * d);
            }
        }
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let c = cfg(0.4, vec![0.5; 3], vec![1.0, 2.0, 0.5], 5 * SHARD_SIZE + 123);
        let a = simulate_gated_with(&c, Gate::Indicator, 1).unwrap();
        let b = simulate_gated_with(&c, Gate::Indicator, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn leaky_gate_breaks_identity() {
        let c = cfg(0.5, vec![2.0], vec![1.0], 200_000);
        let r = simulate_gated_with(&c, Gate::Leaky(0.5), 1).unwrap();
        assert!(r.relative_error > 0.1, "{r:?}");
        let z = cfg(0.0, vec![2.0], vec![1.0], 1000);
        assert!(matches!(simulate_gated_with(&z, Gate::Leaky(0.5), 1), Err(LabError::DegenerateConfig(_))));
    }

    #[test]
    fn invalid_configs() {
        assert!(simulate_gated(&cfg(1.5, vec![1.0], vec![1.0], 10)).is_err());
        assert!(simulate_gated(&cfg(0.5, vec![], vec![], 10)).is_err());
        assert!(simulate_gated(&cfg(0.5, vec![1.0], vec![-1.0], 10)).is_err());
        assert!(simulate_gated(&cfg(0.5, vec![1.0], vec![1.0], 0)).is_err());
    }

    #[test]
    fn closed_forms_for_reference_setting() {
        // p = 0.5, μ = 2, σ² = 1
        assert_eq!(population_var_joint(0.5, &[2.0], &[1.0]), 1.5);
        assert!((population_snr_joint(0.5, &[2.0], &[1.0]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(0.5 * population_snr_dec(&[2.0], &[1.0]), 2.0);
    }

    #[test]
    fn predicted_snr_increases_with_p() {
        let (m, v) = (vec![1.0, -0.5], vec![2.0, 0.3]);
        let grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
        for w in grid.windows(2) {
            assert!(population_snr_joint(w[1], &m, &v) > population_snr_joint(w[0], &m, &v));
        }
    }
}
