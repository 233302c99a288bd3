//! Linear-softmax verifier policy with a judgment head and a grounding head.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::features::{Features, DEFAULT_GRID_CELLS, GROUNDING_FEATURES, JUDGMENT_FEATURES};
use super::TrainerError;
use crate::types::Judgment;

/// A sampled or decoded action: the judgment and, when a rationale is
/// emitted, the index of the chosen candidate region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub judgment: Judgment,
    pub candidate: Option<usize>,
}

/// `π(True | x) = σ(w·φ(x) / τ)`; `π(e = k | x) ∝ exp(v·ψ_k(x) / τ)`.
///
/// The grounding head scores every candidate with one shared weight vector
/// over per-candidate features, so the parameter count does not depend on
/// the number of candidates. Parameters flatten as `[w, v]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    judgment_w: Vec<f64>,
    grounding_w: Vec<f64>,
    temperature: f64,
    grid_cells: u32,
}

pub const N_PARAMS: usize = JUDGMENT_FEATURES + GROUNDING_FEATURES;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

impl ToyPolicy {
    pub fn new(judgment_w: Vec<f64>, grounding_w: Vec<f64>, temperature: f64) -> Result<Self, TrainerError> {
        if judgment_w.len() != JUDGMENT_FEATURES || grounding_w.len() != GROUNDING_FEATURES {
            return Err(TrainerError::InvalidConfig(format!(
                "policy needs {JUDGMENT_FEATURES} judgment and {GROUNDING_FEATURES} grounding weights"
            )));
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(TrainerError::InvalidConfig("temperature must be positive".into()));
        }
        if judgment_w.iter().chain(&grounding_w).any(|w| !w.is_finite()) {
            return Err(TrainerError::InvalidConfig("weights must be finite".into()));
        }
        Ok(ToyPolicy {
            judgment_w,
            grounding_w,
            temperature,
            grid_cells: DEFAULT_GRID_CELLS,
        })
    }

    pub fn zeros() -> Self {
        ToyPolicy::new(vec![0.0; JUDGMENT_FEATURES], vec![0.0; GROUNDING_FEATURES], 1.0).expect("valid")
    }

    /// Saturated weights that read the consistency features: True exactly
    /// on consistent pairs, and the flagged candidate over everything else.
    pub fn oracle() -> Self {
        let b = 20.0;
        ToyPolicy::new(
            vec![b, -2.0 * b, 0.0, -2.0 * b, -2.0 * b],
            vec![0.0, 0.0, 0.0, -b, b, b, b, b],
            1.0,
        )
        .expect("valid")
    }

    /// Judgment head of the oracle with flipped sign and magnitude
    /// `strength`, so `p_acc` is about `σ(−strength)`. The grounding head
    /// adds `grid_bias` to the logit of every plain grid cell and is
    /// otherwise uniform.
    pub fn inverted(strength: f64, grid_bias: f64) -> Self {
        let s = strength;
        ToyPolicy::new(
            vec![-s, 2.0 * s, 0.0, 2.0 * s, 2.0 * s],
            vec![0.0, 0.0, 0.0, grid_bias, 0.0, 0.0, 0.0, 0.0],
            1.0,
        )
        .expect("valid")
    }

    /// Weights drawn i.i.d. from `N(0, scale²)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> Self {
        let n = Normal::new(0.0, scale).expect("finite scale");
        let mut draw = |k| (0..k).map(|_| n.sample(rng)).collect::<Vec<f64>>();
        let j = draw(JUDGMENT_FEATURES);
        let g = draw(GROUNDING_FEATURES);
        ToyPolicy::new(j, g, 1.0).expect("valid")
    }

    pub fn with_grid_cells(mut self, cells: u32) -> Self {
        self.grid_cells = cells.max(1);
        self
    }

    pub fn grid_cells(&self) -> u32 {
        self.grid_cells
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn judgment_weights(&self) -> &[f64] {
        &self.judgment_w
    }

    pub fn grounding_weights(&self) -> &[f64] {
        &self.grounding_w
    }

    pub fn params(&self) -> Vec<f64> {
        self.judgment_w.iter().chain(&self.grounding_w).copied().collect()
    }

    pub fn set_params(&mut self, theta: &[f64]) {
        assert_eq!(theta.len(), N_PARAMS);
        self.judgment_w.copy_from_slice(&theta[..JUDGMENT_FEATURES]);
        self.grounding_w.copy_from_slice(&theta[JUDGMENT_FEATURES..]);
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|w| w.is_finite())
    }

    fn judgment_logit(&self, f: &Features) -> f64 {
        dot(&self.judgment_w, &f.judgment) / self.temperature
    }

    fn grounding_logits(&self, f: &Features) -> Vec<f64> {
        f.grounding
            .iter()
            .map(|psi| dot(&self.grounding_w, psi) / self.temperature)
            .collect()
    }

    pub fn p_true(&self, f: &Features) -> f64 {
        self.judgment_log_prob(f, Judgment::True).exp()
    }

    pub fn judgment_log_prob(&self, f: &Features, j: Judgment) -> f64 {
        let z = self.judgment_logit(f);
        match j {
            Judgment::True => -softplus(-z),
            Judgment::False => -softplus(z),
        }
    }

    pub fn grounding_log_probs(&self, f: &Features) -> Vec<f64> {
        let logits = self.grounding_logits(f);
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        logits.iter().map(|l| l - lse).collect()
    }

    pub fn grounding_probs(&self, f: &Features) -> Vec<f64> {
        self.grounding_log_probs(f).iter().map(|l| l.exp()).collect()
    }

    /// `log π(ŷ | x) + log π(e | x)`, the second term only when a candidate
    /// is present.
    pub fn log_prob(&self, f: &Features, a: &Action) -> f64 {
        let lj = self.judgment_log_prob(f, a.judgment);
        match a.candidate {
            Some(k) => lj + self.grounding_log_probs(f)[k],
            None => lj,
        }
    }

    /// `∇_w log π(ŷ | x)`.
    pub fn grad_judgment(&self, f: &Features, j: Judgment) -> Vec<f64> {
        let p = self.p_true(f);
        let c = if j.is_true() { 1.0 - p } else { -p };
        f.judgment.iter().map(|x| c * x / self.temperature).collect()
    }

    /// `∇_v log π(e = k | x) = (ψ_k − Σ_j π_j ψ_j) / τ`.
    pub fn grad_grounding(&self, f: &Features, k: usize) -> Vec<f64> {
        let probs = self.grounding_probs(f);
        (0..GROUNDING_FEATURES)
            .map(|i| {
                let mean: f64 = probs.iter().zip(&f.grounding).map(|(p, psi)| p * psi[i]).sum();
                (f.grounding[k][i] - mean) / self.temperature
            })
            .collect()
    }

    /// Gradient of [`ToyPolicy::log_prob`] over the flattened parameters.
    pub fn grad_log_prob(&self, f: &Features, a: &Action) -> Vec<f64> {
        let mut g = self.grad_judgment(f, a.judgment);
        match a.candidate {
            Some(k) => g.extend(self.grad_grounding(f, k)),
            None => g.extend(std::iter::repeat_n(0.0, GROUNDING_FEATURES)),
        }
        g
    }

    /// Argmax per head; a candidate is decoded only for a False judgment
    /// unless `force_box`.
    pub fn greedy(&self, f: &Features, force_box: bool) -> Action {
        let judgment = Judgment::from_bool(self.judgment_logit(f) >= 0.0);
        let candidate = (force_box || !judgment.is_true()).then(|| self.greedy_candidate(f));
        Action { judgment, candidate }
    }

    pub fn greedy_candidate(&self, f: &Features) -> usize {
        argmax(&self.grounding_logits(f))
    }

    pub fn sample<R: Rng + ?Sized>(&self, f: &Features, force_box: bool, rng: &mut R) -> Action {
        let judgment = Judgment::from_bool(rng.random::<f64>() < self.p_true(f));
        let candidate = (force_box || !judgment.is_true()).then(|| {
            let probs = self.grounding_probs(f);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (k, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    return k;
                }
            }
            probs.len() - 1
        });
        Action { judgment, candidate }
    }
}
