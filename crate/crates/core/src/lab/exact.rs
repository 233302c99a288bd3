//! Exact expected gradients of the toy policy by enumerating its finite
//! action space.
//!
//! The log-probability factorizes as `log π(ŷ | x) + log π(e | x)`, the
//! second term present only when a box is emitted. The format reward is 1
//! on every protocol-conformant toy output, so it contributes
//! `Σ_a π(a) ∇ log π(a) = 0` and is left out of the objectives below.

use serde::{Deserialize, Serialize};

use crate::reward::{protocol_mode, MetaVerifierClient, RuleMetaVerifier};
use crate::trainer::features::{featurize, Features, JUDGMENT_FEATURES};
use crate::trainer::policy::{Action, ToyPolicy, N_PARAMS};
use crate::trainer::render_action;
use crate::types::{Judgment, LabeledSample, MetaKind, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    /// `R_acc · (1[y=True] + 1[y=False] · R_meta)` over the full output.
    Joint,
    /// Judgment stream: `R_acc` on the judgment head. Grounding stream:
    /// `R_meta` on the grounding head.
    Decoupled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactGradient {
    pub judgment: Vec<f64>,
    pub grounding: Vec<f64>,
    /// Enumerated terms whose accuracy reward is 0 (Joint only).
    pub gated_terms: usize,
    /// Of those, terms with any non-zero grounding-head component.
    pub gated_nonzero_terms: usize,
}

impl ExactGradient {
    pub fn full(&self) -> Vec<f64> {
        self.judgment.iter().chain(&self.grounding).copied().collect()
    }

    pub fn grounding_norm(&self) -> f64 {
        norm(&self.grounding)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Meta reward of boxing each candidate, as the rule meta-verifier scores
/// the rendered output.
fn candidate_meta(sample: &LabeledSample, f: &Features, kind: MetaKind) -> Vec<f64> {
    if sample.label().is_true() {
        return vec![0.0; f.n_candidates()];
    }
    let meta = RuleMetaVerifier::new(kind);
    (0..f.n_candidates())
        .map(|k| {
            let a = Action {
                judgment: Judgment::False,
                candidate: Some(k),
            };
            meta.score(sample, &render_action(f, &a, protocol_mode(kind)))
        })
        .collect()
}

/// Every `(action, probability, accuracy reward, objective reward, heads)`
/// term of the objective's expectation.
struct Term {
    action: Action,
    prob: f64,
    accuracy: u8,
    reward: f64,
    judgment_head: bool,
    grounding_head: bool,
}

fn terms(policy: &ToyPolicy, sample: &LabeledSample, f: &Features, objective: Objective, kind: MetaKind) -> Vec<Term> {
    let y = sample.label();
    let meta = candidate_meta(sample, f, kind);
    let pg = policy.grounding_probs(f);
    let pj = |j| policy.judgment_log_prob(f, j).exp();
    let acc = |j: Judgment| u8::from(j == y);
    match (objective, sample.stream()) {
        (Objective::Joint, _) => {
            let mut out = vec![Term {
                action: Action {
                    judgment: Judgment::True,
                    candidate: None,
                },
                prob: pj(Judgment::True),
                accuracy: acc(Judgment::True),
                reward: f64::from(acc(Judgment::True)) * f64::from(u8::from(y.is_true())),
                judgment_head: true,
                grounding_head: true,
            }];
            for k in 0..f.n_candidates() {
                let a = acc(Judgment::False);
                out.push(Term {
                    action: Action {
                        judgment: Judgment::False,
                        candidate: Some(k),
                    },
                    prob: pj(Judgment::False) * pg[k],
                    accuracy: a,
                    reward: f64::from(a) * if y.is_true() { 1.0 } else { meta[k] },
                    judgment_head: true,
                    grounding_head: true,
                });
            }
            out
        }
        (Objective::Decoupled, Stream::Judgment) => [Judgment::True, Judgment::False]
            .into_iter()
            .map(|j| Term {
                action: Action {
                    judgment: j,
                    candidate: None,
                },
                prob: pj(j),
                accuracy: acc(j),
                reward: f64::from(acc(j)),
                judgment_head: true,
                grounding_head: false,
            })
            .collect(),
        (Objective::Decoupled, Stream::Grounding) => (0..f.n_candidates())
            .map(|k| Term {
                action: Action {
                    judgment: Judgment::False,
                    candidate: Some(k),
                },
                prob: pg[k],
                accuracy: 1,
                reward: meta[k],
                judgment_head: false,
                grounding_head: true,
            })
            .collect(),
    }
}

fn term_grad(policy: &ToyPolicy, f: &Features, t: &Term) -> Vec<f64> {
    let mut g = policy.grad_log_prob(f, &t.action);
    if !t.judgment_head {
        g[..JUDGMENT_FEATURES].iter_mut().for_each(|x| *x = 0.0);
    }
    if !t.grounding_head {
        g[JUDGMENT_FEATURES..].iter_mut().for_each(|x| *x = 0.0);
    }
    let w = t.prob * t.reward;
    g.iter_mut().for_each(|x| *x *= w);
    g
}

pub fn exact_policy_gradient(policy: &ToyPolicy, sample: &LabeledSample, objective: Objective) -> ExactGradient {
    exact_policy_gradient_with(policy, sample, objective, MetaKind::default())
}

pub fn exact_policy_gradient_with(
    policy: &ToyPolicy,
    sample: &LabeledSample,
    objective: Objective,
    kind: MetaKind,
) -> ExactGradient {
    let f = featurize(sample.scene(), sample.prompt(), policy.grid_cells());
    exact_gradient_features(policy, sample, &f, objective, kind)
}

fn exact_gradient_features(
    policy: &ToyPolicy,
    sample: &LabeledSample,
    f: &Features,
    objective: Objective,
    kind: MetaKind,
) -> ExactGradient {
    let mut total = vec![0.0; N_PARAMS];
    let (mut gated, mut gated_nonzero) = (0, 0);
    for t in terms(policy, sample, f, objective, kind) {
        let g = term_grad(policy, f, &t);
        if objective == Objective::Joint && t.accuracy == 0 {
            gated += 1;
            if g[JUDGMENT_FEATURES..].iter().any(|x| *x != 0.0) {
                gated_nonzero += 1;
            }
        }
        total.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let grounding = total.split_off(JUDGMENT_FEATURES);
    ExactGradient {
        judgment: total,
        grounding,
        gated_terms: gated,
        gated_nonzero_terms: gated_nonzero,
    }
}

/// `Σ_a π(a) R(a)` for the objective of [`exact_policy_gradient`].
pub fn exact_objective(policy: &ToyPolicy, sample: &LabeledSample, objective: Objective) -> f64 {
    let f = featurize(sample.scene(), sample.prompt(), policy.grid_cells());
    terms(policy, sample, &f, objective, MetaKind::default())
        .iter()
        .map(|t| t.prob * t.reward)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatingBound {
    pub bound_holds: bool,
    /// `‖∇J_joint^(e)‖` over the dataset average.
    pub lhs_norm: f64,
    pub p_acc: f64,
    /// `p_acc · max_x E_e ‖R_meta ∇ log π(e | x)‖`.
    pub rhs: f64,
    /// `mean_x P(ŷ = y | x) · E_e ‖R_meta ∇ log π(e | x)‖`, which sits
    /// between `lhs_norm` and `rhs`.
    pub tight_rhs: f64,
}

/// Slack for floating-point summation in the bound comparison.
pub const BOUND_SLACK: f64 = 1e-12;

pub fn check_gating_bound(policy: &ToyPolicy, dataset: &[LabeledSample]) -> GatingBound {
    check_gating_bound_with(policy, dataset, MetaKind::default())
}

pub fn check_gating_bound_with(policy: &ToyPolicy, dataset: &[LabeledSample], kind: MetaKind) -> GatingBound {
    let n = dataset.len().max(1) as f64;
    let mut grad = vec![0.0; N_PARAMS - JUDGMENT_FEATURES];
    let (mut p_acc, mut tight, mut sup) = (0.0, 0.0, 0.0f64);
    for s in dataset {
        let f = featurize(s.scene(), s.prompt(), policy.grid_cells());
        let joint = Objective::Joint;
        let g = exact_gradient_features(policy, s, &f, joint, kind);
        grad.iter_mut().zip(&g.grounding).for_each(|(a, b)| *a += b / n);

        let correct = policy.judgment_log_prob(&f, s.label()).exp();
        p_acc += correct / n;
        let meta = candidate_meta(s, &f, kind);
        let pg = policy.grounding_probs(&f);
        let c: f64 = (0..f.n_candidates())
            .map(|k| pg[k] * meta[k].abs() * norm(&policy.grad_grounding(&f, k)))
            .sum();
        tight += correct * c / n;
        sup = sup.max(c);
    }
    let lhs = norm(&grad);
    let rhs = p_acc * sup;
    GatingBound {
        bound_holds: lhs <= rhs + BOUND_SLACK,
        lhs_norm: lhs,
        p_acc,
        rhs,
        tight_rhs: tight,
    }
}

/// Floor of the relative-error denominator, so components that are zero
/// analytically are compared absolutely. Rounding alone puts about
/// `1e-16 · |log π| / h` into a central difference, around 1e-10 at
/// `h = 1e-5`.
pub const FD_FLOOR: f64 = 1e-5;

/// Largest relative error between the analytic `∇_θ log π(a)` and its
/// central difference, over every action and parameter.
pub fn finite_difference_check(policy: &ToyPolicy, sample: &LabeledSample, h: f64) -> f64 {
    assert!(h > 0.0, "step must be positive");
    let f = featurize(sample.scene(), sample.prompt(), policy.grid_cells());
    let mut actions = vec![Action {
        judgment: Judgment::True,
        candidate: None,
    }];
    actions.extend((0..f.n_candidates()).map(|k| Action {
        judgment: Judgment::False,
        candidate: Some(k),
    }));
    let theta = policy.params();
    let mut worst = 0.0f64;
    let mut shifted = policy.clone();
    for a in &actions {
        let analytic = policy.grad_log_prob(&f, a);
        for i in 0..N_PARAMS {
            let mut t = theta.clone();
            t[i] = theta[i] + h;
            shifted.set_params(&t);
            let up = shifted.log_prob(&f, a);
            t[i] = theta[i] - h;
            shifted.set_params(&t);
            let down = shifted.log_prob(&f, a);
            let numeric = (up - down) / (2.0 * h);
            let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(FD_FLOOR);
            worst = worst.max(err);
        }
    }
    worst
}
