//! Group-relative policy-gradient training (DAPO-lite) of the toy verifier
//! under the baseline, joint, and decoupled reward regimes.

pub mod checkpoint;
pub mod features;
pub mod policy;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::stream_counts;
use crate::par::par_map;
use crate::protocol::{build_output, ProtocolMode};
use crate::reward::{self, compose, match_boxes, protocol_mode, ratio_to_f64, RuleMetaVerifier};
use crate::types::{
    BBox, Judgment, LabeledSample, MetaKind, Point, Rationale, RewardMode, RewardVariant, Stream, VerifierOutput,
};
use features::{featurize, Features, DEFAULT_GRID_CELLS, JUDGMENT_FEATURES};
use policy::{Action, ToyPolicy, N_PARAMS};

pub use checkpoint::Checkpoint;

/// Floor for the group reward standard deviation.
pub const STD_EPS: f64 = 1e-8;

/// Think block emitted by every rollout.
pub const THINK_PLACEHOLDER: &str = "compare each described object with the scene";

/// Hit threshold for grounding evaluation.
pub const HIT_IOU: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainerError {
    #[error("regime/dataset mismatch: {0}")]
    RegimeDatasetMismatch(String),
    #[error("evaluation set has no judgment-stream samples")]
    EmptyEvalSet,
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("invalid trainer config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(String),
    #[error("reward: {0}")]
    Reward(#[from] reward::RewardError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Baseline,
    #[default]
    Joint,
    Decoupled,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Baseline => "baseline",
            Regime::Joint => "joint",
            Regime::Decoupled => "decoupled",
        }
    }

    pub fn variant(self) -> RewardVariant {
        match self {
            Regime::Baseline => RewardVariant::Baseline,
            Regime::Joint => RewardVariant::JointMeta,
            Regime::Decoupled => RewardVariant::Decoupled,
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Regime::Baseline),
            "joint" => Ok(Regime::Joint),
            "decoupled" => Ok(Regime::Decoupled),
            _ => Err(format!("unknown regime {s:?}")),
        }
    }
}

/// Starting weights.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PolicyInit {
    #[default]
    Zeros,
    /// See [`ToyPolicy::inverted`].
    Inverted {
        strength: f64,
        #[serde(default)]
        grid_bias: f64,
    },
    Oracle,
}

impl PolicyInit {
    pub fn build(self, temperature: f64, grid_cells: u32) -> Result<ToyPolicy, TrainerError> {
        let p = match self {
            PolicyInit::Zeros => ToyPolicy::zeros(),
            PolicyInit::Inverted { strength, grid_bias } => ToyPolicy::inverted(strength, grid_bias),
            PolicyInit::Oracle => ToyPolicy::oracle(),
        };
        Ok(ToyPolicy::new(p.judgment_weights().to_vec(), p.grounding_weights().to_vec(), temperature)?
            .with_grid_cells(grid_cells))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub regime: Regime,
    pub group_size: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    /// Probability-ratio clip `(low, high)` for the surrogate objective.
    pub clip_range: (f64, f64),
    pub drop_zero_variance_groups: bool,
    pub seed: u64,
    pub meta_kind: MetaKind,
    /// Optimizer passes over each batch of rollouts. With 1 the ratio is
    /// identically 1 and clipping never binds.
    pub inner_epochs: usize,
    pub temperature: f64,
    pub grid_cells: u32,
    pub init: PolicyInit,
    pub threads: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            regime: Regime::default(),
            group_size: 8,
            learning_rate: 0.1,
            steps: 100,
            batch_size: 16,
            clip_range: (0.8, 1.28),
            drop_zero_variance_groups: true,
            seed: 0,
            meta_kind: MetaKind::default(),
            inner_epochs: 1,
            temperature: 1.0,
            grid_cells: DEFAULT_GRID_CELLS,
            init: PolicyInit::default(),
            threads: 1,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainerError> {
        let bad = |m: &str| Err(TrainerError::InvalidConfig(m.to_string()));
        let (lo, hi) = self.clip_range;
        if self.group_size < 2 {
            return bad("group_size must be at least 2");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(lo < 1.0 && 1.0 < hi && lo > 0.0) {
            return bad("clip_range must satisfy 0 < low < 1 < high");
        }
        if self.inner_epochs == 0 {
            return bad("inner_epochs must be at least 1");
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return bad("temperature must be positive");
        }
        if self.grid_cells == 0 {
            return bad("grid_cells must be at least 1");
        }
        Ok(())
    }

    pub fn reward_mode(&self) -> RewardMode {
        RewardMode::new(self.regime.variant(), self.meta_kind)
    }
}

/// One row of the metrics stream. Step 0 is the evaluation of the initial
/// policy, before any rollout, so its reward and gradient norm are 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetrics {
    pub step: usize,
    pub regime: Regime,
    pub seed: u64,
    pub accuracy: f64,
    pub hit_rate: f64,
    pub mean_reward: f64,
    pub grad_norm: f64,
    pub p_acc: f64,
}

pub const METRICS_CSV_HEADER: &str = "step,regime,seed,accuracy,hit_rate,mean_reward,grad_norm,p_acc";

impl TrainingMetrics {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.step,
            self.regime.as_str(),
            self.seed,
            self.accuracy,
            self.hit_rate,
            self.mean_reward,
            self.grad_norm,
            self.p_acc
        )
    }
}

pub fn metrics_csv(rows: &[TrainingMetrics]) -> String {
    let mut s = String::from(METRICS_CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

pub fn metrics_jsonl(rows: &[TrainingMetrics]) -> String {
    rows.iter()
        .map(|r| serde_json::to_string(r).expect("metrics serialize") + "\n")
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub judgment_accuracy: f64,
    pub grounding_hit_rate: f64,
    pub mean_iou: f64,
    /// Exact `E[1[ŷ = y]]` under the sampling policy.
    pub p_acc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub metrics: Vec<TrainingMetrics>,
    pub policy: ToyPolicy,
}

/// Advantages of one rollout group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAdvantages {
    pub advantages: Vec<f64>,
    pub dropped: bool,
}

/// `A_i = (r_i − mean) / max(std, ε)` with the population standard
/// deviation. A zero-variance group is dropped (all zeros) when
/// `drop_zero_variance`; `clip` bounds `|A_i|` when given.
pub fn group_advantages(rewards: &[f64], clip: Option<f64>, drop_zero_variance: bool) -> GroupAdvantages {
    let n = rewards.len() as f64;
    if rewards.is_empty() {
        return GroupAdvantages {
            advantages: vec![],
            dropped: true,
        };
    }
    let mean = rewards.iter().sum::<f64>() / n;
    let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    if drop_zero_variance && std < STD_EPS {
        return GroupAdvantages {
            advantages: vec![0.0; rewards.len()],
            dropped: true,
        };
    }
    let advantages = rewards
        .iter()
        .map(|r| {
            let a = (r - mean) / std.max(STD_EPS);
            clip.map_or(a, |c| a.clamp(-c, c))
        })
        .collect();
    GroupAdvantages {
        advantages,
        dropped: false,
    }
}

fn candidate_rationale(f: &Features, k: usize, mode: ProtocolMode) -> Rationale {
    let b = f.candidates[k];
    match mode {
        ProtocolMode::BboxMode => Rationale::boxes(vec![b]).expect("one box"),
        ProtocolMode::PointMode => Rationale::points(vec![box_center(&b)]).expect("one point"),
    }
}

fn box_center(b: &BBox) -> Point {
    let (cx, cy) = b.center2();
    Point::new(cx / 2, cy / 2).expect("center of a valid box")
}

/// Protocol text for an action.
pub fn render_action(f: &Features, a: &Action, mode: ProtocolMode) -> VerifierOutput {
    let rationale = a.candidate.map_or(Rationale::None, |k| candidate_rationale(f, k, mode));
    build_output(THINK_PLACEHOLDER, a.judgment, rationale, mode).expect("placeholder think block is encodable")
}

fn sample_action<R: Rng + ?Sized>(policy: &ToyPolicy, f: &Features, stream: Stream, rng: &mut R) -> Action {
    policy.sample(f, stream == Stream::Grounding, rng)
}

/// One sampled verifier output for `sample`.
pub fn rollout<R: Rng + ?Sized>(policy: &ToyPolicy, sample: &LabeledSample, mode: ProtocolMode, rng: &mut R) -> VerifierOutput {
    let f = featurize(sample.scene(), sample.prompt(), policy.grid_cells());
    let a = sample_action(policy, &f, sample.stream(), rng);
    render_action(&f, &a, mode)
}

/// Checks that the dataset is the one the regime trains on: a decoupled
/// dataset (one grounding copy per False judgment sample) for Decoupled,
/// no grounding copies otherwise.
pub fn check_regime_dataset(regime: Regime, dataset: &[LabeledSample]) -> Result<(), TrainerError> {
    if dataset.is_empty() {
        return Err(TrainerError::EmptyDataset);
    }
    let (_, grounding) = stream_counts(dataset);
    let false_judgment = dataset
        .iter()
        .filter(|s| s.stream() == Stream::Judgment && !s.label().is_true())
        .count();
    match regime {
        Regime::Decoupled if grounding != false_judgment || grounding == 0 => Err(TrainerError::RegimeDatasetMismatch(
            format!("decoupled regime needs one grounding copy per False sample ({false_judgment}), found {grounding}"),
        )),
        Regime::Baseline | Regime::Joint if grounding > 0 => Err(TrainerError::RegimeDatasetMismatch(format!(
            "{} regime takes a dataset without grounding-stream records, found {grounding}",
            regime.as_str()
        ))),
        _ => Ok(()),
    }
}

fn best_iou(pred: &BBox, gt: &[BBox]) -> f64 {
    match_boxes(std::slice::from_ref(pred), gt)
        .into_iter()
        .map(ratio_to_f64)
        .fold(0.0, f64::max)
}

/// Evaluation over pre-featurized judgment-stream samples.
fn evaluate_features(policy: &ToyPolicy, set: &[(&LabeledSample, &Features)]) -> Result<EvalReport, TrainerError> {
    if set.is_empty() {
        return Err(TrainerError::EmptyEvalSet);
    }
    let mut correct = 0usize;
    let mut p_acc = 0.0;
    let (mut n_false, mut hits, mut iou_sum) = (0usize, 0usize, 0.0);
    for (s, f) in set {
        let a = policy.greedy(f, false);
        correct += usize::from(a.judgment == s.label());
        p_acc += policy.judgment_log_prob(f, s.label()).exp();
        if !s.label().is_true() {
            n_false += 1;
            let iou = best_iou(&f.candidates[policy.greedy_candidate(f)], s.gt_regions());
            hits += usize::from(iou >= HIT_IOU);
            iou_sum += iou;
        }
    }
    let n = set.len() as f64;
    let per_false = |x: f64| if n_false == 0 { 0.0 } else { x / n_false as f64 };
    Ok(EvalReport {
        judgment_accuracy: correct as f64 / n,
        grounding_hit_rate: per_false(hits as f64),
        mean_iou: per_false(iou_sum),
        p_acc: p_acc / n,
    })
}

/// Greedy evaluation. Judgment accuracy covers every judgment-stream
/// sample; the hit rate scores the grounding head's argmax box on every
/// False sample, whatever the judgment head says.
pub fn evaluate(policy: &ToyPolicy, eval_set: &[LabeledSample]) -> Result<EvalReport, TrainerError> {
    let feats: Vec<(&LabeledSample, Features)> = eval_set
        .iter()
        .filter(|s| s.stream() == Stream::Judgment)
        .map(|s| (s, featurize(s.scene(), s.prompt(), policy.grid_cells())))
        .collect();
    let view: Vec<(&LabeledSample, &Features)> = feats.iter().map(|(s, f)| (*s, f)).collect();
    evaluate_features(policy, &view)
}

/// Expected hit rate when the grounding head is sampled instead of decoded
/// greedily.
pub fn expected_hit_rate(policy: &ToyPolicy, eval_set: &[LabeledSample]) -> Result<f64, TrainerError> {
    let falses: Vec<&LabeledSample> = eval_set
        .iter()
        .filter(|s| s.stream() == Stream::Judgment && !s.label().is_true())
        .collect();
    if falses.is_empty() {
        return Err(TrainerError::EmptyEvalSet);
    }
    let total: f64 = falses
        .iter()
        .map(|s| {
            let f = featurize(s.scene(), s.prompt(), policy.grid_cells());
            policy
                .grounding_probs(&f)
                .iter()
                .zip(&f.candidates)
                .filter(|(_, c)| best_iou(c, s.gt_regions()) >= HIT_IOU)
                .map(|(p, _)| p)
                .sum::<f64>()
        })
        .sum();
    Ok(total / falses.len() as f64)
}

fn step_rng(seed: u64, step: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((step as u64) << 32) | slot as u64);
    rng
}

struct Rollout {
    sample: usize,
    action: Action,
    reward: f64,
}

/// Which heads a rollout's log-probability covers in the update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Heads {
    Both,
    Judgment,
    Grounding,
}

fn heads_for(regime: Regime, stream: Stream) -> Heads {
    match (regime, stream) {
        (Regime::Decoupled, Stream::Judgment) => Heads::Judgment,
        (Regime::Decoupled, Stream::Grounding) => Heads::Grounding,
        _ => Heads::Both,
    }
}

fn restricted_log_prob(policy: &ToyPolicy, f: &Features, a: &Action, heads: Heads) -> f64 {
    let lj = policy.judgment_log_prob(f, a.judgment);
    let lg = a.candidate.map_or(0.0, |k| policy.grounding_log_probs(f)[k]);
    match heads {
        Heads::Both => lj + lg,
        Heads::Judgment => lj,
        Heads::Grounding => lg,
    }
}

fn restricted_grad(policy: &ToyPolicy, f: &Features, a: &Action, heads: Heads) -> Vec<f64> {
    let mut g = policy.grad_log_prob(f, a);
    match heads {
        Heads::Both => {}
        Heads::Judgment => g[JUDGMENT_FEATURES..].iter_mut().for_each(|x| *x = 0.0),
        Heads::Grounding => g[..JUDGMENT_FEATURES].iter_mut().for_each(|x| *x = 0.0),
    }
    g
}

/// Head-wise norms of one batch gradient.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeadNorms {
    pub judgment: f64,
    pub grounding: f64,
}

/// Per-rollout head-wise gradient norms `‖A_i ∇ log π(o_i)‖` for one batch,
/// split by stream. Exposed so regime isolation can be asserted directly.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatchDiagnostics {
    pub judgment_stream: Vec<HeadNorms>,
    pub grounding_stream: Vec<HeadNorms>,
    /// Judgment-stream rollouts whose sampled judgment was True.
    pub judgment_stream_true: Vec<HeadNorms>,
}

/// The training loop.
pub struct Trainer<'a> {
    config: TrainerConfig,
    dataset: &'a [LabeledSample],
    features: Vec<Features>,
    eval: Vec<(&'a LabeledSample, Features)>,
    meta: RuleMetaVerifier,
    mode: ProtocolMode,
    pub policy: ToyPolicy,
}

impl<'a> Trainer<'a> {
    pub fn new(
        config: TrainerConfig,
        policy: ToyPolicy,
        dataset: &'a [LabeledSample],
        eval_set: &'a [LabeledSample],
    ) -> Result<Self, TrainerError> {
        config.validate()?;
        check_regime_dataset(config.regime, dataset)?;
        let policy = policy.with_grid_cells(config.grid_cells);
        let cells = config.grid_cells;
        let features = par_map(dataset, config.threads, |_, s| featurize(s.scene(), s.prompt(), cells));
        let eval_samples: Vec<&LabeledSample> = eval_set.iter().filter(|s| s.stream() == Stream::Judgment).collect();
        if eval_samples.is_empty() {
            return Err(TrainerError::EmptyEvalSet);
        }
        let eval_features = par_map(&eval_samples, config.threads, |_, s| featurize(s.scene(), s.prompt(), cells));
        let eval = eval_samples.into_iter().zip(eval_features).collect();
        Ok(Trainer {
            meta: RuleMetaVerifier::new(config.meta_kind),
            mode: protocol_mode(config.meta_kind),
            config,
            dataset,
            features,
            eval,
            policy,
        })
    }

    pub fn evaluate(&self) -> EvalReport {
        let view: Vec<(&LabeledSample, &Features)> = self.eval.iter().map(|(s, f)| (*s, f)).collect();
        evaluate_features(&self.policy, &view).expect("eval set checked non-empty")
    }

    fn metrics(&self, step: usize, mean_reward: f64, grad_norm: f64) -> TrainingMetrics {
        let e = self.evaluate();
        TrainingMetrics {
            step,
            regime: self.config.regime,
            seed: self.config.seed,
            accuracy: e.judgment_accuracy,
            hit_rate: e.grounding_hit_rate,
            mean_reward,
            grad_norm,
            p_acc: e.p_acc,
        }
    }

    fn collect_rollouts(&self, step: usize) -> Result<Vec<Vec<Rollout>>, TrainerError> {
        let mut pick = step_rng(self.config.seed, step, 0);
        let batch: Vec<usize> = (0..self.config.batch_size)
            .map(|_| pick.random_range(0..self.dataset.len()))
            .collect();
        let mode = self.config.reward_mode();
        let groups = par_map(&batch, self.config.threads, |slot, &idx| {
            let mut rng = step_rng(self.config.seed, step, slot + 1);
            let s = &self.dataset[idx];
            let f = &self.features[idx];
            (0..self.config.group_size)
                .map(|_| {
                    let action = sample_action(&self.policy, f, s.stream(), &mut rng);
                    let out = render_action(f, &action, self.mode);
                    let reward = compose(s, &out, &self.meta, mode)?.total();
                    Ok(Rollout {
                        sample: idx,
                        action,
                        reward,
                    })
                })
                .collect::<Result<Vec<_>, TrainerError>>()
        });
        groups.into_iter().collect()
    }

    /// Surrogate gradient `mean_i clip-aware A_i · r_i · ∇ log π(o_i)` over
    /// kept rollouts, with `r_i = π_θ(o_i) / π_old(o_i)`.
    fn surrogate_grad(&self, rollouts: &[(&Rollout, f64, f64)], diag: Option<&mut BatchDiagnostics>) -> Vec<f64> {
        let (lo, hi) = self.config.clip_range;
        let mut g = vec![0.0; N_PARAMS];
        let mut diag = diag;
        for (r, adv, old_lp) in rollouts {
            let s = &self.dataset[r.sample];
            let f = &self.features[r.sample];
            let heads = heads_for(self.config.regime, s.stream());
            let ratio = (restricted_log_prob(&self.policy, f, &r.action, heads) - old_lp).exp();
            let clipped = (*adv > 0.0 && ratio > hi) || (*adv < 0.0 && ratio < lo);
            let w = if clipped { 0.0 } else { adv * ratio };
            let gi = restricted_grad(&self.policy, f, &r.action, heads);
            if let Some(d) = diag.as_deref_mut() {
                let norm = |xs: &[f64]| xs.iter().map(|x| (w * x).powi(2)).sum::<f64>().sqrt();
                let h = HeadNorms {
                    judgment: norm(&gi[..JUDGMENT_FEATURES]),
                    grounding: norm(&gi[JUDGMENT_FEATURES..]),
                };
                match s.stream() {
                    Stream::Grounding => d.grounding_stream.push(h),
                    Stream::Judgment => {
                        d.judgment_stream.push(h);
                        if r.action.judgment == Judgment::True {
                            d.judgment_stream_true.push(h);
                        }
                    }
                }
            }
            for (gj, x) in g.iter_mut().zip(&gi) {
                *gj += w * x;
            }
        }
        let n = rollouts.len().max(1) as f64;
        g.iter_mut().for_each(|x| *x /= n);
        g
    }

    /// One optimization step; returns (mean reward, gradient norm of the
    /// first pass).
    pub fn step(&mut self, step: usize, diag: Option<&mut BatchDiagnostics>) -> Result<(f64, f64), TrainerError> {
        let groups = self.collect_rollouts(step)?;
        let n_rollouts: usize = groups.iter().map(Vec::len).sum();
        let mean_reward = groups.iter().flatten().map(|r| r.reward).sum::<f64>() / n_rollouts as f64;

        let mut kept: Vec<(&Rollout, f64, f64)> = Vec::new();
        for g in &groups {
            let rewards: Vec<f64> = g.iter().map(|r| r.reward).collect();
            let adv = group_advantages(&rewards, None, self.config.drop_zero_variance_groups);
            if adv.dropped {
                continue;
            }
            for (r, a) in g.iter().zip(adv.advantages) {
                let s = &self.dataset[r.sample];
                let heads = heads_for(self.config.regime, s.stream());
                let old = restricted_log_prob(&self.policy, &self.features[r.sample], &r.action, heads);
                kept.push((r, a, old));
            }
        }

        let mut first_norm = 0.0;
        let mut diag = diag;
        for epoch in 0..self.config.inner_epochs {
            let g = self.surrogate_grad(&kept, if epoch == 0 { diag.as_deref_mut() } else { None });
            if epoch == 0 {
                first_norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            }
            let mut theta = self.policy.params();
            for (t, x) in theta.iter_mut().zip(&g) {
                *t += self.config.learning_rate * x;
            }
            self.policy.set_params(&theta);
        }
        Ok((mean_reward, first_norm))
    }

    pub fn run(mut self) -> Result<TrainingRun, TrainerError> {
        let mut metrics = vec![self.metrics(0, 0.0, 0.0)];
        for step in 1..=self.config.steps {
            let (reward, norm) = self.step(step, None)?;
            metrics.push(self.metrics(step, reward, norm));
        }
        Ok(TrainingRun {
            metrics,
            policy: self.policy,
        })
    }
}

/// Trains from `config.init`.
pub fn train(config: &TrainerConfig, dataset: &[LabeledSample], eval_set: &[LabeledSample]) -> Result<TrainingRun, TrainerError> {
    let policy = config.init.build(config.temperature, config.grid_cells)?;
    Trainer::new(config.clone(), policy, dataset, eval_set)?.run()
}
