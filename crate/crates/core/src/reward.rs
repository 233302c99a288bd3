//! Rule-based rewards: accuracy, IoU and point meta-verification, and the
//! baseline / joint / decoupled compositions.

use num_rational::Ratio;
use thiserror::Error;

use crate::protocol::{self, ProtocolMode};
use crate::types::{
    BBox, Judgment, LabeledSample, MetaKind, Point, Rationale, RewardMode, RewardRecord, RewardVariant,
    Stream, VerifierOutput,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewardError {
    #[error("ground-truth region list is empty")]
    EmptyGroundTruth,
    #[error("grounding-stream sample carries label=True")]
    StreamLabelMismatch,
    #[error("composition expects mode {expected:?}, got {got:?}")]
    WrongMode { expected: RewardVariant, got: RewardVariant },
}

/// Scores a verifier rationale against a sample. Returned values are clamped
/// to [0, 1] by the compositions.
pub trait MetaVerifierClient {
    fn score(&self, sample: &LabeledSample, output: &VerifierOutput) -> f64;
}

impl<T: MetaVerifierClient + ?Sized> MetaVerifierClient for &T {
    fn score(&self, sample: &LabeledSample, output: &VerifierOutput) -> f64 {
        (**self).score(sample, output)
    }
}

/// The rule-based meta-verifier: IoU or point containment against the
/// sample's ground-truth regions. Rationales of the wrong kind score 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleMetaVerifier {
    pub kind: MetaKind,
}

impl RuleMetaVerifier {
    pub fn new(kind: MetaKind) -> Self {
        RuleMetaVerifier { kind }
    }
}

impl MetaVerifierClient for RuleMetaVerifier {
    fn score(&self, sample: &LabeledSample, output: &VerifierOutput) -> f64 {
        let gt = sample.gt_regions();
        let r = match (&output.rationale, self.kind) {
            (Rationale::Boxes(b), MetaKind::IoUContinuous | MetaKind::IoUGated { .. }) => {
                bbox_meta_reward(b, gt, self.kind)
            }
            (Rationale::Points(p), MetaKind::PointGated) => point_meta_reward(p, gt),
            _ => Ok(0.0),
        };
        r.unwrap_or(0.0)
    }
}

/// Stand-in for a model-based explanation judge: the fraction of
/// ground-truth regions whose `[x1,y1,x2,y2]` literal appears in a `Text`
/// rationale. Deterministic; other rationale kinds score 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockTextMetaVerifier;

impl MetaVerifierClient for MockTextMetaVerifier {
    fn score(&self, sample: &LabeledSample, output: &VerifierOutput) -> f64 {
        let Rationale::Text(text) = &output.rationale else {
            return 0.0;
        };
        let gt = sample.gt_regions();
        if gt.is_empty() {
            return 0.0;
        }
        let hits = gt.iter().filter(|b| text.contains(&b.to_string())).count();
        hits as f64 / gt.len() as f64
    }
}

pub fn accuracy_reward(pred: Judgment, label: Judgment) -> u8 {
    u8::from(pred == label)
}

/// Exact intersection over union.
pub fn iou(a: &BBox, b: &BBox) -> Ratio<u64> {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    Ratio::new(inter, union)
}

pub fn iou_f64(a: &BBox, b: &BBox) -> f64 {
    ratio_to_f64(iou(a, b))
}

pub fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Greedy one-to-one matching: all (gt, pred) pairs are taken in descending
/// IoU order (ties by gt index, then pred index) and a pair is accepted when
/// neither side is used yet. Returns the matched IoU per gt box; unmatched
/// gt boxes get 0.
pub fn match_boxes(pred: &[BBox], gt: &[BBox]) -> Vec<Ratio<u64>> {
    let mut pairs: Vec<(Ratio<u64>, usize, usize)> = gt
        .iter()
        .enumerate()
        .flat_map(|(g, gb)| pred.iter().enumerate().map(move |(p, pb)| (iou(gb, pb), g, p)))
        .collect();
    pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut matched = vec![Ratio::from_integer(0); gt.len()];
    let mut gt_used = vec![false; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    for (v, g, p) in pairs {
        if gt_used[g] || pred_used[p] {
            continue;
        }
        gt_used[g] = true;
        pred_used[p] = true;
        matched[g] = v;
    }
    matched
}

pub fn bbox_meta_reward(pred: &[BBox], gt: &[BBox], kind: MetaKind) -> Result<f64, RewardError> {
    if gt.is_empty() {
        return Err(RewardError::EmptyGroundTruth);
    }
    let matched = match_boxes(pred, gt);
    let n = gt.len() as f64;
    Ok(match kind {
        MetaKind::IoUGated { threshold } => {
            matched.iter().filter(|m| ratio_to_f64(**m) >= threshold.get()).count() as f64 / n
        }
        // Points cannot be scored against boxes by IoU; treat as continuous.
        MetaKind::IoUContinuous | MetaKind::PointGated => {
            matched.iter().map(|m| ratio_to_f64(*m)).sum::<f64>() / n
        }
    })
}

/// Fraction of gt boxes that receive a contained point under greedy
/// one-to-one matching (gt boxes in order, each takes the first unused
/// point it contains; edges inclusive).
pub fn point_meta_reward(pred: &[Point], gt: &[BBox]) -> Result<f64, RewardError> {
    if gt.is_empty() {
        return Err(RewardError::EmptyGroundTruth);
    }
    let mut used = vec![false; pred.len()];
    let mut hits = 0usize;
    for b in gt {
        if let Some(i) = (0..pred.len()).find(|&i| !used[i] && b.contains(&pred[i])) {
            used[i] = true;
            hits += 1;
        }
    }
    Ok(hits as f64 / gt.len() as f64)
}

/// Protocol mode implied by a meta kind.
pub fn protocol_mode(kind: MetaKind) -> ProtocolMode {
    match kind {
        MetaKind::PointGated => ProtocolMode::PointMode,
        MetaKind::IoUContinuous | MetaKind::IoUGated { .. } => ProtocolMode::BboxMode,
    }
}

fn clamp_meta(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// `R_f + R_acc`, with the format rule relaxed to think + judgment
/// structure (no explanation is part of this objective).
pub fn compose_baseline(sample: &LabeledSample, output: &VerifierOutput) -> RewardRecord {
    let format = protocol::structure_reward(&output.raw) == 1;
    let acc = accuracy_reward(output.judgment, sample.label()) == 1;
    let mode = RewardMode::new(RewardVariant::Baseline, MetaKind::default());
    RewardRecord::compose(format, Some(acc), None, sample.label(), mode, sample.stream())
}

/// `R_f + R_acc * (1[y=True] + 1[y=False] * R_meta)`. The meta-verifier is
/// only called when the accuracy gate is open on a False sample.
pub fn compose_joint(
    sample: &LabeledSample,
    output: &VerifierOutput,
    meta: &dyn MetaVerifierClient,
    mode: RewardMode,
) -> Result<RewardRecord, RewardError> {
    if mode.variant != RewardVariant::JointMeta {
        return Err(RewardError::WrongMode {
            expected: RewardVariant::JointMeta,
            got: mode.variant,
        });
    }
    let format = protocol::format_reward(&output.raw, protocol_mode(mode.meta_kind)) == 1;
    let acc = accuracy_reward(output.judgment, sample.label()) == 1;
    let meta_value = (acc && !sample.label().is_true()).then(|| clamp_meta(meta.score(sample, output)));
    Ok(RewardRecord::compose(format, Some(acc), meta_value, sample.label(), mode, sample.stream()))
}

/// Judgment stream: `R_f + R_acc`. Grounding stream: `R_f + R_meta`, with
/// the rationale mandatory for the format term.
pub fn compose_decoupled(
    sample: &LabeledSample,
    output: &VerifierOutput,
    meta: &dyn MetaVerifierClient,
    mode: RewardMode,
) -> Result<RewardRecord, RewardError> {
    if mode.variant != RewardVariant::Decoupled {
        return Err(RewardError::WrongMode {
            expected: RewardVariant::Decoupled,
            got: mode.variant,
        });
    }
    let pmode = protocol_mode(mode.meta_kind);
    match sample.stream() {
        Stream::Judgment => {
            let format = protocol::format_reward(&output.raw, pmode) == 1;
            let acc = accuracy_reward(output.judgment, sample.label()) == 1;
            Ok(RewardRecord::compose(format, Some(acc), None, sample.label(), mode, Stream::Judgment))
        }
        Stream::Grounding => {
            if sample.label().is_true() {
                return Err(RewardError::StreamLabelMismatch);
            }
            let format = protocol::grounding_format_reward(&output.raw, pmode) == 1;
            let m = clamp_meta(meta.score(sample, output));
            Ok(RewardRecord::compose(format, None, Some(m), sample.label(), mode, Stream::Grounding))
        }
    }
}

/// Dispatches on `mode.variant`.
pub fn compose(
    sample: &LabeledSample,
    output: &VerifierOutput,
    meta: &dyn MetaVerifierClient,
    mode: RewardMode,
) -> Result<RewardRecord, RewardError> {
    match mode.variant {
        RewardVariant::Baseline => Ok(compose_baseline(sample, output)),
        RewardVariant::JointMeta => compose_joint(sample, output, meta, mode),
        RewardVariant::Decoupled => compose_decoupled(sample, output, meta, mode),
    }
}
