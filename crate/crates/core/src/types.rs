//! Domain types shared by every module: judgments, boxes, points,
//! rationales, symbolic scenes, labeled samples and reward records.
//!
//! Every type with an invariant validates on construction and on
//! deserialization, so an invalid value cannot be built through the public
//! surface. Canonical serialization is single-line JSON; boxes serialize as
//! `[x1,y1,x2,y2]` and points as `[x,y]`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Side of the default normalized coordinate grid.
pub const DEFAULT_GRID: u32 = 1000;

/// Default IoU threshold for the gated box reward.
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeError {
    #[error("invalid box {0:?}: need 0 <= x1 < x2 <= {1} and 0 <= y1 < y2 <= {1}")]
    InvalidBox([i64; 4], u32),
    #[error("invalid point {0:?}: coordinates must lie in [0, {1}]")]
    InvalidPoint([i64; 2], u32),
    #[error("rationale {0} must contain at least one element")]
    EmptyRationale(&'static str),
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid sample: {field}: {reason}")]
    InvalidSample { field: &'static str, reason: String },
    #[error("IoU threshold {0} must lie in (0, 1]")]
    InvalidThreshold(f64),
    #[error("unknown judgment token {0:?}")]
    UnknownJudgment(String),
}

/// Binary verdict of a verifier, serialized exactly as `"True"` / `"False"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Judgment {
    True,
    False,
}

impl Judgment {
    pub fn as_str(self) -> &'static str {
        match self {
            Judgment::True => "True",
            Judgment::False => "False",
        }
    }

    pub fn from_bool(b: bool) -> Self {
        if b {
            Judgment::True
        } else {
            Judgment::False
        }
    }

    pub fn is_true(self) -> bool {
        self == Judgment::True
    }

    pub fn flipped(self) -> Self {
        Self::from_bool(!self.is_true())
    }
}

impl fmt::Display for Judgment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Judgment {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "True" => Ok(Judgment::True),
            "False" => Ok(Judgment::False),
            other => Err(TypeError::UnknownJudgment(other.to_string())),
        }
    }
}

/// Axis-aligned box on an integer grid with top-left origin and strictly
/// positive area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[i64; 4]", into = "[u32; 4]")]
pub struct BBox {
    x1: u32,
    y1: u32,
    x2: u32,
    y2: u32,
}

impl BBox {
    /// Box on the default 1000-grid.
    pub fn new(x1: i64, y1: i64, x2: i64, y2: i64) -> Result<Self, TypeError> {
        Self::on_grid(x1, y1, x2, y2, DEFAULT_GRID)
    }

    pub fn on_grid(x1: i64, y1: i64, x2: i64, y2: i64, grid: u32) -> Result<Self, TypeError> {
        let g = i64::from(grid);
        if 0 <= x1 && x1 < x2 && x2 <= g && 0 <= y1 && y1 < y2 && y2 <= g {
            Ok(BBox {
                x1: x1 as u32,
                y1: y1 as u32,
                x2: x2 as u32,
                y2: y2 as u32,
            })
        } else {
            Err(TypeError::InvalidBox([x1, y1, x2, y2], grid))
        }
    }

    pub fn x1(&self) -> u32 {
        self.x1
    }
    pub fn y1(&self) -> u32 {
        self.y1
    }
    pub fn x2(&self) -> u32 {
        self.x2
    }
    pub fn y2(&self) -> u32 {
        self.y2
    }

    pub fn width(&self) -> u32 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> u32 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    /// Twice the center, kept integral.
    pub fn center2(&self) -> (i64, i64) {
        (
            i64::from(self.x1) + i64::from(self.x2),
            i64::from(self.y1) + i64::from(self.y2),
        )
    }

    /// Intersection area with `other`.
    pub fn intersection_area(&self, other: &BBox) -> u64 {
        let w = self.x2.min(other.x2).saturating_sub(self.x1.max(other.x1));
        let h = self.y2.min(other.y2).saturating_sub(self.y1.max(other.y1));
        u64::from(w) * u64::from(h)
    }

    pub fn overlaps(&self, other: &BBox) -> bool {
        self.intersection_area(other) > 0
    }

    /// Edge-inclusive containment test.
    pub fn contains(&self, p: &Point) -> bool {
        self.x1 <= p.x && p.x <= self.x2 && self.y1 <= p.y && p.y <= self.y2
    }

    pub fn fits_grid(&self, grid: u32) -> bool {
        self.x2 <= grid && self.y2 <= grid
    }

    pub fn to_array(self) -> [u32; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

impl TryFrom<[i64; 4]> for BBox {
    type Error = TypeError;

    fn try_from(v: [i64; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{},{},{}]", self.x1, self.y1, self.x2, self.y2)
    }
}

/// Point on the same integer grid as [`BBox`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 2]", into = "[u32; 2]")]
pub struct Point {
    x: u32,
    y: u32,
}

impl Point {
    pub fn new(x: i64, y: i64) -> Result<Self, TypeError> {
        Self::on_grid(x, y, DEFAULT_GRID)
    }

    pub fn on_grid(x: i64, y: i64, grid: u32) -> Result<Self, TypeError> {
        let g = i64::from(grid);
        if (0..=g).contains(&x) && (0..=g).contains(&y) {
            Ok(Point {
                x: x as u32,
                y: y as u32,
            })
        } else {
            Err(TypeError::InvalidPoint([x, y], grid))
        }
    }

    pub fn x(&self) -> u32 {
        self.x
    }
    pub fn y(&self) -> u32 {
        self.y
    }
}

impl TryFrom<[i64; 2]> for Point {
    type Error = TypeError;

    fn try_from(v: [i64; 2]) -> Result<Self, Self::Error> {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [u32; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Explanation attached to a verifier output.
///
/// `Text` only carries pass-through explanations for model-style
/// meta-verifier clients; rule-based rewards never read it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "value", try_from = "RawRationale")]
pub enum Rationale {
    None,
    Boxes(Vec<BBox>),
    Points(Vec<Point>),
    Text(String),
}

#[derive(Deserialize)]
#[serde(tag = "variant", content = "value")]
enum RawRationale {
    None,
    Boxes(Vec<BBox>),
    Points(Vec<Point>),
    Text(String),
}

impl TryFrom<RawRationale> for Rationale {
    type Error = TypeError;

    fn try_from(raw: RawRationale) -> Result<Self, Self::Error> {
        match raw {
            RawRationale::None => Ok(Rationale::None),
            RawRationale::Boxes(b) => Rationale::boxes(b),
            RawRationale::Points(p) => Rationale::points(p),
            RawRationale::Text(t) => Ok(Rationale::Text(t)),
        }
    }
}

impl Rationale {
    pub fn boxes(boxes: Vec<BBox>) -> Result<Self, TypeError> {
        if boxes.is_empty() {
            return Err(TypeError::EmptyRationale("Boxes"));
        }
        Ok(Rationale::Boxes(boxes))
    }

    pub fn points(points: Vec<Point>) -> Result<Self, TypeError> {
        if points.is_empty() {
            return Err(TypeError::EmptyRationale("Points"));
        }
        Ok(Rationale::Points(points))
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Rationale::None)
    }
}

/// Parsed structured emission of a verifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierOutput {
    pub raw: String,
    pub think: String,
    pub judgment: Judgment,
    pub rationale: Rationale,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    pub category: String,
    pub color: String,
    pub region: BBox,
}

/// Symbolic stand-in for an image: attributed objects placed on a square
/// canvas of side `canvas`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawScene")]
pub struct SceneGraph {
    canvas: u32,
    objects: Vec<SceneObject>,
}

#[derive(Deserialize)]
struct RawScene {
    canvas: u32,
    objects: Vec<SceneObject>,
}

impl TryFrom<RawScene> for SceneGraph {
    type Error = TypeError;

    fn try_from(raw: RawScene) -> Result<Self, Self::Error> {
        SceneGraph::new(raw.canvas, raw.objects)
    }
}

impl SceneGraph {
    pub fn new(canvas: u32, objects: Vec<SceneObject>) -> Result<Self, TypeError> {
        if canvas == 0 || canvas > DEFAULT_GRID {
            return Err(TypeError::InvalidScene(format!(
                "canvas side {canvas} outside 1..={DEFAULT_GRID}"
            )));
        }
        let mut ids = HashSet::new();
        for obj in &objects {
            if !ids.insert(obj.id) {
                return Err(TypeError::InvalidScene(format!("duplicate object id {}", obj.id)));
            }
            if !obj.region.fits_grid(canvas) {
                return Err(TypeError::InvalidScene(format!(
                    "object {} region {} exceeds canvas {canvas}",
                    obj.id, obj.region
                )));
            }
            if !is_token(&obj.category) || !is_token(&obj.color) {
                return Err(TypeError::InvalidScene(format!(
                    "object {} has a non-token attribute ({:?}, {:?})",
                    obj.id, obj.color, obj.category
                )));
            }
        }
        Ok(SceneGraph { canvas, objects })
    }

    pub fn canvas(&self) -> u32 {
        self.canvas
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn object_at(&self, region: &BBox) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.region == *region)
    }

    pub fn next_id(&self) -> u32 {
        self.objects.iter().map(|o| o.id + 1).max().unwrap_or(0)
    }

    /// Objects sorted by region, ids dropped; equal for scenes that differ
    /// only by id assignment or object order.
    pub fn canonical_objects(&self) -> Vec<(BBox, String, String)> {
        let mut v: Vec<_> = self
            .objects
            .iter()
            .map(|o| (o.region, o.color.clone(), o.category.clone()))
            .collect();
        v.sort();
        v
    }
}

/// Vocabulary tokens are non-empty lowercase ASCII words.
pub fn is_token(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b == b'_')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Stream {
    #[default]
    Judgment,
    Grounding,
}

/// One verification record: a scene, a prompt, the ground-truth verdict and
/// the regions that make the pair inconsistent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSample")]
pub struct LabeledSample {
    scene: SceneGraph,
    prompt: String,
    label: Judgment,
    gt_regions: Vec<BBox>,
    stream: Stream,
}

#[derive(Deserialize)]
struct RawSample {
    scene: SceneGraph,
    prompt: String,
    label: Judgment,
    gt_regions: Vec<BBox>,
    #[serde(default)]
    stream: Stream,
}

impl TryFrom<RawSample> for LabeledSample {
    type Error = TypeError;

    fn try_from(r: RawSample) -> Result<Self, Self::Error> {
        LabeledSample::new(r.scene, r.prompt, r.label, r.gt_regions, r.stream)
    }
}

impl LabeledSample {
    pub fn new(
        scene: SceneGraph,
        prompt: String,
        label: Judgment,
        gt_regions: Vec<BBox>,
        stream: Stream,
    ) -> Result<Self, TypeError> {
        let s = LabeledSample {
            scene,
            prompt,
            label,
            gt_regions,
            stream,
        };
        validate_sample(&s)?;
        Ok(s)
    }

    pub fn scene(&self) -> &SceneGraph {
        &self.scene
    }
    pub fn prompt(&self) -> &str {
        &self.prompt
    }
    pub fn label(&self) -> Judgment {
        self.label
    }
    pub fn gt_regions(&self) -> &[BBox] {
        &self.gt_regions
    }
    pub fn stream(&self) -> Stream {
        self.stream
    }

    /// Copy tagged for the grounding stream. Only label=False samples can be
    /// retagged.
    pub fn to_grounding(&self) -> Result<Self, TypeError> {
        LabeledSample::new(
            self.scene.clone(),
            self.prompt.clone(),
            self.label,
            self.gt_regions.clone(),
            Stream::Grounding,
        )
    }
}

/// Checks the label/region/stream coupling of a sample.
pub fn validate_sample(s: &LabeledSample) -> Result<(), TypeError> {
    match (s.label, s.gt_regions.is_empty()) {
        (Judgment::True, false) => {
            return Err(TypeError::InvalidSample {
                field: "gt_regions",
                reason: "label=True requires no ground-truth regions".into(),
            })
        }
        (Judgment::False, true) => {
            return Err(TypeError::InvalidSample {
                field: "gt_regions",
                reason: "label=False requires at least one ground-truth region".into(),
            })
        }
        _ => {}
    }
    if s.stream == Stream::Grounding && s.label == Judgment::True {
        return Err(TypeError::InvalidSample {
            field: "stream",
            reason: "grounding stream requires label=False".into(),
        });
    }
    if let Some(b) = s.gt_regions.iter().find(|b| !b.fits_grid(s.scene.canvas)) {
        return Err(TypeError::InvalidSample {
            field: "gt_regions",
            reason: format!("region {b} exceeds canvas {}", s.scene.canvas),
        });
    }
    Ok(())
}

/// IoU threshold in (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(t: f64) -> Result<Self, TypeError> {
        if t > 0.0 && t <= 1.0 {
            Ok(Threshold(t))
        } else {
            Err(TypeError::InvalidThreshold(t))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold(DEFAULT_IOU_THRESHOLD)
    }
}

impl TryFrom<f64> for Threshold {
    type Error = TypeError;
    fn try_from(t: f64) -> Result<Self, Self::Error> {
        Threshold::new(t)
    }
}

impl From<Threshold> for f64 {
    fn from(t: Threshold) -> f64 {
        t.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum RewardVariant {
    Baseline,
    #[default]
    JointMeta,
    Decoupled,
}

/// How the meta-verification reward scores a rationale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum MetaKind {
    IoUContinuous,
    IoUGated { threshold: Threshold },
    PointGated,
}

impl Default for MetaKind {
    fn default() -> Self {
        MetaKind::IoUGated {
            threshold: Threshold::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardMode {
    pub variant: RewardVariant,
    pub meta_kind: MetaKind,
}

impl RewardMode {
    pub fn new(variant: RewardVariant, meta_kind: MetaKind) -> Self {
        RewardMode { variant, meta_kind }
    }
}

/// Per-rollout reward breakdown. `total` is always derived from the other
/// fields through the composition rule of `mode`; see [`RewardRecord::compose`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardRecord {
    format: u8,
    accuracy: u8,
    meta: Option<f64>,
    total: f64,
    mode: RewardMode,
    stream: Stream,
}

impl RewardRecord {
    /// Builds a record whose total follows the composition of `mode`.
    ///
    /// * Baseline: `format + accuracy`
    /// * JointMeta: `format + accuracy * (1[y=True] + 1[y=False] * meta)`,
    ///   where an absent meta counts as 0 (it is only absent when gated off)
    /// * Decoupled: `format + accuracy` on the judgment stream,
    ///   `format + meta` on the grounding stream
    pub fn compose(
        format: bool,
        accuracy: Option<bool>,
        meta: Option<f64>,
        label: Judgment,
        mode: RewardMode,
        stream: Stream,
    ) -> Self {
        let f = f64::from(u8::from(format));
        let acc = accuracy.map(|a| f64::from(u8::from(a))).unwrap_or(0.0);
        let m = meta.unwrap_or(0.0);
        let total = match mode.variant {
            RewardVariant::Baseline => f + acc,
            RewardVariant::JointMeta => {
                let gate = if label.is_true() { 1.0 } else { m };
                f + acc * gate
            }
            RewardVariant::Decoupled => match stream {
                Stream::Judgment => f + acc,
                Stream::Grounding => f + m,
            },
        };
        RewardRecord {
            format: u8::from(format),
            accuracy: accuracy.map(u8::from).unwrap_or(0),
            meta,
            total,
            mode,
            stream,
        }
    }

    pub fn format(&self) -> u8 {
        self.format
    }
    pub fn accuracy(&self) -> u8 {
        self.accuracy
    }
    pub fn meta(&self) -> Option<f64> {
        self.meta
    }
    pub fn total(&self) -> f64 {
        self.total
    }
    pub fn mode(&self) -> RewardMode {
        self.mode
    }
    pub fn stream(&self) -> Stream {
        self.stream
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> SceneGraph {
        SceneGraph::new(
            1000,
            vec![SceneObject {
                id: 0,
                category: "circle".into(),
                color: "red".into(),
                region: BBox::new(0, 0, 100, 100).unwrap(),
            }],
        )
        .unwrap()
    }

    #[test]
    fn true_label_without_regions_is_valid() {
        let s = LabeledSample::new(scene(), "p".into(), Judgment::True, vec![], Stream::Judgment);
        assert!(s.is_ok());
    }

    #[test]
    fn true_label_with_region_is_rejected() {
        let err = LabeledSample::new(
            scene(),
            "p".into(),
            Judgment::True,
            vec![BBox::new(0, 0, 10, 10).unwrap()],
            Stream::Judgment,
        )
        .unwrap_err();
        assert!(matches!(err, TypeError::InvalidSample { field: "gt_regions", .. }));
    }

    #[test]
    fn grounding_stream_requires_false() {
        let err =
            LabeledSample::new(scene(), "p".into(), Judgment::True, vec![], Stream::Grounding)
                .unwrap_err();
        assert!(matches!(err, TypeError::InvalidSample { field: "stream", .. }));
    }

    #[test]
    fn false_label_needs_regions() {
        let err = LabeledSample::new(scene(), "p".into(), Judgment::False, vec![], Stream::Judgment)
            .unwrap_err();
        assert!(matches!(err, TypeError::InvalidSample { .. }));
    }

    #[test]
    fn bbox_rejects_degenerate_and_out_of_grid() {
        assert!(BBox::new(5, 5, 5, 10).is_err());
        assert!(BBox::new(-1, 0, 5, 10).is_err());
        assert!(BBox::new(0, 0, 1001, 10).is_err());
        assert!(BBox::on_grid(0, 0, 17, 10, 16).is_err());
        assert!(BBox::new(0, 0, 1000, 1000).is_ok());
    }

    #[test]
    fn point_bounds_are_inclusive() {
        assert!(Point::new(1000, 0).is_ok());
        assert!(Point::new(1001, 0).is_err());
    }

    #[test]
    fn judgment_strings_are_a_bijection() {
        for j in [Judgment::True, Judgment::False] {
            assert_eq!(j.as_str().parse::<Judgment>().unwrap(), j);
            assert_eq!(serde_json::to_string(&j).unwrap(), format!("\"{j}\""));
        }
        assert!("true".parse::<Judgment>().is_err());
    }

    #[test]
    fn canonical_json_shapes() {
        let b = BBox::new(1, 2, 3, 4).unwrap();
        assert_eq!(serde_json::to_string(&b).unwrap(), "[1,2,3,4]");
        assert_eq!(serde_json::to_string(&Point::new(7, 8).unwrap()).unwrap(), "[7,8]");
        let r = Rationale::boxes(vec![b]).unwrap();
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"variant":"Boxes","value":[[1,2,3,4]]}"#
        );
        assert_eq!(serde_json::to_string(&Rationale::None).unwrap(), r#"{"variant":"None"}"#);
    }

    #[test]
    fn deserialization_enforces_invariants() {
        assert!(serde_json::from_str::<BBox>("[3,0,1,5]").is_err());
        assert!(serde_json::from_str::<Rationale>(r#"{"variant":"Boxes","value":[]}"#).is_err());
        assert!(serde_json::from_str::<Threshold>("1.5").is_err());
        let dup = r#"{"canvas":100,"objects":[
            {"id":1,"category":"a","color":"b","region":[0,0,1,1]},
            {"id":1,"category":"a","color":"b","region":[2,2,3,3]}]}"#;
        assert!(serde_json::from_str::<SceneGraph>(dup).is_err());
        let outside = r#"{"canvas":10,"objects":[{"id":1,"category":"a","color":"b","region":[0,0,11,1]}]}"#;
        assert!(serde_json::from_str::<SceneGraph>(outside).is_err());
    }

    #[test]
    fn default_threshold_is_point_six() {
        assert_eq!(Threshold::default().get(), 0.6);
        match MetaKind::default() {
            MetaKind::IoUGated { threshold } => assert_eq!(threshold.get(), 0.6),
            other => panic!("unexpected default {other:?}"),
        }
    }

    #[test]
    fn reward_record_total_follows_mode() {
        let joint = RewardMode::new(RewardVariant::JointMeta, MetaKind::default());
        let r = RewardRecord::compose(true, Some(true), Some(0.5), Judgment::False, joint, Stream::Judgment);
        assert_eq!(r.total(), 1.5);
        let r = RewardRecord::compose(true, Some(true), None, Judgment::True, joint, Stream::Judgment);
        assert_eq!(r.total(), 2.0);
        let dec = RewardMode::new(RewardVariant::Decoupled, MetaKind::default());
        let r = RewardRecord::compose(false, None, Some(1.0), Judgment::False, dec, Stream::Grounding);
        assert_eq!(r.total(), 1.0);
    }
}
