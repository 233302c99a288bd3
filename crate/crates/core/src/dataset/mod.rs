//! Synthetic verification data: scene generation, label-flipping
//! perturbations, balanced dataset assembly, the judgment/grounding
//! decoupling transform, and JSONL persistence.

pub mod generate;
pub mod prompt;

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{is_token, Judgment, LabeledSample, Stream, TypeError, DEFAULT_GRID};
pub use generate::{generate_scene, perturb, true_sample, PerturbationKind, Vocabulary};
pub use prompt::{check_consistency, derive_prompt, is_consistent, PromptError, Violation};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("cannot apply {kind:?}: {reason}")]
    NotPerturbable { kind: PerturbationKind, reason: String },
    #[error("dataset already contains grounding-stream samples")]
    DoubleDecouple,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// Sampling weights over perturbation kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationMix {
    pub add_object: f64,
    pub remove_object: f64,
    pub modify_attribute: f64,
    pub swap_spatial_relation: f64,
}

impl Default for PerturbationMix {
    fn default() -> Self {
        PerturbationMix {
            add_object: 0.25,
            remove_object: 0.25,
            modify_attribute: 0.25,
            swap_spatial_relation: 0.25,
        }
    }
}

impl PerturbationMix {
    pub fn weights(&self) -> [f64; 4] {
        [
            self.add_object,
            self.remove_object,
            self.modify_attribute,
            self.swap_spatial_relation,
        ]
    }
}

/// Everything that determines a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetManifest {
    pub seed: u64,
    pub n_samples: usize,
    /// True:False parts, e.g. `[1, 1]`.
    pub true_false_ratio: [u32; 2],
    pub grid: u32,
    pub vocabulary: Vocabulary,
    pub perturbation_mix: PerturbationMix,
}

impl Default for DatasetManifest {
    fn default() -> Self {
        DatasetManifest {
            seed: 0,
            n_samples: 1000,
            true_false_ratio: [1, 1],
            grid: DEFAULT_GRID,
            vocabulary: Vocabulary::default(),
            perturbation_mix: PerturbationMix::default(),
        }
    }
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidManifest(m));
        let w = self.perturbation_mix.weights();
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return bad("perturbation weights must be finite and non-negative".into());
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("perturbation weights sum to {}, expected 1", w.iter().sum::<f64>()));
        }
        let [t, f] = self.true_false_ratio;
        if t + f == 0 {
            return bad("true_false_ratio must have a positive part".into());
        }
        if !(60..=DEFAULT_GRID).contains(&self.grid) {
            return bad(format!("grid side {} outside 60..={DEFAULT_GRID}", self.grid));
        }
        let v = &self.vocabulary;
        if v.categories.is_empty() || v.colors.is_empty() {
            return bad("vocabulary needs at least one category and one color".into());
        }
        if let Some(tok) = v.categories.iter().chain(&v.colors).find(|t| !is_token(t)) {
            return bad(format!("vocabulary token {tok:?} is not a lowercase word"));
        }
        Ok(())
    }

    /// Number of True samples: `round(n * t / (t + f))`, halves rounded up.
    pub fn n_true(&self) -> usize {
        let [t, f] = self.true_false_ratio;
        let (t, total) = (t as u128, (t + f) as u128);
        ((2 * self.n_samples as u128 * t + total) / (2 * total)) as usize
    }
}

/// Per-index generator stream: identical (seed, index) gives identical
/// draws on every platform.
pub fn index_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Whether sample `i` of `n` is a True sample, spreading `n_true` evenly.
fn is_true_slot(i: usize, n: usize, n_true: usize) -> bool {
    (i + 1) * n_true / n > i * n_true / n
}

/// Sample `index` of the dataset described by `manifest`.
pub fn generate_sample(manifest: &DatasetManifest, index: usize) -> LabeledSample {
    let n = manifest.n_samples.max(index + 1);
    let want_true = is_true_slot(index, n, manifest.n_true().min(n));
    let mut rng = index_rng(manifest.seed, index as u64);
    let weights = manifest.perturbation_mix.weights();
    let dist = WeightedIndex::new(weights).ok();
    loop {
        let scene = generate_scene(&mut rng, manifest);
        if want_true {
            return true_sample(scene);
        }
        let prompt = derive_prompt(&scene);
        let first = dist.as_ref().map(|d| d.sample(&mut rng)).unwrap_or(0);
        // fall through the remaining kinds when the drawn one cannot apply
        for k in 0..4 {
            let kind = PerturbationKind::ALL[(first + k) % 4];
            if weights[(first + k) % 4] == 0.0 && k > 0 {
                continue;
            }
            if let Ok(s) = perturb(&scene, &prompt, kind, &manifest.vocabulary, &mut rng) {
                return s;
            }
        }
    }
}

/// Balanced dataset: exactly `n_true()` True samples, the rest False, all on
/// the judgment stream.
pub fn build_dataset(manifest: &DatasetManifest) -> Result<Vec<LabeledSample>, DatasetError> {
    manifest.validate()?;
    Ok((0..manifest.n_samples).map(|i| generate_sample(manifest, i)).collect())
}

/// Appends one grounding-stream copy of every False sample.
pub fn decouple(dataset: &[LabeledSample]) -> Result<Vec<LabeledSample>, DatasetError> {
    if dataset.iter().any(|s| s.stream() == Stream::Grounding) {
        return Err(DatasetError::DoubleDecouple);
    }
    let mut out = dataset.to_vec();
    for s in dataset.iter().filter(|s| s.label() == Judgment::False) {
        out.push(s.to_grounding()?);
    }
    Ok(out)
}

/// Counts of (judgment-stream, grounding-stream) samples.
pub fn stream_counts(dataset: &[LabeledSample]) -> (usize, usize) {
    let g = dataset.iter().filter(|s| s.stream() == Stream::Grounding).count();
    (dataset.len() - g, g)
}

pub fn to_jsonl_string(samples: &[LabeledSample]) -> String {
    let mut out = String::new();
    for s in samples {
        out.push_str(&serde_json::to_string(s).expect("samples always serialize"));
        out.push('\n');
    }
    out
}

pub fn save_jsonl(samples: &[LabeledSample], path: &Path) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(to_jsonl_string(samples).as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Reads one sample per line; blank lines are skipped. Errors carry the
/// 1-based line number.
pub fn load_jsonl(path: &Path) -> Result<Vec<LabeledSample>, DatasetError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(s);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::prompt::violation_regions;
    use crate::types::{BBox, SceneGraph, SceneObject};

    fn manifest(n: usize) -> DatasetManifest {
        DatasetManifest {
            n_samples: n,
            ..Default::default()
        }
    }

    #[test]
    fn balanced_counts() {
        let d = build_dataset(&manifest(8)).unwrap();
        let t = d.iter().filter(|s| s.label().is_true()).count();
        assert_eq!((t, d.len() - t), (4, 4));
        assert!(d.iter().all(|s| s.stream() == Stream::Judgment));
        assert!(d.iter().filter(|s| !s.label().is_true()).all(|s| !s.gt_regions().is_empty()));
    }

    #[test]
    fn empty_dataset() {
        assert!(build_dataset(&manifest(0)).unwrap().is_empty());
    }

    #[test]
    fn n_true_rounding() {
        let m = |n, r| DatasetManifest {
            n_samples: n,
            true_false_ratio: r,
            ..Default::default()
        };
        assert_eq!(m(7, [1, 1]).n_true(), 4);
        assert_eq!(m(10, [1, 3]).n_true(), 3);
        assert_eq!(m(10, [0, 1]).n_true(), 0);
        assert_eq!(m(10, [2, 0]).n_true(), 10);
        for n in 0..40 {
            let man = m(n, [2, 3]);
            let slots = (0..n).filter(|&i| is_true_slot(i, n, man.n_true())).count();
            assert_eq!(slots, man.n_true());
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let m = manifest(16);
        assert_eq!(to_jsonl_string(&build_dataset(&m).unwrap()), to_jsonl_string(&build_dataset(&m).unwrap()));
        let a = generate_scene(&mut index_rng(0, 0), &m);
        let b = generate_scene(&mut index_rng(0, 0), &m);
        assert_eq!(a, b);
        assert_ne!(a, generate_scene(&mut index_rng(0, 1), &m));
    }

    #[test]
    fn single_category_vocabulary() {
        let mut m = manifest(20);
        m.vocabulary.categories = vec!["disk".into()];
        for s in build_dataset(&m).unwrap() {
            assert!(s.scene().objects().iter().all(|o| o.category == "disk"));
        }
    }

    #[test]
    fn manifest_validation() {
        let mut m = manifest(4);
        m.perturbation_mix.add_object = 0.5;
        assert!(matches!(m.validate(), Err(DatasetError::InvalidManifest(_))));
        let mut m = manifest(4);
        m.vocabulary.colors = vec!["Red".into()];
        assert!(m.validate().is_err());
        let mut m = manifest(4);
        m.true_false_ratio = [0, 0];
        assert!(m.validate().is_err());
    }

    fn obj(id: u32, color: &str, cat: &str, r: [i64; 4]) -> SceneObject {
        SceneObject {
            id,
            category: cat.into(),
            color: color.into(),
            region: BBox::new(r[0], r[1], r[2], r[3]).unwrap(),
        }
    }

    #[test]
    fn remove_object_marks_removed_region() {
        let scene = SceneGraph::new(
            1000,
            vec![
                obj(0, "red", "circle", [0, 0, 100, 100]),
                obj(1, "blue", "cup", [200, 0, 300, 100]),
                obj(2, "green", "star", [0, 200, 100, 300]),
            ],
        )
        .unwrap();
        let prompt = derive_prompt(&scene);
        let s = perturb(&scene, &prompt, PerturbationKind::RemoveObject, &Vocabulary::default(), &mut index_rng(1, 0))
            .unwrap();
        assert_eq!(s.label(), Judgment::False);
        assert_eq!(s.gt_regions().len(), 1);
        assert_eq!(s.scene().objects().len(), 2);
        assert!(scene.object_at(&s.gt_regions()[0]).is_some());
        assert!(s.scene().object_at(&s.gt_regions()[0]).is_none());
        assert_eq!(s.prompt(), prompt);
    }

    #[test]
    fn modify_attribute_changes_prompt_color() {
        let scene = SceneGraph::new(1000, vec![obj(0, "red", "circle", [0, 0, 100, 100])]).unwrap();
        let prompt = derive_prompt(&scene);
        let vocab = Vocabulary {
            categories: vec!["circle".into()],
            colors: vec!["red".into(), "blue".into()],
        };
        let s = perturb(&scene, &prompt, PerturbationKind::ModifyAttribute, &vocab, &mut index_rng(2, 0)).unwrap();
        assert_eq!(s.prompt(), "1 object. #1 blue circle at [0,0,100,100].");
        assert_eq!(s.gt_regions(), &[BBox::new(0, 0, 100, 100).unwrap()]);
        assert_eq!(s.scene(), &scene);
    }

    #[test]
    fn swap_on_two_objects_covers_both() {
        let scene = SceneGraph::new(
            1000,
            vec![obj(0, "red", "circle", [0, 0, 100, 100]), obj(1, "blue", "cup", [500, 0, 650, 90])],
        )
        .unwrap();
        let prompt = derive_prompt(&scene);
        let s = perturb(&scene, &prompt, PerturbationKind::SwapSpatialRelation, &Vocabulary::default(), &mut index_rng(3, 0))
            .unwrap();
        let mut gt = s.gt_regions().to_vec();
        gt.sort();
        let mut both: Vec<BBox> = scene.objects().iter().map(|o| o.region).collect();
        both.sort();
        assert_eq!(gt, both);
        let mut flagged = violation_regions(&check_consistency(s.scene(), s.prompt()).unwrap());
        flagged.sort();
        assert_eq!(flagged, both);
    }

    #[test]
    fn not_perturbable_cases() {
        let one = SceneGraph::new(1000, vec![obj(0, "red", "circle", [0, 0, 100, 100])]).unwrap();
        let p = derive_prompt(&one);
        let v = Vocabulary::default();
        let mut rng = index_rng(0, 0);
        assert!(matches!(
            perturb(&one, &p, PerturbationKind::RemoveObject, &v, &mut rng),
            Err(DatasetError::NotPerturbable { .. })
        ));
        assert!(perturb(&one, &p, PerturbationKind::SwapSpatialRelation, &v, &mut rng).is_err());
        let single = Vocabulary {
            categories: vec!["circle".into()],
            colors: vec!["red".into()],
        };
        assert!(perturb(&one, &p, PerturbationKind::ModifyAttribute, &single, &mut rng).is_err());
        let same = SceneGraph::new(
            1000,
            vec![obj(0, "red", "circle", [0, 0, 100, 100]), obj(1, "red", "circle", [300, 0, 400, 100])],
        )
        .unwrap();
        assert!(perturb(&same, &derive_prompt(&same), PerturbationKind::SwapSpatialRelation, &v, &mut rng).is_err());
    }

    #[test]
    fn decouple_accounting() {
        let d = build_dataset(&manifest(8)).unwrap();
        let out = decouple(&d).unwrap();
        assert_eq!(out.len(), 12);
        assert_eq!(stream_counts(&out), (8, 4));
        assert_eq!(&out[..8], &d[..]);
        assert!(matches!(decouple(&out), Err(DatasetError::DoubleDecouple)));

        let all_true: Vec<_> = d.iter().filter(|s| s.label().is_true()).cloned().collect();
        assert_eq!(decouple(&all_true).unwrap(), all_true);
    }

    #[test]
    fn jsonl_edge_cases() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        fs::write(&p, "").unwrap();
        assert!(load_jsonl(&p).unwrap().is_empty());

        let d = build_dataset(&manifest(3)).unwrap();
        let text = to_jsonl_string(&d);
        let mut lines: Vec<&str> = text.lines().collect();
        let cut = &lines[1][..lines[1].len() / 2];
        lines[1] = cut;
        fs::write(&p, lines.join("\n")).unwrap();
        match load_jsonl(&p) {
            Err(DatasetError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(load_jsonl(&dir.path().join("missing")), Err(DatasetError::Io(_))));
    }

    #[test]
    fn jsonl_line_shape() {
        let d = build_dataset(&manifest(2)).unwrap();
        let line = serde_json::to_string(&d[0]).unwrap();
        assert!(line.starts_with(r#"{"scene":{"canvas":1000,"objects":["#));
        for key in [r#""prompt":"#, r#""label":"#, r#""gt_regions":"#, r#""stream":"Judgment""#] {
            assert!(line.contains(key), "{key} missing from {line}");
        }
    }
}
