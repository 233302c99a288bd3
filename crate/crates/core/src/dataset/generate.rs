//! Scene sampling and label-flipping perturbations.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::prompt::{check_spec, derive_prompt, violation_regions, PromptSpec};
use super::{DatasetError, DatasetManifest};
use crate::types::{BBox, Judgment, LabeledSample, SceneGraph, SceneObject, Stream};

pub const MIN_OBJECTS: usize = 2;
pub const MAX_OBJECTS: usize = 8;
const PLACEMENT_TRIES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PerturbationKind {
    /// Scene edit: a new object appears that the prompt does not mention.
    AddObject,
    /// Scene edit: an object the prompt mentions is removed.
    RemoveObject,
    /// Prompt edit: one object's color (or category) is changed.
    ModifyAttribute,
    /// Scene edit: two objects trade places.
    SwapSpatialRelation,
}

impl PerturbationKind {
    pub const ALL: [PerturbationKind; 4] = [
        PerturbationKind::AddObject,
        PerturbationKind::RemoveObject,
        PerturbationKind::ModifyAttribute,
        PerturbationKind::SwapSpatialRelation,
    ];
}

/// Object vocabulary used by generation and perturbation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub categories: Vec<String>,
    pub colors: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect();
        Vocabulary {
            categories: s(&["circle", "square", "triangle", "star", "cube", "cup"]),
            colors: s(&["red", "blue", "green", "yellow", "black", "white"]),
        }
    }
}

fn random_box<R: Rng + ?Sized>(rng: &mut R, grid: u32) -> BBox {
    let lo = (grid / 12).max(1);
    let hi = (grid / 5).max(lo + 1);
    let w = rng.random_range(lo..=hi);
    let h = rng.random_range(lo..=hi);
    let x1 = rng.random_range(0..=grid - w);
    let y1 = rng.random_range(0..=grid - h);
    BBox::on_grid(x1.into(), y1.into(), (x1 + w).into(), (y1 + h).into(), grid)
        .expect("sampled box lies inside the grid")
}

pub(crate) fn free_box<R: Rng + ?Sized>(rng: &mut R, grid: u32, taken: &[BBox]) -> Option<BBox> {
    (0..PLACEMENT_TRIES)
        .map(|_| random_box(rng, grid))
        .find(|b| taken.iter().all(|t| !t.overlaps(b)))
}

pub(crate) fn pick<'a, R: Rng + ?Sized>(rng: &mut R, v: &'a [String]) -> &'a String {
    v.choose(rng).expect("vocabulary validated non-empty")
}

/// Samples a scene of 2–8 pairwise non-overlapping objects. Deterministic in
/// the rng state; callers seed it from (seed, index).
pub fn generate_scene<R: Rng + ?Sized>(rng: &mut R, manifest: &DatasetManifest) -> SceneGraph {
    let grid = manifest.grid;
    loop {
        let n = rng.random_range(MIN_OBJECTS..=MAX_OBJECTS);
        let mut objects: Vec<SceneObject> = Vec::with_capacity(n);
        for id in 0..n as u32 {
            let taken: Vec<BBox> = objects.iter().map(|o| o.region).collect();
            let Some(region) = free_box(rng, grid, &taken) else { break };
            objects.push(SceneObject {
                id,
                category: pick(rng, &manifest.vocabulary.categories).clone(),
                color: pick(rng, &manifest.vocabulary.colors).clone(),
                region,
            });
        }
        if objects.len() >= MIN_OBJECTS {
            return SceneGraph::new(grid, objects).expect("generated scene is valid");
        }
    }
}

/// Turns a consistent (scene, prompt) pair into a label=False sample whose
/// `gt_regions` are exactly the regions the consistency checker flags.
pub fn perturb<R: Rng + ?Sized>(
    scene: &SceneGraph,
    prompt: &str,
    kind: PerturbationKind,
    vocab: &Vocabulary,
    rng: &mut R,
) -> Result<LabeledSample, DatasetError> {
    let spec = PromptSpec::parse(prompt)?;
    if !check_spec(scene, &spec).is_empty() {
        return Err(DatasetError::NotPerturbable {
            kind,
            reason: "input pair is already inconsistent".into(),
        });
    }
    let not = |reason: &str| DatasetError::NotPerturbable {
        kind,
        reason: reason.to_string(),
    };
    let objs = scene.objects();

    let (new_scene, new_prompt, gt) = match kind {
        PerturbationKind::AddObject => {
            let taken: Vec<BBox> = objs.iter().map(|o| o.region).collect();
            let region = free_box(rng, scene.canvas(), &taken).ok_or_else(|| not("no free region"))?;
            let mut objects = objs.to_vec();
            objects.push(SceneObject {
                id: scene.next_id(),
                category: pick(rng, &vocab.categories).clone(),
                color: pick(rng, &vocab.colors).clone(),
                region,
            });
            (SceneGraph::new(scene.canvas(), objects)?, prompt.to_string(), vec![region])
        }
        PerturbationKind::RemoveObject => {
            if objs.len() < 2 {
                return Err(not("removing the only object would leave the prompt unsatisfiable"));
            }
            let i = rng.random_range(0..objs.len());
            let mut objects = objs.to_vec();
            let removed = objects.remove(i);
            (SceneGraph::new(scene.canvas(), objects)?, prompt.to_string(), vec![removed.region])
        }
        PerturbationKind::ModifyAttribute => {
            if spec.objects.is_empty() {
                return Err(not("prompt has no objects"));
            }
            let i = rng.random_range(0..spec.objects.len());
            let mut edited = spec.clone();
            let target = &mut edited.objects[i];
            let others = |v: &[String], cur: &str| v.iter().filter(|c| *c != cur).cloned().collect::<Vec<_>>();
            let colors = others(&vocab.colors, &target.color);
            let categories = others(&vocab.categories, &target.category);
            if !colors.is_empty() {
                target.color = pick(rng, &colors).clone();
            } else if !categories.is_empty() {
                target.category = pick(rng, &categories).clone();
            } else {
                return Err(not("vocabulary has a single color and category"));
            }
            let region = target.region;
            (scene.clone(), edited.render(), vec![region])
        }
        PerturbationKind::SwapSpatialRelation => {
            let differs = |a: &SceneObject, b: &SceneObject| a.color != b.color || a.category != b.category;
            // Prefer pairs that share a relation clause in the canonical prompt.
            let adjacent: Vec<(usize, usize)> = spec
                .relations
                .iter()
                .filter_map(|r| {
                    let ia = objs.iter().position(|o| o.region == spec.objects[r.a].region)?;
                    let ib = objs.iter().position(|o| o.region == spec.objects[r.b].region)?;
                    differs(&objs[ia], &objs[ib]).then_some((ia, ib))
                })
                .collect();
            let pairs = if adjacent.is_empty() {
                (0..objs.len())
                    .flat_map(|a| (a + 1..objs.len()).map(move |b| (a, b)))
                    .filter(|&(a, b)| differs(&objs[a], &objs[b]))
                    .collect()
            } else {
                adjacent
            };
            let &(a, b) = pairs.choose(rng).ok_or_else(|| not("no two objects differ"))?;
            let mut objects = objs.to_vec();
            let (ra, rb) = (objects[a].region, objects[b].region);
            objects[a].region = rb;
            objects[b].region = ra;
            (SceneGraph::new(scene.canvas(), objects)?, prompt.to_string(), vec![ra, rb])
        }
    };

    let flagged = violation_regions(&check_spec(&new_scene, &PromptSpec::parse(&new_prompt)?));
    let mut want = gt.clone();
    want.sort();
    let mut got = flagged;
    got.sort();
    assert_eq!(got, want, "perturbation {kind:?} must flag exactly the edited regions");

    Ok(LabeledSample::new(new_scene, new_prompt, Judgment::False, gt, Stream::Judgment)?)
}

/// Consistent pair for a scene.
pub fn true_sample(scene: SceneGraph) -> LabeledSample {
    let prompt = derive_prompt(&scene);
    LabeledSample::new(scene, prompt, Judgment::True, vec![], Stream::Judgment).expect("True sample is valid")
}
