//! Loop fixtures: scenes broken by a known number of fixable edits, and
//! prompts no scene can satisfy.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::generate::{free_box, generate_scene, pick};
use crate::dataset::index_rng;
use crate::dataset::prompt::{check_consistency, derive_prompt, PromptSpec};
use crate::dataset::DatasetManifest;
use crate::types::{BBox, SceneGraph, SceneObject};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub scene: SceneGraph,
    pub prompt: String,
    /// Number of violations; `None` when the prompt is unsatisfiable.
    pub violations: Option<usize>,
}

/// A scene derived from a consistent one by `k` edits (removal, recolor or
/// an extra object), each producing exactly one violation.
pub fn solvable_fixture(manifest: &DatasetManifest, index: u64, k: usize) -> Fixture {
    let mut rng = index_rng(manifest.seed, index);
    loop {
        let target = generate_scene(&mut rng, manifest);
        if let Some(scene) = break_scene(&mut rng, manifest, &target, k) {
            let prompt = derive_prompt(&target);
            debug_assert_eq!(check_consistency(&scene, &prompt).map(|v| v.len()), Ok(k));
            return Fixture {
                scene,
                prompt,
                violations: Some(k),
            };
        }
    }
}

fn break_scene<R: Rng + ?Sized>(rng: &mut R, m: &DatasetManifest, target: &SceneGraph, k: usize) -> Option<SceneGraph> {
    let mut objects: Vec<SceneObject> = target.objects().to_vec();
    let mut order: Vec<usize> = (0..objects.len()).collect();
    order.shuffle(rng);
    let mut removed = vec![false; objects.len()];
    let mut targets = order.into_iter();
    let mut next_id = target.next_id();
    for _ in 0..k {
        match rng.random_range(0..3) {
            0 => removed[targets.next()?] = true,
            1 => {
                let i = targets.next()?;
                let colors: Vec<&String> = m.vocabulary.colors.iter().filter(|c| **c != objects[i].color).collect();
                if colors.is_empty() {
                    return None;
                }
                objects[i].color = colors[rng.random_range(0..colors.len())].clone();
            }
            _ => {
                let taken: Vec<BBox> = objects.iter().map(|o| o.region).collect();
                let region = free_box(rng, m.grid, &taken)?;
                objects.push(SceneObject {
                    id: next_id,
                    category: pick(rng, &m.vocabulary.categories).clone(),
                    color: pick(rng, &m.vocabulary.colors).clone(),
                    region,
                });
                removed.push(false);
                next_id += 1;
            }
        }
    }
    let kept = objects.into_iter().zip(removed).filter(|(_, r)| !r).map(|(o, _)| o).collect();
    SceneGraph::new(target.canvas(), kept).ok()
}

/// A consistent scene whose canonical prompt has one relation clause
/// reversed.
pub fn unsatisfiable_fixture(manifest: &DatasetManifest, index: u64) -> Fixture {
    let mut rng = index_rng(manifest.seed, index);
    let scene = generate_scene(&mut rng, manifest);
    let mut spec = PromptSpec::from_scene(&scene);
    let j = rng.random_range(0..spec.relations.len());
    spec.relations[j].relation = spec.relations[j].relation.inverse();
    Fixture {
        scene,
        prompt: spec.render(),
        violations: None,
    }
}

/// `n` solvable fixtures with `k` cycling through `1..=max_k`.
pub fn solvable_fixtures(manifest: &DatasetManifest, n: usize, max_k: usize) -> Vec<Fixture> {
    (0..n)
        .map(|i| solvable_fixture(manifest, i as u64, 1 + i % max_k.max(1)))
        .collect()
}

pub fn unsatisfiable_fixtures(manifest: &DatasetManifest, n: usize) -> Vec<Fixture> {
    (0..n).map(|i| unsatisfiable_fixture(manifest, (1 << 32) + i as u64)).collect()
}
