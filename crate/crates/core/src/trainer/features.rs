//! Fixed hand-crafted features of a (scene, prompt) pair.

use crate::dataset::prompt::{check_consistency, Violation};
use crate::types::{BBox, SceneGraph};

pub const JUDGMENT_FEATURES: usize = 5;
pub const GROUNDING_FEATURES: usize = 8;
pub const DEFAULT_GRID_CELLS: u32 = 4;

/// Judgment features: bias, any violation, flagged-region count (scaled,
/// capped at 1), any contradictory relation, prompt unparseable.
///
/// Per-candidate grounding features: bias, scene object here, prompt object
/// here, plain grid cell, missing here, extra here, attribute mismatch here,
/// part of a contradictory relation.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub judgment: Vec<f64>,
    pub candidates: Vec<BBox>,
    pub grounding: Vec<Vec<f64>>,
}

impl Features {
    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }
}

/// `cells × cells` partition of the canvas.
pub fn grid_regions(canvas: u32, cells: u32) -> Vec<BBox> {
    let cells = cells.max(1).min(canvas);
    let edge = |i: u32| i64::from(canvas) * i64::from(i) / i64::from(cells);
    (0..cells)
        .flat_map(|r| (0..cells).map(move |c| (r, c)))
        .map(|(r, c)| {
            BBox::on_grid(edge(c), edge(r), edge(c + 1), edge(r + 1), canvas).expect("grid cell inside canvas")
        })
        .collect()
}

/// Candidates are scene object regions, then prompt regions not already
/// listed, then grid cells not already listed.
pub fn featurize(scene: &SceneGraph, prompt: &str, grid_cells: u32) -> Features {
    let parsed = crate::dataset::prompt::PromptSpec::parse(prompt).ok();
    let violations = check_consistency(scene, prompt).unwrap_or_default();

    let mut candidates: Vec<BBox> = Vec::new();
    let mut push = |b: BBox| {
        if !candidates.contains(&b) {
            candidates.push(b);
        }
    };
    scene.objects().iter().for_each(|o| push(o.region));
    if let Some(spec) = &parsed {
        spec.objects.iter().for_each(|o| push(o.region));
    }
    grid_regions(scene.canvas(), grid_cells).into_iter().for_each(&mut push);

    let any = |f: fn(&Violation) -> bool| f64::from(u8::from(violations.iter().any(f)));
    let flagged = crate::dataset::prompt::violation_regions(&violations).len();
    let judgment = vec![
        1.0,
        f64::from(u8::from(!violations.is_empty())),
        (flagged as f64 / 4.0).min(1.0),
        any(|v| matches!(v, Violation::Relation { .. })),
        f64::from(u8::from(parsed.is_none())),
    ];

    let grounding = candidates
        .iter()
        .map(|c| {
            let in_scene = scene.object_at(c).is_some();
            let in_prompt = parsed.as_ref().is_some_and(|s| s.objects.iter().any(|o| o.region == *c));
            let here = |f: fn(&Violation) -> bool| {
                f64::from(u8::from(violations.iter().any(|v| f(v) && v.regions().contains(c))))
            };
            vec![
                1.0,
                f64::from(u8::from(in_scene)),
                f64::from(u8::from(in_prompt)),
                f64::from(u8::from(!in_scene && !in_prompt)),
                here(|v| matches!(v, Violation::Missing { .. })),
                here(|v| matches!(v, Violation::Extra { .. })),
                here(|v| matches!(v, Violation::Attribute { .. })),
                here(|v| matches!(v, Violation::Relation { .. })),
            ]
        })
        .collect();

    Features {
        judgment,
        candidates,
        grounding,
    }
}
