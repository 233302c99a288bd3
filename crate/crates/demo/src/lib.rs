//! wasm-bindgen bindings for the browser demo. Every export takes plain
//! numbers and returns a JSON string; the page does the drawing.

use metaverify::agent::fixtures::{solvable_fixture, unsatisfiable_fixture};
use metaverify::agent::{run_loop, LoopState, MockEditor, OracleVerifier};
use metaverify::dataset::prompt::check_consistency;
use metaverify::dataset::DatasetManifest;
use metaverify::lab::gated::{population_snr_dec, population_snr_joint, population_var_joint, simulate_gated_with, Gate, GatedEstimatorConfig};
use metaverify::reward::{bbox_meta_reward, iou};
use metaverify::{BBox, MetaKind, Threshold};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize, PartialEq)]
pub struct IouView {
    pub num: u64,
    pub den: u64,
    pub iou: f64,
    pub meta_continuous: f64,
    pub meta_gated: f64,
    /// Joint total for a False verdict on a False sample, format satisfied.
    pub joint_false: f64,
}

pub fn iou_view(pred: [i64; 4], gt: [i64; 4], threshold: f64) -> Result<IouView, String> {
    let b = |v: [i64; 4]| BBox::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string());
    let (p, g) = (b(pred)?, b(gt)?);
    let threshold = Threshold::new(threshold).map_err(|e| e.to_string())?;
    let r = iou(&p, &g);
    let meta = |kind| bbox_meta_reward(&[p], &[g], kind).map_err(|e| e.to_string());
    let meta_gated = meta(MetaKind::IoUGated { threshold })?;
    Ok(IouView {
        num: *r.numer(),
        den: *r.denom(),
        iou: *r.numer() as f64 / *r.denom() as f64,
        meta_continuous: meta(MetaKind::IoUContinuous)?,
        meta_gated,
        joint_false: 1.0 + meta_gated,
    })
}

#[derive(Debug, Serialize, PartialEq)]
pub struct CurvePoint {
    pub p: f64,
    pub var_joint: f64,
    pub var_dec: f64,
    pub snr_joint: f64,
    pub snr_dec: f64,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct SimPoint {
    pub p: f64,
    pub var_joint: f64,
    pub snr_joint: f64,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct VarianceView {
    pub curve: Vec<CurvePoint>,
    pub simulated: Vec<SimPoint>,
}

/// Closed-form curves over `p ∈ [0.01, 1]` for a one-dimensional `G_dec`
/// with mean `mean` and variance `var`, plus Monte Carlo points.
pub fn variance_view(mean: f64, var: f64, n_samples: usize, seed: u64) -> Result<VarianceView, String> {
    if !(mean.is_finite() && var.is_finite() && var > 0.0) {
        return Err("mean must be finite and variance positive".into());
    }
    let (m, v) = ([mean], [var]);
    let curve = (1..=100)
        .map(|i| {
            let p = f64::from(i) / 100.0;
            CurvePoint {
                p,
                var_joint: population_var_joint(p, &m, &v),
                var_dec: var,
                snr_joint: population_snr_joint(p, &m, &v),
                snr_dec: population_snr_dec(&m, &v),
            }
        })
        .collect();
    let simulated = [0.1, 0.25, 0.5, 0.75, 1.0]
        .into_iter()
        .map(|p| {
            let cfg = GatedEstimatorConfig {
                p_acc: p,
                dec_mean: m.to_vec(),
                dec_cov: v.to_vec(),
                n_samples,
                seed,
            };
            let r = simulate_gated_with(&cfg, Gate::Indicator, 1).map_err(|e| e.to_string())?;
            Ok(SimPoint {
                p,
                var_joint: r.empirical_var_joint,
                snr_joint: r.snr_joint,
            })
        })
        .collect::<Result<_, String>>()?;
    Ok(VarianceView { curve, simulated })
}

#[derive(Debug, Serialize)]
pub struct LoopView {
    pub state: LoopState,
    /// Violations of each scene in the trajectory, initial scene first.
    pub violations: Vec<usize>,
}

/// Oracle verifier against a mock editor on a seeded fixture. `k = 0`
/// picks an unsatisfiable prompt.
pub fn loop_view(index: u64, k: usize, fidelity: f64, seed: u64, max_steps: usize) -> Result<LoopView, String> {
    if !(0.0..=1.0).contains(&fidelity) {
        return Err("fidelity must lie in [0, 1]".into());
    }
    let m = DatasetManifest::default();
    let f = if k == 0 { unsatisfiable_fixture(&m, index) } else { solvable_fixture(&m, index, k) };
    let state = run_loop(&f.scene, &f.prompt, &OracleVerifier, &MockEditor::new(fidelity, seed), max_steps)
        .map_err(|e| e.error.to_string())?;
    let count = |s| check_consistency(s, &state.prompt).map(|v| v.len()).map_err(|e| e.to_string());
    let mut violations = vec![count(&state.initial)?];
    for h in &state.history {
        if let Some(s) = &h.edited {
            violations.push(count(s)?);
        }
    }
    Ok(LoopView { state, violations })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = iouExplorer)]
#[allow(clippy::too_many_arguments)]
pub fn iou_explorer(px1: i32, py1: i32, px2: i32, py2: i32, gx1: i32, gy1: i32, gx2: i32, gy2: i32, threshold: f64) -> Result<String, JsError> {
    let v = |a: i32, b: i32, c: i32, d: i32| [a, b, c, d].map(i64::from);
    to_js(iou_view(v(px1, py1, px2, py2), v(gx1, gy1, gx2, gy2), threshold))
}

#[wasm_bindgen(js_name = varianceCurves)]
pub fn variance_curves(mean: f64, var: f64, n_samples: u32, seed: u32) -> Result<String, JsError> {
    to_js(variance_view(mean, var, n_samples as usize, u64::from(seed)))
}

#[wasm_bindgen(js_name = verifyEditLoop)]
pub fn verify_edit_loop(index: u32, k: u32, fidelity: f64, seed: u32, max_steps: u32) -> Result<String, JsError> {
    to_js(loop_view(u64::from(index), k as usize, fidelity, u64::from(seed), max_steps as usize))
}

#[cfg(test)]
mod tests {
    use super::*;
    use metaverify::agent::LoopStatus;

    #[test]
    fn iou_half_overlap() {
        // 4x4 boxes sharing a 2x4 strip: 8 / 24.
        let v = iou_view([0, 0, 4, 4], [2, 0, 6, 4], 0.6).unwrap();
        assert_eq!((v.num, v.den), (1, 3));
        assert_eq!(v.meta_gated, 0.0);
        assert!((v.meta_continuous - 1.0 / 3.0).abs() < 1e-12);
        let same = iou_view([1, 1, 5, 5], [1, 1, 5, 5], 0.6).unwrap();
        assert_eq!((same.iou, same.meta_gated, same.joint_false), (1.0, 1.0, 2.0));
        assert!(iou_view([3, 0, 1, 4], [0, 0, 1, 1], 0.6).is_err());
        assert!(iou_view([0, 0, 1, 1], [0, 0, 1, 1], 0.0).is_err());
    }

    #[test]
    fn curves_match_closed_form() {
        let v = variance_view(2.0, 1.0, 20_000, 3).unwrap();
        assert_eq!(v.curve.len(), 100);
        let last = v.curve.last().unwrap();
        assert!((last.var_joint - 1.0).abs() < 1e-12);
        assert!((last.snr_joint - last.snr_dec).abs() < 1e-12);
        for s in &v.simulated {
            let want = population_var_joint(s.p, &[2.0], &[1.0]);
            assert!((s.var_joint - want).abs() / want < 0.1, "{s:?}");
        }
        assert!(variance_view(1.0, 0.0, 10, 0).is_err());
    }

    #[test]
    fn loop_outcomes() {
        let v = loop_view(4, 2, 1.0, 0, 10).unwrap();
        assert_eq!(v.state.status, LoopStatus::Accepted);
        assert_eq!(v.violations.first(), Some(&2));
        assert_eq!(v.violations.last(), Some(&0));
        let u = loop_view(4, 0, 1.0, 0, 5).unwrap();
        assert_eq!(u.state.status, LoopStatus::Exhausted);
        assert!(loop_view(0, 1, 2.0, 0, 5).is_err());
    }
}
