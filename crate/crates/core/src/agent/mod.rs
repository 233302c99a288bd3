//! Verify → localize → edit loop over pluggable verifier and editor
//! clients, on scene graphs.

pub mod fixtures;
#[cfg(feature = "remote")]
pub mod remote;

use std::fmt;
use std::sync::Mutex;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::prompt::{check_consistency, PromptSpec, Violation};
use crate::trainer::features::featurize;
use crate::trainer::policy::ToyPolicy;
use crate::types::{is_token, BBox, Judgment, SceneGraph, SceneObject};

pub const DEFAULT_MAX_STEPS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("client error: {0}")]
    Client(String),
    #[error("prompt is not in the canonical grammar: {0}")]
    UnparseablePrompt(String),
    #[error("invalid verifier action: {0}")]
    InvalidAction(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EditOp {
    Add,
    Delete,
    Modify,
}

impl EditOp {
    pub fn as_str(self) -> &'static str {
        match self {
            EditOp::Add => "add",
            EditOp::Delete => "delete",
            EditOp::Modify => "modify",
        }
    }

    fn parse(s: &str) -> Option<EditOp> {
        match s {
            "add" => Some(EditOp::Add),
            "delete" => Some(EditOp::Delete),
            "modify" => Some(EditOp::Modify),
            _ => None,
        }
    }
}

/// An atomic edit. The instruction is always `"{op} {color} {category} at
/// {region}"`, or `"{op} object at {region}"` when the attributes are not
/// known, and is regenerated from its parts by [`SemanticAction::new`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticAction {
    pub op: EditOp,
    pub target_region: BBox,
    pub instruction: String,
}

/// Parsed form of an instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub op: EditOp,
    pub attributes: Option<(String, String)>,
    pub region: BBox,
}

impl SemanticAction {
    /// `attributes` is `(color, category)`.
    pub fn new(op: EditOp, target_region: BBox, attributes: Option<(&str, &str)>) -> Self {
        let instruction = match attributes {
            Some((color, category)) => format!("{} {color} {category} at {target_region}", op.as_str()),
            None => format!("{} object at {target_region}", op.as_str()),
        };
        SemanticAction {
            op,
            target_region,
            instruction,
        }
    }

    pub fn parse_instruction(s: &str) -> Result<Instruction, AgentError> {
        let bad = || AgentError::InvalidAction(format!("malformed instruction {s:?}"));
        let (head, region) = s.split_once(" at ").ok_or_else(bad)?;
        let region: BBox = serde_json::from_str(region).map_err(|_| bad())?;
        let words: Vec<&str> = head.split(' ').collect();
        let (op, attributes) = match words.as_slice() {
            [op, "object"] => (*op, None),
            [op, color, category] if is_token(color) && is_token(category) => {
                (*op, Some((color.to_string(), category.to_string())))
            }
            _ => return Err(bad()),
        };
        Ok(Instruction {
            op: EditOp::parse(op).ok_or_else(bad)?,
            attributes,
            region,
        })
    }

    /// Checks that the instruction is the canonical rendering of the
    /// action's own op and region.
    pub fn validate(&self) -> Result<Instruction, AgentError> {
        let ins = SemanticAction::parse_instruction(&self.instruction)?;
        let attrs = ins.attributes.as_ref().map(|(c, k)| (c.as_str(), k.as_str()));
        if ins.op != self.op || ins.region != self.target_region || SemanticAction::new(self.op, self.target_region, attrs) != *self
        {
            return Err(AgentError::InvalidAction(format!(
                "instruction {:?} does not match op/region",
                self.instruction
            )));
        }
        Ok(ins)
    }
}

impl fmt::Display for SemanticAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.instruction)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierAction {
    pub judgment: Judgment,
    pub spatial: Vec<BBox>,
    pub semantic: Vec<SemanticAction>,
}

impl VerifierAction {
    pub fn accept() -> Self {
        VerifierAction {
            judgment: Judgment::True,
            spatial: vec![],
            semantic: vec![],
        }
    }

    pub fn reject(semantic: Vec<SemanticAction>) -> Self {
        VerifierAction {
            judgment: Judgment::False,
            spatial: semantic.iter().map(|a| a.target_region).collect(),
            semantic,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: String| Err(AgentError::InvalidAction(m));
        if self.spatial.len() != self.semantic.len() {
            return bad(format!("{} boxes but {} semantic actions", self.spatial.len(), self.semantic.len()));
        }
        if self.judgment.is_true() != self.spatial.is_empty() {
            return bad("actions must be empty exactly when the judgment is True".into());
        }
        for (b, a) in self.spatial.iter().zip(&self.semantic) {
            if *b != a.target_region {
                return bad(format!("box {b} is not the target of {:?}", a.instruction));
            }
            a.validate()?;
        }
        Ok(())
    }
}

pub trait VerifierClient {
    fn act(&self, scene: &SceneGraph, prompt: &str) -> Result<VerifierAction, AgentError>;
}

pub trait EditorClient {
    fn edit(&self, scene: &SceneGraph, actions: &[SemanticAction]) -> Result<SceneGraph, AgentError>;
}

impl<T: VerifierClient + ?Sized> VerifierClient for &T {
    fn act(&self, scene: &SceneGraph, prompt: &str) -> Result<VerifierAction, AgentError> {
        (**self).act(scene, prompt)
    }
}

impl<T: EditorClient + ?Sized> EditorClient for &T {
    fn edit(&self, scene: &SceneGraph, actions: &[SemanticAction]) -> Result<SceneGraph, AgentError> {
        (**self).edit(scene, actions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LoopStatus {
    Running,
    Accepted,
    Exhausted,
}

/// One verify call and, for a False verdict, the scene the editor returned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub action: VerifierAction,
    pub edited: Option<SceneGraph>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopState {
    pub initial: SceneGraph,
    pub scene: SceneGraph,
    pub prompt: String,
    /// Completed edit rounds.
    pub step: usize,
    pub history: Vec<HistoryEntry>,
    pub status: LoopStatus,
}

impl LoopState {
    pub fn verify_calls(&self) -> usize {
        self.history.len()
    }
}

/// A client failure; `state` holds everything recorded before it.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopAbort {
    pub error: AgentError,
    pub state: Box<LoopState>,
}

impl fmt::Display for LoopAbort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "loop aborted at step {}: {}", self.state.step, self.error)
    }
}

impl std::error::Error for LoopAbort {}

pub fn run_loop<V: VerifierClient + ?Sized, E: EditorClient + ?Sized>(
    initial: &SceneGraph,
    prompt: &str,
    verifier: &V,
    editor: &E,
    max_steps: usize,
) -> Result<LoopState, LoopAbort> {
    run_loop_observed(initial, prompt, verifier, editor, max_steps, &mut |_| {})
}

/// [`run_loop`], calling `observe` with a snapshot after every verify call
/// (and its edit, if any). The last snapshot carries the final status.
pub fn run_loop_observed<V: VerifierClient + ?Sized, E: EditorClient + ?Sized>(
    initial: &SceneGraph,
    prompt: &str,
    verifier: &V,
    editor: &E,
    max_steps: usize,
    observe: &mut dyn FnMut(&LoopState),
) -> Result<LoopState, LoopAbort> {
    let mut state = LoopState {
        initial: initial.clone(),
        scene: initial.clone(),
        prompt: prompt.to_string(),
        step: 0,
        history: vec![],
        status: LoopStatus::Running,
    };
    let abort = |error, state: &LoopState| LoopAbort {
        error,
        state: Box::new(state.clone()),
    };
    while state.step < max_steps {
        let action = match verifier.act(&state.scene, prompt).and_then(|a| a.validate().map(|_| a)) {
            Ok(a) => a,
            Err(e) => return Err(abort(e, &state)),
        };
        if action.judgment.is_true() {
            state.history.push(HistoryEntry { action, edited: None });
            state.status = LoopStatus::Accepted;
            observe(&state);
            return Ok(state);
        }
        let edited = match editor.edit(&state.scene, &action.semantic) {
            Ok(s) => s,
            Err(e) => {
                state.history.push(HistoryEntry { action, edited: None });
                return Err(abort(e, &state));
            }
        };
        state.scene = edited.clone();
        state.history.push(HistoryEntry {
            action,
            edited: Some(edited),
        });
        state.step += 1;
        if state.step == max_steps {
            state.status = LoopStatus::Exhausted;
        }
        observe(&state);
    }
    state.status = LoopStatus::Exhausted;
    Ok(state)
}

/// The fixing action for one violation.
fn fixes(v: &Violation, spec: &PromptSpec) -> Vec<SemanticAction> {
    let prompt_attrs = |r: &BBox| {
        spec.objects
            .iter()
            .find(|o| o.region == *r)
            .map(|o| (o.color.clone(), o.category.clone()))
    };
    match v {
        Violation::Missing { region, color, category } => {
            vec![SemanticAction::new(EditOp::Add, *region, Some((color, category)))]
        }
        Violation::Extra { region, color, category } => {
            vec![SemanticAction::new(EditOp::Delete, *region, Some((color, category)))]
        }
        Violation::Attribute {
            region,
            want_color,
            want_category,
            ..
        } => vec![SemanticAction::new(EditOp::Modify, *region, Some((want_color, want_category)))],
        Violation::Relation { a, b, .. } => [a, b]
            .into_iter()
            .map(|r| {
                let attrs = prompt_attrs(r);
                SemanticAction::new(EditOp::Modify, *r, attrs.as_ref().map(|(c, k)| (c.as_str(), k.as_str())))
            })
            .collect(),
    }
}

/// Ground-truth verifier: every violation, each with its fixing action.
pub fn oracle_verifier(scene: &SceneGraph, prompt: &str) -> Result<VerifierAction, AgentError> {
    let spec = PromptSpec::parse(prompt).map_err(|e| AgentError::UnparseablePrompt(e.to_string()))?;
    let violations = check_consistency(scene, prompt).map_err(|e| AgentError::UnparseablePrompt(e.to_string()))?;
    if violations.is_empty() {
        return Ok(VerifierAction::accept());
    }
    Ok(VerifierAction::reject(violations.iter().flat_map(|v| fixes(v, &spec)).collect()))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OracleVerifier;

impl VerifierClient for OracleVerifier {
    fn act(&self, scene: &SceneGraph, prompt: &str) -> Result<VerifierAction, AgentError> {
        oracle_verifier(scene, prompt)
    }
}

/// Where an action ended up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Landing {
    Landed,
    Skipped,
    Misplaced(BBox),
}

fn apply_at(objects: &mut Vec<SceneObject>, next_id: &mut u32, op: EditOp, attrs: Option<&(String, String)>, region: BBox) {
    let at = objects.iter().position(|o| o.region == region);
    match (op, at) {
        (EditOp::Delete, Some(i)) => {
            objects.remove(i);
        }
        (EditOp::Add | EditOp::Modify, Some(i)) => {
            if let Some((c, k)) = attrs {
                objects[i].color = c.clone();
                objects[i].category = k.clone();
            }
        }
        (EditOp::Add, None) => {
            if let Some((c, k)) = attrs {
                objects.push(SceneObject {
                    id: *next_id,
                    category: k.clone(),
                    color: c.clone(),
                    region,
                });
                *next_id += 1;
            }
        }
        (EditOp::Delete | EditOp::Modify, None) => {}
    }
}

/// Applies `actions` in order. Each lands at its target with probability
/// `fidelity`; otherwise it is skipped or, with equal odds, applied at a
/// random other object's region (skipped if there is none).
pub fn mock_editor<R: Rng + ?Sized>(
    scene: &SceneGraph,
    actions: &[SemanticAction],
    fidelity: f64,
    rng: &mut R,
) -> Result<(SceneGraph, Vec<Landing>), AgentError> {
    let mut objects = scene.objects().to_vec();
    let mut next_id = scene.next_id();
    let mut landings = Vec::with_capacity(actions.len());
    for a in actions {
        let ins = a.validate()?;
        let landing = if fidelity >= 1.0 || rng.random::<f64>() < fidelity {
            Landing::Landed
        } else if rng.random_bool(0.5) {
            Landing::Skipped
        } else {
            let others: Vec<BBox> = objects
                .iter()
                .map(|o| o.region)
                .filter(|r| *r != a.target_region)
                .collect();
            if others.is_empty() {
                Landing::Skipped
            } else {
                Landing::Misplaced(others[rng.random_range(0..others.len())])
            }
        };
        match landing {
            Landing::Landed => apply_at(&mut objects, &mut next_id, a.op, ins.attributes.as_ref(), a.target_region),
            Landing::Misplaced(r) => apply_at(&mut objects, &mut next_id, a.op, ins.attributes.as_ref(), r),
            Landing::Skipped => {}
        }
        landings.push(landing);
    }
    let edited = SceneGraph::new(scene.canvas(), objects).map_err(|e| AgentError::InvalidAction(e.to_string()))?;
    Ok((edited, landings))
}

/// Seeded [`mock_editor`] as a client. The rng is shared behind a mutex, so
/// concurrent loops interleave their draws; use one editor per loop for
/// reproducible runs.
pub struct MockEditor {
    fidelity: f64,
    rng: Mutex<ChaCha8Rng>,
}

impl MockEditor {
    pub fn new(fidelity: f64, seed: u64) -> Self {
        MockEditor {
            fidelity: fidelity.clamp(0.0, 1.0),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn perfect() -> Self {
        MockEditor::new(1.0, 0)
    }
}

impl EditorClient for MockEditor {
    fn edit(&self, scene: &SceneGraph, actions: &[SemanticAction]) -> Result<SceneGraph, AgentError> {
        let mut rng = self.rng.lock().map_err(|_| AgentError::Client("editor rng poisoned".into()))?;
        mock_editor(scene, actions, self.fidelity, &mut *rng).map(|(s, _)| s)
    }
}

/// Re-applies every recorded action with a perfect editor.
pub fn replay(initial: &SceneGraph, history: &[HistoryEntry]) -> Result<SceneGraph, AgentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut scene = initial.clone();
    for h in history.iter().filter(|h| h.edited.is_some()) {
        scene = mock_editor(&scene, &h.action.semantic, 1.0, &mut rng)?.0;
    }
    Ok(scene)
}

/// Greedy decoding of a toy policy as a verifier: at most one box, with
/// the edit read off the scene–prompt difference at that box.
#[derive(Debug, Clone)]
pub struct TrainedVerifier {
    policy: ToyPolicy,
}

pub fn trained_verifier_adapter(policy: ToyPolicy) -> TrainedVerifier {
    TrainedVerifier { policy }
}

impl VerifierClient for TrainedVerifier {
    fn act(&self, scene: &SceneGraph, prompt: &str) -> Result<VerifierAction, AgentError> {
        let f = featurize(scene, prompt, self.policy.grid_cells());
        let a = self.policy.greedy(&f, false);
        let Some(k) = a.candidate else {
            return Ok(VerifierAction::accept());
        };
        let region = f.candidates[k];
        let wanted = PromptSpec::parse(prompt)
            .ok()
            .and_then(|s| s.objects.into_iter().find(|o| o.region == region));
        let have = scene.object_at(&region);
        let action = match (wanted, have) {
            (Some(w), None) => SemanticAction::new(EditOp::Add, region, Some((&w.color, &w.category))),
            (Some(w), Some(_)) => SemanticAction::new(EditOp::Modify, region, Some((&w.color, &w.category))),
            (None, Some(h)) => SemanticAction::new(EditOp::Delete, region, Some((&h.color, &h.category))),
            (None, None) => SemanticAction::new(EditOp::Delete, region, None),
        };
        Ok(VerifierAction::reject(vec![action]))
    }
}

/// Fraction of runs in `states` that ended `Accepted`.
pub fn accept_rate(states: &[LoopState]) -> f64 {
    if states.is_empty() {
        return 0.0;
    }
    states.iter().filter(|s| s.status == LoopStatus::Accepted).count() as f64 / states.len() as f64
}
