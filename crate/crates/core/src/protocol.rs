//! Text protocol emitted by a verifier policy and the format reward over it.
//!
//! ```text
//! ws* <think>TEXT</think> ws* <judgment>True|False</judgment> ws*
//!     [ (<bbox>JSON</bbox> | <point>JSON</point>) ws* ] EOF
//! ```
//!
//! `TEXT` is any text not containing `</think>`. The rationale block holds a
//! JSON array of 4-arrays (bbox mode) or 2-arrays (point mode); the mode
//! decides which block is legal. Tokens are case-sensitive.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{BBox, Judgment, Point, Rationale, VerifierOutput};

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const JUDGMENT_OPEN: &str = "<judgment>";
const JUDGMENT_CLOSE: &str = "</judgment>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ProtocolMode {
    #[default]
    BboxMode,
    PointMode,
}

impl ProtocolMode {
    fn tags(self) -> (&'static str, &'static str) {
        match self {
            ProtocolMode::BboxMode => ("<bbox>", "</bbox>"),
            ProtocolMode::PointMode => ("<point>", "</point>"),
        }
    }

    fn other(self) -> ProtocolMode {
        match self {
            ProtocolMode::BboxMode => ProtocolMode::PointMode,
            ProtocolMode::PointMode => ProtocolMode::BboxMode,
        }
    }

    fn accepts(self, r: &Rationale) -> bool {
        matches!(
            (self, r),
            (ProtocolMode::BboxMode, Rationale::Boxes(_)) | (ProtocolMode::PointMode, Rationale::Points(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("missing or unterminated <think> block at byte {0}")]
    MissingThinkBlock(usize),
    #[error("missing or malformed <judgment> line at byte {0}")]
    MissingJudgment(usize),
    #[error("malformed rationale block at byte {at}: {reason}")]
    MalformedRationale { at: usize, reason: String },
    #[error("unexpected trailing content at byte {0}")]
    TrailingGarbage(usize),
    #[error("rationale {rationale} cannot be written in {mode:?}")]
    ModeMismatch { rationale: &'static str, mode: ProtocolMode },
    #[error("think text contains the closing tag")]
    UnencodableThink,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn eat(&mut self, tag: &str) -> bool {
        if self.rest().starts_with(tag) {
            self.pos += tag.len();
            true
        } else {
            false
        }
    }

    /// Text up to (not including) `close`, consuming the close tag.
    fn until(&mut self, close: &str) -> Option<&'a str> {
        let rest = self.rest();
        let end = rest.find(close)?;
        self.pos += end + close.len();
        Some(&rest[..end])
    }
}

/// Parses `raw` under `mode`. Total: every input yields either an output or
/// the first violated grammar rule.
pub fn parse(raw: &str, mode: ProtocolMode) -> Result<VerifierOutput, ProtocolError> {
    let mut c = Cursor { src: raw, pos: 0 };

    c.skip_ws();
    let at = c.pos;
    if !c.eat(THINK_OPEN) {
        return Err(ProtocolError::MissingThinkBlock(at));
    }
    let think = c.until(THINK_CLOSE).ok_or(ProtocolError::MissingThinkBlock(at))?;

    c.skip_ws();
    let at = c.pos;
    if !c.eat(JUDGMENT_OPEN) {
        return Err(ProtocolError::MissingJudgment(at));
    }
    let judgment = c
        .until(JUDGMENT_CLOSE)
        .and_then(|tok| tok.parse::<Judgment>().ok())
        .ok_or(ProtocolError::MissingJudgment(at))?;

    c.skip_ws();
    let at = c.pos;
    let (open, close) = mode.tags();
    let rationale = if c.eat(open) {
        let body = c.until(close).ok_or_else(|| ProtocolError::MalformedRationale {
            at,
            reason: format!("unterminated {open} block"),
        })?;
        let r = parse_rationale_body(body, mode).map_err(|reason| ProtocolError::MalformedRationale { at, reason })?;
        c.skip_ws();
        r
    } else if c.rest().starts_with(mode.other().tags().0) {
        return Err(ProtocolError::MalformedRationale {
            at,
            reason: format!("{} block not allowed in {mode:?}", mode.other().tags().0),
        });
    } else {
        Rationale::None
    };

    if !c.rest().is_empty() {
        return Err(ProtocolError::TrailingGarbage(c.pos));
    }

    Ok(VerifierOutput {
        raw: raw.to_string(),
        think: think.to_string(),
        judgment,
        rationale,
    })
}

fn parse_rationale_body(body: &str, mode: ProtocolMode) -> Result<Rationale, String> {
    match mode {
        ProtocolMode::BboxMode => {
            let arrays: Vec<[i64; 4]> = serde_json::from_str(body).map_err(|e| e.to_string())?;
            let boxes = arrays
                .into_iter()
                .map(BBox::try_from)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            Rationale::boxes(boxes).map_err(|e| e.to_string())
        }
        ProtocolMode::PointMode => {
            let arrays: Vec<[i64; 2]> = serde_json::from_str(body).map_err(|e| e.to_string())?;
            let points = arrays
                .into_iter()
                .map(Point::try_from)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            Rationale::points(points).map_err(|e| e.to_string())
        }
    }
}

/// Writes the canonical protocol text for `v`. `v.raw` is ignored.
pub fn serialize(v: &VerifierOutput, mode: ProtocolMode) -> Result<String, ProtocolError> {
    serialize_parts(&v.think, v.judgment, &v.rationale, mode)
}

fn serialize_parts(
    think: &str,
    judgment: Judgment,
    rationale: &Rationale,
    mode: ProtocolMode,
) -> Result<String, ProtocolError> {
    if think.contains(THINK_CLOSE) {
        return Err(ProtocolError::UnencodableThink);
    }
    let mut out = format!("{THINK_OPEN}{think}{THINK_CLOSE}\n{JUDGMENT_OPEN}{judgment}{JUDGMENT_CLOSE}");
    let (open, close) = mode.tags();
    let body = match (rationale, mode) {
        (Rationale::None, _) => None,
        (Rationale::Boxes(b), ProtocolMode::BboxMode) => Some(serde_json::to_string(b)),
        (Rationale::Points(p), ProtocolMode::PointMode) => Some(serde_json::to_string(p)),
        (r, mode) => {
            return Err(ProtocolError::ModeMismatch {
                rationale: rationale_name(r),
                mode,
            })
        }
    };
    if let Some(body) = body {
        let body = body.expect("arrays of integers always serialize");
        out.push('\n');
        out.push_str(open);
        out.push_str(&body);
        out.push_str(close);
    }
    Ok(out)
}

fn rationale_name(r: &Rationale) -> &'static str {
    match r {
        Rationale::None => "None",
        Rationale::Boxes(_) => "Boxes",
        Rationale::Points(_) => "Points",
        Rationale::Text(_) => "Text",
    }
}

/// Builds an output whose `raw` is its own canonical serialization.
pub fn build_output(
    think: &str,
    judgment: Judgment,
    rationale: Rationale,
    mode: ProtocolMode,
) -> Result<VerifierOutput, ProtocolError> {
    let raw = serialize_parts(think, judgment, &rationale, mode)?;
    Ok(VerifierOutput {
        raw,
        think: think.to_string(),
        judgment,
        rationale,
    })
}

/// 1 iff `raw` parses and a False judgment carries a rationale of the mode's
/// kind.
pub fn format_reward(raw: &str, mode: ProtocolMode) -> u8 {
    match parse(raw, mode) {
        Ok(v) => u8::from(v.judgment.is_true() || mode.accepts(&v.rationale)),
        Err(_) => 0,
    }
}

/// Format rule for localization-only outputs: the rationale is mandatory
/// whatever the judgment token says.
pub fn grounding_format_reward(raw: &str, mode: ProtocolMode) -> u8 {
    match parse(raw, mode) {
        Ok(v) => u8::from(mode.accepts(&v.rationale)),
        Err(_) => 0,
    }
}

/// Structure-only rule: think block and judgment line, in either mode.
pub fn structure_reward(raw: &str) -> u8 {
    u8::from(parse(raw, ProtocolMode::BboxMode).is_ok() || parse(raw, ProtocolMode::PointMode).is_ok())
}
