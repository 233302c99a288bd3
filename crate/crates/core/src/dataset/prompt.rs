//! Canonical scene prompts and the scene–prompt consistency checker.
//!
//! A canonical prompt enumerates every object in reading order (top to
//! bottom, then left to right) with its color, category and region, followed
//! by one spatial-relation clause per adjacent pair in that order:
//!
//! ```text
//! 2 objects. #1 red circle at [100,100,300,300]. #2 blue square at [400,120,600,330]. #1 is left-of #2.
//! ```
//!
//! The checker is the exact oracle for data generation and for the oracle
//! verifier in the agentic loop.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{is_token, BBox, SceneGraph, SceneObject};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unparseable prompt clause {clause:?}: {reason}")]
pub struct PromptError {
    pub clause: String,
    pub reason: String,
}

fn perr(clause: &str, reason: impl Into<String>) -> PromptError {
    PromptError {
        clause: clause.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    LeftOf,
    RightOf,
    Above,
    Below,
}

impl Relation {
    /// Relation of `a` to `b` on box centers. The dominant axis wins; ties go
    /// to the horizontal axis, and zero offsets read as left-of / above.
    pub fn between(a: &BBox, b: &BBox) -> Relation {
        let (ax, ay) = a.center2();
        let (bx, by) = b.center2();
        let (dx, dy) = (bx - ax, by - ay);
        if dx.abs() >= dy.abs() {
            if dx >= 0 {
                Relation::LeftOf
            } else {
                Relation::RightOf
            }
        } else if dy >= 0 {
            Relation::Above
        } else {
            Relation::Below
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::LeftOf => "left-of",
            Relation::RightOf => "right-of",
            Relation::Above => "above",
            Relation::Below => "below",
        }
    }

    pub fn inverse(self) -> Relation {
        match self {
            Relation::LeftOf => Relation::RightOf,
            Relation::RightOf => Relation::LeftOf,
            Relation::Above => Relation::Below,
            Relation::Below => Relation::Above,
        }
    }

    fn parse(s: &str) -> Option<Relation> {
        Some(match s {
            "left-of" => Relation::LeftOf,
            "right-of" => Relation::RightOf,
            "above" => Relation::Above,
            "below" => Relation::Below,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptObject {
    pub color: String,
    pub category: String,
    pub region: BBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationClause {
    /// Zero-based object indices.
    pub a: usize,
    pub relation: Relation,
    pub b: usize,
}

/// Structured form of a prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub objects: Vec<PromptObject>,
    pub relations: Vec<RelationClause>,
}

fn reading_order_key(o: &PromptObject) -> (u32, u32, u32, u32, &str, &str) {
    let r = &o.region;
    (r.y1(), r.x1(), r.y2(), r.x2(), o.color.as_str(), o.category.as_str())
}

impl PromptSpec {
    /// Canonical description of `scene`.
    pub fn from_scene(scene: &SceneGraph) -> PromptSpec {
        let mut objects: Vec<PromptObject> = scene
            .objects()
            .iter()
            .map(|o| PromptObject {
                color: o.color.clone(),
                category: o.category.clone(),
                region: o.region,
            })
            .collect();
        objects.sort_by(|a, b| reading_order_key(a).cmp(&reading_order_key(b)));
        let relations = (1..objects.len())
            .map(|i| RelationClause {
                a: i - 1,
                relation: Relation::between(&objects[i - 1].region, &objects[i].region),
                b: i,
            })
            .collect();
        PromptSpec { objects, relations }
    }

    pub fn render(&self) -> String {
        let n = self.objects.len();
        let mut out = format!("{n} {}.", if n == 1 { "object" } else { "objects" });
        for (i, o) in self.objects.iter().enumerate() {
            out.push_str(&format!(" #{} {} {} at {}.", i + 1, o.color, o.category, o.region));
        }
        for r in &self.relations {
            out.push_str(&format!(" #{} is {} #{}.", r.a + 1, r.relation.as_str(), r.b + 1));
        }
        out
    }

    pub fn parse(prompt: &str) -> Result<PromptSpec, PromptError> {
        let body = prompt.trim();
        let body = body.strip_suffix('.').ok_or_else(|| perr(body, "prompt must end with '.'"))?;
        let mut clauses = body.split(". ");

        let head = clauses.next().unwrap_or_default();
        let count: usize = match head.split_once(' ') {
            Some((n, "objects")) | Some((n, "object")) => n.parse().map_err(|_| perr(head, "bad object count"))?,
            _ => return Err(perr(head, "expected '<n> objects'")),
        };

        let mut objects = Vec::with_capacity(count);
        let mut relations = Vec::new();
        let mut seen_regions = HashSet::new();
        for clause in clauses {
            let words: Vec<&str> = clause.split(' ').collect();
            match words.as_slice() {
                [idx, color, category, "at", region] if relations.is_empty() => {
                    let i = parse_index(idx, clause)?;
                    if i != objects.len() {
                        return Err(perr(clause, "object clauses must be numbered consecutively"));
                    }
                    if !is_token(color) || !is_token(category) {
                        return Err(perr(clause, "attributes must be lowercase tokens"));
                    }
                    let region: BBox =
                        serde_json::from_str(region).map_err(|e| perr(clause, format!("bad region: {e}")))?;
                    if !seen_regions.insert(region) {
                        return Err(perr(clause, "duplicate object region"));
                    }
                    objects.push(PromptObject {
                        color: color.to_string(),
                        category: category.to_string(),
                        region,
                    });
                }
                [a, "is", rel, b] => {
                    let relation = Relation::parse(rel).ok_or_else(|| perr(clause, "unknown relation"))?;
                    let (a, b) = (parse_index(a, clause)?, parse_index(b, clause)?);
                    if a >= count || b >= count || a == b {
                        return Err(perr(clause, "relation references an unknown object"));
                    }
                    relations.push(RelationClause { a, relation, b });
                }
                _ => return Err(perr(clause, "unrecognized clause")),
            }
        }
        if objects.len() != count {
            return Err(perr(head, format!("declares {count} objects but lists {}", objects.len())));
        }
        Ok(PromptSpec { objects, relations })
    }
}

fn parse_index(tok: &str, clause: &str) -> Result<usize, PromptError> {
    tok.strip_prefix('#')
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .map(|n| n - 1)
        .ok_or_else(|| perr(clause, format!("bad object reference {tok:?}")))
}

/// Canonical prompt for a scene; the pair is consistent by construction.
pub fn derive_prompt(scene: &SceneGraph) -> String {
    PromptSpec::from_scene(scene).render()
}

/// A single reason a scene fails its prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// The prompt places an object where the scene has none.
    Missing { region: BBox, color: String, category: String },
    /// The scene has an object the prompt does not mention.
    Extra { region: BBox, color: String, category: String },
    /// Both mention the region, with different attributes.
    Attribute {
        region: BBox,
        want_color: String,
        want_category: String,
        have_color: String,
        have_category: String,
    },
    /// A relation clause contradicts the prompt's own regions. No scene can
    /// satisfy such a prompt.
    Relation { a: BBox, b: BBox, stated: Relation, actual: Relation },
}

impl Violation {
    pub fn regions(&self) -> Vec<BBox> {
        match self {
            Violation::Missing { region, .. } | Violation::Extra { region, .. } | Violation::Attribute { region, .. } => {
                vec![*region]
            }
            Violation::Relation { a, b, .. } => vec![*a, *b],
        }
    }

    pub fn is_fixable(&self) -> bool {
        !matches!(self, Violation::Relation { .. })
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Missing { region, color, category } => write!(f, "missing {color} {category} at {region}"),
            Violation::Extra { region, color, category } => write!(f, "extra {color} {category} at {region}"),
            Violation::Attribute {
                region,
                want_color,
                want_category,
                have_color,
                have_category,
            } => write!(f, "{have_color} {have_category} at {region} should be {want_color} {want_category}"),
            Violation::Relation { a, b, stated, actual } => {
                write!(f, "{a} is {} {b}, prompt says {}", actual.as_str(), stated.as_str())
            }
        }
    }
}

/// All violations of `prompt` by `scene`, in prompt order, then extra scene
/// objects by region, then relation clauses.
pub fn check_consistency(scene: &SceneGraph, prompt: &str) -> Result<Vec<Violation>, PromptError> {
    let spec = PromptSpec::parse(prompt)?;
    Ok(check_spec(scene, &spec))
}

pub fn check_spec(scene: &SceneGraph, spec: &PromptSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut claimed = vec![false; scene.objects().len()];

    for po in &spec.objects {
        let hit = scene
            .objects()
            .iter()
            .enumerate()
            .find(|(i, o)| !claimed[*i] && o.region == po.region);
        match hit {
            None => out.push(Violation::Missing {
                region: po.region,
                color: po.color.clone(),
                category: po.category.clone(),
            }),
            Some((i, o)) => {
                claimed[i] = true;
                if o.color != po.color || o.category != po.category {
                    out.push(Violation::Attribute {
                        region: po.region,
                        want_color: po.color.clone(),
                        want_category: po.category.clone(),
                        have_color: o.color.clone(),
                        have_category: o.category.clone(),
                    });
                }
            }
        }
    }

    let mut extras: Vec<&SceneObject> = scene
        .objects()
        .iter()
        .zip(&claimed)
        .filter(|(_, c)| !**c)
        .map(|(o, _)| o)
        .collect();
    extras.sort_by(|a, b| (a.region, &a.color, &a.category).cmp(&(b.region, &b.color, &b.category)));
    out.extend(extras.into_iter().map(|o| Violation::Extra {
        region: o.region,
        color: o.color.clone(),
        category: o.category.clone(),
    }));

    for r in &spec.relations {
        let (a, b) = (spec.objects[r.a].region, spec.objects[r.b].region);
        let actual = Relation::between(&a, &b);
        if actual != r.relation {
            out.push(Violation::Relation {
                a,
                b,
                stated: r.relation,
                actual,
            });
        }
    }
    out
}

pub fn is_consistent(scene: &SceneGraph, prompt: &str) -> Result<bool, PromptError> {
    check_consistency(scene, prompt).map(|v| v.is_empty())
}

/// Distinct regions touched by a violation list, in first-seen order.
pub fn violation_regions(violations: &[Violation]) -> Vec<BBox> {
    let mut seen = HashSet::new();
    violations
        .iter()
        .flat_map(Violation::regions)
        .filter(|r| seen.insert(*r))
        .collect()
}
