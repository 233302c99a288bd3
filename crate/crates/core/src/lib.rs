//! Rule-based multimodal meta-verification at desk scale.
//!
//! Verifier outputs follow a closed text protocol ([`protocol`]); rewards
//! are pure rule-based functions of those outputs ([`reward`]); symbolic
//! scenes stand in for images ([`dataset`]). On top of that sit a toy
//! group-relative policy trainer ([`trainer`]), exact and Monte-Carlo
//! checks of accuracy gating ([`lab`]), and a verify-localize-edit loop
//! ([`agent`]).

pub mod agent;
pub mod cli;
pub mod dataset;
pub mod lab;
pub mod par;
pub mod protocol;
pub mod reward;
pub mod trainer;
pub mod types;

pub use types::*;
