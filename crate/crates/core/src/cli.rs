//! Command-line driver. Every command reads one TOML config (all sections
//! optional, unknown keys rejected), applies flag overrides, and writes its
//! outputs under `<out>/<command>-<hash>-s<seed>/`, where `hash` is taken
//! over the effective config.
//!
//! Exit codes: 0 success, 1 config or I/O error, 2 theory check failure,
//! 3 regime/dataset mismatch.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::fixtures::{solvable_fixtures, unsatisfiable_fixtures, Fixture};
use crate::agent::{
    run_loop_observed, trained_verifier_adapter, EditorClient, LoopState, LoopStatus, MockEditor, OracleVerifier,
    VerifierClient,
};
use crate::dataset::{build_dataset, decouple, load_jsonl, stream_counts, to_jsonl_string, DatasetManifest};
use crate::lab::{run_sweep, Gate, TheorySweep};
use crate::par::par_map;
use crate::trainer::checkpoint::Checkpoint;
use crate::trainer::{evaluate, metrics_csv, train, Regime, TrainerConfig, TrainerError};
use crate::types::{LabeledSample, MetaKind, Threshold};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_THEORY: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "metaverify", version, about = "Meta-verification rewards, gating checks, training and the edit loop")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML config; built-in defaults when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root of run directories [default: runs].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled dataset.
    Gen {
        /// Append one grounding-stream copy per False sample.
        #[arg(long)]
        decouple: bool,
    },
    /// Monte-Carlo sweep of the gated-estimator variance and SNR checks.
    Theory {
        /// Replace the indicator gate with a leaky one (negative control).
        #[arg(long, hide = true)]
        leak: Option<f64>,
    },
    /// Train the toy verifier policy.
    Train {
        #[arg(long)]
        regime: Option<RegimeArg>,
        #[arg(long)]
        meta: Option<MetaArg>,
        /// Training set (JSONL) instead of a generated one.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Evaluate a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Evaluation set (JSONL) instead of a generated one.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the verify-edit loop over the fixture sets.
    Tts {
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        fidelity: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Baseline,
    Joint,
    Decoupled,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Baseline => Regime::Baseline,
            RegimeArg::Joint => Regime::Joint,
            RegimeArg::Decoupled => Regime::Decoupled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetaArg {
    Iou,
    IouGated,
    Point,
}

impl From<MetaArg> for MetaKind {
    fn from(m: MetaArg) -> Self {
        match m {
            MetaArg::Iou => MetaKind::IoUContinuous,
            MetaArg::IouGated => MetaKind::IoUGated {
                threshold: Threshold::default(),
            },
            MetaArg::Point => MetaKind::PointGated,
        }
    }
}

/// Evaluation set and file inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Generated evaluation set size; drawn like `[dataset]` with the seed
    /// shifted by `eval_seed_offset`.
    pub eval_samples: usize,
    pub eval_seed_offset: u64,
    /// Used by `gen`; `train` decouples iff the regime is decoupled.
    pub decouple: bool,
    pub train: Option<PathBuf>,
    pub eval: Option<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            eval_samples: 200,
            eval_seed_offset: 10_000,
            decouple: false,
            train: None,
            eval: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifierKind {
    #[default]
    Oracle,
    Trained,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditorKind {
    #[default]
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub max_steps: usize,
    pub fidelity: f64,
    pub seed: u64,
    pub solvable: usize,
    /// Violations per solvable fixture cycle through `1..=max_violations`.
    pub max_violations: usize,
    pub unsatisfiable: usize,
    pub verifier: VerifierKind,
    pub editor: EditorKind,
    /// Policy for the trained verifier.
    pub checkpoint: Option<PathBuf>,
    pub verifier_url: Option<String>,
    pub editor_url: Option<String>,
    pub timeout_ms: u64,
    pub retries: u32,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            max_steps: crate::agent::DEFAULT_MAX_STEPS,
            fidelity: 1.0,
            seed: 0,
            solvable: 100,
            max_violations: 3,
            unsatisfiable: 20,
            verifier: VerifierKind::default(),
            editor: EditorKind::default(),
            checkpoint: None,
            verifier_url: None,
            editor_url: None,
            timeout_ms: 30_000,
            retries: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides every section seed when set.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub dataset: DatasetManifest,
    pub data: DataConfig,
    pub theory: TheorySweep,
    pub trainer: TrainerConfig,
    #[serde(rename = "loop")]
    pub tts: LoopConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.dataset.seed = seed;
        self.theory.seed = seed;
        self.trainer.seed = seed;
        self.tts.seed = seed;
    }

    pub fn set_threads(&mut self, threads: usize) {
        self.threads = Some(threads);
        self.trainer.threads = threads;
    }

    pub fn run_seed(&self) -> u64 {
        self.seed.unwrap_or(self.dataset.seed)
    }

    pub fn threads(&self) -> usize {
        self.threads.unwrap_or(1).max(1)
    }

    fn eval_manifest(&self) -> DatasetManifest {
        DatasetManifest {
            seed: self.dataset.seed.wrapping_add(self.data.eval_seed_offset),
            n_samples: self.data.eval_samples,
            ..self.dataset.clone()
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Theory(Vec<String>),
    Mismatch(String),
    Loop(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) | CliError::Loop(_) => EXIT_CONFIG,
            CliError::Theory(_) => EXIT_THEORY,
            CliError::Mismatch(_) => EXIT_MISMATCH,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Io(m) => write!(f, "io: {m}"),
            CliError::Theory(fails) => write!(f, "theory checks failed:\n  {}", fails.join("\n  ")),
            CliError::Mismatch(m) => write!(f, "{m}"),
            CliError::Loop(m) => write!(f, "loop: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<TrainerError> for CliError {
    fn from(e: TrainerError) -> Self {
        match e {
            TrainerError::RegimeDatasetMismatch(_) => CliError::Mismatch(e.to_string()),
            TrainerError::Io(m) => CliError::Io(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

/// Writes through a temporary sibling and renames, so a failed run leaves
/// no partial file behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

fn hash8(value: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    Sha256::digest(&bytes).iter().take(4).map(|b| format!("{b:02x}")).collect()
}

/// `<out>/<command>-<hash>-s<seed>` for the effective config plus any
/// command inputs that are not part of it. Output root and thread count do
/// not enter the hash.
pub fn run_dir(cfg: &RunConfig, command: &str, inputs: &impl Serialize) -> PathBuf {
    let root = cfg.out.clone().unwrap_or_else(|| PathBuf::from("runs"));
    let mut keyed = cfg.clone();
    keyed.out = None;
    keyed.threads = None;
    keyed.trainer.threads = 1;
    let h = hash8(&(command, &keyed, inputs));
    root.join(format!("{command}-{h}-s{}", cfg.run_seed()))
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

fn load_data(path: &Path) -> Result<Vec<LabeledSample>, CliError> {
    load_jsonl(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Summary written by `tts`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtsSummary {
    pub solvable: usize,
    pub solvable_accepted: usize,
    pub unsatisfiable: usize,
    pub unsatisfiable_exhausted: usize,
    pub aborted: usize,
    pub mean_verify_calls: f64,
}

/// What a command produced: the run directory and one line for stdout.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub dir: PathBuf,
    pub message: String,
}

fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed.or(cfg.seed) {
        cfg.set_seed(s);
    }
    if let Some(t) = cli.threads.or(cfg.threads) {
        cfg.set_threads(t.max(1));
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let mut cfg = effective_config(cli)?;
    match &cli.command {
        Command::Gen { decouple: d } => {
            cfg.data.decouple |= *d;
            cmd_gen(&cfg)
        }
        Command::Theory { leak } => cmd_theory(&cfg, leak.map_or(Gate::Indicator, Gate::Leaky)),
        Command::Train { regime, meta, data } => {
            if let Some(r) = regime {
                cfg.trainer.regime = (*r).into();
            }
            if let Some(m) = meta {
                cfg.trainer.meta_kind = (*m).into();
            }
            if let Some(d) = data {
                cfg.data.train = Some(d.clone());
            }
            cmd_train(&cfg)
        }
        Command::Eval { checkpoint, data } => {
            if let Some(d) = data {
                cfg.data.eval = Some(d.clone());
            }
            cmd_eval(&cfg, checkpoint)
        }
        Command::Tts { max_steps, fidelity } => {
            if let Some(k) = max_steps {
                cfg.tts.max_steps = *k;
            }
            if let Some(f) = fidelity {
                cfg.tts.fidelity = *f;
            }
            cmd_tts(&cfg)
        }
    }
}

pub fn cmd_gen(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut data = build_dataset(&cfg.dataset).map_err(|e| CliError::Config(e.to_string()))?;
    if cfg.data.decouple {
        data = decouple(&data).map_err(|e| CliError::Config(e.to_string()))?;
    }
    let dir = run_dir(cfg, "gen", &());
    write_atomic(&dir.join("dataset.jsonl"), &to_jsonl_string(&data))?;
    write_atomic(&dir.join("manifest.json"), &json(&cfg.dataset))?;
    let (j, g) = stream_counts(&data);
    Ok(Outcome {
        message: format!("{} records ({j} judgment, {g} grounding) in {}", data.len(), dir.display()),
        dir,
    })
}

pub fn cmd_theory(cfg: &RunConfig, gate: Gate) -> Result<Outcome, CliError> {
    if let Gate::Leaky(l) = gate {
        if !(0.0..=1.0).contains(&l) {
            return Err(CliError::Config(format!("leak {l} outside [0, 1]")));
        }
    }
    let report = run_sweep(&cfg.theory, gate, cfg.threads()).map_err(|e| CliError::Config(e.to_string()))?;
    let dir = run_dir(cfg, "theory", &gate_name(gate));
    write_atomic(&dir.join("theory.csv"), &report.csv())?;
    write_atomic(&dir.join("theory.json"), &json(&report))?;
    if !report.passed() {
        return Err(CliError::Theory(report.failures));
    }
    Ok(Outcome {
        message: format!("{} sweep rows passed; report in {}", report.rows.len(), dir.display()),
        dir,
    })
}

fn gate_name(gate: Gate) -> String {
    match gate {
        Gate::Indicator => "indicator".into(),
        Gate::Leaky(l) => format!("leaky:{l}"),
    }
}

fn eval_set(cfg: &RunConfig) -> Result<Vec<LabeledSample>, CliError> {
    match &cfg.data.eval {
        Some(p) => load_data(p),
        None => build_dataset(&cfg.eval_manifest()).map_err(|e| CliError::Config(e.to_string())),
    }
}

pub fn cmd_train(cfg: &RunConfig) -> Result<Outcome, CliError> {
    cfg.trainer.validate()?;
    let data = match &cfg.data.train {
        Some(p) => load_data(p)?,
        None => {
            let d = build_dataset(&cfg.dataset).map_err(|e| CliError::Config(e.to_string()))?;
            if cfg.trainer.regime == Regime::Decoupled {
                decouple(&d).map_err(|e| CliError::Config(e.to_string()))?
            } else {
                d
            }
        }
    };
    let eval = eval_set(cfg)?;
    let run = train(&cfg.trainer, &data, &eval)?;
    let dir = run_dir(cfg, "train", &());
    write_atomic(&dir.join("metrics.csv"), &metrics_csv(&run.metrics))?;
    write_atomic(
        &dir.join("checkpoint.json"),
        &Checkpoint::from_policy(&run.policy, cfg.trainer.group_size, cfg.trainer.seed).to_json(),
    )?;
    let report = evaluate(&run.policy, &eval)?;
    write_atomic(&dir.join("eval.json"), &json(&report))?;
    Ok(Outcome {
        message: format!(
            "{} steps: accuracy {:.3}, hit rate {:.3}; outputs in {}",
            cfg.trainer.steps,
            report.judgment_accuracy,
            report.grounding_hit_rate,
            dir.display()
        ),
        dir,
    })
}

pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path) -> Result<Outcome, CliError> {
    let policy = Checkpoint::load(checkpoint)?.to_policy()?;
    let eval = eval_set(cfg)?;
    let report = evaluate(&policy, &eval)?;
    let dir = run_dir(cfg, "eval", &checkpoint);
    write_atomic(&dir.join("eval.json"), &json(&report))?;
    Ok(Outcome {
        message: format!(
            "accuracy {:.3}, hit rate {:.3}, mean IoU {:.3}; report in {}",
            report.judgment_accuracy,
            report.grounding_hit_rate,
            report.mean_iou,
            dir.display()
        ),
        dir,
    })
}

fn verifier(cfg: &LoopConfig) -> Result<Box<dyn VerifierClient + Sync>, CliError> {
    match cfg.verifier {
        VerifierKind::Oracle => Ok(Box::new(OracleVerifier)),
        VerifierKind::Trained => {
            let path = cfg
                .checkpoint
                .as_ref()
                .ok_or_else(|| CliError::Config("loop.checkpoint is required for the trained verifier".into()))?;
            Ok(Box::new(trained_verifier_adapter(Checkpoint::load(path)?.to_policy()?)))
        }
        VerifierKind::Remote => remote_verifier(cfg),
    }
}

#[cfg(feature = "remote")]
fn remote_cfg(url: &Option<String>, cfg: &LoopConfig, what: &str) -> Result<crate::agent::remote::RemoteConfig, CliError> {
    let url = url
        .clone()
        .ok_or_else(|| CliError::Config(format!("loop.{what}_url is required for a remote {what}")))?;
    Ok(crate::agent::remote::RemoteConfig {
        url,
        timeout: std::time::Duration::from_millis(cfg.timeout_ms),
        retries: cfg.retries,
    })
}

#[cfg(feature = "remote")]
fn remote_verifier(cfg: &LoopConfig) -> Result<Box<dyn VerifierClient + Sync>, CliError> {
    Ok(Box::new(crate::agent::remote::RemoteVerifier::new(remote_cfg(
        &cfg.verifier_url,
        cfg,
        "verifier",
    )?)))
}

#[cfg(not(feature = "remote"))]
fn remote_verifier(_: &LoopConfig) -> Result<Box<dyn VerifierClient + Sync>, CliError> {
    Err(CliError::Config("built without the `remote` feature".into()))
}

fn editor(cfg: &LoopConfig, index: usize, prompt: &str) -> Result<Box<dyn EditorClient + Sync>, CliError> {
    match cfg.editor {
        EditorKind::Mock => Ok(Box::new(MockEditor::new(cfg.fidelity, cfg.seed.wrapping_add(index as u64)))),
        EditorKind::Remote => remote_editor(cfg, prompt),
    }
}

#[cfg(feature = "remote")]
fn remote_editor(cfg: &LoopConfig, prompt: &str) -> Result<Box<dyn EditorClient + Sync>, CliError> {
    Ok(Box::new(crate::agent::remote::RemoteEditor::new(
        remote_cfg(&cfg.editor_url, cfg, "editor")?,
        prompt,
    )))
}

#[cfg(not(feature = "remote"))]
fn remote_editor(_: &LoopConfig, _: &str) -> Result<Box<dyn EditorClient + Sync>, CliError> {
    Err(CliError::Config("built without the `remote` feature".into()))
}

/// Per-iteration snapshots and the final state or abort message of one fixture.
pub type FixtureRun = (Vec<LoopState>, Result<LoopState, String>);

/// Runs every fixture; each yields its per-iteration snapshots and the
/// final state or abort message.
pub fn run_fixtures(
    cfg: &LoopConfig,
    fixtures: &[Fixture],
    threads: usize,
) -> Result<Vec<FixtureRun>, CliError> {
    if !(0.0..=1.0).contains(&cfg.fidelity) {
        return Err(CliError::Config(format!("fidelity {} outside [0, 1]", cfg.fidelity)));
    }
    let v = verifier(cfg)?;
    let editors = fixtures
        .iter()
        .enumerate()
        .map(|(i, f)| editor(cfg, i, &f.prompt))
        .collect::<Result<Vec<_>, _>>()?;
    let jobs: Vec<(&Fixture, Box<dyn EditorClient + Sync>)> = fixtures.iter().zip(editors).collect();
    Ok(par_map(&jobs, threads, |_, (f, e)| {
        let mut trace = Vec::new();
        let end = run_loop_observed(&f.scene, &f.prompt, v.as_ref(), e.as_ref(), cfg.max_steps, &mut |s| {
            trace.push(s.clone())
        });
        (trace, end.map_err(|a| a.to_string()))
    }))
}

pub fn cmd_tts(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let manifest = DatasetManifest {
        seed: cfg.tts.seed,
        ..cfg.dataset.clone()
    };
    manifest.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let solvable = solvable_fixtures(&manifest, cfg.tts.solvable, cfg.tts.max_violations);
    let unsat = unsatisfiable_fixtures(&manifest, cfg.tts.unsatisfiable);
    let all: Vec<Fixture> = solvable.into_iter().chain(unsat).collect();
    let results = run_fixtures(&cfg.tts, &all, cfg.threads())?;

    let mut lines = String::new();
    let mut summary = TtsSummary {
        solvable: cfg.tts.solvable,
        solvable_accepted: 0,
        unsatisfiable: cfg.tts.unsatisfiable,
        unsatisfiable_exhausted: 0,
        aborted: 0,
        mean_verify_calls: 0.0,
    };
    let mut errors = Vec::new();
    let mut calls = 0usize;
    for (i, (trace, end)) in results.iter().enumerate() {
        for s in trace {
            lines.push_str(&serde_json::to_string(s).expect("state serializes"));
            lines.push('\n');
        }
        match end {
            Ok(s) => {
                calls += s.verify_calls();
                let solvable = i < cfg.tts.solvable;
                summary.solvable_accepted += usize::from(solvable && s.status == LoopStatus::Accepted);
                summary.unsatisfiable_exhausted += usize::from(!solvable && s.status == LoopStatus::Exhausted);
            }
            Err(m) => {
                summary.aborted += 1;
                errors.push(format!("fixture {i}: {m}"));
            }
        }
    }
    let finished = results.len() - summary.aborted;
    summary.mean_verify_calls = if finished == 0 { 0.0 } else { calls as f64 / finished as f64 };

    let dir = run_dir(cfg, "tts", &());
    write_atomic(&dir.join("trajectories.jsonl"), &lines)?;
    write_atomic(&dir.join("summary.json"), &json(&summary))?;
    if !errors.is_empty() {
        return Err(CliError::Loop(errors.join("\n")));
    }
    Ok(Outcome {
        message: format!(
            "solvable accepted {}/{}, unsatisfiable exhausted {}/{}; trajectories in {}",
            summary.solvable_accepted,
            summary.solvable,
            summary.unsatisfiable_exhausted,
            summary.unsatisfiable,
            dir.display()
        ),
        dir,
    })
}

/// Parses `args` (program name first), runs the command, prints its
/// summary or error and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(o) => {
            println!("{}", o.message);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
