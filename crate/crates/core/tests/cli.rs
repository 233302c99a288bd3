use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use metaverify::cli::{run, RunConfig, TtsSummary, EXIT_CONFIG, EXIT_MISMATCH, EXIT_OK, EXIT_THEORY};
use metaverify::trainer::EvalReport;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run_in(dir: &Path, args: &[&str]) -> i32 {
    let mut full = vec!["metaverify".to_string()];
    full.extend(args.iter().map(|s| s.to_string()));
    full.push("--out".into());
    full.push(dir.join("runs").display().to_string());
    run(full)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

/// The only run directory for `cmd`.
fn run_dir(dir: &Path, cmd: &str) -> PathBuf {
    let mut found: Vec<PathBuf> = fs::read_dir(dir.join("runs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_str().unwrap().starts_with(&format!("{cmd}-")))
        .collect();
    assert_eq!(found.len(), 1, "{found:?}");
    found.pop().unwrap()
}

#[test]
fn shipped_config_spells_out_the_defaults() {
    let text = fs::read_to_string(root().join("configs/default.toml")).unwrap();
    assert_eq!(RunConfig::from_toml(&text).unwrap(), RunConfig::default());
}

#[test]
fn unknown_keys_are_rejected_in_every_section() {
    for section in ["", "[dataset]\n", "[data]\n", "[theory]\n", "[trainer]\n", "[loop]\n"] {
        let text = format!("{section}not_a_key = 1\n");
        assert!(RunConfig::from_toml(&text).is_err(), "{section:?}");
    }
}

#[test]
fn gen_decoupled_small_set() {
    let t = tempfile::tempdir().unwrap();
    let c = write(t.path(), "c.toml", "[dataset]\nn_samples = 8\n");
    assert_eq!(run_in(t.path(), &["gen", "--config", &c, "--decouple"]), EXIT_OK);
    let d = run_dir(t.path(), "gen");
    assert_eq!(fs::read_to_string(d.join("dataset.jsonl")).unwrap().lines().count(), 12);
    assert!(d.join("manifest.json").exists());
}

#[test]
fn malformed_config_writes_nothing() {
    let t = tempfile::tempdir().unwrap();
    let c = write(t.path(), "c.toml", "[dataset\nn_samples = 8\n");
    assert_eq!(run_in(t.path(), &["gen", "--config", &c]), EXIT_CONFIG);
    let c = write(t.path(), "d.toml", "[dataset]\nn_samples = \"eight\"\n");
    assert_eq!(run_in(t.path(), &["gen", "--config", &c]), EXIT_CONFIG);
    assert_eq!(run_in(t.path(), &["gen", "--config", "missing.toml"]), EXIT_CONFIG);
    assert!(!t.path().join("runs").exists());
}

#[test]
fn theory_exit_codes() {
    let t = tempfile::tempdir().unwrap();
    let empty = write(t.path(), "e.toml", "[theory]\np_values = []\nsettings = []\n");
    assert_eq!(run_in(t.path(), &["theory", "--config", &empty]), EXIT_OK);
    let csv = fs::read_to_string(run_dir(t.path(), "theory").join("theory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);

    let small = write(t.path(), "s.toml", "[theory]\nn_samples = 50000\n");
    assert_eq!(run_in(t.path(), &["theory", "--config", &small, "--leak", "0.5"]), EXIT_THEORY);
}

#[test]
fn train_is_reproducible_and_thread_independent() {
    let t = tempfile::tempdir().unwrap();
    let c = write(
        t.path(),
        "c.toml",
        "[dataset]\nn_samples = 60\n[data]\neval_samples = 40\n[trainer]\nsteps = 15\nregime = \"decoupled\"\n",
    );
    assert_eq!(run_in(t.path(), &["train", "--config", &c, "--seed", "5", "--threads", "1"]), EXIT_OK);
    let d = run_dir(t.path(), "train");
    let first = fs::read(d.join("metrics.csv")).unwrap();
    let ckpt = fs::read(d.join("checkpoint.json")).unwrap();
    assert_eq!(run_in(t.path(), &["train", "--config", &c, "--seed", "5", "--threads", "3"]), EXIT_OK);
    assert_eq!(run_dir(t.path(), "train"), d);
    assert_eq!(fs::read(d.join("metrics.csv")).unwrap(), first);
    assert_eq!(fs::read(d.join("checkpoint.json")).unwrap(), ckpt);
    let text = String::from_utf8(first).unwrap();
    assert_eq!(text.lines().next().unwrap(), "step,regime,seed,accuracy,hit_rate,mean_reward,grad_norm,p_acc");
    assert_eq!(text.lines().count(), 17);
    assert!(text.lines().skip(1).all(|l| l.contains(",decoupled,5,")));
}

#[test]
fn regime_mismatch_exit_code() {
    let t = tempfile::tempdir().unwrap();
    let c = write(t.path(), "c.toml", "[dataset]\nn_samples = 10\n");
    assert_eq!(run_in(t.path(), &["gen", "--config", &c]), EXIT_OK);
    let data = run_dir(t.path(), "gen").join("dataset.jsonl").display().to_string();
    assert_eq!(run_in(t.path(), &["train", "--regime", "decoupled", "--data", &data]), EXIT_MISMATCH);
    assert_eq!(run_in(t.path(), &["gen", "--config", &c, "--decouple", "--seed", "1"]), EXIT_OK);
}

#[test]
fn eval_of_oracle_fixture_is_perfect() {
    let t = tempfile::tempdir().unwrap();
    let ckpt = root().join("crates/core/fixtures/oracle_policy.json").display().to_string();
    assert_eq!(run_in(t.path(), &["eval", "--checkpoint", &ckpt]), EXIT_OK);
    let report: EvalReport = serde_json::from_str(&fs::read_to_string(run_dir(t.path(), "eval").join("eval.json")).unwrap()).unwrap();
    assert_eq!(report.judgment_accuracy, 1.0);
    assert_eq!(report.grounding_hit_rate, 1.0);
}

#[test]
fn tts_with_oracle_accepts_every_solvable_fixture() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(run_in(t.path(), &["tts", "--threads", "2"]), EXIT_OK);
    let d = run_dir(t.path(), "tts");
    let s: TtsSummary = serde_json::from_str(&fs::read_to_string(d.join("summary.json")).unwrap()).unwrap();
    assert_eq!((s.solvable_accepted, s.solvable), (100, 100));
    assert_eq!((s.unsatisfiable_exhausted, s.unsatisfiable), (20, 20));
    let lines = fs::read_to_string(d.join("trajectories.jsonl")).unwrap();
    for l in lines.lines() {
        let _: metaverify::agent::LoopState = serde_json::from_str(l).unwrap();
    }
}

#[test]
fn tts_rejects_bad_fidelity() {
    let t = tempfile::tempdir().unwrap();
    assert_eq!(run_in(t.path(), &["tts", "--fidelity", "1.5"]), EXIT_CONFIG);
}

#[test]
fn binary_reports_exit_codes() {
    let t = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_metaverify");
    let c = write(t.path(), "c.toml", "[dataset]\nn_samples = 4\n");
    let ok = Command::new(bin)
        .args(["gen", "--config", &c, "--out"])
        .arg(t.path().join("runs"))
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("4 records"));
    let bad = Command::new(bin).args(["gen", "--bogus"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_CONFIG));
    let help = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(EXIT_OK));
}
