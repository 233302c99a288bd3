//! Acceptance criteria P1–P9. Runs without the libtest harness and prints
//! one PASS/FAIL line per criterion; exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use metaverify::agent::fixtures::{solvable_fixtures, unsatisfiable_fixtures};
use metaverify::agent::{replay, run_loop, LoopStatus, MockEditor, OracleVerifier, DEFAULT_MAX_STEPS};
use metaverify::dataset::{build_dataset, decouple, generate_sample, stream_counts, DatasetManifest};
use metaverify::lab::{
    check_gating_bound, exact_objective, exact_policy_gradient, finite_difference_check, simulate_gated_with,
    Gate, GatedEstimatorConfig, Objective, VarianceReport,
};
use metaverify::protocol::{build_output, format_reward, parse, ProtocolMode};
use metaverify::reward::iou;
use metaverify::trainer::policy::ToyPolicy;
use metaverify::trainer::{train, PolicyInit, Regime, TrainerConfig, TrainingRun};
use metaverify::{BBox, Judgment, LabeledSample, Point, Rationale};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

// P1

fn cell_iou(a: [u32; 4], b: [u32; 4], grid: u32) -> Ratio<u64> {
    let inside = |r: [u32; 4], x: u32, y: u32| r[0] <= x && x < r[2] && r[1] <= y && y < r[3];
    let (mut both, mut either) = (0u64, 0u64);
    for x in 0..grid {
        for y in 0..grid {
            both += u64::from(inside(a, x, y) && inside(b, x, y));
            either += u64::from(inside(a, x, y) || inside(b, x, y));
        }
    }
    Ratio::new(both, either)
}

fn random_box<R: Rng>(rng: &mut R, grid: u32) -> [u32; 4] {
    let (a, c) = (rng.random_range(0..=grid), rng.random_range(0..=grid));
    let (b, d) = (rng.random_range(0..=grid), rng.random_range(0..=grid));
    let (x1, x2) = if a == c { (a.min(grid - 1), a.min(grid - 1) + 1) } else { (a.min(c), a.max(c)) };
    let (y1, y2) = if b == d { (b.min(grid - 1), b.min(grid - 1) + 1) } else { (b.min(d), b.max(d)) };
    [x1, y1, x2, y2]
}

fn p1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs: Vec<(u32, [u32; 4], [u32; 4])> = (0..1000)
        .map(|_| {
            let g = rng.random_range(1..=64);
            (g, random_box(&mut rng, g), random_box(&mut rng, g))
        })
        .collect();
    let start = Instant::now();
    let got: Vec<Ratio<u64>> = pairs
        .iter()
        .map(|(g, a, b)| {
            let bb = |r: [u32; 4]| BBox::on_grid(r[0].into(), r[1].into(), r[2].into(), r[3].into(), *g).unwrap();
            iou(&bb(*a), &bb(*b))
        })
        .collect();
    let elapsed = start.elapsed();
    let mismatches = pairs
        .iter()
        .zip(&got)
        .filter(|((g, a, b), v)| cell_iou(*a, *b, *g) != **v)
        .count();
    outcome(
        mismatches == 0 && elapsed < Duration::from_secs(1),
        format!("1000 pairs, {mismatches} mismatches vs cell count, {elapsed:.2?}"),
    )
}

// P2 / P3

struct Setting {
    mean: Vec<f64>,
    var: Vec<f64>,
}

fn settings() -> Vec<Setting> {
    let mut out = Vec::new();
    for d in [1usize, 8] {
        out.push(Setting {
            mean: vec![2.0; d],
            var: vec![1.0; d],
        });
        out.push(Setting {
            mean: (0..d).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * (0.5 + 0.25 * i as f64)).collect(),
            var: (0..d).map(|i| 0.5 + 0.25 * i as f64).collect(),
        });
    }
    out
}

fn sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn run_estimators() -> (Vec<(f64, usize, Setting, VarianceReport)>, Duration) {
    let start = Instant::now();
    let mut rows = Vec::new();
    for (si, s) in settings().into_iter().enumerate() {
        for (pi, p) in [0.1, 0.5, 0.9].into_iter().enumerate() {
            let cfg = GatedEstimatorConfig {
                p_acc: p,
                dec_mean: s.mean.clone(),
                dec_cov: s.var.clone(),
                n_samples: 1_000_000,
                seed: 1000 + (si * 3 + pi) as u64,
            };
            let r = simulate_gated_with(&cfg, Gate::Indicator, threads()).unwrap();
            rows.push((p, si, Setting { mean: s.mean.clone(), var: s.var.clone() }, r));
        }
    }
    (rows, start.elapsed())
}

fn p2(rows: &[(f64, usize, Setting, VarianceReport)], elapsed: Duration) -> Outcome {
    let mut worst = 0.0f64;
    for (p, _, s, r) in rows {
        // p·tr Σ + p(1−p)‖μ‖² from the population moments
        let population = p * s.var.iter().sum::<f64>() + p * (1.0 - p) * sq(&s.mean);
        worst = worst
            .max(r.relative_error)
            .max((r.empirical_var_joint - population).abs() / population);
    }
    outcome(
        worst <= 0.02 && elapsed < Duration::from_secs(10),
        format!("{} configs at n=1e6, worst relative error {:.4}, {elapsed:.2?}", rows.len(), worst),
    )
}

fn p3(rows: &[(f64, usize, Setting, VarianceReport)]) -> Outcome {
    let (mut bound_ok, mut worst_closed) = (true, 0.0f64);
    for (p, _, s, r) in rows {
        let snr = |m: f64, v: f64| m / v;
        let lhs = snr(r.empirical_mean_joint_normsq, r.empirical_var_joint);
        let rhs = p * snr(r.empirical_mean_dec_normsq, r.empirical_var_dec);
        bound_ok &= lhs <= rhs * 1.05;
        let m = sq(&s.mean);
        let closed = p * m / (s.var.iter().sum::<f64>() + (1.0 - p) * m);
        worst_closed = worst_closed.max((lhs - closed).abs() / closed);
    }
    outcome(
        bound_ok && worst_closed <= 0.05,
        format!("SNR bound holds: {bound_ok}, worst closed-form error {worst_closed:.4}"),
    )
}

// P4 / P5

fn lab_samples(n: usize, seed: u64) -> Vec<LabeledSample> {
    let m = DatasetManifest {
        seed,
        n_samples: n,
        ..DatasetManifest::default()
    };
    (0..n).map(|i| generate_sample(&m, i)).collect()
}

fn grounding_fd(policy: &ToyPolicy, s: &LabeledSample, h: f64) -> Vec<f64> {
    let theta = policy.params();
    let j = policy.judgment_weights().len();
    let mut p = policy.clone();
    (j..theta.len())
        .map(|i| {
            let mut t = theta.clone();
            t[i] += h;
            p.set_params(&t);
            let up = exact_objective(&p, s, Objective::Joint);
            t[i] = theta[i] - h;
            p.set_params(&t);
            let down = exact_objective(&p, s, Objective::Joint);
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn p4() -> Outcome {
    let samples = lab_samples(20, 44);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut gated_leaks, mut true_leaks, mut bound_fail, mut pairs) = (0, 0, 0, 0);
    let mut worst_fd = 0.0f64;
    let mut worst_margin = f64::INFINITY;
    for pi in 0..100 {
        let policy = ToyPolicy::random(&mut rng, 2.0);
        for s in &samples {
            pairs += 1;
            let g = exact_policy_gradient(&policy, s, Objective::Joint);
            gated_leaks += g.gated_nonzero_terms;
            if s.label().is_true() && g.grounding.iter().any(|x| *x != 0.0) {
                true_leaks += 1;
            }
            let b = check_gating_bound(&policy, std::slice::from_ref(s));
            if b.lhs_norm > b.rhs + 1e-12 {
                bound_fail += 1;
            }
            worst_margin = worst_margin.min(b.rhs - b.lhs_norm);
            if pi < 5 {
                let fd = grounding_fd(&policy, s, 1e-6);
                for (a, n) in g.grounding.iter().zip(&fd) {
                    worst_fd = worst_fd.max((a - n).abs() / a.abs().max(1e-6));
                }
            }
        }
    }
    outcome(
        gated_leaks == 0 && true_leaks == 0 && bound_fail == 0 && worst_fd < 1e-4,
        format!(
            "{pairs} pairs: {gated_leaks} non-zero gated terms, {true_leaks} True-sample leaks, {bound_fail} bound violations (min margin {worst_margin:.3e}), gradient vs objective FD {worst_fd:.1e}"
        ),
    )
}

fn p5() -> Outcome {
    let samples = lab_samples(10, 55);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let policy = ToyPolicy::random(&mut rng, 2.0);
        for s in &samples {
            worst = worst.max(finite_difference_check(&policy, s, 1e-5));
        }
    }
    outcome(worst <= 1e-4, format!("50 policies x 10 samples, max relative error {worst:.2e}"))
}

// P6

fn p6_runs(steps: usize, init: PolicyInit) -> Vec<(TrainingRun, TrainingRun)> {
    (0..5u64)
        .map(|seed| {
            let manifest = |s, n| DatasetManifest {
                seed: s,
                n_samples: n,
                ..DatasetManifest::default()
            };
            let data = build_dataset(&manifest(seed, 400)).unwrap();
            let eval = build_dataset(&manifest(seed + 10_000, 200)).unwrap();
            let cfg = |regime| TrainerConfig {
                regime,
                steps,
                seed,
                init,
                threads: threads(),
                ..TrainerConfig::default()
            };
            let joint = train(&cfg(Regime::Joint), &data, &eval).unwrap();
            let dec = train(&cfg(Regime::Decoupled), &decouple(&data).unwrap(), &eval).unwrap();
            (joint, dec)
        })
        .collect()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn p6() -> Outcome {
    let start = Instant::now();
    let long = p6_runs(500, PolicyInit::Zeros);
    let last = |r: &TrainingRun| r.metrics.last().unwrap().clone();
    let hit_joint = mean(long.iter().map(|(j, _)| last(j).hit_rate));
    let hit_dec = mean(long.iter().map(|(_, d)| last(d).hit_rate));
    let acc_gap = (mean(long.iter().map(|(j, _)| last(j).accuracy)) - mean(long.iter().map(|(_, d)| last(d).accuracy))).abs();

    let early = p6_runs(
        50,
        PolicyInit::Inverted {
            strength: 3.0,
            grid_bias: 1.0,
        },
    );
    let gain = |r: &TrainingRun| r.metrics[50].hit_rate - r.metrics[0].hit_rate;
    let p0 = mean(early.iter().map(|(j, _)| j.metrics[0].p_acc));
    let gain_joint = mean(early.iter().map(|(j, _)| gain(j)));
    let gain_dec = mean(early.iter().map(|(_, d)| gain(d)));
    let elapsed = start.elapsed();

    let pass = hit_dec >= hit_joint
        && gain_dec > 0.0
        && gain_joint <= 0.5 * gain_dec
        && acc_gap <= 0.02
        && elapsed < Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "500 steps: hit joint {hit_joint:.3} decoupled {hit_dec:.3}, accuracy gap {acc_gap:.3}; from p_acc {p0:.3}, 50-step hit gain joint {gain_joint:.3} decoupled {gain_dec:.3}; {elapsed:.2?}"
        ),
    )
}

// P7

fn p7() -> Outcome {
    let m = DatasetManifest::default();
    let solvable = solvable_fixtures(&m, 100, 3);
    let (mut accepted, mut within, mut replay_ok) = (0, 0, 0);
    for f in &solvable {
        let st = run_loop(&f.scene, &f.prompt, &OracleVerifier, &MockEditor::perfect(), DEFAULT_MAX_STEPS).unwrap();
        accepted += usize::from(st.status == LoopStatus::Accepted);
        within += usize::from(st.verify_calls() <= f.violations.unwrap() + 1);
        let replayed = replay(&st.initial, &st.history).unwrap();
        replay_ok += usize::from(serde_json::to_string(&replayed).unwrap() == serde_json::to_string(&st.scene).unwrap());
    }
    let unsat = unsatisfiable_fixtures(&m, 20);
    let exhausted = unsat
        .iter()
        .filter(|f| {
            let st = run_loop(&f.scene, &f.prompt, &OracleVerifier, &MockEditor::perfect(), DEFAULT_MAX_STEPS).unwrap();
            st.status == LoopStatus::Exhausted && st.step == DEFAULT_MAX_STEPS
        })
        .count();
    outcome(
        accepted == 100 && within == 100 && replay_ok == 100 && exhausted == 20,
        format!("accepted {accepted}/100 (within k+1 verifies: {within}), replay exact {replay_ok}/100, unsatisfiable exhausted at step 10: {exhausted}/20"),
    )
}

// P8

fn tags(mode: ProtocolMode) -> (&'static str, &'static str) {
    match mode {
        ProtocolMode::BboxMode => ("<bbox>", "</bbox>"),
        ProtocolMode::PointMode => ("<point>", "</point>"),
    }
}

fn body_ok(body: &str, mode: ProtocolMode) -> bool {
    let Ok(items) = serde_json::from_str::<Vec<Vec<i64>>>(body) else {
        return false;
    };
    let on = |v: i64| (0..=1000).contains(&v);
    !items.is_empty()
        && items.iter().all(|it| match mode {
            ProtocolMode::BboxMode => it.len() == 4 && on(it[0]) && on(it[2]) && on(it[1]) && on(it[3]) && it[0] < it[2] && it[1] < it[3],
            ProtocolMode::PointMode => it.len() == 2 && on(it[0]) && on(it[1]),
        })
}

/// Independent recognizer for the output grammar, returning the format
/// reward it implies.
fn format_oracle(raw: &str, mode: ProtocolMode) -> u8 {
    let recognize = || -> Option<bool> {
        let s = raw.trim_start().strip_prefix("<think>")?;
        let (_, s) = s.split_once("</think>")?;
        let s = s.trim_start().strip_prefix("<judgment>")?;
        let (tok, s) = s.split_once("</judgment>")?;
        let truth = match tok {
            "True" => true,
            "False" => false,
            _ => return None,
        };
        let s = s.trim_start();
        let (open, close) = tags(mode);
        let has_rationale = match s.strip_prefix(open) {
            Some(rest) => {
                let (body, tail) = rest.split_once(close)?;
                if !body_ok(body, mode) || !tail.trim_start().is_empty() {
                    return None;
                }
                true
            }
            None if s.is_empty() => false,
            None => return None,
        };
        Some(truth || has_rationale)
    };
    u8::from(recognize() == Some(true))
}

fn random_output<R: Rng>(rng: &mut R, mode: ProtocolMode) -> metaverify::VerifierOutput {
    let alphabet: Vec<char> = "abc xyz<>/[]#.,\n0123456789".chars().collect();
    let think: String = loop {
        let t: String = (0..rng.random_range(0..40)).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
        if !t.contains("</think>") {
            break t;
        }
    };
    let judgment = Judgment::from_bool(rng.random_bool(0.5));
    let n = rng.random_range(0..4);
    let rationale = if n == 0 {
        Rationale::None
    } else if mode == ProtocolMode::BboxMode {
        Rationale::Boxes(
            (0..n)
                .map(|_| {
                    let (x1, y1) = (rng.random_range(0..1000), rng.random_range(0..1000));
                    BBox::new(x1, y1, rng.random_range(x1 + 1..=1000), rng.random_range(y1 + 1..=1000)).unwrap()
                })
                .collect(),
        )
    } else {
        Rationale::Points((0..n).map(|_| Point::new(rng.random_range(0..=1000), rng.random_range(0..=1000)).unwrap()).collect())
    };
    build_output(&think, judgment, rationale, mode).unwrap()
}

fn mutate<R: Rng>(rng: &mut R, s: &str) -> String {
    let mut b = s.as_bytes().to_vec();
    let pieces: [&[u8]; 8] = [b"<", b">", b"/", b"]", b",", b" ", b"1001", b"-1"];
    for _ in 0..rng.random_range(1..3) {
        let i = rng.random_range(0..=b.len());
        match rng.random_range(0..3) {
            0 if i < b.len() => {
                b.remove(i);
            }
            1 => {
                let p = pieces[rng.random_range(0..pieces.len())];
                b.splice(i..i, p.iter().copied());
            }
            _ if i < b.len() => b[i] = rng.random(),
            _ => {}
        }
    }
    String::from_utf8_lossy(&b).into_owned()
}

fn p8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let modes = [ProtocolMode::BboxMode, ProtocolMode::PointMode];
    let mut round_trip = 0;
    let mut agree = 0;
    let mut checked = 0;
    let mut valid_outputs = Vec::new();
    for i in 0..1000 {
        let mode = modes[i % 2];
        let v = random_output(&mut rng, mode);
        round_trip += usize::from(parse(&v.raw, mode).as_ref() == Ok(&v));
        valid_outputs.push((mode, v.raw));
    }
    let mut crashes = 0;
    let mut inputs: Vec<String> = (0..1000)
        .map(|_| {
            let bytes: Vec<u8> = (0..rng.random_range(0..120)).map(|_| rng.random()).collect();
            String::from_utf8_lossy(&bytes).into_owned()
        })
        .collect();
    inputs.extend(valid_outputs.iter().map(|(_, raw)| mutate(&mut rng, raw)));
    inputs.extend(valid_outputs.iter().map(|(_, raw)| raw.clone()));
    for s in &inputs {
        for mode in modes {
            let r = std::panic::catch_unwind(|| (parse(s, mode).is_ok(), format_reward(s, mode)));
            match r {
                Ok((_, f)) => {
                    checked += 1;
                    agree += usize::from(f == format_oracle(s, mode));
                }
                Err(_) => crashes += 1,
            }
        }
    }
    outcome(
        round_trip == 1000 && crashes == 0 && agree == checked,
        format!("round trips {round_trip}/1000, crashes {crashes}, format reward agrees with grammar oracle on {agree}/{checked} inputs"),
    )
}

// P9

fn p9() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for b in [8usize, 100, 10_000] {
        let m = DatasetManifest {
            seed: 9,
            n_samples: b,
            ..DatasetManifest::default()
        };
        let d = decouple(&build_dataset(&m).unwrap()).unwrap();
        let (j, g) = stream_counts(&d);
        pass &= 2 * d.len() == 3 * b && j == b && 2 * g == b;
        details.push(format!("B={b}: {} records ({j}+{g})", d.len()));
    }
    outcome(pass, details.join(", "))
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |name: &str, o: Outcome| {
        all &= o.pass;
        println!("{name} {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    };
    report("P1", p1());
    let (rows, elapsed) = run_estimators();
    report("P2", p2(&rows, elapsed));
    report("P3", p3(&rows));
    report("P4", p4());
    report("P5", p5());
    report("P6", p6());
    report("P7", p7());
    report("P8", p8());
    report("P9", p9());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
