//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always show up in
//! `cargo test` output. Exits non-zero when any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use drinkctx::aggregate::aggregate_cohort;
use drinkctx::labels::{label_dataset, LabeledDataset, Target, Task};
use drinkctx::learn::groups::FeatureGroup;
use drinkctx::learn::harness::evaluate_grouped;
use drinkctx::learn::{
    binary_auc, evaluate_lkpo, importance_report, roc_auc_macro, smote_balance, threshold_sweep, EvalConfig,
    EvaluationResult, Matrix, ModelSpec,
};
use drinkctx::manifest::MANIFEST_FILE;
use drinkctx::matching::{build_dataset, event_columns, match_window, EventDataset, MatchConfig};
use drinkctx::model::Modality;
use drinkctx::night::{night_start_ms, slot_label, SLOT_MS};
use drinkctx::pipeline::{self, ExperimentConfig};
use drinkctx::stats::{cohens_d, pearson, point_biserial, student_t_cdf, t_test};
use drinkctx::synth::{generate_cohort, CohortSpec};

use common::*;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn events_of(spec: &CohortSpec) -> Result<EventDataset, String> {
    let synth = generate_cohort(spec).map_err(|e| e.to_string())?;
    let slots = aggregate_cohort(&synth.cohort);
    let cfg = MatchConfig {
        geofence: Some(spec.home_region),
        ..MatchConfig::default()
    };
    Ok(build_dataset(&synth.cohort, &slots, &cfg).dataset)
}

// ---------------------------------------------------------------------------

fn matching_window() -> Check {
    let friday = NaiveDate::from_ymd_opt(2019, 10, 4).unwrap();
    let ts = night_start_ms(friday) + (2 * 60 + 8) * 60_000;
    let w = match_window(ts, 6).map_err(|r| format!("excluded as {r:?}"))?;
    let end_ms = night_start_ms(friday) + (w.range.end as i64 + 1) * SLOT_MS - 1;
    let end = chrono::DateTime::from_timestamp_millis(end_ms).unwrap().format("%H:%M").to_string();
    let got = format!("slots {}-{} ({}-{})", w.range.start, w.range.end, slot_label(w.range.start), end);
    ensure(got == "slots 10-15 (21:40-22:39)", format!("22:08 -> {got}"))?;
    Ok(format!("22:08 -> {got}"))
}

fn bookkeeping() -> Check {
    let spec = CohortSpec::bookkeeping();
    let synth = generate_cohort(&spec).map_err(|e| e.to_string())?;
    let slots = aggregate_cohort(&synth.cohort);
    let cfg = MatchConfig {
        geofence: Some(spec.home_region),
        ..MatchConfig::default()
    };
    let t = build_dataset(&synth.cohort, &slots, &cfg).tally;
    let got = (t.unavailable_sensor_data, t.edge_time, t.out_of_region, t.retained, t.total());
    let detail = format!("unavailable {} / edge {} / region {} / retained {} of {}", got.0, got.1, got.2, got.3, got.4);
    ensure(got == (152, 102, 59, 941, 1254), detail.clone())?;
    Ok(detail)
}

fn statistical_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut err_r, mut err_pb, mut err_t, mut err_d, mut err_p) = (0f64, 0f64, 0f64, 0f64, 0f64);
    for _ in 0..100 {
        let n = rng.random_range(6..=50);
        let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.4 * v + rng.sample::<f64, _>(StandardNormal)).collect();
        let mut b: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        b[0] = true;
        b[1] = true;
        b[2] = false;
        b[3] = false;

        err_r = err_r.max((pearson(&x, &y).unwrap().r - brute_pearson(&x, &y)).abs());

        let pb = point_biserial(&b, &y).unwrap();
        err_pb = err_pb.max((pb.r - brute_point_biserial(&b, &y)).abs());
        let coded: Vec<f64> = b.iter().map(|&v| f64::from(u8::from(v))).collect();
        let pc = pearson(&coded, &y).unwrap();
        ensure(
            pb.r.to_bits() == pc.r.to_bits() && pb.p.to_bits() == pc.p.to_bits(),
            "point-biserial differs from Pearson on 0/1 codes",
        )?;

        let a: Vec<f64> = y.iter().zip(&b).filter(|(_, g)| **g).map(|(v, _)| *v).collect();
        let c: Vec<f64> = y.iter().zip(&b).filter(|(_, g)| !**g).map(|(v, _)| *v).collect();
        let tt = t_test(&a, &c).unwrap();
        err_t = err_t.max((tt.t - brute_t(&a, &c)).abs());
        err_d = err_d.max((cohens_d(&a, &c).unwrap().d - brute_d(&a, &c)).abs());
        let p_ref = 2.0 * (1.0 - simpson_t_cdf(tt.t.abs(), tt.df));
        err_p = err_p.max((tt.p - p_ref).abs());
    }
    let mut err_cdf = 0f64;
    for df in [1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0, 15.0, 30.0, 60.0, 120.0] {
        for i in -16..=16 {
            let t = 0.5 * f64::from(i);
            err_cdf = err_cdf.max((student_t_cdf(t, df) - simpson_t_cdf(t, df)).abs());
        }
    }
    let detail = format!(
        "max |err| r {err_r:.1e}, pb {err_pb:.1e}, t {err_t:.1e}, d {err_d:.1e}; t-CDF {err_cdf:.1e}, p {err_p:.1e}; PBCC == PCC bitwise"
    );
    ensure(err_r.max(err_pb).max(err_t).max(err_d) <= 1e-9 && err_cdf.max(err_p) <= 1e-6, detail.clone())?;
    Ok(detail)
}

fn smote_contract() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut x = Matrix::with_cols(6);
    let mut y = Vec::new();
    for (class, n) in [(0u8, 47), (1u8, 894)] {
        for _ in 0..n {
            let row: Vec<f64> = (0..6).map(|_| rng.sample::<f64, _>(StandardNormal) + f64::from(class)).collect();
            x.push_row(&row);
            y.push(class);
        }
    }
    let out = smote_balance(&x, &y, 2, 5, &mut rng).map_err(|e| e.to_string())?;
    let counts = [0u8, 1].map(|c| out.y.iter().filter(|&&l| l == c).count());
    ensure(counts == [94, 94], format!("balanced counts {counts:?}"))?;
    ensure(out.synthetic.len() == 47, format!("{} synthetic rows", out.synthetic.len()))?;
    let minority: Vec<usize> = (0..y.len()).filter(|&i| y[i] == 0).collect();
    let mut worst = 0f64;
    for s in &out.synthetic {
        ensure(y[s.parent] == 0 && y[s.neighbor] == 0, "segment leaves the class")?;
        ensure((0.0..=1.0).contains(&s.gap), "gap outside [0, 1]")?;
        let radius = brute_knn_radius(&x, &minority, s.parent, 5);
        ensure(
            sq_dist(x.row(s.parent), x.row(s.neighbor)) <= radius + 1e-9,
            "neighbor is not among the 5 nearest",
        )?;
        for j in 0..6 {
            let (a, b) = (x.get(s.parent, j), x.get(s.neighbor, j));
            worst = worst.max((out.x.get(s.row, j) - (a + s.gap * (b - a))).abs());
        }
        ensure(out.y[s.row] == 0, "synthetic row mislabeled")?;
    }
    ensure(worst <= 1e-9, format!("segment error {worst:.1e}"))?;
    Ok(format!("{{47, 894}} -> {{94, 94}}; 47 synthetic rows on 5-NN segments (max err {worst:.1e})"))
}

fn harness_sanity() -> Check {
    let uniform = |n_classes| -> Result<EvaluationResult, String> {
        let data = balanced_grouped(40, 5, n_classes, 5);
        let cfg = EvalConfig {
            model: ModelSpec::Uniform,
            k: 10,
            iterations: 10,
            ..EvalConfig::default()
        };
        evaluate_grouped(&data, Target::task(Task::FriendsTwo), &cfg).map_err(|e| e.to_string())
    };
    let two = uniform(2)?;
    let three = uniform(3)?;
    ensure((two.mean_acc - 50.0).abs() <= 1.0, format!("two-class baseline {}", two.cell()))?;
    ensure((three.mean_acc - 100.0 / 3.0).abs() <= 1.0, format!("three-class baseline {}", three.cell()))?;

    let truth: Vec<bool> = (0..100).map(|i| i % 3 == 0).collect();
    let perfect: Vec<f64> = truth.iter().map(|&t| if t { 0.9 } else { 0.1 }).collect();
    let auc_perfect = binary_auc(&truth, &perfect).unwrap();
    let labels3: Vec<u8> = (0..90).map(|i| (i % 3) as u8).collect();
    let mut onehot = Matrix::with_cols(3);
    for &l in &labels3 {
        let mut r = [0.0; 3];
        r[usize::from(l)] = 1.0;
        onehot.push_row(&r);
    }
    let auc_macro = roc_auc_macro(&labels3, &onehot).map_err(|e| e.to_string())?;
    ensure(auc_perfect == 1.0 && auc_macro == 1.0, format!("perfect AUC {auc_perfect} / {auc_macro}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2000);
    let truth: Vec<bool> = (0..2000).map(|_| rng.random()).collect();
    let random: Vec<f64> = (0..2000).map(|_| rng.random()).collect();
    let auc_random = binary_auc(&truth, &random).unwrap();
    ensure((0.45..=0.55).contains(&auc_random), format!("random AUC {auc_random}"))?;
    Ok(format!(
        "uniform baseline {} / {}; perfect AUC {auc_perfect}; random AUC {auc_random:.3} (n = 2000)",
        two.cell(),
        three.cell()
    ))
}

struct SignalRun {
    detail: String,
    passed: Result<(), String>,
    folds: Vec<EvaluationResult>,
}

fn signal_recovery() -> Result<SignalRun, String> {
    let events = events_of(&signal_spec(2026))?;
    let ds = label_dataset(&events, Target::task(Task::FriendsTwo), &labels()).map_err(|e| e.to_string())?;
    let cfg = EvalConfig {
        seed: 2026,
        ..EvalConfig::default()
    };
    let rep = importance_report(&ds, &cfg, 10).map_err(|e| e.to_string())?;
    let ev = &rep.evaluation;

    let mut shuffled: LabeledDataset = ds.clone();
    shuffled.labels.shuffle(&mut ChaCha8Rng::seed_from_u64(99));
    let control = evaluate_lkpo(&shuffled, &cfg).map_err(|e| e.to_string())?;

    let top = rep.top_group();
    let top_feature = rep.features.first().map(|f| f.feature.clone()).unwrap_or_default();
    let detail = format!(
        "{} events; forest {} (acc %, AUC x100); shuffled {:.1}; top group {} (rank-1 feature {top_feature})",
        ev.n_events,
        ev.cell(),
        control.mean_acc,
        top.map_or("none", Modality::as_str),
    );
    let passed = ensure(ev.mean_acc >= 85.0, "accuracy below 85%")
        .and(ensure(ev.mean_auc >= 0.90, "AUC below 0.90"))
        .and(ensure((control.mean_acc - 50.0).abs() <= 5.0, "shuffled control outside 50 +- 5"))
        .and(ensure(top == Some(Modality::Acc), "ACC does not top the importance report"));
    Ok(SignalRun {
        detail,
        passed,
        folds: vec![rep.evaluation.clone(), control],
    })
}

fn grouped_splits(runs: &[EvaluationResult]) -> Check {
    ensure(!runs.is_empty(), "no evaluation to inspect")?;
    let mut folds = 0;
    for r in runs {
        for it in &r.iterations {
            let f = &it.fold;
            ensure(
                f.test_participants.iter().all(|p| !f.train_participants.contains(p)),
                format!("iteration {} shares a participant", it.iteration),
            )?;
            ensure(f.test_participants.len() == r.config.k, "wrong number of held-out participants")?;
            ensure(
                f.test_participants.len() + f.train_participants.len() == r.n_participants,
                "fold does not cover the cohort",
            )?;
            folds += 1;
        }
    }
    Ok(format!("{folds} folds, train and test participants disjoint in every one"))
}

fn determinism() -> Check {
    let config = ExperimentConfig {
        seed: 7,
        ..ExperimentConfig::demo()
    };
    let mut manifests = Vec::new();
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, threads) in dirs.iter().zip([1usize, 4]) {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| pipeline::run(&config, dir.path())).map_err(|e| e.to_string())?;
        manifests.push(std::fs::read(dir.path().join(MANIFEST_FILE)).unwrap());
    }
    ensure(manifests[0] == manifests[1], "manifests differ between 1 and 4 workers")?;
    let report = pipeline::verify(dirs[0].path()).map_err(|e| e.to_string())?;
    ensure(report.is_intact(), "bundle fails its own verification")?;
    let digest = drinkctx::manifest::sha256_bytes(&manifests[0]);
    Ok(format!(
        "seed 7, 1 vs 4 workers: identical manifests over {} files (sha256 {}...)",
        report.checked,
        &digest[..12]
    ))
}

fn threshold_sweep_check() -> Check {
    let mut spec = CohortSpec {
        seed: 9,
        n_participants: 30,
        effects: vec![drinkctx::synth::Effect {
            driver: drinkctx::synth::EffectDriver::Task { task: Task::FriendsThree },
            modality: Modality::Acc,
            d: 0.8,
        }],
        ..CohortSpec::default()
    };
    spec.companions.max_friends = 11;
    let events = events_of(&spec)?;
    let cfg = EvalConfig {
        model: ModelSpec::Forest(drinkctx::learn::ForestParams {
            n_trees: 50,
            ..Default::default()
        }),
        k: 10,
        seed: 4,
        ..EvalConfig::default()
    };
    let thresholds: Vec<u8> = (1..=10).collect();
    let sweep = threshold_sweep(&events, Task::FriendsThree, &thresholds, &cfg, &labels()).map_err(|e| e.to_string())?;
    ensure(sweep.points.len() == 10, "sweep did not cover g = 1..10")?;
    let default_ds = label_dataset(&events, Target::task(Task::FriendsThree), &labels()).map_err(|e| e.to_string())?;
    let default = evaluate_lkpo(&default_ds, &cfg).map_err(|e| e.to_string())?;
    ensure(sweep.points[0].result.as_ref() == Some(&default), "g = 1 differs from the default task")?;

    let per_g: Vec<Vec<u8>> = thresholds
        .iter()
        .map(|&g| {
            let t = Target::Task {
                task: Task::FriendsThree,
                threshold: g,
            };
            events.rows.iter().map(|r| t.label(r, &labels()).unwrap().unwrap()).collect()
        })
        .collect();
    for w in per_g.windows(2) {
        for (a, b) in w[0].iter().zip(&w[1]) {
            ensure(b <= a && (*a == 0) == (*b == 0), "label not monotone in g")?;
        }
    }
    let defined = sweep.points.iter().filter(|p| p.result.is_some()).count();
    Ok(format!(
        "{} events, {defined}/10 thresholds evaluated; g = 1 == default ({}); labels monotone in g",
        events.len(),
        default.cell()
    ))
}

fn group_slicing() -> Check {
    let cols = event_columns();
    let expected = [
        (FeatureGroup::Acc, 150),
        (FeatureGroup::App, 105),
        (FeatureGroup::Bat, 36),
        (FeatureGroup::Blu, 27),
        (FeatureGroup::Pro, 18),
        (FeatureGroup::Loc, 39),
        (FeatureGroup::Scr, 3),
        (FeatureGroup::Wif, 36),
        (FeatureGroup::ConSen, 306),
        (FeatureGroup::IntSen, 108),
        (FeatureGroup::All, 414),
    ];
    let mut parts = Vec::new();
    for (g, n) in expected {
        let got = g.select(&cols).len();
        ensure(got == n, format!("{g} selects {got}, expected {n}"))?;
        parts.push(format!("{g} {got}"));
    }
    Ok(parts.join(", "))
}

// ---------------------------------------------------------------------------

struct Line {
    id: usize,
    name: &'static str,
    limit: Duration,
    elapsed: Duration,
    result: Check,
}

fn timed(id: usize, name: &'static str, limit_s: u64, f: impl FnOnce() -> Check) -> Line {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    Line {
        id,
        name,
        limit: Duration::from_secs(limit_s),
        elapsed: start.elapsed(),
        result,
    }
}

fn main() {
    let mut lines = vec![
        timed(1, "matching window", 1, matching_window),
        timed(2, "bookkeeping replay", 60, bookkeeping),
        timed(3, "statistical oracles", 60, statistical_oracles),
        timed(4, "SMOTE contract", 60, smote_contract),
        timed(5, "harness sanity", 60, harness_sanity),
    ];
    let mut signal = None;
    let mut l6 = timed(6, "signal recovery", 300, || {
        let s = signal_recovery()?;
        let out = s.passed.clone().map(|_| s.detail.clone()).map_err(|e| format!("{e}: {}", s.detail));
        signal = Some(s);
        out
    });
    if l6.result.is_ok() && l6.elapsed > l6.limit {
        l6.result = Err("exceeded time limit".into());
    }
    lines.push(l6);
    let folds = signal.map(|s| s.folds).unwrap_or_default();
    lines.push(timed(7, "grouped-split soundness", 60, || grouped_splits(&folds)));
    lines.push(timed(8, "determinism", 600, determinism));
    lines.push(timed(9, "threshold sweep", 600, threshold_sweep_check));
    lines.push(timed(10, "feature-group slicing", 1, group_slicing));

    let mut failed = 0;
    println!();
    for l in &mut lines {
        if l.result.is_ok() && l.elapsed > l.limit {
            l.result = Err(format!("took {:.1?}, limit {:?}", l.elapsed, l.limit));
        }
        let (tag, text) = match &l.result {
            Ok(d) => ("PASS", d.clone()),
            Err(e) => {
                failed += 1;
                ("FAIL", e.clone())
            }
        };
        println!("[{tag}] criterion {:>2} {:<24} {:>7.2}s  {text}", l.id, l.name, l.elapsed.as_secs_f64());
    }
    println!("\nacceptance: {} passed, {failed} failed\n", lines.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
