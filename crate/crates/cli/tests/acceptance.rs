//! Acceptance suite. One PASS/FAIL line per criterion; exits non-zero if any
//! criterion fails. Tolerances and time limits are pinned below.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::Duration as ChronoDuration;
use ossmm_cli::{EvalReport, ModelFile, CV_FILE, FEATURES_CSV, MODELS_DIR, REPORT_FILE};
use ossmm_core::dsp::spectral::BAND_EDGES_HZ;
use ossmm_core::dsp::{band_powers, design_butterworth_lowpass, periodogram, window, WindowKind};
use ossmm_core::features::eog::detect_spindles;
use ossmm_core::features::extract_epoch;
use ossmm_core::features::pulse::{pulse_features, LOWPASS_HZ, LOWPASS_ORDER};
use ossmm_core::ingest::{align, load_night, validate_labels, IngestSummary, LabelRecord};
use ossmm_core::ml::{
    group_kfold, leakage_guard, run_cv_with_plan, smote, ClassifierConfig, ClassifierKind, Columns, Dataset,
    FoldPlan, ForestParams, MaxFeatures, MlError, ModelParams, RandomForest,
};
use ossmm_core::ml::tree::Node;
use ossmm_core::stream::{policy_step, replay, ModulationPolicy, PolicyState};
use ossmm_core::synth::corpus::night_start;
use ossmm_core::synth::profile::TEST_CLASS_MIX;
use ossmm_core::synth::{generate_night, ProfileSet};
use ossmm_core::{
    qualifies, NightRecording, SensorFrame, SleepStage, EXPECTED_SAMPLES, FS_HZ, MIN_QUALIFIED_SAMPLES,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const FS: f64 = FS_HZ as f64;

// Pinned tolerances.
const TOL_CHANCE: f64 = 1e-3;
const TOL_MAJORITY: f64 = 1e-4;
const TOL_GAIN_CUTOFF: f64 = 1e-3;
const MAX_GAIN_40HZ: f64 = 0.07;
const TOL_PARSEVAL_REL: f64 = 0.01;
const MIN_ALPHA_SHARE: f64 = 0.95;
const TOL_WINDOW: f64 = 1e-12;
const TOL_HR_BPM: f64 = 2.0;
const TOL_HALVES_BPM: f64 = 2.0;
const TOL_PEAKS_VS_SPECTRAL_BPM: f64 = 5.0;
const TOL_CONVEX: f64 = 1e-9;
const MIN_MACRO_F1: f64 = 0.70;
const MIN_ACC_OVER_CHANCE: f64 = 0.25;
const ALPHA_MAX_RANK: usize = 3;

// Time limits.
const LIMIT_1: Duration = Duration::from_secs(1);
const LIMIT_2: Duration = Duration::from_secs(1);
const LIMIT_3: Duration = Duration::from_secs(5);
const LIMIT_4: Duration = Duration::from_secs(10);
const LIMIT_5: Duration = Duration::from_secs(10);
const LIMIT_6: Duration = Duration::from_secs(5);
const LIMIT_7: Duration = Duration::from_secs(5);
const LIMIT_8: Duration = Duration::from_secs(30);
const LIMIT_9: Duration = Duration::from_secs(5 * 60);
const LIMIT_10: Duration = Duration::from_secs(30);
const LIMIT_11: Duration = Duration::from_secs(10 * 60);

const PIPELINE_SEED: u64 = 42;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($fmt)+)),
        }
    };
}

struct Line {
    id: usize,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn criterion(id: usize, title: &'static str, limit: Duration, f: impl FnOnce() -> Outcome) -> Line {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    finish(id, title, limit, elapsed, result)
}

fn finish(id: usize, title: &'static str, limit: Duration, elapsed: Duration, result: Outcome) -> Line {
    let timing = format!("{:.2} s, limit {} s", elapsed.as_secs_f64(), limit.as_secs());
    let (passed, detail) = match result {
        Ok(d) if elapsed <= limit => (true, format!("{d} ({timing})")),
        Ok(d) => (false, format!("{d} (too slow: {timing})")),
        Err(e) => (false, format!("{e} ({timing})")),
    };
    let line = Line {
        id,
        title,
        passed,
        detail,
    };
    println!(
        "{} criterion {:>2} {}: {}",
        if line.passed { "PASS" } else { "FAIL" },
        line.id,
        line.title,
        line.detail
    );
    line
}

// ------------------------------------------------------------ 1 baselines

fn c1_baselines() -> Outcome {
    let b = ossmm_core::ml::baselines(&TEST_CLASS_MIX).map_err(|e| e.to_string())?;
    let oracle: f64 = TEST_CLASS_MIX.iter().map(|p| p * p).sum();
    let oracle_max = TEST_CLASS_MIX.iter().copied().fold(0.0, f64::max);
    ensure!((b.stratified_chance - oracle).abs() < 1e-15, "Σp² mismatch {} vs {oracle}", b.stratified_chance);
    ensure!((b.stratified_chance - 0.310).abs() <= TOL_CHANCE, "chance {}", b.stratified_chance);
    ensure!((b.majority_class - 0.4591).abs() <= TOL_MAJORITY, "majority {}", b.majority_class);
    ensure!((b.majority_class - oracle_max).abs() < 1e-15, "majority is not the largest share");
    Ok(format!(
        "stratified chance {:.4}, majority {:.4}",
        b.stratified_chance, b.majority_class
    ))
}

// -------------------------------------------------------- 2 qualification

fn frame(t_ms: u64) -> SensorFrame {
    SensorFrame {
        t_ms,
        eog: 512,
        ppg: 512,
        ..Default::default()
    }
}

fn c2_qualification() -> Outcome {
    ensure!(MIN_QUALIFIED_SAMPLES == 7125, "threshold is {MIN_QUALIFIED_SAMPLES}");
    ensure!(MIN_QUALIFIED_SAMPLES * 100 == EXPECTED_SAMPLES * 95, "threshold is not 95% of {EXPECTED_SAMPLES}");
    ensure!(!qualifies(7124, SleepStage::LightSleep), "7124 samples qualified");
    ensure!(qualifies(7125, SleepStage::LightSleep), "7125 samples rejected");
    ensure!(!qualifies(7500, SleepStage::NotDetected), "Not Detected qualified");

    // Bookkeeping fixture: 15,335 labels, 40 short, 10 Not Detected.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut s = IngestSummary::default();
    for i in 0..15_285 {
        s.record(rng.random_range(7125..=7500), SleepStage::CLASSES[i % 4]);
    }
    for i in 0..40 {
        s.record(rng.random_range(0..7125), SleepStage::CLASSES[i % 4]);
    }
    for _ in 0..10 {
        s.record(rng.random_range(0..=7500), SleepStage::NotDetected);
    }
    ensure!(
        (s.labels_total, s.excluded_short, s.excluded_not_detected, s.epochs_qualified) == (15_335, 40, 10, 15_285),
        "summary {s:?}"
    );
    ensure!(s.reconciles(), "summary does not reconcile");

    // The same rules through alignment: 4 full, 1 short, 1 Not Detected.
    let t0 = night_start(0);
    let stages = [
        SleepStage::Wake,
        SleepStage::LightSleep,
        SleepStage::NotDetected,
        SleepStage::DeepSleep,
        SleepStage::LightSleep,
        SleepStage::Rem,
    ];
    let labels: Vec<LabelRecord> = stages
        .iter()
        .enumerate()
        .map(|(i, &st)| LabelRecord::new(t0 + ChronoDuration::seconds(30 * i as i64), st))
        .collect();
    let mut frames: Vec<SensorFrame> = Vec::new();
    for e in 0..stages.len() as u64 {
        let n = if e == 4 { 7124 } else { 7500 };
        frames.extend((0..n).map(|i| frame(e * 30_000 + 4 * i)));
    }
    let rec = NightRecording {
        night_id: "fixture".into(),
        start_utc: t0,
        frames,
    };
    let parsed = validate_labels(labels).map_err(|e| e.to_string())?;
    let (epochs, summary) = align(&rec, &parsed).map_err(|e| e.to_string())?;
    ensure!(
        (summary.epochs_qualified, summary.excluded_short, summary.excluded_not_detected) == (4, 1, 1),
        "aligned summary {summary:?}"
    );
    ensure!(epochs.iter().filter(|e| e.qualified).count() == 4, "qualified epochs");
    Ok("7125 threshold; 15,335 -> 40 + 10 -> 15,285 reconciles".into())
}

// ------------------------------------------------------------------ 3 dsp

fn c3_dsp() -> Outcome {
    let lp = design_butterworth_lowpass(LOWPASS_ORDER, LOWPASS_HZ, FS).map_err(|e| e.to_string())?;
    let g10 = lp.gain(10.0, FS);
    let g40 = lp.gain(40.0, FS);
    ensure!((g10 - std::f64::consts::FRAC_1_SQRT_2).abs() <= TOL_GAIN_CUTOFF, "|H(10 Hz)| = {g10}");
    ensure!(g40 <= MAX_GAIN_40HZ, "|H(40 Hz)| = {g40}");

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let normal = Normal::new(0.0, 20.0).unwrap();
    let x: Vec<f64> = (0..7500).map(|_| 512.0 + normal.sample(&mut rng)).collect();
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let mut worst: f64 = 0.0;
    for kind in [WindowKind::Rectangular, WindowKind::Hann, WindowKind::Hamming, WindowKind::Tukey(0.10)] {
        let w = window(kind, x.len());
        let energy: f64 = x.iter().zip(&w).map(|(v, w)| ((v - mean) * w).powi(2)).sum::<f64>()
            / w.iter().map(|w| w * w).sum::<f64>();
        let psd = periodogram(&x, FS, kind).map_err(|e| e.to_string())?;
        let rel = (psd.total_power() - energy).abs() / energy;
        worst = worst.max(rel);
        ensure!(rel <= TOL_PARSEVAL_REL, "Parseval off by {rel} for {kind:?}");
    }

    let tone: Vec<f64> = (0..7500)
        .map(|i| 512.0 + 40.0 * (2.0 * std::f64::consts::PI * 10.0 * i as f64 / FS).sin())
        .collect();
    let psd = periodogram(&tone, FS, WindowKind::Tukey(0.10)).map_err(|e| e.to_string())?;
    let rel = band_powers(&psd).map_err(|e| e.to_string())?.relative();
    ensure!(BAND_EDGES_HZ[2] == (8.0, 13.0), "alpha band is {:?}", BAND_EDGES_HZ[2]);
    ensure!(rel[2] >= MIN_ALPHA_SHARE, "alpha share {}", rel[2]);

    // Closed forms, symmetric with period N - 1.
    use std::f64::consts::PI;
    for n in [7500usize, 101, 16] {
        let m = (n - 1) as f64;
        let ham = window(WindowKind::Hamming, n);
        let tuk = window(WindowKind::Tukey(0.10), n);
        let edge = 0.10 * m / 2.0;
        for i in [0, 1, n / 7, n / 4, n / 2, n - 2, n - 1] {
            let t = i as f64;
            let h = 0.54 - 0.46 * (2.0 * PI * t / m).cos();
            ensure!((ham[i] - h).abs() <= TOL_WINDOW, "Hamming[{i}] of {n}");
            let d = t.min(m - t);
            let k = if d < edge { 0.5 * (1.0 - (PI * d / edge).cos()) } else { 1.0 };
            ensure!((tuk[i] - k).abs() <= TOL_WINDOW, "Tukey[{i}] of {n}: {} vs {k}", tuk[i]);
        }
    }
    ensure!((window(WindowKind::Hamming, 7500)[0] - 0.08).abs() <= TOL_WINDOW, "Hamming end value");
    Ok(format!(
        "|H| {g10:.5} at 10 Hz, {g40:.5} at 40 Hz; Parseval worst {:.2e}; alpha share {:.3}",
        worst, rel[2]
    ))
}

// ------------------------------------------------------------- 4 spindles

/// Flat-top 12 Hz burst with 0.1 s raised-cosine edges.
fn add_burst(x: &mut [f64], start_s: f64, dur_s: f64, amp: f64) {
    let i0 = (start_s * FS).round() as usize;
    let n = (dur_s * FS).round() as usize;
    let ramp = 0.1 * FS;
    for j in 0..n {
        let t = j as f64 / FS;
        let d = (j as f64).min((n - 1 - j) as f64);
        let env = if d < ramp { 0.5 * (1.0 - (std::f64::consts::PI * d / ramp).cos()) } else { 1.0 };
        x[i0 + j] += amp * env * (2.0 * std::f64::consts::PI * 12.0 * t).sin();
    }
}

fn c4_spindles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for _ in 0..50 {
        let mut x = vec![512.0; EXPECTED_SAMPLES];
        let mut truth: Vec<(f64, f64)> = Vec::new();
        // three bursts in separate 10 s slots, as in a typical light-sleep epoch
        for slot in 0..3 {
            let dur = rng.random_range(0.5..=2.0);
            let start = slot as f64 * 10.0 + rng.random_range(1.0..(9.0 - dur));
            add_burst(&mut x, start, dur, rng.random_range(20.0..60.0));
            truth.push((start, start + dur));
        }
        let found = detect_spindles(&x, FS);
        let mut hit = vec![false; truth.len()];
        for s in &found {
            let (a, b) = (s.start as f64 / FS, s.end as f64 / FS);
            match truth.iter().position(|&(ta, tb)| a < tb && ta < b) {
                Some(k) if !hit[k] => {
                    hit[k] = true;
                    tp += 1;
                }
                _ => fp += 1,
            }
        }
        fn_ += hit.iter().filter(|h| !**h).count();
    }
    let precision = tp as f64 / (tp + fp).max(1) as f64;
    let recall = tp as f64 / (tp + fn_).max(1) as f64;
    ensure!(precision == 1.0 && recall == 1.0, "precision {precision}, recall {recall} ({tp} tp, {fp} fp, {fn_} fn)");

    // Quiet epochs: every stage drawn with the deep-sleep background, which
    // carries no spindles, saccades or movements.
    let mut profiles = ProfileSet::default();
    profiles.stages = [profiles.stages[0]; 4];
    let mut false_events = 0;
    let mut quiet = 0;
    'nights: for seed in 0..20u64 {
        let night = generate_night(seed, "quiet", night_start(0), 12, &profiles).map_err(|e| e.to_string())?;
        ensure!(night.truth.spindles.is_empty(), "quiet night has spindles");
        let labels = validate_labels(night.labels.clone()).map_err(|e| e.to_string())?;
        let (epochs, _) = align(&night.recording, &labels).map_err(|e| e.to_string())?;
        for e in epochs.iter().filter(|e| e.qualified) {
            let eog: Vec<f64> = e.frames.iter().map(|f| f.eog as f64).collect();
            false_events += detect_spindles(&eog, FS).len();
            quiet += 1;
            if quiet == 100 {
                break 'nights;
            }
        }
    }
    ensure!(quiet == 100, "only {quiet} quiet epochs");
    ensure!(false_events == 0, "{false_events} false events on quiet epochs");
    Ok(format!("{tp} bursts, precision 1, recall 1; 0 events on 100 quiet epochs"))
}

// ---------------------------------------------------------------- 5 heart

/// Pulse train whose beat times follow `bpm(t)`, with a small diastolic wave.
fn ppg(bpm: impl Fn(f64) -> f64, seconds: f64, seed: u64) -> Vec<f64> {
    let n = (seconds * FS) as usize;
    let mut beats = Vec::new();
    let mut t = 0.2;
    while t < seconds + 1.0 {
        beats.push(t);
        t += 60.0 / bpm(t);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 2.0).unwrap();
    (0..n)
        .map(|i| {
            let t = i as f64 / FS;
            let mut v = 512.0 + noise.sample(&mut rng);
            for &b in beats.iter().filter(|&&b| (b - t).abs() < 1.0) {
                let d = t - b;
                v += 100.0 * ((-0.5 * (d / 0.06).powi(2)).exp() + 0.3 * (-0.5 * ((d - 0.3) / 0.08).powi(2)).exp());
            }
            v
        })
        .collect()
}

fn c5_heart_rate() -> Outcome {
    let mut worst: f64 = 0.0;
    for bpm in 40..=180 {
        let x = ppg(|_| bpm as f64, 30.0, bpm as u64);
        let f = pulse_features(&x, FS);
        let err = (f.hr_bpm_spectral - bpm as f64).abs();
        worst = worst.max(err);
        ensure!(err <= TOL_HR_BPM, "{bpm} BPM estimated {:.2}", f.hr_bpm_spectral);
        let gap = (f.hr_bpm_peaks - f.hr_bpm_spectral).abs();
        ensure!(gap <= TOL_PEAKS_VS_SPECTRAL_BPM, "{bpm} BPM: peaks {:.2} vs spectral {:.2}", f.hr_bpm_peaks, f.hr_bpm_spectral);
    }
    let x = ppg(|t| if t < 15.0 { 64.0 } else { 72.0 }, 30.0, 5);
    let delta = pulse_features(&x, FS).hr_halves_delta_bpm;
    ensure!((delta - 8.0).abs() <= TOL_HALVES_BPM, "halves delta {delta}");
    Ok(format!("40-180 BPM worst error {worst:.2} BPM; halves delta {delta:+.2} BPM"))
}

// ---------------------------------------------------------------- 6 smote

fn blobs(counts: &[usize], dims: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, 1.0).unwrap();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (c, &k) in counts.iter().enumerate() {
        for _ in 0..k {
            x.push((0..dims).map(|d| 3.0 * c as f64 + d as f64 + n.sample(&mut rng)).collect());
            y.push(c);
        }
    }
    (x, y)
}

fn c6_smote() -> Outcome {
    let (x, y) = blobs(&[120, 40, 25, 9], 6, 6);
    let k = 5;
    let r = smote(&x, &y, 4, k, 6).map_err(|e| e.to_string())?;
    let mut counts = [0usize; 4];
    r.y.iter().for_each(|&c| counts[c] += 1);
    ensure!(counts == [120; 4], "class counts {counts:?}");
    ensure!(r.x[..x.len()] == x[..], "original rows altered");
    for (j, o) in r.origins.iter().enumerate() {
        let row = &r.x[x.len() + j];
        ensure!(y[o.base] == y[o.neighbor] && r.y[x.len() + j] == y[o.base], "origin classes differ");
        ensure!((0.0..=1.0).contains(&o.u), "u = {}", o.u);
        for d in 0..row.len() {
            let expect = x[o.base][d] + o.u * (x[o.neighbor][d] - x[o.base][d]);
            ensure!((row[d] - expect).abs() <= TOL_CONVEX, "row {j} is not on its segment");
        }
        // brute-force k nearest same-class rows
        let mut same: Vec<(f64, usize)> = (0..x.len())
            .filter(|&i| i != o.base && y[i] == y[o.base])
            .map(|i| (x[i].iter().zip(&x[o.base]).map(|(a, b)| (a - b).powi(2)).sum(), i))
            .collect();
        same.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let kk = k.min(same.len());
        ensure!(same[..kk].iter().any(|&(_, i)| i == o.neighbor), "neighbor of row {j} is not among the {kk} nearest");
    }

    // Leakage guard on a corrupted plan.
    let mut rows = Vec::new();
    let (fx, fy) = blobs(&[60, 60, 60, 60], ossmm_core::FEATURE_COUNT, 7);
    for (i, (v, c)) in fx.into_iter().zip(fy).enumerate() {
        rows.push(ossmm_core::features::FeatureRow {
            night_id: format!("n{}", i % 6),
            epoch_idx: i,
            stage: SleepStage::CLASSES[c],
            features: ossmm_core::FeatureVector::new(v).map_err(|e| e.to_string())?,
        });
    }
    let data = Dataset::from_rows(&rows);
    let nights = data.nights();
    let mut plan: FoldPlan = group_kfold(&nights, 3, 1).map_err(|e| e.to_string())?;
    let leaked = plan.folds[0].val_nights[0].clone();
    plan.folds[0].train_nights.push(leaked.clone());
    let cfg = ClassifierConfig {
        params: ModelParams::RandomForest(ForestParams {
            n_estimators: 3,
            ..ForestParams::default()
        }),
        seed: 1,
    };
    match run_cv_with_plan(&data, &[cfg], &plan, 1) {
        Err(MlError::Leakage { night_id, .. }) => ensure!(night_id == leaked, "guard named {night_id}"),
        other => return Err(format!("corrupted plan was not rejected: {:?}", other.map(|_| ()))),
    }
    let all: Vec<usize> = (0..data.len()).collect();
    ensure!(leakage_guard(&data, &all, &[0]).is_err(), "overlapping rows passed the guard");
    Ok(format!("{} synthetic rows, all convex; leakage of {leaked} caught", r.origins.len()))
}

// ---------------------------------------------------------------- 7 folds

fn c7_group_kfold() -> Outcome {
    let base: Vec<String> = (1..=12).map(|i| format!("night_{i:02}")).collect();
    let all: BTreeSet<&String> = base.iter().collect();
    for seed in 0..1000u64 {
        let mut nights = base.clone();
        nights.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let plan = group_kfold(&nights, 6, seed).map_err(|e| e.to_string())?;
        ensure!(plan.folds.len() == 6, "seed {seed}: {} folds", plan.folds.len());
        let mut seen = BTreeSet::new();
        for f in &plan.folds {
            ensure!(f.train_nights.len() == 10 && f.val_nights.len() == 2, "seed {seed}: fold sizes");
            let tr: BTreeSet<&String> = f.train_nights.iter().collect();
            let va: BTreeSet<&String> = f.val_nights.iter().collect();
            ensure!(tr.is_disjoint(&va), "seed {seed}: train and val overlap");
            ensure!(tr.union(&va).copied().collect::<BTreeSet<_>>() == all, "seed {seed}: fold drops nights");
            for v in va {
                ensure!(seen.insert(v), "seed {seed}: {v} validates twice");
            }
        }
        ensure!(seen == all, "seed {seed}: validation does not cover all nights");
        plan.validate(&nights).map_err(|e| e.to_string())?;
    }
    Ok("1000 shuffles, every fold 10 train + 2 val".into())
}

// ----------------------------------------------------------------- 8 tree

/// Exhaustive Gini search: (feature, threshold, decrease), first feature
/// then lowest threshold on ties.
fn brute_force_split(x: &[Vec<f64>], y: &[usize], n_classes: usize) -> Option<(usize, f64, f64)> {
    let gini = |idx: &[usize]| {
        let n = idx.len() as f64;
        let mut c = vec![0.0; n_classes];
        idx.iter().for_each(|&i| c[y[i]] += 1.0);
        1.0 - c.iter().map(|k| (k / n) * (k / n)).sum::<f64>()
    };
    let all: Vec<usize> = (0..x.len()).collect();
    let parent = x.len() as f64 * gini(&all);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| x[i][f] <= t);
            let dec = parent - l.len() as f64 * gini(&l) - r.len() as f64 * gini(&r);
            if dec <= 1e-9 {
                continue;
            }
            if best.is_none_or(|(_, _, b)| dec > b + 1e-9) {
                best = Some((f, t, dec));
            }
        }
    }
    best
}

fn c8_tree_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut splits = 0;
    for case in 0..50 {
        let n = rng.random_range(20..=200);
        let nf = rng.random_range(1..=5);
        let nc = rng.random_range(2..=4);
        let coarse = case % 3 == 0;
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..nf)
                    .map(|_| if coarse { rng.random_range(0..6) as f64 } else { rng.random_range(-5.0..5.0) })
                    .collect()
            })
            .collect();
        let y: Vec<usize> = x
            .iter()
            .map(|r| {
                let score = r[0] + if nf > 1 { 0.5 * r[1] } else { 0.0 } + rng.random_range(-3.0..3.0);
                ((score + 8.0) / 16.0 * nc as f64).clamp(0.0, nc as f64 - 1.0) as usize
            })
            .collect();
        let params = ForestParams {
            n_estimators: 1,
            max_depth: Some(1),
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::Count(nf),
            bootstrap: false,
        };
        let forest = RandomForest::fit(&Columns::from_rows(&x), &y, nc, &params, case);
        let root = &forest.trees[0].nodes[0];
        match (brute_force_split(&x, &y, nc), root) {
            (None, Node::Leaf { .. }) => {}
            (Some((f, t, dec)), Node::Split { feature, threshold, gain, .. }) => {
                ensure!(
                    *feature == f && *threshold == t,
                    "case {case}: tree split x[{feature}] <= {threshold}, oracle x[{f}] <= {t}"
                );
                ensure!((gain - dec).abs() <= 1e-9 * dec.max(1.0), "case {case}: gain {gain} vs {dec}");
                splits += 1;
            }
            (o, r) => return Err(format!("case {case}: oracle {o:?}, tree {r:?}")),
        }
    }
    Ok(format!("50 datasets, {splits} root splits identical"))
}

// -------------------------------------------------------------- pipeline

fn kit(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ossmm-kit"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "`ossmm-kit {}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

struct Run {
    corpus: PathBuf,
    out: PathBuf,
}

fn pipeline(root: &Path) -> Result<Run, String> {
    let corpus = root.join("corpus");
    let out = root.join("out");
    let (c, o) = (corpus.to_str().unwrap(), out.to_str().unwrap());
    let seed = PIPELINE_SEED.to_string();
    kit(&["synth", "--corpus", c, "--seed", &seed])?;
    kit(&["ingest", "--corpus", c, "--out", o, "--seed", &seed])?;
    kit(&["extract", "--corpus", c, "--out", o, "--seed", &seed])?;
    kit(&["cv", "--out", o, "--seed", &seed, "--folds", "6"])?;
    kit(&["train", "--out", o, "--seed", &seed])?;
    kit(&["eval", "--out", o, "--seed", &seed])?;
    Ok(Run { corpus, out })
}

fn read_report(run: &Run) -> Result<EvalReport, String> {
    let text = std::fs::read_to_string(run.out.join(REPORT_FILE)).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn c9_end_to_end(run: &Result<Run, String>) -> Outcome {
    let run = run.as_ref().map_err(|e| e.clone())?;
    let r = read_report(run)?;
    let chance = r.baselines.stratified_chance;
    let oracle: f64 = r.test_class_distribution.iter().map(|p| p * p).sum();
    ensure!((chance - oracle).abs() < 1e-12, "chance is not Σp² of the test split");
    let mut notes = Vec::new();
    for kind in [ClassifierKind::RandomForest, ClassifierKind::GradientBoostedTrees] {
        let m = r
            .models
            .iter()
            .find(|m| m.kind == kind)
            .ok_or_else(|| format!("no {} in report", kind.name()))?;
        match m.config.params {
            ModelParams::RandomForest(p) => {
                ensure!(p.n_estimators == 150 && p.max_depth == Some(15), "forest config {p:?}")
            }
            ModelParams::GradientBoostedTrees(p) => ensure!(
                p.n_estimators == 100 && p.max_depth == 6 && p.learning_rate == 0.1,
                "boosting config {p:?}"
            ),
            _ => {}
        }
        let rep = &m.report;
        ensure!(rep.macro_f1 >= MIN_MACRO_F1, "{} macro F1 {}", kind.name(), rep.macro_f1);
        ensure!(
            rep.accuracy >= chance + MIN_ACC_OVER_CHANCE,
            "{} accuracy {} vs chance {chance}",
            kind.name(),
            rep.accuracy
        );
        let near = rep.confusion_rate(SleepStage::DeepSleep, SleepStage::LightSleep);
        let far = rep.confusion_rate(SleepStage::DeepSleep, SleepStage::Rem);
        ensure!(near > far, "{} Deep->Light {near} <= Deep->REM {far}", kind.name());
        let rank = rep
            .top_importances(ossmm_core::FEATURE_COUNT)
            .iter()
            .position(|f| f.name == "eog.alpha_power")
            .ok_or("alpha_power missing from importances")?;
        ensure!(rank < ALPHA_MAX_RANK, "{} ranks eog.alpha_power #{}", kind.name(), rank + 1);
        notes.push(format!(
            "{} F1 {:.3} acc {:.3} D->L {:.2} D->R {:.2} alpha #{}",
            kind.name(),
            rep.macro_f1,
            rep.accuracy,
            near,
            far,
            rank + 1
        ));
    }
    Ok(format!("chance {chance:.3}; {}", notes.join("; ")))
}

fn c10_streaming(run: &Result<Run, String>) -> Outcome {
    let run = run.as_ref().map_err(|e| e.clone())?;
    let text = std::fs::read_to_string(run.out.join(MODELS_DIR).join("random_forest.json")).map_err(|e| e.to_string())?;
    let model = serde_json::from_str::<ModelFile>(&text).map_err(|e| e.to_string())?.model;
    let report = read_report(run)?;
    let mut compared = 0;
    for night in report.test_nights.iter().take(3) {
        let loaded = load_night(&run.corpus.join(night)).map_err(|e| e.to_string())?;
        let (epochs, _) = align(&loaded.recording, &loaded.labels).map_err(|e| e.to_string())?;
        let offline: Vec<(usize, SleepStage)> = epochs
            .iter()
            .filter(|e| e.qualified)
            .map(|e| {
                let fv = extract_epoch(e).map_err(|e| e.to_string())?;
                let c = model.predict_one(fv.values()).map_err(|e| e.to_string())?;
                Ok((e.epoch_idx, SleepStage::from_class_index(c).map_err(|e| e.to_string())?))
            })
            .collect::<Result<_, String>>()?;
        let events = replay(&model, ModulationPolicy::default(), 0, loaded.recording.frames.iter().copied())
            .map_err(|e| e.to_string())?;
        let online: Vec<(usize, SleepStage)> = events
            .iter()
            .filter(|e| loaded.labels.stages[e.epoch].is_trainable())
            .filter_map(|e| e.stage.map(|s| (e.epoch, s)))
            .collect();
        ensure!(online == offline, "{night}: online and batch predictions differ");
        // the CLI stream carries the same events
        let lines = kit(&[
            "simulate",
            "--corpus",
            run.corpus.to_str().unwrap(),
            "--night",
            night,
            "--model",
            run.out.join(MODELS_DIR).join("random_forest.json").to_str().unwrap(),
        ])?;
        let from_cli: Vec<ossmm_core::stream::ReplayEvent> = lines
            .lines()
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        ensure!(from_cli == events, "{night}: simulate output differs from replay");
        compared += offline.len();
    }

    // Policy fixtures under the defaults: two consecutive REM, then 10
    // refractory epochs.
    use SleepStage::*;
    let policy = ModulationPolicy::default();
    let fixtures: [(Vec<(usize, SleepStage)>, Vec<usize>); 4] = [
        ((0..40).map(|i| (i, if i >= 1 { Rem } else { LightSleep })).collect(), vec![2, 14, 26, 38]),
        (vec![(0, Rem), (1, LightSleep), (2, Rem), (3, Wake), (4, Rem)], vec![]),
        // an unqualified epoch 6 breaks the streak
        (vec![(4, LightSleep), (5, Rem), (7, Rem), (8, Rem)], vec![8]),
        (vec![(0, Rem), (1, Rem), (2, Rem), (12, Rem), (13, Rem), (14, Rem)], vec![1, 13]),
    ];
    for (k, (seq, expect)) in fixtures.iter().enumerate() {
        let mut st = PolicyState::default();
        let got: Vec<usize> = seq
            .iter()
            .filter_map(|&(i, s)| policy_step(&policy, &mut st, i, s).map(|t| t.epoch_idx))
            .collect();
        ensure!(&got == expect, "policy fixture {k}: triggers {got:?}, expected {expect:?}");
    }
    Ok(format!("{compared} epochs identical across 3 nights; 4 policy fixtures exact"))
}

fn c11_determinism(first: &Result<Run, String>, root: &Path) -> Outcome {
    let a = first.as_ref().map_err(|e| e.clone())?;
    let b = pipeline(root)?;
    let mut files = vec![FEATURES_CSV.to_string(), CV_FILE.to_string(), REPORT_FILE.to_string()];
    for kind in ClassifierKind::ALL {
        files.push(format!("{MODELS_DIR}/{}", ossmm_cli::model_file_name(kind)));
    }
    for f in &files {
        let x = std::fs::read(a.out.join(f)).map_err(|e| format!("{f}: {e}"))?;
        let y = std::fs::read(b.out.join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure!(x == y, "{f} differs between runs");
    }
    Ok(format!("{} artifacts byte-identical across two runs", files.len()))
}

fn main() {
    let mut lines = vec![
        criterion(1, "baseline formulas", LIMIT_1, c1_baselines),
        criterion(2, "epoch qualification", LIMIT_2, c2_qualification),
        criterion(3, "dsp suite", LIMIT_3, c3_dsp),
        criterion(4, "spindle detection", LIMIT_4, c4_spindles),
        criterion(5, "heart-rate estimation", LIMIT_5, c5_heart_rate),
        criterion(6, "smote", LIMIT_6, c6_smote),
        criterion(7, "group k-fold", LIMIT_7, c7_group_kfold),
        criterion(8, "tree oracle", LIMIT_8, c8_tree_oracle),
    ];
    let tmp = tempfile::tempdir().expect("temp dir");
    let start = Instant::now();
    let first = pipeline(&tmp.path().join("a"));
    let first_elapsed = start.elapsed();
    let r9 = c9_end_to_end(&first);
    lines.push(finish(9, "end-to-end on 15 synthetic nights", LIMIT_9, start.elapsed(), r9));
    lines.push(criterion(10, "streaming equivalence", LIMIT_10, || c10_streaming(&first)));
    // both pipeline runs count toward the determinism budget
    let start = Instant::now();
    let r11 = c11_determinism(&first, &tmp.path().join("b"));
    lines.push(finish(11, "determinism", LIMIT_11, first_elapsed + start.elapsed(), r11));

    let failed: Vec<usize> = lines.iter().filter(|l| !l.passed).map(|l| l.id).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", lines.len());
    } else {
        println!("acceptance: failed {failed:?}");
        std::process::exit(1);
    }
}
