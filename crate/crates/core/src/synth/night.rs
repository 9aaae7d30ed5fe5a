//! One synthetic night: hypnogram, per-epoch recipes and the six sensor
//! streams.

use std::f64::consts::PI;

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::hypnogram::{generate_hypnogram, Hypnogram};
use super::profile::{
    ProfileSet, StageProfile, ADC_MIDPOINT, FRONT_END_LOWPASS_HZ, FRONT_END_ORDER, GRAVITY_COUNTS,
    SYNTH_BANDS_HZ,
};
use super::SynthError;
use crate::dsp::{design_butterworth_lowpass, filter_forward};
use crate::ingest::{encode_imu, LabelRecord, NightMeta};
use crate::model::{NightRecording, SensorFrame, SleepStage, ADC_MAX, EXPECTED_SAMPLES, FS_HZ};

pub const MIN_EPOCHS: usize = 10;

const FS: f64 = FS_HZ as f64;
const SPE: usize = EXPECTED_SAMPLES;
const EPOCH_S: f64 = 30.0;
const SAMPLE_MS: u64 = 1000 / FS_HZ as u64;

/// A generated event in recording time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthEvent {
    pub epoch_idx: usize,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spindles: Vec<TruthEvent>,
    pub saccades: Vec<TruthEvent>,
    pub movements: Vec<TruthEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticNight {
    pub meta: NightMeta,
    pub recording: NightRecording,
    pub labels: Vec<LabelRecord>,
    pub hypnogram: Hypnogram,
    pub truth: GroundTruth,
}

/// Per-night stream: FNV-1a of the id selects the ChaCha stream, so a
/// night's content depends only on `(seed, night_id)`.
pub fn night_rng(seed: u64, night_id: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in night_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(h);
    rng
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn lognormal<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    (sigma * normal(rng)).exp()
}

fn poisson<R: Rng>(rng: &mut R, lambda: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).map_or(0, |d| d.sample(rng) as usize)
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

#[derive(Debug, Clone, Copy)]
struct EpochPlan {
    profile: StageProfile,
    band_rms: [f64; 5],
    hr_bpm: f64,
}

/// `Not Detected` epochs keep the physiology of the surrounding stage.
fn recipe_stages(h: &Hypnogram) -> Vec<SleepStage> {
    let first = h
        .stages
        .iter()
        .copied()
        .find(|s| s.is_trainable())
        .unwrap_or(SleepStage::Wake);
    let mut last = first;
    h.stages
        .iter()
        .map(|&s| {
            if s.is_trainable() {
                last = s;
            }
            last
        })
        .collect()
}

fn plan_epochs<R: Rng>(rng: &mut R, recipe: &[SleepStage], p: &ProfileSet, hr_offset: f64) -> Vec<EpochPlan> {
    let profile_of = |s: SleepStage| p.stages[s.class_index().expect("trainable")];
    let n = recipe.len();
    (0..n)
        .map(|e| {
            let own = profile_of(recipe[e]);
            let w: f64 = rng.random::<f64>() * p.edge_blend;
            let neighbour = if e > 0 && recipe[e - 1] != recipe[e] {
                Some(recipe[e - 1])
            } else if e + 1 < n && recipe[e + 1] != recipe[e] {
                Some(recipe[e + 1])
            } else {
                None
            };
            let mut profile = match neighbour {
                Some(s) => own.blend(&profile_of(s), w),
                None => own,
            };
            // Spindles belong to Light sleep alone, blended or not.
            if recipe[e] != SleepStage::LightSleep {
                profile.spindle_rate = 0.0;
            }
            let mut band_rms = profile.eog_band_rms;
            for (v, sigma) in band_rms.iter_mut().zip(p.band_jitter) {
                *v *= lognormal(rng, sigma);
            }
            let hr_bpm = profile.hr_bpm + hr_offset + profile.hr_epoch_sd_bpm * normal(rng);
            EpochPlan {
                profile,
                band_rms,
                hr_bpm: hr_bpm.clamp(35.0, 150.0),
            }
        })
        .collect()
}

/// Events in one epoch for a rate given per minute.
fn event_count<R: Rng>(rng: &mut R, rate_per_min: f64, jitter: f64) -> usize {
    let lambda = rate_per_min * EPOCH_S / 60.0 * lognormal(rng, jitter) * (-jitter * jitter / 2.0).exp();
    poisson(rng, lambda)
}

/// Gaussian noise with a flat spectrum inside `[lo, hi)` Hz and unit RMS.
fn band_noise<R: Rng>(rng: &mut R, n: usize, planner: &mut FftPlanner<f64>, (lo, hi): (f64, f64)) -> Vec<f64> {
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..n.div_ceil(2) {
        let f = k as f64 * FS / n as f64;
        if f >= lo && f < hi {
            let c = Complex64::new(normal(rng), normal(rng));
            spec[k] = c;
            spec[n - k] = c.conj();
        }
    }
    planner.plan_fft_inverse(n).process(&mut spec);
    let mut x: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v /= rms);
    }
    x
}

/// Piecewise-constant per-epoch values with linear crossfades of `ramp`
/// samples centred on each boundary.
fn crossfade(values: &[f64], ramp: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len() * SPE);
    for &v in values {
        out.extend(std::iter::repeat_n(v, SPE));
    }
    let ramp = ramp.min(SPE);
    let half = ramp / 2;
    for k in 1..values.len() {
        let (a, b) = (values[k - 1], values[k]);
        for j in 0..ramp {
            let w = (j as f64 + 0.5) / ramp as f64;
            out[k * SPE - half + j] = a + w * (b - a);
        }
    }
    out
}

/// Flat-topped burst envelope with raised-cosine edges.
fn burst_envelope(t: f64, dur: f64, edge: f64) -> f64 {
    if t < 0.0 || t > dur {
        0.0
    } else if t < edge {
        0.5 - 0.5 * (PI * t / edge).cos()
    } else if t > dur - edge {
        0.5 - 0.5 * (PI * (dur - t) / edge).cos()
    } else {
        1.0
    }
}

fn add_spindles<R: Rng>(rng: &mut R, x: &mut [f64], plans: &[EpochPlan], p: &ProfileSet, out: &mut Vec<TruthEvent>) {
    for (e, plan) in plans.iter().enumerate() {
        let n = event_count(rng, plan.profile.spindle_rate, p.rate_jitter);
        let mut placed: Vec<(f64, f64)> = Vec::new();
        for _ in 0..n {
            let dur = uniform(rng, p.spindle_duration_s);
            let start = uniform(rng, (0.5, EPOCH_S - 0.5 - dur));
            let f = uniform(rng, p.spindle_freq_hz);
            let phase = uniform(rng, (0.0, 2.0 * PI));
            let amp = p.spindle_rms * std::f64::consts::SQRT_2 * lognormal(rng, 0.15);
            if placed.iter().any(|&(s, d)| start < s + d + 0.5 && s < start + dur + 0.5) {
                continue;
            }
            placed.push((start, dur));
            let i0 = e * SPE + (start * FS).round() as usize;
            let len = (dur * FS).round() as usize;
            for j in 0..len {
                let t = j as f64 / FS;
                x[i0 + j] += amp * burst_envelope(t, dur, 0.1) * (2.0 * PI * f * t + phase).sin();
            }
            let t0 = e as f64 * EPOCH_S + start;
            out.push(TruthEvent {
                epoch_idx: e,
                start_s: t0,
                end_s: t0 + dur,
            });
        }
    }
    out.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
}

fn add_saccades<R: Rng>(rng: &mut R, x: &mut [f64], plans: &[EpochPlan], p: &ProfileSet, out: &mut Vec<TruthEvent>) {
    let rise = ((p.saccade_rise_s * FS).round() as usize).max(1);
    let tail = (5.0 * p.saccade_decay_s * FS) as usize;
    for (e, plan) in plans.iter().enumerate() {
        let n = event_count(rng, plan.profile.saccade_rate, p.rate_jitter);
        for _ in 0..n {
            let start = uniform(rng, (0.0, EPOCH_S));
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let step = sign * uniform(rng, p.saccade_step);
            let i0 = e * SPE + (start * FS) as usize;
            for j in 0..rise + tail {
                let Some(v) = x.get_mut(i0 + j) else { break };
                *v += if j < rise {
                    step * (j + 1) as f64 / rise as f64
                } else {
                    step * (-((j - rise) as f64 / FS) / p.saccade_decay_s).exp()
                };
            }
            let t0 = e as f64 * EPOCH_S + start;
            out.push(TruthEvent {
                epoch_idx: e,
                start_s: t0,
                end_s: t0 + rise as f64 / FS,
            });
        }
    }
    out.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
}

fn eog_stream<R: Rng>(rng: &mut R, plans: &[EpochPlan], p: &ProfileSet, truth: &mut GroundTruth) -> Vec<u16> {
    let n = plans.len() * SPE;
    let ramp = (p.crossfade_s * FS) as usize;
    let mut planner = FftPlanner::new();
    let mut x = vec![0.0; n];
    for (b, &band) in SYNTH_BANDS_HZ.iter().enumerate() {
        let noise = band_noise(rng, n, &mut planner, band);
        let amps: Vec<f64> = plans.iter().map(|pl| pl.band_rms[b]).collect();
        for ((v, a), z) in x.iter_mut().zip(crossfade(&amps, ramp)).zip(noise) {
            *v += a * z;
        }
    }
    add_spindles(rng, &mut x, plans, p, &mut truth.spindles);
    add_saccades(rng, &mut x, plans, p, &mut truth.saccades);

    let mut rails: Vec<(usize, usize, u16)> = Vec::new();
    for (e, plan) in plans.iter().enumerate() {
        for _ in 0..event_count(rng, plan.profile.saturation_rate, p.rate_jitter) {
            let dur = uniform(rng, p.saturation_duration_s);
            let start = uniform(rng, (0.0, EPOCH_S - dur));
            let rail = if rng.random::<bool>() { ADC_MAX } else { 0 };
            let i0 = e * SPE + (start * FS) as usize;
            rails.push((i0, i0 + (dur * FS) as usize, rail));
        }
    }

    let lp = design_butterworth_lowpass(FRONT_END_ORDER, FRONT_END_LOWPASS_HZ, FS).expect("valid front-end");
    let mut out: Vec<u16> = filter_forward(&lp, &x)
        .into_iter()
        .map(|v| (ADC_MIDPOINT + v).round().clamp(0.0, ADC_MAX as f64) as u16)
        .collect();
    for (a, b, rail) in rails {
        out[a..b.min(n)].iter_mut().for_each(|v| *v = rail);
    }
    out
}

fn ppg_template(tau: f64) -> f64 {
    let g = |mu: f64, sd: f64| (-(tau - mu).powi(2) / (2.0 * sd * sd)).exp();
    g(0.0, 0.06) + 0.35 * g(0.3, 0.08)
}

fn ppg_stream<R: Rng>(rng: &mut R, plans: &[EpochPlan], p: &ProfileSet) -> Vec<u16> {
    let n = plans.len() * SPE;
    let dur = n as f64 / FS;
    let amp = p.ppg_amplitude * lognormal(rng, p.ppg_amplitude_night_sd);
    let mut beats = Vec::new();
    let mut t = rng.random::<f64>();
    while t < dur {
        beats.push(t);
        let plan = &plans[((t / EPOCH_S) as usize).min(plans.len() - 1)];
        let ibi = 60.0 / plan.hr_bpm * (1.0 + plan.profile.ibi_cv * normal(rng));
        t += ibi.clamp(0.3, 2.0);
    }
    let phase = uniform(rng, (0.0, 2.0 * PI));
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / FS;
            p.ppg_resp_amplitude * (2.0 * PI * p.resp_rate_hz * t + phase).sin() + p.ppg_noise_rms * normal(rng)
        })
        .collect();
    let (before, after) = ((0.3 * FS) as isize, (0.7 * FS) as isize);
    for &tb in &beats {
        let c = (tb * FS).round() as isize;
        for i in (c - before).max(0)..(c + after).min(n as isize) {
            x[i as usize] += amp * ppg_template(i as f64 / FS - tb);
        }
    }
    let offset = ADC_MIDPOINT - 0.4 * amp;
    x.iter()
        .map(|v| (offset + v).round().clamp(0.0, ADC_MAX as f64) as u16)
        .collect()
}

fn unit<R: Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v = [normal(rng), normal(rng), normal(rng)];
        if v.iter().map(|c| c * c).sum::<f64>() > 1e-18 {
            return normalize(v);
        }
    }
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.map(|c| c / norm)
}

fn lerp_dir(a: [f64; 3], b: [f64; 3], w: f64) -> [f64; 3] {
    let v = [0, 1, 2].map(|k| a[k] + w * (b[k] - a[k]));
    if v.iter().map(|c| c * c).sum::<f64>() < 1e-18 {
        b
    } else {
        normalize(v)
    }
}

/// Accelerometer and gyroscope, signed counts per axis.
fn imu_streams<R: Rng>(rng: &mut R, plans: &[EpochPlan], p: &ProfileSet, truth: &mut GroundTruth) -> ([Vec<f64>; 3], [Vec<f64>; 3]) {
    let n = plans.len() * SPE;
    let mut accel: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);
    let mut gyro: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);

    struct Move {
        i0: usize,
        len: usize,
        accel: f64,
        gyro: f64,
        f: f64,
        phase: f64,
        a_dir: [f64; 3],
        g_dir: [f64; 3],
        posture: Option<[f64; 3]>,
    }
    let mut moves = Vec::new();
    for (e, plan) in plans.iter().enumerate() {
        for _ in 0..event_count(rng, plan.profile.movement_rate, p.rate_jitter) {
            let dur = uniform(rng, p.movement_duration_s);
            let start = uniform(rng, (0.0, EPOCH_S - dur));
            let posture = if rng.random::<f64>() < p.posture_change_p {
                let mut d = unit(rng);
                d[2] = d[2].abs() + 0.5;
                Some(normalize(d))
            } else {
                None
            };
            let m = Move {
                i0: e * SPE + (start * FS) as usize,
                len: (dur * FS) as usize,
                accel: uniform(rng, p.movement_accel),
                gyro: uniform(rng, p.movement_gyro),
                f: uniform(rng, p.movement_freq_hz),
                phase: uniform(rng, (0.0, 2.0 * PI)),
                a_dir: unit(rng),
                g_dir: unit(rng),
                posture,
            };
            let t0 = e as f64 * EPOCH_S + start;
            truth.movements.push(TruthEvent {
                epoch_idx: e,
                start_s: t0,
                end_s: t0 + dur,
            });
            moves.push(m);
        }
    }
    moves.sort_by_key(|m| m.i0);
    truth.movements.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));

    // Gravity along the current posture, turning during posture changes.
    let tilt = [0.1 * normal(rng), 0.1 * normal(rng), 1.0];
    let mut dir = normalize(tilt);
    let mut next = 0;
    let mut turning: Option<(usize, usize, [f64; 3], [f64; 3])> = None;
    let resp_phase = uniform(rng, (0.0, 2.0 * PI));
    for i in 0..n {
        while next < moves.len() && moves[next].i0 <= i {
            if let Some(target) = moves[next].posture {
                turning = Some((moves[next].i0, moves[next].len.max(1), dir, target));
            }
            next += 1;
        }
        if let Some((s, len, from, to)) = turning {
            let w = ((i - s) as f64 / len as f64).min(1.0);
            dir = lerp_dir(from, to, w);
            if w >= 1.0 {
                turning = None;
            }
        }
        let resp = p.accel_resp_amplitude * (2.0 * PI * p.resp_rate_hz * i as f64 / FS + resp_phase).sin();
        for k in 0..3 {
            accel[k][i] = GRAVITY_COUNTS * dir[k] + p.accel_noise_rms * normal(rng);
            gyro[k][i] = p.gyro_noise_rms * normal(rng);
        }
        accel[2][i] += resp;
    }
    for m in &moves {
        let dur = m.len as f64 / FS;
        for j in 0..m.len {
            let Some(i) = (m.i0 + j < n).then_some(m.i0 + j) else { break };
            let t = j as f64 / FS;
            let env = (PI * t / dur).sin().powi(2);
            let s = (2.0 * PI * m.f * t + m.phase).sin();
            for k in 0..3 {
                accel[k][i] += env * m.accel * s * m.a_dir[k];
                gyro[k][i] += env * m.gyro * s * m.g_dir[k];
            }
        }
    }
    (accel, gyro)
}

fn encode(v: f64) -> u16 {
    encode_imu(v.round() as i32)
}

/// Generates one night of `epochs` labeled epochs.
pub fn generate_night(
    seed: u64,
    night_id: &str,
    start_utc: DateTime<Utc>,
    epochs: usize,
    p: &ProfileSet,
) -> Result<SyntheticNight, SynthError> {
    if epochs < MIN_EPOCHS {
        return Err(SynthError::TooShort(epochs));
    }
    p.validate().map_err(SynthError::InvalidProfile)?;
    let mut rng = night_rng(seed, night_id);
    let hypnogram = generate_hypnogram(&mut rng, epochs, p);
    let recipe = recipe_stages(&hypnogram);
    let hr_offset = p.hr_night_sd_bpm * normal(&mut rng);
    let plans = plan_epochs(&mut rng, &recipe, p, hr_offset);

    let mut truth = GroundTruth::default();
    let eog = eog_stream(&mut rng, &plans, p, &mut truth);
    let ppg = ppg_stream(&mut rng, &plans, p);
    let (accel, gyro) = imu_streams(&mut rng, &plans, p, &mut truth);

    // Link start-up and shutdown can cost the edge epochs samples.
    let n = epochs * SPE;
    let head = (rng.random::<f64>() < p.truncation_p).then(|| uniform(&mut rng, p.truncation_s));
    let tail = (rng.random::<f64>() < p.truncation_p).then(|| uniform(&mut rng, p.truncation_s));
    let lo = head.map_or(0, |s| (s * FS) as usize);
    let hi = n - tail.map_or(0, |s| (s * FS) as usize);

    let frames = (lo..hi)
        .map(|i| SensorFrame {
            t_ms: i as u64 * SAMPLE_MS,
            eog: eog[i],
            ppg: ppg[i],
            ax: encode(accel[0][i]),
            ay: encode(accel[1][i]),
            az: encode(accel[2][i]),
            gx: encode(gyro[0][i]),
            gy: encode(gyro[1][i]),
            gz: encode(gyro[2][i]),
        })
        .collect();
    let labels = hypnogram
        .stages
        .iter()
        .enumerate()
        .map(|(e, &s)| LabelRecord::new(start_utc + Duration::seconds(30 * e as i64), s))
        .collect();
    Ok(SyntheticNight {
        meta: NightMeta::new(night_id, start_utc),
        recording: NightRecording {
            night_id: night_id.to_string(),
            start_utc,
            frames,
        },
        labels,
        hypnogram,
        truth,
    })
}
