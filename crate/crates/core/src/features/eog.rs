//! EOG features: band powers, amplitude statistics, saccades and spindles.

use crate::dsp::stats::{detrend_mean, diff, iqr, kurtosis, median, skewness, std_dev};
use crate::dsp::{
    band_powers, design_butterworth_bandpass, filter_padded, periodogram, Psd, ThresholdDetector,
    EOG_WINDOW,
};
use crate::model::ADC_MAX;

pub const SACCADE_K_SIGMA: f64 = 5.0;
pub const SACCADE_MIN_GAP_S: f64 = 0.3;
/// Floor on the robust sigma of the first difference, in counts. One ADC
/// step is the smallest resolvable change.
pub const SACCADE_SIGMA_FLOOR: f64 = 1.0;

pub const SPINDLE_BAND_HZ: (f64, f64) = (11.0, 16.0);
pub const SPINDLE_FILTER_ORDER: usize = 4;
pub const SPINDLE_ENVELOPE_S: f64 = 0.2;
pub const SPINDLE_MEDIAN_FACTOR: f64 = 3.0;
/// Envelope threshold floor in counts, so a silent channel has no spindles.
pub const SPINDLE_ENVELOPE_FLOOR: f64 = 1.0;
pub const SPINDLE_DURATION_S: (f64, f64) = (0.4, 2.5);
/// Supra-threshold runs closer than this are one spindle.
pub const SPINDLE_MERGE_GAP_S: f64 = 0.1;

/// Spectral edge is computed over `[0, SEF_MAX_HZ)`.
pub const SEF_MAX_HZ: f64 = 100.0;

pub fn saturation_fraction(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let rail = ADC_MAX as f64;
    x.iter().filter(|&&v| v <= 0.0 || v >= rail).count() as f64 / x.len() as f64
}

/// Sign changes of the mean-removed signal per second.
pub fn zero_crossing_rate(x: &[f64], fs_hz: f64) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let d = detrend_mean(x);
    let mut last: Option<bool> = None;
    let mut count = 0usize;
    for v in d {
        if v == 0.0 {
            continue;
        }
        let pos = v > 0.0;
        if last.is_some_and(|l| l != pos) {
            count += 1;
        }
        last = Some(pos);
    }
    count as f64 / (x.len() as f64 / fs_hz)
}

/// Centered moving average of `|x|` over `win` samples.
pub fn rectified_envelope(x: &[f64], win: usize) -> Vec<f64> {
    let n = x.len();
    let win = win.max(1);
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v.abs();
    }
    let half = win / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + win - half).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// A detected spindle, `[start, end)` in samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spindle {
    pub start: usize,
    pub end: usize,
}

impl Spindle {
    pub fn duration_s(&self, fs_hz: f64) -> f64 {
        (self.end - self.start) as f64 / fs_hz
    }
}

/// Band-pass 11-16 Hz, rectify and smooth, then keep runs above
/// `max(3 · median envelope, floor)` that last 0.4-2.5 s.
pub fn detect_spindles(x: &[f64], fs_hz: f64) -> Vec<Spindle> {
    if x.len() < 2 {
        return Vec::new();
    }
    let Ok(bp) = design_butterworth_bandpass(
        SPINDLE_FILTER_ORDER,
        SPINDLE_BAND_HZ.0,
        SPINDLE_BAND_HZ.1,
        fs_hz,
    ) else {
        return Vec::new();
    };
    let centered = detrend_mean(x);
    let filtered = filter_padded(|s| bp.apply(s), &centered, fs_hz as usize);
    let env = rectified_envelope(&filtered, (SPINDLE_ENVELOPE_S * fs_hz).round() as usize);
    let threshold = (SPINDLE_MEDIAN_FACTOR * median(&env)).max(SPINDLE_ENVELOPE_FLOOR);

    let merge_gap = (SPINDLE_MERGE_GAP_S * fs_hz).round() as usize;
    let mut runs: Vec<Spindle> = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &e) in env.iter().chain(std::iter::once(&f64::NEG_INFINITY)).enumerate() {
        match (e > threshold, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                start = None;
                match runs.last_mut() {
                    Some(prev) if s - prev.end < merge_gap => prev.end = i,
                    _ => runs.push(Spindle { start: s, end: i }),
                }
            }
            _ => {}
        }
    }
    runs.retain(|r| {
        let d = r.duration_s(fs_hz);
        d >= SPINDLE_DURATION_S.0 && d <= SPINDLE_DURATION_S.1
    });
    runs
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EogFeatures {
    pub band_power: [f64; 5],
    pub band_rel: [f64; 5],
    pub total_power: f64,
    pub std: f64,
    pub iqr: f64,
    pub range: f64,
    pub zero_crossing_rate: f64,
    pub kurtosis: f64,
    pub skewness: f64,
    pub sef95_hz: f64,
    pub saccade_event_count: f64,
    pub saturation_fraction: f64,
    pub spindle_band_power: f64,
    pub spindle_event_count: f64,
}

impl EogFeatures {
    pub fn to_array(&self) -> [f64; 22] {
        let mut out = [0.0; 22];
        out[..5].copy_from_slice(&self.band_power);
        out[5..10].copy_from_slice(&self.band_rel);
        out[10..].copy_from_slice(&[
            self.total_power,
            self.std,
            self.iqr,
            self.range,
            self.zero_crossing_rate,
            self.kurtosis,
            self.skewness,
            self.sef95_hz,
            self.saccade_event_count,
            self.saturation_fraction,
            self.spindle_band_power,
            self.spindle_event_count,
        ]);
        out
    }
}

/// All EOG features for one epoch of raw counts.
pub fn eog_features(x: &[f64], fs_hz: f64) -> EogFeatures {
    let mut out = EogFeatures {
        std: std_dev(x),
        iqr: iqr(x),
        range: range(x),
        zero_crossing_rate: zero_crossing_rate(x, fs_hz),
        kurtosis: kurtosis(x),
        skewness: skewness(x),
        saturation_fraction: saturation_fraction(x),
        ..Default::default()
    };
    if let Ok(psd) = periodogram(x, fs_hz, EOG_WINDOW) {
        spectral_part(&psd, &mut out);
    }
    let d = diff(x);
    out.saccade_event_count = ThresholdDetector::new(SACCADE_K_SIGMA, SACCADE_MIN_GAP_S)
        .with_floor(SACCADE_SIGMA_FLOOR)
        .scan(&d, fs_hz)
        .events
        .len() as f64;
    out.spindle_event_count = detect_spindles(x, fs_hz).len() as f64;
    out
}

fn spectral_part(psd: &Psd, out: &mut EogFeatures) {
    if let Ok(bands) = band_powers(psd) {
        out.band_power = bands.as_array();
        out.band_rel = bands.relative();
        out.total_power = bands.total();
    }
    out.sef95_hz = psd.spectral_edge(0.95, 0.0, SEF_MAX_HZ);
    out.spindle_band_power = psd.band_power(SPINDLE_BAND_HZ.0, SPINDLE_BAND_HZ.1);
}

fn range(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    const FS: f64 = 250.0;

    #[test]
    fn pure_alpha_is_alpha() {
        let x: Vec<f64> = (0..7500)
            .map(|i| 512.0 + 50.0 * (2.0 * PI * 10.0 * i as f64 / FS).sin())
            .collect();
        let f = eog_features(&x, FS);
        assert!(f.band_rel[2] >= 0.95, "{:?}", f.band_rel);
        assert!((f.band_rel.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((f.zero_crossing_rate - 20.0).abs() < 0.1);
    }

    #[test]
    fn rails() {
        let mut x = vec![500.0; 7500];
        for v in x.iter_mut().take(100) {
            *v = 0.0;
        }
        for v in x.iter_mut().skip(7350) {
            *v = 1023.0;
        }
        assert_eq!(saturation_fraction(&x), 250.0 / 7500.0);
    }

    fn with_bursts(bursts: &[(f64, f64)], noise_sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, noise_sd.max(1e-300)).unwrap();
        (0..7500)
            .map(|i| {
                let t = i as f64 / FS;
                let mut v = 512.0;
                if noise_sd > 0.0 {
                    v += noise.sample(&mut rng);
                }
                for &(start, dur) in bursts {
                    if t >= start && t < start + dur {
                        let taper = (PI * (t - start) / dur).sin();
                        v += 20.0 * taper * (2.0 * PI * 12.0 * t).sin();
                    }
                }
                v
            })
            .collect()
    }

    fn overlaps(s: &Spindle, start: f64, dur: f64) -> bool {
        let (a, b) = ((start * FS) as usize, ((start + dur) * FS) as usize);
        s.start < b && a < s.end
    }

    #[test]
    fn noise_free_bursts_found_exactly() {
        let bursts = [(3.0, 0.5), (12.0, 1.0), (22.0, 2.0)];
        let x = with_bursts(&bursts, 0.0, 0);
        let found = detect_spindles(&x, FS);
        assert_eq!(found.len(), 3, "{found:?}");
        for (s, &(start, dur)) in found.iter().zip(&bursts) {
            assert!(overlaps(s, start, dur), "{s:?} vs {start}");
        }
        assert_eq!(eog_features(&x, FS).spindle_event_count, 3.0);
    }

    #[test]
    fn silent_channel_has_no_events() {
        let f = eog_features(&vec![512.0; 7500], FS);
        assert_eq!(f.spindle_event_count, 0.0);
        assert_eq!(f.saccade_event_count, 0.0);
        assert_eq!(f.total_power, 0.0);
    }

    #[test]
    fn envelope_of_constant() {
        let e = rectified_envelope(&[-2.0; 30], 5);
        assert!(e.iter().all(|&v| (v - 2.0).abs() < 1e-12));
    }
}
