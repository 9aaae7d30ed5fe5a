//! Pulse (PPG) features: spectral heart rate, peak-based inter-beat
//! intervals and waveform shape.

use crate::dsp::stats::{iqr, mean, quantile};
use crate::dsp::{design_butterworth_lowpass, filter_padded, periodogram, Psd, WindowKind};

pub const LOWPASS_HZ: f64 = 10.0;
pub const LOWPASS_ORDER: usize = 4;
pub const HR_BAND_HZ: (f64, f64) = (0.66, 3.0);
/// Shortest beat spacing accepted by the peak picker, in seconds.
pub const MIN_PEAK_DISTANCE_S: f64 = 0.3;
/// Once the spectral rate is known, peaks closer than this fraction of its
/// period are one beat. This keeps the diastolic wave from counting.
pub const BEAT_REFRACTORY_FRACTION: f64 = 0.6;
/// Plausible inter-beat interval range in ms.
pub const IBI_RANGE_MS: (f64, f64) = (300.0, 1600.0);
/// Peaks must rise above `p10 + PEAK_LEVEL · (p90 - p10)`.
const PEAK_LEVEL: f64 = 0.6;
/// Below this heart-rate band power the pulse is treated as absent.
const MIN_HR_BAND_POWER: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PulseFeatures {
    pub hr_bpm_spectral: f64,
    pub hr_harmonic_score: f64,
    pub hr_bpm_peaks: f64,
    pub ibi_sdnn_ms: f64,
    pub ibi_rmssd_ms: f64,
    pub hr_halves_delta_bpm: f64,
    pub ppg_amplitude_iqr: f64,
    pub ppg_spectral_entropy: f64,
}

impl PulseFeatures {
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.hr_bpm_spectral,
            self.hr_harmonic_score,
            self.hr_bpm_peaks,
            self.ibi_sdnn_ms,
            self.ibi_rmssd_ms,
            self.hr_halves_delta_bpm,
            self.ppg_amplitude_iqr,
            self.ppg_spectral_entropy,
        ]
    }
}

/// Low-passed, mean-removed pulse waveform.
pub fn preprocess(ppg: &[f64], fs_hz: f64) -> Vec<f64> {
    let m = mean(ppg);
    let centered: Vec<f64> = ppg.iter().map(|v| v - m).collect();
    match design_butterworth_lowpass(LOWPASS_ORDER, LOWPASS_HZ, fs_hz) {
        Ok(lp) => filter_padded(|x| lp.apply(x), &centered, fs_hz as usize),
        Err(_) => centered,
    }
}

/// Local maxima above the adaptive level, at least `min_distance_s` apart
/// (the higher one wins). Positions are refined to sub-sample precision.
pub fn detect_peaks(x: &[f64], fs_hz: f64, min_distance_s: f64) -> Vec<f64> {
    if x.len() < 3 {
        return Vec::new();
    }
    let p10 = quantile(x, 0.10);
    let p90 = quantile(x, 0.90);
    if p90 - p10 <= 0.0 {
        return Vec::new();
    }
    let level = p10 + PEAK_LEVEL * (p90 - p10);
    let min_dist = min_distance_s * fs_hz;
    let mut peaks: Vec<usize> = Vec::new();
    for i in 1..x.len() - 1 {
        if !(x[i] > level && x[i] > x[i - 1] && x[i] >= x[i + 1]) {
            continue;
        }
        match peaks.last_mut() {
            Some(last) if ((i - *last) as f64) < min_dist => {
                if x[i] > x[*last] {
                    *last = i;
                }
            }
            _ => peaks.push(i),
        }
    }
    peaks
        .into_iter()
        .map(|i| {
            let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
            let denom = a - 2.0 * b + c;
            let offset = if denom < 0.0 {
                (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            i as f64 + offset
        })
        .collect()
}

/// Inter-beat intervals (ms) paired with the time (s) of the closing beat.
pub fn inter_beat_intervals(peaks: &[f64], fs_hz: f64) -> Vec<(f64, f64)> {
    peaks
        .windows(2)
        .map(|w| ((w[1] - w[0]) * 1000.0 / fs_hz, w[1] / fs_hz))
        .filter(|&(ibi, _)| ibi >= IBI_RANGE_MS.0 && ibi <= IBI_RANGE_MS.1)
        .collect()
}

fn bpm(ibis: &[f64]) -> f64 {
    let m = mean(ibis);
    if m > 0.0 {
        60_000.0 / m
    } else {
        0.0
    }
}

fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

fn normalized_entropy(p: &[f64]) -> f64 {
    let total: f64 = p.iter().sum();
    if total <= 0.0 || p.len() < 2 {
        return 0.0;
    }
    let h: f64 = p
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let q = v / total;
            -q * q.ln()
        })
        .sum();
    h / (p.len() as f64).ln()
}

/// Fundamental of the pulse: the bin in `[lo, hi]` maximising its own power
/// plus the power near its second harmonic, then moved to the nearest local
/// maximum. A sharp pulse can put more power at 2f₀ than at f₀; the sum
/// still favours f₀.
fn harmonic_peak_bin(psd: &Psd, lo_hz: f64, hi_hz: f64) -> Option<usize> {
    let p = &psd.power;
    let near = |i: usize| {
        let a = i.saturating_sub(1);
        let b = (i + 1).min(p.len() - 1);
        if a >= p.len() {
            0.0
        } else {
            p[a..=b].iter().copied().fold(0.0, f64::max)
        }
    };
    let mut best: Option<(usize, f64)> = None;
    for (i, &f) in psd.freqs_hz.iter().enumerate() {
        if f < lo_hz || f > hi_hz {
            continue;
        }
        let score = p[i] + near(2 * i);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    let (mut bin, _) = best?;
    while bin + 1 < p.len() && p[bin + 1] > p[bin] && psd.freqs_hz[bin + 1] <= hi_hz {
        bin += 1;
    }
    while bin > 0 && p[bin - 1] > p[bin] && psd.freqs_hz[bin - 1] >= lo_hz {
        bin -= 1;
    }
    Some(bin)
}

/// All pulse features for one epoch of raw PPG counts. Quantities that
/// cannot be estimated (no pulse, too few beats) are 0.
pub fn pulse_features(ppg: &[f64], fs_hz: f64) -> PulseFeatures {
    let mut out = PulseFeatures::default();
    let filtered = preprocess(ppg, fs_hz);
    out.ppg_amplitude_iqr = iqr(&filtered);

    if let Ok(psd) = periodogram(&filtered, fs_hz, WindowKind::Hamming) {
        let band: Vec<f64> = psd
            .bins_in(f64::MIN_POSITIVE, LOWPASS_HZ + psd.df_hz / 2.0)
            .map(|i| psd.power[i])
            .collect();
        out.ppg_spectral_entropy = normalized_entropy(&band);

        let hr_power = psd.band_power(HR_BAND_HZ.0, HR_BAND_HZ.1);
        if hr_power > MIN_HR_BAND_POWER {
            if let Some(bin) = harmonic_peak_bin(&psd, HR_BAND_HZ.0, HR_BAND_HZ.1) {
                let f0 = psd.interpolated_peak_hz(bin);
                out.hr_bpm_spectral = 60.0 * f0;
                let fundamental = psd.power_at(f0);
                if fundamental > 0.0 {
                    out.hr_harmonic_score = psd.power_at(2.0 * f0) / fundamental;
                }
            }
        }
    }

    let min_distance_s = if out.hr_bpm_spectral > 0.0 {
        (BEAT_REFRACTORY_FRACTION * 60.0 / out.hr_bpm_spectral).max(MIN_PEAK_DISTANCE_S)
    } else {
        MIN_PEAK_DISTANCE_S
    };
    let peaks = detect_peaks(&filtered, fs_hz, min_distance_s);
    let ibis = inter_beat_intervals(&peaks, fs_hz);
    if ibis.len() >= 2 {
        let values: Vec<f64> = ibis.iter().map(|p| p.0).collect();
        out.hr_bpm_peaks = bpm(&values);
        out.ibi_sdnn_ms = sample_std(&values);
        let succ: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).powi(2)).collect();
        out.ibi_rmssd_ms = mean(&succ).sqrt();

        let half_s = ppg.len() as f64 / fs_hz / 2.0;
        let (first, second): (Vec<&(f64, f64)>, Vec<_>) = ibis.iter().partition(|p| p.1 < half_s);
        if !first.is_empty() && !second.is_empty() {
            let f: Vec<f64> = first.iter().map(|p| p.0).collect();
            let s: Vec<f64> = second.iter().map(|p| p.0).collect();
            out.hr_halves_delta_bpm = bpm(&s) - bpm(&f);
        }
    }
    out
}
