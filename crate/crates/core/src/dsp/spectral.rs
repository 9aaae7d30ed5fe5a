//! Windows, one-sided periodogram PSD, EEG band powers and spectrograms.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::stats::detrend_mean;
use super::DspError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WindowKind {
    Rectangular,
    Hamming,
    Hann,
    /// Cosine-tapered window; the parameter is the total tapered fraction.
    Tukey(f64),
}

/// Taper used for every EOG/EEG spectrum: 10% cosine.
pub const EOG_WINDOW: WindowKind = WindowKind::Tukey(0.10);

/// Symmetric window weights of length `n`.
pub fn window(kind: WindowKind, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let m = (n - 1) as f64;
    match kind {
        WindowKind::Rectangular => vec![1.0; n],
        WindowKind::Hamming => (0..n)
            .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / m).cos())
            .collect(),
        WindowKind::Hann => (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / m).cos())
            .collect(),
        WindowKind::Tukey(r) if r <= 0.0 => vec![1.0; n],
        WindowKind::Tukey(r) if r >= 1.0 => window(WindowKind::Hann, n),
        WindowKind::Tukey(r) => {
            let width = (r * m / 2.0).floor() as usize;
            (0..n)
                .map(|i| {
                    let x = i as f64;
                    if i <= width {
                        0.5 * (1.0 + (PI * (-1.0 + 2.0 * x / (r * m))).cos())
                    } else if i < n - width - 1 {
                        1.0
                    } else {
                        0.5 * (1.0 + (PI * (-2.0 / r + 1.0 + 2.0 * x / (r * m))).cos())
                    }
                })
                .collect()
        }
    }
}

/// One-sided power spectral density in counts²/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub freqs_hz: Vec<f64>,
    pub power: Vec<f64>,
    pub df_hz: f64,
}

impl Psd {
    pub fn nyquist_hz(&self) -> f64 {
        self.freqs_hz.last().copied().unwrap_or(0.0)
    }

    /// Rectangle-rule integral over all bins.
    pub fn total_power(&self) -> f64 {
        self.power.iter().sum::<f64>() * self.df_hz
    }

    /// Rectangle-rule integral over bins with `lo <= f < hi`.
    pub fn band_power(&self, lo_hz: f64, hi_hz: f64) -> f64 {
        self.bins_in(lo_hz, hi_hz)
            .map(|i| self.power[i])
            .sum::<f64>()
            * self.df_hz
    }

    pub fn bins_in(&self, lo_hz: f64, hi_hz: f64) -> impl Iterator<Item = usize> + '_ {
        self.freqs_hz
            .iter()
            .enumerate()
            .filter(move |(_, &f)| f >= lo_hz && f < hi_hz)
            .map(|(i, _)| i)
    }

    /// Index of the largest bin with `lo <= f <= hi`, lowest index on ties.
    pub fn peak_bin(&self, lo_hz: f64, hi_hz: f64) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &f) in self.freqs_hz.iter().enumerate() {
            if f < lo_hz || f > hi_hz {
                continue;
            }
            if best.is_none_or(|b| self.power[i] > self.power[b]) {
                best = Some(i);
            }
        }
        best
    }

    /// Peak frequency refined by a parabola through the peak bin and its
    /// neighbours.
    pub fn interpolated_peak_hz(&self, bin: usize) -> f64 {
        let f = self.freqs_hz[bin];
        if bin == 0 || bin + 1 >= self.power.len() {
            return f;
        }
        let (a, b, c) = (self.power[bin - 1], self.power[bin], self.power[bin + 1]);
        let denom = a - 2.0 * b + c;
        if denom >= 0.0 {
            return f;
        }
        let offset = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
        f + offset * self.df_hz
    }

    /// Linear-interpolated power at an arbitrary frequency.
    pub fn power_at(&self, f_hz: f64) -> f64 {
        if self.power.is_empty() || f_hz < 0.0 {
            return 0.0;
        }
        let pos = f_hz / self.df_hz;
        let lo = pos.floor() as usize;
        if lo + 1 >= self.power.len() {
            return self.power.last().copied().unwrap_or(0.0);
        }
        let t = pos - lo as f64;
        self.power[lo] * (1.0 - t) + self.power[lo + 1] * t
    }

    /// Smallest bin frequency at which the cumulative power over
    /// `[lo, hi)` reaches `fraction` of that band's total; 0 if empty.
    pub fn spectral_edge(&self, fraction: f64, lo_hz: f64, hi_hz: f64) -> f64 {
        let total: f64 = self.bins_in(lo_hz, hi_hz).map(|i| self.power[i]).sum();
        if total <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in self.bins_in(lo_hz, hi_hz) {
            acc += self.power[i];
            if acc >= fraction * total {
                return self.freqs_hz[i];
            }
        }
        self.freqs_hz[self.bins_in(lo_hz, hi_hz).last().unwrap_or(0)]
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn power_spectrum(x: &[f64]) -> Vec<f64> {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(x.len()));
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut buf);
    buf.iter().map(|c| c.norm_sqr()).collect()
}

pub const MIN_PERIODOGRAM_LEN: usize = 16;

/// One-sided PSD of the mean-detrended, windowed input, scaled by
/// `fs · Σw²` so that `Σ power · df` equals `Σ (w·x)² / Σ w²`.
pub fn periodogram(x: &[f64], fs_hz: f64, kind: WindowKind) -> Result<Psd, DspError> {
    if x.len() < MIN_PERIODOGRAM_LEN {
        return Err(DspError::TooShort {
            needed: MIN_PERIODOGRAM_LEN,
            got: x.len(),
        });
    }
    let n = x.len();
    let w = window(kind, n);
    let detrended = detrend_mean(x);
    let windowed: Vec<f64> = detrended.iter().zip(&w).map(|(a, b)| a * b).collect();
    let scale = fs_hz * w.iter().map(|v| v * v).sum::<f64>();
    let spec = power_spectrum(&windowed);
    let n_bins = n / 2 + 1;
    let df = fs_hz / n as f64;
    let power = (0..n_bins)
        .map(|k| {
            let doubled = k != 0 && !(n.is_multiple_of(2) && k == n / 2);
            spec[k] / scale * if doubled { 2.0 } else { 1.0 }
        })
        .collect();
    Ok(Psd {
        freqs_hz: (0..n_bins).map(|k| k as f64 * df).collect(),
        power,
        df_hz: df,
    })
}

/// Canonical EEG band edges, lower-inclusive and upper-exclusive.
pub const BAND_EDGES_HZ: [(f64, f64); 5] = [
    (0.0, 4.0),
    (4.0, 8.0),
    (8.0, 13.0),
    (13.0, 30.0),
    (30.0, 100.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPowers {
    pub delta: f64,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl BandPowers {
    pub fn as_array(&self) -> [f64; 5] {
        [self.delta, self.theta, self.alpha, self.beta, self.gamma]
    }

    pub fn total(&self) -> f64 {
        self.as_array().iter().sum()
    }

    /// Band share of the five-band total; all zero when the total is zero.
    pub fn relative(&self) -> [f64; 5] {
        let total = self.total();
        if total <= 0.0 {
            return [0.0; 5];
        }
        self.as_array().map(|v| v / total)
    }
}

pub fn band_powers(psd: &Psd) -> Result<BandPowers, DspError> {
    let top = BAND_EDGES_HZ[4].1;
    if psd.nyquist_hz() < top {
        return Err(DspError::BandOutOfRange {
            nyquist_hz: psd.nyquist_hz(),
        });
    }
    let p = BAND_EDGES_HZ.map(|(lo, hi)| psd.band_power(lo, hi));
    Ok(BandPowers {
        delta: p[0],
        theta: p[1],
        alpha: p[2],
        beta: p[3],
        gamma: p[4],
    })
}

pub const DEFAULT_SPECTROGRAM_WIN_S: f64 = 1.0;
pub const DEFAULT_SPECTROGRAM_HOP_S: f64 = 0.25;

/// Sequence of Tukey-windowed periodograms. `power[c][k]` is column `c`
/// (starting at `starts_s[c]`) and frequency bin `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    pub starts_s: Vec<f64>,
    pub win_s: f64,
    pub hop_s: f64,
    pub freqs_hz: Vec<f64>,
    pub power: Vec<Vec<f64>>,
}

impl Spectrogram {
    /// Integrated power of each column over `[lo, hi)`.
    pub fn band_series(&self, lo_hz: f64, hi_hz: f64) -> Vec<f64> {
        let df = self.freqs_hz.get(1).copied().unwrap_or(0.0);
        let bins: Vec<usize> = self
            .freqs_hz
            .iter()
            .enumerate()
            .filter(|(_, &f)| f >= lo_hz && f < hi_hz)
            .map(|(i, _)| i)
            .collect();
        self.power
            .iter()
            .map(|col| bins.iter().map(|&i| col[i]).sum::<f64>() * df)
            .collect()
    }
}

pub fn spectrogram(x: &[f64], fs_hz: f64, win_s: f64, hop_s: f64) -> Result<Spectrogram, DspError> {
    let win = (win_s * fs_hz).round() as usize;
    if win_s * fs_hz > x.len() as f64 + 1e-9 || win > x.len() {
        return Err(DspError::WindowTooLong {
            win_s,
            signal_s: x.len() as f64 / fs_hz,
        });
    }
    if !(hop_s > 0.0) {
        return Err(DspError::BadHop(hop_s));
    }
    let hop = hop_s * fs_hz;
    let mut starts_s = Vec::new();
    let mut power = Vec::new();
    let mut freqs_hz = Vec::new();
    for c in 0.. {
        let start = (c as f64 * hop + 0.5).floor() as usize;
        if start + win > x.len() {
            break;
        }
        let psd = periodogram(&x[start..start + win], fs_hz, EOG_WINDOW)?;
        if freqs_hz.is_empty() {
            freqs_hz = psd.freqs_hz;
        }
        starts_s.push(start as f64 / fs_hz);
        power.push(psd.power);
    }
    Ok(Spectrogram {
        starts_s,
        win_s,
        hop_s,
        freqs_hz,
        power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    const FS: f64 = 250.0;

    fn tone(f: f64, amp: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * PI * f * i as f64 / FS).sin())
            .collect()
    }

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn hamming_endpoints() {
        let w = window(WindowKind::Hamming, 4001);
        assert!((w[0] - 0.08).abs() < 1e-6);
        assert!((w[4000] - 0.08).abs() < 1e-6);
        assert!((w[2000] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tukey_flat_region_matches_closed_form() {
        let n = 1000;
        let r = 0.10;
        let w = window(WindowKind::Tukey(r), n);
        // flat iff |i - (n-1)/2| <= (n-1)(1-r)/2
        let half = (n - 1) as f64 / 2.0;
        for (i, &v) in w.iter().enumerate() {
            let flat = (i as f64 - half).abs() <= half * (1.0 - r);
            assert_eq!(v == 1.0, flat, "bin {i}: {v}");
        }
        assert!(w[..50].iter().all(|&v| v < 1.0));
        assert!(w[50..950].iter().all(|&v| v == 1.0));
        assert_eq!(w[0], 0.0);
        assert!(w[999].abs() < 1e-15);
        for i in 0..n {
            assert!((w[i] - w[n - 1 - i]).abs() < 1e-12, "symmetry at {i}");
        }
    }

    #[test]
    fn tukey_limits() {
        assert_eq!(window(WindowKind::Tukey(0.0), 64), vec![1.0; 64]);
        assert_eq!(window(WindowKind::Tukey(1.0), 64), window(WindowKind::Hann, 64));
    }

    #[test]
    fn tone_peaks_at_its_frequency() {
        let psd = periodogram(&tone(10.0, 1.0, 7500), FS, EOG_WINDOW).unwrap();
        let peak = psd.peak_bin(0.0, 125.0).unwrap();
        assert!((psd.freqs_hz[peak] - 10.0).abs() <= psd.df_hz);
        assert!((psd.df_hz - 1.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn parseval_window_corrected_identity() {
        for kind in [
            WindowKind::Rectangular,
            WindowKind::Hamming,
            WindowKind::Hann,
            EOG_WINDOW,
        ] {
            for n in [16usize, 250, 999, 7500] {
                let x = noise(n as u64, n);
                let psd = periodogram(&x, FS, kind).unwrap();
                let w = window(kind, n);
                let d = detrend_mean(&x);
                let expected = d.iter().zip(&w).map(|(a, b)| (a * b).powi(2)).sum::<f64>()
                    / w.iter().map(|v| v * v).sum::<f64>();
                assert!((psd.total_power() / expected - 1.0).abs() < 1e-9, "{kind:?} {n}");
            }
        }
    }

    #[test]
    fn parseval_white_noise_matches_variance() {
        for kind in [WindowKind::Hamming, EOG_WINDOW] {
            let mut ratio_sum = 0.0;
            for seed in 0..100 {
                let x = noise(1000 + seed, 7500);
                let var = super::super::stats::variance(&x);
                ratio_sum += periodogram(&x, FS, kind).unwrap().total_power() / var;
            }
            let mean_ratio = ratio_sum / 100.0;
            assert!((mean_ratio - 1.0).abs() < 0.01, "{kind:?}: {mean_ratio}");
        }
    }

    #[test]
    fn dc_removed() {
        let psd = periodogram(&vec![700.0; 7500], FS, EOG_WINDOW).unwrap();
        assert!(psd.total_power() <= 1e-12);
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            periodogram(&[1.0; 15], FS, EOG_WINDOW),
            Err(DspError::TooShort { .. })
        ));
    }

    #[test]
    fn alpha_tone_dominates_alpha_band() {
        let bp = band_powers(&periodogram(&tone(10.0, 1.0, 7500), FS, EOG_WINDOW).unwrap()).unwrap();
        assert!(bp.alpha >= 0.95 * bp.total());
        assert!(bp.relative()[2] >= 0.95);
    }

    #[test]
    fn equal_tones_equal_band_power() {
        let x: Vec<f64> = tone(2.0, 1.0, 7500)
            .iter()
            .zip(tone(20.0, 1.0, 7500))
            .map(|(a, b)| a + b)
            .collect();
        let bp = band_powers(&periodogram(&x, FS, EOG_WINDOW).unwrap()).unwrap();
        // Parseval: each unit sinusoid carries 0.5 power
        assert!((bp.delta / bp.beta - 1.0).abs() < 0.05);
        assert!((bp.delta - 0.5).abs() < 0.025);
    }

    #[test]
    fn white_noise_power_tracks_bandwidth() {
        let mut acc = [0.0; 5];
        for seed in 0..40 {
            let bp = band_powers(&periodogram(&noise(seed, 7500), FS, EOG_WINDOW).unwrap()).unwrap();
            for (a, v) in acc.iter_mut().zip(bp.as_array()) {
                *a += v / 40.0;
            }
        }
        // flat one-sided density of a unit-variance process is 1 / (fs/2)
        let density = 1.0 / (FS / 2.0);
        for (i, (lo, hi)) in BAND_EDGES_HZ.iter().enumerate() {
            let expected = density * (hi - lo);
            assert!((acc[i] / expected - 1.0).abs() < 0.10, "band {i}: {} vs {expected}", acc[i]);
        }
    }

    #[test]
    fn band_additivity() {
        let a = tone(2.0, 3.0, 7500);
        let b = tone(10.0, 1.5, 7500);
        let c = tone(50.0, 0.7, 7500);
        let sum: Vec<f64> = (0..7500).map(|i| a[i] + b[i] + c[i]).collect();
        let bp = |x: &[f64]| band_powers(&periodogram(x, FS, EOG_WINDOW).unwrap()).unwrap();
        let total = bp(&sum);
        let parts = [bp(&a), bp(&b), bp(&c)];
        for k in 0..5 {
            let s: f64 = parts.iter().map(|p| p.as_array()[k]).sum();
            let t = total.as_array()[k];
            assert!((t - s).abs() <= 0.05 * t.max(s).max(1e-6), "band {k}");
        }
    }

    #[test]
    fn band_out_of_range() {
        let psd = periodogram(&noise(1, 1000), 150.0, EOG_WINDOW).unwrap();
        assert!(matches!(band_powers(&psd), Err(DspError::BandOutOfRange { .. })));
    }

    #[test]
    fn spectrogram_stationary_tone() {
        let s = spectrogram(&tone(12.0, 1.0, 7500), FS, 1.0, 0.25).unwrap();
        assert_eq!(s.starts_s.len(), 117);
        for col in &s.power {
            let k = (0..col.len()).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
            assert!((11.0..=13.0).contains(&s.freqs_hz[k]));
        }
    }

    #[test]
    fn spectrogram_localizes_burst() {
        let mut x = vec![0.0; 7500];
        for i in 1500..1750 {
            x[i] = (2.0 * PI * 12.0 * i as f64 / FS).sin();
        }
        let s = spectrogram(&x, FS, 1.0, 0.25).unwrap();
        let band = s.band_series(8.0, 16.0);
        for (c, &start) in s.starts_s.iter().enumerate() {
            let overlap = (start + 1.0).min(7.0) - start.max(6.0);
            if overlap <= 0.0 {
                assert!(band[c] <= 1e-12, "column at {start}: {}", band[c]);
            } else if overlap >= 0.25 {
                assert!(band[c] > 1e-3, "column at {start}: {}", band[c]);
            }
        }
    }

    #[test]
    fn spectrogram_silence_and_errors() {
        let s = spectrogram(&vec![0.0; 2500], FS, 1.0, 0.25).unwrap();
        assert!(s.power.iter().flatten().all(|&p| p <= 1e-12));
        assert!(matches!(
            spectrogram(&vec![0.0; 100], FS, 1.0, 0.25),
            Err(DspError::WindowTooLong { .. })
        ));
    }
}
