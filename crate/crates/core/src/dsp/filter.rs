//! Butterworth IIR design via the bilinear transform, and causal
//! direct-form II transposed filtering.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DspError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    Lowpass,
    Highpass,
}

/// A single direct-form section with `a[0] == 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IirFilter {
    b: Vec<f64>,
    a: Vec<f64>,
}

impl IirFilter {
    /// Builds a filter from raw coefficients, normalizing so `a[0] == 1`.
    pub fn from_coefficients(mut b: Vec<f64>, mut a: Vec<f64>) -> Result<Self, DspError> {
        if a.is_empty() || b.is_empty() || a.len() != b.len() || a[0] == 0.0 {
            return Err(DspError::BadCoefficients);
        }
        let a0 = a[0];
        b.iter_mut().for_each(|v| *v /= a0);
        a.iter_mut().for_each(|v| *v /= a0);
        Ok(Self { b, a })
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn order(&self) -> usize {
        self.a.len() - 1
    }

    /// Complex frequency response at `f_hz`.
    pub fn response(&self, f_hz: f64, fs_hz: f64) -> Complex64 {
        let w = 2.0 * PI * f_hz / fs_hz;
        let eval = |c: &[f64]| -> Complex64 {
            c.iter()
                .enumerate()
                .map(|(i, &v)| v * Complex64::from_polar(1.0, -w * i as f64))
                .sum()
        };
        eval(&self.b) / eval(&self.a)
    }

    pub fn gain(&self, f_hz: f64, fs_hz: f64) -> f64 {
        self.response(f_hz, fs_hz).norm()
    }

    /// Roots of the feedback polynomial.
    pub fn poles(&self) -> Vec<Complex64> {
        polynomial_roots(&self.a)
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0 - 1e-6)
    }

    /// Causal single pass, zero initial state.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.order();
        let mut state = vec![0.0; n];
        x.iter()
            .map(|&xn| {
                let yn = self.b[0] * xn + state.first().copied().unwrap_or(0.0);
                for i in 0..n {
                    let next = if i + 1 < n { state[i + 1] } else { 0.0 };
                    state[i] = self.b[i + 1] * xn - self.a[i + 1] * yn + next;
                }
                yn
            })
            .collect()
    }
}

/// Free-function form of [`IirFilter::apply`].
pub fn filter_forward(filter: &IirFilter, x: &[f64]) -> Vec<f64> {
    filter.apply(x)
}

/// Series connection of sections, applied in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCascade {
    pub sections: Vec<IirFilter>,
}

impl FilterCascade {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            y = s.apply(&y);
        }
        y
    }

    pub fn gain(&self, f_hz: f64, fs_hz: f64) -> f64 {
        self.sections.iter().map(|s| s.gain(f_hz, fs_hz)).product()
    }
}

/// Expands `Π (z - r)` into real coefficients `[1, c1, ..., cN]`, which is
/// also the coefficient list in powers of `z^-1`.
fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    c.into_iter().map(|v| v.re).collect()
}

/// Durand-Kerner iteration on a monic-normalized polynomial given in
/// descending powers.
fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    let lead = coeffs[0];
    let c: Vec<Complex64> = coeffs.iter().map(|&v| Complex64::new(v / lead, 0.0)).collect();
    let eval = |z: Complex64| c.iter().fold(Complex64::new(0.0, 0.0), |acc, &ci| acc * z + ci);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n).map(|i| seed.powu(i as u32)).collect();
    for _ in 0..500 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    roots
}

/// Digital Butterworth filter of the given order via the bilinear transform
/// with frequency prewarping. Low-pass designs have unity gain at DC,
/// high-pass designs at Nyquist.
pub fn design_butterworth(
    kind: FilterKind,
    order: usize,
    cutoff_hz: f64,
    fs_hz: f64,
) -> Result<IirFilter, DspError> {
    if !(cutoff_hz > 0.0 && cutoff_hz < fs_hz / 2.0) {
        return Err(DspError::InvalidCutoff { cutoff_hz, fs_hz });
    }
    if order == 0 {
        return Err(DspError::BadCoefficients);
    }
    let n = order as f64;
    let two_fs = 2.0 * fs_hz;
    let warped = two_fs * (PI * cutoff_hz / fs_hz).tan();
    let prototype = (0..order).map(|k| {
        Complex64::from_polar(1.0, PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n))
    });
    let analog: Vec<Complex64> = match kind {
        FilterKind::Lowpass => prototype.map(|p| p * warped).collect(),
        FilterKind::Highpass => prototype.map(|p| warped / p).collect(),
    };
    let poles: Vec<Complex64> = analog
        .iter()
        .map(|&s| (two_fs + s) / (two_fs - s))
        .collect();
    let zero = match kind {
        FilterKind::Lowpass => Complex64::new(-1.0, 0.0),
        FilterKind::Highpass => Complex64::new(1.0, 0.0),
    };
    let a = poly_from_roots(&poles);
    let mut b = poly_from_roots(&vec![zero; order]);
    // Normalize the passband reference point (z = 1 or z = -1) to unit gain.
    let sign: f64 = match kind {
        FilterKind::Lowpass => 1.0,
        FilterKind::Highpass => -1.0,
    };
    let at_ref = |c: &[f64]| -> f64 {
        c.iter()
            .enumerate()
            .map(|(i, &v)| v * sign.powi(i as i32))
            .sum()
    };
    let scale = at_ref(&a) / at_ref(&b);
    b.iter_mut().for_each(|v| *v *= scale);
    IirFilter::from_coefficients(b, a)
}

pub fn design_butterworth_lowpass(
    order: usize,
    cutoff_hz: f64,
    fs_hz: f64,
) -> Result<IirFilter, DspError> {
    design_butterworth(FilterKind::Lowpass, order, cutoff_hz, fs_hz)
}

/// Runs `filter` over `x` preceded by an odd reflection of its first `pad`
/// samples, then drops the padding. The zero initial state then meets a
/// continuous signal instead of a step at the first sample.
pub fn filter_padded(filter: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], pad: usize) -> Vec<f64> {
    if x.len() < 2 {
        return filter(x);
    }
    let pad = pad.min(x.len() - 1);
    let x0 = x[0];
    let mut ext: Vec<f64> = (1..=pad).rev().map(|i| 2.0 * x0 - x[i]).collect();
    ext.extend_from_slice(x);
    filter(&ext).split_off(pad)
}

/// Band-pass built as a high-pass section followed by a low-pass section.
pub fn design_butterworth_bandpass(
    order: usize,
    low_hz: f64,
    high_hz: f64,
    fs_hz: f64,
) -> Result<FilterCascade, DspError> {
    if low_hz >= high_hz {
        return Err(DspError::InvalidCutoff {
            cutoff_hz: low_hz,
            fs_hz,
        });
    }
    Ok(FilterCascade {
        sections: vec![
            design_butterworth(FilterKind::Highpass, order, low_hz, fs_hz)?,
            design_butterworth(FilterKind::Lowpass, order, high_hz, fs_hz)?,
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Analog Butterworth magnitude at the prewarped frequency; exact for a
    /// bilinear-transformed design.
    fn prewarped_lowpass_gain(order: i32, f: f64, fc: f64, fs: f64) -> f64 {
        let ratio = (PI * f / fs).tan() / (PI * fc / fs).tan();
        1.0 / (1.0 + ratio.powi(2 * order)).sqrt()
    }

    fn prewarped_highpass_gain(order: i32, f: f64, fc: f64, fs: f64) -> f64 {
        let ratio = (PI * fc / fs).tan() / (PI * f / fs).tan();
        1.0 / (1.0 + ratio.powi(2 * order)).sqrt()
    }

    /// Schur-Cohn step-down: all reflection coefficients inside the unit
    /// disc iff all roots of `a` are.
    fn schur_cohn_stable(a: &[f64]) -> bool {
        let mut c = a.to_vec();
        while c.len() > 1 {
            let n = c.len() - 1;
            let k = c[n] / c[0];
            if k.abs() >= 1.0 {
                return false;
            }
            c = (0..n).map(|i| (c[i] - k * c[n - i]) / (1.0 - k * k)).collect();
        }
        true
    }

    #[test]
    fn lowpass_10hz_spot_values() {
        let f = design_butterworth_lowpass(4, 10.0, 250.0).unwrap();
        assert_eq!(f.order(), 4);
        assert_eq!(f.b().len(), 5);
        assert_eq!(f.a()[0], 1.0);
        assert!((f.gain(10.0, 250.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3);
        assert!((f.gain(0.0, 250.0) - 1.0).abs() < 1e-9);
        let g40 = f.gain(40.0, 250.0);
        assert!(g40 <= 0.07, "{g40}");
        assert!(g40 <= 1.0 / (1.0f64 + 4f64.powi(8)).sqrt());
    }

    #[test]
    fn lowpass_matches_prewarped_prototype() {
        for &(order, fc) in &[(2usize, 5.0), (4, 10.0), (4, 16.0), (6, 30.0)] {
            let f = design_butterworth_lowpass(order, fc, 250.0).unwrap();
            for i in 0..125 {
                let hz = i as f64;
                let expected = prewarped_lowpass_gain(order as i32, hz, fc, 250.0);
                assert!((f.gain(hz, 250.0) - expected).abs() < 1e-9, "order {order} f {hz}");
            }
        }
    }

    #[test]
    fn highpass_passes_nyquist_blocks_dc() {
        let f = design_butterworth(FilterKind::Highpass, 4, 11.0, 250.0).unwrap();
        assert!(f.gain(0.0, 250.0) < 1e-12);
        assert!((f.gain(125.0, 250.0) - 1.0).abs() < 1e-9);
        assert!((f.gain(11.0, 250.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3);
    }

    #[test]
    fn designs_are_stable() {
        // Direct-form coefficients of very high orders at tiny cutoffs are
        // ill-conditioned; the pipeline only needs order 4.
        for order in 1..=6 {
            for &fc in &[0.5, 2.0, 10.0, 40.0, 100.0] {
                for kind in [FilterKind::Lowpass, FilterKind::Highpass] {
                    let f = design_butterworth(kind, order, fc, 250.0).unwrap();
                    assert!(f.is_stable(), "{kind:?} {order} {fc}");
                    assert!(schur_cohn_stable(f.a()), "{kind:?} {order} {fc}");
                }
            }
        }
    }

    #[test]
    fn invalid_cutoff() {
        assert!(matches!(
            design_butterworth_lowpass(4, 130.0, 250.0),
            Err(DspError::InvalidCutoff { .. })
        ));
        assert!(design_butterworth_lowpass(4, 0.0, 250.0).is_err());
    }

    #[test]
    fn impulse_response_follows_recursion() {
        let f = design_butterworth_lowpass(4, 10.0, 250.0).unwrap();
        let mut x = vec![0.0; 64];
        x[0] = 1.0;
        let y = f.apply(&x);
        // direct difference equation
        let (b, a) = (f.b(), f.a());
        let mut h = vec![0.0; 64];
        for n in 0..64 {
            let mut acc = if n < b.len() { b[n] } else { 0.0 };
            for k in 1..a.len() {
                if n >= k {
                    acc -= a[k] * h[n - k];
                }
            }
            h[n] = acc;
        }
        for (u, v) in y.iter().zip(&h) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_input_settles_to_constant() {
        let f = design_butterworth_lowpass(4, 10.0, 250.0).unwrap();
        let y = f.apply(&vec![3.5; 2000]);
        assert_eq!(y.len(), 2000);
        assert!((y[1999] - 3.5).abs() < 1e-9);
    }

    #[test]
    fn slow_sinusoid_passes() {
        let f = design_butterworth_lowpass(4, 10.0, 250.0).unwrap();
        let x: Vec<f64> = (0..7500)
            .map(|i| (2.0 * PI * 1.2 * i as f64 / 250.0).sin())
            .collect();
        let y = f.apply(&x);
        let peak = y[2500..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((1.0 - peak).abs() < 0.01, "{peak}");
        // frequency-response oracle agrees
        assert!((1.0 - prewarped_lowpass_gain(4, 1.2, 10.0, 250.0)).abs() < 0.01);
    }

    #[test]
    fn bandpass_cascade_shape() {
        let bp = design_butterworth_bandpass(4, 11.0, 16.0, 250.0).unwrap();
        assert!(bp.gain(13.5, 250.0) > 0.8);
        for i in 1..125 {
            let hz = i as f64;
            let expected = prewarped_highpass_gain(4, hz, 11.0, 250.0)
                * prewarped_lowpass_gain(4, hz, 16.0, 250.0);
            assert!((bp.gain(hz, 250.0) - expected).abs() < 1e-9, "{hz}");
        }
        assert!(bp.gain(5.0, 250.0) < 0.05);
        assert!(bp.gain(40.0, 250.0) < 0.03);
    }
}
