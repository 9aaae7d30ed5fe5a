//! Deterministic signal kernels. Everything here is a pure function of its
//! inputs.

pub mod events;
pub mod filter;
pub mod spectral;
pub mod stats;

use thiserror::Error;

pub use events::{adaptive_threshold_events, Event, EventScan, ThresholdDetector};
pub use filter::{
    design_butterworth, design_butterworth_bandpass, design_butterworth_lowpass, filter_forward,
    filter_padded,
    FilterCascade, FilterKind, IirFilter,
};
pub use spectral::{
    band_powers, periodogram, spectrogram, window, BandPowers, Psd, Spectrogram, WindowKind,
    BAND_EDGES_HZ, EOG_WINDOW,
};
pub use stats::detrend_mean;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("cutoff {cutoff_hz} Hz must lie strictly inside (0, {fs_hz}/2)")]
    InvalidCutoff { cutoff_hz: f64, fs_hz: f64 },
    #[error("filter coefficients are malformed")]
    BadCoefficients,
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("Nyquist frequency {nyquist_hz} Hz is below the top band edge")]
    BandOutOfRange { nyquist_hz: f64 },
    #[error("window of {win_s} s is longer than the {signal_s} s signal")]
    WindowTooLong { win_s: f64, signal_s: f64 },
    #[error("hop must be positive, got {0}")]
    BadHop(f64),
}
