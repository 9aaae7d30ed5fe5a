//! The fixed, ordered list of the 42 epoch features. This is the single
//! source of truth for names, units and column order in every CSV, model
//! and report.

use serde::Serialize;

use crate::model::FEATURE_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Pulse,
    Imu,
    Eog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FeatureSpec {
    pub name: &'static str,
    pub unit: &'static str,
    pub family: Family,
    pub description: &'static str,
}

const fn spec(
    name: &'static str,
    unit: &'static str,
    family: Family,
    description: &'static str,
) -> FeatureSpec {
    FeatureSpec {
        name,
        unit,
        family,
        description,
    }
}

use Family::{Eog, Imu, Pulse};

pub const PULSE_COUNT: usize = 8;
pub const IMU_COUNT: usize = 12;
pub const EOG_COUNT: usize = 22;

pub const CATALOG: [FeatureSpec; FEATURE_COUNT] = [
    spec("pulse.hr_bpm_spectral", "bpm", Pulse, "heart rate from the PSD peak in 0.66-3 Hz"),
    spec("pulse.hr_harmonic_score", "ratio", Pulse, "PSD at twice the heart-rate frequency over PSD at the fundamental"),
    spec("pulse.hr_bpm_peaks", "bpm", Pulse, "heart rate from mean inter-beat interval"),
    spec("pulse.ibi_sdnn_ms", "ms", Pulse, "standard deviation of inter-beat intervals"),
    spec("pulse.ibi_rmssd_ms", "ms", Pulse, "RMS of successive inter-beat interval differences"),
    spec("pulse.hr_halves_delta_bpm", "bpm", Pulse, "second-half minus first-half heart rate"),
    spec("pulse.ppg_amplitude_iqr", "counts", Pulse, "interquartile range of the filtered pulse signal"),
    spec("pulse.ppg_spectral_entropy", "ratio", Pulse, "normalized Shannon entropy of the 0-10 Hz pulse spectrum"),
    spec("imu.accel_mag_mean", "counts", Imu, "mean centered acceleration magnitude"),
    spec("imu.accel_mag_std", "counts", Imu, "standard deviation of centered acceleration magnitude"),
    spec("imu.accel_mag_max", "counts", Imu, "maximum centered acceleration magnitude"),
    spec("imu.accel_mag_iqr", "counts", Imu, "interquartile range of centered acceleration magnitude"),
    spec("imu.gyro_mag_mean", "counts", Imu, "mean centered angular-rate magnitude"),
    spec("imu.gyro_mag_std", "counts", Imu, "standard deviation of centered angular-rate magnitude"),
    spec("imu.gyro_mag_max", "counts", Imu, "maximum centered angular-rate magnitude"),
    spec("imu.gyro_mag_iqr", "counts", Imu, "interquartile range of centered angular-rate magnitude"),
    spec("imu.accel_jerk_rms", "counts/s", Imu, "RMS magnitude of the acceleration first difference"),
    spec("imu.gyro_jerk_rms", "counts/s", Imu, "RMS magnitude of the angular-rate first difference"),
    spec("imu.movement_event_count", "count", Imu, "adaptive-threshold movement events on acceleration magnitude"),
    spec("imu.movement_fraction", "ratio", Imu, "fraction of samples above the movement threshold"),
    spec("eog.delta_power", "counts^2", Eog, "absolute power below 4 Hz"),
    spec("eog.theta_power", "counts^2", Eog, "absolute power 4-8 Hz"),
    spec("eog.alpha_power", "counts^2", Eog, "absolute power 8-13 Hz"),
    spec("eog.beta_power", "counts^2", Eog, "absolute power 13-30 Hz"),
    spec("eog.gamma_power", "counts^2", Eog, "absolute power 30-100 Hz"),
    spec("eog.delta_rel", "ratio", Eog, "delta share of five-band power"),
    spec("eog.theta_rel", "ratio", Eog, "theta share of five-band power"),
    spec("eog.alpha_rel", "ratio", Eog, "alpha share of five-band power"),
    spec("eog.beta_rel", "ratio", Eog, "beta share of five-band power"),
    spec("eog.gamma_rel", "ratio", Eog, "gamma share of five-band power"),
    spec("eog.total_power", "counts^2", Eog, "sum of the five band powers"),
    spec("eog.std", "counts", Eog, "standard deviation"),
    spec("eog.iqr", "counts", Eog, "interquartile range"),
    spec("eog.range", "counts", Eog, "maximum minus minimum"),
    spec("eog.zero_crossing_rate", "1/s", Eog, "sign changes of the mean-removed signal per second"),
    spec("eog.kurtosis", "ratio", Eog, "excess kurtosis"),
    spec("eog.skewness", "ratio", Eog, "skewness"),
    spec("eog.sef95_hz", "Hz", Eog, "95% spectral edge frequency within 0-100 Hz"),
    spec("eog.saccade_event_count", "count", Eog, "adaptive-threshold events on the first difference"),
    spec("eog.saturation_fraction", "ratio", Eog, "fraction of samples at either ADC rail"),
    spec("eog.spindle_band_power", "counts^2", Eog, "absolute power 11-16 Hz"),
    spec("eog.spindle_event_count", "count", Eog, "11-16 Hz envelope bursts lasting 0.4-2.5 s"),
];

pub const fn names() -> [&'static str; FEATURE_COUNT] {
    let mut out = [""; FEATURE_COUNT];
    let mut i = 0;
    while i < FEATURE_COUNT {
        out[i] = CATALOG[i].name;
        i += 1;
    }
    out
}

pub fn index_of(name: &str) -> Option<usize> {
    CATALOG.iter().position(|s| s.name == name)
}

/// JSON dump of the catalog in column order.
pub fn catalog_json() -> serde_json::Value {
    serde_json::json!({
        "count": FEATURE_COUNT,
        "features": &CATALOG[..],
    })
}
