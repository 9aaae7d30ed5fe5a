//! Motion features from the accelerometer and gyroscope.

use crate::dsp::stats::{iqr, mean, std_dev};
use crate::dsp::ThresholdDetector;

/// Robust deviations from the median magnitude that count as movement.
pub const MOVEMENT_K_SIGMA: f64 = 4.0;
pub const MOVEMENT_MIN_GAP_S: f64 = 0.5;
/// Floor on the robust sigma of the acceleration magnitude, in counts
/// (threshold at least 100 counts, about 6 mg). The magnitude of pure
/// sensor noise has a long tail that a noise-scaled threshold would cut.
pub const MOVEMENT_SIGMA_FLOOR: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImuFeatures {
    pub accel_mag_mean: f64,
    pub accel_mag_std: f64,
    pub accel_mag_max: f64,
    pub accel_mag_iqr: f64,
    pub gyro_mag_mean: f64,
    pub gyro_mag_std: f64,
    pub gyro_mag_max: f64,
    pub gyro_mag_iqr: f64,
    pub accel_jerk_rms: f64,
    pub gyro_jerk_rms: f64,
    pub movement_event_count: f64,
    pub movement_fraction: f64,
}

impl ImuFeatures {
    pub fn to_array(&self) -> [f64; 12] {
        [
            self.accel_mag_mean,
            self.accel_mag_std,
            self.accel_mag_max,
            self.accel_mag_iqr,
            self.gyro_mag_mean,
            self.gyro_mag_std,
            self.gyro_mag_max,
            self.gyro_mag_iqr,
            self.accel_jerk_rms,
            self.gyro_jerk_rms,
            self.movement_event_count,
            self.movement_fraction,
        ]
    }
}

/// Magnitude of the per-axis mean-removed vector. Removing the epoch mean
/// takes out gravity and any static posture, so only motion remains.
pub fn centered_magnitude(axes: [&[f64]; 3]) -> Vec<f64> {
    let means = axes.map(mean);
    (0..axes[0].len())
        .map(|i| {
            (0..3)
                .map(|a| (axes[a][i] - means[a]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// RMS of the first-difference magnitude, scaled to counts per second.
pub fn jerk_rms(axes: [&[f64]; 3], fs_hz: f64) -> f64 {
    let n = axes[0].len();
    if n < 2 {
        return 0.0;
    }
    let sum: f64 = (1..n)
        .map(|i| (0..3).map(|a| (axes[a][i] - axes[a][i - 1]).powi(2)).sum::<f64>())
        .sum();
    (sum / (n - 1) as f64).sqrt() * fs_hz
}

fn magnitude_stats(m: &[f64]) -> [f64; 4] {
    let max = m.iter().copied().fold(0.0, f64::max);
    [mean(m), std_dev(m), max, iqr(m)]
}

/// Features from decoded (signed) accelerometer and gyroscope axes.
pub fn imu_features(accel: [&[f64]; 3], gyro: [&[f64]; 3], fs_hz: f64) -> ImuFeatures {
    let am = centered_magnitude(accel);
    let gm = centered_magnitude(gyro);
    let [accel_mag_mean, accel_mag_std, accel_mag_max, accel_mag_iqr] = magnitude_stats(&am);
    let [gyro_mag_mean, gyro_mag_std, gyro_mag_max, gyro_mag_iqr] = magnitude_stats(&gm);
    let scan = ThresholdDetector::new(MOVEMENT_K_SIGMA, MOVEMENT_MIN_GAP_S)
        .with_floor(MOVEMENT_SIGMA_FLOOR)
        .scan(&am, fs_hz);
    ImuFeatures {
        accel_mag_mean,
        accel_mag_std,
        accel_mag_max,
        accel_mag_iqr,
        gyro_mag_mean,
        gyro_mag_std,
        gyro_mag_max,
        gyro_mag_iqr,
        accel_jerk_rms: jerk_rms(accel, fs_hz),
        gyro_jerk_rms: jerk_rms(gyro, fs_hz),
        movement_event_count: scan.events.len() as f64,
        movement_fraction: if am.is_empty() {
            0.0
        } else {
            scan.above as f64 / am.len() as f64
        },
    }
}
