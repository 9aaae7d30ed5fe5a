//! Every quantitative constant of the synthetic generator.
//!
//! Amplitudes are in ADC counts, rates in events per minute. Arrays indexed
//! by class follow the classifier order (Deep, Light, REM, Wake).

use serde::{Deserialize, Serialize};

use crate::model::N_CLASSES;

/// Band limits used to synthesize EOG background activity, in Hz.
/// The last band stops at the front-end low-pass.
pub const SYNTH_BANDS_HZ: [(f64, f64); 5] = [
    (0.5, 4.0),
    (4.0, 8.0),
    (8.0, 13.0),
    (13.0, 30.0),
    (30.0, 45.0),
];

pub const FRONT_END_LOWPASS_HZ: f64 = 40.0;
pub const FRONT_END_ORDER: usize = 2;

pub const ADC_MIDPOINT: f64 = 512.0;
/// One g at the accelerometer's ±2 g range.
pub const GRAVITY_COUNTS: f64 = 16_384.0;

/// Class shares the hypnogram aims for.
pub const TARGET_CLASS_MIX: [f64; N_CLASSES] = [0.1493, 0.4828, 0.2358, 0.1321];
/// Nominal class shares of a held-out test split; used only for reporting.
pub const TEST_CLASS_MIX: [f64; N_CLASSES] = [0.1664, 0.4591, 0.2165, 0.1580];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageProfile {
    /// RMS amplitude of each synthesis band.
    pub eog_band_rms: [f64; 5],
    pub spindle_rate: f64,
    pub saccade_rate: f64,
    pub hr_bpm: f64,
    /// Epoch-to-epoch spread of the heart rate.
    pub hr_epoch_sd_bpm: f64,
    /// Beat-to-beat coefficient of variation of the interval.
    pub ibi_cv: f64,
    pub movement_rate: f64,
    pub saturation_rate: f64,
}

impl StageProfile {
    /// Linear blend, `w = 0` gives `self`.
    pub fn blend(&self, other: &StageProfile, w: f64) -> StageProfile {
        let mix = |a: f64, b: f64| a + w * (b - a);
        let mut bands = self.eog_band_rms;
        for (v, o) in bands.iter_mut().zip(other.eog_band_rms) {
            *v = mix(*v, o);
        }
        StageProfile {
            eog_band_rms: bands,
            spindle_rate: mix(self.spindle_rate, other.spindle_rate),
            saccade_rate: mix(self.saccade_rate, other.saccade_rate),
            hr_bpm: mix(self.hr_bpm, other.hr_bpm),
            hr_epoch_sd_bpm: mix(self.hr_epoch_sd_bpm, other.hr_epoch_sd_bpm),
            ibi_cv: mix(self.ibi_cv, other.ibi_cv),
            movement_rate: mix(self.movement_rate, other.movement_rate),
            saturation_rate: mix(self.saturation_rate, other.saturation_rate),
        }
    }

    fn rates_non_negative(&self) -> bool {
        self.eog_band_rms
            .iter()
            .chain(&[
                self.spindle_rate,
                self.saccade_rate,
                self.hr_bpm,
                self.hr_epoch_sd_bpm,
                self.ibi_cv,
                self.movement_rate,
                self.saturation_rate,
            ])
            .all(|v| v.is_finite() && *v >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub stages: [StageProfile; N_CLASSES],
    /// Log-normal sigma of each band's per-epoch amplitude.
    pub band_jitter: [f64; 5],
    /// Log-normal sigma applied to event rates per epoch.
    pub rate_jitter: f64,
    /// Largest blend toward the neighbouring stage in a run's first or
    /// last epoch.
    pub edge_blend: f64,
    /// Crossfade between epoch amplitudes, in seconds.
    pub crossfade_s: f64,

    pub spindle_rms: f64,
    pub spindle_freq_hz: (f64, f64),
    pub spindle_duration_s: (f64, f64),
    pub saccade_step: (f64, f64),
    pub saccade_rise_s: f64,
    /// Decay of a saccade step through the front-end high-pass.
    pub saccade_decay_s: f64,
    pub saturation_duration_s: (f64, f64),

    pub hr_night_sd_bpm: f64,
    pub ppg_amplitude: f64,
    pub ppg_amplitude_night_sd: f64,
    pub ppg_noise_rms: f64,
    pub ppg_resp_amplitude: f64,
    pub resp_rate_hz: f64,

    pub accel_noise_rms: f64,
    pub gyro_noise_rms: f64,
    pub accel_resp_amplitude: f64,
    pub movement_duration_s: (f64, f64),
    pub movement_accel: (f64, f64),
    pub movement_gyro: (f64, f64),
    pub movement_freq_hz: (f64, f64),
    /// Chance that a movement leaves the head in a new posture.
    pub posture_change_p: f64,

    /// Mean run length of Light sleep, in epochs; the others follow from
    /// the target mix.
    pub light_mean_run: f64,
    /// Where a Light run goes next: Deep, REM, Wake.
    pub light_exit: [f64; 3],
    pub run_gamma_shape: f64,
    pub not_detected_rate: f64,
    /// Chance that the first (last) epoch of a night is cut short.
    pub truncation_p: f64,
    pub truncation_s: (f64, f64),
}

impl Default for ProfileSet {
    fn default() -> Self {
        let deep = StageProfile {
            eog_band_rms: [34.0, 10.0, 3.0, 2.6, 1.2],
            spindle_rate: 0.0,
            saccade_rate: 0.0,
            hr_bpm: 54.0,
            hr_epoch_sd_bpm: 2.0,
            ibi_cv: 0.02,
            movement_rate: 0.0,
            saturation_rate: 0.0,
        };
        let light = StageProfile {
            eog_band_rms: [20.0, 11.0, 5.0, 3.6, 1.5],
            spindle_rate: 4.0,
            saccade_rate: 0.4,
            hr_bpm: 58.0,
            hr_epoch_sd_bpm: 2.5,
            ibi_cv: 0.03,
            movement_rate: 0.3,
            saturation_rate: 0.0,
        };
        let rem = StageProfile {
            eog_band_rms: [15.0, 12.0, 8.0, 5.0, 2.0],
            spindle_rate: 0.0,
            saccade_rate: 12.0,
            hr_bpm: 63.0,
            hr_epoch_sd_bpm: 4.0,
            ibi_cv: 0.07,
            movement_rate: 0.1,
            saturation_rate: 0.0,
        };
        let wake = StageProfile {
            eog_band_rms: [13.0, 8.0, 13.0, 7.5, 3.0],
            spindle_rate: 0.0,
            saccade_rate: 4.0,
            hr_bpm: 68.0,
            hr_epoch_sd_bpm: 4.0,
            ibi_cv: 0.05,
            movement_rate: 3.0,
            saturation_rate: 0.2,
        };
        ProfileSet {
            stages: [deep, light, rem, wake],
            band_jitter: [0.45, 0.35, 0.2, 0.3, 0.3],
            rate_jitter: 0.4,
            edge_blend: 0.5,
            crossfade_s: 0.5,
            spindle_rms: 20.0,
            spindle_freq_hz: (11.5, 14.5),
            spindle_duration_s: (0.6, 2.0),
            saccade_step: (100.0, 200.0),
            saccade_rise_s: 0.02,
            saccade_decay_s: 1.0,
            saturation_duration_s: (0.5, 1.5),
            hr_night_sd_bpm: 3.0,
            ppg_amplitude: 120.0,
            ppg_amplitude_night_sd: 0.15,
            ppg_noise_rms: 3.0,
            ppg_resp_amplitude: 10.0,
            resp_rate_hz: 0.25,
            accel_noise_rms: 12.0,
            gyro_noise_rms: 6.0,
            accel_resp_amplitude: 5.0,
            movement_duration_s: (0.5, 3.0),
            movement_accel: (800.0, 3000.0),
            movement_gyro: (300.0, 1500.0),
            movement_freq_hz: (1.0, 4.0),
            posture_change_p: 0.3,
            light_mean_run: 8.0,
            light_exit: [0.35, 0.40, 0.25],
            run_gamma_shape: 3.0,
            not_detected_rate: 0.002,
            truncation_p: 0.5,
            truncation_s: (3.0, 20.0),
        }
    }
}

impl ProfileSet {
    /// Mean run length per class that makes the semi-Markov chain spend
    /// [`TARGET_CLASS_MIX`] of its time in each stage. Every non-Light run
    /// returns to Light, so a stage's share is its exit probability times
    /// its mean run, relative to Light's.
    pub fn mean_runs(&self) -> [f64; N_CLASSES] {
        let light = TARGET_CLASS_MIX[1];
        let [to_deep, to_rem, to_wake] = self.light_exit;
        let run = |share: f64, exit: f64| share / light * self.light_mean_run / exit;
        [
            run(TARGET_CLASS_MIX[0], to_deep),
            self.light_mean_run,
            run(TARGET_CLASS_MIX[2], to_rem),
            run(TARGET_CLASS_MIX[3], to_wake),
        ]
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.stages.iter().all(StageProfile::rates_non_negative) {
            return Err("stage rates must be finite and non-negative".into());
        }
        let exit_sum: f64 = self.light_exit.iter().sum();
        if (exit_sum - 1.0).abs() > 1e-9 || self.light_exit.iter().any(|&p| p <= 0.0) {
            return Err("light exit probabilities must be positive and sum to 1".into());
        }
        if !(0.0..=1.0).contains(&self.edge_blend) || !(0.0..=1.0).contains(&self.truncation_p) {
            return Err("probabilities and blend weights must lie in [0, 1]".into());
        }
        if self.light_mean_run < 1.0 || self.run_gamma_shape <= 0.0 {
            return Err("run lengths must be at least one epoch".into());
        }
        Ok(())
    }

    /// Channels on which stages `a` and `b` differ.
    pub fn differing_channels(&self, a: usize, b: usize) -> usize {
        let (p, q) = (&self.stages[a], &self.stages[b]);
        let bands = p.eog_band_rms != q.eog_band_rms;
        [
            bands,
            p.spindle_rate != q.spindle_rate,
            p.saccade_rate != q.saccade_rate,
            p.hr_bpm != q.hr_bpm || p.ibi_cv != q.ibi_cv,
            p.movement_rate != q.movement_rate,
            p.saturation_rate != q.saturation_rate,
        ]
        .iter()
        .filter(|&&d| d)
        .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_distinct() {
        let p = ProfileSet::default();
        assert!(p.validate().is_ok());
        for a in 0..N_CLASSES {
            for b in a + 1..N_CLASSES {
                assert!(p.differing_channels(a, b) >= 3, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn stage_signatures() {
        let [deep, light, rem, wake] = ProfileSet::default().stages;
        assert!(wake.eog_band_rms[2] > rem.eog_band_rms[2]);
        assert!(rem.eog_band_rms[2] > light.eog_band_rms[2]);
        assert!(light.eog_band_rms[2] > deep.eog_band_rms[2]);
        assert!(deep.eog_band_rms[0] > light.eog_band_rms[0]);
        assert_eq!(deep.movement_rate, 0.0);
        assert!(light.spindle_rate > 0.0);
        assert!([deep, rem, wake].iter().all(|s| s.spindle_rate == 0.0));
        assert!(rem.ibi_cv > light.ibi_cv && rem.saccade_rate > light.saccade_rate);
    }

    #[test]
    fn mean_runs_reproduce_the_mix() {
        let p = ProfileSet::default();
        let runs = p.mean_runs();
        // Embedded chain: half of all runs are Light, the rest split by the
        // exit probabilities.
        let visits = [p.light_exit[0] / 2.0, 0.5, p.light_exit[1] / 2.0, p.light_exit[2] / 2.0];
        let time: Vec<f64> = visits.iter().zip(runs).map(|(v, r)| v * r).collect();
        let total: f64 = time.iter().sum();
        for (t, target) in time.iter().zip(TARGET_CLASS_MIX) {
            assert!((t / total - target / TARGET_CLASS_MIX.iter().sum::<f64>()).abs() < 1e-12);
        }
    }

    #[test]
    fn blend_endpoints() {
        let p = ProfileSet::default();
        let (a, b) = (p.stages[0], p.stages[3]);
        assert_eq!(a.blend(&b, 0.0), a);
        assert_eq!(a.blend(&b, 1.0), b);
    }
}
