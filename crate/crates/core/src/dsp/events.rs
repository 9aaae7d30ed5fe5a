//! Adaptive-threshold event detection: samples deviating from the median by
//! more than `k` robust standard deviations, grouped into events.

use serde::{Deserialize, Serialize};

use super::stats::{median, robust_sigma};

/// A run of supra-threshold samples, `[start, end)` in sample indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub start: usize,
    pub end: usize,
    pub peak_index: usize,
    pub peak_deviation: f64,
}

impl Event {
    pub fn duration_s(&self, fs_hz: f64) -> f64 {
        (self.end - self.start) as f64 / fs_hz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventScan {
    pub events: Vec<Event>,
    pub center: f64,
    pub threshold: f64,
    /// Samples whose deviation exceeded the threshold.
    pub above: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDetector {
    pub k_sigma: f64,
    pub min_gap_s: f64,
    /// Lower bound on the robust sigma, in signal units. Keeps quantization
    /// noise on a near-constant channel from being reported as events.
    pub sigma_floor: f64,
}

impl ThresholdDetector {
    pub fn new(k_sigma: f64, min_gap_s: f64) -> Self {
        Self {
            k_sigma,
            min_gap_s,
            sigma_floor: 0.0,
        }
    }

    pub fn with_floor(mut self, sigma_floor: f64) -> Self {
        self.sigma_floor = sigma_floor;
        self
    }

    pub fn scan(&self, x: &[f64], fs_hz: f64) -> EventScan {
        let center = median(x);
        let sigma = robust_sigma(x).max(self.sigma_floor);
        let threshold = self.k_sigma * sigma;
        let min_gap = (self.min_gap_s * fs_hz).round() as usize;

        let mut events: Vec<Event> = Vec::new();
        let mut above = 0;
        let mut current: Option<Event> = None;
        for (i, &v) in x.iter().enumerate() {
            let dev = (v - center).abs();
            if dev > threshold {
                above += 1;
                let ev = current.get_or_insert(Event {
                    start: i,
                    end: i + 1,
                    peak_index: i,
                    peak_deviation: dev,
                });
                ev.end = i + 1;
                if dev > ev.peak_deviation {
                    ev.peak_index = i;
                    ev.peak_deviation = dev;
                }
            } else if let Some(ev) = current.take() {
                push_merged(&mut events, ev, min_gap);
            }
        }
        if let Some(ev) = current {
            push_merged(&mut events, ev, min_gap);
        }
        EventScan {
            events,
            center,
            threshold,
            above,
        }
    }
}

fn push_merged(events: &mut Vec<Event>, ev: Event, min_gap: usize) {
    match events.last_mut() {
        Some(prev) if ev.start - prev.end < min_gap => {
            prev.end = ev.end;
            if ev.peak_deviation > prev.peak_deviation {
                prev.peak_index = ev.peak_index;
                prev.peak_deviation = ev.peak_deviation;
            }
        }
        _ => events.push(ev),
    }
}

/// Events where `|x - median(x)| > k_sigma · 1.4826 · MAD(x)`, merged when
/// separated by less than `min_gap_s`.
pub fn adaptive_threshold_events(x: &[f64], k_sigma: f64, min_gap_s: f64, fs_hz: f64) -> Vec<Event> {
    ThresholdDetector::new(k_sigma, min_gap_s).scan(x, fs_hz).events
}
