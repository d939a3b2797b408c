//! Skin-conductance signals: synthetic generation, the acquisition chain,
//! SCR band-pass filtering, normalisation, event windows and features.

pub mod filter;
pub mod io;
pub mod synth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::EventId;

pub use filter::{butter_bandpass, Biquad, Sos};
pub use synth::{
    adc_quantize, bateman, bateman_peak_time, synth_gsr, AdcCalibration, AdcOutput, CohortSpec,
    Group, SubjectProfile,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysioError {
    #[error("trace too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("event {event} at {t:.2} s lacks a {window_s} s margin inside the trace")]
    Window {
        event: EventId,
        t: f64,
        window_s: f64,
    },
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysioConfig {
    pub sample_rate_hz: f64,
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub filter_order: usize,
    /// Half-width of the event window.
    pub window_s: f64,
    /// Resting recording before the drive starts.
    pub baseline_s: f64,
    pub bateman_tau1_s: f64,
    pub bateman_tau2_s: f64,
    /// Baseline level the auto-calibration aims for (a.u.).
    pub adc_target: f64,
    pub adc_full_scale: f64,
}

impl Default for PhysioConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 256.0,
            band_low_hz: 0.16,
            band_high_hz: 2.1,
            filter_order: 3,
            window_s: 10.0,
            baseline_s: 60.0,
            bateman_tau1_s: 0.75,
            bateman_tau2_s: 2.0,
            adc_target: 350.0,
            adc_full_scale: 1023.0,
        }
    }
}

impl PhysioConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            self.sample_rate_hz,
            self.band_low_hz,
            self.band_high_hz,
            self.window_s,
            self.bateman_tau1_s,
            self.bateman_tau2_s,
            self.adc_target,
            self.adc_full_scale,
        ];
        if !positive.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(
                "physio rates, band edges, window and kernel constants must be positive".into(),
            );
        }
        if self.band_low_hz >= self.band_high_hz || self.band_high_hz >= self.sample_rate_hz / 2.0 {
            return Err("band edges must satisfy low < high < sample_rate / 2".into());
        }
        if self.filter_order == 0 || self.filter_order > 8 {
            return Err("filter_order must be between 1 and 8".into());
        }
        if self.bateman_tau1_s >= self.bateman_tau2_s {
            return Err("bateman_tau1_s must be below bateman_tau2_s".into());
        }
        if !(self.baseline_s >= 0.0) {
            return Err("baseline_s must be non-negative".into());
        }
        Ok(())
    }

    /// Samples in each half of an event window.
    pub fn window_len(&self) -> usize {
        (self.window_s * self.sample_rate_hz).round() as usize
    }

    pub fn scr_filter(&self) -> Result<Sos, PhysioError> {
        butter_bandpass(
            self.filter_order,
            self.band_low_hz,
            self.band_high_hz,
            self.sample_rate_hz,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventMarker {
    pub event: EventId,
    pub t: f64,
}

/// Sampled skin-conductance recording (a.u.) with event markers.
#[derive(Debug, Clone, PartialEq)]
pub struct GsrTrace {
    pub subject: u32,
    pub sample_rate: f64,
    pub samples: Vec<f64>,
    pub markers: Vec<EventMarker>,
    /// Resting span excluded from normalisation, in seconds.
    pub baseline: (f64, f64),
}

impl GsrTrace {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Index of the first sample after the baseline span.
    pub fn recording_start(&self) -> usize {
        ((self.baseline.1 * self.sample_rate).round() as usize).min(self.samples.len())
    }

    pub fn validate(&self) -> Result<(), PhysioError> {
        if !(self.sample_rate > 0.0) {
            return Err(PhysioError::InvalidParameter(
                "sample rate must be positive".into(),
            ));
        }
        if let Some(i) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(PhysioError::Degenerate(format!("sample {i} is not finite")));
        }
        let dur = self.duration_s();
        if let Some(m) = self.markers.iter().find(|m| !(0.0..=dur).contains(&m.t)) {
            return Err(PhysioError::Window {
                event: m.event,
                t: m.t,
                window_s: 0.0,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    ZScore,
    MinMax,
}

/// Z-score (population standard deviation) or min-max normalisation.
pub fn normalize(x: &[f64], mode: NormMode) -> Result<Vec<f64>, PhysioError> {
    if x.is_empty() {
        return Err(PhysioError::Degenerate("empty trace".into()));
    }
    match mode {
        NormMode::ZScore => {
            let (mean, sd) = mean_sd(x);
            if !(sd > 0.0) {
                return Err(PhysioError::Degenerate(
                    "constant trace has zero standard deviation".into(),
                ));
            }
            Ok(x.iter().map(|v| (v - mean) / sd).collect())
        }
        NormMode::MinMax => {
            let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                return Err(PhysioError::Degenerate(
                    "constant trace has no range".into(),
                ));
            }
            Ok(x.iter().map(|v| (v - lo) / (hi - lo)).collect())
        }
    }
}

/// Z-scores the whole trace with the statistics of `x[from..]`.
pub fn zscore_from(x: &[f64], from: usize) -> Result<Vec<f64>, PhysioError> {
    let span = &x[from.min(x.len())..];
    if span.is_empty() {
        return Err(PhysioError::Degenerate(
            "no samples after the baseline".into(),
        ));
    }
    let (mean, sd) = mean_sd(span);
    if !(sd > 0.0) {
        return Err(PhysioError::Degenerate(
            "constant recording has zero standard deviation".into(),
        ));
    }
    Ok(x.iter().map(|v| (v - mean) / sd).collect())
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// SCR view: band-pass of the trace, same length.
pub fn bandpass_scr(x: &[f64], cfg: &PhysioConfig) -> Result<Vec<f64>, PhysioError> {
    let min_len = (cfg.window_s * cfg.sample_rate_hz).ceil() as usize;
    if x.len() < min_len {
        return Err(PhysioError::TooShort {
            needed: min_len,
            got: x.len(),
        });
    }
    cfg.scr_filter()?.filtfilt(x)
}

/// Samples around one event: `pre` covers `[t - w, t)`, `post` `[t, t + w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventWindow {
    pub event: EventId,
    pub gsr_pre: Vec<f64>,
    pub gsr_post: Vec<f64>,
    pub scr_pre: Vec<f64>,
    pub scr_post: Vec<f64>,
}

impl EventWindow {
    pub fn len(&self) -> usize {
        self.gsr_pre.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gsr_pre.is_empty()
    }

    /// GSR view of the whole window divided by its first sample.
    pub fn rebased_gsr(&self) -> Result<Vec<f64>, PhysioError> {
        let first = self.gsr_pre.first().copied().unwrap_or(0.0);
        if first == 0.0 || !first.is_finite() {
            return Err(PhysioError::Degenerate(
                "window starts at zero; cannot rebase".into(),
            ));
        }
        Ok(self
            .gsr_pre
            .iter()
            .chain(&self.gsr_post)
            .map(|v| v / first)
            .collect())
    }

    /// SCR view of the whole window minus its first sample.
    pub fn rebased_scr(&self) -> Vec<f64> {
        let first = self.scr_pre.first().copied().unwrap_or(0.0);
        self.scr_pre
            .iter()
            .chain(&self.scr_post)
            .map(|v| v - first)
            .collect()
    }
}

pub fn extract_window(
    gsr: &[f64],
    scr: &[f64],
    marker: EventMarker,
    sample_rate: f64,
    window_s: f64,
) -> Result<EventWindow, PhysioError> {
    let l = (window_s * sample_rate).round() as usize;
    let m = (marker.t * sample_rate).round();
    let n = gsr.len().min(scr.len());
    if !(m >= l as f64) || m as usize + l > n {
        return Err(PhysioError::Window {
            event: marker.event,
            t: marker.t,
            window_s,
        });
    }
    let m = m as usize;
    Ok(EventWindow {
        event: marker.event,
        gsr_pre: gsr[m - l..m].to_vec(),
        gsr_post: gsr[m..m + l].to_vec(),
        scr_pre: scr[m - l..m].to_vec(),
        scr_post: scr[m..m + l].to_vec(),
    })
}

/// Features of one half window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfFeatures {
    pub mean: f64,
    pub acc: f64,
    pub max: f64,
    pub p2p: f64,
}

pub fn half_features(gsr: &[f64], scr: &[f64]) -> HalfFeatures {
    let l = gsr.len() as f64;
    let mean = gsr.iter().sum::<f64>() / l;
    let max = gsr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let hi = scr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = scr.iter().copied().fold(f64::INFINITY, f64::min);
    HalfFeatures {
        mean,
        acc: mean * l,
        max,
        p2p: hi - lo,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub subject: u32,
    pub group: Group,
    pub event: EventId,
    pub d_p2p: f64,
    pub d_max: f64,
    pub d_mean: f64,
    pub d_acc: f64,
}

/// Post minus Pre of every feature.
pub fn extract_features(w: &EventWindow) -> (HalfFeatures, HalfFeatures) {
    (
        half_features(&w.gsr_pre, &w.scr_pre),
        half_features(&w.gsr_post, &w.scr_post),
    )
}

pub fn feature_row(subject: u32, group: Group, w: &EventWindow) -> FeatureRow {
    let (pre, post) = extract_features(w);
    FeatureRow {
        subject,
        group,
        event: w.event,
        d_p2p: post.p2p - pre.p2p,
        d_max: post.max - pre.max,
        d_mean: post.mean - pre.mean,
        d_acc: post.acc - pre.acc,
    }
}

/// Outcome of processing one subject's trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectFeatures {
    pub rows: Vec<FeatureRow>,
    /// Events whose window did not fit in the trace.
    pub excluded: Vec<EventId>,
}

/// Z-score over the in-drive recording, band-pass, window every marker and
/// extract the Δ features.
pub fn process_trace(
    trace: &GsrTrace,
    group: Group,
    cfg: &PhysioConfig,
) -> Result<SubjectFeatures, PhysioError> {
    trace.validate()?;
    let ghat = zscore_from(&trace.samples, trace.recording_start())?;
    let scr = bandpass_scr(&ghat, cfg)?;
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for &m in &trace.markers {
        match extract_window(&ghat, &scr, m, trace.sample_rate, cfg.window_s) {
            Ok(w) => rows.push(feature_row(trace.subject, group, &w)),
            Err(PhysioError::Window { event, .. }) => excluded.push(event),
            Err(e) => return Err(e),
        }
    }
    Ok(SubjectFeatures { rows, excluded })
}
