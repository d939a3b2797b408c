//! Synthetic skin conductance: tonic level with linear drift, Bateman
//! responses locked to events, white noise, and a 10-bit ADC.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::{EventMarker, GsrTrace, PhysioConfig, PhysioError};
use crate::scenario::EventId;

/// HUD condition a subject drove with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    Omn,
    Sel,
}

impl Group {
    pub fn as_str(self) -> &'static str {
        match self {
            Group::Omn => "OMN",
            Group::Sel => "SEL",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Group {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "OMN" => Ok(Group::Omn),
            "SEL" => Ok(Group::Sel),
            _ => Err(format!("unknown group `{s}` (expected OMN or SEL)")),
        }
    }
}

/// Time of the Bateman maximum, `ln(tau2 / tau1) tau1 tau2 / (tau2 - tau1)`.
pub fn bateman_peak_time(tau1: f64, tau2: f64) -> f64 {
    (tau2 / tau1).ln() * tau1 * tau2 / (tau2 - tau1)
}

/// Bi-exponential impulse `exp(-t/tau2) - exp(-t/tau1)` scaled to a unit
/// peak; zero for `t < 0`.
pub fn bateman(t: f64, tau1: f64, tau2: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let raw = |t: f64| (-t / tau2).exp() - (-t / tau1).exp();
    raw(t) / raw(bateman_peak_time(tau1, tau2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectProfile {
    /// Tonic conductance at the start of the trace (uS).
    pub tonic_level: f64,
    /// Tonic change per second (uS/s).
    pub drift_per_s: f64,
    /// Response amplitude per event (uS), indexed by `EventId::index`.
    pub amplitudes: [f64; 7],
    /// Onset latency per event (s).
    pub latencies: [f64; 7],
    pub noise_sd: f64,
}

impl SubjectProfile {
    pub fn validate(&self) -> Result<(), PhysioError> {
        if !(self.tonic_level.is_finite() && self.drift_per_s.is_finite()) {
            return Err(PhysioError::InvalidParameter(
                "tonic level and drift must be finite".into(),
            ));
        }
        if self.latencies.iter().any(|l| !(1.0..=5.0).contains(l)) {
            return Err(PhysioError::InvalidParameter(
                "latencies must lie in [1, 5] s".into(),
            ));
        }
        if self
            .amplitudes
            .iter()
            .any(|a| !(a.is_finite() && *a >= 0.0))
        {
            return Err(PhysioError::InvalidParameter(
                "amplitudes must be finite and non-negative".into(),
            ));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(PhysioError::InvalidParameter(
                "noise_sd must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Analog trace of `duration_s` seconds. Markers are event onsets in trace time.
pub fn synth_gsr(
    markers: &[EventMarker],
    duration_s: f64,
    profile: &SubjectProfile,
    cfg: &PhysioConfig,
    seed: u64,
) -> Result<Vec<f64>, PhysioError> {
    profile.validate()?;
    let fs = cfg.sample_rate_hz;
    let n = (duration_s * fs).round() as usize;
    let mut x: Vec<f64> = (0..n)
        .map(|i| profile.tonic_level + profile.drift_per_s * i as f64 / fs)
        .collect();
    let (tau1, tau2) = (cfg.bateman_tau1_s, cfg.bateman_tau2_s);
    // The kernel is below 1e-9 of its peak after this many decay constants.
    let support = tau2 * 25.0;
    for m in markers {
        let amp = profile.amplitudes[m.event.index()];
        if amp == 0.0 {
            continue;
        }
        let onset = m.t + profile.latencies[m.event.index()];
        let first = ((onset * fs).ceil().max(0.0) as usize).min(n);
        let last = (((onset + support) * fs).ceil() as usize).min(n);
        for (i, v) in x.iter_mut().enumerate().take(last).skip(first) {
            *v += amp * bateman(i as f64 / fs - onset, tau1, tau2);
        }
    }
    if profile.noise_sd > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, profile.noise_sd)
            .map_err(|e| PhysioError::InvalidParameter(e.to_string()))?;
        for v in x.iter_mut() {
            *v += noise.sample(&mut rng);
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcCalibration {
    pub gain: f64,
    pub offset: f64,
}

impl AdcCalibration {
    /// Gain that maps the mean of `baseline` onto `target` a.u.
    pub fn auto(baseline: &[f64], target: f64) -> Result<Self, PhysioError> {
        if baseline.is_empty() {
            return Err(PhysioError::Calibration("empty baseline".into()));
        }
        let mean = baseline.iter().sum::<f64>() / baseline.len() as f64;
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(PhysioError::Calibration(format!(
                "baseline mean {mean} is not positive"
            )));
        }
        Ok(Self {
            gain: target / mean,
            offset: 0.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdcOutput {
    pub samples: Vec<f64>,
    /// Fraction of samples clipped at either rail.
    pub saturation: f64,
}

/// `clamp(round(gain x + offset), 0, full_scale)`.
pub fn adc_quantize(x: &[f64], cal: AdcCalibration, full_scale: f64) -> AdcOutput {
    let mut clipped = 0usize;
    let samples = x
        .iter()
        .map(|v| {
            let raw = (cal.gain * v + cal.offset).round();
            if raw < 0.0 || raw > full_scale {
                clipped += 1;
            }
            raw.clamp(0.0, full_scale)
        })
        .collect();
    let saturation = if x.is_empty() {
        0.0
    } else {
        clipped as f64 / x.len() as f64
    };
    AdcOutput {
        samples,
        saturation,
    }
}

/// Ranges from which synthetic subjects are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortSpec {
    pub n_omn: usize,
    pub n_sel: usize,
    pub seed: u64,
    /// Uniform range of the tonic level (uS).
    pub tonic_range: (f64, f64),
    /// Uniform range of the total drift over the drive, as a fraction of the level.
    pub drift_fraction: (f64, f64),
    /// Response amplitude as a fraction of the tonic level.
    pub amplitude_fraction: f64,
    /// Log-normal sigma of the per-subject responsiveness.
    pub responsiveness_sigma: f64,
    /// Amplitude multiplier per event for OMN and for SEL subjects.
    pub omn_gain: [f64; 7],
    pub sel_gain: [f64; 7],
    pub latency_range: (f64, f64),
    /// Noise standard deviation as a fraction of the tonic level.
    pub noise_fraction: f64,
}

impl CohortSpec {
    /// SEL responds 1.5 times stronger to the five arousing events; neither
    /// group responds to Scooter and Man1.
    pub fn planted(n_omn: usize, n_sel: usize, seed: u64) -> Self {
        let omn = EventId::ALL.map(|e| if e.is_risky() { 1.0 } else { 0.0 });
        let sel = EventId::ALL.map(|e| if e.is_risky() { 1.5 } else { 0.0 });
        Self {
            n_omn,
            n_sel,
            seed,
            tonic_range: (3.0, 12.0),
            drift_fraction: (0.25, 0.35),
            amplitude_fraction: 0.06,
            responsiveness_sigma: 0.2,
            omn_gain: omn,
            sel_gain: sel,
            latency_range: (1.0, 3.0),
            noise_fraction: 0.004,
        }
    }

    /// Both groups share the OMN profile.
    pub fn null(n_omn: usize, n_sel: usize, seed: u64) -> Self {
        let mut spec = Self::planted(n_omn, n_sel, seed);
        spec.sel_gain = spec.omn_gain;
        spec
    }

    /// No event responses at all.
    pub fn silent(n_omn: usize, n_sel: usize, seed: u64) -> Self {
        let mut spec = Self::planted(n_omn, n_sel, seed);
        spec.omn_gain = [0.0; 7];
        spec.sel_gain = [0.0; 7];
        spec
    }

    pub fn validate(&self) -> Result<(), PhysioError> {
        if self.n_omn == 0 || self.n_sel == 0 {
            return Err(PhysioError::InvalidParameter(
                "each group needs at least one subject".into(),
            ));
        }
        let (lo, hi) = self.tonic_range;
        if !(lo > 0.0 && lo <= hi) {
            return Err(PhysioError::InvalidParameter(
                "tonic range must be positive and ordered".into(),
            ));
        }
        let (l0, l1) = self.latency_range;
        if !(1.0 <= l0 && l0 <= l1 && l1 <= 5.0) {
            return Err(PhysioError::InvalidParameter(
                "latency range must lie within [1, 5] s".into(),
            ));
        }
        Ok(())
    }

    pub fn subjects(&self) -> Vec<(u32, Group)> {
        (0..self.n_omn)
            .map(|_| Group::Omn)
            .chain((0..self.n_sel).map(|_| Group::Sel))
            .enumerate()
            .map(|(i, g)| (i as u32 + 1, g))
            .collect()
    }

    /// Seed of subject `k`, independent of the cohort size.
    pub fn subject_seed(&self, subject: u32) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(subject as u64)
    }

    pub fn sample_profile(&self, subject: u32, group: Group, drive_s: f64) -> SubjectProfile {
        let mut rng = ChaCha8Rng::seed_from_u64(self.subject_seed(subject) ^ 0x5EED);
        let level = rng.gen_range(self.tonic_range.0..=self.tonic_range.1);
        let frac = rng.gen_range(self.drift_fraction.0..=self.drift_fraction.1);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let responsiveness = LogNormal::new(0.0, self.responsiveness_sigma)
            .map(|d| d.sample(&mut rng))
            .unwrap_or(1.0);
        let gain = match group {
            Group::Omn => self.omn_gain,
            Group::Sel => self.sel_gain,
        };
        let latencies =
            EventId::ALL.map(|_| rng.gen_range(self.latency_range.0..=self.latency_range.1));
        SubjectProfile {
            tonic_level: level,
            drift_per_s: sign * frac * level / drive_s.max(1.0),
            amplitudes: gain.map(|g| g * self.amplitude_fraction * level * responsiveness),
            latencies,
            noise_sd: self.noise_fraction * level,
        }
    }
}

/// Synthesises, calibrates and digitises one subject's recording. `events`
/// are onsets in drive time; the trace starts with the baseline span.
pub fn subject_trace(
    spec: &CohortSpec,
    subject: u32,
    group: Group,
    events: &[EventMarker],
    drive_s: f64,
    cfg: &PhysioConfig,
) -> Result<(GsrTrace, AdcOutput), PhysioError> {
    let profile = spec.sample_profile(subject, group, drive_s);
    let markers: Vec<EventMarker> = events
        .iter()
        .map(|m| EventMarker {
            event: m.event,
            t: m.t + cfg.baseline_s,
        })
        .collect();
    let analog = synth_gsr(
        &markers,
        cfg.baseline_s + drive_s,
        &profile,
        cfg,
        spec.subject_seed(subject),
    )?;
    let base_n = ((cfg.baseline_s * cfg.sample_rate_hz).round() as usize).min(analog.len());
    let cal = AdcCalibration::auto(&analog[..base_n.max(1)], cfg.adc_target)?;
    let adc = adc_quantize(&analog, cal, cfg.adc_full_scale);
    let trace = GsrTrace {
        subject,
        sample_rate: cfg.sample_rate_hz,
        samples: adc.samples.clone(),
        markers,
        baseline: (0.0, cfg.baseline_s),
    };
    Ok((trace, adc))
}
