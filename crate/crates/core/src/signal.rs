//! Recording domain types and the deterministic trace synthesizer.
//!
//! Traces are uniformly sampled voltage series in millivolts. The synthesizer
//! produces a sinusoidal oscillation whose instantaneous frequency and
//! amplitude ramp to new values after a chemical-addition event, with optional
//! Gaussian noise, slow drift, a mechanical-stimulation spike and a forced
//! cessation branch. Identical inputs (including the seed) yield bit-identical
//! output.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 2.0;
pub const DEFAULT_RANGE_MV: f64 = 39.0;
pub const DEFAULT_NOISE_SD_MV: f64 = 0.02;
pub const DEFAULT_SPIKE_DECAY_S: f64 = 10.0;

/// Uniformly sampled voltage time series in millivolts.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Samples per second; strictly positive.
    pub sample_rate_hz: f64,
    /// Absolute time of the first sample.
    pub start_time_s: f64,
    /// Recorder input range; every sample satisfies |v| <= range_mv.
    pub range_mv: f64,
    /// Voltage values in mV, uniformly spaced by construction.
    pub samples: Vec<f64>,
    /// Free-form key/value metadata (dish id, chemical label, seed).
    pub meta: BTreeMap<String, String>,
}

impl Trace {
    pub fn new(sample_rate_hz: f64, start_time_s: f64, samples: Vec<f64>) -> Result<Self> {
        let trace = Trace {
            sample_rate_hz,
            start_time_s,
            range_mv: DEFAULT_RANGE_MV,
            samples,
            meta: BTreeMap::new(),
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0) || !self.sample_rate_hz.is_finite() {
            return Err(Error::Argument(format!(
                "sample_rate_hz must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if !(self.range_mv > 0.0) {
            return Err(Error::Argument(format!(
                "range_mv must be positive, got {}",
                self.range_mv
            )));
        }
        for (i, v) in self.samples.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Argument(format!("non-finite sample at index {i}")));
            }
            if v.abs() > self.range_mv {
                return Err(Error::Argument(format!(
                    "sample {i} ({v} mV) exceeds range +/- {} mV",
                    self.range_mv
                )));
            }
        }
        Ok(())
    }

    pub fn dt_s(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Absolute time of sample `i`.
    pub fn time_at(&self, i: usize) -> f64 {
        self.start_time_s + i as f64 * self.dt_s()
    }

    /// Absolute time just past the last sample (start time for empty traces).
    pub fn end_time_s(&self) -> f64 {
        if self.samples.is_empty() {
            self.start_time_s
        } else {
            self.time_at(self.samples.len() - 1)
        }
    }

    pub fn contains_time(&self, t: f64) -> bool {
        !self.samples.is_empty() && t >= self.start_time_s && t <= self.end_time_s()
    }
}

/// Timestamped labeled event attached to a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct EventMarker {
    pub time_s: f64,
    pub kind: EventKind,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    ChemicalAdded,
    ArtifactSpike,
    Annotation,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::ChemicalAdded => "chemical_added",
            EventKind::ArtifactSpike => "artifact_spike",
            EventKind::Annotation => "annotation",
        }
    }

    pub fn parse(s: &str) -> Option<EventKind> {
        match s {
            "chemical_added" => Some(EventKind::ChemicalAdded),
            "artifact_spike" => Some(EventKind::ArtifactSpike),
            "annotation" => Some(EventKind::Annotation),
            _ => None,
        }
    }
}

impl EventMarker {
    pub fn chemical_added(time_s: f64, label: impl Into<String>) -> Self {
        EventMarker {
            time_s,
            kind: EventKind::ChemicalAdded,
            label: label.into(),
        }
    }
}

/// Per-chemical response fingerprint: mean and SD of both change ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct ChemicalResponseParams {
    pub name: String,
    pub freq_ratio_mean: f64,
    pub freq_ratio_sd: f64,
    pub amp_ratio_mean: f64,
    pub amp_ratio_sd: f64,
    /// Probability that exposure permanently stops the oscillation.
    pub cessation_probability: f64,
}

impl ChemicalResponseParams {
    pub fn new(
        name: impl Into<String>,
        freq_ratio_mean: f64,
        freq_ratio_sd: f64,
        amp_ratio_mean: f64,
        amp_ratio_sd: f64,
    ) -> Self {
        ChemicalResponseParams {
            name: name.into(),
            freq_ratio_mean,
            freq_ratio_sd,
            amp_ratio_mean,
            amp_ratio_sd,
            cessation_probability: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Validation("chemical name must be non-empty".into()));
        }
        if !(self.freq_ratio_mean > 0.0) || !(self.amp_ratio_mean > 0.0) {
            return Err(Error::Validation(format!(
                "{}: ratio means must be positive",
                self.name
            )));
        }
        if self.freq_ratio_sd < 0.0 || self.amp_ratio_sd < 0.0 {
            return Err(Error::Validation(format!(
                "{}: ratio SDs must be non-negative",
                self.name
            )));
        }
        if !(0.0..=1.0).contains(&self.cessation_probability) {
            return Err(Error::Validation(format!(
                "{}: cessation probability must be in [0,1]",
                self.name
            )));
        }
        Ok(())
    }
}

/// Synthesizer configuration. Optional fields are drawn from the documented
/// baseline ranges when unset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub duration_s: f64,
    pub event_at_s: f64,
    /// Baseline oscillation period; drawn from U[90, 170) s when unset.
    pub baseline_period_s: Option<f64>,
    /// Baseline peak-to-trough amplitude; drawn from U[0.25, 1.0) mV when unset.
    pub baseline_amplitude_mv: Option<f64>,
    pub noise_sd_mv: f64,
    pub drift_mv_per_hour: f64,
    /// Mechanical-stimulation spike height; 5x baseline amplitude when unset.
    pub spike_magnitude_mv: Option<f64>,
    pub spike_decay_s: f64,
    /// Length of the frequency/amplitude ramp, in baseline periods.
    pub transition_periods: f64,
    /// Overrides the chemical's cessation probability when set.
    pub cessation_probability: Option<f64>,
    pub rng_seed: u64,
    pub sample_rate_hz: f64,
    pub range_mv: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            duration_s: 3600.0,
            event_at_s: 1800.0,
            baseline_period_s: None,
            baseline_amplitude_mv: None,
            noise_sd_mv: DEFAULT_NOISE_SD_MV,
            drift_mv_per_hour: 0.0,
            spike_magnitude_mv: None,
            spike_decay_s: DEFAULT_SPIKE_DECAY_S,
            transition_periods: 1.0,
            cessation_probability: None,
            rng_seed: 0,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            range_mv: DEFAULT_RANGE_MV,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::Config("duration_s must be positive".into()));
        }
        if !(self.event_at_s > 0.0 && self.event_at_s < self.duration_s) {
            return Err(Error::Config(format!(
                "event_at_s must lie strictly inside (0, duration_s): {} vs {}",
                self.event_at_s, self.duration_s
            )));
        }
        if let Some(p) = self.baseline_period_s {
            if !(p > 0.0 && p < self.duration_s) {
                return Err(Error::Config(format!(
                    "baseline_period_s must lie in (0, duration_s), got {p}"
                )));
            }
        }
        if let Some(a) = self.baseline_amplitude_mv {
            if !(a > 0.0) {
                return Err(Error::Config(format!(
                    "baseline_amplitude_mv must be positive, got {a}"
                )));
            }
        }
        if self.noise_sd_mv < 0.0 {
            return Err(Error::Config("noise_sd_mv must be non-negative".into()));
        }
        if !(self.spike_decay_s > 0.0) {
            return Err(Error::Config("spike_decay_s must be positive".into()));
        }
        if !(self.transition_periods > 0.0) {
            return Err(Error::Config("transition_periods must be positive".into()));
        }
        if let Some(p) = self.cessation_probability {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!(
                    "cessation_probability must be in [0,1], got {p}"
                )));
            }
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::Config("sample_rate_hz must be positive".into()));
        }
        if !(self.range_mv > 0.0) {
            return Err(Error::Config("range_mv must be positive".into()));
        }
        Ok(())
    }
}

/// What the synthesizer actually drew for one recording; kept alongside the
/// trace so downstream estimates can be checked against it.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub drawn_freq_ratio: f64,
    pub drawn_amp_ratio: f64,
    pub ceased: bool,
    pub baseline_period_s: f64,
    pub baseline_amplitude_mv: f64,
}

fn draw_truncated_positive_normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return mean;
    }
    let dist = Normal::new(mean, sd).expect("validated sd");
    loop {
        let x = dist.sample(rng);
        if x > 0.0 {
            return x;
        }
    }
}

/// Synthesize one recording with a chemical-exposure response.
///
/// The waveform is a phase-continuous sinusoid. Over `transition_periods`
/// baseline periods after the event, instantaneous frequency and amplitude
/// ramp linearly to baseline times the drawn ratios. A one-sided exponential
/// spike is injected at the event. If the cessation draw fires, the post-event
/// envelope decays below the noise floor within two baseline periods.
pub fn synth_trace(
    config: &SynthConfig,
    chem: &ChemicalResponseParams,
) -> Result<(Trace, EventMarker, GroundTruth)> {
    config.validate()?;
    chem.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    // Fixed draw order: period, amplitude, freq ratio, amp ratio, cessation.
    let period = match config.baseline_period_s {
        Some(p) => p,
        None => rng.random_range(90.0..170.0),
    };
    let amplitude_p2t = match config.baseline_amplitude_mv {
        Some(a) => a,
        None => rng.random_range(0.25..1.0),
    };
    if !(period < config.duration_s) {
        return Err(Error::Config(format!(
            "baseline period {period} s does not fit in duration {} s",
            config.duration_s
        )));
    }

    let freq_ratio = draw_truncated_positive_normal(&mut rng, chem.freq_ratio_mean, chem.freq_ratio_sd);
    let amp_ratio = draw_truncated_positive_normal(&mut rng, chem.amp_ratio_mean, chem.amp_ratio_sd);
    let cessation_p = config
        .cessation_probability
        .unwrap_or(chem.cessation_probability);
    let ceased = rng.random::<f64>() < cessation_p;

    let dt = 1.0 / config.sample_rate_hz;
    let n = (config.duration_s * config.sample_rate_hz).round() as usize;
    let half_pre = amplitude_p2t / 2.0;
    let half_post = half_pre * amp_ratio;
    let period_post = period / freq_ratio;
    let spike_mag = config.spike_magnitude_mv.unwrap_or(5.0 * amplitude_p2t);
    let transition_s = config.transition_periods * period;
    // Envelope time constant of a third of a period puts the amplitude below
    // e^-6 of baseline two periods after the event.
    let cessation_tau = period / 3.0;

    let mut samples = Vec::with_capacity(n);
    let mut phase: f64 = 0.0;
    for i in 0..n {
        let t = i as f64 * dt;
        let ramp = if t <= config.event_at_s {
            0.0
        } else {
            ((t - config.event_at_s) / transition_s).min(1.0)
        };
        let inst_period = period + (period_post - period) * ramp;
        let mut envelope = half_pre + (half_post - half_pre) * ramp;
        if ceased && t >= config.event_at_s {
            envelope *= (-(t - config.event_at_s) / cessation_tau).exp();
        }
        let mut v = envelope * phase.sin();
        v += config.drift_mv_per_hour * t / 3600.0;
        if spike_mag != 0.0 && t >= config.event_at_s {
            v += spike_mag * (-(t - config.event_at_s) / config.spike_decay_s).exp();
        }
        if config.noise_sd_mv > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            v += config.noise_sd_mv * z;
        }
        samples.push(v.clamp(-config.range_mv, config.range_mv));
        phase += TAU * dt / inst_period;
    }

    let mut trace = Trace {
        sample_rate_hz: config.sample_rate_hz,
        start_time_s: 0.0,
        range_mv: config.range_mv,
        samples,
        meta: BTreeMap::new(),
    };
    trace.meta.insert("chemical".into(), chem.name.clone());
    trace.meta.insert("seed".into(), config.rng_seed.to_string());

    let event = EventMarker::chemical_added(config.event_at_s, chem.name.clone());
    let truth = GroundTruth {
        drawn_freq_ratio: freq_ratio,
        drawn_amp_ratio: amp_ratio,
        ceased,
        baseline_period_s: period,
        baseline_amplitude_mv: amplitude_p2t,
    };
    Ok((trace, event, truth))
}

/// Add an exponentially decaying transient of initial height `magnitude_mv`
/// at `time_s`. Output is clipped to the trace range.
pub fn inject_artifact(trace: &Trace, time_s: f64, magnitude_mv: f64, decay_s: f64) -> Result<Trace> {
    if !trace.contains_time(time_s) {
        return Err(Error::Argument(format!(
            "artifact time {time_s} s outside trace [{}, {}]",
            trace.start_time_s,
            trace.end_time_s()
        )));
    }
    if !magnitude_mv.is_finite() {
        return Err(Error::Argument("artifact magnitude must be finite".into()));
    }
    if !(decay_s > 0.0) {
        return Err(Error::Argument("artifact decay must be positive".into()));
    }
    let mut out = trace.clone();
    if magnitude_mv == 0.0 {
        return Ok(out);
    }
    let dt = trace.dt_s();
    let first = ((time_s - trace.start_time_s) / dt).ceil() as usize;
    for i in first..out.samples.len() {
        let t = trace.time_at(i);
        let v = out.samples[i] + magnitude_mv * (-(t - time_s) / decay_s).exp();
        out.samples[i] = v.clamp(-trace.range_mv, trace.range_mv);
    }
    Ok(out)
}

/// Add i.i.d. Gaussian noise, deterministic per seed. A zero SD is the identity.
pub fn add_noise(trace: &Trace, sd_mv: f64, seed: u64) -> Result<Trace> {
    if sd_mv < 0.0 {
        return Err(Error::Argument(format!(
            "noise sd must be non-negative, got {sd_mv}"
        )));
    }
    let mut out = trace.clone();
    if sd_mv == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in &mut out.samples {
        let z: f64 = rng.sample(StandardNormal);
        *v = (*v + sd_mv * z).clamp(-trace.range_mv, trace.range_mv);
    }
    Ok(out)
}
