//! Oscillation measurement: peak/trough detection, the five-period stability
//! gate, pre/post event segmentation and relative change ratios.
//!
//! The pipeline mirrors the manual peak-to-peak procedure: smooth, detect
//! prominent extrema, gate on five stable periods before the event, skip a
//! dead-band after it, then compare mean period and mean peak-to-trough
//! amplitude across the event. Ratio direction is fixed so that a value
//! greater than 1 means an increase.

use crate::error::{Error, Result};
use crate::signal::{EventKind, EventMarker, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Peak,
    Trough,
}

/// One detected local extremum.
#[derive(Debug, Clone, PartialEq)]
pub struct Extremum {
    pub time_s: f64,
    pub value_mv: f64,
    pub kind: ExtremumKind,
    pub prominence_mv: f64,
    /// Narrow transients (mechanical spikes) are flagged and excluded from
    /// period/amplitude statistics.
    pub artifact: bool,
}

/// Time-ordered extrema; peaks and troughs alternate once artifacts are
/// excluded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtremumList {
    pub extrema: Vec<Extremum>,
}

impl ExtremumList {
    pub fn is_empty(&self) -> bool {
        self.extrema.is_empty()
    }

    pub fn len(&self) -> usize {
        self.extrema.len()
    }

    pub fn peaks(&self) -> impl Iterator<Item = &Extremum> {
        self.extrema
            .iter()
            .filter(|e| !e.artifact && e.kind == ExtremumKind::Peak)
    }

    pub fn troughs(&self) -> impl Iterator<Item = &Extremum> {
        self.extrema
            .iter()
            .filter(|e| !e.artifact && e.kind == ExtremumKind::Trough)
    }
}

/// Period/amplitude statistics over one analysis window.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentStats {
    pub n_periods: usize,
    pub mean_period_s: f64,
    pub period_cv: f64,
    pub mean_amplitude_mv: f64,
    pub window: (f64, f64),
}

/// The (frequency ratio, amplitude ratio) feature pair of one recording.
/// Both are post-over-pre in the increase direction: ratio > 1 means the
/// quantity went up after the chemical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangeRatios {
    pub freq_ratio: f64,
    pub amp_ratio: f64,
}

/// Immeasurable reasons, kept as stable strings in reports.
pub const REASON_NO_EXTREMA: &str = "no-extrema";
pub const REASON_NO_PRE_STABILITY: &str = "no-pre-stability";
pub const REASON_TOO_FEW_POST_PERIODS: &str = "too-few-post-periods";
pub const REASON_NO_EVENT: &str = "no-event";

#[derive(Debug, Clone, PartialEq)]
pub enum AnalysisOutcome {
    Measured {
        pre: SegmentStats,
        post: SegmentStats,
        ratios: ChangeRatios,
    },
    Immeasurable {
        reason: String,
    },
    Cessation {
        last_peak_s: f64,
    },
}

/// Analyzer parameters; defaults mirror the manual procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeParams {
    pub smooth_window: usize,
    pub prominence_mv: f64,
    pub min_period_s: f64,
    /// Consecutive periods required by the stability gate.
    pub stability_periods: usize,
    pub stability_cv_max: f64,
    /// Skipped after the event to clear the mechanical-stimulation spike.
    pub dead_band_s: f64,
    /// Upper bound on plausible oscillation period, used by the cessation test.
    pub max_period_s: f64,
}

impl Default for AnalyzeParams {
    fn default() -> Self {
        AnalyzeParams {
            smooth_window: 5,
            prominence_mv: 0.05,
            min_period_s: 20.0,
            stability_periods: 5,
            stability_cv_max: 0.15,
            dead_band_s: 60.0,
            max_period_s: 170.0,
        }
    }
}

/// Centered moving average; edges shrink symmetrically so the output length
/// equals the input length and constants are preserved.
pub fn smooth(trace: &Trace, window_samples: usize) -> Result<Trace> {
    if window_samples == 0 || window_samples % 2 == 0 {
        return Err(Error::Argument(format!(
            "smoothing window must be odd and >= 1, got {window_samples}"
        )));
    }
    if window_samples > trace.samples.len() {
        return Err(Error::Argument(format!(
            "smoothing window {window_samples} exceeds trace length {}",
            trace.samples.len()
        )));
    }
    if window_samples == 1 {
        return Ok(trace.clone());
    }
    let half = window_samples / 2;
    let n = trace.samples.len();
    let mut out = trace.clone();
    for i in 0..n {
        let k = half.min(i).min(n - 1 - i);
        let lo = i - k;
        let hi = i + k;
        let sum: f64 = trace.samples[lo..=hi].iter().sum();
        out.samples[i] = sum / (hi - lo + 1) as f64;
    }
    Ok(out)
}

fn local_extrema_indices(x: &[f64], maxima: bool) -> Vec<usize> {
    let cmp = |a: f64, b: f64| if maxima { a > b } else { a < b };
    let mut out = Vec::new();
    let n = x.len();
    if n < 3 {
        return out;
    }
    let mut i = 1;
    while i < n - 1 {
        if cmp(x[i], x[i - 1]) {
            // Walk over any plateau.
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && cmp(x[i], x[j + 1]) {
                out.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Topographic prominence of the extremum at `idx`.
fn prominence(x: &[f64], idx: usize, maxima: bool) -> f64 {
    let sign = if maxima { 1.0 } else { -1.0 };
    let v = sign * x[idx];
    let mut left_min = v;
    for i in (0..idx).rev() {
        let y = sign * x[i];
        if y > v {
            break;
        }
        left_min = left_min.min(y);
    }
    let mut right_min = v;
    for i in idx + 1..x.len() {
        let y = sign * x[i];
        if y > v {
            break;
        }
        right_min = right_min.min(y);
    }
    v - left_min.max(right_min)
}

/// Width of the excursion around `idx` at a quarter of its prominence below
/// the extremum value (above, for troughs), with linear interpolation at the
/// crossings. Narrow spikes come out much narrower than genuine oscillation
/// peaks.
fn excursion_width_s(x: &[f64], idx: usize, prom: f64, maxima: bool, dt: f64) -> f64 {
    let sign = if maxima { 1.0 } else { -1.0 };
    let v = sign * x[idx];
    let level = v - prom / 4.0;

    let mut left = 0.0f64;
    for i in (0..idx).rev() {
        let y = sign * x[i];
        if y < level {
            let prev = sign * x[i + 1];
            let frac = (prev - level) / (prev - y);
            left = (idx - i) as f64 - 1.0 + frac;
            break;
        }
        if i == 0 {
            left = idx as f64;
        }
    }
    let mut right = 0.0f64;
    for i in idx + 1..x.len() {
        let y = sign * x[i];
        if y < level {
            let prev = sign * x[i - 1];
            let frac = (prev - level) / (prev - y);
            right = (i - idx) as f64 - 1.0 + frac;
            break;
        }
        if i == x.len() - 1 {
            right = (x.len() - 1 - idx) as f64;
        }
    }
    (left + right) * dt
}

/// Detect alternating prominent maxima and minima. Extrema whose surrounding
/// excursion is narrower than `min_period_s / 4` are flagged as artifacts and
/// excluded from the alternation; of two same-kind neighbours the weaker one
/// is dropped.
pub fn detect_extrema(trace: &Trace, prominence_mv: f64, min_period_s: f64) -> Result<ExtremumList> {
    if !(prominence_mv > 0.0) {
        return Err(Error::Argument(format!(
            "prominence must be positive, got {prominence_mv}"
        )));
    }
    if !(min_period_s > 2.0 / trace.sample_rate_hz) {
        return Err(Error::Argument(format!(
            "min_period_s must exceed two sample intervals ({} s)",
            2.0 / trace.sample_rate_hz
        )));
    }
    let x = &trace.samples;
    let dt = trace.dt_s();

    let mut candidates: Vec<Extremum> = Vec::new();
    for (maxima, kind) in [(true, ExtremumKind::Peak), (false, ExtremumKind::Trough)] {
        for idx in local_extrema_indices(x, maxima) {
            let prom = prominence(x, idx, maxima);
            if prom < prominence_mv {
                continue;
            }
            let width = excursion_width_s(x, idx, prom, maxima, dt);
            candidates.push(Extremum {
                time_s: trace.time_at(idx),
                value_mv: x[idx],
                kind,
                prominence_mv: prom,
                artifact: width < min_period_s / 4.0,
            });
        }
    }
    candidates.sort_by(|a, b| a.time_s.partial_cmp(&b.time_s).unwrap());

    // Enforce alternation among the non-artifact extrema: keep the stronger
    // of two consecutive same-kind entries.
    let mut kept: Vec<Extremum> = Vec::new();
    for e in candidates {
        if e.artifact {
            kept.push(e);
            continue;
        }
        let prev = kept.iter().rposition(|k| !k.artifact);
        match prev {
            Some(p) if kept[p].kind == e.kind => {
                let replace = match e.kind {
                    ExtremumKind::Peak => e.value_mv > kept[p].value_mv,
                    ExtremumKind::Trough => e.value_mv < kept[p].value_mv,
                };
                if replace {
                    kept.remove(p);
                    kept.push(e);
                }
            }
            _ => kept.push(e),
        }
    }
    Ok(ExtremumList { extrema: kept })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Amplitude of one peak: peak value minus the mean of its adjacent trough
/// values. Troughs outside the stats window are ignored so transition
/// oscillations do not leak in; a single adjacent trough is used at the edges.
fn peak_amplitude(
    extrema: &ExtremumList,
    peak_time: f64,
    peak_value: f64,
    window: (f64, f64),
) -> Option<f64> {
    let in_window = |t: &&Extremum| t.time_s >= window.0 && t.time_s <= window.1;
    let before = extrema
        .troughs()
        .filter(in_window)
        .filter(|t| t.time_s < peak_time)
        .last()
        .map(|t| t.value_mv);
    let after = extrema
        .troughs()
        .filter(in_window)
        .find(|t| t.time_s > peak_time)
        .map(|t| t.value_mv);
    match (before, after) {
        (Some(a), Some(b)) => Some(peak_value - (a + b) / 2.0),
        (Some(a), None) | (None, Some(a)) => Some(peak_value - a),
        (None, None) => None,
    }
}

/// Period and amplitude statistics over the non-artifact peaks inside the
/// given window. Only troughs inside the window count as adjacent.
pub fn segment_stats(
    extrema: &ExtremumList,
    window_start_s: f64,
    window_end_s: f64,
) -> Result<SegmentStats> {
    if !(window_end_s > window_start_s) {
        return Err(Error::Argument(format!(
            "invalid window [{window_start_s}, {window_end_s}]"
        )));
    }
    let peaks: Vec<&Extremum> = extrema
        .peaks()
        .filter(|p| p.time_s >= window_start_s && p.time_s <= window_end_s)
        .collect();
    if peaks.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 peaks in window, found {}",
            peaks.len()
        )));
    }
    let intervals: Vec<f64> = peaks.windows(2).map(|w| w[1].time_s - w[0].time_s).collect();
    let mean_period = mean(&intervals);
    let cv = sample_sd(&intervals) / mean_period;
    let amplitudes: Vec<f64> = peaks
        .iter()
        .filter_map(|p| peak_amplitude(extrema, p.time_s, p.value_mv, (window_start_s, window_end_s)))
        .collect();
    if amplitudes.is_empty() {
        return Err(Error::InsufficientData(
            "no troughs adjacent to any peak in window".into(),
        ));
    }
    Ok(SegmentStats {
        n_periods: intervals.len(),
        mean_period_s: mean_period,
        period_cv: cv,
        mean_amplitude_mv: mean(&amplitudes),
        window: (window_start_s, window_end_s),
    })
}

/// Earliest time after which `n_periods` consecutive periods have a
/// coefficient of variation at most `cv_max`; `None` if never achieved.
pub fn detect_stability(extrema: &ExtremumList, n_periods: usize, cv_max: f64) -> Option<f64> {
    if !(cv_max > 0.0) || n_periods == 0 {
        return None;
    }
    let peaks: Vec<f64> = extrema.peaks().map(|p| p.time_s).collect();
    if peaks.len() < n_periods + 1 {
        return None;
    }
    let intervals: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
    for start in 0..=intervals.len() - n_periods {
        let w = &intervals[start..start + n_periods];
        if sample_sd(w) / mean(w) <= cv_max {
            return Some(peaks[start + n_periods]);
        }
    }
    None
}

/// freq_ratio = pre period / post period; amp_ratio = post amplitude /
/// pre amplitude. Both are > 1 exactly when the quantity increased.
pub fn compute_change_ratios(pre: &SegmentStats, post: &SegmentStats) -> ChangeRatios {
    ChangeRatios {
        freq_ratio: pre.mean_period_s / post.mean_period_s,
        amp_ratio: post.mean_amplitude_mv / pre.mean_amplitude_mv,
    }
}

/// True iff no non-artifact peak occurs in the final `2 * max_period_s` of the
/// trace while peaks existed earlier.
pub fn detect_cessation(extrema: &ExtremumList, trace_end_s: f64, max_period_s: f64) -> bool {
    if !(max_period_s > 0.0) {
        return false;
    }
    let cutoff = trace_end_s - 2.0 * max_period_s;
    let mut any = false;
    for p in extrema.peaks() {
        any = true;
        if p.time_s > cutoff {
            return false;
        }
    }
    any
}

/// Find the last run of `n_periods` consecutive stable periods whose peaks all
/// lie at or before `before_s`. Returns the window (first peak, last peak).
fn last_stable_run(
    extrema: &ExtremumList,
    before_s: f64,
    n_periods: usize,
    cv_max: f64,
) -> Option<(f64, f64)> {
    let peaks: Vec<f64> = extrema
        .peaks()
        .map(|p| p.time_s)
        .filter(|t| *t <= before_s)
        .collect();
    if peaks.len() < n_periods + 1 {
        return None;
    }
    let intervals: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
    for start in (0..=intervals.len() - n_periods).rev() {
        let w = &intervals[start..start + n_periods];
        if sample_sd(w) / mean(w) <= cv_max {
            return Some((peaks[start], peaks[start + n_periods]));
        }
    }
    None
}

/// Full measurement pipeline around a chemical-addition event.
pub fn analyze(trace: &Trace, event: &EventMarker, params: &AnalyzeParams) -> Result<AnalysisOutcome> {
    if event.kind != EventKind::ChemicalAdded {
        return Err(Error::Argument(format!(
            "analysis event must be chemical_added, got {}",
            event.kind.as_str()
        )));
    }
    if !trace.contains_time(event.time_s) {
        return Err(Error::Argument(format!(
            "event at {} s outside trace [{}, {}]",
            event.time_s,
            trace.start_time_s,
            trace.end_time_s()
        )));
    }
    let smoothed = smooth(trace, params.smooth_window)?;
    let extrema = detect_extrema(&smoothed, params.prominence_mv, params.min_period_s)?;
    if extrema.peaks().next().is_none() {
        return Ok(AnalysisOutcome::Immeasurable {
            reason: REASON_NO_EXTREMA.into(),
        });
    }

    let pre_window = match last_stable_run(
        &extrema,
        event.time_s,
        params.stability_periods,
        params.stability_cv_max,
    ) {
        Some(w) => w,
        None => {
            return Ok(AnalysisOutcome::Immeasurable {
                reason: REASON_NO_PRE_STABILITY.into(),
            })
        }
    };
    let pre = segment_stats(&extrema, pre_window.0, pre_window.1)?;

    if detect_cessation(&extrema, trace.end_time_s(), params.max_period_s) {
        let last_peak_s = extrema
            .peaks()
            .map(|p| p.time_s)
            .fold(f64::MIN, f64::max);
        return Ok(AnalysisOutcome::Cessation { last_peak_s });
    }

    // First five measurable periods after the event plus dead-band.
    let post_start = event.time_s + params.dead_band_s;
    let post_peaks: Vec<f64> = extrema
        .peaks()
        .map(|p| p.time_s)
        .filter(|t| *t >= post_start)
        .take(params.stability_periods + 1)
        .collect();
    if post_peaks.len() < params.stability_periods + 1 {
        return Ok(AnalysisOutcome::Immeasurable {
            reason: REASON_TOO_FEW_POST_PERIODS.into(),
        });
    }
    let post = segment_stats(&extrema, post_peaks[0], *post_peaks.last().unwrap())?;
    let ratios = compute_change_ratios(&pre, &post);
    Ok(AnalysisOutcome::Measured { pre, post, ratios })
}

/// Status transitions emitted by the incremental analyzer.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamStatus {
    StabilityAchieved { time_s: f64 },
    EventSeen { time_s: f64, label: String },
    OutcomeReady,
}

/// Incremental consumer over an ordered sample stream. Feed samples and
/// events in time order, then call `finish` for an outcome identical to the
/// offline `analyze` on the accumulated trace.
#[derive(Debug, Clone)]
pub struct StreamingAnalyzer {
    params: AnalyzeParams,
    start_time_s: f64,
    dt_s: Option<f64>,
    samples: Vec<f64>,
    event: Option<EventMarker>,
    stability_seen: bool,
}

const STABILITY_CHECK_STRIDE: usize = 256;

impl StreamingAnalyzer {
    pub fn new(params: AnalyzeParams) -> Self {
        StreamingAnalyzer {
            params,
            start_time_s: 0.0,
            dt_s: None,
            samples: Vec::new(),
            event: None,
            stability_seen: false,
        }
    }

    pub fn push_sample(&mut self, time_s: f64, value_mv: f64) -> Result<Option<StreamStatus>> {
        if !value_mv.is_finite() {
            return Err(Error::Format(format!("non-finite sample at {time_s} s")));
        }
        match self.samples.len() {
            0 => self.start_time_s = time_s,
            1 => {
                let dt = time_s - self.start_time_s;
                if !(dt > 0.0) {
                    return Err(Error::Format(format!(
                        "non-increasing sample times at {time_s} s"
                    )));
                }
                self.dt_s = Some(dt);
            }
            i => {
                let dt = self.dt_s.expect("set on second sample");
                let expected = self.start_time_s + i as f64 * dt;
                if (time_s - expected).abs() > 1e-6 {
                    return Err(Error::Format(format!(
                        "non-uniform sample time {time_s} s, expected {expected} s"
                    )));
                }
            }
        }
        self.samples.push(value_mv);

        if !self.stability_seen && self.samples.len() % STABILITY_CHECK_STRIDE == 0 {
            if let Some(t) = self.stability_time()? {
                self.stability_seen = true;
                return Ok(Some(StreamStatus::StabilityAchieved { time_s: t }));
            }
        }
        Ok(None)
    }

    pub fn push_event(&mut self, marker: EventMarker) -> Option<StreamStatus> {
        if marker.kind == EventKind::ChemicalAdded && self.event.is_none() {
            let status = StreamStatus::EventSeen {
                time_s: marker.time_s,
                label: marker.label.clone(),
            };
            self.event = Some(marker);
            return Some(status);
        }
        None
    }

    fn current_trace(&self) -> Option<Trace> {
        let dt = self.dt_s?;
        Some(Trace {
            sample_rate_hz: 1.0 / dt,
            start_time_s: self.start_time_s,
            range_mv: crate::signal::DEFAULT_RANGE_MV,
            samples: self.samples.clone(),
            meta: Default::default(),
        })
    }

    fn stability_time(&self) -> Result<Option<f64>> {
        let trace = match self.current_trace() {
            Some(t) if t.samples.len() >= self.params.smooth_window => t,
            _ => return Ok(None),
        };
        let smoothed = smooth(&trace, self.params.smooth_window)?;
        let extrema = detect_extrema(&smoothed, self.params.prominence_mv, self.params.min_period_s)?;
        Ok(detect_stability(
            &extrema,
            self.params.stability_periods,
            self.params.stability_cv_max,
        ))
    }

    /// Final outcome over everything received so far.
    pub fn finish(&self) -> Result<AnalysisOutcome> {
        let event = match &self.event {
            Some(e) => e.clone(),
            None => {
                return Ok(AnalysisOutcome::Immeasurable {
                    reason: REASON_NO_EVENT.into(),
                })
            }
        };
        let trace = match self.current_trace() {
            Some(t) => t,
            None => {
                return Ok(AnalysisOutcome::Immeasurable {
                    reason: REASON_NO_EXTREMA.into(),
                })
            }
        };
        analyze(&trace, &event, &self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{inject_artifact, synth_trace, ChemicalResponseParams, SynthConfig};
    use approx::assert_relative_eq;

    fn sine_trace(period: f64, amp_p2t: f64, duration: f64) -> Trace {
        let rate = 2.0;
        let n = (duration * rate) as usize;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                (amp_p2t / 2.0) * (std::f64::consts::TAU * t / period).sin()
            })
            .collect();
        Trace::new(rate, 0.0, samples).unwrap()
    }

    fn make_extrema(peaks: &[f64], troughs: &[(f64, f64)], amp: f64) -> ExtremumList {
        let mut extrema: Vec<Extremum> = peaks
            .iter()
            .map(|&t| Extremum {
                time_s: t,
                value_mv: amp / 2.0,
                kind: ExtremumKind::Peak,
                prominence_mv: amp,
                artifact: false,
            })
            .collect();
        extrema.extend(troughs.iter().map(|&(t, v)| Extremum {
            time_s: t,
            value_mv: v,
            kind: ExtremumKind::Trough,
            prominence_mv: amp,
            artifact: false,
        }));
        extrema.sort_by(|a, b| a.time_s.partial_cmp(&b.time_s).unwrap());
        ExtremumList { extrema }
    }

    #[test]
    fn smooth_identity_constant_and_impulse() {
        let trace = Trace::new(2.0, 0.0, vec![1.5; 32]).unwrap();
        assert_eq!(smooth(&trace, 1).unwrap().samples, trace.samples);
        assert_eq!(smooth(&trace, 7).unwrap().samples, trace.samples);

        let mut impulse = vec![0.0; 21];
        impulse[10] = 1.0;
        let trace = Trace::new(2.0, 0.0, impulse).unwrap();
        let out = smooth(&trace, 5).unwrap();
        assert_relative_eq!(out.samples[10], 0.2);

        assert!(smooth(&trace, 4).is_err());
        assert!(smooth(&trace, 23).is_err());
    }

    #[test]
    fn sine_extrema_are_evenly_spaced_and_alternate() {
        let trace = sine_trace(120.0, 0.5, 1200.0);
        let list = detect_extrema(&trace, 0.1, 20.0).unwrap();
        let peaks: Vec<f64> = list.peaks().map(|p| p.time_s).collect();
        assert!(peaks.len() >= 8);
        for w in peaks.windows(2) {
            assert!((w[1] - w[0] - 120.0).abs() <= 0.5);
        }
        // Troughs midway between peaks.
        for t in list.troughs() {
            let nearest = peaks
                .iter()
                .map(|p| (p - t.time_s).abs())
                .fold(f64::MAX, f64::min);
            assert!((nearest - 60.0).abs() <= 0.5, "trough offset {nearest}");
        }
        // Alternation among non-artifact extrema.
        let kinds: Vec<ExtremumKind> = list
            .extrema
            .iter()
            .filter(|e| !e.artifact)
            .map(|e| e.kind)
            .collect();
        for w in kinds.windows(2) {
            assert_ne!(w[0], w[1]);
        }
    }

    #[test]
    fn constant_trace_has_no_extrema() {
        let trace = Trace::new(2.0, 0.0, vec![0.3; 400]).unwrap();
        let list = detect_extrema(&trace, 0.05, 20.0).unwrap();
        assert!(list.is_empty());
    }

    #[test]
    fn injected_spike_is_flagged_artifact_and_leaves_spacing_intact() {
        let clean = sine_trace(120.0, 0.5, 1200.0);
        // Spike lands just after a genuine peak so its tail has decayed well
        // before the next one.
        let spiked = inject_artifact(&clean, 547.0, 5.0, 10.0).unwrap();

        let clean_list = detect_extrema(&clean, 0.1, 20.0).unwrap();
        let spiked_list = detect_extrema(&spiked, 0.1, 20.0).unwrap();

        let artifacts: Vec<&Extremum> =
            spiked_list.extrema.iter().filter(|e| e.artifact).collect();
        assert_eq!(artifacts.len(), 1, "artifacts: {artifacts:?}");
        assert!((artifacts[0].time_s - 547.0).abs() <= 5.0);

        let clean_peaks: Vec<f64> = clean_list.peaks().map(|p| p.time_s).collect();
        let spiked_peaks: Vec<f64> = spiked_list.peaks().map(|p| p.time_s).collect();
        assert_eq!(clean_peaks.len(), spiked_peaks.len());
        for (a, b) in clean_peaks.iter().zip(&spiked_peaks) {
            assert!((a - b).abs() <= 0.5, "{a} vs {b}");
        }
    }

    #[test]
    fn segment_stats_arithmetic() {
        let list = make_extrema(
            &[30.0, 150.0, 270.0],
            &[(90.0, -0.25), (210.0, -0.25), (330.0, -0.25)],
            0.5,
        );
        let stats = segment_stats(&list, 0.0, 300.0).unwrap();
        assert_eq!(stats.n_periods, 2);
        assert_relative_eq!(stats.mean_period_s, 120.0);
        assert_relative_eq!(stats.mean_amplitude_mv, 0.5);
    }

    #[test]
    fn segment_stats_cv_of_uneven_intervals() {
        let list = make_extrema(
            &[0.0, 100.0, 210.0, 330.0],
            &[(50.0, -0.25), (150.0, -0.25), (270.0, -0.25), (380.0, -0.25)],
            0.5,
        );
        let stats = segment_stats(&list, 0.0, 330.0).unwrap();
        assert_eq!(stats.n_periods, 3);
        assert_relative_eq!(stats.mean_period_s, 110.0);
        assert_relative_eq!(stats.period_cv, 10.0 / 110.0, max_relative = 1e-12);
    }

    #[test]
    fn segment_stats_needs_two_peaks() {
        let list = make_extrema(&[30.0], &[(90.0, -0.25)], 0.5);
        assert!(matches!(
            segment_stats(&list, 0.0, 300.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn stability_on_perfect_sine_is_sixth_peak() {
        let trace = sine_trace(120.0, 0.5, 1200.0);
        let list = detect_extrema(&trace, 0.1, 20.0).unwrap();
        let peaks: Vec<f64> = list.peaks().map(|p| p.time_s).collect();
        let t = detect_stability(&list, 5, 0.15).unwrap();
        assert_eq!(t, peaks[5]);
    }

    #[test]
    fn drifting_period_never_stabilizes() {
        // Intervals growing 40% each period keep the CV above any sane gate.
        let mut peaks = vec![0.0];
        let mut interval = 30.0;
        for _ in 0..12 {
            peaks.push(peaks.last().unwrap() + interval);
            interval *= 1.4;
        }
        let troughs: Vec<(f64, f64)> = peaks.windows(2).map(|w| ((w[0] + w[1]) / 2.0, -0.25)).collect();
        let list = make_extrema(&peaks, &troughs, 0.5);
        assert!(detect_stability(&list, 5, 0.05).is_none());
    }

    #[test]
    fn stability_after_noisy_prefix_matches_brute_force() {
        // Three ragged periods then clean 120 s periods.
        let mut peaks = vec![0.0, 70.0, 230.0, 290.0];
        for i in 1..=8 {
            peaks.push(290.0 + 120.0 * i as f64);
        }
        let troughs: Vec<(f64, f64)> =
            peaks.windows(2).map(|w| ((w[0] + w[1]) / 2.0, -0.25)).collect();
        let list = make_extrema(&peaks, &troughs, 0.5);
        let got = detect_stability(&list, 5, 0.15).unwrap();

        // Brute-force oracle: first window of 5 intervals with CV <= gate.
        let intervals: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
        let mut expected = None;
        for s in 0..=intervals.len() - 5 {
            let w = &intervals[s..s + 5];
            let m = w.iter().sum::<f64>() / 5.0;
            let sd = (w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0).sqrt();
            if sd / m <= 0.15 {
                expected = Some(peaks[s + 5]);
                break;
            }
        }
        assert_eq!(got, expected.unwrap());
        assert!(got > 290.0);
    }

    #[test]
    fn change_ratio_definitions() {
        let mk = |period: f64, amp: f64| SegmentStats {
            n_periods: 5,
            mean_period_s: period,
            period_cv: 0.0,
            mean_amplitude_mv: amp,
            window: (0.0, 1.0),
        };
        let r = compute_change_ratios(&mk(150.0, 0.8), &mk(120.0, 0.4));
        assert_relative_eq!(r.freq_ratio, 1.25);
        assert_relative_eq!(r.amp_ratio, 0.5);
        let id = compute_change_ratios(&mk(120.0, 0.5), &mk(120.0, 0.5));
        assert_relative_eq!(id.freq_ratio, 1.0);
        assert_relative_eq!(id.amp_ratio, 1.0);
    }

    #[test]
    fn cessation_detection_cases() {
        let healthy = sine_trace(120.0, 0.5, 2400.0);
        let list = detect_extrema(&healthy, 0.1, 20.0).unwrap();
        assert!(!detect_cessation(&list, 2400.0, 170.0));

        // Peaks stop at 1000 s in a 2400 s trace.
        let peaks: Vec<f64> = (0..8).map(|i| 100.0 + 120.0 * i as f64).collect();
        let troughs: Vec<(f64, f64)> =
            peaks.windows(2).map(|w| ((w[0] + w[1]) / 2.0, -0.25)).collect();
        let stopped = make_extrema(&peaks, &troughs, 0.5);
        assert!(detect_cessation(&stopped, 2400.0, 170.0));

        assert!(!detect_cessation(&ExtremumList::default(), 2400.0, 170.0));
    }

    #[test]
    fn analyze_recovers_fixed_ratios() {
        let chem = ChemicalResponseParams::new("fixed", 1.25, 0.0, 0.5, 0.0);
        let config = SynthConfig {
            baseline_period_s: Some(120.0),
            baseline_amplitude_mv: Some(0.5),
            noise_sd_mv: 0.0,
            ..SynthConfig::default()
        };
        let (trace, event, _) = synth_trace(&config, &chem).unwrap();
        let outcome = analyze(&trace, &event, &AnalyzeParams::default()).unwrap();
        match outcome {
            AnalysisOutcome::Measured { ratios, .. } => {
                assert!((ratios.freq_ratio - 1.25).abs() <= 0.02, "{ratios:?}");
                assert!((ratios.amp_ratio - 0.5).abs() <= 0.02, "{ratios:?}");
            }
            other => panic!("expected Measured, got {other:?}"),
        }
    }

    #[test]
    fn analyze_reports_forced_cessation() {
        let chem = ChemicalResponseParams::new("fixed", 1.0, 0.0, 1.0, 0.0);
        let config = SynthConfig {
            baseline_period_s: Some(120.0),
            baseline_amplitude_mv: Some(0.5),
            noise_sd_mv: 0.0,
            cessation_probability: Some(1.0),
            ..SynthConfig::default()
        };
        let (trace, event, truth) = synth_trace(&config, &chem).unwrap();
        assert!(truth.ceased);
        let outcome = analyze(&trace, &event, &AnalyzeParams::default()).unwrap();
        assert!(matches!(outcome, AnalysisOutcome::Cessation { .. }), "{outcome:?}");
    }

    #[test]
    fn analyze_short_post_window_is_immeasurable() {
        let chem = ChemicalResponseParams::new("fixed", 1.0, 0.0, 1.0, 0.0);
        let config = SynthConfig {
            duration_s: 2000.0,
            event_at_s: 1800.0,
            baseline_period_s: Some(120.0),
            baseline_amplitude_mv: Some(0.5),
            noise_sd_mv: 0.0,
            ..SynthConfig::default()
        };
        let (trace, event, _) = synth_trace(&config, &chem).unwrap();
        let outcome = analyze(&trace, &event, &AnalyzeParams::default()).unwrap();
        assert_eq!(
            outcome,
            AnalysisOutcome::Immeasurable {
                reason: REASON_TOO_FEW_POST_PERIODS.into()
            }
        );
    }

    #[test]
    fn analyze_rejects_event_outside_trace() {
        let trace = sine_trace(120.0, 0.5, 600.0);
        let event = EventMarker::chemical_added(900.0, "x");
        assert!(matches!(
            analyze(&trace, &event, &AnalyzeParams::default()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn streaming_matches_offline() {
        let chem = ChemicalResponseParams::new("fixed", 1.25, 0.0, 0.5, 0.0);
        let config = SynthConfig {
            baseline_period_s: Some(120.0),
            baseline_amplitude_mv: Some(0.5),
            noise_sd_mv: 0.02,
            rng_seed: 3,
            ..SynthConfig::default()
        };
        let (trace, event, _) = synth_trace(&config, &chem).unwrap();
        let offline = analyze(&trace, &event, &AnalyzeParams::default()).unwrap();

        let mut inc = StreamingAnalyzer::new(AnalyzeParams::default());
        let mut saw_stability = false;
        let mut saw_event = false;
        for (i, v) in trace.samples.iter().enumerate() {
            let t = trace.time_at(i);
            if !saw_event && t >= event.time_s {
                saw_event = inc.push_event(event.clone()).is_some();
            }
            if let Some(StreamStatus::StabilityAchieved { .. }) = inc.push_sample(t, *v).unwrap() {
                saw_stability = true;
            }
        }
        assert!(saw_stability);
        assert!(saw_event);
        assert_eq!(inc.finish().unwrap(), offline);
    }

    #[test]
    fn streaming_without_event_is_immeasurable() {
        let mut inc = StreamingAnalyzer::new(AnalyzeParams::default());
        for i in 0..100 {
            inc.push_sample(i as f64 * 0.5, 0.0).unwrap();
        }
        assert_eq!(
            inc.finish().unwrap(),
            AnalysisOutcome::Immeasurable {
                reason: REASON_NO_EVENT.into()
            }
        );
    }
}
