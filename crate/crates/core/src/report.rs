//! Report construction for analysis outcomes, ground truth, classification
//! results and experiment summaries. Key order is fixed so identical inputs
//! render to identical bytes.

use crate::analyzer::{AnalysisOutcome, AnalyzeParams, SegmentStats};
use crate::classifier::ClassificationResult;
use crate::experiment::ExperimentSummary;
use crate::io::Report;
use crate::signal::{GroundTruth, SynthConfig};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

fn push_params(report: &mut Report, params: &AnalyzeParams) {
    report.push("params.smooth_window", params.smooth_window);
    report.push("params.prominence_mv", params.prominence_mv);
    report.push("params.min_period_s", params.min_period_s);
    report.push("params.stability_periods", params.stability_periods);
    report.push("params.stability_cv_max", params.stability_cv_max);
    report.push("params.dead_band_s", params.dead_band_s);
    report.push("params.max_period_s", params.max_period_s);
}

fn push_segment(report: &mut Report, prefix: &str, stats: &SegmentStats) {
    report.push(format!("{prefix}.n_periods"), stats.n_periods);
    report.push(format!("{prefix}.mean_period_s"), stats.mean_period_s);
    report.push(format!("{prefix}.period_cv"), stats.period_cv);
    report.push(format!("{prefix}.mean_amplitude_mv"), stats.mean_amplitude_mv);
    report.push(format!("{prefix}.window.start_s"), stats.window.0);
    report.push(format!("{prefix}.window.end_s"), stats.window.1);
}

/// Structured report for one analysis outcome.
pub fn outcome_report(outcome: &AnalysisOutcome, params: &AnalyzeParams) -> Report {
    let mut r = Report::new();
    r.push("toolkit.version", TOOLKIT_VERSION);
    push_params(&mut r, params);
    match outcome {
        AnalysisOutcome::Measured { pre, post, ratios } => {
            r.push("outcome", "measured");
            push_segment(&mut r, "pre", pre);
            push_segment(&mut r, "post", post);
            r.push("ratios.freq_ratio", ratios.freq_ratio);
            r.push("ratios.amp_ratio", ratios.amp_ratio);
        }
        AnalysisOutcome::Immeasurable { reason } => {
            r.push("outcome", "immeasurable");
            r.push("reason", reason);
        }
        AnalysisOutcome::Cessation { last_peak_s } => {
            r.push("outcome", "cessation");
            r.push("last_peak_s", last_peak_s);
        }
    }
    r
}

/// Ground-truth sidecar for a synthesized recording.
pub fn truth_report(truth: &GroundTruth, config: &SynthConfig, chemical: &str) -> Report {
    let mut r = Report::new();
    r.push("toolkit.version", TOOLKIT_VERSION);
    r.push("chemical", chemical);
    r.push("seed", config.rng_seed);
    r.push("truth.freq_ratio", truth.drawn_freq_ratio);
    r.push("truth.amp_ratio", truth.drawn_amp_ratio);
    r.push("truth.ceased", truth.ceased);
    r.push("truth.baseline_period_s", truth.baseline_period_s);
    r.push("truth.baseline_amplitude_mv", truth.baseline_amplitude_mv);
    r
}

/// Classification result rendered as a report (also the CLI's stdout form).
pub fn classification_report(result: &ClassificationResult) -> Report {
    let mut r = Report::new();
    r.push("toolkit.version", TOOLKIT_VERSION);
    r.push("best", &result.best);
    r.push("distance", result.distance);
    r.push(
        "runner_up",
        result.runner_up.as_deref().unwrap_or("(none)"),
    );
    r.push("margin", result.margin);
    r.push("verdict", result.verdict.as_str());
    for (i, (name, d)) in result.per_chemical.iter().enumerate() {
        r.push(format!("distance.{i}.name"), name);
        r.push(format!("distance.{i}.value"), d);
    }
    r
}

/// Full experiment summary, ordered by chemical then replicate index.
pub fn summary_report(summary: &ExperimentSummary, params: &AnalyzeParams) -> Report {
    let mut r = Report::new();
    r.push("toolkit.version", TOOLKIT_VERSION);
    r.push("base_seed", summary.base_seed);
    r.push("replicates", summary.replicates);
    push_params(&mut r, params);
    for (i, chem) in summary.chemicals.iter().enumerate() {
        let p = format!("chemical.{i}");
        r.push(format!("{p}.name"), &chem.chemical);
        r.push(format!("{p}.seeds_consumed"), chem.seeds_consumed);
        r.push(format!("{p}.discards"), chem.discards);
        r.push(format!("{p}.failed"), chem.aggregate.is_none());
        if let Some(agg) = &chem.aggregate {
            r.push(format!("{p}.estimated.freq_mean"), agg.estimated.freq_ratio_mean);
            r.push(format!("{p}.estimated.freq_sd"), agg.estimated.freq_ratio_sd);
            r.push(format!("{p}.estimated.amp_mean"), agg.estimated.amp_ratio_mean);
            r.push(format!("{p}.estimated.amp_sd"), agg.estimated.amp_ratio_sd);
            r.push(format!("{p}.significance.freq.p_value"), agg.significance.freq.p_value);
            r.push(format!("{p}.significance.freq.p_lt_0_05"), agg.significance.freq.p_lt_0_05);
            r.push(format!("{p}.significance.freq.p_lt_0_1"), agg.significance.freq.p_lt_0_1);
            r.push(format!("{p}.significance.amp.p_value"), agg.significance.amp.p_value);
            r.push(format!("{p}.significance.amp.p_lt_0_05"), agg.significance.amp.p_lt_0_05);
            r.push(format!("{p}.significance.amp.p_lt_0_1"), agg.significance.amp.p_lt_0_1);
            r.push(format!("{p}.comparison.freq_abs_dev"), agg.comparison.freq_abs_dev);
            r.push(format!("{p}.comparison.freq_tolerance"), agg.comparison.freq_tolerance);
            r.push(format!("{p}.comparison.freq_pass"), agg.comparison.freq_pass);
            r.push(format!("{p}.comparison.amp_abs_dev"), agg.comparison.amp_abs_dev);
            r.push(format!("{p}.comparison.amp_tolerance"), agg.comparison.amp_tolerance);
            r.push(format!("{p}.comparison.amp_pass"), agg.comparison.amp_pass);
            r.push(format!("{p}.comparison.pass"), agg.comparison.pass);
        }
    }
    r.push(
        "failed_chemicals",
        summary.failed_chemicals().len(),
    );
    r
}
