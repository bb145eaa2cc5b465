//! Sensor-analytics toolkit for Physarum extracellular-potential recordings:
//! synthesize traces with chemical-exposure responses, extract frequency and
//! amplitude change ratios, identify chemicals against a fingerprint library,
//! and replay or watch recordings over a line-oriented stream protocol.

pub mod analyzer;
pub mod classifier;
pub mod error;
pub mod experiment;
pub mod io;
pub mod report;
pub mod signal;
pub mod stream;

pub use analyzer::{
    analyze, compute_change_ratios, detect_cessation, detect_extrema, detect_stability,
    segment_stats, smooth, AnalysisOutcome, AnalyzeParams, ChangeRatios, Extremum, ExtremumKind,
    ExtremumList, SegmentStats, StreamStatus, StreamingAnalyzer,
};
pub use classifier::{
    aggregate_replicates, classify, compare_to_reference, default_table, mahalanobis_distance,
    t_test_vs_null, ClassificationResult, ComparisonReport, FingerprintTable, QuantityStats,
    ReplicateSet, SignificanceReport, Verdict,
};
pub use error::{Error, Result};
pub use experiment::{
    run_experiment, AggregateResult, ChemicalExperiment, ExperimentPlan, ExperimentSummary,
    ReplicateRecord,
};
pub use io::{
    load_fingerprints, parse_report, read_events, read_trace, write_events, write_fingerprints,
    write_trace, Report,
};
pub use signal::{
    add_noise, inject_artifact, synth_trace, ChemicalResponseParams, EventKind, EventMarker,
    GroundTruth, SynthConfig, Trace,
};
pub use stream::{watch_stream, StreamServer};
