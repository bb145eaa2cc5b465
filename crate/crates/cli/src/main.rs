//! `physarum`: synthesize, analyze, classify, stream and batch-run
//! extracellular-potential recordings.
//!
//! Exit codes: 0 success, 2 usage/config/parse error, 3 immeasurable,
//! 4 cessation, 5 ambiguous, 6 out-of-library, 7 experiment failure,
//! 8 transport error.

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use physarum_core::analyzer::{analyze, AnalysisOutcome, AnalyzeParams, ChangeRatios};
use physarum_core::classifier::{classify, FingerprintTable, Verdict};
use physarum_core::error::Error;
use physarum_core::experiment::{run_experiment, ExperimentPlan};
use physarum_core::io::{
    fingerprints_to_string, load_fingerprints, parse_report, read_events, read_trace,
    write_events, write_trace,
};
use physarum_core::report::{
    classification_report, outcome_report, summary_report, truth_report,
};
use physarum_core::signal::{synth_trace, EventKind, EventMarker, SynthConfig};
use physarum_core::stream::{watch_stream, StreamServer};

const EXIT_USAGE: u8 = 2;
const EXIT_IMMEASURABLE: u8 = 3;
const EXIT_CESSATION: u8 = 4;
const EXIT_AMBIGUOUS: u8 = 5;
const EXIT_OUT_OF_LIBRARY: u8 = 6;
const EXIT_EXPERIMENT_FAILED: u8 = 7;
const EXIT_TRANSPORT: u8 = 8;

#[derive(Parser)]
#[command(
    name = "physarum",
    version,
    about = "Physarum polycephalum chemical-sensing toolkit"
)]
struct Cli {
    /// Fingerprint CSV merged over the built-in table.
    #[arg(long, global = true, value_name = "PATH")]
    fingerprints: Option<PathBuf>,

    /// Seed for synthesis and experiments.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Print progress to standard error.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a recording with a chemical-addition response.
    Synth(SynthArgs),
    /// Measure pre/post oscillation statistics and change ratios.
    Analyze(AnalyzeArgs),
    /// Identify a chemical from a (freq_ratio, amp_ratio) pair.
    Classify(ClassifyArgs),
    /// Replicate experiment over the fingerprint table.
    Experiment(ExperimentArgs),
    /// Replay a recording over TCP.
    Serve(ServeArgs),
    /// Connect to a replay server and analyze the incoming stream.
    Watch(WatchArgs),
    /// Print the active fingerprint table.
    Fingerprints,
}

#[derive(Args, Clone)]
struct SynthFlags {
    /// Recording length in seconds.
    #[arg(long, default_value_t = 3600.0)]
    duration: f64,

    /// Chemical-addition time in seconds.
    #[arg(long, default_value_t = 1800.0)]
    event_at: f64,

    /// Baseline period in seconds; drawn uniformly from [90, 170) when unset.
    #[arg(long)]
    period: Option<f64>,

    /// Baseline peak-to-trough amplitude in mV; drawn from [0.25, 1.0) when unset.
    #[arg(long)]
    amplitude: Option<f64>,

    /// Gaussian noise SD in mV.
    #[arg(long, default_value_t = 0.02)]
    noise_sd: f64,

    /// Linear drift in mV per hour.
    #[arg(long, default_value_t = 0.0)]
    drift: f64,

    /// Stimulation-spike height in mV; 5x baseline amplitude when unset.
    #[arg(long)]
    spike_magnitude: Option<f64>,

    /// Stimulation-spike decay constant in seconds.
    #[arg(long, default_value_t = 10.0)]
    spike_decay: f64,

    /// Response ramp length in baseline periods.
    #[arg(long, default_value_t = 1.0)]
    transition_periods: f64,

    /// Overrides the chemical's cessation probability.
    #[arg(long)]
    cessation_probability: Option<f64>,

    /// Samples per second.
    #[arg(long, default_value_t = 2.0)]
    sample_rate: f64,
}

impl SynthFlags {
    fn to_config(&self, seed: u64) -> SynthConfig {
        SynthConfig {
            duration_s: self.duration,
            event_at_s: self.event_at,
            baseline_period_s: self.period,
            baseline_amplitude_mv: self.amplitude,
            noise_sd_mv: self.noise_sd,
            drift_mv_per_hour: self.drift,
            spike_magnitude_mv: self.spike_magnitude,
            spike_decay_s: self.spike_decay,
            transition_periods: self.transition_periods,
            cessation_probability: self.cessation_probability,
            rng_seed: seed,
            sample_rate_hz: self.sample_rate,
            ..SynthConfig::default()
        }
    }
}

#[derive(Args, Clone)]
struct AnalyzerFlags {
    /// Moving-average window in samples.
    #[arg(long, default_value_t = 5)]
    smooth_window: usize,

    /// Minimum extremum prominence in mV.
    #[arg(long, default_value_t = 0.05)]
    prominence: f64,

    /// Shortest credible oscillation period in seconds.
    #[arg(long, default_value_t = 20.0)]
    min_period: f64,

    /// Consecutive periods required for stability and measured per segment.
    #[arg(long, default_value_t = 5)]
    stability_periods: usize,

    /// Maximum period coefficient of variation for a stable run.
    #[arg(long, default_value_t = 0.15)]
    cv_max: f64,

    /// Settling time after the event excluded from the post window, seconds.
    #[arg(long, default_value_t = 60.0)]
    dead_band: f64,

    /// Longest credible period, used by the cessation check, seconds.
    #[arg(long, default_value_t = 170.0)]
    max_period: f64,
}

impl AnalyzerFlags {
    fn to_params(&self) -> AnalyzeParams {
        AnalyzeParams {
            smooth_window: self.smooth_window,
            prominence_mv: self.prominence,
            min_period_s: self.min_period,
            stability_periods: self.stability_periods,
            stability_cv_max: self.cv_max,
            dead_band_s: self.dead_band,
            max_period_s: self.max_period,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Chemical name from the fingerprint table.
    #[arg(long)]
    chemical: String,

    /// Output path prefix; writes <prefix>.trace.csv, .events.csv, .truth.report.
    #[arg(long)]
    out_prefix: PathBuf,

    #[command(flatten)]
    synth: SynthFlags,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trace CSV path.
    #[arg(long)]
    trace: PathBuf,

    /// Events CSV path; the first chemical_added marker is analyzed.
    #[arg(long)]
    events: PathBuf,

    /// Report output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also render the trace with detected extrema and windows as SVG.
    #[arg(long)]
    plot: Option<PathBuf>,

    #[command(flatten)]
    analyzer: AnalyzerFlags,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Post/pre frequency ratio.
    #[arg(long)]
    freq_ratio: Option<f64>,

    /// Post/pre amplitude ratio.
    #[arg(long)]
    amp_ratio: Option<f64>,

    /// Read the ratios from an analysis report instead.
    #[arg(long, conflicts_with_all = ["freq_ratio", "amp_ratio"])]
    from_report: Option<PathBuf>,

    /// Distance margin below which the verdict is ambiguous.
    #[arg(long, default_value_t = 0.5)]
    ambiguity_margin: f64,

    /// Distance above which the query is out of library.
    #[arg(long, default_value_t = 3.0)]
    cutoff: f64,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Comma-separated chemical names; all table rows when omitted.
    #[arg(long, value_delimiter = ',')]
    chemicals: Vec<String>,

    /// Measurable recordings required per chemical.
    #[arg(long, default_value_t = 12)]
    replicates: usize,

    /// Directory for summary.report and per-replicate reports.
    #[arg(long)]
    out_dir: PathBuf,

    #[command(flatten)]
    synth: SynthFlags,

    #[command(flatten)]
    analyzer: AnalyzerFlags,
}

#[derive(Args)]
struct ServeArgs {
    /// Trace CSV path.
    #[arg(long)]
    trace: PathBuf,

    /// Events CSV path.
    #[arg(long)]
    events: PathBuf,

    /// Listen address.
    #[arg(long, default_value = "127.0.0.1:4780")]
    addr: String,

    /// Replay speed multiplier over recorded time.
    #[arg(long, default_value_t = 1.0)]
    speedup: f64,

    /// Exit after serving this many clients; loops forever when omitted.
    #[arg(long)]
    max_clients: Option<usize>,
}

#[derive(Args)]
struct WatchArgs {
    /// Server address.
    #[arg(long)]
    addr: String,

    /// Connect/read timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,

    /// Report output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    #[command(flatten)]
    analyzer: AnalyzerFlags,
}

fn error_exit_code(err: &Error) -> u8 {
    match err {
        Error::Transport(_) | Error::Protocol { .. } => EXIT_TRANSPORT,
        _ => EXIT_USAGE,
    }
}

fn outcome_exit_code(outcome: &AnalysisOutcome) -> u8 {
    match outcome {
        AnalysisOutcome::Measured { .. } => 0,
        AnalysisOutcome::Immeasurable { .. } => EXIT_IMMEASURABLE,
        AnalysisOutcome::Cessation { .. } => EXIT_CESSATION,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(error_exit_code(&err))
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Error> {
    let table = load_fingerprints(cli.fingerprints.as_deref())?;
    match &cli.command {
        Command::Synth(args) => cmd_synth(cli, args, &table),
        Command::Analyze(args) => cmd_analyze(cli, args),
        Command::Classify(args) => cmd_classify(args, &table),
        Command::Experiment(args) => cmd_experiment(cli, args, &table),
        Command::Serve(args) => cmd_serve(cli, args),
        Command::Watch(args) => cmd_watch(cli, args),
        Command::Fingerprints => {
            print!("{}", fingerprints_to_string(&table));
            Ok(0)
        }
    }
}

fn cmd_synth(cli: &Cli, args: &SynthArgs, table: &FingerprintTable) -> Result<u8, Error> {
    let chem = table.get(&args.chemical).ok_or_else(|| {
        Error::Config(format!(
            "unknown chemical `{}`; known: {}",
            args.chemical,
            table.names().join(", ")
        ))
    })?;
    let config = args.synth.to_config(cli.seed);
    let (trace, event, truth) = synth_trace(&config, chem)?;

    let prefix = args.out_prefix.as_os_str().to_string_lossy();
    let trace_path = PathBuf::from(format!("{prefix}.trace.csv"));
    let events_path = PathBuf::from(format!("{prefix}.events.csv"));
    let truth_path = PathBuf::from(format!("{prefix}.truth.report"));
    write_trace(&trace, &trace_path)?;
    write_events(std::slice::from_ref(&event), &events_path)?;
    truth_report(&truth, &config, &chem.name).write(&truth_path)?;
    if cli.verbose {
        eprintln!(
            "wrote {}, {}, {}",
            trace_path.display(),
            events_path.display(),
            truth_path.display()
        );
    }
    Ok(0)
}

fn chemical_event(events: &[EventMarker]) -> Result<&EventMarker, Error> {
    events
        .iter()
        .find(|e| e.kind == EventKind::ChemicalAdded)
        .ok_or_else(|| Error::Config("events file has no chemical_added marker".into()))
}

fn emit_outcome(
    outcome: &AnalysisOutcome,
    params: &AnalyzeParams,
    out: Option<&Path>,
) -> Result<u8, Error> {
    let report = outcome_report(outcome, params);
    match out {
        Some(path) => report.write(path)?,
        None => print!("{}", report.render()),
    }
    Ok(outcome_exit_code(outcome))
}

fn cmd_analyze(cli: &Cli, args: &AnalyzeArgs) -> Result<u8, Error> {
    let trace = read_trace(&args.trace)?;
    let events = read_events(&args.events)?;
    let event = chemical_event(&events)?;
    let params = args.analyzer.to_params();
    let outcome = analyze(&trace, event, &params)?;
    if let Some(path) = &args.plot {
        plot::render_svg(&trace, event, &outcome, &params, path)?;
        if cli.verbose {
            eprintln!("wrote {}", path.display());
        }
    }
    emit_outcome(&outcome, &params, args.out.as_deref())
}

fn ratios_from_report(path: &Path) -> Result<ChangeRatios, Error> {
    let text = std::fs::read_to_string(path)?;
    let map = parse_report(&text);
    let get = |key: &str| -> Result<f64, Error> {
        map.get(key)
            .ok_or_else(|| Error::Config(format!("report missing `{key}`")))?
            .parse::<f64>()
            .map_err(|e| Error::Config(format!("bad `{key}` in report: {e}")))
    };
    Ok(ChangeRatios {
        freq_ratio: get("ratios.freq_ratio")?,
        amp_ratio: get("ratios.amp_ratio")?,
    })
}

fn cmd_classify(args: &ClassifyArgs, table: &FingerprintTable) -> Result<u8, Error> {
    let ratios = match (&args.from_report, args.freq_ratio, args.amp_ratio) {
        (Some(path), _, _) => ratios_from_report(path)?,
        (None, Some(f), Some(a)) => ChangeRatios {
            freq_ratio: f,
            amp_ratio: a,
        },
        _ => {
            return Err(Error::Config(
                "provide --freq-ratio and --amp-ratio, or --from-report".into(),
            ))
        }
    };
    let result = classify(&ratios, table, args.ambiguity_margin, args.cutoff)?;
    print!("{}", classification_report(&result).render());
    Ok(match result.verdict {
        Verdict::Confident => 0,
        Verdict::Ambiguous => EXIT_AMBIGUOUS,
        Verdict::OutOfLibrary => EXIT_OUT_OF_LIBRARY,
    })
}

fn file_slug(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

fn cmd_experiment(cli: &Cli, args: &ExperimentArgs, table: &FingerprintTable) -> Result<u8, Error> {
    let chemicals = if args.chemicals.is_empty() {
        table.names().iter().map(|s| s.to_string()).collect()
    } else {
        args.chemicals.clone()
    };
    let plan = ExperimentPlan {
        chemicals,
        replicates: args.replicates,
        base_seed: cli.seed,
        synth: args.synth.to_config(cli.seed),
        analyzer: args.analyzer.to_params(),
    };
    let summary = run_experiment(&plan, table)?;

    std::fs::create_dir_all(&args.out_dir)?;
    for chem in &summary.chemicals {
        let slug = file_slug(&chem.chemical);
        for (i, rec) in chem.records.iter().enumerate() {
            let mut report = outcome_report(&rec.outcome, &plan.analyzer);
            report.push("seed", rec.seed);
            report.write(args.out_dir.join(format!("{slug}.rep{i:02}.report")))?;
        }
        if cli.verbose {
            eprintln!(
                "{}: {} attempts, {} discards",
                chem.chemical, chem.seeds_consumed, chem.discards
            );
        }
    }
    summary_report(&summary, &plan.analyzer).write(args.out_dir.join("summary.report"))?;

    let failed = summary.failed_chemicals();
    if failed.is_empty() {
        Ok(0)
    } else {
        eprintln!("failed chemicals: {}", failed.join(", "));
        Ok(EXIT_EXPERIMENT_FAILED)
    }
}

fn cmd_serve(cli: &Cli, args: &ServeArgs) -> Result<u8, Error> {
    let trace = read_trace(&args.trace)?;
    let events = read_events(&args.events)?;
    let server = StreamServer::bind(args.addr.as_str())?;
    println!("listening on {}", server.local_addr()?);
    if cli.verbose {
        eprintln!(
            "replaying {} samples, {} events at {}x",
            trace.samples.len(),
            events.len(),
            args.speedup
        );
    }
    server.serve(&trace, &events, args.speedup, args.max_clients)?;
    Ok(0)
}

fn cmd_watch(cli: &Cli, args: &WatchArgs) -> Result<u8, Error> {
    if !(args.timeout > 0.0) {
        return Err(Error::Config(format!(
            "timeout must be positive, got {}",
            args.timeout
        )));
    }
    let params = args.analyzer.to_params();
    let verbose = cli.verbose;
    let outcome = watch_stream(
        args.addr.as_str(),
        params.clone(),
        Duration::from_secs_f64(args.timeout),
        |status| {
            if verbose {
                eprintln!("status: {status:?}");
            }
        },
    )?;
    emit_outcome(&outcome, &params, args.out.as_deref())
}
