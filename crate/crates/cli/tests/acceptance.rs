//! Acceptance suite for the toolkit: each test checks one release gate and
//! prints a single PASS/FAIL line (run with --nocapture to see them all).

use std::process::Command;
use std::time::{Duration, Instant};

use physarum_core::analyzer::{analyze, AnalysisOutcome, AnalyzeParams, ChangeRatios};
use physarum_core::classifier::{classify, default_table};
use physarum_core::error::Error;
use physarum_core::experiment::{run_experiment, ExperimentPlan};
use physarum_core::io::{
    events_from_str, events_to_string, fingerprints_from_str, fingerprints_to_string,
    trace_from_str, trace_to_string,
};
use physarum_core::signal::{
    inject_artifact, synth_trace, ChemicalResponseParams, EventKind, EventMarker, SynthConfig,
    Trace,
};
use physarum_core::stream::{watch_stream, StreamServer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn verdict(n: usize, name: &str, failures: &[String]) {
    let ok = failures.is_empty();
    println!(
        "[ACCEPTANCE {n}] {name}: {}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {n} ({name}) failed:\n{}", failures.join("\n"));
}

fn measured_ratios(outcome: &AnalysisOutcome) -> Option<(f64, f64)> {
    match outcome {
        AnalysisOutcome::Measured { ratios, .. } => Some((ratios.freq_ratio, ratios.amp_ratio)),
        _ => None,
    }
}

fn default_plan(base_seed: u64) -> ExperimentPlan {
    ExperimentPlan {
        base_seed,
        ..ExperimentPlan::with_defaults(&default_table())
    }
}

#[test]
fn acceptance_1_reference_table_round_trip() {
    let mut failures = Vec::new();
    let started = Instant::now();
    let table = default_table();
    let summary = run_experiment(&default_plan(4), &table).unwrap();
    let elapsed = started.elapsed();

    let mut passing = 0usize;
    for chem in &summary.chemicals {
        match &chem.aggregate {
            Some(agg) if agg.comparison.pass => passing += 1,
            Some(agg) => failures.push(format!(
                "{}: freq dev {:.4} (tol {:.4}), amp dev {:.4} (tol {:.4})",
                chem.chemical,
                agg.comparison.freq_abs_dev,
                agg.comparison.freq_tolerance,
                agg.comparison.amp_abs_dev,
                agg.comparison.amp_tolerance
            )),
            None => failures.push(format!("{}: attempt cap exceeded", chem.chemical)),
        }
    }
    // At least 7 of 8 chemicals must land inside the tolerance band.
    if passing >= 7 {
        failures.clear();
    } else {
        failures.push(format!("only {passing}/8 chemicals within tolerance"));
    }
    if elapsed > Duration::from_secs(60) {
        failures.push(format!("runtime {elapsed:?} exceeds 60 s"));
    }
    verdict(1, "reference-table round trip", &failures);
}

#[test]
fn acceptance_2_significance_flags() {
    let mut failures = Vec::new();
    let table = default_table();
    let mut flag_count = std::collections::BTreeMap::<String, usize>::new();
    let runs = 20;
    for seed in 1..=runs {
        let summary = run_experiment(&default_plan(seed as u64), &table).unwrap();
        for chem in &summary.chemicals {
            let agg = chem.aggregate.as_ref().expect("experiment failed");
            if agg.significance.freq.p_lt_0_05 {
                *flag_count.entry(chem.chemical.clone()).or_default() += 1;
            }
        }
    }
    let strong = ["Farnesene", "Linalool", "Nonanal", "Benzyl Alcohol"];
    for name in strong {
        let got = flag_count.get(name).copied().unwrap_or(0);
        if got * 5 < runs * 4 {
            failures.push(format!("{name}: frequency flag in {got}/{runs} runs, need >= 80%"));
        }
    }
    let limonene = flag_count.get("S(-)Limonene").copied().unwrap_or(0);
    if limonene * 5 > runs {
        failures.push(format!(
            "S(-)Limonene: frequency flag in {limonene}/{runs} runs, need <= 20%"
        ));
    }
    verdict(2, "frequency significance flags", &failures);
}

#[test]
fn acceptance_3_measurement_accuracy() {
    let mut failures = Vec::new();
    let identity = ChemicalResponseParams::new("identity", 1.0, 0.0, 1.0, 0.0);
    for period in [90.0, 120.0, 170.0] {
        let config = SynthConfig {
            baseline_period_s: Some(period),
            baseline_amplitude_mv: Some(0.5),
            noise_sd_mv: 0.0,
            rng_seed: 11,
            ..SynthConfig::default()
        };
        let (trace, event, _) = synth_trace(&config, &identity).unwrap();
        let outcome = analyze(&trace, &event, &AnalyzeParams::default()).unwrap();
        let (pre, post) = match &outcome {
            AnalysisOutcome::Measured { pre, post, .. } => (pre, post),
            other => {
                failures.push(format!("period {period}: not measured: {other:?}"));
                continue;
            }
        };
        for (label, seg) in [("pre", pre), ("post", post)] {
            if (seg.mean_period_s - period).abs() > 0.5 {
                failures.push(format!(
                    "period {period} {label}: mean period {} off by more than 0.5 s",
                    seg.mean_period_s
                ));
            }
            if (seg.mean_amplitude_mv / 0.5 - 1.0).abs() > 0.02 {
                failures.push(format!(
                    "period {period} {label}: amplitude {} off by more than 2%",
                    seg.mean_amplitude_mv
                ));
            }
        }
    }
    verdict(3, "noise-free measurement accuracy", &failures);
}

#[test]
fn acceptance_4_classifier_floors() {
    let mut failures = Vec::new();
    let table = default_table();

    for row in table.names() {
        let fp = table.get(row).unwrap();
        let ratios = ChangeRatios {
            freq_ratio: fp.freq_ratio_mean,
            amp_ratio: fp.amp_ratio_mean,
        };
        let result = classify(&ratios, &table, 0.5, 3.0).unwrap();
        if result.best != fp.name || result.distance != 0.0 {
            failures.push(format!(
                "self-classification of {} gave {} at distance {}",
                fp.name, result.best, result.distance
            ));
        }
    }

    let unit = classify(
        &ChangeRatios {
            freq_ratio: 1.0,
            amp_ratio: 1.0,
        },
        &table,
        0.5,
        3.0,
    )
    .unwrap();
    if unit.best != "Cis-3-Hexenylacetate" {
        failures.push(format!("(1.0, 1.0) classified as {}", unit.best));
    }

    // Monte-Carlo accuracy from each fingerprint's own Gaussian; floors were
    // frozen from an independent pre-build simulation.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws = 1000;
    let mut per_chem_hits = std::collections::BTreeMap::<String, usize>::new();
    let mut total_hits = 0usize;
    let mut total = 0usize;
    for name in table.names() {
        let fp = table.get(name).unwrap().clone();
        let freq_dist = Normal::new(fp.freq_ratio_mean, fp.freq_ratio_sd).unwrap();
        let amp_dist = Normal::new(fp.amp_ratio_mean, fp.amp_ratio_sd).unwrap();
        for _ in 0..draws {
            let ratios = ChangeRatios {
                freq_ratio: freq_dist.sample(&mut rng),
                amp_ratio: amp_dist.sample(&mut rng),
            };
            let result = classify(&ratios, &table, 0.5, 3.0).unwrap();
            total += 1;
            if result.best == fp.name {
                total_hits += 1;
                *per_chem_hits.entry(fp.name.clone()).or_default() += 1;
            }
        }
    }
    let accuracy = |name: &str| per_chem_hits.get(name).copied().unwrap_or(0) as f64 / draws as f64;
    if accuracy("Farnesene") < 0.45 {
        failures.push(format!("Farnesene accuracy {} < 0.45", accuracy("Farnesene")));
    }
    if accuracy("Linalool") < 0.69 {
        failures.push(format!("Linalool accuracy {} < 0.69", accuracy("Linalool")));
    }
    let overall = total_hits as f64 / total as f64;
    if overall < 0.36 {
        failures.push(format!("overall accuracy {overall} < 0.36"));
    }
    if overall <= 0.25 {
        failures.push(format!("overall accuracy {overall} not above 2x chance"));
    }
    verdict(4, "classifier floors", &failures);
}

#[test]
fn acceptance_5_robustness_invariants() {
    let mut failures = Vec::new();
    let chem = ChemicalResponseParams::new("probe", 1.25, 0.0, 0.8, 0.0);
    let params = AnalyzeParams::default();

    for seed in 0..5u64 {
        let config = SynthConfig {
            baseline_period_s: Some(100.0 + 10.0 * seed as f64),
            baseline_amplitude_mv: Some(0.5),
            noise_sd_mv: 0.01,
            rng_seed: seed,
            ..SynthConfig::default()
        };
        let (trace, event, _) = synth_trace(&config, &chem).unwrap();
        let base = measured_ratios(&analyze(&trace, &event, &params).unwrap()).unwrap();

        // Gain, offset and time shift in one transform.
        let (gain, offset, shift) = (1.7, 3.0, 500.0);
        let mut t2 = trace.clone();
        for v in &mut t2.samples {
            *v = *v * gain + offset;
        }
        t2.start_time_s += shift;
        let e2 = EventMarker {
            time_s: event.time_s + shift,
            ..event.clone()
        };
        let p2 = AnalyzeParams {
            prominence_mv: params.prominence_mv * gain,
            ..params.clone()
        };
        let got = measured_ratios(&analyze(&t2, &e2, &p2).unwrap()).unwrap();
        if (got.0 - base.0).abs() > 1e-9 || (got.1 - base.1).abs() > 1e-9 {
            failures.push(format!(
                "seed {seed}: transform moved ratios {base:?} -> {got:?}"
            ));
        }

        let spiked = inject_artifact(&trace, 700.0, 5.0, 10.0).unwrap();
        let with_spike = measured_ratios(&analyze(&spiked, &event, &params).unwrap()).unwrap();
        if (with_spike.0 / base.0 - 1.0).abs() >= 0.01
            || (with_spike.1 / base.1 - 1.0).abs() >= 0.01
        {
            failures.push(format!(
                "seed {seed}: artifact moved ratios {base:?} -> {with_spike:?}"
            ));
        }
    }

    for seed in 0..20u64 {
        let config = SynthConfig {
            cessation_probability: Some(1.0),
            noise_sd_mv: 0.02,
            rng_seed: seed,
            ..SynthConfig::default()
        };
        let (trace, event, _) = synth_trace(&config, &chem).unwrap();
        let outcome = analyze(&trace, &event, &params).unwrap();
        if !matches!(outcome, AnalysisOutcome::Cessation { .. }) {
            failures.push(format!("seed {seed}: cessation trace gave {outcome:?}"));
        }
    }
    verdict(5, "robustness invariants", &failures);
}

#[test]
fn acceptance_6_io_and_protocol() {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1234);

    // 400 trace + 300 event + 300 fingerprint round trips.
    for case in 0..400 {
        let rate = [1.0, 2.0, 4.0, 10.0][rng.random_range(0..4)];
        let start: f64 = rng.random_range(-100.0..100.0);
        let n = rng.random_range(2..300);
        let samples: Vec<f64> = (0..n).map(|_| rng.random_range(-38.0..38.0)).collect();
        let trace = Trace::new(rate, start, samples).unwrap();
        let once = trace_to_string(&trace);
        let twice = trace_to_string(&trace_from_str(&once).unwrap());
        if once != twice {
            failures.push(format!("trace case {case}: round trip not identical"));
        }
    }
    let kinds = [
        EventKind::ChemicalAdded,
        EventKind::ArtifactSpike,
        EventKind::Annotation,
    ];
    for case in 0..300 {
        let n = rng.random_range(1..20);
        let mut t = 0.0;
        let events: Vec<EventMarker> = (0..n)
            .map(|i| {
                t += rng.random_range(1..10) as f64;
                EventMarker {
                    time_s: t,
                    kind: kinds[rng.random_range(0..3)],
                    label: format!("ev{i}"),
                }
            })
            .collect();
        let text = events_to_string(&events).unwrap();
        let back = events_from_str(&text).unwrap();
        if back != events {
            failures.push(format!("events case {case}: round trip not identical"));
        }
    }
    for case in 0..300 {
        let mut table = default_table();
        table
            .upsert(ChemicalResponseParams::new(
                format!("extra-{case}"),
                rng.random_range(0.3..2.0),
                rng.random_range(0.05..0.5),
                rng.random_range(0.3..2.0),
                rng.random_range(0.05..0.5),
            ))
            .unwrap();
        let once = fingerprints_to_string(&table);
        let back = fingerprints_from_str(&once, default_table()).unwrap();
        if fingerprints_to_string(&back) != once {
            failures.push(format!("fingerprints case {case}: round trip not identical"));
        }
    }

    // Watch over TCP must reproduce offline analysis on 50 seeded traces.
    let chem = ChemicalResponseParams::new("probe", 1.2, 0.1, 0.8, 0.1);
    for seed in 0..50u64 {
        let config = SynthConfig {
            rng_seed: seed,
            ..SynthConfig::default()
        };
        let (trace, event, _) = synth_trace(&config, &chem).unwrap();
        // Offline oracle sees the same six-decimal values as the wire.
        let quantized = trace_from_str(&trace_to_string(&trace)).unwrap();
        let offline = analyze(&quantized, &event, &AnalyzeParams::default()).unwrap();

        let server = StreamServer::bind("127.0.0.1:0").unwrap();
        let addr = server.local_addr().unwrap();
        let events = vec![event.clone()];
        let handle = std::thread::spawn(move || server.serve(&trace, &events, 1e6, Some(1)));
        let watched = watch_stream(
            addr,
            AnalyzeParams::default(),
            Duration::from_secs(10),
            |_| {},
        )
        .unwrap();
        handle.join().unwrap().unwrap();
        if watched != offline {
            failures.push(format!("seed {seed}: watch {watched:?} != offline {offline:?}"));
        }
    }

    // A corrupted frame must carry its line number.
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        use std::io::Write;
        let (stream, _) = listener.accept().unwrap();
        let mut w = std::io::BufWriter::new(stream);
        writeln!(w, "PHYSARUMD 1").unwrap();
        writeln!(w, "S 0.000000 0.100000").unwrap();
        writeln!(w, "S bogus 0.2").unwrap();
        writeln!(w, "END").unwrap();
        w.flush().unwrap();
    });
    match watch_stream(addr, AnalyzeParams::default(), Duration::from_secs(5), |_| {}) {
        Err(Error::Protocol { line, .. }) if line == 3 => {}
        other => failures.push(format!("corrupted frame gave {other:?}, wanted line 3")),
    }
    handle.join().unwrap();

    verdict(6, "serialization and protocol fidelity", &failures);
}

#[test]
fn acceptance_7_determinism() {
    let mut failures = Vec::new();
    let bin = env!("CARGO_BIN_EXE_physarum");
    let dir = tempfile::tempdir().unwrap();

    let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
    for pass in ["a", "b"] {
        let status = Command::new(bin)
            .current_dir(dir.path())
            .args([
                "--seed",
                "7",
                "synth",
                "--chemical",
                "Farnesene",
                "--out-prefix",
                &format!("run_{pass}"),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    for suffix in ["trace.csv", "events.csv", "truth.report"] {
        if read(&format!("run_a.{suffix}")) != read(&format!("run_b.{suffix}")) {
            failures.push(format!("synth {suffix} differs between identical runs"));
        }
    }

    for pass in ["a", "b"] {
        let status = Command::new(bin)
            .current_dir(dir.path())
            .args([
                "--seed",
                "4",
                "experiment",
                "--chemicals",
                "Farnesene,Linalool",
                "--replicates",
                "4",
                "--out-dir",
                &format!("exp_{pass}"),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(dir.path().join("exp_a/summary.report")).unwrap();
    let b = std::fs::read(dir.path().join("exp_b/summary.report")).unwrap();
    if a != b {
        failures.push("experiment summaries differ between identical runs".into());
    }
    verdict(7, "end-to-end determinism", &failures);
}
