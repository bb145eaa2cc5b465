//! Chemical identification from a (frequency ratio, amplitude ratio) pair and
//! replicate statistics with significance flags.
//!
//! Each fingerprint carries the per-chemical mean and SD of both ratios; a
//! query is matched by minimum diagonal Mahalanobis distance. The eight-row
//! default table is embedded.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::analyzer::ChangeRatios;
use crate::error::{Error, Result};
use crate::signal::ChemicalResponseParams;

pub const DEFAULT_AMBIGUITY_MARGIN: f64 = 0.5;
pub const DEFAULT_OUT_OF_LIBRARY_CUTOFF: f64 = 3.0;

/// Ordered set of chemical fingerprints.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintTable {
    pub version: String,
    rows: Vec<ChemicalResponseParams>,
}

/// The embedded default fingerprint library: eight chemicals with mean (SD)
/// of frequency and amplitude change ratios.
pub fn default_table() -> FingerprintTable {
    let rows = vec![
        ChemicalResponseParams::new("Farnesene", 1.255, 0.249, 0.646, 0.167),
        ChemicalResponseParams::new("Tridecane", 1.170, 0.367, 1.104, 0.457),
        ChemicalResponseParams::new("S(-)Limonene", 1.013, 0.064, 0.970, 0.328),
        ChemicalResponseParams::new("Cis-3-Hexenylacetate", 0.987, 0.210, 0.941, 0.462),
        ChemicalResponseParams::new("Geraniol", 0.999, 0.105, 0.740, 0.220),
        ChemicalResponseParams::new("Benzyl Alcohol", 0.893, 0.114, 1.259, 0.254),
        ChemicalResponseParams::new("Linalool", 0.676, 0.213, 1.414, 0.314),
        ChemicalResponseParams::new("Nonanal", 0.731, 0.164, 0.718, 0.186),
    ];
    FingerprintTable {
        version: "builtin-1".into(),
        rows,
    }
}

fn normalize_name(name: &str) -> String {
    name.trim().to_ascii_lowercase().replace('_', " ")
}

impl FingerprintTable {
    pub fn new(version: impl Into<String>) -> Self {
        FingerprintTable {
            version: version.into(),
            rows: Vec::new(),
        }
    }

    pub fn rows(&self) -> &[ChemicalResponseParams] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Case-insensitive lookup; underscores match spaces.
    pub fn get(&self, name: &str) -> Option<&ChemicalResponseParams> {
        let key = normalize_name(name);
        self.rows.iter().find(|r| normalize_name(&r.name) == key)
    }

    pub fn names(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.name.as_str()).collect()
    }

    /// Insert a validated row: replaces an existing row with the same name,
    /// appends otherwise.
    pub fn upsert(&mut self, row: ChemicalResponseParams) -> Result<()> {
        row.validate()?;
        let key = normalize_name(&row.name);
        match self.rows.iter_mut().find(|r| normalize_name(&r.name) == key) {
            Some(existing) => *existing = row,
            None => self.rows.push(row),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Confident,
    Ambiguous,
    OutOfLibrary,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Confident => "confident",
            Verdict::Ambiguous => "ambiguous",
            Verdict::OutOfLibrary => "out-of-library",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub best: String,
    pub distance: f64,
    pub runner_up: Option<String>,
    pub margin: f64,
    /// Every fingerprint with its distance, sorted ascending.
    pub per_chemical: Vec<(String, f64)>,
    pub verdict: Verdict,
}

/// Diagonal Mahalanobis distance of a ratio pair from a fingerprint.
pub fn mahalanobis_distance(ratios: &ChangeRatios, fp: &ChemicalResponseParams) -> Result<f64> {
    if !(fp.freq_ratio_sd > 0.0) || !(fp.amp_ratio_sd > 0.0) {
        return Err(Error::DegenerateFingerprint(format!(
            "{} has a zero standard deviation",
            fp.name
        )));
    }
    let zf = (ratios.freq_ratio - fp.freq_ratio_mean) / fp.freq_ratio_sd;
    let za = (ratios.amp_ratio - fp.amp_ratio_mean) / fp.amp_ratio_sd;
    Ok((zf * zf + za * za).sqrt())
}

/// Nearest-fingerprint classification with ambiguity and out-of-library
/// verdicts. Ties break deterministically by table order.
pub fn classify(
    ratios: &ChangeRatios,
    table: &FingerprintTable,
    ambiguity_margin: f64,
    out_of_library_cutoff: f64,
) -> Result<ClassificationResult> {
    if table.is_empty() {
        return Err(Error::Config("fingerprint table is empty".into()));
    }
    let mut per_chemical: Vec<(String, f64)> = Vec::with_capacity(table.len());
    for row in table.rows() {
        per_chemical.push((row.name.clone(), mahalanobis_distance(ratios, row)?));
    }
    // Stable sort keeps table order on exact ties.
    per_chemical.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());

    let (best, distance) = per_chemical[0].clone();
    let runner_up = per_chemical.get(1).map(|(n, _)| n.clone());
    let margin = per_chemical
        .get(1)
        .map(|(_, d)| d - distance)
        .unwrap_or(f64::INFINITY);
    let verdict = if distance > out_of_library_cutoff {
        Verdict::OutOfLibrary
    } else if margin < ambiguity_margin {
        Verdict::Ambiguous
    } else {
        Verdict::Confident
    };
    Ok(ClassificationResult {
        best,
        distance,
        runner_up,
        margin,
        per_chemical,
        verdict,
    })
}

/// Replicate feature pairs for one chemical, one per dish.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSet {
    pub chemical: String,
    pub ratios: Vec<ChangeRatios>,
    pub provenance: Vec<String>,
}

impl ReplicateSet {
    pub fn new(chemical: impl Into<String>) -> Self {
        ReplicateSet {
            chemical: chemical.into(),
            ratios: Vec::new(),
            provenance: Vec::new(),
        }
    }
}

/// Mean, SD and one-sample test result for a single quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantityStats {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
    pub p_value: f64,
    pub p_lt_0_05: bool,
    pub p_lt_0_1: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceReport {
    pub freq: QuantityStats,
    pub amp: QuantityStats,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    // Identical samples get an exact zero SD rather than rounding dust.
    if xs.windows(2).all(|w| w[0] == w[1]) {
        return (xs[0], 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Two-sided one-sample t-test of `samples` against `null_value`.
/// Zero-variance samples give p = 1 at the null and p = 0 away from it.
pub fn t_test_vs_null(samples: &[f64], null_value: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "t-test needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let (m, sd) = mean_sd(samples);
    if sd == 0.0 {
        return Ok(if m == null_value { 1.0 } else { 0.0 });
    }
    let n = samples.len() as f64;
    let t = (m - null_value) / (sd / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, n - 1.0)
        .map_err(|e| Error::Argument(format!("t distribution: {e}")))?;
    Ok(2.0 * (1.0 - dist.cdf(t.abs())))
}

fn quantity_stats(samples: &[f64]) -> Result<QuantityStats> {
    let (mean, sd) = mean_sd(samples);
    let p = t_test_vs_null(samples, 1.0)?;
    Ok(QuantityStats {
        mean,
        sd,
        n: samples.len(),
        p_value: p,
        p_lt_0_05: p < 0.05,
        p_lt_0_1: p < 0.1,
    })
}

/// Collapse a replicate set to a fingerprint-shaped estimate plus a
/// significance report against the no-change null of 1.0.
pub fn aggregate_replicates(set: &ReplicateSet) -> Result<(ChemicalResponseParams, SignificanceReport)> {
    if set.ratios.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 replicates, got {}",
            set.ratios.len()
        )));
    }
    let freq: Vec<f64> = set.ratios.iter().map(|r| r.freq_ratio).collect();
    let amp: Vec<f64> = set.ratios.iter().map(|r| r.amp_ratio).collect();
    let freq_stats = quantity_stats(&freq)?;
    let amp_stats = quantity_stats(&amp)?;
    let params = ChemicalResponseParams::new(
        set.chemical.clone(),
        freq_stats.mean,
        freq_stats.sd,
        amp_stats.mean,
        amp_stats.sd,
    );
    Ok((
        params,
        SignificanceReport {
            freq: freq_stats,
            amp: amp_stats,
        },
    ))
}

/// Deviation of an estimated fingerprint from a reference row, absolute and
/// scaled by the reference standard error over `n` replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub chemical: String,
    pub freq_abs_dev: f64,
    pub freq_se_scaled_dev: f64,
    pub freq_tolerance: f64,
    pub freq_pass: bool,
    pub amp_abs_dev: f64,
    pub amp_se_scaled_dev: f64,
    pub amp_tolerance: f64,
    pub amp_pass: bool,
    pub pass: bool,
}

/// Tolerance policy: max(0.05, 2 * reference SD / sqrt(n)).
pub fn compare_to_reference(
    estimated: &ChemicalResponseParams,
    reference: &ChemicalResponseParams,
    n: usize,
) -> Result<ComparisonReport> {
    if normalize_name(&estimated.name) != normalize_name(&reference.name) {
        return Err(Error::Argument(format!(
            "name mismatch: {} vs {}",
            estimated.name, reference.name
        )));
    }
    if n == 0 {
        return Err(Error::Argument("replicate count must be positive".into()));
    }
    let sqrt_n = (n as f64).sqrt();
    let freq_se = reference.freq_ratio_sd / sqrt_n;
    let amp_se = reference.amp_ratio_sd / sqrt_n;
    let freq_abs = (estimated.freq_ratio_mean - reference.freq_ratio_mean).abs();
    let amp_abs = (estimated.amp_ratio_mean - reference.amp_ratio_mean).abs();
    let freq_tol = (2.0 * freq_se).max(0.05);
    let amp_tol = (2.0 * amp_se).max(0.05);
    let freq_pass = freq_abs <= freq_tol;
    let amp_pass = amp_abs <= amp_tol;
    Ok(ComparisonReport {
        chemical: reference.name.clone(),
        freq_abs_dev: freq_abs,
        freq_se_scaled_dev: if freq_se > 0.0 { freq_abs / freq_se } else { f64::INFINITY },
        freq_tolerance: freq_tol,
        freq_pass,
        amp_abs_dev: amp_abs,
        amp_se_scaled_dev: if amp_se > 0.0 { amp_abs / amp_se } else { f64::INFINITY },
        amp_tolerance: amp_tol,
        amp_pass,
        pass: freq_pass && amp_pass,
    })
}
