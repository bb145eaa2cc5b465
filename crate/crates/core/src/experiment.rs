//! Replicate experiment harness: synthesize recordings per chemical until the
//! requested number of measurable ones is reached, analyze each, aggregate the
//! change ratios and compare the estimates against the reference fingerprint
//! table.

use crate::analyzer::{analyze, AnalysisOutcome, AnalyzeParams};
use crate::classifier::{
    aggregate_replicates, compare_to_reference, ComparisonReport, FingerprintTable, ReplicateSet,
    SignificanceReport,
};
use crate::error::{Error, Result};
use crate::signal::{synth_trace, ChemicalResponseParams, SynthConfig};

/// Discarded recordings are resynthesized with incremented seeds up to this
/// multiple of the requested replicate count.
pub const ATTEMPT_CAP_FACTOR: usize = 3;

/// Seed stride between chemicals so attempt seeds never collide.
const CHEMICAL_SEED_STRIDE: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    /// Chemicals to run; must all exist in the fingerprint table.
    pub chemicals: Vec<String>,
    /// Measurable recordings required per chemical.
    pub replicates: usize,
    pub base_seed: u64,
    /// Synthesis template; the seed field is overwritten per attempt.
    pub synth: SynthConfig,
    pub analyzer: AnalyzeParams,
}

impl ExperimentPlan {
    pub fn with_defaults(table: &FingerprintTable) -> Self {
        ExperimentPlan {
            chemicals: table.names().iter().map(|s| s.to_string()).collect(),
            replicates: 12,
            base_seed: 1,
            synth: SynthConfig::default(),
            analyzer: AnalyzeParams::default(),
        }
    }

    pub fn validate(&self, table: &FingerprintTable) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::Config(format!(
                "replicates must be at least 2, got {}",
                self.replicates
            )));
        }
        if self.chemicals.is_empty() {
            return Err(Error::Config("no chemicals requested".into()));
        }
        for name in &self.chemicals {
            if table.get(name).is_none() {
                return Err(Error::Config(format!(
                    "unknown chemical `{}`; known: {}",
                    name,
                    table.names().join(", ")
                )));
            }
        }
        self.synth.validate()
    }
}

/// One synthesized-and-analyzed recording.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub seed: u64,
    pub outcome: AnalysisOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub estimated: ChemicalResponseParams,
    pub significance: SignificanceReport,
    pub comparison: ComparisonReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChemicalExperiment {
    pub chemical: String,
    pub records: Vec<ReplicateRecord>,
    /// Immeasurable or cessation recordings resynthesized with the next seed.
    pub discards: usize,
    pub seeds_consumed: usize,
    /// `None` when the attempt cap was exceeded before enough measurable
    /// recordings were collected.
    pub aggregate: Option<AggregateResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub base_seed: u64,
    pub replicates: usize,
    pub chemicals: Vec<ChemicalExperiment>,
}

impl ExperimentSummary {
    pub fn failed_chemicals(&self) -> Vec<&str> {
        self.chemicals
            .iter()
            .filter(|c| c.aggregate.is_none())
            .map(|c| c.chemical.as_str())
            .collect()
    }
}

/// Run the full plan. Deterministic given the plan: attempt seeds are
/// `base_seed + chemical_index * 1e6 + attempt`.
pub fn run_experiment(plan: &ExperimentPlan, table: &FingerprintTable) -> Result<ExperimentSummary> {
    plan.validate(table)?;
    let cap = ATTEMPT_CAP_FACTOR * plan.replicates;
    let mut chemicals = Vec::with_capacity(plan.chemicals.len());

    for (ci, name) in plan.chemicals.iter().enumerate() {
        let chem = table.get(name).expect("validated").clone();
        let mut records = Vec::new();
        let mut set = ReplicateSet::new(chem.name.clone());
        let mut discards = 0usize;
        let mut attempts = 0usize;

        while set.ratios.len() < plan.replicates && attempts < cap {
            let seed = plan.base_seed + ci as u64 * CHEMICAL_SEED_STRIDE + attempts as u64;
            attempts += 1;
            let config = SynthConfig {
                rng_seed: seed,
                ..plan.synth.clone()
            };
            let (trace, event, _truth) = synth_trace(&config, &chem)?;
            let outcome = analyze(&trace, &event, &plan.analyzer)?;
            if let AnalysisOutcome::Measured { ratios, .. } = &outcome {
                set.ratios.push(*ratios);
                set.provenance.push(format!("seed={seed}"));
            } else {
                discards += 1;
            }
            records.push(ReplicateRecord { seed, outcome });
        }

        let aggregate = if set.ratios.len() == plan.replicates {
            let (estimated, significance) = aggregate_replicates(&set)?;
            let comparison = compare_to_reference(&estimated, &chem, plan.replicates)?;
            Some(AggregateResult {
                estimated,
                significance,
                comparison,
            })
        } else {
            None
        };
        debug_assert_eq!(attempts, set.ratios.len() + discards);
        chemicals.push(ChemicalExperiment {
            chemical: chem.name.clone(),
            records,
            discards,
            seeds_consumed: attempts,
            aggregate,
        });
    }

    Ok(ExperimentSummary {
        base_seed: plan.base_seed,
        replicates: plan.replicates,
        chemicals,
    })
}
