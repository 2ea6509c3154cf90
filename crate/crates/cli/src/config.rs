//! Experiment configuration: one JSON document per run.
//!
//! Rationals are exact strings ("1/4", "0.25", "-2"); distributions map
//! comma-joined outcome coordinates to probability fractions. See the README
//! for the field-by-field schema.

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_rational::BigRational;
use serde::Deserialize;

use fldp_core::kripke::PathDistribution;
use fldp_core::learning::{DefenseTransform, LearningConfig, LossModel, NoiseMechanism};
use fldp_core::model::{ActorId, DataPoint, Dataset, IGraph, Infrastructure, ModelParam};
use fldp_core::moniteo::MoniteoConfig;
use fldp_core::privacy::{DecompositionMode, NeighborRun, PrivacyError};
use fldp_core::rat::serde_rational_opt;
use fldp_core::transition::{Dynamics, Scheduler};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_STATE_CEILING: usize = 1_000_000;

/// How the second run of a neighboring pair is derived from the first.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum NeighborSpec {
    /// Run 1 keeps the listed partitions; run 0 omits one point.
    OmitPoint { client: ActorId, id: String },
    /// Run 0 keeps the listed partitions; run 1 uses these instead.
    Explicit {
        clients: BTreeMap<ActorId, Vec<DataPoint>>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Scenario {
    /// Explicit inline partitions, optionally with a neighbor derivation.
    Custom {
        clients: BTreeMap<ActorId, Vec<DataPoint>>,
        #[serde(default)]
        neighbor: Option<NeighborSpec>,
    },
    /// The satellite-swarm case study.
    Moniteo(MoniteoConfig),
    /// Two explicit outcome distributions, bypassing the protocol.
    DistributionPair {
        d0: PathDistribution,
        d1: PathDistribution,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum RunMode {
    Exact {
        #[serde(default = "default_ceiling")]
        state_ceiling: usize,
    },
    Montecarlo {
        samples: u64,
        seed: u64,
    },
}

fn default_ceiling() -> usize {
    DEFAULT_STATE_CEILING
}

impl Default for RunMode {
    fn default() -> Self {
        RunMode::Exact {
            state_ceiling: DEFAULT_STATE_CEILING,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub scenario: Scenario,
    #[serde(default)]
    pub loss_model: Option<LossModel>,
    #[serde(default)]
    pub learning: Option<LearningConfig>,
    #[serde(default)]
    pub mechanism: Option<NoiseMechanism>,
    #[serde(default)]
    pub defense: Option<DefenseTransform>,
    #[serde(default)]
    pub scheduler: Option<Scheduler>,
    #[serde(default)]
    pub epsilon_budget: Option<f64>,
    #[serde(default, with = "serde_rational_opt")]
    pub delta: Option<BigRational>,
    #[serde(default)]
    pub decomposition_mode: Option<DecompositionMode>,
    #[serde(default)]
    pub mode: Option<RunMode>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<PrivacyError> for ConfigError {
    fn from(e: PrivacyError) -> Self {
        ConfigError(e.to_string())
    }
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("malformed configuration: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ConfigError(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn scheduler(&self) -> Scheduler {
        self.scheduler.clone().unwrap_or(Scheduler::RoundRobin)
    }

    pub fn mode(&self) -> RunMode {
        self.mode.clone().unwrap_or_default()
    }

    pub fn state_ceiling(&self) -> usize {
        match self.mode() {
            RunMode::Exact { state_ceiling } => state_ceiling,
            RunMode::Montecarlo { .. } => DEFAULT_STATE_CEILING,
        }
    }

    /// Shared run dynamics for protocol scenarios; moniteo carries its own.
    pub fn dynamics(&self) -> Result<Dynamics, ConfigError> {
        match &self.scenario {
            Scenario::Moniteo(m) => Ok(m.dynamics()),
            _ => {
                let learning = self
                    .learning
                    .clone()
                    .ok_or_else(|| ConfigError("missing learning configuration".into()))?;
                let dynamics = Dynamics {
                    model: self.loss_model.unwrap_or(LossModel::MeanEstimation),
                    cfg: learning,
                    defense: self.defense.clone().unwrap_or(DefenseTransform::Identity),
                    mech: self.mechanism.clone().unwrap_or(NoiseMechanism::None),
                };
                dynamics
                    .validate()
                    .map_err(|e| ConfigError(e.to_string()))?;
                Ok(dynamics)
            }
        }
    }
}

fn dataset_of(points: &[DataPoint]) -> Result<Dataset, ConfigError> {
    Dataset::new(points.to_vec()).map_err(|e| ConfigError(e.to_string()))
}

fn param_dim(dynamics: &Dynamics, parts: &BTreeMap<ActorId, Dataset>) -> usize {
    match dynamics.model {
        LossModel::MeanEstimation => 1,
        LossModel::LinearRegression => {
            1 + parts
                .values()
                .find_map(Dataset::feature_width)
                .unwrap_or(0)
        }
    }
}

/// Build an initial infrastructure from inline partitions.
pub fn infrastructure_from_clients(
    clients: &BTreeMap<ActorId, Vec<DataPoint>>,
    dynamics: &Dynamics,
) -> Result<Infrastructure, ConfigError> {
    let mut partition = BTreeMap::new();
    for (client, points) in clients {
        partition.insert(client.clone(), dataset_of(points)?);
    }
    let dim = param_dim(dynamics, &partition);
    let igraph = IGraph::with_partition_plan(
        ActorId::new("server"),
        partition,
        ModelParam::zeros(dim),
    )
    .map_err(|e| ConfigError(format!("partitions overlap: {e}")))?;
    Ok(Infrastructure::new(igraph))
}

/// Resolve the configured neighboring pair of runs for the custom scenario.
pub fn neighbor_run_from_custom(
    clients: &BTreeMap<ActorId, Vec<DataPoint>>,
    neighbor: &NeighborSpec,
    scheduler: Scheduler,
    dynamics: &Dynamics,
    max_states: usize,
) -> Result<NeighborRun, ConfigError> {
    let base = infrastructure_from_clients(clients, dynamics)?;
    let (i0, i1) = match neighbor {
        NeighborSpec::OmitPoint { client, id } => {
            let part = base
                .igra
                .partition
                .get(client)
                .ok_or_else(|| ConfigError(format!("unknown client {client}")))?;
            if !part.contains_id(id) {
                return Err(ConfigError(format!(
                    "client {client} has no point with id {id}"
                )));
            }
            let mut smaller = clients.clone();
            smaller.insert(
                client.clone(),
                part.without(id).points().cloned().collect(),
            );
            let i0 = infrastructure_from_clients(&smaller, dynamics)?;
            (i0, base)
        }
        NeighborSpec::Explicit { clients: other } => {
            let i1 = infrastructure_from_clients(other, dynamics)?;
            (base, i1)
        }
    };
    NeighborRun::new(i0, i1, scheduler, dynamics.clone(), max_states).map_err(ConfigError::from)
}
