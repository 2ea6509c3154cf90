//! Satellite-swarm case study: a small constellation monitors surface
//! temperatures with federated learning, some measured locations are secret,
//! and the pipeline measures how well an observer of the released model
//! parameters can tell whether one secret measurement entered the training
//! data.
//!
//! The temperature field is linear in (latitude, longitude), so the loss
//! model is linear regression over d = 3 parameters. Worlds are generated
//! deterministically from a seed; every quantity is an exact rational.

use std::collections::BTreeMap;
use std::time::Instant;

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{advantage, bayes_optimal, AdvantageReport};
use crate::kripke::{mc_terminal_distribution, observe_curmodpar, KripkeError, PathDistribution};
use crate::learning::{
    client_update, DefenseTransform, GridSpec, LearnError, LearningConfig, LossModel,
    NoiseMechanism,
};
use crate::model::{ActorId, DataPoint, Dataset, IGraph, Infrastructure, ModelParam};
use crate::privacy::{realized_epsilon, EpsilonReport, NeighborRun, PrivacyError};
use crate::rat::{rat, ratio, serde_rational};
use crate::transition::{Dynamics, Scheduler};

/// Samples drawn per arm when exact enumeration overflows and the Monte
/// Carlo fallback kicks in (arm b uses seed `seed + b`).
pub const MC_FALLBACK_SAMPLES: u64 = 100_000;

/// Linear temperature field: value = base + lat_coeff * lat + lon_coeff * lon.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldCoeffs {
    #[serde(with = "serde_rational")]
    pub base: BigRational,
    #[serde(with = "serde_rational")]
    pub lat_coeff: BigRational,
    #[serde(with = "serde_rational")]
    pub lon_coeff: BigRational,
}

/// Exact field evaluation at a location.
pub fn field_value(coeffs: &FieldCoeffs, lat: &BigRational, lon: &BigRational) -> BigRational {
    &coeffs.base + &coeffs.lat_coeff * lat + &coeffs.lon_coeff * lon
}

/// Full configuration of a Moniteo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoniteoConfig {
    pub n_satellites: u32,
    pub points_per_satellite: u32,
    pub field_coeffs: FieldCoeffs,
    #[serde(with = "serde_rational")]
    pub noise_amp: BigRational,
    #[serde(with = "serde_rational")]
    pub secret_fraction: BigRational,
    pub seed: u64,
    pub learning: LearningConfig,
    pub mechanism: NoiseMechanism,
    pub defense: DefenseTransform,
    pub epsilon_budget: f64,
    #[serde(default = "default_max_states")]
    pub max_states: usize,
    #[serde(default = "default_mc_fallback")]
    pub mc_fallback: bool,
    #[serde(default = "default_fallback_samples")]
    pub mc_fallback_samples: u64,
}

fn default_max_states() -> usize {
    1_000_000
}

fn default_mc_fallback() -> bool {
    true
}

fn default_fallback_samples() -> u64 {
    MC_FALLBACK_SAMPLES
}

impl Default for MoniteoConfig {
    /// Desk-scale defaults: 2 satellites x 3 points, d = 3 parameters,
    /// 1 round, grid q = 1/4 on [-1/4, 1/4], clamp 2 steps. Exact
    /// enumeration finishes in seconds.
    fn default() -> Self {
        MoniteoConfig {
            n_satellites: 2,
            points_per_satellite: 3,
            field_coeffs: FieldCoeffs {
                base: rat(0),
                lat_coeff: ratio(1, 4),
                lon_coeff: ratio(1, 4),
            },
            noise_amp: ratio(1, 4),
            secret_fraction: ratio(1, 3),
            seed: 7,
            learning: LearningConfig {
                eta: ratio(1, 4),
                rounds: 1,
                local_epochs: 1,
                grid: GridSpec::Grid {
                    q: ratio(1, 4),
                    lo: ratio(-1, 4),
                    hi: ratio(1, 4),
                },
            },
            mechanism: NoiseMechanism::DiscreteLaplace {
                t: ratio(3, 4),
                clamp_steps: 2,
            },
            defense: DefenseTransform::Identity,
            epsilon_budget: 3.0,
            max_states: default_max_states(),
            mc_fallback: default_mc_fallback(),
            mc_fallback_samples: default_fallback_samples(),
        }
    }
}

impl MoniteoConfig {
    pub fn validate(&self) -> Result<(), MoniteoError> {
        if self.n_satellites == 0 || self.points_per_satellite == 0 {
            return Err(MoniteoError::BadConfig(
                "need at least one satellite and one point each".into(),
            ));
        }
        if self.noise_amp.is_negative() {
            return Err(MoniteoError::BadConfig(
                "measurement noise amplitude must be nonnegative".into(),
            ));
        }
        if self.secret_fraction.is_negative() || self.secret_fraction >= rat(1) {
            return Err(MoniteoError::BadConfig(
                "secret fraction must lie in [0, 1)".into(),
            ));
        }
        self.dynamics()
            .validate()
            .map_err(|e: LearnError| MoniteoError::BadConfig(e.to_string()))?;
        Ok(())
    }

    pub fn dynamics(&self) -> Dynamics {
        Dynamics {
            model: LossModel::LinearRegression,
            cfg: self.learning.clone(),
            defense: self.defense.clone(),
            mech: self.mechanism.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum MoniteoError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("satellite {0} holds no secret point")]
    NoSecretPoint(ActorId),
    #[error("no satellite holds a secret point")]
    NoSecretAnywhere,
    #[error(transparent)]
    Privacy(#[from] PrivacyError),
    #[error(transparent)]
    Kripke(#[from] KripkeError),
}

fn satellite_id(index: u32) -> ActorId {
    ActorId::new(format!("sat{index}"))
}

/// Deterministic Fisher-Yates, so the derivation is stable across library
/// versions.
fn shuffle<T>(items: &mut [T], rng: &mut ChaCha12Rng) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

fn ceil_fraction(fraction: &BigRational, total: u32) -> u32 {
    let scaled = fraction * rat(total as i64);
    let ceil = scaled.ceil().to_integer();
    ceil.to_u32().unwrap_or(total).min(total)
}

/// Generate a seeded world: each satellite observes `points_per_satellite`
/// distinct locations from a quasi-uniform lattice over [-1, 1]^2, values
/// follow the linear field plus a seeded perturbation in
/// [-noise_amp, noise_amp], and a `secret_fraction` of each satellite's
/// points is flagged secret.
pub fn generate_world(cfg: &MoniteoConfig) -> BTreeMap<ActorId, Dataset> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let total = (cfg.n_satellites * cfg.points_per_satellite) as usize;
    // Smallest lattice refinement with enough distinct sites.
    let mut level = 1u32;
    while (2usize.pow(level + 1) + 1).pow(2) < total {
        level += 1;
    }
    let denom = 2i64.pow(level);
    let mut sites: Vec<(BigRational, BigRational)> = Vec::new();
    for i in -denom..=denom {
        for j in -denom..=denom {
            sites.push((ratio(i, denom), ratio(j, denom)));
        }
    }
    shuffle(&mut sites, &mut rng);
    let secret_count = ceil_fraction(&cfg.secret_fraction, cfg.points_per_satellite);
    let mut world = BTreeMap::new();
    for s in 0..cfg.n_satellites {
        let mut points = Vec::new();
        for p in 0..cfg.points_per_satellite {
            let (lat, lon) = sites[(s * cfg.points_per_satellite + p) as usize].clone();
            let jitter = (rng.next_u64() % 33) as i64 - 16;
            let value =
                field_value(&cfg.field_coeffs, &lat, &lon) + &cfg.noise_amp * ratio(jitter, 16);
            let mut point = DataPoint::new(format!("sat{s}_p{p}"), vec![lat, lon], value);
            point.secret = p < secret_count;
            points.push(point);
        }
        world.insert(
            satellite_id(s),
            Dataset::new(points).expect("generated ids are unique"),
        );
    }
    world
}

fn infrastructure_for(partition: BTreeMap<ActorId, Dataset>) -> Infrastructure {
    Infrastructure::new(
        IGraph::with_partition_plan(
            ActorId::new("server"),
            partition,
            ModelParam::zeros(3),
        )
        .expect("world partitions are disjoint by construction"),
    )
}

/// Check that the first-round deterministic client updates of both arms land
/// inside the grid bounds, i.e. the grid is wide enough for the achievable
/// model parameters. (Released gradients of later rounds are clamped anyway.)
fn validate_grid_covers_updates(
    cfg: &MoniteoConfig,
    arms: [&Infrastructure; 2],
) -> Result<(), MoniteoError> {
    let (lo, hi) = match &cfg.learning.grid {
        GridSpec::Grid { lo, hi, .. } => (lo.clone(), hi.clone()),
        GridSpec::Exact => return Ok(()),
    };
    let dynamics = cfg.dynamics();
    for infra in arms {
        for (sat, part) in &infra.igra.partition {
            let update = client_update(
                dynamics.model,
                &dynamics.cfg,
                &infra.igra.curmodpar,
                part,
                &dynamics.defense,
            )
            .map_err(|e| MoniteoError::BadConfig(e.to_string()))?;
            for c in update.coords() {
                if c < &lo || c > &hi {
                    return Err(MoniteoError::BadConfig(format!(
                        "grid [{lo}, {hi}] does not cover satellite {sat}'s update \
                         coordinate {c}; widen the grid or shrink the field"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Build the neighboring pair for `target`: arm 1 keeps the full world, arm
/// 0 omits the target's first secret point. All other partitions are shared
/// verbatim.
pub fn neighbor_pair_omit_secret(
    world: &BTreeMap<ActorId, Dataset>,
    target: &ActorId,
    cfg: &MoniteoConfig,
) -> Result<(NeighborRun, DataPoint), MoniteoError> {
    let part = world
        .get(target)
        .ok_or_else(|| MoniteoError::BadConfig(format!("unknown satellite {target}")))?;
    let omitted = part
        .points()
        .find(|p| p.secret)
        .cloned()
        .ok_or_else(|| MoniteoError::NoSecretPoint(target.clone()))?;
    let mut smaller = world.clone();
    smaller.insert(target.clone(), part.without(&omitted.id));
    let i0 = infrastructure_for(smaller);
    let i1 = infrastructure_for(world.clone());
    validate_grid_covers_updates(cfg, [&i0, &i1])?;
    let run = NeighborRun::new(
        i0,
        i1,
        Scheduler::RoundRobin,
        cfg.dynamics(),
        cfg.max_states,
    )?;
    Ok((run, omitted))
}

/// End-to-end measurement result.
#[derive(Debug, Clone, Serialize)]
pub struct MoniteoReport {
    pub target: ActorId,
    pub omitted_point: String,
    pub epsilon: EpsilonReport,
    pub advantage: AdvantageReport,
    pub budget_ok: bool,
    pub epsilon_budget: f64,
    /// False when the Monte Carlo fallback produced the distributions.
    pub exact: bool,
    pub runtime_ms: u64,
}

/// Generate the world, build the omit-one-secret neighbor pair for the first
/// satellite holding a secret point, and measure ε and the distinguishing
/// advantage — exactly when the state space fits the ceiling, by seeded
/// Monte Carlo otherwise.
pub fn run_moniteo(cfg: &MoniteoConfig) -> Result<MoniteoReport, MoniteoError> {
    cfg.validate()?;
    let started = Instant::now();
    let world = generate_world(cfg);
    let target = world
        .iter()
        .find(|(_, part)| part.points().any(|p| p.secret))
        .map(|(sat, _)| sat.clone())
        .ok_or(MoniteoError::NoSecretAnywhere)?;
    let (run, omitted) = neighbor_pair_omit_secret(&world, &target, cfg)?;
    let (d0, d1, exact) = match run.terminal_distributions(observe_curmodpar) {
        Ok((d0, d1)) => (d0, d1, true),
        Err(KripkeError::StateExplosion { .. }) if cfg.mc_fallback => {
            let sample_arm = |infra: &Infrastructure, arm: u64| -> Result<PathDistribution, KripkeError> {
                mc_terminal_distribution(
                    infra,
                    &run.scheduler,
                    &run.dynamics,
                    observe_curmodpar,
                    cfg.mc_fallback_samples,
                    cfg.seed.wrapping_add(arm),
                )
            };
            let d0 = sample_arm(&run.i0, 0)?;
            let d1 = sample_arm(&run.i1, 1)?;
            (d0, d1, false)
        }
        Err(e) => return Err(e.into()),
    };
    let epsilon = realized_epsilon(&d0, &d1, None);
    let advantage = advantage(&bayes_optimal(&d0, &d1), &d0, &d1);
    let budget_ok = epsilon.within_budget(cfg.epsilon_budget);
    Ok(MoniteoReport {
        target,
        omitted_point: omitted.id,
        epsilon,
        advantage,
        budget_ok,
        epsilon_budget: cfg.epsilon_budget,
        exact,
        runtime_ms: started.elapsed().as_millis() as u64,
    })
}

/// One-line human summary for console output.
pub fn summary_line(report: &MoniteoReport) -> String {
    let eps = if report.epsilon.epsilon.is_finite() {
        format!("{:.6}", report.epsilon.epsilon)
    } else {
        "inf".to_string()
    };
    format!(
        "moniteo: omitted {} from {}; realized eps = {} (budget {}, {}), bayes advantage = {:.6}, {} in {} ms",
        report.omitted_point,
        report.target,
        eps,
        report.epsilon_budget,
        if report.budget_ok { "ok" } else { "violated" },
        report.advantage.advantage.to_f64().unwrap_or(f64::NAN),
        if report.exact { "exact" } else { "monte-carlo" },
        report.runtime_ms,
    )
}
