//! The protocol's state-transition rules and scheduler-driven successor
//! generation.
//!
//! Three rules drive a run: `step_put_part` deploys the planned data
//! partition, `step_get_grad` collects one client's gradient (branching over
//! the noise support with exact probabilities), and `step_eval_server`
//! aggregates once every client is ready. A round bound makes the otherwise
//! unbounded round loop finite; a state is terminal once the partition is
//! deployed and the bound is exhausted.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learning::{
    clamp, client_update, noise_pmf, server_eval, DefenseTransform, GridSpec, LearnError,
    LearningConfig, LossModel, NoiseMechanism,
};
use crate::model::{ActorId, Dataset, Event, Infrastructure, ModelParam};

/// Everything a run needs besides the state itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dynamics {
    pub model: LossModel,
    pub cfg: LearningConfig,
    pub defense: DefenseTransform,
    pub mech: NoiseMechanism,
}

impl Dynamics {
    pub fn validate(&self) -> Result<(), LearnError> {
        self.cfg.validate()?;
        self.mech.validate()?;
        self.defense.validate()?;
        if !self.mech.is_none() && matches!(self.cfg.grid, GridSpec::Exact) {
            return Err(LearnError::BadConfig(
                "discrete noise steps need a grid; use mechanism none in exact mode".into(),
            ));
        }
        Ok(())
    }
}

/// One outgoing edge: successor state, branch probability, and the event
/// that produced it.
#[derive(Debug, Clone)]
pub struct ProbStep {
    pub next: Infrastructure,
    pub prob: BigRational,
    pub event: Event,
}

/// How nondeterminism between enabled rules is resolved during enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheduler {
    /// Clients polled in sorted id order; exactly one rule choice per state.
    RoundRobin,
    /// Clients polled in the given fixed order (must enumerate all clients).
    FixedOrder(Vec<ActorId>),
    /// Every enabled rule branches; for invariant testing only, since
    /// probabilities then sum to 1 per rule choice, not per state.
    FullNondeterminism,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransitionError {
    #[error("partition already deployed")]
    NotInitial,
    #[error("bad partition: {0}")]
    BadPartition(String),
    #[error("rule not enabled: {0}")]
    NotEnabled(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// Deploy the planned partition: records the Put event, resets `ready`, and
/// installs the parts. Enabled only before any Put.
pub fn step_put_part(
    i: &Infrastructure,
    parts: &BTreeMap<ActorId, Dataset>,
) -> Result<Infrastructure, TransitionError> {
    if i.put_done() {
        return Err(TransitionError::NotInitial);
    }
    let part_clients: Vec<&ActorId> = parts.keys().collect();
    let graph_clients: Vec<&ActorId> = i.igra.clients.iter().collect();
    if part_clients != graph_clients {
        return Err(TransitionError::BadPartition(
            "partition domain differs from clients".into(),
        ));
    }
    let union = Dataset::disjoint_union(parts.values())
        .map_err(|e| TransitionError::BadPartition(e.to_string()))?;
    if union != i.igra.dataset {
        return Err(TransitionError::BadPartition(
            "partition union differs from dataset".into(),
        ));
    }
    let mut igra = i.igra.clone();
    igra.partition = parts.clone();
    igra.ready.clear();
    Ok(i.with_event(igra, Event::Put(parts.clone())))
}

/// Collect client `c`'s gradient: one successor per achievable noisy release,
/// with branches that clamp to the same released value merged.
pub fn step_get_grad(
    i: &Infrastructure,
    c: &ActorId,
    dynamics: &Dynamics,
) -> Result<Vec<ProbStep>, TransitionError> {
    if !i.igra.clients.contains(c) {
        return Err(TransitionError::NotEnabled(format!("{c} is not a client")));
    }
    if !i.put_done() {
        return Err(TransitionError::NotEnabled(
            "partition not deployed yet".into(),
        ));
    }
    if i.igra.ready.contains(c) {
        return Err(TransitionError::NotEnabled(format!(
            "{c} already released a gradient this round"
        )));
    }
    let part = &i.igra.partition[c];
    if part.is_empty() {
        return Err(TransitionError::NotEnabled(format!(
            "{c} has an empty partition"
        )));
    }
    let base = client_update(
        dynamics.model,
        &dynamics.cfg,
        &i.igra.curmodpar,
        part,
        &dynamics.defense,
    )?;

    let make_successor = |grad: ModelParam| {
        let mut igra = i.igra.clone();
        igra.ready.insert(c.clone());
        igra.gradient.insert(c.clone(), grad.clone());
        let event = Event::Get {
            client: c.clone(),
            grad,
        };
        i.with_event(igra, event.clone())
    };

    match &dynamics.mech {
        NoiseMechanism::None => {
            let released = clamp(&dynamics.cfg.grid, &base);
            Ok(vec![ProbStep {
                next: make_successor(released.clone()),
                prob: BigRational::one(),
                event: Event::Get {
                    client: c.clone(),
                    grad: released,
                },
            }])
        }
        mech @ NoiseMechanism::DiscreteLaplace { .. } => {
            let q = match &dynamics.cfg.grid {
                GridSpec::Grid { q, .. } => q.clone(),
                GridSpec::Exact => unreachable!("validated: noise requires a grid"),
            };
            let pmf = noise_pmf(mech);
            // Product measure over coordinates; merge branches whose clamped
            // release coincides.
            let mut outcomes: BTreeMap<ModelParam, BigRational> = BTreeMap::new();
            let mut stack: Vec<(Vec<BigRational>, BigRational)> =
                vec![(Vec::new(), BigRational::one())];
            for coord in base.coords() {
                let mut next_stack = Vec::with_capacity(stack.len() * pmf.len());
                for (prefix, prob) in &stack {
                    for (step, p) in &pmf {
                        let mut coords = prefix.clone();
                        coords.push(coord + BigRational::from_integer(BigInt::from(*step)) * &q);
                        next_stack.push((coords, prob * p));
                    }
                }
                stack = next_stack;
            }
            for (coords, prob) in stack {
                let released = clamp(&dynamics.cfg.grid, &ModelParam::new(coords));
                *outcomes.entry(released).or_insert_with(num_traits::zero) += prob;
            }
            Ok(outcomes
                .into_iter()
                .map(|(grad, prob)| ProbStep {
                    next: make_successor(grad.clone()),
                    prob,
                    event: Event::Get {
                        client: c.clone(),
                        grad,
                    },
                })
                .collect())
        }
    }
}

/// Aggregate all gradients into the new model parameter; requires every
/// client ready. Clears `ready` for the next round.
pub fn step_eval_server(
    i: &Infrastructure,
    dynamics: &Dynamics,
) -> Result<Infrastructure, TransitionError> {
    if i.igra.clients.is_empty() {
        return Err(TransitionError::NotEnabled("no clients".into()));
    }
    if i.igra.ready != i.igra.clients {
        return Err(TransitionError::NotEnabled(
            "not all clients are ready".into(),
        ));
    }
    let newmodel = server_eval(
        &i.igra.gradient,
        &i.igra.partition,
        i.igra.dataset.len(),
        &dynamics.cfg.grid,
    )?;
    let mut igra = i.igra.clone();
    igra.curmodpar = newmodel.clone();
    igra.ready.clear();
    Ok(i.with_event(igra, Event::Eval(newmodel)))
}

/// True when no rule should fire anymore: the partition is deployed and the
/// round budget is spent.
pub fn is_terminal(i: &Infrastructure, cfg: &LearningConfig) -> bool {
    i.put_done() && i.rounds_done() >= cfg.rounds as usize
}

fn unready_clients<'a>(i: &'a Infrastructure, sched: &'a Scheduler) -> Vec<&'a ActorId> {
    let unready =
        |c: &&ActorId| i.igra.clients.contains(*c) && !i.igra.ready.contains(*c);
    match sched {
        Scheduler::RoundRobin => i
            .igra
            .clients
            .iter()
            .filter(|c| !i.igra.ready.contains(*c))
            .take(1)
            .collect(),
        Scheduler::FixedOrder(order) => {
            order.iter().filter(unready).take(1).collect()
        }
        Scheduler::FullNondeterminism => i
            .igra
            .clients
            .iter()
            .filter(|c| !i.igra.ready.contains(*c))
            .collect(),
    }
}

/// All enabled rule applications from `i` under the scheduler. Empty exactly
/// when `i` is terminal.
pub fn successors(
    i: &Infrastructure,
    sched: &Scheduler,
    dynamics: &Dynamics,
) -> Result<Vec<ProbStep>, TransitionError> {
    if is_terminal(i, &dynamics.cfg) {
        return Ok(Vec::new());
    }
    if !i.put_done() {
        let next = step_put_part(i, &i.igra.partition.clone())?;
        let event = Event::Put(i.igra.partition.clone());
        return Ok(vec![ProbStep {
            next,
            prob: BigRational::one(),
            event,
        }]);
    }
    if i.igra.ready == i.igra.clients {
        let next = step_eval_server(i, dynamics)?;
        let event = match next.current_trace().newest_first().next() {
            Some(e @ Event::Eval(_)) => e.clone(),
            _ => unreachable!("eval step records an Eval event"),
        };
        return Ok(vec![ProbStep {
            next,
            prob: BigRational::one(),
            event,
        }]);
    }
    let mut steps = Vec::new();
    for c in unready_clients(i, sched) {
        steps.extend(step_get_grad(i, c, dynamics)?);
    }
    Ok(steps)
}
