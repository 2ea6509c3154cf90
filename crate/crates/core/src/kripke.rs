//! Reachable-state semantics: the enumerated model, finite paths into target
//! state sets, and exact path-probability distributions over terminal
//! observables, plus a seeded Monte Carlo estimator for cross-validation.
//!
//! Because every rule application extends the protocol trace, the reachable
//! set from one initial state forms a tree; path probabilities are the
//! products of branch probabilities along edges, and the distribution over
//! terminal observables is their exact pushforward sum.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::model::{ActorId, Infrastructure, ModelParam};
use crate::rat::format_fraction;
use crate::transition::{is_terminal, successors, Dynamics, Scheduler, TransitionError};

/// Index into [`KripkeModel::states`].
pub type StateId = usize;

/// One stored edge of the reachable model.
#[derive(Debug, Clone)]
pub struct Edge {
    pub target: StateId,
    pub prob: BigRational,
}

/// The enumerated reachable model from one initial infrastructure.
#[derive(Debug, Clone)]
pub struct KripkeModel {
    states: Vec<Infrastructure>,
    edges: Vec<Vec<Edge>>,
    /// Exact probability of the unique path from the root to each state.
    path_prob: Vec<BigRational>,
    terminals: Vec<StateId>,
    max_depth: usize,
}

#[derive(Debug, Error)]
pub enum KripkeError {
    #[error("state ceiling of {ceiling} states exceeded during enumeration")]
    StateExplosion { ceiling: usize },
    #[error("invalid run setup: {0}")]
    BadSetup(String),
    #[error(transparent)]
    Transition(#[from] TransitionError),
}

fn validate_setup(
    init: &Infrastructure,
    sched: &Scheduler,
    dynamics: &Dynamics,
) -> Result<(), KripkeError> {
    dynamics
        .validate()
        .map_err(|e| KripkeError::BadSetup(e.to_string()))?;
    let violations = crate::model::validate_igraph(&init.igra);
    if !violations.is_empty() {
        return Err(KripkeError::BadSetup(format!(
            "initial snapshot invalid: {}",
            violations.join("; ")
        )));
    }
    if init.igra.clients.is_empty() {
        return Err(KripkeError::BadSetup("no clients".into()));
    }
    if let Scheduler::FixedOrder(order) = sched {
        let ordered: std::collections::BTreeSet<&ActorId> = order.iter().collect();
        let clients: std::collections::BTreeSet<&ActorId> = init.igra.clients.iter().collect();
        if order.len() != init.igra.clients.len() || ordered != clients {
            return Err(KripkeError::BadSetup(
                "fixed scheduling order must list every client exactly once".into(),
            ));
        }
    }
    Ok(())
}

/// Enumerate the full reachable model under the scheduler and round bound.
pub fn build_model(
    init: &Infrastructure,
    sched: &Scheduler,
    dynamics: &Dynamics,
    max_states: usize,
) -> Result<KripkeModel, KripkeError> {
    validate_setup(init, sched, dynamics)?;
    let mut states = vec![init.clone()];
    let mut edges: Vec<Vec<Edge>> = vec![Vec::new()];
    let mut path_prob = vec![BigRational::one()];
    let mut depth = vec![0usize];
    let mut terminals = Vec::new();
    let mut frontier = vec![0usize];
    while let Some(id) = frontier.pop() {
        let steps = successors(&states[id], sched, dynamics)?;
        if steps.is_empty() {
            terminals.push(id);
            continue;
        }
        for step in steps {
            if states.len() >= max_states {
                return Err(KripkeError::StateExplosion {
                    ceiling: max_states,
                });
            }
            let child = states.len();
            states.push(step.next);
            edges.push(Vec::new());
            path_prob.push(&path_prob[id] * &step.prob);
            depth.push(depth[id] + 1);
            edges[id].push(Edge {
                target: child,
                prob: step.prob,
            });
            frontier.push(child);
        }
    }
    terminals.sort_unstable();
    let max_depth = depth.iter().copied().max().unwrap_or(0);
    Ok(KripkeModel {
        states,
        edges,
        path_prob,
        terminals,
        max_depth,
    })
}

impl KripkeModel {
    pub fn init(&self) -> &Infrastructure {
        &self.states[0]
    }

    pub fn states(&self) -> &[Infrastructure] {
        &self.states
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn edges_from(&self, id: StateId) -> &[Edge] {
        &self.edges[id]
    }

    pub fn terminals(&self) -> &[StateId] {
        &self.terminals
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// Exact probability of the root-to-state path.
    pub fn path_probability(&self, id: StateId) -> &BigRational {
        &self.path_prob[id]
    }

    fn path_to(&self, id: StateId) -> Vec<StateId> {
        // Parent scan is fine at desk scale; edges form a tree.
        let mut parent = vec![usize::MAX; self.states.len()];
        for (source, out) in self.edges.iter().enumerate() {
            for e in out {
                parent[e.target] = source;
            }
        }
        let mut path = vec![id];
        let mut cur = id;
        while parent[cur] != usize::MAX {
            cur = parent[cur];
            path.push(cur);
        }
        path.reverse();
        path
    }
}

/// All maximal paths (initial state to round-budget exhaustion) whose
/// terminal state satisfies `target`. Paths hitting `target` earlier are not
/// truncated; only terminal membership counts.
pub fn paths_into(
    m: &KripkeModel,
    target: impl Fn(&Infrastructure) -> bool,
) -> Vec<Vec<StateId>> {
    m.terminals
        .iter()
        .filter(|&&t| target(&m.states[t]))
        .map(|&t| m.path_to(t))
        .collect()
}

/// Exact probability that a maximal path ends in `target`.
pub fn prob_into(m: &KripkeModel, target: impl Fn(&Infrastructure) -> bool) -> BigRational {
    m.terminals
        .iter()
        .filter(|&&t| target(&m.states[t]))
        .map(|&t| m.path_prob[t].clone())
        .sum()
}

/// Exact distribution over an observable of the terminal states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathDistribution {
    outcomes: BTreeMap<ModelParam, BigRational>,
    trace_count: u64,
}

impl PathDistribution {
    pub fn from_outcomes(outcomes: BTreeMap<ModelParam, BigRational>, trace_count: u64) -> Self {
        PathDistribution {
            outcomes,
            trace_count,
        }
    }

    /// Point mass on a single outcome.
    pub fn point_mass(outcome: ModelParam) -> Self {
        PathDistribution {
            outcomes: [(outcome, BigRational::one())].into(),
            trace_count: 1,
        }
    }

    pub fn outcomes(&self) -> &BTreeMap<ModelParam, BigRational> {
        &self.outcomes
    }

    pub fn prob(&self, outcome: &ModelParam) -> BigRational {
        self.outcomes.get(outcome).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn trace_count(&self) -> u64 {
        self.trace_count
    }

    pub fn total_mass(&self) -> BigRational {
        self.outcomes.values().sum()
    }

    pub fn is_normalized(&self) -> bool {
        self.total_mass().is_one() && self.outcomes.values().all(|p| !p.is_negative())
    }

    /// Sorted union support of two distributions.
    pub fn union_support<'a>(&'a self, other: &'a PathDistribution) -> Vec<&'a ModelParam> {
        let mut support: Vec<&ModelParam> = self.outcomes.keys().collect();
        support.extend(other.outcomes.keys());
        support.sort();
        support.dedup();
        support
    }

    /// Total variation distance, exact.
    pub fn total_variation(&self, other: &PathDistribution) -> BigRational {
        let two = BigRational::from_integer(2.into());
        self.union_support(other)
            .into_iter()
            .map(|o| {
                let diff = self.prob(o) - other.prob(o);
                if diff.is_negative() {
                    -diff
                } else {
                    diff
                }
            })
            .sum::<BigRational>()
            / two
    }

    /// Draw one outcome with these exact probabilities.
    pub fn sample(&self, rng: &mut ChaCha12Rng) -> ModelParam {
        let (outcomes, weights): (Vec<&ModelParam>, Vec<BigRational>) = self
            .outcomes
            .iter()
            .map(|(o, p)| (o, p.clone()))
            .unzip();
        outcomes[sample_index(&weights, rng)].clone()
    }

    /// Pushforward through a map on outcomes.
    pub fn map_outcomes(&self, f: impl Fn(&ModelParam) -> ModelParam) -> PathDistribution {
        let mut outcomes: BTreeMap<ModelParam, BigRational> = BTreeMap::new();
        for (o, p) in &self.outcomes {
            *outcomes.entry(f(o)).or_insert_with(BigRational::zero) += p;
        }
        PathDistribution {
            outcomes,
            trace_count: self.trace_count,
        }
    }

}

impl Serialize for PathDistribution {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let mut map = ser.serialize_map(Some(self.outcomes.len()))?;
        for (outcome, prob) in &self.outcomes {
            map.serialize_entry(&outcome.key(), &format_fraction(prob))?;
        }
        map.end()
    }
}

impl<'de> serde::Deserialize<'de> for PathDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = BTreeMap::<String, String>::deserialize(de)?;
        let mut outcomes = BTreeMap::new();
        for (key, prob) in &raw {
            let outcome = ModelParam::parse_key(key).map_err(D::Error::custom)?;
            let prob = crate::rat::parse_rational(prob).map_err(D::Error::custom)?;
            outcomes.insert(outcome, prob);
        }
        let trace_count = outcomes.len() as u64;
        Ok(PathDistribution {
            outcomes,
            trace_count,
        })
    }
}

/// Exact pushforward of the terminal-state distribution through `observable`.
pub fn terminal_distribution(
    m: &KripkeModel,
    observable: impl Fn(&Infrastructure) -> ModelParam,
) -> PathDistribution {
    let mut outcomes: BTreeMap<ModelParam, BigRational> = BTreeMap::new();
    for &t in &m.terminals {
        *outcomes
            .entry(observable(&m.states[t]))
            .or_insert_with(BigRational::zero) += &m.path_prob[t];
    }
    PathDistribution {
        outcomes,
        trace_count: m.terminals.len() as u64,
    }
}

/// The current model parameter, the default observable.
pub fn observe_curmodpar(i: &Infrastructure) -> ModelParam {
    i.igra.curmodpar.clone()
}

/// A fixed client's released gradient.
pub fn observe_gradient(client: &ActorId) -> impl Fn(&Infrastructure) -> ModelParam + '_ {
    move |i: &Infrastructure| i.igra.gradient[client].clone()
}

/// Rational-weighted choice. Weights are scaled to integers over a common
/// denominator and an exact uniform integer below their sum is drawn, so the
/// choice is unbiased whenever the scaled total fits in u64 (it does at desk
/// scale); otherwise a 128-bit ladder whose bias is below 2^-64 is used.
fn sample_index(weights: &[BigRational], rng: &mut ChaCha12Rng) -> usize {
    let denom: BigUint = weights.iter().fold(BigUint::one(), |acc, w| {
        let d = w.denom().to_biguint().expect("positive denominator");
        let g = acc.gcd(&d);
        acc / g * d
    });
    let scaled: Vec<BigUint> = weights
        .iter()
        .map(|w| {
            (w.numer().to_biguint().expect("nonnegative weight") * &denom)
                / w.denom().to_biguint().expect("positive")
        })
        .collect();
    let total: BigUint = scaled.iter().sum();
    if let Some(total64) = total.to_u64() {
        // Rejection sampling for an exact uniform draw in [0, total).
        let overflow = ((u64::MAX % total64) + 1) % total64;
        let zone = u64::MAX - overflow;
        let mut draw = rng.next_u64();
        while draw > zone {
            draw = rng.next_u64();
        }
        let mut pick = draw % total64;
        for (idx, w) in scaled.iter().enumerate() {
            let w = w.to_u64().expect("component below total");
            if pick < w {
                return idx;
            }
            pick -= w;
        }
        unreachable!("weights sum to total");
    }
    let mut hi = rng.next_u64() as u128;
    hi = (hi << 64) | rng.next_u64() as u128;
    let draw = BigUint::from(hi);
    let span = BigUint::one() << 128;
    let mut acc = BigUint::zero();
    for (idx, w) in scaled.iter().enumerate() {
        acc += w;
        if &draw * &total < &acc * &span {
            return idx;
        }
    }
    scaled.len() - 1
}

/// RNG for the i-th sample of a seeded experiment: one root seed, one
/// counter-mode stream per sample, so any partitioning of samples across
/// workers reproduces bit-identical draws.
pub fn sample_rng(seed: u64, sample_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(sample_index);
    rng
}

/// Run one sampled execution to its terminal state.
pub fn sample_terminal(
    init: &Infrastructure,
    sched: &Scheduler,
    dynamics: &Dynamics,
    rng: &mut ChaCha12Rng,
) -> Result<Infrastructure, KripkeError> {
    let mut state = init.clone();
    loop {
        let steps = successors(&state, sched, dynamics)?;
        if steps.is_empty() {
            debug_assert!(is_terminal(&state, &dynamics.cfg));
            return Ok(state);
        }
        let weights: Vec<BigRational> = steps.iter().map(|s| s.prob.clone()).collect();
        let pick = sample_index(&weights, rng);
        state = steps.into_iter().nth(pick).expect("index in range").next;
    }
}

/// Empirical terminal distribution from `samples` independent seeded runs.
/// Identical (seed, setup) pairs give bit-identical results; the worker count
/// only changes wall time.
pub fn mc_terminal_distribution(
    init: &Infrastructure,
    sched: &Scheduler,
    dynamics: &Dynamics,
    observable: impl Fn(&Infrastructure) -> ModelParam + Sync,
    samples: u64,
    seed: u64,
) -> Result<PathDistribution, KripkeError> {
    assert!(samples >= 1, "at least one sample");
    validate_setup(init, sched, dynamics)?;
    let workers = worker_count().min(samples as usize).max(1);
    let counts: BTreeMap<ModelParam, u64> = if workers <= 1 {
        let mut counts = BTreeMap::new();
        for i in 0..samples {
            let mut rng = sample_rng(seed, i);
            let terminal = sample_terminal(init, sched, dynamics, &mut rng)?;
            *counts.entry(observable(&terminal)).or_insert(0) += 1;
        }
        counts
    } else {
        let chunk = samples.div_ceil(workers as u64);
        let results: Vec<Result<BTreeMap<ModelParam, u64>, KripkeError>> =
            std::thread::scope(|scope| {
                let mut handles = Vec::new();
                for w in 0..workers as u64 {
                    let lo = w * chunk;
                    let hi = ((w + 1) * chunk).min(samples);
                    let observable = &observable;
                    handles.push(scope.spawn(move || {
                        let mut counts = BTreeMap::new();
                        for i in lo..hi {
                            let mut rng = sample_rng(seed, i);
                            let terminal = sample_terminal(init, sched, dynamics, &mut rng)?;
                            *counts.entry(observable(&terminal)).or_insert(0) += 1;
                        }
                        Ok(counts)
                    }));
                }
                handles
                    .into_iter()
                    .map(|h| h.join().expect("worker panicked"))
                    .collect()
            });
        let mut merged: BTreeMap<ModelParam, u64> = BTreeMap::new();
        for result in results {
            for (outcome, n) in result? {
                *merged.entry(outcome).or_insert(0) += n;
            }
        }
        merged
    };
    let total = BigRational::from_integer(samples.into());
    let outcomes = counts
        .into_iter()
        .map(|(o, n)| (o, BigRational::from_integer(n.into()) / &total))
        .collect();
    Ok(PathDistribution {
        outcomes,
        trace_count: samples,
    })
}

/// Worker count from the `FLDP_WORKERS` environment variable; absent or
/// unparsable means sequential.
pub fn worker_count() -> usize {
    std::env::var("FLDP_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::{
        DefenseTransform, GridSpec, LearningConfig, LossModel, NoiseMechanism,
    };
    use crate::model::{DataPoint, Dataset, IGraph};
    use crate::rat::{rat, ratio};
    use std::collections::BTreeMap as Map;

    fn one_client_noiseless() -> (Infrastructure, Dynamics) {
        let partition: Map<ActorId, Dataset> = [(
            ActorId::new("c1"),
            Dataset::new(vec![DataPoint::new("p1", vec![], rat(2))]).unwrap(),
        )]
        .into();
        let infra = Infrastructure::new(
            IGraph::with_partition_plan(
                ActorId::new("server"),
                partition,
                ModelParam::scalar(rat(0)),
            )
            .unwrap(),
        );
        let dynamics = Dynamics {
            model: LossModel::MeanEstimation,
            cfg: LearningConfig {
                eta: rat(1),
                rounds: 1,
                local_epochs: 1,
                grid: GridSpec::Exact,
            },
            defense: DefenseTransform::Identity,
            mech: NoiseMechanism::None,
        };
        (infra, dynamics)
    }

    fn one_client_noisy() -> (Infrastructure, Dynamics) {
        let (infra, mut dynamics) = one_client_noiseless();
        dynamics.cfg.grid = GridSpec::Grid {
            q: ratio(1, 4),
            lo: rat(-4),
            hi: rat(4),
        };
        dynamics.mech = NoiseMechanism::DiscreteLaplace {
            t: ratio(1, 2),
            clamp_steps: 1,
        };
        (infra, dynamics)
    }

    #[test]
    fn noiseless_model_has_four_states() {
        let (infra, dynamics) = one_client_noiseless();
        let m = build_model(&infra, &Scheduler::RoundRobin, &dynamics, 1_000).unwrap();
        // init, after-put, after-get, after-eval.
        assert_eq!(m.state_count(), 4);
        assert_eq!(m.terminals().len(), 1);
        assert_eq!(m.max_depth(), 3);
        let dist = terminal_distribution(&m, observe_curmodpar);
        assert_eq!(dist, PathDistribution::point_mass(ModelParam::scalar(rat(2))));
    }

    #[test]
    fn zero_rounds_stops_after_put() {
        let (infra, mut dynamics) = one_client_noiseless();
        dynamics.cfg.rounds = 0;
        let m = build_model(&infra, &Scheduler::RoundRobin, &dynamics, 1_000).unwrap();
        assert_eq!(m.state_count(), 2);
        assert_eq!(m.terminals(), &[1]);
        assert!(m.states()[1].put_done());
    }

    #[test]
    fn noisy_model_has_three_terminals() {
        let (infra, dynamics) = one_client_noisy();
        let m = build_model(&infra, &Scheduler::RoundRobin, &dynamics, 1_000).unwrap();
        assert_eq!(m.terminals().len(), 3);
        let dist = terminal_distribution(&m, observe_curmodpar);
        assert_eq!(dist.outcomes().len(), 3);
        assert!(dist.is_normalized());
        // Middle outcome (zero noise) carries mass 1/2.
        assert_eq!(dist.prob(&ModelParam::scalar(rat(2))), ratio(1, 2));
        assert_eq!(
            prob_into(&m, |s| s.igra.curmodpar == ModelParam::scalar(rat(2))),
            ratio(1, 2)
        );
    }

    #[test]
    fn state_ceiling_reported() {
        let (infra, dynamics) = one_client_noisy();
        match build_model(&infra, &Scheduler::RoundRobin, &dynamics, 3) {
            Err(KripkeError::StateExplosion { ceiling }) => assert_eq!(ceiling, 3),
            other => panic!("expected explosion, got {other:?}"),
        }
    }

    #[test]
    fn paths_into_selects_terminal_targets() {
        let (infra, dynamics) = one_client_noiseless();
        let m = build_model(&infra, &Scheduler::RoundRobin, &dynamics, 1_000).unwrap();
        let all = paths_into(&m, |_| true);
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].len(), 4);
        assert!(paths_into(&m, |_| false).is_empty());
        let mean = paths_into(&m, |s| s.igra.curmodpar == ModelParam::scalar(rat(2)));
        assert_eq!(mean.len(), 1);
    }

    #[test]
    fn prob_into_is_additive_and_conserves_mass() {
        let (infra, dynamics) = one_client_noisy();
        let m = build_model(&infra, &Scheduler::RoundRobin, &dynamics, 1_000).unwrap();
        assert_eq!(prob_into(&m, |_| true), rat(1));
        let low = ModelParam::scalar(ratio(7, 4));
        let high = ModelParam::scalar(ratio(9, 4));
        let pa = prob_into(&m, |s| s.igra.curmodpar == low);
        let pb = prob_into(&m, |s| s.igra.curmodpar == high);
        let pab = prob_into(&m, |s| {
            s.igra.curmodpar == low || s.igra.curmodpar == high
        });
        assert_eq!(pa + pb, pab);
    }

    #[test]
    fn constant_observable_gives_point_mass() {
        let (infra, dynamics) = one_client_noisy();
        let m = build_model(&infra, &Scheduler::RoundRobin, &dynamics, 1_000).unwrap();
        let dist = terminal_distribution(&m, |_| ModelParam::scalar(rat(0)));
        assert_eq!(dist.outcomes().len(), 1);
        assert_eq!(dist.prob(&ModelParam::scalar(rat(0))), rat(1));
    }

    #[test]
    fn mc_matches_point_mass_and_is_deterministic() {
        let (infra, dynamics) = one_client_noiseless();
        let exact = PathDistribution::point_mass(ModelParam::scalar(rat(2)));
        let first = mc_terminal_distribution(
            &infra,
            &Scheduler::RoundRobin,
            &dynamics,
            observe_curmodpar,
            200,
            42,
        )
        .unwrap();
        assert_eq!(first.outcomes(), exact.outcomes());
        let second = mc_terminal_distribution(
            &infra,
            &Scheduler::RoundRobin,
            &dynamics,
            observe_curmodpar,
            200,
            42,
        )
        .unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn mc_approaches_exact_distribution() {
        let (infra, dynamics) = one_client_noisy();
        let m = build_model(&infra, &Scheduler::RoundRobin, &dynamics, 1_000).unwrap();
        let exact = terminal_distribution(&m, observe_curmodpar);
        let empirical = mc_terminal_distribution(
            &infra,
            &Scheduler::RoundRobin,
            &dynamics,
            observe_curmodpar,
            20_000,
            7,
        )
        .unwrap();
        let tv = exact.total_variation(&empirical).to_f64().unwrap();
        assert!(tv <= 0.02, "tv = {tv}");
    }

    #[test]
    fn scheduler_order_does_not_change_terminal_distribution() {
        let partition: Map<ActorId, Dataset> = [
            (
                ActorId::new("c1"),
                Dataset::new(vec![DataPoint::new("p1", vec![], rat(0))]).unwrap(),
            ),
            (
                ActorId::new("c2"),
                Dataset::new(vec![DataPoint::new("p2", vec![], rat(1))]).unwrap(),
            ),
        ]
        .into();
        let infra = Infrastructure::new(
            IGraph::with_partition_plan(
                ActorId::new("server"),
                partition,
                ModelParam::scalar(rat(0)),
            )
            .unwrap(),
        );
        let dynamics = Dynamics {
            model: LossModel::MeanEstimation,
            cfg: LearningConfig {
                eta: rat(1),
                rounds: 1,
                local_epochs: 1,
                grid: GridSpec::Grid {
                    q: ratio(1, 4),
                    lo: rat(-2),
                    hi: rat(2),
                },
            },
            defense: DefenseTransform::Identity,
            mech: NoiseMechanism::DiscreteLaplace {
                t: ratio(1, 2),
                clamp_steps: 1,
            },
        };
        let round_robin = terminal_distribution(
            &build_model(&infra, &Scheduler::RoundRobin, &dynamics, 10_000).unwrap(),
            observe_curmodpar,
        );
        let reversed = terminal_distribution(
            &build_model(
                &infra,
                &Scheduler::FixedOrder(vec![ActorId::new("c2"), ActorId::new("c1")]),
                &dynamics,
                10_000,
            )
            .unwrap(),
            observe_curmodpar,
        );
        assert_eq!(round_robin.outcomes(), reversed.outcomes());
    }

    #[test]
    fn distribution_serializes_with_exact_strings() {
        let dist = PathDistribution::from_outcomes(
            [
                (ModelParam::scalar(ratio(1, 4)), ratio(1, 3)),
                (ModelParam::scalar(rat(-2)), ratio(2, 3)),
            ]
            .into(),
            2,
        );
        let json = serde_json::to_string(&dist).unwrap();
        assert_eq!(json, r#"{"-2":"2/3","0.25":"1/3"}"#);
    }
}
