//! The privacy meter: realized DP factor ε between two neighboring runs,
//! the trace-distribution DP check, and the per-client decomposition
//! verifier.
//!
//! ε is measured, never assumed: the exact outcome probabilities of both
//! runs are compared outcome by outcome. All comparisons happen on exact
//! rational ratios; logarithms appear only in the reported floats.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::kripke::{
    build_model, observe_curmodpar, observe_gradient, terminal_distribution, KripkeError,
    PathDistribution,
};
use crate::model::{neighbors_one, ActorId, Infrastructure, ModelParam};
use crate::rat::{format_fraction, ln_rational};
use crate::transition::{Dynamics, Scheduler};

/// Tolerance for comparisons that must go through floats (log space).
pub const EPS_TOLERANCE: f64 = 1e-9;

/// Per-outcome probability pair and its log-ratio ln(p0/p1).
#[derive(Debug, Clone)]
pub struct OutcomeRatio {
    pub outcome: ModelParam,
    pub p0: BigRational,
    pub p1: BigRational,
    pub log_ratio: f64,
}

/// Realized DP factor between two outcome distributions. `epsilon` is
/// `ln(max_ratio)` and +inf exactly when some outcome has one-sided support
/// (pure mode) or the (ε,δ) constraints are unsatisfiable.
#[derive(Debug, Clone)]
pub struct EpsilonReport {
    pub epsilon: f64,
    /// Exact e^ε; `None` iff `epsilon` is infinite.
    pub max_ratio: Option<BigRational>,
    pub per_outcome: Vec<OutcomeRatio>,
    pub delta: Option<BigRational>,
}

impl EpsilonReport {
    pub fn is_infinite(&self) -> bool {
        self.epsilon.is_infinite()
    }

    /// Whether the realized ε stays within `budget`, compared in log space
    /// at the reporting tolerance.
    pub fn within_budget(&self, budget: f64) -> bool {
        self.epsilon <= budget + EPS_TOLERANCE
    }
}

/// JSON value for a float that may be ±inf (JSON numbers cannot be).
pub(crate) fn json_float(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else if x > 0.0 {
        serde_json::json!("inf")
    } else {
        serde_json::json!("-inf")
    }
}

impl Serialize for EpsilonReport {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let mut st = ser.serialize_struct("EpsilonReport", 4)?;
        st.serialize_field("epsilon", &json_float(self.epsilon))?;
        st.serialize_field("e_epsilon", &self.max_ratio.as_ref().map(format_fraction))?;
        st.serialize_field("delta", &self.delta.as_ref().map(format_fraction))?;
        let rows: Vec<serde_json::Value> = self
            .per_outcome
            .iter()
            .map(|r| {
                serde_json::json!({
                    "outcome": r.outcome.key(),
                    "p0": format_fraction(&r.p0),
                    "p1": format_fraction(&r.p1),
                    "log_ratio": json_float(r.log_ratio),
                })
            })
            .collect();
        st.serialize_field("per_outcome", &rows)?;
        st.end()
    }
}

#[derive(Debug, Error)]
pub enum PrivacyError {
    #[error("global datasets are not neighbors (symmetric difference must be one point)")]
    NotNeighbors,
    #[error("runs are not per-client neighbors: {0}")]
    NotClientwiseNeighbors(String),
    #[error("precondition violated for client {client}: {reason}")]
    PreconditionViolation { client: ActorId, reason: String },
    #[error(transparent)]
    Kripke(#[from] KripkeError),
}

/// Two runs over per-client neighboring partitions with one shared
/// configuration. Every client's partition pair is either identical or
/// differs by exactly one point, and at least one client differs; the global
/// datasets are then neighbors exactly when a single client differs.
#[derive(Debug, Clone)]
pub struct NeighborRun {
    pub i0: Infrastructure,
    pub i1: Infrastructure,
    pub scheduler: Scheduler,
    pub dynamics: Dynamics,
    pub max_states: usize,
}

impl NeighborRun {
    pub fn new(
        i0: Infrastructure,
        i1: Infrastructure,
        scheduler: Scheduler,
        dynamics: Dynamics,
        max_states: usize,
    ) -> Result<Self, PrivacyError> {
        if i0.igra.clients != i1.igra.clients {
            return Err(PrivacyError::NotClientwiseNeighbors(
                "client sets differ".into(),
            ));
        }
        let mut any_differ = false;
        for c in &i0.igra.clients {
            let p0 = &i0.igra.partition[c];
            let p1 = &i1.igra.partition[c];
            if p0 == p1 {
                continue;
            }
            if !neighbors_one(p0, p1) {
                return Err(PrivacyError::NotClientwiseNeighbors(format!(
                    "client {c} differs by more than one point"
                )));
            }
            any_differ = true;
        }
        if !any_differ {
            return Err(PrivacyError::NotNeighbors);
        }
        Ok(NeighborRun {
            i0,
            i1,
            scheduler,
            dynamics,
            max_states,
        })
    }

    /// Whether the two global datasets are one-point neighbors.
    pub fn globally_neighbors(&self) -> bool {
        neighbors_one(&self.i0.igra.dataset, &self.i1.igra.dataset)
    }

    /// Terminal distributions of both runs under a shared observable. The
    /// two model builds are independent; with FLDP_WORKERS >= 2 they run on
    /// separate threads.
    pub fn terminal_distributions(
        &self,
        observable: impl Fn(&Infrastructure) -> ModelParam + Sync,
    ) -> Result<(PathDistribution, PathDistribution), KripkeError> {
        let (m0, m1) = self.build_models()?;
        Ok((
            terminal_distribution(&m0, &observable),
            terminal_distribution(&m1, &observable),
        ))
    }

    /// Both reachable models, built concurrently when workers allow.
    pub fn build_models(
        &self,
    ) -> Result<(crate::kripke::KripkeModel, crate::kripke::KripkeModel), KripkeError> {
        if crate::kripke::worker_count() >= 2 {
            std::thread::scope(|scope| {
                let h0 = scope.spawn(|| {
                    build_model(&self.i0, &self.scheduler, &self.dynamics, self.max_states)
                });
                let h1 = scope.spawn(|| {
                    build_model(&self.i1, &self.scheduler, &self.dynamics, self.max_states)
                });
                Ok((
                    h0.join().expect("model build panicked")?,
                    h1.join().expect("model build panicked")?,
                ))
            })
        } else {
            Ok((
                build_model(&self.i0, &self.scheduler, &self.dynamics, self.max_states)?,
                build_model(&self.i1, &self.scheduler, &self.dynamics, self.max_states)?,
            ))
        }
    }
}

fn signed_log_ratio(p0: &BigRational, p1: &BigRational) -> f64 {
    match (p0.is_zero(), p1.is_zero()) {
        (true, true) => 0.0,
        (true, false) => f64::NEG_INFINITY,
        (false, true) => f64::INFINITY,
        (false, false) => ln_rational(&(p0 / p1)),
    }
}

/// Smallest exact ratio R with P0(E) <= R * P1(E) + delta for every event E
/// in one direction; `None` means no finite R works. Only upper level sets
/// of the likelihood ratio need checking.
fn directional_ratio(
    support: &[&ModelParam],
    d0: &PathDistribution,
    d1: &PathDistribution,
    delta: &BigRational,
) -> Option<BigRational> {
    let mut order: Vec<&ModelParam> = support.to_vec();
    // Descending p0/p1, with p1 = 0 outcomes first.
    order.sort_by(|a, b| {
        let (a0, a1) = (d0.prob(a), d1.prob(a));
        let (b0, b1) = (d0.prob(b), d1.prob(b));
        (&b0 * &a1).cmp(&(&a0 * &b1))
    });
    let mut cum0 = BigRational::zero();
    let mut cum1 = BigRational::zero();
    let mut best = BigRational::one();
    for o in order {
        cum0 += d0.prob(o);
        cum1 += d1.prob(o);
        let slack = &cum0 - delta;
        if !slack.is_positive() {
            continue;
        }
        if cum1.is_zero() {
            return None;
        }
        let needed = slack / &cum1;
        if needed > best {
            best = needed;
        }
    }
    Some(best)
}

/// Realized DP factor between two normalized distributions.
///
/// Pure mode (`delta` unset): ε is the maximum |ln(p0/p1)| over the union
/// support, +inf on any one-sided zero. (ε,δ) mode: the smallest ε making
/// every event E satisfy P0(E) <= e^ε P1(E) + δ and symmetrically. Both
/// modes are symmetric in the argument order by construction.
pub fn realized_epsilon(
    d0: &PathDistribution,
    d1: &PathDistribution,
    delta: Option<BigRational>,
) -> EpsilonReport {
    assert!(d0.is_normalized(), "d0 must be a normalized distribution");
    assert!(d1.is_normalized(), "d1 must be a normalized distribution");
    let support = d0.union_support(d1);
    let per_outcome: Vec<OutcomeRatio> = support
        .iter()
        .map(|o| {
            let p0 = d0.prob(o);
            let p1 = d1.prob(o);
            OutcomeRatio {
                outcome: (*o).clone(),
                log_ratio: signed_log_ratio(&p0, &p1),
                p0,
                p1,
            }
        })
        .collect();
    let max_ratio = match &delta {
        None => {
            let mut max: Option<BigRational> = Some(BigRational::one());
            for r in &per_outcome {
                if r.p0.is_zero() || r.p1.is_zero() {
                    max = None;
                    break;
                }
                let ratio = if r.p0 >= r.p1 {
                    &r.p0 / &r.p1
                } else {
                    &r.p1 / &r.p0
                };
                if let Some(m) = &max {
                    if &ratio > m {
                        max = Some(ratio);
                    }
                }
            }
            max
        }
        Some(delta) => {
            let forward = directional_ratio(&support, d0, d1, delta);
            let backward = directional_ratio(&support, d1, d0, delta);
            match (forward, backward) {
                (Some(f), Some(b)) => Some(f.max(b)),
                _ => None,
            }
        }
    };
    let epsilon = match &max_ratio {
        Some(r) => ln_rational(r).max(0.0),
        None => f64::INFINITY,
    };
    EpsilonReport {
        epsilon,
        max_ratio,
        per_outcome,
        delta,
    }
}

/// Result of the trace-distribution DP check.
#[derive(Debug, Clone, Serialize)]
pub struct NiFlDpOutcome {
    pub holds: bool,
    pub epsilon_budget: f64,
    pub report: EpsilonReport,
}

/// Builds both runs, takes the terminal distributions of the current model
/// parameter, and checks the realized ε against the budget. The global
/// datasets must be one-point neighbors.
pub fn ni_fl_dp_check(run: &NeighborRun, epsilon_budget: f64) -> Result<NiFlDpOutcome, PrivacyError> {
    if !run.globally_neighbors() {
        return Err(PrivacyError::NotNeighbors);
    }
    let (d0, d1) = run.terminal_distributions(observe_curmodpar)?;
    let report = realized_epsilon(&d0, &d1, None);
    Ok(NiFlDpOutcome {
        holds: report.within_budget(epsilon_budget),
        epsilon_budget,
        report,
    })
}

/// Which neighbor structure the decomposition check expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionMode {
    /// Exactly one client's partition differs (by one point); the global ε
    /// must stay below that client's ε.
    OneClientDiffers,
    /// Every client's partition differs by one point; the global ε must stay
    /// below the sum of the per-client ε.
    AllClientsDiffer,
}

/// Per-client and global ε for a neighboring pair, plus the bound verdict.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionOutcome {
    pub mode: DecompositionMode,
    pub per_client: BTreeMap<ActorId, EpsilonReport>,
    pub global: EpsilonReport,
    pub bound_holds: bool,
}

fn check_decomposition_preconditions(
    run: &NeighborRun,
    mode: DecompositionMode,
) -> Result<(), PrivacyError> {
    let g0 = &run.i0.igra;
    let g1 = &run.i1.igra;
    if g0.clients != g1.clients {
        let client = g0
            .clients
            .symmetric_difference(&g1.clients)
            .next()
            .expect("sets differ")
            .clone();
        return Err(PrivacyError::PreconditionViolation {
            client,
            reason: "present in only one run".into(),
        });
    }
    let mut differing = Vec::new();
    for c in &g0.clients {
        let p0 = &g0.partition[c];
        let p1 = &g1.partition[c];
        if p0 == p1 {
            if mode == DecompositionMode::AllClientsDiffer {
                return Err(PrivacyError::PreconditionViolation {
                    client: c.clone(),
                    reason: "partitions identical, but every client must differ by one point"
                        .into(),
                });
            }
            continue;
        }
        if !neighbors_one(p0, p1) {
            return Err(PrivacyError::PreconditionViolation {
                client: c.clone(),
                reason: "partitions differ by more than one point".into(),
            });
        }
        differing.push(c.clone());
    }
    if mode == DecompositionMode::OneClientDiffers && differing.len() != 1 {
        let client = differing
            .first()
            .cloned()
            .unwrap_or_else(|| g0.clients.iter().next().expect("clients nonempty").clone());
        return Err(PrivacyError::PreconditionViolation {
            client,
            reason: format!(
                "exactly one client must differ, found {}",
                differing.len()
            ),
        });
    }
    Ok(())
}

/// Measures each client's gradient ε and the global model-parameter ε, then
/// checks the composition bound for the chosen mode.
pub fn decomposition_check(
    run: &NeighborRun,
    mode: DecompositionMode,
) -> Result<DecompositionOutcome, PrivacyError> {
    check_decomposition_preconditions(run, mode)?;
    let (m0, m1) = run.build_models()?;
    let mut per_client = BTreeMap::new();
    for c in &run.i0.igra.clients {
        let d0 = terminal_distribution(&m0, observe_gradient(c));
        let d1 = terminal_distribution(&m1, observe_gradient(c));
        per_client.insert(c.clone(), realized_epsilon(&d0, &d1, None));
    }
    let global = realized_epsilon(
        &terminal_distribution(&m0, observe_curmodpar),
        &terminal_distribution(&m1, observe_curmodpar),
        None,
    );
    let bound = match mode {
        DecompositionMode::OneClientDiffers => per_client
            .values()
            .map(|r| r.epsilon)
            .fold(f64::NEG_INFINITY, f64::max),
        DecompositionMode::AllClientsDiffer => per_client.values().map(|r| r.epsilon).sum(),
    };
    let bound_holds = if bound.is_infinite() {
        true
    } else {
        global.epsilon <= bound + EPS_TOLERANCE
    };
    Ok(DecompositionOutcome {
        mode,
        per_client,
        global,
        bound_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::{
        noise_pmf, DefenseTransform, GridSpec, LearningConfig, LossModel, NoiseMechanism,
    };
    use crate::model::{DataPoint, Dataset, IGraph};
    use crate::rat::{rat, ratio};
    use proptest::prelude::*;

    fn dist(pairs: &[(i64, BigRational)]) -> PathDistribution {
        PathDistribution::from_outcomes(
            pairs
                .iter()
                .map(|(o, p)| (ModelParam::scalar(rat(*o)), p.clone()))
                .collect(),
            pairs.len() as u64,
        )
    }

    #[test]
    fn identical_distributions_have_zero_epsilon() {
        let d = dist(&[(0, ratio(1, 2)), (1, ratio(1, 2))]);
        let report = realized_epsilon(&d, &d, None);
        assert_eq!(report.epsilon, 0.0);
        assert_eq!(report.max_ratio, Some(rat(1)));
    }

    #[test]
    fn skewed_pair_gives_ln_three() {
        let d0 = dist(&[(0, ratio(3, 4)), (1, ratio(1, 4))]);
        let d1 = dist(&[(0, ratio(1, 4)), (1, ratio(3, 4))]);
        let report = realized_epsilon(&d0, &d1, None);
        assert_eq!(report.max_ratio, Some(rat(3)));
        assert!((report.epsilon - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn one_sided_support_is_infinite() {
        let d0 = dist(&[(0, ratio(1, 2)), (1, ratio(1, 2))]);
        let d1 = dist(&[(0, rat(1))]);
        let report = realized_epsilon(&d0, &d1, None);
        assert!(report.is_infinite());
        assert_eq!(report.max_ratio, None);
        assert!(!report.within_budget(1e9));
    }

    #[test]
    fn epsilon_is_symmetric_and_nonnegative() {
        let d0 = dist(&[(0, ratio(2, 5)), (1, ratio(3, 5))]);
        let d1 = dist(&[(0, ratio(1, 5)), (1, ratio(4, 5))]);
        let fwd = realized_epsilon(&d0, &d1, None);
        let bwd = realized_epsilon(&d1, &d0, None);
        assert_eq!(fwd.max_ratio, bwd.max_ratio);
        assert_eq!(fwd.epsilon, bwd.epsilon);
        assert!(fwd.epsilon >= 0.0);
    }

    #[test]
    fn delta_mode_absorbs_small_one_sided_mass() {
        // Outcome 2 has p1 = 0 but mass 1/10 <= delta, so ε stays finite.
        let d0 = dist(&[(0, ratio(9, 10)), (2, ratio(1, 10))]);
        let d1 = dist(&[(0, rat(1))]);
        let pure = realized_epsilon(&d0, &d1, None);
        assert!(pure.is_infinite());
        let relaxed = realized_epsilon(&d0, &d1, Some(ratio(1, 10)));
        assert!(!relaxed.is_infinite());
        // With delta = 1/10 the remaining constraints all hold at ε = 0.
        assert_eq!(relaxed.max_ratio, Some(rat(1)));
        let tighter = realized_epsilon(&d0, &d1, Some(ratio(1, 20)));
        assert!(tighter.is_infinite());
    }

    #[test]
    fn delta_mode_matches_event_brute_force() {
        // Oracle: smallest R such that every event satisfies both directions,
        // found by scanning all 2^m events.
        let d0 = dist(&[(0, ratio(5, 10)), (1, ratio(3, 10)), (2, ratio(2, 10))]);
        let d1 = dist(&[(0, ratio(2, 10)), (1, ratio(3, 10)), (2, ratio(5, 10))]);
        let delta = ratio(1, 20);
        let report = realized_epsilon(&d0, &d1, Some(delta.clone()));
        let ratio_star = report.max_ratio.clone().unwrap();
        let outcomes: Vec<ModelParam> =
            d0.union_support(&d1).into_iter().cloned().collect();
        let mut worst = rat(1);
        for mask in 0u32..(1 << outcomes.len()) {
            let mut p0 = BigRational::zero();
            let mut p1 = BigRational::zero();
            for (i, o) in outcomes.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    p0 += d0.prob(o);
                    p1 += d1.prob(o);
                }
            }
            for (a, b) in [(&p0, &p1), (&p1, &p0)] {
                let slack = a - &delta;
                if slack.is_positive() {
                    assert!(!b.is_zero());
                    let needed = slack / b;
                    if needed > worst {
                        worst = needed;
                    }
                }
            }
        }
        assert_eq!(ratio_star, worst);
    }

    fn pair_infra(
        values0: &[(&str, &[(&str, (i64, i64))])],
        values1: &[(&str, &[(&str, (i64, i64))])],
    ) -> (Infrastructure, Infrastructure) {
        let build = |spec: &[(&str, &[(&str, (i64, i64))])]| {
            let partition: BTreeMap<ActorId, Dataset> = spec
                .iter()
                .map(|(c, pts)| {
                    (
                        ActorId::new(*c),
                        Dataset::new(
                            pts.iter()
                                .map(|(id, (n, d))| DataPoint::new(*id, vec![], ratio(*n, *d))),
                        )
                        .unwrap(),
                    )
                })
                .collect();
            Infrastructure::new(
                IGraph::with_partition_plan(
                    ActorId::new("server"),
                    partition,
                    ModelParam::scalar(rat(0)),
                )
                .unwrap(),
            )
        };
        (build(values0), build(values1))
    }

    fn narrow_grid_dynamics(t: (i64, i64), s: u32) -> Dynamics {
        Dynamics {
            model: LossModel::MeanEstimation,
            cfg: LearningConfig {
                eta: rat(1),
                rounds: 1,
                local_epochs: 1,
                grid: GridSpec::Grid {
                    q: ratio(1, 4),
                    lo: rat(0),
                    hi: ratio(1, 2),
                },
            },
            defense: DefenseTransform::Identity,
            mech: NoiseMechanism::DiscreteLaplace {
                t: ratio(t.0, t.1),
                clamp_steps: s,
            },
        }
    }

    #[test]
    fn noiseless_neighbors_with_distinct_means_are_fully_distinguishable() {
        let (i0, i1) = pair_infra(&[("c1", &[("p1", (1, 4))])], &[("c1", &[("p1", (1, 2))])]);
        let mut dynamics = narrow_grid_dynamics((1, 2), 2);
        dynamics.mech = NoiseMechanism::None;
        let run = NeighborRun::new(i0, i1, Scheduler::RoundRobin, dynamics, 10_000).unwrap();
        let outcome = ni_fl_dp_check(&run, 1e6).unwrap();
        assert!(outcome.report.is_infinite());
        assert!(!outcome.holds);
    }

    #[test]
    fn single_client_laplace_epsilon_matches_pmf_division_oracle() {
        // One client, one point, unit rate: the released gradient is the
        // point value plus clamped noise, so the two runs' distributions are
        // the clamped pmfs shifted to 1/4 and 1/2 on the grid {0,1/4,1/2}.
        let (i0, i1) = pair_infra(&[("c1", &[("p1", (1, 4))])], &[("c1", &[("p1", (1, 2))])]);
        let dynamics = narrow_grid_dynamics((1, 2), 2);
        let run =
            NeighborRun::new(i0, i1, Scheduler::RoundRobin, dynamics.clone(), 10_000).unwrap();
        let outcome = ni_fl_dp_check(&run, 2.0).unwrap();

        // Oracle: fold the noise pmf through shift-and-clamp by hand.
        let pmf = noise_pmf(&dynamics.mech);
        let clamped = |base: BigRational| {
            let mut m: BTreeMap<ModelParam, BigRational> = BTreeMap::new();
            for (k, p) in &pmf {
                let raw = &base + ratio(*k, 4);
                let v = if raw < rat(0) {
                    rat(0)
                } else if raw > ratio(1, 2) {
                    ratio(1, 2)
                } else {
                    raw
                };
                *m.entry(ModelParam::scalar(v)).or_insert_with(BigRational::zero) += p;
            }
            PathDistribution::from_outcomes(m, pmf.len() as u64)
        };
        let d0 = clamped(ratio(1, 4));
        let d1 = clamped(ratio(1, 2));
        let oracle = realized_epsilon(&d0, &d1, None);
        assert_eq!(outcome.report.max_ratio, oracle.max_ratio);
        assert!(!outcome.report.is_infinite());
        // Frozen from the hand computation: t=1/2, S=2 gives weights
        // (1,2,4,2,1)/10; shifted to 1/4: (3,4,3)/10; to 1/2: (1,2,7)/10.
        assert_eq!(outcome.report.max_ratio, Some(rat(3)));
        assert!(outcome.holds);
    }

    #[test]
    fn degenerate_identical_pair_is_rejected() {
        let (i0, i1) = pair_infra(&[("c1", &[("p1", (1, 4))])], &[("c1", &[("p1", (1, 4))])]);
        assert!(matches!(
            NeighborRun::new(
                i0,
                i1,
                Scheduler::RoundRobin,
                narrow_grid_dynamics((1, 2), 2),
                10_000
            ),
            Err(PrivacyError::NotNeighbors)
        ));
    }

    #[test]
    fn decomposition_non_differing_client_has_zero_epsilon() {
        // c2's partition is identical in both runs; c1 differs in one point's
        // value (equal sizes keep aggregation weights identical).
        let (i0, i1) = pair_infra(
            &[("c1", &[("p1", (1, 4))]), ("c2", &[("p2", (1, 2))])],
            &[("c1", &[("p1", (1, 2))]), ("c2", &[("p2", (1, 2))])],
        );
        let run = NeighborRun::new(
            i0,
            i1,
            Scheduler::RoundRobin,
            narrow_grid_dynamics((1, 2), 2),
            100_000,
        )
        .unwrap();
        let outcome = decomposition_check(&run, DecompositionMode::OneClientDiffers).unwrap();
        let c2 = outcome.per_client.get(&ActorId::new("c2")).unwrap();
        assert_eq!(c2.epsilon, 0.0);
        assert_eq!(c2.max_ratio, Some(rat(1)));
        let c1 = outcome.per_client.get(&ActorId::new("c1")).unwrap();
        assert!(outcome.global.epsilon <= c1.epsilon + EPS_TOLERANCE);
        assert!(outcome.bound_holds);
    }

    #[test]
    fn decomposition_mode_mismatch_names_client() {
        let (i0, i1) = pair_infra(
            &[("c1", &[("p1", (1, 4))]), ("c2", &[("p2", (1, 2))])],
            &[("c1", &[("p1", (1, 2))]), ("c2", &[("p2", (1, 2))])],
        );
        let run = NeighborRun::new(
            i0,
            i1,
            Scheduler::RoundRobin,
            narrow_grid_dynamics((1, 2), 2),
            100_000,
        )
        .unwrap();
        match decomposition_check(&run, DecompositionMode::AllClientsDiffer) {
            Err(PrivacyError::PreconditionViolation { client, .. }) => {
                assert_eq!(client, ActorId::new("c2"));
            }
            other => panic!("expected precondition violation, got {other:?}"),
        }
    }

    #[test]
    fn decomposition_all_clients_differ_sum_bound() {
        let (i0, i1) = pair_infra(
            &[("c1", &[("p1", (1, 4))]), ("c2", &[("p2", (1, 2))])],
            &[("c1", &[("p1", (1, 2))]), ("c2", &[("p2", (1, 4))])],
        );
        let run = NeighborRun::new(
            i0,
            i1,
            Scheduler::RoundRobin,
            narrow_grid_dynamics((1, 2), 2),
            100_000,
        )
        .unwrap();
        let outcome = decomposition_check(&run, DecompositionMode::AllClientsDiffer).unwrap();
        let sum: f64 = outcome.per_client.values().map(|r| r.epsilon).sum();
        assert!(outcome.global.epsilon <= sum + EPS_TOLERANCE);
        assert!(outcome.bound_holds);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn pushforward_never_increases_epsilon(
            masses0 in proptest::collection::vec(1u32..40, 4),
            masses1 in proptest::collection::vec(1u32..40, 4),
            mapping in proptest::collection::vec(0i64..3, 4),
        ) {
            let normalize = |masses: &[u32]| {
                let total: u32 = masses.iter().sum();
                dist(&masses.iter().enumerate().map(|(i, m)| {
                    (i as i64, ratio(*m as i64, total as i64))
                }).collect::<Vec<_>>())
            };
            let d0 = normalize(&masses0);
            let d1 = normalize(&masses1);
            let original = realized_epsilon(&d0, &d1, None).max_ratio.unwrap();
            let f = |o: &ModelParam| {
                let idx = o.coords()[0].to_integer().to_string().parse::<usize>().unwrap();
                ModelParam::scalar(rat(mapping[idx]))
            };
            let pushed = realized_epsilon(&d0.map_outcomes(f), &d1.map_outcomes(f), None)
                .max_ratio
                .unwrap();
            prop_assert!(pushed <= original);
        }
    }
}
