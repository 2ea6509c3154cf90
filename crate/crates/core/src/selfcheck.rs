//! Built-in oracle suite behind `fldp validate`: seeded randomized checks of
//! the advantage identity, exhaustive adversary optimality, the event-level
//! DP inequality, and Monte Carlo versus exact enumeration.
//!
//! Each check is an independent computation path from the code it verifies
//! (direct sums and exhaustive enumerations rather than the closed forms),
//! so a defect in either side surfaces as a mismatch.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;
use rand_chacha::ChaCha12Rng;
use rand::SeedableRng;

use crate::adversary::{advantage, bayes_optimal, brute_force_best_advantage, tight_pair, Adversary};
use crate::kripke::{
    build_model, mc_terminal_distribution, observe_curmodpar, sample_rng, terminal_distribution,
    PathDistribution,
};
use crate::learning::{DefenseTransform, GridSpec, LearningConfig, LossModel, NoiseMechanism};
use crate::model::{ActorId, DataPoint, Dataset, IGraph, Infrastructure, ModelParam};
use crate::privacy::{realized_epsilon, NeighborRun};
use crate::rat::{rat, ratio};
use crate::transition::{Dynamics, Scheduler};

/// Outcome of one self-check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn pass(name: &str, detail: String) -> Self {
        CheckResult {
            name: name.into(),
            passed: true,
            detail,
        }
    }

    fn fail(name: &str, detail: String) -> Self {
        CheckResult {
            name: name.into(),
            passed: false,
            detail,
        }
    }
}

/// A seeded random pmf over at most `max_outcomes` integer-labelled
/// outcomes, exactly normalized. `strictly_positive` forbids zero masses.
pub fn random_pmf(
    rng: &mut ChaCha12Rng,
    max_outcomes: usize,
    strictly_positive: bool,
) -> PathDistribution {
    let m = 2 + (rng.next_u64() as usize) % (max_outcomes - 1);
    random_pmf_with(rng, m, strictly_positive)
}

/// As [`random_pmf`] with the outcome count fixed, so pairs can share a
/// support.
pub fn random_pmf_with(
    rng: &mut ChaCha12Rng,
    m: usize,
    strictly_positive: bool,
) -> PathDistribution {
    let mut masses = Vec::with_capacity(m);
    loop {
        masses.clear();
        for _ in 0..m {
            let lo = if strictly_positive { 1 } else { 0 };
            masses.push(lo + rng.next_u64() % 30);
        }
        if masses.iter().sum::<u64>() > 0 {
            break;
        }
    }
    let total: u64 = masses.iter().sum();
    let outcomes: BTreeMap<ModelParam, BigRational> = masses
        .iter()
        .enumerate()
        .filter(|(_, mass)| **mass > 0)
        .map(|(i, mass)| {
            (
                ModelParam::scalar(rat(i as i64)),
                BigRational::new((*mass).into(), total.into()),
            )
        })
        .collect();
    PathDistribution::from_outcomes(outcomes, m as u64)
}

fn random_adversary(rng: &mut ChaCha12Rng, max_outcomes: usize) -> Adversary {
    let bits = rng.next_u64();
    let decision = (0..max_outcomes)
        .map(|i| (ModelParam::scalar(rat(i as i64)), bits & (1 << i) != 0))
        .collect();
    Adversary::from_table(decision, bits & (1 << 63) != 0, "random table")
}

/// Advantage identity: advantage = 2 * success - 1, exact, over seeded
/// random pairs and random deterministic adversaries.
pub fn check_advantage_identity(
    pairs: u32,
    adversaries_per_pair: u32,
    max_outcomes: usize,
    seed: u64,
) -> CheckResult {
    let name = "advantage-identity";
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for p in 0..pairs {
        let d0 = random_pmf(&mut rng, max_outcomes, false);
        let d1 = random_pmf(&mut rng, max_outcomes, false);
        for a in 0..adversaries_per_pair {
            let adv = random_adversary(&mut rng, max_outcomes);
            let report = advantage(&adv, &d0, &d1);
            if report.advantage != rat(2) * &report.success_prob - rat(1) {
                return CheckResult::fail(
                    name,
                    format!("identity violated on pair {p}, adversary {a}"),
                );
            }
        }
    }
    CheckResult::pass(
        name,
        format!("{pairs} pairs x {adversaries_per_pair} adversaries, exact equality"),
    )
}

/// Exhaustive optimality: over every deterministic decision table, the best
/// advantage equals both the Bayes-optimal adversary's advantage and the
/// total variation distance, exactly.
pub fn check_bayes_optimality(pairs: u32, max_outcomes: usize, seed: u64) -> CheckResult {
    let name = "bayes-optimality";
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for p in 0..pairs {
        let d0 = random_pmf(&mut rng, max_outcomes, false);
        let d1 = random_pmf(&mut rng, max_outcomes, false);
        let (best, _) = brute_force_best_advantage(&d0, &d1);
        let bayes = advantage(&bayes_optimal(&d0, &d1), &d0, &d1);
        if best != bayes.advantage {
            return CheckResult::fail(name, format!("bayes not optimal on pair {p}"));
        }
        if best != bayes.tv {
            return CheckResult::fail(name, format!("max advantage differs from TV on pair {p}"));
        }
    }
    CheckResult::pass(
        name,
        format!("{pairs} pairs, exhaustive tables match Bayes advantage and TV"),
    )
}

/// Bound chain TV <= (e^ε-1)/(e^ε+1) <= 1-e^{-ε} on strictly positive pairs,
/// with equality of the first bound on the two-outcome witness pairs.
pub fn check_bound_chain(pairs: u32, max_outcomes: usize, seed: u64) -> CheckResult {
    let name = "bound-chain";
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let one = BigRational::one();
    for p in 0..pairs {
        let m = 2 + (rng.next_u64() as usize) % (max_outcomes - 1);
        let d0 = random_pmf_with(&mut rng, m, true);
        let d1 = random_pmf_with(&mut rng, m, true);
        let eps = realized_epsilon(&d0, &d1, None);
        let ratio = match eps.max_ratio {
            Some(r) => r,
            None => return CheckResult::fail(name, format!("unexpected infinite ε on pair {p}")),
        };
        let tv = d0.total_variation(&d1);
        let tight = (&ratio - &one) / (&ratio + &one);
        let loose = &one - &one / &ratio;
        if !(tv <= tight && tight <= loose && loose <= one) {
            return CheckResult::fail(name, format!("chain violated on pair {p}"));
        }
    }
    for r in [ratio(3, 2), rat(2), rat(3), rat(10)] {
        let (p, q) = tight_pair(&r);
        let eps = realized_epsilon(&p, &q, None);
        if eps.max_ratio != Some(r.clone()) {
            return CheckResult::fail(name, format!("witness pair ratio drifted at {r}"));
        }
        let tv = p.total_variation(&q);
        let tight = (&r - &one) / (&r + &one);
        if tv != tight {
            return CheckResult::fail(name, format!("witness pair not tight at {r}"));
        }
    }
    CheckResult::pass(
        name,
        format!("{pairs} positive pairs bounded; witness pairs tight"),
    )
}

/// Event-level DP inequality from the singleton maximum: for every event E,
/// P0(E) <= R* P1(E) and symmetrically, where R* is the largest singleton
/// probability ratio. Verified by exhaustive event enumeration. With
/// `inject_fault`, one probability is pushed negative first; the check must
/// then fail, demonstrating it has teeth.
pub fn check_event_inequality(
    pairs: u32,
    max_outcomes: usize,
    seed: u64,
    inject_fault: bool,
) -> CheckResult {
    let name = "event-inequality";
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let verify_pair = |d0: &PathDistribution, d1: &PathDistribution| -> bool {
        let support: Vec<&ModelParam> = d0.union_support(d1);
        let m = support.len();
        // Singleton maxima, computed directly from the probability pairs.
        let mut r01: Option<BigRational> = None;
        let mut r10: Option<BigRational> = None;
        for o in &support {
            let p0 = d0.prob(o);
            let p1 = d1.prob(o);
            let fwd = &p0 / &p1;
            let bwd = &p1 / &p0;
            r01 = Some(r01.map_or(fwd.clone(), |r| if fwd > r { fwd.clone() } else { r }));
            r10 = Some(r10.map_or(bwd.clone(), |r| if bwd > r { bwd.clone() } else { r }));
        }
        let (r01, r10) = (r01.expect("nonempty"), r10.expect("nonempty"));
        // Gray-code walk over all events, updating both masses per step.
        let mut state = 0u32;
        let mut e0 = BigRational::zero();
        let mut e1 = BigRational::zero();
        for i in 1u32..(1u32 << m) {
            let bit = i.trailing_zeros() as usize;
            state ^= 1 << bit;
            let (p0, p1) = (d0.prob(support[bit]), d1.prob(support[bit]));
            if state & (1 << bit) != 0 {
                e0 += p0;
                e1 += p1;
            } else {
                e0 -= p0;
                e1 -= p1;
            }
            if e0 > &r01 * &e1 || e1 > &r10 * &e0 {
                return false;
            }
        }
        true
    };
    if inject_fault {
        // Deliberately broken input: one entry below zero. The event check
        // is expected to reject it.
        let d0 = PathDistribution::from_outcomes(
            [
                (ModelParam::scalar(rat(0)), ratio(1, 2)),
                (ModelParam::scalar(rat(1)), ratio(1, 2)),
            ]
            .into(),
            2,
        );
        let d1 = PathDistribution::from_outcomes(
            [
                (ModelParam::scalar(rat(0)), ratio(-1, 4)),
                (ModelParam::scalar(rat(1)), ratio(5, 4)),
            ]
            .into(),
            2,
        );
        return if verify_pair(&d0, &d1) {
            CheckResult::pass(name, "injected fault went undetected".into())
        } else {
            CheckResult::fail(
                name,
                "injected negative mass detected by the event check".into(),
            )
        };
    }
    for p in 0..pairs {
        let m = 2 + (rng.next_u64() as usize) % (max_outcomes - 1);
        let d0 = random_pmf_with(&mut rng, m, true);
        let d1 = random_pmf_with(&mut rng, m, true);
        if !verify_pair(&d0, &d1) {
            return CheckResult::fail(name, format!("event inequality violated on pair {p}"));
        }
    }
    CheckResult::pass(
        name,
        format!("{pairs} pairs, all 2^m events within the singleton ratio"),
    )
}

/// The standing two-client scenario used for Monte Carlo cross-validation:
/// 2 clients x 2 points, d = 1, one round, quarter grid.
pub fn two_client_scenario(t: (i64, i64), clamp_steps: u32) -> (Infrastructure, Dynamics) {
    let partition: BTreeMap<ActorId, Dataset> = [
        (
            ActorId::new("c1"),
            Dataset::new(vec![
                DataPoint::new("a", vec![], rat(0)),
                DataPoint::new("b", vec![], ratio(1, 2)),
            ])
            .unwrap(),
        ),
        (
            ActorId::new("c2"),
            Dataset::new(vec![
                DataPoint::new("c", vec![], ratio(1, 4)),
                DataPoint::new("d", vec![], ratio(3, 4)),
            ])
            .unwrap(),
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
                lo: rat(0),
                hi: ratio(3, 4),
            },
        },
        defense: DefenseTransform::Identity,
        mech: NoiseMechanism::DiscreteLaplace {
            t: ratio(t.0, t.1),
            clamp_steps,
        },
    };
    (infra, dynamics)
}

/// Neighboring pair for the decomposition check: client c1's point `b`
/// changes value between the arms (equal sizes keep aggregation weights
/// shared), client c2 is identical.
pub fn two_client_neighbor_pair(
    t: (i64, i64),
    clamp_steps: u32,
    max_states: usize,
) -> NeighborRun {
    let build = |b_value: BigRational| {
        let partition: BTreeMap<ActorId, Dataset> = [
            (
                ActorId::new("c1"),
                Dataset::new(vec![
                    DataPoint::new("a", vec![], ratio(1, 4)),
                    DataPoint::new("b", vec![], b_value.clone()),
                ])
                .unwrap(),
            ),
            (
                ActorId::new("c2"),
                Dataset::new(vec![
                    DataPoint::new("c", vec![], rat(0)),
                    DataPoint::new("d", vec![], ratio(1, 2)),
                ])
                .unwrap(),
            ),
        ]
        .into();
        Infrastructure::new(
            IGraph::with_partition_plan(
                ActorId::new("server"),
                partition,
                ModelParam::scalar(rat(0)),
            )
            .unwrap(),
        )
    };
    let dynamics = Dynamics {
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
            clamp_steps,
        },
    };
    NeighborRun::new(
        build(ratio(1, 4)),
        build(ratio(3, 4)),
        Scheduler::RoundRobin,
        dynamics,
        max_states,
    )
    .expect("value change is a one-point difference")
}

/// Monte Carlo versus exact enumeration on the two-client scenario: the
/// empirical distribution must sit within `tolerance` total variation of the
/// exact one, and a rerun under the same seed must be bit-identical.
pub fn check_mc_vs_exact(samples: u64, seed: u64, tolerance: f64) -> CheckResult {
    let name = "mc-vs-exact";
    let (infra, dynamics) = two_client_scenario((1, 2), 1);
    let model = match build_model(&infra, &Scheduler::RoundRobin, &dynamics, 100_000) {
        Ok(m) => m,
        Err(e) => return CheckResult::fail(name, format!("enumeration failed: {e}")),
    };
    let exact = terminal_distribution(&model, observe_curmodpar);
    let run = |seed| {
        mc_terminal_distribution(
            &infra,
            &Scheduler::RoundRobin,
            &dynamics,
            observe_curmodpar,
            samples,
            seed,
        )
    };
    let empirical = match run(seed) {
        Ok(d) => d,
        Err(e) => return CheckResult::fail(name, format!("sampling failed: {e}")),
    };
    let tv = exact
        .total_variation(&empirical)
        .to_f64()
        .unwrap_or(f64::NAN);
    if !(tv <= tolerance) {
        return CheckResult::fail(
            name,
            format!("TV(empirical, exact) = {tv:.5} exceeds {tolerance}"),
        );
    }
    let rerun = match run(seed) {
        Ok(d) => d,
        Err(e) => return CheckResult::fail(name, format!("rerun failed: {e}")),
    };
    if rerun != empirical {
        return CheckResult::fail(name, "rerun under the same seed differed".into());
    }
    CheckResult::pass(
        name,
        format!("TV = {tv:.5} <= {tolerance} at {samples} samples; rerun bit-identical"),
    )
}

/// Deterministic-sampler smoke check: per-sample streams do not collide.
pub fn check_stream_separation(seed: u64) -> CheckResult {
    let name = "stream-separation";
    let mut a = sample_rng(seed, 0);
    let mut b = sample_rng(seed, 1);
    let same: bool = (0..8).all(|_| a.next_u64() == b.next_u64());
    if same {
        CheckResult::fail(name, "distinct sample indices produced equal streams".into())
    } else {
        CheckResult::pass(name, "per-sample streams distinct".into())
    }
}

/// The full suite at validation scale. `inject_fault` deliberately breaks
/// the event-inequality input to prove the detector fires.
pub fn run_all(seed: u64, inject_fault: bool) -> Vec<CheckResult> {
    vec![
        check_advantage_identity(1000, 50, 8, seed),
        check_bayes_optimality(200, 12, seed.wrapping_add(1)),
        check_bound_chain(200, 12, seed.wrapping_add(2)),
        check_event_inequality(60, 12, seed.wrapping_add(3), inject_fault),
        check_mc_vs_exact(100_000, seed.wrapping_add(4), 0.012),
        check_stream_separation(seed.wrapping_add(5)),
    ]
}
