//! Distinguishing-attack machinery: deterministic adversaries over released
//! model parameters, their exact advantage, the Bayes-optimal distinguisher,
//! the advantage/ε bound chain, and a seeded guess-the-run experiment.
//!
//! The advantage of an adversary A over distributions (D0, D1) is
//! P_{D1}(A = 1) - P_{D0}(A = 1); with uniform-prior success probability
//! P = (P_{D0}(A = 0) + P_{D1}(A = 1)) / 2 the identity
//! advantage = 2 P - 1 holds exactly, and both are computed in rationals.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::kripke::{observe_curmodpar, sample_rng, sample_terminal, KripkeError, PathDistribution};
use crate::model::ModelParam;
use crate::privacy::{json_float, realized_epsilon, EpsilonReport, NeighborRun};
use crate::rat::{format_fraction, rat};

/// A deterministic, total guessing rule: 1 claims "the observation came from
/// D1", 0 claims D0. Outcomes missing from the table fall back to the
/// default guess.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adversary {
    decision: BTreeMap<ModelParam, bool>,
    default_guess: bool,
    pub description: String,
}

impl Adversary {
    pub fn from_table(
        decision: BTreeMap<ModelParam, bool>,
        default_guess: bool,
        description: impl Into<String>,
    ) -> Self {
        Adversary {
            decision,
            default_guess,
            description: description.into(),
        }
    }

    /// Always answers `guess`, regardless of the observation.
    pub fn constant(guess: bool) -> Self {
        Adversary {
            decision: BTreeMap::new(),
            default_guess: guess,
            description: format!("constant {}", guess as u8),
        }
    }

    pub fn decide(&self, outcome: &ModelParam) -> bool {
        self.decision.get(outcome).copied().unwrap_or(self.default_guess)
    }

    /// The adversary answering the opposite on every outcome.
    pub fn complement(&self) -> Adversary {
        Adversary {
            decision: self.decision.iter().map(|(o, b)| (o.clone(), !b)).collect(),
            default_guess: !self.default_guess,
            description: format!("not({})", self.description),
        }
    }
}

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("realized privacy factor is infinite; the bound chain is vacuous")]
    InfiniteEpsilon,
    #[error(transparent)]
    Kripke(#[from] KripkeError),
}

/// Advantage, success probability, total variation, and the realized-ε
/// bound chain for a pair of distributions.
#[derive(Debug, Clone)]
pub struct AdvantageReport {
    pub advantage: BigRational,
    pub success_prob: BigRational,
    pub tv: BigRational,
    pub eps: EpsilonReport,
    /// Exact (e^ε - 1) / (e^ε + 1); the advantage any adversary can reach.
    pub tight_bound: Option<BigRational>,
    /// Exact 1 - e^{-ε}; the looser classical bound.
    pub loose_bound: Option<BigRational>,
}

impl Serialize for AdvantageReport {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let mut st = ser.serialize_struct("AdvantageReport", 8)?;
        st.serialize_field("advantage", &format_fraction(&self.advantage))?;
        st.serialize_field(
            "advantage_float",
            &self.advantage.to_f64().unwrap_or(f64::NAN),
        )?;
        st.serialize_field("success_prob", &format_fraction(&self.success_prob))?;
        st.serialize_field("tv", &format_fraction(&self.tv))?;
        st.serialize_field("tv_float", &self.tv.to_f64().unwrap_or(f64::NAN))?;
        st.serialize_field("epsilon", &json_float(self.eps.epsilon))?;
        st.serialize_field(
            "tight_bound",
            &self.tight_bound.as_ref().map(format_fraction),
        )?;
        st.serialize_field(
            "loose_bound",
            &self.loose_bound.as_ref().map(format_fraction),
        )?;
        st.end()
    }
}

fn mass_where(d: &PathDistribution, support: &[&ModelParam], guess: bool, a: &Adversary) -> BigRational {
    support
        .iter()
        .filter(|o| a.decide(o) == guess)
        .map(|o| d.prob(o))
        .sum()
}

fn bounds_from(eps: &EpsilonReport) -> (Option<BigRational>, Option<BigRational>) {
    match &eps.max_ratio {
        Some(r) => {
            let one = BigRational::one();
            let tight = (r - &one) / (r + &one);
            let loose = &one - &one / r;
            (Some(tight), Some(loose))
        }
        None => (None, None),
    }
}

/// Exact advantage of `a` in distinguishing `d0` from `d1`, with the
/// success-probability identity asserted.
pub fn advantage(a: &Adversary, d0: &PathDistribution, d1: &PathDistribution) -> AdvantageReport {
    assert!(d0.is_normalized() && d1.is_normalized(), "normalized inputs");
    let support = d0.union_support(d1);
    let p1_guess1 = mass_where(d1, &support, true, a);
    let p0_guess1 = mass_where(d0, &support, true, a);
    let p0_guess0 = mass_where(d0, &support, false, a);
    let advantage = &p1_guess1 - &p0_guess1;
    let success_prob = (&p0_guess0 + &p1_guess1) / rat(2);
    debug_assert_eq!(advantage, rat(2) * &success_prob - rat(1));
    let tv = d0.total_variation(d1);
    let eps = realized_epsilon(d0, d1, None);
    let (tight_bound, loose_bound) = bounds_from(&eps);
    AdvantageReport {
        advantage,
        success_prob,
        tv,
        eps,
        tight_bound,
        loose_bound,
    }
}

/// The optimal deterministic distinguisher: guess 1 exactly where d1 puts
/// strictly more mass (ties guess 0). Its advantage equals TV(d0, d1).
pub fn bayes_optimal(d0: &PathDistribution, d1: &PathDistribution) -> Adversary {
    let decision: BTreeMap<ModelParam, bool> = d0
        .union_support(d1)
        .into_iter()
        .map(|o| (o.clone(), d1.prob(o) > d0.prob(o)))
        .collect();
    Adversary::from_table(decision, false, "bayes-optimal")
}

/// TV and the realized-ε bound chain TV <= (e^ε-1)/(e^ε+1) <= 1-e^{-ε},
/// asserted exactly on the rational values.
pub fn bound_chain(
    d0: &PathDistribution,
    d1: &PathDistribution,
) -> Result<AdvantageReport, AdversaryError> {
    let best = bayes_optimal(d0, d1);
    let report = advantage(&best, d0, d1);
    if report.eps.is_infinite() {
        return Err(AdversaryError::InfiniteEpsilon);
    }
    let tight = report.tight_bound.as_ref().expect("finite eps");
    let loose = report.loose_bound.as_ref().expect("finite eps");
    assert!(
        &report.tv <= tight && tight <= loose && loose <= &BigRational::one(),
        "bound chain violated: tv={} tight={} loose={}",
        report.tv,
        tight,
        loose
    );
    Ok(report)
}

/// The two-outcome witness pair p = (R/(1+R), 1/(1+R)), q = reversed, whose
/// realized e^ε equals `ratio` exactly and whose Bayes advantage meets the
/// tight bound (R-1)/(R+1).
pub fn tight_pair(ratio: &BigRational) -> (PathDistribution, PathDistribution) {
    assert!(ratio > &BigRational::one(), "ratio must exceed 1");
    let one = BigRational::one();
    let denom = &one + ratio;
    let heavy = ratio / &denom;
    let light = &one / &denom;
    let o0 = ModelParam::scalar(rat(0));
    let o1 = ModelParam::scalar(rat(1));
    let p = PathDistribution::from_outcomes(
        [(o0.clone(), heavy.clone()), (o1.clone(), light.clone())].into(),
        2,
    );
    let q = PathDistribution::from_outcomes([(o0, light), (o1, heavy)].into(), 2);
    (p, q)
}

/// Best advantage over every deterministic adversary on the union support,
/// found by exhaustive enumeration. Independent of [`bayes_optimal`]; used
/// as its oracle.
pub fn brute_force_best_advantage(
    d0: &PathDistribution,
    d1: &PathDistribution,
) -> (BigRational, Adversary) {
    let support: Vec<ModelParam> = d0.union_support(d1).into_iter().cloned().collect();
    let m = support.len();
    assert!(m <= 20, "brute force is for small outcome spaces");
    let diffs: Vec<BigRational> = support.iter().map(|o| d1.prob(o) - d0.prob(o)).collect();
    // Gray-code walk visits every decision table with one update per step.
    let mut best_mask = 0u32;
    let mut best = BigRational::zero();
    let mut state = 0u32;
    let mut current = BigRational::zero();
    for i in 1u32..(1u32 << m) {
        let bit = i.trailing_zeros() as usize;
        state ^= 1 << bit;
        if state & (1 << bit) != 0 {
            current += &diffs[bit];
        } else {
            current -= &diffs[bit];
        }
        if current > best {
            best = current.clone();
            best_mask = state;
        }
    }
    let decision = support
        .iter()
        .enumerate()
        .map(|(i, o)| (o.clone(), best_mask & (1 << i) != 0))
        .collect();
    (
        best,
        Adversary::from_table(decision, false, "brute-force best"),
    )
}

/// One aggregated block of challenge trials for CSV emission.
#[derive(Debug, Clone, Serialize)]
pub struct ChallengeBlock {
    pub trial_block: u64,
    pub successes: u64,
    pub trials: u64,
    pub advantage_estimate: f64,
}

/// Result of the guess-the-run experiment.
#[derive(Debug, Clone)]
pub struct ChallengeOutcome {
    pub report: AdvantageReport,
    pub trials: u64,
    pub successes: u64,
    pub blocks: Vec<ChallengeBlock>,
}

/// Repeatedly draws a secret bit b, samples one full protocol run over
/// dataset b, shows the terminal model parameter to the adversary, and
/// scores the guess. Deterministic for a fixed seed regardless of worker
/// count.
pub fn challenge_experiment(
    run: &NeighborRun,
    a: &Adversary,
    trials: u64,
    seed: u64,
) -> Result<ChallengeOutcome, AdversaryError> {
    run_challenge(
        |b, rng| {
            let init = if b == 0 { &run.i0 } else { &run.i1 };
            let terminal = sample_terminal(init, &run.scheduler, &run.dynamics, rng)?;
            Ok(observe_curmodpar(&terminal))
        },
        a,
        trials,
        seed,
    )
}

/// The same experiment with outcomes drawn directly from two explicit
/// distributions instead of protocol runs.
pub fn challenge_on_distributions(
    d0: &PathDistribution,
    d1: &PathDistribution,
    a: &Adversary,
    trials: u64,
    seed: u64,
) -> ChallengeOutcome {
    run_challenge(
        |b, rng| Ok(if b == 0 { d0.sample(rng) } else { d1.sample(rng) }),
        a,
        trials,
        seed,
    )
    .expect("distribution sampling cannot fail")
}

fn run_challenge(
    mut sample_arm: impl FnMut(usize, &mut rand_chacha::ChaCha12Rng) -> Result<ModelParam, KripkeError>,
    a: &Adversary,
    trials: u64,
    seed: u64,
) -> Result<ChallengeOutcome, AdversaryError> {
    assert!(trials >= 1);
    let block_size = (trials / 10).max(1);
    let mut successes = 0u64;
    let mut blocks = Vec::new();
    let mut block_successes = 0u64;
    let mut block_trials = 0u64;
    let mut arm_counts: [BTreeMap<ModelParam, u64>; 2] = [BTreeMap::new(), BTreeMap::new()];
    let mut arm_totals = [0u64, 0u64];
    for i in 0..trials {
        let mut rng = sample_rng(seed, i);
        let b = (rng.next_u64() & 1) as usize;
        let observed = sample_arm(b, &mut rng)?;
        let guess = a.decide(&observed) as usize;
        *arm_counts[b].entry(observed).or_insert(0) += 1;
        arm_totals[b] += 1;
        if guess == b {
            successes += 1;
            block_successes += 1;
        }
        block_trials += 1;
        if block_trials == block_size || i + 1 == trials {
            blocks.push(ChallengeBlock {
                trial_block: blocks.len() as u64,
                successes: block_successes,
                trials: block_trials,
                advantage_estimate: 2.0 * block_successes as f64 / block_trials as f64 - 1.0,
            });
            block_successes = 0;
            block_trials = 0;
        }
    }
    let success_prob = BigRational::new(successes.into(), trials.into());
    let advantage_est = rat(2) * &success_prob - rat(1);
    // Empirical per-arm distributions; an unsampled arm (possible only for a
    // handful of trials) falls back to the other arm's, reading as ε = 0.
    let empirical = |idx: usize| -> PathDistribution {
        let (counts, total) = if arm_totals[idx] > 0 {
            (&arm_counts[idx], arm_totals[idx])
        } else {
            (&arm_counts[1 - idx], arm_totals[1 - idx])
        };
        PathDistribution::from_outcomes(
            counts
                .iter()
                .map(|(o, n)| (o.clone(), BigRational::new((*n).into(), total.into())))
                .collect(),
            total,
        )
    };
    let d0 = empirical(0);
    let d1 = empirical(1);
    let eps = realized_epsilon(&d0, &d1, None);
    let (tight_bound, loose_bound) = bounds_from(&eps);
    Ok(ChallengeOutcome {
        report: AdvantageReport {
            advantage: advantage_est,
            success_prob,
            tv: d0.total_variation(&d1),
            eps,
            tight_bound,
            loose_bound,
        },
        trials,
        successes,
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::ratio;
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

    fn skewed_pair() -> (PathDistribution, PathDistribution) {
        (
            dist(&[(1, ratio(3, 4)), (2, ratio(1, 4))]),
            dist(&[(1, ratio(1, 4)), (2, ratio(3, 4))]),
        )
    }

    #[test]
    fn constant_adversary_has_zero_advantage() {
        let (d0, d1) = skewed_pair();
        let report = advantage(&Adversary::constant(true), &d0, &d1);
        assert_eq!(report.advantage, rat(0));
        assert_eq!(report.success_prob, ratio(1, 2));
    }

    #[test]
    fn guess_one_on_outcome_two() {
        let (d0, d1) = skewed_pair();
        let a = Adversary::from_table(
            [(ModelParam::scalar(rat(2)), true)].into(),
            false,
            "guess 1 on outcome 2",
        );
        let report = advantage(&a, &d0, &d1);
        // P_{d1}(A=1) - P_{d0}(A=1) = 3/4 - 1/4 = 1/2; success 3/4.
        assert_eq!(report.advantage, ratio(1, 2));
        assert_eq!(report.success_prob, ratio(3, 4));
        assert_eq!(rat(2) * report.success_prob - rat(1), report.advantage);
    }

    #[test]
    fn complement_negates_advantage() {
        let (d0, d1) = skewed_pair();
        let a = Adversary::from_table(
            [(ModelParam::scalar(rat(2)), true)].into(),
            false,
            "base",
        );
        let direct = advantage(&a, &d0, &d1);
        let flipped = advantage(&a.complement(), &d0, &d1);
        assert_eq!(flipped.advantage, -direct.advantage);
    }

    #[test]
    fn bayes_optimal_reaches_tv() {
        let (d0, d1) = skewed_pair();
        let best = bayes_optimal(&d0, &d1);
        let report = advantage(&best, &d0, &d1);
        assert_eq!(report.advantage, ratio(1, 2));
        assert_eq!(report.advantage, report.tv);
        // Brute force over all four deterministic adversaries agrees.
        let (brute, _) = brute_force_best_advantage(&d0, &d1);
        assert_eq!(brute, report.advantage);
    }

    #[test]
    fn identical_distributions_zero_everything() {
        let d = dist(&[(1, ratio(1, 3)), (2, ratio(2, 3))]);
        let best = bayes_optimal(&d, &d);
        let report = advantage(&best, &d, &d);
        assert_eq!(report.advantage, rat(0));
        assert_eq!(report.tv, rat(0));
        assert_eq!(report.tight_bound, Some(rat(0)));
        assert_eq!(report.loose_bound, Some(rat(0)));
    }

    #[test]
    fn disjoint_supports_are_perfectly_distinguishable() {
        let d0 = dist(&[(0, rat(1))]);
        let d1 = dist(&[(5, rat(1))]);
        let best = bayes_optimal(&d0, &d1);
        let report = advantage(&best, &d0, &d1);
        assert_eq!(report.advantage, rat(1));
        assert!(report.eps.is_infinite());
        assert!(matches!(
            bound_chain(&d0, &d1),
            Err(AdversaryError::InfiniteEpsilon)
        ));
    }

    #[test]
    fn bound_chain_on_skewed_pair() {
        let (d0, d1) = skewed_pair();
        let report = bound_chain(&d0, &d1).unwrap();
        // e^ε = 3: tight bound (3-1)/(3+1) = 1/2 equals TV; loose 2/3.
        assert_eq!(report.tv, ratio(1, 2));
        assert_eq!(report.tight_bound, Some(ratio(1, 2)));
        assert_eq!(report.loose_bound, Some(ratio(2, 3)));
    }

    #[test]
    fn tight_pair_witnesses() {
        let (p, q) = tight_pair(&rat(3));
        assert_eq!(p.prob(&ModelParam::scalar(rat(0))), ratio(3, 4));
        assert_eq!(q.prob(&ModelParam::scalar(rat(0))), ratio(1, 4));
        let report = bound_chain(&p, &q).unwrap();
        assert_eq!(report.eps.max_ratio, Some(rat(3)));
        assert_eq!(report.tv, report.tight_bound.clone().unwrap());

        let (p, q) = tight_pair(&rat(2));
        let (brute, _) = brute_force_best_advantage(&p, &q);
        assert_eq!(brute, ratio(1, 3));
    }

    #[test]
    fn bayes_ties_go_to_zero_and_are_advantage_neutral() {
        // Outcome 1 has equal mass; flipping its decision cannot change the
        // advantage.
        let d0 = dist(&[(1, ratio(1, 2)), (2, ratio(1, 2))]);
        let d1 = dist(&[(1, ratio(1, 2)), (2, ratio(1, 4)), (3, ratio(1, 4))]);
        let best = bayes_optimal(&d0, &d1);
        assert!(!best.decide(&ModelParam::scalar(rat(1))));
        let base = advantage(&best, &d0, &d1).advantage;
        let mut flipped_table: BTreeMap<ModelParam, bool> = d0
            .union_support(&d1)
            .into_iter()
            .map(|o| (o.clone(), best.decide(o)))
            .collect();
        flipped_table.insert(ModelParam::scalar(rat(1)), true);
        let flipped = Adversary::from_table(flipped_table, false, "tie flipped");
        assert_eq!(advantage(&flipped, &d0, &d1).advantage, base);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn lemma_identity_exact(
            masses0 in proptest::collection::vec(0u32..20, 4),
            masses1 in proptest::collection::vec(0u32..20, 4),
            bits in 0u32..16,
        ) {
            prop_assume!(masses0.iter().sum::<u32>() > 0);
            prop_assume!(masses1.iter().sum::<u32>() > 0);
            let normalize = |masses: &[u32]| {
                let total: u32 = masses.iter().sum();
                dist(&masses.iter().enumerate().filter(|(_, m)| **m > 0).map(|(i, m)| {
                    (i as i64, ratio(*m as i64, total as i64))
                }).collect::<Vec<_>>())
            };
            let d0 = normalize(&masses0);
            let d1 = normalize(&masses1);
            let decision = (0..4)
                .map(|i| (ModelParam::scalar(rat(i as i64)), bits & (1 << i) != 0))
                .collect();
            let a = Adversary::from_table(decision, false, "random table");
            let report = advantage(&a, &d0, &d1);
            prop_assert_eq!(report.advantage, rat(2) * report.success_prob - rat(1));
        }

        #[test]
        fn mixtures_never_beat_bayes(
            masses0 in proptest::collection::vec(1u32..20, 3),
            masses1 in proptest::collection::vec(1u32..20, 3),
            weights in proptest::collection::vec(1u32..10, 4),
        ) {
            let normalize = |masses: &[u32]| {
                let total: u32 = masses.iter().sum();
                dist(&masses.iter().enumerate().map(|(i, m)| {
                    (i as i64, ratio(*m as i64, total as i64))
                }).collect::<Vec<_>>())
            };
            let d0 = normalize(&masses0);
            let d1 = normalize(&masses1);
            let tv = d0.total_variation(&d1);
            // A randomized adversary is a convex combination of deterministic
            // tables; its advantage is the same combination of advantages.
            let total: u32 = weights.iter().sum();
            let mixture: BigRational = weights.iter().enumerate().map(|(mask, w)| {
                let decision = (0..3)
                    .map(|i| (ModelParam::scalar(rat(i as i64)), mask & (1 << i) != 0))
                    .collect();
                let a = Adversary::from_table(decision, false, "component");
                advantage(&a, &d0, &d1).advantage * ratio(*w as i64, total as i64)
            }).sum();
            prop_assert!(mixture <= tv);
        }
    }
}
