//! The learning mathematics: loss models and their exact gradients, the
//! client update step, dataset-size-weighted server aggregation, the
//! finite-sum objective, gradient-release defenses, and the discrete noise
//! mechanism's probability mass function.
//!
//! Every operation is exact rational arithmetic; grid quantization (round
//! half away from zero) is the only lossy step and only in gridded mode.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ActorId, Dataset, ModelParam};
use crate::rat::{round_half_away, serde_rational};

/// Which per-point loss the clients minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossModel {
    /// d = 1, per-point loss (w - value)^2 / 2; gradient w - value.
    MeanEstimation,
    /// Loss (<w, (1, features)> - value)^2 / 2 over d = 1 + d_in parameters.
    LinearRegression,
}

/// Parameter grid. `Exact` keeps arbitrary rationals; `Grid` snaps released
/// values to multiples of `q` inside `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum GridSpec {
    Exact,
    Grid {
        #[serde(with = "serde_rational")]
        q: BigRational,
        #[serde(with = "serde_rational")]
        lo: BigRational,
        #[serde(with = "serde_rational")]
        hi: BigRational,
    },
}

/// Learning-rate, round budget, and grid configuration shared by a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearningConfig {
    #[serde(with = "serde_rational")]
    pub eta: BigRational,
    pub rounds: u32,
    #[serde(default = "default_local_epochs")]
    pub local_epochs: u32,
    pub grid: GridSpec,
}

fn default_local_epochs() -> u32 {
    1
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LearnError {
    #[error("empty partition")]
    EmptyPartition,
    #[error("total weight {given} differs from sum of partition sizes {actual}")]
    WeightMismatch { given: usize, actual: usize },
    #[error("dimension mismatch: model parameter has {param}, data expects {expected}")]
    DimensionMismatch { param: usize, expected: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

impl LearningConfig {
    /// Validates eta > 0, local_epochs >= 1, and a well-formed grid: lo < hi
    /// with q dividing lo and hi, so clamped values stay on the grid. A zero
    /// round bound is legal and stops a run right after deployment.
    pub fn validate(&self) -> Result<(), LearnError> {
        if !self.eta.is_positive() {
            return Err(LearnError::BadConfig("eta must be positive".into()));
        }
        if self.local_epochs == 0 {
            return Err(LearnError::BadConfig(
                "local_epochs must be at least 1".into(),
            ));
        }
        if let GridSpec::Grid { q, lo, hi } = &self.grid {
            if !q.is_positive() {
                return Err(LearnError::BadConfig("grid step q must be positive".into()));
            }
            if lo >= hi {
                return Err(LearnError::BadConfig("grid needs lo < hi".into()));
            }
            for (name, bound) in [("lo", lo), ("hi", hi)] {
                if !(bound / q).is_integer() {
                    return Err(LearnError::BadConfig(format!(
                        "grid bound {name} is not a multiple of q"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Additive per-coordinate integer-step noise applied at gradient release.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum NoiseMechanism {
    None,
    /// Pr[step = k] proportional to t^|k| on k in {-clamp_steps..clamp_steps},
    /// renormalized exactly; each step moves one grid cell q.
    DiscreteLaplace {
        #[serde(with = "serde_rational")]
        t: BigRational,
        clamp_steps: u32,
    },
}

impl NoiseMechanism {
    pub fn validate(&self) -> Result<(), LearnError> {
        if let NoiseMechanism::DiscreteLaplace { t, .. } = self {
            if !t.is_positive() || *t >= BigRational::one() {
                return Err(LearnError::BadConfig(
                    "discrete Laplace parameter t must lie in (0,1)".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn is_none(&self) -> bool {
        matches!(self, NoiseMechanism::None)
    }
}

/// Transform applied to the client update before release.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum DefenseTransform {
    Identity,
    /// Keep the k largest-magnitude coordinates (ties keep the lowest
    /// index), zero the rest.
    SparsifyTopK { k: usize },
    /// Release the result of `epochs` sequential local steps instead of a
    /// single true gradient step.
    PseudoGradient { epochs: u32 },
}

impl DefenseTransform {
    pub fn validate(&self) -> Result<(), LearnError> {
        match self {
            DefenseTransform::SparsifyTopK { k } if *k == 0 => Err(LearnError::BadConfig(
                "sparsification needs k >= 1".into(),
            )),
            DefenseTransform::PseudoGradient { epochs } if *epochs == 0 => Err(
                LearnError::BadConfig("pseudo-gradient needs epochs >= 1".into()),
            ),
            _ => Ok(()),
        }
    }
}

fn augmented(features: &[&BigRational]) -> Vec<BigRational> {
    let mut aug = Vec::with_capacity(features.len() + 1);
    aug.push(BigRational::one());
    aug.extend(features.iter().map(|f| (*f).clone()));
    aug
}

fn check_dim(model: LossModel, w: &ModelParam, part: &Dataset) -> Result<(), LearnError> {
    let expected = match model {
        LossModel::MeanEstimation => 1,
        LossModel::LinearRegression => 1 + part.feature_width().unwrap_or(w.dim() - 1),
    };
    if w.dim() != expected {
        return Err(LearnError::DimensionMismatch {
            param: w.dim(),
            expected,
        });
    }
    Ok(())
}

/// Per-point loss gradient at `w`.
fn point_gradient(model: LossModel, w: &ModelParam, point_features: &[&BigRational], value: &BigRational) -> Vec<BigRational> {
    match model {
        LossModel::MeanEstimation => vec![&w.coords()[0] - value],
        LossModel::LinearRegression => {
            let aug = augmented(point_features);
            let residual: BigRational = w
                .coords()
                .iter()
                .zip(&aug)
                .map(|(wi, ai)| wi * ai)
                .sum::<BigRational>()
                - value;
            aug.iter().map(|ai| &residual * ai).collect()
        }
    }
}

/// Average loss gradient (1/|part|) Σ ∇f_i(w) over the partition.
pub fn avg_loss_gradient(
    model: LossModel,
    w: &ModelParam,
    part: &Dataset,
) -> Result<ModelParam, LearnError> {
    if part.is_empty() {
        return Err(LearnError::EmptyPartition);
    }
    check_dim(model, w, part)?;
    let mut sum = vec![BigRational::zero(); w.dim()];
    for p in part.points() {
        let features: Vec<&BigRational> = p.feature_values().collect();
        let g = point_gradient(model, w, &features, &p.value);
        for (acc, gi) in sum.iter_mut().zip(g) {
            *acc += gi;
        }
    }
    let n = BigRational::from_integer(BigInt::from(part.len()));
    Ok(ModelParam::new(sum.into_iter().map(|s| s / &n).collect()))
}

/// Exact finite-sum objective (1/n) Σ f_i(w).
pub fn objective(
    model: LossModel,
    w: &ModelParam,
    dataset: &Dataset,
) -> Result<BigRational, LearnError> {
    if dataset.is_empty() {
        return Err(LearnError::EmptyPartition);
    }
    check_dim(model, w, dataset)?;
    let two = BigRational::from_integer(BigInt::from(2));
    let mut sum = BigRational::zero();
    for p in dataset.points() {
        let residual = match model {
            LossModel::MeanEstimation => &w.coords()[0] - &p.value,
            LossModel::LinearRegression => {
                let features: Vec<&BigRational> = p.feature_values().collect();
                let aug = augmented(&features);
                w.coords()
                    .iter()
                    .zip(&aug)
                    .map(|(wi, ai)| wi * ai)
                    .sum::<BigRational>()
                    - &p.value
            }
        };
        sum += &residual * &residual / &two;
    }
    Ok(sum / BigRational::from_integer(BigInt::from(dataset.len())))
}

/// Snap each coordinate to the nearest grid multiple of q (half away from
/// zero); identity in exact mode. No range clamping here.
pub fn quantize(grid: &GridSpec, w: &ModelParam) -> ModelParam {
    match grid {
        GridSpec::Exact => w.clone(),
        GridSpec::Grid { q, .. } => ModelParam::new(
            w.coords()
                .iter()
                .map(|c| BigRational::from_integer(round_half_away(&(c / q))) * q)
                .collect(),
        ),
    }
}

/// Clamp each coordinate into [lo, hi]; identity in exact mode.
pub fn clamp(grid: &GridSpec, w: &ModelParam) -> ModelParam {
    match grid {
        GridSpec::Exact => w.clone(),
        GridSpec::Grid { lo, hi, .. } => ModelParam::new(
            w.coords()
                .iter()
                .map(|c| {
                    if c < lo {
                        lo.clone()
                    } else if c > hi {
                        hi.clone()
                    } else {
                        c.clone()
                    }
                })
                .collect(),
        ),
    }
}

fn gradient_step(
    model: LossModel,
    eta: &BigRational,
    w: &ModelParam,
    part: &Dataset,
) -> Result<ModelParam, LearnError> {
    let g = avg_loss_gradient(model, w, part)?;
    Ok(ModelParam::new(
        w.coords()
            .iter()
            .zip(g.coords())
            .map(|(wi, gi)| wi - eta * gi)
            .collect(),
    ))
}

/// Keep the k largest-|coordinate| entries, lowest index winning ties.
fn sparsify_top_k(w: &ModelParam, k: usize) -> ModelParam {
    let mut order: Vec<usize> = (0..w.dim()).collect();
    order.sort_by(|&a, &b| {
        w.coords()[b]
            .abs()
            .cmp(&w.coords()[a].abs())
            .then(a.cmp(&b))
    });
    let kept: std::collections::BTreeSet<usize> = order.into_iter().take(k).collect();
    ModelParam::new(
        w.coords()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if kept.contains(&i) {
                    c.clone()
                } else {
                    BigRational::zero()
                }
            })
            .collect(),
    )
}

/// The local learning a client performs before release: one gradient step
/// (or `epochs` of them under the pseudo-gradient defense), the defense
/// transform, then grid quantization.
pub fn client_update(
    model: LossModel,
    cfg: &LearningConfig,
    w: &ModelParam,
    part: &Dataset,
    defense: &DefenseTransform,
) -> Result<ModelParam, LearnError> {
    if part.is_empty() {
        return Err(LearnError::EmptyPartition);
    }
    let released = match defense {
        DefenseTransform::Identity => gradient_step(model, &cfg.eta, w, part)?,
        DefenseTransform::SparsifyTopK { k } => {
            sparsify_top_k(&gradient_step(model, &cfg.eta, w, part)?, *k)
        }
        DefenseTransform::PseudoGradient { epochs } => {
            let mut current = w.clone();
            for _ in 0..*epochs {
                current = gradient_step(model, &cfg.eta, &current, part)?;
            }
            current
        }
    };
    Ok(quantize(&cfg.grid, &released))
}

/// Dataset-size-weighted aggregation Σ_k (|P_k| / n) g_k, then quantization.
pub fn server_eval(
    gradients: &BTreeMap<ActorId, ModelParam>,
    partitions: &BTreeMap<ActorId, Dataset>,
    n: usize,
    grid: &GridSpec,
) -> Result<ModelParam, LearnError> {
    if gradients.is_empty() || gradients.keys().ne(partitions.keys()) {
        return Err(LearnError::BadConfig(
            "gradient and partition domains must coincide and be nonempty".into(),
        ));
    }
    let actual: usize = partitions.values().map(Dataset::len).sum();
    if actual != n {
        return Err(LearnError::WeightMismatch { given: n, actual });
    }
    if n == 0 {
        return Err(LearnError::EmptyPartition);
    }
    let total = BigRational::from_integer(BigInt::from(n));
    let dim = gradients.values().next().expect("nonempty").dim();
    let mut sum = vec![BigRational::zero(); dim];
    for (client, grad) in gradients {
        let weight =
            BigRational::from_integer(BigInt::from(partitions[client].len())) / &total;
        for (acc, gi) in sum.iter_mut().zip(grad.coords()) {
            *acc += &weight * gi;
        }
    }
    Ok(quantize(grid, &ModelParam::new(sum)))
}

/// Exact pmf of the discrete noise steps over {-S..S}:
/// Pr[k] = t^|k| (1-t) / (1 + t - 2 t^{S+1}).
pub fn noise_pmf(mech: &NoiseMechanism) -> BTreeMap<i64, BigRational> {
    match mech {
        NoiseMechanism::None => panic!("noise_pmf requires a mechanism"),
        NoiseMechanism::DiscreteLaplace { t, clamp_steps } => {
            let s = *clamp_steps as i64;
            let one = BigRational::one();
            let two = BigRational::from_integer(BigInt::from(2));
            let t_pow_s1 = pow_rational(t, *clamp_steps + 1);
            let denom = &one + t - &two * t_pow_s1;
            let scale = (&one - t) / denom;
            (-s..=s)
                .map(|k| (k, pow_rational(t, k.unsigned_abs() as u32) * &scale))
                .collect()
        }
    }
}

fn pow_rational(t: &BigRational, e: u32) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= t;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DataPoint;
    use crate::rat::{rat, ratio};
    use num_traits::ToPrimitive;
    use proptest::prelude::*;

    fn values(vals: &[i64]) -> Dataset {
        Dataset::new(
            vals.iter()
                .enumerate()
                .map(|(i, v)| DataPoint::new(format!("p{i}"), vec![], rat(*v))),
        )
        .unwrap()
    }

    fn values_q(vals: &[(i64, i64)]) -> Dataset {
        Dataset::new(
            vals.iter()
                .enumerate()
                .map(|(i, (n, d))| DataPoint::new(format!("p{i}"), vec![], ratio(*n, *d))),
        )
        .unwrap()
    }

    fn exact_cfg(eta: BigRational) -> LearningConfig {
        LearningConfig {
            eta,
            rounds: 1,
            local_epochs: 1,
            grid: GridSpec::Exact,
        }
    }

    #[test]
    fn mean_estimation_gradient() {
        let g = avg_loss_gradient(
            LossModel::MeanEstimation,
            &ModelParam::scalar(rat(0)),
            &values(&[2]),
        )
        .unwrap();
        assert_eq!(g, ModelParam::scalar(rat(-2)));
        // Average of (1-1, 1-3) = -1.
        let g = avg_loss_gradient(
            LossModel::MeanEstimation,
            &ModelParam::scalar(rat(1)),
            &values(&[1, 3]),
        )
        .unwrap();
        assert_eq!(g, ModelParam::scalar(rat(-1)));
    }

    #[test]
    fn linear_regression_zero_residual() {
        let part = Dataset::new(vec![DataPoint::new("p", vec![rat(1)], rat(0))]).unwrap();
        let g = avg_loss_gradient(
            LossModel::LinearRegression,
            &ModelParam::new(vec![rat(0), rat(0)]),
            &part,
        )
        .unwrap();
        assert_eq!(g, ModelParam::new(vec![rat(0), rat(0)]));
    }

    #[test]
    fn gradient_errors() {
        assert_eq!(
            avg_loss_gradient(
                LossModel::MeanEstimation,
                &ModelParam::scalar(rat(0)),
                &Dataset::empty()
            ),
            Err(LearnError::EmptyPartition)
        );
        let part = Dataset::new(vec![DataPoint::new("p", vec![rat(1), rat(2)], rat(0))]).unwrap();
        assert!(matches!(
            avg_loss_gradient(
                LossModel::LinearRegression,
                &ModelParam::new(vec![rat(0), rat(0)]),
                &part
            ),
            Err(LearnError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn client_update_reaches_partition_mean_with_unit_rate() {
        let w = client_update(
            LossModel::MeanEstimation,
            &exact_cfg(rat(1)),
            &ModelParam::scalar(rat(0)),
            &values(&[2]),
            &DefenseTransform::Identity,
        )
        .unwrap();
        assert_eq!(w, ModelParam::scalar(rat(2)));
    }

    #[test]
    fn client_update_half_rate() {
        // 0 - 1/2 * (0 - 4) = 2.
        let w = client_update(
            LossModel::MeanEstimation,
            &exact_cfg(ratio(1, 2)),
            &ModelParam::scalar(rat(0)),
            &values(&[4]),
            &DefenseTransform::Identity,
        )
        .unwrap();
        assert_eq!(w, ModelParam::scalar(rat(2)));
    }

    #[test]
    fn sparsify_keeps_top_magnitude_coordinate() {
        let w = ModelParam::new(vec![rat(3), rat(-1), rat(2)]);
        assert_eq!(
            sparsify_top_k(&w, 1),
            ModelParam::new(vec![rat(3), rat(0), rat(0)])
        );
        // Tie on magnitude: lowest index kept.
        let tie = ModelParam::new(vec![rat(-2), rat(2), rat(1)]);
        assert_eq!(
            sparsify_top_k(&tie, 1),
            ModelParam::new(vec![rat(-2), rat(0), rat(0)])
        );
    }

    #[test]
    fn server_eval_weighted_average() {
        let c1 = ActorId::new("c1");
        let c2 = ActorId::new("c2");
        let gradients: BTreeMap<_, _> = [
            (c1.clone(), ModelParam::scalar(rat(2))),
            (c2.clone(), ModelParam::scalar(rat(6))),
        ]
        .into();
        let partitions: BTreeMap<_, _> =
            [(c1, values(&[1])), (c2, values(&[2, 3, 4]))].into();
        // 0.25 * 2 + 0.75 * 6 = 5.
        let w = server_eval(&gradients, &partitions, 4, &GridSpec::Exact).unwrap();
        assert_eq!(w, ModelParam::scalar(rat(5)));
        assert!(matches!(
            server_eval(&gradients, &partitions, 3, &GridSpec::Exact),
            Err(LearnError::WeightMismatch { given: 3, actual: 4 })
        ));
    }

    #[test]
    fn server_eval_constant_and_single_client() {
        let c1 = ActorId::new("c1");
        let c2 = ActorId::new("c2");
        let g = ModelParam::new(vec![ratio(1, 3), rat(-2)]);
        let gradients: BTreeMap<_, _> =
            [(c1.clone(), g.clone()), (c2.clone(), g.clone())].into();
        let partitions: BTreeMap<_, _> =
            [(c1.clone(), values(&[1])), (c2, values(&[2, 3]))].into();
        assert_eq!(
            server_eval(&gradients, &partitions, 3, &GridSpec::Exact).unwrap(),
            g
        );
        let single_g: BTreeMap<_, _> = [(c1.clone(), g.clone())].into();
        let single_p: BTreeMap<_, _> = [(c1, values(&[7, 8]))].into();
        assert_eq!(
            server_eval(&single_g, &single_p, 2, &GridSpec::Exact).unwrap(),
            g
        );
    }

    #[test]
    fn objective_values() {
        assert_eq!(
            objective(
                LossModel::MeanEstimation,
                &ModelParam::scalar(rat(2)),
                &values(&[2, 2])
            )
            .unwrap(),
            rat(0)
        );
        // (0-2)^2 / 2 = 2.
        assert_eq!(
            objective(
                LossModel::MeanEstimation,
                &ModelParam::scalar(rat(0)),
                &values(&[2])
            )
            .unwrap(),
            rat(2)
        );
    }

    #[test]
    fn objective_decomposes_over_clients() {
        // f(w) = Σ (n_k/n) F_k(w): weighted per-client objectives equal the
        // global objective.
        let w = ModelParam::scalar(ratio(1, 3));
        let p1 = Dataset::new(vec![DataPoint::new("a", vec![], rat(1))]).unwrap();
        let p2 = Dataset::new(vec![
            DataPoint::new("b", vec![], rat(2)),
            DataPoint::new("c", vec![], rat(5)),
            DataPoint::new("d", vec![], rat(-3)),
        ])
        .unwrap();
        let global = Dataset::disjoint_union([&p1, &p2]).unwrap();
        let f1 = objective(LossModel::MeanEstimation, &w, &p1).unwrap();
        let f2 = objective(LossModel::MeanEstimation, &w, &p2).unwrap();
        let combined = ratio(1, 4) * f1 + ratio(3, 4) * f2;
        assert_eq!(
            combined,
            objective(LossModel::MeanEstimation, &w, &global).unwrap()
        );
    }

    #[test]
    fn noise_pmf_examples() {
        let pmf = noise_pmf(&NoiseMechanism::DiscreteLaplace {
            t: ratio(1, 2),
            clamp_steps: 1,
        });
        let expected: BTreeMap<i64, BigRational> =
            [(-1, ratio(1, 4)), (0, ratio(1, 2)), (1, ratio(1, 4))].into();
        assert_eq!(pmf, expected);

        let degenerate = noise_pmf(&NoiseMechanism::DiscreteLaplace {
            t: ratio(7, 9),
            clamp_steps: 0,
        });
        assert_eq!(degenerate, [(0, rat(1))].into());

        let pmf = noise_pmf(&NoiseMechanism::DiscreteLaplace {
            t: ratio(1, 3),
            clamp_steps: 3,
        });
        assert_eq!(pmf.values().sum::<BigRational>(), rat(1));
    }

    #[test]
    fn quantize_rounds_half_away_from_zero() {
        let grid = GridSpec::Grid {
            q: ratio(1, 4),
            lo: rat(-2),
            hi: rat(2),
        };
        let w = ModelParam::new(vec![ratio(3, 8), ratio(-3, 8), ratio(1, 5)]);
        assert_eq!(
            quantize(&grid, &w),
            ModelParam::new(vec![ratio(1, 2), ratio(-1, 2), ratio(1, 4)])
        );
    }

    #[test]
    fn config_validation() {
        let mut cfg = exact_cfg(rat(1));
        assert!(cfg.validate().is_ok());
        cfg.eta = rat(0);
        assert!(cfg.validate().is_err());
        let bad_grid = LearningConfig {
            eta: rat(1),
            rounds: 1,
            local_epochs: 1,
            grid: GridSpec::Grid {
                q: ratio(1, 4),
                lo: ratio(1, 3),
                hi: rat(1),
            },
        };
        assert!(bad_grid.validate().is_err());
        assert!(NoiseMechanism::DiscreteLaplace {
            t: rat(1),
            clamp_steps: 1
        }
        .validate()
        .is_err());
    }

    #[test]
    fn pseudo_gradient_one_epoch_equals_identity() {
        let cfg = exact_cfg(ratio(1, 3));
        let part = values(&[1, 4, 6]);
        let w = ModelParam::scalar(ratio(5, 7));
        let identity = client_update(
            LossModel::MeanEstimation,
            &cfg,
            &w,
            &part,
            &DefenseTransform::Identity,
        )
        .unwrap();
        let pseudo = client_update(
            LossModel::MeanEstimation,
            &cfg,
            &w,
            &part,
            &DefenseTransform::PseudoGradient { epochs: 1 },
        )
        .unwrap();
        assert_eq!(identity, pseudo);
    }

    proptest! {
        #[test]
        fn noise_pmf_sums_to_one_and_is_symmetric(
            num in 1i64..20,
            den in 2i64..40,
            s in 0u32..5,
        ) {
            prop_assume!(num < den);
            let mech = NoiseMechanism::DiscreteLaplace { t: ratio(num, den), clamp_steps: s };
            let pmf = noise_pmf(&mech);
            prop_assert_eq!(pmf.values().sum::<BigRational>(), rat(1));
            for (k, p) in &pmf {
                prop_assert_eq!(p, &pmf[&-k]);
            }
        }

        #[test]
        fn sparsify_idempotent_and_bounded(
            coords in proptest::collection::vec(-50i64..50, 1..6),
            k in 1usize..6,
        ) {
            let w = ModelParam::new(coords.iter().map(|c| rat(*c)).collect());
            let once = sparsify_top_k(&w, k);
            let twice = sparsify_top_k(&once, k);
            prop_assert_eq!(&once, &twice);
            let nonzero = once.coords().iter().filter(|c| !c.is_zero()).count();
            prop_assert!(nonzero <= k);
        }

        #[test]
        fn analytic_gradient_matches_finite_differences(
            w0 in -20i64..20,
            vals in proptest::collection::vec((-20i64..20, 1i64..6), 1..5),
        ) {
            // Central finite differences of the exact objective, evaluated in
            // floating point, as an independent check of the analytic form.
            let part = values_q(&vals);
            let w = ModelParam::scalar(ratio(w0, 3));
            let h = ratio(1, 1_000_000);
            let wp = ModelParam::scalar(&w.coords()[0] + &h);
            let wm = ModelParam::scalar(&w.coords()[0] - &h);
            let fp = objective(LossModel::MeanEstimation, &wp, &part).unwrap();
            let fm = objective(LossModel::MeanEstimation, &wm, &part).unwrap();
            let numeric = ((fp - fm) / (rat(2) * &h)).to_f64().unwrap();
            let analytic = avg_loss_gradient(LossModel::MeanEstimation, &w, &part)
                .unwrap()
                .coords()[0]
                .to_f64()
                .unwrap();
            let scale = analytic.abs().max(1.0);
            prop_assert!((numeric - analytic).abs() <= 1e-6 * scale);
        }

        #[test]
        fn regression_gradient_matches_finite_differences(
            w in proptest::collection::vec(-12i64..12, 3),
            pts in proptest::collection::vec((-9i64..9, -9i64..9, -9i64..9), 1..5),
        ) {
            let part = Dataset::new(pts.iter().enumerate().map(|(i, (a, b, v))| {
                DataPoint::new(format!("p{i}"), vec![ratio(*a, 2), ratio(*b, 2)], ratio(*v, 2))
            })).unwrap();
            let w = ModelParam::new(w.iter().map(|c| ratio(*c, 5)).collect());
            let h = ratio(1, 1_000_000);
            let analytic = avg_loss_gradient(LossModel::LinearRegression, &w, &part).unwrap();
            for dim in 0..w.dim() {
                let mut up = w.coords().to_vec();
                up[dim] += &h;
                let mut down = w.coords().to_vec();
                down[dim] -= &h;
                let fp = objective(LossModel::LinearRegression, &ModelParam::new(up), &part).unwrap();
                let fm = objective(LossModel::LinearRegression, &ModelParam::new(down), &part).unwrap();
                let numeric = ((fp - fm) / (rat(2) * &h)).to_f64().unwrap();
                let exact = analytic.coords()[dim].to_f64().unwrap();
                let scale = exact.abs().max(1.0);
                prop_assert!((numeric - exact).abs() <= 1e-6 * scale);
            }
        }
    }
}
