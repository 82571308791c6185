//! Closed-form generalization-bound calculators.
//!
//! For function classes satisfying the structural condition (a uniform
//! output bound `A` together with a Rademacher-type coefficient `B`), the
//! deviation of the weighted corrected-loss risk from the clean balanced
//! risk admits closed-form high-probability bounds. Two are implemented:
//! one for directly paired bags, with per-pair contamination and size
//! terms, and one for merged big bags, with a harmonic-mean gap term and
//! an explicit failure probability.
//!
//! The calculators are diagnostics: bounds that come out vacuous are
//! reported verbatim and only annotated as such.

use crate::pairing::harmonic_mean;
use crate::{Error, Result};

/// Structural constants of a function class: `a` bounds the outputs
/// uniformly, `b` scales the Rademacher term.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SrConstants {
    pub a: f64,
    pub b: f64,
}

/// Constants for a kernel RKHS ball: `(a, b) = (R K, R K)` for radius `R`
/// and kernel bound `K`.
pub fn sr_rkhs_ball(radius: f64, kernel_bound: f64) -> Result<SrConstants> {
    if radius <= 0.0 || kernel_bound <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "radius {radius} and kernel bound {kernel_bound} must be positive"
        )));
    }
    Ok(SrConstants { a: radius * kernel_bound, b: radius * kernel_bound })
}

/// Constants for two-layer ReLU networks with output weights bounded by
/// `alpha`, hidden rows bounded by `beta`, inputs bounded by `xnorm`:
/// `a = ||alpha|| ||beta|| xnorm`, `b = 2 <alpha, beta> xnorm`.
pub fn sr_relu_network(alpha: &[f64], beta: &[f64], xnorm: f64) -> Result<SrConstants> {
    if alpha.len() != beta.len() {
        return Err(Error::DimensionMismatch { expected: alpha.len(), got: beta.len() });
    }
    if alpha.iter().chain(beta).any(|&v| v < 0.0) {
        return Err(Error::InvalidParameter("bound vectors must be nonnegative".into()));
    }
    if xnorm <= 0.0 {
        return Err(Error::InvalidParameter(format!("xnorm must be positive, got {xnorm}")));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let inner: f64 = alpha.iter().zip(beta).map(|(a, b)| a * b).sum();
    Ok(SrConstants { a: norm(alpha) * norm(beta) * xnorm, b: 2.0 * inner * xnorm })
}

/// Which independence assumption the bound is evaluated under. The bag
/// model replaces every per-pair size term by 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndependenceModel {
    Instance,
    Bag,
}

/// One paired contamination model feeding the bound.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct PairTerm {
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    /// Harmonic mean of the two side sizes.
    pub nbar: f64,
    pub weight: f64,
}

impl PairTerm {
    fn denom(&self) -> f64 {
        1.0 - self.kappa_minus - self.kappa_plus
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PairedBoundInputs {
    pub pairs: Vec<PairTerm>,
    /// Lipschitz constant of the base loss.
    pub loss_lipschitz: f64,
    pub delta: f64,
    pub model: IndependenceModel,
}

/// All intermediates of a paired-bags bound evaluation.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PairedBoundReport {
    pub c: f64,
    pub d: f64,
    /// `w_i^2 / (nbar_i (1 - kappa-_i - kappa+_i)^2)` per pair.
    pub per_pair_terms: Vec<f64>,
    pub sum: f64,
    pub bound: f64,
    pub vacuous: bool,
}

fn validate_common(loss_lipschitz: f64, delta: f64) -> Result<()> {
    if loss_lipschitz < 0.0 {
        return Err(Error::InvalidParameter("loss Lipschitz constant must be nonnegative".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("delta {delta} outside (0, 1]")));
    }
    Ok(())
}

fn validate_weights(weights: impl Iterator<Item = f64> + Clone) -> Result<()> {
    if weights.clone().any(|w| w < 0.0) {
        return Err(Error::InvalidParameter("weights must be nonnegative".into()));
    }
    let total: f64 = weights.sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}

fn constants(sr: &SrConstants, loss_lipschitz: f64, delta: f64) -> (f64, f64) {
    let c = (1.0 + sr.a * loss_lipschitz) * (2.0 / delta).ln().sqrt();
    let d = 2.0 * sr.b * loss_lipschitz + c;
    (c, d)
}

/// High-probability bound on the deviation of the weighted corrected-loss
/// risk over paired bags from the clean balanced risk:
/// `D * sqrt(sum_i w_i^2 / (nbar_i (1 - kappa-_i - kappa+_i)^2))` with
/// `C = (1 + A |l|) sqrt(log(2/delta))` and `D = 2 B |l| + C`.
pub fn paired_bags_bound(inputs: &PairedBoundInputs, sr: &SrConstants) -> Result<PairedBoundReport> {
    validate_common(inputs.loss_lipschitz, inputs.delta)?;
    if inputs.pairs.is_empty() {
        return Err(Error::EmptyInput("bound pairs"));
    }
    validate_weights(inputs.pairs.iter().map(|p| p.weight))?;

    let mut per_pair_terms = Vec::with_capacity(inputs.pairs.len());
    for p in &inputs.pairs {
        let denom = p.denom();
        if denom <= 0.0 {
            return Err(Error::ContaminationTooLarge(p.kappa_plus + p.kappa_minus));
        }
        if p.nbar <= 0.0 {
            return Err(Error::InvalidParameter(format!("nbar must be positive, got {}", p.nbar)));
        }
        let nbar = match inputs.model {
            IndependenceModel::Instance => p.nbar,
            IndependenceModel::Bag => 1.0,
        };
        per_pair_terms.push(p.weight * p.weight / (nbar * denom * denom));
    }
    let sum: f64 = per_pair_terms.iter().sum();
    let (c, d) = constants(sr, inputs.loss_lipschitz, inputs.delta);
    let bound = d * sum.sqrt();
    Ok(PairedBoundReport { c, d, per_pair_terms, sum, bound, vacuous: bound >= 1.0 })
}

/// Bound-optimal weights for the given pairs: proportional to
/// `nbar_i (1 - kappa-_i - kappa+_i)^2` under the instance model and to
/// `(1 - kappa-_i - kappa+_i)^2` under the bag model.
pub fn bound_optimal_weights(pairs: &[PairTerm], model: IndependenceModel) -> Result<Vec<f64>> {
    let raw: Vec<f64> = pairs
        .iter()
        .map(|p| {
            let denom = p.denom().max(0.0);
            match model {
                IndependenceModel::Instance => p.nbar * denom * denom,
                IndependenceModel::Bag => denom * denom,
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegeneratePairs { floor: 0.0 });
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// Distributional parameters of the label-proportion sequence: adjacent
/// proportions differ by at least `separation` except on collision events
/// whose joint probability decays like `collision_rate^|J|`.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct LpParams {
    pub separation: f64,
    pub collision_rate: f64,
    pub epsilon_floor: f64,
}

/// Largest admissible slack `epsilon` for the merged-bags bound:
/// `(separation (1 - collision_rate) - epsilon_floor) / (1 + separation)`.
pub fn admissible_epsilon_max(lp: &LpParams) -> Result<f64> {
    if lp.separation <= 0.0 || !(0.0..1.0).contains(&lp.collision_rate) {
        return Err(Error::InvalidParameter(
            "separation must be positive and collision rate in [0, 1)".into(),
        ));
    }
    let ceiling = lp.separation * (1.0 - lp.collision_rate);
    if !(lp.epsilon_floor > 0.0 && lp.epsilon_floor < ceiling) {
        return Err(Error::InvalidParameter(format!(
            "epsilon floor {} outside (0, {ceiling})",
            lp.epsilon_floor
        )));
    }
    Ok((ceiling - lp.epsilon_floor) / (1.0 + lp.separation))
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MergedBoundInputs {
    /// Expected merged proportion gaps, one per merged pair (`M = N / K`).
    pub merged_gaps: Vec<f64>,
    pub epsilon: f64,
    /// Small-bag size `n`.
    pub small_bag_size: usize,
    /// Small-bag pairs per merged pair, `K`.
    pub pairs_per_merge: usize,
    /// Total small-bag pairs, `N`.
    pub total_pairs: usize,
    pub loss_lipschitz: f64,
    pub delta: f64,
    pub model: IndependenceModel,
    pub lp_params: LpParams,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MergedBoundReport {
    pub c: f64,
    pub d: f64,
    /// `HM((gap_i - epsilon)^-2)`.
    pub hm_term: f64,
    pub bound: f64,
    /// `delta + 2 (N/K) exp(-2 K epsilon^2)`; can legitimately exceed 1.
    pub failure_probability: f64,
    pub vacuous: bool,
}

/// High-probability bound for merged big bags:
/// `D * sqrt(HM((gap_i - epsilon)^-2) / (2 (N/K) n))`, holding with
/// probability at least `1 - delta - 2 (N/K) exp(-2 K epsilon^2)`.
pub fn merged_bags_bound(inputs: &MergedBoundInputs, sr: &SrConstants) -> Result<MergedBoundReport> {
    validate_common(inputs.loss_lipschitz, inputs.delta)?;
    let eps_max = admissible_epsilon_max(&inputs.lp_params)?;
    if !(inputs.epsilon > 0.0 && inputs.epsilon <= eps_max) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {} outside admissible (0, {eps_max}]",
            inputs.epsilon
        )));
    }
    let k = inputs.pairs_per_merge;
    let n = inputs.total_pairs;
    if k == 0 || n == 0 || !n.is_multiple_of(k) {
        return Err(Error::InvalidParameter(format!(
            "total pairs {n} must be a positive multiple of K = {k}"
        )));
    }
    let m = n / k;
    if inputs.merged_gaps.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: inputs.merged_gaps.len() });
    }
    if inputs.small_bag_size == 0 {
        return Err(Error::InvalidParameter("small bag size must be positive".into()));
    }

    let adjusted: Vec<f64> = inputs
        .merged_gaps
        .iter()
        .map(|&g| {
            let adj = g - inputs.epsilon;
            if adj <= 0.0 {
                Err(Error::InvalidParameter(format!(
                    "merged gap {g} does not exceed epsilon {}",
                    inputs.epsilon
                )))
            } else {
                Ok(adj.powi(-2))
            }
        })
        .collect::<Result<_>>()?;
    let hm_term = harmonic_mean(&adjusted)?;

    let n_eff = match inputs.model {
        IndependenceModel::Instance => inputs.small_bag_size as f64,
        IndependenceModel::Bag => 1.0,
    };
    let (c, d) = constants(sr, inputs.loss_lipschitz, inputs.delta);
    let bound = d * (hm_term / (2.0 * m as f64 * n_eff)).sqrt();
    let failure_probability =
        inputs.delta + 2.0 * m as f64 * (-2.0 * k as f64 * inputs.epsilon * inputs.epsilon).exp();
    Ok(MergedBoundReport {
        c,
        d,
        hm_term,
        bound,
        failure_probability,
        vacuous: failure_probability >= 1.0 || bound >= 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn rkhs_constants() {
        assert_eq!(sr_rkhs_ball(2.0, 1.0).unwrap(), SrConstants { a: 2.0, b: 2.0 });
        assert_eq!(sr_rkhs_ball(1.0, 1.0).unwrap(), SrConstants { a: 1.0, b: 1.0 });
        assert_eq!(sr_rkhs_ball(3.0, 0.5).unwrap(), SrConstants { a: 1.5, b: 1.5 });
        assert!(sr_rkhs_ball(0.0, 1.0).is_err());
    }

    #[test]
    fn relu_constants() {
        let sr = sr_relu_network(&[1.0], &[1.0], 1.0).unwrap();
        assert_eq!((sr.a, sr.b), (1.0, 2.0));

        let sr = sr_relu_network(&[1.0, 0.0], &[0.0, 1.0], 1.0).unwrap();
        assert_eq!((sr.a, sr.b), (1.0, 0.0));

        // homogeneous in the input bound
        let base = sr_relu_network(&[0.5, 1.5], &[2.0, 0.25], 1.0).unwrap();
        let scaled = sr_relu_network(&[0.5, 1.5], &[2.0, 0.25], 3.0).unwrap();
        assert!((scaled.a - 3.0 * base.a).abs() < 1e-12);
        assert!((scaled.b - 3.0 * base.b).abs() < 1e-12);

        assert!(sr_relu_network(&[1.0], &[1.0, 2.0], 1.0).is_err());
        assert!(sr_relu_network(&[-1.0], &[1.0], 1.0).is_err());
    }

    fn single_pair_inputs() -> PairedBoundInputs {
        PairedBoundInputs {
            pairs: vec![PairTerm { kappa_plus: 0.0, kappa_minus: 0.0, nbar: 100.0, weight: 1.0 }],
            loss_lipschitz: 1.0,
            delta: 0.05,
            model: IndependenceModel::Instance,
        }
    }

    #[test]
    fn paired_bound_fixture() {
        // C = 2 sqrt(ln 40), D = 2 + C, bound = D / 10
        let report =
            paired_bags_bound(&single_pair_inputs(), &SrConstants { a: 1.0, b: 1.0 }).unwrap();
        let c = 2.0 * (40.0f64).ln().sqrt();
        assert!((report.c - c).abs() < 1e-12);
        assert!((report.d - (2.0 + c)).abs() < 1e-12);
        assert!((report.bound - (2.0 + c) / 10.0).abs() < 1e-12);
        assert!((report.bound - 0.5841).abs() < 1e-3);
        assert!(!report.vacuous);
    }

    #[test]
    fn bag_model_drops_size_terms() {
        let mut inputs = single_pair_inputs();
        inputs.model = IndependenceModel::Bag;
        let report = paired_bags_bound(&inputs, &SrConstants { a: 1.0, b: 1.0 }).unwrap();
        let instance = paired_bags_bound(&single_pair_inputs(), &SrConstants { a: 1.0, b: 1.0 })
            .unwrap();
        assert!((report.bound - instance.bound * 10.0).abs() < 1e-12);
        assert!(report.vacuous); // 5.84 is reported verbatim, flagged
    }

    #[test]
    fn degenerate_kappa_rejected() {
        let mut inputs = single_pair_inputs();
        inputs.pairs[0].kappa_plus = 0.6;
        inputs.pairs[0].kappa_minus = 0.4;
        assert!(matches!(
            paired_bags_bound(&inputs, &SrConstants { a: 1.0, b: 1.0 }),
            Err(Error::ContaminationTooLarge(_))
        ));
    }

    fn random_pairs(rng: &mut impl Rng, n: usize) -> Vec<PairTerm> {
        (0..n)
            .map(|_| {
                let kp = rng.gen_range(0.0..0.5);
                let km = rng.gen_range(0.0..(0.9 - kp));
                PairTerm {
                    kappa_plus: kp,
                    kappa_minus: km,
                    nbar: rng.gen_range(1.0..200.0),
                    weight: 0.0,
                }
            })
            .collect()
    }

    fn with_weights(pairs: &[PairTerm], weights: &[f64]) -> Vec<PairTerm> {
        pairs
            .iter()
            .zip(weights)
            .map(|(p, &w)| PairTerm { weight: w, ..*p })
            .collect()
    }

    #[test]
    fn optimal_weights_collapse_the_sum() {
        let mut rng = crate::seed::rng(71);
        let sr = SrConstants { a: 1.0, b: 1.0 };
        for model in [IndependenceModel::Instance, IndependenceModel::Bag] {
            for _ in 0..50 {
                let n = rng.gen_range(1..8);
                let pairs = random_pairs(&mut rng, n);
                let weights = bound_optimal_weights(&pairs, model).unwrap();
                let inputs = PairedBoundInputs {
                    pairs: with_weights(&pairs, &weights),
                    loss_lipschitz: 1.0,
                    delta: 0.1,
                    model,
                };
                let report = paired_bags_bound(&inputs, &sr).unwrap();
                // sum reduces to (sum_i nbar_i denom_i^2)^-1
                let expected: f64 = pairs
                    .iter()
                    .map(|p| {
                        let d = 1.0 - p.kappa_minus - p.kappa_plus;
                        let nb = if model == IndependenceModel::Instance { p.nbar } else { 1.0 };
                        nb * d * d
                    })
                    .sum::<f64>()
                    .recip();
                assert!((report.sum - expected).abs() < 1e-12 * expected.max(1.0));
            }
        }
    }

    #[test]
    fn optimal_weights_beat_uniform_and_random() {
        let mut rng = crate::seed::rng(73);
        let sr = SrConstants { a: 1.0, b: 1.0 };
        for _ in 0..50 {
            let n = rng.gen_range(2..8);
            let pairs = random_pairs(&mut rng, n);
            let optimal = bound_optimal_weights(&pairs, IndependenceModel::Instance).unwrap();
            let bound_at = |weights: &[f64]| {
                paired_bags_bound(
                    &PairedBoundInputs {
                        pairs: with_weights(&pairs, weights),
                        loss_lipschitz: 1.0,
                        delta: 0.1,
                        model: IndependenceModel::Instance,
                    },
                    &sr,
                )
                .unwrap()
                .bound
            };
            let best = bound_at(&optimal);
            assert!(best <= bound_at(&vec![1.0 / n as f64; n]) + 1e-12);
            for _ in 0..100 {
                let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
                assert!(best <= bound_at(&w) + 1e-12);
            }
        }
    }

    #[test]
    fn outlier_pair_diverges_only_under_uniform_weights() {
        let sr = SrConstants { a: 1.0, b: 1.0 };
        let bound_at = |gap: f64, optimal: bool| {
            let pairs = vec![
                PairTerm { kappa_plus: 0.25, kappa_minus: 0.25, nbar: 50.0, weight: 0.0 },
                PairTerm {
                    kappa_plus: (1.0 - gap) / 2.0,
                    kappa_minus: (1.0 - gap) / 2.0,
                    nbar: 50.0,
                    weight: 0.0,
                },
            ];
            let weights = if optimal {
                bound_optimal_weights(&pairs, IndependenceModel::Instance).unwrap()
            } else {
                vec![0.5, 0.5]
            };
            paired_bags_bound(
                &PairedBoundInputs {
                    pairs: with_weights(&pairs, &weights),
                    loss_lipschitz: 1.0,
                    delta: 0.05,
                    model: IndependenceModel::Instance,
                },
                &sr,
            )
            .unwrap()
            .bound
        };

        // as the outlier gap shrinks, the optimal-weight bound stays below
        // the value it would have with the good pair alone
        let single_good = paired_bags_bound(
            &PairedBoundInputs {
                pairs: vec![PairTerm {
                    kappa_plus: 0.25,
                    kappa_minus: 0.25,
                    nbar: 50.0,
                    weight: 1.0,
                }],
                loss_lipschitz: 1.0,
                delta: 0.05,
                model: IndependenceModel::Instance,
            },
            &sr,
        )
        .unwrap()
        .bound;
        let mut gap = 0.1;
        while gap > 1e-6 {
            assert!(bound_at(gap, true) <= single_good + 1e-12, "optimal-weight bound grew at gap {gap}");
            gap /= 10.0;
        }
        assert!(bound_at(1e-6, false) > 1e3 * bound_at(1e-6, true));
    }

    #[test]
    fn bound_is_monotone_in_sizes_and_gaps() {
        let mut rng = crate::seed::rng(79);
        let sr = SrConstants { a: 1.0, b: 1.0 };
        for _ in 0..50 {
            let pairs = random_pairs(&mut rng, 4);
            let weights = vec![0.25; 4];
            let evaluate = |pairs: &[PairTerm]| {
                paired_bags_bound(
                    &PairedBoundInputs {
                        pairs: with_weights(pairs, &weights),
                        loss_lipschitz: 1.0,
                        delta: 0.1,
                        model: IndependenceModel::Instance,
                    },
                    &sr,
                )
                .unwrap()
                .bound
            };
            let base = evaluate(&pairs);

            let mut bigger = pairs.clone();
            let idx = rng.gen_range(0..4);
            bigger[idx].nbar *= rng.gen_range(1.5..4.0);
            assert!(evaluate(&bigger) <= base + 1e-15);

            let mut wider = pairs.clone();
            wider[idx].kappa_plus *= 0.5;
            wider[idx].kappa_minus *= 0.5;
            assert!(evaluate(&wider) <= base + 1e-15);
        }
    }

    fn merged_inputs() -> MergedBoundInputs {
        MergedBoundInputs {
            merged_gaps: vec![0.5],
            epsilon: 0.1,
            small_bag_size: 8,
            pairs_per_merge: 1,
            total_pairs: 1,
            loss_lipschitz: 1.0,
            delta: 0.05,
            model: IndependenceModel::Instance,
            lp_params: LpParams { separation: 0.5, collision_rate: 0.2, epsilon_floor: 0.1 },
        }
    }

    #[test]
    fn merged_bound_single_pair_hm() {
        let report = merged_bags_bound(&merged_inputs(), &SrConstants { a: 1.0, b: 1.0 }).unwrap();
        // single-element harmonic mean: (0.4)^-2 = 6.25
        assert!((report.hm_term - 6.25).abs() < 1e-12);
        assert!((report.bound - report.d * (6.25f64 / 16.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn merged_failure_probability_reported_verbatim() {
        let mut inputs = merged_inputs();
        inputs.pairs_per_merge = 100;
        inputs.total_pairs = 1000;
        inputs.merged_gaps = vec![0.5; 10];
        let report = merged_bags_bound(&inputs, &SrConstants { a: 1.0, b: 1.0 }).unwrap();
        let expected = 0.05 + 20.0 * (-2.0f64).exp();
        assert!((report.failure_probability - expected).abs() < 1e-12);
        assert!((expected - 2.757).abs() < 1e-3);
        assert!(report.vacuous);
    }

    #[test]
    fn admissible_epsilon_endpoint() {
        let lp = LpParams { separation: 0.5, collision_rate: 0.2, epsilon_floor: 0.1 };
        assert!((admissible_epsilon_max(&lp).unwrap() - 0.2).abs() < 1e-12);

        let mut inputs = merged_inputs();
        inputs.epsilon = 0.25;
        assert!(merged_bags_bound(&inputs, &SrConstants { a: 1.0, b: 1.0 }).is_err());

        let mut inputs = merged_inputs();
        inputs.merged_gaps = vec![0.05];
        assert!(merged_bags_bound(&inputs, &SrConstants { a: 1.0, b: 1.0 }).is_err());
    }

    #[test]
    fn merged_bag_model_drops_small_bag_size() {
        let instance =
            merged_bags_bound(&merged_inputs(), &SrConstants { a: 1.0, b: 1.0 }).unwrap();
        let mut inputs = merged_inputs();
        inputs.model = IndependenceModel::Bag;
        let bag = merged_bags_bound(&inputs, &SrConstants { a: 1.0, b: 1.0 }).unwrap();
        assert!((bag.bound - instance.bound * (8.0f64).sqrt()).abs() < 1e-12);
    }
}
