//! Bags and the samplers behind the synthetic experiments.
//!
//! A bag is a group of unlabeled instances annotated with its empirical
//! label proportion. Simulated bags additionally carry the true label
//! proportion and the hidden labels; training never sees either, they
//! exist so evaluation can score against ground truth.
//!
//! Two generation models are provided. In the instance model the labels
//! within a bag are iid Bernoulli draws; in the bag model the positive
//! count comes from a Beta-Binomial with a dependence knob `rho`, which
//! interpolates between independent labels (`rho = 0`) and a bag whose
//! labels all agree (`rho = 1`) while keeping the expected label
//! proportion equal to the true one.

use rand::prelude::*;
use rand_distr::{Beta, Binomial, Normal};

use crate::loss::Sign;
use crate::{seed, Error, Result};

/// A group of instances with an observed label proportion.
#[derive(Debug, Clone, PartialEq)]
pub struct Bag {
    instances: Vec<Vec<f64>>,
    lp_hat: f64,
    true_lp: Option<f64>,
    hidden_labels: Option<Vec<i8>>,
}

impl Bag {
    /// Bag built from simulated (or otherwise known) labels; the observed
    /// proportion is computed from them exactly.
    pub fn from_labeled(
        instances: Vec<Vec<f64>>,
        labels: Vec<i8>,
        true_lp: Option<f64>,
    ) -> Result<Bag> {
        if instances.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: instances.len(),
                got: labels.len(),
            });
        }
        let lp_hat = empirical_lp(&labels)?;
        Ok(Bag { instances, lp_hat, true_lp, hidden_labels: Some(labels) })
    }

    /// Bag ingested from real data: only the proportion is known.
    pub fn from_unlabeled(instances: Vec<Vec<f64>>, lp_hat: f64) -> Result<Bag> {
        if instances.is_empty() {
            return Err(Error::EmptyInput("bag instances"));
        }
        if !(0.0..=1.0).contains(&lp_hat) {
            return Err(Error::InvalidParameter(format!(
                "label proportion {lp_hat} outside [0, 1]"
            )));
        }
        Ok(Bag { instances, lp_hat, true_lp: None, hidden_labels: None })
    }

    /// Attaches a true label proportion (simulation metadata).
    pub fn with_true_lp(mut self, lp: f64) -> Bag {
        self.true_lp = Some(lp);
        self
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[Vec<f64>] {
        &self.instances
    }

    /// Observed label proportion, an exact multiple of `1/n` when derived
    /// from labels.
    pub fn lp_hat(&self) -> f64 {
        self.lp_hat
    }

    pub fn true_lp(&self) -> Option<f64> {
        self.true_lp
    }

    /// Simulation ground truth; `None` for ingested data.
    pub fn hidden_labels(&self) -> Option<&[i8]> {
        self.hidden_labels.as_deref()
    }
}

/// Observed label proportion of a label vector.
pub fn empirical_lp(labels: &[i8]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::EmptyInput("labels"));
    }
    for &y in labels {
        if y != 1 && y != -1 {
            return Err(Error::InvalidParameter(format!("label must be +1 or -1, got {y}")));
        }
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    Ok(positives as f64 / labels.len() as f64)
}

/// A parametric class-conditional sampler.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassDistribution {
    /// Isotropic Gaussian with the given mean and per-coordinate scale.
    IsotropicGaussian { mean: Vec<f64>, scale: f64 },
    /// Uniform on `[0, 1]` (1-D).
    Uniform01,
    /// Density `2x` on `[0, 1]` (1-D); inverse CDF is `sqrt(u)`.
    Triangular2x,
}

impl ClassDistribution {
    pub fn dim(&self) -> usize {
        match self {
            ClassDistribution::IsotropicGaussian { mean, .. } => mean.len(),
            ClassDistribution::Uniform01 | ClassDistribution::Triangular2x => 1,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            ClassDistribution::IsotropicGaussian { mean, scale } => {
                let normal = Normal::new(0.0, *scale).expect("scale must be positive");
                mean.iter().map(|m| m + normal.sample(rng)).collect()
            }
            ClassDistribution::Uniform01 => vec![rng.gen::<f64>()],
            ClassDistribution::Triangular2x => vec![rng.gen::<f64>().sqrt()],
        }
    }
}

/// The pair of class-conditional distributions.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClassConditionals {
    pub pos: ClassDistribution,
    pub neg: ClassDistribution,
}

impl ClassConditionals {
    /// Isotropic Gaussians at `+mean` and `-mean`.
    pub fn symmetric_gaussians(mean: Vec<f64>, scale: f64) -> ClassConditionals {
        let neg_mean = mean.iter().map(|m| -m).collect();
        ClassConditionals {
            pos: ClassDistribution::IsotropicGaussian { mean, scale },
            neg: ClassDistribution::IsotropicGaussian { mean: neg_mean, scale },
        }
    }

    /// The 1-D pair from the proportion-matching failure demo: triangular
    /// positives, uniform negatives.
    pub fn triangular_vs_uniform() -> ClassConditionals {
        ClassConditionals {
            pos: ClassDistribution::Triangular2x,
            neg: ClassDistribution::Uniform01,
        }
    }

    pub fn dim(&self) -> usize {
        self.pos.dim()
    }

    pub fn sample(&self, label: Sign, rng: &mut impl Rng) -> Vec<f64> {
        match label {
            Sign::Plus => self.pos.sample(rng),
            Sign::Minus => self.neg.sample(rng),
        }
    }
}

/// Distribution of true label proportions across bags.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LpDistribution {
    Constant { value: f64 },
    IidUniform { lo: f64, hi: f64 },
    /// `lp_{j+1} = lp_j + w` with `w` uniform on `(-scale, scale)`
    /// truncated to keep the proportion in `[0, 1]`.
    CorrelatedWalk { start: f64, scale: f64 },
}

impl LpDistribution {
    fn validate(&self) -> Result<()> {
        match self {
            LpDistribution::Constant { value } => {
                if !(0.0..=1.0).contains(value) {
                    return Err(Error::InvalidParameter(format!(
                        "constant label proportion {value} outside [0, 1]"
                    )));
                }
            }
            LpDistribution::IidUniform { lo, hi } => {
                if !(0.0..=1.0).contains(lo) || !(0.0..=1.0).contains(hi) || lo > hi {
                    return Err(Error::InvalidParameter(format!(
                        "uniform range [{lo}, {hi}] invalid"
                    )));
                }
            }
            LpDistribution::CorrelatedWalk { start, scale } => {
                if !(0.0..=1.0).contains(start) || *scale <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "walk start {start} or scale {scale} invalid"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One step of the correlated walk: the innovation is truncated to
/// `[-lp, 1 - lp]` so the proportion stays in `[0, 1]`.
pub fn walk_step(lp: f64, innovation: f64) -> f64 {
    lp + innovation.clamp(-lp, 1.0 - lp)
}

/// Draws `count` label proportions.
pub fn sample_lps(dist: &LpDistribution, count: usize, seed: u64) -> Result<Vec<f64>> {
    dist.validate()?;
    let mut rng = seed::rng(seed);
    let mut out = Vec::with_capacity(count);
    match dist {
        LpDistribution::Constant { value } => out.resize(count, *value),
        LpDistribution::IidUniform { lo, hi } => {
            for _ in 0..count {
                out.push(if lo == hi { *lo } else { rng.gen_range(*lo..*hi) });
            }
        }
        LpDistribution::CorrelatedWalk { start, scale } => {
            let mut lp = *start;
            for _ in 0..count {
                lp = walk_step(lp, rng.gen_range(-scale..*scale));
                out.push(lp);
            }
        }
    }
    Ok(out)
}

fn validate_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!(
            "label proportion {gamma} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Samples a bag under the instance model: labels iid Bernoulli(`gamma`),
/// instances drawn independently from their class conditionals.
pub fn sample_bag_ciim(
    gamma: f64,
    n: usize,
    cc: &ClassConditionals,
    seed: u64,
) -> Result<Bag> {
    validate_gamma(gamma)?;
    if n == 0 {
        return Err(Error::InvalidParameter("bag size must be positive".into()));
    }
    let mut rng = seed::rng(seed);
    let labels: Vec<i8> = (0..n)
        .map(|_| if rng.gen::<f64>() < gamma { 1 } else { -1 })
        .collect();
    let instances = labels
        .iter()
        .map(|&y| cc.sample(Sign::from_label(y), &mut rng))
        .collect();
    Bag::from_labeled(instances, labels, Some(gamma))
}

/// Samples a bag under the bag model: the positive count is exchangeable
/// with mean `n * gamma`, labels within the bag are dependent for
/// `rho > 0`, and instances are drawn from their class conditionals given
/// the labels.
///
/// `rho = 0` recovers the Binomial counts of the instance model; `rho = 1`
/// makes all labels equal (count `n` with probability `gamma`, else 0).
pub fn sample_bag_cibm(
    gamma: f64,
    n: usize,
    cc: &ClassConditionals,
    rho: f64,
    seed: u64,
) -> Result<Bag> {
    validate_gamma(gamma)?;
    if n == 0 {
        return Err(Error::InvalidParameter("bag size must be positive".into()));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("dependence rho {rho} outside [0, 1]")));
    }
    let mut rng = seed::rng(seed);

    let count = if gamma <= 0.0 {
        0
    } else if gamma >= 1.0 {
        n
    } else if rho >= 1.0 {
        if rng.gen::<f64>() < gamma {
            n
        } else {
            0
        }
    } else if rho <= 0.0 {
        Binomial::new(n as u64, gamma).unwrap().sample(&mut rng) as usize
    } else {
        // Beta-Binomial with mean n*gamma and intra-bag correlation rho
        let s = (1.0 - rho) / rho;
        let beta = Beta::new(gamma * s, (1.0 - gamma) * s)
            .map_err(|e| Error::InvalidParameter(format!("beta parameters: {e}")))?;
        let p: f64 = beta.sample(&mut rng).clamp(0.0, 1.0);
        if p <= 0.0 {
            0
        } else if p >= 1.0 {
            n
        } else {
            Binomial::new(n as u64, p).unwrap().sample(&mut rng) as usize
        }
    };

    let mut labels: Vec<i8> = (0..n).map(|j| if j < count { 1 } else { -1 }).collect();
    labels.shuffle(&mut rng);
    let instances = labels
        .iter()
        .map(|&y| cc.sample(Sign::from_label(y), &mut rng))
        .collect();
    Bag::from_labeled(instances, labels, Some(gamma))
}
