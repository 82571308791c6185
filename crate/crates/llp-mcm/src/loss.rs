//! Base binary losses and the corrected loss.
//!
//! A loss assigns a penalty `l_sigma(t)` to a real margin `t` for each
//! class `sigma`. Given contamination proportions `kappa = (k+, k-)` with
//! `k+ + k- < 1`, the corrected loss
//!
//! ```text
//! l^k_sigma(t) = ((1 - k^{-sigma}) l_sigma(t) - k^{-sigma} l_{-sigma}(t)) / (1 - k- - k+)
//! ```
//!
//! makes the risk under the contaminated pair of distributions equal the
//! clean balanced risk, which is what the whole reduction rests on.

use crate::{Error, Result};

/// Class index, written `+`/`-` throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// Maps a `+1`/`-1` label. Anything else is a caller bug.
    pub fn from_label(y: i8) -> Sign {
        match y {
            1 => Sign::Plus,
            -1 => Sign::Minus,
            other => panic!("label must be +1 or -1, got {other}"),
        }
    }
}

/// Supported base losses.
///
/// Logistic is the training default. Sigmoid and ramp are symmetric
/// (constant `l+(t) + l-(t)`), squared is the convexity demo, zero-one is
/// evaluation only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    Logistic,
    Sigmoid,
    Ramp,
    Squared,
    ZeroOne,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::Logistic => "logistic",
            Loss::Sigmoid => "sigmoid",
            Loss::Ramp => "ramp",
            Loss::Squared => "squared",
            Loss::ZeroOne => "zero-one",
        }
    }

    pub fn parse(s: &str) -> Result<Loss> {
        match s {
            "logistic" => Ok(Loss::Logistic),
            "sigmoid" => Ok(Loss::Sigmoid),
            "ramp" => Ok(Loss::Ramp),
            "squared" => Ok(Loss::Squared),
            "zero-one" | "zero_one" | "01" => Ok(Loss::ZeroOne),
            other => Err(Error::InvalidParameter(format!("unknown loss `{other}`"))),
        }
    }

    /// `l_sigma(t)`. Total on finite inputs.
    pub fn evaluate(self, t: f64, sigma: Sign) -> f64 {
        let st = sigma.as_f64() * t;
        match self {
            // ln(1 + e^{-st}), computed stably for large |st|
            Loss::Logistic => (-st).max(0.0) + (-st.abs()).exp().ln_1p(),
            Loss::Sigmoid => 1.0 / (1.0 + st.exp()),
            Loss::Ramp => ((1.0 - st) / 2.0).clamp(0.0, 1.0),
            Loss::Squared => (1.0 - st) * (1.0 - st),
            // sign(0) counts as a positive prediction
            Loss::ZeroOne => match sigma {
                Sign::Plus => {
                    if t < 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Sign::Minus => {
                    if t >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
            },
        }
    }

    /// `l'_sigma(t)`. Errors for the zero-one loss; at the ramp kinks the
    /// flat-side subgradient 0 is returned.
    pub fn derivative(self, t: f64, sigma: Sign) -> Result<f64> {
        let s = sigma.as_f64();
        let st = s * t;
        match self {
            Loss::Logistic => Ok(-s / (1.0 + st.exp())),
            Loss::Sigmoid => {
                let p = 1.0 / (1.0 + st.exp());
                Ok(-s * p * (1.0 - p))
            }
            Loss::Ramp => Ok(if st.abs() < 1.0 { -s / 2.0 } else { 0.0 }),
            Loss::Squared => Ok(-2.0 * s * (1.0 - st)),
            Loss::ZeroOne => Err(Error::NotDifferentiable(self.name())),
        }
    }

    /// Global Lipschitz constant `|l|`, when one exists.
    pub fn lipschitz(self) -> Option<f64> {
        match self {
            Loss::Logistic => Some(1.0),
            Loss::Sigmoid => Some(0.25),
            Loss::Ramp => Some(0.5),
            Loss::Squared | Loss::ZeroOne => None,
        }
    }

    /// `|l|_0 = max(|l+(0)|, |l-(0)|)`.
    pub fn at_zero_magnitude(self) -> f64 {
        self.evaluate(0.0, Sign::Plus)
            .abs()
            .max(self.evaluate(0.0, Sign::Minus).abs())
    }

    /// The constant `K` with `l+(t) + l-(t) = K` for all `t`, when the
    /// loss is symmetric.
    pub fn symmetric_shift(self) -> Option<f64> {
        match self {
            Loss::Sigmoid | Loss::Ramp | Loss::ZeroOne => Some(1.0),
            Loss::Logistic | Loss::Squared => None,
        }
    }

    /// True for convex, twice-differentiable losses with `l+'' = l-''`
    /// (logistic and squared), the precondition of the analytic convexity
    /// certificate.
    fn second_order_symmetric_convex(self) -> bool {
        matches!(self, Loss::Logistic | Loss::Squared)
    }
}

/// Smallest admissible `1 - k- - k+`; near-zero denominators produce
/// unusable Lipschitz constants, and the pairing layer already excludes
/// such pairs.
pub const MIN_DENOM: f64 = 1e-6;

/// The corrected loss `l^k` for contamination proportions `k = (k+, k-)`.
#[derive(Debug, Clone, Copy)]
pub struct CorrectedLoss {
    base: Loss,
    kappa_plus: f64,
    kappa_minus: f64,
    denom: f64,
}

impl CorrectedLoss {
    /// Builds `l^k`. Rejects negative proportions and `k+ + k-` at or
    /// above `1 - MIN_DENOM`.
    pub fn new(base: Loss, kappa: (f64, f64)) -> Result<CorrectedLoss> {
        let (kp, km) = kappa;
        if kp < 0.0 || km < 0.0 {
            return Err(Error::NegativeKappa(kp, km));
        }
        let denom = 1.0 - km - kp;
        if denom <= MIN_DENOM {
            return Err(Error::ContaminationTooLarge(kp + km));
        }
        Ok(CorrectedLoss { base, kappa_plus: kp, kappa_minus: km, denom })
    }

    pub fn base(&self) -> Loss {
        self.base
    }

    pub fn kappa(&self) -> (f64, f64) {
        (self.kappa_plus, self.kappa_minus)
    }

    /// `1 - k- - k+`, always positive by construction.
    pub fn denom(&self) -> f64 {
        self.denom
    }

    fn kappa_opposite(&self, sigma: Sign) -> f64 {
        match sigma {
            Sign::Plus => self.kappa_minus,
            Sign::Minus => self.kappa_plus,
        }
    }

    /// `l^k_sigma(t)`.
    pub fn evaluate(&self, t: f64, sigma: Sign) -> f64 {
        let ko = self.kappa_opposite(sigma);
        ((1.0 - ko) * self.base.evaluate(t, sigma) - ko * self.base.evaluate(t, sigma.flip()))
            / self.denom
    }

    /// `(l^k_sigma)'(t)`.
    pub fn derivative(&self, t: f64, sigma: Sign) -> Result<f64> {
        let ko = self.kappa_opposite(sigma);
        Ok(((1.0 - ko) * self.base.derivative(t, sigma)?
            - ko * self.base.derivative(t, sigma.flip())?)
            / self.denom)
    }

    /// Upper bound `|l| / (1 - k- - k+)` on the Lipschitz constant.
    pub fn lipschitz(&self) -> Option<f64> {
        self.base.lipschitz().map(|l| l / self.denom)
    }
}

/// Which argument decided a convexity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvexityPath {
    /// Certified by the sufficient condition `k^sigma < 1/2` for losses
    /// with symmetric second derivatives.
    Analytic,
    /// Decided by second differences on a margin grid.
    Numeric,
}

#[derive(Debug, Clone, Copy)]
pub struct ConvexityReport {
    pub convex: bool,
    pub path: ConvexityPath,
}

const CONVEXITY_GRID_HALF_WIDTH: f64 = 10.0;
const CONVEXITY_GRID_STEP: f64 = 0.01;
const CONVEXITY_TOL: f64 = 1e-8;

/// Checks whether `l^k` is convex in the margin for both classes.
///
/// When the base loss is convex with `l+'' = l-''` and both contamination
/// proportions are below 1/2, convexity is certified analytically.
/// Otherwise second differences of both `l^k_sigma` are examined on the
/// grid `t in [-10, 10]` with step 0.01, tolerance 1e-8.
pub fn check_convexity(corrected: &CorrectedLoss) -> ConvexityReport {
    let (kp, km) = corrected.kappa();
    if corrected.base.second_order_symmetric_convex() && kp < 0.5 && km < 0.5 {
        return ConvexityReport { convex: true, path: ConvexityPath::Analytic };
    }
    ConvexityReport { convex: numeric_convexity(corrected), path: ConvexityPath::Numeric }
}

fn numeric_convexity(corrected: &CorrectedLoss) -> bool {
    let h = CONVEXITY_GRID_STEP;
    let steps = (2.0 * CONVEXITY_GRID_HALF_WIDTH / h) as i64;
    for sigma in [Sign::Plus, Sign::Minus] {
        for i in 1..steps {
            let t = -CONVEXITY_GRID_HALF_WIDTH + i as f64 * h;
            let second_diff = corrected.evaluate(t - h, sigma) - 2.0 * corrected.evaluate(t, sigma)
                + corrected.evaluate(t + h, sigma);
            if second_diff < -CONVEXITY_TOL {
                return false;
            }
        }
    }
    true
}

/// Both sides of the symmetric-loss shift identity
///
/// ```text
/// E^l_{P^k}(f) = (1 - k+ - k-) E^l_P(f) + K (k+ + k-) / 2
/// ```
///
/// evaluated on the finite empirical measures given by `points`: pairs of
/// a margin value `f(x)` and the true class of `x`. Both classes must be
/// present. Callers assert the two returned values are equal.
pub fn symmetric_shift_identity(
    loss: Loss,
    kappa: (f64, f64),
    points: &[(f64, Sign)],
) -> Result<(f64, f64)> {
    let shift = loss.symmetric_shift().ok_or(Error::NotSymmetric(loss.name()))?;
    let (kp, km) = kappa;
    if kp < 0.0 || km < 0.0 {
        return Err(Error::NegativeKappa(kp, km));
    }
    if 1.0 - kp - km <= 0.0 {
        return Err(Error::ContaminationTooLarge(kp + km));
    }

    let mean_on = |class: Sign, eval_sigma: Sign| -> Result<f64> {
        let values: Vec<f64> = points
            .iter()
            .filter(|(_, c)| *c == class)
            .map(|(t, _)| loss.evaluate(*t, eval_sigma))
            .collect();
        if values.is_empty() {
            return Err(Error::EmptyInput(match class {
                Sign::Plus => "positive-class margins",
                Sign::Minus => "negative-class margins",
            }));
        }
        Ok(values.iter().sum::<f64>() / values.len() as f64)
    };

    // E_{X ~ P_c}[l_s(f(X))] for each (evaluation sign s, true class c)
    let pp = mean_on(Sign::Plus, Sign::Plus)?;
    let pm = mean_on(Sign::Minus, Sign::Plus)?;
    let mm = mean_on(Sign::Minus, Sign::Minus)?;
    let mp = mean_on(Sign::Plus, Sign::Minus)?;

    let clean = 0.5 * pp + 0.5 * mm;
    let lhs = 0.5 * ((1.0 - kp) * pp + kp * pm) + 0.5 * ((1.0 - km) * mm + km * mp);
    let rhs = (1.0 - kp - km) * clean + shift * (kp + km) / 2.0;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn evaluate_known_points() {
        assert!((Loss::Logistic.evaluate(0.0, Sign::Plus) - LN2).abs() < 1e-15);
        assert!((Loss::Sigmoid.evaluate(0.0, Sign::Minus) - 0.5).abs() < 1e-15);
        // direct evaluation of the closed form ln(1 + e^{-2})
        let expected = (-2.0f64).exp().ln_1p();
        assert!((Loss::Logistic.evaluate(2.0, Sign::Plus) - expected).abs() < 1e-15);
        assert!((expected - 0.126928).abs() < 1e-6);
    }

    #[test]
    fn loss_metadata_constants() {
        assert_eq!(Loss::Logistic.lipschitz(), Some(1.0));
        assert!((Loss::Logistic.at_zero_magnitude() - LN2).abs() < 1e-15);
        assert_eq!(Loss::Logistic.symmetric_shift(), None);
        assert_eq!(Loss::Sigmoid.symmetric_shift(), Some(1.0));
        assert_eq!(Loss::Sigmoid.lipschitz(), Some(0.25));
        assert_eq!(Loss::Ramp.symmetric_shift(), Some(1.0));
        assert_eq!(Loss::Squared.lipschitz(), None);
        assert_eq!(Loss::ZeroOne.at_zero_magnitude(), 1.0);
    }

    #[test]
    fn evaluate_is_finite_far_out() {
        for loss in [Loss::Logistic, Loss::Sigmoid, Loss::Ramp, Loss::Squared, Loss::ZeroOne] {
            for t in [-1e8, -50.0, 0.0, 50.0, 1e8] {
                assert!(loss.evaluate(t, Sign::Plus).is_finite(), "{} at {t}", loss.name());
                assert!(loss.evaluate(t, Sign::Minus).is_finite());
            }
        }
    }

    #[test]
    fn zero_kappa_reproduces_base_loss() {
        let corr = CorrectedLoss::new(Loss::Logistic, (0.0, 0.0)).unwrap();
        let mut t = -8.0;
        while t <= 8.0 {
            for sigma in [Sign::Plus, Sign::Minus] {
                assert_eq!(corr.evaluate(t, sigma), Loss::Logistic.evaluate(t, sigma));
            }
            t += 0.125;
        }
    }

    #[test]
    fn corrected_logistic_at_zero() {
        // (0.7 ln2 - 0.3 ln2) / 0.5 = 0.8 ln2
        let corr = CorrectedLoss::new(Loss::Logistic, (0.2, 0.3)).unwrap();
        let got = corr.evaluate(0.0, Sign::Plus);
        assert!((got - 0.8 * LN2).abs() < 1e-12);
        assert!((got - 0.554518).abs() < 1e-6);
    }

    #[test]
    fn corrected_coefficients() {
        // l^k_+ = 1.4 l_+ - 0.6 l_- for kappa = (0.2, 0.3)
        let corr = CorrectedLoss::new(Loss::Logistic, (0.2, 0.3)).unwrap();
        let mut t = -4.0;
        while t <= 4.0 {
            let expected = 1.4 * Loss::Logistic.evaluate(t, Sign::Plus)
                - 0.6 * Loss::Logistic.evaluate(t, Sign::Minus);
            assert!((corr.evaluate(t, Sign::Plus) - expected).abs() < 1e-12);
            t += 0.25;
        }
    }

    #[test]
    fn rejects_bad_kappa() {
        assert!(matches!(
            CorrectedLoss::new(Loss::Logistic, (0.6, 0.4)),
            Err(Error::ContaminationTooLarge(_))
        ));
        assert!(matches!(
            CorrectedLoss::new(Loss::Logistic, (0.5, 0.4999999)),
            Err(Error::ContaminationTooLarge(_))
        ));
        assert!(matches!(
            CorrectedLoss::new(Loss::Logistic, (-0.1, 0.2)),
            Err(Error::NegativeKappa(..))
        ));
    }

    #[test]
    fn convexity_examples() {
        let report =
            check_convexity(&CorrectedLoss::new(Loss::Logistic, (0.3, 0.2)).unwrap());
        assert!(report.convex);
        assert_eq!(report.path, ConvexityPath::Analytic);

        let report = check_convexity(&CorrectedLoss::new(Loss::Logistic, (0.0, 0.0)).unwrap());
        assert!(report.convex);

        // k+ = 0.6 >= 1/2 flips the sign of one second derivative; the
        // numeric grid finds a negative second difference inside [-3, 3].
        let corr = CorrectedLoss::new(Loss::Logistic, (0.6, 0.3)).unwrap();
        let report = check_convexity(&corr);
        assert!(!report.convex);
        assert_eq!(report.path, ConvexityPath::Numeric);
        let h = 0.01;
        let mut found_negative = false;
        let mut t = -3.0;
        while t <= 3.0 {
            for sigma in [Sign::Plus, Sign::Minus] {
                let dd = corr.evaluate(t - h, sigma) - 2.0 * corr.evaluate(t, sigma)
                    + corr.evaluate(t + h, sigma);
                if dd < -1e-8 {
                    found_negative = true;
                }
            }
            t += h;
        }
        assert!(found_negative);
    }

    #[test]
    fn analytic_agrees_with_numeric_below_half() {
        let mut rng = crate::seed::rng(42);
        for _ in 0..100 {
            let kp = rng.gen_range(0.0..0.5);
            let km = rng.gen_range(0.0..0.5f64.min(0.999 - kp));
            for base in [Loss::Logistic, Loss::Squared] {
                let corr = CorrectedLoss::new(base, (kp, km)).unwrap();
                let report = check_convexity(&corr);
                assert!(report.convex);
                assert_eq!(report.path, ConvexityPath::Analytic);
                assert!(numeric_convexity(&corr), "numeric disagrees at ({kp}, {km})");
            }
        }
    }

    #[test]
    fn lipschitz_bound_on_sampled_slopes() {
        let mut rng = crate::seed::rng(7);
        for _ in 0..50 {
            let kp = rng.gen_range(0.0..0.6);
            let km = rng.gen_range(0.0..(0.95 - kp));
            for base in [Loss::Logistic, Loss::Sigmoid, Loss::Ramp] {
                let corr = CorrectedLoss::new(base, (kp, km)).unwrap();
                let bound = corr.lipschitz().unwrap();
                for _ in 0..40 {
                    let t1: f64 = rng.gen_range(-6.0..6.0);
                    let t2: f64 = rng.gen_range(-6.0..6.0);
                    if (t1 - t2).abs() < 1e-9 {
                        continue;
                    }
                    for sigma in [Sign::Plus, Sign::Minus] {
                        let slope = (corr.evaluate(t1, sigma) - corr.evaluate(t2, sigma)).abs()
                            / (t1 - t2).abs();
                        assert!(slope <= bound + 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn shift_identity_examples() {
        // kappa = 0: both sides are the clean risk
        let points = [(0.3, Sign::Plus), (-1.2, Sign::Minus), (0.7, Sign::Plus)];
        let (lhs, rhs) = symmetric_shift_identity(Loss::Sigmoid, (0.0, 0.0), &points).unwrap();
        assert!((lhs - rhs).abs() < 1e-15);

        // single point t = 0 in both classes, K = 1
        let points = [(0.0, Sign::Plus), (0.0, Sign::Minus)];
        let (lhs, rhs) = symmetric_shift_identity(Loss::Sigmoid, (0.25, 0.25), &points).unwrap();
        assert!((lhs - 0.5).abs() < 1e-15);
        assert!((rhs - (0.5 * 0.5 + 1.0 * 0.25)).abs() < 1e-15);

        assert!(matches!(
            symmetric_shift_identity(Loss::Logistic, (0.1, 0.1), &points),
            Err(Error::NotSymmetric("logistic"))
        ));
    }

    #[test]
    fn shift_identity_holds_for_random_configs() {
        let mut rng = crate::seed::rng(11);
        for loss in [Loss::Sigmoid, Loss::Ramp, Loss::ZeroOne] {
            for _ in 0..50 {
                let kp = rng.gen_range(0.0..0.7);
                let km = rng.gen_range(0.0..(0.99 - kp));
                let n_pos = rng.gen_range(1..6);
                let n_neg = rng.gen_range(1..6);
                let mut points = Vec::new();
                for _ in 0..n_pos {
                    points.push((rng.gen_range(-3.0..3.0), Sign::Plus));
                }
                for _ in 0..n_neg {
                    points.push((rng.gen_range(-3.0..3.0), Sign::Minus));
                }
                let (lhs, rhs) = symmetric_shift_identity(loss, (kp, km), &points).unwrap();
                assert!((lhs - rhs).abs() < 1e-12, "{}: {lhs} vs {rhs}", loss.name());
            }
        }
    }

    fn simplex(raw: &[f64]) -> Vec<f64> {
        let total: f64 = raw.iter().sum();
        raw.iter().map(|v| v / total).collect()
    }

    // Exact unbiasedness on finite discrete models: the mixture expectation
    // of the corrected loss equals the clean balanced risk. The oracle
    // enumerates the contaminated mixtures explicitly.
    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(200))]
        #[test]
        fn corrected_loss_is_unbiased_on_discrete_models(
            kp in 0.0..0.8f64,
            km_frac in 0.0..1.0f64,
            support in proptest::collection::vec(-4.0..4.0f64, 2..6),
            raw_pos in proptest::collection::vec(0.05..1.0f64, 6),
            raw_neg in proptest::collection::vec(0.05..1.0f64, 6),
        ) {
            let km = km_frac * (0.9 - kp);
            let corr = CorrectedLoss::new(Loss::Logistic, (kp, km)).unwrap();
            let probs_pos = simplex(&raw_pos[..support.len()]);
            let probs_neg = simplex(&raw_neg[..support.len()]);

            // clean balanced risk under the base loss
            let clean: f64 = support
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    0.5 * probs_pos[i] * Loss::Logistic.evaluate(t, Sign::Plus)
                        + 0.5 * probs_neg[i] * Loss::Logistic.evaluate(t, Sign::Minus)
                })
                .sum();

            // corrected risk under the explicit contaminated mixtures
            let contaminated: f64 = support
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let p_plus_kappa = (1.0 - kp) * probs_pos[i] + kp * probs_neg[i];
                    let p_minus_kappa = (1.0 - km) * probs_neg[i] + km * probs_pos[i];
                    0.5 * p_plus_kappa * corr.evaluate(t, Sign::Plus)
                        + 0.5 * p_minus_kappa * corr.evaluate(t, Sign::Minus)
                })
                .sum();

            proptest::prop_assert!((clean - contaminated).abs() < 1e-12);
        }
    }
}
