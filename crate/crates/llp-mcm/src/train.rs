//! The plug-in training pipeline.
//!
//! Bags are paired (or merged into big bags), each pair's observed
//! proportions plug into the corrected loss as `kappa = (1 - lp+, lp-)`,
//! pairs receive bound-optimal weights, and the weighted corrected risk
//! plus a ridge penalty is minimized over a Gaussian-kernel expansion by
//! L-BFGS. The ridge coefficient comes from bag-level cross validation
//! over a small grid, scored by the unbiased weighted risk on held-out
//! pairs.
//!
//! [`consistency_sweep`] runs the merged pipeline across a growing
//! schedule of bag counts with `K` and `lambda` tied to the schedule, and
//! reports the test BER at each point.

use rand::seq::SliceRandom;

use crate::bags::{sample_bag_ciim, sample_lps, Bag, ClassConditionals, LpDistribution};
use crate::eval::{ber, LabeledTestSet};
use crate::loss::{CorrectedLoss, Loss, Sign};
use crate::model::{default_bandwidth, kernel_matrix, DecisionFunction, GramMatrix, KernelConfig};
use crate::pairing::{
    merge_bm, merge_bp, optimal_weights, pair_optimal, pair_sorted, BagPair, MergedPair, Paired,
    WeightMode, GAP_FLOOR,
};
use crate::{seed, Error, Result};

/// How bags are matched into pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairingStrategy {
    Sorted,
    Optimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MergeScheme {
    Bp,
    Bm,
}

impl MergeScheme {
    pub fn parse(s: &str) -> Result<MergeScheme> {
        match s {
            "bp" => Ok(MergeScheme::Bp),
            "bm" => Ok(MergeScheme::Bm),
            other => Err(Error::InvalidParameter(format!("unknown merge scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MergeConfig {
    pub scheme: MergeScheme,
    pub k: usize,
}

/// Training configuration. The defaults reproduce the experiment
/// protocol: logistic loss, lambda grid `{1, 1e-1, ..., 1e-5}`, 5-fold
/// cross validation, squared-gap weights.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub loss: Loss,
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub history: usize,
    pub seed: u64,
    pub weight_mode: WeightMode,
    pub pairing: PairingStrategy,
    pub merge: Option<MergeConfig>,
    /// Kernel bandwidth; `None` applies the `1/(d Var(X))` heuristic.
    pub bandwidth: Option<f64>,
    /// Used when cross validation is infeasible (fewer than two usable
    /// pairs) or every fold is degenerate.
    pub fallback_lambda: f64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            loss: Loss::Logistic,
            lambda_grid: vec![1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            folds: 5,
            grad_tol: 1e-6,
            max_iters: 500,
            history: 10,
            seed: 0,
            weight_mode: WeightMode::Bag,
            pairing: PairingStrategy::Optimal,
            merge: None,
            bandwidth: None,
            // the most conservative grid value: with no validation data to
            // vet it, a small lambda lets the corrected loss's negative
            // branch drive the margins arbitrarily far out
            fallback_lambda: 1.0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|&l| l <= 0.0) {
            return Err(Error::InvalidParameter("lambda grid must be positive".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidParameter("folds must be at least 2".into()));
        }
        if self.fallback_lambda <= 0.0 {
            return Err(Error::InvalidParameter("fallback lambda must be positive".into()));
        }
        Ok(())
    }
}

/// One pair's slice of the weighted objective: instance indices per side,
/// the plug-in corrected loss, and the pair weight.
#[derive(Debug, Clone)]
pub struct PairGroup {
    pub pos: Vec<usize>,
    pub neg: Vec<usize>,
    pub corrected: CorrectedLoss,
    pub weight: f64,
}

/// The regularized weighted empirical risk over a fixed training set.
#[derive(Debug)]
pub struct Objective {
    pub gram: GramMatrix,
    pub groups: Vec<PairGroup>,
    pub lambda: f64,
}

impl Objective {
    pub fn new(gram: GramMatrix, groups: Vec<PairGroup>, lambda: f64) -> Result<Objective> {
        if lambda < 0.0 {
            return Err(Error::InvalidParameter(format!("lambda must be nonnegative, got {lambda}")));
        }
        let total: f64 = groups.iter().map(|g| g.weight).sum();
        if groups.is_empty() || (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "group weights sum to {total}, expected 1"
            )));
        }
        let n = gram.n();
        for g in &groups {
            if g.pos.is_empty() || g.neg.is_empty() {
                return Err(Error::EmptyInput("pair group side"));
            }
            if g.pos.iter().chain(&g.neg).any(|&i| i >= n) {
                return Err(Error::DimensionMismatch { expected: n, got: n + 1 });
            }
        }
        Ok(Objective { gram, groups, lambda })
    }

    pub fn n(&self) -> usize {
        self.gram.n()
    }

    /// The weighted corrected risk of given function values (no ridge):
    /// `sum_i w_i [ (1/2n_i+) sum_j l^k_+(f_j) + (1/2n_i-) sum_j l^k_-(f_j) ]`.
    pub fn data_risk(&self, f_values: &[f64]) -> f64 {
        let mut total = 0.0;
        for g in &self.groups {
            let pos: f64 =
                g.pos.iter().map(|&j| g.corrected.evaluate(f_values[j], Sign::Plus)).sum();
            let neg: f64 =
                g.neg.iter().map(|&j| g.corrected.evaluate(f_values[j], Sign::Minus)).sum();
            total += g.weight
                * (pos / (2.0 * g.pos.len() as f64) + neg / (2.0 * g.neg.len() as f64));
        }
        total
    }

    /// Objective value `data_risk(K alpha) + lambda alpha' K alpha`.
    pub fn value(&self, alpha: &[f64]) -> f64 {
        let f = self.gram.matvec(alpha);
        self.value_from(alpha, &f)
    }

    fn value_from(&self, alpha: &[f64], f_values: &[f64]) -> f64 {
        let ridge: f64 = alpha.iter().zip(f_values).map(|(a, f)| a * f).sum();
        self.data_risk(f_values) + self.lambda * ridge
    }

    /// Analytic gradient `K g + 2 lambda K alpha` where `g` holds the
    /// per-instance corrected-loss derivatives.
    pub fn gradient(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        let f = self.gram.matvec(alpha);
        self.gradient_from(&f)
    }

    fn gradient_from(&self, f_values: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.n()];
        for group in &self.groups {
            let scale_pos = group.weight / (2.0 * group.pos.len() as f64);
            for &j in &group.pos {
                g[j] += scale_pos * group.corrected.derivative(f_values[j], Sign::Plus)?;
            }
            let scale_neg = group.weight / (2.0 * group.neg.len() as f64);
            for &j in &group.neg {
                g[j] += scale_neg * group.corrected.derivative(f_values[j], Sign::Minus)?;
            }
        }
        let mut grad = self.gram.matvec(&g);
        for (gi, fi) in grad.iter_mut().zip(f_values) {
            *gi += 2.0 * self.lambda * fi;
        }
        Ok(grad)
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerResult {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_inf_norm: f64,
    /// Objective value at the start and after every accepted step.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Limited-memory quasi-Newton descent from `alpha = 0` with Armijo
/// backtracking. Returns the best iterate with a convergence flag; the
/// returned objective never exceeds the value at zero.
pub fn minimize(
    obj: &Objective,
    grad_tol: f64,
    max_iters: usize,
    history: usize,
) -> Result<OptimizerResult> {
    const ARMIJO_C1: f64 = 1e-4;
    const BACKTRACK: f64 = 0.5;
    const MAX_BACKTRACKS: usize = 50;

    let n = obj.n();
    let mut x = vec![0.0; n];
    let f0 = obj.gram.matvec(&x);
    let mut value = obj.value_from(&x, &f0);
    let mut grad = obj.gradient_from(&f0)?;
    let mut trace = vec![value];

    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();

    for _ in 0..max_iters {
        if inf_norm(&grad) <= grad_tol {
            break;
        }

        let mut direction = two_loop_direction(&grad, &s_hist, &y_hist);
        let mut slope = dot(&direction, &grad);
        if slope >= 0.0 {
            s_hist.clear();
            y_hist.clear();
            direction = grad.iter().map(|g| -g).collect();
            slope = dot(&direction, &grad);
        }

        let mut step = if s_hist.is_empty() {
            1.0 / inf_norm(&grad).max(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let candidate: Vec<f64> =
                x.iter().zip(&direction).map(|(xi, di)| xi + step * di).collect();
            let cand_f = obj.gram.matvec(&candidate);
            let cand_value = obj.value_from(&candidate, &cand_f);
            if cand_value <= value + ARMIJO_C1 * step * slope {
                accepted = Some((candidate, cand_f, cand_value));
                break;
            }
            step *= BACKTRACK;
        }

        let Some((new_x, new_f, new_value)) = accepted else {
            if s_hist.is_empty() {
                // steepest descent cannot make progress: stop here
                break;
            }
            s_hist.clear();
            y_hist.clear();
            continue;
        };

        let new_grad = obj.gradient_from(&new_f)?;
        let s: Vec<f64> = new_x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-12 {
            if s_hist.len() == history {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }

        x = new_x;
        value = new_value;
        grad = new_grad;
        trace.push(value);
    }

    let grad_inf_norm = inf_norm(&grad);
    Ok(OptimizerResult {
        objective: value,
        alpha: x,
        iterations: trace.len() - 1,
        converged: grad_inf_norm <= grad_tol,
        grad_inf_norm,
        trace,
    })
}

fn two_loop_direction(grad: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>]) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let m = s_hist.len();
    let mut alphas = vec![0.0; m];
    let mut rhos = vec![0.0; m];
    for i in (0..m).rev() {
        rhos[i] = 1.0 / dot(&y_hist[i], &s_hist[i]);
        alphas[i] = rhos[i] * dot(&s_hist[i], &q);
        for (qj, yj) in q.iter_mut().zip(&y_hist[i]) {
            *qj -= alphas[i] * yj;
        }
    }
    if m > 0 {
        let last = m - 1;
        let gamma = dot(&s_hist[last], &y_hist[last]) / dot(&y_hist[last], &y_hist[last]);
        for qj in q.iter_mut() {
            *qj *= gamma;
        }
    }
    for i in 0..m {
        let beta = rhos[i] * dot(&y_hist[i], &q);
        for (qj, sj) in q.iter_mut().zip(&s_hist[i]) {
            *qj += (alphas[i] - beta) * sj;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// A pair reduced to what the objective needs: which bags sit on each
/// side, plus contamination and weight.
#[derive(Debug, Clone)]
struct GroupSpec {
    pos_bags: Vec<usize>,
    neg_bags: Vec<usize>,
    kappa: (f64, f64),
    weight: f64,
    gap: f64,
}

fn specs_from_pairs(pairs: &[BagPair], weights: &[f64]) -> Vec<GroupSpec> {
    pairs
        .iter()
        .zip(weights)
        .map(|(p, &w)| GroupSpec {
            pos_bags: vec![p.plus_idx],
            neg_bags: vec![p.minus_idx],
            kappa: p.kappa(),
            weight: w,
            gap: p.gap(),
        })
        .collect()
}

fn specs_from_merged(merged: &[MergedPair], weights: &[f64]) -> Vec<GroupSpec> {
    merged
        .iter()
        .zip(weights)
        .map(|(p, &w)| GroupSpec {
            pos_bags: p.pos_indices.clone(),
            neg_bags: p.neg_indices.clone(),
            kappa: p.kappa(),
            weight: w,
            gap: p.gap(),
        })
        .collect()
}

/// Flattens the instances of the usable (positive-weight) groups and
/// renormalizes their weights. Returns the instance pool and per-group
/// index lists with plug-in corrected losses.
fn build_training(
    bags: &[Bag],
    specs: &[GroupSpec],
    loss: Loss,
) -> Result<(Vec<Vec<f64>>, Vec<PairGroup>)> {
    let usable: Vec<&GroupSpec> =
        specs.iter().filter(|s| s.weight > 0.0 && s.gap > crate::loss::MIN_DENOM).collect();
    if usable.is_empty() {
        return Err(Error::DegeneratePairs { floor: GAP_FLOOR });
    }
    let total_weight: f64 = usable.iter().map(|s| s.weight).sum();

    let mut instances = Vec::new();
    let mut groups = Vec::with_capacity(usable.len());
    for spec in usable {
        let mut collect = |bag_ids: &[usize]| -> Vec<usize> {
            let mut idx = Vec::new();
            for &b in bag_ids {
                for x in bags[b].instances() {
                    idx.push(instances.len());
                    instances.push(x.clone());
                }
            }
            idx
        };
        let pos = collect(&spec.pos_bags);
        let neg = collect(&spec.neg_bags);
        groups.push(PairGroup {
            pos,
            neg,
            corrected: CorrectedLoss::new(loss, spec.kappa)?,
            weight: spec.weight / total_weight,
        });
    }
    Ok((instances, groups))
}

fn fit(
    instances: &[Vec<f64>],
    groups: Vec<PairGroup>,
    bandwidth: f64,
    lambda: f64,
    config: &TrainConfig,
) -> Result<(DecisionFunction, OptimizerResult)> {
    let cfg = KernelConfig::new(bandwidth)?;
    let gram = kernel_matrix(instances, cfg)?;
    let objective = Objective::new(gram, groups, lambda)?;
    let result = minimize(&objective, config.grad_tol, config.max_iters, config.history)?;
    let model = DecisionFunction::new(cfg, instances, result.alpha.clone())?;
    Ok((model, result))
}

/// Unbiased weighted corrected risk of `model` on held-out groups,
/// scored with the same base loss the model was trained on.
fn validation_risk(
    model: &DecisionFunction,
    bags: &[Bag],
    specs: &[GroupSpec],
    loss: Loss,
) -> Result<f64> {
    let total_weight: f64 = specs.iter().map(|s| s.weight).sum();
    let mut risk = 0.0;
    for spec in specs {
        let corrected = CorrectedLoss::new(loss, spec.kappa)?;
        let side = |bag_ids: &[usize], sigma: Sign| -> Result<f64> {
            let mut total = 0.0;
            let mut count = 0usize;
            for &b in bag_ids {
                for x in bags[b].instances() {
                    total += corrected.evaluate(model.evaluate(x)?, sigma);
                    count += 1;
                }
            }
            Ok(total / (2.0 * count as f64))
        };
        risk += spec.weight / total_weight
            * (side(&spec.pos_bags, Sign::Plus)? + side(&spec.neg_bags, Sign::Minus)?);
    }
    Ok(risk)
}

/// Per-lambda cross-validation scores. `fold_scores[l][f]` is `None` when
/// fold `f` was skipped as degenerate.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CvReport {
    pub lambdas: Vec<f64>,
    pub fold_scores: Vec<Vec<Option<f64>>>,
    pub mean_scores: Vec<f64>,
    pub folds_used: usize,
    pub best_lambda: f64,
}

fn cv_over_specs(
    bags: &[Bag],
    specs: &[GroupSpec],
    bandwidth: f64,
    config: &TrainConfig,
) -> Result<CvReport> {
    let usable: Vec<usize> = (0..specs.len())
        .filter(|&i| specs[i].weight > 0.0 && specs[i].gap > crate::loss::MIN_DENOM)
        .collect();
    let folds = config.folds.min(usable.len());
    if folds < 2 {
        return Err(Error::DegenerateFolds);
    }

    // deterministic fold assignment over pairs; bags stay whole
    let mut order = usable.clone();
    let mut rng = seed::rng(seed::derive_seed(config.seed, "cv-folds"));
    order.shuffle(&mut rng);
    let fold_of: Vec<usize> = {
        let mut assignment = vec![0usize; specs.len()];
        for (pos, &spec_idx) in order.iter().enumerate() {
            assignment[spec_idx] = pos % folds;
        }
        assignment
    };

    let mut lambdas = config.lambda_grid.clone();
    lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut fold_scores: Vec<Vec<Option<f64>>> = vec![Vec::new(); lambdas.len()];
    let mut folds_used = 0;

    for fold in 0..folds {
        let train_specs: Vec<GroupSpec> = usable
            .iter()
            .filter(|&&i| fold_of[i] != fold)
            .map(|&i| specs[i].clone())
            .collect();
        let val_specs: Vec<GroupSpec> = usable
            .iter()
            .filter(|&&i| fold_of[i] == fold)
            .map(|&i| specs[i].clone())
            .collect();
        // a fold is degenerate when either side of the split is unusable
        if train_specs.is_empty() || val_specs.is_empty() {
            for scores in fold_scores.iter_mut() {
                scores.push(None);
            }
            continue;
        }
        let built = build_training(bags, &train_specs, config.loss);
        let Ok((instances, groups)) = built else {
            for scores in fold_scores.iter_mut() {
                scores.push(None);
            }
            continue;
        };
        folds_used += 1;
        for (li, &lambda) in lambdas.iter().enumerate() {
            let (model, _) = fit(&instances, groups.clone(), bandwidth, lambda, config)?;
            fold_scores[li].push(Some(validation_risk(&model, bags, &val_specs, config.loss)?));
        }
    }

    if folds_used == 0 {
        return Err(Error::DegenerateFolds);
    }

    let mean_scores: Vec<f64> = fold_scores
        .iter()
        .map(|scores| {
            let used: Vec<f64> = scores.iter().flatten().copied().collect();
            used.iter().sum::<f64>() / used.len() as f64
        })
        .collect();
    // ties resolve to the smallest lambda because the grid is ascending
    let best = mean_scores
        .iter()
        .enumerate()
        .fold((0usize, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    Ok(CvReport {
        best_lambda: lambdas[best.0],
        lambdas,
        fold_scores,
        mean_scores,
        folds_used,
    })
}

fn make_specs(bags: &[Bag], config: &TrainConfig) -> Result<Vec<GroupSpec>> {
    if let Some(merge) = &config.merge {
        let merged = match merge.scheme {
            MergeScheme::Bp => merge_bp(bags, merge.k)?,
            MergeScheme::Bm => merge_bm(bags, merge.k)?,
        };
        let weights = optimal_weights(&merged, config.weight_mode)?;
        Ok(specs_from_merged(&merged, &weights))
    } else {
        let pairs = match config.pairing {
            PairingStrategy::Sorted => pair_sorted(bags)?,
            PairingStrategy::Optimal => pair_optimal(bags)?,
        };
        let weights = optimal_weights(&pairs, config.weight_mode)?;
        Ok(specs_from_pairs(&pairs, &weights))
    }
}

/// Cross-validates the lambda grid on bag-level folds. The criterion is
/// the unbiased weighted risk on held-out pairs with their own plug-in
/// contamination and weights; degenerate folds are skipped.
pub fn cross_validate(bags: &[Bag], config: &TrainConfig) -> Result<CvReport> {
    config.validate()?;
    let specs = make_specs(bags, config)?;
    let bandwidth = resolve_bandwidth(bags, config)?;
    cv_over_specs(bags, &specs, bandwidth, config)
}

fn resolve_bandwidth(bags: &[Bag], config: &TrainConfig) -> Result<f64> {
    match config.bandwidth {
        Some(bw) => {
            KernelConfig::new(bw)?;
            Ok(bw)
        }
        None => {
            let all: Vec<Vec<f64>> =
                bags.iter().flat_map(|b| b.instances().iter().cloned()).collect();
            default_bandwidth(&all)
        }
    }
}

/// Training run report written next to the model file.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunReport {
    pub chosen_lambda: f64,
    pub lambda_from_cv: bool,
    pub cv: Option<CvReport>,
    pub bandwidth: f64,
    pub n_bags: usize,
    pub n_pairs: usize,
    pub n_pairs_excluded: usize,
    pub n_training_instances: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_objective: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: DecisionFunction,
    pub report: RunReport,
}

/// The full plug-in pipeline: (optional merge) -> pair -> plug-in
/// contamination -> weights -> cross-validated lambda -> final fit on all
/// usable pairs.
pub fn train_llp(bags: &[Bag], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if bags.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 bags".into()));
    }
    let specs = make_specs(bags, config)?;
    let bandwidth = resolve_bandwidth(bags, config)?;

    let usable = specs
        .iter()
        .filter(|s| s.weight > 0.0 && s.gap > crate::loss::MIN_DENOM)
        .count();
    let cv = if usable >= 2 && config.lambda_grid.len() > 1 {
        match cv_over_specs(bags, &specs, bandwidth, config) {
            Ok(report) => Some(report),
            Err(Error::DegenerateFolds) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let (chosen_lambda, lambda_from_cv) = match (&cv, config.lambda_grid.len()) {
        (Some(report), _) => (report.best_lambda, true),
        (None, 1) => (config.lambda_grid[0], false),
        (None, _) => (config.fallback_lambda, false),
    };

    let (instances, groups) = build_training(bags, &specs, config.loss)?;
    let n_training_instances = instances.len();
    let (model, result) = fit(&instances, groups, bandwidth, chosen_lambda, config)?;
    Ok(TrainOutcome {
        model,
        report: RunReport {
            chosen_lambda,
            lambda_from_cv,
            cv,
            bandwidth,
            n_bags: bags.len(),
            n_pairs: specs.len(),
            n_pairs_excluded: specs.len() - usable,
            n_training_instances,
            iterations: result.iterations,
            converged: result.converged,
            final_objective: result.objective,
        },
    })
}

/// Synthetic problem for the consistency sweep.
#[derive(Debug, Clone)]
pub struct SweepProblem {
    pub cc: ClassConditionals,
    pub lp_dist: LpDistribution,
    pub bag_size: usize,
    pub test_per_class: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepRow {
    /// Scheduled number of small-bag pairs.
    pub n_pairs: usize,
    pub k: usize,
    /// Merged pairs actually trained on (`floor(n_pairs / k)`).
    pub merged_pairs: usize,
    pub lambda: f64,
    pub test_ber: f64,
}

/// Trains the merged pipeline at each scheduled pair count `N` with
/// `K = ceil(sqrt(N))` and `lambda = lambda_coeff / sqrt(N / K)`, a
/// schedule under which `K` and `N/K` both grow while
/// `lambda (N/K) / log(N/K)` diverges. Fresh data per point; reports the
/// test BER per point.
pub fn consistency_sweep(
    problem: &SweepProblem,
    schedule: &[usize],
    lambda_coeff: f64,
    scheme: MergeScheme,
    seed_value: u64,
) -> Result<Vec<SweepRow>> {
    if lambda_coeff <= 0.0 {
        return Err(Error::InvalidParameter("lambda coefficient must be positive".into()));
    }
    let mut rows = Vec::with_capacity(schedule.len());
    for (point, &n_pairs) in schedule.iter().enumerate() {
        if n_pairs == 0 {
            return Err(Error::InvalidParameter("pair counts must be positive".into()));
        }
        let k = (n_pairs as f64).sqrt().ceil() as usize;
        let merged_pairs = (n_pairs / k).max(1);
        let n_bags = 2 * merged_pairs * k;
        let lambda = lambda_coeff / (merged_pairs as f64).sqrt();

        let stage = seed::derive_seed(seed_value, &format!("sweep-{point}"));
        let lps = sample_lps(&problem.lp_dist, n_bags, seed::derive_seed(stage, "lps"))?;
        let bags: Vec<Bag> = lps
            .iter()
            .enumerate()
            .map(|(i, &lp)| {
                sample_bag_ciim(
                    lp,
                    problem.bag_size,
                    &problem.cc,
                    seed::derive_seed(stage, &format!("bag-{i}")),
                )
            })
            .collect::<Result<_>>()?;

        let config = TrainConfig {
            lambda_grid: vec![lambda],
            merge: Some(MergeConfig { scheme, k }),
            seed: stage,
            ..TrainConfig::default()
        };
        let outcome = train_llp(&bags, &config)?;

        let test = sample_test_set(problem, seed::derive_seed(stage, "test"))?;
        rows.push(SweepRow {
            n_pairs,
            k,
            merged_pairs,
            lambda,
            test_ber: ber(&outcome.model, &test)?,
        });
    }
    Ok(rows)
}

/// Balanced labeled sample from the problem's class conditionals.
pub fn sample_test_set(problem: &SweepProblem, seed_value: u64) -> Result<LabeledTestSet> {
    let mut rng = seed::rng(seed_value);
    let mut instances = Vec::with_capacity(2 * problem.test_per_class);
    let mut labels = Vec::with_capacity(2 * problem.test_per_class);
    for sign in [Sign::Plus, Sign::Minus] {
        for _ in 0..problem.test_per_class {
            instances.push(problem.cc.sample(sign, &mut rng));
            labels.push(if sign == Sign::Plus { 1 } else { -1 });
        }
    }
    LabeledTestSet::new(instances, labels)
}
