//! Bag pairing, optimal pair weights, and K-merging schemes.
//!
//! Pairing two bags with observed proportions `lp+ >= lp-` produces a
//! mutual contamination model with `kappa = (1 - lp+, lp-)`, so the
//! corrected-loss denominator equals the proportion gap. The
//! generalization bound shrinks with `sum_i nbar_i * gap_i^2`, which makes
//! pairing a maximum-weight perfect matching problem with edge weight
//! `HM(n_i, n_j) * (lp_i - lp_j)^2`. Under equal bag sizes,
//! sort-and-pair-extremes solves it exactly.
//!
//! Merging combines blocks of `2K` small bags into one pair of big bags,
//! either pairwise within the block (BP) or by sending the `K` largest
//! proportions to the positive side (BM). BM dominates BP: every merged
//! gap is at least as large.

use crate::bags::Bag;
use crate::{Error, Result};

/// Pairs with a proportion gap below this floor get weight zero and are
/// excluded from training; their corrected loss has an unusable Lipschitz
/// constant.
pub const GAP_FLOOR: f64 = 1e-6;

/// Floating-point slack for gap comparisons between merge schemes.
const DOMINANCE_TOL: f64 = 1e-12;

/// Exact matching is affordable up to this many bags (subset DP).
const EXACT_MATCHING_LIMIT: usize = 16;

/// A pair of bags forming one mutual contamination model.
#[derive(Debug, Clone, PartialEq)]
pub struct BagPair {
    /// Index of the larger-proportion bag in the input slice.
    pub plus_idx: usize,
    /// Index of the smaller-proportion bag.
    pub minus_idx: usize,
    pub lp_plus: f64,
    pub lp_minus: f64,
    pub n_plus: usize,
    pub n_minus: usize,
}

impl BagPair {
    fn new(bags: &[Bag], a: usize, b: usize) -> BagPair {
        let (plus_idx, minus_idx) = if bags[a].lp_hat() >= bags[b].lp_hat() {
            (a, b)
        } else {
            (b, a)
        };
        BagPair {
            plus_idx,
            minus_idx,
            lp_plus: bags[plus_idx].lp_hat(),
            lp_minus: bags[minus_idx].lp_hat(),
            n_plus: bags[plus_idx].len(),
            n_minus: bags[minus_idx].len(),
        }
    }
}

/// A pair of merged big bags with averaged proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedPair {
    /// Original small-bag indices forming the positive big bag.
    pub pos_indices: Vec<usize>,
    /// Original small-bag indices forming the negative big bag.
    pub neg_indices: Vec<usize>,
    /// Mean observed proportion over the positive members.
    pub lp_plus: f64,
    pub lp_minus: f64,
    pub n_plus: usize,
    pub n_minus: usize,
}

/// Anything that behaves like a paired contamination model for the
/// purposes of weighting and bound evaluation.
pub trait Paired {
    /// Proportion gap, the corrected-loss denominator.
    fn gap(&self) -> f64;
    /// Harmonic mean of the two side sizes.
    fn nbar(&self) -> f64;
    /// `(kappa+, kappa-) = (1 - lp+, lp-)`.
    fn kappa(&self) -> (f64, f64);
}

impl Paired for BagPair {
    fn gap(&self) -> f64 {
        self.lp_plus - self.lp_minus
    }

    fn nbar(&self) -> f64 {
        harmonic_mean(&[self.n_plus as f64, self.n_minus as f64]).expect("positive bag sizes")
    }

    fn kappa(&self) -> (f64, f64) {
        (1.0 - self.lp_plus, self.lp_minus)
    }
}

impl Paired for MergedPair {
    fn gap(&self) -> f64 {
        self.lp_plus - self.lp_minus
    }

    fn nbar(&self) -> f64 {
        harmonic_mean(&[self.n_plus as f64, self.n_minus as f64]).expect("positive bag sizes")
    }

    fn kappa(&self) -> (f64, f64) {
        (1.0 - self.lp_plus, self.lp_minus)
    }
}

/// `HM(a_i) = (1/m sum a_i^-1)^-1`, never above the arithmetic mean.
pub fn harmonic_mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("harmonic mean values"));
    }
    let mut inv_sum = 0.0;
    for &v in values {
        if v <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "harmonic mean requires positive values, got {v}"
            )));
        }
        inv_sum += 1.0 / v;
    }
    Ok(values.len() as f64 / inv_sum)
}

fn edge_weight(bags: &[Bag], i: usize, j: usize) -> f64 {
    let hm = harmonic_mean(&[bags[i].len() as f64, bags[j].len() as f64]).unwrap();
    let d = bags[i].lp_hat() - bags[j].lp_hat();
    hm * d * d
}

/// Total matching objective `sum_i nbar_i * gap_i^2`.
pub fn matching_objective(pairs: &[BagPair]) -> f64 {
    pairs.iter().map(|p| p.nbar() * p.gap() * p.gap()).sum()
}

/// Pairs the largest proportion with the smallest, the second largest
/// with the second smallest, and so on. Optimal when all bags have equal
/// size; with unequal sizes it logs a warning and falls through to
/// [`pair_optimal`].
pub fn pair_sorted(bags: &[Bag]) -> Result<Vec<BagPair>> {
    if !bags.len().is_multiple_of(2) || bags.is_empty() {
        return Err(Error::OddBagCount(bags.len()));
    }
    if bags.iter().any(|b| b.len() != bags[0].len()) {
        log::warn!("pair_sorted requires equal bag sizes; using optimal matching instead");
        return pair_optimal(bags);
    }
    let mut order: Vec<usize> = (0..bags.len()).collect();
    order.sort_by(|&a, &b| {
        bags[b]
            .lp_hat()
            .partial_cmp(&bags[a].lp_hat())
            .unwrap()
            .then(a.cmp(&b))
    });
    let n = bags.len() / 2;
    Ok((0..n)
        .map(|r| BagPair::new(bags, order[r], order[bags.len() - 1 - r]))
        .collect())
}

/// Maximum-weight perfect matching on the squared-gap objective.
///
/// Exact subset dynamic program up to 16 bags; beyond that, sorted
/// pairing followed by 2-swap local search to a local optimum.
pub fn pair_optimal(bags: &[Bag]) -> Result<Vec<BagPair>> {
    if !bags.len().is_multiple_of(2) || bags.is_empty() {
        return Err(Error::OddBagCount(bags.len()));
    }
    if bags.len() <= EXACT_MATCHING_LIMIT {
        return Ok(exact_matching(bags));
    }

    let mut pairs = if bags.iter().all(|b| b.len() == bags[0].len()) {
        pair_sorted(bags)?
    } else {
        // arbitrary start; the local search does the work
        (0..bags.len() / 2)
            .map(|r| BagPair::new(bags, 2 * r, 2 * r + 1))
            .collect()
    };
    local_search(bags, &mut pairs);
    Ok(pairs)
}

fn exact_matching(bags: &[Bag]) -> Vec<BagPair> {
    let m = bags.len();
    let full: usize = (1 << m) - 1;
    let mut best = vec![f64::NEG_INFINITY; full + 1];
    let mut choice = vec![(0usize, 0usize); full + 1];
    best[0] = 0.0;
    for mask in 1..=full {
        if !(mask as u32).count_ones().is_multiple_of(2) {
            continue;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut j_bits = rest;
        while j_bits != 0 {
            let j = j_bits.trailing_zeros() as usize;
            j_bits &= j_bits - 1;
            let prev = best[rest & !(1 << j)];
            let cand = prev + edge_weight(bags, i, j);
            if cand > best[mask] {
                best[mask] = cand;
                choice[mask] = (i, j);
            }
        }
    }
    let mut pairs = Vec::with_capacity(m / 2);
    let mut mask = full;
    while mask != 0 {
        let (i, j) = choice[mask];
        pairs.push(BagPair::new(bags, i, j));
        mask &= !((1 << i) | (1 << j));
    }
    pairs
}

fn local_search(bags: &[Bag], pairs: &mut [BagPair]) {
    loop {
        let mut improved = false;
        for p in 0..pairs.len() {
            for q in (p + 1)..pairs.len() {
                let (a1, b1) = (pairs[p].plus_idx, pairs[p].minus_idx);
                let (a2, b2) = (pairs[q].plus_idx, pairs[q].minus_idx);
                let current = edge_weight(bags, a1, b1) + edge_weight(bags, a2, b2);
                let swap_a = edge_weight(bags, a1, a2) + edge_weight(bags, b1, b2);
                let swap_b = edge_weight(bags, a1, b2) + edge_weight(bags, a2, b1);
                if swap_a > current + 1e-12 && swap_a >= swap_b {
                    pairs[p] = BagPair::new(bags, a1, a2);
                    pairs[q] = BagPair::new(bags, b1, b2);
                    improved = true;
                } else if swap_b > current + 1e-12 {
                    pairs[p] = BagPair::new(bags, a1, b2);
                    pairs[q] = BagPair::new(bags, a2, b1);
                    improved = true;
                }
            }
        }
        if !improved {
            return;
        }
    }
}

/// Which bound the weights optimize: the instance model weights by
/// `nbar_i * gap_i^2`, the bag model by `gap_i^2` alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    Instance,
    Bag,
}

impl WeightMode {
    pub fn parse(s: &str) -> Result<WeightMode> {
        match s {
            "instance" => Ok(WeightMode::Instance),
            "bag" => Ok(WeightMode::Bag),
            other => Err(Error::InvalidParameter(format!("unknown weight mode `{other}`"))),
        }
    }
}

/// Bound-optimal weights on the probability simplex. Pairs with a gap
/// below [`GAP_FLOOR`] receive weight zero; errors if that leaves
/// nothing.
pub fn optimal_weights<P: Paired>(pairs: &[P], mode: WeightMode) -> Result<Vec<f64>> {
    let raw: Vec<f64> = pairs
        .iter()
        .map(|p| {
            let gap = p.gap();
            if gap < GAP_FLOOR {
                0.0
            } else {
                match mode {
                    WeightMode::Instance => p.nbar() * gap * gap,
                    WeightMode::Bag => gap * gap,
                }
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegeneratePairs { floor: GAP_FLOOR });
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

fn check_mergeable(bags: &[Bag], k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be positive".into()));
    }
    if bags.is_empty() || !bags.len().is_multiple_of(2 * k) {
        return Err(Error::BlockMismatch { count: bags.len(), block: 2 * k });
    }
    if bags.iter().any(|b| b.len() != bags[0].len()) {
        return Err(Error::InvalidParameter(
            "merging requires all small bags to have equal size".into(),
        ));
    }
    Ok(())
}

fn merged_pair(bags: &[Bag], pos: Vec<usize>, neg: Vec<usize>) -> MergedPair {
    let mean = |idx: &[usize]| idx.iter().map(|&i| bags[i].lp_hat()).sum::<f64>() / idx.len() as f64;
    let size = |idx: &[usize]| idx.iter().map(|&i| bags[i].len()).sum::<usize>();
    MergedPair {
        lp_plus: mean(&pos),
        lp_minus: mean(&neg),
        n_plus: size(&pos),
        n_minus: size(&neg),
        pos_indices: pos,
        neg_indices: neg,
    }
}

/// Blockwise-pairwise merging: within each block of `2K` consecutive
/// bags, consecutive nonoverlapping pairs contribute their larger-
/// proportion member to the positive big bag. Ties send the lower index
/// to the positive side.
pub fn merge_bp(bags: &[Bag], k: usize) -> Result<Vec<MergedPair>> {
    check_mergeable(bags, k)?;
    let mut out = Vec::with_capacity(bags.len() / (2 * k));
    for block in (0..bags.len()).step_by(2 * k) {
        let mut pos = Vec::with_capacity(k);
        let mut neg = Vec::with_capacity(k);
        for p in 0..k {
            let a = block + 2 * p;
            let b = a + 1;
            if bags[a].lp_hat() >= bags[b].lp_hat() {
                pos.push(a);
                neg.push(b);
            } else {
                pos.push(b);
                neg.push(a);
            }
        }
        out.push(merged_pair(bags, pos, neg));
    }
    Ok(out)
}

/// Blockwise-max merging: within each block of `2K` consecutive bags, the
/// `K` bags with the largest proportions form the positive big bag. Ties
/// send the lower index to the positive side.
pub fn merge_bm(bags: &[Bag], k: usize) -> Result<Vec<MergedPair>> {
    check_mergeable(bags, k)?;
    let mut out = Vec::with_capacity(bags.len() / (2 * k));
    for block in (0..bags.len()).step_by(2 * k) {
        let mut order: Vec<usize> = (block..block + 2 * k).collect();
        order.sort_by(|&a, &b| {
            bags[b]
                .lp_hat()
                .partial_cmp(&bags[a].lp_hat())
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut pos = order[..k].to_vec();
        let mut neg = order[k..].to_vec();
        pos.sort_unstable();
        neg.sort_unstable();
        out.push(merged_pair(bags, pos, neg));
    }
    Ok(out)
}

/// True iff every merged pair's gap under scheme A is at least the gap
/// under scheme B (up to floating-point slack). Both outputs must come
/// from the same bags and block structure.
pub fn check_dominates(a: &[MergedPair], b: &[MergedPair]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).all(|(x, y)| x.gap() >= y.gap() - DOMINANCE_TOL))
}

/// One pair's row in the JSON pairing/merging report.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PairReportEntry {
    pub plus_bags: Vec<usize>,
    pub minus_bags: Vec<usize>,
    pub lp_plus: f64,
    pub lp_minus: f64,
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub gap: f64,
    pub nbar: f64,
    pub weight: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PairingReport {
    pub total_objective: f64,
    pub pairs: Vec<PairReportEntry>,
}

impl PairingReport {
    pub fn from_pairs(pairs: &[BagPair], weights: &[f64]) -> PairingReport {
        let entries: Vec<PairReportEntry> = pairs
            .iter()
            .zip(weights)
            .map(|(p, &w)| {
                let (kp, km) = p.kappa();
                PairReportEntry {
                    plus_bags: vec![p.plus_idx],
                    minus_bags: vec![p.minus_idx],
                    lp_plus: p.lp_plus,
                    lp_minus: p.lp_minus,
                    kappa_plus: kp,
                    kappa_minus: km,
                    gap: p.gap(),
                    nbar: p.nbar(),
                    weight: w,
                    objective: p.nbar() * p.gap() * p.gap(),
                }
            })
            .collect();
        PairingReport {
            total_objective: entries.iter().map(|e| e.objective).sum(),
            pairs: entries,
        }
    }

    pub fn from_merged(pairs: &[MergedPair], weights: &[f64]) -> PairingReport {
        let entries: Vec<PairReportEntry> = pairs
            .iter()
            .zip(weights)
            .map(|(p, &w)| {
                let (kp, km) = p.kappa();
                PairReportEntry {
                    plus_bags: p.pos_indices.clone(),
                    minus_bags: p.neg_indices.clone(),
                    lp_plus: p.lp_plus,
                    lp_minus: p.lp_minus,
                    kappa_plus: kp,
                    kappa_minus: km,
                    gap: p.gap(),
                    nbar: p.nbar(),
                    weight: w,
                    objective: p.nbar() * p.gap() * p.gap(),
                }
            })
            .collect();
        PairingReport {
            total_objective: entries.iter().map(|e| e.objective).sum(),
            pairs: entries,
        }
    }
}
