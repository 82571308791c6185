//! Gaussian-kernel decision functions in representer form.
//!
//! The trained classifier is `f(x) = sum_i alpha_i k(x, x_i)` over the
//! training instances, with `k(x, x') = exp(-bandwidth * ||x - x'||^2)`.
//! The kernel is bounded by 1, so the RKHS ball radius alone controls the
//! uniform output bound used by the bound calculators.

use std::path::Path;

use crate::{Error, Result};

/// Gaussian kernel configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelConfig {
    /// Exponent coefficient; must be finite and positive.
    pub bandwidth: f64,
}

impl KernelConfig {
    pub fn new(bandwidth: f64) -> Result<KernelConfig> {
        if !bandwidth.is_finite() || bandwidth <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "kernel bandwidth must be finite and positive, got {bandwidth}"
            )));
        }
        Ok(KernelConfig { bandwidth })
    }

    pub fn evaluate(&self, x: &[f64], y: &[f64]) -> f64 {
        (-self.bandwidth * squared_distance(x, y)).exp()
    }
}

fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Dense symmetric kernel Gram matrix.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    n: usize,
    data: Vec<f64>,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(v).map(|(k, x)| k * x).sum())
            .collect()
    }

    /// `v' M v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        self.matvec(v).iter().zip(v).map(|(mv, x)| mv * x).sum()
    }
}

fn check_dims(instances: &[Vec<f64>]) -> Result<usize> {
    let dim = instances.first().ok_or(Error::EmptyInput("instances"))?.len();
    for x in instances {
        if x.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
        }
    }
    Ok(dim)
}

/// Builds the Gram matrix `K_ij = exp(-bandwidth ||x_i - x_j||^2)`.
/// Symmetric with a unit diagonal by construction.
pub fn kernel_matrix(instances: &[Vec<f64>], cfg: KernelConfig) -> Result<GramMatrix> {
    check_dims(instances)?;
    let n = instances.len();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        data[i * n + i] = 1.0;
        for j in (i + 1)..n {
            let k = cfg.evaluate(&instances[i], &instances[j]);
            data[i * n + j] = k;
            data[j * n + i] = k;
        }
    }
    Ok(GramMatrix { n, data })
}

/// Bandwidth heuristic `1 / (d * Var(X))` where `Var(X)` is the
/// population variance pooled over every entry of the data matrix.
pub fn default_bandwidth(instances: &[Vec<f64>]) -> Result<f64> {
    let dim = check_dims(instances)?;
    if instances.len() < 2 {
        return Err(Error::InvalidParameter(
            "bandwidth heuristic needs at least 2 rows".into(),
        ));
    }
    if dim == 0 {
        return Err(Error::EmptyInput("feature columns"));
    }
    let count = (instances.len() * dim) as f64;
    let mean: f64 = instances.iter().flatten().sum::<f64>() / count;
    let var: f64 =
        instances.iter().flatten().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    if var <= 0.0 {
        return Err(Error::ZeroVariance("data matrix is constant".into()));
    }
    Ok(1.0 / (dim as f64 * var))
}

/// Kernel-expansion classifier `f(x) = sum_i alpha_i k(x, x_i)`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DecisionFunction {
    pub bandwidth: f64,
    pub dim: usize,
    /// Anchor instances, row-major.
    pub anchors: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl DecisionFunction {
    pub fn new(
        cfg: KernelConfig,
        anchors: &[Vec<f64>],
        alpha: Vec<f64>,
    ) -> Result<DecisionFunction> {
        let dim = check_dims(anchors)?;
        if alpha.len() != anchors.len() {
            return Err(Error::DimensionMismatch { expected: anchors.len(), got: alpha.len() });
        }
        Ok(DecisionFunction {
            bandwidth: cfg.bandwidth,
            dim,
            anchors: anchors.iter().flatten().copied().collect(),
            alpha,
        })
    }

    pub fn n_anchors(&self) -> usize {
        self.alpha.len()
    }

    fn anchor(&self, i: usize) -> &[f64] {
        &self.anchors[i * self.dim..(i + 1) * self.dim]
    }

    /// `f(x)`; bounded by `||alpha||_1` since the kernel is at most 1.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let cfg = KernelConfig { bandwidth: self.bandwidth };
        Ok((0..self.n_anchors())
            .map(|i| self.alpha[i] * cfg.evaluate(x, self.anchor(i)))
            .sum())
    }

    pub fn evaluate_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.evaluate(x)).collect()
    }

    /// Squared RKHS norm `alpha' K alpha`; its square root is the ball
    /// radius fed to the bound calculators.
    pub fn rkhs_norm_squared(&self) -> f64 {
        let cfg = KernelConfig { bandwidth: self.bandwidth };
        let m = self.n_anchors();
        let mut total = 0.0;
        for i in 0..m {
            total += self.alpha[i] * self.alpha[i];
            for j in (i + 1)..m {
                total +=
                    2.0 * self.alpha[i] * self.alpha[j] * cfg.evaluate(self.anchor(i), self.anchor(j));
            }
        }
        total
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, serde_json::to_string_pretty(self)?)?)
    }

    pub fn load(path: &Path) -> Result<DecisionFunction> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn gram_known_entries() {
        let cfg = KernelConfig::new(1.0).unwrap();
        let gram = kernel_matrix(&[vec![0.0], vec![1.0], vec![0.0]], cfg).unwrap();
        assert_eq!(gram.get(0, 0), 1.0);
        assert_eq!(gram.get(0, 2), 1.0); // duplicate points
        assert!((gram.get(0, 1) - (-1.0f64).exp()).abs() < 1e-15);
        assert!(((-1.0f64).exp() - 0.367879).abs() < 1e-6);
        let single = kernel_matrix(&[vec![3.0, 4.0]], cfg).unwrap();
        assert_eq!(single.n(), 1);
        assert_eq!(single.get(0, 0), 1.0);
    }

    #[test]
    fn gram_is_symmetric() {
        let mut rng = crate::seed::rng(3);
        let instances: Vec<Vec<f64>> =
            (0..20).map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let gram = kernel_matrix(&instances, KernelConfig::new(0.7).unwrap()).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                assert!((gram.get(i, j) - gram.get(j, i)).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn gram_rejects_ragged_input() {
        let cfg = KernelConfig::new(1.0).unwrap();
        assert!(matches!(
            kernel_matrix(&[vec![0.0, 1.0], vec![2.0]], cfg),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    // lambda_min >= -1e-8 iff K + 1e-8 I admits a Cholesky factor
    #[test]
    fn gram_is_positive_semidefinite() {
        let mut rng = crate::seed::rng(17);
        let instances: Vec<Vec<f64>> =
            (0..40).map(|_| (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
        let gram = kernel_matrix(&instances, KernelConfig::new(0.5).unwrap()).unwrap();
        let n = gram.n();
        let mut a: Vec<f64> = (0..n * n).map(|idx| gram.data[idx]).collect();
        for i in 0..n {
            a[i * n + i] += 1e-8;
        }
        assert!(cholesky_in_place(&mut a, n), "shifted Gram matrix is not PSD");
    }

    fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= a[j * n + k] * a[j * n + k];
            }
            if d <= 0.0 {
                return false;
            }
            let d = d.sqrt();
            a[j * n + j] = d;
            for i in (j + 1)..n {
                let mut v = a[i * n + j];
                for k in 0..j {
                    v -= a[i * n + k] * a[j * n + k];
                }
                a[i * n + j] = v / d;
            }
        }
        true
    }

    #[test]
    fn bandwidth_heuristic() {
        // entries {0, 2} in both columns: pooled variance 1, d = 2
        let x = vec![vec![0.0, 0.0], vec![2.0, 2.0]];
        assert!((default_bandwidth(&x).unwrap() - 0.5).abs() < 1e-15);

        // standardized 10-column data has pooled variance about 1
        let mut rng = crate::seed::rng(19);
        let raw: Vec<Vec<f64>> =
            (0..200).map(|_| (0..10).map(|_| rng.gen_range(-1.0..5.0)).collect()).collect();
        let standardized = standardize(&raw);
        let bw = default_bandwidth(&standardized).unwrap();
        assert!((bw - 0.1).abs() < 1e-6, "bandwidth {bw}");

        assert!(matches!(
            default_bandwidth(&[vec![1.0, 1.0], vec![1.0, 1.0]]),
            Err(Error::ZeroVariance(_))
        ));
    }

    fn standardize(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = rows.len() as f64;
        let d = rows[0].len();
        let mut out = rows.to_vec();
        for c in 0..d {
            let mean: f64 = rows.iter().map(|r| r[c]).sum::<f64>() / n;
            let var: f64 = rows.iter().map(|r| (r[c] - mean) * (r[c] - mean)).sum::<f64>() / n;
            for r in &mut out {
                r[c] = (r[c] - mean) / var.sqrt();
            }
        }
        out
    }

    #[test]
    fn decision_function_evaluation() {
        let cfg = KernelConfig::new(1.0).unwrap();
        let zero =
            DecisionFunction::new(cfg, &[vec![0.0], vec![1.0]], vec![0.0, 0.0]).unwrap();
        assert_eq!(zero.evaluate(&[0.3]).unwrap(), 0.0);

        let single = DecisionFunction::new(cfg, &[vec![2.0, 2.0]], vec![2.0]).unwrap();
        assert_eq!(single.evaluate(&[2.0, 2.0]).unwrap(), 2.0);

        // equidistant anchors with opposite coefficients cancel
        let pair =
            DecisionFunction::new(cfg, &[vec![-1.0], vec![1.0]], vec![1.0, -1.0]).unwrap();
        assert!(pair.evaluate(&[0.0]).unwrap().abs() < 1e-15);

        assert!(matches!(
            pair.evaluate(&[0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn anchor_evaluation_matches_gram_row() {
        let mut rng = crate::seed::rng(29);
        let instances: Vec<Vec<f64>> =
            (0..15).map(|_| (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let cfg = KernelConfig::new(0.8).unwrap();
        let gram = kernel_matrix(&instances, cfg).unwrap();
        let alpha: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = DecisionFunction::new(cfg, &instances, alpha.clone()).unwrap();
        for (i, x) in instances.iter().enumerate() {
            let row_dot: f64 = gram.row(i).iter().zip(&alpha).map(|(k, a)| k * a).sum();
            assert!((f.evaluate(x).unwrap() - row_dot).abs() < 1e-12);
        }
        // the squared RKHS norm is the Gram quadratic form
        assert!((f.rkhs_norm_squared() - gram.quadratic_form(&alpha)).abs() < 1e-10);
        assert!(f.rkhs_norm_squared() >= 0.0);
    }

    #[test]
    fn model_roundtrips_through_json() {
        let cfg = KernelConfig::new(0.25).unwrap();
        let f = DecisionFunction::new(cfg, &[vec![1.0, -0.5], vec![0.0, 2.0]], vec![0.3, -0.7])
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        f.save(&path).unwrap();
        assert_eq!(DecisionFunction::load(&path).unwrap(), f);
    }
}
