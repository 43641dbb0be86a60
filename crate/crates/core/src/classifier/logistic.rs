use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PairFeatureVector;
use crate::corr::tensor::sigmoid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// L2 strength on standardized weights; the bias is not penalized.
    pub lambda: f64,
    /// Weight each class by n / (2 · n_class).
    pub class_weighting: bool,
    pub max_iter: usize,
    /// Stop when the gradient norm falls below this.
    pub tol: f64,
    /// Seeds the starting point only; the optimum does not depend on it.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lambda: 1.0,
            class_weighting: true,
            max_iter: 100,
            tol: 1e-6,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    /// Population standard deviation; 0 marks a constant column.
    pub std: f64,
}

impl ColumnStats {
    pub fn is_constant(&self) -> bool {
        self.std == 0.0
    }

    pub fn apply(&self, x: f64) -> f64 {
        if self.is_constant() {
            0.0
        } else {
            (x - self.mean) / self.std
        }
    }
}

/// Mean and population standard deviation of every column.
pub fn standardize_columns(rows: &[&[f64]], width: usize) -> Vec<ColumnStats> {
    let n = rows.len().max(1) as f64;
    (0..width)
        .map(|j| {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            // guard against round-off on constant columns
            let std = if rows.iter().all(|r| r[j] == rows[0][j]) { 0.0 } else { var.sqrt() };
            ColumnStats { mean, std }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub features: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub stats: Vec<ColumnStats>,
    pub config: FitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations: usize,
    /// Objective before the first and after every Newton step.
    pub objective: Vec<f64>,
    pub grad_norm: f64,
    pub converged: bool,
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

struct Problem {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    c: Vec<f64>,
    lambda: f64,
}

impl Problem {
    fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    fn margin(&self, theta: &[f64], i: usize) -> f64 {
        let d = self.dim();
        self.x[i].iter().zip(&theta[..d]).map(|(a, b)| a * b).sum::<f64>() + theta[d]
    }

    fn objective(&self, theta: &[f64]) -> f64 {
        let d = self.dim();
        let loss: f64 = (0..self.x.len())
            .map(|i| self.c[i] * softplus(-self.y[i] * self.margin(theta, i)))
            .sum();
        loss + 0.5 * self.lambda * theta[..d].iter().map(|w| w * w).sum::<f64>()
    }

    fn gradient_hessian(&self, theta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.dim();
        let mut g = DVector::zeros(d + 1);
        let mut h = DMatrix::zeros(d + 1, d + 1);
        for i in 0..self.x.len() {
            let z = self.margin(theta, i);
            let p = sigmoid(z);
            // d/dz of c · softplus(-y z) with y in {-1, 1}
            let t = if self.y[i] > 0.0 { 1.0 } else { 0.0 };
            let gi = self.c[i] * (p - t);
            let hi = self.c[i] * p * (1.0 - p);
            let row = &self.x[i];
            for a in 0..=d {
                let xa = if a < d { row[a] } else { 1.0 };
                g[a] += gi * xa;
                if hi == 0.0 {
                    continue;
                }
                for b in 0..=a {
                    let xb = if b < d { row[b] } else { 1.0 };
                    h[(a, b)] += hi * xa * xb;
                }
            }
        }
        for a in 0..=d {
            for b in 0..a {
                h[(b, a)] = h[(a, b)];
            }
        }
        for a in 0..d {
            g[a] += self.lambda * theta[a];
            h[(a, a)] += self.lambda;
        }
        (g, h)
    }
}

/// Fits L2-regularized logistic regression by Newton's method with
/// backtracking line search on standardized features.
pub fn fit(names: &[String], data: &[PairFeatureVector], cfg: &FitConfig) -> Result<(ClassifierModel, FitReport)> {
    let labeled: Vec<&PairFeatureVector> = data.iter().filter(|v| v.label.is_some()).collect();
    let n_pos = labeled.iter().filter(|v| v.label.is_some_and(|l| l.is_positive())).count();
    let n_neg = labeled.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let d = names.len();
    for v in &labeled {
        if v.values.len() != d {
            return Err(Error::Invalid(format!(
                "vector {} has {} values, registry has {d}",
                v.key,
                v.values.len()
            )));
        }
        if let Some(j) = v.values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFiniteFeature(format!("{} of {}", names[j], v.key)));
        }
    }
    let rows: Vec<&[f64]> = labeled.iter().map(|v| v.values.as_slice()).collect();
    let stats = standardize_columns(&rows, d);
    let n = labeled.len() as f64;
    let (w_pos, w_neg) = if cfg.class_weighting {
        (n / (2.0 * n_pos as f64), n / (2.0 * n_neg as f64))
    } else {
        (1.0, 1.0)
    };
    let problem = Problem {
        x: rows
            .iter()
            .map(|r| r.iter().zip(&stats).map(|(x, s)| s.apply(*x)).collect())
            .collect(),
        y: labeled.iter().map(|v| v.label.unwrap().sign()).collect(),
        c: labeled
            .iter()
            .map(|v| if v.label.unwrap().is_positive() { w_pos } else { w_neg })
            .collect(),
        lambda: cfg.lambda,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut theta: Vec<f64> = (0..=d).map(|_| rng.random_range(-0.01..0.01)).collect();
    let mut f = problem.objective(&theta);
    let mut report = FitReport {
        iterations: 0,
        objective: vec![f],
        grad_norm: f64::INFINITY,
        converged: false,
    };
    for _ in 0..cfg.max_iter {
        let (g, mut h) = problem.gradient_hessian(&theta);
        report.grad_norm = g.norm();
        if report.grad_norm < cfg.tol {
            report.converged = true;
            break;
        }
        let step = loop {
            if let Some(ch) = h.clone().cholesky() {
                break ch.solve(&(-&g));
            }
            // only reachable when every sample is saturated and λ = 0
            for a in 0..=d {
                h[(a, a)] += 1e-10 + h[(a, a)].abs() * 1e-8;
            }
        };
        let slope = g.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            let fc = problem.objective(&cand);
            if fc <= f + 1e-4 * t * slope {
                theta = cand;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        report.iterations += 1;
        if !accepted {
            // no decrease possible at machine precision
            report.converged = report.grad_norm < cfg.tol.sqrt();
            break;
        }
        report.objective.push(f);
    }
    if !report.converged {
        let (g, _) = problem.gradient_hessian(&theta);
        report.grad_norm = g.norm();
        report.converged = report.grad_norm < cfg.tol;
    }
    let model = ClassifierModel {
        features: names.to_vec(),
        weights: theta[..d].to_vec(),
        bias: theta[d],
        stats,
        config: cfg.clone(),
    };
    Ok((model, report))
}

impl ClassifierModel {
    /// wᵀx̂ + b for raw values aligned with `self.features`.
    pub fn decision(&self, values: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.stats)
            .zip(values)
            .map(|((w, s), x)| w * s.apply(*x))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict_values(&self, values: &[f64]) -> f64 {
        sigmoid(self.decision(values))
    }

    /// Features missing from `named` count as 0 before standardization.
    pub fn predict_named(&self, named: &BTreeMap<String, f64>) -> f64 {
        let values: Vec<f64> = self
            .features
            .iter()
            .map(|n| named.get(n).copied().unwrap_or(0.0))
            .collect();
        self.predict_values(&values)
    }

    /// Same weights with different standardization statistics.
    pub fn with_stats(&self, stats: Vec<ColumnStats>) -> Self {
        ClassifierModel {
            stats,
            ..self.clone()
        }
    }

    pub fn to_manifest(&self) -> String {
        let mut s = String::from("# snipmine pair classifier\nversion 1\n");
        let c = &self.config;
        let _ = writeln!(s, "lambda {}", c.lambda);
        let _ = writeln!(s, "class_weighting {}", c.class_weighting);
        let _ = writeln!(s, "max_iter {}", c.max_iter);
        let _ = writeln!(s, "tol {}", c.tol);
        let _ = writeln!(s, "seed {}", c.seed);
        let _ = writeln!(s, "bias {}", self.bias);
        let _ = writeln!(s, "# feature name mean std weight");
        for ((n, st), w) in self.features.iter().zip(&self.stats).zip(&self.weights) {
            let _ = writeln!(s, "feature {n} {} {} {w}", st.mean, st.std);
        }
        s
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::Invalid(format!("bad model manifest line: {line}"));
        let mut cfg = FitConfig::default();
        let mut bias = None;
        let (mut features, mut weights, mut stats) = (Vec::new(), Vec::new(), Vec::new());
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let num = |i: usize| -> Result<f64> { parts.get(i).and_then(|v| v.parse().ok()).ok_or_else(|| bad(line)) };
            match parts[0] {
                "version" if parts.get(1) == Some(&"1") => {}
                "lambda" => cfg.lambda = num(1)?,
                "class_weighting" => cfg.class_weighting = parts.get(1).and_then(|v| v.parse().ok()).ok_or_else(|| bad(line))?,
                "max_iter" => cfg.max_iter = parts.get(1).and_then(|v| v.parse().ok()).ok_or_else(|| bad(line))?,
                "tol" => cfg.tol = num(1)?,
                "seed" => cfg.seed = parts.get(1).and_then(|v| v.parse().ok()).ok_or_else(|| bad(line))?,
                "bias" => bias = Some(num(1)?),
                "feature" if parts.len() == 5 => {
                    features.push(parts[1].to_string());
                    stats.push(ColumnStats {
                        mean: num(2)?,
                        std: num(3)?,
                    });
                    weights.push(num(4)?);
                }
                _ => return Err(bad(line)),
            }
        }
        Ok(ClassifierModel {
            features,
            weights,
            bias: bias.ok_or_else(|| Error::Invalid("model manifest has no bias".into()))?,
            stats,
            config: cfg,
        })
    }
}
