//! Robust two-sided test for equality of out-of-sample return variances.
//!
//! The statistic is the difference of log sample variances of two paired
//! return series, studentized by a Parzen-kernel HAC estimate of its
//! asymptotic variance (delta method on the joint moment vector). The null
//! distribution comes from a circular block bootstrap of the paired rows:
//! each replicate recomputes the studentized statistic centered at the
//! original estimate, and the two-sided p-value is
//! `(#{|d*| ≥ |d|} + 1)/(reps + 1)`.
//!
//! Everything is driven by an explicit seed; replicate r draws from stream r
//! of a ChaCha8 generator, so results are bit-reproducible and replicates
//! could be evaluated in any order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Outcome of [`lw_variance_test`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceTestResult {
    /// Studentized log-variance difference of the original series.
    pub statistic: f64,
    /// Bootstrap two-sided p-value in (0, 1].
    pub p_value: f64,
    pub method: String,
    pub block_length: usize,
    pub bootstrap_reps: usize,
    pub seed: u64,
}

impl VarianceTestResult {
    /// Conventional significance stars at the 10/5/1% levels.
    pub fn stars(&self) -> &'static str {
        if self.p_value <= 0.01 {
            "***"
        } else if self.p_value <= 0.05 {
            "**"
        } else if self.p_value <= 0.10 {
            "*"
        } else {
            ""
        }
    }
}

/// Default block length `max(1, round(M^{1/3}))`.
pub fn default_block_length(m: usize) -> usize {
    ((m as f64).powf(1.0 / 3.0).round() as usize).max(1)
}

fn parzen(x: f64) -> f64 {
    let a = x.abs();
    if a <= 0.5 {
        1.0 - 6.0 * a * a + 6.0 * a * a * a
    } else if a <= 1.0 {
        2.0 * (1.0 - a).powi(3)
    } else {
        0.0
    }
}

/// Log-variance difference and its HAC standard error for paired series.
/// Returns `(delta, se)`.
fn delta_and_se(a: &[f64], b: &[f64], bandwidth: usize) -> (f64, f64) {
    let m = a.len();
    let mf = m as f64;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / mf;
    let (ma, mb) = (mean(a), mean(b));
    let (qa, qb) = (
        a.iter().map(|x| x * x).sum::<f64>() / mf,
        b.iter().map(|x| x * x).sum::<f64>() / mf,
    );
    let va = qa - ma * ma;
    let vb = qb - mb * mb;
    let delta = va.ln() - vb.ln();
    // delta-method projection of v_t = (a, b, a², b²) onto the gradient of
    // f(v) = ln(v₃ − v₁²) − ln(v₄ − v₂²)
    let g = [-2.0 * ma / va, 2.0 * mb / vb, 1.0 / va, -1.0 / vb];
    let w: Vec<f64> = (0..m)
        .map(|t| {
            g[0] * (a[t] - ma)
                + g[1] * (b[t] - mb)
                + g[2] * (a[t] * a[t] - qa)
                + g[3] * (b[t] * b[t] - qb)
        })
        .collect();
    let gamma = |k: usize| -> f64 { (0..m - k).map(|t| w[t] * w[t + k]).sum::<f64>() / mf };
    let mut psi = gamma(0);
    for k in 1..=bandwidth.min(m - 1) {
        psi += 2.0 * parzen(k as f64 / (bandwidth as f64 + 1.0)) * gamma(k);
    }
    let se = (psi.max(0.0) / mf).sqrt();
    (delta, se)
}

fn studentized(delta: f64, se: f64, center: f64) -> f64 {
    let num = delta - center;
    if se > 0.0 {
        num / se
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY * num.signum()
    }
}

/// Two-sided test of `H₀: log σ²_a = log σ²_b` on paired series.
///
/// `block_length = None` selects `max(1, round(M^{1/3}))`. Requires equal
/// lengths `M ≥ 20` and at least 999 bootstrap replications.
pub fn lw_variance_test(
    returns_a: &[f64],
    returns_b: &[f64],
    seed: u64,
    reps: usize,
    block_length: Option<usize>,
) -> Result<VarianceTestResult> {
    let m = returns_a.len();
    if returns_b.len() != m {
        return Err(Error::dim(m, returns_b.len(), "paired return series"));
    }
    if m < 20 {
        return Err(Error::InsufficientData { needed: 20, got: m });
    }
    if reps < 999 {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs at least 999 replications, got {reps}"
        )));
    }
    let constant = |s: &[f64]| s.iter().all(|&x| x == s[0]);
    if constant(returns_a) {
        return Err(Error::DegenerateVariance { which: "a" });
    }
    if constant(returns_b) {
        return Err(Error::DegenerateVariance { which: "b" });
    }
    let block = block_length
        .unwrap_or_else(|| default_block_length(m))
        .max(1);

    let (delta_hat, se_hat) = delta_and_se(returns_a, returns_b, block);
    let statistic = studentized(delta_hat, se_hat, 0.0);

    let n_blocks = m.div_ceil(block);
    let mut exceed = 0usize;
    let mut idx = Vec::with_capacity(n_blocks * block);
    let mut ra = vec![0.0; m];
    let mut rb = vec![0.0; m];
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep as u64);
        idx.clear();
        for _ in 0..n_blocks {
            let start = rng.random_range(0..m);
            for j in 0..block {
                idx.push((start + j) % m);
            }
        }
        idx.truncate(m);
        for (t, &i) in idx.iter().enumerate() {
            ra[t] = returns_a[i];
            rb[t] = returns_b[i];
        }
        let (delta_star, se_star) = delta_and_se(&ra, &rb, block);
        let d_star = studentized(delta_star, se_star, delta_hat);
        if d_star.abs() >= statistic.abs() {
            exceed += 1;
        }
    }
    let p_value = (exceed + 1) as f64 / (reps + 1) as f64;
    Ok(VarianceTestResult {
        statistic,
        p_value,
        method: "log-variance difference, Parzen HAC studentization, circular block bootstrap"
            .to_string(),
        block_length: block,
        bootstrap_reps: reps,
        seed,
    })
}
