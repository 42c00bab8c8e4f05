//! Dense symmetric-positive-definite linear algebra and moment primitives.
//!
//! Everything downstream (density evaluation, GPM estimation, portfolio
//! weights) funnels through this module: Cholesky factorization, SPD
//! inversion, the symmetric inverse square root, sample moments, Mahalanobis
//! quadratic forms, Frobenius distances and the Mori kurtosis matrix.
//! Matrices are dense `ndarray` arrays; the target scale is a few hundred
//! assets at most, where O(d³) routines are perfectly adequate.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::Error;
use crate::Result;

/// Relative pivot/eigenvalue floor: entries below `RELATIVE_PD_TOL` times the
/// dominant diagonal scale are treated as numerically non-positive.
pub const RELATIVE_PD_TOL: f64 = 1e-12;

/// A symmetric matrix intended to be positive definite.
///
/// The constructor symmetrizes its input via `(M + Mᵀ)/2` because outer-product
/// accumulations routinely leave ~1e-16 asymmetry. Positive definiteness is
/// not checked up front; it surfaces as [`Error::NotPositiveDefinite`] from
/// [`SpdMatrix::cholesky`] and the operations built on it.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    data: Array2<f64>,
}

impl SpdMatrix {
    pub fn new(m: Array2<f64>) -> Result<Self> {
        let (r, c) = m.dim();
        if r != c {
            return Err(Error::dim(r, c, "SpdMatrix must be square"));
        }
        if r == 0 {
            return Err(Error::InvalidArgument("SpdMatrix dimension is zero".into()));
        }
        let mut data = m;
        for i in 0..r {
            for j in (i + 1)..r {
                let avg = 0.5 * (data[[i, j]] + data[[j, i]]);
                data[[i, j]] = avg;
                data[[j, i]] = avg;
            }
        }
        Ok(SpdMatrix { data })
    }

    pub fn identity(dim: usize) -> Self {
        SpdMatrix {
            data: Array2::eye(dim),
        }
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Array2::zeros((diag.len(), diag.len()));
        for (i, &v) in diag.iter().enumerate() {
            m[[i, i]] = v;
        }
        SpdMatrix { data: m }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    /// Lower-triangular Cholesky factor `L` with `L·Lᵀ = M`.
    ///
    /// Fails with [`Error::NotPositiveDefinite`] when any pivot drops below
    /// `RELATIVE_PD_TOL` times the largest diagonal entry.
    pub fn cholesky(&self) -> Result<Array2<f64>> {
        let d = self.dim();
        let max_diag = (0..d).fold(0.0_f64, |acc, i| acc.max(self.data[[i, i]]));
        if !(max_diag > 0.0) {
            return Err(Error::not_pd("no positive diagonal entry"));
        }
        let floor = RELATIVE_PD_TOL * max_diag;
        let mut l = Array2::<f64>::zeros((d, d));
        for j in 0..d {
            let mut s = self.data[[j, j]];
            for k in 0..j {
                s -= l[[j, k]] * l[[j, k]];
            }
            if !(s > floor) {
                return Err(Error::not_pd(format!("pivot {s:.3e} at column {j}")));
            }
            l[[j, j]] = s.sqrt();
            for i in (j + 1)..d {
                let mut s = self.data[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / l[[j, j]];
            }
        }
        Ok(l)
    }

    /// Log-determinant through the Cholesky factor.
    pub fn log_det(&self) -> Result<f64> {
        let l = self.cholesky()?;
        Ok((0..self.dim()).map(|i| l[[i, i]].ln()).sum::<f64>() * 2.0)
    }

    /// SPD inverse via Cholesky: solves `M X = I` column by column.
    pub fn invert(&self) -> Result<SpdMatrix> {
        let d = self.dim();
        let l = self.cholesky()?;
        let mut inv = Array2::<f64>::zeros((d, d));
        let mut y = vec![0.0; d];
        for col in 0..d {
            // forward solve L y = e_col
            for i in 0..d {
                let mut s = if i == col { 1.0 } else { 0.0 };
                for k in 0..i {
                    s -= l[[i, k]] * y[k];
                }
                y[i] = s / l[[i, i]];
            }
            // back solve Lᵀ x = y
            for i in (0..d).rev() {
                let mut s = y[i];
                for k in (i + 1)..d {
                    s -= l[[k, i]] * inv[[k, col]];
                }
                inv[[i, col]] = s / l[[i, i]];
            }
        }
        SpdMatrix::new(inv)
    }

    /// Symmetric inverse square root `M^{-1/2}` via Jacobi eigendecomposition,
    /// so that `R·M·R = I` with `R` symmetric.
    pub fn inv_sqrt(&self) -> Result<SpdMatrix> {
        let (eigvals, eigvecs) = jacobi_eigen(&self.data);
        let max_ev = eigvals.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        if !(max_ev > 0.0) {
            return Err(Error::not_pd("no positive eigenvalue"));
        }
        let floor = RELATIVE_PD_TOL * max_ev;
        let d = self.dim();
        let mut r = Array2::<f64>::zeros((d, d));
        for k in 0..d {
            if !(eigvals[k] > floor) {
                return Err(Error::not_pd(format!(
                    "eigenvalue {:.3e} at index {k}",
                    eigvals[k]
                )));
            }
            let w = 1.0 / eigvals[k].sqrt();
            for i in 0..d {
                for j in 0..d {
                    r[[i, j]] += w * eigvecs[[i, k]] * eigvecs[[j, k]];
                }
            }
        }
        SpdMatrix::new(r)
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors in columns.
/// Quadratically convergent; more than enough at d ≤ a few hundred.
fn jacobi_eigen(m: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let d = m.nrows();
    let mut a = m.clone();
    let mut v = Array2::<f64>::eye(d);
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let tol = 1e-15 * scale;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[[p, q]];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let app = a[[p, p]];
                let aqq = a[[q, q]];
                a[[p, p]] = app - t * apq;
                a[[q, q]] = aqq + t * apq;
                a[[p, q]] = 0.0;
                a[[q, p]] = 0.0;
                for k in 0..d {
                    if k != p && k != q {
                        let akp = a[[k, p]];
                        let akq = a[[k, q]];
                        a[[k, p]] = c * akp - s * akq;
                        a[[p, k]] = a[[k, p]];
                        a[[k, q]] = s * akp + c * akq;
                        a[[q, k]] = a[[k, q]];
                    }
                }
                for k in 0..d {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let eig = Array1::from_iter((0..d).map(|i| a[[i, i]]));
    (eig, v)
}

/// Column means and the (n−1)-divisor sample covariance of a T×N panel.
///
/// The `demean` flag does not change what is computed here; it is carried
/// along so GPM estimation knows whether to subtract the reported mean from
/// observations before forming per-observation terms.
#[derive(Debug, Clone)]
pub struct MomentSummary {
    pub mean: Array1<f64>,
    pub covariance: SpdMatrix,
    pub n: usize,
    pub demean: bool,
}

impl MomentSummary {
    /// Build a summary with externally supplied parameters (e.g. the true
    /// generating moments in a Monte-Carlo oracle).
    pub fn supplied(
        mean: Array1<f64>,
        covariance: SpdMatrix,
        n: usize,
        demean: bool,
    ) -> Result<Self> {
        if mean.len() != covariance.dim() {
            return Err(Error::dim(
                covariance.dim(),
                mean.len(),
                "moment mean length",
            ));
        }
        Ok(MomentSummary {
            mean,
            covariance,
            n,
            demean,
        })
    }

    /// The vector subtracted from observations downstream: the sample mean
    /// when `demean` is set, zeros otherwise.
    pub fn centering(&self) -> Array1<f64> {
        if self.demean {
            self.mean.clone()
        } else {
            Array1::zeros(self.mean.len())
        }
    }

    /// Rescale the covariance into the t scatter matrix `(ν−2)/ν · Σ`.
    /// Only meaningful for ν > 2.
    pub fn rescaled_to_scatter(&self, nu: f64) -> Result<Self> {
        if nu <= 2.0 {
            return Err(Error::InvalidArgument(format!(
                "scatter rescale requires nu > 2, got {nu}"
            )));
        }
        let factor = (nu - 2.0) / nu;
        let scaled = self.covariance.as_array() * factor;
        Ok(MomentSummary {
            mean: self.mean.clone(),
            covariance: SpdMatrix::new(scaled)?,
            n: self.n,
            demean: self.demean,
        })
    }
}

/// Column means plus (n−1)-divisor covariance of `values` (rows = periods).
pub fn sample_moments(values: &Array2<f64>, demean: bool) -> Result<MomentSummary> {
    let (n, d) = values.dim();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mut mean = Array1::<f64>::zeros(d);
    for row in values.rows() {
        mean += &row;
    }
    mean /= n as f64;
    let mut cov = Array2::<f64>::zeros((d, d));
    for row in values.rows() {
        for i in 0..d {
            let ei = row[i] - mean[i];
            for j in i..d {
                cov[[i, j]] += ei * (row[j] - mean[j]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            cov[[i, j]] /= denom;
            cov[[j, i]] = cov[[i, j]];
        }
    }
    Ok(MomentSummary {
        mean,
        covariance: SpdMatrix::new(cov)?,
        n,
        demean,
    })
}

/// Quadratic form `δ(x) = (x−μ)ᵀ P (x−μ)` for a precision matrix `P`.
pub fn mahalanobis(x: ArrayView1<f64>, mu: ArrayView1<f64>, precision: &SpdMatrix) -> Result<f64> {
    let d = precision.dim();
    if x.len() != d {
        return Err(Error::dim(d, x.len(), "mahalanobis x"));
    }
    if mu.len() != d {
        return Err(Error::dim(d, mu.len(), "mahalanobis mu"));
    }
    let p = precision.as_array();
    let mut acc = 0.0;
    for i in 0..d {
        let ei = x[i] - mu[i];
        for j in 0..d {
            acc += ei * p[[i, j]] * (x[j] - mu[j]);
        }
    }
    Ok(acc)
}

/// Frobenius norm of `A − B`.
pub fn frobenius_distance(a: &Array2<f64>, b: &Array2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::dim(a.nrows(), b.nrows(), "frobenius operands"));
    }
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let e = x - y;
        acc += e * e;
    }
    Ok(acc.sqrt())
}

/// Empirical Mori kurtosis matrix of an already standardized panel:
/// `K̂(Y) = (1/n) Σᵢ (YᵢᵀYᵢ) YᵢYᵢᵀ − (d+2) I`.
///
/// Zero in expectation for standard Gaussian data; its diagonal picks up
/// the excess fourth moments of heavy-tailed data.
pub fn mori_kurtosis(standardized: &Array2<f64>) -> Result<Array2<f64>> {
    let (n, d) = standardized.dim();
    if n < 1 {
        return Err(Error::InsufficientData { needed: 1, got: n });
    }
    let mut k = Array2::<f64>::zeros((d, d));
    for row in standardized.rows() {
        let norm2: f64 = row.iter().map(|y| y * y).sum();
        for i in 0..d {
            let w = norm2 * row[i];
            for j in i..d {
                k[[i, j]] += w * row[j];
            }
        }
    }
    let nf = n as f64;
    for i in 0..d {
        for j in i..d {
            k[[i, j]] /= nf;
            k[[j, i]] = k[[i, j]];
        }
    }
    for i in 0..d {
        k[[i, i]] -= (d + 2) as f64;
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn max_abs(m: &Array2<f64>) -> f64 {
        m.iter().fold(0.0_f64, |a, &x| a.max(x.abs()))
    }

    fn random_spd(d: usize, seed: u64) -> SpdMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Array2::<f64>::zeros((d, d));
        for v in a.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let m = a.t().dot(&a) + Array2::<f64>::eye(d);
        SpdMatrix::new(m).unwrap()
    }

    fn gaussian_panel(n: usize, sigma: &SpdMatrix, seed: u64) -> Array2<f64> {
        let d = sigma.dim();
        let l = sigma.cholesky().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Array2::<f64>::zeros((n, d));
        let mut z = vec![0.0_f64; d];
        for mut row in out.rows_mut() {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            for i in 0..d {
                let mut s = 0.0;
                for k in 0..=i {
                    s += l[[i, k]] * z[k];
                }
                row[i] = s;
            }
        }
        out
    }

    #[test]
    fn cholesky_identity_is_identity() {
        let m = SpdMatrix::identity(3);
        let l = m.cholesky().unwrap();
        assert_abs_diff_eq!(l, Array2::eye(3), epsilon = 0.0);
    }

    #[test]
    fn cholesky_diagonal_takes_square_roots() {
        let m = SpdMatrix::from_diag(&[4.0, 9.0]);
        let l = m.cholesky().unwrap();
        assert_abs_diff_eq!(l, Array2::from_diag(&array![2.0, 3.0]), epsilon = 0.0);
    }

    #[test]
    fn cholesky_reconstructs_random_spd() {
        let m = random_spd(5, 7);
        let l = m.cholesky().unwrap();
        let rebuilt = l.dot(&l.t());
        let num = frobenius_distance(&rebuilt, m.as_array()).unwrap();
        let den = frobenius_distance(m.as_array(), &Array2::zeros((5, 5))).unwrap();
        assert!(num / den < 1e-10, "relative error {}", num / den);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = SpdMatrix::new(array![[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(
            m.cholesky(),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn invert_identity_and_diagonal() {
        let inv = SpdMatrix::identity(4).invert().unwrap();
        assert!(max_abs(&(inv.as_array() - &Array2::<f64>::eye(4))) == 0.0);
        let inv = SpdMatrix::from_diag(&[2.0, 5.0]).invert().unwrap();
        assert_abs_diff_eq!(inv.as_array()[[0, 0]], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(inv.as_array()[[1, 1]], 0.2, epsilon = 1e-15);
    }

    #[test]
    fn invert_residual_on_random_spd() {
        let m = random_spd(6, 11);
        let inv = m.invert().unwrap();
        let resid = m.as_array().dot(inv.as_array()) - Array2::<f64>::eye(6);
        assert!(max_abs(&resid) < 1e-8, "residual {}", max_abs(&resid));
    }

    #[test]
    fn inv_sqrt_identity_and_diagonal() {
        let r = SpdMatrix::identity(3).inv_sqrt().unwrap();
        assert!(max_abs(&(r.as_array() - &Array2::<f64>::eye(3))) < 1e-12);
        let r = SpdMatrix::from_diag(&[4.0, 16.0]).inv_sqrt().unwrap();
        assert_abs_diff_eq!(r.as_array()[[0, 0]], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.as_array()[[1, 1]], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn inv_sqrt_sandwich_residual() {
        let m = random_spd(4, 3);
        let r = m.inv_sqrt().unwrap();
        let resid = r.as_array().dot(m.as_array()).dot(r.as_array()) - Array2::<f64>::eye(4);
        assert!(max_abs(&resid) < 1e-8, "residual {}", max_abs(&resid));
    }

    #[test]
    fn inv_sqrt_squares_to_inverse() {
        let m = random_spd(5, 19);
        let r = m.inv_sqrt().unwrap();
        let r2 = r.as_array().dot(r.as_array());
        let inv = m.invert().unwrap();
        assert!(max_abs(&(&r2 - inv.as_array())) < 1e-7);
    }

    #[test]
    fn sample_moments_hand_case() {
        let values = array![[0.0, 0.0], [2.0, 2.0]];
        let m = sample_moments(&values, true).unwrap();
        assert_abs_diff_eq!(m.mean[0], 1.0, epsilon = 0.0);
        assert_abs_diff_eq!(m.mean[1], 1.0, epsilon = 0.0);
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(m.covariance.as_array()[[i, j]], 2.0, epsilon = 0.0);
            }
        }
    }

    #[test]
    fn sample_moments_requires_two_rows() {
        let values = array![[1.0, 2.0]];
        assert!(matches!(
            sample_moments(&values, true),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn constant_column_gives_zero_variance_and_fails_inversion() {
        let values = array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]];
        let m = sample_moments(&values, true).unwrap();
        assert_eq!(m.covariance.as_array()[[1, 1]], 0.0);
        assert!(matches!(
            m.covariance.invert(),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn sample_covariance_is_consistent_monte_carlo() {
        let sigma = SpdMatrix::new(array![[2.0, 0.6], [0.6, 1.0]]).unwrap();
        let panel = gaussian_panel(10_000, &sigma, 42);
        let m = sample_moments(&panel, true).unwrap();
        let num = frobenius_distance(m.covariance.as_array(), sigma.as_array()).unwrap();
        let den = frobenius_distance(sigma.as_array(), &Array2::zeros((2, 2))).unwrap();
        assert!(num / den < 0.10, "relative error {}", num / den);
    }

    #[test]
    fn scatter_rescale_scales_covariance_only() {
        let m = MomentSummary::supplied(
            Array1::from_vec(vec![1.0, 2.0]),
            SpdMatrix::from_diag(&[3.0, 6.0]),
            50,
            true,
        )
        .unwrap();
        let s = m.rescaled_to_scatter(6.0).unwrap();
        assert_abs_diff_eq!(s.covariance.as_array()[[0, 0]], 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.covariance.as_array()[[1, 1]], 4.0, epsilon = 1e-15);
        assert_eq!(s.mean, m.mean);
        assert!(m.rescaled_to_scatter(2.0).is_err());
    }

    #[test]
    fn mahalanobis_basics() {
        let p = SpdMatrix::identity(2);
        let mu = array![0.0, 0.0];
        assert_eq!(mahalanobis(mu.view(), mu.view(), &p).unwrap(), 0.0);
        let x = array![3.0, 4.0];
        assert_abs_diff_eq!(
            mahalanobis(x.view(), mu.view(), &p).unwrap(),
            25.0,
            epsilon = 0.0
        );
    }

    #[test]
    fn mahalanobis_dimension_check() {
        let p = SpdMatrix::identity(2);
        let x = array![1.0, 2.0, 3.0];
        let mu = array![0.0, 0.0];
        assert!(matches!(
            mahalanobis(x.view(), mu.view(), &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mahalanobis_matches_double_loop_oracle() {
        let p = random_spd(4, 23);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let x = Array1::from_iter((0..4).map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v
            }));
            let mu = Array1::from_iter((0..4).map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v
            }));
            let mut oracle = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    oracle += (x[i] - mu[i]) * p.as_array()[[i, j]] * (x[j] - mu[j]);
                }
            }
            let got = mahalanobis(x.view(), mu.view(), &p).unwrap();
            assert_abs_diff_eq!(got, oracle, epsilon = 1e-12);
        }
    }

    #[test]
    fn frobenius_hand_cases() {
        let a = Array2::<f64>::eye(2);
        assert_eq!(frobenius_distance(&a, &a).unwrap(), 0.0);
        let b = Array2::<f64>::zeros((2, 2));
        assert_abs_diff_eq!(
            frobenius_distance(&a, &b).unwrap(),
            2.0_f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn mori_single_zero_observation() {
        let y = Array2::<f64>::zeros((1, 3));
        let k = mori_kurtosis(&y).unwrap();
        assert_abs_diff_eq!(k, -5.0 * Array2::<f64>::eye(3), epsilon = 0.0);
    }

    #[test]
    fn mori_vanishes_for_standard_gaussian() {
        let sigma = SpdMatrix::identity(3);
        let y = gaussian_panel(100_000, &sigma, 99);
        let k = mori_kurtosis(&y).unwrap();
        assert!(max_abs(&k) < 0.1, "max entry {}", max_abs(&k));
    }

    #[test]
    fn mori_matches_direct_sum_oracle() {
        let sigma = SpdMatrix::identity(2);
        let y = gaussian_panel(500, &sigma, 17);
        let k = mori_kurtosis(&y).unwrap();
        let (n, d) = y.dim();
        let mut oracle = Array2::<f64>::zeros((d, d));
        for t in 0..n {
            let mut norm2 = 0.0;
            for j in 0..d {
                norm2 += y[[t, j]] * y[[t, j]];
            }
            for i in 0..d {
                for j in 0..d {
                    oracle[[i, j]] += norm2 * y[[t, i]] * y[[t, j]] / n as f64;
                }
            }
        }
        for i in 0..d {
            oracle[[i, i]] -= (d + 2) as f64;
        }
        assert!(max_abs(&(&k - &oracle)) < 1e-12);
    }

    #[test]
    fn mean_mahalanobis_matches_dimension_for_gaussian_draws() {
        // E[(X−μ)ᵀ Σ⁻¹ (X−μ)] = d when Σ is the true covariance
        let sigma =
            SpdMatrix::new(array![[1.5, 0.4, 0.0], [0.4, 1.0, 0.2], [0.0, 0.2, 0.8]]).unwrap();
        let panel = gaussian_panel(100_000, &sigma, 3);
        let precision = sigma.invert().unwrap();
        let mu = Array1::<f64>::zeros(3);
        let deltas: Vec<f64> = panel
            .rows()
            .into_iter()
            .map(|row| mahalanobis(row, mu.view(), &precision).unwrap())
            .collect();
        let n = deltas.len() as f64;
        let mean = deltas.iter().sum::<f64>() / n;
        let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!((mean - 3.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn invert_residual_property(seed in 0u64..1000, d in 2usize..7) {
            let m = random_spd(d, seed);
            let inv = m.invert().unwrap();
            let resid = m.as_array().dot(inv.as_array()) - Array2::<f64>::eye(d);
            prop_assert!(max_abs(&resid) < 1e-8);
        }

        #[test]
        fn mahalanobis_translation_invariance(seed in 0u64..1000, shift in -10.0f64..10.0) {
            let p = random_spd(3, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let x = Array1::from_iter((0..3).map(|_| { let v: f64 = StandardNormal.sample(&mut rng); v }));
            let mu = Array1::from_iter((0..3).map(|_| { let v: f64 = StandardNormal.sample(&mut rng); v }));
            let base = mahalanobis(x.view(), mu.view(), &p).unwrap();
            let xs = &x + shift;
            let mus = &mu + shift;
            let shifted = mahalanobis(xs.view(), mus.view(), &p).unwrap();
            prop_assert!((base - shifted).abs() <= 1e-9 * (1.0 + base.abs()));
        }

        #[test]
        fn frobenius_metric_properties(sa in 0u64..500, sb in 0u64..500, sc in 0u64..500) {
            let a = random_spd(3, sa).into_array();
            let b = random_spd(3, sb).into_array();
            let c = random_spd(3, sc).into_array();
            let dab = frobenius_distance(&a, &b).unwrap();
            let dba = frobenius_distance(&b, &a).unwrap();
            let dac = frobenius_distance(&a, &c).unwrap();
            let dcb = frobenius_distance(&c, &b).unwrap();
            prop_assert!(dab >= 0.0);
            prop_assert_eq!(dab, dba);
            prop_assert!(dab <= dac + dcb + 1e-12);
        }

        #[test]
        fn frobenius_matches_entrywise_oracle(sa in 0u64..500, sb in 0u64..500) {
            let a = random_spd(3, sa).into_array();
            let b = random_spd(3, sb).into_array();
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    acc += (a[[i, j]] - b[[i, j]]).powi(2);
                }
            }
            let oracle = acc.sqrt();
            prop_assert!((frobenius_distance(&a, &b).unwrap() - oracle).abs() < 1e-12);
        }
    }
}
