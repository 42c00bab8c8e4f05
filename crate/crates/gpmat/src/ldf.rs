//! The local dependence function (LDF): mixed second partial derivatives of
//! a log-density, `γ_pq(x) = ∂² log f(x) / ∂x_p ∂x_q`.
//!
//! For the multivariate t-Student density the LDF has the closed form
//!
//! ```text
//! γ(x) = -((ν+d)/ν) · [ Σ⁻¹/(1+δ/ν)  -  2·Σ⁻¹(x-μ)(x-μ)ᵀΣ⁻¹ / (ν·(1+δ/ν)²) ]
//! ```
//!
//! with `δ(x) = (x-μ)ᵀΣ⁻¹(x-μ)`. Unlike the Gaussian case, whose LDF is the
//! constant `-Σ⁻¹`, the t LDF varies over the plane: the second term carries
//! the tail thickness. A third-order expansion of `log(1+δ/ν)` around
//! `δ = 0` yields [`ldf_t_taylor`], accurate while `|δ| < 1` and diverging
//! from the exact form outside that region.
//!
//! [`ldf_numeric`] evaluates the same object by central differences of any
//! log-density and serves as the independent oracle for the closed forms.

use ndarray::{Array1, Array2, ArrayView1};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::Error;
use crate::numerics::SpdMatrix;
use crate::util::fmt_g17;
use crate::Result;

/// Symmetric d×d matrix of mixed partials of a log-density at one point.
pub type LdfMatrix = Array2<f64>;

/// Default central-difference step: balances O(h²) truncation against
/// cancellation at f64 precision.
pub const DEFAULT_FD_STEP: f64 = 1e-4;

/// Location, scatter matrix and degrees of freedom of a multivariate
/// t-Student density. `nu` is any positive real; for `nu ≤ 2` the covariance
/// interpretation of the scatter fails, which is flagged but not rejected.
#[derive(Debug, Clone)]
pub struct TStudentParams {
    pub mu: Array1<f64>,
    pub sigma: SpdMatrix,
    pub nu: f64,
}

impl TStudentParams {
    pub fn new(mu: Array1<f64>, sigma: SpdMatrix, nu: f64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "degrees of freedom must be positive, got {nu}"
            )));
        }
        if mu.len() != sigma.dim() {
            return Err(Error::dim(sigma.dim(), mu.len(), "t-Student location"));
        }
        Ok(TStudentParams { mu, sigma, nu })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Whether `ν/(ν−2)·Σ` is a valid covariance for these parameters.
    pub fn covariance_defined(&self) -> bool {
        self.nu > 2.0
    }

    /// Bivariate zero-mean parameters with unit variances and correlation ρ.
    pub fn bivariate(rho: f64, nu: f64) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "correlation must satisfy |rho| < 1, got {rho}"
            )));
        }
        let sigma = SpdMatrix::new(ndarray::array![[1.0, rho], [rho, 1.0]])?;
        TStudentParams::new(Array1::zeros(2), sigma, nu)
    }
}

/// A t density with its factorizations precomputed, for repeated evaluation
/// over grids or samples.
#[derive(Debug, Clone)]
pub struct TStudentDensity {
    params: TStudentParams,
    precision: SpdMatrix,
    log_norm: f64,
}

impl TStudentDensity {
    pub fn new(params: TStudentParams) -> Result<Self> {
        let d = params.dim() as f64;
        let nu = params.nu;
        let log_det = params.sigma.log_det()?;
        let precision = params.sigma.invert()?;
        let log_norm = ln_gamma((nu + d) / 2.0)
            - ln_gamma(nu / 2.0)
            - (d / 2.0) * (nu * std::f64::consts::PI).ln()
            - 0.5 * log_det;
        Ok(TStudentDensity {
            params,
            precision,
            log_norm,
        })
    }

    pub fn params(&self) -> &TStudentParams {
        &self.params
    }

    fn delta_and_grad(&self, x: ArrayView1<f64>) -> (f64, Array1<f64>) {
        let d = self.params.dim();
        let p = self.precision.as_array();
        let mut g = Array1::<f64>::zeros(d);
        let mut delta = 0.0;
        for i in 0..d {
            let mut gi = 0.0;
            for j in 0..d {
                gi += p[[i, j]] * (x[j] - self.params.mu[j]);
            }
            g[i] = gi;
            delta += (x[i] - self.params.mu[i]) * gi;
        }
        (delta, g)
    }

    /// `log f(x) = log k − ((ν+d)/2)·log(1 + δ(x)/ν)`.
    pub fn log_density(&self, x: ArrayView1<f64>) -> Result<f64> {
        let d = self.params.dim();
        if x.len() != d {
            return Err(Error::dim(d, x.len(), "log-density point"));
        }
        let (delta, _) = self.delta_and_grad(x);
        let nu = self.params.nu;
        Ok(self.log_norm - 0.5 * (nu + d as f64) * (delta / nu).ln_1p())
    }

    /// Exact t LDF at `x`.
    pub fn ldf_exact(&self, x: ArrayView1<f64>) -> Result<LdfMatrix> {
        let d = self.params.dim();
        if x.len() != d {
            return Err(Error::dim(d, x.len(), "LDF point"));
        }
        let nu = self.params.nu;
        let (delta, g) = self.delta_and_grad(x);
        let w = 1.0 / (1.0 + delta / nu);
        let p = self.precision.as_array();
        let scale = -(nu + d as f64) / nu;
        let mut out = Array2::<f64>::zeros((d, d));
        for i in 0..d {
            for j in i..d {
                let v = scale * (p[[i, j]] * w - 2.0 * g[i] * g[j] * w * w / nu);
                out[[i, j]] = v;
                out[[j, i]] = v;
            }
        }
        Ok(out)
    }

    /// Third-order Taylor LDF at `x`; meaningful only while `|δ(x)| < 1`.
    pub fn ldf_taylor(&self, x: ArrayView1<f64>) -> Result<LdfMatrix> {
        let d = self.params.dim();
        if x.len() != d {
            return Err(Error::dim(d, x.len(), "LDF point"));
        }
        let nu = self.params.nu;
        let (delta, g) = self.delta_and_grad(x);
        let u = delta / nu;
        let p = self.precision.as_array();
        // δ' = 2g, δ'' = 2Σ⁻¹ under the third-order log expansion:
        //   γ ≈ -((ν+d)/2)·[ ν⁻¹δ''(1 − u + u²) − ν⁻²δ'δ'ᵀ(1 − 2u) ]
        let c_first = (2.0 / nu) * (1.0 - u + u * u);
        let c_second = (4.0 / (nu * nu)) * (1.0 - 2.0 * u);
        let scale = -0.5 * (nu + d as f64);
        let mut out = Array2::<f64>::zeros((d, d));
        for i in 0..d {
            for j in i..d {
                let v = scale * (c_first * p[[i, j]] - c_second * g[i] * g[j]);
                out[[i, j]] = v;
                out[[j, i]] = v;
            }
        }
        Ok(out)
    }
}

/// Log-density of the t distribution (free-function form of
/// [`TStudentDensity::log_density`]).
pub fn t_log_density(x: ArrayView1<f64>, params: &TStudentParams) -> Result<f64> {
    TStudentDensity::new(params.clone())?.log_density(x)
}

/// Exact LDF of the t distribution at `x`.
pub fn ldf_t_exact(x: ArrayView1<f64>, params: &TStudentParams) -> Result<LdfMatrix> {
    TStudentDensity::new(params.clone())?.ldf_exact(x)
}

/// Taylor-approximated LDF of the t distribution at `x`.
pub fn ldf_t_taylor(x: ArrayView1<f64>, params: &TStudentParams) -> Result<LdfMatrix> {
    TStudentDensity::new(params.clone())?.ldf_taylor(x)
}

/// Gaussian LDF: the constant matrix `−Σ⁻¹`, independent of the point.
pub fn ldf_gaussian(sigma: &SpdMatrix) -> Result<LdfMatrix> {
    Ok(-sigma.invert()?.into_array())
}

/// Central-difference LDF of an arbitrary log-density.
///
/// Off-diagonal entries use the four-point cross stencil
/// `[f₊₊ − f₊₋ − f₋₊ + f₋₋]/(4h²)`; the diagonal uses the three-point second
/// difference. The result is symmetrized. Errors with
/// [`Error::NonFiniteDensity`] if any stencil evaluation is non-finite.
pub fn ldf_numeric<F>(log_density: F, x: ArrayView1<f64>, h: f64) -> Result<LdfMatrix>
where
    F: Fn(ArrayView1<f64>) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let d = x.len();
    let mut point = x.to_owned();
    let eval = |point: &Array1<f64>| -> Result<f64> {
        let v = log_density(point.view());
        if !v.is_finite() {
            return Err(Error::NonFiniteDensity {
                context: format!("at {:?}", point.as_slice().unwrap_or(&[])),
            });
        }
        Ok(v)
    };
    let f0 = eval(&point)?;
    let mut out = Array2::<f64>::zeros((d, d));
    for p in 0..d {
        let xp = x[p];
        point[p] = xp + h;
        let fp = eval(&point)?;
        point[p] = xp - h;
        let fm = eval(&point)?;
        point[p] = xp;
        out[[p, p]] = (fp - 2.0 * f0 + fm) / (h * h);
        for q in (p + 1)..d {
            let xq = x[q];
            point[p] = xp + h;
            point[q] = xq + h;
            let fpp = eval(&point)?;
            point[q] = xq - h;
            let fpm = eval(&point)?;
            point[p] = xp - h;
            point[q] = xq + h;
            let fmp = eval(&point)?;
            point[q] = xq - h;
            let fmm = eval(&point)?;
            point[p] = xp;
            point[q] = xq;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            out[[p, q]] = v;
            out[[q, p]] = v;
        }
    }
    Ok(out)
}

/// Grid axis for [`ldf_grid`]: `steps` evenly spaced values on
/// `[min, max]`, inclusive.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        let n = self.steps;
        (0..n)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Tabulated `γ_pq(x_p, x_q | rest fixed)` over a rectangular grid, the data
/// behind a contour plot of the LDF.
#[derive(Debug, Clone)]
pub struct LdfGrid {
    pub pair: (usize, usize),
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    /// Shape `(x_values.len(), y_values.len())`.
    pub values: Array2<f64>,
    pub conditioning_point: Array1<f64>,
}

impl LdfGrid {
    /// CSV export: header `x,y,gamma`, one row per cell, row-major over x
    /// then y, 17-significant-digit floats.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,gamma\n");
        for (i, &x) in self.x_values.iter().enumerate() {
            for (j, &y) in self.y_values.iter().enumerate() {
                out.push_str(&fmt_g17(x));
                out.push(',');
                out.push_str(&fmt_g17(y));
                out.push(',');
                out.push_str(&fmt_g17(self.values[[i, j]]));
                out.push('\n');
            }
        }
        out
    }
}

/// Evaluate the `(p,q)` entry of the exact t LDF over a 2-D grid, all other
/// coordinates pinned at `conditioning_point`.
pub fn ldf_grid(
    params: &TStudentParams,
    pair: (usize, usize),
    x_axis: GridAxis,
    y_axis: GridAxis,
    conditioning_point: &Array1<f64>,
) -> Result<LdfGrid> {
    let d = params.dim();
    let (p, q) = pair;
    if p == q {
        return Err(Error::InvalidArgument(
            "grid pair must name two distinct variables".into(),
        ));
    }
    if p >= d || q >= d {
        return Err(Error::dim(d, p.max(q), "grid pair index"));
    }
    if x_axis.steps < 2 || y_axis.steps < 2 {
        return Err(Error::InvalidArgument(
            "grid axes need at least 2 steps".into(),
        ));
    }
    if conditioning_point.len() != d {
        return Err(Error::dim(
            d,
            conditioning_point.len(),
            "conditioning point",
        ));
    }
    let density = TStudentDensity::new(params.clone())?;
    let xs = x_axis.values();
    let ys = y_axis.values();
    let mut values = Array2::<f64>::zeros((xs.len(), ys.len()));
    let mut point = conditioning_point.clone();
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            point[p] = x;
            point[q] = y;
            let gamma = density.ldf_exact(point.view())?;
            values[[i, j]] = gamma[[p, q]];
        }
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteDensity {
            context: format!("grid produced non-finite value {bad}"),
        });
    }
    Ok(LdfGrid {
        pair,
        x_values: xs,
        y_values: ys,
        values,
        conditioning_point: conditioning_point.clone(),
    })
}
