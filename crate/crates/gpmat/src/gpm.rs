//! Generalized precision matrix estimators.
//!
//! Every estimator averages per-observation LDF terms of the t density over
//! a data window, with the window's own sample moments plugged in for (μ, Σ)
//! by default. Callers can supply external moments instead (e.g. the true
//! generating parameters in a Monte-Carlo oracle, or a rescaled scatter).
//!
//! With `P = Σ̂⁻¹`, `x̃ᵢ` the (optionally demeaned) observation,
//! `δᵢ = x̃ᵢᵀPx̃ᵢ`, `gᵢ = Px̃ᵢ` and `wᵢ = 1/(1+δᵢ/ν)`, the per-observation
//! term is
//!
//! ```text
//! Tᵢ = P·wᵢ − (2/ν)·gᵢgᵢᵀ·wᵢ²
//! ```
//!
//! (the negated LDF up to the common factor) and
//!
//! * signed:   `Ω̂       = ((ν+d)/ν) · mean(Tᵢ)`
//! * absolute: `Ω̂_Abs   = ((ν+d)/ν) · mean(|Tᵢ|)`  (elementwise)
//! * region:   `Ω̂_{A_t} = ((ν+d)/ν) · mean(Tᵢ · 1[x̃ᵢₚ² + x̃ᵢ_q² ≥ t])`
//! * Taylor:   moment assembly from `Σ̂^{−1/2}` and the Mori kurtosis of the
//!   standardized window (see [`estimate_gpm_taylor_with`]).
//!
//! None of these is guaranteed positive definite; that is checked at the
//! portfolio boundary, not here.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::ReturnsMatrix;
use crate::error::Error;
use crate::numerics::{mori_kurtosis, sample_moments, MomentSummary};
use crate::Result;

/// Which estimator produced a [`GpmEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpmKind {
    InverseCovariance,
    Signed,
    Abs,
    Region,
    Taylor,
}

impl GpmKind {
    pub fn label(&self) -> &'static str {
        match self {
            GpmKind::InverseCovariance => "inv",
            GpmKind::Signed => "signed",
            GpmKind::Abs => "abs",
            GpmKind::Region => "region",
            GpmKind::Taylor => "taylor",
        }
    }

    pub fn parse(token: &str) -> Result<Self> {
        match token {
            "inv" | "inverse_covariance" => Ok(GpmKind::InverseCovariance),
            "signed" => Ok(GpmKind::Signed),
            "abs" => Ok(GpmKind::Abs),
            "region" => Ok(GpmKind::Region),
            "taylor" => Ok(GpmKind::Taylor),
            other => Err(Error::InvalidArgument(format!(
                "unknown estimator '{other}' (expected inv|signed|abs|taylor|region)"
            ))),
        }
    }
}

/// A symmetric d×d precision-matrix estimate tagged with its provenance.
#[derive(Debug, Clone)]
pub struct GpmEstimate {
    pub matrix: Array2<f64>,
    pub kind: GpmKind,
    /// Degrees of freedom used; `None` for the inverse-covariance baseline.
    pub nu: Option<f64>,
    /// Window length the estimate was computed from.
    pub n: usize,
    pub region_threshold: Option<f64>,
    pub region_pair: Option<(usize, usize)>,
    /// How many observations fell inside the region indicator (Region kind).
    /// Zero means the estimate is the zero matrix and should be treated as an
    /// empty-region warning.
    pub region_count: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct GpmEstimateJson {
    kind: GpmKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    nu: Option<f64>,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    region_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    region_pair: Option<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    region_count: Option<usize>,
    matrix: Vec<Vec<f64>>,
}

impl GpmEstimate {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Vec<f64>> = self.matrix.rows().into_iter().map(|r| r.to_vec()).collect();
        let doc = GpmEstimateJson {
            kind: self.kind,
            nu: self.nu,
            n: self.n,
            region_threshold: self.region_threshold,
            region_pair: self.region_pair,
            region_count: self.region_count,
            matrix: rows,
        };
        serde_json::to_string_pretty(&doc).expect("estimate serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GpmEstimateJson = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("estimate JSON: {e}")))?;
        let d = doc.matrix.len();
        let mut matrix = Array2::<f64>::zeros((d, d));
        for (i, row) in doc.matrix.iter().enumerate() {
            if row.len() != d {
                return Err(Error::dim(d, row.len(), "estimate matrix row"));
            }
            for (j, &v) in row.iter().enumerate() {
                matrix[[i, j]] = v;
            }
        }
        Ok(GpmEstimate {
            matrix,
            kind: doc.kind,
            nu: doc.nu,
            n: doc.n,
            region_threshold: doc.region_threshold,
            region_pair: doc.region_pair,
            region_count: doc.region_count,
        })
    }
}

/// Standardize a window with the supplied moments: `yᵢ = Σ̂^{−1/2}(xᵢ − c)`
/// where `c` is the summary's centering vector (the sample mean unless the
/// caller opted out of demeaning).
pub fn standardize(values: &Array2<f64>, moments: &MomentSummary) -> Result<Array2<f64>> {
    let (n, d) = values.dim();
    if d != moments.covariance.dim() {
        return Err(Error::dim(moments.covariance.dim(), d, "standardize panel"));
    }
    let isr = moments.covariance.inv_sqrt()?;
    let isr = isr.as_array();
    let center = moments.centering();
    let mut out = Array2::<f64>::zeros((n, d));
    for (mut orow, xrow) in out.rows_mut().into_iter().zip(values.rows()) {
        for i in 0..d {
            let mut s = 0.0;
            for j in 0..d {
                s += isr[[i, j]] * (xrow[j] - center[j]);
            }
            orow[i] = s;
        }
    }
    Ok(out)
}

fn plug_in_moments(values: &Array2<f64>, nu: f64) -> Result<MomentSummary> {
    let (n, d) = values.dim();
    if n < d + 1 {
        return Err(Error::InsufficientData {
            needed: d + 1,
            got: n,
        });
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "degrees of freedom must be positive, got {nu}"
        )));
    }
    sample_moments(values, true)
}

/// Walk the per-observation terms `Tᵢ` in row order, invoking the visitor
/// with the term matrix and the demeaned observation. Sequential and
/// deterministic so repeated runs are bit-identical.
fn visit_terms<F>(
    values: &Array2<f64>,
    moments: &MomentSummary,
    nu: f64,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(&Array2<f64>, &Array1<f64>),
{
    let (n, d) = values.dim();
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if d != moments.covariance.dim() {
        return Err(Error::dim(moments.covariance.dim(), d, "estimation panel"));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "degrees of freedom must be positive, got {nu}"
        )));
    }
    let precision = moments.covariance.invert()?;
    let p = precision.as_array();
    let center = moments.centering();
    let mut term = Array2::<f64>::zeros((d, d));
    let mut xt = Array1::<f64>::zeros(d);
    let mut g = Array1::<f64>::zeros(d);
    for row in values.rows() {
        let mut delta = 0.0;
        for i in 0..d {
            xt[i] = row[i] - center[i];
        }
        for i in 0..d {
            let mut gi = 0.0;
            for j in 0..d {
                gi += p[[i, j]] * xt[j];
            }
            g[i] = gi;
            delta += xt[i] * gi;
        }
        let w = 1.0 / (1.0 + delta / nu);
        let tail = 2.0 * w * w / nu;
        for i in 0..d {
            for j in 0..d {
                term[[i, j]] = p[[i, j]] * w - tail * g[i] * g[j];
            }
        }
        visit(&term, &xt);
    }
    Ok(())
}

fn finish(mut acc: Array2<f64>, n: usize, d: usize, nu: f64) -> Array2<f64> {
    let scale = (nu + d as f64) / nu / n as f64;
    acc *= scale;
    // mirror the upper triangle to erase accumulation asymmetry
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (acc[[i, j]] + acc[[j, i]]);
            acc[[i, j]] = avg;
            acc[[j, i]] = avg;
        }
    }
    acc
}

/// Signed GPM from a window, moments supplied by the caller.
pub fn estimate_gpm_with(
    values: &Array2<f64>,
    moments: &MomentSummary,
    nu: f64,
) -> Result<GpmEstimate> {
    let (n, d) = values.dim();
    let mut acc = Array2::<f64>::zeros((d, d));
    visit_terms(values, moments, nu, |term, _| acc += term)?;
    Ok(GpmEstimate {
        matrix: finish(acc, n, d, nu),
        kind: GpmKind::Signed,
        nu: Some(nu),
        n,
        region_threshold: None,
        region_pair: None,
        region_count: None,
    })
}

/// Signed GPM with plug-in sample moments (demeaned window).
pub fn estimate_gpm(r: &ReturnsMatrix, nu: f64) -> Result<GpmEstimate> {
    estimate_gpm_with(&r.values, &plug_in_moments(&r.values, nu)?, nu)
}

/// Absolute GPM: elementwise absolute value inside the average, so entries
/// are nonnegative and zeros witness conditional independence.
pub fn estimate_gpm_abs_with(
    values: &Array2<f64>,
    moments: &MomentSummary,
    nu: f64,
) -> Result<GpmEstimate> {
    let (n, d) = values.dim();
    let mut acc = Array2::<f64>::zeros((d, d));
    visit_terms(values, moments, nu, |term, _| {
        acc.zip_mut_with(term, |a, &t| *a += t.abs());
    })?;
    Ok(GpmEstimate {
        matrix: finish(acc, n, d, nu),
        kind: GpmKind::Abs,
        nu: Some(nu),
        n,
        region_threshold: None,
        region_pair: None,
        region_count: None,
    })
}

pub fn estimate_gpm_abs(r: &ReturnsMatrix, nu: f64) -> Result<GpmEstimate> {
    estimate_gpm_abs_with(&r.values, &plug_in_moments(&r.values, nu)?, nu)
}

fn estimate_region_impl(
    values: &Array2<f64>,
    moments: &MomentSummary,
    nu: f64,
    threshold: f64,
    pair: (usize, usize),
    complement: bool,
) -> Result<GpmEstimate> {
    let (n, d) = values.dim();
    let (p, q) = pair;
    if p >= d || q >= d || p == q {
        return Err(Error::InvalidArgument(format!(
            "region pair ({p},{q}) invalid for dimension {d}"
        )));
    }
    if threshold < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "region threshold must be nonnegative, got {threshold}"
        )));
    }
    let mut acc = Array2::<f64>::zeros((d, d));
    let mut count = 0usize;
    visit_terms(values, moments, nu, |term, xt| {
        let r2 = xt[p] * xt[p] + xt[q] * xt[q];
        let inside = if complement {
            r2 < threshold
        } else {
            r2 >= threshold
        };
        if inside {
            acc += term;
            count += 1;
        }
    })?;
    Ok(GpmEstimate {
        matrix: finish(acc, n, d, nu),
        kind: GpmKind::Region,
        nu: Some(nu),
        n,
        region_threshold: Some(threshold),
        region_pair: Some(pair),
        region_count: Some(count),
    })
}

/// Region GPM: the average restricted to observations whose demeaned `(p,q)`
/// coordinates satisfy `x_p² + x_q² ≥ t`. An empty region yields the zero
/// matrix with `region_count = 0`.
pub fn estimate_gpm_region_with(
    values: &Array2<f64>,
    moments: &MomentSummary,
    nu: f64,
    threshold: f64,
    pair: (usize, usize),
) -> Result<GpmEstimate> {
    estimate_region_impl(values, moments, nu, threshold, pair, false)
}

pub fn estimate_gpm_region(
    r: &ReturnsMatrix,
    nu: f64,
    threshold: f64,
    pair: (usize, usize),
) -> Result<GpmEstimate> {
    estimate_gpm_region_with(
        &r.values,
        &plug_in_moments(&r.values, nu)?,
        nu,
        threshold,
        pair,
    )
}

/// Complement of [`estimate_gpm_region_with`] (indicator `x_p² + x_q² < t`),
/// so that region + complement = signed GPM, an exact partition of the sum.
pub fn estimate_gpm_region_complement_with(
    values: &Array2<f64>,
    moments: &MomentSummary,
    nu: f64,
    threshold: f64,
    pair: (usize, usize),
) -> Result<GpmEstimate> {
    estimate_region_impl(values, moments, nu, threshold, pair, true)
}

/// Taylor GPM: third-order moment assembly.
///
/// With `Y` the standardized window, `M̂ = K̂(Y) + (d+2)I` the raw Mori
/// moment, `m₁ = tr((1/n)ΣYᵢYᵢᵀ)`, `m₂ = tr M̂` and `V̂ = (1/n)ΣYᵢYᵢᵀ`:
///
/// ```text
/// Ω̂_Taylor = (ν+d) · Σ̂^{−1/2} [ (ν⁻¹ − ν⁻²m₁ + ν⁻³m₂)·I − 2ν⁻²·V̂ + 4ν⁻³·M̂ ] Σ̂^{−1/2}
/// ```
///
/// Under plug-in moments `V̂ ≈ I` and `m₁ ≈ d`, recovering the collected
/// closed form with constant `c = −1 + 2ν⁻¹ + ν⁻¹d − ν⁻²m₂`; keeping the
/// empirical moments makes the assembly equal the empirical average of the
/// Taylor LDF for any supplied moments.
pub fn estimate_gpm_taylor_with(
    values: &Array2<f64>,
    moments: &MomentSummary,
    nu: f64,
) -> Result<GpmEstimate> {
    let (n, d) = values.dim();
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "degrees of freedom must be positive, got {nu}"
        )));
    }
    let y = standardize(values, moments)?;
    let kurt = mori_kurtosis(&y)?;
    let mut m_raw = kurt;
    for i in 0..d {
        m_raw[[i, i]] += (d + 2) as f64;
    }
    let mut v_hat = Array2::<f64>::zeros((d, d));
    for row in y.rows() {
        for i in 0..d {
            for j in i..d {
                v_hat[[i, j]] += row[i] * row[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            v_hat[[i, j]] /= n as f64;
            v_hat[[j, i]] = v_hat[[i, j]];
        }
    }
    let m1: f64 = (0..d).map(|i| v_hat[[i, i]]).sum();
    let m2: f64 = (0..d).map(|i| m_raw[[i, i]]).sum();
    let scalar = 1.0 / nu - m1 / (nu * nu) + m2 / (nu * nu * nu);
    let mut bracket = 4.0 / (nu * nu * nu) * &m_raw - 2.0 / (nu * nu) * &v_hat;
    for i in 0..d {
        bracket[[i, i]] += scalar;
    }
    let isr = moments.covariance.inv_sqrt()?;
    let isr = isr.as_array();
    let mut matrix = isr.dot(&bracket).dot(isr);
    matrix *= nu + d as f64;
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (matrix[[i, j]] + matrix[[j, i]]);
            matrix[[i, j]] = avg;
            matrix[[j, i]] = avg;
        }
    }
    Ok(GpmEstimate {
        matrix,
        kind: GpmKind::Taylor,
        nu: Some(nu),
        n,
        region_threshold: None,
        region_pair: None,
        region_count: None,
    })
}

pub fn estimate_gpm_taylor(r: &ReturnsMatrix, nu: f64) -> Result<GpmEstimate> {
    estimate_gpm_taylor_with(&r.values, &plug_in_moments(&r.values, nu)?, nu)
}

/// The Gaussian baseline: the inverse of the sample covariance.
pub fn gpm_gaussian(moments: &MomentSummary) -> Result<GpmEstimate> {
    let inv = moments.covariance.invert()?;
    Ok(GpmEstimate {
        matrix: inv.into_array(),
        kind: GpmKind::InverseCovariance,
        nu: None,
        n: moments.n,
        region_threshold: None,
        region_pair: None,
        region_count: None,
    })
}
