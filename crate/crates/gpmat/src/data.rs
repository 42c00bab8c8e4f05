//! Return-panel ingestion and synthetic data generation.
//!
//! Three input paths produce the same [`ReturnsMatrix`]: a generic
//! `date,<asset>,...` CSV of decimal returns, a positive price panel run
//! through [`log_returns`], and the Kenneth French daily industry layout
//! (percent returns, `-99.99`/`-999` sentinels, trailing annual sections).
//! Rows containing missing data are dropped whole so windows stay aligned;
//! the drop count is reported back to the caller.
//!
//! [`simulate_t`] draws multivariate t samples (`X = μ + Z·√(ν/W)` with
//! `Z ~ N(0,Σ)`, `W ~ χ²_ν`) from a ChaCha8 stream seeded explicitly, so
//! every oracle and fixture in the test suite is reproducible.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::Error;
use crate::ldf::TStudentParams;
use crate::util::fmt_g17;
use crate::Result;

/// T×N panel of per-period decimal returns with date and asset labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsMatrix {
    pub dates: Vec<String>,
    pub assets: Vec<String>,
    pub values: Array2<f64>,
}

impl ReturnsMatrix {
    pub fn new(dates: Vec<String>, assets: Vec<String>, values: Array2<f64>) -> Result<Self> {
        let (t, n) = values.dim();
        if t == 0 || n == 0 {
            return Err(Error::InvalidArgument(
                "returns panel must have at least one row and one column".into(),
            ));
        }
        if dates.len() != t {
            return Err(Error::dim(t, dates.len(), "date labels"));
        }
        if assets.len() != n {
            return Err(Error::dim(n, assets.len(), "asset labels"));
        }
        for (i, w) in dates.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::UnsortedDates {
                    path: "<memory>".into(),
                    line: i + 2,
                    date: w[1].clone(),
                });
            }
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "returns panel contains non-finite value {bad}"
            )));
        }
        Ok(ReturnsMatrix {
            dates,
            assets,
            values,
        })
    }

    pub fn n_periods(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_assets(&self) -> usize {
        self.values.ncols()
    }

    /// Copy of the row block `[start, start+len)`, used for rolling windows.
    pub fn window(&self, start: usize, len: usize) -> Array2<f64> {
        self.values
            .slice(ndarray::s![start..start + len, ..])
            .to_owned()
    }

    /// The generic CSV layout with 17-significant-digit floats.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str("date");
        for a in &self.assets {
            out.push(',');
            out.push_str(a);
        }
        out.push('\n');
        for (i, date) in self.dates.iter().enumerate() {
            out.push_str(date);
            for j in 0..self.n_assets() {
                out.push(',');
                out.push_str(&fmt_g17(self.values[[i, j]]));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Positive price panel; the precursor of [`log_returns`].
#[derive(Debug, Clone)]
pub struct PricePanel {
    pub dates: Vec<String>,
    pub assets: Vec<String>,
    pub values: Array2<f64>,
}

fn read_lines(path: &std::path::Path) -> Result<Vec<String>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(text.lines().map(|l| l.to_string()).collect())
}

/// Load the generic `date,<asset1>,...` returns CSV.
pub fn load_returns_csv(path: &std::path::Path) -> Result<ReturnsMatrix> {
    let lines = read_lines(path)?;
    let pstr = path.display().to_string();
    let header = lines.first().ok_or_else(|| Error::Parse {
        path: pstr.clone(),
        line: 1,
        column: 1,
        message: "empty file".into(),
    })?;
    let mut cols = header.split(',');
    let first = cols.next().unwrap_or("").trim();
    if !first.eq_ignore_ascii_case("date") {
        return Err(Error::UnrecognizedLayout {
            path: pstr,
            message: format!("expected 'date' as first header column, got '{first}'"),
        });
    }
    let assets: Vec<String> = cols.map(|c| c.trim().to_string()).collect();
    if assets.is_empty() {
        return Err(Error::UnrecognizedLayout {
            path: pstr,
            message: "no asset columns in header".into(),
        });
    }
    let mut dates = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    for (lineno, line) in lines.iter().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != assets.len() + 1 {
            return Err(Error::Parse {
                path: pstr.clone(),
                line: lineno + 1,
                column: fields.len(),
                message: format!("expected {} fields, got {}", assets.len() + 1, fields.len()),
            });
        }
        let date = fields[0].trim().to_string();
        if let Some(prev) = dates.last() {
            if &date <= prev {
                return Err(Error::UnsortedDates {
                    path: pstr.clone(),
                    line: lineno + 1,
                    date,
                });
            }
        }
        for (j, field) in fields[1..].iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: pstr.clone(),
                line: lineno + 1,
                column: j + 2,
                message: format!("cannot parse '{}' as a return", field.trim()),
            })?;
            rows.push(v);
        }
        dates.push(date);
    }
    let t = dates.len();
    let values = Array2::from_shape_vec((t, assets.len()), rows)
        .expect("row collection matches declared shape");
    ReturnsMatrix::new(dates, assets, values)
}

/// Load a delimited price panel. Rows with any blank cell are dropped whole;
/// the second tuple element reports how many.
pub fn load_price_csv(
    path: &std::path::Path,
    date_column: &str,
    delimiter: char,
) -> Result<(PricePanel, usize)> {
    let lines = read_lines(path)?;
    let pstr = path.display().to_string();
    let header = lines.first().ok_or_else(|| Error::Parse {
        path: pstr.clone(),
        line: 1,
        column: 1,
        message: "empty file".into(),
    })?;
    let names: Vec<String> = header
        .split(delimiter)
        .map(|c| c.trim().to_string())
        .collect();
    let date_idx =
        names
            .iter()
            .position(|n| n == date_column)
            .ok_or_else(|| Error::UnrecognizedLayout {
                path: pstr.clone(),
                message: format!("date column '{date_column}' not found in header"),
            })?;
    let assets: Vec<String> = names
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != date_idx)
        .map(|(_, n)| n.clone())
        .collect();
    if assets.is_empty() {
        return Err(Error::UnrecognizedLayout {
            path: pstr,
            message: "no price columns in header".into(),
        });
    }
    let mut dates: Vec<String> = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    let mut dropped = 0usize;
    for (lineno, line) in lines.iter().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(delimiter).collect();
        if fields.len() != names.len() {
            return Err(Error::Parse {
                path: pstr.clone(),
                line: lineno + 1,
                column: fields.len(),
                message: format!("expected {} fields, got {}", names.len(), fields.len()),
            });
        }
        if fields.iter().any(|f| f.trim().is_empty()) {
            dropped += 1;
            continue;
        }
        let date = fields[date_idx].trim().to_string();
        if let Some(prev) = dates.last() {
            if &date <= prev {
                return Err(Error::UnsortedDates {
                    path: pstr.clone(),
                    line: lineno + 1,
                    date,
                });
            }
        }
        for (j, field) in fields.iter().enumerate() {
            if j == date_idx {
                continue;
            }
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                path: pstr.clone(),
                line: lineno + 1,
                column: j + 1,
                message: format!("cannot parse '{}' as a price", field.trim()),
            })?;
            if !(v > 0.0) {
                return Err(Error::NonPositivePrice {
                    path: pstr.clone(),
                    line: lineno + 1,
                    column: j + 1,
                    value: v,
                });
            }
            rows.push(v);
        }
        dates.push(date);
    }
    let t = dates.len();
    let values = Array2::from_shape_vec((t, assets.len()), rows)
        .expect("row collection matches declared shape");
    Ok((
        PricePanel {
            dates,
            assets,
            values,
        },
        dropped,
    ))
}

/// Log returns `r_t = ln(P_t / P_{t−1})` of a price panel.
pub fn log_returns(prices: &PricePanel) -> Result<ReturnsMatrix> {
    let (t, n) = prices.values.dim();
    if t < 2 {
        return Err(Error::InsufficientData { needed: 2, got: t });
    }
    let mut values = Array2::<f64>::zeros((t - 1, n));
    for i in 1..t {
        for j in 0..n {
            values[[i - 1, j]] = (prices.values[[i, j]] / prices.values[[i - 1, j]]).ln();
        }
    }
    ReturnsMatrix::new(prices.dates[1..].to_vec(), prices.assets.clone(), values)
}

fn is_ff_sentinel(v: f64) -> bool {
    (v + 99.99).abs() < 1e-9 || (v + 999.0).abs() < 1e-6 || v <= -99.0
}

/// Load a Kenneth French daily industry file: preamble junk, a whitespace
/// header of industry names, then `YYYYMMDD` rows of percent returns.
/// Only the first daily block is read; rows containing sentinels are dropped
/// (count returned); percents are divided by 100.
pub fn load_ff_industry(path: &std::path::Path) -> Result<(ReturnsMatrix, usize)> {
    let lines = read_lines(path)?;
    let pstr = path.display().to_string();

    let looks_like_data = |line: &str| -> bool {
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some(t0) if t0.len() == 8 && t0.chars().all(|c| c.is_ascii_digit()) => {
                toks.clone().count() > 0 && toks.all(|t| t.parse::<f64>().is_ok())
            }
            _ => false,
        }
    };

    let first_data = lines
        .iter()
        .position(|l| looks_like_data(l))
        .ok_or_else(|| Error::UnrecognizedLayout {
            path: pstr.clone(),
            message: "no YYYYMMDD daily block found".into(),
        })?;
    let n_cols = lines[first_data].split_whitespace().count() - 1;

    // The nearest preceding non-empty line is the industry-name header when
    // its token count matches; otherwise synthesize names.
    let assets: Vec<String> = lines[..first_data]
        .iter()
        .rev()
        .find(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(|s| s.to_string()).collect())
        .filter(|names: &Vec<String>| names.len() == n_cols)
        .unwrap_or_else(|| (1..=n_cols).map(|i| format!("A{i:02}")).collect());

    let mut dates: Vec<String> = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    let mut dropped = 0usize;
    for (lineno, line) in lines.iter().enumerate().skip(first_data) {
        if !looks_like_data(line) {
            break; // end of the daily block; annual sections follow
        }
        let mut toks = line.split_whitespace();
        let date = toks.next().expect("data line has a date").to_string();
        let vals: Vec<f64> = toks
            .map(|t| t.parse::<f64>().expect("data line pre-validated"))
            .collect();
        if vals.len() != n_cols {
            return Err(Error::Parse {
                path: pstr.clone(),
                line: lineno + 1,
                column: vals.len() + 1,
                message: format!("expected {n_cols} return fields, got {}", vals.len()),
            });
        }
        if vals.iter().any(|&v| is_ff_sentinel(v)) {
            dropped += 1;
            continue;
        }
        if let Some(prev) = dates.last() {
            if &date <= prev {
                return Err(Error::UnsortedDates {
                    path: pstr.clone(),
                    line: lineno + 1,
                    date,
                });
            }
        }
        for v in vals {
            rows.push(v / 100.0);
        }
        dates.push(date);
    }
    let t = dates.len();
    let values =
        Array2::from_shape_vec((t, n_cols), rows).expect("row collection matches declared shape");
    Ok((ReturnsMatrix::new(dates, assets, values)?, dropped))
}

/// Draw `n` multivariate t observations with the given location, scatter and
/// degrees of freedom.
///
/// Per observation the stream consumes `d` standard normals followed by one
/// χ²_ν variate: `X = μ + (L ε) · √(ν/W)` where `L` is the Cholesky factor of
/// the scatter matrix. Deterministic for a fixed seed. Note the covariance of
/// the draws is `ν/(ν−2) · Σ` for ν > 2, not Σ itself.
pub fn simulate_t(n: usize, params: &TStudentParams, seed: u64) -> Result<ReturnsMatrix> {
    if n < 1 {
        return Err(Error::InsufficientData { needed: 1, got: n });
    }
    let d = params.dim();
    let l = params.sigma.cholesky()?;
    let chi2 = ChiSquared::new(params.nu)
        .map_err(|e| Error::InvalidArgument(format!("chi-squared({}) sampler: {e}", params.nu)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Array2::<f64>::zeros((n, d));
    let mut z = vec![0.0_f64; d];
    for mut row in values.rows_mut() {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        let w: f64 = chi2.sample(&mut rng);
        let scale = (params.nu / w).sqrt();
        for i in 0..d {
            let mut s = 0.0;
            for k in 0..=i {
                s += l[[i, k]] * z[k];
            }
            row[i] = params.mu[i] + scale * s;
        }
    }
    let dates = synthetic_dates(n);
    let assets = (1..=d).map(|i| format!("A{i:02}")).collect();
    ReturnsMatrix::new(dates, assets, values)
}

/// Strictly increasing ISO-8601 calendar dates starting 2000-01-02.
pub fn synthetic_dates(n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    let (mut y, mut m, mut d) = (2000u32, 1u32, 1u32);
    for _ in 0..n {
        let (ny, nm, nd) = next_date(y, m, d);
        y = ny;
        m = nm;
        d = nd;
        out.push(format!("{y:04}-{m:02}-{d:02}"));
    }
    out
}

/// Gregorian successor of a (year, month, day) triple.
pub fn next_date(y: u32, m: u32, d: u32) -> (u32, u32, u32) {
    let leap = (y.is_multiple_of(4) && !y.is_multiple_of(100)) || y.is_multiple_of(400);
    let dim = match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if leap => 29,
        2 => 28,
        _ => unreachable!("month out of range"),
    };
    if d < dim {
        (y, m, d + 1)
    } else if m < 12 {
        (y, m + 1, 1)
    } else {
        (y + 1, 1, 1)
    }
}

/// Per-asset moment summary plus cross-asset averages.
#[derive(Debug, Clone)]
pub struct DescriptiveStats {
    pub t: usize,
    pub n: usize,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// `None` for assets with zero variance.
    pub skew: Vec<Option<f64>>,
    /// Non-excess kurtosis (Gaussian ≈ 3); `None` for zero-variance assets.
    pub kurt: Vec<Option<f64>>,
    pub avg_mean: f64,
    pub avg_sd: f64,
    pub avg_skew: f64,
    pub avg_kurt: f64,
}

/// Cross-asset descriptive statistics: per-asset mean, standard deviation,
/// skewness and non-excess kurtosis, averaged over assets.
pub fn descriptive_stats(r: &ReturnsMatrix) -> Result<DescriptiveStats> {
    let (t, n) = r.values.dim();
    if t < 4 {
        return Err(Error::InsufficientData { needed: 4, got: t });
    }
    let tf = t as f64;
    let mut mean = vec![0.0; n];
    let mut sd = vec![0.0; n];
    let mut skew: Vec<Option<f64>> = vec![None; n];
    let mut kurt: Vec<Option<f64>> = vec![None; n];
    for j in 0..n {
        let col = r.values.column(j);
        let mu: f64 = col.iter().sum::<f64>() / tf;
        let mut m2 = 0.0;
        let mut m3 = 0.0;
        let mut m4 = 0.0;
        for &x in col.iter() {
            let e = x - mu;
            m2 += e * e;
            m3 += e * e * e;
            m4 += e * e * e * e;
        }
        let var_unbiased = m2 / (tf - 1.0);
        m2 /= tf;
        m3 /= tf;
        m4 /= tf;
        mean[j] = mu;
        sd[j] = var_unbiased.sqrt();
        if m2 > 0.0 {
            skew[j] = Some(m3 / m2.powf(1.5));
            kurt[j] = Some(m4 / (m2 * m2));
        }
    }
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let avg_opt = |v: &[Option<f64>]| {
        let defined: Vec<f64> = v.iter().filter_map(|x| *x).collect();
        if defined.is_empty() {
            f64::NAN
        } else {
            avg(&defined)
        }
    };
    Ok(DescriptiveStats {
        t,
        n,
        avg_mean: avg(&mean),
        avg_sd: avg(&sd),
        avg_skew: avg_opt(&skew),
        avg_kurt: avg_opt(&kurt),
        mean,
        sd,
        skew,
        kurt,
    })
}
