//! Shared fixtures for the integration suites.

// each test binary uses a different subset of this module
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use gpmat::data::next_date;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

pub const FF30_NAMES: [&str; 30] = [
    "Food", "Beer", "Smoke", "Games", "Books", "Hshld", "Clths", "Hlth", "Chems", "Txtls", "Cnstr",
    "Steel", "FabPr", "ElcEq", "Autos", "Carry", "Mines", "Coal", "Oil", "Util", "Telcm", "Servs",
    "BusEq", "Paper", "Trans", "Whlsl", "Rtail", "Meals", "Fin", "Other",
];

/// A panel in the Kenneth French daily layout: preamble, name header,
/// `YYYYMMDD` percent rows (two with sentinel cells), then a trailing
/// equal-weighted section that loaders must ignore.
///
/// `clean_rows` is the number of rows surviving sentinel filtering. Values
/// are correlated t(4) draws at daily-return scale, written as percents.
pub fn write_ff30_file(path: &std::path::Path, clean_rows: usize) {
    let n = 30usize;
    let sentinel_rows = 5usize;
    let total = clean_rows + sentinel_rows;
    // equicorrelated scatter: sqrt decomposition of 0.7·I + 0.3·11ᵀ
    let rho = 0.3_f64;
    let nu = 4.0_f64;
    let daily_sd = 0.012_f64;
    let scatter_scale = daily_sd * ((nu - 2.0) / nu).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(0xff30);
    let chi2 = ChiSquared::new(nu).unwrap();
    let mut body = String::with_capacity(total * n * 8);
    let (mut y, mut m, mut d) = (1926u32, 7u32, 1u32);
    // five sentinel rows spread through the file, whatever its length
    let sentinel_at: Vec<usize> = (1..=sentinel_rows).map(|i| i * total / 6).collect();
    for row in 0..total {
        body.push_str(&format!("{y:04}{m:02}{d:02}"));
        let w: f64 = chi2.sample(&mut rng);
        let tail = (nu / w).sqrt();
        let common: f64 = StandardNormal.sample(&mut rng);
        let is_sentinel = sentinel_at.contains(&row);
        for j in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let x = scatter_scale * tail * (rho.sqrt() * common + (1.0 - rho).sqrt() * z);
            if is_sentinel && j == 7 {
                body.push_str("  -99.99");
            } else {
                body.push_str(&format!(" {:7.4}", 100.0 * x));
            }
        }
        body.push('\n');
        let next = next_date(y, m, d);
        y = next.0;
        m = next.1;
        d = next.2;
    }
    let mut text = String::new();
    text.push_str("  This file was created from raw data for test purposes.\n");
    text.push_str("  Missing data are indicated by -99.99.\n\n");
    text.push_str("  Average Value Weighted Returns -- Daily\n");
    for name in FF30_NAMES {
        text.push_str(&format!("{name:>8}"));
    }
    text.push('\n');
    text.push_str(&body);
    text.push('\n');
    text.push_str("  Average Equal Weighted Returns -- Daily\n");
    for name in FF30_NAMES {
        text.push_str(&format!("{name:>8}"));
    }
    text.push('\n');
    text.push_str("19260701    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99    9.99\n");
    std::fs::write(path, text).unwrap();
}

/// Path to the daily FF30 panel used by the backtest criteria: the real file
/// if `GPMAT_FF30_FILE` points at one, otherwise a synthetic panel in the
/// same layout with T = 25100 loadable rows (generated once per process).
pub fn ff30_path() -> (PathBuf, bool) {
    if let Ok(real) = std::env::var("GPMAT_FF30_FILE") {
        let p = PathBuf::from(real);
        if p.exists() {
            return (p, true);
        }
    }
    static SYNTH: OnceLock<PathBuf> = OnceLock::new();
    let p = SYNTH.get_or_init(|| {
        let dir = std::env::temp_dir().join("gpmat-acceptance");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ff30_synthetic.txt");
        if !path.exists() {
            write_ff30_file(&path, 25_100);
        }
        path
    });
    (p.clone(), false)
}

/// Random SPD matrix `AᵀA/d + I` for test scatters.
pub fn random_spd(d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Array2::from_shape_fn((d, d), |_| {
        let v: f64 = StandardNormal.sample(&mut rng);
        v
    });
    a.t().dot(&a) / d as f64 + Array2::<f64>::eye(d)
}

/// n×d panel of exact N(0, Σ) draws.
pub fn gaussian_panel(n: usize, sigma: &gpmat::numerics::SpdMatrix, seed: u64) -> Array2<f64> {
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
