//! Counter-based coefficient streams and Monte-Carlo covariance checks.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_Z_THRESHOLD: f64 = 4.0;

/// Distribution of the unit-variance coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientLaw {
    #[default]
    Gaussian,
    Rademacher,
}

/// Independent families of streams sharing one user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    /// KL coefficients of the synthesized process.
    Data,
    /// Null-mode fill coefficients of the white noise.
    Fill,
}

impl StreamDomain {
    fn tag(self) -> u64 {
        match self {
            StreamDomain::Data => 0x6461_7461,
            StreamDomain::Fill => 0x6669_6c6c,
        }
    }
}

/// Deterministic zero-mean unit-variance draw for realization `r`, mode `n`.
pub fn coefficient_stream(seed: u64, law: CoefficientLaw, r: u64, n: u64) -> f64 {
    domain_stream(seed, StreamDomain::Data, law, r, n)
}

/// Draw keyed by `(seed, domain, r, n)`; each key seeds its own ChaCha8 block
/// stream, so the value does not depend on evaluation order.
pub fn domain_stream(seed: u64, domain: StreamDomain, law: CoefficientLaw, r: u64, n: u64) -> f64 {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.tag().to_le_bytes());
    key[16..24].copy_from_slice(&r.to_le_bytes());
    key[24..].copy_from_slice(&n.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    match law {
        CoefficientLaw::Gaussian => rng.sample(StandardNormal),
        CoefficientLaw::Rademacher => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
    }
}

/// Sample covariance of the columns of a realization-major matrix.
#[derive(Debug, Clone)]
pub struct EmpiricalCovariance {
    pub covariance: DMatrix<f64>,
    /// Standard error of each entry from the sample fourth moments.
    pub standard_error: DMatrix<f64>,
    pub realizations: usize,
}

/// Unbiased covariance of `evaluations` (rows = realizations).
pub fn empirical_covariance(evaluations: &DMatrix<f64>) -> Result<EmpiricalCovariance> {
    let r = evaluations.nrows();
    if r < 2 {
        return Err(Error::InsufficientSamples { required: 2, found: r });
    }
    let k = evaluations.ncols();
    let centered: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let col = evaluations.column(j);
            let mean = col.iter().sum::<f64>() / r as f64;
            col.iter().map(|x| x - mean).collect()
        })
        .collect();

    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a..k).map(move |b| (a, b))).collect();
    let entries: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (mut s, mut s2) = (0.0, 0.0);
            for (x, y) in centered[a].iter().zip(&centered[b]) {
                let p = x * y;
                s += p;
                s2 += p * p;
            }
            let rf = r as f64;
            let mean = s / rf;
            let var = (s2 / rf - mean * mean).max(0.0);
            (s / (rf - 1.0), (var / rf).sqrt())
        })
        .collect();

    let mut covariance = DMatrix::zeros(k, k);
    let mut standard_error = DMatrix::zeros(k, k);
    for (&(a, b), &(c, se)) in pairs.iter().zip(&entries) {
        covariance[(a, b)] = c;
        covariance[(b, a)] = c;
        standard_error[(a, b)] = se;
        standard_error[(b, a)] = se;
    }
    Ok(EmpiricalCovariance { covariance, standard_error, realizations: r })
}

/// z-score screen of an empirical covariance against its analytic value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub empirical: Vec<Vec<f64>>,
    pub analytic: Vec<Vec<f64>>,
    pub standard_error: Vec<Vec<f64>>,
    pub max_abs_z: f64,
    pub max_abs_diff: f64,
    pub z_threshold: f64,
    pub pass: bool,
    pub realizations: usize,
    pub seed: u64,
}

/// Differences smaller than this (relative to the largest analytic entry)
/// are treated as exact when the standard error vanishes.
const ZERO_SE_TOL: f64 = 1e-12;

/// Per-entry z-scores; passes iff `max |z| <= z_threshold`.
pub fn compare(
    empirical: &EmpiricalCovariance,
    analytic: &DMatrix<f64>,
    z_threshold: f64,
    seed: u64,
) -> Result<CovarianceReport> {
    let emp = &empirical.covariance;
    if emp.shape() != analytic.shape() {
        return Err(Error::ShapeMismatch { expected: analytic.nrows(), found: emp.nrows() });
    }
    let scale = analytic.amax().max(emp.amax()).max(f64::MIN_POSITIVE);
    let mut max_z = 0.0f64;
    let mut max_diff = 0.0f64;
    for (i, (e, a)) in emp.iter().zip(analytic.iter()).enumerate() {
        let diff = (e - a).abs();
        max_diff = max_diff.max(diff);
        let se = empirical.standard_error.as_slice()[i];
        let z = if se > 0.0 {
            diff / se
        } else if diff <= ZERO_SE_TOL * scale {
            0.0
        } else {
            f64::MAX
        };
        max_z = max_z.max(z);
    }
    Ok(CovarianceReport {
        empirical: rows(emp),
        analytic: rows(analytic),
        standard_error: rows(&empirical.standard_error),
        max_abs_z: max_z,
        max_abs_diff: max_diff,
        z_threshold,
        pass: max_z <= z_threshold,
        realizations: empirical.realizations,
        seed,
    })
}

/// `max_jk |a_jk - b_jk| / sqrt(se_a^2 + se_b^2)` for two independent estimates.
pub fn joint_max_z(a: &EmpiricalCovariance, b: &EmpiricalCovariance) -> f64 {
    a.covariance
        .iter()
        .zip(b.covariance.iter())
        .zip(a.standard_error.iter().zip(b.standard_error.iter()))
        .map(|((x, y), (sa, sb))| {
            let se = (sa * sa + sb * sb).sqrt();
            let d = (x - y).abs();
            if se > 0.0 {
                d / se
            } else if d == 0.0 {
                0.0
            } else {
                f64::MAX
            }
        })
        .fold(0.0, f64::max)
}

/// Jarque-Bera normality statistic `R/6 (S^2 + (K-3)^2/4)`.
pub fn jarque_bera(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return 0.0;
    }
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2);
    n / 6.0 * (skew * skew + (kurt - 3.0).powi(2) / 4.0)
}

pub(crate) fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}
