//! Orthonormal Hermite functions and the sampled test-function bank.
//!
//! The one-dimensional functions are evaluated with the normalized
//! three-term recurrence
//!
//! ```text
//! h_0(x) = pi^{-1/4} exp(-x^2/2)
//! h_1(x) = sqrt(2) x h_0(x)
//! h_n(x) = sqrt(2/n) x h_{n-1}(x) - sqrt((n-1)/n) h_{n-2}(x)
//! ```
//!
//! which never forms the (overflowing) Hermite polynomials explicitly.
//! In `d > 1` the bank holds tensor products `h_a (x) h_b (x) ...`
//! enumerated by max-degree shells (see [`multi_indices`]).

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Gram tolerance above which a bank is reported as under-resolved.
pub const UNDER_RESOLVED_TOL: f64 = 1e-6;

/// `h_n(x)`.
pub fn hermite_function(n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    for k in 1..=n {
        let k = k as f64;
        let next = (2.0 / k).sqrt() * x * cur - ((k - 1.0) / k).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `[h_0(x), ..., h_{n_max}(x)]` in one recurrence sweep.
pub fn hermite_functions_upto(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp());
    if n_max >= 1 {
        out.push(std::f64::consts::SQRT_2 * x * out[0]);
    }
    for k in 2..=n_max {
        let kf = k as f64;
        let v = (2.0 / kf).sqrt() * x * out[k - 1] - ((kf - 1.0) / kf).sqrt() * out[k - 2];
        out.push(v);
    }
    out
}

/// First `count` multi-indices in `dim` dimensions.
///
/// Ordered by shell `max(a)`, then total degree, then lexicographically on
/// the reversed tuple. In 2-d this starts `(0,0), (1,0), (0,1), (1,1), (2,0)`.
pub fn multi_indices(count: usize, dim: usize) -> Vec<Vec<usize>> {
    if dim == 1 {
        return (0..count).map(|n| vec![n]).collect();
    }
    let mut shell = 0usize;
    loop {
        let side = shell + 1;
        if side.pow(dim as u32) >= count {
            break;
        }
        shell += 1;
    }
    let side = shell + 1;
    let mut all: Vec<Vec<usize>> = (0..side.pow(dim as u32))
        .map(|mut i| {
            let mut v = vec![0; dim];
            for slot in v.iter_mut() {
                *slot = i % side;
                i /= side;
            }
            v
        })
        .collect();
    all.sort_by(|a, b| {
        let ka = (a.iter().max(), a.iter().sum::<usize>());
        let kb = (b.iter().max(), b.iter().sum::<usize>());
        ka.cmp(&kb).then_with(|| a.iter().rev().cmp(b.iter().rev()))
    });
    all.truncate(count);
    all
}

/// Test functions sampled on a grid, one member per column.
#[derive(Debug, Clone)]
pub struct TestFunctionBank {
    samples: DMatrix<f64>,
    labels: Vec<Vec<usize>>,
    gram: DMatrix<f64>,
}

/// Samples the first `count` tensor Hermite functions on `grid`.
pub fn build_bank(count: usize, grid: &Grid) -> Result<TestFunctionBank> {
    let bank = build_bank_unchecked(count, grid)?;
    let dev = bank.gram_deviation();
    if dev > UNDER_RESOLVED_TOL {
        return Err(Error::UnderResolved { deviation: dev });
    }
    Ok(bank)
}

/// As [`build_bank`] but without the resolution check.
pub fn build_bank_unchecked(count: usize, grid: &Grid) -> Result<TestFunctionBank> {
    if count == 0 {
        return Err(Error::InvalidParameter("bank size must be at least 1".into()));
    }
    let labels = multi_indices(count, grid.dim());
    let n_max = labels.iter().flatten().copied().max().unwrap_or(0);
    // per-axis tables, indexed [axis node][order]
    let table: Vec<Vec<f64>> =
        grid.axis_nodes().iter().map(|&x| hermite_functions_upto(n_max, x)).collect();
    let mut samples = DMatrix::zeros(grid.len(), count);
    for i in 0..grid.len() {
        let ax = grid.axis_indices(i);
        for (j, label) in labels.iter().enumerate() {
            samples[(i, j)] = label.iter().zip(&ax).map(|(&n, &k)| table[k][n]).product();
        }
    }
    Ok(TestFunctionBank::from_samples_labeled(samples, labels, grid))
}

impl TestFunctionBank {
    /// Wraps user-provided samples (one column per test function).
    pub fn from_samples(samples: DMatrix<f64>, grid: &Grid) -> Result<Self> {
        grid.check_len(samples.nrows())?;
        let labels = (0..samples.ncols()).map(|j| vec![j]).collect();
        Ok(Self::from_samples_labeled(samples, labels, grid))
    }

    fn from_samples_labeled(samples: DMatrix<f64>, labels: Vec<Vec<usize>>, grid: &Grid) -> Self {
        let weighted = DMatrix::from_fn(samples.nrows(), samples.ncols(), |i, j| {
            samples[(i, j)] * grid.weights()[i]
        });
        let gram = samples.transpose() * weighted;
        TestFunctionBank { samples, labels, gram }
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn member(&self, j: usize) -> Vec<f64> {
        self.samples.column(j).iter().copied().collect()
    }

    pub fn labels(&self) -> &[Vec<usize>] {
        &self.labels
    }

    /// Discrete `L^2` Gram matrix.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// `max |G - I|`.
    pub fn gram_deviation(&self) -> f64 {
        let k = self.len();
        (&self.gram - DMatrix::identity(k, k)).amax()
    }

    /// Node-major CSV: one row per node, one column per member.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string()];
        header.extend(self.labels.iter().map(|l| {
            let s: Vec<String> = l.iter().map(|n| n.to_string()).collect();
            format!("h_{}", s.join("_"))
        }));
        wtr.write_record(&header)?;
        for i in 0..self.samples.nrows() {
            let mut row = vec![i.to_string()];
            row.extend(self.samples.row(i).iter().map(|v| format!("{v:e}")));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
