//! Karhunen-Loeve decomposition of the covariance operator
//! `Q_Y f = int C_Y(., y) f(y) dmu(y)` by the symmetrized Nystrom method.
//!
//! With `v_i` the effective weights and `S = diag(sqrt(v_i))`, the discrete
//! operator `K diag(v)` is similar to the symmetric `B = S K S`. If
//! `B u_n = lambda_n u_n` then `f_n = u_n / sqrt(v)` are eigenvectors of
//! `K diag(v)`, orthonormal in the discrete `L^2(mu)` inner product, and
//! `g_n = sqrt(m) f_n` are orthonormal in discrete `L^2`.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::CovarianceKernel;
use crate::measure::WeightedMeasure;

/// Eigenvalues below `-NEGATIVE_TOL * lambda_max` reject the kernel.
pub const NEGATIVE_TOL: f64 = 1e-8;
/// Default relative threshold defining the null set `N_0`.
pub const DEFAULT_ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct KLDecomposition {
    eigenvalues: Vec<f64>,
    f: Arc<DMatrix<f64>>,
    g: Arc<DMatrix<f64>>,
    null_modes: Vec<usize>,
    zero_threshold: f64,
    clipped: usize,
    min_eigenvalue: f64,
    trace_estimate: f64,
    spectrum_sum: f64,
    weight_exponent: f64,
    growth_order: u32,
}

/// Top `n_modes` eigenpairs of `S K S`.
///
/// `rel_zero_tol` scales `lambda_max` into the absolute threshold of `N_0`.
pub fn nystrom_eigendecompose(
    k: &DMatrix<f64>,
    grid: &Grid,
    measure: &WeightedMeasure,
    n_modes: usize,
    rel_zero_tol: f64,
) -> Result<KLDecomposition> {
    let n = grid.len();
    if k.nrows() != n || k.ncols() != n {
        return Err(Error::ShapeMismatch { expected: n, found: k.nrows() });
    }
    grid.check_len(measure.len())?;
    if n_modes == 0 || n_modes > n {
        return Err(Error::TooManyModes { requested: n_modes, available: n });
    }
    if !(rel_zero_tol.is_finite() && rel_zero_tol > 0.0) {
        return Err(Error::InvalidParameter(format!("zero tolerance {rel_zero_tol} must be positive")));
    }

    let v = measure.effective_weights();
    let sqrt_v: Vec<f64> = v.iter().map(|x| x.sqrt()).collect();
    let b = DMatrix::from_fn(n, n, |i, j| sqrt_v[i] * k[(i, j)] * sqrt_v[j]);
    let b = (&b + b.transpose()) * 0.5;
    // entries far below roundoff of the largest one make the QR sweeps
    // underflow into non-finite eigenvalues; dropping them is invisible at
    // double precision
    let floor = f64::EPSILON * f64::EPSILON * b.amax();
    let b = b.map(|x| if x.abs() < floor { 0.0 } else { x });
    let eig = SymmetricEigen::new(b);

    let mut order: Vec<(f64, usize, usize)> = (0..n)
        .map(|c| {
            let col = eig.eigenvectors.column(c);
            (eig.eigenvalues[c], first_significant(col.as_slice()), c)
        })
        .collect();
    // descending eigenvalue, ties by the node index of the leading component
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let lambda_max = order[0].0.max(0.0);
    let min_eigenvalue = order[n - 1].0;
    if min_eigenvalue < -NEGATIVE_TOL * lambda_max || (lambda_max == 0.0 && min_eigenvalue < 0.0) {
        return Err(Error::NotPositiveSemiDefinite { min: min_eigenvalue, max: lambda_max });
    }

    let m = measure.density();
    let mut eigenvalues = Vec::with_capacity(n_modes);
    let mut f = DMatrix::zeros(n, n_modes);
    let mut g = DMatrix::zeros(n, n_modes);
    let mut clipped = 0;
    for (slot, &(lambda, lead, c)) in order.iter().take(n_modes).enumerate() {
        let col = eig.eigenvectors.column(c);
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            let fi = sign * col[i] / sqrt_v[i];
            f[(i, slot)] = fi;
            g[(i, slot)] = m[i].sqrt() * fi;
        }
        if lambda < 0.0 {
            clipped += 1;
        }
        eigenvalues.push(lambda.max(0.0));
    }
    clipped += order.iter().skip(n_modes).filter(|o| o.0 < 0.0).count();

    let zero_threshold = rel_zero_tol * lambda_max;
    let null_modes = eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l <= zero_threshold)
        .map(|(i, _)| i)
        .collect();
    let trace_estimate = (0..n).map(|i| k[(i, i)] * v[i]).sum();
    let spectrum_sum = order.iter().map(|o| o.0.max(0.0)).sum();

    Ok(KLDecomposition {
        eigenvalues,
        f: Arc::new(f),
        g: Arc::new(g),
        null_modes,
        zero_threshold,
        clipped,
        min_eigenvalue,
        trace_estimate,
        spectrum_sum,
        weight_exponent: measure.weight_exponent(),
        growth_order: measure.growth_order(),
    })
}

fn first_significant(col: &[f64]) -> usize {
    let peak = col.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    col.iter().position(|x| x.abs() > 1e-12 * peak).unwrap_or(0)
}

/// Assembles the kernel on the grid, then decomposes it.
pub fn decompose_kernel(
    kernel: &CovarianceKernel,
    grid: &Grid,
    measure: &WeightedMeasure,
    n_modes: usize,
    rel_zero_tol: f64,
) -> Result<(DMatrix<f64>, KLDecomposition)> {
    let k = crate::kernel::assemble_covariance_matrix(kernel, grid, measure)?;
    let d = nystrom_eigendecompose(&k, grid, measure, n_modes, rel_zero_tol)?;
    Ok((k, d))
}

impl KLDecomposition {
    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `lambda_n`, descending, negatives clipped to zero.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `f_n(x_i)`, one mode per column, `mu`-orthonormal.
    pub fn eigenfunctions(&self) -> &Arc<DMatrix<f64>> {
        &self.f
    }

    /// `g_n(x_i)`, one mode per column, `L^2`-orthonormal.
    pub fn l2_basis(&self) -> &Arc<DMatrix<f64>> {
        &self.g
    }

    /// Indices of the null set `N_0`.
    pub fn null_modes(&self) -> &[usize] {
        &self.null_modes
    }

    pub fn is_null(&self, n: usize) -> bool {
        self.null_modes.binary_search(&n).is_ok()
    }

    /// Modes outside `N_0`, in descending eigenvalue order.
    pub fn positive_modes(&self) -> Vec<usize> {
        (0..self.n_modes()).filter(|&n| !self.is_null(n)).collect()
    }

    pub fn zero_threshold(&self) -> f64 {
        self.zero_threshold
    }

    pub fn clipped_count(&self) -> usize {
        self.clipped
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// `sum_i C(x_i, x_i) v_i`.
    pub fn trace_estimate(&self) -> f64 {
        self.trace_estimate
    }

    pub fn eigenvalue_sum(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn eigenvalue_square_sum(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l * l).sum()
    }

    /// Sum of all clipped eigenvalues of the discretized operator, kept or not.
    pub fn spectrum_sum(&self) -> f64 {
        self.spectrum_sum
    }

    /// `|sum lambda_n - trace| / trace` over the full discrete spectrum.
    pub fn trace_relative_error(&self) -> f64 {
        let t = self.trace_estimate;
        let diff = (self.spectrum_sum - t).abs();
        if t == 0.0 {
            diff
        } else {
            diff / t.abs()
        }
    }

    /// Exponent `p` of the weight multiplier with `(1+|x|^2)^p g_n = f_n`.
    pub fn weight_exponent(&self) -> f64 {
        self.weight_exponent
    }

    pub fn growth_order(&self) -> u32 {
        self.growth_order
    }

    /// Quadrature projection `Y_n = sum_i Y(x_i) f_n(x_i) v_i` of a field sampled on the grid.
    pub fn project(&self, field: &[f64], measure: &WeightedMeasure) -> Result<Vec<f64>> {
        if field.len() != self.f.nrows() {
            return Err(Error::ShapeMismatch { expected: self.f.nrows(), found: field.len() });
        }
        let v = measure.effective_weights();
        Ok((0..self.n_modes())
            .map(|n| {
                self.f.column(n).iter().zip(field).zip(v).map(|((f, y), w)| f * y * w).sum()
            })
            .collect())
    }

    pub fn report(&self) -> KlReport {
        KlReport {
            modes: self.n_modes(),
            lambda_max: self.eigenvalues.first().copied().unwrap_or(0.0),
            lambda_last: self.eigenvalues.last().copied().unwrap_or(0.0),
            eigenvalue_sum: self.eigenvalue_sum(),
            spectrum_sum: self.spectrum_sum,
            trace: self.trace_estimate,
            trace_relative_error: self.trace_relative_error(),
            hilbert_schmidt_sum: self.eigenvalue_square_sum(),
            zero_threshold: self.zero_threshold,
            n0_size: self.null_modes.len(),
            rank: self.n_modes() - self.null_modes.len(),
            clipped_negative: self.clipped,
            min_eigenvalue: self.min_eigenvalue,
        }
    }

    /// `n, lambda_n` rows.
    pub fn write_eigenvalues_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["n", "lambda"])?;
        for (n, l) in self.eigenvalues.iter().enumerate() {
            wtr.write_record([n.to_string(), format!("{l:e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Node-major `f_n(x_i)` matrix.
    pub fn write_modes_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string()];
        header.extend((0..self.n_modes()).map(|n| format!("f_{n}")));
        wtr.write_record(&header)?;
        for i in 0..self.f.nrows() {
            let mut row = vec![i.to_string()];
            row.extend(self.f.row(i).iter().map(|v| format!("{v:e}")));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Decomposition metadata for the JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlReport {
    pub modes: usize,
    pub lambda_max: f64,
    pub lambda_last: f64,
    pub eigenvalue_sum: f64,
    pub spectrum_sum: f64,
    pub trace: f64,
    pub trace_relative_error: f64,
    pub hilbert_schmidt_sum: f64,
    pub zero_threshold: f64,
    pub n0_size: usize,
    pub rank: usize,
    pub clipped_negative: usize,
    pub min_eigenvalue: f64,
}

/// `||K - sum_{n<m} lambda_n f_n f_n^T||_v / ||K||_v` in the `v`-weighted
/// Frobenius norm `||A||_v = ||S A S||_F`.
pub fn mercer_reconstruct_error(
    decomp: &KLDecomposition,
    k: &DMatrix<f64>,
    measure: &WeightedMeasure,
    m: usize,
) -> f64 {
    let m = m.min(decomp.n_modes());
    let sqrt_v: Vec<f64> = measure.effective_weights().iter().map(|x| x.sqrt()).collect();
    let n = k.nrows();
    let mut sf = DMatrix::zeros(n, m);
    for c in 0..m {
        let s = decomp.eigenvalues[c].sqrt();
        for i in 0..n {
            sf[(i, c)] = s * sqrt_v[i] * decomp.f[(i, c)];
        }
    }
    let approx = &sf * sf.transpose();
    let b = DMatrix::from_fn(n, n, |i, j| sqrt_v[i] * k[(i, j)] * sqrt_v[j]);
    let norm = b.norm();
    let err = (b - approx).norm();
    if norm == 0.0 {
        err
    } else {
        err / norm
    }
}
