//! Generalized stochastic processes in series form `Z = sum_n Z_n T_n`.
//!
//! Each `T_n` is stored factored as base samples `f_n` plus an operator
//! shared by all modes; a pairing is computed by moving the operator onto
//! the test function, `<T_n, phi> = sum_i f_n(x_i) (Op phi)(x_i) w_i`, with
//! plain Lebesgue weights.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dot_weighted, Grid};
use crate::hermite::TestFunctionBank;
use crate::kl::KLDecomposition;
use crate::mc::{domain_stream, CoefficientLaw, StreamDomain};
use crate::operators::{apply_to_test_function, FactoredOperator, Stage};

#[derive(Debug, Clone)]
pub struct GespExpansion {
    variances: Vec<f64>,
    base: Arc<DMatrix<f64>>,
    operator: FactoredOperator,
    regularity_order: u32,
    growth_order: u32,
    law: CoefficientLaw,
    grid: Arc<Grid>,
}

impl GespExpansion {
    pub fn new(
        grid: Arc<Grid>,
        variances: Vec<f64>,
        base: Arc<DMatrix<f64>>,
        operator: FactoredOperator,
        regularity_order: u32,
        growth_order: u32,
        law: CoefficientLaw,
    ) -> Result<Self> {
        grid.check_len(base.nrows())?;
        if base.ncols() != variances.len() {
            return Err(Error::ShapeMismatch { expected: variances.len(), found: base.ncols() });
        }
        if let Some(v) = variances.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParameter(format!("variance {v} must be non-negative")));
        }
        Ok(GespExpansion { variances, base, operator, regularity_order, growth_order, law, grid })
    }

    /// `Z = (1 - Delta)^{N/2} Y` with `Y_n = Y(f_n)`, `T_n = (1-Delta)^{N/2} f_n`
    /// and variances `lambda_n` (zero on `N_0`).
    pub fn from_decomposition(
        grid: Arc<Grid>,
        decomp: &KLDecomposition,
        regularity_order: u32,
        law: CoefficientLaw,
    ) -> Result<Self> {
        let variances = decomp
            .eigenvalues()
            .iter()
            .enumerate()
            .map(|(n, &l)| if decomp.is_null(n) { 0.0 } else { l })
            .collect();
        Self::new(
            grid,
            variances,
            decomp.eigenfunctions().clone(),
            regularity_operator(regularity_order),
            regularity_order,
            decomp.growth_order(),
            law,
        )
    }

    pub fn n_modes(&self) -> usize {
        self.variances.len()
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn base(&self) -> &Arc<DMatrix<f64>> {
        &self.base
    }

    pub fn operator(&self) -> &FactoredOperator {
        &self.operator
    }

    pub fn regularity_order(&self) -> u32 {
        self.regularity_order
    }

    pub fn growth_order(&self) -> u32 {
        self.growth_order
    }

    pub fn law(&self) -> CoefficientLaw {
        self.law
    }

    pub fn with_law(mut self, law: CoefficientLaw) -> Self {
        self.law = law;
        self
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn variance_square_sum(&self) -> f64 {
        self.variances.iter().map(|l| l * l).sum()
    }

    /// `<T_n, phi>` for every mode.
    pub fn pairings(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let psi = apply_to_test_function(&self.operator, phi, &self.grid)?;
        let w = self.grid.weights();
        Ok((0..self.n_modes())
            .map(|n| dot_weighted(self.base.column(n).as_slice(), &psi, w))
            .collect())
    }

    /// `<T_n, phi>` for one mode.
    pub fn evaluate_pairing(&self, n: usize, phi: &[f64]) -> Result<f64> {
        if n >= self.n_modes() {
            return Err(Error::TooManyModes { requested: n + 1, available: self.n_modes() });
        }
        let psi = apply_to_test_function(&self.operator, phi, &self.grid)?;
        Ok(dot_weighted(self.base.column(n).as_slice(), &psi, self.grid.weights()))
    }

    /// Modes x bank matrix of pairings.
    pub fn pairing_matrix(&self, bank: &TestFunctionBank) -> Result<DMatrix<f64>> {
        let cols: Vec<Vec<f64>> = (0..bank.len())
            .into_par_iter()
            .map(|j| self.pairings(&bank.member(j)))
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(self.n_modes(), bank.len(), |n, j| cols[j][n]))
    }

    /// `sum_n lambda_n <T_n, phi> <T_n, psi>`.
    pub fn covariance(&self, phi: &[f64], psi: &[f64]) -> Result<f64> {
        let a = self.pairings(phi)?;
        let b = self.pairings(psi)?;
        Ok(self.variances.iter().zip(a.iter().zip(&b)).map(|(l, (x, y))| l * x * y).sum())
    }

    /// Analytic covariance matrix on a bank.
    pub fn covariance_matrix(&self, bank: &TestFunctionBank) -> Result<DMatrix<f64>> {
        let p = self.pairing_matrix(bank)?;
        Ok(covariance_from_pairings(&self.variances, &p))
    }

    /// `op^* Z`, whose pairings are `<T'_n, phi> = <T_n, op(phi)>`.
    pub fn apply_adjoint(&self, op: &FactoredOperator) -> GespExpansion {
        GespExpansion { operator: op.then(&self.operator), ..self.clone() }
    }

    /// Unit-variance coefficients `c_{r,n}`, realization-major.
    pub fn unit_coefficients(&self, seed: u64, realizations: usize) -> DMatrix<f64> {
        coefficient_matrix(seed, StreamDomain::Data, self.law, realizations, self.n_modes())
    }

    /// Draws `realizations` samples `Z_r(phi_j) = sum_n sqrt(lambda_n) c_{r,n} <T_n, phi_j>`.
    pub fn realize(&self, seed: u64, bank: &TestFunctionBank, realizations: usize) -> Result<RealizationBatch> {
        let p = self.pairing_matrix(bank)?;
        Ok(self.realize_with_pairings(seed, &p, realizations))
    }

    pub(crate) fn realize_with_pairings(
        &self,
        seed: u64,
        pairings: &DMatrix<f64>,
        realizations: usize,
    ) -> RealizationBatch {
        let coefficients = self.unit_coefficients(seed, realizations);
        let scaled_pairings = DMatrix::from_fn(pairings.nrows(), pairings.ncols(), |n, j| {
            self.variances[n].sqrt() * pairings[(n, j)]
        });
        let evaluations = &coefficients * scaled_pairings;
        RealizationBatch { coefficients, evaluations, seed, law: self.law }
    }

    pub fn metadata(&self) -> ExpansionMetadata {
        ExpansionMetadata {
            modes: self.n_modes(),
            regularity_order: self.regularity_order,
            growth_order: self.growth_order,
            law: self.law,
            variances: self.variances.clone(),
            variance_square_sum: self.variance_square_sum(),
            tail_variance: self.variances.last().copied().unwrap_or(0.0),
            operator: self.operator.clone(),
        }
    }
}

/// `(1 - Delta)^{N/2}`, or the identity for `N = 0`.
pub fn regularity_operator(order: u32) -> FactoredOperator {
    if order == 0 {
        FactoredOperator::identity()
    } else {
        FactoredOperator::new(vec![Stage::BesselPotential { alpha: order as f64 / 2.0 }])
            .expect("finite order")
    }
}

/// `P^T diag(lambda) P`.
pub fn covariance_from_pairings(variances: &[f64], pairings: &DMatrix<f64>) -> DMatrix<f64> {
    let scaled = DMatrix::from_fn(pairings.nrows(), pairings.ncols(), |n, j| variances[n] * pairings[(n, j)]);
    pairings.transpose() * scaled
}

pub(crate) fn coefficient_matrix(
    seed: u64,
    domain: StreamDomain,
    law: CoefficientLaw,
    realizations: usize,
    modes: usize,
) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = (0..realizations)
        .into_par_iter()
        .map(|r| (0..modes).map(|n| domain_stream(seed, domain, law, r as u64, n as u64)).collect())
        .collect();
    DMatrix::from_fn(realizations, modes, |r, n| rows[r][n])
}

/// Monte-Carlo realizations observed through a bank.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationBatch {
    /// Unit-variance coefficients, realizations x modes.
    pub coefficients: DMatrix<f64>,
    /// `Z_r(phi_j)`, realizations x bank.
    pub evaluations: DMatrix<f64>,
    pub seed: u64,
    pub law: CoefficientLaw,
}

impl RealizationBatch {
    pub fn realizations(&self) -> usize {
        self.evaluations.nrows()
    }

    /// Coefficients scaled by `sqrt(lambda_n)`.
    pub fn scaled_coefficients(&self, variances: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.coefficients.nrows(), self.coefficients.ncols(), |r, n| {
            variances[n].sqrt() * self.coefficients[(r, n)]
        })
    }

    /// Realization-major CSV of the evaluations.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["realization".to_string()];
        header.extend((0..self.evaluations.ncols()).map(|j| format!("phi_{j}")));
        wtr.write_record(&header)?;
        for r in 0..self.evaluations.nrows() {
            let mut row = vec![r.to_string()];
            row.extend(self.evaluations.row(r).iter().map(|v| format!("{v:e}")));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionMetadata {
    pub modes: usize,
    pub regularity_order: u32,
    pub growth_order: u32,
    pub law: CoefficientLaw,
    pub variances: Vec<f64>,
    pub variance_square_sum: f64,
    pub tail_variance: f64,
    pub operator: FactoredOperator,
}
