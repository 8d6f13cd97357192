//! Coloring (`Z = L W`) and whitening (`L Z = W`) of a process given through
//! the covariance `C_Y` of `Y = (1 - Delta)^{-N/2} Z`.
//!
//! Coloring builds, in test-function order,
//! `L = [(1-Delta)^{N/2}, (1+|x|^2)^p, L_Q]` with `p = M/2 + (d+1)/4` and
//! `L_Q phi = sum_n sqrt(lambda_n) <phi, g_n> g_n`, together with the white
//! noise `W(phi) = sum c_n <phi, g_n>` whose coefficients are the normalized
//! KL coefficients on positive modes and independent fill draws on `N_0`.
//!
//! Whitening uses `Lw = [L_gamma, (1+|x|^2)^{-p}, (1-Delta)^{-N/2}]`. The
//! relabel stage is the adjoint of `L_gamma` taken in the RKHS inner product
//! of `H = Range(L_Q)`; expressed against the `L^2` pairing its source
//! functions are the representers `g_n / sqrt(lambda_n)` of `h_n`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::gsp::{coefficient_matrix, GespExpansion};
use crate::hermite::{build_bank, build_bank_unchecked, TestFunctionBank};
use crate::kernel::{assemble_covariance_matrix, CovarianceKernel};
use crate::kl::{nystrom_eigendecompose, KLDecomposition, DEFAULT_ZERO_TOL};
use crate::mc::{compare, empirical_covariance, CoefficientLaw, StreamDomain, DEFAULT_Z_THRESHOLD};
use crate::measure::WeightedMeasure;
use crate::operators::{apply_to_test_function, FactoredOperator, Stage};

/// Gram tolerance for accepting a basis as `L^2`-orthonormal.
pub const ORTHONORMAL_TOL: f64 = 1e-8;
/// Matrix-level error allowed in the coloring and whitening identities.
pub const MATRIX_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizationOptions {
    /// `N_0` threshold relative to `lambda_max`.
    pub zero_tol: f64,
    pub law: CoefficientLaw,
    /// Decompose against plain Lebesgue quadrature instead of `mu`.
    pub lebesgue: bool,
}

impl Default for FactorizationOptions {
    fn default() -> Self {
        FactorizationOptions { zero_tol: DEFAULT_ZERO_TOL, law: CoefficientLaw::Gaussian, lebesgue: false }
    }
}

/// Where the data-driven white-noise coefficients come from.
#[derive(Debug, Clone)]
pub enum DataCoefficients {
    /// Every mode is filled with fresh draws.
    None,
    /// Modes read the process's own KL coefficient stream.
    Stream { modes: Vec<usize> },
    /// Explicit coefficients, realizations x `modes.len()`.
    Explicit { modes: Vec<usize>, values: DMatrix<f64> },
}

/// `W(phi) = sum_n c_n <phi, g_n>` with unit-variance uncorrelated `c_n`.
#[derive(Debug, Clone)]
pub struct WhiteNoiseModel {
    basis: Arc<DMatrix<f64>>,
    data: DataCoefficients,
    fill_modes: Vec<usize>,
    seed: u64,
    law: CoefficientLaw,
    grid: Arc<Grid>,
}

pub fn build_white_noise(
    grid: Arc<Grid>,
    basis: Arc<DMatrix<f64>>,
    data: DataCoefficients,
    seed: u64,
    law: CoefficientLaw,
) -> Result<WhiteNoiseModel> {
    grid.check_len(basis.nrows())?;
    let k = basis.ncols();
    let weighted = DMatrix::from_fn(basis.nrows(), k, |i, j| basis[(i, j)] * grid.weights()[i]);
    let deviation = (basis.transpose() * weighted - DMatrix::identity(k, k)).amax();
    if deviation > ORTHONORMAL_TOL {
        return Err(Error::BasisNotOrthonormal { deviation });
    }
    let data_modes: &[usize] = match &data {
        DataCoefficients::None => &[],
        DataCoefficients::Stream { modes } => modes,
        DataCoefficients::Explicit { modes, values } => {
            if values.ncols() != modes.len() {
                return Err(Error::ShapeMismatch { expected: modes.len(), found: values.ncols() });
            }
            modes
        }
    };
    if let Some(&n) = data_modes.iter().find(|&&n| n >= k) {
        return Err(Error::TooManyModes { requested: n + 1, available: k });
    }
    let fill_modes = (0..k).filter(|n| !data_modes.contains(n)).collect();
    Ok(WhiteNoiseModel { basis, data, fill_modes, seed, law, grid })
}

impl WhiteNoiseModel {
    pub fn basis(&self) -> &Arc<DMatrix<f64>> {
        &self.basis
    }

    pub fn n_modes(&self) -> usize {
        self.basis.ncols()
    }

    pub fn fill_modes(&self) -> &[usize] {
        &self.fill_modes
    }

    pub fn data_modes(&self) -> Vec<usize> {
        match &self.data {
            DataCoefficients::None => Vec::new(),
            DataCoefficients::Stream { modes } | DataCoefficients::Explicit { modes, .. } => modes.clone(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `<phi, g_n>` for every mode.
    pub fn projections(&self, phi: &[f64]) -> Result<Vec<f64>> {
        self.grid.check_len(phi.len())?;
        let w = self.grid.weights();
        Ok((0..self.n_modes())
            .map(|n| self.basis.column(n).iter().zip(phi).zip(w).map(|((g, p), w)| g * p * w).sum())
            .collect())
    }

    /// Analytic `Cov(W(phi_j), W(phi_k))` for columns of `tests`: the
    /// `L^2` Gram restricted to the span of the basis.
    pub fn covariance_of(&self, tests: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let p = self.projection_matrix(tests)?;
        Ok(p.transpose() * p)
    }

    fn projection_matrix(&self, tests: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.grid.check_len(tests.nrows())?;
        let weighted = DMatrix::from_fn(tests.nrows(), tests.ncols(), |i, j| tests[(i, j)] * self.grid.weights()[i]);
        Ok(self.basis.transpose() * weighted)
    }

    /// Coefficients `c_{r,n}`, realizations x modes.
    pub fn coefficients(&self, realizations: usize) -> Result<DMatrix<f64>> {
        let mut c = coefficient_matrix(self.seed, StreamDomain::Fill, self.law, realizations, self.n_modes());
        match &self.data {
            DataCoefficients::None => {}
            DataCoefficients::Stream { modes } => {
                let data = coefficient_matrix(self.seed, StreamDomain::Data, self.law, realizations, self.n_modes());
                for &n in modes {
                    c.set_column(n, &data.column(n));
                }
            }
            DataCoefficients::Explicit { modes, values } => {
                if values.nrows() < realizations {
                    return Err(Error::InsufficientSamples { required: realizations, found: values.nrows() });
                }
                for (k, &n) in modes.iter().enumerate() {
                    for r in 0..realizations {
                        c[(r, n)] = values[(r, k)];
                    }
                }
            }
        }
        Ok(c)
    }

    /// `W_r(phi_j)`, realizations x tests.
    pub fn realize(&self, tests: &DMatrix<f64>, realizations: usize) -> Result<DMatrix<f64>> {
        let p = self.projection_matrix(tests)?;
        Ok(self.coefficients(realizations)? * p)
    }

    /// Samples of `L W` observed through a bank: `W_r(L phi_j)`.
    pub fn realize_through(
        &self,
        op: &FactoredOperator,
        bank: &TestFunctionBank,
        realizations: usize,
    ) -> Result<DMatrix<f64>> {
        let images = operator_images(op, bank, &self.grid)?;
        self.realize(&images, realizations)
    }

    /// Analytic covariance of `L W` on a bank.
    pub fn covariance_through(&self, op: &FactoredOperator, bank: &TestFunctionBank) -> Result<DMatrix<f64>> {
        let images = operator_images(op, bank, &self.grid)?;
        self.covariance_of(&images)
    }

    /// Same model with every fill coefficient forced to zero.
    pub fn without_fill(&self, realizations: usize) -> Result<WhiteNoiseModel> {
        let mut values = self.coefficients(realizations)?;
        for &n in &self.fill_modes {
            values.column_mut(n).fill(0.0);
        }
        let mut out = self.clone();
        out.data = DataCoefficients::Explicit { modes: (0..self.n_modes()).collect(), values };
        out.fill_modes = Vec::new();
        Ok(out)
    }

    pub fn metadata(&self) -> WhiteNoiseMetadata {
        WhiteNoiseMetadata {
            modes: self.n_modes(),
            data_modes: self.data_modes(),
            fill_modes: self.fill_modes.clone(),
            seed: self.seed,
            law: self.law,
        }
    }
}

fn operator_images(op: &FactoredOperator, bank: &TestFunctionBank, grid: &Grid) -> Result<DMatrix<f64>> {
    let cols: Vec<Vec<f64>> = (0..bank.len())
        .map(|j| apply_to_test_function(op, &bank.member(j), grid))
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(grid.len(), bank.len(), |i, j| cols[j][i]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhiteNoiseMetadata {
    pub modes: usize,
    pub data_modes: Vec<usize>,
    pub fill_modes: Vec<usize>,
    pub seed: u64,
    pub law: CoefficientLaw,
}

/// Result of [`color_factorize`].
#[derive(Debug, Clone)]
pub struct ColorFactorization {
    pub operator: FactoredOperator,
    pub white_noise: WhiteNoiseModel,
    pub expansion: GespExpansion,
    pub decomposition: KLDecomposition,
    pub kernel_matrix: DMatrix<f64>,
    pub measure: WeightedMeasure,
    pub grid: Arc<Grid>,
}

impl ColorFactorization {
    /// Operator-composed covariance `Cov(LW(phi_j), LW(phi_k))`.
    pub fn operator_covariance(&self, bank: &TestFunctionBank) -> Result<DMatrix<f64>> {
        self.white_noise.covariance_through(&self.operator, bank)
    }

    /// `max |Cov(LW) - C_Z|` on the bank, with `C_Z` the Mercer-truncated series.
    pub fn coloring_error(&self, bank: &TestFunctionBank) -> Result<f64> {
        let lw = self.operator_covariance(bank)?;
        let cz = self.expansion.covariance_matrix(bank)?;
        Ok((lw - cz).amax())
    }

    /// `max |Z_r(phi) - (LW)_r(phi)|` over realizations sharing one seed.
    pub fn sample_identity_error(&self, bank: &TestFunctionBank, seed: u64, realizations: usize) -> Result<f64> {
        let z = self.expansion.realize(seed, bank, realizations)?.evaluations;
        let lw = self.white_noise.realize_through(&self.operator, bank, realizations)?;
        Ok((z - lw).amax())
    }
}

/// Coloring factorization of the process with `Y`-covariance `kernel`.
pub fn color_factorize(
    kernel: &CovarianceKernel,
    regularity_order: u32,
    growth_order: u32,
    grid: Arc<Grid>,
    n_modes: usize,
    seed: u64,
    options: &FactorizationOptions,
) -> Result<ColorFactorization> {
    let measure = if options.lebesgue {
        WeightedMeasure::lebesgue(&grid)
    } else {
        WeightedMeasure::new(&grid, growth_order)
    };
    let kernel_matrix = assemble_covariance_matrix(kernel, &grid, &measure)?;
    let decomposition = nystrom_eigendecompose(&kernel_matrix, &grid, &measure, n_modes, options.zero_tol)?;

    let white_noise = build_white_noise(
        grid.clone(),
        decomposition.l2_basis().clone(),
        DataCoefficients::Stream { modes: decomposition.positive_modes() },
        seed,
        options.law,
    )?;

    let sigma: Vec<f64> = decomposition
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(n, &l)| if decomposition.is_null(n) { 0.0 } else { l.sqrt() })
        .collect();
    let mut stages = Vec::new();
    if regularity_order > 0 {
        stages.push(Stage::BesselPotential { alpha: regularity_order as f64 / 2.0 });
    }
    stages.push(Stage::WeightMultiply { exponent: measure.weight_exponent() });
    stages.push(Stage::SpectralDiagonal { values: sigma, basis: Some(decomposition.l2_basis().clone()) });
    let operator = FactoredOperator::new(stages)?;

    let expansion = GespExpansion::from_decomposition(grid.clone(), &decomposition, regularity_order, options.law)?;

    Ok(ColorFactorization { operator, white_noise, expansion, decomposition, kernel_matrix, measure, grid })
}

/// `h_n = sqrt(lambda_n) g_n` on the positive modes, with the relabel map.
#[derive(Debug, Clone)]
pub struct RkhsBasis {
    modes: Vec<usize>,
    sqrt_lambda: Vec<f64>,
    g: Arc<DMatrix<f64>>,
    gamma: Vec<usize>,
}

impl RkhsBasis {
    fn new(decomp: &KLDecomposition, modes: Vec<usize>) -> Self {
        let sqrt_lambda = modes.iter().map(|&n| decomp.eigenvalues()[n].sqrt()).collect();
        let gamma = (0..modes.len()).collect();
        RkhsBasis { modes, sqrt_lambda, g: decomp.l2_basis().clone(), gamma }
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    /// `gamma[k]` is the Hermite index assigned to the k-th positive mode.
    pub fn gamma(&self) -> &[usize] {
        &self.gamma
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Samples of `h_n`, one positive mode per column.
    pub fn elements(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.g.nrows(), self.len(), |i, k| self.sqrt_lambda[k] * self.g[(i, self.modes[k])])
    }

    /// `L^2` representers `g_n / sqrt(lambda_n)` of the `H`-pairing with `h_n`.
    pub fn representers(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.g.nrows(), self.len(), |i, k| self.g[(i, self.modes[k])] / self.sqrt_lambda[k])
    }

    /// `(x, y)_H = sum_n <x, g_n> <y, g_n> / lambda_n` for `x, y` in the range of `L_Q`.
    pub fn inner(&self, x: &[f64], y: &[f64], grid: &Grid) -> Result<f64> {
        grid.check_len(x.len())?;
        grid.check_len(y.len())?;
        let w = grid.weights();
        Ok(self
            .modes
            .iter()
            .zip(&self.sqrt_lambda)
            .map(|(&n, s)| {
                let g = self.g.column(n);
                let a: f64 = g.iter().zip(x).zip(w).map(|((g, v), w)| g * v * w).sum();
                let b: f64 = g.iter().zip(y).zip(w).map(|((g, v), w)| g * v * w).sum();
                a * b / (s * s)
            })
            .sum())
    }
}

/// Result of [`whiten_factorize`].
#[derive(Debug, Clone)]
pub struct Whitening {
    pub operator: FactoredOperator,
    pub expansion: GespExpansion,
    pub rkhs: RkhsBasis,
    pub targets: TestFunctionBank,
}

impl Whitening {
    /// Discrete Gram deviation of the full Hermite target set.
    pub fn target_gram_deviation(&self) -> f64 {
        self.targets.gram_deviation()
    }
}

impl Whitening {
    /// `max |Cov(W'(h_i), W'(h_j)) - delta_ij|` on the first `count` Hermites.
    pub fn gram_error(&self, count: usize) -> Result<f64> {
        let bank = build_bank(count, self.expansion.grid())?;
        let c = self.expansion.covariance_matrix(&bank)?;
        Ok((c - DMatrix::identity(count, count)).amax())
    }

    /// The whitened process written directly as `sum_k c_k h_{gamma(k)}`.
    pub fn direct_expansion(&self) -> Result<GespExpansion> {
        let grid = self.expansion.grid().clone();
        let targets = self.targets.samples();
        let base = DMatrix::from_fn(grid.len(), self.rkhs.len(), |i, k| targets[(i, self.rkhs.gamma[k])]);
        GespExpansion::new(
            grid,
            vec![1.0; self.rkhs.len()],
            Arc::new(base),
            FactoredOperator::identity(),
            0,
            0,
            self.expansion.law(),
        )
    }
}

/// Whitening factorization of a colored process.
///
/// Needs at least `k_target` modes with `lambda_n > rel_zero_tol * lambda_max`
/// as the finite stand-in for infinitely many non-null variances.
pub fn whiten_factorize(color: &ColorFactorization, k_target: usize, rel_zero_tol: f64) -> Result<Whitening> {
    let decomp = &color.decomposition;
    let lambda_max = decomp.eigenvalues().first().copied().unwrap_or(0.0);
    let threshold = rel_zero_tol * lambda_max;
    let modes: Vec<usize> = (0..decomp.n_modes())
        .filter(|&n| decomp.eigenvalues()[n] > threshold && !decomp.is_null(n))
        .collect();
    if modes.len() < k_target || modes.is_empty() {
        return Err(Error::FiniteRank { rank: modes.len(), required: k_target.max(1) });
    }

    let rkhs = RkhsBasis::new(decomp, modes);
    // high-index targets may resolve worse than the bank tolerance; only the
    // first k_target enter the checked Gram, the rest is reported
    let targets = build_bank_unchecked(rkhs.len(), &color.grid)?;
    let p = color.measure.weight_exponent();
    let n = color.expansion.regularity_order();

    let mut stages = vec![
        Stage::CoefficientRelabel {
            map: rkhs.gamma.clone(),
            source: Some(Arc::new(rkhs.representers())),
            target: Some(Arc::new(targets.samples().clone())),
        },
        Stage::WeightMultiply { exponent: -p },
    ];
    if n > 0 {
        stages.push(Stage::BesselPotential { alpha: -(n as f64) / 2.0 });
    }
    let operator = FactoredOperator::new(stages)?;
    let expansion = color.expansion.apply_adjoint(&operator);
    Ok(Whitening { operator, expansion, rkhs, targets })
}

/// Monte-Carlo side of a roundtrip report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McErrors {
    pub realizations: usize,
    pub z_threshold: f64,
    pub coloring_max_z: f64,
    pub coloring_max_abs_diff: f64,
    pub coloring_pass: bool,
    pub whitening_max_z: f64,
    pub whitening_max_abs_diff: f64,
    pub whitening_pass: bool,
    /// `max |Z_r - (LW)_r|` over the shared-seed realizations.
    pub sample_identity_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub coloring_error: f64,
    pub whitening_gram_error: f64,
    pub mc_errors: McErrors,
    pub modes: usize,
    pub rank: usize,
    pub n0_size: usize,
    pub bank_size: usize,
    pub seed: u64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundtripParams {
    pub regularity_order: u32,
    pub growth_order: u32,
    pub n_modes: usize,
    pub k_target: usize,
    pub seed: u64,
    pub realizations: usize,
    pub z_threshold: f64,
}

impl Default for RoundtripParams {
    fn default() -> Self {
        RoundtripParams {
            regularity_order: 0,
            growth_order: 0,
            n_modes: 64,
            k_target: 8,
            seed: 0,
            realizations: 10_000,
            z_threshold: DEFAULT_Z_THRESHOLD,
        }
    }
}

/// Coloring followed by whitening with matrix-level and Monte-Carlo checks.
pub fn roundtrip_check(
    kernel: &CovarianceKernel,
    grid: Arc<Grid>,
    params: &RoundtripParams,
    options: &FactorizationOptions,
) -> Result<RoundtripReport> {
    let color = color_factorize(
        kernel,
        params.regularity_order,
        params.growth_order,
        grid.clone(),
        params.n_modes,
        params.seed,
        options,
    )?;
    let bank = build_bank(params.k_target, &grid)?;
    let coloring_error = color.coloring_error(&bank)?;
    let whitening = whiten_factorize(&color, params.k_target, options.zero_tol)?;
    let whitening_gram_error = whitening.gram_error(params.k_target)?;

    let r = params.realizations;
    let lw = color.white_noise.realize_through(&color.operator, &bank, r)?;
    let analytic_z = color.expansion.covariance_matrix(&bank)?;
    let coloring_mc = compare(&empirical_covariance(&lw)?, &analytic_z, params.z_threshold, params.seed)?;

    let z = color.expansion.realize(params.seed, &bank, r)?;
    let sample_identity_error = (&z.evaluations - &lw).amax();

    let w = whitening.expansion.realize(params.seed, &bank, r)?;
    let k = params.k_target;
    let whitening_mc =
        compare(&empirical_covariance(&w.evaluations)?, &DMatrix::identity(k, k), params.z_threshold, params.seed)?;

    let mc_errors = McErrors {
        realizations: r,
        z_threshold: params.z_threshold,
        coloring_max_z: coloring_mc.max_abs_z,
        coloring_max_abs_diff: coloring_mc.max_abs_diff,
        coloring_pass: coloring_mc.pass,
        whitening_max_z: whitening_mc.max_abs_z,
        whitening_max_abs_diff: whitening_mc.max_abs_diff,
        whitening_pass: whitening_mc.pass,
        sample_identity_error,
    };
    let decomp = &color.decomposition;
    let pass = coloring_error <= MATRIX_TOL
        && whitening_gram_error <= MATRIX_TOL
        && mc_errors.coloring_pass
        && mc_errors.whitening_pass;
    Ok(RoundtripReport {
        coloring_error,
        whitening_gram_error,
        mc_errors,
        modes: decomp.n_modes(),
        rank: whitening.rkhs.len(),
        n0_size: decomp.null_modes().len(),
        bank_size: k,
        seed: params.seed,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, QuadratureRule};

    fn gl_grid(p: usize) -> Arc<Grid> {
        Arc::new(build_grid(1, 20.0, p, QuadratureRule::GaussLegendre).unwrap())
    }

    #[test]
    fn rank_one_coloring_structure() {
        let grid = gl_grid(128);
        let c = color_factorize(&CovarianceKernel::rank1(), 0, 0, grid, 16, 3, &Default::default()).unwrap();
        let Stage::SpectralDiagonal { values, .. } = c.operator.stages().last().unwrap() else {
            panic!("last stage must be spectral");
        };
        assert_eq!(values.iter().filter(|&&v| v > 0.0).count(), 1);
        assert_eq!(c.white_noise.fill_modes(), (1..16).collect::<Vec<_>>().as_slice());
        assert_eq!(c.white_noise.data_modes(), vec![0]);
    }

    #[test]
    fn white_noise_variances() {
        let grid = gl_grid(128);
        let c = color_factorize(&CovarianceKernel::gaussian(1.0), 0, 0, grid.clone(), 16, 3, &Default::default())
            .unwrap();
        let g = c.decomposition.l2_basis();
        let wn = build_white_noise(grid.clone(), g.clone(), DataCoefficients::None, 1, CoefficientLaw::Gaussian)
            .unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let tests = DMatrix::from_fn(grid.len(), 3, |i, j| match j {
            0 => g[(i, 0)],
            1 => g[(i, 1)],
            _ => s * (g[(i, 0)] + g[(i, 1)]),
        });
        let cov = wn.covariance_of(&tests).unwrap();
        assert!((cov[(0, 0)] - 1.0).abs() < 1e-10);
        assert!(cov[(0, 1)].abs() < 1e-10);
        assert!((cov[(2, 2)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let grid = gl_grid(32);
        let basis = Arc::new(DMatrix::from_element(32, 2, 1.0));
        assert!(matches!(
            build_white_noise(grid, basis, DataCoefficients::None, 0, CoefficientLaw::Gaussian),
            Err(Error::BasisNotOrthonormal { .. })
        ));
    }

    #[test]
    fn rank_one_cannot_be_whitened() {
        let grid = gl_grid(128);
        let c = color_factorize(&CovarianceKernel::rank1(), 0, 0, grid, 16, 3, &Default::default()).unwrap();
        assert_eq!(
            whiten_factorize(&c, 2, DEFAULT_ZERO_TOL).unwrap_err(),
            Error::FiniteRank { rank: 1, required: 2 }
        );
    }

    #[test]
    fn gaussian_gamma_is_identity_enumeration() {
        let grid = gl_grid(256);
        let c = color_factorize(&CovarianceKernel::gaussian(1.0), 0, 0, grid, 32, 3, &Default::default()).unwrap();
        let w = whiten_factorize(&c, 8, DEFAULT_ZERO_TOL).unwrap();
        assert_eq!(w.rkhs.modes(), (0..w.rkhs.len()).collect::<Vec<_>>().as_slice());
        assert_eq!(w.rkhs.gamma(), w.rkhs.modes());
    }

    #[test]
    fn rkhs_basis_is_orthonormal_in_h() {
        let grid = gl_grid(256);
        let c = color_factorize(&CovarianceKernel::gaussian(1.0), 0, 0, grid.clone(), 24, 3, &Default::default())
            .unwrap();
        let w = whiten_factorize(&c, 8, DEFAULT_ZERO_TOL).unwrap();
        let h = w.rkhs.elements();
        for a in 0..w.rkhs.len() {
            for b in 0..w.rkhs.len() {
                let x: Vec<f64> = h.column(a).iter().copied().collect();
                let y: Vec<f64> = h.column(b).iter().copied().collect();
                let v = w.rkhs.inner(&x, &y, &grid).unwrap();
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-10, "({a},{b}) -> {v}");
            }
        }
    }

    #[test]
    fn explicit_data_coefficients() {
        let grid = gl_grid(64);
        let c = color_factorize(&CovarianceKernel::gaussian(1.0), 0, 0, grid.clone(), 4, 3, &Default::default())
            .unwrap();
        let values = DMatrix::from_fn(3, 2, |r, k| (r * 2 + k) as f64);
        let wn = build_white_noise(
            grid,
            c.decomposition.l2_basis().clone(),
            DataCoefficients::Explicit { modes: vec![0, 2], values },
            8,
            CoefficientLaw::Rademacher,
        )
        .unwrap();
        let coeffs = wn.coefficients(3).unwrap();
        assert_eq!(coeffs[(2, 0)], 4.0);
        assert_eq!(coeffs[(2, 2)], 5.0);
        assert!(coeffs[(1, 1)].abs() == 1.0);
        assert!(wn.coefficients(4).is_err());
    }
}
