//! Covariance kernels `C_Y(x, y)` and their growth bounds.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::hermite::hermite_function;
use crate::measure::WeightedMeasure;

/// Relative slack on the declared growth bound before it counts as violated.
pub const GROWTH_SLACK: f64 = 0.01;

fn default_length_scale() -> f64 {
    1.0
}

/// Built-in kernels plus a kernel sampled on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum KernelKind {
    /// `exp(-|x-y|^2 / (2 l^2))`.
    Gaussian {
        #[serde(default = "default_length_scale")]
        length_scale: f64,
    },
    /// `exp(-|x-y| / l)`.
    Exponential {
        #[serde(default = "default_length_scale")]
        length_scale: f64,
    },
    /// Brownian sheet `prod_k min(x_k, y_k)` on `[0,1]^d`, zero outside.
    Brownian,
    /// `h_0 (x) h_0`, a rank-one covariance.
    Rank1,
    /// `(1 + x.y)^2 exp(-|x-y|^2 / (2 l^2))`, growing like `|x|^2 |y|^2`.
    PolynomialGrowthDemo {
        #[serde(default = "default_length_scale")]
        length_scale: f64,
    },
    /// Node-indexed matrix read from a file.
    GridFile {
        path: String,
    },
}

impl KernelKind {
    pub const BUILTIN_NAMES: [&'static str; 5] =
        ["gaussian", "exponential", "brownian", "rank1", "polynomial-growth-demo"];

    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Gaussian { .. } => "gaussian",
            KernelKind::Exponential { .. } => "exponential",
            KernelKind::Brownian => "brownian",
            KernelKind::Rank1 => "rank1",
            KernelKind::PolynomialGrowthDemo { .. } => "polynomial-growth-demo",
            KernelKind::GridFile { .. } => "grid-file",
        }
    }
}

/// A covariance `C_Y` with a declared bound
/// `|C(x,y)| <= bound (1+|x|^2)^{M/2} (1+|y|^2)^{M/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceKernel {
    kind: KernelKind,
    bound: f64,
    growth_order: u32,
    samples: Option<DMatrix<f64>>,
}

impl CovarianceKernel {
    /// Built-in kernel with its natural growth constants.
    pub fn builtin(kind: KernelKind) -> Result<Self> {
        let (bound, growth_order) = match &kind {
            KernelKind::Gaussian { length_scale }
            | KernelKind::Exponential { length_scale }
            | KernelKind::PolynomialGrowthDemo { length_scale } => {
                if !(length_scale.is_finite() && *length_scale > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "length_scale {length_scale} must be positive"
                    )));
                }
                let m = if matches!(kind, KernelKind::PolynomialGrowthDemo { .. }) { 2 } else { 0 };
                (1.0, m)
            }
            KernelKind::Brownian => (1.0, 0),
            // h_0(x)^2 <= pi^{-1/2} per axis; the dimension is unknown here so
            // take the 1-d constant, which dominates for d >= 1
            KernelKind::Rank1 => (std::f64::consts::PI.powf(-0.5), 0),
            KernelKind::GridFile { .. } => {
                return Err(Error::InvalidParameter(
                    "grid-file kernels are built with CovarianceKernel::from_samples".into(),
                ))
            }
        };
        Ok(CovarianceKernel { kind, bound, growth_order, samples: None })
    }

    pub fn gaussian(length_scale: f64) -> Self {
        Self::builtin(KernelKind::Gaussian { length_scale }).expect("valid length scale")
    }

    pub fn exponential(length_scale: f64) -> Self {
        Self::builtin(KernelKind::Exponential { length_scale }).expect("valid length scale")
    }

    pub fn brownian() -> Self {
        Self::builtin(KernelKind::Brownian).expect("builtin")
    }

    pub fn rank1() -> Self {
        Self::builtin(KernelKind::Rank1).expect("builtin")
    }

    pub fn polynomial_growth_demo(length_scale: f64) -> Self {
        Self::builtin(KernelKind::PolynomialGrowthDemo { length_scale }).expect("valid length scale")
    }

    /// Kernel sampled on the grid nodes, bounded by its observed maximum.
    pub fn from_samples(path: impl Into<String>, samples: DMatrix<f64>, growth_order: u32) -> Result<Self> {
        if samples.nrows() != samples.ncols() {
            return Err(Error::ShapeMismatch { expected: samples.nrows(), found: samples.ncols() });
        }
        let bound = samples.amax().max(f64::MIN_POSITIVE);
        Ok(CovarianceKernel {
            kind: KernelKind::GridFile { path: path.into() },
            bound,
            growth_order,
            samples: Some(samples),
        })
    }

    /// Overrides the declared growth constants.
    pub fn with_growth(mut self, bound: f64, growth_order: u32) -> Self {
        self.bound = bound;
        self.growth_order = growth_order;
        self
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn growth_order(&self) -> u32 {
        self.growth_order
    }

    /// `C(x, y)` for analytic kernels; `None` for grid-sampled ones.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        let dist2 = || x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let v = match &self.kind {
            KernelKind::Gaussian { length_scale } => {
                (-dist2() / (2.0 * length_scale * length_scale)).exp()
            }
            KernelKind::Exponential { length_scale } => (-dist2().sqrt() / length_scale).exp(),
            KernelKind::Brownian => x
                .iter()
                .zip(y)
                .map(|(&s, &t)| {
                    if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t) {
                        s.min(t)
                    } else {
                        0.0
                    }
                })
                .product(),
            KernelKind::Rank1 => {
                let phi = |z: &[f64]| z.iter().map(|&v| hermite_function(0, v)).product::<f64>();
                phi(x) * phi(y)
            }
            KernelKind::PolynomialGrowthDemo { length_scale } => {
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                (1.0 + dot).powi(2) * (-dist2() / (2.0 * length_scale * length_scale)).exp()
            }
            KernelKind::GridFile { .. } => return None,
        };
        Some(v)
    }

    fn eval_nodes(&self, grid: &Grid, i: usize, j: usize) -> f64 {
        match &self.samples {
            Some(m) => m[(i, j)],
            None => self.eval(grid.node(i), grid.node(j)).expect("analytic kernel"),
        }
    }
}

/// `K_ij = (C(x_i, x_j) + C(x_j, x_i)) / 2`, checked against the growth bound
/// of the measure's order `M`.
pub fn assemble_covariance_matrix(
    kernel: &CovarianceKernel,
    grid: &Grid,
    measure: &WeightedMeasure,
) -> Result<DMatrix<f64>> {
    let n = grid.len();
    if let Some(m) = &kernel.samples {
        grid.check_len(m.nrows())?;
    }
    let half = measure.growth_order() as f64 / 2.0;
    let growth: Vec<f64> = (0..n).map(|i| (1.0 + grid.norm_sq(i)).powf(half)).collect();
    let limit = kernel.bound * (1.0 + GROWTH_SLACK);

    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; n];
            for (j, slot) in row.iter_mut().enumerate() {
                let v = 0.5 * (kernel.eval_nodes(grid, i, j) + kernel.eval_nodes(grid, j, i));
                let bound = limit * growth[i] * growth[j];
                if v.abs() > bound {
                    return Err(Error::GrowthBoundViolated {
                        i,
                        j,
                        observed: v.abs(),
                        bound: kernel.bound * growth[i] * growth[j],
                    });
                }
                *slot = v;
            }
            Ok(row)
        })
        .collect();

    let mut k = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            k[(i, j)] = v;
        }
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, QuadratureRule};

    #[test]
    fn pointwise_values() {
        let b = CovarianceKernel::brownian();
        assert_eq!(b.eval(&[0.25], &[0.5]), Some(0.25));
        assert_eq!(b.eval(&[-0.25], &[0.5]), Some(0.0));
        assert_eq!(b.eval(&[0.7], &[1.5]), Some(0.0));
        let g = CovarianceKernel::gaussian(1.0);
        assert_eq!(g.eval(&[3.0], &[3.0]), Some(1.0));
    }

    #[test]
    fn gaussian_has_unit_diagonal() {
        let grid = build_grid(1, 5.0, 16, QuadratureRule::GaussLegendre).unwrap();
        let mu = WeightedMeasure::new(&grid, 0);
        let k = assemble_covariance_matrix(&CovarianceKernel::gaussian(1.5), &grid, &mu).unwrap();
        assert!(k.diagonal().iter().all(|&v| v == 1.0));
        assert_eq!(k, k.transpose());
    }

    #[test]
    fn rank1_is_outer_product() {
        let grid = build_grid(1, 6.0, 24, QuadratureRule::GaussLegendre).unwrap();
        let mu = WeightedMeasure::new(&grid, 0);
        let k = assemble_covariance_matrix(&CovarianceKernel::rank1(), &grid, &mu).unwrap();
        let phi = nalgebra::DVector::from_vec(grid.sample(|x| hermite_function(0, x[0])));
        let outer = &phi * phi.transpose();
        assert!((k - outer).amax() < 1e-15);
    }

    #[test]
    fn growth_bound_detects_small_order() {
        let grid = build_grid(1, 20.0, 32, QuadratureRule::GaussLegendre).unwrap();
        let demo = CovarianceKernel::polynomial_growth_demo(1.0);
        let ok = WeightedMeasure::new(&grid, 2);
        assert!(assemble_covariance_matrix(&demo, &grid, &ok).is_ok());
        let low = WeightedMeasure::new(&grid, 1);
        assert!(matches!(
            assemble_covariance_matrix(&demo, &grid, &low),
            Err(Error::GrowthBoundViolated { .. })
        ));
    }

    #[test]
    fn grid_file_kernel_uses_samples() {
        let grid = build_grid(1, 2.0, 4, QuadratureRule::Trapezoid).unwrap();
        let mu = WeightedMeasure::new(&grid, 0);
        let m = DMatrix::from_fn(4, 4, |i, j| if i == j { 2.0 } else { 0.5 });
        let kern = CovarianceKernel::from_samples("k.csv", m.clone(), 0).unwrap();
        assert_eq!(assemble_covariance_matrix(&kern, &grid, &mu).unwrap(), m);
        let other = build_grid(1, 2.0, 5, QuadratureRule::Trapezoid).unwrap();
        let mu5 = WeightedMeasure::new(&other, 0);
        assert!(assemble_covariance_matrix(&kern, &other, &mu5).is_err());
    }

    #[test]
    fn kind_serde_names() {
        let k: KernelKind = serde_json::from_str(r#"{"name":"gaussian"}"#).unwrap();
        assert_eq!(k, KernelKind::Gaussian { length_scale: 1.0 });
        let k: KernelKind =
            serde_json::from_str(r#"{"name":"polynomial-growth-demo","length_scale":2.0}"#).unwrap();
        assert_eq!(k.name(), "polynomial-growth-demo");
    }
}
