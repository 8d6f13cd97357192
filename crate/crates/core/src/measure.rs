//! The finite weighted measure `dmu = (1+|x|^2)^{-(M+(d+1)/2)} dx` on a grid.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{dot_weighted, Grid};

/// Density of the weighted measure at `x`.
pub fn mu_density(x: &[f64], growth_order: u32, dim: usize) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (1.0 + r2).powf(-density_exponent(growth_order, dim))
}

/// `M + (d+1)/2`.
pub fn density_exponent(growth_order: u32, dim: usize) -> f64 {
    growth_order as f64 + (dim as f64 + 1.0) / 2.0
}

/// How the density was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    Weighted,
    /// `m_i = 1`; for compactly supported kernels.
    Lebesgue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMeasure {
    kind: MeasureKind,
    growth_order: u32,
    dim: usize,
    density: Vec<f64>,
    effective_weights: Vec<f64>,
}

impl WeightedMeasure {
    pub fn new(grid: &Grid, growth_order: u32) -> Self {
        let density: Vec<f64> =
            grid.nodes().map(|x| mu_density(x, growth_order, grid.dim())).collect();
        let effective_weights = density.iter().zip(grid.weights()).map(|(m, w)| m * w).collect();
        WeightedMeasure {
            kind: MeasureKind::Weighted,
            growth_order,
            dim: grid.dim(),
            density,
            effective_weights,
        }
    }

    /// Plain Lebesgue quadrature (`m_i = 1`), treated as `M = 0` with no
    /// weight transform between `f_n` and `g_n`.
    pub fn lebesgue(grid: &Grid) -> Self {
        WeightedMeasure {
            kind: MeasureKind::Lebesgue,
            growth_order: 0,
            dim: grid.dim(),
            density: vec![1.0; grid.len()],
            effective_weights: grid.weights().to_vec(),
        }
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn growth_order(&self) -> u32 {
        self.growth_order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    /// `m_i`.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// `v_i = w_i m_i`.
    pub fn effective_weights(&self) -> &[f64] {
        &self.effective_weights
    }

    pub fn total_mass(&self) -> f64 {
        self.effective_weights.iter().sum()
    }

    /// Exponent `p` of the multiplier `(1+|x|^2)^p` taking `g_n` to `f_n`:
    /// `M/2 + (d+1)/4`, or zero for the Lebesgue override.
    pub fn weight_exponent(&self) -> f64 {
        match self.kind {
            MeasureKind::Weighted => density_exponent(self.growth_order, self.dim) / 2.0,
            MeasureKind::Lebesgue => 0.0,
        }
    }
}

/// Quadrature approximation of `(f, g)_{L^2(mu)}`.
pub fn weighted_inner(f: &[f64], g: &[f64], grid: &Grid, measure: &WeightedMeasure) -> Result<f64> {
    grid.check_len(f.len())?;
    grid.check_len(g.len())?;
    grid.check_len(measure.len())?;
    Ok(dot_weighted(f, g, measure.effective_weights()))
}
