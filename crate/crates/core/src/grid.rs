//! Truncated tensor-product quadrature grids on `[-R, R]^d`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::WeightedMeasure;

pub const MAX_DIMENSION: usize = 3;

/// One-dimensional rule used on every axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    #[default]
    GaussLegendre,
    /// Uniform nodes including both endpoints, endpoint weights halved.
    Trapezoid,
}

/// Tensor-product discretization of the truncated domain.
///
/// Nodes are stored row-major with the last axis varying fastest, so node
/// `i` has axis indices `(i / P^(d-1), ..., i % P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    halfwidth: f64,
    points_per_axis: usize,
    rule: QuadratureRule,
    axis_nodes: Vec<f64>,
    axis_weights: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Builds the tensor grid of `points_per_axis^dim` nodes on `[-halfwidth, halfwidth]^dim`.
pub fn build_grid(
    dim: usize,
    halfwidth: f64,
    points_per_axis: usize,
    rule: QuadratureRule,
) -> Result<Grid> {
    if dim == 0 || dim > MAX_DIMENSION {
        return Err(Error::DimensionUnsupported(dim));
    }
    if !halfwidth.is_finite() || halfwidth <= 0.0 {
        return Err(Error::DegenerateGrid(format!("halfwidth {halfwidth} must be positive")));
    }
    if points_per_axis < 2 {
        return Err(Error::DegenerateGrid(format!(
            "points_per_axis {points_per_axis} must be at least 2"
        )));
    }

    let (axis_nodes, axis_weights) = match rule {
        QuadratureRule::GaussLegendre => gauss_legendre(points_per_axis, halfwidth),
        QuadratureRule::Trapezoid => trapezoid(points_per_axis, halfwidth),
    };

    let n = points_per_axis.pow(dim as u32);
    let mut nodes = Vec::with_capacity(n * dim);
    let mut weights = Vec::with_capacity(n);
    let mut idx = vec![0usize; dim];
    for _ in 0..n {
        let mut w = 1.0;
        for &k in &idx {
            nodes.push(axis_nodes[k]);
            w *= axis_weights[k];
        }
        weights.push(w);
        // odometer, last axis fastest
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < points_per_axis {
                break;
            }
            idx[a] = 0;
        }
    }

    Ok(Grid {
        dim,
        halfwidth,
        points_per_axis,
        rule,
        axis_nodes,
        axis_weights,
        nodes,
        weights,
    })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    /// Total node count `P^d`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.nodes.chunks_exact(self.dim)
    }

    /// Lebesgue quadrature weights `w_i`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn axis_nodes(&self) -> &[f64] {
        &self.axis_nodes
    }

    pub fn axis_weights(&self) -> &[f64] {
        &self.axis_weights
    }

    /// `|x_i|^2`.
    pub fn norm_sq(&self, i: usize) -> f64 {
        self.node(i).iter().map(|x| x * x).sum()
    }

    /// Node spacing for uniform grids, `None` for Gauss-Legendre.
    pub fn spacing(&self) -> Option<f64> {
        match self.rule {
            QuadratureRule::Trapezoid => {
                Some(2.0 * self.halfwidth / (self.points_per_axis - 1) as f64)
            }
            QuadratureRule::GaussLegendre => None,
        }
    }

    /// Per-axis indices of node `i`.
    pub fn axis_indices(&self, mut i: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            out[a] = i % self.points_per_axis;
            i /= self.points_per_axis;
        }
        out
    }

    /// Samples `f` at every node.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes().map(f).collect()
    }

    /// Discrete `L^2(R^d)` inner product with Lebesgue weights.
    pub fn l2_inner(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_len(f.len())?;
        self.check_len(g.len())?;
        Ok(dot_weighted(f, g, &self.weights))
    }

    pub(crate) fn check_len(&self, found: usize) -> Result<()> {
        if found != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), found });
        }
        Ok(())
    }

    /// Writes `index, x_1..x_d, lebesgue_weight, mu_density` rows.
    pub fn write_csv<W: Write>(&self, measure: &WeightedMeasure, out: W) -> Result<()> {
        self.check_len(measure.len())?;
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string()];
        header.extend((0..self.dim).map(|a| format!("x{a}")));
        header.push("lebesgue_weight".into());
        header.push("mu_density".into());
        wtr.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![i.to_string()];
            row.extend(self.node(i).iter().map(|x| format!("{x:e}")));
            row.push(format!("{:e}", self.weights[i]));
            row.push(format!("{:e}", measure.density()[i]));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub(crate) fn dot_weighted(f: &[f64], g: &[f64], w: &[f64]) -> f64 {
    f.iter().zip(g).zip(w).map(|((a, b), w)| a * b * w).sum()
}

fn trapezoid(p: usize, halfwidth: f64) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 * halfwidth / (p - 1) as f64;
    let nodes = (0..p).map(|i| -halfwidth + i as f64 * h).collect();
    let weights = (0..p)
        .map(|i| if i == 0 || i == p - 1 { 0.5 * h } else { h })
        .collect();
    (nodes, weights)
}

/// Gauss-Legendre nodes and weights on `[-halfwidth, halfwidth]` by Newton
/// iteration on the Legendre polynomial, ascending order.
fn gauss_legendre(p: usize, halfwidth: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; p];
    let mut weights = vec![0.0; p];
    let n = p as f64;
    for i in 0..p.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (pn, dpn) = legendre_with_derivative(p, x);
            dp = dpn;
            let dx = pn / dpn;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dpn) = legendre_with_derivative(p, x);
        if dpn != 0.0 {
            dp = dpn;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[p - 1 - i] = x * halfwidth;
        nodes[i] = -x * halfwidth;
        weights[p - 1 - i] = w * halfwidth;
        weights[i] = w * halfwidth;
    }
    if p % 2 == 1 {
        nodes[p / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let dp = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trapezoid_endpoint_rule() {
        let g = build_grid(1, 1.0, 2, QuadratureRule::Trapezoid).unwrap();
        assert_eq!(g.axis_nodes(), &[-1.0, 1.0]);
        assert_eq!(g.weights(), &[1.0, 1.0]);
    }

    #[test]
    fn gauss_legendre_sums_to_length() {
        let g = build_grid(1, 10.0, 256, QuadratureRule::GaussLegendre).unwrap();
        let s: f64 = g.weights().iter().sum();
        assert_relative_eq!(s, 20.0, max_relative = 1e-12);
        assert!(g.axis_nodes().iter().all(|x| x.abs() <= 10.0));
        assert!(g.axis_nodes().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn tensor_grid_2d() {
        let g = build_grid(2, 5.0, 64, QuadratureRule::GaussLegendre).unwrap();
        assert_eq!(g.len(), 4096);
        let s: f64 = g.weights().iter().sum();
        assert_relative_eq!(s, 100.0, max_relative = 1e-12);
        assert_eq!(g.node(65), &[g.axis_nodes()[1], g.axis_nodes()[1]]);
        assert_eq!(g.axis_indices(65), vec![1, 1]);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        // degree 2P-1 exactness: int_{-1}^{1} x^6 = 2/7 with P = 4
        let g = build_grid(1, 1.0, 4, QuadratureRule::GaussLegendre).unwrap();
        let f = g.sample(|x| x[0].powi(6));
        let s: f64 = f.iter().zip(g.weights()).map(|(a, w)| a * w).sum();
        assert_relative_eq!(s, 2.0 / 7.0, max_relative = 1e-14);
    }

    #[test]
    fn odd_point_count_has_center_node() {
        let g = build_grid(1, 3.0, 9, QuadratureRule::GaussLegendre).unwrap();
        assert_eq!(g.axis_nodes()[4], 0.0);
        let s: f64 = g.weights().iter().sum();
        assert_relative_eq!(s, 6.0, max_relative = 1e-13);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(
            build_grid(4, 1.0, 8, QuadratureRule::Trapezoid),
            Err(Error::DimensionUnsupported(4))
        );
        assert!(matches!(
            build_grid(1, 0.0, 8, QuadratureRule::Trapezoid),
            Err(Error::DegenerateGrid(_))
        ));
        assert!(matches!(
            build_grid(1, 1.0, 1, QuadratureRule::GaussLegendre),
            Err(Error::DegenerateGrid(_))
        ));
    }

    #[test]
    fn trapezoid_3d_mass() {
        let g = build_grid(3, 2.0, 8, QuadratureRule::Trapezoid).unwrap();
        assert_eq!(g.len(), 512);
        let s: f64 = g.weights().iter().sum();
        assert_relative_eq!(s, 64.0, max_relative = 1e-12);
        assert_relative_eq!(g.spacing().unwrap(), 4.0 / 7.0);
    }
}
