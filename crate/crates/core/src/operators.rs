//! Linear operators acting on sampled test functions.
//!
//! Operators on processes are never applied to (possibly polynomially
//! growing) sample paths. A [`FactoredOperator`] stores its stages in the
//! order they hit a test function, so for a process `Z` and an operator with
//! stages `[A, B, C]`,
//!
//! ```text
//! (A o B o C) Z (phi) = Z( C(B(A(phi))) )
//! ```
//!
//! which reads the stage list left to right on the test-function side.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dot_weighted, Grid, QuadratureRule};

/// Leakage is measured over frequencies with `|xi_axis| >= LEAKAGE_BAND * xi_nyquist`.
pub const LEAKAGE_BAND: f64 = 0.9;
/// Largest tolerated spectral energy fraction in the leakage band when `alpha > 0`.
pub const LEAKAGE_TOL: f64 = 1e-3;
/// Relative imaginary residue above which the Bessel output is flagged.
pub const IMAG_RESIDUE_TOL: f64 = 1e-9;

/// One factor of a [`FactoredOperator`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "kebab-case")]
pub enum Stage {
    /// `(1 - Delta)^alpha` as a Fourier multiplier.
    BesselPotential { alpha: f64 },
    /// Pointwise `(1 + |x|^2)^exponent`.
    WeightMultiply { exponent: f64 },
    /// `phi -> sum_n values[n] <phi, g_n> g_n`.
    SpectralDiagonal {
        values: Vec<f64>,
        #[serde(skip)]
        basis: Option<Arc<DMatrix<f64>>>,
    },
    /// `phi -> sum_k <phi, target_{map[k]}> source_k`.
    CoefficientRelabel {
        map: Vec<usize>,
        #[serde(skip)]
        source: Option<Arc<DMatrix<f64>>>,
        #[serde(skip)]
        target: Option<Arc<DMatrix<f64>>>,
    },
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::BesselPotential { .. } => "bessel-potential",
            Stage::WeightMultiply { .. } => "weight-multiply",
            Stage::SpectralDiagonal { .. } => "spectral-diagonal",
            Stage::CoefficientRelabel { .. } => "coefficient-relabel",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Stage::BesselPotential { alpha } if !alpha.is_finite() => {
                Err(Error::InvalidParameter(format!("Bessel order {alpha}")))
            }
            Stage::WeightMultiply { exponent } if !exponent.is_finite() => {
                Err(Error::InvalidParameter(format!("weight exponent {exponent}")))
            }
            Stage::SpectralDiagonal { values, basis } => {
                if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
                    return Err(Error::InvalidParameter(format!("spectral value {v}")));
                }
                if let Some(b) = basis {
                    if b.ncols() != values.len() {
                        return Err(Error::ShapeMismatch { expected: values.len(), found: b.ncols() });
                    }
                }
                Ok(())
            }
            Stage::CoefficientRelabel { map, source, target } => {
                let mut seen = std::collections::HashSet::new();
                if !map.iter().all(|k| seen.insert(*k)) {
                    return Err(Error::InvalidParameter("relabel map is not injective".into()));
                }
                if let Some(s) = source {
                    if s.ncols() != map.len() {
                        return Err(Error::ShapeMismatch { expected: map.len(), found: s.ncols() });
                    }
                }
                if let (Some(t), Some(&max)) = (target, map.iter().max()) {
                    if max >= t.ncols() {
                        return Err(Error::ShapeMismatch { expected: max + 1, found: t.ncols() });
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Ordered composition of stages (test-function direction).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FactoredOperator {
    stages: Vec<Stage>,
}

impl FactoredOperator {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        for s in &stages {
            s.validate()?;
        }
        Ok(FactoredOperator { stages })
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn is_identity(&self) -> bool {
        self.stages.is_empty()
    }

    /// `self` followed by `next` on the test-function side.
    pub fn then(&self, next: &FactoredOperator) -> FactoredOperator {
        let mut stages = self.stages.clone();
        stages.extend(next.stages.iter().cloned());
        FactoredOperator { stages }
    }
}

/// Applies every stage of `op` to `phi`, left to right.
pub fn apply_to_test_function(op: &FactoredOperator, phi: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    grid.check_len(phi.len())?;
    let mut cur = phi.to_vec();
    for stage in &op.stages {
        cur = apply_stage(stage, &cur, grid)?;
    }
    Ok(cur)
}

fn apply_stage(stage: &Stage, phi: &[f64], grid: &Grid) -> Result<Vec<f64>> {
    match stage {
        Stage::BesselPotential { alpha } => bessel_potential(phi, *alpha, grid),
        Stage::WeightMultiply { exponent } => weight_multiply(phi, *exponent, grid),
        Stage::SpectralDiagonal { values, basis } => {
            let basis = basis.as_deref().ok_or(Error::BasisMissing("spectral-diagonal"))?;
            grid.check_len(basis.nrows())?;
            let mut out = vec![0.0; phi.len()];
            for (n, &s) in values.iter().enumerate() {
                if s == 0.0 {
                    continue;
                }
                let g = basis.column(n);
                let c = s * dot_weighted(phi, g.as_slice(), grid.weights());
                for (o, gi) in out.iter_mut().zip(g.iter()) {
                    *o += c * gi;
                }
            }
            Ok(out)
        }
        Stage::CoefficientRelabel { map, source, target } => {
            let source = source.as_deref().ok_or(Error::BasisMissing("coefficient-relabel"))?;
            let target = target.as_deref().ok_or(Error::BasisMissing("coefficient-relabel"))?;
            grid.check_len(source.nrows())?;
            grid.check_len(target.nrows())?;
            let mut out = vec![0.0; phi.len()];
            for (k, &t) in map.iter().enumerate() {
                let c = dot_weighted(phi, target.column(t).as_slice(), grid.weights());
                for (o, si) in out.iter_mut().zip(source.column(k).iter()) {
                    *o += c * si;
                }
            }
            Ok(out)
        }
    }
}

/// Pointwise product with `(1 + |x_i|^2)^exponent`.
pub fn weight_multiply(field: &[f64], exponent: f64, grid: &Grid) -> Result<Vec<f64>> {
    grid.check_len(field.len())?;
    Ok(field
        .iter()
        .enumerate()
        .map(|(i, v)| v * (1.0 + grid.norm_sq(i)).powf(exponent))
        .collect())
}

/// Output of a Bessel-potential application with diagnostics.
#[derive(Debug, Clone)]
pub struct BesselOutput {
    pub values: Vec<f64>,
    /// `max |Im| / max |Re|` of the inverse transform before it was dropped.
    pub imag_residue: f64,
    /// Energy fraction of the input spectrum in the leakage band.
    pub leakage: f64,
}

impl BesselOutput {
    pub fn imag_residue_flagged(&self) -> bool {
        self.imag_residue > IMAG_RESIDUE_TOL
    }
}

/// `(1 - Delta)^alpha` on the periodic extension of the grid.
pub fn bessel_potential(field: &[f64], alpha: f64, grid: &Grid) -> Result<Vec<f64>> {
    bessel_potential_detailed(field, alpha, grid, 1).map(|o| o.values)
}

/// Bessel potential with the grid zero-padded by `pad_factor` on every axis
/// before transforming; the result is restricted back to the grid.
pub fn bessel_potential_padded(
    field: &[f64],
    alpha: f64,
    grid: &Grid,
    pad_factor: usize,
) -> Result<Vec<f64>> {
    bessel_potential_detailed(field, alpha, grid, pad_factor).map(|o| o.values)
}

/// Applies the multiplier `(1 + |xi|^2)^alpha` with angular frequencies
/// `xi = 2 pi k / (pad_factor * P * h)` per axis, `k` in `[-P'/2, P'/2)`.
pub fn bessel_potential_detailed(
    field: &[f64],
    alpha: f64,
    grid: &Grid,
    pad_factor: usize,
) -> Result<BesselOutput> {
    if grid.rule() != QuadratureRule::Trapezoid {
        return Err(Error::NonUniformGrid);
    }
    grid.check_len(field.len())?;
    if let Some(v) = field.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite field sample {v}")));
    }
    if pad_factor == 0 {
        return Err(Error::InvalidParameter("pad factor must be >= 1".into()));
    }
    if alpha == 0.0 {
        return Ok(BesselOutput { values: field.to_vec(), imag_residue: 0.0, leakage: 0.0 });
    }

    let d = grid.dim();
    let p = grid.points_per_axis();
    let q = p * pad_factor;
    let h = grid.spacing().expect("uniform grid");
    let total = q.pow(d as u32);

    let mut buf = vec![Complex::new(0.0, 0.0); total];
    for (i, v) in field.iter().enumerate() {
        buf[padded_index(&grid.axis_indices(i), q)] = Complex::new(*v, 0.0);
    }

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(q);
    let inv = planner.plan_fft_inverse(q);
    transform_axes(&mut buf, q, d, |line| fwd.process(line));

    let period = q as f64 * h;
    let freq = |k: usize| {
        let signed = if k < q.div_ceil(2) { k as f64 } else { k as f64 - q as f64 };
        2.0 * std::f64::consts::PI * signed / period
    };
    let nyquist = std::f64::consts::PI / h;
    let mut energy = 0.0;
    let mut band_energy = 0.0;
    let mut idx = vec![0usize; d];
    for c in buf.iter_mut() {
        let mut xi2 = 0.0;
        let mut in_band = false;
        for &k in &idx {
            let xi = freq(k);
            xi2 += xi * xi;
            in_band |= xi.abs() >= LEAKAGE_BAND * nyquist;
        }
        let e = c.norm_sqr();
        energy += e;
        if in_band {
            band_energy += e;
        }
        *c *= (1.0 + xi2).powf(alpha);
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < q {
                break;
            }
            idx[a] = 0;
        }
    }
    let leakage = if energy > 0.0 { band_energy / energy } else { 0.0 };
    if alpha > 0.0 && leakage > LEAKAGE_TOL {
        return Err(Error::SpectralLeakage { fraction: leakage });
    }

    transform_axes(&mut buf, q, d, |line| inv.process(line));
    let scale = 1.0 / total as f64;
    let mut values = Vec::with_capacity(field.len());
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    for i in 0..field.len() {
        let c = buf[padded_index(&grid.axis_indices(i), q)] * scale;
        max_re = max_re.max(c.re.abs());
        max_im = max_im.max(c.im.abs());
        values.push(c.re);
    }
    let imag_residue = if max_re > 0.0 { max_im / max_re } else { max_im };
    Ok(BesselOutput { values, imag_residue, leakage })
}

fn padded_index(axis: &[usize], q: usize) -> usize {
    axis.iter().fold(0, |acc, &k| acc * q + k)
}

/// Runs `f` on every line of a row-major `q^d` array along every axis.
fn transform_axes<F: Fn(&mut [Complex<f64>])>(buf: &mut [Complex<f64>], q: usize, d: usize, f: F) {
    let mut line = vec![Complex::new(0.0, 0.0); q];
    for axis in 0..d {
        let stride = q.pow((d - 1 - axis) as u32);
        let block = stride * q;
        for start in (0..buf.len()).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (k, l) in line.iter_mut().enumerate() {
                    *l = buf[base + k * stride];
                }
                f(&mut line);
                for (k, l) in line.iter().enumerate() {
                    buf[base + k * stride] = *l;
                }
            }
        }
    }
}
