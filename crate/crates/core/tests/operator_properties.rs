mod common;

use std::sync::Arc;

use common::quad;
use gesp_core::operators::bessel_potential_detailed;
use gesp_core::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn uniform(points: usize) -> Grid {
    build_grid(1, 20.0, points, QuadratureRule::Trapezoid).unwrap()
}

fn norm(f: &[f64], g: &Grid) -> f64 {
    quad(f, f, g.weights()).sqrt()
}

#[test]
fn bessel_half_roundtrip_on_bank() {
    let g = uniform(256);
    let bank = build_bank(8, &g).unwrap();
    for j in 0..bank.len() {
        let phi = bank.member(j);
        let up = bessel_potential(&phi, 0.5, &g).unwrap();
        let back = bessel_potential(&up, -0.5, &g).unwrap();
        let err = phi.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8, "member {j}: {err}");
    }
}

#[test]
fn plane_wave_eigenvalue() {
    let g = uniform(256);
    let h = g.spacing().unwrap();
    let period = g.points_per_axis() as f64 * h;
    for k in [1.0, 3.0, 10.0] {
        let xi = 2.0 * std::f64::consts::PI * k / period;
        let wave = g.sample(|x| (xi * x[0]).cos());
        for alpha in [1.0, -1.0, 0.5] {
            let out = bessel_potential(&wave, alpha, &g).unwrap();
            let lam = (1.0 + xi * xi).powf(alpha);
            for (o, w) in out.iter().zip(&wave) {
                assert!((o - lam * w).abs() <= 1e-9, "k={k} alpha={alpha}");
            }
        }
    }
}

#[test]
fn laplacian_of_hermite_ground_state() {
    // (1 - Delta) h_0 = (2 - x^2) h_0 since h_0'' = (x^2 - 1) h_0
    let g = uniform(512);
    let h0 = g.sample(|x| hermite_function(0, x[0]));
    let out = bessel_potential(&h0, 1.0, &g).unwrap();
    for (i, x) in g.nodes().enumerate() {
        let e = (2.0 - x[0] * x[0]) * h0[i];
        assert!((out[i] - e).abs() < 1e-10);
    }
}

#[test]
fn residue_and_leakage_diagnostics() {
    let g = uniform(128);
    let bump = g.sample(|x| (-x[0] * x[0]).exp());
    let out = bessel_potential_detailed(&bump, 1.0, &g, 1).unwrap();
    assert!(!out.imag_residue_flagged());
    assert!(out.leakage < 1e-12);
    let alternating: Vec<f64> = (0..g.len()).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    assert_eq!(bessel_potential(&alternating, 1.0, &g).unwrap_err().kind(), "SpectralLeakage");
    // smoothing direction is never rejected
    assert!(bessel_potential(&alternating, -1.0, &g).is_ok());
    let gl = build_grid(1, 20.0, 64, QuadratureRule::GaussLegendre).unwrap();
    assert_eq!(bessel_potential(&vec![0.0; 64], 1.0, &gl).unwrap_err().kind(), "NonUniformGrid");
}

#[test]
fn two_dimensional_bessel_is_separable_on_products() {
    let g = build_grid(2, 12.0, 64, QuadratureRule::Trapezoid).unwrap();
    let bank = build_bank(3, &g).unwrap();
    // (1 - Delta) (h_1 x h_0) = (5 - x^2 - y^2) h_1 h_0 by the Hermite ODE
    let phi = bank.member(1);
    let out = bessel_potential(&phi, 1.0, &g).unwrap();
    for (i, x) in g.nodes().enumerate() {
        let e = (5.0 - x[0] * x[0] - x[1] * x[1]) * phi[i];
        assert!((out[i] - e).abs() < 1e-9);
    }
}

#[test]
fn spectral_diagonal_norm_bound_and_identity() {
    let g = build_grid(1, 20.0, 128, QuadratureRule::GaussLegendre).unwrap();
    let mu = WeightedMeasure::new(&g, 0);
    let k = assemble_covariance_matrix(&CovarianceKernel::gaussian(1.0), &g, &mu).unwrap();
    let d = nystrom_eigendecompose(&k, &g, &mu, 128, 1e-10).unwrap();
    let basis = d.l2_basis().clone();
    let sigma: Vec<f64> = d.eigenvalues().iter().map(|l| l.sqrt()).collect();
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    let lq = FactoredOperator::new(vec![Stage::SpectralDiagonal { values: sigma, basis: Some(basis.clone()) }]).unwrap();
    let full = FactoredOperator::new(vec![Stage::SpectralDiagonal { values: vec![1.0; 128], basis: Some(basis) }]).unwrap();
    let bank = build_bank(8, &g).unwrap();
    for j in 0..bank.len() {
        let phi = bank.member(j);
        let out = apply_to_test_function(&lq, &phi, &g).unwrap();
        assert!(norm(&out, &g) <= smax * norm(&phi, &g) * (1.0 + 1e-12));
        let same = apply_to_test_function(&full, &phi, &g).unwrap();
        let err = phi.iter().zip(&same).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8);
    }
    let missing = FactoredOperator::new(vec![Stage::SpectralDiagonal { values: vec![1.0], basis: None }]).unwrap();
    assert_eq!(apply_to_test_function(&missing, &bank.member(0), &g).unwrap_err().kind(), "BasisMissing");
}

#[test]
fn relabel_maps_targets_to_sources() {
    let g = build_grid(1, 12.0, 128, QuadratureRule::GaussLegendre).unwrap();
    let bank = build_bank(4, &g).unwrap();
    let src = Arc::new(DMatrix::from_fn(g.len(), 2, |i, k| bank.samples()[(i, k + 2)]));
    let tgt = Arc::new(bank.samples().clone());
    let op = FactoredOperator::new(vec![Stage::CoefficientRelabel { map: vec![1, 0], source: Some(src), target: Some(tgt) }])
        .unwrap();
    // h_1 -> source_0 = h_2, h_0 -> source_1 = h_3, h_2 -> 0
    let out = apply_to_test_function(&op, &bank.member(1), &g).unwrap();
    let e = bank.member(2);
    assert!(out.iter().zip(&e).all(|(a, b)| (a - b).abs() < 1e-10));
    let out = apply_to_test_function(&op, &bank.member(2), &g).unwrap();
    assert!(out.iter().all(|a| a.abs() < 1e-10));
    assert!(FactoredOperator::new(vec![Stage::CoefficientRelabel { map: vec![1, 1], source: None, target: None }]).is_err());
}

#[test]
fn pipeline_matches_individual_ops_bitwise() {
    let g = uniform(128);
    let h0 = g.sample(|x| hermite_function(0, x[0]));
    let op = FactoredOperator::new(vec![Stage::WeightMultiply { exponent: 0.75 }, Stage::BesselPotential { alpha: 1.0 }]).unwrap();
    let direct = bessel_potential(&weight_multiply(&h0, 0.75, &g).unwrap(), 1.0, &g).unwrap();
    assert_eq!(apply_to_test_function(&op, &h0, &g).unwrap(), direct);
    assert_eq!(apply_to_test_function(&FactoredOperator::identity(), &h0, &g).unwrap(), h0);
}

#[test]
fn operator_serializes_as_stage_records() {
    let op = FactoredOperator::new(vec![Stage::BesselPotential { alpha: 1.0 }, Stage::WeightMultiply { exponent: -0.5 }]).unwrap();
    let text = serde_json::to_string(&op).unwrap();
    let back: FactoredOperator = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
    assert!(text.contains("bessel-potential"));
    assert!(FactoredOperator::new(vec![Stage::WeightMultiply { exponent: f64::NAN }]).is_err());
    assert!(FactoredOperator::new(vec![Stage::SpectralDiagonal { values: vec![-1.0], basis: None }]).is_err());
}

fn bank_combination(coeffs: &[f64], g: &Grid) -> Vec<f64> {
    let bank = build_bank(coeffs.len(), g).unwrap();
    (0..g.len()).map(|i| coeffs.iter().enumerate().map(|(j, c)| c * bank.samples()[(i, j)]).sum()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weight_multiply_inverts(p in -3.0f64..3.0, shift in -2.0f64..2.0) {
        let g = build_grid(1, 10.0, 64, QuadratureRule::GaussLegendre).unwrap();
        let f = g.sample(|x| (-(x[0] - shift).powi(2)).exp() + 0.1 * x[0]);
        let back = weight_multiply(&weight_multiply(&f, p, &g).unwrap(), -p, &g).unwrap();
        for (a, b) in f.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn bessel_is_self_adjoint(
        alpha in -1.5f64..1.5,
        a in proptest::collection::vec(-1.0f64..1.0, 6),
        b in proptest::collection::vec(-1.0f64..1.0, 6),
    ) {
        let g = uniform(256);
        let phi = bank_combination(&a, &g);
        let psi = bank_combination(&b, &g);
        let lhs = quad(&bessel_potential(&phi, alpha, &g).unwrap(), &psi, g.weights());
        let rhs = quad(&phi, &bessel_potential(&psi, alpha, &g).unwrap(), g.weights());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * norm(&phi, &g) * norm(&psi, &g));
    }

    #[test]
    fn composition_is_associative(p in -1.0f64..1.0, alpha in -1.0f64..1.0, q in -1.0f64..1.0) {
        let g = uniform(128);
        let phi = bank_combination(&[0.3, -0.2, 0.5, 0.1], &g);
        let a = FactoredOperator::new(vec![Stage::WeightMultiply { exponent: p }]).unwrap();
        let b = FactoredOperator::new(vec![Stage::BesselPotential { alpha }]).unwrap();
        let c = FactoredOperator::new(vec![Stage::WeightMultiply { exponent: q }]).unwrap();
        let left = apply_to_test_function(&a.then(&b).then(&c), &phi, &g).unwrap();
        let right = apply_to_test_function(&a.then(&b.then(&c)), &phi, &g).unwrap();
        let staged = apply_to_test_function(&c, &apply_to_test_function(&b, &apply_to_test_function(&a, &phi, &g).unwrap(), &g).unwrap(), &g).unwrap();
        for ((l, r), s) in left.iter().zip(&right).zip(&staged) {
            prop_assert!((l - r).abs() <= 1e-12 && (l - s).abs() <= 1e-12);
        }
    }
}
