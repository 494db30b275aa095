mod common;

use std::f64::consts::PI;

use common::*;
use harmconf::geometry::{check_asymptotic_flatness, scalar_curvature_radial};
use harmconf::quadrature::sphere_quadrature;
use harmconf::{constants, BaseGeometry, Error, GeometryKind, GeometrySpec};

#[test]
fn constants_in_five_dimensions() {
    let c = constants(dim(5));
    assert!((c.p - 8.0 / 3.0).abs() < 1e-15);
    assert!((c.k - 4.0 / 3.0).abs() < 1e-15);
    assert!((c.omega - 8.0 * PI * PI / 3.0).abs() < 1e-13);
}

#[test]
fn constants_reject_out_of_range() {
    assert!(matches!(harmconf::Dimension::new(2), Err(Error::DimensionOutOfRange(2))));
    assert!(harmconf::Dimension::new(8).is_err());
}

#[test]
fn schwarzschild_profile_is_scalar_flat() {
    let base = BaseGeometry::schwarzschild(dim(3), 2.0, 8000, 1e4).unwrap();
    assert!(scalar_curvature_radial(&base, 2.0).unwrap().abs() < 1e-6);
}

#[test]
fn curvature_of_perturbed_profile_matches_differences() {
    let rho = |r: f64| r * (1.0 + r.powi(-2));
    let base = sampled(3, 1.0, 1e3, 6000, rho);
    let exact = curvature_fd(3, rho, 2.0, 1e-4);
    let got = scalar_curvature_radial(&base, 2.0).unwrap();
    assert!(rel(got, exact) < 1e-6, "{got} vs {exact}");
}

#[test]
fn curvature_outside_samples_is_an_error() {
    let base = sampled(3, 1.0, 1e2, 200, |r| r);
    assert!(matches!(scalar_curvature_radial(&base, 0.5), Err(Error::OutOfRange { .. })));
    assert!(scalar_curvature_radial(&base, 200.0).is_err());
}

#[test]
fn asymptotic_flatness_reports() {
    let flat = check_asymptotic_flatness(&flat(3, 1.0)).unwrap();
    assert!(flat.pass && flat.decay_exponent_estimate.is_infinite());

    let schw = check_asymptotic_flatness(&BaseGeometry::schwarzschild(dim(3), 2.0, 4000, 1e4).unwrap()).unwrap();
    assert!(schw.pass);
    assert!(schw.decay_exponent_estimate > 0.5 && schw.decay_exponent_estimate < 1.2);

    let slow = check_asymptotic_flatness(&sampled(3, 1.0, 1e4, 2000, |r| r + r.powf(0.9))).unwrap();
    assert!(!slow.pass);
    assert!((slow.decay_exponent_estimate - 0.1).abs() < 0.05);
}

#[test]
fn quadrature_examples() {
    let g0 = sphere_quadrature(dim(3), 0, 0).unwrap();
    assert_eq!(g0.len(), 1);
    assert!((g0.weights()[0] - 4.0 * PI).abs() < 1e-13);

    let g = sphere_quadrature(dim(3), 8, 0).unwrap();
    let total: f64 = g.weights().iter().sum();
    assert!((total - 4.0 * PI).abs() < 1e-12 * 4.0 * PI);
    let k = g.modes().iter().position(|m| m.l == 2 && m.m == 0).unwrap();
    let y: Vec<f64> = (0..g.len()).map(|i| g.basis(i, k).powi(2)).collect();
    assert!((g.integrate(&y) - 1.0).abs() < 1e-12);
}

#[test]
fn radial_only_above_three_dimensions() {
    assert!(matches!(sphere_quadrature(dim(4), 2, 0), Err(Error::UnsupportedGrid { .. })));
    let g = sphere_quadrature(dim(6), 0, 0).unwrap();
    assert!((g.weights()[0] - constants(dim(6)).omega).abs() < 1e-12);
}

#[test]
fn geometry_spec_round_trip() {
    let text = r#"{"n": 3, "kind": "flat_exterior", "r0": 2.0}"#;
    let spec: GeometrySpec = serde_json::from_str(text).unwrap();
    assert_eq!(spec.kind, GeometryKind::FlatExterior);
    let base = BaseGeometry::from_spec(&spec).unwrap();
    assert_eq!(base.to_spec(), spec);

    let warped = BaseGeometry::schwarzschild(dim(3), 2.0, 400, 1e3).unwrap();
    let json = serde_json::to_string(&warped.to_spec()).unwrap();
    let back = BaseGeometry::from_spec(&serde_json::from_str(&json).unwrap()).unwrap();
    for r in [warped.r0(), 3.0, 40.0] {
        assert_eq!(back.rho(r).unwrap(), warped.rho(r).unwrap());
    }
    assert_eq!(back.adm_mass_base(), warped.adm_mass_base());
}

#[test]
fn warped_requires_positive_increasing_samples() {
    assert!(BaseGeometry::warped(dim(3), vec![[1.0, 1.0], [2.0, 2.0]], None).is_err());
    let bad: Vec<[f64; 2]> = (0..10).map(|i| [1.0 + i as f64, if i == 4 { -1.0 } else { 1.0 + i as f64 }]).collect();
    assert!(BaseGeometry::warped(dim(3), bad, None).is_err());
}
