#![allow(dead_code)]

use std::sync::Arc;

use harmconf::harmonic::Exterior;
use harmconf::quadrature::{sphere_quadrature, sphere_quadrature_axisymmetric};
use harmconf::{BaseGeometry, Dimension};

pub fn dim(n: usize) -> Dimension {
    Dimension::new(n).unwrap()
}

pub fn flat(n: usize, r0: f64) -> BaseGeometry {
    BaseGeometry::flat(dim(n), r0).unwrap()
}

pub fn flat_ext(n: usize, l_max: usize) -> Arc<Exterior> {
    Exterior::new(flat(n, 1.0), sphere_quadrature(dim(n), l_max, 0).unwrap()).unwrap()
}

pub fn axi_ext(base: &BaseGeometry, nodes: usize) -> Arc<Exterior> {
    Exterior::new(base.clone(), sphere_quadrature_axisymmetric(dim(3), nodes - 1, nodes).unwrap()).unwrap()
}

pub fn radial_ext(base: &BaseGeometry) -> Arc<Exterior> {
    Exterior::new(base.clone(), sphere_quadrature(base.dimension(), 0, 0).unwrap()).unwrap()
}

/// Warped base sampled from a closed-form `rho` on a geometric grid.
pub fn sampled(n: usize, r0: f64, r_max: f64, count: usize, rho: impl Fn(f64) -> f64) -> BaseGeometry {
    let samples: Vec<[f64; 2]> = (0..count)
        .map(|i| {
            let r = r0 * (r_max / r0).powf(i as f64 / (count - 1) as f64);
            [r, rho(r)]
        })
        .collect();
    BaseGeometry::warped(dim(n), samples, None).unwrap()
}

/// Composite Simpson rule on `[a, b]` with `m` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Scalar curvature of `dr² + rho² g_S` from central differences of `rho`.
pub fn curvature_fd(n: usize, rho: impl Fn(f64) -> f64, r: f64, h: f64) -> f64 {
    let (m, c, p) = (rho(r - h), rho(r), rho(r + h));
    let d1 = (p - m) / (2.0 * h);
    let d2 = (p - 2.0 * c + m) / (h * h);
    let nf = n as f64;
    (nf - 1.0) * ((nf - 2.0) * (1.0 - d1 * d1) / (c * c) - 2.0 * d2 / c)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
