//! Angular quadrature on S^{n-1} and the orthonormal real sphere-harmonic basis.
//!
//! For n = 3 the grid is a tensor product of Gauss–Legendre nodes in cos θ and
//! a uniform azimuthal grid. An axisymmetric grid keeps a single azimuth and
//! only the m = 0 harmonics. For n > 3 only the constant mode is available.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Constants, Dimension};

/// Gauss–Legendre nodes and weights on [-1, 1], nodes in descending order.
pub fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let nf = count as f64;
    for i in 0..count.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(count, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(count, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[count - 1 - i] = -x;
        weights[count - 1 - i] = w;
    }
    if count % 2 == 1 {
        nodes[count / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(degree: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if degree == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=degree {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = degree as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fully normalised associated Legendre values `Q_l^m(cos θ)` for all
/// `0 <= m <= l <= l_max`, stored at index `l * (l + 1) / 2 + m`.
/// Normalised so that `∫ Q_l^m(μ)^2 dμ = 1 / (2π)` (the 4π convention without
/// the azimuthal factor).
pub fn normalized_legendre(l_max: usize, mu: f64) -> Vec<f64> {
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let mut q = vec![0.0; (l_max + 1) * (l_max + 2) / 2];
    let s = (1.0 - mu * mu).max(0.0).sqrt();
    q[0] = 1.0 / (4.0 * PI).sqrt();
    for m in 1..=l_max {
        let mf = m as f64;
        q[idx(m, m)] = ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * q[idx(m - 1, m - 1)];
    }
    for m in 0..l_max {
        let mf = m as f64;
        q[idx(m + 1, m)] = (2.0 * mf + 3.0).sqrt() * mu * q[idx(m, m)];
    }
    for m in 0..=l_max {
        let mf = m as f64;
        for l in (m + 2)..=l_max {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            q[idx(l, m)] = a * (mu * q[idx(l - 1, m)] - b * q[idx(l - 2, m)]);
        }
    }
    q
}

/// Degree/order label of a real sphere harmonic. Negative orders are the sine family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mode {
    pub l: usize,
    pub m: i64,
}

/// Real orthonormal harmonic `Y_{l,m}` on S^2 at (θ, φ).
pub fn real_harmonic(mode: Mode, theta: f64, phi: f64) -> f64 {
    let q = normalized_legendre(mode.l, theta.cos());
    harmonic_from_legendre(&q, mode, phi)
}

fn harmonic_from_legendre(q: &[f64], mode: Mode, phi: f64) -> f64 {
    let am = mode.m.unsigned_abs() as usize;
    let v = q[mode.l * (mode.l + 1) / 2 + am];
    match mode.m.cmp(&0) {
        std::cmp::Ordering::Equal => v,
        std::cmp::Ordering::Greater => std::f64::consts::SQRT_2 * v * (am as f64 * phi).cos(),
        std::cmp::Ordering::Less => std::f64::consts::SQRT_2 * v * (am as f64 * phi).sin(),
    }
}

/// Reconstructable description of a grid (used in JSON artifacts).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub l_max: usize,
    pub resolution: usize,
    #[serde(default)]
    pub axisymmetric: bool,
}

impl GridSpec {
    pub fn build(&self) -> Result<AngularGrid> {
        let n = Dimension::new(self.n)?;
        if self.axisymmetric {
            sphere_quadrature_axisymmetric(n, self.l_max, self.resolution)
        } else {
            sphere_quadrature(n, self.l_max, self.resolution)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub theta: f64,
    pub phi: f64,
}

/// Quadrature nodes on the unit sphere with the harmonic basis sampled at them.
#[derive(Debug, Clone)]
pub struct AngularGrid {
    spec: GridSpec,
    n_theta: usize,
    n_phi: usize,
    nodes: Vec<Node>,
    weights: Vec<f64>,
    modes: Vec<Mode>,
    /// Row-major `[node][mode]`.
    basis: Vec<f64>,
}

/// Builds the quadrature grid. For n = 3 this uses `max(l_max + 1, resolution)`
/// polar nodes and `2 l_max + 2` azimuths, which integrates products of
/// harmonics of degree ≤ l_max exactly.
pub fn sphere_quadrature(n: Dimension, l_max: usize, resolution: usize) -> Result<AngularGrid> {
    if n.get() > 3 {
        return radial_only(n, l_max, resolution);
    }
    let n_theta = (l_max + 1).max(resolution).max(1);
    let n_phi = if l_max == 0 { 1 } else { 2 * l_max + 2 };
    let mut modes = Vec::new();
    for l in 0..=l_max {
        modes.push(Mode { l, m: 0 });
        for m in 1..=l as i64 {
            modes.push(Mode { l, m });
            modes.push(Mode { l, m: -m });
        }
    }
    let spec = GridSpec { n: 3, l_max, resolution, axisymmetric: false };
    Ok(tensor_grid(spec, n_theta, n_phi, modes))
}

/// Axisymmetric grid: one azimuth, m = 0 harmonics only.
/// With `resolution <= l_max + 1` the node values and the l ≤ l_max
/// coefficients determine each other exactly.
pub fn sphere_quadrature_axisymmetric(n: Dimension, l_max: usize, resolution: usize) -> Result<AngularGrid> {
    if n.get() > 3 {
        return radial_only(n, l_max, resolution);
    }
    let n_theta = (l_max + 1).max(resolution).max(1);
    let modes = (0..=l_max).map(|l| Mode { l, m: 0 }).collect();
    let spec = GridSpec { n: 3, l_max, resolution, axisymmetric: true };
    Ok(tensor_grid(spec, n_theta, 1, modes))
}

fn radial_only(n: Dimension, l_max: usize, resolution: usize) -> Result<AngularGrid> {
    if l_max != 0 {
        return Err(Error::UnsupportedGrid { n: n.get(), l_max });
    }
    let omega = Constants::new(n).omega;
    Ok(AngularGrid {
        spec: GridSpec { n: n.get(), l_max: 0, resolution, axisymmetric: true },
        n_theta: 1,
        n_phi: 1,
        nodes: vec![Node { theta: 0.5 * PI, phi: 0.0 }],
        weights: vec![omega],
        modes: vec![Mode { l: 0, m: 0 }],
        basis: vec![1.0 / omega.sqrt()],
    })
}

fn tensor_grid(spec: GridSpec, n_theta: usize, n_phi: usize, modes: Vec<Mode>) -> AngularGrid {
    let (mu, w) = gauss_legendre(n_theta);
    let l_max = modes.iter().map(|m| m.l).max().unwrap_or(0);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut nodes = Vec::with_capacity(n_theta * n_phi);
    let mut weights = Vec::with_capacity(n_theta * n_phi);
    let mut basis = Vec::with_capacity(n_theta * n_phi * modes.len());
    for it in 0..n_theta {
        let theta = mu[it].clamp(-1.0, 1.0).acos();
        let q = normalized_legendre(l_max, mu[it]);
        for ip in 0..n_phi {
            let phi = ip as f64 * dphi;
            nodes.push(Node { theta, phi });
            weights.push(w[it] * dphi);
            for &mode in &modes {
                let v = harmonic_from_legendre(&q, mode, phi);
                // Axisymmetric grids carry the full 2π azimuthal factor in the weight.
                basis.push(v);
            }
        }
    }
    AngularGrid { spec, n_theta, n_phi, nodes, weights, modes, basis }
}

impl AngularGrid {
    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn dimension(&self) -> usize {
        self.spec.n
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn l_max(&self) -> usize {
        self.spec.l_max
    }

    pub fn is_axisymmetric(&self) -> bool {
        self.n_phi == 1
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn basis(&self, node: usize, mode: usize) -> f64 {
        self.basis[node * self.modes.len() + mode]
    }

    pub fn basis_row(&self, node: usize) -> &[f64] {
        let k = self.modes.len();
        &self.basis[node * k..(node + 1) * k]
    }

    pub fn node_index(&self, it: usize, ip: usize) -> usize {
        it * self.n_phi + ip
    }

    /// Weighted sum `Σ w_i v_i` (integral over the unit sphere).
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Projects node values onto the harmonic basis.
    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        let k = self.modes.len();
        let mut c = vec![0.0; k];
        for (i, (&w, &v)) in self.weights.iter().zip(values).enumerate() {
            let row = self.basis_row(i);
            for j in 0..k {
                c[j] += w * v * row[j];
            }
        }
        c
    }

    /// Evaluates a harmonic at an arbitrary direction (n = 3) or the constant
    /// mode (n > 3).
    pub fn harmonic_at(&self, mode: Mode, theta: f64, phi: f64) -> f64 {
        if self.spec.n > 3 {
            self.basis[0]
        } else {
            real_harmonic(mode, theta, phi)
        }
    }

    /// Values of every grid mode at an arbitrary direction.
    pub fn modes_at(&self, theta: f64, phi: f64) -> Vec<f64> {
        if self.spec.n > 3 {
            return vec![self.basis[0]];
        }
        let q = normalized_legendre(self.spec.l_max, theta.cos());
        self.modes.iter().map(|&m| harmonic_from_legendre(&q, m, phi)).collect()
    }

    /// Three-point polar derivative stencil at each node, with reflection
    /// across the poles. Entries are `(node, coefficient)`.
    pub(crate) fn theta_stencils(&self) -> Vec<Vec<(usize, f64)>> {
        let nt = self.n_theta;
        let np = self.n_phi;
        let mut out = Vec::with_capacity(self.len());
        if self.spec.n > 3 || nt == 1 && np == 1 {
            return vec![Vec::new(); self.len()];
        }
        let theta: Vec<f64> = (0..nt).map(|it| self.nodes[it * np].theta).collect();
        let antipode = |ip: usize| if np == 1 { 0 } else { (ip + np / 2) % np };
        for it in 0..nt {
            for ip in 0..np {
                let (tm, im) = if it == 0 {
                    (-theta[0], self.node_index(0, antipode(ip)))
                } else {
                    (theta[it - 1], self.node_index(it - 1, ip))
                };
                let (tp, ipn) = if it + 1 == nt {
                    (2.0 * PI - theta[nt - 1], self.node_index(nt - 1, antipode(ip)))
                } else {
                    (theta[it + 1], self.node_index(it + 1, ip))
                };
                let t0 = theta[it];
                let h1 = t0 - tm;
                let h2 = tp - t0;
                let cm = -h2 / (h1 * (h1 + h2));
                let c0 = (h2 - h1) / (h1 * h2);
                let cp = h1 / (h2 * (h1 + h2));
                let mut st = vec![(im, cm), (self.node_index(it, ip), c0), (ipn, cp)];
                merge_stencil(&mut st);
                out.push(st);
            }
        }
        out
    }

    /// Terms `(weight, stencil)` with `|∇r|² ≈ Σ weight (stencil · r)²` at each
    /// node, from backward and forward differences. Unlike the central
    /// stencils these see grid-scale oscillation.
    pub(crate) fn gradient_terms(&self) -> Vec<Vec<SlopeTerm>> {
        let nt = self.n_theta;
        let np = self.n_phi;
        let mut out = vec![Vec::new(); self.len()];
        if self.spec.n > 3 || nt == 1 && np == 1 {
            return out;
        }
        let theta: Vec<f64> = (0..nt).map(|it| self.nodes[it * np].theta).collect();
        let antipode = |ip: usize| if np == 1 { 0 } else { (ip + np / 2) % np };
        let dphi = 2.0 * PI / np as f64;
        for it in 0..nt {
            for ip in 0..np {
                let i = self.node_index(it, ip);
                let (tm, im) = if it == 0 {
                    (-theta[0], self.node_index(0, antipode(ip)))
                } else {
                    (theta[it - 1], self.node_index(it - 1, ip))
                };
                let (tp, ipn) = if it + 1 == nt {
                    (2.0 * PI - theta[nt - 1], self.node_index(nt - 1, antipode(ip)))
                } else {
                    (theta[it + 1], self.node_index(it + 1, ip))
                };
                let h1 = theta[it] - tm;
                let h2 = tp - theta[it];
                let mut back = vec![(im, -1.0 / h1), (i, 1.0 / h1)];
                let mut fwd = vec![(i, -1.0 / h2), (ipn, 1.0 / h2)];
                merge_stencil(&mut back);
                merge_stencil(&mut fwd);
                out[i].push((h2 / (h1 + h2), back));
                out[i].push((h1 / (h1 + h2), fwd));
                if np >= 3 {
                    let s2 = theta[it].sin().powi(2);
                    let a = self.node_index(it, (ip + np - 1) % np);
                    let b = self.node_index(it, (ip + 1) % np);
                    out[i].push((0.5 / s2, vec![(a, -1.0 / dphi), (i, 1.0 / dphi)]));
                    out[i].push((0.5 / s2, vec![(i, -1.0 / dphi), (b, 1.0 / dphi)]));
                }
            }
        }
        out
    }

    /// Periodic central azimuthal derivative stencil at each node.
    pub(crate) fn phi_stencils(&self) -> Vec<Vec<(usize, f64)>> {
        let np = self.n_phi;
        if np < 3 {
            return vec![Vec::new(); self.len()];
        }
        let dphi = 2.0 * PI / np as f64;
        let mut out = Vec::with_capacity(self.len());
        for it in 0..self.n_theta {
            for ip in 0..np {
                let a = self.node_index(it, (ip + np - 1) % np);
                let b = self.node_index(it, (ip + 1) % np);
                out.push(vec![(a, -0.5 / dphi), (b, 0.5 / dphi)]);
            }
        }
        out
    }
}

/// Weighted squared difference `weight (stencil · r)²`.
pub(crate) type SlopeTerm = (f64, Vec<(usize, f64)>);

fn merge_stencil(st: &mut Vec<(usize, f64)>) {
    st.sort_by_key(|e| e.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(st.len());
    for &(i, c) in st.iter() {
        match merged.last_mut() {
            Some(last) if last.0 == i => last.1 += c,
            _ => merged.push((i, c)),
        }
    }
    *st = merged;
}
