//! Exterior Dirichlet problem for g-harmonic functions with a prescribed value
//! at infinity, by separation into sphere-harmonic modes.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BaseGeometry;
use crate::ode::{integrate, Tolerance};
use crate::quadrature::{gauss_legendre, AngularGrid, GridSpec};

/// Quotients below this are rejected.
pub const POSITIVITY_FLOOR: f64 = 1e-12;

const ODE_TOL: Tolerance = Tolerance { abs: 1e-13, rel: 1e-11 };

#[derive(Debug, Clone)]
enum Profile {
    /// `(r0 / r)^{n-2+l}`.
    Closed,
    /// Tabulated `y = ln u`, `z = y'`, `z'` on ascending radii, with a
    /// power-law continuation past the last radius.
    Table { r: Vec<f64>, y: Vec<f64>, z: Vec<f64>, dz: Vec<f64> },
}

/// Decaying radial solution of the degree-`l` mode equation, normalised to 1 at `r0`.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub l: usize,
    pub decay_exponent: f64,
    /// `u_l'(r0)`.
    pub derivative_at_r0: f64,
    r0: f64,
    profile: Profile,
}

impl ModeSolution {
    /// `(u, u')` at `r >= r0`.
    pub fn value_and_derivative(&self, r: f64) -> (f64, f64) {
        match &self.profile {
            Profile::Closed => {
                let e = self.decay_exponent;
                let u = ratio_power(self.r0 / r, e);
                (u, -e * u / r)
            }
            Profile::Table { r: rs, y, z, dz } => {
                let last = rs.len() - 1;
                if r > rs[last] {
                    let e = -z[last] * rs[last];
                    let u = (y[last]).exp() * (rs[last] / r).powf(e);
                    return (u, -e * u / r);
                }
                let i = rs.partition_point(|&v| v <= r).clamp(1, last) - 1;
                let h = rs[i + 1] - rs[i];
                let s = (r - rs[i]) / h;
                let yv = hermite(y[i], y[i + 1], z[i] * h, z[i + 1] * h, s);
                let zv = hermite(z[i], z[i + 1], dz[i] * h, dz[i + 1] * h, s);
                let u = yv.exp();
                (u, u * zv)
            }
        }
    }

    pub fn profile(&self, r: f64) -> f64 {
        self.value_and_derivative(r).0
    }

    pub fn derivative(&self, r: f64) -> f64 {
        self.value_and_derivative(r).1
    }

    /// `u''` from the tabulated Riccati variables (exact for the closed form).
    pub fn second_derivative(&self, r: f64) -> f64 {
        match &self.profile {
            Profile::Closed => {
                let e = self.decay_exponent;
                e * (e + 1.0) * self.profile(r) / (r * r)
            }
            Profile::Table { r: rs, z, dz, .. } => {
                let last = rs.len() - 1;
                let (u, du) = self.value_and_derivative(r);
                if r > rs[last] {
                    let e = -z[last] * rs[last];
                    return e * (e + 1.0) * u / (r * r);
                }
                let i = rs.partition_point(|&v| v <= r).clamp(1, last) - 1;
                let h = rs[i + 1] - rs[i];
                let s = (r - rs[i]) / h;
                let zp = hermite_slope(z[i], z[i + 1], dz[i] * h, dz[i + 1] * h, s) / h;
                let zv = du / u;
                u * (zp + zv * zv)
            }
        }
    }
}

impl ModeSolution {
    /// Radii of the integration steps; empty for closed-form profiles.
    pub fn nodes(&self) -> &[f64] {
        match &self.profile {
            Profile::Closed => &[],
            Profile::Table { r, .. } => r,
        }
    }
}

fn ratio_power(x: f64, e: f64) -> f64 {
    let k = e.round();
    if (e - k).abs() < 1e-12 && k >= 0.0 {
        let mut v = 1.0;
        for _ in 0..k as usize {
            v *= x;
        }
        v
    } else {
        x.powf(e)
    }
}

/// Derivative in `s` of the cubic Hermite interpolant.
fn hermite_slope(p0: f64, p1: f64, m0: f64, m1: f64, s: f64) -> f64 {
    let s2 = s * s;
    (6.0 * s2 - 6.0 * s) * p0 + (3.0 * s2 - 4.0 * s + 1.0) * m0 + (-6.0 * s2 + 6.0 * s) * p1 + (3.0 * s2 - 2.0 * s) * m1
}

fn hermite(p0: f64, p1: f64, m0: f64, m1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * p0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * p1 + (s3 - s2) * m1
}

/// `∫_0^{1/rho_R} t^{n-3} / sqrt(1 - 2 m t^{n-2}) dt`: the l = 0 tail past the
/// sampled range, continued as Schwarzschild of the base mass.
fn schwarzschild_tail(n: usize, mass: f64, rho_r: f64) -> Result<f64> {
    let b = 1.0 / rho_r;
    let nf = n as f64;
    if 2.0 * mass * b.powf(nf - 2.0) >= 0.5 {
        return Err(Error::Integration(format!(
            "outer radius too small for asymptotic matching (rho={rho_r}, mass={mass})"
        )));
    }
    let (x, w) = gauss_legendre(24);
    let mut s = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        let t = 0.5 * b * (xi + 1.0);
        s += wi * t.powf(nf - 3.0) / (1.0 - 2.0 * mass * t.powf(nf - 2.0)).sqrt();
    }
    Ok(0.5 * b * s)
}

/// Decaying solution of `u'' + (n-1)(rho'/rho) u' - l(l+n-2) u / rho^2 = 0`.
pub fn solve_radial_mode(base: &BaseGeometry, l: usize) -> Result<ModeSolution> {
    let n = base.n();
    let nf = n as f64;
    let r0 = base.r0();
    let e = nf - 2.0 + l as f64;
    if base.is_flat() {
        return Ok(ModeSolution { l, decay_exponent: e, derivative_at_r0: -e / r0, r0, profile: Profile::Closed });
    }
    let lambda = (l * (l + n - 2)) as f64;
    let r_top = base.r_max();
    let (rho_t, drho_t, _) = base.rho_derivs(r_top)?;
    let z_top = if l == 0 {
        let tail = schwarzschild_tail(n, base.adm_mass_base(), rho_t)?;
        -rho_t.powf(1.0 - nf) / tail
    } else {
        -e * drho_t / rho_t
    };
    let rhs = |r: f64, s: &[f64; 2]| -> [f64; 2] {
        let (rho, drho, _) = base.rho_derivs_unchecked(r);
        let z = s[1];
        [z, -z * z - (nf - 1.0) * drho / rho * z + lambda / (rho * rho)]
    };
    let steps = integrate(rhs, r_top, [0.0, z_top], r0, ODE_TOL, |r| 0.01 * r)?;
    let y_r0 = steps.last().map(|s| s.y[0]).unwrap_or(0.0);
    let mut rs = Vec::with_capacity(steps.len());
    let mut ys = Vec::with_capacity(steps.len());
    let mut zs = Vec::with_capacity(steps.len());
    let mut dzs = Vec::with_capacity(steps.len());
    for s in steps.iter().rev() {
        if !(s.y[0].is_finite() && s.y[1].is_finite()) {
            return Err(Error::Integration(format!("non-finite state at r={}", s.t)));
        }
        rs.push(s.t);
        ys.push(s.y[0] - y_r0);
        zs.push(s.y[1]);
        dzs.push(s.dy[1]);
    }
    rs[0] = r0;
    let derivative_at_r0 = zs[0];
    if l == 0 && derivative_at_r0 >= 0.0 {
        return Err(Error::Integration("l = 0 profile is not decreasing at r0".into()));
    }
    Ok(ModeSolution {
        l,
        decay_exponent: e,
        derivative_at_r0,
        r0,
        profile: Profile::Table { r: rs, y: ys, z: zs, dz: dzs },
    })
}

/// Base geometry, angular grid and the radial modes for every degree on the grid.
#[derive(Debug)]
pub struct Exterior {
    base: BaseGeometry,
    grid: AngularGrid,
    modes: Vec<ModeSolution>,
}

impl Exterior {
    pub fn new(base: BaseGeometry, grid: AngularGrid) -> Result<Arc<Self>> {
        if grid.dimension() != base.n() {
            return Err(Error::InvalidArgument(format!(
                "grid dimension {} does not match base dimension {}",
                grid.dimension(),
                base.n()
            )));
        }
        let modes =
            (0..=grid.l_max()).into_par_iter().map(|l| solve_radial_mode(&base, l)).collect::<Result<Vec<_>>>()?;
        Ok(Arc::new(Self { base, grid, modes }))
    }

    pub fn base(&self) -> &BaseGeometry {
        &self.base
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    pub fn mode(&self, l: usize) -> &ModeSolution {
        &self.modes[l]
    }

    /// `rho(r0)^{n-1}`: converts unit-sphere weights to boundary area weights.
    pub fn area_scale(&self) -> f64 {
        self.base.rho_derivs_unchecked(self.base.r0()).0.powi(self.base.n() as i32 - 1)
    }

    /// Area weights of the boundary nodes in the base metric.
    pub fn boundary_weights(&self) -> Vec<f64> {
        let s = self.area_scale();
        self.grid.weights().iter().map(|w| w * s).collect()
    }

    /// `lim r^{n-2} u_0(r)`, read from the conserved l = 0 flux.
    pub fn far_coefficient(&self) -> f64 {
        let nf = self.base.n() as f64;
        -self.modes[0].derivative_at_r0 * self.area_scale() / (nf - 2.0)
    }

    pub fn capacity(&self) -> f64 {
        self.far_coefficient()
    }

    /// `(u_l(r), u_l'(r))` for all degrees on the grid.
    pub fn radial_values(&self, r: f64) -> (Vec<f64>, Vec<f64>) {
        self.modes.iter().map(|m| m.value_and_derivative(r)).unzip()
    }

    /// Projects node values onto the modes: `c_k = Σ_i w_i (f_i - shift) Y_k(i)`.
    pub fn coefficients(&self, values: &[f64], shift: f64) -> Result<Vec<f64>> {
        if values.len() != self.grid.len() {
            return Err(Error::GridMismatch { expected: self.grid.len(), got: values.len() });
        }
        let shifted: Vec<f64> = values.iter().map(|v| v - shift).collect();
        Ok(self.grid.project(&shifted))
    }
}

/// Nonnegative boundary data at the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    values: Vec<f64>,
    grid: GridSpec,
    weights: Vec<f64>,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct BoundaryDataJson {
    grid: GridSpec,
    values: Vec<f64>,
    area_scale: f64,
}

impl BoundaryData {
    pub fn new(ext: &Exterior, values: Vec<f64>) -> Result<Self> {
        Self::from_parts(ext.grid().spec(), ext.boundary_weights(), ext.base().constants().p, values)
    }

    fn from_parts(grid: GridSpec, weights: Vec<f64>, p: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::GridMismatch { expected: weights.len(), got: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidBoundaryData(format!("value {v} is not a finite nonnegative number")));
        }
        Ok(Self { values, grid, weights, p })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Boundary area weights used for the integrals.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ f^p dA`: the boundary area in the rescaled metric.
    pub fn area(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| w * v.powf(self.p)).sum()
    }

    pub fn lp_norm_p(&self) -> f64 {
        self.area().powf(1.0 / self.p)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let area_scale = self.weights.iter().sum::<f64>()
            / crate::geometry::Constants::new(crate::geometry::Dimension::new(self.grid.n).expect("grid dimension"))
                .omega;
        serde_json::to_value(BoundaryDataJson { grid: self.grid, values: self.values.clone(), area_scale })
            .expect("boundary data serialises")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: BoundaryDataJson =
            serde_json::from_value(value.clone()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let grid = raw.grid.build()?;
        let n = crate::geometry::Dimension::new(raw.grid.n)?;
        let p = crate::geometry::Constants::new(n).p;
        let weights = grid.weights().iter().map(|w| w * raw.area_scale).collect();
        Self::from_parts(raw.grid, weights, p, raw.values)
    }
}

/// A g-harmonic function `v_inf + Σ_k c_k u_{l_k}(r) Y_k`.
#[derive(Debug, Clone)]
pub struct HarmonicFunction {
    ext: Arc<Exterior>,
    value_at_infinity: f64,
    coefficients: Vec<f64>,
    boundary: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicFunctionJson {
    pub value_at_infinity: f64,
    pub coeffs: BTreeMap<String, f64>,
}

/// Harmonic extension of node values `f` with value `value_at_infinity` at infinity.
pub fn harmonic_extension(ext: &Arc<Exterior>, f: &[f64], value_at_infinity: f64) -> Result<HarmonicFunction> {
    if value_at_infinity > 0.0 {
        if let Some(v) = f.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidBoundaryData(format!("negative value {v} with positive value at infinity")));
        }
    }
    let coefficients = ext.coefficients(f, value_at_infinity)?;
    Ok(HarmonicFunction { ext: Arc::clone(ext), value_at_infinity, coefficients, boundary: f.to_vec() })
}

impl HarmonicFunction {
    /// Builds a function from mode coefficients directly; the boundary values are the mode sum at `r0`.
    pub fn from_coefficients(ext: &Arc<Exterior>, value_at_infinity: f64, coefficients: Vec<f64>) -> Result<Self> {
        let k = ext.grid().modes().len();
        if coefficients.len() != k {
            return Err(Error::GridMismatch { expected: k, got: coefficients.len() });
        }
        let mut h = Self { ext: Arc::clone(ext), value_at_infinity, coefficients, boundary: Vec::new() };
        h.boundary = (0..ext.grid().len()).map(|i| h.mode_sum_node(ext.base().r0(), i)).collect();
        Ok(h)
    }

    pub fn exterior(&self) -> &Arc<Exterior> {
        &self.ext
    }

    pub fn base(&self) -> &BaseGeometry {
        self.ext.base()
    }

    pub fn grid(&self) -> &AngularGrid {
        self.ext.grid()
    }

    pub fn value_at_infinity(&self) -> f64 {
        self.value_at_infinity
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn boundary_values(&self) -> &[f64] {
        &self.boundary
    }

    pub fn boundary_data(&self) -> Result<BoundaryData> {
        BoundaryData::new(&self.ext, self.boundary.clone())
    }

    /// True when only the constant mode carries weight.
    pub fn is_radial(&self) -> bool {
        let scale = self.coefficients[0].abs().max(1.0);
        self.coefficients.iter().skip(1).all(|c| c.abs() <= 1e-12 * scale)
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        let r0 = self.base().r0();
        if !(r >= r0 * (1.0 - 1e-12)) {
            return Err(Error::OutOfRange { r, lo: r0, hi: f64::INFINITY });
        }
        Ok(())
    }

    fn on_boundary(&self, r: f64) -> bool {
        (r - self.base().r0()).abs() <= 1e-12 * self.base().r0()
    }

    fn mode_sum_node(&self, r: f64, node: usize) -> f64 {
        let (vals, _) = self.ext.radial_values(r);
        self.sum_with(&vals, self.grid().basis_row(node))
    }

    fn sum_with(&self, radial: &[f64], basis: &[f64]) -> f64 {
        let modes = self.grid().modes();
        let mut s = self.value_at_infinity;
        for (k, m) in modes.iter().enumerate() {
            s += self.coefficients[k] * radial[m.l] * basis[k];
        }
        s
    }

    fn derivative_with(&self, dradial: &[f64], basis: &[f64]) -> f64 {
        let modes = self.grid().modes();
        modes.iter().enumerate().map(|(k, m)| self.coefficients[k] * dradial[m.l] * basis[k]).sum()
    }

    /// Value at radius `r` above grid node `node`; equals the boundary data at `r0`.
    pub fn evaluate_node(&self, r: f64, node: usize) -> Result<f64> {
        self.check_radius(r)?;
        if self.on_boundary(r) {
            return Ok(self.boundary[node]);
        }
        Ok(self.mode_sum_node(r, node))
    }

    /// Values at every node on the sphere of radius `r`.
    pub fn values_at_radius(&self, r: f64) -> Result<Vec<f64>> {
        self.check_radius(r)?;
        if self.on_boundary(r) {
            return Ok(self.boundary.clone());
        }
        let (vals, _) = self.ext.radial_values(r);
        Ok((0..self.grid().len()).map(|i| self.sum_with(&vals, self.grid().basis_row(i))).collect())
    }

    /// Value at `(r, theta, phi)`. Directions coinciding with a grid node on
    /// the boundary return the boundary data.
    pub fn evaluate(&self, r: f64, theta: f64, phi: f64) -> Result<f64> {
        self.check_radius(r)?;
        if self.on_boundary(r) {
            if let Some(i) = self.find_node(theta, phi) {
                return Ok(self.boundary[i]);
            }
        }
        let (vals, _) = self.ext.radial_values(r.max(self.base().r0()));
        let basis = self.grid().modes_at(theta, phi);
        Ok(self.sum_with(&vals, &basis))
    }

    /// `(u, ∂_r u, ∂_θ u, ∂_φ u)` at an arbitrary point, from the mode sum.
    pub fn evaluate_with_gradient(&self, r: f64, theta: f64, phi: f64) -> Result<[f64; 4]> {
        self.check_radius(r)?;
        let r = r.max(self.base().r0());
        let (vals, ders) = self.ext.radial_values(r);
        let basis = self.grid().modes_at(theta, phi);
        let u = self.sum_with(&vals, &basis);
        let ur = self.derivative_with(&ders, &basis);
        let h = 1e-6;
        let ang = |t: f64, p: f64| self.sum_with(&vals, &self.grid().modes_at(t, p));
        let ut = (ang(theta + h, phi) - ang(theta - h, phi)) / (2.0 * h);
        let up = (ang(theta, phi + h) - ang(theta, phi - h)) / (2.0 * h);
        Ok([u, ur, ut, up])
    }

    fn find_node(&self, theta: f64, phi: f64) -> Option<usize> {
        if self.grid().dimension() > 3 {
            return Some(0);
        }
        self.grid().nodes().iter().position(|nd| {
            (nd.theta - theta).abs() <= 1e-12 && ((nd.phi - phi).abs() <= 1e-12 || self.grid().n_phi() == 1)
        })
    }

    /// `∂_r u` at radius `r` above each node, from the mode sum.
    pub fn radial_derivative_at_radius(&self, r: f64) -> Result<Vec<f64>> {
        self.check_radius(r)?;
        let (_, ders) = self.ext.radial_values(r.max(self.base().r0()));
        Ok((0..self.grid().len()).map(|i| self.derivative_with(&ders, self.grid().basis_row(i))).collect())
    }

    /// Outward normal derivative `∂_r u` on the boundary at each node.
    pub fn normal_derivative_boundary(&self) -> Vec<f64> {
        self.radial_derivative_at_radius(self.base().r0()).expect("r0 is in range")
    }

    /// Coefficient `a` in `u = v_inf + a / |x|^{n-2} + O(|x|^{1-n})`.
    pub fn expansion_coefficient(&self) -> f64 {
        let y00 = self.grid().basis(0, 0);
        self.coefficients[0] * y00 * self.ext.far_coefficient()
    }

    pub fn to_json(&self) -> HarmonicFunctionJson {
        let coeffs =
            self.grid().modes().iter().zip(&self.coefficients).map(|(m, c)| (format!("{},{}", m.l, m.m), *c)).collect();
        HarmonicFunctionJson { value_at_infinity: self.value_at_infinity, coeffs }
    }

    /// Rebuilds a function on `ext` from its JSON coefficients.
    pub fn from_json(ext: &Arc<Exterior>, json: &HarmonicFunctionJson) -> Result<Self> {
        let mut coeffs = vec![0.0; ext.grid().modes().len()];
        for (key, v) in &json.coeffs {
            let k = ext
                .grid()
                .modes()
                .iter()
                .position(|m| format!("{},{}", m.l, m.m) == *key)
                .ok_or_else(|| Error::InvalidArgument(format!("mode {key} not on grid")))?;
            coeffs[k] = *v;
        }
        Self::from_coefficients(ext, json.value_at_infinity, coeffs)
    }
}

pub fn evaluate(u: &HarmonicFunction, r: f64, theta: f64, phi: f64) -> Result<f64> {
    u.evaluate(r, theta, phi)
}

pub fn expansion_coefficient(u: &HarmonicFunction) -> f64 {
    u.expansion_coefficient()
}

/// Capacity of the boundary: the decay coefficient of the harmonic function
/// vanishing on the boundary and tending to 1 at infinity.
pub fn capacity(base: &BaseGeometry) -> Result<f64> {
    let mode = solve_radial_mode(base, 0)?;
    let nf = base.n() as f64;
    let rho0 = base.rho(base.r0())?;
    Ok(-mode.derivative_at_r0 * rho0.powf(nf - 1.0) / (nf - 2.0))
}

/// The harmonic function vanishing on the boundary and tending to 1 at infinity.
pub fn capacitary_potential(ext: &Arc<Exterior>) -> HarmonicFunction {
    harmonic_extension(ext, &vec![0.0; ext.grid().len()], 1.0).expect("zero data is admissible")
}

/// `V = ∂_ν φ / ((n-2) ω)` on the boundary nodes.
pub fn boundary_density_v(ext: &Arc<Exterior>) -> Vec<f64> {
    let c = ext.base().constants();
    let nf = c.n as f64;
    capacitary_potential(ext).normal_derivative_boundary().iter().map(|d| d / ((nf - 2.0) * c.omega)).collect()
}

/// `a = -(1/((n-2) ω)) ∫_{S_r} ∂_r u dA` through the sphere of radius `r`.
pub fn flux_expansion_coefficient(u: &HarmonicFunction, r: f64) -> Result<f64> {
    let base = u.base();
    let c = base.constants();
    let nf = c.n as f64;
    if r <= base.r0() {
        return Err(Error::InvalidArgument(format!("flux radius {r} must exceed the boundary radius")));
    }
    let du = u.radial_derivative_at_radius(r)?;
    let rho = base.rho(r)?;
    Ok(-rho.powf(nf - 1.0) * u.grid().integrate(&du) / ((nf - 2.0) * c.omega))
}

/// The quotient `num / den` of two harmonic functions: harmonic for `den^k g`.
#[derive(Debug, Clone)]
pub struct ConformalQuotient {
    num: HarmonicFunction,
    den: HarmonicFunction,
    floor: f64,
}

pub fn conformal_quotient(num: &HarmonicFunction, den: &HarmonicFunction) -> Result<ConformalQuotient> {
    if !Arc::ptr_eq(num.exterior(), den.exterior()) && num.grid().len() != den.grid().len() {
        return Err(Error::GridMismatch { expected: num.grid().len(), got: den.grid().len() });
    }
    Ok(ConformalQuotient { num: num.clone(), den: den.clone(), floor: POSITIVITY_FLOOR })
}

impl ConformalQuotient {
    pub fn numerator(&self) -> &HarmonicFunction {
        &self.num
    }

    pub fn denominator(&self) -> &HarmonicFunction {
        &self.den
    }

    fn divide(&self, a: f64, b: f64) -> Result<f64> {
        if !(b >= self.floor) {
            return Err(Error::PositivityFloor { value: b, floor: self.floor });
        }
        Ok(a / b)
    }

    pub fn evaluate(&self, r: f64, theta: f64, phi: f64) -> Result<f64> {
        self.divide(self.num.evaluate(r, theta, phi)?, self.den.evaluate(r, theta, phi)?)
    }

    pub fn evaluate_node(&self, r: f64, node: usize) -> Result<f64> {
        self.divide(self.num.evaluate_node(r, node)?, self.den.evaluate_node(r, node)?)
    }

    pub fn values_at_radius(&self, r: f64) -> Result<Vec<f64>> {
        let a = self.num.values_at_radius(r)?;
        let b = self.den.values_at_radius(r)?;
        a.iter().zip(&b).map(|(x, y)| self.divide(*x, *y)).collect()
    }

    /// Laplacian of the quotient in the metric `den^k g`, by central
    /// differences of step `h` in every coordinate.
    pub fn laplacian_residual(&self, r: f64, theta: f64, phi: f64, h: f64) -> Result<f64> {
        let base = self.num.base();
        let nf = base.n() as f64;
        let (rho, drho, _) = base.rho_derivs(r)?;
        let q = |r: f64, t: f64, p: f64| self.evaluate(r, t, p);
        let u = |r: f64, t: f64, p: f64| self.den.evaluate(r, t, p);
        let d = |f: &dyn Fn(f64, f64, f64) -> Result<f64>, axis: usize| -> Result<(f64, f64, f64)> {
            let at = |s: f64| match axis {
                0 => f(r + s * h, theta, phi),
                1 => f(r, theta + s * h, phi),
                _ => f(r, theta, phi + s * h),
            };
            let (m, c, p) = (at(-1.0)?, at(0.0)?, at(1.0)?);
            Ok((c, (p - m) / (2.0 * h), (p - 2.0 * c + m) / (h * h)))
        };
        let (_, qr, qrr) = d(&q, 0)?;
        let (u0, ur, _) = d(&u, 0)?;
        let mut lap = qrr + (nf - 1.0) * drho / rho * qr;
        let mut grad = ur * qr;
        if base.n() == 3 && !self.num.grid().is_empty() && self.num.grid().l_max() > 0 {
            let (_, qt, qtt) = d(&q, 1)?;
            let (_, qp, qpp) = d(&q, 2)?;
            let (_, ut, _) = d(&u, 1)?;
            let (_, up, _) = d(&u, 2)?;
            let s = theta.sin();
            lap += (qtt + theta.cos() / s * qt + qpp / (s * s)) / (rho * rho);
            grad += (ut * qt + up * qp / (s * s)) / (rho * rho);
        }
        let k = base.constants().k;
        Ok(u0.powf(-k) * (lap + 2.0 * grad / u0))
    }

    /// Expansion coefficient of the quotient at infinity from the spherical
    /// means `B(r) = r^{n-2} (mean - 1)` at `r = 50·2^j`, Neville-extrapolated in `1/r`.
    /// Only the flat exterior has the pure power expansion this assumes.
    pub fn expansion_coefficient_extrapolated(&self) -> Result<f64> {
        let base = self.num.base();
        if !base.is_flat() {
            return Err(Error::Unsupported("extrapolated expansion coefficient needs a flat base".into()));
        }
        let c = base.constants();
        let nf = c.n as f64;
        let limit = self.num.value_at_infinity() / self.den.value_at_infinity();
        let levels = 6;
        let mut xs = Vec::with_capacity(levels);
        let mut table = Vec::with_capacity(levels);
        for j in 0..levels {
            // (r/r0)^{n-2} = 50 * 2^j keeps the cancellation in check
            let r = base.r0() * (50.0 * 2f64.powi(j as i32)).powf(1.0 / (nf - 2.0));
            let vals = self.values_at_radius(r)?;
            let mean = self.num.grid().integrate(&vals) / c.omega;
            // the profile is analytic in r^{2-n} for the modes available
            xs.push(r.powf(2.0 - nf));
            table.push(r.powf(nf - 2.0) * (mean - limit));
        }
        for m in 1..levels {
            for i in (m..levels).rev() {
                table[i] = (xs[i - m] * table[i] - xs[i] * table[i - 1]) / (xs[i - m] - xs[i]);
            }
        }
        Ok(table[levels - 1])
    }
}
