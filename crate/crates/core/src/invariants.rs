//! ADM mass under harmonic conformal change, the class invariants `I1` and
//! `I2`, and the mass profile.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonic::{
    boundary_density_v, capacitary_potential, conformal_quotient, flux_expansion_coefficient, harmonic_extension,
    BoundaryData, Exterior, HarmonicFunction,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantSet {
    #[serde(rename = "I1")]
    pub i1: f64,
    #[serde(rename = "I2")]
    pub i2: f64,
    pub capacity: f64,
    pub adm_mass_base: f64,
}

/// ADM mass of `u^k g` for `u` tending to 1 at infinity.
pub fn adm_mass(u: &HarmonicFunction) -> Result<f64> {
    if u.value_at_infinity() != 1.0 {
        return Err(Error::InvalidArgument(format!(
            "ADM mass needs value at infinity 1, got {}",
            u.value_at_infinity()
        )));
    }
    Ok(u.base().adm_mass_base() + 2.0 * u.expansion_coefficient())
}

/// `(2/(n-2)^2) ((1/ω) ∫ d^{2(n-1)/n} dA)^{n/(n-1)}` for normal derivatives `d`
/// and area weights `dA`.
pub fn i2_from_normal_derivative(n: usize, omega: f64, dnu: &[f64], area_weights: &[f64]) -> f64 {
    let nf = n as f64;
    let q = 2.0 * (nf - 1.0) / nf;
    let s: f64 = dnu.iter().zip(area_weights).map(|(d, w)| w * d.max(0.0).powf(q)).sum();
    2.0 / ((nf - 2.0) * (nf - 2.0)) * (s / omega).powf(nf / (nf - 1.0))
}

pub fn invariant_i1(ext: &Exterior) -> f64 {
    ext.base().adm_mass_base() - 2.0 * ext.capacity()
}

pub fn invariant_i2(ext: &Arc<Exterior>) -> f64 {
    let c = ext.base().constants();
    let dnu = capacitary_potential(ext).normal_derivative_boundary();
    i2_from_normal_derivative(c.n, c.omega, &dnu, &ext.boundary_weights())
}

pub fn invariants(ext: &Arc<Exterior>) -> InvariantSet {
    InvariantSet {
        i1: invariant_i1(ext),
        i2: invariant_i2(ext),
        capacity: ext.capacity(),
        adm_mass_base: ext.base().adm_mass_base(),
    }
}

/// Invariants of `u^k g` recomputed from the rescaled geometry alone:
/// the mass from the flux of `u` through a finite sphere, the capacity by
/// extrapolating spherical means of `φ/u`, and `I2` from a one-sided
/// difference of `φ/u` at the boundary.
pub fn invariants_rescaled(u: &HarmonicFunction) -> Result<InvariantSet> {
    let ext = u.exterior();
    let base = ext.base();
    let c = base.constants();
    let nf = c.n as f64;
    let phi = capacitary_potential(ext);
    let q = conformal_quotient(&phi, u)?;
    let mass = base.adm_mass_base() + 2.0 * flux_expansion_coefficient(u, 4.0 * base.r0())?;
    let capacity = -q.expansion_coefficient_extrapolated()?;
    let r0 = base.r0();
    let (phi_r, u_r) = (phi.radial_derivative_at_radius(r0)?, u.radial_derivative_at_radius(r0)?);
    let f = u.boundary_values();
    let w = ext.boundary_weights();
    let mut dnu = Vec::with_capacity(f.len());
    let mut area = Vec::with_capacity(f.len());
    for i in 0..f.len() {
        // φ vanishes on the boundary, so ∂_r(φ/u) = ∂_r φ / u there
        let d = phi_r[i] / f[i] - phi.boundary_values()[i] * u_r[i] / (f[i] * f[i]);
        dnu.push(f[i].powf(-2.0 / (nf - 2.0)) * d);
        area.push(f[i].powf(c.p) * w[i]);
    }
    let i2 = i2_from_normal_derivative(c.n, c.omega, &dnu, &area);
    Ok(InvariantSet { i1: mass - 2.0 * capacity, i2, capacity, adm_mass_base: mass })
}

/// `μ(A) = I1 + sqrt(2 I2) (A/ω)^{1/p}`.
pub fn mu_formula(inv: &InvariantSet, n: usize, area: f64) -> Result<f64> {
    if !(area > 0.0) {
        return Err(Error::InvalidArgument(format!("area must be positive, got {area}")));
    }
    let c = crate::geometry::Constants::new(crate::geometry::Dimension::new(n)?);
    Ok(inv.i1 + (2.0 * inv.i2).sqrt() * (area / c.omega).powf(1.0 / c.p))
}

/// The mass-maximising boundary data of area `A`: proportional to `V^{(n-2)/n}`.
pub fn mu_maximizer_data(ext: &Arc<Exterior>, area: f64) -> Result<BoundaryData> {
    if !(area > 0.0) {
        return Err(Error::InvalidArgument(format!("area must be positive, got {area}")));
    }
    let c = ext.base().constants();
    let nf = c.n as f64;
    let v = boundary_density_v(ext);
    let w = ext.boundary_weights();
    let q = 2.0 * (nf - 1.0) / nf;
    let norm: f64 = v.iter().zip(&w).map(|(v, w)| w * v.powf(q)).sum();
    let scale = area.powf(1.0 / c.p) * norm.powf(-1.0 / c.p);
    BoundaryData::new(ext, v.iter().map(|v| scale * v.powf((nf - 2.0) / nf)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuMethod {
    Formula,
    Direct,
}

#[derive(Debug, Clone)]
pub struct MuResult {
    pub area: f64,
    pub mu: f64,
    pub maximizer: BoundaryData,
    pub method: MuMethod,
    pub converged: bool,
}

/// ADM mass of the class member with boundary data `f`, via `I1 + 2 ∫ V f dA`.
pub fn mass_from_density(ext: &Arc<Exterior>, f: &[f64]) -> f64 {
    let v = boundary_density_v(ext);
    let w = ext.boundary_weights();
    invariant_i1(ext) + 2.0 * v.iter().zip(&w).zip(f).map(|((v, w), f)| v * w * f).sum::<f64>()
}

/// Rescales `f` so that `Σ w f^p = area`.
fn normalize(f: &mut [f64], w: &[f64], p: f64, area: f64) -> bool {
    let s: f64 = f.iter().zip(w).map(|(f, w)| w * f.powf(p)).sum();
    if !(s > 0.0) {
        return false;
    }
    let k = (area / s).powf(1.0 / p);
    f.iter_mut().for_each(|v| *v *= k);
    true
}

/// Maximises the ADM mass over nonnegative data with `∫ f^p dA = A` by
/// projected gradient ascent on the `L^p` sphere, from `starts` starting
/// points (the first constant, the rest random).
pub fn mu_direct(ext: &Arc<Exterior>, area: f64, starts: usize, seed: u64) -> Result<MuResult> {
    if !(area > 0.0) {
        return Err(Error::InvalidArgument(format!("area must be positive, got {area}")));
    }
    let p = ext.base().constants().p;
    let v = boundary_density_v(ext);
    let w = ext.boundary_weights();
    let objective = |f: &[f64]| -> f64 { v.iter().zip(&w).zip(f).map(|((v, w), f)| v * w * f).sum() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for s in 0..starts.max(1) {
        let mut f: Vec<f64> =
            if s == 0 { vec![1.0; w.len()] } else { (0..w.len()).map(|_| rng.gen_range(0.2..1.8)).collect() };
        normalize(&mut f, &w, p, area);
        let mut val = objective(&f);
        let mut eta = f.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(0.0, f64::max);
        let mut converged = false;
        for _ in 0..20_000 {
            let fp: Vec<f64> = f.iter().map(|x| x.powf(p - 1.0)).collect();
            let num: f64 = v.iter().zip(&fp).zip(&w).map(|((g, q), w)| w * g * q).sum();
            let den: f64 = fp.iter().zip(&w).map(|(q, w)| w * q * q).sum();
            let lam = num / den;
            let d: Vec<f64> = v.iter().zip(&fp).map(|(g, q)| g - lam * q).collect();
            let dmax = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let fmax = f.iter().cloned().fold(0.0, f64::max);
            if dmax * eta <= 1e-14 * fmax || eta < 1e-300 {
                converged = true;
                break;
            }
            let mut trial: Vec<f64> = f.iter().zip(&d).map(|(x, g)| (x + eta * g).max(0.0)).collect();
            if !normalize(&mut trial, &w, p, area) {
                eta *= 0.5;
                continue;
            }
            let tv = objective(&trial);
            if tv >= val {
                let step = f.iter().zip(&trial).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                f = trial;
                val = tv;
                eta *= 1.5;
                if step <= 1e-13 * fmax {
                    converged = true;
                    break;
                }
            } else {
                eta *= 0.5;
            }
        }
        if best.as_ref().is_none_or(|b| val > b.0) {
            best = Some((val, f, converged));
        }
    }
    let (val, f, converged) = best.expect("at least one start");
    Ok(MuResult {
        area,
        mu: invariant_i1(ext) + 2.0 * val,
        maximizer: BoundaryData::new(ext, f)?,
        method: MuMethod::Direct,
        converged,
    })
}

/// Data `f_t = A^{1/p} ((1-t) f0 + t f1) / ||(1-t) f0 + t f1||_p` on the segment between two data of area `A`.
pub fn normalized_segment(ext: &Exterior, f0: &[f64], f1: &[f64], t: f64) -> Result<BoundaryData> {
    let p = ext.base().constants().p;
    let w = ext.boundary_weights();
    let area: f64 = f0.iter().zip(&w).map(|(f, w)| w * f.powf(p)).sum();
    let mut ft: Vec<f64> = f0.iter().zip(f1).map(|(a, b)| (1.0 - t) * a + t * b).collect();
    if !normalize(&mut ft, &w, p, area) {
        return Err(Error::InvalidBoundaryData("segment data vanishes".into()));
    }
    BoundaryData::new(ext, ft)
}

/// ADM masses of data of area `A` concentrated on polar caps of the given
/// half-angles (constant on grid nodes with `θ <= ε`, zero elsewhere).
pub fn mu_lower_demo(ext: &Arc<Exterior>, area: f64, cap_half_angles: &[f64]) -> Result<Vec<(f64, f64)>> {
    if ext.base().n() != 3 {
        return Err(Error::Unsupported("cap data needs angular resolution (n = 3)".into()));
    }
    if !(area > 0.0) {
        return Err(Error::InvalidArgument(format!("area must be positive, got {area}")));
    }
    let p = ext.base().constants().p;
    let w = ext.boundary_weights();
    let nodes = ext.grid().nodes();
    let mut out = Vec::with_capacity(cap_half_angles.len());
    for &eps in cap_half_angles {
        let inside: Vec<bool> = nodes.iter().map(|nd| nd.theta <= eps).collect();
        let measure: f64 = w.iter().zip(&inside).filter(|(_, &b)| b).map(|(w, _)| w).sum();
        if measure == 0.0 {
            return Err(Error::CapTooSmall(eps));
        }
        let c = (area / measure).powf(1.0 / p);
        let f: Vec<f64> = inside.iter().map(|&b| if b { c } else { 0.0 }).collect();
        let u = harmonic_extension(ext, &f, 1.0)?;
        out.push((eps, adm_mass(&u)?));
    }
    Ok(out)
}
