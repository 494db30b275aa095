//! The area profile: `α_C(A)` by projected supergradient ascent over
//! axisymmetric boundary data, its limit in `C`, the radial restriction,
//! monotonicity checks and diagnostics of the maximiser.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BaseGeometry;
use crate::harmonic::{harmonic_extension, BoundaryData, Exterior, HarmonicFunction};
use crate::invariants::mu_maximizer_data;
use crate::minarea::{
    mean_curvature_conformal, min_area_graph, min_area_graph_capped, min_area_radial, outermost_enclosure,
    slope_squares, EnclosingSurface, TIE_TOLERANCE,
};
use crate::quadrature::{sphere_quadrature, sphere_quadrature_axisymmetric};

/// Relative gap above the radial value reported as a counterexample candidate.
pub const EXCEEDANCE_THRESHOLD: f64 = 1e-2;
/// Relative change between successive `α_C` regarded as converged in `C`.
pub const LIMIT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaOptions {
    pub starts: usize,
    pub seed: u64,
    /// Ascent iterations per start.
    pub iterations: usize,
    /// Polar nodes of the axisymmetric search grid.
    pub resolution: usize,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        Self { starts: 3, seed: 0, iterations: 30, resolution: 32 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterexampleCandidate {
    pub kind: String,
    #[serde(rename = "A")]
    pub area: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub alpha_c: f64,
    pub alpha_radial: f64,
    pub relative_excess: f64,
    pub maximizer: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AlphaResult {
    pub area: f64,
    pub c: f64,
    pub value: f64,
    pub maximizer: BoundaryData,
    pub boundary_area_achieved: f64,
    pub converged: bool,
    /// Outermost minimal enclosure of the maximiser.
    pub surface: EnclosingSurface,
    pub alpha_radial: f64,
    pub counterexample: Option<CounterexampleCandidate>,
}

/// Area of the boundary in the base metric.
pub fn boundary_area(base: &BaseGeometry) -> Result<f64> {
    let c = base.constants();
    Ok(c.omega * base.rho(base.r0())?.powi(c.n as i32 - 1))
}

/// Smallest cap `C` for which data of area `A` exists: `(A / |Σ|)^{1/p}`.
pub fn c_min(base: &BaseGeometry, area: f64) -> Result<f64> {
    Ok((area / boundary_area(base)?).powf(1.0 / base.constants().p))
}

fn radial_exterior(base: &BaseGeometry) -> Result<Arc<Exterior>> {
    Exterior::new(base.clone(), sphere_quadrature(base.dimension(), 0, 0)?)
}

/// Minimal enclosing area for the constant data of area `A`.
pub fn alpha_radial(base: &BaseGeometry, area: f64) -> Result<f64> {
    if !(area > 0.0) {
        return Err(Error::InvalidArgument(format!("area must be positive, got {area}")));
    }
    let ext = radial_exterior(base)?;
    let f = c_min(base, area)?;
    let u = harmonic_extension(&ext, &[f], 1.0)?;
    Ok(min_area_radial(&u)?.0)
}

/// Search grid: interpolatory axisymmetric for n = 3, a single node otherwise.
fn search_exterior(base: &BaseGeometry, resolution: usize) -> Result<Arc<Exterior>> {
    if base.n() == 3 {
        let m = resolution.max(2);
        Exterior::new(base.clone(), sphere_quadrature_axisymmetric(base.dimension(), m - 1, m)?)
    } else {
        radial_exterior(base)
    }
}

struct Run {
    value: f64,
    f: Vec<f64>,
    converged: bool,
    surface: EnclosingSurface,
    late_gain: f64,
}

struct Search<'a> {
    ext: &'a Arc<Exterior>,
    area: f64,
    c: f64,
    p: f64,
    weights: Vec<f64>,
}

impl Search<'_> {
    /// Scale `f` by `λ` and clip to `[0, C]` so that `∫ min(C, λ f)^p = A`.
    fn retract(&self, f: &[f64]) -> Vec<f64> {
        let f: Vec<f64> = f.iter().map(|v| v.max(0.0)).collect();
        let f: Vec<f64> = if f.iter().any(|v| *v > 0.0) { f } else { vec![1.0; f.len()] };
        let fmin = f.iter().cloned().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
        let f: Vec<f64> = f.iter().map(|v| v.max(1e-9 * fmin)).collect();
        let mass = |lam: f64| -> f64 {
            f.iter().zip(&self.weights).map(|(v, w)| w * (lam * v).min(self.c).powf(self.p)).sum()
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        while mass(hi) < self.area {
            hi *= 2.0;
            if hi > 1e300 {
                break;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass(mid) < self.area {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-16 * hi {
                break;
            }
        }
        let lam = 0.5 * (lo + hi);
        f.iter().map(|v| (lam * v).min(self.c)).collect()
    }

    fn min_area(
        &self,
        f: &[f64],
        init: Option<&EnclosingSurface>,
        full: bool,
    ) -> Result<(f64, Vec<EnclosingSurface>, bool, HarmonicFunction)> {
        let u = harmonic_extension(self.ext, f, 1.0)?;
        if self.ext.base().n() == 3 {
            let res = if full { min_area_graph(&u, init, 2)? } else { min_area_graph_capped(&u, init, 0, 200)? };
            // the chosen outermost minimiser goes last
            let mut tied: Vec<EnclosingSurface> = res
                .candidates
                .iter()
                .filter(|c| c.0 <= res.area * (1.0 + TIE_TOLERANCE) && c.1.radii != res.surface.radii)
                .map(|c| c.1.clone())
                .collect();
            tied.push(res.surface.clone());
            // smallest area; the outermost tie may exceed it within tolerance
            let value = res.candidates.iter().map(|c| c.0).fold(res.area, f64::min);
            Ok((value, tied, res.converged, u))
        } else {
            let (a, s) = min_area_radial(&u)?;
            Ok((a, vec![s], true, u))
        }
    }

    /// Supergradient of `f ↦ |S|` for fixed `S`, per unit boundary weight.
    fn supergradient(&self, u: &HarmonicFunction, s: &EnclosingSurface, f: &[f64]) -> Vec<f64> {
        let ext = self.ext;
        let grid = ext.grid();
        let base = ext.base();
        let nf = base.n() as f64;
        let m = grid.len();
        let rho0 = base.rho_derivs_unchecked(base.r0()).0;
        let gs = slope_squares(grid, &s.radii);
        let mut g = vec![0.0; m];
        for i in 0..m {
            if s.coincidence_mask[i] {
                g[i] += grid.weights()[i]
                    * self.p
                    * f[i].powf(self.p - 1.0)
                    * rho0.powf(nf - 2.0)
                    * (rho0 * rho0 + gs[i]).sqrt();
                continue;
            }
            let r = s.radii[i];
            let (rho, _, _) = base.rho_derivs_unchecked(r);
            let uv = u.evaluate_node(r, i).unwrap_or(0.0).max(0.0);
            let el = rho.powf(nf - 2.0) * (rho * rho + gs[i]).sqrt();
            let coef = grid.weights()[i] * self.p * uv.powf(self.p - 1.0) * el;
            let (radial, _) = ext.radial_values(r);
            let bi = grid.basis_row(i);
            for (j, gj) in g.iter_mut().enumerate() {
                let bj = grid.basis_row(j);
                let mut k = 0.0;
                for (q, mode) in grid.modes().iter().enumerate() {
                    k += radial[mode.l] * bi[q] * bj[q];
                }
                *gj += coef * k * grid.weights()[j];
            }
        }
        g.iter().zip(&self.weights).map(|(g, w)| g / w).collect()
    }

    /// Supergradient ascent from one start; keeps the best iterate.
    fn ascend(&self, start: &[f64], iterations: usize) -> Result<Run> {
        let m = start.len();
        let mut f = self.retract(start);
        let (mut val, mut tied, mut conv, mut u) = self.min_area(&f, None, true)?;
        let mut best =
            Run { value: val, f: f.clone(), converged: conv, surface: tied[tied.len() - 1].clone(), late_gain: 0.0 };
        let mut eta0: Option<f64> = None;
        let mut capped_best = false;
        for k in 0..iterations {
            // average the supergradients of tied minimisers
            let mut g = vec![0.0; m];
            for s in &tied {
                let gs = self.supergradient(&u, s, &f);
                g.iter_mut().zip(&gs).for_each(|(a, b)| *a += b / tied.len() as f64);
            }
            let d = self.tangent(&g, &f);
            let gmax = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let dmax = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if gmax == 0.0 || dmax <= 1e-8 * gmax {
                break;
            }
            let fmax = f.iter().cloned().fold(0.0, f64::max);
            let e0 = *eta0.get_or_insert(0.1 * fmax / gmax);
            let eta = e0 / ((k + 1) as f64).sqrt();
            let trial: Vec<f64> = f.iter().zip(&d).map(|(v, d)| v + eta * d).collect();
            f = self.retract(&trial);
            let init = tied.last().cloned();
            (val, tied, conv, u) = self.min_area(&f, init.as_ref(), false)?;
            if val > best.value * (1.0 + 1e-9) {
                if 2 * (k + 1) > iterations {
                    best.late_gain = best.late_gain.max((val - best.value) / best.value);
                }
                capped_best = true;
                best.value = val;
                best.f = f.clone();
                best.converged = conv;
                best.surface = tied[tied.len() - 1].clone();
            }
        }
        if capped_best {
            // confirm the capped inner solves with a full one
            let (v, t, c, _) = self.min_area(&best.f, Some(&best.surface), true)?;
            best.value = v;
            best.converged = c;
            best.surface = t[t.len() - 1].clone();
        }
        Ok(best)
    }

    fn tangent(&self, g: &[f64], f: &[f64]) -> Vec<f64> {
        let nrm: Vec<f64> = f.iter().map(|v| v.powf(self.p - 1.0)).collect();
        let a: f64 = g.iter().zip(&nrm).zip(&self.weights).map(|((g, n), w)| w * g * n).sum();
        let b: f64 = nrm.iter().zip(&self.weights).map(|(n, w)| w * n * n).sum();
        let lam = if b > 0.0 { a / b } else { 0.0 };
        g.iter().zip(&nrm).map(|(g, n)| g - lam * n).collect()
    }
}

/// `α_C(A)`: the largest minimal enclosing area over data with `∫ f^p dA = A`
/// and `0 <= f <= C`.
pub fn alpha_c(base: &BaseGeometry, area: f64, c: f64, opts: &AlphaOptions) -> Result<AlphaResult> {
    if !(area > 0.0) {
        return Err(Error::InvalidArgument(format!("area must be positive, got {area}")));
    }
    if !(c >= 1.0) {
        return Err(Error::InvalidArgument(format!("cap C must be at least 1, got {c}")));
    }
    let sigma = boundary_area(base)?;
    let p = base.constants().p;
    let capacity_area = c.powf(p) * sigma;
    if capacity_area < area * (1.0 - 1e-12) {
        return Err(Error::Infeasible { area, capacity_area });
    }
    let ext = search_exterior(base, opts.resolution)?;
    let search = Search { ext: &ext, area, c, p, weights: ext.boundary_weights() };
    let m = ext.grid().len();
    let radial_value = alpha_radial(base, area)?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts: Vec<Vec<f64>> = vec![vec![c_min(base, area)?.min(c); m]];
    if let Ok(f0) = mu_maximizer_data(&ext, area) {
        starts.push(f0.values().to_vec());
    }
    let nodes = ext.grid().nodes().to_vec();
    while starts.len() < opts.starts.max(1) {
        let a1: f64 = rng.gen_range(-0.3..0.3);
        let a2: f64 = rng.gen_range(-0.3..0.3);
        let a3: f64 = rng.gen_range(-0.3..0.3);
        let f: Vec<f64> = nodes
            .iter()
            .map(|nd| {
                let x = nd.theta.cos();
                1.0 + a1 * x + a2 * (1.5 * x * x - 0.5) + a3 * (2.5 * x * x * x - 1.5 * x)
            })
            .collect();
        starts.push(f);
    }

    let runs = starts
        .par_iter()
        .take(opts.starts.max(1))
        .map(|st| search.ascend(st, opts.iterations))
        .collect::<Result<Vec<_>>>()?;
    let mut best = &runs[0];
    for r in &runs[1..] {
        if r.value > best.value * (1.0 + 1e-9) {
            best = r;
        }
    }
    let (value, fbest, solver_ok) = (best.value, best.f.clone(), best.converged);
    let late_gain = best.late_gain;
    let surface = best.surface.clone();
    let maximizer = BoundaryData::new(&ext, fbest)?;
    let achieved = maximizer.area();
    let excess = (value - radial_value) / radial_value;
    let counterexample = (excess > EXCEEDANCE_THRESHOLD).then(|| CounterexampleCandidate {
        kind: "conjecture-counterexample candidate".into(),
        area,
        c,
        alpha_c: value,
        alpha_radial: radial_value,
        relative_excess: excess,
        maximizer: maximizer.values().to_vec(),
    });
    Ok(AlphaResult {
        area,
        c,
        value,
        boundary_area_achieved: achieved,
        converged: solver_ok && late_gain <= 1e-4,
        maximizer,
        surface,
        alpha_radial: radial_value,
        counterexample,
    })
}

#[derive(Debug, Clone)]
pub struct AlphaLimit {
    pub value: f64,
    pub trail: Vec<AlphaResult>,
    pub converged: bool,
}

/// Runs `α_C` along an increasing schedule of caps and stops once successive
/// values agree to `LIMIT_TOLERANCE`.
pub fn alpha_limit(base: &BaseGeometry, area: f64, schedule: &[f64], opts: &AlphaOptions) -> Result<AlphaLimit> {
    if schedule.is_empty() {
        return Err(Error::InvalidArgument("empty C schedule".into()));
    }
    if schedule.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("C schedule must be increasing".into()));
    }
    let lower = c_min(base, area)?.max(1.0);
    if schedule[0] < lower * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(format!("first C {} below the feasibility bound {lower}", schedule[0])));
    }
    let mut trail: Vec<AlphaResult> = Vec::new();
    let mut converged = false;
    for &c in schedule {
        let r = alpha_c(base, area, c, opts)?;
        let done = trail.last().is_some_and(|prev| (r.value - prev.value).abs() < LIMIT_TOLERANCE * r.value.abs());
        trail.push(r);
        if done {
            converged = true;
            break;
        }
    }
    let value = trail.last().map(|r| r.value).unwrap_or(f64::NAN);
    Ok(AlphaLimit { value, trail, converged })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    #[serde(rename = "C")]
    pub c: f64,
    pub areas: Vec<f64>,
    pub values: Vec<f64>,
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Checks (a) nondecreasing, (b) `α <= A`, (c) `α/A` nonincreasing,
/// (d) Lipschitz quotients `<= 1 + tol`, (e) once below `A`, stays below.
pub fn check_profile_values(areas: &[f64], values: &[f64], tol: f64) -> Vec<PropertyCheck> {
    let mut out = Vec::new();
    let pairs: Vec<(usize, usize)> = (1..areas.len()).map(|i| (i - 1, i)).collect();
    let bad_a: Vec<usize> = pairs.iter().filter(|(i, j)| values[*j] < values[*i] * (1.0 - tol)).map(|p| p.1).collect();
    out.push(PropertyCheck {
        name: "nondecreasing".into(),
        pass: bad_a.is_empty(),
        detail: format!("violations at {bad_a:?}"),
    });
    let bad_b: Vec<usize> = (0..areas.len()).filter(|&i| values[i] > areas[i] * (1.0 + tol)).collect();
    out.push(PropertyCheck {
        name: "bounded_by_area".into(),
        pass: bad_b.is_empty(),
        detail: format!("violations at {bad_b:?}"),
    });
    let bad_c: Vec<usize> = pairs
        .iter()
        .filter(|(i, j)| values[*j] / areas[*j] > values[*i] / areas[*i] * (1.0 + tol))
        .map(|p| p.1)
        .collect();
    out.push(PropertyCheck {
        name: "ratio_nonincreasing".into(),
        pass: bad_c.is_empty(),
        detail: format!("violations at {bad_c:?}"),
    });
    let quotients: Vec<f64> = pairs.iter().map(|(i, j)| (values[*j] - values[*i]) / (areas[*j] - areas[*i])).collect();
    let qmax = quotients.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    out.push(PropertyCheck {
        name: "lipschitz".into(),
        pass: quotients.iter().all(|q| *q <= 1.0 + tol),
        detail: format!("max quotient {qmax}"),
    });
    let first_below = (0..areas.len()).find(|&i| values[i] < areas[i] * (1.0 - tol));
    let bad_e: Vec<usize> = match first_below {
        Some(k) => (k..areas.len()).filter(|&i| values[i] >= areas[i] * (1.0 - tol)).collect(),
        None => Vec::new(),
    };
    out.push(PropertyCheck {
        name: "stays_below_area".into(),
        pass: bad_e.is_empty(),
        detail: format!("violations at {bad_e:?}"),
    });
    out
}

/// Computes `α_C` on an increasing grid of areas and checks the profile properties.
pub fn profile_properties(
    base: &BaseGeometry,
    areas: &[f64],
    c: f64,
    opts: &AlphaOptions,
) -> Result<(PropertyReport, Vec<AlphaResult>)> {
    if areas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("area grid must be increasing".into()));
    }
    let results = areas.iter().map(|&a| alpha_c(base, a, c, opts)).collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = results.iter().map(|r| r.value).collect();
    let checks = check_profile_values(areas, &values, 1e-3);
    Ok((PropertyReport { c, areas: areas.to_vec(), values, checks }, results))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaximizerDiagnostics {
    pub contact_measure: f64,
    pub contact_bound: f64,
    pub contact_within_bound: bool,
    pub hbar_min: Option<f64>,
    pub hbar_max: Option<f64>,
    pub eta0: f64,
    pub hbar_bound: f64,
    pub hbar_within_bound: Option<bool>,
    /// Largest `|H̄|` over nodes off the boundary where it is defined.
    pub off_sigma_hbar_max: Option<f64>,
    /// Largest `|f - C|` over contact nodes.
    pub contact_cap_deviation: Option<f64>,
    pub surface: EnclosingSurface,
}

/// Outermost minimal enclosure of the maximiser and the quantities bounded
/// in the contact estimates; bounds are reported, not enforced.
pub fn maximizer_diagnostics(base: &BaseGeometry, result: &AlphaResult) -> Result<MaximizerDiagnostics> {
    let ext = Exterior::new(base.clone(), result.maximizer.grid().build()?)?;
    let u = harmonic_extension(&ext, result.maximizer.values(), 1.0)?;
    let c = result.c;
    let consts = base.constants();
    let nf = consts.n as f64;
    let surface = if base.n() == 3 {
        let res = min_area_graph(&u, Some(&result.surface), 2)?;
        let tied: Vec<EnclosingSurface> =
            res.candidates.iter().filter(|k| k.0 <= res.area * (1.0 + TIE_TOLERANCE)).map(|k| k.1.clone()).collect();
        outermost_enclosure(&tied, &u)?
    } else {
        min_area_radial(&u)?.1
    };
    let w = ext.boundary_weights();
    let contact: Vec<usize> = (0..w.len()).filter(|&i| surface.coincidence_mask[i]).collect();
    let contact_measure: f64 = contact.iter().fold(0.0, |s, &i| s + w[i]);
    let contact_bound = result.area * c.powf(-consts.p);
    let sigma = EnclosingSurface::boundary(&u);
    let hbar_contact: Vec<f64> =
        contact.iter().map(|&i| mean_curvature_conformal(&u, &sigma, i)).collect::<Result<Vec<_>>>()?;
    let (rho0, drho0, _) = base.rho_derivs(base.r0())?;
    let eta0 = ((nf - 1.0) * drho0 / rho0).abs();
    let hbar_bound = eta0 * c.powf(-2.0 / (nf - 2.0));
    let hbar_min = hbar_contact.iter().cloned().reduce(f64::min);
    let hbar_max = hbar_contact.iter().cloned().reduce(f64::max);
    let hbar_within_bound =
        hbar_min.zip(hbar_max).map(|(lo, hi)| lo >= -1e-6 && hi <= hbar_bound * (1.0 + 1e-6) + 1e-9);
    let off: Vec<f64> = (0..w.len())
        .filter(|&i| !surface.coincidence_mask[i])
        .filter_map(|i| mean_curvature_conformal(&u, &surface, i).ok())
        .map(f64::abs)
        .collect();
    let f = result.maximizer.values();
    Ok(MaximizerDiagnostics {
        contact_measure,
        contact_bound,
        contact_within_bound: contact_measure <= contact_bound * (1.0 + 1e-9),
        hbar_min,
        hbar_max,
        eta0,
        hbar_bound,
        hbar_within_bound,
        off_sigma_hbar_max: off.iter().cloned().reduce(f64::max),
        contact_cap_deviation: contact.iter().map(|&i| (f[i] - c).abs()).reduce(f64::max),
        surface,
    })
}
