//! Areas of radial-graph enclosing surfaces in `u^k g`, the minimal enclosing
//! area, the outermost minimiser and conformal mean curvature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Constants, Dimension};
use crate::harmonic::HarmonicFunction;
use crate::quadrature::{AngularGrid, GridSpec, SlopeTerm};

/// Relative distance to `r0` below which a node lies on the boundary.
pub const SNAP_TOLERANCE: f64 = 1e-9;
/// Relative area gap under which two enclosures are considered tied.
pub const TIE_TOLERANCE: f64 = 1e-6;

const SCAN_FACTOR: f64 = 1e3;
const SCAN_POINTS: usize = 2000;

/// Radial graph `r = R(θ)` over the grid, `R >= r0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnclosingSurface {
    pub radii: Vec<f64>,
    pub coincidence_mask: Vec<bool>,
    pub grid_ref: GridSpec,
}

impl EnclosingSurface {
    pub fn new(radii: Vec<f64>, r0: f64, grid: GridSpec) -> Result<Self> {
        let mut radii = radii;
        let mut mask = Vec::with_capacity(radii.len());
        for r in radii.iter_mut() {
            if !(*r >= r0 * (1.0 - 1e-12)) || !r.is_finite() {
                return Err(Error::InvalidArgument(format!("surface radius {r} below boundary radius {r0}")));
            }
            let on = *r - r0 <= SNAP_TOLERANCE * r0;
            if on {
                *r = r0;
            }
            mask.push(on);
        }
        Ok(Self { radii, coincidence_mask: mask, grid_ref: grid })
    }

    pub fn sphere(u: &HarmonicFunction, r: f64) -> Result<Self> {
        Self::new(vec![r; u.grid().len()], u.base().r0(), u.grid().spec())
    }

    pub fn boundary(u: &HarmonicFunction) -> Self {
        Self::sphere(u, u.base().r0()).expect("r0 is admissible")
    }

    /// Common radius when the surface is a coordinate sphere.
    pub fn sphere_radius(&self, r0: f64) -> Option<f64> {
        let lo = self.radii.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.radii.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo <= SNAP_TOLERANCE * r0).then_some(0.5 * (lo + hi))
    }

    pub fn touches_boundary(&self) -> bool {
        self.coincidence_mask.iter().any(|&b| b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaBreakdown {
    pub on_sigma: f64,
    pub off_sigma: f64,
    pub total: f64,
}

/// Precomputed stencils and weights for area evaluation on one function.
struct AreaModel<'a> {
    u: &'a HarmonicFunction,
    n: usize,
    p: f64,
    r0: f64,
    r_cap: f64,
    weights: Vec<f64>,
    sin_theta: Vec<f64>,
    dtheta: Vec<Vec<(usize, f64)>>,
    dphi: Vec<Vec<(usize, f64)>>,
    /// Difference terms for the squared slope.
    terms: Vec<Vec<SlopeTerm>>,
}

impl<'a> AreaModel<'a> {
    fn new(u: &'a HarmonicFunction) -> Self {
        let grid = u.grid();
        let base = u.base();
        let dtheta = grid.theta_stencils();
        let dphi = grid.phi_stencils();
        Self {
            u,
            n: base.n(),
            p: base.constants().p,
            r0: base.r0(),
            r_cap: (SCAN_FACTOR * base.r0()).min(base.r_max()),
            weights: grid.weights().to_vec(),
            sin_theta: grid.nodes().iter().map(|nd| nd.theta.sin().max(1e-300)).collect(),
            terms: grid.gradient_terms(),
            dtheta,
            dphi,
        }
    }

    fn apply(st: &[(usize, f64)], x: &[f64]) -> f64 {
        st.iter().map(|&(j, c)| c * x[j]).sum()
    }

    fn slopes(&self, radii: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let rt = self.dtheta.iter().map(|s| Self::apply(s, radii)).collect();
        let rp = self.dphi.iter().map(|s| Self::apply(s, radii)).collect();
        (rt, rp)
    }

    fn slope_squares(&self, radii: &[f64]) -> Vec<f64> {
        squares_from_terms(&self.terms, radii)
    }

    /// `(u, ∂_r u)` above node `i` at radius `r`, from the mode sum.
    fn u_and_ur(&self, r: f64, i: usize) -> (f64, f64) {
        let ext = self.u.exterior();
        let (vals, ders) = ext.radial_values(r);
        let basis = self.u.grid().basis_row(i);
        let c = self.u.coefficients();
        let mut s = self.u.value_at_infinity();
        let mut d = 0.0;
        for (k, m) in self.u.grid().modes().iter().enumerate() {
            s += c[k] * vals[m.l] * basis[k];
            d += c[k] * ders[m.l] * basis[k];
        }
        (s, d)
    }

    fn is_masked(&self, r: f64) -> bool {
        r - self.r0 <= SNAP_TOLERANCE * self.r0
    }

    fn breakdown(&self, radii: &[f64]) -> AreaBreakdown {
        let gs = self.slope_squares(radii);
        let f = self.u.boundary_values();
        let nf = self.n as f64;
        let rho0 = self.u.base().rho_derivs_unchecked(self.r0).0;
        let mut on = 0.0;
        let mut off = 0.0;
        for i in 0..radii.len() {
            let (rho, _, _) = self.u.base().rho_derivs_unchecked(radii[i]);
            // nodes on the boundary keep their slope so the area is continuous at contact
            if self.is_masked(radii[i]) {
                on += self.weights[i] * f[i].powf(self.p) * rho0.powf(nf - 2.0) * (rho0 * rho0 + gs[i]).sqrt();
            } else {
                let uv = self.u_and_ur(radii[i], i).0.max(0.0);
                off += self.weights[i] * uv.powf(self.p) * rho.powf(nf - 2.0) * (rho * rho + gs[i]).sqrt();
            }
        }
        AreaBreakdown { on_sigma: on, off_sigma: off, total: on + off }
    }

    fn value(&self, radii: &[f64]) -> f64 {
        self.breakdown(radii).total
    }

    /// Area and its gradient in the radii. Boundary nodes use the one-sided
    /// outward derivative.
    fn value_and_gradient(&self, radii: &[f64]) -> (f64, Vec<f64>) {
        let gs = self.slope_squares(radii);
        let f = self.u.boundary_values();
        let nf = self.n as f64;
        let m = radii.len();
        let mut total = 0.0;
        let mut grad = vec![0.0; m];
        // dF_i/dG_i for unmasked nodes
        let mut dfdg = vec![0.0; m];
        for i in 0..m {
            let g = gs[i];
            let (rho, drho, _) = self.u.base().rho_derivs_unchecked(radii[i]);
            let (mut uv, ur) = self.u_and_ur(radii[i], i);
            let masked = self.is_masked(radii[i]);
            if masked {
                uv = f[i];
            }
            let uv = uv.max(0.0);
            let sq = (rho * rho + g).sqrt();
            let up = uv.powf(self.p);
            let rn2 = rho.powf(nf - 2.0);
            total += self.weights[i] * up * rn2 * sq;
            dfdg[i] = up * rn2 / (2.0 * sq);
            let d_explicit = self.p * uv.powf(self.p - 1.0) * ur * rn2 * sq
                + up * ((nf - 2.0) * rho.powf(nf - 3.0) * drho * sq + rn2 * rho * drho / sq);
            grad[i] += self.weights[i] * d_explicit;
        }
        for (i, &di) in dfdg.iter().enumerate() {
            if di == 0.0 {
                continue;
            }
            for (w, st) in &self.terms[i] {
                let scale = self.weights[i] * di * 2.0 * w * Self::apply(st, radii);
                for &(j, c) in st {
                    grad[j] += scale * c;
                }
            }
        }
        (total, grad)
    }

    fn project(&self, x: &mut [f64]) {
        for v in x.iter_mut() {
            *v = v.clamp(self.r0, self.r_cap);
            if self.is_masked(*v) {
                *v = self.r0;
            }
        }
    }

    /// Area of the coordinate sphere of radius `r`.
    fn sphere_area(&self, r: f64) -> f64 {
        self.value(&vec![r; self.weights.len()])
    }

    /// Spectral projected gradient with Barzilai–Borwein steps and Armijo
    /// backtracking, preconditioned by the quadrature weights.
    fn descend(&self, start: &[f64], max_iter: usize) -> (Vec<f64>, f64, bool) {
        let mut x = start.to_vec();
        self.project(&mut x);
        let (mut fx, mut g) = self.value_and_gradient(&x);
        let scaled = |g: &[f64]| -> f64 { g.iter().zip(&self.weights).fold(0.0f64, |m, (g, w)| m.max((g / w).abs())) };
        let gmax = scaled(&g);
        let mut alpha = if gmax > 0.0 { 0.1 * self.r0 / gmax } else { 1.0 };
        let tol = 1e-10 * self.r0;
        let mut stalled = 0;
        for _ in 0..max_iter {
            let mut trial: Vec<f64> =
                x.iter().zip(&g).zip(&self.weights).map(|((x, g), w)| x - alpha * g / w).collect();
            self.project(&mut trial);
            let d: Vec<f64> = trial.iter().zip(&x).map(|(t, x)| t - x).collect();
            let dn = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if dn <= tol {
                return (x, fx, true);
            }
            let gd: f64 = g.iter().zip(&d).map(|(g, d)| g * d).sum();
            let mut lam = 1.0;
            let accepted = loop {
                let mut xn: Vec<f64> = x.iter().zip(&d).map(|(x, d)| x + lam * d).collect();
                self.project(&mut xn);
                let fnew = self.value(&xn);
                if fnew <= fx + 1e-4 * lam * gd.min(0.0) || (fnew <= fx && lam < 1e-6) {
                    break Some((xn, fnew));
                }
                lam *= 0.5;
                if lam < 1e-14 {
                    break None;
                }
            };
            let Some((xn, _)) = accepted else {
                // no decrease along the projected direction: stationary to working precision
                return (x, fx, dn <= 1e-6 * self.r0);
            };
            let (fnew, gn) = self.value_and_gradient(&xn);
            let taken = xn.iter().zip(&x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if taken <= tol {
                return (xn, fnew, true);
            }
            let mut sy = 0.0;
            let mut ss = 0.0;
            for i in 0..x.len() {
                let s = xn[i] - x[i];
                sy += s * (gn[i] - g[i]);
                ss += self.weights[i] * s * s;
            }
            alpha = if sy > 0.0 { (ss / sy).clamp(1e-12 * self.r0, 1e12 * self.r0) } else { alpha * 2.0 };
            // area changes below rounding for many steps: stationary to working precision
            stalled = if fx - fnew <= 1e-14 * fx.abs() { stalled + 1 } else { 0 };
            if stalled >= 25 && taken <= 1e-6 * self.r0 {
                return (xn, fnew, true);
            }
            x = xn;
            fx = fnew;
            g = gn;
        }
        (x, fx, false)
    }
}

fn squares_from_terms(terms: &[Vec<SlopeTerm>], radii: &[f64]) -> Vec<f64> {
    terms.iter().map(|ts| ts.iter().map(|(w, st)| w * AreaModel::apply(st, radii).powi(2)).sum()).collect()
}

/// `|∇R|²` on the unit sphere at every node, as used in the area.
pub(crate) fn slope_squares(grid: &AngularGrid, radii: &[f64]) -> Vec<f64> {
    squares_from_terms(&grid.gradient_terms(), radii)
}

/// Area of `S` in `u^k g`, split into the part on the boundary and the rest.
pub fn surface_area(u: &HarmonicFunction, s: &EnclosingSurface) -> Result<AreaBreakdown> {
    if s.radii.len() != u.grid().len() {
        return Err(Error::GridMismatch { expected: u.grid().len(), got: s.radii.len() });
    }
    check_surface_range(u, s)?;
    Ok(AreaModel::new(u).breakdown(&s.radii))
}

fn check_surface_range(u: &HarmonicFunction, s: &EnclosingSurface) -> Result<()> {
    let hi = u.base().r_max();
    if let Some(r) = s.radii.iter().find(|&&r| r > hi * (1.0 + 1e-12)) {
        return Err(Error::OutOfRange { r: *r, lo: u.base().r0(), hi });
    }
    Ok(())
}

/// Area of the coordinate sphere of radius `r` (the boundary data at `r0`).
pub fn sphere_area(u: &HarmonicFunction, r: f64) -> Result<f64> {
    Ok(surface_area(u, &EnclosingSurface::sphere(u, r)?)?.total)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinAreaResult {
    pub area: f64,
    pub surface: EnclosingSurface,
    pub breakdown: AreaBreakdown,
    /// Local minima found from the individual starts.
    pub candidates: Vec<(f64, EnclosingSurface)>,
    pub converged: bool,
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Minimal area among coordinate spheres for radial `u`: a dense log scan of
/// `A(r) = ω u(r)^p rho(r)^{n-1}` on `[r0, min(10^3 r0, R_max)]` with golden
/// refinement of every local minimum. Ties go to the largest radius.
pub fn min_area_radial(u: &HarmonicFunction) -> Result<(f64, EnclosingSurface)> {
    if !u.is_radial() {
        return Err(Error::InvalidArgument("min_area_radial needs radial data".into()));
    }
    let model = AreaModel::new(u);
    let r0 = model.r0;
    let top = model.r_cap;
    let rs: Vec<f64> = (0..SCAN_POINTS).map(|i| r0 * (top / r0).powf(i as f64 / (SCAN_POINTS - 1) as f64)).collect();
    let vals: Vec<f64> = rs.iter().map(|&r| model.sphere_area(r)).collect();
    let mut minima: Vec<(f64, f64)> = Vec::new();
    if vals[0] <= vals[1] {
        minima.push((r0, vals[0]));
    }
    let f = |r: f64| model.sphere_area(r);
    for i in 1..SCAN_POINTS - 1 {
        if vals[i] <= vals[i - 1] && vals[i] <= vals[i + 1] {
            let (x, fx) = golden_min(&f, rs[i - 1], rs[i + 1], 1e-12 * rs[i]);
            let (x, fx) = if fx <= vals[i] { (x, fx) } else { (rs[i], vals[i]) };
            minima.push((x, fx));
        }
    }
    if minima.is_empty() {
        // monotone decrease through the scan window: fall back to the boundary value
        minima.push((r0, vals[0]));
    }
    let best = minima.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let (r, a) = minima
        .iter()
        .filter(|m| m.1 <= best * (1.0 + TIE_TOLERANCE))
        .cloned()
        .fold((r0, f64::INFINITY), |acc, m| if m.0 >= acc.0 || acc.1.is_infinite() { m } else { acc });
    Ok((a, EnclosingSurface::sphere(u, r)?))
}

/// Projected descent over radial graphs `R >= r0` from several starts: `init`,
/// the boundary, the best coordinate sphere and the spheres `r0 (1 + 2^k)`.
pub fn min_area_graph(u: &HarmonicFunction, init: Option<&EnclosingSurface>, starts: usize) -> Result<MinAreaResult> {
    min_area_graph_capped(u, init, starts, 3000)
}

/// As `min_area_graph` with an iteration cap per descent.
pub(crate) fn min_area_graph_capped(
    u: &HarmonicFunction,
    init: Option<&EnclosingSurface>,
    starts: usize,
    max_iter: usize,
) -> Result<MinAreaResult> {
    if u.base().n() != 3 {
        return Err(Error::Unsupported("graph minimisation is implemented for n = 3".into()));
    }
    let model = AreaModel::new(u);
    let r0 = model.r0;
    let m = u.grid().len();
    let mut inits: Vec<Vec<f64>> = Vec::new();
    if let Some(s) = init {
        if s.radii.len() != m {
            return Err(Error::GridMismatch { expected: m, got: s.radii.len() });
        }
        inits.push(s.radii.clone());
    }
    inits.push(vec![r0; m]);
    let scan: Vec<f64> = (0..200).map(|i| r0 * (model.r_cap / r0).powf(i as f64 / 199.0)).collect();
    let best_r = scan
        .iter()
        .map(|&r| (r, model.sphere_area(r)))
        .fold((r0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
        .0;
    inits.push(vec![best_r; m]);
    for k in 0..starts {
        inits.push(vec![(r0 * (1.0 + 2f64.powi(k as i32 - 1))).min(model.r_cap); m]);
    }
    let mut candidates = Vec::with_capacity(inits.len());
    let mut all_converged = true;
    for x0 in inits {
        let (x, fx, conv) = model.descend(&x0, max_iter);
        all_converged &= conv;
        candidates.push((fx, EnclosingSurface::new(x, r0, u.grid().spec())?));
    }
    let best = candidates.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let tied: Vec<&(f64, EnclosingSurface)> =
        candidates.iter().filter(|c| c.0 <= best * (1.0 + TIE_TOLERANCE)).collect();
    let chosen = tied
        .iter()
        .max_by(|a, b| {
            let ma: f64 = a.1.radii.iter().sum();
            let mb: f64 = b.1.radii.iter().sum();
            ma.partial_cmp(&mb).unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("at least one candidate");
    let surface = chosen.1.clone();
    let breakdown = model.breakdown(&surface.radii);
    Ok(MinAreaResult { area: breakdown.total, surface, breakdown, candidates, converged: all_converged })
}

/// Node-wise maximum of tied minimisers, re-minimised once.
pub fn outermost_enclosure(candidates: &[EnclosingSurface], u: &HarmonicFunction) -> Result<EnclosingSurface> {
    match candidates.len() {
        0 => return Err(Error::InvalidArgument("no candidate surfaces".into())),
        1 => return Ok(candidates[0].clone()),
        _ => {}
    }
    let model = AreaModel::new(u);
    let minimum = candidates.iter().map(|s| model.value(&s.radii)).fold(f64::INFINITY, f64::min);
    let m = u.grid().len();
    let merged: Vec<f64> =
        (0..m).map(|i| candidates.iter().map(|s| s.radii[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let (x, fx) = if u.base().n() == 3 {
        let (x, fx, _) = model.descend(&merged, 3000);
        (x, fx)
    } else {
        let fx = model.value(&merged);
        (merged, fx)
    };
    if fx > minimum * (1.0 + TIE_TOLERANCE) {
        return Err(Error::AmbiguousEnclosure { merged: fx, minimum });
    }
    EnclosingSurface::new(x, model.r0, u.grid().spec())
}

/// Mean curvature of `S` at `node` in `u^k g`:
/// `u^{-2/(n-2)} H + (2(n-1)/(n-2)) u^{-n/(n-2)} ∂_ν u`.
pub fn mean_curvature_conformal(u: &HarmonicFunction, s: &EnclosingSurface, node: usize) -> Result<f64> {
    let base = u.base();
    let nf = base.n() as f64;
    let r0 = base.r0();
    if node >= s.radii.len() {
        return Err(Error::InvalidArgument(format!("node {node} out of range")));
    }
    let combine = |uv: f64, h: f64, dnu: f64| {
        uv.powf(-2.0 / (nf - 2.0)) * h + 2.0 * (nf - 1.0) / (nf - 2.0) * uv.powf(-nf / (nf - 2.0)) * dnu
    };
    if let Some(r) = s.sphere_radius(r0) {
        let (rho, drho, _) = base.rho_derivs(r)?;
        let uv = u.evaluate_node(r, node)?;
        let ur = u.radial_derivative_at_radius(r)?[node];
        return Ok(combine(uv, (nf - 1.0) * drho / rho, ur));
    }
    let model = AreaModel::new(u);
    if s.coincidence_mask[node] {
        return Err(Error::CurvatureUndefined(format!(
            "node {node} lies on the contact set of a non-spherical surface"
        )));
    }
    if !base.is_flat() {
        return Err(Error::Unsupported("mean curvature of non-spherical graphs needs a flat base".into()));
    }
    let touches = model.dtheta[node].iter().chain(&model.dphi[node]).any(|&(j, _)| s.coincidence_mask[j]);
    if touches {
        return Err(Error::CurvatureUndefined(format!("node {node} is adjacent to the contact set")));
    }
    let radii = &s.radii;
    let (rt, rp) = model.slopes(radii);
    let r = radii[node];
    let sn = model.sin_theta[node];
    let g = |i: usize| rt[i] * rt[i] + rp[i] * rp[i] / (model.sin_theta[i] * model.sin_theta[i]);
    let w_at = |i: usize| (1.0 + g(i) / (r * r)).sqrt();
    let w0 = w_at(node);
    let g0 = g(node);
    let div_t: f64 = model.dtheta[node].iter().map(|&(j, c)| c * model.sin_theta[j] * rt[j] / w_at(j)).sum();
    let div_p: f64 = model.dphi[node].iter().map(|&(j, c)| c * rp[j] / w_at(j)).sum();
    let h = 2.0 / (r * w0) + g0 / (r * r * r * w0 * w0 * w0) - div_t / (r * r * sn) - div_p / (r * r * sn * sn);
    let vals = u.values_at_radius(r)?;
    let ut = AreaModel::apply(&model.dtheta[node], &vals);
    let up = AreaModel::apply(&model.dphi[node], &vals);
    let (uv, ur) = model.u_and_ur(r, node);
    let dnu = (ur - rt[node] * ut / (r * r) - rp[node] * up / (r * r * sn * sn)) / w0;
    Ok(combine(uv, h, dnu))
}

/// Minimal enclosing area of the boundary in the Schwarzschild-type metric
/// `u_A^k δ` on the exterior of the unit ball with boundary area `A`.
pub fn schwarzschild_min_area_oracle(n: usize, area: f64) -> Result<f64> {
    let c = Constants::new(Dimension::new(n)?);
    if !(area > 0.0) {
        return Err(Error::InvalidArgument(format!("area must be positive, got {area}")));
    }
    let nf = n as f64;
    let knee = 2f64.powf(c.p) * c.omega;
    if area <= knee {
        Ok(area)
    } else {
        Ok(((area / c.omega).powf(1.0 / c.p) - 1.0).powf((nf - 1.0) / (nf - 2.0)) * knee)
    }
}
