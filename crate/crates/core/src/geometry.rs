//! Background geometries: the flat exterior of a ball and radial warped
//! products `dr^2 + rho(r)^2 g_{S^{n-1}}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::spline::{one_sided_slope, CubicSpline};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(n: usize) -> Result<Self> {
        if (3..=7).contains(&n) {
            Ok(Self(n))
        } else {
            Err(Error::DimensionOutOfRange(n))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl TryFrom<usize> for Dimension {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        Self::new(n)
    }
}

impl From<Dimension> for usize {
    fn from(d: Dimension) -> usize {
        d.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub n: usize,
    /// Area exponent `2(n-1)/(n-2)`.
    pub p: f64,
    /// Conformal exponent `4/(n-2)`.
    pub k: f64,
    /// Area of the unit (n-1)-sphere.
    pub omega: f64,
}

impl Constants {
    pub fn new(n: Dimension) -> Self {
        let nf = n.as_f64();
        Self { n: n.get(), p: 2.0 * (nf - 1.0) / (nf - 2.0), k: 4.0 / (nf - 2.0), omega: unit_sphere_area(n.get()) }
    }
}

pub fn constants(n: Dimension) -> Constants {
    Constants::new(n)
}

/// `2 pi^{n/2} / Gamma(n/2)` with Gamma evaluated exactly at integers and half-integers.
fn unit_sphere_area(n: usize) -> f64 {
    let gamma_half_n = if n.is_multiple_of(2) {
        (1..n / 2).map(|k| k as f64).product::<f64>()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < n as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    };
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half_n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryKind {
    FlatExterior,
    WarpedProduct,
}

/// JSON form of a base geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub n: usize,
    pub kind: GeometryKind,
    pub r0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<[f64; 2]>>,
    /// Known ADM mass of a warped profile; estimated from the samples when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adm_mass: Option<f64>,
}

#[derive(Debug, Clone)]
struct Warp {
    samples: Vec<[f64; 2]>,
    /// `ln rho` as a function of `ln r`.
    spline: CubicSpline,
}

#[derive(Debug, Clone)]
pub struct BaseGeometry {
    n: Dimension,
    r0: f64,
    warp: Option<Warp>,
    adm_mass_base: f64,
}

impl BaseGeometry {
    pub fn flat(n: Dimension, r0: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::InvalidGeometry(format!("r0 must be positive, got {r0}")));
        }
        Ok(Self { n, r0, warp: None, adm_mass_base: 0.0 })
    }

    /// Warped product from `(r, rho(r))` samples; the first sample radius is `r0`.
    pub fn warped(n: Dimension, samples: Vec<[f64; 2]>, adm_mass: Option<f64>) -> Result<Self> {
        if samples.len() < 5 {
            return Err(Error::InsufficientSamples(format!(
                "warped profile needs at least 5 samples, got {}",
                samples.len()
            )));
        }
        for s in &samples {
            if !(s[0] > 0.0 && s[1] > 0.0 && s[0].is_finite() && s[1].is_finite()) {
                return Err(Error::InvalidGeometry(format!("sample ({}, {}) must be positive", s[0], s[1])));
            }
        }
        let t: Vec<f64> = samples.iter().map(|s| s[0].ln()).collect();
        let y: Vec<f64> = samples.iter().map(|s| s[1].ln()).collect();
        let d0 = one_sided_slope(&t, &y, false);
        let d1 = one_sided_slope(&t, &y, true);
        let spline = CubicSpline::clamped(t, y, d0, d1)?;
        let r0 = samples[0][0];
        let mut base = Self { n, r0, warp: Some(Warp { samples, spline }), adm_mass_base: 0.0 };
        base.adm_mass_base = match adm_mass {
            Some(m) => m,
            None => {
                let r = base.r_max();
                let (rho, drho, _) = base.rho_derivs(r)?;
                0.5 * rho.powi(n.get() as i32 - 2) * (1.0 - drho * drho)
            }
        };
        Ok(base)
    }

    /// Spatial Schwarzschild of mass `m > 0` written as a warped product in
    /// proper distance, with boundary at the horizon. `r` is shifted so the
    /// horizon sits at its isotropic radius. Samples are geometric on
    /// `[r0, r_max_factor * r0]`.
    pub fn schwarzschild(n: Dimension, mass: f64, samples: usize, r_max_factor: f64) -> Result<Self> {
        if !(mass > 0.0) {
            return Err(Error::InvalidGeometry("schwarzschild mass must be positive".into()));
        }
        if samples < 5 {
            return Err(Error::InsufficientSamples(format!("need at least 5 samples, got {samples}")));
        }
        let nf = n.as_f64();
        let e = 2.0 / (nf - 2.0);
        let xh = (mass / 2.0).powf(1.0 / (nf - 2.0));
        let conf = |x: f64| 1.0 + mass / (2.0 * x.powf(nf - 2.0));
        let speed = |x: f64| conf(x).powf(e);
        let (gx, gw) = gauss_legendre(16);
        let panel = |a: f64, b: f64| -> f64 {
            let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
            gx.iter().zip(&gw).map(|(x, w)| w * speed(c + h * x)).sum::<f64>() * h
        };
        let r0 = xh;
        let r_max = r0 * r_max_factor;
        let mut out = Vec::with_capacity(samples);
        let (mut x_prev, mut s_prev) = (xh, 0.0);
        for i in 0..samples {
            let r = r0 * (r_max / r0).powf(i as f64 / (samples - 1) as f64);
            let target = r - r0;
            let mut x = x_prev + (target - s_prev) / speed(x_prev).max(1.0);
            for _ in 0..100 {
                let s = s_prev + panel(x_prev, x);
                let dx = (s - target) / speed(x);
                x -= dx;
                if x < x_prev {
                    x = x_prev;
                }
                if dx.abs() <= 1e-15 * x {
                    break;
                }
            }
            s_prev += panel(x_prev, x);
            x_prev = x;
            out.push([r, speed(x) * x]);
        }
        Self::warped(n, out, Some(mass))
    }

    pub fn from_spec(spec: &GeometrySpec) -> Result<Self> {
        let n = Dimension::new(spec.n)?;
        match spec.kind {
            GeometryKind::FlatExterior => Self::flat(n, spec.r0),
            GeometryKind::WarpedProduct => {
                let rho = spec
                    .rho
                    .clone()
                    .ok_or_else(|| Error::InvalidGeometry("warped_product requires rho samples".into()))?;
                if let Some(first) = rho.first() {
                    if (first[0] - spec.r0).abs() > 1e-12 * spec.r0 {
                        return Err(Error::InvalidGeometry(format!(
                            "first rho sample radius {} differs from r0 {}",
                            first[0], spec.r0
                        )));
                    }
                }
                Self::warped(n, rho, spec.adm_mass)
            }
        }
    }

    pub fn to_spec(&self) -> GeometrySpec {
        GeometrySpec {
            n: self.n.get(),
            kind: self.kind(),
            r0: self.r0,
            rho: self.warp.as_ref().map(|w| w.samples.clone()),
            adm_mass: self.warp.as_ref().map(|_| self.adm_mass_base),
        }
    }

    pub fn kind(&self) -> GeometryKind {
        if self.warp.is_some() {
            GeometryKind::WarpedProduct
        } else {
            GeometryKind::FlatExterior
        }
    }

    pub fn is_flat(&self) -> bool {
        self.warp.is_none()
    }

    pub fn dimension(&self) -> Dimension {
        self.n
    }

    pub fn n(&self) -> usize {
        self.n.get()
    }

    pub fn constants(&self) -> Constants {
        Constants::new(self.n)
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    /// Outer end of the sampled range (infinite for the flat exterior).
    pub fn r_max(&self) -> f64 {
        match &self.warp {
            None => f64::INFINITY,
            Some(w) => w.samples[w.samples.len() - 1][0],
        }
    }

    pub fn adm_mass_base(&self) -> f64 {
        self.adm_mass_base
    }

    fn check_range(&self, r: f64) -> Result<()> {
        let hi = self.r_max();
        if r < self.r0 * (1.0 - 1e-12) || r > hi * (1.0 + 1e-12) || r.is_nan() {
            return Err(Error::OutOfRange { r, lo: self.r0, hi });
        }
        Ok(())
    }

    pub fn rho(&self, r: f64) -> Result<f64> {
        Ok(self.rho_derivs(r)?.0)
    }

    /// `(rho, rho', rho'')` at `r`.
    pub fn rho_derivs(&self, r: f64) -> Result<(f64, f64, f64)> {
        self.check_range(r)?;
        Ok(self.rho_derivs_unchecked(r))
    }

    pub(crate) fn rho_derivs_unchecked(&self, r: f64) -> (f64, f64, f64) {
        match &self.warp {
            None => (r, 1.0, 0.0),
            Some(w) => {
                let (s, ds, dds) = w.spline.eval(r.ln());
                let rho = s.exp();
                (rho, rho * ds / r, rho * (dds + ds * ds - ds) / (r * r))
            }
        }
    }

    /// Scalar curvature of the warped metric at radius `r`.
    pub fn scalar_curvature(&self, r: f64) -> Result<f64> {
        let (rho, d1, d2) = self.rho_derivs(r)?;
        let nf = self.n.as_f64();
        Ok((nf - 1.0) * ((nf - 2.0) * (1.0 - d1 * d1) / (rho * rho) - 2.0 * d2 / rho))
    }

    /// Magnitude of the individual terms of the scalar curvature, used to
    /// recognise cancellation.
    fn curvature_scale(&self, r: f64) -> f64 {
        let (rho, d1, d2) = self.rho_derivs_unchecked(r);
        let nf = self.n.as_f64();
        (nf - 1.0) * ((nf - 2.0) * (1.0 + d1 * d1) / (rho * rho) + 2.0 * d2.abs() / rho)
    }

    /// Radii of the stored samples (empty for the flat exterior).
    pub fn sample_radii(&self) -> Vec<f64> {
        self.warp.as_ref().map(|w| w.samples.iter().map(|s| s[0]).collect()).unwrap_or_default()
    }
}

pub fn scalar_curvature_radial(base: &BaseGeometry, r: f64) -> Result<f64> {
    base.scalar_curvature(r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AfReport {
    /// Fitted decay exponent of `|g - delta|` (infinite when exactly flat).
    pub decay_exponent_estimate: f64,
    /// Fitted decay exponent of the scalar curvature (infinite when zero).
    pub curvature_decay_estimate: f64,
    pub scalar_curvature_samples: Vec<(f64, f64)>,
    pub pass: bool,
}

impl AfReport {
    /// Smallest sampled scalar curvature.
    pub fn min_scalar_curvature(&self) -> f64 {
        self.scalar_curvature_samples.iter().map(|s| s.1).fold(0.0, f64::min)
    }
}

/// Least-squares slope of `ln|v|` against `ln r` over the points with nonzero `v`.
fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.1 != 0.0).map(|p| (p.0.ln(), p.1.abs().ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Fits decay rates of the metric deviation and the scalar curvature over the
/// outer half (in `ln r`) of the sampled range.
pub fn check_asymptotic_flatness(base: &BaseGeometry) -> Result<AfReport> {
    let nf = base.n.as_f64();
    let Some(w) = &base.warp else {
        return Ok(AfReport {
            decay_exponent_estimate: f64::INFINITY,
            curvature_decay_estimate: f64::INFINITY,
            scalar_curvature_samples: vec![(base.r0, 0.0)],
            pass: true,
        });
    };
    let lo = base.r0.ln();
    let hi = base.r_max().ln();
    let outer: Vec<f64> = w.samples.iter().map(|s| s[0]).filter(|r| r.ln() >= 0.5 * (lo + hi)).collect();
    if outer.len() < 5 {
        return Err(Error::InsufficientSamples(format!(
            "asymptotic fit needs at least 5 outer samples, got {}",
            outer.len()
        )));
    }
    let metric: Vec<(f64, f64)> = outer
        .iter()
        .map(|&r| {
            let rho = base.rho_derivs_unchecked(r).0;
            let dev = rho / r - 1.0;
            (r, if dev.abs() <= 1e-14 { 0.0 } else { dev })
        })
        .collect();
    let curv: Vec<(f64, f64)> = outer
        .iter()
        .map(|&r| {
            let s = base.scalar_curvature(r).unwrap_or(0.0);
            (r, if s.abs() <= 1e-5 * base.curvature_scale(r) { 0.0 } else { s })
        })
        .collect();
    let p_est = log_log_slope(&metric).map(|s| -s).unwrap_or(f64::INFINITY);
    let q_est = log_log_slope(&curv).map(|s| -s).unwrap_or(f64::INFINITY);
    let stride = (w.samples.len() / 200).max(1);
    let samples =
        w.samples.iter().step_by(stride).map(|s| (s[0], base.scalar_curvature(s[0]).unwrap_or(f64::NAN))).collect();
    Ok(AfReport {
        decay_exponent_estimate: p_est,
        curvature_decay_estimate: q_est,
        scalar_curvature_samples: samples,
        pass: p_est > (nf - 2.0) / 2.0 && q_est > nf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(n: usize) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn constants_small_dimensions() {
        let c = constants(dim(3));
        assert_eq!((c.p, c.k), (4.0, 4.0));
        assert!((c.omega - 4.0 * PI).abs() < 1e-14);
        let c = constants(dim(4));
        assert_eq!((c.p, c.k), (3.0, 2.0));
        assert!((c.omega - 2.0 * PI * PI).abs() < 1e-13);
        let c = constants(dim(5));
        assert!((c.p - 8.0 / 3.0).abs() < 1e-15 && (c.k - 4.0 / 3.0).abs() < 1e-15);
        assert!((c.omega - 8.0 * PI * PI / 3.0).abs() < 1e-13);
        assert!((constants(dim(6)).omega - PI.powi(3)).abs() < 1e-12);
        assert!((constants(dim(7)).omega - 16.0 * PI.powi(3) / 15.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_bounds() {
        assert!(matches!(Dimension::new(2), Err(Error::DimensionOutOfRange(2))));
        assert!(Dimension::new(8).is_err());
    }

    #[test]
    fn flat_is_scalar_flat_and_passes() {
        let b = BaseGeometry::flat(dim(3), 1.0).unwrap();
        assert_eq!(b.scalar_curvature(5.0).unwrap(), 0.0);
        let rep = check_asymptotic_flatness(&b).unwrap();
        assert!(rep.pass && rep.decay_exponent_estimate.is_infinite());
    }

    #[test]
    fn schwarzschild_closed_form_in_three_dimensions() {
        let b = BaseGeometry::schwarzschild(dim(3), 2.0, 2000, 1e4).unwrap();
        for &x in &[1.0, 1.5, 3.0, 20.0] {
            let r: f64 = 1.0 + x + 2.0 * f64::ln(x) - 1.0 / x;
            let rho = (x + 1.0) * (x + 1.0) / x;
            assert!((b.rho(r).unwrap() - rho).abs() < 1e-11 * rho, "x={x}");
        }
    }

    #[test]
    fn too_few_samples() {
        let s = vec![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        assert!(matches!(BaseGeometry::warped(dim(3), s, None), Err(Error::InsufficientSamples(_))));
    }

    #[test]
    fn out_of_range_radius() {
        let b = BaseGeometry::schwarzschild(dim(3), 2.0, 50, 100.0).unwrap();
        assert!(matches!(b.rho(0.5), Err(Error::OutOfRange { .. })));
        assert!(b.rho(1e3).is_err());
    }
}
