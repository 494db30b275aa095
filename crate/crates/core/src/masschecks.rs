//! Numerical checks of the consequences of the Penrose-type inequality for
//! the harmonic conformal class. Reports are findings; nothing here asserts
//! the inequality itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{constants, BaseGeometry, Dimension};
use crate::harmonic::Exterior;
use crate::invariants::{invariants, mu_formula, InvariantSet};
use crate::quadrature::sphere_quadrature;

/// Absolute tolerance on mass quantities.
pub const MASS_TOLERANCE: f64 = 1e-6;
/// Scalar curvature above this counts as nonnegative.
pub const CURVATURE_FLOOR: f64 = -1e-8;
pub const REPORT_LABEL: &str = "conditional consequence check";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
    pub margin: f64,
    pub hypotheses_note: String,
    pub label: String,
    /// False when a hypothesis of the inequality is not met; `satisfied`
    /// is then not meaningful.
    pub applicable: bool,
}

impl InequalityReport {
    fn new(name: &str, lhs: f64, rhs: f64, note: String, applicable: bool) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            satisfied: lhs >= rhs - MASS_TOLERANCE,
            margin: lhs - rhs,
            hypotheses_note: note,
            label: REPORT_LABEL.into(),
            applicable,
        }
    }
}

/// `(1/2) (area/ω)^{(n-2)/(n-1)}`: the mass of the Schwarzschild metric whose
/// horizon has the given area.
pub fn penrose_rhs(n: Dimension, area: f64) -> Result<f64> {
    if !(area > 0.0) {
        return Err(Error::InvalidArgument(format!("area must be positive, got {area}")));
    }
    let c = constants(n);
    let nf = c.n as f64;
    Ok(0.5 * (area / c.omega).powf((nf - 2.0) / (nf - 1.0)))
}

/// Smallest scalar curvature over a log-spaced sample of the radial range.
pub fn min_scalar_curvature(base: &BaseGeometry) -> Result<f64> {
    if base.is_flat() {
        return Ok(0.0);
    }
    let (lo, hi) = (base.r0().ln(), base.r_max().ln());
    let mut radii: Vec<f64> = (0..400).map(|i| (lo + (hi - lo) * i as f64 / 399.0).exp()).collect();
    radii.extend(base.sample_radii());
    let mut min = f64::INFINITY;
    for r in radii {
        let r = r.clamp(base.r0(), base.r_max());
        min = min.min(base.scalar_curvature(r)?);
    }
    Ok(min)
}

fn hypotheses_note(base: &BaseGeometry) -> Result<String> {
    let rmin = min_scalar_curvature(base)?;
    Ok(if rmin >= CURVATURE_FLOOR {
        format!("nonnegative scalar curvature verified on the sampled range (min {rmin:.3e})")
    } else {
        format!("nonnegative scalar curvature NOT verified: min sampled value {rmin:.3e}")
    })
}

fn base_invariants(base: &BaseGeometry) -> Result<InvariantSet> {
    let ext = Exterior::new(base.clone(), sphere_quadrature(base.dimension(), 0, 0)?)?;
    Ok(invariants(&ext))
}

/// Compares `μ(A)` with the Penrose bound for the area `α(A)`; inapplicable
/// unless `α(A) < A`.
pub fn check_mu_alpha(base: &BaseGeometry, area: f64, alpha_value: f64) -> Result<InequalityReport> {
    if !(alpha_value > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha value must be positive, got {alpha_value}")));
    }
    let inv = base_invariants(base)?;
    let lhs = mu_formula(&inv, base.n(), area)?;
    let rhs = penrose_rhs(base.dimension(), alpha_value)?;
    let mut note = hypotheses_note(base)?;
    let applicable = alpha_value < area * (1.0 - 1e-9);
    if !applicable {
        note.push_str("; alpha(A) < A does not hold, comparison inapplicable");
    }
    Ok(InequalityReport::new("mu_vs_alpha", lhs, rhs, note, applicable))
}

/// `I1 + I2 >= 0`.
pub fn check_i_sum(base: &BaseGeometry) -> Result<InequalityReport> {
    let inv = base_invariants(base)?;
    Ok(InequalityReport::new("I1_plus_I2", inv.i1 + inv.i2, 0.0, hypotheses_note(base)?, true))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZasMass {
    /// `-I2`.
    pub zas_mass: f64,
    /// ADM mass of `φ^k g`, equal to `I1`.
    pub adm_mass_conformal: f64,
}

pub fn zas_mass(base: &BaseGeometry) -> Result<ZasMass> {
    let inv = base_invariants(base)?;
    Ok(ZasMass { zas_mass: -inv.i2, adm_mass_conformal: inv.i1 })
}

/// The mass estimate `m_ADM(φ^k g) >= m_ZAS` as a report.
pub fn check_mass_estimate(base: &BaseGeometry) -> Result<InequalityReport> {
    let z = zas_mass(base)?;
    Ok(InequalityReport::new("mass_estimate", z.adm_mass_conformal, z.zas_mass, hypotheses_note(base)?, true))
}
