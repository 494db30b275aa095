//! Clamped cubic spline on a strictly increasing knot sequence.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    /// Spline with prescribed end slopes.
    pub fn clamped(x: Vec<f64>, y: Vec<f64>, slope_start: f64, slope_end: f64) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::InsufficientSamples(format!("spline needs >= 2 knots, got {n}")));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGeometry("spline knots must be strictly increasing".into()));
        }
        // Tridiagonal system for the knot second derivatives.
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let h0 = x[1] - x[0];
        b[0] = h0 / 3.0;
        c[0] = h0 / 6.0;
        d[0] = (y[1] - y[0]) / h0 - slope_start;
        for i in 1..n - 1 {
            let hl = x[i] - x[i - 1];
            let hr = x[i + 1] - x[i];
            a[i] = hl / 6.0;
            b[i] = (hl + hr) / 3.0;
            c[i] = hr / 6.0;
            d[i] = (y[i + 1] - y[i]) / hr - (y[i] - y[i - 1]) / hl;
        }
        let hn = x[n - 1] - x[n - 2];
        a[n - 1] = hn / 6.0;
        b[n - 1] = hn / 3.0;
        d[n - 1] = slope_end - (y[n - 1] - y[n - 2]) / hn;
        for i in 1..n {
            let w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            d[i] -= w * d[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = d[n - 1] / b[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (d[i] - c[i] * m[i + 1]) / b[i];
        }
        Ok(Self { x, y, m })
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    /// Value, first and second derivative. Arguments outside the knot range
    /// use the end cubic.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let n = self.x.len();
        let i = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let s = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let ds = (y1 - y0) / h + (-(3.0 * a * a - 1.0) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let dds = a * m0 + b * m1;
        (s, ds, dds)
    }
}

/// Five-point one-sided derivative estimate at `x[0]` (or `x[last]` when
/// `at_end`), valid on non-uniform knots via Lagrange differentiation.
pub fn one_sided_slope(x: &[f64], y: &[f64], at_end: bool) -> f64 {
    let k = x.len().min(5);
    let idx: Vec<usize> = if at_end { (x.len() - k..x.len()).collect() } else { (0..k).collect() };
    let t0 = if at_end { x[x.len() - 1] } else { x[0] };
    let mut slope = 0.0;
    for &j in &idx {
        // derivative of the Lagrange basis polynomial l_j at t0
        let mut dl = 0.0;
        for &m in &idx {
            if m == j {
                continue;
            }
            let mut term = 1.0 / (x[j] - x[m]);
            for &q in &idx {
                if q != j && q != m {
                    term *= (t0 - x[q]) / (x[j] - x[q]);
                }
            }
            dl += term;
        }
        slope += y[j] * dl;
    }
    slope
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubic() {
        let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).powf(1.3)).collect();
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t - 0.1 * t * t * t;
        let df = |t: f64| -2.0 + t - 0.3 * t * t;
        let y: Vec<f64> = x.iter().map(|&t| f(t)).collect();
        let s = CubicSpline::clamped(x.clone(), y, df(x[0]), df(*x.last().unwrap())).unwrap();
        for t in [0.05, 0.8, 2.1, 3.3] {
            let (v, d, dd) = s.eval(t);
            assert!((v - f(t)).abs() < 1e-12);
            assert!((d - df(t)).abs() < 1e-11);
            assert!((dd - (1.0 - 0.6 * t)).abs() < 1e-10);
        }
    }

    #[test]
    fn one_sided_slope_exact_for_quartic() {
        let x = [1.0, 1.1, 1.25, 1.4, 1.7, 2.0];
        let f = |t: f64| t.powi(4) - t;
        let y: Vec<f64> = x.iter().map(|&t| f(t)).collect();
        assert!((one_sided_slope(&x, &y, false) - 3.0).abs() < 1e-9);
        assert!((one_sided_slope(&x, &y, true) - 31.0).abs() < 1e-9);
    }
}
