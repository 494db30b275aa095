//! Adaptive Dormand–Prince 5(4) integrator for small fixed-size systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

/// One accepted step: abscissa, state, derivative.
#[derive(Debug, Clone, Copy)]
pub struct Sample<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub dy: [f64; N],
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction), returning
/// every accepted step. `max_step(t)` bounds the step magnitude.
pub fn integrate<const N: usize, F, H>(
    f: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    tol: Tolerance,
    max_step: H,
) -> Result<Vec<Sample<N>>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    H: Fn(f64) -> f64,
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut out = vec![Sample { t, y, dy: k1 }];
    let mut h = max_step(t).min((t1 - t0).abs()) * 0.1;
    let mut steps = 0usize;
    while dir * (t1 - t) > 0.0 {
        steps += 1;
        if steps > 2_000_000 {
            return Err(Error::Integration("step budget exhausted".into()));
        }
        h = h.min(max_step(t)).min((t1 - t).abs());
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Integration(format!("step size underflow at t={t}")));
        }
        let mut k = [[0.0; N]; 7];
        k[0] = k1;
        for s in 1..7 {
            let mut ys = y;
            for i in 0..N {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * k[j][i];
                }
                ys[i] += dir * h * acc;
            }
            k[s] = f(t + dir * h * C[s], &ys);
        }
        let mut y5 = y;
        let mut err = 0.0f64;
        for i in 0..N {
            let mut s5 = 0.0;
            let mut s4 = 0.0;
            for s in 0..7 {
                s5 += B5[s] * k[s][i];
                s4 += B4[s] * k[s][i];
            }
            y5[i] += dir * h * s5;
            let scale = tol.abs + tol.rel * y[i].abs().max(y5[i].abs());
            err = err.max((h * (s5 - s4)).abs() / scale);
        }
        if !err.is_finite() {
            h *= 0.25;
            continue;
        }
        if err <= 1.0 {
            t += dir * h;
            if dir * (t - t1) > 0.0 || (t1 - t).abs() < 1e-15 * t1.abs().max(1.0) {
                t = t1;
            }
            y = y5;
            k1 = k[6];
            out.push(Sample { t, y, dy: k1 });
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    Ok(out)
}
