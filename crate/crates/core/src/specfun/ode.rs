//! Adaptive Dormand–Prince 5(4) integrator for complex second-order
//! systems written as `[y, y']`.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type State = [Complex64; 2];

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Step-size control for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on `|h|`.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-13,
            atol: 1e-300,
            h_max: 0.25,
            max_steps: 5_000_000,
        }
    }
}

/// Solution at one requested output point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeSample {
    pub t: f64,
    pub y: State,
    /// Accumulated local error estimate in `y[0]`.
    pub err: f64,
}

fn axpy(y: &State, h: f64, ks: &[State], coef: &[f64]) -> State {
    let mut out = *y;
    for (k, &a) in ks.iter().zip(coef) {
        if a != 0.0 {
            out[0] += k[0] * (h * a);
            out[1] += k[1] * (h * a);
        }
    }
    out
}

/// Integrates `y' = f(t, y)` from `(t0, y0)` through the output points, which
/// must be monotone in the direction of integration. Every output is hit
/// exactly by a step endpoint.
pub fn integrate<F>(f: F, t0: f64, y0: State, outputs: &[f64], opts: OdeOptions) -> Result<Vec<OdeSample>>
where
    F: Fn(f64, &State) -> State,
{
    let Some(&last) = outputs.last() else {
        return Ok(Vec::new());
    };
    let dir = if last >= t0 { 1.0 } else { -1.0 };
    let mut prev = t0;
    for &t in outputs {
        if (t - prev) * dir < 0.0 {
            return Err(Error::domain("ODE outputs must be monotone away from t0"));
        }
        prev = t;
    }
    let mut t = t0;
    let mut y = y0;
    let mut err_acc = 0.0;
    let mut h = opts.h_max.min(1e-3);
    let mut k0 = f(t, &y);
    let mut out = Vec::with_capacity(outputs.len());
    let mut steps = 0;
    for &target in outputs {
        while (target - t) * dir > 0.0 {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::Precision(format!("ODE step budget exhausted at t = {t}")));
            }
            let remaining = (target - t).abs();
            let hh = h.min(opts.h_max).min(remaining);
            let hs = hh * dir;
            let mut ks: [State; 7] = [k0; 7];
            for s in 1..7 {
                let ys = axpy(&y, hs, &ks[..s], &A[s][..s]);
                ks[s] = f(t + C[s] * hs, &ys);
            }
            let y_new = axpy(&y, hs, &ks[..6], &A[6]);
            let mut e = [Complex64::new(0.0, 0.0); 2];
            for (k, &c) in ks.iter().zip(&E) {
                e[0] += k[0] * (hs * c);
                e[1] += k[1] * (hs * c);
            }
            let scale = opts.atol
                + opts.rtol
                    * y[0]
                        .norm()
                        .max(y[1].norm())
                        .max(y_new[0].norm())
                        .max(y_new[1].norm());
            let en = e[0].norm().max(e[1].norm()) / scale;
            if !en.is_finite() {
                return Err(Error::Precision(format!("ODE solution is not finite at t = {t}")));
            }
            if en <= 1.0 {
                t = if hh == remaining { target } else { t + hs };
                y = y_new;
                k0 = ks[6];
                err_acc += e[0].norm();
            }
            let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
            h = hh * fac;
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(Error::Precision(format!("ODE step underflow at t = {t}")));
            }
        }
        out.push(OdeSample { t: target, y, err: err_acc });
    }
    Ok(out)
}
