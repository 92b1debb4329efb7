//! Gauss hypergeometric series `₂F₁(a, b; c; z)` inside `|z| ≤ 0.9`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest `|z|` accepted by [`hyp2f1`].
pub const MAX_ABS_Z: f64 = 0.9;
const REL_TOL: f64 = 1e-14;
const MAX_TERMS: usize = 2000;

/// A series value with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: Complex64,
    /// Absolute error estimate (tail bound plus accumulated rounding).
    pub abs_err: f64,
    pub terms: usize,
}

pub(crate) fn is_nonpositive_integer(c: Complex64) -> bool {
    c.im == 0.0 && c.re <= 0.0 && c.re.fract() == 0.0
}

/// Sums the Gauss series until the relative term falls below `1e-14`.
pub fn hyp2f1(a: Complex64, b: Complex64, c: Complex64, z: Complex64) -> Result<SeriesValue> {
    if is_nonpositive_integer(c) {
        return Err(Error::Pole(format!("2F1 lower parameter c = {c} is a nonpositive integer")));
    }
    let az = z.norm();
    if !(az <= MAX_ABS_Z) {
        return Err(Error::domain(format!(
            "2F1 series needs |z| <= {MAX_ABS_Z}, got |z| = {az}"
        )));
    }
    let mut sum = Complex64::new(1.0, 0.0);
    let mut term = Complex64::new(1.0, 0.0);
    let mut abs_sum = 1.0;
    let mut small = 0;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
        let t = term.norm();
        abs_sum += t;
        if t == 0.0 {
            return Ok(SeriesValue {
                value: sum,
                abs_err: abs_sum * f64::EPSILON,
                terms: n + 1,
            });
        }
        // Two consecutive small terms guard against a term passing near zero.
        if t < REL_TOL * sum.norm() {
            small += 1;
            if small == 2 {
                let ratio = ((a + nf + 1.0) * (b + nf + 1.0) / ((c + nf + 1.0) * (nf + 2.0))).norm() * az;
                let tail = if ratio < 1.0 { t * ratio / (1.0 - ratio) } else { t };
                return Ok(SeriesValue {
                    value: sum,
                    abs_err: tail + abs_sum * f64::EPSILON,
                    terms: n + 1,
                });
            }
        } else {
            small = 0;
        }
    }
    Err(Error::Precision(format!(
        "2F1 series did not converge in {MAX_TERMS} terms at z = {z}"
    )))
}
