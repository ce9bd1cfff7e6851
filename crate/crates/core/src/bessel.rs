//! Modified Bessel functions of the second kind, orders 0 and 1.
//!
//! For `x <= 2` both orders come from Temme's series at order zero; above that
//! from Steed's evaluation of the second continued fraction (CF2). Both routes
//! converge to full double precision and need no fitted coefficient tables.

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-17;
const MAX_ITER: usize = 10_000;

/// K_1(x) for `x > 0`.
pub fn bessel_k1(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(x));
    }
    Ok(k0_k1(x).1)
}

/// K_0(x) for `x > 0`.
pub fn bessel_k0(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(x));
    }
    Ok(k0_k1(x).0)
}

/// Returns `(K_0(x), K_1(x))`; caller guarantees `x > 0`.
pub(crate) fn k0_k1(x: f64) -> (f64, f64) {
    if x <= 2.0 {
        temme_series(x)
    } else {
        steed_cf2(x)
    }
}

fn temme_series(x: f64) -> (f64, f64) {
    let half = 0.5 * x;
    // At order zero: gamma_1 = -Euler, gamma_2 = 1, and the sinh/sin ratios are 1.
    let mut ff = -EULER_GAMMA - half.ln();
    let mut sum = ff;
    let mut p = 0.5;
    let mut q = 0.5;
    let mut c = 1.0;
    let d = half * half;
    let mut sum1 = p;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi);
        c *= d / fi;
        p /= fi;
        q /= fi;
        let del = c * ff;
        sum += del;
        let del1 = c * (p - fi * ff);
        sum1 += del1;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum, sum1 * 2.0 / x)
}

fn steed_cf2(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}
