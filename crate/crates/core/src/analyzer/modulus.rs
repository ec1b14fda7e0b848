//! Tail integrals of the modulus of continuity for P(t) = t^n log^a(e + t).

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use super::quadrature::{integrate_box, integrate_interval, Tolerance};
use crate::error::{invalid, Error, Result};
use crate::roots::bisect;

pub fn orlicz_p(n: usize, a: f64, t: f64) -> f64 {
    t.powi(n as i32) * (E + t).ln().powf(a)
}

/// P^{-1}(t) for a >= 0, solved in log s.
pub fn orlicz_inverse(n: usize, a: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid("t", "P^-1 needs a finite positive argument"));
    }
    if !(a >= 0.0) || n == 0 {
        return Err(invalid("a", "P is increasing only for a >= 0 and n >= 1"));
    }
    let nf = n as f64;
    let lt = t.ln();
    let ln_p = |v: f64| nf * v + a * (E + v.exp()).ln().ln() - lt;
    let hi = lt / nf + 1.0;
    let lo = (lt - a * (E + (lt / nf).exp()).ln().ln()) / nf - 1.0;
    let v = bisect(ln_p, lo, hi, 1e-15 * (1.0 + hi.abs())).ok_or_else(|| Error::Evaluation(format!("P^-1({t})")))?;
    Ok(v.exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusTail {
    pub value: f64,
    /// Part over [L, T].
    pub head: f64,
    /// Part over [T, inf), by quadrature in v = log P^{-1}(t).
    pub remainder: f64,
    pub split: f64,
    pub error: f64,
    pub converged: bool,
}

/// int_L^inf P^{-1}(t) t^{-(n+1)/n} dt.
pub fn modulus_tail(n: usize, a: f64, lower: f64) -> Result<ModulusTail> {
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    let nf = n as f64;
    if !(a > nf) {
        return Err(Error::Divergent(format!("the tail is infinite for a = {a} <= n = {n}")));
    }
    if !(lower >= 1.0) || !lower.is_finite() {
        return Err(invalid("lower", "need L >= 1"));
    }
    let split = (lower * lower).max(1e6);
    let tol = Tolerance { rel: 1e-12, abs: 1e-300, max_subdivisions: 2000 };
    // head in u = log t
    let head = integrate_interval(
        |u| orlicz_inverse(n, a, u.exp()).map_or(f64::NAN, |s| s * (-u / nf).exp()),
        lower.ln(),
        split.ln(),
        &tol,
    );
    // With s = P^{-1}(t) and v = log s the integrand becomes
    // l^{-a/n} (n + a s / ((e + s) l)), l = log(e + s), which decays like v^{-a/n}.
    // v = v_T - 1 + tau^{-m} with m = 1/(a/n - 1) makes it bounded on tau in (0, 1].
    let v_t = orlicz_inverse(n, a, split)?.ln();
    let m = 1.0 / (a / nf - 1.0);
    let remainder = integrate_box(
        |p| {
            let tau = p[0];
            let z = tau.powf(-m);
            let v = v_t - 1.0 + z;
            if !v.is_finite() {
                return 0.0;
            }
            let l = if v > 700.0 { v + (E * (-v).exp()).ln_1p() } else { (E + v.exp()).ln() };
            let frac = 1.0 / (1.0 + E * (-v).exp());
            let g = l.powf(-a / nf) * (nf + a * frac / l);
            let out = g * m * z / tau;
            if out.is_finite() {
                out
            } else {
                0.0
            }
        },
        &[0.0],
        &[1.0],
        &tol,
    );
    Ok(ModulusTail {
        value: head.value + remainder.value,
        head: head.value,
        remainder: remainder.value,
        split,
        error: head.error + remainder.error,
        converged: head.converged && remainder.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        for &(n, a, s) in &[(2usize, 3.0, 5.0), (3, 0.0, 0.2), (2, 7.5, 1e8)] {
            let back = orlicz_inverse(n, a, orlicz_p(n, a, s)).unwrap();
            assert!((back - s).abs() <= 1e-10 * s, "{n} {a} {s}: {back}");
        }
    }

    #[test]
    fn tail_decreases_and_rejects_small_exponent() {
        let t: Vec<f64> = [1e2, 1e3, 1e4].iter().map(|&l| modulus_tail(2, 3.0, l).unwrap().value).collect();
        assert!(t[0] > t[1] && t[1] > t[2] && t[2] > 0.0, "{t:?}");
        assert!(matches!(modulus_tail(2, 2.0, 100.0), Err(Error::Divergent(_))));
    }

    #[test]
    fn golden_tails() {
        // mpmath oracle (30 digits), in both the t and the log P^{-1}(t) forms
        for &(n, a, l, v) in &[(2usize, 3.0, 100.0, 3.954_947_933_167_206_8), (1, 4.0, 10.0, 0.345_435_323_637_724_4)] {
            let r = modulus_tail(n, a, l).unwrap();
            assert!((r.value - v).abs() < 1e-10 * v, "{n} {a} {l}: {}", r.value);
        }
    }
}
