//! Dyadic shells around a singular point and the convergence verdict.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use super::quadrature::integrate_box;
use super::{finite_or_nan, over_sphere, pick_shift, Integrand, Piece, QuadratureTask};
use crate::linalg::{log_add_exp, stable_sum};
use crate::par::map_range;

/// Shells in the window that decides the verdict.
const WINDOW: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

/// Integrals I_k over the shells 2^{-k-1} r_0 <= |x - c| <= 2^{-k} r_0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellProfile {
    pub center: Vec<f64>,
    /// r_k = 2^{-k} r_0, k = 0..=K.
    pub radii: Vec<f64>,
    /// log |I_k|, k = 0..K-1.
    pub ln_values: Vec<f64>,
    /// d log I_k / d log k over the last shells.
    pub local_exponent: f64,
    /// d log I_k / dk over the last shells.
    pub log_slope: f64,
    pub verdict: Verdict,
    /// log of the extrapolated remainder past the last shell (-inf unless convergent).
    pub ln_tail: f64,
    /// log of the shell sum without the tail.
    pub ln_partial: f64,
    /// log of shell sum plus tail (positive integrands).
    pub ln_total: f64,
    /// Shell sum plus tail (signed integrands).
    pub signed_total: f64,
    pub ln_error: f64,
    pub converged: bool,
    pub evaluations: usize,
}

pub(crate) fn shell_profile(f: Integrand<'_>, c: &[f64], rho_in: f64, task: &QuadratureTask) -> ShellProfile {
    let n = c.len();
    let k_max = task.shells;
    let (alo, ahi): (Vec<f64>, Vec<f64>) = match n {
        1 => (vec![], vec![]),
        2 => (vec![0.0], vec![2.0 * PI]),
        _ => (vec![0.0, 0.0], vec![PI, 2.0 * PI]),
    };
    let point = |t: f64, d: &[f64]| -> Vec<f64> { c.iter().zip(d).map(|(ci, di)| ci + t.exp() * di).collect() };
    let pieces: Vec<Piece> = map_range(k_max, |k| {
        let t0 = rho_in.ln() - (k as f64 + 1.0) * LN_2;
        let mut lo = vec![t0];
        lo.extend(&alo);
        let mut hi = vec![t0 + LN_2];
        hi.extend(&ahi);
        let tm = t0 + 0.5 * LN_2;
        let shift = if n == 1 {
            pick_shift(f, &[(point(tm, &[1.0]), tm), (point(tm, &[-1.0]), tm)])
        } else {
            let probes: Vec<(Vec<f64>, f64)> = [0.3, 1.9, 4.1]
                .iter()
                .map(|&a| {
                    let ang = if n == 2 { vec![a] } else { vec![0.5 * a + 0.2, a] };
                    let (d, w) = super::direction(n, &ang);
                    (point(tm, &d), n as f64 * tm + w.ln())
                })
                .collect();
            pick_shift(f, &probes)
        };
        let eval = |p: &[f64]| {
            let t = p[0];
            over_sphere(n, &p[1..], |d, ln_dw| f.weighted(&point(t, d), n as f64 * t + ln_dw, shift))
        };
        let abs = if matches!(f, Integrand::Log(_)) { 1e-300 } else { task.abs_tol };
        let q = integrate_box(|p| finite_or_nan(eval(p)), &lo, &hi, &task.tolerance(abs));
        Piece { shift, q }
    });
    summarize(f, c, rho_in, task.slope_tol, &pieces)
}

fn summarize(f: Integrand<'_>, c: &[f64], rho_in: f64, slope_tol: f64, pieces: &[Piece]) -> ShellProfile {
    let k_max = pieces.len();
    let ln_values: Vec<f64> = pieces.iter().map(|p| p.ln_abs()).collect();
    let converged = pieces.iter().all(|p| p.q.converged);
    let evaluations = pieces.iter().map(|p| p.q.evaluations).sum();
    let window = k_max - WINDOW..k_max;
    let ys: Vec<f64> = window.clone().map(|k| ln_values[k]).collect();
    let ks: Vec<f64> = window.clone().map(|k| (k + 1) as f64).collect();
    let local_exponent = fit_slope(&ks.iter().map(|k| k.ln()).collect::<Vec<_>>(), &ys);
    let log_slope = fit_slope(&ks, &ys);
    let any_bad = ln_values.iter().any(|v| v.is_nan() || *v == f64::INFINITY);
    let window_zero = ys.iter().any(|v| *v == f64::NEG_INFINITY);
    let window_converged = window.clone().all(|k| pieces[k].q.converged);
    let verdict = if any_bad || !window_converged {
        Verdict::Inconclusive
    } else if window_zero {
        Verdict::Convergent
    } else if local_exponent >= -1.0 - slope_tol {
        Verdict::Divergent
    } else {
        Verdict::Convergent
    };
    let ln_partial = ln_values.iter().copied().fold(f64::NEG_INFINITY, log_add_exp);
    // Tail past the last shell: power law k^p (an upper bound while the decay
    // does not slow down); the gap to the geometric model goes into the error.
    let (ln_tail, ln_tail_gap) = if verdict == Verdict::Convergent && !window_zero {
        let last = ln_values[k_max - 1];
        let kk = k_max as f64;
        let power = last + (kk / (-local_exponent - 1.0)).ln();
        let q = log_slope.exp();
        let geometric = last + (q / (1.0 - q)).ln();
        let gap = if power > geometric { power + (-(geometric - power).exp()).ln_1p() } else { f64::NEG_INFINITY };
        (power, gap)
    } else {
        (f64::NEG_INFINITY, f64::NEG_INFINITY)
    };
    let ln_total = log_add_exp(ln_partial, ln_tail);
    let last_sign = pieces.last().map_or(1.0, |p| p.q.value.signum());
    let signed_total = if f.is_log() {
        ln_total.exp()
    } else {
        stable_sum(pieces.iter().map(|p| p.value()).chain([last_sign * ln_tail.exp()]))
    };
    let ln_error = pieces.iter().map(|p| p.ln_error()).fold(ln_tail_gap, log_add_exp);
    let radii = (0..=k_max).map(|k| rho_in * (-(k as f64) * LN_2).exp()).collect();
    ShellProfile {
        center: c.to_vec(),
        radii,
        ln_values,
        local_exponent,
        log_slope,
        verdict,
        ln_tail,
        ln_partial,
        ln_total,
        signed_total,
        ln_error,
        converged,
        evaluations,
    }
}

/// Least-squares slope of y against x.
fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
