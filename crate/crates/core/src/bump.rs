//! The radial bump u with infinite blow-up at the origin but finite energy
//! for Phi(t) = t^n log^{n-1}(e+t) log^{n-1}(log(e+t)).
//!
//! On the shell a_{k+1} <= r <= a_k, u(r) = k + int_r^{a_k} h_k, where h_k(t) solves
//! phi(2 h) = (2^k t)^n with phi(t) = (t log(e+t) log log(e+t))^{-n}.  Writing
//! sigma = ln(2h) and x = -ln t this is sigma + ln A + ln ln A = x - k ln 2 with
//! A = ln(e + e^sigma), and t h_k(t) = 2^{-k-1} / (A ln A) exactly.
//!
//! Radii below a_2 underflow `f64` almost at once (a_3 ~ exp(-e^2981)), so
//! integrals run in x, y = ln x or w = ln y depending on depth.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::analyzer::quadrature::{integrate_interval, Tolerance};
use crate::error::{invalid, Error, Result};
use crate::levelindex::Radius;
use crate::roots::{bisect, newton_bracketed};

/// Integrate in x below this value of x.
const X_SWITCH: f64 = 20.0;
/// Integrate in w = ln ln x above this value of y = ln x.
const Y_DEEP: f64 = 40.0;

/// (A - 1, B) for sigma, with A = ln(e + e^sigma) and B = ln A.
fn a_minus_one_and_b(sigma: f64) -> (f64, f64) {
    if sigma < 700.0 {
        let a1 = (sigma - 1.0).exp().ln_1p();
        (a1, a1.ln_1p())
    } else {
        let a = sigma + (1.0 - sigma).exp().ln_1p();
        (a - 1.0, a.ln())
    }
}

/// sigma + ln A + ln B and its derivative.
fn sigma_equation(sigma: f64) -> (f64, f64) {
    let (a1, b) = a_minus_one_and_b(sigma);
    let a = 1.0 + a1;
    let ln_b = if sigma < -600.0 { sigma - 1.0 } else { b.ln() };
    let da = 1.0 / (1.0 + (1.0 - sigma).exp());
    let db = da / a;
    let dlnb = if sigma < -600.0 { 1.0 } else { db / b };
    (sigma + b + ln_b, 1.0 + db + dlnb)
}

/// sigma = ln(2 h) for right-hand side c = x - k ln 2 (Newton, bracketed).
fn solve_sigma(c: f64) -> f64 {
    // c >= sigma for sigma >= 1 and c ~ 2 sigma - 1 for very negative sigma
    let lo = (c.min(0.5 * (c + 1.0))) - 2.0;
    let hi = c.max(0.5 * (c + 1.0)) + 2.0;
    let guess = if c > 3.0 { c - c.ln() - c.ln().ln().max(0.0) } else { 0.5 * (c + 1.0) };
    newton_bracketed(|s| { let (f, d) = sigma_equation(s); (f - c, d) }, lo, hi, guess, 1e-16)
}

/// Solution of phi(2s) = (2^k t)^n (independent of n).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HValue {
    pub value: f64,
    /// True when h underflowed and the value is only the bisection floor.
    pub underflow: bool,
}

/// h_k(t) by bracketing and bisection on ln(2s), relative accuracy 1e-12.
pub fn h_k(k: u32, t: f64) -> Result<HValue> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid("t", format!("h_k needs a positive finite argument, got {t}")));
    }
    if k == 0 {
        return Err(invalid("k", "shell index starts at 1"));
    }
    let c = -t.ln() - k as f64 * LN_2;
    let g = |s: f64| sigma_equation(s).0 - c;
    let (mut lo, mut hi) = (-1.0, 1.0);
    while g(lo) > 0.0 {
        lo *= 2.0;
    }
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    let sigma = bisect(g, lo, hi, 1e-13 * (1.0 + lo.abs().max(hi.abs()).min(1e3))).unwrap();
    let floor = (1e-300f64).ln() + LN_2;
    if sigma < floor {
        return Ok(HValue { value: 1e-300, underflow: true });
    }
    Ok(HValue { value: 0.5 * sigma.exp(), underflow: false })
}

/// Area of the unit sphere S^{n-1}.
fn sphere_area(n: usize) -> Result<f64> {
    match n {
        2 => Ok(2.0 * PI),
        3 => Ok(4.0 * PI),
        4 => Ok(2.0 * PI * PI),
        _ => Err(invalid("n", format!("dimension {n} not supported (2, 3 or 4)"))),
    }
}

/// Quantities at one radius inside shell k.
#[derive(Clone, Copy, Debug)]
struct Local {
    /// A(2h), B(2h) relative to x and y: (x / A, y / B); 1 in the deepest range.
    x_over_a: f64,
    y_over_b: f64,
    /// (1 + x) / A and 1 / B.
    one_plus_x_over_a: f64,
    inv_b: f64,
    /// A_h / A and B_h / B where A_h = ln(e + h).
    ah_over_a: f64,
    bh_over_b: f64,
    /// ln h.
    ln_h: f64,
}

fn local_moderate(k: u32, x: f64) -> Local {
    let sigma = solve_sigma(x - k as f64 * LN_2);
    let (a1, b) = a_minus_one_and_b(sigma);
    let a = 1.0 + a1;
    let ln_h = sigma - LN_2;
    let ah = if ln_h < 700.0 { (ln_h - 1.0).exp().ln_1p() + 1.0 } else { ln_h + (1.0 - ln_h).exp().ln_1p() };
    let bh = ah.ln();
    Local {
        x_over_a: x / a,
        y_over_b: x.ln() / b,
        one_plus_x_over_a: (1.0 + x) / a,
        inv_b: 1.0 / b,
        ah_over_a: ah / a,
        bh_over_b: bh / b,
        ln_h,
    }
}

/// Deep range: x = e^y with y >= Y_DEEP, where sigma = x - delta with
/// delta = k ln 2 + ln A + ln ln A, iterated in terms of y.
fn local_deep(k: u32, y: f64) -> Local {
    if !y.is_finite() || y > 1e300 {
        return Local {
            x_over_a: 1.0,
            y_over_b: 1.0,
            one_plus_x_over_a: 1.0,
            inv_b: 0.0,
            ah_over_a: 1.0,
            bh_over_b: 1.0,
            ln_h: f64::INFINITY,
        };
    }
    let e_my = (-y).exp();
    let mut delta = k as f64 * LN_2 + y + y.ln();
    let mut ln_a = y;
    for _ in 0..8 {
        ln_a = y + (-delta * e_my).ln_1p();
        delta = k as f64 * LN_2 + ln_a + ln_a.ln();
    }
    let eps = delta * e_my; // 1 - A/x
    let b = ln_a;
    // A_h = A - ln 2 up to exp(-A)
    let ln2_over_a = if y < 700.0 { LN_2 / (y.exp() * (1.0 - eps)) } else { 0.0 };
    let x_over_a = 1.0 / (1.0 - eps);
    Local {
        x_over_a,
        y_over_b: y / b,
        one_plus_x_over_a: x_over_a * (1.0 + e_my),
        inv_b: 1.0 / b,
        ah_over_a: 1.0 - ln2_over_a,
        bh_over_b: 1.0 + (-ln2_over_a).ln_1p() / b,
        ln_h: if y < 700.0 { y.exp() - delta - LN_2 } else { f64::INFINITY },
    }
}

fn local_at(k: u32, r: Radius) -> Local {
    let y = r.neg_loglog();
    if y < Y_DEEP {
        local_moderate(k, r.neg_log())
    } else {
        local_deep(k, y)
    }
}

/// Which integrand to integrate over a shell.
#[derive(Clone, Copy)]
enum Density {
    /// h_k dt
    Slope,
    /// Phi(h_k(|x|)) dx, without the sphere-area factor
    Energy(usize),
}

fn density_in_w(k: u32, d: Density, l: &Local) -> f64 {
    let base = 0.5f64.powi(k as i32 + 1);
    match d {
        Density::Slope => base * l.x_over_a * l.y_over_b,
        Density::Energy(n) => {
            let nm1 = (n - 1) as i32;
            base.powi(n as i32) * (l.ah_over_a * l.bh_over_b).powi(nm1) * l.x_over_a * l.y_over_b
        }
    }
}

/// Integrand in x at moderate depth: t h dt -> 2^{-k-1}/(A B) dx, or the energy density.
fn density_in_x(k: u32, d: Density, x: f64) -> f64 {
    let sigma = solve_sigma(x - k as f64 * LN_2);
    let (a1, b) = a_minus_one_and_b(sigma);
    let a = 1.0 + a1;
    let th = 0.5f64.powi(k as i32 + 1) / (a * b);
    match d {
        Density::Slope => th,
        Density::Energy(n) => {
            let ln_h = sigma - LN_2;
            let ah = if ln_h < 700.0 { (ln_h - 1.0).exp().ln_1p() + 1.0 } else { ln_h + (1.0 - ln_h).exp().ln_1p() };
            th.powi(n as i32) * (ah * ah.ln()).powi(n as i32 - 1)
        }
    }
}

/// int over radii between `outer` (larger) and `inner` (smaller) of the chosen density.
fn shell_integral(k: u32, d: Density, outer: Radius, inner: Radius, tol: &Tolerance) -> Result<f64> {
    let mut total = 0.0;
    let (x0, x1) = (outer.neg_log(), inner.neg_log());
    if x0 < X_SWITCH {
        let r = integrate_interval(|x| density_in_x(k, d, x), x0, x1.min(X_SWITCH), tol);
        check(&r, "x range")?;
        total += r.value;
    }
    let (y0, y1) = (outer.neg_loglog().max(X_SWITCH.ln()), inner.neg_loglog().min(Y_DEEP));
    if y1 > y0 {
        let r = integrate_interval(|y| y.exp() * density_in_x(k, d, y.exp()), y0, y1, tol);
        check(&r, "log range")?;
        total += r.value;
    }
    let (w0, w1) = (outer.neg_logloglog().max(Y_DEEP.ln()), inner.neg_logloglog());
    if w1 > w0 {
        let r = integrate_interval(|w| density_in_w(k, d, &local_deep(k, w.exp())), w0, w1, tol);
        check(&r, "log-log range")?;
        total += r.value;
    }
    Ok(total)
}

fn check(r: &crate::analyzer::quadrature::QuadResult, what: &str) -> Result<()> {
    if r.converged && r.value.is_finite() {
        Ok(())
    } else {
        Err(Error::Evaluation(format!("bump quadrature did not converge in the {what} (error {:e})", r.error)))
    }
}

/// The sequence a_1 = 1 > a_2 > ... > a_{K+1} and the shell data of u.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpTables {
    pub dimension: usize,
    /// a_1 ..= a_{K+1}; `radii[k - 1]` is a_k.
    pub radii: Vec<Radius>,
    /// Achieved int_{a_{k+1}}^{a_k} h_k for each shell.
    pub shell_integrals: Vec<f64>,
    pub tolerance: Tolerance,
}

impl BumpTables {
    /// Build K shells.  Each a_{k+1} is found by bisection in the level-index
    /// coordinate on int_A^{a_k} h_k = 1.
    pub fn build(n: usize, depth: usize, quad_tol: f64) -> Result<BumpTables> {
        sphere_area(n)?;
        if depth < 2 {
            return Err(invalid("depth", format!("need at least 2 shells, got {depth}")));
        }
        if depth > 40 {
            return Err(invalid("depth", format!("{depth} shells exceed the supported 40")));
        }
        let tol = Tolerance { rel: quad_tol, abs: 1e-300, max_subdivisions: 400 };
        let mut radii = vec![Radius::ONE];
        let mut shell_integrals = Vec::new();
        for k in 1..=depth as u32 {
            let ak = *radii.last().unwrap();
            let s0 = ak.level();
            let mut err = None;
            let mut mass = |s: f64| -> f64 {
                match shell_integral(k, Density::Slope, ak, Radius::from_level(s), &tol) {
                    Ok(v) => v - 1.0,
                    Err(e) => {
                        err = Some(e);
                        f64::NAN
                    }
                }
            };
            let mut s1 = s0 + 0.5;
            while mass(s1) < 0.0 {
                s1 += 0.5;
                if s1 > s0 + 20.0 {
                    break;
                }
            }
            let root = bisect(&mut mass, s0, s1, 1e-15 * s1);
            if let Some(e) = err {
                return Err(e);
            }
            let root = root.ok_or_else(|| Error::Evaluation(format!("no a_{} bracket found", k + 1)))?;
            let next = Radius::from_level(root);
            shell_integrals.push(shell_integral(k, Density::Slope, ak, next, &tol)?);
            radii.push(next);
        }
        Ok(BumpTables { dimension: n, radii, shell_integrals, tolerance: tol })
    }

    pub fn depth(&self) -> usize {
        self.radii.len() - 1
    }

    /// a_k, 1-based.
    pub fn a(&self, k: usize) -> Radius {
        self.radii[k - 1]
    }

    /// Shell k with a_{k+1} <= r <= a_k.
    pub fn shell_of(&self, r: Radius) -> Result<u32> {
        if r > Radius::ONE {
            return Err(invalid("r", "radius above 1"));
        }
        for k in 1..=self.depth() {
            if r >= self.a(k + 1) {
                return Ok(k as u32);
            }
        }
        Err(Error::OutOfDepth(format!(
            "radius lies below a_{} (w = {:.6}); the deepest shell is {}",
            self.depth() + 1,
            self.a(self.depth() + 1).neg_logloglog(),
            self.depth()
        )))
    }

    /// u(r) = k + int_r^{a_k} h_k.
    pub fn u(&self, r: Radius) -> Result<f64> {
        let k = self.shell_of(r)?;
        Ok(k as f64 + shell_integral(k, Density::Slope, self.a(k as usize), r, &self.tolerance)?)
    }

    /// u(r) evaluated with the formula of a specific shell (used at shell seams).
    pub fn u_in_shell(&self, k: u32, r: Radius) -> Result<f64> {
        if k == 0 || k as usize > self.depth() {
            return Err(invalid("k", format!("shell {k} not constructed")));
        }
        Ok(k as f64 + shell_integral(k, Density::Slope, self.a(k as usize), r, &self.tolerance)?)
    }

    /// u(inner) - u(outer) for inner <= outer, integrated shell by shell.
    pub fn u_rise(&self, outer: Radius, inner: Radius) -> Result<f64> {
        let (k0, k1) = (self.shell_of(outer)?, self.shell_of(inner)?);
        let mut total = 0.0;
        for k in k0..=k1 {
            let hi = if k == k0 { outer } else { self.a(k as usize) };
            let lo = if k == k1 { inner } else { self.a(k as usize + 1) };
            total += shell_integral(k, Density::Slope, hi, lo, &self.tolerance)?;
        }
        Ok(total)
    }

    /// Orlicz energy of u on the annulus inner <= |x| <= outer.
    pub fn energy_between(&self, outer: Radius, inner: Radius) -> Result<f64> {
        let area = sphere_area(self.dimension)?;
        let (k0, k1) = (self.shell_of(outer)?, self.shell_of(inner)?);
        let mut total = 0.0;
        for k in k0..=k1 {
            let hi = if k == k0 { outer } else { self.a(k as usize) };
            let lo = if k == k1 { inner } else { self.a(k as usize + 1) };
            total += shell_integral(k, Density::Energy(self.dimension), hi, lo, &self.tolerance)?;
        }
        Ok(area * total)
    }

    /// |u'(r)| = h_k(r) for an ordinary radius.
    pub fn slope(&self, r: Radius) -> Result<f64> {
        let k = self.shell_of(r)?;
        let l = local_at(k, r);
        Ok(l.ln_h.exp())
    }

    /// ln h_k(r); finite or +inf for deep radii.
    pub fn ln_slope(&self, r: Radius) -> Result<f64> {
        let k = self.shell_of(r)?;
        Ok(local_at(k, r).ln_h)
    }

    /// r |u'(r)| (1 - ln r) = 2^{-k-1} (1 + x) / (A B): the slope in units of 1/(r(1 - ln r)).
    pub fn scaled_slope(&self, r: Radius) -> Result<f64> {
        let k = self.shell_of(r)?;
        let l = local_at(k, r);
        Ok(0.5f64.powi(k as i32 + 1) * l.one_plus_x_over_a * l.inv_b)
    }

    /// r |u'(r)| (1 - ln r) ln|ln r|; at most 1 is the gradient bound.
    pub fn gradient_bound_margin(&self, r: Radius) -> Result<f64> {
        let k = self.shell_of(r)?;
        let l = local_at(k, r);
        let y = r.neg_loglog();
        if y <= 0.0 {
            return Err(invalid("r", "the gradient bound needs r < 1/e"));
        }
        let ratio_y = if y.is_finite() { y * l.inv_b } else { 1.0 };
        Ok(0.5f64.powi(k as i32 + 1) * l.one_plus_x_over_a * ratio_y)
    }

    /// Orlicz energy of u on each shell: |S^{n-1}| int Phi(h_k(r)) r^{n-1} dr.
    pub fn orlicz_energy(&self) -> Result<Vec<ShellEnergy>> {
        let area = sphere_area(self.dimension)?;
        (1..=self.depth() as u32)
            .map(|k| {
                let e = shell_integral(
                    k,
                    Density::Energy(self.dimension),
                    self.a(k as usize),
                    self.a(k as usize + 1),
                    &self.tolerance,
                )?;
                Ok(ShellEnergy {
                    shell: k,
                    energy: area * e,
                    bound: area * 2f64.powf(k as f64 * (1.0 - self.dimension as f64)),
                })
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellEnergy {
    pub shell: u32,
    pub energy: f64,
    pub bound: f64,
}

/// Left side of the ratio test for h_k(t) <= 1/(t(1 - ln t) ln|ln t|):
/// (1 + x) y / (A(q) B(q)) with q = 2 / (t (1 + x) y).  The bound holds at t
/// whenever this is at most 2^{k+1}.
pub fn gradient_ratio_test(r: Radius) -> f64 {
    let y = r.neg_loglog();
    if !(y > 0.0) {
        return f64::NAN;
    }
    if !y.is_finite() {
        return 1.0;
    }
    let x = r.neg_log();
    if x < 1e15 {
        let ln_q = LN_2 + x - x.ln_1p() - y.ln();
        let a = if ln_q < 700.0 { (1f64.exp() + ln_q.exp()).ln() } else { ln_q + (1.0 - ln_q).exp().ln_1p() };
        (1.0 + x) * y / (a * a.ln())
    } else {
        let e_my = (-y).exp();
        let eps = (y + y.ln() - LN_2) * e_my;
        let b = y + (-eps).ln_1p();
        (1.0 + e_my) / (1.0 - eps) * (y / b)
    }
}

/// Largest r0 in (0, 1/e) such that the ratio test is at most `limit` at every
/// sampled radius below r0 (4000 level-index samples down to w = 60).  `None`
/// when the test fails arbitrarily close to 0.
pub fn ratio_test_threshold(limit: f64) -> Option<Radius> {
    // The test decreases to 1 from above, but rounds to 1.0 deep down.
    if limit <= 1.0 {
        return None;
    }
    let top = Radius::from_neg_log(1.0 + 1e-9).level();
    let bottom = Radius::from_neg_logloglog(60.0).level();
    let m = 4000;
    let at = |i: usize| Radius::from_level(top + (bottom - top) * i as f64 / m as f64);
    for i in (0..=m).rev() {
        if gradient_ratio_test(at(i)) > limit {
            return if i == m { None } else { Some(at(i + 1)) };
        }
    }
    Some(at(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_and_bisection_agree() {
        for &(k, t) in &[(1u32, 0.5), (1, 1e-4), (3, 1e-9), (2, 1.0), (1, 50.0)] {
            let h = h_k(k, t).unwrap().value;
            let s = solve_sigma(-t.ln() - k as f64 * LN_2);
            assert!((0.5 * s.exp() - h).abs() <= 1e-11 * h, "k={k} t={t}");
        }
    }

    #[test]
    fn h_identity_t_h() {
        // t h_k(t) = 2^{-k-1} / (A B)
        let (k, t) = (2u32, 0.013);
        let h = h_k(k, t).unwrap().value;
        let a = (1f64.exp() + 2.0 * h).ln();
        assert!((t * h - 0.125 / (a * a.ln())).abs() < 1e-12 * t * h);
    }

    #[test]
    fn h_shift_relation() {
        // h_k(t) = h_1(2^{k-1} t)
        let t = 3e-3;
        let a = h_k(4, t).unwrap().value;
        let b = h_k(1, 8.0 * t).unwrap().value;
        assert!((a - b).abs() < 1e-11 * a);
    }

    #[test]
    fn deep_local_matches_moderate() {
        // both branches at y = 30 (x ~ 1e13)
        let y: f64 = 30.0;
        let m = local_moderate(3, y.exp());
        let d = local_deep(3, y);
        assert!((m.x_over_a - d.x_over_a).abs() < 1e-12);
        assert!((m.y_over_b - d.y_over_b).abs() < 1e-12);
        assert!((m.ah_over_a - d.ah_over_a).abs() < 1e-12);
    }

    #[test]
    fn ratio_test_tends_to_one_from_above() {
        let v = gradient_ratio_test(Radius::from_neg_log(1000.0));
        assert!((v - 1.0104).abs() < 1e-3, "{v}");
        assert!(gradient_ratio_test(Radius::from_neg_log(1e10)) > 1.0);
        assert!(gradient_ratio_test(Radius::from_neg_logloglog(30.0)) >= 1.0);
    }

    #[test]
    fn exact_ratio_test_holds_up_to_one_over_e() {
        let r = ratio_test_threshold(4.0).unwrap();
        assert!((r.neg_log() - 1.0).abs() < 1e-6);
        assert!(ratio_test_threshold(1.0).is_none());
        let k2 = ratio_test_threshold(2.0).unwrap();
        assert!(k2.neg_log() > 5.0 && k2.neg_log() < 20.0, "{}", k2.neg_log());
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(h_k(1, 0.0).is_err());
        assert!(h_k(0, 0.5).is_err());
        assert!(BumpTables::build(2, 1, 1e-12).is_err());
    }
}
