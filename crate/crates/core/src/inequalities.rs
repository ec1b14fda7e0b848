//! Sampled checks of the elementary inequalities behind the integrability proofs.
//!
//! All comparisons are made between logarithms, so exp(b y) with y up to 1e6 is fine.

use std::f64::consts::E;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::log_add_exp;

/// Factor applied to numerically derived suprema.
pub const SAFETY: f64 = 1.05;

/// Relative slack for rounding when comparing the two sides.
const ROUNDING: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Read off the proof.
    Formula,
    /// Supremum found numerically, times [`SAFETY`].
    NumericalSup,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constant {
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    /// (n, a, b) for the two-variable lemmas, (kappa) for the product inequality.
    pub params: Vec<f64>,
    pub constants: Vec<Constant>,
    pub samples: usize,
    pub violations: usize,
    /// max LHS / RHS over the samples.
    pub max_ratio: f64,
    /// Sample attaining `max_ratio`.
    pub worst: [f64; 2],
    /// First violating sample, if any.
    pub witness: Option<[f64; 2]>,
}

fn check_params(n: usize, a: f64, b: f64) -> Result<()> {
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    if !(a > -1.0) || !a.is_finite() {
        return Err(invalid("a", format!("need a > -1, got {a}")));
    }
    if !(b > 0.0) || !b.is_finite() {
        return Err(invalid("b", format!("need b > 0, got {b}")));
    }
    Ok(())
}

/// ln ln(e + exp(l)), for the log of log(e + t) given l = ln t.
fn ln_log_e_plus(l: f64) -> f64 {
    let v = if l > 30.0 { l + (E * (-l).exp()).ln_1p() } else { (E + l.exp()).ln() };
    v.ln()
}

/// Log of x y log^a(e + (x y)^{1/n}).
fn ln_lhs_e(n: usize, a: f64, lx: f64, ly: f64) -> f64 {
    lx + ly + a * ln_log_e_plus((lx + ly) / n as f64)
}

pub fn lemma25_c1(n: usize, a: f64, b: f64) -> f64 {
    ((b + 2.0) / b).powf(a.max(0.0)) * 2.0 * n as f64
}

/// sup over y >= 1 of y log^a(e + (y e^{by/2})^{1/n}) e^{-by/2}: the second-branch
/// ratio LHS / e^{by} at its largest x.
fn lemma25_branch_sup(n: usize, a: f64, b: f64) -> f64 {
    let g = |y: f64| y.ln() - 0.5 * b * y + a * ln_log_e_plus((y.ln() + 0.5 * b * y) / n as f64);
    sup_1d(g, 1.0, (2000.0 / b).max(10.0)).exp()
}

/// Lemma 2.5 with the proof's C_1 and a numerical C_2.
pub fn lemma25_constants(n: usize, a: f64, b: f64) -> Result<(Constant, Constant)> {
    check_params(n, a, b)?;
    Ok((
        Constant { value: lemma25_c1(n, a, b), provenance: Provenance::Formula },
        Constant { value: SAFETY * lemma25_branch_sup(n, a, b), provenance: Provenance::NumericalSup },
    ))
}

/// Both sides of x y log^a(e + (xy)^{1/n}) <= (C1/b) x log^{a+1}(e + x^{1/n}) + C2 e^{by}, as logs.
pub fn lemma25_sides(n: usize, a: f64, b: f64, c1: f64, c2: f64, x: f64, y: f64) -> (f64, f64) {
    let (lx, ly) = (x.ln(), y.ln());
    let first = (c1 / b).ln() + lx + (a + 1.0) * ln_log_e_plus(lx / n as f64);
    (ln_lhs_e(n, a, lx, ly), log_add_exp(first, c2.ln() + b * y))
}

/// C(n) inside the logarithm of Lemma 2.4.
pub fn lemma24_c(n: usize) -> f64 {
    2.0 * n as f64
}

/// Log of the first right-hand term (C/b) x log^{a+1}(x^{1/n}); -inf at x = 1.
fn lemma24_first(n: usize, a: f64, b: f64, lx: f64) -> f64 {
    (lemma24_c(n) / b).ln() + lx + (a + 1.0) * (lx / n as f64).ln()
}

fn lemma24_lhs(n: usize, a: f64, lx: f64, ly: f64) -> f64 {
    lx + ly + a * (lemma24_c(n).ln() + (lx + ly) / n as f64).ln()
}

/// sup over x, y >= 1 of (LHS - first term)_+ / e^{by}.
fn lemma24_sup(n: usize, a: f64, b: f64) -> f64 {
    let excess = |lx: f64, y: f64| -> f64 {
        let lhs = lemma24_lhs(n, a, lx, y.ln());
        let first = lemma24_first(n, a, b, lx);
        if lhs <= first {
            return f64::NEG_INFINITY;
        }
        lhs + (-(first - lhs).exp()).ln_1p() - b * y
    };
    let y_hi = (2000.0 / b).max(10.0);
    let best_for = |y: f64| sup_1d(|lx| excess(lx, y), 0.0, 0.75 * b * y + 60.0);
    sup_1d(best_for, 1.0, y_hi).exp()
}

pub fn lemma24_constants(n: usize, a: f64, b: f64) -> Result<(Constant, Constant)> {
    check_params(n, a, b)?;
    Ok((
        Constant { value: lemma24_c(n), provenance: Provenance::Formula },
        Constant { value: SAFETY * lemma24_sup(n, a, b), provenance: Provenance::NumericalSup },
    ))
}

/// Both sides of x y log^a(C (xy)^{1/n}) <= (C/b) x log^{a+1}(x^{1/n}) + C' e^{by}, as logs.
pub fn lemma24_sides(n: usize, a: f64, b: f64, c2: f64, x: f64, y: f64) -> (f64, f64) {
    let (lx, ly) = (x.ln(), y.ln());
    let first = if lx > 0.0 { lemma24_first(n, a, b, lx) } else { f64::NEG_INFINITY };
    (lemma24_lhs(n, a, lx, ly), log_add_exp(first, c2.ln() + b * y))
}

/// Both sides of a b <= exp(kappa a) + (2b/kappa) log(e + b/kappa), as logs.
pub fn product_sides(kappa: f64, a: f64, b: f64) -> (f64, f64) {
    let lhs = a.ln() + b.ln();
    let second = if b > 0.0 { (2.0 * b / kappa).ln() + ln_log_e_plus((b / kappa).ln()) } else { f64::NEG_INFINITY };
    (lhs, log_add_exp(kappa * a, second))
}

/// Maximum of g on [lo, hi]: a 2000-point log grid, then golden-section refinement.
fn sup_1d(g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let m = 2000;
    let (llo, lhi) = ((1.0 + lo).ln(), (1.0 + hi).ln());
    let at = |i: usize| (llo + (lhi - llo) * i as f64 / m as f64).exp() - 1.0;
    let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
    for i in 0..=m {
        let v = g(at(i));
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let (mut a, mut b) = (at(best_i.saturating_sub(1)), at((best_i + 1).min(m)));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        let (gc, gd) = (g(c), g(d));
        best = best.max(gc).max(gd);
        if gc >= gd {
            b = d;
        } else {
            a = c;
        }
    }
    best
}

/// Log-uniform on [lo, hi].
fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..=hi.ln()).exp().clamp(lo, hi)
}

struct Tally {
    violations: usize,
    max_ratio: f64,
    worst: [f64; 2],
    witness: Option<[f64; 2]>,
}

impl Tally {
    fn new() -> Tally {
        Tally { violations: 0, max_ratio: 0.0, worst: [f64::NAN; 2], witness: None }
    }

    fn add(&mut self, (lhs, rhs): (f64, f64), p: [f64; 2]) {
        let ratio = (lhs - rhs).exp();
        if !(ratio <= 1.0 + ROUNDING) {
            self.violations += 1;
            self.witness.get_or_insert(p);
        }
        if ratio > self.max_ratio || ratio.is_nan() {
            self.max_ratio = ratio;
            self.worst = p;
        }
    }
}

/// Samples x, y in [1, 1e6], half uniform and half log-uniform.
fn xy_samples(samples: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|i| {
            if i % 2 == 0 {
                [rng.random_range(1.0..=1e6), rng.random_range(1.0..=1e6)]
            } else {
                [log_uniform(&mut rng, 1.0, 1e6), log_uniform(&mut rng, 1.0, 1e6)]
            }
        })
        .collect()
}

pub fn check_lemma25(n: usize, a: f64, b: f64, samples: usize, seed: u64) -> Result<InequalityReport> {
    let (c1, c2) = lemma25_constants(n, a, b)?;
    let mut t = Tally::new();
    for p in xy_samples(samples, seed) {
        t.add(lemma25_sides(n, a, b, c1.value, c2.value, p[0], p[1]), p);
    }
    Ok(report("lemma-2.5", vec![n as f64, a, b], vec![c1, c2], samples, t))
}

pub fn check_lemma24(n: usize, a: f64, b: f64, samples: usize, seed: u64) -> Result<InequalityReport> {
    let (c, c2) = lemma24_constants(n, a, b)?;
    let mut t = Tally::new();
    for p in xy_samples(samples, seed) {
        t.add(lemma24_sides(n, a, b, c2.value, p[0], p[1]), p);
    }
    Ok(report("lemma-2.4", vec![n as f64, a, b], vec![c, c2], samples, t))
}

/// a in [1, 50]; b in [0, 1e6] (one in a hundred exactly 0, the rest log-uniform from 1e-3).
pub fn check_product_inequality(kappa: f64, samples: usize, seed: u64) -> Result<InequalityReport> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(invalid("kappa", format!("need kappa > 0, got {kappa}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new();
    for i in 0..samples {
        let a = rng.random_range(1.0..=50.0);
        let b = match i % 100 {
            0 => 0.0,
            k if k % 2 == 0 => rng.random_range(0.0..=1e6),
            _ => log_uniform(&mut rng, 1e-3, 1e6),
        };
        t.add(product_sides(kappa, a, b), [a, b]);
    }
    Ok(report("thm-1.4-product", vec![kappa], vec![], samples, t))
}

fn report(name: &str, params: Vec<f64>, constants: Vec<Constant>, samples: usize, t: Tally) -> InequalityReport {
    InequalityReport {
        name: name.into(),
        params,
        constants,
        samples,
        violations: t.violations,
        max_ratio: t.max_ratio,
        worst: t.worst,
        witness: t.witness,
    }
}

/// Parameter grid used by the default sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalityGrid {
    pub n: Vec<usize>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub kappa: Vec<f64>,
    pub samples: usize,
}

impl Default for InequalityGrid {
    fn default() -> Self {
        InequalityGrid {
            n: vec![1, 2, 3],
            a: vec![-0.5, 0.0, 1.0, 2.5],
            b: vec![0.5, 1.0, 2.0],
            kappa: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            samples: 100_000,
        }
    }
}

/// Every inequality at every grid point.
pub fn sweep(grid: &InequalityGrid, seed: u64) -> Result<Vec<InequalityReport>> {
    let mut jobs = Vec::new();
    for &n in &grid.n {
        for &a in &grid.a {
            for &b in &grid.b {
                jobs.push((0u8, n, a, b));
                jobs.push((1u8, n, a, b));
            }
        }
    }
    for &k in &grid.kappa {
        jobs.push((2u8, 0, k, 0.0));
    }
    crate::par::map_range(jobs.len(), |i| {
        let (kind, n, a, b) = jobs[i];
        let s = seed.wrapping_add(i as u64);
        match kind {
            0 => check_lemma24(n, a, b, grid.samples, s),
            1 => check_lemma25(n, a, b, grid.samples, s),
            _ => check_product_inequality(a, grid.samples, s),
        }
    })
    .into_iter()
    .collect()
}
