//! The (F, G) pair that maps the segment [-1,1] x {0} onto the square [-1,1]^2.
//!
//! F stretches a recursive family of balls centred on the segment; G climbs from
//! the centre of a dyadic square to the centres of its children inside thin
//! annuli, driven by the bump u.  Almost every radius below R_0 underflows, so
//! radii are [`Radius`] values and deep points are addressed through their
//! ball path (see [`LusinPoint`]).

mod evidence;
mod point;

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bump::BumpTables;
use crate::error::{invalid, Error, Result};
use crate::levelindex::Radius;
use crate::roots::bisect;

pub use evidence::{
    level_exp_integral, lusin_evidence, DistortionEvidence, EvidenceSpec, LevelIntegral, LevelStep, LusinEvidence,
};
pub use point::{LusinPoint, NormalizedJacobian, Tail};

/// Child centres on the horizontal diameter, in units of the parent inner radius.
/// Left to right they carry the square children NW, SW, NE, SE.
pub const CHILD_OFFSETS: [f64; 4] = [-0.75, -0.25, 0.25, 0.75];

/// Quadrant signs of the square children NW, SW, NE, SE.
const SQUARE_SIGNS: [(f64, f64); 4] = [(-1.0, 1.0), (-1.0, -1.0), (1.0, 1.0), (1.0, -1.0)];

/// Deepest supported hierarchy.
pub const MAX_DEPTH: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LusinParams {
    /// Targeted exponential-integrability exponent, in (0, 2).
    pub lambda: f64,
    /// Distortion slack, in (0, 1].
    pub epsilon: f64,
    /// Number of levels N.
    pub depth: usize,
}

impl Default for LusinParams {
    fn default() -> Self {
        LusinParams { lambda: 1.0, epsilon: 0.25, depth: 5 }
    }
}

/// Radii and factors shared by the 4^{n+1} balls of one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub n: usize,
    pub count: usize,
    /// R_n
    pub outer: Radius,
    /// R'_n
    pub prime: Radius,
    /// r_n
    pub inner: Radius,
    /// log of the integrability cap on R_n.
    pub ln_cap: f64,
    /// log(R_n / r_{n-1}), with r_{-1} = 1.
    pub ln_child_fraction: f64,
    /// log(R'_n / r_{n-1}); -inf when the gap is below f64 resolution.
    pub ln_prime_fraction: f64,
    /// log a_n
    pub ln_a: f64,
    /// log of the inner scaling R_n(1 - log R_n) / (r_n(1 - log r_n)) measured in units r_n -> r_{n-1}.
    pub ln_kappa: f64,
    /// |w_{i,n} - w_{j,n-1}|: the rise of u between R'_n and r_n.
    pub step: f64,
    /// Distance from a level-n square centre to a child centre.
    pub d: f64,
    pub u_prime: f64,
    pub u_inner: f64,
}

impl Level {
    /// 1 / log|log R'_n| against eps sqrt(a_n).
    pub fn prime_margin(&self, epsilon: f64) -> f64 {
        1.0 / self.prime.neg_loglog() / (epsilon * (0.5 * self.ln_a).exp())
    }
}

/// Which map of the construction a catalog entry exposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LusinPart {
    F,
    G,
    Curve,
}

impl LusinPart {
    pub fn catalog_id(self) -> &'static str {
        match self {
            LusinPart::F => "lusin_F",
            LusinPart::G => "lusin_G",
            LusinPart::Curve => "lusin_curve",
        }
    }

    pub fn ambient_dim(self) -> usize {
        match self {
            LusinPart::Curve => 4,
            _ => 2,
        }
    }
}

/// A built hierarchy of balls and squares together with the bump driving G.
#[derive(Clone, Debug)]
pub struct LusinConstruction {
    pub params: LusinParams,
    pub levels: Vec<Level>,
    pub bump: Arc<BumpTables>,
}

impl LusinConstruction {
    pub fn build(params: LusinParams, bump: Arc<BumpTables>) -> Result<LusinConstruction> {
        let LusinParams { lambda, epsilon, depth } = params;
        if !(lambda > 0.0 && lambda < 2.0) {
            return Err(invalid("lambda", format!("must lie in (0, 2), got {lambda}")));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(invalid("epsilon", format!("must lie in (0, 1], got {epsilon}")));
        }
        if depth == 0 || depth > MAX_DEPTH {
            return Err(invalid("depth", format!("must lie in 1..={MAX_DEPTH}, got {depth}")));
        }
        if bump.dimension != 2 {
            return Err(invalid("bump.dimension", "the construction lives in the plane"));
        }
        let mut levels: Vec<Level> = Vec::with_capacity(depth);
        for n in 0..depth {
            let parent_inner = levels.last().map_or(Radius::ONE, |l| l.inner);
            let ln_cap = ((2.0 - lambda).ln() - (2.0 * PI).ln() - lambda - n as f64 * 8f64.ln()) / (2.0 - lambda);
            let cap = Radius::from_neg_log((-ln_cap).max(0.0));
            let eighth = parent_inner.scaled(0.125);
            let (outer, ln_child_fraction) = if cap < eighth {
                (cap, cap.log_ratio(parent_inner))
            } else {
                (eighth, -(8f64.ln()))
            };
            let ln_a = match levels.last() {
                None => 2.0 * (-outer.neg_log() + outer.ln_one_plus_neg_log()),
                Some(p) => {
                    p.ln_a
                        + 2.0 * ln_child_fraction
                        + 2.0 * (outer.ln_one_plus_neg_log() - p.inner.ln_one_plus_neg_log())
                }
            };
            let (prime, ln_prime_fraction) = prime_radius(outer, ln_child_fraction, ln_a, epsilon, n)?;
            let step = SQRT_2 * 0.5f64.powi(n as i32 + 1);
            let (inner, rise) = inner_radius(&bump, prime, step, n)?;
            let u_prime = bump.u(prime)?;
            let ln_kappa = ln_child_fraction + outer.ln_one_plus_neg_log() - inner.ln_one_plus_neg_log();
            levels.push(Level {
                n,
                count: 4usize.pow(n as u32 + 1),
                outer,
                prime,
                inner,
                ln_cap,
                ln_child_fraction,
                ln_prime_fraction,
                ln_a,
                ln_kappa,
                step,
                d: SQRT_2 * 0.5f64.powi(n as i32 + 2),
                u_prime,
                u_inner: u_prime + rise,
            });
        }
        Ok(LusinConstruction { params, levels, bump })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, n: usize) -> &Level {
        &self.levels[n]
    }

    /// x-coordinates of the level-0 centres.
    pub fn level0_centers(&self) -> Vec<f64> {
        CHILD_OFFSETS.to_vec()
    }

    /// Centre w of the dyadic square addressed by `path` (origin for the empty path).
    pub fn square_center(path: &[u8]) -> [f64; 2] {
        let mut w = [0.0, 0.0];
        for (k, &c) in path.iter().enumerate() {
            let (sx, sy) = SQUARE_SIGNS[c as usize];
            let h = 0.5f64.powi(k as i32 + 1);
            w[0] += h * sx;
            w[1] += h * sy;
        }
        w
    }

    /// Index i = 1..=4^{n+1} of a ball (or square) within its level, left to right.
    pub fn index_of(path: &[u8]) -> usize {
        path.iter().fold(0usize, |i, &c| 4 * i + c as usize) + 1
    }

    /// Path of ball i (1-based) at level n.
    pub fn path_of(n: usize, i: usize) -> Vec<u8> {
        let mut rest = i - 1;
        let mut path = vec![0u8; n + 1];
        for slot in path.iter_mut().rev() {
            *slot = (rest % 4) as u8;
            rest /= 4;
        }
        path
    }

    /// All paths of one level, left to right.
    pub fn paths(n: usize) -> impl Iterator<Item = Vec<u8>> {
        (1..=4usize.pow(n as u32 + 1)).map(move |i| LusinConstruction::path_of(n, i))
    }

    /// Partial sum of the exponential integral bound: sum_n 2 pi 4^{n+1} e^lambda R_n^{2-lambda} / (2 - lambda).
    pub fn exp_integral_bound(&self) -> f64 {
        let lambda = self.params.lambda;
        self.levels
            .iter()
            .map(|l| {
                let ln = (2.0 * PI * l.count as f64).ln() + lambda - (2.0 - lambda).ln()
                    - (2.0 - lambda) * l.outer.neg_log();
                ln.exp()
            })
            .sum()
    }
}

/// R' < R with 1/log|log R'| <= eps sqrt(a), and log(R' / r_{n-1}).  When R
/// itself satisfies the bound, R' = R/2.
fn prime_radius(outer: Radius, ln_child_fraction: f64, ln_a: f64, epsilon: f64, n: usize) -> Result<(Radius, f64)> {
    let bound = epsilon * (0.5 * ln_a).exp();
    let y = 1.0 / bound;
    if !(bound > 0.0) || !y.is_finite() {
        return Err(Error::Infeasible(format!(
            "level {n}: eps = {epsilon:e} with log a_n = {ln_a} leaves no representable radius R' \
             with 1/log|log R'| <= eps sqrt(a_n)"
        )));
    }
    let target = Radius::from_neg_loglog(y);
    let half = outer.scaled(0.5);
    if target < half {
        let gap = target.log_ratio(outer);
        Ok((target, if gap.is_finite() { ln_child_fraction + gap } else { f64::NEG_INFINITY }))
    } else {
        Ok((half, ln_child_fraction - 2f64.ln()))
    }
}

/// r below R' with u(r) - u(R') = step, by bisection in the level-index coordinate.
fn inner_radius(bump: &BumpTables, prime: Radius, step: f64, n: usize) -> Result<(Radius, f64)> {
    let s0 = prime.level();
    let bottom = bump.a(bump.depth() + 1);
    let s1 = bottom.level();
    let full = bump.u_rise(prime, bottom)?;
    if full < step {
        return Err(Error::OutOfDepth(format!(
            "level {n}: u rises only {full:.3} below R'_{n} within {} shells, need {step:.6}",
            bump.depth()
        )));
    }
    let mut err = None;
    let f = |s: f64| match bump.u_rise(prime, Radius::from_level(s)) {
        Ok(v) => v - step,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    };
    let s = bisect(f, s0, s1, 1e-15 * s1);
    if let Some(e) = err {
        return Err(e);
    }
    let s = s.ok_or_else(|| Error::Evaluation(format!("level {n}: no bracket for r_{n}")))?;
    let inner = Radius::from_level(s);
    let rise = bump.u_rise(prime, inner)?;
    if (rise - step).abs() > 1e-8 {
        return Err(Error::Evaluation(format!("level {n}: u rise {rise} misses {step} by more than 1e-8")));
    }
    Ok((inner, rise))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    pub(crate) fn shared() -> &'static LusinConstruction {
        static C: OnceLock<LusinConstruction> = OnceLock::new();
        C.get_or_init(|| {
            let bump = Arc::new(BumpTables::build(2, 12, 1e-12).unwrap());
            LusinConstruction::build(LusinParams::default(), bump).unwrap()
        })
    }

    #[test]
    fn first_cap_for_lambda_one() {
        let c = shared();
        let l0 = c.level(0);
        assert!((l0.ln_cap.exp() - 1.0 / (2.0 * PI * 1f64.exp())).abs() < 1e-15);
        assert!((l0.outer.value() - 0.058_549_831_524_319_16).abs() < 1e-14);
        assert!((l0.d - SQRT_2 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn radii_are_ordered_and_nested() {
        let c = shared();
        for l in &c.levels {
            assert!(l.inner < l.prime && l.prime <= l.outer, "level {}", l.n);
            assert!(l.ln_prime_fraction < l.ln_child_fraction);
            assert!(l.outer.neg_log() >= -l.ln_cap - 1e-12);
            assert!(l.ln_child_fraction <= -(8f64.ln()) + 1e-12);
            assert!(l.prime_margin(0.25) <= 1.0 + 1e-12, "level {}", l.n);
            assert!((l.u_inner - l.u_prime - l.step).abs() <= 1e-8);
        }
        for w in c.levels.windows(2) {
            assert!(w[1].outer <= w[0].inner);
        }
    }

    #[test]
    fn ball_counts_and_paths() {
        assert_eq!(LusinConstruction::paths(2).count(), 64);
        for (n, i) in [(0usize, 3usize), (2, 17), (3, 256)] {
            assert_eq!(LusinConstruction::index_of(&LusinConstruction::path_of(n, i)), i);
        }
        assert_eq!(shared().levels.iter().map(|l| l.count).collect::<Vec<_>>(), vec![4, 16, 64, 256, 1024]);
    }

    #[test]
    fn square_centres() {
        assert_eq!(LusinConstruction::square_center(&[0]), [-0.5, 0.5]);
        assert_eq!(LusinConstruction::square_center(&[3, 0]), [0.25, -0.25]);
        // child of the NW quarter sits a quarter-side diagonal away
        let (a, b) = (LusinConstruction::square_center(&[0]), LusinConstruction::square_center(&[0, 2]));
        assert!(((a[0] - b[0]).hypot(a[1] - b[1]) - SQRT_2 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        let bump = shared().bump.clone();
        for (lambda, epsilon, depth, key) in [(2.5, 0.25, 3, "lambda"), (1.0, 0.0, 3, "epsilon"), (1.0, 0.5, 0, "depth")] {
            match LusinConstruction::build(LusinParams { lambda, epsilon, depth }, bump.clone()) {
                Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, key),
                other => panic!("{other:?}"),
            }
        }
    }
}
