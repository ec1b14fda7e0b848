//! Adaptive Gauss-Kronrod (7/15) quadrature on intervals and boxes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::linalg::stable_sum;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
/// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// 15 nodes on [-1, 1] with Kronrod and (embedded) Gauss weights.
fn rule() -> ([f64; 15], [f64; 15], [f64; 15]) {
    let mut x = [0.0; 15];
    let mut wk = [0.0; 15];
    let mut wg = [0.0; 15];
    for i in 0..7 {
        x[i] = -XGK[i];
        x[14 - i] = XGK[i];
        wk[i] = WGK[i];
        wk[14 - i] = WGK[i];
        if i % 2 == 1 {
            wg[i] = WG[i / 2];
            wg[14 - i] = WG[i / 2];
        }
    }
    x[7] = 0.0;
    wk[7] = WGK[7];
    wg[7] = WG[3];
    (x, wk, wg)
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: 1e-10, abs: 1e-300, max_subdivisions: 2000 }
    }
}

struct Piece {
    lo: Vec<f64>,
    hi: Vec<f64>,
    value: f64,
    error: f64,
    axis_errors: Vec<f64>,
    id: usize,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error && self.id == o.id
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error).then(o.id.cmp(&self.id))
    }
}

/// Tensor Kronrod value, Gauss error estimate and per-axis error estimates on a box.
fn tensor_rule(f: &mut dyn FnMut(&[f64]) -> f64, lo: &[f64], hi: &[f64]) -> (f64, f64, Vec<f64>) {
    let d = lo.len();
    let (x, wk, wg) = rule();
    let half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (b - a)).collect();
    let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let jac: f64 = half.iter().product();
    let total = 15usize.pow(d as u32);
    let mut kk = 0.0;
    let mut gg = 0.0;
    let mut axis_g = vec![0.0; d];
    let mut p = vec![0.0; d];
    let mut idx = vec![0usize; d];
    for flat in 0..total {
        let mut t = flat;
        for k in 0..d {
            idx[k] = t % 15;
            t /= 15;
            p[k] = mid[k] + half[k] * x[idx[k]];
        }
        let v = f(&p);
        let wkk: f64 = idx.iter().map(|&i| wk[i]).product();
        kk += wkk * v;
        let wgg: f64 = idx.iter().map(|&i| wg[i]).product();
        gg += wgg * v;
        for k in 0..d {
            let w: f64 = (0..d).map(|j| if j == k { wg[idx[j]] } else { wk[idx[j]] }).product();
            axis_g[k] += w * v;
        }
    }
    let value = kk * jac;
    let error = ((kk - gg) * jac).abs();
    let axis_errors = axis_g.iter().map(|g| ((kk - g) * jac).abs()).collect();
    (value, error, axis_errors)
}

/// Globally adaptive cubature over the box [lo, hi] (dimension 1 to 3).
pub fn integrate_box(mut f: impl FnMut(&[f64]) -> f64, lo: &[f64], hi: &[f64], tol: &Tolerance) -> QuadResult {
    assert!(!lo.is_empty() && lo.len() <= 3 && lo.len() == hi.len(), "boxes of dimension 1 to 3 only");
    let per_box = 15usize.pow(lo.len() as u32);
    let mut next_id = 0;
    let mut make = |f: &mut dyn FnMut(&[f64]) -> f64, lo: Vec<f64>, hi: Vec<f64>| {
        let (value, error, axis_errors) = tensor_rule(f, &lo, &hi);
        next_id += 1;
        Piece { lo, hi, value, error, axis_errors, id: next_id }
    };
    let mut heap = BinaryHeap::new();
    heap.push(make(&mut f, lo.to_vec(), hi.to_vec()));
    let mut evaluations = per_box;
    let mut subdivisions = 0;
    loop {
        let total_err: f64 = heap.iter().map(|p| p.error).sum();
        let total: f64 = heap.iter().map(|p| p.value).sum();
        let target = tol.abs.max(tol.rel * total.abs());
        let finite = total.is_finite() && total_err.is_finite();
        if (total_err <= target && finite) || subdivisions >= tol.max_subdivisions || !finite {
            let mut pieces: Vec<Piece> = heap.into_vec();
            pieces.sort_by_key(|p| p.id);
            let value = stable_sum(pieces.iter().map(|p| p.value));
            return QuadResult {
                value,
                error: total_err,
                converged: finite && total_err <= target,
                evaluations,
            };
        }
        let worst = heap.pop().unwrap();
        let axis = (0..worst.lo.len())
            .max_by(|&a, &b| {
                let wa = worst.axis_errors[a] + 1e-300 * (worst.hi[a] - worst.lo[a]);
                let wb = worst.axis_errors[b] + 1e-300 * (worst.hi[b] - worst.lo[b]);
                wa.total_cmp(&wb)
            })
            .unwrap();
        let cut = 0.5 * (worst.lo[axis] + worst.hi[axis]);
        let mut hi1 = worst.hi.clone();
        hi1[axis] = cut;
        let mut lo2 = worst.lo.clone();
        lo2[axis] = cut;
        heap.push(make(&mut f, worst.lo.clone(), hi1));
        heap.push(make(&mut f, lo2, worst.hi.clone()));
        evaluations += 2 * per_box;
        subdivisions += 1;
    }
}

/// Adaptive integral of f over [a, b].
pub fn integrate_interval(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: &Tolerance) -> QuadResult {
    if a == b {
        return QuadResult { value: 0.0, error: 0.0, converged: true, evaluations: 0 };
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut r = integrate_box(|p| f(p[0]), &[lo], &[hi], tol);
    r.value *= sign;
    r
}

/// Adaptive integral of f over [a, inf), through x = a + (1 - t)/t.
pub fn integrate_to_infinity(mut f: impl FnMut(f64) -> f64, a: f64, tol: &Tolerance) -> QuadResult {
    integrate_box(
        |p| {
            let t = p[0];
            if t <= 0.0 {
                return 0.0;
            }
            let x = a + (1.0 - t) / t;
            let v = f(x) / (t * t);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        &[0.0],
        &[1.0],
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exactness() {
        let r = integrate_interval(|x| x.powi(20), 0.0, 1.0, &Tolerance::default());
        assert!((r.value - 1.0 / 21.0).abs() < 1e-15 && r.converged);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate_interval(|x| 1.0 / x.sqrt(), 0.0, 1.0, &Tolerance { rel: 1e-10, ..Default::default() });
        assert!((r.value - 2.0).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn two_dimensional_gaussian() {
        let r = integrate_box(|p| (-(p[0] * p[0] + p[1] * p[1])).exp(), &[-6.0, -6.0], &[6.0, 6.0], &Tolerance::default());
        assert!((r.value - std::f64::consts::PI).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn semi_infinite() {
        let r = integrate_to_infinity(|x| (-x).exp(), 0.0, &Tolerance::default());
        assert!((r.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn three_dimensional_box() {
        let r = integrate_box(|p| p[0] * p[1] * p[2], &[0.0; 3], &[1.0, 2.0, 3.0], &Tolerance::default());
        assert!((r.value - 0.5 * 2.0 * 4.5).abs() < 1e-12);
    }
}
