//! Points addressed through the ball hierarchy, and F, G on them.

use serde::{Deserialize, Serialize};

use super::{LusinConstruction, LusinPart, CHILD_OFFSETS};
use crate::error::{invalid, Error, Result};
use crate::levelindex::Radius;
use crate::linalg::Mat;

/// Position relative to the centre c of the last ball on the path (level n).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Tail {
    /// c + r_n v.  For the empty path this is the plain point v.
    Inner([f64; 2]),
    /// c + r_{n-1} d with R'_n <= r_{n-1}|d| < R_n.
    Outer([f64; 2]),
    /// c + radius * dir, radius < R_n.
    Ring { dir: [f64; 2], radius: Radius },
}

/// A point of the plane as a ball path (child indices 0..4 from level 0 down) plus a tail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LusinPoint {
    pub path: Vec<u8>,
    pub tail: Tail,
}

impl LusinPoint {
    pub fn plain(z: [f64; 2]) -> LusinPoint {
        LusinPoint { path: vec![], tail: Tail::Inner(z) }
    }

    pub fn center(path: &[u8]) -> LusinPoint {
        LusinPoint { path: path.to_vec(), tail: Tail::Inner([0.0, 0.0]) }
    }

    pub fn ring(path: &[u8], dir: [f64; 2], radius: Radius) -> LusinPoint {
        LusinPoint { path: path.to_vec(), tail: Tail::Ring { dir, radius } }
    }

    pub fn level(&self) -> Option<usize> {
        self.path.len().checked_sub(1)
    }
}

/// Jacobians of F and G divided by |DF|.
///
/// For F on every piece K_F J_F = |DF|^2, so |Df|^2 <= (1 + eps)^2 K_F J_F reads
/// sigma_max([df; dg]) <= 1 + eps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedJacobian {
    pub df: Mat,
    pub dg: Mat,
    /// log |DF|; +inf once it leaves f64.
    pub ln_df_norm: f64,
    /// log K_F
    pub ln_k: f64,
}

impl NormalizedJacobian {
    pub fn stacked(&self) -> Mat {
        self.df.vstack(&self.dg)
    }

    /// |Df| / sqrt(K_F J_F).
    pub fn distortion_ratio(&self) -> f64 {
        crate::maps::operator_norm(&self.stacked())
    }
}

fn scale(v: [f64; 2], s: f64) -> [f64; 2] {
    [v[0] * s, v[1] * s]
}

fn unit(v: [f64; 2]) -> Result<[f64; 2]> {
    let m = v[0].hypot(v[1]);
    if !(m > 0.0) || !m.is_finite() {
        return Err(invalid("dir", "direction must be a finite non-zero vector"));
    }
    Ok(scale(v, 1.0 / m))
}

impl LusinConstruction {
    fn parent_inner(&self, n: usize) -> Radius {
        if n == 0 {
            Radius::ONE
        } else {
            self.levels[n - 1].inner
        }
    }

    /// Ring point at level-index fraction t between R'_n (t = 0) and r_n (t = 1).
    pub fn ring_point(&self, path: &[u8], dir: [f64; 2], t: f64) -> LusinPoint {
        let l = &self.levels[path.len() - 1];
        LusinPoint::ring(path, dir, l.prime.lerp(l.inner, t))
    }

    /// Normal form at `depth`: the path goes as deep as the point lies in R-balls
    /// of levels below `depth`, and ring radii at or below r_n become inner offsets.
    pub fn canonical(&self, p: &LusinPoint, depth: usize) -> Result<LusinPoint> {
        if depth > self.depth() {
            return Err(invalid("depth", format!("{depth} exceeds the built depth {}", self.depth())));
        }
        if p.path.len() > self.depth() || p.path.iter().any(|&c| c > 3) {
            return Err(invalid("path", format!("{:?} does not address a built ball", p.path)));
        }
        let mut path = p.path.clone();
        let mut tail = p.tail.clone();
        match tail {
            Tail::Inner(v) | Tail::Outer(v) if !v.iter().all(|a| a.is_finite()) => {
                return Err(invalid("point", "coordinates must be finite"))
            }
            Tail::Outer(_) | Tail::Ring { .. } if path.is_empty() => {
                return Err(invalid("path", "ring and outer tails need a ball"))
            }
            Tail::Ring { dir, radius } => {
                let dir = unit(dir)?;
                let l = &self.levels[path.len() - 1];
                if radius > l.outer {
                    return Err(invalid("radius", format!("ring radius reaches R_{}", l.n)));
                }
                tail = if radius <= l.inner {
                    Tail::Inner(scale(dir, radius.log_ratio(l.inner).exp()))
                } else {
                    Tail::Ring { dir, radius }
                };
            }
            _ => {}
        }
        while path.len() > depth {
            let n = path.len() - 1;
            let k = path.pop().unwrap();
            let up = self.parent_inner(n);
            let rel = match tail {
                Tail::Inner(v) => scale(v, self.levels[n].inner.log_ratio(up).exp()),
                Tail::Outer(d) => d,
                Tail::Ring { dir, radius } => scale(dir, radius.log_ratio(up).exp()),
            };
            tail = Tail::Inner([CHILD_OFFSETS[k as usize] + rel[0], rel[1]]);
        }
        while let Tail::Inner(v) = tail {
            let m = path.len();
            if m >= depth {
                break;
            }
            let l = &self.levels[m];
            let reach = l.ln_child_fraction.exp();
            let Some(k) = CHILD_OFFSETS.iter().position(|cf| (v[0] - cf).hypot(v[1]) < reach) else {
                break;
            };
            let d = [v[0] - CHILD_OFFSETS[k], v[1]];
            let dist = d[0].hypot(d[1]);
            path.push(k as u8);
            if dist == 0.0 {
                tail = Tail::Inner([0.0, 0.0]);
            } else if dist.ln() >= l.ln_prime_fraction {
                tail = Tail::Outer(d);
            } else {
                let dir = scale(d, 1.0 / dist);
                let radius = self.parent_inner(m).scaled(dist);
                tail = if radius <= l.inner {
                    Tail::Inner(scale(dir, radius.log_ratio(l.inner).exp()))
                } else {
                    Tail::Ring { dir, radius }
                };
            }
        }
        Ok(LusinPoint { path, tail })
    }

    /// Distance of a tail from its centre for the annulus pieces.
    fn tail_radius(&self, n: usize, tail: &Tail) -> Option<([f64; 2], Radius)> {
        match *tail {
            Tail::Inner(_) => None,
            Tail::Outer(d) => {
                let dist = d[0].hypot(d[1]);
                Some((scale(d, 1.0 / dist), self.parent_inner(n).scaled(dist.min(1.0))))
            }
            Tail::Ring { dir, radius } => Some((dir, radius)),
        }
    }

    /// F_N at a point, N = `depth`.
    pub fn eval_f(&self, p: &LusinPoint, depth: usize) -> Result<[f64; 2]> {
        let p = self.canonical(p, depth)?;
        let Some(n) = p.level() else {
            let Tail::Inner(z) = p.tail else { unreachable!() };
            return Ok(z);
        };
        let l = &self.levels[n];
        // image offset from c_n in units of r_{n-1}
        let mut u = match self.tail_radius(n, &p.tail) {
            None => {
                let Tail::Inner(v) = p.tail else { unreachable!() };
                scale(v, l.ln_kappa.exp())
            }
            Some((dir, rho)) => scale(
                dir,
                (l.ln_child_fraction + l.outer.ln_one_plus_neg_log() - rho.ln_one_plus_neg_log()).exp(),
            ),
        };
        for j in (0..n).rev() {
            let q = [CHILD_OFFSETS[p.path[j + 1] as usize] + u[0], u[1]];
            u = scale(q, self.levels[j].ln_kappa.exp());
        }
        Ok([CHILD_OFFSETS[p.path[0] as usize] + u[0], u[1]])
    }

    /// G_N at a point, N = `depth`.
    pub fn eval_g(&self, p: &LusinPoint, depth: usize) -> Result<[f64; 2]> {
        let p = self.canonical(p, depth)?;
        let Some(n) = p.level() else {
            return Ok([0.0, 0.0]);
        };
        let w = LusinConstruction::square_center(&p.path);
        let w_parent = LusinConstruction::square_center(&p.path[..n]);
        match p.tail {
            Tail::Inner(_) => Ok(w),
            Tail::Outer(_) => Ok(w_parent),
            Tail::Ring { radius, .. } => {
                let l = &self.levels[n];
                if radius >= l.prime {
                    return Ok(w_parent);
                }
                let t = self.bump.u_rise(l.prime, radius)?;
                let e = unit([w[0] - w_parent[0], w[1] - w_parent[1]])?;
                Ok([w_parent[0] + t * e[0], w_parent[1] + t * e[1]])
            }
        }
    }

    /// DF and DG divided by |DF| at depth N.
    pub fn normalized_jacobian(&self, p: &LusinPoint, depth: usize) -> Result<NormalizedJacobian> {
        let p = self.canonical(p, depth)?;
        let Some(n) = p.level() else {
            return Ok(NormalizedJacobian { df: Mat::identity(2), dg: Mat::zeros(2, 2), ln_df_norm: 0.0, ln_k: 0.0 });
        };
        let l = &self.levels[n];
        match self.tail_radius(n, &p.tail) {
            None => {
                // pure scaling by prod_{j <= n} s_j
                let ln_norm = (0..=n)
                    .map(|j| {
                        let lj = &self.levels[j];
                        lj.ln_kappa - lj.inner.log_ratio(self.parent_inner(j))
                    })
                    .sum();
                Ok(NormalizedJacobian { df: Mat::identity(2), dg: Mat::zeros(2, 2), ln_df_norm: ln_norm, ln_k: 0.0 })
            }
            Some((e, rho)) => {
                let ln_k = rho.ln_one_plus_neg_log();
                let radial = (-ln_k).exp();
                let t = [-e[1], e[0]];
                let mut df = Mat::zeros(2, 2);
                for i in 0..2 {
                    for j in 0..2 {
                        df[(i, j)] = radial * e[i] * e[j] + t[i] * t[j];
                    }
                }
                let mut dg = Mat::zeros(2, 2);
                if matches!(p.tail, Tail::Ring { .. }) && rho < l.prime {
                    let s = self.bump.scaled_slope(rho)? * (-0.5 * l.ln_a).exp();
                    let w = LusinConstruction::square_center(&p.path);
                    let wp = LusinConstruction::square_center(&p.path[..n]);
                    let ew = unit([w[0] - wp[0], w[1] - wp[1]])?;
                    // u decreases in the radius
                    for i in 0..2 {
                        for j in 0..2 {
                            dg[(i, j)] = -s * ew[i] * e[j];
                        }
                    }
                }
                let ln_df_norm = 0.5 * l.ln_a + rho.neg_log() - ln_k;
                Ok(NormalizedJacobian { df, dg, ln_df_norm, ln_k })
            }
        }
    }

    pub fn value_plain(&self, part: LusinPart, z: [f64; 2]) -> Result<Vec<f64>> {
        let p = LusinPoint::plain(z);
        let d = self.depth();
        Ok(match part {
            LusinPart::F => self.eval_f(&p, d)?.to_vec(),
            LusinPart::G => self.eval_g(&p, d)?.to_vec(),
            LusinPart::Curve => {
                let mut v = self.eval_f(&p, d)?.to_vec();
                v.extend(self.eval_g(&p, d)?);
                v
            }
        })
    }

    pub fn jacobian_plain(&self, part: LusinPart, z: [f64; 2]) -> Result<Mat> {
        let j = self.normalized_jacobian(&LusinPoint::plain(z), self.depth())?;
        let s = j.ln_df_norm.exp();
        let out = match part {
            LusinPart::F => j.df.scale(s),
            LusinPart::G => j.dg.scale(s),
            LusinPart::Curve => j.stacked().scale(s),
        };
        if !out.is_finite() {
            return Err(Error::Evaluation(format!("|DF| at {z:?} exceeds the f64 range")));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::shared;
    use super::*;

    #[test]
    fn outside_the_balls_f_is_identity_and_g_vanishes() {
        let c = shared();
        for z in [[0.0, 0.5], [0.5, 0.0], [-0.9, 0.01], [3.0, -2.0]] {
            assert_eq!(c.eval_f(&LusinPoint::plain(z), 5).unwrap(), z);
            assert_eq!(c.eval_g(&LusinPoint::plain(z), 5).unwrap(), [0.0, 0.0]);
        }
    }

    #[test]
    fn f_is_continuous_at_the_outer_seam() {
        let c = shared();
        let r0 = c.level(0).outer.value();
        for (below, above) in [(r0 * (1.0 - 1e-12), r0 * (1.0 + 1e-12))] {
            let a = c.eval_f(&LusinPoint::plain([0.25 + below, 0.0]), 5).unwrap();
            let b = c.eval_f(&LusinPoint::plain([0.25 + above, 0.0]), 5).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-10, "{a:?} {b:?}");
        }
    }

    #[test]
    fn f_annulus_matches_the_radial_formula() {
        // R(1 - log R) g(z - c) with g(w) = w / (|w|(1 - log|w|))
        let c = shared();
        let big_r = c.level(0).outer.value();
        let rho = 1e-3;
        let f = c.eval_f(&LusinPoint::plain([-0.75, rho]), 5).unwrap();
        let expect = big_r * (1.0 - big_r.ln()) / (1.0 - rho.ln());
        assert!((f[0] + 0.75).abs() < 1e-15 && (f[1] - expect).abs() < 1e-14 * expect, "{f:?}");
    }

    #[test]
    fn inner_seam_agrees_between_pieces() {
        let c = shared();
        for n in 0..5 {
            let path = vec![2u8; n + 1];
            let l = c.level(n);
            let ring = c.eval_f(&LusinPoint::ring(&path, [0.0, 1.0], l.inner.lerp(l.prime, 1e-12)), 5).unwrap();
            let inner = c.eval_f(&LusinPoint { path: path.clone(), tail: Tail::Inner([0.0, 1.0]) }, 5).unwrap();
            let tail_r = (ring[1] - inner[1]).abs();
            assert!(tail_r < 1e-10, "level {n}: {ring:?} {inner:?}");
        }
    }

    #[test]
    fn g_hits_square_centres_at_ball_centres() {
        let c = shared();
        assert_eq!(c.eval_g(&LusinPoint::plain([0.25, 0.0]), 1).unwrap(), [0.5, 0.5]);
        assert_eq!(c.eval_g(&LusinPoint::plain([0.25, 0.0]), 5).unwrap(), [0.5, 0.5]);
        let path = [3u8, 1, 2];
        assert_eq!(c.eval_g(&LusinPoint::center(&path), 5).unwrap(), LusinConstruction::square_center(&path));
        // at depth 2 the level-2 ball is not yet active
        assert_eq!(c.eval_g(&LusinPoint::center(&path), 2).unwrap(), LusinConstruction::square_center(&path[..2]));
    }

    #[test]
    fn g_is_continuous_at_both_ring_seams() {
        let c = shared();
        for n in 0..5 {
            let path: Vec<u8> = (0..=n).map(|k| (k % 4) as u8).collect();
            let l = c.level(n);
            let w = LusinConstruction::square_center(&path);
            let wp = LusinConstruction::square_center(&path[..n]);
            let at_prime = c.eval_g(&LusinPoint::ring(&path, [1.0, 0.0], l.prime), 5).unwrap();
            assert!((at_prime[0] - wp[0]).abs() < 1e-10 && (at_prime[1] - wp[1]).abs() < 1e-10);
            let near_inner = c.eval_g(&c.ring_point(&path, [1.0, 0.0], 1.0 - 1e-13), 5).unwrap();
            assert!((near_inner[0] - w[0]).abs() < 1e-8 && (near_inner[1] - w[1]).abs() < 1e-8, "{n}");
        }
    }

    #[test]
    fn centre_of_a_child_reached_from_the_parent_offset() {
        let c = shared();
        // the parent's inner offset 1/4 is exactly child 2's centre
        let p = LusinPoint { path: vec![1], tail: Tail::Inner([0.25, 0.0]) };
        let q = c.canonical(&p, 5).unwrap();
        assert_eq!(q.path, vec![1, 2]);
        assert_eq!(q.tail, Tail::Inner([0.0, 0.0]));
        let q = c.canonical(&p, 1).unwrap();
        assert_eq!(q.path, vec![1]);
    }

    #[test]
    fn f_keeps_the_segment_on_the_axis() {
        let c = shared();
        for p in [
            LusinPoint::plain([0.9, 0.0]),
            LusinPoint::plain([0.75 - 1e-9, 0.0]),
            c.ring_point(&[0, 3, 1], [-1.0, 0.0], 0.3),
            LusinPoint { path: vec![2, 2], tail: Tail::Inner([0.5, 0.0]) },
        ] {
            let f = c.eval_f(&p, 5).unwrap();
            assert_eq!(f[1], 0.0, "{p:?}");
            assert!(f[0].abs() <= 1.0);
        }
    }

    #[test]
    fn normalized_dg_matches_the_slope_in_logs() {
        // scaled_slope / sqrt(a_0) against h(rho) rho (1 + x) / sqrt(a_0) built from ln h
        let c = shared();
        let l = c.level(0);
        // near R'_0 x is about 5e7, where ln h - x keeps enough digits
        let p = c.ring_point(&[1], [0.6, 0.8], 0.0);
        let Tail::Ring { radius, .. } = p.tail else { unreachable!() };
        let j = c.normalized_jacobian(&p, 5).unwrap();
        let ln_expect = c.bump.ln_slope(radius).unwrap() - radius.neg_log() + radius.ln_one_plus_neg_log() - 0.5 * l.ln_a;
        let got = j.dg.frobenius();
        assert!((got.ln() - ln_expect).abs() < 1e-6, "{} {}", got.ln(), ln_expect);
        assert!(j.distortion_ratio() <= 1.25);
    }

    #[test]
    fn plain_jacobian_agrees_with_differences() {
        let c = shared();
        let map = crate::maps::MapInstance::lusin(std::sync::Arc::new(c.clone()), LusinPart::F);
        for z in [[0.27, 0.01], [-0.76, -0.003], [0.5, 0.2]] {
            let a = map.jacobian(&z).unwrap();
            let b = map.jacobian_fd(&z).unwrap();
            for (x, y) in a.data.iter().zip(&b.data) {
                assert!((x - y).abs() < 1e-6 * (1.0 + x.abs()), "{z:?}: {a:?} {b:?}");
            }
        }
    }
}
