//! Level integrals and the sampled checks on a built construction.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::point::{LusinPoint, Tail};
use super::{LusinConstruction, CHILD_OFFSETS};
use crate::analyzer::{integrate_log, QuadratureTask, Region};
use crate::error::{invalid, Error, Result};
use crate::levelindex::Radius;
use crate::par::map_range;

/// Exponential integral of K_F = 1 - log|z - c| over the annuli of one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelIntegral {
    pub n: usize,
    pub lambda: f64,
    pub count: usize,
    /// 2 pi count e^lambda (R^{2-lambda} - r^{2-lambda}) / (2 - lambda); 0 once it underflows.
    pub closed_form: f64,
    pub ln_closed_form: f64,
    pub ln_quadrature: f64,
    /// Closed form and quadrature compared after dividing out count * R^{2-lambda}.
    pub rel_diff: f64,
    pub converged: bool,
}

/// log of count * int_{r <= |z| <= R} exp(lambda (1 - log|z|)) dz.
pub fn ln_annulus_exp_integral(lambda: f64, outer: Radius, inner: Radius, count: usize) -> f64 {
    ln_scale_free(lambda, outer, inner, count) - (2.0 - lambda) * outer.neg_log()
}

/// The same integral divided by R^{2-lambda}.
fn ln_scale_free(lambda: f64, outer: Radius, inner: Radius, count: usize) -> f64 {
    let q = (2.0 - lambda) * inner.log_ratio(outer);
    (2.0 * PI * count as f64).ln() + lambda - (2.0 - lambda).ln() + (-q.exp()).ln_1p()
}

pub fn level_exp_integral(c: &LusinConstruction, lambda: f64, n: usize) -> Result<LevelIntegral> {
    if !(lambda > 0.0 && lambda < 2.0) {
        return Err(invalid("lambda", format!("must lie in (0, 2), got {lambda}")));
    }
    if n >= c.depth() {
        return Err(invalid("level", format!("level {n} not built (depth {})", c.depth())));
    }
    let l = c.level(n);
    let ln_closed = ln_annulus_exp_integral(lambda, l.outer, l.inner, l.count);
    // quadrature over one annulus; level 0 directly, deeper levels rescaled to R = 1
    let (radius, ln_scale, r_in) = if n == 0 {
        (l.outer.value(), 0.0, l.inner.value())
    } else {
        (1.0, -(2.0 - lambda) * l.outer.neg_log(), l.inner.log_ratio(l.outer).exp())
    };
    let ln_g = move |p: &[f64]| {
        let rho = p[0].hypot(p[1]);
        if rho < r_in {
            f64::NEG_INFINITY
        } else {
            lambda * (1.0 - rho.ln())
        }
    };
    let region = if r_in > 0.0 {
        Region::Annulus { center: vec![0.0, 0.0], inner: r_in, outer: radius }
    } else {
        Region::ball(&[0.0, 0.0], radius)
    };
    let task = QuadratureTask::new(region).with_singular(&[vec![0.0, 0.0]]);
    let q = integrate_log(&ln_g, &task)?;
    let ln_quad = (l.count as f64).ln() + q.ln_value + ln_scale;
    let rel_diff = if n == 0 {
        (ln_quad - ln_closed).exp_m1().abs()
    } else {
        ((l.count as f64).ln() + q.ln_value - ln_scale_free(lambda, l.outer, l.inner, l.count)).exp_m1().abs()
    };
    Ok(LevelIntegral {
        n,
        lambda,
        count: l.count,
        closed_form: ln_closed.exp(),
        ln_closed_form: ln_closed,
        ln_quadrature: ln_quad,
        rel_diff,
        converged: q.converged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSpec {
    /// Plain points on [-1, 1] x {0}.
    pub segment_samples: usize,
    /// Hierarchical ring and centre points per level for the G differences.
    pub ring_samples: usize,
    /// Annulus points for the combined distortion check.
    pub distortion_samples: usize,
    pub seed: u64,
}

impl Default for EvidenceSpec {
    fn default() -> Self {
        EvidenceSpec { segment_samples: 100_000, ring_samples: 400, distortion_samples: 10_000, seed: 7 }
    }
}

/// Sampled sup |G_{n+1} - G_n| against the centre distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelStep {
    pub n: usize,
    /// Distance from a level-n square centre to a child centre.
    pub d: f64,
    /// Distance from a level-(n-1) square centre to a level-n centre (the rise of u).
    pub step: f64,
    pub sup_diff: f64,
    pub samples: usize,
    pub within_d: bool,
    pub within_step: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionEvidence {
    pub samples: usize,
    pub epsilon: f64,
    /// max |Df| / sqrt(K_F J_F)
    pub max_ratio: f64,
    pub violations: usize,
    /// max r |u'(r)| (1 - log r) log|log r| over the G annuli (at most 1 is the gradient bound).
    pub max_gradient_margin: f64,
    pub gradient_violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LusinEvidence {
    pub depth: usize,
    pub expected_centers: usize,
    pub attained_centers: usize,
    pub max_center_miss: f64,
    pub steps: Vec<LevelStep>,
    pub segment_samples: usize,
    /// Largest |F_2| over segment samples, plain and hierarchical.
    pub max_axis_offset: f64,
    pub segment_monotone: bool,
    pub endpoints_fixed: bool,
    pub distortion: DistortionEvidence,
    /// min over levels of (sibling gap) / r_{n-1} and (room to the parent rim) / r_{n-1}.
    pub min_sibling_gap: f64,
    pub min_rim_gap: f64,
    pub disjoint: bool,
    pub f_seam_max: f64,
    pub g_seam_max: f64,
    /// sum_i int_{B(c_{i,n}, R'_n)} Phi(|DG_{n+1}|) per level.
    pub g_energies: Vec<f64>,
    pub integrals: Vec<LevelIntegral>,
    pub exp_integral_bound: f64,
}

impl LusinEvidence {
    pub fn centers_ok(&self) -> bool {
        self.attained_centers == self.expected_centers
    }

    pub fn steps_within_d(&self) -> bool {
        self.steps.iter().all(|s| s.within_d)
    }

    pub fn steps_within_step(&self) -> bool {
        self.steps.iter().all(|s| s.within_step)
    }

    pub fn segment_ok(&self) -> bool {
        self.max_axis_offset == 0.0 && self.segment_monotone && self.endpoints_fixed
    }

    pub fn distortion_ok(&self) -> bool {
        self.distortion.violations == 0
    }
}

fn random_path(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    (0..=n).map(|_| rng.random_range(0..4u8)).collect()
}

fn random_dir(rng: &mut ChaCha8Rng) -> [f64; 2] {
    let a = rng.random_range(0.0..2.0 * PI);
    [a.cos(), a.sin()]
}

fn gap(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn lusin_evidence(c: &LusinConstruction, spec: &EvidenceSpec) -> Result<LusinEvidence> {
    let depth = c.depth();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // (a) every square centre is the value of G_N at its ball centre on the segment
    let mut expected = 0;
    let mut attained = 0;
    let mut miss: f64 = 0.0;
    for n in 0..depth {
        for path in LusinConstruction::paths(n) {
            expected += 1;
            let p = LusinPoint::center(&path);
            let g = c.eval_g(&p, depth)?;
            let e = gap(g, LusinConstruction::square_center(&path));
            let on_axis = c.eval_f(&p, depth)?[1] == 0.0;
            miss = miss.max(e);
            if e <= 1e-12 && on_axis {
                attained += 1;
            }
        }
    }

    // (b) sup |G_{n+1} - G_n| over plain segment points and hierarchical points of level n
    let xs: Vec<f64> = (0..spec.segment_samples).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut plain_diff = vec![0.0f64; depth];
    let per_point: Vec<Result<Vec<f64>>> = map_range(xs.len(), |i| {
        let p = LusinPoint::plain([xs[i], 0.0]);
        let gs = (0..=depth).map(|m| c.eval_g(&p, m)).collect::<Result<Vec<_>>>()?;
        Ok(gs.windows(2).map(|w| gap(w[0], w[1])).collect())
    });
    for d in per_point {
        for (n, v) in d?.into_iter().enumerate() {
            plain_diff[n] = plain_diff[n].max(v);
        }
    }
    let mut steps = Vec::with_capacity(depth);
    for n in 0..depth {
        let l = c.level(n);
        let points: Vec<LusinPoint> = (0..spec.ring_samples)
            .map(|i| {
                let path = random_path(&mut rng, n);
                match i % 4 {
                    0 => LusinPoint::center(&path),
                    1 => c.ring_point(&path, [if rng.random_bool(0.5) { 1.0 } else { -1.0 }, 0.0], rng.random()),
                    _ => c.ring_point(&path, random_dir(&mut rng), rng.random()),
                }
            })
            .collect();
        let diffs = map_range(points.len(), |i| -> Result<f64> {
            Ok(gap(c.eval_g(&points[i], n + 1)?, c.eval_g(&points[i], n)?))
        });
        let mut sup = plain_diff[n];
        for d in diffs {
            sup = sup.max(d?);
        }
        steps.push(LevelStep {
            n,
            d: l.d,
            step: l.step,
            sup_diff: sup,
            samples: spec.segment_samples + spec.ring_samples,
            within_d: sup <= l.d,
            within_step: sup <= l.step + 1e-8,
        });
    }

    // (c) F keeps the segment on the axis, in order, with fixed endpoints
    let mut sorted = xs.clone();
    sorted.extend([-1.0, 1.0]);
    sorted.sort_by(f64::total_cmp);
    let images = map_range(sorted.len(), |i| c.eval_f(&LusinPoint::plain([sorted[i], 0.0]), depth));
    let images = images.into_iter().collect::<Result<Vec<_>>>()?;
    let mut max_axis_offset = images.iter().fold(0.0f64, |m, f| m.max(f[1].abs()));
    let segment_monotone = images.windows(2).all(|w| w[0][0] <= w[1][0]);
    let endpoints_fixed = images.first() == Some(&[-1.0, 0.0]) && images.last() == Some(&[1.0, 0.0]);
    for n in 0..depth {
        for i in 0..spec.ring_samples / 4 {
            let path = random_path(&mut rng, n);
            let side = if i % 2 == 0 { 1.0 } else { -1.0 };
            let f = c.eval_f(&c.ring_point(&path, [side, 0.0], rng.random()), depth)?;
            max_axis_offset = max_axis_offset.max(f[1].abs());
        }
    }

    // combined distortion at annulus points: 9 in 10 inside the G annuli, the rest between R' and R
    let eps = c.params.epsilon;
    let samples: Vec<LusinPoint> = (0..spec.distortion_samples)
        .map(|i| {
            let n = rng.random_range(0..depth);
            let path = random_path(&mut rng, n);
            let dir = random_dir(&mut rng);
            let l = c.level(n);
            if i % 10 == 9 && l.ln_prime_fraction < l.ln_child_fraction {
                let lo = l.ln_prime_fraction.max(l.ln_child_fraction - 30.0);
                let s = rng.random_range(lo..l.ln_child_fraction).exp();
                LusinPoint { path, tail: Tail::Outer([s * dir[0], s * dir[1]]) }
            } else {
                c.ring_point(&path, dir, rng.random())
            }
        })
        .collect();
    let checks = map_range(samples.len(), |i| -> Result<(f64, f64)> {
        let j = c.normalized_jacobian(&samples[i], depth)?;
        let margin = match samples[i].tail {
            Tail::Ring { radius, .. } => c.bump.gradient_bound_margin(radius)?,
            _ => 0.0,
        };
        Ok((j.distortion_ratio(), margin))
    });
    let mut distortion = DistortionEvidence {
        samples: samples.len(),
        epsilon: eps,
        max_ratio: 0.0,
        violations: 0,
        max_gradient_margin: 0.0,
        gradient_violations: 0,
    };
    for r in checks {
        let (ratio, margin) = r?;
        if !ratio.is_finite() || ratio > (1.0 + eps) * (1.0 + 1e-12) {
            distortion.violations += 1;
        }
        if margin > 1.0 {
            distortion.gradient_violations += 1;
        }
        distortion.max_ratio = distortion.max_ratio.max(ratio);
        distortion.max_gradient_margin = distortion.max_gradient_margin.max(margin);
    }

    // disjointness, in units of the parent inner radius
    let mut min_sibling_gap = f64::INFINITY;
    let mut min_rim_gap = f64::INFINITY;
    for l in &c.levels {
        let reach = l.ln_child_fraction.exp();
        for w in CHILD_OFFSETS.windows(2) {
            min_sibling_gap = min_sibling_gap.min(w[1] - w[0] - 2.0 * reach);
        }
        let outermost = CHILD_OFFSETS.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        min_rim_gap = min_rim_gap.min(1.0 - outermost - reach);
    }
    let disjoint = min_sibling_gap > 0.0 && min_rim_gap > 0.0 && c.levels.windows(2).all(|w| w[1].outer <= w[0].inner);

    // seams of F at R_n and r_n, of G at R'_n and r_n
    let mut f_seam_max: f64 = 0.0;
    let mut g_seam_max: f64 = 0.0;
    for n in 0..depth {
        let l = c.level(n);
        let path = random_path(&mut rng, n);
        let dir = random_dir(&mut rng);
        let reach = l.ln_child_fraction.exp();
        let parent = LusinPoint {
            path: path[..n].to_vec(),
            tail: Tail::Inner([
                CHILD_OFFSETS[path[n] as usize] + reach * (1.0 + 1e-13) * dir[0],
                reach * (1.0 + 1e-13) * dir[1],
            ]),
        };
        let inside = if l.ln_prime_fraction < l.ln_child_fraction {
            LusinPoint { path: path.clone(), tail: Tail::Outer([reach * (1.0 - 1e-13) * dir[0], reach * (1.0 - 1e-13) * dir[1]]) }
        } else {
            LusinPoint::ring(&path, dir, l.prime)
        };
        f_seam_max = f_seam_max.max(gap(c.eval_f(&parent, depth)?, c.eval_f(&inside, depth)?));
        let ring = c.eval_f(&LusinPoint::ring(&path, dir, l.inner.lerp(l.prime, 1e-13)), depth)?;
        let inner = c.eval_f(&LusinPoint { path: path.clone(), tail: Tail::Inner(dir) }, depth)?;
        f_seam_max = f_seam_max.max(gap(ring, inner));
        let at_prime = c.eval_g(&LusinPoint::ring(&path, dir, l.prime), depth)?;
        g_seam_max = g_seam_max.max(gap(at_prime, LusinConstruction::square_center(&path[..n])));
        let w = LusinConstruction::square_center(&path);
        let wp = LusinConstruction::square_center(&path[..n]);
        let e = [(w[0] - wp[0]) / l.step, (w[1] - wp[1]) / l.step];
        let rise = l.u_inner - l.u_prime;
        g_seam_max = g_seam_max.max(gap([wp[0] + rise * e[0], wp[1] + rise * e[1]], w));
    }

    let g_energies = c
        .levels
        .iter()
        .map(|l| Ok(l.count as f64 * c.bump.energy_between(l.prime, l.inner)?))
        .collect::<Result<Vec<_>>>()?;
    let integrals =
        (0..depth).map(|n| level_exp_integral(c, c.params.lambda, n)).collect::<Result<Vec<_>>>()?;
    if integrals.iter().any(|i| !i.ln_closed_form.is_finite() && i.n == 0) {
        return Err(Error::Evaluation("level-0 closed form is not finite".into()));
    }

    Ok(LusinEvidence {
        depth,
        expected_centers: expected,
        attained_centers: attained,
        max_center_miss: miss,
        steps,
        segment_samples: spec.segment_samples,
        max_axis_offset,
        segment_monotone,
        endpoints_fixed,
        distortion,
        min_sibling_gap,
        min_rim_gap,
        disjoint,
        f_seam_max,
        g_seam_max,
        g_energies,
        integrals,
        exp_integral_bound: c.exp_integral_bound(),
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::shared;
    use super::*;

    #[test]
    fn closed_form_examples() {
        let v = ln_annulus_exp_integral(1.0, Radius::new(0.5), Radius::new(0.25), 1).exp();
        assert!((v - 2.0 * PI * 1f64.exp() * 0.25).abs() < 1e-12);
        assert!((v - 4.269_867_111_336_783).abs() < 1e-9);
        assert_eq!(ln_annulus_exp_integral(1.0, Radius::new(0.5), Radius::new(0.5), 1).exp(), 0.0);
    }

    #[test]
    fn level_integrals_match_quadrature() {
        let c = shared();
        for lambda in [1.0, 1.5] {
            for n in 0..3 {
                let r = level_exp_integral(c, lambda, n).unwrap();
                assert!(r.rel_diff < 1e-6, "lambda {lambda} level {n}: {r:?}");
            }
        }
    }

    #[test]
    fn evidence_on_a_small_sample() {
        let c = shared();
        let spec = EvidenceSpec { segment_samples: 2000, ring_samples: 40, distortion_samples: 500, seed: 3 };
        let e = lusin_evidence(c, &spec).unwrap();
        assert_eq!(e.expected_centers, 4 + 16 + 64 + 256 + 1024);
        assert!(e.centers_ok());
        assert!(e.segment_ok(), "{e:?}");
        assert!(e.distortion_ok() && e.distortion.gradient_violations == 0, "{:?}", e.distortion);
        assert!(e.disjoint);
        assert!(e.f_seam_max < 1e-10 && e.g_seam_max < 1e-8, "{} {}", e.f_seam_max, e.g_seam_max);
        assert!(e.steps_within_step());
        // the step to the first centres is twice the centre-to-child distance
        assert!((e.steps[0].sup_diff - 2.0 * e.steps[0].d).abs() < 1e-12);
        let total: f64 = e.integrals.iter().map(|i| i.closed_form).sum();
        assert!(total <= e.exp_integral_bound);
    }
}
