use serde::{Deserialize, Serialize};

use super::{MapInstance, MapKind};
use crate::error::Result;
use crate::forms::{ComassSettings, VolumeForm};
use crate::linalg::{dot, norm, Mat};

/// Largest singular value of `j`.
///
/// Power iteration on J^T J, accelerated by repeated squaring so that nearly
/// equal top singular values still converge; the result is the Rayleigh
/// quotient of the best of two starting columns.
pub fn operator_norm(j: &Mat) -> f64 {
    let n = j.cols;
    if n == 0 || j.max_abs() == 0.0 {
        return 0.0;
    }
    let s = 1.0 / j.max_abs();
    let js = j.scale(s);
    let mut g = Mat::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v: f64 = (0..js.rows).map(|i| js[(i, a)] * js[(i, b)]).sum();
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    if n == 1 {
        return g[(0, 0)].sqrt() / s;
    }
    let rayleigh = |v: &[f64]| -> f64 {
        let nv = norm(v);
        if nv == 0.0 {
            return 0.0;
        }
        let gv: Vec<f64> = (0..n).map(|a| (0..n).map(|b| g[(a, b)] * v[b]).sum()).collect();
        dot(v, &gv) / (nv * nv)
    };
    let mut p = g.clone();
    let mut best = 0.0f64;
    for _ in 0..60 {
        let mut q = Mat::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                q[(a, b)] = (0..n).map(|k| p[(a, k)] * p[(k, b)]).sum();
            }
        }
        let scale = q.max_abs();
        if scale == 0.0 || !scale.is_finite() {
            break;
        }
        p = q.scale(1.0 / scale);
        // the two largest columns of the power serve as start vectors
        let mut cols: Vec<(f64, Vec<f64>)> = (0..n)
            .map(|b| {
                let c: Vec<f64> = (0..n).map(|a| p[(a, b)]).collect();
                (norm(&c), c)
            })
            .collect();
        cols.sort_by(|x, y| y.0.total_cmp(&x.0));
        let prev = best;
        best = cols.iter().take(2).map(|(_, c)| rayleigh(c)).fold(best, f64::max);
        let trace: f64 = (0..n).map(|a| p[(a, a)]).sum();
        let second: f64 = (0..n).map(|a| (a + 1..n).map(|b| p[(a, a)] * p[(b, b)] - p[(a, b)] * p[(b, a)]).sum::<f64>()).sum();
        if second.abs() <= 1e-24 * trace * trace && (best - prev).abs() <= 1e-15 * best {
            break;
        }
    }
    best.max(0.0).sqrt() / s
}

/// Pointwise ingredients of (||omega|| o f) |Df|^n <= K_f star(f^* omega).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionSample {
    pub point: Vec<f64>,
    pub star_pullback: f64,
    pub operator_norm: f64,
    pub comass_at_image: f64,
    /// max(1, ||omega|| |Df|^n / star); NaN when `finite_distortion` is false.
    pub distortion: f64,
    /// false when star <= 0 while |Df| > 0.
    pub finite_distortion: bool,
    /// Closed-form distortion, when the catalog has one.
    pub reference_distortion: Option<f64>,
    /// For thm2_curve: reference equals (|DF| + |Df3|)^2 / J_F from the Jacobian blocks (1e-6).
    pub reference_consistent: Option<bool>,
}

pub fn distortion_at(f: &MapInstance, omega: &VolumeForm, x: &[f64]) -> Result<DistortionSample> {
    let jac = f.jacobian(x)?;
    let image = f.value(x)?;
    distortion_from_parts(f, omega, x, &image, &jac)
}

pub(crate) fn distortion_from_parts(
    f: &MapInstance,
    omega: &VolumeForm,
    x: &[f64],
    image: &[f64],
    jac: &Mat,
) -> Result<DistortionSample> {
    if f.ambient_dim() != omega.ambient_dim() || f.domain_dim() != omega.degree() {
        return Err(crate::Error::Dimension(format!(
            "{} maps R^{} -> R^{} but the form is a {}-form on R^{}",
            f.id(),
            f.domain_dim(),
            f.ambient_dim(),
            omega.degree(),
            omega.ambient_dim()
        )));
    }
    let star = omega.star_pullback_with(image, jac);
    let opnorm = operator_norm(jac);
    let comass = omega.comass(image, &ComassSettings::default()).value;
    let n = f.domain_dim() as i32;
    let (distortion, finite) = if opnorm == 0.0 {
        (1.0, true)
    } else if star > 0.0 {
        ((comass * opnorm.powi(n) / star).max(1.0), true)
    } else {
        (f64::NAN, false)
    };
    let reference = f.reference_distortion(x);
    let reference_consistent = match (f.kind(), reference) {
        (MapKind::Thm2Curve, Some(k)) => {
            let df = operator_norm(&jac.select_rows(&[0, 1]));
            let df3 = norm(jac.row(2));
            let block = (df + df3).powi(2) / star;
            Some((block - k).abs() <= 1e-6 * k && k >= distortion * (1.0 - 1e-12))
        }
        _ => None,
    };
    Ok(DistortionSample {
        point: x.to_vec(),
        star_pullback: star,
        operator_norm: opnorm,
        comass_at_image: comass,
        distortion,
        finite_distortion: finite,
        reference_distortion: reference,
        reference_consistent,
    })
}

/// Zoom schedule for the condition (D) heuristic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DScanSpec {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    /// Number of refinement levels.
    pub levels: usize,
    /// Cells kept for refinement at each level.
    pub keep: usize,
    /// Candidate threshold at level l is growth * l^2.
    pub growth: f64,
}

impl Default for DScanSpec {
    fn default() -> Self {
        DScanSpec { lo: [-1.0, -1.0], hi: [1.0, 1.0], levels: 24, keep: 32, growth: 10.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DScanLevel {
    pub level: usize,
    pub threshold: f64,
    pub max_minor: f64,
    pub argmax: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidatePoint {
    pub point: [f64; 2],
    pub max_minor: f64,
    /// 1-based multi-index attaining the largest |star f^* dx_I| near the point.
    pub dominant_index: Vec<usize>,
}

/// Heuristic evidence only: blow-up candidates for the set E_f.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DScanReport {
    pub heuristic: bool,
    pub levels: Vec<DScanLevel>,
    pub candidates: Vec<CandidatePoint>,
}

/// Quadtree zoom on the cells where some |star f^* dx_I|, I in H_omega, is largest.
/// A point is a candidate if its minor still exceeds growth * l^2 at the final level.
pub fn condition_d_scan(f: &MapInstance, omega: &VolumeForm, spec: &DScanSpec) -> Result<DScanReport> {
    if f.domain_dim() != 2 {
        return Err(crate::Error::Unsupported("condition (D) scan is implemented for planar domains".into()));
    }
    let rows: Vec<Vec<usize>> = omega.support().iter().map(|i| i.rows()).collect();
    // (max |minor|, argmax index, sample point) over 5 sample points of a cell
    let probe = |c: [f64; 2], h: f64| -> (f64, usize, [f64; 2]) {
        let mut best = (0.0, 0, c);
        for (dx, dy) in [(0.0, 0.0), (-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)] {
            let p = [c[0] + dx * h, c[1] + dy * h];
            if let Ok(j) = f.jacobian(&p) {
                for (k, r) in rows.iter().enumerate() {
                    let v = j.select_rows(r).det().abs();
                    if v.is_finite() && v > best.0 {
                        best = (v, k, p);
                    }
                }
            }
        }
        best
    };
    let side0 = [(spec.hi[0] - spec.lo[0]), (spec.hi[1] - spec.lo[1])];
    let mut cells: Vec<[f64; 2]> = vec![[0.5 * (spec.lo[0] + spec.hi[0]), 0.5 * (spec.lo[1] + spec.hi[1])]];
    let mut levels = Vec::new();
    let mut last: Vec<(f64, usize, [f64; 2], [f64; 2])> = Vec::new();
    for level in 1..=spec.levels {
        let scale = 0.5f64.powi(level as i32);
        let (hx, hy) = (side0[0] * scale, side0[1] * scale);
        let mut scored: Vec<(f64, usize, [f64; 2], [f64; 2])> = Vec::new();
        for c in &cells {
            for (sx, sy) in [(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)] {
                let child = [c[0] + sx * hx, c[1] + sy * hy];
                let (v, k, p) = probe(child, hx.max(hy));
                scored.push((v, k, p, child));
            }
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.3[0].total_cmp(&b.3[0])).then(a.3[1].total_cmp(&b.3[1])));
        scored.truncate(spec.keep.max(1));
        let threshold = spec.growth * (level * level) as f64;
        levels.push(DScanLevel { level, threshold, max_minor: scored[0].0, argmax: scored[0].2 });
        cells = scored.iter().map(|s| s.3).collect();
        last = scored;
    }
    let final_level = spec.levels.max(1);
    let threshold = spec.growth * (final_level * final_level) as f64;
    let cluster_radius = 8.0 * side0[0].max(side0[1]) * 0.5f64.powi(final_level as i32);
    let mut candidates: Vec<CandidatePoint> = Vec::new();
    for (v, k, _, cell) in last.into_iter().filter(|s| s.0 > threshold) {
        match candidates
            .iter_mut()
            .find(|c| (c.point[0] - cell[0]).hypot(c.point[1] - cell[1]) <= cluster_radius)
        {
            Some(c) => {
                if v > c.max_minor {
                    c.max_minor = v;
                    c.dominant_index = omega.support()[k].indices().to_vec();
                }
            }
            None => candidates.push(CandidatePoint {
                point: snap(cell, cluster_radius),
                max_minor: v,
                dominant_index: omega.support()[k].indices().to_vec(),
            }),
        }
    }
    Ok(DScanReport { heuristic: true, levels, candidates })
}

/// Round a cluster location to the resolution of the scan.
fn snap(p: [f64; 2], resolution: f64) -> [f64; 2] {
    let r = |v: f64| if v.abs() <= resolution { 0.0 } else { v };
    [r(p[0]), r(p[1])]
}
