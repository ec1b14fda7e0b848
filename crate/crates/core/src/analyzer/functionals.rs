use std::f64::consts::{E, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ball_volume, integrate, integrate_log, Field, Integral, QuadratureTask, Region, Verdict};
use crate::error::{invalid, Error, Result};
use crate::forms::{star_pullback, VolumeForm};
use crate::linalg::Mat;
use crate::maps::{distortion_at, MapInstance, MapKind, ScalarField};

/// Integral of exp(lambda K_f) over the task region.
pub fn exp_distortion_integral(
    f: &MapInstance,
    omega: &VolumeForm,
    lambda: f64,
    task: &QuadratureTask,
) -> Result<Integral> {
    if !(lambda > 0.0) {
        return Err(invalid("lambda", "must be positive"));
    }
    check_domain(f, task)?;
    let ln_g = |x: &[f64]| match distortion_at(f, omega, x) {
        Ok(s) if s.finite_distortion => lambda * s.distortion,
        _ => f64::NAN,
    };
    integrate_log(&ln_g, task)
}

fn check_domain(f: &MapInstance, task: &QuadratureTask) -> Result<()> {
    if task.region.dim() != f.domain_dim() {
        return Err(Error::Dimension(format!(
            "region in R^{} but {} is defined on R^{}",
            task.region.dim(),
            f.id(),
            f.domain_dim()
        )));
    }
    Ok(())
}

/// x |-> star(f^* omega)(x); NaN where the Jacobian is unavailable.
pub fn star_field<'a>(f: &'a MapInstance, omega: &'a VolumeForm) -> impl Fn(&[f64]) -> f64 + Sync + 'a {
    move |x: &[f64]| star_pullback(f, omega, x).unwrap_or(f64::NAN)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdStatus {
    Found,
    /// Convergent at the top of the bracket: no threshold below it.
    ConvergentThroughout,
    DivergentThroughout,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub parameter: f64,
    pub verdict: Verdict,
    pub local_exponent: f64,
    pub shells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub estimate: Option<f64>,
    pub status: ThresholdStatus,
    /// Final bracket (convergent end, divergent end).
    pub bracket: (f64, f64),
    pub probes: Vec<Probe>,
}

/// Bisection on a verdict that switches from convergent to divergent once.
fn bisect_verdict(
    probe: impl Fn(f64, &QuadratureTask) -> Result<Integral>,
    task: &QuadratureTask,
    bracket: (f64, f64),
    tol: f64,
) -> Result<Threshold> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !(tol > 0.0) {
        return Err(invalid("bracket", "need lo < hi and a positive tolerance"));
    }
    let mut probes = vec![];
    // An inconclusive probe is retried once with twice as many shells.
    let run = |p: f64, probes: &mut Vec<Probe>| -> Result<Verdict> {
        let mut t = task.clone();
        for _ in 0..2 {
            let r = probe(p, &t)?;
            let local_exponent = r.profile.as_ref().map_or(f64::NAN, |s| s.local_exponent);
            probes.push(Probe { parameter: p, verdict: r.verdict, local_exponent, shells: t.shells });
            if r.verdict != Verdict::Inconclusive {
                return Ok(r.verdict);
            }
            t.shells *= 2;
        }
        Ok(Verdict::Inconclusive)
    };
    let done = |status, estimate, lo, hi, probes| Ok(Threshold { estimate, status, bracket: (lo, hi), probes });
    match (run(lo, &mut probes)?, run(hi, &mut probes)?) {
        (Verdict::Convergent, Verdict::Divergent) => {}
        (Verdict::Convergent, Verdict::Convergent) => {
            return done(ThresholdStatus::ConvergentThroughout, None, lo, hi, probes)
        }
        (Verdict::Divergent, _) => return done(ThresholdStatus::DivergentThroughout, None, lo, hi, probes),
        _ => return done(ThresholdStatus::Inconclusive, None, lo, hi, probes),
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match run(mid, &mut probes)? {
            Verdict::Convergent => lo = mid,
            Verdict::Divergent => hi = mid,
            Verdict::Inconclusive => return done(ThresholdStatus::Inconclusive, None, lo, hi, probes),
        }
    }
    done(ThresholdStatus::Found, Some(0.5 * (lo + hi)), lo, hi, probes)
}

/// Smallest lambda for which exp(lambda K_f) stops being integrable near the singular point.
pub fn threshold_lambda(
    f: &MapInstance,
    omega: &VolumeForm,
    task: &QuadratureTask,
    bracket: (f64, f64),
    tol: f64,
) -> Result<Threshold> {
    if !(bracket.0 > 0.0) {
        return Err(invalid("bracket", "lambda must stay positive"));
    }
    bisect_verdict(|lambda, t| exp_distortion_integral(f, omega, lambda, t), task, bracket, tol)
}

/// Largest a for which g log^a(e + g) is integrable near the singular point.
pub fn critical_orlicz_exponent(g: Field<'_>, task: &QuadratureTask, bracket: (f64, f64), tol: f64) -> Result<Threshold> {
    bisect_verdict(
        |a, t| {
            let ln_h = move |x: &[f64]| {
                let v = g(x);
                if v < 0.0 {
                    return f64::NAN;
                }
                v.ln() + a * (E + v).ln().ln()
            };
            integrate_log(&ln_h, t)
        },
        task,
        bracket,
        tol,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReverseHolder {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Average of star(f^* omega) over the concentric half ball.
    pub lhs: f64,
    /// (average over the ball of (K_f star)^s)^{1/s}.
    pub rhs: f64,
    pub ratio: f64,
    pub exponent: f64,
    pub converged: bool,
}

/// Ratios of the two sides of the weak reverse Hoelder inequality, s = n/(n+1).
pub fn reverse_holder_ratio(
    f: &MapInstance,
    omega: &VolumeForm,
    balls: &[(Vec<f64>, f64)],
    base: &QuadratureTask,
) -> Result<Vec<ReverseHolder>> {
    let n = f.domain_dim();
    let s = n as f64 / (n as f64 + 1.0);
    let ln_star = |x: &[f64]| star_pullback(f, omega, x).map_or(f64::NAN, |v| v.ln());
    let ln_rhs = |x: &[f64]| match distortion_at(f, omega, x) {
        Ok(d) if d.finite_distortion => s * (d.distortion.ln() + d.star_pullback.ln()),
        _ => f64::NAN,
    };
    balls
        .iter()
        .map(|(center, radius)| {
            if center.len() != n || !(*radius > 0.0) {
                return Err(invalid("balls", format!("need centers in R^{n} and positive radii, got {center:?}, {radius}")));
            }
            let task_for = |r: f64| QuadratureTask {
                region: Region::ball(center, r),
                singular_points: f.singular_points().to_vec(),
                ..base.clone()
            };
            let half = integrate_log(&ln_star, &task_for(0.5 * radius))?;
            let full = integrate_log(&ln_rhs, &task_for(*radius))?;
            let ln_lhs = half.ln_value - ball_volume(n, 0.5 * radius).ln();
            let ln_rhs_avg = (full.ln_value - ball_volume(n, *radius).ln()) / s;
            Ok(ReverseHolder {
                center: center.clone(),
                radius: *radius,
                lhs: ln_lhs.exp(),
                rhs: ln_rhs_avg.exp(),
                ratio: (ln_lhs - ln_rhs_avg).exp(),
                exponent: s,
                converged: half.verdict == Verdict::Convergent && full.verdict == Verdict::Convergent,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscReport {
    pub osc_ball: f64,
    pub osc_boundary: f64,
    pub tolerance: f64,
    pub violated: bool,
    /// Sample attaining the interior extreme that lies furthest outside the boundary range.
    pub witness: Vec<f64>,
    pub samples: usize,
}

/// Sampled check of osc_B u <= osc_{dB} u on a disc.
///
/// Interior samples are uniform in the disc plus a geometric ladder towards
/// each singular point of `u` inside it; points where u is undefined are skipped.
pub fn osc_check(
    u: &ScalarField,
    center: &[f64],
    radius: f64,
    boundary_samples: usize,
    interior_samples: usize,
    seed: u64,
) -> Result<OscReport> {
    if center.len() != 2 {
        return Err(Error::Dimension("oscillation checks run on discs in R^2".into()));
    }
    if !(radius > 0.0) || boundary_samples < 3 {
        return Err(invalid("osc", "need a positive radius and at least 3 boundary samples"));
    }
    let (cx, cy) = (center[0], center[1]);
    let range = |pts: &mut dyn Iterator<Item = [f64; 2]>| {
        let (mut lo, mut hi) = ((f64::INFINITY, vec![]), (f64::NEG_INFINITY, vec![]));
        let mut count = 0;
        for p in pts {
            if let Ok(v) = u.value(&p) {
                if v.is_finite() {
                    count += 1;
                    if v < lo.0 {
                        lo = (v, p.to_vec());
                    }
                    if v > hi.0 {
                        hi = (v, p.to_vec());
                    }
                }
            }
        }
        (lo, hi, count)
    };
    let mut boundary = (0..boundary_samples).map(|i| {
        let t = 2.0 * PI * i as f64 / boundary_samples as f64;
        [cx + radius * t.cos(), cy + radius * t.sin()]
    });
    let (blo, bhi, bcount) = range(&mut boundary);
    if bcount == 0 {
        return Err(Error::Evaluation(format!("{} is undefined on the whole sampled boundary", u.name())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut interior: Vec<[f64; 2]> = (0..interior_samples)
        .map(|_| {
            let r = radius * rng.random::<f64>().sqrt();
            let t = rng.random_range(0.0..2.0 * PI);
            [cx + r * t.cos(), cy + r * t.sin()]
        })
        .collect();
    for s in u.singular_points() {
        let d = (s[0] - cx).hypot(s[1] - cy);
        if d < radius {
            for j in 1..=40 {
                let rho = (radius - d) * 2f64.powi(-j);
                for k in 0..4 {
                    let t = 0.5 * PI * k as f64 + 0.3;
                    interior.push([s[0] + rho * t.cos(), s[1] + rho * t.sin()]);
                }
            }
        }
    }
    let (ilo, ihi, icount) = range(&mut interior.iter().copied());
    let lo = ilo.0.min(blo.0);
    let hi = ihi.0.max(bhi.0);
    let osc_boundary = bhi.0 - blo.0;
    let osc_ball = hi - lo;
    let tolerance = (1e-3 * osc_boundary).max(1e-9);
    let witness = if ihi.0 - bhi.0 >= blo.0 - ilo.0 { ihi.1 } else { ilo.1 };
    Ok(OscReport {
        osc_ball,
        osc_boundary,
        tolerance,
        violated: osc_ball > osc_boundary + tolerance,
        witness,
        samples: icount + bcount,
    })
}

/// sqrt(det(Df^T Df)) at x.
pub fn area_integrand(f: &MapInstance, x: &[f64]) -> Result<f64> {
    let j = f.jacobian(x)?;
    Ok(gram_det(&j).max(0.0).sqrt())
}

fn gram_det(j: &Mat) -> f64 {
    let n = j.cols;
    let mut g = Mat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            g[(a, b)] = (0..j.rows).map(|i| j[(i, a)] * j[(i, b)]).sum();
        }
    }
    g.det()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaCheck {
    /// Integral of the area integrand over the rectangle.
    pub lhs: f64,
    /// n-dimensional measure of the image parallelotope.
    pub rhs: f64,
    pub error: f64,
}

/// Area formula for an injective affine map on the rectangle [lo, hi].
pub fn area_check(f: &MapInstance, lo: &[f64], hi: &[f64]) -> Result<AreaCheck> {
    let MapKind::Affine { matrix, .. } = f.kind() else {
        return Err(Error::Unsupported(format!("area check needs an affine map, got {}", f.id())));
    };
    let task = QuadratureTask::new(Region::Rectangle { lo: lo.to_vec(), hi: hi.to_vec() });
    check_domain(f, &task)?;
    let mut edges = matrix.clone();
    for i in 0..edges.rows {
        for j in 0..edges.cols {
            edges[(i, j)] *= hi[j] - lo[j];
        }
    }
    let rhs = gram_det(&edges).max(0.0).sqrt();
    if rhs == 0.0 {
        return Err(Error::Unsupported("the affine map is not injective".into()));
    }
    let g = |x: &[f64]| area_integrand(f, x).unwrap_or(f64::NAN);
    let r = integrate(&g, &task)?;
    Ok(AreaCheck { lhs: r.value, rhs, error: r.error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_exp_integral() {
        let f = MapInstance::affine(Mat::identity(2), vec![0.0, 0.0]).unwrap();
        let omega = VolumeForm::standard(2, 2).unwrap();
        let r = exp_distortion_integral(&f, &omega, 1.0, &QuadratureTask::new(Region::ball(&[0.0, 0.0], 1.0)))
            .unwrap();
        assert!((r.value - PI * E).abs() < 1e-10);
    }

    #[test]
    fn area_of_tilted_plane() {
        let f = MapInstance::affine(Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]), vec![0.0; 3])
            .unwrap();
        let a = area_check(&f, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((a.lhs - 3f64.sqrt()).abs() < 1e-12 && (a.rhs - 3f64.sqrt()).abs() < 1e-12);
        assert!(area_check(&MapInstance::radial_log_e(), &[0.1, 0.1], &[0.2, 0.2]).is_err());
    }

    #[test]
    fn linear_field_has_no_violation() {
        let u = ScalarField::Linear { coeffs: vec![0.3, -1.2], offset: 2.0 };
        let r = osc_check(&u, &[0.1, 0.2], 0.7, 256, 4000, 7).unwrap();
        assert!(!r.violated, "{r:?}");
        assert!((r.osc_boundary - 2.0 * 0.7 * 0.3f64.hypot(1.2)).abs() < 1e-3);
    }

    #[test]
    fn loglog_violates_weak_monotonicity() {
        let r = osc_check(&ScalarField::LogLogThird, &[0.0, 0.0], 0.5, 256, 1000, 1).unwrap();
        assert!(r.violated && r.osc_boundary < 1e-12);
    }
}
