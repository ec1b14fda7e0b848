use std::f64::consts::{E, PI};
use std::time::Instant;

use fdcurve::analyzer::{
    critical_orlicz_exponent, exp_distortion_integral, integrate_log, reverse_holder_ratio, star_field,
    threshold_lambda, QuadratureTask, Region, ThresholdStatus, Verdict,
};
use fdcurve::forms::VolumeForm;
use fdcurve::linalg::Mat;
use fdcurve::maps::MapInstance;

fn disc() -> QuadratureTask {
    QuadratureTask::new(Region::ball(&[0.0, 0.0], 1.0)).with_singular(&[vec![0.0, 0.0]])
}

#[test]
fn calibration_family_matches_gamma_closed_form() {
    // int_{B(0,1)} r^-alpha log^beta(1/r) = 2 pi Gamma(beta+1) / (2-alpha)^(beta+1)
    for alpha in [0.0, 1.0, 1.5] {
        for (beta, gamma) in [(0.0, 1.0), (1.0, 1.0), (3.0, 6.0)] {
            let ln_g = move |p: &[f64]| {
                let r = p[0].hypot(p[1]);
                -alpha * r.ln() + if beta == 0.0 { 0.0 } else { beta * (-r.ln()).ln() }
            };
            let r = integrate_log(&ln_g, &disc()).unwrap();
            let exact = 2.0 * PI * gamma / (2.0 - alpha).powf(beta + 1.0);
            assert!((r.value - exact).abs() < 1e-6 * exact, "alpha {alpha} beta {beta}: {} vs {exact}", r.value);
            assert!(r.error >= (r.value - exact).abs() || (r.value - exact).abs() < 1e-12 * exact);
        }
    }
}

#[test]
fn radial_log_e_exp_integral() {
    let f = MapInstance::radial_log_e();
    let omega = VolumeForm::standard(2, 2).unwrap();
    let r = exp_distortion_integral(&f, &omega, 1.0, &disc()).unwrap();
    let exact = 2.0 * PI * E.exp();
    assert!((r.value - exact).abs() < 1e-7 * exact, "{} vs {exact}", r.value);
    let r = exp_distortion_integral(&f, &omega, 2.0, &disc()).unwrap();
    assert_eq!(r.verdict, Verdict::Divergent);
}

#[test]
fn thresholds_near_two() {
    let omega3 = VolumeForm::standard(2, 3).unwrap();
    let omega2 = VolumeForm::standard(2, 2).unwrap();
    let t0 = Instant::now();
    let thm2 = threshold_lambda(&MapInstance::thm2_curve(), &omega3, &disc(), (1.0, 3.0), 0.01).unwrap();
    eprintln!("thm2 {:?} in {:?}", thm2.estimate, t0.elapsed());
    let lam = thm2.estimate.unwrap();
    assert!((lam - 2.0).abs() <= 0.1);
    let radial = threshold_lambda(&MapInstance::radial_log_e(), &omega2, &disc(), (1.0, 3.0), 0.01).unwrap();
    assert!((radial.estimate.unwrap() - 2.0).abs() <= 0.1);
    let id = MapInstance::affine(Mat::identity(2), vec![0.0, 0.0]).unwrap();
    let none = threshold_lambda(&id, &omega2, &disc(), (1.0, 3.0), 0.01).unwrap();
    assert_eq!(none.status, ThresholdStatus::ConvergentThroughout);
}

#[test]
fn critical_exponent_of_jacobians() {
    let omega = VolumeForm::standard(2, 2).unwrap();
    for f in [MapInstance::radial_log_e(), MapInstance::radial_log_1()] {
        let g = star_field(&f, &omega);
        let t0 = Instant::now();
        let a = critical_orlicz_exponent(&g, &disc(), (0.5, 4.0), 0.01).unwrap();
        eprintln!("{} a* = {:?} in {:?}", f.id(), a.estimate, t0.elapsed());
        assert!((a.estimate.unwrap() - 2.0).abs() <= 0.2);
    }
    let one = |_: &[f64]| 1.0;
    let a = critical_orlicz_exponent(&one, &disc(), (0.5, 4.0), 0.01).unwrap();
    assert_eq!(a.status, ThresholdStatus::ConvergentThroughout);
}

#[test]
fn reverse_holder_bounded_across_octaves() {
    let omega = VolumeForm::standard(2, 2).unwrap();
    let balls: Vec<(Vec<f64>, f64)> = (1..=4).map(|k| (vec![0.0, 0.0], 2f64.powi(-k))).collect();
    let base = QuadratureTask::new(Region::ball(&[0.0, 0.0], 1.0));
    let rh = reverse_holder_ratio(&MapInstance::radial_log_e(), &omega, &balls, &base).unwrap();
    let ratios: Vec<f64> = rh.iter().map(|r| r.ratio).collect();
    eprintln!("{ratios:?}");
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
    assert!(hi / lo < 10.0);
    let id = MapInstance::affine(Mat::identity(2), vec![0.0, 0.0]).unwrap();
    let rh = reverse_holder_ratio(&id, &omega, &[(vec![0.3, -0.2], 0.5)], &base).unwrap();
    assert!((rh[0].ratio - 1.0).abs() < 1e-4);
}
