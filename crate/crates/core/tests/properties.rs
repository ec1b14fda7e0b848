use std::f64::consts::TAU;
use std::sync::{Arc, OnceLock};

use fdcurve::bump::BumpTables;
use fdcurve::forms::{star_pullback, ComassSettings, VolumeForm};
use fdcurve::linalg::Mat;
use fdcurve::lusin::{LusinConstruction, LusinParams, LusinPart};
use fdcurve::maps::{distortion_at, operator_norm, MapInstance};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn mat(rows: usize, cols: usize, data: &[f64]) -> Mat {
    Mat { rows, cols, data: data.to_vec() }
}

fn to_na(m: &Mat) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows, m.cols, &m.data)
}

fn lusin() -> Arc<LusinConstruction> {
    static C: OnceLock<Arc<LusinConstruction>> = OnceLock::new();
    C.get_or_init(|| Arc::new(LusinConstruction::build(
        LusinParams { depth: 3, ..Default::default() },
        Arc::new(BumpTables::build(2, 12, 1e-12).unwrap()),
    )
    .unwrap()))
        .clone()
}

fn two_form_r4() -> VolumeForm {
    VolumeForm::constant(4, &[(vec![1, 2], 1.0), (vec![3, 4], 0.5), (vec![1, 3], -0.25)]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn form_is_linear_in_each_column(
        v in prop::collection::vec(-2.0f64..2.0, 8),
        w in prop::collection::vec(-2.0f64..2.0, 4),
        s in -3.0f64..3.0,
    ) {
        let omega = two_form_r4();
        let c = omega.coefficients_at(&[0.0; 4]);
        let a = mat(4, 2, &v);
        let mut b = a.clone();
        let mut sum = a.clone();
        for i in 0..4 {
            b[(i, 0)] = w[i];
            sum[(i, 0)] = a[(i, 0)] + s * w[i];
        }
        let lhs = omega.evaluate(&c, &sum);
        let rhs = omega.evaluate(&c, &a) + s * omega.evaluate(&c, &b);
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
        // alternating
        let mut swapped = a.clone();
        for i in 0..4 {
            swapped[(i, 0)] = a[(i, 1)];
            swapped[(i, 1)] = a[(i, 0)];
        }
        prop_assert!((omega.evaluate(&c, &swapped) + omega.evaluate(&c, &a)).abs() < 1e-12);
    }

    #[test]
    fn standard_form_is_the_leading_minor(v in prop::collection::vec(-2.0f64..2.0, 15)) {
        let omega = VolumeForm::standard(3, 5).unwrap();
        let a = mat(5, 3, &v);
        let got = omega.evaluate(&omega.coefficients_at(&[0.0; 5]), &a);
        let minor = to_na(&a).rows(0, 3).into_owned().determinant();
        prop_assert!((got - minor).abs() < 1e-10 * (1.0 + minor.abs()));
    }

    #[test]
    fn comass_is_homogeneous(c in prop::sample::select(vec![-3.0, -0.5, 0.25, 2.0, 7.0])) {
        let omega = two_form_r4();
        let s = ComassSettings::default();
        let base = omega.comass(&[0.0; 4], &s);
        let scaled = omega.scaled(c).unwrap().comass(&[0.0; 4], &s);
        prop_assert!(base.converged && scaled.converged);
        prop_assert!((scaled.value - c.abs() * base.value).abs() < 1e-6 * scaled.value);
        // the comass dominates every simple evaluation and sits below the l1 norm
        prop_assert!(base.value <= 1.75 + 1e-9 && base.value >= 1.0 - 1e-9);
    }

    #[test]
    fn operator_norm_matches_svd(rows in 1usize..6, cols in 1usize..4, seed in prop::collection::vec(-5.0f64..5.0, 24)) {
        prop_assume!(cols <= rows);
        let a = mat(rows, cols, &seed[..rows * cols]);
        let sv = to_na(&a).singular_values();
        let top = sv.iter().cloned().fold(0.0, f64::max);
        let got = operator_norm(&a);
        prop_assert!((got - top).abs() <= 1e-9 * (1.0 + top), "{got} vs {top}");
        prop_assert!(got <= a.frobenius() * (1.0 + 1e-12));
        prop_assert!(got * (cols as f64).sqrt() >= a.frobenius() * (1.0 - 1e-12));
    }

    #[test]
    fn catalog_jacobians_match_finite_differences(r in 0.05f64..0.95, th in 0.0f64..TAU) {
        let x = [r * th.cos(), r * th.sin()];
        for f in [MapInstance::radial_log_e(), MapInstance::radial_log_1(), MapInstance::thm2_curve()] {
            let j = f.jacobian(&x).unwrap();
            let fd = f.jacobian_fd(&x).unwrap();
            for (a, b) in j.data.iter().zip(&fd.data) {
                prop_assert!((a - b).abs() < 1e-5 * (1.0 + a.abs()), "{}: {a} vs {b}", f.id());
            }
        }
    }

    #[test]
    fn radial_distortion_is_rotation_invariant(r in 0.001f64..0.999, th in 0.0f64..TAU, phi in 0.0f64..TAU) {
        let f = MapInstance::radial_log_e();
        let omega = VolumeForm::standard(2, 2).unwrap();
        let x = [r * th.cos(), r * th.sin()];
        let y = [r * (th + phi).cos(), r * (th + phi).sin()];
        let a = distortion_at(&f, &omega, &x).unwrap();
        let b = distortion_at(&f, &omega, &y).unwrap();
        prop_assert!((a.distortion - b.distortion).abs() < 1e-9 * a.distortion);
        let k = a.reference_distortion.unwrap();
        prop_assert!((a.distortion - k).abs() < 1e-9 * k);
        let j = star_pullback(&f, &omega, &x).unwrap();
        prop_assert!(j > 0.0);
    }

    #[test]
    fn thm2_reference_is_consistent(r in 1e-6f64..1.0, th in 0.0f64..TAU) {
        let f = MapInstance::thm2_curve();
        let omega = VolumeForm::standard(2, 3).unwrap();
        let s = distortion_at(&f, &omega, &[r * th.cos(), r * th.sin()]).unwrap();
        prop_assert_eq!(s.reference_consistent, Some(true));
        prop_assert!(s.finite_distortion);
    }

    #[test]
    fn lusin_g_stays_in_the_square(x in -0.2f64..1.2, y in -0.2f64..0.2) {
        let g = MapInstance::lusin(lusin(), LusinPart::G);
        let v = g.value(&[x, y]).unwrap();
        prop_assert!(v[0].abs() <= 1.0 && v[1].abs() <= 1.0);
        if x.hypot(y) > 1.5 || !(-0.1..=1.1).contains(&x) {
            prop_assert_eq!(v, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn lusin_f_preserves_the_axis_and_order(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let f = MapInstance::lusin(lusin(), LusinPart::F);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let p = f.value(&[lo, 0.0]).unwrap();
        let q = f.value(&[hi, 0.0]).unwrap();
        prop_assert!(p[1] == 0.0 && q[1] == 0.0);
        prop_assert!(p[0] <= q[0]);
    }
}
