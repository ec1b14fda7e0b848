//! Acceptance suite: one PASS/FAIL line per criterion.  Exits nonzero when any
//! criterion fails.

use std::f64::consts::{E, PI};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use fdcurve::analyzer::{
    integrate_log, modulus_tail, osc_check, reverse_holder_ratio, QuadratureTask, Region,
};
use fdcurve::bump::{ratio_test_threshold, BumpTables};
use fdcurve::forms::VolumeForm;
use fdcurve::inequalities::{sweep, InequalityGrid};
use fdcurve::linalg::Mat;
use fdcurve::lusin::{lusin_evidence, EvidenceSpec, LusinConstruction, LusinParams};
use fdcurve::maps::{distortion_at, MapInstance, ScalarField};
use fdcurve::{Error, Radius};
use fdcurve_cli::{run, RunConfig, RunOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Verdict {
    pass: bool,
    summary: String,
    details: Vec<String>,
}

impl Verdict {
    fn new(pass: bool, summary: impl Into<String>) -> Verdict {
        Verdict { pass, summary: summary.into(), details: vec![] }
    }
}

type Outcome = Result<Verdict, String>;

fn main() -> ExitCode {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("threshold reproduction", c1_threshold),
        ("closed-form annulus integral", c2_closed_form),
        ("critical Orlicz exponent", c3_exponent),
        ("closed-form distortion", c4_closed_forms),
        ("bump construction", c5_bump),
        ("Lusin construction evidence", c6_lusin),
        ("monotonicity failure", c7_osc),
        ("inequality suites", c8_inequalities),
        ("reverse Hoelder", c9_reverse_holder),
        ("modulus tail", c10_modulus),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = f().unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
        let secs = start.elapsed().as_secs_f64();
        println!("{} {:>2} {name}: {} [{secs:.1}s]", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.summary);
        for d in &v.details {
            println!("        {d}");
        }
        failed += usize::from(!v.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("pool").install(f)
}

/// Run a one-task config through the CLI library and return its report record.
fn cli_task(config: &str) -> Result<Value, String> {
    let cfg = RunConfig::parse(config).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = run(&cfg, &RunOptions { out: dir.path().into(), seed: 1 }).map_err(|e| e.to_string())?;
    serde_json::to_value(&report.tasks[0]).map_err(|e| e.to_string())
}

fn c1_threshold() -> Outcome {
    let start = Instant::now();
    let rec = single_threaded(|| cli_task("[map]\nid = \"thm2_curve\"\n[[task]]\nkind = \"threshold\"\n"))?;
    let secs = start.elapsed().as_secs_f64();
    let lam = rec["headline"]["lambda_star"].as_f64().ok_or("no estimate")?;
    Ok(Verdict::new(
        (1.9..=2.1).contains(&lam) && secs < 60.0,
        format!("lambda* = {lam:.4} in [1.9, 2.1], {secs:.1} s single-threaded (< 60 s)"),
    ))
}

fn c2_closed_form() -> Outcome {
    let bump = Arc::new(BumpTables::build(2, 12, 1e-12).map_err(|e| e.to_string())?);
    let mut v = Verdict::new(true, String::new());
    let mut worst: f64 = 0.0;
    for lambda in [1.0, 1.5] {
        let c = LusinConstruction::build(LusinParams { lambda, epsilon: 0.25, depth: 2 }, bump.clone())
            .map_err(|e| e.to_string())?;
        let l = c.level(0);
        let (big_r, small_r) = (l.outer.value(), l.inner.value());
        let exact =
            2.0 * PI * lambda.exp() * (big_r.powf(2.0 - lambda) - small_r.powf(2.0 - lambda)) / (2.0 - lambda);
        let ln_g = move |p: &[f64]| {
            let rho = p[0].hypot(p[1]);
            if rho < small_r {
                f64::NEG_INFINITY
            } else {
                lambda * (1.0 - rho.ln())
            }
        };
        let region = if small_r > 0.0 {
            Region::Annulus { center: vec![0.0, 0.0], inner: small_r, outer: big_r }
        } else {
            Region::ball(&[0.0, 0.0], big_r)
        };
        let task = QuadratureTask::new(region).with_singular(&[vec![0.0, 0.0]]);
        let q = integrate_log(&ln_g, &task).map_err(|e| e.to_string())?;
        let rel = (q.value - exact).abs() / exact;
        worst = worst.max(rel);
        v.pass &= rel < 1e-6;
        v.details.push(format!("lambda {lambda}: R = {big_r:.6e}, r = {small_r:.3e}, closed {exact:.12e}, quadrature {:.12e}", q.value));
    }
    v.summary = format!("max relative difference {worst:.2e} (< 1e-6)");
    Ok(v)
}

fn c3_exponent() -> Outcome {
    let rec = cli_task("[map]\nid = \"radial_log_e\"\n[[task]]\nkind = \"higher-int\"\n")?;
    let a = rec["headline"]["a_star"].as_f64().ok_or("no estimate")?;
    Ok(Verdict::new((1.8..=2.2).contains(&a), format!("a* = {a:.4} in [1.8, 2.2]")))
}

fn c4_closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut disc = || loop {
        let p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let r: f64 = p[0] * p[0] + p[1] * p[1];
        if r < 1.0 && r > 0.0 {
            break p;
        }
    };
    let f = MapInstance::radial_log_e();
    let omega = VolumeForm::standard(2, 2).map_err(|e| e.to_string())?;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let z = disc();
        let rho = z[0].hypot(z[1]);
        let l = E - rho.ln();
        let s = distortion_at(&f, &omega, &z).map_err(|e| e.to_string())?;
        worst = worst
            .max(rel(s.operator_norm, 1.0 / (rho * l)))
            .max(rel(s.star_pullback, 1.0 / (rho * rho * l * l * l)))
            .max(rel(s.distortion, l));
    }
    let g = MapInstance::thm2_curve();
    let omega3 = VolumeForm::standard(2, 3).map_err(|e| e.to_string())?;
    let (mut worst_k, mut consistent): (f64, bool) = (0.0, true);
    for _ in 0..1000 {
        let z = disc();
        let l = E - z[0].hypot(z[1]).ln();
        let k = (1.0 / l.ln() + 1.0).powi(2) * l;
        let s = distortion_at(&g, &omega3, &z).map_err(|e| e.to_string())?;
        worst_k = worst_k.max(rel(s.reference_distortion.ok_or("no reference K")?, k));
        consistent &= s.reference_consistent == Some(true) && s.distortion <= k * (1.0 + 1e-9);
    }
    Ok(Verdict::new(
        worst < 1e-8 && worst_k < 1e-6 && consistent,
        format!(
            "radial_log_e |DF|, J_F, K' max rel {worst:.2e} (< 1e-8); thm2_curve K max rel {worst_k:.2e} (< 1e-6), \
             Jacobian-block consistent: {consistent}"
        ),
    ))
}

fn c5_bump() -> Outcome {
    let b = BumpTables::build(2, 12, 1e-12).map_err(|e| e.to_string())?;
    let err = |e: Error| e.to_string();
    let mut jump: f64 = 0.0;
    for k in 1..b.depth() {
        let seam = b.a(k + 1);
        let from_above = b.u_in_shell(k as u32, seam).map_err(err)?;
        let from_below = b.u_in_shell(k as u32 + 1, seam).map_err(err)?;
        jump = jump.max((from_above - from_below).abs());
    }
    let energies = b.orlicz_energy().map_err(err)?;
    let energy_ok = energies.iter().all(|e| e.energy <= 2.0 * PI * 0.5f64.powi(e.shell as i32) * 1.01);
    let r0 = ratio_test_threshold(4.0).ok_or("no smallness threshold")?;
    let (top, bottom) = (r0.level(), b.a(b.depth() + 1).level());
    let mut margin: f64 = 0.0;
    let m = 4000;
    for i in 0..=m {
        let r = Radius::from_level(top + (bottom - top) * i as f64 / m as f64);
        margin = margin.max(b.gradient_bound_margin(r).map_err(err)?);
    }
    let mut v = Verdict::new(
        jump <= 1e-8 && energy_ok && margin <= 1.0,
        format!("seam jump {jump:.2e} (<= 1e-8), energies within 1.01 bound: {energy_ok}, max gradient margin {margin:.4} (<= 1)"),
    );
    v.details.push(format!(
        "energies: {}",
        energies.iter().map(|e| format!("{:.4}", e.energy)).collect::<Vec<_>>().join(" ")
    ));
    v.details.push(format!("smallness threshold r0 = exp(-{:.9}), {} radii sampled below it", r0.neg_log(), m + 1));
    Ok(v)
}

fn c6_lusin() -> Outcome {
    let start = Instant::now();
    let bump = Arc::new(BumpTables::build(2, 12, 1e-12).map_err(|e| e.to_string())?);
    let c = LusinConstruction::build(LusinParams { lambda: 1.0, epsilon: 0.25, depth: 5 }, bump)
        .map_err(|e| e.to_string())?;
    let ev = lusin_evidence(&c, &EvidenceSpec::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let d = &ev.distortion;
    let mut v = Verdict::new(
        ev.centers_ok() && ev.steps_within_d() && ev.distortion_ok() && d.samples >= 10_000 && secs < 300.0,
        format!(
            "centres {}/{}, sup |G_(n+1) - G_n| <= d_n: {}, distortion violations {}/{}, {secs:.1} s (< 300 s)",
            ev.attained_centers,
            ev.expected_centers,
            ev.steps_within_d(),
            d.violations,
            d.samples
        ),
    );
    for s in &ev.steps {
        v.details.push(format!(
            "n = {}: sup {:.6e}, d_n {:.6e} ({}), centre distance {:.6e} ({})",
            s.n,
            s.sup_diff,
            s.d,
            if s.within_d { "ok" } else { "exceeded" },
            s.step,
            if s.within_step { "ok" } else { "exceeded" }
        ));
    }
    if !ev.steps_within_d() {
        v.details.push(
            "G_(n+1) must reach the centres w_(i,n) at distance sqrt2 2^(-n-1) = 2 d_n from the parent centre, \
             so the d_n bound cannot hold together with the attained centres"
                .into(),
        );
    }
    v.details.push(format!("max |Df| / sqrt(K_F J_F) = {:.6} (<= 1 + eps = 1.25)", d.max_ratio));
    Ok(v)
}

fn c7_osc() -> Outcome {
    let third = osc_check(&ScalarField::LogLogThird, &[0.0, 0.0], 0.5, 720, 20_000, 7).map_err(|e| e.to_string())?;
    let affine = MapInstance::affine(Mat::from_rows(&[vec![2.0, -1.0], vec![0.5, 3.0]]), vec![1.0, -2.0])
        .map_err(|e| e.to_string())?;
    let affine = Arc::new(affine);
    let mut coords_ok = true;
    for index in 0..2 {
        let u = ScalarField::Coordinate { map: affine.clone(), index };
        coords_ok &= !osc_check(&u, &[0.2, -0.1], 0.5, 720, 20_000, 7).map_err(|e| e.to_string())?.violated;
    }
    Ok(Verdict::new(
        third.violated && coords_ok,
        format!(
            "f3 on B(0, 1/2): violated = {} (osc {:.4} vs boundary {:.2e}); affine coordinates not violated: {coords_ok}",
            third.violated, third.osc_ball, third.osc_boundary
        ),
    ))
}

fn c8_inequalities() -> Outcome {
    let grid = InequalityGrid::default();
    let reports = sweep(&grid, 8).map_err(|e| e.to_string())?;
    let violations: usize = reports.iter().map(|r| r.violations).sum();
    let min_samples = reports.iter().map(|r| r.samples).min().unwrap_or(0);
    let worst = reports.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    let mut v = Verdict::new(
        violations == 0 && min_samples >= 100_000,
        format!("{violations} violations over {} grid points, {min_samples} samples each", reports.len()),
    );
    let mut suites = std::collections::BTreeMap::new();
    for r in &reports {
        *suites.entry(r.name.as_str()).or_insert(0) += 1;
    }
    v.details.push(format!(
        "suites: {}",
        suites.iter().map(|(n, k)| format!("{n} ({k} points)")).collect::<Vec<_>>().join(", ")
    ));
    v.details.push(format!("largest LHS/RHS {worst:.4}"));
    Ok(v)
}

fn c9_reverse_holder() -> Outcome {
    let omega = VolumeForm::standard(2, 2).map_err(|e| e.to_string())?;
    let balls: Vec<(Vec<f64>, f64)> = (1..=4).map(|k| (vec![0.0, 0.0], 0.5f64.powi(k))).collect();
    let base = QuadratureTask::new(Region::ball(&[0.0, 0.0], 1.0));
    let rh = reverse_holder_ratio(&MapInstance::radial_log_e(), &omega, &balls, &base).map_err(|e| e.to_string())?;
    let (lo, hi) = rh.iter().fold((f64::INFINITY, 0f64), |(a, b), r| (a.min(r.ratio), b.max(r.ratio)));
    let id = MapInstance::affine(Mat::identity(2), vec![0.0, 0.0]).map_err(|e| e.to_string())?;
    let one = reverse_holder_ratio(&id, &omega, &[(vec![0.3, -0.2], 0.5)], &base).map_err(|e| e.to_string())?[0].ratio;
    Ok(Verdict::new(
        hi / lo < 10.0 && (one - 1.0).abs() <= 1e-4,
        format!("radial_log_e max/min over radii 1/2..1/16 = {:.4} (< 10); identity {one:.8}", hi / lo),
    ))
}

fn c10_modulus() -> Outcome {
    let mut values = vec![];
    for l in [1e2, 1e3, 1e4] {
        values.push(modulus_tail(2, 3.0, l).map_err(|e| e.to_string())?.value);
    }
    let ok = values.iter().all(|v| v.is_finite()) && values.windows(2).all(|w| w[1] < w[0]);
    let divergent = matches!(modulus_tail(2, 2.0, 1e2), Err(Error::Divergent(_)));
    Ok(Verdict::new(
        ok && divergent,
        format!(
            "tail(L) = {:.6}, {:.6}, {:.6} finite and decreasing: {ok}; a = 2 raises divergence: {divergent}",
            values[0], values[1], values[2]
        ),
    ))
}
