use std::sync::Arc;

use fdcurve::analyzer::{
    critical_orlicz_exponent, exp_distortion_integral, modulus_tail, osc_check, reverse_holder_ratio, star_field,
    threshold_lambda, QuadratureTask, Region, Threshold,
};
use fdcurve::bump::{ratio_test_threshold, BumpTables};
use fdcurve::inequalities::{sweep, InequalityGrid};
use fdcurve::lusin::{lusin_evidence, EvidenceSpec, LusinConstruction, LusinParams, LusinPart};
use fdcurve::maps::{condition_d_scan, distortion_at, DScanSpec, MapInstance, ScalarField};
use fdcurve::Radius;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::*;
use crate::setup::Context;
use crate::{real, CliError, Outcome, Table};

pub(crate) fn run_task(t: &TaskConfig, ctx: &Context, seed: u64) -> Result<Outcome, CliError> {
    let scope = format!("task.{}", t.name());
    let core = |e| CliError::from_core(e, &scope);
    match t {
        TaskConfig::Threshold(c) => threshold(c, ctx).map_err(core),
        TaskConfig::ExpIntegral(c) => exp_integral(c, ctx).map_err(core),
        TaskConfig::HigherInt(c) => higher_int(c, ctx).map_err(core),
        TaskConfig::Distortion(c) => distortion(c, ctx, seed).map_err(core),
        TaskConfig::ReverseHolder(c) => reverse_holder(c, ctx).map_err(core),
        TaskConfig::Osc(c) => osc(c, ctx, seed, &scope),
        TaskConfig::ModulusTail(c) => tail(c).map_err(core),
        TaskConfig::ConstructU(c) => construct_u(c).map_err(core),
        TaskConfig::ConstructLusin(c) => construct_lusin(c, seed).map_err(core),
        TaskConfig::VerifyInequalities(c) => inequalities(c, seed).map_err(core),
        TaskConfig::DScan(c) => d_scan(c, ctx).map_err(core),
    }
}

type Res = fdcurve::Result<Outcome>;

fn quad_task(f: &MapInstance, region: &RegionConfig, rel_tol: f64, shells: usize) -> fdcurve::Result<QuadratureTask> {
    let region = region.to_region();
    if region.dim() != f.domain_dim() {
        return Err(fdcurve::Error::InvalidParameter {
            name: "region".into(),
            reason: format!("region in R^{} but {} is defined on R^{}", region.dim(), f.id(), f.domain_dim()),
        });
    }
    let mut task = QuadratureTask::new(region).with_singular(f.singular_points());
    task.rel_tol = rel_tol;
    task.shells = shells;
    task.validate()?;
    Ok(task)
}

fn bisection_outcome(th: &Threshold, key: &str, tol: f64, task: &QuadratureTask) -> Outcome {
    let mut o = Outcome::default();
    let mut t = Table::new(&["parameter", "verdict", "local_exponent", "shells"]);
    for p in &th.probes {
        t.push(vec![real(p.parameter), verdict(p.verdict), real(p.local_exponent), p.shells.to_string()]);
    }
    o.tables.push((String::new(), t));
    o.headline(key, th.estimate);
    o.headline("status", th.status);
    o.headline("bracket", th.bracket);
    o.tolerance("bisection", tol);
    o.tolerance("rel_tol", task.rel_tol);
    o.tolerance("shells", task.shells);
    o
}

fn verdict(v: fdcurve::analyzer::Verdict) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn threshold(c: &ThresholdTask, ctx: &Context) -> Res {
    let task = quad_task(ctx.map(), &c.region, c.rel_tol, c.shells)?;
    let th = threshold_lambda(ctx.map(), ctx.form(), &task, (c.bracket[0], c.bracket[1]), c.tol)?;
    Ok(bisection_outcome(&th, "lambda_star", c.tol, &task))
}

fn higher_int(c: &HigherIntTask, ctx: &Context) -> Res {
    let task = quad_task(ctx.map(), &c.region, c.rel_tol, c.shells)?;
    let g = star_field(ctx.map(), ctx.form());
    let th = critical_orlicz_exponent(&g, &task, (c.bracket[0], c.bracket[1]), c.tol)?;
    Ok(bisection_outcome(&th, "a_star", c.tol, &task))
}

fn exp_integral(c: &ExpIntegralTask, ctx: &Context) -> Res {
    let task = quad_task(ctx.map(), &c.region, c.rel_tol, c.shells)?;
    let r = exp_distortion_integral(ctx.map(), ctx.form(), c.lambda, &task)?;
    let mut o = Outcome::default();
    let mut t = Table::new(&["shell", "r_outer", "ln_integral"]);
    if let Some(p) = &r.profile {
        for (k, v) in p.ln_values.iter().enumerate() {
            t.push(vec![k.to_string(), real(p.radii[k]), real(*v)]);
        }
        o.headline("local_exponent", p.local_exponent);
    }
    o.tables.push((String::new(), t));
    o.headline("value", r.value);
    o.headline("ln_value", r.ln_value);
    o.headline("error", r.error);
    o.headline("verdict", r.verdict);
    o.headline("converged", r.converged);
    o.tolerance("rel_tol", c.rel_tol);
    o.tolerance("shells", c.shells);
    Ok(o)
}

fn sample_region(region: &Region, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match region {
        Region::Rectangle { lo, hi } => lo.iter().zip(hi).map(|(a, b)| rng.random_range(*a..*b)).collect(),
        Region::Ball { center, radius } => loop {
            let p: Vec<f64> = center.iter().map(|c| c + radius * rng.random_range(-1.0..1.0)).collect();
            if region.contains(&p) {
                break p;
            }
        },
        Region::Annulus { center, outer, .. } => loop {
            let p: Vec<f64> = center.iter().map(|c| c + outer * rng.random_range(-1.0..1.0)).collect();
            if region.contains(&p) {
                break p;
            }
        },
    }
}

fn distortion(c: &DistortionTask, ctx: &Context, seed: u64) -> Res {
    let f = ctx.map();
    let region = quad_task(f, &c.region, 1e-9, 400)?.region;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = f.domain_dim();
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    for h in ["star_pullback", "operator_norm", "comass", "distortion", "finite", "reference"] {
        header.push(h.into());
    }
    let mut t = Table { header, rows: vec![] };
    let (mut max_k, mut max_dev, mut above_ref, mut inconsistent, mut infinite) = (1f64, 0f64, 0usize, 0usize, 0usize);
    for _ in 0..c.samples {
        let x = sample_region(&region, &mut rng);
        let s = distortion_at(f, ctx.form(), &x)?;
        let mut row: Vec<String> = x.iter().map(|v| real(*v)).collect();
        row.extend([
            real(s.star_pullback),
            real(s.operator_norm),
            real(s.comass_at_image),
            real(s.distortion),
            s.finite_distortion.to_string(),
            s.reference_distortion.map(real).unwrap_or_default(),
        ]);
        t.push(row);
        if !s.finite_distortion {
            infinite += 1;
            continue;
        }
        max_k = max_k.max(s.distortion);
        if let Some(k) = s.reference_distortion {
            max_dev = max_dev.max((s.distortion - k).abs() / k);
            if s.distortion > k * (1.0 + 1e-8) {
                above_ref += 1;
            }
        }
        if s.reference_consistent == Some(false) {
            inconsistent += 1;
        }
    }
    let mut o = Outcome::default();
    o.tables.push((String::new(), t));
    o.headline("max_distortion", max_k);
    o.headline("max_rel_deviation_from_reference", max_dev);
    o.headline("infinite_distortion_points", infinite);
    o.check("distortion_below_reference", above_ref == 0, format!("{above_ref} points above the closed form"));
    o.check(
        "reference_consistent",
        inconsistent == 0,
        format!("{inconsistent} points where the closed form disagrees with the Jacobian blocks"),
    );
    o.tolerance("reference_rel", 1e-8);
    o.tolerance("samples", c.samples);
    Ok(o)
}

fn reverse_holder(c: &ReverseHolderTask, ctx: &Context) -> Res {
    let f = ctx.map();
    let balls: Vec<(Vec<f64>, f64)> = c.radii.iter().map(|r| (c.center.clone(), *r)).collect();
    let base = QuadratureTask::new(Region::ball(&c.center, 1.0));
    let rh = reverse_holder_ratio(f, ctx.form(), &balls, &base)?;
    let mut t = Table::new(&["radius", "lhs", "rhs", "ratio", "exponent", "converged"]);
    for r in &rh {
        t.push(vec![real(r.radius), real(r.lhs), real(r.rhs), real(r.ratio), real(r.exponent), r.converged.to_string()]);
    }
    let (lo, hi) = rh.iter().fold((f64::INFINITY, 0f64), |(a, b), r| (a.min(r.ratio), b.max(r.ratio)));
    let mut o = Outcome::default();
    o.tables.push((String::new(), t));
    o.headline("min_ratio", lo);
    o.headline("max_ratio", hi);
    o.headline("spread", hi / lo);
    o.check("converged", rh.iter().all(|r| r.converged), "every ball integral converged");
    o.tolerance("rel_tol", base.rel_tol);
    Ok(o)
}

fn osc(c: &OscTask, ctx: &Context, seed: u64, scope: &str) -> Result<Outcome, CliError> {
    let core = |e| CliError::from_core(e, scope);
    let field = match c.field.as_str() {
        "loglog_third" => ScalarField::LogLogThird,
        "orlicz_bump_u" => ScalarField::Bump(Arc::new(BumpTables::build(2, c.bump_depth, 1e-12).map_err(core)?)),
        "coordinate" => {
            let map = ctx.map();
            let index = c.index.unwrap_or(1);
            if index > map.ambient_dim() {
                return Err(CliError::config(
                    &format!("{scope}.index"),
                    format!("{} has {} components, got index {index}", map.id(), map.ambient_dim()),
                ));
            }
            if map.domain_dim() != 2 {
                return Err(CliError::config("map", "oscillation checks need a map on R^2"));
            }
            ScalarField::Coordinate { map: Arc::new(map.clone()), index: index - 1 }
        }
        _ => ScalarField::Linear { coeffs: c.coeffs.clone().unwrap_or_default(), offset: c.offset.unwrap_or(0.0) },
    };
    let r = osc_check(&field, &c.center, c.radius, c.boundary_samples, c.interior_samples, seed).map_err(core)?;
    let mut t = Table::new(&["field", "osc_ball", "osc_boundary", "tolerance", "violated", "witness_x", "witness_y", "samples"]);
    let w = |i: usize| r.witness.get(i).copied().map(real).unwrap_or_default();
    t.push(vec![
        field.name(),
        real(r.osc_ball),
        real(r.osc_boundary),
        real(r.tolerance),
        r.violated.to_string(),
        w(0),
        w(1),
        r.samples.to_string(),
    ]);
    let mut o = Outcome::default();
    o.tables.push((String::new(), t));
    o.headline("field", field.name());
    o.headline("violated", r.violated);
    o.headline("osc_ball", r.osc_ball);
    o.headline("osc_boundary", r.osc_boundary);
    o.tolerance("osc", r.tolerance);
    Ok(o)
}

fn tail(c: &ModulusTailTask) -> Res {
    let mut t = Table::new(&["lower", "value", "head", "remainder", "error", "converged"]);
    let mut values = vec![];
    for &l in &c.lower {
        let m = modulus_tail(c.n, c.a, l)?;
        t.push(vec![real(l), real(m.value), real(m.head), real(m.remainder), real(m.error), m.converged.to_string()]);
        values.push((l, m.value));
    }
    values.sort_by(|a, b| a.0.total_cmp(&b.0));
    let decreasing = values.windows(2).all(|w| w[1].1 < w[0].1);
    let mut o = Outcome::default();
    o.tables.push((String::new(), t));
    o.headline("values", values.iter().map(|v| v.1).collect::<Vec<_>>());
    o.check("finite", values.iter().all(|v| v.1.is_finite()), "every tail is finite");
    o.check("decreasing_in_lower", decreasing, "tail strictly decreases as L grows");
    o.tolerance("rel", 1e-12);
    Ok(o)
}

fn construct_u(c: &ConstructUTask) -> Res {
    let b = BumpTables::build(c.n, c.depth, c.quad_tol)?;
    let energies = b.orlicz_energy()?;
    let mut t = Table::new(&[
        "shell",
        "a_level",
        "a_neg_log",
        "a_neg_loglog",
        "shell_integral",
        "energy",
        "energy_bound",
        "seam_jump",
    ]);
    let mut max_jump: f64 = 0.0;
    let mut energy_ok = true;
    for (k, e) in (1..=b.depth()).zip(&energies) {
        let a = b.a(k);
        let next = b.a(k + 1);
        let jump = (b.u_in_shell(k as u32, next)? - (k + 1) as f64).abs();
        max_jump = max_jump.max(jump);
        energy_ok &= e.energy <= e.bound * 1.01;
        t.push(vec![
            k.to_string(),
            real(a.level()),
            real(a.neg_log()),
            real(a.neg_loglog()),
            real(b.shell_integrals[k - 1]),
            real(e.energy),
            real(e.bound),
            real(jump),
        ]);
    }
    // The exact ratio test allows 2^{k+1}; shell 1 is the tightest.
    let threshold = ratio_test_threshold(4.0);
    let mut grad = Table::new(&["level", "neg_log", "shell", "gradient_margin"]);
    let mut worst: f64 = 0.0;
    if let Some(r0) = threshold {
        let top = r0.level();
        let bottom = b.a(b.depth() + 1).level();
        let m = c.radius_samples;
        for i in 0..m {
            let r = Radius::from_level(top + (bottom - top) * i as f64 / (m - 1) as f64);
            let g = b.gradient_bound_margin(r)?;
            worst = worst.max(g);
            grad.push(vec![real(r.level()), real(r.neg_log()), b.shell_of(r)?.to_string(), real(g)]);
        }
    }
    let mut o = Outcome::default();
    o.tables.push((String::new(), t));
    o.tables.push(("gradient".into(), grad));
    o.headline("depth", b.depth());
    o.headline("max_seam_jump", max_jump);
    o.headline("energies", energies.iter().map(|e| e.energy).collect::<Vec<_>>());
    o.headline("smallness_threshold_neg_log", threshold.map(|r| r.neg_log()));
    o.headline("unscaled_threshold_shell1_neg_log", ratio_test_threshold(1.0).map(|r| r.neg_log()));
    o.headline("max_gradient_margin", worst);
    o.check("seams_continuous", max_jump <= 1e-8, format!("max |u jump| = {max_jump:.3e}"));
    o.check("energy_bound", energy_ok, "shell energy <= 1.01 |S^{n-1}| 2^{k(1-n)}");
    o.check("threshold_exists", threshold.is_some(), "ratio test <= 4 below some r0");
    o.check("gradient_bound", worst <= 1.0 + 1e-12, format!("max margin {worst:.6}"));
    o.tolerance("quad_tol", c.quad_tol);
    o.tolerance("seam", 1e-8);
    Ok(o)
}

fn construct_lusin(c: &ConstructLusinTask, seed: u64) -> Res {
    let bump = Arc::new(BumpTables::build(2, c.bump_depth, 1e-12)?);
    let params = LusinParams { lambda: c.lambda, epsilon: c.epsilon, depth: c.depth };
    let con = LusinConstruction::build(params, bump)?;
    let spec = EvidenceSpec {
        segment_samples: c.segment_samples,
        ring_samples: c.ring_samples,
        distortion_samples: c.distortion_samples,
        seed,
    };
    let ev = lusin_evidence(&con, &spec)?;
    let mut t = Table::new(&[
        "n",
        "count",
        "outer_level",
        "outer_neg_loglog",
        "prime_level",
        "inner_level",
        "inner_neg_loglog",
        "ln_a",
        "ln_kappa",
        "step",
        "d",
        "u_prime",
        "u_inner",
        "sup_g_diff",
        "g_energy",
        "ln_integral_closed",
        "ln_integral_quadrature",
        "integral_rel_diff",
    ]);
    let opt = |v: Option<f64>| v.map(real).unwrap_or_default();
    for n in 0..con.depth() {
        let l = con.level(n);
        let integral = ev.integrals.iter().find(|i| i.n == n);
        t.push(vec![
            n.to_string(),
            l.count.to_string(),
            real(l.outer.level()),
            real(l.outer.neg_loglog()),
            real(l.prime.level()),
            real(l.inner.level()),
            real(l.inner.neg_loglog()),
            real(l.ln_a),
            real(l.ln_kappa),
            real(l.step),
            real(l.d),
            real(l.u_prime),
            real(l.u_inner),
            opt(ev.steps.iter().find(|s| s.n == n).map(|s| s.sup_diff)),
            opt(ev.g_energies.get(n).copied()),
            opt(integral.map(|i| i.ln_closed_form)),
            opt(integral.map(|i| i.ln_quadrature)),
            opt(integral.map(|i| i.rel_diff)),
        ]);
    }
    let mut graph = Table::new(&["x", "f1", "f2", "g1", "g2"]);
    let m = c.graph_samples;
    for i in 0..m {
        let x = -1.0 + 2.0 * i as f64 / (m - 1) as f64;
        let v = con.value_plain(LusinPart::Curve, [x, 0.0])?;
        graph.push(vec![real(x), real(v[0]), real(v[1]), real(v[2]), real(v[3])]);
    }
    let max_rel = ev.integrals.iter().map(|i| i.rel_diff).fold(0.0, f64::max);
    let total: f64 = ev.integrals.iter().map(|i| i.closed_form).sum();
    let mut o = Outcome::default();
    o.tables.push((String::new(), t));
    o.tables.push(("graph".into(), graph));
    o.headline("attained_centers", ev.attained_centers);
    o.headline("expected_centers", ev.expected_centers);
    o.headline("max_center_miss", ev.max_center_miss);
    o.headline("steps_within_d", ev.steps_within_d());
    o.headline("steps_within_step", ev.steps_within_step());
    o.headline("max_distortion_ratio", ev.distortion.max_ratio);
    o.headline("max_gradient_margin", ev.distortion.max_gradient_margin);
    o.headline("min_sibling_gap", ev.min_sibling_gap);
    o.headline("min_rim_gap", ev.min_rim_gap);
    o.headline("exp_integral_sum", total);
    o.headline("exp_integral_bound", ev.exp_integral_bound);
    o.check("centers_attained", ev.centers_ok(), format!("{} of {}", ev.attained_centers, ev.expected_centers));
    o.check(
        "steps_within_center_distance",
        ev.steps_within_step(),
        "sup |G_{n+1} - G_n| <= distance between consecutive square centres",
    );
    o.check("segment", ev.segment_ok(), "F keeps the segment on the axis, monotone, endpoints fixed");
    o.check(
        "distortion",
        ev.distortion_ok(),
        format!("{} violations in {} samples", ev.distortion.violations, ev.distortion.samples),
    );
    o.check("balls_disjoint", ev.disjoint, "children inside parents and pairwise apart");
    o.check(
        "seams_continuous",
        ev.f_seam_max < 1e-10 && ev.g_seam_max < 1e-8,
        format!("F {:.3e}, G {:.3e}", ev.f_seam_max, ev.g_seam_max),
    );
    o.check("level_integrals", max_rel < 1e-6, format!("max relative difference {max_rel:.3e}"));
    o.check("integral_bound", total <= ev.exp_integral_bound, "sum of level integrals below the bound");
    o.tolerance("epsilon", c.epsilon);
    o.tolerance("seam_f", 1e-10);
    o.tolerance("seam_g", 1e-8);
    o.tolerance("integral_rel", 1e-6);
    Ok(o)
}

fn inequalities(c: &VerifyInequalitiesTask, seed: u64) -> Res {
    let grid = InequalityGrid { n: c.n.clone(), a: c.a.clone(), b: c.b.clone(), kappa: c.kappa.clone(), samples: c.samples };
    let reports = sweep(&grid, seed)?;
    let mut t = Table::new(&["inequality", "params", "constants", "samples", "violations", "max_ratio", "worst_1", "worst_2"]);
    let join = |v: Vec<String>| v.join(";");
    let mut violations = 0;
    for r in &reports {
        violations += r.violations;
        t.push(vec![
            r.name.clone(),
            join(r.params.iter().map(|p| real(*p)).collect()),
            join(r.constants.iter().map(|k| real(k.value)).collect()),
            r.samples.to_string(),
            r.violations.to_string(),
            real(r.max_ratio),
            real(r.worst[0]),
            real(r.worst[1]),
        ]);
    }
    let worst = reports.iter().map(|r| r.max_ratio).fold(0.0, f64::max);
    let mut o = Outcome::default();
    o.tables.push((String::new(), t));
    o.headline("grid_points", reports.len());
    o.headline("violations", violations);
    o.headline("max_ratio", worst);
    o.check("no_violations", violations == 0, format!("{violations} violations"));
    o.tolerance("samples", c.samples);
    o.tolerance("rounding_slack", 1e-12);
    Ok(o)
}

fn d_scan(c: &DScanTask, ctx: &Context) -> Res {
    let spec = DScanSpec { lo: c.lo, hi: c.hi, levels: c.levels, keep: c.keep, growth: c.growth };
    let r = condition_d_scan(ctx.map(), ctx.form(), &spec)?;
    let mut t = Table::new(&["x", "y", "max_minor", "dominant_index"]);
    for p in &r.candidates {
        let idx: Vec<String> = p.dominant_index.iter().map(|i| i.to_string()).collect();
        t.push(vec![real(p.point[0]), real(p.point[1]), real(p.max_minor), idx.join(";")]);
    }
    let mut levels = Table::new(&["level", "threshold", "max_minor", "argmax_x", "argmax_y"]);
    for l in &r.levels {
        levels.push(vec![l.level.to_string(), real(l.threshold), real(l.max_minor), real(l.argmax[0]), real(l.argmax[1])]);
    }
    let mut o = Outcome::default();
    o.tables.push((String::new(), t));
    o.tables.push(("levels".into(), levels));
    o.headline("heuristic", r.heuristic);
    o.headline("candidates", r.candidates.len());
    o.tolerance("growth", c.growth);
    Ok(o)
}
