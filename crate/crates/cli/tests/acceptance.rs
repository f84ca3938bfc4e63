//! Acceptance suite: one line per criterion, nonzero exit if any fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use yamabe_cli::config::{Command, SurfaceConfig, SweepConfig, SweepParameter};
use yamabe_cli::{run, startup_self_tests, RunConfig, RunOptions};
use yamabe_core::anomaly::{anomaly_route_b, anomaly_route_closed, conformal_jets_ambient};
use yamabe_core::collar::euclidean_collar;
use yamabe_core::geom::presets;
use yamabe_core::pipeline::{run_data, run_grid, run_homogeneous_sphere};
use yamabe_core::renvol::{closed_form_v12, minimal_area_compare, torus_energy};
use yamabe_core::variation::{energy_variation_fd, field_from_expr, variation_rhs};
use yamabe_core::volprobe::{fit_expansion, geometric_ladder, probe_table};
use yamabe_core::yamabe::{closed_form_phis, residual_scan};
use yamabe_core::{
    parse_expr, AmbientSpec, CollarMethod, ConformalJets, HypersurfaceData, PipelineOutput, ProbeModel, SolveMode,
    VariationSpec,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const E3: AmbientSpec = AmbientSpec::Euclidean { dim: 3 };

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values
        .into_iter()
        .fold(0.0, |m, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
}

fn within(what: &str, value: f64, tol: f64) -> Result<f64, String> {
    if value <= tol {
        Ok(value)
    } else {
        Err(format!("{what}: {value:.3e} > {tol:.1e}"))
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn runtime(label: &str, started: Instant, limit: Duration) -> Result<(), String> {
    let t = started.elapsed();
    if t <= limit {
        Ok(())
    } else {
        Err(format!("{label} took {t:.2?}, limit {limit:?}"))
    }
}

/// Largest deviation of a sphere run from the hyperbolic-ball values.
fn sphere_deviation(out: &PipelineOutput) -> f64 {
    let e = &out.expansion;
    let mut worst = max_abs(e.phi_field(0).iter().map(|p| p + 0.5));
    worst = worst.max(max_abs(e.phi_field(1)));
    worst = worst.max(max_abs(e.obstruction_field()));
    worst = worst.max(max_abs(out.volume.v[1].iter().map(|v| v + 0.5)));
    worst = worst.max(max_abs(out.volume.v[2].iter().map(|v| v + 0.5)));
    worst.max((out.volume.energy + 2.0 * PI).abs())
}

fn c1_sphere_exactness() -> Outcome {
    let t = Instant::now();
    let grid = run_grid(
        &presets::sphere(&E3, 1.0, 64, 32).map_err(err)?,
        &E3,
        CollarMethod::Auto,
    )
    .map_err(err)?;
    let g = within("grid", sphere_deviation(&grid), 1e-8)?;
    let data = HypersurfaceData::homogeneous_sphere(2, 0.0, 1.0).map_err(err)?;
    let jets = euclidean_collar(&data, 3).map_err(err)?;
    let hom = run_data(data, jets, SolveMode::Homogeneous).map_err(err)?;
    let h = within("homogeneous", sphere_deviation(&hom), 1e-12)?;
    runtime("sphere", t, Duration::from_secs(5))?;
    Ok(format!("grid {g:.1e}, homogeneous {h:.1e}, {:.2?}", t.elapsed()))
}

fn closed_form_gap(out: &PipelineOutput, ambient: &AmbientSpec) -> Result<f64, String> {
    let cf = closed_form_phis(&out.data, ambient);
    let e = &out.expansion;
    let mut worst = max_abs(e.phi_field(0).iter().zip(&cf).map(|(a, c)| a - c.phi0));
    let phi1 = e.phi_field(1);
    for (a, c) in phi1.iter().zip(&cf) {
        let b = c.phi1.ok_or("missing closed-form first coefficient")?;
        worst = worst.max((a - b).abs());
    }
    let v12 = closed_form_v12(&out.data, ambient).map_err(err)?;
    for (k, (v1, v2)) in v12.iter().enumerate() {
        worst = worst
            .max((out.volume.v[1][k] - v1).abs())
            .max((out.volume.v[2][k] - v2).abs());
    }
    Ok(worst)
}

fn c2_closed_forms() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let grids = [
        (E3, presets::sphere(&E3, 1.0, 64, 32)),
        (E3, presets::torus(&E3, 2.0, 1.0, 64, 32)),
        (E3, presets::ellipsoid(&E3, [1.0, 1.3, 0.7], 64, 32)),
    ];
    for (ambient, s) in grids {
        let out = run_grid(&s.map_err(err)?, &ambient, CollarMethod::Auto).map_err(err)?;
        worst = worst.max(closed_form_gap(&out, &ambient)?);
        cases += 1;
    }
    for c in [1.0, -1.0] {
        let ambient = AmbientSpec::SpaceForm { dim: 3, curvature: c };
        for rho in [0.5, 1.0] {
            let s = presets::sphere(&ambient, presets::geodesic_chart_radius(c, rho), 64, 32).map_err(err)?;
            let out = run_grid(&s, &ambient, CollarMethod::Auto).map_err(err)?;
            worst = worst.max(closed_form_gap(&out, &ambient)?);
            let out = run_homogeneous_sphere(2, c, rho).map_err(err)?;
            worst = worst.max(closed_form_gap(&out, &ambient)?);
            cases += 2;
        }
    }
    for n in 3..=6 {
        for c in [0.0, 1.0, -1.0] {
            let ambient = AmbientSpec::SpaceForm {
                dim: n + 1,
                curvature: c,
            };
            let out = run_homogeneous_sphere(n, c, 0.8).map_err(err)?;
            worst = worst.max(closed_form_gap(&out, &ambient)?);
            cases += 1;
        }
    }
    within("closed forms", worst, 1e-11)?;
    runtime("fleet", t, Duration::from_secs(30))?;
    Ok(format!("{cases} cases, worst {worst:.1e}, {:.2?}", t.elapsed()))
}

fn c3_circles() -> Outcome {
    let ambient = AmbientSpec::Euclidean { dim: 2 };
    let mut worst: f64 = 0.0;
    for a in [0.5, 1.0, 2.0] {
        let out = run_grid(
            &presets::circle(&ambient, a, 64).map_err(err)?,
            &ambient,
            CollarMethod::Auto,
        )
        .map_err(err)?;
        worst = worst
            .max(max_abs(out.expansion.obstruction_field()))
            .max(max_abs(out.volume.v[1].iter().copied()))
            .max(out.volume.energy.abs());
    }
    within("circles", worst, 1e-12).map(|w| format!("worst {w:.1e}"))
}

fn c4_conformal_invariance() -> Outcome {
    let mut worst: f64 = 0.0;
    for c in [1.0, -1.0] {
        let ambient = AmbientSpec::SpaceForm { dim: 3, curvature: c };
        for rho in [FRAC_PI_4, FRAC_PI_2, 2.0] {
            let s = presets::sphere(&ambient, presets::geodesic_chart_radius(c, rho), 64, 32).map_err(err)?;
            for method in [CollarMethod::Auto, CollarMethod::Numeric] {
                let out = run_grid(&s, &ambient, method).map_err(err)?;
                worst = worst.max((out.volume.energy + 2.0 * PI).abs());
            }
        }
    }
    for radius in [0.5, 1.0, 3.0] {
        let out = run_grid(
            &presets::sphere(&E3, radius, 64, 32).map_err(err)?,
            &E3,
            CollarMethod::Auto,
        )
        .map_err(err)?;
        worst = worst.max((out.volume.energy + 2.0 * PI).abs());
    }
    within("energy + 2π", worst, 1e-8).map(|w| format!("worst {w:.1e}"))
}

fn c5_variation() -> Outcome {
    let t = Instant::now();
    let s = presets::ellipsoid(&E3, [1.0, 1.3, 0.7], 96, 96).map_err(err)?;
    let out = run_grid(&s, &E3, CollarMethod::Auto).map_err(err)?;
    let mut gaps = Vec::new();
    for f in ["1", "z", "x*x - y*y"] {
        let field = field_from_expr(&parse_expr(f, &["x", "y", "z"]).map_err(err)?, &s).map_err(err)?;
        let fd = energy_variation_fd(&s, &out.data, &E3, &field, VariationSpec::default()).map_err(err)?;
        let rhs = variation_rhs(&field, &out.expansion, &out.data);
        let gap = (fd.estimate - rhs).abs() / rhs.abs().max(1e-6);
        within(&format!("f = {f}"), gap, 2e-3)?;
        gaps.push(format!("{f}: {gap:.1e}"));
    }
    runtime("variation", t, Duration::from_secs(300))?;
    Ok(format!("{}, {:.2?}", gaps.join(", "), t.elapsed()))
}

fn c6_anomaly() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let surfaces = [
        presets::sphere(&E3, 1.0, 48, 24),
        presets::ellipsoid(&E3, [1.0, 1.3, 0.7], 48, 24),
        presets::torus(&E3, 2.0, 1.0, 48, 24),
        presets::torus(&E3, 3.0, 0.8, 48, 24),
        presets::ellipsoid(&E3, [1.4, 0.9, 1.1], 48, 24),
    ];
    let mut routes: f64 = 0.0;
    let mut constant: f64 = 0.0;
    for s in surfaces {
        let s = s.map_err(err)?;
        let out = run_grid(&s, &E3, CollarMethod::Auto).map_err(err)?;
        for _ in 0..2 {
            let c: Vec<f64> = (0..6).map(|_| rng.random_range(-0.4..0.4)).collect();
            let text = format!(
                "{} + {}*x + {}*y*z + {}*z*z + {}*sin(x - y) + {}*exp(0.3*z)",
                c[0], c[1], c[2], c[3], c[4], c[5]
            );
            let w = parse_expr(&text, &["x", "y", "z"]).map_err(err)?;
            let cj = conformal_jets_ambient(&w, &s, &out.data, &E3).map_err(err)?;
            let a = anomaly_route_b(&cj, &out.volume, &out.data).map_err(err)?;
            let b = anomaly_route_closed(&cj, &out.data).map_err(err)?;
            routes = routes.max((a - b).abs());
        }
        let k = rng.random_range(-2.0..2.0);
        let a = anomaly_route_b(&ConformalJets::constant(out.data.len(), k), &out.volume, &out.data).map_err(err)?;
        constant = constant.max((a + k * out.volume.energy).abs());
    }
    within("two routes", routes, 1e-9)?;
    within("constant law", constant, 1e-10)?;
    Ok(format!("10 pairs, routes {routes:.1e}, constant law {constant:.1e}"))
}

fn c7_probe() -> Outcome {
    let eps = geometric_ladder(1e-3, 1e-1, 16);
    let ball = fit_expansion(2, &probe_table(ProbeModel::HyperbolicBall, &eps).map_err(err)?, 4).map_err(err)?;
    let expected = ProbeModel::HyperbolicBall.expected();
    let found = [ball.divergent[0], ball.divergent[1], ball.energy, ball.constant];
    let worst = max_abs(found.iter().zip(&expected).map(|(a, b)| a - b));
    within("ball", worst, 1e-4)?;
    let disc = fit_expansion(1, &probe_table(ProbeModel::HyperbolicDisc, &eps).map_err(err)?, 4).map_err(err)?;
    within("disc log coefficient", disc.energy.abs(), 1e-5)?;
    Ok(format!("ball worst {worst:.1e}, disc log {:.1e}", disc.energy.abs()))
}

fn c8_torus_sweep() -> Outcome {
    let mut cfg = RunConfig::parse("command = \"sweep\"\n").map_err(err)?;
    cfg.command = Command::Sweep;
    cfg.surface = Some(SurfaceConfig::Torus { major: 2.0, minor: 1.0 });
    cfg.grid.nu = 32;
    cfg.grid.nv = 64;
    cfg.sweep = Some(SweepConfig {
        parameter: SweepParameter::TorusRatio,
        start: 1.1,
        stop: 3.0,
        steps: 20,
    });
    let out = run(&cfg, &RunOptions::default()).map_err(err)?;
    let table = out.table.ok_or("sweep produced no table")?;
    let ratio = table.column("ratio").ok_or("no ratio column")?;
    let energy = table.column("energy").ok_or("no energy column")?;
    let pointwise = max_abs(ratio.iter().zip(&energy).map(|(t, e)| e - torus_energy(*t)));
    within("pointwise", pointwise, 1e-6)?;
    let g = &out.record.globals;
    let arg = within("argmin", (g["ratio_min"] - SQRT_2).abs(), 1e-3)?;
    let val = within("minimum", (g["energy_min"] - PI * PI).abs(), 1e-5)?;
    Ok(format!(
        "pointwise {pointwise:.1e}, argmin {arg:.1e}, minimum {val:.1e}"
    ))
}

fn c9_residual_decay() -> Outcome {
    let samples = geometric_ladder(1e-3, 1e-1, 8);
    let mut cases: Vec<(String, PipelineOutput)> = Vec::new();
    for (name, s) in [
        ("ellipsoid", presets::ellipsoid(&E3, [1.0, 1.3, 0.7], 64, 32)),
        ("torus", presets::torus(&E3, 2.0, 1.0, 64, 32)),
    ] {
        cases.push((
            name.into(),
            run_grid(&s.map_err(err)?, &E3, CollarMethod::Auto).map_err(err)?,
        ));
    }
    let s3 = AmbientSpec::SpaceForm { dim: 3, curvature: 1.0 };
    let s = presets::ellipsoid(&s3, [0.5, 0.6, 0.4], 64, 32).map_err(err)?;
    cases.push((
        "ellipsoid in S3".into(),
        run_grid(&s, &s3, CollarMethod::Auto).map_err(err)?,
    ));
    for n in 2..=6 {
        for c in [1.0, -1.0] {
            cases.push((format!("n={n} c={c}"), run_homogeneous_sphere(n, c, 0.7).map_err(err)?));
        }
    }
    let mut worst_margin = f64::INFINITY;
    let mut tested = 0;
    for (name, out) in &cases {
        let scan = residual_scan(&out.expansion, &out.jets, &out.data, &samples).map_err(err)?;
        if scan.max_residual < 1e-10 {
            continue;
        }
        let p = scan.exponent.ok_or_else(|| format!("{name}: no exponent"))?;
        let margin = p - (out.data.n() as f64 + 1.7);
        if margin < 0.0 {
            return Err(format!("{name}: exponent {p:.3} below n + 1.7"));
        }
        worst_margin = worst_margin.min(margin);
        tested += 1;
    }
    if tested == 0 {
        return Err("no non-exact surface in the fleet".into());
    }
    Ok(format!(
        "{tested} surfaces, smallest margin over n + 1.7: {worst_margin:.2}"
    ))
}

fn c10_min_area() -> Outcome {
    let mut pointwise: f64 = 0.0;
    let mut global: f64 = 0.0;
    for s in [
        presets::sphere(&E3, 1.0, 64, 32),
        presets::torus(&E3, 2.0, 1.0, 64, 32),
        presets::ellipsoid(&E3, [1.0, 1.3, 0.7], 64, 32),
    ] {
        let out = run_grid(&s.map_err(err)?, &E3, CollarMethod::Auto).map_err(err)?;
        let m = minimal_area_compare(&out.data, out.volume.energy).map_err(err)?;
        pointwise = pointwise.max(m.pointwise_residual);
        global = global.max(m.global_residual);
    }
    within("pointwise", pointwise, 1e-10)?;
    within("global", global, 1e-6)?;
    Ok(format!("pointwise {pointwise:.1e}, global {global:.1e}"))
}

fn c11_indicial() -> Outcome {
    let reports = startup_self_tests().map_err(err)?;
    let mut worst: f64 = 0.0;
    for r in &reports {
        for &(k, found, expected) in &r.powers {
            let exact = ((k as f64) + 2.0) * (k as f64 - r.n as f64);
            worst = worst.max((found - exact).abs()).max((expected - exact).abs());
        }
        worst = worst
            .max((r.log_term.0 - (r.n as f64 + 2.0)).abs())
            .max(r.log_term.1.abs());
    }
    if reports.iter().map(|r| r.n).ne(1..=6) {
        return Err("self-tests do not cover n = 1..6".into());
    }
    within("indicial", worst, 1e-12).map(|w| format!("n = 1..6, worst {w:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("sphere exactness", c1_sphere_exactness),
        ("closed-form cross-checks", c2_closed_forms),
        ("circle degeneration", c3_circles),
        ("conformal invariance of the energy", c4_conformal_invariance),
        ("first variation of the energy", c5_variation),
        ("anomaly two-route agreement", c6_anomaly),
        ("hyperbolic volume probe", c7_probe),
        ("torus sweep", c8_torus_sweep),
        ("residual decay", c9_residual_decay),
        ("minimal-area identities", c10_min_area),
        ("indicial self-tests", c11_indicial),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS  {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
