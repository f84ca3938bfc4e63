//! Execution of each command.

use std::f64::consts::{PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use yamabe_core::anomaly::{
    anomaly_route_b, anomaly_route_closed, conformal_jets_ambient, conformal_jets_collar, min_area_anomaly,
};
use yamabe_core::collar::{collar_consistency_check, euclidean_collar, spaceform_collar, CollarRecord};
use yamabe_core::geom::{euler_characteristic, fundamental_forms, presets, GridLayout};
use yamabe_core::pipeline::{collar_for, run_data};
use yamabe_core::renvol::{closed_form_v1, closed_form_v12, energy_n2_split, minimal_area_compare, torus_energy};
use yamabe_core::variation::{energy_variation_fd, field_from_expr, variation_rhs, willmore_operator, willmore_ratio};
use yamabe_core::volprobe::{curvature_check, fit_expansion, geometric_ladder, probe_table};
use yamabe_core::yamabe::{closed_form_phis, gauge_sensitivity, indicial_self_test, residual_scan, IndicialReport};
use yamabe_core::{
    parse_expr, AmbientSpec, CollarJets, CollarKind, ConformalJets, HypersurfaceData, Orientation, PipelineOutput,
    SolveMode, SurfaceGrid, VariationSpec,
};

use crate::config::{
    AmbientConfig, CollarSource, Command, Mode, OmegaCoordinates, RunConfig, SurfaceConfig, SweepParameter,
};
use crate::record::{Check, ResultRecord, Table};
use crate::CliError;

/// Settings from the command line that are not part of the config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    pub tol_scale: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            tol_scale: 1.0,
        }
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub record: ResultRecord,
    pub table: Option<Table>,
    /// JSON collar record to export, when requested.
    pub collar_export: Option<String>,
    /// One line per failed check naming the module and worst node.
    pub diagnostics: Vec<String>,
}

/// Confirm the linearization constants the solver divides by, for `n = 1..=6`.
pub fn startup_self_tests() -> Result<Vec<IndicialReport>, CliError> {
    (1..=6).map(|n| indicial_self_test(n).map_err(CliError::from)).collect()
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    opts: &'a RunOptions,
    record: ResultRecord,
    diagnostics: Vec<String>,
}

impl Ctx<'_> {
    fn tol(&self, name: &str, default: f64) -> f64 {
        self.cfg.tolerances.get(name, default) * self.opts.tol_scale
    }

    fn check(&mut self, name: &str, residual: f64, default_tol: f64, worst: Option<usize>) {
        let tol = self.tol(name, default_tol);
        let c = Check::below(name, residual, tol);
        if !c.pass {
            let module = name.split('.').next().unwrap_or(name);
            let at = worst.map(|k| format!(" at node {k}")).unwrap_or_default();
            self.diagnostics.push(format!(
                "[{module}] {name}: residual {residual:.3e} exceeds {tol:.3e}{at}"
            ));
        }
        self.record.check(c);
    }
}

/// Largest `|a − b|` and where it occurs.
fn max_diff(a: &[f64], b: &[f64]) -> (f64, usize) {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .enumerate()
        .fold(
            (0.0, 0),
            |(m, k), (i, d)| if d > m || d.is_nan() { (d, i) } else { (m, k) },
        )
}

pub fn run(cfg: &RunConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    cfg.validate()?;
    if !(opts.tol_scale.is_finite() && opts.tol_scale > 0.0) {
        return Err(CliError::Config("tolerance scale must be positive".into()));
    }
    let echo = serde_json::to_value(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    let mut ctx = Ctx {
        cfg,
        opts,
        record: ResultRecord::new(echo),
        diagnostics: Vec::new(),
    };
    let mut table = None;
    let mut collar_export = None;
    match cfg.command {
        Command::Compute | Command::Verify | Command::Anomaly | Command::Vary => {
            let built = build(cfg)?;
            if cfg.collar.export.is_some() {
                collar_export =
                    Some(serde_json::to_string(&built.out.jets.to_record()).map_err(|e| CliError::Io(e.to_string()))?);
            }
            emit_fields(&mut ctx, &built)?;
            match cfg.command {
                Command::Verify => verify(&mut ctx, &built)?,
                Command::Anomaly => anomaly(&mut ctx, &built)?,
                Command::Vary => vary(&mut ctx, &built)?,
                _ => {}
            }
        }
        Command::Probe => table = Some(probe(&mut ctx)?),
        Command::Sweep => table = Some(sweep(&mut ctx)?),
    }
    Ok(Outcome {
        record: ctx.record,
        table,
        collar_export,
        diagnostics: ctx.diagnostics,
    })
}

/// Ambient background of dimension `n + 1`.
pub fn ambient_spec(cfg: &RunConfig) -> Result<AmbientSpec, CliError> {
    let dim = cfg.n + 1;
    Ok(match &cfg.ambient {
        AmbientConfig::Euclidean => AmbientSpec::Euclidean { dim },
        AmbientConfig::SpaceForm { curvature } => AmbientSpec::SpaceForm {
            dim,
            curvature: *curvature,
        },
        AmbientConfig::ConformalFlat { omega } => {
            if dim > 3 {
                return Err(CliError::Config(
                    "conformally flat ambients are limited to dimension 3".into(),
                ));
            }
            let vars = &["x", "y", "z"][..dim];
            AmbientSpec::ConformalFlat {
                dim,
                omega: parse_expr(omega, vars)?,
            }
        }
    })
}

fn space_form_curvature(cfg: &RunConfig) -> Result<f64, CliError> {
    match cfg.ambient {
        AmbientConfig::Euclidean => Ok(0.0),
        AmbientConfig::SpaceForm { curvature } => Ok(curvature),
        AmbientConfig::ConformalFlat { .. } => Err(CliError::Config(
            "geodesic spheres and homogeneous mode need a constant-curvature ambient".into(),
        )),
    }
}

/// Sampled hypersurface described by the config.
pub fn surface_grid(cfg: &RunConfig, surface: &SurfaceConfig, ambient: &AmbientSpec) -> Result<SurfaceGrid, CliError> {
    let (nu, nv) = (cfg.grid.nu, cfg.grid.nv);
    let need = |n: usize| -> Result<(), CliError> {
        if cfg.n != n {
            return Err(CliError::Config(format!(
                "surface {surface:?} has dimension {n}, config says n = {}",
                cfg.n
            )));
        }
        Ok(())
    };
    let grid = match surface {
        SurfaceConfig::Sphere { radius } => {
            need(2)?;
            presets::sphere(ambient, *radius, nu, nv)?
        }
        SurfaceConfig::GeodesicSphere { rho } => {
            let r = presets::geodesic_chart_radius(space_form_curvature(cfg)?, *rho);
            match cfg.n {
                1 => presets::circle(ambient, r, nu)?,
                2 => presets::sphere(ambient, r, nu, nv)?,
                n => return Err(CliError::Config(format!("grid geodesic spheres need n ≤ 2, got {n}"))),
            }
        }
        SurfaceConfig::Torus { major, minor } => {
            need(2)?;
            presets::torus(ambient, *major, *minor, nu, nv)?
        }
        SurfaceConfig::Ellipsoid { axes } => {
            need(2)?;
            presets::ellipsoid(ambient, *axes, nu, nv)?
        }
        SurfaceConfig::Circle { radius } => {
            need(1)?;
            presets::circle(ambient, *radius, nu)?
        }
        SurfaceConfig::Parametric { components, topology } => {
            need(components.len().saturating_sub(1))?;
            let refs: Vec<&str> = components.iter().map(String::as_str).collect();
            let layout = GridLayout::new(cfg.n, nu, nv, (*topology).into())?;
            yamabe_core::geom::build_surface(ambient, &presets::embedding(&refs)?, layout)?
        }
    };
    Ok(grid)
}

/// Data of a geodesic sphere for homogeneous mode.
fn homogeneous_data(cfg: &RunConfig, surface: &SurfaceConfig) -> Result<(HypersurfaceData, f64), CliError> {
    let c = space_form_curvature(cfg)?;
    let rho = match surface {
        SurfaceConfig::GeodesicSphere { rho } => *rho,
        SurfaceConfig::Sphere { radius } | SurfaceConfig::Circle { radius } if c == 0.0 => *radius,
        other => {
            return Err(CliError::Config(format!(
                "homogeneous mode needs a round or geodesic sphere, got {other:?}"
            )))
        }
    };
    Ok((HypersurfaceData::homogeneous_sphere(cfg.n, c, rho)?, c))
}

/// A solved configuration.
pub struct Built {
    pub ambient: AmbientSpec,
    pub surface: Option<SurfaceGrid>,
    pub out: PipelineOutput,
}

fn load_collar(cfg: &RunConfig) -> Result<CollarJets, CliError> {
    let path = cfg
        .collar
        .path
        .as_ref()
        .ok_or_else(|| CliError::Config("collar method \"file\" needs a path".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {path}: {e}")))?;
    let rec: CollarRecord =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("collar record {path}: {e}")))?;
    Ok(CollarJets::from_record(&rec)?)
}

pub fn build(cfg: &RunConfig) -> Result<Built, CliError> {
    let surface_cfg = cfg.require(&cfg.surface, "surface")?;
    let ambient = ambient_spec(cfg)?;
    match cfg.mode {
        Mode::Grid => {
            if cfg.n > 2 {
                return Err(CliError::Config(format!(
                    "grid mode supports n = 1 or 2, got {}",
                    cfg.n
                )));
            }
            let surface = surface_grid(cfg, surface_cfg, &ambient)?;
            let data = fundamental_forms(&surface, &ambient, Orientation::Inward)?;
            let jets = match cfg.collar.method {
                CollarSource::File => load_collar(cfg)?,
                _ => collar_for(&ambient, Some(&surface), &data, cfg.collar.method())?,
            };
            let out = run_data(data, jets, SolveMode::Grid)?;
            Ok(Built {
                ambient,
                surface: Some(surface),
                out,
            })
        }
        Mode::Homogeneous => {
            let (data, c) = homogeneous_data(cfg, surface_cfg)?;
            let jets = match (cfg.collar.method, &ambient) {
                (CollarSource::File, _) => load_collar(cfg)?,
                (CollarSource::Numeric, _) => {
                    return Err(CliError::Config("numeric collars need grid mode".into()));
                }
                (CollarSource::Auto, AmbientSpec::Euclidean { .. }) => euclidean_collar(&data, cfg.n + 1)?,
                (CollarSource::Auto, _) => spaceform_collar(&data, c, cfg.n + 1)?,
            };
            let out = run_data(data, jets, SolveMode::Homogeneous)?;
            Ok(Built {
                ambient,
                surface: None,
                out,
            })
        }
    }
}

fn emit_fields(ctx: &mut Ctx<'_>, built: &Built) -> Result<(), CliError> {
    let out = &built.out;
    let d = &out.data;
    let n = d.n();
    let r = &mut ctx.record;
    r.field("H", d.field(|g| g.mean));
    r.field("tracefree_norm2", d.field(|g| g.tracefree_norm2));
    r.field("R", d.field(|g| g.scalar));
    for k in 0..n {
        r.field(format!("phi_{k}"), out.expansion.phi_field(k));
    }
    r.field("obstruction", out.expansion.obstruction_field());
    for k in 0..=n {
        r.field(format!("v_{k}"), out.volume.v[k].clone());
    }
    for (k, c) in out.volume.c.iter().enumerate() {
        r.global(format!("c_{k}"), *c);
    }
    r.global("energy", out.volume.energy);
    r.global("nodes", d.len() as f64);
    r.global("area", yamabe_core::geom::surface_integrate(&vec![1.0; d.len()], d));
    if n == 2 && !d.is_homogeneous() {
        if let Ok(chi) = euler_characteristic(d) {
            r.global("chi", chi.chi as f64);
        }
    }
    Ok(())
}

fn verify(ctx: &mut Ctx<'_>, built: &Built) -> Result<(), CliError> {
    let out = &built.out;
    let (d, exp, vol, jets) = (&out.data, &out.expansion, &out.volume, &out.jets);
    let n = d.n();
    let exact = jets.kind() == CollarKind::Exact;
    let closed_tol = if exact { 1e-11 } else { 1e-6 };

    let worst_indicial = startup_self_tests()?
        .iter()
        .flat_map(|r| r.powers.iter().map(|p| (p.1 - p.2).abs()))
        .fold(0.0, f64::max);
    ctx.check("yamabe.indicial", worst_indicial, 1e-12, None);

    let cons = collar_consistency_check(jets, d, &built.ambient);
    ctx.check(
        "collar.consistency",
        cons.first_order.max(cons.second_order),
        cons.tolerance,
        Some(cons.worst_node),
    );

    let cf = closed_form_phis(d, &built.ambient);
    let (res, k) = max_diff(&exp.phi_field(0), &cf.iter().map(|c| c.phi0).collect::<Vec<_>>());
    ctx.check("yamabe.phi0_closed_form", res, closed_tol, Some(k));
    let (res, k) = max_diff(&vol.v[1], &closed_form_v1(d));
    ctx.check("renvol.v1_closed_form", res, closed_tol, Some(k));
    if n >= 2 {
        let phi1: Vec<f64> = cf.iter().map(|c| c.phi1.unwrap_or(f64::NAN)).collect();
        let via: Vec<f64> = cf.iter().map(|c| c.phi1_via_normal_trace.unwrap_or(f64::NAN)).collect();
        let (res, k) = max_diff(&exp.phi_field(1), &phi1);
        ctx.check("yamabe.phi1_closed_form", res, closed_tol, Some(k));
        let (res, k) = max_diff(&phi1, &via);
        ctx.check("yamabe.phi1_two_forms", res, 1e-11, Some(k));
        let v2: Vec<f64> = closed_form_v12(d, &built.ambient)?.into_iter().map(|p| p.1).collect();
        let (res, k) = max_diff(&vol.v[2], &v2);
        ctx.check("renvol.v2_closed_form", res, closed_tol, Some(k));
    }

    ctx.check(
        "yamabe.gauge_independence",
        gauge_sensitivity(jets, exp, 1.0)?,
        1e-13,
        None,
    );

    let samples = geometric_ladder(1e-3, 1e-1, 8);
    let scan = residual_scan(exp, jets, d, &samples)?;
    ctx.record.global("residual_max", scan.max_residual);
    if scan.max_residual < 1e-10 || scan.exponent.is_none() {
        ctx.check("yamabe.residual_exact", scan.max_residual, 1e-10, None);
    } else {
        let p = scan.exponent.unwrap_or(f64::NAN);
        ctx.record.global("residual_exponent", p);
        ctx.check("yamabe.residual_exponent", n as f64 + 1.7 - p, 0.0, None);
    }

    let (c, e) = vol.recompute(d);
    let drift = c
        .iter()
        .zip(&vol.c)
        .map(|(a, b)| (a - b).abs())
        .fold((e - vol.energy).abs(), f64::max);
    ctx.check("renvol.recompute", drift, 1e-13, None);

    if n == 2 {
        if !d.is_homogeneous() {
            let gb = euler_characteristic(d)?;
            ctx.check("geom.gauss_bonnet", gb.residual, 1e-2, None);
        }
        let split = energy_n2_split(d)?;
        ctx.record.global("willmore_part", split.willmore);
        ctx.check(
            "renvol.energy_split",
            (vol.energy - split.willmore - split.topological).abs(),
            1e-6,
            None,
        );
        let m = minimal_area_compare(d, vol.energy)?;
        ctx.record.global("energy_min_area", m.energy_min_area);
        ctx.check("renvol.min_area_pointwise", m.pointwise_residual, 1e-10, None);
        ctx.check("renvol.min_area_global", m.global_residual, 1e-6, None);

        if let Some(surface) = &built.surface {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.opts.seed);
            let mut worst: f64 = 0.0;
            for _ in 0..3 {
                let c: Vec<f64> = (0..6).map(|_| rng.random_range(-0.5..0.5)).collect();
                let text = format!(
                    "{} + {}*x + {}*y*z + {}*z*z + {}*sin(x + y) + {}*x*y",
                    c[0], c[1], c[2], c[3], c[4], c[5]
                );
                let w = parse_expr(&text, &["x", "y", "z"])?;
                let cj = conformal_jets_ambient(&w, surface, d, &built.ambient)?;
                let a = anomaly_route_b(&cj, vol, d)?;
                let b = anomaly_route_closed(&cj, d)?;
                worst = worst.max((a - b).abs());
            }
            ctx.check("anomaly.two_routes_random", worst, 1e-9, None);
        }
        let k: f64 = ChaCha8Rng::seed_from_u64(ctx.opts.seed ^ 0x5eed).random_range(-2.0..2.0);
        let a = anomaly_route_b(&ConformalJets::constant(d.len(), k), vol, d)?;
        ctx.check("anomaly.constant_law", (a + k * vol.energy).abs(), 1e-10, None);
    }
    Ok(())
}

fn anomaly(ctx: &mut Ctx<'_>, built: &Built) -> Result<(), CliError> {
    let block = ctx.cfg.require(&ctx.cfg.anomaly, "anomaly")?;
    let surface = built
        .surface
        .as_ref()
        .ok_or_else(|| CliError::Config("the anomaly command needs grid mode".into()))?;
    let d = &built.out.data;
    if d.n() != 2 {
        return Err(CliError::Config("the anomaly command needs n = 2".into()));
    }
    let cj = match block.coordinates {
        OmegaCoordinates::Ambient => {
            let w = parse_expr(&block.omega, &["x", "y", "z"])?;
            conformal_jets_ambient(&w, surface, d, &built.ambient)?
        }
        OmegaCoordinates::Collar => {
            let w = parse_expr(&block.omega, &["u", "v", "r"])?;
            conformal_jets_collar(&w, surface, d)?
        }
    };
    let a = anomaly_route_b(&cj, &built.out.volume, d)?;
    let b = anomaly_route_closed(&cj, d)?;
    let (density, total) = min_area_anomaly(&cj, d)?;
    let r = &mut ctx.record;
    r.field("omega", cj.nodes.iter().map(|j| j.omega).collect());
    r.field("omega_r", cj.nodes.iter().map(|j| j.omega_r).collect());
    r.field("omega_rr", cj.nodes.iter().map(|j| j.omega_rr).collect());
    r.field("omega_grad_norm2", cj.nodes.iter().map(|j| j.grad_norm2).collect());
    r.field("min_area_anomaly_density", density);
    r.global("anomaly_route_b", a);
    r.global("anomaly_route_closed", b);
    r.global("anomaly_difference", a - b);
    r.global("min_area_anomaly", total);
    ctx.check("anomaly.two_routes", (a - b).abs(), 1e-9, None);
    Ok(())
}

fn vary(ctx: &mut Ctx<'_>, built: &Built) -> Result<(), CliError> {
    let block = ctx.cfg.require(&ctx.cfg.vary, "vary")?;
    let surface = built
        .surface
        .as_ref()
        .ok_or_else(|| CliError::Config("the vary command needs grid mode".into()))?;
    let d = &built.out.data;
    let spec = VariationSpec { t0: block.t0 };
    for f in &block.f {
        let expr = parse_expr(f, &["x", "y", "z"])?;
        let field = field_from_expr(&expr, surface)?;
        let est = energy_variation_fd(surface, d, &built.ambient, &field, spec)?;
        let rhs = variation_rhs(&field, &built.out.expansion, d);
        let gap = (est.estimate - rhs).abs() / rhs.abs().max(1e-6);
        ctx.record.global(format!("fd[{f}]"), est.estimate);
        ctx.record.global(format!("fd_error[{f}]"), est.error);
        ctx.record.global(format!("rhs[{f}]"), rhs);
        ctx.record.global(format!("gap[{f}]"), gap);
        ctx.check(&format!("variation.first_variation[{f}]"), gap, 2e-3, None);
    }
    let w = willmore_operator(d)?;
    if w.iter().fold(0.0f64, |m, v| m.max(v.abs())) > 1e-6 {
        let ratio = willmore_ratio(&built.out.expansion, d)?;
        ctx.record.global("willmore_ratio", ratio.ratio);
        ctx.record.global("willmore_ratio_spread", ratio.spread);
        ctx.check("variation.willmore_constancy", ratio.spread, 1e-2, None);
    }
    Ok(())
}

fn probe(ctx: &mut Ctx<'_>) -> Result<Table, CliError> {
    let block = ctx.cfg.require(&ctx.cfg.probe, "probe")?;
    if !(block.eps_min > 0.0 && block.eps_min < block.eps_max && block.eps_max <= 1.0) {
        return Err(CliError::Config("probe needs 0 < eps_min < eps_max ≤ 1".into()));
    }
    let model = block.model;
    let n = model.n();
    let eps = geometric_ladder(block.eps_min, block.eps_max, block.samples.max(2));
    let rows = probe_table(model, &eps)?;
    let fit = fit_expansion(n, &rows, block.corrections)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.opts.seed);
    let curvature = curvature_check(model, 100, &mut rng)?;
    let expected = model.expected();
    let r = &mut ctx.record;
    for (k, c) in fit.divergent.iter().enumerate() {
        r.global(format!("c_{k}"), *c);
    }
    r.global("energy", fit.energy);
    r.global("constant", fit.constant);
    r.global("fit_residual", fit.residual);
    r.global("condition", fit.condition);
    ctx.check("volprobe.curvature", curvature, 1e-10, None);
    for (k, (found, want)) in fit.divergent.iter().zip(&expected).enumerate() {
        ctx.check(&format!("volprobe.c_{k}"), (found - want).abs(), 1e-4, None);
    }
    let energy_tol = if n == 1 { 1e-5 } else { 1e-4 };
    ctx.check("volprobe.energy", (fit.energy - expected[n]).abs(), energy_tol, None);
    ctx.check("volprobe.constant", (fit.constant - expected[n + 1]).abs(), 1e-4, None);
    let mut table = Table::new(&["eps", "volume"]);
    for (e, v) in rows {
        table.push(vec![e, v]);
    }
    Ok(table)
}

fn linspace(start: f64, stop: f64, steps: usize) -> Vec<f64> {
    if steps < 2 {
        return vec![start];
    }
    (0..steps)
        .map(|k| start + (stop - start) * k as f64 / (steps - 1) as f64)
        .collect()
}

/// Minimum inside a bracket `a < b < c` with `f(b)` below both ends.
///
/// Parabolic steps keep the bracket; a golden-section step is taken when the
/// parabola lands outside it or too close to the middle point.
fn refine_minimum(
    f: impl Fn(f64) -> Result<f64, CliError>,
    triple: [(f64, f64); 3],
    tol: f64,
    max_evals: usize,
) -> Result<(f64, f64), CliError> {
    const GOLDEN: f64 = 0.381_966_011_250_105_1;
    let [(mut a, mut fa), (mut b, mut fb), (mut c, mut fc)] = triple;
    for _ in 0..max_evals {
        if c - a < tol {
            break;
        }
        let num = (b - a).powi(2) * (fb - fc) - (b - c).powi(2) * (fb - fa);
        let den = (b - a) * (fb - fc) - (b - c) * (fb - fa);
        let parabolic = if den != 0.0 { b - 0.5 * num / den } else { f64::NAN };
        let guard = 0.1 * tol;
        let x = if parabolic > a + guard && parabolic < c - guard && (parabolic - b).abs() > guard {
            parabolic
        } else if b - a > c - b {
            b - GOLDEN * (b - a)
        } else {
            b + GOLDEN * (c - b)
        };
        let fx = f(x)?;
        if fx < fb {
            if x < b {
                (c, fc) = (b, fb);
            } else {
                (a, fa) = (b, fb);
            }
            (b, fb) = (x, fx);
        } else if x < b {
            (a, fa) = (x, fx);
        } else {
            (c, fc) = (x, fx);
        }
    }
    Ok((b, fb))
}

fn sweep(ctx: &mut Ctx<'_>) -> Result<Table, CliError> {
    let cfg = ctx.cfg;
    let block = cfg.require(&cfg.sweep, "sweep")?;
    let values = linspace(block.start, block.stop, block.steps);
    match block.parameter {
        SweepParameter::TorusRatio => {
            let minor = match cfg.surface {
                Some(SurfaceConfig::Torus { minor, .. }) => minor,
                None => 1.0,
                _ => return Err(CliError::Config("torus_ratio sweeps need a torus surface".into())),
            };
            if cfg.n != 2 || cfg.mode != Mode::Grid {
                return Err(CliError::Config("torus_ratio sweeps need n = 2 in grid mode".into()));
            }
            let ambient = ambient_spec(cfg)?;
            let energy = |t: f64| -> Result<f64, CliError> {
                let s = presets::torus(&ambient, t * minor, minor, cfg.grid.nu, cfg.grid.nv)?;
                let data = fundamental_forms(&s, &ambient, Orientation::Inward)?;
                let jets = collar_for(&ambient, Some(&s), &data, cfg.collar.method())?;
                Ok(run_data(data, jets, SolveMode::Grid)?.volume.energy)
            };
            let energies = values.iter().map(|&t| energy(t)).collect::<Result<Vec<_>, _>>()?;
            let euclidean = ambient.is_euclidean();
            let mut table = Table::new(if euclidean {
                &["ratio", "energy", "oracle"]
            } else {
                &["ratio", "energy"]
            });
            let mut worst: f64 = 0.0;
            for (t, e) in values.iter().zip(&energies) {
                if euclidean {
                    let o = torus_energy(*t);
                    worst = worst.max((e - o).abs());
                    table.push(vec![*t, *e, o]);
                } else {
                    table.push(vec![*t, *e]);
                }
            }
            let k = (0..energies.len())
                .min_by(|&i, &j| energies[i].total_cmp(&energies[j]))
                .unwrap_or(0);
            let (t_min, e_min) = if k > 0 && k + 1 < energies.len() {
                let triple = [
                    (values[k - 1], energies[k - 1]),
                    (values[k], energies[k]),
                    (values[k + 1], energies[k + 1]),
                ];
                refine_minimum(energy, triple, 1e-6, 60)?
            } else {
                (values[k], energies[k])
            };
            ctx.record.global("ratio_min", t_min);
            ctx.record.global("energy_min", e_min);
            if euclidean {
                ctx.check("sweep.torus_oracle", worst, 1e-6, None);
                if block.start < SQRT_2 && SQRT_2 < block.stop {
                    ctx.check("sweep.argmin", (t_min - SQRT_2).abs(), 1e-3, None);
                    ctx.check("sweep.min_value", (e_min - PI * PI).abs(), 1e-5, None);
                }
            }
            Ok(table)
        }
        SweepParameter::GeodesicRadius => {
            let mut table = Table::new(&["rho", "energy"]);
            let mut energies = Vec::with_capacity(values.len());
            for &rho in &values {
                let mut c = cfg.clone();
                c.surface = Some(SurfaceConfig::GeodesicSphere { rho });
                let e = build(&c)?.out.volume.energy;
                energies.push(e);
                table.push(vec![rho, e]);
            }
            let hi = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = energies.iter().copied().fold(f64::INFINITY, f64::min);
            ctx.check("sweep.conformal_invariance", hi - lo, 1e-8, None);
            let expected = match cfg.n {
                1 => Some(0.0),
                2 => Some(-2.0 * PI),
                _ => None,
            };
            if let Some(x) = expected {
                let worst = energies.iter().map(|e| (e - x).abs()).fold(0.0, f64::max);
                ctx.check("sweep.round_sphere_energy", worst, 1e-8, None);
            }
            Ok(table)
        }
    }
}
