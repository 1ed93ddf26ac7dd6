//! Scenario runner: loads `.scn` files and runs one command per process.

pub mod output;
pub mod scenario;

use anyhow::{anyhow, bail, Result};
use branchform::error::Error;
use branchform::forms::DifferentialForm;
use branchform::measure::{
    boundary_measure, chart_measure, global_boundary_measure, global_measure, sample_support_nodes, stokes_residual, verify_independence,
    verify_morphism_invariance, verify_partition_of_unity, verify_restriction, Integrator, MeasureResult,
};
use branchform::multisection::{homotopy_invariance_check, invariant_psi, solve};
use branchform::report::Report;
use branchform::{format_rational, Rational};
use clap::ValueEnum;

use output::{num, Output, Settings, Table};
use scenario::Scenario;

/// Support nodes sampled by `verify-pou`.
pub const POU_NODES: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Integrate,
    Boundary,
    Stokes,
    VerifyIndependence,
    VerifyRestriction,
    VerifyMorphism,
    VerifyPou,
    Classify,
    Invariant,
    Homotopy,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Integrate => "integrate",
            Command::Boundary => "boundary",
            Command::Stokes => "stokes",
            Command::VerifyIndependence => "verify-independence",
            Command::VerifyRestriction => "verify-restriction",
            Command::VerifyMorphism => "verify-morphism",
            Command::VerifyPou => "verify-pou",
            Command::Classify => "classify",
            Command::Invariant => "invariant",
            Command::Homotopy => "homotopy",
        }
    }

    fn default_tolerance(self) -> f64 {
        match self {
            Command::Stokes | Command::Homotopy => 1e-8,
            _ => 1e-9,
        }
    }
}

/// Flag overrides; `None` falls back to the scenario's `[run]` table.
#[derive(Clone, Copy, Debug, Default)]
pub struct Flags {
    pub refine: Option<usize>,
    pub quad_order: Option<usize>,
    pub tolerance: Option<f64>,
}

/// Exit status for an output: 0 when every report passed, 2 otherwise.
pub fn exit_code(out: &Output) -> i32 {
    if out.pass {
        0
    } else {
        2
    }
}

/// A failed check raised as an error becomes a failing report with the
/// error's witness point; other errors propagate.
fn checked(operation: &str, tolerance: f64, result: branchform::Result<Report>) -> Result<Report> {
    match result {
        Ok(r) => Ok(r),
        Err(e) if e.is_verification_failure() => {
            let mut r = Report::new(operation, tolerance);
            r.fail();
            let point = match &e {
                Error::ThetaMismatch { point, .. }
                | Error::NotSaturated { point, .. }
                | Error::RestrictionOverlap { point, .. }
                | Error::CoverGap { point }
                | Error::Properness { point, .. } => point.clone(),
                _ => Vec::new(),
            };
            r.witness(e.to_string(), &point, f64::NAN);
            Ok(r)
        }
        Err(e) => Err(e.into()),
    }
}

fn measure_output(operation: &str, m: &MeasureResult<f64>, tolerance: f64) -> (Report, Table) {
    let mut r = Report::new(operation, tolerance);
    r.value("value", m.value).value("error_estimate", m.error_estimate);
    let mut seen: Vec<Rational> = Vec::new();
    let mut t = Table::new("contributions", &["set", "branch", "prefactor", "integral"]);
    for c in &m.contributions {
        if !seen.contains(&c.prefactor) {
            seen.push(c.prefactor);
            r.prefactor(&c.prefactor);
        }
        t.row(vec![
            c.set.map_or_else(|| "-".to_string(), |s| s.to_string()),
            c.branch.to_string(),
            format_rational(&c.prefactor),
            num(c.integral),
        ]);
    }
    (r, t)
}

fn unit_function(dim: usize) -> DifferentialForm {
    DifferentialForm::parse(dim, 0, &[("", "1")]).expect("constant 0-form")
}

/// Runs `command` on a loaded scenario.
pub fn run(command: Command, s: &Scenario, flags: Flags) -> Result<Output> {
    let settings = Settings {
        refine: flags.refine.or(s.run.refine).unwrap_or(1),
        quad_order: flags.quad_order.or(s.run.quad_order).unwrap_or(5),
        tolerance: flags.tolerance.or(s.run.tolerance).unwrap_or(command.default_tolerance()),
        seed: s.chart.seed(),
    };
    if settings.refine == 0 || settings.quad_order == 0 {
        bail!("--refine and --quad-order must be positive");
    }
    let tol = settings.tolerance;
    let it = Integrator::new(settings.quad_order, settings.refine);
    let form = || -> Result<&DifferentialForm> { s.form(s.run.form.as_deref().ok_or_else(|| anyhow!("scenario sets no run.form"))?) };
    let cover =
        || -> Result<Option<&branchform::measure::PartitionOfUnity<f64>>> { s.run.cover.as_deref().map(|c| s.cover(c)).transpose() };
    let mut reports = Vec::new();
    let mut tables = Vec::new();
    match command {
        Command::Integrate => {
            let st = s.structure()?;
            let m = match cover()? {
                Some(p) => global_measure(st, form()?, p, &it)?,
                None => chart_measure(st, form()?, &s.region()?, &it)?,
            };
            let (r, t) = measure_output("integrate", &m, tol);
            reports.push(r);
            tables.push(t);
        }
        Command::Boundary => {
            let st = s.structure()?;
            let name = s.run.boundary_form.as_deref().or(s.run.form.as_deref()).ok_or_else(|| anyhow!("scenario sets no form"))?;
            let w = s.form(name)?;
            let m = match cover()? {
                Some(p) => global_boundary_measure(st, w, p, &it)?,
                None => boundary_measure(st, w, &s.region()?, &it)?,
            };
            let (r, t) = measure_output("boundary", &m, tol);
            reports.push(r);
            tables.push(t);
        }
        Command::Stokes => {
            let st = s.structure()?;
            let w = form()?;
            let p = cover()?;
            let mut by_refine = Table::new("refinement", &["refine", "interior", "boundary", "residual"]);
            let mut last = None;
            for k in 1..=settings.refine {
                let res = stokes_residual(st, w, p, &Integrator::new(settings.quad_order, k))?;
                by_refine.row(vec![k.to_string(), num(res.interior.value), num(res.boundary.value), num(res.residual)]);
                last = Some(res);
            }
            let mut by_order = Table::new("quadrature_order", &["order", "interior", "boundary", "residual"]);
            for m in 1..=settings.quad_order {
                let res = stokes_residual(st, w, p, &Integrator::new(m, settings.refine))?;
                by_order.row(vec![m.to_string(), num(res.interior.value), num(res.boundary.value), num(res.residual)]);
            }
            let last = last.expect("refine ≥ 1");
            let mut r = Report::new("stokes", tol);
            r.value("interior", last.interior.value).value("boundary", last.boundary.value).value("residual", last.residual);
            if last.residual.abs() > tol || !last.residual.is_finite() {
                r.fail();
            }
            reports.push(r);
            tables.push(by_refine);
            tables.push(by_order);
        }
        Command::VerifyIndependence => {
            let alt = s.alternative.as_ref().ok_or_else(|| anyhow!("scenario has no [alternative] presentation"))?;
            let res = verify_independence(s.structure()?, alt, form()?, &s.region()?, &it, tol);
            reports.push(checked("verify_independence", tol, res)?);
        }
        Command::VerifyRestriction => {
            let rs = s.restriction.as_ref().ok_or_else(|| anyhow!("scenario has no [restriction] table"))?;
            let res =
                verify_restriction(s.structure()?, &rs.point, rs.neighbourhood.clone(), form()?, &rs.region, &it, tol).map(|c| c.report);
            reports.push(checked("verify_restriction", tol, res)?);
        }
        Command::VerifyMorphism => {
            if s.morphisms.is_empty() {
                bail!("scenario lists no [[morphisms]]");
            }
            for m in &s.morphisms {
                let res = verify_morphism_invariance(s.structure()?, &m.map, &m.inverse, form()?, &it, tol);
                let mut r = checked("verify_morphism_invariance", tol, res)?;
                r.operation = format!("verify_morphism_invariance:{}", m.name);
                reports.push(r);
            }
        }
        Command::VerifyPou => {
            if s.covers.is_empty() {
                bail!("scenario defines no covers");
            }
            let st = s.structure()?;
            let nodes = sample_support_nodes(st, &it, POU_NODES)?;
            let mut measures = Table::new("cover_measures", &["cover", "value"]);
            let direct = match &s.run.form {
                Some(n) => Some(chart_measure(st, s.form(n)?, &branchform::measure::Region::All, &it)?.value),
                None => None,
            };
            let mut worst: f64 = 0.0;
            for (name, p) in &s.covers {
                let res = verify_partition_of_unity(p, &s.chart, &nodes, tol);
                let mut r = checked("verify_partition_of_unity", tol, res)?;
                r.operation = format!("verify_partition_of_unity:{name}");
                reports.push(r);
                if let Some(d) = direct {
                    match global_measure(st, form()?, p, &it) {
                        Ok(m) => {
                            worst = worst.max((m.value - d).abs());
                            measures.row(vec![name.clone(), num(m.value)]);
                        }
                        Err(e) if e.is_verification_failure() => worst = f64::INFINITY,
                        Err(e) => return Err(e.into()),
                    }
                }
            }
            if let Some(d) = direct {
                let cover_tol = tol.max(1e-8);
                let mut r = Report::new("cover_independence", cover_tol);
                r.value("direct", d).value("max_difference", worst);
                if !(worst <= cover_tol) {
                    r.fail();
                }
                reports.push(r);
                tables.push(measures);
            }
        }
        Command::Classify => {
            let c = s.classify.as_ref().ok_or_else(|| anyhow!("scenario has no [classify] table"))?;
            let st = s.structure()?;
            let mut r = Report::new("classify", tol);
            r.value("radius", c.radius);
            let mut density = Table::new("bad_fraction", &["resolution", "fraction", "ratio"]);
            let mut prev: Option<f64> = None;
            for &n in &c.resolutions {
                let f = st.bad_set_density(n, c.radius)?;
                let ratio = prev.map_or_else(|| "-".to_string(), |p| num(f / p));
                density.row(vec![n.to_string(), num(f), ratio]);
                prev = Some(f);
            }
            let mut points = Table::new("points", &["point", "class", "incident", "partition"]);
            for x in &c.points {
                let p = st.classify_point(x, c.radius)?;
                let join = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
                points.row(vec![
                    x.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" "),
                    format!("{:?}", p.class).to_lowercase(),
                    join(&p.incident),
                    p.partition.iter().map(|b| join(b)).collect::<Vec<_>>().join(" | "),
                ]);
            }
            reports.push(r);
            tables.push(density);
            tables.push(points);
        }
        Command::Invariant => {
            let sec = s.section.as_ref().ok_or_else(|| anyhow!("scenario has no [section] table"))?;
            let omega = match &s.run.form {
                Some(n) => s.form(n)?.clone(),
                None => unit_function(s.chart.dim()),
            };
            let tau = s.run.boundary_form.as_deref().map(|n| s.form(n)).transpose()?;
            let solved = solve(&sec.section, &sec.multisection, sec.resolution);
            let sol = match solved {
                Ok(z) => z,
                Err(e) if e.is_verification_failure() => {
                    reports.push(checked("invariant", tol, Err(e))?);
                    return Ok(finish(s, command, settings, reports, tables));
                }
                Err(e) => return Err(e.into()),
            };
            let psi = invariant_psi(&sol, &s.chart, &omega, tau, cover()?, &it)?;
            let mut r = Report::new("invariant", tol);
            r.value("psi", psi.value).value("interior", psi.interior).value("boundary", psi.boundary);
            r.value("solution_dim", psi.solution_dim as f64).value("components", psi.components as f64);
            if let Some(q) = &psi.exact {
                r.prefactor(q);
            }
            let mut pts = Table::new("solutions", &["section", "weight", "point", "sign"]);
            for p in &sol.points {
                pts.row(vec![
                    p.section.to_string(),
                    format_rational(&sol.weights[p.section]),
                    p.point.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" "),
                    p.sign.to_string(),
                ]);
            }
            for c in &sol.curves {
                pts.row(vec![
                    c.section.to_string(),
                    format_rational(&sol.weights[c.section]),
                    format!("{} points{}", c.points.len(), if c.closed { ", closed" } else { "" }),
                    "-".to_string(),
                ]);
            }
            reports.push(r);
            tables.push(pts);
        }
        Command::Homotopy => {
            let sec = s.section.as_ref().ok_or_else(|| anyhow!("scenario has no [section] table"))?;
            let h = sec.homotopy.as_ref().ok_or_else(|| anyhow!("section.homotopy is not set"))?;
            let (lo, hi) = sec.compact.clone().ok_or_else(|| anyhow!("section.compact is not set"))?;
            let omega = match &s.run.form {
                Some(n) => s.form(n)?.clone(),
                None => unit_function(s.chart.dim()),
            };
            let tau = s.run.boundary_form.as_deref().map(|n| s.form(n)).transpose()?;
            let res =
                homotopy_invariance_check(&s.chart, h, &sec.multisection, &omega, tau, (&lo, &hi), sec.steps, sec.resolution, &it, tol);
            reports.push(checked("homotopy_invariance_check", tol, res)?);
        }
    }
    Ok(finish(s, command, settings, reports, tables))
}

fn finish(s: &Scenario, command: Command, settings: Settings, reports: Vec<Report>, tables: Vec<Table>) -> Output {
    Output {
        scenario: s.name.clone(),
        command: command.name().to_string(),
        pass: reports.iter().all(|r| r.pass),
        settings,
        reports,
        tables,
    }
}
