//! One line per acceptance criterion; exits non-zero if any fails.

use std::cell::Cell;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use branchform::expr::SmoothMap;
use branchform::forms::{
    bracket_naturality_check, lie_bracket, poincare_primitive, DifferentialForm, Exterior, FormField, FormShape, ScalarField, VectorField,
};
use branchform::geometry::ChartDomain;
use branchform::measure::{chart_measure, chart_measure_with_density, verify_restriction, Integrator, Region};
use branchform::{parse_rational, Rational};
use branchform_cli::scenario::load_scenario;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use serde_json::Value;

type Check = Result<String, String>;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.scn"))
}

fn run(cmd: &str, scn: &str, extra: &[&str]) -> Result<(i32, Vec<u8>), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_branchform"))
        .arg(cmd)
        .arg(scenario(scn))
        .args(extra)
        .env_remove("BRANCHFORM_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    let code = out.status.code().ok_or("killed by a signal")?;
    if code == 1 {
        return Err(format!("{cmd} {scn}: {}", String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok((code, out.stdout))
}

fn run_json(cmd: &str, scn: &str, extra: &[&str]) -> Result<(i32, Value), String> {
    let (code, bytes) = run(cmd, scn, extra)?;
    Ok((code, serde_json::from_slice(&bytes).map_err(|e| e.to_string())?))
}

fn value(report: &Value, name: &str) -> Result<f64, String> {
    report["values"]
        .as_array()
        .and_then(|vs| vs.iter().find(|v| v["name"] == name))
        .and_then(|v| v["value"].as_f64())
        .ok_or_else(|| format!("report has no value `{name}`"))
}

fn table<'a>(out: &'a Value, name: &str) -> Result<&'a Value, String> {
    out["tables"].as_array().and_then(|ts| ts.iter().find(|t| t["name"] == name)).ok_or_else(|| format!("no table `{name}`"))
}

fn column(t: &Value, name: &str) -> Result<Vec<String>, String> {
    let idx = t["columns"].as_array().and_then(|c| c.iter().position(|c| c == name)).ok_or_else(|| format!("no column `{name}`"))?;
    Ok(t["rows"].as_array().unwrap().iter().map(|r| r[idx].as_str().unwrap_or_default().to_string()).collect())
}

fn floats(col: Vec<String>) -> Vec<f64> {
    col.iter().map(|s| s.parse().unwrap_or(f64::NAN)).collect()
}

fn prefactor(report: &Value, i: usize) -> Result<Rational, String> {
    let s = report["prefactors"][i].as_str().ok_or("missing prefactor")?;
    parse_rational(s).map_err(|e| e.to_string())
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(", ")
}

fn ensure(ok: bool, why: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(why())
    }
}

fn stokes() -> Check {
    let (code, out) = run_json("stokes", "disk", &["--refine", "3", "--quad-order", "7"])?;
    let r = &out["reports"][0];
    let (interior, boundary, residual) = (value(r, "interior")?, value(r, "boundary")?, value(r, "residual")?);
    ensure(code == 0, || format!("exit {code}"))?;
    ensure((interior - PI).abs() <= 1e-8, || format!("interior {interior}"))?;
    ensure((boundary - PI).abs() <= 1e-8, || format!("boundary {boundary}"))?;
    ensure(residual.abs() <= 1e-8, || format!("residual {residual}"))?;
    let sweep: Vec<f64> = floats(column(table(&out, "quadrature_order")?, "residual")?).iter().map(|r| r.abs()).collect();
    for (m, w) in sweep.windows(2).enumerate() {
        if w[0] > 1e-12 {
            ensure(w[1] <= w[0] / 10.0, || format!("order {} -> {}: {} -> {}", m + 1, m + 2, w[0], w[1]))?;
        }
    }
    Ok(format!("dω = {interior:.15}, ∂ = {boundary:.15}, residual {residual:e}, order sweep [{}]", sci(&sweep)))
}

fn canonical_formula() -> Check {
    let (_, plain) = run_json("integrate", "circle", &[])?;
    let (_, sym) = run_json("integrate", "z2-circle", &[])?;
    let (p, s) = (&plain["reports"][0], &sym["reports"][0]);
    let (qp, qs) = (prefactor(p, 0)?, prefactor(s, 0)?);
    ensure(qs == qp * Rational::new(1, 2), || format!("prefactors {qp} and {qs}"))?;
    let ip = floats(column(table(&plain, "contributions")?, "integral")?);
    let is = floats(column(table(&sym, "contributions")?, "integral")?);
    ensure(ip.len() == is.len() && ip.iter().zip(&is).all(|(a, b)| (a - b).abs() <= 1e-9), || format!("{ip:?} vs {is:?}"))?;
    let (vp, vs) = (value(p, "value")?, value(s, "value")?);
    ensure((vs - vp / 2.0).abs() <= 1e-9, || format!("{vs} vs {vp}/2"))?;
    Ok(format!("prefactor {qs} = 1/2 × {qp}, measure {vs} = {vp}/2"))
}

fn linearity_and_density() -> Check {
    let s = load_scenario(&scenario("z2-circle"), None).map_err(|e| format!("{e:#}"))?;
    let st = s.structure().map_err(|e| e.to_string())?;
    let it = Integrator::default();
    let poly = |c: &[i64]| format!("{}/4 + {}/4*x0 + {}/4*x1 + {}/4*x0*x1^2", c[0], c[1], c[2], c[3]);
    let strategy = (-8i64..8, -8i64..8, prop::array::uniform8(-6i64..6), prop::array::uniform4(-6i64..6));
    let mut runner = TestRunner::new(Config { cases: 32, failure_persistence: None, ..Config::default() });
    let worst = Cell::new(0.0f64);
    let result = runner.run(&strategy, |(a, b, w, f)| {
        let omega = DifferentialForm::parse(2, 1, &[("0", poly(&w[..4])), ("1", poly(&[w[1], w[0], w[3], w[2]]))]).unwrap();
        let tau = DifferentialForm::parse(2, 1, &[("0", poly(&w[4..])), ("1", poly(&[w[7], w[6], w[5], w[4]]))]).unwrap();
        let combo = omega.scaled(Rational::new(a, 3)).plus(&tau.scaled(Rational::new(b, 5))).unwrap();
        let m = |form: &DifferentialForm| chart_measure(st, form, &Region::All, &it).unwrap().value;
        let linear = (m(&combo) - (a as f64 / 3.0 * m(&omega) + b as f64 / 5.0 * m(&tau))).abs();
        // f is even so that f ω stays invariant under x -> -x
        let field = ScalarField::parse(&format!("{}/3 + {}/3*x0^2 + {}/3*x1^2 + {}/3*x0*x1", f[0], f[1], f[2], f[3]), 2).unwrap();
        let density = |x: &[f64]| field.eval(x);
        let by_density = chart_measure_with_density(st, &omega, &density, &Region::All, &it).unwrap().value;
        let weighted = (m(&omega.times(&field)) - by_density).abs();
        worst.set(worst.get().max(linear).max(weighted));
        prop_assert!(linear <= 1e-9 && weighted <= 1e-9, "defects {} and {}", linear, weighted);
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    Ok(format!("32 random cases, worst defect {:e}", worst.get()))
}

fn independence() -> Check {
    let mut diffs = Vec::new();
    for scn in ["split-circle", "doubled-circle"] {
        let (code, out) = run_json("verify-independence", scn, &[])?;
        let d = value(&out["reports"][0], "difference")?;
        ensure(code == 0 && d <= 1e-9, || format!("{scn}: exit {code}, difference {d}"))?;
        diffs.push(d);
    }
    let (code, out) = run_json("verify-independence", "mismatch-circle", &[])?;
    let w = &out["reports"][0]["witnesses"][0];
    ensure(code == 2 && w["point"].as_array().is_some_and(|p| p.len() == 2), || format!("mismatch not rejected: exit {code}"))?;
    Ok(format!("differences [{}]; mismatch witness: {}", sci(&diffs), w["description"].as_str().unwrap_or_default()))
}

fn restriction() -> Check {
    let s = load_scenario(&scenario("z4"), None).map_err(|e| format!("{e:#}"))?;
    let r = s.restriction.as_ref().ok_or("no restriction")?;
    let form = s.form("w").map_err(|e| e.to_string())?;
    let st = s.structure().map_err(|e| e.to_string())?;
    let c = verify_restriction(st, &r.point, r.neighbourhood.clone(), form, &r.region, &Integrator::default(), 1e-9)
        .map_err(|e| e.to_string())?;
    let lhs = Rational::new(c.cosets as i64, c.full_effective_order as i64);
    let rhs = Rational::new(1, c.local_effective_order as i64);
    ensure(c.rational_lhs == lhs && c.rational_rhs == rhs && lhs == rhs, || format!("{lhs} vs {rhs}"))?;
    let d = (c.global.value - c.local.value).abs();
    ensure(c.report.pass && d <= 1e-9, || format!("difference {d}"))?;
    let (code, _) = run("verify-restriction", "z4", &[])?;
    ensure(code == 0, || format!("exit {code}"))?;
    Ok(format!("(1/{})·{} = 1/{}, measures differ by {d:e}", c.full_effective_order, c.cosets, c.local_effective_order))
}

fn morphisms() -> Check {
    let (code, out) = run_json("verify-morphism", "morphisms", &[])?;
    let reports = out["reports"].as_array().ok_or("no reports")?;
    ensure(code == 0 && reports.len() == 3, || format!("exit {code}"))?;
    let mut diffs = Vec::new();
    for r in reports {
        let d = value(r, "difference")?;
        ensure(d <= 1e-9, || format!("{}: {d}", r["operation"]))?;
        diffs.push(d);
    }
    Ok(format!("rotation, translation, shear differences [{}]", sci(&diffs)))
}

fn partition_of_unity() -> Check {
    let (code, out) = run_json("verify-pou", "pou", &[])?;
    let mut worst_sum: f64 = 0.0;
    let mut worst_inv: f64 = 0.0;
    let reports = out["reports"].as_array().ok_or("no reports")?;
    for r in reports.iter().filter(|r| r["operation"].as_str().unwrap_or_default().starts_with("verify_partition_of_unity")) {
        ensure(value(r, "nodes")? == 512.0, || "node count".into())?;
        worst_sum = worst_sum.max(value(r, "sum_defect")?);
        worst_inv = worst_inv.max(value(r, "invariance_defect")?);
    }
    let cover = reports.iter().find(|r| r["operation"] == "cover_independence").ok_or("no cover comparison")?;
    let diff = value(cover, "max_difference")?;
    ensure(code == 0, || format!("exit {code}"))?;
    ensure(worst_sum <= 1e-12 && worst_inv <= 1e-9 && diff <= 1e-8, || format!("{worst_sum} {worst_inv} {diff}"))?;
    Ok(format!("sum defect {worst_sum:e}, invariance {worst_inv:e}, cover spread {diff:e}"))
}

fn vectors(dim: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    branchform::sampling::halton::<f64>(dim * k, 1, seed + 1)[0].chunks(dim).map(|c| c.iter().map(|v| 2.0 * v - 1.0).collect()).collect()
}

fn poincare() -> Check {
    let cases: Vec<(DifferentialForm, ChartDomain<f64>)> = vec![
        (
            DifferentialForm::parse(3, 1, &[("0", "x1*sin(x2)"), ("1", "x0*sin(x2)"), ("2", "x0*x1*cos(x2)")]).unwrap(),
            ChartDomain::Ball { center: vec![0.0; 3], radius: 1.5 },
        ),
        (
            DifferentialForm::parse(3, 2, &[("02", "2*x0*x1"), ("12", "x0^2")]).unwrap(),
            ChartDomain::Box { lo: vec![-1.0; 3], hi: vec![1.0, 1.5, 2.0] },
        ),
        (
            DifferentialForm::parse(2, 2, &[("01", "exp(x0)*cos(x1) + x0*x1^2")]).unwrap(),
            ChartDomain::Box { lo: vec![-1.0, -0.5], hi: vec![1.0, 2.0] },
        ),
    ];
    let mut worst: f64 = 0.0;
    for (w, domain) in cases {
        let (n, k) = (w.dim(), w.degree());
        let primitive = poincare_primitive(&w, domain.clone()).map_err(|e| e.to_string())?;
        let d = Exterior(&primitive);
        let pts = domain.samples(50, 5);
        ensure(pts.len() == 50, || "sample count".into())?;
        for (i, x) in pts.iter().enumerate() {
            let vs = vectors(n, k, 100 * i as u64);
            let defect = (d.eval(x, &vs).map_err(|e| e.to_string())? - w.eval(x, &vs).map_err(|e| e.to_string())?).abs();
            worst = worst.max(defect);
        }
    }
    ensure(worst <= 1e-9, || format!("defect {worst}"))?;
    Ok(format!("3 cases × 50 points, worst ‖d(Hω) − ω‖ {worst:e}"))
}

fn lie_bracket_checks() -> Check {
    let pts = branchform::sampling::halton::<f64>(3, 10, 11);
    let mut runner = TestRunner::new(Config { cases: 32, failure_persistence: None, ..Config::default() });
    let worst_linear = Cell::new(0.0f64);
    runner
        .run(&(prop::array::uniform9(-6i64..7), prop::array::uniform9(-6i64..7)), |(m, k)| {
            let field = |a: &[i64; 9]| {
                let rows: Vec<String> =
                    (0..3).map(|i| format!("{}/2*x0 + {}/2*x1 + {}/2*x2", a[3 * i], a[3 * i + 1], a[3 * i + 2])).collect();
                VectorField::parse(3, &rows).unwrap()
            };
            let bracket = lie_bracket(&field(&m), &field(&k)).unwrap();
            let at = |a: &[i64; 9], i: usize, j: usize| a[3 * i + j] as f64 / 2.0;
            let mut case: f64 = 0.0;
            for x in &pts {
                let got = bracket.eval(x).unwrap();
                for i in 0..3 {
                    let want: f64 =
                        (0..3).map(|j| (0..3).map(|l| at(&m, i, l) * at(&k, l, j) - at(&k, i, l) * at(&m, l, j)).sum::<f64>() * x[j]).sum();
                    case = case.max((got[i] - want).abs());
                }
            }
            worst_linear.set(worst_linear.get().max(case));
            prop_assert!(case <= 1e-10, "commutator defect {}", case);
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let a = VectorField::parse(2, &["x1^2 + sin(x0)", "x0*x1 - 1"]).unwrap();
    let b = VectorField::parse(2, &["exp(x1/4)", "2*x0^3"]).unwrap();
    let c = VectorField::parse(2, &["cos(x0 - x1) + 3", "x0*x1^2"]).unwrap();
    let br = |p: &VectorField, q: &VectorField| lie_bracket(p, q).unwrap();
    let terms = [br(&a, &br(&b, &c)), br(&b, &br(&c, &a)), br(&c, &br(&a, &b))];
    let mut jacobi: f64 = 0.0;
    for x in branchform::sampling::halton::<f64>(2, 20, 3) {
        for i in 0..2 {
            jacobi = jacobi.max(terms.iter().map(|t| t.eval(&x).unwrap()[i]).sum::<f64>().abs());
        }
    }
    ensure(jacobi <= 1e-8, || format!("Jacobi {jacobi}"))?;

    let battery = [
        (["-x1", "x0"], ["2*x0 - 3*x1", "3*x0 + 2*x1"], ["(x0^2 + x1^2)*x0", "(x0^2 + x1^2)*x1"]),
        (["3/5*x0 - 4/5*x1", "4/5*x0 + 3/5*x1"], ["-x1", "x0"], ["x0*(x0^2 + x1^2)^2 - x1", "x1*(x0^2 + x1^2)^2 + x0"]),
        (["2*x0", "2*x1"], ["x0 - 5*x1", "1/3*x0 + x1"], ["x1", "-4*x0 + 1/2*x1"]),
    ];
    let pts: Vec<Vec<f64>> =
        branchform::sampling::halton::<f64>(2, 32, 9).into_iter().map(|x| x.iter().map(|v| 2.0 * v - 1.0).collect()).collect();
    let mut natural: f64 = 0.0;
    for (phi, a, b) in battery {
        let rep = bracket_naturality_check(
            &SmoothMap::parse(2, &phi).unwrap(),
            &VectorField::parse(2, &a).unwrap(),
            &VectorField::parse(2, &b).unwrap(),
            &pts,
            1e-9,
        )
        .map_err(|e| e.to_string())?;
        natural = natural.max(rep.get("naturality_defect").ok_or("no naturality defect")?);
        ensure(rep.pass, || format!("{rep:?}"))?;
    }
    ensure(natural <= 1e-9, || format!("naturality {natural}"))?;
    Ok(format!("commutator {:e}, Jacobi {jacobi:e}, naturality {natural:e}", worst_linear.get()))
}

fn classification() -> Check {
    let (code, out) = run_json("classify", "cubic-tangency", &[])?;
    let t = table(&out, "bad_fraction")?;
    let fractions = floats(column(t, "fraction")?);
    ensure(code == 0 && fractions.len() == 5, || format!("exit {code}, {} resolutions", fractions.len()))?;
    let ratios: Vec<f64> = fractions.windows(2).map(|w| w[1] / w[0]).collect();
    ensure(ratios.iter().all(|r| (0.4..=0.6).contains(r)), || format!("ratios {ratios:?}"))?;
    let classes = column(table(&out, "points")?, "class")?;
    ensure(classes.first().map(String::as_str) == Some("bad"), || format!("origin classed {classes:?}"))?;
    Ok(format!("bad fractions {fractions:.4?}, ratios {ratios:.3?}"))
}

fn multisection_invariants() -> Check {
    let (c1, quad) = run_json("invariant", "quadratic", &[])?;
    let (c2, cubic) = run_json("invariant", "cubic", &[])?;
    let (q, k) = (prefactor(&quad["reports"][0], 0)?, prefactor(&cubic["reports"][0], 0)?);
    ensure(c1 == 0 && q == Rational::from_integer(0), || format!("quadratic Ψ = {q}, exit {c1}"))?;
    ensure(c2 == 0 && k == Rational::from_integer(1), || format!("cubic Ψ = {k}, exit {c2}"))?;
    let (c3, h) = run_json("homotopy", "cubic", &[])?;
    let r = &h["reports"][0];
    let (samples, flagged, dev) = (value(r, "samples")?, value(r, "flagged")?, value(r, "max_deviation")?);
    ensure(c3 == 0 && samples == 21.0 && flagged == 0.0 && dev == 0.0, || format!("homotopy: {samples} {flagged} {dev}"))?;
    Ok(format!("Ψ(x² ± ε) = {q}, Ψ(x³ − x) = {k}, 21 homotopy steps constant"))
}

fn determinism() -> Check {
    let cases = [
        ("stokes", "disk", "json"),
        ("integrate", "z2-circle", "csv"),
        ("verify-pou", "pou", "json"),
        ("verify-independence", "doubled-circle", "csv"),
        ("classify", "cubic-tangency", "json"),
        ("homotopy", "cubic", "csv"),
    ];
    for (cmd, scn, fmt) in cases {
        let (_, one) = run(cmd, scn, &["--threads", "1", "--format", fmt])?;
        let (_, eight) = run(cmd, scn, &["--threads", "8", "--format", fmt])?;
        ensure(!one.is_empty() && one == eight, || format!("{cmd} {scn} differs between 1 and 8 threads"))?;
    }
    Ok(format!("{} command/scenario pairs byte-identical", cases.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("stokes on the disk", stokes),
        ("canonical measure under Z/2", canonical_formula),
        ("linearity and density", linearity_and_density),
        ("independence of presentation", independence),
        ("restriction to a local structure", restriction),
        ("morphism invariance", morphisms),
        ("partition of unity", partition_of_unity),
        ("Poincaré primitive", poincare),
        ("Lie bracket", lie_bracket_checks),
        ("good/bad classification", classification),
        ("multisection invariants", multisection_invariants),
        ("determinism across thread counts", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
