use std::sync::Arc;

use branchform::expr::SmoothMap;
use branchform::forms::DifferentialForm;
use branchform::geometry::{Chart, ChartDomain};
use branchform::measure::Integrator;
use branchform::multisection::{homotopy_invariance_check, invariant_psi, solve, Multisection, ToySection};
use branchform::Rational;
use proptest::prelude::*;

fn line() -> Arc<Chart<f64>> {
    Arc::new(Chart::trivial(ChartDomain::Box { lo: vec![-2.0], hi: vec![2.0] }).unwrap())
}

/// Signed count of sign changes of `p` on a uniform grid: +1 for − to +.
fn sign_change_count(p: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> i64 {
    let mut count = 0;
    let mut prev = p(lo);
    for k in 1..=n {
        let v = p(lo + (hi - lo) * k as f64 / n as f64);
        if prev < 0.0 && v > 0.0 {
            count += 1;
        } else if prev > 0.0 && v < 0.0 {
            count -= 1;
        }
        prev = v;
    }
    count
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn psi_is_the_signed_root_count(
        roots in prop::collection::btree_set(-12i64..12, 1..5),
        lead in prop::sample::select(vec![-3i64, -1, 1, 2]),
    ) {
        // simple roots at k/7 + 1/97, away from the solver's grid
        let rs: Vec<f64> = roots.iter().map(|&k| k as f64 / 7.0 + 1.0 / 97.0).collect();
        let expr = roots
            .iter()
            .map(|&k| format!("(x0 - {k}/7 - 1/97)"))
            .fold(format!("{lead}"), |acc, f| format!("{acc}*{f}"));
        let f = ToySection::new(line(), SmoothMap::parse(1, &[expr]).unwrap()).unwrap();
        let z = solve(&f, &Multisection::trivial(1, 1), 400).unwrap();
        prop_assert_eq!(z.points.len(), rs.len());
        let one = DifferentialForm::parse(1, 0, &[("", "1")]).unwrap();
        let psi = invariant_psi(&z, f.chart(), &one, None, None, &Integrator::default()).unwrap();
        let oracle = sign_change_count(|x| lead as f64 * rs.iter().map(|r| x - r).product::<f64>(), -2.0, 2.0, 10_000);
        prop_assert_eq!(psi.exact, Some(Rational::from_integer(oracle)));
        for p in &z.points {
            prop_assert!(f.map().eval(&p.point).unwrap()[0].abs() <= 1e-10);
        }
    }
}

#[test]
fn quadratic_with_symmetric_perturbation() {
    let m = Multisection::new(
        vec![SmoothMap::parse(1, &["1/50"]).unwrap(), SmoothMap::parse(1, &["-1/50"]).unwrap()],
        vec![Rational::new(1, 2), Rational::new(1, 2)],
    )
    .unwrap();
    let f = ToySection::new(line(), SmoothMap::parse(1, &["x0^2"]).unwrap()).unwrap();
    let z = solve(&f, &m, 1000).unwrap();
    let want = (1.0f64 / 50.0).sqrt();
    assert_eq!(z.points.len(), 2);
    assert!((z.points[0].point[0] + want).abs() <= 1e-12 && z.points[0].sign == -1);
    assert!((z.points[1].point[0] - want).abs() <= 1e-12 && z.points[1].sign == 1);
    let c = DifferentialForm::parse(1, 0, &[("", "7/3")]).unwrap();
    let psi = invariant_psi(&z, f.chart(), &c, None, None, &Integrator::default()).unwrap();
    assert_eq!(psi.exact, Some(Rational::from_integer(0)));
}

#[test]
fn rotated_square_system_keeps_psi() {
    let plane = Arc::new(Chart::trivial(ChartDomain::Box { lo: vec![-2.0; 2], hi: vec![2.0; 2] }).unwrap());
    // f_t(x) = f_0(R_t x) with f_0 = (x0² − 1/4, x0 x1)
    let u = "(cos(x2)*x0 - sin(x2)*x1)";
    let v = "(sin(x2)*x0 + cos(x2)*x1)";
    let h = SmoothMap::parse(3, &[format!("{u}^2 - 1/4"), format!("{u}*{v}")]).unwrap();
    let w = DifferentialForm::parse(2, 0, &[("", "1 + x0^2 + x1^2")]).unwrap();
    let rep = homotopy_invariance_check(
        &plane,
        &h,
        &Multisection::trivial(2, 2),
        &w,
        None,
        (&[-1.0, -1.0], &[1.0, 1.0]),
        21,
        12,
        &Integrator::default(),
        1e-9,
    )
    .unwrap();
    assert!(rep.pass, "{rep:?}");
    assert_eq!(rep.get("flagged"), Some(0.0));
    assert!((rep.get("psi_first").unwrap() - 2.5).abs() <= 1e-12);
}
