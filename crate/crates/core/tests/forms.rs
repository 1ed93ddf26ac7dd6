use approx::assert_abs_diff_eq;
use branchform::expr::SmoothMap;
use branchform::forms::{
    bracket_naturality_check, lie_bracket, poincare_primitive, pullback, DifferentialForm, Exterior, FormField, FormShape, VectorField,
};
use branchform::geometry::ChartDomain;
use branchform::sampling::halton;
use proptest::prelude::*;

fn points(dim: usize, count: usize, seed: u64, scale: f64) -> Vec<Vec<f64>> {
    halton::<f64>(dim, count, seed).into_iter().map(|x| x.iter().map(|c| (2.0 * c - 1.0) * scale).collect()).collect()
}

/// Columns of `count` pseudo-random vectors, independent of the library's sampler.
fn vectors(dim: usize, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..k)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
                })
                .collect()
        })
        .collect()
}

fn monomial(c: i64, e: [u32; 3]) -> String {
    format!("{c}/3*x0^{}*x1^{}*x2^{}", e[0], e[1], e[2])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn d_squared_is_zero(cs in prop::array::uniform3(-5i64..6), es in prop::array::uniform3(prop::array::uniform3(0u32..4))) {
        let w = DifferentialForm::parse(3, 1, &[("0", monomial(cs[0], es[0])), ("1", monomial(cs[1], es[1])), ("2", monomial(cs[2], es[2]))]).unwrap();
        let ddw = w.exterior_derivative().exterior_derivative();
        for (i, x) in points(3, 8, 1, 1.5).iter().enumerate() {
            let vs = vectors(3, 3, i as u64);
            prop_assert!(ddw.eval(x, &vs).unwrap().abs() <= 1e-9);
        }
    }

    #[test]
    fn pullback_commutes_with_d(a in -4i64..5, b in -4i64..5, cs in prop::array::uniform3(-5i64..6)) {
        let w = DifferentialForm::parse(3, 1, &[("0", format!("{}*x1*x2", cs[0])), ("1", format!("{}*sin(x0)", cs[1])), ("2", format!("{}*x0^2 + x1", cs[2]))]).unwrap();
        let phi = SmoothMap::parse(2, &[format!("x0*x1 + {a}"), format!("x0^2 - {b}*x1"), "x1^3 + x0".to_string()]).unwrap();
        let lhs = Exterior(pullback(&w, phi.clone()).unwrap());
        let rhs = pullback(w.exterior_derivative(), phi).unwrap();
        for (i, x) in points(2, 8, 4, 1.0).iter().enumerate() {
            let vs = vectors(2, 2, 100 + i as u64);
            let (l, r) = (lhs.eval(x, &vs).unwrap(), rhs.eval(x, &vs).unwrap());
            prop_assert!((l - r).abs() <= 1e-9 * (1.0 + r.abs()), "{} vs {}", l, r);
        }
    }

    #[test]
    fn linear_bracket_matches_commutator(m in prop::array::uniform9(-6i64..7), k in prop::array::uniform9(-6i64..7)) {
        let field = |a: &[i64; 9]| {
            let rows: Vec<String> = (0..3).map(|i| format!("{}/2*x0 + {}/2*x1 + {}/2*x2", a[3 * i], a[3 * i + 1], a[3 * i + 2])).collect();
            VectorField::parse(3, &rows).unwrap()
        };
        let bracket = lie_bracket(&field(&m), &field(&k)).unwrap();
        let mat = |a: &[i64; 9], i: usize, j: usize| a[3 * i + j] as f64 / 2.0;
        for x in points(3, 10, 7, 2.0) {
            let got = bracket.eval(&x).unwrap();
            for i in 0..3 {
                // [A, B] = DA·B − DB·A = (MK − KM) x for A = Mx, B = Kx
                let want: f64 = (0..3)
                    .map(|j| (0..3).map(|l| mat(&m, i, l) * mat(&k, l, j) - mat(&k, i, l) * mat(&m, l, j)).sum::<f64>() * x[j])
                    .sum();
                prop_assert!((got[i] - want).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn jacobi_identity(cs in prop::array::uniform6(-3i64..4)) {
        let a = VectorField::parse(2, &[format!("{}*x1^2 + sin(x0)", cs[0]), format!("x0*x1 + {}", cs[1])]).unwrap();
        let b = VectorField::parse(2, &[format!("exp({}/4*x1)", cs[2]), format!("{}*x0^3", cs[3])]).unwrap();
        let c = VectorField::parse(2, &[format!("cos(x0 - x1) + {}", cs[4]), format!("{}*x0*x1^2", cs[5])]).unwrap();
        let br = |p: &VectorField, q: &VectorField| lie_bracket(p, q).unwrap();
        let terms = [br(&a, &br(&b, &c)), br(&b, &br(&c, &a)), br(&c, &br(&a, &b))];
        for x in points(2, 10, 3, 1.0) {
            for i in 0..2 {
                let s: f64 = terms.iter().map(|t| t.eval(&x).unwrap()[i]).sum();
                prop_assert!(s.abs() <= 1e-8, "{}", s);
            }
        }
    }
}

#[test]
fn naturality_battery() {
    let cases = [
        ("quarter turn", ["-x1", "x0"], ["2*x0 - 3*x1", "3*x0 + 2*x1"], ["(x0^2 + x1^2)*x0", "(x0^2 + x1^2)*x1"]),
        (
            "rational rotation",
            ["3/5*x0 - 4/5*x1", "4/5*x0 + 3/5*x1"],
            ["-x1", "x0"],
            ["x0*(x0^2 + x1^2)^2 - x1", "x1*(x0^2 + x1^2)^2 + x0"],
        ),
        ("dilation", ["2*x0", "2*x1"], ["x0 - 5*x1", "1/3*x0 + x1"], ["x1", "-4*x0 + 1/2*x1"]),
    ];
    let pts = points(2, 32, 9, 1.0);
    for (name, phi, a, b) in cases {
        let phi = SmoothMap::parse(2, &phi).unwrap();
        let a = VectorField::parse(2, &a).unwrap();
        let b = VectorField::parse(2, &b).unwrap();
        let rep = bracket_naturality_check(&phi, &a, &b, &pts, 1e-9).unwrap();
        assert!(rep.pass, "{name}: {rep:?}");
        assert!(rep.get("naturality_defect").unwrap() <= 1e-9);
    }
}

#[test]
fn poincare_battery() {
    // closed forms with their primitive checked through d(Hω) = ω
    let cases: Vec<(DifferentialForm, ChartDomain<f64>)> = vec![
        (
            // d(x0 x1 sin(x2)) in ℝ³
            DifferentialForm::parse(3, 1, &[("0", "x1*sin(x2)"), ("1", "x0*sin(x2)"), ("2", "x0*x1*cos(x2)")]).unwrap(),
            ChartDomain::Ball { center: vec![0.0; 3], radius: 1.5 },
        ),
        (
            // d(x0^2 x1 dx2) in ℝ³
            DifferentialForm::parse(3, 2, &[("02", "2*x0*x1"), ("12", "x0^2")]).unwrap(),
            ChartDomain::Box { lo: vec![-1.0; 3], hi: vec![1.0, 1.5, 2.0] },
        ),
        (
            // a top-degree form is always closed
            DifferentialForm::parse(2, 2, &[("01", "exp(x0)*cos(x1) + x0*x1^2")]).unwrap(),
            ChartDomain::Box { lo: vec![-1.0, -0.5], hi: vec![1.0, 2.0] },
        ),
    ];
    for (w, domain) in cases {
        let n = w.dim();
        let k = w.degree();
        let tau = poincare_primitive(&w, domain.clone()).unwrap();
        let d_tau = Exterior(&tau);
        let pts: Vec<Vec<f64>> = domain.samples(50, 17);
        assert_eq!(pts.len(), 50);
        for (i, x) in pts.iter().enumerate() {
            let vs = vectors(n, k, 1000 + i as u64);
            let got = d_tau.eval(x, &vs).unwrap();
            let want = w.eval(x, &vs).unwrap();
            assert_abs_diff_eq!(got, want, epsilon = 1e-9);
        }
    }
}
