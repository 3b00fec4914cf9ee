use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::randmat::{sample_gue_tuple_with, sample_haar_unitary_with};

fn random_tuple(n: usize, d: usize, seed: u64) -> MatrixTuple {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_gue_tuple_with(n, d, 1.0, &mut rng)
}

fn random_function(d: usize, seed: u64) -> CylindricalFunction {
    CylindricalFunction::random(d, 2, 4, 3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn square_sum(d: usize) -> CylindricalFunction {
    let text: Vec<String> = (1..=d).map(|j| format!("x{j}^2")).collect();
    let outer: Vec<String> = (1..=d).map(|o| format!("u{o}")).collect();
    let inners: Vec<&str> = text.iter().map(String::as_str).collect();
    CylindricalFunction::parse(&outer.join(" + "), &inners, d).unwrap()
}

/// Every basis direction `e^l E`, tagged with its letter.
fn directions(n: usize, d: usize) -> Vec<MatrixTuple> {
    let mut out = Vec::new();
    for l in 0..d {
        for i in 0..n {
            for j in 0..n {
                let mut t = MatrixTuple::zeros(n, d);
                t.components_mut()[l] = basis_element(n, i, j).unwrap();
                out.push(t);
            }
        }
    }
    out
}

fn shifted(x: &MatrixTuple, s: f64, dir: &MatrixTuple) -> MatrixTuple {
    let mut y = x.clone();
    y.axpy(s, dir);
    y
}

#[test]
fn eval_examples() {
    let u = CylindricalFunction::parse("u1", &["x1^2"], 1).unwrap();
    let x = random_tuple(5, 1, 1);
    let expected = x.component(0).inner(x.component(0));
    assert!((u.eval(&x).unwrap() - expected).abs() < 1e-12);

    let u = CylindricalFunction::parse("u1*u2", &["x1", "x1^3"], 1).unwrap();
    let x = MatrixTuple::single(HermitianMatrix::from_real_diag(&[1.0, 2.0]));
    assert!((u.eval(&x).unwrap() - 6.75).abs() < 1e-14);

    let u = random_function(2, 3);
    let x = random_tuple(4, 2, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v = sample_haar_unitary_with(4, &mut rng);
    let y = x.map(|a| HermitianMatrix::project(v.matmul(a.matrix()).matmul(&v.adjoint())));
    assert!((u.eval(&x).unwrap() - u.eval(&y).unwrap()).abs() < 1e-10);

    assert!(CylindricalFunction::parse("u1", &["x1^2"], 1)
        .unwrap()
        .eval(&MatrixTuple::zeros(3, 2))
        .is_ok());
    assert!(CylindricalFunction::parse("u1", &["x2^2"], 2)
        .unwrap()
        .eval(&MatrixTuple::zeros(3, 1))
        .is_err());
    assert!(CylindricalFunction::parse("u1", &["i*x1"], 1).is_err());
    assert!(CylindricalFunction::parse("u1*u2", &["x1"], 1).is_err());
}

#[test]
fn gradient_examples() {
    let x = random_tuple(4, 1, 7);
    let u = CylindricalFunction::parse("u1", &["x1^2"], 1).unwrap();
    let g = u.gradient(&x).unwrap();
    assert!(
        g.component(0)
            .matrix()
            .max_abs_diff(x.component(0).scale(2.0).matrix())
            < 1e-12
    );

    let c = CylindricalFunction::parse("3", &[], 1).unwrap();
    assert!(c.gradient(&x).unwrap().component(0).frobenius() == 0.0);

    let u = CylindricalFunction::parse("u1^2", &["x1^2"], 1).unwrap();
    let id = MatrixTuple::identities(6, 1);
    let g = u.gradient(&id).unwrap();
    assert!(
        g.component(0)
            .matrix()
            .max_abs_diff(HermitianMatrix::scalar(6, 4.0).matrix())
            < 1e-12
    );
}

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..4 {
        let (n, d) = (3, 2);
        let u = random_function(d, 100 + seed);
        let x = random_tuple(n, d, 200 + seed);
        let g = u.gradient(&x).unwrap();
        let h = 1e-5;
        for dir in directions(n, d) {
            let fd = (u.eval(&shifted(&x, h, &dir)).unwrap()
                - u.eval(&shifted(&x, -h, &dir)).unwrap())
                / (2.0 * h);
            let exact = crate::matrixcore::inner_product(&g, &dir).unwrap();
            assert!(
                (fd - exact).abs() <= 1e-6 * exact.abs().max(1.0),
                "{fd} vs {exact}"
            );
        }
    }
}

#[test]
fn hessian_examples() {
    let x = random_tuple(4, 1, 11);
    let a = random_tuple(4, 1, 12);
    let u = CylindricalFunction::parse("u1", &["x1^2"], 1).unwrap();
    let expected = 2.0 * a.component(0).inner(a.component(0));
    assert!((u.hessian_bilinear(&x, &a, &a).unwrap() - expected).abs() < 1e-12);

    let lin = CylindricalFunction::parse("2*u1 - u2", &["x1", "x1 + 3*x2"], 2).unwrap();
    let x = random_tuple(4, 2, 13);
    let a = random_tuple(4, 2, 14);
    assert_eq!(lin.hessian_bilinear(&x, &a, &a).unwrap(), 0.0);
}

#[test]
fn hessian_symmetric_and_matches_finite_differences() {
    for seed in 0..4 {
        let (n, d) = (3, 2);
        let u = random_function(d, 300 + seed);
        let x = random_tuple(n, d, 400 + seed);
        let a = random_tuple(n, d, 500 + seed);
        let b = random_tuple(n, d, 600 + seed);
        let ab = u.hessian_bilinear(&x, &a, &b).unwrap();
        let ba = u.hessian_bilinear(&x, &b, &a).unwrap();
        assert!((ab - ba).abs() <= 1e-9 * ab.abs().max(1.0));
        let h = 1e-3;
        let f = |s: f64, t: f64| {
            let mut y = x.clone();
            y.axpy(s, &a);
            y.axpy(t, &b);
            u.eval(&y).unwrap()
        };
        let fd = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
        assert!((fd - ab).abs() <= 1e-5 * ab.abs().max(1.0), "{fd} vs {ab}");
    }
}

#[test]
fn gue_laplacian_examples() {
    for d in 1..=3 {
        let u = square_sum(d);
        let x = random_tuple(4, d, 20 + d as u64);
        assert!((u.gue_laplacian(&x).unwrap() - 2.0 * d as f64).abs() < 1e-12);
        assert!((u.free_laplacian(&x).unwrap() - 2.0 * d as f64).abs() < 1e-12);
        assert!(u.correction_term(&x).unwrap().abs() < 1e-15);
    }
    let c = CylindricalFunction::parse("1.5", &[], 1).unwrap();
    assert_eq!(c.gue_laplacian(&random_tuple(3, 1, 1)).unwrap(), 0.0);
    assert_eq!(c.free_laplacian(&random_tuple(3, 1, 1)).unwrap(), 0.0);

    let too_big = MatrixTuple::zeros(33, 4);
    assert!(matches!(
        square_sum(4).gue_laplacian(&too_big),
        Err(Error::GuardExceeded { .. })
    ));
    assert!(square_sum(1)
        .gue_laplacian(&MatrixTuple::zeros(64, 1))
        .is_ok());
}

#[test]
fn gue_laplacian_matches_finite_differences() {
    let (n, d) = (4, 2);
    let u = random_function(d, 31);
    let x = random_tuple(n, d, 32);
    let h = 1e-3;
    let u0 = u.eval(&x).unwrap();
    let mut fd = 0.0;
    for dir in directions(n, d) {
        fd += u.eval(&shifted(&x, h, &dir)).unwrap() - 2.0 * u0
            + u.eval(&shifted(&x, -h, &dir)).unwrap();
    }
    fd /= h * h * (n * n) as f64;
    assert!((u.fd_gue_laplacian(&x, h).unwrap() - fd).abs() < 1e-9 * (1.0 + fd.abs()));
    assert!(u.fd_gue_laplacian(&x, 0.0).is_err());
    let exact = u.gue_laplacian(&x).unwrap();
    assert!((fd - exact).abs() <= 1e-5 * exact.abs(), "{fd} vs {exact}");
}

#[test]
fn free_laplacian_examples() {
    let quartic = CylindricalFunction::parse("u1", &["x1^4"], 1).unwrap();
    assert_eq!(
        quartic.free_laplacian(&MatrixTuple::zeros(3, 1)).unwrap(),
        0.0
    );
    // d(4x^3) = 4(1 (x) x^2 + x (x) x + x^2 (x) 1).
    let x = random_tuple(5, 1, 41);
    let t1 = x.component(0).normalized_trace();
    let t2 = x.component(0).inner(x.component(0));
    let expected = 4.0 * (2.0 * t2 + t1 * t1);
    assert!((quartic.free_laplacian(&x).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn comparison_identity_examples() {
    let u = CylindricalFunction::parse("u1^2", &["x1^2"], 1).unwrap();
    for seed in 0..5 {
        let x = random_tuple(4, 1, 50 + seed);
        let t2 = x.component(0).inner(x.component(0));
        assert!((u.correction_term(&x).unwrap() - 8.0 * t2 / 16.0).abs() < 1e-12);
        assert!(u.identity_check(&x, 1e-10).unwrap());
    }
    let u = random_function(2, 60);
    let x = random_tuple(6, 2, 61);
    assert!(
        u.identity_check(&x, 1e-10).unwrap(),
        "residual {}",
        u.identity_residual(&x).unwrap()
    );
}

#[test]
fn comparison_identity_is_exact_on_random_inputs() {
    for k in 0..50u64 {
        let n = [3, 4, 6][(k % 3) as usize];
        let d = 1 + (k % 2) as usize;
        let u = random_function(d, 1000 + k);
        let x = random_tuple(n, d, 2000 + k);
        let r = u.identity_residual(&x).unwrap();
        assert!(r.abs() < 1e-10, "case {k}: residual {r}");
    }
}

#[test]
fn free_laplacian_scale_covariance() {
    // U_s(X) = U(sX) has Theta U_s(X) = s^2 (Theta U)(sX).
    let s: f64 = 1.7;
    let base = CylindricalFunction::parse(
        "u1*u2 + u2^2",
        &["x1^3 + x2*x1*x2", "x1*x2 + x2*x1 - x2^2"],
        2,
    )
    .unwrap();
    let scaled_inners: Vec<NCPolynomial> = base
        .inners()
        .iter()
        .map(|p| {
            let terms = p
                .terms()
                .map(|(w, c)| (w.clone(), c * s.powi(w.len() as i32)));
            NCPolynomial::from_terms(2, terms).unwrap()
        })
        .collect();
    let scaled = CylindricalFunction::new(base.outer().clone(), scaled_inners).unwrap();
    let x = random_tuple(4, 2, 70);
    let lhs = scaled.free_laplacian(&x).unwrap();
    let rhs = s * s * base.free_laplacian(&x.scale(s)).unwrap();
    assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0));
}

#[test]
fn outer_polynomial() {
    let g = OuterPolynomial::parse("u1^2*u2 - 3*u2 + 0.5", 2).unwrap();
    assert_eq!(g.degree(), 3);
    assert!((g.eval(&[2.0, 3.0]) - (12.0 - 9.0 + 0.5)).abs() < 1e-15);
    assert!((g.partial(0).eval(&[2.0, 3.0]) - 12.0).abs() < 1e-15);
    assert!((g.partial(1).eval(&[2.0, 3.0]) - 1.0).abs() < 1e-15);
    assert!((g.partial(0).partial(0).eval(&[2.0, 3.0]) - 6.0).abs() < 1e-15);
    assert_eq!(
        OuterPolynomial::parse("u2*u1 - u1*u2", 2)
            .unwrap()
            .to_string(),
        "0"
    );
    assert!(OuterPolynomial::parse("u3", 2).is_err());
    assert!(OuterPolynomial::parse("2i*u1", 1).is_err());
    let back = OuterPolynomial::parse(&g.to_string(), 2).unwrap();
    assert_eq!(back, g);
}

#[test]
fn json_round_trip() {
    let u = random_function(2, 80);
    let text = serde_json::to_string(&u).unwrap();
    let back: CylindricalFunction = serde_json::from_str(&text).unwrap();
    let x = random_tuple(3, 2, 81);
    assert!((u.eval(&x).unwrap() - back.eval(&x).unwrap()).abs() < 1e-12);
    let doc: CylindricalFunction =
        serde_json::from_str(r#"{"outer": "u1", "inners": ["x1*x2 + x2*x1"]}"#).unwrap();
    assert_eq!(doc.d(), 2);
}

#[test]
fn generator_slope_under_zero_control() {
    // X_t = beta_c B_t 1 + beta_f H_t with GUE Brownian H; for U = sum tau(x_j^2)
    // the expectation grows with slope (beta_c^2 + beta_f^2) d.
    let (n, d, paths) = (4, 2, 2000);
    let (bc, bf) = (0.6, 0.8);
    let u = square_sum(d);
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    for &t in &[0.5, 1.0] {
        let mut mean = 0.0;
        for _ in 0..paths {
            let mut x = sample_gue_tuple_with(n, d, bf * f64::sqrt(t), &mut rng);
            let b: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            x.shift_identity(bc * t.sqrt() * b);
            mean += u.eval(&x).unwrap();
        }
        mean /= paths as f64;
        let slope = mean / t;
        let expected = (bc * bc + bf * bf) * d as f64;
        assert!(
            (slope - expected).abs() < 0.05 * expected,
            "t={t}: {slope} vs {expected}"
        );
    }
}
