use proptest::prelude::*;

use super::*;
use crate::gaussdisc::{bin_slot, NoiseTable};
use crate::matrixcore::{inner_product, operator_norm, HermitianMatrix};
use crate::nclaw::semicircle_arctan_law;
use crate::randmat::{gue_increments, sample_gue_tuple_with};

fn lq_problem(n: usize, d: usize, x0: MatrixTuple, beta_c: f64, beta_f: f64) -> ControlProblem {
    assert_eq!(x0.dim(), n);
    ControlProblem::new(x0, beta_c, beta_f, 0.0, 1.0, CostSpec::lq(d).unwrap()).unwrap()
}

fn directional_fd(f: &TraceFunctional, x: &MatrixTuple, h_dir: &MatrixTuple) -> f64 {
    let h = 1e-5;
    let mut plus = x.clone();
    plus.axpy(h, h_dir);
    let mut minus = x.clone();
    minus.axpy(-h, h_dir);
    (f.value(&plus).unwrap() - f.value(&minus).unwrap()) / (2.0 * h)
}

#[test]
fn functional_gradients_match_differences() {
    let mut rng = RngStream::new(1).rng();
    let x = sample_gue_tuple_with(5, 2, 1.5, &mut rng);
    let dir = sample_gue_tuple_with(5, 2, 1.0, &mut rng);
    let family = [
        TraceFunctional::PseudoHuber {
            weights: vec![0.3, 1.2],
        },
        TraceFunctional::ArctanSpectral {
            coeffs: vec![vec![0.1, -0.4, 0.2], vec![0.0, 1.0]],
        },
        TraceFunctional::parse("u1*u2 + u1^2", &["x1*x2*x1 + x2^2", "x1^2"], 2).unwrap(),
        TraceFunctional::Zero,
    ];
    for f in &family {
        let (v, g) = f.value_and_gradient(&x).unwrap();
        assert!((v - f.value(&x).unwrap()).abs() < 1e-12);
        let fd = directional_fd(f, &x, &dir);
        let an = inner_product(&g, &dir).unwrap();
        assert!(
            (fd - an).abs() < 1e-6 * (1.0 + fd.abs()),
            "{f:?}: {fd} vs {an}"
        );
    }
}

#[test]
fn spectral_values_by_hand() {
    let x = MatrixTuple::single(HermitianMatrix::from_real_diag(&[0.0, 3.0f64.sqrt()]));
    let h = TraceFunctional::PseudoHuber { weights: vec![2.0] };
    // (sqrt(4) - 1) / 2 * 2 = 1.
    assert!((h.value(&x).unwrap() - 1.0).abs() < 1e-14);
    let a = TraceFunctional::ArctanSpectral {
        coeffs: vec![vec![1.0, 0.0, 1.0]],
    };
    let expect = 1.0 + 0.5 * (std::f64::consts::PI / 3.0).powi(2);
    assert!((a.value(&x).unwrap() - expect).abs() < 1e-14);
    assert!(h.value(&MatrixTuple::zeros(2, 2)).is_err());
}

#[test]
fn cost_checks() {
    let d = 1;
    let cost = CostSpec {
        running: TraceFunctional::PseudoHuber {
            weights: vec![0.5, 1.5],
        },
        quad_coef: 0.25,
        terminal: TraceFunctional::parse("u1 + u2^2", &["x1^4", "x1^2"], d).unwrap(),
        lip_const: 1.5,
        convexity_declared: true,
        c1: None,
    };
    cost.validate(d).unwrap();
    let s = RngStream::new(4);
    assert!(cost.check_convexity(4, d, 100, &s).unwrap().passed());
    assert!(cost.check_lipschitz(4, d, 100, &s).unwrap().passed());
    let tight = CostSpec {
        lip_const: 0.1,
        ..cost.clone()
    };
    assert!(!tight.check_lipschitz(4, d, 100, &s).unwrap().passed());
    let concave = CostSpec {
        terminal: TraceFunctional::parse("-1*u1", &["x1^2"], d).unwrap(),
        ..cost.clone()
    };
    assert!(!concave.check_convexity(4, d, 100, &s).unwrap().passed());
    assert!(cost.validate(2).is_err());
    assert!(CostSpec {
        quad_coef: -1.0,
        ..cost
    }
    .validate(d)
    .is_err());
}

#[test]
fn problem_validation_and_json() {
    let p = lq_problem(3, 2, MatrixTuple::identities(3, 2), 0.5, 1.0);
    let text = serde_json::to_string(&p).unwrap();
    let back: ControlProblem = serde_json::from_str(&text).unwrap();
    assert_eq!(back, p);
    assert!(ControlProblem::new(
        MatrixTuple::zeros(2, 1),
        0.0,
        0.0,
        1.0,
        1.0,
        CostSpec::lq(1).unwrap()
    )
    .is_err());
    assert!(ControlProblem::new(
        MatrixTuple::zeros(2, 1),
        0.0,
        0.0,
        0.0,
        1.0,
        CostSpec::lq(2).unwrap()
    )
    .is_err());
    assert!(ControlProblem::new(
        MatrixTuple::zeros(2, 1),
        -1.0,
        0.0,
        0.0,
        1.0,
        CostSpec::lq(1).unwrap()
    )
    .is_err());
}

#[test]
fn simulate_common_noise_only() {
    let n = 3;
    let x0 = MatrixTuple::identities(n, 1);
    let p = lq_problem(n, 1, x0.clone(), 1.0, 0.0);
    let k = 2;
    let policy = DiscretePolicy::zero(k, 1, 4, 8.0, 1, FeatureBasis::default());
    let gue = gue_increments(n, 1, &[0.0, 0.5, 1.0], &RngStream::new(2)).unwrap();
    let bundle = simulate_discrete(&p, &policy, &gue).unwrap();
    let table = NoiseTable::new(1, 0.5).unwrap();
    assert_eq!(bundle.entries.len(), 16);
    let total: f64 = bundle.entries.iter().map(|e| e.probability).sum();
    assert!((total - 1.0).abs() < 1e-12);
    for e in &bundle.entries {
        let mut w0 = 0.0;
        for (i, &j) in e.bins.iter().enumerate() {
            w0 += table.omegas[bin_slot(1, j).unwrap()];
            let mut expect = x0.clone();
            expect.shift_identity(w0);
            assert!(e.states[i + 1].sub(&expect).components()[0].frobenius() < 1e-14);
        }
    }
}

#[test]
fn simulate_single_constant_node() {
    let n = 2;
    let x0 =
        MatrixTuple::single(HermitianMatrix::from_real_rows(&[&[1.0, 0.5], &[0.5, -1.0]]).unwrap());
    let p = lq_problem(n, 1, x0.clone(), 0.0, 0.0);
    let a =
        MatrixTuple::single(HermitianMatrix::from_real_rows(&[&[0.0, 2.0], &[2.0, 3.0]]).unwrap());
    let policy = DiscretePolicy::constant(1, 1, 1, 8.0, &a, InfoStructure::Anticipating);
    let gue = gue_increments(n, 1, &[0.0, 1.0], &RngStream::new(3)).unwrap();
    let bundle = simulate_discrete(&p, &policy, &gue).unwrap();
    assert_eq!(bundle.entries.len(), 1);
    assert_eq!(bundle.entries[0].states[1], x0.add(&a));
}

#[test]
fn simulate_without_common_noise_is_a_single_path() {
    let n = 3;
    let p = lq_problem(n, 1, MatrixTuple::zeros(n, 1), 0.0, 1.0);
    let policy = DiscretePolicy::zero(3, 4, 1, 8.0, 1, FeatureBasis::default());
    let times = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
    let gue = gue_increments(n, 1, &times, &RngStream::new(4)).unwrap();
    let bundle = simulate_discrete(&p, &policy, &gue).unwrap();
    assert_eq!(bundle.entries.len(), 1);
    assert_eq!(bundle.entries[0].states[3], gue.total());
    let wrong = DiscretePolicy::zero(3, 4, 10, 8.0, 1, FeatureBasis::default());
    assert!(simulate_discrete(&p, &wrong, &gue).is_err());
}

#[test]
fn discrete_cost_examples() {
    let n = 4;
    let zero_terminal = CostSpec::energy_with_terminal(TraceFunctional::Zero);
    let p =
        ControlProblem::new(MatrixTuple::zeros(n, 1), 0.5, 1.0, 0.0, 1.0, zero_terminal).unwrap();
    let policy = DiscretePolicy::zero(2, 2, 6, 8.0, 1, FeatureBasis::default());
    let est = discrete_cost(&p, &policy, 16, &RngStream::new(5)).unwrap();
    assert_eq!(est.mean, 0.0);

    // E tr_n W_1^2 = 1.
    let p = lq_problem(n, 1, MatrixTuple::zeros(n, 1), 0.0, 1.0);
    let policy = DiscretePolicy::zero(1, 1, 1, 8.0, 1, FeatureBasis::default());
    let est = discrete_cost(&p, &policy, 2000, &RngStream::new(6)).unwrap();
    assert!((est.mean - 1.0).abs() < 3.0 * est.std_error, "{est:?}");
    assert!(discrete_cost(&p, &policy, 0, &RngStream::new(6)).is_err());
}

#[test]
fn non_anticipating_policies_cost_at_least_the_riccati_value() {
    let n = 4;
    let p = lq_problem(n, 1, MatrixTuple::zeros(n, 1), 0.5, 1.0);
    let reference = lq_reference(&p).unwrap();
    let basis = FeatureBasis {
        degree: 1,
        state_powers: 1,
        info: InfoStructure::Predictable,
    };
    let mut rng = RngStream::new(7).rng();
    for trial in 0..5 {
        let mut policy = DiscretePolicy::zero(4, 2, 6, 8.0, 1, basis.clone());
        for layer in &mut policy.nodes {
            for node in layer.iter_mut() {
                if let PolicyNode::Polynomial { coeffs } = node {
                    for c in coeffs.iter_mut().flatten() {
                        *c = rand::Rng::random_range(&mut rng, -1.0..1.0);
                    }
                }
            }
        }
        let est = discrete_cost(&p, &policy, 64, &RngStream::new(100 + trial)).unwrap();
        assert!(est.mean >= reference - 0.05, "{} < {reference}", est.mean);
    }
}

/// `p' = 2 p^2`, `r' = -s d p` backwards from `p(T) = 1`, `r(T) = 0` by RK4.
fn riccati_rk4(horizon: f64, noise: f64, d: f64, x2: f64) -> f64 {
    let steps = 20_000;
    let h = horizon / steps as f64;
    let f = |p: f64| (-2.0 * p * p, noise * d * p);
    let (mut p, mut r) = (1.0f64, 0.0f64);
    for _ in 0..steps {
        let k1 = f(p);
        let k2 = f(p + 0.5 * h * k1.0);
        let k3 = f(p + 0.5 * h * k2.0);
        let k4 = f(p + h * k3.0);
        p += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        r += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    }
    p * x2 + r
}

#[test]
fn lq_reference_matches_the_riccati_ode() {
    let n = 3;
    for &(beta_c, beta_f, d, t_end) in &[
        (0.5, 1.0, 1usize, 1.0),
        (0.3, 0.2, 2, 2.5),
        (0.0, 0.0, 1, 0.5),
    ] {
        let x0 = MatrixTuple::identities(n, d).scale(0.7);
        let p = ControlProblem::new(
            x0.clone(),
            beta_c,
            beta_f,
            0.0,
            t_end,
            CostSpec::lq(d).unwrap(),
        )
        .unwrap();
        let oracle = riccati_rk4(
            t_end,
            beta_c * beta_c + beta_f * beta_f,
            d as f64,
            0.49 * d as f64,
        );
        assert!((lq_reference(&p).unwrap() - oracle).abs() < 1e-10);
    }
    let p = lq_problem(n, 1, MatrixTuple::zeros(n, 1), 0.5, 1.0);
    assert!((lq_reference(&p).unwrap() - 0.625 * 3f64.ln()).abs() < 1e-15);
    assert_eq!(
        lq_reference(&lq_problem(n, 1, MatrixTuple::zeros(n, 1), 0.0, 0.0)).unwrap(),
        0.0
    );
    let x0 = MatrixTuple::identities(n, 1);
    let short =
        ControlProblem::new(x0, 0.0, 0.0, 1.0, 1.0 + 1e-12, CostSpec::lq(1).unwrap()).unwrap();
    assert!((lq_reference(&short).unwrap() - 1.0).abs() < 1e-11);
}

#[test]
fn lq_template_is_enforced() {
    let n = 2;
    let quartic =
        CostSpec::energy_with_terminal(TraceFunctional::parse("u1", &["x1^4"], 1).unwrap());
    let p = ControlProblem::new(MatrixTuple::zeros(n, 1), 0.0, 1.0, 0.0, 1.0, quartic).unwrap();
    assert!(matches!(lq_reference(&p), Err(Error::TemplateMismatch(_))));
    let split = CostSpec::energy_with_terminal(
        TraceFunctional::parse("u1 + u2", &["x1^2", "x2^2"], 2).unwrap(),
    );
    let p = ControlProblem::new(MatrixTuple::zeros(n, 2), 0.0, 1.0, 0.0, 1.0, split).unwrap();
    assert!(lq_reference(&p).is_ok());
    let mut heavy = CostSpec::lq(1).unwrap();
    heavy.quad_coef = 1.0;
    let p = ControlProblem::new(MatrixTuple::zeros(n, 1), 0.0, 1.0, 0.0, 1.0, heavy).unwrap();
    assert!(lq_reference(&p).is_err());
}

#[test]
fn discrete_lq_reference_converges_to_continuous() {
    let p = lq_problem(2, 1, MatrixTuple::identities(2, 1), 0.0, 1.0);
    let cont = lq_reference(&p).unwrap();
    for info in [InfoStructure::Anticipating, InfoStructure::Predictable] {
        let coarse = (lq_discrete_reference(&p, 100, 1, info).unwrap() - cont).abs();
        let fine = (lq_discrete_reference(&p, 10_000, 1, info).unwrap() - cont).abs();
        assert!(fine < coarse && fine < 1e-4, "{info:?}: {coarse} {fine}");
    }
    // Anticipation can only help.
    let p = lq_problem(2, 1, MatrixTuple::zeros(2, 1), 0.5, 1.0);
    let cont = lq_reference(&p).unwrap();
    let a = lq_discrete_reference(&p, 4, 2, InfoStructure::Anticipating).unwrap();
    let b = lq_discrete_reference(&p, 4, 2, InfoStructure::Predictable).unwrap();
    assert!(a < cont && cont < b);
}

#[test]
fn optimizer_reaches_the_discrete_oracle() {
    let n = 4;
    let p = lq_problem(n, 1, MatrixTuple::zeros(n, 1), 0.5, 1.0);
    for info in [InfoStructure::Anticipating, InfoStructure::Predictable] {
        let cfg = OptConfig {
            basis: FeatureBasis {
                degree: 1,
                state_powers: 1,
                info,
            },
            ..OptConfig::default()
        };
        let res = optimize_discrete_value(&p, 2, 1, 8.0, &cfg, &RngStream::new(8)).unwrap();
        let oracle = lq_discrete_reference(&p, 2, 1, info).unwrap();
        assert!(
            (res.value - oracle).abs() < 0.02 * oracle + 3.0 * res.std_error,
            "{info:?}: {} vs {oracle}",
            res.value
        );
        assert!(res.value <= res.zero_policy_value + 1e-9);
        assert!(res.converged);
        assert!(
            !res.log.is_empty()
                && res
                    .log
                    .windows(2)
                    .all(|w| w[1].batch_cost < w[0].batch_cost)
        );
    }
}

#[test]
fn deterministic_problem_value() {
    let n = 3;
    let p = lq_problem(n, 1, MatrixTuple::identities(n, 1), 0.0, 0.0);
    let res =
        optimize_discrete_value(&p, 4, 2, 8.0, &OptConfig::default(), &RngStream::new(9)).unwrap();
    assert!((res.value - 1.0 / 3.0).abs() < 0.02, "{}", res.value);

    let short = ControlProblem::new(
        MatrixTuple::identities(n, 1),
        0.0,
        0.0,
        0.0,
        1e-3,
        CostSpec::lq(1).unwrap(),
    )
    .unwrap();
    let res = optimize_discrete_value(&short, 1, 2, 8.0, &OptConfig::default(), &RngStream::new(9))
        .unwrap();
    assert!((res.value - 1.0).abs() < 3e-3, "{}", res.value);
}

#[test]
fn optimizer_preconditions() {
    let n = 2;
    let mut cost = CostSpec::lq(1).unwrap();
    cost.convexity_declared = false;
    let p = ControlProblem::new(MatrixTuple::zeros(n, 1), 0.0, 1.0, 0.0, 1.0, cost).unwrap();
    assert!(matches!(
        optimize_discrete_value(&p, 2, 1, 8.0, &OptConfig::default(), &RngStream::new(1)),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn optimizer_invariants() {
    let n = 4;
    let mut cost =
        CostSpec::energy_with_terminal(TraceFunctional::parse("u1", &["x1^4"], 1).unwrap());
    cost.c1 = Some(2.0);
    let p = ControlProblem::new(
        MatrixTuple::identities(n, 1).scale(0.5),
        0.4,
        0.8,
        0.0,
        1.0,
        cost,
    )
    .unwrap();
    let cfg = OptConfig {
        basis: FeatureBasis {
            degree: 1,
            state_powers: 3,
            info: InfoStructure::Anticipating,
        },
        ..OptConfig::default()
    };
    let wide = optimize_discrete_value(&p, 2, 2, 8.0, &cfg, &RngStream::new(10)).unwrap();
    let narrow = optimize_discrete_value(&p, 2, 2, 0.1, &cfg, &RngStream::new(10)).unwrap();
    assert!(wide.value <= wide.zero_policy_value + 1e-9);
    assert!(
        narrow.value >= wide.value - 3.0 * (narrow.std_error + wide.std_error),
        "{} vs {}",
        narrow.value,
        wide.value
    );
    for res in [&wide, &narrow] {
        assert!(res.value <= p.zero_policy_bound().unwrap());
        let eps = (res.value - wide.value).abs() + 3.0 * res.std_error;
        assert!(res.control_energy <= p.a_priori_energy_bound(eps, res.value).unwrap());
    }
}

#[test]
fn coarsening_a_constant_control() {
    let a =
        MatrixTuple::single(HermitianMatrix::from_real_rows(&[&[1.0, 0.3], &[0.3, -0.5]]).unwrap());
    let samples: Vec<FineSample> = (0..50)
        .map(|s| FineSample {
            common_increments: brownian_increments(
                &[0.0, 0.25, 0.5, 0.75, 1.0],
                &RngStream::new(s),
            )
            .unwrap(),
            controls: vec![a.clone(); 4],
        })
        .collect();
    let res = coarsen_control(&samples, &TimeGrid::new(0.0, 1.0, 2).unwrap(), 1, 8.0).unwrap();
    for layer in &res.policy.nodes {
        for node in layer {
            let PolicyNode::Constant { value } = node else {
                panic!("constant nodes expected")
            };
            assert!(value.sub(&a).components()[0].frobenius() < 1e-14);
        }
    }
    assert_eq!(res.cells, 4 + 16);
}

#[test]
fn coarsening_the_sign_of_the_first_increment() {
    let n = 1;
    let samples: Vec<FineSample> = (0..400)
        .map(|s| {
            let inc = brownian_increments(&[0.0, 0.5, 1.0], &RngStream::new(s)).unwrap();
            let sign = MatrixTuple::single(HermitianMatrix::scalar(n, inc[0].signum()));
            FineSample {
                common_increments: inc,
                controls: vec![sign.clone(), sign],
            }
        })
        .collect();
    let res = coarsen_control(&samples, &TimeGrid::new(0.0, 1.0, 2).unwrap(), 1, 8.0).unwrap();
    for (key, node) in res.policy.nodes[0].iter().enumerate() {
        let PolicyNode::Constant { value } = node else {
            panic!()
        };
        let bin_sign = if crate::gaussdisc::slot_bin(1, key) >= 0 {
            1.0
        } else {
            -1.0
        };
        assert_eq!(value.component(0).normalized_trace(), bin_sign);
    }
    assert!(res.empty_cells < res.cells);
}

#[test]
fn coarsening_does_not_raise_a_convex_cost() {
    let cost = CostSpec::energy_with_terminal(TraceFunctional::parse("u1", &["x1^4"], 1).unwrap());
    let n = 2;
    let p = ControlProblem::new(
        MatrixTuple::identities(n, 1).scale(0.3),
        1.0,
        0.0,
        0.0,
        1.0,
        cost,
    )
    .unwrap();
    let feedback = |s: &FeedbackState| {
        Ok(MatrixTuple::single(HermitianMatrix::scalar(
            n,
            -0.8 * s.common.tanh() - 0.2,
        )))
    };
    let fine_steps = 8;
    let paths: Vec<SampledTrajectory> = (0..4000)
        .map(|s| euler_maruyama(&p, feedback, fine_steps, &RngStream::new(1000 + s)).unwrap())
        .collect();
    let costs: Vec<f64> = paths.iter().map(|t| t.cost()).collect();
    let mean = costs.iter().sum::<f64>() / costs.len() as f64;
    let se = (costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (costs.len() as f64 - 1.0))
        .sqrt()
        / (costs.len() as f64).sqrt();
    let samples: Vec<FineSample> = paths
        .iter()
        .map(|t| FineSample {
            common_increments: t.common_increments.clone(),
            controls: t.controls.clone(),
        })
        .collect();
    let coarse = coarsen_control(&samples, &TimeGrid::new(0.0, 1.0, 2).unwrap(), 2, 8.0).unwrap();
    let disc = discrete_cost(&p, &coarse.policy, 1, &RngStream::new(1)).unwrap();
    assert!(
        disc.mean <= mean + 3.0 * se + 0.01,
        "{} vs {mean} +- {se}",
        disc.mean
    );
}

#[test]
fn euler_examples() {
    let n = 3;
    let x0 = MatrixTuple::identities(n, 1).scale(0.5);
    let p = lq_problem(n, 1, x0.clone(), 1.0, 0.0);
    let traj =
        euler_maruyama(&p, |_| Ok(MatrixTuple::zeros(n, 1)), 10, &RngStream::new(3)).unwrap();
    let mut expect = x0.clone();
    expect.shift_identity(traj.common_increments.iter().sum());
    assert!(traj.states[10].sub(&expect).components()[0].frobenius() < 1e-13);

    let a = MatrixTuple::single(
        HermitianMatrix::from_real_rows(&[&[0.0, 1.0, 0.0], &[1.0, 2.0, 0.0], &[0.0, 0.0, -1.0]])
            .unwrap(),
    );
    let p = ControlProblem::new(x0.clone(), 0.0, 0.0, 0.5, 2.0, CostSpec::lq(1).unwrap()).unwrap();
    let traj = euler_maruyama(&p, |_| Ok(a.clone()), 7, &RngStream::new(3)).unwrap();
    assert!(traj.states[7].sub(&x0.add(&a.scale(1.5))).components()[0].frobenius() < 1e-13);
}

#[test]
fn euler_refinement_agrees_at_common_times() {
    let n = 2;
    let p = lq_problem(n, 1, MatrixTuple::zeros(n, 1), 0.7, 0.9);
    let a = MatrixTuple::identities(n, 1).scale(0.3);
    let fine_times: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
    let coarse_times: Vec<f64> = (0..=4).map(|k| k as f64 / 4.0).collect();
    let common = brownian_increments(&fine_times, &RngStream::new(1)).unwrap();
    let gue = gue_increments(n, 1, &fine_times, &RngStream::new(2)).unwrap();
    let coarse_common: Vec<f64> = common.chunks(2).map(|c| c[0] + c[1]).collect();
    let coarse_gue = GuePath {
        n,
        d: 1,
        time_grid: coarse_times,
        increments: gue.increments.chunks(2).map(|c| c[0].add(&c[1])).collect(),
    };
    let fine = euler_maruyama_with(&p, |_| Ok(a.clone()), &common, &gue).unwrap();
    let coarse = euler_maruyama_with(&p, |_| Ok(a.clone()), &coarse_common, &coarse_gue).unwrap();
    for k in 0..=4 {
        assert!(fine.states[2 * k].sub(&coarse.states[k]).components()[0].frobenius() < 1e-13);
    }
}

fn huber_problem(n: usize, d: usize, weights: Vec<f64>, quad: f64, t_end: f64) -> ControlProblem {
    let kappa = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let cost = CostSpec {
        running: TraceFunctional::PseudoHuber { weights },
        quad_coef: quad,
        terminal: TraceFunctional::Zero,
        lip_const: kappa,
        convexity_declared: true,
        c1: None,
    };
    ControlProblem::new(MatrixTuple::zeros(n, d), 0.0, 1.0, 0.0, t_end, cost).unwrap()
}

#[test]
fn truncation_within_the_cap_is_tight() {
    let n = 3;
    let p = huber_problem(n, 1, vec![1.0, 0.5], 0.5, 1.0);
    let mut rng = RngStream::new(2).rng();
    let alpha: Vec<MatrixTuple> = (0..5)
        .map(|_| sample_gue_tuple_with(n, 1, 0.3, &mut rng))
        .collect();
    let y: Vec<MatrixTuple> = (0..5)
        .map(|_| sample_gue_tuple_with(n, 1, 1.0, &mut rng))
        .collect();
    let rep = truncation_inequality_check(&p, &y, &alpha, 10.0).unwrap();
    assert_eq!(rep.lhs, rep.rhs);
    assert!(rep.holds);
    let policy = DiscretePolicy::constant(2, 1, 4, 8.0, &alpha[0], InfoStructure::Anticipating);
    assert_eq!(clip_policy(&policy, 10.0).unwrap().nodes, policy.nodes);
}

#[test]
fn truncation_scalar_closed_form() {
    let r = 1.5;
    let k = 10;
    let p = huber_problem(1, 1, vec![1.0, 0.0], 0.5, 1.0);
    let alpha = vec![MatrixTuple::single(HermitianMatrix::scalar(1, 2.0 * r)); k];
    let y = vec![MatrixTuple::zeros(1, 1); k];
    let rep = truncation_inequality_check(&p, &y, &alpha, r).unwrap();
    let h = |s: f64| (1.0 + s * s).sqrt() - 1.0;
    let delta = 1.0 / k as f64;
    let lhs: f64 = (1..=k)
        .map(|i| delta * (h(i as f64 * delta * r) + 0.5 * r * r))
        .sum();
    let rhs: f64 = (1..=k)
        .map(|i| delta * (h(2.0 * i as f64 * delta * r) + 0.5 * 4.0 * r * r))
        .sum();
    assert!((rep.lhs - lhs).abs() < 1e-12 && (rep.rhs - rhs).abs() < 1e-12);
    assert!((rep.penalty - 2.0 / r * 4.0 * r * r).abs() < 1e-12);
    assert!(rep.holds);
}

#[test]
fn boue_dupuis_lhs_examples() {
    let s = RngStream::new(12);
    let constant = TraceFunctional::parse("0.75", &[], 1).unwrap();
    assert!((boue_dupuis_lhs(&constant, 4, 1, 100, &s).unwrap().value - 0.75).abs() < 1e-14);
    let psi = TraceFunctional::parse("0.5*u1", &["x1^2"], 1).unwrap();
    let est = boue_dupuis_lhs(&psi, 8, 1, 10_000, &s).unwrap();
    assert!((est.value - 0.5 * 2f64.ln()).abs() < 0.02, "{est:?}");
    let positive = TraceFunctional::PseudoHuber { weights: vec![3.0] };
    assert!(boue_dupuis_lhs(&positive, 4, 1, 500, &s).unwrap().value >= 0.0);
    assert!(boue_dupuis_lhs(&psi, 4, 1, 0, &s).is_err());
}

#[test]
fn boue_dupuis_rhs_examples() {
    let s = RngStream::new(13);
    let zero = boue_dupuis_rhs(&TraceFunctional::Zero, 4, 1, 4, &OptConfig::default(), &s).unwrap();
    assert_eq!(zero.value, 0.0);
    let psi = TraceFunctional::parse("0.5*u1", &["x1^2"], 1).unwrap();
    let target = 0.5 * 2f64.ln();
    let rhs = boue_dupuis_rhs(&psi, 8, 1, 8, &OptConfig::default(), &RngStream::new(2)).unwrap();
    assert!((rhs.value - target).abs() <= 0.05 * target, "{}", rhs.value);
    let lhs = boue_dupuis_lhs(&psi, 8, 1, 10_000, &s).unwrap();
    assert!(rhs.value >= lhs.value - 3.0 * lhs.std_error.hypot(rhs.std_error));
    // Predictable discrete optimum on 8 steps: sum_i delta / (2 + 2 delta (8 - i)).
    let oracle: f64 = (1..=8).map(|i| 0.125 / (2.0 + 0.25 * (8 - i) as f64)).sum();
    assert!(
        (rhs.value - oracle).abs() < 3.0 * rhs.std_error + 0.01 * oracle,
        "{} vs {oracle}",
        rhs.value
    );
}

#[test]
fn rate_function_examples() {
    let law = semicircle_arctan_law(4).unwrap();
    let cfg = OptConfig {
        batch: 32,
        validation: 128,
        ..OptConfig::default()
    };
    assert!(rate_function_candidate(&law, &[], 4, 4, &cfg, &RngStream::new(1)).is_err());
    let constant =
        rate_function_candidate(&law, &[vec![vec![0.4]]], 4, 4, &cfg, &RngStream::new(1)).unwrap();
    assert!(constant.value.abs() < 1e-14);
    let family: Vec<Vec<Vec<f64>>> = [0.1, -0.1, 0.2, -0.2]
        .iter()
        .map(|&c| vec![vec![0.0, c]])
        .collect();
    let est = rate_function_candidate(&law, &family, 8, 8, &cfg, &RngStream::new(2)).unwrap();
    assert!(est.value.abs() < 0.05, "{est:?}");
    assert_eq!(est.members.len(), 4);
}

fn random_alpha_path(n: usize, d: usize, steps: usize, scale: f64, seed: u64) -> Vec<MatrixTuple> {
    let mut rng = RngStream::new(seed).rng();
    (0..steps)
        .map(|_| sample_gue_tuple_with(n, d, scale, &mut rng))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn truncation_inequality_holds(
        seed in 0u64..1_000_000,
        n in 1usize..5,
        d in 1usize..3,
        steps in 1usize..8,
        r in 0.1f64..3.0,
        scale in 0.1f64..6.0,
        quad in 0.0f64..2.0,
        t_end in 0.2f64..3.0,
        w in proptest::collection::vec(0.0f64..2.0, 4),
    ) {
        let p = huber_problem(n, d, w[..2 * d].to_vec(), quad, t_end);
        let alpha = random_alpha_path(n, d, steps, scale, seed);
        let y = random_alpha_path(n, d, steps, 1.0, seed + 1);
        let rep = truncation_inequality_check(&p, &y, &alpha, r).unwrap();
        prop_assert!(rep.holds, "{:?}", rep);
    }

    #[test]
    fn realized_controls_respect_the_cap(seed in 0u64..1_000_000, r in 0.05f64..2.0, scale in 0.1f64..5.0) {
        let n = 3;
        let value = random_alpha_path(n, 2, 1, scale, seed).remove(0);
        let policy = DiscretePolicy::constant(1, 1, 4, 8.0, &value, InfoStructure::Anticipating);
        let clipped = clip_policy(&policy, r).unwrap();
        for node in &clipped.nodes[0] {
            let PolicyNode::Constant { value } = node else { unreachable!() };
            for c in value.components() {
                prop_assert!(operator_norm(c).unwrap() <= r * (1.0 + 1e-12));
            }
        }
        let features = FeatureBasis::default().features(&value, &random_alpha_path(n, 2, 1, 1.0, seed + 7), 1.0, 1);
        let mut poly = DiscretePolicy::zero(1, 1, 4, r, 2, FeatureBasis::default());
        if let PolicyNode::Polynomial { coeffs } = &mut poly.nodes[0][0] {
            for (l, row) in coeffs.iter_mut().enumerate() {
                row[1 + l] = scale;
                row[0] = scale;
            }
        }
        for c in poly.control(1, 0, &features, true).unwrap().components() {
            prop_assert!(operator_norm(c).unwrap() <= r * (1.0 + 1e-12));
        }
    }
}

use crate::gaussdisc::TimeGrid;
use crate::randmat::{brownian_increments, GuePath};
