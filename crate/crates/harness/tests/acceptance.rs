//! One test per acceptance criterion, each printing its result line.

use freelab::acceptance::{run_criterion, CriterionResult};

fn criterion(id: u32) -> CriterionResult {
    let dir = tempfile::tempdir().unwrap();
    let r = run_criterion(id, dir.path(), 1).unwrap();
    println!("{}", r.line());
    r
}

macro_rules! criteria {
    ($($name:ident => $id:expr),* $(,)?) => {
        $(
            #[test]
            fn $name() {
                let r = criterion($id);
                assert!(r.passed(), "{}", r.line());
            }
        )*
    };
}

criteria! {
    c01_semicircle_moments => 1,
    c02_operator_norm => 2,
    c03_freeness_decay => 3,
    c04_laplacian_identity => 4,
    c05_laplacian_finite_differences => 5,
    c06_lq_value_oracle => 6,
    c07_boue_dupuis => 7,
    c08_discretization_shape => 8,
    c09_convergence_in_n => 9,
    c10_truncation_inequality => 10,
    c11_gaussian_and_bridge_bounds => 11,
    c12_determinism_across_workers => 12,
}
