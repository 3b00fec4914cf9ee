use super::*;
use crate::randmat::RngStream;

#[test]
fn boundaries() {
    assert_eq!(bin_boundaries(2, 0).unwrap(), (0.0, 0.5));
    assert_eq!(bin_boundaries(2, 2).unwrap(), (1.0, f64::INFINITY));
    assert_eq!(bin_boundaries(2, -3).unwrap(), (f64::NEG_INFINITY, -1.0));
    assert_eq!(bin_boundaries(2, -2).unwrap(), (-1.0, -0.5));
    assert!(bin_boundaries(2, 3).is_err());
    assert!(bin_boundaries(2, -4).is_err());
}

#[test]
fn indices_land_in_their_intervals() {
    assert_eq!(bin_index(2, 0.0), -1);
    assert_eq!(bin_index(2, 0.5), 0);
    assert_eq!(bin_index(2, 0.50001), 1);
    assert_eq!(bin_index(2, 1.0), 1);
    assert_eq!(bin_index(2, 1.0001), 2);
    assert_eq!(bin_index(2, -1.0), -3);
    assert_eq!(bin_index(2, -0.9999), -2);
    for k in -300..300 {
        let x = k as f64 * 0.00731;
        for n in [1, 3, 7] {
            let (lo, hi) = bin_boundaries(n, bin_index(n, x)).unwrap();
            assert!(lo < x && x <= hi, "{x} in ({lo}, {hi}]");
        }
    }
}

#[test]
fn probabilities_partition_and_are_symmetric() {
    for &(n, delta) in &[(1, 1.0), (2, 0.25), (8, 0.01), (3, 4.0)] {
        let table = NoiseTable::new(n, delta).unwrap();
        let total: f64 = table.probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for slot in 0..table.len() {
            let j = slot_bin(n, slot);
            let mirror = bin_slot(n, -j - 1).unwrap();
            assert!((table.probs[slot] - table.probs[mirror]).abs() < 1e-15);
            assert!((table.omegas[slot] + table.omegas[mirror]).abs() < 1e-14);
        }
        let mean: f64 = table
            .probs
            .iter()
            .zip(&table.omegas)
            .map(|(p, w)| p * w)
            .sum();
        assert!(mean.abs() < 1e-12);
    }
    assert!((bin_probability(1, 1.0, 1).unwrap() - 0.158_655_253_931_457).abs() < 1e-12);
}

#[test]
fn conditional_means() {
    // Mills-ratio oracle: 0.5 phi(2) / Q(2), with Q(2) = 0.0227501319481792.
    let oracle =
        0.5 * (-2.0f64).exp() / (2.0 * std::f64::consts::PI).sqrt() / 0.022_750_131_948_179_2;
    let tail = bin_conditional_mean(2, 0.25, 2).unwrap();
    assert!((tail - oracle).abs() < 1e-12, "{tail}");
    assert!((tail - 1.186_608).abs() < 1e-6);
    let interior = bin_conditional_mean(0, 0.25, 2).unwrap();
    assert!(interior > 0.0 && interior <= 0.5);
    for &delta in &[1.0, 0.25, 0.01] {
        for &n in &[1usize, 2, 8] {
            let table = NoiseTable::new(n, delta).unwrap();
            for slot in 0..table.len() {
                let j = slot_bin(n, slot);
                let w = table.omegas[slot];
                assert!(w.abs() <= 2.0, "delta={delta} N={n} j={j}: {w}");
                if !is_tail(n, j) {
                    assert!(w.abs() <= 1.0);
                    let (lo, hi) = bin_boundaries(n, j).unwrap();
                    assert!(lo <= w && w <= hi);
                }
                let q = bin_conditional_mean_quadrature(j, delta, n).unwrap();
                assert!((q - w).abs() < 1e-9, "quadrature {q} vs closed form {w}");
            }
        }
    }
}

#[test]
fn vanishing_bins_are_reported() {
    let err = bin_conditional_mean(8, 1e-5, 8).unwrap_err();
    assert!(matches!(err, Error::VanishingProbability { .. }));
}

#[test]
fn absdev_bounds() {
    let d = bin_conditional_absdev(1, 0.01, 4).unwrap();
    assert!(d.value <= 0.25 && d.within_bound());
    let t = bin_conditional_absdev(4, 0.04, 4).unwrap();
    assert!(t.value <= 0.2 && t.within_bound());
    for &delta in &[1.0, 0.25, 0.01] {
        for &n in &[1usize, 2, 8] {
            for slot in 0..bin_count(n) {
                let j = slot_bin(n, slot);
                if bin_probability(j, delta, n).unwrap() > 1e-200 {
                    assert!(bin_conditional_absdev(j, delta, n).unwrap().within_bound());
                }
            }
        }
    }
    // A cell holding essentially all of the mass reduces to the folded normal.
    let delta = 1e-4;
    let v = conditional_absdev_interval(-1.0, 1.0, 0.0, delta).unwrap();
    assert!((v - (2.0 * delta / std::f64::consts::PI).sqrt()).abs() < 1e-10);
}

#[test]
fn paths() {
    let table = NoiseTable::new(1, 1.0).unwrap();
    let empty = BinPath::new(1, vec![]).unwrap();
    assert_eq!(path_probability(&empty, &table).unwrap(), 1.0);
    assert_eq!(discrete_noise_value(&empty, 0, &table).unwrap(), 0.0);
    let p = BinPath::new(1, vec![1, 1]).unwrap();
    assert!((path_probability(&p, &table).unwrap() - 0.025_171_490_6).abs() < 1e-9);
    for j in -2..=1 {
        let q = BinPath::new(1, vec![j, -j - 1]).unwrap();
        assert!(discrete_noise_value(&q, 2, &table).unwrap().abs() < 1e-15);
    }
    assert!(BinPath::new(1, vec![2]).is_err());
    assert!(discrete_noise_value(&p, 3, &table).is_err());
}

#[test]
fn bulk_and_edge() {
    assert_eq!(
        classify_bulk_edge(&BinPath::new(3, vec![0; 5]).unwrap()),
        PathClass::Bulk
    );
    assert_eq!(
        classify_bulk_edge(&BinPath::new(3, vec![0, 3, 0]).unwrap()),
        PathClass::Edge
    );
    assert_eq!(
        classify_bulk_edge(&BinPath::new(3, vec![-4]).unwrap()),
        PathClass::Edge
    );
    let (mass, union) = edge_mass(8, 4, 1.0 / 8.0).unwrap();
    assert!(mass <= union);
    assert!(union <= 0.0375 && union > 0.0374);
}

#[test]
fn time_grid() {
    let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
    assert_eq!(g.delta(), 0.25);
    assert_eq!(g.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert!(TimeGrid::new(1.0, 1.0, 4).is_err());
    assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
}

#[test]
fn appendix_bounds_on_a_grid() {
    for k in 0..=50 {
        let z = 0.1 * k as f64;
        assert!(truncated_gaussian_variance(z) <= 1.0);
        if z >= 1.0 {
            assert!(truncated_gaussian_mean(z) <= 2.0 * z);
        }
    }
}

#[test]
fn bridge_checks() {
    let s = RngStream::new(21);
    assert!(bridge_bound_check(0.0, 0.5, 1.0, 10_000, &s)
        .unwrap()
        .holds());
    let flat = bridge_bound_check(0.0, 0.0, 1.0, 1000, &s).unwrap();
    assert!(flat.holds() && flat.worst_gap <= 0.0);
    let full = bridge_bound_check(0.0, 1.0, 1.0, 1000, &s).unwrap();
    assert!(full.holds() && full.worst_gap.abs() < 1e-12);
    assert!(bridge_bound_check(0.5, 0.2, 1.0, 10, &s).is_err());
    assert!(bridge_bound_check(1.0, 1.0, 1.0, 10, &s).is_err());
    assert!(bridge_bound_check_matrix(0.0, 0.5, 1.0, 8, 2000, &s)
        .unwrap()
        .holds());
}
