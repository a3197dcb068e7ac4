use std::collections::BTreeSet;

use proptest::prelude::*;
use spinbath_core::constants::PhysicalConstants;
use spinbath_core::lattice::{dipolar_coupling_khz, generate_lattice, sample_bath, shells_within, LATTICE_CONSTANT};

/// Diamond as an fcc lattice with a two-atom basis, enumerated cell by
/// cell, in units of a/4.
fn brute_force(radius: f64) -> BTreeSet<[i32; 3]> {
    let fcc = [[0, 0, 0], [0, 2, 2], [2, 0, 2], [2, 2, 0]];
    let r = radius * 4.0 / LATTICE_CONSTANT;
    let cells = (r / 4.0).ceil() as i32 + 1;
    let mut out = BTreeSet::new();
    for i in -cells..=cells {
        for j in -cells..=cells {
            for k in -cells..=cells {
                for b in fcc {
                    for shift in [[0, 0, 0], [1, 1, 1]] {
                        let g = [4 * i + b[0] + shift[0], 4 * j + b[1] + shift[1], 4 * k + b[2] + shift[2]];
                        let n2 = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]) as f64;
                        if n2 <= r * r * (1.0 + 1e-12) && g != [0, 0, 0] && g != [1, 1, 1] {
                            out.insert(g);
                        }
                    }
                }
            }
        }
    }
    out
}

#[test]
fn generation_matches_unit_cell_enumeration() {
    for radius in [2.0, 5.0, 9.3, 15.0] {
        let got: BTreeSet<[i32; 3]> = generate_lattice(radius).unwrap().iter().map(|s| s.grid).collect();
        assert_eq!(got, brute_force(radius), "radius {radius}");
    }
}

#[test]
fn coupling_decreases_along_axis() {
    let c = PhysicalConstants::default();
    let sites = generate_lattice(30.0).unwrap();
    let mut on_axis: Vec<f64> = sites
        .iter()
        .filter(|s| s.grid[0] > 0 && s.grid[0] == s.grid[1] && s.grid[1] == s.grid[2])
        .map(|s| s.distance())
        .collect();
    on_axis.sort_by(f64::total_cmp);
    assert!(on_axis.len() > 5);
    for w in on_axis.windows(2) {
        assert!(dipolar_coupling_khz(&c, w[0]) > dipolar_coupling_khz(&c, w[1]));
    }
}

#[test]
fn shell_occupancy_matches_expectation() {
    let shells = shells_within(6.0).unwrap();
    let n = 0.2;
    let seeds = 2000u64;
    for k in 1..=4u32 {
        let members: Vec<usize> = (0..shells.sites.len()).filter(|&i| shells.sites[i].shell == k).collect();
        let m = members.len() as f64;
        let mut total = 0usize;
        for seed in 0..seeds {
            let b = sample_bath(&shells.sites, n, seed).unwrap();
            total += b.occupied.iter().filter(|i| members.contains(i)).count();
        }
        let mean = total as f64 / seeds as f64;
        let sigma = (m * n * (1.0 - n) / seeds as f64).sqrt();
        assert!((mean - m * n).abs() < 3.0 * sigma, "shell {k}: {mean} vs {}", m * n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sampling_is_deterministic(radius in 3.0..12.0f64, n in 0.0..1.0f64, seed in any::<u64>()) {
        let sites = generate_lattice(radius).unwrap();
        let a = sample_bath(&sites, n, seed).unwrap();
        let b = sample_bath(&sites, n, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        a.write_csv(&mut csv_a).unwrap();
        b.write_csv(&mut csv_b).unwrap();
        prop_assert_eq!(csv_a, csv_b);
    }
}
