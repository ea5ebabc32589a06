//! Decomposition tables against independent counting oracles.
//!
//! The oracle side is pure integer recursion (see `common`); the algorithm
//! side runs the numerical commutant pipeline. Expected values for the small
//! tables are additionally frozen as literals, so a simultaneous bug in both
//! sides would still have to reproduce the published numbers.

mod common;

use std::collections::BTreeMap;

use common::{dim_histogram, hom_dim_oracle, so3_dim_multiplicities, so4_dim_multiplicities, spin_multiplicities};
use ncfb::liegroup::Rep;
use ncfb::repcat::{build_registry, decompose, intertwiner_space};
use ncfb::Ctx;

fn ctx() -> Ctx<f64> {
    Ctx::default()
}

#[test]
fn counting_oracle_reproduces_frozen_tables() {
    assert_eq!(
        spin_multiplicities(2),
        BTreeMap::from([(0, 1), (1, 1), (2, 1)])
    );
    assert_eq!(
        spin_multiplicities(3),
        BTreeMap::from([(0, 1), (1, 3), (2, 2), (3, 1)])
    );
    assert_eq!(
        spin_multiplicities(4),
        BTreeMap::from([(0, 3), (1, 6), (2, 6), (3, 3), (4, 1)])
    );
    // Completeness: multiplicities weighted by carrier dimension fill the
    // full tensor power.
    for k in 0..=6 {
        let total: usize = spin_multiplicities(k)
            .iter()
            .map(|(j, m)| (2 * j + 1) * m)
            .sum();
        assert_eq!(total, 3usize.pow(k as u32), "power {k}");
        let total4: usize = so4_dim_multiplicities(k)
            .iter()
            .map(|(d, m)| d * m)
            .sum();
        assert_eq!(total4, 4usize.pow(k as u32), "power {k}");
    }
    let hom: Vec<usize> = (1..=4).map(|k| hom_dim_oracle(k, k)).collect();
    assert_eq!(hom, vec![1, 3, 15, 91]);
}

#[test]
fn decomposition_matches_counting_oracle_for_n3() {
    let reg = build_registry::<f64>(3, 4, &ctx()).unwrap();
    for k in 0..=4usize {
        let got = dim_histogram(reg.levels[k].iter().map(|b| b.dim()));
        let want = so3_dim_multiplicities(k);
        assert_eq!(got, want, "power {k}");
    }
}

#[test]
fn decomposition_matches_counting_oracle_for_n4() {
    let reg = build_registry::<f64>(4, 3, &ctx()).unwrap();
    for k in 0..=3usize {
        let got = dim_histogram(reg.levels[k].iter().map(|b| b.dim()));
        let want = so4_dim_multiplicities(k);
        assert_eq!(got, want, "power {k}");
    }
}

#[test]
fn intertwiner_dimensions_match_counting_oracle() {
    let pi = Rep::<f64>::standard(3);
    for k in 0..=4usize {
        for l in k..=4usize {
            if k + l > 6 {
                continue;
            }
            let space = intertwiner_space(&pi.power(k), &pi.power(l), &ctx()).unwrap();
            assert_eq!(space.cols(), hom_dim_oracle(k, l), "pair ({k}, {l})");
        }
    }
}

#[test]
fn multiplicity_table_agrees_between_registry_and_oracle() {
    let reg = build_registry::<f64>(3, 4, &ctx()).unwrap();
    for k in 0..=4usize {
        let by_spin: BTreeMap<usize, usize> = spin_multiplicities(k);
        for (&j, &m) in &by_spin {
            // Find the registry class of dimension 2j+1 reachable at level k.
            let hits: Vec<usize> = reg
                .levels[k]
                .iter()
                .filter(|b| b.dim() == 2 * j + 1)
                .map(|b| b.class_id)
                .collect();
            assert_eq!(hits.len(), m, "spin {j} at power {k}");
            // All copies classify to the same class (n = 3 has one class
            // per dimension within this truncation).
            assert!(hits.windows(2).all(|w| w[0] == w[1]), "spin {j} power {k}");
            if m > 0 {
                assert_eq!(reg.multiplicity(k, hits[0]), m);
            }
        }
    }
}

#[test]
fn f32_decomposition_matches_oracle() {
    let reg = build_registry::<f32>(3, 3, &Ctx::<f32>::default()).unwrap();
    for k in 0..=3usize {
        let got = dim_histogram(reg.levels[k].iter().map(|b| b.dim()));
        assert_eq!(got, so3_dim_multiplicities(k), "power {k}");
    }
    let pi = Rep::<f32>::standard(3);
    let dec = decompose(&pi.power(2), &Ctx::<f32>::default()).unwrap();
    assert_eq!(dec.total_dim(), 9);
}
