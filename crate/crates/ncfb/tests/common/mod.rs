//! Independent counting oracles for decomposition tables.
//!
//! The multiplicities here come from branching recursions alone — integer
//! arithmetic, no matrices, no eigensolvers — so they cross-check the
//! numerical decomposition pipeline without sharing any code with it.

#![allow(dead_code)] // each test target uses its own subset

use std::collections::BTreeMap;

/// Multiplicity of each integer-spin class in the k-th tensor power of the
/// standard 3-dimensional rotation representation (spin 1): tensoring with
/// spin 1 sends spin j to (j−1) ⊕ j ⊕ (j+1), dropping out-of-range terms.
pub fn spin_multiplicities(k: usize) -> BTreeMap<usize, usize> {
    let mut cur = BTreeMap::from([(0usize, 1usize)]);
    for _ in 0..k {
        let mut next: BTreeMap<usize, usize> = BTreeMap::new();
        for (&j, &m) in &cur {
            if j >= 1 {
                *next.entry(j - 1).or_default() += m;
                *next.entry(j).or_default() += m;
            }
            *next.entry(j + 1).or_default() += m;
        }
        cur = next;
    }
    cur
}

/// Same table keyed by carrier dimension 2j + 1.
pub fn so3_dim_multiplicities(k: usize) -> BTreeMap<usize, usize> {
    spin_multiplicities(k)
        .into_iter()
        .map(|(j, m)| (2 * j + 1, m))
        .collect()
}

/// Ballot recursion: multiplicity of each doubled-spin class in the k-th
/// tensor power of the 2-dimensional representation.
fn half_spin_multiplicities(k: usize) -> BTreeMap<usize, usize> {
    let mut cur = BTreeMap::from([(0usize, 1usize)]);
    for _ in 0..k {
        let mut next: BTreeMap<usize, usize> = BTreeMap::new();
        for (&a, &m) in &cur {
            if a >= 1 {
                *next.entry(a - 1).or_default() += m;
            }
            *next.entry(a + 1).or_default() += m;
        }
        cur = next;
    }
    cur
}

/// n = 4 table aggregated by carrier dimension: the standard 4-dimensional
/// representation factors as a pair of 2-dimensional ones, so a class is a
/// pair of doubled spins (a, b) with multiplicity the product of two ballot
/// numbers and carrier dimension (a+1)(b+1).
pub fn so4_dim_multiplicities(k: usize) -> BTreeMap<usize, usize> {
    let h = half_spin_multiplicities(k);
    let mut out: BTreeMap<usize, usize> = BTreeMap::new();
    for (&a, &ma) in &h {
        for (&b, &mb) in &h {
            *out.entry((a + 1) * (b + 1)).or_default() += ma * mb;
        }
    }
    out
}

/// Dimension of the space of equivariant maps between the k-th and l-th
/// tensor powers in the 3-dimensional case: matching classes pair off, so
/// the count is Σ_j mult(j, k)·mult(j, l).
pub fn hom_dim_oracle(k: usize, l: usize) -> usize {
    let a = spin_multiplicities(k);
    let b = spin_multiplicities(l);
    a.iter()
        .map(|(j, m)| m * b.get(j).copied().unwrap_or(0))
        .sum()
}

/// Aggregate a list of per-copy block dimensions into dimension → count.
pub fn dim_histogram(dims: impl IntoIterator<Item = usize>) -> BTreeMap<usize, usize> {
    let mut out: BTreeMap<usize, usize> = BTreeMap::new();
    for d in dims {
        *out.entry(d).or_default() += 1;
    }
    out
}
