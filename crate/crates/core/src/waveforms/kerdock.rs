//! Kerdock codebooks over Z4 and their block-circulant rearrangement.
//!
//! Column `lambda` of the `P x P^2` codebook (`P = 2^m`) has entry
//! `i^{Tr(lambda * t)} / sqrt(P)` at Teichmuller coordinate `t`. Row 0 is the
//! coordinate `t = 0` and is therefore constant. On the remaining `P - 1`
//! coordinates `xi^0, .., xi^{P-2}`, multiplying `lambda` by `xi^{-1}` shifts a
//! column cyclically, so the codebook splits into shift orbits. The orbits
//! are found by search over the columns themselves, not read off the algebra,
//! and every retained block is checked to be cyclic.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Error, Result};
use crate::linalg::{CMatrix, C64};

use super::galois::GaloisRing4;

const I_POW: [C64; 4] =
    [C64 { re: 1.0, im: 0.0 }, C64 { re: 0.0, im: 1.0 }, C64 { re: -1.0, im: 0.0 }, C64 { re: 0.0, im: -1.0 }];

fn check_m(m: usize) -> Result<()> {
    if m < 3 || m.is_multiple_of(2) {
        return Err(invalid_param(format!("Kerdock construction needs odd m >= 3, got m = {m}")));
    }
    if m > 9 {
        return Err(invalid_param(format!("m = {m} too large (P^2 columns)")));
    }
    Ok(())
}

/// `log2(P)` when `P` is an admissible Kerdock length.
pub fn kerdock_degree(p: usize) -> Result<usize> {
    if !p.is_power_of_two() {
        return Err(invalid_param(format!("Kerdock length must be 2^m, got {p}")));
    }
    let m = p.trailing_zeros() as usize;
    check_m(m)?;
    Ok(m)
}

/// Z4 exponents of the Kerdock codebook, one `Vec` of length `P` per column,
/// columns ordered by the base-4 index of `lambda`.
pub fn kerdock_exponents(m: usize) -> Result<Vec<Vec<u8>>> {
    check_m(m)?;
    let ring = GaloisRing4::new(m)?;
    let coords = ring.teichmuller_set()?;
    let forms: Vec<Vec<u8>> = coords.iter().map(|t| ring.trace_form(t)).collect();
    let n = 1usize << (2 * m);
    let cols = (0..n)
        .map(|idx| {
            let lambda = ring.element_from_index(idx);
            forms
                .iter()
                .map(|f| {
                    let s: u32 = lambda.iter().zip(f).map(|(&a, &b)| a as u32 * b as u32).sum();
                    (s % 4) as u8
                })
                .collect()
        })
        .collect();
    Ok(cols)
}

/// The `P x P^2` Kerdock codebook, entries in `{±1, ±j} / sqrt(P)`.
pub fn kerdock_codebook(m: usize) -> Result<CMatrix> {
    let exps = kerdock_exponents(m)?;
    let p = 1usize << m;
    let s = 1.0 / (p as f64).sqrt();
    Ok(CMatrix::from_fn(p, exps.len(), |i, j| I_POW[exps[j][i] as usize] * s))
}

/// Partitions columns into cyclic-shift orbits.
///
/// Each orbit starts at its smallest column index and lists
/// `g, T_1 g, T_2 g, ..` where `T_1` is the cyclic down-shift.
pub fn shift_orbits(columns: &[Vec<u8>]) -> Vec<Vec<usize>> {
    let lookup: HashMap<&[u8], usize> = columns.iter().enumerate().map(|(i, c)| (c.as_slice(), i)).collect();
    let mut visited = vec![false; columns.len()];
    let mut orbits = Vec::new();
    for start in 0..columns.len() {
        if visited[start] {
            continue;
        }
        let mut orbit = vec![start];
        visited[start] = true;
        let mut cur = columns[start].clone();
        loop {
            cur.rotate_right(1);
            match lookup.get(cur.as_slice()) {
                Some(&j) if j == start => break,
                Some(&j) => {
                    visited[j] = true;
                    orbit.push(j);
                }
                // shift leaves the column set: the orbit is open
                None => break,
            }
        }
        orbits.push(orbit);
    }
    orbits
}

/// Observed orbit structure of a punctured Kerdock codebook.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitCensus {
    /// orbit size -> number of orbits of that size
    pub sizes: BTreeMap<usize, usize>,
    /// orbits of size `P - 1` generated by a unit of GR(4, m)
    pub unit_orbits: usize,
    /// orbits of size `P - 1` generated by a nonzero non-unit (`2 * T`)
    pub nonunit_orbits: usize,
}

/// Block-circulant Kerdock codebook of size `(P - 1) x P (P - 2)`.
#[derive(Clone, Debug)]
pub struct KerdockBlocks {
    pub p: usize,
    /// `P` blocks of `P - 2` columns; column `k + 1` of a block is the
    /// cyclic down-shift of column `k`.
    pub blocks: Vec<Vec<Vec<C64>>>,
    /// `lambda` index of each block's orbit generator.
    pub generators: Vec<usize>,
    pub census: OrbitCensus,
}

impl KerdockBlocks {
    pub fn matrix(&self) -> CMatrix {
        let cols: Vec<&Vec<C64>> = self.blocks.iter().flatten().collect();
        CMatrix::from_columns(&cols)
    }

    /// One base sequence per user: `floor((P-2)/(tau+1))` users per block,
    /// user `j` of a block owning block columns `j(tau+1) .. j(tau+1)+tau`.
    pub fn user_sequences(&self, tau: usize) -> Vec<Vec<C64>> {
        let per_block = (self.p - 2) / (tau + 1);
        self.blocks.iter().flat_map(|b| (0..per_block).map(move |j| b[j * (tau + 1)].clone())).collect()
    }
}

/// Removes the constant row, detects shift orbits and keeps `P` cyclic
/// blocks of `P - 2` columns each.
///
/// The `P` retained orbits are those generated by units of GR(4, m). In each
/// orbit the first column (the generator) is dropped so the kept columns
/// `T_1 g .. T_{P-2} g` remain consecutive shifts.
pub fn kerdock_block_circulant(m: usize) -> Result<KerdockBlocks> {
    let exps = kerdock_exponents(m)?;
    let p = 1usize << m;
    let ring = GaloisRing4::new(m)?;

    if exps.iter().any(|c| c[0] != 0) {
        return Err(Error::StructuralAssertion("row 0 is not the all-one row".into()));
    }
    let punctured: Vec<Vec<u8>> = exps.iter().map(|c| c[1..].to_vec()).collect();
    let orbits = shift_orbits(&punctured);

    let mut census = OrbitCensus { sizes: BTreeMap::new(), unit_orbits: 0, nonunit_orbits: 0 };
    let mut kept = Vec::new();
    for orbit in &orbits {
        *census.sizes.entry(orbit.len()).or_insert(0) += 1;
        if orbit.len() == p - 1 {
            if ring.is_unit(&ring.element_from_index(orbit[0])) {
                census.unit_orbits += 1;
                kept.push(orbit.clone());
            } else {
                census.nonunit_orbits += 1;
            }
        }
    }
    if kept.len() != p {
        return Err(Error::StructuralAssertion(format!(
            "expected {p} unit orbits of size {}, found {} (census {:?})",
            p - 1,
            kept.len(),
            census.sizes
        )));
    }

    let s = 1.0 / (p as f64).sqrt();
    let to_complex = |c: &[u8]| -> Vec<C64> { c.iter().map(|&e| I_POW[e as usize] * s).collect() };
    let mut blocks = Vec::with_capacity(p);
    let mut generators = Vec::with_capacity(p);
    for orbit in &kept {
        generators.push(orbit[0]);
        let cols: Vec<Vec<u8>> = orbit[1..p - 1].iter().map(|&j| punctured[j].clone()).collect();
        for w in cols.windows(2) {
            let mut shifted = w[0].clone();
            shifted.rotate_right(1);
            if shifted != w[1] {
                return Err(Error::StructuralAssertion("retained block is not cyclic".into()));
            }
        }
        blocks.push(cols.iter().map(|c| to_complex(c)).collect());
    }
    Ok(KerdockBlocks { p, blocks, generators, census })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cdot;

    #[test]
    fn m3_entries_are_scaled_fourth_roots() {
        let k = kerdock_codebook(3).unwrap();
        assert_eq!((k.rows(), k.cols()), (8, 64));
        let s = 1.0 / 8f64.sqrt();
        for z in k.as_slice() {
            let ok = I_POW.iter().any(|w| (z - w * s).norm() < 1e-15);
            assert!(ok, "{z}");
        }
    }

    #[test]
    fn columns_distinct_and_inner_products_zero_or_welch() {
        let k = kerdock_codebook(3).unwrap();
        let p = 8f64;
        for a in 0..k.cols() {
            for b in a + 1..k.cols() {
                let ip = cdot(k.col(a), k.col(b)).norm();
                assert!(ip < 1e-9 || (ip - 1.0 / p.sqrt()).abs() < 1e-9, "({a},{b}) {ip}");
                assert!(k.col(a) != k.col(b));
            }
        }
    }

    #[test]
    fn even_m_rejected() {
        assert!(kerdock_codebook(4).is_err());
        assert!(kerdock_codebook(1).is_err());
        assert!(kerdock_degree(64).is_err());
        assert_eq!(kerdock_degree(128).unwrap(), 7);
    }

    #[test]
    fn m3_block_code_shape_and_census() {
        let kb = kerdock_block_circulant(3).unwrap();
        assert_eq!(kb.blocks.len(), 8);
        let mat = kb.matrix();
        assert_eq!((mat.rows(), mat.cols()), (7, 48));
        // P + 1 orbits of size P - 1 plus the all-one column
        assert_eq!(kb.census.sizes.get(&7), Some(&9));
        assert_eq!(kb.census.sizes.get(&1), Some(&1));
        assert_eq!(kb.census.unit_orbits, 8);
        assert_eq!(kb.census.nonunit_orbits, 1);
        for block in &kb.blocks {
            for w in block.windows(2) {
                assert_eq!(crate::linalg::cyclic_shift(&w[0], 1), w[1]);
            }
        }
    }

    #[test]
    fn orbit_detection_on_handmade_columns() {
        let cols = vec![vec![0u8, 1, 2], vec![2, 0, 1], vec![1, 2, 0], vec![3, 3, 3]];
        let orbits = shift_orbits(&cols);
        assert_eq!(orbits, vec![vec![0, 1, 2], vec![3]]);
    }
}
