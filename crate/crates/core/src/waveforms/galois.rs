//! Arithmetic in the Galois ring GR(4, m) = Z4[x] / (h(x)).
//!
//! `h` is the Hensel lift of a primitive binary polynomial of degree `m`, so
//! the class of `x` (written `xi`) has multiplicative order `2^m - 1` and its
//! powers together with zero form the Teichmuller set. Elements are stored as
//! coefficient vectors of length `m` over Z4, lowest degree first.

use crate::error::{Error, Result};

pub type Gr4 = Vec<u8>;

/// Binary polynomial multiplication modulo `f` (bit `i` = coefficient of `x^i`).
fn gf2_mulmod(mut a: u64, mut b: u64, f: u64, m: usize) -> u64 {
    let mut r = 0u64;
    while b != 0 {
        if b & 1 == 1 {
            r ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a >> m & 1 == 1 {
            a ^= f;
        }
    }
    r
}

fn gf2_pow_x(e: u64, f: u64, m: usize) -> u64 {
    let mut base = 0b10u64;
    let mut acc = 1u64;
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            acc = gf2_mulmod(acc, base, f, m);
        }
        base = gf2_mulmod(base, base, f, m);
        e >>= 1;
    }
    acc
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Smallest (as an integer bit pattern) primitive binary polynomial of degree `m`.
pub fn primitive_binary_polynomial(m: usize) -> u64 {
    assert!((2..=20).contains(&m));
    let order = (1u64 << m) - 1;
    let factors = prime_factors(order);
    let mut f = (1u64 << m) | 1;
    loop {
        if gf2_pow_x(order, f, m) == 1 && factors.iter().all(|q| gf2_pow_x(order / q, f, m) != 1) {
            return f;
        }
        f += 2;
    }
}

/// Graeffe-style Hensel lift: `h(x^2) = +-(e(x)^2 - o(x)^2)` where `e`, `o`
/// are the even and odd parts of `f` read over Z4. Returned monic, low to high.
pub fn hensel_lift(f: u64, m: usize) -> Vec<u8> {
    let coef = |i: usize| -> i64 { (f >> i & 1) as i64 };
    let even: Vec<i64> = (0..=m).map(|i| if i % 2 == 0 { coef(i) } else { 0 }).collect();
    let odd: Vec<i64> = (0..=m).map(|i| if i % 2 == 1 { coef(i) } else { 0 }).collect();
    let mut d = vec![0i64; 2 * m + 1];
    for i in 0..=m {
        for j in 0..=m {
            d[i + j] += even[i] * even[j] - odd[i] * odd[j];
        }
    }
    let mut h: Vec<u8> = (0..=m).map(|i| d[2 * i].rem_euclid(4) as u8).collect();
    if h[m] == 3 {
        h.iter_mut().for_each(|c| *c = (4 - *c) % 4);
    }
    debug_assert_eq!(h[m], 1);
    h
}

#[derive(Clone, Debug)]
pub struct GaloisRing4 {
    m: usize,
    modulus: Vec<u8>,
    trace_of_basis: Vec<u8>,
}

impl GaloisRing4 {
    pub fn new(m: usize) -> Result<Self> {
        if !(2..=16).contains(&m) {
            return Err(Error::InvalidParameter(format!("GR(4, m) supported for 2 <= m <= 16, got {m}")));
        }
        let f = primitive_binary_polynomial(m);
        let modulus = hensel_lift(f, m);
        let mut ring = Self { m, modulus, trace_of_basis: Vec::new() };
        ring.trace_of_basis = (0..m).map(|k| ring.trace_by_matrix(&ring.basis(k))).collect();
        Ok(ring)
    }

    pub fn degree(&self) -> usize {
        self.m
    }

    pub fn modulus(&self) -> &[u8] {
        &self.modulus
    }

    pub fn zero(&self) -> Gr4 {
        vec![0; self.m]
    }

    pub fn one(&self) -> Gr4 {
        self.basis(0)
    }

    pub fn basis(&self, k: usize) -> Gr4 {
        let mut e = self.zero();
        e[k] = 1;
        e
    }

    /// `xi`, the class of `x`.
    pub fn generator(&self) -> Gr4 {
        self.basis(1 % self.m)
    }

    pub fn add(&self, a: &[u8], b: &[u8]) -> Gr4 {
        a.iter().zip(b).map(|(x, y)| (x + y) % 4).collect()
    }

    pub fn sub(&self, a: &[u8], b: &[u8]) -> Gr4 {
        a.iter().zip(b).map(|(x, y)| (x + 4 - y) % 4).collect()
    }

    pub fn mul(&self, a: &[u8], b: &[u8]) -> Gr4 {
        let m = self.m;
        let mut r = vec![0u32; 2 * m];
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0 {
                continue;
            }
            for (j, &bj) in b.iter().enumerate() {
                r[i + j] += ai as u32 * bj as u32;
            }
        }
        for k in (m..2 * m - 1).rev() {
            let c = r[k] % 4;
            if c != 0 {
                for t in 0..=m {
                    // subtract c * h(x) * x^(k-m)
                    r[k - m + t] += 4 * 4 - (c * self.modulus[t] as u32) % 4;
                }
            }
            r[k] = 0;
        }
        r.truncate(m);
        r.into_iter().map(|c| (c % 4) as u8).collect()
    }

    pub fn pow(&self, a: &[u8], mut e: u64) -> Gr4 {
        let mut base = a.to_vec();
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    /// `{0} ∪ {xi^t : 0 <= t < 2^m - 1}`, in that order.
    ///
    /// Fails if `xi` does not have order exactly `2^m - 1`.
    pub fn teichmuller_set(&self) -> Result<Vec<Gr4>> {
        let order = (1usize << self.m) - 1;
        let xi = self.generator();
        let mut out = Vec::with_capacity(order + 1);
        out.push(self.zero());
        let mut p = self.one();
        for _ in 0..order {
            out.push(p.clone());
            p = self.mul(&p, &xi);
        }
        if p != self.one() {
            return Err(Error::StructuralAssertion("xi^(2^m-1) != 1 in GR(4,m)".into()));
        }
        // distinct reductions mod 2 <=> xi generates the multiplicative group of GF(2^m)
        let mut seen = std::collections::HashSet::new();
        for t in &out {
            let red: Vec<u8> = t.iter().map(|c| c % 2).collect();
            if !seen.insert(red) {
                return Err(Error::StructuralAssertion("Teichmuller elements not distinct mod 2".into()));
            }
        }
        Ok(out)
    }

    /// Trace of the Z4-linear map `w -> z w` in the basis `1, x, .., x^(m-1)`.
    pub fn trace_by_matrix(&self, z: &[u8]) -> u8 {
        let mut t = 0u32;
        for k in 0..self.m {
            t += self.mul(z, &self.basis(k))[k] as u32;
        }
        (t % 4) as u8
    }

    /// Trace via the precomputed traces of basis monomials (Z4-linear).
    pub fn trace(&self, z: &[u8]) -> u8 {
        let t: u32 = z.iter().zip(&self.trace_of_basis).map(|(&a, &b)| a as u32 * b as u32).sum();
        (t % 4) as u8
    }

    /// `Tr(x^k y)` for `k < m`; `Tr(lambda y)` is then a dot product with the
    /// coefficients of `lambda`.
    pub fn trace_form(&self, y: &[u8]) -> Vec<u8> {
        (0..self.m).map(|k| self.trace(&self.mul(&self.basis(k), y))).collect()
    }

    /// Generalised Frobenius `a + 2b -> a^2 + 2b^2` on the 2-adic expansion.
    pub fn frobenius(&self, z: &[u8]) -> Gr4 {
        let a = self.pow(z, 1u64 << self.m);
        let diff = self.sub(z, &a);
        debug_assert!(diff.iter().all(|c| c % 2 == 0));
        let b: Gr4 = diff.iter().map(|c| c / 2).collect();
        let a2 = self.mul(&a, &a);
        let b2 = self.mul(&b, &b);
        let two_b2: Gr4 = b2.iter().map(|c| (2 * c) % 4).collect();
        self.add(&a2, &two_b2)
    }

    /// Trace as the sum of Frobenius conjugates. Independent of
    /// [`Self::trace_by_matrix`]; the two agree on every element.
    pub fn trace_by_frobenius(&self, z: &[u8]) -> Result<u8> {
        let mut acc = self.zero();
        let mut cur = z.to_vec();
        for _ in 0..self.m {
            acc = self.add(&acc, &cur);
            cur = self.frobenius(&cur);
        }
        if acc[1..].iter().any(|&c| c != 0) {
            return Err(Error::StructuralAssertion(format!("trace {acc:?} not in Z4")));
        }
        Ok(acc[0])
    }

    /// Element with coefficient vector given by the base-4 digits of `idx`.
    pub fn element_from_index(&self, mut idx: usize) -> Gr4 {
        let mut e = self.zero();
        for c in e.iter_mut() {
            *c = (idx % 4) as u8;
            idx /= 4;
        }
        e
    }

    pub fn is_unit(&self, z: &[u8]) -> bool {
        z.iter().any(|c| c % 2 == 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitive_polynomials_small_degrees() {
        assert_eq!(primitive_binary_polynomial(3), 0b1011); // x^3 + x + 1
        assert_eq!(primitive_binary_polynomial(5), 0b100101); // x^5 + x^2 + 1
    }

    #[test]
    fn hensel_lift_degree_three() {
        // x^3 + x + 1 lifts to x^3 + 2x^2 + x + 3
        assert_eq!(hensel_lift(0b1011, 3), vec![3, 1, 2, 1]);
    }

    #[test]
    fn teichmuller_set_closed_under_multiplication() {
        let r = GaloisRing4::new(3).unwrap();
        let t = r.teichmuller_set().unwrap();
        assert_eq!(t.len(), 8);
        for a in &t {
            for b in &t {
                assert!(t.contains(&r.mul(a, b)));
            }
        }
    }

    #[test]
    fn trace_routes_agree_exhaustively() {
        for m in [3usize, 5] {
            let r = GaloisRing4::new(m).unwrap();
            for idx in 0..(1usize << (2 * m)) {
                let z = r.element_from_index(idx);
                let a = r.trace_by_matrix(&z);
                let b = r.trace_by_frobenius(&z).unwrap();
                let c = r.trace(&z);
                assert_eq!(a, b, "m={m} z={z:?}");
                assert_eq!(a, c);
            }
        }
    }

    #[test]
    fn trace_of_one_is_m() {
        for m in [3usize, 5, 7] {
            let r = GaloisRing4::new(m).unwrap();
            assert_eq!(r.trace(&r.one()) as usize, m % 4);
        }
    }

    #[test]
    fn frobenius_fixes_teichmuller_up_to_squaring() {
        let r = GaloisRing4::new(5).unwrap();
        for t in r.teichmuller_set().unwrap() {
            assert_eq!(r.frobenius(&t), r.mul(&t, &t));
        }
    }
}
