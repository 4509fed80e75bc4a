use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Result};
use crate::linalg::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedFamily {
    Alltop,
    RandomPhase,
    Basis,
}

/// Seed vector for a Gabor frame. Every entry has the same magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSequence {
    pub entries: Vec<C64>,
    pub family: SeedFamily,
}

impl SeedSequence {
    /// Wraps arbitrary entries, checking the common-magnitude invariant.
    pub fn new(entries: Vec<C64>, family: SeedFamily) -> Result<Self> {
        if entries.len() < 2 {
            return Err(invalid_param(format!("seed length {} < 2", entries.len())));
        }
        let m0 = entries[0].norm();
        if entries.iter().any(|z| (z.norm() - m0).abs() > 1e-12) {
            return Err(invalid_param("seed entries must share one magnitude"));
        }
        Ok(Self { entries, family })
    }

    /// Standard basis vector `e_1` of length `p` (identity circulant).
    pub fn basis(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(invalid_param(format!("seed length {p} < 2")));
        }
        let mut entries = vec![C64::new(0.0, 0.0); p];
        entries[0] = C64::new(1.0, 0.0);
        // e_1 is not unimodular; skip the magnitude check
        Ok(Self { entries, family: SeedFamily::Basis })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn is_prime(n: usize) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Alltop sequence: entry `i` (1-based) is `exp(j 2 pi i^3 / P) / sqrt(P)`.
pub fn alltop_seed(p: usize) -> Result<SeedSequence> {
    if p < 5 || !is_prime(p) {
        return Err(invalid_param(format!("Alltop length must be a prime >= 5, got {p}")));
    }
    let s = 1.0 / (p as f64).sqrt();
    let entries = (1..=p)
        .map(|i| {
            // reduce i^3 mod P in integers so the phase is exact for large P
            let c = (i % p) * (i % p) % p * (i % p) % p;
            C64::from_polar(s, 2.0 * PI * c as f64 / p as f64)
        })
        .collect();
    Ok(SeedSequence { entries, family: SeedFamily::Alltop })
}

/// Unit-norm seed with i.i.d. uniform phases.
pub fn random_phase_seed<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<SeedSequence> {
    if p < 2 {
        return Err(invalid_param(format!("seed length {p} < 2")));
    }
    let s = 1.0 / (p as f64).sqrt();
    let entries = (0..p).map(|_| C64::from_polar(s, 2.0 * PI * rng.random::<f64>())).collect();
    Ok(SeedSequence { entries, family: SeedFamily::RandomPhase })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn alltop_p5_phases() {
        // i^3 mod 5 for i = 1..5 is 1, 3, 2, 4, 0
        let g = alltop_seed(5).unwrap();
        let expect = [1u32, 3, 2, 4, 0];
        for (z, k) in g.entries.iter().zip(expect) {
            assert!((z.norm() - 1.0 / 5f64.sqrt()).abs() < 1e-15);
            let want = C64::from_polar(1.0 / 5f64.sqrt(), 2.0 * PI * k as f64 / 5.0);
            assert!((z - want).norm() < 1e-14);
        }
    }

    #[test]
    fn alltop_p127_unit_norm() {
        let g = alltop_seed(127).unwrap();
        assert_eq!(g.len(), 127);
        let n: f64 = g.entries.iter().map(|z| z.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alltop_rejects_non_prime_and_small() {
        assert!(alltop_seed(4).is_err());
        assert!(alltop_seed(3).is_err());
        assert!(alltop_seed(9).is_err());
    }

    #[test]
    fn random_phase_is_deterministic_and_unimodular() {
        let a = random_phase_seed(128, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = random_phase_seed(128, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 128);
        for z in &a.entries {
            assert!((z.norm() - 1.0 / 128f64.sqrt()).abs() < 1e-12);
        }
        assert!(random_phase_seed(1, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
