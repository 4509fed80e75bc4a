//! Gabor frames: all time shifts and frequency modulations of one seed.

use std::f64::consts::PI;

use crate::linalg::{cyclic_shift, unitary_dft, CMatrix, C64};

use super::seeds::SeedSequence;

/// Modulation by the `q`-th Fourier vector: `v[n] * exp(j 2 pi q n / P)`.
pub fn modulate(v: &[C64], q: usize) -> Vec<C64> {
    let p = v.len();
    v.iter().enumerate().map(|(n, z)| z * C64::from_polar(1.0, 2.0 * PI * ((q * n) % p) as f64 / p as f64)).collect()
}

/// `P x P^2` frame `[W_0 T(g), W_1 T(g), ..., W_{P-1} T(g)]`.
///
/// Column `q * P + k` is the seed shifted by `k` and modulated by `q`.
pub fn gabor_frame(g: &SeedSequence) -> CMatrix {
    let p = g.len();
    let mut cols = Vec::with_capacity(p * p);
    let shifts: Vec<Vec<C64>> = (0..p).map(|k| cyclic_shift(&g.entries, k)).collect();
    for q in 0..p {
        for s in &shifts {
            cols.push(modulate(s, q));
        }
    }
    CMatrix::from_columns(&cols)
}

/// The columns of a Gabor frame sharing time shift `shift`, ordered by
/// modulation index. Its DFT is circulant.
pub fn shift_block(frame: &CMatrix, shift: usize) -> CMatrix {
    let p = frame.rows();
    let idx: Vec<usize> = (0..p).map(|q| q * p + shift).collect();
    frame.select_columns(&idx)
}

/// Base signature sequences for Gabor users at maximum delay `tau`.
///
/// With `g_hat` the unitary DFT of the seed, user `(l, d)` transmits
/// `T_{d(tau+1)} W_l g_hat`, for `l < P` and `d < floor(P / (tau+1))`.
/// Users are ordered `l`-major.
pub fn gabor_user_sequences(g: &SeedSequence, tau: usize) -> Vec<Vec<C64>> {
    let p = g.len();
    let per_block = p / (tau + 1);
    let g_hat = unitary_dft(&g.entries);
    let mut out = Vec::with_capacity(p * per_block);
    for l in 0..p {
        let base = modulate(&g_hat, l);
        for d in 0..per_block {
            out.push(cyclic_shift(&base, d * (tau + 1)));
        }
    }
    out
}

/// Base sequences for the random-block family: one circulant per seed,
/// split into users exactly like a Gabor block.
pub fn circulant_user_sequences(seeds: &[SeedSequence], tau: usize) -> Vec<Vec<C64>> {
    let mut out = Vec::new();
    for g in seeds {
        let per_block = g.len() / (tau + 1);
        for d in 0..per_block {
            out.push(cyclic_shift(&g.entries, d * (tau + 1)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dft_matrix;
    use crate::waveforms::seeds::{alltop_seed, random_phase_seed};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn basis_seed_p2() {
        let g = SeedSequence::basis(2).unwrap();
        let f = gabor_frame(&g);
        let want = CMatrix::from_row_major(
            2,
            4,
            &[c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
        );
        assert!(f.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn frame_dimensions_p127() {
        let f = gabor_frame(&alltop_seed(127).unwrap());
        assert_eq!((f.rows(), f.cols()), (127, 16129));
    }

    #[test]
    fn column_norms_identical() {
        let g = random_phase_seed(5, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let norms = gabor_frame(&g).column_norms();
        for n in &norms {
            assert!((n - norms[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn dft_of_every_shift_block_is_circulant() {
        for p in [5usize, 7, 8] {
            let g = random_phase_seed(p, &mut ChaCha8Rng::seed_from_u64(p as u64)).unwrap();
            let frame = gabor_frame(&g);
            let f = dft_matrix(p);
            for l in 0..p {
                let hat = f.matmul(&shift_block(&frame, l));
                for i in 0..p {
                    for j in 0..p {
                        let d = (i + p - j) % p;
                        assert!((hat[(i, j)] - hat[(d, 0)]).norm() < 1e-9, "p={p} l={l} ({i},{j})");
                    }
                }
            }
        }
    }

    #[test]
    fn full_delay_users_are_circulants_of_modulated_seed_spectrum() {
        // tau = P - 1: one user per modulation index, base = W_l g_hat
        let p = 8;
        let g = random_phase_seed(p, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let users = gabor_user_sequences(&g, p - 1);
        assert_eq!(users.len(), p);
        // oracle: direct DFT sum, g_hat[k] = sum_n g[n] exp(-j 2 pi k n / P) / sqrt(P)
        for (l, u) in users.iter().enumerate() {
            #[allow(clippy::needless_range_loop)]
            for k in 0..p {
                let mut s = C64::new(0.0, 0.0);
                for n in 0..p {
                    s += g.entries[n] * C64::from_polar(1.0, -2.0 * PI * (k * n) as f64 / p as f64);
                }
                let want = s / (p as f64).sqrt() * C64::from_polar(1.0, 2.0 * PI * (l * k) as f64 / p as f64);
                assert!((u[k] - want).norm() < 1e-12);
            }
        }
    }
}
