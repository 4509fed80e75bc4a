use cs_mud::channel::{draw_channel, synthesize_with_noise, to_sparse_signal, PowerMode};
use cs_mud::coherence::{apply_wiggle, average_coherence, spectral_norm, worst_case_coherence};
use cs_mud::detectors::{coherent_mp_traced, noncoherent_mp_traced};
use cs_mud::linalg::{cdot, complex_normal_vec, norm2, CMatrix, C64};
use cs_mud::waveforms::{build_shift_dictionary, delay_of, user_of, Codebook};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_unit_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = CMatrix::from_columns(&(0..cols).map(|_| complex_normal_vec(&mut rng, rows, 1.0)).collect::<Vec<_>>());
    x.normalize_columns();
    x
}

fn small_codebook(family_idx: usize, p: usize, tau: usize, seed: u64) -> Codebook {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match family_idx {
        0 => Codebook::random_gabor(p, tau, &mut rng).unwrap(),
        1 => Codebook::random_block(p, tau, &mut rng).unwrap(),
        // smallest primes admitted by the Alltop seed
        _ => Codebook::alltop_gabor([5, 7, 11, 13][p % 4], tau.min(4)).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn codebook_survives_both_file_formats(fam in 0usize..3, p in 4usize..14, tau_frac in 0.0f64..1.0, seed: u64, json: bool) {
        let tau = ((p - 1) as f64 * tau_frac) as usize;
        let cb = small_codebook(fam, p, tau, seed);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(if json { "cb.json" } else { "cb.bin" });
        cb.save(&path).unwrap();
        let back = Codebook::load(&path).unwrap();
        prop_assert_eq!(back.family, cb.family);
        prop_assert_eq!(back.tau, cb.tau);
        prop_assert_eq!(back.base().max_abs_diff(cb.base()), 0.0);
    }

    #[test]
    fn every_prefix_window_is_a_cyclic_shift(fam in 0usize..3, p in 4usize..14, tau_frac in 0.0f64..1.0, seed: u64) {
        let tau = ((p - 1) as f64 * tau_frac) as usize;
        let cb = small_codebook(fam, p, tau, seed);
        let p = cb.seq_len();
        for n in 0..cb.n_sequences() {
            let word = cb.codeword(n);
            for d in 0..=cb.tau {
                let mut want = cb.sequence(n).to_vec();
                want.rotate_left(d);
                prop_assert_eq!(&word[d..d + p], want.as_slice());
            }
        }
    }

    #[test]
    fn dictionary_has_n_tau_unit_columns_after_scaling(fam in 0usize..3, p in 4usize..14, tau_frac in 0.0f64..1.0, seed: u64) {
        let tau = ((p - 1) as f64 * tau_frac) as usize;
        let cb = small_codebook(fam, p, tau, seed);
        let n = cb.n_sequences();
        let dict = build_shift_dictionary(&cb, cb.tau, n).unwrap();
        prop_assert_eq!(dict.n_cols(), n * (cb.tau + 1));
        for c in dict.normalized().column_norms() {
            prop_assert!((c - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wiggle_preserves_mu_and_norm(seed: u64, phases in prop::collection::vec(0.0f64..std::f64::consts::TAU, 24)) {
        let x = random_unit_matrix(8, 24, seed);
        let d: Vec<C64> = phases.iter().map(|&t| C64::from_polar(1.0, t)).collect();
        let w = apply_wiggle(&x, &d);
        prop_assert!((worst_case_coherence(&w).unwrap() - worst_case_coherence(&x).unwrap()).abs() < 1e-12);
        prop_assert!((spectral_norm(&w) - spectral_norm(&x)).abs() < 1e-12);
    }

    #[test]
    fn column_sum_trick_matches_double_loop(seed: u64) {
        let x = random_unit_matrix(16, 64, seed);
        let mut direct: f64 = 0.0;
        for n in 0..64 {
            let s: C64 = (0..64).filter(|&m| m != n).map(|m| cdot(x.col(n), x.col(m))).sum();
            direct = direct.max(s.norm());
        }
        prop_assert!((average_coherence(&x).unwrap() - direct / 63.0).abs() < 1e-10);
    }

    #[test]
    fn sparse_signal_round_trip(n in 1usize..40, tau in 0usize..6, k_frac in 0.0f64..1.0, seed: u64) {
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = draw_channel(n, k, tau, 10.0, &PowerMode::Unit, 4, &mut rng).unwrap();
        let sig = to_sparse_signal(&ch).unwrap();
        let decoded = sig.decode();
        prop_assert_eq!(decoded.len(), k);
        for (j, &(user, delay, value)) in decoded.iter().enumerate() {
            prop_assert_eq!(user, ch.active_set[j]);
            prop_assert_eq!(delay, ch.delays[j]);
            prop_assert_eq!(value, ch.power_profile[j] * ch.symbols[j]);
        }
    }

    #[test]
    fn detector_residual_invariants(m in 6usize..30, tau in 0usize..4, n_users in 2usize..12, k_frac in 0.0f64..1.0, seed: u64) {
        let n_cols = n_users * (tau + 1);
        let x = random_unit_matrix(m, n_cols, seed);
        let k = 1 + ((n_users.min(m / 2) - 1) as f64 * k_frac) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let ch = draw_channel(n_users, k, tau, 15.0, &PowerMode::Unit, m, &mut rng).unwrap();
        let noise = complex_normal_vec(&mut rng, m, ch.noise_var);
        let y = synthesize_with_noise(&x, &to_sparse_signal(&ch).unwrap(), &noise).unwrap();

        let (det, trace) = noncoherent_mp_traced(&x, &y, k, tau).unwrap();
        let mut users: Vec<usize> = det.selected_columns.iter().map(|&i| user_of(i, tau)).collect();
        users.sort_unstable();
        users.dedup();
        prop_assert_eq!(users.len(), k);
        for (step, v) in trace.iter().enumerate().skip(1) {
            for &i in &det.selected_columns[..step] {
                prop_assert!(cdot(x.col(i), v).norm() <= 1e-9);
            }
        }
        for w in trace.windows(2) {
            prop_assert!(norm2(&w[1]) <= norm2(&w[0]) + 1e-12);
        }

        let gains = complex_normal_vec(&mut rng, n_users, 1.0);
        let (det, trace) = coherent_mp_traced(&x, &gains, &y, k, tau).unwrap();
        let mut expect = y.clone();
        for ((&i, &u), &b) in det.selected_columns.iter().zip(&det.active_users).zip(det.symbols.as_ref().unwrap()) {
            prop_assert_eq!(delay_of(i, tau), det.delays[det.active_users.iter().position(|&a| a == u).unwrap()]);
            let a = gains[u] * b;
            expect.iter_mut().zip(x.col(i)).for_each(|(e, c)| *e -= a * c);
        }
        let last = trace.last().unwrap();
        prop_assert!(last.iter().zip(&expect).all(|(a, b)| (a - b).norm() <= 1e-12));
    }
}
