//! Statistical properties checked by simulation with fixed seeds.

use cs_mud::linalg::{cdot, complex_normal_vec, CMatrix, C64};
use cs_mud::montecarlo::wilson_interval;
use cs_mud::waveforms::kerdock_codebook;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DRAWS: usize = 10_000;

/// Frequency of `||X^H P w||_inf > sigma sqrt(2 ln N)` over `DRAWS` noise draws.
fn noise_tail_frequency(x: &CMatrix, proj: Option<&CMatrix>, sigma2: f64, rng: &mut ChaCha8Rng) -> f64 {
    let n = x.cols() as f64;
    let t = (sigma2 * 2.0 * n.ln()).sqrt();
    let mut hits = 0;
    for _ in 0..DRAWS {
        let w = complex_normal_vec(rng, x.rows(), sigma2);
        let pw = match proj {
            Some(p) => p.mul_vec(&w),
            None => w,
        };
        if x.adjoint_mul_vec(&pw).iter().any(|z| z.norm() > t) {
            hits += 1;
        }
    }
    hits as f64 / DRAWS as f64
}

fn random_projection(m: usize, rank: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::from_columns(&(0..rank).map(|_| complex_normal_vec(rng, m, 1.0)).collect::<Vec<_>>());
    let q = CMatrix::from_nalgebra(&g.to_nalgebra().qr().q());
    q.matmul(&q.adjoint())
}

fn upper(p: f64) -> f64 {
    p + 3.0 * (p * (1.0 - p) / DRAWS as f64).sqrt()
}

// Each x_n^H P w is CN(0, s^2) with s <= sigma, so Pr(|.| > t) <= exp(-t^2 / sigma^2)
// and the union over N columns gives N^{-1} at t = sigma sqrt(2 ln N).
#[test]
fn noise_tail_obeys_the_union_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let x = {
        let mut x = CMatrix::from_columns(&(0..128).map(|_| complex_normal_vec(&mut rng, 32, 1.0)).collect::<Vec<_>>());
        x.normalize_columns();
        x
    };
    let proj = random_projection(32, 12, &mut rng);
    let bound = upper(1.0 / 128.0);
    for p in [None, Some(&proj)] {
        let f = noise_tail_frequency(&x, p, 0.3, &mut rng);
        assert!(f <= bound, "frequency {f} above {bound}");
    }
    let id = CMatrix::identity(64);
    let f = noise_tail_frequency(&id, None, 1.0, &mut rng);
    assert!(f <= upper(1.0 / 64.0), "identity frequency {f}");
}

// With X = I the N coordinates are independent and the tail is
// 1 - (1 - N^{-2})^N, close to N^{-1}; a 1/pi factor on it does not hold.
#[test]
fn noise_tail_exceeds_one_over_pi_constant_for_orthonormal_columns() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let id = CMatrix::identity(64);
    let f = noise_tail_frequency(&id, None, 1.0, &mut rng);
    let exact = 1.0 - (1.0 - 1.0 / 4096.0f64).powi(64);
    assert!((f - exact).abs() <= 3.0 * (exact * (1.0 - exact) / DRAWS as f64).sqrt(), "{f} vs {exact}");
    assert!(f > upper(1.0 / (64.0 * std::f64::consts::PI)));
}

#[test]
fn wilson_interval_covers_at_nominal_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let mut covered = 0;
    for _ in 0..1000 {
        let failures = (0..200).filter(|_| rng.random::<f64>() < 0.1).count();
        let (lo, hi) = wilson_interval(failures, 200);
        covered += usize::from(lo <= 0.1 && 0.1 <= hi);
    }
    assert!(covered >= 930, "coverage {covered}/1000");
}

#[test]
fn kerdock_m7_sampled_pairs_are_zero_or_welch() {
    let psi = kerdock_codebook(7).unwrap();
    let welch = 1.0 / 128f64.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..10_000 {
        let a = rng.random_range(0..psi.cols());
        let mut b = rng.random_range(0..psi.cols() - 1);
        if b >= a {
            b += 1;
        }
        let ip: C64 = cdot(psi.col(a), psi.col(b));
        assert!(ip.norm() < 1e-9 || (ip.norm() - welch).abs() < 1e-9, "({a}, {b}) {}", ip.norm());
    }
}
