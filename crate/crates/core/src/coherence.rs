//! Coherence metrics of unit-column measurement matrices.
//!
//! `mu(X) = max_{n != m} |x_n^H x_m|` and
//! `nu(X) = max_n |sum_{m != n} x_n^H x_m| / (N - 1)`. Thresholds use natural
//! logarithms.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::linalg::{cdot, gram_of, hermitian_spectral_norm, norm2, norm_inf, spectral_norm_power, CMatrix, C64};
use crate::waveforms::ShiftDictionary;

const UNIT_TOL: f64 = 1e-9;

pub fn check_unit_columns(x: &CMatrix) -> Result<()> {
    for (j, c) in x.columns().enumerate() {
        let n = norm2(c);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(invalid_input(format!("column {j} has norm {n}, expected 1")));
        }
    }
    Ok(())
}

fn check_two_columns(x: &CMatrix) -> Result<()> {
    if x.cols() < 2 {
        return Err(Error::UndefinedInput(format!("coherence needs at least 2 columns, got {}", x.cols())));
    }
    Ok(())
}

/// Exact `mu` over all unordered column pairs.
pub fn worst_case_coherence(x: &CMatrix) -> Result<f64> {
    check_two_columns(x)?;
    check_unit_columns(x)?;
    let n = x.cols();
    Ok((0..n)
        .into_par_iter()
        .map(|a| {
            let ca = x.col(a);
            (a + 1..n).map(|b| cdot(ca, x.col(b)).norm()).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max))
}

/// `nu` in `O(M N)` through the column sum `s`: `sum_{m != n} x_n^H x_m = x_n^H s - 1`.
pub fn average_coherence(x: &CMatrix) -> Result<f64> {
    check_two_columns(x)?;
    check_unit_columns(x)?;
    Ok(average_coherence_unchecked(x))
}

/// The same average for columns of any norm, `x_n^H s - ||x_n||^2` in the
/// numerator. Needs at least two columns.
pub fn average_coherence_unchecked(x: &CMatrix) -> f64 {
    let n = x.cols();
    let mut s = vec![C64::new(0.0, 0.0); x.rows()];
    for c in x.columns() {
        s.iter_mut().zip(c).for_each(|(a, b)| *a += b);
    }
    let worst = (0..n)
        .into_par_iter()
        .map(|j| {
            let c = x.col(j);
            (cdot(c, &s) - cdot(c, c)).norm()
        })
        .reduce(|| 0.0, f64::max);
    worst / (n - 1) as f64
}

/// Largest singular value by power iteration.
pub fn spectral_norm(x: &CMatrix) -> f64 {
    spectral_norm_power(x, 1e-15, 20_000)
}

/// `0.1 / sqrt(2 ln N_tau)`
pub fn cp_mu_threshold(n_tau: usize) -> f64 {
    0.1 / (2.0 * (n_tau as f64).ln()).sqrt()
}

/// `1 / (240 ln N_tau)`
pub fn scp_mu_threshold(n_tau: usize) -> f64 {
    1.0 / (240.0 * (n_tau as f64).ln())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub mu: f64,
    pub nu: f64,
    pub spectral_norm: f64,
    pub n_cols: usize,
    pub n_rows: usize,
    pub cp_satisfied: bool,
    pub scp_satisfied: bool,
    pub cp_mu_threshold: f64,
    pub scp_mu_threshold: f64,
    /// `mu / sqrt(M)`
    pub nu_threshold: f64,
}

impl CoherenceReport {
    pub fn from_metrics(mu: f64, nu: f64, spectral_norm: f64, n_rows: usize, n_cols: usize) -> Self {
        let cp_mu = cp_mu_threshold(n_cols);
        let scp_mu = scp_mu_threshold(n_cols);
        let nu_thr = mu / (n_rows as f64).sqrt();
        Self {
            mu,
            nu,
            spectral_norm,
            n_cols,
            n_rows,
            cp_satisfied: mu <= cp_mu && nu <= nu_thr,
            scp_satisfied: mu <= scp_mu && nu <= nu_thr,
            cp_mu_threshold: cp_mu,
            scp_mu_threshold: scp_mu,
            nu_threshold: nu_thr,
        }
    }
}

/// Evaluates the coherence property and the strong coherence property.
pub fn coherence_property_check(x: &CMatrix) -> Result<CoherenceReport> {
    let mu = worst_case_coherence(x)?;
    let nu = average_coherence_unchecked(x);
    Ok(CoherenceReport::from_metrics(mu, nu, spectral_norm(x), x.rows(), x.cols()))
}

/// `mu` of the unit-column shift dictionary (equivalently of `F A` with a
/// full unitary DFT) by FFT cross-correlation of the base sequences.
///
/// Columns `T_d a_n` and `T_e a_m` have inner product `c_nm[d - e]` with
/// `c_nm[k] = sum_j conj(a_n[j]) a_m[j + k]`, so only lags `|k| <= tau` matter.
pub fn shift_dictionary_coherence(dict: &ShiftDictionary) -> Result<f64> {
    let p = dict.seq_len();
    let tau = dict.tau;
    if dict.n_cols() < 2 {
        return Err(Error::UndefinedInput("coherence needs at least 2 columns".into()));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(p);
    let inv = planner.plan_fft_inverse(p);
    let spectra: Vec<Vec<C64>> = dict
        .base_sequences()
        .into_iter()
        .map(|a| {
            let n = norm2(a);
            let mut buf: Vec<C64> = a.iter().map(|z| z / n).collect();
            fwd.process(&mut buf);
            buf
        })
        .collect();
    let lags: Vec<usize> = (0..=tau).flat_map(|k| [k, (p - k) % p]).collect();
    let nu = spectra.len();
    let mu = (0..nu)
        .into_par_iter()
        .map(|a| {
            let mut buf = vec![C64::new(0.0, 0.0); p];
            let mut best = 0.0f64;
            for b in a..nu {
                for (o, (x, y)) in buf.iter_mut().zip(spectra[a].iter().zip(&spectra[b])) {
                    *o = x.conj() * y;
                }
                inv.process(&mut buf);
                for &k in &lags {
                    if a == b && k == 0 {
                        continue;
                    }
                    best = best.max(buf[k].norm() / p as f64);
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(mu)
}

/// Coherence report of the unit-column shift dictionary, using the FFT route for `mu`.
pub fn shift_dictionary_report(dict: &ShiftDictionary) -> Result<CoherenceReport> {
    let x = dict.normalized();
    let mu = shift_dictionary_coherence(dict)?;
    let nu = average_coherence_unchecked(&x);
    Ok(CoherenceReport::from_metrics(mu, nu, spectral_norm(&x), x.rows(), x.cols()))
}

/// `X diag(d)`
pub fn apply_wiggle(x: &CMatrix, d: &[C64]) -> CMatrix {
    x.scale_columns(d)
}

#[derive(Clone, Debug)]
pub struct WiggleOutcome {
    /// Column signs `d_n in {+1, -1}`.
    pub signs: Vec<C64>,
    pub matrix: CMatrix,
    pub nu: f64,
    /// `mu / sqrt(M)`
    pub target: f64,
    pub success: bool,
    pub flips: usize,
}

/// Per-column average-coherence sums `g_n = x_n^H (s - x_n)` for `s = sum x_m`.
fn nu_sums(x: &CMatrix, s: &[C64]) -> Vec<C64> {
    x.columns().map(|c| cdot(c, s) - cdot(c, c)).collect()
}

/// Sign search lowering `nu` to `mu / sqrt(M)`.
///
/// Greedy single-column flips against the currently worst column, with a
/// random restart whenever no flip improves the maximum. At most
/// `200 N` flips are tried; the best signs seen are returned.
pub fn wiggle<R: Rng + ?Sized>(x: &CMatrix, mu: f64, rng: &mut R) -> Result<WiggleOutcome> {
    check_two_columns(x)?;
    check_unit_columns(x)?;
    let n = x.cols();
    let target = mu / (x.rows() as f64).sqrt();
    let cap = 200 * n;
    let one = C64::new(1.0, 0.0);

    let eval = |d: &[C64]| -> (Vec<C64>, Vec<C64>, f64) {
        let xd = x.scale_columns(d);
        let mut s = vec![C64::new(0.0, 0.0); x.rows()];
        for c in xd.columns() {
            s.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        }
        let g = nu_sums(&xd, &s);
        let m = g.iter().map(|z| z.norm()).fold(0.0, f64::max) / (n - 1) as f64;
        (s, g, m)
    };

    let mut d = vec![one; n];
    let (_, mut g, mut cur) = eval(&d);
    let mut best = (d.clone(), cur);
    let mut flips = 0;
    while best.1 > target && flips < cap {
        let worst = (0..n).max_by(|&a, &b| g[a].norm().total_cmp(&g[b].norm())).unwrap();
        let xw = x.col(worst);
        // flipping column j moves g_worst by -2 conj(d_w) d_j x_w^H x_j
        let mut cands: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != worst)
            .map(|j| {
                let delta = -2.0 * d[worst].conj() * d[j] * cdot(xw, x.col(j));
                ((g[worst] + delta).norm(), j)
            })
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut improved = false;
        for &(_, j) in cands.iter().take(8) {
            flips += 1;
            d[j] = -d[j];
            let (_, g2, m2) = eval(&d);
            if m2 < cur {
                g = g2;
                cur = m2;
                improved = true;
                break;
            }
            d[j] = -d[j];
            if flips >= cap {
                break;
            }
        }
        if cur < best.1 {
            best = (d.clone(), cur);
        }
        if !improved {
            for z in d.iter_mut() {
                *z = if rng.random::<bool>() { one } else { -one };
            }
            let (_, g2, m2) = eval(&d);
            g = g2;
            cur = m2;
            if cur < best.1 {
                best = (d.clone(), cur);
            }
        }
    }
    let (signs, nu) = best;
    Ok(WiggleOutcome { matrix: x.scale_columns(&signs), signs, nu, target, success: nu <= target, flips })
}

/// Fraction of random `K`-subsets violating the statistical orthogonality
/// condition for the fixed vector `z`.
///
/// A draw violates when `||(X_S^H X_S - I) z||_inf > eps ||z||` or
/// `||X_{S^c}^H X_S z||_inf > eps ||z||`.
pub fn stoc_empirical<R: Rng + ?Sized>(
    x: &CMatrix,
    k: usize,
    eps: f64,
    z: &[C64],
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    let n = x.cols();
    if k >= n {
        return Err(invalid_param(format!("K = {k} must be below N_tau = {n}")));
    }
    if z.len() != k {
        return Err(invalid_param(format!("z has length {}, expected K = {k}", z.len())));
    }
    let zn = norm2(z);
    if zn == 0.0 {
        return Err(invalid_param("z must be nonzero"));
    }
    if trials == 0 {
        return Err(invalid_param("trials must be >= 1"));
    }
    let mut violations = 0usize;
    let mut corr = vec![C64::new(0.0, 0.0); n];
    for _ in 0..trials {
        let support = sample(rng, n, k).into_vec();
        let mut u = vec![C64::new(0.0, 0.0); x.rows()];
        for (&j, &zj) in support.iter().zip(z) {
            crate::linalg::axpy(zj, x.col(j), &mut u);
        }
        x.adjoint_mul_vec_into(&u, &mut corr);
        let mut in_s = vec![false; n];
        let dev1: Vec<C64> = support
            .iter()
            .zip(z)
            .map(|(&j, &zj)| {
                in_s[j] = true;
                corr[j] - zj
            })
            .collect();
        let stoc1 = norm_inf(&dev1);
        let stoc2 = (0..n).filter(|&j| !in_s[j]).map(|j| corr[j].norm()).fold(0.0, f64::max);
        if stoc1 > eps * zn || stoc2 > eps * zn {
            violations += 1;
        }
    }
    Ok(violations as f64 / trials as f64)
}

/// Fraction of random `K`-subsets with `||X_S^H X_S - I_K||_2 >= 1/2`.
pub fn submatrix_conditioning_rate<R: Rng + ?Sized>(x: &CMatrix, k: usize, trials: usize, rng: &mut R) -> Result<f64> {
    let n = x.cols();
    if k > n {
        return Err(invalid_param(format!("K = {k} exceeds N_tau = {n}")));
    }
    if trials == 0 {
        return Err(invalid_param("trials must be >= 1"));
    }
    let mut bad = 0usize;
    for _ in 0..trials {
        let support = sample(rng, n, k).into_vec();
        let mut g = gram_of(x, &support);
        for i in 0..k {
            g[(i, i)] -= C64::new(1.0, 0.0);
        }
        if hermitian_spectral_norm(&g) >= 0.5 {
            bad += 1;
        }
    }
    Ok(bad as f64 / trials as f64)
}

/// `2 N_tau^{-2 ln 2}`, the conditioning-failure bound for random subsets.
pub fn conditioning_failure_bound(n_tau: usize) -> f64 {
    2.0 * (n_tau as f64).powf(-2.0 * 2f64.ln())
}
