//! Matching-pursuit multi-user detectors and the condition checkers of their
//! recovery guarantees.
//!
//! Both detectors pick the column most correlated with the residual, then
//! exclude every column of that user, since a user arrives at one delay only.
//! The coherent detector knows the gains `r_n`, decides QPSK symbols and
//! subtracts the detected term. The noncoherent detector projects the
//! residual off the span of all selected columns.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{invalid_param, Error, Result};
use crate::linalg::{cdot, norm2, Dictionary, C64};
use crate::waveforms::{delay_of, user_of};

/// `20 sqrt(2)`
pub const C_COHERENT: f64 = 20.0 * std::f64::consts::SQRT_2;
/// `50 sqrt(2)`
pub const C3_NONCOHERENT: f64 = 50.0 * std::f64::consts::SQRT_2;
/// `104 sqrt(2)`
pub const C4_NONCOHERENT: f64 = 104.0 * std::f64::consts::SQRT_2;

/// Threshold below which `sigma_min / sigma_max` of the selected columns
/// counts as rank deficient.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    /// Detected users in detection order.
    pub active_users: Vec<usize>,
    pub delays: Vec<usize>,
    /// QPSK decisions, coherent detector only.
    pub symbols: Option<Vec<C64>>,
    pub selected_columns: Vec<usize>,
    pub iterations_run: usize,
    /// `||v_0||, .., ||v_K||`
    pub residual_norms: Vec<f64>,
}

impl DetectionResult {
    pub fn sorted_users(&self) -> Vec<usize> {
        let mut u = self.active_users.clone();
        u.sort_unstable();
        u
    }
}

fn validate(x: &dyn Dictionary, y: &[C64], k: usize, tau: usize) -> Result<usize> {
    let n_cols = x.ncols();
    if !n_cols.is_multiple_of(tau + 1) {
        return Err(invalid_param(format!("N_tau = {n_cols} is not a multiple of tau + 1 = {}", tau + 1)));
    }
    let n_users = n_cols / (tau + 1);
    if k == 0 {
        return Err(invalid_param("K must be >= 1"));
    }
    if k > n_users {
        return Err(invalid_param(format!("K = {k} exceeds the {n_users} user blocks")));
    }
    if y.len() != x.nrows() {
        return Err(invalid_param(format!("y has length {}, X has {} rows", y.len(), x.nrows())));
    }
    Ok(n_users)
}

/// Largest `|f_i|` over columns of users not yet excluded; ties go to the
/// lowest index.
fn select(f: &[C64], excluded: &[bool], tau: usize) -> usize {
    let mut best = usize::MAX;
    let mut best_val = -1.0;
    for (i, z) in f.iter().enumerate() {
        if excluded[user_of(i, tau)] {
            continue;
        }
        let v = z.norm_sqr();
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    best
}

/// `sgn(0) = +1`
#[inline]
fn sgn(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn coherent_core(
    x: &dyn Dictionary,
    gains: &[C64],
    y: &[C64],
    k: usize,
    tau: usize,
    mut trace: Option<&mut Vec<Vec<C64>>>,
) -> Result<DetectionResult> {
    let n_users = validate(x, y, k, tau)?;
    if gains.len() != n_users {
        return Err(invalid_param(format!("{} gains given for {n_users} users", gains.len())));
    }
    let mut v = y.to_vec();
    let mut f = vec![C64::new(0.0, 0.0); x.ncols()];
    let mut excluded = vec![false; n_users];
    let mut res = DetectionResult {
        active_users: Vec::with_capacity(k),
        delays: Vec::with_capacity(k),
        symbols: Some(Vec::with_capacity(k)),
        selected_columns: Vec::with_capacity(k),
        iterations_run: 0,
        residual_norms: vec![norm2(&v)],
    };
    if let Some(t) = trace.as_deref_mut() {
        t.push(v.clone());
    }
    for _ in 0..k {
        x.correlate(&v, &mut f);
        let i = select(&f, &excluded, tau);
        let user = user_of(i, tau);
        excluded[user] = true;
        let r = gains[user];
        let z = r.conj() * f[i];
        let b = C64::new(sgn(z.re) * FRAC_1_SQRT_2, sgn(z.im) * FRAC_1_SQRT_2);
        x.add_column(i, -(r * b), &mut v);
        res.active_users.push(user);
        res.delays.push(delay_of(i, tau));
        res.symbols.as_mut().unwrap().push(b);
        res.selected_columns.push(i);
        res.iterations_run += 1;
        res.residual_norms.push(norm2(&v));
        if let Some(t) = trace.as_deref_mut() {
            t.push(v.clone());
        }
    }
    Ok(res)
}

/// Coherent matching pursuit with known per-user gains (`gains[n] = r_n`).
pub fn coherent_mp(x: &dyn Dictionary, gains: &[C64], y: &[C64], k: usize, tau: usize) -> Result<DetectionResult> {
    coherent_core(x, gains, y, k, tau, None)
}

/// [`coherent_mp`] also returning every residual `v_0 .. v_K`.
pub fn coherent_mp_traced(
    x: &dyn Dictionary,
    gains: &[C64],
    y: &[C64],
    k: usize,
    tau: usize,
) -> Result<(DetectionResult, Vec<Vec<C64>>)> {
    let mut t = Vec::new();
    let r = coherent_core(x, gains, y, k, tau, Some(&mut t))?;
    Ok((r, t))
}

/// Extremal singular values of the upper-triangular factor `R` (`k x k`,
/// column-major) of the selected columns.
fn singular_ratio(r: &[Vec<C64>]) -> f64 {
    let k = r.len();
    let m = nalgebra::DMatrix::<C64>::from_fn(k, k, |i, j| if i < r[j].len() { r[j][i] } else { C64::new(0.0, 0.0) });
    let s = m.singular_values();
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

fn noncoherent_core(
    x: &dyn Dictionary,
    y: &[C64],
    k: usize,
    tau: usize,
    mut trace: Option<&mut Vec<Vec<C64>>>,
) -> Result<DetectionResult> {
    let n_users = validate(x, y, k, tau)?;
    let mut v = y.to_vec();
    let mut f = vec![C64::new(0.0, 0.0); x.ncols()];
    let mut excluded = vec![false; n_users];
    // orthonormal basis of the selected columns and the triangular factor
    let mut q: Vec<Vec<C64>> = Vec::with_capacity(k);
    let mut r_cols: Vec<Vec<C64>> = Vec::with_capacity(k);
    let mut res = DetectionResult {
        active_users: Vec::with_capacity(k),
        delays: Vec::with_capacity(k),
        symbols: None,
        selected_columns: Vec::with_capacity(k),
        iterations_run: 0,
        residual_norms: vec![norm2(&v)],
    };
    if let Some(t) = trace.as_deref_mut() {
        t.push(v.clone());
    }
    for _ in 0..k {
        x.correlate(&v, &mut f);
        let i = select(&f, &excluded, tau);
        let user = user_of(i, tau);
        excluded[user] = true;

        // classical Gram-Schmidt, applied twice
        let mut w = x.column(i).into_owned();
        let mut coef = vec![C64::new(0.0, 0.0); q.len() + 1];
        for _ in 0..2 {
            for (j, qj) in q.iter().enumerate() {
                let c = cdot(qj, &w);
                coef[j] += c;
                w.iter_mut().zip(qj).for_each(|(a, b)| *a -= c * b);
            }
        }
        let nw = norm2(&w);
        coef[q.len()] = C64::new(nw, 0.0);
        r_cols.push(coef);
        let ratio = singular_ratio(&r_cols);
        if ratio < RANK_TOL || nw == 0.0 {
            return Err(Error::NumericalDegeneracy { column: i, ratio });
        }
        w.iter_mut().for_each(|a| *a /= nw);

        // v <- (I - Q Q^H) y, with the newest direction removed twice
        for _ in 0..2 {
            let c = cdot(&w, &v);
            v.iter_mut().zip(&w).for_each(|(a, b)| *a -= c * b);
        }
        q.push(w);

        res.active_users.push(user);
        res.delays.push(delay_of(i, tau));
        res.selected_columns.push(i);
        res.iterations_run += 1;
        res.residual_norms.push(norm2(&v));
        if let Some(t) = trace.as_deref_mut() {
            t.push(v.clone());
        }
    }
    Ok(res)
}

/// Noncoherent matching pursuit: the residual is `y` minus its orthogonal
/// projection onto the selected columns.
pub fn noncoherent_mp(x: &dyn Dictionary, y: &[C64], k: usize, tau: usize) -> Result<DetectionResult> {
    noncoherent_core(x, y, k, tau, None)
}

/// [`noncoherent_mp`] also returning every residual `v_0 .. v_K`.
pub fn noncoherent_mp_traced(
    x: &dyn Dictionary,
    y: &[C64],
    k: usize,
    tau: usize,
) -> Result<(DetectionResult, Vec<Vec<C64>>)> {
    let mut t = Vec::new();
    let r = noncoherent_core(x, y, k, tau, Some(&mut t))?;
    Ok((r, t))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    N128Bound,
    CpBound,
    KBound,
    LarBound,
}

/// Relative slack of each condition; nonnegative means satisfied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    /// `N_tau / 128 - 1`
    pub n128: f64,
    /// `1 - mu / mu_cp`, or the `nu` slack if smaller
    pub cp: f64,
    /// `K_max / K - 1`
    pub k: f64,
    /// `min_k LAR_(k) / threshold_k - 1`
    pub lar: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeVerdict {
    pub satisfied: bool,
    pub binding_condition: Condition,
    pub margins: Margins,
    /// Largest `K` admitted by the `K` condition alone.
    pub k_max: f64,
    /// Failure probability bound when satisfied.
    pub error_bound: f64,
}

/// Inputs shared by both theorem checks.
#[derive(Clone, Debug)]
pub struct GuaranteeInputs<'a> {
    pub mu: f64,
    /// Average coherence; when absent only the `mu` half of the coherence
    /// property is checked.
    pub nu: Option<f64>,
    pub m: usize,
    pub n_tau: usize,
    pub power_profile: &'a [C64],
    pub noise_var: f64,
}

fn relative_slack(value: f64, limit: f64) -> f64 {
    if limit > 0.0 {
        1.0 - value / limit
    } else if value <= 0.0 {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

fn cp_margin(inp: &GuaranteeInputs) -> f64 {
    let mu_part = relative_slack(inp.mu, crate::coherence::cp_mu_threshold(inp.n_tau));
    match inp.nu {
        Some(nu) => mu_part.min(relative_slack(nu, inp.mu / (inp.m as f64).sqrt())),
        None => mu_part,
    }
}

/// `min_k LAR_(k) / thr_k - 1` with
/// `thr_k = 8 / (1 - c mu sqrt((K-k+1) ln N))^2 * K ln N / (M SNR)`.
fn lar_margin(inp: &GuaranteeInputs, c: f64) -> f64 {
    let k = inp.power_profile.len();
    let ln_n = (inp.n_tau as f64).ln();
    let mut mags: Vec<f64> = inp.power_profile.iter().map(|r| r.norm_sqr()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let energy: f64 = mags.iter().sum();
    if energy == 0.0 {
        return f64::NEG_INFINITY;
    }
    let snr = if inp.noise_var == 0.0 { f64::INFINITY } else { energy / (inp.m as f64 * inp.noise_var) };
    let kf = k as f64;
    let mut worst = f64::INFINITY;
    for (idx, &e) in mags.iter().enumerate() {
        let kk = (idx + 1) as f64;
        let denom = 1.0 - c * inp.mu * ((kf - kk + 1.0) * ln_n).sqrt();
        if denom <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let thr = 8.0 / (denom * denom) * kf * ln_n / (inp.m as f64 * snr);
        let lar = e / (energy / kf);
        let slack = if thr == 0.0 { f64::INFINITY } else { lar / thr - 1.0 };
        worst = worst.min(slack);
    }
    worst
}

fn verdict(margins: Margins, k_max: f64, error_bound: f64) -> GuaranteeVerdict {
    let order = [
        (Condition::N128Bound, margins.n128),
        (Condition::CpBound, margins.cp),
        (Condition::KBound, margins.k),
        (Condition::LarBound, margins.lar),
    ];
    let satisfied = order.iter().all(|(_, m)| *m >= 0.0);
    let binding = if satisfied {
        order.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0
    } else {
        order.iter().find(|(_, m)| m.is_nan() || *m < 0.0).unwrap().0
    };
    GuaranteeVerdict { satisfied, binding_condition: binding, margins, k_max, error_bound }
}

fn check_inputs(inp: &GuaranteeInputs) -> Result<()> {
    if inp.power_profile.is_empty() {
        return Err(invalid_param("K must be >= 1"));
    }
    if inp.m == 0 || inp.n_tau < 2 || !inp.mu.is_finite() || inp.mu < 0.0 || inp.noise_var < 0.0 {
        return Err(invalid_param("guarantee inputs must be finite with M >= 1, N_tau >= 2, mu >= 0, sigma^2 >= 0"));
    }
    Ok(())
}

/// Conditions of the coherent recovery guarantee.
pub fn guarantee_check_coherent(inp: &GuaranteeInputs) -> Result<GuaranteeVerdict> {
    check_inputs(inp)?;
    let n = inp.n_tau as f64;
    let ln_n = n.ln();
    let k = inp.power_profile.len() as f64;
    let k_max = (inp.m as f64 / (2.0 * ln_n)).min(1.0 / (C_COHERENT.powi(2) * inp.mu.powi(2) * ln_n));
    let margins =
        Margins { n128: n / 128.0 - 1.0, cp: cp_margin(inp), k: k_max / k - 1.0, lar: lar_margin(inp, C_COHERENT) };
    Ok(verdict(margins, k_max, (4.0 + 1.0 / PI) / n))
}

/// Conditions of the noncoherent recovery guarantee; `spectral_norm` is `||X||_2`.
pub fn guarantee_check_noncoherent(inp: &GuaranteeInputs, spectral_norm: f64) -> Result<GuaranteeVerdict> {
    check_inputs(inp)?;
    if spectral_norm.is_nan() || spectral_norm < 0.0 {
        return Err(invalid_param("spectral norm must be >= 0"));
    }
    let n = inp.n_tau as f64;
    let ln_n = n.ln();
    let k = inp.power_profile.len() as f64;
    let k_max = (n / (C4_NONCOHERENT.powi(2) * spectral_norm.powi(2) * ln_n))
        .min(1.0 / (C3_NONCOHERENT.powi(2) * inp.mu.powi(2) * ln_n));
    let margins =
        Margins { n128: n / 128.0 - 1.0, cp: cp_margin(inp), k: k_max / k - 1.0, lar: lar_margin(inp, C3_NONCOHERENT) };
    Ok(verdict(margins, k_max, (k / PI + 6.0) / n))
}

/// `max over theta in (0,1)` on a `1e-3` grid of the minimum of the given terms.
fn theta_grid_max(terms: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for i in 1..1000 {
        let theta = i as f64 * 1e-3;
        let v = terms(theta);
        if v > best.0 {
            best = (v, theta);
        }
    }
    best
}

/// Corollary bound on `K` for the coherent detector and the maximising
/// `theta`: `min{M / (2 ln N), M (1-theta)^2 SNR_min / (8 ln N), theta^2 / (c^2 mu^2 ln N)}`.
pub fn corollary_k_limit_coherent(mu: f64, m: usize, n_tau: usize, snr_min: f64) -> (f64, f64) {
    let ln_n = (n_tau as f64).ln();
    let mf = m as f64;
    theta_grid_max(|t| {
        (mf / (2.0 * ln_n))
            .min(mf * (1.0 - t).powi(2) * snr_min / (8.0 * ln_n))
            .min(t * t / (C_COHERENT.powi(2) * mu * mu * ln_n))
    })
}

/// Noncoherent counterpart: `min{M (1-theta)^2 SNR_min / (8 ln N),
/// theta^2 / (c3^2 mu^2 ln N), N / (c4^2 ||X||^2 ln N)}`.
pub fn corollary_k_limit_noncoherent(mu: f64, spectral_norm: f64, m: usize, n_tau: usize, snr_min: f64) -> (f64, f64) {
    let ln_n = (n_tau as f64).ln();
    let mf = m as f64;
    let nf = n_tau as f64;
    theta_grid_max(|t| {
        (mf * (1.0 - t).powi(2) * snr_min / (8.0 * ln_n))
            .min(t * t / (C3_NONCOHERENT.powi(2) * mu * mu * ln_n))
            .min(nf / (C4_NONCOHERENT.powi(2) * spectral_norm.powi(2) * ln_n))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    SupportOnly,
    SupportAndSymbols,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub success: bool,
    pub users_correct: bool,
    /// Every true user detected at its true delay.
    pub delays_correct: bool,
    /// Every true user's symbol decided correctly (coherent only).
    pub symbols_correct: bool,
}

/// Compares a detection with the realised channel. Success is user-level;
/// delay accuracy is reported separately.
pub fn evaluate_detection(result: &DetectionResult, truth: &ChannelRealization, mode: EvalMode) -> DetectionOutcome {
    let users_correct = result.sorted_users() == truth.active_set;
    let mut delays_correct = users_correct;
    let mut symbols_correct = users_correct && result.symbols.is_some();
    if users_correct {
        for (i, &u) in truth.active_set.iter().enumerate() {
            let pos = result.active_users.iter().position(|&a| a == u).unwrap();
            if result.delays[pos] != truth.delays[i] {
                delays_correct = false;
            }
            if let Some(sym) = &result.symbols {
                if (sym[pos] - truth.symbols[i]).norm() > 1e-12 {
                    symbols_correct = false;
                }
            }
        }
    }
    let success = match mode {
        EvalMode::SupportOnly => users_correct,
        EvalMode::SupportAndSymbols => users_correct && symbols_correct,
    };
    DetectionOutcome { success, users_correct, delays_correct, symbols_correct }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::qpsk;
    use crate::linalg::{CMatrix, IdentityDictionary};

    fn one() -> C64 {
        C64::new(1.0, 0.0)
    }

    fn e(n: usize, i: usize, z: C64) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[i] = z;
        v
    }

    #[test]
    fn identity_hand_example() {
        // N = 2 users, tau = 1; user 1 (0-based) at delay 0 is column 2
        let x = CMatrix::identity(4);
        let b = qpsk(true, true);
        let y = e(4, 2, b);
        let r = coherent_mp(&x, &[one(), one()], &y, 1, 1).unwrap();
        assert_eq!(r.active_users, vec![1]);
        assert_eq!(r.delays, vec![0]);
        assert_eq!(r.symbols.unwrap(), vec![b]);
        let nc = noncoherent_mp(&x, &y, 1, 1).unwrap();
        assert_eq!((nc.active_users, nc.delays), (vec![1], vec![0]));
    }

    #[test]
    fn negative_symbol() {
        let x = CMatrix::identity(2);
        let y = e(2, 0, -qpsk(true, true));
        let r = coherent_mp(&x, &[one(), one()], &y, 1, 0).unwrap();
        assert_eq!(r.symbols.unwrap()[0], qpsk(false, false));
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        let x = CMatrix::identity(4);
        let y = vec![C64::new(0.5, 0.0); 4];
        let r = noncoherent_mp(&x, &y, 2, 1).unwrap();
        assert_eq!(r.selected_columns, vec![0, 2]);
        let z = vec![C64::new(0.0, 0.0); 4];
        let rc = coherent_mp(&x, &[one(), one()], &z, 1, 1).unwrap();
        assert_eq!(rc.selected_columns, vec![0]);
        // sgn(0) = +1
        assert_eq!(rc.symbols.unwrap()[0], qpsk(true, true));
    }

    #[test]
    fn exhaustive_noiseless_orthonormal() {
        let x = CMatrix::identity(4);
        let ident = IdentityDictionary { n: 4 };
        let syms = [qpsk(true, true), qpsk(true, false), qpsk(false, true), qpsk(false, false)];
        for mask in 1u32..4 {
            let users: Vec<usize> = (0..2).filter(|u| mask >> u & 1 == 1).collect();
            for d0 in 0..2 {
                for d1 in 0..2 {
                    for si in 0..4 {
                        let delays: Vec<usize> = users.iter().map(|&u| if u == 0 { d0 } else { d1 }).collect();
                        let symbols: Vec<C64> = users.iter().map(|&u| syms[(si + u) % 4]).collect();
                        let ch = ChannelRealization {
                            n_users: 2,
                            tau: 1,
                            active_set: users.clone(),
                            delays,
                            power_profile: vec![one(); users.len()],
                            symbols,
                            noise_var: 0.0,
                        };
                        let sig = crate::channel::to_sparse_signal(&ch).unwrap();
                        let y = crate::channel::synthesize_with_noise(&x, &sig, &[C64::new(0.0, 0.0); 4]).unwrap();
                        let k = users.len();
                        for dict in [&x as &dyn Dictionary, &ident] {
                            let c = coherent_mp(dict, &[one(), one()], &y, k, 1).unwrap();
                            let nc = noncoherent_mp(dict, &y, k, 1).unwrap();
                            let oc = evaluate_detection(&c, &ch, EvalMode::SupportAndSymbols);
                            let on = evaluate_detection(&nc, &ch, EvalMode::SupportOnly);
                            assert!(oc.success && oc.delays_correct);
                            assert!(on.success && on.delays_correct);
                            assert!(*nc.residual_norms.last().unwrap() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn too_many_users_rejected() {
        let x = CMatrix::identity(4);
        let y = vec![C64::new(0.0, 0.0); 4];
        assert!(coherent_mp(&x, &[one(), one()], &y, 3, 1).is_err());
        assert!(noncoherent_mp(&x, &y, 0, 1).is_err());
    }

    #[test]
    fn duplicate_columns_are_degenerate() {
        let c = vec![C64::new(FRAC_1_SQRT_2, 0.0), C64::new(0.0, FRAC_1_SQRT_2)];
        let x = CMatrix::from_columns(&[c.clone(), c.clone()]);
        let y = vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)];
        match noncoherent_mp(&x, &y, 2, 0) {
            Err(Error::NumericalDegeneracy { column, .. }) => assert_eq!(column, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn evaluation_modes() {
        let ch = ChannelRealization {
            n_users: 2,
            tau: 1,
            active_set: vec![1],
            delays: vec![0],
            power_profile: vec![one()],
            symbols: vec![qpsk(true, true)],
            noise_var: 0.0,
        };
        let mut det = DetectionResult {
            active_users: vec![1],
            delays: vec![0],
            symbols: Some(vec![qpsk(true, true)]),
            selected_columns: vec![2],
            iterations_run: 1,
            residual_norms: vec![1.0, 0.0],
        };
        assert!(evaluate_detection(&det, &ch, EvalMode::SupportAndSymbols).success);
        det.symbols = Some(vec![qpsk(false, true)]);
        assert!(evaluate_detection(&det, &ch, EvalMode::SupportOnly).success);
        assert!(!evaluate_detection(&det, &ch, EvalMode::SupportAndSymbols).success);
        det.delays = vec![1];
        let o = evaluate_detection(&det, &ch, EvalMode::SupportOnly);
        assert!(o.success && !o.delays_correct);
    }

    fn inputs(mu: f64, m: usize, n_tau: usize, profile: &[C64], noise_var: f64) -> GuaranteeInputs<'_> {
        GuaranteeInputs { mu, nu: None, m, n_tau, power_profile: profile, noise_var }
    }

    #[test]
    fn small_n_tau_binds_n128() {
        let p = [one()];
        let v = guarantee_check_coherent(&inputs(0.0, 50, 100, &p, 0.0)).unwrap();
        assert!(!v.satisfied);
        assert_eq!(v.binding_condition, Condition::N128Bound);
    }

    #[test]
    fn zero_mu_noiseless_limits() {
        let n_tau = 4096;
        let m = 100;
        let kmax = (m as f64 / (2.0 * (n_tau as f64).ln())).floor() as usize;
        let p = vec![one(); kmax];
        assert!(guarantee_check_coherent(&inputs(0.0, m, n_tau, &p, 0.0)).unwrap().satisfied);
        let p2 = vec![one(); kmax + 1];
        let v = guarantee_check_coherent(&inputs(0.0, m, n_tau, &p2, 0.0)).unwrap();
        assert_eq!((v.satisfied, v.binding_condition), (false, Condition::KBound));
    }

    #[test]
    fn k_bound_arithmetic_16384() {
        let kb = 60.0 / (2.0 * 16384f64.ln());
        assert!((kb - 3.09).abs() < 0.01);
        let p3 = vec![one(); 3];
        assert!(guarantee_check_coherent(&inputs(0.0, 60, 16384, &p3, 0.0)).unwrap().margins.k >= 0.0);
        let p4 = vec![one(); 4];
        assert!(guarantee_check_coherent(&inputs(0.0, 60, 16384, &p4, 0.0)).unwrap().margins.k < 0.0);
    }

    #[test]
    fn unbounded_spectral_norm_binds_k() {
        let p = [one()];
        let v = guarantee_check_noncoherent(&inputs(0.0, 50, 4096, &p, 0.0), f64::INFINITY).unwrap();
        assert_eq!((v.satisfied, v.binding_condition), (false, Condition::KBound));
    }

    #[test]
    fn tight_frame_k_bound() {
        let (m, n_tau) = (64usize, 1usize << 20);
        let norm = (n_tau as f64 / m as f64).sqrt();
        let p = [one()];
        let v = guarantee_check_noncoherent(&inputs(0.0, m, n_tau, &p, 0.0), norm).unwrap();
        let want = m as f64 / (C4_NONCOHERENT.powi(2) * (n_tau as f64).ln());
        assert!((v.k_max - want).abs() < 1e-12 * want);
    }

    #[test]
    fn equal_powers_reduce_to_worst_case_lar() {
        let (mu, m, n_tau, k) = (1e-3, 200, 4096, 3);
        let p = vec![C64::new(0.0, 2.0); k];
        let ln_n = (n_tau as f64).ln();
        let sigma2 = 0.01;
        let snr = 4.0 * k as f64 / (m as f64 * sigma2);
        let v = guarantee_check_noncoherent(&inputs(mu, m, n_tau, &p, sigma2), 1.0).unwrap();
        let denom = 1.0 - C3_NONCOHERENT * mu * (k as f64 * ln_n).sqrt();
        let thr = 8.0 / denom.powi(2) * k as f64 * ln_n / (m as f64 * snr);
        assert!((v.margins.lar - (1.0 / thr - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_denominator_fails_lar() {
        let p = [one(), one()];
        let v = guarantee_check_coherent(&inputs(0.5, 1000, 4096, &p, 0.01)).unwrap();
        assert_eq!(v.margins.lar, f64::NEG_INFINITY);
        assert!(!v.satisfied);
    }

    #[test]
    fn corollary_theta_grid() {
        // mu = 0 removes the theta^2 term; optimum at the smallest theta
        let (k, theta) = corollary_k_limit_coherent(0.0, 100, 4096, 10.0);
        let ln_n = 4096f64.ln();
        let want = (100.0 / (2.0 * ln_n)).min(100.0 * 0.999f64.powi(2) * 10.0 / (8.0 * ln_n));
        assert!((k - want).abs() < 1e-12);
        assert!((theta - 1e-3).abs() < 1e-15);
        let (kn, _) = corollary_k_limit_noncoherent(1e-3, 1.0, 100, 4096, 10.0);
        assert!(kn > 0.0 && kn < 100.0 * 10.0 / (8.0 * ln_n));
    }
}
