//! Discrete measurement model `y = X R b + w`.
//!
//! Active user `n` with delay `tau_n` occupies flat column
//! `flat_index(n, tau_n, tau)` of `X`; the sparse vector `R b` carries
//! `r_n b_n` there. Noise is circular complex Gaussian, `E|w_i|^2 = sigma^2`,
//! and `SNR = ||r||^2 / (M sigma^2)`.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, invalid_param, Result};
use crate::linalg::{complex_normal_vec, dft_columns, dft_matrix, CMatrix, Dictionary, C64};
use crate::waveforms::{cyclic_prefix_extend, delay_of, flat_index, user_of, Codebook, ShiftDictionary};

/// How the `M x P` mixing matrix is chosen.
#[derive(Clone, Debug)]
pub enum MixingMode {
    /// `M` rows of the unitary DFT, drawn uniformly without replacement.
    PartialDft,
    /// Fixed DFT rows (ablation with a frozen `Omega`).
    FixedOmega(Vec<usize>),
    /// Arbitrary `M x P` mixing matrix.
    GivenH(CMatrix),
}

/// `X = H A` with unit columns.
#[derive(Clone, Debug)]
pub struct MeasurementEnsemble {
    pub h: CMatrix,
    /// Sorted DFT rows, when `H` is a partial DFT.
    pub omega: Option<Vec<usize>>,
    pub x: CMatrix,
    /// `||H a_j||` before normalisation.
    pub column_scale: Vec<f64>,
    pub n_users: usize,
    pub tau: usize,
}

impl MeasurementEnsemble {
    pub fn m(&self) -> usize {
        self.x.rows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.cols()
    }
}

fn normalize_checked(mut x: CMatrix) -> Result<(CMatrix, Vec<f64>)> {
    let norms = x.column_norms();
    if let Some(j) = norms.iter().position(|&n| n == 0.0) {
        return Err(invalid_input(format!("column {j} vanishes after mixing")));
    }
    x.normalize_columns();
    Ok((x, norms))
}

fn check_omega(omega: &[usize], p: usize) -> Result<Vec<usize>> {
    let mut o = omega.to_vec();
    o.sort_unstable();
    o.dedup();
    if o.len() != omega.len() || o.iter().any(|&i| i >= p) || o.is_empty() {
        return Err(invalid_param(format!("Omega must be distinct rows in [0, {p})")));
    }
    Ok(o)
}

/// Forms `X = H A` and scales every column to unit norm.
pub fn assemble_ensemble<R: Rng + ?Sized>(
    dict: &ShiftDictionary,
    m: usize,
    rng: &mut R,
    mode: MixingMode,
) -> Result<MeasurementEnsemble> {
    let p = dict.seq_len();
    let (h, omega) = match mode {
        MixingMode::PartialDft | MixingMode::FixedOmega(_) => {
            if m == 0 || m > p {
                return Err(invalid_param(format!("M = {m} must lie in [1, P = {p}]")));
            }
            let omega = match mode {
                MixingMode::FixedOmega(o) => check_omega(&o, p)?,
                _ => {
                    let mut o = sample(rng, p, m).into_vec();
                    o.sort_unstable();
                    o
                }
            };
            if omega.len() != m {
                return Err(invalid_param(format!("|Omega| = {} differs from M = {m}", omega.len())));
            }
            (dft_matrix(p).select_rows(&omega), Some(omega))
        }
        MixingMode::GivenH(h) => {
            if h.cols() != p || h.rows() != m {
                return Err(invalid_param(format!("H is {}x{}, expected {m}x{p}", h.rows(), h.cols())));
            }
            (h, None)
        }
    };
    let (x, column_scale) = normalize_checked(h.matmul(dict.matrix()))?;
    Ok(MeasurementEnsemble { h, omega, x, column_scale, n_users: dict.n_users, tau: dict.tau })
}

/// Partial-DFT ensembles from a precomputed spectrum `F A`; selecting rows
/// of the spectrum is the same as forming `F_Omega A`.
#[derive(Clone, Debug)]
pub struct SpectrumSampler {
    spectrum: CMatrix,
    row_major: Vec<C64>,
    pub n_users: usize,
    pub tau: usize,
}

impl SpectrumSampler {
    pub fn new(dict: &ShiftDictionary) -> Self {
        let spectrum = dft_columns(dict.matrix());
        let row_major = spectrum.to_row_major();
        Self { spectrum, row_major, n_users: dict.n_users, tau: dict.tau }
    }

    pub fn seq_len(&self) -> usize {
        self.spectrum.rows()
    }

    /// Unit-column `X` for the given DFT rows (sorted, distinct).
    pub fn measurement_matrix(&self, omega: &[usize]) -> Result<CMatrix> {
        let n = self.spectrum.cols();
        let mut x = CMatrix::zeros(omega.len(), n);
        for (r, &i) in omega.iter().enumerate() {
            let row = &self.row_major[i * n..(i + 1) * n];
            for (j, z) in row.iter().enumerate() {
                x[(r, j)] = *z;
            }
        }
        Ok(normalize_checked(x)?.0)
    }

    pub fn ensemble(&self, omega: &[usize]) -> Result<MeasurementEnsemble> {
        let p = self.seq_len();
        let omega = check_omega(omega, p)?;
        let h = dft_matrix(p).select_rows(&omega);
        let scaled = self.spectrum.select_rows(&omega);
        let (x, column_scale) = normalize_checked(scaled)?;
        Ok(MeasurementEnsemble { h, omega: Some(omega), x, column_scale, n_users: self.n_users, tau: self.tau })
    }
}

/// Per-user complex amplitudes `r_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerMode {
    /// `r_n = 1` for every active user.
    Unit,
    /// `r_n` listed in order of increasing active-user index; length `K`.
    Given(Vec<C64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub n_users: usize,
    pub tau: usize,
    /// Sorted 0-based user indices.
    pub active_set: Vec<usize>,
    pub delays: Vec<usize>,
    pub power_profile: Vec<C64>,
    pub symbols: Vec<C64>,
    pub noise_var: f64,
}

impl ChannelRealization {
    pub fn k(&self) -> usize {
        self.active_set.len()
    }
}

pub fn qpsk(re_pos: bool, im_pos: bool) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    C64::new(if re_pos { s } else { -s }, if im_pos { s } else { -s })
}

/// `sigma^2 = ||r||^2 / (M * 10^(snr_db/10))`; `+inf` dB gives zero.
pub fn noise_var_for_snr(power_profile: &[C64], m: usize, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    let energy: f64 = power_profile.iter().map(|r| r.norm_sqr()).sum();
    energy / (m as f64 * 10f64.powf(snr_db / 10.0))
}

/// Uniform `K`-subset of users, i.i.d. uniform delays and QPSK symbols.
pub fn draw_channel<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    tau: usize,
    snr_db: f64,
    power_mode: &PowerMode,
    m: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if k > n {
        return Err(invalid_param(format!("K = {k} exceeds N = {n}")));
    }
    if m == 0 {
        return Err(invalid_param("M must be >= 1"));
    }
    let mut active_set = sample(rng, n, k).into_vec();
    active_set.sort_unstable();
    let delays: Vec<usize> = (0..k).map(|_| rng.random_range(0..=tau)).collect();
    let symbols: Vec<C64> = (0..k).map(|_| qpsk(rng.random(), rng.random())).collect();
    let power_profile = match power_mode {
        PowerMode::Unit => vec![C64::new(1.0, 0.0); k],
        PowerMode::Given(r) => {
            if r.len() != k {
                return Err(invalid_param(format!("power profile has {} entries, K = {k}", r.len())));
            }
            r.clone()
        }
    };
    let noise_var = noise_var_for_snr(&power_profile, m, snr_db);
    Ok(ChannelRealization { n_users: n, tau, active_set, delays, power_profile, symbols, noise_var })
}

/// The vector `R b` of length `N (tau + 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseSignal {
    pub values: Vec<C64>,
    pub tau: usize,
}

impl SparseSignal {
    pub fn support(&self) -> Vec<usize> {
        self.values.iter().enumerate().filter(|(_, v)| **v != C64::new(0.0, 0.0)).map(|(i, _)| i).collect()
    }

    /// `(user, delay, r_n b_n)` for every nonzero entry.
    pub fn decode(&self) -> Vec<(usize, usize, C64)> {
        self.support().into_iter().map(|i| (user_of(i, self.tau), delay_of(i, self.tau), self.values[i])).collect()
    }
}

pub fn to_sparse_signal(ch: &ChannelRealization) -> Result<SparseSignal> {
    let mut values = vec![C64::new(0.0, 0.0); ch.n_users * (ch.tau + 1)];
    for i in 0..ch.k() {
        let (n, d) = (ch.active_set[i], ch.delays[i]);
        if d > ch.tau {
            return Err(invalid_input(format!("delay {d} of user {n} outside [0, {}]", ch.tau)));
        }
        if n >= ch.n_users {
            return Err(invalid_input(format!("user {n} outside [0, {})", ch.n_users)));
        }
        values[flat_index(n, d, ch.tau)] = ch.power_profile[i] * ch.symbols[i];
    }
    Ok(SparseSignal { values, tau: ch.tau })
}

/// `X R b + noise`, with `noise` supplied by the caller.
pub fn synthesize_with_noise(x: &dyn Dictionary, signal: &SparseSignal, noise: &[C64]) -> Result<Vec<C64>> {
    if signal.values.len() != x.ncols() || noise.len() != x.nrows() {
        return Err(invalid_param("dimension mismatch between X, R b and noise"));
    }
    let mut y = noise.to_vec();
    for j in signal.support() {
        x.add_column(j, signal.values[j], &mut y);
    }
    Ok(y)
}

/// `y = X R b + w`, `w ~ CN(0, sigma^2 I)`.
pub fn synthesize_received<R: Rng + ?Sized>(
    x: &dyn Dictionary,
    signal: &SparseSignal,
    noise_var: f64,
    rng: &mut R,
) -> Result<Vec<C64>> {
    if noise_var < 0.0 {
        return Err(invalid_param("noise variance must be >= 0"));
    }
    let w = complex_normal_vec(rng, x.nrows(), noise_var);
    synthesize_with_noise(x, signal, &w)
}

/// Matched-filter bank output computed in the time domain.
///
/// `filters` holds one row of `L = P + tau + 1` taps per measurement over
/// the received chip frame. The receiver samples chips `tau .. tau + P`,
/// after every delayed codeword has arrived; taps outside that window are
/// ignored. Entry `(m, (n, l))` is the correlation of filter `m` with the
/// cyclic-prefixed codeword of user `n` delayed by `l` chips.
pub fn matched_filter_frontend_oracle(
    filters: &CMatrix,
    codebook: &Codebook,
    tau: usize,
    n_users: usize,
) -> Result<CMatrix> {
    let p = codebook.seq_len();
    let l_len = p + tau + 1;
    if filters.cols() != l_len {
        return Err(invalid_param(format!("filters have {} taps, expected L = {l_len}", filters.cols())));
    }
    if tau > codebook.tau || n_users > codebook.n_sequences() {
        return Err(invalid_param("codebook does not support the requested (tau, N)"));
    }
    let mut b = CMatrix::zeros(filters.rows(), n_users * (tau + 1));
    for n in 0..n_users {
        let a = cyclic_prefix_extend(codebook.sequence(n), tau)?;
        for l in 0..=tau {
            let col = flat_index(n, l, tau);
            for m in 0..filters.rows() {
                let mut acc = C64::new(0.0, 0.0);
                for t in tau..tau + p {
                    // received chip t of a codeword that started at time l
                    acc += filters[(m, t)].conj() * a[t - l];
                }
                b[(m, col)] = acc;
            }
        }
    }
    Ok(b)
}

/// The `M x P` mixing matrix equivalent to a filter bank: row `m` is
/// `h_m^H`, column `i` taken from the sampled chip `t` with `t = i (mod P)`.
pub fn filters_to_mixing(filters: &CMatrix, p: usize, tau: usize) -> CMatrix {
    let mut h = CMatrix::zeros(filters.rows(), p);
    for t in tau..tau + p {
        for m in 0..filters.rows() {
            h[(m, t % p)] = filters[(m, t)].conj();
        }
    }
    h
}

/// Filter bank whose equivalent mixing matrix is `h` (taps zero off-window).
pub fn mixing_to_filters(h: &CMatrix, tau: usize) -> CMatrix {
    let p = h.cols();
    let mut f = CMatrix::zeros(h.rows(), p + tau + 1);
    for t in tau..tau + p {
        for m in 0..h.rows() {
            f[(m, t)] = h[(m, t % p)].conj();
        }
    }
    f
}

/// Max `|B_oracle - H A|` for random filters and a random-phase codebook.
pub fn frontend_equivalence_deviation<R: Rng + ?Sized>(p: usize, tau: usize, m: usize, rng: &mut R) -> Result<f64> {
    if m == 0 {
        return Err(invalid_param("M must be >= 1"));
    }
    let cb = Codebook::random_block(p, tau, rng)?;
    let n_users = cb.n_sequences();
    let l_len = p + tau + 1;
    let taps = complex_normal_vec(rng, m * l_len, 1.0);
    let filters = CMatrix::from_row_major(m, l_len, &taps);
    let oracle = matched_filter_frontend_oracle(&filters, &cb, tau, n_users)?;
    let dict = crate::waveforms::build_shift_dictionary(&cb, tau, n_users)?;
    let ha = filters_to_mixing(&filters, p, tau).matmul(dict.matrix());
    Ok(oracle.max_abs_diff(&ha))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrProfile {
    /// `||r||^2 / (M sigma^2)`
    pub snr: f64,
    pub snr_min: f64,
    /// `|r|_(n)^2 / (M sigma^2 / K)`, largest first.
    pub snr_per_user: Vec<f64>,
    /// `|r|_(n)^2 / (||r||^2 / K)`, largest first.
    pub lar: Vec<f64>,
}

/// SNR and largest-to-average ratios; `sigma^2 = 0` reports infinite SNR.
pub fn snr_lar_profile(power_profile: &[C64], noise_var: f64, m: usize) -> Result<SnrProfile> {
    let k = power_profile.len();
    if k == 0 {
        return Err(invalid_param("K must be >= 1"));
    }
    if noise_var < 0.0 || m == 0 {
        return Err(invalid_param("need sigma^2 >= 0 and M >= 1"));
    }
    let mut mags: Vec<f64> = power_profile.iter().map(|r| r.norm_sqr()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let energy: f64 = mags.iter().sum();
    let kf = k as f64;
    let per_meas = m as f64 * noise_var;
    let snr = if noise_var == 0.0 { f64::INFINITY } else { energy / per_meas };
    let snr_per_user: Vec<f64> =
        mags.iter().map(|&e| if noise_var == 0.0 { f64::INFINITY } else { e / (per_meas / kf) }).collect();
    let lar = mags.iter().map(|&e| e / (energy / kf)).collect();
    Ok(SnrProfile { snr, snr_min: *snr_per_user.last().unwrap(), snr_per_user, lar })
}
