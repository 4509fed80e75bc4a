//! Seeded Monte Carlo estimation of detection error rates.
//!
//! Trial `t` at the `i`-th sparsity level draws everything from its own
//! ChaCha8 stream `(i << 32) | t` under the master seed, so the report does
//! not depend on thread count or scheduling. Within a trial the same users,
//! delays, symbols, row permutation and unit noise are reused for every `M`,
//! SNR and detector: `Omega_M` is the first `M` entries of the permutation
//! and the noise is the first `M` unit draws scaled by `sigma`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    draw_channel, noise_var_for_snr, synthesize_with_noise, to_sparse_signal, PowerMode, SpectrumSampler,
};
use crate::coherence::{shift_dictionary_report, CoherenceReport};
use crate::detectors::{coherent_mp, evaluate_detection, noncoherent_mp, EvalMode};
use crate::error::{invalid_param, Error, Result};
use crate::linalg::{complex_normal_vec, C64};
use crate::waveforms::{build_shift_dictionary, user_capacity, Codebook, Family};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959964;

pub const CSV_HEADER: &str = "family,P,tau,M,K,snr_db,detector,trials,failures,p_err,ci_low,ci_high,seed";

const CODEBOOK_STREAM: u64 = u64::MAX;
const OMEGA_STREAM: u64 = u64::MAX - 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorChoice {
    Coherent,
    Noncoherent,
    Both,
}

impl DetectorChoice {
    pub fn kinds(self) -> Vec<DetectorKind> {
        match self {
            DetectorChoice::Coherent => vec![DetectorKind::Coherent],
            DetectorChoice::Noncoherent => vec![DetectorKind::Noncoherent],
            DetectorChoice::Both => vec![DetectorKind::Coherent, DetectorKind::Noncoherent],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Coherent,
    Noncoherent,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Coherent => "coherent",
            DetectorKind::Noncoherent => "noncoherent",
        }
    }

    /// Coherent detection must also get the symbols right.
    pub fn eval_mode(self) -> EvalMode {
        match self {
            DetectorKind::Coherent => EvalMode::SupportAndSymbols,
            DetectorKind::Noncoherent => EvalMode::SupportOnly,
        }
    }
}

fn default_power_mode() -> PowerMode {
    PowerMode::Unit
}

/// One experiment grid. For Kerdock `P` is the code length `2^m` and the
/// sequences have `P - 1` chips.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: Family,
    #[serde(rename = "P")]
    pub p: usize,
    pub tau: usize,
    #[serde(rename = "M_list")]
    pub m_list: Vec<usize>,
    #[serde(rename = "K_list")]
    pub k_list: Vec<usize>,
    pub snr_db_list: Vec<f64>,
    pub detector: DetectorChoice,
    pub trials: usize,
    pub master_seed: u64,
    /// `"unit"` or `{"given": [[re, im], ..]}`; a given profile supplies the
    /// first `K` gains at each sparsity level.
    #[serde(default = "default_power_mode")]
    pub power_mode: PowerMode,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Users in the dictionary; defaults to the family's capacity.
    #[serde(default)]
    pub n_users: Option<usize>,
    /// Redraw random codebooks in every trial instead of once per experiment.
    #[serde(default)]
    pub redraw_codebook: bool,
    /// Draw `Omega` once per `M` instead of once per trial.
    #[serde(default)]
    pub fixed_omega: bool,
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn capacity(&self) -> usize {
        user_capacity(self.p, self.tau, self.family)
    }

    /// Chips per base sequence.
    pub fn seq_len(&self) -> usize {
        match self.family {
            Family::Kerdock => self.p.saturating_sub(1),
            _ => self.p,
        }
    }

    pub fn n_users(&self) -> usize {
        self.n_users.unwrap_or_else(|| self.capacity())
    }

    fn reject(point: impl Into<String>, reason: impl Into<String>) -> Error {
        Error::ConfigRejected { point: point.into(), reason: reason.into() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Self::reject("trials", "trials must be >= 1"));
        }
        if self.m_list.is_empty() || self.k_list.is_empty() || self.snr_db_list.is_empty() {
            return Err(Self::reject("grid", "M_list, K_list and snr_db_list must be nonempty"));
        }
        let cap = self.capacity();
        let n = self.n_users();
        if n > cap || n == 0 {
            return Err(Self::reject(format!("n_users={n}"), format!("must lie in [1, capacity {cap}]")));
        }
        for &m in &self.m_list {
            if m == 0 || m > self.seq_len() {
                return Err(Self::reject(format!("M={m}"), format!("M must lie in [1, {}]", self.seq_len())));
            }
        }
        for &k in &self.k_list {
            if k == 0 || k > n {
                return Err(Self::reject(format!("K={k}"), format!("K must lie in [1, N = {n}]")));
            }
            if let PowerMode::Given(r) = &self.power_mode {
                if r.len() < k {
                    return Err(Self::reject(format!("K={k}"), format!("power profile lists only {} gains", r.len())));
                }
            }
        }
        if self.snr_db_list.iter().any(|s| s.is_nan()) {
            return Err(Self::reject("snr_db_list", "SNR must not be NaN"));
        }
        if self.k_list.len() as u64 > u32::MAX as u64 || self.trials as u64 > u32::MAX as u64 {
            return Err(Self::reject("grid", "too many trials or sparsity levels"));
        }
        Ok(())
    }

    fn codebook<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Result<Codebook> {
        Codebook::generate(self.family, self.p, self.tau, rng)
    }
}

/// 95% Wilson score interval for `failures` out of `trials`.
pub fn wilson_interval(failures: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = failures as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub family: Family,
    #[serde(rename = "P")]
    pub p: usize,
    pub tau: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub snr_db: f64,
    pub detector: DetectorKind,
    pub trials: usize,
    pub failures: usize,
    pub p_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    /// Trials where some true user was found at a wrong delay or missed.
    pub delay_errors: usize,
}

impl ReportRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.family,
            self.p,
            self.tau,
            self.m,
            self.k,
            self.snr_db,
            self.detector.name(),
            self.trials,
            self.failures,
            self.p_err,
            self.ci_low,
            self.ci_high,
            self.seed
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    /// Coherence of the unit-column dictionary before subsampling.
    pub coherence: CoherenceReport,
    pub capacity: usize,
    pub n_users: usize,
}

#[derive(Serialize)]
struct DelayAccuracy {
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "K")]
    k: usize,
    snr_db: f64,
    detector: DetectorKind,
    delay_accuracy: f64,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    config: &'a ExperimentConfig,
    capacity: usize,
    n_users: usize,
    coherence: &'a CoherenceReport,
    delay_accuracy: Vec<DelayAccuracy>,
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.rows.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.csv_line());
        }
        s
    }

    pub fn sidecar_json(&self) -> Result<String> {
        let sc = Sidecar {
            config: &self.config,
            capacity: self.capacity,
            n_users: self.n_users,
            coherence: &self.coherence,
            delay_accuracy: self
                .rows
                .iter()
                .map(|r| DelayAccuracy {
                    m: r.m,
                    k: r.k,
                    snr_db: r.snr_db,
                    detector: r.detector,
                    delay_accuracy: 1.0 - r.delay_errors as f64 / r.trials as f64,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&sc)?)
    }

    /// Writes the CSV to `path` and the sidecar next to it with a `.json` extension.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        std::fs::write(path, self.to_csv())?;
        let side = path.with_extension("json");
        std::fs::write(&side, self.sidecar_json()?)?;
        Ok(side)
    }

    pub fn row(&self, m: usize, k: usize, snr_db: f64, detector: DetectorKind) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.m == m && r.k == k && r.snr_db == snr_db && r.detector == detector)
    }
}

/// Per-trial RNG, independent of every other `(k_index, trial)`.
pub fn trial_rng(master_seed: u64, k_index: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((k_index as u64) << 32) | trial as u64);
    rng
}

fn reserved_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

struct Grid {
    m_list: Vec<usize>,
    snr: Vec<f64>,
    kinds: Vec<DetectorKind>,
}

impl Grid {
    fn len(&self) -> usize {
        self.m_list.len() * self.snr.len() * self.kinds.len()
    }

    fn index(&self, mi: usize, si: usize, di: usize) -> usize {
        (mi * self.snr.len() + si) * self.kinds.len() + di
    }
}

#[derive(Clone, Default)]
struct Tally {
    failures: Vec<usize>,
    delay_errors: Vec<usize>,
}

impl Tally {
    fn new(n: usize) -> Self {
        Self { failures: vec![0; n], delay_errors: vec![0; n] }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.failures.iter_mut().zip(other.failures) {
            *a += b;
        }
        for (a, b) in self.delay_errors.iter_mut().zip(other.delay_errors) {
            *a += b;
        }
        self
    }
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    cfg: &ExperimentConfig,
    grid: &Grid,
    shared: Option<&SpectrumSampler>,
    fixed_omegas: Option<&[Vec<usize>]>,
    n_users: usize,
    k_index: usize,
    k: usize,
    trial: usize,
) -> Result<Tally> {
    let mut rng = trial_rng(cfg.master_seed, k_index, trial);
    let own;
    let sampler = match shared {
        Some(s) => s,
        None => {
            let cb = cfg.codebook(&mut rng)?;
            own = SpectrumSampler::new(&build_shift_dictionary(&cb, cfg.tau, n_users)?);
            &own
        }
    };
    let p = sampler.seq_len();
    let power = match &cfg.power_mode {
        PowerMode::Unit => PowerMode::Unit,
        PowerMode::Given(r) => PowerMode::Given(r[..k].to_vec()),
    };
    let ch = draw_channel(n_users, k, cfg.tau, f64::INFINITY, &power, 1, &mut rng)?;
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(&mut rng);
    let unit_noise = complex_normal_vec(&mut rng, p, 1.0);

    let signal = to_sparse_signal(&ch)?;
    let mut gains = vec![C64::new(1.0, 0.0); n_users];
    for (&u, &r) in ch.active_set.iter().zip(&ch.power_profile) {
        gains[u] = r;
    }
    let mut tally = Tally::new(grid.len());
    for (mi, &m) in grid.m_list.iter().enumerate() {
        let omega = match fixed_omegas {
            Some(f) => f[mi].clone(),
            None => {
                let mut o = perm[..m].to_vec();
                o.sort_unstable();
                o
            }
        };
        let x = sampler.measurement_matrix(&omega)?;
        let clean = synthesize_with_noise(&x, &signal, &vec![C64::new(0.0, 0.0); m])?;
        for (si, &snr) in grid.snr.iter().enumerate() {
            let sigma = noise_var_for_snr(&ch.power_profile, m, snr).sqrt();
            let y: Vec<C64> = clean.iter().zip(&unit_noise[..m]).map(|(c, w)| c + w * sigma).collect();
            for (di, &kind) in grid.kinds.iter().enumerate() {
                let det = match kind {
                    DetectorKind::Coherent => coherent_mp(&x, &gains, &y, k, cfg.tau),
                    DetectorKind::Noncoherent => noncoherent_mp(&x, &y, k, cfg.tau),
                };
                let idx = grid.index(mi, si, di);
                match det {
                    Ok(det) => {
                        let out = evaluate_detection(&det, &ch, kind.eval_mode());
                        tally.failures[idx] += usize::from(!out.success);
                        tally.delay_errors[idx] += usize::from(!out.delays_correct);
                    }
                    // a degenerate selection is a detection failure
                    Err(Error::NumericalDegeneracy { .. }) => {
                        tally.failures[idx] += 1;
                        tally.delay_errors[idx] += 1;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(tally)
}

/// Runs every grid point of `cfg` on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let n_users = cfg.n_users();
    let codebook = cfg.codebook(&mut reserved_rng(cfg.master_seed, CODEBOOK_STREAM))?;
    let dict = build_shift_dictionary(&codebook, cfg.tau, n_users)?;
    let coherence = shift_dictionary_report(&dict)?;
    let shared = if cfg.redraw_codebook && cfg.family.is_random() { None } else { Some(SpectrumSampler::new(&dict)) };
    drop(dict);

    let fixed_omegas: Option<Vec<Vec<usize>>> = cfg.fixed_omega.then(|| {
        let mut rng = reserved_rng(cfg.master_seed, OMEGA_STREAM);
        let mut perm: Vec<usize> = (0..cfg.seq_len()).collect();
        perm.shuffle(&mut rng);
        cfg.m_list
            .iter()
            .map(|&m| {
                let mut o = perm[..m].to_vec();
                o.sort_unstable();
                o
            })
            .collect()
    });

    let grid = Grid { m_list: cfg.m_list.clone(), snr: cfg.snr_db_list.clone(), kinds: cfg.detector.kinds() };
    let mut rows = Vec::with_capacity(grid.len() * cfg.k_list.len());
    let mut tallies = Vec::with_capacity(cfg.k_list.len());
    for (ki, &k) in cfg.k_list.iter().enumerate() {
        log::info!("{} P={} tau={} K={k}: {} trials", cfg.family, cfg.p, cfg.tau, cfg.trials);
        let tally = (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, &grid, shared.as_ref(), fixed_omegas.as_deref(), n_users, ki, k, t))
            .try_reduce(|| Tally::new(grid.len()), |a, b| Ok(a.merge(b)))?;
        tallies.push(tally);
    }
    for (mi, &m) in grid.m_list.iter().enumerate() {
        for (ki, &k) in cfg.k_list.iter().enumerate() {
            for (si, &snr) in grid.snr.iter().enumerate() {
                for (di, &kind) in grid.kinds.iter().enumerate() {
                    let idx = grid.index(mi, si, di);
                    let failures = tallies[ki].failures[idx];
                    let (ci_low, ci_high) = wilson_interval(failures, cfg.trials);
                    rows.push(ReportRow {
                        family: cfg.family,
                        p: cfg.p,
                        tau: cfg.tau,
                        m,
                        k,
                        snr_db: snr,
                        detector: kind,
                        trials: cfg.trials,
                        failures,
                        p_err: failures as f64 / cfg.trials as f64,
                        ci_low,
                        ci_high,
                        seed: cfg.master_seed,
                        delay_errors: tallies[ki].delay_errors[idx],
                    });
                }
            }
        }
    }
    Ok(ExperimentReport { config: cfg.clone(), rows, coherence, capacity: cfg.capacity(), n_users })
}

/// [`run_experiment`] on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentReport> {
    if threads == 0 {
        return Err(invalid_param("threads must be >= 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplesToTarget {
    pub family: Family,
    pub capacity: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub snr_db: f64,
    pub detector: DetectorKind,
    /// Smallest `M` in the grid with `p_err <= target`.
    #[serde(rename = "M")]
    pub m: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyComparison {
    pub reports: Vec<ExperimentReport>,
    pub target: f64,
    pub table: Vec<SamplesToTarget>,
}

impl FamilyComparison {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.reports {
            for row in &r.rows {
                let _ = writeln!(s, "{}", row.csv_line());
            }
        }
        s
    }

    pub fn samples_to_target(&self, family: Family, k: usize, snr_db: f64, detector: DetectorKind) -> Option<usize> {
        self.table
            .iter()
            .find(|t| t.family == family && t.k == k && t.snr_db == snr_db && t.detector == detector)
            .and_then(|t| t.m)
    }
}

/// Runs each configuration and tabulates the samples each family needs to
/// reach `target` error probability.
pub fn compare_families(configs: &[ExperimentConfig], target: f64) -> Result<FamilyComparison> {
    if configs.len() < 2 {
        return Err(invalid_param("comparison needs at least two configurations"));
    }
    let first = &configs[0];
    if configs.iter().any(|c| c.tau != first.tau || c.k_list != first.k_list || c.snr_db_list != first.snr_db_list) {
        return Err(invalid_param("compared configurations must share tau, K_list and snr_db_list"));
    }
    let reports = configs.iter().map(run_experiment).collect::<Result<Vec<_>>>()?;
    let mut table = Vec::new();
    for rep in &reports {
        for &k in &rep.config.k_list {
            for &snr in &rep.config.snr_db_list {
                for kind in rep.config.detector.kinds() {
                    let mut ms: Vec<usize> = rep.config.m_list.clone();
                    ms.sort_unstable();
                    let m = ms.into_iter().find(|&m| rep.row(m, k, snr, kind).is_some_and(|r| r.p_err <= target));
                    table.push(SamplesToTarget {
                        family: rep.config.family,
                        capacity: rep.capacity,
                        k,
                        snr_db: snr,
                        detector: kind,
                        m,
                    });
                }
            }
        }
    }
    Ok(FamilyComparison { reports, target, table })
}
