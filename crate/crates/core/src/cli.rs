//! The `cs-mud` command line.
//!
//! Exit status: 0 on success, 2 on invalid arguments (unknown flags, bad
//! values, missing `--seed` on a randomized path, unreadable inputs,
//! rejected configurations), 1 on runtime failure. JSON goes to stdout,
//! diagnostics to stderr.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{assemble_ensemble, frontend_equivalence_deviation, noise_var_for_snr, MixingMode};
use crate::coherence::{
    average_coherence, shift_dictionary_report, spectral_norm, worst_case_coherence, CoherenceReport,
};
use crate::detectors::{guarantee_check_coherent, guarantee_check_noncoherent, GuaranteeInputs, GuaranteeVerdict};
use crate::error::Error;
use crate::linalg::C64;
use crate::montecarlo::{run_experiment, run_experiment_with_threads, ExperimentConfig};
use crate::waveforms::{build_shift_dictionary, Codebook, Family, ShiftDictionary};

#[derive(Parser, Debug)]
#[command(
    name = "cs-mud",
    version,
    about = "Compressive multi-user detection: codebooks, coherence, guarantees and error-rate simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a signature codebook and write it as JSON (.json) or binary (any other extension).
    GenCodebook(GenCodebookArgs),
    /// Print the coherence report of a codebook's unit-column dictionary.
    Coherence(CoherenceArgs),
    /// Evaluate the recovery-guarantee conditions for a codebook.
    CheckGuarantee(CheckGuaranteeArgs),
    /// Compare the matched-filter front end with the discrete model H A.
    FrontendEquiv(FrontendEquivArgs),
    /// Run a Monte Carlo experiment described by a JSON configuration.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct GenCodebookArgs {
    /// Codebook family.
    #[arg(long, value_parser = parse_family)]
    family: Family,
    /// Sequence length P in chips (count); for kerdock the code length 2^m.
    #[arg(long)]
    p: usize,
    /// Maximum user delay tau in chips (count).
    #[arg(long)]
    tau: usize,
    /// Output file path.
    #[arg(long)]
    out: PathBuf,
    /// RNG seed (integer); required for random families.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct CoherenceArgs {
    /// Codebook file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Number of partial-DFT measurements M (count); omit for no subsampling.
    #[arg(long)]
    subsample: Option<usize>,
    /// RNG seed (integer) for the row subset; required with --subsample.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of users N (count); defaults to every sequence in the codebook.
    #[arg(long)]
    n_users: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DetectorArg {
    Coherent,
    Noncoherent,
}

#[derive(Args, Debug)]
struct CheckGuaranteeArgs {
    /// Codebook file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Number of measurements M (count).
    #[arg(long)]
    m: usize,
    /// Number of active users K (count), all with unit gain.
    #[arg(long)]
    k: usize,
    /// Signal-to-noise ratio ||r||^2 / E||w||^2 in dB.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: f64,
    /// Detector whose guarantee is checked.
    #[arg(long, value_enum)]
    detector: DetectorArg,
    /// RNG seed (integer) for the row subset; required when M is below the sequence length.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of users N (count); defaults to every sequence in the codebook.
    #[arg(long)]
    n_users: Option<usize>,
}

#[derive(Args, Debug)]
struct FrontendEquivArgs {
    /// Sequence length P in chips (count).
    #[arg(long)]
    p: usize,
    /// Maximum user delay tau in chips (count).
    #[arg(long)]
    tau: usize,
    /// Number of matched filters M (count).
    #[arg(long)]
    m: usize,
    /// RNG seed (integer).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (count); the report does not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// CSV output path; overrides output_path in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    s.parse::<Family>().map_err(|_| "expected one of alltop-gabor, random-gabor, kerdock, random-block".to_string())
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_)
            | Error::InvalidInput(_)
            | Error::UndefinedInput(_)
            | Error::ConfigRejected { .. } => 2,
            _ => 1,
        };
        Self { code, message: e.to_string() }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn require_seed(seed: Option<u64>, why: &str) -> std::result::Result<u64, Failure> {
    seed.ok_or_else(|| Failure::usage(format!("--seed is required {why}")))
}

fn print_json<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult {
    let s = serde_json::to_string_pretty(value).map_err(|e| Failure { code: 1, message: e.to_string() })?;
    writeln!(out, "{s}").map_err(|e| Failure { code: 1, message: e.to_string() })
}

fn load_codebook(path: &Path) -> std::result::Result<Codebook, Failure> {
    Codebook::load(path).map_err(|e| Failure::usage(format!("cannot read codebook {}: {e}", path.display())))
}

fn dictionary(cb: &Codebook, n_users: Option<usize>) -> std::result::Result<ShiftDictionary, Failure> {
    Ok(build_shift_dictionary(cb, cb.tau, n_users.unwrap_or(cb.n_sequences()))?)
}

/// Unit-column `X` for `M` rows: the full dictionary when `M` is the
/// sequence length, otherwise a seeded partial DFT.
fn measurement_matrix(
    dict: &ShiftDictionary,
    m: usize,
    seed: Option<u64>,
) -> std::result::Result<crate::linalg::CMatrix, Failure> {
    let p = dict.seq_len();
    if m == 0 || m > p {
        return Err(Failure::usage(format!("M = {m} must lie in [1, {p}]")));
    }
    if m == p {
        return Ok(dict.normalized());
    }
    let seed = require_seed(seed, "when M is below the sequence length")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(assemble_ensemble(dict, m, &mut rng, MixingMode::PartialDft)?.x)
}

fn gen_codebook(a: GenCodebookArgs, out: &mut dyn Write) -> CliResult {
    let cb = if a.family.is_random() {
        let seed = require_seed(a.seed, &format!("for family {}", a.family))?;
        Codebook::generate(a.family, a.p, a.tau, &mut ChaCha8Rng::seed_from_u64(seed))?
    } else {
        Codebook::generate(a.family, a.p, a.tau, &mut ChaCha8Rng::seed_from_u64(0))?
    };
    cb.save(&a.out)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        family: Family,
        #[serde(rename = "P")]
        p: usize,
        tau: usize,
        #[serde(rename = "N")]
        n: usize,
        path: &'a Path,
    }
    print_json(out, &Summary { family: cb.family, p: cb.seq_len(), tau: cb.tau, n: cb.n_sequences(), path: &a.out })
}

fn coherence(a: CoherenceArgs, out: &mut dyn Write) -> CliResult {
    let cb = load_codebook(&a.input)?;
    let dict = dictionary(&cb, a.n_users)?;
    let report = match a.subsample {
        None => shift_dictionary_report(&dict)?,
        Some(m) => {
            if m == 0 || m > dict.seq_len() {
                return Err(Failure::usage(format!("--subsample must lie in [1, {}]", dict.seq_len())));
            }
            let seed = require_seed(a.seed, "with --subsample")?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ens = assemble_ensemble(&dict, m, &mut rng, MixingMode::PartialDft)?;
            let x = ens.x;
            CoherenceReport::from_metrics(
                worst_case_coherence(&x)?,
                average_coherence(&x)?,
                spectral_norm(&x),
                x.rows(),
                x.cols(),
            )
        }
    };
    print_json(out, &report)
}

fn check_guarantee(a: CheckGuaranteeArgs, out: &mut dyn Write) -> CliResult {
    let cb = load_codebook(&a.input)?;
    let dict = dictionary(&cb, a.n_users)?;
    if a.k == 0 || a.k > dict.n_users {
        return Err(Failure::usage(format!("--k must lie in [1, {}]", dict.n_users)));
    }
    let x = measurement_matrix(&dict, a.m, a.seed)?;
    let (mu, nu) = if x.cols() >= 2 { (worst_case_coherence(&x)?, average_coherence(&x)?) } else { (0.0, 0.0) };
    let norm = spectral_norm(&x);
    let profile = vec![C64::new(1.0, 0.0); a.k];
    let noise_var = noise_var_for_snr(&profile, a.m, a.snr_db);
    let inputs = GuaranteeInputs { mu, nu: Some(nu), m: a.m, n_tau: x.cols(), power_profile: &profile, noise_var };
    let verdict = match a.detector {
        DetectorArg::Coherent => guarantee_check_coherent(&inputs)?,
        DetectorArg::Noncoherent => guarantee_check_noncoherent(&inputs, norm)?,
    };
    #[derive(Serialize)]
    struct Output {
        #[serde(flatten)]
        verdict: GuaranteeVerdict,
        mu: f64,
        nu: f64,
        spectral_norm: f64,
        #[serde(rename = "M")]
        m: usize,
        #[serde(rename = "K")]
        k: usize,
        n_tau: usize,
        noise_var: f64,
    }
    print_json(out, &Output { verdict, mu, nu, spectral_norm: norm, m: a.m, k: a.k, n_tau: x.cols(), noise_var })
}

fn frontend_equiv(a: FrontendEquivArgs, out: &mut dyn Write) -> CliResult {
    let seed = require_seed(a.seed, "for the random filters and codebook")?;
    let dev = frontend_equivalence_deviation(a.p, a.tau, a.m, &mut ChaCha8Rng::seed_from_u64(seed))?;
    #[derive(Serialize)]
    struct Output {
        #[serde(rename = "P")]
        p: usize,
        tau: usize,
        #[serde(rename = "M")]
        m: usize,
        seed: u64,
        max_deviation: f64,
    }
    print_json(out, &Output { p: a.p, tau: a.tau, m: a.m, seed, max_deviation: dev })
}

fn simulate(a: SimulateArgs, out: &mut dyn Write) -> CliResult {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| Failure::usage(format!("cannot read --config {}: {e}", a.config.display())))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("invalid --config {}: {e}", a.config.display())))?;
    let path = a
        .out
        .or_else(|| cfg.output_path.clone())
        .ok_or_else(|| Failure::usage("no output path: set output_path in the config or pass --out"))?;
    let report = match a.threads {
        Some(0) => return Err(Failure::usage("--threads must be >= 1")),
        Some(t) => run_experiment_with_threads(&cfg, t)?,
        None => run_experiment(&cfg)?,
    };
    let sidecar = report.write(&path)?;
    #[derive(Serialize)]
    struct Output<'a> {
        csv: &'a Path,
        sidecar: &'a Path,
        rows: usize,
    }
    print_json(out, &Output { csv: &path, sidecar: &sidecar, rows: report.rows.len() })
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit status.
pub fn dispatch(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
            };
        }
    };
    let result = match cli.command {
        Command::GenCodebook(a) => gen_codebook(a, out),
        Command::Coherence(a) => coherence(a, out),
        Command::CheckGuarantee(a) => check_guarantee(a, out),
        Command::FrontendEquiv(a) => frontend_equiv(a, out),
        Command::Simulate(a) => simulate(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let argv: Vec<String> = std::iter::once("cs-mud").chain(args.iter().copied()).map(String::from).collect();
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = dispatch(&argv, &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, _, err) = run(&["frontend-equiv", "--p", "8", "--bogus", "1"]);
        assert_eq!(code, 2);
        assert!(err.contains("--bogus"));
    }

    #[test]
    fn missing_seed_names_the_flag() {
        let (code, _, err) = run(&["frontend-equiv", "--p", "8", "--tau", "3", "--m", "4"]);
        assert_eq!(code, 2);
        assert!(err.contains("--seed"));
    }

    #[test]
    fn frontend_equiv_prints_small_deviation() {
        let (code, out, _) = run(&["frontend-equiv", "--p", "8", "--tau", "3", "--m", "4", "--seed", "1"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(v["max_deviation"].as_f64().unwrap() <= 1e-12);
    }

    #[test]
    fn missing_config_is_usage_error() {
        let (code, _, _) = run(&["simulate", "--config", "/nonexistent/missing.json"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn help_lists_units() {
        for sub in ["gen-codebook", "coherence", "check-guarantee", "frontend-equiv", "simulate"] {
            let (code, out, _) = run(&[sub, "--help"]);
            assert_eq!(code, 0);
            assert!(out.contains("(count)"), "{sub}");
        }
        let (_, out, _) = run(&["check-guarantee", "--help"]);
        assert!(out.contains("dB"));
    }
}
