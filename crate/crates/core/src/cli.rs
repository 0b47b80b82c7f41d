//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::NttParams;
use crate::scheduler::{
    simulate_polymul, simulate_transform, validate_trace, write_trace, Calibration, SimConfig,
    SimRun,
};
use crate::transform::{Direction, Ntt, Polynomial};

/// Exit code for invalid configuration, unreadable input, or I/O failure.
pub const EXIT_CONFIG: u8 = 2;
/// Exit code when `verify` finds a mismatch.
pub const EXIT_MISMATCH: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "gdntt", version, about = "Near-memory NTT accelerator simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Forward NTT of a coefficient file.
    Ntt(CliArgs),
    /// Inverse NTT of a coefficient file.
    Intt(CliArgs),
    /// Cyclic product of two coefficient files.
    Polymul(CliArgs),
    /// Cycle-accurate run of one transform (or a product with --input-b).
    Simulate(CliArgs),
    /// Simulated forward transforms over a comma-separated list of sizes.
    Sweep(CliArgs),
    /// Seeded cross-check of transforms and simulator against the oracles.
    Verify(CliArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CliArgs {
    /// Transform size; `sweep` and `verify` accept a comma-separated list.
    #[arg(long = "n", default_value = "256")]
    pub n: String,
    #[arg(long, default_value_t = 12289)]
    pub q: u64,
    #[arg(long, default_value_t = 14)]
    pub bitwidth: u32,
    /// Clock in MHz. Defaults to 176/163/148 for n = 256/512/1024.
    #[arg(long)]
    pub freq_mhz: Option<f64>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub input_b: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Stage-cost calibration file (JSON).
    #[arg(long)]
    pub calib: Option<PathBuf>,
    /// Simulate the inverse transform.
    #[arg(long)]
    pub inverse: bool,
    /// Random cases per size for `verify`.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Ntt,
    Intt,
    Polymul,
    Simulate,
    Sweep,
    Verify,
}

/// A parsed and validated invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    /// One parameter set per requested size.
    pub params: Vec<NttParams>,
    /// Clock per size; `None` only where timing is not reported.
    pub freq_mhz: Vec<Option<f64>>,
    pub input: Option<PathBuf>,
    pub input_b: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub stats: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub seed: u64,
    pub trials: usize,
    pub inverse: bool,
    pub calibration: Calibration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Mismatch,
}

/// Clock of the published operating point for `n`, if there is one.
pub fn default_freq_mhz(n: usize) -> Option<f64> {
    match n {
        256 => Some(176.0),
        512 => Some(163.0),
        1024 => Some(148.0),
        _ => None,
    }
}

fn parse_sizes(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("invalid size {t:?}")))
        })
        .collect()
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let (command, args) = match cli.command {
            CliCommand::Ntt(a) => (Command::Ntt, a),
            CliCommand::Intt(a) => (Command::Intt, a),
            CliCommand::Polymul(a) => (Command::Polymul, a),
            CliCommand::Simulate(a) => (Command::Simulate, a),
            CliCommand::Sweep(a) => (Command::Sweep, a),
            CliCommand::Verify(a) => (Command::Verify, a),
        };
        Self::from_args(command, args)
    }

    pub fn from_args(command: Command, args: CliArgs) -> Result<Self> {
        let sizes = parse_sizes(&args.n)?;
        if sizes.len() != 1 && !matches!(command, Command::Sweep | Command::Verify) {
            return Err(Error::Config("only sweep and verify take several sizes".into()));
        }
        let params = sizes
            .iter()
            .map(|&n| NttParams::derive(n, args.q, args.bitwidth))
            .collect::<Result<Vec<_>>>()?;
        let timed = matches!(command, Command::Simulate | Command::Sweep);
        let freq_mhz = sizes
            .iter()
            .map(|&n| match args.freq_mhz.or_else(|| default_freq_mhz(n)) {
                Some(f) if !(f > 0.0 && f.is_finite()) => Err(Error::ZeroFrequency(f)),
                None if timed => Err(Error::Config(format!(
                    "no default clock for n = {n}; pass --freq-mhz"
                ))),
                f => Ok(f),
            })
            .collect::<Result<Vec<_>>>()?;
        let calibration = match &args.calib {
            Some(path) => Calibration::load(path)?,
            None => Calibration::default(),
        };
        let needs = |flag: &Option<PathBuf>, name: &str| {
            if flag.is_none() {
                Err(Error::Config(format!("{name} is required")))
            } else {
                Ok(())
            }
        };
        match command {
            Command::Ntt | Command::Intt => needs(&args.input, "--input")?,
            Command::Polymul => {
                needs(&args.input, "--input")?;
                needs(&args.input_b, "--input-b")?;
            }
            _ => {}
        }
        if command == Command::Verify && args.trials == 0 {
            return Err(Error::Config("--trials must be positive".into()));
        }
        Ok(Self {
            command,
            params,
            freq_mhz,
            input: args.input,
            input_b: args.input_b,
            output: args.output,
            stats: args.stats,
            trace: args.trace,
            seed: args.seed,
            trials: args.trials,
            inverse: args.inverse,
            calibration,
        })
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Parses whitespace-separated decimal coefficients. `origin` names the
/// source in error messages.
pub fn parse_coefficients(text: &str, params: &NttParams, origin: &str) -> Result<Polynomial> {
    let coeffs = text
        .split_whitespace()
        .map(|t| {
            t.parse::<u64>().map_err(|_| Error::Parse {
                path: origin.to_string(),
                message: format!("not a non-negative integer: {t:?}"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Polynomial::new(coeffs, params)
}

pub fn read_coefficients(path: &Path, params: &NttParams) -> Result<Polynomial> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    parse_coefficients(&text, params, &path.display().to_string())
}

pub fn format_coefficients(p: &Polynomial) -> String {
    let mut s = p
        .coeffs()
        .iter()
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(" ");
    s.push('\n');
    s
}

pub fn write_coefficients(path: &Path, p: &Polynomial) -> Result<()> {
    std::fs::write(path, format_coefficients(p)).map_err(|e| io_error(path, e))
}

/// Seeded uniform polynomial.
pub fn random_polynomial(rng: &mut ChaCha8Rng, params: &NttParams) -> Polynomial {
    let coeffs = (0..params.n()).map(|_| rng.gen_range(0..params.q())).collect();
    Polynomial::new(coeffs, params).expect("sampled in range")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| io_error(path, e))
}

fn stdout_error(e: std::io::Error) -> Error {
    io_error(Path::new("<stdout>"), e)
}

/// Executes a validated configuration. Results go to the requested files or
/// to `out`. Files are only written once every computation has succeeded.
pub fn run_command(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    match cfg.command {
        Command::Ntt | Command::Intt | Command::Polymul => run_library(cfg, out),
        Command::Simulate => run_simulate(cfg, out),
        Command::Sweep => run_sweep(cfg, out),
        Command::Verify => run_verify(cfg, out),
    }
}

fn emit_polynomial(cfg: &RunConfig, p: &Polynomial, out: &mut dyn Write) -> Result<()> {
    match &cfg.output {
        Some(path) => write_coefficients(path, p),
        None => out
            .write_all(format_coefficients(p).as_bytes())
            .map_err(stdout_error),
    }
}

fn run_library(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let params = &cfg.params[0];
    let ntt = Ntt::new(params.clone());
    let a = read_coefficients(cfg.input.as_deref().expect("validated"), params)?;
    let result = match cfg.command {
        Command::Ntt => ntt.ntt_ct(&a)?,
        Command::Intt => ntt.intt_gs(&a)?,
        _ => {
            let b = read_coefficients(cfg.input_b.as_deref().expect("validated"), params)?;
            ntt.polymul_cyclic(&a, &b)?
        }
    };
    emit_polynomial(cfg, &result, out)?;
    Ok(Outcome::Success)
}

fn input_or_random(path: Option<&Path>, rng: &mut ChaCha8Rng, params: &NttParams) -> Result<Polynomial> {
    match path {
        Some(p) => read_coefficients(p, params),
        None => Ok(random_polynomial(rng, params)),
    }
}

fn run_simulate(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let params = &cfg.params[0];
    let ntt = Ntt::new(params.clone());
    let sim = SimConfig {
        calibration: cfg.calibration.clone(),
        freq_mhz: cfg.freq_mhz[0].expect("validated"),
        trace: cfg.trace.is_some(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = input_or_random(cfg.input.as_deref(), &mut rng, params)?;
    let run = if cfg.input_b.is_some() {
        let b = input_or_random(cfg.input_b.as_deref(), &mut rng, params)?;
        simulate_polymul(&ntt, &a, &b, &sim)?
    } else {
        let dir = if cfg.inverse {
            Direction::Inverse
        } else {
            Direction::Forward
        };
        simulate_transform(&ntt, &a, dir, &sim)?
    };

    let mut trace_bytes = Vec::new();
    if let Some(events) = &run.trace {
        validate_trace(events)?;
        write_trace(&mut trace_bytes, events).map_err(stdout_error)?;
    }
    let stats_json = run.report.to_json() + "\n";
    if let Some(path) = &cfg.output {
        write_coefficients(path, &run.output)?;
    }
    if let Some(path) = &cfg.trace {
        write_file(path, &trace_bytes)?;
    }
    match &cfg.stats {
        Some(path) => write_file(path, stats_json.as_bytes())?,
        None => out.write_all(stats_json.as_bytes()).map_err(stdout_error)?,
    }
    Ok(Outcome::Success)
}

fn run_sweep(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let mut records = String::new();
    for (params, freq) in cfg.params.iter().zip(&cfg.freq_mhz) {
        let ntt = Ntt::new(params.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let p = random_polynomial(&mut rng, params);
        let sim = SimConfig {
            calibration: cfg.calibration.clone(),
            freq_mhz: freq.expect("validated"),
            trace: false,
        };
        let run = simulate_transform(&ntt, &p, Direction::Forward, &sim)?;
        records.push_str(&run.report.to_json());
        records.push('\n');
    }
    match &cfg.stats {
        Some(path) => write_file(path, records.as_bytes())?,
        None => out.write_all(records.as_bytes()).map_err(stdout_error)?,
    }
    Ok(Outcome::Success)
}

struct Tally {
    name: &'static str,
    passed: usize,
    total: usize,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            passed: 0,
            total: 0,
        }
    }

    fn check(&mut self, ok: bool) {
        self.total += 1;
        self.passed += ok as usize;
    }
}

fn run_verify(cfg: &RunConfig, out: &mut dyn Write) -> Result<Outcome> {
    let mut report = String::new();
    let mut all_ok = true;
    for (params, freq) in cfg.params.iter().zip(&cfg.freq_mhz) {
        let ntt = Ntt::new(params.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let sim = SimConfig {
            calibration: cfg.calibration.clone(),
            freq_mhz: freq.unwrap_or(100.0),
            trace: false,
        };
        let mut tallies = [
            Tally::new("ntt_ct vs dft_reference"),
            Tally::new("intt_gs vs dft_reference"),
            Tally::new("intt_gs(ntt_ct(p)) == p"),
            Tally::new("polymul_cyclic vs schoolbook"),
            Tally::new("simulated ntt vs ntt_ct"),
            Tally::new("simulated intt vs intt_gs"),
            Tally::new("simulated polymul vs polymul_cyclic"),
        ];
        for _ in 0..cfg.trials {
            let a = random_polynomial(&mut rng, params);
            let b = random_polynomial(&mut rng, params);
            let fwd = ntt.ntt_ct(&a)?;
            let inv = ntt.intt_gs(&a)?;
            let prod = ntt.polymul_cyclic(&a, &b)?;
            tallies[0].check(fwd == ntt.dft_reference(&a, Direction::Forward)?);
            tallies[1].check(inv == ntt.dft_reference(&a, Direction::Inverse)?);
            tallies[2].check(ntt.intt_gs(&fwd)? == a);
            tallies[3].check(prod == ntt.schoolbook_cyclic(&a, &b)?);
            let run: SimRun = simulate_transform(&ntt, &a, Direction::Forward, &sim)?;
            tallies[4].check(run.output == fwd);
            let run = simulate_transform(&ntt, &a, Direction::Inverse, &sim)?;
            tallies[5].check(run.output == inv);
            let run = simulate_polymul(&ntt, &a, &b, &sim)?;
            tallies[6].check(run.output == prod);
        }
        report.push_str(&format!(
            "n={} q={} bitwidth={} seed={} trials={}\n",
            params.n(),
            params.q(),
            params.bitwidth(),
            cfg.seed,
            cfg.trials
        ));
        for t in &tallies {
            all_ok &= t.passed == t.total;
            let verdict = if t.passed == t.total { "ok" } else { "MISMATCH" };
            report.push_str(&format!("  {:<38} {}/{} {verdict}\n", t.name, t.passed, t.total));
        }

        let traced = SimConfig {
            trace: true,
            ..sim.clone()
        };
        let a = random_polynomial(&mut rng, params);
        let run = simulate_transform(&ntt, &a, Direction::Forward, &traced)?;
        let events = run.trace.as_deref().unwrap_or_default();
        let line = match validate_trace(events) {
            Ok(s) if s.cycles == run.stats.total_cycles => {
                format!("ok ({} events, {} cycles)", s.events, s.cycles)
            }
            Ok(s) => {
                all_ok = false;
                format!("MISMATCH (trace spans {} cycles, ledger {})", s.cycles, run.stats.total_cycles)
            }
            Err(e) => {
                all_ok = false;
                format!("MISMATCH ({e})")
            }
        };
        report.push_str(&format!("  {:<38} {line}\n", "trace replay"));
    }
    report.push_str(if all_ok { "verify: PASS\n" } else { "verify: FAIL\n" });
    out.write_all(report.as_bytes()).map_err(stdout_error)?;
    Ok(if all_ok {
        Outcome::Success
    } else {
        Outcome::Mismatch
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, q: u64, l: u32) -> NttParams {
        NttParams::derive(n, q, l).unwrap()
    }

    #[test]
    fn coefficient_text_examples() {
        let p = params(4, 12289, 14);
        assert_eq!(parse_coefficients("1 2 3 4", &p, "x").unwrap().coeffs(), &[1, 2, 3, 4]);
        assert_eq!(
            parse_coefficients("1\n2\t3  4\n", &p, "x").unwrap().coeffs(),
            &[1, 2, 3, 4]
        );
        assert!(matches!(
            parse_coefficients("1 2 3", &p, "x"),
            Err(Error::LengthMismatch { expected: 4, found: 3 })
        ));
        assert!(matches!(
            parse_coefficients("99999 0 0 0", &p, "x"),
            Err(Error::ValueOutOfRange { value: 99999, .. })
        ));
        assert!(matches!(parse_coefficients("1 2 x 4", &p, "x"), Err(Error::Parse { .. })));
        assert!(matches!(parse_coefficients("1 2 -3 4", &p, "x"), Err(Error::Parse { .. })));
    }

    #[test]
    fn default_clocks() {
        assert_eq!(default_freq_mhz(256), Some(176.0));
        assert_eq!(default_freq_mhz(512), Some(163.0));
        assert_eq!(default_freq_mhz(1024), Some(148.0));
        assert_eq!(default_freq_mhz(16), None);
    }

    fn args(n: &str) -> CliArgs {
        Cli::parse_from(["gdntt", "simulate", "--n", n]).command.into_args()
    }

    impl CliCommand {
        fn into_args(self) -> CliArgs {
            match self {
                CliCommand::Ntt(a)
                | CliCommand::Intt(a)
                | CliCommand::Polymul(a)
                | CliCommand::Simulate(a)
                | CliCommand::Sweep(a)
                | CliCommand::Verify(a) => a,
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::from_args(Command::Simulate, args("256")).is_ok());
        assert!(matches!(
            RunConfig::from_args(Command::Simulate, args("16")),
            Err(Error::Config(_))
        ));
        assert!(RunConfig::from_args(Command::Verify, args("16")).is_ok());
        assert!(matches!(
            RunConfig::from_args(Command::Simulate, args("256,512")),
            Err(Error::Config(_))
        ));
        assert!(RunConfig::from_args(Command::Sweep, args("256,512")).is_ok());
        assert!(matches!(
            RunConfig::from_args(Command::Simulate, args("100")),
            Err(Error::InvalidSize(100))
        ));
        assert!(matches!(
            RunConfig::from_args(Command::Ntt, args("256")),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn verify_is_deterministic() {
        let mut a = args("4,16");
        a.trials = 5;
        let cfg = RunConfig::from_args(Command::Verify, a).unwrap();
        let mut first = Vec::new();
        let mut second = Vec::new();
        assert_eq!(run_command(&cfg, &mut first).unwrap(), Outcome::Success);
        run_command(&cfg, &mut second).unwrap();
        assert_eq!(first, second);
        assert!(String::from_utf8(first).unwrap().ends_with("verify: PASS\n"));
    }
}
