//! The `pulseflip` command-line interface.
//!
//! Summaries go to standard output; report data only ever goes to files,
//! written atomically so a nonzero exit never leaves a partial report.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::config::{BackendConfig, ConfigError};
use crate::float32_bits::{encode_f32, BitIndex, Float32Word};
use crate::harness::{self, EccScheme, HarnessError};
use crate::pulse_model::{perturb_parameter, render_drag, FlipTarget, Gate, PulseError};
use crate::quantum_sim::{ShotMode, SimError};
use crate::report::{
    pulse_chart_svg, write_atomic, write_report, ReportData, ReportError, ReportFormat,
};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_INVALID_COMBO: u8 = 4;
pub const EXIT_IO: u8 = 5;

const EXIT_HELP: &str = "Exit codes:
  0  success (report fully written)
  2  usage error
  3  configuration error
  4  invalid gate/target combination
  5  I/O failure writing a report";

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    InvalidCombo(String),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::InvalidCombo(_) => EXIT_INVALID_COMBO,
            CliError::Report(_) => EXIT_IO,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::InvalidTarget { .. } => CliError::InvalidCombo(e.to_string()),
            HarnessError::Config(c) => CliError::Config(c),
            HarnessError::Sim(SimError::Calibration(c)) => CliError::Config(c),
            HarnessError::ZeroRuns => CliError::Usage(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<PulseError> for CliError {
    fn from(e: PulseError) -> Self {
        match e {
            PulseError::ImagUnused { .. } => CliError::InvalidCombo(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}

/// Single-bit-flip fault injection for quantum gate pulse parameters.
#[derive(Parser)]
#[command(name = "pulseflip", version, after_help = EXIT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Flip each of the 32 bits of a stored parameter and report the
    /// per-bit TVD increase
    Sweep(SweepArgs),
    /// Monte-Carlo random single-bit flips, before and after the 3-bit
    /// repetition code
    Mc(McArgs),
    /// Per-bit ECC effectiveness evaluation (rep3 or hamming5)
    Ecc(EccArgs),
    /// Render the pulse envelope as SVG, optionally with one bit flipped
    Render(RenderArgs),
    /// Print the IEEE 754 bit layout of a value
    InspectFloat(InspectFloatArgs),
}

#[derive(Args)]
struct IoArgs {
    /// Backend calibration file (TOML)
    #[arg(long, value_name = "PATH")]
    backend: PathBuf,
    /// Report output path
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Report file format
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Shots per measured distribution, or "exact" for the analytic
    /// distribution
    #[arg(long, value_parser = parse_shots, default_value = "1024")]
    shots: ShotMode,
    /// Master seed; identical seeds give byte-identical reports
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Worker threads; 0 selects the available parallelism. Results do not
    /// depend on this value.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

impl IoArgs {
    fn workers(&self) -> usize {
        if self.workers == 0 {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        } else {
            self.workers
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Gate name: x, sx, h, cnot, or rx(<angle>) with angle in radians
    /// (also accepts pi and pi/<n>)
    #[arg(long, value_parser = parse_gate)]
    gate: Gate,
    /// Stored parameter to flip
    #[arg(long, value_enum, default_value_t = TargetArg::Real)]
    target: TargetArg,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Gate name: x, sx, h, cnot, or rx(<angle>)
    #[arg(long, value_parser = parse_gate)]
    gate: Gate,
    /// Number of random flips to draw
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    runs: u32,
}

#[derive(Args)]
struct EccArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Gate name: x, sx, h, cnot, or rx(<angle>)
    #[arg(long, value_parser = parse_gate)]
    gate: Gate,
    /// Error-correcting scheme
    #[arg(long, value_enum)]
    scheme: SchemeArg,
}

#[derive(Args)]
struct RenderArgs {
    /// Backend calibration file (TOML)
    #[arg(long, value_name = "PATH")]
    backend: PathBuf,
    /// Gate whose pulse to render
    #[arg(long, value_parser = parse_gate)]
    gate: Gate,
    /// Bit index to flip (0-31); omit for the nominal pulse only
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=31))]
    flip: Option<u8>,
    /// Stored parameter the flip targets
    #[arg(long, value_enum, default_value_t = TargetArg::Real)]
    target: TargetArg,
    /// SVG output path
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Args)]
struct InspectFloatArgs {
    /// Value to inspect (finite decimal, stored as single precision)
    #[arg(value_parser = parse_finite, allow_negative_numbers = true)]
    value: f64,
    /// Also show the value with this bit flipped (0-31)
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=31))]
    flip: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TargetArg {
    Real,
    Imag,
    Phase,
}

impl From<TargetArg> for FlipTarget {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Real => FlipTarget::AmpReal,
            TargetArg::Imag => FlipTarget::AmpImag,
            TargetArg::Phase => FlipTarget::Phase,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Rep3,
    Hamming5,
}

impl From<SchemeArg> for EccScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Rep3 => EccScheme::Rep3,
            SchemeArg::Hamming5 => EccScheme::Hamming5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Svg,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Svg => ReportFormat::Svg,
        }
    }
}

fn parse_gate(s: &str) -> Result<Gate, String> {
    s.parse().map_err(|e: crate::pulse_model::ParseGateError| e.to_string())
}

fn parse_shots(s: &str) -> Result<ShotMode, String> {
    if s.eq_ignore_ascii_case("exact") {
        return Ok(ShotMode::Exact);
    }
    match s.parse::<u64>() {
        Ok(n) if n >= 1 => Ok(ShotMode::Sampled(n)),
        _ => Err(format!("expected a positive shot count or \"exact\", got {s:?}")),
    }
}

fn parse_finite(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .parse()
        .map_err(|e| format!("cannot parse {s:?} as a number: {e}"))?;
    if !v.is_finite() {
        return Err(format!("value must be finite, got {v}"));
    }
    Ok(v)
}

pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Sweep(args) => cmd_sweep(args),
        Command::Mc(args) => cmd_mc(args),
        Command::Ecc(args) => cmd_ecc(args),
        Command::Render(args) => cmd_render(args),
        Command::InspectFloat(args) => cmd_inspect_float(args),
    }
}

fn join_indices(indices: &[u8]) -> String {
    if indices.is_empty() {
        return "none".into();
    }
    indices
        .iter()
        .map(u8::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let backend = BackendConfig::load(&args.io.backend)?;
    let result = harness::sweep_bits(
        &backend,
        &args.gate,
        args.target.into(),
        args.io.shots,
        args.io.seed,
        args.io.workers(),
    )?;
    write_report(ReportData::Sweep(&result), args.io.format.into(), &args.io.out)?;
    let max = result.max_entry();
    println!("backend: {}", result.backend);
    println!(
        "gate: {}  target: {}  shots: {}  seed: {}",
        result.gate, result.target, result.shots, result.seed
    );
    println!("original vs ideal: {:.3}%", result.original_vs_ideal_pct);
    println!(
        "max tvd increase: {:.3}% at bit {}",
        max.tvd_increase_pct, max.bit_index
    );
    println!(
        "invalid bits (interpolated): {}",
        join_indices(&result.interpolated_indices())
    );
    println!("report: {}", args.io.out.display());
    Ok(())
}

fn cmd_mc(args: McArgs) -> Result<(), CliError> {
    let backend = BackendConfig::load(&args.io.backend)?;
    let result = harness::monte_carlo(
        &backend,
        &args.gate,
        args.runs,
        args.io.shots,
        args.io.seed,
        args.io.workers(),
    )?;
    write_report(
        ReportData::MonteCarlo(&result),
        args.io.format.into(),
        &args.io.out,
    )?;
    let mean = |f: fn(&harness::MonteCarloSample) -> f64| {
        result.samples.iter().map(f).sum::<f64>() / result.samples.len() as f64
    };
    let redraws: u32 = result.samples.iter().map(|s| s.redraws).sum();
    println!("backend: {}", result.backend);
    println!(
        "gate: {}  runs: {}  shots: {}  seed: {}",
        result.gate, result.runs, result.shots, result.seed
    );
    println!(
        "pre-ecc: max {:.3}%  mean {:.3}%",
        result.max_pre(),
        mean(|s| s.pre_ecc_pct)
    );
    println!(
        "post-ecc (rep3): max {:.3}%  mean {:.3}%",
        result.max_post(),
        mean(|s| s.post_ecc_pct)
    );
    println!("halted draws redrawn: {redraws}");
    println!("report: {}", args.io.out.display());
    Ok(())
}

fn cmd_ecc(args: EccArgs) -> Result<(), CliError> {
    let backend = BackendConfig::load(&args.io.backend)?;
    let result = harness::ecc_eval(
        &backend,
        &args.gate,
        args.scheme.into(),
        args.io.shots,
        args.io.seed,
        args.io.workers(),
    )?;
    write_report(ReportData::Ecc(&result), args.io.format.into(), &args.io.out)?;
    let max = result.max_entry();
    println!("backend: {}", result.backend);
    println!(
        "gate: {}  scheme: {}  shots: {}  seed: {}",
        result.gate, result.scheme, result.shots, result.seed
    );
    println!("nominal overhead: {:.3}%", result.nominal_overhead_pct);
    println!(
        "max post-correction increase: {:.3}% at bit {}",
        max.tvd_increase_pct, max.bit_index
    );
    println!("report: {}", args.io.out.display());
    Ok(())
}

fn cmd_render(args: RenderArgs) -> Result<(), CliError> {
    let backend = BackendConfig::load(&args.backend)?;
    let nominal = backend.calibration_for(&args.gate)?;
    let nominal_samples = render_drag(&nominal.envelope());
    let flipped = match args.flip {
        Some(i) => {
            let index = BitIndex::new(i).expect("clap range keeps the index below 32");
            let cal = perturb_parameter(&nominal, args.target.into(), index)?;
            Some((render_drag(&cal.envelope()), cal, i))
        }
        None => None,
    };
    let title = format!("{} pulse - {}", args.gate, backend.name());
    let svg = pulse_chart_svg(
        &title,
        &nominal_samples,
        flipped.as_ref().map(|(samples, _, i)| (samples.as_slice(), *i)),
    );
    write_atomic(&args.out, &svg)?;
    let peak_i = |samples: &[num_complex::Complex64]| {
        samples.iter().map(|s| s.re.abs()).fold(0.0f64, f64::max)
    };
    println!("gate: {}  backend: {}", args.gate, backend.name());
    println!("nominal peak |I|: {:e}", peak_i(&nominal_samples));
    if let Some((samples, cal, i)) = &flipped {
        let peak = peak_i(samples);
        println!(
            "flipped bit {i} ({} target) peak |I|: {:e} (ratio {:e})",
            args.target.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default(),
            peak,
            peak / peak_i(&nominal_samples)
        );
        let validity = crate::pulse_model::check_validity(&cal.envelope());
        if !validity.valid {
            println!(
                "note: flipped pulse exceeds the amplitude norm (peak {:.6}); the controller would halt it",
                validity.max_norm
            );
        }
    }
    println!("report: {}", args.out.display());
    Ok(())
}

fn describe_exponent(word: Float32Word) -> String {
    match word.exponent_field() {
        0 => "raw 0: zero/subnormal".to_string(),
        255 => "raw 255: infinity/NaN".to_string(),
        raw => format!("raw {raw}, unbiased {}", raw as i32 - 127),
    }
}

fn print_word(word: Float32Word) {
    let value = word.to_f32();
    println!("value (stored f32): {value} ({value:e})");
    println!("pattern:  {word}");
    println!(
        "  sign:     {} ({})",
        word.sign_bit() as u8,
        if word.sign_bit() { "negative" } else { "positive" }
    );
    println!(
        "  exponent: {:08b} ({})",
        word.exponent_field(),
        describe_exponent(word)
    );
    println!("  mantissa: {:023b}", word.mantissa_field());
}

fn cmd_inspect_float(args: InspectFloatArgs) -> Result<(), CliError> {
    let word = encode_f32(args.value);
    print_word(word);
    if let Some(i) = args.flip {
        let index = BitIndex::new(i).expect("clap range keeps the index below 32");
        let flipped = word.flip(index);
        println!("flip bit {i} ({}):", index.class());
        print_word(flipped);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_declaration_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn gate_parsing_accepts_all_forms() {
        assert_eq!(parse_gate("x").unwrap(), Gate::X);
        assert_eq!(parse_gate("SX").unwrap(), Gate::Sx);
        assert_eq!(parse_gate("cnot").unwrap(), Gate::Cnot);
        let rx = parse_gate("rx(pi/3)").unwrap();
        assert_eq!(rx, Gate::Rx(std::f64::consts::PI / 3.0));
        assert_eq!(parse_gate("rx(1.5)").unwrap(), Gate::Rx(1.5));
        assert!(parse_gate("y").is_err());
        assert!(parse_gate("rx(0)").is_err());
        assert!(parse_gate("rx(nope)").is_err());
    }

    #[test]
    fn shots_parsing() {
        assert_eq!(parse_shots("exact").unwrap(), ShotMode::Exact);
        assert_eq!(parse_shots("1024").unwrap(), ShotMode::Sampled(1024));
        assert!(parse_shots("0").is_err());
        assert!(parse_shots("-3").is_err());
    }

    #[test]
    fn finite_parsing_rejects_non_finite() {
        assert_eq!(parse_finite("-248.75").unwrap(), -248.75);
        assert!(parse_finite("inf").is_err());
        assert!(parse_finite("nan").is_err());
        assert!(parse_finite("abc").is_err());
    }
}
