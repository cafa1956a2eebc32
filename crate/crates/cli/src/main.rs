use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cvic::completeness::{
    default_phases, design_matrix, numerical_rank, povm_span_rank, predicted_rank, rank_for_phases, sweep_table,
    MeasurementSpec,
};
use cvic::fock::{coherent_amplitudes, DensityMatrix, FockVector};
use cvic::povm::{default_x_max, BinLayout};
use cvic::tomo::{fidelity, ml_reconstruct, povms_for, simulate_measurement, DEFAULT_DILUTION, DEFAULT_MAX_ITERS};
use cvic::SupportSet;
use num_complex::Complex64;

const EXIT_DISAGREE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "cvic", version, about = "Informational completeness of homodyne and photon-counting measurements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form number of independent elements, m(2d − m) capped at d².
    Predict {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        d: u64,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        m: u64,
    },
    /// Numerical rank over a grid of (d, m); exits 1 if any cell disagrees
    /// with the closed form.
    Table(TableArgs),
    /// Rank report for one support and phase set.
    Rank(RankArgs),
    /// Sample, bin and reconstruct a state by maximum likelihood.
    #[command(alias = "simulate")]
    SimulateReconstruct(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct TableArgs {
    #[arg(long, default_value_t = 2)]
    d_min: usize,
    #[arg(long, default_value_t = 8)]
    d_max: usize,
    #[arg(long, default_value_t = 1)]
    m_min: usize,
    #[arg(long, default_value_t = 6)]
    m_max: usize,
    /// Output file; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the closed-form table (CSV) here.
    #[arg(long)]
    predicted: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct RankArgs {
    /// Fock indices (`0,4,8`) or `d=N` for {0..N−1}.
    #[arg(long, conflicts_with = "d", required_unless_present = "d")]
    support: Option<String>,
    /// Shorthand for `--support d=N`.
    #[arg(long)]
    d: Option<usize>,
    /// Number of default phases.
    #[arg(long, conflicts_with = "phases", required_unless_present = "phases")]
    m: Option<usize>,
    /// Explicit phases in radians, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    phases: Option<Vec<f64>>,
    /// Absolute singular-value cutoff instead of the relative default.
    #[arg(long)]
    tol: Option<f64>,
    /// Use binned POVM elements with this many bins (tails merged into the
    /// outer bins) instead of point functionals.
    #[arg(long)]
    bins: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    /// `coherent:ALPHA`, `fock:N`, `mixed` or `pure:C0,C1,…` (complex
    /// numbers such as `0.6+0.4i`), truncated to `--d` levels.
    #[arg(long, default_value = "coherent:0.6+0.4i")]
    state: String,
    #[arg(long, default_value_t = 3)]
    d: usize,
    /// Number of equispaced phases; defaults to d.
    #[arg(long, conflicts_with = "phases")]
    m: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    phases: Option<Vec<f64>>,
    /// Bins per phase; defaults to 2d − 1.
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_DILUTION)]
    dilution: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Disagree(String),
    Runtime(String),
}

impl From<cvic::Error> for Failure {
    fn from(e: cvic::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Predict { d, m } => {
            println!("{}", predicted_rank(d as usize, m as usize));
            Ok(())
        }
        Command::Table(args) => cmd_table(&args),
        Command::Rank(args) => cmd_rank(&args),
        Command::SimulateReconstruct(args) => cmd_simulate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Disagree(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(EXIT_DISAGREE)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> CmdResult {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Runtime(e.to_string()))
}

fn cmd_table(args: &TableArgs) -> CmdResult {
    if args.d_min == 0 || args.m_min == 0 || args.d_min > args.d_max || args.m_min > args.m_max {
        return Err(Failure::Usage(format!(
            "malformed range: d {}..={}, m {}..={}",
            args.d_min, args.d_max, args.m_min, args.m_max
        )));
    }
    let table = sweep_table(args.d_min..=args.d_max, args.m_min..=args.m_max)?;
    let text = match args.format {
        Format::Csv => table.to_csv(),
        Format::Json => to_json(&table)?,
    };
    emit(&text, args.out.as_deref())?;
    if let Some(path) = &args.predicted {
        emit(&table.predicted_csv(), Some(path))?;
    }
    let ill: Vec<String> = table
        .d_values
        .iter()
        .flat_map(|&d| table.m_values.iter().map(move |&m| (d, m)))
        .filter(|&(d, m)| table.cell(d, m).is_some_and(|c| c.is_ill_conditioned()))
        .map(|(d, m)| format!("d={d} m={m}"))
        .collect();
    if !ill.is_empty() {
        eprintln!("warning: ill-conditioned cells: {}", ill.join(", "));
    }
    let diff = table.disagreements();
    if diff.is_empty() {
        return Ok(());
    }
    let mut msg = String::from("numerical rank disagrees with m(2d − m):\n");
    for x in diff {
        let _ = writeln!(msg, "  d={} m={}: numerical {} predicted {}", x.d, x.m, x.numerical, x.predicted);
    }
    Err(Failure::Disagree(msg.trim_end().to_string()))
}

fn parse_support(text: &str) -> Result<SupportSet, Failure> {
    let text = text.trim();
    if let Some(n) = text.strip_prefix("d=") {
        let d: usize = n.trim().parse().map_err(|_| Failure::Usage(format!("bad dimension in `{text}`")))?;
        return Ok(SupportSet::contiguous(d)?);
    }
    let indices = text
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| Failure::Usage(format!("bad support `{text}`")))?;
    Ok(SupportSet::new(indices)?)
}

fn cmd_rank(args: &RankArgs) -> CmdResult {
    let support = match (&args.support, args.d) {
        (Some(s), _) => parse_support(s)?,
        (None, Some(d)) => SupportSet::contiguous(d)?,
        (None, None) => return Err(Failure::Usage("--support or --d is required".into())),
    };
    let phases = match (&args.phases, args.m) {
        (Some(p), _) => p.clone(),
        (None, Some(0)) => return Err(Failure::Usage("--m must be positive".into())),
        (None, Some(m)) => default_phases(&support, m),
        (None, None) => return Err(Failure::Usage("--m or --phases is required".into())),
    };
    let report = match args.bins {
        None => rank_for_phases(&support, &phases, args.tol)?,
        Some(bins) => {
            let layout = BinLayout::merged(default_x_max(support.max() + 1), bins)?;
            let spec = MeasurementSpec::binned(support.clone(), phases.clone(), layout)?;
            let mut r = numerical_rank(&design_matrix(&spec)?, args.tol)?;
            if support.is_contiguous_from_zero() {
                r.predicted_rank = Some(predicted_rank(support.len(), phases.len()));
            }
            r
        }
    };
    if report.is_ill_conditioned() {
        eprintln!("warning: singular-value gap {:.3e} is small; rank is not well separated", report.gap);
    }
    emit(&to_json(&report)?, None)
}

fn parse_complex(text: &str) -> Result<Complex64, Failure> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Failure::Usage(format!("bad complex number `{text}`"));
    if s.is_empty() {
        return Err(bad());
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad());
    };
    // split at the last sign that is not part of an exponent
    let split = body
        .char_indices()
        .rev()
        .find(|&(k, ch)| (ch == '+' || ch == '-') && k > 0 && !matches!(body.as_bytes()[k - 1], b'e' | b'E'))
        .map(|(k, _)| k);
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        v => v.parse::<f64>().map_err(|_| bad())?,
    };
    let re = re.parse::<f64>().map_err(|_| bad())?;
    Ok(Complex64::new(re, im))
}

fn parse_state(text: &str, d: usize) -> Result<DensityMatrix, Failure> {
    let (kind, arg) = text.split_once(':').unwrap_or((text, ""));
    match kind {
        "mixed" => Ok(DensityMatrix::maximally_mixed(d)?),
        "fock" => {
            let n: usize = arg.parse().map_err(|_| Failure::Usage(format!("bad Fock index in `{text}`")))?;
            if n >= d {
                return Err(Failure::Usage(format!("Fock index {n} needs --d > {n}")));
            }
            Ok(DensityMatrix::from_pure(&FockVector::basis(d, n)?)?)
        }
        "coherent" => {
            let alpha = parse_complex(arg)?;
            let t = coherent_amplitudes(alpha, d);
            Ok(DensityMatrix::from_pure(&t.state.normalized()?)?)
        }
        "pure" => {
            let mut amps = arg.split(',').map(parse_complex).collect::<Result<Vec<_>, _>>()?;
            if amps.len() > d {
                return Err(Failure::Usage(format!("{} amplitudes exceed --d {d}", amps.len())));
            }
            amps.resize(d, Complex64::new(0.0, 0.0));
            Ok(DensityMatrix::from_pure(&FockVector::new(amps)?.normalized()?)?)
        }
        _ => Err(Failure::Usage(format!("unknown state `{text}`"))),
    }
}

#[derive(serde::Serialize)]
struct SimulationReport<'a> {
    fidelity: f64,
    span_rank: usize,
    informationally_complete: bool,
    samples_per_setting: usize,
    seed: u64,
    reconstruction: &'a cvic::tomo::ReconstructionResult,
}

fn cmd_simulate(args: &SimulateArgs) -> CmdResult {
    let d = args.d;
    if d == 0 {
        return Err(Failure::Usage("--d must be positive".into()));
    }
    if args.samples == 0 {
        return Err(Failure::Usage("--samples must be positive".into()));
    }
    let truth = parse_state(&args.state, d)?;
    let phases = match (&args.phases, args.m) {
        (Some(p), _) => p.clone(),
        (None, Some(0)) => return Err(Failure::Usage("--m must be positive".into())),
        (None, m) => {
            let m = m.unwrap_or(d);
            (0..m).map(|j| j as f64 * std::f64::consts::PI / m as f64).collect()
        }
    };
    MeasurementSpec::continuous(SupportSet::contiguous(d)?, phases.clone())?;
    let layout = BinLayout::merged(default_x_max(d), args.bins.unwrap_or(2 * d - 1))?;

    let data = simulate_measurement(&truth, &phases, &layout, args.samples, args.seed)?;
    let povms = povms_for(&data, d)?;
    let span = povm_span_rank(&povms)?.numerical_rank;
    if span < d * d {
        eprintln!("warning: measurement not IC: rank {span} < {}", d * d);
    }
    let result = ml_reconstruct(&data, &povms, d, args.max_iters, args.dilution)?;
    if !result.converged {
        eprintln!("warning: iteration limit {} reached before convergence", args.max_iters);
    }
    let report = SimulationReport {
        fidelity: fidelity(&truth, &result.estimate)?,
        span_rank: span,
        informationally_complete: span == d * d,
        samples_per_setting: args.samples,
        seed: args.seed,
        reconstruction: &result,
    };
    emit(&to_json(&report)?, args.out.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        let cases = [
            ("0.6+0.4i", (0.6, 0.4)),
            ("1", (1.0, 0.0)),
            ("-2.5", (-2.5, 0.0)),
            ("i", (0.0, 1.0)),
            ("-i", (0.0, -1.0)),
            ("0.5i", (0.0, 0.5)),
            ("1-i", (1.0, -1.0)),
            ("1e-3+2E+1i", (1e-3, 20.0)),
            (" 3 - 4i ", (3.0, -4.0)),
        ];
        for (text, (re, im)) in cases {
            assert_eq!(parse_complex(text).ok(), Some(Complex64::new(re, im)), "{text}");
        }
        for bad in ["", "x", "1+", "++1i", "1i2"] {
            assert!(parse_complex(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn support_forms() {
        assert_eq!(parse_support("0,4,8").ok().unwrap().indices(), &[0, 4, 8]);
        assert_eq!(parse_support("d=3").ok().unwrap().indices(), &[0, 1, 2]);
        assert!(parse_support("4,0").is_err());
        assert!(parse_support("d=x").is_err());
    }

    #[test]
    fn state_forms() {
        assert!(parse_state("fock:2", 3).is_ok());
        assert!(parse_state("fock:3", 3).is_err());
        assert!(parse_state("mixed", 4).is_ok());
        let s = parse_state("pure:1,i", 3).ok().unwrap();
        assert!((s.matrix()[(1, 1)].re - 0.5).abs() < 1e-15);
        assert!(parse_state("squeezed:1", 3).is_err());
    }
}
