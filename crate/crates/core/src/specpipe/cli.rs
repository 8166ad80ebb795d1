use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use super::{
    format_spectrum, match_modes, mode_statistics, plot_rows, read_modes, read_records, read_scheme, read_spectrum, sticks_to_csv,
    write_text, PipeError, DEFAULT_MATCH_WINDOW, DEFAULT_PAIR_WINDOW,
};
use crate::fcmodel::{relative_intensities, stick_to_spectrum, Broadening};
use crate::fitkit::{fit_lorentzian_multi, fit_rate_model, fit_saturation, FitOptions, FitResult, RateModel, RateFitSetup};
use crate::levels::{ElectronicState, LaserDrive, LevelScheme, ZPL_TARGET};
use crate::ratesim::{add_noise, fluorex_spectrum, saturation_curve, sted_spectrum, ScanAxis};
use crate::spectrum::{linspace, logspace, AxisUnit, Spectrum, SpectrumKind};
use crate::units::{Quantity, Unit};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "vibronic", version, about = "Simulate and fit single-molecule vibronic spectra")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON file with fit options (`tol_grad`, `tol_step`, `max_iter`, `free`, `n_peaks`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a spectrum from a level scheme.
    #[command(subcommand)]
    Simulate(Simulate),
    /// Replace a spectrum's values by Poisson counts.
    Noise(NoiseArgs),
    /// Fit a model to a spectrum and write the result as JSON.
    #[command(subcommand)]
    Fit(Fit),
    /// Cross-molecule statistics.
    #[command(subcommand)]
    Stats(Stats),
    /// Franck–Condon predictions.
    #[command(subcommand)]
    Fc(Fc),
    /// Convert a value between units.
    Convert(ConvertArgs),
}

#[derive(Debug, Args)]
struct ScanArgs {
    /// Full scan width in GHz, centered on the anchor.
    #[arg(long, conflicts_with_all = ["from_cm1", "to_cm1"])]
    span_ghz: Option<f64>,
    /// Absolute scan start in cm⁻¹ from the 00ZPL.
    #[arg(long, requires = "to_cm1")]
    from_cm1: Option<f64>,
    #[arg(long, requires = "from_cm1")]
    to_cm1: Option<f64>,
    #[arg(long, default_value_t = 2001)]
    points: usize,
}

#[derive(Debug, Subcommand)]
enum Simulate {
    Fluorex {
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long)]
        sp: f64,
        /// Scanned S1 level (default: the first one, or the 00ZPL if none).
        #[arg(long)]
        anchor: Option<String>,
        #[command(flatten)]
        scan: ScanArgs,
    },
    Sted {
        #[arg(long)]
        scheme: PathBuf,
        /// Pumped S1 level (default: the first one).
        #[arg(long)]
        pump: Option<String>,
        #[arg(long)]
        sp: f64,
        #[arg(long, default_value_t = 0.0)]
        pump_detuning_ghz: f64,
        /// Depleting S0 level (default: the first one).
        #[arg(long)]
        anchor: Option<String>,
        #[arg(long)]
        sd: f64,
        #[command(flatten)]
        scan: ScanArgs,
    },
    Saturation {
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long)]
        pump: Option<String>,
        #[arg(long)]
        p_sat: f64,
        #[arg(long, value_enum, default_value_t = PowerUnit::Nw)]
        unit: PowerUnit,
        /// Lowest power (default p_sat/100).
        #[arg(long)]
        p_min: Option<f64>,
        /// Highest power (default 100·p_sat).
        #[arg(long)]
        p_max: Option<f64>,
        #[arg(long, default_value_t = 41)]
        points: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PowerUnit {
    #[value(name = "nW")]
    Nw,
    #[value(name = "uW")]
    Uw,
}

#[derive(Debug, Args)]
struct NoiseArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Expected counts per unit of signal.
    #[arg(long)]
    dwell: f64,
}

#[derive(Debug, Subcommand)]
enum Fit {
    Lorentzian {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        peaks: Option<usize>,
    },
    Ratemodel {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        scheme: PathBuf,
        /// Comma-separated parameter names, e.g. `w290.gamma,w290.wavenumber`.
        #[arg(long, value_delimiter = ',')]
        free: Vec<String>,
    },
    Saturation {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum Stats {
    Modes {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MATCH_WINDOW)]
        window: f64,
        #[arg(long, default_value_t = DEFAULT_PAIR_WINDOW)]
        pair_window: f64,
        /// Plot-ready CSV of per-molecule deviations.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum Fc {
    Predict {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        max_quanta: u32,
        /// Lorentzian FWHM in GHz; writes a broadened spectrum instead of sticks.
        #[arg(long, requires_all = ["from_cm1", "to_cm1"])]
        fwhm_ghz: Option<f64>,
        #[arg(long)]
        from_cm1: Option<f64>,
        #[arg(long)]
        to_cm1: Option<f64>,
        #[arg(long, default_value_t = 4001)]
        points: usize,
    },
}

#[derive(Debug, Args)]
struct ConvertArgs {
    #[arg(long, allow_negative_numbers = true)]
    value: f64,
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
    #[arg(long, value_enum)]
    relation: Option<Relation>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Relation {
    /// Linewidth (FWHM) ↔ lifetime via Δν = 1/(2πT).
    Lifetime,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitConfig {
    tol_grad: Option<f64>,
    tol_step: Option<f64>,
    max_iter: Option<usize>,
    free: Option<Vec<String>>,
    n_peaks: Option<usize>,
}

impl FitConfig {
    fn load(path: Option<&Path>) -> Result<Self, PipeError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = super::read_text(path)?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| PipeError::Schema {
            path: format!("{}:{}", path.display(), e.path()),
            message: e.inner().to_string(),
        })
    }

    fn options(&self) -> FitOptions {
        let d = FitOptions::default();
        FitOptions {
            tol_grad: self.tol_grad.unwrap_or(d.tol_grad),
            tol_step: self.tol_step.unwrap_or(d.tol_step),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
        }
    }
}

enum Outcome {
    Done,
    NotConverged,
}

fn emit(out: &Option<PathBuf>, stdout: &mut dyn Write, text: &str) -> Result<(), PipeError> {
    match out {
        Some(path) => write_text(path, text),
        None => stdout.write_all(text.as_bytes()).map_err(|source| PipeError::Io {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn first_level(scheme: &LevelScheme, state: ElectronicState) -> Option<String> {
    let list = match state {
        ElectronicState::S0 => &scheme.s0_levels,
        ElectronicState::S1 => &scheme.s1_levels,
    };
    list.first().map(|l| l.id.clone())
}

fn scan_axis(anchor: String, scan: &ScanArgs) -> Result<ScanAxis, PipeError> {
    if scan.points < 2 {
        return Err(PipeError::Argument("--points must be >= 2".into()));
    }
    match (scan.span_ghz, scan.from_cm1, scan.to_cm1) {
        (_, Some(a), Some(b)) if a < b => Ok(ScanAxis::wavenumber(anchor, linspace(a, b, scan.points))),
        (_, Some(_), Some(_)) => Err(PipeError::Argument("--from-cm1 must be below --to-cm1".into())),
        (Some(span), _, _) if span > 0.0 => Ok(ScanAxis::detuning(anchor, linspace(-0.5 * span, 0.5 * span, scan.points))),
        (Some(span), _, _) => Err(PipeError::Argument(format!("--span-ghz must be > 0, got {span}"))),
        _ => Err(PipeError::Argument("give --span-ghz or --from-cm1/--to-cm1".into())),
    }
}

fn fit_json(result: &FitResult) -> String {
    let mut s = serde_json::to_string_pretty(result).expect("fit result serializes");
    s.push('\n');
    s
}

fn run(cli: Cli, stdout: &mut dyn Write) -> Result<Outcome, PipeError> {
    let out = &cli.out;
    match cli.command {
        Command::Simulate(sim) => {
            let spectrum = match sim {
                Simulate::Fluorex { scheme, sp, anchor, scan } => {
                    let scheme = read_scheme(&scheme)?;
                    let anchor = anchor
                        .or_else(|| first_level(&scheme, ElectronicState::S1))
                        .unwrap_or_else(|| ZPL_TARGET.to_string());
                    fluorex_spectrum(&scheme, &scan_axis(anchor, &scan)?, sp)?
                }
                Simulate::Sted {
                    scheme,
                    pump,
                    sp,
                    pump_detuning_ghz,
                    anchor,
                    sd,
                    scan,
                } => {
                    let scheme = read_scheme(&scheme)?;
                    let pump = pump
                        .or_else(|| first_level(&scheme, ElectronicState::S1))
                        .ok_or_else(|| PipeError::Argument("scheme has no S1 level to pump".into()))?;
                    let anchor = anchor
                        .or_else(|| first_level(&scheme, ElectronicState::S0))
                        .ok_or_else(|| PipeError::Argument("scheme has no S0 level to deplete".into()))?;
                    let drive = LaserDrive::pump(pump, sp).detuned(pump_detuning_ghz);
                    sted_spectrum(&scheme, &drive, &scan_axis(anchor, &scan)?, sd)?
                }
                Simulate::Saturation {
                    scheme,
                    pump,
                    p_sat,
                    unit,
                    p_min,
                    p_max,
                    points,
                } => {
                    let scheme = read_scheme(&scheme)?;
                    let pump = pump
                        .or_else(|| first_level(&scheme, ElectronicState::S1))
                        .unwrap_or_else(|| ZPL_TARGET.to_string());
                    let lo = p_min.unwrap_or(0.01 * p_sat);
                    let hi = p_max.unwrap_or(100.0 * p_sat);
                    if !(lo > 0.0 && hi > lo && points >= 2) {
                        return Err(PipeError::Argument(format!("need 0 < p_min < p_max and >= 2 points, got {lo}..{hi} with {points}")));
                    }
                    let axis_unit = match unit {
                        PowerUnit::Nw => AxisUnit::PowerNw,
                        PowerUnit::Uw => AxisUnit::PowerUw,
                    };
                    saturation_curve(&scheme, &pump, &logspace(lo, hi, points), axis_unit, p_sat)?
                }
            };
            emit(out, stdout, &format_spectrum(&spectrum)?)?;
        }
        Command::Noise(args) => {
            let spectrum = read_spectrum(&args.input)?;
            emit(out, stdout, &format_spectrum(&add_noise(&spectrum, cli.seed, args.dwell)?)?)?;
        }
        Command::Fit(fit) => {
            let config = FitConfig::load(cli.config.as_deref())?;
            let opts = config.options();
            let result = match fit {
                Fit::Lorentzian { input, peaks } => {
                    let spectrum = read_spectrum(&input)?;
                    let n = peaks.or(config.n_peaks).unwrap_or(1);
                    fit_lorentzian_multi(&spectrum, n, None, &opts)?
                }
                Fit::Ratemodel { input, scheme, free } => {
                    let spectrum = read_spectrum(&input)?;
                    let scheme = read_scheme(&scheme)?;
                    let free = if !free.is_empty() {
                        free
                    } else if let Some(f) = config.free.clone() {
                        f
                    } else {
                        default_free(&spectrum, &scheme)?
                    };
                    fit_rate_model(&spectrum, &scheme, &free, &opts)?.result
                }
                Fit::Saturation { input } => {
                    let spectrum = read_spectrum(&input)?;
                    if spectrum.kind != SpectrumKind::Saturation {
                        return Err(PipeError::Argument(format!("expected a saturation spectrum, got {}", spectrum.kind)));
                    }
                    fit_saturation(&spectrum.axis, &spectrum.values, &opts)?
                }
            };
            emit(out, stdout, &fit_json(&result))?;
            if !result.converged {
                return Ok(Outcome::NotConverged);
            }
        }
        Command::Stats(Stats::Modes {
            input,
            window,
            pair_window,
            csv,
        }) => {
            let records = read_records(&input)?;
            let s0 = match_modes(&records, ElectronicState::S0, window)?;
            let s1 = match_modes(&records, ElectronicState::S1, window)?;
            let report = mode_statistics(&s0, &s1, pair_window)?;
            if let Some(path) = csv {
                let mut w = csv::Writer::from_writer(Vec::new());
                for row in plot_rows(&report) {
                    w.serialize(row).expect("in-memory CSV write");
                }
                let text = String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8");
                write_text(&path, &text)?;
            }
            let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
            json.push('\n');
            emit(out, stdout, &json)?;
        }
        Command::Fc(Fc::Predict {
            input,
            max_quanta,
            fwhm_ghz,
            from_cm1,
            to_cm1,
            points,
        }) => {
            let modes = read_modes(&input)?;
            let sticks = relative_intensities(&modes, max_quanta)?;
            let text = match (fwhm_ghz, from_cm1, to_cm1) {
                (Some(g), Some(a), Some(b)) => {
                    if !(a < b && points >= 2) {
                        return Err(PipeError::Argument("need --from-cm1 < --to-cm1 and >= 2 points".into()));
                    }
                    format_spectrum(&stick_to_spectrum(&sticks, &Broadening::Uniform(g), &linspace(a, b, points))?)?
                }
                _ => sticks_to_csv(&sticks),
            };
            emit(out, stdout, &text)?;
        }
        Command::Convert(args) => {
            let from: Unit = args.from.parse()?;
            let to: Unit = args.to.parse()?;
            let q = Quantity::new(args.value, from)?;
            let converted = match args.relation {
                Some(Relation::Lifetime) if from.dimension() == crate::units::Dimension::Time => q.lifetime_to_linewidth(to)?,
                Some(Relation::Lifetime) => q.linewidth_to_lifetime(to)?,
                None => q.convert_to(to)?,
            };
            emit(out, stdout, &format!("{} {}\n", converted.value, converted.unit))?;
        }
    }
    Ok(Outcome::Done)
}

fn default_free(spectrum: &Spectrum, scheme: &LevelScheme) -> Result<Vec<String>, PipeError> {
    let setup = RateFitSetup::from_spectrum(spectrum, scheme)?;
    let a = &setup.anchor;
    let mut free = vec![format!("{a}.wavenumber"), format!("{a}.gamma"), format!("{a}.fc")];
    if setup.model == RateModel::Sted && scheme.baseline_sideband_cross_section > 0.0 {
        free.push("baseline".into());
    }
    Ok(free)
}

/// Runs the command line with explicit output streams and returns the exit
/// status: 0 success, 2 bad input, 3 fit did not converge.
pub fn cli_dispatch_to<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    match run(cli, stdout) {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::NotConverged) => {
            let _ = writeln!(stderr, "warning: fit did not converge");
            EXIT_NOT_CONVERGED
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INPUT
        }
    }
}

pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    cli_dispatch_to(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = cli_dispatch_to(std::iter::once("vibronic").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn convert_linewidth_to_lifetime() {
        let (code, out, _) = run_args(&["convert", "--value", "2", "--from", "frequency_GHz", "--to", "time_ps", "--relation", "lifetime"]);
        assert_eq!(code, 0);
        let v: f64 = out.split_whitespace().next().unwrap().parse().unwrap();
        assert!((v - 79.577).abs() < 1e-3, "{out}");
        let (code, out, _) = run_args(&["convert", "--value", "7", "--from", "time_ns", "--to", "frequency_GHz", "--relation", "lifetime"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("0.0227"), "{out}");
        let (code, out, _) = run_args(&["convert", "--value", "1", "--from", "wavenumber_cm1", "--to", "frequency_GHz"]);
        assert_eq!((code, out.as_str()), (0, "29.9792458 frequency_GHz\n"));
    }

    #[test]
    fn usage_errors_exit_2() {
        let (code, _, err) = run_args(&["frobnicate"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.contains("Usage"), "{err}");
        assert_eq!(run_args(&["convert", "--value", "1", "--from", "time_ps", "--to", "power_nW"]).0, EXIT_INPUT);
        assert_eq!(run_args(&["convert", "--value", "1", "--from", "parsec", "--to", "time_ps"]).0, EXIT_INPUT);
        assert_eq!(run_args(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn missing_file_is_input_error() {
        let (code, _, err) = run_args(&["fit", "saturation", "--in", "/nonexistent/sat.csv"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.contains("/nonexistent/sat.csv"), "{err}");
    }
}
