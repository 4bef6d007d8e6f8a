//! `hillband`: classification, discriminant, spectral polynomial, band
//! structure, stability arcs and verification from the command line.

use clap::{Args, Parser, Subcommand, ValueEnum};
use hillband::elliptic::TorusParam;
use hillband::floquet::{discriminant, IntegratorSettings};
use hillband::kdv::{self, KdvSettings};
use hillband::potential::{classify, MultiplicityVector, PotentialSpec};
use hillband::spectrum::{self, SpectrumSettings, Window};
use hillband::{json, Complex64, Error};
use serde_json::json;
use std::io::Write;
use std::process::ExitCode;

/// Smallest supported imaginary part of tau.
const MIN_TAU_IM: f64 = 0.3;

#[derive(Parser, Debug)]
#[command(name = "hillband", version, about = "Spectra of Hill operators with Darboux-Treibich-Verdier potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Multiplicities n0,n1,n2,n3
    #[arg(long, global = true, value_parser = parse_n, default_value = "1,0,0,0")]
    n: MultiplicityVector,
    /// Imaginary part b of the period tau = i b
    #[arg(long, global = true, default_value_t = 1.0)]
    tau: f64,
    /// General tau as re,im (modular-transform experiments)
    #[arg(long = "tau-general", global = true, hide = true, value_parser = parse_complex)]
    tau_general: Option<Complex64>,
    /// Base point re,im of the integration line
    #[arg(long, global = true, value_parser = parse_complex)]
    z0: Option<Complex64>,
    /// Fourier grid size for the KdV recursion
    #[arg(long = "N", global = true)]
    grid: Option<usize>,
    /// Relative tolerance of the ODE integrator
    #[arg(long, global = true)]
    rtol: Option<f64>,
    /// Write output here instead of stdout
    #[arg(long, global = true)]
    out: Option<std::path::PathBuf>,
    /// Output format (default: csv for arcs and scan, json otherwise)
    #[arg(long, global = true)]
    format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Gap conditions, case, genus, m and dual vector
    Info,
    /// Hill discriminant at one energy
    Disc {
        /// Energy re,im
        #[arg(long = "E", value_parser = parse_complex, allow_hyphen_values = true)]
        e: Complex64,
    },
    /// Spectral polynomial and its roots
    Qpoly,
    /// Bands or complex arc endpoints
    Spectrum,
    /// (Anti)periodic eigenvalues inside the bands
    Gaps,
    /// Curves where the discriminant is real and in [-2, 2]
    Arcs {
        /// re0,re1,im0,im1
        #[arg(long, value_parser = parse_window, allow_hyphen_values = true, default_value = "-15,15,-3,3")]
        window: Window,
        /// Grid nodes per axis
        #[arg(long, default_value_t = 512)]
        res: usize,
    },
    /// Run every applicable consistency check
    Verify,
    /// Spectral polynomial, discriminant and gap counts over several tau
    Scan {
        /// Comma-separated list or start:stop:step
        #[arg(long = "tau-list", value_parser = parse_tau_list)]
        tau_list: TauList,
        /// Skip the band-interior search
        #[arg(long)]
        no_gaps: bool,
    },
}

#[derive(Clone, Debug)]
struct TauList(Vec<f64>);

fn parse_floats(s: &str, count: Option<usize>) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<Result<_, _>>()?;
    match count {
        Some(k) if v.len() != k => Err(format!("expected {k} comma-separated numbers, got {}", v.len())),
        _ => Ok(v),
    }
}

fn parse_n(s: &str) -> Result<MultiplicityVector, String> {
    let v: Vec<u32> = s
        .split(',')
        .map(|t| t.trim().parse::<u32>().map_err(|e| format!("'{t}': {e}")))
        .collect::<Result<_, _>>()?;
    let arr: [u32; 4] = v.try_into().map_err(|_| "expected four integers n0,n1,n2,n3".to_string())?;
    MultiplicityVector::new(arr).map_err(|e| e.to_string())
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let v = parse_floats(s, None)?;
    match v[..] {
        [re] => Ok(Complex64::new(re, 0.0)),
        [re, im] => Ok(Complex64::new(re, im)),
        _ => Err("expected re or re,im".into()),
    }
}

fn parse_window(s: &str) -> Result<Window, String> {
    let v = parse_floats(s, Some(4))?;
    Window::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn parse_tau_list(s: &str) -> Result<TauList, String> {
    if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
            .collect::<Result<_, _>>()?;
        let [start, stop, step] = parts[..] else {
            return Err("range must be start:stop:step".into());
        };
        if !(step > 0.0 && stop >= start) {
            return Err("range needs step > 0 and stop >= start".into());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok(TauList((0..count).map(|k| start + k as f64 * step).collect()));
    }
    Ok(TauList(parse_floats(s, None)?))
}

/// A failure and the exit code it maps to.
enum Failure {
    Usage(String),
    Numeric(Error),
    Io(std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_usage() {
            Failure::Usage(format!("{}: {e}", e.name()))
        } else {
            Failure::Numeric(e)
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

struct Output {
    text: String,
    verified: bool,
}

fn check_tau(b: f64) -> Result<(), Failure> {
    if !(b.is_finite() && b >= MIN_TAU_IM) {
        return Err(Failure::Usage(format!("--tau must be at least {MIN_TAU_IM}, got {b}")));
    }
    Ok(())
}

impl Common {
    fn torus(&self) -> Result<TorusParam, Failure> {
        match self.tau_general {
            Some(t) => {
                check_tau(t.im)?;
                Ok(TorusParam::new(t)?)
            }
            None => {
                check_tau(self.tau)?;
                Ok(TorusParam::imaginary(self.tau)?)
            }
        }
    }

    fn spec(&self) -> Result<PotentialSpec, Failure> {
        let spec = PotentialSpec::elliptic(self.n, self.torus()?)?;
        Ok(match self.z0 {
            Some(z0) => spec.with_z0(z0)?,
            None => spec,
        })
    }

    fn settings(&self) -> Result<SpectrumSettings, Failure> {
        let integrator = match self.rtol {
            Some(r) => IntegratorSettings::with_rel_tol(r),
            None => IntegratorSettings::default(),
        };
        integrator.validate()?;
        let kdv = KdvSettings { grid: self.grid, use_spec_line: self.z0.is_some() };
        Ok(SpectrumSettings { integrator, kdv })
    }

    fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}

fn json_text(v: &serde_json::Value) -> String {
    json::to_string(v) + "\n"
}

fn only_json(common: &Common) -> Result<(), Failure> {
    match common.format {
        Some(Format::Csv) => Err(Failure::Usage("this subcommand only writes JSON".into())),
        _ => Ok(()),
    }
}

fn run(cli: &Cli) -> Result<Output, Failure> {
    let common = &cli.common;
    let done = |text: String| Ok(Output { text, verified: true });
    match &cli.command {
        Command::Info => {
            only_json(common)?;
            done(json_text(&classify(&common.n)?.to_json_value()))
        }
        Command::Disc { e } => {
            only_json(common)?;
            let spec = common.spec()?;
            let d = discriminant(&spec, *e, &common.settings()?.integrator)?;
            done(json_text(&json!({
                "n": common.n.as_array(),
                "tau": [spec.tau().re, spec.tau().im],
                "E": [e.re, e.im],
                "Delta": [d.re, d.im],
            })))
        }
        Command::Qpoly => {
            only_json(common)?;
            let q = kdv::spectral_polynomial_with(&common.spec()?, &common.settings()?.kdv)?;
            let roots = kdv::spectral_roots(&q)?;
            done(json_text(&q.to_json_value(&roots)))
        }
        Command::Spectrum => {
            only_json(common)?;
            let r = spectrum::classify_spectrum_with(&common.spec()?, &common.settings()?)?;
            done(json_text(&r.to_json_value()))
        }
        Command::Gaps => {
            only_json(common)?;
            let g = spectrum::gap_eigenvalue_report_with(&common.spec()?, &common.settings()?)?;
            done(json_text(&g.to_json_value()))
        }
        Command::Arcs { window, res } => {
            let arcs = spectrum::stability_region(&common.spec()?, *window, *res)?;
            done(match common.format(Format::Csv) {
                Format::Csv => arcs.to_csv(),
                Format::Json => json_text(&arcs.to_json_value()),
            })
        }
        Command::Verify => {
            only_json(common)?;
            let v = spectrum::verify_theorems_with(&common.spec()?, &common.settings()?)?;
            Ok(Output { text: json_text(&v.to_json_value()), verified: v.all_passed() })
        }
        Command::Scan { tau_list, no_gaps } => {
            for &b in &tau_list.0 {
                check_tau(b)?;
            }
            let rows = spectrum::scan(common.n, &tau_list.0, !no_gaps, &common.settings()?)?;
            done(match common.format(Format::Csv) {
                Format::Csv => scan_csv(&rows),
                Format::Json => json_text(&json!(rows.iter().map(scan_json).collect::<Vec<_>>())),
            })
        }
    }
}

fn scan_json(r: &spectrum::ScanRow) -> serde_json::Value {
    let d = r.discriminant.value();
    json!({
        "tau_im": r.tau_im,
        "roots": r.roots.iter().map(|x| [x.value.re, x.value.im]).collect::<Vec<_>>(),
        "disc": [d.re, d.im],
        "disc_log10_abs": r.discriminant.log10_abs,
        "disc_phase": [r.discriminant.phase.re, r.discriminant.phase.im],
        "disc_resolved": r.discriminant.resolved,
        "complex_pairs": r.complex_pairs,
        "gap_counts": r.gap_counts,
    })
}

fn scan_csv(rows: &[spectrum::ScanRow]) -> String {
    let f = json::fmt_f64;
    let mut out = String::from(
        "tau_im,disc_re,disc_im,disc_log10_abs,disc_phase_re,disc_phase_im,disc_resolved,complex_pairs,gap_counts,roots\n",
    );
    for r in rows {
        let d = r.discriminant.value();
        let gaps = r
            .gap_counts
            .as_ref()
            .map(|g| g.iter().map(ToString::to_string).collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        let roots =
            r.roots.iter().map(|x| format!("{}{}{}i", f(x.value.re), if x.value.im < 0.0 { "" } else { "+" }, f(x.value.im)));
        let roots = roots.collect::<Vec<_>>();
        let roots = roots.join(";");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            f(r.tau_im),
            f(d.re),
            f(d.im),
            f(r.discriminant.log10_abs),
            f(r.discriminant.phase.re),
            f(r.discriminant.phase.im),
            r.discriminant.resolved,
            r.complex_pairs,
            gaps,
            roots
        ));
    }
    out
}

fn configure_threads() -> Result<(), Failure> {
    if let Ok(v) = std::env::var("HILLBAND_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::Usage(format!("HILLBAND_THREADS must be a positive integer, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn emit(cli: &Cli, text: &str) -> std::io::Result<()> {
    match &cli.common.out {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|_| run(&cli)).and_then(|out| {
        emit(&cli, &out.text)?;
        Ok(out.verified)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification mismatch");
            ExitCode::from(3)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}\nrun `hillband --help` for the flags and subcommands");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("numeric failure: {}: {e}", e.name());
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("output error: {e}");
            ExitCode::from(2)
        }
    }
}
