//! `dpsk`: region calculators and Monte Carlo runs for the feedback schemes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dpsk_core::harness::output::{
    mac_region_csv, noisy_region_csv, rd_region_csv, report_csv, sweep_csv, trace_csv,
};
use dpsk_core::harness::{run_experiment, run_sweep, trial_trace, ExperimentOptions};
use dpsk_core::regions::{self, unit_grid};
use dpsk_core::{DpcParams, Error, MacParams, NoisyObsParams, ParamError, RawConfig, Scheme, SignRule};

#[derive(Parser)]
#[command(name = "dpsk", version, about = "Feedback coding for dirty paper channels with state estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form rate-distortion regions over a uniform split grid.
    Region {
        #[arg(value_enum)]
        kind: RegionKind,
        #[command(flatten)]
        params: ParamArgs,
        /// Points per grid axis on [0, 1].
        #[arg(long, default_value_t = 101)]
        grid: usize,
        /// mac-fb only: one row per (gamma, beta) at the limiting correlation
        /// instead of a rho grid.
        #[arg(long)]
        at_rho_star: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Limiting error correlation of the two-user scheme.
    RhoStar {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Monte Carlo run of one configuration (JSON report by default).
    Simulate {
        #[arg(value_enum)]
        scheme: SchemeArg,
        #[command(flatten)]
        params: ParamArgs,
        /// Use the literal 0/1 sign rule for encoder 2.
        #[arg(long = "paper-sgn")]
        literal_sign: bool,
        /// Write one trace CSV per trial into this directory.
        #[arg(long, value_name = "DIR")]
        dump_traces: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Monte Carlo runs over a uniform split grid.
    Sweep {
        #[arg(value_enum)]
        scheme: SchemeArg,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 11)]
        grid: usize,
        /// Use the literal 0/1 sign rule for encoder 2.
        #[arg(long = "paper-sgn")]
        literal_sign: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RegionKind {
    DpcFb,
    MacFb,
    MacNofb,
    Noisy,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Dpc,
    Mac,
    Noisy,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Dpc => Scheme::Dpc,
            SchemeArg::Mac => Scheme::Mac,
            SchemeArg::Noisy => Scheme::Noisy,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

/// Config keys as flags. Flags override values from `--config`.
#[derive(Args)]
struct ParamArgs {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long = "P")]
    p: Option<f64>,
    #[arg(long = "P1")]
    p1: Option<f64>,
    #[arg(long = "P2")]
    p2: Option<f64>,
    #[arg(long = "Q")]
    q: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    #[arg(long = "sigma_z2")]
    sigma_z2: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long = "rate_fraction")]
    rate_fraction: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Exit status 2 for bad input, 1 for failures while running.
enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Param(_) | Error::Region(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<ParamError> for Failure {
    fn from(e: ParamError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

impl ParamArgs {
    fn raw(&self) -> Result<RawConfig, Failure> {
        let base = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                RawConfig::from_json(&text)?
            }
            None => RawConfig::default(),
        };
        let flags = RawConfig {
            p: self.p,
            p1: self.p1,
            p2: self.p2,
            q: self.q,
            sigma2: self.sigma2,
            sigma_z2: self.sigma_z2,
            gamma: self.gamma,
            beta: self.beta,
            n: self.n,
            rate: self.rate,
            rate_fraction: self.rate_fraction,
            trials: self.trials,
            seed: self.seed,
        };
        Ok(base.overlay(&flags))
    }
}

fn need(v: Option<f64>, key: &'static str) -> Result<f64, ParamError> {
    v.ok_or(ParamError::Missing(key))
}

fn dpc_params(raw: &RawConfig) -> Result<DpcParams, ParamError> {
    DpcParams::new(need(raw.p, "P")?, need(raw.q, "Q")?, need(raw.sigma2, "sigma2")?)
}

fn mac_params(raw: &RawConfig, default_q: Option<f64>) -> Result<MacParams, ParamError> {
    MacParams::new(
        need(raw.p1, "P1")?,
        need(raw.p2, "P2")?,
        need(raw.q.or(default_q), "Q")?,
        need(raw.sigma2, "sigma2")?,
    )
}

fn json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serialises");
    s.push('\n');
    s
}

fn emit(out: &OutputArgs, text: &str) -> Result<(), Failure> {
    match &out.out {
        Some(path) => fs::write(path, text).map_err(|e| io_failure(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sign_rule(literal_sign: bool) -> SignRule {
    if literal_sign {
        SignRule::Literal
    } else {
        SignRule::Aligned
    }
}

fn region(kind: RegionKind, params: &ParamArgs, grid: usize, at_rho_star: bool, out: &OutputArgs) -> Result<(), Failure> {
    let raw = params.raw()?;
    let g = unit_grid(grid);
    let as_json = out.format == Some(Format::Json);
    let text = match kind {
        RegionKind::DpcFb => {
            let pts = regions::dpc_fb_region(&dpc_params(&raw)?, &g).map_err(Error::from)?;
            if as_json { json(&pts) } else { rd_region_csv(&pts) }
        }
        RegionKind::Noisy => {
            let p = NoisyObsParams::new(dpc_params(&raw)?, raw.sigma_z2.unwrap_or(0.0))?;
            let pts = regions::noisy_region(&p, &g).map_err(Error::from)?;
            if as_json { json(&pts) } else { noisy_region_csv(&pts, p.sigma_z2()) }
        }
        RegionKind::MacFb | RegionKind::MacNofb => {
            let p = mac_params(&raw, None)?;
            let rows = match kind {
                RegionKind::MacNofb => regions::mac_nofb_region(&p, &g, &g),
                _ if at_rho_star => regions::mac_nofb_region(&p, &g, &g).map(|rows| {
                    rows.iter().map(|r| regions::mac_fb_operating_point(&p, r.gamma, r.beta)).collect()
                }),
                _ => regions::mac_fb_region(&p, &g, &g, &g),
            }
            .map_err(Error::from)?;
            if as_json { json(&rows) } else { mac_region_csv(&rows) }
        }
    };
    emit(out, &text)
}

fn rho_star(params: &ParamArgs, out: &OutputArgs) -> Result<(), Failure> {
    let raw = params.raw()?;
    // The state variance does not enter the fixed point.
    let p = mac_params(&raw, Some(0.0))?;
    let (gamma, beta) = (raw.gamma.unwrap_or(1.0), raw.beta.unwrap_or(1.0));
    dpsk_core::PowerSplit::mac(gamma, beta)?;
    let mut iterations = 0usize;
    let rho = regions::solve_rho_star_with(&p, gamma, beta, |_, _| iterations += 1);
    let residual = regions::rho_star_residual(&p, gamma, beta, rho);
    let text = if out.format == Some(Format::Json) {
        json(&serde_json::json!({
            "gamma": gamma,
            "beta": beta,
            "rho_star": rho,
            "residual": residual,
            "iterations": iterations,
        }))
    } else {
        use dpsk_core::harness::output::fmt_num;
        format!(
            "gamma,beta,rho_star,residual\n{},{},{},{}\n",
            fmt_num(gamma),
            fmt_num(beta),
            fmt_num(rho),
            fmt_num(residual)
        )
    };
    emit(out, &text)
}

fn simulate(
    scheme: SchemeArg,
    params: &ParamArgs,
    literal_sign: bool,
    dump: Option<&Path>,
    out: &OutputArgs,
) -> Result<(), Failure> {
    let cfg = dpsk_core::validate(&params.raw()?, scheme.into())?;
    let opts = ExperimentOptions { sign_rule: sign_rule(literal_sign), ..Default::default() };
    let report = run_experiment(&cfg, &opts)?;
    for d in &report.diagnostics {
        eprintln!("warning: {}", d.message);
    }
    if let Some(dir) = dump {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
        let width = cfg.trials.saturating_sub(1).to_string().len();
        for i in 0..cfg.trials {
            let trace = trial_trace(&cfg, &opts, i)?;
            let path = dir.join(format!("trial_{i:0width$}.csv"));
            fs::write(&path, trace_csv(&trace)).map_err(|e| io_failure(&path, e))?;
        }
    }
    let text = if out.format == Some(Format::Csv) { report_csv(&report) } else { report.to_json() + "\n" };
    emit(out, &text)
}

fn sweep(scheme: SchemeArg, params: &ParamArgs, grid: usize, literal_sign: bool, out: &OutputArgs) -> Result<(), Failure> {
    let raw = params.raw()?;
    let g = unit_grid(grid);
    let opts = ExperimentOptions { sign_rule: sign_rule(literal_sign), ..Default::default() };
    let rows = run_sweep(&raw, scheme.into(), &g, &g, &opts)?;
    let text = if out.format == Some(Format::Json) { json(&rows) } else { sweep_csv(&rows) };
    emit(out, &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Region { kind, params, grid, at_rho_star, out } => region(*kind, params, *grid, *at_rho_star, out),
        Command::RhoStar { params, out } => rho_star(params, out),
        Command::Simulate { scheme, params, literal_sign, dump_traces, out } => {
            simulate(*scheme, params, *literal_sign, dump_traces.as_deref(), out)
        }
        Command::Sweep { scheme, params, grid, literal_sign, out } => sweep(*scheme, params, *grid, *literal_sign, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
