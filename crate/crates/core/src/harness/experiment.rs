//! Monte Carlo experiments over many independent blocks.
//!
//! Trials are grouped into fixed chunks of [`CHUNK`] consecutive indices. Each
//! chunk is accumulated sequentially and the chunk results are merged in index
//! order, so a report is bit-identical whether the chunks ran on one thread or
//! many.

use serde::Serialize;

use super::rng::{draw_trial, RandomPlan, STREAM_VERSION};
use super::stats::{binomial_ci95, MeanEstimate, Moments};
use crate::error::{Error, SchemeError};
use crate::noisy_obs::{self, noisy_scheme_distortion};
use crate::params::{DpcParams, MacParams, NoisyObsParams, Scheme, Setup, ValidatedConfig};
use crate::regions::{self, dpc_fb_boundary, noisy_boundary, solve_rho_star};
use crate::sk_dpc::{self, SchemeTrace, SkCoefficients};
use crate::sk_dpmac::{self, MacSchemeTrace, MacSkCoefficients, SignRule};

/// Trials per aggregation chunk. Part of the reproducibility contract.
pub const CHUNK: u64 = 256;

/// Relative gap between simulated and closed-form distortion that raises a
/// [`DiagnosticKind::FormulaMismatch`].
pub const FORMULA_TOLERANCE: f64 = 0.02;

/// Largest accepted `| |rho_n| - rho* |` before a non-convergence diagnostic.
pub const RHO_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExperimentOptions {
    pub sign_rule: SignRule,
    pub execution: Execution,
}

/// A finished block of either kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Trace {
    Single(SchemeTrace),
    Mac(MacSchemeTrace),
}

impl Trace {
    pub fn distortion(&self) -> f64 {
        match self {
            Trace::Single(t) => t.distortion(),
            Trace::Mac(t) => t.distortion(),
        }
    }

    pub fn decoded(&self) -> bool {
        match self {
            Trace::Single(t) => t.decoded(),
            Trace::Mac(t) => t.decoded(),
        }
    }
}

/// Coefficients shared by every trial of one configuration.
enum Prepared {
    Dpc { params: DpcParams, gamma: f64, coeffs: Option<SkCoefficients>, m: u64 },
    Noisy { params: NoisyObsParams, gamma: f64, coeffs: Option<SkCoefficients>, m: u64 },
    Mac { params: MacParams, coeffs: MacSkCoefficients, m: [u64; 2] },
}

fn optional(result: Result<SkCoefficients, SchemeError>) -> Result<Option<SkCoefficients>, SchemeError> {
    match result {
        Ok(c) => Ok(Some(c)),
        Err(SchemeError::DegenerateSplit) => Ok(None),
        Err(e) => Err(e),
    }
}

impl Prepared {
    fn new(setup: &Setup, sign_rule: SignRule) -> Result<Self, SchemeError> {
        Ok(match *setup {
            Setup::Dpc { params, split, block } => Prepared::Dpc {
                params,
                gamma: split.gamma(),
                coeffs: optional(sk_dpc::compute_coefficients(&params, split.gamma(), block.n()))?,
                m: block.messages(),
            },
            Setup::Noisy { params, split, block } => Prepared::Noisy {
                params,
                gamma: split.gamma(),
                coeffs: optional(noisy_obs::noisy_coefficients(&params, split.gamma(), block.n()))?,
                m: block.messages(),
            },
            Setup::Mac { params, split, block } => Prepared::Mac {
                params,
                coeffs: MacSkCoefficients::propagate(&params, split.gamma(), split.beta(), block.n(), sign_rule),
                m: block.messages(),
            },
        })
    }

    fn n(&self) -> usize {
        match self {
            Prepared::Dpc { coeffs, .. } | Prepared::Noisy { coeffs, .. } => {
                coeffs.as_ref().map(|c| c.n).unwrap_or(0)
            }
            Prepared::Mac { coeffs, .. } => coeffs.n,
        }
    }

    fn trial(&self, plan: &RandomPlan, index: u64, n: usize) -> Result<Trace, SchemeError> {
        let mut rng = plan.trial_rng(index);
        match self {
            Prepared::Dpc { params, gamma, coeffs, m } => {
                let (w, draws) = draw_trial(&mut rng, &[*m], n, params.q(), params.sigma2(), None);
                sk_dpc::run_block_with(params, *gamma, coeffs.as_ref(), *m, w[0], &draws).map(Trace::Single)
            }
            Prepared::Noisy { params, gamma, coeffs, m } => {
                let base = params.base();
                let (w, draws) =
                    draw_trial(&mut rng, &[*m], n, base.q(), base.sigma2(), Some(params.sigma_z2()));
                noisy_obs::noisy_run_block_with(params, *gamma, coeffs.as_ref(), *m, w[0], &draws)
                    .map(Trace::Single)
            }
            Prepared::Mac { params, coeffs, m } => {
                let (w, draws) = draw_trial(&mut rng, m, n, params.q(), params.sigma2(), None);
                sk_dpmac::mac_run_block_with(coeffs, *m, [w[0], w[1]], &draws).map(Trace::Mac)
            }
        }
    }
}

/// Regenerates trial `index` of an experiment exactly as
/// [`run_experiment`] sees it.
pub fn trial_trace(cfg: &ValidatedConfig, opts: &ExperimentOptions, index: u64) -> Result<Trace, Error> {
    let prepared = Prepared::new(&cfg.setup, opts.sign_rule)?;
    Ok(prepared.trial(&RandomPlan::new(cfg.seed), index, cfg.setup.n())?)
}

#[derive(Debug, Clone)]
struct Accumulator {
    trials: u64,
    errors: u64,
    user_errors: [u64; 2],
    distortion: Moments,
    power: Vec<Vec<Moments>>,
}

impl Accumulator {
    fn new(encoders: usize, n: usize) -> Self {
        Self {
            trials: 0,
            errors: 0,
            user_errors: [0; 2],
            distortion: Moments::default(),
            power: vec![vec![Moments::default(); n]; encoders],
        }
    }

    fn push(&mut self, trace: &Trace) {
        self.trials += 1;
        if !trace.decoded() {
            self.errors += 1;
        }
        self.distortion.push(trace.distortion());
        match trace {
            Trace::Single(t) => {
                if !t.decoded() {
                    self.user_errors[0] += 1;
                }
                for (acc, x) in self.power[0].iter_mut().zip(&t.x) {
                    acc.push(x * x);
                }
            }
            Trace::Mac(t) => {
                for u in 0..2 {
                    if t.w[u] != t.w_hat[u] {
                        self.user_errors[u] += 1;
                    }
                }
                for (acc, x) in self.power[0].iter_mut().zip(&t.x1) {
                    acc.push(x * x);
                }
                for (acc, x) in self.power[1].iter_mut().zip(&t.x2) {
                    acc.push(x * x);
                }
            }
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        self.trials += other.trials;
        self.errors += other.errors;
        for u in 0..2 {
            self.user_errors[u] += other.user_errors[u];
        }
        self.distortion.merge(&other.distortion);
        for (mine, theirs) in self.power.iter_mut().zip(&other.power) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                a.merge(b);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theory {
    /// Per-user rate caps of the region point the scheme operates at.
    pub rate_caps: Vec<f64>,
    pub sum_rate_cap: Option<f64>,
    /// Closed-form boundary distortion (infinite blocklength).
    pub distortion: f64,
    /// Same, with the estimate-free opening slots accounted for at this `n`.
    pub distortion_finite_n: f64,
    /// Exact expected distortion of the simulated scheme at this `n`.
    pub scheme_distortion_finite_n: f64,
    pub rho_star: Option<f64>,
    /// Final error correlation of the propagated MAC recursion.
    pub rho_n: Option<f64>,
    /// Closed-form `E[X_1^2]` (single-user schemes with message power).
    pub first_symbol_power: Option<f64>,
    pub powers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deltas {
    pub distortion: f64,
    pub powers: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    NonConvergence,
    FormulaMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub scheme: Scheme,
    pub config: Setup,
    pub seed: u64,
    pub trials: u64,
    pub stream_version: &'static str,
    pub sign_rule: SignRule,
    pub n: usize,
    pub messages: Vec<u64>,
    pub rates: Vec<f64>,
    pub empirical_pe: f64,
    pub pe_ci_half_width: f64,
    pub pe_ci95: [f64; 2],
    pub user_error_rates: Vec<f64>,
    pub empirical_distortion: f64,
    pub distortion_std_error: f64,
    /// Block-averaged `E[X^2]` per encoder.
    pub empirical_powers: Vec<f64>,
    pub per_symbol_power: Vec<Vec<MeanEstimate>>,
    pub theory: Theory,
    pub deltas: Deltas,
    pub diagnostics: Vec<Diagnostic>,
}

impl ExperimentReport {
    pub fn has(&self, kind: DiagnosticKind) -> bool {
        self.diagnostics.iter().any(|d| d.kind == kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn finite_n(q: f64, free_slots: usize, per_symbol: f64, n: usize) -> f64 {
    let free = free_slots.min(n);
    (free as f64 * q + (n - free) as f64 * per_symbol) / n as f64
}

fn theory_for(prepared: &Prepared, setup: &Setup, n: usize) -> (Theory, Vec<Diagnostic>) {
    let mut diagnostics = Vec::new();
    let theory = match (prepared, setup) {
        (Prepared::Dpc { params, gamma, coeffs, m }, _) => {
            let pt = dpc_fb_boundary(params, *gamma);
            let d = finite_n(params.q(), 1, pt.distortion, n);
            Theory {
                rate_caps: vec![pt.rate],
                sum_rate_cap: None,
                distortion: pt.distortion,
                distortion_finite_n: d,
                scheme_distortion_finite_n: d,
                rho_star: None,
                rho_n: None,
                first_symbol_power: coeffs
                    .as_ref()
                    .map(|c| c.first_symbol_power_with(params.q(), sk_dpc::theta_variance(*m))),
                powers: vec![params.p()],
            }
        }
        (Prepared::Noisy { params, gamma, coeffs, m }, _) => {
            let pt = noisy_boundary(params, *gamma);
            let q = params.base().q();
            let eq = noisy_obs::make_equivalent(params);
            Theory {
                rate_caps: vec![pt.rate],
                sum_rate_cap: None,
                distortion: pt.distortion,
                distortion_finite_n: finite_n(q, 1, pt.distortion, n),
                scheme_distortion_finite_n: finite_n(q, 1, noisy_scheme_distortion(params, *gamma), n),
                rho_star: None,
                rho_n: None,
                first_symbol_power: coeffs.as_ref().map(|c| c.first_symbol_power_with(eq.state_var_eff, sk_dpc::theta_variance(*m))),
                powers: vec![params.base().p()],
            }
        }
        (Prepared::Mac { params, coeffs, .. }, Setup::Mac { split, .. }) => {
            let (gamma, beta) = (split.gamma(), split.beta());
            let rho_star = solve_rho_star(params, gamma, beta);
            let caps = regions::mac_constraints(params, gamma, beta, rho_star);
            let rho_n = (n >= 2).then(|| coeffs.rho(n));
            if coeffs.g1 > 0.0 && coeffs.g2 > 0.0 {
                if let Some(r) = rho_n {
                    let gap = (r.abs() - rho_star).abs();
                    if gap > RHO_TOLERANCE {
                        diagnostics.push(Diagnostic {
                            kind: DiagnosticKind::NonConvergence,
                            message: format!(
                                "|rho_n| = {:.6} is {gap:.3e} away from rho* = {rho_star:.6} at n = {n}",
                                r.abs()
                            ),
                        });
                    }
                }
            }
            Theory {
                rate_caps: vec![caps.r1_max, caps.r2_max],
                sum_rate_cap: Some(caps.rsum_max),
                distortion: caps.d_min,
                distortion_finite_n: finite_n(params.q(), 2, caps.d_min, n),
                scheme_distortion_finite_n: coeffs.expected_distortion(),
                rho_star: Some(rho_star),
                rho_n,
                first_symbol_power: None,
                powers: vec![params.p1(), params.p2()],
            }
        }
        _ => unreachable!("prepared state always matches its setup"),
    };
    (theory, diagnostics)
}

fn run_chunk(prepared: &Prepared, plan: &RandomPlan, encoders: usize, n: usize, range: std::ops::Range<u64>) -> Result<Accumulator, SchemeError> {
    let mut acc = Accumulator::new(encoders, n);
    for index in range {
        acc.push(&prepared.trial(plan, index, n)?);
    }
    Ok(acc)
}

/// Worker cap from `DPSK_THREADS` (unset or 0 means rayon's default).
pub fn thread_cap() -> Option<usize> {
    std::env::var("DPSK_THREADS").ok()?.trim().parse().ok().filter(|&k: &usize| k > 0)
}

fn collect_chunks(
    prepared: &Prepared,
    plan: &RandomPlan,
    encoders: usize,
    n: usize,
    trials: u64,
    execution: Execution,
) -> Result<Vec<Accumulator>, SchemeError> {
    let chunks = trials.div_ceil(CHUNK);
    let range = move |c: u64| c * CHUNK..((c + 1) * CHUNK).min(trials);
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            let work = || {
                (0..chunks)
                    .into_par_iter()
                    .map(|c| run_chunk(prepared, plan, encoders, n, range(c)))
                    .collect::<Result<Vec<_>, _>>()
            };
            match thread_cap().and_then(|k| rayon::ThreadPoolBuilder::new().num_threads(k).build().ok()) {
                Some(pool) => pool.install(work),
                None => work(),
            }
        }
        _ => (0..chunks).map(|c| run_chunk(prepared, plan, encoders, n, range(c))).collect(),
    }
}

/// Runs `cfg.trials` blocks and compares the aggregates with the closed forms.
pub fn run_experiment(cfg: &ValidatedConfig, opts: &ExperimentOptions) -> Result<ExperimentReport, Error> {
    let setup = &cfg.setup;
    let n = setup.n();
    let prepared = Prepared::new(setup, opts.sign_rule)?;
    debug_assert!(prepared.n() == 0 || prepared.n() == n);
    let plan = RandomPlan::new(cfg.seed);
    let encoders = if setup.scheme() == Scheme::Mac { 2 } else { 1 };

    let chunks = collect_chunks(&prepared, &plan, encoders, n, cfg.trials, opts.execution)?;
    let mut total = Accumulator::new(encoders, n);
    for c in &chunks {
        total.merge(c);
    }

    let (messages, rates) = match setup {
        Setup::Dpc { block, .. } | Setup::Noisy { block, .. } => (vec![block.messages()], vec![block.rate()]),
        Setup::Mac { block, .. } => (block.messages().to_vec(), block.rate().to_vec()),
    };
    let (pe, half, ci) = binomial_ci95(total.errors, total.trials);
    let user_error_rates = (0..encoders).map(|u| total.user_errors[u] as f64 / total.trials as f64).collect();
    let per_symbol_power: Vec<Vec<MeanEstimate>> =
        total.power.iter().map(|enc| enc.iter().map(Moments::summary).collect()).collect();
    let empirical_powers: Vec<f64> = per_symbol_power
        .iter()
        .map(|enc| enc.iter().map(|m| m.mean).sum::<f64>() / n as f64)
        .collect();

    let (theory, mut diagnostics) = theory_for(&prepared, setup, n);
    let empirical_distortion = total.distortion.mean();
    let gap = (empirical_distortion - theory.distortion_finite_n).abs() / theory.distortion_finite_n;
    if setup.scheme() == Scheme::Noisy && gap > FORMULA_TOLERANCE {
        diagnostics.push(Diagnostic {
            kind: DiagnosticKind::FormulaMismatch,
            message: format!(
                "simulated distortion {empirical_distortion:.6} differs from the closed-form region boundary \
                 {:.6} by {:.2}% (exact scheme value {:.6}); the boundary formula is not what this scheme attains",
                theory.distortion_finite_n,
                100.0 * gap,
                theory.scheme_distortion_finite_n
            ),
        });
    }
    let deltas = Deltas {
        distortion: empirical_distortion - theory.distortion_finite_n,
        powers: empirical_powers.iter().zip(&theory.powers).map(|(e, t)| e - t).collect(),
    };

    Ok(ExperimentReport {
        scheme: setup.scheme(),
        config: *setup,
        seed: cfg.seed,
        trials: cfg.trials,
        stream_version: STREAM_VERSION,
        sign_rule: opts.sign_rule,
        n,
        messages,
        rates,
        empirical_pe: pe,
        pe_ci_half_width: half,
        pe_ci95: ci,
        user_error_rates,
        empirical_distortion,
        distortion_std_error: total.distortion.std_error(),
        empirical_powers,
        per_symbol_power,
        theory,
        deltas,
        diagnostics,
    })
}
