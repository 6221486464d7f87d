//! Simulation sweeps over the power split.

use serde::Serialize;

use super::experiment::{run_experiment, ExperimentOptions, ExperimentReport};
use crate::error::{Error, RegionError};
use crate::params::{validate, RawConfig, Scheme, Setup};
use crate::regions::{check_grid, dpc_fb_boundary};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub beta: f64,
    /// Configured rate per user.
    pub rates: Vec<f64>,
    pub empirical_pe: f64,
    pub pe_ci_half_width: f64,
    pub empirical_distortion: f64,
    pub distortion_std_error: f64,
    /// Closed-form boundary distortion at this split.
    pub theory_distortion: f64,
    pub theory_distortion_finite_n: f64,
    pub scheme_distortion_finite_n: f64,
    pub rate_caps: Vec<f64>,
    /// Noisy observation only: the boundary with exact state knowledge.
    pub exact_obs_rate: Option<f64>,
    pub exact_obs_distortion: Option<f64>,
}

impl SweepRow {
    fn from_report(gamma: f64, beta: f64, r: &ExperimentReport) -> Self {
        let exact = match r.config {
            Setup::Noisy { params, .. } => Some(dpc_fb_boundary(params.base(), gamma)),
            _ => None,
        };
        Self {
            gamma,
            beta,
            rates: r.rates.clone(),
            empirical_pe: r.empirical_pe,
            pe_ci_half_width: r.pe_ci_half_width,
            empirical_distortion: r.empirical_distortion,
            distortion_std_error: r.distortion_std_error,
            theory_distortion: r.theory.distortion,
            theory_distortion_finite_n: r.theory.distortion_finite_n,
            scheme_distortion_finite_n: r.theory.scheme_distortion_finite_n,
            rate_caps: r.theory.rate_caps.clone(),
            exact_obs_rate: exact.map(|p| p.rate),
            exact_obs_distortion: exact.map(|p| p.distortion),
        }
    }
}

/// Runs one experiment per grid point. `beta_grid` is only read for the MAC;
/// other schemes report `beta = 1`.
pub fn run_sweep(
    base: &RawConfig,
    scheme: Scheme,
    gamma_grid: &[f64],
    beta_grid: &[f64],
    opts: &ExperimentOptions,
) -> Result<Vec<SweepRow>, Error> {
    check_grid("gamma", gamma_grid)?;
    let betas: &[f64] = if scheme == Scheme::Mac {
        check_grid("beta", beta_grid)?;
        beta_grid
    } else {
        &[1.0]
    };
    if betas.is_empty() {
        return Err(RegionError::EmptyGrid("beta").into());
    }
    let mut rows = Vec::with_capacity(gamma_grid.len() * betas.len());
    for &gamma in gamma_grid {
        for &beta in betas {
            let raw = RawConfig {
                gamma: Some(gamma),
                beta: (scheme == Scheme::Mac).then_some(beta),
                ..base.clone()
            };
            let cfg = validate(&raw, scheme)?;
            let report = run_experiment(&cfg, opts)?;
            rows.push(SweepRow::from_report(gamma, beta, &report));
        }
    }
    Ok(rows)
}
