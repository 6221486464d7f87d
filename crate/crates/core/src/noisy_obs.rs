//! Noisy state observation at the transmitter.
//!
//! The transmitter sees `S~ = S + Z`. Writing `S = kappa S~ + Z~` with
//! `kappa = Q / (Q + sigma_z2)` splits the state into a part the transmitter
//! knows and a residual `Z~ ~ N(0, kappa sigma_z2)` independent of `S~`. The
//! single-user scheme then runs with state `kappa S~` and noise `Z~ + eta`.

use serde::Serialize;

use crate::error::SchemeError;
use crate::params::{BlockConfig, DpcParams, NoisyObsParams};
use crate::sk_dpc::{self, BlockDraws, SchemeTrace, SkCoefficients};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalentChannel {
    pub kappa: f64,
    /// `Var[kappa S~] = kappa Q`.
    pub state_var_eff: f64,
    /// `Var[Z~] = kappa sigma_z2`.
    pub residual_var: f64,
    /// `kappa sigma_z2 + sigma2`.
    pub noise_var_eff: f64,
}

/// With `Q = 0` the decomposition is undefined; `kappa` is taken as 0.
pub fn make_equivalent(params: &NoisyObsParams) -> EquivalentChannel {
    let base = params.base();
    let q = base.q();
    let kappa = if q > 0.0 { q / (q + params.sigma_z2()) } else { 0.0 };
    let residual_var = kappa * params.sigma_z2();
    EquivalentChannel {
        kappa,
        state_var_eff: kappa * q,
        residual_var,
        noise_var_eff: residual_var + base.sigma2(),
    }
}

/// The single-user channel seen by the encoder after the decomposition.
pub fn equivalent_params(params: &NoisyObsParams) -> DpcParams {
    let eq = make_equivalent(params);
    DpcParams::new(params.base().p(), eq.state_var_eff, eq.noise_var_eff)
        .expect("equivalent channel inherits valid parameters")
}

/// `(E[S Y], E[Y^2])` at any `t >= 2`, for the true state `S`.
fn output_moments(params: &NoisyObsParams, gamma: f64) -> (f64, f64) {
    let base = params.base();
    let eq = make_equivalent(params);
    let p = base.p();
    let gain = sk_dpc::state_forward_gain(p, eq.state_var_eff, gamma);
    let known = (1.0 + gain) * eq.state_var_eff;
    let cross = known + eq.residual_var;
    let power = gamma * p + (1.0 + gain).powi(2) * eq.state_var_eff + eq.noise_var_eff;
    (cross, power)
}

/// Receiver gain `E[S_t Y_t] / E[Y_t^2]` targeting the true state.
pub fn noisy_state_gain(params: &NoisyObsParams, gamma: f64) -> f64 {
    let (cross, power) = output_moments(params, gamma);
    if power > 0.0 {
        cross / power
    } else {
        0.0
    }
}

/// Per-symbol MMSE `Q - E[SY]^2 / E[Y^2]` of the Y-only estimator, `t >= 2`.
///
/// This is what the scheme actually attains; compare with
/// [`crate::regions::noisy_boundary`].
pub fn noisy_scheme_distortion(params: &NoisyObsParams, gamma: f64) -> f64 {
    let (cross, power) = output_moments(params, gamma);
    let q = params.base().q();
    if power > 0.0 {
        q - cross * cross / power
    } else {
        q
    }
}

pub fn noisy_coefficients(params: &NoisyObsParams, gamma: f64, n: usize) -> Result<SkCoefficients, SchemeError> {
    sk_dpc::compute_coefficients(&equivalent_params(params), gamma, n)
}

/// One block. `draws.obs_noise` holds `Z`; an empty vector means `Z = 0`.
pub fn noisy_run_block(
    params: &NoisyObsParams,
    gamma: f64,
    block: &BlockConfig,
    w: u64,
    draws: &BlockDraws,
) -> Result<SchemeTrace, SchemeError> {
    let coeffs = match noisy_coefficients(params, gamma, block.n()) {
        Ok(c) => Some(c),
        Err(SchemeError::DegenerateSplit) => None,
        Err(e) => return Err(e),
    };
    noisy_run_block_with(params, gamma, coeffs.as_ref(), block.messages(), w, draws)
}

pub fn noisy_run_block_with(
    params: &NoisyObsParams,
    gamma: f64,
    coeffs: Option<&SkCoefficients>,
    m: u64,
    w: u64,
    draws: &BlockDraws,
) -> Result<SchemeTrace, SchemeError> {
    let n = draws.state.len();
    let z = &draws.obs_noise;
    if !z.is_empty() && z.len() != n {
        return Err(SchemeError::LengthMismatch { expected: n, got: z.len() });
    }
    let eq = make_equivalent(params);
    let tx_state: Vec<f64> = if z.is_empty() {
        draws.state.iter().map(|s| eq.kappa * s).collect()
    } else {
        draws.state.iter().zip(z).map(|(s, z)| eq.kappa * (s + z)).collect()
    };
    let gain = sk_dpc::state_forward_gain(params.base().p(), eq.state_var_eff, gamma);
    let run = sk_dpc::run_link(coeffs, gain, w, m, &tx_state, &draws.state, &draws.noise)?;
    let s_hat = sk_dpc::scale_after_first(&run.y, noisy_state_gain(params, gamma));
    Ok(SchemeTrace {
        x: run.x,
        y: run.y,
        theta_hat: run.theta_hat,
        s: draws.state.clone(),
        s_hat,
        theta: run.theta,
        w,
        w_hat: run.w_hat,
    })
}
