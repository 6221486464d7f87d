//! Single-user feedback scheme for the dirty paper channel with state
//! estimation at the receiver.
//!
//! The input is split into a state-forwarding part `sqrt((1-gamma) P / Q) S_t`
//! and a message part `G_t` of power `gamma P`. `G_t` runs a
//! Schalkwijk–Kailath recursion on the effective channel
//! `Y_t - omega S_t = G_t + eta_t`, where `omega = 1 + sqrt((1-gamma) P / Q)`.
//! A state-dependent offset inserted at time 1 cancels every state term in the
//! receiver's running estimate by time `n`.

use serde::Serialize;

use crate::error::SchemeError;
use crate::params::{BlockConfig, DpcParams};

/// Message point of `w` in a set of `m`: `-1/2 + (2w - 1) / (2m)`.
pub fn message_to_theta(w: u64, m: u64) -> Result<f64, SchemeError> {
    if w == 0 || w > m {
        return Err(SchemeError::MessageOutOfRange { w, m });
    }
    Ok(-0.5 + (2 * w - 1) as f64 / (2 * m) as f64)
}

/// Nearest message point; ties go to the smaller index.
pub fn finalize_decode(theta_hat: f64, m: u64) -> u64 {
    if m <= 1 || !theta_hat.is_finite() {
        return 1;
    }
    let point = |w: u64| -0.5 + (2 * w - 1) as f64 / (2 * m) as f64;
    let guess = ((theta_hat + 0.5) * m as f64 + 0.5).floor();
    let lo = guess.clamp(1.0, m as f64) as u64;
    let hi = (lo + 1).min(m);
    let below = (lo - 1).max(1);
    [below, lo, hi]
        .into_iter()
        .min_by(|&a, &b| {
            (theta_hat - point(a)).abs().total_cmp(&(theta_hat - point(b)).abs()).then(a.cmp(&b))
        })
        .unwrap_or(1)
}

/// Gain applied to the known state so that it arrives with power `(1-gamma) P`.
/// Zero when there is no state to forward.
pub fn state_forward_gain(p: f64, q: f64, gamma: f64) -> f64 {
    if q > 0.0 {
        ((1.0 - gamma) * p / q).sqrt()
    } else {
        0.0
    }
}

/// Deterministic coefficient tables of the recursion.
///
/// `mu(t)` and `alpha(t)` are 1-indexed by time. `mu(1)` is zero (the first
/// slot carries the message point, there is no update).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkCoefficients {
    pub n: usize,
    pub gamma: f64,
    /// `gamma * P`.
    pub message_power: f64,
    /// Variance of the noise the recursion fights.
    pub noise_var: f64,
    pub omega: f64,
    pub state_gain: f64,
    /// `sqrt(12 gamma P)`.
    pub amp1: f64,
    mu: Vec<f64>,
    alpha: Vec<f64>,
}

impl SkCoefficients {
    /// Runs the MMSE recursion for message power `message_power` against
    /// noise `noise_var`. The state terms only enter through `omega`, which
    /// the caller supplies.
    pub(crate) fn propagate(
        message_power: f64,
        noise_var: f64,
        state_gain: f64,
        omega: f64,
        gamma: f64,
        n: usize,
    ) -> Result<Self, SchemeError> {
        if message_power.is_nan() || message_power <= 0.0 {
            return Err(SchemeError::DegenerateSplit);
        }
        let mut mu = vec![0.0; n];
        let mut alpha = vec![0.0; n];
        alpha[0] = noise_var / (12.0 * message_power);
        for t in 1..n {
            let prev = alpha[t - 1];
            // Y_t - omega S_t = G_t + eta_t with G_t = sqrt(gP / alpha_{t-1}) eps_{t-1}.
            let cross = (message_power / prev).sqrt() * prev;
            let energy = message_power + noise_var;
            mu[t] = cross / energy;
            alpha[t] = prev - cross * mu[t];
        }
        Ok(Self {
            n,
            gamma,
            message_power,
            noise_var,
            omega,
            state_gain,
            amp1: (12.0 * message_power).sqrt(),
            mu,
            alpha,
        })
    }

    pub fn mu(&self, t: usize) -> f64 {
        self.mu[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    /// `mu_2 .. mu_n`.
    pub fn mu_seq(&self) -> &[f64] {
        &self.mu[1..]
    }

    /// `alpha_1 .. alpha_n`.
    pub fn alpha_seq(&self) -> &[f64] {
        &self.alpha
    }

    /// Closed-form `E[X_1^2]` for a uniform message point of variance 1/12.
    pub fn first_symbol_power(&self, q: f64) -> f64 {
        self.first_symbol_power_with(q, 1.0 / 12.0)
    }

    /// `E[X_1^2]` when the message point has variance `theta_var`. For `m`
    /// equiprobable points that is `(1 - 1/m^2) / 12`.
    pub fn first_symbol_power_with(&self, q: f64, theta_var: f64) -> f64 {
        let tail: f64 = self.mu_seq().iter().map(|m| m * m).sum();
        12.0 * self.message_power * theta_var
            + (1.0 + 12.0 * self.message_power * self.omega * self.omega * tail) * q
    }
}

/// Variance of the message point when `m` points are equiprobable.
pub fn theta_variance(m: u64) -> f64 {
    let m = m.max(1) as f64;
    (1.0 - 1.0 / (m * m)) / 12.0
}

pub fn compute_coefficients(params: &DpcParams, gamma: f64, n: usize) -> Result<SkCoefficients, SchemeError> {
    let gain = state_forward_gain(params.p(), params.q(), gamma);
    SkCoefficients::propagate(gamma * params.p(), params.sigma2(), gain, 1.0 + gain, gamma, n)
}

/// `O = omega S_1 / sqrt(12 gamma P) - omega * sum_{i>=2} mu_i S_i`.
pub fn compute_offset(state: &[f64], coeffs: &SkCoefficients) -> Result<f64, SchemeError> {
    if state.len() != coeffs.n {
        return Err(SchemeError::LengthMismatch { expected: coeffs.n, got: state.len() });
    }
    let tail: f64 = state[1..].iter().zip(coeffs.mu_seq()).map(|(s, m)| s * m).sum();
    Ok(coeffs.omega * state[0] / coeffs.amp1 - coeffs.omega * tail)
}

/// What the transmitter carries between slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderState {
    pub theta: f64,
    pub offset: f64,
    /// `eps_{t-1}` after the most recent step; zero before time 2.
    pub epsilon: f64,
    /// Next time index the encoder expects.
    pub t: usize,
}

impl EncoderState {
    pub fn new(theta: f64, offset: f64) -> Self {
        Self { theta, offset, epsilon: 0.0, t: 1 }
    }
}

/// Channel input at time `t`. `y_prev` is the fed-back `Y_{t-1}` and is
/// ignored at `t = 1`.
pub fn encode_step(
    t: usize,
    enc: &mut EncoderState,
    y_prev: f64,
    state: &[f64],
    coeffs: &SkCoefficients,
) -> Result<f64, SchemeError> {
    if t != enc.t || t > coeffs.n {
        return Err(SchemeError::OutOfOrderStep { expected: enc.t, got: t });
    }
    if state.len() != coeffs.n {
        return Err(SchemeError::LengthMismatch { expected: coeffs.n, got: state.len() });
    }
    let forward = coeffs.state_gain * state[t - 1];
    let x = if t == 1 {
        coeffs.amp1 * (enc.theta - enc.offset) + forward
    } else {
        enc.epsilon = if t == 2 {
            // Everything in Y_1 except eta_1 is known to the transmitter.
            (y_prev - coeffs.amp1 * (enc.theta - enc.offset) - coeffs.omega * state[0]) / coeffs.amp1
        } else {
            enc.epsilon - coeffs.mu(t - 1) * (y_prev - coeffs.omega * state[t - 2])
        };
        (coeffs.message_power / coeffs.alpha(t - 1)).sqrt() * enc.epsilon + forward
    };
    enc.t += 1;
    Ok(x)
}

/// `theta_hat_t = theta_hat_{t-1} - mu_t Y_t`.
pub fn decode_update(theta_hat_prev: f64, y: f64, mu: f64) -> f64 {
    theta_hat_prev - mu * y
}

/// `E[S_t Y_t] / E[Y_t^2]` for `t >= 2`.
pub fn state_estimate_gain(params: &DpcParams, gamma: f64) -> f64 {
    let (p, q, s2) = (params.p(), params.q(), params.sigma2());
    let coherent = q.sqrt() + ((1.0 - gamma) * p).sqrt();
    q.sqrt() * coherent / (coherent * coherent + gamma * p + s2)
}

/// Linear MMSE state estimates from single outputs; `S_hat_1 = 0`.
pub fn estimate_state(y: &[f64], params: &DpcParams, gamma: f64) -> Vec<f64> {
    scale_after_first(y, state_estimate_gain(params, gamma))
}

pub(crate) fn scale_after_first(y: &[f64], gain: f64) -> Vec<f64> {
    y.iter().enumerate().map(|(i, v)| if i == 0 { 0.0 } else { gain * v }).collect()
}

/// Randomness consumed by one block. `obs_noise` is only read by the noisy
/// observation wrapper and may be empty otherwise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockDraws {
    pub state: Vec<f64>,
    pub noise: Vec<f64>,
    pub obs_noise: Vec<f64>,
}

impl BlockDraws {
    pub fn zeros(n: usize) -> Self {
        Self { state: vec![0.0; n], noise: vec![0.0; n], obs_noise: vec![0.0; n] }
    }
}

/// Everything observable in one block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeTrace {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub s: Vec<f64>,
    pub s_hat: Vec<f64>,
    pub theta: f64,
    pub w: u64,
    pub w_hat: u64,
}

impl SchemeTrace {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn decoded(&self) -> bool {
        self.w == self.w_hat
    }

    /// `(1/n) sum_t (S_t - S_hat_t)^2`.
    pub fn distortion(&self) -> f64 {
        let sum: f64 = self.s.iter().zip(&self.s_hat).map(|(s, e)| (s - e) * (s - e)).sum();
        sum / self.n() as f64
    }

    /// `X_t^2`.
    pub fn powers(&self) -> impl Iterator<Item = f64> + '_ {
        self.x.iter().map(|x| x * x)
    }
}

pub(crate) struct LinkRun {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub theta: f64,
    pub w_hat: u64,
}

/// Drives encoder and decoder over the physical channel
/// `Y_t = X_t + S_t + eta_t`. The encoder works from `tx_state`, which is `S`
/// itself unless the transmitter only sees a noisy copy.
pub(crate) fn run_link(
    coeffs: Option<&SkCoefficients>,
    state_gain: f64,
    w: u64,
    m: u64,
    tx_state: &[f64],
    state: &[f64],
    noise: &[f64],
) -> Result<LinkRun, SchemeError> {
    let n = state.len();
    for len in [tx_state.len(), noise.len()] {
        if len != n {
            return Err(SchemeError::LengthMismatch { expected: n, got: len });
        }
    }
    let theta = message_to_theta(w, m)?;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut theta_hat = Vec::with_capacity(n);
    match coeffs {
        Some(c) => {
            if c.n != n {
                return Err(SchemeError::LengthMismatch { expected: c.n, got: n });
            }
            let mut enc = EncoderState::new(theta, compute_offset(tx_state, c)?);
            let mut y_prev = 0.0;
            for t in 1..=n {
                let xt = encode_step(t, &mut enc, y_prev, tx_state, c)?;
                let yt = xt + state[t - 1] + noise[t - 1];
                let est = match theta_hat.last() {
                    None => yt / c.amp1,
                    Some(&prev) => decode_update(prev, yt, c.mu(t)),
                };
                x.push(xt);
                y.push(yt);
                theta_hat.push(est);
                y_prev = yt;
            }
        }
        None => {
            // No message power: forward the state, receiver learns nothing about W.
            for t in 0..n {
                let xt = state_gain * tx_state[t];
                x.push(xt);
                y.push(xt + state[t] + noise[t]);
                theta_hat.push(0.0);
            }
        }
    }
    let w_hat = finalize_decode(*theta_hat.last().unwrap_or(&0.0), m);
    Ok(LinkRun { x, y, theta_hat, theta, w_hat })
}

/// One block of the single-user scheme for message `w`.
pub fn run_block(
    params: &DpcParams,
    gamma: f64,
    block: &BlockConfig,
    w: u64,
    draws: &BlockDraws,
) -> Result<SchemeTrace, SchemeError> {
    let coeffs = match compute_coefficients(params, gamma, block.n()) {
        Ok(c) => Some(c),
        Err(SchemeError::DegenerateSplit) => None,
        Err(e) => return Err(e),
    };
    run_block_with(params, gamma, coeffs.as_ref(), block.messages(), w, draws)
}

/// [`run_block`] with precomputed coefficients (`None` for a zero message
/// power).
pub fn run_block_with(
    params: &DpcParams,
    gamma: f64,
    coeffs: Option<&SkCoefficients>,
    m: u64,
    w: u64,
    draws: &BlockDraws,
) -> Result<SchemeTrace, SchemeError> {
    let gain = state_forward_gain(params.p(), params.q(), gamma);
    let run = run_link(coeffs, gain, w, m, &draws.state, &draws.state, &draws.noise)?;
    let s_hat = estimate_state(&run.y, params, gamma);
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

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params() -> DpcParams {
        DpcParams::new(10.0, 10.0, 5.0).unwrap()
    }

    #[test]
    fn theta_mapping() {
        assert_eq!(message_to_theta(1, 4).unwrap(), -0.375);
        assert_eq!(message_to_theta(4, 4).unwrap(), 0.375);
        assert_eq!(message_to_theta(1, 1).unwrap(), 0.0);
        assert_eq!(message_to_theta(0, 4), Err(SchemeError::MessageOutOfRange { w: 0, m: 4 }));
        assert_eq!(message_to_theta(5, 4), Err(SchemeError::MessageOutOfRange { w: 5, m: 4 }));
    }

    #[test]
    fn nearest_point_decisions() {
        for m in [1u64, 2, 4, 7, 100] {
            for w in 1..=m {
                assert_eq!(finalize_decode(message_to_theta(w, m).unwrap(), m), w);
            }
        }
        assert_eq!(finalize_decode(-0.37, 4), 1);
        assert_eq!(finalize_decode(-0.25, 4), 1);
        assert_eq!(finalize_decode(0.0, 4), 2);
        assert_eq!(finalize_decode(5.0, 4), 4);
        assert_eq!(finalize_decode(-5.0, 4), 1);
        assert_eq!(finalize_decode(f64::NAN, 4), 1);
    }

    #[test]
    fn coefficient_ratios() {
        // gamma P = sigma2 halves the error variance each step.
        let p = DpcParams::new(4.0, 1.0, 2.0).unwrap();
        let c = compute_coefficients(&p, 0.5, 20).unwrap();
        assert_relative_eq!(c.alpha(1), 1.0 / 12.0, max_relative = 1e-15);
        for t in 2..=20 {
            assert_relative_eq!(c.alpha(t) / c.alpha(t - 1), 0.5, max_relative = 1e-13);
        }
        let c = compute_coefficients(&params(), 0.3, 30).unwrap();
        let ratio = 5.0 / (3.0 + 5.0);
        assert_relative_eq!(c.alpha(30), c.alpha(1) * f64::powi(ratio, 29), max_relative = 1e-12);
        for w in c.alpha_seq().windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(c.mu_seq().iter().all(|&m| m > 0.0));
    }

    #[test]
    fn two_slot_coefficients() {
        let c = compute_coefficients(&params(), 0.5, 2).unwrap();
        assert_eq!(c.mu_seq().len(), 1);
        assert_relative_eq!(c.mu(2), (5.0 * c.alpha(1)).sqrt() / 10.0, max_relative = 1e-15);
        assert_eq!(compute_coefficients(&params(), 0.0, 5), Err(SchemeError::DegenerateSplit));
    }

    #[test]
    fn offset_formula() {
        let c = compute_coefficients(&params(), 0.5, 2).unwrap();
        assert_eq!(compute_offset(&[0.0, 0.0], &c).unwrap(), 0.0);
        let (s1, s2) = (0.7, -1.3);
        let expected = c.omega * s1 / c.amp1 - c.omega * c.mu(2) * s2;
        assert_relative_eq!(compute_offset(&[s1, s2], &c).unwrap(), expected, max_relative = 1e-15);
        assert!(matches!(compute_offset(&[1.0], &c), Err(SchemeError::LengthMismatch { .. })));
    }

    #[test]
    fn first_estimate_carries_tail_offset() {
        let c = compute_coefficients(&params(), 0.5, 6).unwrap();
        let s = [0.3, -1.1, 2.0, 0.4, -0.9, 1.7];
        let eta1 = 0.83;
        let mut noise = vec![0.0; 6];
        noise[0] = eta1;
        let theta = message_to_theta(3, 8).unwrap();
        let run = run_link(Some(&c), c.state_gain, 3, 8, &s, &s, &noise).unwrap();
        let tail: f64 = (2..=6).map(|i| c.mu(i) * s[i - 1]).sum();
        let expected = theta + c.omega * tail + eta1 / c.amp1;
        assert_relative_eq!(run.theta_hat[0], expected, max_relative = 1e-12);
    }

    #[test]
    fn noiseless_stateless_collapse() {
        let p = DpcParams::new(3.0, 2.0, 1.0).unwrap();
        let c = compute_coefficients(&p, 1.0, 8).unwrap();
        let theta = message_to_theta(2, 5).unwrap();
        let mut enc = EncoderState::new(theta, 0.0);
        let s = vec![0.0; 8];
        let mut y_prev = 0.0;
        for t in 1..=8 {
            let x = encode_step(t, &mut enc, y_prev, &s, &c).unwrap();
            if t == 1 {
                assert_relative_eq!(x, (12.0f64 * 3.0).sqrt() * theta, max_relative = 1e-15);
            } else {
                assert_eq!(enc.epsilon, 0.0);
                assert_eq!(x, 0.0);
            }
            y_prev = x;
        }
    }

    #[test]
    fn encoder_rejects_skipped_steps() {
        let c = compute_coefficients(&params(), 0.5, 4).unwrap();
        let mut enc = EncoderState::new(0.0, 0.0);
        let s = vec![0.0; 4];
        assert_eq!(
            encode_step(2, &mut enc, 0.0, &s, &c),
            Err(SchemeError::OutOfOrderStep { expected: 1, got: 2 })
        );
    }

    #[test]
    fn decoder_update_rule() {
        assert_eq!(decode_update(0.25, 3.0, 0.0), 0.25);
        assert_eq!(decode_update(0.25, 2.0, 0.125), 0.0);
    }

    #[test]
    fn estimator_gain() {
        let p = params();
        let c = state_estimate_gain(&p, 0.5);
        let (a, b) = (10f64.sqrt(), 5f64.sqrt());
        assert_relative_eq!(c, a * (a + b) / ((a + b) * (a + b) + 10.0), max_relative = 1e-15);
        assert!((c - 0.43613).abs() < 5e-6);
        let stateless = DpcParams::new(10.0, 0.0, 5.0).unwrap();
        let est = estimate_state(&[1.0, 2.0, 3.0], &stateless, 0.5);
        assert!(est.iter().all(|&v| v == 0.0));
        assert_eq!(estimate_state(&[1.0, 2.0], &p, 0.5)[0], 0.0);
    }

    #[test]
    fn zero_noise_decodes_every_message() {
        let p = params();
        let block = BlockConfig::with_messages(12, 16);
        let s: Vec<f64> = (0..12).map(|i| (i as f64 * 0.77).sin() * 3.0).collect();
        let draws = BlockDraws { state: s, noise: vec![0.0; 12], obs_noise: vec![] };
        for w in 1..=16 {
            let tr = run_block(&p, 0.5, &block, w, &draws).unwrap();
            assert!(tr.decoded(), "w={w}");
            assert!((tr.theta_hat[11] - tr.theta).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_noise_leaves_only_state_forwarding() {
        let p = params();
        let gamma = 0.4;
        let block = BlockConfig::with_messages(10, 32);
        let s: Vec<f64> = (0..10).map(|i| (i as f64).cos() * 2.0).collect();
        let draws = BlockDraws { state: s.clone(), noise: vec![0.0; 10], obs_noise: vec![] };
        let tr = run_block(&p, gamma, &block, 7, &draws).unwrap();
        let gain = (0.6f64 * 10.0 / 10.0).sqrt();
        for t in 1..10 {
            assert!((tr.x[t] - gain * s[t]).abs() < 1e-9, "t={}", t + 1);
        }
    }

    #[test]
    fn no_message_power_path() {
        let p = params();
        let block = BlockConfig::new(5, 0.0, 2).unwrap();
        let draws = BlockDraws {
            state: vec![1.0, -2.0, 0.5, 0.0, 3.0],
            noise: vec![0.1, 0.2, -0.3, 0.0, 0.4],
            obs_noise: vec![],
        };
        let tr = run_block(&p, 0.0, &block, 1, &draws).unwrap();
        for t in 0..5 {
            assert_relative_eq!(tr.x[t], draws.state[t], max_relative = 1e-15);
        }
        assert!(tr.decoded());
        assert_eq!(tr.s_hat[0], 0.0);
        assert!(tr.distortion() > 0.0);
    }
}
