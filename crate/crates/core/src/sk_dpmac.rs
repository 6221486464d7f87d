//! Two-encoder feedback scheme for the dirty paper MAC with state estimation
//! at the receiver.
//!
//! Encoder `i` forwards the state with power `(1 - split_i) P_i` and runs an
//! Ozarow-style recursion with the remaining power. The receiver sees
//! `Y_t = G_{1,t} + G_{2,t} + lambda S_t + eta_t`. Slot 1 carries user 1's
//! message point, slot 2 user 2's; from slot 3 both encoders send scaled
//! versions of their current estimation errors, encoder 2 with a sign chosen
//! so the two contributions add coherently.

use serde::Serialize;

use crate::error::SchemeError;
use crate::params::{MacBlockConfig, MacParams};
use crate::sk_dpc::{finalize_decode, message_to_theta, state_forward_gain, BlockDraws};

/// How encoder 2 picks its sign from the previous error correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SignRule {
    /// `+1` when `rho >= 0`, `-1` otherwise.
    #[default]
    Aligned,
    /// `+1` when `rho >= 0`, `0` otherwise: encoder 2 falls silent.
    Literal,
}

impl SignRule {
    pub fn apply(self, rho: f64) -> f64 {
        match (self, rho >= 0.0) {
            (_, true) => 1.0,
            (SignRule::Aligned, false) => -1.0,
            (SignRule::Literal, false) => 0.0,
        }
    }
}

/// Precomputed tables, all indexed by time `t = 1..=n` through accessors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacSkCoefficients {
    pub n: usize,
    pub gamma: f64,
    pub beta: f64,
    /// Message powers `gamma P1`, `beta P2`.
    pub g1: f64,
    pub g2: f64,
    pub noise_var: f64,
    pub q: f64,
    pub lambda: f64,
    pub state_gain1: f64,
    pub state_gain2: f64,
    pub amp1: f64,
    pub amp2: f64,
    pub sign_rule: SignRule,
    mu1: Vec<f64>,
    mu2: Vec<f64>,
    alpha1: Vec<f64>,
    alpha2: Vec<f64>,
    rho: Vec<f64>,
    sign: Vec<f64>,
    residual_power: Vec<f64>,
}

impl MacSkCoefficients {
    /// Forward propagation of the 2x2 error covariance. A user with zero
    /// message power is carried along as silent.
    pub(crate) fn propagate(
        params: &MacParams,
        gamma: f64,
        beta: f64,
        n: usize,
        sign_rule: SignRule,
    ) -> Self {
        let (q, s2) = (params.q(), params.sigma2());
        let g1 = gamma * params.p1();
        let g2 = beta * params.p2();
        let state_gain1 = state_forward_gain(params.p1(), q, gamma);
        let state_gain2 = state_forward_gain(params.p2(), q, beta);
        let mut c = Self {
            n,
            gamma,
            beta,
            g1,
            g2,
            noise_var: s2,
            q,
            lambda: 1.0 + state_gain1 + state_gain2,
            state_gain1,
            state_gain2,
            amp1: (12.0 * g1).sqrt(),
            amp2: (12.0 * g2).sqrt(),
            sign_rule,
            mu1: vec![0.0; n],
            mu2: vec![0.0; n],
            alpha1: vec![0.0; n],
            alpha2: vec![0.0; n],
            rho: vec![0.0; n],
            sign: vec![0.0; n],
            residual_power: vec![0.0; n],
        };
        let on1 = g1 > 0.0;
        let on2 = g2 > 0.0;
        if n == 0 {
            return c;
        }
        if on1 {
            c.alpha1[0] = s2 / (12.0 * g1);
        }
        if n < 2 {
            return c;
        }
        c.alpha1[1] = c.alpha1[0];
        if on2 {
            c.alpha2[1] = s2 / (12.0 * g2);
        }
        // eps_{1,2} = eta_1 / amp1 and eps_{2,2} = eta_2 / amp2 are independent.
        c.rho[1] = 0.0;
        for t in 3..=n {
            let i = t - 1;
            let (a1, a2, rho) = (c.alpha1[i - 1], c.alpha2[i - 1], c.rho[i - 1]);
            let cov = rho * (a1 * a2).sqrt();
            let s = if on2 { sign_rule.apply(rho) } else { 0.0 };
            let k1 = if on1 { (g1 / a1).sqrt() } else { 0.0 };
            let k2 = if on2 { s * (g2 / a2).sqrt() } else { 0.0 };
            // Z_t = Y_t - lambda S_t = k1 eps_1 + k2 eps_2 + eta_t
            let energy = k1 * k1 * a1 + k2 * k2 * a2 + 2.0 * k1 * k2 * cov + s2;
            let e1 = k1 * a1 + k2 * cov;
            let e2 = k1 * cov + k2 * a2;
            let (m1, m2) = (e1 / energy, e2 / energy);
            c.sign[i] = s;
            c.residual_power[i] = energy;
            c.mu1[i] = if on1 { m1 } else { 0.0 };
            c.mu2[i] = if on2 { m2 } else { 0.0 };
            c.alpha1[i] = if on1 { a1 - e1 * m1 } else { 0.0 };
            c.alpha2[i] = if on2 { a2 - e2 * m2 } else { 0.0 };
            let new_cov = cov - e1 * e2 / energy;
            c.rho[i] = if on1 && on2 { new_cov / (c.alpha1[i] * c.alpha2[i]).sqrt() } else { 0.0 };
        }
        c
    }

    pub fn mu1(&self, t: usize) -> f64 {
        self.mu1[t - 1]
    }

    pub fn mu2(&self, t: usize) -> f64 {
        self.mu2[t - 1]
    }

    pub fn mu(&self, user: usize, t: usize) -> f64 {
        if user == 1 {
            self.mu1(t)
        } else {
            self.mu2(t)
        }
    }

    /// `Var[eps_{1,t}]`; zero for a silent user.
    pub fn alpha1(&self, t: usize) -> f64 {
        self.alpha1[t - 1]
    }

    /// `Var[eps_{2,t}]`, defined from `t = 2`.
    pub fn alpha2(&self, t: usize) -> f64 {
        self.alpha2[t - 1]
    }

    pub fn alpha(&self, user: usize, t: usize) -> f64 {
        if user == 1 {
            self.alpha1(t)
        } else {
            self.alpha2(t)
        }
    }

    /// Correlation coefficient of `(eps_{1,t}, eps_{2,t})`, defined from `t = 2`.
    pub fn rho(&self, t: usize) -> f64 {
        self.rho[t - 1]
    }

    pub fn rho_seq(&self) -> &[f64] {
        &self.rho
    }

    /// Sign applied to encoder 2's message part at time `t` (0 before `t = 3`).
    pub fn sign(&self, t: usize) -> f64 {
        self.sign[t - 1]
    }

    /// Correlation between `G_{1,t}` and `G_{2,t}`: `sign_t * rho_{t-1}`.
    pub fn input_correlation(&self, t: usize) -> f64 {
        if t < 3 {
            0.0
        } else {
            self.sign(t) * self.rho(t - 1)
        }
    }

    /// `E[(Y_t - lambda S_t)^2]` for `t >= 3`.
    pub fn residual_power(&self, t: usize) -> f64 {
        self.residual_power[t - 1]
    }

    /// Receiver gains `E[S_t Y_t] / E[Y_t^2]`; zero in the two message slots.
    pub fn estimator_gains(&self) -> Vec<f64> {
        (1..=self.n)
            .map(|t| {
                if t < 3 {
                    return 0.0;
                }
                let power = self.lambda * self.lambda * self.q + self.residual_power(t);
                self.lambda * self.q / power
            })
            .collect()
    }

    /// Exact expected `(1/n) sum_t E[(S_t - S_hat_t)^2]` at this blocklength.
    pub fn expected_distortion(&self) -> f64 {
        let q = self.q;
        let total: f64 = self
            .estimator_gains()
            .iter()
            .enumerate()
            .map(|(i, &c)| if i < 2 { q } else { q - c * self.lambda * q })
            .sum();
        total / self.n as f64
    }

    fn message_slot(&self, user: usize) -> usize {
        user
    }

    fn active(&self, user: usize) -> bool {
        if user == 1 {
            self.g1 > 0.0
        } else {
            self.g2 > 0.0
        }
    }

    fn amp(&self, user: usize) -> f64 {
        if user == 1 {
            self.amp1
        } else {
            self.amp2
        }
    }

    fn state_gain(&self, user: usize) -> f64 {
        if user == 1 {
            self.state_gain1
        } else {
            self.state_gain2
        }
    }

    fn message_power(&self, user: usize) -> f64 {
        if user == 1 {
            self.g1
        } else {
            self.g2
        }
    }
}

/// Coefficients for two active encoders.
pub fn mac_coefficients(
    params: &MacParams,
    gamma: f64,
    beta: f64,
    n: usize,
    sign_rule: SignRule,
) -> Result<MacSkCoefficients, SchemeError> {
    if !(gamma * params.p1() > 0.0 && beta * params.p2() > 0.0) {
        return Err(SchemeError::DegenerateSplit);
    }
    Ok(MacSkCoefficients::propagate(params, gamma, beta, n, sign_rule))
}

/// `O_i = lambda S_i / amp_i - lambda sum_{j>=3} mu_{i,j} S_j`, where slot
/// `i` is user `i`'s message slot.
pub fn mac_offset(user: usize, state: &[f64], coeffs: &MacSkCoefficients) -> Result<f64, SchemeError> {
    if user != 1 && user != 2 {
        return Err(SchemeError::UnknownUser(user));
    }
    if state.len() != coeffs.n {
        return Err(SchemeError::LengthMismatch { expected: coeffs.n, got: state.len() });
    }
    let tail: f64 = (3..=coeffs.n).map(|j| coeffs.mu(user, j) * state[j - 1]).sum();
    Ok(coeffs.lambda * state[user - 1] / coeffs.amp(user) - coeffs.lambda * tail)
}

/// One encoder's running state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacEncoderState {
    pub user: usize,
    pub theta: f64,
    pub offset: f64,
    pub epsilon: f64,
    pub t: usize,
}

impl MacEncoderState {
    pub fn new(user: usize, theta: f64, offset: f64) -> Self {
        Self { user, theta, offset, epsilon: 0.0, t: 1 }
    }
}

/// Channel input of one encoder at time `t`; `y_prev` is `Y_{t-1}` (ignored
/// at `t = 1`).
pub fn mac_encode_step(
    t: usize,
    enc: &mut MacEncoderState,
    y_prev: f64,
    state: &[f64],
    coeffs: &MacSkCoefficients,
) -> Result<f64, SchemeError> {
    let user = enc.user;
    if user != 1 && user != 2 {
        return Err(SchemeError::UnknownUser(user));
    }
    if t != enc.t || t > coeffs.n {
        return Err(SchemeError::OutOfOrderStep { expected: enc.t, got: t });
    }
    if state.len() != coeffs.n {
        return Err(SchemeError::LengthMismatch { expected: coeffs.n, got: state.len() });
    }
    enc.t += 1;
    let forward = coeffs.state_gain(user) * state[t - 1];
    if !coeffs.active(user) {
        return Ok(forward);
    }
    let slot = coeffs.message_slot(user);
    let amp = coeffs.amp(user);
    if t > 1 {
        let prev = t - 1;
        if prev == slot {
            enc.epsilon = (y_prev - amp * (enc.theta - enc.offset) - coeffs.lambda * state[prev - 1]) / amp;
        } else if prev > slot {
            enc.epsilon -= coeffs.mu(user, prev) * (y_prev - coeffs.lambda * state[prev - 1]);
        }
    }
    let x = if t == slot {
        amp * (enc.theta - enc.offset) + forward
    } else if t < 3 {
        forward
    } else {
        let sign = if user == 2 { coeffs.sign(t) } else { 1.0 };
        sign * (coeffs.message_power(user) / coeffs.alpha(user, t - 1)).sqrt() * enc.epsilon + forward
    };
    Ok(x)
}

/// Both users' running estimates `theta_hat_{i,t}` (0 before a user's
/// message slot).
pub fn mac_theta_estimates(y: &[f64], coeffs: &MacSkCoefficients) -> [Vec<f64>; 2] {
    let mut out = [Vec::with_capacity(y.len()), Vec::with_capacity(y.len())];
    for user in 1..=2usize {
        let est = &mut out[user - 1];
        let mut cur = 0.0;
        for (i, &yt) in y.iter().enumerate() {
            let t = i + 1;
            if coeffs.active(user) {
                if t == coeffs.message_slot(user) {
                    cur = yt / coeffs.amp(user);
                } else if t > coeffs.message_slot(user) {
                    cur -= coeffs.mu(user, t) * yt;
                }
            }
            est.push(cur);
        }
    }
    out
}

/// Nearest-point decisions on the final estimates.
pub fn mac_decode(y: &[f64], coeffs: &MacSkCoefficients, m1: u64, m2: u64) -> (u64, u64) {
    let [e1, e2] = mac_theta_estimates(y, coeffs);
    (
        finalize_decode(*e1.last().unwrap_or(&0.0), m1),
        finalize_decode(*e2.last().unwrap_or(&0.0), m2),
    )
}

/// `S_hat_t = c_t Y_t` with `c_t` from the propagated second moments;
/// `S_hat_1 = S_hat_2 = 0`.
pub fn mac_estimate_state(y: &[f64], coeffs: &MacSkCoefficients) -> Vec<f64> {
    y.iter().zip(coeffs.estimator_gains()).map(|(v, c)| c * v).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacSchemeTrace {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y: Vec<f64>,
    pub theta1_hat: Vec<f64>,
    pub theta2_hat: Vec<f64>,
    pub s: Vec<f64>,
    pub s_hat: Vec<f64>,
    pub theta: [f64; 2],
    pub w: [u64; 2],
    pub w_hat: [u64; 2],
}

impl MacSchemeTrace {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn decoded(&self) -> bool {
        self.w == self.w_hat
    }

    pub fn distortion(&self) -> f64 {
        let sum: f64 = self.s.iter().zip(&self.s_hat).map(|(s, e)| (s - e) * (s - e)).sum();
        sum / self.n() as f64
    }
}

/// One block for messages `(w1, w2)`. Zero message power on either side is
/// allowed: that encoder only forwards the state.
pub fn mac_run_block(
    params: &MacParams,
    gamma: f64,
    beta: f64,
    block: &MacBlockConfig,
    w: [u64; 2],
    draws: &BlockDraws,
    sign_rule: SignRule,
) -> Result<MacSchemeTrace, SchemeError> {
    let coeffs = MacSkCoefficients::propagate(params, gamma, beta, block.n(), sign_rule);
    mac_run_block_with(&coeffs, block.messages(), w, draws)
}

pub fn mac_run_block_with(
    coeffs: &MacSkCoefficients,
    m: [u64; 2],
    w: [u64; 2],
    draws: &BlockDraws,
) -> Result<MacSchemeTrace, SchemeError> {
    let n = coeffs.n;
    for len in [draws.state.len(), draws.noise.len()] {
        if len != n {
            return Err(SchemeError::LengthMismatch { expected: n, got: len });
        }
    }
    let s = &draws.state;
    let theta = [message_to_theta(w[0], m[0])?, message_to_theta(w[1], m[1])?];
    let offset = |user: usize| -> Result<f64, SchemeError> {
        if coeffs.active(user) {
            mac_offset(user, s, coeffs)
        } else {
            Ok(0.0)
        }
    };
    let mut enc1 = MacEncoderState::new(1, theta[0], offset(1)?);
    let mut enc2 = MacEncoderState::new(2, theta[1], offset(2)?);
    let (mut x1, mut x2, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let mut y_prev = 0.0;
    for t in 1..=n {
        let a = mac_encode_step(t, &mut enc1, y_prev, s, coeffs)?;
        let b = mac_encode_step(t, &mut enc2, y_prev, s, coeffs)?;
        let yt = a + b + s[t - 1] + draws.noise[t - 1];
        x1.push(a);
        x2.push(b);
        y.push(yt);
        y_prev = yt;
    }
    let [theta1_hat, theta2_hat] = mac_theta_estimates(&y, coeffs);
    let w_hat = [
        finalize_decode(*theta1_hat.last().unwrap_or(&0.0), m[0]),
        finalize_decode(*theta2_hat.last().unwrap_or(&0.0), m[1]),
    ];
    let s_hat = mac_estimate_state(&y, coeffs);
    Ok(MacSchemeTrace { x1, x2, y, theta1_hat, theta2_hat, s: s.clone(), s_hat, theta, w, w_hat })
}
