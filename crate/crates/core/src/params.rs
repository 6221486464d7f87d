//! Validated parameter containers shared by every scheme and region calculator.
//!
//! All quantities are linear-scale powers and variances. Rates are in bits per
//! channel use.

use serde::{Deserialize, Serialize};

use crate::error::ParamError;
use crate::regions;

/// Largest `n * R` accepted. Message points are spaced `1/M` apart on the
/// unit interval and must stay well above double-precision resolution.
pub const MAX_MESSAGE_BITS: f64 = 48.0;

fn check_power(field: &'static str, value: f64) -> Result<f64, ParamError> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(ParamError::PowerOutOfRange { field, value })
    }
}

fn check_variance(field: &'static str, value: f64, strict: bool) -> Result<f64, ParamError> {
    let ok = value.is_finite() && if strict { value > 0.0 } else { value >= 0.0 };
    if ok {
        Ok(value)
    } else {
        Err(ParamError::NegativeVariance { field, value })
    }
}

fn check_split(field: &'static str, value: f64) -> Result<f64, ParamError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ParamError::SplitOutOfRange { field, value })
    }
}

/// Single-user dirty paper channel: input power `P`, state variance `Q`,
/// channel noise variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DpcParams {
    p: f64,
    q: f64,
    sigma2: f64,
}

impl DpcParams {
    pub fn new(p: f64, q: f64, sigma2: f64) -> Result<Self, ParamError> {
        Ok(Self {
            p: check_power("P", p)?,
            q: check_variance("Q", q, false)?,
            sigma2: check_variance("sigma2", sigma2, true)?,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

/// Two-encoder dirty paper MAC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacParams {
    p1: f64,
    p2: f64,
    q: f64,
    sigma2: f64,
}

impl MacParams {
    pub fn new(p1: f64, p2: f64, q: f64, sigma2: f64) -> Result<Self, ParamError> {
        Ok(Self {
            p1: check_power("P1", p1)?,
            p2: check_power("P2", p2)?,
            q: check_variance("Q", q, false)?,
            sigma2: check_variance("sigma2", sigma2, true)?,
        })
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

/// Single-user channel where the transmitter only sees `S + Z`,
/// `Z ~ N(0, sigma_z2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoisyObsParams {
    base: DpcParams,
    sigma_z2: f64,
}

impl NoisyObsParams {
    pub fn new(base: DpcParams, sigma_z2: f64) -> Result<Self, ParamError> {
        Ok(Self {
            base,
            sigma_z2: check_variance("sigma_z2", sigma_z2, false)?,
        })
    }

    pub fn base(&self) -> &DpcParams {
        &self.base
    }

    pub fn sigma_z2(&self) -> f64 {
        self.sigma_z2
    }
}

/// Fraction of each encoder's power spent on the message; the remainder
/// forwards the state. `beta` is only present for the MAC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerSplit {
    gamma: f64,
    beta: Option<f64>,
}

impl PowerSplit {
    pub fn new(gamma: f64) -> Result<Self, ParamError> {
        Ok(Self { gamma: check_split("gamma", gamma)?, beta: None })
    }

    pub fn mac(gamma: f64, beta: f64) -> Result<Self, ParamError> {
        Ok(Self {
            gamma: check_split("gamma", gamma)?,
            beta: Some(check_split("beta", beta)?),
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Encoder-2 split; `1.0` when none was given.
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(1.0)
    }
}

/// `M = round(2^(n R))`.
pub fn message_count(n: usize, rate: f64) -> Result<u64, ParamError> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(ParamError::InvalidRate { field: "rate", value: rate });
    }
    let bits = n as f64 * rate;
    if bits > MAX_MESSAGE_BITS {
        return Err(ParamError::MessageSetTooLarge { bits, max: MAX_MESSAGE_BITS });
    }
    Ok((bits.exp2().round() as u64).max(1))
}

/// Blocklength, nominal rate and the derived message-set size for one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockConfig {
    n: usize,
    rate: f64,
    messages: u64,
}

impl BlockConfig {
    pub const MIN_N_SINGLE: usize = 2;
    pub const MIN_N_MAC: usize = 3;

    pub fn new(n: usize, rate: f64, min_n: usize) -> Result<Self, ParamError> {
        if n < min_n {
            return Err(ParamError::BlocklengthTooSmall { n: n as u64, min: min_n as u64 });
        }
        let messages = message_count(n, rate)?;
        Ok(Self { n, rate, messages })
    }

    /// `R = fraction * cap`, then `M` as in [`BlockConfig::new`].
    pub fn from_fraction(n: usize, fraction: f64, cap: f64, min_n: usize) -> Result<Self, ParamError> {
        if !(fraction.is_finite() && fraction >= 0.0) {
            return Err(ParamError::InvalidRate { field: "rate_fraction", value: fraction });
        }
        Self::new(n, fraction * cap, min_n)
    }

    /// Fixed message count, bypassing the rate. Used by exhaustive tests.
    pub fn with_messages(n: usize, messages: u64) -> Self {
        let messages = messages.max(1);
        Self { n, rate: (messages as f64).log2() / n as f64, messages }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn messages(&self) -> u64 {
        self.messages
    }
}

/// Common blocklength plus one rate per encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MacBlockConfig {
    n: usize,
    rate: [f64; 2],
    messages: [u64; 2],
}

impl MacBlockConfig {
    pub fn new(n: usize, rate1: f64, rate2: f64) -> Result<Self, ParamError> {
        let b1 = BlockConfig::new(n, rate1, BlockConfig::MIN_N_MAC)?;
        let b2 = BlockConfig::new(n, rate2, BlockConfig::MIN_N_MAC)?;
        Ok(Self { n, rate: [b1.rate, b2.rate], messages: [b1.messages, b2.messages] })
    }

    pub fn with_messages(n: usize, m1: u64, m2: u64) -> Self {
        let b1 = BlockConfig::with_messages(n, m1);
        let b2 = BlockConfig::with_messages(n, m2);
        Self { n, rate: [b1.rate, b2.rate], messages: [b1.messages, b2.messages] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rate(&self) -> [f64; 2] {
        self.rate
    }

    pub fn messages(&self) -> [u64; 2] {
        self.messages
    }
}

/// Flat key/value config document. Keys match the JSON config format exactly.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(rename = "P", skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(rename = "P1", skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    #[serde(rename = "P2", skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
    #[serde(rename = "Q", skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_z2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Which channel a config describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Dpc,
    Mac,
    Noisy,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Dpc => "dpc",
            Scheme::Mac => "mac",
            Scheme::Noisy => "noisy",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum Setup {
    Dpc { params: DpcParams, split: PowerSplit, block: BlockConfig },
    Mac { params: MacParams, split: PowerSplit, block: MacBlockConfig },
    Noisy { params: NoisyObsParams, split: PowerSplit, block: BlockConfig },
}

impl Setup {
    pub fn scheme(&self) -> Scheme {
        match self {
            Setup::Dpc { .. } => Scheme::Dpc,
            Setup::Mac { .. } => Scheme::Mac,
            Setup::Noisy { .. } => Scheme::Noisy,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Setup::Dpc { block, .. } | Setup::Noisy { block, .. } => block.n(),
            Setup::Mac { block, .. } => block.n(),
        }
    }

    pub fn split(&self) -> PowerSplit {
        match self {
            Setup::Dpc { split, .. } | Setup::Mac { split, .. } | Setup::Noisy { split, .. } => *split,
        }
    }
}

/// A fully validated experiment description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidatedConfig {
    pub setup: Setup,
    pub trials: u64,
    pub seed: u64,
}

pub const DEFAULT_TRIALS: u64 = 1000;
pub const DEFAULT_SEED: u64 = 1;

fn need(v: Option<f64>, key: &'static str) -> Result<f64, ParamError> {
    v.ok_or(ParamError::Missing(key))
}

fn resolve_block(raw: &RawConfig, min_n: usize, cap: impl FnOnce() -> f64) -> Result<BlockConfig, ParamError> {
    let n = raw.n.ok_or(ParamError::Missing("n"))?;
    let n = usize::try_from(n).map_err(|_| ParamError::BlocklengthTooSmall { n, min: min_n as u64 })?;
    match (raw.rate, raw.rate_fraction) {
        (Some(_), Some(_)) => Err(ParamError::ConflictingRate),
        (Some(rate), None) => BlockConfig::new(n, rate, min_n),
        (None, Some(frac)) => BlockConfig::from_fraction(n, frac, cap(), min_n),
        (None, None) => BlockConfig::new(n, 0.0, min_n),
    }
}

/// Turns a raw key/value document into validated containers for `scheme`.
///
/// Missing `gamma`/`beta` default to 1, missing rate to 0 (a single
/// message), missing `trials`/`seed` to [`DEFAULT_TRIALS`]/[`DEFAULT_SEED`].
/// For the MAC, `rate` applies to both users and `rate_fraction` scales each
/// user's individual cap at the limiting correlation of the feedback scheme.
pub fn validate(raw: &RawConfig, scheme: Scheme) -> Result<ValidatedConfig, ParamError> {
    let gamma = raw.gamma.unwrap_or(1.0);
    let setup = match scheme {
        Scheme::Dpc | Scheme::Noisy => {
            let base = DpcParams::new(need(raw.p, "P")?, need(raw.q, "Q")?, need(raw.sigma2, "sigma2")?)?;
            let split = PowerSplit::new(gamma)?;
            if scheme == Scheme::Dpc {
                let block = resolve_block(raw, BlockConfig::MIN_N_SINGLE, || {
                    regions::dpc_fb_boundary(&base, gamma).rate
                })?;
                Setup::Dpc { params: base, split, block }
            } else {
                let params = NoisyObsParams::new(base, raw.sigma_z2.unwrap_or(0.0))?;
                let block = resolve_block(raw, BlockConfig::MIN_N_SINGLE, || {
                    regions::noisy_boundary(&params, gamma).rate
                })?;
                Setup::Noisy { params, split, block }
            }
        }
        Scheme::Mac => {
            let params = MacParams::new(
                need(raw.p1, "P1")?,
                need(raw.p2, "P2")?,
                need(raw.q, "Q")?,
                need(raw.sigma2, "sigma2")?,
            )?;
            let split = PowerSplit::mac(gamma, raw.beta.unwrap_or(1.0))?;
            let caps = regions::mac_fb_operating_point(&params, split.gamma(), split.beta());
            let b1 = resolve_block(raw, BlockConfig::MIN_N_MAC, || caps.r1_max)?;
            let b2 = resolve_block(raw, BlockConfig::MIN_N_MAC, || caps.r2_max)?;
            let block = MacBlockConfig {
                n: b1.n(),
                rate: [b1.rate(), b2.rate()],
                messages: [b1.messages(), b2.messages()],
            };
            Setup::Mac { params, split, block }
        }
    };
    let trials = raw.trials.unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(ParamError::NoTrials);
    }
    Ok(ValidatedConfig { setup, trials, seed: raw.seed.unwrap_or(DEFAULT_SEED) })
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<Self, ParamError> {
        serde_json::from_str(text).map_err(|e| ParamError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Keys set in `other` win.
    pub fn overlay(&self, other: &RawConfig) -> RawConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RawConfig { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(p, p1, p2, q, sigma2, sigma_z2, gamma, beta, n, rate, rate_fraction, trials, seed)
    }
}

impl ValidatedConfig {
    /// Back to the config format. Rates are emitted resolved, so re-validating
    /// reproduces the same message sets.
    pub fn to_raw(&self) -> RawConfig {
        let mut raw = RawConfig { trials: Some(self.trials), seed: Some(self.seed), ..Default::default() };
        match &self.setup {
            Setup::Dpc { params, split, block } => {
                raw.p = Some(params.p());
                raw.q = Some(params.q());
                raw.sigma2 = Some(params.sigma2());
                raw.gamma = Some(split.gamma());
                raw.n = Some(block.n() as u64);
                raw.rate = Some(block.rate());
            }
            Setup::Noisy { params, split, block } => {
                raw.p = Some(params.base().p());
                raw.q = Some(params.base().q());
                raw.sigma2 = Some(params.base().sigma2());
                raw.sigma_z2 = Some(params.sigma_z2());
                raw.gamma = Some(split.gamma());
                raw.n = Some(block.n() as u64);
                raw.rate = Some(block.rate());
            }
            Setup::Mac { params, split, block } => {
                raw.p1 = Some(params.p1());
                raw.p2 = Some(params.p2());
                raw.q = Some(params.q());
                raw.sigma2 = Some(params.sigma2());
                raw.gamma = Some(split.gamma());
                raw.beta = Some(split.beta());
                raw.n = Some(block.n() as u64);
                // One shared key; asymmetric MAC rates only survive via rate_fraction.
                raw.rate = Some(block.rate()[0]);
            }
        }
        raw
    }
}
