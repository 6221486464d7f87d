//! Schalkwijk–Kailath style feedback coding for Gaussian channels with a
//! state known at the transmitter: joint message transmission and state
//! estimation for a single user, a two-user MAC and noisy state observation.

pub mod error;
pub mod harness;
pub mod noisy_obs;
pub mod params;
pub mod regions;
pub mod sk_dpc;
pub mod sk_dpmac;

pub use error::{Error, ParamError, RegionError, SchemeError};
pub use params::{
    validate, BlockConfig, DpcParams, MacBlockConfig, MacParams, NoisyObsParams, PowerSplit, RawConfig, Scheme, Setup,
    ValidatedConfig,
};
pub use sk_dpmac::SignRule;
