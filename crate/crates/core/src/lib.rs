//! Sensing-secure ISAC waveform shaping.
//!
//! The crate models an OFDM/OTFS base station (BS) that senses targets with
//! an LMMSE receiver while a passive eavesdropper (Eve) exploits the same
//! illumination with a matched filter. A diagonal time-frequency perturbation
//! of the transmit grid reshapes both ambiguity functions; its per-bin
//! weights are chosen by simulated annealing on a KL-divergence detection
//! metric traded against the communication mismatch.
//!
//! Module map:
//!
//! * [`waveform`] - constellations, the modulation transform, perturbation
//!   weights and the TF grid container.
//! * [`channel`] - communication, monostatic and bistatic sensing channels.
//! * [`receiver`] - per-bin filters and the TF to range-Doppler transform.
//! * [`metrics`] - closed-form power decomposition, KLDs, rate and PSLR.
//! * [`detection`] - CA-CFAR and Monte Carlo detection probability.
//! * [`optimizer`] - the trade-off objective and simulated annealing.
//! * [`harness`] - scenario configs, experiment runners and result files.

// `!(x > 0.0)` is deliberate: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod detection;
mod dsp;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod optimizer;
pub mod receiver;
pub mod rng;
pub mod special;
pub mod waveform;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use channel::{CommChannelSpec, EveDirectSpec, NlosScaling, Target, TargetSet};
pub use detection::{CfarConfig, DetectionOutcome};
pub use metrics::{DetectionStats, PowerBreakdown, Side};
pub use optimizer::{EveAssumption, EveMode, Objective, SaConfig, SaOutcome};
pub use receiver::{FilterKind, RdMap};
pub use waveform::{
    Constellation, ConstellationKind, GridDims, PerturbationWeights, SymbolVector, TfGrid,
    WaveformKind,
};
