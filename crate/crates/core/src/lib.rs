//! # im3-kit
//!
//! Third-order intermodulation (IM3) and adjacent-channel-interference
//! (ACI) analysis for N carriers through a memoryless cubic nonlinearity.
//!
//! When a composite of N cosines passes through `y = rho1*x + rho3*x^3`,
//! the cubic term scatters power into `2f_i - f_k` and `f_a + f_b - f_c`
//! products, many of which land inside other channels. This crate
//! computes that interference three independent ways:
//!
//! * [`engine`] enumerates every distinct product landing in a channel and
//!   sums powers with correct coherent grouping, for arbitrary per-channel
//!   amplitudes;
//! * [`closed_form`] evaluates the exact term-count formulas available
//!   when all amplitudes are equal;
//! * [`oracle`] and [`qpsk`] measure the same quantities from synthesized
//!   waveforms (pure tones and QPSK-modulated carriers) so the analytic
//!   paths can be validated end to end.
//!
//! Plans with unequal carrier spacing are handled by [`ChannelPlan::gridify`],
//! which inserts zero-power pseudo channels until the carriers sit on a
//! uniform grid.
//!
//! Powers follow the cosine convention throughout: a tone of peak
//! amplitude `C` volts carries `C^2 / 2` volts^2 into a 1-ohm load.
//!
//! The `parallel` feature (on by default) runs per-channel profiles,
//! Monte-Carlo trials and periodogram segments on rayon. Every parallel
//! loop is an order-preserving map with a fixed sequential reduction, so
//! outputs are bit-identical for any thread count, or with the feature off.

pub mod closed_form;
pub mod engine;
mod error;
mod exec;
pub mod oracle;
mod plan;
pub mod qpsk;
pub mod spectrum;

pub use engine::{
    aci_power, aci_power_coherent, aci_profile, enumerate_products, signal_term_amplitude,
    AciProfile, IM3Product, Normalization, ProductClass, SourceIndices,
};
pub use error::{Im3Error, Result};
pub use plan::{Channel, ChannelPlan, NonlinearityModel, MAX_GRID_CHANNELS};
