//! Enumeration of third-order intermod products and per-channel ACI power.
//!
//! A cubic device acting on N cosines produces in-band products of two
//! shapes. In channel-index space (frequencies `f0 + (m - 1) * delta_f`):
//!
//! * double products `2f_i - f_k` landing in channel `n = 2i - k`, with
//!   phase `2 theta_i - theta_k` and peak amplitude `(3/4) |rho3| A_k A_i^2`;
//! * triple products `f_a + f_b - f_c` landing in `n = a + b - c` for
//!   distinct `{a, b}, c`, with phase `theta_a + theta_b - theta_c`.
//!
//! The cubic expansion emits six cosines for every distinct triple
//! signature (two index orderings in each of the three difference shapes,
//! after folding negative frequencies through the evenness of cosine).
//! They share one frequency and one phase, so their amplitudes add before
//! squaring: the triple amplitude is `(6/4) |rho3| A_a A_b A_c`. Distinct
//! signatures are mutually incoherent under independent uniform phases,
//! and their powers add. This signature grouping is applied for arbitrary
//! amplitude profiles, not just the equal-power case; the time-domain
//! harness in [`crate::oracle`] confirms it.
//!
//! All landing conditions are evaluated on integer channel indices, so no
//! floating-point frequency tolerance enters the engine.

use crate::error::{Im3Error, Result};
use crate::exec;
use crate::plan::{ChannelPlan, NonlinearityModel};
use num_complex::Complex64;

// ---------------------------------------------------------------------------
// Product descriptors
// ---------------------------------------------------------------------------

/// Which sum of the cubic expansion a product comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductClass {
    /// `2f_i - f_k` terms.
    Double,
    /// `f_a + f_b - f_c` terms, six-way coherent.
    Triple,
}

/// Channel indices (1-based) behind a product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceIndices {
    Double { i: usize, k: usize },
    Triple { a: usize, b: usize, c: usize },
}

/// One distinct intermod phasor landing in the target channel.
#[derive(Debug, Clone, PartialEq)]
pub struct IM3Product {
    pub class: ProductClass,
    /// Integer phase-signature coefficients over channels 1..=N; the
    /// coefficients sum to +1 and satisfy the landing condition
    /// `sum coeff_m * (m - 1) = n - 1`.
    pub signature: Vec<i8>,
    /// Coherently summed peak amplitude in volts, `|rho3|` included.
    pub amplitude: f64,
    pub source: SourceIndices,
}

impl IM3Product {
    /// Phase of this product for a given carrier-phase realization.
    pub fn phase(&self, phases: &[f64]) -> f64 {
        match self.source {
            SourceIndices::Double { i, k } => 2.0 * phases[i - 1] - phases[k - 1],
            SourceIndices::Triple { a, b, c } => phases[a - 1] + phases[b - 1] - phases[c - 1],
        }
    }
}

// ---------------------------------------------------------------------------
// Enumeration core
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
enum Term {
    Double {
        i: usize,
        k: usize,
        amplitude: f64,
    },
    Triple {
        a: usize,
        b: usize,
        c: usize,
        amplitude: f64,
    },
}

/// Walk every nonzero product landing in channel `n`, in a fixed order:
/// doubles by ascending `i`, then triples by ascending `(a, b)`.
///
/// Only channels with nonzero amplitude participate, which keeps sparse
/// gridded plans at O(real^2) instead of O(N^2).
fn visit_products<F: FnMut(Term)>(plan: &ChannelPlan, rho3_abs: f64, n: usize, mut emit: F) {
    let channels = plan.channels();
    let n_channels = channels.len();
    let real: Vec<usize> = plan.real_indices();

    // Double products: k = 2i - n, i != k, both in range and powered.
    for &i in &real {
        let k = 2 * i as i64 - n as i64;
        if k < 1 || k > n_channels as i64 {
            continue;
        }
        let k = k as usize;
        if k == i {
            continue;
        }
        let a_k = channels[k - 1].amplitude;
        if a_k == 0.0 {
            continue;
        }
        let a_i = channels[i - 1].amplitude;
        let amplitude = 0.75 * rho3_abs * a_k * a_i * a_i;
        if amplitude != 0.0 {
            emit(Term::Double { i, k, amplitude });
        }
    }

    // Triple products: unordered {a, b}, c = a + b - n distinct from both.
    for (pos, &a) in real.iter().enumerate() {
        for &b in &real[pos + 1..] {
            let c = a as i64 + b as i64 - n as i64;
            if c < 1 || c > n_channels as i64 {
                continue;
            }
            let c = c as usize;
            if c == a || c == b {
                continue;
            }
            let a_c = channels[c - 1].amplitude;
            if a_c == 0.0 {
                continue;
            }
            // Multiply the pair amplitudes in value order so a mirrored
            // plan rounds identically.
            let (lo, hi) = {
                let (x, y) = (channels[a - 1].amplitude, channels[b - 1].amplitude);
                if x <= y {
                    (x, y)
                } else {
                    (y, x)
                }
            };
            let amplitude = 1.5 * rho3_abs * lo * hi * a_c;
            if amplitude != 0.0 {
                emit(Term::Triple { a, b, c, amplitude });
            }
        }
    }
}

/// Every distinct IM3 product landing in channel `n`, with signatures and
/// coherent amplitudes materialized.
pub fn enumerate_products(
    plan: &ChannelPlan,
    model: &NonlinearityModel,
    n: usize,
) -> Result<Vec<IM3Product>> {
    plan.validate_index(n)?;
    let n_channels = plan.n_channels();
    let mut products = Vec::new();
    visit_products(plan, model.rho3.abs(), n, |term| {
        let mut signature = vec![0i8; n_channels];
        let product = match term {
            Term::Double { i, k, amplitude } => {
                signature[i - 1] += 2;
                signature[k - 1] -= 1;
                IM3Product {
                    class: ProductClass::Double,
                    signature,
                    amplitude,
                    source: SourceIndices::Double { i, k },
                }
            }
            Term::Triple { a, b, c, amplitude } => {
                signature[a - 1] += 1;
                signature[b - 1] += 1;
                signature[c - 1] -= 1;
                IM3Product {
                    class: ProductClass::Triple,
                    signature,
                    amplitude,
                    source: SourceIndices::Triple { a, b, c },
                }
            }
        };
        products.push(product);
    });
    Ok(products)
}

// ---------------------------------------------------------------------------
// Power
// ---------------------------------------------------------------------------

/// Expected ACI power in channel `n` for independent uniform carrier
/// phases: coherent within a signature, incoherent across signatures.
///
/// Per-product powers are summed in ascending value order, which makes the
/// result independent of enumeration order and exactly mirror-symmetric.
pub fn aci_power(plan: &ChannelPlan, model: &NonlinearityModel, n: usize) -> Result<f64> {
    plan.validate_index(n)?;
    let mut powers = Vec::new();
    visit_products(plan, model.rho3.abs(), n, |term| {
        let amplitude = match term {
            Term::Double { amplitude, .. } | Term::Triple { amplitude, .. } => amplitude,
        };
        powers.push(amplitude * amplitude * 0.5);
    });
    powers.sort_by(f64::total_cmp);
    Ok(powers.iter().fold(0.0, |acc, p| acc + p))
}

/// ACI power in channel `n` for one explicit phase realization: all
/// product phasors are summed as complex amplitudes before squaring.
///
/// Averaged over independent uniform phase draws this converges to
/// [`aci_power`]; with all phases equal it realizes the fully coherent
/// worst case.
pub fn aci_power_coherent(
    plan: &ChannelPlan,
    model: &NonlinearityModel,
    n: usize,
    phases: &[f64],
) -> Result<f64> {
    plan.validate_index(n)?;
    if phases.len() != plan.n_channels() {
        return Err(Im3Error::PhaseCountMismatch {
            expected: plan.n_channels(),
            got: phases.len(),
        });
    }
    let mut sum = Complex64::new(0.0, 0.0);
    visit_products(plan, model.rho3.abs(), n, |term| {
        let (amplitude, phase) = match term {
            Term::Double { i, k, amplitude } => (amplitude, 2.0 * phases[i - 1] - phases[k - 1]),
            Term::Triple { a, b, c, amplitude } => {
                (amplitude, phases[a - 1] + phases[b - 1] - phases[c - 1])
            }
        };
        sum += Complex64::from_polar(amplitude, phase);
    });
    Ok(sum.norm_sqr() * 0.5)
}

/// Coherent in-channel component at `f_k`, phased with the carrier:
/// linear gain plus the cubic self- and cross-compression terms,
/// `rho1*A_k + rho3*((3/4)*A_k^3 + (3/2)*A_k*(P_T - A_k^2))`.
pub fn signal_term_amplitude(
    plan: &ChannelPlan,
    model: &NonlinearityModel,
    k: usize,
) -> Result<f64> {
    plan.validate_index(k)?;
    let a = plan.amplitude(k);
    let p_t = plan.total_power();
    Ok(model.rho1 * a + model.rho3 * (0.75 * a * a * a + 1.5 * a * (p_t - a * a)))
}

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

/// How the powers in an [`AciProfile`] are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Normalization {
    None,
    PerNSquared,
}

/// Per-channel ACI power vector.
///
/// Powers follow the single-cosine convention: a tone of peak amplitude C
/// carries power C^2 / 2 into a 1-ohm load.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AciProfile {
    pub powers: Vec<f64>,
    pub n_channels: usize,
    pub normalization: Normalization,
}

impl AciProfile {
    /// The same profile scaled by 1/N^2.
    pub fn normalized(&self) -> AciProfile {
        let scale = (self.n_channels * self.n_channels) as f64;
        AciProfile {
            powers: self.powers.iter().map(|p| p / scale).collect(),
            n_channels: self.n_channels,
            normalization: Normalization::PerNSquared,
        }
    }
}

/// ACI power for every channel of the plan. Channels are independent and
/// evaluated in parallel when the `parallel` feature is active.
pub fn aci_profile(plan: &ChannelPlan, model: &NonlinearityModel) -> AciProfile {
    let n_channels = plan.n_channels();
    let powers = exec::map_indexed(n_channels, |idx| {
        aci_power(plan, model, idx + 1).expect("index in range")
    });
    AciProfile {
        powers,
        n_channels,
        normalization: Normalization::None,
    }
}

// ===========================================================================
// Tests
// ===========================================================================
