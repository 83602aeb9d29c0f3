//! Channel plans on a uniform frequency grid.
//!
//! The analysis in this crate assumes N carriers whose center frequencies
//! are equally spaced:
//!
//! ```text
//! f_k = f0 + (k - 1) * delta_f ,   k = 1..=N
//! ```
//!
//! Plans with unequal spacing are handled by inserting zero-amplitude
//! *pseudo channels* into the gaps until the occupied slots sit on a
//! uniform grid. Pseudo channels carry no power, so they contribute
//! nothing to the intermodulation analysis; they only give every carrier
//! an integer slot index.

use crate::error::{Im3Error, Result};

/// Largest grid the pseudo-channel search will produce.
pub const MAX_GRID_CHANNELS: usize = 10_000;

/// Decimal scale ceiling for the commensurate-spacing search. Inputs that
/// need more than 12 fractional digits to land on a common grid are
/// rejected as incommensurate.
const MAX_DECIMAL_SCALE: u32 = 12;

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// One slot of a channel plan.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Channel {
    /// 1-based channel number.
    pub index: usize,
    /// Center frequency in Hz, always `f0 + (index - 1) * delta_f`.
    pub center_frequency: f64,
    /// Peak cosine amplitude in volts; zero for pseudo channels.
    pub amplitude: f64,
    /// Placeholder slot inserted to make the grid uniform.
    pub is_pseudo: bool,
}

/// N channels on a uniform frequency grid.
///
/// Channel indices run 1..=N with no gaps. Frequencies may be arbitrary
/// (even nonphysical) for the index-space analysis; the waveform harness
/// in [`crate::oracle`] additionally requires `f0` to sit on the grid and
/// clear of the folded intermod region.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPlan {
    channels: Vec<Channel>,
    f0: f64,
    delta_f: f64,
}

/// Memoryless polynomial device truncated to its linear and cubic terms:
/// `y(t) = rho1 * x(t) + rho3 * x^3(t)`.
///
/// The linear gain `rho1` only affects the in-channel signal component;
/// all intermodulation power scales with `rho3^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NonlinearityModel {
    pub rho1: f64,
    /// Cubic coefficient in 1/volts^2. Must be finite; an all-linear model
    /// (`rho3 = 0`) is allowed and simply produces zero intermod power.
    pub rho3: f64,
}

impl NonlinearityModel {
    pub fn new(rho1: f64, rho3: f64) -> Result<Self> {
        if !rho1.is_finite() || !rho3.is_finite() {
            return Err(Im3Error::InvalidConfig(format!(
                "nonlinearity coefficients must be finite, got rho1={rho1}, rho3={rho3}"
            )));
        }
        Ok(Self { rho1, rho3 })
    }

    /// Pure cubic device, the usual setting for intermod studies.
    pub fn cubic(rho3: f64) -> Result<Self> {
        Self::new(0.0, rho3)
    }
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

impl ChannelPlan {
    /// Build a plan directly on a uniform grid.
    ///
    /// Channel `k` (1-based) sits at `f0 + (k - 1) * delta_f` with amplitude
    /// `amplitudes[k - 1]`. Zero-amplitude entries are marked pseudo.
    pub fn uniform(f0: f64, delta_f: f64, amplitudes: &[f64]) -> Result<Self> {
        if !delta_f.is_finite() || delta_f <= 0.0 {
            return Err(Im3Error::NonPositiveSpacing(delta_f));
        }
        if amplitudes.is_empty() {
            return Err(Im3Error::EmptyPlan);
        }
        for (pos, &a) in amplitudes.iter().enumerate() {
            if !a.is_finite() || a < 0.0 {
                return Err(Im3Error::NegativeAmplitude(a, pos));
            }
        }
        let channels = amplitudes
            .iter()
            .enumerate()
            .map(|(i, &a)| Channel {
                index: i + 1,
                center_frequency: f0 + i as f64 * delta_f,
                amplitude: a,
                is_pseudo: a == 0.0,
            })
            .collect();
        Ok(Self {
            channels,
            f0,
            delta_f,
        })
    }

    /// Equal-power plan of `n` channels, the common benchmark case.
    pub fn equal(n: usize, f0: f64, delta_f: f64, amplitude: f64) -> Result<Self> {
        Self::uniform(f0, delta_f, &vec![amplitude; n])
    }

    /// Convert an arbitrarily spaced set of carriers to a gridded plan by
    /// inserting pseudo channels.
    ///
    /// The grid spacing is the largest `delta_f` such that every input
    /// frequency lies within `rel_tolerance * delta_f` of a grid point.
    /// Candidates are searched over divisors of the integerized pairwise
    /// frequency differences at successive decimal scales, so exact decimal
    /// inputs grid exactly. A single carrier gets the degenerate spacing
    /// `delta_f = 1`; no intermod lands in band for N = 1 so the choice is
    /// arbitrary.
    pub fn gridify(frequencies: &[f64], amplitudes: &[f64], rel_tolerance: f64) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Im3Error::EmptyPlan);
        }
        if frequencies.len() != amplitudes.len() {
            return Err(Im3Error::LengthMismatch {
                frequencies: frequencies.len(),
                amplitudes: amplitudes.len(),
            });
        }
        for (pos, &a) in amplitudes.iter().enumerate() {
            if !a.is_finite() || a < 0.0 {
                return Err(Im3Error::NegativeAmplitude(a, pos));
            }
        }
        for (pos, w) in frequencies.windows(2).enumerate() {
            if w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater) {
                return Err(Im3Error::NotIncreasing(pos + 1));
            }
        }
        if frequencies.len() == 1 {
            return Self::uniform(frequencies[0], 1.0, &amplitudes[..1]);
        }

        let f0 = frequencies[0];
        let offsets: Vec<f64> = frequencies[1..].iter().map(|f| f - f0).collect();

        // Track the best near-miss for error reporting.
        let mut worst_fit: Option<(f64, f64)> = None; // (relative misfit, frequency)
        let mut capped: Option<usize> = None; // grid size of a fit beyond the cap

        for scale in 0..=MAX_DECIMAL_SCALE {
            let pow = 10f64.powi(scale as i32);
            if offsets.last().unwrap() * pow > 4.0e18 {
                break; // integerized offsets would overflow i64
            }
            let units: Vec<i64> = offsets.iter().map(|g| (g * pow).round() as i64).collect();
            let span = *units.last().unwrap();
            if span == 0 {
                continue; // resolution too coarse to separate the carriers
            }
            let g = units.iter().fold(0i64, |acc, &u| gcd(acc, u));
            if g == 0 {
                continue;
            }

            // Slot indices of every carrier for spacing d/pow, if all fit
            // within tolerance; track the best near-miss for diagnostics.
            let mut try_fit = |d: i64| -> Option<Vec<usize>> {
                let delta_f = d as f64 / pow;
                let mut indices = Vec::with_capacity(frequencies.len());
                indices.push(1usize);
                let mut prev = 0i64;
                for (pos, &u) in units.iter().enumerate() {
                    if u % d != 0 || u <= prev {
                        return None;
                    }
                    let slot = u / d;
                    let misfit = (offsets[pos] - slot as f64 * delta_f).abs() / delta_f;
                    if misfit > rel_tolerance {
                        if worst_fit.is_none_or(|(m, _)| misfit < m) {
                            worst_fit = Some((misfit, frequencies[pos + 1]));
                        }
                        return None;
                    }
                    prev = u;
                    indices.push(slot as usize + 1);
                }
                Some(indices)
            };

            // Divisors of g in descending order; a divisor smaller than
            // span / MAX_GRID_CHANNELS cannot fit under the channel cap.
            let q_cap = (g as i128 * (MAX_GRID_CHANNELS as i128 - 1) / span as i128).max(1) as i64;
            for q in 1..=q_cap {
                if g % q != 0 {
                    continue;
                }
                let d = g / q;
                let n = (span / d) as usize + 1;
                if n > MAX_GRID_CHANNELS {
                    // Only possible for the coarsest divisor; remember
                    // whether the spacing itself would have worked.
                    if try_fit(d).is_some() && capped.is_none_or(|c| n < c) {
                        capped = Some(n);
                    }
                    break;
                }
                if let Some(indices) = try_fit(d) {
                    let mut amps = vec![0.0; n];
                    for (slot, &a) in indices.iter().zip(amplitudes) {
                        amps[slot - 1] = a;
                    }
                    return Self::uniform(f0, d as f64 / pow, &amps);
                }
            }
        }

        if let Some(required) = capped {
            return Err(Im3Error::PlanTooLarge {
                required,
                cap: MAX_GRID_CHANNELS,
            });
        }
        Err(Im3Error::IncommensuratePlan {
            worst_frequency: worst_fit.map_or(frequencies[1], |(_, f)| f),
        })
    }
}

// ---------------------------------------------------------------------------
// Accessors
// ---------------------------------------------------------------------------

impl ChannelPlan {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// Peak amplitude of channel `k` (1-based).
    pub fn amplitude(&self, k: usize) -> f64 {
        self.channels[k - 1].amplitude
    }

    /// Center frequency of channel `k` (1-based).
    pub fn center_frequency(&self, k: usize) -> f64 {
        self.f0 + (k - 1) as f64 * self.delta_f
    }

    /// 1-based indices of the channels that carry power.
    pub fn real_indices(&self) -> Vec<usize> {
        self.channels
            .iter()
            .filter(|c| !c.is_pseudo)
            .map(|c| c.index)
            .collect()
    }

    /// Sum of squared peak amplitudes, `P_T = sum A_k^2`.
    ///
    /// Note this is the raw amplitude-square sum, twice the total cosine
    /// power `sum A_k^2 / 2`.
    pub fn total_power(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| c.amplitude * c.amplitude)
            .sum()
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.channels.len() {
            return Err(Im3Error::ChannelOutOfRange {
                index: k,
                n_channels: self.channels.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn validate_index(&self, k: usize) -> Result<()> {
        self.check_index(k)
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

// ===========================================================================
// Tests
// ===========================================================================
