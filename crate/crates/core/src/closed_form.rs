//! Closed-form ACI power for equal-amplitude plans.
//!
//! When all N carriers share the same amplitude A, the third-order ACI
//! power landing in channel n reduces to counting intermod terms:
//!
//! ```text
//! P_I3(n) = rho3^2 * (9/32) * (L_D(n) + 2 * L_T(n)) * A^6
//! ```
//!
//! where `L_D` counts the 2f_i - f_k products and `L_T` counts the ordered
//! (k, i) pairs of the f_k + f_i - f_(k+i-n) family. The factor 2 on `L_T`
//! folds in the six-way coherent grouping of triple-product cosines that
//! share one phase signature. Everything here is exact integer arithmetic
//! until the final amplitude scaling.

use crate::error::{Im3Error, Result};

/// Term counts for one target channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountPair {
    pub l_d: u64,
    pub l_t: u64,
}

fn check_channel(n_channels: usize, n: usize) -> Result<()> {
    if n == 0 || n > n_channels {
        return Err(Im3Error::ChannelOutOfRange {
            index: n,
            n_channels,
        });
    }
    Ok(())
}

/// Number of double-sum products `2f_i - f_k` landing in channel `n`.
///
/// Counts k in [1, N] with k != n and k + n even; equivalently by parity:
/// N even gives (N-2)/2 for any n, N odd gives (N-1)/2 for odd n and
/// (N-3)/2 for even n.
pub fn l_d(n_channels: usize, n: usize) -> Result<u64> {
    check_channel(n_channels, n)?;
    let big_n = n_channels as u64;
    Ok(if big_n.is_multiple_of(2) {
        (big_n - 2) / 2
    } else if n.is_multiple_of(2) {
        (big_n - 3) / 2
    } else {
        (big_n - 1) / 2
    })
}

/// Number of ordered (k, i) triple-sum pairs landing in channel `n`.
///
/// Closed form of the lattice count; `l_t_bruteforce` is the defining
/// enumeration and the two agree for every valid (N, n). Returns 0 for
/// N < 3 where no triple products exist.
pub fn l_t(n_channels: usize, n: usize) -> Result<u64> {
    check_channel(n_channels, n)?;
    if n_channels < 3 {
        return Ok(0);
    }
    let big_n = n_channels as i64;
    let n = n as i64;
    let quad = (big_n * big_n + 2 * n * big_n - 5 * big_n - 2 * n * n + 2 * n) / 2;
    let value = 2 + quad - (big_n + n).div_euclid(2) + n.div_euclid(2);
    Ok(value.max(0) as u64)
}

/// Direct enumeration behind `l_t`: ordered pairs (k, i) with k != n,
/// i distinct from k and n, and k + i - n inside [1, N].
pub fn l_t_bruteforce(n_channels: usize, n: usize) -> Result<u64> {
    check_channel(n_channels, n)?;
    let big_n = n_channels as i64;
    let n = n as i64;
    let mut count = 0u64;
    for k in 1..=big_n {
        if k == n {
            continue;
        }
        for i in 1..=big_n {
            if i == k || i == n {
                continue;
            }
            let j = k + i - n;
            if (1..=big_n).contains(&j) {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Both counts at once.
pub fn counts(n_channels: usize, n: usize) -> Result<CountPair> {
    Ok(CountPair {
        l_d: l_d(n_channels, n)?,
        l_t: l_t(n_channels, n)?,
    })
}

/// Integer weight `L_D + 2 L_T`, the exact shape of the equal-power
/// profile before amplitude scaling.
pub fn combined_count(n_channels: usize, n: usize) -> Result<u64> {
    let c = counts(n_channels, n)?;
    Ok(c.l_d + 2 * c.l_t)
}

/// Equal-power ACI power in channel `n`:
/// `rho3^2 * (9/32) * (L_D + 2 L_T) * A^6` volts^2.
pub fn equal_power_aci(n_channels: usize, n: usize, amplitude: f64, rho3: f64) -> Result<f64> {
    let weight = combined_count(n_channels, n)? as f64;
    Ok(rho3 * rho3 * (9.0 / 32.0) * weight * amplitude.powi(6))
}

/// Per-channel ACI power normalized by N^2, for unit amplitude and unit
/// cubic coefficient.
pub fn normalized_profile(n_channels: usize) -> Result<Vec<f64>> {
    let scale = (n_channels * n_channels) as f64;
    (1..=n_channels)
        .map(|n| Ok(equal_power_aci(n_channels, n, 1.0, 1.0)? / scale))
        .collect()
}

/// Largest normalized ACI power over the channels. Needs N >= 3; a two
/// channel system generates no in-band third-order products.
pub fn max_normalized(n_channels: usize) -> Result<f64> {
    if n_channels < 3 {
        return Err(Im3Error::InvalidConfig(format!(
            "no third-order ACI exists for N = {n_channels}; need N >= 3"
        )));
    }
    let profile = normalized_profile(n_channels)?;
    Ok(profile.into_iter().fold(f64::MIN, f64::max))
}

/// Ratio of the strongest to the weakest per-channel ACI power, computed
/// from the exact integer counts.
pub fn ratio_max_min(n_channels: usize) -> Result<f64> {
    if n_channels < 3 {
        return Err(Im3Error::InvalidConfig(format!(
            "no third-order ACI exists for N = {n_channels}; need N >= 3"
        )));
    }
    let weights: Vec<u64> = (1..=n_channels)
        .map(|n| combined_count(n_channels, n))
        .collect::<Result<_>>()?;
    let max = *weights.iter().max().unwrap();
    let min = *weights.iter().min().unwrap();
    Ok(max as f64 / min as f64)
}

// ===========================================================================
// Tests
// ===========================================================================
