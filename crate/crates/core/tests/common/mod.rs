//! Exhaustive cubic-expansion oracle, independent of the engine.
//!
//! Walks every cosine the cubic term emits for a set of carriers placed on
//! integer frequency units: the `2f_i - f_k` family over all ordered
//! (i, k) pairs and the three `f_k +- f_i +- f_j` difference shapes over
//! all ordered pairwise-distinct (k, i, j) triples. Negative frequencies
//! are folded through cosine evenness (frequency and phase signature both
//! negate). Cosines are grouped by exact (frequency, signature); the
//! amplitudes within a group add coherently, groups add in power.

use std::collections::HashMap;

#[derive(Debug, Clone, Copy)]
pub struct Carrier {
    pub freq_units: i64,
    pub amplitude: f64,
}

#[derive(Debug, Default)]
pub struct RawExpansion {
    /// (frequency units, phase signature over carriers) -> coherent amplitude
    groups: HashMap<(i64, Vec<i32>), f64>,
}

impl RawExpansion {
    pub fn expand(carriers: &[Carrier], rho3: f64) -> Self {
        let n = carriers.len();
        let mut groups: HashMap<(i64, Vec<i32>), f64> = HashMap::new();
        let mut push = |freq: i64, sig: Vec<i32>, amp: f64| {
            if freq == 0 {
                return; // DC term, never lands in a channel
            }
            let (freq, sig) = if freq < 0 {
                (-freq, sig.into_iter().map(|c| -c).collect())
            } else {
                (freq, sig)
            };
            *groups.entry((freq, sig)).or_insert(0.0) += amp;
        };

        // Double-sum cosines: (3/4) A_k A_i^2 at 2f_i - f_k.
        for k in 0..n {
            for i in 0..n {
                if i == k {
                    continue;
                }
                let amp = 0.75
                    * rho3.abs()
                    * carriers[k].amplitude
                    * carriers[i].amplitude
                    * carriers[i].amplitude;
                if amp == 0.0 {
                    continue;
                }
                let mut sig = vec![0i32; n];
                sig[i] += 2;
                sig[k] -= 1;
                push(
                    2 * carriers[i].freq_units - carriers[k].freq_units,
                    sig,
                    amp,
                );
            }
        }

        // Triple-sum cosines: (1/4) A_k A_i A_j in three difference shapes.
        for k in 0..n {
            for i in 0..n {
                if i == k {
                    continue;
                }
                for j in 0..n {
                    if j == i || j == k {
                        continue;
                    }
                    let amp = 0.25
                        * rho3.abs()
                        * carriers[k].amplitude
                        * carriers[i].amplitude
                        * carriers[j].amplitude;
                    if amp == 0.0 {
                        continue;
                    }
                    let (uk, ui, uj) = (
                        carriers[k].freq_units,
                        carriers[i].freq_units,
                        carriers[j].freq_units,
                    );
                    for (sk, si, sj) in [(1i64, 1i64, -1i64), (1, -1, 1), (1, -1, -1)] {
                        let mut sig = vec![0i32; n];
                        sig[k] += sk as i32;
                        sig[i] += si as i32;
                        sig[j] += sj as i32;
                        push(sk * uk + si * ui + sj * uj, sig, amp);
                    }
                }
            }
        }

        Self { groups }
    }

    /// Incoherent power across the signature groups at one frequency.
    pub fn power_at(&self, freq_units: i64) -> f64 {
        let mut powers: Vec<f64> = self
            .groups
            .iter()
            .filter(|&(&(f, _), _)| f == freq_units)
            .map(|(_, &amp)| amp * amp * 0.5)
            .collect();
        powers.sort_by(f64::total_cmp);
        powers.iter().sum()
    }

    /// Signature groups at one frequency, sorted for comparison.
    pub fn groups_at(&self, freq_units: i64) -> Vec<(Vec<i32>, f64)> {
        let mut out: Vec<(Vec<i32>, f64)> = self
            .groups
            .iter()
            .filter(|&(&(f, _), _)| f == freq_units)
            .map(|((_, sig), &amp)| (sig.clone(), amp))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}

/// Expand a full (gap-free) plan: channel k sits at `base_units + k - 1`.
pub fn expand_full_plan(amplitudes: &[f64], base_units: i64, rho3: f64) -> RawExpansion {
    let carriers: Vec<Carrier> = amplitudes
        .iter()
        .enumerate()
        .map(|(idx, &amplitude)| Carrier {
            freq_units: base_units + idx as i64,
            amplitude,
        })
        .collect();
    RawExpansion::expand(&carriers, rho3)
}
