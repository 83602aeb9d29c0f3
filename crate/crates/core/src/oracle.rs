//! Independent time-domain verification of the analytic engine.
//!
//! The harness synthesizes the N-tone waveform sample by sample, pushes it
//! through the polynomial device, and measures per-channel intermod power
//! from single DFT bins, Monte-Carlo averaged over random carrier phases.
//! Nothing here shares code with the product enumeration in
//! [`crate::engine`], so agreement between the two is meaningful evidence.
//!
//! Grids are chosen so that every tone and every third-order product falls
//! exactly on a DFT bin (no leakage, no windowing) and so that nothing the
//! cubic generates aliases back into band.

use crate::engine::signal_term_amplitude;
use crate::error::{Im3Error, Result};
use crate::exec;
use crate::plan::{ChannelPlan, NonlinearityModel};
use crate::spectrum::{power_spectrum, single_bin_phasor};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

/// Hard cap on simulation length.
pub const MAX_SAMPLES: usize = 1 << 24;

// ---------------------------------------------------------------------------
// Phase realizations
// ---------------------------------------------------------------------------

/// One draw of the N carrier phases.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRealization {
    /// theta_k in radians, k = 1..=N (pseudo channels included so the
    /// stream layout does not depend on which slots carry power).
    pub phases: Vec<f64>,
    /// Stream seed this realization was drawn from.
    pub seed: u64,
}

/// Scramble (seed, index) into one RNG stream seed. Distinct indices under
/// one seed can never collide.
pub(crate) fn stream_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl PhaseRealization {
    pub fn new(phases: Vec<f64>, seed: u64) -> Self {
        Self { phases, seed }
    }

    /// i.i.d. uniform phases on [0, 2*pi).
    pub fn draw(n_channels: usize, seed: u64) -> Self {
        Self::for_trial(n_channels, seed, 0)
    }

    /// Phases for Monte-Carlo trial `trial`. The draw depends only on
    /// (seed, trial, channel), never on execution schedule, so repeated
    /// runs are bit-reproducible at any thread count.
    pub fn for_trial(n_channels: usize, seed: u64, trial: u64) -> Self {
        let derived = stream_seed(seed, trial);
        let mut rng = ChaCha8Rng::seed_from_u64(derived);
        let phases = (0..n_channels).map(|_| rng.random::<f64>() * TAU).collect();
        Self {
            phases,
            seed: derived,
        }
    }
}

// ---------------------------------------------------------------------------
// Simulation grid
// ---------------------------------------------------------------------------

/// Sampling contract: rate and record length.
///
/// A plan is compatible with a grid when every channel frequency is a
/// positive integer number of cycles per record and the third harmonic of
/// the top channel stays below Nyquist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationGrid {
    pub sample_rate: f64,
    pub num_samples: usize,
}

impl SimulationGrid {
    pub fn new(sample_rate: f64, num_samples: usize) -> Result<Self> {
        if !sample_rate.is_finite() || sample_rate <= 0.0 {
            return Err(Im3Error::GridIncompatible(format!(
                "sample rate must be positive and finite, got {sample_rate}"
            )));
        }
        if num_samples == 0 {
            return Err(Im3Error::GridIncompatible("empty record".into()));
        }
        if num_samples > MAX_SAMPLES {
            return Err(Im3Error::TooManySamples {
                required: num_samples,
                cap: MAX_SAMPLES,
            });
        }
        Ok(Self {
            sample_rate,
            num_samples,
        })
    }

    pub fn duration(&self) -> f64 {
        self.num_samples as f64 / self.sample_rate
    }

    /// Default grid for a plan: one full period of the channel spacing,
    /// sampled at 8x the third harmonic of the top channel, rounded up to
    /// a power-of-two multiple of `delta_f`. Requires `f0` to sit on the
    /// `delta_f` grid so that every tone lands on a bin.
    pub fn for_plan(plan: &ChannelPlan) -> Result<Self> {
        let delta_f = plan.delta_f();
        let u0 = plan.f0() / delta_f;
        let u0_round = u0.round();
        if (u0 - u0_round).abs() > 1e-9 * u0.abs().max(1.0) || u0_round < 1.0 {
            return Err(Im3Error::GridIncompatible(format!(
                "f0 = {} is not a positive integer multiple of delta_f = {delta_f}",
                plan.f0()
            )));
        }
        let top_unit = u0_round as u64 + plan.n_channels() as u64 - 1;
        let samples = (24 * top_unit).next_power_of_two();
        if samples as usize > MAX_SAMPLES {
            return Err(Im3Error::TooManySamples {
                required: samples as usize,
                cap: MAX_SAMPLES,
            });
        }
        Ok(Self {
            sample_rate: samples as f64 * delta_f,
            num_samples: samples as usize,
        })
    }

    /// Cycles-per-record for every channel of the plan, with on-bin and
    /// anti-alias validation.
    pub(crate) fn plan_bins(&self, plan: &ChannelPlan) -> Result<Vec<u64>> {
        let duration = self.duration();
        let mut bins = Vec::with_capacity(plan.n_channels());
        for k in 1..=plan.n_channels() {
            let f = plan.center_frequency(k);
            let cycles = f * duration;
            let rounded = cycles.round();
            if (cycles - rounded).abs() > 1e-9 * cycles.abs().max(1.0) || rounded < 1.0 {
                return Err(Im3Error::OffBinFrequency {
                    frequency: f,
                    duration,
                });
            }
            bins.push(rounded as u64);
        }
        let top = *bins.last().unwrap();
        if 2 * (3 * top) >= self.num_samples as u64 {
            return Err(Im3Error::GridIncompatible(format!(
                "sample rate {} cannot hold the third harmonic of {} alias-free",
                self.sample_rate,
                plan.center_frequency(plan.n_channels())
            )));
        }
        Ok(bins)
    }

    /// Bin index (cycles per record) for an arbitrary on-bin frequency.
    pub(crate) fn bin_for(&self, frequency: f64) -> Result<u64> {
        let duration = self.duration();
        let cycles = frequency * duration;
        let rounded = cycles.round();
        if (cycles - rounded).abs() > 1e-9 * cycles.abs().max(1.0) || rounded < 1.0 {
            return Err(Im3Error::OffBinFrequency {
                frequency,
                duration,
            });
        }
        if rounded as u64 * 2 >= self.num_samples as u64 {
            return Err(Im3Error::GridIncompatible(format!(
                "frequency {frequency} is at or above Nyquist"
            )));
        }
        Ok(rounded as u64)
    }
}

/// The folded image of any third-order product must stay clear of the
/// channel band, which requires 2*f0 > (N-1)*delta_f. Only per-channel
/// measurements need this; synthesis and spectra do not.
fn check_folding_clearance(plan: &ChannelPlan) -> Result<()> {
    let n = plan.n_channels();
    if 2.0 * plan.f0() <= (n as f64 - 1.0) * plan.delta_f() {
        return Err(Im3Error::GridIncompatible(format!(
            "f0 = {} too low: third-order products fold back into the band \
             unless f0 > (N-1)*delta_f/2 = {}",
            plan.f0(),
            (n as f64 - 1.0) * plan.delta_f() / 2.0
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthesis and device
// ---------------------------------------------------------------------------

fn synth_with_bins(
    plan: &ChannelPlan,
    phases: &[f64],
    bins: &[u64],
    num_samples: usize,
) -> Vec<f64> {
    let carriers: Vec<(u64, f64, f64)> = plan
        .channels()
        .iter()
        .filter(|c| !c.is_pseudo)
        .map(|c| (bins[c.index - 1], c.amplitude, phases[c.index - 1]))
        .collect();
    let m_total = num_samples as u64;
    exec::map_indexed(num_samples, |m| {
        let mut acc = 0.0;
        for &(bin, amp, theta) in &carriers {
            let units = (m as u64 * bin) % m_total;
            acc += amp * (TAU * units as f64 / m_total as f64 + theta).cos();
        }
        acc
    })
}

/// Sum of N cosines on the simulation grid:
/// `x[m] = sum_k A_k cos(2*pi*f_k*m/fs + theta_k)`.
pub fn synthesize(
    plan: &ChannelPlan,
    phases: &PhaseRealization,
    grid: &SimulationGrid,
) -> Result<Vec<f64>> {
    if phases.phases.len() != plan.n_channels() {
        return Err(Im3Error::PhaseCountMismatch {
            expected: plan.n_channels(),
            got: phases.phases.len(),
        });
    }
    let bins = grid.plan_bins(plan)?;
    Ok(synth_with_bins(
        plan,
        &phases.phases,
        &bins,
        grid.num_samples,
    ))
}

/// Apply the truncated polynomial device sample by sample:
/// `y[m] = rho1 * x[m] + rho3 * x[m]^3`.
pub fn apply_nonlinearity(x: &[f64], model: &NonlinearityModel) -> Vec<f64> {
    let (rho1, rho3) = (model.rho1, model.rho3);
    exec::map_indexed(x.len(), |m| {
        let v = x[m];
        rho1 * v + rho3 * v * v * v
    })
}

/// Complex amplitude of the component of `y` at frequency `f`, as
/// `C * exp(j*phi)` with the component being `C * cos(2*pi*f*t + phi)`.
pub fn channel_bin_phasor(y: &[f64], grid: &SimulationGrid, f: f64) -> Result<Complex64> {
    if y.len() != grid.num_samples {
        return Err(Im3Error::GridIncompatible(format!(
            "record length {} does not match grid ({} samples)",
            y.len(),
            grid.num_samples
        )));
    }
    let bin = grid.bin_for(f)?;
    Ok(single_bin_phasor(y, bin))
}

// ---------------------------------------------------------------------------
// Monte-Carlo ACI measurement
// ---------------------------------------------------------------------------

/// How the coherent in-channel signal component is removed before the
/// residual power is read off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalRemoval {
    /// Subtract the analytically known compression phasor. Exact per
    /// trial, but shares the compression formula with the engine.
    Analytic,
    /// Estimate the coherent component by phase-aligned averaging of the
    /// channel bin across trials, then subtract. Fully independent of the
    /// analytic formulas; needs enough trials to converge.
    Estimated,
}

/// Sample mean and standard error of a Monte-Carlo power measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

fn mc_statistics(powers: &[f64]) -> McEstimate {
    let trials = powers.len();
    let mean = powers.iter().sum::<f64>() / trials as f64;
    if trials < 2 {
        return McEstimate { mean, stderr: 0.0 };
    }
    let var = powers.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (trials - 1) as f64;
    McEstimate {
        mean,
        stderr: (var / trials as f64).sqrt(),
    }
}

fn mc_measure(
    plan: &ChannelPlan,
    model: &NonlinearityModel,
    targets: &[usize],
    trials: usize,
    seed: u64,
    grid: &SimulationGrid,
    removal: SignalRemoval,
) -> Result<Vec<McEstimate>> {
    if trials == 0 {
        return Err(Im3Error::NoTrials);
    }
    for &n in targets {
        plan.validate_index(n)?;
    }
    check_folding_clearance(plan)?;
    let bins = grid.plan_bins(plan)?;
    let n_channels = plan.n_channels();
    let num_samples = grid.num_samples;

    // Per trial: the channel-bin phasors and the phases they were drawn
    // with, collected in trial order.
    let per_trial: Vec<(Vec<Complex64>, Vec<f64>)> = exec::map_indexed(trials, |t| {
        let realization = PhaseRealization::for_trial(n_channels, seed, t as u64);
        let x = synth_with_bins(plan, &realization.phases, &bins, num_samples);
        let y = apply_nonlinearity(&x, model);
        let phasors = targets
            .iter()
            .map(|&n| single_bin_phasor(&y, bins[n - 1]))
            .collect();
        let thetas = targets.iter().map(|&n| realization.phases[n - 1]).collect();
        (phasors, thetas)
    });

    let mut estimates = Vec::with_capacity(targets.len());
    for (slot, &n) in targets.iter().enumerate() {
        let coherent: Complex64 = match removal {
            SignalRemoval::Analytic => Complex64::new(signal_term_amplitude(plan, model, n)?, 0.0),
            SignalRemoval::Estimated => {
                let sum: Complex64 = per_trial
                    .iter()
                    .map(|(phasors, thetas)| {
                        phasors[slot] * Complex64::from_polar(1.0, -thetas[slot])
                    })
                    .sum();
                sum / trials as f64
            }
        };
        let powers: Vec<f64> = per_trial
            .iter()
            .map(|(phasors, thetas)| {
                let residual = phasors[slot] - coherent * Complex64::from_polar(1.0, thetas[slot]);
                residual.norm_sqr() * 0.5
            })
            .collect();
        estimates.push(mc_statistics(&powers));
    }
    Ok(estimates)
}

/// Monte-Carlo ACI power in channel `n`, with analytic signal removal.
pub fn measure_aci_mc(
    plan: &ChannelPlan,
    model: &NonlinearityModel,
    n: usize,
    trials: usize,
    seed: u64,
    grid: &SimulationGrid,
) -> Result<McEstimate> {
    measure_aci_mc_with(plan, model, n, trials, seed, grid, SignalRemoval::Analytic)
}

/// Same measurement with an explicit signal-removal strategy.
pub fn measure_aci_mc_with(
    plan: &ChannelPlan,
    model: &NonlinearityModel,
    n: usize,
    trials: usize,
    seed: u64,
    grid: &SimulationGrid,
    removal: SignalRemoval,
) -> Result<McEstimate> {
    Ok(mc_measure(plan, model, &[n], trials, seed, grid, removal)?.remove(0))
}

/// All channels at once, sharing the synthesized waveform per trial. The
/// phase streams depend only on (seed, trial, channel), so this matches
/// per-channel [`measure_aci_mc_with`] calls bit for bit.
pub fn measure_aci_profile_mc(
    plan: &ChannelPlan,
    model: &NonlinearityModel,
    trials: usize,
    seed: u64,
    grid: &SimulationGrid,
    removal: SignalRemoval,
) -> Result<Vec<McEstimate>> {
    let targets: Vec<usize> = (1..=plan.n_channels()).collect();
    mc_measure(plan, model, &targets, trials, seed, grid, removal)
}

// ---------------------------------------------------------------------------
// Waveform snapshot (input / device output / isolated intermod)
// ---------------------------------------------------------------------------

/// Aligned time series and spectra for one phase realization: the
/// composite input, the device output, and the output with the coherent
/// per-channel signal components subtracted in the time domain.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSnapshot {
    pub time: Vec<f64>,
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    pub intermod: Vec<f64>,
    /// (frequency_hz, power_v2) pairs, one-sided.
    pub input_spectrum: Vec<(f64, f64)>,
    pub output_spectrum: Vec<(f64, f64)>,
    pub intermod_spectrum: Vec<(f64, f64)>,
}

/// Build the three-way waveform/spectrum view of one realization.
///
/// The intermod series is the device output minus the reconstructed
/// in-channel components `S_k cos(2*pi*f_k*t + theta_k)`; with `rho1 = 0`
/// that isolates exactly the cubic distortion products.
pub fn waveform_snapshot(
    plan: &ChannelPlan,
    phases: &PhaseRealization,
    model: &NonlinearityModel,
    grid: &SimulationGrid,
) -> Result<WaveformSnapshot> {
    if phases.phases.len() != plan.n_channels() {
        return Err(Im3Error::PhaseCountMismatch {
            expected: plan.n_channels(),
            got: phases.phases.len(),
        });
    }
    let bins = grid.plan_bins(plan)?;
    let num_samples = grid.num_samples;
    let input = synth_with_bins(plan, &phases.phases, &bins, num_samples);
    let output = apply_nonlinearity(&input, model);

    let coherent: Vec<(u64, f64, f64)> = plan
        .channels()
        .iter()
        .filter(|c| !c.is_pseudo)
        .map(|c| {
            let s = signal_term_amplitude(plan, model, c.index).expect("index valid");
            (bins[c.index - 1], s, phases.phases[c.index - 1])
        })
        .collect();
    let m_total = num_samples as u64;
    let intermod = exec::map_indexed(num_samples, |m| {
        let mut acc = output[m];
        for &(bin, amp, theta) in &coherent {
            let units = (m as u64 * bin) % m_total;
            acc -= amp * (TAU * units as f64 / m_total as f64 + theta).cos();
        }
        acc
    });

    let dt = 1.0 / grid.sample_rate;
    Ok(WaveformSnapshot {
        time: (0..num_samples).map(|m| m as f64 * dt).collect(),
        input_spectrum: power_spectrum(&input, grid.sample_rate),
        output_spectrum: power_spectrum(&output, grid.sample_rate),
        intermod_spectrum: power_spectrum(&intermod, grid.sample_rate),
        input,
        output,
        intermod,
    })
}

// ===========================================================================
// Tests
// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{aci_power, aci_power_coherent};

    fn unit_cubic() -> NonlinearityModel {
        NonlinearityModel::cubic(1.0).unwrap()
    }

    #[test]
    fn default_grid_shape() {
        let plan = ChannelPlan::equal(10, 16.0, 1.0, 1.0).unwrap();
        let grid = SimulationGrid::for_plan(&plan).unwrap();
        // top channel 25 units -> 24*25 = 600 -> 1024 samples per period
        assert_eq!(grid.num_samples, 1024);
        assert_eq!(grid.sample_rate, 1024.0);
        assert!((grid.duration() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn off_grid_reference_rejected() {
        let plan = ChannelPlan::uniform(5.25, 1.0, &[1.0, 1.0]).unwrap();
        assert!(matches!(
            SimulationGrid::for_plan(&plan),
            Err(Im3Error::GridIncompatible(_))
        ));
    }

    #[test]
    fn synthesize_single_tone_is_on_bin() {
        let plan = ChannelPlan::uniform(16.0, 1.0, &[1.0]).unwrap();
        let grid = SimulationGrid::for_plan(&plan).unwrap();
        let phases = PhaseRealization::new(vec![0.4], 0);
        let x = synthesize(&plan, &phases, &grid).unwrap();
        let phasor = channel_bin_phasor(&x, &grid, 16.0).unwrap();
        assert!((phasor.norm() - 1.0).abs() < 1e-9);
        assert!((phasor.arg() - 0.4).abs() < 1e-9);
        // power convention: A^2/2
        let power = phasor.norm_sqr() / 2.0;
        assert!((power - 0.5).abs() < 1e-9);
    }

    #[test]
    fn synthesize_all_pseudo_plan_is_silent() {
        let plan = ChannelPlan::uniform(16.0, 1.0, &[0.0, 0.0, 0.0]).unwrap();
        let grid = SimulationGrid::for_plan(&plan).unwrap();
        let phases = PhaseRealization::draw(3, 1);
        let x = synthesize(&plan, &phases, &grid).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn synthesize_three_tone_bin_powers() {
        let plan = ChannelPlan::equal(3, 16.0, 1.0, 1.0).unwrap();
        let grid = SimulationGrid::for_plan(&plan).unwrap();
        let phases = PhaseRealization::draw(3, 42);
        let x = synthesize(&plan, &phases, &grid).unwrap();
        for k in 1..=3 {
            let p = channel_bin_phasor(&x, &grid, plan.center_frequency(k)).unwrap();
            assert!((p.norm_sqr() / 2.0 - 0.5).abs() < 1e-9, "channel {k}");
        }
    }

    #[test]
    fn nonlinearity_identity_and_cube() {
        let x = vec![0.1, -0.5, 2.0];
        let identity = NonlinearityModel::new(1.0, 0.0).unwrap();
        assert_eq!(apply_nonlinearity(&x, &identity), x);

        assert!(apply_nonlinearity(&[0.0; 8], &unit_cubic())
            .iter()
            .all(|&v| v == 0.0));

        // cos^3 splits into (3/4) at f and (1/4) at 3f.
        let plan = ChannelPlan::uniform(16.0, 1.0, &[1.0]).unwrap();
        let grid = SimulationGrid::for_plan(&plan).unwrap();
        let x = synthesize(&plan, &PhaseRealization::new(vec![0.2], 0), &grid).unwrap();
        let y = apply_nonlinearity(&x, &unit_cubic());
        let at_f = channel_bin_phasor(&y, &grid, 16.0).unwrap();
        let at_3f = channel_bin_phasor(&y, &grid, 48.0).unwrap();
        assert!((at_f.norm_sqr() / 2.0 - 0.75 * 0.75 / 2.0).abs() < 1e-9);
        assert!((at_3f.norm_sqr() / 2.0 - 0.25 * 0.25 / 2.0).abs() < 1e-9);
        assert!((at_3f.arg() - 0.6).abs() < 1e-9, "cubed phase is 3*theta");
    }

    #[test]
    fn phasor_of_constant_record_is_zero() {
        let grid = SimulationGrid::new(64.0, 64).unwrap();
        let y = vec![5.0; 64];
        let p = channel_bin_phasor(&y, &grid, 4.0).unwrap();
        assert!(p.norm() < 1e-12);
    }

    #[test]
    fn off_bin_frequency_rejected() {
        let grid = SimulationGrid::new(64.0, 64).unwrap();
        let y = vec![0.0; 64];
        assert!(matches!(
            channel_bin_phasor(&y, &grid, 4.5),
            Err(Im3Error::OffBinFrequency { .. })
        ));
    }

    #[test]
    fn measure_three_channel_center_is_exact_per_trial() {
        let plan = ChannelPlan::equal(3, 16.0, 1.0, 1.0).unwrap();
        let grid = SimulationGrid::for_plan(&plan).unwrap();
        let est = measure_aci_mc(&plan, &unit_cubic(), 2, 4, 7, &grid).unwrap();
        assert!((est.mean - 1.125).abs() < 1e-9, "got {}", est.mean);
        assert!(est.stderr < 1e-9);
        let edge = measure_aci_mc(&plan, &unit_cubic(), 1, 4, 7, &grid).unwrap();
        assert!((edge.mean - 9.0 / 32.0).abs() < 1e-9);
    }

    #[test]
    fn measure_two_channels_is_silent() {
        let plan = ChannelPlan::equal(2, 16.0, 1.0, 1.0).unwrap();
        let grid = SimulationGrid::for_plan(&plan).unwrap();
        for n in 1..=2 {
            let est = measure_aci_mc(&plan, &unit_cubic(), n, 3, 1, &grid).unwrap();
            assert!(est.mean < 1e-18, "channel {n} got {}", est.mean);
        }
    }

    #[test]
    fn per_trial_power_matches_coherent_engine_value() {
        let model = unit_cubic();
        for n_channels in [3usize, 5, 9] {
            let plan = ChannelPlan::equal(n_channels, 16.0, 1.0, 1.0).unwrap();
            let grid = SimulationGrid::for_plan(&plan).unwrap();
            for trial in 0..3u64 {
                let phases = PhaseRealization::for_trial(n_channels, 99, trial);
                let x = synthesize(&plan, &phases, &grid).unwrap();
                let y = apply_nonlinearity(&x, &model);
                for n in 1..=n_channels {
                    let bin_phasor =
                        channel_bin_phasor(&y, &grid, plan.center_frequency(n)).unwrap();
                    let s = signal_term_amplitude(&plan, &model, n).unwrap();
                    let residual = bin_phasor - Complex64::from_polar(s, phases.phases[n - 1]);
                    let measured = residual.norm_sqr() / 2.0;
                    let analytic = aci_power_coherent(&plan, &model, n, &phases.phases).unwrap();
                    let err = (measured - analytic).abs() / analytic.max(1e-30);
                    assert!(
                        err < 1e-6,
                        "N={n_channels} trial {trial} channel {n}: {measured} vs {analytic}"
                    );
                }
            }
        }
    }

    #[test]
    fn mc_mean_approaches_incoherent_power() {
        let plan = ChannelPlan::equal(5, 16.0, 1.0, 1.0).unwrap();
        let model = unit_cubic();
        let grid = SimulationGrid::for_plan(&plan).unwrap();
        let analytic = aci_power(&plan, &model, 3).unwrap();
        let est = measure_aci_mc(&plan, &model, 3, 600, 2024, &grid).unwrap();
        assert!(
            (est.mean - analytic).abs() < 3.0 * est.stderr,
            "mean {} vs analytic {} (stderr {})",
            est.mean,
            analytic,
            est.stderr
        );
    }

    #[test]
    fn estimated_removal_matches_analytic_at_scale() {
        let plan = ChannelPlan::uniform(16.0, 1.0, &[1.0, 0.8, 1.2, 0.9, 1.1]).unwrap();
        let model = unit_cubic();
        let grid = SimulationGrid::for_plan(&plan).unwrap();
        let a =
            measure_aci_mc_with(&plan, &model, 3, 800, 5, &grid, SignalRemoval::Analytic).unwrap();
        let e =
            measure_aci_mc_with(&plan, &model, 3, 800, 5, &grid, SignalRemoval::Estimated).unwrap();
        let tol = 3.0 * (a.stderr + e.stderr) + 1e-3 * a.mean;
        assert!((a.mean - e.mean).abs() < tol, "{} vs {}", a.mean, e.mean);
    }

    #[test]
    fn profile_measurement_matches_single_channel_calls() {
        let plan = ChannelPlan::equal(4, 16.0, 1.0, 1.0).unwrap();
        let model = unit_cubic();
        let grid = SimulationGrid::for_plan(&plan).unwrap();
        let profile =
            measure_aci_profile_mc(&plan, &model, 16, 3, &grid, SignalRemoval::Analytic).unwrap();
        for n in 1..=4 {
            let single = measure_aci_mc(&plan, &model, n, 16, 3, &grid).unwrap();
            assert_eq!(profile[n - 1], single, "channel {n}");
        }
    }

    #[test]
    fn folding_clearance_enforced() {
        // f0 = 2, N = 10: products fold onto the carriers.
        let plan = ChannelPlan::equal(10, 2.0, 1.0, 1.0).unwrap();
        let grid = SimulationGrid::new(1024.0, 1024).unwrap();
        let err = measure_aci_mc(&plan, &unit_cubic(), 5, 2, 0, &grid).unwrap_err();
        assert!(matches!(err, Im3Error::GridIncompatible(_)));
    }

    #[test]
    fn zero_trials_rejected() {
        let plan = ChannelPlan::equal(3, 16.0, 1.0, 1.0).unwrap();
        let grid = SimulationGrid::for_plan(&plan).unwrap();
        assert_eq!(
            measure_aci_mc(&plan, &unit_cubic(), 1, 0, 0, &grid),
            Err(Im3Error::NoTrials)
        );
    }

    #[test]
    fn snapshot_single_tone_leaves_only_third_harmonic() {
        let plan = ChannelPlan::uniform(16.0, 1.0, &[1.0]).unwrap();
        let grid = SimulationGrid::for_plan(&plan).unwrap();
        let snap = waveform_snapshot(
            &plan,
            &PhaseRealization::new(vec![1.1], 0),
            &unit_cubic(),
            &grid,
        )
        .unwrap();
        for &(f, p) in &snap.intermod_spectrum {
            if (f - 48.0).abs() < 0.5 {
                assert!((p - 0.25 * 0.25 / 2.0).abs() < 1e-9, "3f line wrong: {p}");
            } else {
                assert!(p < 1e-18, "unexpected line at {f}: {p}");
            }
        }
    }

    #[test]
    fn snapshot_three_tones_has_no_carrier_lines() {
        let plan = ChannelPlan::equal(3, 16.0, 1.0, 1.0).unwrap();
        let grid = SimulationGrid::for_plan(&plan).unwrap();
        let phases = PhaseRealization::draw(3, 11);
        let snap = waveform_snapshot(&plan, &phases, &unit_cubic(), &grid).unwrap();

        // Expected line positions: IM3 in-band and the out-of-band cubic
        // images. Carriers must be gone except where an IM3 product lands
        // on one (channel 2 receives f1+f3-f2).
        let carriers = [16.0f64, 17.0, 18.0];
        let allowed: Vec<f64> = {
            let mut v = Vec::new();
            for &fi in &carriers {
                v.push(3.0 * fi);
                for &fk in &carriers {
                    if fi != fk {
                        v.push(2.0 * fi + fk);
                        v.push((2.0 * fi - fk).abs());
                    }
                }
            }
            v.push(16.0 + 17.0 + 18.0);
            v.push(16.0 + 17.0 - 18.0);
            v.push(16.0 - 17.0 + 18.0);
            v.push(16.0 + 18.0 - 17.0);
            v
        };
        for &(f, p) in &snap.intermod_spectrum {
            if p > 1e-15 {
                assert!(
                    allowed.iter().any(|&a| (a - f).abs() < 1e-6),
                    "unexpected spectral line at {f} (power {p})"
                );
            }
        }
        // Channels 1 and 3 receive only double products; channel 2's slot
        // carries the lone triple product.
        let p2 = snap
            .intermod_spectrum
            .iter()
            .find(|&&(f, _)| (f - 17.0).abs() < 1e-9)
            .unwrap()
            .1;
        assert!((p2 - 1.125).abs() < 1e-9, "triple product power: {p2}");
        // And the all-pseudo degenerate case stays silent.
        let silent_plan = ChannelPlan::uniform(16.0, 1.0, &[0.0, 0.0]).unwrap();
        let silent_grid = SimulationGrid::for_plan(&silent_plan).unwrap();
        let silent = waveform_snapshot(
            &silent_plan,
            &PhaseRealization::draw(2, 0),
            &unit_cubic(),
            &silent_grid,
        )
        .unwrap();
        assert!(silent.intermod.iter().all(|&v| v == 0.0));
    }
}
