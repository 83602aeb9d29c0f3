//! QPSK-modulated multicarrier intermod simulation.
//!
//! The unmodulated analysis treats each channel as a bare cosine. To check
//! how far that carries for real signals, this module modulates every
//! carrier with an independent QPSK symbol stream (rectangular pulses,
//! constant envelope, per-channel mean power `A_k^2 / 2` exactly matching
//! the tone case), pushes the composite through the polynomial device,
//! strips the signal-proportional component, and integrates the residual
//! periodogram over each channel band.
//!
//! Signal stripping is a least-squares projection of the device output
//! onto the transmitted per-channel waveforms. Modulation decorrelates the
//! intermod products from every carrier stream, so the projection removes
//! the linear and compression terms while leaving the intermod energy
//! untouched (up to O(1/sqrt(num_symbols)) estimation noise). Band powers
//! use Welch-averaged Hann periodograms; intermod spill past a channel's
//! band edges is not reassigned.

use crate::engine::signal_term_amplitude;
use crate::error::{Im3Error, Result};
use crate::exec;
use crate::oracle::{stream_seed, SimulationGrid, MAX_SAMPLES};
use crate::plan::{ChannelPlan, NonlinearityModel};
use crate::spectrum::{band_power_from_psd, hann_psd_two_sided};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_1_SQRT_2, TAU};

/// Number of non-overlapping periodogram segments averaged per report.
pub const WELCH_SEGMENTS: usize = 16;

/// Fixed synthesis chunk; constant so that chunked accumulation is
/// bit-identical at any thread count.
const SYNTH_CHUNK: usize = 1 << 15;

/// Carrier phase tables are precomputed when the phase pattern repeats at
/// least this often.
const MAX_CARRIER_TABLE: u64 = 1 << 16;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Baseband pulse shape. Only rectangular NRZ pulses are implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pulse {
    Rectangular,
}

/// QPSK modulation parameters.
///
/// The symbol rate must not exceed half the channel spacing, which keeps
/// each carrier's null-to-null main lobe inside its own band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpskConfig {
    pub symbol_rate: f64,
    pub samples_per_symbol: usize,
    pub num_symbols: usize,
    pub pulse: Pulse,
    pub seed: u64,
}

impl QpskConfig {
    /// Default configuration and matching grid for a plan: symbol rate
    /// `delta_f / 2`, sample rate picked as for the tone oracle, and 4096
    /// symbols (halved as needed to respect the sample cap).
    pub fn default_for_plan(plan: &ChannelPlan, seed: u64) -> Result<(QpskConfig, SimulationGrid)> {
        let base = SimulationGrid::for_plan(plan)?;
        let symbol_rate = plan.delta_f() / 2.0;
        let samples_per_symbol = 2 * base.num_samples; // fs / (delta_f / 2)
        let mut num_symbols = 4096usize;
        while num_symbols * samples_per_symbol > MAX_SAMPLES {
            num_symbols /= 2;
            if num_symbols < 256 {
                return Err(Im3Error::TooManySamples {
                    required: 256 * samples_per_symbol,
                    cap: MAX_SAMPLES,
                });
            }
        }
        let cfg = QpskConfig {
            symbol_rate,
            samples_per_symbol,
            num_symbols,
            pulse: Pulse::Rectangular,
            seed,
        };
        let grid = SimulationGrid::new(base.sample_rate, num_symbols * samples_per_symbol)?;
        Ok((cfg, grid))
    }

    fn validate(&self, plan: &ChannelPlan, grid: &SimulationGrid) -> Result<Vec<u64>> {
        if !self.symbol_rate.is_finite() || self.symbol_rate <= 0.0 {
            return Err(Im3Error::InvalidConfig(format!(
                "symbol rate must be positive, got {}",
                self.symbol_rate
            )));
        }
        if self.symbol_rate > plan.delta_f() / 2.0 * (1.0 + 1e-12) {
            return Err(Im3Error::InvalidConfig(format!(
                "symbol rate {} exceeds delta_f/2 = {}",
                self.symbol_rate,
                plan.delta_f() / 2.0
            )));
        }
        if self.samples_per_symbol < 8 {
            return Err(Im3Error::InvalidConfig(format!(
                "need at least 8 samples per symbol, got {}",
                self.samples_per_symbol
            )));
        }
        if self.num_symbols == 0 || !self.num_symbols.is_multiple_of(WELCH_SEGMENTS) {
            return Err(Im3Error::InvalidConfig(format!(
                "num_symbols must be a positive multiple of {WELCH_SEGMENTS}, got {}",
                self.num_symbols
            )));
        }
        let expected_fs = self.symbol_rate * self.samples_per_symbol as f64;
        if (grid.sample_rate - expected_fs).abs() > 1e-9 * expected_fs {
            return Err(Im3Error::GridIncompatible(format!(
                "sample rate {} does not equal symbol_rate * samples_per_symbol = {expected_fs}",
                grid.sample_rate
            )));
        }
        if grid.num_samples != self.num_symbols * self.samples_per_symbol {
            return Err(Im3Error::GridIncompatible(format!(
                "record holds {} samples but num_symbols * samples_per_symbol = {}",
                grid.num_samples,
                self.num_symbols * self.samples_per_symbol
            )));
        }
        grid.plan_bins(plan)
    }
}

// ---------------------------------------------------------------------------
// Symbol streams
// ---------------------------------------------------------------------------

/// Per-channel (I, Q) symbol streams, one stream per real channel in plan
/// order. Values are +-1/sqrt(2), so every channel has unit envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct QpskSymbols {
    streams: Vec<Vec<(f64, f64)>>,
}

impl QpskSymbols {
    /// Independent i.i.d. symbols per channel, derived from
    /// (cfg.seed, channel index) so streams never depend on which other
    /// channels exist.
    pub fn random(plan: &ChannelPlan, cfg: &QpskConfig) -> Self {
        let streams = plan
            .real_indices()
            .into_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(cfg.seed, k as u64));
                (0..cfg.num_symbols)
                    .map(|_| {
                        let i = if rng.random::<bool>() {
                            FRAC_1_SQRT_2
                        } else {
                            -FRAC_1_SQRT_2
                        };
                        let q = if rng.random::<bool>() {
                            FRAC_1_SQRT_2
                        } else {
                            -FRAC_1_SQRT_2
                        };
                        (i, q)
                    })
                    .collect()
            })
            .collect();
        Self { streams }
    }

    /// Every symbol pinned to the same constellation point, which collapses
    /// each channel to the unmodulated carrier `cos(2*pi*f_k*t + pi/4)`.
    pub fn constant(plan: &ChannelPlan, cfg: &QpskConfig) -> Self {
        let stream = vec![(FRAC_1_SQRT_2, FRAC_1_SQRT_2); cfg.num_symbols];
        Self {
            streams: vec![stream; plan.real_indices().len()],
        }
    }

    pub fn streams(&self) -> &[Vec<(f64, f64)>] {
        &self.streams
    }
}

// ---------------------------------------------------------------------------
// Carrier generation
// ---------------------------------------------------------------------------

/// Exact-phase carrier evaluator. Phases advance as `m * bin mod M`, which
/// repeats with period `M / gcd(bin, M)`; short periods get lookup tables.
struct Carrier {
    bin: u64,
    m_total: u64,
    tables: Option<(Vec<f64>, Vec<f64>)>,
}

impl Carrier {
    fn new(bin: u64, m_total: u64) -> Self {
        let period = m_total / gcd_u64(bin, m_total);
        let tables = (period <= MAX_CARRIER_TABLE).then(|| {
            let mut cos_tab = Vec::with_capacity(period as usize);
            let mut sin_tab = Vec::with_capacity(period as usize);
            for m in 0..period {
                let units = (m * bin) % m_total;
                let (sin, cos) = (TAU * units as f64 / m_total as f64).sin_cos();
                cos_tab.push(cos);
                sin_tab.push(sin);
            }
            (cos_tab, sin_tab)
        });
        Self {
            bin,
            m_total,
            tables,
        }
    }

    #[inline]
    fn eval(&self, m: u64) -> (f64, f64) {
        match &self.tables {
            Some((cos_tab, sin_tab)) => {
                let idx = (m % cos_tab.len() as u64) as usize;
                (cos_tab[idx], sin_tab[idx])
            }
            None => {
                let units = (m % self.m_total).wrapping_mul(self.bin) % self.m_total;
                let (sin, cos) = (TAU * units as f64 / self.m_total as f64).sin_cos();
                (cos, sin)
            }
        }
    }
}

fn gcd_u64(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Fill `out` with channel samples `I(m) cos - Q(m) sin` starting at
/// absolute sample `m_start`.
fn fill_unit_chunk(
    carrier: &Carrier,
    symbols: &[(f64, f64)],
    samples_per_symbol: usize,
    m_start: usize,
    out: &mut [f64],
) {
    for (offset, slot) in out.iter_mut().enumerate() {
        let m = m_start + offset;
        let (i, q) = symbols[m / samples_per_symbol];
        let (cos, sin) = carrier.eval(m as u64);
        *slot = i * cos - q * sin;
    }
}

struct RealChannelSet {
    indices: Vec<usize>,
    amplitudes: Vec<f64>,
    carriers: Vec<Carrier>,
}

fn real_channel_set(plan: &ChannelPlan, bins: &[u64], m_total: u64) -> RealChannelSet {
    let indices = plan.real_indices();
    let amplitudes = indices.iter().map(|&k| plan.amplitude(k)).collect();
    let carriers = indices
        .iter()
        .map(|&k| Carrier::new(bins[k - 1], m_total))
        .collect();
    RealChannelSet {
        indices,
        amplitudes,
        carriers,
    }
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

fn synthesize_with_symbols(
    plan: &ChannelPlan,
    cfg: &QpskConfig,
    grid: &SimulationGrid,
    symbols: &QpskSymbols,
) -> Result<Vec<f64>> {
    let bins = cfg.validate(plan, grid)?;
    let set = real_channel_set(plan, &bins, grid.num_samples as u64);
    if symbols.streams.len() != set.indices.len() {
        return Err(Im3Error::InvalidConfig(format!(
            "{} symbol streams for {} real channels",
            symbols.streams.len(),
            set.indices.len()
        )));
    }
    let m_total = grid.num_samples;
    let n_chunks = m_total.div_ceil(SYNTH_CHUNK);
    let chunks = exec::map_indexed(n_chunks, |c| {
        let m_start = c * SYNTH_CHUNK;
        let len = SYNTH_CHUNK.min(m_total - m_start);
        let mut acc = vec![0.0; len];
        let mut unit = vec![0.0; len];
        for (r, carrier) in set.carriers.iter().enumerate() {
            fill_unit_chunk(
                carrier,
                &symbols.streams[r],
                cfg.samples_per_symbol,
                m_start,
                &mut unit,
            );
            let amp = set.amplitudes[r];
            for (a, &u) in acc.iter_mut().zip(&unit) {
                *a += amp * u;
            }
        }
        acc
    });
    Ok(chunks.concat())
}

/// Composite QPSK waveform
/// `x[m] = sum_k A_k (I_k(m) cos(2*pi*f_k*m/fs) - Q_k(m) sin(...))`
/// with seeded random symbols. Pseudo channels contribute nothing.
pub fn synthesize_qpsk(
    plan: &ChannelPlan,
    cfg: &QpskConfig,
    grid: &SimulationGrid,
) -> Result<Vec<f64>> {
    synthesize_with_symbols(plan, cfg, grid, &QpskSymbols::random(plan, cfg))
}

/// Same synthesis with caller-provided symbol streams.
pub fn synthesize_qpsk_with(
    plan: &ChannelPlan,
    cfg: &QpskConfig,
    grid: &SimulationGrid,
    symbols: &QpskSymbols,
) -> Result<Vec<f64>> {
    synthesize_with_symbols(plan, cfg, grid, symbols)
}

/// Unit-amplitude transmitted waveform of every real channel, in plan
/// order. These are the projection basis for [`intermod_residual`]; for
/// long records prefer [`measure_qpsk_aci`], which streams the basis
/// instead of materializing it.
pub fn channel_waveforms(
    plan: &ChannelPlan,
    cfg: &QpskConfig,
    grid: &SimulationGrid,
    symbols: &QpskSymbols,
) -> Result<Vec<Vec<f64>>> {
    let bins = cfg.validate(plan, grid)?;
    let set = real_channel_set(plan, &bins, grid.num_samples as u64);
    if symbols.streams.len() != set.indices.len() {
        return Err(Im3Error::InvalidConfig(format!(
            "{} symbol streams for {} real channels",
            symbols.streams.len(),
            set.indices.len()
        )));
    }
    Ok(set
        .carriers
        .iter()
        .enumerate()
        .map(|(r, carrier)| {
            let mut wave = vec![0.0; grid.num_samples];
            fill_unit_chunk(
                carrier,
                &symbols.streams[r],
                cfg.samples_per_symbol,
                0,
                &mut wave,
            );
            wave
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Least-squares signal removal
// ---------------------------------------------------------------------------

/// Solve the symmetric positive-definite system `G c = v` by Cholesky.
#[allow(clippy::needless_range_loop)] // triangular index patterns
fn solve_spd(mut g: Vec<Vec<f64>>, mut v: Vec<f64>) -> Result<Vec<f64>> {
    let k = v.len();
    let scale = (0..k).map(|r| g[r][r]).fold(0.0f64, f64::max);
    for col in 0..k {
        for row in col..k {
            let mut sum = g[row][col];
            for p in 0..col {
                sum -= g[row][p] * g[col][p];
            }
            if row == col {
                if sum <= 1e-12 * scale {
                    return Err(Im3Error::SingularProjection);
                }
                g[col][col] = sum.sqrt();
            } else {
                g[row][col] = sum / g[col][col];
            }
        }
    }
    for row in 0..k {
        let mut sum = v[row];
        for p in 0..row {
            sum -= g[row][p] * v[p];
        }
        v[row] = sum / g[row][row];
    }
    for row in (0..k).rev() {
        let mut sum = v[row];
        for p in row + 1..k {
            sum -= g[p][row] * v[p];
        }
        v[row] = sum / g[row][row];
    }
    Ok(v)
}

/// Device output minus its least-squares projection onto the transmitted
/// channel waveforms. Removes the linear and compression components that
/// ride on each carrier, leaving the intermod products.
pub fn intermod_residual(
    y3: &[f64],
    plan: &ChannelPlan,
    channel_waveforms: &[Vec<f64>],
    grid: &SimulationGrid,
) -> Result<Vec<f64>> {
    let real = plan.real_indices();
    if channel_waveforms.len() != real.len() {
        return Err(Im3Error::InvalidConfig(format!(
            "{} basis waveforms for {} real channels",
            channel_waveforms.len(),
            real.len()
        )));
    }
    if y3.len() != grid.num_samples
        || channel_waveforms
            .iter()
            .any(|w| w.len() != grid.num_samples)
    {
        return Err(Im3Error::GridIncompatible(
            "waveform lengths do not match the grid".into(),
        ));
    }
    if real.is_empty() {
        return Ok(y3.to_vec());
    }

    let k = channel_waveforms.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(&x, &y)| x * y).sum::<f64>();
    let mut gram = vec![vec![0.0; k]; k];
    for r in 0..k {
        for s in 0..=r {
            let d = dot(&channel_waveforms[r], &channel_waveforms[s]);
            gram[r][s] = d;
            gram[s][r] = d;
        }
    }
    let cross: Vec<f64> = channel_waveforms.iter().map(|w| dot(w, y3)).collect();
    let coeffs = solve_spd(gram, cross)?;

    Ok(exec::map_indexed(y3.len(), |m| {
        let mut v = y3[m];
        for (c, w) in coeffs.iter().zip(channel_waveforms) {
            v -= c * w[m];
        }
        v
    }))
}

// ---------------------------------------------------------------------------
// Band-power measurement
// ---------------------------------------------------------------------------

/// How the signal-proportional component is removed before band
/// integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressionRemoval {
    /// Least-squares projection onto the transmitted waveforms. The
    /// standard mode; relies on modulation to decorrelate intermod from
    /// the carriers.
    LeastSquares,
    /// Subtract using the analytic tone compression coefficients. Only
    /// meaningful for constant (unmodulated) symbol streams, where the
    /// least-squares estimate degenerates because the intermod phasors are
    /// co-phased with the carriers.
    Analytic,
}

/// Per-channel residual band powers.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPowerReport {
    /// Residual power integrated over each channel band, volts^2.
    pub per_channel_power: Vec<f64>,
    /// `[f_n - delta_f/2, f_n + delta_f/2)` per channel; disjoint.
    pub band_edges: Vec<(f64, f64)>,
    /// Powers as ratios to the center-channel power (mean of the two
    /// middle channels for even N).
    pub normalized_to_center: Vec<f64>,
    /// The center reference power itself.
    pub center_power: f64,
}

/// Full QPSK measurement with random symbols and least-squares removal.
pub fn measure_qpsk_aci(
    plan: &ChannelPlan,
    model: &NonlinearityModel,
    cfg: &QpskConfig,
    grid: &SimulationGrid,
) -> Result<BandPowerReport> {
    measure_qpsk_aci_detailed(
        plan,
        model,
        cfg,
        grid,
        &QpskSymbols::random(plan, cfg),
        CompressionRemoval::LeastSquares,
    )
}

/// Measurement with explicit symbol streams and removal strategy. The
/// basis is regenerated chunk by chunk, so memory stays at one record
/// regardless of channel count.
pub fn measure_qpsk_aci_detailed(
    plan: &ChannelPlan,
    model: &NonlinearityModel,
    cfg: &QpskConfig,
    grid: &SimulationGrid,
    symbols: &QpskSymbols,
    removal: CompressionRemoval,
) -> Result<BandPowerReport> {
    let bins = cfg.validate(plan, grid)?;
    let set = real_channel_set(plan, &bins, grid.num_samples as u64);
    let k = set.indices.len();
    if symbols.streams.len() != k {
        return Err(Im3Error::InvalidConfig(format!(
            "{} symbol streams for {} real channels",
            symbols.streams.len(),
            k
        )));
    }

    let m_total = grid.num_samples;
    let n_chunks = m_total.div_ceil(SYNTH_CHUNK);
    let sps = cfg.samples_per_symbol;
    let (rho1, rho3) = (model.rho1, model.rho3);

    // Pass 1: device output plus the Gram/cross accumulators of the unit
    // waveforms, chunk by chunk in fixed order.
    let pass1 = exec::map_indexed(n_chunks, |c| {
        let m_start = c * SYNTH_CHUNK;
        let len = SYNTH_CHUNK.min(m_total - m_start);
        let mut units = vec![vec![0.0; len]; k];
        for (r, carrier) in set.carriers.iter().enumerate() {
            fill_unit_chunk(carrier, &symbols.streams[r], sps, m_start, &mut units[r]);
        }
        let mut y = vec![0.0; len];
        for (offset, slot) in y.iter_mut().enumerate() {
            let mut x = 0.0;
            for (amp, unit) in set.amplitudes.iter().zip(&units) {
                x += amp * unit[offset];
            }
            *slot = rho1 * x + rho3 * x * x * x;
        }
        let mut gram = vec![0.0; k * k];
        let mut cross = vec![0.0; k];
        if removal == CompressionRemoval::LeastSquares {
            for (r, unit_r) in units.iter().enumerate() {
                for (s, unit_s) in units.iter().take(r + 1).enumerate() {
                    gram[r * k + s] = unit_r.iter().zip(unit_s).map(|(&a, &b)| a * b).sum::<f64>();
                }
                cross[r] = unit_r.iter().zip(&y).map(|(&a, &b)| a * b).sum::<f64>();
            }
        }
        (y, gram, cross)
    });

    let mut output = Vec::with_capacity(m_total);
    let mut gram = vec![vec![0.0; k]; k];
    let mut cross = vec![0.0; k];
    for (y, g, v) in pass1 {
        output.extend_from_slice(&y);
        for r in 0..k {
            for s in 0..=r {
                gram[r][s] += g[r * k + s];
            }
            cross[r] += v[r];
        }
    }
    #[allow(clippy::needless_range_loop)] // triangular fill
    for r in 0..k {
        for s in 0..r {
            gram[s][r] = gram[r][s];
        }
    }

    let coeffs: Vec<f64> = if k == 0 {
        Vec::new()
    } else {
        match removal {
            CompressionRemoval::LeastSquares => solve_spd(gram, cross)?,
            CompressionRemoval::Analytic => set
                .indices
                .iter()
                .map(|&idx| signal_term_amplitude(plan, model, idx))
                .collect::<Result<_>>()?,
        }
    };

    // Pass 2: subtract the projected signal, regenerating the basis.
    let residual_chunks = exec::map_indexed(n_chunks, |c| {
        let m_start = c * SYNTH_CHUNK;
        let len = SYNTH_CHUNK.min(m_total - m_start);
        let mut res = output[m_start..m_start + len].to_vec();
        let mut unit = vec![0.0; len];
        for (r, carrier) in set.carriers.iter().enumerate() {
            fill_unit_chunk(carrier, &symbols.streams[r], sps, m_start, &mut unit);
            let coeff = coeffs[r];
            for (v, &u) in res.iter_mut().zip(&unit) {
                *v -= coeff * u;
            }
        }
        res
    });
    let residual = residual_chunks.concat();

    let psd = hann_psd_two_sided(&residual, WELCH_SEGMENTS);
    let n_channels = plan.n_channels();
    let half_band = plan.delta_f() / 2.0;
    let mut per_channel_power = Vec::with_capacity(n_channels);
    let mut band_edges = Vec::with_capacity(n_channels);
    for n in 1..=n_channels {
        let f = plan.center_frequency(n);
        let (lo, hi) = (f - half_band, f + half_band);
        band_edges.push((lo, hi));
        per_channel_power.push(band_power_from_psd(&psd, grid.sample_rate, lo, hi));
    }

    let center_power = if !n_channels.is_multiple_of(2) {
        per_channel_power[n_channels / 2]
    } else {
        0.5 * (per_channel_power[n_channels / 2 - 1] + per_channel_power[n_channels / 2])
    };
    let normalized_to_center = per_channel_power
        .iter()
        .map(|&p| {
            if center_power > 0.0 {
                p / center_power
            } else {
                0.0
            }
        })
        .collect();

    Ok(BandPowerReport {
        per_channel_power,
        band_edges,
        normalized_to_center,
        center_power,
    })
}

// ===========================================================================
// Tests
// ===========================================================================
