//! `im3kit` — third-order intermod / adjacent-channel-interference
//! analysis of multicarrier plans through a memoryless cubic device.

mod output;
mod plan_file;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use im3_kit::closed_form;
use im3_kit::oracle::{
    measure_aci_profile_mc, waveform_snapshot, PhaseRealization, SignalRemoval, SimulationGrid,
};
use im3_kit::qpsk::{measure_qpsk_aci, QpskConfig};
use im3_kit::spectrum::welch_spectrum;
use im3_kit::{aci_profile, signal_term_amplitude, ChannelPlan, NonlinearityModel};

use output::{power_db, print_csv, write_csv_file, Format};

#[derive(Parser)]
#[command(
    name = "im3kit",
    version,
    about = "Third-order intermodulation ACI analysis for multicarrier channel plans"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-channel ACI power profile of a plan
    Analyze(AnalyzeArgs),
    /// Convert an unequally spaced plan to a uniform grid with pseudo channels
    Gridify(GridifyArgs),
    /// Equal-power term counts and powers from the closed-form expressions
    ClosedForm(ClosedFormArgs),
    /// Monte-Carlo waveform measurement versus the analytic profile
    Oracle(OracleArgs),
    /// QPSK-modulated simulation versus the analytic profile
    Qpsk(QpskArgs),
    /// Emit the full CSV bundle (waveforms, profiles, sweeps, QPSK comparison)
    Figures(FiguresArgs),
}

// ---------------------------------------------------------------------------
// Shared argument groups
// ---------------------------------------------------------------------------

#[derive(Args)]
struct PlanArgs {
    /// JSON plan file: {"f0","delta_f","amplitudes"} or {"frequencies","amplitudes"}
    #[arg(long, value_name = "FILE")]
    plan: Option<PathBuf>,
    /// Equal-power shortcut: N channels instead of a plan file
    #[arg(long, value_name = "N", conflicts_with = "plan")]
    channels: Option<usize>,
    /// Amplitude for --channels (volts)
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    /// Reference frequency for --channels; defaults to 16 * delta_f
    #[arg(long)]
    f0: Option<f64>,
    /// Channel spacing for --channels (Hz)
    #[arg(long, default_value_t = 1.0)]
    delta_f: f64,
    /// Relative gridding tolerance for frequency-list plan files
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

impl PlanArgs {
    fn load(&self) -> Result<ChannelPlan> {
        if let Some(path) = &self.plan {
            return plan_file::load_plan(path, self.tol);
        }
        if let Some(n) = self.channels {
            let f0 = self.f0.unwrap_or(16.0 * self.delta_f);
            return Ok(ChannelPlan::equal(n, f0, self.delta_f, self.amplitude)?);
        }
        bail!("either --plan or --channels is required");
    }
}

#[derive(Args)]
struct ModelArgs {
    /// Linear gain rho1 (default 0: pure cubic study; ACI is independent of rho1)
    #[arg(long, default_value_t = 0.0)]
    rho1: f64,
    /// Cubic coefficient rho3 (1/volts^2)
    #[arg(long, default_value_t = 1.0)]
    rho3: f64,
}

impl ModelArgs {
    fn model(&self) -> Result<NonlinearityModel> {
        Ok(NonlinearityModel::new(self.rho1, self.rho3)?)
    }
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// 0 dB reference power (volts^2)
    #[arg(long = "db-ref", default_value_t = 1.0)]
    db_ref: f64,
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    plan: PlanArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    out: OutputArgs,
}

fn run_analyze(args: AnalyzeArgs) -> Result<()> {
    let plan = args.plan.load()?;
    let model = args.model.model()?;
    let profile = aci_profile(&plan, &model);
    let normalized = profile.normalized();
    let signal: Vec<f64> = (1..=plan.n_channels())
        .map(|k| signal_term_amplitude(&plan, &model, k))
        .collect::<im3_kit::Result<_>>()?;

    match args.out.format {
        Format::Table => {
            println!(
                "plan: N = {}, f0 = {}, delta_f = {}, P_T = {}",
                plan.n_channels(),
                plan.f0(),
                plan.delta_f(),
                plan.total_power()
            );
            println!("model: rho1 = {}, rho3 = {}", model.rho1, model.rho3);
            println!(
                "{:>4} {:>12} {:>10} {:>7} {:>14} {:>14} {:>10} {:>14}",
                "n", "freq", "amp", "pseudo", "aci_power", "aci_power/N^2", "aci_db", "signal_amp"
            );
            for ch in plan.channels() {
                let i = ch.index - 1;
                println!(
                    "{:>4} {:>12.4} {:>10.4} {:>7} {:>14.6e} {:>14.6e} {:>10.2} {:>14.6e}",
                    ch.index,
                    ch.center_frequency,
                    ch.amplitude,
                    if ch.is_pseudo { "yes" } else { "no" },
                    profile.powers[i],
                    normalized.powers[i],
                    power_db(profile.powers[i], args.out.db_ref),
                    signal[i],
                );
            }
        }
        Format::Csv => {
            print_csv(
                "n,power,power_normalized,is_pseudo",
                plan.channels().iter().map(|ch| {
                    format!(
                        "{},{},{},{}",
                        ch.index,
                        profile.powers[ch.index - 1],
                        normalized.powers[ch.index - 1],
                        ch.is_pseudo
                    )
                }),
            );
        }
        Format::Json => {
            let doc = serde_json::json!({
                "n_channels": plan.n_channels(),
                "f0": plan.f0(),
                "delta_f": plan.delta_f(),
                "rho1": model.rho1,
                "rho3": model.rho3,
                "profile": profile,
                "normalized": normalized,
                "signal_amplitudes": signal,
                "channels": plan.channels(),
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// gridify
// ---------------------------------------------------------------------------

#[derive(Args)]
struct GridifyArgs {
    #[command(flatten)]
    plan: PlanArgs,
    #[command(flatten)]
    out: OutputArgs,
}

fn run_gridify(args: GridifyArgs) -> Result<()> {
    let plan = args.plan.load()?;
    match args.out.format {
        Format::Table => {
            println!(
                "gridded plan: N = {}, f0 = {}, delta_f = {} ({} real, {} pseudo)",
                plan.n_channels(),
                plan.f0(),
                plan.delta_f(),
                plan.real_indices().len(),
                plan.n_channels() - plan.real_indices().len()
            );
            println!("{:>4} {:>12} {:>10} {:>7}", "n", "freq", "amp", "pseudo");
            for ch in plan.channels() {
                println!(
                    "{:>4} {:>12.6} {:>10.4} {:>7}",
                    ch.index,
                    ch.center_frequency,
                    ch.amplitude,
                    if ch.is_pseudo { "yes" } else { "no" }
                );
            }
        }
        Format::Csv => {
            print_csv(
                "n,frequency,amplitude,is_pseudo",
                plan.channels().iter().map(|ch| {
                    format!(
                        "{},{},{},{}",
                        ch.index, ch.center_frequency, ch.amplitude, ch.is_pseudo
                    )
                }),
            );
        }
        Format::Json => {
            let doc = serde_json::json!({
                "n_channels": plan.n_channels(),
                "f0": plan.f0(),
                "delta_f": plan.delta_f(),
                "channels": plan.channels(),
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// closed-form
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ClosedFormArgs {
    /// Number of equal-power channels
    #[arg(long, value_name = "N")]
    channels: usize,
    /// Amplitude (volts)
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 1.0)]
    rho3: f64,
    #[command(flatten)]
    out: OutputArgs,
}

fn run_closed_form(args: ClosedFormArgs) -> Result<()> {
    let n_channels = args.channels;
    let rows: Vec<(usize, u64, u64, f64)> = (1..=n_channels)
        .map(|n| {
            let c = closed_form::counts(n_channels, n)?;
            let p = closed_form::equal_power_aci(n_channels, n, args.amplitude, args.rho3)?;
            Ok((n, c.l_d, c.l_t, p))
        })
        .collect::<im3_kit::Result<_>>()?;

    match args.out.format {
        Format::Table => {
            println!(
                "closed form: N = {}, A = {}, rho3 = {}",
                n_channels, args.amplitude, args.rho3
            );
            println!(
                "{:>4} {:>6} {:>6} {:>14} {:>14} {:>10}",
                "n", "L_D", "L_T", "P", "P/N^2", "P_db"
            );
            let scale = (n_channels * n_channels) as f64;
            for &(n, l_d, l_t, p) in &rows {
                println!(
                    "{:>4} {:>6} {:>6} {:>14.6e} {:>14.6e} {:>10.2}",
                    n,
                    l_d,
                    l_t,
                    p,
                    p / scale,
                    power_db(p, args.out.db_ref)
                );
            }
        }
        Format::Csv => {
            print_csv(
                "n,L_D,L_T,P",
                rows.iter()
                    .map(|&(n, l_d, l_t, p)| format!("{n},{l_d},{l_t},{p}")),
            );
        }
        Format::Json => {
            let doc: Vec<_> = rows
                .iter()
                .map(|&(n, l_d, l_t, p)| {
                    serde_json::json!({"n": n, "l_d": l_d, "l_t": l_t, "power": p})
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    plan: PlanArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    out: OutputArgs,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Estimate the coherent signal from the data instead of subtracting
    /// the analytic compression phasor
    #[arg(long)]
    independent_removal: bool,
}

fn run_oracle(args: OracleArgs) -> Result<()> {
    let plan = args.plan.load()?;
    let model = args.model.model()?;
    let grid = SimulationGrid::for_plan(&plan)?;
    let removal = if args.independent_removal {
        SignalRemoval::Estimated
    } else {
        SignalRemoval::Analytic
    };
    let measured = measure_aci_profile_mc(&plan, &model, args.trials, args.seed, &grid, removal)?;
    let analytic = aci_profile(&plan, &model);

    match args.out.format {
        Format::Table => {
            println!(
                "oracle: N = {}, trials = {}, seed = {}, grid = {} samples @ {} Hz",
                plan.n_channels(),
                args.trials,
                args.seed,
                grid.num_samples,
                grid.sample_rate
            );
            println!(
                "{:>4} {:>14} {:>14} {:>12} {:>8}",
                "n", "analytic", "mc_mean", "mc_stderr", "|z|"
            );
            for n in 1..=plan.n_channels() {
                let m = &measured[n - 1];
                let a = analytic.powers[n - 1];
                let z = if m.stderr > 0.0 {
                    (m.mean - a).abs() / m.stderr
                } else {
                    0.0
                };
                println!(
                    "{:>4} {:>14.6e} {:>14.6e} {:>12.3e} {:>8.2}",
                    n, a, m.mean, m.stderr, z
                );
            }
        }
        Format::Csv => {
            print_csv(
                "n,analytic,mc_mean,mc_stderr",
                (1..=plan.n_channels()).map(|n| {
                    format!(
                        "{n},{},{},{}",
                        analytic.powers[n - 1],
                        measured[n - 1].mean,
                        measured[n - 1].stderr
                    )
                }),
            );
        }
        Format::Json => {
            let doc: Vec<_> = (1..=plan.n_channels())
                .map(|n| {
                    serde_json::json!({
                        "n": n,
                        "analytic": analytic.powers[n - 1],
                        "mc_mean": measured[n - 1].mean,
                        "mc_stderr": measured[n - 1].stderr,
                    })
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// qpsk
// ---------------------------------------------------------------------------

#[derive(Args)]
struct QpskArgs {
    #[command(flatten)]
    plan: PlanArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    out: OutputArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Override the default symbol count (multiple of 16)
    #[arg(long)]
    symbols: Option<usize>,
}

fn run_qpsk(args: QpskArgs) -> Result<()> {
    let plan = args.plan.load()?;
    let model = args.model.model()?;
    let (mut cfg, mut grid) = QpskConfig::default_for_plan(&plan, args.seed)?;
    if let Some(symbols) = args.symbols {
        cfg.num_symbols = symbols;
        grid = SimulationGrid::new(grid.sample_rate, symbols * cfg.samples_per_symbol)?;
    }
    let report = measure_qpsk_aci(&plan, &model, &cfg, &grid)?;
    let analytic = aci_profile(&plan, &model);
    let n_channels = plan.n_channels();
    let analytic_center = if !n_channels.is_multiple_of(2) {
        analytic.powers[n_channels / 2]
    } else {
        0.5 * (analytic.powers[n_channels / 2 - 1] + analytic.powers[n_channels / 2])
    };
    // Scale the simulated profile so its center matches the analysis.
    let matched: Vec<f64> = report
        .normalized_to_center
        .iter()
        .map(|r| r * analytic_center)
        .collect();

    match args.out.format {
        Format::Table => {
            println!(
                "qpsk: N = {}, symbol_rate = {}, sps = {}, symbols = {}, seed = {}",
                n_channels, cfg.symbol_rate, cfg.samples_per_symbol, cfg.num_symbols, args.seed
            );
            println!(
                "{:>4} {:>14} {:>10} {:>14} {:>12} {:>8}",
                "n", "band_power", "power_db", "normalized_db", "analytic_db", "delta"
            );
            for n in 1..=n_channels {
                let raw_db = power_db(report.per_channel_power[n - 1], args.out.db_ref);
                let norm_db = power_db(matched[n - 1], args.out.db_ref);
                let ana_db = power_db(analytic.powers[n - 1], args.out.db_ref);
                println!(
                    "{:>4} {:>14.6e} {:>10.2} {:>14.2} {:>12.2} {:>8.2}",
                    n,
                    report.per_channel_power[n - 1],
                    raw_db,
                    norm_db,
                    ana_db,
                    norm_db - ana_db
                );
            }
        }
        Format::Csv => {
            print_csv(
                "channel,power_db,power_db_normalized",
                (1..=n_channels).map(|n| {
                    format!(
                        "{n},{},{}",
                        power_db(report.per_channel_power[n - 1], args.out.db_ref),
                        power_db(matched[n - 1], args.out.db_ref)
                    )
                }),
            );
        }
        Format::Json => {
            let doc = serde_json::json!({
                "n_channels": n_channels,
                "symbol_rate": cfg.symbol_rate,
                "samples_per_symbol": cfg.samples_per_symbol,
                "num_symbols": cfg.num_symbols,
                "seed": args.seed,
                "band_power": report.per_channel_power,
                "band_edges": report.band_edges,
                "normalized_to_center": report.normalized_to_center,
                "analytic": analytic.powers,
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// figures
// ---------------------------------------------------------------------------

#[derive(Args)]
struct FiguresArgs {
    /// Output directory for the CSV bundle
    #[arg(long, default_value = "figures")]
    out_dir: PathBuf,
    /// Channel-count range for the sweep file, e.g. 3..99
    #[arg(long, default_value = "3..99")]
    sweep: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Skip the QPSK files (the slowest part of the bundle)
    #[arg(long)]
    skip_qpsk: bool,
    #[command(flatten)]
    out: OutputArgs,
}

fn parse_sweep(s: &str) -> Result<(usize, usize)> {
    let (lo, hi) = s
        .split_once("..")
        .with_context(|| format!("--sweep expects lo..hi, got {s}"))?;
    let lo: usize = lo.trim().parse().context("sweep lower bound")?;
    let hi: usize = hi.trim().parse().context("sweep upper bound")?;
    if lo < 3 || hi < lo {
        bail!("sweep range must satisfy 3 <= lo <= hi, got {lo}..{hi}");
    }
    Ok((lo, hi))
}

fn run_figures(args: FiguresArgs) -> Result<()> {
    let dir = &args.out_dir;
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let db_ref = args.out.db_ref;
    let model = NonlinearityModel::cubic(1.0)?;
    let mut written = Vec::new();

    // Three-tone waveform and spectra, with the intermod component isolated.
    {
        let plan = ChannelPlan::equal(3, 16.0, 1.0, 1.0)?;
        let grid = SimulationGrid::for_plan(&plan)?;
        let phases = PhaseRealization::draw(3, args.seed);
        let snap = waveform_snapshot(&plan, &phases, &model, &grid)?;
        for (name, series) in [
            ("waveform_input.csv", &snap.input),
            ("waveform_output.csv", &snap.output),
            ("waveform_intermod.csv", &snap.intermod),
        ] {
            let path = dir.join(name);
            write_csv_file(
                &path,
                "t,value",
                snap.time
                    .iter()
                    .zip(series)
                    .map(|(&t, &v)| format!("{t},{v}")),
            )?;
            written.push(path);
        }
        for (name, spectrum) in [
            ("spectrum_input.csv", &snap.input_spectrum),
            ("spectrum_output.csv", &snap.output_spectrum),
            ("spectrum_intermod.csv", &snap.intermod_spectrum),
        ] {
            let path = dir.join(name);
            write_csv_file(
                &path,
                "freq_hz,power_db",
                spectrum
                    .iter()
                    .map(|&(f, p)| format!("{f},{}", power_db(p, db_ref))),
            )?;
            written.push(path);
        }
    }

    // Normalized equal-power profiles at the benchmark channel counts.
    for n_channels in [9usize, 10, 31, 99] {
        let plan = ChannelPlan::equal(n_channels, 16.0, 1.0, 1.0)?;
        let profile = aci_profile(&plan, &model);
        let normalized = profile.normalized();
        let path = dir.join(format!("profile_n{n_channels}.csv"));
        write_csv_file(
            &path,
            "n,power,power_normalized,is_pseudo",
            (1..=n_channels).map(|n| {
                format!(
                    "{n},{},{},false",
                    profile.powers[n - 1],
                    normalized.powers[n - 1]
                )
            }),
        )?;
        written.push(path);
    }

    // Max normalized power and max/min ratio over the channel-count sweep.
    {
        let (lo, hi) = parse_sweep(&args.sweep)?;
        let path = dir.join("sweep_stats.csv");
        let rows: Vec<String> = (lo..=hi)
            .map(|n| {
                Ok(format!(
                    "{n},{},{}",
                    closed_form::max_normalized(n)?,
                    closed_form::ratio_max_min(n)?
                ))
            })
            .collect::<im3_kit::Result<_>>()?;
        write_csv_file(&path, "N,max_normalized,ratio_max_min", rows)?;
        written.push(path);
    }

    if !args.skip_qpsk {
        written.extend(write_qpsk_figures(dir, &model, args.seed, db_ref)?);
    }

    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn write_qpsk_figures(
    dir: &std::path::Path,
    model: &NonlinearityModel,
    seed: u64,
    db_ref: f64,
) -> Result<Vec<PathBuf>> {
    use im3_kit::oracle::apply_nonlinearity;
    use im3_kit::qpsk::{
        channel_waveforms, intermod_residual, synthesize_qpsk_with, QpskSymbols, WELCH_SEGMENTS,
    };

    let mut written = Vec::new();

    // Five-carrier QPSK composite: input, device output, isolated intermod.
    {
        let plan = ChannelPlan::equal(5, 16.0, 1.0, 1.0)?;
        let (cfg, grid) = QpskConfig::default_for_plan(&plan, seed)?;
        let symbols = QpskSymbols::random(&plan, &cfg);
        let x = synthesize_qpsk_with(&plan, &cfg, &grid, &symbols)?;
        let y = apply_nonlinearity(&x, model);
        let waves = channel_waveforms(&plan, &cfg, &grid, &symbols)?;
        let residual = intermod_residual(&y, &plan, &waves, &grid)?;
        for (name, series) in [
            ("qpsk_spectrum_input.csv", &x),
            ("qpsk_spectrum_output.csv", &y),
            ("qpsk_spectrum_intermod.csv", &residual),
        ] {
            let spectrum = welch_spectrum(series, grid.sample_rate, WELCH_SEGMENTS);
            let path = dir.join(name);
            write_csv_file(
                &path,
                "freq_hz,power_db",
                spectrum
                    .iter()
                    .map(|&(f, p)| format!("{f},{}", power_db(p, db_ref))),
            )?;
            written.push(path);
        }
    }

    // Nine-channel comparison: analysis vs center-normalized simulation.
    {
        let plan = ChannelPlan::equal(9, 16.0, 1.0, 1.0)?;
        let (cfg, grid) = QpskConfig::default_for_plan(&plan, seed)?;
        let report = measure_qpsk_aci(&plan, model, &cfg, &grid)?;
        let analytic = aci_profile(&plan, model);
        let center = analytic.powers[4];
        let path = dir.join("qpsk_comparison_n9.csv");
        write_csv_file(
            &path,
            "n,analytic_power_db,qpsk_power_db",
            (1..=9).map(|n| {
                format!(
                    "{n},{},{}",
                    power_db(analytic.powers[n - 1], db_ref),
                    power_db(report.normalized_to_center[n - 1] * center, db_ref)
                )
            }),
        )?;
        written.push(path);
    }

    Ok(written)
}

// ---------------------------------------------------------------------------

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Analyze(args) => run_analyze(args),
        Command::Gridify(args) => run_gridify(args),
        Command::ClosedForm(args) => run_closed_form(args),
        Command::Oracle(args) => run_oracle(args),
        Command::Qpsk(args) => run_qpsk(args),
        Command::Figures(args) => run_figures(args),
    }
}

fn main() -> ExitCode {
    // Die quietly when a pipe downstream closes, like any line-oriented
    // Unix tool.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
