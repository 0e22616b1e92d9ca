//! `clocknet`: beat-note calculators, trace simulation, spectra and
//! foundations reports for the three-node clock network.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use clocknet::acceptance;
use clocknet::config::{ExperimentConfig, PRESETS};
use clocknet::foundations::{born_i123, product_state_protocol};
use clocknet::sampling::{generate_trace, Sampler, SignalTrace};
use clocknet::spacetime::{beat_frequencies, curvature_split, required_wall_time, SpacetimeError};
use clocknet::spectra::{expected_lines, fft_power, split_band, SpectraError};
use clocknet::Error;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(
    name = "clocknet",
    version,
    about = "Entangled clock network simulator"
)]
struct Cli {
    /// JSON experiment config (may name a preset to start from).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Start from a shipped preset.
    #[arg(long, global = true, value_name = "NAME", value_parser = preset_names())]
    preset: Option<String>,
    /// Master seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Override a config value, e.g. `--set protocol.ghz_n=100`.
    #[arg(long = "set", global = true, value_name = "K=V")]
    set: Vec<String>,
    /// Output directory (default: the config's `output_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Also write whitespace-separated x/y series for plotting.
    #[arg(long, global = true)]
    plot_data: bool,
    /// Run the built-in acceptance suite (exit 3 on failure).
    #[arg(long)]
    verify: bool,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Beat frequencies, curvature split and required wall times.
    Freq,
    /// Generate a sampled signal trace.
    Simulate {
        /// Record noiseless expectation values instead of shots.
        #[arg(long)]
        exact: bool,
    },
    /// Power spectrum, peaks and line-split verdict of a trace.
    Spectrum {
        /// Trace CSV; simulated from the config when omitted.
        #[arg(long, value_name = "CSV")]
        trace: Option<PathBuf>,
        /// Split search band in Hz.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        band: Option<Vec<f64>>,
        #[arg(long, value_enum)]
        window: Option<WindowArg>,
        /// Peak threshold as a multiple of the median power.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Higher-order interference test (seven sub-experiments).
    Born {
        /// Exact Born probabilities instead of shots.
        #[arg(long)]
        exact: bool,
        /// Synthetic term added to P123.
        #[arg(long, value_name = "F")]
        inject: Option<f64>,
    },
    /// Product-state conditional protocol.
    Linearity {
        #[arg(long)]
        exact: bool,
    },
    /// Run the acceptance suite.
    Verify {
        /// Comma-separated criterion numbers (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum WindowArg {
    None,
    Hann,
}

fn preset_names() -> clap::builder::PossibleValuesParser {
    clap::builder::PossibleValuesParser::new(PRESETS.map(|p| p.0))
}

fn presets_help() -> String {
    let mut s = String::from("Presets:\n");
    for (name, desc) in PRESETS {
        s.push_str(&format!("  {name:<16} {desc}\n"));
    }
    s.push_str("\nExit codes: 0 success, 1 config error, 2 runtime error, 3 acceptance failure");
    s
}

enum Failure {
    Config(String),
    Runtime(String),
    Acceptance,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn runtime<E: Into<Error>>(e: E) -> Failure {
    Failure::from(e.into())
}

fn main() -> ExitCode {
    let matches = match Cli::command().after_help(presets_help()).try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Acceptance) => ExitCode::from(3),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let command = match (&cli.command, cli.verify) {
        (Some(c), _) => c,
        (None, true) => &Cmd::Verify { only: vec![] },
        (None, false) => {
            return Err(Failure::Config("no command given (see --help)".into()));
        }
    };
    if let Cmd::Verify { only } = command {
        return verify(only);
    }
    let mut sets = cli.set.clone();
    match command {
        Cmd::Simulate { exact: true } => {
            sets.push("trace.sampler=\"exact_expectation\"".into());
        }
        Cmd::Born { exact, inject } => {
            if *exact {
                sets.push("foundations.exact=true".into());
            }
            if let Some(f) = inject {
                sets.push(format!("foundations.inject={f:?}"));
            }
        }
        Cmd::Linearity { exact: true } => sets.push("foundations.exact=true".into()),
        Cmd::Spectrum {
            window, threshold, ..
        } => {
            if let Some(w) = window {
                let name = match w {
                    WindowArg::None => "none",
                    WindowArg::Hann => "hann",
                };
                sets.push(format!("spectra.window=\"{name}\""));
            }
            if let Some(t) = threshold {
                sets.push(format!("spectra.threshold={t:?}"));
            }
        }
        _ => {}
    }
    let cfg = ExperimentConfig::resolve(
        cli.preset.as_deref(),
        cli.config.as_deref(),
        &sets,
        cli.seed,
    )?;
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    std::fs::create_dir_all(&out).map_err(runtime)?;
    write_json(
        &out.join("config.json"),
        &serde_json::to_value(&cfg).map_err(runtime)?,
    )?;
    match command {
        Cmd::Freq => freq(&cfg, &out),
        Cmd::Simulate { .. } => simulate(&cfg, &out, cli.plot_data),
        Cmd::Spectrum { trace, band, .. } => {
            spectrum(&cfg, &out, trace.as_deref(), band.as_deref(), cli.plot_data)
        }
        Cmd::Born { .. } => born(&cfg, &out),
        Cmd::Linearity { .. } => linearity(&cfg, &out),
        Cmd::Verify { .. } => unreachable!("handled above"),
    }
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).map_err(runtime)? + "\n";
    std::fs::write(path, text).map_err(runtime)
}

fn freq(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let n = cfg.protocol.ghz_n;
    let b = beat_frequencies(&cfg.spacetime, &cfg.clocks)
        .map_err(runtime)?
        .scaled(n as f64);
    let [f12, f23, f13] = b.hz();
    println!("GHZ atoms per node: {n}");
    println!("{:<6} {:>24} {:>24}", "pair", "f (Hz)", "ω (rad/s)");
    for (name, f, w) in [
        ("1-2", f12, b.w12),
        ("2-3", f23, b.w23),
        ("1-3", f13, b.w13),
    ] {
        println!("{name:<6} {f:>24.15e} {w:>24.15e}");
    }
    let mut report = json!({
        "ghz_n": n,
        "f12_hz": f12, "f23_hz": f23, "f13_hz": f13,
        "w12": b.w12, "w23": b.w23, "w13": b.w13,
    });
    match curvature_split(&cfg.spacetime, &cfg.clocks) {
        Ok(s) => {
            let scale = n as f64;
            let (exact, leading) = (s.exact * scale, s.leading_order * scale);
            let rel = if leading != 0.0 {
                (exact - leading) / leading
            } else {
                0.0
            };
            println!(
                "split Δω exact   {exact:.15e} rad/s = {:.15e} Hz",
                exact / std::f64::consts::TAU
            );
            println!(
                "split Δω leading {leading:.15e} rad/s = {:.15e} Hz",
                leading / std::f64::consts::TAU
            );
            println!("relative difference {rel:.6e}");
            report["split_exact"] = json!(exact);
            report["split_leading"] = json!(leading);
            report["split_exact_hz"] = json!(exact / std::f64::consts::TAU);
            report["split_leading_hz"] = json!(leading / std::f64::consts::TAU);
            report["split_relative_difference"] = json!(rel);
            match required_wall_time(&cfg.spacetime, &cfg.clocks, n) {
                Ok(t) => {
                    println!("T = 1/Δω  {:.6} s", t.inverse_split);
                    println!("T = 2π/Δω {:.6} s", t.fft_resolution);
                    report["wall_time_inverse_split"] = json!(t.inverse_split);
                    report["wall_time_fft_resolution"] = json!(t.fft_resolution);
                }
                Err(SpacetimeError::ZeroSplit) => println!("T: unbounded (no curvature split)"),
                Err(e) => return Err(runtime(e)),
            }
        }
        Err(e @ SpacetimeError::UnequalSpacing { .. }) => println!("split: not defined ({e})"),
        Err(e) => return Err(runtime(e)),
    }
    write_json(&out.join("freq.json"), &report)
}

fn simulate(cfg: &ExperimentConfig, out: &Path, plot: bool) -> Result<(), Failure> {
    let trace = generate_trace(&cfg.trace_config(), &cfg.scenario()).map_err(runtime)?;
    let (csv, json) = trace.write(out, "trace").map_err(runtime)?;
    if plot {
        let mut s = String::from("# t_s p0\n");
        for p in &trace.points {
            s.push_str(&format!("{:.10e} {:.10e}\n", p.t, p.p[0]));
        }
        std::fs::write(out.join("trace_plot.dat"), s).map_err(runtime)?;
    }
    let sampler = match cfg.trace.sampler {
        Sampler::CircuitShots => "circuit shots",
        Sampler::AnalyticBernoulli => "analytic Bernoulli",
        Sampler::ExactExpectation => "exact expectation",
    };
    println!(
        "{} points ({sampler}, {} shots/point) -> {} + {}",
        trace.len(),
        cfg.trace.shots_per_point,
        csv.display(),
        json.display()
    );
    Ok(())
}

fn spectrum(
    cfg: &ExperimentConfig,
    out: &Path,
    trace_path: Option<&Path>,
    band: Option<&[f64]>,
    plot: bool,
) -> Result<(), Failure> {
    let trace = match trace_path {
        Some(p) => SignalTrace::read(p).map_err(runtime)?,
        None => generate_trace(&cfg.trace_config(), &cfg.scenario()).map_err(runtime)?,
    };
    let window = cfg.spectra.window;
    let mut spec = fft_power(&trace, cfg.spectra.outcome, window).map_err(runtime)?;
    // prefer the physics recorded with the trace
    let (spacetime, clocks, ghz_n) = match &trace.config {
        Some(echo) => (
            &echo.scenario.spacetime,
            &echo.scenario.clocks,
            echo.scenario.protocol.ghz_n,
        ),
        None => (&cfg.spacetime, &cfg.clocks, cfg.protocol.ghz_n),
    };
    let lines = expected_lines(spacetime, clocks, ghz_n, spec.sample_rate).map_err(runtime)?;
    let band = match (band, cfg.spectra.band) {
        (Some(b), _) => Some((b[0], b[1])),
        (None, Some([lo, hi])) => Some((lo, hi)),
        (None, None) => split_band(&lines, cfg.spectra.band_margin_bins * spec.resolution),
    };
    let band = band.filter(|(lo, hi)| lo < hi);
    let verdict_note = match spec.analyse(cfg.spectra.threshold, band) {
        Ok(()) => None,
        Err(SpectraError::NoPeakInBand { lo, hi }) => {
            spec.analyse(cfg.spectra.threshold, None).map_err(runtime)?;
            Some(format!("no peak in band [{lo}, {hi}] Hz"))
        }
        Err(e) => return Err(runtime(e)),
    };
    let context =
        json!({ "expected_lines": lines, "outcome": cfg.spectra.outcome, "points": trace.len() });
    let (csv, peaks) = spec.write(out, "spectrum", context).map_err(runtime)?;
    if plot {
        std::fs::write(out.join("spectrum_plot.dat"), spec.to_plot_data()).map_err(runtime)?;
    }
    println!(
        "{} bins, resolution {} Hz, window {window:?}",
        spec.power.len(),
        spec.resolution
    );
    for l in &lines {
        println!(
            "expected line {}-{}: {:.6} Hz{}",
            l.pair.0 + 1,
            l.pair.1 + 1,
            l.observed_hz,
            if l.aliased {
                format!(" (aliased from {:.6} Hz)", l.true_hz)
            } else {
                String::new()
            }
        );
    }
    println!("{} peaks above threshold", spec.peaks.len());
    match (&spec.split, verdict_note) {
        (_, Some(note)) => println!("split: {note}"),
        (Some(s), None) => match s.delta_f {
            Some(df) => println!(
                "split: Δf = {df:.6} Hz, {} ({})",
                if s.resolvable {
                    "resolvable"
                } else {
                    "unresolved"
                },
                s.reason
            ),
            None => println!("split: unresolved ({})", s.reason),
        },
        (None, None) => println!("split: no band"),
    }
    println!("-> {} + {}", csv.display(), peaks.display());
    Ok(())
}

fn born(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let params = cfg.observable_params()?;
    let shots = (!cfg.foundations.exact).then_some(cfg.foundations.shots);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let r = born_i123(&params, shots, cfg.foundations.inject, &mut rng).map_err(runtime)?;
    for e in &r.experiments {
        println!("P{:<4} {:.6} {:.6} {:.6}", e.label, e.p[0], e.p[1], e.p[2]);
    }
    for x in 0..3 {
        println!("I123(x={x}) = {:+.3e} ± {:.1e}", r.i123[x], r.i123_err[x]);
    }
    write_json(
        &out.join("born.json"),
        &serde_json::to_value(&r).map_err(runtime)?,
    )
}

fn linearity(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    let params = cfg.observable_params()?;
    let shots = (!cfg.foundations.exact).then_some(cfg.foundations.shots);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let r = product_state_protocol(&params, shots, &mut rng).map_err(runtime)?;
    println!("entangled    {:.6?}", r.entangled);
    match r.conditional {
        Some(c) => println!("conditional  {c:.6?}"),
        None => println!("conditional  undefined (no successes)"),
    }
    println!(
        "success probability {:.6} (2/9 = {:.6})",
        r.success_probability,
        2.0 / 9.0
    );
    if let Some(d) = r.tv_distance {
        println!("total variation {d:.3e}");
    }
    write_json(
        &out.join("linearity.json"),
        &serde_json::to_value(&r).map_err(runtime)?,
    )
}

fn verify(only: &[u8]) -> Result<(), Failure> {
    let ids: Vec<u8> = if only.is_empty() {
        (1..=10).collect()
    } else {
        only.to_vec()
    };
    if let Some(bad) = ids.iter().find(|id| !(1..=10).contains(*id)) {
        return Err(Failure::Config(format!("no criterion {bad}")));
    }
    let mut ok = true;
    for id in ids {
        let r = acceptance::run(id);
        println!("{r}");
        ok &= r.passed;
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Acceptance)
    }
}
