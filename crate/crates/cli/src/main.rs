use andl::metrics::{amplitude_histogram, welch_psd, write_histogram_csv};
use andl::sim::{
    self, emit_results, frame_front_end, mitigate_to_adc, parse_config, run_methods, write_results, Mitigation,
    OutputFormat, SimScenario, SweepAxis, FRAME_SYMBOLS,
};
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Monte Carlo harness for the ANDL impulsive-noise link simulator.
#[derive(Parser)]
#[command(name = "andl-sim", version, about)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario (optionally several methods on the same data).
    Run(RunArgs),
    /// Sweep one axis over a list of values for a set of methods.
    Sweep(SweepArgs),
    /// Evaluate the analytic SNR model only.
    Analyze(AnalyzeArgs),
    /// Dump time traces, amplitude histograms and PSDs of one frame.
    Psd(PsdArgs),
    /// Run the built-in invariant checks.
    Selftest,
    /// Print a gnuplot script for a result CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Comma-separated methods, e.g. `none,andl_exact,blanking`.
    #[arg(long)]
    methods: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// One of `ebn0`, `sir`, `lambda`, `tau_as`.
    #[arg(long)]
    axis: String,
    /// Comma-separated axis values.
    #[arg(long, allow_hyphen_values = true)]
    values: String,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    axis: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    values: Option<String>,
}

#[derive(Args)]
struct PsdArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    methods: Option<String>,
    /// Welch segment length in samples.
    #[arg(long, default_value_t = 4096)]
    segment: usize,
}

#[derive(Args)]
struct PlotArgs {
    /// Result CSV written by `run` or `sweep`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Column for the x axis.
    #[arg(long, default_value = "ebn0_db")]
    x: String,
}

fn parse_list<T: std::str::FromStr<Err = andl::Error>>(s: &str) -> andl::Result<Vec<T>> {
    s.split(',').map(str::trim).filter(|v| !v.is_empty()).map(str::parse).collect()
}

fn parse_values(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().map_err(|_| andl::Error::Config(format!("bad value `{v}` in --values")).into()))
        .collect()
}

fn load(config: &Path, seed: Option<u64>) -> anyhow::Result<SimScenario> {
    let mut s = parse_config(config)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn methods_or(common: &Common, s: &SimScenario) -> anyhow::Result<Vec<Mitigation>> {
    Ok(match &common.methods {
        Some(m) => parse_list(m)?,
        None => vec![s.mitigation],
    })
}

fn emit(records: &[sim::ResultRecord], common: &Common) -> anyhow::Result<()> {
    let format: OutputFormat = common.format.parse()?;
    match &common.out {
        Some(path) => emit_results(records, format, path)?,
        None => write_results(records, format, std::io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_run(a: &RunArgs) -> anyhow::Result<()> {
    let s = load(&a.common.config, a.common.seed)?;
    let methods = methods_or(&a.common, &s)?;
    let records = run_methods(&s, &methods)?;
    for r in &records {
        log::info!("{} BER {:.3e} ({} bits) in {:.2}s", r.method, r.ber.ber, r.ber.bits, r.wall_time_s);
    }
    emit(&records, &a.common)
}

fn cmd_sweep(a: &SweepArgs) -> anyhow::Result<()> {
    let s = load(&a.common.config, a.common.seed)?;
    let axis: SweepAxis = a.axis.parse()?;
    let values = parse_values(&a.values)?;
    let methods = methods_or(&a.common, &s)?;
    let records = sim::sweep(&s, axis, &values, &methods)?;
    emit(&records, &a.common)
}

fn cmd_analyze(a: &AnalyzeArgs) -> anyhow::Result<()> {
    let s = parse_config(&a.config)?;
    let cells: Vec<SimScenario> = match (&a.axis, &a.values) {
        (Some(axis), Some(values)) => {
            let axis: SweepAxis = axis.parse()?;
            parse_values(values)?.into_iter().map(|v| axis.apply(&s, v)).collect()
        }
        (None, None) => vec![s],
        _ => bail!(andl::Error::Config("--axis and --values go together".into())),
    };
    let mut rows = Vec::new();
    for c in &cells {
        let (mix, grid) = c.analytic_inputs()?;
        let p = c.analytic()?;
        rows.push(serde_json::json!({
            "ebn0_db": c.ebn0_db(),
            "sir_db": c.sir_db(),
            "lambda_hz": c.lambda_hz,
            "tau_as_s": c.tau_as_s,
            "epsilon": mix.epsilon,
            "alpha0": grid.alpha0,
            "n_levels": grid.n,
            "mean_tau_s": andl::analytic::mean_tau(&mix, &grid),
            "p_s": p.p_s,
            "p_w": p.p_w,
            "p_i": p.p_i,
            "snr_analytic_db": p.snr_avg_db(),
            "ber_bound": p.ber_bound,
        }));
    }
    let text = serde_json::to_string_pretty(&rows)?;
    match &a.out {
        Some(path) => std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_psd(a: &PsdArgs) -> anyhow::Result<()> {
    let s = load(&a.config, a.seed)?;
    let methods: Vec<Mitigation> = match &a.methods {
        Some(m) => parse_list(m)?,
        None => vec![Mitigation::None, Mitigation::Linear, Mitigation::Clipping, Mitigation::Blanking, Mitigation::AndlExact],
    };
    std::fs::create_dir_all(&a.out)?;
    let fe = frame_front_end(&s, 0, s.n_symbols.min(FRAME_SYMBOLS))?;
    let write = |name: &str, f: &dyn Fn(&mut dyn Write) -> andl::Result<()>| -> anyhow::Result<()> {
        let path = a.out.join(name);
        let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
        f(&mut w)?;
        w.flush()?;
        Ok(())
    };
    let clean_adc = andl::signal::adc_sample(&fe.clean, &s.ofdm)?;
    let amax = 4.0 * andl::signal::adc_sample(&fe.received, &s.ofdm)?.power().sqrt().max(1e-12);
    let dump = |tag: &str, sig: &andl::ComplexEnvelope| -> anyhow::Result<()> {
        let seg = a.segment.min(sig.len());
        let psd = welch_psd(sig, seg, 0.5)?;
        write(&format!("psd_{tag}.csv"), &|w| psd.write_csv(w))?;
        let hist = amplitude_histogram(sig, 200, amax)?;
        write(&format!("hist_{tag}.csv"), &|w| write_histogram_csv(&hist, w))?;
        let head = andl::ComplexEnvelope::new(sig.sample_rate_hz(), sig.samples()[..sig.len().min(8192)].to_vec())?;
        write(&format!("trace_{tag}.csv"), &|w| head.write_csv(w))?;
        Ok(())
    };
    dump("clean", &clean_adc)?;
    for &m in &methods {
        let mut adc = mitigate_to_adc(&fe.received, &s, m)?;
        if let Some(method) = m.threshold_method() {
            // a fixed threshold when given, otherwise the grid optimum over this frame
            let value = match s.threshold {
                Some(t) => t,
                None => {
                    let one = SimScenario { n_symbols: s.n_symbols.min(FRAME_SYMBOLS), ..s.clone() };
                    run_methods(&one, &[m])?[0].threshold.unwrap_or(f64::INFINITY)
                }
            };
            adc = andl::baseline::ThresholdSpec::new(value, method)?.apply(&adc)?;
        }
        dump(m.name(), &adc)?;
    }
    eprintln!("wrote PSD, histogram and trace files to {}", a.out.display());
    Ok(())
}

fn cmd_selftest() -> anyhow::Result<()> {
    let checks = andl::selftest::run_all()?;
    let mut failed = 0;
    for c in &checks {
        println!("{} {:36} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        bail!("{failed} selftest check(s) failed");
    }
    Ok(())
}

fn cmd_plot(a: &PlotArgs) -> anyhow::Result<()> {
    let x_col = sim::CSV_COLUMNS
        .iter()
        .position(|c| *c == a.x)
        .ok_or_else(|| andl::Error::Config(format!("unknown column `{}`", a.x)))?
        + 1;
    let ber_col = sim::CSV_COLUMNS.iter().position(|c| *c == "ber").unwrap() + 1;
    let bound_col = sim::CSV_COLUMNS.iter().position(|c| *c == "ber_bound").unwrap() + 1;
    let records = sim::read_results(
        std::io::BufReader::new(std::fs::File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?),
        OutputFormat::Csv,
    )?;
    let mut methods: Vec<String> = records.iter().map(|r| r.method.clone()).collect();
    methods.dedup();
    let file = a.input.display().to_string();
    let mut script = format!(
        "set datafile separator ','\nset logscale y\nset xlabel '{}'\nset ylabel 'BER'\nset grid\nset key bottom left\nplot \\\n",
        a.x
    );
    let mut series: Vec<String> = methods
        .iter()
        .map(|m| format!("  '{file}' using (strcol(1) eq '{m}' ? ${x_col} : 1/0):{ber_col} with linespoints title '{m}'"))
        .collect();
    if records.iter().any(|r| r.ber_bound.is_some()) {
        series.push(format!("  '{file}' using {x_col}:{bound_col} with lines dashtype 2 title 'analytic bound'"));
    }
    script.push_str(&series.join(", \\\n"));
    script.push('\n');
    match &a.out {
        Some(p) => std::fs::write(p, script)?,
        None => print!("{script}"),
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.chain()
        .find_map(|e| e.downcast_ref::<andl::Error>())
        .map(|e| e.exit_code() as u8)
        .unwrap_or(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Psd(a) => cmd_psd(a),
        Command::Selftest => cmd_selftest(),
        Command::Plot(a) => cmd_plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
