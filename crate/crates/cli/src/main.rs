use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use audition_core::config::serialize_config;
use audition_core::geometry::{ScanParams, ScanTables};
use audition_core::harness::{collect_powers, fit_power_models, named_array, PowerSamples, Scene, ARRAY_NAMES};
use audition_core::pipeline::{run, RunOptions, RunReport, Sink, Sinks};
use audition_core::{parse_config, PipelineConfig};

#[derive(Parser)]
#[command(name = "audition", version, about = "Microphone-array localization, tracking and separation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Process a RAW multichannel stream.
    Run(RunArgs),
    /// Render a scene description to RAW audio and per-frame ground truth.
    Simulate(SimulateArgs),
    /// Compare operation counters with pair pruning and the hierarchical scan toggled.
    Bench(BenchArgs),
    /// Fit the tracker's power mixtures from simulated scenes.
    FitGmm(FitArgs),
    /// Print a default configuration for a built-in array.
    InitConfig(InitArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// RAW input file, or `-` for stdin.
    #[arg(long, default_value = "-")]
    input: String,
    /// Potential DOAs: file path, `tcp://host:port` or `-`.
    #[arg(long)]
    doa_out: Option<String>,
    /// Tracked sources: file path, `tcp://host:port` or `-`.
    #[arg(long)]
    tracks_out: Option<String>,
    /// Directory for separated and post-filtered RAW output.
    #[arg(long)]
    sep_out_dir: Option<PathBuf>,
    /// Print the run report to stderr.
    #[arg(long)]
    counters: bool,
    /// Run every stage on the calling thread.
    #[arg(long)]
    single_thread: bool,
    #[arg(long, default_value_t = 16)]
    queue_capacity: usize,
    /// Directory caching the scan tables between runs.
    #[arg(long)]
    table_cache: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene description (JSON).
    #[arg(long)]
    scene: PathBuf,
    /// Interleaved little-endian RAW output.
    #[arg(long)]
    out: PathBuf,
    /// Ground truth, one JSON object per analysis frame.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    bits: u32,
    #[arg(long, default_value_t = 512)]
    frame_size: usize,
    #[arg(long, default_value_t = 256)]
    hop: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// RAW input; mutually exclusive with `--scene`.
    #[arg(long, conflicts_with = "scene")]
    input: Option<PathBuf>,
    /// Scene rendered at the configured input format.
    #[arg(long)]
    scene: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    config: PathBuf,
    /// Scene descriptions; may be repeated.
    #[arg(long, required = true)]
    scene: Vec<PathBuf>,
    /// Candidates within this angle of an active source count as active.
    #[arg(long, default_value_t = 10.0)]
    tolerance_deg: f64,
    /// Write the config with the fitted mixtures here instead of printing them.
    #[arg(long)]
    write: Option<PathBuf>,
}

#[derive(Args)]
struct InitArgs {
    /// One of the built-in array names.
    #[arg(long)]
    array: String,
    #[arg(long, default_value_t = 16000)]
    fs: u32,
    #[arg(long, default_value_t = 512)]
    frame_size: usize,
    #[arg(long, default_value_t = 256)]
    hop: usize,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Run(a) => cmd_run(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::FitGmm(a) => cmd_fit(a),
        Command::InitConfig(a) => cmd_init(a),
    };
    match result {
        Err(e) if broken_pipe(&e) => Ok(()),
        r => r,
    }
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<io::Error>())
        .any(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_scene(path: &Path) -> Result<Scene> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let scene: Scene = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    scene.validate().with_context(|| format!("validating {}", path.display()))?;
    Ok(scene)
}

fn open_sink(spec: &Option<String>) -> Result<Option<Sink>> {
    spec.as_deref()
        .map(|s| Sink::open(s).with_context(|| format!("opening sink {s}")))
        .transpose()
}

fn print_report(r: &RunReport) {
    let c = &r.counters;
    let scans = c.scans.max(1) as f64;
    eprintln!("frames              {}", r.frames);
    eprintln!("audio seconds       {:.3}", r.audio_seconds);
    eprintln!("wall seconds        {:.3}", r.wall_seconds);
    eprintln!("realtime factor     {:.4}", r.realtime_factor);
    eprintln!("pairs               {}", r.n_pairs);
    eprintln!("pairs computed      {}", c.pairs_computed);
    eprintln!("coarse points/scan  {:.1} of {}", c.coarse_points as f64 / scans, r.coarse_grid_points);
    eprintln!("fine points/scan    {:.1} of {}", c.fine_points as f64 / scans, r.fine_grid_points);
    eprintln!("max queue depth     {} of {}", r.max_queue_depth, r.queue_capacity);
    eprintln!("dropped lines       {}", r.dropped_lines);
    eprintln!("diagnostics         {}", r.diagnostics);
    eprintln!("separated channels  {}", r.separated_channels);
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = stop.clone();
        ctrlc::set_handler(move || stop.store(true, Ordering::SeqCst)).context("installing signal handler")?;
    }
    if let Some(d) = &a.sep_out_dir {
        fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    let sinks = Sinks {
        doa: open_sink(&a.doa_out)?,
        tracks: open_sink(&a.tracks_out)?,
        sep_dir: a.sep_out_dir.clone(),
        events: None,
    };
    let opts = RunOptions {
        threaded: !a.single_thread,
        queue_capacity: a.queue_capacity,
        stop: Some(stop),
        table_cache_dir: a.table_cache.clone(),
    };
    let source: Box<dyn Read + Send> = if a.input == "-" {
        Box::new(io::stdin())
    } else {
        Box::new(BufReader::new(File::open(&a.input).with_context(|| format!("opening {}", a.input))?))
    };
    let report = run(&cfg, source, sinks, &opts)?;
    if report.dropped_lines > 0 {
        log::warn!("{} output lines dropped by network sinks", report.dropped_lines);
    }
    if a.counters {
        print_report(&report);
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let scene = load_scene(&a.scene)?;
    let rendering = scene.render()?;
    let raw = rendering.to_raw(a.bits)?;
    fs::write(&a.out, raw).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(path) = &a.truth {
        let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        for t in scene.ground_truth(a.frame_size, a.hop) {
            serde_json::to_writer(&mut w, &t)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    eprintln!(
        "{} channels, {} samples at {} Hz, {}-bit",
        rendering.mixture.len(),
        rendering.n_samples(),
        rendering.fs_hz,
        a.bits
    );
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let raw = match (&a.input, &a.scene) {
        (Some(p), None) => fs::read(p).with_context(|| format!("reading {}", p.display()))?,
        (None, Some(p)) => {
            let scene = load_scene(p)?;
            if scene.fs_hz != cfg.raw.sample_rate_hz {
                bail!("scene rate {} Hz differs from raw.sample_rate_hz {}", scene.fs_hz, cfg.raw.sample_rate_hz);
            }
            scene.render()?.to_raw(cfg.raw.bits_per_sample)?
        }
        _ => bail!("one of --input or --scene is required"),
    };
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:<7} {:<12} {:>5} {:>14} {:>12} {:>12} {:>8}",
        "pruned", "hierarchical", "pairs", "pairs_computed", "coarse/scan", "fine/scan", "rtf"
    )?;
    for prune in [false, true] {
        for hierarchical in [false, true] {
            let mut c = cfg.clone();
            c.ssl.prune_pairs = prune;
            c.ssl.hierarchical = hierarchical;
            let r = run(&c, io::Cursor::new(&raw), Sinks::default(), &RunOptions::default())?;
            let scans = r.counters.scans.max(1) as f64;
            writeln!(
                out,
                "{:<7} {:<12} {:>5} {:>14} {:>12.1} {:>12.1} {:>8.4}",
                prune,
                hierarchical,
                r.n_pairs,
                r.counters.pairs_computed,
                r.counters.coarse_points as f64 / scans,
                r.counters.fine_points as f64 / scans,
                r.realtime_factor
            )?;
        }
    }
    Ok(())
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    let g = &cfg.general;
    let tables = Arc::new(ScanTables::build(&g.mics, &ScanParams::from_config(&cfg))?);
    let mut samples = PowerSamples::default();
    for path in &a.scene {
        let scene = load_scene(path)?;
        if scene.fs_hz != g.fs_processing_hz {
            bail!("{}: scene rate {} Hz differs from the processing rate {}", path.display(), scene.fs_hz, g.fs_processing_hz);
        }
        let rendering = scene.render()?;
        if rendering.mics.len() != g.mics.len() {
            bail!("{}: scene has {} microphones, config {}", path.display(), rendering.mics.len(), g.mics.len());
        }
        let truth = scene.ground_truth(g.frame_size_samples, g.hop_size_samples);
        samples.extend(collect_powers(&cfg, tables.clone(), &rendering, &truth, a.tolerance_deg));
    }
    log::info!("{} active and {} diffuse samples", samples.active.len(), samples.diffuse.len());
    let Some((active, diffuse)) = fit_power_models(&samples) else {
        bail!(
            "not enough samples to fit ({} active, {} diffuse)",
            samples.active.len(),
            samples.diffuse.len()
        );
    };
    cfg.sst.gmm_active = active;
    cfg.sst.gmm_diffuse = diffuse;
    match &a.write {
        Some(path) => fs::write(path, serialize_config(&cfg) + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => writeln!(
            io::stdout(),
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({
                "gmm_active": cfg.sst.gmm_active,
                "gmm_diffuse": cfg.sst.gmm_diffuse,
            }))?
        )?,
    }
    Ok(())
}

fn cmd_init(a: InitArgs) -> Result<()> {
    let Some(mics) = named_array(&a.array) else {
        bail!("unknown array `{}` (known: {})", a.array, ARRAY_NAMES.join(", "));
    };
    let cfg = PipelineConfig::new(mics, a.fs, a.frame_size, a.hop);
    cfg.validate()?;
    writeln!(io::stdout(), "{}", serialize_config(&cfg))?;
    Ok(())
}
