//! Command-line front end: simulate holographic frame streams, reconstruct
//! them, and report convergence, sweeps, and latency.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use dhwfs::config::RunConfig;
use dhwfs::dynamic::DynamicReconstructor;
use dhwfs::error::{Error, Result};
use dhwfs::grid::RealField;
use dhwfs::io::{
    read_measurements, read_phases, write_aggregate_csv, write_atomic, write_raster,
    write_strehl_csv, write_sweep_csv, StreamHeader, StreamWriter, SweepRow,
};
use dhwfs::metrics::{aggregate_runs, mean_strehl_in_window, StrehlMeter, StrehlRecord};
use dhwfs::pipeline::{
    bench, run_seeds, seed_list, sweep_objective, Simulator, CONVERGED_WINDOW,
};

#[derive(Parser)]
#[command(
    name = "dhwfs",
    version,
    about = "Streaming wavefront sensing from digital-holography frames"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a measurement stream and its ground-truth phases.
    Simulate(SimulateArgs),
    /// Reconstruct phases from a measurement stream file.
    Reconstruct(ReconstructArgs),
    /// Simulate and reconstruct in memory across seeds.
    Run(RunArgs),
    /// Grid-search alpha and lambda by converged mean Strehl.
    Sweep(SweepArgs),
    /// Measure per-frame reconstruction latency and transform counts.
    Bench(BenchArgs),
}

/// Config layering shared by every subcommand: defaults, then `--config`
/// file, then `DHWFS_*` environment variables, then these flags.
#[derive(Args)]
struct ConfigArgs {
    /// Plain-text config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Grid size in pixels per side.
    #[arg(long)]
    n: Option<usize>,

    /// Frame rate in Hz.
    #[arg(long)]
    fs: Option<f64>,

    /// Greenwood frequency in Hz.
    #[arg(long)]
    fg: Option<f64>,

    /// Turbulence strength (aperture diameter over coherence length).
    #[arg(long)]
    d_over_r0: Option<f64>,

    /// Measurement signal-to-noise ratio in dB.
    #[arg(long)]
    snr_db: Option<f64>,

    /// Optical wavelength in meters (reporting only).
    #[arg(long)]
    wavelength: Option<f64>,

    /// Flow direction as `x,y`; normalized to a unit vector.
    #[arg(long)]
    flow_direction: Option<String>,

    /// Number of frames to simulate or reconstruct.
    #[arg(long)]
    frames: Option<u32>,

    /// Base RNG seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Seed count for multi-seed runs and sweeps.
    #[arg(long)]
    seeds: Option<u32>,

    /// Aperture diameter in pixels, or `none` for the full grid width.
    #[arg(long)]
    aperture_diameter_px: Option<String>,

    /// Phase-screen oversize factor relative to the grid.
    #[arg(long)]
    screen_oversize: Option<usize>,

    /// Turbulence outer scale in pixels, or `none` for the default.
    #[arg(long)]
    outer_scale_px: Option<String>,

    /// Quadratic pupil-phase coefficient per pixel squared.
    #[arg(long)]
    curvature: Option<f64>,

    /// Background reflectance of the procedural bar target.
    #[arg(long)]
    scene_background: Option<f64>,

    /// Foreground reflectance of the procedural bar target.
    #[arg(long)]
    scene_foreground: Option<f64>,

    /// P5 graymap used as the reflectance instead of the bar target.
    #[arg(long)]
    scene_path: Option<String>,

    /// Reflectance blend weight toward the back-projection, in [0, 1].
    #[arg(long)]
    lambda: Option<f64>,

    /// Back-projection scale in the reflectance blend, in [0, 1].
    #[arg(long)]
    alpha: Option<f64>,

    /// EM passes per frame.
    #[arg(long)]
    nk: Option<u32>,

    /// Reconstruction noise variance, or `none` to derive it from the SNR.
    #[arg(long)]
    noise_variance: Option<String>,

    /// Reflectance floor.
    #[arg(long)]
    r_min: Option<f64>,

    /// Reflectance prior: `none` or `mrf`.
    #[arg(long)]
    prior: Option<String>,

    /// Markov-random-field shape exponent in [1, 2].
    #[arg(long)]
    mrf_p: Option<f64>,

    /// Markov-random-field scale parameter.
    #[arg(long)]
    mrf_sigma_x: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        cfg.apply_env_pairs(std::env::vars())?;
        let flags: [(&str, Option<String>); 25] = [
            ("n", self.n.map(|v| v.to_string())),
            ("fs", self.fs.map(|v| v.to_string())),
            ("fg", self.fg.map(|v| v.to_string())),
            ("d_over_r0", self.d_over_r0.map(|v| v.to_string())),
            ("snr_db", self.snr_db.map(|v| v.to_string())),
            ("wavelength", self.wavelength.map(|v| v.to_string())),
            ("flow_direction", self.flow_direction.clone()),
            ("frames", self.frames.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("seeds", self.seeds.map(|v| v.to_string())),
            ("aperture_diameter_px", self.aperture_diameter_px.clone()),
            ("screen_oversize", self.screen_oversize.map(|v| v.to_string())),
            ("outer_scale_px", self.outer_scale_px.clone()),
            ("curvature", self.curvature.map(|v| v.to_string())),
            ("scene_background", self.scene_background.map(|v| v.to_string())),
            ("scene_foreground", self.scene_foreground.map(|v| v.to_string())),
            ("scene_path", self.scene_path.clone()),
            ("lambda", self.lambda.map(|v| v.to_string())),
            ("alpha", self.alpha.map(|v| v.to_string())),
            ("nk", self.nk.map(|v| v.to_string())),
            ("noise_variance", self.noise_variance.clone()),
            ("r_min", self.r_min.map(|v| v.to_string())),
            ("prior", self.prior.clone()),
            ("mrf_p", self.mrf_p.map(|v| v.to_string())),
            ("mrf_sigma_x", self.mrf_sigma_x.map(|v| v.to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set_key(key, &v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,

    /// Output directory for the stream files and manifest.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    config: ConfigArgs,

    /// Measurement stream to reconstruct.
    #[arg(long)]
    input: PathBuf,

    /// Truth phase stream; enables the per-frame Strehl CSV.
    #[arg(long)]
    truth: Option<PathBuf>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    /// Frame indices at which to dump phase/reflectance rasters
    /// (repeatable).
    #[arg(long = "dump-frame")]
    dump_frames: Vec<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    /// Comma-separated EM pass counts, one reconstruction per value.
    #[arg(long)]
    nk_list: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    /// Comma-separated alpha grid values.
    #[arg(long)]
    alpha_list: Option<String>,

    /// Comma-separated lambda grid values.
    #[arg(long)]
    lambda_list: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    config: ConfigArgs,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Reconstruct(args) => cmd_reconstruct(args),
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Bench(args) => cmd_bench(args),
    };
    if let Err(err) = result {
        eprintln!("error category={} {err}", err.category());
        std::process::exit(1);
    }
}

fn prepare_out_dir(dir: &Path, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_atomic(
        &dir.join("run-manifest.txt"),
        cfg.manifest_string().as_bytes(),
    )?;
    Ok(())
}

fn parse_list<T: std::str::FromStr>(field: &'static str, text: &str) -> Result<Vec<T>> {
    let values: Vec<T> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::config(field, format!("cannot parse {s:?}")))
        })
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(Error::config(field, "need at least one value"));
    }
    Ok(values)
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    prepare_out_dir(&args.out_dir, &cfg)?;
    let mut sim = Simulator::new(&cfg)?;
    let v = sim.velocity();
    println!(
        "flow velocity v=({:.3}, {:.3}) px/frame, |v|={:.3}",
        v[0],
        v[1],
        v[0].hypot(v[1])
    );
    let mut measurements = StreamWriter::create(
        &args.out_dir.join("measurements.dhs1"),
        StreamHeader::measurements(cfg.n as u32, cfg.frames),
    )?;
    let mut phases = StreamWriter::create(
        &args.out_dir.join("truth_phases.phs1"),
        StreamHeader::phases(cfg.n as u32, cfg.frames),
    )?;
    for _ in 0..cfg.frames {
        let frame = sim.next_frame()?;
        measurements.write_measurement(&frame.measurement)?;
        phases.write_phase(&frame.truth_phase)?;
    }
    measurements.finish()?;
    phases.finish()?;
    println!(
        "wrote {} frames to {}",
        cfg.frames,
        args.out_dir.display()
    );
    Ok(())
}

fn dump_rasters(dir: &Path, tag: &str, phase: &RealField, reflectance: &RealField) -> Result<()> {
    write_raster(
        &dir.join(format!("phase_{tag}.pgm")),
        phase,
        -std::f64::consts::PI,
        std::f64::consts::PI,
    )?;
    let hi = reflectance.max();
    write_raster(&dir.join(format!("reflectance_{tag}.pgm")), reflectance, 0.0, hi)?;
    Ok(())
}

fn cmd_reconstruct(args: ReconstructArgs) -> Result<()> {
    let mut cfg = args.config.resolve()?;
    let reader = read_measurements(&args.input)?;
    cfg.n = reader.header().n as usize;
    cfg.validate()?;
    prepare_out_dir(&args.out_dir, &cfg)?;
    let mut truth_reader = match &args.truth {
        Some(path) => {
            let r = read_phases(path)?;
            if r.header().n != reader.header().n {
                return Err(Error::Dimension {
                    context: "truth stream",
                    expected: reader.header().n as usize,
                    actual: r.header().n as usize,
                });
            }
            Some(r)
        }
        None => None,
    };
    let mut recon = DynamicReconstructor::new(cfg.propagation_operator()?, cfg.ddh_config()?);
    let meter = StrehlMeter::new(cfg.aperture()?)?;
    let mut records = Vec::new();
    let mut processed = 0u64;
    for (t, frame) in reader.enumerate() {
        let y = frame?;
        recon.process_frame(&y)?;
        if let Some(truth) = truth_reader.as_mut() {
            let phi_true = truth.next().ok_or_else(|| {
                Error::Format(format!("truth stream ended before frame {t}"))
            })??;
            let strehl = meter.strehl(recon.phase(), &phi_true)?;
            records.push(StrehlRecord {
                frame: t as u64,
                strehl,
                seconds: t as f64 / cfg.fs,
            });
        }
        if args.dump_frames.contains(&(t as u64)) {
            dump_rasters(
                &args.out_dir,
                &format!("f{t:04}"),
                recon.phase(),
                recon.reflectance(),
            )?;
        }
        processed += 1;
    }
    if processed > 0 {
        dump_rasters(&args.out_dir, "final", recon.phase(), recon.reflectance())?;
    }
    if !records.is_empty() {
        write_strehl_csv(&args.out_dir.join("strehl.csv"), &records)?;
        let (lo, hi) = CONVERGED_WINDOW;
        println!(
            "reconstructed {processed} frames, mean Strehl [{lo},{hi}] = {:.4}",
            mean_strehl_in_window(&records, lo, hi)
        );
    } else {
        println!("reconstructed {processed} frames");
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    prepare_out_dir(&args.out_dir, &cfg)?;
    let nk_values = match &args.nk_list {
        Some(text) => parse_list::<u32>("nk_list", text)?,
        None => vec![cfg.nk],
    };
    let seeds = seed_list(&cfg);
    let runs = run_seeds(&cfg, &seeds, &nk_values)?;
    let (lo, hi) = CONVERGED_WINDOW;
    for (k, &nk) in nk_values.iter().enumerate() {
        let mut series = Vec::with_capacity(seeds.len());
        for (run, &seed) in runs.iter().zip(&seeds) {
            write_strehl_csv(
                &args.out_dir.join(format!("strehl-nk{nk}-seed{seed}.csv")),
                &run[k].records,
            )?;
            series.push(run[k].records.clone());
        }
        let aggregate = aggregate_runs(&series)?;
        write_aggregate_csv(
            &args.out_dir.join(format!("aggregate-nk{nk}.csv")),
            &aggregate,
        )?;
        let mean = series
            .iter()
            .map(|records| mean_strehl_in_window(records, lo, hi))
            .sum::<f64>()
            / series.len() as f64;
        println!(
            "nk={nk}: {} seeds, mean Strehl [{lo},{hi}] = {mean:.4}",
            seeds.len()
        );
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    prepare_out_dir(&args.out_dir, &cfg)?;
    let alphas = match &args.alpha_list {
        Some(text) => parse_list::<f64>("alpha_list", text)?,
        None => vec![cfg.alpha],
    };
    let lambdas = match &args.lambda_list {
        Some(text) => parse_list::<f64>("lambda_list", text)?,
        None => vec![cfg.lambda],
    };
    let mut rows = Vec::with_capacity(alphas.len() * lambdas.len());
    let started = Instant::now();
    for &alpha in &alphas {
        for &lambda in &lambdas {
            let mean = sweep_objective(&cfg, alpha, lambda)?;
            rows.push(SweepRow {
                alpha,
                lambda,
                mean_strehl: mean,
            });
        }
    }
    write_sweep_csv(&args.out_dir.join("sweep.csv"), &rows)?;
    let best = rows
        .iter()
        .max_by(|a, b| a.mean_strehl.total_cmp(&b.mean_strehl))
        .expect("at least one sweep cell");
    println!(
        "swept {} cells in {:.1}s, best alpha={} lambda={} mean_strehl={:.4}",
        rows.len(),
        started.elapsed().as_secs_f64(),
        best.alpha,
        best.lambda,
        best.mean_strehl
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    prepare_out_dir(&args.out_dir, &cfg)?;
    let report = bench(&cfg)?;
    let mut csv = String::from("metric,value\n");
    let _ = writeln!(csv, "frames,{}", report.frames);
    let _ = writeln!(csv, "nk,{}", report.nk);
    let _ = writeln!(csv, "transforms_per_frame,{}", report.transforms_per_frame);
    let _ = writeln!(csv, "min_seconds,{}", report.min_seconds);
    let _ = writeln!(csv, "median_seconds,{}", report.median_seconds);
    let _ = writeln!(csv, "p99_seconds,{}", report.p99_seconds);
    let _ = writeln!(csv, "mean_seconds,{}", report.mean_seconds);
    write_atomic(&args.out_dir.join("bench.csv"), csv.as_bytes())?;
    println!(
        "bench nk={}: {} frames, {} transforms/frame, per-frame seconds \
         min={:.6} median={:.6} p99={:.6}",
        report.nk,
        report.frames,
        report.transforms_per_frame,
        report.min_seconds,
        report.median_seconds,
        report.p99_seconds
    );
    Ok(())
}
