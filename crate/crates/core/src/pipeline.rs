//! End-to-end engine behind the CLI: frame synthesis under frozen-flow
//! turbulence and the streaming multi-reconstructor harness.

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::dynamic::DynamicReconstructor;
use crate::error::{Error, Result};
use crate::forward::{noise_variance_from_snr, PropagationOperator};
use crate::grid::{complex_gaussian_field, ComplexField, RealField};
use crate::metrics::{mean_strehl_in_window, quantile_sorted, StrehlMeter, StrehlRecord};
use crate::rng::Rng;
use crate::scene::{bar_target, load_reflectance};
use crate::turbulence::{flow_velocity, generate_screen, screen_at_time, PhaseScreen};

/// RNG substream ids, one independent stream per randomness source.
const STREAM_TURBULENCE: u64 = 0;
const STREAM_SPECKLE: u64 = 1;
const STREAM_NOISE: u64 = 2;

/// Frame window over which runs are judged converged; mean Strehl inside it
/// is the sweep objective.
pub const CONVERGED_WINDOW: (u64, u64) = (150, 300);

/// One synthesized detector frame and the phase that produced it.
#[derive(Debug, Clone)]
pub struct SimFrame {
    pub measurement: ComplexField,
    pub truth_phase: RealField,
}

/// Streaming frame synthesizer: a frozen-flow phase screen sliding over a
/// speckled reflectance target, measured through the pupil with per-frame
/// noise calibrated to the configured SNR.
pub struct Simulator {
    n: usize,
    snr_db: f64,
    screen: PhaseScreen,
    velocity: [f64; 2],
    reflectance: RealField,
    op: PropagationOperator,
    speckle_rng: Rng,
    noise_rng: Rng,
    frame: usize,
}

impl Simulator {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        Self::with_seed(cfg, cfg.seed)
    }

    pub fn with_seed(cfg: &RunConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let tcfg = cfg.turbulence_config();
        tcfg.validate()?;
        let mut turb_rng = Rng::new(seed).substream(STREAM_TURBULENCE);
        let screen = generate_screen(&tcfg, &mut turb_rng)?;
        let velocity = flow_velocity(&tcfg)?;
        let reflectance = match &cfg.scene_path {
            Some(path) => load_reflectance(path, cfg.n, cfg.r_min)?,
            None => bar_target(cfg.n, cfg.scene_background, cfg.scene_foreground, cfg.r_min)?,
        }
        .into_field();
        Ok(Self {
            n: cfg.n,
            snr_db: cfg.snr_db,
            screen,
            velocity,
            reflectance,
            op: cfg.propagation_operator()?,
            speckle_rng: Rng::new(seed).substream(STREAM_SPECKLE),
            noise_rng: Rng::new(seed).substream(STREAM_NOISE),
            frame: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Screen translation in pixels per frame.
    pub fn velocity(&self) -> [f64; 2] {
        self.velocity
    }

    pub fn reflectance(&self) -> &RealField {
        &self.reflectance
    }

    pub fn frame_index(&self) -> usize {
        self.frame
    }

    pub fn next_frame(&mut self) -> Result<SimFrame> {
        let t = self.frame;
        let phi = screen_at_time(&self.screen, self.velocity, t, self.n)?;
        let g = complex_gaussian_field(&mut self.speckle_rng, self.n, &self.reflectance)?;
        let mut y = self.op.apply_forward(&phi, &g)?;
        let mask = self.op.aperture();
        let power: f64 = y.data().iter().map(|v| v.norm_sqr()).sum();
        let mean_power = power / mask.active_count() as f64;
        let sigma2 = noise_variance_from_snr(self.snr_db, mean_power)?;
        let scale = (sigma2 * 0.5).sqrt();
        for v in y.data_mut() {
            let re = scale * self.noise_rng.standard_normal();
            let im = scale * self.noise_rng.standard_normal();
            *v += Complex64::new(re, im);
        }
        self.frame += 1;
        Ok(SimFrame {
            measurement: y,
            truth_phase: phi,
        })
    }
}

/// Round a complex frame to the 32-bit wire precision of the measurement
/// container, so in-memory runs match file-based runs bit for bit.
pub fn quantize_measurement(field: &ComplexField) -> ComplexField {
    let mut out = field.clone();
    for v in out.data_mut() {
        *v = Complex64::new(v.re as f32 as f64, v.im as f32 as f64);
    }
    out
}

/// Round a real frame to the 32-bit wire precision of the phase container.
pub fn quantize_phase(field: &RealField) -> RealField {
    let mut out = field.clone();
    for v in out.data_mut() {
        *v = *v as f32 as f64;
    }
    out
}

/// Reconstruction track for one `N_k` value over one seed's frame stream.
#[derive(Debug, Clone)]
pub struct NkSeries {
    pub nk: u32,
    pub records: Vec<StrehlRecord>,
    /// Wall-clock reconstruction time per frame, for benchmarking; the CSV
    /// `seconds` column carries the deterministic frame timestamp instead.
    pub frame_seconds: Vec<f64>,
    pub transforms: u64,
    pub final_phase: RealField,
    pub final_reflectance: RealField,
}

/// Run one seed's stream once, feeding every requested `N_k` reconstructor
/// the same frames, and score each against the truth phase.
pub fn run_seed(cfg: &RunConfig, seed: u64, nk_values: &[u32]) -> Result<Vec<NkSeries>> {
    if nk_values.is_empty() {
        return Err(Error::InvalidArgument {
            name: "nk_values",
            message: "need at least one value".into(),
        });
    }
    let mut sim = Simulator::with_seed(cfg, seed)?;
    let mut recons = Vec::with_capacity(nk_values.len());
    for &nk in nk_values {
        let mut per_nk = cfg.clone();
        per_nk.nk = nk;
        per_nk.validate()?;
        recons.push(DynamicReconstructor::new(
            per_nk.propagation_operator()?,
            per_nk.ddh_config()?,
        ));
    }
    let meter = StrehlMeter::new(cfg.aperture()?)?;
    let mut out: Vec<NkSeries> = nk_values
        .iter()
        .map(|&nk| NkSeries {
            nk,
            records: Vec::with_capacity(cfg.frames as usize),
            frame_seconds: Vec::with_capacity(cfg.frames as usize),
            transforms: 0,
            final_phase: RealField::zeros(cfg.n),
            final_reflectance: RealField::zeros(cfg.n),
        })
        .collect();
    for t in 0..cfg.frames as u64 {
        let frame = sim.next_frame()?;
        let measurement = quantize_measurement(&frame.measurement);
        let truth = quantize_phase(&frame.truth_phase);
        for (series, recon) in out.iter_mut().zip(recons.iter_mut()) {
            let start = Instant::now();
            recon.process_frame(&measurement)?;
            series.frame_seconds.push(start.elapsed().as_secs_f64());
            let strehl = meter.strehl(recon.phase(), &truth)?;
            series.records.push(StrehlRecord {
                frame: t,
                strehl,
                seconds: t as f64 / cfg.fs,
            });
        }
    }
    for (series, recon) in out.iter_mut().zip(recons.iter()) {
        series.transforms = recon.transform_count();
        series.final_phase = recon.phase().clone();
        series.final_reflectance = recon.reflectance().clone();
    }
    Ok(out)
}

/// The seed values a multi-seed run uses: `seed, seed+1, ...`.
pub fn seed_list(cfg: &RunConfig) -> Vec<u64> {
    (0..cfg.seeds as u64).map(|k| cfg.seed + k).collect()
}

/// Independent seeds in parallel; output order matches `seeds`.
pub fn run_seeds(cfg: &RunConfig, seeds: &[u64], nk_values: &[u32]) -> Result<Vec<Vec<NkSeries>>> {
    seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, seed, nk_values))
        .collect()
}

/// Mean Strehl inside [`CONVERGED_WINDOW`], averaged over seeds, for one
/// `(alpha, lambda)` cell.
pub fn sweep_objective(cfg: &RunConfig, alpha: f64, lambda: f64) -> Result<f64> {
    let mut cell = cfg.clone();
    cell.alpha = alpha;
    cell.lambda = lambda;
    cell.validate()?;
    let runs = run_seeds(&cell, &seed_list(&cell), &[cell.nk])?;
    let (lo, hi) = CONVERGED_WINDOW;
    let mean = runs
        .iter()
        .map(|series| mean_strehl_in_window(&series[0].records, lo, hi))
        .sum::<f64>()
        / runs.len() as f64;
    Ok(mean)
}

/// Latency and transform-count report for a single-seed run.
#[derive(Debug, Clone, Copy)]
pub struct BenchReport {
    pub frames: u32,
    pub nk: u32,
    pub transforms_per_frame: f64,
    pub min_seconds: f64,
    pub median_seconds: f64,
    pub p99_seconds: f64,
    pub mean_seconds: f64,
}

pub fn bench(cfg: &RunConfig) -> Result<BenchReport> {
    let series = run_seed(cfg, cfg.seed, &[cfg.nk])?
        .pop()
        .expect("one series per nk value");
    let mut times = series.frame_seconds;
    times.sort_by(f64::total_cmp);
    let (min, median, p99, mean) = if times.is_empty() {
        (0.0, 0.0, 0.0, 0.0)
    } else {
        (
            times[0],
            quantile_sorted(&times, 0.5),
            quantile_sorted(&times, 0.99),
            times.iter().sum::<f64>() / times.len() as f64,
        )
    };
    let per_frame = if cfg.frames == 0 {
        0.0
    } else {
        series.transforms as f64 / cfg.frames as f64
    };
    Ok(BenchReport {
        frames: cfg.frames,
        nk: cfg.nk,
        transforms_per_frame: per_frame,
        min_seconds: min,
        median_seconds: median,
        p99_seconds: p99,
        mean_seconds: mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.n = 32;
        cfg.d_over_r0 = 4.0;
        cfg.frames = 4;
        cfg.seeds = 2;
        cfg
    }

    #[test]
    fn simulator_is_deterministic() {
        let cfg = small_config();
        let mut a = Simulator::new(&cfg).unwrap();
        let mut b = Simulator::new(&cfg).unwrap();
        for _ in 0..3 {
            let fa = a.next_frame().unwrap();
            let fb = b.next_frame().unwrap();
            assert_eq!(fa.measurement.data(), fb.measurement.data());
            assert_eq!(fa.truth_phase.data(), fb.truth_phase.data());
        }
    }

    #[test]
    fn seeds_decorrelate_frames() {
        let cfg = small_config();
        let fa = Simulator::with_seed(&cfg, 1).unwrap().next_frame().unwrap();
        let fb = Simulator::with_seed(&cfg, 2).unwrap().next_frame().unwrap();
        assert_ne!(fa.measurement.data(), fb.measurement.data());
    }

    #[test]
    fn frame_snr_matches_config() {
        let mut cfg = small_config();
        cfg.n = 64;
        cfg.snr_db = 10.0;
        let mut clean_cfg = cfg.clone();
        clean_cfg.snr_db = 300.0;
        let mut noisy = Simulator::new(&cfg).unwrap();
        let mut clean = Simulator::new(&clean_cfg).unwrap();
        let mut signal = 0.0;
        let mut noise = 0.0;
        for _ in 0..20 {
            let yn = noisy.next_frame().unwrap();
            let yc = clean.next_frame().unwrap();
            signal += yc.measurement.norm_sqr();
            noise += yn
                .measurement
                .data()
                .iter()
                .zip(yc.measurement.data())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>();
        }
        // In-aperture signal power over full-grid noise power at 10 dB gives
        // a ratio of 10 * active/total.
        let active = noisy.op.aperture().active_count() as f64;
        let total = (cfg.n * cfg.n) as f64;
        let expected = 10.0 * active / total;
        let ratio = signal / noise;
        assert!(
            (ratio / expected - 1.0).abs() < 0.1,
            "snr ratio {ratio}, expected {expected}"
        );
    }

    #[test]
    fn run_seed_produces_full_series() {
        let cfg = small_config();
        let series = run_seed(&cfg, 7, &[1, 2]).unwrap();
        assert_eq!(series.len(), 2);
        for s in &series {
            assert_eq!(s.records.len(), 4);
            assert_eq!(s.frame_seconds.len(), 4);
            assert!(s.records.iter().all(|r| (0.0..=1.0001).contains(&r.strehl)));
        }
        assert_eq!(series[0].transforms, 4 * 3);
        assert_eq!(series[1].transforms, 4 * 5);
        let timestamps: Vec<f64> = series[0].records.iter().map(|r| r.seconds).collect();
        assert_eq!(timestamps, vec![0.0, 1e-4, 2e-4, 3e-4]);
    }

    #[test]
    fn run_seeds_matches_run_seed() {
        let cfg = small_config();
        let multi = run_seeds(&cfg, &[3, 4], &[1]).unwrap();
        let single = run_seed(&cfg, 4, &[1]).unwrap();
        assert_eq!(multi[1][0].records.len(), single[0].records.len());
        for (a, b) in multi[1][0].records.iter().zip(&single[0].records) {
            assert_eq!(a.strehl, b.strehl);
        }
    }

    #[test]
    fn bench_reports_cost_model() {
        let mut cfg = small_config();
        cfg.nk = 3;
        let report = bench(&cfg).unwrap();
        assert_eq!(report.transforms_per_frame, 7.0);
        assert!(report.min_seconds > 0.0);
        assert!(report.median_seconds >= report.min_seconds);
        assert!(report.p99_seconds >= report.median_seconds);
    }

    #[test]
    fn empty_nk_list_is_rejected() {
        let cfg = small_config();
        assert!(run_seed(&cfg, 1, &[]).is_err());
    }

    #[test]
    fn quantization_is_idempotent_and_close() {
        let cfg = small_config();
        let frame = Simulator::new(&cfg).unwrap().next_frame().unwrap();
        let q = quantize_measurement(&frame.measurement);
        assert_eq!(q.data(), quantize_measurement(&q).data());
        for (a, b) in q.data().iter().zip(frame.measurement.data()) {
            assert!((a - b).norm() <= 1e-6 * b.norm() + 1e-30);
        }
        let p = quantize_phase(&frame.truth_phase);
        assert_eq!(p.data(), quantize_phase(&p).data());
    }
}
