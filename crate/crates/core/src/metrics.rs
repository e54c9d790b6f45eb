//! Reconstruction quality metrics: wrapped residual phase, peak Strehl
//! ratio by vacuum back-propagation, residual PSF panels, and per-frame
//! aggregation across seeds.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::FftEngine;
use crate::grid::{ApertureMask, ComplexField, RealField};

/// One frame's Strehl measurement plus the wall time spent reconstructing
/// that frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrehlRecord {
    pub frame: u64,
    pub strehl: f64,
    pub seconds: f64,
}

/// Per-frame distribution of Strehl values across seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub frame: u64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

/// Per-pixel wrapped phase difference `arg(e^{j(phi_hat - phi_true)})`,
/// in `(-pi, pi]`.
pub fn residual_phase(phi_hat: &RealField, phi_true: &RealField) -> Result<RealField> {
    if phi_hat.n() != phi_true.n() {
        return Err(Error::Dimension {
            context: "residual_phase",
            expected: phi_true.n(),
            actual: phi_hat.n(),
        });
    }
    let n = phi_hat.n();
    let mut psi = RealField::zeros(n);
    for i in 0..n * n {
        let d = phi_hat.data()[i] - phi_true.data()[i];
        psi.data_mut()[i] = d.sin().atan2(d.cos());
    }
    Ok(psi)
}

/// Strehl evaluator with its own transform engine (so metric transforms do
/// not enter the reconstruction cost audit) and the vacuum peak cached.
pub struct StrehlMeter {
    mask: ApertureMask,
    engine: FftEngine,
    vacuum_peak: f64,
}

impl StrehlMeter {
    pub fn new(mask: ApertureMask) -> Result<Self> {
        if mask.active_count() == 0 {
            return Err(Error::InvalidArgument {
                name: "mask",
                message: "aperture has no active pixels".into(),
            });
        }
        let engine = FftEngine::new(mask.n());
        let vacuum_peak = peak_of_backpropagation(&engine, &mask, None);
        Ok(Self {
            mask,
            engine,
            vacuum_peak,
        })
    }

    pub fn mask(&self) -> &ApertureMask {
        &self.mask
    }

    /// Peak Strehl ratio: the peak of the PSF formed by back-propagating the
    /// aperture carrying the residual phase, over the vacuum peak.
    pub fn strehl(&self, phi_hat: &RealField, phi_true: &RealField) -> Result<f64> {
        let psi = residual_phase(phi_hat, phi_true)?;
        if psi.n() != self.mask.n() {
            return Err(Error::Dimension {
                context: "strehl",
                expected: self.mask.n(),
                actual: psi.n(),
            });
        }
        let peak = peak_of_backpropagation(&self.engine, &self.mask, Some(&psi));
        Ok(peak / self.vacuum_peak)
    }

    /// `|F^H(mask e^{j psi})|^2`, center-cropped by `zoom` (>= 1) for
    /// display.
    pub fn residual_psf(
        &self,
        phi_hat: &RealField,
        phi_true: &RealField,
        zoom: f64,
    ) -> Result<RealField> {
        if !(zoom >= 1.0) {
            return Err(Error::InvalidArgument {
                name: "zoom",
                message: format!("need zoom >= 1, got {zoom}"),
            });
        }
        let psi = residual_phase(phi_hat, phi_true)?;
        let img = backpropagate(&self.engine, &self.mask, Some(&psi));
        let psf = img.magnitude_sqr();
        let n = psf.n();
        let mut crop_n = ((n as f64 / zoom).round() as usize).clamp(2, n);
        if crop_n % 2 != 0 {
            crop_n += 1;
        }
        if crop_n == n {
            return Ok(psf);
        }
        let off = (n - crop_n) / 2;
        let mut out = RealField::zeros(crop_n);
        for row in 0..crop_n {
            for col in 0..crop_n {
                out.set(row, col, psf.at(row + off, col + off));
            }
        }
        Ok(out)
    }
}

fn backpropagate(engine: &FftEngine, mask: &ApertureMask, psi: Option<&RealField>) -> ComplexField {
    let n = mask.n();
    let mut field = ComplexField::zeros(n);
    for i in 0..n * n {
        if mask.is_active(i) {
            field.data_mut()[i] = match psi {
                Some(psi) => Complex64::from_polar(1.0, psi.data()[i]),
                None => Complex64::new(1.0, 0.0),
            };
        }
    }
    engine.adjoint(&field)
}

fn peak_of_backpropagation(
    engine: &FftEngine,
    mask: &ApertureMask,
    psi: Option<&RealField>,
) -> f64 {
    backpropagate(engine, mask, psi)
        .data()
        .iter()
        .map(|z| z.norm_sqr())
        .fold(0.0, f64::max)
}

/// Linear-interpolation quantile of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let k = sorted.len();
    if k == 1 {
        return sorted[0];
    }
    let h = (k - 1) as f64 * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 < k {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[k - 1]
    }
}

/// Per-frame {min, q1, median, q3, max, mean} across seeds. All series must
/// share the same frame axis.
pub fn aggregate_runs(runs: &[Vec<StrehlRecord>]) -> Result<Vec<AggregateRow>> {
    let Some(first) = runs.first() else {
        return Err(Error::InvalidArgument {
            name: "runs",
            message: "need at least one run".into(),
        });
    };
    let frames = first.len();
    for run in runs {
        if run.len() != frames {
            return Err(Error::Dimension {
                context: "aggregate_runs",
                expected: frames,
                actual: run.len(),
            });
        }
    }
    let mut rows = Vec::with_capacity(frames);
    for t in 0..frames {
        let frame = first[t].frame;
        let mut values: Vec<f64> = runs
            .iter()
            .map(|run| {
                debug_assert_eq!(run[t].frame, frame);
                run[t].strehl
            })
            .collect();
        values.sort_by(|a, b| a.partial_cmp(b).expect("non-finite strehl"));
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        rows.push(AggregateRow {
            frame,
            min: values[0],
            q1: quantile_sorted(&values, 0.25),
            median: quantile_sorted(&values, 0.5),
            q3: quantile_sorted(&values, 0.75),
            max: values[values.len() - 1],
            mean,
        });
    }
    Ok(rows)
}

/// Mean of `values[lo..=hi]` selected by frame index, the grid-sweep
/// objective.
pub fn mean_strehl_in_window(records: &[StrehlRecord], lo: u64, hi: u64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for rec in records {
        if rec.frame >= lo && rec.frame <= hi {
            sum += rec.strehl;
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}
