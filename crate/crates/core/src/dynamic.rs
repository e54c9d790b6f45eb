//! Streaming reconstruction: per-frame normalize, tip/tilt conditioning,
//! reflectance re-initialization from the back-projected data, and a fixed
//! number of EM iterations; plus the single-frame baseline with periodic
//! bootstrapping.

use num_complex::Complex64;

use crate::em::{em_iteration, EmConfig};
use crate::error::{Error, Result};
use crate::forward::{normalize, PropagationOperator};
use crate::grid::{ComplexField, RealField};
use crate::turbulence::remove_piston_tip_tilt;

/// Reconstruction state carried across frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconState {
    pub frame: u64,
    pub r: RealField,
    pub phi: RealField,
}

impl ReconState {
    /// Cold start: `r = r_min` everywhere (the degenerate-safe stand-in for
    /// zero) and `phi = 0`.
    pub fn cold(n: usize, r_min: f64) -> Self {
        Self {
            frame: 0,
            r: RealField::constant(n, r_min),
            phi: RealField::zeros(n),
        }
    }
}

/// Streaming-loop weights: `lambda` blends the previous reflectance with the
/// back-projection, `alpha` scales the back-projection, `nk` is the EM
/// iteration count per frame.
#[derive(Debug, Clone)]
pub struct DdhConfig {
    pub lambda: f64,
    pub alpha: f64,
    pub nk: u32,
    pub em: EmConfig,
}

impl DdhConfig {
    pub fn new(lambda: f64, alpha: f64, nk: u32, em: EmConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::config("lambda", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::config("alpha", "must lie in [0, 1]"));
        }
        if nk < 1 {
            return Err(Error::config("nk", "must be >= 1"));
        }
        Ok(Self {
            lambda,
            alpha,
            nk,
            em,
        })
    }
}

fn blend_reflectance(
    r_prev: &RealField,
    back_power: &RealField,
    lambda: f64,
    alpha: f64,
    r_min: f64,
) -> RealField {
    let n = r_prev.n();
    let mut r = RealField::zeros(n);
    for i in 0..n * n {
        let v = (1.0 - lambda) * r_prev.data()[i] + lambda * alpha * back_power.data()[i];
        r.data_mut()[i] = v.max(r_min);
    }
    r
}

fn ddh_step_inner(
    state: ReconState,
    y_raw: &ComplexField,
    cfg: &DdhConfig,
    op: &PropagationOperator,
) -> Result<(ReconState, bool)> {
    let y = match normalize(y_raw) {
        Ok(y) => y,
        Err(Error::DegenerateInput(_)) => {
            log::warn!("frame {}: degenerate measurement, skipped", state.frame);
            return Ok((
                ReconState {
                    frame: state.frame + 1,
                    r: state.r,
                    phi: state.phi,
                },
                false,
            ));
        }
        Err(e) => return Err(e),
    };
    let mut phi = remove_piston_tip_tilt(&state.phi, op.aperture())?;
    let back = op.apply_adjoint(&phi, &y)?;
    let mut r = blend_reflectance(
        &state.r,
        &back.magnitude_sqr(),
        cfg.lambda,
        cfg.alpha,
        cfg.em.r_min,
    );
    for _ in 0..cfg.nk {
        let (r_next, phi_next) = em_iteration(op, &r, &phi, &y, &cfg.em)?;
        r = r_next;
        phi = phi_next;
    }
    Ok((
        ReconState {
            frame: state.frame + 1,
            r,
            phi,
        },
        true,
    ))
}

/// Advance the state by one frame: normalize the measurement, remove
/// piston/tip/tilt from the running phase estimate, re-seed the reflectance
/// from the back-projected power, then run `nk` EM iterations. Costs
/// `1 + 2 nk` transforms. A degenerate (constant) frame is skipped: the
/// state is carried forward with only the frame index advanced.
pub fn ddh_step(
    state: ReconState,
    y_raw: &ComplexField,
    cfg: &DdhConfig,
    op: &PropagationOperator,
) -> Result<ReconState> {
    ddh_step_inner(state, y_raw, cfg, op).map(|(state, _)| state)
}

/// Fold [`ddh_step`] over a frame stream, invoking `sink(frame, r, phi)`
/// after every successfully processed frame (skipped degenerate frames emit
/// nothing). Returns the final state.
pub fn run_stream<I, S>(
    frames: I,
    cfg: &DdhConfig,
    op: &PropagationOperator,
    mut sink: S,
) -> Result<ReconState>
where
    I: IntoIterator<Item = Result<ComplexField>>,
    S: FnMut(u64, &RealField, &RealField) -> Result<()>,
{
    let mut state = ReconState::cold(op.n(), cfg.em.r_min);
    for frame in frames {
        let y = frame?;
        let index = state.frame;
        let (next, processed) = ddh_step_inner(state, &y, cfg, op)?;
        state = next;
        if processed {
            sink(index, &state.r, &state.phi)?;
        }
    }
    Ok(state)
}

/// Single-frame reconstruction with periodic bootstrapping: initialize the
/// reflectance from the zero-phase back-projection, run `iters` EM
/// iterations, and every `bootstrap_period` iterations re-seed the
/// reflectance from the back-projection at the current phase.
pub fn run_static(
    y_raw: &ComplexField,
    iters: u32,
    bootstrap_period: u32,
    alpha_b: f64,
    cfg: &EmConfig,
    op: &PropagationOperator,
) -> Result<(RealField, RealField)> {
    if iters < 1 {
        return Err(Error::InvalidArgument {
            name: "iters",
            message: "must be >= 1".into(),
        });
    }
    if bootstrap_period < 1 {
        return Err(Error::InvalidArgument {
            name: "bootstrap_period",
            message: "must be >= 1".into(),
        });
    }
    let y = normalize(y_raw)?;
    let n = op.n();
    let mut phi = RealField::zeros(n);
    let backproject = |phi: &RealField| -> Result<RealField> {
        let back = op.apply_adjoint(phi, &y)?;
        let mut r = back.magnitude_sqr();
        for v in r.data_mut() {
            *v = (alpha_b * *v).max(cfg.r_min);
        }
        Ok(r)
    };
    let mut r = backproject(&phi)?;
    for k in 1..=iters {
        if k > 1 && (k - 1) % bootstrap_period == 0 {
            r = backproject(&phi)?;
        }
        let (r_next, phi_next) = em_iteration(op, &r, &phi, &y, cfg)?;
        r = r_next;
        phi = phi_next;
    }
    Ok((r, phi))
}

/// Owning wrapper around the streaming loop: operator, weights, and state in
/// one place. This is the surface exposed through the C ABI.
pub struct DynamicReconstructor {
    op: PropagationOperator,
    cfg: DdhConfig,
    state: ReconState,
}

impl DynamicReconstructor {
    pub fn new(op: PropagationOperator, cfg: DdhConfig) -> Self {
        let state = ReconState::cold(op.n(), cfg.em.r_min);
        Self { op, cfg, state }
    }

    pub fn n(&self) -> usize {
        self.op.n()
    }

    pub fn op(&self) -> &PropagationOperator {
        &self.op
    }

    pub fn config(&self) -> &DdhConfig {
        &self.cfg
    }

    pub fn process_frame(&mut self, y_raw: &ComplexField) -> Result<()> {
        let state = std::mem::replace(&mut self.state, ReconState::cold(2, self.cfg.em.r_min));
        self.state = ddh_step(state, y_raw, &self.cfg, &self.op)?;
        Ok(())
    }

    /// Frames consumed so far (including skipped degenerate frames).
    pub fn frame_index(&self) -> u64 {
        self.state.frame
    }

    pub fn reflectance(&self) -> &RealField {
        &self.state.r
    }

    pub fn phase(&self) -> &RealField {
        &self.state.phi
    }

    /// Total 2-D transforms applied since construction or [`Self::reset`].
    pub fn transform_count(&self) -> u64 {
        self.op.engine().transform_count()
    }

    pub fn reset(&mut self) {
        self.state = ReconState::cold(self.op.n(), self.cfg.em.r_min);
        self.op.engine().reset_count();
    }
}

/// Interleaved little-endian complex32 samples decoded into a field; the
/// on-the-wire element order matches [`ComplexField`] row-major layout.
pub fn frame_from_f32(n: usize, samples: &[f32]) -> Result<ComplexField> {
    if samples.len() != 2 * n * n {
        return Err(Error::Dimension {
            context: "frame_from_f32",
            expected: 2 * n * n,
            actual: samples.len(),
        });
    }
    let data = samples
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0] as f64, c[1] as f64))
        .collect();
    ComplexField::from_data(n, data)
}
