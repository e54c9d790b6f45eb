//! One EM iteration for the joint reflectance/phase MAP problem: closed-form
//! posterior moments of the latent speckle field, a pointwise phase update,
//! and a reflectance update with an optional MRF prior.

use crate::error::{Error, Result};
use crate::forward::PropagationOperator;
use crate::grid::{ApertureMask, ComplexField, RealField};

/// Posterior moments of the reflection coefficients given the data and the
/// current `(r, phi)`: mean, per-pixel variance, and second moment
/// `q_i = |mu_i|^2 + C_i`.
#[derive(Debug, Clone)]
pub struct PosteriorMoments {
    pub mean: ComplexField,
    pub variance: RealField,
    pub second_moment: RealField,
}

/// Pairwise potential `rho(d) = |d|^p / (p sigma_x^p)` on the 8-neighbor
/// lattice, applied through its quadratic majorizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrfParams {
    pub p: f64,
    pub sigma_x: f64,
}

impl Default for MrfParams {
    fn default() -> Self {
        Self {
            p: 2.0,
            sigma_x: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReflectancePrior {
    None,
    Mrf(MrfParams),
}

#[derive(Debug, Clone)]
pub struct EmConfig {
    pub noise_variance: f64,
    pub r_min: f64,
    pub prior: ReflectancePrior,
    pub phase_update_mask: ApertureMask,
}

impl EmConfig {
    pub fn new(noise_variance: f64, r_min: f64, phase_update_mask: ApertureMask) -> Result<Self> {
        if !(noise_variance > 0.0) {
            return Err(Error::config("noise_variance", "must be > 0"));
        }
        if !(r_min > 0.0) {
            return Err(Error::config("r_min", "must be > 0"));
        }
        Ok(Self {
            noise_variance,
            r_min,
            prior: ReflectancePrior::None,
            phase_update_mask,
        })
    }
}

/// E-step: back-project the data and apply the per-pixel Wiener gain.
/// `u = A_phi^H y`, `mu_i = r_i/(r_i + s) u_i`, `C_i = r_i s/(r_i + s)` with
/// `s` the noise variance. Costs one transform.
pub fn e_step(
    op: &PropagationOperator,
    phi: &RealField,
    r: &RealField,
    y: &ComplexField,
    cfg: &EmConfig,
) -> Result<PosteriorMoments> {
    if r.n() != y.n() {
        return Err(Error::Dimension {
            context: "e_step",
            expected: y.n(),
            actual: r.n(),
        });
    }
    let u = op.apply_adjoint(phi, y)?;
    let s = cfg.noise_variance;
    let n = u.n();
    let mut mean = ComplexField::zeros(n);
    let mut variance = RealField::zeros(n);
    let mut second = RealField::zeros(n);
    for i in 0..n * n {
        let ri = r.data()[i];
        let gain = ri / (ri + s);
        let mu = u.data()[i] * gain;
        let c = ri * s / (ri + s);
        mean.data_mut()[i] = mu;
        variance.data_mut()[i] = c;
        second.data_mut()[i] = mu.norm_sqr() + c;
    }
    Ok(PosteriorMoments {
        mean,
        variance,
        second_moment: second,
    })
}

/// Phase M-step: propagate the posterior mean to the pupil plane
/// (`f = F(Gamma mu)`, the iteration's second transform) and set
/// `phi_i = arg(y_i conj(f_i))` wherever the update mask is on and the
/// product is nonzero; other pixels keep their previous phase.
pub fn m_step_phi(
    op: &PropagationOperator,
    moments: &PosteriorMoments,
    y: &ComplexField,
    phi_prev: &RealField,
    cfg: &EmConfig,
) -> Result<RealField> {
    let f = op.propagate_object(&moments.mean)?;
    let n = f.n();
    if phi_prev.n() != n || y.n() != n || cfg.phase_update_mask.n() != n {
        return Err(Error::Dimension {
            context: "m_step_phi",
            expected: n,
            actual: phi_prev.n(),
        });
    }
    let mut phi = phi_prev.clone();
    for i in 0..n * n {
        if !cfg.phase_update_mask.is_active(i) {
            continue;
        }
        let prod = y.data()[i] * f.data()[i].conj();
        if prod.norm_sqr() > 0.0 {
            phi.data_mut()[i] = prod.arg();
        }
    }
    Ok(phi)
}

fn mrf_weight(params: &MrfParams, delta: f64) -> f64 {
    // rho'(d)/(2d) = |d|^{p-2} / (2 sigma_x^p); for p < 2 guard the d -> 0
    // singularity of the majorizer weight.
    let d = delta.abs().max(1e-12);
    d.powf(params.p - 2.0) / (2.0 * params.sigma_x.powf(params.p))
}

const NEIGHBOR_OFFSETS: [(i64, i64); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Reflectance M-step. Without a prior the per-pixel minimizer of
/// `q/r + log r` is `r = q`, clamped to `r_min`. With the MRF prior each
/// pixel minimizes `q/r + log r + sum_j w_j (r - r_j)^2` over `r >= r_min`
/// by safeguarded Newton iteration against the previous iterate's neighbors.
pub fn m_step_r(moments: &PosteriorMoments, r_prev: &RealField, cfg: &EmConfig) -> RealField {
    let q = &moments.second_moment;
    let n = q.n();
    let mut r = RealField::zeros(n);
    match &cfg.prior {
        ReflectancePrior::None => {
            for i in 0..n * n {
                r.data_mut()[i] = q.data()[i].max(cfg.r_min);
            }
        }
        ReflectancePrior::Mrf(params) => {
            let mut fallbacks = 0u64;
            for row in 0..n {
                for col in 0..n {
                    let i = row * n + col;
                    let qi = q.data()[i];
                    let ri_prev = r_prev.data()[i];
                    // Majorizer weights at the previous iterate.
                    let mut w_sum = 0.0;
                    let mut wr_sum = 0.0;
                    for (dr, dc) in NEIGHBOR_OFFSETS {
                        let rr = row as i64 + dr;
                        let cc = col as i64 + dc;
                        if rr < 0 || cc < 0 || rr >= n as i64 || cc >= n as i64 {
                            continue;
                        }
                        let rj = r_prev.data()[rr as usize * n + cc as usize];
                        let w = mrf_weight(params, ri_prev - rj);
                        w_sum += w;
                        wr_sum += w * rj;
                    }
                    match newton_min(qi, w_sum, wr_sum, cfg.r_min) {
                        Some(v) => r.data_mut()[i] = v,
                        None => {
                            fallbacks += 1;
                            r.data_mut()[i] = qi.max(cfg.r_min);
                        }
                    }
                }
            }
            if fallbacks > 0 {
                log::debug!("m_step_r: Newton fell back to prior-free update on {fallbacks} pixels");
            }
        }
    }
    r
}

/// Minimize `h(r) = q/r + log r + w_sum r^2 - 2 wr_sum r` (constants
/// dropped) over `r >= r_min`. Returns `None` if 50 Newton steps fail to
/// reach |h'| tolerance.
fn newton_min(q: f64, w_sum: f64, wr_sum: f64, r_min: f64) -> Option<f64> {
    let h_prime = |r: f64| -q / (r * r) + 1.0 / r + 2.0 * (w_sum * r - wr_sum);
    let h_second = |r: f64| 2.0 * q / (r * r * r) - 1.0 / (r * r) + 2.0 * w_sum;
    // h'(r) -> -inf as r -> 0+ when q > 0 and -> +inf as r -> inf, so a root
    // exists; bracket it before refining.
    let mut lo = r_min;
    let mut hi = (q.max(r_min) + wr_sum / w_sum.max(1e-300)).max(r_min) * 2.0 + 1.0;
    if h_prime(lo) >= 0.0 {
        return Some(r_min);
    }
    while h_prime(hi) < 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return None;
        }
    }
    let mut x = q.clamp(lo, hi).max(r_min);
    for _ in 0..50 {
        let g = h_prime(x);
        if g.abs() < 1e-12 * (1.0 + x.abs()) {
            return Some(x.max(r_min));
        }
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let h = h_second(x);
        let mut step = if h > 0.0 { x - g / h } else { f64::NAN };
        if !(step > lo && step < hi) {
            step = 0.5 * (lo + hi);
        }
        x = step;
    }
    let g = h_prime(x);
    if g.abs() < 1e-8 * (1.0 + x.abs()) {
        Some(x.max(r_min))
    } else {
        None
    }
}

/// One EM iteration: E-step at `(r, phi)`, then the phase update, then the
/// reflectance update. Costs exactly two transforms.
pub fn em_iteration(
    op: &PropagationOperator,
    r: &RealField,
    phi: &RealField,
    y: &ComplexField,
    cfg: &EmConfig,
) -> Result<(RealField, RealField)> {
    let moments = e_step(op, phi, r, y, cfg)?;
    let phi_new = m_step_phi(op, &moments, y, phi, cfg)?;
    let r_new = m_step_r(&moments, r, cfg);
    Ok((r_new, phi_new))
}
