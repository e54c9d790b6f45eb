//! Digital-holography measurement operator: pupil-plane phase modulation of
//! the Fourier-transformed object field, restricted to the camera aperture,
//! plus measurement noise and the data-normalization step.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::FftEngine;
use crate::grid::{ApertureMask, ComplexField, RealField};
use crate::rng::Rng;

/// Complex measurement noise level; real and imaginary parts each carry half
/// of `variance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    variance: f64,
}

impl NoiseModel {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance >= 0.0) {
            return Err(Error::InvalidArgument {
                name: "noise_variance",
                message: format!("need variance >= 0, got {variance}"),
            });
        }
        Ok(Self { variance })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Per-pixel noise variance that places the mean in-aperture signal power
/// `signal_power` at `snr_db` decibels above the noise.
pub fn noise_variance_from_snr(snr_db: f64, signal_power: f64) -> Result<f64> {
    if !(signal_power > 0.0) {
        return Err(Error::InvalidArgument {
            name: "signal_power",
            message: format!("need signal_power > 0, got {signal_power}"),
        });
    }
    Ok(signal_power * 10f64.powf(-snr_db / 10.0))
}

/// The measurement operator `A_phi = D_a diag(e^{j phi}) F Gamma`: a
/// unit-modulus quadratic phase on the object field, the centered unitary
/// 2-D DFT into the pupil plane, the turbulence phase, and the camera
/// aperture. With a full aperture the operator is unitary for every phi.
pub struct PropagationOperator {
    aperture: ApertureMask,
    gamma: ComplexField,
    curvature: f64,
    wavelength_m: f64,
    engine: FftEngine,
}

impl PropagationOperator {
    /// `curvature` is the dimensionless per-pixel-squared coefficient of the
    /// quadratic phase `gamma_i = exp(j pi (x_i^2 + y_i^2) curvature)`;
    /// zero gives the identity. `wavelength_m` is carried for reporting only
    /// and does not enter the pixel-space model.
    pub fn new(aperture: ApertureMask, curvature: f64, wavelength_m: f64) -> Self {
        let n = aperture.n();
        let c = (n / 2) as f64;
        let mut gamma = ComplexField::zeros(n);
        for row in 0..n {
            for col in 0..n {
                let x = col as f64 - c;
                let y = row as f64 - c;
                let phase = std::f64::consts::PI * (x * x + y * y) * curvature;
                gamma.set(row, col, Complex64::from_polar(1.0, phase));
            }
        }
        Self {
            aperture,
            gamma,
            curvature,
            wavelength_m,
            engine: FftEngine::new(n),
        }
    }

    pub fn n(&self) -> usize {
        self.aperture.n()
    }

    pub fn aperture(&self) -> &ApertureMask {
        &self.aperture
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    pub fn wavelength_m(&self) -> f64 {
        self.wavelength_m
    }

    /// Transform counter shared by forward and adjoint applications.
    pub fn engine(&self) -> &FftEngine {
        &self.engine
    }

    fn check_dim(&self, context: &'static str, m: usize) -> Result<()> {
        if m != self.n() {
            return Err(Error::Dimension {
                context,
                expected: self.n(),
                actual: m,
            });
        }
        Ok(())
    }

    /// `F(Gamma g)`: the object field propagated to the pupil plane, before
    /// the turbulence phase and aperture act. One forward transform.
    pub fn propagate_object(&self, g: &ComplexField) -> Result<ComplexField> {
        self.check_dim("propagate_object", g.n())?;
        let n = self.n();
        let modulated: Vec<Complex64> = self
            .gamma
            .data()
            .iter()
            .zip(g.data())
            .map(|(gm, gi)| gm * gi)
            .collect();
        Ok(self.engine.forward(&ComplexField::from_data(n, modulated)?))
    }

    /// `A_phi g`: one forward transform.
    pub fn apply_forward(&self, phi: &RealField, g: &ComplexField) -> Result<ComplexField> {
        self.check_dim("apply_forward", phi.n())?;
        let mut out = self.propagate_object(g)?;
        for (i, z) in out.data_mut().iter_mut().enumerate() {
            if self.aperture.is_active(i) {
                *z *= Complex64::from_polar(1.0, phi.data()[i]);
            } else {
                *z = Complex64::new(0.0, 0.0);
            }
        }
        Ok(out)
    }

    /// `A_phi^H y`: one adjoint transform.
    pub fn apply_adjoint(&self, phi: &RealField, y: &ComplexField) -> Result<ComplexField> {
        self.check_dim("apply_adjoint", phi.n())?;
        self.check_dim("apply_adjoint", y.n())?;
        let n = self.n();
        let demodulated: Vec<Complex64> = y
            .data()
            .iter()
            .enumerate()
            .map(|(i, z)| {
                if self.aperture.is_active(i) {
                    z * Complex64::from_polar(1.0, -phi.data()[i])
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        let object = self
            .engine
            .adjoint(&ComplexField::from_data(n, demodulated)?);
        let mut out = object;
        for (z, gm) in out.data_mut().iter_mut().zip(self.gamma.data()) {
            *z *= gm.conj();
        }
        Ok(out)
    }

    /// `A_phi g + w` with `w_i ~ CN(0, variance)` i.i.d. at every pixel,
    /// including outside the aperture where the measurement is noise only.
    pub fn synthesize_measurement(
        &self,
        phi: &RealField,
        g: &ComplexField,
        noise: &NoiseModel,
        rng: &mut Rng,
    ) -> Result<ComplexField> {
        let mut y = self.apply_forward(phi, g)?;
        if noise.variance > 0.0 {
            let scale = (noise.variance * 0.5).sqrt();
            for z in y.data_mut() {
                let re = scale * rng.standard_normal();
                let im = scale * rng.standard_normal();
                *z += Complex64::new(re, im);
            }
        }
        Ok(y)
    }
}

fn normalize_slice(data: &mut [Complex64]) -> Result<()> {
    let p = data.len() as f64;
    let mean: Complex64 = data.iter().sum::<Complex64>() / p;
    let mut norm_sqr = 0.0;
    for z in data.iter_mut() {
        *z -= mean;
        norm_sqr += z.norm_sqr();
    }
    if norm_sqr == 0.0 {
        return Err(Error::DegenerateInput("normalize of constant input"));
    }
    let scale = (p / norm_sqr).sqrt();
    for z in data.iter_mut() {
        *z *= scale;
    }
    Ok(())
}

/// `sqrt(p) (y - mean) / ||y - mean||` with `p` the number of entries, so
/// the output has zero mean and unit average power per pixel.
pub fn normalize(y: &ComplexField) -> Result<ComplexField> {
    let mut out = y.clone();
    normalize_slice(out.data_mut())?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_phase(rng: &mut Rng, n: usize) -> RealField {
        let data = (0..n * n)
            .map(|_| rng.uniform(-std::f64::consts::PI, std::f64::consts::PI))
            .collect();
        RealField::from_data(n, data).unwrap()
    }

    fn random_field(rng: &mut Rng, n: usize) -> ComplexField {
        let data = (0..n * n)
            .map(|_| Complex64::new(rng.standard_normal(), rng.standard_normal()))
            .collect();
        ComplexField::from_data(n, data).unwrap()
    }

    fn inner(a: &ComplexField, b: &ComplexField) -> Complex64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| x.conj() * y)
            .sum()
    }

    #[test]
    fn full_aperture_is_unitary() {
        let n = 32;
        let mut rng = Rng::new(21);
        for trial in 0..100 {
            let curvature = if trial % 2 == 0 { 0.0 } else { 0.013 };
            let op = PropagationOperator::new(ApertureMask::full(n), curvature, 1.064e-6);
            let phi = random_phase(&mut rng, n);
            let x = random_field(&mut rng, n);
            let y = op.apply_forward(&phi, &x).unwrap();
            let ratio = y.norm_sqr().sqrt() / x.norm_sqr().sqrt();
            assert!((ratio - 1.0).abs() < 1e-12, "ratio = {ratio}");
            let back = op.apply_adjoint(&phi, &y).unwrap();
            let err: f64 = back
                .data()
                .iter()
                .zip(x.data())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            assert!(err.sqrt() < 1e-12 * x.norm_sqr().sqrt());
        }
    }

    #[test]
    fn masked_pixels_are_exactly_zero() {
        let n = 32;
        let mut rng = Rng::new(22);
        let mask = ApertureMask::circular(n, 24.0).unwrap();
        let op = PropagationOperator::new(mask.clone(), 0.0, 1.064e-6);
        let phi = random_phase(&mut rng, n);
        let x = random_field(&mut rng, n);
        let y = op.apply_forward(&phi, &x).unwrap();
        for (i, z) in y.data().iter().enumerate() {
            if !mask.is_active(i) {
                assert_eq!(*z, Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn centered_delta_gives_flat_modulus() {
        let n = 16;
        let op = PropagationOperator::new(ApertureMask::circular(n, n as f64).unwrap(), 0.0, 1.0);
        let phi = RealField::zeros(n);
        let mut g = ComplexField::zeros(n);
        g.set(n / 2, n / 2, Complex64::new(1.0, 0.0));
        let y = op.apply_forward(&phi, &g).unwrap();
        let expect = 1.0 / n as f64;
        for (i, z) in y.data().iter().enumerate() {
            if op.aperture().is_active(i) {
                assert!((z.norm() - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn adjoint_identity_masked_and_full() {
        let n = 24;
        let mut rng = Rng::new(23);
        for mask in [ApertureMask::full(n), ApertureMask::circular(n, 18.0).unwrap()] {
            let op = PropagationOperator::new(mask, 0.007, 1.0);
            for _ in 0..50 {
                let phi = random_phase(&mut rng, n);
                let x = random_field(&mut rng, n);
                let y = random_field(&mut rng, n);
                let lhs = inner(&op.apply_forward(&phi, &x).unwrap(), &y);
                let rhs = inner(&x, &op.apply_adjoint(&phi, &y).unwrap());
                let bound = 1e-12 * x.norm_sqr().sqrt() * y.norm_sqr().sqrt();
                assert!((lhs - rhs).norm() < bound);
            }
        }
    }

    #[test]
    fn adjoint_of_zero_is_zero() {
        let n = 8;
        let op = PropagationOperator::new(ApertureMask::circular(n, 6.0).unwrap(), 0.0, 1.0);
        let phi = RealField::zeros(n);
        let out = op.apply_adjoint(&phi, &ComplexField::zeros(n)).unwrap();
        assert!(out.data().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let op = PropagationOperator::new(ApertureMask::full(8), 0.0, 1.0);
        let phi = RealField::zeros(16);
        let g = ComplexField::zeros(8);
        assert!(matches!(
            op.apply_forward(&phi, &g),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn normalize_two_point_example() {
        let mut data = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
        normalize_slice(&mut data).unwrap();
        assert!((data[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((data[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn normalize_constant_is_degenerate() {
        let y = ComplexField::from_data(4, vec![Complex64::new(3.0, -2.0); 16]).unwrap();
        assert!(matches!(normalize(&y), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn normalize_contract_and_idempotence() {
        let n = 32;
        let mut rng = Rng::new(24);
        let y = random_field(&mut rng, n);
        let z = normalize(&y).unwrap();
        let p = (n * n) as f64;
        assert!(z.mean().norm() < 1e-12);
        assert!((z.norm_sqr() - p).abs() < 1e-9 * p);
        let zz = normalize(&z).unwrap();
        let err: f64 = zz
            .data()
            .iter()
            .zip(z.data())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        assert!(err.sqrt() < 1e-9 * p.sqrt());
    }

    #[test]
    fn zero_noise_matches_forward() {
        let n = 16;
        let mut rng = Rng::new(25);
        let op = PropagationOperator::new(ApertureMask::circular(n, 12.0).unwrap(), 0.0, 1.0);
        let phi = random_phase(&mut rng, n);
        let g = random_field(&mut rng, n);
        let noise = NoiseModel::new(0.0).unwrap();
        let y = op
            .synthesize_measurement(&phi, &g, &noise, &mut rng)
            .unwrap();
        assert_eq!(y, op.apply_forward(&phi, &g).unwrap());
    }

    #[test]
    fn pure_noise_power() {
        let n = 256;
        let mut rng = Rng::new(26);
        let op = PropagationOperator::new(ApertureMask::full(n), 0.0, 1.0);
        let phi = RealField::zeros(n);
        let g = ComplexField::zeros(n);
        let noise = NoiseModel::new(1.0).unwrap();
        let y = op
            .synthesize_measurement(&phi, &g, &noise, &mut rng)
            .unwrap();
        let mean_power = y.norm_sqr() / (n * n) as f64;
        assert!((mean_power - 1.0).abs() < 0.02, "mean power = {mean_power}");
    }

    #[test]
    fn calibrated_snr_is_recovered() {
        let n = 64;
        let snr_db = 10.0;
        let mut rng = Rng::new(27);
        let mask = ApertureMask::circular(n, n as f64).unwrap();
        let op = PropagationOperator::new(mask.clone(), 0.0, 1.0);
        let mut ratio_sum = 0.0;
        for _ in 0..20 {
            let phi = random_phase(&mut rng, n);
            let r = RealField::constant(n, 1.0);
            let g = crate::grid::complex_gaussian_field(&mut rng, n, &r).unwrap();
            let clean = op.apply_forward(&phi, &g).unwrap();
            let signal_power = clean
                .data()
                .iter()
                .enumerate()
                .filter(|(i, _)| mask.is_active(*i))
                .map(|(_, z)| z.norm_sqr())
                .sum::<f64>()
                / mask.active_count() as f64;
            let variance = noise_variance_from_snr(snr_db, signal_power).unwrap();
            let noise = NoiseModel::new(variance).unwrap();
            let y = op
                .synthesize_measurement(&phi, &g, &noise, &mut rng)
                .unwrap();
            let noise_power = y
                .data()
                .iter()
                .zip(clean.data())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                / (n * n) as f64;
            ratio_sum += signal_power / noise_power;
        }
        let mean_ratio = ratio_sum / 20.0;
        let target = 10f64.powf(snr_db / 10.0);
        assert!(
            (mean_ratio - target).abs() < 0.05 * target,
            "mean ratio = {mean_ratio}"
        );
    }

    #[test]
    fn snr_conversion_values() {
        assert!((noise_variance_from_snr(10.0, 1.0).unwrap() - 0.1).abs() < 1e-15);
        assert!((noise_variance_from_snr(0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((noise_variance_from_snr(20.0, 0.5).unwrap() - 0.005).abs() < 1e-15);
        assert!(noise_variance_from_snr(10.0, 0.0).is_err());
    }
}
