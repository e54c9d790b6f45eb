//! 2-D FFT support: a raw unscaled transform for screen synthesis and a
//! centered unitary transform with an invocation counter for the
//! reconstruction loop.
//!
//! The centered convention places the zero frequency at pixel `(n/2, n/2)`
//! and scales by `1/n` in each direction, so the forward map is unitary and
//! its adjoint equals its inverse. Centering is implemented as a quadrant
//! swap before and after the raw transform; for even `n` the two conventions
//! agree exactly because the extra twiddle `exp(-2*pi*i*(m - n/2)*n/n)` is 1.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::ComplexField;

fn transpose_in_place(data: &mut [Complex64], n: usize) {
    for row in 0..n {
        for col in (row + 1)..n {
            data.swap(row * n + col, col * n + row);
        }
    }
}

/// Swap diagonal quadrants so the array origin moves to/from the grid
/// center. For even `n` this operation is its own inverse.
pub fn swap_quadrants(data: &mut [Complex64], n: usize) {
    let h = n / 2;
    for row in 0..h {
        for col in 0..n {
            let src = row * n + col;
            let dst = ((row + h) % n) * n + (col + h) % n;
            data.swap(src, dst);
        }
    }
}

/// Raw unscaled 2-D FFT of a fixed size. Forward applies `exp(-2πi mk/n)`
/// sums with the origin at index 0 and no normalization; inverse applies the
/// conjugate kernel, also unnormalized, so `inverse(forward(x)) = n^2 * x`.
pub struct RawFft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl RawFft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn apply(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n * self.n, "field size mismatch");
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        transpose_in_place(data, self.n);
        plan.process_with_scratch(data, &mut scratch);
        transpose_in_place(data, self.n);
    }

    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        self.apply(&self.forward, data);
    }

    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.apply(&self.inverse, data);
    }
}

/// Centered unitary 2-D DFT with a transform counter.
///
/// Every call to [`FftEngine::forward`] or [`FftEngine::adjoint`] increments
/// the counter by one; the counter is the cost unit quoted by the
/// reconstruction API (one EM iteration costs exactly two transforms).
pub struct FftEngine {
    raw: RawFft2,
    count: AtomicU64,
}

impl FftEngine {
    pub fn new(n: usize) -> Self {
        Self {
            raw: RawFft2::new(n),
            count: AtomicU64::new(0),
        }
    }

    pub fn n(&self) -> usize {
        self.raw.n()
    }

    /// Number of 2-D transforms applied since construction or the last
    /// [`FftEngine::reset_count`].
    pub fn transform_count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }

    pub fn reset_count(&self) {
        self.count.store(0, Ordering::Relaxed);
    }

    fn centered(&self, field: &ComplexField, inverse: bool) -> ComplexField {
        let n = self.raw.n();
        assert_eq!(field.n(), n, "field size mismatch");
        self.count.fetch_add(1, Ordering::Relaxed);
        let mut data = field.data().to_vec();
        swap_quadrants(&mut data, n);
        if inverse {
            self.raw.inverse_in_place(&mut data);
        } else {
            self.raw.forward_in_place(&mut data);
        }
        swap_quadrants(&mut data, n);
        let scale = 1.0 / n as f64;
        for z in &mut data {
            *z *= scale;
        }
        ComplexField::from_data(n, data).expect("shape preserved")
    }

    /// Centered unitary forward DFT.
    pub fn forward(&self, field: &ComplexField) -> ComplexField {
        self.centered(field, false)
    }

    /// Centered unitary inverse DFT, which equals the adjoint of
    /// [`FftEngine::forward`].
    pub fn adjoint(&self, field: &ComplexField) -> ComplexField {
        self.centered(field, true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

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
    fn forward_matches_direct_centered_dft() {
        let n = 8;
        let mut rng = Rng::new(11);
        let x = random_field(&mut rng, n);
        let engine = FftEngine::new(n);
        let fx = engine.forward(&x);
        let c = (n / 2) as i64;
        for k1 in 0..n {
            for k2 in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for m1 in 0..n {
                    for m2 in 0..n {
                        let ph = -2.0 * std::f64::consts::PI / n as f64
                            * ((m1 as i64 - c) * (k1 as i64 - c)
                                + (m2 as i64 - c) * (k2 as i64 - c)) as f64;
                        acc += x.at(m1, m2) * Complex64::from_polar(1.0, ph);
                    }
                }
                acc /= n as f64;
                assert!((acc - fx.at(k1, k2)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn unitarity_and_roundtrip() {
        let n = 64;
        let mut rng = Rng::new(7);
        let engine = FftEngine::new(n);
        for _ in 0..20 {
            let x = random_field(&mut rng, n);
            let fx = engine.forward(&x);
            assert!((fx.norm_sqr() - x.norm_sqr()).abs() < 1e-12 * x.norm_sqr());
            let back = engine.adjoint(&fx);
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
    fn adjoint_identity() {
        let n = 32;
        let mut rng = Rng::new(9);
        let engine = FftEngine::new(n);
        for _ in 0..20 {
            let x = random_field(&mut rng, n);
            let y = random_field(&mut rng, n);
            let lhs = inner(&engine.forward(&x), &y);
            let rhs = inner(&x, &engine.adjoint(&y));
            assert!((lhs - rhs).norm() < 1e-12 * (lhs.norm() + 1.0));
        }
    }

    #[test]
    fn centered_delta_transforms_to_flat_field() {
        let n = 16;
        let engine = FftEngine::new(n);
        let mut x = ComplexField::zeros(n);
        x.set(n / 2, n / 2, Complex64::new(1.0, 0.0));
        let fx = engine.forward(&x);
        let expect = 1.0 / n as f64;
        for z in fx.data() {
            assert!((z - Complex64::new(expect, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn flat_field_transforms_to_centered_delta() {
        let n = 16;
        let engine = FftEngine::new(n);
        let x = ComplexField::from_data(n, vec![Complex64::new(1.0, 0.0); n * n]).unwrap();
        let fx = engine.forward(&x);
        for row in 0..n {
            for col in 0..n {
                let expect = if row == n / 2 && col == n / 2 {
                    n as f64
                } else {
                    0.0
                };
                assert!((fx.at(row, col) - Complex64::new(expect, 0.0)).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn transform_counter() {
        let n = 8;
        let engine = FftEngine::new(n);
        let x = ComplexField::zeros(n);
        assert_eq!(engine.transform_count(), 0);
        let fx = engine.forward(&x);
        let _ = engine.adjoint(&fx);
        assert_eq!(engine.transform_count(), 2);
        engine.reset_count();
        assert_eq!(engine.transform_count(), 0);
    }

    #[test]
    fn raw_roundtrip_scales_by_area() {
        let n = 16;
        let mut rng = Rng::new(3);
        let x = random_field(&mut rng, n);
        let raw = RawFft2::new(n);
        let mut data = x.data().to_vec();
        raw.forward_in_place(&mut data);
        raw.inverse_in_place(&mut data);
        let area = (n * n) as f64;
        for (a, b) in data.iter().zip(x.data()) {
            assert!((a / area - b).norm() < 1e-12);
        }
    }
}
