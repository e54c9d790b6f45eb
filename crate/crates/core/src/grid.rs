//! Core grid types: square complex/real fields, aperture masks, speckle
//! sampling, and least-squares plane fits.
//!
//! All fields are `n x n`, row-major (`index = row * n + col`), with `n`
//! even and at least 2. The grid center for apertures, plane fits, and
//! quadratic phases is the pixel at 0-based coordinates `(n/2, n/2)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::Rng;

fn check_grid_size(n: usize) -> Result<()> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidArgument {
            name: "n",
            message: format!("grid side must be even and >= 2, got {n}"),
        });
    }
    Ok(())
}

/// Square complex-valued grid (measurements, reflection coefficients,
/// pupil/image fields).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    n: usize,
    data: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(n: usize) -> Self {
        check_grid_size(n).expect("invalid grid size");
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_data(n: usize, data: Vec<Complex64>) -> Result<Self> {
        check_grid_size(n)?;
        if data.len() != n * n {
            return Err(Error::Dimension {
                context: "ComplexField::from_data",
                expected: n * n,
                actual: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[row * self.n + col] = v;
    }

    /// Complex mean over all entries.
    pub fn mean(&self) -> Complex64 {
        let sum: Complex64 = self.data.iter().sum();
        sum / self.data.len() as f64
    }

    /// Sum of squared moduli.
    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Per-pixel squared modulus.
    pub fn magnitude_sqr(&self) -> RealField {
        RealField {
            n: self.n,
            data: self.data.iter().map(|z| z.norm_sqr()).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Square real-valued grid (reflectance, phase, PSFs).
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    n: usize,
    data: Vec<f64>,
}

impl RealField {
    pub fn zeros(n: usize) -> Self {
        check_grid_size(n).expect("invalid grid size");
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn constant(n: usize, value: f64) -> Self {
        let mut f = Self::zeros(n);
        f.data.fill(value);
        f
    }

    pub fn from_data(n: usize, data: Vec<f64>) -> Result<Self> {
        check_grid_size(n)?;
        if data.len() != n * n {
            return Err(Error::Dimension {
                context: "RealField::from_data",
                expected: n * n,
                actual: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.n + col] = v;
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Clamp every entry to at least `floor`, in place.
    pub fn clamp_min(&mut self, floor: f64) {
        for v in &mut self.data {
            if *v < floor {
                *v = floor;
            }
        }
    }
}

/// Binary camera-aperture mask. `indicator[i] = 1` iff the pixel center lies
/// strictly inside the circle of `diameter_px` centered on the grid center;
/// the [`ApertureMask::full`] constructor instead marks every pixel (used by
/// the exact-EM oracle mode, where the forward operator is unitary).
#[derive(Debug, Clone, PartialEq)]
pub struct ApertureMask {
    n: usize,
    indicator: Vec<u8>,
    diameter_px: f64,
}

impl ApertureMask {
    pub fn circular(n: usize, diameter_px: f64) -> Result<Self> {
        check_grid_size(n)?;
        if !(diameter_px > 0.0 && diameter_px <= n as f64) {
            return Err(Error::InvalidArgument {
                name: "diameter_px",
                message: format!("need 0 < diameter_px <= {n}, got {diameter_px}"),
            });
        }
        let c = (n / 2) as f64;
        let radius_sqr = (diameter_px / 2.0) * (diameter_px / 2.0);
        let mut indicator = vec![0u8; n * n];
        for row in 0..n {
            for col in 0..n {
                let dy = row as f64 - c;
                let dx = col as f64 - c;
                if dx * dx + dy * dy < radius_sqr {
                    indicator[row * n + col] = 1;
                }
            }
        }
        Ok(Self {
            n,
            indicator,
            diameter_px,
        })
    }

    /// All-ones mask covering the whole grid.
    pub fn full(n: usize) -> Self {
        check_grid_size(n).expect("invalid grid size");
        Self {
            n,
            indicator: vec![1u8; n * n],
            diameter_px: n as f64,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diameter_px(&self) -> f64 {
        self.diameter_px
    }

    pub fn indicator(&self) -> &[u8] {
        &self.indicator
    }

    pub fn is_active(&self, idx: usize) -> bool {
        self.indicator[idx] != 0
    }

    pub fn active_count(&self) -> usize {
        self.indicator.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_full(&self) -> bool {
        self.indicator.iter().all(|&v| v != 0)
    }
}

/// Sample a circularly symmetric complex Gaussian field `g ~ CN(0, variance)`:
/// real and imaginary parts independent, each with variance `variance/2`,
/// so that `E[|g_i|^2] = variance_i`.
pub fn complex_gaussian_field(
    rng: &mut Rng,
    n: usize,
    variance: &RealField,
) -> Result<ComplexField> {
    if variance.n() != n {
        return Err(Error::Dimension {
            context: "complex_gaussian_field",
            expected: n,
            actual: variance.n(),
        });
    }
    let mut data = Vec::with_capacity(n * n);
    for &r in variance.data() {
        debug_assert!(r >= 0.0, "negative variance");
        let scale = (r * 0.5).sqrt();
        let re = scale * rng.standard_normal();
        let im = scale * rng.standard_normal();
        data.push(Complex64::new(re, im));
    }
    ComplexField::from_data(n, data)
}

/// Least-squares plane fit `field ~ a + b*x + c*y` over the active pixels of
/// `mask`, with `x = col - n/2` and `y = row - n/2` in pixels from the grid
/// center. Returns `(a, b, c)`.
pub fn ls_plane_fit(field: &RealField, mask: &ApertureMask) -> Result<(f64, f64, f64)> {
    if field.n() != mask.n() {
        return Err(Error::Dimension {
            context: "ls_plane_fit",
            expected: mask.n(),
            actual: field.n(),
        });
    }
    let n = field.n();
    let c = (n / 2) as f64;

    // Normal equations for the 3-parameter model.
    let (mut s1, mut sx, mut sy) = (0.0f64, 0.0f64, 0.0f64);
    let (mut sxx, mut sxy, mut syy) = (0.0f64, 0.0f64, 0.0f64);
    let (mut sf, mut sfx, mut sfy) = (0.0f64, 0.0f64, 0.0f64);
    for row in 0..n {
        let y = row as f64 - c;
        for col in 0..n {
            let idx = row * n + col;
            if !mask.is_active(idx) {
                continue;
            }
            let x = col as f64 - c;
            let f = field.data()[idx];
            s1 += 1.0;
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            syy += y * y;
            sf += f;
            sfx += f * x;
            sfy += f * y;
        }
    }

    // 3x3 solve by cofactor expansion.
    let m = [[s1, sx, sy], [sx, sxx, sxy], [sy, sxy, syy]];
    let rhs = [sf, sfx, sfy];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    // Scale-aware singularity test: s1 is the pixel count, sxx/syy grow as
    // count * extent^2, so det ~ count^3 * extent^4 for well-posed masks.
    if s1 < 3.0 || det.abs() <= 1e-9 * s1.max(1.0) {
        return Err(Error::DegenerateFit);
    }
    let solve = |rhs: [f64; 3]| {
        let dx = rhs[0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (rhs[1] * m[2][2] - m[1][2] * rhs[2])
            + m[0][2] * (rhs[1] * m[2][1] - m[1][1] * rhs[2]);
        let dy = m[0][0] * (rhs[1] * m[2][2] - m[1][2] * rhs[2])
            - rhs[0] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * rhs[2] - rhs[1] * m[2][0]);
        let dz = m[0][0] * (m[1][1] * rhs[2] - rhs[1] * m[2][1])
            - m[0][1] * (m[1][0] * rhs[2] - rhs[1] * m[2][0])
            + rhs[0] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        (dx / det, dy / det, dz / det)
    };
    Ok(solve(rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane_field(n: usize, a: f64, b: f64, c: f64) -> RealField {
        let mut f = RealField::zeros(n);
        let ctr = (n / 2) as f64;
        for row in 0..n {
            for col in 0..n {
                let x = col as f64 - ctr;
                let y = row as f64 - ctr;
                f.set(row, col, a + b * x + c * y);
            }
        }
        f
    }

    #[test]
    fn gaussian_zero_variance_is_zero_field() {
        let mut rng = Rng::new(1);
        let v = RealField::zeros(16);
        let g = complex_gaussian_field(&mut rng, 16, &v).unwrap();
        assert!(g.data().iter().all(|z| z.re == 0.0 && z.im == 0.0));
    }

    #[test]
    fn gaussian_unit_variance_mean_power() {
        // Monte-Carlo estimate of E|g|^2 = r over 100 draws of a 256x256 field.
        let mut rng = Rng::new(2);
        let v = RealField::constant(256, 1.0);
        let mut sum = 0.0;
        let mut count = 0usize;
        for _ in 0..100 {
            let g = complex_gaussian_field(&mut rng, 256, &v).unwrap();
            sum += g.norm_sqr();
            count += g.data().len();
        }
        let mean = sum / count as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean |g|^2 = {mean}");
    }

    #[test]
    fn gaussian_determinism() {
        let v = RealField::constant(32, 0.7);
        let a = complex_gaussian_field(&mut Rng::new(5), 32, &v).unwrap();
        let b = complex_gaussian_field(&mut Rng::new(5), 32, &v).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gaussian_re_im_uncorrelated() {
        // |corr(re, im)| < 0.02 over 1e6 samples.
        let mut rng = Rng::new(3);
        let n = 256;
        let v = RealField::constant(n, 2.0);
        let mut sum_re = 0.0;
        let mut sum_im = 0.0;
        let mut sum_re_im = 0.0;
        let mut sum_re2 = 0.0;
        let mut sum_im2 = 0.0;
        let mut count = 0.0;
        for _ in 0..16 {
            let g = complex_gaussian_field(&mut rng, n, &v).unwrap();
            for z in g.data() {
                sum_re += z.re;
                sum_im += z.im;
                sum_re_im += z.re * z.im;
                sum_re2 += z.re * z.re;
                sum_im2 += z.im * z.im;
                count += 1.0;
            }
        }
        assert!(count >= 1.0e6);
        let cov = sum_re_im / count - (sum_re / count) * (sum_im / count);
        let var_re = sum_re2 / count - (sum_re / count).powi(2);
        let var_im = sum_im2 / count - (sum_im / count).powi(2);
        let corr = cov / (var_re * var_im).sqrt();
        assert!(corr.abs() < 0.02, "corr = {corr}");
    }

    #[test]
    fn plane_fit_exact_plane() {
        let f = plane_field(32, 2.0, 3.0, -1.0);
        let mask = ApertureMask::circular(32, 28.0).unwrap();
        let (a, b, c) = ls_plane_fit(&f, &mask).unwrap();
        assert!((a - 2.0).abs() < 1e-10);
        assert!((b - 3.0).abs() < 1e-10);
        assert!((c - (-1.0)).abs() < 1e-10);
    }

    #[test]
    fn plane_fit_constant() {
        let f = RealField::constant(16, 5.0);
        let mask = ApertureMask::full(16);
        let (a, b, c) = ls_plane_fit(&f, &mask).unwrap();
        assert!((a - 5.0).abs() < 1e-12);
        assert!(b.abs() < 1e-12);
        assert!(c.abs() < 1e-12);
    }

    #[test]
    fn plane_fit_matches_dense_least_squares() {
        // Plane plus a deterministic zero-mean bumpy perturbation; reference
        // slopes from an independent SVD least-squares solve.
        use nalgebra::{DMatrix, DVector};
        let n = 24;
        let mut f = plane_field(n, 0.5, -0.25, 0.8);
        let ctr = (n / 2) as f64;
        for row in 0..n {
            for col in 0..n {
                let bump = 0.3 * ((row as f64) * 0.7).sin() * ((col as f64) * 1.3).cos();
                let v = f.at(row, col) + bump;
                f.set(row, col, v);
            }
        }
        let mask = ApertureMask::full(n);
        let (a, b, c) = ls_plane_fit(&f, &mask).unwrap();

        let rows = n * n;
        let mut design = DMatrix::<f64>::zeros(rows, 3);
        let mut obs = DVector::<f64>::zeros(rows);
        for row in 0..n {
            for col in 0..n {
                let i = row * n + col;
                design[(i, 0)] = 1.0;
                design[(i, 1)] = col as f64 - ctr;
                design[(i, 2)] = row as f64 - ctr;
                obs[i] = f.at(row, col);
            }
        }
        let svd = design.svd(true, true);
        let sol = svd.solve(&obs, 1e-12).unwrap();
        assert!((a - sol[0]).abs() < 1e-9, "{a} vs {}", sol[0]);
        assert!((b - sol[1]).abs() < 1e-9, "{b} vs {}", sol[1]);
        assert!((c - sol[2]).abs() < 1e-9, "{c} vs {}", sol[2]);
    }

    #[test]
    fn plane_fit_degenerate_mask() {
        // A single active row is collinear: x varies but y is constant, so the
        // y-slope is unidentifiable.
        let n = 8;
        let mut mask = ApertureMask::full(n);
        // Rebuild as a single-row mask through the indicator.
        let mut ind = vec![0u8; n * n];
        for col in 0..n {
            ind[3 * n + col] = 1;
        }
        mask.indicator.copy_from_slice(&ind);
        let f = RealField::constant(n, 1.0);
        assert!(matches!(
            ls_plane_fit(&f, &mask),
            Err(Error::DegenerateFit)
        ));
    }

    #[test]
    fn aperture_strictly_inside() {
        let mask = ApertureMask::circular(8, 8.0).unwrap();
        // Center pixel active, pixel at distance exactly d/2 (boundary) inactive.
        assert!(mask.is_active(4 * 8 + 4));
        assert!(!mask.is_active(0 * 8 + 4)); // (0,4) is at distance 4 = d/2
        assert!(mask.active_count() > 0 && mask.active_count() < 64);
    }

    #[test]
    fn field_dimension_checks() {
        assert!(ComplexField::from_data(4, vec![Complex64::default(); 15]).is_err());
        assert!(RealField::from_data(3, vec![0.0; 9]).is_err()); // odd n
    }
}
