//! Ground-truth reflectance: a procedural resolution chart of three-bar
//! groups at several scales, or an imported grayscale image.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::RealField;
use crate::io::raster::read_raster;

/// Per-pixel reflectance in `[r_min, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectanceMap {
    data: RealField,
    r_min: f64,
}

impl ReflectanceMap {
    pub fn from_field(data: RealField, r_min: f64) -> Result<Self> {
        if !(r_min > 0.0) {
            return Err(Error::InvalidArgument {
                name: "r_min",
                message: format!("need r_min > 0, got {r_min}"),
            });
        }
        if data.data().iter().any(|&v| v < r_min || v > 1.0) {
            return Err(Error::InvalidArgument {
                name: "data",
                message: format!("reflectance outside [{r_min}, 1]"),
            });
        }
        Ok(Self { data, r_min })
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn field(&self) -> &RealField {
        &self.data
    }

    pub fn into_field(self) -> RealField {
        self.data
    }
}

/// Bar widths for the chart: a geometric ladder from `n/8` px down to 2 px
/// with at least five rungs (requires `n >= 128` for five distinct values).
fn bar_scales(n: usize) -> Vec<usize> {
    let top = (n / 8).max(2);
    let count = 5usize.max((n as f64 / 16.0).log2().floor() as usize + 1);
    let ratio = (2.0 / top as f64).powf(1.0 / (count - 1) as f64);
    let mut scales = Vec::with_capacity(count);
    for k in 0..count {
        let s = (top as f64 * ratio.powi(k as i32)).round() as usize;
        let s = s.max(2);
        if scales.last() != Some(&s) {
            scales.push(s);
        }
    }
    scales
}

struct Packer {
    n: usize,
    margin: usize,
    cur_row: usize,
    cur_col: usize,
    row_h: usize,
}

impl Packer {
    fn new(n: usize, margin: usize) -> Self {
        Self {
            n,
            margin,
            cur_row: margin,
            cur_col: margin,
            row_h: 0,
        }
    }

    /// Next free slot for a `h x w` element, left-to-right then top-to-
    /// bottom; `None` when the canvas is exhausted.
    fn place(&mut self, h: usize, w: usize) -> Option<(usize, usize)> {
        if self.cur_col + w + self.margin > self.n {
            self.cur_row += self.row_h + self.margin;
            self.cur_col = self.margin;
            self.row_h = 0;
        }
        if self.cur_row + h + self.margin > self.n || self.cur_col + w + self.margin > self.n {
            return None;
        }
        let slot = (self.cur_row, self.cur_col);
        self.cur_col += w + self.margin;
        self.row_h = self.row_h.max(h);
        Some(slot)
    }
}

struct Canvas<'a> {
    field: &'a mut RealField,
    foreground: f64,
    background: f64,
}

impl Canvas<'_> {
    fn fill(&mut self, row0: usize, col0: usize, h: usize, w: usize) {
        for row in row0..row0 + h {
            for col in col0..col0 + w {
                self.field.set(row, col, self.foreground);
            }
        }
    }

    fn clear(&mut self, row0: usize, col0: usize, h: usize, w: usize) {
        for row in row0..row0 + h {
            for col in col0..col0 + w {
                self.field.set(row, col, self.background);
            }
        }
    }
}

/// Deterministic two-level resolution chart: vertical and horizontal
/// three-bar groups plus numeral-like blocks at every rung of
/// [`bar_scales`]. For `n >= 128` at least five scales are placed.
pub fn bar_target(n: usize, background: f64, foreground: f64, r_min: f64) -> Result<ReflectanceMap> {
    if !(r_min > 0.0 && r_min <= background && background < foreground && foreground <= 1.0) {
        return Err(Error::InvalidArgument {
            name: "levels",
            message: format!(
                "need r_min <= background < foreground <= 1, got r_min={r_min} \
                 background={background} foreground={foreground}"
            ),
        });
    }
    if n < 32 || n % 2 != 0 {
        return Err(Error::InvalidArgument {
            name: "n",
            message: format!("bar target needs even n >= 32, got {n}"),
        });
    }
    let mut field = RealField::constant(n, background);
    let mut canvas = Canvas {
        field: &mut field,
        foreground,
        background,
    };
    let margin = (n / 64).max(2);
    let mut packer = Packer::new(n, margin);
    let scales = bar_scales(n);
    for (rank, &s) in scales.iter().enumerate() {
        // Vertical group: bars s x 4s side by side with s gaps (5s x 4s).
        if let Some((row, col)) = packer.place(4 * s, 5 * s) {
            for k in 0..3 {
                canvas.fill(row, col + 2 * k * s, 4 * s, s);
            }
        }
        // The largest group alone nearly spans the canvas; skip its
        // horizontal twin so the smaller scales keep room.
        if rank > 0 {
            if let Some((row, col)) = packer.place(5 * s, 4 * s) {
                for k in 0..3 {
                    canvas.fill(row + 2 * k * s, col, s, 4 * s);
                }
            }
        }
        // A notched block, numeral-like, to break the bar symmetry.
        if let Some((row, col)) = packer.place(3 * s, 2 * s) {
            canvas.fill(row, col, 3 * s, 2 * s);
            canvas.clear(row + s, col, s, s);
        }
    }
    drop(canvas);
    ReflectanceMap::from_field(field, r_min)
}

/// Load a P5 graymap, resample to `n x n` by bilinear interpolation, and map
/// `[0, 255]` linearly onto `[r_min, 1]`.
pub fn load_reflectance(path: &Path, n: usize, r_min: f64) -> Result<ReflectanceMap> {
    if !(r_min > 0.0 && r_min < 1.0) {
        return Err(Error::InvalidArgument {
            name: "r_min",
            message: format!("need 0 < r_min < 1, got {r_min}"),
        });
    }
    let img = read_raster(path)?;
    if img.width == 0 || img.height == 0 {
        return Err(Error::Format("empty graymap".into()));
    }
    let mut field = RealField::zeros(n);
    for row in 0..n {
        let src_y = ((row as f64 + 0.5) * img.height as f64 / n as f64 - 0.5)
            .clamp(0.0, (img.height - 1) as f64);
        let y0 = src_y.floor() as usize;
        let y1 = (y0 + 1).min(img.height - 1);
        let fy = src_y - y0 as f64;
        for col in 0..n {
            let src_x = ((col as f64 + 0.5) * img.width as f64 / n as f64 - 0.5)
                .clamp(0.0, (img.width - 1) as f64);
            let x0 = src_x.floor() as usize;
            let x1 = (x0 + 1).min(img.width - 1);
            let fx = src_x - x0 as f64;
            let p = |yy: usize, xx: usize| img.pixels[yy * img.width + xx] as f64;
            let top = p(y0, x0) * (1.0 - fx) + p(y0, x1) * fx;
            let bottom = p(y1, x0) * (1.0 - fx) + p(y1, x1) * fx;
            let gray = top * (1.0 - fy) + bottom * fy;
            field.set(row, col, r_min + gray / 255.0 * (1.0 - r_min));
        }
    }
    ReflectanceMap::from_field(field, r_min)
}
