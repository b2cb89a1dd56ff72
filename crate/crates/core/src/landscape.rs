//! Loss landscapes over 3-D grids, written as plain PPM images plus a CSV of
//! the raw losses.
//!
//! Each rendered depth slice `z` becomes one image whose pixel `(x, y)` shows
//! `v = clip(L / l_max, 0, 1)` for the cell `(x, y, z)`. Row 0 of the image is
//! `y = 0`. Colors follow a five-stop ramp from dark purple (`v = 0`, the
//! most expert-like states) through blue and green to yellow (`v = 1`):
//!
//! | v    | RGB            |
//! |------|----------------|
//! | 0.00 | 68, 1, 84      |
//! | 0.25 | 59, 82, 139    |
//! | 0.50 | 33, 145, 140   |
//! | 0.75 | 94, 201, 98    |
//! | 1.00 | 253, 231, 37   |
//!
//! with linear interpolation between stops.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::envs::{Cell, GridWorld};
use crate::error::{Error, Result};
use crate::moe::MoEModel;
use crate::textio::write_file;

pub const PALETTE: [[u8; 3]; 5] = [
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
];

pub const LOSS_CSV_HEADER: &str = "z,y,x,loss,v";

/// Color of `v` on the documented ramp; `v` is clipped to `[0, 1]` first.
pub fn color(v: f64) -> [u8; 3] {
    let v = if v.is_nan() { 1.0 } else { v.clamp(0.0, 1.0) };
    let pos = v * (PALETTE.len() - 1) as f64;
    let i = (pos.floor() as usize).min(PALETTE.len() - 2);
    let f = pos - i as f64;
    let (a, b) = (PALETTE[i], PALETTE[i + 1]);
    std::array::from_fn(|k| (a[k] as f64 + f * (b[k] as f64 - a[k] as f64)).round() as u8)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    /// Row-major, clipped to `[0, 1]`.
    pub values: Vec<f64>,
    pub slice_index: usize,
}

impl Heatmap {
    /// Clips every value into `[0, 1]`; NaN maps to 1.
    pub fn new(width: usize, height: usize, values: Vec<f64>, slice_index: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::config("heatmap", "width and height must be positive"));
        }
        crate::error::check_len("heatmap values", width * height, values.len())?;
        let values = values
            .into_iter()
            .map(|v| if v.is_nan() { 1.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        Ok(Self {
            width,
            height,
            values,
            slice_index,
        })
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Plain (ASCII) PPM.
    pub fn to_ppm(&self) -> String {
        let mut out = format!(
            "P3\n# slice {}\n{} {}\n255\n",
            self.slice_index, self.width, self.height
        );
        for row in self.values.chunks(self.width) {
            let line: Vec<String> = row
                .iter()
                .map(|&v| {
                    let [r, g, b] = color(v);
                    format!("{r} {g} {b}")
                })
                .collect();
            out.push_str(&line.join("  "));
            out.push('\n');
        }
        out
    }

    pub fn median(&self) -> f64 {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    pub heatmaps: Vec<Heatmap>,
    /// Raw losses per rendered slice, row-major like the heatmaps.
    pub losses: Vec<Vec<f64>>,
    pub images: Vec<PathBuf>,
    pub csv: PathBuf,
}

impl Landscape {
    /// Mean `v` over `cells` and over every other rendered cell. Cells on
    /// slices that were not rendered are ignored.
    pub fn region_means(&self, cells: &[Cell]) -> (f64, f64) {
        let mut on = Vec::new();
        let (mut sum_on, mut n_on, mut sum_off, mut n_off) = (0.0, 0usize, 0.0, 0usize);
        for h in &self.heatmaps {
            on.clear();
            on.resize(h.values.len(), false);
            for c in cells.iter().filter(|c| c[2] == h.slice_index) {
                if c[0] < h.width && c[1] < h.height {
                    on[c[1] * h.width + c[0]] = true;
                }
            }
            for (i, &v) in h.values.iter().enumerate() {
                if on[i] {
                    sum_on += v;
                    n_on += 1;
                } else {
                    sum_off += v;
                    n_off += 1;
                }
            }
        }
        let mean = |s: f64, n: usize| if n == 0 { f64::NAN } else { s / n as f64 };
        (mean(sum_on, n_on), mean(sum_off, n_off))
    }
}

/// Depth slices `0, stride, 2 * stride, ...` of a 3-D world.
pub fn slice_indices(depth: usize, stride: usize) -> Vec<usize> {
    (0..depth).step_by(stride.max(1)).collect()
}

/// Evaluates the model's loss on every cell of the selected depth slices
/// (walls included) and writes `slice_ZZZ.ppm` per slice plus `losses.csv`.
pub fn render_landscape(
    model: &MoEModel,
    world: &GridWorld,
    l_max: f64,
    out_dir: &Path,
    stride: usize,
) -> Result<Landscape> {
    if !(l_max > 0.0 && l_max.is_finite()) {
        return Err(Error::config("l_max", "must be positive"));
    }
    if world.ndim() != 3 {
        return Err(Error::config("world.dims", "landscapes need a 3-D world"));
    }
    if stride == 0 {
        return Err(Error::config("stride", "must be positive"));
    }
    let d = world.dims();
    let (w, h) = (d[0], d[1]);
    let mut csv = format!("{LOSS_CSV_HEADER}\n");
    let mut heatmaps = Vec::new();
    let mut losses = Vec::new();
    let mut images = Vec::new();
    for z in slice_indices(d[2], stride) {
        let mut raw = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let loss = model.loss(&world.state_of([x, y, z]))?;
                let v = (loss / l_max).clamp(0.0, 1.0);
                let _ = writeln!(csv, "{z},{y},{x},{loss:?},{v:?}");
                raw.push(loss);
            }
        }
        let map = Heatmap::new(w, h, raw.iter().map(|l| l / l_max).collect(), z)?;
        let path = out_dir.join(format!("slice_{z:03}.ppm"));
        write_file(&path, &map.to_ppm())?;
        images.push(path);
        heatmaps.push(map);
        losses.push(raw);
    }
    let csv_path = out_dir.join("losses.csv");
    write_file(&csv_path, &csv)?;
    Ok(Landscape {
        heatmaps,
        losses,
        images,
        csv: csv_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ramp_endpoints() {
        assert_eq!(color(0.0), PALETTE[0]);
        assert_eq!(color(1.0), PALETTE[4]);
        assert_eq!(color(0.5), PALETTE[2]);
        assert_eq!(color(-3.0), PALETTE[0]);
        assert_eq!(color(7.0), PALETTE[4]);
        assert_eq!(color(f64::NAN), PALETTE[4]);
    }

    #[test]
    fn heatmap_clips() {
        let h = Heatmap::new(2, 1, vec![-1.0, 2.0], 0).unwrap();
        assert_eq!(h.values, vec![0.0, 1.0]);
        assert!(Heatmap::new(2, 2, vec![0.0; 3], 0).is_err());
    }

    #[test]
    fn ppm_layout() {
        let h = Heatmap::new(3, 2, vec![0.0, 0.5, 1.0, 1.0, 0.5, 0.0], 4).unwrap();
        let ppm = h.to_ppm();
        let lines: Vec<&str> = ppm.lines().collect();
        assert_eq!(lines[0], "P3");
        assert_eq!(lines[2], "3 2");
        assert_eq!(lines[3], "255");
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[4].split_whitespace().count(), 9);
        assert!(lines[4].starts_with("68 1 84"));
    }

    #[test]
    fn median_of_even_count() {
        let h = Heatmap::new(2, 2, vec![0.1, 0.4, 0.2, 0.3], 0).unwrap();
        assert!((h.median() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn slices_use_stride() {
        assert_eq!(slice_indices(7, 2), vec![0, 2, 4, 6]);
        assert_eq!(slice_indices(3, 1), vec![0, 1, 2]);
    }
}
