use std::f64::consts::PI;

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Kernel bandwidth: Silverman's rule per axis, or one explicit value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Auto,
    Fixed(f64),
}

/// Axis-aligned evaluation grid for a 2-D kernel density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeConfig {
    pub bandwidth: Bandwidth,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Grid points per axis, endpoints included.
    pub resolution: (usize, usize),
}

impl KdeConfig {
    pub fn square(half_width: f64, resolution: usize, bandwidth: Bandwidth) -> Self {
        Self {
            bandwidth,
            x_range: (-half_width, half_width),
            y_range: (-half_width, half_width),
            resolution: (resolution, resolution),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.resolution.0 < 2 || self.resolution.1 < 2 {
            return Err(Error::InvalidArgument(
                "KDE resolution must be at least 2 per axis".into(),
            ));
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h > 0.0) {
                return Err(Error::InvalidArgument(format!("KDE bandwidth {h} must be positive")));
            }
        }
        if !(self.x_range.1 > self.x_range.0) || !(self.y_range.1 > self.y_range.0) {
            return Err(Error::InvalidArgument("KDE grid ranges must be increasing".into()));
        }
        Ok(())
    }
}

/// Density values on the grid; `values.get(iy, ix)` is the estimate at
/// `(xs[ix], ys[iy])`.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub values: Matrix,
    pub bandwidth: (f64, f64),
}

impl KdeGrid {
    pub fn cell_area(&self) -> f64 {
        (self.xs[1] - self.xs[0]) * (self.ys[1] - self.ys[0])
    }

    /// Riemann sum of the estimate over the grid.
    pub fn mass(&self) -> f64 {
        self.values.as_slice().iter().sum::<f64>() * self.cell_area()
    }

    /// `(ix, iy)` of the largest grid value.
    pub fn argmax(&self) -> (usize, usize) {
        let nx = self.xs.len();
        let (idx, _) = self
            .values
            .as_slice()
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        (idx % nx, idx / nx)
    }
}

fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn silverman(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // Multivariate rule (4/(d+2))^{1/(d+4)} n^{-1/(d+4)} σ, with d = 2.
    let h = var.sqrt() * n.powf(-1.0 / 6.0);
    if h > 0.0 {
        h
    } else {
        // All samples coincide on this axis; any positive width is valid.
        n.powf(-1.0 / 6.0)
    }
}

/// Product Gaussian-kernel density estimate of 2-D `samples` on the grid.
///
/// Kernels are truncated at eight bandwidths, where they fall below `e^{-32}`.
pub fn kde_density(samples: &Matrix, cfg: &KdeConfig) -> Result<KdeGrid> {
    cfg.validate()?;
    if samples.ncols() != 2 {
        return Err(Error::InvalidArgument(format!(
            "KDE needs 2-D samples, got {} columns",
            samples.ncols()
        )));
    }
    let count = samples.nrows();
    if count < 2 {
        return Err(Error::InvalidArgument("KDE needs at least 2 samples".into()));
    }
    let (hx, hy) = match cfg.bandwidth {
        Bandwidth::Fixed(h) => (h, h),
        Bandwidth::Auto => (
            silverman(&samples.column(0)),
            silverman(&samples.column(1)),
        ),
    };
    let xs = linspace(cfg.x_range, cfg.resolution.0);
    let ys = linspace(cfg.y_range, cfg.resolution.1);
    let (nx, ny) = (xs.len(), ys.len());
    let dx = xs[1] - xs[0];
    let dy = ys[1] - ys[0];
    let mut grid = vec![0.0; nx * ny];
    let mut kx = Vec::new();
    let mut ky = Vec::new();
    for row in samples.rows_iter() {
        let (x0, x1) = window(row[0], hx, cfg.x_range.0, dx, nx);
        let (y0, y1) = window(row[1], hy, cfg.y_range.0, dy, ny);
        if x0 >= x1 || y0 >= y1 {
            continue;
        }
        kx.clear();
        kx.extend((x0..x1).map(|i| (-0.5 * ((xs[i] - row[0]) / hx).powi(2)).exp()));
        ky.clear();
        ky.extend((y0..y1).map(|j| (-0.5 * ((ys[j] - row[1]) / hy).powi(2)).exp()));
        for (j, &wy) in (y0..y1).zip(&ky) {
            let line = &mut grid[j * nx + x0..j * nx + x1];
            for (g, &wx) in line.iter_mut().zip(&kx) {
                *g += wx * wy;
            }
        }
    }
    let scale = 1.0 / (count as f64 * 2.0 * PI * hx * hy);
    grid.iter_mut().for_each(|v| *v *= scale);
    Ok(KdeGrid {
        xs,
        ys,
        values: Matrix::from_vec(ny, nx, grid)?,
        bandwidth: (hx, hy),
    })
}

/// Index range of grid points within eight bandwidths of `center`.
fn window(center: f64, h: f64, lo: f64, step: f64, n: usize) -> (usize, usize) {
    let a = ((center - 8.0 * h - lo) / step).ceil();
    let b = ((center + 8.0 * h - lo) / step).floor() + 1.0;
    let clamp = |v: f64| v.max(0.0).min(n as f64) as usize;
    (clamp(a), clamp(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_peak_at_nearest_grid_point() {
        let s = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let cfg = KdeConfig::square(3.0, 40, Bandwidth::Fixed(1.0));
        let g = kde_density(&s, &cfg).unwrap();
        let (ix, iy) = g.argmax();
        // 40 points on [-3, 3]: the two nearest to 0 are at ±0.0769.
        assert!(g.xs[ix].abs() < 0.08 && g.ys[iy].abs() < 0.08);
        let auto = kde_density(&s, &KdeConfig::square(3.0, 40, Bandwidth::Auto)).unwrap();
        assert!(auto.values.as_slice().iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let one = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let cfg = KdeConfig::square(1.0, 10, Bandwidth::Auto);
        assert!(kde_density(&one, &cfg).is_err());
        let three_d = Matrix::zeros(5, 3);
        assert!(kde_density(&three_d, &cfg).is_err());
        let two = Matrix::zeros(2, 2);
        assert!(kde_density(&two, &KdeConfig::square(1.0, 1, Bandwidth::Auto)).is_err());
        assert!(kde_density(&two, &KdeConfig::square(1.0, 5, Bandwidth::Fixed(0.0))).is_err());
    }

    #[test]
    fn truncated_kernel_matches_untruncated_sum() {
        let s = Matrix::from_rows(&[vec![0.3, -0.2], vec![-1.0, 0.5], vec![0.9, 0.9]]).unwrap();
        let cfg = KdeConfig::square(2.0, 21, Bandwidth::Fixed(0.1));
        let g = kde_density(&s, &cfg).unwrap();
        for (iy, &y) in g.ys.iter().enumerate() {
            for (ix, &x) in g.xs.iter().enumerate() {
                let direct: f64 = s
                    .rows_iter()
                    .map(|r| (-0.5 * (((x - r[0]) / 0.1).powi(2) + ((y - r[1]) / 0.1).powi(2))).exp())
                    .sum::<f64>()
                    / (3.0 * 2.0 * PI * 0.01);
                assert!((g.values.get(iy, ix) - direct).abs() < 1e-12);
            }
        }
    }
}
