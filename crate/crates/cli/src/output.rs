//! File output: CSV tables, SVG heatmaps and path-aware I/O errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rfwgan_core::Matrix;

use crate::CliError;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// `<out>/<command>_<fixture>_<seed>`.
pub fn run_dir(out: &Path, command: &str, fixture: &str, seed: u64) -> PathBuf {
    out.join(format!("{command}_{fixture}_{seed}"))
}

/// Point cloud with header `x0,x1,...`.
pub fn points_csv(points: &Matrix) -> String {
    let header: Vec<String> = (0..points.ncols()).map(|i| format!("x{i}")).collect();
    let mut s = header.join(",");
    s.push('\n');
    for row in points.rows_iter() {
        let cells: Vec<String> = row.iter().map(|&v| num(v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// A scalar field `values.get(iy, ix)` on the axes `xs × ys`.
pub struct Field<'a> {
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    pub values: &'a Matrix,
}

impl Field<'_> {
    /// Rows `x,y,value` with `x` varying fastest.
    pub fn csv(&self, header: &str) -> String {
        let mut s = format!("{header}\n");
        for (iy, &y) in self.ys.iter().enumerate() {
            for (ix, &x) in self.xs.iter().enumerate() {
                let _ = writeln!(s, "{},{},{}", num(x), num(y), num(self.values.get(iy, ix)));
            }
        }
        s
    }

    /// Heatmap with one rectangle per cell, `y` increasing upwards. With
    /// `log_scale` the colors follow `log10` of the (positive) values.
    pub fn svg(&self, title: &str, log_scale: bool) -> String {
        const CELL: f64 = 6.0;
        const MARGIN: f64 = 30.0;
        let (nx, ny) = (self.xs.len(), self.ys.len());
        let transform = |v: f64| if log_scale { v.max(1e-300).log10() } else { v };
        let mapped: Vec<f64> = self.values.as_slice().iter().map(|&v| transform(v)).collect();
        let finite = mapped.iter().copied().filter(|v| v.is_finite());
        let lo = finite.clone().fold(f64::INFINITY, f64::min);
        let hi = finite.fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let width = nx as f64 * CELL;
        let height = ny as f64 * CELL;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
            width + 2.0 * MARGIN,
            height + 2.0 * MARGIN,
            width + 2.0 * MARGIN,
            height + 2.0 * MARGIN
        );
        let _ = writeln!(s, r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#, MARGIN - 10.0, escape(title));
        let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
        for iy in 0..ny {
            for ix in 0..nx {
                let v = mapped[iy * nx + ix];
                let level = if v.is_finite() {
                    (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as usize
                } else {
                    255
                };
                let (r, g, b) = RAMP[level];
                let x = MARGIN + ix as f64 * CELL;
                let y = MARGIN + (ny - 1 - iy) as f64 * CELL;
                let _ = writeln!(s, r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="#{r:02x}{g:02x}{b:02x}"/>"##);
            }
        }
        s.push_str("</g>\n");
        let label = |v: f64| format!("{v:.3}");
        let _ = writeln!(
            s,
            r#"<text x="{MARGIN}" y="{}" font-family="sans-serif" font-size="10">x: [{}, {}]  y: [{}, {}]  {}: [{}, {}]</text>"#,
            height + MARGIN + 15.0,
            label(self.xs[0]),
            label(self.xs[nx - 1]),
            label(self.ys[0]),
            label(self.ys[ny - 1]),
            if log_scale { "log10" } else { "value" },
            label(lo),
            label(hi)
        );
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// 256-step ramp from dark blue through teal and green to yellow,
/// linearly interpolated between five anchors.
static RAMP: std::sync::LazyLock<[(u8, u8, u8); 256]> = std::sync::LazyLock::new(|| {
    const ANCHORS: [(f64, f64, f64); 5] = [
        (68.0, 1.0, 84.0),
        (59.0, 82.0, 139.0),
        (33.0, 145.0, 140.0),
        (94.0, 201.0, 98.0),
        (253.0, 231.0, 37.0),
    ];
    let mut ramp = [(0u8, 0u8, 0u8); 256];
    for (i, slot) in ramp.iter_mut().enumerate() {
        let t = i as f64 / 255.0 * (ANCHORS.len() - 1) as f64;
        let k = (t.floor() as usize).min(ANCHORS.len() - 2);
        let f = t - k as f64;
        let (a, b) = (ANCHORS[k], ANCHORS[k + 1]);
        let mix = |x: f64, y: f64| (x + f * (y - x)).round() as u8;
        *slot = (mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2));
    }
    ramp
});
