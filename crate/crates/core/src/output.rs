//! File emitters: CSV with 17 significant digits, pretty JSON, and a
//! minimal static SVG line plot.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::integrator::Trajectory;

/// `x` in scientific notation with 17 significant digits, which
/// round-trips every finite `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// `None` becomes an empty field.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// CSV writer that formats floats with [`fmt_f64`].
pub struct CsvSink<W: Write> {
    inner: csv::Writer<W>,
}

impl CsvSink<BufWriter<File>> {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        Self::from_writer(BufWriter::new(File::create(path)?), header)
    }
}

impl<W: Write> CsvSink<W> {
    pub fn from_writer(writer: W, header: &[&str]) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(header)?;
        Ok(CsvSink { inner })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        self.inner.write_record(values.iter().map(|&v| fmt_f64(v)))?;
        Ok(())
    }

    /// A row of preformatted fields.
    pub fn fields<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| e.into_error().into())
    }
}

/// Writes `t,<components>[,y]`, one row per recorded sample.
pub fn write_trajectory<W: Write>(traj: &Trajectory, writer: W) -> Result<W> {
    let mut header: Vec<&str> = vec!["t"];
    header.extend(traj.component_names.iter().map(String::as_str));
    if traj.outputs().is_some() {
        header.push("y");
    }
    let mut sink = CsvSink::from_writer(writer, &header)?;
    let mut row = Vec::with_capacity(header.len());
    for (i, (t, x)) in traj.samples().enumerate() {
        row.clear();
        row.push(t);
        row.extend_from_slice(x);
        if let Some(ys) = traj.outputs() {
            row.push(ys[i]);
        }
        sink.row(&row)?;
    }
    sink.finish()
}

pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    write_trajectory(traj, BufWriter::new(File::create(path)?))?.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// One polyline of an [`svg_plot`].
pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];

/// Static SVG line plot with axis extents printed at the corners.
pub fn svg_plot(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let (w, h, m) = (640.0, 400.0, 50.0);
    let finite = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<rect x="{m}" y="{m}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * m,
        h - 2.0 * m
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 10.0, escape(x_label));
    let _ = writeln!(out, r#"<text x="15" y="{}" transform="rotate(-90 15 {})" text-anchor="middle">{}</text>"#, h / 2.0, h / 2.0, escape(y_label));
    let _ = writeln!(out, r#"<text x="{m}" y="{}">{x0:.4}</text>"#, h - m + 15.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{x1:.4}</text>"#, w - m, h - m + 15.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{y0:.4}</text>"#, m - 4.0, h - m);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{y1:.4}</text>"#, m - 4.0, m + 10.0);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(out, r#"<text x="{}" y="{}" fill="{color}">{}</text>"#, w - m - 120.0, m + 16.0 * (i + 1) as f64, escape(s.label));
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Keeps at most `max_points` evenly strided points.
pub fn thin(points: Vec<(f64, f64)>, max_points: usize) -> Vec<(f64, f64)> {
    let stride = points.len().div_ceil(max_points.max(1)).max(1);
    points.into_iter().step_by(stride).collect()
}
