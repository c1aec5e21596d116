//! Per-skill trend panels and metric tables.
//!
//! The image format follows the output extension: `.svg` is written by
//! hand, `.png` is rasterized with the `image` crate.

use std::fmt::Write as _;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ImageFormat, Rgb, RgbImage};

use crate::corpus::{load_artifacts, CorpusArtifacts};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::labels::{argmax_rows, MetricsReport};
use crate::train::{evaluate, predict, AblationReport, Checkpoint, Dataset, Part};

pub const TABLE_HEADER: [&str; 5] = ["variant", "acc", "f1", "auc", "jacc"];

const PANEL_W: u32 = 360;
const PANEL_H: u32 = 200;
const MARGIN: f64 = 24.0;
const DEMAND_COLOR: [u8; 3] = [31, 119, 180];
const SUPPLY_COLOR: [u8; 3] = [255, 127, 14];

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRequest {
    pub checkpoint: PathBuf,
    /// Corpus directory; defaults to the one recorded in the checkpoint.
    pub data: Option<PathBuf>,
    pub skills: Vec<String>,
    /// Required when `skills` is non-empty.
    pub image: Option<PathBuf>,
    pub table: PathBuf,
    /// `ablation.json` written by the ablation run, if any.
    pub ablation: Option<PathBuf>,
}

/// One plotted skill.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillPanel {
    pub name: String,
    pub demand: Vec<f64>,
    pub supply: Vec<f64>,
    pub predicted_demand: usize,
    pub predicted_supply: usize,
    pub true_demand: usize,
    pub true_supply: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub variant: String,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportOutput {
    pub panels: Vec<SkillPanel>,
    pub rows: Vec<TableRow>,
    pub image_written: bool,
}

pub fn render_report(req: &ReportRequest) -> Result<ReportOutput> {
    let ckpt = Checkpoint::load(&req.checkpoint)?;
    let data_dir = req
        .data
        .clone()
        .or_else(|| ckpt.data_dir.clone())
        .ok_or_else(|| Error::Config("checkpoint records no corpus directory; pass one explicitly".into()))?;
    let artifacts = load_artifacts(&data_dir)?;
    let ids = resolve_skills(&artifacts, &req.skills)?;
    let data = Dataset::from_artifacts(&artifacts)?;

    let rows = match &req.ablation {
        Some(path) => {
            let report: AblationReport = serde_json::from_str(&fsutil::read_to_string(path)?)?;
            report
                .rows
                .iter()
                .map(|r| TableRow {
                    variant: r.variant.to_string(),
                    metrics: r.mean,
                })
                .collect()
        }
        None => vec![TableRow {
            variant: ckpt.config().variant.to_string(),
            metrics: evaluate(&ckpt, &data, Part::Test)?.summary,
        }],
    };
    fsutil::write_file_atomically(&req.table, table_csv(&rows)?.as_bytes())?;

    if ids.is_empty() {
        return Ok(ReportOutput {
            panels: Vec::new(),
            rows,
            image_written: false,
        });
    }
    let image = req
        .image
        .as_ref()
        .ok_or_else(|| Error::Config("plotting skills needs an image path".into()))?;
    let last = data.n_steps() - 1;
    let pred = predict(&ckpt.model, &data, last)?;
    let truth = data.sample(last, ckpt.config())?;
    let pd = argmax_rows(pred.demand_probs.view());
    let ps = argmax_rows(pred.supply_probs.view());
    let panels: Vec<SkillPanel> = ids
        .iter()
        .map(|&k| SkillPanel {
            name: artifacts.vocab.name(k).to_string(),
            demand: data.demand.row(k).to_vec(),
            supply: data.supply.row(k).to_vec(),
            predicted_demand: pd[k],
            predicted_supply: ps[k],
            true_demand: truth.demand_labels.classes[k],
            true_supply: truth.supply_labels.classes[k],
        })
        .collect();
    let n_classes = ckpt.config().n_classes;
    let bytes = match extension(image).as_str() {
        "svg" => render_svg(&panels, n_classes).into_bytes(),
        "png" => render_png(&panels, n_classes)?,
        other => {
            return Err(Error::Config(format!(
                "unsupported image extension {other:?}; use .svg or .png"
            )))
        }
    };
    fsutil::write_file_atomically(image, &bytes)?;
    Ok(ReportOutput {
        panels,
        rows,
        image_written: true,
    })
}

fn resolve_skills(a: &CorpusArtifacts, names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            a.vocab.id(n).ok_or_else(|| Error::UnknownSkill {
                name: n.clone(),
                near: a.vocab.near_matches(n),
            })
        })
        .collect()
}

fn extension(p: &Path) -> String {
    p.extension()
        .map(|e| e.to_string_lossy().to_lowercase())
        .unwrap_or_default()
}

/// Metric table as CSV. Values use shortest round-trip formatting, so
/// parsing them back gives the exact numbers.
pub fn table_csv(rows: &[TableRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let internal = |e: csv::Error| Error::Internal(format!("csv: {e}"));
    w.write_record(TABLE_HEADER).map_err(internal)?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.variant.clone(),
            m.accuracy.to_string(),
            m.weighted_f1.to_string(),
            m.auc.to_string(),
            m.joint_accuracy.to_string(),
        ])
        .map_err(internal)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

/// Maps series values into panel pixel coordinates.
struct Frame {
    x0: f64,
    y0: f64,
    steps: usize,
    top: f64,
}

impl Frame {
    fn new(index: usize, p: &SkillPanel) -> Self {
        let top = p
            .demand
            .iter()
            .chain(&p.supply)
            .copied()
            .fold(0.0, f64::max)
            .max(1e-12);
        Self {
            x0: 0.0,
            y0: index as f64 * PANEL_H as f64,
            steps: p.demand.len(),
            top,
        }
    }

    fn plot_w(&self) -> f64 {
        PANEL_W as f64 - 2.0 * MARGIN - 16.0
    }

    fn plot_h(&self) -> f64 {
        PANEL_H as f64 - 2.0 * MARGIN
    }

    fn point(&self, t: usize, v: f64) -> (f64, f64) {
        let span = (self.steps.max(2) - 1) as f64;
        (
            self.x0 + MARGIN + self.plot_w() * t as f64 / span,
            self.y0 + PANEL_H as f64 - MARGIN - self.plot_h() * v / self.top,
        )
    }

    /// Marker height for a class on the strip right of the plot.
    fn class_y(&self, class: usize, n_classes: usize) -> f64 {
        let frac = (class as f64 + 0.5) / n_classes as f64;
        self.y0 + PANEL_H as f64 - MARGIN - self.plot_h() * frac
    }

    fn strip_x(&self) -> f64 {
        self.x0 + MARGIN + self.plot_w() + 10.0
    }
}

fn rgb(c: [u8; 3]) -> String {
    format!("rgb({},{},{})", c[0], c[1], c[2])
}

pub fn render_svg(panels: &[SkillPanel], n_classes: usize) -> String {
    let h = PANEL_H * panels.len() as u32;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{h}" viewBox="0 0 {PANEL_W} {h}">"#
    );
    for (i, p) in panels.iter().enumerate() {
        let f = Frame::new(i, p);
        let _ = writeln!(s, r#"<g class="panel" data-skill="{}">"#, escape(&p.name));
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="white" stroke="gray"/>"#,
            f.x0 + 0.5,
            f.y0 + 0.5,
            PANEL_W - 1,
            PANEL_H - 1
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" font-family="sans-serif">{} (pred D{} S{}, true D{} S{})</text>"#,
            f.x0 + MARGIN,
            f.y0 + 16.0,
            escape(&p.name),
            p.predicted_demand,
            p.predicted_supply,
            p.true_demand,
            p.true_supply
        );
        for (series, color) in [(&p.demand, DEMAND_COLOR), (&p.supply, SUPPLY_COLOR)] {
            let pts: Vec<String> = series
                .iter()
                .enumerate()
                .map(|(t, &v)| {
                    let (x, y) = f.point(t, v);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                rgb(color),
                pts.join(" ")
            );
        }
        let x = f.strip_x();
        for (pred, truth, color) in [
            (p.predicted_demand, p.true_demand, DEMAND_COLOR),
            (p.predicted_supply, p.true_supply, SUPPLY_COLOR),
        ] {
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{:.2}" r="4" fill="{}"/>"#,
                f.class_y(pred, n_classes),
                rgb(color)
            );
            let _ = writeln!(
                s,
                r#"<circle cx="{x:.2}" cy="{:.2}" r="6" fill="none" stroke="{}"/>"#,
                f.class_y(truth, n_classes),
                rgb(color)
            );
        }
        s.push_str("</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_png(panels: &[SkillPanel], n_classes: usize) -> Result<Vec<u8>> {
    let mut img = RgbImage::from_pixel(PANEL_W, PANEL_H * panels.len() as u32, Rgb([255, 255, 255]));
    for (i, p) in panels.iter().enumerate() {
        let f = Frame::new(i, p);
        let (top, bottom) = (f.y0, f.y0 + PANEL_H as f64 - 1.0);
        let right = PANEL_W as f64 - 1.0;
        for (a, b) in [
            ((0.0, top), (right, top)),
            ((0.0, bottom), (right, bottom)),
            ((0.0, top), (0.0, bottom)),
            ((right, top), (right, bottom)),
        ] {
            line(&mut img, a, b, [160, 160, 160]);
        }
        for (series, color) in [(&p.demand, DEMAND_COLOR), (&p.supply, SUPPLY_COLOR)] {
            for t in 1..series.len() {
                line(&mut img, f.point(t - 1, series[t - 1]), f.point(t, series[t]), color);
            }
        }
        let x = f.strip_x();
        for (pred, truth, dx, color) in [
            (p.predicted_demand, p.true_demand, -4.0, DEMAND_COLOR),
            (p.predicted_supply, p.true_supply, 4.0, SUPPLY_COLOR),
        ] {
            dot(&mut img, (x + dx, f.class_y(pred, n_classes)), 3, color, true);
            dot(&mut img, (x + dx, f.class_y(truth, n_classes)), 5, color, false);
        }
    }
    let mut buf = Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| Error::Internal(format!("png encoding: {e}")))?;
    Ok(buf.into_inner())
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, Rgb(c));
    }
}

fn line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), c: [u8; 3]) {
    let n = (b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil().max(1.0) as usize;
    for i in 0..=n {
        let s = i as f64 / n as f64;
        let x = a.0 + (b.0 - a.0) * s;
        let y = a.1 + (b.1 - a.1) * s;
        put(img, x.round() as i64, y.round() as i64, c);
    }
}

fn dot(img: &mut RgbImage, center: (f64, f64), r: i64, c: [u8; 3], filled: bool) {
    let (cx, cy) = (center.0.round() as i64, center.1.round() as i64);
    for dy in -r..=r {
        for dx in -r..=r {
            let d2 = dx * dx + dy * dy;
            if d2 <= r * r && (filled || d2 >= (r - 1) * (r - 1)) {
                put(img, cx + dx, cy + dy, c);
            }
        }
    }
}
