//! Deterministic chart rendering for reports.
//!
//! Everything is drawn pixel by pixel into fixed-size RGB images with a
//! built-in 5x7 bitmap font, so identical inputs produce identical PNG bytes.
//! The numeric CSVs next to these images are authoritative; the images are a
//! convenience view.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};

const BG: Rgb<u8> = Rgb([255, 255, 255]);
const INK: Rgb<u8> = Rgb([30, 30, 30]);
const GRID: Rgb<u8> = Rgb([210, 210, 210]);

/// Series palette, applied in order and cycled.
const PALETTE: [Rgb<u8>; 6] = [
    Rgb([66, 103, 178]),
    Rgb([214, 93, 60]),
    Rgb([64, 145, 108]),
    Rgb([148, 103, 189]),
    Rgb([197, 158, 58]),
    Rgb([86, 180, 196]),
];

/// 5x7 glyphs, one byte per row, low 5 bits used. Covers uppercase letters,
/// digits, and the punctuation reports need; anything else renders blank.
fn glyph(c: char) -> [u8; 7] {
    match c.to_ascii_uppercase() {
        'A' => [0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        ',' => [0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08],
        '%' => [0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        '/' => [0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10],
        ':' => [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00],
        '(' => [0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02],
        ')' => [0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08],
        _ => [0; 7],
    }
}

const GLYPH_W: u32 = 6;
const GLYPH_H: u32 = 8;

struct Canvas {
    img: RgbImage,
}

impl Canvas {
    fn new(width: u32, height: u32) -> Canvas {
        Canvas {
            img: RgbImage::from_pixel(width, height, BG),
        }
    }

    fn width(&self) -> u32 {
        self.img.width()
    }

    fn height(&self) -> u32 {
        self.img.height()
    }

    fn set(&mut self, x: i64, y: i64, color: Rgb<u8>) {
        if x >= 0 && y >= 0 && (x as u32) < self.img.width() && (y as u32) < self.img.height() {
            self.img.put_pixel(x as u32, y as u32, color);
        }
    }

    fn fill_rect(&mut self, x: i64, y: i64, w: i64, h: i64, color: Rgb<u8>) {
        for yy in y..y + h {
            for xx in x..x + w {
                self.set(xx, yy, color);
            }
        }
    }

    fn rect_outline(&mut self, x: i64, y: i64, w: i64, h: i64, color: Rgb<u8>) {
        for xx in x..x + w {
            self.set(xx, y, color);
            self.set(xx, y + h - 1, color);
        }
        for yy in y..y + h {
            self.set(x, yy, color);
            self.set(x + w - 1, yy, color);
        }
    }

    fn line(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgb<u8>) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        loop {
            self.set(x, y, color);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    fn text(&mut self, x: i64, y: i64, s: &str, color: Rgb<u8>) {
        for (i, c) in s.chars().enumerate() {
            let rows = glyph(c);
            let gx = x + i as i64 * GLYPH_W as i64;
            for (ry, bits) in rows.iter().enumerate() {
                for cx in 0..5 {
                    if bits & (0x10 >> cx) != 0 {
                        self.set(gx + cx as i64, y + ry as i64, color);
                    }
                }
            }
        }
    }

    fn text_width(s: &str) -> i64 {
        s.chars().count() as i64 * GLYPH_W as i64
    }

    fn save(self, path: &Path) -> Result<()> {
        self.img.save(path).map_err(|source| Error::Encode {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn fmt_value(v: f64, axis_max: f64) -> String {
    if axis_max >= 20.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

/// A "nice" axis ceiling at or above `max`.
fn axis_ceiling(max: f64) -> f64 {
    if max <= 0.0 {
        return 1.0;
    }
    let magnitude = 10f64.powf(max.log10().floor());
    for mult in [1.0, 2.0, 2.5, 5.0, 10.0] {
        let candidate = magnitude * mult;
        if candidate >= max {
            return candidate;
        }
    }
    magnitude * 10.0
}

/// Vertical bar chart. `axis_max: None` picks a ceiling from the data;
/// percentages pass `Some(100.0)` for a stable axis.
pub fn bar_chart(
    path: &Path,
    title: &str,
    labels: &[String],
    values: &[f64],
    axis_max: Option<f64>,
    unit: &str,
) -> Result<()> {
    assert_eq!(labels.len(), values.len(), "one label per bar");
    assert!(!values.is_empty(), "bar chart needs at least one bar");
    let mut canvas = Canvas::new(640, 480);
    let (left, right, top, bottom) = (70i64, 20i64, 48i64, 64i64);
    let plot_w = canvas.width() as i64 - left - right;
    let plot_h = canvas.height() as i64 - top - bottom;
    let max = axis_max.unwrap_or_else(|| axis_ceiling(values.iter().cloned().fold(0.0, f64::max)));
    let max = if max > 0.0 { max } else { 1.0 };

    canvas.text(left, 16, title, INK);
    // Horizontal gridlines with tick labels.
    for tick in 0..=4 {
        let value = max * tick as f64 / 4.0;
        let y = top + plot_h - (plot_h * tick / 4);
        if tick > 0 {
            for x in (left..left + plot_w).step_by(2) {
                canvas.set(x, y, GRID);
            }
        }
        let label = format!("{}{unit}", fmt_value(value, max));
        canvas.text(left - Canvas::text_width(&label) - 6, y - 4, &label, INK);
    }
    // Axes.
    canvas.line(left, top, left, top + plot_h, INK);
    canvas.line(left, top + plot_h, left + plot_w, top + plot_h, INK);

    let n = values.len() as i64;
    let slot = plot_w / n;
    let bar_w = (slot * 3 / 5).max(4);
    for (i, (&value, label)) in values.iter().zip(labels).enumerate() {
        let clamped = value.clamp(0.0, max);
        let h = ((clamped / max) * plot_h as f64).round() as i64;
        let x = left + i as i64 * slot + (slot - bar_w) / 2;
        let y = top + plot_h - h;
        canvas.fill_rect(x, y, bar_w, h, PALETTE[i % PALETTE.len()]);
        canvas.rect_outline(x, y, bar_w, h.max(1), INK);
        let value_text = format!("{}{unit}", fmt_value(value, max));
        canvas.text(
            x + (bar_w - Canvas::text_width(&value_text)) / 2,
            y - 12,
            &value_text,
            INK,
        );
        let label_x = x + (bar_w - Canvas::text_width(label)) / 2;
        canvas.text(label_x, top + plot_h + GLYPH_H as i64, label, INK);
    }
    canvas.save(path)
}

/// Confusion-matrix heatmap: cell shading by count share, counts printed in
/// the cells, actual classes down the side, predicted across the top.
pub fn confusion_heatmap(
    path: &Path,
    title: &str,
    class_names: &[String],
    counts: &[Vec<u64>],
) -> Result<()> {
    let k = class_names.len();
    assert!(k > 0 && counts.len() == k, "square matrix with named axes");
    let mut canvas = Canvas::new(640, 560);
    let (left, top) = (110i64, 90i64);
    let cell = ((canvas.width() as i64 - left - 30) / k as i64)
        .min((canvas.height() as i64 - top - 30) / k as i64);
    let max = counts
        .iter()
        .flat_map(|row| row.iter())
        .cloned()
        .max()
        .unwrap_or(0)
        .max(1);

    canvas.text(left, 16, title, INK);
    canvas.text(left, 40, "PREDICTED", INK);
    canvas.text(8, top - 20, "ACTUAL", INK);
    for (j, name) in class_names.iter().enumerate() {
        let x = left + j as i64 * cell + 4;
        canvas.text(x, top - 14, &truncate(name, (cell / GLYPH_W as i64) as usize), INK);
    }
    for (i, row) in counts.iter().enumerate() {
        assert_eq!(row.len(), k, "square matrix");
        let y = top + i as i64 * cell;
        canvas.text(
            8,
            y + cell / 2 - 4,
            &truncate(&class_names[i], 16),
            INK,
        );
        for (j, &count) in row.iter().enumerate() {
            let x = left + j as i64 * cell;
            let intensity = count as f64 / max as f64;
            // White at zero toward the palette blue at the max.
            let blend = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * intensity) as u8;
            let color = Rgb([blend(255, 66), blend(255, 103), blend(255, 178)]);
            canvas.fill_rect(x, y, cell, cell, color);
            canvas.rect_outline(x, y, cell, cell, INK);
            let text = count.to_string();
            let ink = if intensity > 0.55 { BG } else { INK };
            canvas.text(
                x + (cell - Canvas::text_width(&text)) / 2,
                y + cell / 2 - 4,
                &text,
                ink,
            );
        }
    }
    canvas.save(path)
}

/// One-vs-rest ROC curves on a unit square with the chance diagonal.
/// `curves` holds (class name, points) pairs; points are (fpr, tpr).
pub fn roc_chart(path: &Path, title: &str, curves: &[(String, Vec<(f64, f64)>)]) -> Result<()> {
    let mut canvas = Canvas::new(560, 560);
    let (left, right, top, bottom) = (70i64, 30i64, 48i64, 70i64);
    let plot_w = canvas.width() as i64 - left - right;
    let plot_h = canvas.height() as i64 - top - bottom;
    let to_px = |fpr: f64, tpr: f64| -> (i64, i64) {
        (
            left + (fpr.clamp(0.0, 1.0) * plot_w as f64).round() as i64,
            top + plot_h - (tpr.clamp(0.0, 1.0) * plot_h as f64).round() as i64,
        )
    };

    canvas.text(left, 16, title, INK);
    canvas.rect_outline(left, top, plot_w + 1, plot_h + 1, INK);
    for tick in 0..=4 {
        let frac = tick as f64 / 4.0;
        let label = format!("{frac:.2}");
        let (x, y) = to_px(frac, frac);
        canvas.text(x - Canvas::text_width(&label) / 2, top + plot_h + GLYPH_H as i64, &label, INK);
        canvas.text(left - Canvas::text_width(&label) - 6, y - 4, &label, INK);
    }
    canvas.text(left + plot_w / 2 - 36, top + plot_h + 24, "FPR", INK);
    canvas.text(8, top - 16, "TPR", INK);
    // Chance diagonal, dotted.
    for i in (0..=plot_w.min(plot_h)).step_by(4) {
        canvas.set(left + i, top + plot_h - i, GRID);
    }

    for (c, (_, points)) in curves.iter().enumerate() {
        let color = PALETTE[c % PALETTE.len()];
        for pair in points.windows(2) {
            let (x0, y0) = to_px(pair[0].0, pair[0].1);
            let (x1, y1) = to_px(pair[1].0, pair[1].1);
            canvas.line(x0, y0, x1, y1, color);
        }
    }
    // Legend along the bottom.
    let mut x = left;
    let legend_y = canvas.height() as i64 - 18;
    for (c, (name, _)) in curves.iter().enumerate() {
        let color = PALETTE[c % PALETTE.len()];
        canvas.fill_rect(x, legend_y, 10, 8, color);
        let label = truncate(name, 18);
        canvas.text(x + 14, legend_y, &label, INK);
        x += 14 + Canvas::text_width(&label) + 16;
    }
    canvas.save(path)
}

fn truncate(s: &str, max_chars: usize) -> String {
    s.chars().take(max_chars.max(1)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_render_identically_for_identical_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.png");
        let b = dir.path().join("b.png");
        let labels = vec!["RF".to_string(), "SVM".to_string(), "LR".to_string()];
        let values = vec![94.95, 97.67, 97.57];
        bar_chart(&a, "ACCURACY", &labels, &values, Some(100.0), "%").unwrap();
        bar_chart(&b, "ACCURACY", &labels, &values, Some(100.0), "%").unwrap();
        let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert!(!ba.is_empty());
        assert_eq!(ba, bb);
    }

    #[test]
    fn heatmap_and_roc_render() {
        let dir = tempfile::tempdir().unwrap();
        let names = vec!["benign".to_string(), "malignant".to_string()];
        confusion_heatmap(
            &dir.path().join("cm.png"),
            "CONFUSION",
            &names,
            &[vec![48, 2], vec![1, 49]],
        )
        .unwrap();
        roc_chart(
            &dir.path().join("roc.png"),
            "ROC",
            &[
                ("benign".to_string(), vec![(0.0, 0.0), (0.1, 0.9), (1.0, 1.0)]),
                ("malignant".to_string(), vec![(0.0, 0.0), (0.2, 0.8), (1.0, 1.0)]),
            ],
        )
        .unwrap();
        assert!(dir.path().join("cm.png").exists());
        assert!(dir.path().join("roc.png").exists());
    }

    #[test]
    fn axis_ceiling_is_tight_and_above() {
        for &(max, expect) in &[(0.8, 1.0), (1.0, 1.0), (3.0, 5.0), (87.0, 100.0), (0.04, 0.05)] {
            let got = axis_ceiling(max);
            assert!(
                got >= max && (got - expect).abs() < 1e-9,
                "ceiling({max}) = {got}, expected {expect}"
            );
        }
    }
}
