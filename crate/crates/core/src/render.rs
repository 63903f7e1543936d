//! Grayscale rasterization of panels and preview sheets.
//!
//! Shapes are filled with an integer scanline rule (pixel centers inside the
//! outline), without anti-aliasing, so output bytes depend only on the input.

use std::f64::consts::PI;
use std::io::Cursor;

use crate::error::{RavenError, Result};
use crate::forge::Problem;
use crate::grammar::{Entity, PanelState, Rect, ANGLE_VALUES, COLOR_VALUES, SIZE_VALUES};

pub const PANEL_SIZE: u32 = 160;
pub const BACKGROUND: u8 = 255;
const INK: u8 = 0;
const STROKE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelImage {
    pub width: u32,
    pub height: u32,
    /// Row-major 8-bit intensities.
    pub pixels: Vec<u8>,
}

impl PanelImage {
    pub fn blank(width: u32, height: u32) -> Self {
        PanelImage {
            width,
            height,
            pixels: vec![BACKGROUND; (width * height) as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y * self.width + x) as usize]
    }

    fn set(&mut self, x: u32, y: u32, value: u8) {
        let i = (y * self.width + x) as usize;
        self.pixels[i] = value;
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().filter(|p| **p != BACKGROUND).count()
    }

    /// Copies `other` with its top-left corner at (`x`, `y`).
    pub fn blit(&mut self, other: &PanelImage, x: u32, y: u32) {
        for row in 0..other.height {
            let src = (row * other.width) as usize;
            let dst = ((y + row) * self.width + x) as usize;
            self.pixels[dst..dst + other.width as usize]
                .copy_from_slice(&other.pixels[src..src + other.width as usize]);
        }
    }

    pub fn crop(&self, x: u32, y: u32, width: u32, height: u32) -> PanelImage {
        let mut out = PanelImage::blank(width, height);
        for row in 0..height {
            let src = ((y + row) * self.width + x) as usize;
            let dst = (row * width) as usize;
            out.pixels[dst..dst + width as usize].copy_from_slice(&self.pixels[src..src + width as usize]);
        }
        out
    }

    /// 8-bit grayscale, non-interlaced PNG.
    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        {
            let mut encoder = png::Encoder::new(&mut out, self.width, self.height);
            encoder.set_color(png::ColorType::Grayscale);
            encoder.set_depth(png::BitDepth::Eight);
            let mut writer = encoder.write_header().map_err(|e| RavenError::Png(e.to_string()))?;
            writer
                .write_image_data(&self.pixels)
                .map_err(|e| RavenError::Png(e.to_string()))?;
        }
        Ok(out)
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self> {
        let png_err = |e: png::DecodingError| RavenError::Png(e.to_string());
        let mut reader = png::Decoder::new(Cursor::new(bytes)).read_info().map_err(png_err)?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| RavenError::Png("image too large".into()))?;
        let mut buf = vec![0; size];
        let info = reader.next_frame(&mut buf).map_err(png_err)?;
        if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
            return Err(RavenError::Png("expected 8-bit grayscale".into()));
        }
        buf.truncate(info.buffer_size());
        Ok(PanelImage {
            width: info.width,
            height: info.height,
            pixels: buf,
        })
    }

    fn fill_rect(&mut self, x: i64, y: i64, w: i64, h: i64, value: u8) {
        for yy in y.max(0)..(y + h).min(self.height as i64) {
            for xx in x.max(0)..(x + w).min(self.width as i64) {
                self.set(xx as u32, yy as u32, value);
            }
        }
    }

    fn outline_rect(&mut self, x: i64, y: i64, w: i64, h: i64, value: u8) {
        self.fill_rect(x, y, w, 1, value);
        self.fill_rect(x, y + h - 1, w, 1, value);
        self.fill_rect(x, y, 1, h, value);
        self.fill_rect(x + w - 1, y, 1, h, value);
    }

    /// Even-odd scanline fill sampling pixel centers.
    fn fill_polygon(&mut self, points: &[(f64, f64)], value: u8) {
        let ymin = points
            .iter()
            .map(|p| p.1)
            .fold(f64::INFINITY, f64::min)
            .floor()
            .max(0.0) as u32;
        let ymax = points
            .iter()
            .map(|p| p.1)
            .fold(f64::NEG_INFINITY, f64::max)
            .ceil()
            .min(self.height as f64) as u32;
        let mut crossings = Vec::with_capacity(points.len());
        for y in ymin..ymax {
            let yc = y as f64 + 0.5;
            crossings.clear();
            for (i, a) in points.iter().enumerate() {
                let b = points[(i + 1) % points.len()];
                if (a.1 <= yc && b.1 > yc) || (b.1 <= yc && a.1 > yc) {
                    crossings.push(a.0 + (yc - a.1) * (b.0 - a.0) / (b.1 - a.1));
                }
            }
            crossings.sort_by(f64::total_cmp);
            for span in crossings.chunks_exact(2) {
                let start = (span[0] - 0.5).ceil().max(0.0) as i64;
                let end = ((span[1] - 0.5).ceil() as i64).min(self.width as i64);
                for x in start..end {
                    self.set(x as u32, y, value);
                }
            }
        }
    }

    fn fill_disc(&mut self, cx: f64, cy: f64, r: f64, value: u8) {
        let y0 = (cy - r).floor().max(0.0) as u32;
        let y1 = ((cy + r).ceil() as u32).min(self.height);
        let x0 = (cx - r).floor().max(0.0) as u32;
        let x1 = ((cx + r).ceil() as u32).min(self.width);
        for y in y0..y1 {
            for x in x0..x1 {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                if dx * dx + dy * dy < r * r {
                    self.set(x, y, value);
                }
            }
        }
    }
}

fn regular_polygon(sides: usize, cx: f64, cy: f64, radius: f64, rotation: f64) -> Vec<(f64, f64)> {
    // Even-sided shapes start half a step round so an edge sits on top.
    let base = -PI / 2.0
        + if sides.is_multiple_of(2) {
            PI / sides as f64
        } else {
            0.0
        };
    (0..sides)
        .map(|k| {
            let a = base + rotation + 2.0 * PI * k as f64 / sides as f64;
            (cx + radius * a.cos(), cy + radius * a.sin())
        })
        .collect()
}

/// Pixel rectangle of a normalized cell in a panel of the given size.
pub fn cell_pixels(cell: &Rect, size: u32) -> Rect {
    let s = size as f64;
    Rect::new(cell.x * s, cell.y * s, cell.w * s, cell.h * s)
}

/// Draws one entity centered in its cell: black outline, fill by color.
pub fn draw_entity(image: &mut PanelImage, cell: &Rect, entity: &Entity) {
    let px = cell_pixels(cell, image.width);
    let (cx, cy) = px.center();
    let radius = SIZE_VALUES[entity.size_idx as usize] * px.w.min(px.h) / 2.0;
    let fill = COLOR_VALUES[entity.color_idx as usize];
    let rotation = (ANGLE_VALUES[entity.angle_idx as usize] as f64).to_radians();
    match entity.type_idx {
        4 => {
            image.fill_disc(cx, cy, radius, INK);
            image.fill_disc(cx, cy, radius - STROKE, fill);
        }
        t => {
            let sides = t as usize + 3;
            let inset = STROKE / (PI / sides as f64).cos();
            image.fill_polygon(&regular_polygon(sides, cx, cy, radius, rotation), INK);
            image.fill_polygon(&regular_polygon(sides, cx, cy, radius - inset, rotation), fill);
        }
    }
}

/// Rasterizes a panel at the default resolution.
pub fn render_panel(panel: &PanelState) -> PanelImage {
    render_panel_sized(panel, PANEL_SIZE)
}

pub fn render_panel_sized(panel: &PanelState, size: u32) -> PanelImage {
    let mut image = PanelImage::blank(size, size);
    // Components are drawn in order, so inside components land on top.
    for (spec, comp) in panel.config.components().iter().zip(&panel.components) {
        for entity in &comp.entities {
            draw_entity(&mut image, &spec.slots[entity.slot as usize], entity);
        }
    }
    image
}

const GLYPH_W: i64 = 5;
const GLYPH_H: i64 = 7;

fn glyph(ch: char) -> [u8; 7] {
    match ch {
        '1' => [0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e],
        '2' => [0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f],
        '3' => [0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e],
        '4' => [0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02],
        '5' => [0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e],
        '6' => [0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e],
        '7' => [0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e],
        '?' => [0x0e, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04],
        _ => [0; 7],
    }
}

fn draw_glyph(image: &mut PanelImage, ch: char, x: i64, y: i64, scale: i64) {
    for (row, bits) in glyph(ch).iter().enumerate() {
        for col in 0..GLYPH_W {
            if bits & (1 << (GLYPH_W - 1 - col)) != 0 {
                image.fill_rect(x + col * scale, y + row as i64 * scale, scale, scale, INK);
            }
        }
    }
}

/// Placement of the sixteen panels (and the question cell) on a sheet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SheetLayout {
    pub panel: u32,
    pub gap: u32,
    pub margin: u32,
    pub label: u32,
}

impl Default for SheetLayout {
    fn default() -> Self {
        SheetLayout {
            panel: PANEL_SIZE,
            gap: 6,
            margin: 12,
            label: 24,
        }
    }
}

impl SheetLayout {
    pub fn width(&self) -> u32 {
        2 * self.margin + 4 * self.panel + 3 * self.gap
    }

    fn strip_top(&self) -> u32 {
        self.margin + 3 * self.panel + 2 * self.gap + 2 * self.margin
    }

    pub fn height(&self) -> u32 {
        self.strip_top() + 2 * (self.panel + self.label) + self.gap + self.margin
    }

    /// Top-left of matrix cell `i` (row-major; 8 is the question cell).
    pub fn matrix_origin(&self, i: usize) -> (u32, u32) {
        let left = (self.width() - (3 * self.panel + 2 * self.gap)) / 2;
        let (row, col) = ((i / 3) as u32, (i % 3) as u32);
        (
            left + col * (self.panel + self.gap),
            self.margin + row * (self.panel + self.gap),
        )
    }

    /// Top-left of candidate `k` in the 2×4 strip.
    pub fn candidate_origin(&self, k: usize) -> (u32, u32) {
        let (row, col) = ((k / 4) as u32, (k % 4) as u32);
        (
            self.margin + col * (self.panel + self.gap),
            self.strip_top() + row * (self.panel + self.label + self.gap),
        )
    }
}

/// Matrix above a labelled 2×4 candidate strip, with `?` in the last cell.
pub fn render_sheet(problem: &Problem) -> PanelImage {
    let layout = SheetLayout::default();
    let mut sheet = PanelImage::blank(layout.width(), layout.height());
    let p = layout.panel as i64;
    let frame = |sheet: &mut PanelImage, (x, y): (u32, u32)| {
        sheet.outline_rect(x as i64 - 1, y as i64 - 1, p + 2, p + 2, INK);
    };
    for (i, panel) in problem.context.iter().enumerate() {
        let origin = layout.matrix_origin(i);
        sheet.blit(&render_panel(panel), origin.0, origin.1);
        frame(&mut sheet, origin);
    }
    let question = layout.matrix_origin(8);
    frame(&mut sheet, question);
    let scale = 8;
    draw_glyph(
        &mut sheet,
        '?',
        question.0 as i64 + (p - GLYPH_W * scale) / 2,
        question.1 as i64 + (p - GLYPH_H * scale) / 2,
        scale,
    );
    for (k, panel) in problem.candidates.iter().enumerate() {
        let origin = layout.candidate_origin(k);
        sheet.blit(&render_panel(panel), origin.0, origin.1);
        frame(&mut sheet, origin);
        let label = char::from_digit(k as u32 + 1, 10).unwrap_or('?');
        draw_glyph(
            &mut sheet,
            label,
            origin.0 as i64 + (p - GLYPH_W * 2) / 2,
            origin.1 as i64 + p + (layout.label as i64 - GLYPH_H * 2) / 2,
            2,
        );
    }
    sheet
}
