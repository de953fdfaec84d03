//! Line plots rendered straight to PNG.
//!
//! Axis ticks use a built-in 3×5 numeric font. The legend shows one color
//! swatch per series with its 1-based index; labels live in the CSV written
//! next to every plot.

use image::{Rgb, RgbImage};

/// One named polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [[u8; 3]; 10] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
    [188, 189, 34],
    [23, 190, 207],
];

pub fn series_color(i: usize) -> [u8; 3] {
    PALETTE[i % PALETTE.len()]
}

const SCALE: u32 = 2;
const GLYPH_W: u32 = 3;

/// Rows of a 3×5 glyph, three low bits per row, most significant bit leftmost.
fn glyph(c: char) -> Option<[u8; 5]> {
    Some(match c {
        '0' => [0b111, 0b101, 0b101, 0b101, 0b111],
        '1' => [0b010, 0b110, 0b010, 0b010, 0b111],
        '2' => [0b111, 0b001, 0b111, 0b100, 0b111],
        '3' => [0b111, 0b001, 0b111, 0b001, 0b111],
        '4' => [0b101, 0b101, 0b111, 0b001, 0b001],
        '5' => [0b111, 0b100, 0b111, 0b001, 0b111],
        '6' => [0b111, 0b100, 0b111, 0b101, 0b111],
        '7' => [0b111, 0b001, 0b010, 0b010, 0b010],
        '8' => [0b111, 0b101, 0b111, 0b101, 0b111],
        '9' => [0b111, 0b101, 0b111, 0b001, 0b111],
        '.' => [0b000, 0b000, 0b000, 0b000, 0b010],
        '-' => [0b000, 0b000, 0b111, 0b000, 0b000],
        'e' => [0b000, 0b111, 0b111, 0b100, 0b111],
        'k' => [0b100, 0b101, 0b110, 0b101, 0b101],
        ' ' => [0; 5],
        _ => return None,
    })
}

pub fn text_width(s: &str) -> u32 {
    s.chars().count() as u32 * (GLYPH_W + 1) * SCALE
}

/// Draws `s` with its top-left corner at `(x, y)`; unknown characters are skipped.
pub fn draw_text(img: &mut RgbImage, x: i64, y: i64, s: &str, color: [u8; 3]) {
    for (i, c) in s.chars().enumerate() {
        let Some(rows) = glyph(c) else { continue };
        let x0 = x + (i as u32 * (GLYPH_W + 1) * SCALE) as i64;
        for (r, bits) in rows.iter().enumerate() {
            for col in 0..GLYPH_W {
                if bits >> (GLYPH_W - 1 - col) & 1 == 1 {
                    fill_rect(img, x0 + (col * SCALE) as i64, y + (r as u32 * SCALE) as i64, SCALE, SCALE, color);
                }
            }
        }
    }
}

fn put(img: &mut RgbImage, x: i64, y: i64, color: [u8; 3]) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, Rgb(color));
    }
}

fn fill_rect(img: &mut RgbImage, x: i64, y: i64, w: u32, h: u32, color: [u8; 3]) {
    for dy in 0..h as i64 {
        for dx in 0..w as i64 {
            put(img, x + dx, y + dy, color);
        }
    }
}

/// Bresenham line, thickened to two pixels.
fn line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), color: [u8; 3]) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        put(img, x, y, color);
        put(img, x, y + 1, color);
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

/// Compact tick label drawable with the built-in font.
pub fn format_tick(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if a >= 10_000.0 && (v / 1000.0).fract() == 0.0 {
        format!("{}k", v / 1000.0)
    } else if !(1e-2..10_000.0).contains(&a) {
        format!("{v:.1e}")
    } else if a >= 100.0 || v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Renders the series on shared axes. Non-finite points are dropped.
pub fn line_plot(series: &[Series], width: u32, height: u32) -> RgbImage {
    let mut img = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let (left, right, top, bottom) = (70i64, 60i64, 12i64, 30i64);
    let (pw, ph) = ((width as i64 - left - right).max(1), (height as i64 - top - bottom).max(1));
    let pts = || series.iter().flat_map(|s| s.points.iter().copied());
    let (x_lo, x_hi) = range(pts().map(|p| p.0));
    let (y_lo, y_hi) = range(pts().map(|p| p.1));
    let to_px = |(x, y): (f64, f64)| {
        let px = left + ((x - x_lo) / (x_hi - x_lo) * pw as f64).round() as i64;
        let py = top + ph - ((y - y_lo) / (y_hi - y_lo) * ph as f64).round() as i64;
        (px, py)
    };

    let grid = [225, 225, 225];
    let ink = [40, 40, 40];
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let gy = top + ph - (f * ph as f64).round() as i64;
        let gx = left + (f * pw as f64).round() as i64;
        line(&mut img, (left, gy), (left + pw, gy), grid);
        line(&mut img, (gx, top), (gx, top + ph), grid);
        let yl = format_tick(y_lo + f * (y_hi - y_lo));
        draw_text(&mut img, left - 6 - text_width(&yl) as i64, gy - 5, &yl, ink);
        let xl = format_tick(x_lo + f * (x_hi - x_lo));
        draw_text(&mut img, gx - text_width(&xl) as i64 / 2, top + ph + 8, &xl, ink);
    }
    line(&mut img, (left, top), (left, top + ph), ink);
    line(&mut img, (left, top + ph), (left + pw, top + ph), ink);

    for (i, s) in series.iter().enumerate() {
        let color = series_color(i);
        let finite: Vec<(i64, i64)> =
            s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()).map(|&p| to_px(p)).collect();
        match finite.as_slice() {
            [] => {}
            [p] => fill_rect(&mut img, p.0 - 2, p.1 - 2, 5, 5, color),
            many => many.windows(2).for_each(|w| line(&mut img, w[0], w[1], color)),
        }
        let ly = top + 4 + i as i64 * 16;
        let lx = left + pw + 10;
        fill_rect(&mut img, lx, ly, 14, 10, color);
        draw_text(&mut img, lx + 18, ly, &(i + 1).to_string(), ink);
    }
    img
}

/// Grayscale image of a row-major `size × size` map with values in `[0, 1]`.
pub fn heat_image(heat: &[f64], size: usize) -> RgbImage {
    RgbImage::from_fn(size as u32, size as u32, |x, y| {
        let v = (heat[y as usize * size + x as usize].clamp(0.0, 1.0) * 255.0).round() as u8;
        Rgb([v, v, v])
    })
}
