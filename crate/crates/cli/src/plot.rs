//! Minimal line charts rendered to PNG. The CSV written next to each chart
//! is the canonical data; the image is a quick visual check.

use std::path::Path;

use noisemap::colorspace::RgbColor;
use noisemap::raster::Raster;
use noisemap::{Error, Result};

const WIDTH: usize = 480;
const HEIGHT: usize = 320;
const MARGIN: usize = 32;

fn line(r: &mut Raster, (x0, y0): (i64, i64), (x1, y1): (i64, i64), color: RgbColor) {
    // Bresenham
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if (0..r.width() as i64).contains(&x) && (0..r.height() as i64).contains(&y) {
            r.set(x as usize, y as usize, color);
        }
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

/// Draws `(x, y)` points as a polyline with square markers inside a framed
/// plot area. Axis ranges are the data ranges (padded when flat).
pub fn line_chart(points: &[(f64, f64)]) -> Result<Raster> {
    if points.is_empty() || points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidParameter("a chart needs at least one finite point".into()));
    }
    let range = |vals: Vec<f64>| {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 1.0, hi + 1.0)
        }
    };
    let (x_lo, x_hi) = range(points.iter().map(|p| p.0).collect());
    let (y_lo, y_hi) = range(points.iter().map(|p| p.1).collect());
    let (w, h) = ((WIDTH - 2 * MARGIN) as f64, (HEIGHT - 2 * MARGIN) as f64);
    let to_px = |(x, y): (f64, f64)| {
        let px = MARGIN as f64 + (x - x_lo) / (x_hi - x_lo) * w;
        let py = (HEIGHT - MARGIN) as f64 - (y - y_lo) / (y_hi - y_lo) * h;
        (px.round() as i64, py.round() as i64)
    };

    let mut r = Raster::new(WIDTH, HEIGHT, RgbColor::new(255, 255, 255));
    let axis = RgbColor::new(60, 60, 60);
    let (l, t, rt, b) = (MARGIN as i64, MARGIN as i64, (WIDTH - MARGIN) as i64, (HEIGHT - MARGIN) as i64);
    line(&mut r, (l, b), (rt, b), axis);
    line(&mut r, (l, t), (l, b), axis);
    let series = RgbColor::new(31, 119, 180);
    let px: Vec<(i64, i64)> = points.iter().map(|&p| to_px(p)).collect();
    for pair in px.windows(2) {
        line(&mut r, pair[0], pair[1], series);
    }
    for &(x, y) in &px {
        for dy in -2..=2 {
            line(&mut r, (x - 2, y + dy), (x + 2, y + dy), series);
        }
    }
    Ok(r)
}

pub fn save_line_chart(path: impl AsRef<Path>, points: &[(f64, f64)]) -> Result<()> {
    line_chart(points)?.save_png(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marks_the_data_points() {
        let r = line_chart(&[(0.0, 0.0), (1.0, 2.0), (2.0, 1.0)]).unwrap();
        let blue = RgbColor::new(31, 119, 180);
        assert_eq!(r.get(MARGIN, HEIGHT - MARGIN), blue);
        assert_eq!(r.get(WIDTH - MARGIN, (HEIGHT - MARGIN + MARGIN) / 2), blue);
        assert_eq!(r.get(5, 5), RgbColor::new(255, 255, 255));
    }

    #[test]
    fn flat_and_empty_series() {
        assert!(line_chart(&[(1.0, 5.0)]).is_ok());
        assert!(line_chart(&[]).is_err());
        assert!(line_chart(&[(0.0, f64::NAN)]).is_err());
    }
}
