//! sRGB → CIELAB conversion and the CIEDE2000 color difference.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::legend::LegendBand;

/// Default ΔE2000 threshold under which a pixel matches a legend color.
pub const DEFAULT_THRESHOLD: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RgbColor {
    pub red: u8,
    pub green: u8,
    pub blue: u8,
}

impl RgbColor {
    pub const fn new(red: u8, green: u8, blue: u8) -> Self {
        Self { red, green, blue }
    }

    pub fn channels(self) -> [u8; 3] {
        [self.red, self.green, self.blue]
    }
}

impl From<[u8; 3]> for RgbColor {
    fn from([red, green, blue]: [u8; 3]) -> Self {
        Self { red, green, blue }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabColor {
    pub lightness: f64,
    pub a: f64,
    pub b: f64,
}

impl LabColor {
    pub const fn new(lightness: f64, a: f64, b: f64) -> Self {
        Self { lightness, a, b }
    }
}

// sRGB (linear) → XYZ, D65.
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];
const D65_WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83];
const LAB_EPSILON: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

fn decode_gamma(channel: u8) -> f64 {
    let c = f64::from(channel) / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        t.cbrt()
    } else {
        (LAB_KAPPA * t + 16.0) / 116.0
    }
}

pub fn rgb_to_lab(color: RgbColor) -> LabColor {
    let linear = [
        decode_gamma(color.red),
        decode_gamma(color.green),
        decode_gamma(color.blue),
    ];
    let mut xyz = [0.0; 3];
    for (out, row) in xyz.iter_mut().zip(SRGB_TO_XYZ.iter()) {
        *out = row.iter().zip(linear.iter()).map(|(m, v)| m * v).sum();
    }
    let fx = lab_f(xyz[0] / D65_WHITE[0]);
    let fy = lab_f(xyz[1] / D65_WHITE[1]);
    let fz = lab_f(xyz[2] / D65_WHITE[2]);
    LabColor {
        lightness: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

/// Hue angle in degrees in `[0, 360)`; zero for the achromatic axis.
fn hue_degrees(b: f64, a_prime: f64) -> f64 {
    if a_prime == 0.0 && b == 0.0 {
        return 0.0;
    }
    let h = b.atan2(a_prime).to_degrees();
    if h < 0.0 {
        h + 360.0
    } else {
        h
    }
}

/// CIEDE2000 color difference with unit weighting factors (kL = kC = kH = 1).
pub fn delta_e_2000(c1: LabColor, c2: LabColor) -> f64 {
    const POW25_7: f64 = 6_103_515_625.0; // 25^7

    let chroma1 = c1.a.hypot(c1.b);
    let chroma2 = c2.a.hypot(c2.b);
    let mean_chroma = (chroma1 + chroma2) / 2.0;
    let mc7 = mean_chroma.powi(7);
    let g = 0.5 * (1.0 - (mc7 / (mc7 + POW25_7)).sqrt());

    let a1p = (1.0 + g) * c1.a;
    let a2p = (1.0 + g) * c2.a;
    let c1p = a1p.hypot(c1.b);
    let c2p = a2p.hypot(c2.b);
    let h1p = hue_degrees(c1.b, a1p);
    let h2p = hue_degrees(c2.b, a2p);

    let delta_l = c2.lightness - c1.lightness;
    let delta_c = c2p - c1p;
    let chroma_product = c1p * c2p;
    let delta_h_angle = if chroma_product == 0.0 {
        0.0
    } else {
        let d = h2p - h1p;
        if d > 180.0 {
            d - 360.0
        } else if d < -180.0 {
            d + 360.0
        } else {
            d
        }
    };
    let delta_h = 2.0 * chroma_product.sqrt() * (delta_h_angle.to_radians() / 2.0).sin();

    let mean_l = (c1.lightness + c2.lightness) / 2.0;
    let mean_cp = (c1p + c2p) / 2.0;
    let mean_hp = if chroma_product == 0.0 {
        h1p + h2p
    } else if (h1p - h2p).abs() <= 180.0 {
        (h1p + h2p) / 2.0
    } else if h1p + h2p < 360.0 {
        (h1p + h2p + 360.0) / 2.0
    } else {
        (h1p + h2p - 360.0) / 2.0
    };

    let t = 1.0 - 0.17 * (mean_hp - 30.0).to_radians().cos()
        + 0.24 * (2.0 * mean_hp).to_radians().cos()
        + 0.32 * (3.0 * mean_hp + 6.0).to_radians().cos()
        - 0.20 * (4.0 * mean_hp - 63.0).to_radians().cos();
    let delta_theta = 30.0 * (-((mean_hp - 275.0) / 25.0).powi(2)).exp();
    let mcp7 = mean_cp.powi(7);
    let r_c = 2.0 * (mcp7 / (mcp7 + POW25_7)).sqrt();
    let l50 = (mean_l - 50.0).powi(2);
    let s_l = 1.0 + 0.015 * l50 / (20.0 + l50).sqrt();
    let s_c = 1.0 + 0.045 * mean_cp;
    let s_h = 1.0 + 0.015 * mean_cp * t;
    let r_t = -(2.0 * delta_theta).to_radians().sin() * r_c;

    let tl = delta_l / s_l;
    let tc = delta_c / s_c;
    let th = delta_h / s_h;
    (tl * tl + tc * tc + th * th + r_t * tc * th).max(0.0).sqrt()
}

/// Index of the palette band closest to `pixel` under ΔE2000, provided the
/// distance is below `threshold`. Equidistant bands resolve to the lower
/// decibel range.
pub fn classify_lab(pixel: LabColor, band_labs: &[(f64, LabColor)], threshold: f64) -> Option<usize> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (idx, &(low_db, lab)) in band_labs.iter().enumerate() {
        let de = delta_e_2000(pixel, lab);
        let better = match best {
            None => true,
            Some((_, best_de, best_low)) => de < best_de || (de == best_de && low_db < best_low),
        };
        if better {
            best = Some((idx, de, low_db));
        }
    }
    best.filter(|&(_, de, _)| de < threshold).map(|(idx, _, _)| idx)
}

pub fn classify_color<'a>(
    pixel: RgbColor,
    palette: &'a [LegendBand],
    threshold: f64,
) -> Result<Option<&'a LegendBand>> {
    if palette.is_empty() {
        return Err(Error::Config("palette has no bands".into()));
    }
    if !(threshold > 0.0) {
        return Err(Error::Config(format!("threshold must be positive, got {threshold}")));
    }
    let labs: Vec<(f64, LabColor)> = palette
        .iter()
        .map(|band| (band.low_db, rgb_to_lab(band.color)))
        .collect();
    Ok(classify_lab(rgb_to_lab(pixel), &labs, threshold).map(|idx| &palette[idx]))
}
