//! Pixel → geographic affine georeferencing from ground control points.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Condition number of the normal matrix above which a warning is logged.
pub const CONDITION_WARNING: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundControlPoint {
    pub pixel_x: f64,
    pub pixel_y: f64,
    pub longitude: f64,
    pub latitude: f64,
}

impl GroundControlPoint {
    pub fn new(pixel_x: f64, pixel_y: f64, longitude: f64, latitude: f64) -> Self {
        Self { pixel_x, pixel_y, longitude, latitude }
    }

    pub fn validate(&self) -> Result<()> {
        if !(-180.0..=180.0).contains(&self.longitude) || !(-90.0..=90.0).contains(&self.latitude) {
            return Err(Error::InvalidRecord(format!(
                "control point ({}, {}) has out-of-range coordinates",
                self.longitude, self.latitude
            )));
        }
        if !(self.pixel_x >= 0.0 && self.pixel_y >= 0.0) {
            return Err(Error::InvalidRecord(format!(
                "control point pixel ({}, {}) is negative",
                self.pixel_x, self.pixel_y
            )));
        }
        Ok(())
    }
}

/// `longitude = a·x + b·y + c`, `latitude = d·x + e·y + f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl AffineTransform {
    pub const IDENTITY: Self = Self { a: 1.0, b: 0.0, c: 0.0, d: 0.0, e: 1.0, f: 0.0 };

    pub fn determinant(&self) -> f64 {
        self.a * self.e - self.b * self.d
    }

    pub fn validate(&self) -> Result<()> {
        let coeffs = [self.a, self.b, self.c, self.d, self.e, self.f];
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateGeometry("transform has non-finite coefficients".into()));
        }
        if self.determinant() == 0.0 {
            return Err(Error::DegenerateGeometry("transform has a singular linear part".into()));
        }
        Ok(())
    }

    pub fn coefficients(&self) -> [f64; 6] {
        [self.a, self.b, self.c, self.d, self.e, self.f]
    }

    pub fn to_json_file(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path, serde_json::to_string_pretty(self)?.as_bytes())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let t: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        t.validate()?;
        Ok(t)
    }
}

/// Returns `(longitude, latitude)`.
pub fn pixel_to_geo(t: &AffineTransform, x: f64, y: f64) -> (f64, f64) {
    (t.a * x + t.b * y + t.c, t.d * x + t.e * y + t.f)
}

/// Solves a 3×3 system by Gaussian elimination with partial pivoting.
fn solve3(mut m: [[f64; 3]; 3], mut rhs: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col] == 0.0 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..3 {
            let factor = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - tail) / m[row][row];
    }
    Some(x)
}

fn inverse3(m: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let mut inv = [[0.0; 3]; 3];
    for col in 0..3 {
        let mut e = [0.0; 3];
        e[col] = 1.0;
        let x = solve3(m, e)?;
        for row in 0..3 {
            inv[row][col] = x[row];
        }
    }
    Some(inv)
}

fn norm1(m: &[[f64; 3]; 3]) -> f64 {
    (0..3).map(|c| (0..3).map(|r| m[r][c].abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Least-squares affine fit. Pixel coordinates are centered and scaled
/// before the normal equations are formed; the reported coefficients are in
/// the original pixel frame.
pub fn fit_affine(gcps: &[GroundControlPoint]) -> Result<AffineTransform> {
    if gcps.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "affine fit needs at least 3 control points, got {}",
            gcps.len()
        )));
    }
    for g in gcps {
        g.validate()?;
    }
    let n = gcps.len() as f64;
    let mean_x = gcps.iter().map(|g| g.pixel_x).sum::<f64>() / n;
    let mean_y = gcps.iter().map(|g| g.pixel_y).sum::<f64>() / n;
    let scale_x = (gcps.iter().map(|g| (g.pixel_x - mean_x).powi(2)).sum::<f64>() / n).sqrt();
    let scale_y = (gcps.iter().map(|g| (g.pixel_y - mean_y).powi(2)).sum::<f64>() / n).sqrt();
    if scale_x == 0.0 || scale_y == 0.0 {
        return Err(Error::DegenerateGeometry("control points are collinear in pixel space".into()));
    }

    let rows: Vec<[f64; 3]> = gcps
        .iter()
        .map(|g| [(g.pixel_x - mean_x) / scale_x, (g.pixel_y - mean_y) / scale_y, 1.0])
        .collect();
    let mut normal = [[0.0; 3]; 3];
    let mut rhs_lon = [0.0; 3];
    let mut rhs_lat = [0.0; 3];
    for (row, g) in rows.iter().zip(gcps) {
        for i in 0..3 {
            for j in 0..3 {
                normal[i][j] += row[i] * row[j];
            }
            rhs_lon[i] += row[i] * g.longitude;
            rhs_lat[i] += row[i] * g.latitude;
        }
    }
    // Uncorrelated-ness of the scaled columns: 1 - ρ² ≈ 0 means collinear.
    let rho = normal[0][1] / n;
    if 1.0 - rho * rho < 1e-12 {
        return Err(Error::DegenerateGeometry("control points are collinear in pixel space".into()));
    }
    if let Some(inv) = inverse3(normal) {
        let cond = norm1(&normal) * norm1(&inv);
        if cond > CONDITION_WARNING {
            log::warn!("georeference normal matrix is ill-conditioned (condition number {cond:.3e})");
        }
    }
    let singular = || Error::DegenerateGeometry("normal equations are singular".into());
    let lon = solve3(normal, rhs_lon).ok_or_else(singular)?;
    let lat = solve3(normal, rhs_lat).ok_or_else(singular)?;

    let a = lon[0] / scale_x;
    let b = lon[1] / scale_y;
    let d = lat[0] / scale_x;
    let e = lat[1] / scale_y;
    let t = AffineTransform {
        a,
        b,
        c: lon[2] - a * mean_x - b * mean_y,
        d,
        e,
        f: lat[2] - d * mean_x - e * mean_y,
    };
    t.validate()?;
    Ok(t)
}

/// Root-mean-square of the Euclidean residuals, in degrees.
pub fn residual_rmse(t: &AffineTransform, gcps: &[GroundControlPoint]) -> Result<f64> {
    if gcps.is_empty() {
        return Err(Error::InsufficientData("residual needs at least one control point".into()));
    }
    let sum: f64 = gcps
        .iter()
        .map(|g| {
            let (lon, lat) = pixel_to_geo(t, g.pixel_x, g.pixel_y);
            (lon - g.longitude).powi(2) + (lat - g.latitude).powi(2)
        })
        .sum();
    Ok((sum / gcps.len() as f64).sqrt())
}

/// Reads a `pixel_x,pixel_y,longitude,latitude` control point file.
pub fn read_gcp_file(path: impl AsRef<Path>) -> Result<Vec<GroundControlPoint>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let expected = ["pixel_x", "pixel_y", "longitude", "latitude"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Schema(format!(
            "control point header must be {}, found {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let g: GroundControlPoint = row?;
        g.validate()?;
        out.push(g);
    }
    Ok(out)
}

pub fn write_gcp_file(path: impl AsRef<Path>, gcps: &[GroundControlPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for g in gcps {
        w.serialize(g)?;
    }
    crate::io::write_atomic(path, &crate::io::finish_csv(w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gcp(x: f64, y: f64, lon: f64, lat: f64) -> GroundControlPoint {
        GroundControlPoint::new(x, y, lon, lat)
    }

    #[test]
    fn identity_fit() {
        let t = fit_affine(&[gcp(0., 0., 0., 0.), gcp(1., 0., 1., 0.), gcp(0., 1., 0., 1.)]).unwrap();
        for (got, want) in t.coefficients().iter().zip(AffineTransform::IDENTITY.coefficients()) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn axis_aligned_fit() {
        let pts = [
            gcp(0., 0., 22.90, 40.60),
            gcp(100., 0., 22.91, 40.60),
            gcp(0., 100., 22.90, 40.59),
        ];
        let t = fit_affine(&pts).unwrap();
        assert!((t.a - 1e-4).abs() < 1e-12);
        assert!((t.e + 1e-4).abs() < 1e-12);
        assert!(t.b.abs() < 1e-12 && t.d.abs() < 1e-12);
        assert!((t.c - 22.90).abs() < 1e-10);
        assert!((t.f - 40.60).abs() < 1e-10);
        assert!(residual_rmse(&t, &pts).unwrap() <= 1e-9);
    }

    #[test]
    fn pixel_to_geo_examples() {
        assert_eq!(pixel_to_geo(&AffineTransform::IDENTITY, 3.5, 7.25), (3.5, 7.25));
        let t = AffineTransform { c: 10.0, f: 20.0, ..AffineTransform::IDENTITY };
        assert_eq!(pixel_to_geo(&t, 0.0, 0.0), (10.0, 20.0));
    }

    #[test]
    fn errors() {
        assert!(matches!(
            fit_affine(&[gcp(0., 0., 0., 0.), gcp(1., 0., 1., 0.)]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            fit_affine(&[gcp(0., 0., 0., 0.), gcp(1., 1., 1., 0.), gcp(2., 2., 0., 1.)]),
            Err(Error::DegenerateGeometry(_))
        ));
        assert!(matches!(
            residual_rmse(&AffineTransform::IDENTITY, &[]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn conflicting_duplicates_leave_residual() {
        let pts = [
            gcp(0., 0., 0., 0.),
            gcp(0., 0., 0.5, 0.5),
            gcp(1., 0., 1., 0.),
            gcp(0., 1., 0., 1.),
        ];
        let t = fit_affine(&pts).unwrap();
        assert!(residual_rmse(&t, &pts).unwrap() > 0.0);
    }

    proptest! {
        #[test]
        fn recovers_exact_affine_and_ignores_order(
            a in 1e-5..1e-3f64, b in -1e-4..1e-4f64, d in -1e-4..1e-4f64, e in -1e-3..-1e-5f64,
            c in 20.0..25.0f64, f in 38.0..42.0f64,
            pts in prop::collection::vec((0.0..1000.0f64, 0.0..1000.0f64), 4..12),
            rot in 0usize..12,
        ) {
            let truth = AffineTransform { a, b, c, d, e, f };
            let gcps: Vec<_> = pts.iter().map(|&(x, y)| {
                let (lon, lat) = pixel_to_geo(&truth, x, y);
                gcp(x, y, lon, lat)
            }).collect();
            let Ok(fit) = fit_affine(&gcps) else { return Ok(()); };
            for g in &gcps {
                let (lon, lat) = pixel_to_geo(&fit, g.pixel_x, g.pixel_y);
                prop_assert!((lon - g.longitude).abs() <= 1e-9);
                prop_assert!((lat - g.latitude).abs() <= 1e-9);
            }
            let mut rotated = gcps.clone();
            let k = rot % rotated.len();
            rotated.rotate_left(k);
            rotated.reverse();
            let fit2 = fit_affine(&rotated).unwrap();
            for (p, q) in fit.coefficients().iter().zip(fit2.coefficients()) {
                prop_assert!((p - q).abs() <= 1e-9 * (1.0 + p.abs()));
            }
        }
    }
}
