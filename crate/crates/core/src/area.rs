//! Named study areas as lon/lat polygons, used to split listings by district.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::property_prep::PropertyRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub name: String,
    /// Polygon vertices as `[longitude, latitude]`; the ring closes implicitly.
    pub vertices: Vec<[f64; 2]>,
}

impl Area {
    pub fn new(name: impl Into<String>, vertices: Vec<[f64; 2]>) -> Result<Self> {
        let name = name.into();
        if vertices.len() < 3 {
            return Err(Error::DegenerateGeometry(format!("area {name} needs at least 3 vertices")));
        }
        Ok(Self { name, vertices })
    }

    /// Even-odd ray casting.
    pub fn contains(&self, latitude: f64, longitude: f64) -> bool {
        let mut inside = false;
        let n = self.vertices.len();
        let mut j = n - 1;
        for i in 0..n {
            let [xi, yi] = self.vertices[i];
            let [xj, yj] = self.vertices[j];
            if (yi > latitude) != (yj > latitude) && longitude < (xj - xi) * (latitude - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    pub fn filter(&self, records: &[PropertyRecord]) -> Vec<PropertyRecord> {
        records.iter().filter(|r| self.contains(r.latitude, r.longitude)).cloned().collect()
    }
}

/// Reads `[[area]]` tables (`name`, `vertices = [[lon, lat], ...]`) from TOML.
pub fn read_areas_file(path: impl AsRef<Path>) -> Result<Vec<Area>> {
    read_areas(&std::fs::read_to_string(path)?)
}

pub fn read_areas(text: &str) -> Result<Vec<Area>> {
    #[derive(Deserialize)]
    struct File {
        area: Vec<Area>,
    }
    let file: File = toml::from_str(text)?;
    file.area.into_iter().map(|a| Area::new(a.name, a.vertices)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_membership() {
        let a = Area::new("A", vec![[22.9, 40.6], [23.0, 40.6], [23.0, 40.7], [22.9, 40.7]]).unwrap();
        assert!(a.contains(40.65, 22.95));
        assert!(!a.contains(40.75, 22.95));
        assert!(!a.contains(40.65, 23.05));
    }

    #[test]
    fn parse_and_reject_degenerate() {
        let areas = read_areas("[[area]]\nname = \"C\"\nvertices = [[0, 0], [1, 0], [0, 1]]\n").unwrap();
        assert_eq!(areas[0].name, "C");
        assert!(read_areas("[[area]]\nname = \"X\"\nvertices = [[0, 0], [1, 0]]\n").is_err());
    }
}
