//! Square tessellation by coordinate truncation.
//!
//! A sample belongs to the tile obtained by keeping `decimals` digits of its
//! latitude and longitude, truncating toward zero (digits are dropped, not
//! rounded). Four decimals gives cells of roughly ten meters. Tile keys are
//! stored as scaled integers so that equality between tilings is exact.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reconstruct::NoiseSample;

pub const DEFAULT_DECIMALS: u32 = 4;
pub const MAX_DECIMALS: u32 = 6;
pub const TILE_HEADER: [&str; 4] = ["latitude", "longitude", "noise", "count"];

pub fn scale_for(decimals: u32) -> f64 {
    10f64.powi(decimals as i32)
}

/// Integer cell index of a coordinate at the given precision: the largest
/// `k` whose key `k / 10^d` does not exceed `|value|`, signed like `value`.
/// Scaling alone misfiles coordinates that sit exactly on a key (40.6301 ·
/// 10⁴ evaluates to 406300.99999999994), so the scaled guess is corrected
/// against the key values themselves.
pub fn truncate_index(value: f64, decimals: u32) -> i64 {
    if value < 0.0 {
        return -truncate_index(-value, decimals);
    }
    let s = scale_for(decimals);
    let mut k = (value * s).trunc() as i64;
    while k > 0 && k as f64 / s > value {
        k -= 1;
    }
    while (k + 1) as f64 / s <= value {
        k += 1;
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub lat_index: i64,
    pub lon_index: i64,
    pub decimals: u32,
    pub mean_noise_db: f64,
    pub sample_count: u64,
}

impl Tile {
    pub fn lat_key(&self) -> f64 {
        self.lat_index as f64 / scale_for(self.decimals)
    }

    pub fn lon_key(&self) -> f64 {
        self.lon_index as f64 / scale_for(self.decimals)
    }

    pub fn key(&self) -> (i64, i64) {
        (self.lat_index, self.lon_index)
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Accumulator {
    sum: CompensatedSum,
    count: u64,
}

/// Groups samples into tiles sorted by (latitude key, longitude key).
pub fn tessellate<I>(samples: I, decimals: u32) -> Result<Vec<Tile>>
where
    I: IntoIterator<Item = NoiseSample>,
{
    tessellate_results(samples.into_iter().map(Ok), decimals)
}

/// Like [`tessellate`] but consumes a fallible stream (e.g. a sample file).
pub fn tessellate_results<I>(samples: I, decimals: u32) -> Result<Vec<Tile>>
where
    I: IntoIterator<Item = Result<NoiseSample>>,
{
    if decimals > MAX_DECIMALS {
        return Err(Error::InvalidParameter(format!(
            "tessellation decimals must be in [0, {MAX_DECIMALS}], got {decimals}"
        )));
    }
    let mut groups: HashMap<(i64, i64), Accumulator> = HashMap::new();
    for s in samples {
        let s = s?;
        let key = (truncate_index(s.latitude, decimals), truncate_index(s.longitude, decimals));
        let acc = groups.entry(key).or_default();
        acc.sum.add(s.noise_db);
        acc.count += 1;
    }
    let mut tiles: Vec<Tile> = groups
        .into_iter()
        .map(|((lat_index, lon_index), acc)| Tile {
            lat_index,
            lon_index,
            decimals,
            mean_noise_db: acc.sum.value() / acc.count as f64,
            sample_count: acc.count,
        })
        .collect();
    tiles.sort_unstable_by_key(Tile::key);
    Ok(tiles)
}

/// `1 - tiles_out / samples_in`.
pub fn reduction_ratio(samples_in: u64, tiles_out: u64) -> Result<f64> {
    if samples_in == 0 {
        return Err(Error::UndefinedRatio);
    }
    if tiles_out > samples_in {
        return Err(Error::InvalidParameter(format!(
            "{tiles_out} tiles cannot come from {samples_in} samples"
        )));
    }
    Ok(1.0 - tiles_out as f64 / samples_in as f64)
}

pub fn write_tiles<W: Write>(out: W, tiles: &[Tile]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TILE_HEADER)?;
    for t in tiles {
        let d = t.decimals as usize;
        w.write_record(&[
            format!("{:.*}", d, t.lat_key()),
            format!("{:.*}", d, t.lon_key()),
            t.mean_noise_db.to_string(),
            t.sample_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tiles_file(path: impl AsRef<Path>, tiles: &[Tile]) -> Result<()> {
    let mut buf = Vec::new();
    write_tiles(&mut buf, tiles)?;
    crate::io::write_atomic(path, &buf)
}

/// Number of digits after the decimal point in a key field.
fn key_decimals(field: &str) -> u32 {
    field.split_once('.').map_or(0, |(_, frac)| frac.len() as u32)
}

fn parse_key(field: &str, decimals: u32) -> Result<i64> {
    let v: f64 = field
        .parse()
        .map_err(|_| Error::InvalidRecord(format!("tile key {field:?} is not a number")))?;
    Ok((v * scale_for(decimals)).round() as i64)
}

/// Reads a tile file; the precision is inferred from the key columns and
/// must be the same on every row.
pub fn read_tiles<R: Read>(input: R) -> Result<Vec<Tile>> {
    let mut reader = csv::Reader::from_reader(input);
    crate::io::expect_header(reader.headers()?, &TILE_HEADER, "tile file")?;
    let mut tiles = Vec::new();
    let mut precision: Option<u32> = None;
    for record in reader.records() {
        let record = record?;
        let decimals = key_decimals(&record[0]).max(key_decimals(&record[1]));
        if decimals > MAX_DECIMALS {
            return Err(Error::InvalidRecord(format!("tile key precision {decimals} exceeds {MAX_DECIMALS}")));
        }
        match precision {
            None => precision = Some(decimals),
            Some(p) if p != decimals => {
                return Err(Error::Schema(format!("tile file mixes key precisions {p} and {decimals}")))
            }
            _ => {}
        }
        let parse_f = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|_| Error::InvalidRecord(format!("bad number {:?}", &record[i])))
        };
        let count: u64 = record[3]
            .parse()
            .map_err(|_| Error::InvalidRecord(format!("bad count {:?}", &record[3])))?;
        tiles.push(Tile {
            lat_index: parse_key(&record[0], decimals)?,
            lon_index: parse_key(&record[1], decimals)?,
            decimals,
            mean_noise_db: parse_f(2)?,
            sample_count: count,
        });
    }
    Ok(tiles)
}

pub fn read_tiles_file(path: impl AsRef<Path>) -> Result<Vec<Tile>> {
    read_tiles(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(lat: f64, lon: f64, noise: f64) -> NoiseSample {
        NoiseSample { latitude: lat, longitude: lon, red: 0, green: 0, blue: 0, noise_db: noise }
    }

    #[test]
    fn singleton() {
        let tiles = tessellate([sample(40.63001, 22.95002, 52.5)], 4).unwrap();
        assert_eq!(tiles.len(), 1);
        let t = tiles[0];
        assert_eq!((t.lat_index, t.lon_index), (406300, 229500));
        assert_eq!(t.lat_key(), 40.63);
        assert_eq!(t.lon_key(), 22.95);
        assert_eq!((t.mean_noise_db, t.sample_count), (52.5, 1));
    }

    #[test]
    fn two_samples_one_tile() {
        let tiles =
            tessellate([sample(40.63001, 22.95002, 52.5), sample(40.63009, 22.95008, 57.5)], 4).unwrap();
        assert_eq!(tiles.len(), 1);
        assert_eq!((tiles[0].mean_noise_db, tiles[0].sample_count), (55.0, 2));
    }

    #[test]
    fn truncation_boundary() {
        let tiles =
            tessellate([sample(40.63001, 22.95, 52.5), sample(40.63010, 22.95, 52.5)], 4).unwrap();
        let keys: Vec<_> = tiles.iter().map(|t| t.lat_index).collect();
        assert_eq!(keys, vec![406300, 406301]);
    }

    #[test]
    fn truncation_is_toward_zero() {
        assert_eq!(truncate_index(-22.95008, 4), -229500);
        assert_eq!(truncate_index(22.95008, 4), 229500);
    }

    #[test]
    fn coordinates_on_a_key_stay_in_it() {
        assert_eq!(truncate_index(40.6301, 4), 406301);
        assert_eq!(truncate_index(0.29, 2), 29);
        assert_eq!(truncate_index(-0.29, 2), -29);
        assert_eq!(truncate_index(0.0, 4), 0);
    }

    #[test]
    fn empty_input_and_bad_precision() {
        assert!(tessellate(std::iter::empty(), 4).unwrap().is_empty());
        assert!(tessellate(std::iter::empty(), 7).is_err());
    }

    #[test]
    fn reduction_ratios() {
        assert!((reduction_ratio(3_312_310, 197_445).unwrap() - 0.94).abs() <= 0.005);
        // The published 99.4% is the exact ratio 0.99494 with the last digit dropped.
        let kalamaria = reduction_ratio(21_606_947, 109_245).unwrap();
        assert!((kalamaria - 0.994_94).abs() < 1e-5);
        assert_eq!((kalamaria * 1000.0).floor() / 10.0, 99.4);
        assert_eq!(reduction_ratio(10, 10).unwrap(), 0.0);
        assert!(matches!(reduction_ratio(0, 0), Err(Error::UndefinedRatio)));
    }

    #[test]
    fn tile_file_round_trip() {
        let tiles = tessellate(
            [sample(40.63001, 22.95002, 52.5), sample(40.6401, 22.9601, 57.5), sample(40.6401, 22.9601, 62.5)],
            4,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_tiles(&mut buf, &tiles).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("latitude,longitude,noise,count\n40.6300,22.9500,52.5,1\n"));
        assert_eq!(read_tiles(&buf[..]).unwrap(), tiles);
    }

    proptest! {
        #[test]
        fn conserves_counts_and_ignores_order(
            pts in prop::collection::vec((40.60..40.62f64, 22.94..22.96f64, 0usize..9), 1..300),
        ) {
            let samples: Vec<_> = pts.iter().map(|&(la, lo, b)| sample(la, lo, 42.5 + 5.0 * b as f64)).collect();
            let tiles = tessellate(samples.iter().copied(), 4).unwrap();
            prop_assert!(tiles.len() <= samples.len());
            prop_assert_eq!(tiles.iter().map(|t| t.sample_count).sum::<u64>(), samples.len() as u64);
            let mut reversed = samples.clone();
            reversed.reverse();
            let tiles2 = tessellate(reversed, 4).unwrap();
            prop_assert_eq!(tiles.len(), tiles2.len());
            for (a, b) in tiles.iter().zip(&tiles2) {
                prop_assert_eq!(a.key(), b.key());
                prop_assert_eq!(a.sample_count, b.sample_count);
                prop_assert!((a.mean_noise_db - b.mean_noise_db).abs() <= 1e-9);
            }
        }
    }
}
