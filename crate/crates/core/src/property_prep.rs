//! Property listing cleaning: outlier filtering, imputation and encoding.
//!
//! Quartiles use linear interpolation between order statistics (position
//! `(n - 1)·p`), so IQR bounds can differ slightly from tools that default to
//! another quartile method.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

pub const PROPERTY_COLUMNS: [&str; 12] = [
    "Id",
    "Size",
    "NumberOfRooms",
    "Latitude",
    "Longitude",
    "EnergyEfficiencyId",
    "ConstructionDate",
    "SubTypeId",
    "FloorLevelId",
    "BasicHeatingTypeId",
    "DoorFrameTypeId",
    "Price",
];
pub const NOISE_COLUMNS: [&str; 3] = ["noise_day", "noise_night", "noise_combined"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyRecord {
    #[serde(rename = "Id")]
    pub id: String,
    #[serde(rename = "Size")]
    pub size_m2: f64,
    #[serde(rename = "NumberOfRooms")]
    pub number_of_rooms: u32,
    #[serde(rename = "Latitude")]
    pub latitude: f64,
    #[serde(rename = "Longitude")]
    pub longitude: f64,
    #[serde(rename = "EnergyEfficiencyId")]
    pub energy_efficiency: String,
    #[serde(rename = "ConstructionDate", default)]
    pub construction_date: Option<NaiveDate>,
    #[serde(rename = "SubTypeId", default)]
    pub sub_type: Option<String>,
    #[serde(rename = "FloorLevelId", default)]
    pub floor_level: Option<String>,
    #[serde(rename = "BasicHeatingTypeId", default)]
    pub basic_heating_type: Option<String>,
    #[serde(rename = "DoorFrameTypeId", default)]
    pub door_frame_type: Option<String>,
    #[serde(rename = "Price", default)]
    pub price_eur: Option<f64>,
    #[serde(default)]
    pub noise_day: Option<f64>,
    #[serde(default)]
    pub noise_night: Option<f64>,
    #[serde(default)]
    pub noise_combined: Option<f64>,
}

impl PropertyRecord {
    /// A complete, valid listing used as a template in tests and fixtures.
    pub fn example() -> Self {
        Self {
            id: "0".into(),
            size_m2: 80.0,
            number_of_rooms: 2,
            latitude: 40.63,
            longitude: 22.95,
            energy_efficiency: "C".into(),
            construction_date: NaiveDate::from_ymd_opt(1985, 6, 1),
            sub_type: Some("1".into()),
            floor_level: Some("2".into()),
            basic_heating_type: Some("1".into()),
            door_frame_type: Some("1".into()),
            price_eur: Some(120_000.0),
            noise_day: None,
            noise_night: None,
            noise_combined: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidRecord(format!("property {}: {what}", self.id)));
        if !(self.size_m2 > 0.0) {
            return bad("size must be positive");
        }
        if !(-90.0..=90.0).contains(&self.latitude) || !(-180.0..=180.0).contains(&self.longitude) {
            return bad("coordinates out of range");
        }
        if let Some(p) = self.price_eur {
            if !(p > 0.0) {
                return bad("price must be positive");
            }
        }
        Ok(())
    }

    fn nominal(&self, f: NominalFeature) -> Option<&str> {
        match f {
            NominalFeature::SubType => self.sub_type.as_deref(),
            NominalFeature::BasicHeatingType => self.basic_heating_type.as_deref(),
            NominalFeature::DoorFrameType => self.door_frame_type.as_deref(),
        }
    }

    fn nominal_mut(&mut self, f: NominalFeature) -> &mut Option<String> {
        match f {
            NominalFeature::SubType => &mut self.sub_type,
            NominalFeature::BasicHeatingType => &mut self.basic_heating_type,
            NominalFeature::DoorFrameType => &mut self.door_frame_type,
        }
    }

    pub fn noise_value(&self, column: &str) -> Option<f64> {
        match column {
            "noise_day" => self.noise_day,
            "noise_night" => self.noise_night,
            "noise_combined" => self.noise_combined,
            _ => None,
        }
    }
}

pub fn read_properties<R: Read>(input: R) -> Result<Vec<PropertyRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    for col in PROPERTY_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Schema(format!("property file lacks column {col}")));
        }
    }
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let rec: PropertyRecord = row?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_properties_file(path: impl AsRef<Path>) -> Result<Vec<PropertyRecord>> {
    read_properties(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Writes the property columns plus whichever noise columns any record carries.
pub fn write_properties<W: Write>(out: W, records: &[PropertyRecord]) -> Result<()> {
    let noise: Vec<&str> = NOISE_COLUMNS
        .iter()
        .copied()
        .filter(|c| records.iter().any(|r| r.noise_value(c).is_some()))
        .collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = PROPERTY_COLUMNS.to_vec();
    header.extend(&noise);
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        let mut rec = vec![
            r.id.clone(),
            r.size_m2.to_string(),
            r.number_of_rooms.to_string(),
            r.latitude.to_string(),
            r.longitude.to_string(),
            r.energy_efficiency.clone(),
            r.construction_date.map(|d| d.to_string()).unwrap_or_default(),
            r.sub_type.clone().unwrap_or_default(),
            r.floor_level.clone().unwrap_or_default(),
            r.basic_heating_type.clone().unwrap_or_default(),
            r.door_frame_type.clone().unwrap_or_default(),
            opt(r.price_eur),
        ];
        rec.extend(noise.iter().map(|c| opt(r.noise_value(c))));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_properties_file(path: impl AsRef<Path>, records: &[PropertyRecord]) -> Result<()> {
    let mut buf = Vec::new();
    write_properties(&mut buf, records)?;
    crate::io::write_atomic(path, &buf)
}

// ---------------------------------------------------------------------------
// Outliers

/// Linear-interpolation quantile of sorted data, `p` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `(Q1 - k·IQR, Q3 + k·IQR)`.
pub fn iqr_bounds(values: &[f64], k: f64) -> Result<(f64, f64)> {
    if values.len() < 4 {
        return Err(Error::InsufficientData(format!("IQR needs at least 4 values, got {}", values.len())));
    }
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("IQR multiplier must be positive, got {k}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    Ok((q1 - k * iqr, q3 + k * iqr))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericColumn {
    Size,
    Rooms,
    Price,
}

impl NumericColumn {
    fn value(self, r: &PropertyRecord) -> Option<f64> {
        match self {
            Self::Size => Some(r.size_m2),
            Self::Rooms => Some(f64::from(r.number_of_rooms)),
            Self::Price => r.price_eur,
        }
    }
}

/// Inclusive bounds on one column; a missing value violates the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRule {
    pub column: NumericColumn,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl BoundRule {
    pub fn admits(&self, r: &PropertyRecord) -> bool {
        match self.column.value(r) {
            None => false,
            Some(v) => self.lower.is_none_or(|lo| v >= lo) && self.upper.is_none_or(|hi| v <= hi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutlierRule {
    Fixed { column: NumericColumn, lower: Option<f64>, upper: Option<f64> },
    /// Bounds derived from the data at resolution time.
    Iqr { column: NumericColumn, k: f64, #[serde(default)] upper_only: bool },
}

impl OutlierRule {
    /// Turns the rule into fixed bounds computed on `records`.
    pub fn resolve(&self, records: &[PropertyRecord]) -> Result<BoundRule> {
        match *self {
            Self::Fixed { column, lower, upper } => Ok(BoundRule { column, lower, upper }),
            Self::Iqr { column, k, upper_only } => {
                let values: Vec<f64> = records.iter().filter_map(|r| column.value(r)).collect();
                let (lo, hi) = iqr_bounds(&values, k)?;
                Ok(BoundRule { column, lower: (!upper_only).then_some(lo), upper: Some(hi) })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub rules: Vec<BoundRule>,
    /// Rows removed, attributed to the first rule they violate.
    pub removed: Vec<usize>,
    pub retained: usize,
}

pub fn resolve_rules(records: &[PropertyRecord], rules: &[OutlierRule]) -> Result<Vec<BoundRule>> {
    rules.iter().map(|r| r.resolve(records)).collect()
}

pub fn filter_outliers(records: &[PropertyRecord], rules: &[BoundRule]) -> (Vec<PropertyRecord>, FilterReport) {
    let mut removed = vec![0; rules.len()];
    let mut kept = Vec::with_capacity(records.len());
    for r in records {
        match rules.iter().position(|rule| !rule.admits(r)) {
            Some(i) => removed[i] += 1,
            None => kept.push(r.clone()),
        }
    }
    let report = FilterReport { rules: rules.to_vec(), removed, retained: kept.len() };
    (kept, report)
}

// ---------------------------------------------------------------------------
// Imputation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NominalFeature {
    SubType,
    BasicHeatingType,
    DoorFrameType,
}

impl NominalFeature {
    pub const ALL: [Self; 3] = [Self::SubType, Self::BasicHeatingType, Self::DoorFrameType];

    pub fn column(self) -> &'static str {
        match self {
            Self::SubType => "SubTypeId",
            Self::BasicHeatingType => "BasicHeatingTypeId",
            Self::DoorFrameType => "DoorFrameTypeId",
        }
    }
}

/// Sort key giving numeric labels their numeric order, others lexical order after them.
fn category_key(label: &str) -> (u8, i64, String) {
    match label.parse::<i64>() {
        Ok(v) => (0, v, String::new()),
        Err(_) => (1, 0, label.to_string()),
    }
}

/// Distinct labels in category-code order.
pub fn category_levels<'a>(labels: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut v: Vec<String> = labels.into_iter().map(str::to_string).collect();
    v.sort_by_key(|l| category_key(l));
    v.dedup();
    v
}

/// Ordered category lists for the ordinal features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalOrders {
    pub energy_efficiency: Vec<String>,
    pub floor_level: Vec<String>,
}

impl OrdinalOrders {
    fn code(order: &[String], feature: &str, label: &str) -> Result<usize> {
        order
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnseenCategory { feature: feature.into(), value: label.into() })
    }

    pub fn energy_code(&self, label: &str) -> Result<usize> {
        Self::code(&self.energy_efficiency, "EnergyEfficiencyId", label)
    }

    pub fn floor_code(&self, label: &str) -> Result<usize> {
        Self::code(&self.floor_level, "FloorLevelId", label)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputeReport {
    pub construction_date: usize,
    pub floor_level: usize,
    pub nominal: BTreeMap<String, usize>,
}

fn all_missing(what: &str) -> Error {
    Error::InsufficientData(format!("column {what} has no observed values to impute from"))
}

/// Fills missing construction dates (mean epoch day), nominal features
/// (mode, ties to the lowest category code) and floor levels (rounded mean
/// of ordinal codes). Observed cells are never modified.
pub fn impute(records: &[PropertyRecord], orders: &OrdinalOrders) -> Result<(Vec<PropertyRecord>, ImputeReport)> {
    let mut out = records.to_vec();
    let mut report = ImputeReport::default();
    if records.is_empty() {
        return Ok((out, report));
    }

    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
    if records.iter().any(|r| r.construction_date.is_none()) {
        let days: Vec<i64> = records
            .iter()
            .filter_map(|r| r.construction_date)
            .map(|d| (d - epoch).num_days())
            .collect();
        if days.is_empty() {
            return Err(all_missing("ConstructionDate"));
        }
        let mean = days.iter().map(|&d| d as f64).sum::<f64>() / days.len() as f64;
        let fill = epoch + chrono::Duration::days(mean.round() as i64);
        for r in out.iter_mut().filter(|r| r.construction_date.is_none()) {
            r.construction_date = Some(fill);
            report.construction_date += 1;
        }
    }

    for feature in NominalFeature::ALL {
        if records.iter().all(|r| r.nominal(feature).is_some()) {
            continue;
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for r in records {
            if let Some(l) = r.nominal(feature) {
                *counts.entry(l).or_default() += 1;
            }
        }
        let mode = counts
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| category_key(b.0).cmp(&category_key(a.0))))
            .map(|(l, _)| l.to_string())
            .ok_or_else(|| all_missing(feature.column()))?;
        let mut filled = 0;
        for r in out.iter_mut() {
            let slot = r.nominal_mut(feature);
            if slot.is_none() {
                *slot = Some(mode.clone());
                filled += 1;
            }
        }
        report.nominal.insert(feature.column().to_string(), filled);
    }

    if records.iter().any(|r| r.floor_level.is_none()) {
        let codes: Vec<usize> = records
            .iter()
            .filter_map(|r| r.floor_level.as_deref())
            .map(|l| orders.floor_code(l))
            .collect::<Result<_>>()?;
        if codes.is_empty() {
            return Err(all_missing("FloorLevelId"));
        }
        let mean = codes.iter().sum::<usize>() as f64 / codes.len() as f64;
        let fill = orders.floor_level[mean.round() as usize].clone();
        for r in out.iter_mut().filter(|r| r.floor_level.is_none()) {
            r.floor_level = Some(fill.clone());
            report.floor_level += 1;
        }
    }
    Ok((out, report))
}

// ---------------------------------------------------------------------------
// Encoding

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NominalEncoding {
    #[default]
    OneHot,
    Binary,
}

pub const NUMERIC_FEATURES: [&str; 5] = ["Size", "NumberOfRooms", "Latitude", "Longitude", "ConstructionDate"];

/// Category maps learned from prepared records; transforms records into a
/// [`FeatureMatrix`] and decodes categorical columns back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub orders: OrdinalOrders,
    pub nominal_levels: Vec<(NominalFeature, Vec<String>)>,
    pub noise_columns: Vec<String>,
    pub encoding: NominalEncoding,
}

/// Categorical values recovered from an encoded row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedCategories {
    pub energy_efficiency: String,
    pub floor_level: String,
    pub nominal: Vec<(NominalFeature, String)>,
}

fn bit_width(levels: usize) -> usize {
    let mut bits = 1;
    while (1usize << bits) < levels {
        bits += 1;
    }
    bits
}

impl Encoder {
    pub fn fit(records: &[PropertyRecord], orders: OrdinalOrders, encoding: NominalEncoding) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InsufficientData("cannot fit an encoder on zero records".into()));
        }
        let mut nominal_levels = Vec::new();
        for f in NominalFeature::ALL {
            let labels: Vec<&str> = records
                .iter()
                .map(|r| r.nominal(f).ok_or_else(|| Error::InvalidRecord(format!("{} is missing; impute first", f.column()))))
                .collect::<Result<_>>()?;
            nominal_levels.push((f, category_levels(labels)));
        }
        let noise_columns = NOISE_COLUMNS
            .iter()
            .filter(|c| records.iter().any(|r| r.noise_value(c).is_some()))
            .map(|c| c.to_string())
            .collect();
        Ok(Self { orders, nominal_levels, noise_columns, encoding })
    }

    pub fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = NUMERIC_FEATURES.iter().map(|s| s.to_string()).collect();
        cols.push("EnergyEfficiencyId".into());
        cols.push("FloorLevelId".into());
        for (f, levels) in &self.nominal_levels {
            match self.encoding {
                NominalEncoding::OneHot => {
                    cols.extend(levels.iter().map(|l| format!("{}_{l}", f.column())));
                }
                NominalEncoding::Binary => {
                    cols.extend((0..bit_width(levels.len())).map(|b| format!("{}_bit{b}", f.column())));
                }
            }
        }
        cols.extend(self.noise_columns.iter().cloned());
        cols
    }

    pub fn transform(&self, records: &[PropertyRecord]) -> Result<FeatureMatrix> {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
        let columns = self.columns();
        let mut values = Vec::with_capacity(records.len() * columns.len());
        let mut target = Vec::with_capacity(records.len());
        for r in records {
            let missing = |c: &str| Error::InvalidRecord(format!("property {}: {c} is missing", r.id));
            let date = r.construction_date.ok_or_else(|| missing("ConstructionDate"))?;
            values.extend_from_slice(&[
                r.size_m2,
                f64::from(r.number_of_rooms),
                r.latitude,
                r.longitude,
                (date - epoch).num_days() as f64,
            ]);
            values.push(self.orders.energy_code(&r.energy_efficiency)? as f64);
            let floor = r.floor_level.as_deref().ok_or_else(|| missing("FloorLevelId"))?;
            values.push(self.orders.floor_code(floor)? as f64);
            for (f, levels) in &self.nominal_levels {
                let label = r.nominal(*f).ok_or_else(|| missing(f.column()))?;
                let code = levels.iter().position(|l| l == label).ok_or_else(|| Error::UnseenCategory {
                    feature: f.column().into(),
                    value: label.into(),
                })?;
                match self.encoding {
                    NominalEncoding::OneHot => {
                        values.extend((0..levels.len()).map(|i| if i == code { 1.0 } else { 0.0 }));
                    }
                    NominalEncoding::Binary => {
                        values.extend((0..bit_width(levels.len())).map(|b| ((code >> b) & 1) as f64));
                    }
                }
            }
            for c in &self.noise_columns {
                values.push(r.noise_value(c).ok_or_else(|| missing(c))?);
            }
            target.push(r.price_eur.ok_or_else(|| missing("Price"))?);
        }
        FeatureMatrix::new(columns, values, target)
    }

    /// Recovers the categorical labels of one encoded row.
    pub fn decode_row(&self, row: &[f64]) -> Result<DecodedCategories> {
        let label = |order: &[String], v: f64, what: &str| -> Result<String> {
            order
                .get(v as usize)
                .cloned()
                .ok_or_else(|| Error::Schema(format!("{what} code {v} out of range")))
        };
        let base = NUMERIC_FEATURES.len();
        let energy_efficiency = label(&self.orders.energy_efficiency, row[base], "EnergyEfficiencyId")?;
        let floor_level = label(&self.orders.floor_level, row[base + 1], "FloorLevelId")?;
        let mut pos = base + 2;
        let mut nominal = Vec::new();
        for (f, levels) in &self.nominal_levels {
            let code = match self.encoding {
                NominalEncoding::OneHot => {
                    let slice = &row[pos..pos + levels.len()];
                    pos += levels.len();
                    slice
                        .iter()
                        .position(|&v| v == 1.0)
                        .ok_or_else(|| Error::Schema(format!("no hot bit for {}", f.column())))?
                }
                NominalEncoding::Binary => {
                    let w = bit_width(levels.len());
                    let code = (0..w).map(|b| (row[pos + b] as usize) << b).sum();
                    pos += w;
                    code
                }
            };
            nominal.push((*f, label(levels, code as f64, f.column())?));
        }
        Ok(DecodedCategories { energy_efficiency, floor_level, nominal })
    }
}

pub fn encode(records: &[PropertyRecord], orders: &OrdinalOrders) -> Result<(Encoder, FeatureMatrix)> {
    let enc = Encoder::fit(records, orders.clone(), NominalEncoding::OneHot)?;
    let m = enc.transform(records)?;
    Ok((enc, m))
}
