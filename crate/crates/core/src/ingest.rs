//! Parsers for every external input.
//!
//! Parsing is total: each input line (or GeoJSON feature) ends up either as a
//! record or as a [`Rejection`] naming its position. Only structural problems
//! that make the whole file unusable are returned as [`IngestError`].

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::categories::{Perception, WalkSound};
use crate::par::Exec;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("expected a GeoJSON FeatureCollection")]
    NotFeatureCollection,
    #[error("duplicate segment id `{id}` in features {first} and {second}")]
    DuplicateSegment {
        id: String,
        first: usize,
        second: usize,
    },
    #[error("header is missing column `{0}`")]
    MissingColumn(String),
    #[error("malformed table: {0}")]
    Csv(String),
}

/// Where a rejected input item sits in its file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    Line(usize),
    Feature(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub position: Position,
    pub reason: String,
}

impl Rejection {
    fn line(line: usize, reason: impl Into<String>) -> Self {
        Rejection {
            position: Position::Line(line),
            reason: reason.into(),
        }
    }

    fn feature(index: usize, reason: impl Into<String>) -> Self {
        Rejection {
            position: Position::Feature(index),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.position {
            Position::Line(n) => write!(f, "line:{n} reason:{}", self.reason),
            Position::Feature(i) => write!(f, "feature:{i} reason:{}", self.reason),
        }
    }
}

/// Accepted records plus the rejected positions, both in input order.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub rejects: Vec<Rejection>,
}

impl<T> Parsed<T> {
    pub fn skipped(&self) -> usize {
        self.rejects.len()
    }
}

// ---------------------------------------------------------------------------
// Photos

/// One geo-referenced photo. Tags are kept exactly as supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotoRecord {
    #[serde(rename = "id", alias = "photo_id")]
    pub photo_id: String,
    pub lon: f64,
    pub lat: f64,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
}

fn check_lon_lat(lon: f64, lat: f64) -> Result<(), String> {
    if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
        return Err(format!("longitude {lon} outside [-180, 180]"));
    }
    if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
        return Err(format!("latitude {lat} outside [-90, 90]"));
    }
    Ok(())
}

fn parse_photo_line(line: &str) -> Result<PhotoRecord, String> {
    if line.trim().is_empty() {
        return Err("empty line".to_string());
    }
    let photo: PhotoRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    check_lon_lat(photo.lon, photo.lat)?;
    Ok(photo)
}

/// Parses line-delimited JSON photos (`{"id", "lon", "lat", "tags", ...}`).
///
/// Duplicate ids keep the first occurrence; later ones are reported as
/// rejections.
pub fn parse_photos<R: BufRead>(reader: R) -> Result<Parsed<PhotoRecord>, IngestError> {
    parse_photos_with(reader, Exec::default())
}

pub fn parse_photos_with<R: BufRead>(
    reader: R,
    exec: Exec,
) -> Result<Parsed<PhotoRecord>, IngestError> {
    let lines = reader.lines().collect::<Result<Vec<_>, _>>()?;
    let parsed = exec.map_chunks(&lines, 4096, |chunk| {
        chunk.iter().map(|l| parse_photo_line(l)).collect::<Vec<_>>()
    });

    let mut seen = HashSet::new();
    let mut out = Parsed {
        records: Vec::with_capacity(lines.len()),
        rejects: Vec::new(),
    };
    for (idx, result) in parsed.into_iter().flatten().enumerate() {
        let line = idx + 1;
        match result {
            Ok(photo) => {
                if seen.insert(photo.photo_id.clone()) {
                    out.records.push(photo);
                } else {
                    log::warn!("line {line}: duplicate photo id {}", photo.photo_id);
                    out.rejects.push(Rejection::line(
                        line,
                        format!("duplicate photo_id `{}` (first kept)", photo.photo_id),
                    ));
                }
            }
            Err(reason) => out.rejects.push(Rejection::line(line, reason)),
        }
    }
    Ok(out)
}

pub fn write_photos<W: Write>(photos: &[PhotoRecord], mut out: W) -> std::io::Result<()> {
    for photo in photos {
        serde_json::to_writer(&mut out, photo)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Street segments

/// The eight most frequent OSM highway types, plus a catch-all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StreetType {
    Footway,
    Residential,
    Pedestrian,
    Track,
    Primary,
    Secondary,
    Tertiary,
    Construction,
    Other,
}

impl StreetType {
    pub const ALL: [StreetType; 9] = [
        StreetType::Footway,
        StreetType::Residential,
        StreetType::Pedestrian,
        StreetType::Track,
        StreetType::Primary,
        StreetType::Secondary,
        StreetType::Tertiary,
        StreetType::Construction,
        StreetType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StreetType::Footway => "footway",
            StreetType::Residential => "residential",
            StreetType::Pedestrian => "pedestrian",
            StreetType::Track => "track",
            StreetType::Primary => "primary",
            StreetType::Secondary => "secondary",
            StreetType::Tertiary => "tertiary",
            StreetType::Construction => "construction",
            StreetType::Other => "other",
        }
    }

    /// Unknown OSM values map to [`StreetType::Other`].
    pub fn from_osm(value: &str) -> StreetType {
        let value = value.trim().to_lowercase();
        StreetType::ALL
            .into_iter()
            .find(|t| t.as_str() == value)
            .unwrap_or(StreetType::Other)
    }
}

impl fmt::Display for StreetType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreetSegment {
    pub segment_id: String,
    /// `[lon, lat]` vertices; consecutive vertices are distinct.
    pub polyline: Vec<[f64; 2]>,
    pub street_type: StreetType,
}

fn json_id(value: &Value) -> Option<String> {
    match value {
        Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_feature(feature: &Value) -> Result<StreetSegment, String> {
    let geometry = feature.get("geometry").ok_or("feature has no geometry")?;
    let kind = geometry.get("type").and_then(Value::as_str).unwrap_or("null");
    if kind != "LineString" {
        return Err(format!("non-line geometry `{kind}`"));
    }
    let coords = geometry
        .get("coordinates")
        .and_then(Value::as_array)
        .ok_or("LineString without coordinates")?;

    let mut polyline: Vec<[f64; 2]> = Vec::with_capacity(coords.len());
    for c in coords {
        let pair = c.as_array().filter(|a| a.len() >= 2).ok_or("malformed position")?;
        let lon = pair[0].as_f64().ok_or("non-numeric longitude")?;
        let lat = pair[1].as_f64().ok_or("non-numeric latitude")?;
        check_lon_lat(lon, lat)?;
        if polyline.last() != Some(&[lon, lat]) {
            polyline.push([lon, lat]);
        }
    }
    if polyline.len() < 2 {
        return Err("polyline needs at least 2 distinct vertices".to_string());
    }

    let props = feature.get("properties").cloned().unwrap_or(Value::Null);
    let segment_id = props
        .get("segment_id")
        .and_then(json_id)
        .or_else(|| props.get("id").and_then(json_id))
        .or_else(|| feature.get("id").and_then(json_id))
        .ok_or("feature has no segment id")?;
    let street_type = props
        .get("highway")
        .or_else(|| props.get("street_type"))
        .and_then(Value::as_str)
        .map(StreetType::from_osm)
        .unwrap_or(StreetType::Other);

    Ok(StreetSegment {
        segment_id,
        polyline,
        street_type,
    })
}

/// Parses a GeoJSON FeatureCollection of LineString street segments.
///
/// Duplicate segment ids are a hard error since every downstream join keys
/// on them.
pub fn parse_segments<R: BufRead>(mut reader: R) -> Result<Parsed<StreetSegment>, IngestError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let root: Value = serde_json::from_str(&text).map_err(|e| IngestError::Json(e.to_string()))?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(IngestError::NotFeatureCollection);
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or(IngestError::NotFeatureCollection)?;

    let mut out = Parsed {
        records: Vec::with_capacity(features.len()),
        rejects: Vec::new(),
    };
    let mut ids: HashMap<String, usize> = HashMap::new();
    for (index, feature) in features.iter().enumerate() {
        match parse_feature(feature) {
            Ok(segment) => {
                if let Some(&first) = ids.get(&segment.segment_id) {
                    return Err(IngestError::DuplicateSegment {
                        id: segment.segment_id,
                        first,
                        second: index,
                    });
                }
                ids.insert(segment.segment_id.clone(), index);
                out.records.push(segment);
            }
            Err(reason) => out.rejects.push(Rejection::feature(index, reason)),
        }
    }
    Ok(out)
}

pub fn write_segments<W: Write>(segments: &[StreetSegment], out: W) -> std::io::Result<()> {
    let features: Vec<Value> = segments
        .iter()
        .map(|s| {
            json!({
                "type": "Feature",
                "geometry": { "type": "LineString", "coordinates": s.polyline },
                "properties": { "segment_id": s.segment_id, "highway": s.street_type.as_str() },
            })
        })
        .collect();
    serde_json::to_writer(out, &json!({ "type": "FeatureCollection", "features": features }))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Tabular inputs

struct Table {
    columns: HashMap<String, usize>,
    rows: Vec<(usize, csv::StringRecord)>,
    rejects: Vec<Rejection>,
}

impl Table {
    fn read<R: std::io::Read>(reader: R) -> Result<Table, IngestError> {
        let mut csv = csv::ReaderBuilder::new()
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = csv
            .headers()
            .map_err(|e| IngestError::Csv(e.to_string()))?
            .clone();
        let columns = header
            .iter()
            .enumerate()
            .map(|(i, name)| (name.to_lowercase(), i))
            .collect();
        let mut rows = Vec::new();
        let mut rejects = Vec::new();
        for (i, record) in csv.records().enumerate() {
            match record {
                Ok(record) => {
                    let line = record.position().map_or(i + 2, |p| p.line() as usize);
                    if record.len() != header.len() {
                        rejects.push(Rejection::line(
                            line,
                            format!("expected {} fields, found {}", header.len(), record.len()),
                        ));
                    } else {
                        rows.push((line, record));
                    }
                }
                Err(e) => {
                    let line = e.position().map_or(i + 2, |p| p.line() as usize);
                    rejects.push(Rejection::line(line, e.to_string()));
                }
            }
        }
        Ok(Table {
            columns,
            rows,
            rejects,
        })
    }

    fn column(&self, name: &str) -> Result<usize, IngestError> {
        self.columns
            .get(name)
            .copied()
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    }

    /// Runs `f` on every row, turning its errors into rejections.
    fn collect<T>(
        self,
        mut f: impl FnMut(&csv::StringRecord) -> Result<T, String>,
    ) -> Parsed<T> {
        let mut rejects = self.rejects;
        let mut records = Vec::with_capacity(self.rows.len());
        for (line, row) in &self.rows {
            match f(row) {
                Ok(r) => records.push(r),
                Err(reason) => rejects.push(Rejection::line(*line, reason)),
            }
        }
        rejects.sort_by_key(|r| match r.position {
            Position::Line(n) | Position::Feature(n) => n,
        });
        Parsed { records, rejects }
    }
}

/// One row of a word list: a term and its labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub term: String,
    pub labels: Vec<String>,
}

/// A named word list. Unclassified lists carry the single label `unclassified`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconFile {
    pub name: String,
    pub entries: Vec<LexiconEntry>,
}

/// Parses `term,labels` rows where labels are separated by `|`.
/// Repeated terms are rejected, keeping the first.
pub fn parse_lexicon<R: std::io::Read>(
    name: &str,
    reader: R,
) -> Result<(LexiconFile, Vec<Rejection>), IngestError> {
    let table = Table::read(reader)?;
    let term_col = table.column("term")?;
    let label_col = table.column("labels").or_else(|_| table.column("label"))?;
    let mut seen = HashSet::new();
    let parsed = table.collect(|row| {
        let term = row[term_col].trim().to_lowercase();
        if term.is_empty() {
            return Err("empty term".to_string());
        }
        let labels: Vec<String> = row[label_col]
            .split('|')
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        if labels.is_empty() {
            return Err(format!("term `{term}` has no labels"));
        }
        if !seen.insert(term.clone()) {
            return Err(format!("duplicate term `{term}`"));
        }
        Ok(LexiconEntry { term, labels })
    });
    Ok((
        LexiconFile {
            name: name.to_string(),
            entries: parsed.records,
        },
        parsed.rejects,
    ))
}

/// Parses `term,path` rows where the path is `top/sub/subsub`.
pub fn parse_taxonomy_rows<R: std::io::Read>(
    reader: R,
) -> Result<Parsed<(String, Vec<String>)>, IngestError> {
    let table = Table::read(reader)?;
    let term_col = table.column("term")?;
    let path_col = table.column("path")?;
    let mut seen = HashSet::new();
    Ok(table.collect(|row| {
        let term = row[term_col].trim().to_lowercase();
        if term.is_empty() {
            return Err("empty term".to_string());
        }
        let path: Vec<String> = row[path_col]
            .split('/')
            .map(|l| l.trim().to_string())
            .collect();
        if path.is_empty() || path.len() > 4 || path.iter().any(String::is_empty) {
            return Err(format!("path `{}` must hold 1 to 4 labels", &row[path_col]));
        }
        if !seen.insert(term.clone()) {
            return Err(format!("duplicate term `{term}`"));
        }
        Ok((term, path))
    }))
}

/// Yearly noise levels for one segment, in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRecord {
    pub segment_id: String,
    pub l_day: f64,
    pub l_evening: f64,
    pub l_night: f64,
    pub ewl: Option<f64>,
}

fn parse_db(text: &str, what: &str) -> Result<f64, String> {
    let v: f64 = text
        .parse()
        .map_err(|_| format!("{what} `{text}` is not a number"))?;
    if !(0.0..=130.0).contains(&v) {
        return Err(format!("{what} {v} dB outside [0, 130]"));
    }
    Ok(v)
}

/// Parses `segment_id,l_day,l_evening,l_night[,ewl]`; an empty `ewl` cell is allowed.
pub fn parse_noise<R: std::io::Read>(reader: R) -> Result<Parsed<NoiseRecord>, IngestError> {
    let table = Table::read(reader)?;
    let id = table.column("segment_id")?;
    let day = table.column("l_day")?;
    let evening = table.column("l_evening")?;
    let night = table.column("l_night")?;
    let ewl = table.column("ewl").ok();
    let mut seen = HashSet::new();
    Ok(table.collect(|row| {
        let segment_id = row[id].to_string();
        if segment_id.is_empty() {
            return Err("empty segment_id".to_string());
        }
        let rec = NoiseRecord {
            l_day: parse_db(&row[day], "l_day")?,
            l_evening: parse_db(&row[evening], "l_evening")?,
            l_night: parse_db(&row[night], "l_night")?,
            ewl: match ewl.map(|c| &row[c]) {
                None | Some("") => None,
                Some(text) => Some(parse_db(text, "ewl")?),
            },
            segment_id,
        };
        if !seen.insert(rec.segment_id.clone()) {
            return Err(format!("duplicate segment_id `{}`", rec.segment_id));
        }
        Ok(rec)
    }))
}

/// One participant's ratings at one soundwalk stop. All scores are in 1..=10.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SoundwalkRecord {
    pub walk_id: String,
    pub participant_id: String,
    pub location_id: String,
    /// Indexed by [`WalkSound`].
    pub sounds: [u8; WalkSound::COUNT],
    /// Indexed by [`Perception`].
    pub perceptions: [u8; Perception::COUNT],
}

impl SoundwalkRecord {
    pub fn sound(&self, c: WalkSound) -> u8 {
        self.sounds[c.index()]
    }

    pub fn perception(&self, f: Perception) -> u8 {
        self.perceptions[f.index()]
    }
}

fn parse_score(text: &str, column: &str) -> Result<u8, String> {
    let v = u8::from_str(text).map_err(|_| format!("{column} `{text}` is not an integer"))?;
    if !(1..=10).contains(&v) {
        return Err(format!("{column} = {v} outside [1, 10]"));
    }
    Ok(v)
}

pub const SOUNDWALK_HEADER: [&str; 16] = [
    "walk_id",
    "participant_id",
    "location_id",
    "traffic",
    "individuals",
    "crowds",
    "nature",
    "other",
    "pleasant",
    "chaotic",
    "vibrant",
    "uneventful",
    "calm",
    "annoying",
    "eventful",
    "monotonous",
];

/// Parses the soundwalk table. The header must name all 13 score columns.
pub fn parse_soundwalk<R: std::io::Read>(
    reader: R,
) -> Result<Parsed<SoundwalkRecord>, IngestError> {
    let table = Table::read(reader)?;
    let walk = table.column("walk_id")?;
    let participant = table.column("participant_id")?;
    let location = table.column("location_id")?;
    let sound_cols = WalkSound::ALL.map(|c| table.column(c.as_str()));
    let perception_cols = Perception::ALL.map(|f| table.column(f.as_str()));
    let sound_cols: Vec<usize> = sound_cols.into_iter().collect::<Result<_, _>>()?;
    let perception_cols: Vec<usize> = perception_cols.into_iter().collect::<Result<_, _>>()?;

    Ok(table.collect(|row| {
        let mut sounds = [0u8; WalkSound::COUNT];
        for (c, &col) in WalkSound::ALL.iter().zip(&sound_cols) {
            sounds[c.index()] = parse_score(&row[col], c.as_str())?;
        }
        let mut perceptions = [0u8; Perception::COUNT];
        for (f, &col) in Perception::ALL.iter().zip(&perception_cols) {
            perceptions[f.index()] = parse_score(&row[col], f.as_str())?;
        }
        Ok(SoundwalkRecord {
            walk_id: row[walk].to_string(),
            participant_id: row[participant].to_string(),
            location_id: row[location].to_string(),
            sounds,
            perceptions,
        })
    }))
}

pub fn write_soundwalk<W: Write>(records: &[SoundwalkRecord], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(SOUNDWALK_HEADER)?;
    for r in records {
        let mut row = vec![
            r.walk_id.clone(),
            r.participant_id.clone(),
            r.location_id.clone(),
        ];
        row.extend(r.sounds.iter().map(u8::to_string));
        row.extend(r.perceptions.iter().map(u8::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
