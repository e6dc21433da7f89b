//! Delimited-text dataset manifests.
//!
//! Columns: `image_path, subject_id, zone_code, lighting, eyewear, landmarks`.
//! `landmarks` is optional; when present it holds `x,y` pairs separated by
//! semicolons. Relative image paths resolve against the manifest's directory.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::zone::{CaptureCondition, Eyewear, GazeZone, Lighting};
use crate::{Error, Result};

pub const MANIFEST_HEADER: [&str; 6] =
    ["image_path", "subject_id", "zone_code", "lighting", "eyewear", "landmarks"];

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub image_path: PathBuf,
    pub subject_id: String,
    pub zone: GazeZone,
    pub condition: CaptureCondition,
    pub landmarks: Option<Vec<(f32, f32)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Default, Clone)]
pub struct SplitRecords {
    pub train: Vec<SampleRecord>,
    pub val: Vec<SampleRecord>,
    pub test: Vec<SampleRecord>,
}

impl SplitRecords {
    pub fn get(&self, split: Split) -> &[SampleRecord] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

pub fn load_manifest(path: &Path) -> Result<Vec<SampleRecord>> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;

    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let expected = &MANIFEST_HEADER[..5];
    if headers.len() < 5 || headers.iter().take(5).ne(expected.iter().copied()) {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("header must start with {}", expected.join(",")),
        });
    }

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        records.push(parse_row(&row, line, &base)?);
    }
    Ok(records)
}

fn parse_row(row: &csv::StringRecord, line: usize, base: &Path) -> Result<SampleRecord> {
    let malformed = |reason: String| Error::MalformedRow { line, reason };
    if row.len() < 5 || row.len() > 6 {
        return Err(malformed(format!("expected 5 or 6 fields, found {}", row.len())));
    }
    let image_path = PathBuf::from(&row[0]);
    if row[0].is_empty() {
        return Err(malformed("empty image_path".into()));
    }
    let image_path = if image_path.is_relative() { base.join(image_path) } else { image_path };
    let subject_id = row[1].to_string();
    if subject_id.is_empty() {
        return Err(malformed("empty subject_id".into()));
    }
    let code: i64 = row[2].parse().map_err(|_| malformed(format!("zone code {:?} is not an integer", &row[2])))?;
    let zone = GazeZone::from_code(code)?;
    let lighting: Lighting = row[3].parse().map_err(malformed)?;
    let eyewear: Eyewear = row[4].parse().map_err(malformed)?;
    let landmarks = match row.get(5) {
        Some(s) if !s.is_empty() => Some(parse_landmarks(s).map_err(malformed)?),
        _ => None,
    };
    Ok(SampleRecord {
        image_path,
        subject_id,
        zone,
        condition: CaptureCondition::new(lighting, eyewear),
        landmarks,
    })
}

fn parse_landmarks(s: &str) -> std::result::Result<Vec<(f32, f32)>, String> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| {
            let (x, y) = pair.split_once(',').ok_or_else(|| format!("landmark {pair:?} is not x,y"))?;
            let x: f32 = x.trim().parse().map_err(|_| format!("bad landmark x {x:?}"))?;
            let y: f32 = y.trim().parse().map_err(|_| format!("bad landmark y {y:?}"))?;
            Ok((x, y))
        })
        .collect()
}

fn format_landmarks(points: &[(f32, f32)]) -> String {
    points.iter().map(|(x, y)| format!("{x},{y}")).collect::<Vec<_>>().join(";")
}

/// Writes records with paths made relative to the manifest directory when possible.
pub fn write_manifest(path: &Path, records: &[SampleRecord]) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    writer.write_record(MANIFEST_HEADER).map_err(|e| csv_err(path, e))?;
    for r in records {
        let rel = r.image_path.strip_prefix(base).unwrap_or(&r.image_path);
        let landmarks = r.landmarks.as_deref().map(format_landmarks).unwrap_or_default();
        writer
            .write_record([
                rel.to_string_lossy().as_ref(),
                r.subject_id.as_str(),
                &r.zone.code().to_string(),
                r.condition.lighting.as_str(),
                r.condition.eyewear.code(),
                &landmarks,
            ])
            .map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Partitions records by their subject's split assignment.
pub fn split_by_subject(records: &[SampleRecord], assignment: &HashMap<String, Split>) -> Result<SplitRecords> {
    let mut out = SplitRecords::default();
    for r in records {
        let split = assignment
            .get(&r.subject_id)
            .ok_or_else(|| Error::UnassignedSubject(r.subject_id.clone()))?;
        match split {
            Split::Train => out.train.push(r.clone()),
            Split::Val => out.val.push(r.clone()),
            Split::Test => out.test.push(r.clone()),
        }
    }
    Ok(out)
}

pub fn subjects(records: &[SampleRecord]) -> BTreeSet<&str> {
    records.iter().map(|r| r.subject_id.as_str()).collect()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::MalformedRow { line: line.unwrap_or(0), reason: format!("{other:?}") },
    }
}
