//! Feature files: one CSV row per chunk plus a JSON sidecar.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ChunkFeatures, FeatureMeta, SegmentFeatures};
use crate::error::{Error, Result};
use crate::fmt::sig9;

pub const CSV_HEADER: [&str; 5] = ["segment_id", "chunk_index", "E", "h", "L"];

/// Sidecar contents, stored as `<stem>.json` next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub w: usize,
    pub f_c: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub frame_count: usize,
    pub width: usize,
    pub height: usize,
}

impl FeatureSidecar {
    fn from_features(f: &SegmentFeatures) -> Self {
        FeatureSidecar {
            w: f.meta.block_size,
            f_c: f.meta.chunk_frames,
            t: f.chunks.len(),
            frame_count: f.meta.frame_count,
            width: f.meta.width,
            height: f.meta.height,
        }
    }
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes the chunk rows, header included, to any writer.
pub fn write_features_csv<W: Write>(features: &SegmentFeatures, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Stream(e.into());
    wtr.write_record(CSV_HEADER).map_err(csv_err)?;
    for (i, c) in features.chunks.iter().enumerate() {
        wtr.write_record([
            features.segment_id.clone(),
            (i + 1).to_string(),
            sig9(c.spatial_energy),
            sig9(c.temporal_energy),
            sig9(c.luminance),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_features(features: &SegmentFeatures, csv_path: &Path) -> Result<()> {
    let file = File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
    write_features_csv(features, BufWriter::new(file)).map_err(|e| match e {
        Error::Stream(io) => Error::io(csv_path, io),
        other => other,
    })?;

    let side = sidecar_path(csv_path);
    let mut out = BufWriter::new(File::create(&side).map_err(|e| Error::io(&side, e))?);
    serde_json::to_writer_pretty(&mut out, &FeatureSidecar::from_features(features))
        .map_err(|e| Error::io(&side, e.into()))?;
    out.write_all(b"\n").map_err(|e| Error::io(&side, e))?;
    out.flush().map_err(|e| Error::io(&side, e))?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct Row {
    segment_id: String,
    chunk_index: usize,
    #[serde(rename = "E")]
    e: f64,
    h: f64,
    #[serde(rename = "L")]
    l: f64,
}

/// Reads a single-segment feature CSV and its sidecar.
pub fn read_features(csv_path: &Path) -> Result<SegmentFeatures> {
    let file = File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(format!("{}: {e}", csv_path.display())))?
        .clone();
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::parse(format!(
            "{}: expected header `{}`",
            csv_path.display(),
            CSV_HEADER.join(",")
        )));
    }
    let mut segment_id: Option<String> = None;
    let mut chunks = Vec::new();
    for (line, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::parse(format!("{}: {e}", csv_path.display())))?;
        match &segment_id {
            None => segment_id = Some(row.segment_id.clone()),
            Some(id) if *id != row.segment_id => {
                return Err(Error::parse(format!(
                    "{}: mixes segments `{id}` and `{}`",
                    csv_path.display(),
                    row.segment_id
                )))
            }
            _ => {}
        }
        if row.chunk_index != line + 1 {
            return Err(Error::parse(format!(
                "{}: chunk_index {} out of order (expected {})",
                csv_path.display(),
                row.chunk_index,
                line + 1
            )));
        }
        if [row.e, row.h, row.l].iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::parse(format!(
                "{}: chunk {} has a negative or non-finite feature",
                csv_path.display(),
                row.chunk_index
            )));
        }
        chunks.push(ChunkFeatures {
            spatial_energy: row.e,
            temporal_energy: row.h,
            luminance: row.l,
        });
    }
    let segment_id =
        segment_id.ok_or_else(|| Error::parse(format!("{}: no chunk rows", csv_path.display())))?;

    let side = sidecar_path(csv_path);
    let file = File::open(&side).map_err(|e| Error::io(&side, e))?;
    let meta: FeatureSidecar = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::parse(format!("{}: {e}", side.display())))?;
    if meta.t != chunks.len() {
        return Err(Error::parse(format!(
            "{}: sidecar declares T={} but the CSV has {} rows",
            side.display(),
            meta.t,
            chunks.len()
        )));
    }
    Ok(SegmentFeatures {
        segment_id,
        meta: FeatureMeta {
            block_size: meta.w,
            chunk_frames: meta.f_c,
            frame_count: meta.frame_count,
            width: meta.width,
            height: meta.height,
        },
        chunks,
    })
}
