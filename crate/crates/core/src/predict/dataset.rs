//! Ground-truth ingestion and the per-video train/test split.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use log::warn;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::features::{read_features, SegmentFeatures};
use crate::metric::Metric;
use crate::transcode::{parse_bitrates, Ladder, TranscodeChain};

pub const GROUND_TRUTH_HEADER: [&str; 4] = ["segment_id", "chain", "metric", "value"];

/// One labelled (segment, chain, metric) observation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub segment_id: String,
    pub features: SegmentFeatures,
    pub chain: TranscodeChain,
    pub metric: Metric,
    pub ground_truth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedRow {
    /// 1-based CSV line, counting the header as line 1.
    pub line: u64,
    pub segment_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub records: Vec<EvalRecord>,
    pub skipped: Vec<SkippedRow>,
}

#[derive(Debug, Deserialize)]
struct GroundTruthRow {
    segment_id: String,
    chain: String,
    metric: String,
    value: f64,
}

/// Joins ground-truth rows with `<features_dir>/<segment_id>.csv`. Rows
/// whose features are missing, whose chain is not a valid ladder chain, or
/// whose value falls outside the metric range are skipped and reported.
pub fn ingest_dataset(features_dir: &Path, ground_truth_csv: &Path, ladder: &Ladder) -> Result<Ingested> {
    let file = File::open(ground_truth_csv).map_err(|e| Error::io(ground_truth_csv, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let display = ground_truth_csv.display();
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(format!("{display}: {e}")))?
        .clone();
    if headers.iter().ne(GROUND_TRUTH_HEADER) {
        return Err(Error::parse(format!(
            "{display}: expected header `{}`, found `{}`",
            GROUND_TRUTH_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut cache: HashMap<String, Option<SegmentFeatures>> = HashMap::new();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(Error::parse(format!("{display}: {e}"))),
        }
        let line = record.position().map_or(0, csv::Position::line);
        let row: GroundTruthRow = record
            .deserialize(Some(&headers))
            .map_err(|e| Error::parse(format!("{display}:{line}: {e}")))?;
        let mut skip = |reason: String| {
            warn!("{display}:{line}: skipping `{}`: {reason}", row.segment_id);
            skipped.push(SkippedRow {
                line,
                segment_id: row.segment_id.clone(),
                reason,
            });
        };
        let metric: Metric = match row.metric.parse() {
            Ok(m) => m,
            Err(e) => {
                skip(e.to_string());
                continue;
            }
        };
        if !metric.contains(row.value) {
            let (lo, hi) = metric.range();
            skip(format!("{metric} value {} outside [{lo}, {hi}]", row.value));
            continue;
        }
        let chain = match parse_bitrates(&row.chain).and_then(|b| TranscodeChain::from_mbps(&b, ladder)) {
            Ok(c) => c,
            Err(e) => {
                skip(e.to_string());
                continue;
            }
        };
        let features = cache
            .entry(row.segment_id.clone())
            .or_insert_with(|| {
                let path = features_dir.join(format!("{}.csv", row.segment_id));
                match read_features(&path) {
                    Ok(f) => Some(f),
                    Err(e) => {
                        warn!("{}: {e}", path.display());
                        None
                    }
                }
            })
            .clone();
        let Some(features) = features else {
            skip("no readable feature file for segment".into());
            continue;
        };
        records.push(EvalRecord {
            segment_id: row.segment_id,
            features,
            chain,
            metric,
            ground_truth: row.value,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no ground-truth row in {display} joined a feature file ({} skipped)",
            skipped.len()
        )));
    }
    Ok(Ingested { records, skipped })
}

/// Source-video identity of a segment: the part of its id before the first
/// `#`, or the whole id.
pub fn source_key(segment_id: &str) -> &str {
    segment_id.split_once('#').map_or(segment_id, |(k, _)| k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Train,
    Test,
}

/// Deterministic per-video split: every segment of a source video lands on
/// the same side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub seed: u64,
    pub train_fraction: f64,
}

impl Default for Split {
    fn default() -> Self {
        Split {
            seed: 0,
            train_fraction: 0.8,
        }
    }
}

impl Split {
    pub fn new(seed: u64, train_fraction: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(Error::invalid("train fraction must lie in [0, 1]"));
        }
        Ok(Split { seed, train_fraction })
    }

    pub fn side(&self, segment_id: &str) -> Side {
        let u = (seeded_hash(self.seed, source_key(segment_id).as_bytes()) >> 11) as f64
            / (1u64 << 53) as f64;
        if u < self.train_fraction {
            Side::Train
        } else {
            Side::Test
        }
    }
}

/// FNV-1a over the seed and key, finished with the splitmix64 mixer.
fn seeded_hash(seed: u64, key: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for &b in seed.to_le_bytes().iter().chain(key) {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}
