//! Transcoding chains over a bitrate ladder, model-input assembly, and the
//! end-to-end reference latency of full-reference quality measurement.

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SegmentFeatures;
use crate::matrix::Matrix;

/// Number of per-chunk content columns (`E`, `h`, `L`) ahead of the bitrates.
pub const CONTENT_COLUMNS: usize = 3;

/// Measured averages from a reference deployment, kept for comparison with
/// locally timed runs. Total latency is keyed by stage count.
pub const REFERENCE_TOTAL_LATENCY_SECS: [(usize, f64); 2] = [(1, 1.92), (2, 3.78)];
pub const REFERENCE_FEATURE_TIME_SECS: f64 = 0.323;
pub const REFERENCE_INFERENCE_TIME_SECS: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    pub name: String,
    pub resolution: String,
    pub mbps: f64,
}

impl LadderRung {
    pub fn new(name: impl Into<String>, resolution: impl Into<String>, mbps: f64) -> Self {
        LadderRung {
            name: name.into(),
            resolution: resolution.into(),
            mbps,
        }
    }
}

/// Rungs in strictly increasing bitrate order.
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder(Vec<LadderRung>);

impl Ladder {
    pub fn new(rungs: Vec<LadderRung>) -> Result<Self> {
        if rungs.is_empty() {
            return Err(Error::invalid("ladder has no rungs"));
        }
        for r in &rungs {
            if !(r.mbps.is_finite() && r.mbps > 0.0) {
                return Err(Error::invalid(format!(
                    "rung {} has non-positive bitrate {}",
                    r.name, r.mbps
                )));
            }
        }
        if let Some(w) = rungs.windows(2).find(|w| w[1].mbps <= w[0].mbps) {
            return Err(Error::invalid(format!(
                "ladder bitrates must strictly increase ({} {} Mbps, then {} {} Mbps)",
                w[0].name, w[0].mbps, w[1].name, w[1].mbps
            )));
        }
        Ok(Ladder(rungs))
    }

    /// Reads a JSON array of `{name, resolution, mbps}` objects.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let rungs: Vec<LadderRung> = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::parse(format!("{}: {e}", path.display())))?;
        Self::new(rungs)
    }

    pub fn rungs(&self) -> &[LadderRung] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Rung whose bitrate equals `mbps` up to a relative 1e-9.
    pub fn rung_for(&self, mbps: f64) -> Option<&LadderRung> {
        self.0
            .iter()
            .find(|r| (r.mbps - mbps).abs() <= 1e-9 * r.mbps.max(mbps.abs()))
    }
}

impl Default for Ladder {
    fn default() -> Self {
        default_hls_ladder()
    }
}

/// The twelve-rung HLS ladder, `b_1` (360p, 0.145 Mbps) to `b_12` (2160p,
/// 16.8 Mbps).
pub fn default_hls_ladder() -> Ladder {
    const RUNGS: [(&str, f64); 12] = [
        ("360p", 0.145),
        ("432p", 0.300),
        ("540p", 0.600),
        ("540p", 0.900),
        ("540p", 1.600),
        ("720p", 2.400),
        ("720p", 3.400),
        ("1080p", 4.500),
        ("1080p", 5.800),
        ("1440p", 8.100),
        ("2160p", 11.600),
        ("2160p", 16.800),
    ];
    Ladder(
        RUNGS
            .iter()
            .enumerate()
            .map(|(i, &(res, mbps))| LadderRung::new(format!("b{}", i + 1), res, mbps))
            .collect(),
    )
}

/// Target rungs of an `M`-stage chain in stage order; each later stage
/// produces a strictly lower bitrate.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscodeChain {
    stages: Vec<LadderRung>,
}

impl TranscodeChain {
    pub fn new(stages: Vec<LadderRung>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::invalid("transcoding chain needs at least one stage"));
        }
        if let Some(r) = stages.iter().find(|r| !(r.mbps.is_finite() && r.mbps > 0.0)) {
            return Err(Error::invalid(format!(
                "stage bitrate {} Mbps must be positive",
                r.mbps
            )));
        }
        if let Some(w) = stages.windows(2).find(|w| w[1].mbps >= w[0].mbps) {
            return Err(Error::invalid(format!(
                "chain must step down in bitrate, got {} Mbps after {} Mbps",
                w[1].mbps, w[0].mbps
            )));
        }
        Ok(TranscodeChain { stages })
    }

    /// Resolves each bitrate against `ladder`.
    pub fn from_mbps(bitrates: &[f64], ladder: &Ladder) -> Result<Self> {
        let stages = bitrates
            .iter()
            .map(|&b| {
                ladder.rung_for(b).cloned().ok_or_else(|| {
                    Error::invalid(format!("{b} Mbps is not a rung of the bitrate ladder"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(stages)
    }

    /// Parses a list such as `16.8,2.4` (`,` or `;` separated).
    pub fn parse(spec: &str, ladder: &Ladder) -> Result<Self> {
        Self::from_mbps(&parse_bitrates(spec)?, ladder)
    }

    pub fn stages(&self) -> &[LadderRung] {
        &self.stages
    }

    /// Stage count `M`.
    pub fn len(&self) -> usize {
        self.stages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    pub fn first(&self) -> &LadderRung {
        &self.stages[0]
    }

    pub fn bitrates(&self) -> Vec<f64> {
        self.stages.iter().map(|r| r.mbps).collect()
    }
}

impl fmt::Display for TranscodeChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.stages.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{}", r.mbps)?;
        }
        Ok(())
    }
}

pub fn parse_bitrates(spec: &str) -> Result<Vec<f64>> {
    let values = spec
        .split([',', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::parse(format!("invalid bitrate `{s}` in chain `{spec}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::parse(format!("empty chain `{spec}`")));
    }
    Ok(values)
}

/// Un-normalised model input: `T` rows of `[E, h, L, b̃_1 .. b̃_M]`, bitrates
/// in Mbps.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput(Matrix);

impl ModelInput {
    pub fn from_matrix(matrix: Matrix) -> Result<Self> {
        if matrix.rows() == 0 || matrix.cols() <= CONTENT_COLUMNS {
            return Err(Error::invalid(format!(
                "model input needs at least one row and {} columns, got {}x{}",
                CONTENT_COLUMNS + 1,
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(ModelInput(matrix))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Chunk count `T`.
    pub fn steps(&self) -> usize {
        self.0.rows()
    }

    /// Stage count `M`.
    pub fn stages(&self) -> usize {
        self.0.cols() - CONTENT_COLUMNS
    }

    pub fn width(&self) -> usize {
        self.0.cols()
    }
}

pub fn assemble_model_input(features: &SegmentFeatures, chain: &TranscodeChain) -> Result<ModelInput> {
    if features.chunks.is_empty() {
        return Err(Error::invalid(format!(
            "segment `{}` has no chunk features",
            features.segment_id
        )));
    }
    let bitrates = chain.bitrates();
    let rows: Vec<Vec<f64>> = features
        .chunks
        .iter()
        .map(|c| c.to_array().into_iter().chain(bitrates.iter().copied()).collect())
        .collect();
    ModelInput::from_matrix(Matrix::from_rows(&rows)?)
}

/// Per-stage encode and decode times plus one feature-extraction time.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyProfile {
    pub encode_secs: Vec<f64>,
    pub decode_secs: Vec<f64>,
    pub feature_secs: f64,
}

impl LatencyProfile {
    pub fn new(encode_secs: Vec<f64>, decode_secs: Vec<f64>, feature_secs: f64) -> Result<Self> {
        let all = encode_secs
            .iter()
            .chain(&decode_secs)
            .chain(std::iter::once(&feature_secs));
        if let Some(t) = all.into_iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::invalid(format!("latency {t} s must be non-negative")));
        }
        Ok(LatencyProfile {
            encode_secs,
            decode_secs,
            feature_secs,
        })
    }
}

/// Total latency of measuring quality against the full reference:
/// every stage's encode and decode, plus feature extraction at both ends.
pub fn reference_latency(profile: &LatencyProfile, stages: usize) -> Result<f64> {
    if profile.encode_secs.len() != stages || profile.decode_secs.len() != stages {
        return Err(Error::invalid(format!(
            "expected {stages} encode and decode times, got {} and {}",
            profile.encode_secs.len(),
            profile.decode_secs.len()
        )));
    }
    let coding: f64 = profile
        .encode_secs
        .iter()
        .zip(&profile.decode_secs)
        .map(|(e, d)| e + d)
        .sum();
    Ok(coding + 2.0 * profile.feature_secs)
}
