//! DCT-energy texture features of the luma channel.
//!
//! Each frame is tiled into non-overlapping `w`×`w` blocks (partial tiles at
//! the right and bottom edges are ignored). For every block the weighted sum
//! of absolute AC coefficients gives its texture `H`; frame-level spatial
//! energy `E`, temporal energy `h`, and luminance `L` are block averages
//! normalised by `K·w²`. Frames are then grouped into chunks of `f_c` and
//! averaged, giving the compact per-segment representation the predictor
//! consumes.

mod dct;
mod io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::video_io::{FramePlane, SegmentSource};

pub use dct::{dct2d, idct2d, DctPlan};
pub use io::{read_features, sidecar_path, write_features, write_features_csv, FeatureSidecar, CSV_HEADER};

pub const DEFAULT_BLOCK_SIZE: usize = 32;
pub const DEFAULT_CHUNK_FRAMES: usize = 15;

/// Tiling of a frame into complete `block_size` squares.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    block_size: usize,
    width: usize,
    height: usize,
    blocks_x: usize,
    blocks_y: usize,
}

impl BlockGrid {
    pub fn new(width: usize, height: usize, block_size: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::invalid("block size must be positive"));
        }
        let blocks_x = width / block_size;
        let blocks_y = height / block_size;
        if blocks_x == 0 || blocks_y == 0 {
            return Err(Error::FrameTooSmall {
                width,
                height,
                block_size,
            });
        }
        Ok(BlockGrid {
            block_size,
            width,
            height,
            blocks_x,
            blocks_y,
        })
    }

    pub fn for_frame(frame: &FramePlane, block_size: usize) -> Result<Self> {
        Self::new(frame.width(), frame.height(), block_size)
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn blocks_x(&self) -> usize {
        self.blocks_x
    }

    pub fn blocks_y(&self) -> usize {
        self.blocks_y
    }

    /// Number of complete blocks, `K`.
    pub fn block_count(&self) -> usize {
        self.blocks_x * self.blocks_y
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn normaliser(&self) -> f64 {
        (self.block_count() * self.block_size * self.block_size) as f64
    }

    fn check(&self, frame: &FramePlane) -> Result<()> {
        if (frame.width(), frame.height()) != (self.width, self.height) {
            return Err(Error::invalid(format!(
                "frame is {}x{} but the block grid was built for {}x{}",
                frame.width(),
                frame.height(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }
}

/// Per-frame features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    pub frame_index: usize,
    /// `E`
    pub spatial_energy: f64,
    /// `h`; zero for the first frame of a segment.
    pub temporal_energy: f64,
    /// `L`
    pub luminance: f64,
}

/// Mean features over one chunk of consecutive frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkFeatures {
    pub spatial_energy: f64,
    pub temporal_energy: f64,
    pub luminance: f64,
}

impl ChunkFeatures {
    pub fn to_array(self) -> [f64; 3] {
        [self.spatial_energy, self.temporal_energy, self.luminance]
    }
}

/// Extraction parameters and source geometry recorded next to the chunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub block_size: usize,
    pub chunk_frames: usize,
    pub frame_count: usize,
    pub width: usize,
    pub height: usize,
}

/// Reduced-reference representation of one segment: chunk features in
/// temporal order.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentFeatures {
    pub segment_id: String,
    pub meta: FeatureMeta,
    pub chunks: Vec<ChunkFeatures>,
}

impl SegmentFeatures {
    /// Number of chunks, `T`.
    pub fn chunk_count(&self) -> usize {
        self.chunks.len()
    }
}

/// Texture weights `exp(|((i*j)/w^2)^2 - 1|)`, with the DC position zeroed.
#[derive(Debug, Clone)]
struct TextureWeights(Vec<f64>);

impl TextureWeights {
    fn new(size: usize) -> Self {
        let w2 = (size * size) as f64;
        let mut weights = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                let r = (i * j) as f64 / w2;
                weights.push((r * r - 1.0).abs().exp());
            }
        }
        weights[0] = 0.0;
        TextureWeights(weights)
    }
}

/// Block-level transform state for one block size; cheap to share across
/// threads.
#[derive(Debug, Clone)]
pub struct BlockAnalyzer {
    plan: DctPlan,
    weights: TextureWeights,
}

/// Outcome of transforming one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockEnergy {
    /// `H`
    pub texture: f64,
    /// DC coefficient of the orthonormal DCT-II.
    pub dc: f64,
}

impl BlockAnalyzer {
    pub fn new(block_size: usize) -> Result<Self> {
        Ok(BlockAnalyzer {
            plan: DctPlan::new(block_size)?,
            weights: TextureWeights::new(block_size),
        })
    }

    pub fn block_size(&self) -> usize {
        self.plan.size()
    }

    /// Transforms a row-major block in place of `buf`. The AC coefficients
    /// come from the mean-subtracted block and the DC coefficient is
    /// `mean * w`.
    fn analyze_buf(&self, buf: &mut [f64], scratch: &mut [f64], coeffs: &mut [f64]) -> BlockEnergy {
        let n = self.plan.size();
        let mean = buf.iter().sum::<f64>() / (n * n) as f64;
        buf.iter_mut().for_each(|v| *v -= mean);
        self.plan.forward_into(buf, scratch, coeffs);
        let texture = coeffs
            .iter()
            .zip(&self.weights.0)
            .map(|(c, w)| w * c.abs())
            .sum();
        BlockEnergy {
            texture,
            dc: mean * n as f64,
        }
    }

    pub fn analyze_block(&self, block: &Matrix) -> Result<BlockEnergy> {
        let n = self.plan.size();
        if !block.is_square() || block.rows() != n {
            return Err(Error::invalid(format!(
                "expected {n}x{n} block, got {}x{}",
                block.rows(),
                block.cols()
            )));
        }
        let mut buf = block.as_slice().to_vec();
        let mut scratch = vec![0.0; self.plan.scratch_len()];
        let mut coeffs = vec![0.0; n * n];
        Ok(self.analyze_buf(&mut buf, &mut scratch, &mut coeffs))
    }

    /// Per-block texture (ascending raster order) and the sum of
    /// `sqrt(max(DC, 0))` over all blocks.
    pub fn analyze_frame(&self, frame: &FramePlane, grid: &BlockGrid) -> Result<FrameBlocks> {
        grid.check(frame)?;
        if grid.block_size() != self.block_size() {
            return Err(Error::invalid("block grid and analyzer disagree on block size"));
        }
        let n = self.block_size();
        let mut buf = vec![0.0; n * n];
        let mut scratch = vec![0.0; self.plan.scratch_len()];
        let mut coeffs = vec![0.0; n * n];
        let mut texture = Vec::with_capacity(grid.block_count());
        let mut luma_sum = 0.0;
        for by in 0..grid.blocks_y() {
            for bx in 0..grid.blocks_x() {
                for r in 0..n {
                    let src = &frame.row(by * n + r)[bx * n..(bx + 1) * n];
                    for (d, &s) in buf[r * n..(r + 1) * n].iter_mut().zip(src) {
                        *d = f64::from(s);
                    }
                }
                let e = self.analyze_buf(&mut buf, &mut scratch, &mut coeffs);
                texture.push(e.texture);
                luma_sum += e.dc.max(0.0).sqrt();
            }
        }
        Ok(FrameBlocks { texture, luma_sum })
    }
}

/// Block texture field of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBlocks {
    pub texture: Vec<f64>,
    pub luma_sum: f64,
}

impl FrameBlocks {
    fn to_features(&self, frame_index: usize, previous: Option<&FrameBlocks>, grid: &BlockGrid) -> FrameFeatures {
        let norm = grid.normaliser();
        let spatial_energy = self.texture.iter().sum::<f64>() / norm;
        let temporal_energy = previous.map_or(0.0, |p| {
            self.texture
                .iter()
                .zip(&p.texture)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / norm
        });
        FrameFeatures {
            frame_index,
            spatial_energy,
            temporal_energy,
            luminance: self.luma_sum / norm,
        }
    }
}

/// Texture energy `H` of a single square block.
pub fn block_texture_energy(block: &Matrix) -> Result<f64> {
    if !block.is_square() || block.rows() == 0 {
        return Err(Error::invalid(format!(
            "block must be square and non-empty, got {}x{}",
            block.rows(),
            block.cols()
        )));
    }
    Ok(BlockAnalyzer::new(block.rows())?.analyze_block(block)?.texture)
}

/// Features of `current`, with `h` taken against `previous` when given.
pub fn frame_features(
    current: &FramePlane,
    previous: Option<&FramePlane>,
    grid: &BlockGrid,
) -> Result<FrameFeatures> {
    let analyzer = BlockAnalyzer::new(grid.block_size())?;
    let cur = analyzer.analyze_frame(current, grid)?;
    let prev = previous
        .map(|p| analyzer.analyze_frame(p, grid))
        .transpose()?;
    Ok(cur.to_features(0, prev.as_ref(), grid))
}

/// Averages per-frame features over consecutive runs of `chunk_frames`;
/// a short final run is averaged over the frames it has.
pub fn chunk_features(frames: &[FrameFeatures], chunk_frames: usize) -> Result<Vec<ChunkFeatures>> {
    if chunk_frames == 0 {
        return Err(Error::invalid("frames per chunk must be at least 1"));
    }
    Ok(frames
        .chunks(chunk_frames)
        .map(|chunk| {
            let n = chunk.len() as f64;
            let (e, h, l) = chunk.iter().fold((0.0, 0.0, 0.0), |(e, h, l), f| {
                (e + f.spatial_energy, h + f.temporal_energy, l + f.luminance)
            });
            ChunkFeatures {
                spatial_energy: e / n,
                temporal_energy: h / n,
                luminance: l / n,
            }
        })
        .collect())
}

/// Configured feature extraction over whole segments or frame streams.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    block_size: usize,
    chunk_frames: usize,
    threads: Option<usize>,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        FeatureExtractor {
            block_size: DEFAULT_BLOCK_SIZE,
            chunk_frames: DEFAULT_CHUNK_FRAMES,
            threads: None,
        }
    }
}

impl FeatureExtractor {
    pub fn new(block_size: usize, chunk_frames: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(Error::invalid("block size must be positive"));
        }
        if chunk_frames == 0 {
            return Err(Error::invalid("frames per chunk must be at least 1"));
        }
        Ok(FeatureExtractor {
            block_size,
            chunk_frames,
            threads: None,
        })
    }

    /// Worker count for block analysis; `None` uses the global rayon pool.
    /// Results do not depend on this setting.
    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn chunk_frames(&self) -> usize {
        self.chunk_frames
    }

    pub fn extract(&self, segment_id: &str, segment: &SegmentSource) -> Result<SegmentFeatures> {
        self.extract_frames(segment_id, segment.frames().iter().map(|f| Ok(f.clone())))
    }

    /// Per-frame features of a frame stream, holding at most one batch of
    /// frames in memory.
    pub fn frame_series<I>(&self, frames: I) -> Result<(Vec<FrameFeatures>, BlockGrid)>
    where
        I: IntoIterator<Item = Result<FramePlane>>,
    {
        let pool = match self.threads {
            Some(n) => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build()
                    .map_err(|e| Error::invalid(format!("thread pool: {e}")))?,
            ),
            None => None,
        };
        let analyzer = BlockAnalyzer::new(self.block_size)?;
        let batch_len = self.chunk_frames.max(rayon::current_num_threads());

        let mut iter = frames.into_iter();
        let mut grid: Option<BlockGrid> = None;
        let mut previous: Option<FrameBlocks> = None;
        let mut out = Vec::new();
        let mut batch = Vec::with_capacity(batch_len);
        loop {
            batch.clear();
            for frame in iter.by_ref().take(batch_len) {
                let frame = frame?;
                let g = match grid {
                    Some(g) => g,
                    None => *grid.insert(BlockGrid::for_frame(&frame, self.block_size)?),
                };
                g.check(&frame)?;
                batch.push(frame);
            }
            if batch.is_empty() {
                break;
            }
            let g = grid.expect("grid is set once a frame was read");
            let run = || {
                batch
                    .par_iter()
                    .map(|f| analyzer.analyze_frame(f, &g))
                    .collect::<Result<Vec<_>>>()
            };
            let blocks = match &pool {
                Some(p) => p.install(run)?,
                None => run()?,
            };
            for b in blocks {
                out.push(b.to_features(out.len(), previous.as_ref(), &g));
                previous = Some(b);
            }
        }
        let grid = grid.ok_or_else(|| Error::invalid("segment has no frames"))?;
        Ok((out, grid))
    }

    pub fn extract_frames<I>(&self, segment_id: &str, frames: I) -> Result<SegmentFeatures>
    where
        I: IntoIterator<Item = Result<FramePlane>>,
    {
        let (series, grid) = self.frame_series(frames)?;
        let (width, height) = grid.dimensions();
        Ok(SegmentFeatures {
            segment_id: segment_id.to_owned(),
            meta: FeatureMeta {
                block_size: self.block_size,
                chunk_frames: self.chunk_frames,
                frame_count: series.len(),
                width,
                height,
            },
            chunks: chunk_features(&series, self.chunk_frames)?,
        })
    }
}

/// Chunked features of a whole segment with block size `w` and `f_c`
/// frames per chunk.
pub fn extract_segment_features(
    segment: &SegmentSource,
    block_size: usize,
    chunk_frames: usize,
) -> Result<SegmentFeatures> {
    FeatureExtractor::new(block_size, chunk_frames)?.extract("", segment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video_io::FrameRate;

    fn fps30() -> FrameRate {
        FrameRate::new(30, 1).unwrap()
    }

    #[test]
    fn grid_counts_complete_blocks() {
        let g = BlockGrid::new(100, 70, 32).unwrap();
        assert_eq!((g.blocks_x(), g.blocks_y(), g.block_count()), (3, 2, 6));
        assert!(matches!(
            BlockGrid::new(31, 64, 32).unwrap_err(),
            Error::FrameTooSmall { .. }
        ));
    }

    #[test]
    fn constant_block_has_no_texture() {
        for c in [0.0, 1.0, 100.0, 255.0] {
            let h = block_texture_energy(&Matrix::from_fn(32, 32, |_, _| c)).unwrap();
            assert_eq!(h, 0.0);
        }
    }

    #[test]
    fn constant_frame_features() {
        let frame = FramePlane::filled(64, 64, 100).unwrap();
        let grid = BlockGrid::for_frame(&frame, 32).unwrap();
        let f = frame_features(&frame, None, &grid).unwrap();
        assert_eq!(f.spatial_energy, 0.0);
        assert_eq!(f.temporal_energy, 0.0);
        let expected = 3200f64.sqrt() / 1024.0;
        assert!((f.luminance - expected).abs() < 1e-12);
        assert!((f.luminance - 0.05524).abs() < 1e-5);
    }

    #[test]
    fn identical_frames_have_zero_temporal_energy() {
        let samples: Vec<u8> = (0..64 * 64).map(|i| (i * 37 % 251) as u8).collect();
        let frame = FramePlane::new(64, 64, samples).unwrap();
        let grid = BlockGrid::for_frame(&frame, 32).unwrap();
        let f = frame_features(&frame, Some(&frame), &grid).unwrap();
        assert_eq!(f.temporal_energy, 0.0);
        assert!(f.spatial_energy > 0.0);
    }

    #[test]
    fn single_textured_block_sets_energy() {
        let mut samples = vec![50u8; 64 * 64];
        let mut block = Matrix::zeros(32, 32);
        for r in 0..32 {
            for c in 0..32 {
                let v = ((r * 7 + c * 13) % 200) as u8;
                samples[(32 + r) * 64 + c] = v;
                block.set(r, c, f64::from(v));
            }
        }
        let frame = FramePlane::new(64, 64, samples).unwrap();
        let grid = BlockGrid::for_frame(&frame, 32).unwrap();
        let f = frame_features(&frame, None, &grid).unwrap();
        let hb = block_texture_energy(&block).unwrap();
        assert!((f.spatial_energy - hb / (4.0 * 1024.0)).abs() < 1e-12);
    }

    #[test]
    fn partial_edge_pixels_ignored() {
        let mut samples = vec![10u8; 40 * 33];
        // Noise outside the single complete block.
        for y in 0..33 {
            for x in 32..40 {
                samples[y * 40 + x] = ((x * y) % 255) as u8;
            }
        }
        let frame = FramePlane::new(40, 33, samples).unwrap();
        let grid = BlockGrid::for_frame(&frame, 32).unwrap();
        assert_eq!(grid.block_count(), 1);
        assert_eq!(frame_features(&frame, None, &grid).unwrap().spatial_energy, 0.0);
    }

    #[test]
    fn mismatched_previous_frame() {
        let a = FramePlane::filled(64, 64, 1).unwrap();
        let b = FramePlane::filled(64, 32, 1).unwrap();
        let grid = BlockGrid::for_frame(&a, 32).unwrap();
        assert!(matches!(
            frame_features(&a, Some(&b), &grid).unwrap_err(),
            Error::InvalidArgument(_)
        ));
    }

    #[test]
    fn chunk_means_over_index_series() {
        let frames: Vec<FrameFeatures> = (0..120)
            .map(|i| FrameFeatures {
                frame_index: i,
                spatial_energy: i as f64,
                temporal_energy: 0.0,
                luminance: 1.0,
            })
            .collect();
        let chunks = chunk_features(&frames, 15).unwrap();
        assert_eq!(chunks.len(), 8);
        assert_eq!(chunks[0].spatial_energy, 7.0);
        assert_eq!(chunks[7].spatial_energy, 112.0);
    }

    #[test]
    fn short_final_chunk() {
        let frames: Vec<FrameFeatures> = (0..17)
            .map(|i| FrameFeatures {
                frame_index: i,
                spatial_energy: i as f64,
                temporal_energy: 0.0,
                luminance: 0.0,
            })
            .collect();
        let chunks = chunk_features(&frames, 15).unwrap();
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[1].spatial_energy, 15.5);
    }

    #[test]
    fn identical_frames_segment() {
        let samples: Vec<u8> = (0..64 * 32).map(|i| (i % 97) as u8).collect();
        let frame = FramePlane::new(64, 32, samples).unwrap();
        let seg = SegmentSource::new(vec![frame; 30], fps30()).unwrap();
        let feats = extract_segment_features(&seg, 32, 15).unwrap();
        assert_eq!(feats.chunk_count(), 2);
        assert_eq!(feats.chunks[0], feats.chunks[1]);
        assert_eq!(feats.chunks[0].temporal_energy, 0.0);
        assert_eq!(feats.meta.frame_count, 30);
    }

    #[test]
    fn empty_segment_rejected() {
        let seg = SegmentSource::new(vec![], fps30()).unwrap();
        assert!(matches!(
            extract_segment_features(&seg, 32, 15).unwrap_err(),
            Error::InvalidArgument(_)
        ));
        let one = SegmentSource::new(vec![FramePlane::filled(32, 32, 0).unwrap()], fps30()).unwrap();
        assert!(extract_segment_features(&one, 32, 0).is_err());
    }

    #[test]
    fn small_frame_rejected() {
        let seg = SegmentSource::new(vec![FramePlane::filled(16, 16, 0).unwrap()], fps30()).unwrap();
        assert!(matches!(
            extract_segment_features(&seg, 32, 15).unwrap_err(),
            Error::FrameTooSmall { .. }
        ));
    }
}
