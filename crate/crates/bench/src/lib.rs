//! Seeded synthetic inputs for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rrq_core::lstm::{LstmModel, LstmParams, ModelHeader, NormStats, MODEL_FILE_VERSION};
use rrq_core::metric::Metric;
use rrq_core::transcode::ModelInput;
use rrq_core::video_io::{FramePlane, FrameRate, SegmentSource};
use rrq_core::Matrix;

pub fn random_block(size: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(size, size, |_, _| rng.gen_range(0.0..255.0))
}

/// A textured frame drifting one pixel per frame, with mild noise.
pub fn moving_frame(width: usize, height: usize, index: usize, rng: &mut impl Rng) -> FramePlane {
    let samples = (0..height)
        .flat_map(|y| (0..width).map(move |x| (x, y)))
        .map(|(x, y)| {
            let u = (x + index) as f64 * 0.07;
            let v = y as f64 * 0.05;
            let base = 128.0 + 60.0 * u.sin() * v.cos() + 20.0 * (0.3 * u + 0.2 * v).sin();
            (base + rng.gen_range(-8.0..8.0)).clamp(0.0, 255.0) as u8
        })
        .collect();
    FramePlane::new(width, height, samples).expect("dimensions match sample count")
}

pub fn synthetic_segment(width: usize, height: usize, frames: usize, seed: u64) -> SegmentSource {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planes = (0..frames).map(|i| moving_frame(width, height, i, &mut rng)).collect();
    SegmentSource::new(planes, FrameRate::new(30, 1).expect("non-zero rate")).expect("uniform frames")
}

/// Randomly initialised VMAF model with `hidden` cells over `steps` chunks
/// and `stages` bitrates.
pub fn random_model(hidden: usize, stages: usize, steps: usize, seed: u64) -> LstmModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = stages + 3;
    let params = LstmParams::init(hidden, width, &mut rng);
    let header = ModelHeader {
        metric: Metric::Vmaf,
        stages,
        steps,
        chunk_frames: 15,
        block_size: 32,
        version: MODEL_FILE_VERSION,
    };
    LstmModel::new(header, NormStats::identity(width), params).expect("consistent shapes")
}

pub fn random_input(stages: usize, steps: usize, seed: u64) -> ModelInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = Matrix::from_fn(steps, stages + 3, |_, _| rng.gen_range(-1.0..1.0));
    ModelInput::from_matrix(m).expect("at least one stage")
}
