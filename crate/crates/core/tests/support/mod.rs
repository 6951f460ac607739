//! Brute-force reference implementations and seeded generators shared by
//! the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rrq_core::lstm::{LstmModel, LstmParams, ModelHeader, NormStats, MODEL_FILE_VERSION};
use rrq_core::metric::Metric;
use rrq_core::video_io::{FramePlane, FrameRate, SegmentSource};
use rrq_core::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Orthonormal DCT-II straight from the double-sum definition, O(n⁴).
pub fn naive_dct(block: &[f64], n: usize) -> Vec<f64> {
    let scale = |k: usize| if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
    let mut out = vec![0.0; n * n];
    for u in 0..n {
        for v in 0..n {
            let mut acc = 0.0;
            for y in 0..n {
                for x in 0..n {
                    acc += block[y * n + x]
                        * ((2 * y + 1) as f64 * u as f64 * PI / (2 * n) as f64).cos()
                        * ((2 * x + 1) as f64 * v as f64 * PI / (2 * n) as f64).cos();
                }
            }
            out[u * n + v] = scale(u) * scale(v) * acc;
        }
    }
    out
}

/// Weighted AC magnitude sum, term by term, on the naive coefficients.
pub fn naive_texture(coeffs: &[f64], n: usize) -> f64 {
    let w2 = (n * n) as f64;
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i + j == 0 {
                continue;
            }
            let r = (i * j) as f64 / w2;
            sum += (r * r - 1.0).abs().exp() * coeffs[i * n + j].abs();
        }
    }
    sum
}

pub struct NaiveFrame {
    pub textures: Vec<f64>,
    pub dcs: Vec<f64>,
}

pub fn naive_blocks(frame: &FramePlane, n: usize) -> NaiveFrame {
    let (bx, by) = (frame.width() / n, frame.height() / n);
    let mut textures = Vec::new();
    let mut dcs = Vec::new();
    for ky in 0..by {
        for kx in 0..bx {
            let mut block = Vec::with_capacity(n * n);
            for y in 0..n {
                let row = frame.row(ky * n + y);
                block.extend(row[kx * n..kx * n + n].iter().map(|&s| f64::from(s)));
            }
            let c = naive_dct(&block, n);
            textures.push(naive_texture(&c, n));
            dcs.push(c[0]);
        }
    }
    NaiveFrame { textures, dcs }
}

/// `(E, h, L)` of `current` given an optional previous frame.
pub fn naive_frame_features(current: &FramePlane, previous: Option<&FramePlane>, n: usize) -> [f64; 3] {
    let cur = naive_blocks(current, n);
    let norm = (cur.textures.len() * n * n) as f64;
    let e = cur.textures.iter().sum::<f64>() / norm;
    let h = previous.map_or(0.0, |p| {
        let prev = naive_blocks(p, n);
        cur.textures
            .iter()
            .zip(&prev.textures)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / norm
    });
    let l = cur.dcs.iter().map(|d| d.max(0.0).sqrt()).sum::<f64>() / norm;
    [e, h, l]
}

pub fn random_block(rng: &mut impl Rng, n: usize) -> Matrix {
    Matrix::from_fn(n, n, |_, _| rng.gen_range(-128.0..255.0))
}

/// Noise plus a random gradient, so blocks differ in both texture and DC.
pub fn random_frame(rng: &mut impl Rng, width: usize, height: usize, max: u8) -> FramePlane {
    let gx: f64 = rng.gen_range(-1.0..1.0);
    let gy: f64 = rng.gen_range(-1.0..1.0);
    let noise: f64 = rng.gen_range(0.0..0.5);
    let half = f64::from(max) / 2.0;
    let samples = (0..width * height)
        .map(|i| {
            let (x, y) = ((i % width) as f64, (i / width) as f64);
            let smooth = half + half * 0.5 * (gx * x / width as f64 + gy * y / height as f64);
            let v = smooth + noise * half * rng.gen_range(-1.0..1.0);
            v.round().clamp(0.0, f64::from(max)) as u8
        })
        .collect();
    FramePlane::new(width, height, samples).unwrap()
}

pub fn random_segment(rng: &mut impl Rng, width: usize, height: usize, frames: usize) -> SegmentSource {
    let planes = (0..frames).map(|_| random_frame(rng, width, height, 255)).collect();
    SegmentSource::new(planes, FrameRate::new(30, 1).unwrap()).unwrap()
}

pub fn map_samples(frame: &FramePlane, f: impl Fn(u8) -> u8) -> FramePlane {
    FramePlane::new(frame.width(), frame.height(), frame.samples().iter().map(|&s| f(s)).collect()).unwrap()
}

pub fn header(metric: Metric, stages: usize, steps: usize) -> ModelHeader {
    ModelHeader {
        metric,
        stages,
        steps,
        chunk_frames: 15,
        block_size: 32,
        version: MODEL_FILE_VERSION,
    }
}

/// Small model with every parameter drawn uniformly from ±0.5, biases
/// included, so no gate sits in a trivial regime.
pub fn random_small_model(rng: &mut impl Rng, hidden: usize, stages: usize, steps: usize) -> LstmModel {
    let width = stages + 3;
    let len = LstmParams::len_for(hidden, width);
    let params = LstmParams::from_vec(hidden, width, (0..len).map(|_| rng.gen_range(-0.5..0.5)).collect()).unwrap();
    LstmModel::new(header(Metric::Psnr, stages, steps), NormStats::identity(width), params).unwrap()
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.5..1.5))
}

/// Central finite differences of `|raw_output - target|` in every parameter.
pub fn numeric_gradient(model: &LstmModel, x: &Matrix, target: f64, step: f64) -> Vec<f64> {
    let mut probe = model.clone();
    let loss = |m: &LstmModel| (m.forward_raw(x).unwrap() - target).abs();
    (0..model.params.len())
        .map(|i| {
            let orig = probe.params.as_slice()[i];
            probe.params.as_mut_slice()[i] = orig + step;
            let up = loss(&probe);
            probe.params.as_mut_slice()[i] = orig - step;
            let down = loss(&probe);
            probe.params.as_mut_slice()[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Relative error with a denominator floor, so parameters whose gradient is
/// numerically zero compare absolutely.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// One random corruption of a Y4M stream, mostly confined to its header
/// line of `header_len` bytes.
pub fn mutate_y4m(rng: &mut impl Rng, base: &[u8], header_len: usize) -> Vec<u8> {
    let mut bytes = base.to_vec();
    match rng.gen_range(0..6) {
        0 => {
            let i = rng.gen_range(0..header_len);
            bytes[i] = rng.gen();
        }
        1 => {
            let i = rng.gen_range(0..header_len);
            bytes.remove(i);
        }
        2 => {
            let i = rng.gen_range(0..header_len);
            let junk: Vec<u8> = (0..rng.gen_range(1..8)).map(|_| rng.gen_range(b' '..=b'z')).collect();
            bytes.splice(i..i, junk);
        }
        3 => {
            let digits: String = (0..rng.gen_range(1..25)).map(|_| char::from(rng.gen_range(b'0'..=b'9'))).collect();
            let text = String::from_utf8_lossy(&bytes[..header_len]).replace("W16", &format!("W{digits}"));
            bytes.splice(..header_len, text.into_bytes());
        }
        4 => {
            let i = rng.gen_range(header_len..bytes.len());
            bytes.truncate(i);
        }
        _ => {
            let tags = ["C422", "C420p10", "Cmono", "F0:0", "F30:0", "H0", "W-1", "Ixyz", "Q1", "A0:0", "X=1"];
            let tag = tags[rng.gen_range(0..tags.len())];
            bytes.splice(header_len - 1..header_len - 1, format!(" {tag}").into_bytes());
        }
    }
    bytes
}
