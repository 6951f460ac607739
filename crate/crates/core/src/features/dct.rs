//! Orthonormal 2-D DCT-II, computed separably from a cached cosine basis.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// One even/odd split of a length-`2 * half` transform. Even outputs come
/// from a half-length transform of the folded sums, odd outputs from
/// `odd[n * half + j] = cos(pi * (2n + 1) * (2j + 1) / (4 * half))` applied
/// to the folded differences.
#[derive(Debug, Clone)]
struct Split {
    half: usize,
    odd: Vec<f64>,
}

/// Precomputed state for `size`×`size` transforms.
///
/// `basis[k * size + n] = alpha(k) * cos(pi * (2n + 1) * k / (2 * size))`
/// with `alpha(0) = sqrt(1/size)` and `alpha(k) = sqrt(2/size)` otherwise,
/// so the forward transform is `C * X * C^T` and the inverse `C^T * Y * C`.
/// The forward pass halves the length recursively while it is even and
/// finishes with a direct product on the odd remainder.
#[derive(Debug, Clone)]
pub struct DctPlan {
    size: usize,
    basis: Vec<f64>,
    splits: Vec<Split>,
    /// Unscaled cosine matrix for the final odd length.
    tail: Vec<f64>,
    tail_len: usize,
    alpha: Vec<f64>,
}

fn cosines(len: usize, row: impl Fn(usize) -> usize) -> Vec<f64> {
    let m = len as f64;
    (0..len * len)
        .map(|j| (PI * (2 * (j % len) + 1) as f64 * row(j / len) as f64 / (2.0 * m)).cos())
        .collect()
}

impl DctPlan {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("DCT size must be positive"));
        }
        let n = size as f64;
        let alpha: Vec<f64> = (0..size)
            .map(|k| if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() })
            .collect();
        let basis = cosines(size, |k| k)
            .iter()
            .enumerate()
            .map(|(j, c)| alpha[j / size] * c)
            .collect();
        let mut splits = Vec::new();
        let mut len = size;
        while len.is_multiple_of(2) {
            let half = len / 2;
            let m = len as f64;
            let odd = (0..half * half)
                .map(|j| (PI * (2 * (j / half) + 1) as f64 * (2 * (j % half) + 1) as f64 / (2.0 * m)).cos())
                .collect();
            splits.push(Split { half, odd });
            len = half;
        }
        Ok(DctPlan {
            size,
            basis,
            splits,
            tail: cosines(len, |k| k),
            tail_len: len,
            alpha,
        })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    /// Minimum length of the `scratch` buffer taken by [`forward_into`](Self::forward_into)
    /// and [`inverse_into`](Self::inverse_into).
    pub fn scratch_len(&self) -> usize {
        self.size * self.size + 5 * self.size
    }

    /// Unscaled 1-D DCT-II of `input` into `out`, both of length
    /// `2 * splits[depth].half` (or `tail_len` past the last split).
    fn forward_1d(&self, depth: usize, input: &[f64], out: &mut [f64], work: &mut [f64]) {
        let Some(split) = self.splits.get(depth) else {
            let len = self.tail_len;
            for (k, o) in out.iter_mut().enumerate() {
                *o = self.tail[k * len..(k + 1) * len].iter().zip(input).map(|(c, x)| c * x).sum();
            }
            return;
        };
        let h = split.half;
        let m = 2 * h;
        let (folded, rest) = work.split_at_mut(m);
        let (even, rest) = rest.split_at_mut(h);
        let (odd, rest) = rest.split_at_mut(h);
        for i in 0..h {
            let (a, b) = (input[i], input[m - 1 - i]);
            folded[i] = a + b;
            folded[h + i] = a - b;
        }
        self.forward_1d(depth + 1, &folded[..h], even, rest);
        odd.fill(0.0);
        for (i, &d) in folded[h..].iter().enumerate() {
            for (o, c) in odd.iter_mut().zip(&split.odd[i * h..(i + 1) * h]) {
                *o += d * c;
            }
        }
        for j in 0..h {
            out[2 * j] = even[j];
            out[2 * j + 1] = odd[j];
        }
    }

    /// Forward transform of a row-major block into `out` (`size * size`
    /// values). `scratch` must hold [`scratch_len`](Self::scratch_len) values.
    pub fn forward_into(&self, input: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        let n = self.size;
        debug_assert_eq!(input.len(), n * n);
        let (mid, rest) = scratch.split_at_mut(n * n);
        let (line, work) = rest.split_at_mut(n);
        // Rows, stored transposed: mid[k][r] = alpha(k) * DCT(row r)[k]
        for r in 0..n {
            self.forward_1d(0, &input[r * n..(r + 1) * n], line, work);
            for (k, v) in line.iter().enumerate() {
                mid[k * n + r] = self.alpha[k] * v;
            }
        }
        // Columns: each row of `mid` is one column of the row-transformed block.
        for c in 0..n {
            self.forward_1d(0, &mid[c * n..(c + 1) * n], line, work);
            for (u, v) in line.iter().enumerate() {
                out[u * n + c] = self.alpha[u] * v;
            }
        }
    }

    /// Inverse transform (DCT-III with the same normalisation).
    pub fn inverse_into(&self, input: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        let n = self.size;
        debug_assert_eq!(input.len(), n * n);
        // Rows: scratch[r][i] = sum_k y[r][k] * C[k][i]
        for r in 0..n {
            let dst = &mut scratch[r * n..(r + 1) * n];
            dst.fill(0.0);
            for k in 0..n {
                let y = input[r * n + k];
                for (d, c) in dst.iter_mut().zip(&self.basis[k * n..(k + 1) * n]) {
                    *d += y * c;
                }
            }
        }
        // Columns: out[i][c] = sum_k C[k][i] * scratch[k][c]
        for i in 0..n {
            let dst = &mut out[i * n..(i + 1) * n];
            dst.fill(0.0);
            for k in 0..n {
                let coeff = self.basis[k * n + i];
                let src = &scratch[k * n..(k + 1) * n];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += coeff * s;
                }
            }
        }
    }

    pub fn forward(&self, block: &Matrix) -> Result<Matrix> {
        self.check(block)?;
        let n = self.size;
        let mut scratch = vec![0.0; self.scratch_len()];
        let mut out = Matrix::zeros(n, n);
        self.forward_into(block.as_slice(), &mut scratch, out.as_mut_slice());
        Ok(out)
    }

    pub fn inverse(&self, coeffs: &Matrix) -> Result<Matrix> {
        self.check(coeffs)?;
        let n = self.size;
        let mut scratch = vec![0.0; n * n];
        let mut out = Matrix::zeros(n, n);
        self.inverse_into(coeffs.as_slice(), &mut scratch, out.as_mut_slice());
        Ok(out)
    }

    fn check(&self, block: &Matrix) -> Result<()> {
        if !block.is_square() || block.rows() != self.size {
            return Err(Error::invalid(format!(
                "expected {0}x{0} block, got {1}x{2}",
                self.size,
                block.rows(),
                block.cols()
            )));
        }
        Ok(())
    }
}

/// Orthonormal 2-D DCT-II of a square block.
pub fn dct2d(block: &Matrix) -> Result<Matrix> {
    if !block.is_square() || block.rows() == 0 {
        return Err(Error::invalid(format!(
            "DCT input must be square and non-empty, got {}x{}",
            block.rows(),
            block.cols()
        )));
    }
    DctPlan::new(block.rows())?.forward(block)
}

/// Inverse of [`dct2d`].
pub fn idct2d(coeffs: &Matrix) -> Result<Matrix> {
    if !coeffs.is_square() || coeffs.rows() == 0 {
        return Err(Error::invalid(format!(
            "IDCT input must be square and non-empty, got {}x{}",
            coeffs.rows(),
            coeffs.cols()
        )));
    }
    DctPlan::new(coeffs.rows())?.inverse(coeffs)
}
