use rand::Rng;

use crate::error::{Error, Result};

/// LSTM gate, in the order gate blocks are stacked inside [`LstmParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Output = 2,
    /// tanh candidate `g`.
    Candidate = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Forget, Gate::Input, Gate::Output, Gate::Candidate];

    pub fn suffix(self) -> &'static str {
        match self {
            Gate::Forget => "f",
            Gate::Input => "i",
            Gate::Output => "o",
            Gate::Candidate => "g",
        }
    }
}

/// Every trainable value of a single-layer LSTM with a scalar affine head,
/// packed in one buffer:
///
/// ```text
/// W   4H x I   input weights, gate blocks f, i, o, g
/// U   4H x H   recurrent weights
/// b   4H       gate biases
/// v   H        head weights
/// c   1        head bias
/// ```
///
/// Gradients use the same type, so optimisers and gradient checks can work on
/// the flat slice.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    hidden: usize,
    input: usize,
    data: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        LstmParams {
            hidden,
            input,
            data: vec![0.0; Self::len_for(hidden, input)],
        }
    }

    pub fn len_for(hidden: usize, input: usize) -> usize {
        4 * hidden * (input + hidden + 1) + hidden + 1
    }

    pub fn from_vec(hidden: usize, input: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != Self::len_for(hidden, input) {
            return Err(Error::invalid(format!(
                "LSTM with hidden={hidden}, input={input} has {} parameters, got {}",
                Self::len_for(hidden, input),
                data.len()
            )));
        }
        Ok(LstmParams {
            hidden,
            input,
            data,
        })
    }

    /// Weights uniform in `±1/sqrt(hidden)`, forget-gate bias 1, other biases 0.
    pub fn init<R: Rng>(hidden: usize, input: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(hidden, input);
        let bound = 1.0 / (hidden as f64).sqrt();
        let (b0, b1) = p.bias_range();
        let last = p.data.len() - 1;
        for (i, v) in p.data.iter_mut().enumerate() {
            if !(b0..b1).contains(&i) && i != last {
                *v = rng.gen_range(-bound..=bound);
            }
        }
        p.bias_mut(Gate::Forget).fill(1.0);
        p
    }

    #[inline]
    pub fn hidden(&self) -> usize {
        self.hidden
    }

    #[inline]
    pub fn input(&self) -> usize {
        self.input
    }

    #[inline]
    fn w_off(&self) -> usize {
        0
    }

    #[inline]
    fn u_off(&self) -> usize {
        4 * self.hidden * self.input
    }

    #[inline]
    fn b_off(&self) -> usize {
        self.u_off() + 4 * self.hidden * self.hidden
    }

    #[inline]
    fn head_off(&self) -> usize {
        self.b_off() + 4 * self.hidden
    }

    fn bias_range(&self) -> (usize, usize) {
        (self.b_off(), self.head_off())
    }

    /// All gate input weights, `4H x I` row-major.
    #[inline]
    pub fn w_all(&self) -> &[f64] {
        &self.data[self.w_off()..self.u_off()]
    }

    #[inline]
    pub fn u_all(&self) -> &[f64] {
        &self.data[self.u_off()..self.b_off()]
    }

    #[inline]
    pub fn b_all(&self) -> &[f64] {
        &self.data[self.b_off()..self.head_off()]
    }

    pub fn w(&self, gate: Gate) -> &[f64] {
        let n = self.hidden * self.input;
        &self.w_all()[gate as usize * n..(gate as usize + 1) * n]
    }

    pub fn u(&self, gate: Gate) -> &[f64] {
        let n = self.hidden * self.hidden;
        &self.u_all()[gate as usize * n..(gate as usize + 1) * n]
    }

    pub fn bias(&self, gate: Gate) -> &[f64] {
        let h = self.hidden;
        &self.b_all()[gate as usize * h..(gate as usize + 1) * h]
    }

    pub fn w_mut(&mut self, gate: Gate) -> &mut [f64] {
        let n = self.hidden * self.input;
        let off = self.w_off() + gate as usize * n;
        &mut self.data[off..off + n]
    }

    pub fn u_mut(&mut self, gate: Gate) -> &mut [f64] {
        let n = self.hidden * self.hidden;
        let off = self.u_off() + gate as usize * n;
        &mut self.data[off..off + n]
    }

    pub fn bias_mut(&mut self, gate: Gate) -> &mut [f64] {
        let h = self.hidden;
        let off = self.b_off() + gate as usize * h;
        &mut self.data[off..off + h]
    }

    pub fn head_weights(&self) -> &[f64] {
        &self.data[self.head_off()..self.head_off() + self.hidden]
    }

    pub fn head_weights_mut(&mut self) -> &mut [f64] {
        let off = self.head_off();
        &mut self.data[off..off + self.hidden]
    }

    pub fn head_bias(&self) -> f64 {
        self.data[self.data.len() - 1]
    }

    pub fn set_head_bias(&mut self, v: f64) {
        let last = self.data.len() - 1;
        self.data[last] = v;
    }

    /// Mutable views of `(W, U, b, v, c)` at once.
    pub(crate) fn split_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64], &mut [f64], &mut f64) {
        let (u_off, b_off, head_off) = (self.u_off(), self.b_off(), self.head_off());
        let hidden = self.hidden;
        let (w, rest) = self.data.split_at_mut(u_off);
        let (u, rest) = rest.split_at_mut(b_off - u_off);
        let (b, rest) = rest.split_at_mut(head_off - b_off);
        let (v, c) = rest.split_at_mut(hidden);
        (w, u, b, v, &mut c[0])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub(crate) fn fill_zero(&mut self) {
        self.data.fill(0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_sizes() {
        let p = LstmParams::zeros(50, 4);
        assert_eq!(p.len(), 4 * 50 * (4 + 50 + 1) + 50 + 1);
        assert_eq!(p.w(Gate::Candidate).len(), 200);
        assert_eq!(p.u(Gate::Output).len(), 2500);
        assert_eq!(p.bias(Gate::Input).len(), 50);
        assert_eq!(p.head_weights().len(), 50);
    }

    #[test]
    fn init_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = LstmParams::init(16, 5, &mut rng);
        let bound = 0.25;
        assert!(p.w_all().iter().chain(p.u_all()).chain(p.head_weights()).all(|v| v.abs() <= bound));
        assert!(p.bias(Gate::Forget).iter().all(|&b| b == 1.0));
        for g in [Gate::Input, Gate::Output, Gate::Candidate] {
            assert!(p.bias(g).iter().all(|&b| b == 0.0));
        }
        assert_eq!(p.head_bias(), 0.0);
    }

    #[test]
    fn split_views_cover_buffer() {
        let mut p = LstmParams::zeros(3, 2);
        {
            let (w, u, b, v, c) = p.split_mut();
            assert_eq!((w.len(), u.len(), b.len(), v.len()), (24, 36, 12, 3));
            *c = 7.0;
            v[2] = 5.0;
        }
        assert_eq!(p.head_bias(), 7.0);
        assert_eq!(p.head_weights()[2], 5.0);
    }
}
