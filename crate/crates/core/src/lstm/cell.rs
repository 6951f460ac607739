//! Forward recurrence and backpropagation through time.

use super::params::LstmParams;
use crate::matrix::Matrix;

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations recorded at every step for the backward pass.
pub(crate) struct Trace {
    hidden: usize,
    /// Per step: activated gates `[f | i | o | g]`, each `H` long.
    gates: Vec<f64>,
    /// Per step cell state `c_t`.
    cells: Vec<f64>,
    /// Per step `tanh(c_t)`.
    cell_tanh: Vec<f64>,
    /// Per step hidden state `h_t`.
    hiddens: Vec<f64>,
    pub output: f64,
}

impl Trace {
    fn step_slice(v: &[f64], width: usize, t: usize) -> &[f64] {
        &v[t * width..(t + 1) * width]
    }

    pub fn last_hidden(&self) -> &[f64] {
        let steps = self.hiddens.len() / self.hidden;
        Self::step_slice(&self.hiddens, self.hidden, steps - 1)
    }
}

/// Runs the recurrence over the rows of `x` from zero state and returns the
/// unclamped head output with the recorded activations.
pub(crate) fn run(p: &LstmParams, x: &Matrix) -> Trace {
    let (hid, inp) = (p.hidden(), p.input());
    let steps = x.rows();
    debug_assert_eq!(x.cols(), inp);
    let mut trace = Trace {
        hidden: hid,
        gates: vec![0.0; steps * 4 * hid],
        cells: vec![0.0; steps * hid],
        cell_tanh: vec![0.0; steps * hid],
        hiddens: vec![0.0; steps * hid],
        output: 0.0,
    };
    let zeros = vec![0.0; hid];
    let (w, u, b) = (p.w_all(), p.u_all(), p.b_all());
    for t in 0..steps {
        let xt = x.row(t);
        let (h_prev, c_prev) = if t == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (
                Trace::step_slice(&trace.hiddens, hid, t - 1),
                Trace::step_slice(&trace.cells, hid, t - 1),
            )
        };
        let mut z = vec![0.0; 4 * hid];
        for (r, zr) in z.iter_mut().enumerate() {
            let wr = &w[r * inp..(r + 1) * inp];
            let ur = &u[r * hid..(r + 1) * hid];
            let mut acc = b[r];
            for (a, v) in wr.iter().zip(xt) {
                acc += a * v;
            }
            for (a, v) in ur.iter().zip(h_prev) {
                acc += a * v;
            }
            *zr = acc;
        }
        let (zf, rest) = z.split_at(hid);
        let (zi, rest) = rest.split_at(hid);
        let (zo, zg) = rest.split_at(hid);
        let mut c = vec![0.0; hid];
        let mut ct = vec![0.0; hid];
        let mut h = vec![0.0; hid];
        let gates = &mut trace.gates[t * 4 * hid..(t + 1) * 4 * hid];
        for k in 0..hid {
            let f = sigmoid(zf[k]);
            let i = sigmoid(zi[k]);
            let o = sigmoid(zo[k]);
            let g = zg[k].tanh();
            gates[k] = f;
            gates[hid + k] = i;
            gates[2 * hid + k] = o;
            gates[3 * hid + k] = g;
            c[k] = f * c_prev[k] + i * g;
            ct[k] = c[k].tanh();
            h[k] = o * ct[k];
        }
        trace.cells[t * hid..(t + 1) * hid].copy_from_slice(&c);
        trace.cell_tanh[t * hid..(t + 1) * hid].copy_from_slice(&ct);
        trace.hiddens[t * hid..(t + 1) * hid].copy_from_slice(&h);
    }
    let h_last = trace.last_hidden();
    trace.output = p.head_bias()
        + p.head_weights()
            .iter()
            .zip(h_last)
            .map(|(a, v)| a * v)
            .sum::<f64>();
    trace
}

/// Adds `d_output * d(output)/d(params)` into `grad`.
pub(crate) fn accumulate(p: &LstmParams, x: &Matrix, trace: &Trace, d_output: f64, grad: &mut LstmParams) {
    if d_output == 0.0 {
        return;
    }
    let (hid, inp) = (p.hidden(), p.input());
    let steps = x.rows();
    let (u, head_w) = (p.u_all(), p.head_weights());
    let (gw, gu, gb, gv, gc) = grad.split_mut();

    *gc += d_output;
    for (g, h) in gv.iter_mut().zip(trace.last_hidden()) {
        *g += d_output * h;
    }

    let mut dh: Vec<f64> = head_w.iter().map(|v| d_output * v).collect();
    let mut dc_next = vec![0.0; hid];
    let mut dz = vec![0.0; 4 * hid];
    let zeros = vec![0.0; hid];
    for t in (0..steps).rev() {
        let gates = &trace.gates[t * 4 * hid..(t + 1) * 4 * hid];
        let ct = Trace::step_slice(&trace.cell_tanh, hid, t);
        let (h_prev, c_prev) = if t == 0 {
            (&zeros[..], &zeros[..])
        } else {
            (
                Trace::step_slice(&trace.hiddens, hid, t - 1),
                Trace::step_slice(&trace.cells, hid, t - 1),
            )
        };
        for k in 0..hid {
            let f = gates[k];
            let i = gates[hid + k];
            let o = gates[2 * hid + k];
            let g = gates[3 * hid + k];
            let d_o = dh[k] * ct[k];
            let dc = dc_next[k] + dh[k] * o * (1.0 - ct[k] * ct[k]);
            dz[k] = dc * c_prev[k] * f * (1.0 - f);
            dz[hid + k] = dc * g * i * (1.0 - i);
            dz[2 * hid + k] = d_o * o * (1.0 - o);
            dz[3 * hid + k] = dc * i * (1.0 - g * g);
            dc_next[k] = dc * f;
        }
        let xt = x.row(t);
        for (r, &d) in dz.iter().enumerate() {
            gb[r] += d;
            for (g, v) in gw[r * inp..(r + 1) * inp].iter_mut().zip(xt) {
                *g += d * v;
            }
            if t > 0 {
                for (g, v) in gu[r * hid..(r + 1) * hid].iter_mut().zip(h_prev) {
                    *g += d * v;
                }
            }
        }
        // dh_{t-1} = U^T dz
        dh.fill(0.0);
        if t > 0 {
            for (r, &d) in dz.iter().enumerate() {
                for (acc, a) in dh.iter_mut().zip(&u[r * hid..(r + 1) * hid]) {
                    *acc += d * a;
                }
            }
        }
    }
}
