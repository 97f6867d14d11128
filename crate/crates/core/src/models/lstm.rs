use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::dot;
use super::norm::Normalizer;
use super::residual::wrap_with_jacobian;
use super::window::Window;
use super::{loss_slope, rollout_loss, Predictor, Trainable};
use crate::dynamics::MotorSpeeds;
use crate::math::{LearnState, LEARN_DIM};

/// Hidden width of the default recurrent model (≈24.8k parameters).
pub const DEFAULT_LSTM_HIDDEN: usize = 68;

const NET_IN: usize = LEARN_DIM + 4;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// LSTM residual predictor. `h₀ = tanh(W_init ỹ_t + b_init)`, `c₀ = 0`; at
/// each step the cell reads the normalised current prediction and input,
/// and a linear readout of the new hidden state gives the state increment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub hidden: usize,
    pub params: Vec<f64>,
    pub norm: Normalizer,
}

/// Offsets into the flat parameter vector.
struct Layout {
    n: usize,
    w: usize,
    b: usize,
    w_init: usize,
    b_init: usize,
    w_out: usize,
    b_out: usize,
    total: usize,
}

impl Layout {
    fn new(n: usize) -> Self {
        let cols = NET_IN + n;
        let w = 0;
        let b = w + 4 * n * cols;
        let w_init = b + 4 * n;
        let b_init = w_init + n * LEARN_DIM;
        let w_out = b_init + n;
        let b_out = w_out + LEARN_DIM * n;
        Self { n, w, b, w_init, b_init, w_out, b_out, total: b_out + LEARN_DIM }
    }

    fn cols(&self) -> usize {
        NET_IN + self.n
    }
}

#[derive(Clone, Default)]
struct StepTape {
    xh: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    tc: Vec<f64>,
    h: Vec<f64>,
    wrap: Option<[[f64; 3]; 3]>,
}

impl LstmModel {
    pub fn param_count_for(hidden: usize) -> usize {
        Layout::new(hidden).total
    }

    /// Uniform `±1/√fan_in` weights, forget-gate bias 1 and a zero readout,
    /// so the untrained model predicts a constant state.
    pub fn new(hidden: usize, norm: Normalizer, seed: u64) -> Self {
        let l = Layout::new(hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = vec![0.0; l.total];
        let a = 1.0 / (l.cols() as f64).sqrt();
        for v in &mut p[l.w..l.b] {
            *v = rng.random_range(-a..a);
        }
        for v in &mut p[l.b + hidden..l.b + 2 * hidden] {
            *v = 1.0;
        }
        let a = 1.0 / (LEARN_DIM as f64).sqrt();
        for v in &mut p[l.w_init..l.b_init] {
            *v = rng.random_range(-a..a);
        }
        Self { hidden, params: p, norm }
    }

    fn layout(&self) -> Layout {
        Layout::new(self.hidden)
    }

    /// `h₀` for the initial state.
    pub fn initial_hidden(&self, y0: &LearnState) -> Vec<f64> {
        let l = self.layout();
        let p = &self.params;
        let y = y0.to_array();
        let yn: [f64; LEARN_DIM] = std::array::from_fn(|c| (y[c] - self.norm.state_mean[c]) / self.norm.state_std[c]);
        (0..l.n)
            .map(|j| {
                let row = &p[l.w_init + j * LEARN_DIM..l.w_init + (j + 1) * LEARN_DIM];
                (p[l.b_init + j] + dot(row, &yn)).tanh()
            })
            .collect()
    }

    /// One cell step; fills `t` and returns the next state.
    fn cell(&self, y: &[f64; LEARN_DIM], u: &MotorSpeeds, h: &[f64], c: &[f64], t: &mut StepTape) -> [f64; LEARN_DIM] {
        let l = self.layout();
        let (n, cols) = (l.n, l.cols());
        let p = &self.params;
        t.xh.resize(cols, 0.0);
        self.norm.input(y, u, &mut t.xh[..NET_IN]);
        t.xh[NET_IN..].copy_from_slice(h);
        t.c_prev.clear();
        t.c_prev.extend_from_slice(c);
        t.gates.resize(4 * n, 0.0);
        for r in 0..4 * n {
            let row = &p[l.w + r * cols..l.w + (r + 1) * cols];
            let z = p[l.b + r] + dot(row, &t.xh);
            t.gates[r] = if (2 * n..3 * n).contains(&r) { z.tanh() } else { sigmoid(z) };
        }
        t.tc.resize(n, 0.0);
        t.h.resize(n, 0.0);
        let mut c_new = vec![0.0; n];
        for j in 0..n {
            let (i, f, g, o) = (t.gates[j], t.gates[n + j], t.gates[2 * n + j], t.gates[3 * n + j]);
            c_new[j] = f * c[j] + i * g;
            t.tc[j] = c_new[j].tanh();
            t.h[j] = o * t.tc[j];
        }
        let mut next = [0.0; LEARN_DIM];
        for k in 0..LEARN_DIM {
            let row = &p[l.w_out + k * n..l.w_out + (k + 1) * n];
            let o = p[l.b_out + k] + dot(row, &t.h);
            next[k] = y[k] + o * self.norm.delta_scale[k];
        }
        t.wrap = wrap_with_jacobian(&mut next);
        next
    }

    fn c_new(t: &StepTape, n: usize) -> impl Iterator<Item = f64> + '_ {
        (0..n).map(move |j| t.gates[n + j] * t.c_prev[j] + t.gates[j] * t.gates[2 * n + j])
    }
}

impl Predictor for LstmModel {
    fn name(&self) -> String {
        "lstm".into()
    }

    fn predict(&self, y0: &LearnState, inputs: &[MotorSpeeds]) -> Vec<LearnState> {
        let n = self.hidden;
        let mut h = self.initial_hidden(y0);
        let mut c = vec![0.0; n];
        let mut y = y0.to_array();
        let mut t = StepTape::default();
        inputs
            .iter()
            .map(|u| {
                y = self.cell(&y, u, &h, &c, &mut t);
                c = Self::c_new(&t, n).collect();
                h.copy_from_slice(&t.h);
                LearnState::from_array(&y)
            })
            .collect()
    }
}

impl Trainable for LstmModel {
    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn normalizer(&self) -> &Normalizer {
        &self.norm
    }

    fn loss_grad(&self, w: &Window<'_>, horizon: usize, grad: &mut [f64]) -> f64 {
        let l = self.layout();
        let (n, cols) = (l.n, l.cols());
        let p = &self.params;
        let nz = &self.norm;

        let h0 = self.initial_hidden(w.y0);
        let mut tapes = vec![StepTape::default(); horizon];
        let mut ys = Vec::with_capacity(horizon + 1);
        ys.push(w.y0.to_array());
        let mut h = h0.clone();
        let mut c = vec![0.0; n];
        for k in 0..horizon {
            let y = self.cell(&ys[k], &w.inputs[k], &h, &c, &mut tapes[k]);
            c = Self::c_new(&tapes[k], n).collect();
            h.copy_from_slice(&tapes[k].h);
            ys.push(y);
        }
        let loss = rollout_loss(&ys[1..], &w.targets[..horizon], &nz.state_std);

        let mut g_next = [0.0; LEARN_DIM];
        let mut dh_next = vec![0.0; n];
        let mut dc_next = vec![0.0; n];
        let mut dz = vec![0.0; 4 * n];
        let mut dxh = vec![0.0; cols];
        for k in (0..horizon).rev() {
            let t = &tapes[k];
            let slope = loss_slope(&ys[k + 1], &w.targets[k], &nz.state_std, horizon);
            let mut gy: [f64; LEARN_DIM] = std::array::from_fn(|c| g_next[c] + slope[c]);
            if let Some(jw) = &t.wrap {
                let gr = [gy[6], gy[7], gy[8]];
                for j in 0..3 {
                    gy[6 + j] = (0..3).map(|i| jw[i][j] * gr[i]).sum();
                }
            }
            // readout
            let mut dh = dh_next.clone();
            for kk in 0..LEARN_DIM {
                let d = gy[kk] * nz.delta_scale[kk];
                grad[l.b_out + kk] += d;
                for j in 0..n {
                    grad[l.w_out + kk * n + j] += d * t.h[j];
                    dh[j] += d * p[l.w_out + kk * n + j];
                }
            }
            // cell
            for j in 0..n {
                let (i, f, g, o) = (t.gates[j], t.gates[n + j], t.gates[2 * n + j], t.gates[3 * n + j]);
                let dc = dc_next[j] + dh[j] * o * (1.0 - t.tc[j] * t.tc[j]);
                dz[j] = dc * g * i * (1.0 - i);
                dz[n + j] = dc * t.c_prev[j] * f * (1.0 - f);
                dz[2 * n + j] = dc * i * (1.0 - g * g);
                dz[3 * n + j] = dh[j] * t.tc[j] * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            dxh.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..4 * n {
                let d = dz[r];
                grad[l.b + r] += d;
                let row = &p[l.w + r * cols..l.w + (r + 1) * cols];
                let grow = &mut grad[l.w + r * cols..l.w + (r + 1) * cols];
                for q in 0..cols {
                    grow[q] += d * t.xh[q];
                    dxh[q] += d * row[q];
                }
            }
            dh_next.copy_from_slice(&dxh[NET_IN..]);
            g_next = std::array::from_fn(|c| gy[c] + dxh[c] / nz.state_std[c]);
        }
        // initial hidden state
        let y0 = w.y0.to_array();
        let yn: [f64; LEARN_DIM] = std::array::from_fn(|c| (y0[c] - nz.state_mean[c]) / nz.state_std[c]);
        for j in 0..n {
            let d = dh_next[j] * (1.0 - h0[j] * h0[j]);
            grad[l.b_init + j] += d;
            for c in 0..LEARN_DIM {
                grad[l.w_init + j * LEARN_DIM + c] += d * yn[c];
            }
        }
        loss
    }
}
