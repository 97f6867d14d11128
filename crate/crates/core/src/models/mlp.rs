use rand::Rng;
use serde::{Deserialize, Serialize};

/// Fully connected network with `tanh` hidden layers and a linear output,
/// evaluated on a flat parameter slice. Per layer the slice holds the
/// row-major weight matrix `[out × in]` followed by the bias `[out]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
}

/// Post-activation values of every layer, input included.
#[derive(Clone, Debug, Default)]
pub struct MlpTape {
    pub acts: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Self { sizes }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least one layer")
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        // (offset, in, out)
        let mut off = 0;
        self.sizes.windows(2).map(move |w| {
            let o = off;
            off += w[0] * w[1] + w[1];
            (o, w[0], w[1])
        })
    }

    pub fn param_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn mac_count(&self) -> usize {
        self.sizes.windows(2).map(|w| w[0] * w[1]).sum()
    }

    pub fn hidden_units(&self) -> usize {
        self.sizes[1..self.sizes.len() - 1].iter().sum()
    }

    /// Glorot-uniform weights and zero biases; the output layer is zero when
    /// `zero_output` is set so the network starts as the null residual.
    pub fn init(&self, rng: &mut impl Rng, zero_output: bool) -> Vec<f64> {
        let mut p = vec![0.0; self.param_count()];
        let last = self.sizes.len() - 2;
        for (l, (off, n_in, n_out)) in self.layers().enumerate() {
            if zero_output && l == last {
                continue;
            }
            let a = (6.0 / (n_in + n_out) as f64).sqrt();
            for w in &mut p[off..off + n_in * n_out] {
                *w = rng.random_range(-a..a);
            }
        }
        p
    }

    /// Forward pass recording activations.
    pub fn forward<'t>(&self, p: &[f64], x: &[f64], tape: &'t mut MlpTape) -> &'t [f64] {
        let n_layers = self.sizes.len() - 1;
        tape.acts.resize_with(self.sizes.len(), Vec::new);
        tape.acts[0].clear();
        tape.acts[0].extend_from_slice(x);
        for (l, (off, n_in, n_out)) in self.layers().enumerate() {
            let (prev, rest) = tape.acts.split_at_mut(l + 1);
            let a_in = &prev[l];
            let a_out = &mut rest[0];
            a_out.clear();
            let w = &p[off..off + n_in * n_out];
            let b = &p[off + n_in * n_out..off + n_in * n_out + n_out];
            for j in 0..n_out {
                let row = &w[j * n_in..(j + 1) * n_in];
                let z = b[j] + dot(row, a_in);
                a_out.push(if l + 1 < n_layers { z.tanh() } else { z });
            }
        }
        &tape.acts[n_layers]
    }

    /// Accumulates `∂L/∂θ` into `grad` and writes `∂L/∂x` into `d_in`, given
    /// `∂L/∂output`.
    pub fn backward(&self, p: &[f64], tape: &MlpTape, d_out: &[f64], grad: &mut [f64], d_in: &mut [f64]) {
        let layers: Vec<_> = self.layers().collect();
        let n_layers = layers.len();
        let mut delta = d_out.to_vec();
        let mut next = Vec::new();
        for (l, &(off, n_in, n_out)) in layers.iter().enumerate().rev() {
            if l + 1 < n_layers {
                // through tanh
                for (d, a) in delta.iter_mut().zip(&tape.acts[l + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            let a_in = &tape.acts[l];
            let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            let w = &p[off..off + n_in * n_out];
            next.clear();
            next.resize(n_in, 0.0);
            for j in 0..n_out {
                let dj = delta[j];
                if dj == 0.0 {
                    continue;
                }
                gb[j] += dj;
                let row = &w[j * n_in..(j + 1) * n_in];
                let grow = &mut gw[j * n_in..(j + 1) * n_in];
                for i in 0..n_in {
                    grow[i] += dj * a_in[i];
                    next[i] += dj * row[i];
                }
            }
            std::mem::swap(&mut delta, &mut next);
        }
        d_in.copy_from_slice(&delta);
    }

    /// Forward pass without recording.
    pub fn eval(&self, p: &[f64], x: &[f64]) -> Vec<f64> {
        let mut tape = MlpTape::default();
        self.forward(p, x, &mut tape).to_vec()
    }
}

/// Dot product with four independent accumulators, so the adds pipeline.
pub(super) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn counts() {
        let m = Mlp::new(16, &[122, 122], 12);
        assert_eq!(m.param_count(), 16 * 122 + 122 + 122 * 122 + 122 + 122 * 12 + 12);
        assert_eq!(m.mac_count(), 16 * 122 + 122 * 122 + 122 * 12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = Mlp::new(3, &[4, 5], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = m.init(&mut rng, false);
        let x = [0.3, -0.7, 1.1];
        let c = [0.5, -2.0];
        let loss = |p: &[f64]| m.eval(p, &x).iter().zip(&c).map(|(o, c)| o * c).sum::<f64>();
        let mut tape = MlpTape::default();
        m.forward(&p, &x, &mut tape);
        let mut g = vec![0.0; p.len()];
        let mut dx = [0.0; 3];
        m.backward(&p, &tape, &c, &mut g, &mut dx);
        for i in 0..p.len() {
            let (mut a, mut b) = (p.clone(), p.clone());
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let fd = (loss(&a) - loss(&b)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-8, "{i}: {fd} vs {}", g[i]);
        }
        for i in 0..3 {
            let (mut a, mut b) = (x, x);
            a[i] += 1e-6;
            b[i] -= 1e-6;
            let f = |x: &[f64]| m.eval(&p, x).iter().zip(&c).map(|(o, c)| o * c).sum::<f64>();
            assert!(((f(&a) - f(&b)) / 2e-6 - dx[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_output_layer_gives_zero() {
        let m = Mlp::new(16, &[8, 8], 12);
        let p = m.init(&mut ChaCha8Rng::seed_from_u64(3), true);
        assert!(m.eval(&p, &[0.4; 16]).iter().all(|v| *v == 0.0));
    }
}
