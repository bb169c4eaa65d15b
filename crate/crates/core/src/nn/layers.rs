//! Layers with explicit forward and backward passes.
//!
//! Weight matrices are stored input-major (`w[i * out + j]` connects input
//! `i` to output `j`) so that zero inputs can be skipped in both passes.

use std::ops::Range;

use super::{sigmoid, Init, ParamLayout};

/// Fully connected affine layer, `y = x W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub input: usize,
    pub output: usize,
    w: Range<usize>,
    b: Range<usize>,
}

impl Dense {
    pub fn new(layout: &mut ParamLayout, name: &str, input: usize, output: usize) -> Self {
        let w = layout.add(
            format!("{name}.kernel"),
            input * output,
            Init::Glorot {
                fan_in: input,
                fan_out: output,
            },
        );
        let b = layout.add(format!("{name}.bias"), output, Init::Zeros);
        Dense { input, output, w, b }
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input);
        let w = &params[self.w.clone()];
        let mut y = params[self.b.clone()].to_vec();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &w[i * self.output..(i + 1) * self.output];
            for (yj, wij) in y.iter_mut().zip(row) {
                *yj += xi * wij;
            }
        }
        y
    }

    /// Accumulate parameter gradients for upstream gradient `dy` and, when
    /// `dx` is given, write the input gradient for the inputs in `dx_range`
    /// into `dx[dx_range]` (other entries are left untouched).
    pub fn backward(
        &self,
        params: &[f64],
        x: &[f64],
        dy: &[f64],
        grad: &mut [f64],
        dx: Option<(&mut [f64], Range<usize>)>,
    ) {
        for (g, d) in grad[self.b.clone()].iter_mut().zip(dy) {
            *g += d;
        }
        let gw = &mut grad[self.w.clone()];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &mut gw[i * self.output..(i + 1) * self.output];
            for (g, d) in row.iter_mut().zip(dy) {
                *g += xi * d;
            }
        }
        if let Some((dx, range)) = dx {
            let w = &params[self.w.clone()];
            for i in range {
                let row = &w[i * self.output..(i + 1) * self.output];
                dx[i] = row.iter().zip(dy).map(|(a, b)| a * b).sum();
            }
        }
    }
}

/// Trainable lookup table of `vocab × dim` vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub vocab: usize,
    pub dim: usize,
    table: Range<usize>,
}

impl Embedding {
    pub fn new(layout: &mut ParamLayout, name: &str, vocab: usize, dim: usize) -> Self {
        let table = layout.add(format!("{name}.table"), vocab * dim, Init::Uniform(0.05));
        Embedding { vocab, dim, table }
    }

    pub fn lookup<'a>(&self, params: &'a [f64], token: u32) -> &'a [f64] {
        let t = &params[self.table.clone()];
        let i = token as usize;
        &t[i * self.dim..(i + 1) * self.dim]
    }

    pub fn backward(&self, token: u32, d: &[f64], grad: &mut [f64]) {
        let t = &mut grad[self.table.clone()];
        let i = token as usize;
        for (g, x) in t[i * self.dim..(i + 1) * self.dim].iter_mut().zip(d) {
            *g += x;
        }
    }
}

/// Single-layer LSTM returning its final hidden state. Gate order in the
/// stacked matrices is input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub input: usize,
    pub hidden: usize,
    w: Range<usize>,
    u: Range<usize>,
    b: Range<usize>,
}

/// Per-step activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct LstmCache {
    xs: Vec<Vec<f64>>,
    /// Gate activations `[i, f, g, o]`, each `hidden` long.
    gates: Vec<Vec<f64>>,
    /// `cs[t + 1]` is the cell state after step `t`; `cs[0]` is zero.
    cs: Vec<Vec<f64>>,
    hs: Vec<Vec<f64>>,
}

impl Lstm {
    pub fn new(layout: &mut ParamLayout, name: &str, input: usize, hidden: usize) -> Self {
        let g = 4 * hidden;
        let w = layout.add(
            format!("{name}.kernel"),
            input * g,
            Init::Glorot {
                fan_in: input,
                fan_out: g,
            },
        );
        let u = layout.add(
            format!("{name}.recurrent_kernel"),
            hidden * g,
            Init::Glorot {
                fan_in: hidden,
                fan_out: g,
            },
        );
        let b = layout.add(format!("{name}.bias"), g, Init::Zeros);
        Lstm { input, hidden, w, u, b }
    }

    /// Set the forget-gate biases to one.
    pub fn init_forget_bias(&self, params: &mut [f64]) {
        let h = self.hidden;
        for x in &mut params[self.b.start + h..self.b.start + 2 * h] {
            *x = 1.0;
        }
    }

    /// Run over `xs` (possibly empty) from a zero state; returns the final
    /// hidden state.
    pub fn forward(&self, params: &[f64], xs: Vec<Vec<f64>>) -> (Vec<f64>, LstmCache) {
        let h = self.hidden;
        let g4 = 4 * h;
        let w = &params[self.w.clone()];
        let u = &params[self.u.clone()];
        let b = &params[self.b.clone()];
        let mut cache = LstmCache {
            cs: vec![vec![0.0; h]],
            hs: vec![vec![0.0; h]],
            ..Default::default()
        };
        for x in &xs {
            let h_prev = cache.hs.last().expect("initial state");
            let c_prev = cache.cs.last().expect("initial state");
            let mut z = b.to_vec();
            for (k, &xk) in x.iter().enumerate() {
                if xk == 0.0 {
                    continue;
                }
                for (zj, wj) in z.iter_mut().zip(&w[k * g4..(k + 1) * g4]) {
                    *zj += xk * wj;
                }
            }
            for (k, &hk) in h_prev.iter().enumerate() {
                if hk == 0.0 {
                    continue;
                }
                for (zj, uj) in z.iter_mut().zip(&u[k * g4..(k + 1) * g4]) {
                    *zj += hk * uj;
                }
            }
            let mut gates = vec![0.0; g4];
            let mut c = vec![0.0; h];
            let mut hn = vec![0.0; h];
            for j in 0..h {
                let i_g = sigmoid(z[j]);
                let f_g = sigmoid(z[h + j]);
                let g_g = z[2 * h + j].tanh();
                let o_g = sigmoid(z[3 * h + j]);
                gates[j] = i_g;
                gates[h + j] = f_g;
                gates[2 * h + j] = g_g;
                gates[3 * h + j] = o_g;
                c[j] = f_g * c_prev[j] + i_g * g_g;
                hn[j] = o_g * c[j].tanh();
            }
            cache.gates.push(gates);
            cache.cs.push(c);
            cache.hs.push(hn);
        }
        cache.xs = xs;
        let last = cache.hs.last().expect("initial state").clone();
        (last, cache)
    }

    /// Backpropagate `dh_last` through time. Returns the gradient of every
    /// input step.
    pub fn backward(&self, params: &[f64], cache: &LstmCache, dh_last: &[f64], grad: &mut [f64]) -> Vec<Vec<f64>> {
        let h = self.hidden;
        let g4 = 4 * h;
        let steps = cache.xs.len();
        let mut dxs = vec![vec![0.0; self.input]; steps];
        if steps == 0 {
            return dxs;
        }
        let w = &params[self.w.clone()];
        let u = &params[self.u.clone()];
        let mut dh = dh_last.to_vec();
        let mut dc = vec![0.0; h];
        let mut dz = vec![0.0; g4];
        for t in (0..steps).rev() {
            let gates = &cache.gates[t];
            let c = &cache.cs[t + 1];
            let c_prev = &cache.cs[t];
            let h_prev = &cache.hs[t];
            let x = &cache.xs[t];
            for j in 0..h {
                let (i_g, f_g, g_g, o_g) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let tc = c[j].tanh();
                let d_o = dh[j] * tc;
                dc[j] += dh[j] * o_g * (1.0 - tc * tc);
                let d_i = dc[j] * g_g;
                let d_g = dc[j] * i_g;
                let d_f = dc[j] * c_prev[j];
                dz[j] = d_i * i_g * (1.0 - i_g);
                dz[h + j] = d_f * f_g * (1.0 - f_g);
                dz[2 * h + j] = d_g * (1.0 - g_g * g_g);
                dz[3 * h + j] = d_o * o_g * (1.0 - o_g);
                dc[j] *= f_g;
            }
            for (gb, d) in grad[self.b.clone()].iter_mut().zip(&dz) {
                *gb += d;
            }
            {
                let gw = &mut grad[self.w.clone()];
                for (k, &xk) in x.iter().enumerate() {
                    if xk == 0.0 {
                        continue;
                    }
                    for (g, d) in gw[k * g4..(k + 1) * g4].iter_mut().zip(&dz) {
                        *g += xk * d;
                    }
                }
            }
            {
                let gu = &mut grad[self.u.clone()];
                for (k, &hk) in h_prev.iter().enumerate() {
                    if hk == 0.0 {
                        continue;
                    }
                    for (g, d) in gu[k * g4..(k + 1) * g4].iter_mut().zip(&dz) {
                        *g += hk * d;
                    }
                }
            }
            for (k, dxk) in dxs[t].iter_mut().enumerate() {
                *dxk = w[k * g4..(k + 1) * g4].iter().zip(&dz).map(|(a, b)| a * b).sum();
            }
            for (k, dhk) in dh.iter_mut().enumerate() {
                *dhk = u[k * g4..(k + 1) * g4].iter().zip(&dz).map(|(a, b)| a * b).sum();
            }
        }
        dxs
    }
}

/// 1-D convolution over a sequence of `channels`-wide vectors with "valid"
/// padding, followed by ReLU and global max pooling over time.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub channels: usize,
    pub filters: usize,
    pub kernel: usize,
    w: Range<usize>,
    b: Range<usize>,
}

/// Winning time step of each filter after pooling; `None` when the filter's
/// pooled activation is zero (ReLU-inactive everywhere or no windows).
#[derive(Debug, Clone, Default)]
pub struct ConvCache {
    argmax: Vec<Option<usize>>,
}

impl Conv1d {
    pub fn new(layout: &mut ParamLayout, name: &str, channels: usize, filters: usize, kernel: usize) -> Self {
        let w = layout.add(
            format!("{name}.kernel"),
            kernel * channels * filters,
            Init::Glorot {
                fan_in: kernel * channels,
                fan_out: filters,
            },
        );
        let b = layout.add(format!("{name}.bias"), filters, Init::Zeros);
        Conv1d {
            channels,
            filters,
            kernel,
            w,
            b,
        }
    }

    fn window(&self, params: &[f64], xs: &[Vec<f64>], t: usize) -> Vec<f64> {
        let w = &params[self.w.clone()];
        let mut y = params[self.b.clone()].to_vec();
        for k in 0..self.kernel {
            for (c, &xc) in xs[t + k].iter().enumerate() {
                if xc == 0.0 {
                    continue;
                }
                let row = (k * self.channels + c) * self.filters;
                for (yj, wj) in y.iter_mut().zip(&w[row..row + self.filters]) {
                    *yj += xc * wj;
                }
            }
        }
        y
    }

    pub fn forward(&self, params: &[f64], xs: &[Vec<f64>]) -> (Vec<f64>, ConvCache) {
        let mut pooled = vec![0.0; self.filters];
        let mut argmax = vec![None; self.filters];
        if xs.len() >= self.kernel {
            for t in 0..=xs.len() - self.kernel {
                let y = self.window(params, xs, t);
                for j in 0..self.filters {
                    if y[j] > pooled[j] {
                        pooled[j] = y[j];
                        argmax[j] = Some(t);
                    }
                }
            }
        }
        (pooled, ConvCache { argmax })
    }

    /// Returns the gradient of every input step.
    pub fn backward(
        &self,
        params: &[f64],
        xs: &[Vec<f64>],
        cache: &ConvCache,
        dy: &[f64],
        grad: &mut [f64],
    ) -> Vec<Vec<f64>> {
        let w = &params[self.w.clone()];
        let mut dxs = vec![vec![0.0; self.channels]; xs.len()];
        for j in 0..self.filters {
            let Some(t) = cache.argmax[j] else { continue };
            let d = dy[j];
            grad[self.b.start + j] += d;
            for k in 0..self.kernel {
                for c in 0..self.channels {
                    let idx = (k * self.channels + c) * self.filters + j;
                    grad[self.w.start + idx] += xs[t + k][c] * d;
                    dxs[t + k][c] += w[idx] * d;
                }
            }
        }
        dxs
    }
}
