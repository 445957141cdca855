//! Fully-connected network with ReLU hidden layers and an identity output
//! layer. Heads apply their own output activations.
//!
//! Parameters live in one flat `f32` vector so the optimizer can treat the
//! whole network as a single group. Layer `l` stores its weight matrix
//! row-major (`out x in`) followed by its bias.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows per parallel work item. Fixed so reductions are independent of the
/// thread count.
const CHUNK: usize = 64;

#[derive(Debug, Clone)]
pub struct Mlp {
    dims: Vec<usize>,
    params: Vec<f32>,
    generation: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims
            && self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Cached activations of a batched forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    generation: u64,
    rows: usize,
    /// `acts[0]` is the input, `acts[l]` the post-activation output of layer `l`.
    acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("at least the input")
    }
}

#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub inputs: Vec<f64>,
    /// `None` when weight gradients were not requested.
    pub params: Option<Vec<f64>>,
}

pub fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Zero weights and biases.
    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2, "an MLP needs input and output widths");
        Self {
            dims: dims.to_vec(),
            params: vec![0.0; param_count(dims)],
            generation: 0,
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn uniform(dims: &[usize], rng: &mut impl Rng) -> Self {
        let mut mlp = Self::zeros(dims);
        let mut offset = 0;
        for w in dims.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for p in &mut mlp.params[offset..offset + w[0] * w[1]] {
                *p = rng.random_range(-bound..bound) as f32;
            }
            offset += w[0] * w[1] + w[1];
        }
        mlp
    }

    pub fn from_params(dims: &[usize], params: Vec<f32>) -> Result<Self> {
        if dims.len() < 2 || params.len() != param_count(dims) {
            return Err(Error::InvalidScene(format!(
                "mlp with dims {dims:?} needs {} parameters, got {}",
                param_count(dims),
                params.len()
            )));
        }
        Ok(Self {
            dims: dims.to_vec(),
            params,
            generation: 0,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    /// Mutable access to the parameters. Invalidates outstanding caches.
    pub fn params_mut(&mut self) -> &mut [f32] {
        self.generation += 1;
        &mut self.params
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.dims.len());
        let mut o = 0;
        for w in self.dims.windows(2) {
            offs.push(o);
            o += w[0] * w[1] + w[1];
        }
        offs
    }

    /// Bias slice of the output layer.
    pub fn output_bias_mut(&mut self) -> &mut [f32] {
        let out = self.output_dim();
        let len = self.params.len();
        self.generation += 1;
        &mut self.params[len - out..]
    }

    /// Single-sample forward.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, MlpCache)> {
        let cache = self.forward_batch(input, 1)?;
        Ok((cache.output().to_vec(), cache))
    }

    /// Forward over `rows` inputs laid out row-major.
    pub fn forward_batch(&self, inputs: &[f64], rows: usize) -> Result<MlpCache> {
        let din = self.input_dim();
        if inputs.len() != rows * din {
            return Err(Error::DecoderInputShape {
                expected: rows * din,
                got: inputs.len(),
            });
        }
        let weights: Vec<f64> = self.params.iter().map(|v| *v as f64).collect();
        let offs = self.layer_offsets();
        let n_layers = self.dims.len() - 1;
        let mut acts = vec![inputs.to_vec()];
        for l in 0..n_layers {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let w = &weights[offs[l]..offs[l] + fan_in * fan_out];
            let b = &weights[offs[l] + fan_in * fan_out..offs[l] + fan_in * fan_out + fan_out];
            let relu = l + 1 < n_layers;
            let prev = &acts[l];
            let mut next = vec![0.0; rows * fan_out];
            next.par_chunks_mut(CHUNK * fan_out)
                .zip(prev.par_chunks(CHUNK * fan_in))
                .for_each(|(out, inp)| {
                    for (o_row, i_row) in out.chunks_mut(fan_out).zip(inp.chunks(fan_in)) {
                        for j in 0..fan_out {
                            let wr = &w[j * fan_in..(j + 1) * fan_in];
                            let mut acc = b[j];
                            for k in 0..fan_in {
                                acc += wr[k] * i_row[k];
                            }
                            o_row[j] = if relu && acc < 0.0 { 0.0 } else { acc };
                        }
                    }
                });
            acts.push(next);
        }
        Ok(MlpCache {
            generation: self.generation,
            rows,
            acts,
        })
    }

    /// Reverse-mode gradients for a cached batch. `upstream` is `rows x out`.
    pub fn backward(&self, cache: &MlpCache, upstream: &[f64], with_params: bool) -> Result<MlpGrads> {
        if cache.generation != self.generation
            || cache.acts.len() != self.dims.len()
            || cache.acts[0].len() != cache.rows * self.input_dim()
        {
            return Err(Error::GradientContextMismatch);
        }
        let rows = cache.rows;
        if upstream.len() != rows * self.output_dim() {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient of {} values for {rows}x{}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let weights: Vec<f64> = self.params.iter().map(|v| *v as f64).collect();
        let offs = self.layer_offsets();
        let n_layers = self.dims.len() - 1;
        let n_chunks = rows.div_ceil(CHUNK).max(1);

        // per chunk: input gradient rows and (optionally) a partial parameter gradient
        let results: Vec<(Vec<f64>, Vec<f64>)> = (0..n_chunks)
            .into_par_iter()
            .map(|chunk| {
                let r0 = chunk * CHUNK;
                let r1 = ((chunk + 1) * CHUNK).min(rows);
                let mut pgrad = if with_params {
                    vec![0.0; weights.len()]
                } else {
                    Vec::new()
                };
                let out_dim = self.output_dim();
                let mut delta: Vec<f64> = upstream[r0 * out_dim..r1 * out_dim].to_vec();
                for l in (0..n_layers).rev() {
                    let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
                    let w = &weights[offs[l]..offs[l] + fan_in * fan_out];
                    let input = &cache.acts[l][r0 * fan_in..r1 * fan_in];
                    if with_params {
                        let (gw, rest) = pgrad[offs[l]..].split_at_mut(fan_in * fan_out);
                        let gb = &mut rest[..fan_out];
                        for (d_row, i_row) in delta.chunks(fan_out).zip(input.chunks(fan_in)) {
                            for j in 0..fan_out {
                                let d = d_row[j];
                                if d == 0.0 {
                                    continue;
                                }
                                gb[j] += d;
                                let gr = &mut gw[j * fan_in..(j + 1) * fan_in];
                                for k in 0..fan_in {
                                    gr[k] += d * i_row[k];
                                }
                            }
                        }
                    }
                    let mut prev = vec![0.0; (r1 - r0) * fan_in];
                    for (p_row, d_row) in prev.chunks_mut(fan_in).zip(delta.chunks(fan_out)) {
                        for j in 0..fan_out {
                            let d = d_row[j];
                            if d == 0.0 {
                                continue;
                            }
                            let wr = &w[j * fan_in..(j + 1) * fan_in];
                            for k in 0..fan_in {
                                p_row[k] += d * wr[k];
                            }
                        }
                    }
                    if l > 0 {
                        // ReLU on the layer below
                        for (p, a) in prev.iter_mut().zip(input) {
                            if *a <= 0.0 {
                                *p = 0.0;
                            }
                        }
                    }
                    delta = prev;
                }
                (delta, pgrad)
            })
            .collect();

        let mut inputs = Vec::with_capacity(rows * self.input_dim());
        let mut params = if with_params {
            Some(vec![0.0; weights.len()])
        } else {
            None
        };
        for (d, p) in results {
            inputs.extend_from_slice(&d);
            if let Some(acc) = params.as_mut() {
                for (a, v) in acc.iter_mut().zip(&p) {
                    *a += v;
                }
            }
        }
        inputs.truncate(rows * self.input_dim());
        Ok(MlpGrads { inputs, params })
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|v| v.is_finite())
    }
}
