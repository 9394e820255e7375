//! Tiny trainable text encoder: token embedding, affine projection, tanh,
//! inverted dropout, mean pooling and L2 normalization.

use std::collections::HashMap;

use rand::distributions::{Distribution, Uniform};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Rng};

pub const UNKNOWN: u32 = 0;
pub const UNKNOWN_TOKEN: &str = "<unk>";
pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_DROPOUT: f64 = 0.1;

pub type EmbeddingVector = Vec<f64>;

/// Lowercased runs of alphanumerics and underscores; everything else
/// separates tokens and is dropped.
pub fn split_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Self {
        Vocabulary::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Vocabulary {
    /// Sorted vocabulary of every token in `texts`, after the reserved
    /// unknown token.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut set = std::collections::BTreeSet::new();
        for t in texts {
            set.extend(split_tokens(t));
        }
        set.remove(UNKNOWN_TOKEN);
        let mut tokens = vec![UNKNOWN_TOKEN.to_string()];
        tokens.extend(set);
        Vocabulary::from_tokens(tokens)
    }

    /// `tokens[0]` must be the unknown token.
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 1
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNKNOWN)
    }
}

pub fn tokenize(text: &str, vocab: &Vocabulary) -> Result<Vec<u32>> {
    let ids: Vec<u32> = split_tokens(text).iter().map(|t| vocab.id(t)).collect();
    if ids.is_empty() {
        return Err(Error::EmptyText);
    }
    Ok(ids)
}

/// Parameters; matrices are row-major, `weight[i * dim + j]` maps input
/// feature `j` to output feature `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub dim: usize,
    pub vocab_size: usize,
    pub embedding: Vec<f64>,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub dropout_rate: f64,
}

impl EncoderParams {
    /// Entries uniform on [-1/sqrt(D), 1/sqrt(D)], zero bias.
    pub fn init(vocab_size: usize, dim: usize, dropout_rate: f64, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Config(format!("embedding dimension must be at least 2, got {dim}")));
        }
        let bound = 1.0 / (dim as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        let mut rng = seed::rng(seed);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| dist.sample(&mut rng)).collect() };
        let embedding = draw(vocab_size * dim);
        let weight = draw(dim * dim);
        let p = EncoderParams {
            dim,
            vocab_size,
            embedding,
            weight,
            bias: vec![0.0; dim],
            dropout_rate,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        if d < 2 {
            return Err(Error::Config(format!("embedding dimension must be at least 2, got {d}")));
        }
        if self.embedding.len() != self.vocab_size * d || self.weight.len() != d * d || self.bias.len() != d {
            return Err(Error::Config("parameter shapes do not match dim and vocab_size".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout_rate must be in [0, 1), got {}", self.dropout_rate)));
        }
        if self.tensors().iter().any(|t| t.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite("encoder parameters".into()));
        }
        Ok(())
    }

    pub fn tensors(&self) -> [&[f64]; 3] {
        [&self.embedding, &self.weight, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 3] {
        [&mut self.embedding, &mut self.weight, &mut self.bias]
    }

    pub fn num_params(&self) -> usize {
        self.embedding.len() + self.weight.len() + self.bias.len()
    }
}

/// Parameter-shaped gradient buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embedding: Vec<f64>,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(p: &EncoderParams) -> Self {
        Gradients {
            embedding: vec![0.0; p.embedding.len()],
            weight: vec![0.0; p.weight.len()],
            bias: vec![0.0; p.bias.len()],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 3] {
        [&self.embedding, &self.weight, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 3] {
        [&mut self.embedding, &mut self.weight, &mut self.bias]
    }

    pub fn norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

pub enum Mode<'a> {
    Deterministic,
    /// Inverted dropout drawn from the given source.
    Stochastic(&'a mut Rng),
}

/// Everything the backward pass needs from one encoding.
#[derive(Debug, Clone)]
pub struct Forward {
    pub tokens: Vec<u32>,
    /// tanh activations, `T × D`.
    pub acts: Vec<f64>,
    /// Per-element dropout multipliers (0 or 1/(1-p)), `T × D`; absent in
    /// deterministic mode.
    pub mask: Option<Vec<f64>>,
    pub h_norm: f64,
    pub z: EmbeddingVector,
}

fn check_tokens(tokens: &[u32], params: &EncoderParams) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::EmptyText);
    }
    if let Some(t) = tokens.iter().find(|&&t| t as usize >= params.vocab_size) {
        return Err(Error::Config(format!("token id {t} outside vocabulary of {}", params.vocab_size)));
    }
    Ok(())
}

/// Inverted-dropout multipliers: 0 with probability `rate`, else 1/(1-rate).
pub fn sample_mask(len: usize, rate: f64, rng: &mut Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rate > 0.0 && rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

pub fn forward(tokens: &[u32], params: &EncoderParams, mode: Mode<'_>) -> Result<Forward> {
    let mask = match mode {
        Mode::Deterministic => None,
        Mode::Stochastic(rng) => Some(sample_mask(tokens.len() * params.dim, params.dropout_rate, rng)),
    };
    forward_masked(tokens, params, mask)
}

/// Forward pass with a given dropout mask (`None` for no dropout).
pub fn forward_masked(tokens: &[u32], params: &EncoderParams, mask: Option<Vec<f64>>) -> Result<Forward> {
    check_tokens(tokens, params)?;
    let d = params.dim;
    let t_len = tokens.len();
    if let Some(m) = &mask {
        if m.len() != t_len * d {
            return Err(Error::Config(format!("dropout mask has {} entries, expected {}", m.len(), t_len * d)));
        }
    }
    let mut acts = vec![0.0; t_len * d];
    for (t, &tok) in tokens.iter().enumerate() {
        let e = &params.embedding[tok as usize * d..(tok as usize + 1) * d];
        let out = &mut acts[t * d..(t + 1) * d];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &params.weight[i * d..(i + 1) * d];
            let a: f64 = row.iter().zip(e).map(|(w, x)| w * x).sum::<f64>() + params.bias[i];
            *o = a.tanh();
        }
    }
    let mut h = vec![0.0; d];
    for t in 0..t_len {
        for i in 0..d {
            let m = mask.as_ref().map_or(1.0, |m| m[t * d + i]);
            h[i] += m * acts[t * d + i];
        }
    }
    h.iter_mut().for_each(|x| *x /= t_len as f64);
    let h_norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !h_norm.is_finite() {
        return Err(Error::NonFinite("pooled embedding".into()));
    }
    if h_norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let z = h.iter().map(|x| x / h_norm).collect();
    Ok(Forward { tokens: tokens.to_vec(), acts, mask, h_norm, z })
}

/// Accumulates d(loss)/d(params) into `grads` given d(loss)/dz.
pub fn backward(fwd: &Forward, g_z: &[f64], params: &EncoderParams, grads: &mut Gradients) {
    let d = params.dim;
    let t_len = fwd.tokens.len() as f64;
    let zg: f64 = fwd.z.iter().zip(g_z).map(|(a, b)| a * b).sum();
    let g_h: Vec<f64> = fwd.z.iter().zip(g_z).map(|(z, g)| (g - z * zg) / fwd.h_norm).collect();
    let mut g_a = vec![0.0; d];
    for (t, &tok) in fwd.tokens.iter().enumerate() {
        let tok = tok as usize;
        for (i, g) in g_a.iter_mut().enumerate() {
            let m = fwd.mask.as_ref().map_or(1.0, |m| m[t * d + i]);
            let u = fwd.acts[t * d + i];
            *g = m * g_h[i] / t_len * (1.0 - u * u);
        }
        let e = &params.embedding[tok * d..(tok + 1) * d];
        for (i, &ga) in g_a.iter().enumerate() {
            if ga == 0.0 {
                continue;
            }
            grads.bias[i] += ga;
            let gw = &mut grads.weight[i * d..(i + 1) * d];
            gw.iter_mut().zip(e).for_each(|(g, x)| *g += ga * x);
        }
        let ge = &mut grads.embedding[tok * d..(tok + 1) * d];
        for (i, &ga) in g_a.iter().enumerate() {
            if ga == 0.0 {
                continue;
            }
            let row = &params.weight[i * d..(i + 1) * d];
            ge.iter_mut().zip(row).for_each(|(g, w)| *g += ga * w);
        }
    }
}

pub fn encode(text: &str, params: &EncoderParams, vocab: &Vocabulary, mode: Mode<'_>) -> Result<EmbeddingVector> {
    Ok(forward(&tokenize(text, vocab)?, params, mode)?.z)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
