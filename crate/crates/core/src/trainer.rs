//! Contrastive fine-tuning: NT-Xent over (anchor, positive, negatives),
//! exact backpropagation through the encoder, clipped AdamW updates.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::encoder::{backward, dot, forward_masked, sample_mask, tokenize, EncoderParams, Forward, Gradients, Vocabulary};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
/// Learning rate documented for fine-tuning a pretrained encoder.
pub const PRETRAINED_LEARNING_RATE: f64 = 2e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub temperature: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 16,
            temperature: 0.5,
            learning_rate: 5e-3,
            weight_decay: 1e-5,
            clip_norm: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return bad(format!("temperature must be > 0, got {}", self.temperature));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning_rate must be >= 0, got {}", self.learning_rate));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm > 0.0) {
            return bad(format!("clip_norm must be > 0, got {}", self.clip_norm));
        }
        Ok(())
    }

    /// Stable hash of every field.
    pub fn fingerprint(&self) -> u64 {
        let canonical = format!(
            "epochs={};batch_size={};temperature={:e};learning_rate={:e};weight_decay={:e};clip_norm={:e};seed={}",
            self.epochs, self.batch_size, self.temperature, self.learning_rate, self.weight_decay, self.clip_norm, self.seed
        );
        seed::derive(0, &[&canonical])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub per_anchor: Vec<f64>,
}

/// Unit-norm embeddings, index-aligned per source text.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveBatch {
    pub anchors: Vec<Vec<f64>>,
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
}

/// Loss plus its gradient with respect to every embedding of the batch.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: LossValue,
    pub anchors: Vec<Vec<f64>>,
    pub positives: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<f64>>,
}

fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn check_batch(batch: &ContrastiveBatch) -> Result<usize> {
    let b = batch.anchors.len();
    if b == 0 || batch.positives.len() != b || batch.negatives.len() != b {
        return Err(Error::Config(format!(
            "batch needs equal non-zero anchor/positive/negative counts, got {}/{}/{}",
            b,
            batch.positives.len(),
            batch.negatives.len()
        )));
    }
    Ok(b)
}

/// Per anchor i: -log(exp(s_ii/t) / (exp(s_ii/t) + sum_j exp(n_ij/t))) with
/// s_ii = anc_i . pos_i and n_ij = anc_i . neg_j over the batch's negatives.
pub fn nt_xent(batch: &ContrastiveBatch, tau: f64) -> Result<LossValue> {
    Ok(nt_xent_grad(batch, tau)?.loss)
}

pub fn nt_xent_grad(batch: &ContrastiveBatch, tau: f64) -> Result<LossGrad> {
    let b = check_batch(batch)?;
    let d = batch.anchors[0].len();
    let zeros = || vec![vec![0.0; d]; b];
    let (mut g_anc, mut g_pos, mut g_neg) = (zeros(), zeros(), zeros());
    let mut per_anchor = Vec::with_capacity(b);
    let mut logits = vec![0.0; b + 1];
    for i in 0..b {
        let anc = &batch.anchors[i];
        logits[0] = dot(anc, &batch.positives[i]) / tau;
        for j in 0..b {
            logits[j + 1] = dot(anc, &batch.negatives[j]) / tau;
        }
        if logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::NonFinite(format!("similarity of anchor {i}")));
        }
        let lse = logsumexp(&logits);
        // -log softmax_0 is >= 0 mathematically; clamp rounding noise
        per_anchor.push((lse - logits[0]).max(0.0));

        // d loss_i / d logit_k = p_k - [k == 0], then chain through dot/tau,
        // averaged over the batch
        let scale = 1.0 / (tau * b as f64);
        let p0 = (logits[0] - lse).exp();
        let c = (p0 - 1.0) * scale;
        for k in 0..d {
            g_anc[i][k] += c * batch.positives[i][k];
            g_pos[i][k] += c * anc[k];
        }
        for j in 0..b {
            let c = (logits[j + 1] - lse).exp() * scale;
            for k in 0..d {
                g_anc[i][k] += c * batch.negatives[j][k];
                g_neg[j][k] += c * anc[k];
            }
        }
    }
    let value = per_anchor.iter().sum::<f64>() / b as f64;
    if !value.is_finite() {
        return Err(Error::NonFinite("contrastive loss".into()));
    }
    Ok(LossGrad {
        loss: LossValue { value, per_anchor },
        anchors: g_anc,
        positives: g_pos,
        negatives: g_neg,
    })
}

/// One text of a batch with its frozen dropout mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedText {
    pub tokens: Vec<u32>,
    pub mask: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedBatch {
    pub anchors: Vec<MaskedText>,
    pub positives: Vec<MaskedText>,
    pub negatives: Vec<MaskedText>,
}

/// A tokenized (positive, negative) training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenPair {
    pub pos: Vec<u32>,
    pub neg: Vec<u32>,
}

impl TokenPair {
    pub fn new(pos: &str, neg: &str, vocab: &Vocabulary) -> Result<Self> {
        Ok(TokenPair {
            pos: tokenize(pos, vocab)?,
            neg: tokenize(neg, vocab)?,
        })
    }
}

/// Draws independent masks for the two positive views and the negative of
/// each pair, in that order.
pub fn sample_batch(pairs: &[&TokenPair], params: &EncoderParams, rng: &mut Rng) -> MaskedBatch {
    let view = |tokens: &[u32], rng: &mut Rng| MaskedText {
        tokens: tokens.to_vec(),
        mask: Some(sample_mask(tokens.len() * params.dim, params.dropout_rate, rng)),
    };
    let mut batch = MaskedBatch { anchors: vec![], positives: vec![], negatives: vec![] };
    for p in pairs {
        batch.anchors.push(view(&p.pos, rng));
        batch.positives.push(view(&p.pos, rng));
        batch.negatives.push(view(&p.neg, rng));
    }
    batch
}

fn forwards(texts: &[MaskedText], params: &EncoderParams) -> Result<Vec<Forward>> {
    texts.iter().map(|t| forward_masked(&t.tokens, params, t.mask.clone())).collect()
}

fn embed(batch: &MaskedBatch, params: &EncoderParams) -> Result<[Vec<Forward>; 3]> {
    Ok([
        forwards(&batch.anchors, params)?,
        forwards(&batch.positives, params)?,
        forwards(&batch.negatives, params)?,
    ])
}

fn zs(f: &[Forward]) -> Vec<Vec<f64>> {
    f.iter().map(|f| f.z.clone()).collect()
}

pub fn batch_loss(batch: &MaskedBatch, params: &EncoderParams, tau: f64) -> Result<LossValue> {
    let [a, p, n] = embed(batch, params)?;
    nt_xent(&ContrastiveBatch { anchors: zs(&a), positives: zs(&p), negatives: zs(&n) }, tau)
}

/// Exact gradient of the batch loss with masks held fixed.
pub fn gradients(batch: &MaskedBatch, params: &EncoderParams, tau: f64) -> Result<(LossValue, Gradients)> {
    let [a, p, n] = embed(batch, params)?;
    let lg = nt_xent_grad(&ContrastiveBatch { anchors: zs(&a), positives: zs(&p), negatives: zs(&n) }, tau)?;
    let mut grads = Gradients::zeros_like(params);
    for (fs, gs) in [(&a, &lg.anchors), (&p, &lg.positives), (&n, &lg.negatives)] {
        for (f, g) in fs.iter().zip(gs) {
            backward(f, g, params, &mut grads);
        }
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok((lg.loss, grads))
}

/// Rescales `grads` so their global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    lr: f64,
    weight_decay: f64,
    step: i32,
    m: Gradients,
    v: Gradients,
}

impl AdamW {
    pub fn new(params: &EncoderParams, lr: f64, weight_decay: f64) -> Self {
        AdamW {
            lr,
            weight_decay,
            step: 0,
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
        }
    }

    pub fn update(&mut self, params: &mut EncoderParams, grads: &Gradients) {
        self.step += 1;
        let bc1 = 1.0 - ADAM_BETA1.powi(self.step);
        let bc2 = 1.0 - ADAM_BETA2.powi(self.step);
        let (lr, wd) = (self.lr, self.weight_decay);
        let tensors = params.tensors_mut().into_iter().zip(grads.tensors());
        for ((p, g), (m, v)) in tensors.zip(self.m.tensors_mut().into_iter().zip(self.v.tensors_mut())) {
            for k in 0..p.len() {
                m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * g[k];
                v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * g[k] * g[k];
                let update = (m[k] / bc1) / ((v[k] / bc2).sqrt() + ADAM_EPS);
                p[k] -= lr * (update + wd * p[k]);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: EncoderParams,
    /// Mean loss of each epoch.
    pub loss_curve: Vec<f64>,
}

/// Trains on (positive, negative) pairs for `cfg.epochs` epochs of
/// ceil(N / B) steps; the last batch of an epoch may be smaller.
pub fn fit(pairs: &[TokenPair], init: EncoderParams, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    init.validate()?;
    if pairs.is_empty() {
        return Err(Error::Config("no training pairs".into()));
    }
    let mut params = init;
    let mut opt = AdamW::new(&params, cfg.learning_rate, cfg.weight_decay);
    let mut rng = seed::rng(cfg.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut steps = 0;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let members: Vec<&TokenPair> = chunk.iter().map(|&i| &pairs[i]).collect();
            let batch = sample_batch(&members, &params, &mut rng);
            let (loss, mut grads) = gradients(&batch, &params, cfg.temperature).map_err(|e| match e {
                Error::NonFinite(what) => Error::NonFinite(format!("{what} at epoch {} step {}", epoch + 1, step + 1)),
                other => other,
            })?;
            clip_global_norm(&mut grads, cfg.clip_norm);
            opt.update(&mut params, &grads);
            total += loss.value;
            steps += 1;
        }
        let mean = total / steps as f64;
        log::debug!("epoch {} mean loss {mean:.6}", epoch + 1);
        curve.push(mean);
    }
    params.validate()?;
    Ok(TrainOutcome { params, loss_curve: curve })
}

/// Two-column `epoch<TAB>mean_loss` table.
pub fn format_loss_curve(curve: &[f64]) -> String {
    let mut out = String::from("epoch\tmean_loss\n");
    for (i, l) in curve.iter().enumerate() {
        let _ = writeln!(out, "{}\t{l:.10}", i + 1);
    }
    out
}

pub fn write_loss_curve(path: &Path, curve: &[f64]) -> Result<()> {
    std::fs::write(path, format_loss_curve(curve)).map_err(|e| Error::io(path, e))
}

pub fn read_loss_curve(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split('\t')
                .nth(1)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Format { path: path.to_path_buf(), msg: format!("bad loss line `{l}`") })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: Vec<f64>) -> Vec<f64> {
        let n = dot(&v, &v).sqrt();
        v.into_iter().map(|x| x / n).collect()
    }

    #[test]
    fn symmetric_case_is_ln2() {
        let a = unit(vec![1.0, 2.0, 3.0]);
        let batch = ContrastiveBatch { anchors: vec![a.clone()], positives: vec![a.clone()], negatives: vec![a] };
        for tau in [0.05, 0.5, 3.0] {
            assert!((nt_xent(&batch, tau).unwrap().value - std::f64::consts::LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn opposite_negative() {
        let batch = ContrastiveBatch {
            anchors: vec![vec![1.0, 0.0]],
            positives: vec![vec![1.0, 0.0]],
            negatives: vec![vec![-1.0, 0.0]],
        };
        let l = nt_xent(&batch, 0.5).unwrap().value;
        assert!((l - (1.0 + (-4.0f64).exp()).ln()).abs() < 1e-12);
        assert!((l - 0.01815).abs() < 1e-5);
    }

    #[test]
    fn embedding_gradient_matches_differences() {
        let mut rng = seed::rng(4);
        let mut rand_unit = || unit((0..5).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect());
        let batch = ContrastiveBatch {
            anchors: vec![rand_unit(), rand_unit()],
            positives: vec![rand_unit(), rand_unit()],
            negatives: vec![rand_unit(), rand_unit()],
        };
        let g = nt_xent_grad(&batch, 0.5).unwrap();
        let h = 1e-6;
        for k in 0..5 {
            let mut plus = batch.clone();
            plus.negatives[1][k] += h;
            let mut minus = batch.clone();
            minus.negatives[1][k] -= h;
            let fd = (nt_xent(&plus, 0.5).unwrap().value - nt_xent(&minus, 0.5).unwrap().value) / (2.0 * h);
            assert!((fd - g.negatives[1][k]).abs() < 1e-8);
        }
    }

    #[test]
    fn clipping_bounds_norm() {
        let p = EncoderParams::init(3, 4, 0.1, 0).unwrap();
        let mut g = Gradients::zeros_like(&p);
        g.weight.iter_mut().for_each(|x| *x = 3.0);
        let before = clip_global_norm(&mut g, 1.0);
        assert!(before > 1.0);
        assert!(g.norm() <= 1.0 + 1e-9);
        let mut small = Gradients::zeros_like(&p);
        small.bias[0] = 0.5;
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small.bias[0], 0.5);
    }

    #[test]
    fn adamw_first_step_and_decay() {
        let mut p = EncoderParams::init(2, 2, 0.0, 0).unwrap();
        let before = p.clone();
        let mut g = Gradients::zeros_like(&p);
        g.bias = vec![0.3, -2.0];
        let mut opt = AdamW::new(&p, 0.1, 0.0);
        opt.update(&mut p, &g);
        // the bias-corrected first step moves each coordinate by ~lr * sign(g)
        assert!((p.bias[0] + 0.1).abs() < 1e-6 && (p.bias[1] - 0.1).abs() < 1e-6);
        assert_eq!(p.weight, before.weight);

        let mut q = before.clone();
        let zero = Gradients::zeros_like(&q);
        AdamW::new(&q, 0.1, 0.5).update(&mut q, &zero);
        for (a, b) in q.weight.iter().zip(&before.weight) {
            assert!((a - b * (1.0 - 0.05)).abs() < 1e-15);
        }
    }

    #[test]
    fn loss_curve_text_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.tsv");
        write_loss_curve(&path, &[0.5, 0.25]).unwrap();
        assert!(std::fs::read_to_string(&path).unwrap().starts_with("epoch\tmean_loss\n1\t0.5"));
        assert_eq!(read_loss_curve(&path).unwrap(), vec![0.5, 0.25]);
    }

    #[test]
    fn config_validation_and_fingerprint() {
        let c = TrainConfig::default();
        assert!(c.validate().is_ok());
        assert!(TrainConfig { temperature: 0.0, ..c }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..c }.validate().is_err());
        assert!(TrainConfig { clip_norm: 0.0, ..c }.validate().is_err());
        assert_eq!(c.fingerprint(), TrainConfig::default().fingerprint());
        assert_ne!(c.fingerprint(), TrainConfig { seed: 1, ..c }.fingerprint());
    }

    fn toy() -> (Vocabulary, EncoderParams, Vec<TokenPair>) {
        let texts = [
            ("three oranges and two kiwis", "five oranges and two kiwis"),
            ("one red stick is short", "one red stick is long"),
        ];
        let vocab = Vocabulary::build(texts.iter().flat_map(|(a, b)| [*a, *b]));
        let params = EncoderParams::init(vocab.len(), 8, 0.1, 2).unwrap();
        let pairs = texts.iter().map(|(a, b)| TokenPair::new(a, b, &vocab).unwrap()).collect();
        (vocab, params, pairs)
    }

    #[test]
    fn parameter_gradient_matches_central_differences() {
        let (_, params, pairs) = toy();
        let refs: Vec<&TokenPair> = pairs.iter().collect();
        let batch = sample_batch(&refs, &params, &mut seed::rng(3));
        let (_, g) = gradients(&batch, &params, 0.5).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for t in 0..3 {
            for k in 0..params.tensors()[t].len() {
                let mut plus = params.clone();
                plus.tensors_mut()[t][k] += h;
                let mut minus = params.clone();
                minus.tensors_mut()[t][k] -= h;
                let fd = (batch_loss(&batch, &plus, 0.5).unwrap().value - batch_loss(&batch, &minus, 0.5).unwrap().value)
                    / (2.0 * h);
                let a = g.tensors()[t][k];
                worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-6));
            }
        }
        assert!(worst <= 1e-4, "max relative error {worst}");
    }

    #[test]
    fn symmetric_configuration_has_zero_gradient() {
        let (_, params, pairs) = toy();
        let same = MaskedText { tokens: pairs[0].pos.clone(), mask: None };
        let batch = MaskedBatch { anchors: vec![same.clone()], positives: vec![same.clone()], negatives: vec![same] };
        let (loss, g) = gradients(&batch, &params, 0.5).unwrap();
        assert!((loss.value - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(g.norm() < 1e-8);
    }

    #[test]
    fn gradient_scales_with_inverse_temperature() {
        let (_, params, pairs) = toy();
        let refs: Vec<&TokenPair> = pairs.iter().collect();
        let batch = sample_batch(&refs, &params, &mut seed::rng(5));
        let n1 = gradients(&batch, &params, 50.0).unwrap().1.norm();
        let n2 = gradients(&batch, &params, 100.0).unwrap().1.norm();
        assert!((n1 / n2 - 2.0).abs() / 2.0 < 0.05, "{}", n1 / n2);
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let (_, params, pairs) = toy();
        let cfg = TrainConfig { learning_rate: 0.0, weight_decay: 0.0, epochs: 3, batch_size: 1, ..TrainConfig::default() };
        let out = fit(&pairs, params.clone(), &cfg).unwrap();
        assert_eq!(out.params, params);
        assert_eq!(out.loss_curve.len(), 3);
    }

    #[test]
    fn fit_is_deterministic_and_learns() {
        let (_, params, pairs) = toy();
        let cfg = TrainConfig { epochs: 30, batch_size: 2, ..TrainConfig::default() };
        let a = fit(&pairs, params.clone(), &cfg).unwrap();
        let b = fit(&pairs, params.clone(), &cfg).unwrap();
        assert_eq!(a.loss_curve, b.loss_curve);
        assert!(a.loss_curve.last().unwrap() < &a.loss_curve[0]);
        assert!(fit(&[], params, &cfg).is_err());
    }
}
