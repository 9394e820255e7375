//! kNN normality scoring against a library of training embeddings.

use serde::{Deserialize, Serialize};

use crate::encoder::{dot, encode, EmbeddingVector, EncoderParams, Mode, Vocabulary};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::scene::ViolationLabel;

pub const DEFAULT_K: usize = 5;
const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceLibrary {
    ids: Vec<String>,
    vectors: Vec<EmbeddingVector>,
}

fn unit(v: &[f64]) -> Result<(EmbeddingVector, bool)> {
    let n = dot(v, v).sqrt();
    if !n.is_finite() {
        return Err(Error::NonFinite("embedding".into()));
    }
    if n == 0.0 {
        return Err(Error::ZeroNorm);
    }
    if (n - 1.0).abs() <= UNIT_TOLERANCE {
        Ok((v.to_vec(), false))
    } else {
        Ok((v.iter().map(|x| x / n).collect(), true))
    }
}

impl ReferenceLibrary {
    /// Vectors are re-normalized if they are not unit length.
    pub fn new(ids: Vec<String>, vectors: Vec<EmbeddingVector>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        if ids.len() != vectors.len() {
            return Err(Error::Config(format!("{} ids for {} library vectors", ids.len(), vectors.len())));
        }
        let dim = vectors[0].len();
        let vectors = vectors
            .iter()
            .map(|v| {
                if v.len() != dim {
                    return Err(Error::Config("library vectors differ in dimension".into()));
                }
                Ok(unit(v)?.0)
            })
            .collect::<Result<_>>()?;
        Ok(ReferenceLibrary { ids, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &[EmbeddingVector] {
        &self.vectors
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityScore {
    pub score: f64,
    pub mean_distance: f64,
    pub neighbor_ids: Vec<String>,
    /// The test vector was not unit length and was re-normalized.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub renormalized: bool,
}

/// One line of a score file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub task_id: String,
    pub sample_id: String,
    pub label: ViolationLabel,
    pub score: f64,
    pub mean_distance: f64,
    pub neighbor_ids: Vec<String>,
}

/// Deterministic encodings of the training texts, in input order.
pub fn build_library(
    texts: &[(String, String)],
    params: &EncoderParams,
    vocab: &Vocabulary,
    exec: Execution,
) -> Result<ReferenceLibrary> {
    if texts.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    let vectors = par::try_map(exec, texts, |(_, t)| encode(t, params, vocab, Mode::Deterministic))?;
    ReferenceLibrary::new(texts.iter().map(|(id, _)| id.clone()).collect(), vectors)
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// S = 1 / (1 + mean distance to the min(k, N) nearest library vectors);
/// equal distances are broken by ascending library index.
pub fn score(z: &[f64], lib: &ReferenceLibrary, k: usize) -> Result<NormalityScore> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if lib.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    if z.len() != lib.dim() {
        return Err(Error::Config(format!("test vector has dimension {}, library {}", z.len(), lib.dim())));
    }
    let (z, renormalized) = unit(z)?;
    if renormalized {
        log::warn!("test vector was not unit norm; re-normalized before scoring");
    }
    let k = k.min(lib.len());
    // k best (distance, index) pairs kept sorted; (d, i) order is the tie rule
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (i, v) in lib.vectors.iter().enumerate() {
        // unit vectors are at most 2 apart; clamp rounding overshoot
        let d = euclidean(&z, v).min(2.0);
        if best.len() == k && d >= best[k - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(pos, (d, i));
        best.truncate(k);
    }
    let mean_distance = best.iter().map(|(d, _)| d).sum::<f64>() / k as f64;
    Ok(NormalityScore {
        score: 1.0 / (1.0 + mean_distance),
        mean_distance,
        neighbor_ids: best.iter().map(|&(_, i)| lib.ids[i].clone()).collect(),
        renormalized,
    })
}

/// Deterministic encoding plus scoring of every text, order-preserving.
pub fn score_split(
    texts: &[String],
    params: &EncoderParams,
    vocab: &Vocabulary,
    lib: &ReferenceLibrary,
    k: usize,
    exec: Execution,
) -> Result<Vec<NormalityScore>> {
    par::try_map(exec, texts, |t| score(&encode(t, params, vocab, Mode::Deterministic)?, lib, k))
}
