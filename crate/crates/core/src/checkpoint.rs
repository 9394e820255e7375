//! Trained encoder checkpoints.
//!
//! File layout (little-endian):
//!
//! ```text
//! "LADC"              4 bytes
//! version             u32 (= 1)
//! config fingerprint  u64
//! config json         u32 length + UTF-8 (length 0 when absent)
//! dim                 u32
//! vocab_size          u32
//! dropout_rate        f64
//! vocab_size x token  u32 length + UTF-8, in id order
//! embedding           vocab_size * dim x f64
//! weight              dim * dim x f64, row-major
//! bias                dim x f64
//! ```

use std::path::Path;

use crate::encoder::{EncoderParams, Vocabulary, UNKNOWN_TOKEN};
use crate::error::{Error, Result};
use crate::io::{write_bytes, ByteReader, ByteWriter};
use crate::trainer::TrainConfig;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LADC";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: EncoderParams,
    pub vocab: Vocabulary,
    pub fingerprint: u64,
    pub config: Option<TrainConfig>,
}

impl Checkpoint {
    pub fn new(params: EncoderParams, vocab: Vocabulary, config: &TrainConfig) -> Self {
        Checkpoint { params, vocab, fingerprint: config.fingerprint(), config: Some(*config) }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let p = &self.params;
        p.validate()?;
        if self.vocab.len() != p.vocab_size {
            return Err(Error::Config(format!("vocabulary has {} tokens, params {}", self.vocab.len(), p.vocab_size)));
        }
        let mut w = ByteWriter::default();
        w.bytes(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        w.u64(self.fingerprint);
        match &self.config {
            Some(c) => w.str(&serde_json::to_string(c)?),
            None => w.u32(0),
        }
        w.u32(p.dim as u32);
        w.u32(p.vocab_size as u32);
        w.f64(p.dropout_rate);
        for t in self.vocab.tokens() {
            w.str(t);
        }
        for tensor in p.tensors() {
            for &x in tensor {
                w.f64(x);
            }
        }
        Ok(w.0)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = ByteReader::new(bytes, path);
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(r.error("not a checkpoint"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(r.error(format!("unsupported checkpoint version {version}")));
        }
        let fingerprint = r.u64()?;
        let json = r.str()?;
        let config: Option<TrainConfig> = if json.is_empty() {
            None
        } else {
            Some(serde_json::from_str(&json).map_err(|e| r.error(format!("config: {e}")))?)
        };
        if let Some(c) = &config {
            if c.fingerprint() != fingerprint {
                return Err(r.error("config does not match its fingerprint"));
            }
        }
        let dim = r.u32()? as usize;
        let vocab_size = r.u32()? as usize;
        let dropout_rate = r.f64()?;
        let tokens = (0..vocab_size).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        if tokens.first().map(String::as_str) != Some(UNKNOWN_TOKEN) {
            return Err(r.error("first token must be the unknown token"));
        }
        let mut read = |n: usize| (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>();
        let embedding = read(vocab_size * dim)?;
        let weight = read(dim * dim)?;
        let bias = read(dim)?;
        r.finish()?;
        let params = EncoderParams { dim, vocab_size, embedding, weight, bias, dropout_rate };
        params.validate().map_err(|e| r.error(e.to_string()))?;
        Ok(Checkpoint { params, vocab: Vocabulary::from_tokens(tokens), fingerprint, config })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_bytes(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let vocab = Vocabulary::build(["two kiwis", "three oranges"]);
        let params = EncoderParams::init(vocab.len(), 4, 0.1, 3).unwrap();
        Checkpoint::new(params, vocab, &TrainConfig::default())
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt/a.bin");
        c.write(&path).unwrap();
        let back = Checkpoint::read(&path).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.vocab.id("kiwis"), c.vocab.id("kiwis"));
    }

    #[test]
    fn header_and_corruption() {
        let c = sample();
        let bytes = c.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"LADC");
        assert_eq!(&bytes[8..16], &TrainConfig::default().fingerprint().to_le_bytes());
        let p = Path::new("mem");
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 8], p).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra, p).is_err());
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(Checkpoint::from_bytes(&v2, p).unwrap_err().to_string().contains("version"));
    }

    #[test]
    fn config_is_optional() {
        let mut c = sample();
        c.config = None;
        let back = Checkpoint::from_bytes(&c.to_bytes().unwrap(), Path::new("mem")).unwrap();
        assert_eq!(back.config, None);
        assert_eq!(back.fingerprint, c.fingerprint);
    }
}
