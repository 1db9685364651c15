use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{check_inputs, finish, Embedder};
use crate::error::EmbeddingError;
use crate::types::EmbeddingVector;

/// Offline embedder: a bag of hashed tokens.
///
/// Each lowercase alphanumeric token seeds a ChaCha stream through SHA-256 and
/// expands into a `dim`-long vector of uniform values in `[-1, 1)`. A text's
/// embedding is the normalized sum over its tokens, so texts sharing vocabulary
/// land near each other. Output depends only on the text bytes.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    fn token_seed(token: &str) -> u64 {
        let digest = Sha256::new()
            .chain_update(b"arbiter-token\0")
            .chain_update(token.as_bytes())
            .finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    fn add_token(&self, acc: &mut [f64], token: &str) {
        let mut rng = ChaCha8Rng::seed_from_u64(Self::token_seed(token));
        for v in acc.iter_mut() {
            *v += rng.random_range(-1.0..1.0);
        }
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let mut acc = vec![0.0; self.dim];
        let lower = text.to_lowercase();
        let mut any = false;
        for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            self.add_token(&mut acc, token);
            any = true;
        }
        if !any {
            self.add_token(&mut acc, text);
        }
        finish(acc, self.dim)
    }
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        check_inputs(texts)?;
        texts.iter().map(|t| self.embed_text(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_unit_norm() {
        let e = HashingEmbedder::new(64);
        let a = e.embed_one("hello").unwrap();
        let b = HashingEmbedder::new(64).embed_one("hello").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), 64);
        assert!((a.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn distinct_texts_distinct_vectors() {
        let e = HashingEmbedder::new(32);
        let v = e.embed_batch(&["a".into(), "b".into()]).unwrap();
        assert_ne!(v[0], v[1]);
    }

    #[test]
    fn punctuation_only_text_still_embeds() {
        let e = HashingEmbedder::new(16);
        let v = e.embed_one("?!").unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-6);
        assert_ne!(v, e.embed_one("!?").unwrap());
    }

    #[test]
    fn shared_vocabulary_is_closer() {
        let e = HashingEmbedder::new(256);
        let a = e.embed_one("integral calculus derivative limit").unwrap();
        let b = e.embed_one("derivative of a limit in calculus").unwrap();
        let c = e.embed_one("french revolution napoleon history").unwrap();
        let dot = |x: &EmbeddingVector, y: &EmbeddingVector| {
            x.values().iter().zip(y.values()).map(|(p, q)| p * q).sum::<f64>()
        };
        assert!(dot(&a, &b) > dot(&a, &c));
    }
}
