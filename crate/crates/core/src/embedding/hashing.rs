use std::hash::Hasher;

use fnv::FnvHasher;

use super::{EmbedError, EmbeddingProvider, EmbeddingVector, MIN_DIMENSION};

pub const HASHING_PROVIDER_ID: &str = "hashing-fnv1a64";

/// Lowercased alphanumeric tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn fnv1a64(token: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(token.as_bytes());
    h.finish()
}

/// Signed feature hashing: bucket = hash mod d, sign from the parity of the
/// hash's set bits.
pub fn embed_hashing(text: &str, dimension: usize) -> Result<EmbeddingVector, EmbedError> {
    if dimension < MIN_DIMENSION {
        return Err(EmbedError::InvalidConfig(format!(
            "dimension {dimension} is below the minimum of {MIN_DIMENSION}"
        )));
    }
    let mut acc = vec![0.0f64; dimension];
    let mut tokens = 0usize;
    for token in tokenize(text) {
        let h = fnv1a64(&token);
        let bucket = (h % dimension as u64) as usize;
        let sign = if h.count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        acc[bucket] += sign;
        tokens += 1;
    }
    if tokens == 0 {
        return Ok(EmbeddingVector::degenerate(dimension, HASHING_PROVIDER_ID));
    }
    // Signed counts can cancel to zero; normalized() maps that to e_0 as well.
    Ok(EmbeddingVector::normalized(&acc, HASHING_PROVIDER_ID))
}

#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dimension: usize,
}

impl HashingEmbedder {
    pub fn new(dimension: usize) -> Result<Self, EmbedError> {
        if dimension < MIN_DIMENSION {
            return Err(EmbedError::InvalidConfig(format!(
                "dimension {dimension} is below the minimum of {MIN_DIMENSION}"
            )));
        }
        Ok(Self { dimension })
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn provider_id(&self) -> &str {
        HASHING_PROVIDER_ID
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        texts.iter().map(|t| embed_hashing(t, self.dimension)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fnv_reference_vectors() {
        // Published FNV-1a 64-bit test vectors.
        assert_eq!(fnv1a64(""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64("a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64("foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn deterministic_bitwise() {
        let a = embed_hashing("Multi-hop reasoning over documents", 256).unwrap();
        let b = embed_hashing("Multi-hop reasoning over documents", 256).unwrap();
        let bits = |v: &EmbeddingVector| v.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn whitespace_and_case_do_not_matter() {
        let a = embed_hashing("multi hop question answering", 256).unwrap();
        let b = embed_hashing("  Multi   hop\tquestion \n answering  ", 256).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_text_is_degenerate_basis() {
        let v = embed_hashing("  ... !! ", 16).unwrap();
        assert!(v.is_degenerate());
        assert_eq!(v.values()[0], 1.0);
    }

    #[test]
    fn rejects_tiny_dimension() {
        assert!(embed_hashing("x", 7).is_err());
        assert!(HashingEmbedder::new(4).is_err());
    }

    #[test]
    fn single_token_places_signed_unit() {
        let h = fnv1a64("hotpotqa");
        let v = embed_hashing("HotpotQA", 64).unwrap();
        let bucket = (h % 64) as usize;
        let sign = if h.count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        assert_eq!(v.values()[bucket], sign);
    }

    proptest! {
        #[test]
        fn unit_norm_for_any_text(text in "\\PC{0,80}", d in 8usize..300) {
            let v = embed_hashing(&text, d).unwrap();
            prop_assert_eq!(v.dimension(), d);
            let n: f64 = v.values().iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-6);
        }
    }
}
