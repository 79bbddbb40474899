use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use super::{AtomicStats, EmbedError, EmbeddingProvider, EmbeddingVector, ProviderStats};

static TMP_COUNTER: AtomicUsize = AtomicUsize::new(0);

/// Disk-backed embedding cache.
///
/// One file per key under the cache directory. Layout: `u64` little-endian
/// dimension, then `dimension` little-endian `f32` values. Degenerate
/// (empty-text) vectors are never persisted.
pub struct CachedEmbedder<P> {
    inner: P,
    dir: PathBuf,
    stats: AtomicStats,
    warnings: Mutex<Vec<String>>,
}

pub fn cache_key(provider_id: &str, dimension: usize, text: &str) -> String {
    let mut h = Sha256::new();
    h.update(provider_id.as_bytes());
    h.update([0u8]);
    h.update(dimension.to_le_bytes());
    h.update([0u8]);
    h.update(text.as_bytes());
    hex::encode(h.finalize())
}

fn encode(values: &[f32]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(8 + 4 * values.len());
    buf.write_u64::<LittleEndian>(values.len() as u64).unwrap();
    for &v in values {
        buf.write_f32::<LittleEndian>(v).unwrap();
    }
    buf
}

fn decode(bytes: &[u8], dimension: usize) -> Option<Vec<f32>> {
    let mut cur = Cursor::new(bytes);
    let d = cur.read_u64::<LittleEndian>().ok()? as usize;
    if d != dimension || bytes.len() != 8 + 4 * d {
        return None;
    }
    let mut values = vec![0.0f32; d];
    cur.read_f32_into::<LittleEndian>(&mut values).ok()?;
    if values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut rest = Vec::new();
    cur.read_to_end(&mut rest).ok()?;
    rest.is_empty().then_some(values)
}

impl<P: EmbeddingProvider> CachedEmbedder<P> {
    pub fn new(inner: P, dir: impl Into<PathBuf>) -> Result<Self, EmbedError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            inner,
            dir,
            stats: AtomicStats::default(),
            warnings: Mutex::new(Vec::new()),
        })
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }

    fn path_for(&self, text: &str) -> PathBuf {
        let key = cache_key(self.inner.provider_id(), self.inner.dimension(), text);
        self.dir.join(format!("{key}.vec"))
    }

    fn lookup(&self, path: &Path) -> Option<Vec<f32>> {
        let bytes = fs::read(path).ok()?;
        match decode(&bytes, self.inner.dimension()) {
            Some(v) => Some(v),
            None => {
                let w = format!("corrupt embedding cache entry {}; recomputing", path.display());
                log::warn!("{w}");
                self.warnings.lock().unwrap().push(w);
                None
            }
        }
    }

    fn store(&self, path: &Path, values: &[f32]) -> Result<(), EmbedError> {
        let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
        let tmp = path.with_extension(format!("tmp{}-{n}", std::process::id()));
        fs::write(&tmp, encode(values))?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for CachedEmbedder<P> {
    fn provider_id(&self) -> &str {
        self.inner.provider_id()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let paths: Vec<PathBuf> = texts.iter().map(|t| self.path_for(t)).collect();
        let mut out: Vec<Option<EmbeddingVector>> = paths
            .iter()
            .map(|p| {
                self.lookup(p)
                    .map(|values| EmbeddingVector::from_raw_parts(values, self.inner.provider_id().to_string(), false))
            })
            .collect();

        let missing: Vec<usize> = (0..texts.len()).filter(|&i| out[i].is_none()).collect();
        for _ in 0..texts.len() - missing.len() {
            AtomicStats::bump(&self.stats.cache_hits);
        }
        if !missing.is_empty() {
            let batch: Vec<&str> = missing.iter().map(|&i| texts[i]).collect();
            let fresh = self.inner.embed_batch(&batch)?;
            for (&i, v) in missing.iter().zip(fresh) {
                AtomicStats::bump(&self.stats.cache_misses);
                if !v.is_degenerate() {
                    self.store(&paths[i], v.values())?;
                }
                out[i] = Some(v);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled")).collect())
    }

    fn stats(&self) -> ProviderStats {
        let own = self.stats.snapshot();
        let inner = self.inner.stats();
        ProviderStats {
            remote_calls: inner.remote_calls,
            retries: inner.retries,
            cache_hits: own.cache_hits + inner.cache_hits,
            cache_misses: own.cache_misses + inner.cache_misses,
        }
    }

    fn warnings(&self) -> Vec<String> {
        let mut w = self.inner.warnings();
        w.extend(self.warnings.lock().unwrap().iter().cloned());
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::HashingEmbedder;
    use std::sync::atomic::AtomicUsize;

    /// Hashing provider that counts invocations.
    struct Counting {
        inner: HashingEmbedder,
        calls: AtomicUsize,
    }

    impl EmbeddingProvider for Counting {
        fn provider_id(&self) -> &str {
            self.inner.provider_id()
        }
        fn dimension(&self) -> usize {
            self.inner.dimension()
        }
        fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
            self.calls.fetch_add(texts.len(), Ordering::SeqCst);
            self.inner.embed_batch(texts)
        }
    }

    fn counting() -> Counting {
        Counting {
            inner: HashingEmbedder::new(32).unwrap(),
            calls: AtomicUsize::new(0),
        }
    }

    #[test]
    fn second_call_is_a_hit() {
        let dir = tempfile::tempdir().unwrap();
        let c = CachedEmbedder::new(counting(), dir.path()).unwrap();
        let a = c.embed("sentence one").unwrap();
        assert_eq!(c.inner().calls.load(Ordering::SeqCst), 1);
        let b = c.embed("sentence one").unwrap();
        assert_eq!(c.inner().calls.load(Ordering::SeqCst), 1);
        assert_eq!(a, b);
        assert_eq!(c.stats().cache_hits, 1);
    }

    #[test]
    fn cleared_cache_recomputes_same_vector() {
        let dir = tempfile::tempdir().unwrap();
        let first = CachedEmbedder::new(counting(), dir.path())
            .unwrap()
            .embed("x y z")
            .unwrap();
        fs::remove_dir_all(dir.path()).unwrap();
        let c = CachedEmbedder::new(counting(), dir.path()).unwrap();
        let again = c.embed("x y z").unwrap();
        assert_eq!(c.inner().calls.load(Ordering::SeqCst), 1);
        assert_eq!(first, again);
    }

    #[test]
    fn one_char_difference_gives_distinct_keys() {
        let id = crate::embedding::HASHING_PROVIDER_ID;
        assert_ne!(cache_key(id, 256, "graph"), cache_key(id, 256, "graph."));
        assert_ne!(cache_key(id, 256, "abc"), cache_key(id, 128, "abc"));
    }

    #[test]
    fn corrupt_entry_recomputed_and_overwritten() {
        let dir = tempfile::tempdir().unwrap();
        let c = CachedEmbedder::new(counting(), dir.path()).unwrap();
        let good = c.embed("hello world").unwrap();
        let path = c.path_for("hello world");
        fs::write(&path, b"garbage").unwrap();
        let again = c.embed("hello world").unwrap();
        assert_eq!(good, again);
        assert_eq!(c.inner().calls.load(Ordering::SeqCst), 2);
        assert_eq!(c.warnings().len(), 1);
        assert_eq!(decode(&fs::read(&path).unwrap(), 32).unwrap(), good.values());
    }

    #[test]
    fn persisted_bytes_round_trip_bitwise() {
        let v = crate::embedding::embed_hashing("round trip check", 64).unwrap();
        let back = decode(&encode(v.values()), 64).unwrap();
        let bits = |x: &[f32]| x.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(v.values()));
        assert!(decode(&encode(v.values()), 32).is_none());
    }

    #[test]
    fn batch_mixes_hits_and_misses_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let c = CachedEmbedder::new(counting(), dir.path()).unwrap();
        c.embed("b").unwrap();
        let out = c.embed_batch(&["a", "b", "c"]).unwrap();
        let direct = HashingEmbedder::new(32).unwrap().embed_batch(&["a", "b", "c"]).unwrap();
        assert_eq!(out, direct);
        assert_eq!(c.inner().calls.load(Ordering::SeqCst), 3);
    }
}
