//! On-disk cache of reference distributions.
//!
//! File layout, all integers little-endian:
//!
//! ```text
//! magic "DPWREF\0\0" | format u32 | n u64 | epsilon bits u64 | c u64 | seed u64
//! | checksum u64 | c draws as f64
//! ```
//!
//! The checksum is FNV-1a over the draw bytes. Writers hold an exclusive lock
//! on a sibling `.lock` file and publish by atomic rename, so concurrent
//! processes asking for the same key generate it once.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{simulate_reference, ReferenceDistribution, ReferenceSource};
use crate::privacy::PrivacyParams;
use crate::rng::Seed;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"DPWREF\0\0";
const HEADER_LEN: usize = 8 + 4 + 8 * 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub n: usize,
    pub epsilon_bits: u64,
    pub c: usize,
    pub seed: Seed,
}

impl CacheKey {
    pub fn new(n: usize, params: PrivacyParams, c: usize, seed: Seed) -> Self {
        CacheKey {
            n,
            epsilon_bits: params.epsilon().to_bits(),
            c,
            seed,
        }
    }

    pub fn of(reference: &ReferenceDistribution) -> Self {
        CacheKey {
            n: reference.n(),
            epsilon_bits: reference.epsilon().to_bits(),
            c: reference.c(),
            seed: reference.seed(),
        }
    }

    pub fn file_name(&self) -> String {
        format!(
            "ref-v{FORMAT_VERSION}-n{}-e{:016x}-c{}-s{:016x}.bin",
            self.n, self.epsilon_bits, self.c, self.seed.0
        )
    }
}

fn fnv1a(bytes: &[u8], mut hash: u64) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;

fn encode_header(key: &CacheKey, version: u32, checksum: u64) -> Vec<u8> {
    let mut h = Vec::with_capacity(HEADER_LEN);
    h.extend_from_slice(MAGIC);
    h.extend_from_slice(&version.to_le_bytes());
    for word in [
        key.n as u64,
        key.epsilon_bits,
        key.c as u64,
        key.seed.0,
        checksum,
    ] {
        h.extend_from_slice(&word.to_le_bytes());
    }
    h
}

fn write_to(path: &Path, reference: &ReferenceDistribution, version: u32) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let key = CacheKey::of(reference);
    let mut checksum = FNV_OFFSET;
    for x in reference.draws() {
        checksum = fnv1a(&x.to_le_bytes(), checksum);
    }
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        w.write_all(&encode_header(&key, version, checksum))
            .map_err(|e| Error::io(tmp.path(), e))?;
        for x in reference.draws() {
            w.write_all(&x.to_le_bytes())
                .map_err(|e| Error::io(tmp.path(), e))?;
        }
        w.flush().map_err(|e| Error::io(tmp.path(), e))?;
    }
    tmp.as_file()
        .sync_all()
        .map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Writes `reference` into `dir` under its key and returns the file path.
pub fn cache_reference(reference: &ReferenceDistribution, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(CacheKey::of(reference).file_name());
    write_to(&path, reference, FORMAT_VERSION)?;
    Ok(path)
}

/// Loads the reference for `key` from `dir`.
///
/// A missing file or one written by another format version is a miss
/// (`Ok(None)`). Anything else that does not check out is
/// [`Error::CorruptCache`].
pub fn load_reference(key: &CacheKey, dir: &Path) -> Result<Option<ReferenceDistribution>> {
    let path = dir.join(key.file_name());
    let file = match File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(Error::io(&path, e)),
    };
    let corrupt = |reason: String| Error::CorruptCache {
        path: path.clone(),
        reason,
    };
    let mut r = BufReader::new(file);
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|e| corrupt(format!("short header: {e}")))?;
    if &header[..8] != MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    let word = |i: usize| u64::from_le_bytes(header[12 + 8 * i..20 + 8 * i].try_into().unwrap());
    let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Ok(None);
    }
    let stored = CacheKey {
        n: word(0) as usize,
        epsilon_bits: word(1),
        c: word(2) as usize,
        seed: Seed(word(3)),
    };
    if stored != *key {
        return Err(corrupt(format!(
            "header {stored:?} does not match the file name"
        )));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io(&path, e))?;
    if bytes.len() != key.c * 8 {
        return Err(corrupt(format!(
            "expected {} draws, found {} bytes",
            key.c,
            bytes.len()
        )));
    }
    if fnv1a(&bytes, FNV_OFFSET) != word(4) {
        return Err(corrupt("checksum mismatch".into()));
    }
    let draws = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    ReferenceDistribution::from_sorted_draws(
        key.n,
        f64::from_bits(key.epsilon_bits),
        key.seed,
        draws,
    )
    .map(Some)
    .map_err(|e| corrupt(e.to_string()))
}

/// Exclusive advisory lock on `<file>.lock`, released on drop.
struct LockGuard(File);

impl LockGuard {
    fn acquire(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        file.lock().map_err(|e| Error::io(path, e))?;
        Ok(LockGuard(file))
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = self.0.unlock();
    }
}

/// Reference source backed by a cache directory, with an in-memory layer.
#[derive(Debug)]
pub struct CachedReferences {
    dir: PathBuf,
    c: usize,
    seed: Seed,
    memory: Mutex<HashMap<CacheKey, Arc<ReferenceDistribution>>>,
}

impl CachedReferences {
    pub fn new(dir: impl Into<PathBuf>, c: usize, seed: Seed) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(CachedReferences {
            dir,
            c,
            seed,
            memory: Mutex::new(HashMap::new()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Loads `key` or generates and stores it, holding the key's lock throughout.
    fn load_or_build(
        &self,
        key: &CacheKey,
        params: PrivacyParams,
    ) -> Result<ReferenceDistribution> {
        let _lock = LockGuard::acquire(&self.dir.join(format!("{}.lock", key.file_name())))?;
        match load_reference(key, &self.dir) {
            Ok(Some(r)) => return Ok(r),
            Ok(None) => {}
            Err(e @ Error::CorruptCache { .. }) => log::warn!("{e}; regenerating"),
            Err(e) => return Err(e),
        }
        let r = simulate_reference(key.n, params, key.c, key.seed)?;
        cache_reference(&r, &self.dir)?;
        Ok(r)
    }
}

impl ReferenceSource for CachedReferences {
    fn reference(&self, n: usize, params: PrivacyParams) -> Result<Arc<ReferenceDistribution>> {
        let key = CacheKey::new(n, params, self.c, self.seed);
        if let Some(r) = self.memory.lock().expect("cache map poisoned").get(&key) {
            return Ok(Arc::clone(r));
        }
        let r = Arc::new(self.load_or_build(&key, params)?);
        let mut map = self.memory.lock().expect("cache map poisoned");
        Ok(Arc::clone(map.entry(key).or_insert(r)))
    }
}
