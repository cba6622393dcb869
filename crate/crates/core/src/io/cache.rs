//! Binary feature cache: `"NMMF"`, `u16` version, `u32` frames, `u32` dim,
//! then row-major little-endian `f32` values.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::binary::{write_atomic, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::sequence::FeatureSequence;

pub const CACHE_MAGIC: &[u8; 4] = b"NMMF";
pub const CACHE_VERSION: u16 = 1;
pub const CACHE_HEADER_BYTES: usize = 14;

pub fn encode_features(seq: &FeatureSequence) -> Vec<u8> {
    let mut w = ByteWriter::default();
    w.bytes(CACHE_MAGIC);
    w.u16(CACHE_VERSION);
    w.len(seq.len());
    w.len(seq.dim());
    for &v in seq.as_slice() {
        w.bytes(&(v as f32).to_le_bytes());
    }
    w.buf
}

pub fn decode_features(bytes: &[u8], path: &Path) -> Result<FeatureSequence> {
    let mut r = ByteReader::new(bytes, path);
    if r.bytes(4)? != CACHE_MAGIC {
        return Err(r.error("not a feature cache file"));
    }
    let version = r.u16()?;
    if version != CACHE_VERSION {
        return Err(r.error(format!("unsupported cache version {version}")));
    }
    let (t, d) = (r.len()?, r.len()?);
    let expected = t.checked_mul(d).and_then(|n| n.checked_mul(4)).ok_or_else(|| r.error("header overflows"))?;
    if r.remaining() != expected {
        return Err(r.error(format!("payload is {} bytes, header implies {expected}", r.remaining())));
    }
    let data = r
        .bytes(expected)?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    FeatureSequence::new(data, d).map_err(|e| r.error(e.to_string()))
}

/// Values pass through `f32`, so a sequence read back equals
/// `round_to_stored(seq)`.
pub fn write_features(path: impl AsRef<Path>, seq: &FeatureSequence) -> Result<()> {
    write_atomic(path.as_ref(), &encode_features(seq))
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes, path)
}

/// The sequence as it will read back from a cache file.
pub fn round_to_stored(seq: &FeatureSequence) -> FeatureSequence {
    let mut out = seq.clone();
    out.as_mut_slice().iter_mut().for_each(|v| *v = *v as f32 as f64);
    out
}

/// Hex key identifying one segment of one audio file under one feature
/// configuration.
pub fn cache_key(audio_path: &Path, start: usize, end: usize, config_fingerprint: u64) -> String {
    let mut h = Sha256::new();
    h.update(audio_path.to_string_lossy().as_bytes());
    h.update([0]);
    h.update((start as u64).to_le_bytes());
    h.update((end as u64).to_le_bytes());
    h.update(config_fingerprint.to_le_bytes());
    h.finalize()[..16].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn cache_path(cache_dir: &Path, audio_path: &Path, start: usize, end: usize, config_fingerprint: u64) -> PathBuf {
    cache_dir.join(format!("{}.nmmf", cache_key(audio_path, start, end, config_fingerprint)))
}
