//! Trace checkpoint files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//!      0     8  magic "QLABTRC\0"
//!      8     2  format version (1)
//!     10     1  perturbation (0 none, 1 alternating)
//!     11     1  value width in bytes (4 or 8)
//!     12     1  seed length s
//!     13     1  outcome (0 alive, 1 weak death, 2 strong death)
//!     14     1  bad-index mask (bit 0: t1, bit 1: t2)
//!     15     1  reserved, zero
//!     16     8  horizon
//!     24     8  len
//!     32     8  death step (0 when alive)
//!     40   8*s  seed values
//!      …  w*len Q(1..=len), w = value width
//!      …     4  CRC-32 of every preceding byte
//! ```

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::{BadIndex, Outcome, Perturbation, RecursionConfig, Seed, Trace, ValueWidth, Values};

pub const MAGIC: [u8; 8] = *b"QLABTRC\0";
pub const VERSION: u16 = 1;
const FIXED_HEADER: usize = 40;
const CHUNK: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a trace checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u16),
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

fn truncated(e: io::Error) -> StoreError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        StoreError::Truncated
    } else {
        StoreError::Io(e)
    }
}

struct HashingWriter<W> {
    inner: W,
    hasher: crc32fast::Hasher,
}

impl<W: Write> HashingWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> io::Result<()> {
        self.hasher.update(bytes);
        self.inner.write_all(bytes)
    }
}

struct HashingReader<R> {
    inner: R,
    hasher: crc32fast::Hasher,
}

impl<R: Read> HashingReader<R> {
    fn take(&mut self, buf: &mut [u8]) -> Result<(), StoreError> {
        self.inner.read_exact(buf).map_err(truncated)?;
        self.hasher.update(buf);
        Ok(())
    }

    fn u64(&mut self) -> Result<u64, StoreError> {
        let mut b = [0u8; 8];
        self.take(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
}

fn header_bytes(trace: &Trace) -> Vec<u8> {
    let config = trace.config();
    let outcome = trace.outcome();
    let (first, second) = outcome.bad_indices();
    let mut h = Vec::with_capacity(FIXED_HEADER + 8 * config.seed.len());
    h.extend_from_slice(&MAGIC);
    h.extend_from_slice(&VERSION.to_le_bytes());
    h.push(match config.perturbation {
        Perturbation::None => 0,
        Perturbation::Alternating => 1,
    });
    h.push(config.width.bytes() as u8);
    h.push(config.seed.len() as u8);
    h.push(match outcome {
        Outcome::Alive => 0,
        Outcome::WeakDeath { .. } => 1,
        Outcome::StrongDeath { .. } => 2,
    });
    h.push(first as u8 | (second as u8) << 1);
    h.push(0);
    h.extend_from_slice(&(config.horizon as u64).to_le_bytes());
    h.extend_from_slice(&(trace.len() as u64).to_le_bytes());
    h.extend_from_slice(&(outcome.step().unwrap_or(0) as u64).to_le_bytes());
    for &v in config.seed.values() {
        h.extend_from_slice(&v.to_le_bytes());
    }
    h
}

/// Writes `trace` to `path` through a temporary file and a rename.
pub fn save(trace: &Trace, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let path = path.as_ref();
    let tmp = temp_path(path);
    let result = write_to(trace, &tmp).and_then(|()| fs::rename(&tmp, path).map_err(StoreError::from));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub(crate) fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

fn write_to(trace: &Trace, path: &Path) -> Result<(), StoreError> {
    let file = File::create(path)?;
    let mut w = HashingWriter { inner: BufWriter::with_capacity(CHUNK, file), hasher: crc32fast::Hasher::new() };
    w.put(&header_bytes(trace))?;
    let mut buf = Vec::with_capacity(CHUNK);
    match trace.values() {
        Values::Narrow(v) => {
            for chunk in v[1..].chunks(CHUNK / 4) {
                buf.clear();
                chunk.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes()));
                w.put(&buf)?;
            }
        }
        Values::Wide(v) => {
            for chunk in v[1..].chunks(CHUNK / 8) {
                buf.clear();
                chunk.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes()));
                w.put(&buf)?;
            }
        }
    }
    let crc = w.hasher.finalize();
    let mut inner = w.inner;
    inner.write_all(&crc.to_le_bytes())?;
    inner.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Trace, StoreError> {
    let file = File::open(path)?;
    read_from(BufReader::with_capacity(CHUNK, file))
}

pub fn read_from<R: Read>(reader: R) -> Result<Trace, StoreError> {
    let mut r = HashingReader { inner: reader, hasher: crc32fast::Hasher::new() };

    let mut magic = [0u8; 8];
    r.take(&mut magic)?;
    if magic != MAGIC {
        return Err(StoreError::BadMagic);
    }
    let mut fixed = [0u8; 8];
    r.take(&mut fixed)?;
    let version = u16::from_le_bytes([fixed[0], fixed[1]]);
    if version != VERSION {
        return Err(StoreError::UnsupportedVersion(version));
    }
    let perturbation = match fixed[2] {
        0 => Perturbation::None,
        1 => Perturbation::Alternating,
        p => return Err(StoreError::Corrupt(format!("perturbation code {p}"))),
    };
    let width = match fixed[3] {
        4 => ValueWidth::Four,
        8 => ValueWidth::Eight,
        w => return Err(StoreError::Corrupt(format!("value width {w}"))),
    };
    let seed_len = fixed[4] as usize;
    let (outcome_code, mask) = (fixed[5], fixed[6]);
    let horizon = to_usize(r.u64()?)?;
    let len = to_usize(r.u64()?)?;
    let step = to_usize(r.u64()?)?;
    let seed_values = (0..seed_len).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
    let seed = Seed::with_max_len(seed_values, u8::MAX as usize).map_err(|e| StoreError::Corrupt(e.to_string()))?;

    let outcome = match (outcome_code, mask) {
        (0, 0) => Outcome::Alive,
        (1, 0b01) => Outcome::WeakDeath { step, bad: BadIndex::First },
        (1, 0b10) => Outcome::WeakDeath { step, bad: BadIndex::Second },
        (2, 0b11) => Outcome::StrongDeath { step },
        (c, m) => return Err(StoreError::Corrupt(format!("outcome {c} with mask {m:#b}"))),
    };
    let expected_len = outcome.step().map_or(horizon, |s| s - 1);
    if len != expected_len || len < seed.len() {
        return Err(StoreError::Corrupt(format!(
            "length {len} inconsistent with horizon {horizon} and outcome {outcome}"
        )));
    }
    let config = RecursionConfig { seed, perturbation, horizon, width };

    let mut buf = vec![0u8; CHUNK];
    let values = match width {
        ValueWidth::Four => {
            let mut v: Vec<u32> = Vec::with_capacity(len + 1);
            v.push(0);
            read_values(&mut r, &mut buf, len, 4, |b| v.push(u32::from_le_bytes(b.try_into().unwrap())))?;
            Values::from_narrow(v)
        }
        ValueWidth::Eight => {
            let mut v: Vec<u64> = Vec::with_capacity(len + 1);
            v.push(0);
            read_values(&mut r, &mut buf, len, 8, |b| v.push(u64::from_le_bytes(b.try_into().unwrap())))?;
            Values::from_wide(v)
        }
    };

    let computed = r.hasher.clone().finalize();
    let mut stored = [0u8; 4];
    r.inner.read_exact(&mut stored).map_err(truncated)?;
    let stored = u32::from_le_bytes(stored);
    if stored != computed {
        return Err(StoreError::Checksum { stored, computed });
    }
    let mut extra = [0u8; 1];
    if r.inner.read(&mut extra)? != 0 {
        return Err(StoreError::Corrupt("trailing bytes after checksum".into()));
    }

    let trace = Trace::from_parts(config, values, outcome);
    if trace.config().seed.values().iter().enumerate().any(|(i, &s)| trace.q(i + 1) != s) {
        return Err(StoreError::Corrupt("stored values disagree with the seed".into()));
    }
    Ok(trace)
}

fn to_usize(v: u64) -> Result<usize, StoreError> {
    usize::try_from(v).map_err(|_| StoreError::Corrupt(format!("{v} exceeds the address space")))
}

fn read_values<R: Read>(
    r: &mut HashingReader<R>,
    buf: &mut [u8],
    len: usize,
    width: usize,
    mut push: impl FnMut(&[u8]),
) -> Result<(), StoreError> {
    let per_chunk = buf.len() / width;
    let mut remaining = len;
    while remaining > 0 {
        let count = remaining.min(per_chunk);
        let bytes = &mut buf[..count * width];
        r.take(bytes)?;
        bytes.chunks_exact(width).for_each(&mut push);
        remaining -= count;
    }
    Ok(())
}
