//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! magic      8 bytes  "RIFTCKPT"
//! version    u32
//! digest     32 bytes SHA-256 of the network description
//! count      u32      number of module entries
//! entry*     name_len u32, name bytes, has_bias u8,
//!            weight tensor, [bias tensor]
//! checksum   32 bytes SHA-256 of every preceding byte
//! ```
//!
//! A tensor is `rank u32`, `rank` dims as u64, then the f64 payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::network::{LayerParams, NetworkSpec, ParamSet};
use crate::numerics::Tensor;

pub const MAGIC: &[u8; 8] = b"RIFTCKPT";
pub const VERSION: u32 = 1;
const HASH_LEN: usize = 32;
const HEADER_LEN: usize = 8 + 4 + HASH_LEN + 4;

pub fn spec_digest(spec: &NetworkSpec) -> [u8; HASH_LEN] {
    Sha256::digest(spec.describe().as_bytes()).into()
}

pub fn encode_checkpoint(params: &ParamSet, spec: &NetworkSpec) -> Result<Vec<u8>> {
    params.validate(spec)?;
    let mut buf = Vec::with_capacity(HEADER_LEN + params.num_params() * 8 + 256);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&spec_digest(spec));
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, p) in params.iter() {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(p.bias.is_some() as u8);
        write_tensor(&mut buf, &p.weight);
        if let Some(b) = &p.bias {
            write_tensor(&mut buf, b);
        }
    }
    let checksum: [u8; HASH_LEN] = Sha256::digest(&buf).into();
    buf.extend_from_slice(&checksum);
    Ok(buf)
}

fn write_tensor(buf: &mut Vec<u8>, t: &Tensor) {
    buf.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
    for &d in t.shape() {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn decode_checkpoint(bytes: &[u8], spec: &NetworkSpec) -> Result<ParamSet> {
    if bytes.len() < HEADER_LEN + HASH_LEN {
        return Err(Error::Truncated);
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::BadMagic);
    }
    let (body, checksum) = bytes.split_at(bytes.len() - HASH_LEN);
    let expected: [u8; HASH_LEN] = Sha256::digest(body).into();
    if expected.as_slice() != checksum {
        return Err(Error::ChecksumMismatch);
    }
    let mut r = Reader { buf: body, pos: 8 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    if r.take(HASH_LEN)? != spec_digest(spec).as_slice() {
        return Err(Error::DigestMismatch);
    }
    let count = r.u32()? as usize;
    let mut entries = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Malformed("entry name is not UTF-8".into()))?
            .to_string();
        let has_bias = match r.take(1)?[0] {
            0 => false,
            1 => true,
            b => return Err(Error::Malformed(format!("bad bias flag {b}"))),
        };
        let weight = r.tensor()?;
        let bias = if has_bias { Some(r.tensor()?) } else { None };
        entries.push((name, LayerParams { weight, bias }));
    }
    if r.pos != body.len() {
        return Err(Error::Malformed("trailing bytes after entries".into()));
    }
    ParamSet::from_entries(spec, entries)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(Error::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tensor(&mut self) -> Result<Tensor> {
        let rank = self.u32()? as usize;
        if rank == 0 || rank > 8 {
            return Err(Error::Malformed(format!("bad tensor rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(usize::try_from(self.u64()?).map_err(|_| Error::Malformed("dimension overflow".into()))?);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Malformed("tensor too large".into()))?;
        let bytes = self.take(numel.checked_mul(8).ok_or(Error::Truncated)?)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::new(shape, data).map_err(|e| Error::Malformed(e.to_string()))
    }
}

/// Writes atomically: the bytes go to a temporary sibling which is then
/// renamed over `path`.
pub fn save_checkpoint(params: &ParamSet, spec: &NetworkSpec, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(params, spec)?;
    write_atomic(path, &bytes)
}

pub fn load_checkpoint(path: &Path, spec: &NetworkSpec) -> Result<ParamSet> {
    decode_checkpoint(&fs::read(path)?, spec)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
