//! `BNKW` weight files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "BNKW"            4 bytes
//! version           u32
//! tensor count      u32
//! per tensor:
//!   name length     u16, then the UTF-8 name
//!   rank            u8, then each dim as u32
//!   values          f32 × product(dims)
//! CRC-32            u32 over every preceding byte
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use banknote_core::{FreezeScope, Model, ParamStore, Tensor};

pub const MAGIC: [u8; 4] = *b"BNKW";
pub const VERSION: u32 = 1;

const HEADER_LEN: usize = 12;
const CRC_LEN: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum WeightError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("bad magic {0:02x?}, expected \"BNKW\"")]
    BadMagic([u8; 4]),
    #[error("checksum failure: {0}")]
    Checksum(String),
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("malformed weight file: {0}")]
    Malformed(String),
    #[error("weights do not match the model: {0}")]
    ShapeMismatch(String),
}

type Result<T> = std::result::Result<T, WeightError>;

/// Serializes named tensors in the given order.
pub fn encode<'a>(
    tensors: impl IntoIterator<Item = (&'a str, &'a Tensor<f32>)>,
) -> Result<Vec<u8>> {
    let tensors: Vec<_> = tensors.into_iter().collect();
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = u32::try_from(tensors.len())
        .map_err(|_| WeightError::Malformed("too many tensors".into()))?;
    out.extend_from_slice(&count.to_le_bytes());
    for (name, t) in tensors {
        let len = u16::try_from(name.len())
            .map_err(|_| WeightError::Malformed(format!("tensor name of {} bytes", name.len())))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        let rank = u8::try_from(t.rank())
            .map_err(|_| WeightError::Malformed(format!("{name}: rank {}", t.rank())))?;
        out.push(rank);
        for &d in t.shape() {
            let d = u32::try_from(d)
                .map_err(|_| WeightError::Malformed(format!("{name}: dimension {d}")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                WeightError::Malformed(format!("{what} runs past the end of the payload"))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

/// Parses and validates a weight file image: magic, checksum, version,
/// then the tensor records.
pub fn decode(bytes: &[u8]) -> Result<Vec<(String, Tensor<f32>)>> {
    if bytes.len() >= MAGIC.len() && bytes[..4] != MAGIC {
        return Err(WeightError::BadMagic(bytes[..4].try_into().unwrap()));
    }
    if bytes.len() < HEADER_LEN + CRC_LEN {
        return Err(WeightError::Checksum(format!(
            "file holds {} bytes, too short for header and checksum",
            bytes.len()
        )));
    }
    let (payload, tail) = bytes.split_at(bytes.len() - CRC_LEN);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(WeightError::Checksum(format!(
            "stored {stored:#010x}, computed {computed:#010x}"
        )));
    }
    let mut r = Reader {
        bytes: payload,
        pos: 4,
    };
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(WeightError::Version(version));
    }
    let count = r.u32("tensor count")? as usize;
    let mut out: Vec<(String, Tensor<f32>)> = Vec::new();
    for k in 0..count {
        let len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|_| WeightError::Malformed(format!("tensor {k}: name is not UTF-8")))?
            .to_string();
        let rank = r.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dimension")? as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| WeightError::Malformed(format!("{name}: shape {shape:?} overflows")))?;
        let values = r
            .take(n, &name)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if out.iter().any(|(n, _)| *n == name) {
            return Err(WeightError::Malformed(format!("duplicate tensor {name:?}")));
        }
        let t = Tensor::new(shape, values).map_err(|e| WeightError::Malformed(e.to_string()))?;
        out.push((name, t));
    }
    if r.pos != payload.len() {
        return Err(WeightError::Malformed(format!(
            "{} unread bytes after the last tensor",
            payload.len() - r.pos
        )));
    }
    Ok(out)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> WeightError + '_ {
    move |source| WeightError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` next to `path` and renames over it, so readers never see
/// a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn save_weights(params: &ParamStore<f32>, path: &Path) -> Result<()> {
    write_atomic(path, &encode(params.named())?)
}

pub fn save_named(tensors: &[(String, Tensor<f32>)], path: &Path) -> Result<()> {
    write_atomic(path, &encode(tensors.iter().map(|(n, t)| (n.as_str(), t)))?)
}

/// Reads every tensor of a weight file in file order.
pub fn load_weights(path: &Path) -> Result<Vec<(String, Tensor<f32>)>> {
    decode(&fs::read(path).map_err(io_err(path))?)
}

/// Loads a complete parameter set for `model`.
pub fn load_params(model: &Model, path: &Path) -> Result<ParamStore<f32>> {
    ParamStore::from_named(model, load_weights(path)?)
        .map_err(|e| WeightError::ShapeMismatch(e.to_string()))
}

/// Overwrites the backbone tensors of `params` from a file; head tensors
/// in the file are ignored.
pub fn load_backbone(model: &Model, path: &Path, params: &mut ParamStore<f32>) -> Result<()> {
    params
        .load_from(model, load_weights(path)?, FreezeScope::Backbone)
        .map_err(|e| WeightError::ShapeMismatch(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_built_file_matches_layout() {
        let t = Tensor::new([2], vec![1.0f32, -2.5]).unwrap();
        let bytes = encode([("ab", &t)]).unwrap();
        let mut want = b"BNKW".to_vec();
        want.extend_from_slice(&[1, 0, 0, 0, 1, 0, 0, 0, 2, 0, b'a', b'b', 1, 2, 0, 0, 0]);
        want.extend_from_slice(&1.0f32.to_le_bytes());
        want.extend_from_slice(&(-2.5f32).to_le_bytes());
        let crc = crc32fast::hash(&want);
        want.extend_from_slice(&crc.to_le_bytes());
        assert_eq!(bytes, want);
        assert_eq!(decode(&bytes).unwrap(), vec![("ab".to_string(), t)]);
    }

    #[test]
    fn scalar_tensor_has_rank_zero() {
        let t = Tensor::new(Vec::<usize>::new(), vec![3.0f32]).unwrap();
        let back = decode(&encode([("s", &t)]).unwrap()).unwrap();
        assert_eq!(back[0].1, t);
    }

    #[test]
    fn error_categories() {
        let t = Tensor::new([3], vec![1.0f32, 2.0, 3.0]).unwrap();
        let good = encode([("x", &t)]).unwrap();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(WeightError::BadMagic(_))));
        let mut bad = good.clone();
        bad[20] ^= 0x40;
        assert!(matches!(decode(&bad), Err(WeightError::Checksum(_))));
        assert!(matches!(
            decode(&good[..good.len() - 3]),
            Err(WeightError::Checksum(_))
        ));
        assert!(matches!(decode(&good[..2]), Err(WeightError::Checksum(_))));
        let mut v2 = good[..good.len() - 4].to_vec();
        v2[4] = 2;
        let crc = crc32fast::hash(&v2);
        v2.extend_from_slice(&crc.to_le_bytes());
        assert!(matches!(decode(&v2), Err(WeightError::Version(2))));
    }

    #[test]
    fn count_beyond_payload_is_malformed() {
        let mut b = b"BNKW".to_vec();
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&5u32.to_le_bytes());
        let crc = crc32fast::hash(&b);
        b.extend_from_slice(&crc.to_le_bytes());
        assert!(matches!(decode(&b), Err(WeightError::Malformed(_))));
    }
}
