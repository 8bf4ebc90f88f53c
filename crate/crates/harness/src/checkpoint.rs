//! Binary checkpoint format.
//!
//! ```text
//! "MDNZ"                      magic
//! u32                         format version
//! u16 + UTF-8                 arch descriptor, e.g. "dncnn-d5-c16-k3-ch1"
//! --- tensor table (CRC-protected) ---
//! u32                         tensor count
//! per tensor:
//!   u16 + UTF-8               name
//!   u8                        rank
//!   u32 * rank                dims
//!   f32 LE * prod(dims)       values, row-major
//! --- end of table ---
//! u32                         CRC-32 of the tensor table
//! ```
//!
//! All integers are little-endian.

use std::path::Path;

use mdn_core::{Arch, NetworkParams};

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 4] = b"MDNZ";
pub const VERSION: u32 = 1;

pub fn encode(params: &NetworkParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 4 * params.num_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_str(&mut out, &params.arch().to_string());
    let table_start = out.len();
    let layout = params.tensor_layout();
    out.extend_from_slice(&(layout.len() as u32).to_le_bytes());
    for ((name, dims), values) in layout.iter().zip(params.tensors()) {
        put_str(&mut out, name);
        out.push(dims.len() as u8);
        for &d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out[table_start..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn decode(bytes: &[u8]) -> Result<NetworkParams> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(bad("not an MDNZ checkpoint"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let arch: Arch = r
        .string()?
        .parse()
        .map_err(|e: mdn_core::Error| bad(format!("arch descriptor: {e}")))?;
    let table_start = r.pos;
    if bytes.len() < table_start + 4 {
        return Err(bad("truncated checkpoint"));
    }
    let table_end = bytes.len() - 4;
    let stored = u32::from_le_bytes(bytes[table_end..].try_into().expect("4 bytes"));
    if crc32fast::hash(&bytes[table_start..table_end]) != stored {
        return Err(bad("checkpoint CRC mismatch"));
    }
    let mut r = Reader {
        bytes: &bytes[..table_end],
        pos: table_start,
    };
    let expected = NetworkParams::zeros(arch)?.tensor_layout();
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(bad(format!("{arch} has {} tensors, checkpoint has {count}", expected.len())));
    }
    let mut tensors = Vec::with_capacity(count);
    for (name, dims) in &expected {
        let got_name = r.string()?;
        let rank = r.take(1)?[0] as usize;
        let got_dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if &got_name != name || &got_dims != dims {
            return Err(bad(format!("expected tensor {name} {dims:?}, found {got_name} {got_dims:?}")));
        }
        let n: usize = dims.iter().product();
        let raw = r.take(4 * n)?;
        tensors.push(
            raw.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect(),
        );
    }
    if r.pos != table_end {
        return Err(bad("trailing bytes after tensor table"));
    }
    Ok(NetworkParams::from_tensors(arch, tensors)?)
}

pub fn save(path: &Path, params: &NetworkParams) -> Result<()> {
    std::fs::write(path, encode(params)).map_err(|e| HarnessError::io(path, e))
}

pub fn load(path: &Path) -> Result<NetworkParams> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        HarnessError::Data(msg) => HarnessError::Data(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u16).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::data(msg)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(bad("truncated checkpoint")),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let len = u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")) as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| bad("name is not UTF-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mdn_core::Rng;

    fn params() -> NetworkParams {
        let arch = Arch { depth: 3, width: 4, kernel: 3, channels: 1 };
        let mut p = NetworkParams::init(arch, &mut Rng::new(3)).unwrap();
        p.layers_mut()[2].weights[0] = -0.0;
        p.layers_mut()[2].bias[0] = f32::MIN_POSITIVE / 2.0;
        p
    }

    fn bits(p: &NetworkParams) -> Vec<u32> {
        p.tensors().flat_map(|t| t.iter().map(|v| v.to_bits())).collect()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let p = params();
        let bytes = encode(&p);
        let q = decode(&bytes).unwrap();
        assert_eq!(q.arch(), p.arch());
        assert_eq!(bits(&q), bits(&p));
        assert_eq!(encode(&q), bytes);
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&params());
        assert_eq!(&bytes[..4], b"MDNZ");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        let len = u16::from_le_bytes(bytes[8..10].try_into().unwrap()) as usize;
        assert_eq!(&bytes[10..10 + len], b"dncnn-d3-c4-k3-ch1");
        let count = u32::from_le_bytes(bytes[10 + len..14 + len].try_into().unwrap());
        assert_eq!(count, 6);
    }

    #[test]
    fn corrupted_payload_is_refused() {
        let mut bytes = encode(&params());
        let i = bytes.len() - 10;
        bytes[i] ^= 0x40;
        let err = decode(&bytes).unwrap_err();
        assert!(err.to_string().contains("CRC"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn corrupted_crc_is_refused() {
        let mut bytes = encode(&params());
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        assert!(decode(&bytes).is_err());
    }

    #[test]
    fn truncation_and_bad_magic() {
        let bytes = encode(&params());
        assert!(decode(&bytes[..bytes.len() / 2]).is_err());
        assert!(decode(&bytes[..6]).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(decode(&wrong).is_err());
        let mut v2 = bytes;
        v2[4] = 2;
        assert!(decode(&v2).unwrap_err().to_string().contains("version"));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("theta.mdnz");
        let p = params();
        save(&path, &p).unwrap();
        assert_eq!(bits(&load(&path).unwrap()), bits(&p));
        assert!(load(&dir.path().join("missing")).is_err());
    }
}
