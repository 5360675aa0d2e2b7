//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//! `"SMFPCKPT"`, `u32` version, `u32` + config text, `u32` tensor count, then
//! per tensor `u32` + name, `u32` rows, `u32` cols, raw `f64` data; `u32` blob
//! count, then per blob `u32` + name, `u64` + bytes.

use std::path::Path;

use crate::diffcore::Tensor;

use super::{NetError, ParamSet};

const MAGIC: &[u8; 8] = b"SMFPCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub config: String,
    pub tensors: Vec<(String, Tensor)>,
    pub blobs: Vec<(String, Vec<u8>)>,
}

impl Checkpoint {
    pub fn new(config: impl Into<String>) -> Self {
        Checkpoint { config: config.into(), ..Default::default() }
    }

    pub fn push_tensor(&mut self, name: impl Into<String>, t: &Tensor) {
        self.tensors.push((name.into(), t.clone()));
    }

    /// Store every tensor of `p` under `prefix.name`.
    pub fn push_params(&mut self, prefix: &str, p: &ParamSet) {
        for (n, t) in p.iter() {
            self.push_tensor(format!("{prefix}.{n}"), t);
        }
    }

    pub fn push_blob(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.blobs.push((name.into(), bytes));
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor, NetError> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| NetError::Corrupt(format!("missing tensor {name}")))
    }

    pub fn blob(&self, name: &str) -> Result<&[u8], NetError> {
        self.blobs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
            .ok_or_else(|| NetError::Corrupt(format!("missing blob {name}")))
    }

    /// Overwrite `p` in place from tensors saved with [`Checkpoint::push_params`].
    pub fn fill_params(&self, prefix: &str, p: &mut ParamSet) -> Result<(), NetError> {
        let names: Vec<String> = p.names().to_vec();
        for (i, n) in names.iter().enumerate() {
            let t = self.tensor(&format!("{prefix}.{n}"))?;
            if t.shape() != p.tensors()[i].shape() {
                return Err(NetError::LayoutMismatch);
            }
            p.tensors_mut()[i] = t.clone();
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        put_str(&mut out, &self.config);
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            put_str(&mut out, name);
            out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.blobs.len() as u32).to_le_bytes());
        for (name, b) in &self.blobs {
            put_str(&mut out, name);
            out.extend_from_slice(&(b.len() as u64).to_le_bytes());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NetError> {
        let mut r = Reader { buf: bytes, at: 0 };
        if r.take(8)? != MAGIC {
            return Err(NetError::Corrupt("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(NetError::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
        }
        let config = r.string()?;
        let n = r.u32()? as usize;
        let mut tensors = Vec::new();
        for _ in 0..n {
            let name = r.string()?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let len = rows.checked_mul(cols).ok_or_else(|| NetError::Corrupt("tensor size".into()))?;
            let raw = r.take(len.checked_mul(8).ok_or_else(|| NetError::Corrupt("tensor size".into()))?)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            tensors.push((name, Tensor::from_vec(rows, cols, data)?));
        }
        let nb = r.u32()? as usize;
        let mut blobs = Vec::new();
        for _ in 0..nb {
            let name = r.string()?;
            let len = r.u64()? as usize;
            blobs.push((name, r.take(len)?.to_vec()));
        }
        if r.at != bytes.len() {
            return Err(NetError::Corrupt("trailing bytes".into()));
        }
        Ok(Checkpoint { config, tensors, blobs })
    }

    pub fn save(&self, path: &Path) -> Result<(), NetError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NetError> {
        Checkpoint::from_bytes(&std::fs::read(path)?)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NetError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| NetError::Corrupt("unexpected end of file".into()))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NetError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NetError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, NetError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| NetError::Corrupt("invalid utf-8".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut c = Checkpoint::new("seed = 3\n");
        c.push_tensor("w", &Tensor::from_vec(2, 2, vec![1.0, -0.0, f64::MIN_POSITIVE, 1e300]).unwrap());
        c.push_blob("rng", vec![1, 2, 3]);
        c
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back.config, c.config);
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(back.tensor("w").unwrap()), bits(c.tensor("w").unwrap()));
        assert_eq!(back.blob("rng").unwrap(), &[1, 2, 3]);
    }

    #[test]
    fn wrong_version_is_reported() {
        let mut b = sample().to_bytes();
        b[8..12].copy_from_slice(&7u32.to_le_bytes());
        assert_eq!(Checkpoint::from_bytes(&b), Err(NetError::VersionMismatch { found: 7, expected: CHECKPOINT_VERSION }));
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let b = sample().to_bytes();
        assert!(matches!(Checkpoint::from_bytes(&b[..b.len() - 1]), Err(NetError::Corrupt(_))));
        assert!(matches!(Checkpoint::from_bytes(b"NOTMAGIC"), Err(NetError::Corrupt(_))));
    }
}
