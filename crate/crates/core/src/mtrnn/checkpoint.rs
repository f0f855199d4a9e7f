//! Binary checkpoints.
//!
//! `model.bin`: magic `PCMTRNN\0`, `u32` version, `u64` length of the
//! architecture JSON, the JSON itself, `u64` parameter count, then the
//! parameters as little-endian `f64` in layout order (latent MLP, layers
//! fastest first with `W, U, A, b, ln_gain, ln_bias, G, c`, motor head,
//! sensory head; each MLP as `w1, b1, w2, b2`).
//!
//! `latent.bin`: magic `PCLATENT`, `u32` version, `u64` rows, `u64`
//! columns, row-major little-endian `f64`.

use std::fs;
use std::path::Path;

use super::{LatentCodes, MtrnnArch, MtrnnModel};
use crate::error::{Error, Result};

const MODEL_MAGIC: &[u8; 8] = b"PCMTRNN\0";
const LATENT_MAGIC: &[u8; 8] = b"PCLATENT";
pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

fn bad(path: &Path, reason: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or_else(|| bad(self.path, "file is truncated"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| bad(self.path, "length does not fit in memory"))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| bad(self.path, "length overflow"))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn header(&mut self, magic: &[u8; 8]) -> Result<()> {
        if self.take(8)? != magic {
            return Err(bad(self.path, "wrong magic bytes"));
        }
        let version = self.u32()?;
        if version != CHECKPOINT_FORMAT_VERSION {
            return Err(bad(self.path, format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(bad(self.path, "trailing bytes"));
        }
        Ok(())
    }
}

fn push_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn model_to_bytes(model: &MtrnnModel) -> Vec<u8> {
    let arch = serde_json::to_vec(model.arch()).expect("architecture serializes");
    let mut out = Vec::with_capacity(32 + arch.len() + model.param_count() * 8);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&CHECKPOINT_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(arch.len() as u64).to_le_bytes());
    out.extend_from_slice(&arch);
    out.extend_from_slice(&(model.param_count() as u64).to_le_bytes());
    push_f64s(&mut out, model.params());
    out
}

pub fn model_from_bytes(bytes: &[u8], path: &Path) -> Result<MtrnnModel> {
    let mut r = Reader { bytes, pos: 0, path };
    r.header(MODEL_MAGIC)?;
    let arch_len = r.u64()?;
    let arch: MtrnnArch =
        serde_json::from_slice(r.take(arch_len)?).map_err(|e| bad(path, format!("architecture: {e}")))?;
    let count = r.u64()?;
    let params = r.f64s(count)?;
    r.finish()?;
    MtrnnModel::from_params(arch, params).map_err(|e| bad(path, e.to_string()))
}

pub fn save_model(model: &MtrnnModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<MtrnnModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes, path)
}

pub fn save_latent(latent: &LatentCodes, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(28 + latent.as_slice().len() * 8);
    out.extend_from_slice(LATENT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(latent.len() as u64).to_le_bytes());
    out.extend_from_slice(&(latent.dim() as u64).to_le_bytes());
    push_f64s(&mut out, latent.as_slice());
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_latent(path: &Path) -> Result<LatentCodes> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0, path };
    r.header(LATENT_MAGIC)?;
    let n = r.u64()?;
    let q = r.u64()?;
    let data = r.f64s(n.checked_mul(q).ok_or_else(|| bad(path, "length overflow"))?)?;
    r.finish()?;
    LatentCodes::from_flat(n, q, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mtrnn::init_params;

    #[test]
    fn model_round_trip() {
        let model = init_params(&MtrnnArch::new(6, 3, 16, 5), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bin");
        save_model(&model, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
    }

    #[test]
    fn latent_round_trip() {
        let z = LatentCodes::from_rows(&[vec![1.0, -2.5], vec![0.125, 3.0], vec![f64::MIN_POSITIVE, 0.0]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("latent.bin");
        save_latent(&z, &path).unwrap();
        assert_eq!(load_latent(&path).unwrap(), z);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let model = init_params(&MtrnnArch::new(2, 1, 4, 3), 1).unwrap();
        let bytes = model_to_bytes(&model);
        let p = Path::new("mem");
        assert!(model_from_bytes(&bytes[..bytes.len() - 1], p).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(model_from_bytes(&wrong, p).is_err());
        let mut longer = bytes;
        longer.push(0);
        assert!(matches!(model_from_bytes(&longer, p), Err(Error::Checkpoint { .. })));
    }
}
