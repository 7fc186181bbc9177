//! Binary tensor and measurement file formats.
//!
//! Both formats are little-endian with an 8-byte magic tag, a fixed
//! header, an f64 payload in canonical order, and a trailing FNV-1a
//! 64-bit checksum of the payload bytes. Measurement files carry the
//! full operator descriptor (seed, dims, ratio), from which the
//! compressive operator is rebuilt bit-exactly on read.
//!
//! Tensor payload order is the canonical unfolding order: band by band,
//! spatial positions column-major within each band (height index
//! fastest), i.e. element `(i, j, k)` at index `(i + j*h) + h*w*k`.

use crate::cs::CompressiveOperator;
use crate::error::{Error, Result};
use crate::tensor::HsiTensor;
use std::fs;
use std::io::Read;
use std::path::Path;

pub const TENSOR_MAGIC: &[u8; 8] = b"E3DTVT01";
pub const MEASUREMENT_MAGIC: &[u8; 8] = b"E3DTVM01";
/// Element type tag: width in bytes of a little-endian IEEE 754 float.
pub const DTYPE_F64: u32 = 8;

/// FNV-1a 64-bit over the payload bytes.
pub fn checksum(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    out.reserve(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format(format!(
                "{}: truncated file (needed {} bytes at offset {})",
                self.path.display(),
                n,
                self.pos
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Serialize a tensor to the on-disk format.
pub fn tensor_to_bytes(t: &HsiTensor) -> Vec<u8> {
    let (h, w, s) = t.dims();
    let mut out = Vec::with_capacity(8 + 16 + t.len() * 8 + 8);
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(s as u32).to_le_bytes());
    out.extend_from_slice(&DTYPE_F64.to_le_bytes());
    let payload_start = out.len();
    put_f64s(&mut out, &t.to_canonical_vec());
    let ck = checksum(&out[payload_start..]);
    out.extend_from_slice(&ck.to_le_bytes());
    out
}

pub fn tensor_from_bytes(bytes: &[u8], path: &Path) -> Result<HsiTensor> {
    let mut r = Reader {
        buf: bytes,
        pos: 0,
        path,
    };
    let magic = r.take(8)?;
    if magic != TENSOR_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic (not a tensor file)",
            path.display()
        )));
    }
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    let s = r.u32()? as usize;
    let dtype = r.u32()?;
    if dtype != DTYPE_F64 {
        return Err(Error::Format(format!(
            "{}: unsupported dtype tag {dtype}",
            path.display()
        )));
    }
    if h == 0 || w == 0 || s == 0 {
        return Err(Error::Format(format!(
            "{}: zero dimension {h}x{w}x{s}",
            path.display()
        )));
    }
    let count = h
        .checked_mul(w)
        .and_then(|hw| hw.checked_mul(s))
        .ok_or_else(|| Error::Format(format!("{}: dimension overflow", path.display())))?;
    let payload_start = r.pos;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(r.f64()?);
    }
    let stored = r.u64()?;
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{}: {} trailing bytes",
            path.display(),
            bytes.len() - r.pos
        )));
    }
    let computed = checksum(&bytes[payload_start..payload_start + count * 8]);
    if stored != computed {
        return Err(Error::ChecksumMismatch {
            path: path.display().to_string(),
            stored,
            computed,
        });
    }
    HsiTensor::new(h, w, s, &values).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Write atomically: a temp file in the target directory, then rename,
/// so failures leave no partial output.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp_write");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        e.into()
    })
}

pub fn write_tensor(path: &Path, t: &HsiTensor) -> Result<()> {
    atomic_write(path, &tensor_to_bytes(t))
}

pub fn read_tensor(path: &Path) -> Result<HsiTensor> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    tensor_from_bytes(&bytes, path)
}

/// Measurements plus the operator descriptor that reconstructs the
/// sampling operator exactly.
#[derive(Debug, Clone)]
pub struct MeasurementFile {
    pub seed: u64,
    pub h: usize,
    pub w: usize,
    pub s: usize,
    pub n_pad: usize,
    pub ratio: f64,
    pub y: Vec<f64>,
}

impl MeasurementFile {
    pub fn from_operator(op: &CompressiveOperator, y: Vec<f64>) -> Result<Self> {
        if y.len() != op.measurements() {
            return Err(Error::shape(
                format!("{} measurements", op.measurements()),
                format!("{}", y.len()),
            ));
        }
        let (h, w, s) = op.dims();
        Ok(MeasurementFile {
            seed: op.seed(),
            h,
            w,
            s,
            n_pad: op.padded_len(),
            ratio: op.ratio(),
            y,
        })
    }

    /// Rebuild the operator from the descriptor; verifies the recorded
    /// padded length and measurement count.
    pub fn operator(&self) -> Result<CompressiveOperator> {
        let op = CompressiveOperator::build(self.h, self.w, self.s, self.ratio, self.seed)?;
        if op.padded_len() != self.n_pad || op.measurements() != self.y.len() {
            return Err(Error::Format(format!(
                "operator descriptor mismatch: rebuilt (n_pad {}, m {}) vs stored (n_pad {}, m {})",
                op.padded_len(),
                op.measurements(),
                self.n_pad,
                self.y.len()
            )));
        }
        Ok(op)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 8 + 12 + 8 + 8 + 8 + self.y.len() * 8 + 8);
        out.extend_from_slice(MEASUREMENT_MAGIC);
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.h as u32).to_le_bytes());
        out.extend_from_slice(&(self.w as u32).to_le_bytes());
        out.extend_from_slice(&(self.s as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_pad as u64).to_le_bytes());
        out.extend_from_slice(&self.ratio.to_le_bytes());
        out.extend_from_slice(&(self.y.len() as u64).to_le_bytes());
        let payload_start = out.len();
        put_f64s(&mut out, &self.y);
        let ck = checksum(&out[payload_start..]);
        out.extend_from_slice(&ck.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader {
            buf: bytes,
            pos: 0,
            path,
        };
        let magic = r.take(8)?;
        if magic != MEASUREMENT_MAGIC {
            return Err(Error::Format(format!(
                "{}: bad magic (not a measurement file)",
                path.display()
            )));
        }
        let seed = r.u64()?;
        let h = r.u32()? as usize;
        let w = r.u32()? as usize;
        let s = r.u32()? as usize;
        let n_pad = r.u64()? as usize;
        let ratio = r.f64()?;
        let m = r.u64()? as usize;
        let payload_start = r.pos;
        let mut y = Vec::with_capacity(m);
        for _ in 0..m {
            y.push(r.f64()?);
        }
        let stored = r.u64()?;
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{}: {} trailing bytes",
                path.display(),
                bytes.len() - r.pos
            )));
        }
        let computed = checksum(&bytes[payload_start..payload_start + m * 8]);
        if stored != computed {
            return Err(Error::ChecksumMismatch {
                path: path.display().to_string(),
                stored,
                computed,
            });
        }
        Ok(MeasurementFile {
            seed,
            h,
            w,
            s,
            n_pad,
            ratio,
            y,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        atomic_write(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cs;
    use crate::harness::gen_phantom;
    use proptest::prelude::*;

    #[test]
    fn tensor_roundtrip_is_bitwise() {
        let t = gen_phantom(5, 7, 3, 2, 1.0, 9).unwrap();
        let bytes = tensor_to_bytes(&t);
        let back = tensor_from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(t, back);
        assert_eq!(bytes, tensor_to_bytes(&back));
    }

    #[test]
    fn payload_order_is_canonical() {
        // 2x2x2: header is 24 bytes, payload follows in canonical order.
        let t = HsiTensor::new(
            2,
            1,
            2,
            &[1.0, 2.0, 3.0, 4.0], // (0,0,0),(1,0,0),(0,0,1),(1,0,1)
        )
        .unwrap();
        let bytes = tensor_to_bytes(&t);
        let first = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
        let second = f64::from_le_bytes(bytes[32..40].try_into().unwrap());
        let third = f64::from_le_bytes(bytes[40..48].try_into().unwrap());
        assert_eq!(first, 1.0);
        assert_eq!(second, 2.0); // height index fastest
        assert_eq!(third, 3.0); // then band
    }

    #[test]
    fn corrupted_payload_fails_checksum() {
        let t = gen_phantom(4, 4, 2, 1, 1.0, 3).unwrap();
        let mut bytes = tensor_to_bytes(&t);
        bytes[30] ^= 0xFF;
        let err = tensor_from_bytes(&bytes, Path::new("mem")).unwrap_err();
        assert!(matches!(err, Error::ChecksumMismatch { .. }));
        assert!(err.to_string().contains("checksum mismatch"));
    }

    #[test]
    fn truncated_and_bad_magic_fail() {
        let t = gen_phantom(4, 4, 2, 1, 1.0, 3).unwrap();
        let bytes = tensor_to_bytes(&t);
        assert!(tensor_from_bytes(&bytes[..bytes.len() - 3], Path::new("mem")).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(tensor_from_bytes(&bad, Path::new("mem")).is_err());
    }

    #[test]
    fn measurement_roundtrip_and_operator_rebuild() {
        let x = gen_phantom(4, 5, 3, 2, 1.0, 17).unwrap();
        let op = cs::CompressiveOperator::build(4, 5, 3, 0.4, 77).unwrap();
        let y = cs::sample(&x, &op).unwrap();
        let mf = MeasurementFile::from_operator(&op, y.clone()).unwrap();
        let bytes = mf.to_bytes();
        let back = MeasurementFile::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back.y, y);
        let op2 = back.operator().unwrap();
        // Bit-exact rebuild: measurements of the same cube agree exactly.
        let y2 = cs::sample(&x, &op2).unwrap();
        assert_eq!(y, y2);
        assert_eq!(bytes, back.to_bytes());
    }

    #[test]
    fn atomic_write_and_read_files() {
        let dir = std::env::temp_dir().join(format!("e3dtv_io_test_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.e3t");
        let t = gen_phantom(3, 3, 4, 2, 1.0, 5).unwrap();
        write_tensor(&path, &t).unwrap();
        let back = read_tensor(&path).unwrap();
        assert_eq!(t, back);
        assert!(read_tensor(&dir.join("missing.e3t")).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn prop_tensor_roundtrip(vals in proptest::collection::vec(-1e6f64..1e6, 30)) {
            let t = HsiTensor::new(2, 3, 5, &vals).unwrap();
            let bytes = tensor_to_bytes(&t);
            let back = tensor_from_bytes(&bytes, Path::new("mem")).unwrap();
            prop_assert_eq!(t, back);
        }
    }
}
