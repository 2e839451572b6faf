//! Binary tensor file format "TRT1".
//!
//! Layout: 4-byte magic `TRT1`, u32 LE order N, N u64 LE dims, then
//! `prod I_n` f64 LE values in linearization order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

const MAGIC: &[u8; 4] = b"TRT1";

pub fn save_tensor(tensor: &DenseTensor, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(tensor.order() as u32).to_le_bytes())?;
    for &d in tensor.shape() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for &v in tensor.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_tensor(path: &Path) -> Result<DenseTensor> {
    let mut r = BufReader::new(File::open(path)?);
    let mut offset = 0u64;
    let mut magic = [0u8; 4];
    read_exact_at(&mut r, &mut magic, &mut offset, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format {
            offset: 0,
            detail: format!("bad magic {magic:?}, expected {MAGIC:?}"),
        });
    }
    let mut nbuf = [0u8; 4];
    read_exact_at(&mut r, &mut nbuf, &mut offset, "order")?;
    let order = u32::from_le_bytes(nbuf) as usize;
    if order == 0 {
        return Err(Error::Format {
            offset: 4,
            detail: "order must be positive".into(),
        });
    }
    let mut shape = Vec::with_capacity(order);
    let mut total: usize = 1;
    for k in 0..order {
        let mut dbuf = [0u8; 8];
        let dim_offset = offset;
        read_exact_at(&mut r, &mut dbuf, &mut offset, "dimension")?;
        let dim = u64::from_le_bytes(dbuf);
        let dim = usize::try_from(dim).map_err(|_| Error::Format {
            offset: dim_offset,
            detail: format!("dimension {k} ({dim}) exceeds addressable size"),
        })?;
        if dim == 0 {
            return Err(Error::Format {
                offset: dim_offset,
                detail: format!("dimension {k} is zero"),
            });
        }
        total = total.checked_mul(dim).ok_or_else(|| Error::Format {
            offset: dim_offset,
            detail: "product of dimensions overflows".into(),
        })?;
        shape.push(dim);
    }
    let payload_start = offset;
    let mut values = vec![0.0f64; total];
    let mut filled = 0usize;
    let mut part = [0u8; 8];
    let mut part_len = 0usize;
    let mut buf = vec![0u8; 8 * 4096];
    loop {
        let n = r.read(&mut buf)?;
        if n == 0 {
            break;
        }
        let mut s = &buf[..n];
        if part_len > 0 {
            let take = (8 - part_len).min(s.len());
            part[part_len..part_len + take].copy_from_slice(&s[..take]);
            part_len += take;
            s = &s[take..];
            if part_len == 8 {
                if filled == total {
                    return Err(trailing(payload_start, total));
                }
                values[filled] = f64::from_le_bytes(part);
                filled += 1;
                part_len = 0;
            }
        }
        let whole = s.chunks_exact(8);
        let rem = whole.remainder();
        for chunk in whole {
            if filled == total {
                return Err(trailing(payload_start, total));
            }
            values[filled] = f64::from_le_bytes(chunk.try_into().unwrap());
            filled += 1;
        }
        if !rem.is_empty() {
            if filled == total {
                return Err(trailing(payload_start, total));
            }
            part[..rem.len()].copy_from_slice(rem);
            part_len = rem.len();
        }
    }
    if filled < total || part_len > 0 {
        return Err(Error::Format {
            offset: payload_start + (filled * 8 + part_len) as u64,
            detail: format!(
                "payload truncated: expected {} values ({} bytes), got {} bytes",
                total,
                total * 8,
                filled * 8 + part_len
            ),
        });
    }
    DenseTensor::new(shape, values)
}

fn trailing(payload_start: u64, total: usize) -> Error {
    Error::Format {
        offset: payload_start + (total * 8) as u64,
        detail: "trailing bytes after payload".into(),
    }
}

fn read_exact_at(r: &mut impl Read, buf: &mut [u8], offset: &mut u64, what: &str) -> Result<()> {
    let at = *offset;
    r.read_exact(buf).map_err(|_| Error::Format {
        offset: at,
        detail: format!("truncated while reading {what}"),
    })?;
    *offset += buf.len() as u64;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("trt1_test_{}_{name}", std::process::id()));
        p
    }

    #[test]
    fn round_trip_bit_exact() {
        let t = DenseTensor::new(
            vec![2, 3, 2],
            (0..12).map(|i| (i as f64) * 0.1 - 0.55).collect(),
        )
        .unwrap();
        let p = tmp("rt");
        save_tensor(&t, &p).unwrap();
        let back = load_tensor(&p).unwrap();
        std::fs::remove_file(&p).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn three_byte_file_is_format_error() {
        let p = tmp("short");
        std::fs::write(&p, [1u8, 2, 3]).unwrap();
        let err = load_tensor(&p).unwrap_err();
        std::fs::remove_file(&p).unwrap();
        assert!(matches!(err, Error::Format { offset: 0, .. }));
    }

    #[test]
    fn truncated_payload_reports_expected_length() {
        let t = DenseTensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = tmp("trunc");
        save_tensor(&t, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 9]).unwrap();
        let err = load_tensor(&p).unwrap_err();
        std::fs::remove_file(&p).unwrap();
        match err {
            Error::Format { detail, .. } => assert!(detail.contains("expected 4 values")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_magic_rejected() {
        let p = tmp("magic");
        std::fs::write(&p, b"NOPE\x01\x00\x00\x00").unwrap();
        let err = load_tensor(&p).unwrap_err();
        std::fs::remove_file(&p).unwrap();
        assert!(matches!(err, Error::Format { offset: 0, .. }));
    }
}
