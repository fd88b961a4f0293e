//! FSIM feature files: `FSIM`, u32 LE rows, u32 LE cols, then rows*cols
//! f32 LE values in row-major order.

use std::fs;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::FeatureMatrix;

pub const FSIM_MAGIC: [u8; 4] = *b"FSIM";
const HEADER_LEN: usize = 12;

fn header(bytes: &[u8]) -> Result<(usize, usize)> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let mut found = [0u8; 4];
    found.copy_from_slice(&bytes[..4]);
    if found != FSIM_MAGIC {
        return Err(Error::BadMagic { found });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
    Ok((word(4), word(8)))
}

pub fn decode_features(bytes: &[u8]) -> Result<FeatureMatrix> {
    let (rows, cols) = header(bytes)?;
    let payload = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::Config(format!("feature header {rows} x {cols} overflows")))?;
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(Error::LengthMismatch {
            what: "feature payload bytes",
            expected,
            found: payload.len(),
        });
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    FeatureMatrix::new(rows, cols, data)
}

pub fn encode_features(f: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * f.data().len());
    out.extend_from_slice(&FSIM_MAGIC);
    out.extend_from_slice(&(f.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(f.cols() as u32).to_le_bytes());
    for v in f.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn read_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    decode_features(&fs::read(path)?)
}

/// Reads only the header: `(rows, cols)`.
pub fn read_features_header(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let mut buf = Vec::with_capacity(HEADER_LEN);
    fs::File::open(path)?.take(HEADER_LEN as u64).read_to_end(&mut buf)?;
    header(&buf)
}

pub fn write_features(f: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_features(f))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(rows: u32, cols: u32, vals: &[f32]) -> Vec<u8> {
        let mut b = b"FSIM".to_vec();
        b.extend_from_slice(&rows.to_le_bytes());
        b.extend_from_slice(&cols.to_le_bytes());
        for v in vals {
            b.extend_from_slice(&v.to_le_bytes());
        }
        b
    }

    #[test]
    fn minimal_two_by_three() {
        let f = decode_features(&raw(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])).unwrap();
        assert_eq!((f.rows(), f.cols()), (2, 3));
        assert_eq!(f.row(1), &[4.0, 5.0, 6.0]);
    }

    #[test]
    fn bit_exact_layout() {
        let f = FeatureMatrix::new(1, 2, vec![1.0, -0.5]).unwrap();
        assert_eq!(
            encode_features(&f),
            vec![b'F', b'S', b'I', b'M', 1, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0x80, 0x3f, 0, 0, 0, 0xbf]
        );
    }

    #[test]
    fn truncated_payload() {
        let err = decode_features(&raw(2, 3, &[1.0; 5])).unwrap_err();
        assert!(matches!(err, Error::Truncated { expected: 24, found: 20 }));
        assert!(matches!(decode_features(b"FSIM\x01\x00"), Err(Error::Truncated { .. })));
    }

    #[test]
    fn infinity_is_rejected() {
        let err = decode_features(&raw(1, 2, &[0.0, f32::INFINITY])).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
        assert!(decode_features(&raw(1, 1, &[f32::NAN])).is_err());
    }

    #[test]
    fn bad_magic() {
        let mut b = raw(1, 1, &[0.0]);
        b[0] = b'X';
        assert!(matches!(decode_features(&b), Err(Error::BadMagic { .. })));
    }
}
