//! NPY v1.0 reader/writer for 2-D little-endian float arrays.

use crate::linalg::Matrix;
use crate::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dtype {
    F4,
    F8,
}

#[derive(Debug)]
struct Header {
    dtype: Dtype,
    fortran_order: bool,
    shape: Vec<usize>,
}

fn err(reason: impl Into<String>) -> Error {
    Error::format("npy", reason)
}

/// Parse an NPY v1.0 file holding an (n, d) `<f4` or `<f8` array.
pub fn read(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(err("missing \\x93NUMPY magic"));
    }
    if (bytes[6], bytes[7]) != (1, 0) {
        return Err(err(format!("unsupported version {}.{}", bytes[6], bytes[7])));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let start = 10 + header_len;
    if bytes.len() < start {
        return Err(err("truncated header"));
    }
    let text = std::str::from_utf8(&bytes[10..start]).map_err(|_| err("header is not ASCII"))?;
    let header = parse_header(text)?;
    if header.shape.len() != 2 {
        return Err(Error::Dimension(format!(
            "expected a 2-D array, got shape {:?}",
            header.shape
        )));
    }
    let (n, d) = (header.shape[0], header.shape[1]);
    let width = match header.dtype {
        Dtype::F4 => 4,
        Dtype::F8 => 8,
    };
    let payload = &bytes[start..];
    let count = n.checked_mul(d).ok_or_else(|| err("shape overflows"))?;
    if payload.len() != count * width {
        return Err(err(format!(
            "payload has {} bytes, shape {:?} needs {}",
            payload.len(),
            header.shape,
            count * width
        )));
    }
    let values: Vec<f64> = match header.dtype {
        Dtype::F4 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        Dtype::F8 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect(),
    };
    // nalgebra storage is column-major, which is exactly Fortran order
    Ok(if header.fortran_order {
        Matrix::from_vec(n, d, values)
    } else {
        Matrix::from_row_slice(n, d, &values)
    })
}

fn parse_header(text: &str) -> Result<Header> {
    let body = text.trim().trim_end_matches('\n');
    let body = body
        .strip_prefix('{')
        .and_then(|b| b.trim_end().strip_suffix('}'))
        .ok_or_else(|| err("header is not a dict"))?;

    let descr = dict_value(body, "descr")?;
    let dtype = match descr.trim().trim_matches(|c| c == '\'' || c == '"') {
        "<f4" => Dtype::F4,
        "<f8" => Dtype::F8,
        other => return Err(err(format!("unsupported descr {other:?}"))),
    };
    let fortran_order = match dict_value(body, "fortran_order")?.trim() {
        "True" => true,
        "False" => false,
        other => return Err(err(format!("bad fortran_order {other:?}"))),
    };
    let shape_text = dict_value(body, "shape")?;
    let inner = shape_text
        .trim()
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| err("shape is not a tuple"))?;
    let shape = inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<usize>().map_err(|_| err(format!("bad shape entry {s:?}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(Header {
        dtype,
        fortran_order,
        shape,
    })
}

/// Raw text of the value stored under `key` in a Python dict literal.
fn dict_value<'a>(body: &'a str, key: &str) -> Result<&'a str> {
    let pos = ["'", "\""]
        .iter()
        .find_map(|q| body.find(&format!("{q}{key}{q}")).map(|p| p + key.len() + 2))
        .ok_or_else(|| err(format!("header lacks key {key:?}")))?;
    let rest = body[pos..].trim_start();
    let rest = rest.strip_prefix(':').ok_or_else(|| err("expected ':' in header"))?.trim_start();
    let end = if rest.starts_with('(') {
        rest.find(')').map(|p| p + 1)
    } else {
        rest.find(',').or(Some(rest.len()))
    }
    .ok_or_else(|| err("unterminated header value"))?;
    Ok(&rest[..end])
}

/// Serialize as NPY v1.0, `<f8`, C order.
pub fn write(m: &Matrix) -> Vec<u8> {
    let (n, d) = m.shape();
    let dict = format!("{{'descr': '<f8', 'fortran_order': False, 'shape': ({n}, {d}), }}");
    // magic + version + u16 length + dict + padding + '\n' is a multiple of 64
    let unpadded = 10 + dict.len() + 1;
    let pad = (64 - unpadded % 64) % 64;
    let header = format!("{dict}{}\n", " ".repeat(pad));

    let mut out = Vec::with_capacity(10 + header.len() + n * d * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for i in 0..n {
        for j in 0..d {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent writer producing the byte layout numpy emits for a
    /// C-order float32 array.
    fn numpy_style_f32(shape: (usize, usize), values: &[f32], fortran: bool) -> Vec<u8> {
        let order = if fortran { "True" } else { "False" };
        let mut header = format!(
            "{{'descr': '<f4', 'fortran_order': {order}, 'shape': ({}, {}), }}",
            shape.0, shape.1
        );
        while (10 + header.len() + 1) % 16 != 0 {
            header.push(' ');
        }
        header.push('\n');
        let mut out = b"\x93NUMPY\x01\x00".to_vec();
        out.extend_from_slice(&(header.len() as u16).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    #[test]
    fn reads_f4_c_order_bit_exact() {
        let values: Vec<f32> = (0..20).map(|i| (i as f32) * 0.37 - 2.5).collect();
        let bytes = numpy_style_f32((5, 4), &values, false);
        let m = read(&bytes).unwrap();
        assert_eq!(m.shape(), (5, 4));
        for i in 0..5 {
            for j in 0..4 {
                assert_eq!(m[(i, j)], values[i * 4 + j] as f64);
            }
        }
    }

    #[test]
    fn reads_fortran_order_as_row_major_semantics() {
        // column-major layout of [[0,1,2],[3,4,5]]
        let values = [0.0f32, 3.0, 1.0, 4.0, 2.0, 5.0];
        let m = read(&numpy_style_f32((2, 3), &values, true)).unwrap();
        assert_eq!(m, Matrix::from_row_slice(2, 3, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]));
    }

    #[test]
    fn write_then_read() {
        let m = Matrix::from_row_slice(3, 2, &[1.5, -2.0, 1e-300, 7.0, 0.1, 3.25]);
        let bytes = write(&m);
        assert_eq!((bytes.len() - 6 * 8) % 64, 0);
        assert_eq!(read(&bytes).unwrap(), m);
    }

    #[test]
    fn rejects_other_descr() {
        let mut bytes = numpy_style_f32((1, 2), &[1.0, 2.0], false);
        let pos = bytes.windows(3).position(|w| w == b"<f4").unwrap();
        bytes[pos + 1] = b'i';
        assert!(matches!(read(&bytes), Err(Error::Format { .. })));
        assert!(read(b"not an npy").is_err());
    }

    #[test]
    fn rejects_truncated_payload() {
        let mut bytes = numpy_style_f32((2, 2), &[1.0, 2.0, 3.0, 4.0], false);
        bytes.pop();
        assert!(read(&bytes).is_err());
    }
}
