//! Versioned binary model files.
//!
//! ```text
//! magic        8 bytes  "FBSVM\0\0\0"
//! version      u16
//! dimension    u32
//! class count  u8       (always 3)
//! class order  u8 × 3   (label indices)
//! C            f64
//! provider id  u16 length + UTF-8 bytes
//! weights      f32 × (3 · dimension), class-major
//! biases       f32 × 3
//! ```
//!
//! All integers and floats are little-endian.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{ClassifierError, IssueLabel, SvmModel};
use crate::scalar::Scalar;

pub const MODEL_MAGIC: &[u8; 8] = b"FBSVM\0\0\0";
pub const MODEL_VERSION: u16 = 1;

pub fn write_model<T: Scalar, W: Write>(mut w: W, model: &SvmModel<T>) -> Result<(), ClassifierError> {
    let id = model.provider_id().as_bytes();
    if id.len() > u16::MAX as usize {
        return Err(ClassifierError::ModelFormat("provider id too long".into()));
    }
    w.write_all(MODEL_MAGIC)?;
    w.write_u16::<LittleEndian>(MODEL_VERSION)?;
    w.write_u32::<LittleEndian>(model.dimension() as u32)?;
    w.write_u8(3)?;
    for label in IssueLabel::ALL {
        w.write_u8(label.index() as u8)?;
    }
    w.write_f64::<LittleEndian>(model.c().as_f64())?;
    w.write_u16::<LittleEndian>(id.len() as u16)?;
    w.write_all(id)?;
    for label in IssueLabel::ALL {
        for &v in model.weights(label) {
            w.write_f32::<LittleEndian>(v.as_f64() as f32)?;
        }
    }
    for label in IssueLabel::ALL {
        w.write_f32::<LittleEndian>(model.bias(label).as_f64() as f32)?;
    }
    Ok(())
}

fn format_err(msg: impl Into<String>) -> ClassifierError {
    ClassifierError::ModelFormat(msg.into())
}

pub fn read_model<T: Scalar, R: Read>(mut r: R) -> Result<SvmModel<T>, ClassifierError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| format_err("truncated header"))?;
    if &magic != MODEL_MAGIC {
        return Err(format_err("not a fishbone SVM model (bad magic)"));
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != MODEL_VERSION {
        return Err(format_err(format!("unsupported model version {version}")));
    }
    let dimension = r.read_u32::<LittleEndian>()? as usize;
    if r.read_u8()? != 3 {
        return Err(format_err("expected exactly 3 classes"));
    }
    let mut order = [0u8; 3];
    r.read_exact(&mut order)?;
    let order: Vec<IssueLabel> = order
        .iter()
        .map(|&i| IssueLabel::from_index(i as usize).ok_or_else(|| format_err(format!("bad class index {i}"))))
        .collect::<Result<_, _>>()?;
    let mut sorted = order.clone();
    sorted.sort();
    if sorted != IssueLabel::ALL {
        return Err(format_err("class order is not a permutation of the three labels"));
    }
    let c = r.read_f64::<LittleEndian>()?;
    let id_len = r.read_u16::<LittleEndian>()? as usize;
    let mut id = vec![0u8; id_len];
    r.read_exact(&mut id)?;
    let provider_id = String::from_utf8(id).map_err(|_| format_err("provider id is not UTF-8"))?;

    let mut weights = vec![Vec::new(); 3];
    for &label in &order {
        let mut w = vec![0f32; dimension];
        r.read_f32_into::<LittleEndian>(&mut w)
            .map_err(|_| format_err("truncated weights"))?;
        weights[label.index()] = w.into_iter().map(|v| T::lit(v as f64)).collect();
    }
    let mut biases = vec![T::zero(); 3];
    for &label in &order {
        biases[label.index()] = T::lit(
            r.read_f32::<LittleEndian>()
                .map_err(|_| format_err("truncated biases"))? as f64,
        );
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(format_err("trailing bytes after model payload"));
    }
    SvmModel::from_parts(weights, biases, T::lit(c), provider_id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> SvmModel<f64> {
        SvmModel::from_parts(
            vec![vec![0.5, -1.25], vec![2.0, 0.0], vec![-0.75, 3.5]],
            vec![0.1, -0.2, 0.3],
            10.0,
            "hashing-fnv1a64",
        )
        .unwrap()
    }

    #[test]
    fn write_then_read_preserves_f32_payload() {
        let m = model();
        let mut buf = Vec::new();
        write_model(&mut buf, &m).unwrap();
        assert_eq!(&buf[..8], MODEL_MAGIC);
        let back: SvmModel<f64> = read_model(buf.as_slice()).unwrap();
        assert_eq!(back.dimension(), 2);
        assert_eq!(back.c(), 10.0);
        assert_eq!(back.provider_id(), "hashing-fnv1a64");
        for label in IssueLabel::ALL {
            let want: Vec<f64> = m.weights(label).iter().map(|&v| v as f32 as f64).collect();
            assert_eq!(back.weights(label), want.as_slice());
            assert_eq!(back.bias(label), m.bias(label) as f32 as f64);
        }
    }

    #[test]
    fn rejects_bad_magic_version_and_truncation() {
        let mut buf = Vec::new();
        write_model(&mut buf, &model()).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_model::<f64, _>(bad.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(read_model::<f64, _>(bad.as_slice()).is_err());
        assert!(read_model::<f64, _>(&buf[..buf.len() - 2]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_model::<f64, _>(long.as_slice()).is_err());
    }
}
