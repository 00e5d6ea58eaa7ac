//! `OSRE` model files: magic, u32 version (1), u32 classes `K`, u32 trees `B`,
//! f64 lambda, f64 delta, then `K` records of four f64 values
//! `(class, alpha, gamma, tail_size)`. All little-endian.

use std::path::Path;

use super::{EvtModel, WeibullModel};
use crate::binio::{checked_len, ByteReader};
use crate::error::{FormatError, Result};

const MAGIC: &[u8; 4] = b"OSRE";
const VERSION: u32 = 1;

pub fn encode_evt_model(model: &EvtModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 32 * model.weibulls.len());
    out.extend_from_slice(MAGIC);
    for v in [VERSION, model.weibulls.len() as u32, model.trees as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&model.lambda.to_le_bytes());
    out.extend_from_slice(&model.delta.to_le_bytes());
    for w in &model.weibulls {
        for v in [w.class as f64, w.alpha, w.gamma, w.tail_size as f64] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn as_count(v: f64, what: &str) -> Result<usize, FormatError> {
    if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(FormatError::Corrupt(format!("{what} {v} is not a count")))
    }
}

pub fn decode_evt_model(bytes: &[u8]) -> Result<EvtModel> {
    let mut r = ByteReader::new(bytes);
    r.magic(MAGIC)?;
    r.version("evt model", VERSION)?;
    let k = r.u32()? as usize;
    let trees = r.u32()? as usize;
    let lambda = r.f64()?;
    let delta = r.f64()?;
    r.require(checked_len(k, 32)?)?;
    if !(lambda > 0.0 && lambda <= 1.0) || !(0.0..=1.0).contains(&delta) || trees == 0 {
        return Err(FormatError::Corrupt(format!(
            "invalid hyper-parameters: lambda {lambda}, delta {delta}, trees {trees}"
        ))
        .into());
    }
    let mut weibulls = Vec::with_capacity(k);
    for i in 0..k {
        let class = as_count(r.f64()?, "class")?;
        let alpha = r.f64()?;
        let gamma = r.f64()?;
        let tail_size = as_count(r.f64()?, "tail size")?;
        if class != i {
            return Err(FormatError::Corrupt(format!("record {i} holds class {class}")).into());
        }
        if !(alpha.is_finite() && alpha > 0.0 && gamma.is_finite() && gamma > 0.0) {
            return Err(FormatError::Corrupt(format!("class {i}: invalid weibull ({alpha}, {gamma})")).into());
        }
        weibulls.push(WeibullModel {
            class,
            alpha,
            gamma,
            tail_size,
        });
    }
    r.finish()?;
    Ok(EvtModel {
        weibulls,
        lambda,
        delta,
        trees,
    })
}

pub fn write_evt_file(path: impl AsRef<Path>, model: &EvtModel) -> Result<()> {
    std::fs::write(path, encode_evt_model(model))?;
    Ok(())
}

pub fn read_evt_file(path: impl AsRef<Path>) -> Result<EvtModel> {
    decode_evt_model(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::OsrError;

    fn model() -> EvtModel {
        EvtModel {
            weibulls: vec![
                WeibullModel { class: 0, alpha: 171.25, gamma: 9.5, tail_size: 12 },
                WeibullModel { class: 1, alpha: 140.0, gamma: 4.0, tail_size: 31 },
            ],
            lambda: 0.9,
            delta: 0.5,
            trees: 200,
        }
    }

    #[test]
    fn round_trip_and_layout() {
        let bytes = encode_evt_model(&model());
        assert_eq!(bytes.len(), 32 + 64);
        assert_eq!(decode_evt_model(&bytes).unwrap(), model());
        for cut in 0..bytes.len() {
            assert!(matches!(decode_evt_model(&bytes[..cut]), Err(OsrError::Format(_))));
        }
    }

    #[test]
    fn rejects_invalid_parameters() {
        let mut m = model();
        m.weibulls[1].gamma = -1.0;
        assert!(decode_evt_model(&encode_evt_model(&m)).is_err());
        let mut m = model();
        m.delta = 1.5;
        assert!(decode_evt_model(&encode_evt_model(&m)).is_err());
    }
}
