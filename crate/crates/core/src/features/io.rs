//! `OSRF` feature files: magic, u32 version (1), u32 count `M`, u32 dim `L`,
//! `M * L` f32 values row-major, then `M` u32 labels with `0xFFFFFFFF`
//! marking an unlabeled sample. All little-endian.

use std::path::Path;

use super::FeatureVector;
use crate::binio::{checked_len, ByteReader};
use crate::error::{FormatError, OsrError, Result};

const MAGIC: &[u8; 4] = b"OSRF";
const VERSION: u32 = 1;
pub const UNLABELED: u32 = 0xFFFF_FFFF;

/// Feature vectors with optional integer labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSet {
    pub features: Vec<FeatureVector>,
    pub labels: Vec<Option<u32>>,
}

impl FeatureSet {
    pub fn new(features: Vec<FeatureVector>, labels: Vec<Option<u32>>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(OsrError::LengthMismatch {
                what: "features vs labels",
                left: features.len(),
                right: labels.len(),
            });
        }
        if labels.contains(&Some(UNLABELED)) {
            return Err(OsrError::InvalidParameter("label 0xFFFFFFFF is reserved".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, |f| f.len())
    }
}

pub fn encode_feature_file(set: &FeatureSet) -> Result<Vec<u8>> {
    let dim = set.dim();
    if let Some(f) = set.features.iter().find(|f| f.len() != dim) {
        return Err(OsrError::DimensionMismatch {
            expected: dim,
            actual: f.len(),
        });
    }
    let mut out = Vec::with_capacity(16 + set.len() * (4 * dim + 4));
    out.extend_from_slice(MAGIC);
    for v in [VERSION, set.len() as u32, dim as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for f in &set.features {
        for v in f.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for l in &set.labels {
        out.extend_from_slice(&l.unwrap_or(UNLABELED).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_feature_file(bytes: &[u8]) -> Result<FeatureSet> {
    let mut r = ByteReader::new(bytes);
    r.magic(MAGIC)?;
    r.version("feature", VERSION)?;
    let count = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let payload = checked_len(checked_len(count, dim)?, 4)?;
    let total = payload
        .checked_add(checked_len(count, 4)?)
        .ok_or_else(|| FormatError::Corrupt("payload size overflow".into()))?;
    r.require(total)?;
    let mut features = Vec::with_capacity(count);
    for n in 0..count {
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            values.push(r.f32()?);
        }
        features.push(FeatureVector::new(values).map_err(|_| {
            FormatError::Corrupt(format!("record {n} contains a non-finite value"))
        })?);
    }
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let l = r.u32()?;
        labels.push((l != UNLABELED).then_some(l));
    }
    r.finish()?;
    Ok(FeatureSet { features, labels })
}

pub fn write_feature_file(path: impl AsRef<Path>, set: &FeatureSet) -> Result<()> {
    std::fs::write(path, encode_feature_file(set)?)?;
    Ok(())
}

pub fn read_feature_file(path: impl AsRef<Path>) -> Result<FeatureSet> {
    decode_feature_file(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decodes_two_three_vectors() {
        let mut bytes = b"OSRF".to_vec();
        for v in [1u32, 2, 3] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for v in [1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&0u32.to_le_bytes());
        bytes.extend_from_slice(&UNLABELED.to_le_bytes());
        let set = decode_feature_file(&bytes).unwrap();
        assert_eq!(set.features[0].values(), &[1.0, 2.0, 3.0]);
        assert_eq!(set.features[1].values(), &[4.0, 5.0, 6.0]);
        assert_eq!(set.labels, vec![Some(0), None]);
    }

    #[test]
    fn truncation_names_expected_and_actual_bytes() {
        let set = FeatureSet::new(
            vec![FeatureVector::new(vec![1.0, 2.0]).unwrap(); 3],
            vec![Some(1), Some(2), None],
        )
        .unwrap();
        let bytes = encode_feature_file(&set).unwrap();
        assert_eq!(bytes.len(), 16 + 24 + 12);
        let err = decode_feature_file(&bytes[..30]).unwrap_err();
        assert_eq!(
            err.to_string(),
            "truncated payload: expected at least 52 bytes, got 30"
        );
        for cut in 0..bytes.len() {
            assert!(matches!(decode_feature_file(&bytes[..cut]), Err(OsrError::Format(_))));
        }
    }

    #[test]
    fn bad_magic_and_version() {
        let err = decode_feature_file(b"OSRX\x01\0\0\0").unwrap_err();
        assert!(err.to_string().contains("bad magic"));
        let mut bytes = b"OSRF".to_vec();
        bytes.extend_from_slice(&2u32.to_le_bytes());
        let err = decode_feature_file(&bytes).unwrap_err();
        assert!(err.to_string().contains("version 2"));
    }

    proptest! {
        #[test]
        fn round_trip_is_bitwise(
            rows in proptest::collection::vec(proptest::collection::vec(-1e6f32..1e6, 5), 0..20),
            seed in any::<u32>(),
        ) {
            let labels: Vec<Option<u32>> = (0..rows.len())
                .map(|i| if (seed as usize + i).is_multiple_of(4) { None } else { Some((i as u32) % 7) })
                .collect();
            let set = FeatureSet::new(rows.into_iter().map(|r| FeatureVector::new(r).unwrap()).collect(), labels).unwrap();
            let bytes = encode_feature_file(&set).unwrap();
            let back = decode_feature_file(&bytes).unwrap();
            prop_assert_eq!(encode_feature_file(&back).unwrap(), bytes);
            prop_assert_eq!(back.labels, set.labels.clone());
            for (a, b) in back.features.iter().zip(&set.features) {
                prop_assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
    }
}
