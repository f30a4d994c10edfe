use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{PasdfError, Result};
use crate::sampling::{NormalizationRecord, QuerySample, QueryTier};

/// Bytes per record: three f64 coordinates, the f64 label, the u8 tier code.
pub const QUERY_RECORD_BYTES: usize = 33;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySidecar {
    pub count: usize,
    /// Record counts for the volume, bbox and surface tiers.
    pub tier_counts: [usize; 3],
    pub seed: u64,
    pub normalization: NormalizationRecord,
    /// Identifiers of the training inputs pooled into the stream.
    pub sources: Vec<String>,
    pub canonical: String,
}

pub fn sidecar_path(stream: &Path) -> PathBuf {
    stream.with_extension("json")
}

pub fn tier_counts(samples: &[QuerySample]) -> [usize; 3] {
    let mut counts = [0; 3];
    for s in samples {
        counts[s.tier.code() as usize] += 1;
    }
    counts
}

pub fn write_queries(path: &Path, samples: &[QuerySample]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in samples {
        for c in s.position.iter() {
            w.write_all(&c.to_le_bytes())?;
        }
        w.write_all(&s.sdf.to_le_bytes())?;
        w.write_all(&[s.tier.code()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_queries(path: &Path) -> Result<Vec<QuerySample>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.len() % QUERY_RECORD_BYTES != 0 {
        return Err(PasdfError::Format(format!(
            "{}: {} bytes is not a whole number of {QUERY_RECORD_BYTES}-byte records",
            path.display(),
            bytes.len()
        )));
    }
    bytes
        .chunks_exact(QUERY_RECORD_BYTES)
        .enumerate()
        .map(|(i, r)| {
            let f = |k: usize| f64::from_le_bytes(r[8 * k..8 * k + 8].try_into().unwrap());
            let tier = QueryTier::from_code(r[32])
                .ok_or_else(|| PasdfError::Format(format!("{}: record {i} has tier code {}", path.display(), r[32])))?;
            Ok(QuerySample {
                position: Point3::new(f(0), f(1), f(2)),
                sdf: f(3),
                tier,
            })
        })
        .collect()
}

/// Writes the record stream and its JSON sidecar next to it.
pub fn save_query_set(path: &Path, samples: &[QuerySample], sidecar: &QuerySidecar) -> Result<()> {
    write_queries(path, samples)?;
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(sidecar)?)?;
    Ok(())
}

/// Reads the stream and sidecar, checking the counts agree.
pub fn load_query_set(path: &Path) -> Result<(Vec<QuerySample>, QuerySidecar)> {
    let samples = read_queries(path)?;
    let sidecar: QuerySidecar = serde_json::from_slice(&std::fs::read(sidecar_path(path))?)?;
    if sidecar.count != samples.len() || sidecar.tier_counts != tier_counts(&samples) {
        return Err(PasdfError::ArtifactMismatch(format!(
            "{}: sidecar describes {} records but the stream holds {}",
            path.display(),
            sidecar.count,
            samples.len()
        )));
    }
    Ok((samples, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples() -> Vec<QuerySample> {
        vec![
            QuerySample { position: Point3::new(0.1, 0.2, 0.3), sdf: -0.25, tier: QueryTier::Volume },
            QuerySample { position: Point3::new(0.9, 0.5, 1.0 / 3.0), sdf: 0.125, tier: QueryTier::Bbox },
            QuerySample { position: Point3::new(0.5, 0.5, 0.2), sdf: 0.0, tier: QueryTier::Surface },
        ]
    }

    #[test]
    fn stream_round_trip_and_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.bin");
        let sidecar = QuerySidecar {
            count: 3,
            tier_counts: [1, 1, 1],
            seed: 5,
            normalization: NormalizationRecord { scale: 2.0, offset: [0.1, 0.2, 0.3] },
            sources: vec!["a".into()],
            canonical: "a".into(),
        };
        save_query_set(&path, &samples(), &sidecar).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 3 * QUERY_RECORD_BYTES as u64);
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(f64::from_le_bytes(bytes[24..32].try_into().unwrap()), -0.25);
        assert_eq!(bytes[32], 0);
        let (back, meta) = load_query_set(&path).unwrap();
        assert_eq!(back, samples());
        assert_eq!(meta, sidecar);
    }

    #[test]
    fn truncated_or_mislabeled_streams_fail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.bin");
        write_queries(&path, &samples()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(read_queries(&path), Err(PasdfError::Format(_))));
        bytes[32] = 9;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_queries(&path), Err(PasdfError::Format(_))));
    }
}
