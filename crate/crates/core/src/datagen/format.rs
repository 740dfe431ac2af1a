//! The CBAM binary dataset format, little-endian throughout:
//!
//! ```text
//! magic   4 bytes  "CBAM"
//! version u16      currently 1
//! records n_examples x (2n * f32 IQ (I row, Q row) | u8 label |
//!                       5 * f32 concepts | i16 snr_db | u8 scheme id)
//! crc32   u32      IEEE CRC-32 of every preceding byte
//! ```
//!
//! A JSON manifest sidecar (`<file stem>.manifest.json`) carries the class
//! list, counts, seed, and generation config; the reader cross-checks every
//! record against it.

use std::fs;
use std::path::{Path, PathBuf};

use crate::concepts::concept_vector;
use crate::datagen::{DatagenError, DatasetSplit, Example, Manifest};
use crate::sigsynth::ModulationScheme;

pub const FORMAT_MAGIC: [u8; 4] = *b"CBAM";
pub const FORMAT_VERSION: u16 = 1;

fn manifest_path(bin_path: &Path) -> PathBuf {
    bin_path.with_extension("manifest.json")
}

fn record_size(n_samples: usize) -> usize {
    2 * n_samples * 4 + 1 + 5 * 4 + 2 + 1
}

/// Writes the split and its manifest sidecar. The byte stream is a pure
/// function of the split contents.
pub fn write_split(split: &DatasetSplit, path: &Path) -> Result<(), DatagenError> {
    let n = split.manifest.n_samples as usize;
    let mut bytes =
        Vec::with_capacity(6 + split.examples.len() * record_size(n) + 4);
    bytes.extend_from_slice(&FORMAT_MAGIC);
    bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for e in &split.examples {
        if e.iq.len() != 2 * n {
            return Err(DatagenError::InvalidParam(format!(
                "example has {} IQ values, manifest says {}",
                e.iq.len(),
                2 * n
            )));
        }
        for v in &e.iq {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.push(e.label_id);
        for c in &e.concepts {
            bytes.extend_from_slice(&c.to_le_bytes());
        }
        bytes.extend_from_slice(&e.snr_db.to_le_bytes());
        bytes.push(e.scheme.id());
    }
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(&bytes);
    bytes.extend_from_slice(&hasher.finalize().to_le_bytes());

    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, &bytes)?;

    let manifest_json = serde_json::to_vec_pretty(&split.manifest)
        .map_err(|e| DatagenError::InvalidParam(format!("manifest serialization: {e}")))?;
    fs::write(manifest_path(path), manifest_json)?;
    Ok(())
}

/// Reads a split back, validating magic, version, checksum, and every type
/// invariant (counts, label/scheme consistency, concept truth, finiteness).
pub fn read_split(path: &Path) -> Result<DatasetSplit, DatagenError> {
    let manifest_bytes = fs::read(manifest_path(path))?;
    let manifest: Manifest = serde_json::from_slice(&manifest_bytes)
        .map_err(|e| DatagenError::Corrupt(format!("manifest parse: {e}")))?;

    let bytes = fs::read(path)?;
    if bytes.len() < 10 {
        return Err(DatagenError::Corrupt("file shorter than header".into()));
    }
    if bytes[0..4] != FORMAT_MAGIC {
        return Err(DatagenError::Corrupt("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(DatagenError::VersionMismatch {
            found: version,
            supported: FORMAT_VERSION,
        });
    }

    let body = &bytes[..bytes.len() - 4];
    let stored_crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let mut hasher = crc32fast::Hasher::new();
    hasher.update(body);
    if hasher.finalize() != stored_crc {
        return Err(DatagenError::Corrupt("checksum mismatch".into()));
    }

    let n = manifest.n_samples as usize;
    let rec = record_size(n);
    let payload = &body[6..];
    if payload.len() % rec != 0 {
        return Err(DatagenError::Corrupt(format!(
            "payload length {} not a multiple of record size {rec}",
            payload.len()
        )));
    }
    let n_records = payload.len() / rec;
    if n_records as u64 != manifest.n_examples {
        return Err(DatagenError::Corrupt(format!(
            "{n_records} records but manifest declares {}",
            manifest.n_examples
        )));
    }

    let class_list: Vec<ModulationScheme> = manifest
        .classes
        .iter()
        .map(|c| {
            ModulationScheme::from_id(c.id)
                .filter(|s| s.name() == c.name)
                .ok_or_else(|| DatagenError::Corrupt(format!("unknown class {}", c.name)))
        })
        .collect::<Result<_, _>>()?;

    let mut examples = Vec::with_capacity(n_records);
    let mut counts = vec![0u64; class_list.len()];
    for r in 0..n_records {
        let rec_bytes = &payload[r * rec..(r + 1) * rec];
        let mut off = 0usize;
        let mut iq = Vec::with_capacity(2 * n);
        for _ in 0..2 * n {
            let v = f32::from_le_bytes(rec_bytes[off..off + 4].try_into().unwrap());
            if !v.is_finite() {
                return Err(DatagenError::Corrupt(format!("non-finite IQ in record {r}")));
            }
            iq.push(v);
            off += 4;
        }
        let label_id = rec_bytes[off];
        off += 1;
        let mut concepts = [0f32; 5];
        for c in concepts.iter_mut() {
            *c = f32::from_le_bytes(rec_bytes[off..off + 4].try_into().unwrap());
            off += 4;
        }
        let snr_db = i16::from_le_bytes(rec_bytes[off..off + 2].try_into().unwrap());
        off += 2;
        let scheme_id = rec_bytes[off];

        let scheme = ModulationScheme::from_id(scheme_id)
            .ok_or_else(|| DatagenError::Corrupt(format!("unknown scheme id {scheme_id}")))?;
        let expected = class_list.get(label_id as usize).copied();
        if expected != Some(scheme) {
            return Err(DatagenError::Corrupt(format!(
                "record {r}: label {label_id} does not match scheme {scheme}"
            )));
        }
        if concepts != concept_vector::<f64>(scheme).to_f32_array() {
            return Err(DatagenError::Corrupt(format!(
                "record {r}: stored concepts disagree with the {scheme} truth vector"
            )));
        }
        counts[label_id as usize] += 1;
        examples.push(Example {
            iq,
            label_id,
            concepts,
            snr_db,
            scheme,
        });
    }

    for (entry, &count) in manifest.classes.iter().zip(&counts) {
        if entry.count != count {
            return Err(DatagenError::Corrupt(format!(
                "class {}: {count} records but manifest declares {}",
                entry.name, entry.count
            )));
        }
    }

    Ok(DatasetSplit {
        kind: manifest.split_kind,
        examples,
        class_list,
        manifest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_split, GenConfig, SplitKind};

    fn tiny_split() -> DatasetSplit {
        generate_split(SplitKind::Train, 2, 42, &GenConfig::default()).unwrap()
    }

    #[test]
    fn write_read_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.bin");
        let split = tiny_split();
        write_split(&split, &path).unwrap();
        let back = read_split(&path).unwrap();
        assert_eq!(split, back);
        assert!(manifest_path(&path).exists());
    }

    #[test]
    fn identical_splits_write_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.bin");
        let b = dir.path().join("b.bin");
        write_split(&tiny_split(), &a).unwrap();
        write_split(&tiny_split(), &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert_eq!(
            fs::read(manifest_path(&a)).unwrap(),
            fs::read(manifest_path(&b)).unwrap()
        );
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        write_split(&tiny_split(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(read_split(&path), Err(DatagenError::Corrupt(_))));
    }

    #[test]
    fn flipped_bit_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        write_split(&tiny_split(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_split(&path), Err(DatagenError::Corrupt(_))));
    }

    #[test]
    fn future_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        write_split(&tiny_split(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[4] = 99;
        // keep the checksum consistent so the version check is what fires
        let body_len = bytes.len() - 4;
        let mut hasher = crc32fast::Hasher::new();
        hasher.update(&bytes[..body_len]);
        let crc = hasher.finalize().to_le_bytes();
        bytes[body_len..].copy_from_slice(&crc);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_split(&path),
            Err(DatagenError::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_split(Path::new("/nonexistent/x.bin")),
            Err(DatagenError::Io(_))
        ));
    }
}
