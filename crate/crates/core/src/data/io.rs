//! Binary dataset files.
//!
//! ```text
//! "OBDS"  u32 version=1  u32 sample_count  u8 flags (bit0 has_angle, bit1 has_joints)
//! per sample:  32·32·3 f32 image (channel-last)  u8 label
//!              [f32 angle]  [9 × f32 joints: neck xyz, right hip xyz, left hip xyz]
//! ```
//!
//! All values little-endian. Angles and joints are stored as `f32`; a saved
//! and reloaded dataset saves back to identical bytes.

use std::fs;
use std::path::Path;

use super::{Dataset, Image, LabeledSample, Provenance};
use crate::binio::{put_u32, put_usize, Reader};
use crate::error::{Error, Result};
use crate::labels::{JointTriple, OrientationClass, Point3};
use crate::nnet::INPUT_SIZE;

pub const DATASET_MAGIC: [u8; 4] = *b"OBDS";
pub const DATASET_VERSION: u32 = 1;

const HAS_ANGLE: u8 = 1;
const HAS_JOINTS: u8 = 2;
const IMAGE_VALUES: usize = INPUT_SIZE * INPUT_SIZE * 3;

fn uniform_flag(samples: &[LabeledSample], has: impl Fn(&LabeledSample) -> bool, what: &str) -> Result<bool> {
    let count = samples.iter().filter(|s| has(s)).count();
    if count != 0 && count != samples.len() {
        return Err(Error::InvalidArgument(format!(
            "{count} of {} samples carry {what}; the file format needs all or none",
            samples.len()
        )));
    }
    Ok(count != 0)
}

pub fn dataset_to_bytes(ds: &Dataset) -> Result<Vec<u8>> {
    let has_angle = uniform_flag(&ds.samples, |s| s.true_angle.is_some(), "angles")?;
    let has_joints = uniform_flag(&ds.samples, |s| s.joints.is_some(), "joints")?;
    let record = IMAGE_VALUES * 4 + 1 + if has_angle { 4 } else { 0 } + if has_joints { 36 } else { 0 };
    let mut out = Vec::with_capacity(13 + ds.samples.len() * record);
    out.extend_from_slice(&DATASET_MAGIC);
    put_u32(&mut out, DATASET_VERSION);
    put_usize(&mut out, ds.samples.len())?;
    out.push(if has_angle { HAS_ANGLE } else { 0 } | if has_joints { HAS_JOINTS } else { 0 });
    let put_f32 = |out: &mut Vec<u8>, v: f32| out.extend_from_slice(&v.to_le_bytes());
    for s in &ds.samples {
        if s.image.shape() != [INPUT_SIZE, INPUT_SIZE, 3] {
            return Err(Error::Shape(format!("dataset images must be 32x32x3, got {:?}", s.image.shape())));
        }
        for &v in s.image.data() {
            put_f32(&mut out, v);
        }
        out.push(s.label.index() as u8);
        if let Some(a) = s.true_angle {
            put_f32(&mut out, a as f32);
        }
        if let Some(j) = s.joints {
            for p in [j.neck, j.right_hip, j.left_hip] {
                for v in [p.x, p.y, p.z] {
                    put_f32(&mut out, v as f32);
                }
            }
        }
    }
    Ok(out)
}

/// Parses a dataset file. Loaded datasets are tagged [`Provenance::Imported`]
/// with seed 0; the file does not record either.
pub fn dataset_from_bytes(bytes: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(bytes, "dataset file");
    r.magic(DATASET_MAGIC)?;
    r.version(DATASET_VERSION)?;
    let count = r.u32()? as usize;
    let flags = r.u8()?;
    if flags & !(HAS_ANGLE | HAS_JOINTS) != 0 {
        return Err(Error::Parse(format!("unknown dataset flags {flags:#04x}")));
    }
    let mut samples = Vec::with_capacity(count.min(1 << 20));
    for i in 0..count {
        let raw = r.take(IMAGE_VALUES * 4)?;
        let data: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        let image = Image::new(INPUT_SIZE, INPUT_SIZE, data)?;
        let label = OrientationClass::new(usize::from(r.u8()?))
            .map_err(|_| Error::Parse(format!("sample {i}: label out of range")))?;
        let true_angle = if flags & HAS_ANGLE != 0 { Some(f64::from(r.f32()?)) } else { None };
        let joints = if flags & HAS_JOINTS != 0 {
            let mut p = || -> Result<Point3> {
                Ok(Point3::new(f64::from(r.f32()?), f64::from(r.f32()?), f64::from(r.f32()?)))
            };
            Some(JointTriple { neck: p()?, right_hip: p()?, left_hip: p()? })
        } else {
            None
        };
        samples.push(LabeledSample { image, label, true_angle, joints });
    }
    r.finish()?;
    Ok(Dataset { samples, provenance: Provenance::Imported, seed: 0 })
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, dataset_to_bytes(ds)?).map_err(|e| Error::file(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    dataset_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, StyleParams};
    use crate::parallel::Exec;

    fn sample_set(n: usize) -> Dataset {
        generate_synthetic(n, 77, &StyleParams::default(), Exec::Sequential).unwrap()
    }

    #[test]
    fn round_trip_preserves_images_labels_and_f32_values() {
        let ds = sample_set(100);
        let bytes = dataset_to_bytes(&ds).unwrap();
        let back = dataset_from_bytes(&bytes).unwrap();
        assert_eq!(back.len(), 100);
        for (a, b) in ds.samples.iter().zip(&back.samples) {
            assert_eq!(a.image, b.image);
            assert_eq!(a.label, b.label);
            assert_eq!(a.true_angle.map(|v| v as f32 as f64), b.true_angle);
        }
        // A loaded dataset is a fixed point of save/load.
        let again = dataset_from_bytes(&dataset_to_bytes(&back).unwrap()).unwrap();
        assert_eq!(again, back);
        assert_eq!(dataset_to_bytes(&again).unwrap(), dataset_to_bytes(&back).unwrap());
    }

    #[test]
    fn truncation_version_and_magic_errors() {
        let bytes = dataset_to_bytes(&sample_set(3)).unwrap();
        assert!(matches!(dataset_from_bytes(&bytes[..bytes.len() - 10]), Err(Error::Truncated(_))));
        assert!(matches!(dataset_from_bytes(&[]), Err(Error::Truncated(_))));
        let mut v2 = bytes.clone();
        v2[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(dataset_from_bytes(&v2), Err(Error::Version { found: 2, .. })));
        let mut bad = bytes;
        bad[3] = b'X';
        assert!(matches!(dataset_from_bytes(&bad), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn mixed_optional_fields_rejected() {
        let mut ds = sample_set(2);
        ds.samples[1].true_angle = None;
        assert!(dataset_to_bytes(&ds).is_err());
    }
}
