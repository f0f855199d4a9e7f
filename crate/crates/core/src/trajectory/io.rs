//! On-disk dataset layout: `dataset.json` holds metadata and motor
//! sequences; `sensory.bin` holds every frame as little-endian `f32`,
//! sample-major, frame-major, row-major.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ArmConfig, KeyPoint, MotionDataset, MotorMatrix, NormalizationRecord, PrimitiveSpec, Rejection, Trajectory};
use crate::error::{Error, Result};

pub const DATASET_FILE: &str = "dataset.json";
pub const SENSORY_FILE: &str = "sensory.bin";
pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    format_version: u32,
    #[serde(rename = "T")]
    steps: usize,
    p: usize,
    #[serde(rename = "H")]
    height: usize,
    #[serde(rename = "W")]
    width: usize,
    #[serde(rename = "K")]
    primitive_count: usize,
    seed: u64,
    normalization_record: Option<NormalizationRecord>,
    arm: ArmConfig,
    primitives: Vec<PrimitiveSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleRecord {
    primitive_id: usize,
    variation: Vec<f64>,
    motor: Vec<Vec<f64>>,
    #[serde(default)]
    key_points: Vec<KeyPoint>,
    sensory_path: String,
    /// Byte offset of this sample's first frame inside `sensory_path`.
    sensory_offset: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetDocument {
    meta: Meta,
    samples: Vec<SampleRecord>,
    #[serde(default)]
    rejections: Vec<Rejection>,
}

/// Paths written by [`save_dataset`].
#[derive(Debug, Clone)]
pub struct DatasetFiles {
    pub json: PathBuf,
    pub sensory: PathBuf,
}

pub fn save_dataset(ds: &MotionDataset, dir: &Path) -> Result<DatasetFiles> {
    ds.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let frame_bytes = (ds.steps() * ds.pixels() * 4) as u64;
    let doc = DatasetDocument {
        meta: Meta {
            format_version: DATASET_FORMAT_VERSION,
            steps: ds.steps(),
            p: ds.joints(),
            height: ds.arm.height,
            width: ds.arm.width,
            primitive_count: ds.primitive_count(),
            seed: ds.seed,
            normalization_record: ds.normalization.clone(),
            arm: ds.arm.clone(),
            primitives: ds.primitives.clone(),
        },
        samples: ds
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| SampleRecord {
                primitive_id: s.primitive_id,
                variation: s.variation.clone(),
                motor: s.motor.rows(),
                key_points: s.key_points.clone(),
                sensory_path: SENSORY_FILE.to_string(),
                sensory_offset: i as u64 * frame_bytes,
            })
            .collect(),
        rejections: ds.rejections.clone(),
    };

    let json_path = dir.join(DATASET_FILE);
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::json("dataset document", e))?;
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;

    let bin_path = dir.join(SENSORY_FILE);
    let mut bytes = Vec::with_capacity(ds.len() * frame_bytes as usize);
    for s in &ds.samples {
        for v in &s.sensory {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&bin_path, e))?;

    Ok(DatasetFiles {
        json: json_path,
        sensory: bin_path,
    })
}

pub fn load_dataset(dir: &Path) -> Result<MotionDataset> {
    let json_path = dir.join(DATASET_FILE);
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let doc: DatasetDocument =
        serde_json::from_str(&text).map_err(|e| Error::json(json_path.display().to_string(), e))?;
    if doc.meta.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::InvalidArgument(format!(
            "unsupported dataset format version {}",
            doc.meta.format_version
        )));
    }
    let (steps, joints, height, width) = (doc.meta.steps, doc.meta.p, doc.meta.height, doc.meta.width);
    let frame_floats = steps * height * width;

    let mut blobs: Vec<(String, Vec<u8>)> = Vec::new();
    let mut samples = Vec::with_capacity(doc.samples.len());
    for rec in doc.samples {
        if !blobs.iter().any(|(name, _)| *name == rec.sensory_path) {
            let p = dir.join(&rec.sensory_path);
            let data = fs::read(&p).map_err(|e| Error::io(&p, e))?;
            blobs.push((rec.sensory_path.clone(), data));
        }
        let blob = &blobs.iter().find(|(name, _)| *name == rec.sensory_path).expect("loaded above").1;
        let start = rec.sensory_offset as usize;
        let end = start + frame_floats * 4;
        if end > blob.len() {
            return Err(Error::InvalidArgument(format!(
                "{} is too short for sample at offset {start}",
                rec.sensory_path
            )));
        }
        let sensory = blob[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let motor = MotorMatrix::from_rows(&rec.motor)?;
        samples.push(Trajectory {
            motor,
            sensory,
            primitive_id: rec.primitive_id,
            variation: rec.variation,
            key_points: rec.key_points,
        });
    }
    let ds = MotionDataset {
        arm: doc.meta.arm,
        primitives: doc.meta.primitives,
        samples,
        normalization: doc.meta.normalization_record,
        seed: doc.meta.seed,
        rejections: doc.rejections,
    };
    if (ds.steps(), ds.joints(), ds.arm.height, ds.arm.width) != (steps, joints, height, width) {
        return Err(Error::InvalidArgument(
            "meta T/p/H/W disagree with the stored arm configuration".into(),
        ));
    }
    ds.validate()?;
    Ok(ds)
}
