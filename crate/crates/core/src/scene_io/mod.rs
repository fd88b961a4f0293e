//! Reading and writing clouds, feature matrices and label files, plus the
//! synthetic indoor-scene generator.

mod csv_cloud;
mod features;
mod generate;
mod labels;
mod ply;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

pub use features::{decode_features, encode_features, read_features, read_features_header, write_features, FSIM_MAGIC};
pub use generate::{category, generate_scene, office_preset, synthetic_features, FeatureNoise, FurnitureItem, SceneSpec};
pub use labels::{read_labels, write_labels};

use crate::error::{Error, Result};
use crate::types::LabeledCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    PlyAscii,
    Csv,
}

impl CloudFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "ply" => Some(Self::PlyAscii),
            "csv" => Some(Self::Csv),
            _ => None,
        }
    }
}

impl FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ply" | "ply-ascii" => Ok(Self::PlyAscii),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Config(format!("unknown cloud format {other:?}"))),
        }
    }
}

pub fn read_cloud(path: impl AsRef<Path>, format: CloudFormat) -> Result<LabeledCloud> {
    let reader = BufReader::new(File::open(path)?);
    let cloud = match format {
        CloudFormat::PlyAscii => ply::read(reader)?,
        CloudFormat::Csv => csv_cloud::read(reader)?,
    };
    cloud.validate()?;
    Ok(cloud)
}

pub fn write_cloud(cloud: &LabeledCloud, path: impl AsRef<Path>, format: CloudFormat) -> Result<()> {
    cloud.validate()?;
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        CloudFormat::PlyAscii => ply::write(cloud, &mut w)?,
        CloudFormat::Csv => csv_cloud::write(cloud, &mut w)?,
    }
    w.flush()?;
    Ok(())
}

/// Parses a cloud held in memory.
pub fn parse_cloud(text: &str, format: CloudFormat) -> Result<LabeledCloud> {
    let cloud = match format {
        CloudFormat::PlyAscii => ply::read(text.as_bytes())?,
        CloudFormat::Csv => csv_cloud::read(text.as_bytes())?,
    };
    cloud.validate()?;
    Ok(cloud)
}
