//! Labels CSV: header `point_index,instance_id`, one row per point.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::InstanceLabeling;

#[derive(Serialize, Deserialize)]
struct Row {
    point_index: usize,
    instance_id: u32,
}

pub fn write_labels(labeling: &InstanceLabeling, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    for (point_index, &instance_id) in labeling.labels.iter().enumerate() {
        w.serialize(Row {
            point_index,
            instance_id,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a labels file. Rows may come in any order but must cover
/// `0..n` exactly once.
pub fn read_labels(path: impl AsRef<Path>) -> Result<InstanceLabeling> {
    let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let mut slots: Vec<Option<u32>> = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            line: i + 2,
            message: e.to_string(),
        })?;
        if row.point_index >= slots.len() {
            slots.resize(row.point_index + 1, None);
        }
        if slots[row.point_index].replace(row.instance_id).is_some() {
            return Err(Error::Parse {
                line: i + 2,
                message: format!("point {} listed twice", row.point_index),
            });
        }
    }
    let labels = slots
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("no label for point {i}"),
            })
        })
        .collect::<Result<Vec<u32>>>()?;
    Ok(InstanceLabeling::new(labels))
}
