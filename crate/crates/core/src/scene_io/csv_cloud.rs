//! CSV clouds: `x,y,z[,r,g,b][,gt_instance,gt_category]` with a header row.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::types::{LabeledCloud, Point3};

struct Columns {
    xyz: [usize; 3],
    rgb: Option<[usize; 3]>,
    instance: Option<usize>,
    category: Option<usize>,
    width: usize,
}

fn columns(header: &csv::StringRecord) -> Result<Columns> {
    let find = |name: &str| header.iter().position(|h| h.trim() == name);
    let need = |name: &str| {
        find(name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column {name:?}"),
        })
    };
    let rgb = match (find("r"), find("g"), find("b")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        (None, None, None) => None,
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "color needs all of r,g,b".into(),
            })
        }
    };
    Ok(Columns {
        xyz: [need("x")?, need("y")?, need("z")?],
        rgb,
        instance: find("gt_instance"),
        category: find("gt_category"),
        width: header.len(),
    })
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, col: usize, line: usize) -> Result<T> {
    let raw = rec.get(col).unwrap_or("").trim();
    raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse {raw:?} in column {}", col + 1),
    })
}

pub(super) fn read<R: Read>(reader: R) -> Result<LabeledCloud> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let cols = columns(rdr.headers()?)?;
    let mut cloud = LabeledCloud {
        colors: cols.rgb.map(|_| Vec::new()),
        gt_instance: cols.instance.map(|_| Vec::new()),
        gt_category: cols.category.map(|_| Vec::new()),
        ..LabeledCloud::default()
    };
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != cols.width {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", cols.width, rec.len()),
            });
        }
        let [x, y, z] = cols.xyz;
        cloud
            .points
            .push(Point3::new(field(&rec, x, line)?, field(&rec, y, line)?, field(&rec, z, line)?));
        if let (Some([r, g, b]), Some(c)) = (cols.rgb, cloud.colors.as_mut()) {
            c.push([field(&rec, r, line)?, field(&rec, g, line)?, field(&rec, b, line)?]);
        }
        if let (Some(i), Some(v)) = (cols.instance, cloud.gt_instance.as_mut()) {
            v.push(field(&rec, i, line)?);
        }
        if let (Some(i), Some(v)) = (cols.category, cloud.gt_category.as_mut()) {
            v.push(field(&rec, i, line)?);
        }
    }
    Ok(cloud)
}

pub(super) fn write<W: Write>(cloud: &LabeledCloud, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["x", "y", "z"];
    if cloud.colors.is_some() {
        header.extend(["r", "g", "b"]);
    }
    if cloud.gt_instance.is_some() {
        header.push("gt_instance");
    }
    if cloud.gt_category.is_some() {
        header.push("gt_category");
    }
    wtr.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for (i, p) in cloud.points.iter().enumerate() {
        row.clear();
        row.extend([p.x, p.y, p.z].iter().map(|v| v.to_string()));
        if let Some(c) = &cloud.colors {
            row.extend(c[i].iter().map(|v| v.to_string()));
        }
        if let Some(v) = &cloud.gt_instance {
            row.push(v[i].to_string());
        }
        if let Some(v) = &cloud.gt_category {
            row.push(v[i].to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
