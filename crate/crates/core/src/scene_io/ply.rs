//! ASCII PLY, vertex element only. Rows of other elements are skipped.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::types::{LabeledCloud, Point3};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

const SCALAR_TYPES: &[&str] = &[
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double", "int8", "uint8", "int16",
    "uint16", "int32", "uint32", "float32", "float64",
];

struct Element {
    name: String,
    count: usize,
    properties: Vec<String>,
}

pub(super) fn read<R: Read>(reader: R) -> Result<LabeledCloud> {
    let mut lines = BufReader::new(reader).lines();
    let mut next = || -> Result<Option<String>> { Ok(lines.next().transpose()?) };

    if next()?.as_deref().map(str::trim) != Some("ply") {
        return Err(parse_err(1, "missing \"ply\" magic"));
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut n = 1;
    loop {
        n += 1;
        let line = next()?.ok_or_else(|| parse_err(n, "header ended before end_header"))?;
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["format", "ascii", _] => {}
            ["format", other, ..] => return Err(parse_err(n, format!("unsupported format {other:?}"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| parse_err(n, format!("bad element count {count:?}")))?,
                properties: Vec::new(),
            }),
            ["property", "list", ..] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(n, "property before element"))?;
                if el.name == "vertex" {
                    return Err(parse_err(n, "list properties on vertices are not supported"));
                }
                el.properties.push(String::from("<list>"));
            }
            ["property", ty, name] => {
                if !SCALAR_TYPES.contains(ty) {
                    return Err(parse_err(n, format!("unknown property type {ty:?}")));
                }
                elements
                    .last_mut()
                    .ok_or_else(|| parse_err(n, "property before element"))?
                    .properties
                    .push(name.to_string());
            }
            ["end_header"] => break,
            _ => return Err(parse_err(n, format!("unrecognised header line {line:?}"))),
        }
    }

    let mut cloud = LabeledCloud::default();
    for el in &elements {
        if el.name != "vertex" {
            for _ in 0..el.count {
                n += 1;
                next()?.ok_or_else(|| parse_err(n, format!("missing {} rows", el.name)))?;
            }
            continue;
        }
        let col = |name: &str| el.properties.iter().position(|p| p == name);
        let need = |name: &str| col(name).ok_or_else(|| parse_err(n, format!("vertex lacks property {name:?}")));
        let (x, y, z) = (need("x")?, need("y")?, need("z")?);
        let rgb = match (col("red"), col("green"), col("blue")) {
            (Some(r), Some(g), Some(b)) => Some([r, g, b]),
            _ => None,
        };
        let inst = col("gt_instance");
        let cat = col("gt_category");
        cloud.points.reserve(el.count);
        let mut colors = rgb.map(|_| Vec::with_capacity(el.count));
        let mut instances = inst.map(|_| Vec::with_capacity(el.count));
        let mut categories = cat.map(|_| Vec::with_capacity(el.count));
        for _ in 0..el.count {
            n += 1;
            let line = next()?.ok_or_else(|| parse_err(n, "fewer vertex rows than declared"))?;
            let vals: Vec<&str> = line.split_whitespace().collect();
            if vals.len() != el.properties.len() {
                return Err(parse_err(
                    n,
                    format!("expected {} values, found {}", el.properties.len(), vals.len()),
                ));
            }
            let num = |i: usize| -> Result<f64> {
                vals[i]
                    .parse()
                    .map_err(|_| parse_err(n, format!("cannot parse {:?}", vals[i])))
            };
            let int = |i: usize| -> Result<u32> {
                vals[i]
                    .parse()
                    .map_err(|_| parse_err(n, format!("cannot parse {:?} as an unsigned id", vals[i])))
            };
            cloud.points.push(Point3::new(num(x)?, num(y)?, num(z)?));
            if let (Some([r, g, b]), Some(c)) = (rgb, colors.as_mut()) {
                let byte = |i: usize| -> Result<u8> {
                    vals[i]
                        .parse()
                        .map_err(|_| parse_err(n, format!("color {:?} out of range", vals[i])))
                };
                c.push([byte(r)?, byte(g)?, byte(b)?]);
            }
            if let (Some(i), Some(v)) = (inst, instances.as_mut()) {
                v.push(int(i)?);
            }
            if let (Some(i), Some(v)) = (cat, categories.as_mut()) {
                v.push(int(i)?);
            }
        }
        cloud.colors = colors;
        cloud.gt_instance = instances;
        cloud.gt_category = categories;
        return Ok(cloud);
    }
    Err(parse_err(n, "no vertex element"))
}

pub(super) fn write<W: Write>(cloud: &LabeledCloud, mut w: W) -> Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    if cloud.colors.is_some() {
        writeln!(w, "property uchar red")?;
        writeln!(w, "property uchar green")?;
        writeln!(w, "property uchar blue")?;
    }
    if cloud.gt_instance.is_some() {
        writeln!(w, "property uint gt_instance")?;
    }
    if cloud.gt_category.is_some() {
        writeln!(w, "property uint gt_category")?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.points.iter().enumerate() {
        write!(w, "{} {} {}", p.x, p.y, p.z)?;
        if let Some(c) = &cloud.colors {
            write!(w, " {} {} {}", c[i][0], c[i][1], c[i][2])?;
        }
        if let Some(v) = &cloud.gt_instance {
            write!(w, " {}", v[i])?;
        }
        if let Some(v) = &cloud.gt_category {
            write!(w, " {}", v[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}
