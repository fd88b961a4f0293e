//! Report CSV and SVG line charts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::{SweepRecord, SweepReport};
use crate::types::Strategy;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportPaths {
    pub csv: PathBuf,
    pub map_svg: PathBuf,
    pub seconds_svg: PathBuf,
}

impl ReportPaths {
    /// `records.csv`, `map_vs_k.svg` and `seconds_vs_k.svg` under `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let d = dir.as_ref();
        Self {
            csv: d.join("records.csv"),
            map_svg: d.join("map_vs_k.svg"),
            seconds_svg: d.join("seconds_vs_k.svg"),
        }
    }
}

pub fn write_records_csv(records: &[SweepRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    if records.is_empty() {
        w.write_record(["scene", "strategy", "K", "repeat", "seed", "map", "wall_seconds", "matrix_bytes"])?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Which column a chart plots against K.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Map,
    Seconds,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Mean of `metric` over repeats for each (strategy, K), strategies in
/// order of first appearance.
fn series(records: &[SweepRecord], metric: Metric) -> Vec<(Strategy, Vec<(usize, f64)>)> {
    let mut order: Vec<Strategy> = Vec::new();
    let mut sums: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for r in records {
        let s = order.iter().position(|&x| x == r.strategy).unwrap_or_else(|| {
            order.push(r.strategy);
            order.len() - 1
        });
        let v = match metric {
            Metric::Map => r.map,
            Metric::Seconds => r.wall_seconds,
        };
        let e = sums.entry((s, r.k)).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    }
    order
        .iter()
        .enumerate()
        .map(|(si, &s)| {
            let pts = sums
                .range((si, 0)..=(si, usize::MAX))
                .map(|(&(_, k), &(sum, n))| (k, sum / n as f64))
                .collect();
            (s, pts)
        })
        .collect()
}

/// Line chart of `metric` against K (log2 axis), one polyline per strategy.
/// Output depends only on the records.
pub fn render_svg(records: &[SweepRecord], metric: Metric) -> String {
    let data = series(records, metric);
    let ks: Vec<usize> = {
        let mut v: Vec<usize> = records.iter().map(|r| r.k).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let (lx_min, lx_max) = match (ks.first(), ks.last()) {
        (Some(&a), Some(&b)) => ((a as f64).log2(), (b as f64).log2()),
        _ => (0.0, 1.0),
    };
    let y_max = match metric {
        Metric::Map => 1.0,
        Metric::Seconds => {
            let m = data
                .iter()
                .flat_map(|(_, p)| p.iter().map(|&(_, v)| v))
                .fold(0.0f64, f64::max);
            if m > 0.0 {
                m * 1.1
            } else {
                1.0
            }
        }
    };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_of = |k: usize| {
        if lx_max > lx_min {
            LEFT + ((k as f64).log2() - lx_min) / (lx_max - lx_min) * plot_w
        } else {
            LEFT + plot_w / 2.0
        }
    };
    let y_of = |v: f64| TOP + plot_h - (v / y_max).clamp(0.0, 1.0) * plot_h;
    let (title, y_label) = match metric {
        Metric::Map => ("mAP vs K", "mAP"),
        Metric::Seconds => ("Wall time vs K", "seconds"),
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{title}</text>"#,
        LEFT + plot_w / 2.0
    );
    // Axes.
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT:.1},{TOP:.1} V{:.1} H{:.1}" fill="none" stroke="black"/>"#,
        TOP + plot_h,
        LEFT + plot_w
    );
    for &k in &ks {
        let x = x_of(k);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{k}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 18.0
        );
    }
    for i in 0..=4 {
        let v = y_max * f64::from(i) / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{LEFT:.1}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            tick_label(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">K (landmarks per block)</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18,{:.1}) rotate(-90)" text-anchor="middle">{y_label}</text>"#,
        TOP + plot_h / 2.0
    );

    for (i, (strategy, pts)) in data.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(k, v)| format!("{:.1},{:.1}", x_of(k), y_of(v))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-strategy="{strategy}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for &(k, v) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                x_of(k),
                y_of(v)
            );
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            s,
            r#"<g class="legend"><line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{strategy}</text></g>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick_label(v: f64) -> String {
    if v == 0.0 || v >= 10.0 {
        format!("{v:.0}")
    } else if v >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

pub fn emit_report(report: &SweepReport, paths: &ReportPaths) -> Result<()> {
    if report.records.is_empty() {
        return Err(Error::Empty("sweep report"));
    }
    write_records_csv(&report.records, &paths.csv)?;
    std::fs::write(&paths.map_svg, render_svg(&report.records, Metric::Map))?;
    std::fs::write(&paths.seconds_svg, render_svg(&report.records, Metric::Seconds))?;
    Ok(())
}
