//! Versioned file formats: chip JSON, results / metrics / correlation CSV,
//! gnuplot data and scripts, syndrome traces and nest dumps.
//!
//! Every CSV starts with a `# superunit <name> v1` line; readers skip `#` lines.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::lattice::{Chip, Device};
use crate::metrics::{ChipMetrics, Mode, METRIC_NAMES};
use crate::montecarlo::PointResult;
use crate::nest::{Neighbor, Nest};
use crate::Error;

pub const CHIP_FORMAT: &str = "superunit-chip";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ChipFile {
    format: String,
    version: u32,
    distance: usize,
    #[serde(rename = "yield")]
    yield_: f64,
    seed: u64,
    devices: Vec<Device>,
}

pub fn chip_to_json(chip: &Chip) -> String {
    let file = ChipFile {
        format: CHIP_FORMAT.into(),
        version: VERSION,
        distance: chip.distance,
        yield_: chip.yield_,
        seed: chip.seed,
        devices: chip.devices.clone(),
    };
    serde_json::to_string_pretty(&file).expect("chip serializes")
}

pub fn chip_from_json(text: &str) -> Result<Chip, Error> {
    let file: ChipFile = serde_json::from_str(text)?;
    if file.format != CHIP_FORMAT || file.version != VERSION {
        return Err(Error::Invalid(format!(
            "unsupported chip format {} v{}",
            file.format, file.version
        )));
    }
    let n = 2 * file.distance.max(1) - 1;
    if file.distance < 2 || file.devices.len() != n * n {
        return Err(Error::Invalid(format!(
            "distance {} needs {} devices, found {}",
            file.distance,
            n * n,
            file.devices.len()
        )));
    }
    for (i, dev) in file.devices.iter().enumerate() {
        if dev.role != crate::lattice::role_at(i / n, i % n) {
            return Err(Error::Invalid(format!(
                "device {i} has role {:?} off the checkerboard",
                dev.role
            )));
        }
    }
    Ok(Chip {
        distance: file.distance,
        yield_: file.yield_,
        seed: file.seed,
        devices: file.devices,
    })
}

fn header(w: &mut impl Write, name: &str) -> Result<(), Error> {
    writeln!(w, "# superunit {name} v{VERSION}")?;
    Ok(())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Invalid(format!("csv: {e}"))
}

/// One row of the results CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub chip_id: String,
    pub d: usize,
    pub y: f64,
    pub p: f64,
    pub rounds: u64,
    pub x_errors: u64,
    pub z_errors: u64,
    pub x_rate: f64,
    pub z_rate: f64,
    /// Wilson 95% interval of the logical X rate.
    pub ci_low: f64,
    pub ci_high: f64,
}

impl ResultRow {
    pub fn new(chip_id: &str, chip: &Chip, r: &PointResult) -> Self {
        ResultRow {
            chip_id: chip_id.into(),
            d: chip.distance,
            y: chip.yield_,
            p: r.p,
            rounds: r.rounds,
            x_errors: r.x_errors,
            z_errors: r.z_errors,
            x_rate: r.x_rate,
            z_rate: r.z_rate,
            ci_low: r.x_ci.0,
            ci_high: r.x_ci.1,
        }
    }
}

pub fn write_results(w: &mut impl Write, rows: &[ResultRow]) -> Result<(), Error> {
    header(w, "results")?;
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_results(r: impl Read) -> Result<Vec<ResultRow>, Error> {
    reader(r).deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Metrics CSV: chip id, then one column per metric, then the chip-level round length.
pub fn write_metrics(w: &mut impl Write, rows: &[(String, ChipMetrics)]) -> Result<(), Error> {
    header(w, "metrics")?;
    let mut out = csv::Writer::from_writer(w);
    let mut head = vec!["chip_id"];
    head.extend(METRIC_NAMES);
    head.push("steps_per_round");
    out.write_record(&head).map_err(csv_err)?;
    for (id, m) in rows {
        let mut rec = vec![id.clone()];
        rec.extend(m.values().iter().map(|v| v.to_string()));
        rec.push(m.steps_per_round.to_string());
        out.write_record(&rec).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Correlation report rows: (metric, mode, coefficient, rank within mode).
pub fn write_correlations(w: &mut impl Write, rows: &[(&str, Mode, f64, usize)]) -> Result<(), Error> {
    header(w, "correlation")?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["metric", "mode", "r", "rank"]).map_err(csv_err)?;
    for &(name, mode, r, rank) in rows {
        out.write_record([name, mode.name(), &r.to_string(), &rank.to_string()])
            .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Gnuplot data: one index block per curve with columns p, x_rate, ci_low, ci_high.
pub fn gnuplot_data(curves: &[(String, Vec<ResultRow>)]) -> String {
    let mut out = format!("# superunit plot v{VERSION}\n");
    for (i, (label, rows)) in curves.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# {label}");
        let mut rows = rows.clone();
        rows.sort_by(|a, b| a.p.total_cmp(&b.p));
        for r in rows {
            let _ = writeln!(out, "{} {} {} {}", r.p, r.x_rate, r.ci_low, r.ci_high);
        }
    }
    out
}

/// Gnuplot script for `data_file`: log-log axes, error bars, break-even diagonal.
pub fn gnuplot_script(data_file: &str, labels: &[String], title: &str, output: &str) -> String {
    let mut out = format!("# superunit plot script v{VERSION}\n");
    let _ = writeln!(out, "set terminal pngcairo size 900,700");
    let _ = writeln!(out, "set output '{output}'");
    let _ = writeln!(out, "set title '{title}'");
    let _ = writeln!(out, "set logscale xy");
    let _ = writeln!(out, "set format xy '10^{{%L}}'");
    let _ = writeln!(out, "set xlabel 'physical error rate p'");
    let _ = writeln!(out, "set ylabel 'logical X error rate per round'");
    let _ = writeln!(out, "set key left top");
    let mut plots: Vec<String> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| format!("'{data_file}' index {i} using 1:2:3:4 with yerrorlines title '{l}'"))
        .collect();
    plots.push("x with lines lc rgb 'black' title 'break-even'".into());
    let _ = writeln!(out, "plot {}", plots.join(", \\\n     "));
    out
}

/// One measured stabilizer outcome of a syndrome trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Error-correction round the outcome belongs to.
    pub cycle: u64,
    pub stabilizer: usize,
    /// Flip relative to the noiseless outcome.
    pub outcome: u8,
}

pub fn write_trace(w: &mut impl Write, rows: &[TraceRow]) -> Result<(), Error> {
    header(w, "syndrome trace")?;
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Nest dump: vertices `v j stabilizer offset`, edges
/// `e a b dk coefficient effect`, with `B` for the boundary.
pub fn nest_dump(nest: &Nest) -> String {
    let mut out = format!("# superunit nest v{VERSION}\n");
    let _ = writeln!(
        out,
        "# kind={} period={} vertices={} edges={}",
        nest.kind,
        nest.period,
        nest.n_vertices(),
        nest.edges.len()
    );
    for j in 0..nest.n_vertices() {
        let _ = writeln!(out, "v {j} {} {}", nest.stabilizers[j], nest.offsets[j]);
    }
    for e in &nest.edges {
        let (b, dk) = match e.b {
            Neighbor::Boundary => ("B".to_string(), 0),
            Neighbor::Vertex(j, dk) => (j.to_string(), dk),
        };
        let eff = e.effect.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(
            out,
            "e {} {b} {dk} {} {}",
            e.a,
            e.coefficient,
            if eff.is_empty() { "-" } else { &eff }
        );
    }
    out
}

/// Parsed nest dump: vertices (stabilizer, offset) and edges (a, b, dk, coefficient).
pub fn parse_nest_dump(text: &str) -> Result<(Vec<(usize, u32)>, Vec<(u32, Option<u32>, i32, f64)>), Error> {
    let bad = |l: &str| Error::Invalid(format!("nest dump line: {l}"));
    let mut verts = Vec::new();
    let mut edges = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.first() {
            Some(&"v") if f.len() == 4 => verts.push((
                f[2].parse().map_err(|_| bad(line))?,
                f[3].parse().map_err(|_| bad(line))?,
            )),
            Some(&"e") if f.len() == 6 => {
                let b = if f[2] == "B" {
                    None
                } else {
                    Some(f[2].parse().map_err(|_| bad(line))?)
                };
                edges.push((
                    f[1].parse().map_err(|_| bad(line))?,
                    b,
                    f[3].parse().map_err(|_| bad(line))?,
                    f[4].parse().map_err(|_| bad(line))?,
                ));
            }
            _ => return Err(bad(line)),
        }
    }
    Ok((verts, edges))
}

/// 3-D view of a nest: vertex coordinates (home column, home row, step) and
/// segments whose diameter is proportional to edge probability at `p`.
pub fn nest_visualization(nest: &Nest, homes: &[crate::lattice::DeviceId], p: f64) -> String {
    let mut out = format!("# superunit nest view v{VERSION}\n");
    let pos = |j: u32, k: i64| {
        let h = homes[nest.stabilizers[j as usize]];
        (h.c() as f64, h.r() as f64, nest.time(j, k) as f64)
    };
    for j in 0..nest.n_vertices() as u32 {
        let (x, y, z) = pos(j, 0);
        let _ = writeln!(out, "v {x} {y} {z}");
    }
    for e in &nest.edges {
        let (x0, y0, z0) = pos(e.a, 0);
        let (x1, y1, z1) = match e.b {
            Neighbor::Vertex(j, dk) => pos(j, dk as i64),
            // Boundary edges point straight out of the lattice plane.
            Neighbor::Boundary => (x0, y0, z0 - 0.5),
        };
        let _ = writeln!(out, "s {x0} {y0} {z0} {x1} {y1} {z1} {}", p * e.coefficient);
    }
    out
}
