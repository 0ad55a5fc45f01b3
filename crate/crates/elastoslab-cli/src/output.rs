//! On-disk formats: `energy.csv`, binary snapshots and the run manifest.
//!
//! Snapshot layout, all little endian:
//!
//! ```text
//! magic     8 bytes  "ESLBSNAP"
//! version   u32      1
//! n1 n2 n3  3 x u32  grid intervals (n3 + 1 layers are stored)
//! t         f64
//! nfields   u32
//! names     nfields x (u16 length, UTF-8 bytes)
//! payload   nfields x (n3 + 1) x n2 x n1 f64, row-major [field][i3][i2][i1]
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use elastoslab::diagnostics::EnergyRecord;
use elastoslab::evolution::Snapshot;
use elastoslab::{Grid, ScalarField, VectorField};
use serde::{Deserialize, Serialize};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"ESLBSNAP";
pub const SNAPSHOT_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 36] = [
    "t",
    "E_kappa",
    "E_limit",
    "kappa_v",
    "kappa_eta",
    "kappa_g0_eta",
    "kappa_boundary",
    "limit_v",
    "limit_eta",
    "limit_g0_eta",
    "limit_boundary",
    "div_a_v",
    "j_minus_1",
    "piola",
    "f_identity",
    "div_v",
    "div_g0t_eta",
    "curl_a_v",
    "curl_a_g0t_eta",
    "curl_growth",
    "rt_margin_bottom",
    "rt_margin_top",
    "nc_margin_bottom",
    "nc_margin_top",
    "apriori_jk_dev",
    "apriori_ak_dev",
    "apriori_rt_margin",
    "apriori_ok",
    "jk_ok",
    "ak_ok",
    "rt_ok",
    "pressure_iterations",
    "pressure_residual",
    "disp_h2",
    "v_h2",
    "q_max",
];

/// Seventeen significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Extra per-record numbers not carried by `EnergyRecord`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordExtras {
    pub disp_h2: f64,
    pub v_h2: f64,
    pub q_max: f64,
}

pub fn csv_row(r: &EnergyRecord, x: &RecordExtras, lambda: f64) -> String {
    let flag = |b: bool| if b { "1".to_string() } else { "0".to_string() };
    let a = &r.apriori;
    let rt_ok = !(a.rt_margin < 0.5 * lambda);
    let cells: Vec<String> = [
        r.t,
        r.e_kappa,
        r.e_limit,
        r.kappa_parts.v,
        r.kappa_parts.eta,
        r.kappa_parts.g0_eta,
        r.kappa_parts.boundary,
        r.limit_parts.v,
        r.limit_parts.eta,
        r.limit_parts.g0_eta,
        r.limit_parts.boundary,
        r.residuals.div_a_v,
        r.residuals.j_minus_1,
        r.residuals.piola,
        r.residuals.f_identity,
        r.residuals.div_v,
        r.residuals.div_g0t_eta,
        r.residuals.curl_a_v,
        r.residuals.curl_a_g0t_eta,
        r.residuals.curl_growth,
        r.rt_margins[0],
        r.rt_margins[1],
        r.nc_margins[0],
        r.nc_margins[1],
        a.jk_dev,
        a.ak_dev,
        a.rt_margin,
    ]
    .iter()
    .map(|&v| fmt_f64(v))
    .chain([
        flag(a.ok),
        flag(a.jk_dev <= elastoslab::evolution::APRIORI_BOUND),
        flag(a.ak_dev <= elastoslab::evolution::APRIORI_BOUND),
        flag(rt_ok),
        r.pressure_iterations.to_string(),
        fmt_f64(r.pressure_residual),
        fmt_f64(x.disp_h2),
        fmt_f64(x.v_h2),
        fmt_f64(x.q_max),
    ])
    .collect();
    cells.join(",")
}

pub fn write_csv(path: &Path, rows: &[String]) -> io::Result<()> {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    fs::write(path, out)
}

/// Parsed `energy.csv`: header and numeric columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl EnergyTable {
    pub fn read(path: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "empty energy.csv"))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for l in lines {
            let row: Result<Vec<f64>, _> = l.split(',').map(str::parse::<f64>).collect();
            rows.push(row.map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?);
        }
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Field dump of one snapshot: disp_1..3, v_1..3, q.
pub fn snapshot_fields(s: &Snapshot) -> Vec<(&'static str, &ScalarField)> {
    vec![
        ("disp_1", &s.disp.c[0]),
        ("disp_2", &s.disp.c[1]),
        ("disp_3", &s.disp.c[2]),
        ("v_1", &s.v.c[0]),
        ("v_2", &s.v.c[1]),
        ("v_3", &s.v.c[2]),
        ("q", &s.q),
    ]
}

pub fn write_snapshot(path: &Path, t: f64, fields: &[(&str, &ScalarField)]) -> io::Result<()> {
    let grid = fields[0].1.grid;
    let mut buf = Vec::with_capacity(64 + fields.len() * grid.len() * 8);
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    for n in [grid.n1, grid.n2, grid.n3] {
        buf.extend_from_slice(&(n as u32).to_le_bytes());
    }
    buf.extend_from_slice(&t.to_le_bytes());
    buf.extend_from_slice(&(fields.len() as u32).to_le_bytes());
    for (name, _) in fields {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
    }
    for (_, f) in fields {
        for x in &f.data {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    fs::File::create(path)?.write_all(&buf)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotData {
    pub grid: Grid,
    pub t: f64,
    pub fields: Vec<(String, ScalarField)>,
}

impl SnapshotData {
    pub fn field(&self, name: &str) -> Option<&ScalarField> {
        self.fields.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    pub fn displacement(&self) -> Option<VectorField> {
        let c = [self.field("disp_1")?, self.field("disp_2")?, self.field("disp_3")?];
        Some(VectorField::new(c.map(Clone::clone)))
    }
}

fn bad(msg: &str) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.to_string())
}

pub fn read_snapshot(path: &Path) -> io::Result<SnapshotData> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut pos = 0usize;
    let mut take = |n: usize| -> io::Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated snapshot"))?;
        pos += n;
        Ok(s)
    };
    if take(8)? != SNAPSHOT_MAGIC {
        return Err(bad("bad snapshot magic"));
    }
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap());
    if u32_at(take(4)?) != SNAPSHOT_VERSION {
        return Err(bad("unsupported snapshot version"));
    }
    let n1 = u32_at(take(4)?) as usize;
    let n2 = u32_at(take(4)?) as usize;
    let n3 = u32_at(take(4)?) as usize;
    let grid = Grid::new(n1, n2, n3).map_err(|e| bad(&e.to_string()))?;
    let t = f64::from_le_bytes(take(8)?.try_into().unwrap());
    let nf = u32_at(take(4)?) as usize;
    let mut names = Vec::with_capacity(nf);
    for _ in 0..nf {
        let len = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
        names.push(String::from_utf8(take(len)?.to_vec()).map_err(|_| bad("field name is not UTF-8"))?);
    }
    let mut fields = Vec::with_capacity(nf);
    for name in names {
        let raw = take(grid.len() * 8)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        fields.push((name, ScalarField::from_vec(grid, data)));
    }
    Ok(SnapshotData { grid, t, fields })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub t: f64,
    pub jk_dev: f64,
    pub ak_dev: f64,
    pub rt_margin: Option<f64>,
}

/// Run manifest, written as `manifest.json` in each run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    /// Configuration text that reproduces this run on its own.
    pub config: String,
    pub seed: u64,
    pub kappa: f64,
    pub grid: [usize; 3],
    pub dt: f64,
    pub t_final: f64,
    pub t_run: f64,
    pub steps: usize,
    pub violation: Option<ViolationReport>,
    pub max_pressure_iterations: usize,
    pub max_pressure_residual: f64,
    pub initial_margins: InitialMargins,
    pub snapshots: Vec<String>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialMargins {
    pub rt: [f64; 2],
    pub nc: [f64; 2],
}

/// Sweep index written at the output root: one entry per radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepIndex {
    pub runs: Vec<SweepEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub kappa: f64,
    pub dir: String,
}

pub fn run_dir_name(kappa: f64) -> String {
    format!("kappa_{kappa:?}")
}
