//! Run artifacts: long-format CSV rows, the JSON report document, flat binary
//! fields and the SHA-256 manifest.
//!
//! Binary layouts, all little-endian:
//! * aux and distance fields: `n: u64, d: u64, L: f64, h: f64, kind: u64`, then
//!   one f64 per node in grid order. `kind` holds the aux kind code in its low
//!   byte; bit 8 marks a distance field and bit 9 an ℓ₂ path length.
//! * Green fields: `N: u64, L: f64, d: u64, pole: u64`, then d×d row-major
//!   blocks per node in grid order.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::auxmetric::{AuxField, DistanceField, PathNorm};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::pde::GreenField;

/// JSON schema every `report.json` validates against.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

/// One long-format CSV record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub experiment: String,
    pub weight: String,
    pub quantity: String,
    /// Sample coordinates joined by ';' (empty for scalars).
    pub x: String,
    pub value: f64,
}

impl Row {
    pub fn new(experiment: &str, weight: &str, quantity: &str, x: &[f64], value: f64) -> Self {
        Row { experiment: experiment.into(), weight: weight.into(), quantity: quantity.into(), x: join(x), value }
    }

    pub fn scalar(experiment: &str, weight: &str, quantity: &str, value: f64) -> Self {
        Self::new(experiment, weight, quantity, &[], value)
    }

    pub fn flag(experiment: &str, weight: &str, quantity: &str, on: bool) -> Self {
        Self::scalar(experiment, weight, quantity, if on { 1.0 } else { 0.0 })
    }
}

pub fn join(x: &[f64]) -> String {
    x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

pub const CSV_HEADER: [&str; 5] = ["experiment", "weight", "quantity", "x", "value"];

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<()> {
    let io = |e: csv::Error| Error::Io(format!("{}: {e}", path.display()));
    // The header is written even when there are no rows.
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(io)?;
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<(String, String, String, String, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    r.deserialize().map(|rec| rec.map_err(|e| Error::Io(format!("{}: {e}", path.display())))).collect()
}

/// The JSON summary of one run. Sections are keyed and ordered by name.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    pub sections: BTreeMap<String, Value>,
    pub stages: Vec<Stage>,
    pub files: Vec<FileEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
    pub budget: Option<f64>,
    pub over_budget: bool,
    pub pass: Option<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

impl Report {
    pub fn new(command: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Report {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(config).map_err(|e| Error::Config(format!("config does not serialize: {e}")))?,
            sections: BTreeMap::new(),
            stages: Vec::new(),
            files: Vec::new(),
        })
    }

    pub fn section(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let v = serde_json::to_value(value).map_err(|e| Error::Io(format!("section {name} does not serialize: {e}")))?;
        self.sections.insert(name.into(), v);
        Ok(())
    }

    /// Non-finite floats become JSON null; the CSV keeps them as NaN or inf.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let mut f = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let k = f.read(&mut buf)?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
        total += k as u64;
    }
    Ok((hex::encode(hasher.finalize()), total))
}

pub const MANIFEST: &str = "MANIFEST.sha256";

/// Hashes `names` inside `dir` and writes a sha256sum-compatible manifest, sorted by name.
pub fn write_manifest(dir: &Path, names: &[String]) -> Result<Vec<FileEntry>> {
    let mut names = names.to_vec();
    names.sort();
    names.dedup();
    let mut out = Vec::new();
    let mut text = String::new();
    for name in names {
        let (sha256, bytes) = sha256_file(&dir.join(&name))?;
        text.push_str(&format!("{sha256}  {name}\n"));
        out.push(FileEntry { name, sha256, bytes });
    }
    fs::write(dir.join(MANIFEST), text)?;
    Ok(out)
}

/// Recomputes every manifest line; returns the names whose hash differs.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let mut bad = Vec::new();
    for line in text.lines() {
        let (hash, name) = line.split_once("  ").ok_or_else(|| Error::Io(format!("malformed manifest line: {line}")))?;
        if sha256_file(&dir.join(name))?.0 != hash {
            bad.push(name.to_string());
        }
    }
    Ok(bad)
}

const DISTANCE_BIT: u64 = 1 << 8;
const L2_BIT: u64 = 1 << 9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldHeader {
    pub n: u64,
    pub d: u64,
    pub l: f64,
    pub h: f64,
    pub kind: u64,
}

impl FieldHeader {
    pub fn is_distance(&self) -> bool {
        self.kind & DISTANCE_BIT != 0
    }

    pub fn aux_code(&self) -> u64 {
        self.kind & 0xff
    }

    /// Nodes per axis implied by h = 2L/(N+1).
    pub fn grid(&self) -> Result<Grid> {
        let npa = (2.0 * self.l / self.h - 1.0).round();
        if !(npa >= 2.0) {
            return Err(Error::Io(format!("field header has inconsistent L = {} and h = {}", self.l, self.h)));
        }
        Grid::new(self.n as usize, self.l, npa as usize)
    }
}

fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn write_field(path: &Path, head: FieldHeader, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(40 + 8 * values.len());
    put_u64(&mut buf, head.n);
    put_u64(&mut buf, head.d);
    put_f64(&mut buf, head.l);
    put_f64(&mut buf, head.h);
    put_u64(&mut buf, head.kind);
    values.iter().for_each(|v| put_f64(&mut buf, *v));
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn write_aux_binary(path: &Path, f: &AuxField) -> Result<()> {
    let head = FieldHeader { n: f.grid.dim as u64, d: f.d as u64, l: f.grid.l, h: f.grid.h(), kind: f.kind.code() };
    write_field(path, head, &f.values)
}

/// `speed` is the aux field the distance was integrated from.
pub fn write_distance_binary(path: &Path, dist: &DistanceField, speed: &AuxField) -> Result<()> {
    let norm_bit = if dist.norm == PathNorm::L2 { L2_BIT } else { 0 };
    let head = FieldHeader {
        n: dist.grid.dim as u64,
        d: speed.d as u64,
        l: dist.grid.l,
        h: dist.grid.h(),
        kind: speed.kind.code() | DISTANCE_BIT | norm_bit,
    };
    write_field(path, head, &dist.values)
}

struct Cursor<'a> {
    buf: &'a [u8],
    at: usize,
    path: &'a Path,
}

impl Cursor<'_> {
    fn take(&mut self) -> Result<[u8; 8]> {
        let bytes = self
            .buf
            .get(self.at..self.at + 8)
            .ok_or_else(|| Error::Io(format!("{}: truncated at byte {}", self.path.display(), self.at)))?;
        self.at += 8;
        Ok(bytes.try_into().expect("eight bytes"))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn rest(&mut self, count: usize) -> Result<Vec<f64>> {
        let need = self.at + 8 * count;
        if self.buf.len() != need {
            return Err(Error::Io(format!("{}: expected {need} bytes, found {}", self.path.display(), self.buf.len())));
        }
        (0..count).map(|_| self.f64()).collect()
    }
}

pub fn read_field_binary(path: &Path) -> Result<(FieldHeader, Vec<f64>)> {
    let buf = fs::read(path)?;
    let mut c = Cursor { buf: &buf, at: 0, path };
    let head = FieldHeader { n: c.u64()?, d: c.u64()?, l: c.f64()?, h: c.f64()?, kind: c.u64()? };
    let len = head.grid()?.len();
    Ok((head, c.rest(len)?))
}

pub fn write_green_binary(path: &Path, g: &GreenField) -> Result<()> {
    let mut buf = Vec::with_capacity(32 + 8 * g.blocks.len());
    put_u64(&mut buf, g.grid.npa as u64);
    put_f64(&mut buf, g.grid.l);
    put_u64(&mut buf, g.d as u64);
    put_u64(&mut buf, g.pole as u64);
    g.blocks.iter().for_each(|v| put_f64(&mut buf, *v));
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

/// Reads a Green field; the residual is not stored and comes back as NaN.
pub fn read_green_binary(path: &Path) -> Result<GreenField> {
    let buf = fs::read(path)?;
    let mut c = Cursor { buf: &buf, at: 0, path };
    let npa = c.u64()? as usize;
    let l = c.f64()?;
    let d = c.u64()? as usize;
    let pole = c.u64()? as usize;
    let grid = Grid::cube3(l, npa)?;
    if pole >= grid.len() {
        return Err(Error::Io(format!("{}: pole {pole} outside a grid of {} nodes", path.display(), grid.len())));
    }
    let blocks = c.rest(grid.len() * d * d)?;
    Ok(GreenField { grid, d, pole, blocks, residual: f64::NAN })
}

/// Output directory plus the list of files written so far.
pub struct Bundle {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl Bundle {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Bundle { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.into());
        self.dir.join(name)
    }

    pub fn csv(&mut self, name: &str, rows: &[Row]) -> Result<()> {
        let p = self.path(name);
        write_csv(&p, rows)
    }

    /// Writes the report, then the manifest covering every file including the report.
    /// The report lists the data files; it cannot list its own hash.
    pub fn finish(mut self, name: &str, report: &mut Report) -> Result<PathBuf> {
        report.files = self
            .files
            .iter()
            .map(|f| {
                let (sha256, bytes) = sha256_file(&self.dir.join(f))?;
                Ok(FileEntry { name: f.clone(), sha256, bytes })
            })
            .collect::<Result<_>>()?;
        report.files.sort_by(|a, b| a.name.cmp(&b.name));
        let p = self.path(name);
        fs::write(&p, report.to_json())?;
        write_manifest(&self.dir, &self.files)?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auxmetric::{agmon_field, AuxKind};

    #[test]
    fn aux_and_distance_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::cube3(1.5, 9).unwrap();
        let mut f = AuxField::constant(g, 2, 1.0);
        f.kind = AuxKind::Upper;
        f.values.iter_mut().enumerate().for_each(|(k, v)| *v = 1.0 + k as f64 * 0.25);
        let p = dir.path().join("aux.bin");
        write_aux_binary(&p, &f).unwrap();
        let (head, vals) = read_field_binary(&p).unwrap();
        assert_eq!((head.n, head.d, head.aux_code(), head.is_distance()), (3, 2, 1, false));
        assert_eq!(head.grid().unwrap(), g);
        assert_eq!(vals, f.values);

        let dist = agmon_field(&f, 0, PathNorm::L2);
        let q = dir.path().join("dist.bin");
        write_distance_binary(&q, &dist, &f).unwrap();
        let (head, vals) = read_field_binary(&q).unwrap();
        assert!(head.is_distance() && head.kind & L2_BIT != 0);
        assert_eq!(vals, dist.values);
    }

    #[test]
    fn green_round_trip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::cube3(1.0, 9).unwrap();
        let blocks: Vec<f64> = (0..g.len() * 4).map(|k| k as f64 - 0.5).collect();
        let gf = GreenField { grid: g, d: 2, pole: 17, blocks, residual: 0.0 };
        let p = dir.path().join("g.bin");
        write_green_binary(&p, &gf).unwrap();
        let back = read_green_binary(&p).unwrap();
        assert_eq!((back.grid, back.d, back.pole, &back.blocks), (g, 2, 17, &gf.blocks));
        let bytes = fs::read(&p).unwrap();
        assert_eq!(bytes.len(), 32 + 8 * g.len() * 4);
        fs::write(&p, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(read_green_binary(&p), Err(Error::Io(_))));
    }

    #[test]
    fn manifest_detects_changes() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = Bundle::create(dir.path()).unwrap();
        b.csv("a.csv", &[Row::new("e", "w", "q", &[1.0, 2.5], 3.0), Row::scalar("e", "w", "s", f64::NAN)]).unwrap();
        let mut rep = Report::new("test", &serde_json::json!({"seed": 1})).unwrap();
        b.finish("report.json", &mut rep).unwrap();
        assert_eq!(rep.files.len(), 1);
        assert!(verify_manifest(dir.path()).unwrap().is_empty());
        let text = fs::read_to_string(dir.path().join("a.csv")).unwrap();
        assert_eq!(text, "experiment,weight,quantity,x,value\ne,w,q,1;2.5,3.0\ne,w,s,,NaN\n");
        fs::write(dir.path().join("a.csv"), "changed").unwrap();
        assert_eq!(verify_manifest(dir.path()).unwrap(), vec!["a.csv".to_string()]);
    }
}
