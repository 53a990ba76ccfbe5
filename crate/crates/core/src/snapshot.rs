//! Snapshot files of a mode field.
//!
//! Binary layout (little endian):
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 4     | magic `NSMF`                              |
//! | 4     | format version, `u32` = 1                 |
//! | 4     | dimension `n`, `u32`                      |
//! | 8     | period `l`, `f64`                         |
//! | 4     | cutoff `K`, `u32`                         |
//! | 4     | component count, `u32`                    |
//! | 4     | flags, `u32` (bit 0: Hermitian-symmetric) |
//! | 16 m  | `(re, im)` pairs as `f64`                 |
//!
//! Coefficients are stored component by component, each in lattice order
//! (lexicographic, first axis slowest). The text variant carries the same
//! header as `key value` lines after a `nsmodes-snapshot 1` line, then one
//! line `component α_1 .. α_n re im` per coefficient in the same order.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use thiserror::Error;

use crate::lattice::{ModeBox, ModeField};

const MAGIC: &[u8; 4] = b"NSMF";
const VERSION: u32 = 1;
const TEXT_TAG: &str = "nsmodes-snapshot";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot i/o: {0}")]
    Io(#[from] io::Error),
    #[error("malformed snapshot: {0}")]
    Format(String),
}

type Result<T> = std::result::Result<T, SnapshotError>;

fn malformed<T>(msg: impl Into<String>) -> Result<T> {
    Err(SnapshotError::Format(msg.into()))
}

/// A stored field with the period it was produced at.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub period: f64,
    pub field: ModeField,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotFormat {
    Binary,
    Text,
}

pub fn write_binary<W: Write>(mut w: W, field: &ModeField, period: f64) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(field.dim() as u32).to_le_bytes())?;
    w.write_all(&period.to_le_bytes())?;
    w.write_all(&(field.cutoff() as u32).to_le_bytes())?;
    w.write_all(&(field.n_components() as u32).to_le_bytes())?;
    w.write_all(&(field.is_real() as u32).to_le_bytes())?;
    for z in field.coefficients() {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn assemble(n: usize, period: f64, k: usize, ncomp: usize, real: bool, data: Vec<Complex64>) -> Result<Snapshot> {
    if ncomp != n {
        return malformed(format!("{ncomp} components for dimension {n}"));
    }
    match ModeField::from_coefficients(n, k, real, data) {
        Ok(field) => Ok(Snapshot { period, field }),
        Err(e) => malformed(e.to_string()),
    }
}

fn check_header(n: usize, k: usize) -> Result<()> {
    if !(1..=3).contains(&n) {
        return malformed(format!("dimension {n} not in 1..=3"));
    }
    if k > 1024 {
        return malformed(format!("cutoff {k} out of range"));
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<Snapshot> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return malformed("bad magic");
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return malformed(format!("unsupported version {version}"));
    }
    let n = read_u32(&mut r)? as usize;
    let period = read_f64(&mut r)?;
    let k = read_u32(&mut r)? as usize;
    let ncomp = read_u32(&mut r)? as usize;
    let flags = read_u32(&mut r)?;
    check_header(n, k)?;
    let len = ncomp * ModeBox::new(n, k).len();
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        let re = read_f64(&mut r)?;
        let im = read_f64(&mut r)?;
        data.push(Complex64::new(re, im));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return malformed("trailing bytes");
    }
    assemble(n, period, k, ncomp, flags & 1 == 1, data)
}

pub fn write_text<W: Write>(mut w: W, field: &ModeField, period: f64) -> io::Result<()> {
    writeln!(w, "{TEXT_TAG} {VERSION}")?;
    writeln!(w, "n {}", field.dim())?;
    writeln!(w, "period {period:?}")?;
    writeln!(w, "cutoff {}", field.cutoff())?;
    writeln!(w, "components {}", field.n_components())?;
    writeln!(w, "real {}", field.is_real() as u8)?;
    let geometry = *field.geometry();
    for i in 0..field.n_components() {
        for (a, z) in geometry.iter().zip(field.component(i)) {
            write!(w, "{i}")?;
            for e in a.entries() {
                write!(w, " {e}")?;
            }
            writeln!(w, " {:?} {:?}", z.re, z.im)?;
        }
    }
    w.flush()
}

pub fn read_text<R: BufRead>(r: R) -> Result<Snapshot> {
    let mut lines = r.lines().enumerate();
    let mut next_line = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((no, line)) => Ok((no + 1, line?)),
            None => malformed(format!("missing {what}")),
        }
    };
    let (_, tag) = next_line("tag line")?;
    if tag.trim() != format!("{TEXT_TAG} {VERSION}") {
        return malformed(format!("line 1: expected '{TEXT_TAG} {VERSION}'"));
    }
    let mut header = |key: &str| -> Result<String> {
        let (no, line) = next_line(key)?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim().to_string()),
            _ => malformed(format!("line {no}: expected '{key} <value>'")),
        }
    };
    let parse_err = |key: &str| SnapshotError::Format(format!("bad value for {key}"));
    let n: usize = header("n")?.parse().map_err(|_| parse_err("n"))?;
    let period: f64 = header("period")?.parse().map_err(|_| parse_err("period"))?;
    let k: usize = header("cutoff")?.parse().map_err(|_| parse_err("cutoff"))?;
    let ncomp: usize = header("components")?.parse().map_err(|_| parse_err("components"))?;
    let real = header("real")? == "1";
    check_header(n, k)?;
    let geometry = ModeBox::new(n, k);
    let mut data = Vec::with_capacity(ncomp * geometry.len());
    for i in 0..ncomp {
        for a in geometry.iter() {
            let (no, line) = next_line("coefficient line")?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != n + 3 {
                return malformed(format!("line {no}: expected {} fields", n + 3));
            }
            let comp: usize = fields[0].parse().map_err(|_| parse_err("component"))?;
            let idx: Vec<i64> = fields[1..=n]
                .iter()
                .map(|s| s.parse().map_err(|_| parse_err("index")))
                .collect::<Result<_>>()?;
            if comp != i || idx != a.entries() {
                return malformed(format!("line {no}: coefficient out of lattice order"));
            }
            let re: f64 = fields[n + 1].parse().map_err(|_| parse_err("re"))?;
            let im: f64 = fields[n + 2].parse().map_err(|_| parse_err("im"))?;
            data.push(Complex64::new(re, im));
        }
    }
    assemble(n, period, k, ncomp, real, data)
}

pub fn save(path: &Path, field: &ModeField, period: f64, format: SnapshotFormat) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    match format {
        SnapshotFormat::Binary => write_binary(w, field, period)?,
        SnapshotFormat::Text => write_text(w, field, period)?,
    }
    Ok(())
}

/// Reads either format, recognised by the leading bytes.
pub fn load(path: &Path) -> Result<Snapshot> {
    let mut r = BufReader::new(File::open(path)?);
    let head = r.fill_buf()?;
    if head.starts_with(MAGIC) {
        read_binary(r)
    } else {
        read_text(r)
    }
}
