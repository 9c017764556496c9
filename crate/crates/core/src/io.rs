//! File formats: the binary model cache, Matrix Market export and CSV tables.
//!
//! Model cache, little endian:
//!
//! ```text
//! "HUBM"  version:u32 = 1
//! rows:u32 cols:u32 n_up:u32 n_down:u32  U:f64  a:f64 omega:f64 sigma_p:f64 t_p:f64
//! h_diag: n × f64
//! h_symm, h_anti: n:u64 nnz:u64 row_ptr:(n+1)×u64 col_idx:nnz×u64 values:nnz×f64
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::model::HubbardModel;
use crate::pulse::{Drive, PulseParams};
use crate::sparse::SparseRealMatrix;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"HUBM";
pub const VERSION: u32 = 1;

fn put_u32(w: &mut impl Write, x: u32) -> Result<()> {
    Ok(w.write_all(&x.to_le_bytes())?)
}

fn put_u64(w: &mut impl Write, x: u64) -> Result<()> {
    Ok(w.write_all(&x.to_le_bytes())?)
}

fn put_f64(w: &mut impl Write, x: f64) -> Result<()> {
    Ok(w.write_all(&x.to_le_bytes())?)
}

fn get<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated model file".into()),
        _ => Error::Io(e),
    })?;
    Ok(b)
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(get(r)?))
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(get(r)?))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(get(r)?))
}

fn get_len(r: &mut impl Read, limit: u64, what: &str) -> Result<usize> {
    let x = get_u64(r)?;
    if x > limit {
        return Err(Error::Format(format!("{what} = {x} exceeds {limit}")));
    }
    Ok(x as usize)
}

fn write_csr(w: &mut impl Write, m: &SparseRealMatrix) -> Result<()> {
    put_u64(w, m.n() as u64)?;
    put_u64(w, m.nnz() as u64)?;
    for &p in m.row_ptr() {
        put_u64(w, p as u64)?;
    }
    for &c in m.col_idx() {
        put_u64(w, c as u64)?;
    }
    for &v in m.values() {
        put_f64(w, v)?;
    }
    Ok(())
}

fn read_csr(r: &mut impl Read, n: usize) -> Result<SparseRealMatrix> {
    let got = get_len(r, n as u64, "matrix dimension")?;
    if got != n {
        return Err(Error::Format(format!("matrix dimension {got}, expected {n}")));
    }
    let nnz = get_len(r, (n as u64).saturating_mul(n as u64), "nnz")?;
    let mut row_ptr = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        row_ptr.push(get_len(r, nnz as u64, "row pointer")?);
    }
    let mut col_idx = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        col_idx.push(get_u64(r)? as usize);
    }
    let mut values = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        values.push(get_f64(r)?);
    }
    SparseRealMatrix::from_raw(n, row_ptr, col_idx, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_model(w: &mut impl Write, m: &HubbardModel) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(w, VERSION)?;
    for x in [m.rows, m.cols, m.basis.n_up(), m.basis.n_down()] {
        put_u32(w, x as u32)?;
    }
    put_f64(w, m.u)?;
    for x in [m.pulse.a, m.pulse.omega, m.pulse.sigma_p, m.pulse.t_p] {
        put_f64(w, x)?;
    }
    for &d in &m.h_diag {
        put_f64(w, d)?;
    }
    write_csr(w, &m.h_symm)?;
    write_csr(w, &m.h_anti)?;
    Ok(())
}

pub fn read_model(r: &mut impl Read) -> Result<HubbardModel> {
    if &get::<4>(r)? != MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = get_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported model file version {version}")));
    }
    let rows = get_u32(r)? as usize;
    let cols = get_u32(r)? as usize;
    let n_up = get_u32(r)? as usize;
    let n_down = get_u32(r)? as usize;
    let u = get_f64(r)?;
    let pulse = PulseParams::new(get_f64(r)?, get_f64(r)?, get_f64(r)?, get_f64(r)?);
    let basis = crate::Basis::enumerate(rows * cols, n_up, n_down).map_err(|e| Error::Format(e.to_string()))?;
    let n = basis.len();
    let mut h_diag = Vec::with_capacity(n);
    for _ in 0..n {
        h_diag.push(get_f64(r)?);
    }
    let h_symm = read_csr(r, n)?;
    let h_anti = read_csr(r, n)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after model data".into()));
    }
    HubbardModel::from_parts(rows, cols, n_up, n_down, u, pulse, h_diag, h_symm, h_anti)
        .map_err(|e| Error::Format(e.to_string()))
}

pub fn save_model(path: &Path, m: &HubbardModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, m)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<HubbardModel> {
    read_model(&mut BufReader::new(File::open(path)?))
}

/// Writes `H(t)` as a Matrix Market `coordinate complex hermitian` file
/// (lower triangle, one-based indices).
pub fn write_matrix_market(w: &mut impl Write, m: &HubbardModel, t: f64) -> Result<()> {
    let p = m.pulse.eval(t);
    let n = m.dim();
    let mut entries = Vec::new();
    for i in 0..n {
        if m.h_diag[i] != 0.0 {
            entries.push((i, i, m.h_diag[i], 0.0));
        }
        for ((j, vs), (_, va)) in m.h_symm.row(i).zip(m.h_anti.row(i)) {
            if j < i {
                entries.push((i, j, p.c * vs, p.s * va));
            }
        }
    }
    writeln!(w, "%%MatrixMarket matrix coordinate complex hermitian")?;
    writeln!(w, "% H(t) at t = {t:e}")?;
    writeln!(w, "{n} {n} {}", entries.len())?;
    for (i, j, re, im) in entries {
        writeln!(w, "{} {} {re:.17e} {im:.17e}", i + 1, j + 1)?;
    }
    Ok(())
}

/// Reads a `coordinate complex hermitian` file into `(n, entries)` with
/// zero-based indices, lower triangle as stored.
pub fn read_matrix_market(r: impl BufRead) -> Result<(usize, Vec<(usize, usize, f64, f64)>)> {
    let mut lines = r.lines();
    let banner = lines.next().ok_or_else(|| Error::Format("empty file".into()))??;
    if !banner.to_ascii_lowercase().starts_with("%%matrixmarket matrix coordinate complex hermitian") {
        return Err(Error::Format(format!("unsupported banner `{banner}`")));
    }
    let mut size = None;
    let mut entries = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let bad = || Error::Format(format!("line {}: `{line}`", k + 2));
        let f: Vec<&str> = line.split_whitespace().collect();
        match size {
            None => {
                let v: Vec<usize> = f.iter().map(|x| x.parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
                if v.len() != 3 || v[0] != v[1] {
                    return Err(bad());
                }
                size = Some((v[0], v[2]));
            }
            Some((n, _)) => {
                if f.len() != 4 {
                    return Err(bad());
                }
                let i: usize = f[0].parse().map_err(|_| bad())?;
                let j: usize = f[1].parse().map_err(|_| bad())?;
                let re: f64 = f[2].parse().map_err(|_| bad())?;
                let im: f64 = f[3].parse().map_err(|_| bad())?;
                if i == 0 || j == 0 || i > n || j > i {
                    return Err(bad());
                }
                entries.push((i - 1, j - 1, re, im));
            }
        }
    }
    let (n, nnz) = size.ok_or_else(|| Error::Format("missing size line".into()))?;
    if entries.len() != nnz {
        return Err(Error::Format(format!("expected {nnz} entries, found {}", entries.len())));
    }
    Ok((n, entries))
}

/// A CSV table preceded by `# key: value` metadata lines.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            meta: Vec::new(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        let v = value.to_string().replace('\n', " ");
        self.meta.push((key.to_string(), v));
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Parameter(format!(
                "row has {} fields, header has {}",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn get_meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        for (k, v) in &self.meta {
            writeln!(w, "# {k}: {v}")?;
        }
        writeln!(w, "{}", self.header.join(","))?;
        self.write_body(w)
    }

    /// Header line and rows only.
    pub fn write_body(&self, w: &mut impl Write) -> Result<()> {
        for r in &self.rows {
            writeln!(w, "{}", r.join(","))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let mut t = CsvTable::default();
        let mut have_header = false;
        for (k, line) in r.lines().enumerate() {
            let line = line?;
            if let Some(m) = line.strip_prefix('#') {
                if have_header {
                    return Err(Error::Format(format!("line {}: metadata after header", k + 1)));
                }
                let (key, value) = m
                    .split_once(':')
                    .ok_or_else(|| Error::Format(format!("line {}: metadata without `:`", k + 1)))?;
                t.meta.push((key.trim().to_string(), value.trim().to_string()));
            } else if line.trim().is_empty() {
                continue;
            } else if !have_header {
                t.header = line.split(',').map(|s| s.trim().to_string()).collect();
                have_header = true;
            } else {
                let row: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
                if row.len() != t.header.len() {
                    return Err(Error::Format(format!(
                        "line {}: {} fields, expected {}",
                        k + 1,
                        row.len(),
                        t.header.len()
                    )));
                }
                t.rows.push(row);
            }
        }
        if !have_header {
            return Err(Error::Format("missing header line".into()));
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:e}")
    }
}
