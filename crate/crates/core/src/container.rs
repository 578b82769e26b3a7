//! Binary and CSV persistence for dictionaries, sensing matrices and
//! ground truths.
//!
//! Binary layout (all little-endian):
//!
//! ```text
//! magic    [u8; 4]  b"ODFM"
//! version  u16      1
//! tag      u8       0 custom, 1 gabor, 2 spike-Fourier, 3 sensing,
//!                   4 ground-truth coefficients, 5 ground-truth signal
//! reserved u8       0
//! rows     u64
//! cols     u64
//! p0, p1   u64      integer parameters (see below)
//! q0, q1   f64      real parameters
//! data     rows * cols * [re f64, im f64], row-major
//! ```
//!
//! Parameters: Gabor `p = (time shifts, frequencies)`, `q = (window std,
//! oversampling)`; sensing `p0 = seed`, `q0 = entry std`; ground truth
//! `p = (seed, sparsity)`. Unused slots are zero. Richer metadata goes in a
//! JSON sidecar ([`write_metadata`]).

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::frames::{Dictionary, DictionaryKind, FrameError, GaborLattice};
use crate::sensing::{GroundTruth, SensingEnsemble};
use crate::{CMatrix, C64};

pub const MAGIC: [u8; 4] = *b"ODFM";
pub const VERSION: u16 = 1;

pub const TAG_SENSING: u8 = 3;
pub const TAG_COEFFICIENTS: u8 = 4;
pub const TAG_SIGNAL: u8 = 5;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("bad container: {0}")]
    Format(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// Header of a container file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub tag: u8,
    pub rows: u64,
    pub cols: u64,
    pub ints: [u64; 2],
    pub reals: [f64; 2],
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ContainerError + '_ {
    move |source| ContainerError::Io { path: path.to_path_buf(), source }
}

/// Serializes `header` and `data` (row-major complex) to bytes.
pub fn encode(header: &Header, data: &CMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(48 + data.len() * 16);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(header.tag);
    out.push(0);
    out.extend_from_slice(&header.rows.to_le_bytes());
    out.extend_from_slice(&header.cols.to_le_bytes());
    for p in header.ints {
        out.extend_from_slice(&p.to_le_bytes());
    }
    for q in header.reals {
        out.extend_from_slice(&q.to_le_bytes());
    }
    for i in 0..data.nrows() {
        for j in 0..data.ncols() {
            let z = data[(i, j)];
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

fn take<const N: usize>(bytes: &mut &[u8]) -> Result<[u8; N], ContainerError> {
    if bytes.len() < N {
        return Err(ContainerError::Format("truncated".into()));
    }
    let (head, rest) = bytes.split_at(N);
    *bytes = rest;
    Ok(head.try_into().expect("split length"))
}

/// Inverse of [`encode`].
pub fn decode(mut bytes: &[u8]) -> Result<(Header, CMatrix), ContainerError> {
    let b = &mut bytes;
    if take::<4>(b)? != MAGIC {
        return Err(ContainerError::Format("bad magic".into()));
    }
    let version = u16::from_le_bytes(take(b)?);
    if version != VERSION {
        return Err(ContainerError::Format(format!("unsupported version {version}")));
    }
    let [tag, _] = take::<2>(b)?;
    let rows = u64::from_le_bytes(take(b)?);
    let cols = u64::from_le_bytes(take(b)?);
    let ints = [u64::from_le_bytes(take(b)?), u64::from_le_bytes(take(b)?)];
    let reals = [f64::from_le_bytes(take(b)?), f64::from_le_bytes(take(b)?)];
    let count = rows.checked_mul(cols).and_then(|c| c.checked_mul(16));
    if count != Some(b.len() as u64) {
        return Err(ContainerError::Format(format!("expected {rows}x{cols} entries, found {} bytes", b.len())));
    }
    let (rows, cols) = (rows as usize, cols as usize);
    let mut data = CMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re = f64::from_le_bytes(take(b)?);
            let im = f64::from_le_bytes(take(b)?);
            data[(i, j)] = C64::new(re, im);
        }
    }
    Ok((Header { tag, rows: rows as u64, cols: cols as u64, ints, reals }, data))
}

pub fn write_container(path: &Path, header: &Header, data: &CMatrix) -> Result<(), ContainerError> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    w.write_all(&encode(header, data)).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_container(path: &Path) -> Result<(Header, CMatrix), ContainerError> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(io_err(path))?)
        .read_to_end(&mut bytes)
        .map_err(io_err(path))?;
    decode(&bytes)
}

pub fn dictionary_header(dict: &Dictionary) -> Header {
    let (ints, reals) = match dict.kind() {
        DictionaryKind::Gabor { oversampling, window_std, lattice } => (
            [lattice.time_shifts as u64, lattice.frequencies as u64],
            [*window_std, *oversampling as f64],
        ),
        _ => ([0, 0], [0.0, 0.0]),
    };
    Header { tag: dict.kind().tag(), rows: dict.n() as u64, cols: dict.d() as u64, ints, reals }
}

pub fn write_dictionary(path: &Path, dict: &Dictionary) -> Result<(), ContainerError> {
    write_container(path, &dictionary_header(dict), dict.atoms())
}

pub fn read_dictionary(path: &Path) -> Result<Dictionary, ContainerError> {
    let (h, atoms) = read_container(path)?;
    let kind = match h.tag {
        0 => DictionaryKind::Custom,
        1 => {
            let (shifts, freqs) = (h.ints[0] as usize, h.ints[1] as usize);
            if shifts == 0 || !(h.rows as usize).is_multiple_of(shifts) {
                return Err(ContainerError::Format("inconsistent Gabor lattice".into()));
            }
            DictionaryKind::Gabor {
                oversampling: h.reals[1] as usize,
                window_std: h.reals[0],
                lattice: GaborLattice { time_step: h.rows as usize / shifts, time_shifts: shifts, frequencies: freqs },
            }
        }
        2 => DictionaryKind::SpikeFourier,
        t => return Err(ContainerError::Format(format!("tag {t} is not a dictionary"))),
    };
    Ok(Dictionary::from_matrix(atoms, kind)?)
}

pub fn write_sensing(path: &Path, ens: &SensingEnsemble) -> Result<(), ContainerError> {
    let header = Header {
        tag: TAG_SENSING,
        rows: ens.m as u64,
        cols: ens.n as u64,
        ints: [ens.seed, 0],
        reals: [ens.scale, 0.0],
    };
    write_container(path, &header, &ens.as_complex())
}

pub fn read_sensing(path: &Path) -> Result<SensingEnsemble, ContainerError> {
    let (h, data) = read_container(path)?;
    if h.tag != TAG_SENSING {
        return Err(ContainerError::Format(format!("tag {} is not a sensing matrix", h.tag)));
    }
    let phi: DMatrix<f64> = data.map(|z| z.re);
    Ok(SensingEnsemble { m: phi.nrows(), n: phi.ncols(), phi, seed: h.ints[0], scale: h.reals[0] })
}

/// Writes the coefficients and the signal of a ground truth as two
/// single-column containers, `<stem>.x.bin` and `<stem>.f.bin`.
pub fn write_ground_truth(dir: &Path, stem: &str, truth: &GroundTruth) -> Result<(), ContainerError> {
    let ints = [truth.seed, truth.s as u64];
    let x = CMatrix::from_column_slice(truth.x.len(), 1, truth.x.as_slice());
    let f = CMatrix::from_column_slice(truth.f.len(), 1, truth.f.as_slice());
    let h = |tag, rows: usize| Header { tag, rows: rows as u64, cols: 1, ints, reals: [0.0, 0.0] };
    write_container(&dir.join(format!("{stem}.x.bin")), &h(TAG_COEFFICIENTS, x.nrows()), &x)?;
    write_container(&dir.join(format!("{stem}.f.bin")), &h(TAG_SIGNAL, f.nrows()), &f)
}

/// Long-format CSV: `row,col,re,im`.
pub fn write_matrix_csv(path: &Path, data: &CMatrix) -> Result<(), ContainerError> {
    let csv_err = |source| ContainerError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["row", "col", "re", "im"]).map_err(csv_err)?;
    for i in 0..data.nrows() {
        for j in 0..data.ncols() {
            let z = data[(i, j)];
            w.write_record(&[i.to_string(), j.to_string(), z.re.to_string(), z.im.to_string()]).map_err(csv_err)?;
        }
    }
    w.flush().map_err(io_err(path))
}

/// Pretty JSON sidecar.
pub fn write_metadata<T: Serialize>(path: &Path, value: &T) -> Result<(), ContainerError> {
    let file = File::create(path).map_err(io_err(path))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)
        .map_err(|source| ContainerError::Json { path: path.to_path_buf(), source })
}
