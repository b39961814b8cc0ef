//! Persisted artifact formats: CSV tables, a binary snapshot blob, JSON
//! sidecars, and SHA-256 checksums.
//!
//! Floats are written with the shortest round-trip representation, so files
//! are byte-identical across runs and parse back to the exact same values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::burgers::SnapshotSet;
use crate::decomposition::KoopmanTriplet;
use crate::error::{Error, Result};
use crate::metrics::EvalReport;
use crate::model_select::SelectionResult;
use crate::temporal::{NlarxModel, TwofoldReport};

/// Magic bytes opening the binary snapshot blob.
pub const SNAPSHOT_MAGIC: &[u8; 8] = b"KRODSNAP";

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?,
    ))
}

fn write_err(path: &Path, e: std::io::Error) -> Error {
    Error::io(path.display().to_string(), e)
}

/// Hex-encoded SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut reader = open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = reader.read(&mut buf).map_err(|e| write_err(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Writes a snapshot set as CSV: header row carries the sample times, the
/// first column the spatial grid.
pub fn write_snapshot_csv(set: &SnapshotSet, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let mut header = String::from("x");
    for i in 0..set.values.ncols() {
        header.push_str(&format!(",{}", set.t0 + i as f64 * set.dt));
    }
    writeln!(out, "{header}").map_err(|e| write_err(path, e))?;
    for (j, &x) in set.x_grid.iter().enumerate() {
        let mut line = format!("{x}");
        for i in 0..set.values.ncols() {
            line.push_str(&format!(",{}", set.values[(j, i)]));
        }
        writeln!(out, "{line}").map_err(|e| write_err(path, e))?;
    }
    out.flush().map_err(|e| write_err(path, e))
}

pub fn read_snapshot_csv(path: &Path) -> Result<SnapshotSet> {
    let reader = open(path)?;
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path.display().to_string(), "empty file"))?
        .map_err(|e| write_err(path, e))?;
    let times: Vec<f64> = header
        .split(',')
        .skip(1)
        .map(|v| v.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::format(path.display().to_string(), format!("bad header: {e}")))?;
    if times.len() < 2 {
        return Err(Error::format(path.display().to_string(), "need at least two time columns"));
    }
    let mut x_grid = Vec::new();
    let mut rows = Vec::new();
    for line in lines {
        let line = line.map_err(|e| write_err(path, e))?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let x = fields
            .next()
            .unwrap()
            .parse::<f64>()
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        let row: Vec<f64> = fields
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        if row.len() != times.len() {
            return Err(Error::format(path.display().to_string(), "ragged row"));
        }
        x_grid.push(x);
        rows.push(row);
    }
    let values = DMatrix::from_fn(rows.len(), times.len(), |r, c| rows[r][c]);
    Ok(SnapshotSet { values, x_grid, dt: times[1] - times[0], t0: times[0] })
}

/// Writes the binary snapshot blob: a 32-byte header (magic, u32 rows,
/// u32 columns, f64 dt, f64 domain length) followed by row-major
/// little-endian f64 values.
pub fn write_snapshot_blob(set: &SnapshotSet, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let length = set.x_grid.last().copied().unwrap_or(0.0) - set.x_grid.first().copied().unwrap_or(0.0);
    out.write_all(SNAPSHOT_MAGIC).map_err(|e| write_err(path, e))?;
    out.write_all(&(set.values.nrows() as u32).to_le_bytes()).map_err(|e| write_err(path, e))?;
    out.write_all(&(set.values.ncols() as u32).to_le_bytes()).map_err(|e| write_err(path, e))?;
    out.write_all(&set.dt.to_le_bytes()).map_err(|e| write_err(path, e))?;
    out.write_all(&length.to_le_bytes()).map_err(|e| write_err(path, e))?;
    for r in 0..set.values.nrows() {
        for c in 0..set.values.ncols() {
            out.write_all(&set.values[(r, c)].to_le_bytes()).map_err(|e| write_err(path, e))?;
        }
    }
    out.flush().map_err(|e| write_err(path, e))
}

pub fn read_snapshot_blob(path: &Path) -> Result<SnapshotSet> {
    let mut reader = open(path)?;
    let mut header = [0u8; 32];
    reader.read_exact(&mut header).map_err(|e| write_err(path, e))?;
    if &header[..8] != SNAPSHOT_MAGIC {
        return Err(Error::format(path.display().to_string(), "bad magic"));
    }
    let rows = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let dt = f64::from_le_bytes(header[16..24].try_into().unwrap());
    let length = f64::from_le_bytes(header[24..32].try_into().unwrap());
    let mut data = vec![0u8; rows * cols * 8];
    reader.read_exact(&mut data).map_err(|e| write_err(path, e))?;
    let values = DMatrix::from_fn(rows, cols, |r, c| {
        let off = (r * cols + c) * 8;
        f64::from_le_bytes(data[off..off + 8].try_into().unwrap())
    });
    let h = if rows > 1 { length / (rows - 1) as f64 } else { 0.0 };
    let x_grid = (0..rows).map(|j| j as f64 * h).collect();
    Ok(SnapshotSet { values, x_grid, dt, t0: 0.0 })
}

/// Plain matrix CSV without header.
pub fn write_matrix_csv(matrix: &DMatrix<f64>, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    for r in 0..matrix.nrows() {
        let line: Vec<String> = (0..matrix.ncols()).map(|c| format!("{}", matrix[(r, c)])).collect();
        writeln!(out, "{}", line.join(",")).map_err(|e| write_err(path, e))?;
    }
    out.flush().map_err(|e| write_err(path, e))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let reader = open(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| write_err(path, e))?;
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::format(path.display().to_string(), "ragged row"));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::format(path.display().to_string(), "empty matrix"));
    }
    Ok(DMatrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c]))
}

/// JSON sidecar for a persisted triplet.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TripletSidecar {
    pub k: usize,
    pub seed: u64,
    pub eigvals: Vec<f64>,
}

/// Persists a triplet as modes CSV (columns are modes), amplitudes CSV
/// (rows are coefficients), and a JSON sidecar.
pub fn write_triplet(
    triplet: &KoopmanTriplet,
    modes_path: &Path,
    amplitudes_path: &Path,
    sidecar_path: &Path,
) -> Result<()> {
    write_matrix_csv(&triplet.modes, modes_path)?;
    write_matrix_csv(&triplet.amplitudes, amplitudes_path)?;
    let sidecar = TripletSidecar {
        k: triplet.rank,
        seed: triplet.seed,
        eigvals: triplet.eigvals.iter().copied().collect(),
    };
    write_json(&sidecar, sidecar_path)
}

pub fn read_triplet(
    modes_path: &Path,
    amplitudes_path: &Path,
    sidecar_path: &Path,
) -> Result<KoopmanTriplet> {
    let modes = read_matrix_csv(modes_path)?;
    let amplitudes = read_matrix_csv(amplitudes_path)?;
    let sidecar: TripletSidecar = read_json(sidecar_path)?;
    Ok(KoopmanTriplet {
        modes,
        amplitudes,
        rank: sidecar.k,
        eigvals: DVector::from_vec(sidecar.eigvals),
        seed: sidecar.seed,
    })
}

/// Scores table: `k,error,similarity,on_front,chosen` per scored candidate.
pub fn write_scores_csv(selection: &SelectionResult, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "k,error,similarity,on_front,chosen").map_err(|e| write_err(path, e))?;
    for score in &selection.all_scores {
        let on_front = selection.front.iter().any(|f| f.k == score.k);
        let chosen = selection.chosen.k == score.k;
        writeln!(
            out,
            "{},{},{},{},{}",
            score.k,
            score.error,
            score.similarity,
            u8::from(on_front),
            u8::from(chosen)
        )
        .map_err(|e| write_err(path, e))?;
    }
    out.flush().map_err(|e| write_err(path, e))
}

/// Scalar part of an evaluation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub pearson: f64,
    pub mae: f64,
    pub max_offdiagonal_mac: f64,
}

impl EvalSummary {
    pub fn from_report(report: &EvalReport) -> EvalSummary {
        let k = report.mac.nrows();
        let mut max_off = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    max_off = max_off.max(report.mac[(i, j)]);
                }
            }
        }
        EvalSummary { pearson: report.pearson, mae: report.mae, max_offdiagonal_mac: max_off }
    }
}

/// Validation table: `fold,coefficient,fit_percent,rmse` per coefficient.
pub fn write_validation_csv(report: &TwofoldReport, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "fold,coefficient,fit_percent,rmse").map_err(|e| write_err(path, e))?;
    for (fold, fits) in report.folds.iter().enumerate() {
        for fit in fits {
            writeln!(out, "{},{},{},{}", fold + 1, fit.coefficient, fit.fit_percent, fit.rmse)
                .map_err(|e| write_err(path, e))?;
        }
    }
    out.flush().map_err(|e| write_err(path, e))
}

/// Tidy per-step traces: `fold,coefficient,step,measured,predicted`.
pub fn write_trace_csv(
    report: &TwofoldReport,
    amplitudes: &DMatrix<f64>,
    path: &Path,
) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "fold,coefficient,step,measured,predicted").map_err(|e| write_err(path, e))?;
    for (fold, fits) in report.folds.iter().enumerate() {
        for fit in fits {
            for (step, &p) in fit.predictions.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    fold + 1,
                    fit.coefficient,
                    step,
                    amplitudes[(fit.coefficient, step)],
                    p
                )
                .map_err(|e| write_err(path, e))?;
            }
        }
    }
    out.flush().map_err(|e| write_err(path, e))
}

pub fn write_models_json(models: &[NlarxModel], path: &Path) -> Result<()> {
    write_json(&models.to_vec(), path)
}

pub fn read_models_json(path: &Path) -> Result<Vec<NlarxModel>> {
    read_json(path)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    out.write_all(text.as_bytes()).map_err(|e| write_err(path, e))?;
    out.write_all(b"\n").map_err(|e| write_err(path, e))?;
    out.flush().map_err(|e| write_err(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text).map_err(|e| write_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}
