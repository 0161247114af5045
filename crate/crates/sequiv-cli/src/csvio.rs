//! CSV emitters and readers for the experiment artifacts.
//!
//! Column contracts: matrices as (row, col, re, im) under a `#`-prefixed
//! header carrying grid size, spacing, and time mode; trajectories as
//! (t, x, v); convergence tables as (n, error, reference). Writes go to
//! a temp file first and land by rename, so readers never see a partial
//! file.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use sequiv::classical::Trajectory;
use sequiv::model::{GridSpec, TimeMode};

use crate::{CliError, CliResult};

/// Write `content`, creating parent directories, atomically via a
/// temporary sibling file.
pub fn write_atomic(path: &Path, content: &str) -> CliResult<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = parent {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp-{}", std::process::id()));
    let tmp_path = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp_path, content)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", tmp_path.display())))?;
    std::fs::rename(&tmp_path, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp_path);
        CliError::Io(format!("renaming to {}: {e}", path.display()))
    })
}

fn mode_label(mode: TimeMode) -> &'static str {
    match mode {
        TimeMode::RealTime => "real_time",
        TimeMode::Euclidean => "euclidean",
    }
}

fn mode_from_label(label: &str) -> CliResult<TimeMode> {
    match label {
        "real_time" => Ok(TimeMode::RealTime),
        "euclidean" => Ok(TimeMode::Euclidean),
        other => Err(CliError::Io(format!("unknown mode label {other:?} in matrix header"))),
    }
}

/// Render a complex matrix with its grid metadata.
pub fn matrix_to_csv(m: &DMatrix<Complex64>, grid: &GridSpec, mode: TimeMode) -> String {
    let mut out = String::with_capacity(m.len() * 48 + 64);
    out.push_str(&format!(
        "# n={} dx={:.17e} mode={}\n",
        grid.n_points(),
        grid.dx(),
        mode_label(mode)
    ));
    out.push_str("row,col,re,im\n");
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let z = m[(i, j)];
            out.push_str(&format!("{i},{j},{:.17e},{:.17e}\n", z.re, z.im));
        }
    }
    out
}

/// Parsed matrix CSV: the matrix plus the header metadata.
pub struct MatrixCsv {
    pub matrix: DMatrix<Complex64>,
    pub n: usize,
    pub dx: f64,
    pub mode: TimeMode,
}

pub fn read_matrix_csv(path: &Path) -> CliResult<MatrixCsv> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    let bad = |msg: String| CliError::Io(format!("{}: {msg}", path.display()));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let header = header
        .strip_prefix("# ")
        .ok_or_else(|| bad("first line must be the `# n=.. dx=.. mode=..` header".into()))?;
    let mut n = None;
    let mut dx = None;
    let mut mode = None;
    for part in header.split_whitespace() {
        match part.split_once('=') {
            Some(("n", v)) => n = Some(v.parse::<usize>().map_err(|e| bad(format!("n: {e}")))?),
            Some(("dx", v)) => dx = Some(v.parse::<f64>().map_err(|e| bad(format!("dx: {e}")))?),
            Some(("mode", v)) => mode = Some(mode_from_label(v)?),
            _ => return Err(bad(format!("unrecognized header field {part:?}"))),
        }
    }
    let n = n.ok_or_else(|| bad("header missing n".into()))?;
    let dx = dx.ok_or_else(|| bad("header missing dx".into()))?;
    let mode = mode.ok_or_else(|| bad("header missing mode".into()))?;
    let columns = lines.next().ok_or_else(|| bad("missing column line".into()))?;
    if columns != "row,col,re,im" {
        return Err(bad(format!("expected `row,col,re,im`, got {columns:?}")));
    }
    let mut matrix = DMatrix::<Complex64>::zeros(n, n);
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(format!("line {}: expected 4 fields", idx + 3)));
        }
        let i: usize = fields[0].parse().map_err(|e| bad(format!("line {}: {e}", idx + 3)))?;
        let j: usize = fields[1].parse().map_err(|e| bad(format!("line {}: {e}", idx + 3)))?;
        let re: f64 = fields[2].parse().map_err(|e| bad(format!("line {}: {e}", idx + 3)))?;
        let im: f64 = fields[3].parse().map_err(|e| bad(format!("line {}: {e}", idx + 3)))?;
        if i >= n || j >= n {
            return Err(bad(format!("line {}: index ({i}, {j}) outside {n}x{n}", idx + 3)));
        }
        matrix[(i, j)] = Complex64::new(re, im);
    }
    Ok(MatrixCsv { matrix, n, dx, mode })
}

pub fn trajectory_to_csv(t: &Trajectory) -> String {
    let mut out = String::from("t,x,v\n");
    for p in &t.points {
        out.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", p.t, p.x, p.v));
    }
    out
}

/// One convergence line: step count, error, and which reference the
/// error was measured against.
pub fn convergence_to_csv(rows: &[(usize, f64, &str)]) -> String {
    let mut out = String::from("n,error,reference\n");
    for (n, error, reference) in rows {
        out.push_str(&format!("{n},{error:.17e},{reference}\n"));
    }
    out
}
