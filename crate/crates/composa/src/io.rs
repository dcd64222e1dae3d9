//! File formats: Matrix Market matrices, single-column CSV vectors,
//! edge lists, and the report/trace emission shared by the CLI and bench.

use crate::linalg::SparseMatrix;
use crate::solver::SolveReport;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

#[derive(Debug)]
pub enum IoError {
    Io(std::io::Error),
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IoError::Io(e) => write!(f, "{e}"),
            IoError::Parse {
                path,
                line,
                message,
            } => write!(f, "{path}:{line}: {message}"),
        }
    }
}

impl std::error::Error for IoError {}

impl From<std::io::Error> for IoError {
    fn from(e: std::io::Error) -> Self {
        IoError::Io(e)
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads a Matrix Market coordinate file (real or integer entries, general
/// or symmetric). Indices are 1-based on disk.
pub fn read_matrix_market(path: &Path) -> Result<SparseMatrix, IoError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (first_no, first) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?;
    let banner = first.to_lowercase();
    if !banner.starts_with("%%matrixmarket") {
        return Err(parse_err(path, first_no + 1, "missing MatrixMarket banner"));
    }
    if !banner.contains("coordinate") {
        return Err(parse_err(
            path,
            first_no + 1,
            "only coordinate format is supported",
        ));
    }
    let symmetric = banner.contains("symmetric");

    let mut dims: Option<(usize, usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for (no, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match dims {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(path, no + 1, "expected 'nrows ncols nnz'"));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| parse_err(path, no + 1, format!("bad integer '{s}'")))
                };
                dims = Some((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
            }
            Some((nrows, ncols, _)) => {
                if fields.len() < 3 {
                    return Err(parse_err(path, no + 1, "expected 'row col value'"));
                }
                let r: usize = fields[0]
                    .parse()
                    .map_err(|_| parse_err(path, no + 1, "bad row index"))?;
                let c: usize = fields[1]
                    .parse()
                    .map_err(|_| parse_err(path, no + 1, "bad column index"))?;
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(path, no + 1, "bad value"))?;
                if r == 0 || c == 0 || r > nrows || c > ncols {
                    return Err(parse_err(path, no + 1, "index out of range (1-based)"));
                }
                triplets.push((r - 1, c - 1, v));
                if symmetric && r != c {
                    triplets.push((c - 1, r - 1, v));
                }
            }
        }
    }
    let (nrows, ncols, _) = dims.ok_or_else(|| parse_err(path, 2, "missing dimension line"))?;
    SparseMatrix::from_triplets(&triplets, nrows, ncols)
        .map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn write_matrix_market(path: &Path, m: &SparseMatrix) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    out.push_str(&format!("{} {} {}\n", m.nrows(), m.ncols(), m.nnz()));
    for (r, c, v) in m.triplets() {
        out.push_str(&format!("{} {} {:.17e}\n", r + 1, c + 1, v));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a single-column CSV vector; a non-numeric first line is treated as
/// the header.
pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>, IoError> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim().trim_end_matches(',');
        if line.is_empty() {
            continue;
        }
        match line.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if no == 0 => continue, // header
            Err(_) => return Err(parse_err(path, no + 1, format!("bad number '{line}'"))),
        }
    }
    Ok(values)
}

pub fn write_vector_csv(path: &Path, header: &str, values: &[f64]) -> Result<(), IoError> {
    let mut out = String::with_capacity(16 * values.len());
    out.push_str(header);
    out.push('\n');
    for v in values {
        out.push_str(&format!("{v:.17e}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads an edge list: `src,dst` per line, 0-based; a non-numeric first line
/// is treated as the header.
pub fn read_edges_csv(path: &Path) -> Result<Vec<(usize, usize)>, IoError> {
    let text = fs::read_to_string(path)?;
    let mut edges = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(parse_err(path, no + 1, "expected 'src,dst'"));
        }
        match (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
            (Ok(s), Ok(t)) => edges.push((s, t)),
            _ if no == 0 => continue, // header
            _ => return Err(parse_err(path, no + 1, format!("bad edge '{line}'"))),
        }
    }
    Ok(edges)
}

pub fn write_edges_csv(path: &Path, edges: &[(usize, usize)]) -> Result<(), IoError> {
    let mut out = String::from("src,dst\n");
    for (s, t) in edges {
        out.push_str(&format!("{s},{t}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Header of the per-iteration trace CSV; stable schema consumed by plotting
/// tools and the golden-file tests.
pub const TRACE_HEADER: &str =
    "iter,cost,residual,step,n_active,n_signchange,n_frozen,qp_iters,lin_residual,wall_ms";

pub fn write_trace_csv(path: &Path, report: &SolveReport) -> Result<(), IoError> {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &report.trace {
        out.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e},{},{},{},{},{:.17e},{:.3}\n",
            r.iter,
            r.cost,
            r.residual,
            r.step,
            r.n_active,
            r.n_signchange,
            r.n_frozen,
            r.qp_iters,
            r.lin_residual,
            r.wall_ms
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_report_json(path: &Path, report: &SolveReport) -> Result<(), IoError> {
    let mut f = fs::File::create(path)?;
    let json = serde_json::to_string_pretty(report).expect("report serialization");
    f.write_all(json.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}
