//! Text formats: LIBSVM datasets, CSV regression data, iteration traces and
//! flat `key=value` problem files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::info;
use nalgebra::{DMatrix, DVector};

use crate::apps::LabeledDataset;
use crate::error::{Error, Result};
use crate::ialm::IterationRecord;
use crate::problem::{CopProblem, SmoothObjective};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

struct SparseRows {
    labels: Vec<(usize, String)>,
    rows: Vec<Vec<(usize, f64)>>,
    max_index: usize,
}

fn parse_sparse(text: &str) -> Result<SparseRows> {
    let mut out = SparseRows {
        labels: Vec::new(),
        rows: Vec::new(),
        max_index: 0,
    };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label = tokens.next().expect("nonempty line");
        let mut row = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(line_no, format!("expected index:value, got '{tok}'")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad feature index '{idx}'")))?;
            if idx == 0 {
                return Err(parse_err(line_no, "feature indices are 1-based"));
            }
            let val: f64 = val
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad feature value '{val}'")))?;
            out.max_index = out.max_index.max(idx);
            row.push((idx - 1, val));
        }
        out.labels.push((line_no, label.to_string()));
        out.rows.push(row);
    }
    if out.rows.is_empty() {
        return Err(parse_err(0, "empty dataset"));
    }
    Ok(out)
}

fn densify(rows: &[Vec<(usize, f64)>], cols: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(rows.len(), cols);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            x[(i, j)] = v;
        }
    }
    x
}

fn feature_count(max_index: usize, requested: Option<usize>) -> Result<usize> {
    match requested {
        Some(k) if k < max_index => Err(Error::InvalidInput(format!(
            "data uses feature {max_index} but only {k} features were requested"
        ))),
        Some(k) => Ok(k),
        None => Ok(max_index),
    }
}

/// Binary LIBSVM data: `label idx:val ...` with 1-based indices. Labels must
/// be `+-1`, or `0/1` which are mapped to `-1/+1`.
pub fn parse_libsvm(text: &str, num_features: Option<usize>) -> Result<LabeledDataset> {
    let sparse = parse_sparse(text)?;
    let mut y = Vec::with_capacity(sparse.labels.len());
    for (line, label) in &sparse.labels {
        let v: f64 = label
            .parse()
            .map_err(|_| parse_err(*line, format!("bad label '{label}'")))?;
        y.push((v, *line));
    }
    let zero_one = y.iter().all(|&(v, _)| v == 0.0 || v == 1.0) && y.iter().any(|&(v, _)| v == 0.0);
    if zero_one {
        info!("mapping 0/1 labels to -1/+1");
    }
    let y: Vec<f64> = y
        .into_iter()
        .map(|(v, line)| match v {
            _ if zero_one => Ok(if v == 0.0 { -1.0 } else { 1.0 }),
            _ if v == 1.0 || v == -1.0 => Ok(v),
            _ => Err(parse_err(line, format!("label {v} is not +1/-1"))),
        })
        .collect::<Result<_>>()?;
    let cols = feature_count(sparse.max_index, num_features)?;
    LabeledDataset::binary(densify(&sparse.rows, cols), DVector::from_vec(y))
}

/// Multi-label LIBSVM data: the label field is a comma-separated list of
/// 0-based relevant label ids (possibly empty). The label count defaults to
/// the largest id plus one.
pub fn parse_libsvm_multilabel(text: &str, num_labels: Option<usize>, num_features: Option<usize>) -> Result<LabeledDataset> {
    // An empty label list leaves the line starting with a feature token.
    let normalized: String = text
        .lines()
        .map(|l| {
            let first = l.split_whitespace().next().unwrap_or("");
            if first.contains(':') {
                format!("- {l}\n")
            } else {
                format!("{l}\n")
            }
        })
        .collect();
    let sparse = parse_sparse(&normalized)?;
    let mut sets = Vec::with_capacity(sparse.labels.len());
    let mut max_label = 0;
    for (line, field) in &sparse.labels {
        let mut set = Vec::new();
        if field != "-" {
            for tok in field.split(',').filter(|t| !t.is_empty()) {
                let id: usize = tok
                    .parse()
                    .map_err(|_| parse_err(*line, format!("bad label id '{tok}'")))?;
                max_label = max_label.max(id + 1);
                set.push(id);
            }
        }
        sets.push(set);
    }
    let m = match num_labels {
        Some(m) if m < max_label => {
            return Err(Error::InvalidInput(format!("label id {} exceeds label count {m}", max_label - 1)))
        }
        Some(m) => m,
        None => max_label,
    };
    if m == 0 {
        return Err(Error::InvalidInput("no labels found".into()));
    }
    let mut y = DMatrix::from_element(sets.len(), m, -1.0);
    for (i, set) in sets.iter().enumerate() {
        for &k in set {
            y[(i, k)] = 1.0;
        }
    }
    let cols = feature_count(sparse.max_index, num_features)?;
    LabeledDataset::multi_label(densify(&sparse.rows, cols), y)
}

pub fn read_libsvm(path: &Path) -> Result<LabeledDataset> {
    parse_libsvm(&fs::read_to_string(path)?, None)
}

pub fn read_libsvm_multilabel(path: &Path, num_labels: Option<usize>) -> Result<LabeledDataset> {
    parse_libsvm_multilabel(&fs::read_to_string(path)?, num_labels, None)
}

/// Comma-separated numeric rows; the last column is the response. A first
/// row containing any non-numeric cell is treated as a header.
pub fn parse_csv_regression(text: &str) -> Result<LabeledDataset> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = cells.iter().map(|c| c.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if rows.is_empty() && width.is_none() => {
                width = Some(cells.len());
                continue;
            }
            Err(_) => return Err(parse_err(line_no, "non-numeric cell")),
        };
        match width {
            Some(w) if w != values.len() => {
                return Err(parse_err(line_no, format!("expected {w} columns, found {}", values.len())))
            }
            _ => width = Some(values.len()),
        }
        rows.push(values);
    }
    let width = width.unwrap_or(0);
    if rows.is_empty() {
        return Err(parse_err(0, "no data rows"));
    }
    if width < 2 {
        return Err(parse_err(1, "need at least one feature column and a response column"));
    }
    let x = DMatrix::from_fn(rows.len(), width - 1, |i, j| rows[i][j]);
    let y = DVector::from_fn(rows.len(), |i, _| rows[i][width - 1]);
    LabeledDataset::regression(x, y)
}

pub fn read_csv_regression(path: &Path) -> Result<LabeledDataset> {
    parse_csv_regression(&fs::read_to_string(path)?)
}

pub const TRACE_HEADER: &str =
    "k,lyapunov_beta,merit,step_w,step_u,step_z,feas,p_residual_max,epsilon_k,inner_iterations,zero_one_loss,f_value";

/// CSV text of a trace; reals carry 17 significant digits.
pub fn format_trace(trace: &[IterationRecord]) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{:.16e}",
            r.k,
            r.lyapunov_beta,
            r.merit,
            r.step_w,
            r.step_u,
            r.step_z,
            r.feas,
            r.p_residual_max,
            r.epsilon_k,
            r.inner_iterations,
            r.zero_one_loss,
            r.f_value
        )
        .expect("writing to a String");
    }
    out
}

pub fn write_trace(trace: &[IterationRecord], path: &Path) -> Result<()> {
    fs::write(path, format_trace(trace))?;
    Ok(())
}

pub fn parse_trace(text: &str) -> Result<Vec<IterationRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        _ => return Err(parse_err(1, "missing or unexpected trace header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != 12 {
            return Err(parse_err(line_no, format!("expected 12 fields, found {}", cells.len())));
        }
        let real = |j: usize| -> Result<f64> {
            cells[j]
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad number '{}'", cells[j])))
        };
        let int = |j: usize| -> Result<usize> {
            cells[j]
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad integer '{}'", cells[j])))
        };
        out.push(IterationRecord {
            k: int(0)?,
            lyapunov_beta: real(1)?,
            merit: real(2)?,
            step_w: real(3)?,
            step_u: real(4)?,
            step_z: real(5)?,
            feas: real(6)?,
            p_residual_max: real(7)?,
            epsilon_k: real(8)?,
            inner_iterations: int(9)?,
            zero_one_loss: int(10)?,
            f_value: real(11)?,
        });
    }
    Ok(out)
}

pub fn read_trace(path: &Path) -> Result<Vec<IterationRecord>> {
    parse_trace(&fs::read_to_string(path)?)
}

fn parse_vector(line: usize, s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("bad number '{}'", t.trim())))
        })
        .collect()
}

fn parse_matrix(line: usize, s: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = s.split(';').map(|r| parse_vector(line, r)).collect::<Result<_>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(parse_err(line, "matrix rows have different lengths"));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Parses a quadratic problem file:
///
/// ```text
/// # comments and blank lines are ignored
/// H=2,0;0,2        rows separated by ';'
/// c=0,-1           optional, defaults to zeros
/// d=0              optional
/// A=1,1
/// b=-1
/// lambda=10
/// ```
pub fn parse_problem(text: &str) -> Result<CopProblem> {
    let (mut h, mut c, mut d, mut a, mut b, mut lambda) = (None, None, 0.0, None, None, None);
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, "expected key=value"))?;
        let scalar = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| parse_err(line_no, format!("bad number '{}'", v.trim())))
        };
        match key.trim() {
            "H" => h = Some(parse_matrix(line_no, value)?),
            "c" => c = Some(DVector::from_vec(parse_vector(line_no, value)?)),
            "d" => d = scalar(value)?,
            "A" => a = Some(parse_matrix(line_no, value)?),
            "b" => b = Some(DVector::from_vec(parse_vector(line_no, value)?)),
            "lambda" => lambda = Some(scalar(value)?),
            other => return Err(parse_err(line_no, format!("unknown key '{other}'"))),
        }
    }
    let missing = |k: &str| Error::InvalidInput(format!("problem file is missing '{k}'"));
    let h = h.ok_or_else(|| missing("H"))?;
    let a = a.ok_or_else(|| missing("A"))?;
    let b = b.ok_or_else(|| missing("b"))?;
    let lambda = lambda.ok_or_else(|| missing("lambda"))?;
    let c = c.unwrap_or_else(|| DVector::zeros(h.nrows()));
    CopProblem::new(SmoothObjective::quadratic(h, c, d)?, a, b, lambda)
}

pub fn read_problem(path: &Path) -> Result<CopProblem> {
    parse_problem(&fs::read_to_string(path)?)
}

fn format_row<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    values.map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",")
}

fn format_matrix(m: &DMatrix<f64>) -> String {
    m.row_iter()
        .map(|r| format_row(r.iter()))
        .collect::<Vec<_>>()
        .join(";")
}

/// Inverse of [`parse_problem`]; fails for non-quadratic objectives.
pub fn format_problem(problem: &CopProblem) -> Result<String> {
    let q = problem
        .objective()
        .quadratic_form()
        .ok_or_else(|| Error::UnsupportedVariant("only quadratic objectives can be written".into()))?;
    Ok(format!(
        "H={}\nc={}\nd={:.16e}\nA={}\nb={}\nlambda={:.16e}\n",
        format_matrix(&q.h),
        format_row(q.c.iter()),
        q.d,
        format_matrix(problem.a()),
        format_row(problem.b().iter()),
        problem.lambda()
    ))
}

pub fn write_problem(problem: &CopProblem, path: &Path) -> Result<()> {
    fs::write(path, format_problem(problem)?)?;
    Ok(())
}

/// Writes a binary dataset in LIBSVM format (zero features omitted).
pub fn format_libsvm(x: &DMatrix<f64>, y: &DVector<f64>) -> String {
    let mut out = String::new();
    for (i, row) in x.row_iter().enumerate() {
        out.push_str(if y[i] > 0.0 { "+1" } else { "-1" });
        for (j, v) in row.iter().enumerate() {
            if *v != 0.0 {
                write!(out, " {}:{:.16e}", j + 1, v).expect("writing to a String");
            }
        }
        out.push('\n');
    }
    out
}
