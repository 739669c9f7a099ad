//! Readers and writers for graphs, feature matrices and fit results.
//!
//! Graphs are tab-separated edge lists of 0-based vertex pairs with an
//! optional `n=<count>` header (bare or after `#`), or dense 0/1 CSV
//! adjacency matrices when the file ends in `.csv`. Features are CSV with
//! one row per vertex and an optional header row.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use cohsmix::inference::FitResult;
use cohsmix::{FeatureMatrix, Graph, ModelParams, Partition};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GraphRead {
    pub graph: Graph,
    /// Self-loops present in the file and dropped.
    pub self_loops_dropped: usize,
}

pub fn read_graph(path: &Path) -> Result<GraphRead> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_dense_graph(path)
    } else {
        read_edge_list(path)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| HarnessError::io(path, e))
}

fn parse_header(line: &str) -> Option<&str> {
    let body = line.strip_prefix('#').unwrap_or(line).trim();
    body.strip_prefix("n=")
        .or_else(|| body.strip_prefix("n ="))
        .map(str::trim)
}

fn read_edge_list(path: &Path) -> Result<GraphRead> {
    let mut declared: Option<usize> = None;
    let mut edges = Vec::new();
    let mut self_loops = 0;
    let mut max_index: Option<usize> = None;
    for (k, line) in open(path)?.lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(value) = parse_header(line) {
            if declared.is_some() || !edges.is_empty() || self_loops > 0 {
                return Err(HarnessError::parse(path, line_no, "vertex-count header must come first"));
            }
            let n = value
                .parse()
                .map_err(|_| HarnessError::parse(path, line_no, format!("bad vertex count {value:?}")))?;
            declared = Some(n);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [a, b] = fields[..] else {
            return Err(HarnessError::parse(
                path,
                line_no,
                format!("expected two vertex indices, found {} fields", fields.len()),
            ));
        };
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| HarnessError::parse(path, line_no, format!("bad vertex index {s:?}")))
        };
        let (i, j) = (parse(a)?, parse(b)?);
        if let Some(n) = declared {
            if i >= n || j >= n {
                return Err(HarnessError::parse(
                    path,
                    line_no,
                    format!("vertex index {} out of range for n={n}", i.max(j)),
                ));
            }
        }
        max_index = max_index.max(Some(i.max(j)));
        if i == j {
            self_loops += 1;
        } else {
            edges.push((i, j));
        }
    }
    let n = declared.unwrap_or_else(|| max_index.map_or(0, |m| m + 1));
    Ok(GraphRead {
        graph: Graph::from_edges(n, edges)?,
        self_loops_dropped: self_loops,
    })
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|source| HarnessError::Csv {
            path: path.to_path_buf(),
            source,
        })
}

fn record_line(record: &csv::StringRecord, fallback: usize) -> usize {
    record.position().map_or(fallback, |p| p.line() as usize)
}

fn read_dense_graph(path: &Path) -> Result<GraphRead> {
    let mut rows: Vec<Vec<u8>> = Vec::new();
    for (k, record) in csv_reader(path)?.records().enumerate() {
        let record = record.map_err(|source| HarnessError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let line = record_line(&record, k + 1);
        let row = record
            .iter()
            .map(|cell| match cell {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(HarnessError::parse(path, line, format!("cell {other:?} is not 0 or 1"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if let Some((k, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(HarnessError::parse(
            path,
            k + 1,
            format!("row has {} cells, expected {n} for a square matrix", row.len()),
        ));
    }
    let mut edges = Vec::new();
    let mut self_loops = 0;
    for i in 0..n {
        if rows[i][i] == 1 {
            self_loops += 1;
        }
        for j in (i + 1)..n {
            if rows[i][j] == 1 || rows[j][i] == 1 {
                edges.push((i, j));
            }
        }
    }
    Ok(GraphRead {
        graph: Graph::from_edges(n, edges)?,
        self_loops_dropped: self_loops,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(path, e))
}

/// Writes an edge list with an `n=` header; `.csv` paths get a dense matrix.
pub fn write_graph(path: &Path, graph: &Graph) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| HarnessError::io(path, e);
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        for row in graph.to_dense().rows() {
            let cells: Vec<String> = row.iter().map(u8::to_string).collect();
            writeln!(out, "{}", cells.join(",")).map_err(io)?;
        }
    } else {
        writeln!(out, "# n={}", graph.n()).map_err(io)?;
        for (i, j) in graph.edges() {
            writeln!(out, "{i}\t{j}").map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// Reads a numeric CSV matrix; a first row with any non-numeric cell is
/// taken as a header and skipped.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (k, record) in csv_reader(path)?.records().enumerate() {
        let record = record.map_err(|source| HarnessError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let line = record_line(&record, k + 1);
        let parsed: Vec<Option<f64>> = record.iter().map(|c| c.parse::<f64>().ok()).collect();
        if k == 0 && parsed.iter().any(Option::is_none) {
            continue;
        }
        let mut row = Vec::with_capacity(parsed.len());
        for (cell, value) in record.iter().zip(parsed) {
            match value {
                Some(v) if v.is_finite() => row.push(v),
                Some(_) => {
                    return Err(HarnessError::parse(path, line, format!("non-finite value {cell:?}")))
                }
                None => {
                    return Err(HarnessError::parse(path, line, format!("non-numeric cell {cell:?}")))
                }
            }
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(HarnessError::parse(
                    path,
                    line,
                    format!("ragged row: {} cells, expected {w}", row.len()),
                ))
            }
            Some(_) => {}
        }
        rows.push(row);
    }
    let p = width.unwrap_or(0);
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), p), flat)
        .map_err(|e| HarnessError::Mismatch(format!("{}: {e}", path.display())))
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    Ok(FeatureMatrix::new(read_matrix(path)?)?)
}

fn write_matrix(path: &Path, header: &[String], values: &Array2<f64>) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| HarnessError::io(path, e);
    if !header.is_empty() {
        writeln!(out, "{}", header.join(",")).map_err(io)?;
    }
    for row in values.rows() {
        // `{}` on f64 prints the shortest string that parses back exactly
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", cells.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_features(path: &Path, features: &FeatureMatrix) -> Result<()> {
    let header: Vec<String> = (0..features.p()).map(|k| format!("y{k}")).collect();
    write_matrix(path, &header, features.values())
}

/// Reads a graph and optional features and checks that they agree on `n`.
pub fn load_data(graph: &Path, features: Option<&Path>) -> Result<(GraphRead, FeatureMatrix)> {
    let read = read_graph(graph)?;
    let features = match features {
        Some(path) => read_features(path)?,
        None => FeatureMatrix::empty(read.graph.n()),
    };
    if features.n() != read.graph.n() {
        return Err(HarnessError::Mismatch(format!(
            "graph has {} vertices but features have {} rows",
            read.graph.n(),
            features.n()
        )));
    }
    Ok((read, features))
}

pub fn write_partition(path: &Path, partition: &Partition) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| HarnessError::io(path, e);
    writeln!(out, "vertex,label").map_err(io)?;
    for (i, label) in partition.labels().iter().enumerate() {
        writeln!(out, "{i},{label}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_partition(path: &Path) -> Result<Partition> {
    let matrix = read_matrix(path)?;
    if matrix.ncols() != 2 {
        return Err(HarnessError::Mismatch(format!(
            "{}: expected vertex,label columns",
            path.display()
        )));
    }
    let mut labels = vec![0usize; matrix.nrows()];
    for (k, row) in matrix.rows().into_iter().enumerate() {
        let (vertex, label) = (row[0], row[1]);
        let valid = |v: f64| v >= 0.0 && v.fract() == 0.0;
        if !valid(vertex) || !valid(label) || vertex as usize >= labels.len() {
            return Err(HarnessError::parse(path, k + 2, "invalid vertex or label"));
        }
        labels[vertex as usize] = label as usize;
    }
    Ok(Partition::new(labels))
}

/// Serialized form of a fit; field order is the key order in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    #[serde(rename = "Q")]
    pub q: usize,
    pub alpha: Vec<f64>,
    pub pi: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub sigma2: f64,
    pub j_trace: Vec<f64>,
    pub icl: Option<f64>,
    pub lower_bound: f64,
    pub converged: bool,
}

impl ParamsFile {
    pub fn from_fit(fit: &FitResult) -> Self {
        let p = &fit.params;
        ParamsFile {
            q: p.q(),
            alpha: p.alpha().to_vec(),
            pi: p.pi().rows().into_iter().map(|r| r.to_vec()).collect(),
            mu: p.mu().rows().into_iter().map(|r| r.to_vec()).collect(),
            sigma2: p.sigma2(),
            j_trace: fit.j_trace.clone(),
            icl: fit.icl,
            lower_bound: fit.lower_bound,
            converged: fit.converged,
        }
    }

    pub fn to_params(&self) -> Result<ModelParams> {
        let q = self.q;
        let p = self.mu.first().map_or(0, Vec::len);
        let shape_err = |what: &str| HarnessError::Mismatch(format!("params file: {what} has wrong shape"));
        let pi = Array2::from_shape_vec((q, q), self.pi.concat()).map_err(|_| shape_err("pi"))?;
        let mu = Array2::from_shape_vec((q, p), self.mu.concat()).map_err(|_| shape_err("mu"))?;
        Ok(ModelParams::new(self.alpha.clone(), pi, mu, self.sigma2)?)
    }
}

pub fn read_params(path: &Path) -> Result<ParamsFile> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultPaths {
    pub partition: PathBuf,
    pub tau: PathBuf,
    pub params: PathBuf,
    pub summary: PathBuf,
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

/// Writes `partition.csv`, `tau.csv`, `params.json` and `summary.txt`.
pub fn write_result(fit: &FitResult, dir: &Path) -> Result<ResultPaths> {
    ensure_dir(dir)?;
    let paths = ResultPaths {
        partition: dir.join("partition.csv"),
        tau: dir.join("tau.csv"),
        params: dir.join("params.json"),
        summary: dir.join("summary.txt"),
    };
    write_partition(&paths.partition, &fit.partition)?;
    let header: Vec<String> = (0..fit.q()).map(|c| format!("class_{c}")).collect();
    write_matrix(&paths.tau, &header, fit.tau.values())?;
    write_json(&paths.params, &ParamsFile::from_fit(fit))?;
    fs::write(&paths.summary, summary(fit)).map_err(|e| HarnessError::io(&paths.summary, e))?;
    Ok(paths)
}

pub fn summary(fit: &FitResult) -> String {
    let n = fit.partition.len();
    let mut text = format!(
        "classes: {}\nvertices: {}\nfeatures: {}\nlower bound: {}\nicl: {}\nconverged: {} after {} EM iterations\nrestart: {}\n",
        fit.q(),
        n,
        fit.params.p(),
        fit.lower_bound,
        fit.icl.map_or_else(|| "n/a".to_string(), |v| v.to_string()),
        fit.converged,
        fit.j_trace.len(),
        fit.restart,
    );
    text.push_str("class sizes:\n");
    for (c, size) in fit.partition.class_sizes(fit.q()).iter().enumerate() {
        text.push_str(&format!("  {c}: {size}\n"));
    }
    text
}
