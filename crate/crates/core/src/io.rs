//! Plain-text file formats.
//!
//! * edges: `u<TAB>v[<TAB>w]`, one undirected edge per line, weight 1 if omitted
//! * attributes: `node<TAB>attr<TAB>value`
//! * delta: first line `#delta`, then an `#edges` section of `u<TAB>v<TAB>dw`
//!   and an `#attributes` section of `node<TAB>attr<TAB>dx`
//! * labels: `node<TAB>class`
//! * embedding: `node<TAB>v1<TAB>...<TAB>vl`
//!
//! Blank lines and other lines starting with `#` are ignored. Node, attribute
//! and class ids are zero-based.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Delta, Snapshot};
use crate::pipeline::{EmbeddingRun, RunConfig};
use crate::sparse::CsrMatrix;
use crate::synth::{SbmSpec, SyntheticStream};

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Non-comment lines with their 1-based line numbers, split on whitespace.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            None
        } else {
            Some((i + 1, line.split_whitespace().collect()))
        }
    })
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(path, line, format!("bad {what} `{tok}`")))
}

fn finite(path: &Path, line: usize, tok: &str) -> Result<f64> {
    let v: f64 = field(path, line, tok, "value")?;
    if !v.is_finite() {
        return Err(Error::parse(path, line, format!("non-finite value `{tok}`")));
    }
    Ok(v)
}

fn arity(path: &Path, line: usize, toks: &[&str], allowed: &[usize]) -> Result<()> {
    if !allowed.contains(&toks.len()) {
        return Err(Error::parse(
            path,
            line,
            format!("expected {allowed:?} fields, found {}", toks.len()),
        ));
    }
    Ok(())
}

#[derive(Clone, Debug, Default)]
pub struct EdgeList {
    /// `(u, v, w)` with `u < v`.
    pub edges: Vec<(usize, usize, f64)>,
}

impl EdgeList {
    pub fn max_node(&self) -> Option<usize> {
        self.edges.iter().map(|e| e.1).max()
    }
}

pub fn read_edges(path: &Path) -> Result<EdgeList> {
    let text = read(path)?;
    let mut seen: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut edges = Vec::new();
    for (line, toks) in records(&text) {
        arity(path, line, &toks, &[2, 3])?;
        let u: usize = field(path, line, toks[0], "node id")?;
        let v: usize = field(path, line, toks[1], "node id")?;
        let w = match toks.get(2) {
            Some(t) => finite(path, line, t)?,
            None => 1.0,
        };
        if u == v {
            return Err(Error::parse(path, line, format!("self-loop on node {u}")));
        }
        if w < 0.0 {
            return Err(Error::parse(path, line, format!("negative weight {w}")));
        }
        let key = (u.min(v), u.max(v));
        if let Some(first) = seen.insert(key, line) {
            return Err(Error::parse(
                path,
                line,
                format!("edge {}-{} already listed on line {first}", key.0, key.1),
            ));
        }
        edges.push((key.0, key.1, w));
    }
    Ok(EdgeList { edges })
}

#[derive(Clone, Debug, Default)]
pub struct AttributeList {
    pub entries: Vec<(usize, usize, f64)>,
}

impl AttributeList {
    pub fn max_node(&self) -> Option<usize> {
        self.entries.iter().map(|e| e.0).max()
    }

    pub fn max_attr(&self) -> Option<usize> {
        self.entries.iter().map(|e| e.1).max()
    }
}

pub fn read_attributes(path: &Path) -> Result<AttributeList> {
    let text = read(path)?;
    let mut seen: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut entries = Vec::new();
    for (line, toks) in records(&text) {
        arity(path, line, &toks, &[3])?;
        let i: usize = field(path, line, toks[0], "node id")?;
        let j: usize = field(path, line, toks[1], "attribute id")?;
        let v = finite(path, line, toks[2])?;
        if v < 0.0 {
            return Err(Error::parse(path, line, format!("negative attribute value {v}")));
        }
        if let Some(first) = seen.insert((i, j), line) {
            return Err(Error::parse(
                path,
                line,
                format!("entry ({i}, {j}) already listed on line {first}"),
            ));
        }
        entries.push((i, j, v));
    }
    Ok(AttributeList { entries })
}

/// Builds a snapshot from parsed files. `n` and `d` default to one past the
/// largest id seen; explicit values must cover every id.
pub fn snapshot_from(edges: &EdgeList, attrs: &AttributeList, n: Option<usize>, d: Option<usize>) -> Result<Snapshot> {
    let seen_n = edges
        .max_node()
        .into_iter()
        .chain(attrs.max_node())
        .max()
        .map_or(0, |m| m + 1);
    let seen_d = attrs.max_attr().map_or(0, |m| m + 1);
    let n = n.unwrap_or(seen_n);
    let d = d.unwrap_or(seen_d);
    if n < seen_n || d < seen_d {
        return Err(Error::InvalidInput(format!(
            "files reference {seen_n} nodes and {seen_d} attributes, more than the {n} x {d} requested"
        )));
    }
    let adjacency = CsrMatrix::symmetric_from_triplets(n, edges.edges.iter().copied())?;
    let attributes = CsrMatrix::from_triplets(n, d, attrs.entries.iter().copied())?;
    Snapshot::new(adjacency, attributes)
}

pub fn read_snapshot(edges: &Path, attrs: &Path, n: Option<usize>, d: Option<usize>) -> Result<Snapshot> {
    snapshot_from(&read_edges(edges)?, &read_attributes(attrs)?, n, d)
}

/// Parses a delta for a snapshot of `n` nodes and `d` attributes.
pub fn read_delta(path: &Path, n: usize, d: usize) -> Result<Delta> {
    let text = read(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim() == "#delta" => {}
        _ => return Err(Error::parse(path, 1, "missing `#delta` header")),
    }
    #[derive(PartialEq)]
    enum Section {
        None,
        Edges,
        Attributes,
    }
    let mut section = Section::None;
    let mut da: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut dx: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, raw) in lines {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() {
            continue;
        }
        if t.starts_with('#') {
            match t {
                "#edges" => section = Section::Edges,
                "#attributes" => section = Section::Attributes,
                _ => {}
            }
            continue;
        }
        let toks: Vec<&str> = t.split_whitespace().collect();
        arity(path, line, &toks, &[3])?;
        let a: usize = field(path, line, toks[0], "id")?;
        let b: usize = field(path, line, toks[1], "id")?;
        let v = finite(path, line, toks[2])?;
        match section {
            Section::None => return Err(Error::parse(path, line, "entry outside an `#edges` or `#attributes` section")),
            Section::Edges => {
                if a >= n || b >= n {
                    return Err(Error::parse(path, line, format!("node id out of range for {n} nodes")));
                }
                if a == b {
                    return Err(Error::parse(path, line, format!("self-loop on node {a}")));
                }
                if da.insert((a.min(b), a.max(b)), v).is_some() {
                    return Err(Error::parse(path, line, "edge listed twice"));
                }
            }
            Section::Attributes => {
                if a >= n || b >= d {
                    return Err(Error::parse(path, line, format!("entry out of range for {n} x {d} attributes")));
                }
                if dx.insert((a, b), v).is_some() {
                    return Err(Error::parse(path, line, "attribute entry listed twice"));
                }
            }
        }
    }
    Delta::new(
        CsrMatrix::symmetric_from_triplets(n, da.into_iter().map(|((a, b), v)| (a, b, v)))?,
        CsrMatrix::from_triplets(n, d, dx.into_iter().map(|((a, b), v)| (a, b, v)))?,
    )
}

pub fn read_labels(path: &Path, n: Option<usize>) -> Result<Vec<usize>> {
    let text = read(path)?;
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    for (line, toks) in records(&text) {
        arity(path, line, &toks, &[2])?;
        let node: usize = field(path, line, toks[0], "node id")?;
        let class: usize = field(path, line, toks[1], "class")?;
        if map.insert(node, class).is_some() {
            return Err(Error::parse(path, line, format!("node {node} labelled twice")));
        }
    }
    let n = n.unwrap_or_else(|| map.keys().next_back().map_or(0, |m| m + 1));
    if map.len() != n || map.keys().next_back().is_some_and(|&m| m >= n) {
        return Err(Error::InvalidInput(format!(
            "{}: expected one label for each of {n} nodes, found {}",
            path.display(),
            map.len()
        )));
    }
    Ok(map.into_values().collect())
}

pub fn read_embedding(path: &Path) -> Result<DMatrix<f64>> {
    let text = read(path)?;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (line, toks) in records(&text) {
        if toks.len() < 2 {
            return Err(Error::parse(path, line, "expected a node id and at least one value"));
        }
        let node: usize = field(path, line, toks[0], "node id")?;
        let vals = toks[1..]
            .iter()
            .map(|t| finite(path, line, t))
            .collect::<Result<Vec<f64>>>()?;
        if let Some((_, first)) = rows.first() {
            if first.len() != vals.len() {
                return Err(Error::parse(path, line, "row width differs from the first row"));
            }
        }
        if node != rows.len() {
            return Err(Error::parse(path, line, format!("expected node {}, found {node}", rows.len())));
        }
        rows.push((node, vals));
    }
    if rows.is_empty() {
        return Err(Error::Empty("embedding file"));
    }
    let l = rows[0].1.len();
    Ok(DMatrix::from_fn(rows.len(), l, |i, j| rows[i].1[j]))
}

pub fn embedding_tsv(y: &DMatrix<f64>) -> String {
    let mut s = String::new();
    for i in 0..y.nrows() {
        write!(s, "{i}").unwrap();
        for j in 0..y.ncols() {
            write!(s, "\t{}", y[(i, j)]).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn edges_tsv(m: &CsrMatrix) -> String {
    let mut s = String::new();
    for (i, j, v) in m.iter().filter(|e| e.0 < e.1) {
        writeln!(s, "{i}\t{j}\t{v}").unwrap();
    }
    s
}

pub fn attributes_tsv(m: &CsrMatrix) -> String {
    let mut s = String::new();
    for (i, j, v) in m.iter() {
        writeln!(s, "{i}\t{j}\t{v}").unwrap();
    }
    s
}

pub fn delta_tsv(delta: &Delta) -> String {
    let mut s = String::from("#delta\n#edges\n");
    s.push_str(&edges_tsv(delta.adjacency()));
    s.push_str("#attributes\n");
    s.push_str(&attributes_tsv(delta.attributes()));
    s
}

pub fn labels_tsv(labels: &[usize]) -> String {
    let mut s = String::new();
    for (i, l) in labels.iter().enumerate() {
        writeln!(s, "{i}\t{l}").unwrap();
    }
    s
}

/// Sidecar written next to an embedding file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub step: usize,
    pub gammas: Vec<f64>,
    pub ridge: f64,
    pub config: RunConfig,
}

impl EmbeddingMeta {
    pub fn of(run: &EmbeddingRun) -> Self {
        EmbeddingMeta {
            n: run.n(),
            k: run.config.k,
            l: run.config.l,
            step: run.step,
            gammas: run.projection.gammas.clone(),
            ridge: run.projection.ridge,
            config: run.config.clone(),
        }
    }
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Index of a synthetic dataset directory; paths are relative to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub nodes: usize,
    pub attributes: usize,
    pub edges_file: PathBuf,
    pub attributes_file: PathBuf,
    pub labels_file: PathBuf,
    pub deltas: Vec<PathBuf>,
    pub spec: Option<SbmSpec>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Manifest> {
        Ok(serde_json::from_str(&read(path)?).map_err(|e| Error::parse(path, e.line(), e.to_string()))?)
    }

    /// Delta paths resolved against the manifest's directory.
    pub fn delta_paths(&self, manifest_path: &Path) -> Vec<PathBuf> {
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        self.deltas.iter().map(|p| base.join(p)).collect()
    }
}

/// Writes a stream as edges, attributes, labels, one file per delta and a
/// manifest.
pub fn write_stream(dir: &Path, stream: &SyntheticStream, spec: Option<&SbmSpec>) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let s = &stream.initial;
    write_text(&dir.join("edges.tsv"), &edges_tsv(s.adjacency()))?;
    write_text(&dir.join("attributes.tsv"), &attributes_tsv(s.attributes()))?;
    write_text(&dir.join("labels.tsv"), &labels_tsv(&stream.labels))?;
    let width = stream.deltas.len().to_string().len().max(3);
    let mut deltas = Vec::with_capacity(stream.deltas.len());
    for (t, d) in stream.deltas.iter().enumerate() {
        let name = PathBuf::from(format!("delta_{:0width$}.tsv", t + 1));
        write_text(&dir.join(&name), &delta_tsv(d))?;
        deltas.push(name);
    }
    let manifest = Manifest {
        nodes: s.n(),
        attributes: s.d(),
        edges_file: "edges.tsv".into(),
        attributes_file: "attributes.tsv".into(),
        labels_file: "labels.tsv".into(),
        deltas,
        spec: spec.cloned(),
    };
    write_text(&dir.join("manifest.json"), &to_json_pretty(&manifest)?)?;
    Ok(manifest)
}

/// One metrics record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub task: String,
    pub metric: String,
    pub value: f64,
    pub dim: usize,
    pub step: usize,
}

pub fn metrics_csv(rows: &[MetricRow]) -> String {
    let mut s = String::from("task,metric,value,dim,step\n");
    for r in rows {
        writeln!(s, "{},{},{},{},{}", r.task, r.metric, r.value, r.dim, r.step).unwrap();
    }
    s
}
