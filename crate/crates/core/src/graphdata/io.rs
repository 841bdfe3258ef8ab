//! Line-delimited JSON dataset files, one graph per line:
//! `{"n": 4, "edges": [[0, 1], [1, 2]], "x": [[...], ...], "y": 3}`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Graph};
use crate::error::{Error, Result};
use crate::numcore::Dense2D;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphRecord {
    n: usize,
    edges: Vec<[usize; 2]>,
    x: Vec<Vec<f64>>,
    y: usize,
}

impl GraphRecord {
    fn from_graph(g: &Graph) -> Self {
        let x = (0..g.num_nodes()).map(|r| g.features().row(r).to_vec()).collect();
        Self {
            n: g.num_nodes(),
            edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
            x,
            y: g.label(),
        }
    }

    fn into_graph(self) -> Result<Graph> {
        if self.x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite feature value".into()));
        }
        let features = Dense2D::from_rows(&self.x)?;
        Graph::new(self.n, self.edges.into_iter().map(|[u, v]| (u, v)).collect(), features, self.y)
    }
}

pub fn write_dataset<W: Write>(d: &Dataset, mut out: W) -> Result<()> {
    for g in d.graphs() {
        let line = serde_json::to_string(&GraphRecord::from_graph(g)).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_dataset(d, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Parses dataset text. Blank lines are skipped. When `num_classes` is
/// `None` it is inferred as the largest label plus one.
pub fn parse_dataset(text: &str, num_classes: Option<usize>) -> Result<Dataset> {
    let mut graphs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GraphRecord = serde_json::from_str(line)
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        let g = rec
            .into_graph()
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
        graphs.push(g);
    }
    if graphs.is_empty() {
        return Err(Error::Parse { line: 0, message: "no graphs in input".into() });
    }
    let classes = num_classes.unwrap_or_else(|| graphs.iter().map(Graph::label).max().unwrap_or(0) + 1);
    Dataset::new(graphs, classes).map_err(|e| Error::Parse { line: 0, message: e.to_string() })
}

pub fn load_dataset(path: &Path, num_classes: Option<usize>) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_dataset(&text, num_classes)
}
