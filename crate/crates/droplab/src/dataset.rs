//! Tab-separated dataset directories.
//!
//! ```text
//! graph.tsv     n=<count>, then one "u<TAB>v" line per undirected edge
//! features.tsv  n lines of c tab-separated numbers        (optional)
//! labels.tsv    n lines, class index or -1 for unknown    (optional)
//! splits.tsv    n lines, train|val|test|none              (optional)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Indices are 0-based.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use droplab_core::graph::Split;
use droplab_core::{Graph, Tensor};

pub const GRAPH_FILE: &str = "graph.tsv";
pub const FEATURES_FILE: &str = "features.tsv";
pub const LABELS_FILE: &str = "labels.tsv";
pub const SPLITS_FILE: &str = "splits.tsv";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Malformed { path: PathBuf, line: usize, message: String },
    #[error("{}: expected {expected} rows (one per node), found {found}", path.display())]
    RowCount { path: PathBuf, expected: usize, found: usize },
    #[error("{}: {source}", path.display())]
    Graph { path: PathBuf, source: droplab_core::Error },
}

type Result<T> = std::result::Result<T, DatasetError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| DatasetError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Non-comment lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
}

struct Reader<'a> {
    path: &'a Path,
}

impl Reader<'_> {
    fn malformed<T>(&self, line: usize, message: impl Into<String>) -> Result<T> {
        Err(DatasetError::Malformed {
            path: self.path.to_owned(),
            line,
            message: message.into(),
        })
    }

    fn per_node<'t>(&self, text: &'t str, n: usize) -> Result<Vec<(usize, &'t str)>> {
        let rows: Vec<_> = data_lines(text).collect();
        if rows.len() != n {
            return Err(DatasetError::RowCount {
                path: self.path.to_owned(),
                expected: n,
                found: rows.len(),
            });
        }
        Ok(rows)
    }
}

fn parse_graph(path: &Path, text: &str) -> Result<Graph> {
    let r = Reader { path };
    let mut lines = data_lines(text);
    let Some((line, header)) = lines.next() else {
        return r.malformed(1, "missing 'n=<count>' header");
    };
    let n: usize = match header.trim().strip_prefix("n=").map(str::parse) {
        Some(Ok(n)) => n,
        _ => return r.malformed(line, format!("expected 'n=<count>' header, found '{header}'")),
    };
    let mut edges = Vec::new();
    let mut seen = HashSet::new();
    for (line, text) in lines {
        let fields: Vec<&str> = text.split('\t').map(str::trim).collect();
        let [u, v] = fields[..] else {
            return r.malformed(line, format!("expected two tab-separated node indices, found '{text}'"));
        };
        let parse = |s: &str| s.parse::<usize>().ok().filter(|&x| x < n);
        let (Some(u), Some(v)) = (parse(u), parse(v)) else {
            return r.malformed(line, format!("node indices must be integers below n={n}, found '{text}'"));
        };
        if u == v {
            return r.malformed(line, format!("self-loop {u}-{u}"));
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return r.malformed(line, format!("duplicate edge {u}-{v}"));
        }
        edges.push((u, v));
    }
    Graph::from_undirected_edges(n, &edges).map_err(|source| DatasetError::Graph {
        path: path.to_owned(),
        source,
    })
}

fn parse_features(path: &Path, text: &str, n: usize) -> Result<Tensor> {
    let r = Reader { path };
    let rows = r.per_node(text, n)?;
    let mut cols = None;
    let mut data = Vec::new();
    for (line, row) in rows {
        let values: Vec<f64> = match row.split('\t').map(|s| s.trim().parse::<f64>()).collect() {
            Ok(v) => v,
            Err(e) => return r.malformed(line, format!("bad number: {e}")),
        };
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return r.malformed(line, format!("non-finite feature {bad}"));
        }
        match cols {
            None => cols = Some(values.len()),
            Some(c) if c != values.len() => {
                return r.malformed(line, format!("expected {c} columns, found {}", values.len()))
            }
            Some(_) => {}
        }
        data.extend(values);
    }
    Tensor::new(n, cols.unwrap_or(0), data).map_err(|source| DatasetError::Graph {
        path: path.to_owned(),
        source,
    })
}

fn parse_labels(path: &Path, text: &str, n: usize) -> Result<Vec<Option<usize>>> {
    let r = Reader { path };
    r.per_node(text, n)?
        .into_iter()
        .map(|(line, row)| match row.trim().parse::<i64>() {
            Ok(-1) => Ok(None),
            Ok(c) if c >= 0 => Ok(Some(c as usize)),
            _ => r.malformed(line, format!("expected a class index or -1, found '{row}'")),
        })
        .collect()
}

fn parse_splits(path: &Path, text: &str, n: usize) -> Result<Vec<Split>> {
    let r = Reader { path };
    r.per_node(text, n)?
        .into_iter()
        .map(|(line, row)| match row.trim().parse::<Split>() {
            Ok(s) => Ok(s),
            Err(_) => r.malformed(line, format!("expected train|val|test|none, found '{row}'")),
        })
        .collect()
}

pub fn load_dataset(dir: &Path) -> Result<Graph> {
    let path = dir.join(GRAPH_FILE);
    let mut g = parse_graph(&path, &read(&path)?)?;
    let n = g.num_nodes();
    let attach = |path: PathBuf, g: droplab_core::Result<Graph>| {
        g.map_err(|source| DatasetError::Graph { path, source })
    };
    let path = dir.join(FEATURES_FILE);
    if path.exists() {
        let x = parse_features(&path, &read(&path)?, n)?;
        g = attach(path, g.with_features(x))?;
    }
    let path = dir.join(LABELS_FILE);
    if path.exists() {
        let labels = parse_labels(&path, &read(&path)?, n)?;
        g = attach(path, g.with_labels(labels))?;
    }
    let path = dir.join(SPLITS_FILE);
    if path.exists() {
        let split = parse_splits(&path, &read(&path)?, n)?;
        g = attach(path, g.with_split(split))?;
    }
    Ok(g)
}

/// Writes `g` in canonical form: edges as sorted `u < v` pairs, optional
/// files only when they carry information.
pub fn save_dataset(g: &Graph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| DatasetError::Io {
        path: dir.to_owned(),
        source,
    })?;
    if g.has_self_loops() {
        return Err(DatasetError::Graph {
            path: dir.join(GRAPH_FILE),
            source: droplab_core::Error::SelfLoopsPresent,
        });
    }
    let mut out = format!("n={}\n", g.num_nodes());
    for (u, v) in g.undirected_edges() {
        writeln!(out, "{u}\t{v}").unwrap();
    }
    write(&dir.join(GRAPH_FILE), &out)?;

    if let Some(x) = g.features() {
        let mut out = String::new();
        for i in 0..x.rows() {
            let row: Vec<String> = x.row(i).iter().map(f64::to_string).collect();
            writeln!(out, "{}", row.join("\t")).unwrap();
        }
        write(&dir.join(FEATURES_FILE), &out)?;
    }
    if g.labels().iter().any(Option::is_some) {
        let mut out = String::new();
        for l in g.labels() {
            match l {
                Some(c) => writeln!(out, "{c}").unwrap(),
                None => out.push_str("-1\n"),
            }
        }
        write(&dir.join(LABELS_FILE), &out)?;
    }
    if g.split().iter().any(|&s| s != Split::None) {
        let mut out = String::new();
        for s in g.split() {
            writeln!(out, "{}", s.as_str()).unwrap();
        }
        write(&dir.join(SPLITS_FILE), &out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_files(files: &[(&str, &str)]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (name, body) in files {
            fs::write(dir.path().join(name), body).unwrap();
        }
        dir
    }

    #[test]
    fn single_edge() {
        let dir = write_files(&[(GRAPH_FILE, "# toy\nn=2\n0\t1\n")]);
        let g = load_dataset(dir.path()).unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.undirected_edges(), vec![(0, 1)]);
        assert!(g.features().is_none());
    }

    #[test]
    fn errors_name_file_and_line() {
        let dir = write_files(&[(GRAPH_FILE, "n=3\n0\t1\n# c\n1\t0\n")]);
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(matches!(err, DatasetError::Malformed { line: 4, .. }), "{err}");
        assert!(err.to_string().contains("graph.tsv:4"));

        let dir = write_files(&[(GRAPH_FILE, "n=3\n0\t3\n")]);
        assert!(matches!(load_dataset(dir.path()), Err(DatasetError::Malformed { line: 2, .. })));

        let dir = write_files(&[(GRAPH_FILE, "0\t1\n")]);
        assert!(matches!(load_dataset(dir.path()), Err(DatasetError::Malformed { line: 1, .. })));

        let dir = write_files(&[(GRAPH_FILE, "n=2\n0\t1\n"), (LABELS_FILE, "0\n")]);
        assert!(matches!(
            load_dataset(dir.path()),
            Err(DatasetError::RowCount { expected: 2, found: 1, .. })
        ));

        let dir = write_files(&[(GRAPH_FILE, "n=2\n"), (FEATURES_FILE, "1\t2\n3\n")]);
        assert!(matches!(load_dataset(dir.path()), Err(DatasetError::Malformed { line: 2, .. })));

        let dir = write_files(&[(GRAPH_FILE, "n=1\n"), (SPLITS_FILE, "holdout\n")]);
        assert!(matches!(load_dataset(dir.path()), Err(DatasetError::Malformed { line: 1, .. })));

        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(DatasetError::Io { .. })));
    }

    #[test]
    fn all_files_load() {
        let dir = write_files(&[
            (GRAPH_FILE, "n=3\n2\t0\n1\t2\n"),
            (FEATURES_FILE, "0.5\t1\n-2\t0\n# skipped\n1e-3\t4\n"),
            (LABELS_FILE, "1\n-1\n0\n"),
            (SPLITS_FILE, "train\nnone\ntest\n"),
        ]);
        let g = load_dataset(dir.path()).unwrap();
        assert_eq!(g.undirected_edges(), vec![(0, 2), (1, 2)]);
        assert_eq!(g.features().unwrap().row(2), &[1e-3, 4.0]);
        assert_eq!(g.labels(), &[Some(1), None, Some(0)]);
        assert_eq!(g.split(), &[Split::Train, Split::None, Split::Test]);
    }
}
