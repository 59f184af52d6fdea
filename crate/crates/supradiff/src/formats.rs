//! On-disk formats. Node, layer and topic indices are 1-based in every file.
//! Matrices and states are written with 17 significant digits so that a
//! write/read round trip reproduces every `f64` exactly.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use supradiff_core::dynamics::{StateMatrix, Trajectory};
use supradiff_core::evalharness::{ErrorRow, ExperimentReport};
use supradiff_core::kalman::FilterStep;
use supradiff_core::laplearn::{LambdaEstimate, StructureMode};
use supradiff_core::multinet::{InterCoupling, LayerSpec, MultilayerNetwork, NodeLayout};
use supradiff_core::nalgebra::DMatrix;

use crate::error::{CliError, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Strict JSON parsing; errors name the path of the offending value.
pub fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::validation(format!("{what}: at `{path}`: {}", e.inner()))
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    parse_json(&read_text(path)?, &path.display().to_string())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

// ---------------------------------------------------------------- network

/// `[i, j, w]`.
pub type Edge = (usize, usize, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub layers: Vec<LayerEntry>,
    #[serde(default)]
    pub couplings: Vec<CouplingEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerEntry {
    pub id: usize,
    pub n: usize,
    #[serde(default)]
    pub edges: Vec<Edge>,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingEntry {
    pub from: usize,
    pub to: usize,
    #[serde(default)]
    pub edges: Vec<Edge>,
    pub d: f64,
}

fn check_weight(w: f64, at: &str) -> Result<()> {
    if !w.is_finite() || w < 0.0 {
        return Err(CliError::validation(format!(
            "at `{at}`: weight {w} must be finite and non-negative"
        )));
    }
    Ok(())
}

impl NetworkFile {
    pub fn to_network(&self) -> Result<MultilayerNetwork> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (k, layer) in self.layers.iter().enumerate() {
            let n = layer.n;
            if n == 0 {
                return Err(CliError::validation(format!(
                    "at `layers[{k}].n`: layer needs at least one node"
                )));
            }
            let mut adj = DMatrix::zeros(n, n);
            for (e, &(i, j, w)) in layer.edges.iter().enumerate() {
                let at = format!("layers[{k}].edges[{e}]");
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(CliError::validation(format!(
                        "at `{at}`: edge [{i}, {j}] out of range 1..={n}"
                    )));
                }
                if i == j {
                    return Err(CliError::validation(format!("at `{at}`: self-loop at node {i}")));
                }
                if adj[(i - 1, j - 1)] != 0.0 {
                    return Err(CliError::validation(format!("at `{at}`: duplicate edge [{i}, {j}]")));
                }
                check_weight(w, &at)?;
                adj[(i - 1, j - 1)] = w;
                adj[(j - 1, i - 1)] = w;
            }
            let spec = LayerSpec::new(layer.id, adj, layer.d)
                .map_err(|e| CliError::from(e).context(format_args!("at `layers[{k}]`")))?;
            layers.push(spec);
        }

        let size_of = |id: usize| self.layers.iter().find(|l| l.id == id).map(|l| l.n);
        let mut couplings = Vec::with_capacity(self.couplings.len());
        for (k, c) in self.couplings.iter().enumerate() {
            let (Some(na), Some(nb)) = (size_of(c.from), size_of(c.to)) else {
                return Err(CliError::validation(format!(
                    "at `couplings[{k}]`: layers {} and {} must both exist",
                    c.from, c.to
                )));
            };
            let mut w = DMatrix::zeros(na, nb);
            for (e, &(i, j, v)) in c.edges.iter().enumerate() {
                let at = format!("couplings[{k}].edges[{e}]");
                if i == 0 || j == 0 || i > na || j > nb {
                    return Err(CliError::validation(format!(
                        "at `{at}`: edge [{i}, {j}] out of range 1..={na} x 1..={nb}"
                    )));
                }
                if w[(i - 1, j - 1)] != 0.0 {
                    return Err(CliError::validation(format!("at `{at}`: duplicate edge [{i}, {j}]")));
                }
                check_weight(v, &at)?;
                w[(i - 1, j - 1)] = v;
            }
            let coupling = InterCoupling::new(c.from, c.to, w, c.d)
                .map_err(|e| CliError::from(e).context(format_args!("at `couplings[{k}]`")))?;
            couplings.push(coupling);
        }
        Ok(MultilayerNetwork::new(layers, couplings)?)
    }

    pub fn from_network(net: &MultilayerNetwork) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| LayerEntry {
                id: l.id(),
                n: l.node_count(),
                edges: l.edges().into_iter().map(|(i, j, w)| (i + 1, j + 1, w)).collect(),
                d: l.diffusion(),
            })
            .collect();
        let couplings = net
            .couplings()
            .iter()
            .map(|c| CouplingEntry {
                from: c.from_layer(),
                to: c.to_layer(),
                edges: c.edges().into_iter().map(|(i, j, w)| (i + 1, j + 1, w)).collect(),
                d: c.diffusion(),
            })
            .collect();
        NetworkFile { layers, couplings }
    }
}

pub fn read_network(path: &Path) -> Result<MultilayerNetwork> {
    let file: NetworkFile = read_json(path)?;
    file.to_network().map_err(|e| e.context(path.display()))
}

pub fn write_network(path: &Path, net: &MultilayerNetwork) -> Result<()> {
    write_text(path, &to_json(&NetworkFile::from_network(net)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub index: usize,
    pub layer: usize,
    pub node: usize,
}

/// Global index ↔ (layer, node) for every row of the supra-Laplacian.
pub fn index_map(layout: &NodeLayout) -> Vec<IndexEntry> {
    (0..layout.total())
        .map(|g| {
            let label = layout.node_label(g).expect("index in range");
            IndexEntry {
                index: g + 1,
                layer: label.layer,
                node: label.node,
            }
        })
        .collect()
}

// ----------------------------------------------------------------- states

pub fn states_to_csv(traj: &Trajectory) -> String {
    let (nodes, topics) = traj.shape();
    let mut out = String::from("t,node");
    for k in 1..=topics {
        let _ = write!(out, ",topic_{k}");
    }
    out.push('\n');
    for (t, x) in traj.timestamps().iter().zip(traj.states()) {
        for i in 0..nodes {
            let _ = write!(out, "{t},{}", i + 1);
            for k in 0..topics {
                let _ = write!(out, ",{}", num(x.values()[(i, k)]));
            }
            out.push('\n');
        }
    }
    out
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.kind() {
        csv::ErrorKind::Io(_) => {
            let csv::ErrorKind::Io(io) = e.into_kind() else {
                unreachable!()
            };
            CliError::io(path, io)
        }
        _ => CliError::validation(format!("{}: {e}", path.display())),
    }
}

fn parse_f64(field: &str, path: &Path, line: u64, column: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        CliError::validation(format!(
            "{}: line {line}: column `{column}`: `{field}` is not a number",
            path.display()
        ))
    })
}

pub fn parse_states(text: &str, path: &Path) -> Result<Trajectory> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let topics = headers.len().saturating_sub(2);
    let expected: Vec<String> = ["t".to_string(), "node".to_string()]
        .into_iter()
        .chain((1..=topics).map(|k| format!("topic_{k}")))
        .collect();
    if topics == 0 || headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(CliError::validation(format!(
            "{}: header must be `t,node,topic_1,...,topic_T`, found `{}`",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut timestamps: Vec<f64> = Vec::new();
    let mut blocks: Vec<Vec<Vec<f64>>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let t = parse_f64(&record[0], path, line, "t")?;
        let node: usize = record[1].trim().parse().map_err(|_| {
            CliError::validation(format!(
                "{}: line {line}: node `{}` is not a positive integer",
                path.display(),
                &record[1]
            ))
        })?;
        if timestamps.last() != Some(&t) {
            timestamps.push(t);
            blocks.push(Vec::new());
        }
        let block = blocks.last_mut().expect("block pushed");
        if node != block.len() + 1 {
            return Err(CliError::validation(format!(
                "{}: line {line}: expected node {} at t = {t}, found {node}",
                path.display(),
                block.len() + 1
            )));
        }
        let row = (0..topics)
            .map(|k| parse_f64(&record[k + 2], path, line, &expected[k + 2]))
            .collect::<Result<Vec<f64>>>()?;
        block.push(row);
    }
    if blocks.is_empty() {
        return Err(CliError::validation(format!("{}: no states", path.display())));
    }
    let nodes = blocks[0].len();
    let mut states = Vec::with_capacity(blocks.len());
    for (block, t) in blocks.iter().zip(&timestamps) {
        if block.len() != nodes {
            return Err(CliError::validation(format!(
                "{}: t = {t} has {} nodes, the first timestamp has {nodes}",
                path.display(),
                block.len()
            )));
        }
        states.push(StateMatrix::new(DMatrix::from_fn(nodes, topics, |i, k| block[i][k]))?);
    }
    Trajectory::new(timestamps, states).map_err(|e| CliError::from(e).context(path.display()))
}

pub fn read_states(path: &Path) -> Result<Trajectory> {
    parse_states(&read_text(path)?, path)
}

pub fn write_states(path: &Path, traj: &Trajectory) -> Result<()> {
    write_text(path, &states_to_csv(traj))
}

// --------------------------------------------------------------- matrices

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| num(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .enumerate()
            .map(|(j, f)| parse_f64(f, path, line, &(j + 1).to_string()))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err(CliError::validation(format!("{}: empty matrix", path.display())));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&read_text(path)?, path)
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_text(path, &matrix_to_csv(m))
}

// ----------------------------------------------------------------- lambda

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaMeta {
    pub n: usize,
    pub t_dim: usize,
    pub structure_mode: StructureMode,
    pub sweeps: usize,
    pub final_residual: f64,
}

/// `lambda.csv` → `lambda.json`.
pub fn sidecar_path(matrix_path: &Path) -> PathBuf {
    matrix_path.with_extension("json")
}

pub fn write_lambda(path: &Path, lambda: &LambdaEstimate, meta: &LambdaMeta) -> Result<()> {
    write_matrix(path, lambda.matrix())?;
    write_text(&sidecar_path(path), &to_json(meta))
}

pub fn read_lambda(path: &Path) -> Result<(LambdaEstimate, LambdaMeta)> {
    let meta: LambdaMeta = read_json(&sidecar_path(path))?;
    let matrix = read_matrix(path)?;
    let lambda = LambdaEstimate::new(matrix, meta.n, meta.t_dim, meta.structure_mode)
        .map_err(|e| CliError::from(e).context(path.display()))?;
    Ok((lambda, meta))
}

// ------------------------------------------------------------ filter/mask

/// 1-based node indices.
pub fn mask_to_json(observed: &[usize]) -> String {
    to_json(&observed.iter().map(|i| i + 1).collect::<Vec<_>>())
}

/// Returns 0-based node indices.
pub fn read_mask(path: &Path, nodes: usize) -> Result<Vec<usize>> {
    let raw: Vec<usize> = read_json(path)?;
    let mut seen = HashSet::new();
    raw.iter()
        .enumerate()
        .map(|(k, &i)| {
            if i == 0 || i > nodes {
                Err(CliError::validation(format!(
                    "{}: at `[{k}]`: node {i} out of range 1..={nodes}",
                    path.display()
                )))
            } else if !seen.insert(i) {
                Err(CliError::validation(format!(
                    "{}: at `[{k}]`: node {i} repeated",
                    path.display()
                )))
            } else {
                Ok(i - 1)
            }
        })
        .collect()
}

pub fn filter_to_csv(times: &[f64], steps: &[FilterStep], nodes: usize, topics: usize) -> String {
    let mut out = String::from("t,node,topic,xhat_post,xhat_pred_next\n");
    for (t, s) in times.iter().zip(steps) {
        for i in 0..nodes {
            for k in 0..topics {
                let c = k * nodes + i;
                let _ = writeln!(
                    out,
                    "{t},{},{},{},{}",
                    i + 1,
                    k + 1,
                    num(s.x_post[c]),
                    num(s.x_pred_next[c])
                );
            }
        }
    }
    out
}

// ------------------------------------------------------------- evaluation

pub fn errors_to_csv(rows: &[ErrorRow]) -> String {
    let mut out = String::from("predictor,step,error_all,error_unobserved\n");
    for r in rows {
        let unobs = r.error_unobserved.map(num).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{unobs}", r.predictor.name(), r.step, num(r.error_all));
    }
    out
}

/// Per-step errors averaged over replications that share predictors and
/// test length.
pub fn average_rows(reports: &[ExperimentReport]) -> Vec<ErrorRow> {
    let count = reports.len() as f64;
    let mut rows = reports[0].rows.clone();
    for (idx, row) in rows.iter_mut().enumerate() {
        row.error_all = reports.iter().map(|r| r.rows[idx].error_all).sum::<f64>() / count;
        row.error_unobserved = reports
            .iter()
            .map(|r| r.rows[idx].error_unobserved)
            .sum::<Option<f64>>()
            .map(|s| s / count);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("test.csv")
    }

    #[test]
    fn states_round_trip() {
        let x0 = StateMatrix::new(DMatrix::from_row_slice(2, 2, &[0.1, 0.9, 1.0 / 3.0, -2e-300])).unwrap();
        let x1 = StateMatrix::new(DMatrix::from_row_slice(2, 2, &[1e10, 0.0, -0.5, 7.0])).unwrap();
        let traj = Trajectory::new(vec![0.0, 0.5], vec![x0, x1]).unwrap();
        let text = states_to_csv(&traj);
        assert!(text.starts_with("t,node,topic_1,topic_2\n0,1,"));
        let back = parse_states(&text, p()).unwrap();
        assert_eq!(back.states(), traj.states());
        assert_eq!(back.timestamps(), traj.timestamps());
        assert_eq!(states_to_csv(&back), text);
    }

    #[test]
    fn states_errors_name_the_line() {
        let err = parse_states("t,node,topic_1\n0,1,0.5\n0,3,0.5\n", p()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = parse_states("t,node,topic_1\n0,1,abc\n", p()).unwrap_err();
        assert!(err.to_string().contains("topic_1"), "{err}");
        assert!(parse_states("t,nodes,topic_1\n", p()).is_err());
        assert!(parse_states("t,node,topic_1\n1,1,0\n0,1,0\n", p()).is_err());
    }

    #[test]
    fn matrix_round_trip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -0.1, 3.0e-17, f64::MAX, 0.0, 2.0 / 3.0]);
        assert_eq!(parse_matrix(&matrix_to_csv(&m), p()).unwrap(), m);
        assert!(parse_matrix("1,2\n3\n", p()).is_err());
    }

    #[test]
    fn network_json_paths() {
        let bad: Result<NetworkFile> = parse_json(r#"{"layers": [{"id": 1, "n": 2, "d": 1, "colour": 3}]}"#, "net");
        let msg = bad.unwrap_err().to_string();
        assert!(msg.contains("colour") && msg.contains("layers[0]"), "{msg}");

        let file: NetworkFile = parse_json(
            r#"{"layers": [{"id": 1, "n": 2, "edges": [[1, 3, 1.0]], "d": 1}]}"#,
            "net",
        )
        .unwrap();
        let msg = file.to_network().unwrap_err().to_string();
        assert!(msg.contains("layers[0].edges[0]"), "{msg}");

        let file: NetworkFile = parse_json(r#"{"layers": []}"#, "net").unwrap();
        assert!(file
            .to_network()
            .unwrap_err()
            .to_string()
            .contains("at least one layer required"));
    }

    #[test]
    fn network_round_trip() {
        let text = r#"{"layers": [{"id": 1, "n": 2, "edges": [[1, 2, 1.0]], "d": 1.0},
                                  {"id": 2, "n": 2, "d": 1.0}],
                       "couplings": [{"from": 1, "to": 2, "edges": [[1, 1, 1.0], [2, 2, 1.0]], "d": 1.0}]}"#;
        let file: NetworkFile = parse_json(text, "net").unwrap();
        let net = file.to_network().unwrap();
        assert_eq!(NetworkFile::from_network(&net), file);
    }
}
