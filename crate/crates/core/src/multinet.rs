//! Multilayer networks and their supra-Laplacian.
//!
//! A network is an ordered list of layers, each with a symmetric weighted
//! adjacency and an intra-layer diffusion constant `D^(α)`, plus inter-layer
//! couplings `W^(α,β)` with constants `D^(α,β)`. Nodes are indexed
//! layer-major: every node of layer 1, then layer 2, and so on.
//!
//! The assembled operator is
//!
//! ```text
//! L = ⊕_α D^(α) (K^(α) − W^(α))
//!   + Σ_(α,β) [ e_(α,α) ⊗ D^(α,β) K^(α,β)  −  e_(α,β) ⊗ D^(α,β) W^(α,β) ]
//! ```
//!
//! built block by block, so layers may have different sizes.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// One layer: adjacency over its `N_α` nodes plus its diffusion constant.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    id: usize,
    adjacency: DMatrix<f64>,
    diffusion: f64,
}

impl LayerSpec {
    /// `id` is the 1-based layer number α.
    pub fn new(id: usize, adjacency: DMatrix<f64>, diffusion: f64) -> Result<Self> {
        if id == 0 {
            return Err(Error::invalid("layer ids are 1-based"));
        }
        let n = adjacency.nrows();
        if n == 0 || adjacency.ncols() != n {
            return Err(Error::invalid(format!(
                "layer {id}: adjacency must be a non-empty square matrix, got {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        check_constant(diffusion, || format!("layer {id} diffusion constant"))?;
        for j in 0..n {
            for i in 0..n {
                let w = adjacency[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::invalid(format!(
                        "layer {id}: adjacency[{i}][{j}] = {w} must be finite and non-negative"
                    )));
                }
                if i == j && w != 0.0 {
                    return Err(Error::invalid(format!(
                        "layer {id}: self-loop at node {i} (adjacency[{i}][{i}] = {w})"
                    )));
                }
                if i > j && w != adjacency[(j, i)] {
                    return Err(Error::invalid(format!(
                        "layer {id}: adjacency not symmetric at [{i}][{j}] = {w} vs [{j}][{i}] = {}",
                        adjacency[(j, i)]
                    )));
                }
            }
        }
        Ok(Self {
            id,
            adjacency,
            diffusion,
        })
    }

    /// Build from undirected weighted edges with 0-based local indices.
    pub fn from_edges(id: usize, n: usize, edges: &[(usize, usize, f64)], diffusion: f64) -> Result<Self> {
        let mut adj = DMatrix::zeros(n, n);
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::invalid(format!(
                    "layer {id}: edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            if i == j {
                return Err(Error::invalid(format!("layer {id}: self-loop at node {i}")));
            }
            if adj[(i, j)] != 0.0 {
                return Err(Error::invalid(format!("layer {id}: duplicate edge ({i}, {j})")));
            }
            adj[(i, j)] = w;
            adj[(j, i)] = w;
        }
        Self::new(id, adj, diffusion)
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    /// Undirected edges `(i, j, w)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.node_count();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.adjacency[(i, j)];
                if w != 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }
}

/// Coupling from layer `from` to layer `to`, weights `N_from × N_to`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterCoupling {
    from: usize,
    to: usize,
    weights: DMatrix<f64>,
    diffusion: f64,
}

impl InterCoupling {
    pub fn new(from: usize, to: usize, weights: DMatrix<f64>, diffusion: f64) -> Result<Self> {
        if from == to {
            return Err(Error::invalid(format!(
                "coupling ({from},{to}) must join distinct layers"
            )));
        }
        if from == 0 || to == 0 {
            return Err(Error::invalid("layer ids are 1-based"));
        }
        check_constant(diffusion, || format!("coupling ({from},{to}) diffusion constant"))?;
        for i in 0..weights.nrows() {
            for j in 0..weights.ncols() {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::invalid(format!(
                        "coupling ({from},{to}): weight[{i}][{j}] = {w} must be finite and non-negative"
                    )));
                }
            }
        }
        Ok(Self {
            from,
            to,
            weights,
            diffusion,
        })
    }

    /// Build from `(i, j, w)` triples, `i` local to `from`, `j` local to `to`, 0-based.
    pub fn from_edges(
        from: usize,
        to: usize,
        shape: (usize, usize),
        edges: &[(usize, usize, f64)],
        diffusion: f64,
    ) -> Result<Self> {
        let mut w = DMatrix::zeros(shape.0, shape.1);
        for &(i, j, v) in edges {
            if i >= shape.0 || j >= shape.1 {
                return Err(Error::invalid(format!(
                    "coupling ({from},{to}): edge ({i}, {j}) out of range for {}x{}",
                    shape.0, shape.1
                )));
            }
            if w[(i, j)] != 0.0 {
                return Err(Error::invalid(format!(
                    "coupling ({from},{to}): duplicate edge ({i}, {j})"
                )));
            }
            w[(i, j)] = v;
        }
        Self::new(from, to, w, diffusion)
    }

    pub fn from_layer(&self) -> usize {
        self.from
    }

    pub fn to_layer(&self) -> usize {
        self.to
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    /// Non-zero entries `(i, j, w)`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.weights.nrows() {
            for j in 0..self.weights.ncols() {
                let w = self.weights[(i, j)];
                if w != 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }
}

fn check_constant(d: f64, what: impl FnOnce() -> alloc::string::String) -> Result<()> {
    if d.is_finite() && d >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{} = {d} must be finite and non-negative",
            what()
        )))
    }
}

/// A diffusion constant addressable by the fitting routines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiffusionParam {
    /// `D^(α)`.
    Layer(usize),
    /// `D^(α,β)` of a stored coupling. When only one direction is stored the
    /// implied transpose shares this constant.
    Coupling { from: usize, to: usize },
}

/// Layer-major mapping between `(layer, node)` labels and global indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

/// A node named by its 1-based layer id and 1-based position in the layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeLabel {
    pub layer: usize,
    pub node: usize,
}

impl NodeLayout {
    pub fn new(sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        Self { sizes, offsets }
    }

    pub fn total(&self) -> usize {
        self.offsets.last().map_or(0, |o| o + self.sizes[self.sizes.len() - 1])
    }

    pub fn layer_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Global rows occupied by layer `layer` (1-based).
    pub fn layer_range(&self, layer: usize) -> Result<core::ops::Range<usize>> {
        let k = self.layer_slot(layer)?;
        Ok(self.offsets[k]..self.offsets[k] + self.sizes[k])
    }

    /// Global 0-based index of node `node` (1-based) in layer `layer` (1-based).
    pub fn node_index(&self, layer: usize, node: usize) -> Result<usize> {
        let k = self.layer_slot(layer)?;
        if node == 0 || node > self.sizes[k] {
            return Err(Error::invalid(format!(
                "node {node} out of range for layer {layer} with {} nodes",
                self.sizes[k]
            )));
        }
        Ok(self.offsets[k] + node - 1)
    }

    /// Inverse of [`node_index`](Self::node_index).
    pub fn node_label(&self, global: usize) -> Result<NodeLabel> {
        if global >= self.total() {
            return Err(Error::invalid(format!(
                "global index {global} out of range for {} nodes",
                self.total()
            )));
        }
        let k = self.offsets.partition_point(|&o| o <= global) - 1;
        Ok(NodeLabel {
            layer: k + 1,
            node: global - self.offsets[k] + 1,
        })
    }

    fn layer_slot(&self, layer: usize) -> Result<usize> {
        if layer == 0 || layer > self.sizes.len() {
            return Err(Error::invalid(format!(
                "layer {layer} out of range 1..={}",
                self.sizes.len()
            )));
        }
        Ok(layer - 1)
    }
}

/// A coupling direction used during assembly; implied transposes are materialised.
#[derive(Debug, Clone)]
pub struct DirectedCoupling {
    pub from: usize,
    pub to: usize,
    pub weights: DMatrix<f64>,
    pub diffusion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultilayerNetwork {
    layers: Vec<LayerSpec>,
    couplings: Vec<InterCoupling>,
    layout: NodeLayout,
}

impl MultilayerNetwork {
    pub fn new(layers: Vec<LayerSpec>, couplings: Vec<InterCoupling>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("at least one layer required"));
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.id != k + 1 {
                return Err(Error::invalid(format!(
                    "layer ids must be 1..M in order without gaps; position {} has id {}",
                    k + 1,
                    layer.id
                )));
            }
        }
        let m = layers.len();
        for (k, c) in couplings.iter().enumerate() {
            if c.from > m || c.to > m {
                return Err(Error::invalid(format!(
                    "coupling ({},{}) references a missing layer (M = {m})",
                    c.from, c.to
                )));
            }
            let expected = (layers[c.from - 1].node_count(), layers[c.to - 1].node_count());
            if c.weights.shape() != expected {
                return Err(Error::DimensionMismatch {
                    context: "coupling weights",
                    expected,
                    found: c.weights.shape(),
                });
            }
            for other in &couplings[..k] {
                if other.from == c.from && other.to == c.to {
                    return Err(Error::invalid(format!("coupling ({},{}) given twice", c.from, c.to)));
                }
                if other.from == c.to && other.to == c.from && other.weights != c.weights.transpose() {
                    return Err(Error::invalid(format!(
                        "couplings ({},{}) and ({},{}) are not transposes of each other",
                        other.from, other.to, c.from, c.to
                    )));
                }
            }
        }
        let layout = NodeLayout::new(layers.iter().map(LayerSpec::node_count).collect());
        Ok(Self {
            layers,
            couplings,
            layout,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn layer(&self, id: usize) -> Option<&LayerSpec> {
        id.checked_sub(1).and_then(|k| self.layers.get(k))
    }

    pub fn couplings(&self) -> &[InterCoupling] {
        &self.couplings
    }

    pub fn layout(&self) -> &NodeLayout {
        &self.layout
    }

    pub fn total_nodes(&self) -> usize {
        self.layout.total()
    }

    /// Every coupling direction, with absent reverse directions filled in as
    /// the transpose carrying the same constant.
    pub fn directed_couplings(&self) -> Vec<DirectedCoupling> {
        let mut out = Vec::with_capacity(2 * self.couplings.len());
        for c in &self.couplings {
            out.push(DirectedCoupling {
                from: c.from,
                to: c.to,
                weights: c.weights.clone(),
                diffusion: c.diffusion,
            });
            let reverse_stored = self.couplings.iter().any(|o| o.from == c.to && o.to == c.from);
            if !reverse_stored {
                out.push(DirectedCoupling {
                    from: c.to,
                    to: c.from,
                    weights: c.weights.transpose(),
                    diffusion: c.diffusion,
                });
            }
        }
        out
    }

    pub fn diffusion(&self, param: DiffusionParam) -> Result<f64> {
        match param {
            DiffusionParam::Layer(id) => self
                .layer(id)
                .map(LayerSpec::diffusion)
                .ok_or_else(|| Error::invalid(format!("no layer {id}"))),
            DiffusionParam::Coupling { from, to } => self
                .couplings
                .iter()
                .find(|c| c.from == from && c.to == to)
                .map(InterCoupling::diffusion)
                .ok_or_else(|| Error::invalid(format!("no stored coupling ({from},{to})"))),
        }
    }

    pub fn set_diffusion(&mut self, param: DiffusionParam, value: f64) -> Result<()> {
        match param {
            DiffusionParam::Layer(id) => {
                check_constant(value, || format!("layer {id} diffusion constant"))?;
                let layer = id
                    .checked_sub(1)
                    .and_then(|k| self.layers.get_mut(k))
                    .ok_or_else(|| Error::invalid(format!("no layer {id}")))?;
                layer.diffusion = value;
            }
            DiffusionParam::Coupling { from, to } => {
                check_constant(value, || format!("coupling ({from},{to}) diffusion constant"))?;
                let c = self
                    .couplings
                    .iter_mut()
                    .find(|c| c.from == from && c.to == to)
                    .ok_or_else(|| Error::invalid(format!("no stored coupling ({from},{to})")))?;
                c.diffusion = value;
            }
        }
        Ok(())
    }

    /// Copy of the network with layer `id`'s adjacency replaced.
    pub fn with_layer_adjacency(&self, id: usize, adjacency: DMatrix<f64>) -> Result<Self> {
        let old = self.layer(id).ok_or_else(|| Error::invalid(format!("no layer {id}")))?;
        if adjacency.shape() != old.adjacency.shape() {
            return Err(Error::DimensionMismatch {
                context: "replacement adjacency",
                expected: old.adjacency.shape(),
                found: adjacency.shape(),
            });
        }
        let mut layers = self.layers.clone();
        layers[id - 1] = LayerSpec::new(id, adjacency, old.diffusion)?;
        Self::new(layers, self.couplings.clone())
    }
}

/// The assembled `N_total × N_total` operator with its node layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SupraLaplacian {
    matrix: DMatrix<f64>,
    layout: NodeLayout,
}

impl SupraLaplacian {
    /// Wrap an arbitrary square operator as a single-layer Laplacian-like matrix.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let n = linalg::ensure_square(&matrix, "supra-Laplacian")?;
        if n == 0 {
            return Err(Error::invalid("empty operator"));
        }
        linalg::ensure_finite(&matrix, "supra-Laplacian")?;
        Ok(Self {
            matrix,
            layout: NodeLayout::new(alloc::vec![n]),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn layout(&self) -> &NodeLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest absolute row sum; zero up to rounding for any assembled operator.
    pub fn max_row_sum(&self) -> f64 {
        self.matrix.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max)
    }

    /// Whether the flattened graph (any non-zero off-diagonal entry is an
    /// undirected edge) is connected.
    pub fn is_connected(&self) -> bool {
        let n = self.dim();
        let mut seen = alloc::vec![false; n];
        let mut stack = alloc::vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for (j, visited) in seen.iter_mut().enumerate() {
                if !*visited && i != j && (self.matrix[(i, j)] != 0.0 || self.matrix[(j, i)] != 0.0) {
                    *visited = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == n
    }
}

/// `D^(α)·(K − W)` for one layer, `K = diag(row sums of W)`.
pub fn build_intra_laplacian(layer: &LayerSpec) -> DMatrix<f64> {
    let w = &layer.adjacency;
    let n = w.nrows();
    let d = layer.diffusion;
    let mut l = -w * d;
    for i in 0..n {
        l[(i, i)] = d * w.row(i).sum();
    }
    l
}

/// Assemble the supra-Laplacian block by block.
///
/// Networks are validated on construction (dimensions, transpose pairing), so
/// assembly itself cannot fail.
pub fn assemble_supra(network: &MultilayerNetwork) -> SupraLaplacian {
    let layout = network.layout.clone();
    let n = layout.total();
    let mut l = DMatrix::zeros(n, n);

    for layer in &network.layers {
        let off = layout.offsets[layer.id - 1];
        let k = layer.node_count();
        l.view_mut((off, off), (k, k)).copy_from(&build_intra_laplacian(layer));
    }

    for c in network.directed_couplings() {
        let row_off = layout.offsets[c.from - 1];
        let col_off = layout.offsets[c.to - 1];
        let (nr, nc) = c.weights.shape();
        for i in 0..nr {
            l[(row_off + i, row_off + i)] += c.diffusion * c.weights.row(i).sum();
        }
        let mut block = l.view_mut((row_off, col_off), (nr, nc));
        block -= &c.weights * c.diffusion;
    }

    SupraLaplacian { matrix: l, layout }
}

/// Global index of `(layer, node)`, both 1-based.
pub fn node_index(network: &MultilayerNetwork, layer: usize, node: usize) -> Result<usize> {
    network.layout.node_index(layer, node)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn m(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    pub(crate) fn two_layer_example() -> MultilayerNetwork {
        let l1 = LayerSpec::from_edges(1, 2, &[(0, 1, 1.0)], 1.0).unwrap();
        let l2 = LayerSpec::from_edges(2, 2, &[], 1.0).unwrap();
        let c = InterCoupling::new(1, 2, DMatrix::identity(2, 2), 1.0).unwrap();
        MultilayerNetwork::new(vec![l1, l2], vec![c]).unwrap()
    }

    #[test]
    fn intra_single_edge() {
        let layer = LayerSpec::new(1, m(2, 2, &[0.0, 1.0, 1.0, 0.0]), 1.0).unwrap();
        assert_eq!(build_intra_laplacian(&layer), m(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn intra_empty_graph() {
        let layer = LayerSpec::new(1, DMatrix::zeros(3, 3), 2.5).unwrap();
        assert_eq!(build_intra_laplacian(&layer), DMatrix::zeros(3, 3));
    }

    #[test]
    fn intra_weighted_path() {
        let adj = m(3, 3, &[0.0, 2.0, 0.0, 2.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let layer = LayerSpec::new(1, adj, 0.5).unwrap();
        let expected = m(3, 3, &[2.0, -2.0, 0.0, -2.0, 3.0, -1.0, 0.0, -1.0, 1.0]) * 0.5;
        assert_eq!(build_intra_laplacian(&layer), expected);
    }

    #[test]
    fn layer_validation_names_entry() {
        let err = LayerSpec::new(1, m(2, 2, &[0.0, 1.0, 2.0, 0.0]), 1.0).unwrap_err();
        assert!(alloc::format!("{err}").contains("[1][0]"), "{err}");
        let err = LayerSpec::new(1, m(2, 2, &[0.0, -1.0, -1.0, 0.0]), 1.0).unwrap_err();
        assert!(alloc::format!("{err}").contains("adjacency[1][0]"), "{err}");
        assert!(LayerSpec::new(1, m(2, 2, &[1.0, 0.0, 0.0, 0.0]), 1.0).is_err());
        assert!(LayerSpec::new(1, DMatrix::zeros(2, 2), -1.0).is_err());
    }

    #[test]
    fn worked_two_layer_example() {
        let l = assemble_supra(&two_layer_example());
        let expected = m(
            4,
            4,
            &[
                2.0, -1.0, -1.0, 0.0, //
                -1.0, 2.0, 0.0, -1.0, //
                -1.0, 0.0, 1.0, 0.0, //
                0.0, -1.0, 0.0, 1.0,
            ],
        );
        assert_eq!(l.matrix(), &expected);
    }

    #[test]
    fn single_layer_is_scaled_laplacian() {
        let adj = m(3, 3, &[0.0, 2.0, 0.0, 2.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let layer = LayerSpec::new(1, adj, 0.7).unwrap();
        let net = MultilayerNetwork::new(vec![layer.clone()], vec![]).unwrap();
        assert_eq!(assemble_supra(&net).matrix(), &build_intra_laplacian(&layer));
    }

    #[test]
    fn heterogeneous_sizes_rows_sum_to_zero() {
        let l1 = LayerSpec::from_edges(1, 3, &[(0, 1, 1.0), (1, 2, 0.5)], 1.0).unwrap();
        let l2 = LayerSpec::from_edges(2, 2, &[(0, 1, 2.0)], 0.3).unwrap();
        let c = InterCoupling::from_edges(1, 2, (3, 2), &[(0, 0, 1.0), (2, 1, 0.25)], 0.8).unwrap();
        let net = MultilayerNetwork::new(vec![l1, l2], vec![c]).unwrap();
        let l = assemble_supra(&net);
        assert_eq!(l.dim(), 5);
        assert!(l.max_row_sum() < 1e-12);
        assert!(linalg::is_symmetric(l.matrix(), 1e-15));
        assert!(l.is_connected());
    }

    #[test]
    fn asymmetric_coupling_constants_keep_zero_row_sums() {
        let l1 = LayerSpec::from_edges(1, 2, &[(0, 1, 1.0)], 1.0).unwrap();
        let l2 = LayerSpec::from_edges(2, 2, &[(0, 1, 1.0)], 1.0).unwrap();
        let w = m(2, 2, &[1.0, 0.5, 0.0, 2.0]);
        let c12 = InterCoupling::new(1, 2, w.clone(), 0.5).unwrap();
        let c21 = InterCoupling::new(2, 1, w.transpose(), 2.0).unwrap();
        let net = MultilayerNetwork::new(vec![l1, l2], vec![c12, c21]).unwrap();
        let l = assemble_supra(&net);
        assert!(l.max_row_sum() < 1e-12);
        assert!(!linalg::is_symmetric(l.matrix(), 1e-12));
    }

    #[test]
    fn coupling_errors() {
        let l1 = LayerSpec::from_edges(1, 2, &[], 1.0).unwrap();
        let l2 = LayerSpec::from_edges(2, 3, &[], 1.0).unwrap();
        let bad_dims = InterCoupling::new(1, 2, DMatrix::identity(2, 2), 1.0).unwrap();
        assert!(matches!(
            MultilayerNetwork::new(vec![l1.clone(), l2.clone()], vec![bad_dims]),
            Err(Error::DimensionMismatch { .. })
        ));

        let w = m(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let c12 = InterCoupling::new(1, 2, w.clone(), 1.0).unwrap();
        let mut wt = w.transpose();
        wt[(2, 1)] = 3.0;
        let c21 = InterCoupling::new(2, 1, wt, 1.0).unwrap();
        let err = MultilayerNetwork::new(vec![l1.clone(), l2.clone()], vec![c12, c21]).unwrap_err();
        assert!(alloc::format!("{err}").contains("transpose"));

        let missing = InterCoupling::new(1, 3, DMatrix::zeros(2, 2), 1.0).unwrap();
        assert!(MultilayerNetwork::new(vec![l1, l2], vec![missing]).is_err());
        assert!(MultilayerNetwork::new(vec![], vec![]).is_err());
    }

    #[test]
    fn layer_ids_must_be_contiguous() {
        let l1 = LayerSpec::from_edges(1, 2, &[], 1.0).unwrap();
        let l3 = LayerSpec::from_edges(3, 2, &[], 1.0).unwrap();
        assert!(MultilayerNetwork::new(vec![l1, l3], vec![]).is_err());
    }

    #[test]
    fn node_index_layer_major() {
        let net = two_layer_example();
        assert_eq!(node_index(&net, 1, 1).unwrap(), 0);
        assert_eq!(node_index(&net, 2, 1).unwrap(), 2);
        assert_eq!(net.layout().node_label(3).unwrap(), NodeLabel { layer: 2, node: 2 });
        assert!(node_index(&net, 3, 1).is_err());
        assert!(node_index(&net, 1, 3).is_err());
        assert!(node_index(&net, 1, 0).is_err());
        assert!(net.layout().node_label(4).is_err());
        for g in 0..4 {
            let lab = net.layout().node_label(g).unwrap();
            assert_eq!(node_index(&net, lab.layer, lab.node).unwrap(), g);
        }
    }

    #[test]
    fn doubling_constants_doubles_operator() {
        let mut net = two_layer_example();
        let base = assemble_supra(&net).into_matrix();
        net.set_diffusion(DiffusionParam::Layer(1), 2.0).unwrap();
        net.set_diffusion(DiffusionParam::Layer(2), 2.0).unwrap();
        net.set_diffusion(DiffusionParam::Coupling { from: 1, to: 2 }, 2.0)
            .unwrap();
        assert_eq!(assemble_supra(&net).into_matrix(), base * 2.0);
    }

    #[test]
    fn disconnected_detection() {
        let l1 = LayerSpec::from_edges(1, 3, &[(0, 1, 1.0)], 1.0).unwrap();
        let net = MultilayerNetwork::new(vec![l1], vec![]).unwrap();
        assert!(!assemble_supra(&net).is_connected());
    }
}
