//! Graph modes and the switched coupling structure.
//!
//! Node indices are 0-based everywhere in this crate. Configuration files,
//! logs and CSV output use 1-based indices; the conversion happens at the
//! edges (config loading and output writers).

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Absolute slack allowed on generator row sums.
pub const GENERATOR_ROW_TOLERANCE: f64 = 1e-9;

/// One coupling configuration: a unit-weight undirected graph plus the set
/// of nodes that feed back toward the target trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphMode {
    pub laplacian: DMatrix<f64>,
    /// Sorted, 0-based.
    pub pinned: Vec<usize>,
}

impl GraphMode {
    pub fn from_edges(edges: &[(usize, usize)], nodes: usize, pinned: &[usize]) -> Result<Self> {
        let laplacian = laplacian_from_edges(edges, nodes)?;
        let mut pinned = pinned.to_vec();
        for &p in &pinned {
            if p >= nodes {
                return Err(Error::NodeOutOfRange {
                    index: p + 1,
                    nodes,
                });
            }
        }
        pinned.sort_unstable();
        pinned.dedup();
        Ok(Self { laplacian, pinned })
    }

    pub fn nodes(&self) -> usize {
        self.laplacian.nrows()
    }

    pub fn is_pinned(&self, node: usize) -> bool {
        self.pinned.binary_search(&node).is_ok()
    }

    /// `D_i` as 0/1.
    pub fn pin_indicator(&self, node: usize) -> f64 {
        if self.is_pinned(node) {
            1.0
        } else {
            0.0
        }
    }

    /// Diagonal pinning matrix `D`.
    pub fn pinning_matrix(&self) -> DMatrix<f64> {
        let m = self.nodes();
        DMatrix::from_fn(m, m, |i, j| if i == j { self.pin_indicator(i) } else { 0.0 })
    }

    /// Neighbors of `node` with their coupling weight `-L_ij` (always 1 here).
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let row = self.laplacian.row(node);
        (0..self.nodes()).filter_map(move |j| {
            let w = -row[j];
            (j != node && w != 0.0).then_some((j, w))
        })
    }

    /// Edge list (0-based, `i < j`) recovered from the Laplacian.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let m = self.nodes();
        let mut out = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                if self.laplacian[(i, j)] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Builds the unit-weight Laplacian: `L_ij = -1` for each link, `L_ii` the
/// node degree. Edges are 0-based unordered pairs.
pub fn laplacian_from_edges(edges: &[(usize, usize)], nodes: usize) -> Result<DMatrix<f64>> {
    let mut lap = DMatrix::<f64>::zeros(nodes, nodes);
    for &(a, b) in edges {
        for idx in [a, b] {
            if idx >= nodes {
                return Err(Error::NodeOutOfRange {
                    index: idx + 1,
                    nodes,
                });
            }
        }
        if a == b {
            return Err(Error::SelfLoop(a + 1));
        }
        if lap[(a, b)] != 0.0 {
            let (lo, hi) = (a.min(b), a.max(b));
            return Err(Error::DuplicateEdge(lo + 1, hi + 1));
        }
        lap[(a, b)] = -1.0;
        lap[(b, a)] = -1.0;
        lap[(a, a)] += 1.0;
        lap[(b, b)] += 1.0;
    }
    Ok(lap)
}

/// Mode family plus the infinitesimal generator of the switching chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingNetwork {
    pub modes: Vec<GraphMode>,
    pub generator: DMatrix<f64>,
}

impl SwitchingNetwork {
    /// Validating constructor.
    pub fn new(modes: Vec<GraphMode>, generator: DMatrix<f64>) -> Result<Self> {
        let net = Self { modes, generator };
        let diags = validate_network(&net);
        if diags.is_empty() {
            Ok(net)
        } else {
            Err(Error::InvalidNetwork(diags))
        }
    }

    /// Single static mode (`Q = [[0]]`).
    pub fn single(mode: GraphMode) -> Self {
        Self {
            modes: vec![mode],
            generator: DMatrix::zeros(1, 1),
        }
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn nodes(&self) -> usize {
        self.modes.first().map_or(0, GraphMode::nodes)
    }
}

/// One structural violation found by [`validate_network`]. Indices in the
/// message are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl Diagnostic {
    fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }
}

/// Checks every structural invariant and returns all violations (empty when
/// the network is valid).
pub fn validate_network(net: &SwitchingNetwork) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let n_modes = net.modes.len();
    if n_modes == 0 {
        out.push(Diagnostic::new("network has no modes"));
    }

    let m = net.nodes();
    for (u, mode) in net.modes.iter().enumerate() {
        let u1 = u + 1;
        let lap = &mode.laplacian;
        if lap.nrows() != lap.ncols() {
            out.push(Diagnostic::new(format!(
                "mode {u1}: laplacian is {}x{}, not square",
                lap.nrows(),
                lap.ncols()
            )));
            continue;
        }
        if lap.nrows() != m {
            out.push(Diagnostic::new(format!(
                "mode {u1}: {} nodes, expected {m}",
                lap.nrows()
            )));
            continue;
        }
        for i in 0..m {
            let mut sum = 0.0;
            let mut links = 0.0;
            for j in 0..m {
                let v = lap[(i, j)];
                sum += v;
                if i != j {
                    if v != 0.0 && v != -1.0 {
                        out.push(Diagnostic::new(format!(
                            "mode {u1}: laplacian entry ({}, {}) = {v}, expected 0 or -1",
                            i + 1,
                            j + 1
                        )));
                    }
                    if v != lap[(j, i)] && i < j {
                        out.push(Diagnostic::new(format!(
                            "mode {u1}: laplacian not symmetric at ({}, {})",
                            i + 1,
                            j + 1
                        )));
                    }
                    if v != 0.0 {
                        links += 1.0;
                    }
                }
            }
            if sum != 0.0 {
                out.push(Diagnostic::new(format!(
                    "mode {u1}: laplacian row {} sums to {sum}",
                    i + 1
                )));
            }
            if lap[(i, i)] != links {
                out.push(Diagnostic::new(format!(
                    "mode {u1}: laplacian diagonal ({}, {}) = {}, node has {links} links",
                    i + 1,
                    i + 1,
                    lap[(i, i)]
                )));
            }
        }
        for &p in &mode.pinned {
            if p >= m {
                out.push(Diagnostic::new(format!(
                    "mode {u1}: pinned node {} out of range 1..={m}",
                    p + 1
                )));
            }
        }
    }

    let q = &net.generator;
    if q.nrows() != n_modes || q.ncols() != n_modes {
        out.push(Diagnostic::new(format!(
            "generator is {}x{}, expected {n_modes}x{n_modes}",
            q.nrows(),
            q.ncols()
        )));
        return out;
    }
    for u in 0..n_modes {
        let mut sum = 0.0;
        for v in 0..n_modes {
            let x = q[(u, v)];
            sum += x;
            if !x.is_finite() {
                out.push(Diagnostic::new(format!(
                    "generator entry ({}, {}) is not finite",
                    u + 1,
                    v + 1
                )));
            } else if u != v && x < 0.0 {
                out.push(Diagnostic::new(format!(
                    "generator entry ({}, {}) = {x} is negative",
                    u + 1,
                    v + 1
                )));
            } else if u == v && x > 0.0 {
                out.push(Diagnostic::new(format!(
                    "generator diagonal ({}, {}) = {x} is positive",
                    u + 1,
                    v + 1
                )));
            }
        }
        if sum.abs() > GENERATOR_ROW_TOLERANCE {
            out.push(Diagnostic::new(format!(
                "generator row {} sums to {}",
                u + 1,
                round_for_display(sum)
            )));
        }
    }
    out
}

// Row sums like 0.1 accumulate as 0.09999999999999964; show them the way a
// person wrote them.
fn round_for_display(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}
