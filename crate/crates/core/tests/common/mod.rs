//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use pinsync::config::{load_config, LoadedConfig};
use pinsync::engine::SimConfig;
use rand::Rng;

pub fn preset_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("presets/chua_benchmark.toml")
}

pub fn benchmark() -> LoadedConfig {
    load_config(&preset_path()).expect("bundled preset loads")
}

pub fn benchmark_sim() -> SimConfig {
    benchmark().sim
}

/// Row-major dense matrix used by the oracles; deliberately independent of
/// nalgebra.
pub type Dense = Vec<Vec<f64>>;

pub fn zeros(n: usize) -> Dense {
    vec![vec![0.0; n]; n]
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let k = b.len();
    let m = b[0].len();
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            for j in 0..m {
                out[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    out
}

pub fn kron(a: &Dense, b: &Dense) -> Dense {
    let (ar, ac, br, bc) = (a.len(), a[0].len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; ac * bc]; ar * br];
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[i * br + k][j * bc + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// Laplacian with `−1` per undirected link.
pub fn laplacian(nodes: usize, edges: &[(usize, usize)]) -> Dense {
    let mut l = zeros(nodes);
    for &(i, j) in edges {
        l[i][j] -= 1.0;
        l[j][i] -= 1.0;
        l[i][i] += 1.0;
        l[j][j] += 1.0;
    }
    l
}

/// Characteristic polynomial coefficients `[1, c1, …, cn]` of
/// `det(λI − A)` by Faddeev–LeVerrier.
pub fn char_poly(a: &Dense) -> Vec<f64> {
    let n = a.len();
    let mut coeffs = vec![1.0];
    let mut m = zeros(n);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{k-1} I
        let mut next = matmul(a, &m);
        let c_prev = coeffs[k - 1];
        for (i, row) in next.iter_mut().enumerate() {
            row[i] += c_prev;
        }
        m = next;
        let am = matmul(a, &m);
        let trace: f64 = (0..n).map(|i| am[i][i]).sum();
        coeffs.push(-trace / k as f64);
    }
    coeffs
}

fn poly_eval(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in coeffs {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// Largest eigenvalue of a symmetric matrix: Newton on the characteristic
/// polynomial from the Gershgorin upper bound, where the iteration
/// decreases monotonically onto the largest root.
pub fn largest_eigenvalue_charpoly(a: &Dense) -> f64 {
    let n = a.len();
    let coeffs = char_poly(a);
    let mut x = (0..n)
        .map(|i| a[i][i] + (0..n).filter(|&j| j != i).map(|j| a[i][j].abs()).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
        + 1.0;
    for _ in 0..500 {
        let (p, dp) = poly_eval(&coeffs, x);
        if dp == 0.0 {
            break;
        }
        let step = p / dp;
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Edge list and pinned set of one mode.
pub type ModeSpec = (Vec<(usize, usize)>, Vec<usize>);

/// Random instance for the certificate oracle.
#[derive(Debug, Clone)]
pub struct Instance {
    pub nodes: usize,
    pub dim: usize,
    pub modes: Vec<ModeSpec>,
    pub generator: Dense,
    pub p: Vec<Vec<f64>>,
    pub g: Dense,
    pub gamma: Dense,
    pub alpha: f64,
    pub c: f64,
    pub eps: f64,
}

pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let (nodes, dim) = loop {
        let m = rng.random_range(1..=3usize);
        let n = rng.random_range(1..=3usize);
        if m * n <= 6 {
            break (m, n);
        }
    };
    let mode_count = rng.random_range(1..=3usize);
    let mut modes = Vec::new();
    for _ in 0..mode_count {
        let mut edges = Vec::new();
        for i in 0..nodes {
            for j in i + 1..nodes {
                if rng.random_bool(0.6) {
                    edges.push((i, j));
                }
            }
        }
        let pinned: Vec<usize> = (0..nodes).filter(|_| rng.random_bool(0.5)).collect();
        modes.push((edges, pinned));
    }
    let mut generator = zeros(mode_count);
    if mode_count > 1 {
        for u in 0..mode_count {
            let mut total = 0.0;
            for v in 0..mode_count {
                if u != v {
                    let q = rng.random_range(0.1..5.0);
                    generator[u][v] = q;
                    total += q;
                }
            }
            generator[u][u] = -total;
        }
    }
    let p = (0..mode_count)
        .map(|_| (0..nodes).map(|_| rng.random_range(0.5..2.0)).collect())
        .collect();
    // G = B Bᵀ + 0.5 I is positive definite.
    let b: Dense = (0..dim)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut g = zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            g[i][j] = (0..dim).map(|k| b[i][k] * b[j][k]).sum::<f64>();
        }
        g[i][i] += 0.5;
    }
    let gamma = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| if i == j { rng.random_range(0.5..1.5) } else { rng.random_range(-0.3..0.3) })
                .collect()
        })
        .collect();
    Instance {
        nodes,
        dim,
        modes,
        generator,
        p,
        g,
        gamma,
        alpha: rng.random_range(-3.0..3.0),
        c: rng.random_range(0.0..3.0),
        eps: rng.random_range(0.0..2.0),
    }
}

/// Independent construction of the mode-`u` condition matrix.
pub fn oracle_condition_matrix(inst: &Instance, u: usize) -> Dense {
    let m = inst.nodes;
    let (edges, pinned) = &inst.modes[u];
    let l = laplacian(m, edges);
    let mut inner = zeros(m);
    for i in 0..m {
        for j in 0..m {
            inner[i][j] = -inst.c * l[i][j];
        }
        inner[i][i] += inst.alpha;
        if pinned.contains(&i) {
            inner[i][i] -= inst.c * inst.eps;
        }
    }
    let pu: Dense = (0..m)
        .map(|i| (0..m).map(|j| if i == j { inst.p[u][i] } else { 0.0 }).collect())
        .collect();
    let a = kron(&matmul(&pu, &inner), &matmul(&inst.g, &inst.gamma));
    let size = a.len();
    let mut out = zeros(size);
    for i in 0..size {
        for j in 0..size {
            out[i][j] = 0.5 * (a[i][j] + a[j][i]);
        }
    }
    for v in 0..inst.modes.len() {
        let q = inst.generator[u][v];
        let pv: Dense = (0..m)
            .map(|i| (0..m).map(|j| if i == j { inst.p[v][i] } else { 0.0 }).collect())
            .collect();
        let k = kron(&pv, &inst.g);
        for i in 0..size {
            for j in 0..size {
                out[i][j] += 0.5 * q * k[i][j];
            }
        }
    }
    out
}

pub fn to_nalgebra(a: &Dense) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(a.len(), a[0].len(), |i, j| a[i][j])
}

pub struct Built {
    pub net: pinsync::topology::SwitchingNetwork,
    pub quad: pinsync::dynamics::QuadParams,
    pub p: Vec<Vec<f64>>,
}

pub fn build(inst: &Instance) -> Built {
    use pinsync::topology::{GraphMode, SwitchingNetwork};
    let modes = inst
        .modes
        .iter()
        .map(|(e, p)| GraphMode::from_edges(e, inst.nodes, p).unwrap())
        .collect();
    let net = SwitchingNetwork::new(modes, to_nalgebra(&inst.generator)).unwrap();
    let quad = pinsync::dynamics::QuadParams {
        g: to_nalgebra(&inst.g),
        alpha: inst.alpha,
        gamma: to_nalgebra(&inst.gamma),
        beta: 1.0,
    };
    Built {
        net,
        quad,
        p: inst.p.clone(),
    }
}

impl Built {
    pub fn inputs(&self, inst: &Instance) -> pinsync::stability::ConditionInputs<'_> {
        pinsync::stability::ConditionInputs {
            net: &self.net,
            p: &self.p,
            quad: &self.quad,
            coupling: inst.c,
            pinning_gain: inst.eps,
        }
    }
}
