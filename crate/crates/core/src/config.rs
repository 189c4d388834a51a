//! TOML run descriptions.
//!
//! The file grammar mirrors [`RawConfig`]; every table except `[[modes]]`,
//! `[coupling]`, `[rule]` and `[simulation]` may be omitted. Node indices are
//! 1-based in the file. See the README for a commented example.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{ChuaParams, NodeDynamics, VectorField};
use crate::engine::{BoundSettings, GeneratorKind, SimConfig};
use crate::error::{Error, Result};
use crate::rules::Rule;
use crate::stability::{lambda_bounds, max_delta, DEFAULT_TOLERANCE};
use crate::topology::{validate_network, GraphMode, SwitchingNetwork};

/// Default target initial state.
pub const DEFAULT_TARGET: [f64; 3] = [0.1, 0.1, 0.1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub model: Option<RawModel>,
    pub dynamics: Option<RawDynamics>,
    pub quad: Option<RawQuad>,
    pub coupling: RawCoupling,
    pub rule: RawRule,
    pub simulation: RawSimulation,
    pub initial: Option<RawInitial>,
    pub bounds: Option<RawBounds>,
    pub stability: Option<RawStability>,
    pub markov: Option<RawMarkov>,
    pub modes: Vec<RawMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModel {
    pub nodes: Option<usize>,
    pub dimension: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDynamics {
    pub kind: String,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub m0: Option<f64>,
    pub m1: Option<f64>,
    /// Row-major system matrix for `kind = "linear"`.
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawQuad {
    pub alpha: f64,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCoupling {
    pub c: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRule {
    pub kind: String,
    pub delta: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSimulation {
    pub dt: f64,
    pub horizon: f64,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub record_stride: Option<usize>,
    /// 1-based; drawn per trial when absent.
    pub initial_mode: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInitial {
    pub target: Option<Vec<f64>>,
    /// Seed for the uniform draw of node states.
    pub seed: Option<u64>,
    /// Explicit node states, one row per node.
    pub states: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBounds {
    pub generator: Option<String>,
    pub inflation: Option<f64>,
    pub step: Option<f64>,
    pub mu: Option<f64>,
    pub xi_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawStability {
    pub tolerance: Option<f64>,
    /// Diagonal of `P(u)` per mode; all ones when absent.
    pub p: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMarkov {
    pub generator: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMode {
    pub edges: Vec<[usize; 2]>,
    pub pinned: Vec<usize>,
}

/// A validated configuration with its source and digest.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub raw: RawConfig,
    pub sim: SimConfig,
    pub digest: String,
    pub source: Option<PathBuf>,
}

pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut loaded = parse_config(&text)
        .map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_config_prefix(e))))?;
    loaded.source = Some(path.to_path_buf());
    Ok(loaded)
}

fn strip_config_prefix(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    }
}

pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let sim = resolve(&raw)?;
    Ok(LoadedConfig {
        digest: digest(&raw)?,
        raw,
        sim,
        source: None,
    })
}

/// Stable text form of a parsed config.
pub fn canonicalize(raw: &RawConfig) -> Result<String> {
    toml::to_string(raw).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
}

/// SHA-256 of the canonical text, hex encoded.
pub fn digest(raw: &RawConfig) -> Result<String> {
    Ok(hex::encode(Sha256::digest(canonicalize(raw)?.as_bytes())))
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str, errors: &mut Vec<String>) -> Option<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || rows.iter().any(|row| row.len() != c) {
        errors.push(format!("{what} must be a non-empty rectangular matrix"));
        return None;
    }
    Some(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// Builds and validates a [`SimConfig`]; every problem found is reported.
pub fn resolve(raw: &RawConfig) -> Result<SimConfig> {
    let mut errors: Vec<String> = Vec::new();

    let field = match raw.dynamics.as_ref() {
        None => Some(VectorField::Chua(ChuaParams::default())),
        Some(d) => match d.kind.as_str() {
            "chua" => {
                let def = ChuaParams::default();
                Some(VectorField::Chua(ChuaParams {
                    p: d.p.unwrap_or(def.p),
                    q: d.q.unwrap_or(def.q),
                    m0: d.m0.unwrap_or(def.m0),
                    m1: d.m1.unwrap_or(def.m1),
                }))
            }
            "linear" => match &d.matrix {
                Some(rows) => matrix_from_rows(rows, "dynamics.matrix", &mut errors).and_then(|a| {
                    if a.nrows() != a.ncols() {
                        errors.push("dynamics.matrix must be square".into());
                        None
                    } else {
                        Some(VectorField::Linear(a))
                    }
                }),
                None => {
                    errors.push("dynamics.kind = \"linear\" requires dynamics.matrix".into());
                    None
                }
            },
            other => {
                errors.push(format!("unknown dynamics kind {other:?} (expected chua or linear)"));
                None
            }
        },
    };
    let n = field.as_ref().map(VectorField::dimension);
    if let (Some(n), Some(want)) = (n, raw.model.as_ref().and_then(|m| m.dimension)) {
        if n != want {
            errors.push(format!("model.dimension = {want} but the dynamics have dimension {n}"));
        }
    }

    let nodes = raw
        .model
        .as_ref()
        .and_then(|m| m.nodes)
        .or_else(|| {
            raw.modes
                .iter()
                .flat_map(|m| m.edges.iter().flatten().chain(&m.pinned))
                .copied()
                .max()
        })
        .unwrap_or(0);
    if nodes == 0 {
        errors.push("network has no nodes".into());
    }
    if raw.modes.is_empty() {
        errors.push("at least one [[modes]] entry is required".into());
    }

    let mut modes = Vec::new();
    for (u, mode) in raw.modes.iter().enumerate() {
        let mut bad = false;
        for &k in mode.edges.iter().flatten().chain(&mode.pinned) {
            if k == 0 || k > nodes {
                errors.push(format!("mode {}: node {k} outside 1..={nodes}", u + 1));
                bad = true;
            }
        }
        if bad {
            continue;
        }
        let edges: Vec<(usize, usize)> = mode.edges.iter().map(|e| (e[0] - 1, e[1] - 1)).collect();
        let pinned: Vec<usize> = mode.pinned.iter().map(|k| k - 1).collect();
        match GraphMode::from_edges(&edges, nodes, &pinned) {
            Ok(g) => modes.push(g),
            Err(e) => errors.push(format!("mode {}: {e}", u + 1)),
        }
    }

    let generator = match raw.markov.as_ref() {
        Some(mk) => matrix_from_rows(&mk.generator, "markov.generator", &mut errors),
        None if raw.modes.len() == 1 => Some(DMatrix::zeros(1, 1)),
        None => {
            errors.push("markov.generator is required with more than one mode".into());
            None
        }
    };
    let network = match generator {
        Some(q) if modes.len() == raw.modes.len() && !modes.is_empty() => {
            let net = SwitchingNetwork {
                modes,
                generator: q,
            };
            let diags = validate_network(&net);
            errors.extend(diags.iter().map(|d| d.to_string()));
            diags.is_empty().then_some(net)
        }
        _ => None,
    };

    let alpha = raw.quad.as_ref().map_or(10.0, |q| q.alpha);
    let beta = raw.quad.as_ref().and_then(|q| q.beta);
    let dynamics = field.and_then(|f| match NodeDynamics::derive(f, alpha, beta) {
        Ok(d) => Some(d),
        Err(e) => {
            errors.push(format!("dynamics: {e}"));
            None
        }
    });

    let rule = match raw.rule.kind.parse::<Rule>() {
        Ok(r) => Some(r),
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    };
    let delta = raw.rule.delta.unwrap_or(0.0);
    let a = raw.rule.a.unwrap_or(0.0);
    let b = raw.rule.b.unwrap_or(0.0);
    if let Some(r) = rule {
        if r.is_state_relative() && raw.rule.delta.is_none() {
            errors.push(format!("rule {r} requires rule.delta"));
        }
        if !r.is_state_relative() && (raw.rule.a.is_none() || raw.rule.b.is_none()) {
            errors.push(format!("rule {r} requires rule.a and rule.b"));
        }
    }

    let mode_count = raw.modes.len();
    let p_family: Vec<Vec<f64>> = match raw.stability.as_ref().and_then(|s| s.p.clone()) {
        Some(p) => {
            if p.len() != mode_count || p.iter().any(|row| row.len() != nodes) {
                errors.push(format!(
                    "stability.p must have {mode_count} rows of {nodes} entries"
                ));
            }
            p
        }
        None => vec![vec![1.0; nodes]; mode_count],
    };

    let sim = &raw.simulation;
    let initial_mode = match sim.initial_mode {
        Some(0) => {
            errors.push("simulation.initial_mode is 1-based".into());
            None
        }
        Some(u) => Some(u - 1),
        None => None,
    };

    let init = raw.initial.clone().unwrap_or(RawInitial {
        target: None,
        seed: None,
        states: None,
    });
    let dim = n.unwrap_or(DEFAULT_TARGET.len());
    let target = init.target.clone().unwrap_or_else(|| {
        if dim == DEFAULT_TARGET.len() {
            DEFAULT_TARGET.to_vec()
        } else {
            vec![0.1; dim]
        }
    });
    if target.len() != dim {
        errors.push(format!("initial.target has {} entries, expected {dim}", target.len()));
    }
    let states = match &init.states {
        Some(rows) => {
            if rows.len() != nodes || rows.iter().any(|r| r.len() != dim) {
                errors.push(format!("initial.states must have {nodes} rows of {dim} entries"));
            }
            rows.iter().flatten().copied().collect()
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(init.seed.unwrap_or(0));
            (0..nodes * dim).map(|_| rng.random_range(-1.0..=1.0)).collect()
        }
    };

    let rb = raw.bounds.clone().unwrap_or(RawBounds {
        generator: None,
        inflation: None,
        step: None,
        mu: None,
        xi_max: None,
    });
    let generator = match rb.generator.as_deref().unwrap_or("closed-form") {
        "closed-form" => Some(GeneratorKind::ClosedForm),
        "integrator" => Some(GeneratorKind::Integrator {
            inflation: rb.inflation.unwrap_or(1.1),
            step: rb.step,
        }),
        other => {
            errors.push(format!(
                "unknown bounds.generator {other:?} (expected closed-form or integrator)"
            ));
            None
        }
    };

    if let (Some(dynamics), Some(rule)) = (&dynamics, rule) {
        if rule.is_state_relative() && raw.coupling.c > 0.0 {
            if let Ok((lo, hi)) = lambda_bounds(&p_family, &dynamics.quad.g) {
                let max = max_delta(dynamics.quad.beta, lo, hi);
                if !(delta > 0.0 && delta <= max) {
                    errors.push(
                        Error::DeltaOutOfRange { delta, max }.to_string(),
                    );
                }
            }
        }
    }

    let (Some(network), Some(dynamics), Some(rule), Some(generator)) =
        (network, dynamics, rule, generator)
    else {
        return Err(Error::Config(errors.join("\n")));
    };
    if !errors.is_empty() {
        return Err(Error::Config(errors.join("\n")));
    }

    let config = SimConfig {
        network,
        dynamics,
        coupling: raw.coupling.c,
        pinning_gain: raw.coupling.epsilon,
        delta,
        a,
        b,
        rule,
        dt: sim.dt,
        horizon: sim.horizon,
        initial_states: states,
        initial_target: target,
        initial_mode,
        trials: sim.trials.unwrap_or(1),
        seed: sim.seed.unwrap_or(0),
        p_family,
        record_stride: sim.record_stride.unwrap_or(10),
        bounds: BoundSettings {
            generator,
            mu: rb.mu,
            xi_max: rb.xi_max.unwrap_or(1.0),
        },
        certificate_tolerance: raw
            .stability
            .as_ref()
            .and_then(|s| s.tolerance)
            .unwrap_or(DEFAULT_TOLERANCE),
    };
    config
        .validate()
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(config)
}

/// Provenance written next to every output set.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub digest: String,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<PathBuf>,
    pub wall_clock: Duration,
    /// Additional `key = value` lines (rule, fitted rate, …).
    pub extra: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(digest: &str, seed: u64) -> Self {
        Self {
            digest: digest.to_string(),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
            wall_clock: Duration::ZERO,
            extra: Vec::new(),
        }
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.extra.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "config_digest = {}", self.digest);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "version = {}", self.version);
        for (k, v) in &self.extra {
            let _ = writeln!(s, "{k} = {v}");
        }
        for p in &self.outputs {
            let _ = writeln!(s, "output = {}", p.display());
        }
        let _ = writeln!(s, "wall_clock_seconds = {:.3}", self.wall_clock.as_secs_f64());
        s
    }
}
