//! Closed-loop simulation.
//!
//! One trial integrates the coupled nodes and the target with fixed-step
//! Euler, holding each node's control between its events. Integration steps
//! are split at chain switch instants and at discrete-monitoring deadlines,
//! so those events happen at their exact times. At an event instant the
//! processing order is: mode switch, due deadlines or rule checks, broadcast
//! fan-out, then the next Euler sub-step.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::{BoundConstants, BoundGenerator, ClosedFormBounds, IntegratorBounds};
use crate::dynamics::{NodeDynamics, VectorField};
use crate::error::{Error, Result};
use crate::linalg::{distance, norm};
use crate::markov::{generate_path, ModePath};
use crate::rules::{
    compute_zi, rule1_check, rule2_check, CouplingParams, DeadlinePlanner, DiscreteThreshold,
    Monitoring, NodeTriggerState, Rule, TriggerCause, TriggerEvent, XiSearch,
};
use crate::stability::{
    check_condition, lambda_bounds, threshold_coefficient, ConditionInputs, StabilityCertificate,
};
use crate::topology::SwitchingNetwork;

/// Events closer than this are treated as simultaneous.
pub const TIME_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorKind {
    ClosedForm,
    /// Paired Euler integration padded by `inflation`; `step` defaults to
    /// the simulation step.
    Integrator { inflation: f64, step: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSettings {
    pub generator: GeneratorKind,
    pub mu: Option<f64>,
    pub xi_max: f64,
}

impl Default for BoundSettings {
    fn default() -> Self {
        Self {
            generator: GeneratorKind::ClosedForm,
            mu: None,
            xi_max: 1.0,
        }
    }
}

/// Fully resolved run description.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub network: SwitchingNetwork,
    pub dynamics: NodeDynamics,
    pub coupling: f64,
    pub pinning_gain: f64,
    pub delta: f64,
    pub a: f64,
    pub b: f64,
    pub rule: Rule,
    pub dt: f64,
    pub horizon: f64,
    /// Stacked `m × n`, row per node.
    pub initial_states: Vec<f64>,
    pub initial_target: Vec<f64>,
    /// Drawn uniformly per trial when `None`.
    pub initial_mode: Option<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Diagonal of `P(u)` per mode.
    pub p_family: Vec<Vec<f64>>,
    pub record_stride: usize,
    pub bounds: BoundSettings,
    pub certificate_tolerance: f64,
}

impl SimConfig {
    pub fn nodes(&self) -> usize {
        self.network.nodes()
    }

    pub fn dimension(&self) -> usize {
        self.dynamics.dimension()
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let m = self.nodes();
        let n = self.dimension();
        if !(self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon >= self.dt) {
            return bad(format!("horizon {} shorter than dt {}", self.horizon, self.dt));
        }
        let steps = self.horizon / self.dt;
        if (steps - steps.round()).abs() > 1e-6 {
            return bad(format!(
                "horizon {} is not a whole number of steps of {}",
                self.horizon, self.dt
            ));
        }
        if !(self.coupling >= 0.0) || !(self.pinning_gain >= 0.0) {
            return bad("coupling strength and pinning gain must be nonnegative".into());
        }
        if self.initial_states.len() != m * n {
            return Err(Error::DimensionMismatch(format!(
                "{} initial state values for {m} nodes of dimension {n}",
                self.initial_states.len()
            )));
        }
        if self.initial_target.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "target has {} entries, dynamics dimension is {n}",
                self.initial_target.len()
            )));
        }
        if let Some(u) = self.initial_mode {
            if u >= self.network.mode_count() {
                return bad(format!("initial mode {} out of range", u + 1));
            }
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.record_stride == 0 {
            return bad("record stride must be at least 1".into());
        }
        if !(self.bounds.xi_max >= self.dt) {
            return bad(format!("xi_max {} below dt {}", self.bounds.xi_max, self.dt));
        }
        if let GeneratorKind::Integrator { inflation, step } = &self.bounds.generator {
            if !(*inflation >= 1.0) {
                return bad(format!("integrator inflation must be >= 1, got {inflation}"));
            }
            if let Some(h) = step {
                if !(*h > 0.0) {
                    return bad(format!("integrator step must be positive, got {h}"));
                }
            }
        }
        self.dynamics.quad.validate()?;
        if self.rule.is_state_relative() {
            self.dynamics.quad.require_positive()?;
            self.state_coefficient()?;
        } else if !(self.a > 0.0 && self.b > 0.0) {
            return bad(format!(
                "exponential rules need a > 0 and b > 0, got a = {}, b = {}",
                self.a, self.b
            ));
        }
        Ok(())
    }

    /// `(βλ̲ − δλ̄/2)/(√c λ̄)`; infinite for an uncoupled network.
    pub fn state_coefficient(&self) -> Result<f64> {
        let (lo, hi) = lambda_bounds(&self.p_family, &self.dynamics.quad.g)?;
        if self.coupling == 0.0 {
            return Ok(f64::INFINITY);
        }
        threshold_coefficient(self.dynamics.quad.beta, lo, hi, self.delta, self.coupling)
    }

    pub fn condition_inputs(&self) -> ConditionInputs<'_> {
        ConditionInputs {
            net: &self.network,
            p: &self.p_family,
            quad: &self.dynamics.quad,
            coupling: self.coupling,
            pinning_gain: self.pinning_gain,
        }
    }

    pub fn certificate(&self) -> Result<StabilityCertificate> {
        let cert = check_condition(&self.condition_inputs(), self.certificate_tolerance)?;
        if self.coupling > 0.0 && self.delta > 0.0 {
            cert.with_threshold(self.dynamics.quad.beta, self.delta, self.coupling)
        } else {
            Ok(cert)
        }
    }

    pub fn with_rule(&self, rule: Rule) -> Self {
        Self {
            rule,
            ..self.clone()
        }
    }
}

/// Sampled trajectory of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub nodes: usize,
    pub dim: usize,
    pub times: Vec<f64>,
    /// Per sample, stacked node states.
    pub states: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    /// Per sample, stacked held controls.
    pub controls: Vec<Vec<f64>>,
    pub modes: Vec<usize>,
    pub lyapunov: Vec<f64>,
    /// Per sample, `‖x_i − s‖²` per node.
    pub sq_errors: Vec<Vec<f64>>,
    /// Per sample, `‖z_i‖` per node as seen by the rule check (before any
    /// trigger at that instant).
    pub z_norms: Vec<Vec<f64>>,
    /// `V` at every grid point, `t = 0` included.
    pub lyapunov_full: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn max_sq_error(&self) -> Vec<f64> {
        self.sq_errors
            .iter()
            .map(|row| row.iter().copied().fold(0.0, f64::max))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalStats {
    pub count: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub nodes: usize,
    /// Ordered by time, then by node within an instant.
    pub events: Vec<TriggerEvent>,
    pub degenerate_deadlines: usize,
}

impl EventLog {
    pub fn counts(&self, cause: TriggerCause) -> Vec<usize> {
        let mut out = vec![0; self.nodes];
        for e in self.events.iter().filter(|e| e.cause == cause) {
            out[e.node] += 1;
        }
        out
    }

    /// Rule-violation events per node.
    pub fn trigger_counts(&self) -> Vec<usize> {
        self.counts(TriggerCause::RuleViolation)
    }

    pub fn total_triggers(&self) -> usize {
        self.trigger_counts().iter().sum()
    }

    /// Rule-violation events per node with time in `[from, to]`.
    pub fn window_counts(&self, from: f64, to: f64) -> Vec<usize> {
        let mut out = vec![0; self.nodes];
        for e in &self.events {
            if e.cause == TriggerCause::RuleViolation && e.time >= from && e.time <= to {
                out[e.node] += 1;
            }
        }
        out
    }

    /// Gaps between a node's rule-violation event and its previous event,
    /// counted only when that previous event was itself a rule violation or
    /// the initialization (re-anchors by broadcasts and switches excluded).
    pub fn inter_event_intervals(&self) -> Vec<f64> {
        let mut last: Vec<Option<TriggerEvent>> = vec![None; self.nodes];
        let mut out = Vec::new();
        for e in &self.events {
            if e.cause == TriggerCause::RuleViolation {
                if let Some(prev) = last[e.node] {
                    if matches!(
                        prev.cause,
                        TriggerCause::RuleViolation | TriggerCause::Initialization
                    ) {
                        out.push(e.time - prev.time);
                    }
                }
            }
            last[e.node] = Some(*e);
        }
        out
    }

    pub fn interval_stats(&self) -> Option<IntervalStats> {
        let iv = self.inter_event_intervals();
        if iv.is_empty() {
            return None;
        }
        Some(IntervalStats {
            count: iv.len(),
            min: iv.iter().copied().fold(f64::INFINITY, f64::min),
            mean: iv.iter().sum::<f64>() / iv.len() as f64,
            max: iv.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub record: TrajectoryRecord,
    pub events: EventLog,
    pub path: ModePath,
    /// The attached certificate was infeasible, so the run carries no
    /// stability guarantee.
    pub exploratory: bool,
}

/// One Euler step of the coupled nodes and the target:
/// `x_i ← x_i + dt (f(x_i) + θ_i)`, `s ← s + dt f(s)`.
/// `t_after` stamps a blow-up error.
pub fn euler_step(
    states: &mut [f64],
    target: &mut [f64],
    thetas: &[Vec<f64>],
    field: &VectorField,
    dt: f64,
    t_after: f64,
) -> Result<()> {
    let n = target.len();
    let mut fx = vec![0.0; n];
    for (i, theta) in thetas.iter().enumerate() {
        let xi = &mut states[i * n..(i + 1) * n];
        field.eval(xi, &mut fx);
        for d in 0..n {
            xi[d] += dt * (fx[d] + theta[d]);
        }
    }
    field.eval(target, &mut fx);
    for d in 0..n {
        target[d] += dt * fx[d];
    }
    if states.iter().chain(target.iter()).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::BlowUp { time: t_after })
    }
}

/// `½ Σ_i P_ii x̂_iᵀ G x̂_i` for stacked errors `xhat`.
pub fn lyapunov_value(xhat: &[f64], p_diag: &[f64], g: &DMatrix<f64>) -> f64 {
    let n = g.nrows();
    let mut total = 0.0;
    for (i, &p) in p_diag.iter().enumerate() {
        let e = &xhat[i * n..(i + 1) * n];
        let mut quad = 0.0;
        for r in 0..n {
            for c in 0..n {
                quad += e[r] * g[(r, c)] * e[c];
            }
        }
        total += p * quad;
    }
    0.5 * total
}

fn stacked_error(states: &[f64], target: &[f64]) -> Vec<f64> {
    let n = target.len();
    states
        .iter()
        .enumerate()
        .map(|(k, x)| x - target[k % n])
        .collect()
}

/// Precomputed per-config state shared by all trials.
pub struct Simulation {
    pub config: SimConfig,
    pub certificate: StabilityCertificate,
    /// State-relative coefficient (`None` for exponential rules).
    pub coefficient: Option<f64>,
    params: CouplingParams,
    bounds: Box<dyn BoundGenerator>,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let certificate = config.certificate()?;
        if !certificate.feasible {
            log::warn!(
                "stability condition fails (worst mode margin {:e}); simulation is exploratory",
                certificate.worst_margin()
            );
        }
        let coefficient = if config.rule.is_state_relative() {
            Some(config.state_coefficient()?)
        } else {
            None
        };
        let params = CouplingParams {
            coupling: config.coupling,
            pinning_gain: config.pinning_gain,
            gamma: config.dynamics.quad.gamma.clone(),
        };
        let bounds: Box<dyn BoundGenerator> = match &config.bounds.generator {
            GeneratorKind::ClosedForm => Box::new(ClosedFormBounds(BoundConstants::new(
                config.dynamics.lipschitz,
                config.dynamics.one_sided,
                config.bounds.mu,
            )?)),
            GeneratorKind::Integrator { inflation, step } => Box::new(IntegratorBounds {
                field: config.dynamics.field.clone(),
                step: step.unwrap_or(config.dt),
                inflation: *inflation,
            }),
        };
        Ok(Self {
            config,
            certificate,
            coefficient,
            params,
            bounds,
        })
    }

    fn planner(&self) -> DeadlinePlanner<'_> {
        let threshold = match self.config.rule {
            Rule::DiscState | Rule::ContState => DiscreteThreshold::State {
                coeff: self.coefficient.unwrap_or(f64::INFINITY),
            },
            Rule::DiscExp | Rule::ContExp => DiscreteThreshold::Exponential {
                a: self.config.a,
                b: self.config.b,
            },
        };
        DeadlinePlanner {
            threshold,
            pinning_gain: self.config.pinning_gain,
            bounds: self.bounds.as_ref(),
            search: XiSearch {
                grid: self.config.dt,
                min: self.config.dt,
                max: self.config.bounds.xi_max,
            },
        }
    }

    /// Runs one trial; a pure function of the config and `seed`.
    pub fn run_trial(&self, seed: u64) -> Result<TrialResult> {
        Trial::new(self, seed)?.run()
    }

    /// Runs `config.trials` independent trials (seeds `seed + k`) in
    /// parallel and reduces them in trial order.
    pub fn run_ensemble(&self) -> Result<EnsembleSummary> {
        let base = self.config.seed;
        let results: Vec<Result<TrialSummary>> = (0..self.config.trials)
            .into_par_iter()
            .map(|k| {
                let seed = base.wrapping_add(k as u64);
                self.run_trial(seed).map(|r| TrialSummary::from(&r))
            })
            .collect();
        let mut summaries = Vec::with_capacity(results.len());
        for (k, r) in results.into_iter().enumerate() {
            summaries.push(r.map_err(|e| {
                Error::Internal(format!("trial {} (seed {}) failed: {e}", k, base.wrapping_add(k as u64)))
            })?);
        }
        Ok(EnsembleSummary::reduce(&summaries))
    }
}

pub fn run_trial(config: &SimConfig, seed: u64) -> Result<TrialResult> {
    Simulation::new(config.clone())?.run_trial(seed)
}

pub fn run_ensemble(config: &SimConfig) -> Result<EnsembleSummary> {
    Simulation::new(config.clone())?.run_ensemble()
}

struct Trial<'a> {
    sim: &'a Simulation,
    seed: u64,
    path: ModePath,
    mode: usize,
    states: Vec<f64>,
    target: Vec<f64>,
    nodes: Vec<NodeTriggerState>,
    events: Vec<TriggerEvent>,
    degenerate: usize,
}

impl<'a> Trial<'a> {
    fn new(sim: &'a Simulation, seed: u64) -> Result<Self> {
        let cfg = &sim.config;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let initial = match cfg.initial_mode {
            Some(u) => u,
            None => rng.random_range(0..cfg.network.mode_count()),
        };
        let path = generate_path(&cfg.network, initial, cfg.horizon, &mut rng)?;
        let mode = path.initial_mode();
        let states = cfg.initial_states.clone();
        let target = cfg.initial_target.clone();
        let graph = &cfg.network.modes[mode];
        let nodes = (0..cfg.nodes())
            .map(|i| NodeTriggerState::new(i, graph, 0.0, &states, &target, &sim.params))
            .collect::<Result<Vec<_>>>()?;
        let events = (0..cfg.nodes())
            .map(|node| TriggerEvent {
                node,
                time: 0.0,
                cause: TriggerCause::Initialization,
            })
            .collect();
        let mut trial = Self {
            sim,
            seed,
            path,
            mode,
            states,
            target,
            nodes,
            events,
            degenerate: 0,
        };
        if cfg.rule.monitoring() == Monitoring::Discrete {
            let all: Vec<usize> = (0..cfg.nodes()).collect();
            trial.plan_nodes(&all, 0.0);
        }
        Ok(trial)
    }

    fn thetas(&self) -> Vec<Vec<f64>> {
        self.nodes.iter().map(|s| s.theta.clone()).collect()
    }

    fn plan_nodes(&mut self, which: &[usize], t: f64) {
        let planner = self.sim.planner();
        let thetas = self.thetas();
        let graph = &self.sim.config.network.modes[self.mode];
        for &i in which {
            let d = self.nodes[i].plan(graph, t, &self.states, &self.target, &thetas, &planner);
            if d.degenerate {
                self.degenerate += 1;
            }
        }
    }

    fn next_deadline(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|s| s.deadline.map(|d| d.at))
            .fold(f64::INFINITY, f64::min)
    }

    fn z_norms(&self) -> Result<Vec<f64>> {
        let graph = &self.sim.config.network.modes[self.mode];
        self.nodes
            .iter()
            .map(|s| {
                compute_zi(s.node, graph, &self.states, &self.target, &s.held, &self.sim.params)
                    .map(|z| norm(&z))
            })
            .collect()
    }

    fn handle_switch(&mut self, t: f64, new_mode: usize) -> Result<()> {
        self.mode = new_mode;
        let graph = &self.sim.config.network.modes[new_mode];
        for s in &mut self.nodes {
            s.on_mode_switch(graph, t, &self.states, &self.target, &self.sim.params)?;
            self.events.push(TriggerEvent {
                node: s.node,
                time: t,
                cause: TriggerCause::ModeSwitch,
            });
        }
        if self.sim.config.rule.monitoring() == Monitoring::Discrete {
            let all: Vec<usize> = (0..self.nodes.len()).collect();
            self.plan_nodes(&all, t);
        }
        Ok(())
    }

    fn trigger(&mut self, which: &[usize], t: f64) -> Result<()> {
        let graph = &self.sim.config.network.modes[self.mode];
        for &i in which {
            self.nodes[i].update_control(graph, t, &self.states, &self.target, &self.sim.params)?;
            self.events.push(TriggerEvent {
                node: i,
                time: t,
                cause: TriggerCause::RuleViolation,
            });
        }
        Ok(())
    }

    fn handle_deadlines(&mut self, t: f64) -> Result<()> {
        let due: Vec<usize> = self
            .nodes
            .iter()
            .filter(|s| s.deadline.is_some_and(|d| d.at <= t + TIME_EPSILON))
            .map(|s| s.node)
            .collect();
        if due.is_empty() {
            return Ok(());
        }
        self.trigger(&due, t)?;
        self.plan_nodes(&due, t);

        // Fan the new controls out to neighbors that did not trigger.
        let graph = &self.sim.config.network.modes[self.mode];
        let mut receivers: Vec<usize> = Vec::new();
        for &j in &due {
            for (i, _) in graph.neighbors(j) {
                if !due.contains(&i) && !receivers.contains(&i) {
                    receivers.push(i);
                }
            }
        }
        receivers.sort_unstable();
        if receivers.is_empty() {
            return Ok(());
        }
        let announced: Vec<(usize, Vec<f64>)> =
            due.iter().map(|&j| (j, self.nodes[j].theta.clone())).collect();
        let planner = self.sim.planner();
        for &i in &receivers {
            let mine: Vec<(usize, Vec<f64>)> = announced
                .iter()
                .filter(|(j, _)| graph.neighbors(i).any(|(k, _)| k == *j))
                .cloned()
                .collect();
            let d = self.nodes[i].on_broadcasts(
                &mine,
                graph,
                t,
                &self.states,
                &self.target,
                &self.sim.params,
                &planner,
            )?;
            if d.degenerate {
                self.degenerate += 1;
            }
            self.events.push(TriggerEvent {
                node: i,
                time: t,
                cause: TriggerCause::NeighborBroadcast,
            });
        }
        Ok(())
    }

    fn check_continuous(&mut self, t: f64, z: &[f64]) -> Result<()> {
        let cfg = &self.sim.config;
        let n = cfg.dimension();
        let mut fired = Vec::new();
        for (i, &zn) in z.iter().enumerate() {
            let violated = match cfg.rule {
                Rule::ContState => {
                    let xhat = distance(&self.states[i * n..(i + 1) * n], &self.target);
                    rule1_check(zn, xhat, self.sim.coefficient.unwrap_or(f64::INFINITY))
                }
                Rule::ContExp => rule2_check(zn, t, cfg.a, cfg.b),
                _ => false,
            };
            if violated {
                fired.push(i);
            }
        }
        self.trigger(&fired, t)
    }

    fn run(mut self) -> Result<TrialResult> {
        let cfg = &self.sim.config;
        let m = cfg.nodes();
        let steps = cfg.steps();
        let stride = cfg.record_stride;
        let monitoring = cfg.rule.monitoring();
        let switches: Vec<(f64, usize)> = self.path.switches().collect();
        let mut next_switch = 0;

        let mut record = TrajectoryRecord {
            nodes: m,
            dim: cfg.dimension(),
            times: Vec::with_capacity(steps / stride + 1),
            states: Vec::new(),
            targets: Vec::new(),
            controls: Vec::new(),
            modes: Vec::new(),
            lyapunov: Vec::new(),
            sq_errors: Vec::new(),
            z_norms: Vec::new(),
            lyapunov_full: Vec::with_capacity(steps + 1),
        };
        let z0 = self.z_norms()?;
        self.sample(&mut record, 0.0, z0, true);

        let mut thetas = self.thetas();
        for k in 0..steps {
            let t_end = (k + 1) as f64 * cfg.dt;
            let mut t = k as f64 * cfg.dt;
            loop {
                let mut next = t_end;
                if let Some(&(ts, _)) = switches.get(next_switch) {
                    next = next.min(ts);
                }
                if monitoring == Monitoring::Discrete {
                    next = next.min(self.next_deadline());
                }
                let at_grid = next >= t_end - TIME_EPSILON;
                let next = if at_grid { t_end } else { next };
                let h = next - t;
                if h > 0.0 {
                    euler_step(
                        &mut self.states,
                        &mut self.target,
                        &thetas,
                        &cfg.dynamics.field,
                        h,
                        next,
                    )?;
                }
                t = next;

                let mut changed = false;
                while let Some(&(ts, u)) = switches.get(next_switch) {
                    if ts > t + TIME_EPSILON {
                        break;
                    }
                    next_switch += 1;
                    self.handle_switch(t, u)?;
                    changed = true;
                }
                if monitoring == Monitoring::Discrete {
                    let before = self.events.len();
                    self.handle_deadlines(t)?;
                    changed |= self.events.len() != before;
                }
                if changed {
                    thetas = self.thetas();
                }
                if at_grid {
                    break;
                }
            }

            let z = self.z_norms()?;
            if monitoring == Monitoring::Continuous {
                let before = self.events.len();
                self.check_continuous(t_end, &z)?;
                if self.events.len() != before {
                    thetas = self.thetas();
                }
            }
            let recorded = (k + 1) % stride == 0;
            self.sample(&mut record, t_end, z, recorded);
        }

        let degenerate = self.degenerate;
        Ok(TrialResult {
            seed: self.seed,
            record,
            events: EventLog {
                nodes: m,
                events: self.events,
                degenerate_deadlines: degenerate,
            },
            exploratory: !self.sim.certificate.feasible,
            path: self.path,
        })
    }

    fn sample(&self, record: &mut TrajectoryRecord, t: f64, z: Vec<f64>, full: bool) {
        let cfg = &self.sim.config;
        let n = cfg.dimension();
        let xhat = stacked_error(&self.states, &self.target);
        let v = lyapunov_value(&xhat, &cfg.p_family[self.mode], &cfg.dynamics.quad.g);
        record.lyapunov_full.push(v);
        if !full {
            return;
        }
        record.times.push(t);
        record.states.push(self.states.clone());
        record.targets.push(self.target.clone());
        record
            .controls
            .push(self.nodes.iter().flat_map(|s| s.theta.iter().copied()).collect());
        record.modes.push(self.mode);
        record.lyapunov.push(v);
        record.sq_errors.push(
            xhat.chunks(n)
                .map(|e| e.iter().map(|x| x * x).sum())
                .collect(),
        );
        record.z_norms.push(z);
    }
}

/// Per-trial quantities kept for ensemble reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub seed: u64,
    pub times: Vec<f64>,
    pub sq_errors: Vec<Vec<f64>>,
    pub max_sq_error: Vec<f64>,
    pub lyapunov: Vec<f64>,
    pub trigger_counts: Vec<usize>,
    pub min_interval: Option<f64>,
}

impl From<&TrialResult> for TrialSummary {
    fn from(r: &TrialResult) -> Self {
        Self {
            seed: r.seed,
            times: r.record.times.clone(),
            sq_errors: r.record.sq_errors.clone(),
            max_sq_error: r.record.max_sq_error(),
            lyapunov: r.record.lyapunov.clone(),
            trigger_counts: r.events.trigger_counts(),
            min_interval: r.events.interval_stats().map(|s| s.min),
        }
    }
}

/// Pointwise ensemble statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub trials: usize,
    pub times: Vec<f64>,
    /// Per sample, `E‖x_i − s‖²` per node.
    pub mean_sq_error: Vec<Vec<f64>>,
    /// Per sample, `E max_i ‖x_i − s‖²`.
    pub mean_max_sq_error: Vec<f64>,
    /// Half-width of the normal 95% interval on `mean_max_sq_error`.
    pub ci95_max_sq_error: Vec<f64>,
    pub mean_lyapunov: Vec<f64>,
    /// Least-squares decay rate of `log mean_max_sq_error`.
    pub fitted_rate: Option<f64>,
    pub lyapunov_rate: Option<f64>,
    /// Rule-violation totals per trial.
    pub trigger_totals: Vec<usize>,
    pub min_interval: Option<f64>,
}

impl EnsembleSummary {
    pub fn reduce(trials: &[TrialSummary]) -> Self {
        let k = trials.len();
        let first = &trials[0];
        let samples = first.times.len();
        let m = first.sq_errors.first().map_or(0, Vec::len);
        let kf = k as f64;

        let mut mean_sq_error = vec![vec![0.0; m]; samples];
        let mut mean_max = vec![0.0; samples];
        let mut mean_v = vec![0.0; samples];
        for tr in trials {
            for s in 0..samples {
                for i in 0..m {
                    mean_sq_error[s][i] += tr.sq_errors[s][i] / kf;
                }
                mean_max[s] += tr.max_sq_error[s] / kf;
                mean_v[s] += tr.lyapunov[s] / kf;
            }
        }
        let ci = (0..samples)
            .map(|s| {
                if k < 2 {
                    return 0.0;
                }
                let var = trials
                    .iter()
                    .map(|tr| (tr.max_sq_error[s] - mean_max[s]).powi(2))
                    .sum::<f64>()
                    / (kf - 1.0);
                1.96 * (var / kf).sqrt()
            })
            .collect();
        let min_interval = trials
            .iter()
            .filter_map(|t| t.min_interval)
            .reduce(f64::min);
        Self {
            trials: k,
            fitted_rate: fit_decay_rate(&first.times, &mean_max),
            lyapunov_rate: fit_decay_rate(&first.times, &mean_v),
            times: first.times.clone(),
            mean_sq_error,
            mean_max_sq_error: mean_max,
            ci95_max_sq_error: ci,
            mean_lyapunov: mean_v,
            trigger_totals: trials.iter().map(|t| t.trigger_counts.iter().sum()).collect(),
            min_interval,
        }
    }

    pub fn mean_trigger_total(&self) -> f64 {
        self.trigger_totals.iter().sum::<usize>() as f64 / self.trials as f64
    }
}

/// Exponential decay rate `δ̂` from a least-squares line through
/// `(t, ln y)`; nonpositive or non-finite samples are skipped.
pub fn fit_decay_rate(times: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > 0.0 && v.is_finite())
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    Some(-sxy / sxx)
}
