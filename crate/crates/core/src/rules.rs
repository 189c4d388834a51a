//! Event-triggering rules.
//!
//! Continuous monitoring tests a node's error signal `z_i` against either a
//! state-relative threshold or an exponentially decaying one. Discrete
//! monitoring instead predicts the next deadline from the bounds in
//! [`crate::bounds`], using only what the node saw at its last anchor.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::bounds::{BoundGenerator, BoundInputs};
use crate::error::{Error, Result};
use crate::linalg::{matvec, norm};
use crate::topology::GraphMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    /// `‖z_i‖ ≤ coeff · ‖x_i − s‖`, checked every step.
    ContState,
    /// `‖z_i‖ ≤ a e^{−bt}`, checked every step.
    ContExp,
    /// Deadline from `Σ ρ ≤ coeff · ϱ`.
    DiscState,
    /// Deadline from `Σ ρ ≤ a e^{−b(ξ + t_k)}`.
    DiscExp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monitoring {
    Continuous,
    Discrete,
}

impl Rule {
    pub const ALL: [Rule; 4] = [Rule::ContState, Rule::ContExp, Rule::DiscState, Rule::DiscExp];

    pub fn monitoring(self) -> Monitoring {
        match self {
            Rule::ContState | Rule::ContExp => Monitoring::Continuous,
            Rule::DiscState | Rule::DiscExp => Monitoring::Discrete,
        }
    }

    /// Whether the rule uses the state-relative coefficient (and so `δ`).
    pub fn is_state_relative(self) -> bool {
        matches!(self, Rule::ContState | Rule::DiscState)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::ContState => "cont-state",
            Rule::ContExp => "cont-exp",
            Rule::DiscState => "disc-state",
            Rule::DiscExp => "disc-exp",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Rule::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown rule `{s}` (expected cont-state, cont-exp, disc-state or disc-exp)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TriggerCause {
    Initialization,
    RuleViolation,
    NeighborBroadcast,
    ModeSwitch,
}

impl TriggerCause {
    pub fn as_str(self) -> &'static str {
        match self {
            TriggerCause::Initialization => "initialization",
            TriggerCause::RuleViolation => "rule-violation",
            TriggerCause::NeighborBroadcast => "neighbor-broadcast",
            TriggerCause::ModeSwitch => "mode-switch",
        }
    }
}

impl fmt::Display for TriggerCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerEvent {
    pub node: usize,
    pub time: f64,
    pub cause: TriggerCause,
}

/// Gains shared by the control law and the error signal.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingParams {
    pub coupling: f64,
    pub pinning_gain: f64,
    pub gamma: DMatrix<f64>,
}

/// States a node recorded at its last control update.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldSnapshot {
    pub own: Vec<f64>,
    pub target: Vec<f64>,
    pub neighbors: Vec<(usize, Vec<f64>)>,
}

impl HeldSnapshot {
    /// Records the node, its current-mode neighbors and the target from the
    /// stacked state vector `states` (`m × n`, row per node).
    pub fn capture(node: usize, mode: &GraphMode, states: &[f64], target: &[f64]) -> Self {
        let n = target.len();
        let row = |j: usize| states[j * n..(j + 1) * n].to_vec();
        Self {
            own: row(node),
            target: target.to_vec(),
            neighbors: mode.neighbors(node).map(|(j, _)| (j, row(j))).collect(),
        }
    }

    pub fn neighbor(&self, j: usize) -> Option<&[f64]> {
        self.neighbors
            .iter()
            .find(|(k, _)| *k == j)
            .map(|(_, s)| s.as_slice())
    }
}

/// Held control input
/// `θ_i = −c Σ_j L_ij Γ (x_j − x_i) − cε D_i (x_i − s)`, all at the snapshot.
pub fn compute_theta(
    node: usize,
    mode: &GraphMode,
    held: &HeldSnapshot,
    params: &CouplingParams,
) -> Result<Vec<f64>> {
    let n = held.own.len();
    let mut diff = vec![0.0; n];
    for (j, weight) in mode.neighbors(node) {
        let xj = held
            .neighbor(j)
            .ok_or(Error::MissingSnapshot { node: node + 1, neighbor: j + 1 })?;
        // −c L_ij = c · weight
        for d in 0..n {
            diff[d] += weight * (xj[d] - held.own[d]);
        }
    }
    let mut theta = vec![0.0; n];
    matvec(&params.gamma, &diff, &mut theta);
    for t in theta.iter_mut() {
        *t *= params.coupling;
    }
    if mode.is_pinned(node) {
        let gain = params.coupling * params.pinning_gain;
        for d in 0..n {
            theta[d] -= gain * (held.own[d] - held.target[d]);
        }
    }
    Ok(theta)
}

/// Error signal
/// `z_i = Σ_j L_ij Γ [(x_j − x_i)(t) − (x_j − x_i)(t_k)] + ε D_i [(x_i − s)(t) − (x_i − s)(t_k)]`.
pub fn compute_zi(
    node: usize,
    mode: &GraphMode,
    states: &[f64],
    target: &[f64],
    held: &HeldSnapshot,
    params: &CouplingParams,
) -> Result<Vec<f64>> {
    let n = target.len();
    let xi = &states[node * n..(node + 1) * n];
    let mut diff = vec![0.0; n];
    for (j, weight) in mode.neighbors(node) {
        let held_j = held
            .neighbor(j)
            .ok_or(Error::MissingSnapshot { node: node + 1, neighbor: j + 1 })?;
        let xj = &states[j * n..(j + 1) * n];
        // L_ij = −weight
        for d in 0..n {
            diff[d] -= weight * ((xj[d] - xi[d]) - (held_j[d] - held.own[d]));
        }
    }
    let mut z = vec![0.0; n];
    matvec(&params.gamma, &diff, &mut z);
    if mode.is_pinned(node) {
        for d in 0..n {
            z[d] += params.pinning_gain * ((xi[d] - target[d]) - (held.own[d] - held.target[d]));
        }
    }
    Ok(z)
}

/// State-relative rule: trigger iff `‖z_i‖ > coeff ‖x̂_i‖`.
#[inline]
pub fn rule1_check(z_norm: f64, xhat_norm: f64, coeff: f64) -> bool {
    z_norm > coeff * xhat_norm
}

/// Exponential rule: trigger iff `‖z_i‖ > a e^{−bt}`.
#[inline]
pub fn rule2_check(z_norm: f64, t: f64, a: f64, b: f64) -> bool {
    z_norm > a * (-b * t).exp()
}

/// One neighbor's entry in the deadline inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTerm {
    pub node: usize,
    /// `−L_ij`.
    pub weight: f64,
    pub state: Vec<f64>,
    pub theta: Vec<f64>,
}

/// What a discretely monitoring node knows at its current anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleContext {
    pub node: usize,
    pub anchor_time: f64,
    pub own_state: Vec<f64>,
    pub own_theta: Vec<f64>,
    pub target: Vec<f64>,
    /// `D_i` (0 or 1).
    pub pin: f64,
    pub neighbors: Vec<NeighborTerm>,
    /// `‖z_i‖` already accumulated at the anchor; zero right after the
    /// node's own update, positive after a broadcast re-anchor.
    pub carried: f64,
}

impl RuleContext {
    /// Context anchored at `t` from the stacked states and every node's
    /// current held control.
    pub fn build(
        node: usize,
        mode: &GraphMode,
        t: f64,
        states: &[f64],
        target: &[f64],
        thetas: &[Vec<f64>],
    ) -> Self {
        let n = target.len();
        let row = |j: usize| states[j * n..(j + 1) * n].to_vec();
        Self {
            node,
            anchor_time: t,
            own_state: row(node),
            own_theta: thetas[node].clone(),
            target: target.to_vec(),
            pin: mode.pin_indicator(node),
            neighbors: mode
                .neighbors(node)
                .map(|(j, weight)| NeighborTerm {
                    node: j,
                    weight,
                    state: row(j),
                    theta: thetas[j].clone(),
                })
                .collect(),
            carried: 0.0,
        }
    }

    /// Replaces neighbor `j`'s announced control.
    pub fn receive_broadcast(&mut self, j: usize, theta: &[f64]) -> Result<()> {
        let term = self
            .neighbors
            .iter_mut()
            .find(|t| t.node == j)
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "node {} is not a neighbor of node {}",
                    j + 1,
                    self.node + 1
                ))
            })?;
        term.theta.clear();
        term.theta.extend_from_slice(theta);
        Ok(())
    }

    /// Moves the anchor to `t`, taking fresh initial states for the bounds
    /// and the current `‖z_i‖` as the carried offset.
    pub fn reanchor(&mut self, t: f64, states: &[f64], target: &[f64], carried: f64) {
        let n = target.len();
        self.anchor_time = t;
        self.carried = carried;
        self.own_state
            .copy_from_slice(&states[self.node * n..(self.node + 1) * n]);
        self.target.copy_from_slice(target);
        for term in &mut self.neighbors {
            term.state
                .copy_from_slice(&states[term.node * n..(term.node + 1) * n]);
        }
    }

    /// `Σ_j (−L_ij) ρ(ξ, ϑ_i, ϑ_j, x_i, x_j) + ε D_i ρ(ξ, ϑ_i, 0, x_i, s)`.
    pub fn drift_bound(&self, xi: f64, pinning_gain: f64, bounds: &dyn BoundGenerator) -> f64 {
        let mut total = 0.0;
        for term in &self.neighbors {
            total += term.weight
                * bounds.rho(&BoundInputs {
                    t: xi,
                    theta: &self.own_theta,
                    vartheta: &term.theta,
                    u0: &self.own_state,
                    v0: &term.state,
                });
        }
        if self.pin != 0.0 {
            let zero = vec![0.0; self.own_theta.len()];
            total += pinning_gain
                * self.pin
                * bounds.rho(&BoundInputs {
                    t: xi,
                    theta: &self.own_theta,
                    vartheta: &zero,
                    u0: &self.own_state,
                    v0: &self.target,
                });
        }
        total
    }

    /// `ϱ(ξ, ϑ_i, 0, x_i, s)`.
    pub fn target_distance_bound(&self, xi: f64, bounds: &dyn BoundGenerator) -> f64 {
        let zero = vec![0.0; self.own_theta.len()];
        bounds.varrho(&BoundInputs {
            t: xi,
            theta: &self.own_theta,
            vartheta: &zero,
            u0: &self.own_state,
            v0: &self.target,
        })
    }
}

/// Right-hand side of the deadline inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiscreteThreshold {
    /// `coeff · ϱ(ξ, …)`.
    State { coeff: f64 },
    /// `a e^{−b(ξ + t_k)}`.
    Exponential { a: f64, b: f64 },
}

/// Grid and clamps for the deadline search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiSearch {
    pub grid: f64,
    pub min: f64,
    pub max: f64,
}

impl XiSearch {
    /// March on the integration grid, never below one step, at most 1 s.
    pub fn for_step(dt: f64) -> Self {
        Self {
            grid: dt,
            min: dt,
            max: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deadline {
    /// Interval length from the anchor.
    pub xi: f64,
    /// Absolute trigger time.
    pub at: f64,
    /// The inequality already failed at the first grid point.
    pub degenerate: bool,
    /// The inequality never failed before `XiSearch::max`.
    pub capped: bool,
}

/// Couples a threshold with the bound generator for deadline planning.
pub struct DeadlinePlanner<'a> {
    pub threshold: DiscreteThreshold,
    pub pinning_gain: f64,
    pub bounds: &'a dyn BoundGenerator,
    pub search: XiSearch,
}

impl DeadlinePlanner<'_> {
    fn holds(&self, ctx: &RuleContext, xi: f64) -> bool {
        let lhs = ctx.carried + ctx.drift_bound(xi, self.pinning_gain, self.bounds);
        let rhs = match self.threshold {
            DiscreteThreshold::State { coeff } => {
                let v = ctx.target_distance_bound(xi, self.bounds);
                if v == 0.0 {
                    0.0
                } else {
                    coeff * v
                }
            }
            DiscreteThreshold::Exponential { a, b } => a * (-b * (xi + ctx.anchor_time)).exp(),
        };
        lhs <= rhs
    }

    /// Largest `ξ` before the first violation of the deadline inequality:
    /// forward march on the grid, then bisection to `grid / 100`.
    pub fn plan(&self, ctx: &RuleContext) -> Deadline {
        let XiSearch { grid, min, max } = self.search;
        let done = |xi: f64, degenerate: bool, capped: bool| Deadline {
            xi,
            at: ctx.anchor_time + xi,
            degenerate,
            capped,
        };

        let mut ok_at = 0.0;
        let mut k = 1u64;
        let violated_at = loop {
            let xi = k as f64 * grid;
            if xi >= max {
                if self.holds(ctx, max) {
                    return done(max, false, true);
                }
                break max;
            }
            if !self.holds(ctx, xi) {
                break xi;
            }
            ok_at = xi;
            k += 1;
        };

        let (mut lo, mut hi) = (ok_at, violated_at);
        let tol = grid / 100.0;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.holds(ctx, mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if lo < min {
            log::warn!(
                "node {}: deadline inequality fails within {min} s of t = {}; triggering after one step",
                ctx.node + 1,
                ctx.anchor_time
            );
            return done(min, true, false);
        }
        done(lo, false, false)
    }
}

/// Deadline under the state-relative discrete rule.
pub fn rule3_next_interval(
    ctx: &RuleContext,
    coeff: f64,
    pinning_gain: f64,
    bounds: &dyn BoundGenerator,
    search: XiSearch,
) -> Deadline {
    DeadlinePlanner {
        threshold: DiscreteThreshold::State { coeff },
        pinning_gain,
        bounds,
        search,
    }
    .plan(ctx)
}

/// Deadline under the exponential discrete rule.
pub fn rule4_next_interval(
    ctx: &RuleContext,
    a: f64,
    b: f64,
    pinning_gain: f64,
    bounds: &dyn BoundGenerator,
    search: XiSearch,
) -> Deadline {
    DeadlinePlanner {
        threshold: DiscreteThreshold::Exponential { a, b },
        pinning_gain,
        bounds,
        search,
    }
    .plan(ctx)
}

/// Per-node trigger bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTriggerState {
    pub node: usize,
    /// Time of the last control update (`t_k^i`).
    pub last_event_time: f64,
    pub held: HeldSnapshot,
    pub theta: Vec<f64>,
    /// Discrete monitoring only.
    pub context: Option<RuleContext>,
    pub deadline: Option<Deadline>,
}

impl NodeTriggerState {
    pub fn new(
        node: usize,
        mode: &GraphMode,
        t: f64,
        states: &[f64],
        target: &[f64],
        params: &CouplingParams,
    ) -> Result<Self> {
        let held = HeldSnapshot::capture(node, mode, states, target);
        let theta = compute_theta(node, mode, &held, params)?;
        Ok(Self {
            node,
            last_event_time: t,
            held,
            theta,
            context: None,
            deadline: None,
        })
    }

    /// Samples fresh states and recomputes the held control.
    pub fn update_control(
        &mut self,
        mode: &GraphMode,
        t: f64,
        states: &[f64],
        target: &[f64],
        params: &CouplingParams,
    ) -> Result<()> {
        self.held = HeldSnapshot::capture(self.node, mode, states, target);
        self.theta = compute_theta(self.node, mode, &self.held, params)?;
        self.last_event_time = t;
        Ok(())
    }

    /// Rebuilds the discrete rule context at `t` and plans the deadline.
    pub fn plan(
        &mut self,
        mode: &GraphMode,
        t: f64,
        states: &[f64],
        target: &[f64],
        thetas: &[Vec<f64>],
        planner: &DeadlinePlanner<'_>,
    ) -> Deadline {
        let ctx = RuleContext::build(self.node, mode, t, states, target, thetas);
        let deadline = planner.plan(&ctx);
        self.context = Some(ctx);
        self.deadline = Some(deadline);
        deadline
    }

    /// Neighbors announced new controls at `t`: swap them into the rule,
    /// re-anchor once at `t` and re-plan. The held control is untouched.
    #[allow(clippy::too_many_arguments)]
    pub fn on_broadcasts(
        &mut self,
        announced: &[(usize, Vec<f64>)],
        mode: &GraphMode,
        t: f64,
        states: &[f64],
        target: &[f64],
        params: &CouplingParams,
        planner: &DeadlinePlanner<'_>,
    ) -> Result<Deadline> {
        let z = compute_zi(self.node, mode, states, target, &self.held, params)?;
        let ctx = self.context.as_mut().ok_or_else(|| {
            Error::Internal(format!("node {} has no discrete rule context", self.node + 1))
        })?;
        for (j, theta) in announced {
            ctx.receive_broadcast(*j, theta)?;
        }
        ctx.reanchor(t, states, target, norm(&z));
        let deadline = planner.plan(ctx);
        self.deadline = Some(deadline);
        Ok(deadline)
    }

    /// Chain switched at `t`: recompute the held control against the new
    /// mode from current states. Discrete contexts must be rebuilt with
    /// [`NodeTriggerState::plan`] once every node has switched.
    pub fn on_mode_switch(
        &mut self,
        mode: &GraphMode,
        t: f64,
        states: &[f64],
        target: &[f64],
        params: &CouplingParams,
    ) -> Result<()> {
        self.update_control(mode, t, states, target, params)
    }
}

/// Lower bound on the expected inter-event interval under the exponential
/// rule: `(1/b) ln(1 + 1/(A + B))`.
pub fn zeno_lower_bound(
    nodes: usize,
    lipschitz: f64,
    coupling: f64,
    pinning_gain: f64,
    a: f64,
    b: f64,
) -> Result<f64> {
    if nodes == 0 || !(lipschitz >= 0.0) || !(coupling >= 0.0) || !(pinning_gain >= 0.0) {
        return Err(Error::InvalidParameter(
            "zeno bound needs m >= 1 and nonnegative L_f, c, epsilon".into(),
        ));
    }
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "zeno bound needs a > 0 and b > 0, got a = {a}, b = {b}"
        )));
    }
    let m = nodes as f64;
    let big_a = (2.0 * m * lipschitz
        + 2.0 * coupling * m * (m + pinning_gain)
        + lipschitz
        + coupling * m)
        / (a * b);
    let big_b = (2.0 * m + 1.0) / b;
    Ok((1.0 / (big_a + big_b)).ln_1p() / b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{BoundConstants, ClosedFormBounds};
    use approx::assert_abs_diff_eq;

    fn params(c: f64, eps: f64, n: usize) -> CouplingParams {
        CouplingParams {
            coupling: c,
            pinning_gain: eps,
            gamma: DMatrix::identity(n, n),
        }
    }

    #[test]
    fn rule_names_round_trip() {
        for r in Rule::ALL {
            assert_eq!(r.as_str().parse::<Rule>().unwrap(), r);
        }
        assert!("fast".parse::<Rule>().is_err());
    }

    #[test]
    fn theta_zero_at_consensus_on_target() {
        let mode = GraphMode::from_edges(&[(0, 1), (1, 2)], 3, &[1]).unwrap();
        let s = [0.3, -0.2];
        let states: Vec<f64> = s.iter().cycle().take(6).copied().collect();
        for i in 0..3 {
            let held = HeldSnapshot::capture(i, &mode, &states, &s);
            assert_eq!(compute_theta(i, &mode, &held, &params(3.0, 0.7, 2)).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn theta_single_link_pulls_toward_neighbor() {
        let mode = GraphMode::from_edges(&[(0, 1)], 2, &[]).unwrap();
        let states = [0.0, 0.0, 1.0, 0.0];
        let held = HeldSnapshot::capture(0, &mode, &states, &[0.0, 0.0]);
        assert_eq!(compute_theta(0, &mode, &held, &params(1.0, 0.0, 2)).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn theta_isolated_pinned_node() {
        let mode = GraphMode::from_edges(&[], 1, &[0]).unwrap();
        let held = HeldSnapshot::capture(0, &mode, &[1.0, 0.0], &[0.0, 0.0]);
        assert_eq!(compute_theta(0, &mode, &held, &params(2.0, 0.5, 2)).unwrap(), vec![-1.0, 0.0]);
    }

    #[test]
    fn theta_missing_neighbor_snapshot() {
        let mode = GraphMode::from_edges(&[(0, 1)], 2, &[]).unwrap();
        let held = HeldSnapshot {
            own: vec![0.0],
            target: vec![0.0],
            neighbors: vec![],
        };
        assert!(matches!(
            compute_theta(0, &mode, &held, &params(1.0, 0.0, 1)),
            Err(Error::MissingSnapshot { node: 1, neighbor: 2 })
        ));
    }

    #[test]
    fn zi_vanishes_at_anchor_and_for_isolated_nodes() {
        let mode = GraphMode::from_edges(&[(0, 1)], 3, &[0]).unwrap();
        let states = [0.5, 1.0, -1.0, 2.0, 3.0, 0.0];
        let target = [0.1, 0.2];
        for i in 0..3 {
            let held = HeldSnapshot::capture(i, &mode, &states, &target);
            assert_eq!(compute_zi(i, &mode, &states, &target, &held, &params(2.0, 0.5, 2)).unwrap(), vec![0.0, 0.0]);
        }
        let held = HeldSnapshot::capture(2, &mode, &states, &target);
        let moved = [9.0, 9.0, 9.0, 9.0, 7.0, -7.0];
        assert_eq!(compute_zi(2, &mode, &moved, &[5.0, 5.0], &held, &params(2.0, 0.5, 2)).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn zi_linked_pair_by_substitution() {
        let mode = GraphMode::from_edges(&[(0, 1)], 2, &[]).unwrap();
        let then = [0.0, 0.0, 1.0, 2.0];
        let now = [0.5, 0.0, 3.0, 1.0];
        let held = HeldSnapshot::capture(0, &mode, &then, &[0.0, 0.0]);
        let z = compute_zi(0, &mode, &now, &[0.0, 0.0], &held, &params(1.0, 0.0, 2)).unwrap();
        // L_12 = −1: z_1 = −[(x2 − x1)(t) − (x2 − x1)(t_k)] = −[(2.5, 1) − (1, 2)]
        assert_eq!(z, vec![-1.5, 1.0]);
    }

    #[test]
    fn rule_checks_keep_equality() {
        assert!(!rule1_check(0.0, 1.0, 0.27));
        assert!(rule1_check(0.3, 1.0, 0.27));
        assert!(!rule1_check(0.0, 0.0, 0.27));
        assert!(!rule2_check(0.0, 3.0, 0.5, 0.5));
        assert!(!rule2_check(0.5, 0.0, 0.5, 0.5));
        // a e^{-bt} = 0.5 at t = ln 2 / b
        let t = 2f64.ln() / 0.5;
        assert!(rule2_check(0.6, t, 1.0, 0.5));
        assert!(!rule2_check(0.4, t, 1.0, 0.5));
    }

    #[test]
    fn zeno_bound_small_case() {
        let v = zeno_lower_bound(1, 1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(v, (10.0f64 / 9.0).ln(), epsilon = 1e-12);
        let mut prev = v;
        for m in [2, 10, 100, 1000] {
            let next = zeno_lower_bound(m, 1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
            assert!(next < prev && next > 0.0);
            prev = next;
        }
        assert!(prev < 1e-5);
        assert!(zeno_lower_bound(1, 1.0, 1.0, 0.0, 0.0, 1.0).is_err());
    }

    fn closed(lf: f64, sigma: f64) -> ClosedFormBounds {
        ClosedFormBounds(BoundConstants::new(lf, sigma, None).unwrap())
    }

    #[test]
    fn zero_mismatch_caps_deadline() {
        let mode = GraphMode::from_edges(&[(0, 1)], 2, &[0]).unwrap();
        let s = [0.2, 0.3];
        let states = [0.2, 0.3, 0.2, 0.3];
        let thetas = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let ctx = RuleContext::build(0, &mode, 0.0, &states, &s, &thetas);
        let bounds = closed(18.0, -9.9);
        let search = XiSearch::for_step(1e-3);
        let d3 = rule3_next_interval(&ctx, 0.19, 0.5, &bounds, search);
        assert!(d3.capped && d3.xi == 1.0);
        let d4 = rule4_next_interval(&ctx, 0.5, 0.5, 0.5, &bounds, search);
        assert!(d4.capped && d4.xi == 1.0);
    }

    #[test]
    fn isolated_pinned_node_has_positive_deadline() {
        let mode = GraphMode::from_edges(&[], 1, &[0]).unwrap();
        let ctx = RuleContext::build(0, &mode, 0.0, &[1.0, 0.0], &[0.0, 0.0], &[vec![0.0, 0.0]]);
        let d = rule3_next_interval(&ctx, 0.19, 0.5, &closed(2.0, -1.0), XiSearch::for_step(1e-3));
        assert!(d.xi > 0.0 && !d.degenerate);
    }

    #[test]
    fn degenerate_start_returns_min() {
        // node on target but neighbor far away: LHS grows at once, RHS is 0.
        let mode = GraphMode::from_edges(&[(0, 1)], 2, &[]).unwrap();
        let states = [0.0, 5.0];
        let ctx = RuleContext::build(0, &mode, 2.0, &states, &[0.0], &[vec![0.0], vec![1.0]]);
        let d = rule3_next_interval(&ctx, 0.19, 0.5, &closed(2.0, -1.0), XiSearch::for_step(1e-3));
        assert!(d.degenerate);
        assert_eq!(d.xi, 1e-3);
        assert_abs_diff_eq!(d.at, 2.001, epsilon = 1e-15);
    }

    #[test]
    fn broadcast_requires_neighbor() {
        let mode = GraphMode::from_edges(&[(0, 1)], 3, &[]).unwrap();
        let states = [0.0, 1.0, 2.0];
        let thetas = vec![vec![0.0]; 3];
        let mut ctx = RuleContext::build(0, &mode, 0.0, &states, &[0.0], &thetas);
        assert!(ctx.receive_broadcast(2, &[1.0]).is_err());
        ctx.receive_broadcast(1, &[4.0]).unwrap();
        assert_eq!(ctx.neighbors[0].theta, vec![4.0]);
    }
}
