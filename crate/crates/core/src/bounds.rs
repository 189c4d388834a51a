//! Worst-case bounds on pairs of forced node trajectories
//!
//! ```text
//! du/dt = f(u) + θ,  u(0) = u0
//! dv/dt = f(v) + ϑ,  v(0) = v0
//! ```
//!
//! `rho` bounds the relative drift `‖(u(t) − u0) − (v(t) − v0)‖` from above
//! and `varrho` bounds the distance `‖u(t) − v(t)‖` from below. The
//! discrete-monitoring rules predict trigger deadlines from these two maps.

use crate::dynamics::VectorField;
use crate::error::{Error, Result};
use crate::linalg::{distance, norm};

#[derive(Debug, Clone, Copy)]
pub struct BoundInputs<'a> {
    pub t: f64,
    pub theta: &'a [f64],
    pub vartheta: &'a [f64],
    pub u0: &'a [f64],
    pub v0: &'a [f64],
}

/// Field constants used by the closed-form bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub lipschitz: f64,
    pub one_sided: f64,
    /// Free splitting constant in the lower bound, `> 0`.
    pub mu: f64,
}

impl BoundConstants {
    pub fn new(lipschitz: f64, one_sided: f64, mu: Option<f64>) -> Result<Self> {
        let mu = mu.unwrap_or_else(|| default_mu(one_sided));
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
        }
        if !(lipschitz >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Lipschitz constant must be >= 0, got {lipschitz}"
            )));
        }
        Ok(Self {
            lipschitz,
            one_sided,
            mu,
        })
    }
}

/// `max(1, −2σ_os)`.
pub fn default_mu(one_sided: f64) -> f64 {
    (-2.0 * one_sided).max(1.0)
}

/// Gronwall upper bound `((‖θ−ϑ‖ + L‖u0−v0‖)/L)(e^{Lt} − 1)`; for `L = 0`
/// the limit `‖θ−ϑ‖ t`.
pub fn rho_lipschitz(inputs: &BoundInputs<'_>, lipschitz: f64) -> f64 {
    let input_gap = distance(inputs.theta, inputs.vartheta);
    if lipschitz == 0.0 {
        return input_gap * inputs.t;
    }
    let state_gap = distance(inputs.u0, inputs.v0);
    (input_gap + lipschitz * state_gap) / lipschitz * (lipschitz * inputs.t).exp_m1()
}

/// One-sided Lipschitz lower bound, clamped at zero.
pub fn varrho_one_sided(inputs: &BoundInputs<'_>, one_sided: f64, mu: f64) -> f64 {
    let d0 = distance(inputs.u0, inputs.v0);
    let w = distance(inputs.theta, inputs.vartheta);
    let rate = 2.0 * one_sided - mu;
    let t = inputs.t;
    // (e^{rate t} − 1) / rate, with its t → limit at rate = 0.
    let growth = if rate == 0.0 {
        t
    } else {
        (rate * t).exp_m1() / rate
    };
    let squared = (rate * t).exp() * d0 * d0 - (w * w / mu) * growth;
    squared.max(0.0).sqrt()
}

/// Source of `rho`/`varrho` values for the deadline search.
pub trait BoundGenerator: Send + Sync {
    fn rho(&self, inputs: &BoundInputs<'_>) -> f64;
    fn varrho(&self, inputs: &BoundInputs<'_>) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct ClosedFormBounds(pub BoundConstants);

impl BoundGenerator for ClosedFormBounds {
    fn rho(&self, inputs: &BoundInputs<'_>) -> f64 {
        rho_lipschitz(inputs, self.0.lipschitz)
    }

    fn varrho(&self, inputs: &BoundInputs<'_>) -> f64 {
        varrho_one_sided(inputs, self.0.one_sided, self.0.mu)
    }
}

/// Integrates the paired systems numerically and pads the result by
/// `inflation` (multiplies `rho`, divides `varrho`).
#[derive(Debug, Clone)]
pub struct IntegratorBounds {
    pub field: VectorField,
    pub step: f64,
    pub inflation: f64,
}

impl IntegratorBounds {
    fn run(&self, inputs: &BoundInputs<'_>) -> Option<(f64, f64)> {
        if inputs.t <= 0.0 {
            return Some((0.0, distance(inputs.u0, inputs.v0)));
        }
        let steps = (inputs.t / self.step).ceil().max(1.0);
        let h = inputs.t / steps;
        paired_integration_oracle(
            &self.field,
            inputs.theta,
            inputs.vartheta,
            inputs.u0,
            inputs.v0,
            inputs.t,
            h,
        )
        .ok()
    }
}

impl BoundGenerator for IntegratorBounds {
    fn rho(&self, inputs: &BoundInputs<'_>) -> f64 {
        self.run(inputs)
            .map_or(f64::INFINITY, |(dev, _)| dev * self.inflation)
    }

    fn varrho(&self, inputs: &BoundInputs<'_>) -> f64 {
        if inputs.t <= 0.0 {
            return distance(inputs.u0, inputs.v0);
        }
        self.run(inputs)
            .map_or(0.0, |(_, dist)| dist / self.inflation)
    }
}

/// Euler-integrates both forced systems to time `t` and returns
/// `(‖(u(t)−u0) − (v(t)−v0)‖, ‖u(t) − v(t)‖)`.
pub fn paired_integration_oracle(
    field: &VectorField,
    theta: &[f64],
    vartheta: &[f64],
    u0: &[f64],
    v0: &[f64],
    t: f64,
    dt: f64,
) -> Result<(f64, f64)> {
    if !(dt > 0.0) || !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "paired integration needs dt > 0 and t >= 0, got dt = {dt}, t = {t}"
        )));
    }
    let steps = (t / dt).round();
    if (steps * dt - t).abs() > 1e-9 * t.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "dt = {dt} does not divide t = {t}"
        )));
    }
    let n = u0.len();
    let mut u = u0.to_vec();
    let mut v = v0.to_vec();
    let mut fu = vec![0.0; n];
    let mut fv = vec![0.0; n];
    for k in 0..steps as usize {
        field.eval(&u, &mut fu);
        field.eval(&v, &mut fv);
        for d in 0..n {
            u[d] += dt * (fu[d] + theta[d]);
            v[d] += dt * (fv[d] + vartheta[d]);
        }
        if !u.iter().chain(&v).all(|x| x.is_finite()) {
            return Err(Error::BlowUp {
                time: (k + 1) as f64 * dt,
            });
        }
    }
    let drift: Vec<f64> = (0..n).map(|d| (u[d] - u0[d]) - (v[d] - v0[d])).collect();
    Ok((norm(&drift), distance(&u, &v)))
}

/// One randomized comparison of the closed-form bounds with the paired
/// integration oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct SoundnessSample {
    pub t: f64,
    pub theta: Vec<f64>,
    pub vartheta: Vec<f64>,
    pub u0: Vec<f64>,
    pub v0: Vec<f64>,
    pub rho: f64,
    pub deviation: f64,
    pub varrho: f64,
    pub distance: f64,
}

impl SoundnessSample {
    pub fn rho_holds(&self, tol: f64) -> bool {
        self.deviation <= self.rho + tol
    }

    pub fn varrho_holds(&self, tol: f64) -> bool {
        self.distance >= self.varrho - tol
    }
}

/// Draws controls from `U[-control_range, control_range]ⁿ` and initial
/// states from `U[-state_range, state_range]ⁿ`, then evaluates both sides.
#[allow(clippy::too_many_arguments)]
pub fn soundness_sample<R: rand::Rng + ?Sized>(
    field: &VectorField,
    constants: &BoundConstants,
    t: f64,
    oracle_step: f64,
    control_range: f64,
    state_range: f64,
    rng: &mut R,
) -> Result<SoundnessSample> {
    let n = field.dimension();
    let mut draw = |r: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(-r..=r)).collect() };
    let theta = draw(control_range);
    let vartheta = draw(control_range);
    let u0 = draw(state_range);
    let v0 = draw(state_range);
    let inputs = BoundInputs {
        t,
        theta: &theta,
        vartheta: &vartheta,
        u0: &u0,
        v0: &v0,
    };
    let rho = rho_lipschitz(&inputs, constants.lipschitz);
    let varrho = varrho_one_sided(&inputs, constants.one_sided, constants.mu);
    let (deviation, distance) =
        paired_integration_oracle(field, &theta, &vartheta, &u0, &v0, t, oracle_step)?;
    Ok(SoundnessSample {
        t,
        theta,
        vartheta,
        u0,
        v0,
        rho,
        deviation,
        varrho,
        distance,
    })
}
