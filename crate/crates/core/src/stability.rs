//! Mode-wise matrix inequality certificate and the spectral constants that
//! feed the trigger thresholds.

use nalgebra::DMatrix;

use crate::dynamics::QuadParams;
use crate::error::{Error, Result};
use crate::linalg::{max_asymmetry, symmetric_part, JacobiEigen};
use crate::topology::SwitchingNetwork;

/// Default slack on negative semidefiniteness.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Diagonal entries of `P(u)` for every mode.
pub type PFamily = [Vec<f64>];

/// Everything the condition matrix depends on.
#[derive(Debug, Clone, Copy)]
pub struct ConditionInputs<'a> {
    pub net: &'a SwitchingNetwork,
    pub p: &'a PFamily,
    pub quad: &'a QuadParams,
    pub coupling: f64,
    pub pinning_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    /// `λ_max` of each mode's condition matrix.
    pub margins: Vec<f64>,
    pub feasible: bool,
    pub tolerance: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    /// Rule-(state) threshold, when `δ` was supplied.
    pub threshold_coeff: Option<f64>,
}

impl StabilityCertificate {
    pub fn worst_margin(&self) -> f64 {
        self.margins
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn with_threshold(mut self, beta: f64, delta: f64, coupling: f64) -> Result<Self> {
        self.threshold_coeff = Some(threshold_coefficient(
            beta,
            self.lambda_lo,
            self.lambda_hi,
            delta,
            coupling,
        )?);
        Ok(self)
    }
}

fn check_p_family(net: &SwitchingNetwork, p: &PFamily) -> Result<()> {
    let m = net.nodes();
    if p.len() != net.mode_count() {
        return Err(Error::DimensionMismatch(format!(
            "{} P matrices for {} modes",
            p.len(),
            net.mode_count()
        )));
    }
    for (u, diag) in p.iter().enumerate() {
        if diag.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "P({}) has {} entries, network has {m} nodes",
                u + 1,
                diag.len()
            )));
        }
        if let Some(&bad) = diag.iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::NotPositiveDefinite(bad));
        }
    }
    Ok(())
}

/// `sym(P(u)[αI − cL(u) − cεD(u)] ⊗ GΓ) + ½ Σ_v q_uv P(v) ⊗ G`.
pub fn condition_matrix(inputs: &ConditionInputs<'_>, mode: usize) -> Result<DMatrix<f64>> {
    let ConditionInputs {
        net,
        p,
        quad,
        coupling,
        pinning_gain,
    } = *inputs;
    check_p_family(net, p)?;
    quad.validate()?;
    if mode >= net.mode_count() {
        return Err(Error::InvalidParameter(format!("mode {} out of range", mode + 1)));
    }
    let m = net.nodes();
    let graph = &net.modes[mode];

    let pu = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&p[mode]));
    let inner = DMatrix::<f64>::identity(m, m) * quad.alpha
        - &graph.laplacian * coupling
        - graph.pinning_matrix() * (coupling * pinning_gain);
    let g_gamma = &quad.g * &quad.gamma;
    let mut out = symmetric_part(&(pu * inner).kronecker(&g_gamma));

    for v in 0..net.mode_count() {
        let q = net.generator[(mode, v)];
        if q == 0.0 {
            continue;
        }
        let pv = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&p[v]));
        out += pv.kronecker(&quad.g) * (0.5 * q);
    }
    Ok(out)
}

/// Verifies the condition matrix is negative semidefinite (within `tol`) in
/// every mode.
pub fn check_condition(inputs: &ConditionInputs<'_>, tol: f64) -> Result<StabilityCertificate> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be >= 0, got {tol}")));
    }
    let mut margins = Vec::with_capacity(inputs.net.mode_count());
    for u in 0..inputs.net.mode_count() {
        let mat = condition_matrix(inputs, u)?;
        let asym = max_asymmetry(&mat);
        if asym > SYMMETRY_TOLERANCE {
            return Err(Error::Internal(format!(
                "condition matrix for mode {} is not symmetric (off by {asym:e})",
                u + 1
            )));
        }
        margins.push(JacobiEigen::new(&mat)?.max());
    }
    let (lambda_lo, lambda_hi) = lambda_bounds(inputs.p, &inputs.quad.g)?;
    let feasible = margins.iter().all(|&x| x <= tol);
    Ok(StabilityCertificate {
        margins,
        feasible,
        tolerance: tol,
        lambda_lo,
        lambda_hi,
        threshold_coeff: None,
    })
}

/// `(min_v λ_min(P(v) ⊗ G), max_v λ_max(P(v) ⊗ G))`.
///
/// The Kronecker spectrum is the set of pairwise products, so only `G` needs
/// an eigen-decomposition.
pub fn lambda_bounds(p: &PFamily, g: &DMatrix<f64>) -> Result<(f64, f64)> {
    let g_eig = JacobiEigen::new(g)?;
    let (g_lo, g_hi) = (g_eig.min(), g_eig.max());
    if g_lo <= 0.0 {
        return Err(Error::NotPositiveDefinite(g_lo));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for diag in p {
        for &x in diag {
            if !(x > 0.0) {
                return Err(Error::NotPositiveDefinite(x));
            }
            lo = lo.min(x * g_lo);
            hi = hi.max(x * g_hi);
        }
    }
    if !lo.is_finite() {
        return Err(Error::InvalidParameter("empty P family".into()));
    }
    Ok((lo, hi))
}

/// Largest admissible `δ`: `2βλ̲/λ̄`.
pub fn max_delta(beta: f64, lambda_lo: f64, lambda_hi: f64) -> f64 {
    2.0 * beta * lambda_lo / lambda_hi
}

/// Relative-threshold coefficient `(βλ̲ − δλ̄/2) / (√c λ̄)`.
pub fn threshold_coefficient(
    beta: f64,
    lambda_lo: f64,
    lambda_hi: f64,
    delta: f64,
    coupling: f64,
) -> Result<f64> {
    if !(coupling > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "coupling strength must be positive, got {coupling}"
        )));
    }
    let max = max_delta(beta, lambda_lo, lambda_hi);
    if !(delta > 0.0 && delta <= max) {
        return Err(Error::DeltaOutOfRange { delta, max });
    }
    Ok((beta * lambda_lo - 0.5 * delta * lambda_hi) / (coupling.sqrt() * lambda_hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::GraphMode;
    use approx::assert_abs_diff_eq;

    fn pair(pinned: &[usize]) -> SwitchingNetwork {
        SwitchingNetwork::single(GraphMode::from_edges(&[(0, 1)], 2, pinned).unwrap())
    }

    fn inputs<'a>(net: &'a SwitchingNetwork, p: &'a [Vec<f64>], quad: &'a QuadParams) -> ConditionInputs<'a> {
        ConditionInputs {
            net,
            p,
            quad,
            coupling: 20.0,
            pinning_gain: 0.5,
        }
    }

    #[test]
    fn pin_one_node_matrix_and_verdict() {
        let net = pair(&[0]);
        let p = vec![vec![1.0, 1.0]];
        let quad = QuadParams::identity(1, 10.0, 1.0);
        let mat = condition_matrix(&inputs(&net, &p, &quad), 0).unwrap();
        assert_eq!(mat, DMatrix::from_row_slice(2, 2, &[-20.0, 20.0, 20.0, -10.0]));
        let cert = check_condition(&inputs(&net, &p, &quad), DEFAULT_TOLERANCE).unwrap();
        assert!(!cert.feasible);
        assert_abs_diff_eq!(cert.margins[0], (-30.0 + 1700f64.sqrt()) / 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(cert.margins[0], 5.616, epsilon = 1e-3);
    }

    #[test]
    fn pin_both_nodes_is_minus_twenty_laplacian() {
        let net = pair(&[0, 1]);
        let p = vec![vec![1.0, 1.0]];
        let quad = QuadParams::identity(1, 10.0, 1.0);
        let mat = condition_matrix(&inputs(&net, &p, &quad), 0).unwrap();
        assert_eq!(mat, &net.modes[0].laplacian * -20.0);
        let cert = check_condition(&inputs(&net, &p, &quad), DEFAULT_TOLERANCE).unwrap();
        assert!(cert.feasible);
        assert_abs_diff_eq!(cert.margins[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn static_identity_case_is_kron_with_identity() {
        let net = pair(&[0]);
        let p = vec![vec![1.0, 1.0]];
        let quad = QuadParams::identity(3, 10.0, 1.0);
        let mat = condition_matrix(&inputs(&net, &p, &quad), 0).unwrap();
        let reduced = DMatrix::from_row_slice(2, 2, &[-20.0, 20.0, 20.0, -10.0]);
        assert_eq!(mat, reduced.kronecker(&DMatrix::identity(3, 3)));
    }

    #[test]
    fn generator_term_enters_with_half_weight() {
        let mode = GraphMode::from_edges(&[], 1, &[]).unwrap();
        let net = SwitchingNetwork::new(
            vec![mode.clone(), mode],
            DMatrix::from_row_slice(2, 2, &[-2.0, 2.0, 1.0, -1.0]),
        )
        .unwrap();
        let p = vec![vec![1.0], vec![3.0]];
        let quad = QuadParams::identity(1, 0.0, 1.0);
        let inp = ConditionInputs {
            net: &net,
            p: &p,
            quad: &quad,
            coupling: 1.0,
            pinning_gain: 0.0,
        };
        // 0.5 * (-2 * 1 + 2 * 3) = 2
        assert_abs_diff_eq!(condition_matrix(&inp, 0).unwrap()[(0, 0)], 2.0);
        // 0.5 * (1 * 1 - 1 * 3) = -1
        assert_abs_diff_eq!(condition_matrix(&inp, 1).unwrap()[(0, 0)], -1.0);
    }

    #[test]
    fn dimension_errors() {
        let net = pair(&[0]);
        let quad = QuadParams::identity(1, 10.0, 1.0);
        let p = vec![vec![1.0, 1.0, 1.0]];
        assert!(matches!(
            condition_matrix(&inputs(&net, &p, &quad), 0),
            Err(Error::DimensionMismatch(_))
        ));
        let p = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert!(condition_matrix(&inputs(&net, &p, &quad), 0).is_err());
    }

    #[test]
    fn lambda_bound_cases() {
        let i1 = DMatrix::<f64>::identity(2, 2);
        assert_eq!(lambda_bounds(&[vec![1.0, 1.0], vec![1.0, 1.0]], &i1).unwrap(), (1.0, 1.0));
        assert_eq!(lambda_bounds(&[vec![1.0, 2.0]], &i1).unwrap(), (1.0, 2.0));
        let g = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 4.0]);
        let (lo, hi) = lambda_bounds(&[vec![1.0, 2.0]], &g).unwrap();
        assert_abs_diff_eq!(lo, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 8.0, epsilon = 1e-12);
        assert!(matches!(
            lambda_bounds(&[vec![1.0, 0.0]], &i1),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn threshold_coefficient_cases() {
        assert_abs_diff_eq!(threshold_coefficient(1.0, 1.0, 1.0, 2.0, 1.0).unwrap(), 0.0);
        let at_c20 = threshold_coefficient(0.8803, 1.0, 1.0, 0.03, 20.0).unwrap();
        assert_abs_diff_eq!(at_c20, 0.865_3 / 20f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(at_c20, 0.19349, epsilon = 1e-5);
        let at_c10 = threshold_coefficient(0.8803, 1.0, 1.0, 0.03, 10.0).unwrap();
        assert_abs_diff_eq!(at_c10, 0.27363, epsilon = 1e-5);
        assert!(matches!(
            threshold_coefficient(0.8793, 1.0, 1.0, 1.9, 20.0),
            Err(Error::DeltaOutOfRange { .. })
        ));
        assert!(threshold_coefficient(1.0, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(threshold_coefficient(1.0, 1.0, 1.0, 0.5, 0.0).is_err());
    }
}
