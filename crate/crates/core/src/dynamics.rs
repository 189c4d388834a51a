//! Node vector fields and the constants the stability analysis needs.
//!
//! Every built-in field is piecewise linear, so its Jacobian takes one of a
//! finite set of values ("regions"). The Lipschitz, one-sided Lipschitz and
//! QUAD constants are all derived from that set.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, symmetric_part, JacobiEigen};

/// Chua circuit parameters. `Default` gives the double-scroll regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChuaParams {
    pub p: f64,
    pub q: f64,
    pub m0: f64,
    pub m1: f64,
}

impl Default for ChuaParams {
    fn default() -> Self {
        Self {
            p: 9.78,
            q: 14.97,
            m0: -1.31,
            m1: -0.75,
        }
    }
}

impl ChuaParams {
    /// Piecewise-linear diode characteristic.
    #[inline]
    pub fn diode(&self, z1: f64) -> f64 {
        self.m1 * z1 + 0.5 * (self.m0 - self.m1) * ((z1 + 1.0).abs() - (z1 - 1.0).abs())
    }
}

#[inline]
pub fn chua_field(params: &ChuaParams, z: &[f64; 3]) -> [f64; 3] {
    [
        params.p * (-z[0] + z[1] - params.diode(z[0])),
        z[0] - z[1] + z[2],
        -params.q * z[1],
    ]
}

/// Jacobians of the Chua field on its two linear pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct ChuaJacobians {
    /// `|z1| > 1`, diode slope `m1`.
    pub outer: DMatrix<f64>,
    /// `|z1| < 1`, diode slope `m0`.
    pub inner: DMatrix<f64>,
}

pub fn chua_jacobians(params: &ChuaParams) -> ChuaJacobians {
    let build = |slope: f64| {
        DMatrix::from_row_slice(
            3,
            3,
            &[
                params.p * (-1.0 - slope),
                params.p,
                0.0,
                1.0,
                -1.0,
                1.0,
                0.0,
                -params.q,
                0.0,
            ],
        )
    };
    ChuaJacobians {
        outer: build(params.m1),
        inner: build(params.m0),
    }
}

/// Registry of built-in node dynamics.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorField {
    Chua(ChuaParams),
    /// `f(x) = A x`.
    Linear(DMatrix<f64>),
}

impl VectorField {
    pub fn name(&self) -> &'static str {
        match self {
            VectorField::Chua(_) => "chua",
            VectorField::Linear(_) => "linear",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            VectorField::Chua(_) => 3,
            VectorField::Linear(a) => a.nrows(),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match self {
            VectorField::Chua(params) => {
                let v = chua_field(params, &[x[0], x[1], x[2]]);
                out[..3].copy_from_slice(&v);
            }
            VectorField::Linear(a) => crate::linalg::matvec(a, x, out),
        }
    }

    pub fn jacobian_regions(&self) -> Vec<DMatrix<f64>> {
        match self {
            VectorField::Chua(params) => {
                let j = chua_jacobians(params);
                vec![j.outer, j.inner]
            }
            VectorField::Linear(a) => vec![a.clone()],
        }
    }
}

fn require_regions(regions: &[DMatrix<f64>]) -> Result<()> {
    if regions.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one Jacobian region is required".into(),
        ));
    }
    Ok(())
}

/// QUAD decrement with `G = Γ = I`: `α - max_k λ_max(sym(A_k))`.
///
/// A nonpositive result is returned as-is (with a warning); callers that
/// need a certificate must reject it.
pub fn estimate_quad_beta(alpha: f64, regions: &[DMatrix<f64>]) -> Result<f64> {
    require_regions(regions)?;
    let mut top = f64::NEG_INFINITY;
    for a in regions {
        top = top.max(JacobiEigen::new(&symmetric_part(a))?.max());
    }
    let beta = alpha - top;
    if beta <= 0.0 {
        log::warn!("QUAD margin nonpositive (beta = {beta}); the certificate does not apply");
    }
    Ok(beta)
}

/// Lipschitz constant: the largest spectral norm over the regions.
pub fn estimate_lipschitz(regions: &[DMatrix<f64>]) -> Result<f64> {
    require_regions(regions)?;
    regions
        .iter()
        .try_fold(0.0f64, |acc, a| Ok(acc.max(spectral_norm(a)?)))
}

/// One-sided Lipschitz constant: the smallest eigenvalue of any region's
/// symmetric part.
pub fn estimate_one_sided(regions: &[DMatrix<f64>]) -> Result<f64> {
    require_regions(regions)?;
    regions.iter().try_fold(f64::INFINITY, |acc, a| {
        Ok(acc.min(JacobiEigen::new(&symmetric_part(a))?.min()))
    })
}

/// Parameters of the QUAD(G, αΓ, β) condition.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadParams {
    pub g: DMatrix<f64>,
    pub alpha: f64,
    pub gamma: DMatrix<f64>,
    pub beta: f64,
}

impl QuadParams {
    /// Identity `G` and `Γ`.
    pub fn identity(n: usize, alpha: f64, beta: f64) -> Self {
        Self {
            g: DMatrix::identity(n, n),
            alpha,
            gamma: DMatrix::identity(n, n),
            beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.g.nrows();
        if self.g.ncols() != n || self.gamma.nrows() != n || self.gamma.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "G is {}x{}, Gamma is {}x{}",
                self.g.nrows(),
                self.g.ncols(),
                self.gamma.nrows(),
                self.gamma.ncols()
            )));
        }
        if crate::linalg::max_asymmetry(&self.g) > 1e-12 {
            return Err(Error::InvalidParameter("G must be symmetric".into()));
        }
        let smallest = JacobiEigen::new(&self.g)?.min();
        if smallest <= 0.0 {
            return Err(Error::NotPositiveDefinite(smallest));
        }
        Ok(())
    }

    /// The certificate needs `α > 0` and `β > 0`.
    pub fn require_positive(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "QUAD requires alpha > 0 and beta > 0, got alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// A node vector field together with its analysis constants.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeDynamics {
    pub field: VectorField,
    pub lipschitz: f64,
    pub one_sided: f64,
    pub quad: QuadParams,
}

impl NodeDynamics {
    /// Derives `L_f`, `σ_os` and (unless `beta` is pinned) `β` from the
    /// field's Jacobian regions, with `G = Γ = I`.
    pub fn derive(field: VectorField, alpha: f64, beta: Option<f64>) -> Result<Self> {
        let regions = field.jacobian_regions();
        let lipschitz = estimate_lipschitz(&regions)?;
        let one_sided = estimate_one_sided(&regions)?;
        let beta = match beta {
            Some(b) => b,
            None => estimate_quad_beta(alpha, &regions)?,
        };
        let n = field.dimension();
        Ok(Self {
            field,
            lipschitz,
            one_sided,
            quad: QuadParams::identity(n, alpha, beta),
        })
    }

    /// Chua nodes with `α = 10` and the computed `β`.
    pub fn chua_benchmark() -> Self {
        Self::derive(VectorField::Chua(ChuaParams::default()), 10.0, None)
            .expect("built-in Chua regions are valid")
    }

    pub fn dimension(&self) -> usize {
        self.field.dimension()
    }
}
