//! Reciprocal barriers, the switch `σ_μ`, and quadratic safe sets.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BarrierError {
    #[error("barrier value {h} is not positive")]
    NonPositiveBarrier { h: f64 },
    #[error("matrix is not positive definite (smallest eigenvalue {min_eig})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error("invalid barrier parameter: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ramp {
    /// `1 - s/μ`
    #[default]
    Linear,
    /// `(1 + cos(π s/μ)) / 2`
    Cosine,
}

/// `σ_μ(s)`: 1 below zero, 0 above `μ`, a decreasing ramp in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchFunction {
    pub mu: f64,
    #[serde(default)]
    pub ramp: Ramp,
}

impl SwitchFunction {
    pub fn new(mu: f64, ramp: Ramp) -> Result<Self, BarrierError> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(BarrierError::Invalid(format!("switch width {mu} must be positive")));
        }
        Ok(Self { mu, ramp })
    }

    pub fn linear(mu: f64) -> Self {
        Self::new(mu, Ramp::Linear).expect("positive mu")
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s >= self.mu {
            0.0
        } else if s <= 0.0 {
            1.0
        } else {
            match self.ramp {
                Ramp::Linear => 1.0 - s / self.mu,
                Ramp::Cosine => 0.5 * (1.0 + (std::f64::consts::PI * s / self.mu).cos()),
            }
        }
    }

    /// Derivative on the open ramp, 0 elsewhere.
    pub fn deriv(&self, s: f64) -> f64 {
        if s >= self.mu || s <= 0.0 {
            return 0.0;
        }
        match self.ramp {
            Ramp::Linear => -1.0 / self.mu,
            Ramp::Cosine => {
                let w = std::f64::consts::PI / self.mu;
                -0.5 * w * (w * s).sin()
            }
        }
    }
}

pub fn sigma(s: f64, sw: &SwitchFunction) -> f64 {
    sw.eval(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReciprocalBarrier {
    /// `1/h`
    #[default]
    Inverse,
    /// `-ln(h / (1 + h))`
    LogRatio,
}

impl ReciprocalBarrier {
    /// `(β, dβ/dh, d²β/dh²)`.
    pub fn eval(&self, h: f64) -> Result<(f64, f64, f64), BarrierError> {
        if !(h > 0.0) {
            return Err(BarrierError::NonPositiveBarrier { h });
        }
        Ok(match self {
            Self::Inverse => (1.0 / h, -1.0 / (h * h), 2.0 / (h * h * h)),
            Self::LogRatio => {
                let hp = 1.0 + h;
                ((hp / h).ln(), -1.0 / (h * hp), (2.0 * h + 1.0) / (h * h * hp * hp))
            }
        })
    }
}

pub fn beta_eval(h: f64, b: ReciprocalBarrier) -> Result<(f64, f64, f64), BarrierError> {
    b.eval(h)
}

/// `h(z) = zᵀAz + bᵀz + c` with symmetric `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticBarrier {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: f64,
    pub label: String,
}

impl QuadraticBarrier {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: f64, label: impl Into<String>) -> Result<Self, BarrierError> {
        let d = a.nrows();
        if a.ncols() != d || b.len() != d {
            return Err(BarrierError::Invalid(format!("shape A {}x{}, b {}", a.nrows(), a.ncols(), b.len())));
        }
        if (&a - a.transpose()).amax() > 1e-12 * (1.0 + a.amax()) {
            return Err(BarrierError::Invalid("A must be symmetric".into()));
        }
        Ok(Self { a, b, c, label: label.into() })
    }

    /// `peak · (1 - (z-c)ᵀP(z-c))` with `P` positive definite.
    pub fn ellipsoid(center: &DVector<f64>, p: &DMatrix<f64>, peak: f64, label: impl Into<String>) -> Result<Self, BarrierError> {
        check_pd(p)?;
        if !(peak > 0.0) {
            return Err(BarrierError::Invalid(format!("peak {peak} must be positive")));
        }
        let a = -p * peak;
        let b = p * center * (2.0 * peak);
        let c = peak * (1.0 - (center.transpose() * p * center)[(0, 0)]);
        Self::new(a, b, c, label)
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        let z = DVector::from_column_slice(z);
        (z.transpose() * &self.a * &z)[(0, 0)] + self.b.dot(&z) + self.c
    }

    pub fn grad(&self, z: &[f64]) -> DVector<f64> {
        let z = DVector::from_column_slice(z);
        &self.a * z * 2.0 + &self.b
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        &self.a * 2.0
    }

    /// Center, normalized shape `P` and peak value, when `A ≺ 0`.
    pub fn center_form(&self) -> Option<(DVector<f64>, DMatrix<f64>, f64)> {
        let neg = -&self.a;
        check_pd(&neg).ok()?;
        let center = neg.clone().cholesky()?.solve(&self.b) * 0.5;
        let peak = self.c + (center.transpose() * &neg * &center)[(0, 0)];
        if !(peak > 0.0) {
            return None;
        }
        Some((center, neg / peak, peak))
    }
}

/// `r2 - Σ_{i∈selector} zᵢ²` over a `dim`-dimensional position vector.
pub fn make_sphere_barrier(r2: f64, selector: &[usize], dim: usize) -> Result<QuadraticBarrier, BarrierError> {
    if !(r2 > 0.0 && r2.is_finite()) {
        return Err(BarrierError::Invalid(format!("radius squared {r2} must be positive")));
    }
    if selector.is_empty() || selector.iter().any(|&i| i >= dim) {
        return Err(BarrierError::Invalid(format!("selector {selector:?} out of range for dimension {dim}")));
    }
    let mut a = DMatrix::zeros(dim, dim);
    for &i in selector {
        a[(i, i)] = -1.0;
    }
    QuadraticBarrier::new(a, DVector::zeros(dim), r2, format!("sphere r2={r2} on {selector:?}"))
}

pub fn check_pd(p: &DMatrix<f64>) -> Result<(), BarrierError> {
    if p.nrows() != p.ncols() || p.nrows() == 0 {
        return Err(BarrierError::Invalid("matrix must be square and nonempty".into()));
    }
    let min_eig = SymmetricEigen::new(p.clone()).eigenvalues.min();
    if min_eig > 0.0 {
        Ok(())
    } else {
        Err(BarrierError::NotPositiveDefinite { min_eig })
    }
}

/// Velocity barrier `h_v = c - e₂ᵀ A_v e₂` with `e₂ = x₂ - x₂ᵣ(x₁)` and the
/// backstepping reference `x₂ᵣ = -κ_x σ(h) β'(h) ∇h` of a position barrier `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityBarrier {
    pub c: f64,
    pub a_v: DMatrix<f64>,
    pub position: QuadraticBarrier,
    pub kappa_x: f64,
    pub switch_x: SwitchFunction,
    pub beta_x: ReciprocalBarrier,
}

impl VelocityBarrier {
    pub fn new(
        c: f64,
        a_v: DMatrix<f64>,
        position: QuadraticBarrier,
        kappa_x: f64,
        switch_x: SwitchFunction,
        beta_x: ReciprocalBarrier,
    ) -> Result<Self, BarrierError> {
        check_pd(&a_v)?;
        if a_v.nrows() != position.dim() {
            return Err(BarrierError::Invalid("A_v and position barrier dimensions differ".into()));
        }
        if !(c > 0.0) || !(kappa_x >= 0.0) {
            return Err(BarrierError::Invalid(format!("need c > 0 and kappa_x >= 0, got {c}, {kappa_x}")));
        }
        Ok(Self { c, a_v, position, kappa_x, switch_x, beta_x })
    }

    pub fn n(&self) -> usize {
        self.position.dim()
    }

    pub fn x2_reference(&self, x1: &[f64]) -> Result<DVector<f64>, BarrierError> {
        let h = self.position.eval(x1);
        let (_, d1, _) = self.beta_x.eval(h)?;
        let s = self.switch_x.eval(h);
        if s == 0.0 || self.kappa_x == 0.0 {
            return Ok(DVector::zeros(self.n()));
        }
        Ok(self.position.grad(x1) * (-self.kappa_x * s * d1))
    }

    /// `∂x₂ᵣ/∂x₁`.
    pub fn x2_reference_jacobian(&self, x1: &[f64]) -> Result<DMatrix<f64>, BarrierError> {
        let h = self.position.eval(x1);
        let (_, d1, d2) = self.beta_x.eval(h)?;
        let s = self.switch_x.eval(h);
        let ds = self.switch_x.deriv(h);
        let g = self.position.grad(x1);
        let outer = &g * g.transpose();
        Ok((outer * (ds * d1 + s * d2) + self.position.hessian() * (s * d1)) * (-self.kappa_x))
    }

    pub fn e2(&self, x: &[f64]) -> Result<DVector<f64>, BarrierError> {
        let n = self.n();
        Ok(DVector::from_column_slice(&x[n..2 * n]) - self.x2_reference(&x[..n])?)
    }

    pub fn eval_e2(&self, e2: &DVector<f64>) -> f64 {
        self.c - (e2.transpose() * &self.a_v * e2)[(0, 0)]
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, BarrierError> {
        Ok(self.eval_e2(&self.e2(x)?))
    }

    /// `∇_{x₂} h_v = -2 A_v e₂`.
    pub fn grad_x2(&self, x: &[f64]) -> Result<DVector<f64>, BarrierError> {
        Ok(&self.a_v * self.e2(x)? * -2.0)
    }

    /// `∇_{x₁} h_v = 2 (∂x₂ᵣ/∂x₁)ᵀ A_v e₂`.
    pub fn grad_x1(&self, x: &[f64]) -> Result<DVector<f64>, BarrierError> {
        let n = self.n();
        let jac = self.x2_reference_jacobian(&x[..n])?;
        Ok(jac.transpose() * (&self.a_v * self.e2(x)?) * 2.0)
    }

    /// `h_v` as a quadratic function of `e₂`.
    pub fn as_quadratic(&self) -> QuadraticBarrier {
        QuadraticBarrier::new(-self.a_v.clone(), DVector::zeros(self.n()), self.c, "h_v")
            .expect("A_v is symmetric")
    }
}

pub fn make_velocity_barrier(
    radius2: f64,
    position: QuadraticBarrier,
    kappa_x: f64,
    switch_x: SwitchFunction,
    beta_x: ReciprocalBarrier,
) -> Result<VelocityBarrier, BarrierError> {
    let n = position.dim();
    VelocityBarrier::new(radius2, DMatrix::identity(n, n), position, kappa_x, switch_x, beta_x)
}
