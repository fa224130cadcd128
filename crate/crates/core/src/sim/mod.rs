//! Ground-truth plants, fixed-step integration and the closed loop.

mod nominal;
mod plants;
mod run;

pub use nominal::{make_reference, CascadeGains, NominalController, Reference};
pub use plants::{make_quadrotor, QuadrotorParams, Quadrotor, SquareGPlant};
pub use run::{
    run_closed_loop, EventRow, LogRow, MeasurementRecord, RunOutput, RunSettings, RunSummary, TrajectoryLog,
};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::overapprox::LipschitzBounds;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// `ẋ₁ = x₂, ẋ₂ = f(x) + g(x)u` with `f` and `g` known only to the simulator.
pub trait Plant: Send + Sync + std::fmt::Debug {
    fn n(&self) -> usize;
    fn m(&self) -> usize;
    fn drift(&self, x: &[f64]) -> DVector<f64>;
    fn input_matrix(&self, x: &[f64]) -> DMatrix<f64>;
    /// Declared Lipschitz constants of `f` and `g` on the operating set.
    fn bounds(&self) -> LipschitzBounds;
    fn label(&self) -> String;

    /// Full state derivative `[x₂; f(x) + g(x)u]`.
    fn derivative(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let n = self.n();
        let acc = self.drift(x) + self.input_matrix(x) * DVector::from_column_slice(u);
        x[n..2 * n].iter().copied().chain(acc.iter().copied()).collect()
    }
}

/// Classical RK4 step with `u` held constant.
pub fn rk4_step(plant: &dyn Plant, x: &[f64], u: &[f64], dt: f64) -> Result<Vec<f64>, SimError> {
    let axpy = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> { a.iter().zip(k).map(|(a, k)| a + s * k).collect() };
    let k1 = plant.derivative(x, u);
    let k2 = plant.derivative(&axpy(x, &k1, dt / 2.0), u);
    let k3 = plant.derivative(&axpy(x, &k2, dt / 2.0), u);
    let k4 = plant.derivative(&axpy(x, &k3, dt), u);
    let out: Vec<f64> = (0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(SimError::NonFiniteState { t: f64::NAN })
    }
}
