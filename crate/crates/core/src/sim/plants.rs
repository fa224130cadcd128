use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Plant;
use crate::overapprox::LipschitzBounds;

/// Planar quadrotor: positions `(p_x, p_y, φ)`, inputs are the two rotor thrusts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadrotorParams {
    pub mass: f64,
    pub inertia: f64,
    pub gravity: f64,
    pub arm: f64,
    pub drag_v: f64,
    pub drag_phi: f64,
}

impl Default for QuadrotorParams {
    fn default() -> Self {
        Self { mass: 1.25, inertia: 0.03, gravity: 9.81, arm: 0.5, drag_v: 0.25, drag_phi: 0.02255 }
    }
}

impl QuadrotorParams {
    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quadrotor {
    pub params: QuadrotorParams,
}

pub fn make_quadrotor() -> Quadrotor {
    Quadrotor { params: QuadrotorParams::default() }
}

impl Plant for Quadrotor {
    fn n(&self) -> usize {
        3
    }

    fn m(&self) -> usize {
        2
    }

    fn drift(&self, x: &[f64]) -> DVector<f64> {
        let p = &self.params;
        DVector::from_vec(vec![
            -p.drag_v * x[3] / p.mass,
            -p.gravity - p.drag_v * x[4] / p.mass,
            -p.drag_phi * x[5] / (2.0 * p.inertia),
        ])
    }

    fn input_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let p = &self.params;
        let (s, c) = x[2].sin_cos();
        let r = p.arm / (2.0 * p.inertia);
        DMatrix::from_row_slice(3, 2, &[-s / p.mass, -s / p.mass, c / p.mass, c / p.mass, -r, r])
    }

    fn bounds(&self) -> LipschitzBounds {
        let p = &self.params;
        let gv = 1.0 / p.mass;
        LipschitzBounds::new(
            vec![p.drag_v / p.mass, p.drag_v / p.mass, p.drag_phi / (2.0 * p.inertia)],
            vec![vec![gv, gv], vec![gv, gv], vec![0.0, 0.0]],
        )
        .expect("quadrotor bounds are well formed")
    }

    fn label(&self) -> String {
        "quadrotor".into()
    }
}

/// Fully actuated test plant with constant square input matrix:
/// `f_k(x) = -d v_k + c sin(p_{k+1})` (indices cyclic).
#[derive(Debug, Clone, PartialEq)]
pub struct SquareGPlant {
    pub g: DMatrix<f64>,
    pub damping: f64,
    pub coupling: f64,
}

impl SquareGPlant {
    pub fn new(g: DMatrix<f64>, damping: f64, coupling: f64) -> Self {
        Self { g, damping, coupling }
    }

    /// Smallest eigenvalue of `g + gᵀ`.
    pub fn symmetric_part_min_eig(&self) -> f64 {
        (&self.g + self.g.transpose()).symmetric_eigenvalues().min()
    }
}

impl Plant for SquareGPlant {
    fn n(&self) -> usize {
        self.g.nrows()
    }

    fn m(&self) -> usize {
        self.g.ncols()
    }

    fn drift(&self, x: &[f64]) -> DVector<f64> {
        let n = self.n();
        DVector::from_fn(n, |k, _| -self.damping * x[n + k] + self.coupling * x[(k + 1) % n].sin())
    }

    fn input_matrix(&self, _x: &[f64]) -> DMatrix<f64> {
        self.g.clone()
    }

    fn bounds(&self) -> LipschitzBounds {
        let n = self.n();
        let lf = self.damping.hypot(self.coupling);
        LipschitzBounds::new(vec![lf; n], vec![vec![0.0; self.m()]; n]).expect("square plant bounds are well formed")
    }

    fn label(&self) -> String {
        "square_g".into()
    }
}
