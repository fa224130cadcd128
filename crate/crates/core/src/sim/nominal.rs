use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::QuadrotorParams;

/// Sinusoidal position target `p_k(t) = a_k sin(w_k t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub amplitude: Vec<f64>,
    pub frequency: Vec<f64>,
}

impl Default for Reference {
    fn default() -> Self {
        Self { amplitude: vec![0.5, 0.5], frequency: vec![1.5, 0.75] }
    }
}

impl Reference {
    /// Position, velocity and acceleration targets at `t`.
    pub fn at(&self, t: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let it = self.amplitude.iter().zip(&self.frequency);
        let p = it.clone().map(|(a, w)| a * (w * t).sin()).collect();
        let v = it.clone().map(|(a, w)| a * w * (w * t).cos()).collect();
        let acc = it.map(|(a, w)| -a * w * w * (w * t).sin()).collect();
        (p, v, acc)
    }

    /// Largest distance from the origin over one joint period, by dense sampling.
    pub fn max_radius(&self) -> f64 {
        let w_min = self.frequency.iter().copied().filter(|w| *w > 0.0).fold(f64::INFINITY, f64::min);
        let span = if w_min.is_finite() { 2.0 * std::f64::consts::TAU / w_min } else { 1.0 };
        (0..=20_000)
            .map(|i| {
                let (p, _, _) = self.at(span * i as f64 / 20_000.0);
                p.iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// The planar quadrotor reference `(½ sin(3t/2), ½ sin(3t/4))`.
pub fn make_reference(t: f64) -> (Vec<f64>, Vec<f64>) {
    let (p, v, _) = Reference::default().at(t);
    (p, v)
}

/// Feedback gains of the quadrotor position/attitude cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeGains {
    pub kp: f64,
    pub kd: f64,
    pub kp_att: f64,
    pub kd_att: f64,
}

impl Default for CascadeGains {
    fn default() -> Self {
        Self { kp: 4.0, kd: 4.0, kp_att: 400.0, kd_att: 40.0 }
    }
}

/// The safety-agnostic input the filter modifies.
#[derive(Debug, Clone, PartialEq)]
pub enum NominalController {
    /// Tracking cascade for the planar quadrotor with model knowledge.
    QuadCascade { gains: CascadeGains, reference: Reference, params: QuadrotorParams },
    /// `u = offset + K x`.
    Linear { k: DMatrix<f64>, offset: DVector<f64> },
    Constant(DVector<f64>),
}

impl NominalController {
    pub fn m(&self) -> usize {
        match self {
            NominalController::QuadCascade { .. } => 2,
            NominalController::Linear { offset, .. } => offset.len(),
            NominalController::Constant(u) => u.len(),
        }
    }

    pub fn eval(&self, x: &[f64], t: f64) -> DVector<f64> {
        match self {
            NominalController::QuadCascade { gains, reference, params } => {
                let (p, v, a) = reference.at(t);
                let ax = a[0] + gains.kp * (p[0] - x[0]) + gains.kd * (v[0] - x[3]);
                let ay = a[1] + gains.kp * (p[1] - x[1]) + gains.kd * (v[1] - x[4]);
                let fx = params.mass * ax + params.drag_v * x[3];
                let fy = params.mass * (ay + params.gravity) + params.drag_v * x[4];
                let thrust = fx.hypot(fy);
                let phi_d = (-fx).atan2(fy);
                let alpha = gains.kp_att * (phi_d - x[2]) - gains.kd_att * x[5];
                let diff = (2.0 * params.inertia * alpha + params.drag_phi * x[5]) / params.arm;
                DVector::from_vec(vec![(thrust - diff) / 2.0, (thrust + diff) / 2.0])
            }
            NominalController::Linear { k, offset } => offset + k * DVector::from_column_slice(x),
            NominalController::Constant(u) => u.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{make_quadrotor, Plant};

    #[test]
    fn reference_values() {
        assert_eq!(make_reference(0.0), (vec![0.0, 0.0], vec![0.75, 0.375]));
        let (p, _) = make_reference(std::f64::consts::PI / 3.0);
        assert!((p[0] - 0.5).abs() < 1e-15);
        let r = Reference::default().max_radius();
        assert!(r > 0.6 && r < 0.5 * 2f64.sqrt());
    }

    #[test]
    fn cascade_hovers_on_target() {
        let q = make_quadrotor();
        let c = NominalController::QuadCascade {
            gains: CascadeGains::default(),
            reference: Reference { amplitude: vec![0.0, 0.0], frequency: vec![1.0, 1.0] },
            params: q.params.clone(),
        };
        let u = c.eval(&[0.0; 6], 0.0);
        assert!((u[0] - 6.13125).abs() < 1e-12 && (u[1] - 6.13125).abs() < 1e-12);
        assert!(q.derivative(&[0.0; 6], u.as_slice()).iter().all(|v| v.abs() < 1e-12));
    }
}
