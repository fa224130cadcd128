#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use safelearn::overapprox::{DataPoint, OverapproxError, EvidenceSet, LipschitzBounds};
use safelearn::sim::{rk4_step, Plant};

/// `f_k = c_k + Σ a_ki x_i² + Σ b_ki x_i`, `g_kl = g0_kl + d_kl · x`.
/// The declared bounds hold on the box `|x_i| ≤ radius`.
#[derive(Debug, Clone)]
pub struct PolyPlant {
    pub n: usize,
    pub m: usize,
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub g0: Vec<Vec<f64>>,
    pub d: Vec<Vec<Vec<f64>>>,
    pub radius: f64,
}

impl PolyPlant {
    pub fn random(rng: &mut impl Rng, n: usize, m: usize, radius: f64) -> Self {
        let dim = 2 * n;
        let mut v = |len: usize, s: f64| -> Vec<f64> { (0..len).map(|_| rng.random_range(-s..s)).collect() };
        let c = v(n, 1.0);
        let a = (0..n).map(|_| v(dim, 0.5)).collect();
        let b = (0..n).map(|_| v(dim, 1.0)).collect();
        let g0 = (0..n).map(|_| v(m, 2.0)).collect();
        let d = (0..n).map(|_| (0..m).map(|_| v(dim, 0.5)).collect()).collect();
        Self { n, m, c, a, b, g0, d, radius }
    }
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

impl Plant for PolyPlant {
    fn n(&self) -> usize {
        self.n
    }
    fn m(&self) -> usize {
        self.m
    }
    fn drift(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.n, |k, _| {
            self.c[k] + x.iter().enumerate().map(|(i, xi)| self.a[k][i] * xi * xi + self.b[k][i] * xi).sum::<f64>()
        })
    }
    fn input_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.m, |k, l| {
            self.g0[k][l] + x.iter().zip(&self.d[k][l]).map(|(xi, di)| xi * di).sum::<f64>()
        })
    }
    fn bounds(&self) -> LipschitzBounds {
        let r = self.radius;
        let f_bar = (0..self.n)
            .map(|k| norm((0..2 * self.n).map(|i| 2.0 * self.a[k][i].abs() * r + self.b[k][i].abs())))
            .collect();
        let g_bar = (0..self.n).map(|k| (0..self.m).map(|l| norm(self.d[k][l].iter().copied())).collect()).collect();
        LipschitzBounds::new(f_bar, g_bar).unwrap()
    }
    fn label(&self) -> String {
        "poly".into()
    }
}

pub fn random_point(rng: &mut impl Rng, dim: usize, r: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-r..r)).collect()
}

/// Exact measurement of the plant at `x` under `u`.
pub fn measure(plant: &dyn Plant, x: &[f64], u: &[f64], t: f64) -> DataPoint {
    DataPoint { x: x.to_vec(), x_dot: plant.derivative(x, u), u: u.to_vec(), t }
}

/// Fine RK4 integration with `u(s)` sampled every `hold` fine steps.
pub fn integrate(
    plant: &dyn Plant,
    x: &[f64],
    total: f64,
    fine: f64,
    hold: usize,
    mut u: impl FnMut(usize) -> Vec<f64>,
) -> Vec<f64> {
    let steps = (total / fine).round().max(1.0) as usize;
    let h = total / steps as f64;
    let mut x = x.to_vec();
    let mut cur = u(0);
    for s in 0..steps {
        if s % hold == 0 {
            cur = u(s);
        }
        x = rk4_step(plant, &x, &cur, h).unwrap();
    }
    x
}

/// Evidence fed with measurements along a random trajectory that stays in
/// `|x_i| ≤ keep`. Returns the evidence and the number of datapoints.
pub fn trajectory_evidence(
    rng: &mut impl Rng,
    plant: &dyn Plant,
    prior: f64,
    points: usize,
    keep: f64,
) -> EvidenceSet {
    let dim = 2 * plant.n();
    let mut ev = EvidenceSet::new(plant.bounds(), prior, vec![0.0; dim]).unwrap();
    let mut x = random_point(rng, dim, 0.5 * keep);
    for i in 0..points {
        let u: Vec<f64> = (0..plant.m()).map(|_| rng.random_range(-1.0..1.0)).collect();
        match ev.ingest(measure(plant, &x, &u, i as f64 * 0.05)) {
            // slow sweeps keep the datapoint and stay sound
            Ok(_) | Err(OverapproxError::NonTermination { .. }) => {}
            Err(e) => panic!("exact data rejected: {e}"),
        }
        let next = integrate(plant, &x, 0.05, 1e-3, 1, |_| u.clone());
        if next.iter().any(|v| v.abs() > keep) {
            x = random_point(rng, dim, 0.5 * keep);
        } else {
            x = next;
        }
    }
    ev
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}
