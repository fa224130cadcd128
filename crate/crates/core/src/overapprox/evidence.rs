use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{contract_ordered, OverapproxError, PRIOR_RANGE};
use crate::interval::{Interval, IntervalMatrix, IntervalVector, TOL};

/// One measurement `(x, ẋ, u)` taken at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub x: Vec<f64>,
    pub x_dot: Vec<f64>,
    pub u: Vec<f64>,
    pub t: f64,
}

impl DataPoint {
    /// `ẋ₁ = x₂` within tolerance.
    pub fn is_kinematic(&self) -> bool {
        let n = self.x.len() / 2;
        self.x.len() == self.x_dot.len()
            && (0..n).all(|i| (self.x_dot[i] - self.x[n + i]).abs() <= TOL)
    }
}

/// Per-row Lipschitz constants of the dynamic part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzBounds {
    pub f_bar: Vec<f64>,
    pub g_bar: Vec<Vec<f64>>,
}

impl LipschitzBounds {
    pub fn new(f_bar: Vec<f64>, g_bar: Vec<Vec<f64>>) -> Result<Self, OverapproxError> {
        let b = Self { f_bar, g_bar };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), OverapproxError> {
        if self.g_bar.len() != self.f_bar.len() {
            return Err(OverapproxError::Dimension(format!(
                "f_bar has {} rows, g_bar has {}",
                self.f_bar.len(),
                self.g_bar.len()
            )));
        }
        let m = self.m();
        if self.g_bar.iter().any(|r| r.len() != m) {
            return Err(OverapproxError::Dimension("g_bar rows differ in length".into()));
        }
        let ok = |v: &f64| v.is_finite() && *v >= 0.0;
        if !self.f_bar.iter().all(ok) || !self.g_bar.iter().flatten().all(ok) {
            return Err(OverapproxError::Invalid("Lipschitz bounds must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.f_bar.len()
    }

    pub fn m(&self) -> usize {
        self.g_bar.first().map_or(0, Vec::len)
    }

    /// `f̄_k + Σ_ℓ ḡ_kℓ |U_ℓ|` for every dynamic row.
    pub fn row_rates(&self, u: &IntervalVector) -> Vec<f64> {
        self.f_bar
            .iter()
            .zip(&self.g_bar)
            .map(|(f, g)| f + g.iter().zip(u.iter()).map(|(gl, ul)| gl * ul.abs()).sum::<f64>())
            .collect()
    }
}

/// Certificate that `f(x) ∈ cf` and `g(x) ∈ cg`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceEntry {
    pub x: Vec<f64>,
    pub cf: IntervalVector,
    pub cg: IntervalMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxSettings {
    pub fix_tol: f64,
    pub max_sweeps: usize,
    /// Column order used by the contraction; natural order when `None`.
    pub column_order: Option<Vec<usize>>,
}

impl Default for ApproxSettings {
    fn default() -> Self {
        Self { fix_tol: 1e-9, max_sweeps: 100, column_order: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepReport {
    pub sweeps: usize,
    pub residual: f64,
}

/// The prior entry plus one entry per ingested datapoint.
#[derive(Debug, Clone)]
pub struct EvidenceSet {
    n: usize,
    m: usize,
    bounds: LipschitzBounds,
    prior_magnitude: f64,
    range_f: Option<IntervalVector>,
    range_g: Option<IntervalMatrix>,
    entries: Vec<EvidenceEntry>,
    data: Vec<DataPoint>,
    pub settings: ApproxSettings,
}

impl EvidenceSet {
    /// Evidence holding only the `[-M, M]` prior anchored at `anchor`.
    pub fn new(
        bounds: LipschitzBounds,
        prior_magnitude: f64,
        anchor: Vec<f64>,
    ) -> Result<Self, OverapproxError> {
        bounds.validate()?;
        let (n, m) = (bounds.n(), bounds.m());
        if anchor.len() != 2 * n {
            return Err(OverapproxError::Dimension(format!("anchor has {} entries, want {}", anchor.len(), 2 * n)));
        }
        if !(prior_magnitude.is_finite() && prior_magnitude > 0.0) {
            return Err(OverapproxError::Invalid("prior magnitude must be positive".into()));
        }
        let big = Interval::symmetric(prior_magnitude);
        let prior = EvidenceEntry {
            x: anchor,
            cf: IntervalVector::filled(n, big),
            cg: IntervalMatrix::filled(n, m, big),
        };
        Ok(Self {
            n,
            m,
            bounds,
            prior_magnitude,
            range_f: None,
            range_g: None,
            entries: vec![prior],
            data: Vec::new(),
            settings: ApproxSettings::default(),
        })
    }

    /// Adds global prior ranges that every cover is intersected with.
    pub fn with_ranges(
        mut self,
        range_f: IntervalVector,
        range_g: IntervalMatrix,
    ) -> Result<Self, OverapproxError> {
        if range_f.len() != self.n || range_g.rows() != self.n || range_g.cols() != self.m {
            return Err(OverapproxError::Dimension("prior ranges do not match (n, m)".into()));
        }
        self.range_f = Some(range_f);
        self.range_g = Some(range_g);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn bounds(&self) -> &LipschitzBounds {
        &self.bounds
    }

    pub fn prior_magnitude(&self) -> f64 {
        self.prior_magnitude
    }

    pub fn ranges(&self) -> Option<(&IntervalVector, &IntervalMatrix)> {
        self.range_f.as_ref().zip(self.range_g.as_ref())
    }

    /// All entries; index 0 is the prior.
    pub fn entries(&self) -> &[EvidenceEntry] {
        &self.entries
    }

    pub fn data(&self) -> &[DataPoint] {
        &self.data
    }

    /// Number of entries including the prior.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn order(&self) -> Vec<usize> {
        self.settings.column_order.clone().unwrap_or_else(|| (0..self.m).collect())
    }

    fn cover_with_distances(&self, dist: &[f64]) -> Result<(IntervalVector, IntervalMatrix), OverapproxError> {
        let cone = |c: Interval, lip: f64, d: f64| c + Interval::symmetric(lip * d);
        let mut f = IntervalVector::filled(self.n, Interval::point(0.0));
        let mut g = IntervalMatrix::filled(self.n, self.m, Interval::point(0.0));
        for k in 0..self.n {
            let lip = self.bounds.f_bar[k];
            let cf = |j: usize| cone(self.entries[j].cf[k], lip, dist[j]);
            let mut acc = intersect_all(self.entries.len(), &cf)
                .map_err(|(first, second)| empty(k, None, first, second))?;
            if let Some(r) = &self.range_f {
                acc = acc.intersect(&r[k]).map_err(|_| empty(k, None, PRIOR_RANGE, 0))?;
            }
            f[k] = acc;
            for l in 0..self.m {
                let lip = self.bounds.g_bar[k][l];
                let cg = |j: usize| cone(self.entries[j].cg.get(k, l), lip, dist[j]);
                let mut acc = intersect_all(self.entries.len(), &cg)
                    .map_err(|(first, second)| empty(k, Some(l), first, second))?;
                if let Some(r) = &self.range_g {
                    acc = acc.intersect(&r.get(k, l)).map_err(|_| empty(k, Some(l), PRIOR_RANGE, 0))?;
                }
                g.set(k, l, acc);
            }
        }
        Ok((f, g))
    }

    fn check_point(&self, d: &DataPoint) -> Result<(), OverapproxError> {
        if d.x.len() != 2 * self.n || d.x_dot.len() != 2 * self.n || d.u.len() != self.m {
            return Err(OverapproxError::Dimension(format!(
                "datapoint sizes x={}, x_dot={}, u={} for n={}, m={}",
                d.x.len(),
                d.x_dot.len(),
                d.u.len(),
                self.n,
                self.m
            )));
        }
        let finite = d.x.iter().chain(&d.x_dot).chain(&d.u).all(|v| v.is_finite());
        if !finite || !d.is_kinematic() {
            return Err(OverapproxError::Invalid(format!("datapoint at t={} is not finite or violates x1' = x2", d.t)));
        }
        Ok(())
    }

    fn refined_entry(&self, d: &DataPoint, idx: usize) -> Result<EvidenceEntry, OverapproxError> {
        let (f, g) = cover(&d.x, self).map_err(|e| tag(e, idx))?;
        let (cf, cg) = contract_ordered(d, &f, &g, &self.order()).map_err(|e| tag(e, idx))?;
        Ok(EvidenceEntry { x: d.x.clone(), cf, cg })
    }

    /// Appends a datapoint without sweeping.
    fn append(&mut self, d: DataPoint) -> Result<(), OverapproxError> {
        self.check_point(&d)?;
        let entry = self.refined_entry(&d, self.data.len())?;
        self.entries.push(entry);
        self.data.push(d);
        Ok(())
    }

    /// One Gauss-Seidel pass over every datapoint; returns the largest endpoint move.
    fn sweep(&mut self) -> Result<f64, OverapproxError> {
        let mut residual: f64 = 0.0;
        for i in 0..self.data.len() {
            let entry = self.refined_entry(&self.data[i], i)?;
            let old = &self.entries[i + 1];
            residual = residual.max(old.cf.max_distance(&entry.cf)).max(old.cg.max_distance(&entry.cg));
            self.entries[i + 1] = entry;
        }
        Ok(residual)
    }

    /// Sweeps until no endpoint moves by more than `fix_tol`.
    ///
    /// On `NonTermination` the partially refined evidence is kept; it is still
    /// sound, only not yet invariant.
    pub fn refine(&mut self) -> Result<SweepReport, OverapproxError> {
        let mut sweeps = 0;
        let mut residual = f64::INFINITY;
        while sweeps < self.settings.max_sweeps {
            residual = self.sweep()?;
            sweeps += 1;
            if residual <= self.settings.fix_tol {
                return Ok(SweepReport { sweeps, residual });
            }
        }
        Err(OverapproxError::NonTermination { sweeps, residual })
    }

    /// Appends one datapoint and sweeps to a fixpoint. Inconsistent data
    /// leaves the set untouched.
    pub fn ingest(&mut self, d: DataPoint) -> Result<SweepReport, OverapproxError> {
        let saved = (self.entries.clone(), self.data.clone());
        let res = self.append(d).and_then(|_| self.refine());
        if let Err(e) = &res {
            if !matches!(e, OverapproxError::NonTermination { .. }) {
                (self.entries, self.data) = saved;
            }
        }
        res
    }
}

fn intersect_all(count: usize, cone: &dyn Fn(usize) -> Interval) -> Result<Interval, (usize, usize)> {
    let mut acc = cone(0);
    for j in 1..count {
        let c = cone(j);
        acc = match acc.intersect(&c) {
            Ok(a) => a,
            Err(_) => {
                let first = (0..j).find(|&i| cone(i).intersect(&c).is_err()).unwrap_or(j - 1);
                return Err((first, j));
            }
        };
    }
    Ok(acc)
}

fn empty(row: usize, col: Option<usize>, first: usize, second: usize) -> OverapproxError {
    OverapproxError::EmptyIntersection { row, col, first, second, datapoint: None }
}

fn tag(e: OverapproxError, idx: usize) -> OverapproxError {
    match e {
        OverapproxError::EmptyIntersection { row, col, first, second, .. } => {
            OverapproxError::EmptyIntersection { row, col, first, second, datapoint: Some(idx) }
        }
        OverapproxError::Contradiction { row, .. } => OverapproxError::Contradiction { datapoint: Some(idx), row },
        other => other,
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Enclosures `(F(x), G(x))` of `f(x)` and `g(x)`.
pub fn cover(x: &[f64], ev: &EvidenceSet) -> Result<(IntervalVector, IntervalMatrix), OverapproxError> {
    if x.len() != 2 * ev.n {
        return Err(OverapproxError::Dimension(format!("query has {} entries, want {}", x.len(), 2 * ev.n)));
    }
    let dist: Vec<f64> = ev.entries.iter().map(|e| euclid(x, &e.x)).collect();
    ev.cover_with_distances(&dist)
}

/// Enclosures valid for every point of the box `s`.
pub fn cover_box(s: &IntervalVector, ev: &EvidenceSet) -> Result<(IntervalVector, IntervalMatrix), OverapproxError> {
    if s.len() != 2 * ev.n {
        return Err(OverapproxError::Dimension(format!("box has {} entries, want {}", s.len(), 2 * ev.n)));
    }
    let dist: Vec<f64> = ev.entries.iter().map(|e| s.max_distance_from(&e.x)).collect();
    ev.cover_with_distances(&dist)
}

/// Runs the evidence fixpoint over a dataset, starting from `ev`.
pub fn approximate(dataset: &[DataPoint], ev: &EvidenceSet) -> Result<EvidenceSet, OverapproxError> {
    let mut out = ev.clone();
    for d in dataset {
        out.append(d.clone())?;
    }
    out.refine()?;
    Ok(out)
}

/// Point estimate `θ·lo + (1-θ)·hi` of every entry of `G(x)`.
pub fn estimate_g(x: &[f64], ev: &EvidenceSet, theta: f64) -> Result<DMatrix<f64>, OverapproxError> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(OverapproxError::Invalid(format!("theta {theta} outside [0, 1]")));
    }
    let (_, g) = cover(x, ev)?;
    Ok(DMatrix::from_fn(ev.n, ev.m, |k, l| {
        let a = g.get(k, l);
        theta * a.lo() + (1.0 - theta) * a.hi()
    }))
}
