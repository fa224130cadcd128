//! Closed real intervals and their componentwise aggregates.
//!
//! Endpoints are plain `f64` without directed rounding. Intersections tolerate
//! gaps up to [`TOL`] so that round-off in otherwise consistent data does not
//! surface as an empty set.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used by containment tests and intersections.
pub const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("empty intersection of {a} and {b}")]
    EmptyIntersection { a: Interval, b: Interval },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid interval [{lo}, {hi}]")]
    Invalid { lo: f64, hi: f64 },
}

#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = IntervalError;
    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        Interval::try_new(v[0], v[1])
    }
}

impl From<Interval> for [f64; 2] {
    fn from(a: Interval) -> Self {
        [a.lo, a.hi]
    }
}

impl Interval {
    /// Panics if `lo > hi` or either endpoint is NaN.
    pub fn new(lo: f64, hi: f64) -> Self {
        Self::try_new(lo, hi).expect("invalid interval")
    }

    pub fn try_new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if lo <= hi {
            Ok(Self { lo, hi })
        } else {
            Err(IntervalError::Invalid { lo, hi })
        }
    }

    pub fn point(x: f64) -> Self {
        Self::new(x, x)
    }

    /// `[-r, r]`.
    pub fn symmetric(r: f64) -> Self {
        let r = r.abs();
        Self { lo: -r, hi: r }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Magnitude `max(|lo|, |hi|)`.
    pub fn abs(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Mignitude: smallest absolute value of any member.
    pub fn mig(&self) -> f64 {
        if self.lo > 0.0 {
            self.lo
        } else if self.hi < 0.0 {
            -self.hi
        } else {
            0.0
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.contains_tol(x, TOL)
    }

    pub fn contains_tol(&self, x: f64, tol: f64) -> bool {
        x >= self.lo - tol && x <= self.hi + tol
    }

    pub fn subset_of(&self, other: &Interval) -> bool {
        self.lo >= other.lo - TOL && self.hi <= other.hi + TOL
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Set intersection. A gap no larger than [`TOL`] collapses to the gap
    /// itself, which still contains both neighbouring endpoints.
    pub fn intersect(&self, other: &Interval) -> Result<Interval, IntervalError> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo <= hi {
            Ok(Interval { lo, hi })
        } else if lo - hi <= TOL {
            Ok(Interval { lo: hi, hi: lo })
        } else {
            Err(IntervalError::EmptyIntersection { a: *self, b: *other })
        }
    }

    pub fn scale(&self, c: f64) -> Interval {
        if c >= 0.0 {
            Interval { lo: self.lo * c, hi: self.hi * c }
        } else {
            Interval { lo: self.hi * c, hi: self.lo * c }
        }
    }

    /// Division by a nonzero real.
    pub fn div_scalar(&self, c: f64) -> Interval {
        debug_assert!(c != 0.0);
        self.scale(1.0 / c)
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// Largest endpoint displacement between two intervals.
    pub fn distance(&self, other: &Interval) -> f64 {
        (self.lo - other.lo).abs().max((self.hi - other.hi).abs())
    }
}

pub fn add(a: Interval, b: Interval) -> Interval {
    a + b
}

pub fn mul(a: Interval, b: Interval) -> Interval {
    a * b
}

pub fn intersect(a: Interval, b: Interval) -> Result<Interval, IntervalError> {
    a.intersect(&b)
}

pub fn width(a: Interval) -> f64 {
    a.width()
}

pub fn abs(a: Interval) -> f64 {
    a.abs()
}

pub fn inf_norm(v: &IntervalVector) -> f64 {
    v.inf_norm()
}

pub fn mat_vec(g: &IntervalMatrix, u: &[f64]) -> Result<IntervalVector, IntervalError> {
    g.mul_real(u)
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, b: Interval) -> Interval {
        Interval { lo: self.lo + b.lo, hi: self.hi + b.hi }
    }
}

impl Add<f64> for Interval {
    type Output = Interval;
    fn add(self, b: f64) -> Interval {
        Interval { lo: self.lo + b, hi: self.hi + b }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, b: Interval) -> Interval {
        Interval { lo: self.lo - b.hi, hi: self.hi - b.lo }
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval { lo: -self.hi, hi: -self.lo }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, b: Interval) -> Interval {
        let p = [self.lo * b.lo, self.lo * b.hi, self.hi * b.lo, self.hi * b.hi];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval { lo, hi }
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;
    fn mul(self, c: f64) -> Interval {
        self.scale(c)
    }
}

#[derive(Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalVector(Vec<Interval>);

impl IntervalVector {
    pub fn new(entries: Vec<Interval>) -> Self {
        Self(entries)
    }

    pub fn from_points(x: &[f64]) -> Self {
        Self(x.iter().map(|&v| Interval::point(v)).collect())
    }

    pub fn filled(n: usize, a: Interval) -> Self {
        Self(vec![a; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Interval] {
        &self.0
    }

    pub fn inf_norm(&self) -> f64 {
        self.0.iter().map(Interval::abs).fold(0.0, f64::max)
    }

    /// Interval hull of the Euclidean norm over the box.
    pub fn norm2(&self) -> Interval {
        let lo: f64 = self.0.iter().map(|a| a.mig().powi(2)).sum();
        let hi: f64 = self.0.iter().map(|a| a.abs().powi(2)).sum();
        Interval::new(lo.sqrt(), hi.sqrt())
    }

    /// Largest Euclidean distance from `x` to a point of the box.
    pub fn max_distance_from(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(a, &xi)| (a.lo - xi).abs().max((a.hi - xi).abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.0.iter().map(Interval::width).collect()
    }

    pub fn mids(&self) -> Vec<f64> {
        self.0.iter().map(Interval::mid).collect()
    }

    pub fn contains_point(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.len() && self.0.iter().zip(x).all(|(a, &v)| a.contains_tol(v, tol))
    }

    pub fn subset_of(&self, other: &IntervalVector) -> bool {
        self.len() == other.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.subset_of(b))
    }

    pub fn intersect(&self, other: &IntervalVector) -> Result<IntervalVector, IntervalError> {
        check_dim(self.len(), other.len())?;
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.intersect(b))
            .collect::<Result<Vec<_>, _>>()
            .map(IntervalVector)
    }

    pub fn add(&self, other: &IntervalVector) -> Result<IntervalVector, IntervalError> {
        check_dim(self.len(), other.len())?;
        Ok(IntervalVector(self.0.iter().zip(&other.0).map(|(a, b)| *a + *b).collect()))
    }

    pub fn scale(&self, c: f64) -> IntervalVector {
        IntervalVector(self.0.iter().map(|a| a.scale(c)).collect())
    }

    pub fn max_distance(&self, other: &IntervalVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for IntervalVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl Index<usize> for IntervalVector {
    type Output = Interval;
    fn index(&self, i: usize) -> &Interval {
        &self.0[i]
    }
}

impl IndexMut<usize> for IntervalVector {
    fn index_mut(&mut self, i: usize) -> &mut Interval {
        &mut self.0[i]
    }
}

impl From<Vec<Interval>> for IntervalVector {
    fn from(v: Vec<Interval>) -> Self {
        Self(v)
    }
}

impl FromIterator<Interval> for IntervalVector {
    fn from_iter<I: IntoIterator<Item = Interval>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Row-major `rows × cols` grid of intervals.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Interval>,
}

impl IntervalMatrix {
    pub fn filled(rows: usize, cols: usize, a: Interval) -> Self {
        Self { rows, cols, data: vec![a; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Interval) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<Interval>>) -> Result<Self, IntervalError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            check_dim(c, row.len())?;
            data.extend(row);
        }
        Ok(Self { rows: r, cols: c, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval> {
        self.data.iter()
    }

    pub fn get(&self, r: usize, c: usize) -> Interval {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, a: Interval) {
        self.data[r * self.cols + c] = a;
    }

    /// `G u` for a real vector `u`.
    pub fn mul_real(&self, u: &[f64]) -> Result<IntervalVector, IntervalError> {
        check_dim(self.cols, u.len())?;
        Ok((0..self.rows)
            .map(|r| {
                (0..self.cols).fold(Interval::point(0.0), |acc, c| acc + self.get(r, c) * u[c])
            })
            .collect())
    }

    /// `G U` for an interval vector `U`.
    pub fn mul_interval(&self, u: &IntervalVector) -> Result<IntervalVector, IntervalError> {
        check_dim(self.cols, u.len())?;
        Ok((0..self.rows)
            .map(|r| {
                (0..self.cols).fold(Interval::point(0.0), |acc, c| acc + self.get(r, c) * u[c])
            })
            .collect())
    }

    pub fn intersect(&self, other: &IntervalMatrix) -> Result<IntervalMatrix, IntervalError> {
        check_dim(self.rows, other.rows)?;
        check_dim(self.cols, other.cols)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.intersect(b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn contains_matrix(&self, g: &[Vec<f64>], tol: f64) -> bool {
        g.len() == self.rows
            && g.iter().enumerate().all(|(r, row)| {
                row.len() == self.cols
                    && row.iter().enumerate().all(|(c, &v)| self.get(r, c).contains_tol(v, tol))
            })
    }

    pub fn subset_of(&self, other: &IntervalMatrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.data.iter().zip(&other.data).all(|(a, b)| a.subset_of(b))
    }

    pub fn max_distance(&self, other: &IntervalMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for IntervalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<_> = (0..self.rows)
            .map(|r| &self.data[r * self.cols..(r + 1) * self.cols])
            .collect();
        f.debug_list().entries(rows).finish()
    }
}

fn check_dim(expected: usize, got: usize) -> Result<(), IntervalError> {
    if expected == got {
        Ok(())
    } else {
        Err(IntervalError::DimensionMismatch { expected, got })
    }
}
