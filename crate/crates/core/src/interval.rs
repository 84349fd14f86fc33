//! Interval arithmetic and layer-by-layer bound propagation.
//!
//! Arithmetic uses the platform's round-to-nearest mode without outward
//! rounding. The bounds are still exact enclosures of the *floating-point*
//! forward pass: [`Network::forward`] accumulates every dot product in the
//! same order as [`affine_bounds`], and rounded addition and multiplication
//! by a fixed weight are monotone, so a concrete input inside the box can
//! never round to a value outside the propagated endpoints. The enclosure of
//! the exact real-valued image may miss by a few ulps.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::network::{Activation, Network};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("interval endpoints must be finite, got [{lo}, {hi}]")]
    NonFinite { lo: f64, hi: f64 },
    #[error("interval lower bound {lo} exceeds upper bound {hi}")]
    Inverted { lo: f64, hi: f64 },
    #[error("box must have at least one dimension")]
    EmptyBox,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// Closed interval `[lo, hi]` with finite endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(IntervalError::NonFinite { lo, hi });
        }
        if lo > hi {
            return Err(IntervalError::Inverted { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// Degenerate interval `[v, v]`.
    ///
    /// # Panics
    /// If `v` is not finite.
    pub fn point(v: f64) -> Self {
        assert!(v.is_finite(), "interval endpoint must be finite");
        Self { lo: v, hi: v }
    }

    // Internal constructor for results of arithmetic on valid intervals.
    pub(crate) fn from_ordered(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "[{lo}, {hi}]");
        Self { lo, hi }
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

    pub fn midpoint(&self) -> f64 {
        self.lo + 0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn is_disjoint_from(&self, other: &Interval) -> bool {
        self.hi < other.lo || other.hi < self.lo
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval::from_ordered(self.lo.min(other.lo), self.hi.max(other.hi))
    }
}

impl TryFrom<[f64; 2]> for Interval {
    type Error = IntervalError;

    fn try_from([lo, hi]: [f64; 2]) -> Result<Self, Self::Error> {
        Interval::new(lo, hi)
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Axis-aligned box: the Cartesian product of one interval per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Interval>", into = "Vec<Interval>")]
pub struct IntervalBox {
    dims: Vec<Interval>,
}

impl IntervalBox {
    pub fn new(dims: Vec<Interval>) -> Result<Self, IntervalError> {
        if dims.is_empty() {
            return Err(IntervalError::EmptyBox);
        }
        Ok(Self { dims })
    }

    /// Box from `[lo, hi]` pairs.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Result<Self, IntervalError> {
        let dims = bounds
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dims)
    }

    /// Zero-width box at `x`.
    pub fn from_point(x: &[f64]) -> Result<Self, IntervalError> {
        let dims = x
            .iter()
            .map(|&v| Interval::new(v, v))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(dims)
    }

    pub(crate) fn from_lo_hi(lo: &[f64], hi: &[f64]) -> Self {
        Self {
            dims: lo
                .iter()
                .zip(hi)
                .map(|(&l, &h)| Interval::from_ordered(l, h))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[Interval] {
        &self.dims
    }

    pub fn get(&self, i: usize) -> Interval {
        self.dims[i]
    }

    pub(crate) fn set(&mut self, i: usize, iv: Interval) {
        self.dims[i] = iv;
    }

    pub fn lower(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::lo).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::hi).collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::midpoint).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.dims.iter().map(Interval::width).collect()
    }

    /// Product of widths.
    pub fn volume(&self) -> f64 {
        self.dims.iter().map(Interval::width).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dims.len() && self.dims.iter().zip(x).all(|(iv, &v)| iv.contains(v))
    }

    pub fn is_subset_of(&self, other: &IntervalBox) -> bool {
        self.dims.len() == other.dims.len()
            && self.dims.iter().zip(&other.dims).all(|(a, b)| a.is_subset_of(b))
    }

    /// Componentwise hull of two boxes of equal dimension.
    pub fn hull(&self, other: &IntervalBox) -> Result<IntervalBox, IntervalError> {
        if self.dim() != other.dim() {
            return Err(IntervalError::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Ok(IntervalBox {
            dims: self.dims.iter().zip(&other.dims).map(|(a, b)| a.hull(b)).collect(),
        })
    }
}

impl TryFrom<Vec<Interval>> for IntervalBox {
    type Error = IntervalError;

    fn try_from(dims: Vec<Interval>) -> Result<Self, Self::Error> {
        IntervalBox::new(dims)
    }
}

impl From<IntervalBox> for Vec<Interval> {
    fn from(b: IntervalBox) -> Self {
        b.dims
    }
}

impl fmt::Display for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.dims.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

/// Result of comparing two intervals with Moore's order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    /// Every value of the first interval is below every value of the second.
    Less,
    /// Every value of the first interval is above every value of the second.
    Greater,
    /// The intervals overlap.
    Unknown,
}

pub fn moore_compare(yi: Interval, yj: Interval) -> Comparison {
    if yi.hi < yj.lo {
        Comparison::Less
    } else if yi.lo > yj.hi {
        Comparison::Greater
    } else {
        Comparison::Unknown
    }
}

/// Interval image of `x -> Wx + b` over `input`.
pub fn affine_bounds(weights: &Matrix, biases: &[f64], input: &IntervalBox) -> Result<IntervalBox, IntervalError> {
    if weights.cols() != input.dim() {
        return Err(IntervalError::DimensionMismatch {
            expected: weights.cols(),
            actual: input.dim(),
        });
    }
    if biases.len() != weights.rows() {
        return Err(IntervalError::DimensionMismatch {
            expected: weights.rows(),
            actual: biases.len(),
        });
    }
    let (lo, hi) = (input.lower(), input.upper());
    let mut out_lo = vec![0.0; weights.rows()];
    let mut out_hi = vec![0.0; weights.rows()];
    affine_bounds_into(weights, biases, &lo, &hi, &mut out_lo, &mut out_hi);
    IntervalBox::new(
        out_lo
            .iter()
            .zip(&out_hi)
            .map(|(&l, &h)| Interval::new(l, h))
            .collect::<Result<Vec<_>, _>>()?,
    )
}

/// Elementwise ReLU image: `[lo, hi] -> [max(0, lo), max(0, hi)]`.
pub fn relu_bounds(input: &IntervalBox) -> IntervalBox {
    IntervalBox {
        dims: input
            .dims
            .iter()
            .map(|d| Interval::from_ordered(d.lo.max(0.0), d.hi.max(0.0)))
            .collect(),
    }
}

/// Output box enclosing the network's image of `input`.
pub fn propagate(network: &Network, input: &IntervalBox) -> Result<IntervalBox, IntervalError> {
    if input.dim() != network.input_dim() {
        return Err(IntervalError::DimensionMismatch {
            expected: network.input_dim(),
            actual: input.dim(),
        });
    }
    let mut scratch = BoundScratch::default();
    let (lo, hi) = scratch.propagate(network, &input.lower(), &input.upper());
    let dims = lo
        .iter()
        .zip(hi)
        .map(|(&l, &h)| Interval::new(l, h))
        .collect::<Result<Vec<_>, _>>()?;
    IntervalBox::new(dims)
}

// Accumulation order must match `Network::forward` (sum of products, then
// bias) for the floating-point enclosure argument in the module docs.
pub(crate) fn affine_bounds_into(
    weights: &Matrix,
    biases: &[f64],
    lo: &[f64],
    hi: &[f64],
    out_lo: &mut [f64],
    out_hi: &mut [f64],
) {
    for (r, (ol, oh)) in out_lo.iter_mut().zip(out_hi.iter_mut()).enumerate() {
        let mut acc_lo = 0.0;
        let mut acc_hi = 0.0;
        for ((&w, &l), &h) in weights.row(r).iter().zip(lo).zip(hi) {
            if w >= 0.0 {
                acc_lo += w * l;
                acc_hi += w * h;
            } else {
                acc_lo += w * h;
                acc_hi += w * l;
            }
        }
        *ol = acc_lo + biases[r];
        *oh = acc_hi + biases[r];
    }
}

/// Reusable buffers for allocation-free propagation in hot loops.
#[derive(Debug, Default, Clone)]
pub(crate) struct BoundScratch {
    lo: Vec<f64>,
    hi: Vec<f64>,
    next_lo: Vec<f64>,
    next_hi: Vec<f64>,
}

impl BoundScratch {
    /// Propagates `[lo, hi]` through the network; the returned slices borrow
    /// the scratch buffers.
    pub(crate) fn propagate(&mut self, network: &Network, lo: &[f64], hi: &[f64]) -> (&[f64], &[f64]) {
        self.lo.clear();
        self.lo.extend_from_slice(lo);
        self.hi.clear();
        self.hi.extend_from_slice(hi);
        for layer in network.layers() {
            let rows = layer.weights().rows();
            self.next_lo.resize(rows, 0.0);
            self.next_hi.resize(rows, 0.0);
            affine_bounds_into(
                layer.weights(),
                layer.biases(),
                &self.lo,
                &self.hi,
                &mut self.next_lo,
                &mut self.next_hi,
            );
            if layer.activation() == Activation::Relu {
                for v in self.next_lo.iter_mut().chain(self.next_hi.iter_mut()) {
                    *v = v.max(0.0);
                }
            }
            std::mem::swap(&mut self.lo, &mut self.next_lo);
            std::mem::swap(&mut self.hi, &mut self.next_hi);
        }
        (&self.lo, &self.hi)
    }
}
