//! Kernel functions and per-observation weight sequences.
//!
//! The diagonal matrices K_T(u) and D_1(u) that appear throughout the
//! estimation formulas are never materialized. A [`WeightVector`] stores
//! their diagonals, `w_t = K_h(t/T - u)` and `d_t = t/T - u` for
//! `t = 1..T`, and every downstream "matrix product" against them is a
//! weighted sum over observations.

use crate::error::{Error, Result};

/// Weights smaller than this are stored as exact zeros so that weighted
/// sums can skip them. Only relevant for the Gaussian kernel, whose
/// analytic support is unbounded.
pub const WEIGHT_FLOOR: f64 = 1e-12;

/// Kernel family of the smoothing weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    /// K(x) = exp(-x^2/2) / sqrt(2 pi), unbounded support.
    Gaussian,
    /// K(x) = 3/4 (1 - x^2) on |x| <= 1, zero outside.
    Epanechnikov,
}

impl KernelFamily {
    /// Evaluate the unscaled kernel K(x).
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            KernelFamily::Gaussian => (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            KernelFamily::Epanechnikov => {
                if x.abs() <= 1.0 {
                    0.75 * (1.0 - x * x)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "gaussian",
            KernelFamily::Epanechnikov => "epanechnikov",
        }
    }

    /// Parse the CLI spelling of a kernel family.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian" => Some(KernelFamily::Gaussian),
            "epanechnikov" => Some(KernelFamily::Epanechnikov),
            _ => None,
        }
    }
}

/// A kernel family together with a bandwidth in rescaled-time units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64) -> Result<Self> {
        if !bandwidth.is_finite() || bandwidth <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(KernelSpec { family, bandwidth })
    }

    /// The scaled kernel K_h(x) = K(x/h) / h.
    pub fn scaled(&self, x: f64) -> f64 {
        self.family.eval(x / self.bandwidth) / self.bandwidth
    }
}

/// The diagonals of K_T(u) and D_1(u) for one evaluation point u.
///
/// `weights[i]` and `deltas[i]` correspond to observation `t = i + 1`, so
/// `deltas[i] = (i + 1)/T - u`.
#[derive(Debug, Clone)]
pub struct WeightVector {
    u: f64,
    weights: Vec<f64>,
    deltas: Vec<f64>,
    sum: f64,
    support: (usize, usize),
}

impl WeightVector {
    /// Build the weight sequence for a sample of length `t_len` at the
    /// rescaled-time point `u`.
    pub fn build(spec: &KernelSpec, t_len: usize, u: f64) -> Result<Self> {
        if t_len < 2 {
            return Err(Error::InvalidParam(format!(
                "sample length must be at least 2, got {t_len}"
            )));
        }
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::InvalidParam(format!(
                "evaluation point must lie in (0,1), got {u}"
            )));
        }
        let t_f = t_len as f64;
        let mut weights = Vec::with_capacity(t_len);
        let mut deltas = Vec::with_capacity(t_len);
        for t in 1..=t_len {
            let d = t as f64 / t_f - u;
            let mut w = spec.scaled(d);
            if w < WEIGHT_FLOOR {
                w = 0.0;
            }
            deltas.push(d);
            weights.push(w);
        }
        Self::from_parts(u, weights, deltas).map_err(|e| match e {
            Error::AllWeightsZero { .. } => Error::AllWeightsZero {
                u,
                bandwidth: spec.bandwidth,
            },
            other => other,
        })
    }

    /// Assemble a weight vector from explicit weights and deltas. Used by
    /// tests and by callers supplying custom weighting schemes.
    pub fn from_parts(u: f64, weights: Vec<f64>, deltas: Vec<f64>) -> Result<Self> {
        if weights.len() != deltas.len() || weights.len() < 2 {
            return Err(Error::InvalidParam(
                "weights and deltas must have equal length >= 2".into(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParam(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        let first = weights.iter().position(|w| *w > 0.0);
        let last = weights.iter().rposition(|w| *w > 0.0);
        let support = match (first, last) {
            (Some(a), Some(b)) => (a, b + 1),
            _ => {
                return Err(Error::AllWeightsZero {
                    u,
                    bandwidth: f64::NAN,
                })
            }
        };
        Ok(WeightVector {
            u,
            weights,
            deltas,
            sum,
            support,
        })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn t_len(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    /// Sum of all weights (the scalar 1' K_T(u) 1).
    pub fn sum(&self) -> f64 {
        self.sum
    }

    /// Half-open index range `[lo, hi)` outside which every weight is zero.
    pub fn support(&self) -> (usize, usize) {
        self.support
    }

    /// Multiply every weight by a positive constant. Estimates are
    /// invariant under this rescaling; tests rely on it.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "scale factor must be positive, got {c}"
            )));
        }
        let weights = self.weights.iter().map(|w| w * c).collect();
        Self::from_parts(self.u, weights, self.deltas.clone())
    }
}
