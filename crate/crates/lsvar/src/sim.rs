//! Triangular-array sample paths and the design matrices built from them.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;
use crate::model::ModelSpec;

/// Absolute value beyond which a simulated entry is treated as divergence.
const DIVERGENCE_LIMIT: f64 = 1e12;

/// One sample path X_1..X_T, row t-1 holding X_t'. The pre-sample value
/// X_0 = 0 is a convention, not a stored row.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    dim: usize,
    values: Array2<f64>,
}

impl Panel {
    /// Wrap a T x r value matrix. Entries must be finite, T >= 2, r >= 1.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (t_len, dim) = values.dim();
        if t_len < 2 || dim < 1 {
            return Err(Error::InvalidParam(format!(
                "panel must be at least 2x1, got {t_len}x{dim}"
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParam(
                "panel contains non-finite values".into(),
            ));
        }
        Ok(Panel { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_len(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// The lagged/current design matrices and the intercept-augmented
/// regressor block:
///
/// * `x0` — rows X_0 .. X_{T-1}
/// * `x1` — rows X_1 .. X_T
/// * `z0` — `[1 | x0]`
#[derive(Debug, Clone)]
pub struct DesignMatrices {
    x0: Array2<f64>,
    x1: Array2<f64>,
    z0: Array2<f64>,
}

impl DesignMatrices {
    /// Assemble from explicit regressor and response blocks. The shift
    /// relationship between `x0` and `x1` is not required here; synthetic
    /// designs (noise-free exactness checks, external regression problems)
    /// legitimately break it.
    pub fn from_raw(x0: Array2<f64>, x1: Array2<f64>) -> Result<Self> {
        if x0.dim() != x1.dim() {
            return Err(Error::InvalidParam(format!(
                "x0 {:?} and x1 {:?} must have equal shape",
                x0.dim(),
                x1.dim()
            )));
        }
        let (t_len, dim) = x0.dim();
        if t_len < 2 || dim < 1 {
            return Err(Error::InvalidParam(format!(
                "design must be at least 2x1, got {t_len}x{dim}"
            )));
        }
        let mut z0 = Array2::<f64>::ones((t_len, dim + 1));
        z0.slice_mut(ndarray::s![.., 1..]).assign(&x0);
        Ok(DesignMatrices { x0, x1, z0 })
    }

    pub fn dim(&self) -> usize {
        self.x0.ncols()
    }

    pub fn t_len(&self) -> usize {
        self.x0.nrows()
    }

    pub fn x0(&self) -> &Array2<f64> {
        &self.x0
    }

    pub fn x1(&self) -> &Array2<f64> {
        &self.x1
    }

    pub fn z0(&self) -> &Array2<f64> {
        &self.z0
    }
}

/// Build the design matrices of a panel: X_0 = 0 is prepended and the last
/// observation dropped to form the lag block.
pub fn build_design(panel: &Panel) -> DesignMatrices {
    let t_len = panel.t_len();
    let dim = panel.dim();
    let mut x0 = Array2::<f64>::zeros((t_len, dim));
    x0.slice_mut(ndarray::s![1.., ..])
        .assign(&panel.values().slice(ndarray::s![..t_len - 1, ..]));
    DesignMatrices::from_raw(x0, panel.values().clone()).expect("panel shapes are valid")
}

/// Simulate the recursion X_t - mu(t/T) = A(t/T)[X_{t-1} - mu((t-1)/T)] + e_t
/// from X_0 = 0 exactly, with e_t ~ N(0, innovation_cov) drawn from a
/// ChaCha20 generator seeded with `seed`. Deterministic given
/// `(spec, t_len, seed)`. Designs with mu(0) != 0 still start at X_0 = 0,
/// which injects a decaying excursion of size ||mu(0)|| into the earliest
/// observations; `ModelSpec::mean_origin_is_zero` lets callers detect and
/// report this.
///
/// Callers are expected to have run `validate_stability`; if the path still
/// diverges past 1e12 the simulation aborts with [`Error::UnstableModel`].
pub fn simulate(spec: &ModelSpec, t_len: usize, seed: u64) -> Result<Panel> {
    let chol = SpdFactor::new(&spec.innovation_cov().view()).ok_or_else(|| {
        Error::InvalidParam("innovation covariance is not positive definite".into())
    })?;
    let lower = chol.lower().clone();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let dim = spec.dim();
    let mut draw = move || -> Array1<f64> {
        let z = Array1::from_iter((0..dim).map(|_| StandardNormal.sample(&mut rng)));
        lower.dot(&z)
    };
    simulate_with(spec, t_len, &mut draw)
}

/// Simulate with the innovations forced to zero. The deterministic skeleton
/// of the process; used by exactness tests and diagnostics.
pub fn simulate_noiseless(spec: &ModelSpec, t_len: usize) -> Result<Panel> {
    let dim = spec.dim();
    let mut draw = move || Array1::<f64>::zeros(dim);
    simulate_with(spec, t_len, &mut draw)
}

fn simulate_with(
    spec: &ModelSpec,
    t_len: usize,
    draw: &mut dyn FnMut() -> Array1<f64>,
) -> Result<Panel> {
    if t_len < 2 {
        return Err(Error::InvalidParam(format!(
            "sample length must be at least 2, got {t_len}"
        )));
    }
    let dim = spec.dim();
    let t_f = t_len as f64;
    let mut values = Array2::<f64>::zeros((t_len, dim));
    let mut prev = Array1::<f64>::zeros(dim); // X_0 = 0 exactly
    let mut mu_prev = spec.mean_at(0.0);
    for t in 1..=t_len {
        let u = t as f64 / t_f;
        let mu = spec.mean_at(u);
        let a = spec.var_at(u);
        let centered = &prev - &mu_prev;
        let x = &mu + &a.dot(&centered) + draw();
        if x.iter()
            .any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT)
        {
            return Err(Error::UnstableModel {
                t,
                limit: DIVERGENCE_LIMIT,
            });
        }
        values.index_axis_mut(Axis(0), t - 1).assign(&x);
        prev = x;
        mu_prev = mu;
    }
    Panel::new(values)
}

/// Lag-0 sample autocovariance (1/T) sum_t X_t X_t' of a zero-mean panel.
pub fn sample_autocov(values: &ArrayView2<f64>) -> Array2<f64> {
    let t_len = values.nrows() as f64;
    values.t().dot(values) / t_len
}
