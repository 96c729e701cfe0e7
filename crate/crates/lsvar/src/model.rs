//! Data-generating process: the curves mu(u) and A(u), the innovation
//! covariance, the built-in simulation designs, and the stability check.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;

/// Grid used by default for stability validation: u = k/200, k = 1..199.
pub fn default_stability_grid() -> Vec<f64> {
    (1..200).map(|k| k as f64 / 200.0).collect()
}

/// Largest eigenvalue modulus of a (generally non-symmetric) real matrix.
///
/// Computed through a real Schur reduction with iteration budget
/// `10 * r^2` and tolerance 1e-10.
pub fn spectral_radius(a: &ArrayView2<f64>) -> Result<f64> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::InvalidParam(format!(
            "spectral radius needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParam(
            "spectral radius of a non-finite matrix".into(),
        ));
    }
    let max_iter = 10 * n * n;
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
    let schur = nalgebra::linalg::Schur::try_new(m, 1e-10, max_iter)
        .ok_or(Error::NoConvergence { max_iter })?;
    let eig = schur.complex_eigenvalues();
    Ok(eig.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Result of checking sup_u |v1(A(u))| < 1 over a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub max_radius: f64,
    pub pass: bool,
}

/// The two simulation designs used in the replication studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinDesign {
    /// r = 6, T = 800, a1 = 0.2, a2 = 0.1, zero mean.
    ZeroMeanR6,
    /// r = 3, T = 600, a1 = 0.3, a2 = 0.2, sinusoidal mean with
    /// omega_k = 0.5 + k and phi_k = 0.2 + k/3.
    MeanR3,
}

impl BuiltinDesign {
    pub fn dim(&self) -> usize {
        match self {
            BuiltinDesign::ZeroMeanR6 => 6,
            BuiltinDesign::MeanR3 => 3,
        }
    }

    /// Sample size the design was defined with.
    pub fn default_len(&self) -> usize {
        match self {
            BuiltinDesign::ZeroMeanR6 => 800,
            BuiltinDesign::MeanR3 => 600,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            BuiltinDesign::ZeroMeanR6 => "zero_mean_r6",
            BuiltinDesign::MeanR3 => "mean_r3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero_mean_r6" => Some(BuiltinDesign::ZeroMeanR6),
            "mean_r3" => Some(BuiltinDesign::MeanR3),
            _ => None,
        }
    }

    /// Evaluate (mu(u), A(u)) for this design.
    pub fn curves(&self, u: f64) -> (Array1<f64>, Array2<f64>) {
        match self {
            BuiltinDesign::ZeroMeanR6 => {
                let (a1, a2) = (0.2, 0.1);
                let r = 6;
                let mut a = Array2::<f64>::zeros((r, r));
                // two blocks of three rows, j = 1 and j = 4 (one-based)
                for j in [1usize, 4] {
                    let jf = j as f64;
                    for k in 1..=r {
                        let kf = k as f64;
                        a[[j - 1, k - 1]] = a1 * (jf + 3.0).sqrt() / (kf + 3.0).ln()
                            * (4.0 * PI * u * (jf + 4.0).sqrt() / (kf + 4.0).ln()).sin();
                        a[[j, k - 1]] = a1 * (jf + 2.0).sqrt() / (kf + 3.0).ln()
                            * (2.0 * PI * u * (jf + 4.0).sqrt() / (kf + 2.0).ln()).cos();
                        a[[j + 1, k - 1]] = a2 * (jf + 1.0).sqrt() / (kf + 3.0).ln()
                            * (PI * u * (jf + 4.0).sqrt() / (kf + 2.0).ln()).sin();
                    }
                }
                (Array1::zeros(r), a)
            }
            BuiltinDesign::MeanR3 => {
                let (a1, a2) = (0.3, 0.2);
                let r = 3;
                let mut mu = Array1::<f64>::zeros(r);
                for k in 1..=r {
                    let kf = k as f64;
                    let omega = 0.5 + kf;
                    let phi = 0.2 + kf / 3.0;
                    mu[k - 1] = 6.0_f64.sqrt() * (PI * omega * u - phi).sin();
                }
                let mut a = Array2::<f64>::zeros((r, r));
                let sqrt7 = 7.0_f64.sqrt();
                for k in 1..=r {
                    let kf = k as f64;
                    a[[0, k - 1]] = a1 * 6.0_f64.sqrt() / (kf + 3.0).ln()
                        * (1.2 + 2.0 * PI * u * sqrt7 / (kf + 4.0).ln()).sin();
                    a[[1, k - 1]] = a1 * 5.0_f64.sqrt() / (kf + 3.0).ln()
                        * (1.2 + 2.0 * PI * u * sqrt7 / (kf + 2.0).ln()).cos();
                    a[[2, k - 1]] =
                        a2 * 2.0 / (kf + 3.0).ln() * (1.2 + PI * u * sqrt7 / (kf + 2.0).ln()).sin();
                }
                (mu, a)
            }
        }
    }
}

pub type MeanFn = Arc<dyn Fn(f64) -> Array1<f64> + Send + Sync>;
pub type VarFn = Arc<dyn Fn(f64) -> Array2<f64> + Send + Sync>;

/// Piecewise-linear curve table read from a custom-model CSV.
#[derive(Debug, Clone)]
pub struct CurveTable {
    dim: usize,
    us: Vec<f64>,
    means: Vec<Array1<f64>>,
    mats: Vec<Array2<f64>>,
}

impl CurveTable {
    /// Build from knots `(u, mu(u), A(u))`. Knots must be strictly
    /// increasing in u; evaluation clamps outside the knot range.
    pub fn new(us: Vec<f64>, means: Vec<Array1<f64>>, mats: Vec<Array2<f64>>) -> Result<Self> {
        if us.is_empty() || us.len() != means.len() || us.len() != mats.len() {
            return Err(Error::InvalidParam(
                "curve table needs equal, nonzero numbers of knots".into(),
            ));
        }
        if us.iter().any(|u| u.is_nan()) || us.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParam(
                "curve table knots must be strictly increasing in u".into(),
            ));
        }
        let dim = means[0].len();
        if dim == 0
            || means.iter().any(|m| m.len() != dim)
            || mats.iter().any(|a| a.nrows() != dim || a.ncols() != dim)
        {
            return Err(Error::InvalidParam(
                "curve table entries have inconsistent dimensions".into(),
            ));
        }
        Ok(CurveTable {
            dim,
            us,
            means,
            mats,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn locate(&self, u: f64) -> (usize, usize, f64) {
        let n = self.us.len();
        if u <= self.us[0] {
            return (0, 0, 0.0);
        }
        if u >= self.us[n - 1] {
            return (n - 1, n - 1, 0.0);
        }
        let hi = self.us.partition_point(|x| *x < u).min(n - 1);
        let lo = hi - 1;
        let frac = (u - self.us[lo]) / (self.us[hi] - self.us[lo]);
        (lo, hi, frac)
    }

    pub fn mean_at(&self, u: f64) -> Array1<f64> {
        let (lo, hi, f) = self.locate(u);
        &self.means[lo] * (1.0 - f) + &self.means[hi] * f
    }

    pub fn var_at(&self, u: f64) -> Array2<f64> {
        let (lo, hi, f) = self.locate(u);
        &self.mats[lo] * (1.0 - f) + &self.mats[hi] * f
    }
}

enum CurveSource {
    Builtin(BuiltinDesign),
    Table(CurveTable),
    Fns { mean: MeanFn, var: VarFn },
}

impl fmt::Debug for CurveSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CurveSource::Builtin(d) => write!(f, "Builtin({d:?})"),
            CurveSource::Table(_) => write!(f, "Table"),
            CurveSource::Fns { .. } => write!(f, "Fns"),
        }
    }
}

impl Clone for CurveSource {
    fn clone(&self) -> Self {
        match self {
            CurveSource::Builtin(d) => CurveSource::Builtin(*d),
            CurveSource::Table(t) => CurveSource::Table(t.clone()),
            CurveSource::Fns { mean, var } => CurveSource::Fns {
                mean: Arc::clone(mean),
                var: Arc::clone(var),
            },
        }
    }
}

/// The full data-generating process: curves plus innovation covariance.
///
/// Immutable after construction; curve evaluation is pure and safe to run
/// concurrently at many u.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    dim: usize,
    source: CurveSource,
    innovation_cov: Array2<f64>,
}

impl ModelSpec {
    /// A built-in design with identity innovation covariance.
    pub fn builtin(design: BuiltinDesign) -> Self {
        let dim = design.dim();
        ModelSpec {
            dim,
            source: CurveSource::Builtin(design),
            innovation_cov: Array2::eye(dim),
        }
    }

    /// A model defined by interpolated curve knots, identity covariance.
    pub fn from_table(table: CurveTable) -> Self {
        let dim = table.dim();
        ModelSpec {
            dim,
            source: CurveSource::Table(table),
            innovation_cov: Array2::eye(dim),
        }
    }

    /// A model defined by closures, identity covariance.
    pub fn from_fns(dim: usize, mean: MeanFn, var: VarFn) -> Self {
        ModelSpec {
            dim,
            source: CurveSource::Fns { mean, var },
            innovation_cov: Array2::eye(dim),
        }
    }

    /// Replace the innovation covariance. The matrix must be symmetric
    /// within 1e-12 and positive definite.
    pub fn with_innovation_cov(mut self, cov: Array2<f64>) -> Result<Self> {
        if cov.nrows() != self.dim || cov.ncols() != self.dim {
            return Err(Error::InvalidParam(format!(
                "innovation covariance must be {0}x{0}",
                self.dim
            )));
        }
        let scale = cov.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        for i in 0..self.dim {
            for j in 0..i {
                if (cov[[i, j]] - cov[[j, i]]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParam(
                        "innovation covariance is not symmetric".into(),
                    ));
                }
            }
        }
        if SpdFactor::new(&cov.view()).is_none() {
            return Err(Error::InvalidParam(
                "innovation covariance is not positive definite".into(),
            ));
        }
        self.innovation_cov = cov;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn innovation_cov(&self) -> &Array2<f64> {
        &self.innovation_cov
    }

    pub fn mean_at(&self, u: f64) -> Array1<f64> {
        match &self.source {
            CurveSource::Builtin(d) => d.curves(u).0,
            CurveSource::Table(t) => t.mean_at(u),
            CurveSource::Fns { mean, .. } => mean(u),
        }
    }

    pub fn var_at(&self, u: f64) -> Array2<f64> {
        match &self.source {
            CurveSource::Builtin(d) => d.curves(u).1,
            CurveSource::Table(t) => t.var_at(u),
            CurveSource::Fns { var, .. } => var(u),
        }
    }

    /// True when the model honors the X_0 = mu(0) = 0 convention.
    pub fn mean_origin_is_zero(&self) -> bool {
        self.mean_at(0.0).iter().all(|x| x.abs() <= 1e-12)
    }

    /// Check sup |v1(A(u))| < 1 over the supplied grid.
    pub fn validate_stability(&self, grid: &[f64]) -> Result<StabilityReport> {
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if grid.iter().any(|u| !(*u > 0.0 && *u < 1.0)) {
            return Err(Error::InvalidParam(
                "stability grid points must lie in (0,1)".into(),
            ));
        }
        let mut max_radius = 0.0f64;
        for &u in grid {
            let a = self.var_at(u);
            max_radius = max_radius.max(spectral_radius(&a.view())?);
        }
        Ok(StabilityReport {
            max_radius,
            pass: max_radius < 1.0,
        })
    }
}
