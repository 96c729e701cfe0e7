//! Pointwise estimators of the time-varying mean and VAR matrix.
//!
//! Four routes share one backbone: kernel-weighted cross products of the
//! design blocks followed by a factor-and-solve of the resulting Gram
//! matrix. Products against the diagonal kernel matrix are weighted sums
//! over the support of the weight vector, and products against the
//! local-linear weighting matrix W = K - K D Z (Z' D K D Z)^{-1} Z' D K go
//! through its factored low-rank form, so nothing of size T x T is ever
//! materialized.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, WeightVector};
use crate::linalg::{factor_gram, fro_norm, solve_general, SpdFactor};
use crate::sim::{DesignMatrices, Panel};

/// Estimation method for one fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    YuleWalker,
    LocalConstant,
    LocalLinear,
    Ridge { lambda: f64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::YuleWalker => "yule_walker",
            Method::LocalConstant => "local_constant",
            Method::LocalLinear => "local_linear",
            Method::Ridge { .. } => "ridge",
        }
    }
}

/// One pointwise fit at rescaled time u.
///
/// `a` is always populated. The intercept `m`, the smoothed means
/// `mu0`/`mu1`, and the centered cross products `g0`/`g1` are populated by
/// the methods that define them (local-constant and local-linear; ridge
/// populates `m` and the slope block only; Yule-Walker estimates `a` alone).
#[derive(Debug, Clone)]
pub struct LocalFit {
    pub u: f64,
    pub method: Method,
    /// Estimated VAR matrix A(u), r x r.
    pub a: Array2<f64>,
    /// Estimated intercept m(u) = mu(u) - A(u) mu(u - 1/T).
    pub m: Option<Array1<f64>>,
    /// Kernel- or W-smoothed mean of the lagged block.
    pub mu0: Option<Array1<f64>>,
    /// Kernel- or W-smoothed mean of the current block.
    pub mu1: Option<Array1<f64>>,
    /// Centered lag-0 cross product G(u, 0).
    pub g0: Option<Array2<f64>>,
    /// Centered lag-1 cross product G(u, 1).
    pub g1: Option<Array2<f64>>,
    /// Ridge only: estimate of the slope block B'(u), r x (r+1).
    pub slope: Option<Array2<f64>>,
    /// 1-norm condition estimate of the inverted Gram matrix.
    pub condition: f64,
}

impl LocalFit {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// The stacked coefficient matrix [m | A], r x (r+1). `None` for
    /// Yule-Walker fits, which carry no intercept.
    pub fn b_hat(&self) -> Option<Array2<f64>> {
        let m = self.m.as_ref()?;
        let r = self.dim();
        let mut b = Array2::<f64>::zeros((r, r + 1));
        b.column_mut(0).assign(m);
        b.slice_mut(s![.., 1..]).assign(&self.a);
        Some(b)
    }

    /// Largest relative deviation between the directly solved coefficients
    /// and the mean/autocovariance decomposition route
    /// `[mu1 - A mu0 | G1 G0^{-1}]`. `None` when the decomposition blocks
    /// are absent or G0 cannot be factored.
    pub fn decomposition_gap(&self) -> Option<f64> {
        let (m, mu0, mu1, g0, g1) = (
            self.m.as_ref()?,
            self.mu0.as_ref()?,
            self.mu1.as_ref()?,
            self.g0.as_ref()?,
            self.g1.as_ref()?,
        );
        let f = SpdFactor::new(&g0.view())?;
        let a_alt = f.solve_mat(&g1.t()).t().to_owned();
        let m_alt = mu1 - &a_alt.dot(mu0);
        // relative for O(1) coefficients, absolute near zero
        let gap_a = {
            let diff = &self.a - &a_alt;
            fro_norm(&diff.view()) / (1.0 + fro_norm(&self.a.view()))
        };
        let gap_m = {
            let diff = m - &m_alt;
            let m_norm = m.iter().map(|x| x * x).sum::<f64>().sqrt();
            diff.iter().map(|x| x * x).sum::<f64>().sqrt() / (1.0 + m_norm)
        };
        Some(gap_a.max(gap_m))
    }
}

fn condition_of(f: &SpdFactor) -> f64 {
    if f.rcond() > 0.0 {
        1.0 / f.rcond()
    } else {
        f64::INFINITY
    }
}

/// A' K B = sum_t w_t a_t b_t' over the support of the weights.
pub(crate) fn weighted_cross(
    w: &WeightVector,
    a: &ArrayView2<f64>,
    b: &ArrayView2<f64>,
) -> Array2<f64> {
    let (lo, hi) = w.support();
    let mut wa = a.slice(s![lo..hi, ..]).to_owned();
    for (mut row, &wt) in wa.rows_mut().into_iter().zip(&w.weights()[lo..hi]) {
        row *= wt;
    }
    wa.t().dot(&b.slice(s![lo..hi, ..]))
}

/// A' K 1 = sum_t w_t a_t.
fn weighted_colsum(w: &WeightVector, a: &ArrayView2<f64>) -> Array1<f64> {
    let (lo, hi) = w.support();
    let mut out = Array1::<f64>::zeros(a.ncols());
    for t in lo..hi {
        let wt = w.weights()[t];
        if wt != 0.0 {
            out.scaled_add(wt, &a.row(t));
        }
    }
    out
}

/// sum_t w_t (a_t - abar)(b_t - bbar)' over the support.
fn centered_cross(
    w: &WeightVector,
    a: &ArrayView2<f64>,
    abar: &ArrayView1<f64>,
    b: &ArrayView2<f64>,
    bbar: &ArrayView1<f64>,
) -> Array2<f64> {
    let (lo, hi) = w.support();
    let mut out = Array2::<f64>::zeros((a.ncols(), b.ncols()));
    for t in lo..hi {
        let wt = w.weights()[t];
        if wt == 0.0 {
            continue;
        }
        let da = &a.row(t) - abar;
        let db = &b.row(t) - bbar;
        for i in 0..da.len() {
            let s = wt * da[i];
            for j in 0..db.len() {
                out[[i, j]] += s * db[j];
            }
        }
    }
    out
}

#[cfg(debug_assertions)]
fn debug_check_decomposition(fit: &LocalFit) {
    if fit.condition < 1e8 {
        if let Some(gap) = fit.decomposition_gap() {
            debug_assert!(
                gap < 1e-6,
                "decomposition identity violated: gap = {gap:.3e} at u = {}",
                fit.u
            );
        }
    }
}

/// Localized Yule-Walker estimate of A(u): the weighted lag-1 cross product
/// times the inverse weighted lag-0 cross product of the lagged block.
pub fn yule_walker_local(design: &DesignMatrices, kernel: &KernelSpec, u: f64) -> Result<LocalFit> {
    let w = WeightVector::build(kernel, design.t_len(), u)?;
    yule_walker_weighted(design, &w)
}

/// Yule-Walker estimate under explicit weights.
pub fn yule_walker_weighted(design: &DesignMatrices, w: &WeightVector) -> Result<LocalFit> {
    let gram = weighted_cross(w, &design.x0().view(), &design.x0().view());
    let cross = weighted_cross(w, &design.x1().view(), &design.x0().view());
    let f = factor_gram(&gram.view())?;
    let a = f.solve_mat(&cross.t()).t().to_owned();
    Ok(LocalFit {
        u: w.u(),
        method: Method::YuleWalker,
        a,
        m: None,
        mu0: None,
        mu1: None,
        g0: None,
        g1: None,
        slope: None,
        condition: condition_of(&f),
    })
}

/// Local-constant WLS fit of [m(u) | A(u)]: the minimizer of the
/// kernel-weighted squared loss under the approximation B(t/T) ~ B(u).
pub fn local_constant_fit(
    design: &DesignMatrices,
    kernel: &KernelSpec,
    u: f64,
) -> Result<LocalFit> {
    let w = WeightVector::build(kernel, design.t_len(), u)?;
    local_constant_weighted(design, &w)
}

/// Local-constant fit under explicit weights.
pub fn local_constant_weighted(design: &DesignMatrices, w: &WeightVector) -> Result<LocalFit> {
    let z0 = design.z0().view();
    let gram = weighted_cross(w, &z0, &z0);
    let cross = weighted_cross(w, &design.x1().view(), &z0);
    let f = factor_gram(&gram.view())?;
    let b = f.solve_mat(&cross.t()).t().to_owned();

    let wsum = w.sum();
    let mu0 = weighted_colsum(w, &design.x0().view()) / wsum;
    let mu1 = weighted_colsum(w, &design.x1().view()) / wsum;
    let g0 = centered_cross(
        w,
        &design.x0().view(),
        &mu0.view(),
        &design.x0().view(),
        &mu0.view(),
    );
    let g1 = centered_cross(
        w,
        &design.x1().view(),
        &mu1.view(),
        &design.x0().view(),
        &mu0.view(),
    );

    let fit = LocalFit {
        u: w.u(),
        method: Method::LocalConstant,
        a: b.slice(s![.., 1..]).to_owned(),
        m: Some(b.column(0).to_owned()),
        mu0: Some(mu0),
        mu1: Some(mu1),
        g0: Some(g0),
        g1: Some(g1),
        slope: None,
        condition: condition_of(&f),
    };
    #[cfg(debug_assertions)]
    debug_check_decomposition(&fit);
    Ok(fit)
}

/// Factored form of the local-linear weighting matrix
/// W = K - Q S^{-1} Q' with Q = K D Z0 and S = Z0' D K D Z0.
///
/// Applying W to a vector or forming A' W B costs O(T r), never O(T^2).
#[derive(Debug, Clone)]
pub struct LocalLinearWeights {
    base: WeightVector,
    /// K D Z0, T x (r+1); rows outside the weight support are zero.
    q: Array2<f64>,
    /// Cholesky factor of S = Z0' D K D Z0.
    s: SpdFactor,
}

impl LocalLinearWeights {
    pub fn u(&self) -> f64 {
        self.base.u()
    }

    pub fn base(&self) -> &WeightVector {
        &self.base
    }

    /// W v.
    pub fn apply(&self, v: &ArrayView1<f64>) -> Array1<f64> {
        let t_len = self.base.t_len();
        let (lo, hi) = self.base.support();
        let mut out = Array1::<f64>::zeros(t_len);
        for t in lo..hi {
            out[t] = self.base.weights()[t] * v[t];
        }
        let qtv = self.q.slice(s![lo..hi, ..]).t().dot(&v.slice(s![lo..hi]));
        let y = self.s.solve_vec(&qtv.view());
        out.slice_mut(s![lo..hi])
            .scaled_add(-1.0, &self.q.slice(s![lo..hi, ..]).dot(&y));
        out
    }

    /// A' W B without materializing W.
    pub fn cross(&self, a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Array2<f64> {
        let (lo, hi) = self.base.support();
        let base = weighted_cross(&self.base, a, b);
        let qa = self
            .q
            .slice(s![lo..hi, ..])
            .t()
            .dot(&a.slice(s![lo..hi, ..]));
        let qb = self
            .q
            .slice(s![lo..hi, ..])
            .t()
            .dot(&b.slice(s![lo..hi, ..]));
        let y = self.s.solve_mat(&qb.view());
        base - qa.t().dot(&y)
    }
}

/// Build the factored local-linear weighting for evaluation point u.
pub fn local_linear_weights(
    design: &DesignMatrices,
    kernel: &KernelSpec,
    u: f64,
) -> Result<LocalLinearWeights> {
    let w = WeightVector::build(kernel, design.t_len(), u)?;
    local_linear_weights_from(design, w)
}

/// Build the factored weighting from an explicit kernel weight vector.
pub fn local_linear_weights_from(
    design: &DesignMatrices,
    w: WeightVector,
) -> Result<LocalLinearWeights> {
    let t_len = design.t_len();
    let p = design.dim() + 1;
    let z0 = design.z0();
    let mut q = Array2::<f64>::zeros((t_len, p));
    let (lo, hi) = w.support();
    for t in lo..hi {
        let wd = w.weights()[t] * w.deltas()[t];
        if wd != 0.0 {
            q.row_mut(t).assign(&(&z0.row(t) * wd));
        }
    }
    // S = Z0' D K D Z0 = sum_t w_t d_t^2 z_t z_t'
    let mut s_mat = Array2::<f64>::zeros((p, p));
    for t in lo..hi {
        let wt = w.weights()[t] * w.deltas()[t] * w.deltas()[t];
        if wt == 0.0 {
            continue;
        }
        let z = z0.row(t);
        for i in 0..p {
            let zi = wt * z[i];
            for j in 0..p {
                s_mat[[i, j]] += zi * z[j];
            }
        }
    }
    let s = SpdFactor::new(&s_mat.view()).ok_or(Error::SingularCorrection)?;
    if s.rcond() < crate::linalg::RCOND_MIN {
        return Err(Error::SingularCorrection);
    }
    Ok(LocalLinearWeights { base: w, q, s })
}

/// Local-linear WLS fit of [m(u) | A(u)]: same closed form as the
/// local-constant fit with W in place of K.
pub fn local_linear_fit(design: &DesignMatrices, kernel: &KernelSpec, u: f64) -> Result<LocalFit> {
    let llw = local_linear_weights(design, kernel, u)?;
    local_linear_fit_weighted(design, &llw)
}

/// Local-linear fit from a prebuilt weighting.
pub fn local_linear_fit_weighted(
    design: &DesignMatrices,
    llw: &LocalLinearWeights,
) -> Result<LocalFit> {
    let z0 = design.z0().view();
    let x0 = design.x0().view();
    let x1 = design.x1().view();
    let gram = llw.cross(&z0, &z0);
    let cross = llw.cross(&x1, &z0);
    let f = factor_gram(&gram.view())?;
    let b = f.solve_mat(&cross.t()).t().to_owned();

    let t_len = design.t_len();
    let ones = Array2::<f64>::ones((t_len, 1));
    let ones_v = ones.view();
    let denom = llw.cross(&ones_v, &ones_v)[[0, 0]];
    let w10 = llw.cross(&x0, &ones_v); // X0' W 1, r x 1
    let w11 = llw.cross(&x1, &ones_v); // X1' W 1, r x 1
    let mu0 = &w10.column(0) / denom;
    let mu1 = &w11.column(0) / denom;
    let w00 = llw.cross(&x0, &x0);
    let w10t = llw.cross(&x1, &x0);
    // raw-form centered products: G~ = X'WX - (X'W1)(1'WX)/(1'W1)
    let g0 = &w00 - &(w10.dot(&w10.t()) / denom);
    let g1 = &w10t - &(w11.dot(&w10.t()) / denom);

    let fit = LocalFit {
        u: llw.u(),
        method: Method::LocalLinear,
        a: b.slice(s![.., 1..]).to_owned(),
        m: Some(b.column(0).to_owned()),
        mu0: Some(mu0),
        mu1: Some(mu1),
        g0: Some(g0),
        g1: Some(g1),
        slope: None,
        condition: condition_of(&f),
    };
    #[cfg(debug_assertions)]
    debug_check_decomposition(&fit);
    Ok(fit)
}

/// WLS-Ridge fit: the stacked local-linear coefficients under kernel
/// weights with a spherical penalty lambda on every coefficient. The first
/// (r+1)-column block is reported as [m | A]; the second block, the slope
/// estimate, is kept in `slope`.
pub fn ridge_fit(
    design: &DesignMatrices,
    kernel: &KernelSpec,
    u: f64,
    lambda: f64,
) -> Result<LocalFit> {
    let w = WeightVector::build(kernel, design.t_len(), u)?;
    ridge_weighted(design, &w, lambda)
}

/// Ridge fit under explicit weights.
pub fn ridge_weighted(design: &DesignMatrices, w: &WeightVector, lambda: f64) -> Result<LocalFit> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::InvalidParam(format!(
            "ridge penalty must be a nonnegative finite number, got {lambda}"
        )));
    }
    let t_len = design.t_len();
    let p = design.dim() + 1;
    // Z~ = [Z0 | D Z0], T x 2(r+1)
    let mut ztil = Array2::<f64>::zeros((t_len, 2 * p));
    ztil.slice_mut(s![.., ..p]).assign(design.z0());
    for t in 0..t_len {
        let d = w.deltas()[t];
        for j in 0..p {
            ztil[[t, p + j]] = d * design.z0()[[t, j]];
        }
    }
    let ztil_v = ztil.view();
    let mut gram = weighted_cross(w, &ztil_v, &ztil_v);
    for i in 0..2 * p {
        gram[[i, i]] += lambda;
    }
    let cross = weighted_cross(w, &design.x1().view(), &ztil_v);
    let f = factor_gram(&gram.view())?;
    let btil = f.solve_mat(&cross.t()).t().to_owned();
    let b = btil.slice(s![.., ..p]).to_owned();
    Ok(LocalFit {
        u: w.u(),
        method: Method::Ridge { lambda },
        a: b.slice(s![.., 1..]).to_owned(),
        m: Some(b.column(0).to_owned()),
        mu0: None,
        mu1: None,
        g0: None,
        g1: None,
        slope: Some(btil.slice(s![.., p..]).to_owned()),
        condition: condition_of(&f),
    })
}

/// Dispatch one pointwise fit.
pub fn fit_at(
    design: &DesignMatrices,
    kernel: &KernelSpec,
    method: Method,
    u: f64,
) -> Result<LocalFit> {
    match method {
        Method::YuleWalker => yule_walker_local(design, kernel, u),
        Method::LocalConstant => local_constant_fit(design, kernel, u),
        Method::LocalLinear => local_linear_fit(design, kernel, u),
        Method::Ridge { lambda } => ridge_fit(design, kernel, u, lambda),
    }
}

/// Outcome of one grid point: either the fit, or the error it produced.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub u: f64,
    pub outcome: Result<LocalFit>,
}

/// Pointwise fits over an ordered grid of evaluation points. Failures at
/// individual points are recorded in place and do not abort the grid.
#[derive(Debug, Clone)]
pub struct FitGrid {
    pub kernel: KernelSpec,
    pub method: Method,
    pub points: Vec<GridPoint>,
}

impl FitGrid {
    pub fn ok_fits(&self) -> impl Iterator<Item = &LocalFit> {
        self.points.iter().filter_map(|p| p.outcome.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (f64, &Error)> {
        self.points
            .iter()
            .filter_map(|p| p.outcome.as_ref().err().map(|e| (p.u, e)))
    }
}

/// Fit every grid point of a panel with one method.
pub fn fit_grid(
    panel: &Panel,
    kernel: &KernelSpec,
    method: Method,
    grid: &[f64],
) -> Result<FitGrid> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.iter().any(|u| !(*u > 0.0 && *u < 1.0)) {
        return Err(Error::InvalidParam(
            "grid points must lie strictly inside (0,1)".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParam(
            "grid points must be strictly increasing".into(),
        ));
    }
    let design = crate::sim::build_design(panel);
    let points = grid
        .iter()
        .map(|&u| GridPoint {
            u,
            outcome: fit_at(&design, kernel, method, u),
        })
        .collect();
    Ok(FitGrid {
        kernel: *kernel,
        method,
        points,
    })
}

/// Default evaluation grid u = t/T for t = ceil(hT) .. floor((1-h)T),
/// the boundary-trimmed grid appropriate for local-constant fits.
pub fn trimmed_grid(t_len: usize, h: f64) -> Vec<f64> {
    let t_f = t_len as f64;
    let lo = ((h * t_f).ceil() as usize).max(1);
    let hi = (((1.0 - h) * t_f).floor() as usize).min(t_len - 1);
    (lo..=hi).map(|t| t as f64 / t_f).collect()
}

/// Full interior grid u = t/T for t = 1 .. T-1. Local-linear fits do not
/// need boundary trimming.
pub fn interior_grid(t_len: usize) -> Vec<f64> {
    (1..t_len).map(|t| t as f64 / t_len as f64).collect()
}

/// How to turn a pointwise fit into a mean estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanMode {
    /// mu1(u), the weighted smoother of X_t. The default.
    Smoother,
    /// (I - A(u))^{-1} m(u), valid when I - A(u) is invertible.
    LongRun,
}

/// Recover the mean estimate mu(u) from a fit.
pub fn recover_mean(fit: &LocalFit, mode: MeanMode) -> Result<Array1<f64>> {
    match mode {
        MeanMode::Smoother => fit.mu1.clone().ok_or_else(|| {
            Error::InvalidParam(format!(
                "mu1 is not populated by the {} method",
                fit.method.name()
            ))
        }),
        MeanMode::LongRun => {
            let m = fit.m.as_ref().ok_or_else(|| {
                Error::InvalidParam(format!(
                    "m is not populated by the {} method",
                    fit.method.name()
                ))
            })?;
            let eye = Array2::<f64>::eye(fit.a.nrows());
            let i_minus_a = &eye - &fit.a;
            solve_general(&i_minus_a.view(), &m.view()).ok_or(Error::SingularIminusA)
        }
    }
}
