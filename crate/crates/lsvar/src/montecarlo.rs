//! Replication harness: simulate, fit, and summarize pointwise sampling
//! distributions over a grid of evaluation points.

use ndarray::Array1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::{fit_grid, FitGrid, LocalFit, Method};
use crate::kernel::KernelSpec;
use crate::model::{default_stability_grid, ModelSpec};
use crate::sim::{simulate, Panel};

/// Which coefficient block a summary cell belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntryKind {
    /// Intercept vector m(u).
    M,
    /// VAR matrix A(u).
    A,
    /// Smoothed mean of the lagged block.
    Mu0,
    /// Smoothed mean of the current block.
    Mu1,
}

impl EntryKind {
    pub fn name(&self) -> &'static str {
        match self {
            EntryKind::M => "m",
            EntryKind::A => "A",
            EntryKind::Mu0 => "mu0",
            EntryKind::Mu1 => "mu1",
        }
    }
}

/// One scalar coefficient tracked across replications. Indices are
/// zero-based; vector entries use `col = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellKey {
    pub entry: EntryKind,
    pub row: usize,
    pub col: usize,
}

/// Pointwise sampling statistics of one cell at one grid point.
#[derive(Debug, Clone, Copy)]
pub struct PointStat {
    /// Mean of the successful replications; NaN when all failed.
    pub mean: f64,
    /// Lower empirical quantile at the configured band level.
    pub lo: f64,
    /// Upper empirical quantile at the configured band level.
    pub hi: f64,
    /// True coefficient value when the generating model is known.
    pub truth: Option<f64>,
    /// Pointwise root-mean-squared error against the truth.
    pub rmse: Option<f64>,
    /// Replications that failed to produce a fit at this point.
    pub nfail: usize,
    /// Set when more than 10% of replications failed here.
    pub flagged: bool,
}

/// The statistics of one cell over the whole grid.
#[derive(Debug, Clone)]
pub struct CellSeries {
    pub key: CellKey,
    pub stats: Vec<PointStat>,
}

/// Summary of M replications of a simulate-fit pipeline.
#[derive(Debug, Clone)]
pub struct ReplicationSummary {
    pub grid: Vec<f64>,
    pub replications: usize,
    pub base_seed: u64,
    pub band_level: f64,
    pub method: Method,
    pub kernel: KernelSpec,
    /// Replications whose simulation or whole-grid fit failed outright.
    pub failed_replications: usize,
    pub cells: Vec<CellSeries>,
}

impl ReplicationSummary {
    pub fn cell(&self, key: CellKey) -> Option<&CellSeries> {
        self.cells.iter().find(|c| c.key == key)
    }
}

/// Inputs of one replication run.
#[derive(Debug, Clone)]
pub struct ReplicationPlan {
    pub t_len: usize,
    pub kernel: KernelSpec,
    pub method: Method,
    pub grid: Vec<f64>,
    pub replications: usize,
    pub base_seed: u64,
    pub band_level: f64,
}

/// Empirical quantile band of a nonempty sample at the given level, using
/// inclusive linear interpolation between order statistics (the "type 7"
/// convention). Returns the ((1-level)/2, 1-(1-level)/2) quantile pair.
pub fn quantile_band(samples: &[f64], level: f64) -> (f64, f64) {
    assert!(!samples.is_empty(), "quantile_band of an empty sample");
    assert!(
        level > 0.0 && level <= 1.0,
        "band level must lie in (0, 1], got {level}"
    );
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples must not contain NaN"));
    let p_lo = (1.0 - level) / 2.0;
    (
        quantile_type7(&sorted, p_lo),
        quantile_type7(&sorted, 1.0 - p_lo),
    )
}

fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let idx = h.floor() as usize;
    let frac = h - idx as f64;
    if idx + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[idx] + frac * (sorted[idx + 1] - sorted[idx])
    }
}

fn aggregate_point(
    samples: &[f64],
    level: f64,
    truth: Option<f64>,
    nfail: usize,
    m: usize,
) -> PointStat {
    if samples.is_empty() {
        return PointStat {
            mean: f64::NAN,
            lo: f64::NAN,
            hi: f64::NAN,
            truth,
            rmse: None,
            nfail,
            flagged: true,
        };
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let (lo, hi) = quantile_band(samples, level);
    let rmse = truth.map(|t| {
        (samples.iter().map(|v| (v - t) * (v - t)).sum::<f64>() / samples.len() as f64).sqrt()
    });
    PointStat {
        mean,
        lo,
        hi,
        truth,
        rmse,
        nfail,
        flagged: nfail * 10 > m,
    }
}

fn cells_for(method: Method, dim: usize) -> Vec<CellKey> {
    let mut keys = Vec::new();
    let vec_entries: &[EntryKind] = match method {
        Method::YuleWalker => &[],
        Method::Ridge { .. } => &[EntryKind::M],
        Method::LocalConstant | Method::LocalLinear => &[EntryKind::M],
    };
    for &entry in vec_entries {
        for row in 0..dim {
            keys.push(CellKey { entry, row, col: 0 });
        }
    }
    for row in 0..dim {
        for col in 0..dim {
            keys.push(CellKey {
                entry: EntryKind::A,
                row,
                col,
            });
        }
    }
    if matches!(method, Method::LocalConstant | Method::LocalLinear) {
        for entry in [EntryKind::Mu0, EntryKind::Mu1] {
            for row in 0..dim {
                keys.push(CellKey { entry, row, col: 0 });
            }
        }
    }
    keys
}

fn cell_value(fit: &LocalFit, key: CellKey) -> Option<f64> {
    match key.entry {
        EntryKind::A => Some(fit.a[[key.row, key.col]]),
        EntryKind::M => fit.m.as_ref().map(|v| v[key.row]),
        EntryKind::Mu0 => fit.mu0.as_ref().map(|v| v[key.row]),
        EntryKind::Mu1 => fit.mu1.as_ref().map(|v| v[key.row]),
    }
}

fn cell_truth(spec: &ModelSpec, key: CellKey, u: f64, t_len: usize) -> f64 {
    // the lagged-block smoother mu0 targets the mean one step earlier
    let u_prev = (u - 1.0 / t_len as f64).max(0.0);
    match key.entry {
        EntryKind::A => spec.var_at(u)[[key.row, key.col]],
        EntryKind::Mu1 => spec.mean_at(u)[key.row],
        EntryKind::Mu0 => spec.mean_at(u_prev)[key.row],
        EntryKind::M => {
            let m: Array1<f64> = &spec.mean_at(u) - &spec.var_at(u).dot(&spec.mean_at(u_prev));
            m[key.row]
        }
    }
}

/// Run M replications of simulate-then-fit and aggregate the results.
/// Replication i uses seed `base_seed + 1 + i`. Deterministic given the
/// plan; replications run in parallel on the current rayon pool and are
/// reduced in replication order.
pub fn replicate(spec: &ModelSpec, plan: &ReplicationPlan) -> Result<ReplicationSummary> {
    let report = spec.validate_stability(&default_stability_grid())?;
    if !report.pass {
        return Err(Error::StabilityCheckFailed {
            max_radius: report.max_radius,
        });
    }
    let t_len = plan.t_len;
    let base = plan.base_seed;
    replicate_with(
        |i| simulate(spec, t_len, base + 1 + i as u64),
        Some(spec),
        plan,
    )
}

/// Replication harness over an arbitrary panel source (used by tests to
/// inject fixed panels). `truth` enables truth columns and RMSE.
pub fn replicate_with<F>(
    source: F,
    truth: Option<&ModelSpec>,
    plan: &ReplicationPlan,
) -> Result<ReplicationSummary>
where
    F: Fn(usize) -> Result<Panel> + Sync,
{
    if plan.replications < 2 {
        return Err(Error::InvalidParam(format!(
            "replications must be at least 2, got {}",
            plan.replications
        )));
    }
    if plan.grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if !(plan.band_level > 0.0 && plan.band_level <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "band level must lie in (0, 1], got {}",
            plan.band_level
        )));
    }
    let m = plan.replications;
    let outcomes: Vec<Result<FitGrid>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let panel = source(i)?;
            fit_grid(&panel, &plan.kernel, plan.method, &plan.grid)
        })
        .collect();

    let failed_replications = outcomes.iter().filter(|o| o.is_err()).count();
    let grids: Vec<&FitGrid> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let dim = grids
        .first()
        .and_then(|g| g.ok_fits().next())
        .map(|f| f.a.nrows())
        .or_else(|| truth.map(|s| s.dim()))
        .ok_or_else(|| {
            Error::InvalidParam("every replication failed; nothing to summarize".into())
        })?;

    let keys = cells_for(plan.method, dim);
    let n_grid = plan.grid.len();
    let mut cells = Vec::with_capacity(keys.len());
    for key in keys {
        let mut stats = Vec::with_capacity(n_grid);
        for (gi, &u) in plan.grid.iter().enumerate() {
            let mut samples = Vec::with_capacity(grids.len());
            let mut nfail = m - grids.len();
            for g in &grids {
                match &g.points[gi].outcome {
                    Ok(fit) => match cell_value(fit, key) {
                        Some(v) => samples.push(v),
                        None => nfail += 1,
                    },
                    Err(_) => nfail += 1,
                }
            }
            let truth_v = truth.map(|s| cell_truth(s, key, u, plan.t_len));
            stats.push(aggregate_point(
                &samples,
                plan.band_level,
                truth_v,
                nfail,
                m,
            ));
        }
        cells.push(CellSeries { key, stats });
    }
    Ok(ReplicationSummary {
        grid: plan.grid.clone(),
        replications: m,
        base_seed: plan.base_seed,
        band_level: plan.band_level,
        method: plan.method,
        kernel: plan.kernel,
        failed_replications,
        cells,
    })
}

/// Interior integrated squared error and boundary-bias profile of a
/// summary against its truth curves.
#[derive(Debug, Clone)]
pub struct ErrorMetrics {
    /// Mean squared deviation of the mean curve from truth over the
    /// interior grid, one value per cell.
    pub ise_per_cell: Vec<(CellKey, f64)>,
    /// Average of `ise_per_cell`.
    pub ise_mean: f64,
    /// Mean |bias| over grid points within `trim` of 0 or 1; `None` when
    /// the grid has no such points.
    pub boundary_abs_bias: Option<f64>,
    /// Mean |bias| over the interior grid.
    pub interior_abs_bias: f64,
}

impl ErrorMetrics {
    /// Average ISE over the cells of one entry kind.
    pub fn ise_for(&self, entry: EntryKind) -> Option<f64> {
        let vals: Vec<f64> = self
            .ise_per_cell
            .iter()
            .filter(|(k, _)| k.entry == entry)
            .map(|(_, v)| *v)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

/// Compute [`ErrorMetrics`] with the interior defined as u in
/// [trim, 1 - trim] and the boundary as the complement.
pub fn error_metrics(summary: &ReplicationSummary, trim: f64) -> Result<ErrorMetrics> {
    if !(trim > 0.0 && trim < 0.5) {
        return Err(Error::InvalidParam(format!(
            "trim fraction must lie in (0, 0.5), got {trim}"
        )));
    }
    if !summary
        .cells
        .iter()
        .any(|c| c.stats.iter().any(|s| s.truth.is_some()))
    {
        return Err(Error::NoTruth);
    }
    let interior: Vec<usize> = summary
        .grid
        .iter()
        .enumerate()
        .filter(|(_, u)| **u >= trim && **u <= 1.0 - trim)
        .map(|(i, _)| i)
        .collect();
    let boundary: Vec<usize> = summary
        .grid
        .iter()
        .enumerate()
        .filter(|(_, u)| **u < trim || **u > 1.0 - trim)
        .map(|(i, _)| i)
        .collect();
    if interior.is_empty() {
        return Err(Error::InvalidParam(
            "no grid points fall in the interior band".into(),
        ));
    }

    let bias_at = |c: &CellSeries, i: usize| -> Option<f64> {
        let s = &c.stats[i];
        match (s.truth, s.mean.is_nan()) {
            (Some(t), false) => Some(s.mean - t),
            _ => None,
        }
    };

    let mut ise_per_cell = Vec::with_capacity(summary.cells.len());
    let mut boundary_biases = Vec::new();
    let mut interior_biases = Vec::new();
    for c in &summary.cells {
        let sq: Vec<f64> = interior
            .iter()
            .filter_map(|&i| bias_at(c, i).map(|b| b * b))
            .collect();
        if !sq.is_empty() {
            ise_per_cell.push((c.key, sq.iter().sum::<f64>() / sq.len() as f64));
        }
        interior_biases.extend(interior.iter().filter_map(|&i| bias_at(c, i).map(f64::abs)));
        boundary_biases.extend(boundary.iter().filter_map(|&i| bias_at(c, i).map(f64::abs)));
    }
    if ise_per_cell.is_empty() {
        return Err(Error::NoTruth);
    }
    let ise_mean = ise_per_cell.iter().map(|(_, v)| *v).sum::<f64>() / ise_per_cell.len() as f64;
    let interior_abs_bias = interior_biases.iter().sum::<f64>() / interior_biases.len() as f64;
    let boundary_abs_bias = if boundary_biases.is_empty() {
        None
    } else {
        Some(boundary_biases.iter().sum::<f64>() / boundary_biases.len() as f64)
    };
    Ok(ErrorMetrics {
        ise_per_cell,
        ise_mean,
        boundary_abs_bias,
        interior_abs_bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantile_band_full_range() {
        assert_eq!(quantile_band(&[1.0, 2.0, 3.0, 4.0, 5.0], 1.0), (1.0, 5.0));
    }

    #[test]
    fn quantile_band_constant_sample() {
        assert_eq!(quantile_band(&[7.0; 9], 0.5), (7.0, 7.0));
    }

    #[test]
    fn quantile_band_type7_interpolation() {
        let samples: Vec<f64> = (1..=100).map(|x| x as f64).collect();
        let (lo, hi) = quantile_band(&samples, 0.90);
        assert!((lo - 5.95).abs() < 1e-12);
        assert!((hi - 95.05).abs() < 1e-12);
    }

    #[test]
    fn aggregate_point_order_statistics() {
        let s = aggregate_point(&[1.0, 2.0, 3.0], 1.0, None, 0, 3);
        assert_eq!(s.mean, 2.0);
        assert_eq!((s.lo, s.hi), (1.0, 3.0));
        assert!(!s.flagged);
    }

    #[test]
    fn aggregate_point_rmse_dominates_bias() {
        let s = aggregate_point(&[1.0, 2.0, 3.0, 10.0], 0.9, Some(2.5), 0, 4);
        let bias = s.mean - 2.5;
        assert!(s.rmse.unwrap() >= bias.abs());
    }

    #[test]
    fn aggregate_point_flags_failures() {
        let s = aggregate_point(&[1.0, 2.0], 0.9, None, 3, 20);
        assert!(s.flagged); // 3/20 > 10%
        let s = aggregate_point(&[1.0, 2.0], 0.9, None, 2, 20);
        assert!(!s.flagged);
    }

    proptest! {
        #[test]
        fn quantile_band_permutation_invariant(
            mut xs in proptest::collection::vec(-100.0f64..100.0, 1..40),
            level in 0.05f64..1.0,
            swap_a in 0usize..40,
            swap_b in 0usize..40,
        ) {
            let before = quantile_band(&xs, level);
            let n = xs.len();
            xs.swap(swap_a % n, swap_b % n);
            prop_assert_eq!(before, quantile_band(&xs, level));
        }

        #[test]
        fn quantile_bands_widen_with_level(
            xs in proptest::collection::vec(-100.0f64..100.0, 2..40),
        ) {
            let (lo90, hi90) = quantile_band(&xs, 0.90);
            let (lo95, hi95) = quantile_band(&xs, 0.95);
            prop_assert!(lo95 <= lo90 + 1e-12);
            prop_assert!(hi95 >= hi90 - 1e-12);
        }
    }
}
