//! Replication-harness behavior: determinism, aggregation identities,
//! coverage sanity, and error metrics.

mod common;

use std::sync::Arc;

use lsvar::montecarlo::{CellSeries, PointStat};
use lsvar::ndarray::{Array1, Array2};
use lsvar::{
    error_metrics, fit_grid, replicate, replicate_with, simulate, CellKey, EntryKind, Error,
    KernelFamily, KernelSpec, Method, ModelSpec, ReplicationPlan, ReplicationSummary,
};

fn small_spec() -> ModelSpec {
    // r = 2, slowly rotating A(u) with sinusoidal means
    ModelSpec::from_fns(
        2,
        Arc::new(|u: f64| {
            Array1::from_vec(vec![
                (std::f64::consts::PI * u).sin(),
                0.5 * (2.0 * std::f64::consts::PI * u).cos(),
            ])
        }),
        Arc::new(|u: f64| {
            Array2::from_shape_vec(
                (2, 2),
                vec![
                    0.4 * (std::f64::consts::PI * u).cos(),
                    0.1,
                    -0.1,
                    0.3 * (std::f64::consts::PI * u).sin(),
                ],
            )
            .unwrap()
        }),
    )
}

fn plan(method: Method, m: usize, grid: Vec<f64>) -> ReplicationPlan {
    ReplicationPlan {
        t_len: 200,
        kernel: KernelSpec::new(KernelFamily::Epanechnikov, 0.15).unwrap(),
        method,
        grid,
        replications: m,
        base_seed: 7,
        band_level: 0.90,
    }
}

#[test]
fn replicate_is_deterministic() {
    let spec = small_spec();
    let p = plan(Method::LocalLinear, 5, vec![0.3, 0.5, 0.7]);
    let a = replicate(&spec, &p).unwrap();
    let b = replicate(&spec, &p).unwrap();
    assert_eq!(a.cells.len(), b.cells.len());
    for (ca, cb) in a.cells.iter().zip(&b.cells) {
        assert_eq!(ca.key, cb.key);
        for (sa, sb) in ca.stats.iter().zip(&cb.stats) {
            assert_eq!(sa.mean.to_bits(), sb.mean.to_bits());
            assert_eq!(sa.lo.to_bits(), sb.lo.to_bits());
            assert_eq!(sa.hi.to_bits(), sb.hi.to_bits());
        }
    }
}

#[test]
fn mean_curve_equals_mean_of_replication_curves() {
    let spec = small_spec();
    let grid = vec![0.3, 0.5, 0.7];
    let m = 6;
    let p = plan(Method::LocalConstant, m, grid.clone());
    let summary = replicate(&spec, &p).unwrap();
    // recompute the mean by hand from the individual replications
    let kernel = p.kernel;
    let mut grids = Vec::new();
    for i in 0..m {
        let panel = simulate(&spec, p.t_len, p.base_seed + 1 + i as u64).unwrap();
        grids.push(fit_grid(&panel, &kernel, Method::LocalConstant, &grid).unwrap());
    }
    let cell = summary
        .cell(CellKey {
            entry: EntryKind::A,
            row: 0,
            col: 1,
        })
        .unwrap();
    for (gi, stat) in cell.stats.iter().enumerate() {
        let vals: Vec<f64> = grids
            .iter()
            .map(|g| g.points[gi].outcome.as_ref().unwrap().a[[0, 1]])
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((stat.mean - mean).abs() < 1e-12);
        assert_eq!(stat.nfail, 0);
    }
}

#[test]
fn truth_lies_inside_band_at_half_the_interior_points() {
    // loose coverage floor: the band tracks estimator spread, which
    // contains the truth only up to smoothing bias
    let spec = small_spec();
    let grid: Vec<f64> = (2..=18).map(|k| k as f64 / 20.0).collect();
    let p = plan(Method::LocalLinear, 100, grid);
    let summary = replicate(&spec, &p).unwrap();
    let mut inside = 0usize;
    let mut total = 0usize;
    for cell in &summary.cells {
        if cell.key.entry != EntryKind::A {
            continue;
        }
        for (u, s) in summary.grid.iter().zip(&cell.stats) {
            if *u < 0.1 || *u > 0.9 {
                continue;
            }
            let truth = s.truth.unwrap();
            total += 1;
            if truth >= s.lo && truth <= s.hi {
                inside += 1;
            }
        }
    }
    let frac = inside as f64 / total as f64;
    assert!(frac >= 0.5, "coverage fraction {frac} over {total} points");
}

#[test]
fn replicate_with_injects_fixed_panels() {
    let spec = small_spec();
    let panels: Vec<_> = (0..4)
        .map(|i| simulate(&spec, 200, 1000 + i).unwrap())
        .collect();
    let p = plan(Method::LocalConstant, 4, vec![0.4, 0.6]);
    let summary = replicate_with(|i| Ok(panels[i].clone()), None, &p).unwrap();
    // no model spec passed: no truth, no rmse
    for cell in &summary.cells {
        for s in &cell.stats {
            assert!(s.truth.is_none());
            assert!(s.rmse.is_none());
        }
    }
    assert_eq!(summary.failed_replications, 0);
    // error metrics on a truthless summary must refuse
    assert!(matches!(error_metrics(&summary, 0.1), Err(Error::NoTruth)));
}

fn synthetic_summary(grid: Vec<f64>, means: Vec<f64>, truths: Vec<f64>) -> ReplicationSummary {
    let stats: Vec<PointStat> = means
        .iter()
        .zip(&truths)
        .map(|(m, t)| PointStat {
            mean: *m,
            lo: m - 1.0,
            hi: m + 1.0,
            truth: Some(*t),
            rmse: Some((m - t).abs()),
            nfail: 0,
            flagged: false,
        })
        .collect();
    ReplicationSummary {
        grid,
        replications: 10,
        base_seed: 0,
        band_level: 0.9,
        method: Method::LocalConstant,
        kernel: KernelSpec::new(KernelFamily::Gaussian, 0.1).unwrap(),
        failed_replications: 0,
        cells: vec![CellSeries {
            key: CellKey {
                entry: EntryKind::A,
                row: 0,
                col: 0,
            },
            stats,
        }],
    }
}

#[test]
fn error_metrics_zero_when_mean_equals_truth() {
    let grid: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let truths: Vec<f64> = grid.iter().map(|u| u * u).collect();
    let summary = synthetic_summary(grid, truths.clone(), truths);
    let metrics = error_metrics(&summary, 0.1).unwrap();
    assert_eq!(metrics.ise_mean, 0.0);
    assert_eq!(metrics.interior_abs_bias, 0.0);
}

#[test]
fn error_metrics_constant_bias_squares() {
    let grid: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    let truths: Vec<f64> = grid.iter().map(|u| u * u).collect();
    let means: Vec<f64> = truths.iter().map(|t| t + 0.25).collect();
    let summary = synthetic_summary(grid, means, truths);
    let metrics = error_metrics(&summary, 0.1).unwrap();
    assert!((metrics.ise_mean - 0.0625).abs() < 1e-14);
    assert!((metrics.interior_abs_bias - 0.25).abs() < 1e-14);
    // trim 0.1 with this grid leaves no boundary points
    assert!(metrics.boundary_abs_bias.is_none());
    // a tighter trim classifies u = 0.1 and 0.9 as boundary
    let metrics = error_metrics(&summary, 0.15).unwrap();
    assert!((metrics.boundary_abs_bias.unwrap() - 0.25).abs() < 1e-14);
}

#[test]
fn failed_points_are_counted_not_fatal() {
    // Epanechnikov bandwidth below the grid step: every fit fails, at
    // every point, in every replication
    let spec = small_spec();
    let mut p = plan(Method::LocalConstant, 3, vec![0.5]);
    p.kernel = KernelSpec::new(KernelFamily::Epanechnikov, 0.001).unwrap();
    let summary = replicate(&spec, &p).unwrap();
    for cell in &summary.cells {
        for s in &cell.stats {
            assert_eq!(s.nfail, 3);
            assert!(s.flagged);
            assert!(s.mean.is_nan());
        }
    }
}

#[test]
fn band_levels_nest_across_summaries() {
    let spec = small_spec();
    let mut p90 = plan(Method::LocalConstant, 40, vec![0.4, 0.6]);
    let mut p95 = p90.clone();
    p90.band_level = 0.90;
    p95.band_level = 0.95;
    let s90 = replicate(&spec, &p90).unwrap();
    let s95 = replicate(&spec, &p95).unwrap();
    for (c90, c95) in s90.cells.iter().zip(&s95.cells) {
        for (a, b) in c90.stats.iter().zip(&c95.stats) {
            assert!(b.lo <= a.lo + 1e-12);
            assert!(b.hi >= a.hi - 1e-12);
        }
    }
}
