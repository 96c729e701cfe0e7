//! CSV formats for panels, fit grids, and replication summaries.
//!
//! Numeric fields are written with 17 significant digits so that reading a
//! file back reproduces the original f64 values bit for bit.

use std::io::{BufRead, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::estimate::FitGrid;
use crate::montecarlo::ReplicationSummary;
use crate::sim::Panel;

/// Format a float with 17 significant digits (round-trip safe).
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write a panel as `t,x1,...,xr` rows.
pub fn write_panel_csv<W: Write>(panel: &Panel, out: &mut W) -> Result<()> {
    let r = panel.dim();
    let mut header = String::from("t");
    for j in 1..=r {
        header.push_str(&format!(",x{j}"));
    }
    writeln!(out, "{header}")?;
    for (t, row) in panel.values().rows().into_iter().enumerate() {
        let mut line = format!("{}", t + 1);
        for v in row.iter() {
            line.push(',');
            line.push_str(&fmt_g17(*v));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Read a panel written by [`write_panel_csv`].
pub fn read_panel_csv<R: BufRead>(input: R) -> Result<Panel> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("panel csv is empty".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err(Error::Parse(format!(
            "panel csv header must be t,x1,...,xr, got {header:?}"
        )));
    }
    let r = cols.len() - 1;
    for (j, c) in cols[1..].iter().enumerate() {
        if *c != format!("x{}", j + 1) {
            return Err(Error::Parse(format!(
                "panel csv header column {} should be x{}, got {c:?}",
                j + 2,
                j + 1
            )));
        }
    }
    let mut rows: Vec<f64> = Vec::new();
    let mut t_len = 0usize;
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != r + 1 {
            return Err(Error::Parse(format!(
                "panel csv row {} has {} columns, expected {}",
                i + 2,
                fields.len(),
                r + 1
            )));
        }
        let t: usize = fields[0]
            .parse()
            .map_err(|_| Error::Parse(format!("bad t index {:?} on row {}", fields[0], i + 2)))?;
        if t != i + 1 {
            return Err(Error::Parse(format!(
                "panel csv rows must be t = 1..T in order; row {} has t = {t}",
                i + 2
            )));
        }
        for f in &fields[1..] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::Parse(format!("bad value {f:?} on row {}", i + 2)))?;
            rows.push(v);
        }
        t_len += 1;
    }
    let values = Array2::from_shape_vec((t_len, r), rows)
        .map_err(|e| Error::Parse(format!("panel shape error: {e}")))?;
    Panel::new(values)
}

/// Write a fit grid in long format: `u,method,entry,row,col,value`.
/// Row and column indices are one-based. Failed grid points contribute no
/// rows; they are reported through [`FitGrid::failures`].
pub fn write_fitgrid_csv<W: Write>(grid: &FitGrid, out: &mut W) -> Result<()> {
    writeln!(out, "u,method,entry,row,col,value")?;
    let method = grid.method.name();
    for point in &grid.points {
        let fit = match &point.outcome {
            Ok(f) => f,
            Err(_) => continue,
        };
        let u = fmt_g17(point.u);
        if let Some(m) = &fit.m {
            for (i, v) in m.iter().enumerate() {
                writeln!(out, "{u},{method},m,{},1,{}", i + 1, fmt_g17(*v))?;
            }
        }
        for ((i, j), v) in fit.a.indexed_iter() {
            writeln!(out, "{u},{method},A,{},{},{}", i + 1, j + 1, fmt_g17(*v))?;
        }
        if let Some(mu0) = &fit.mu0 {
            for (i, v) in mu0.iter().enumerate() {
                writeln!(out, "{u},{method},mu0,{},1,{}", i + 1, fmt_g17(*v))?;
            }
        }
        if let Some(mu1) = &fit.mu1 {
            for (i, v) in mu1.iter().enumerate() {
                writeln!(out, "{u},{method},mu1,{},1,{}", i + 1, fmt_g17(*v))?;
            }
        }
    }
    Ok(())
}

/// Write a replication summary: `u,entry,row,col,mean,lo,hi,truth,rmse,nfail`.
/// Truth and rmse are empty when the generating model is unknown.
pub fn write_summary_csv<W: Write>(summary: &ReplicationSummary, out: &mut W) -> Result<()> {
    writeln!(out, "u,entry,row,col,mean,lo,hi,truth,rmse,nfail")?;
    for cell in &summary.cells {
        for (u, s) in summary.grid.iter().zip(&cell.stats) {
            let truth = s.truth.map(fmt_g17).unwrap_or_default();
            let rmse = s.rmse.map(fmt_g17).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{truth},{rmse},{}",
                fmt_g17(*u),
                cell.key.entry.name(),
                cell.key.row + 1,
                cell.key.col + 1,
                fmt_g17(s.mean),
                fmt_g17(s.lo),
                fmt_g17(s.hi),
                s.nfail
            )?;
        }
    }
    Ok(())
}

/// Parse a custom-model curve file: `u,mu_1..mu_r,a_11..a_rr` (A row-major)
/// with a header line. The dimension is inferred from the column count.
pub fn read_curve_table_csv<R: BufRead>(input: R) -> Result<crate::model::CurveTable> {
    use ndarray::Array1;
    let mut us = Vec::new();
    let mut means = Vec::new();
    let mut mats = Vec::new();
    let mut dim: Option<usize> = None;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if i == 0 {
            // header; dimension comes from the column count: 1 + r + r^2
            let ncols = trimmed.split(',').count();
            let r = ((-1.0 + ((4 * ncols - 3) as f64).sqrt()) / 2.0).round() as usize;
            if 1 + r + r * r != ncols || r == 0 {
                return Err(Error::Parse(format!(
                    "curve csv has {ncols} columns; expected 1 + r + r^2 for integer r"
                )));
            }
            dim = Some(r);
            continue;
        }
        let r = dim.unwrap();
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 1 + r + r * r {
            return Err(Error::Parse(format!(
                "curve csv row {} has {} columns, expected {}",
                i + 1,
                fields.len(),
                1 + r + r * r
            )));
        }
        let parse = |f: &str, row: usize| -> Result<f64> {
            f.parse()
                .map_err(|_| Error::Parse(format!("bad value {f:?} on curve csv row {row}")))
        };
        us.push(parse(fields[0], i + 1)?);
        let mu = Array1::from_iter(
            fields[1..1 + r]
                .iter()
                .map(|f| parse(f, i + 1))
                .collect::<Result<Vec<_>>>()?,
        );
        let a = Array2::from_shape_vec(
            (r, r),
            fields[1 + r..]
                .iter()
                .map(|f| parse(f, i + 1))
                .collect::<Result<Vec<_>>>()?,
        )
        .expect("field count checked above");
        means.push(mu);
        mats.push(a);
    }
    crate::model::CurveTable::new(us, means, mats)
}
