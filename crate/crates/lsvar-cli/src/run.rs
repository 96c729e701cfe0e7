//! Command dispatch: resolve a config, run it, write artifacts.

use std::fmt;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use lsvar::{
    default_stability_grid, error_metrics, fit_grid, interior_grid, io as lio, replicate,
    trimmed_grid, BuiltinDesign, CellKey, EntryKind, Error as LsError, KernelFamily, KernelSpec,
    Method, ModelSpec, Panel, ReplicationPlan, ReplicationSummary,
};
use serde::Serialize;

use crate::config::{parse_config, Command, GridConfig, MethodName, RunConfig, RunMetadata};

const DEFAULT_SEED: u64 = 1;
const DEFAULT_BAND_LEVEL: f64 = 0.90;
const DEFAULT_RIDGE_LAMBDA: f64 = 0.0;
const INTERIOR_TRIM: f64 = 0.1;
const BOUNDARY_BAND: f64 = 0.05;

/// CLI-level failure, carrying the process exit code.
#[derive(Debug)]
pub enum AppError {
    /// Bad configuration or unreadable/ill-formed input files. Exit 2.
    Config(String),
    /// Filesystem failure while writing artifacts. Exit 1.
    Io(String),
    /// Hard numerical failure in simulation or estimation. Exit 3.
    Numeric(String),
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::Io(_) => 1,
            AppError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "config error: {m}"),
            AppError::Io(m) => write!(f, "io error: {m}"),
            AppError::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

fn numeric(e: LsError) -> AppError {
    AppError::Numeric(e.to_string())
}

pub fn run_from_path(
    path: &Path,
    output_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<Vec<PathBuf>, AppError> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg = parse_config(&text).map_err(AppError::Config)?;
    if let Some(out) = output_override {
        cfg.output = Some(out.to_path_buf());
    }
    if let Some(seed) = seed_override {
        cfg.seed = Some(seed);
    }
    run(cfg)
}

/// Execute one resolved run; returns the paths written.
pub fn run(cfg: RunConfig) -> Result<Vec<PathBuf>, AppError> {
    match cfg.command {
        Command::Simulate => run_simulate(cfg),
        Command::Estimate => run_estimate(cfg),
        Command::Replicate => run_replicate(cfg),
        Command::Compare => run_compare(cfg),
    }
}

struct LoadedModel {
    spec: ModelSpec,
    design: Option<BuiltinDesign>,
}

fn require<T>(field: Option<T>, key: &str) -> Result<T, AppError> {
    field.ok_or_else(|| AppError::Config(format!("missing required key `{key}`")))
}

fn load_model(cfg: &RunConfig) -> Result<LoadedModel, AppError> {
    let model = require(cfg.model.clone(), "model")?;
    if let Some(tag) = model.strip_prefix("builtin:") {
        let design = BuiltinDesign::parse(tag).ok_or_else(|| {
            AppError::Config(format!(
                "key `model`: unknown builtin design {tag:?} (expected zero_mean_r6 or mean_r3)"
            ))
        })?;
        if cfg.innovation_cov.is_some() {
            return Err(AppError::Config(
                "key `innovation_cov` is only valid for custom models".into(),
            ));
        }
        return Ok(LoadedModel {
            spec: ModelSpec::builtin(design),
            design: Some(design),
        });
    }
    let file = fs::File::open(&model).map_err(|e| {
        AppError::Config(format!(
            "key `model`: cannot open curve file {model:?}: {e}"
        ))
    })?;
    let table = lio::read_curve_table_csv(BufReader::new(file))
        .map_err(|e| AppError::Config(format!("key `model`: {model:?}: {e}")))?;
    let dim = table.dim();
    let mut spec = ModelSpec::from_table(table);
    if let Some(cov) = &cfg.innovation_cov {
        if cov.len() != dim * dim {
            return Err(AppError::Config(format!(
                "key `innovation_cov` must have r*r = {} entries, got {}",
                dim * dim,
                cov.len()
            )));
        }
        let mat = ndarray_from_rowmajor(dim, cov);
        spec = spec
            .with_innovation_cov(mat)
            .map_err(|e| AppError::Config(format!("key `innovation_cov`: {e}")))?;
    }
    Ok(LoadedModel { spec, design: None })
}

fn ndarray_from_rowmajor(dim: usize, flat: &[f64]) -> lsvar::ndarray::Array2<f64> {
    lsvar::ndarray::Array2::from_shape_vec((dim, dim), flat.to_vec()).expect("length checked")
}

fn load_kernel(cfg: &RunConfig) -> Result<KernelSpec, AppError> {
    let kc = require(cfg.kernel.clone(), "kernel")?;
    let family = KernelFamily::parse(&kc.family).ok_or_else(|| {
        AppError::Config(format!(
            "key `kernel.family`: unknown family {:?} (expected gaussian or epanechnikov)",
            kc.family
        ))
    })?;
    KernelSpec::new(family, kc.bandwidth)
        .map_err(|e| AppError::Config(format!("key `kernel.bandwidth`: {e}")))
}

fn to_method(name: MethodName, cfg: &RunConfig) -> Result<Method, AppError> {
    Ok(match name {
        MethodName::YuleWalker => Method::YuleWalker,
        MethodName::LocalConstant => Method::LocalConstant,
        MethodName::LocalLinear => Method::LocalLinear,
        MethodName::Ridge => {
            let lambda = cfg.lambda.unwrap_or(DEFAULT_RIDGE_LAMBDA);
            if lambda < 0.0 || !lambda.is_finite() {
                return Err(AppError::Config(format!(
                    "key `lambda` must be a nonnegative finite number, got {lambda}"
                )));
            }
            Method::Ridge { lambda }
        }
    })
}

fn resolve_t_len(cfg: &RunConfig, loaded: &LoadedModel) -> Result<usize, AppError> {
    let t_len = match (cfg.t_len, loaded.design) {
        (Some(t), _) => t,
        (None, Some(design)) => design.default_len(),
        (None, None) => {
            return Err(AppError::Config(
                "missing required key `t_len` (custom models have no default sample size)".into(),
            ))
        }
    };
    if t_len < 2 {
        return Err(AppError::Config(format!(
            "key `t_len` must be at least 2, got {t_len}"
        )));
    }
    Ok(t_len)
}

fn resolve_grid(
    cfg: &RunConfig,
    method: Method,
    t_len: usize,
    h: f64,
) -> Result<Vec<f64>, AppError> {
    let grid = match cfg.grid.clone().unwrap_or(GridConfig::Default) {
        GridConfig::Default => match method {
            Method::YuleWalker | Method::LocalConstant => trimmed_grid(t_len, h),
            Method::LocalLinear | Method::Ridge { .. } => interior_grid(t_len),
        },
        GridConfig::Uniform { count, lo, hi } => {
            let bad = count < 1 || lo.is_nan() || hi.is_nan() || lo <= 0.0 || hi >= 1.0 || lo > hi;
            if bad {
                return Err(AppError::Config(format!(
                    "key `grid`: uniform grid needs count >= 1 and 0 < lo <= hi < 1, \
                     got count={count}, lo={lo}, hi={hi}"
                )));
            }
            if count == 1 {
                vec![(lo + hi) / 2.0]
            } else {
                let step = (hi - lo) / (count - 1) as f64;
                (0..count).map(|i| lo + i as f64 * step).collect()
            }
        }
        GridConfig::Explicit { points } => points,
    };
    if grid.is_empty() {
        return Err(AppError::Config("key `grid` resolves to no points".into()));
    }
    if grid.iter().any(|u| !(*u > 0.0 && *u < 1.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AppError::Config(
            "key `grid`: points must be strictly increasing inside (0,1)".into(),
        ));
    }
    Ok(grid)
}

fn check_stability(spec: &ModelSpec) -> Result<Vec<String>, AppError> {
    let report = spec
        .validate_stability(&default_stability_grid())
        .map_err(numeric)?;
    if !report.pass {
        return Err(AppError::Numeric(format!(
            "model fails the stability check: max spectral radius {} >= 1",
            report.max_radius
        )));
    }
    let mut warnings = Vec::new();
    if !spec.mean_origin_is_zero() {
        warnings.push("model has mu(0) != 0; simulation still starts from X_0 = 0".to_string());
    }
    Ok(warnings)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, AppError> {
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .map_err(|e| AppError::Io(format!("cannot create output dir {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_file(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<fs::File>) -> Result<(), AppError>,
) -> Result<(), AppError> {
    let file = fs::File::create(path)
        .map_err(|e| AppError::Io(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    write(&mut w)?;
    w.flush()
        .map_err(|e| AppError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

fn write_metadata(
    dir: &Path,
    resolved: &RunConfig,
    warnings: Vec<String>,
) -> Result<PathBuf, AppError> {
    let meta = RunMetadata {
        tool: "lsvar".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: resolved.clone(),
        warnings,
    };
    let path = dir.join("metadata.json");
    let text = serde_json::to_string_pretty(&meta)
        .map_err(|e| AppError::Io(format!("cannot serialize metadata: {e}")))?;
    write_file(&path, |w| {
        w.write_all(text.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| AppError::Io(format!("cannot write metadata: {e}")))
    })?;
    Ok(path)
}

fn report_point_failures(label: &str, failures: Vec<(f64, String)>) {
    for (u, msg) in failures {
        eprintln!("warning: {label}: fit failed at u = {u}: {msg}");
    }
}

fn run_simulate(cfg: RunConfig) -> Result<Vec<PathBuf>, AppError> {
    let loaded = load_model(&cfg)?;
    let t_len = resolve_t_len(&cfg, &loaded)?;
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let warnings = check_stability(&loaded.spec)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let panel = lsvar::simulate(&loaded.spec, t_len, seed).map_err(numeric)?;

    let mut resolved = cfg.clone();
    resolved.t_len = Some(t_len);
    resolved.seed = Some(seed);

    let dir = out_dir(&cfg)?;
    let panel_path = dir.join("panel.csv");
    write_file(&panel_path, |w| {
        lio::write_panel_csv(&panel, w).map_err(|e| AppError::Io(e.to_string()))
    })?;
    let meta = write_metadata(&dir, &resolved, warnings)?;
    Ok(vec![panel_path, meta])
}

fn load_panel(cfg: &RunConfig) -> Result<(Panel, PathBuf), AppError> {
    let path = require(cfg.panel.clone(), "panel")?;
    let file = fs::File::open(&path).map_err(|e| {
        AppError::Config(format!("key `panel`: cannot open {}: {e}", path.display()))
    })?;
    let panel = lio::read_panel_csv(BufReader::new(file))
        .map_err(|e| AppError::Config(format!("key `panel`: {}: {e}", path.display())))?;
    Ok((panel, path))
}

fn run_estimate(cfg: RunConfig) -> Result<Vec<PathBuf>, AppError> {
    let (panel, _) = load_panel(&cfg)?;
    let kernel = load_kernel(&cfg)?;
    let method_name = require(cfg.method, "method")?;
    let method = to_method(method_name, &cfg)?;
    let grid = resolve_grid(&cfg, method, panel.t_len(), kernel.bandwidth)?;

    let fitted = fit_grid(&panel, &kernel, method, &grid).map_err(numeric)?;
    report_point_failures(
        method.name(),
        fitted.failures().map(|(u, e)| (u, e.to_string())).collect(),
    );
    if fitted.ok_fits().next().is_none() {
        return Err(AppError::Numeric(
            "estimation failed at every grid point".into(),
        ));
    }

    let mut resolved = cfg.clone();
    resolved.t_len = Some(panel.t_len());
    resolved.grid = Some(GridConfig::Explicit { points: grid });
    if matches!(method, Method::Ridge { .. }) {
        resolved.lambda = Some(cfg.lambda.unwrap_or(DEFAULT_RIDGE_LAMBDA));
    }

    let dir = out_dir(&cfg)?;
    let fit_path = dir.join("fitgrid.csv");
    write_file(&fit_path, |w| {
        lio::write_fitgrid_csv(&fitted, w).map_err(|e| AppError::Io(e.to_string()))
    })?;
    let meta = write_metadata(&dir, &resolved, Vec::new())?;
    Ok(vec![fit_path, meta])
}

fn replicate_once(spec: &ModelSpec, plan: ReplicationPlan) -> Result<ReplicationSummary, AppError> {
    replicate(spec, &plan).map_err(numeric)
}

fn run_replicate(cfg: RunConfig) -> Result<Vec<PathBuf>, AppError> {
    let loaded = load_model(&cfg)?;
    let kernel = load_kernel(&cfg)?;
    let method_name = require(cfg.method, "method")?;
    let method = to_method(method_name, &cfg)?;
    let t_len = resolve_t_len(&cfg, &loaded)?;
    let m = require(cfg.replications, "replications")?;
    if m < 2 {
        return Err(AppError::Config(format!(
            "key `replications` must be at least 2, got {m}"
        )));
    }
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let band = cfg.band_level.unwrap_or(DEFAULT_BAND_LEVEL);
    if !(band > 0.0 && band <= 1.0) {
        return Err(AppError::Config(format!(
            "key `band_level` must lie in (0, 1], got {band}"
        )));
    }
    let grid = resolve_grid(&cfg, method, t_len, kernel.bandwidth)?;
    let warnings = check_stability(&loaded.spec)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let summary = replicate_once(
        &loaded.spec,
        ReplicationPlan {
            t_len,
            kernel,
            method,
            grid: grid.clone(),
            replications: m,
            base_seed: seed,
            band_level: band,
        },
    )?;

    let mut resolved = cfg.clone();
    resolved.t_len = Some(t_len);
    resolved.seed = Some(seed);
    resolved.band_level = Some(band);
    resolved.grid = Some(GridConfig::Explicit { points: grid });

    let dir = out_dir(&cfg)?;
    let summary_path = dir.join("summary.csv");
    write_file(&summary_path, |w| {
        lio::write_summary_csv(&summary, w).map_err(|e| AppError::Io(e.to_string()))
    })?;
    let meta = write_metadata(&dir, &resolved, warnings)?;
    Ok(vec![summary_path, meta])
}

#[derive(Serialize)]
struct CellIse {
    entry: &'static str,
    row: usize,
    col: usize,
    ise: f64,
}

#[derive(Serialize)]
struct MethodMetrics {
    method: &'static str,
    ise_mean: f64,
    ise_a_mean: Option<f64>,
    interior_abs_bias: f64,
    boundary_abs_bias: Option<f64>,
    ise_per_cell: Vec<CellIse>,
}

#[derive(Serialize)]
struct CompareReport {
    interior_trim: f64,
    boundary_band: f64,
    methods: Vec<MethodMetrics>,
}

fn cell_ise_rows(per_cell: &[(CellKey, f64)]) -> Vec<CellIse> {
    per_cell
        .iter()
        .map(|(k, v)| CellIse {
            entry: k.entry.name(),
            row: k.row + 1,
            col: k.col + 1,
            ise: *v,
        })
        .collect()
}

fn run_compare(cfg: RunConfig) -> Result<Vec<PathBuf>, AppError> {
    let loaded = load_model(&cfg)?;
    let kernel = load_kernel(&cfg)?;
    let method_names = require(cfg.methods.clone(), "methods")?;
    if method_names.len() != 2 {
        return Err(AppError::Config(format!(
            "key `methods` must list exactly 2 methods, got {}",
            method_names.len()
        )));
    }
    let t_len = resolve_t_len(&cfg, &loaded)?;
    let m = require(cfg.replications, "replications")?;
    if m < 2 {
        return Err(AppError::Config(format!(
            "key `replications` must be at least 2, got {m}"
        )));
    }
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let band = cfg.band_level.unwrap_or(DEFAULT_BAND_LEVEL);
    // one common grid so the two methods are compared point for point;
    // the default is the full interior grid, which exposes boundary bias
    let grid = match cfg.grid.clone().unwrap_or(GridConfig::Default) {
        GridConfig::Default => interior_grid(t_len),
        other => {
            let tmp = RunConfig {
                grid: Some(other),
                ..cfg.clone()
            };
            resolve_grid(&tmp, Method::LocalLinear, t_len, kernel.bandwidth)?
        }
    };
    let warnings = check_stability(&loaded.spec)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let dir = out_dir(&cfg)?;
    let mut artifacts = Vec::new();
    let mut metrics = Vec::new();
    for name in &method_names {
        let method = to_method(*name, &cfg)?;
        let summary = replicate_once(
            &loaded.spec,
            ReplicationPlan {
                t_len,
                kernel,
                method,
                grid: grid.clone(),
                replications: m,
                base_seed: seed,
                band_level: band,
            },
        )?;
        let ise = error_metrics(&summary, INTERIOR_TRIM).map_err(numeric)?;
        let edge = error_metrics(&summary, BOUNDARY_BAND).map_err(numeric)?;
        metrics.push(MethodMetrics {
            method: name.as_str(),
            ise_mean: ise.ise_mean,
            ise_a_mean: ise.ise_for(EntryKind::A),
            interior_abs_bias: ise.interior_abs_bias,
            boundary_abs_bias: edge.boundary_abs_bias,
            ise_per_cell: cell_ise_rows(&ise.ise_per_cell),
        });
        let path = dir.join(format!("summary_{}.csv", name.as_str()));
        write_file(&path, |w| {
            lio::write_summary_csv(&summary, w).map_err(|e| AppError::Io(e.to_string()))
        })?;
        artifacts.push(path);
    }

    let report = CompareReport {
        interior_trim: INTERIOR_TRIM,
        boundary_band: BOUNDARY_BAND,
        methods: metrics,
    };
    let metrics_path = dir.join("metrics.json");
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| AppError::Io(format!("cannot serialize metrics: {e}")))?;
    write_file(&metrics_path, |w| {
        w.write_all(text.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| AppError::Io(format!("cannot write metrics: {e}")))
    })?;
    artifacts.push(metrics_path);

    let mut resolved = cfg.clone();
    resolved.t_len = Some(t_len);
    resolved.seed = Some(seed);
    resolved.band_level = Some(band);
    resolved.grid = Some(GridConfig::Explicit { points: grid });
    let meta = write_metadata(&dir, &resolved, warnings)?;
    artifacts.push(meta);
    Ok(artifacts)
}
