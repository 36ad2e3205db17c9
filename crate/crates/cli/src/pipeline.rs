//! The end-to-end analysis and the building blocks the individual verbs share.

use std::time::Instant;

use chrono::NaiveDateTime;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use varlab::fevd::{decompose, FevdTable};
use varlab::frame::format_timestamp;
use varlab::ingest::{align_hourly, impute, load_csv, ImputationLog, ImputationPolicy};
use varlab::metrics::{evaluate, MetricsReport};
use varlab::stattests::{
    adf_test, granger_matrix, residual_diagnostics, AdfResult, DiagnosticsReport, GrangerMatrix,
};
use varlab::transform::{difference, invert_difference, split, SplitSpec};
use varlab::var::{fit, forecast, grid_search, grid_search_differenced, FittedVar, GridSearchReport};
use varlab::{Error, TimeSeriesFrame};

use crate::config::PipelineConfig;
use crate::error::{Result, RunError};
use crate::heldout::HeldOut;
use crate::manifest::{checksum_file, sha256_hex, ArtifactWriter, InputChecksum, RunManifest, StageTiming};
use crate::plot::emit_plot_data;
use crate::summary::{render_summary, SummaryInputs};

pub const TOOL_NAME: &str = "varlab";

/// Significance level for the warnings raised by the residual battery.
pub const WARNING_ALPHA: f64 = 0.05;

#[derive(Debug, Default)]
struct StageClock {
    timings: Vec<StageTiming>,
}

impl StageClock {
    fn run<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let out = f();
        self.timings.push(StageTiming { stage: stage.to_string(), seconds: t0.elapsed().as_secs_f64() });
        out
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub frame: TimeSeriesFrame,
    pub log: ImputationLog,
    pub inputs: Vec<InputChecksum>,
}

fn load_aligned(config: &PipelineConfig) -> Result<(TimeSeriesFrame, Vec<InputChecksum>)> {
    let mut frames = Vec::with_capacity(config.sources.len());
    let mut inputs = Vec::with_capacity(config.sources.len());
    for source in &config.sources {
        frames.push(load_csv(source)?);
        inputs.push(checksum_file(&source.path)?);
    }
    let start = match config.start {
        Some(s) => s,
        None => frames.iter().filter_map(|f| f.first_timestamp()).min().ok_or(Error::EmptyRange)?,
    };
    let end = match config.end {
        Some(e) => e,
        None => frames.iter().filter_map(|f| f.last_timestamp()).max().ok_or(Error::EmptyRange)?,
    };
    let aligned = align_hourly(&frames, start, end)?;
    Ok((aligned, inputs))
}

/// Loaded, aligned and imputed data.
pub fn ingest(config: &PipelineConfig) -> Result<Ingested> {
    let (aligned, inputs) = load_aligned(config)?;
    let (frame, log) = impute(&aligned, &config.imputation)?;
    Ok(Ingested { frame, log, inputs })
}

/// Training rows imputed on their own, and the untouched held-out rows.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: TimeSeriesFrame,
    pub log: ImputationLog,
    pub raw_test: TimeSeriesFrame,
    pub inputs: Vec<InputChecksum>,
}

pub fn prepare(config: &PipelineConfig) -> Result<Prepared> {
    let (aligned, inputs) = load_aligned(config)?;
    let (raw_train, raw_test) = split_at(config, &aligned)?;
    let (train, log) = impute(&raw_train, &config.imputation)?;
    Ok(Prepared { train, log, raw_test, inputs })
}

/// Fills gaps in held-out rows. The cleaned training rows give the
/// interpolation anchors and hour-of-week means, so no test value reaches
/// the training side.
pub fn fill_test(
    config: &PipelineConfig,
    train: &TimeSeriesFrame,
    raw_test: &TimeSeriesFrame,
) -> Result<(TimeSeriesFrame, ImputationLog)> {
    let test = raw_test.select_columns(train.columns())?;
    if !test.has_missing() {
        return Ok((test, ImputationLog::default()));
    }
    let mut index = train.index().to_vec();
    index.extend_from_slice(test.index());
    let mut values = train.values().clone().resize_vertically(train.len() + test.len(), f64::NAN);
    values.rows_mut(train.len(), test.len()).copy_from(test.values());
    let joined = TimeSeriesFrame::new(index, train.columns().to_vec(), values)?;
    let policy = ImputationPolicy { drop_column_missing_fraction: 1.0, ..config.imputation };
    let (filled, log) = impute(&joined, &policy)?;
    let first = filled.index().partition_point(|ts| *ts < config.test_start);
    Ok((filled.slice_rows(first, filled.len()), log))
}

pub fn split_at(config: &PipelineConfig, frame: &TimeSeriesFrame) -> Result<(TimeSeriesFrame, TimeSeriesFrame)> {
    Ok(split(frame, SplitSpec { test_start: config.test_start })?)
}

/// ADF on every column. A column whose test cannot run is reported as a
/// warning and left out of the table.
pub fn adf_columns(
    config: &PipelineConfig,
    train: &TimeSeriesFrame,
    warnings: &mut Vec<String>,
) -> IndexMap<String, AdfResult> {
    let mut out = IndexMap::new();
    for (j, name) in train.columns().iter().enumerate() {
        match adf_test(train.values().column(j).as_slice(), config.adf_max_lag, config.adf_terms) {
            Ok(r) => {
                out.insert(name.clone(), r);
            }
            Err(e) => warnings.push(format!("ADF skipped for {name}: {e}")),
        }
    }
    out
}

pub fn granger_or_warn(config: &PipelineConfig, train: &TimeSeriesFrame, warnings: &mut Vec<String>) -> Option<GrangerMatrix> {
    match granger_matrix(train, config.granger_lag) {
        Ok(m) => Some(m),
        Err(e) => {
            warnings.push(format!("Granger matrix skipped: {e}"));
            None
        }
    }
}

/// Grid search on the training rows, scoring the trailing validation hours.
/// With `difference_order > 0` cells are fitted on differenced data and
/// scored in levels.
pub fn select_model(config: &PipelineConfig, train: &TimeSeriesFrame, difference_order: usize) -> Result<GridSearchReport> {
    let v = config.validation_hours;
    if train.len() <= v {
        return Err(Error::DegenerateSplit(format!(
            "training range has {} rows, not enough to hold out {v} validation hours",
            train.len()
        ))
        .into());
    }
    let (fit_rows, validation) = (train.head(train.len() - v), train.tail(v));
    let report = if difference_order == 0 {
        grid_search(&fit_rows, &validation, &config.grid_lags, &config.grid_trends)?
    } else {
        grid_search_differenced(&fit_rows, &validation, difference_order, &config.grid_lags, &config.grid_trends)?
    };
    Ok(report)
}

/// The modelling frame: the training rows, differenced when requested.
pub fn model_input(train: &TimeSeriesFrame, difference_order: usize) -> Result<TimeSeriesFrame> {
    if difference_order == 0 {
        Ok(train.clone())
    } else {
        Ok(difference(train, difference_order)?)
    }
}

/// Forecast in levels for `steps` hours after `train`.
pub fn forecast_levels(
    model: &FittedVar,
    train: &TimeSeriesFrame,
    difference_order: usize,
    steps: usize,
) -> Result<TimeSeriesFrame> {
    let fc = forecast(model, steps)?;
    if difference_order == 0 {
        Ok(fc)
    } else {
        Ok(invert_difference(&fc, &train.tail(difference_order))?)
    }
}

pub fn fevd_order(config: &PipelineConfig, model: &FittedVar) -> Vec<String> {
    config.fevd_order.clone().unwrap_or_else(|| model.columns.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub test_start: String,
    pub train_start: String,
    pub train_end: String,
    pub train_rows: usize,
    pub test_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelection {
    pub p: usize,
    pub trend: String,
    pub validation_rmse: f64,
    pub validation_hours: usize,
    /// Times the training data was differenced before fitting.
    pub difference_order: usize,
}

fn stamp(ts: Option<NaiveDateTime>) -> String {
    ts.map(|t| format_timestamp(&t)).unwrap_or_default()
}

/// Runs every stage in order and writes the reports into
/// `config.output_dir`. Returns the manifest that was written last.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunManifest> {
    config.validate()?;
    let mut out = ArtifactWriter::create_replacing(&config.output_dir)?;
    let mut clock = StageClock::default();
    let mut warnings = Vec::new();
    let canonical = config.to_canonical_json()?;
    out.bytes("config.json", &canonical)?;

    let Prepared { train, log, raw_test, inputs } = clock.run("ingest", || prepare(config))?;
    let held = HeldOut::new(raw_test);
    out.with_writer("clean.csv", |w| Ok(train.write_csv(w)?))?;
    out.with_writer("imputation_log.csv", |w| Ok(log.write_csv(w)?))?;
    for d in &log.dropped_columns {
        warnings.push(format!("column {} dropped: {:.1}% missing", d.column, 100.0 * d.missing_fraction));
    }
    out.json(
        "split.json",
        &SplitSummary {
            test_start: format_timestamp(&config.test_start),
            train_start: stamp(train.first_timestamp()),
            train_end: stamp(train.last_timestamp()),
            train_rows: train.len(),
            test_rows: held.rows(),
        },
    )?;

    let adf = clock.run("adf", || Ok(adf_columns(config, &train, &mut warnings)))?;
    out.json("adf.json", &adf)?;

    let granger = clock.run("granger", || Ok(granger_or_warn(config, &train, &mut warnings)))?;
    if let Some(g) = &granger {
        out.with_writer("granger_pvalues.csv", |w| Ok(g.write_p_value_csv(w)?))?;
    }

    let non_stationary = adf.values().any(|r| !r.is_stationary());
    let difference_order = usize::from(config.auto_difference && non_stationary);
    let grid = clock.run("grid_search", || select_model(config, &train, difference_order))?;
    out.with_writer("grid_search.csv", |w| Ok(grid.write_csv(w)?))?;
    out.json("grid_search.json", &grid)?;

    let model = clock.run("fit", || Ok(fit(&model_input(&train, difference_order)?, grid.best.p, grid.best.trend)?))?;
    out.json("model.json", &model)?;
    let selection = ModelSelection {
        p: model.p,
        trend: model.trend.code().to_string(),
        validation_rmse: grid.best_rmse,
        validation_hours: config.validation_hours,
        difference_order,
    };
    out.json("selection.json", &selection)?;

    let residuals = clock.run("residuals", || match residual_diagnostics(&model) {
        Ok(r) => Ok(Some(r)),
        Err(e) => {
            warnings.push(format!("residual diagnostics skipped: {e}"));
            Ok(None)
        }
    })?;
    let diagnostics = DiagnosticsReport { adf, granger, residuals };
    warnings.extend(diagnostics.warnings(WARNING_ALPHA));
    out.json("diagnostics.json", &diagnostics)?;

    let predicted = clock.run("forecast", || forecast_levels(&model, &train, difference_order, held.rows()))?;
    out.with_writer("forecast.csv", |w| Ok(predicted.write_csv(w)?))?;

    let (metrics, test_log) = clock.run("evaluate", || {
        let (actual, test_log) = fill_test(config, &train, held.read("evaluate"))?;
        Ok((evaluate(&actual, &predicted)?, test_log))
    })?;
    out.json("metrics.json", &metrics)?;
    out.with_writer("test_imputation_log.csv", |w| Ok(test_log.write_csv(w)?))?;

    let plot_columns = config.plot_columns.clone().unwrap_or_else(|| predicted.columns().to_vec());
    clock.run("plot_data", || {
        let (actual, _) = fill_test(config, &train, held.read("plot_data"))?;
        for col in &plot_columns {
            out.with_writer(&format!("plots/{col}.csv"), |w| {
                emit_plot_data(&actual, &predicted, col, w)?;
                Ok(())
            })?;
        }
        Ok(())
    })?;

    let order = fevd_order(config, &model);
    let fevd = clock.run("fevd", || match decompose(&model, config.fevd_horizon, &order) {
        Ok(t) => Ok(Some(t)),
        Err(Error::BadPermutation(o)) => Err(RunError::Config(format!("fevd_order `{o}` is not a permutation of the columns"))),
        Err(e) => {
            warnings.push(format!("variance decomposition skipped: {e}"));
            Ok(None)
        }
    })?;
    if let Some(t) = &fevd {
        if t.jitter > 0.0 {
            warnings.push(format!("residual covariance jittered by {:e} before factorization", t.jitter));
        }
        out.with_writer("fevd.csv", |w| Ok(t.write_csv(w)?))?;
        out.json("fevd_summary.json", &t.summary())?;
    }

    let summary = render_summary(&SummaryInputs {
        config,
        log: &log,
        train_rows: train.len(),
        test_rows: held.rows(),
        diagnostics: &diagnostics,
        grid: &grid,
        selection: &selection,
        metrics: &metrics,
        fevd: fevd.as_ref(),
        warnings: &warnings,
    });
    out.bytes("summary.txt", summary.as_bytes())?;

    let manifest = RunManifest {
        tool: TOOL_NAME.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(&canonical),
        inputs,
        stages: clock.timings,
        artifacts: Vec::new(),
        warnings,
        test_access: held.accesses(),
    };
    out.finish(manifest)
}

/// What `diagnose` computes: ADF and Granger on the training rows.
pub fn diagnose(config: &PipelineConfig, out: &mut ArtifactWriter) -> Result<DiagnosticsReport> {
    let train = prepare(config)?.train;
    let mut warnings = Vec::new();
    let adf = adf_columns(config, &train, &mut warnings);
    let granger = granger_or_warn(config, &train, &mut warnings);
    out.json("adf.json", &adf)?;
    if let Some(g) = &granger {
        out.with_writer("granger_pvalues.csv", |w| Ok(g.write_p_value_csv(w)?))?;
    }
    let report = DiagnosticsReport { adf, granger, residuals: None };
    warnings.extend(report.warnings(WARNING_ALPHA));
    out.json("diagnostics.json", &report)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(report)
}

pub fn forecast_metrics(actual: &TimeSeriesFrame, predicted: &TimeSeriesFrame) -> Result<MetricsReport> {
    let rows: Vec<usize> = predicted
        .index()
        .iter()
        .map(|ts| {
            actual
                .index()
                .binary_search(ts)
                .map_err(|_| Error::ShapeMismatch(format!("no actual value at {}", format_timestamp(ts))))
        })
        .collect::<std::result::Result<_, _>>()?;
    let columns = predicted.columns().to_vec();
    let selected = actual.select_columns(&columns)?;
    let values = nalgebra::DMatrix::from_fn(rows.len(), columns.len(), |i, j| selected.values()[(rows[i], j)]);
    let aligned = TimeSeriesFrame::new(predicted.index().to_vec(), columns, values)?;
    Ok(evaluate(&aligned, predicted)?)
}

pub fn fevd_for_model(model: &FittedVar, horizon: usize, order: Option<Vec<String>>) -> Result<FevdTable> {
    let order = order.unwrap_or_else(|| model.columns.clone());
    Ok(decompose(model, horizon, &order)?)
}
