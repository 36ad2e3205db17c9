//! Plain-text report laid out like the usual results tables.

use std::fmt::Write;

use varlab::fevd::FevdTable;
use varlab::ingest::ImputationLog;
use varlab::metrics::MetricsReport;
use varlab::stattests::DiagnosticsReport;
use varlab::var::{GridSearchReport, TrendSpec};

use crate::config::PipelineConfig;
use crate::pipeline::{ModelSelection, WARNING_ALPHA};

pub struct SummaryInputs<'a> {
    pub config: &'a PipelineConfig,
    pub log: &'a ImputationLog,
    pub train_rows: usize,
    pub test_rows: usize,
    pub diagnostics: &'a DiagnosticsReport,
    pub grid: &'a GridSearchReport,
    pub selection: &'a ModelSelection,
    pub metrics: &'a MetricsReport,
    pub fevd: Option<&'a FevdTable>,
    pub warnings: &'a [String],
}

fn name_width<'a>(names: impl Iterator<Item = &'a String>) -> usize {
    names.map(|n| n.len()).max().unwrap_or(0).max(8)
}

pub fn render_summary(s: &SummaryInputs<'_>) -> String {
    let mut o = String::new();
    // writing into a String cannot fail
    let _ = render(&mut o, s);
    o
}

fn render(o: &mut String, s: &SummaryInputs<'_>) -> std::fmt::Result {
    writeln!(o, "Run summary")?;
    writeln!(o, "===========")?;
    writeln!(o)?;
    writeln!(o, "Data")?;
    writeln!(o, "  training rows: {}, held-out rows: {}", s.train_rows, s.test_rows)?;
    writeln!(o, "  test start: {}", varlab::frame::format_timestamp(&s.config.test_start))?;
    writeln!(
        o,
        "  imputed cells: {}, dropped columns: {}, dropped rows: {}",
        s.log.entries.len(),
        s.log.dropped_columns.len(),
        s.log.dropped_rows.len()
    )?;
    writeln!(o)?;

    let adf = &s.diagnostics.adf;
    let w = name_width(adf.keys());
    writeln!(o, "Unit-root tests (ADF)")?;
    writeln!(o, "  {:<w$}  {:>10}  {:>7}  {:>4}  stationary", "variable", "statistic", "p-value", "lag")?;
    for (name, r) in adf {
        writeln!(
            o,
            "  {:<w$}  {:>10.4}  {:>7.3}  {:>4}  {}",
            name,
            r.statistic,
            r.approx_p_value,
            r.lag_used,
            if r.is_stationary() { "yes" } else { "no" }
        )?;
    }
    if let Some((_, first)) = adf.first() {
        let cv = first.critical_values;
        writeln!(o, "  critical values: 1% {}, 5% {}, 10% {}", cv.one, cv.five, cv.ten)?;
    }
    writeln!(o)?;

    if let Some(g) = &s.diagnostics.granger {
        let total = g.results().count();
        let significant = g.results().filter(|r| r.rejects_at(WARNING_ALPHA)).count();
        writeln!(o, "Granger causality (lag {}, alpha {})", g.lag, WARNING_ALPHA)?;
        writeln!(o, "  significant ordered pairs: {significant} / {total}")?;
        let idle: Vec<&str> = g
            .columns
            .iter()
            .enumerate()
            .filter(|(i, _)| g.cells[*i].iter().flatten().all(|r| !r.rejects_at(WARNING_ALPHA)))
            .map(|(_, c)| c.as_str())
            .collect();
        if !idle.is_empty() {
            writeln!(o, "  series that help predict no other series: {}", idle.join(", "))?;
        }
        writeln!(o)?;
    }

    writeln!(o, "Grid search (average RMSE over the last {} training hours)", s.selection.validation_hours)?;
    let mut lags: Vec<usize> = s.grid.cells.iter().map(|c| c.p).collect();
    lags.dedup();
    let mut trends: Vec<TrendSpec> = s.grid.cells.iter().map(|c| c.trend).collect();
    trends.sort();
    trends.dedup();
    write!(o, "  {:>4}", "p")?;
    for t in &trends {
        write!(o, "  {:>12}", t.code())?;
    }
    writeln!(o)?;
    for p in &lags {
        write!(o, "  {p:>4}")?;
        for t in &trends {
            let cell = s.grid.cell(*p, *t).and_then(|c| c.rmse);
            match cell {
                Some(v) => write!(o, "  {v:>12.4}")?,
                None => write!(o, "  {:>12}", "-")?,
            }
        }
        writeln!(o)?;
    }
    writeln!(
        o,
        "  selected: p = {}, trend = {}, validation RMSE = {:.4}{}",
        s.selection.p,
        s.selection.trend,
        s.selection.validation_rmse,
        if s.selection.difference_order > 0 { " (fitted on differenced data)" } else { "" }
    )?;
    writeln!(o)?;

    if let Some(r) = &s.diagnostics.residuals {
        let w = name_width(r.durbin_watson.keys());
        writeln!(o, "Residual diagnostics")?;
        writeln!(o, "  {:<w$}  {:>8}  {:>14}  {:>7}  {:>9}  {:>9}", "variable", "DW", "JB", "p-value", "skewness", "kurtosis")?;
        for (name, dw) in &r.durbin_watson {
            let jb = &r.jarque_bera[name];
            writeln!(
                o,
                "  {:<w$}  {:>8.4}  {:>14.4}  {:>7.4}  {:>9.4}  {:>9.4}",
                name,
                dw,
                jb.jb_statistic,
                jb.p_value,
                jb.skewness,
                jb.excess_kurtosis + 3.0
            )?;
        }
        if let Some(j) = &r.system_normality {
            writeln!(
                o,
                "  joint normality: statistic {:.4}, dof {}, 5% critical value {:.4}, p-value {:.4}",
                j.statistic, j.dof, j.critical_value_5pct, j.p_value
            )?;
        }
        let st = &r.stability;
        let min_root = st.root_moduli.first().copied();
        writeln!(
            o,
            "  stability: max companion eigenvalue modulus {:.6}, smallest root modulus {}, {}",
            st.max_eigenvalue_modulus,
            min_root.map(|m| format!("{m:.6}")).unwrap_or_else(|| "none".into()),
            if st.is_stable { "stable" } else { "not stable" }
        )?;
        writeln!(o)?;
    }

    let w = name_width(s.metrics.per_variable.keys());
    writeln!(o, "Forecast accuracy on held-out rows")?;
    writeln!(o, "  {:<w$}  {:>14}  {:>16}  {:>14}", "variable", "MAE", "MSE", "RMSE")?;
    for (name, m) in &s.metrics.per_variable {
        writeln!(o, "  {:<w$}  {:>14.4}  {:>16.4}  {:>14.4}", name, m.mae, m.mse, m.rmse)?;
    }
    let a = &s.metrics.average;
    writeln!(o, "  {:<w$}  {:>14.4}  {:>16.4}  {:>14.4}", "average", a.mae, a.mse, a.rmse)?;
    writeln!(o)?;

    if let Some(t) = s.fevd {
        let h = t.max_horizon();
        writeln!(o, "Variance decomposition at horizon {h} (ordering: {})", t.variable_order.join(", "))?;
        let last = &t.shares[h - 1];
        for (j, var) in t.variable_order.iter().enumerate() {
            let mut shares: Vec<(usize, f64)> = last[j].iter().copied().enumerate().collect();
            shares.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let top: Vec<String> = shares
                .iter()
                .take(3)
                .map(|(k, v)| format!("{} {:.2}%", t.variable_order[*k], 100.0 * v))
                .collect();
            writeln!(o, "  {var}: {}", top.join(", "))?;
        }
        writeln!(o)?;
    }

    writeln!(o, "Warnings")?;
    if s.warnings.is_empty() {
        writeln!(o, "  none")?;
    }
    for w in s.warnings {
        writeln!(o, "  - {w}")?;
    }
    Ok(())
}
