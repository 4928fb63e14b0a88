//! Convergence studies: running levels, fitting rates and writing reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::case::{run_level, CaseKind, CaseSpec, LevelResult};
use crate::error::{Error, Result};
use crate::stokes::ElementPair;
use crate::wss::WssMethod;

/// Observed order of convergence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Least-squares slope of `log e` against `log h` over all points.
    pub rate: f64,
    /// Rate between the two finest points.
    pub last_pair: f64,
}

/// Fits `e ~ C h^rate`.
pub fn fit_rate(h: &[f64], e: &[f64]) -> Result<RateFit> {
    if h.len() != e.len() || h.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "rate fitting needs at least 2 matching (h, e) pairs, got {} and {}",
            h.len(),
            e.len()
        )));
    }
    if let Some(bad) = h.iter().chain(e).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!("rate fitting needs positive finite values, got {bad}")));
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fitting needs distinct mesh sizes".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let k = x.len();
    Ok(RateFit {
        rate: sxy / sxx,
        last_pair: (y[k - 1] - y[k - 2]) / (x[k - 1] - x[k - 2]),
    })
}

/// Level at which a study stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelFailure {
    pub level: usize,
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub case: CaseKind,
    pub element: ElementPair,
    pub wss_methods: Vec<WssMethod>,
    pub levels: Vec<LevelResult>,
    /// Rates keyed by quantity: `v`, `p` and `wss_<method>`.
    pub rates: BTreeMap<String, RateFit>,
    /// Number of coarsest levels excluded from the rate fits.
    pub fit_skip: usize,
    /// False when a level failed; `levels` then holds the levels before it.
    pub complete: bool,
    pub failure: Option<LevelFailure>,
}

impl ConvergenceReport {
    /// `(quantity, error per level)` in column order.
    pub fn error_series(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = vec![
            ("v".to_string(), self.levels.iter().map(|l| l.err_v).collect()),
            ("p".to_string(), self.levels.iter().map(|l| l.err_p).collect()),
        ];
        for m in &self.wss_methods {
            out.push((
                format!("wss_{m}"),
                self.levels.iter().map(|l| l.wss.get(m).map_or(f64::NAN, |w| w.error)).collect(),
            ));
        }
        out
    }

    pub fn rate(&self, quantity: &str) -> Option<f64> {
        self.rates.get(quantity).map(|r| r.rate)
    }

    pub fn finest(&self) -> Option<&LevelResult> {
        self.levels.last()
    }

    fn fit(&mut self) -> Result<()> {
        let skip = self.fit_skip.min(self.levels.len());
        let h: Vec<f64> = self.levels[skip..].iter().map(|l| l.h).collect();
        if h.len() < 2 {
            return Ok(());
        }
        for (name, e) in self.error_series() {
            self.rates.insert(name, fit_rate(&h, &e[skip..])?);
        }
        Ok(())
    }
}

/// Runs a study and fails on the first failing level, with the level in
/// the error.
pub fn run_convergence(spec: &CaseSpec) -> Result<ConvergenceReport> {
    let (report, error) = run_convergence_partial(spec);
    match error {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

/// Runs a study and returns the report of the levels completed before the
/// first failure, flagged incomplete, together with the failure.
pub fn run_convergence_partial(spec: &CaseSpec) -> (ConvergenceReport, Option<Error>) {
    let mut report = ConvergenceReport {
        case: spec.case,
        element: spec.element,
        wss_methods: spec.wss.clone(),
        levels: Vec::new(),
        rates: BTreeMap::new(),
        fit_skip: spec.fit_skip,
        complete: false,
        failure: None,
    };
    if let Err(e) = spec.validate() {
        return (report, Some(e));
    }
    let results: Vec<Result<LevelResult>> = if spec.workers > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(spec.workers).build() {
            Ok(pool) => pool.install(|| spec.levels.par_iter().map(|&l| run_level(spec, l)).collect()),
            Err(e) => return (report, Some(Error::InvalidArgument(format!("cannot start workers: {e}")))),
        }
    } else {
        spec.levels.iter().map(|&l| run_level(spec, l)).collect()
    };
    for (&level, result) in spec.levels.iter().zip(results) {
        match result {
            Ok(r) => report.levels.push(r),
            Err(e) => {
                report.failure = Some(LevelFailure {
                    level,
                    kind: e.kind().to_string(),
                    message: e.to_string(),
                });
                return (
                    report,
                    Some(Error::AtLevel {
                        level,
                        source: Box::new(e),
                    }),
                );
            }
        }
    }
    if let Some(w) = report.levels.windows(2).find(|w| !(w[1].h < w[0].h)) {
        let e = Error::InvalidArgument(format!(
            "mesh size does not decrease from level {} to level {}",
            w[0].level, w[1].level
        ));
        return (report, Some(e));
    }
    if let Err(e) = report.fit() {
        return (report, Some(e));
    }
    report.complete = true;
    (report, None)
}

/// Output formats of a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    /// One whitespace-separated `h error` file per WSS method.
    Plotdata,
}

/// Writes a report into `dir` and returns the written files.
pub fn emit_report(report: &ConvergenceReport, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let stem = format!("{}_{}", report.case, report.element.name());
    match format {
        ReportFormat::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            fs::write(&path, report_csv(report)?)?;
            Ok(vec![path])
        }
        ReportFormat::Json => {
            let path = dir.join(format!("{stem}.json"));
            fs::write(&path, serde_json::to_string_pretty(report)?)?;
            Ok(vec![path])
        }
        ReportFormat::Plotdata => {
            let mut paths = Vec::new();
            for (name, errors) in report.error_series().into_iter().filter(|(n, _)| n.starts_with("wss_")) {
                let path = dir.join(format!("{stem}_{name}.dat"));
                let mut text = format!("# h {name}_error\n");
                for (l, e) in report.levels.iter().zip(errors) {
                    text.push_str(&format!("{:.17e} {:.17e}\n", l.h, e));
                }
                fs::write(&path, text)?;
                paths.push(path);
            }
            Ok(paths)
        }
    }
}

/// CSV text of a report: one row per level, then a row of least-squares
/// rates (last-pair rates are in the JSON report). Timing is the last
/// column.
pub fn report_csv(report: &ConvergenceReport) -> Result<String> {
    let series = report.error_series();
    let mut header: Vec<String> = ["level", "h", "target_edge", "dofs_v", "dofs_p"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(series.iter().map(|(name, _)| format!("err_{name}")));
    header.extend(report.wss_methods.iter().map(|m| format!("mean_wss_{m}")));
    let has_diff = report.levels.iter().any(|l| l.bflux_cg1_rel_diff.is_some());
    if has_diff {
        header.push("bflux_cg1_rel_diff".into());
    }
    let has_ns = report.levels.iter().any(|l| l.ns.is_some());
    if has_ns {
        header.push("newton_iterations".into());
        header.push("ns_velocity_rel_diff".into());
        header.extend(report.wss_methods.iter().map(|m| format!("ns_wss_mean_rel_diff_{m}")));
    }
    header.push("wall_time_s".into());

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(csv_error)?;
    for (k, l) in report.levels.iter().enumerate() {
        let mut row = vec![
            l.level.to_string(),
            fmt(l.h),
            l.target_edge.map_or(String::new(), fmt),
            l.dofs_v.to_string(),
            l.dofs_p.to_string(),
        ];
        row.extend(series.iter().map(|(_, e)| fmt(e[k])));
        row.extend(report.wss_methods.iter().map(|m| l.wss.get(m).map_or(String::new(), |w| fmt(w.mean))));
        if has_diff {
            row.push(l.bflux_cg1_rel_diff.map_or(String::new(), fmt));
        }
        if has_ns {
            match &l.ns {
                Some(ns) => {
                    row.push(ns.newton_iterations.to_string());
                    row.push(fmt(ns.velocity_rel_diff));
                    row.extend(
                        report
                            .wss_methods
                            .iter()
                            .map(|m| ns.wss_mean_rel_diff.get(m).map_or(String::new(), |v| fmt(*v))),
                    );
                }
                None => row.extend(std::iter::repeat_n(String::new(), 2 + report.wss_methods.len())),
            }
        }
        row.push(format!("{:.3}", l.wall_time));
        w.write_record(&row).map_err(csv_error)?;
    }
    let mut row = vec!["rate".to_string()];
    row.extend(std::iter::repeat_n(String::new(), 4));
    row.extend(series.iter().map(|(name, _)| report.rates.get(name).map_or(String::new(), |r| fmt(r.rate))));
    row.resize(header.len(), String::new());
    w.write_record(&row).map_err(csv_error)?;
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

fn fmt(v: f64) -> String {
    format!("{v:.10e}")
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
