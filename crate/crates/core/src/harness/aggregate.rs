//! Cross-run statistics and rate fitting.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::RESULTS_HEADER;
use crate::error::{NgviError, Result};
use crate::optimizer::RunTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Abscissa {
    Iteration,
    Budget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mean,
    MedianIqr,
}

/// One metric along one run: `(iter, budget, value)` triples.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricTrace {
    pub run: usize,
    pub points: Vec<(usize, u64, f64)>,
}

impl MetricTrace {
    /// Extracts `metric` ("bregman" or "elbo") from a run trace.
    pub fn from_run(run: usize, trace: &RunTrace, metric: &str) -> Result<MetricTrace> {
        let pick = match metric {
            "bregman" => |p: &crate::optimizer::TracePoint| p.bregman,
            "elbo" => |p: &crate::optimizer::TracePoint| p.elbo,
            other => return Err(NgviError::InvalidArgument(format!("unknown metric {other:?}"))),
        };
        let points = trace.points.iter().filter_map(|p| pick(p).map(|v| (p.iter, p.budget, v))).collect();
        Ok(MetricTrace { run, points })
    }

    pub fn from_runs(traces: &[RunTrace], metric: &str) -> Result<Vec<MetricTrace>> {
        traces.iter().enumerate().map(|(r, t)| MetricTrace::from_run(r, t, metric)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregateRow {
    pub x: f64,
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
    /// Number of runs contributing to this row.
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateSeries {
    pub abscissa: Abscissa,
    pub statistic: Statistic,
    pub rows: Vec<AggregateRow>,
}

impl AggregateSeries {
    pub fn xs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.x).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.center).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |e: csv::Error| NgviError::Schema(format!("writing {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["x", "center", "lo", "hi"]).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([r.x.to_string(), r.center.to_string(), r.lo.to_string(), r.hi.to_string()])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| NgviError::io(path, e))
    }
}

/// Quantile with linear interpolation between order statistics
/// (`h = (n − 1)p`). `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-abscissa statistic over runs. Runs may be truncated; each point
/// only aggregates the runs that recorded it.
pub fn aggregate(traces: &[MetricTrace], abscissa: Abscissa, statistic: Statistic) -> Result<AggregateSeries> {
    if traces.iter().all(|t| t.points.is_empty()) {
        return Err(NgviError::EmptyInput("no recorded values to aggregate".into()));
    }
    // Runs sharing a schedule agree on the budget at every iteration.
    let mut budget_at: BTreeMap<usize, (u64, usize)> = BTreeMap::new();
    for t in traces {
        for &(iter, budget, _) in &t.points {
            match budget_at.get(&iter) {
                Some(&(b, run)) if b != budget => {
                    return Err(NgviError::MisalignedTraces(format!(
                        "iteration {iter}: run {run} has budget {b}, run {} has {budget}",
                        t.run
                    )))
                }
                Some(_) => {}
                None => {
                    budget_at.insert(iter, (budget, t.run));
                }
            }
        }
    }
    let mut by_iter: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for t in traces {
        for &(iter, _, v) in &t.points {
            by_iter.entry(iter).or_default().push(v);
        }
    }
    let mut rows = Vec::with_capacity(by_iter.len());
    for (iter, mut values) in by_iter {
        let x = match abscissa {
            Abscissa::Iteration => iter as f64,
            Abscissa::Budget => budget_at[&iter].0 as f64,
        };
        if let Some(prev) = rows.last().map(|r: &AggregateRow| r.x) {
            if x <= prev {
                return Err(NgviError::MisalignedTraces(format!("abscissa not increasing at iteration {iter}")));
            }
        }
        let count = values.len();
        let row = match statistic {
            Statistic::Mean => {
                let m = values.iter().sum::<f64>() / count as f64;
                AggregateRow { x, center: m, lo: m, hi: m, count }
            }
            Statistic::MedianIqr => {
                values.sort_by(f64::total_cmp);
                AggregateRow {
                    x,
                    center: quantile(&values, 0.5),
                    lo: quantile(&values, 0.25),
                    hi: quantile(&values, 0.75),
                    count,
                }
            }
        };
        rows.push(row);
    }
    Ok(AggregateSeries { abscissa, statistic, rows })
}

/// Reads `results.csv`, returning one trace per run for `metric`.
pub fn read_results(path: &Path, metric: &str) -> Result<Vec<MetricTrace>> {
    let csv_err = |e: csv::Error| match e.kind() {
        csv::ErrorKind::Io(_) => {
            let csv::ErrorKind::Io(io) = e.into_kind() else { unreachable!() };
            NgviError::io(path, io)
        }
        _ => NgviError::Schema(format!("{}: {e}", path.display())),
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(NgviError::Schema(format!("unexpected results header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut runs: BTreeMap<usize, Vec<(usize, u64, f64)>> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = i + 2;
        let field = |k: usize| -> Result<&str> {
            rec.get(k).ok_or_else(|| NgviError::Parse { row, column: RESULTS_HEADER[k].into(), message: "missing".into() })
        };
        let parse_err = |k: usize, e: String| NgviError::Parse { row, column: RESULTS_HEADER[k].into(), message: e };
        let run: usize = field(0)?.parse().map_err(|e: std::num::ParseIntError| parse_err(0, e.to_string()))?;
        if field(5)? != metric {
            runs.entry(run).or_default();
            continue;
        }
        let iter: usize = field(1)?.parse().map_err(|e: std::num::ParseIntError| parse_err(1, e.to_string()))?;
        let budget: u64 = field(4)?.parse().map_err(|e: std::num::ParseIntError| parse_err(4, e.to_string()))?;
        let value: f64 = field(6)?.parse().map_err(|e: std::num::ParseFloatError| parse_err(6, e.to_string()))?;
        runs.entry(run).or_default().push((iter, budget, value));
    }
    if runs.is_empty() {
        return Err(NgviError::EmptyInput(format!("{} has no rows", path.display())));
    }
    Ok(runs.into_iter().map(|(run, points)| MetricTrace { run, points }).collect())
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len();
    if n < 2 {
        return Err(NgviError::InvalidArgument("slope fit needs at least two points".into()));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(NgviError::InvalidArgument("slope fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    if !slope.is_finite() {
        return Err(NgviError::NonFiniteValue("fitted slope".into()));
    }
    Ok(slope)
}

/// Least-squares slope of `ln y` against `ln x` over points with `x, y > 0`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).unzip();
    least_squares_slope(&lx, &ly)
}

/// Least-squares slope of `ln y` against `x` (geometric decay rate per unit
/// of `x`).
pub fn fit_log_linear_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs.iter().zip(ys).filter(|(_, y)| **y > 0.0).map(|(x, y)| (*x, y.ln())).unzip();
    least_squares_slope(&lx, &ly)
}
