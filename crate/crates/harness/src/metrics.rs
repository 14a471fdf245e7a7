use std::io::Write;

use serde::{Deserialize, Serialize};

pub const METRICS_HEADER: &str = "# infomdp-metrics v1";
pub const SUMMARY_HEADER: &str = "# infomdp-summary v1";

/// One row of the per-step metrics file. Step 0 describes the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub seed: u64,
    pub step: u64,
    pub strategy: String,
    /// Empty on the step-0 row.
    pub query_variant: Option<String>,
    pub score: Option<f64>,
    pub alignment: f64,
    pub spread: f64,
    pub regret: f64,
    pub dataset_size: usize,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub step: u64,
    pub strategy: String,
    pub median_alignment: f64,
    /// Fraction of paired seeds where this strategy's alignment beats random's; ties count half.
    pub win_rate_vs_random: f64,
}

fn write_csv<W: Write, T: Serialize>(mut out: W, header: &str, rows: &[T]) -> Result<(), csv::Error> {
    writeln!(out, "{header}")?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics<W: Write>(out: W, rows: &[MetricsRow]) -> Result<(), csv::Error> {
    write_csv(out, METRICS_HEADER, rows)
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<(), csv::Error> {
    write_csv(out, SUMMARY_HEADER, rows)
}

/// Reads a metrics file written by [`write_metrics`].
pub fn read_metrics(text: &str) -> Result<Vec<MetricsRow>, csv::Error> {
    let body = text.strip_prefix(METRICS_HEADER).unwrap_or(text).trim_start_matches('\n');
    csv::Reader::from_reader(body.as_bytes()).deserialize().collect()
}

/// Median of a nonempty sample; the mean of the middle pair for even sizes.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Paired win rate of `a` over `b`.
pub fn win_rate(a: &[f64], b: &[f64]) -> f64 {
    let wins: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| match x.total_cmp(y) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Equal => 0.5,
            std::cmp::Ordering::Less => 0.0,
        })
        .sum();
    wins / a.len().min(b.len()) as f64
}
