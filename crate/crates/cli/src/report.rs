//! Text tables built from the analytics CSVs.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Deserialize)]
struct SummaryRow {
    event: String,
    region: String,
    mean: f64,
    #[allow(dead_code)]
    sd: f64,
    q05: f64,
    #[allow(dead_code)]
    q50: f64,
    q95: f64,
}

#[derive(Debug, Deserialize)]
struct TrendRow {
    event: String,
    region: String,
    slope_per_decade: f64,
    ci05: f64,
    ci95: f64,
    n_years: usize,
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::Input { path: path.into(), message: e.to_string() })?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| CliError::Input { path: path.into(), message: e.to_string() }))
        .collect()
}

/// Lays out `rows` under `header` with columns padded to a common width.
fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut s = line(header);
    s += &line(&width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
    for r in rows {
        s += &line(r);
    }
    s
}

/// Mean extents with their 90% intervals, one row per event and one column
/// per region, followed by the extent trends when present.
pub fn render_report(summary: &Path, trends: Option<&Path>, cfg: &RunConfig) -> Result<String> {
    let rows: Vec<SummaryRow> = read_rows(summary)?;
    let mut regions: Vec<String> = Vec::new();
    let mut events: Vec<String> = Vec::new();
    for r in &rows {
        if !regions.contains(&r.region) {
            regions.push(r.region.clone());
        }
        if !events.contains(&r.event) {
            events.push(r.event.clone());
        }
    }
    let mut out = String::new();
    let [a, b] = cfg.generation.years;
    let _ = writeln!(out, "Spatial extent of events, {} replicates, {a}-{b}", cfg.generation.replicates);
    let _ = writeln!(out, "cells: posterior mean (5%, 95%)\n");
    let mut header = vec!["event".to_string()];
    header.extend(regions.iter().cloned());
    let body: Vec<Vec<String>> = events
        .iter()
        .map(|e| {
            let mut cells = vec![e.clone()];
            for reg in &regions {
                cells.push(
                    rows.iter()
                        .find(|r| &r.event == e && &r.region == reg)
                        .map_or_else(|| "-".into(), |r| format!("{:.3} ({:.3}, {:.3})", r.mean, r.q05, r.q95)),
                );
            }
            cells
        })
        .collect();
    out += &table(&header, &body);
    if let Some(path) = trends {
        let rows: Vec<TrendRow> = read_rows(path)?;
        if !rows.is_empty() {
            let _ = writeln!(out, "\nTrend of yearly mean extent, per decade (90% interval over replicates)\n");
            let header: Vec<String> =
                ["event", "region", "slope", "interval", "years"].iter().map(|s| s.to_string()).collect();
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.event.clone(),
                        r.region.clone(),
                        format!("{:+.4}", r.slope_per_decade),
                        format!("({:+.4}, {:+.4})", r.ci05, r.ci95),
                        r.n_years.to_string(),
                    ]
                })
                .collect();
            out += &table(&header, &body);
        }
    }
    Ok(out)
}
