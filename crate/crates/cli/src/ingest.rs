//! Station and grid CSV ingestion, and the matching exporters.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use extentlab::domain::{check_temperature, GridPoint, GridSpec, SeasonConfig, Site, StationSeries};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const STATION_HEADER: [&str; 6] = ["station_id", "lon", "lat", "elev_m", "date", "tmax_c"];
pub const GRID_HEADER: [&str; 6] = ["grid_id", "lon", "lat", "elev_m", "cell_area_km2", "regions"];

#[derive(Debug, Deserialize)]
struct StationRow {
    station_id: String,
    lon: f64,
    lat: f64,
    elev_m: f64,
    date: String,
    tmax_c: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct GridRow {
    grid_id: String,
    lon: f64,
    lat: f64,
    elev_m: f64,
    cell_area_km2: f64,
    #[serde(default)]
    regions: Option<String>,
}

/// Missing values per station after ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub n_years: usize,
    pub season_length: usize,
    /// Rows dated outside the warm period (or before the first study year).
    pub skipped_rows: usize,
    pub missing: Vec<(String, usize)>,
}

fn reader(path: &Path, expected: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(CliError::Row {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        });
    }
    Ok(rdr)
}

/// Deserialized rows with the line each starts on.
fn rows<T: serde::de::DeserializeOwned>(rdr: &mut csv::Reader<std::fs::File>, path: &Path) -> Result<Vec<(u64, T)>> {
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec.deserialize(Some(&headers)).map_err(|e| {
            let message = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => {
                    let col = err.field().and_then(|f| headers.get(f as usize)).unwrap_or("?");
                    format!("column {col}: {}", err.kind())
                }
                _ => e.to_string(),
            };
            CliError::Row { path: path.to_path_buf(), line, message }
        })?;
        out.push((line, row));
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        kind => CliError::Row { path: path.to_path_buf(), line, message: csv_message(kind) },
    }
}

fn csv_message(kind: csv::ErrorKind) -> String {
    match kind {
        csv::ErrorKind::Deserialize { err, .. } => match err.field() {
            Some(f) => format!("field {}: {}", f + 1, err.kind()),
            None => err.kind().to_string(),
        },
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("expected {expected_len} fields, found {len}")
        }
        other => format!("{other:?}"),
    }
}

struct Pending {
    site: Site,
    values: HashMap<(u32, u32), Option<f64>>,
}

/// Reads a long-format station file into one series per station.
///
/// Rows outside the warm period are skipped and counted. Every station gets
/// the study years from the season's first year to the last year present in
/// the file; days without a row are missing.
pub fn ingest_stations(path: &Path, season: &SeasonConfig) -> Result<(Vec<StationSeries>, IngestReport)> {
    season.validate()?;
    let mut rdr = reader(path, &STATION_HEADER)?;
    let mut order: Vec<String> = Vec::new();
    let mut pending: HashMap<String, Pending> = HashMap::new();
    let mut skipped = 0usize;
    let mut last_year = 0u32;
    for (line, row) in rows::<StationRow>(&mut rdr, path)? {
        let row_err = |line: u64, message: String| CliError::Row { path: path.to_path_buf(), line, message };
        let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d")
            .map_err(|_| row_err(line, format!("date `{}` is not ISO-8601 (YYYY-MM-DD)", row.date)))?;
        if let Some(v) = row.tmax_c {
            check_temperature(v).map_err(|e| row_err(line, format!("station {} on {date}: {e}", row.station_id)))?;
        }
        if row.station_id.is_empty() {
            return Err(row_err(line, "empty station_id".into()));
        }
        let site = Site::new(row.station_id.clone(), row.lon, row.lat, row.elev_m)
            .map_err(|e| row_err(line, e.to_string()))?;
        if !pending.contains_key(&row.station_id) {
            order.push(row.station_id.clone());
            pending.insert(row.station_id.clone(), Pending { site: site.clone(), values: HashMap::new() });
        }
        let entry = pending.get_mut(&row.station_id).expect("inserted above");
        if entry.site != site {
            return Err(row_err(line, format!("station {} changes coordinates or elevation", row.station_id)));
        }
        let idx = match season.day_index(date) {
            Ok(i) => i,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        if entry.values.insert((idx.year, idx.day), row.tmax_c).is_some() {
            return Err(row_err(line, format!("duplicate row for station {} on {date}", row.station_id)));
        }
        last_year = last_year.max(idx.year);
    }
    if order.is_empty() {
        return Err(CliError::Input { path: path.to_path_buf(), message: "no station rows".into() });
    }
    if last_year == 0 {
        return Err(CliError::Input { path: path.to_path_buf(), message: "no rows inside the warm period".into() });
    }
    let n_years = last_year as usize;
    let len = season.length as usize;
    let mut stations = Vec::with_capacity(order.len());
    for id in &order {
        let p = pending.remove(id).expect("every ordered id is pending");
        let mut st = StationSeries::empty(p.site, n_years, len);
        for ((y, d), v) in p.values {
            st.set(y, d, v)?;
        }
        stations.push(st);
    }
    let report = IngestReport {
        n_years,
        season_length: len,
        skipped_rows: skipped,
        missing: stations.iter().map(|s| (s.site.id.clone(), s.missing_count())).collect(),
    };
    Ok((stations, report))
}

/// Reads a grid file. Region labels are separated by `;` and may be empty.
pub fn ingest_grid(path: &Path) -> Result<GridSpec> {
    let mut rdr = reader(path, &GRID_HEADER)?;
    let mut points = Vec::new();
    let mut lines = HashMap::new();
    for (line, row) in rows::<GridRow>(&mut rdr, path)? {
        let row_err = |message: String| CliError::Row { path: path.to_path_buf(), line, message };
        if !(row.cell_area_km2.is_finite() && row.cell_area_km2 > 0.0) {
            return Err(row_err(format!("grid point {} has nonpositive cell area {}", row.grid_id, row.cell_area_km2)));
        }
        if let Some(first) = lines.insert(row.grid_id.clone(), line) {
            return Err(row_err(format!("duplicate grid_id {} (first on line {first})", row.grid_id)));
        }
        let site = Site::new(row.grid_id, row.lon, row.lat, row.elev_m).map_err(|e| row_err(e.to_string()))?;
        let regions = row
            .regions
            .unwrap_or_default()
            .split(';')
            .map(str::trim)
            .filter(|r| !r.is_empty())
            .map(String::from)
            .collect();
        points.push(GridPoint { site, cell_area: row.cell_area_km2, regions });
    }
    GridSpec::new(points).map_err(|e| CliError::Input { path: path.to_path_buf(), message: e.to_string() })
}

fn float(x: f64) -> String {
    // shortest representation that parses back to the same value
    format!("{x}")
}

/// Writes every warm-period day of every station, missing values empty.
pub fn export_stations<W: Write>(w: W, stations: &[StationSeries], season: &SeasonConfig) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| CliError::Other(format!("writing stations: {e}"));
    out.write_record(STATION_HEADER).map_err(io)?;
    for st in stations {
        for y in 1..=st.n_years() as u32 {
            for d in 1..=st.season_length() as u32 {
                let date = season.date_of(y, d)?;
                out.write_record([
                    st.site.id.clone(),
                    float(st.site.lon),
                    float(st.site.lat),
                    float(st.site.elev),
                    date.to_string(),
                    st.get(y, d).map(float).unwrap_or_default(),
                ])
                .map_err(io)?;
            }
        }
    }
    out.flush().map_err(|e| CliError::Other(format!("writing stations: {e}")))?;
    Ok(())
}

pub fn export_grid<W: Write>(w: W, grid: &GridSpec) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let io = |e: csv::Error| CliError::Other(format!("writing grid: {e}"));
    out.write_record(GRID_HEADER).map_err(io)?;
    for p in grid.points() {
        out.write_record([
            p.site.id.clone(),
            float(p.site.lon),
            float(p.site.lat),
            float(p.site.elev),
            float(p.cell_area),
            p.regions.join(";"),
        ])
        .map_err(io)?;
    }
    out.flush().map_err(|e| CliError::Other(format!("writing grid: {e}")))?;
    Ok(())
}
