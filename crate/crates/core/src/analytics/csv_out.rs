//! Plain-text output of analytics results. Floating values use six
//! significant digits.

use std::io::Write;

use crate::domain::GridSpec;
use crate::error::{Error, Result};
use crate::numfmt::sig6;

use super::estimators::{ExtentSample, ProbabilitySurface, TrendEstimate};
use super::summary::Summary;

/// `grid_id,lon,lat,value`, one row per grid point.
pub fn write_surface_csv<W: Write>(mut w: W, grid: &GridSpec, surface: &ProbabilitySurface) -> Result<()> {
    if grid.len() != surface.values.len() {
        return Err(Error::InvalidInput("surface length differs from the grid".into()));
    }
    writeln!(w, "grid_id,lon,lat,value")?;
    for (p, v) in grid.points().iter().zip(&surface.values) {
        writeln!(w, "{},{},{},{}", p.site.id, sig6(p.site.lon), sig6(p.site.lat), sig6(*v))?;
    }
    Ok(())
}

/// `replicate,value`, replicates numbered from 1.
pub fn write_extent_csv<W: Write>(mut w: W, sample: &ExtentSample) -> Result<()> {
    writeln!(w, "replicate,value")?;
    for (b, v) in sample.values.iter().enumerate() {
        writeln!(w, "{},{}", b + 1, sig6(*v))?;
    }
    Ok(())
}

/// `year,mean_extent`, one row per year.
pub fn write_trend_csv<W: Write>(mut w: W, trend: &TrendEstimate) -> Result<()> {
    writeln!(w, "year,mean_extent")?;
    for (y, v) in trend.years.iter().zip(&trend.yearly_mean) {
        writeln!(w, "{y},{}", sig6(*v))?;
    }
    Ok(())
}

/// One summary row: `label,region,mean,sd,q05,q50,q95`.
pub fn summary_row(label: &str, region: &str, s: &Summary) -> String {
    let q = |p: f64| s.quantile(p).map_or_else(|| "NA".to_string(), sig6);
    format!("{label},{region},{},{},{},{},{}", sig6(s.mean), sig6(s.sd), q(0.05), q(0.5), q(0.95))
}

pub const SUMMARY_HEADER: &str = "event,region,mean,sd,q05,q50,q95";
