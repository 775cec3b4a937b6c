//! Sites, calendar indexing, station series, grids and analysis periods.

use std::collections::BTreeSet;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower and upper sanity bounds for an observed daily maximum, in °C.
pub const TEMPERATURE_BOUNDS: (f64, f64) = (-30.0, 55.0);

/// Name of the implicit region covering every grid point.
pub const ALL_REGION: &str = "ALL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    /// Longitude in degrees.
    pub lon: f64,
    /// Latitude in degrees.
    pub lat: f64,
    /// Elevation in metres.
    pub elev: f64,
}

impl Site {
    pub fn new(id: impl Into<String>, lon: f64, lat: f64, elev: f64) -> Result<Self> {
        let id = id.into();
        if !(lon.is_finite() && lat.is_finite() && elev.is_finite()) {
            return Err(Error::InvalidInput(format!("site `{id}` has non-finite coordinates")));
        }
        Ok(Site { id, lon, lat, elev })
    }
}

/// Warm-period window repeated every year of the study.
///
/// Day indices are counted by calendar position from the window start, so the
/// season length is the same in leap and common years. The seasonal harmonic
/// uses the day of year of that calendar position in a common year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeasonConfig {
    pub start_month: u32,
    pub start_day: u32,
    pub length: u32,
    /// Calendar year of study year `t = 1`.
    pub first_year: i32,
}

impl Default for SeasonConfig {
    fn default() -> Self {
        SeasonConfig { start_month: 5, start_day: 1, length: 153, first_year: 1956 }
    }
}

/// Common (non-leap) year used to turn window positions into days of year.
const REFERENCE_YEAR: i32 = 2001;

/// Position of a day in the study: year `t` (1-based) and window day `l`
/// (1-based), plus the common-year day of year that feeds the harmonic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DayIndex {
    pub year: u32,
    pub day: u32,
    pub day_of_year: u32,
}

impl SeasonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::Config("season length must be positive".into()));
        }
        let start = NaiveDate::from_ymd_opt(REFERENCE_YEAR, self.start_month, self.start_day)
            .ok_or_else(|| Error::Config("invalid season start date".into()))?;
        if start.ordinal() + self.length - 1 > 365 {
            return Err(Error::Config("warm period must not cross the end of the year".into()));
        }
        Ok(())
    }

    fn window_start(&self, calendar_year: i32) -> Result<NaiveDate> {
        NaiveDate::from_ymd_opt(calendar_year, self.start_month, self.start_day)
            .ok_or_else(|| Error::Config("invalid season start date".into()))
    }

    /// Common-year day of year of window day `day`.
    pub fn day_of_year(&self, day: u32) -> u32 {
        let start = NaiveDate::from_ymd_opt(REFERENCE_YEAR, self.start_month, self.start_day)
            .expect("validated season start");
        start.ordinal() + day - 1
    }

    pub fn calendar_year(&self, year: u32) -> i32 {
        self.first_year + year as i32 - 1
    }

    /// Study year index of a calendar year, if it is not before the first year.
    pub fn study_year(&self, calendar_year: i32) -> Option<u32> {
        let t = calendar_year - self.first_year + 1;
        (t >= 1).then_some(t as u32)
    }

    pub fn day_index(&self, date: NaiveDate) -> Result<DayIndex> {
        let not_in = || Error::NotInWarmPeriod { date: date.to_string() };
        let year = self.study_year(date.year()).ok_or_else(not_in)?;
        let offset = (date - self.window_start(date.year())?).num_days();
        if offset < 0 || offset >= self.length as i64 {
            return Err(not_in());
        }
        let day = offset as u32 + 1;
        Ok(DayIndex { year, day, day_of_year: self.day_of_year(day) })
    }

    /// Inverse of [`SeasonConfig::day_index`].
    pub fn date_of(&self, year: u32, day: u32) -> Result<NaiveDate> {
        if year == 0 || day == 0 || day > self.length {
            return Err(Error::InvalidInput(format!("no warm-period date for (t={year}, l={day})")));
        }
        let start = self.window_start(self.calendar_year(year))?;
        Ok(start + chrono::Duration::days(day as i64 - 1))
    }

    /// Window days falling in June, July and August.
    pub fn jja_days(&self) -> Vec<u32> {
        (1..=self.length)
            .filter(|&d| {
                let date = self.date_of(1, d).expect("day inside window");
                (6..=8).contains(&date.month())
            })
            .collect()
    }
}

/// Observed daily maxima at one site over the study years.
#[derive(Debug, Clone, PartialEq)]
pub struct StationSeries {
    pub site: Site,
    n_years: usize,
    season_length: usize,
    values: Vec<Option<f64>>,
}

impl StationSeries {
    /// All-missing series.
    pub fn empty(site: Site, n_years: usize, season_length: usize) -> Self {
        StationSeries { site, n_years, season_length, values: vec![None; n_years * season_length] }
    }

    pub fn from_values(
        site: Site,
        n_years: usize,
        season_length: usize,
        values: Vec<Option<f64>>,
    ) -> Result<Self> {
        if values.len() != n_years * season_length {
            return Err(Error::InvalidInput(format!(
                "series for `{}` has {} values, expected {}",
                site.id,
                values.len(),
                n_years * season_length
            )));
        }
        for v in values.iter().flatten() {
            check_temperature(*v)?;
        }
        Ok(StationSeries { site, n_years, season_length, values })
    }

    pub fn n_years(&self) -> usize {
        self.n_years
    }

    pub fn season_length(&self) -> usize {
        self.season_length
    }

    /// Value at study year `year` and window day `day`, both 1-based.
    pub fn get(&self, year: u32, day: u32) -> Option<f64> {
        self.values[self.offset(year, day)]
    }

    pub fn set(&mut self, year: u32, day: u32, value: Option<f64>) -> Result<()> {
        if let Some(v) = value {
            check_temperature(v)?;
        }
        let i = self.offset(year, day);
        self.values[i] = value;
        Ok(())
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    fn offset(&self, year: u32, day: u32) -> usize {
        assert!(
            (1..=self.n_years as u32).contains(&year) && (1..=self.season_length as u32).contains(&day),
            "index (t={year}, l={day}) outside series"
        );
        (year as usize - 1) * self.season_length + day as usize - 1
    }
}

pub fn check_temperature(v: f64) -> Result<()> {
    let (lo, hi) = TEMPERATURE_BOUNDS;
    if !v.is_finite() || v < lo || v > hi {
        return Err(Error::InvalidInput(format!("temperature {v} outside [{lo}, {hi}] °C")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub site: Site,
    /// Cell area in km².
    pub cell_area: f64,
    pub regions: Vec<String>,
}

/// Prediction grid with per-point cell areas and region labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    points: Vec<GridPoint>,
}

impl GridSpec {
    pub fn new(points: Vec<GridPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("grid has no points".into()));
        }
        let mut ids = BTreeSet::new();
        for p in &points {
            if !(p.cell_area.is_finite() && p.cell_area > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "grid point `{}` has nonpositive cell area {}",
                    p.site.id, p.cell_area
                )));
            }
            if !ids.insert(p.site.id.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate grid id `{}`", p.site.id)));
            }
        }
        Ok(GridSpec { points })
    }

    /// Grid whose points are exactly the given sites, with unit cell areas.
    pub fn from_sites(sites: &[Site]) -> Result<Self> {
        Self::new(
            sites
                .iter()
                .map(|s| GridPoint { site: s.clone(), cell_area: 1.0, regions: Vec::new() })
                .collect(),
        )
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn sites(&self) -> Vec<Site> {
        self.points.iter().map(|p| p.site.clone()).collect()
    }

    /// Region names present in the labels, always including [`ALL_REGION`].
    pub fn region_names(&self) -> Vec<String> {
        let mut names: BTreeSet<String> =
            self.points.iter().flat_map(|p| p.regions.iter().cloned()).collect();
        names.insert(ALL_REGION.to_string());
        names.into_iter().collect()
    }

    /// Area weights of `region` over the full grid: zero outside the region,
    /// proportional to cell area inside it, summing to one.
    pub fn region_weights(&self, region: &str) -> Result<Vec<f64>> {
        let known = region == ALL_REGION || self.points.iter().any(|p| p.regions.iter().any(|r| r == region));
        if !known {
            return Err(Error::UnknownRegion(region.to_string()));
        }
        let member = |p: &GridPoint| region == ALL_REGION || p.regions.iter().any(|r| r == region);
        let total: f64 = self.points.iter().filter(|p| member(p)).map(|p| p.cell_area).sum();
        if total <= 0.0 {
            return Err(Error::EmptyRegion(region.to_string()));
        }
        Ok(self
            .points
            .iter()
            .map(|p| if member(p) { p.cell_area / total } else { 0.0 })
            .collect())
    }
}

/// Set of study years and window days over which a quantity is averaged.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodSelector {
    years: Vec<u32>,
    days: Vec<u32>,
}

impl PeriodSelector {
    pub fn new(
        years: impl IntoIterator<Item = u32>,
        days: impl IntoIterator<Item = u32>,
        season: &SeasonConfig,
    ) -> Result<Self> {
        let years: Vec<u32> = years.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let days: Vec<u32> = days.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        if years.is_empty() || days.is_empty() {
            return Err(Error::EmptyPeriod);
        }
        if years[0] == 0 {
            return Err(Error::InvalidInput("study years are 1-based".into()));
        }
        if days[0] == 0 || *days.last().unwrap() > season.length {
            return Err(Error::InvalidInput(format!(
                "period days must lie in [1, {}]",
                season.length
            )));
        }
        Ok(PeriodSelector { years, days })
    }

    /// Sorted, distinct study years.
    pub fn years(&self) -> &[u32] {
        &self.years
    }

    /// Sorted, distinct window days.
    pub fn days(&self) -> &[u32] {
        &self.days
    }

    pub fn contains_day(&self, day: u32) -> bool {
        self.days.binary_search(&day).is_ok()
    }

    /// Number of (year, day) slots.
    pub fn slot_count(&self) -> usize {
        self.years.len() * self.days.len()
    }
}

/// June–August days of the given study years.
pub fn jja_selector(season: &SeasonConfig, years: impl IntoIterator<Item = u32>) -> Result<PeriodSelector> {
    let days = season.jja_days();
    if days.is_empty() {
        return Err(Error::Config("warm period contains no June–August days".into()));
    }
    PeriodSelector::new(years, days, season)
}
