use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{PeriodSelector, StationSeries};
use crate::error::{Error, Result};
use crate::generate::Ensemble;
use crate::scalar::Scalar;

use super::events::{period_mean, EventSpec, Slot};
use super::summary::quantile;

/// Baseline `r(s)` per grid point: one pooled surface, or one per replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReferenceSurface {
    Pooled(Vec<f64>),
    PerReplicate(Vec<Vec<f64>>),
}

impl ReferenceSurface {
    pub fn at(&self, b: usize, s: usize) -> f64 {
        match self {
            ReferenceSurface::Pooled(v) => v[s],
            ReferenceSurface::PerReplicate(v) => v[b][s],
        }
    }

    pub fn provenance(&self) -> &'static str {
        match self {
            ReferenceSurface::Pooled(_) => "pooled over replicates",
            ReferenceSurface::PerReplicate(_) => "per replicate",
        }
    }

    /// The pooled surface, or the replicate average of a per-replicate one.
    pub fn mean_surface(&self) -> Vec<f64> {
        match self {
            ReferenceSurface::Pooled(v) => v.clone(),
            ReferenceSurface::PerReplicate(v) => {
                let n = v.len() as f64;
                (0..v.first().map_or(0, Vec::len)).map(|s| v.iter().map(|r| r[s]).sum::<f64>() / n).collect()
            }
        }
    }
}

fn check_period<T: Scalar>(ens: &Ensemble<T>, p: &PeriodSelector) -> Result<()> {
    if let Some(&y) = p.years().iter().find(|&&y| !ens.contains_year(y)) {
        return Err(Error::InvalidInput(format!(
            "period year {y} is outside the ensemble years {}..{}",
            ens.first_year(),
            ens.last_year()
        )));
    }
    if p.days().last().is_some_and(|&d| d as usize > ens.season_length()) {
        return Err(Error::InvalidInput("period days exceed the ensemble season".into()));
    }
    Ok(())
}

fn check_event<T: Scalar>(ens: &Ensemble<T>, spec: &EventSpec, r: Option<&ReferenceSurface>) -> Result<()> {
    spec.validate()?;
    for p in &spec.periods {
        check_period(ens, p)?;
    }
    if ens.n_replicates() == 0 {
        return Err(Error::InvalidInput("ensemble has no replicates".into()));
    }
    if spec.kind.uses_reference() {
        match r {
            None => return Err(Error::InvalidEvent(format!("{} needs a reference surface", spec.name))),
            Some(ReferenceSurface::Pooled(v)) if v.len() != ens.n_points() => {
                return Err(Error::InvalidInput("reference surface has the wrong length".into()))
            }
            Some(ReferenceSurface::PerReplicate(v))
                if v.len() != ens.n_replicates() || v.iter().any(|x| x.len() != ens.n_points()) =>
            {
                return Err(Error::InvalidInput("reference surface has the wrong shape".into()))
            }
            _ => {}
        }
    }
    Ok(())
}

fn accessor<T: Scalar>(ens: &Ensemble<T>, b: usize, s: usize) -> impl Fn(u32, u32) -> Option<f64> + '_ {
    move |y, d| {
        if ens.contains_year(y) && d >= 1 && d as usize <= ens.season_length() {
            Some(ens.get(b, s, y, d).as_f64())
        } else {
            None
        }
    }
}

/// `μ̃(s)`: mean over replicates, years and days of the period.
pub fn reference_mean<T: Scalar>(ens: &Ensemble<T>, period: &PeriodSelector) -> Result<ReferenceSurface> {
    check_period(ens, period)?;
    let per = per_replicate_means(ens, period);
    let n = ens.n_replicates() as f64;
    Ok(ReferenceSurface::Pooled((0..ens.n_points()).map(|s| per.iter().map(|r| r[s]).sum::<f64>() / n).collect()))
}

/// Period mean of each replicate separately.
pub fn reference_mean_per_replicate<T: Scalar>(
    ens: &Ensemble<T>,
    period: &PeriodSelector,
) -> Result<ReferenceSurface> {
    check_period(ens, period)?;
    Ok(ReferenceSurface::PerReplicate(per_replicate_means(ens, period)))
}

fn per_replicate_means<T: Scalar>(ens: &Ensemble<T>, period: &PeriodSelector) -> Vec<Vec<f64>> {
    (0..ens.n_replicates())
        .into_par_iter()
        .map(|b| {
            (0..ens.n_points())
                .map(|s| period_mean(period, &accessor(ens, b, s)).expect("period checked against ensemble"))
                .collect()
        })
        .collect()
}

/// Indicator of the event for replicate `b` at point `s` and slot `slot`.
pub fn event_indicator<T: Scalar>(
    ens: &Ensemble<T>,
    spec: &EventSpec,
    reference: Option<&ReferenceSurface>,
    b: usize,
    s: usize,
    slot: Slot,
) -> Result<bool> {
    check_event(ens, spec, reference)?;
    indicator_unchecked(ens, spec, reference, b, s, slot)
        .ok_or_else(|| Error::InvalidEvent(format!("{}: slot {slot:?} is not defined for this event", spec.name)))
}

fn indicator_unchecked<T: Scalar>(
    ens: &Ensemble<T>,
    spec: &EventSpec,
    reference: Option<&ReferenceSurface>,
    b: usize,
    s: usize,
    slot: Slot,
) -> Option<bool> {
    let r = reference.map_or(0.0, |r| r.at(b, s));
    spec.indicator_with(slot, r, accessor(ens, b, s))
}

/// Fraction of replicates in which the event occurs: `count / B`.
pub fn event_probability<T: Scalar>(
    ens: &Ensemble<T>,
    spec: &EventSpec,
    reference: Option<&ReferenceSurface>,
    s: usize,
    slot: Slot,
) -> Result<f64> {
    check_event(ens, spec, reference)?;
    let mut count = 0usize;
    for b in 0..ens.n_replicates() {
        if indicator_unchecked(ens, spec, reference, b, s, slot)
            .ok_or_else(|| Error::InvalidEvent(format!("{}: slot {slot:?} is not defined", spec.name)))?
        {
            count += 1;
        }
    }
    Ok(count as f64 / ens.n_replicates() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilitySurface {
    pub event: String,
    pub values: Vec<f64>,
    /// Number of slots averaged per point.
    pub n_slots: usize,
}

/// Per-point mean over the event's slots of the daily probabilities.
pub fn average_probability<T: Scalar>(
    ens: &Ensemble<T>,
    spec: &EventSpec,
    reference: Option<&ReferenceSurface>,
) -> Result<ProbabilitySurface> {
    check_event(ens, spec, reference)?;
    let slots = spec.slots();
    if slots.is_empty() {
        return Err(Error::EmptyPeriod);
    }
    let denom = (slots.len() * ens.n_replicates()) as f64;
    let values = (0..ens.n_points())
        .into_par_iter()
        .map(|s| {
            let mut count = 0usize;
            for b in 0..ens.n_replicates() {
                for &slot in &slots {
                    count += indicator_unchecked(ens, spec, reference, b, s, slot).expect("slots are defined") as usize;
                }
            }
            count as f64 / denom
        })
        .collect();
    Ok(ProbabilitySurface { event: spec.name.clone(), values, n_slots: slots.len() })
}

fn check_weights<T: Scalar>(ens: &Ensemble<T>, weights: &[f64]) -> Result<()> {
    if weights.len() != ens.n_points() {
        return Err(Error::InvalidInput(format!(
            "{} region weights for {} grid points",
            weights.len(),
            ens.n_points()
        )));
    }
    Ok(())
}

/// `Σ_s w_s 1(event at s)` for replicate `b` at one slot, with the
/// weights taken as normalized.
pub fn extent<T: Scalar>(
    ens: &Ensemble<T>,
    spec: &EventSpec,
    reference: Option<&ReferenceSurface>,
    weights: &[f64],
    b: usize,
    slot: Slot,
) -> Result<f64> {
    check_event(ens, spec, reference)?;
    check_weights(ens, weights)?;
    extent_unchecked(ens, spec, reference, weights, b, slot)
        .ok_or_else(|| Error::InvalidEvent(format!("{}: slot {slot:?} is not defined", spec.name)))
}

fn extent_unchecked<T: Scalar>(
    ens: &Ensemble<T>,
    spec: &EventSpec,
    reference: Option<&ReferenceSurface>,
    weights: &[f64],
    b: usize,
    slot: Slot,
) -> Option<f64> {
    // dividing by the summed weights keeps the result inside [0, 1] under
    // rounding, since a partial sum never exceeds the full one
    let (mut e, mut total) = (0.0, 0.0);
    for (s, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        total += w;
        if indicator_unchecked(ens, spec, reference, b, s, slot)? {
            e += w;
        }
    }
    Some(if total > 0.0 { e / total } else { 0.0 })
}

/// Per-replicate extents averaged over a set of slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtentSample {
    pub event: String,
    pub region: String,
    pub values: Vec<f64>,
    pub n_slots: usize,
}

/// Per-replicate mean of daily extents over the event's slots.
pub fn average_extent<T: Scalar>(
    ens: &Ensemble<T>,
    spec: &EventSpec,
    reference: Option<&ReferenceSurface>,
    region: &str,
    weights: &[f64],
) -> Result<ExtentSample> {
    check_event(ens, spec, reference)?;
    check_weights(ens, weights)?;
    let slots = spec.slots();
    let values = average_over_slots(ens, spec, reference, weights, &slots)?;
    Ok(ExtentSample { event: spec.name.clone(), region: region.to_string(), values, n_slots: slots.len() })
}

fn average_over_slots<T: Scalar>(
    ens: &Ensemble<T>,
    spec: &EventSpec,
    reference: Option<&ReferenceSurface>,
    weights: &[f64],
    slots: &[Slot],
) -> Result<Vec<f64>> {
    if slots.is_empty() {
        return Err(Error::EmptyPeriod);
    }
    Ok((0..ens.n_replicates())
        .into_par_iter()
        .map(|b| {
            let total: f64 = slots
                .iter()
                .map(|&slot| extent_unchecked(ens, spec, reference, weights, b, slot).expect("slots are defined"))
                .sum();
            total / slots.len() as f64
        })
        .collect())
}

/// Linear trend of yearly average extents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendEstimate {
    pub years: Vec<u32>,
    /// Replicate mean of the yearly average extent, per year.
    pub yearly_mean: Vec<f64>,
    /// OLS slope of `yearly_mean` on the year (per year).
    pub slope: f64,
    pub intercept: f64,
    /// OLS slope fitted separately in each replicate.
    pub replicate_slopes: Vec<f64>,
    /// Central 90% interval of `replicate_slopes`.
    pub ci90: (f64, f64),
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Per-year average extents over the event's days, their replicate mean,
/// and OLS slopes. The point estimate is fitted to the replicate means; the
/// interval comes from the per-replicate slopes.
pub fn yearly_extent_trend<T: Scalar>(
    ens: &Ensemble<T>,
    spec: &EventSpec,
    reference: Option<&ReferenceSurface>,
    weights: &[f64],
    years: &[u32],
) -> Result<TrendEstimate> {
    check_event(ens, spec, reference)?;
    check_weights(ens, weights)?;
    if !spec.kind.is_daily() {
        return Err(Error::InvalidEvent(format!("{}: yearly trends need a daily event", spec.name)));
    }
    let mut years = years.to_vec();
    years.sort_unstable();
    years.dedup();
    if years.len() < 3 {
        return Err(Error::InvalidInput("a yearly trend needs at least three years".into()));
    }
    let per_year: Vec<Vec<f64>> = years
        .iter()
        .map(|&y| {
            let slots = spec.slots_in_year(y);
            if slots.is_empty() {
                return Err(Error::InvalidInput(format!("year {y} is not in the event period")));
            }
            average_over_slots(ens, spec, reference, weights, &slots)
        })
        .collect::<Result<_>>()?;
    let x: Vec<f64> = years.iter().map(|&y| y as f64).collect();
    let n_rep = ens.n_replicates();
    let yearly_mean: Vec<f64> = per_year.iter().map(|v| v.iter().sum::<f64>() / n_rep as f64).collect();
    let (slope, intercept) = ols(&x, &yearly_mean);
    let replicate_slopes: Vec<f64> = (0..n_rep)
        .map(|b| ols(&x, &per_year.iter().map(|v| v[b]).collect::<Vec<_>>()).0)
        .collect();
    let ci90 = (quantile(&replicate_slopes, 0.05), quantile(&replicate_slopes, 0.95));
    Ok(TrendEstimate { years, yearly_mean, slope, intercept, replicate_slopes, ci90 })
}

/// Per-station mean over the period's (year, day) slots, skipping missing
/// values; `None` for a station with no observed value in the period.
pub fn station_reference_mean(stations: &[StationSeries], period: &PeriodSelector) -> Vec<Option<f64>> {
    stations
        .iter()
        .map(|st| {
            let vals: Vec<f64> = period
                .years()
                .iter()
                .flat_map(|&y| period.days().iter().filter_map(move |&d| {
                    (y as usize <= st.n_years() && d as usize <= st.season_length()).then(|| st.get(y, d)).flatten()
                }))
                .collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

/// Unweighted share of stations where a daily event occurs at `slot`,
/// over the stations where it can be evaluated.
pub fn empirical_extent(
    stations: &[StationSeries],
    spec: &EventSpec,
    reference: &[Option<f64>],
    slot: Slot,
) -> Result<f64> {
    spec.validate()?;
    if !spec.kind.is_daily() {
        return Err(Error::InvalidEvent(format!("{}: empirical extents need a daily event", spec.name)));
    }
    if reference.len() != stations.len() {
        return Err(Error::InvalidInput("one reference value per station is required".into()));
    }
    let (mut hits, mut n) = (0usize, 0usize);
    for (st, r) in stations.iter().zip(reference) {
        let r = match (spec.kind.uses_reference(), r) {
            (true, Some(r)) => *r,
            (true, None) => continue,
            (false, _) => 0.0,
        };
        let value = |y: u32, d: u32| {
            if y >= 1 && y as usize <= st.n_years() && d >= 1 && d as usize <= st.season_length() {
                st.get(y, d)
            } else {
                None
            }
        };
        if let Some(hit) = spec.indicator_with(slot, r, value) {
            n += 1;
            hits += hit as usize;
        }
    }
    if n == 0 {
        return Err(Error::InvalidInput(format!("no station can evaluate {} at {slot:?}", spec.name)));
    }
    Ok(hits as f64 / n as f64)
}

/// Same-replicate, same-day difference between the `j`-th years (0-based)
/// of two aligned periods.
pub fn daily_increment<T: Scalar>(
    ens: &Ensemble<T>,
    b: usize,
    s: usize,
    j: usize,
    day: u32,
    early: &PeriodSelector,
    late: &PeriodSelector,
) -> Result<f64> {
    if early.years().len() != late.years().len() || early.days() != late.days() {
        return Err(Error::MisalignedPeriods("increment periods must match in length and days".into()));
    }
    check_period(ens, early)?;
    check_period(ens, late)?;
    if j >= early.years().len() || !early.contains_day(day) {
        return Err(Error::InvalidInput(format!("increment slot ({j}, {day}) is outside the periods")));
    }
    Ok(ens.get(b, s, late.years()[j], day).as_f64() - ens.get(b, s, early.years()[j], day).as_f64())
}
