use serde::{Deserialize, Serialize};

use crate::domain::PeriodSelector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// `Y[t,l](s) − r(s) > c` on day `l`.
    DailyOverRef,
    /// `Y − r > c` on every day of the persistence window.
    DailyOverRefPersist,
    /// `Ȳ_D(s) − r(s) > c` for the period mean, once per replicate.
    DecadeAvgOverRef,
    /// `Ȳ_D2(s) − Ȳ_D1(s) > c` between two periods, once per replicate.
    DecadeDiff,
    /// `Z[j,l](s) = Y[D2_j, l](s) − Y[D1_j, l](s) > c`.
    DailyIncrement,
    /// `Z > c` on every day of the persistence window.
    DailyIncrementPersist,
}

impl EventKind {
    pub fn is_daily(self) -> bool {
        matches!(
            self,
            EventKind::DailyOverRef
                | EventKind::DailyOverRefPersist
                | EventKind::DailyIncrement
                | EventKind::DailyIncrementPersist
        )
    }

    pub fn is_increment(self) -> bool {
        matches!(self, EventKind::DailyIncrement | EventKind::DailyIncrementPersist)
    }

    pub fn uses_reference(self) -> bool {
        matches!(self, EventKind::DailyOverRef | EventKind::DailyOverRefPersist | EventKind::DecadeAvgOverRef)
    }

    pub fn is_persistent(self) -> bool {
        matches!(self, EventKind::DailyOverRefPersist | EventKind::DailyIncrementPersist)
    }

    fn n_periods(self) -> usize {
        match self {
            EventKind::DailyOverRef | EventKind::DailyOverRefPersist | EventKind::DecadeAvgOverRef => 1,
            _ => 2,
        }
    }
}

/// One event definition: kind, threshold `c` (°C), persistence `k` and the
/// period(s) it is evaluated over. With `complement` the event is negated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub name: String,
    pub kind: EventKind,
    pub threshold: f64,
    #[serde(default = "one")]
    pub persistence: u32,
    pub periods: Vec<PeriodSelector>,
    #[serde(default)]
    pub complement: bool,
}

fn one() -> u32 {
    1
}

/// A point in time at which a daily event is evaluated, or the single
/// evaluation of a period-level event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    /// Study year and window day.
    Day { year: u32, day: u32 },
    /// Rank `j` (0-based) within the paired periods and window day.
    Increment { j: usize, day: u32 },
    Period,
}

impl EventSpec {
    pub fn new(
        name: impl Into<String>,
        kind: EventKind,
        threshold: f64,
        persistence: u32,
        periods: Vec<PeriodSelector>,
    ) -> Result<Self> {
        let e = EventSpec { name: name.into(), kind, threshold, persistence, periods, complement: false };
        e.validate()?;
        Ok(e)
    }

    /// The same event negated.
    pub fn complement(&self) -> Self {
        EventSpec { complement: !self.complement, name: format!("not {}", self.name), ..self.clone() }
    }

    pub fn with_threshold(&self, c: f64) -> Self {
        EventSpec { threshold: c, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(Error::InvalidEvent(format!("{}: threshold must be finite", self.name)));
        }
        if !(1..=3).contains(&self.persistence) {
            return Err(Error::InvalidEvent(format!("{}: persistence must be 1, 2 or 3", self.name)));
        }
        if self.persistence > 1 && !self.kind.is_persistent() {
            return Err(Error::InvalidEvent(format!("{}: only persistence kinds take k > 1", self.name)));
        }
        if self.periods.len() != self.kind.n_periods() {
            return Err(Error::InvalidEvent(format!(
                "{}: {:?} takes {} period(s), got {}",
                self.name,
                self.kind,
                self.kind.n_periods(),
                self.periods.len()
            )));
        }
        if self.periods.len() == 2 {
            let (a, b) = (&self.periods[0], &self.periods[1]);
            if a.years().len() != b.years().len() {
                return Err(Error::MisalignedPeriods(format!(
                    "{}: periods have {} and {} years",
                    self.name,
                    a.years().len(),
                    b.years().len()
                )));
            }
            if a.days() != b.days() {
                return Err(Error::MisalignedPeriods(format!("{}: periods use different days", self.name)));
            }
        }
        Ok(())
    }

    /// Window days for day `l`: `{l}`, `{l, l+1}` or `{l-1, l, l+1}`.
    pub fn window(&self, day: u32) -> Vec<u32> {
        match self.persistence {
            1 => vec![day],
            2 => vec![day, day + 1],
            _ => vec![day.saturating_sub(1), day, day + 1],
        }
    }

    /// True if the persistence window of `day` lies inside the period's days.
    pub fn window_defined(&self, day: u32) -> bool {
        let p = &self.periods[0];
        self.window(day).into_iter().all(|d| d >= 1 && p.contains_day(d))
    }

    /// Slots over which period averages are taken, excluding days whose
    /// window leaves the period.
    pub fn slots(&self) -> Vec<Slot> {
        let p = &self.periods[0];
        let days: Vec<u32> = p.days().iter().copied().filter(|&d| self.window_defined(d)).collect();
        match self.kind {
            EventKind::DailyOverRef | EventKind::DailyOverRefPersist => p
                .years()
                .iter()
                .flat_map(|&year| days.iter().map(move |&day| Slot::Day { year, day }))
                .collect(),
            EventKind::DailyIncrement | EventKind::DailyIncrementPersist => (0..p.years().len())
                .flat_map(|j| days.iter().map(move |&day| Slot::Increment { j, day }))
                .collect(),
            EventKind::DecadeAvgOverRef | EventKind::DecadeDiff => vec![Slot::Period],
        }
    }

    /// Slots of one study year (daily kinds; for increments the year is
    /// looked up in the later period).
    pub fn slots_in_year(&self, year: u32) -> Vec<Slot> {
        self.slots()
            .into_iter()
            .filter(|s| match *s {
                Slot::Day { year: y, .. } => y == year,
                Slot::Increment { j, .. } => self.periods[1].years()[j] == year,
                Slot::Period => false,
            })
            .collect()
    }

    /// Evaluates the event at one slot for one location.
    ///
    /// `value(year, day)` returns the temperature, or `None` where it is not
    /// available; `reference` is `r(s)`. Returns `None` when the slot cannot
    /// be evaluated (missing values, or a window leaving the period).
    pub fn indicator_with(
        &self,
        slot: Slot,
        reference: f64,
        value: impl Fn(u32, u32) -> Option<f64>,
    ) -> Option<bool> {
        let c = self.threshold;
        let hit = match (self.kind, slot) {
            (EventKind::DailyOverRef | EventKind::DailyOverRefPersist, Slot::Day { year, day }) => {
                if !self.window_defined(day) {
                    return None;
                }
                let mut all = true;
                for d in self.window(day) {
                    all &= value(year, d)? - reference > c;
                }
                all
            }
            (EventKind::DailyIncrement | EventKind::DailyIncrementPersist, Slot::Increment { j, day }) => {
                if !self.window_defined(day) {
                    return None;
                }
                let early = *self.periods[0].years().get(j)?;
                let late = *self.periods[1].years().get(j)?;
                let mut all = true;
                for d in self.window(day) {
                    all &= value(late, d)? - value(early, d)? > c;
                }
                all
            }
            (EventKind::DecadeAvgOverRef, Slot::Period) => period_mean(&self.periods[0], &value)? - reference > c,
            (EventKind::DecadeDiff, Slot::Period) => {
                period_mean(&self.periods[1], &value)? - period_mean(&self.periods[0], &value)? > c
            }
            _ => return None,
        };
        Some(hit != self.complement)
    }
}

/// Mean over every (year, day) of the period; `None` if any value is missing.
pub fn period_mean(p: &PeriodSelector, value: &impl Fn(u32, u32) -> Option<f64>) -> Option<f64> {
    let mut sum = 0.0;
    for &y in p.years() {
        for &d in p.days() {
            sum += value(y, d)?;
        }
    }
    Some(sum / p.slot_count() as f64)
}
