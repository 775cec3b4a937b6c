//! Run configuration: a TOML file with named sections.
//!
//! Relative paths are resolved against the directory holding the config
//! file, so a resolved [`RunConfig`] is self-contained and can be replayed
//! from anywhere.

use std::path::{Path, PathBuf};

use extentlab::analytics::{EventKind, EventSpec};
use extentlab::domain::{PeriodSelector, SeasonConfig};
use extentlab::generate::TruthConfig;
use extentlab::model::{McmcConfig, PriorConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub season: SeasonConfig,
    #[serde(default)]
    pub priors: PriorConfig,
    #[serde(default)]
    pub mcmc: McmcConfig,
    pub generation: GenerationSection,
    pub reference: ReferenceSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub events: Vec<EventSection>,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Worker threads; 0 leaves the choice to the thread pool.
    #[serde(default)]
    pub threads: usize,
}

/// Input files. Either may be omitted, in which case the files written by
/// `simulate` into the output directory are used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub stations: Option<PathBuf>,
    pub grid: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSection {
    pub replicates: usize,
    /// First and last calendar year, inclusive.
    pub years: [i32; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    pub years: [i32; 2],
    #[serde(default = "default_days")]
    pub days: String,
    #[serde(default)]
    pub per_replicate: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    /// Regions to report; empty means every region of the grid.
    #[serde(default)]
    pub regions: Vec<String>,
    /// Bins of the extent histograms.
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSection {
    pub name: String,
    pub kind: EventKind,
    pub threshold: f64,
    #[serde(default = "one")]
    pub persistence: u32,
    #[serde(default)]
    pub complement: bool,
    pub periods: Vec<PeriodSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodSection {
    pub years: [i32; 2],
    #[serde(default = "default_days")]
    pub days: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n_sites: usize,
    pub n_years: usize,
    #[serde(default = "default_grid_side")]
    pub grid_nx: usize,
    #[serde(default = "default_grid_side")]
    pub grid_ny: usize,
    #[serde(default)]
    pub truth: TruthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

fn default_days() -> String {
    "all".into()
}

fn default_bins() -> usize {
    20
}

fn default_grid_side() -> usize {
    5
}

fn one() -> u32 {
    1
}

impl RunConfig {
    /// Reads and resolves a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Parses TOML text; `path` names the file for errors and anchors
    /// relative paths.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |message: String| CliError::Config { path: path.to_path_buf(), message };
        let table: toml::Table = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        let explicit_mcmc_seed = table
            .get("mcmc")
            .and_then(|m| m.get("seed"))
            .map(|v| v.as_integer().ok_or_else(|| bad("mcmc.seed must be an integer".into())))
            .transpose()?;
        let mut cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| bad(e.to_string()))?;
        if let Some(s) = explicit_mcmc_seed {
            if s as u64 != cfg.run.seed {
                return Err(bad(format!(
                    "mcmc.seed = {s} conflicts with run.seed = {}; the run seed drives every stage",
                    cfg.run.seed
                )));
            }
        }
        cfg.mcmc.seed = cfg.run.seed;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
        let base = std::path::absolute(&base).map_err(|e| CliError::io(&base, e))?;
        cfg.output.dir = normalize(&base.join(&cfg.output.dir));
        cfg.data.stations = cfg.data.stations.map(|p| normalize(&base.join(p)));
        cfg.data.grid = cfg.data.grid.map(|p| normalize(&base.join(p)));
        cfg.validate().map_err(|e| match e {
            CliError::Other(m) => bad(m),
            e => e,
        })?;
        Ok(cfg)
    }

    /// Applies a `--seed` override.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.run.seed = seed;
        self.mcmc.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(CliError::Other(m));
        self.season.validate()?;
        self.priors.validate()?;
        self.mcmc.validate()?;
        if self.generation.replicates == 0 {
            return err("generation.replicates must be at least 1".into());
        }
        for p in [&self.data.stations, &self.data.grid].into_iter().flatten() {
            if !p.is_file() {
                return err(format!("data file {} does not exist", p.display()));
            }
        }
        self.generation_years()?;
        self.reference_period()?;
        let mut names = std::collections::BTreeSet::new();
        for e in &self.events {
            if !names.insert(e.name.as_str()) {
                return err(format!("event name `{}` is used twice", e.name));
            }
            if e.name.is_empty() || e.name.contains(['/', '\\', ',']) {
                return err(format!("event name `{}` must be non-empty without `/`, `\\` or `,`", e.name));
            }
        }
        self.event_specs()?;
        if self.analysis.histogram_bins == 0 {
            return err("analysis.histogram_bins must be at least 1".into());
        }
        if let Some(sim) = &self.simulate {
            if sim.n_sites < 2 || sim.n_years < 2 {
                return err("simulate needs at least two sites and two years".into());
            }
            if sim.grid_nx == 0 || sim.grid_ny == 0 {
                return err("simulate grid needs at least one point per side".into());
            }
        }
        Ok(())
    }

    /// Study years of a calendar range.
    pub fn study_years(&self, range: [i32; 2]) -> Result<Vec<u32>> {
        let [a, b] = range;
        if a > b {
            return Err(CliError::Other(format!("year range [{a}, {b}] is reversed")));
        }
        (a..=b)
            .map(|y| {
                self.season.study_year(y).ok_or_else(|| {
                    CliError::Other(format!("year {y} precedes the first study year {}", self.season.first_year))
                })
            })
            .collect()
    }

    /// First study year and number of years to generate.
    pub fn generation_years(&self) -> Result<(u32, usize)> {
        let years = self.study_years(self.generation.years)?;
        Ok((years[0], years.len()))
    }

    pub fn reference_period(&self) -> Result<PeriodSelector> {
        self.period(self.reference.years, &self.reference.days)
    }

    fn period(&self, years: [i32; 2], days: &str) -> Result<PeriodSelector> {
        let years = self.study_years(years)?;
        let days = parse_days(days, &self.season)?;
        Ok(PeriodSelector::new(years, days, &self.season)?)
    }

    pub fn event_specs(&self) -> Result<Vec<EventSpec>> {
        self.events
            .iter()
            .map(|e| {
                let periods =
                    e.periods.iter().map(|p| self.period(p.years, &p.days)).collect::<Result<Vec<_>>>()?;
                let mut spec = EventSpec::new(e.name.clone(), e.kind, e.threshold, e.persistence, periods)?;
                spec.complement = e.complement;
                Ok(spec)
            })
            .collect()
    }

    pub fn stations_path(&self) -> PathBuf {
        self.data.stations.clone().unwrap_or_else(|| self.output.dir.join("stations.csv"))
    }

    pub fn grid_path(&self) -> PathBuf {
        self.data.grid.clone().unwrap_or_else(|| self.output.dir.join("grid.csv"))
    }
}

/// Drops `.` and folds `..` without touching the filesystem.
fn normalize(path: &Path) -> PathBuf {
    use std::path::Component;
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push(c);
                }
            }
            other => out.push(other),
        }
    }
    out
}

/// `all`, `jja`, or an inclusive window-day range `a-b`.
pub fn parse_days(text: &str, season: &SeasonConfig) -> Result<Vec<u32>> {
    let t = text.trim();
    match t.to_ascii_lowercase().as_str() {
        "all" => Ok((1..=season.length).collect()),
        "jja" => Ok(season.jja_days()),
        _ => {
            let parsed = t.split_once('-').and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
            match parsed {
                Some((a, b)) if 1 <= a && a <= b && b <= season.length => Ok((a..=b).collect()),
                _ => Err(CliError::Other(format!(
                    "days `{text}` must be `all`, `jja` or a range `a-b` inside 1-{}",
                    season.length
                ))),
            }
        }
    }
}
