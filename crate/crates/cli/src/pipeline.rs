//! The five commands and the files they exchange.
//!
//! Everything lives under the configured output directory:
//!
//! ```text
//! simulate  -> stations.csv, grid.csv, truth.json
//! fit       -> posterior.bin, posterior_draws.csv, diagnostics.csv,
//!              acceptance.csv, ingest_report.csv
//! generate  -> ensemble.bin
//! analyze   -> analysis/{reference.csv, summary.csv, trend_summary.csv,
//!              identity_checks.json, surfaces/, extents/, trends/, empirical/}
//! report    -> report.txt
//! ```
//!
//! Each command also writes `manifest_<command>.json`, and a failing
//! command writes `diagnostic.json`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use extentlab::analytics::{
    average_extent, average_probability, empirical_extent, posterior_summary, reference_mean,
    reference_mean_per_replicate, station_reference_mean, summary_row, write_extent_csv, write_surface_csv,
    write_trend_csv, yearly_extent_trend, EventSpec, ReferenceSurface, DEFAULT_QUANTILES, SUMMARY_HEADER,
};
use extentlab::domain::{GridPoint, GridSpec, Site, StationSeries};
use extentlab::generate::{generate_ensemble, simulate_synthetic_truth};
use extentlab::model::{diagnostics, fit, PosteriorStore};
use extentlab::numfmt::sig6;
use extentlab::rng::{FIT_CHAIN, GEN_REPLICATE, SIMULATE};
use extentlab::{Ensemble, Ensemble32};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::ingest::{export_grid, export_stations, ingest_grid, ingest_stations};
use crate::manifest::{sha256_file, RunManifest, VERSION};
use crate::report::render_report;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Fit,
    Generate,
    Analyze,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Generate => "generate",
            Command::Analyze => "analyze",
            Command::Report => "report",
        }
    }
}

pub const POSTERIOR: &str = "posterior.bin";
pub const ENSEMBLE: &str = "ensemble.bin";
pub const ANALYSIS: &str = "analysis";
pub const DIAGNOSTIC: &str = "diagnostic.json";

/// Tolerance of the analytic identity checks.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Command-line request before the config is read.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    /// A TOML config, or a manifest JSON to replay.
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Resolves the config (or replays a manifest), runs the command on a
/// dedicated thread pool and writes its manifest. On failure a diagnostic
/// file is written to the output directory when that is known.
pub fn run(inv: &Invocation) -> Result<RunManifest> {
    let cfg = match resolve(inv) {
        Ok(cfg) => cfg,
        Err(e) => {
            let dir = inv.config.parent().unwrap_or(Path::new("."));
            write_diagnostic(dir, inv.command, &e);
            return Err(e);
        }
    };
    let result = execute(inv, &cfg);
    if let Err(e) = &result {
        write_diagnostic(&cfg.output.dir, inv.command, e);
    }
    result
}

fn resolve(inv: &Invocation) -> Result<RunConfig> {
    let is_manifest = inv.config.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let mut cfg = if is_manifest {
        let m = RunManifest::load(&inv.config)?;
        if m.command == inv.command.name() {
            m.verify_inputs()?;
        }
        m.config
    } else {
        RunConfig::load(&inv.config)?
    };
    if let Some(seed) = inv.seed {
        cfg = cfg.with_seed(seed);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(inv: &Invocation, cfg: &RunConfig) -> Result<RunManifest> {
    // thread count never changes outputs, so an override is not part of the config
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(inv.threads.unwrap_or(cfg.run.threads))
        .build()
        .map_err(|e| CliError::Other(format!("thread pool: {e}")))?;
    let threads = pool.current_num_threads();
    let out = &cfg.output.dir;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let _ = std::fs::remove_file(out.join(DIAGNOSTIC));
    let mut ctx = Context { cfg, inputs: BTreeMap::new(), outputs: Vec::new(), decay: None, design: Vec::new() };
    pool.install(|| match inv.command {
        Command::Simulate => simulate(&mut ctx),
        Command::Fit => fit_cmd(&mut ctx),
        Command::Generate => generate_cmd(&mut ctx),
        Command::Analyze => analyze_cmd(&mut ctx),
        Command::Report => report_cmd(&mut ctx),
    })?;
    let outputs = ctx
        .outputs
        .iter()
        .map(|rel| Ok((rel.clone(), sha256_file(&out.join(rel))?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let substreams = match inv.command {
        Command::Simulate => vec![format!("{SIMULATE}.0 (parameters)"), format!("{SIMULATE}.1 (station data)")],
        Command::Fit => (0..cfg.mcmc.n_chains).map(|c| format!("{FIT_CHAIN}.{c}")).collect(),
        Command::Generate => vec![format!("{GEN_REPLICATE}.1..={}", cfg.generation.replicates)],
        Command::Analyze | Command::Report => Vec::new(),
    };
    let manifest = RunManifest {
        command: inv.command.name().to_string(),
        version: VERSION.to_string(),
        seed: cfg.run.seed,
        substreams,
        threads,
        decay_per_km: ctx.decay,
        inputs: ctx.inputs,
        outputs,
        design: ctx.design,
        config: cfg.clone(),
    };
    manifest.save(out)?;
    Ok(manifest)
}

struct Context<'a> {
    cfg: &'a RunConfig,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    decay: Option<f64>,
    design: Vec<String>,
}

impl Context<'_> {
    fn out(&self) -> &Path {
        &self.cfg.output.dir
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Creates `rel` under the output directory and records it as an output.
    fn create(&mut self, rel: &str) -> Result<BufWriter<File>> {
        let path = self.out().join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(rel.to_string());
        Ok(BufWriter::new(f))
    }

    fn write_with(&mut self, rel: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let path = self.out().join(rel);
        let mut w = self.create(rel)?;
        f(&mut w)?;
        w.flush().map_err(|e| CliError::io(&path, e))
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
        self.write_with(rel, |w| w.write_all((text + "\n").as_bytes()).map_err(|e| CliError::io(rel, e)))
    }

    fn load_store(&mut self) -> Result<PosteriorStore> {
        let path = self.out().join(POSTERIOR);
        if !path.exists() {
            return Err(CliError::MissingArtifact { what: "posterior", path, producer: "fit" });
        }
        self.input(&path)?;
        let store = PosteriorStore::load(&path)?;
        if store.spec().season != self.cfg.season {
            return Err(CliError::Other("the posterior was fitted with a different [season]".into()));
        }
        self.decay = Some(store.spec().decay);
        Ok(store)
    }

    fn load_grid(&mut self) -> Result<GridSpec> {
        let path = self.cfg.grid_path();
        self.input(&path)?;
        ingest_grid(&path)
    }

    fn load_stations(&mut self) -> Result<Vec<StationSeries>> {
        let path = self.cfg.stations_path();
        self.input(&path)?;
        Ok(ingest_stations(&path, &self.cfg.season)?.0)
    }
}

fn io_err(path: &str) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

/// Station layout of the synthetic study region: a low-discrepancy scatter
/// over a box of about 200 km by 280 km with elevations of 200-1400 m.
pub fn synthetic_sites(n: usize) -> Vec<Site> {
    (0..n)
        .map(|i| {
            let u = |a: f64, b: f64| (a * i as f64 + b).fract();
            let lon = -2.0 + 2.4 * u(0.618_034, 0.11);
            let lat = 40.2 + 2.5 * u(0.414_214, 0.37);
            let elev = 200.0 + 1200.0 * u(0.754_878, 0.23);
            Site::new(format!("S{:02}", i + 1), round(lon, 4), round(lat, 4), elev.round()).expect("finite layout")
        })
        .collect()
}

fn round(x: f64, digits: i32) -> f64 {
    let k = 10f64.powi(digits);
    (x * k).round() / k
}

/// Regular lattice spanning the stations' bounding box. Points west of the
/// centre are labelled `west`, the rest `east`; the northernmost row is
/// refined to 4 km² cells and also labelled `north`. Elevations are
/// inverse-distance weighted from the stations.
pub fn synthetic_grid(sites: &[Site], nx: usize, ny: usize) -> extentlab::Result<GridSpec> {
    let (lo_lon, hi_lon) = sites.iter().fold((f64::MAX, f64::MIN), |(a, b), s| (a.min(s.lon), b.max(s.lon)));
    let (lo_lat, hi_lat) = sites.iter().fold((f64::MAX, f64::MIN), |(a, b), s| (a.min(s.lat), b.max(s.lat)));
    let mid = (lo_lon + hi_lon) / 2.0;
    let step = |lo: f64, hi: f64, k: usize, n: usize| if n == 1 { (lo + hi) / 2.0 } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 };
    let mut points = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let lon = round(step(lo_lon, hi_lon, i, nx), 4);
            let lat = round(step(lo_lat, hi_lat, j, ny), 4);
            let (mut num, mut den) = (0.0, 0.0);
            for s in sites {
                let d2 = (s.lon - lon).powi(2) + (s.lat - lat).powi(2) + 1e-6;
                num += s.elev / d2;
                den += 1.0 / d2;
            }
            let mut regions = vec![if lon < mid { "west" } else { "east" }.to_string()];
            let north = j + 1 == ny && ny > 1;
            if north {
                regions.push("north".into());
            }
            points.push(GridPoint {
                site: Site::new(format!("G{:03}", j * nx + i + 1), lon, lat, (num / den).round())?,
                cell_area: if north { 4.0 } else { 16.0 },
                regions,
            });
        }
    }
    GridSpec::new(points)
}

fn simulate(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.cfg;
    let sim = cfg.simulate.as_ref().ok_or_else(|| CliError::Config {
        path: cfg.output.dir.clone(),
        message: "`simulate` needs a [simulate] section".into(),
    })?;
    let sites = synthetic_sites(sim.n_sites);
    let data = simulate_synthetic_truth(&sim.truth, sites.clone(), cfg.season, sim.n_years, cfg.run.seed)?;
    let grid = synthetic_grid(&sites, sim.grid_nx, sim.grid_ny)?;
    ctx.decay = Some(data.spec.decay);
    ctx.design.push("station values follow the model recursion exactly, with no missing days".into());
    ctx.write_with("stations.csv", |w| export_stations(w, &data.stations, &cfg.season))?;
    ctx.write_with("grid.csv", |w| export_grid(w, &grid))?;
    #[derive(Serialize)]
    struct Truth<'a> {
        config: &'a extentlab::generate::TruthConfig,
        spec: &'a extentlab::model::ModelSpec,
        parameters: &'a extentlab::model::ModelParameters,
    }
    ctx.write_json("truth.json", &Truth { config: &sim.truth, spec: &data.spec, parameters: &data.truth })
}

fn fit_cmd(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.cfg;
    let path = cfg.stations_path();
    ctx.input(&path)?;
    let (stations, report) = ingest_stations(&path, &cfg.season)?;
    ctx.write_with("ingest_report.csv", |w| {
        writeln!(w, "station_id,missing_days").map_err(io_err("ingest_report.csv"))?;
        for (id, n) in &report.missing {
            writeln!(w, "{id},{n}").map_err(io_err("ingest_report.csv"))?;
        }
        Ok(())
    })?;
    let store = fit(&stations, cfg.season, &cfg.priors, &cfg.mcmc)?;
    ctx.decay = Some(store.spec().decay);
    ctx.design.extend(store.manifest().notes.iter().cloned());
    ctx.design.push(format!("{} rows outside the warm period skipped at ingestion", report.skipped_rows));
    let post = ctx.out().join(POSTERIOR);
    store.save(&post)?;
    ctx.outputs.push(POSTERIOR.into());
    ctx.write_with("posterior_draws.csv", |w| Ok(store.write_csv(w)?))?;
    let diag = diagnostics(&store);
    ctx.write_with("diagnostics.csv", |w| {
        let e = io_err("diagnostics.csv");
        writeln!(w, "parameter,mean,sd,rhat,ess").map_err(&e)?;
        for p in &diag.parameters {
            let rhat = p.rhat.map_or_else(|| "NA".to_string(), sig6);
            writeln!(w, "{},{},{},{},{}", p.name, sig6(p.mean), sig6(p.sd), rhat, sig6(p.ess)).map_err(&e)?;
        }
        Ok(())
    })?;
    ctx.write_with("acceptance.csv", |w| {
        let e = io_err("acceptance.csv");
        writeln!(w, "chain,station_id,accept_z_rho,accept_z_sigma,step_z_rho,step_z_sigma").map_err(&e)?;
        for a in &diag.acceptance {
            for (i, site) in store.spec().sites.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    a.chain,
                    site.id,
                    sig6(a.z_rho[i]),
                    sig6(a.z_sigma[i]),
                    sig6(a.step_z_rho[i]),
                    sig6(a.step_z_sigma[i])
                )
                .map_err(&e)?;
            }
        }
        Ok(())
    })
}

fn generate_cmd(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.cfg;
    let store = ctx.load_store()?;
    let grid = ctx.load_grid()?;
    let (first, n_years) = cfg.generation_years()?;
    if first as usize + n_years - 1 > store.spec().n_years {
        return Err(CliError::Other(format!(
            "generation years {:?} extend past the fitted record ({} years from {})",
            cfg.generation.years,
            store.spec().n_years,
            cfg.season.first_year
        )));
    }
    // replicates are computed in double precision and stored as f32
    let ens: Ensemble =
        generate_ensemble::<f64>(&store, &grid, first, n_years, cfg.generation.replicates, cfg.run.seed)?;
    let ens: Ensemble32 = ens.convert();
    let path = ctx.out().join(ENSEMBLE);
    ens.save(&path)?;
    ctx.outputs.push(ENSEMBLE.into());
    ctx.design.extend([
        "posterior draws mapped to replicates by even thinning over the store".to_string(),
        "grid eta copied from a coincident station, otherwise drawn fresh with the posterior variance".into(),
        "psi taken from the posterior draw for each generated year".into(),
    ]);
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub event: String,
    pub region: String,
    pub check: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn clean(s: &str) -> String {
    s.chars().map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn file_stem(event: &str, region: &str) -> String {
    format!("{}__{}", clean(event), clean(region))
}

fn analyze_cmd(ctx: &mut Context) -> Result<()> {
    let cfg = ctx.cfg;
    let ens_path = ctx.out().join(ENSEMBLE);
    if !ens_path.exists() {
        return Err(CliError::MissingArtifact { what: "ensemble", path: ens_path, producer: "generate" });
    }
    ctx.input(&ens_path)?;
    let ens = Ensemble32::load(&ens_path)?;
    let grid = ctx.load_grid()?;
    if grid.len() != ens.n_points() {
        return Err(CliError::Other(format!(
            "grid has {} points but the ensemble has {}",
            grid.len(),
            ens.n_points()
        )));
    }
    if ens.season_length() != cfg.season.length as usize {
        return Err(CliError::Other("ensemble season length differs from [season]".into()));
    }
    let regions = if cfg.analysis.regions.is_empty() { grid.region_names() } else { cfg.analysis.regions.clone() };
    let weights: Vec<(String, Vec<f64>)> =
        regions.iter().map(|r| Ok((r.clone(), grid.region_weights(r)?))).collect::<Result<_>>()?;
    let events = cfg.event_specs()?;

    let ref_period = cfg.reference_period()?;
    let reference = if cfg.reference.per_replicate {
        reference_mean_per_replicate(&ens, &ref_period)?
    } else {
        reference_mean(&ens, &ref_period)?
    };
    ctx.design.push(format!("reference surface {}", reference.provenance()));
    let r_mean = reference.mean_surface();
    ctx.write_with(&format!("{ANALYSIS}/reference.csv"), |w| {
        let surface =
            extentlab::analytics::ProbabilitySurface { event: "reference".into(), values: r_mean, n_slots: 0 };
        Ok(write_surface_csv(w, &grid, &surface)?)
    })?;

    let stations_path = cfg.stations_path();
    let stations = if stations_path.exists() { Some(ctx.load_stations()?) } else { None };

    let mut summary = vec![SUMMARY_HEADER.to_string()];
    let mut trends = vec!["event,region,slope_per_decade,ci05,ci95,n_years".to_string()];
    let mut checks = Vec::new();
    for spec in &events {
        let r = spec.kind.uses_reference().then_some(&reference);
        let surface = average_probability(&ens, spec, r)?;
        let name = &spec.name;
        ctx.write_with(&format!("{ANALYSIS}/surfaces/{}.csv", clean(name)), |w| {
            Ok(write_surface_csv(w, &grid, &surface)?)
        })?;
        let not = spec.complement();
        for (region, w) in &weights {
            let sample = average_extent(&ens, spec, r, region, w)?;
            let stem = file_stem(name, region);
            ctx.write_with(&format!("{ANALYSIS}/extents/{stem}.csv"), |out| Ok(write_extent_csv(out, &sample)?))?;
            let s = posterior_summary(&sample.values, &DEFAULT_QUANTILES, cfg.analysis.histogram_bins)?;
            summary.push(summary_row(name, region, &s));
            checks.extend(identities(&ens, spec, &not, r, region, w, &sample.values, &surface.values)?);
            if spec.kind.is_daily() {
                let years = spec.periods.last().expect("validated event has periods").years().to_vec();
                if years.len() >= 3 {
                    let t = yearly_extent_trend(&ens, spec, r, w, &years)?;
                    ctx.write_with(&format!("{ANALYSIS}/trends/{stem}.csv"), |out| Ok(write_trend_csv(out, &t)?))?;
                    trends.push(format!(
                        "{name},{region},{},{},{},{}",
                        sig6(10.0 * t.slope),
                        sig6(10.0 * t.ci90.0),
                        sig6(10.0 * t.ci90.1),
                        years.len()
                    ));
                }
            }
        }
        if let (Some(st), true) = (&stations, spec.kind.is_daily()) {
            let rows = empirical_rows(st, spec, &ref_period)?;
            if !rows.is_empty() {
                ctx.write_with(&format!("{ANALYSIS}/empirical/{}.csv", clean(name)), |w| {
                    let e = io_err("empirical");
                    writeln!(w, "year,empirical_extent,n_slots").map_err(&e)?;
                    for (y, v, n) in &rows {
                        writeln!(w, "{},{},{n}", cfg.season.calendar_year(*y), sig6(*v)).map_err(&e)?;
                    }
                    Ok(())
                })?;
            }
        }
    }
    ctx.write_with(&format!("{ANALYSIS}/summary.csv"), |w| {
        w.write_all((summary.join("\n") + "\n").as_bytes()).map_err(io_err("summary.csv"))
    })?;
    ctx.write_with(&format!("{ANALYSIS}/trend_summary.csv"), |w| {
        w.write_all((trends.join("\n") + "\n").as_bytes()).map_err(io_err("trend_summary.csv"))
    })?;
    for (region, w) in &weights {
        let err = (w.iter().sum::<f64>() - 1.0).abs();
        checks.push(IdentityCheck {
            event: String::new(),
            region: region.clone(),
            check: "region weights sum to one".into(),
            max_error: err,
            tolerance: IDENTITY_TOL,
            passed: err <= IDENTITY_TOL,
        });
    }
    ctx.write_json(&format!("{ANALYSIS}/identity_checks.json"), &checks)?;
    let failed: Vec<String> =
        checks.iter().filter(|c| !c.passed).map(|c| format!("{} / {}: {}", c.event, c.region, c.check)).collect();
    if !failed.is_empty() {
        return Err(CliError::IdentityCheck(failed.join("; ")));
    }
    Ok(())
}

/// Complement, Fubini and range checks for one event and region.
#[allow(clippy::too_many_arguments)]
fn identities(
    ens: &Ensemble32,
    spec: &EventSpec,
    not: &EventSpec,
    r: Option<&ReferenceSurface>,
    region: &str,
    w: &[f64],
    extents: &[f64],
    surface: &[f64],
) -> Result<Vec<IdentityCheck>> {
    let comp = average_extent(ens, not, r, region, w)?;
    let comp_err = extents.iter().zip(&comp.values).map(|(a, b)| (a + b - 1.0).abs()).fold(0.0, f64::max);
    let mean_extent = extents.iter().sum::<f64>() / extents.len() as f64;
    let weighted: f64 = w.iter().zip(surface).map(|(a, b)| a * b).sum();
    let fubini_err = (mean_extent - weighted).abs();
    let range_err = extents.iter().map(|&e| (-e).max(e - 1.0).max(0.0)).fold(0.0, f64::max);
    let check = |name: &str, err: f64| IdentityCheck {
        event: spec.name.clone(),
        region: region.to_string(),
        check: name.to_string(),
        max_error: err,
        tolerance: IDENTITY_TOL,
        passed: err <= IDENTITY_TOL,
    };
    Ok(vec![
        check("extent of event plus extent of complement is one", comp_err),
        check("mean extent equals weighted mean probability", fubini_err),
        check("extent lies in [0, 1]", range_err),
    ])
}

/// Per-year share of stations with the event, averaged over the slots of
/// that year the stations can evaluate. Years past the record are omitted.
fn empirical_rows(
    stations: &[StationSeries],
    spec: &EventSpec,
    ref_period: &extentlab::domain::PeriodSelector,
) -> Result<Vec<(u32, f64, usize)>> {
    let n_years = stations.first().map_or(0, |s| s.n_years()) as u32;
    let reference = station_reference_mean(stations, ref_period);
    let years: Vec<u32> = spec.periods.last().expect("validated event has periods").years().to_vec();
    let mut rows = Vec::new();
    for y in years.into_iter().filter(|&y| y <= n_years) {
        let vals: Vec<f64> =
            spec.slots_in_year(y).into_iter().filter_map(|slot| empirical_extent(stations, spec, &reference, slot).ok()).collect();
        if !vals.is_empty() {
            rows.push((y, vals.iter().sum::<f64>() / vals.len() as f64, vals.len()));
        }
    }
    Ok(rows)
}

fn report_cmd(ctx: &mut Context) -> Result<()> {
    let dir = ctx.out().join(ANALYSIS);
    let summary = dir.join("summary.csv");
    if !summary.exists() {
        return Err(CliError::MissingArtifact { what: "analysis summary", path: summary, producer: "analyze" });
    }
    ctx.input(&summary)?;
    let trend = dir.join("trend_summary.csv");
    let trend = if trend.exists() {
        ctx.input(&trend)?;
        Some(trend)
    } else {
        None
    };
    let text = render_report(&summary, trend.as_deref(), ctx.cfg)?;
    ctx.write_with("report.txt", |w| w.write_all(text.as_bytes()).map_err(io_err("report.txt")))?;
    print!("{text}");
    Ok(())
}

/// Writes `diagnostic.json` describing a failure; errors doing so are ignored
/// because the original failure is what gets reported.
pub fn write_diagnostic(dir: &Path, command: Command, err: &CliError) {
    #[derive(Serialize)]
    struct Diagnostic<'a> {
        command: &'a str,
        category: &'a str,
        exit_code: i32,
        message: String,
        version: &'a str,
    }
    let d = Diagnostic {
        command: command.name(),
        category: err.category(),
        exit_code: err.exit_code(),
        message: err.to_string(),
        version: VERSION,
    };
    if std::fs::create_dir_all(dir).is_ok() {
        if let Ok(text) = serde_json::to_string_pretty(&d) {
            let _ = std::fs::write(dir.join(DIAGNOSTIC), text + "\n");
        }
    }
}
