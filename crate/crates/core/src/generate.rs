//! Posterior predictive generation on a grid and the synthetic-truth
//! simulator.
//!
//! A replicate takes one posterior draw, samples the four spatial fields at
//! the grid points from their conditional GP given the draw's station
//! values, samples the local yearly intercepts, and then runs the AR(1)
//! recursion day by day.
//!
//! Random numbers are consumed in a fixed order per replicate: `β0(·)`,
//! `α(·)`, `Z_ρ(·)`, `Z_σ(·)` (one normal per grid point each), then one
//! normal per (year, grid point) for `η`, then one normal per
//! (grid point, year, day) for the series.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{GridSpec, SeasonConfig, Site, StationSeries};
use crate::error::{Error, Result};
use crate::gp::{mvn_sample, rho_from_z, sigma2_from_z, KrigingPlan};
use crate::model::{ModelParameters, ModelSpec, PosteriorStore};
use crate::rng::{substream, GEN_REPLICATE, SIMULATE};
use crate::scalar::Scalar;

/// Grid points closer than this to a station take that station's `η`.
const COINCIDENT_KM: f64 = 1e-9;

/// Replicate arrays `Y[b][s][t][l]`, row-major.
///
/// Replicates are indexed from 0 here; replicate `b` was generated on
/// substream `b + 1`. Years are study-year indices (1-based, contiguous).
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T> {
    n_replicates: usize,
    n_points: usize,
    first_year: u32,
    n_years: usize,
    season_length: usize,
    data: Vec<T>,
    pub seed: u64,
    /// SHA-256 of the posterior store the replicates came from.
    pub store_hash: [u8; 32],
}

pub const ENSEMBLE_MAGIC: &[u8; 8] = b"EXLENS\0\0";
pub const ENSEMBLE_VERSION: u32 = 1;

impl<T: Scalar> Ensemble<T> {
    pub fn new(
        n_replicates: usize,
        n_points: usize,
        first_year: u32,
        n_years: usize,
        season_length: usize,
        data: Vec<T>,
    ) -> Result<Self> {
        if first_year == 0 {
            return Err(Error::InvalidInput("study years are 1-based".into()));
        }
        if data.len() != n_replicates * n_points * n_years * season_length {
            return Err(Error::InvalidInput(format!(
                "ensemble data has {} values, expected {}x{}x{}x{}",
                data.len(),
                n_replicates,
                n_points,
                n_years,
                season_length
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { block: "ensemble".into(), detail: format!("value {k}") });
        }
        Ok(Ensemble { n_replicates, n_points, first_year, n_years, season_length, data, seed: 0, store_hash: [0; 32] })
    }

    /// Builds an ensemble from `f(b, s, t, l)` with `t` a study year and `l` 1-based.
    pub fn from_fn(
        n_replicates: usize,
        n_points: usize,
        first_year: u32,
        n_years: usize,
        season_length: usize,
        mut f: impl FnMut(usize, usize, u32, u32) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(n_replicates * n_points * n_years * season_length);
        for b in 0..n_replicates {
            for s in 0..n_points {
                for t in 0..n_years as u32 {
                    for l in 1..=season_length as u32 {
                        data.push(f(b, s, first_year + t, l));
                    }
                }
            }
        }
        Self::new(n_replicates, n_points, first_year, n_years, season_length, data)
    }

    pub fn n_replicates(&self) -> usize {
        self.n_replicates
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_years(&self) -> usize {
        self.n_years
    }

    pub fn first_year(&self) -> u32 {
        self.first_year
    }

    pub fn last_year(&self) -> u32 {
        self.first_year + self.n_years as u32 - 1
    }

    pub fn season_length(&self) -> usize {
        self.season_length
    }

    pub fn contains_year(&self, year: u32) -> bool {
        year >= self.first_year && year <= self.last_year()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    fn offset(&self, b: usize, s: usize, year: u32) -> usize {
        debug_assert!(b < self.n_replicates && s < self.n_points && self.contains_year(year));
        ((b * self.n_points + s) * self.n_years + (year - self.first_year) as usize) * self.season_length
    }

    /// The season of one (replicate, point, study year), indexed by `l - 1`.
    pub fn series(&self, b: usize, s: usize, year: u32) -> &[T] {
        let o = self.offset(b, s, year);
        &self.data[o..o + self.season_length]
    }

    pub fn get(&self, b: usize, s: usize, year: u32, day: u32) -> T {
        self.series(b, s, year)[day as usize - 1]
    }

    pub fn replicate(&self, b: usize) -> &[T] {
        let len = self.n_points * self.n_years * self.season_length;
        &self.data[b * len..(b + 1) * len]
    }

    pub fn convert<U: Scalar>(&self) -> Ensemble<U> {
        Ensemble {
            n_replicates: self.n_replicates,
            n_points: self.n_points,
            first_year: self.first_year,
            n_years: self.n_years,
            season_length: self.season_length,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
            seed: self.seed,
            store_hash: self.store_hash,
        }
    }

    /// Binary form: header, then one chunk of `f32` values per replicate.
    ///
    /// ```text
    /// magic "EXLENS\0\0" | version u32 | B u64 | n_grid u64 | n_years u64
    /// | season_length u64 | first_year u32 | seed u64 | store hash [u8; 32]
    /// | B chunks of n_grid*n_years*season_length f32 in [s][t][l] order
    /// ```
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(ENSEMBLE_MAGIC)?;
        w.write_all(&ENSEMBLE_VERSION.to_le_bytes())?;
        for v in [self.n_replicates, self.n_points, self.n_years, self.season_length] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        w.write_all(&self.first_year.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.store_hash)?;
        let mut buf = Vec::new();
        for b in 0..self.n_replicates {
            buf.clear();
            for v in self.replicate(b) {
                buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != ENSEMBLE_MAGIC {
            return Err(Error::Format("not an ensemble file".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != ENSEMBLE_VERSION {
            return Err(Error::Format(format!("unsupported ensemble version {version}")));
        }
        let mut dims = [0usize; 4];
        let mut b8 = [0u8; 8];
        for d in dims.iter_mut() {
            r.read_exact(&mut b8)?;
            *d = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| Error::Format("count overflow".into()))?;
        }
        r.read_exact(&mut b4)?;
        let first_year = u32::from_le_bytes(b4);
        r.read_exact(&mut b8)?;
        let seed = u64::from_le_bytes(b8);
        let mut store_hash = [0u8; 32];
        r.read_exact(&mut store_hash)?;
        let [n_rep, n_points, n_years, season_length] = dims;
        let total = n_rep
            .checked_mul(n_points)
            .and_then(|x| x.checked_mul(n_years))
            .and_then(|x| x.checked_mul(season_length))
            .ok_or_else(|| Error::Format("ensemble dimensions overflow".into()))?;
        let mut raw = vec![0u8; total * 4];
        r.read_exact(&mut raw)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after ensemble data".into()));
        }
        let data = raw.chunks_exact(4).map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)).collect();
        let mut e = Self::new(n_rep, n_points, first_year, n_years, season_length, data)?;
        e.seed = seed;
        e.store_hash = store_hash;
        Ok(e)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        self.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Spatial fields of one posterior draw at the grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFields {
    pub beta0: Vec<f64>,
    pub alpha: Vec<f64>,
    pub rho: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// First study year of `eta` and `psi`.
    pub first_year: u32,
    /// `eta[t - first_year][s]`.
    pub eta: Vec<Vec<f64>>,
    pub psi: Vec<f64>,
}

/// Kriging weights from stations to a grid, reusable across draws.
#[derive(Debug, Clone)]
pub struct GridPlan {
    kriging: KrigingPlan<f64>,
    /// Station index for grid points that coincide with a station.
    coincident: Vec<Option<usize>>,
    elev: Vec<f64>,
}

impl GridPlan {
    pub fn new(spec: &ModelSpec, grid_sites: &[Site]) -> Result<Self> {
        let kriging = KrigingPlan::new(&spec.projection, &spec.sites, grid_sites, spec.decay)?;
        let coincident = grid_sites
            .iter()
            .map(|g| spec.sites.iter().position(|s| spec.projection.distance_km(s, g) < COINCIDENT_KM))
            .collect();
        Ok(GridPlan { kriging, coincident, elev: grid_sites.iter().map(|s| s.elev).collect() })
    }

    pub fn n_points(&self) -> usize {
        self.elev.len()
    }
}

fn check_years(spec: &ModelSpec, first_year: u32, n_years: usize) -> Result<()> {
    if first_year == 0 || n_years == 0 || first_year as usize + n_years - 1 > spec.n_years {
        return Err(Error::Config(format!(
            "generation years {}..{} must lie inside the fitted years 1..{}",
            first_year,
            first_year as usize + n_years.max(1) - 1,
            spec.n_years
        )));
    }
    Ok(())
}

/// Samples one draw's fields at the grid points.
///
/// `β0(·)`, `α(·)`, `Z_ρ(·)` and `Z_σ(·)` come from their GP conditionals
/// given the station values. The local yearly intercepts are independent
/// across sites, so a grid point on a station takes the station's value and
/// any other point gets a fresh `N(0, σ²_η)` draw.
pub fn krige_fields<R: Rng + ?Sized>(
    plan: &GridPlan,
    draw: &ModelParameters,
    first_year: u32,
    n_years: usize,
    rng: &mut R,
) -> Result<GridFields> {
    let mut field = |obs: &[f64], mean: f64, var: f64| {
        let v = plan.kriging.sample(obs, mean, var, rng);
        if var == 0.0 {
            vec![mean; v.len()]
        } else {
            v
        }
    };
    let beta0 = field(&draw.beta0_field, 0.0, draw.var_beta0);
    let alpha = field(&draw.alpha_field, 0.0, draw.var_alpha);
    let z_rho = field(&draw.z_rho_field, draw.z_rho_mean, draw.var_z_rho);
    let z_sigma = field(&draw.z_sigma_field, draw.z_sigma_mean, draw.var_z_sigma);
    let sd_eta = draw.var_eta.max(0.0).sqrt();
    let eta = (0..n_years as u32)
        .map(|k| {
            let year = first_year + k;
            plan.coincident
                .iter()
                .map(|c| {
                    let z: f64 = rng.sample(StandardNormal);
                    match c {
                        Some(i) => draw.eta_at(year, *i),
                        None => sd_eta * z,
                    }
                })
                .collect()
        })
        .collect();
    let fields = GridFields {
        beta0,
        alpha,
        rho: z_rho.into_iter().map(rho_from_z).collect(),
        sigma2: z_sigma.into_iter().map(sigma2_from_z).collect(),
        first_year,
        eta,
        psi: (0..n_years).map(|k| draw.psi[first_year as usize - 1 + k]).collect(),
    };
    let bad = fields
        .rho
        .iter()
        .any(|r| !(r.abs() < 1.0))
        || fields.sigma2.iter().any(|s| !(*s >= 0.0) || !s.is_finite())
        || fields.beta0.iter().chain(&fields.alpha).any(|v| !v.is_finite());
    if bad {
        return Err(Error::NonFinite { block: "grid fields".into(), detail: "kriged field out of range".into() });
    }
    Ok(fields)
}

/// Runs the AR(1) recursion for one point: day 1 from the stationary
/// marginal, later days with innovation variance `sigma2`.
fn simulate_point<T: Scalar, R: Rng + ?Sized>(
    rho: f64,
    sigma2: f64,
    n_years: usize,
    season_length: usize,
    mean: impl Fn(usize, usize) -> f64,
    rng: &mut R,
    out: &mut Vec<T>,
) {
    let sd = sigma2.max(0.0).sqrt();
    let sd0 = if sigma2 > 0.0 { (sigma2 / (1.0 - rho * rho)).sqrt() } else { 0.0 };
    for t in 0..n_years {
        let mut a = 0.0;
        for l in 0..season_length {
            let z: f64 = rng.sample(StandardNormal);
            a = if l == 0 { sd0 * z } else { rho * a + sd * z };
            out.push(T::of(mean(t, l) + a));
        }
    }
}

/// Daily series `[s][t][l]` at the grid points for one draw and its fields.
pub fn simulate_replicate<T: Scalar, R: Rng + ?Sized>(
    spec: &ModelSpec,
    plan: &GridPlan,
    fields: &GridFields,
    draw: &ModelParameters,
    rng: &mut R,
) -> Vec<T> {
    let n_years = fields.psi.len();
    let len = spec.season_length();
    let harmonics: Vec<(f64, f64)> = (1..=len as u32).map(|l| spec.harmonic(l)).collect();
    let mut out = Vec::with_capacity(plan.n_points() * n_years * len);
    for s in 0..plan.n_points() {
        let mean = |t: usize, l: usize| {
            let tc = spec.centred_year(fields.first_year + t as u32);
            let (sn, cs) = harmonics[l];
            draw.beta0
                + draw.alpha * tc
                + draw.beta1 * sn
                + draw.beta2 * cs
                + draw.beta3 * plan.elev[s]
                + fields.beta0[s]
                + fields.alpha[s] * tc
                + fields.psi[t]
                + fields.eta[t][s]
        };
        simulate_point(fields.rho[s], fields.sigma2[s], n_years, len, mean, rng, &mut out);
    }
    out
}

/// Index of the draw used by replicate `b` (0-based) of `n_replicates`:
/// evenly spaced over the store.
pub fn draw_index(b: usize, n_replicates: usize, n_draws: usize) -> usize {
    (b * n_draws) / n_replicates
}

/// One replicate: fields then series, on substream `(seed, b + 1)`.
pub fn generate_replicate<T: Scalar>(
    store: &PosteriorStore,
    plan: &GridPlan,
    first_year: u32,
    n_years: usize,
    n_replicates: usize,
    seed: u64,
    b: usize,
) -> Result<Vec<T>> {
    let draw = &store.draws()[draw_index(b, n_replicates, store.len())];
    let mut rng = substream(seed, GEN_REPLICATE, b as u64 + 1);
    let fields = krige_fields(plan, draw, first_year, n_years, &mut rng)?;
    Ok(simulate_replicate(store.spec(), plan, &fields, draw, &mut rng))
}

/// `B` replicates over study years `first_year .. first_year + n_years`.
///
/// Draws are spaced evenly over the store; when `B` exceeds the number of
/// draws some draws serve several replicates. Output is independent of the
/// number of worker threads.
pub fn generate_ensemble<T: Scalar>(
    store: &PosteriorStore,
    grid: &GridSpec,
    first_year: u32,
    n_years: usize,
    n_replicates: usize,
    seed: u64,
) -> Result<Ensemble<T>> {
    if store.is_empty() {
        return Err(Error::InvalidInput("posterior store is empty".into()));
    }
    if n_replicates == 0 {
        return Err(Error::Config("number of replicates must be at least 1".into()));
    }
    check_years(store.spec(), first_year, n_years)?;
    let plan = GridPlan::new(store.spec(), &grid.sites())?;
    let chunks: Vec<Vec<T>> = (0..n_replicates)
        .into_par_iter()
        .map(|b| generate_replicate(store, &plan, first_year, n_years, n_replicates, seed, b))
        .collect::<Result<_>>()?;
    let data = chunks.into_iter().flatten().collect();
    let mut e = Ensemble::new(n_replicates, grid.len(), first_year, n_years, store.spec().season_length(), data)?;
    e.seed = seed;
    e.store_hash = store.content_hash()?;
    Ok(e)
}

/// Fixed effects and hyperparameters from which a full synthetic parameter
/// set is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruthConfig {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub alpha: f64,
    pub z_rho_mean: f64,
    pub z_sigma_mean: f64,
    pub var_beta0: f64,
    pub var_alpha: f64,
    pub var_psi: f64,
    pub var_eta: f64,
    pub var_z_rho: f64,
    pub var_z_sigma: f64,
}

impl Default for TruthConfig {
    fn default() -> Self {
        TruthConfig {
            beta0: 28.0,
            beta1: -2.0,
            beta2: -6.0,
            beta3: -0.0065,
            alpha: 0.03,
            z_rho_mean: crate::gp::z_from_rho(0.7),
            z_sigma_mean: 4.0f64.ln(),
            var_beta0: 0.5,
            var_alpha: 1e-4,
            var_psi: 0.5,
            var_eta: 0.2,
            var_z_rho: 0.05,
            var_z_sigma: 0.05,
        }
    }
}

impl TruthConfig {
    /// Samples station-level fields and year effects from the configured
    /// hyperparameters (zero variance pins a component to its mean).
    pub fn draw_parameters<R: Rng + ?Sized>(&self, spec: &ModelSpec, rng: &mut R) -> Result<ModelParameters> {
        let n = spec.n_sites();
        let corr = spec.correlation();
        let mut field = |mean: f64, var: f64| -> Result<Vec<f64>> {
            let cov = crate::linalg::Matrix::from_fn(n, n, |i, j| var * corr[(i, j)]);
            mvn_sample(&vec![mean; n], &cov, rng)
        };
        let mut p = ModelParameters::zeros(n, spec.n_years);
        p.beta0_field = field(0.0, self.var_beta0)?;
        p.alpha_field = field(0.0, self.var_alpha)?;
        p.z_rho_field = field(self.z_rho_mean, self.var_z_rho)?;
        p.z_sigma_field = field(self.z_sigma_mean, self.var_z_sigma)?;
        for t in 1..spec.n_years {
            let z: f64 = rng.sample(StandardNormal);
            p.psi[t] = self.var_psi.sqrt() * z;
        }
        for e in p.eta.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *e = self.var_eta.sqrt() * z;
        }
        p.beta0 = self.beta0;
        p.beta1 = self.beta1;
        p.beta2 = self.beta2;
        p.beta3 = self.beta3;
        p.alpha = self.alpha;
        p.z_rho_mean = self.z_rho_mean;
        p.z_sigma_mean = self.z_sigma_mean;
        // zero variances are legal for a truth but not for a draw; keep them
        // strictly positive so the result validates
        let floor = |v: f64| v.max(f64::MIN_POSITIVE);
        p.var_beta0 = floor(self.var_beta0);
        p.var_alpha = floor(self.var_alpha);
        p.var_psi = floor(self.var_psi);
        p.var_eta = floor(self.var_eta);
        p.var_z_rho = floor(self.var_z_rho);
        p.var_z_sigma = floor(self.var_z_sigma);
        Ok(p)
    }
}

/// Station series simulated from known parameters, with the parameters that
/// generated them.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub spec: ModelSpec,
    pub truth: ModelParameters,
    pub stations: Vec<StationSeries>,
}

/// Station series from fully specified station-level parameters, generated
/// by the model recursion itself.
pub fn simulate_stations<R: Rng + ?Sized>(
    spec: &ModelSpec,
    truth: &ModelParameters,
    rng: &mut R,
) -> Result<Vec<StationSeries>> {
    if truth.n_sites() != spec.n_sites() || truth.n_years() != spec.n_years {
        return Err(Error::InvalidInput("parameters do not match the station layout".into()));
    }
    if (0..spec.n_sites()).any(|i| !(truth.rho(i).abs() < 1.0) || !(truth.sigma2(i) >= 0.0)) {
        return Err(Error::InvalidInput("autocorrelation must lie in (-1, 1) and variance be nonnegative".into()));
    }
    let len = spec.season_length();
    let harmonics: Vec<(f64, f64)> = (1..=len as u32).map(|l| spec.harmonic(l)).collect();
    spec.sites
        .iter()
        .enumerate()
        .map(|(i, site)| {
            let mean = |t: usize, l: usize| {
                let year = t as u32 + 1;
                let tc = spec.centred_year(year);
                let (sn, cs) = harmonics[l];
                truth.beta0
                    + truth.alpha * tc
                    + truth.beta1 * sn
                    + truth.beta2 * cs
                    + truth.beta3 * site.elev
                    + truth.beta0_field[i]
                    + truth.alpha_field[i] * tc
                    + truth.psi[t]
                    + truth.eta_at(year, i)
            };
            let mut vals: Vec<f64> = Vec::with_capacity(spec.n_years * len);
            simulate_point(truth.rho(i), truth.sigma2(i), spec.n_years, len, mean, rng, &mut vals);
            StationSeries::from_values(site.clone(), spec.n_years, len, vals.into_iter().map(Some).collect())
        })
        .collect()
}

/// Draws station-level parameters from `config` and simulates station data
/// from them. Parameters use substream `(seed, 0)` and data `(seed, 1)` of
/// the `simulate` stream.
pub fn simulate_synthetic_truth(
    config: &TruthConfig,
    sites: Vec<Site>,
    season: SeasonConfig,
    n_years: usize,
    seed: u64,
) -> Result<SyntheticData> {
    let spec = ModelSpec::new(sites, season, n_years)?;
    let truth = config.draw_parameters(&spec, &mut substream(seed, SIMULATE, 0))?;
    let stations = simulate_stations(&spec, &truth, &mut substream(seed, SIMULATE, 1))?;
    Ok(SyntheticData { spec, truth, stations })
}
