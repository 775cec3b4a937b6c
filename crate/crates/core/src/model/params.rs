use serde::{Deserialize, Serialize};

use crate::domain::{SeasonConfig, Site, StationSeries};
use crate::error::{Error, Result};
use crate::gp::{self, DistanceMatrix, GpSpec, Projection};
use crate::linalg::Matrix;

/// Everything about a fit that is fixed before sampling: station sites,
/// calendar, number of years, time centring, projection and GP decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub sites: Vec<Site>,
    pub season: SeasonConfig,
    pub n_years: usize,
    /// Study year subtracted from `t` before it multiplies `α` and `α(s)`.
    pub time_center: f64,
    pub projection: Projection,
    /// Decay shared by all four GPs, 1/km.
    pub decay: f64,
}

impl ModelSpec {
    pub fn new(sites: Vec<Site>, season: SeasonConfig, n_years: usize) -> Result<Self> {
        season.validate()?;
        if sites.len() < 2 {
            return Err(Error::InvalidInput("model needs at least two stations".into()));
        }
        if n_years < 2 {
            return Err(Error::InvalidInput("model needs at least two years".into()));
        }
        let projection = Projection::centred_on(&sites);
        let dist = DistanceMatrix::<f64>::from_sites(&projection, &sites);
        let decay = gp::decay_from_dmax(&dist)?;
        Ok(ModelSpec { sites, season, n_years, time_center: (n_years as f64 + 1.0) / 2.0, projection, decay })
    }

    pub fn from_stations(stations: &[StationSeries], season: SeasonConfig) -> Result<Self> {
        let n_years = stations.first().map(|s| s.n_years()).unwrap_or(0);
        for s in stations {
            if s.n_years() != n_years || s.season_length() != season.length as usize {
                return Err(Error::InvalidInput(format!(
                    "station `{}` has shape {}x{}, expected {}x{}",
                    s.site.id,
                    s.n_years(),
                    s.season_length(),
                    n_years,
                    season.length
                )));
            }
        }
        Self::new(stations.iter().map(|s| s.site.clone()).collect(), season, n_years)
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn season_length(&self) -> usize {
        self.season.length as usize
    }

    pub fn centred_year(&self, year: u32) -> f64 {
        year as f64 - self.time_center
    }

    /// `(sin, cos)` of the seasonal harmonic at day of year `doy`.
    pub fn harmonic_at(doy: f64) -> (f64, f64) {
        let a = 2.0 * std::f64::consts::PI * doy / 365.0;
        (a.sin(), a.cos())
    }

    pub fn harmonic(&self, day: u32) -> (f64, f64) {
        Self::harmonic_at(self.season.day_of_year(day) as f64)
    }

    /// Station correlation matrix `exp(-decay · d)`.
    pub fn correlation(&self) -> Matrix<f64> {
        let d = DistanceMatrix::<f64>::from_sites(&self.projection, &self.sites);
        gp::exp_cov(d.matrix(), &GpSpec { mean: 0.0, variance: 1.0, decay: self.decay })
    }
}

/// One joint draw of every unknown in the model.
///
/// Year-indexed vectors are 0-based (`psi[0]` is year 1); `eta` is stored
/// year-major, `eta[(t-1) * n_sites + i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub alpha: f64,
    pub beta0_field: Vec<f64>,
    pub alpha_field: Vec<f64>,
    pub psi: Vec<f64>,
    pub eta: Vec<f64>,
    pub z_rho_field: Vec<f64>,
    pub z_sigma_field: Vec<f64>,
    pub z_rho_mean: f64,
    pub z_sigma_mean: f64,
    pub var_beta0: f64,
    pub var_alpha: f64,
    pub var_psi: f64,
    pub var_eta: f64,
    pub var_z_rho: f64,
    pub var_z_sigma: f64,
}

impl ModelParameters {
    /// All-zero effects, unit variances, `ρ = 0`, `σ² = 1`.
    pub fn zeros(n_sites: usize, n_years: usize) -> Self {
        ModelParameters {
            beta0: 0.0,
            beta1: 0.0,
            beta2: 0.0,
            beta3: 0.0,
            alpha: 0.0,
            beta0_field: vec![0.0; n_sites],
            alpha_field: vec![0.0; n_sites],
            psi: vec![0.0; n_years],
            eta: vec![0.0; n_years * n_sites],
            z_rho_field: vec![0.0; n_sites],
            z_sigma_field: vec![0.0; n_sites],
            z_rho_mean: 0.0,
            z_sigma_mean: 0.0,
            var_beta0: 1.0,
            var_alpha: 1.0,
            var_psi: 1.0,
            var_eta: 1.0,
            var_z_rho: 1.0,
            var_z_sigma: 1.0,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.beta0_field.len()
    }

    pub fn n_years(&self) -> usize {
        self.psi.len()
    }

    pub fn rho(&self, site: usize) -> f64 {
        gp::rho_from_z(self.z_rho_field[site])
    }

    pub fn sigma2(&self, site: usize) -> f64 {
        gp::sigma2_from_z(self.z_sigma_field[site])
    }

    pub fn eta_at(&self, year: u32, site: usize) -> f64 {
        self.eta[(year as usize - 1) * self.n_sites() + site]
    }

    pub fn eta_at_mut(&mut self, year: u32, site: usize) -> &mut f64 {
        let n = self.n_sites();
        &mut self.eta[(year as usize - 1) * n + site]
    }

    /// Global intercept expressed for uncentred time (`t = 0`).
    pub fn intercept_uncentred(&self, time_center: f64) -> f64 {
        self.beta0 - self.alpha * time_center
    }

    pub fn variances(&self) -> [(&'static str, f64); 6] {
        [
            ("var_beta0", self.var_beta0),
            ("var_alpha", self.var_alpha),
            ("var_psi", self.var_psi),
            ("var_eta", self.var_eta),
            ("var_z_rho", self.var_z_rho),
            ("var_z_sigma", self.var_z_sigma),
        ]
    }

    /// Checks the draw invariants: `ψ[1] = 0`, positive finite variances,
    /// `|ρ(s)| < 1`, finite values everywhere.
    pub fn validate(&self) -> Result<()> {
        if self.psi.first().copied().unwrap_or(0.0) != 0.0 {
            return Err(Error::InvalidInput("psi[1] must be zero".into()));
        }
        for (name, v) in self.variances() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} = {v} is not a positive variance")));
            }
        }
        for i in 0..self.n_sites() {
            let r = self.rho(i);
            if !(r.abs() < 1.0) {
                return Err(Error::InvalidInput(format!("rho at site {i} = {r} outside (-1, 1)")));
            }
        }
        if let Some((name, v)) = self.named_values().into_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("{name} = {v} is not finite")));
        }
        Ok(())
    }

    /// Scalar names in storage order.
    pub fn layout(n_sites: usize, n_years: usize) -> Vec<String> {
        let mut names: Vec<String> =
            ["beta0", "beta1", "beta2", "beta3", "alpha"].iter().map(|s| s.to_string()).collect();
        names.extend((0..n_sites).map(|i| format!("beta0_field[{i}]")));
        names.extend((0..n_sites).map(|i| format!("alpha_field[{i}]")));
        names.extend((1..=n_years).map(|t| format!("psi[{t}]")));
        for t in 1..=n_years {
            names.extend((0..n_sites).map(|i| format!("eta[{t}][{i}]")));
        }
        names.extend((0..n_sites).map(|i| format!("z_rho_field[{i}]")));
        names.extend((0..n_sites).map(|i| format!("z_sigma_field[{i}]")));
        for n in ["z_rho_mean", "z_sigma_mean", "var_beta0", "var_alpha", "var_psi", "var_eta", "var_z_rho", "var_z_sigma"] {
            names.push(n.to_string());
        }
        names
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.beta0, self.beta1, self.beta2, self.beta3, self.alpha];
        v.extend(&self.beta0_field);
        v.extend(&self.alpha_field);
        v.extend(&self.psi);
        v.extend(&self.eta);
        v.extend(&self.z_rho_field);
        v.extend(&self.z_sigma_field);
        v.extend([
            self.z_rho_mean,
            self.z_sigma_mean,
            self.var_beta0,
            self.var_alpha,
            self.var_psi,
            self.var_eta,
            self.var_z_rho,
            self.var_z_sigma,
        ]);
        v
    }

    pub fn from_slice(values: &[f64], n_sites: usize, n_years: usize) -> Result<Self> {
        let expect = Self::layout_len(n_sites, n_years);
        if values.len() != expect {
            return Err(Error::Format(format!("parameter vector has {} values, expected {expect}", values.len())));
        }
        let mut it = values.iter().copied();
        let mut take = |k: usize| -> Vec<f64> { it.by_ref().take(k).collect() };
        let head = take(5);
        let beta0_field = take(n_sites);
        let alpha_field = take(n_sites);
        let psi = take(n_years);
        let eta = take(n_years * n_sites);
        let z_rho_field = take(n_sites);
        let z_sigma_field = take(n_sites);
        let tail = take(8);
        Ok(ModelParameters {
            beta0: head[0],
            beta1: head[1],
            beta2: head[2],
            beta3: head[3],
            alpha: head[4],
            beta0_field,
            alpha_field,
            psi,
            eta,
            z_rho_field,
            z_sigma_field,
            z_rho_mean: tail[0],
            z_sigma_mean: tail[1],
            var_beta0: tail[2],
            var_alpha: tail[3],
            var_psi: tail[4],
            var_eta: tail[5],
            var_z_rho: tail[6],
            var_z_sigma: tail[7],
        })
    }

    pub fn layout_len(n_sites: usize, n_years: usize) -> usize {
        5 + 4 * n_sites + n_years + n_years * n_sites + 8
    }

    pub fn named_values(&self) -> Vec<(String, f64)> {
        Self::layout(self.n_sites(), self.n_years()).into_iter().zip(self.to_vec()).collect()
    }
}
