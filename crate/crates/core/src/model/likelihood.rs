use crate::domain::StationSeries;

use super::params::{ModelParameters, ModelSpec};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Location- and year-specific pieces of the mean surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanTerms {
    pub elev: f64,
    pub beta0_local: f64,
    pub alpha_local: f64,
    pub psi: f64,
    pub eta: f64,
    /// Study year minus the time centre.
    pub centred_year: f64,
}

impl MeanTerms {
    pub fn at_station(spec: &ModelSpec, p: &ModelParameters, site: usize, year: u32) -> Self {
        MeanTerms {
            elev: spec.sites[site].elev,
            beta0_local: p.beta0_field[site],
            alpha_local: p.alpha_field[site],
            psi: p.psi[year as usize - 1],
            eta: p.eta_at(year, site),
            centred_year: spec.centred_year(year),
        }
    }

    /// The part of the mean that is constant within a year.
    pub fn yearly_level(&self, p: &ModelParameters) -> f64 {
        p.beta0
            + p.alpha * self.centred_year
            + p.beta3 * self.elev
            + self.beta0_local
            + self.alpha_local * self.centred_year
            + self.psi
            + self.eta
    }
}

/// `m[t,l](s)` at day of year `doy`.
pub fn mean_temperature(p: &ModelParameters, terms: &MeanTerms, doy: f64) -> f64 {
    let (s, c) = ModelSpec::harmonic_at(doy);
    terms.yearly_level(p) + p.beta1 * s + p.beta2 * c
}

/// `m[t,l](s) + ρ(s) (y_prev − m[t,l−1](s))` at a station.
///
/// For `day = 1` the previous mean is evaluated one calendar day before the
/// window start.
pub fn conditional_mean(
    spec: &ModelSpec,
    p: &ModelParameters,
    site: usize,
    year: u32,
    day: u32,
    y_prev: f64,
) -> f64 {
    let terms = MeanTerms::at_station(spec, p, site, year);
    let doy = spec.season.day_of_year(day) as f64;
    let m = mean_temperature(p, &terms, doy);
    let m_prev = mean_temperature(p, &terms, doy - 1.0);
    m + p.rho(site) * (y_prev - m_prev)
}

/// Gaussian log-likelihood of all non-missing observations.
///
/// A day whose predecessor is observed contributes its AR(1) conditional
/// density; the first day of a season, and any day whose predecessor is
/// missing, contributes the stationary marginal `N(m, σ²/(1 − ρ²))`.
pub fn log_likelihood(spec: &ModelSpec, p: &ModelParameters, stations: &[StationSeries]) -> f64 {
    let mut total = 0.0;
    for (i, st) in stations.iter().enumerate() {
        let rho = p.rho(i);
        let s2 = p.sigma2(i);
        for t in 1..=st.n_years() as u32 {
            let terms = MeanTerms::at_station(spec, p, i, t);
            for l in 1..=st.season_length() as u32 {
                let Some(y) = st.get(t, l) else { continue };
                let prev = if l > 1 { st.get(t, l - 1) } else { None };
                let (mean, var) = match prev {
                    Some(yp) => (conditional_mean(spec, p, i, t, l, yp), s2),
                    None => {
                        let doy = spec.season.day_of_year(l) as f64;
                        (mean_temperature(p, &terms, doy), s2 / (1.0 - rho * rho))
                    }
                };
                total += -0.5 * (LN_2PI + var.ln()) - (y - mean).powi(2) / (2.0 * var);
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{SeasonConfig, Site};
    use crate::gp::{z_from_rho, z_from_sigma2};

    fn spec(n_sites: usize, n_years: usize, length: u32) -> ModelSpec {
        let sites = (0..n_sites)
            .map(|i| Site::new(format!("s{i}"), i as f64 * 0.3, 41.0 + i as f64 * 0.1, 100.0 * i as f64).unwrap())
            .collect();
        ModelSpec::new(sites, SeasonConfig { length, ..SeasonConfig::default() }, n_years).unwrap()
    }

    #[test]
    fn zero_parameters_give_zero_mean() {
        let s = spec(2, 2, 10);
        let p = ModelParameters::zeros(2, 2);
        assert_eq!(conditional_mean(&s, &p, 0, 1, 2, 0.0), 0.0);
    }

    #[test]
    fn constant_mean_arithmetic() {
        let s = spec(2, 2, 10);
        let mut p = ModelParameters::zeros(2, 2);
        p.beta0 = 20.0;
        p.z_rho_field = vec![z_from_rho(0.9); 2];
        let m = conditional_mean(&s, &p, 1, 2, 5, 30.0);
        assert!((m - 29.0).abs() < 1e-12);
    }

    #[test]
    fn full_draw_matches_scalar_formula() {
        let s = spec(3, 4, 20);
        let mut p = ModelParameters::zeros(3, 4);
        p.beta0 = 25.0;
        p.beta1 = -3.0;
        p.beta2 = -6.0;
        p.beta3 = -0.0065;
        p.alpha = 0.03;
        p.beta0_field = vec![0.4, -0.2, 0.1];
        p.alpha_field = vec![0.01, 0.0, -0.01];
        p.psi = vec![0.0, 0.5, -0.3, 0.2];
        p.eta = (0..12).map(|k| (k as f64 * 0.7).sin() * 0.3).collect();
        p.z_rho_field = vec![z_from_rho(0.85), z_from_rho(0.9), z_from_rho(0.7)];
        // second implementation written directly from the model equations
        let (site, t, l, y_prev) = (2usize, 3u32, 7u32, 24.0);
        let tc = t as f64 - 2.5;
        let doy = (120 + l) as f64;
        let m_of = |d: f64| {
            25.0 + 0.03 * tc
                + -3.0 * (2.0 * std::f64::consts::PI * d / 365.0).sin()
                + -6.0 * (2.0 * std::f64::consts::PI * d / 365.0).cos()
                + -0.0065 * 200.0
                + 0.1
                + -0.01 * tc
                + -0.3
                + p.eta[(t as usize - 1) * 3 + site]
        };
        let expect = m_of(doy) + 0.7 * (y_prev - m_of(doy - 1.0));
        let got = conditional_mean(&s, &p, site, t, l, y_prev);
        assert!((got - expect).abs() < 1e-10, "{got} vs {expect}");
    }

    #[test]
    fn single_observation_density() {
        let s = spec(2, 2, 3);
        let p = ModelParameters::zeros(2, 2);
        let site = s.sites[0].clone();
        let mut st = StationSeries::empty(site, 2, 3);
        st.set(1, 2, Some(0.0)).unwrap();
        let other = StationSeries::empty(s.sites[1].clone(), 2, 3);
        let ll = log_likelihood(&s, &p, &[st.clone(), other.clone()]);
        assert!((ll + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
        // two identical independent terms double it
        let mut st2 = st.clone();
        st2.set(2, 2, Some(0.0)).unwrap();
        let ll2 = log_likelihood(&s, &p, &[st2, other]);
        assert!((ll2 - 2.0 * ll).abs() < 1e-12);
    }

    fn fixture() -> (ModelSpec, ModelParameters, Vec<StationSeries>) {
        let s = spec(3, 2, 6);
        let mut p = ModelParameters::zeros(3, 2);
        p.beta0 = 22.0;
        p.beta1 = 1.5;
        p.beta3 = -0.004;
        p.psi = vec![0.0, 0.8];
        p.z_rho_field = vec![z_from_rho(0.6), z_from_rho(0.8), z_from_rho(0.3)];
        p.z_sigma_field = vec![z_from_sigma2(2.0), z_from_sigma2(3.0), z_from_sigma2(1.5)];
        let stations = s
            .sites
            .iter()
            .enumerate()
            .map(|(i, site)| {
                let vals = (0..12)
                    .map(|k| if (k + i) % 5 == 3 { None } else { Some(20.0 + ((k * 7 + i * 3) % 11) as f64 * 0.6) })
                    .collect();
                StationSeries::from_values(site.clone(), 2, 6, vals).unwrap()
            })
            .collect();
        (s, p, stations)
    }

    #[test]
    fn brute_force_enumeration() {
        let (s, p, stations) = fixture();
        let mut expect = 0.0;
        for (i, st) in stations.iter().enumerate() {
            let rho = p.rho(i);
            let s2 = p.sigma2(i);
            for t in 1..=2u32 {
                let lvl = 22.0 + -0.004 * s.sites[i].elev + p.psi[t as usize - 1];
                let m = |l: u32| lvl + 1.5 * (2.0 * std::f64::consts::PI * (120 + l) as f64 / 365.0).sin();
                for l in 1..=6u32 {
                    let Some(y) = st.get(t, l) else { continue };
                    let prev = if l > 1 { st.get(t, l - 1) } else { None };
                    let (mu, v) = match prev {
                        Some(yp) => (m(l) + rho * (yp - m(l - 1)), s2),
                        None => (m(l), s2 / (1.0 - rho * rho)),
                    };
                    let dens = (-(y - mu).powi(2) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
                    expect += dens.ln();
                }
            }
        }
        let got = log_likelihood(&s, &p, &stations);
        assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
    }

    #[test]
    fn missing_day_drops_only_its_terms() {
        let (s, p, stations) = fixture();
        // last day of year 2 at station 0 has no successor, so removing it
        // removes exactly its own term
        let mut with = stations.clone();
        with[0].set(2, 6, Some(25.0)).unwrap();
        let mut without = stations.clone();
        without[0].set(2, 6, None).unwrap();
        let ll_with = log_likelihood(&s, &p, &with);
        let ll_without = log_likelihood(&s, &p, &without);
        let own = {
            let yp = with[0].get(2, 5).unwrap();
            let mu = conditional_mean(&s, &p, 0, 2, 6, yp);
            let v = p.sigma2(0);
            -0.5 * (LN_2PI + v.ln()) - (25.0 - mu).powi(2) / (2.0 * v)
        };
        assert!((ll_with - ll_without - own).abs() < 1e-10);
    }

    #[test]
    fn unimodal_in_sigma2_around_optimum() {
        let (s, mut p, stations) = fixture();
        p.z_rho_field = vec![0.0; 3];
        // with ρ = 0 the optimum σ² per station is the mean squared residual
        let mut opt = vec![0.0; 3];
        for (i, st) in stations.iter().enumerate() {
            let mut ss = 0.0;
            let mut n = 0.0;
            for t in 1..=2u32 {
                for l in 1..=6u32 {
                    if let Some(y) = st.get(t, l) {
                        let terms = MeanTerms::at_station(&s, &p, i, t);
                        let m = mean_temperature(&p, &terms, s.season.day_of_year(l) as f64);
                        ss += (y - m).powi(2);
                        n += 1.0;
                    }
                }
            }
            opt[i] = ss / n;
        }
        p.z_sigma_field = opt.iter().map(|v| v.ln()).collect();
        let best = log_likelihood(&s, &p, &stations);
        for f in [0.5, 0.8, 1.25, 2.0] {
            let mut q = p.clone();
            q.z_sigma_field = opt.iter().map(|v| (v * f).ln()).collect();
            assert!(log_likelihood(&s, &q, &stations) < best);
        }
    }
}
