//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use extentlab::domain::{GridPoint, GridSpec, SeasonConfig, Site, StationSeries};
use extentlab::gp::{z_from_rho, z_from_sigma2};
use extentlab::model::{ModelParameters, ModelSpec};

/// Irregular but reproducible layout over roughly 200 x 150 km.
pub fn sites(n: usize) -> Vec<Site> {
    (0..n)
        .map(|i| {
            let a = i as f64;
            Site::new(
                format!("st{i:02}"),
                -1.5 + (a * 0.618_034).fract() * 2.4,
                40.6 + (a * 0.414_214).fract() * 1.4,
                150.0 + 170.0 * a,
            )
            .unwrap()
        })
        .collect()
}

pub fn grid_from_sites(sites: &[Site], area: f64) -> GridSpec {
    GridSpec::new(
        sites
            .iter()
            .map(|s| GridPoint { site: s.clone(), cell_area: area, regions: vec![] })
            .collect(),
    )
    .unwrap()
}

/// Regular `nx` x `ny` lattice covering the span of the layout.
pub fn lattice(nx: usize, ny: usize) -> GridSpec {
    let mut pts = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            let lon = -1.4 + 2.2 * i as f64 / (nx.max(2) - 1) as f64;
            let lat = 40.7 + 1.2 * j as f64 / (ny.max(2) - 1) as f64;
            let region = if lon < -0.3 { "west" } else { "east" };
            pts.push(GridPoint {
                site: Site::new(format!("g{i}_{j}"), lon, lat, 300.0 + 100.0 * j as f64).unwrap(),
                cell_area: if (i + j) % 3 == 0 { 1.0 } else { 16.0 },
                regions: vec![region.to_string()],
            });
        }
    }
    GridSpec::new(pts).unwrap()
}

/// Small fully observed data set with a plausible parameter state.
pub fn block_fixture(n_years: usize, length: u32) -> (ModelSpec, Vec<StationSeries>, ModelParameters) {
    let season = SeasonConfig { length, ..SeasonConfig::default() };
    let s = sites(3);
    let spec = ModelSpec::new(s.clone(), season, n_years).unwrap();
    let mut p = ModelParameters::zeros(3, n_years);
    p.beta0 = 26.0;
    p.beta1 = -1.0;
    p.beta2 = -5.0;
    p.beta3 = -0.004;
    p.alpha = 0.05;
    p.beta0_field = vec![0.4, -0.3, 0.1];
    p.alpha_field = vec![0.02, -0.01, 0.0];
    for t in 1..n_years {
        p.psi[t] = 0.3 * (t as f64 * 1.7).sin();
    }
    for (k, e) in p.eta.iter_mut().enumerate() {
        *e = 0.2 * (k as f64 * 2.3).cos();
    }
    p.z_rho_field = vec![z_from_rho(0.7), z_from_rho(0.6), z_from_rho(0.8)];
    p.z_sigma_field = vec![z_from_sigma2(3.0), z_from_sigma2(2.0), z_from_sigma2(4.0)];
    p.z_rho_mean = z_from_rho(0.7);
    p.z_sigma_mean = 1.0;
    p.var_beta0 = 0.5;
    p.var_alpha = 0.01;
    p.var_psi = 0.4;
    p.var_eta = 0.3;
    p.var_z_rho = 0.2;
    p.var_z_sigma = 0.3;
    let stations = s
        .iter()
        .enumerate()
        .map(|(i, site)| {
            let vals = (0..n_years * length as usize)
                .map(|k| Some(24.0 + 3.0 * ((k * 7 + i * 5) as f64 * 0.37).sin() + 0.1 * k as f64 / length as f64))
                .collect();
            StationSeries::from_values(site.clone(), n_years, length as usize, vals).unwrap()
        })
        .collect();
    (spec, stations, p)
}

pub type Dense = Vec<Vec<f64>>;

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, piv);
        let d = m[c][c];
        assert!(d.abs() > 1e-300, "singular matrix in oracle");
        for v in m[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    let pivot_row = m[c].clone();
                    for (v, pv) in m[r].iter_mut().zip(pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn mat_vec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn quad(a: &Dense, x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(mat_vec(a, y)).map(|(p, q)| p * q).sum()
}

/// Station correlation `exp(-decay * d)` computed from projected coordinates.
pub fn correlation(spec: &ModelSpec) -> Dense {
    let n = spec.n_sites();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (-spec.decay * spec.projection.distance_km(&spec.sites[i], &spec.sites[j])).exp())
                .collect()
        })
        .collect()
}

/// Stationary AR(1) covariance of `n` consecutive days plus a shared
/// yearly level with variance `shared`.
pub fn season_cov(rho: f64, sigma2: f64, shared: f64, n: usize) -> Dense {
    let v = sigma2 / (1.0 - rho * rho);
    (0..n)
        .map(|i| (0..n).map(|j| v * rho.powi((i as i32 - j as i32).abs()) + shared).collect())
        .collect()
}

/// Mean and variance of a sample (variance with divisor n - 1).
pub fn moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// True if the sample mean and variance of iid normal-ish draws agree with
/// `(mean, var)` within `k` Monte Carlo standard errors.
pub fn moments_match(x: &[f64], mean: f64, var: f64, k: f64) -> (bool, String) {
    let n = x.len() as f64;
    let (m, v) = moments(x);
    let se_m = (var / n).sqrt();
    let se_v = var * (2.0 / (n - 1.0)).sqrt();
    let zm = (m - mean) / se_m;
    let zv = (v - var) / se_v;
    (zm.abs() <= k && zv.abs() <= k, format!("mean z {zm:+.2}, var z {zv:+.2}"))
}

pub fn lag1_autocorrelation(x: &[f64]) -> f64 {
    let (m, _) = moments(x);
    let num: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    let den: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    num / den
}

/// Full conditional of `[β0, β1, β2, β3, α, β0(·), α(·), ψ[2..]]` given
/// `ρ`, `σ²` and the variances, with `η` integrated out, computed from the
/// dense Gaussian form of each fully observed (station, year) season.
pub fn mean_block_oracle(
    spec: &ModelSpec,
    stations: &[StationSeries],
    p: &ModelParameters,
    fixed_sd: f64,
) -> (Vec<f64>, Dense) {
    let n = spec.n_sites();
    let ny = spec.n_years;
    let len = spec.season_length();
    let dim = 5 + 2 * n + ny - 1;
    let mut prec = vec![vec![0.0; dim]; dim];
    let mut lin = vec![0.0; dim];
    for (i, st) in stations.iter().enumerate() {
        let cov = season_cov(p.rho(i), p.sigma2(i), p.var_eta, len);
        let ci = inverse(&cov);
        for t in 1..=ny as u32 {
            let tc = t as f64 - (ny as f64 + 1.0) / 2.0;
            let rows: Vec<Vec<f64>> = (1..=len as u32)
                .map(|l| {
                    let doy = spec.season.day_of_year(l) as f64;
                    let a = 2.0 * std::f64::consts::PI * doy / 365.0;
                    let mut x = vec![0.0; dim];
                    x[0] = 1.0;
                    x[1] = a.sin();
                    x[2] = a.cos();
                    x[3] = spec.sites[i].elev;
                    x[4] = tc;
                    x[5 + i] = 1.0;
                    x[5 + n + i] = tc;
                    if t >= 2 {
                        x[5 + 2 * n + t as usize - 2] = 1.0;
                    }
                    x
                })
                .collect();
            let y: Vec<f64> = (1..=len as u32).map(|l| st.get(t, l).unwrap()).collect();
            for a in 0..dim {
                let col_a: Vec<f64> = rows.iter().map(|r| r[a]).collect();
                if col_a.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let cia = mat_vec(&ci, &col_a);
                lin[a] += cia.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>();
                for b in 0..dim {
                    prec[a][b] += rows.iter().zip(&cia).map(|(r, c)| r[b] * c).sum::<f64>();
                }
            }
        }
    }
    for k in 0..5 {
        prec[k][k] += 1.0 / (fixed_sd * fixed_sd);
    }
    let rinv = inverse(&correlation(spec));
    for a in 0..n {
        for b in 0..n {
            prec[5 + a][5 + b] += rinv[a][b] / p.var_beta0;
            prec[5 + n + a][5 + n + b] += rinv[a][b] / p.var_alpha;
        }
    }
    for t in 0..ny - 1 {
        prec[5 + 2 * n + t][5 + 2 * n + t] += 1.0 / p.var_psi;
    }
    let cov = inverse(&prec);
    (mat_vec(&cov, &lin), cov)
}

/// Full conditional `N(mean, var)` of `η[t](s_i)` from the dense season covariance.
pub fn eta_oracle(spec: &ModelSpec, st: &StationSeries, p: &ModelParameters, i: usize, t: u32) -> (f64, f64) {
    let len = spec.season_length();
    let ci = inverse(&season_cov(p.rho(i), p.sigma2(i), 0.0, len));
    let tc = t as f64 - (spec.n_years as f64 + 1.0) / 2.0;
    let r: Vec<f64> = (1..=len as u32)
        .map(|l| {
            let a = 2.0 * std::f64::consts::PI * spec.season.day_of_year(l) as f64 / 365.0;
            let m = p.beta0
                + p.alpha * tc
                + p.beta1 * a.sin()
                + p.beta2 * a.cos()
                + p.beta3 * spec.sites[i].elev
                + p.beta0_field[i]
                + p.alpha_field[i] * tc
                + p.psi[t as usize - 1];
            st.get(t, l).unwrap() - m
        })
        .collect();
    let ones = vec![1.0; len];
    let prec = quad(&ci, &ones, &ones) + 1.0 / p.var_eta;
    (quad(&ci, &ones, &r) / prec, 1.0 / prec)
}

/// Gamma `(shape, rate)` full conditionals of the six precisions
/// `1/σ²` in the order β0, α, ψ, η, Z_ρ, Z_σ.
pub fn precision_oracle(spec: &ModelSpec, p: &ModelParameters, a: f64, b: f64) -> [(f64, f64); 6] {
    let rinv = inverse(&correlation(spec));
    let n = spec.n_sites() as f64;
    let centred = |v: &[f64], m: f64| v.iter().map(|x| x - m).collect::<Vec<_>>();
    let qf = |v: Vec<f64>| quad(&rinv, &v, &v);
    let ss_psi: f64 = p.psi[1..].iter().map(|x| x * x).sum();
    let ss_eta: f64 = p.eta.iter().map(|x| x * x).sum();
    [
        (a + n / 2.0, b + qf(p.beta0_field.clone()) / 2.0),
        (a + n / 2.0, b + qf(p.alpha_field.clone()) / 2.0),
        (a + (p.psi.len() - 1) as f64 / 2.0, b + ss_psi / 2.0),
        (a + p.eta.len() as f64 / 2.0, b + ss_eta / 2.0),
        (a + n / 2.0, b + qf(centred(&p.z_rho_field, p.z_rho_mean)) / 2.0),
        (a + n / 2.0, b + qf(centred(&p.z_sigma_field, p.z_sigma_mean)) / 2.0),
    ]
}

/// Normal full conditional of a GP field mean.
pub fn field_mean_oracle(spec: &ModelSpec, field: &[f64], var: f64, prior_sd: f64) -> (f64, f64) {
    let rinv = inverse(&correlation(spec));
    let ones = vec![1.0; field.len()];
    let prec = quad(&rinv, &ones, &ones) / var + 1.0 / (prior_sd * prior_sd);
    (quad(&rinv, &ones, field) / var / prec, 1.0 / prec)
}

/// Log of the unnormalized full conditional of `Z_ρ(s_i)` computed from the
/// full likelihood and the dense GP prior.
pub fn z_rho_log_target(
    spec: &ModelSpec,
    stations: &[StationSeries],
    p: &ModelParameters,
    i: usize,
    z: f64,
) -> f64 {
    let mut q = p.clone();
    q.z_rho_field[i] = z;
    let rinv = inverse(&correlation(spec));
    let c: Vec<f64> = q.z_rho_field.iter().map(|v| v - q.z_rho_mean).collect();
    extentlab::model::log_likelihood(spec, &q, stations) - 0.5 * quad(&rinv, &c, &c) / q.var_z_rho
}

/// Store holding the given draws as one chain.
pub fn store_from(spec: &ModelSpec, draws: Vec<ModelParameters>) -> extentlab::model::PosteriorStore {
    use extentlab::model::{FitManifest, McmcConfig, PosteriorStore, PriorConfig};
    let manifest = FitManifest {
        priors: PriorConfig::default(),
        mcmc: McmcConfig::default(),
        data_hash: String::new(),
        acceptance: vec![],
        notes: vec![],
    };
    PosteriorStore::new(spec.clone(), vec![draws], manifest).unwrap()
}

/// Kriging mean at `target` from field values at the spec's stations,
/// by a dense solve of the station correlation system.
pub fn kriged_mean(spec: &ModelSpec, target: &Site, values: &[f64], mean: f64) -> f64 {
    let r_inv = inverse(&correlation(spec));
    let r21: Vec<f64> =
        spec.sites.iter().map(|s| (-spec.decay * spec.projection.distance_km(s, target)).exp()).collect();
    let resid: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let w = mat_vec(&r_inv, &resid);
    mean + r21.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
}
