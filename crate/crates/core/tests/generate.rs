mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use extentlab::domain::{SeasonConfig, Site};
use extentlab::generate::{
    draw_index, generate_ensemble, krige_fields, simulate_replicate, simulate_synthetic_truth, Ensemble,
    GridFields, GridPlan, TruthConfig,
};
use extentlab::gp::{rho_from_z, sigma2_from_z, z_from_rho, z_from_sigma2};
use extentlab::model::{ModelParameters, ModelSpec};
use extentlab::rng::{substream, GEN_REPLICATE};

use common::*;

fn spec(n_years: usize, length: u32) -> ModelSpec {
    ModelSpec::new(sites(3), SeasonConfig { length, ..SeasonConfig::default() }, n_years).unwrap()
}

/// Posterior-like draws scattered around the block fixture values.
fn draws(spec: &ModelSpec, n: usize) -> Vec<ModelParameters> {
    let (_, _, base) = block_fixture(spec.n_years, spec.season.length);
    (0..n)
        .map(|k| {
            let u = (k as f64 * 0.754_877).fract() - 0.5;
            let v = (k as f64 * 0.569_840).fract() - 0.5;
            let mut p = base.clone();
            p.beta0 += 0.8 * u;
            p.alpha += 0.02 * v;
            p.beta0_field = p.beta0_field.iter().map(|x| x + 0.3 * v).collect();
            p.z_rho_field = p.z_rho_field.iter().map(|x| x + 0.2 * u).collect();
            p.z_sigma_field = p.z_sigma_field.iter().map(|x| x - 0.2 * v).collect();
            p
        })
        .collect()
}

/// Fields with every GP and yearly effect switched off.
fn flat_fields(n: usize, n_years: usize, rho: f64, sigma2: f64) -> GridFields {
    GridFields {
        beta0: vec![0.0; n],
        alpha: vec![0.0; n],
        rho: vec![rho; n],
        sigma2: vec![sigma2; n],
        first_year: 1,
        eta: vec![vec![0.0; n]; n_years],
        psi: vec![0.0; n_years],
    }
}

fn far_grid() -> extentlab::domain::GridSpec {
    lattice(3, 1)
}

#[test]
fn single_replicate_is_the_composed_substream() {
    let s = spec(4, 20);
    let store = store_from(&s, draws(&s, 7));
    let grid = far_grid();
    let ens = generate_ensemble::<f64>(&store, &grid, 2, 3, 1, 99).unwrap();
    let plan = GridPlan::new(&s, &grid.sites()).unwrap();
    let mut rng = substream(99, GEN_REPLICATE, 1);
    let draw = &store.draws()[0];
    let fields = krige_fields(&plan, draw, 2, 3, &mut rng).unwrap();
    let direct: Vec<f64> = simulate_replicate(&s, &plan, &fields, draw, &mut rng);
    assert_eq!(ens.replicate(0), &direct[..]);
    assert_eq!(ens.first_year(), 2);
}

#[test]
fn same_seed_same_bytes() {
    let s = spec(3, 15);
    let store = store_from(&s, draws(&s, 5));
    let a = generate_ensemble::<f32>(&store, &far_grid(), 1, 3, 12, 5).unwrap();
    let b = generate_ensemble::<f32>(&store, &far_grid(), 1, 3, 12, 5).unwrap();
    let c = generate_ensemble::<f32>(&store, &far_grid(), 1, 3, 12, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn thread_count_does_not_change_output() {
    let s = spec(3, 15);
    let store = store_from(&s, draws(&s, 9));
    let run = |n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap()
            .install(|| generate_ensemble::<f32>(&store, &far_grid(), 1, 3, 40, 17).unwrap())
    };
    let (mut x, mut y) = (Vec::new(), Vec::new());
    run(1).write_to(&mut x).unwrap();
    run(6).write_to(&mut y).unwrap();
    assert_eq!(x, y);
}

#[test]
fn fields_on_station_grid_reproduce_draw_values() {
    let s = spec(3, 10);
    let d = &draws(&s, 3)[2];
    let plan = GridPlan::new(&s, &s.sites).unwrap();
    let f = krige_fields(&plan, d, 1, 3, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    for i in 0..3 {
        assert!((f.beta0[i] - d.beta0_field[i]).abs() < 1e-6);
        assert!((f.alpha[i] - d.alpha_field[i]).abs() < 1e-6);
        assert!((f.rho[i] - d.rho(i)).abs() < 1e-6);
        assert!((f.sigma2[i] - d.sigma2(i)).abs() < 1e-6);
        for t in 1..=3 {
            assert_eq!(f.eta[t as usize - 1][i], d.eta_at(t, i));
        }
    }
}

#[test]
fn one_station_far_point_shrinks_by_correlation() {
    let st = vec![Site::new("a", 0.0, 41.0, 100.0).unwrap(), Site::new("b", 1.0, 41.0, 100.0).unwrap()];
    let s = ModelSpec::new(st.clone(), SeasonConfig { length: 5, ..SeasonConfig::default() }, 2).unwrap();
    // only station "a" carries signal; "b" sits at the GP mean
    let mut d = ModelParameters::zeros(2, 2);
    d.beta0_field = vec![2.0, 0.0];
    d.var_beta0 = 1.0;
    (d.var_alpha, d.var_psi, d.var_eta, d.var_z_rho, d.var_z_sigma) = (0.1, 0.1, 0.1, 0.1, 0.1);
    let target = Site::new("g", 0.0, 41.3, 100.0).unwrap();
    let expected = kriged_mean(&s, &target, &d.beta0_field, 0.0);
    let plan = GridPlan::new(&s, std::slice::from_ref(&target)).unwrap();
    let n = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let xs: Vec<f64> = (0..n).map(|_| krige_fields(&plan, &d, 1, 1, &mut rng).unwrap().beta0[0]).collect();
    let (m, v) = moments(&xs);
    assert!((m - expected).abs() < 4.0 * (v / n as f64).sqrt(), "{m} vs {expected}");
    // with the second station at the mean this is close to the 1-obs closed form
    let dist = s.projection.distance_km(&st[0], &target);
    assert!((expected - 2.0 * (-s.decay * dist).exp()).abs() < 0.25);
}

#[test]
fn zero_gp_variance_gives_constant_field() {
    let s = spec(2, 5);
    let mut d = draws(&s, 1).remove(0);
    d.var_z_rho = 0.0;
    d.z_rho_field = vec![0.1, 0.9, -0.4];
    let plan = GridPlan::new(&s, &lattice(4, 2).sites()).unwrap();
    let f = krige_fields(&plan, &d, 1, 2, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert!(f.rho.iter().all(|&r| r == rho_from_z(d.z_rho_mean)));
}

#[test]
fn replicate_mean_matches_posterior_mean_surface() {
    let s = spec(3, 12);
    let store = store_from(&s, draws(&s, 25));
    let grid = far_grid();
    let b = 500;
    let ens = generate_ensemble::<f64>(&store, &grid, 1, 3, b, 41).unwrap();
    let (year, day) = (2u32, 9u32);
    let tc = s.centred_year(year);
    let (sn, cs) = s.harmonic(day);
    for (g, pt) in grid.points().iter().enumerate() {
        // m for each replicate's draw with kriged fields at their conditional
        // means and the fresh local intercept at zero
        let resid: Vec<f64> = (0..b)
            .map(|r| {
                let d = &store.draws()[draw_index(r, b, store.len())];
                let m = d.beta0
                    + d.alpha * tc
                    + d.beta1 * sn
                    + d.beta2 * cs
                    + d.beta3 * pt.site.elev
                    + kriged_mean(&s, &pt.site, &d.beta0_field, 0.0)
                    + kriged_mean(&s, &pt.site, &d.alpha_field, 0.0) * tc
                    + d.psi[year as usize - 1];
                ens.get(r, g, year, day) - m
            })
            .collect();
        let (mean, var) = moments(&resid);
        assert!(mean.abs() < 3.0 * (var / b as f64).sqrt(), "point {g}: mean residual {mean}, var {var}");
    }
}

#[test]
fn replicates_are_uncorrelated_for_a_fixed_draw() {
    let s = spec(2, 153);
    let mut d = ModelParameters::zeros(3, 2);
    d.beta0 = 25.0;
    // spread from the fields is negligible at these variances
    (d.var_beta0, d.var_alpha, d.var_psi, d.var_eta, d.var_z_rho, d.var_z_sigma) = (1e-8, 1e-8, 1e-8, 1e-8, 1e-8, 1e-8);
    d.z_rho_mean = z_from_rho(0.5);
    d.z_rho_field = vec![d.z_rho_mean; 3];
    d.z_sigma_mean = z_from_sigma2(2.0);
    d.z_sigma_field = vec![d.z_sigma_mean; 3];
    let store = store_from(&s, vec![d]);
    let grid = far_grid();
    let b = 500;
    let ens = generate_ensemble::<f64>(&store, &grid, 1, 1, b, 12).unwrap();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for r in 0..b - 1 {
        x.extend_from_slice(ens.series(r, 0, 1));
        y.extend_from_slice(ens.series(r + 1, 0, 1));
    }
    let (mx, vx) = moments(&x);
    let (my, vy) = moments(&y);
    let cov = x.iter().zip(&y).map(|(a, c)| (a - mx) * (c - my)).sum::<f64>() / (x.len() - 1) as f64;
    let r = cov / (vx * vy).sqrt();
    assert!(r.abs() < 0.05, "cross-replicate correlation {r}");
}

fn flat_draw() -> ModelParameters {
    let mut d = ModelParameters::zeros(3, 66);
    d.beta0 = 20.0;
    d
}

/// Series at one point, 66 seasons of 153 days (just over 10⁴ days).
fn point_series(rho: f64, sigma2: f64, seed: u64) -> Vec<f64> {
    let s = spec(66, 153);
    let plan = GridPlan::new(&s, &far_grid().sites()[..1]).unwrap();
    let fields = flat_fields(1, 66, rho, sigma2);
    simulate_replicate(&s, &plan, &fields, &flat_draw(), &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Seasons of anomalies about the flat mean of 20.
fn anomalies(y: &[f64]) -> Vec<Vec<f64>> {
    y.chunks(153).map(|season| season.iter().map(|v| v - 20.0).collect()).collect()
}

/// Lag-1 autocorrelation over consecutive days within seasons.
fn within_season_lag1(a: &[Vec<f64>]) -> f64 {
    let all: Vec<f64> = a.iter().flatten().copied().collect();
    let (m, v) = moments(&all);
    let pairs: Vec<(f64, f64)> = a.iter().flat_map(|s| s.windows(2).map(|w| (w[0], w[1]))).collect();
    pairs.iter().map(|(x, y)| (x - m) * (y - m)).sum::<f64>() / pairs.len() as f64 / v
}

#[test]
fn noise_free_series_is_the_mean() {
    let y = point_series(0.8, 0.0, 1);
    assert!(y.iter().all(|&v| v == 20.0));
}

#[test]
fn white_noise_has_no_lag1_correlation() {
    let r = within_season_lag1(&anomalies(&point_series(0.0, 3.0, 2)));
    assert!(r.abs() <= 0.02, "lag-1 {r}");
}

#[test]
fn ar1_lag1_and_marginal_variance() {
    let (rho, sigma2) = (0.9, 2.0);
    let target = sigma2 / (1.0 - rho * rho);
    // pool four independent points for the variance; one 10⁴-day series
    // alone has a relative standard error near 4.5%
    let mut pooled = Vec::new();
    for seed in 0..4 {
        let a = anomalies(&point_series(rho, sigma2, 30 + seed));
        let r = within_season_lag1(&a);
        assert!((0.88..=0.92).contains(&r), "lag-1 {r}");
        pooled.extend(a.into_iter().flatten());
    }
    let (_, v) = moments(&pooled);
    assert!((v / target - 1.0).abs() < 0.05, "variance {v} vs {target}");
}

#[test]
fn synthetic_warming_shows_in_station_means() {
    let cfg = TruthConfig { alpha: 0.05, var_psi: 0.1, ..TruthConfig::default() };
    let season = SeasonConfig::default();
    let data = simulate_synthetic_truth(&cfg, sites(10), season, 50, 21).unwrap();
    let jja = season.jja_days();
    let yearly: Vec<f64> = (1..=50u32)
        .map(|t| {
            let v: Vec<f64> =
                data.stations.iter().flat_map(|st| jja.iter().filter_map(move |&l| st.get(t, l))).collect();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect();
    let tbar = 25.5;
    let ybar = yearly.iter().sum::<f64>() / 50.0;
    let sxy: f64 = yearly.iter().enumerate().map(|(k, y)| (k as f64 + 1.0 - tbar) * (y - ybar)).sum();
    let sxx: f64 = (1..=50).map(|t| (t as f64 - tbar).powi(2)).sum();
    let slope = sxy / sxx;
    assert!((0.03..=0.07).contains(&slope), "slope {slope}");
}

#[test]
fn elevation_lapse_rate_shows_in_station_means() {
    let st = vec![Site::new("low", -0.5, 41.0, 200.0).unwrap(), Site::new("high", 0.5, 41.5, 1200.0).unwrap()];
    let cfg = TruthConfig { var_beta0: 0.0, var_alpha: 0.0, var_z_sigma: 0.0, var_z_rho: 0.0, ..TruthConfig::default() };
    let data = simulate_synthetic_truth(&cfg, st, SeasonConfig::default(), 10, 4).unwrap();
    let mean = |i: usize| {
        let v: Vec<f64> = data.stations[i].values().iter().flatten().copied().collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let diff = mean(0) - mean(1);
    assert!((diff - 6.5).abs() < 0.75, "difference {diff}");
}

#[test]
fn synthetic_truth_draws_are_valid() {
    let data = simulate_synthetic_truth(&TruthConfig::default(), sites(5), SeasonConfig::default(), 4, 9).unwrap();
    data.truth.validate().unwrap();
    assert_eq!(data.truth.psi[0], 0.0);
    assert_eq!(data.stations.len(), 5);
    assert!(data.stations.iter().all(|s| s.n_years() == 4 && s.missing_count() == 0));
    for i in 0..5 {
        assert!(data.truth.rho(i).abs() < 1.0);
        assert!(sigma2_from_z(data.truth.z_sigma_field[i]) > 0.0);
    }
}

#[test]
fn ensemble_file_round_trip_and_conversion() {
    let s = spec(2, 6);
    let store = store_from(&s, draws(&s, 4));
    let e = generate_ensemble::<f64>(&store, &far_grid(), 1, 2, 3, 1).unwrap();
    let dir = std::env::temp_dir().join(format!("exl-gen-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("e.bin");
    let narrow: Ensemble<f32> = e.convert();
    narrow.save(&path).unwrap();
    let back = Ensemble::<f32>::load(&path).unwrap();
    assert_eq!(back, narrow);
    assert_eq!(back.store_hash, store.content_hash().unwrap());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn rejects_years_outside_the_fit() {
    let s = spec(3, 5);
    let store = store_from(&s, draws(&s, 2));
    assert!(generate_ensemble::<f32>(&store, &far_grid(), 2, 3, 2, 1).is_err());
    assert!(generate_ensemble::<f32>(&store, &far_grid(), 1, 3, 0, 1).is_err());
}
