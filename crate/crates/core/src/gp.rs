//! Gaussian processes with exponential covariance: distances, covariance
//! matrices, joint draws and kriging.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::Site;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Scalar;

/// Mean Earth radius used by the planar projection, km.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Stationary GP with mean `mean` and covariance `variance · exp(-decay · d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpSpec<T> {
    pub mean: T,
    pub variance: T,
    /// Inverse range, 1/km.
    pub decay: T,
}

impl<T: Scalar> GpSpec<T> {
    /// A zero variance is accepted and describes a degenerate (constant) field.
    pub fn new(mean: T, variance: T, decay: T) -> Result<Self> {
        if !(variance >= T::zero() && variance.is_finite()) {
            return Err(Error::InvalidInput(format!("GP variance {variance} must be finite and >= 0")));
        }
        if !(decay > T::zero() && decay.is_finite()) {
            return Err(Error::InvalidInput(format!("GP decay {decay} must be finite and > 0")));
        }
        if !mean.is_finite() {
            return Err(Error::InvalidInput("GP mean must be finite".into()));
        }
        Ok(GpSpec { mean, variance, decay })
    }

    pub fn covariance(&self, distance: T) -> T {
        self.variance * (-self.decay * distance).exp()
    }
}

/// Local equirectangular projection around a reference latitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub lat0_deg: f64,
}

impl Projection {
    /// Reference latitude at the mean latitude of `sites`.
    pub fn centred_on(sites: &[Site]) -> Self {
        let lat0 = if sites.is_empty() {
            0.0
        } else {
            sites.iter().map(|s| s.lat).sum::<f64>() / sites.len() as f64
        };
        Projection { lat0_deg: lat0 }
    }

    /// Planar (x, y) in km relative to longitude 0 and latitude `lat0`.
    pub fn project(&self, site: &Site) -> (f64, f64) {
        let k = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
        let x = k * site.lon * self.lat0_deg.to_radians().cos();
        let y = k * (site.lat - self.lat0_deg);
        (x, y)
    }

    pub fn distance_km(&self, a: &Site, b: &Site) -> f64 {
        let (ax, ay) = self.project(a);
        let (bx, by) = self.project(b);
        (ax - bx).hypot(ay - by)
    }

    /// Rectangular matrix of distances from each of `rows` to each of `cols`.
    pub fn cross_distances<T: Scalar>(&self, rows: &[Site], cols: &[Site]) -> Matrix<T> {
        let pc: Vec<_> = cols.iter().map(|s| self.project(s)).collect();
        let pr: Vec<_> = rows.iter().map(|s| self.project(s)).collect();
        Matrix::from_fn(rows.len(), cols.len(), |i, j| {
            T::of((pr[i].0 - pc[j].0).hypot(pr[i].1 - pc[j].1))
        })
    }
}

/// Symmetric matrix of pairwise distances (km) with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<T> {
    inner: Matrix<T>,
}

impl<T: Scalar> DistanceMatrix<T> {
    pub fn new(m: Matrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput("distance matrix must be square".into()));
        }
        let n = m.rows();
        for i in 0..n {
            if m[(i, i)] != T::zero() {
                return Err(Error::InvalidInput("distance matrix diagonal must be zero".into()));
            }
            for j in 0..i {
                let d = m[(i, j)];
                if !(d.is_finite() && d >= T::zero()) || d != m[(j, i)] {
                    return Err(Error::InvalidInput(format!(
                        "distance ({i},{j}) must be finite, nonnegative and symmetric"
                    )));
                }
            }
        }
        Ok(DistanceMatrix { inner: m })
    }

    pub fn from_sites(projection: &Projection, sites: &[Site]) -> Self {
        let mut m: Matrix<T> = projection.cross_distances(sites, sites);
        for i in 0..sites.len() {
            m[(i, i)] = T::zero();
            for j in 0..i {
                let d = m[(i, j)];
                m[(j, i)] = d;
            }
        }
        DistanceMatrix { inner: m }
    }

    pub fn len(&self) -> usize {
        self.inner.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.rows() == 0
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.inner
    }

    pub fn max(&self) -> T {
        self.inner.as_slice().iter().copied().fold(T::zero(), T::max)
    }
}

/// Elementwise `σ² exp(-φ d)`.
pub fn exp_cov<T: Scalar>(dist: &Matrix<T>, spec: &GpSpec<T>) -> Matrix<T> {
    Matrix::from_fn(dist.rows(), dist.cols(), |i, j| spec.covariance(dist[(i, j)]))
}

/// Decay giving correlation `e^-3` at the largest pairwise distance.
pub fn decay_from_dmax<T: Scalar>(dist: &DistanceMatrix<T>) -> Result<T> {
    if dist.len() < 2 {
        return Err(Error::InvalidInput("decay needs at least two sites".into()));
    }
    let dmax = dist.max();
    if !(dmax > T::zero()) {
        return Err(Error::InvalidInput("all sites coincide; maximum distance is zero".into()));
    }
    Ok(T::of(3.0) / dmax)
}

pub fn standard_normals<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    (0..n).map(|_| T::of(rng.sample::<f64, _>(StandardNormal))).collect()
}

/// One draw from `N(mean, cov)`.
pub fn mvn_sample<T: Scalar, R: Rng + ?Sized>(mean: &[T], cov: &Matrix<T>, rng: &mut R) -> Result<Vec<T>> {
    assert_eq!(mean.len(), cov.rows(), "mean/covariance shape");
    let chol = Cholesky::with_jitter(cov, "mvn covariance")?;
    let z = standard_normals::<T, _>(mean.len(), rng);
    Ok(chol.lower_mul(&z).into_iter().zip(mean).map(|(x, &m)| x + m).collect())
}

#[derive(Debug, Clone)]
pub struct Conditional<T> {
    pub mean: Vec<T>,
    pub cov: Matrix<T>,
}

/// Distribution of the GP at `new_sites` given its values at `obs_sites`:
/// `μ* = m + C₂₁C₁₁⁻¹(y − m)`, `C* = C₂₂ − C₂₁C₁₁⁻¹C₁₂`.
pub fn krige_conditional<T: Scalar>(
    projection: &Projection,
    obs_sites: &[Site],
    obs_values: &[T],
    new_sites: &[Site],
    spec: &GpSpec<T>,
) -> Result<Conditional<T>> {
    assert_eq!(obs_sites.len(), obs_values.len(), "observation sites/values");
    let d22: Matrix<T> = projection.cross_distances(new_sites, new_sites);
    let c22 = exp_cov(&d22, spec);
    if obs_sites.is_empty() {
        return Ok(Conditional { mean: vec![spec.mean; new_sites.len()], cov: c22 });
    }
    let d11 = DistanceMatrix::<T>::from_sites(projection, obs_sites);
    let c11 = exp_cov(d11.matrix(), spec);
    let d21: Matrix<T> = projection.cross_distances(new_sites, obs_sites);
    let c21 = exp_cov(&d21, spec);
    if spec.variance == T::zero() {
        return Ok(Conditional { mean: vec![spec.mean; new_sites.len()], cov: c22 });
    }
    let chol = Cholesky::with_jitter(&c11, "observed-site covariance")?;
    let resid: Vec<T> = obs_values.iter().map(|&y| y - spec.mean).collect();
    let alpha = chol.solve(&resid);
    let mean = (0..new_sites.len())
        .map(|i| spec.mean + crate::linalg::dot(c21.row(i), &alpha))
        .collect();
    // V = L⁻¹ C₁₂, C* = C₂₂ − VᵀV
    let v: Vec<Vec<T>> = (0..new_sites.len()).map(|i| chol.solve_lower(c21.row(i))).collect();
    let m = new_sites.len();
    let mut cov = c22;
    for i in 0..m {
        for j in 0..=i {
            let c = cov[(i, j)] - crate::linalg::dot(&v[i], &v[j]);
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    Ok(Conditional { mean, cov })
}

/// Precomputed kriging from a fixed observed site set to a fixed target set
/// for a fixed decay, reusable for any mean and variance.
///
/// With correlation matrices `R`, the conditional mean is
/// `m + K (y − m)` with `K = R₂₁R₁₁⁻¹`, and the conditional covariance is
/// `σ² (R₂₂ − K R₁₂)`, so one factorization serves every posterior draw.
#[derive(Debug, Clone)]
pub struct KrigingPlan<T> {
    weights: Matrix<T>,
    cond_factor: Cholesky<T>,
}

impl<T: Scalar> KrigingPlan<T> {
    pub fn new(projection: &Projection, obs_sites: &[Site], new_sites: &[Site], decay: T) -> Result<Self> {
        let unit = GpSpec::new(T::zero(), T::one(), decay)?;
        let cond = krige_conditional(projection, obs_sites, &vec![T::zero(); obs_sites.len()], new_sites, &unit)?;
        let weights = if obs_sites.is_empty() {
            Matrix::zeros(new_sites.len(), 0)
        } else {
            let d11 = DistanceMatrix::<T>::from_sites(projection, obs_sites);
            let chol = Cholesky::with_jitter(&exp_cov(d11.matrix(), &unit), "observed-site correlation")?;
            let r21 = exp_cov(&projection.cross_distances(new_sites, obs_sites), &unit);
            let rows: Vec<T> = (0..new_sites.len()).flat_map(|i| chol.solve(r21.row(i))).collect();
            Matrix::from_rows(new_sites.len(), obs_sites.len(), rows)
        };
        // targets on top of observed sites have zero conditional variance
        let cond_factor = Cholesky::semidefinite(&cond.cov, T::of(1e-10), "conditional correlation")?;
        Ok(KrigingPlan { weights, cond_factor })
    }

    pub fn n_targets(&self) -> usize {
        self.weights.rows()
    }

    pub fn conditional_mean(&self, obs_values: &[T], mean: T) -> Vec<T> {
        let resid: Vec<T> = obs_values.iter().map(|&y| y - mean).collect();
        self.weights.matvec(&resid).into_iter().map(|x| x + mean).collect()
    }

    /// Joint draw at the targets for a GP with the given mean and variance.
    /// Consumes exactly one standard normal per target.
    pub fn sample<R: Rng + ?Sized>(&self, obs_values: &[T], mean: T, variance: T, rng: &mut R) -> Vec<T> {
        let z = standard_normals::<T, _>(self.n_targets(), rng);
        let sd = variance.max(T::zero()).sqrt();
        let noise = self.cond_factor.lower_mul(&z);
        self.conditional_mean(obs_values, mean)
            .into_iter()
            .zip(noise)
            .map(|(m, e)| m + sd * e)
            .collect()
    }
}

/// `ρ = (eᶻ − 1)/(eᶻ + 1)`, inverse of `z = log((1 + ρ)/(1 − ρ))`.
pub fn rho_from_z<T: Scalar>(z: T) -> T {
    (z / T::of(2.0)).tanh()
}

pub fn z_from_rho<T: Scalar>(rho: T) -> T {
    ((T::one() + rho) / (T::one() - rho)).ln()
}

/// `σ² = eᶻ`, inverse of `z = log σ²`.
pub fn sigma2_from_z<T: Scalar>(z: T) -> T {
    z.exp()
}

pub fn z_from_sigma2<T: Scalar>(sigma2: T) -> T {
    sigma2.ln()
}
