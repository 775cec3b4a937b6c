//! Posterior draw storage: binary persistence and flat CSV export.
//!
//! Binary layout, little-endian throughout:
//!
//! ```text
//! magic "EXLPOST\0" | version u32 | n_chains u64 | draws_per_chain u64
//! | n_sites u64 | n_years u64 | metadata_len u64 | metadata (UTF-8 JSON)
//! | draws: n_chains * draws_per_chain * layout_len f64, chain-major
//! ```
//!
//! The metadata block holds the model spec, the parameter layout names and
//! the fit manifest.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::StationSeries;
use crate::error::{Error, Result};
use crate::numfmt::sig6;

use super::params::{ModelParameters, ModelSpec};
use super::sampler::{AcceptanceReport, McmcConfig, PriorConfig};

pub const STORE_MAGIC: &[u8; 8] = b"EXLPOST\0";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitManifest {
    pub priors: PriorConfig,
    pub mcmc: McmcConfig,
    /// SHA-256 of the station data the chains were run on.
    pub data_hash: String,
    pub acceptance: Vec<AcceptanceReport>,
    pub notes: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    spec: ModelSpec,
    layout: Vec<String>,
    manifest: FitManifest,
}

/// Thinned post-burn-in draws of every chain, in chain-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorStore {
    spec: ModelSpec,
    draws: Vec<ModelParameters>,
    n_chains: usize,
    draws_per_chain: usize,
    manifest: FitManifest,
}

impl PosteriorStore {
    pub fn new(spec: ModelSpec, chains: Vec<Vec<ModelParameters>>, manifest: FitManifest) -> Result<Self> {
        let n_chains = chains.len();
        let draws_per_chain = chains.first().map_or(0, Vec::len);
        if chains.iter().any(|c| c.len() != draws_per_chain) {
            return Err(Error::InvalidInput("chains have different lengths".into()));
        }
        let draws: Vec<ModelParameters> = chains.into_iter().flatten().collect();
        for d in &draws {
            if d.n_sites() != spec.n_sites() || d.n_years() != spec.n_years {
                return Err(Error::InvalidInput("draw shape differs from the model spec".into()));
            }
            d.validate()?;
        }
        Ok(PosteriorStore { spec, draws, n_chains, draws_per_chain, manifest })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn manifest(&self) -> &FitManifest {
        &self.manifest
    }

    pub fn draws(&self) -> &[ModelParameters] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn n_chains(&self) -> usize {
        self.n_chains
    }

    pub fn draws_per_chain(&self) -> usize {
        self.draws_per_chain
    }

    pub fn chain(&self, c: usize) -> &[ModelParameters] {
        &self.draws[c * self.draws_per_chain..(c + 1) * self.draws_per_chain]
    }

    /// Values of scalar `k` of the flat layout, one vector per chain.
    pub fn scalar_chains(&self, k: usize) -> Vec<Vec<f64>> {
        (0..self.n_chains).map(|c| self.chain(c).iter().map(|d| d.to_vec()[k]).collect()).collect()
    }

    pub fn layout(&self) -> Vec<String> {
        ModelParameters::layout(self.spec.n_sites(), self.spec.n_years)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let meta = Metadata { spec: self.spec.clone(), layout: self.layout(), manifest: self.manifest.clone() };
        let meta = serde_json::to_vec(&meta).map_err(|e| Error::Format(e.to_string()))?;
        w.write_all(STORE_MAGIC)?;
        w.write_all(&STORE_VERSION.to_le_bytes())?;
        for v in [self.n_chains, self.draws_per_chain, self.spec.n_sites(), self.spec.n_years, meta.len()] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        w.write_all(&meta)?;
        let mut buf = Vec::with_capacity(ModelParameters::layout_len(self.spec.n_sites(), self.spec.n_years) * 8);
        for d in &self.draws {
            buf.clear();
            for v in d.to_vec() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != STORE_MAGIC {
            return Err(Error::Format("not a posterior store".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != STORE_VERSION {
            return Err(Error::Format(format!("unsupported posterior store version {version}")));
        }
        let mut counts = [0usize; 5];
        for c in counts.iter_mut() {
            let mut b8 = [0u8; 8];
            r.read_exact(&mut b8)?;
            *c = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| Error::Format("count overflow".into()))?;
        }
        let [n_chains, per_chain, n_sites, n_years, meta_len] = counts;
        let mut meta = vec![0u8; meta_len];
        r.read_exact(&mut meta)?;
        let meta: Metadata = serde_json::from_slice(&meta).map_err(|e| Error::Format(e.to_string()))?;
        if meta.spec.n_sites() != n_sites || meta.spec.n_years != n_years {
            return Err(Error::Format("header counts disagree with metadata".into()));
        }
        if meta.layout != ModelParameters::layout(n_sites, n_years) {
            return Err(Error::Format("parameter layout differs from this version".into()));
        }
        let len = ModelParameters::layout_len(n_sites, n_years);
        let mut chains = Vec::with_capacity(n_chains);
        let mut raw = vec![0u8; len * 8];
        for _ in 0..n_chains {
            let mut chain = Vec::with_capacity(per_chain);
            for _ in 0..per_chain {
                r.read_exact(&mut raw)?;
                let vals: Vec<f64> =
                    raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
                chain.push(ModelParameters::from_slice(&vals, n_sites, n_years)?);
            }
            chains.push(chain);
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format("trailing bytes after posterior draws".into()));
        }
        PosteriorStore::new(meta.spec, chains, meta.manifest)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }

    /// SHA-256 of the binary serialization.
    pub fn content_hash(&self) -> Result<[u8; 32]> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(Sha256::digest(&buf).into())
    }

    /// One row per draw, one column per scalar, plus `beta0_uncentred`
    /// (the intercept with time measured from study year 0).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["chain".to_string(), "draw".to_string()];
        header.extend(self.layout());
        header.push("beta0_uncentred".into());
        writeln!(w, "{}", header.join(","))?;
        for (k, d) in self.draws.iter().enumerate() {
            let chain = k / self.draws_per_chain.max(1);
            let idx = k % self.draws_per_chain.max(1);
            let mut row = vec![chain.to_string(), idx.to_string()];
            row.extend(d.to_vec().into_iter().map(sig6));
            row.push(sig6(d.intercept_uncentred(self.spec.time_center)));
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// SHA-256 over station ids, coordinates and values (missing encoded distinctly).
pub fn data_hash(stations: &[StationSeries]) -> String {
    let mut h = Sha256::new();
    for st in stations {
        h.update((st.site.id.len() as u64).to_le_bytes());
        h.update(st.site.id.as_bytes());
        for v in [st.site.lon, st.site.lat, st.site.elev] {
            h.update(v.to_le_bytes());
        }
        h.update((st.n_years() as u64).to_le_bytes());
        h.update((st.season_length() as u64).to_le_bytes());
        for v in st.values() {
            match v {
                Some(x) => {
                    h.update([1u8]);
                    h.update(x.to_le_bytes());
                }
                None => h.update([0u8]),
            }
        }
    }
    hex(&h.finalize())
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{SeasonConfig, Site};

    fn store() -> PosteriorStore {
        let sites = vec![Site::new("a", 0.0, 41.0, 100.0).unwrap(), Site::new("b", 0.5, 41.2, 300.0).unwrap()];
        let spec = ModelSpec::new(sites, SeasonConfig::default(), 3).unwrap();
        let mk = |x: f64| {
            let mut p = ModelParameters::zeros(2, 3);
            p.beta0 = x;
            p.psi = vec![0.0, x / 3.0, -x];
            p.eta[4] = 1.0 / 3.0;
            p
        };
        let manifest = FitManifest {
            priors: PriorConfig::default(),
            mcmc: McmcConfig::default(),
            data_hash: "00".into(),
            acceptance: vec![],
            notes: vec!["n".into()],
        };
        PosteriorStore::new(spec, vec![vec![mk(1.0), mk(2.5)], vec![mk(-0.1), mk(7.0)]], manifest).unwrap()
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let s = store();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        let back = PosteriorStore::read_from(&buf[..]).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.scalar_chains(0), vec![vec![1.0, 2.5], vec![-0.1, 7.0]]);
    }

    #[test]
    fn corrupt_header_rejected() {
        let s = store();
        let mut buf = Vec::new();
        s.write_to(&mut buf).unwrap();
        buf[0] = b'X';
        assert!(matches!(PosteriorStore::read_from(&buf[..]), Err(Error::Format(_))));
        let mut buf2 = Vec::new();
        s.write_to(&mut buf2).unwrap();
        buf2.push(0);
        assert!(PosteriorStore::read_from(&buf2[..]).is_err());
    }

    #[test]
    fn csv_has_one_row_per_draw() {
        let s = store();
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        let cols = lines[0].split(',').count();
        assert_eq!(cols, ModelParameters::layout_len(2, 3) + 3);
        assert!(lines.iter().all(|l| l.split(',').count() == cols));
    }
}
