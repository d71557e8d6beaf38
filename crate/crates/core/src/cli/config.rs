//! Run configuration: TOML file values overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding_io::NormMode;
use crate::eval::synth::{KurtosisFamily, SpuriousConfig};
use crate::hypotest::{default_test_varimax, PConvention};
use crate::spectra::ResampleMethod;
use crate::varimax::VarimaxParams;
use crate::{Error, Result};

/// Synthetic data kinds produced by `synth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    #[default]
    Gaussian,
    Gmm,
    Planted,
    Spurious,
}

/// Every tunable of every subcommand. Unused fields keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub norm_mode: NormMode,
    pub eps: f64,
    pub k: usize,
    pub ks: Vec<usize>,
    pub n_resample: usize,
    pub p_convention: PConvention,
    pub drop_leading: bool,
    pub resample_method: ResampleMethod,
    /// Optimizer used by `decompose`, `fidelity` and friends.
    pub varimax: VarimaxParams,
    /// Optimizer used inside the hypothesis test.
    pub test_varimax: VarimaxParams,
    pub margin: f64,
    pub r: usize,
    pub terms: Vec<(usize, f64)>,
    pub remove: Vec<usize>,
    pub invert_scaling: bool,

    pub input: Option<PathBuf>,
    pub meta: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub texts: Option<PathBuf>,
    pub text_embeddings: Option<PathBuf>,
    pub target_texts: Option<PathBuf>,
    pub target_embeddings: Option<PathBuf>,
    pub spurious_texts: Option<PathBuf>,
    pub spurious_embeddings: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
    pub prompt_embeddings: Option<PathBuf>,

    pub synth_kind: SynthKind,
    pub n: usize,
    pub d: usize,
    pub family: KurtosisFamily,
    pub noise: f64,
    pub spurious: SpuriousConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            norm_mode: NormMode::Degree,
            eps: 1e-8,
            k: 20,
            ks: Vec::new(),
            n_resample: 199,
            p_convention: PConvention::StandardMc,
            drop_leading: true,
            resample_method: ResampleMethod::SphereDirection,
            varimax: VarimaxParams::default(),
            test_varimax: default_test_varimax(),
            margin: crate::concepts::DEFAULT_MARGIN,
            r: 5,
            terms: Vec::new(),
            remove: Vec::new(),
            invert_scaling: true,
            input: None,
            meta: None,
            model: None,
            texts: None,
            text_embeddings: None,
            target_texts: None,
            target_embeddings: None,
            spurious_texts: None,
            spurious_embeddings: None,
            prompts: None,
            prompt_embeddings: None,
            synth_kind: SynthKind::Gaussian,
            n: 2000,
            d: 64,
            family: KurtosisFamily::default(),
            noise: 0.0,
            spurious: SpuriousConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format("toml", e.to_string()))
    }

    /// Hex SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidArgument("eps must be positive".into()));
        }
        if !self.margin.is_finite() {
            return Err(Error::InvalidArgument("margin must be finite".into()));
        }
        self.varimax.validate()?;
        self.test_varimax.validate()?;
        self.family.validate()?;
        Ok(())
    }

    /// Path option `name`, or an input error naming the missing flag.
    pub fn require<'a>(&self, value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
        let path = value
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("--{flag} is required")))?;
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
            ));
        }
        Ok(path)
    }
}

/// Parse `"0:1,2:-1.5"` into concept terms.
pub fn parse_terms(s: &str) -> Result<Vec<(usize, f64)>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let (j, w) = t
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument(format!("term {t:?} is not index:weight")))?;
            let j = j.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad concept index in {t:?}")))?;
            let w = w.trim().parse().map_err(|_| Error::InvalidArgument(format!("bad weight in {t:?}")))?;
            Ok((j, w))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_overrides_defaults() {
        let c: RunConfig = toml::from_str("seed = 7\nk = 5\n[varimax]\ntol = 1e-6\nmax_iter = 10\nrestarts = 2\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.k, 5);
        assert_eq!(c.varimax.restarts, 2);
        assert_eq!(c.n_resample, 199);
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.seed = 1;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }

    #[test]
    fn terms() {
        assert_eq!(parse_terms("0:1, 2:-0.5").unwrap(), vec![(0, 1.0), (2, -0.5)]);
        assert!(parse_terms("0").is_err());
        assert!(parse_terms("x:1").is_err());
    }
}
