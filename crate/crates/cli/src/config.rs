use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use enloc_core::experiments::{
    Case3Config, CommutatorConfig, DynamicalConfig, EigenlocConfig, Fig1Config, FreezingConfig, GibbsConfig,
    LandscapeSpec, MisConfig, MomentConfig, StaticConfig,
};

use crate::CliError;

/// Parses a TOML config, rejecting every key the target type does not know.
///
/// A missing `path` yields the defaults.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
    let mut unknown = Vec::new();
    let value = serde_ignored::deserialize(de, |p| unknown.push(p.to_string()))
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    if unknown.is_empty() {
        Ok(value)
    } else {
        Err(CliError::UnknownKeys(unknown))
    }
}

/// Configs whose seed can be replaced from the command line.
pub trait Seeded {
    fn set_seed(&mut self, seed: u64);
}

macro_rules! seeded {
    ($($t:ty),*) => {$(
        impl Seeded for $t {
            fn set_seed(&mut self, seed: u64) {
                self.seed = seed;
            }
        }
    )*};
}

seeded!(
    CommutatorConfig,
    DynamicalConfig,
    EigenlocConfig,
    Fig1Config,
    FreezingConfig,
    GibbsConfig,
    MisConfig,
    MomentConfig,
    ClustersConfig
);

macro_rules! unseeded {
    ($($t:ty),*) => {$(
        impl Seeded for $t {
            fn set_seed(&mut self, _seed: u64) {}
        }
    )*};
}

unseeded!(Case3Config, StaticConfig);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[default]
    Dynamical,
    Moments,
    Case3,
    Static,
    Commutators,
    Mis,
}

/// The `simulate` config: an experiment selector and one table per experiment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateConfig {
    pub experiment: Experiment,
    pub dynamical: DynamicalConfig,
    pub moments: MomentConfig,
    pub case3: Case3Config,
    #[serde(rename = "static")]
    pub static_reduction: StaticConfig,
    pub commutators: CommutatorConfig,
    pub mis: MisConfig,
}

impl SimulateConfig {
    pub fn selected_mut(&mut self) -> &mut dyn Seeded {
        match self.experiment {
            Experiment::Dynamical => &mut self.dynamical,
            Experiment::Moments => &mut self.moments,
            Experiment::Case3 => &mut self.case3,
            Experiment::Static => &mut self.static_reduction,
            Experiment::Commutators => &mut self.commutators,
            Experiment::Mis => &mut self.mis,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClustersConfig {
    pub n: usize,
    pub seed: u64,
    pub landscape: LandscapeSpec,
    /// Cutoff energy; the lowest mountain pass out of `reference` when absent.
    pub barrier: Option<f64>,
    pub hop_radius: u32,
    /// Bitstring whose mountain pass sets the automatic barrier; the first ground state by default.
    pub reference: Option<String>,
}

impl Default for ClustersConfig {
    fn default() -> Self {
        Self {
            n: 8,
            seed: 7,
            landscape: LandscapeSpec::default(),
            barrier: None,
            hop_radius: 1,
            reference: None,
        }
    }
}
