use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consolidation::{ConsolidationConfig, ConsolidationError, Method};

/// Route shapes to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum DirectionSetting {
    #[default]
    #[serde(rename = "1PMD")]
    OnePickup,
    #[serde(rename = "MP1D")]
    MultiPickup,
    #[serde(rename = "both")]
    Both,
}

impl std::str::FromStr for DirectionSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "1PMD" => Ok(DirectionSetting::OnePickup),
            "MP1D" => Ok(DirectionSetting::MultiPickup),
            "BOTH" => Ok(DirectionSetting::Both),
            _ => Err(format!("unknown direction {s:?}; expected 1PMD, MP1D or both")),
        }
    }
}

/// How one-drop routes are extended with further drops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "lowercase", deny_unknown_fields)]
pub enum Extension {
    Exact,
    Knn { k: usize },
    Kcorn { k: usize },
}

impl Extension {
    pub fn label(self) -> String {
        match self {
            Extension::Exact => "exact".into(),
            Extension::Knn { k } => format!("knn{k}"),
            Extension::Kcorn { k } => format!("kcorn{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub consolidation: ConsolidationConfig,
    /// Empty means one-drop routes only.
    pub extension: Vec<Extension>,
    pub direction: DirectionSetting,
    /// Skip extending routes that no appended drop can make feasible.
    pub prune: bool,
    /// Abort generation once the pool holds more routes than this.
    pub max_pool_size: Option<usize>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Preset::Exact.generator()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub time_limit_secs: Option<f64>,
    pub gap_tolerance: f64,
    pub max_total_routes: Option<u32>,
    /// Mode id to route cap; combined with each mode's own fleet cap.
    pub mode_caps: BTreeMap<String, u32>,
    /// Program called as `cmd <problem.json> <selection.json>` instead of the built-in search.
    pub external_command: Option<String>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_limit_secs: None,
            gap_tolerance: 0.0,
            max_total_routes: None,
            mode_caps: BTreeMap::new(),
            external_command: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Every feasible lane subset, every destination permutation.
    Exact,
    /// Best fit decreasing packing, one-drop routes only.
    Bfd,
    /// Best fit decreasing with nearest-neighbor and least-detour extension, K = 10.
    Bkk10,
    /// As `bkk10` with K = 15.
    Bkk,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Exact, Preset::Bfd, Preset::Bkk10, Preset::Bkk];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Exact => "exact",
            Preset::Bfd => "bfd",
            Preset::Bkk10 => "bkk10",
            Preset::Bkk => "bkk",
        }
    }

    pub fn generator(self) -> GeneratorConfig {
        let packing = ConsolidationConfig {
            methods: vec![Method::Bfd],
            partial_container: vec![1.0, 0.75, 0.5, 0.25],
            ..ConsolidationConfig::default()
        };
        let (consolidation, extension) = match self {
            Preset::Exact => (ConsolidationConfig::default(), vec![Extension::Exact]),
            Preset::Bfd => (packing, vec![]),
            Preset::Bkk10 => (packing, vec![Extension::Knn { k: 10 }, Extension::Kcorn { k: 10 }]),
            Preset::Bkk => (packing, vec![Extension::Knn { k: 15 }, Extension::Kcorn { k: 15 }]),
        };
        GeneratorConfig {
            consolidation,
            extension,
            direction: DirectionSetting::OnePickup,
            prune: true,
            max_pool_size: None,
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown preset {s:?}; expected exact, bfd, bkk10 or bkk"))
    }
}

/// Everything a solve needs besides the instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub generator: GeneratorConfig,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> RunConfig {
        RunConfig {
            name: preset.name().into(),
            generator: preset.generator(),
            solver: SolverConfig::default(),
            seed: 0,
        }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        self.generator.consolidation.check()?;
        if self.generator.extension.iter().any(|e| matches!(e, Extension::Knn { k: 0 } | Extension::Kcorn { k: 0 })) {
            return Err(ConfigError::Invalid("neighbor count k must be at least 1".into()));
        }
        if let Some(t) = self.solver.time_limit_secs {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(ConfigError::Invalid(format!("time limit {t} must be a nonnegative number of seconds")));
            }
        }
        if !(self.solver.gap_tolerance >= 0.0 && self.solver.gap_tolerance.is_finite()) {
            return Err(ConfigError::Invalid("gap tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::preset(Preset::Exact)
    }
}

/// The on-disk solver configuration. Every block is optional; a preset fills
/// the generator block and explicit blocks override it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<Preset>,
    pub generator: Option<GeneratorConfig>,
    pub solver: Option<SolverConfig>,
    pub seed: Option<u64>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Consolidation(#[from] ConsolidationError),
    #[error("{0}")]
    Invalid(String),
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn resolve(&self) -> RunConfig {
        let mut config = RunConfig::preset(self.preset.unwrap_or(Preset::Exact));
        if let Some(g) = &self.generator {
            config.generator = g.clone();
            config.name = "custom".into();
        }
        if let Some(s) = &self.solver {
            config.solver = s.clone();
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config
    }
}
