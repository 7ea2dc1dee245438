//! Run configuration. Read from TOML, overlaid by command-line flags, and
//! written back in full to every run directory.

use std::path::{Path, PathBuf};

use akgeom::calculus::GreenSolveConfig;
use akgeom::deform::{ContinuationConfig, Predictor};
use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyIdentities,
    DdcVerify,
    Curvature,
    Deform,
    KtCheck,
    BuildTriple,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyIdentities => "verify-identities",
            Command::DdcVerify => "ddc-verify",
            Command::Curvature => "curvature",
            Command::Deform => "deform",
            Command::KtCheck => "kt-check",
            Command::BuildTriple => "build-triple",
        }
    }

    pub fn default_resolution(self) -> [usize; 4] {
        match self {
            Command::VerifyIdentities => [16; 4],
            _ => [32, 4, 32, 4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Lemma1,
    Prop2,
    Prop3,
    Cor2,
    Weinkove,
    All,
}

impl Suite {
    pub fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Lemma1, Suite::Prop2, Suite::Prop3, Suite::Cor2, Suite::Weinkove],
            s => vec![s],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma1 => "lemma1",
            Suite::Prop2 => "prop2",
            Suite::Prop3 => "prop3",
            Suite::Cor2 => "cor2",
            Suite::Weinkove => "weinkove",
            Suite::All => "all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Defaults per command when absent.
    pub resolution: Option<[usize; 4]>,
    pub period: [f64; 4],
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { resolution: None, period: [1.0; 4] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StructureConfig {
    /// Built-in path name.
    pub path: String,
    /// Path parameter for single-structure commands.
    pub t: f64,
    /// Amplitude of `torus-modulated`.
    pub kappa: f64,
    /// Triple container to load instead of a built-in path.
    pub file: Option<PathBuf>,
}

impl Default for StructureConfig {
    fn default() -> Self {
        Self { path: "torus-modulated".into(), t: 0.1, kappa: 1.0, file: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentitiesConfig {
    /// Random fields per degree.
    pub fields: usize,
}

impl Default for IdentitiesConfig {
    fn default() -> Self {
        Self { fields: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdcConfig {
    pub suite: Suite,
    /// Random samples per suite.
    pub samples: usize,
}

impl Default for DdcConfig {
    fn default() -> Self {
        Self { suite: Suite::All, samples: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeformConfig {
    pub t_max: f64,
    pub step: f64,
    pub min_step: f64,
    pub newton_tolerance: f64,
    pub max_newton_iterations: usize,
    pub linear_tolerance: f64,
    pub max_linear_iterations: usize,
    pub gmres_restart: usize,
    pub predictor: Predictor,
    pub probe_seed: u64,
    /// Write f, ω_{t,f} and s^∇ of every step as containers.
    pub save_fields: bool,
}

impl Default for DeformConfig {
    fn default() -> Self {
        let c = ContinuationConfig::default();
        Self {
            t_max: 0.1,
            step: c.step,
            min_step: c.min_step,
            newton_tolerance: c.newton_tolerance,
            max_newton_iterations: c.max_newton_iterations,
            linear_tolerance: c.linear_tolerance,
            max_linear_iterations: c.max_linear_iterations,
            gmres_restart: c.gmres_restart,
            predictor: c.predictor,
            probe_seed: c.probe_seed,
            save_fields: true,
        }
    }
}

impl DeformConfig {
    pub fn continuation(&self, green: GreenSolveConfig) -> ContinuationConfig {
        ContinuationConfig {
            step: self.step,
            newton_tolerance: self.newton_tolerance,
            max_newton_iterations: self.max_newton_iterations,
            linear_tolerance: self.linear_tolerance,
            max_linear_iterations: self.max_linear_iterations,
            gmres_restart: self.gmres_restart,
            min_step: self.min_step,
            green,
            predictor: self.predictor,
            probe_seed: self.probe_seed,
        }
    }
}

/// Pass thresholds of every asserted check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub commutator: f64,
    pub lemma1: f64,
    pub prop2: f64,
    pub prop3: f64,
    pub cor2: f64,
    pub weinkove: f64,
    pub curvature_routes: f64,
    pub ricci_closedness: f64,
    pub scalar_stddev: f64,
    pub trivial_potential: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            commutator: 1e-8,
            lemma1: 1e-6,
            prop2: 1e-5,
            prop3: 1e-6,
            cor2: 1e-6,
            weinkove: 1e-5,
            curvature_routes: 1e-9,
            ricci_closedness: 1e-9,
            scalar_stddev: 1e-6,
            trivial_potential: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: u64,
    /// Worker threads; all available cores when absent.
    pub threads: Option<usize>,
    pub grid: GridConfig,
    pub structure: StructureConfig,
    pub green: GreenSolveConfig,
    pub identities: IdentitiesConfig,
    pub ddc: DdcConfig,
    pub deform: DeformConfig,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: 1,
            threads: None,
            grid: GridConfig::default(),
            structure: StructureConfig::default(),
            green: GreenSolveConfig::default(),
            identities: IdentitiesConfig::default(),
            ddc: DdcConfig::default(),
            deform: DeformConfig::default(),
            tolerances: Tolerances::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn resolution(&self) -> [usize; 4] {
        self.grid.resolution.unwrap_or_else(|| self.command.map_or([32, 4, 32, 4], Command::default_resolution))
    }

    /// Bind the command and fill per-command defaults, rejecting a conflicting `command` key.
    pub fn resolve(&mut self, command: Command) -> anyhow::Result<()> {
        if let Some(c) = self.command {
            if c != command {
                bail!("config is for '{}' but '{}' was invoked", c.name(), command.name());
            }
        }
        self.command = Some(command);
        self.grid.resolution = Some(self.resolution());
        self.validate()
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.green.validate()?;
        self.deform.continuation(self.green).validate()?;
        if !(self.deform.t_max >= 0.0 && self.deform.t_max.is_finite()) {
            bail!("deform.t_max = {} must be finite and non-negative", self.deform.t_max);
        }
        if self.identities.fields == 0 || self.ddc.samples == 0 {
            bail!("sample counts must be at least 1");
        }
        if self.threads == Some(0) {
            bail!("threads must be at least 1");
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("commutator", t.commutator),
            ("lemma1", t.lemma1),
            ("prop2", t.prop2),
            ("prop3", t.prop3),
            ("cor2", t.cor2),
            ("weinkove", t.weinkove),
            ("curvature_routes", t.curvature_routes),
            ("ricci_closedness", t.ricci_closedness),
            ("scalar_stddev", t.scalar_stddev),
            ("trivial_potential", t.trivial_potential),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("tolerances.{name} = {v} must be positive");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("seed = 3\n[grid]\nresolutoin = [8, 4, 8, 4]\n").is_err());
        assert!(RunConfig::from_toml("[tolerances]\nlemma = 1e-3\n").is_err());
        assert!(RunConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let mut c = RunConfig::from_toml("seed = 9\n[deform]\nt_max = 0.05\n[tolerances]\nprop2 = 1e-4\n").unwrap();
        c.resolve(Command::Deform).unwrap();
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.tolerances.prop2, 1e-4);
        assert_eq!(back.resolution(), [32, 4, 32, 4]);
    }

    #[test]
    fn conflicting_command_is_rejected() {
        let mut c = RunConfig::from_toml("command = \"kt-check\"\n").unwrap();
        assert!(c.resolve(Command::Deform).is_err());
    }
}
