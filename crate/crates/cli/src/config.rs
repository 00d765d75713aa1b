use std::path::{Path, PathBuf};

use clap::ValueEnum;
use relu_ntk::{KernelKind, Projection};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming the output directory when neither a flag nor
/// the config file sets one.
pub const OUT_ENV: &str = "RELU_NTK_OUT";
pub const DEFAULT_OUT: &str = "out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    #[value(name = "theta_bar")]
    ThetaBar,
    Rho,
    Eta,
}

impl KernelChoice {
    pub const ALL: [KernelChoice; 3] = [KernelChoice::ThetaBar, KernelChoice::Rho, KernelChoice::Eta];

    pub fn kind(self) -> KernelKind {
        match self {
            KernelChoice::ThetaBar => KernelKind::ThetaBar,
            KernelChoice::Rho => KernelKind::Rho,
            KernelChoice::Eta => KernelKind::Eta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionChoice {
    Canonical,
    Stereographic,
    Identity,
}

impl From<ProjectionChoice> for Projection {
    fn from(p: ProjectionChoice) -> Self {
        match p {
            ProjectionChoice::Canonical => Projection::Canonical,
            ProjectionChoice::Stereographic => Projection::Stereographic,
            ProjectionChoice::Identity => Projection::Identity,
        }
    }
}

/// Everything a command needs. Read from an optional TOML file, then
/// overridden by flags; the merged value is written to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Synthetic training points.
    pub n: usize,
    /// Synthetic input dimension.
    pub n0: usize,
    /// Deepest layer of sweeps and criteria reports.
    pub l_max: usize,
    /// Network and kernel depth for `predict` and `verify`, and the default for `kernel`.
    pub depth: usize,
    /// Depths written by `kernel`; empty means `[depth]`.
    pub depths: Vec<usize>,
    /// Unset means all three for `sweep` and `criteria`, `theta_bar` elsewhere.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelChoice>,
    pub projection: ProjectionChoice,
    pub widths: Vec<usize>,
    /// Networks averaged per width by `verify`.
    pub seeds: usize,
    pub lr: f64,
    pub steps: usize,
    pub tau: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n: 8,
            n0: 128,
            l_max: 10,
            depth: 3,
            depths: Vec::new(),
            kernel: None,
            projection: ProjectionChoice::Canonical,
            widths: vec![256, 1024, 4096],
            seeds: 32,
            lr: 0.05,
            steps: 40,
            tau: Vec::new(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("n", self.n),
            ("n0", self.n0),
            ("l_max", self.l_max),
            ("depth", self.depth),
            ("seeds", self.seeds),
            ("steps", self.steps),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(CliError::Input(format!("config: {name} must be positive")));
            }
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(CliError::Input(
                "config: widths must be a non-empty list of positive integers".into(),
            ));
        }
        if self.depths.contains(&0) {
            return Err(CliError::Input("config: depths must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(CliError::Input(format!("config: lr must be positive, got {}", self.lr)));
        }
        if let Some(t) = self.tau.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(CliError::Input(format!("config: tau must be non-negative, got {t}")));
        }
        Ok(())
    }

    pub fn kernels(&self) -> Vec<KernelChoice> {
        self.kernel.map_or_else(|| KernelChoice::ALL.to_vec(), |k| vec![k])
    }

    pub fn kernel_or_theta_bar(&self) -> KernelChoice {
        self.kernel.unwrap_or(KernelChoice::ThetaBar)
    }

    pub fn kernel_depths(&self) -> Vec<usize> {
        if self.depths.is_empty() {
            vec![self.depth]
        } else {
            self.depths.clone()
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}
