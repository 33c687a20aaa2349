//! Run configuration. Files are TOML with one table per task; anything left
//! out takes its default, and command-line flags override file values.

use std::path::{Path, PathBuf};

use gazeconv_core::genvae::{VaeArch, VaeTrainConfig};
use gazeconv_core::reconnet::{ReconArch, ReconEvalConfig, ReconTrainConfig, SectionSpec};
use gazeconv_core::segnet::{SegArch, SegTrainConfig};
use gazeconv_core::synth::ToyConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub segment: SegmentConfig,
    pub reconstruct: ReconstructConfig,
    pub generate: GenerateConfig,
    pub eval: EvalConfig,
    pub toy: ToyCorpusConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    pub arch: SegArch,
    pub train: SegTrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    pub arch: ReconArch,
    pub train: ReconTrainConfig,
    /// Clean training sections drawn from every training file.
    pub sections_per_file: usize,
    pub section_min_len: usize,
    pub section_max_len: usize,
    pub eval: ReconEvalConfig,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        ReconstructConfig {
            arch: ReconArch::default(),
            train: ReconTrainConfig::default(),
            sections_per_file: 4,
            section_min_len: 64,
            section_max_len: 192,
            eval: ReconEvalConfig::default(),
        }
    }
}

impl ReconstructConfig {
    pub fn section_spec(&self) -> SectionSpec {
        SectionSpec::new(
            self.sections_per_file,
            self.section_min_len,
            self.section_max_len,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub arch: VaeArch,
    pub train: VaeTrainConfig,
    /// Deltas per training window; must be a multiple of 4.
    pub window: usize,
    /// Length of generated scanpaths in `eval generate`.
    pub length: usize,
    /// Scanpaths generated in `eval generate`.
    pub count: usize,
    /// Canvas used for the start position, centering and rasterization.
    pub canvas: (u32, u32),
    pub histogram_bins: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            arch: VaeArch::default(),
            train: VaeTrainConfig::default(),
            window: 128,
            length: 128,
            count: 16,
            canvas: (1000, 800),
            histogram_bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub folds: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { folds: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyCorpusConfig {
    pub subjects: usize,
    pub length: usize,
    pub shape: ToyConfig,
}

impl Default for ToyCorpusConfig {
    fn default() -> Self {
        ToyCorpusConfig {
            subjects: 10,
            length: 200,
            shape: ToyConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration always serializes")
    }

    /// Writes the resolved configuration next to the run's outputs.
    pub fn write_sidecar(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(CONFIG_FILE);
        std::fs::write(&path, self.to_toml()).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
