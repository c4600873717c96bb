//! The declarative run file: input paths, output location and the analysis
//! settings. Relative paths are resolved against the file's directory.

use std::path::{Path, PathBuf};

use infoflow::pipeline::PipelineConfig;
use infoflow::report::OutputFormat;
use infoflow::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sentiment: Option<PathBuf>,
    pub prices: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub formats: Option<Vec<OutputFormat>>,
    pub analysis: PipelineConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.sentiment, &mut cfg.prices, &mut cfg.out_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}
