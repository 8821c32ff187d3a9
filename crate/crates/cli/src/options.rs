//! Argument groups shared by several commands.

use std::path::{Path, PathBuf};

use attnboot::{AttentionSource, BootstrapConfig, BootstrapMode};
use clap::{Args, ValueEnum};

use crate::error::{require_dir, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Parametric,
    Nonparametric,
}

#[derive(Debug, Clone, Args)]
pub struct BootstrapArgs {
    /// How null images are drawn.
    #[arg(long, value_enum, default_value_t = ModeArg::Parametric)]
    pub mode: ModeArg,
    /// Number of bootstrap replicates.
    #[arg(short = 'B', long, default_value_t = 1)]
    pub replicates: usize,
    /// Multiplier on the channel standard deviation of parametric nulls.
    #[arg(long, default_value_t = 1.0)]
    pub width: f64,
    /// Seed of the bootstrap streams.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl BootstrapArgs {
    pub fn config(&self) -> CliResult<BootstrapConfig> {
        let config = BootstrapConfig {
            mode: match self.mode {
                ModeArg::Parametric => BootstrapMode::Parametric,
                ModeArg::Nonparametric => BootstrapMode::Nonparametric,
            },
            replicates: self.replicates,
            width: self.width,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceKind {
    /// Built-in patch-variance model.
    Toy,
    /// Patch-attention dumps written by an external extractor.
    External,
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    #[arg(long, value_enum, default_value_t = SourceKind::Toy)]
    pub source: SourceKind,
    /// Patch size of the toy model.
    #[arg(long, default_value_t = 8)]
    pub patch_size: usize,
    /// Directory holding `<stem>.json` and `<stem>_null<b>.json` dumps.
    #[arg(long)]
    pub attention_dir: Option<PathBuf>,
}

impl SourceArgs {
    /// The attention source for the image named `stem`.
    pub fn source_for(&self, stem: &str) -> CliResult<AttentionSource> {
        match self.source {
            SourceKind::Toy => {
                if self.patch_size == 0 {
                    return Err(CliError::input("--patch-size must be positive"));
                }
                Ok(AttentionSource::toy(self.patch_size))
            }
            SourceKind::External => {
                let dir = self
                    .attention_dir
                    .as_ref()
                    .ok_or_else(|| CliError::input("--source external needs --attention-dir"))?;
                require_dir(dir, "attention directory")?;
                Ok(AttentionSource::External {
                    dir: dir.clone(),
                    stem: stem.to_owned(),
                })
            }
        }
    }
}

/// File name without directories or extension.
pub fn file_stem(path: &Path) -> CliResult<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_owned)
        .ok_or_else(|| CliError::input(format!("cannot derive a name from {}", path.display())))
}
