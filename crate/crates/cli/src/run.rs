//! Output bookkeeping: artifact paths, stage timings and the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use pgsc_core::message::Schema;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::in_stage;

pub const MANIFEST: &str = "run_manifest.json";

#[derive(Clone, Debug, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surface: Option<Schema>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub pgsc: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub versions: Versions,
    pub stages: Vec<StageTiming>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
}

pub struct Run {
    pub cfg: PipelineConfig,
    root: PathBuf,
    stages: Vec<StageTiming>,
    artifacts: Vec<String>,
}

impl Run {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        let root = cfg.out.clone();
        std::fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            cfg,
            root,
            stages: Vec::new(),
            artifacts: Vec::new(),
        })
    }

    /// Directory holding one surface's artifacts.
    pub fn surface_dir(&self, surface: Option<Schema>) -> Result<PathBuf> {
        let dir = match surface {
            Some(s) => self.root.join(s.to_string()),
            None => self.root.clone(),
        };
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    /// Runs `body` as a named stage, timing it and tagging failures.
    pub fn stage<T>(
        &mut self,
        stage: &'static str,
        surface: Option<Schema>,
        body: impl FnOnce(&mut Self) -> Result<T>,
    ) -> Result<T> {
        log::info!("{stage}{}", surface.map(|s| format!(" ({s})")).unwrap_or_default());
        let start = Instant::now();
        let out = in_stage(stage, || body(self))?;
        self.stages.push(StageTiming {
            stage,
            surface,
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    fn record(&mut self, path: &Path) {
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        let rel = rel.to_string_lossy().replace('\\', "/");
        if !self.artifacts.contains(&rel) {
            self.artifacts.push(rel);
        }
    }

    pub fn write(&mut self, path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
        std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.record(path);
        Ok(())
    }

    /// Notes a file written by someone else (e.g. a model's own `save`).
    pub fn wrote(&mut self, path: &Path) {
        self.record(path);
    }

    /// Writes the manifest through a temporary file and a rename.
    pub fn finish(mut self, command: &str) -> Result<PathBuf> {
        let path = self.root.join(MANIFEST);
        self.artifacts.sort();
        let manifest = RunManifest {
            command: command.to_string(),
            seed: self.cfg.seed,
            config: self.cfg.clone(),
            versions: Versions {
                pgsc: env!("CARGO_PKG_VERSION"),
            },
            stages: self.stages,
            artifacts: self.artifacts,
        };
        let tmp = self.root.join(format!(".{MANIFEST}.tmp"));
        std::fs::write(&tmp, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("writing {}", tmp.display()))?;
        std::fs::rename(&tmp, &path).with_context(|| format!("renaming to {}", path.display()))?;
        Ok(path)
    }
}
