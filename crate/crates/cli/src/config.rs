//! Declarative run configuration.
//!
//! A TOML file is laid over a preset key by key, so a file only needs the values it
//! changes. Unknown keys are rejected. Command-line flags are applied last.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skyrmion_core::dataset::{ImageDatasetSpec, Proportions, RunSettings, Span, Splat, TestGrid, VideoDatasetSpec};
use skyrmion_core::dynamics::{DEFAULT_ITERATIONS, DEFAULT_RECORD_STRIDE};
use skyrmion_core::order::{LabelThresholds, DEFAULT_WARMUP};
use skyrmion_core::params::ModelParams;
use skyrmion_core::sweep::{Axis, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Reduced grid and dataset sizes that finish on a desktop.
    Desk,
    /// Full-size grids and datasets.
    #[value(name = "paper")]
    #[serde(rename = "paper")]
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub n_iter: u64,
    pub record_stride: u64,
    /// Iterations excluded from order-parameter measurement.
    pub warmup: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub f_p: Axis,
    pub f_d: Axis,
    pub seeds: usize,
    pub max_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagesSection {
    pub total: usize,
    pub xi_s: Vec<f64>,
    pub xi_d: Vec<f64>,
    pub f_p: Span,
    pub f_d: Span,
    pub frames_per_run: usize,
    pub train_fraction: f64,
    pub splat: Splat,
    pub max_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideosSection {
    pub total: usize,
    pub proportions: Proportions,
    pub f_p: Axis,
    pub f_d: Axis,
    pub clips_per_run: usize,
    pub train_fraction: f64,
    pub splat: Splat,
    pub max_runs: usize,
    pub test_grid: Option<TestGrid>,
    pub probe_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide. Never affects results.
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub params: ModelParams,
    pub labeling: LabelThresholds,
    pub run: RunSection,
    pub sweep: SweepSection,
    pub images: ImagesSection,
    pub videos: VideosSection,
}

#[derive(Debug)]
pub enum ConfigError {
    Missing(PathBuf, std::io::Error),
    Parse(PathBuf, String),
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Missing(p, e) => write!(f, "cannot read config {}: {e}", p.display()),
            ConfigError::Parse(p, e) => write!(f, "bad config {}: {e}", p.display()),
            ConfigError::Invalid(e) => write!(f, "invalid config: {e}"),
        }
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        let (sweep, images, videos) = match preset {
            Preset::Desk => (SweepSpec::desk(), ImageDatasetSpec::desk(), VideoDatasetSpec::desk()),
            Preset::Full => (SweepSpec::full(), ImageDatasetSpec::full(), VideoDatasetSpec::full()),
        };
        RunConfig {
            seed: 1,
            workers: 0,
            out: None,
            params: ModelParams::default(),
            labeling: LabelThresholds::default(),
            run: RunSection {
                n_iter: DEFAULT_ITERATIONS,
                record_stride: DEFAULT_RECORD_STRIDE,
                warmup: DEFAULT_WARMUP,
            },
            sweep: SweepSection {
                f_p: sweep.f_p,
                f_d: sweep.f_d,
                seeds: sweep.seeds,
                max_runs: sweep.max_runs,
            },
            images: ImagesSection {
                total: images.total,
                xi_s: images.xi_s,
                xi_d: images.xi_d,
                f_p: images.f_p,
                f_d: images.f_d,
                frames_per_run: images.frames_per_run,
                train_fraction: images.train_fraction,
                splat: images.splat,
                max_runs: images.max_runs,
            },
            videos: VideosSection {
                total: videos.total,
                proportions: videos.proportions,
                f_p: videos.f_p,
                f_d: videos.f_d,
                clips_per_run: videos.clips_per_run,
                train_fraction: videos.train_fraction,
                splat: videos.splat,
                max_runs: videos.max_runs,
                test_grid: videos.test_grid,
                probe_count: videos.probe_count,
            },
        }
    }

    /// Preset overlaid with the TOML file at `path`, if any.
    pub fn load(preset: Preset, path: Option<&Path>) -> Result<Self, ConfigError> {
        let base = Self::preset(preset);
        let Some(path) = path else {
            return Ok(base);
        };
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Missing(path.to_path_buf(), e))?;
        let parse = |e: String| ConfigError::Parse(path.to_path_buf(), e);
        let overlay: toml::Table = toml::from_str(&text).map_err(|e| parse(e.to_string()))?;
        let mut merged = toml::Table::try_from(&base).map_err(|e| parse(e.to_string()))?;
        merge(&mut merged, overlay);
        toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: skyrmion_core::Error| ConfigError::Invalid(e.to_string());
        self.params.validate().map_err(invalid)?;
        self.sweep_spec().validate().map_err(invalid)?;
        self.image_spec().validate().map_err(invalid)?;
        self.video_spec().validate().map_err(invalid)?;
        Ok(())
    }

    pub fn run_settings(&self) -> RunSettings {
        RunSettings {
            n_iter: self.run.n_iter,
            record_stride: self.run.record_stride,
            warmup: self.run.warmup,
            params: self.params.clone(),
            thresholds: self.labeling,
        }
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            f_p: self.sweep.f_p.clone(),
            f_d: self.sweep.f_d.clone(),
            seeds: self.sweep.seeds,
            base_seed: self.seed,
            n_iter: self.run.n_iter,
            record_stride: self.run.record_stride,
            warmup: self.run.warmup,
            max_runs: self.sweep.max_runs,
            params: self.params.clone(),
            thresholds: self.labeling,
        }
    }

    pub fn image_spec(&self) -> ImageDatasetSpec {
        let i = &self.images;
        ImageDatasetSpec {
            total: i.total,
            seed: self.seed,
            xi_s: i.xi_s.clone(),
            xi_d: i.xi_d.clone(),
            f_p: i.f_p,
            f_d: i.f_d,
            frames_per_run: i.frames_per_run,
            train_fraction: i.train_fraction,
            splat: i.splat,
            max_runs: i.max_runs,
            run: self.run_settings(),
        }
    }

    pub fn video_spec(&self) -> VideoDatasetSpec {
        let v = &self.videos;
        VideoDatasetSpec {
            total: v.total,
            seed: self.seed,
            proportions: v.proportions,
            f_p: v.f_p.clone(),
            f_d: v.f_d.clone(),
            clips_per_run: v.clips_per_run,
            train_fraction: v.train_fraction,
            splat: v.splat,
            max_runs: v.max_runs,
            test_grid: v.test_grid.clone(),
            probe_count: v.probe_count,
            run: self.run_settings(),
        }
    }

    /// The configuration as recorded next to outputs: execution-only settings
    /// (worker count, output path) are left out so they cannot change output bytes.
    pub fn provenance(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("workers");
            map.remove("out");
        }
        v
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        RunConfig::preset(Preset::Desk).validate().unwrap();
        RunConfig::preset(Preset::Full).validate().unwrap();
        assert_eq!(RunConfig::preset(Preset::Full).sweep_spec().f_p.count * 28, 840);
    }

    #[test]
    fn overlay_changes_only_named_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 9\n[params]\nf_p = 0.2\n[sweep.f_d]\ncount = 5\n").unwrap();
        let c = RunConfig::load(Preset::Desk, Some(&path)).unwrap();
        let base = RunConfig::preset(Preset::Desk);
        assert_eq!(c.seed, 9);
        assert_eq!(c.params.f_p, 0.2);
        assert_eq!(c.params.xi_s, base.params.xi_s);
        assert_eq!(c.sweep.f_d.count, 5);
        assert_eq!(c.sweep.f_d.max, base.sweep.f_d.max);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[params]\nfp = 0.2\n").unwrap();
        assert!(matches!(RunConfig::load(Preset::Desk, Some(&path)), Err(ConfigError::Parse(..))));
        std::fs::write(&path, "sed = 1\n").unwrap();
        assert!(matches!(RunConfig::load(Preset::Desk, Some(&path)), Err(ConfigError::Parse(..))));
    }

    #[test]
    fn missing_file_names_the_path() {
        let e = RunConfig::load(Preset::Desk, Some(Path::new("/nonexistent/x.toml"))).unwrap_err();
        assert!(e.to_string().contains("/nonexistent/x.toml"));
    }

    #[test]
    fn provenance_omits_execution_settings() {
        let mut c = RunConfig::preset(Preset::Desk);
        c.workers = 4;
        let v = c.provenance();
        assert!(v.get("workers").is_none());
        assert!(v.get("seed").is_some());
    }
}
