//! Run configuration: one TOML document covering data synthesis, feature
//! extraction, models, evaluation and file locations. Every key has a
//! default and unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::BaselineGrid;
use crate::cwt::{build_scale_grid, MorletParams, DEFAULT_W0};
use crate::dataset::SynthConfig;
use crate::error::{Error, Result};
use crate::eval::ExperimentOptions;
use crate::features::{BandDefinition, FeatureExtractor};
use crate::hblr::HblrHyperParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub sessions: PathBuf,
    pub truth: PathBuf,
    pub features: PathBuf,
    pub model: PathBuf,
    pub report: PathBuf,
    pub fold_csv: PathBuf,
    pub memberships: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            sessions: "out/sessions.jsonl".into(),
            truth: "out/truth.json".into(),
            features: "out/features.csv".into(),
            model: "out/model.json".into(),
            report: "out/report.json".into(),
            fold_csv: "out/folds.csv".into(),
            memberships: "out/memberships.csv".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed. Overrides `synth.seed` and seeds windowing and evaluation.
    pub seed: u64,
    /// Root seeds of repeated experiments.
    pub seeds: Vec<u64>,
    pub synth: SynthConfig,
    pub window_s: f64,
    /// No-pain windows per session; defaults to the number of noxious onsets.
    pub n_no_pain: Option<usize>,
    pub f_min: f64,
    pub f_max: f64,
    pub w0: f64,
    pub voices: usize,
    pub bands: Vec<BandDefinition>,
    pub hblr: HblrHyperParams,
    pub baselines: BaselineGrid,
    pub folds: usize,
    pub balance: bool,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            seeds: vec![0, 1, 2, 3, 4],
            synth: SynthConfig::default(),
            window_s: 20.0,
            n_no_pain: None,
            f_min: 0.01,
            f_max: 0.5,
            w0: DEFAULT_W0,
            voices: 10,
            bands: BandDefinition::defaults(),
            hblr: HblrHyperParams::default(),
            baselines: BaselineGrid::default(),
            folds: 10,
            balance: true,
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.synth_config().validate()?;
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return Err(Error::Config(format!("window_s must be positive, got {}", self.window_s)));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("folds must be >= 2, got {}", self.folds)));
        }
        self.hblr.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.baselines.validate()?;
        self.extractor().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Synthesis settings with the root seed applied.
    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig { seed: self.seed, ..self.synth.clone() }
    }

    pub fn extractor(&self) -> Result<FeatureExtractor> {
        let params = MorletParams::new(self.w0)?;
        let grid = build_scale_grid(self.f_min, self.f_max, params, self.voices)?;
        FeatureExtractor::new(self.bands.clone(), grid)
    }

    pub fn experiment_options(&self) -> ExperimentOptions {
        ExperimentOptions { folds: self.folds, seed: self.seed, balance: self.balance }
    }
}
