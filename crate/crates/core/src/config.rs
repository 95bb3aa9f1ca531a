//! Pipeline configuration, read from a TOML file and overridable from the
//! command line.
//!
//! ```toml
//! seed = 7
//!
//! [paths]
//! scans_dir = "data/scans"          # *.mhd + payloads
//! annotations = "data/annotations.csv"
//! output_dir = "out"
//! weights = "model.ntar"            # optional; see `infer --seed-weights`
//!
//! [window]
//! lo = -1000
//! hi = 400
//!
//! [slices]
//! radius_factor = 0.5
//!
//! [swin]        # SwinConfig fields
//! [detector]    # DetectorConfig fields
//! [eval]        # EvalConfig fields
//! ```
//!
//! Every section and key is optional; omitted values take their defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detect::DetectorConfig;
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::preprocess::{HuWindow, SliceRule};
use crate::swin::SwinConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub scans_dir: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub weights: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub window: HuWindow,
    pub slices: SliceRule,
    pub swin: SwinConfig,
    pub detector: DetectorConfig,
    pub eval: EvalConfig,
}


/// Which paths a command needs to exist before it starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Preprocess,
    Infer { seeded: bool },
    Eval,
    Bench { seeded: bool },
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_toml(&text).map_err(|e| e.in_file(path))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Check values, then the paths `stage` reads from.
    pub fn validate(&self, stage: Stage) -> Result<()> {
        if !self.window.is_valid() {
            return Err(Error::Config(format!(
                "window: lo ({}) must be below hi ({})",
                self.window.lo, self.window.hi
            )));
        }
        if !(self.slices.radius_factor >= 0.0) {
            return Err(Error::Config("slices: radius_factor must be non-negative".into()));
        }
        self.swin.validate()?;
        self.detector.validate()?;
        self.eval.validate()?;
        let p = &self.paths;
        let need = |name: &str, path: &Option<PathBuf>| -> Result<()> {
            match path {
                None => Err(Error::Config(format!("paths.{name} is not set"))),
                Some(x) if !x.exists() => Err(Error::Config(format!(
                    "paths.{name} `{}` does not exist",
                    x.display()
                ))),
                Some(_) => Ok(()),
            }
        };
        match stage {
            Stage::Preprocess => {
                need("scans_dir", &p.scans_dir)?;
                need("annotations", &p.annotations)?;
                if p.output_dir.is_none() {
                    return Err(Error::Config("paths.output_dir is not set".into()));
                }
            }
            Stage::Infer { seeded } => {
                need("output_dir", &p.output_dir)?;
                if !seeded {
                    need("weights", &p.weights)?;
                }
            }
            Stage::Eval => need("output_dir", &p.output_dir)?,
            Stage::Bench { seeded } => {
                if !seeded {
                    need("weights", &p.weights)?;
                }
            }
        }
        Ok(())
    }

    pub fn output_dir(&self) -> Result<&Path> {
        self.paths
            .output_dir
            .as_deref()
            .ok_or_else(|| Error::Config("paths.output_dir is not set".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        assert_eq!(PipelineConfig::from_toml("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn partial_sections_and_round_trip() {
        let c = PipelineConfig::from_toml(
            "seed = 3\n[window]\nlo = -1200\n[detector]\nscore_thresh = 0.2\n[eval]\narea_cuts = [50.0, 150.0]\n",
        )
        .unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.window, HuWindow { lo: -1200, hi: 400 });
        assert_eq!(c.detector.score_thresh, 0.2);
        assert_eq!(c.detector.pre_nms_topk, 1000);
        assert_eq!(c.eval.area_cuts, vec![50.0, 150.0]);
        assert_eq!(PipelineConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_window_and_missing_paths() {
        let mut c = PipelineConfig::default();
        c.window = HuWindow { lo: 400, hi: 400 };
        assert!(matches!(c.validate(Stage::Eval), Err(Error::Config(_))));
        let mut c = PipelineConfig::default();
        c.paths.scans_dir = Some("/definitely/not/here".into());
        c.paths.annotations = Some("/definitely/not/here.csv".into());
        c.paths.output_dir = Some("/tmp".into());
        let err = c.validate(Stage::Preprocess).unwrap_err().to_string();
        assert!(err.contains("scans_dir"), "{err}");
        assert!(PipelineConfig::from_toml("bogus = 1").is_err());
    }
}
