//! Per-command run configs, loaded from TOML with dotted-key overrides.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use viewrobust::classifier::{ClassifierParams, NaturalSampler, PretrainConfig};
use viewrobust::geometry::{ViewBounds, Viewpoint, AXIS_NAMES};
use viewrobust::gmvfool::AttackConfig;
use viewrobust::landscape::PlantedLandscape;
use viewrobust::render::{load_scene, RenderConfig, Scene};
use viewrobust::viat::TrainConfig;
use viewrobust::viewrs::SmoothingConfig;

use crate::args::Overrides;
use crate::{config_error, Classify, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Planted {
    Single,
    Four,
}

impl Planted {
    pub fn landscape(self) -> PlantedLandscape<f64> {
        match self {
            Planted::Single => PlantedLandscape::single_bump(),
            Planted::Four => PlantedLandscape::four_bumps(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackRun {
    pub seed: u64,
    pub scene: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub planted: Option<Planted>,
    /// Fresh draws used to score the final distribution.
    pub eval_samples: usize,
    /// Sampled renders tiled into the adversarial grid image.
    pub grid_samples: usize,
    pub grid_columns: usize,
    pub attack: AttackConfig,
    pub render: RenderConfig<f64>,
    pub bounds: ViewBounds<f64>,
}

impl Default for AttackRun {
    fn default() -> Self {
        Self {
            seed: 0,
            scene: None,
            checkpoint: None,
            planted: None,
            eval_samples: 200,
            grid_samples: 16,
            grid_columns: 4,
            attack: AttackConfig::default(),
            render: RenderConfig::default(),
            bounds: ViewBounds::standard(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRun {
    pub seed: u64,
    pub scenes: Option<PathBuf>,
    /// Starting classifier; absent means clean pretraining first.
    pub checkpoint: Option<PathBuf>,
    pub pretrain: PretrainConfig,
    pub sampler: NaturalSampler<f64>,
    pub train: TrainConfig,
    pub attack: AttackConfig,
    pub render: RenderConfig<f64>,
    pub bounds: ViewBounds<f64>,
}

impl Default for TrainRun {
    fn default() -> Self {
        Self {
            seed: 0,
            scenes: None,
            checkpoint: None,
            pretrain: PretrainConfig::default(),
            sampler: NaturalSampler::default(),
            train: TrainConfig::default(),
            attack: AttackConfig::default(),
            render: RenderConfig::default(),
            bounds: ViewBounds::standard(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyRun {
    pub seed: u64,
    pub scenes: Option<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    pub smoothing: SmoothingConfig,
    pub render: RenderConfig<f64>,
    pub bounds: ViewBounds<f64>,
}

impl Default for CertifyRun {
    fn default() -> Self {
        Self {
            seed: 0,
            scenes: None,
            checkpoints: Vec::new(),
            smoothing: SmoothingConfig::default(),
            render: RenderConfig::default(),
            bounds: ViewBounds::standard(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeRun {
    pub seed: u64,
    pub scene: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub planted: Option<Planted>,
    pub axes: [String; 2],
    pub nx: usize,
    pub ny: usize,
    /// Values of the axes that are not swept.
    pub base: Viewpoint<f64>,
    pub render: RenderConfig<f64>,
    pub bounds: ViewBounds<f64>,
}

impl Default for LandscapeRun {
    fn default() -> Self {
        Self {
            seed: 0,
            scene: None,
            checkpoint: None,
            planted: None,
            axes: ["psi".into(), "phi".into()],
            nx: 24,
            ny: 24,
            base: Viewpoint::natural(),
            render: RenderConfig::default(),
            bounds: ViewBounds::standard(),
        }
    }
}

impl LandscapeRun {
    pub fn axis_indices(&self) -> CliResult<(usize, usize)> {
        let find = |name: &str| {
            AXIS_NAMES
                .iter()
                .position(|a| *a == name)
                .ok_or_else(|| config_error(format!("unknown axis `{name}`; expected one of {AXIS_NAMES:?}")))
        };
        let (x, y) = (find(&self.axes[0])?, find(&self.axes[1])?);
        if x == y {
            return Err(config_error("the two swept axes must differ"));
        }
        Ok((x, y))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyRun {
    pub seed: u64,
    pub objects_per_class: usize,
}

impl Default for ToyRun {
    fn default() -> Self {
        Self {
            seed: 0,
            objects_per_class: 4,
        }
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> CliResult<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("split yields at least one part");
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_error(format!("override `{key}`: `{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Reads `path` (if any), applies `overrides` in order, and deserializes.
pub fn load<C: DeserializeOwned>(path: Option<&Path>, overrides: &Overrides) -> CliResult<C> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| config_error(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str::<toml::Table>(&text)
                .map_err(|e| config_error(format!("cannot parse config {}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for (k, v) in overrides {
        set_dotted(&mut table, k, v.clone())?;
    }
    C::deserialize(toml::Value::Table(table)).map_err(|e| config_error(format!("invalid config: {e}")))
}

pub fn require_file(what: &str, path: &Option<PathBuf>) -> CliResult<PathBuf> {
    let p = path
        .clone()
        .ok_or_else(|| config_error(format!("missing {what} path")))?;
    if !p.is_file() {
        return Err(config_error(format!("{what} not found: {}", p.display())));
    }
    Ok(p)
}

/// Scene files in `dir`, sorted by name.
pub fn scene_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(config_error(format!("scene directory not found: {}", dir.display())));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .config()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(config_error(format!("no scene files in {}", dir.display())));
    }
    Ok(files)
}

pub fn load_scenes(dir: &Path) -> CliResult<Vec<Scene<f64>>> {
    scene_files(dir)?.iter().map(|p| load_scene(p).config()).collect()
}

/// Loads a classifier and checks that it accepts images of `render`'s size.
pub fn load_classifier(path: &Path, render: &RenderConfig<f64>) -> CliResult<ClassifierParams<f64>> {
    let (params, _) = ClassifierParams::<f64>::load(path).config()?;
    if params.input_len() != render.input_len() {
        return Err(config_error(format!(
            "{} expects {} inputs but the render config produces {}",
            path.display(),
            params.input_len(),
            render.input_len()
        )));
    }
    Ok(params)
}
