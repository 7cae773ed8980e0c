//! Command-line flags. Named flags are shorthands for dotted config keys;
//! `--set key=value` reaches any other field.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "viewrobust",
    version,
    about = "Viewpoint attacks, adversarial training and certification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an adversarial viewpoint distribution against one target.
    Attack(AttackArgs),
    /// Adversarially train a classifier on a scene directory.
    Train(TrainArgs),
    /// Certify classifiers under viewpoint smoothing.
    Certify(CertifyArgs),
    /// Sweep the loss over a two-axis grid.
    Landscape(LandscapeArgs),
    /// Write the bundled toy scenes.
    MakeToySuite(ToyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML config file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extra override `dotted.key=value`, value parsed as TOML.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct AttackArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Planted landscape instead of a scene: `single` or `four`.
    #[arg(long)]
    pub planted: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory of scene JSON files.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    /// Pretrained classifier; pretrains from scratch when absent.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Checkpoint directory (`.../checkpoints/epoch_XXX`) to continue from.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    /// Classifier checkpoint; repeat to certify several.
    #[arg(long)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long)]
    pub sigma_tilde: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct LandscapeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub planted: Option<String>,
    /// Swept axes as `x,y` names, e.g. `psi,phi`.
    #[arg(long)]
    pub axes: Option<String>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ToyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub objects_per_class: Option<usize>,
}

/// Dotted-key overrides in the order they are applied.
pub type Overrides = Vec<(String, toml::Value)>;

fn push<V: Into<toml::Value> + Clone>(out: &mut Overrides, key: &str, v: &Option<V>) {
    if let Some(v) = v {
        out.push((key.to_string(), v.clone().into()));
    }
}

fn push_path(out: &mut Overrides, key: &str, v: &Option<PathBuf>) {
    if let Some(p) = v {
        out.push((key.to_string(), toml::Value::String(p.display().to_string())));
    }
}

fn push_count(out: &mut Overrides, key: &str, v: &Option<usize>) {
    push(out, key, &v.map(|x| x as i64));
}

/// Parses `key=value`; values that are not valid TOML become strings.
pub fn parse_set(item: &str) -> Result<(String, toml::Value), String> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| format!("--set expects KEY=VALUE, got `{item}`"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(format!("--set has an empty key in `{item}`"));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

impl Common {
    fn base(&self) -> Result<Overrides, String> {
        let mut out = Overrides::new();
        push(&mut out, "seed", &self.seed.map(|s| s as i64));
        for item in &self.set {
            out.push(parse_set(item)?);
        }
        Ok(out)
    }
}

impl AttackArgs {
    pub fn overrides(&self) -> Result<Overrides, String> {
        let mut o = self.common.base()?;
        push_path(&mut o, "scene", &self.scene);
        push_path(&mut o, "checkpoint", &self.checkpoint);
        push(&mut o, "planted", &self.planted);
        push_count(&mut o, "attack.k", &self.k);
        push_count(&mut o, "attack.iterations", &self.iterations);
        push_count(&mut o, "attack.samples", &self.samples);
        push(&mut o, "attack.eta", &self.eta);
        push(&mut o, "attack.lambda", &self.lambda);
        Ok(o)
    }
}

impl TrainArgs {
    pub fn overrides(&self) -> Result<Overrides, String> {
        let mut o = self.common.base()?;
        push_path(&mut o, "scenes", &self.scenes);
        push_path(&mut o, "checkpoint", &self.checkpoint);
        push_count(&mut o, "train.epochs", &self.epochs);
        push(&mut o, "train.eta", &self.eta);
        Ok(o)
    }
}

impl CertifyArgs {
    pub fn overrides(&self) -> Result<Overrides, String> {
        let mut o = self.common.base()?;
        push_path(&mut o, "scenes", &self.scenes);
        if !self.checkpoint.is_empty() {
            let list = self
                .checkpoint
                .iter()
                .map(|p| toml::Value::String(p.display().to_string()))
                .collect();
            o.push(("checkpoints".to_string(), toml::Value::Array(list)));
        }
        push(&mut o, "smoothing.sigma_tilde", &self.sigma_tilde);
        push_count(&mut o, "smoothing.n", &self.n);
        push_count(&mut o, "smoothing.n0", &self.n0);
        push(&mut o, "smoothing.alpha", &self.alpha);
        Ok(o)
    }
}

impl LandscapeArgs {
    pub fn overrides(&self) -> Result<Overrides, String> {
        let mut o = self.common.base()?;
        push_path(&mut o, "scene", &self.scene);
        push_path(&mut o, "checkpoint", &self.checkpoint);
        push(&mut o, "planted", &self.planted);
        if let Some(axes) = &self.axes {
            let list = axes
                .split(',')
                .map(|s| toml::Value::String(s.trim().to_string()))
                .collect();
            o.push(("axes".to_string(), toml::Value::Array(list)));
        }
        push_count(&mut o, "nx", &self.nx);
        push_count(&mut o, "ny", &self.ny);
        Ok(o)
    }
}

impl ToyArgs {
    pub fn overrides(&self) -> Result<Overrides, String> {
        let mut o = self.common.base()?;
        push_count(&mut o, "objects_per_class", &self.objects_per_class);
        Ok(o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_values_parse_as_toml_or_string() {
        assert_eq!(parse_set("attack.k=8").unwrap().1, toml::Value::Integer(8));
        assert_eq!(parse_set("a=0.5").unwrap().1, toml::Value::Float(0.5));
        assert_eq!(parse_set("a=[1, 2]").unwrap().1.as_array().unwrap().len(), 2);
        assert_eq!(parse_set("a=four").unwrap().1, toml::Value::String("four".into()));
        assert!(parse_set("novalue").is_err());
        assert!(parse_set("=3").is_err());
    }

    #[test]
    fn cli_parses_every_subcommand() {
        for line in [
            "viewrobust attack --out o --planted four --k 8",
            "viewrobust train --out o --scenes s --epochs 1",
            "viewrobust certify --out o --scenes s --checkpoint a --checkpoint b",
            "viewrobust landscape --out o --planted single --axes psi,phi --nx 10 --ny 10",
            "viewrobust make-toy-suite --out o --seed 3",
        ] {
            Cli::try_parse_from(line.split_whitespace()).unwrap();
        }
        assert!(Cli::try_parse_from(["viewrobust", "attack"]).is_err());
    }
}
