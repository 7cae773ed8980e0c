//! `make-toy-suite`: write the bundled toy scenes as JSON files.

use viewrobust::toy::{toy_suite, CLASS_NAMES, TOY_CLASSES};

use super::overrides;
use crate::args::ToyArgs;
use crate::config::{self, ToyRun};
use crate::output::{Header, OutDir};
use crate::{config_error, CliResult};

pub fn scene_file_name(index: usize, class: usize) -> String {
    format!("{index:03}_{}.json", CLASS_NAMES[class])
}

pub fn run(args: &ToyArgs) -> CliResult<()> {
    let o = overrides(args.overrides())?;
    let cfg: ToyRun = config::load(args.common.config.as_deref(), &o)?;
    if cfg.objects_per_class == 0 {
        return Err(config_error("objects_per_class must be >= 1"));
    }
    let header = Header::new("make-toy-suite", cfg.seed, &cfg, &o);
    let out = OutDir::create(&args.common.out)?;
    let scenes = toy_suite::<f64>(cfg.objects_per_class, cfg.seed);
    for (i, s) in scenes.iter().enumerate() {
        out.write_json(&scene_file_name(i, s.label), &header, s)?;
    }
    println!("wrote {} scenes ({} classes)", scenes.len(), TOY_CLASSES);
    Ok(())
}
