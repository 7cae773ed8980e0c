//! `landscape`: loss over a grid of two viewpoint axes.

use viewrobust::geometry::AXIS_NAMES;
use viewrobust::landscape::{grid_argmax, grid_csv, loss_grid};
use viewrobust::target::RenderedTarget;

use super::overrides;
use crate::args::LandscapeArgs;
use crate::config::{self, LandscapeRun};
use crate::output::{Header, OutDir};
use crate::{config_error, Classify, CliResult};

pub fn run(args: &LandscapeArgs) -> CliResult<()> {
    let o = overrides(args.overrides())?;
    let cfg: LandscapeRun = config::load(args.common.config.as_deref(), &o)?;
    let (ax, ay) = cfg.axis_indices()?;
    if cfg.nx == 0 || cfg.ny == 0 {
        return Err(config_error("nx and ny must be >= 1"));
    }
    let header = Header::new("landscape", cfg.seed, &cfg, &o);
    let grid = match (cfg.planted, &cfg.scene) {
        (Some(_), Some(_)) => return Err(config_error("give either a scene or a planted landscape, not both")),
        (Some(p), None) => {
            let land = p.landscape();
            let base = land.bounds.clamp(&cfg.base);
            loss_grid(&land, &land.bounds, (ax, ay), (cfg.nx, cfg.ny), &base).runtime()?
        }
        (None, _) => {
            let scene_path = config::require_file("scene", &cfg.scene)?;
            let ckpt = config::require_file("checkpoint", &cfg.checkpoint)?;
            let scene = viewrobust::render::load_scene::<f64>(&scene_path).config()?;
            let classifier = config::load_classifier(&ckpt, &cfg.render)?;
            if scene.label >= classifier.num_classes() {
                return Err(config_error(format!(
                    "scene label {} out of the classifier's range",
                    scene.label
                )));
            }
            let target = RenderedTarget::new(&scene, &classifier, &cfg.render);
            let base = cfg.bounds.clamp(&cfg.base);
            loss_grid(&target, &cfg.bounds, (ax, ay), (cfg.nx, cfg.ny), &base).runtime()?
        }
    };
    let out = OutDir::create(&args.common.out)?;
    out.write_csv(
        "landscape.csv",
        &header,
        &grid_csv(&grid, AXIS_NAMES[ax], AXIS_NAMES[ay]),
    )?;
    if let Some(best) = grid_argmax(&grid) {
        println!(
            "max loss {:.6} at {} = {:.3}, {} = {:.3}",
            best.loss, AXIS_NAMES[ax], best.x, AXIS_NAMES[ay], best.y
        );
    }
    Ok(())
}
