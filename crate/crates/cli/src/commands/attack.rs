//! `attack`: fit a mixture of adversarial viewpoints against one target.

use viewrobust::gmvfool::{attack_success_rate, run_attack, AttackOutcome};
use viewrobust::render::{render_image, RenderedImage};
use viewrobust::seed;
use viewrobust::target::RenderedTarget;
use viewrobust::viewdist::{sample_mixture, MixtureDump};

use super::{key_value_csv, overrides};
use crate::args::AttackArgs;
use crate::config::{self, AttackRun};
use crate::output::{Header, OutDir};
use crate::{config_error, Classify, CliResult};

/// Bump mass above which a bump counts as covered.
pub const COVERAGE_MASS: f64 = 0.05;

pub fn run(args: &AttackArgs) -> CliResult<()> {
    let o = overrides(args.overrides())?;
    let mut cfg: AttackRun = config::load(args.common.config.as_deref(), &o)?;
    cfg.attack.seed = cfg.seed;
    cfg.attack.validate().config()?;
    if cfg.eval_samples == 0 {
        return Err(config_error("eval_samples must be >= 1"));
    }
    let header = Header::new("attack", cfg.seed, &cfg, &o);
    match (cfg.planted, &cfg.scene) {
        (Some(_), Some(_)) => Err(config_error("give either a scene or a planted landscape, not both")),
        (Some(p), None) => attack_planted(&cfg, p, &header, &args.common.out),
        (None, _) => attack_scene(&cfg, &header, &args.common.out),
    }
}

fn write_common(
    out: &OutDir,
    header: &Header,
    outcome: &AttackOutcome<f64>,
    bounds: &viewrobust::ViewBounds64,
) -> CliResult<()> {
    let mut dump = MixtureDump::new(&outcome.params, bounds);
    dump.header = Some(serde_json::to_value(header).expect("header serializes"));
    out.write_bytes("psi.json", (dump.to_json() + "\n").as_bytes())?;
    out.write_csv("trace.csv", header, &outcome.trace_csv())?;
    Ok(())
}

fn final_rows(cfg: &AttackRun, outcome: &AttackOutcome<f64>) -> Vec<(String, String)> {
    let last = outcome.trace.last().expect("trace has the final row");
    vec![
        ("k".into(), cfg.attack.k.to_string()),
        ("iterations".into(), cfg.attack.iterations.to_string()),
        ("samples".into(), cfg.attack.samples.to_string()),
        ("final_loss_mean".into(), last.loss_mean.to_string()),
        ("final_entropy".into(), last.entropy.to_string()),
        ("max_omega".into(), last.max_omega.to_string()),
    ]
}

fn attack_scene(cfg: &AttackRun, header: &Header, out: &std::path::Path) -> CliResult<()> {
    let scene_path = config::require_file("scene", &cfg.scene)?;
    let ckpt = config::require_file("checkpoint", &cfg.checkpoint)?;
    let scene = viewrobust::render::load_scene::<f64>(&scene_path).config()?;
    let classifier = config::load_classifier(&ckpt, &cfg.render)?;
    if scene.label >= classifier.num_classes() {
        return Err(config_error(format!(
            "scene label {} exceeds the classifier's {} classes",
            scene.label,
            classifier.num_classes()
        )));
    }
    let target = RenderedTarget::new(&scene, &classifier, &cfg.render);
    let outcome = run_attack(&target, &cfg.bounds, &cfg.attack).runtime()?;
    let asr = attack_success_rate(
        &target,
        scene.label,
        &outcome.params,
        &cfg.bounds,
        cfg.eval_samples,
        seed::derive(cfg.seed, &[0xa5]),
    )
    .runtime()?;
    let out = OutDir::create(out)?;
    write_common(&out, header, &outcome, &cfg.bounds)?;
    let mut rows = vec![
        ("target".into(), "scene".into()),
        ("label".into(), scene.label.to_string()),
    ];
    rows.extend(final_rows(cfg, &outcome));
    rows.push(("eval_samples".into(), cfg.eval_samples.to_string()));
    rows.push(("attack_success_rate".into(), asr.to_string()));
    out.write_csv("summary.csv", header, &key_value_csv(&rows))?;

    if cfg.grid_samples > 0 {
        let draws = sample_mixture(
            &outcome.params,
            &cfg.bounds,
            cfg.grid_samples,
            seed::derive(cfg.seed, &[0x9d]),
        );
        let images = draws
            .iter()
            .map(|d| render_image(&scene, &d.v, &cfg.render))
            .collect::<viewrobust::Result<Vec<_>>>()
            .runtime()?;
        let grid = RenderedImage::tile(&images, cfg.grid_columns).expect("at least one image");
        let mut bytes = Vec::new();
        grid.write_ppm(&mut bytes, &header.lines()).runtime()?;
        out.write_bytes("adversarial_grid.ppm", &bytes)?;
    }
    println!("attack success rate {asr:.4} over {} draws", cfg.eval_samples);
    Ok(())
}

fn attack_planted(
    cfg: &AttackRun,
    planted: crate::config::Planted,
    header: &Header,
    out: &std::path::Path,
) -> CliResult<()> {
    let land = planted.landscape();
    let outcome = run_attack(&land, &land.bounds, &cfg.attack).runtime()?;
    let masses = land.bump_masses(&outcome.params, cfg.eval_samples, seed::derive(cfg.seed, &[0xa5]));
    let covered = masses.iter().filter(|&&m| m >= COVERAGE_MASS).count();
    let out = OutDir::create(out)?;
    write_common(&out, header, &outcome, &land.bounds)?;
    let mut rows = vec![("target".into(), format!("planted_{planted:?}").to_lowercase())];
    rows.extend(final_rows(cfg, &outcome));
    rows.push(("eval_samples".into(), cfg.eval_samples.to_string()));
    for (i, m) in masses.iter().enumerate() {
        rows.push((format!("bump_{i}_mass"), m.to_string()));
    }
    rows.push(("bumps_covered".into(), covered.to_string()));
    out.write_csv("summary.csv", header, &key_value_csv(&rows))?;
    println!("bumps covered {covered} of {}; masses {masses:?}", masses.len());
    Ok(())
}
