//! `certify`: smoothed certification of every scene for one or more checkpoints.

use viewrobust::seed;
use viewrobust::target::RenderedTarget;
use viewrobust::viewrs::{aggregate_acr_ca, certify, CertificationRecord};

use super::overrides;
use crate::args::CertifyArgs;
use crate::config::{self, CertifyRun};
use crate::output::{Header, OutDir};
use crate::{config_error, Classify, CliResult};

pub const RECORDS_HEADER: &str = "model,object_id,class,predicted,pa_lower,radius,correct,clip_fraction\n";
pub const SUMMARY_HEADER: &str = "model,acr,ca,objects\n";

fn record_row(model: usize, object: usize, class: usize, r: &CertificationRecord) -> String {
    let predicted = r.predicted.map_or_else(|| "abstain".to_string(), |p| p.to_string());
    format!(
        "{model},{object},{class},{predicted},{},{},{},{}\n",
        r.pa_lower, r.radius, r.correct, r.clip_fraction
    )
}

pub fn run(args: &CertifyArgs) -> CliResult<()> {
    let o = overrides(args.overrides())?;
    let mut cfg: CertifyRun = config::load(args.common.config.as_deref(), &o)?;
    cfg.smoothing.seed = cfg.seed;
    cfg.smoothing.validate().config()?;
    let dir = cfg
        .scenes
        .clone()
        .ok_or_else(|| config_error("missing scenes directory"))?;
    let scenes = config::load_scenes(&dir)?;
    if cfg.checkpoints.is_empty() {
        return Err(config_error("no checkpoint to certify"));
    }
    let models = cfg
        .checkpoints
        .iter()
        .map(|p| {
            config::require_file("checkpoint", &Some(p.clone())).and_then(|p| config::load_classifier(&p, &cfg.render))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let header = Header::new("certify", cfg.seed, &cfg, &o);

    let mut records_csv = String::from(RECORDS_HEADER);
    let mut summary_csv = String::from(SUMMARY_HEADER);
    for (m, classifier) in models.iter().enumerate() {
        let mut records = Vec::with_capacity(scenes.len());
        for (i, scene) in scenes.iter().enumerate() {
            if scene.label >= classifier.num_classes() {
                return Err(config_error(format!(
                    "scene {i} label {} out of the classifier's range",
                    scene.label
                )));
            }
            let target = RenderedTarget::new(scene, classifier, &cfg.render);
            let smoothing = viewrobust::viewrs::SmoothingConfig {
                seed: seed::derive(cfg.seed, &[i as u64]),
                ..cfg.smoothing.clone()
            };
            let r = certify(&target, classifier.num_classes(), scene.label, &cfg.bounds, &smoothing).runtime()?;
            records_csv.push_str(&record_row(m, i, scene.label, &r));
            records.push(r);
        }
        let (acr, ca) = aggregate_acr_ca(&records).runtime()?;
        summary_csv.push_str(&format!("{m},{acr},{ca},{}\n", records.len()));
        println!("model {m} ({}): ACR {acr:.4} CA {ca:.4}", cfg.checkpoints[m].display());
    }
    let out = OutDir::create(&args.common.out)?;
    out.write_csv("certify.csv", &header, &records_csv)?;
    out.write_csv("summary.csv", &header, &summary_csv)?;
    Ok(())
}
