//! `train`: optional clean pretraining, then adversarial training with a
//! checkpoint after every epoch.

use std::path::Path;

use serde::{Deserialize, Serialize};
use viewrobust::classifier::{pretrain_clean, ClassifierParams};
use viewrobust::seed;
use viewrobust::viat::{metrics_csv, DistPool, EpochMetrics, TrainSetup, TrainState};

use super::overrides;
use crate::args::TrainArgs;
use crate::config::{self, TrainRun};
use crate::output::{Header, OutDir};
use crate::{config_error, Classify, CliResult};

/// Everything in a checkpoint besides the classifier weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedState {
    pub epoch: usize,
    pub metrics: Vec<EpochMetrics>,
    pub pool: DistPool<f64>,
}

pub fn checkpoint_dir(epoch: usize) -> String {
    format!("checkpoints/epoch_{epoch:03}")
}

fn save_classifier(out: &OutDir, rel: &str, header: &Header, params: &ClassifierParams<f64>) -> CliResult<()> {
    let mut bytes = Vec::new();
    params.write_checkpoint(&mut bytes, &header.text()).runtime()?;
    out.write_bytes(rel, &bytes)?;
    Ok(())
}

fn save_state(out: &OutDir, header: &Header, state: &TrainState<f64>) -> CliResult<()> {
    let dir = checkpoint_dir(state.epoch);
    save_classifier(out, &format!("{dir}/classifier.bin"), header, &state.classifier)?;
    let saved = SavedState {
        epoch: state.epoch,
        metrics: state.metrics.clone(),
        pool: state.pool.clone(),
    };
    out.write_json(&format!("{dir}/pool.json"), header, &saved)?;
    Ok(())
}

fn load_state(dir: &Path, cfg: &TrainRun) -> CliResult<TrainState<f64>> {
    let ckpt = dir.join("classifier.bin");
    let pool = dir.join("pool.json");
    for p in [&ckpt, &pool] {
        if !p.is_file() {
            return Err(config_error(format!(
                "resume checkpoint file not found: {}",
                p.display()
            )));
        }
    }
    let classifier = config::load_classifier(&ckpt, &cfg.render)?;
    let text = std::fs::read_to_string(&pool).config()?;
    let saved: SavedState =
        serde_json::from_str(&text).map_err(|e| config_error(format!("cannot parse {}: {e}", pool.display())))?;
    Ok(TrainState {
        epoch: saved.epoch,
        classifier,
        pool: saved.pool,
        metrics: saved.metrics,
    })
}

pub fn run(args: &TrainArgs) -> CliResult<()> {
    let o = overrides(args.overrides())?;
    let mut cfg: TrainRun = config::load(args.common.config.as_deref(), &o)?;
    cfg.train.seed = cfg.seed;
    cfg.pretrain.seed = seed::derive(cfg.seed, &[0x97]);
    cfg.train.validate().config()?;
    cfg.attack.validate().config()?;
    let dir = cfg
        .scenes
        .clone()
        .ok_or_else(|| config_error("missing scenes directory"))?;
    let scenes = config::load_scenes(&dir)?;
    viewrobust::classifier::class_count(&scenes).config()?;
    let header = Header::new("train", cfg.seed, &cfg, &o);

    let resumed = match &args.resume {
        Some(d) => Some(load_state(d, &cfg)?),
        None => None,
    };
    let initial = match (&resumed, &cfg.checkpoint) {
        (Some(_), _) => None,
        (None, Some(_)) => {
            let p = config::require_file("checkpoint", &cfg.checkpoint)?;
            Some(config::load_classifier(&p, &cfg.render)?)
        }
        (None, None) => None,
    };

    let out = OutDir::create(&args.common.out)?;
    let setup = TrainSetup {
        scenes: &scenes,
        bounds: &cfg.bounds,
        sampler: &cfg.sampler,
        render: &cfg.render,
        train: &cfg.train,
        attack: &cfg.attack,
    };
    let mut state = match resumed {
        Some(s) => s,
        None => {
            let classifier = match initial {
                Some(c) => c,
                None => {
                    let report = pretrain_clean(&scenes, &cfg.sampler, &cfg.render, &cfg.pretrain).runtime()?;
                    println!(
                        "pretrained: train accuracy {:.4}, held-out accuracy {:.4}",
                        report.train_accuracy, report.heldout_accuracy
                    );
                    save_classifier(&out, "pretrained.bin", &header, &report.params)?;
                    report.params
                }
            };
            if cfg.train.epochs == 0 {
                save_classifier(&out, "classifier.bin", &header, &classifier)?;
                out.write_csv("metrics.csv", &header, &metrics_csv(&[]))?;
                return Ok(());
            }
            let s = setup.start(classifier).runtime()?;
            save_state(&out, &header, &s)?;
            s
        }
    };
    if state.epoch > cfg.train.epochs {
        return Err(config_error(format!(
            "checkpoint is at epoch {} but only {} epochs are configured",
            state.epoch, cfg.train.epochs
        )));
    }
    while state.epoch < cfg.train.epochs {
        state = setup.step(&state).runtime()?;
        let m = state.metrics.last().expect("step appends metrics");
        println!(
            "epoch {}: clean {:.4} adv {:.4} entropy {:.3}",
            m.epoch, m.clean_acc, m.adv_acc, m.mean_pool_entropy
        );
        save_state(&out, &header, &state)?;
    }
    save_classifier(&out, "classifier.bin", &header, &state.classifier)?;
    out.write_csv("metrics.csv", &header, &metrics_csv(&state.metrics))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::output::json_with_header;

    #[test]
    fn saved_state_round_trips_through_header_json() {
        let s = SavedState {
            epoch: 2,
            metrics: vec![EpochMetrics {
                epoch: 0,
                clean_acc: 0.5,
                adv_acc: 0.25,
                mean_pool_entropy: 1.0 / 3.0,
            }],
            pool: DistPool { entries: Vec::new() },
        };
        let h = Header::new("train", 1, &TrainRun::default(), &Vec::new());
        let text = json_with_header(&h, &s);
        let back: SavedState = serde_json::from_str(&text).unwrap();
        assert_eq!(back.epoch, 2);
        assert_eq!(back.metrics, s.metrics);
    }

    #[test]
    fn checkpoint_dirs_are_zero_padded() {
        assert_eq!(checkpoint_dir(7), "checkpoints/epoch_007");
    }
}
