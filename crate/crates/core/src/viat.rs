//! Adversarial training against a pool of per-object viewpoint distributions.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::classifier::{natural_examples, ClassifierParams, Example, NaturalSampler};
use crate::error::{Error, Result};
use crate::geometry::ViewBounds;
use crate::gmvfool::{run_attack, run_attack_from, AttackConfig};
use crate::render::{render_image, RenderConfig, Scene};
use crate::scalar::Real;
use crate::seed;
use crate::target::RenderedTarget;
use crate::viewdist::{entropy_estimate, sample_mixture, MixtureParams};

/// Attack distribution of one training object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PoolEntry<T: Real> {
    pub class: usize,
    /// Index of the object among the objects of its class.
    pub object: usize,
    /// Index into the scene list.
    pub scene: usize,
    pub params: MixtureParams<T>,
    /// Cumulative inner attack iterations applied to `params`.
    pub counter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DistPool<T: Real> {
    pub entries: Vec<PoolEntry<T>>,
}

impl<T: Real> DistPool<T> {
    /// Entry indices belonging to `class`, in object order.
    pub fn class_members(&self, class: usize) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.class == class)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn classes(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.entries.iter().map(|e| e.class).collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn find(&self, class: usize, object: usize) -> Option<usize> {
        self.entries.iter().position(|e| e.class == class && e.object == object)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub init_iterations: usize,
    pub epoch_iterations: usize,
    /// Fraction of each class's objects whose distributions are refreshed per epoch.
    pub update_fraction: f64,
    /// Probability of training on an object's own distribution rather than a classmate's.
    pub share_prob: f64,
    /// Adversarial:clean ratio within a minibatch.
    pub adv_ratio: (usize, usize),
    pub batch_size: usize,
    pub batches_per_epoch: usize,
    pub eta: f64,
    /// Natural views per scene in the fixed clean evaluation set.
    pub eval_clean_views: usize,
    /// Pool draws per object for the adversarial accuracy log.
    pub eval_adv_views: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            init_iterations: 50,
            epoch_iterations: 10,
            update_fraction: 0.5,
            share_prob: 0.5,
            adv_ratio: (1, 32),
            batch_size: 33,
            batches_per_epoch: 4,
            eta: 0.01,
            eval_clean_views: 8,
            eval_adv_views: 16,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.update_fraction > 0.0 && self.update_fraction <= 1.0) {
            return Err(Error::validation(
                "update_fraction",
                format!("{} not in (0, 1]", self.update_fraction),
            ));
        }
        if !(0.0..=1.0).contains(&self.share_prob) {
            return Err(Error::validation(
                "share_prob",
                format!("{} not in [0, 1]", self.share_prob),
            ));
        }
        if self.adv_ratio.0 + self.adv_ratio.1 == 0 || self.adv_ratio.1 == 0 {
            return Err(Error::validation("adv_ratio", "clean part must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size", "must be >= 1"));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::validation("eta", format!("{} must be >= 0", self.eta)));
        }
        if self.init_iterations == 0 || self.epoch_iterations == 0 {
            return Err(Error::validation("iterations", "inner iteration counts must be >= 1"));
        }
        if self.eval_clean_views == 0 || self.eval_adv_views == 0 {
            return Err(Error::validation("eval views", "must be >= 1"));
        }
        Ok(())
    }

    /// `(adversarial, clean)` counts for one minibatch.
    pub fn batch_split(&self) -> (usize, usize) {
        let (a, c) = self.adv_ratio;
        let adv = (self.batch_size as f64 * a as f64 / (a + c) as f64).round() as usize;
        (adv, self.batch_size - adv)
    }
}

/// Per-class object indices within the scene list, in scene order.
pub fn objects_by_class<T: Real>(scenes: &[Scene<T>]) -> Vec<Vec<usize>> {
    let classes = scenes.iter().map(|s| s.label + 1).max().unwrap_or(0);
    let mut out = vec![Vec::new(); classes];
    for (i, s) in scenes.iter().enumerate() {
        out[s.label].push(i);
    }
    out
}

/// Splits objects of every class into `(train, validation)` scene indices.
/// Validation receives `floor(n_c / (train_parts + 1))` objects per class.
pub fn split_objects<T: Real>(scenes: &[Scene<T>], train_parts: usize, rng_seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (c, mut members) in objects_by_class(scenes).into_iter().enumerate() {
        members.shuffle(&mut seed::rng_for(rng_seed, &[c as u64]));
        let n_val = members.len() / (train_parts + 1);
        val.extend_from_slice(&members[..n_val]);
        train.extend_from_slice(&members[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Runs a fresh attack with `attack.iterations` steps against every scene.
pub fn init_dist_pool<T: Real>(
    scenes: &[Scene<T>],
    classifier: &ClassifierParams<T>,
    bounds: &ViewBounds<T>,
    render: &RenderConfig<T>,
    attack: &AttackConfig,
) -> Result<DistPool<T>> {
    let mut entries = Vec::with_capacity(scenes.len());
    let mut next_object = vec![0usize; scenes.iter().map(|s| s.label + 1).max().unwrap_or(0)];
    for (i, scene) in scenes.iter().enumerate() {
        let target = RenderedTarget::new(scene, classifier, render);
        let cfg = AttackConfig {
            seed: seed::derive(attack.seed, &[i as u64]),
            ..attack.clone()
        };
        let out = run_attack(&target, bounds, &cfg)?;
        entries.push(PoolEntry {
            class: scene.label,
            object: next_object[scene.label],
            scene: i,
            params: out.params,
            counter: attack.iterations,
        });
        next_object[scene.label] += 1;
    }
    Ok(DistPool { entries })
}

/// Entry indices refreshed in one epoch: `max(1, round(fraction · n_c))` per class.
pub fn select_for_update<T: Real>(pool: &DistPool<T>, fraction: f64, rng_seed: u64) -> Vec<usize> {
    let mut chosen = Vec::new();
    for c in pool.classes() {
        let mut members = pool.class_members(c);
        let m = ((fraction * members.len() as f64).round() as usize).clamp(1, members.len());
        let mut rng = seed::rng_for(rng_seed, &[c as u64]);
        members.shuffle(&mut rng);
        chosen.extend_from_slice(&members[..m]);
    }
    chosen.sort_unstable();
    chosen
}

/// Warm-started attack on a per-class random subset of the pool against the
/// current classifier. Unselected entries are left untouched.
#[allow(clippy::too_many_arguments)]
pub fn stochastic_inner_update<T: Real>(
    pool: &DistPool<T>,
    scenes: &[Scene<T>],
    classifier: &ClassifierParams<T>,
    bounds: &ViewBounds<T>,
    render: &RenderConfig<T>,
    attack: &AttackConfig,
    epoch_seed: u64,
    fraction: f64,
    iterations: usize,
) -> Result<DistPool<T>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("update fraction {fraction} not in (0, 1]")));
    }
    let mut next = pool.clone();
    for i in select_for_update(pool, fraction, seed::derive(epoch_seed, &[0])) {
        let e = &pool.entries[i];
        let target = RenderedTarget::new(&scenes[e.scene], classifier, render);
        let cfg = AttackConfig {
            iterations,
            seed: seed::derive(epoch_seed, &[1, i as u64]),
            ..attack.clone()
        };
        let out = run_attack_from(&target, bounds, &cfg, e.params.clone())?;
        next.entries[i].params = out.params;
        next.entries[i].counter += iterations;
    }
    Ok(next)
}

/// The object's own distribution with probability `pi`, otherwise a uniformly
/// chosen classmate's.
pub fn choose_shared_dist<'a, T: Real>(
    pool: &'a DistPool<T>,
    class: usize,
    object: usize,
    pi: f64,
    rng: &mut seed::Rng,
) -> Result<&'a MixtureParams<T>> {
    let own = pool
        .find(class, object)
        .ok_or_else(|| Error::invalid(format!("no pool entry for class {class}, object {object}")))?;
    let draw: f64 = rng.random();
    if draw < pi {
        return Ok(&pool.entries[own].params);
    }
    let others: Vec<usize> = pool.class_members(class).into_iter().filter(|&i| i != own).collect();
    match others.choose(rng) {
        Some(&i) => Ok(&pool.entries[i].params),
        None => {
            log::debug!("class {class} has a single object; sharing falls back to its own distribution");
            Ok(&pool.entries[own].params)
        }
    }
}

/// Mixed minibatch: adversarial renders from shared pool distributions plus
/// natural-viewpoint renders, in the configured ratio.
#[allow(clippy::too_many_arguments)]
pub fn assemble_minibatch<T: Real>(
    pool: &DistPool<T>,
    scenes: &[Scene<T>],
    sampler: &NaturalSampler<T>,
    bounds: &ViewBounds<T>,
    render: &RenderConfig<T>,
    config: &TrainConfig,
    rng: &mut seed::Rng,
) -> Result<Vec<Example<T>>> {
    if pool.entries.is_empty() {
        return Err(Error::invalid("empty distribution pool"));
    }
    let (n_adv, n_clean) = config.batch_split();
    let mut jobs = Vec::with_capacity(n_adv + n_clean);
    for _ in 0..n_adv {
        let e = &pool.entries[rng.random_range(0..pool.entries.len())];
        let params = choose_shared_dist(pool, e.class, e.object, config.share_prob, rng)?;
        let draw_seed: u64 = rng.random();
        let v = sample_mixture(params, bounds, 1, draw_seed)[0].v;
        jobs.push((e.scene, v));
    }
    for _ in 0..n_clean {
        let s = rng.random_range(0..scenes.len());
        jobs.push((s, sampler.sample(scenes[s].label, rng)));
    }
    use rayon::prelude::*;
    jobs.par_iter()
        .map(|(s, v)| {
            Ok(Example {
                input: render_image(&scenes[*s], v, render)?.pixels,
                label: scenes[*s].label,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub clean_acc: f64,
    pub adv_acc: f64,
    pub mean_pool_entropy: f64,
}

pub fn metrics_csv(rows: &[EpochMetrics]) -> String {
    let mut s = String::from("epoch,clean_acc,adv_acc,mean_pool_entropy\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.epoch, r.clean_acc, r.adv_acc, r.mean_pool_entropy
        ));
    }
    s
}

/// Everything needed to continue training after any completed epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState<T: Real> {
    /// Number of completed epochs.
    pub epoch: usize,
    pub classifier: ClassifierParams<T>,
    pub pool: DistPool<T>,
    pub metrics: Vec<EpochMetrics>,
}

/// Fixed inputs of a training run.
#[derive(Debug, Clone, Copy)]
pub struct TrainSetup<'a, T: Real> {
    pub scenes: &'a [Scene<T>],
    pub bounds: &'a ViewBounds<T>,
    pub sampler: &'a NaturalSampler<T>,
    pub render: &'a RenderConfig<T>,
    pub train: &'a TrainConfig,
    pub attack: &'a AttackConfig,
}

impl<'a, T: Real> TrainSetup<'a, T> {
    fn clean_eval_set(&self) -> Result<Vec<Example<T>>> {
        natural_examples(
            self.scenes,
            self.sampler,
            self.render,
            self.train.eval_clean_views,
            seed::derive(self.train.seed, &[0xc1ea]),
        )
    }

    fn adv_accuracy(&self, classifier: &ClassifierParams<T>, pool: &DistPool<T>, epoch: usize) -> Result<f64> {
        let mut examples = Vec::new();
        for (i, e) in pool.entries.iter().enumerate() {
            let draws = sample_mixture(
                &e.params,
                self.bounds,
                self.train.eval_adv_views,
                seed::derive(self.train.seed, &[0xad, epoch as u64, i as u64]),
            );
            for d in draws {
                examples.push((e.scene, d.v));
            }
        }
        use rayon::prelude::*;
        let hits = examples
            .par_iter()
            .map(|(s, v)| {
                let img = render_image(&self.scenes[*s], v, self.render)?;
                Ok(usize::from(classifier.predict(&img.pixels)? == self.scenes[*s].label))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(hits.iter().sum::<usize>() as f64 / hits.len() as f64)
    }

    fn pool_entropy(&self, pool: &DistPool<T>, epoch: usize) -> Result<f64> {
        let mut total = 0.0;
        for (i, e) in pool.entries.iter().enumerate() {
            let h = entropy_estimate(
                &e.params,
                self.bounds,
                self.attack.entropy_samples,
                seed::derive(self.train.seed, &[0xe7, epoch as u64, i as u64]),
            )?;
            total += h.mean.as_f64();
        }
        Ok(total / pool.entries.len() as f64)
    }

    fn metrics(
        &self,
        classifier: &ClassifierParams<T>,
        pool: &DistPool<T>,
        clean: &[Example<T>],
        epoch: usize,
    ) -> Result<EpochMetrics> {
        Ok(EpochMetrics {
            epoch,
            clean_acc: classifier.accuracy(clean)?,
            adv_acc: self.adv_accuracy(classifier, pool, epoch)?,
            mean_pool_entropy: self.pool_entropy(pool, epoch)?,
        })
    }

    /// Builds the initial pool against `classifier` and logs epoch-0 metrics.
    pub fn start(&self, classifier: ClassifierParams<T>) -> Result<TrainState<T>> {
        self.train.validate()?;
        self.attack.validate()?;
        crate::classifier::class_count(self.scenes)?;
        let init_attack = AttackConfig {
            iterations: self.train.init_iterations,
            seed: seed::derive(self.train.seed, &[0x1a]),
            ..self.attack.clone()
        };
        let pool = init_dist_pool(self.scenes, &classifier, self.bounds, self.render, &init_attack)?;
        let clean = self.clean_eval_set()?;
        let m0 = self.metrics(&classifier, &pool, &clean, 0)?;
        Ok(TrainState {
            epoch: 0,
            classifier,
            pool,
            metrics: vec![m0],
        })
    }

    /// Runs one epoch: refresh part of the pool, then the classifier updates.
    pub fn step(&self, state: &TrainState<T>) -> Result<TrainState<T>> {
        let epoch = state.epoch + 1;
        let epoch_seed = seed::derive(self.train.seed, &[0xe0, epoch as u64]);
        let pool = stochastic_inner_update(
            &state.pool,
            self.scenes,
            &state.classifier,
            self.bounds,
            self.render,
            self.attack,
            epoch_seed,
            self.train.update_fraction,
            self.train.epoch_iterations,
        )?;
        let mut classifier = state.classifier.clone();
        let mut rng = seed::rng_for(epoch_seed, &[2]);
        let eta = T::lit(self.train.eta);
        for _ in 0..self.train.batches_per_epoch {
            let batch = assemble_minibatch(
                &pool,
                self.scenes,
                self.sampler,
                self.bounds,
                self.render,
                self.train,
                &mut rng,
            )?;
            classifier = classifier.backward_update(&batch, eta)?.0;
        }
        let clean = self.clean_eval_set()?;
        let m = self.metrics(&classifier, &pool, &clean, epoch)?;
        log::info!(
            "epoch {epoch}: clean {:.3} adv {:.3} entropy {:.3}",
            m.clean_acc,
            m.adv_acc,
            m.mean_pool_entropy
        );
        let mut metrics = state.metrics.clone();
        metrics.push(m);
        Ok(TrainState {
            epoch,
            classifier,
            pool,
            metrics,
        })
    }
}

/// Full training loop from a pretrained classifier.
pub fn viat_train<T: Real>(setup: &TrainSetup<'_, T>, classifier: ClassifierParams<T>) -> Result<TrainState<T>> {
    if setup.train.epochs == 0 {
        return Ok(TrainState {
            epoch: 0,
            classifier,
            pool: DistPool { entries: Vec::new() },
            metrics: Vec::new(),
        });
    }
    let mut state = setup.start(classifier)?;
    while state.epoch < setup.train.epochs {
        state = setup.step(&state)?;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Viewpoint;
    use crate::render::Primitive;

    fn pool_of(objects_per_class: &[usize]) -> DistPool<f64> {
        let mut entries = Vec::new();
        let mut scene = 0;
        for (c, &n) in objects_per_class.iter().enumerate() {
            for j in 0..n {
                let mut p = MixtureParams::single([0.0; 6], 0.5);
                // tag each entry so identity is visible
                p.mu[0][0] = (c * 100 + j) as f64;
                entries.push(PoolEntry {
                    class: c,
                    object: j,
                    scene,
                    params: p,
                    counter: 3,
                });
                scene += 1;
            }
        }
        DistPool { entries }
    }

    fn tag(p: &MixtureParams<f64>) -> (usize, usize) {
        let t = p.mu[0][0] as usize;
        (t / 100, t % 100)
    }

    #[test]
    fn sharing_extremes() {
        let pool = pool_of(&[3, 2]);
        let mut rng = seed::rng(1);
        for _ in 0..1000 {
            assert_eq!(tag(choose_shared_dist(&pool, 0, 1, 1.0, &mut rng).unwrap()), (0, 1));
            let other = tag(choose_shared_dist(&pool, 0, 1, 0.0, &mut rng).unwrap());
            assert_eq!(other.0, 0);
            assert_ne!(other.1, 1);
        }
    }

    #[test]
    fn sharing_frequency_and_class_purity() {
        let pool = pool_of(&[4, 3, 1]);
        let mut rng = seed::rng(2);
        let trials = 100_000;
        let mut own = 0;
        for t in 0..trials {
            let class = t % 2;
            let p = tag(choose_shared_dist(&pool, class, 0, 0.5, &mut rng).unwrap());
            assert_eq!(p.0, class);
            own += usize::from(p.1 == 0);
        }
        let f = own as f64 / trials as f64;
        assert!((0.49..=0.51).contains(&f), "{f}");
        // single-object class falls back to itself
        assert_eq!(tag(choose_shared_dist(&pool, 2, 0, 0.0, &mut rng).unwrap()), (2, 0));
        assert!(choose_shared_dist(&pool, 5, 0, 0.5, &mut rng).is_err());
    }

    #[test]
    fn selection_counts() {
        let pool = pool_of(&[10, 10, 3]);
        let sel = select_for_update(&pool, 0.5, 7);
        for (c, want) in [(0, 5), (1, 5), (2, 2)] {
            assert_eq!(sel.iter().filter(|&&i| pool.entries[i].class == c).count(), want);
        }
        assert_eq!(sel, select_for_update(&pool, 0.5, 7));
        assert_eq!(select_for_update(&pool, 1.0, 7).len(), 23);
        assert_eq!(select_for_update(&pool_of(&[1]), 0.1, 7).len(), 1);
    }

    #[test]
    fn batch_split_arithmetic() {
        let mut cfg = TrainConfig::default();
        assert_eq!(cfg.batch_split(), (1, 32));
        cfg.adv_ratio = (1, 1);
        cfg.batch_size = 8;
        assert_eq!(cfg.batch_split(), (4, 4));
    }

    #[test]
    fn split_nine_to_one() {
        let scenes: Vec<Scene<f64>> = (0..23)
            .map(|i| Scene {
                label: usize::from(i >= 20),
                ..Scene::empty([0.0; 3], 1.0, 2.0)
            })
            .collect();
        let (train, val) = split_objects(&scenes, 9, 1);
        assert_eq!(val.len(), 2);
        assert_eq!(train.len(), 21);
        assert!(val.iter().all(|&i| i < 20));
    }

    fn tiny_world() -> (Vec<Scene<f64>>, RenderConfig<f64>) {
        let mk = |label: usize, color: [f64; 3]| Scene {
            primitives: vec![Primitive::sphere([0.0; 3], 0.8, 20.0, color)],
            label,
            ..Scene::empty([0.0; 3], 2.0, 6.0)
        };
        let scenes = vec![
            mk(0, [1.0, 0.0, 0.0]),
            mk(0, [0.9, 0.1, 0.0]),
            mk(1, [0.0, 0.0, 1.0]),
            mk(1, [0.0, 0.1, 0.9]),
        ];
        let render = RenderConfig {
            width: 6,
            height: 6,
            m_samples: 8,
            ..RenderConfig::default()
        };
        (scenes, render)
    }

    #[test]
    fn minibatch_contents() {
        let (scenes, render) = tiny_world();
        let pool = pool_of(&[2, 2]);
        let cfg = TrainConfig {
            adv_ratio: (1, 1),
            batch_size: 8,
            ..Default::default()
        };
        let b = ViewBounds::standard();
        let batch = assemble_minibatch(
            &pool,
            &scenes,
            &NaturalSampler::default(),
            &b,
            &render,
            &cfg,
            &mut seed::rng(3),
        )
        .unwrap();
        assert_eq!(batch.len(), 8);
        assert!(batch.iter().all(|e| e.input.len() == 108));
        for e in &batch {
            assert!(e.label < 2);
        }
    }

    #[test]
    fn pool_construction_and_round_trip() {
        let (scenes, render) = tiny_world();
        let clf = ClassifierParams::random(&[108, 4, 2], 1).unwrap();
        let b = ViewBounds::standard()
            .freeze_except(&[0, 2], &Viewpoint::natural())
            .unwrap();
        let attack = AttackConfig {
            iterations: 2,
            samples: 4,
            k: 2,
            ..Default::default()
        };
        let pool = init_dist_pool(&scenes, &clf, &b, &render, &attack).unwrap();
        assert_eq!(pool.entries.len(), 4);
        assert!(pool.entries.iter().all(|e| e.counter == 2));
        assert_eq!(pool.entries[3].object, 1);
        let text = serde_json::to_string(&pool).unwrap();
        let back: DistPool<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, pool);

        let next = stochastic_inner_update(&pool, &scenes, &clf, &b, &render, &attack, 5, 0.5, 3).unwrap();
        let sel = select_for_update(&pool, 0.5, seed::derive(5, &[0]));
        assert_eq!(sel.len(), 2);
        for (i, (before, after)) in pool.entries.iter().zip(&next.entries).enumerate() {
            if sel.contains(&i) {
                assert_eq!(after.counter, 5);
            } else {
                assert_eq!(before, after);
            }
        }
    }

    #[test]
    fn zero_epochs_returns_input() {
        let (scenes, render) = tiny_world();
        let clf = ClassifierParams::random(&[108, 4, 2], 1).unwrap();
        let b = ViewBounds::standard();
        let train = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let attack = AttackConfig::default();
        let setup = TrainSetup {
            scenes: &scenes,
            bounds: &b,
            sampler: &NaturalSampler::default(),
            render: &render,
            train: &train,
            attack: &attack,
        };
        assert_eq!(viat_train(&setup, clf.clone()).unwrap().classifier, clf);
    }

    #[test]
    fn training_is_reproducible() {
        let (scenes, render) = tiny_world();
        let clf = ClassifierParams::random(&[108, 4, 2], 1).unwrap();
        let b = ViewBounds::standard()
            .freeze_except(&[0, 2], &Viewpoint::natural())
            .unwrap();
        let train = TrainConfig {
            epochs: 2,
            init_iterations: 2,
            epoch_iterations: 1,
            batch_size: 6,
            adv_ratio: (1, 2),
            batches_per_epoch: 2,
            eval_clean_views: 2,
            eval_adv_views: 2,
            ..Default::default()
        };
        let attack = AttackConfig {
            samples: 4,
            k: 2,
            entropy_samples: 20,
            ..Default::default()
        };
        let setup = TrainSetup {
            scenes: &scenes,
            bounds: &b,
            sampler: &NaturalSampler::default(),
            render: &render,
            train: &train,
            attack: &attack,
        };
        let a = viat_train(&setup, clf.clone()).unwrap();
        let c = viat_train(&setup, clf.clone()).unwrap();
        assert_eq!(a, c);
        assert_eq!(a.metrics.len(), 3);
        assert_eq!(metrics_csv(&a.metrics), metrics_csv(&c.metrics));
        // stepping epoch by epoch from a stored state reproduces the full run
        let s1 = setup.step(&setup.start(clf).unwrap()).unwrap();
        let stored = s1.clone();
        assert_eq!(setup.step(&stored).unwrap(), a);
    }
}
