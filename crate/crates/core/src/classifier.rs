//! Small fully connected softmax classifier with exact backpropagation.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ViewBounds, Viewpoint, VIEW_DIM};
use crate::render::{render_image, RenderConfig, Scene};
use crate::scalar::Real;
use crate::seed;

/// Dense layer, `weights` row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T: Real> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Layer<T> {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    #[inline]
    fn apply(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.bias)
                .map(|(row, b)| *b + dot(row, x)),
        );
    }
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    // four accumulators let the compiler vectorize the reduction
    let mut acc = [T::zero(); 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += *x * *y;
    }
    s
}

/// Weights of an MLP with tanh hidden units and a softmax output.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams<T: Real> {
    pub layers: Vec<Layer<T>>,
}

/// Labeled network input.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T: Real> {
    pub input: Vec<T>,
    pub label: usize,
}

pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// `−log softmax(logits)[label]`, computed stably.
pub fn cross_entropy_from_logits<T: Real>(logits: &[T], label: usize) -> Result<T> {
    if label >= logits.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<T>().ln();
    Ok((lse - logits[label]).max(T::zero()))
}

impl<T: Real> ClassifierParams<T> {
    /// All-zero weights; outputs the uniform distribution.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        Self::check_sizes(sizes)?;
        Ok(Self {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random(sizes: &[usize], rng_seed: u64) -> Result<Self> {
        let mut p = Self::zeros(sizes)?;
        let mut rng = seed::rng(rng_seed);
        for l in &mut p.layers {
            let limit = (6.0 / (l.inputs + l.outputs) as f64).sqrt();
            for w in &mut l.weights {
                *w = T::lit(rng.random_range(-limit..limit));
            }
        }
        Ok(p)
    }

    fn check_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(())
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_len()];
        s.extend(self.layers.iter().map(|l| l.outputs));
        s
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs
    }

    pub fn num_weights(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(Error::Dimension {
                expected: self.input_len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            l.apply(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|z| *z = z.tanh());
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Class probabilities.
    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(softmax(&self.logits(x)?))
    }

    pub fn predict(&self, x: &[T]) -> Result<usize> {
        let z = self.logits(x)?;
        Ok(argmax(&z))
    }

    pub fn loss(&self, x: &[T], label: usize) -> Result<T> {
        cross_entropy_from_logits(&self.logits(x)?, label)
    }

    /// Summed cross-entropy over `batch` and its gradient (same layout as `self`).
    pub fn loss_and_gradient(&self, batch: &[Example<T>]) -> Result<(T, ClassifierParams<T>)> {
        let nc = self.num_classes();
        for ex in batch {
            self.check_input(&ex.input)?;
            if ex.label >= nc {
                return Err(Error::invalid(format!(
                    "label {} out of range for {nc} classes",
                    ex.label
                )));
            }
        }
        let sizes = self.sizes();
        let per_example: Vec<(T, ClassifierParams<T>)> =
            batch.par_iter().map(|ex| self.example_gradient(ex, &sizes)).collect();
        let mut grad = ClassifierParams::zeros(&sizes)?;
        let mut total = T::zero();
        for (loss, g) in per_example {
            total += loss;
            for (acc, gl) in grad.layers.iter_mut().zip(&g.layers) {
                acc.weights.iter_mut().zip(&gl.weights).for_each(|(a, b)| *a += *b);
                acc.bias.iter_mut().zip(&gl.bias).for_each(|(a, b)| *a += *b);
            }
        }
        Ok((total, grad))
    }

    fn example_gradient(&self, ex: &Example<T>, sizes: &[usize]) -> (T, ClassifierParams<T>) {
        let last = self.layers.len() - 1;
        // activations[0] is the input, activations[i + 1] the output of layer i
        let mut activations: Vec<Vec<T>> = vec![ex.input.clone()];
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            l.apply(activations.last().unwrap(), &mut z);
            if i < last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            activations.push(z);
        }
        let logits = activations.last().unwrap();
        let loss = cross_entropy_from_logits(logits, ex.label).expect("label checked");
        let mut delta = softmax(logits);
        delta[ex.label] -= T::one();

        let mut grad = ClassifierParams::zeros(sizes).expect("sizes valid");
        for i in (0..=last).rev() {
            let l = &self.layers[i];
            let a_prev = &activations[i];
            let g = &mut grad.layers[i];
            for (o, d) in delta.iter().enumerate() {
                g.bias[o] = *d;
                let row = &mut g.weights[o * l.inputs..(o + 1) * l.inputs];
                row.iter_mut().zip(a_prev).for_each(|(w, a)| *w = *d * *a);
            }
            if i > 0 {
                let mut back = vec![T::zero(); l.inputs];
                for (o, d) in delta.iter().enumerate() {
                    let row = &l.weights[o * l.inputs..(o + 1) * l.inputs];
                    back.iter_mut().zip(row).for_each(|(b, w)| *b += *d * *w);
                }
                for (b, a) in back.iter_mut().zip(a_prev) {
                    *b *= T::one() - *a * *a;
                }
                delta = back;
            }
        }
        (loss, grad)
    }

    /// One SGD step on the summed batch cross-entropy. Returns the updated
    /// weights and the batch loss before the step.
    pub fn backward_update(&self, batch: &[Example<T>], eta: T) -> Result<(ClassifierParams<T>, T)> {
        if batch.is_empty() {
            return Err(Error::invalid("empty training batch"));
        }
        let (loss, grad) = self.loss_and_gradient(batch)?;
        let mut next = self.clone();
        for (l, g) in next.layers.iter_mut().zip(&grad.layers) {
            l.weights.iter_mut().zip(&g.weights).for_each(|(w, d)| *w -= eta * *d);
            l.bias.iter_mut().zip(&g.bias).for_each(|(b, d)| *b -= eta * *d);
        }
        Ok((next, loss))
    }

    pub fn accuracy(&self, examples: &[Example<T>]) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::invalid("accuracy of an empty set"));
        }
        let hits = examples
            .par_iter()
            .map(|e| self.predict(&e.input).map(|p| usize::from(p == e.label)))
            .collect::<Result<Vec<_>>>()?;
        Ok(hits.iter().sum::<usize>() as f64 / examples.len() as f64)
    }
}

pub fn argmax<T: Real>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"VRCLSF\0\0";
const CHECKPOINT_VERSION: u32 = 1;

impl<T: Real> ClassifierParams<T> {
    /// Versioned little-endian checkpoint. `header` is stored verbatim
    /// (typically JSON run metadata). Weights are widened to `f64`.
    pub fn write_checkpoint(&self, w: &mut impl Write, header: &str) -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(header.as_bytes())?;
        w.write_all(&(self.layers.len() as u64).to_le_bytes())?;
        for l in &self.layers {
            w.write_all(&(l.inputs as u64).to_le_bytes())?;
            w.write_all(&(l.outputs as u64).to_le_bytes())?;
            for x in l.weights.iter().chain(&l.bias) {
                w.write_all(&x.as_f64().to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a checkpoint, returning the weights and the stored header.
    pub fn read_checkpoint(r: &mut impl Read) -> Result<(Self, String)> {
        fn bad(reason: impl Into<String>) -> Error {
            Error::Parse {
                path: "<checkpoint>".into(),
                reason: reason.into(),
            }
        }
        let io = |e: std::io::Error| bad(e.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(bad("not a classifier checkpoint"));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4).map_err(io)?;
        let version = u32::from_le_bytes(b4);
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported checkpoint version {version}")));
        }
        let read_u64 = |r: &mut dyn Read| -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(io)?;
            Ok(u64::from_le_bytes(b))
        };
        let hlen = read_u64(r)? as usize;
        let mut header = vec![0u8; hlen];
        r.read_exact(&mut header).map_err(io)?;
        let header = String::from_utf8(header).map_err(|e| bad(e.to_string()))?;
        let n_layers = read_u64(r)? as usize;
        let mut layers = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let inputs = read_u64(r)? as usize;
            let outputs = read_u64(r)? as usize;
            let mut l = Layer::zeros(inputs, outputs);
            for x in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                r.read_exact(&mut b8).map_err(io)?;
                let v = f64::from_le_bytes(b8);
                if !v.is_finite() {
                    return Err(bad("non-finite weight"));
                }
                *x = T::lit(v);
            }
            layers.push(l);
        }
        if layers.is_empty() || layers.windows(2).any(|w| w[0].outputs != w[1].inputs) {
            return Err(bad("inconsistent layer shapes"));
        }
        Ok((Self { layers }, header))
    }

    pub fn save(&self, path: &Path, header: &str) -> Result<()> {
        let mut buf = Vec::new();
        self.write_checkpoint(&mut buf, header).expect("in-memory write");
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_checkpoint(&mut bytes.as_slice()).map_err(|e| match e {
            Error::Parse { reason, .. } => Error::Parse {
                path: path.to_path_buf(),
                reason,
            },
            other => other,
        })
    }
}

/// Draws natural viewpoints: a per-class nominal pose plus uniform jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(default, deny_unknown_fields)]
pub struct NaturalSampler<T: Real> {
    /// Nominal viewpoint per class; classes beyond the list use the last entry.
    pub nominal: Vec<Viewpoint<T>>,
    /// Half-width of the jitter on the three angles, degrees.
    pub angle_jitter: T,
    /// Half-width of the jitter on the three translations.
    pub translation_jitter: T,
    pub bounds: ViewBounds<T>,
}

impl<T: Real> Default for NaturalSampler<T> {
    fn default() -> Self {
        Self {
            nominal: vec![Viewpoint::natural()],
            angle_jitter: T::lit(4.0),
            translation_jitter: T::lit(0.05),
            bounds: ViewBounds::standard(),
        }
    }
}

impl<T: Real> NaturalSampler<T> {
    pub fn nominal_for(&self, class: usize) -> Viewpoint<T> {
        self.nominal
            .get(class)
            .or(self.nominal.last())
            .copied()
            .unwrap_or_else(Viewpoint::natural)
    }

    pub fn sample(&self, class: usize, rng: &mut seed::Rng) -> Viewpoint<T> {
        let base = self.nominal_for(class).to_array();
        let v: [T; VIEW_DIM] = std::array::from_fn(|i| {
            let half = if i < 3 {
                self.angle_jitter
            } else {
                self.translation_jitter
            };
            let u: f64 = rng.random_range(-1.0..=1.0);
            base[i] + half * T::lit(u)
        });
        self.bounds.clamp(&Viewpoint::from_array(v))
    }
}

/// Renders `views_per_scene` natural views of every scene.
pub fn natural_examples<T: Real>(
    scenes: &[Scene<T>],
    sampler: &NaturalSampler<T>,
    render: &RenderConfig<T>,
    views_per_scene: usize,
    rng_seed: u64,
) -> Result<Vec<Example<T>>> {
    let jobs: Vec<(usize, Viewpoint<T>)> = scenes
        .iter()
        .enumerate()
        .flat_map(|(si, s)| {
            let mut rng = seed::rng_for(rng_seed, &[si as u64]);
            (0..views_per_scene)
                .map(|_| (si, sampler.sample(s.label, &mut rng)))
                .collect::<Vec<_>>()
        })
        .collect();
    jobs.par_iter()
        .map(|(si, v)| {
            let img = render_image(&scenes[*si], v, render)?;
            Ok(Example {
                input: img.pixels,
                label: scenes[*si].label,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub eta: f64,
    pub batch_size: usize,
    pub views_per_scene: usize,
    pub heldout_views_per_scene: usize,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 64],
            epochs: 30,
            eta: 0.01,
            batch_size: 16,
            views_per_scene: 24,
            heldout_views_per_scene: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PretrainReport<T: Real> {
    pub params: ClassifierParams<T>,
    pub train_accuracy: f64,
    pub heldout_accuracy: f64,
    pub epoch_losses: Vec<f64>,
}

/// Number of classes implied by scene labels, checking every class has a scene.
pub fn class_count<T: Real>(scenes: &[Scene<T>]) -> Result<usize> {
    let c = scenes.iter().map(|s| s.label + 1).max().unwrap_or(0);
    if c < 2 {
        return Err(Error::invalid("need scenes from at least two classes"));
    }
    for class in 0..c {
        if !scenes.iter().any(|s| s.label == class) {
            return Err(Error::invalid(format!("class {class} has no scene")));
        }
    }
    Ok(c)
}

/// Trains a classifier from scratch on natural-viewpoint renders.
pub fn pretrain_clean<T: Real>(
    scenes: &[Scene<T>],
    sampler: &NaturalSampler<T>,
    render: &RenderConfig<T>,
    config: &PretrainConfig,
) -> Result<PretrainReport<T>> {
    let classes = class_count(scenes)?;
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let train = natural_examples(
        scenes,
        sampler,
        render,
        config.views_per_scene,
        seed::derive(config.seed, &[1]),
    )?;
    let heldout = natural_examples(
        scenes,
        sampler,
        render,
        config.heldout_views_per_scene,
        seed::derive(config.seed, &[2]),
    )?;
    let mut sizes = vec![render.input_len()];
    sizes.extend(&config.hidden);
    sizes.push(classes);
    let mut params = ClassifierParams::random(&sizes, seed::derive(config.seed, &[3]))?;
    let eta = T::lit(config.eta);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut rng = seed::rng_for(config.seed, &[4, epoch as u64]);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Example<T>> = chunk.iter().map(|&i| train[i].clone()).collect();
            let (next, loss) = params.backward_update(&batch, eta)?;
            params = next;
            total += loss.as_f64();
        }
        epoch_losses.push(total / train.len() as f64);
    }
    Ok(PretrainReport {
        train_accuracy: params.accuracy(&train)?,
        heldout_accuracy: params.accuracy(&heldout)?,
        params,
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_uniform() {
        let p = ClassifierParams::<f64>::zeros(&[5, 4, 10]).unwrap();
        let probs = p.forward(&[0.3, 0.1, 0.9, 0.0, 1.0]).unwrap();
        assert!(probs.iter().all(|x| (x - 0.1).abs() < 1e-15));
        let loss = p.loss(&[0.3, 0.1, 0.9, 0.0, 1.0], 4).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn random_outputs_are_probabilities() {
        let p = ClassifierParams::<f64>::random(&[12, 7, 5, 3], 4).unwrap();
        let mut rng = seed::rng(8);
        for _ in 0..50 {
            let x: Vec<f64> = (0..12).map(|_| rng.random_range(0.0..1.0)).collect();
            let probs = p.forward(&x).unwrap();
            assert!(probs.iter().all(|x| *x >= 0.0));
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cross_entropy_examples() {
        assert!(cross_entropy_from_logits(&[0.0, 50.0, 0.0], 1).unwrap() < 1e-20);
        let l = cross_entropy_from_logits(&[2.0, 0.0, 0.0], 0).unwrap();
        let expect = (2f64.exp() + 2.0).ln() - 2.0;
        assert!((l - expect).abs() < 1e-15);
        assert!(cross_entropy_from_logits(&[0.0, 0.0], 2).is_err());
    }

    #[test]
    fn hand_computed_forward_pass() {
        // 2 inputs -> 2 tanh units -> 2 classes
        let p = ClassifierParams {
            layers: vec![
                Layer {
                    inputs: 2,
                    outputs: 2,
                    weights: vec![0.5, -1.0, 2.0, 0.25],
                    bias: vec![0.1, -0.3],
                },
                Layer {
                    inputs: 2,
                    outputs: 2,
                    weights: vec![1.5, -0.5, -2.0, 1.0],
                    bias: vec![0.0, 0.2],
                },
            ],
        };
        let x = [0.4, 0.8];
        let h0 = (0.5f64 * 0.4 - 1.0 * 0.8 + 0.1).tanh();
        let h1 = (2.0f64 * 0.4 + 0.25 * 0.8 - 0.3).tanh();
        let z0 = 1.5 * h0 - 0.5 * h1;
        let z1 = -2.0 * h0 + 1.0 * h1 + 0.2;
        let p0 = z0.exp() / (z0.exp() + z1.exp());
        let probs = p.forward(&x).unwrap();
        assert!((probs[0] - p0).abs() < 1e-12);
        assert!((probs[1] - (1.0 - p0)).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let p = ClassifierParams::<f64>::zeros(&[3, 2]).unwrap();
        assert!(matches!(
            p.forward(&[1.0, 2.0]),
            Err(Error::Dimension { expected: 3, got: 2 })
        ));
        let bad = [Example {
            input: vec![1.0; 4],
            label: 0,
        }];
        assert!(p.backward_update(&bad, 0.1).is_err());
        assert!(p.backward_update(&[], 0.1).is_err());
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let p = ClassifierParams::<f64>::random(&[4, 3, 2], 1).unwrap();
        let batch = [Example {
            input: vec![0.1, 0.2, 0.3, 0.4],
            label: 1,
        }];
        let (next, _) = p.backward_update(&batch, 0.0).unwrap();
        assert_eq!(next, p);
    }

    fn batch_loss(p: &ClassifierParams<f64>, batch: &[Example<f64>]) -> f64 {
        batch.iter().map(|e| p.loss(&e.input, e.label).unwrap()).sum()
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (sizes, seed) in [(vec![4usize, 2], 3u64), (vec![5, 4, 2], 5), (vec![6, 5, 4, 3], 9)] {
            let p = ClassifierParams::<f64>::random(&sizes, seed).unwrap();
            let mut rng = seed::rng(seed + 100);
            let batch: Vec<Example<f64>> = (0..3)
                .map(|i| Example {
                    input: (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    label: i % sizes[sizes.len() - 1],
                })
                .collect();
            let (_, grad) = p.loss_and_gradient(&batch).unwrap();
            let h = 1e-6;
            for li in 0..p.layers.len() {
                let n = p.layers[li].weights.len() + p.layers[li].bias.len();
                for idx in 0..n {
                    let bump = |delta: f64| {
                        let mut q = p.clone();
                        let l = &mut q.layers[li];
                        if idx < l.weights.len() {
                            l.weights[idx] += delta;
                        } else {
                            l.bias[idx - l.weights.len()] += delta;
                        }
                        batch_loss(&q, &batch)
                    };
                    let fd = (bump(h) - bump(-h)) / (2.0 * h);
                    let g = &grad.layers[li];
                    let an = if idx < g.weights.len() {
                        g.weights[idx]
                    } else {
                        g.bias[idx - g.weights.len()]
                    };
                    let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-3);
                    assert!(rel < 1e-5, "layer {li} idx {idx}: fd {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn separable_two_class_reaches_full_accuracy() {
        let mut rng = seed::rng(12);
        let data: Vec<Example<f64>> = (0..40)
            .map(|i| {
                let label = i % 2;
                let shift = if label == 0 { -0.6 } else { 0.6 };
                Example {
                    input: (0..6).map(|_| shift + rng.random_range(-0.5..0.5)).collect(),
                    label,
                }
            })
            .collect();
        let mut p = ClassifierParams::random(&[6, 8, 2], 2).unwrap();
        for step in 0..200 {
            let batch = &data[(step * 8) % 40..(step * 8) % 40 + 8];
            p = p.backward_update(batch, 0.05).unwrap().0;
        }
        assert_eq!(p.accuracy(&data).unwrap(), 1.0);
    }

    #[test]
    fn checkpoint_round_trip() {
        let p = ClassifierParams::<f64>::random(&[7, 5, 3], 44).unwrap();
        let mut buf = Vec::new();
        p.write_checkpoint(&mut buf, "{\"seed\":44}").unwrap();
        let (back, header) = ClassifierParams::<f64>::read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(back, p);
        assert_eq!(header, "{\"seed\":44}");
        let p32 = ClassifierParams::<f32>::random(&[3, 2], 1).unwrap();
        let mut buf = Vec::new();
        p32.write_checkpoint(&mut buf, "").unwrap();
        assert_eq!(
            ClassifierParams::<f32>::read_checkpoint(&mut buf.as_slice()).unwrap().0,
            p32
        );
        assert!(ClassifierParams::<f64>::read_checkpoint(&mut &b"garbage!"[..]).is_err());
    }

    #[test]
    fn natural_sampler_jitter_range() {
        let s = NaturalSampler::<f64>::default();
        let mut rng = seed::rng(3);
        for _ in 0..500 {
            let v = s.sample(0, &mut rng);
            assert!(v.psi.abs() <= 4.0 && v.theta.abs() <= 4.0);
            assert!((v.phi - 65.0).abs() <= 4.0);
            assert!(v.dx.abs() <= 0.05 && v.dy.abs() <= 0.05 && v.dz.abs() <= 0.05);
        }
    }

    #[test]
    fn class_count_requires_every_class() {
        let mk = |label| Scene::<f64> {
            label,
            ..Scene::empty([0.0; 3], 1.0, 2.0)
        };
        assert_eq!(class_count(&[mk(0), mk(1)]).unwrap(), 2);
        assert!(class_count(&[mk(0)]).is_err());
        assert!(class_count(&[mk(0), mk(2)]).is_err());
    }
}
