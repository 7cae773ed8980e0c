//! Randomized smoothing over viewpoint parameters.
//!
//! Noise `ε ∼ N(0, σ̃² I)` lives in normalized units where each active axis
//! has half-width 1; a noisy viewpoint is `v0 + a ⊙ ε` clipped to the box.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ViewBounds, Viewpoint, VIEW_DIM};
use crate::scalar::Real;
use crate::seed;
use crate::stats::{clopper_pearson_lower, inverse_normal_cdf};
use crate::target::ViewpointClassifier;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingConfig {
    pub sigma_tilde: f64,
    pub n: usize,
    pub n0: usize,
    pub alpha: f64,
    pub v0: [f64; VIEW_DIM],
    pub seed: u64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            sigma_tilde: 0.1,
            n: 1000,
            n0: 100,
            alpha: 1e-3,
            v0: [0.0, 0.0, 65.0, 0.0, 0.0, 0.0],
            seed: 0,
        }
    }
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_tilde > 0.0 && self.sigma_tilde.is_finite()) {
            return Err(Error::validation(
                "sigma_tilde",
                format!("{} must be > 0", self.sigma_tilde),
            ));
        }
        if self.n0 == 0 || self.n < self.n0 {
            return Err(Error::validation(
                "n",
                format!("need n >= n0 >= 1 (n = {}, n0 = {})", self.n, self.n0),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::validation("alpha", format!("{} not in (0, 1)", self.alpha)));
        }
        if self.v0.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("v0", "must be finite"));
        }
        Ok(())
    }
}

/// Outcome of certifying one input. `predicted == None` means abstain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificationRecord {
    pub predicted: Option<usize>,
    pub pa_lower: f64,
    pub radius: f64,
    pub correct: bool,
    /// Fraction of noisy viewpoints that had to be clipped to the box.
    pub clip_fraction: f64,
}

/// Vote counts per class plus how many noisy viewpoints were clipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassHistogram {
    pub counts: Vec<usize>,
    pub clipped: usize,
}

impl ClassHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Most frequent class, lowest index on ties.
    pub fn top(&self) -> usize {
        let mut best = 0;
        for (c, n) in self.counts.iter().enumerate() {
            if *n > self.counts[best] {
                best = c;
            }
        }
        best
    }

    pub fn count(&self, class: usize) -> usize {
        self.counts.get(class).copied().unwrap_or(0)
    }
}

/// `v0 + a ⊙ ε`, clipped; the flag reports whether clipping changed anything.
pub fn perturb<T: Real>(v0: &Viewpoint<T>, eps: &[T; VIEW_DIM], bounds: &ViewBounds<T>) -> (Viewpoint<T>, bool) {
    let a = bounds.half_width();
    let base = v0.to_array();
    let raw = Viewpoint::from_array(std::array::from_fn(|i| base[i] + a[i] * eps[i]));
    let clipped = bounds.clamp(&raw);
    (clipped, clipped != raw)
}

/// Noisy viewpoints around `v0`, deterministic in `rng_seed`.
pub fn noisy_viewpoints<T: Real>(
    v0: &Viewpoint<T>,
    bounds: &ViewBounds<T>,
    sigma_tilde: f64,
    n: usize,
    rng_seed: u64,
) -> Vec<(Viewpoint<T>, bool)> {
    let mut rng = seed::rng(rng_seed);
    (0..n)
        .map(|_| {
            let eps: [T; VIEW_DIM] = std::array::from_fn(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                T::lit(sigma_tilde * z)
            });
            perturb(v0, &eps, bounds)
        })
        .collect()
}

/// Class histogram of the base classifier under viewpoint noise.
pub fn smoothed_predict<T: Real, C: ViewpointClassifier<T> + ?Sized>(
    classifier: &C,
    num_classes: usize,
    v0: &Viewpoint<T>,
    bounds: &ViewBounds<T>,
    sigma_tilde: f64,
    n: usize,
    rng_seed: u64,
) -> Result<ClassHistogram> {
    let views = noisy_viewpoints(v0, bounds, sigma_tilde, n, rng_seed);
    let preds = views
        .par_iter()
        .map(|(v, _)| classifier.predict(v))
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0; num_classes];
    for p in preds {
        if p >= num_classes {
            return Err(Error::invalid(format!(
                "prediction {p} out of range for {num_classes} classes"
            )));
        }
        counts[p] += 1;
    }
    Ok(ClassHistogram {
        counts,
        clipped: views.iter().filter(|(_, c)| *c).count(),
    })
}

/// Radius from a lower bound on the top-class probability; `None` means abstain.
pub fn certified_radius(pa_lower: f64, sigma_tilde: f64) -> Option<f64> {
    if pa_lower > 0.5 {
        Some(sigma_tilde * inverse_normal_cdf(pa_lower))
    } else {
        None
    }
}

/// Two-phase certification: `n0` draws pick the candidate, `n` fresh draws bound it.
pub fn certify<T: Real, C: ViewpointClassifier<T> + ?Sized>(
    classifier: &C,
    num_classes: usize,
    label: usize,
    bounds: &ViewBounds<T>,
    config: &SmoothingConfig,
) -> Result<CertificationRecord> {
    config.validate()?;
    let v0 = Viewpoint::from_array(config.v0.map(T::lit));
    let select = smoothed_predict(
        classifier,
        num_classes,
        &v0,
        bounds,
        config.sigma_tilde,
        config.n0,
        seed::derive(config.seed, &[0]),
    )?;
    let candidate = select.top();
    let estimate = smoothed_predict(
        classifier,
        num_classes,
        &v0,
        bounds,
        config.sigma_tilde,
        config.n,
        seed::derive(config.seed, &[1]),
    )?;
    let k = estimate.count(candidate) as u64;
    let pa_lower = clopper_pearson_lower(k, config.n as u64, config.alpha);
    let clip_fraction = estimate.clipped as f64 / config.n as f64;
    Ok(match certified_radius(pa_lower, config.sigma_tilde) {
        Some(radius) => CertificationRecord {
            predicted: Some(candidate),
            pa_lower,
            radius,
            correct: candidate == label,
            clip_fraction,
        },
        None => CertificationRecord {
            predicted: None,
            pa_lower,
            radius: 0.0,
            correct: false,
            clip_fraction,
        },
    })
}

/// Average certified radius (correct records contribute their radius, others 0)
/// and certified accuracy.
pub fn aggregate_acr_ca(records: &[CertificationRecord]) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::invalid("no certification records"));
    }
    let n = records.len() as f64;
    // fold from +0.0: an empty f64 sum is -0.0
    let acr = records.iter().filter(|r| r.correct).fold(0.0, |acc, r| acc + r.radius) / n;
    let ca = records.iter().filter(|r| r.correct).count() as f64 / n;
    Ok((acr, ca))
}

/// Gaussian-noise ℓ2 bound `(σ̃/2)(Φ⁻¹(pA) − Φ⁻¹(pB))`.
pub fn gaussian_l2_radius(pa: f64, pb: f64, sigma_tilde: f64) -> f64 {
    0.5 * sigma_tilde * (inverse_normal_cdf(pa) - inverse_normal_cdf(pb))
}

/// Uniform-noise ℓ1 bound `β (pA − pB)` for noise on `[−β, β]` per axis.
pub fn uniform_l1_radius(pa: f64, pb: f64, beta: f64) -> f64 {
    beta * (pa - pb)
}

/// Physical per-axis slack corresponding to a normalized radius.
pub fn axis_slack<T: Real>(radius: T, bounds: &ViewBounds<T>) -> [T; VIEW_DIM] {
    bounds.half_width().map(|a| radius * a)
}
