//! Black-box search for adversarial viewpoint distributions.
//!
//! The objective `E_{v∼p_Ψ}[L(v)] + λ H(p_Ψ)` is maximized over the mixture
//! parameters `Ψ = {ω_k, μ_k, σ_k}` using only loss evaluations. Per-draw
//! gradient terms come from the selected component `k` (the hot entry of Γ),
//! the standard normal `r`, and `u = μ_k + σ_k r`.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::ClassifierParams;
use crate::error::{Error, Result};
use crate::geometry::{ViewBounds, Viewpoint, VIEW_DIM};
use crate::scalar::Real;
use crate::seed;
use crate::target::{ViewpointClassifier, ViewpointLoss};
use crate::viewdist::{
    entropy_estimate, grad_log_density_u, log_density_v, sample_mixture, DrawRecord, MixtureParams, OMEGA_FLOOR,
    SIGMA_FLOOR,
};

/// Which per-draw gradient terms the estimator averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientForm {
    /// Loss terms preconditioned by the diagonal Fisher inverse of each
    /// component (`σ²` for μ, `σ²/2` for σ) with the plain Jacobian-only
    /// entropy terms:
    /// `∇ω_k: L/ω_k − λ`,
    /// `∇μ_k: L σ r/ω_k − 2λ tanh u`,
    /// `∇σ_k: L σ (r² − 1)/(2ω_k) + λ (1/σ − 2 r tanh u)`.
    #[default]
    Natural,
    /// Unbiased estimate of the plain gradient of the objective:
    /// `∇ω_k: (L − λ(log p(v) + 1))/ω_k`,
    /// `∇μ_k: L r/σ − λ (∂_u log p_u + 2 tanh u)`,
    /// `∇σ_k: L (r² − 1)/σ − λ (∂_u log p_u + 2 tanh u) r`.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub iterations: usize,
    /// Monte Carlo draws per gradient step.
    pub samples: usize,
    pub eta: f64,
    pub k: usize,
    pub lambda: f64,
    pub seed: u64,
    #[serde(default)]
    pub form: GradientForm,
    /// Draws used for the logged entropy estimate.
    #[serde(default = "default_entropy_samples")]
    pub entropy_samples: usize,
}

fn default_entropy_samples() -> usize {
    500
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            samples: 100,
            eta: 0.1,
            k: 15,
            lambda: 0.01,
            seed: 0,
            form: GradientForm::Natural,
            entropy_samples: default_entropy_samples(),
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::validation("iterations", "must be >= 1"));
        }
        if self.samples == 0 {
            return Err(Error::validation("samples", "must be >= 1"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::validation("eta", format!("{} must be > 0", self.eta)));
        }
        if self.k == 0 {
            return Err(Error::validation("k", "must be >= 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::validation("lambda", format!("{} must be >= 0", self.lambda)));
        }
        if self.entropy_samples == 0 {
            return Err(Error::validation("entropy_samples", "must be >= 1"));
        }
        Ok(())
    }
}

/// Monte Carlo gradient of the attack objective with per-entry standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate<T: Real> {
    pub d_omega: Vec<T>,
    pub d_mu: Vec<[T; VIEW_DIM]>,
    pub d_sigma: Vec<[T; VIEW_DIM]>,
    pub loss_mean: T,
    pub se_omega: Vec<T>,
    pub se_mu: Vec<[T; VIEW_DIM]>,
    pub se_sigma: Vec<[T; VIEW_DIM]>,
}

/// Cross-entropy of `label` for one image.
pub fn classification_loss<T: Real>(classifier: &ClassifierParams<T>, image: &[T], label: usize) -> Result<T> {
    classifier.loss(image, label)
}

/// Running sums for mean and standard error.
struct Moments {
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Moments {
    fn new(n: usize) -> Self {
        Self {
            sum: vec![0.0; n],
            sq: vec![0.0; n],
        }
    }

    fn add(&mut self, i: usize, x: f64) {
        self.sum[i] += x;
        self.sq[i] += x * x;
    }

    fn finish<T: Real>(&self, n: usize) -> (Vec<T>, Vec<T>) {
        let nf = n as f64;
        self.sum
            .iter()
            .zip(&self.sq)
            .map(|(s, q)| {
                let mean = s / nf;
                let var = if n > 1 {
                    ((q - nf * mean * mean) / (nf - 1.0)).max(0.0)
                } else {
                    0.0
                };
                (T::lit(mean), T::lit((var / nf).sqrt()))
            })
            .unzip()
    }
}

fn rows<T: Real>(flat: Vec<T>) -> Vec<[T; VIEW_DIM]> {
    flat.chunks_exact(VIEW_DIM)
        .map(|c| std::array::from_fn(|i| c[i]))
        .collect()
}

/// Averages per-draw gradient terms given the draws and their losses.
pub fn gradient_from_draws<T: Real>(
    params: &MixtureParams<T>,
    bounds: &ViewBounds<T>,
    draws: &[DrawRecord<T>],
    losses: &[T],
    lambda: T,
    form: GradientForm,
) -> Result<GradientEstimate<T>> {
    if draws.is_empty() || draws.len() != losses.len() {
        return Err(Error::invalid(format!(
            "{} draws but {} losses",
            draws.len(),
            losses.len()
        )));
    }
    let k = params.k();
    let omega_floor = T::lit(OMEGA_FLOOR);
    let two = T::lit(2.0);
    let mut m_omega = Moments::new(k);
    let mut m_mu = Moments::new(k * VIEW_DIM);
    let mut m_sigma = Moments::new(k * VIEW_DIM);
    // zero contributions still enter the second moments
    let mut row_omega = vec![T::zero(); k];
    let mut row_mu = vec![T::zero(); k * VIEW_DIM];
    let mut row_sigma = vec![T::zero(); k * VIEW_DIM];
    for (d, &l) in draws.iter().zip(losses) {
        if !l.is_finite() {
            return Err(Error::invalid(format!("non-finite loss {l}")));
        }
        row_omega.iter_mut().for_each(|x| *x = T::zero());
        row_mu.iter_mut().for_each(|x| *x = T::zero());
        row_sigma.iter_mut().for_each(|x| *x = T::zero());
        let c = d.component;
        let w = params.omega[c].max(omega_floor);
        match form {
            GradientForm::Natural => {
                row_omega.iter_mut().for_each(|x| *x = T::zero());
                row_omega[c] = l / w - lambda;
                for i in (0..VIEW_DIM).filter(|&i| !bounds.is_frozen(i)) {
                    let s = params.sigma[c][i];
                    let r = d.r[i];
                    let th = d.u[i].tanh();
                    row_mu[c * VIEW_DIM + i] = l * s * r / w - two * lambda * th;
                    row_sigma[c * VIEW_DIM + i] =
                        l * s * (r * r - T::one()) / (two * w) + lambda * (T::one() / s - two * r * th);
                }
            }
            GradientForm::Exact => {
                let log_p = log_density_v(params, bounds, &d.v)?;
                row_omega[c] = (l - lambda * (log_p + T::one())) / w;
                let g = grad_log_density_u(params, bounds, &d.u);
                for i in (0..VIEW_DIM).filter(|&i| !bounds.is_frozen(i)) {
                    let s = params.sigma[c][i];
                    let r = d.r[i];
                    let dlogp_du = g[i] + two * d.u[i].tanh();
                    row_mu[c * VIEW_DIM + i] = l * r / s - lambda * dlogp_du;
                    row_sigma[c * VIEW_DIM + i] = l * (r * r - T::one()) / s - lambda * dlogp_du * r;
                }
            }
        }
        for (i, x) in row_omega.iter().enumerate() {
            m_omega.add(i, x.as_f64());
        }
        for (i, x) in row_mu.iter().enumerate() {
            m_mu.add(i, x.as_f64());
        }
        for (i, x) in row_sigma.iter().enumerate() {
            m_sigma.add(i, x.as_f64());
        }
    }
    let n = draws.len();
    let (d_omega, se_omega) = m_omega.finish(n);
    let (d_mu, se_mu) = m_mu.finish(n);
    let (d_sigma, se_sigma) = m_sigma.finish(n);
    let loss_mean = T::lit(losses.iter().map(|l| l.as_f64()).sum::<f64>() / n as f64);
    let est = GradientEstimate {
        d_omega,
        d_mu: rows(d_mu),
        d_sigma: rows(d_sigma),
        loss_mean,
        se_omega,
        se_mu: rows(se_mu),
        se_sigma: rows(se_sigma),
    };
    let finite = est.d_omega.iter().all(|x| x.is_finite())
        && est.d_mu.iter().flatten().all(|x| x.is_finite())
        && est.d_sigma.iter().flatten().all(|x| x.is_finite());
    if !finite {
        return Err(Error::invalid("non-finite gradient estimate"));
    }
    Ok(est)
}

/// Evaluates `oracle` at `draws` in parallel, preserving order.
pub fn evaluate_losses<T: Real, L: ViewpointLoss<T> + ?Sized>(oracle: &L, draws: &[DrawRecord<T>]) -> Result<Vec<T>> {
    draws.par_iter().map(|d| oracle.loss(&d.v)).collect()
}

/// Samples `q` draws, queries the loss, and averages the gradient terms.
pub fn nes_gradient<T: Real, L: ViewpointLoss<T> + ?Sized>(
    params: &MixtureParams<T>,
    bounds: &ViewBounds<T>,
    oracle: &L,
    q: usize,
    lambda: T,
    rng_seed: u64,
    form: GradientForm,
) -> Result<GradientEstimate<T>> {
    if q == 0 {
        return Err(Error::invalid("q must be >= 1"));
    }
    params.validate(bounds)?;
    let draws = sample_mixture(params, bounds, q, rng_seed);
    let losses = evaluate_losses(oracle, &draws)?;
    gradient_from_draws(params, bounds, &draws, &losses, lambda, form)
}

/// Single-Gaussian estimator written directly, without mixture bookkeeping.
/// Returns `(∇μ, ∇σ)`.
pub fn unimodal_nes_gradient<T: Real>(
    mu: &[T; VIEW_DIM],
    sigma: &[T; VIEW_DIM],
    bounds: &ViewBounds<T>,
    noise: &[[T; VIEW_DIM]],
    losses: &[T],
    lambda: T,
) -> ([T; VIEW_DIM], [T; VIEW_DIM]) {
    let two = T::lit(2.0);
    let mut gm = [0.0f64; VIEW_DIM];
    let mut gs = [0.0f64; VIEW_DIM];
    for (r, &l) in noise.iter().zip(losses) {
        for i in (0..VIEW_DIM).filter(|&i| !bounds.is_frozen(i)) {
            let th = (mu[i] + sigma[i] * r[i]).tanh();
            gm[i] += (l * sigma[i] * r[i] - two * lambda * th).as_f64();
            gs[i] += (l * sigma[i] * (r[i] * r[i] - T::one()) / two + lambda * (T::one() / sigma[i] - two * r[i] * th))
                .as_f64();
        }
    }
    let n = noise.len() as f64;
    (
        std::array::from_fn(|i| T::lit(gm[i] / n)),
        std::array::from_fn(|i| T::lit(gs[i] / n)),
    )
}

/// First and second moments for Adam over the flattened `[ω, μ, σ]` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl AdamState {
    pub fn new(k: usize) -> Self {
        let n = k * (1 + 2 * VIEW_DIM);
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

fn flatten_grad<T: Real>(g: &GradientEstimate<T>) -> Vec<f64> {
    g.d_omega
        .iter()
        .chain(g.d_mu.iter().flatten())
        .chain(g.d_sigma.iter().flatten())
        .map(|x| x.as_f64())
        .collect()
}

/// One bias-corrected Adam ascent step. `step_index` counts from 1.
pub fn adam_update<T: Real>(
    params: &MixtureParams<T>,
    grad: &GradientEstimate<T>,
    eta: f64,
    step_index: usize,
    state: &AdamState,
) -> Result<(MixtureParams<T>, AdamState)> {
    let k = params.k();
    let g = flatten_grad(grad);
    if g.len() != state.m.len() || grad.d_omega.len() != k {
        return Err(Error::Dimension {
            expected: state.m.len(),
            got: g.len(),
        });
    }
    let t = step_index.max(1) as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    let mut next_state = state.clone();
    let mut step = vec![0.0; g.len()];
    for (j, gj) in g.iter().enumerate() {
        let m = ADAM_BETA1 * state.m[j] + (1.0 - ADAM_BETA1) * gj;
        let v = ADAM_BETA2 * state.v[j] + (1.0 - ADAM_BETA2) * gj * gj;
        next_state.m[j] = m;
        next_state.v[j] = v;
        step[j] = eta * (m / c1) / ((v / c2).sqrt() + ADAM_EPS);
    }
    let mut next = params.clone();
    let mut it = step.into_iter();
    for w in &mut next.omega {
        *w += T::lit(it.next().unwrap());
    }
    for x in next.mu.iter_mut().flatten() {
        *x += T::lit(it.next().unwrap());
    }
    for x in next.sigma.iter_mut().flatten() {
        *x += T::lit(it.next().unwrap());
    }
    Ok((next, next_state))
}

/// Clamps ω into `[OMEGA_FLOOR, 1]` and renormalizes, and floors σ at `SIGMA_FLOOR`.
pub fn project_params<T: Real>(params: &MixtureParams<T>) -> Result<MixtureParams<T>> {
    let all_finite = params.omega.iter().all(|x| x.is_finite())
        && params.mu.iter().flatten().all(|x| x.is_finite())
        && params.sigma.iter().flatten().all(|x| x.is_finite());
    if !all_finite {
        return Err(Error::invalid("non-finite mixture parameters"));
    }
    let floor = T::lit(OMEGA_FLOOR);
    let k = params.k();
    let mut next = params.clone();
    if params.omega.iter().all(|w| *w < floor) {
        log::warn!("all mixture weights below floor; resetting to uniform");
        next.omega = vec![T::one() / T::from_count(k); k];
    } else {
        for w in &mut next.omega {
            *w = w.max(floor).min(T::one());
        }
        let s: T = next.omega.iter().copied().sum();
        for w in &mut next.omega {
            *w /= s;
        }
    }
    let sfloor = T::lit(SIGMA_FLOOR);
    for s in next.sigma.iter_mut().flatten() {
        *s = s.max(sfloor);
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub loss_mean: f64,
    pub entropy: f64,
    pub max_omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome<T: Real> {
    pub params: MixtureParams<T>,
    /// Rows for `Ψ^0 … Ψ^T`; the last row evaluates the returned parameters.
    pub trace: Vec<TraceRow>,
}

impl<T: Real> AttackOutcome<T> {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iter,loss_mean,entropy,max_omega\n");
        for r in &self.trace {
            s.push_str(&format!("{},{},{},{}\n", r.iter, r.loss_mean, r.entropy, r.max_omega));
        }
        s
    }
}

/// Attack from a fresh random initialization drawn from `config.seed`.
pub fn run_attack<T: Real, L: ViewpointLoss<T> + ?Sized>(
    oracle: &L,
    bounds: &ViewBounds<T>,
    config: &AttackConfig,
) -> Result<AttackOutcome<T>> {
    config.validate()?;
    let mut rng = seed::rng_for(config.seed, &[0]);
    let init = MixtureParams::init(config.k, &mut rng)?;
    run_attack_from(oracle, bounds, config, init)
}

/// Attack warm-started from `init`; `config.k` is ignored in favour of `init.k()`.
pub fn run_attack_from<T: Real, L: ViewpointLoss<T> + ?Sized>(
    oracle: &L,
    bounds: &ViewBounds<T>,
    config: &AttackConfig,
    init: MixtureParams<T>,
) -> Result<AttackOutcome<T>> {
    config.validate()?;
    init.validate(bounds)?;
    let lambda = T::lit(config.lambda);
    let mut params = init;
    let mut state = AdamState::new(params.k());
    let mut trace = Vec::with_capacity(config.iterations + 1);
    let row = |iter: usize, params: &MixtureParams<T>, loss_mean: T| -> Result<TraceRow> {
        let h = entropy_estimate(
            params,
            bounds,
            config.entropy_samples,
            seed::derive(config.seed, &[2, iter as u64]),
        )?;
        Ok(TraceRow {
            iter,
            loss_mean: loss_mean.as_f64(),
            entropy: h.mean.as_f64(),
            max_omega: params.omega.iter().map(|w| w.as_f64()).fold(0.0, f64::max),
        })
    };
    for t in 0..config.iterations {
        let grad = nes_gradient(
            &params,
            bounds,
            oracle,
            config.samples,
            lambda,
            seed::derive(config.seed, &[1, t as u64]),
            config.form,
        )?;
        trace.push(row(t, &params, grad.loss_mean)?);
        let (next, next_state) = adam_update(&params, &grad, config.eta, t + 1, &state)?;
        params = project_params(&next)?;
        state = next_state;
        log::debug!("attack iter {t}: loss_mean {}", grad.loss_mean);
    }
    let t = config.iterations;
    let draws = sample_mixture(
        &params,
        bounds,
        config.samples,
        seed::derive(config.seed, &[1, t as u64]),
    );
    let losses = evaluate_losses(oracle, &draws)?;
    let loss_mean = T::lit(losses.iter().map(|l| l.as_f64()).sum::<f64>() / losses.len() as f64);
    trace.push(row(t, &params, loss_mean)?);
    params.validate(bounds)?;
    Ok(AttackOutcome { params, trace })
}

/// Fraction of `n` draws from `params` that `classifier` gets wrong.
pub fn attack_success_rate<T: Real, C: ViewpointClassifier<T> + ?Sized>(
    classifier: &C,
    label: usize,
    params: &MixtureParams<T>,
    bounds: &ViewBounds<T>,
    n: usize,
    rng_seed: u64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    let draws = sample_mixture(params, bounds, n, rng_seed);
    misclassified_fraction(classifier, label, draws.iter().map(|d| d.v).collect())
}

fn misclassified_fraction<T: Real, C: ViewpointClassifier<T> + ?Sized>(
    classifier: &C,
    label: usize,
    views: Vec<Viewpoint<T>>,
) -> Result<f64> {
    let n = views.len();
    let wrong = views
        .par_iter()
        .map(|v| classifier.predict(v).map(|p| usize::from(p != label)))
        .collect::<Result<Vec<_>>>()?;
    Ok(wrong.iter().sum::<usize>() as f64 / n as f64)
}

/// Viewpoints drawn uniformly from the box.
pub fn uniform_viewpoints<T: Real>(bounds: &ViewBounds<T>, n: usize, rng_seed: u64) -> Vec<Viewpoint<T>> {
    let mut rng = seed::rng(rng_seed);
    (0..n)
        .map(|_| {
            Viewpoint::from_array(std::array::from_fn(|i| {
                let (lo, hi) = (bounds.min[i].as_f64(), bounds.max[i].as_f64());
                if lo == hi {
                    bounds.min[i]
                } else {
                    T::lit(rng.random_range(lo..=hi))
                }
            }))
        })
        .collect()
}

/// Random-search baseline: misclassification rate over `budget` uniform viewpoints.
pub fn random_search_success_rate<T: Real, C: ViewpointClassifier<T> + ?Sized>(
    classifier: &C,
    label: usize,
    bounds: &ViewBounds<T>,
    budget: usize,
    rng_seed: u64,
) -> Result<f64> {
    if budget == 0 {
        return Err(Error::invalid("budget must be >= 1"));
    }
    misclassified_fraction(classifier, label, uniform_viewpoints(bounds, budget, rng_seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Viewpoint;
    use crate::viewdist::squash;

    fn plane_bounds() -> ViewBounds<f64> {
        ViewBounds::standard()
            .freeze_except(&[0, 2], &Viewpoint::natural())
            .unwrap()
    }

    fn mixture(k: usize, seed_: u64) -> MixtureParams<f64> {
        let mut rng = seed::rng(seed_);
        let mut p = MixtureParams::init(k, &mut rng).unwrap();
        for (c, s) in p.sigma.iter_mut().enumerate() {
            *s = [0.4 + 0.1 * c as f64; VIEW_DIM];
        }
        p
    }

    #[test]
    fn config_validation() {
        assert!(AttackConfig::default().validate().is_ok());
        for bad in [
            AttackConfig {
                iterations: 0,
                ..Default::default()
            },
            AttackConfig {
                samples: 0,
                ..Default::default()
            },
            AttackConfig {
                eta: 0.0,
                ..Default::default()
            },
            AttackConfig {
                k: 0,
                ..Default::default()
            },
            AttackConfig {
                lambda: -1.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Validation { .. })));
        }
    }

    #[test]
    fn classification_loss_examples() {
        let p = ClassifierParams::<f64>::zeros(&[4, 10]).unwrap();
        let l = classification_loss(&p, &[0.1, 0.2, 0.3, 0.4], 3).unwrap();
        assert!((l - 10f64.ln()).abs() < 1e-12);
        assert!(classification_loss(&p, &[0.1, 0.2, 0.3, 0.4], 10).is_err());
    }

    #[test]
    fn constant_loss_has_no_location_signal() {
        let b = ViewBounds::standard();
        let p = MixtureParams::single([0.2, -0.1, 0.3, 0.0, 0.5, -0.4], 0.6);
        let c = 1.7;
        let g = nes_gradient(&p, &b, &|_: &Viewpoint<f64>| c, 10_000, 0.0, 5, GradientForm::Natural).unwrap();
        assert!((g.d_omega[0] - c).abs() < 1e-12);
        for i in 0..VIEW_DIM {
            assert!(g.d_mu[0][i].abs() < 3.0 * g.se_mu[0][i], "axis {i}");
            assert!(g.d_sigma[0][i].abs() < 3.0 * g.se_sigma[0][i], "axis {i}");
        }
        assert!((g.loss_mean - c).abs() < 1e-12);
    }

    #[test]
    fn quadratic_loss_pulls_mean_toward_target() {
        let b = plane_bounds();
        let target = Viewpoint::new(90.0, 0.0, 120.0, 0.0, 0.0, 0.0);
        let loss = move |v: &Viewpoint<f64>| {
            let a = b.half_width();
            let dp = (v.psi - target.psi) / a[0];
            let df = (v.phi - target.phi) / a[2];
            -(dp * dp + df * df)
        };
        let p = MixtureParams::single([0.0; VIEW_DIM], 0.3);
        for form in [GradientForm::Natural, GradientForm::Exact] {
            let g = nes_gradient(&p, &b, &loss, 4000, 0.0, 9, form).unwrap();
            assert!(g.d_mu[0][0] > 0.0 && g.d_mu[0][2] > 0.0, "{form:?}");
            assert_eq!(g.d_mu[0][1], 0.0);
        }
    }

    #[test]
    fn unselected_components_contribute_zero() {
        let b = ViewBounds::standard();
        let p = mixture(3, 2);
        let draws = sample_mixture(&p, &b, 1, 4);
        let g = gradient_from_draws(&p, &b, &draws, &[2.0], 0.1, GradientForm::Exact).unwrap();
        for c in (0..3).filter(|&c| c != draws[0].component) {
            assert_eq!(g.d_omega[c], 0.0);
            assert!(g.d_mu[c].iter().chain(&g.d_sigma[c]).all(|x| *x == 0.0));
        }
    }

    #[test]
    fn natural_loss_terms_are_fisher_scaled_exact_terms() {
        let b = ViewBounds::standard();
        let p = mixture(3, 7);
        let draws = sample_mixture(&p, &b, 200, 8);
        let losses: Vec<f64> = draws.iter().map(|d| d.v.psi / 180.0 + 0.3 * d.v.dy).collect();
        let nat = gradient_from_draws(&p, &b, &draws, &losses, 0.0, GradientForm::Natural).unwrap();
        let exact = gradient_from_draws(&p, &b, &draws, &losses, 0.0, GradientForm::Exact).unwrap();
        for c in 0..3 {
            let w = p.omega[c];
            for i in 0..VIEW_DIM {
                let s = p.sigma[c][i];
                let fm = s * s / w;
                let fs = s * s / (2.0 * w);
                assert!((nat.d_mu[c][i] - fm * exact.d_mu[c][i]).abs() < 1e-12);
                assert!((nat.d_sigma[c][i] - fs * exact.d_sigma[c][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_component_matches_unimodal_estimator() {
        let b = ViewBounds::standard();
        let p = MixtureParams::single([0.3, -0.2, 0.1, 0.5, -0.7, 0.0], 0.45);
        let draws = sample_mixture(&p, &b, 500, 17);
        let losses: Vec<f64> = draws
            .iter()
            .map(|d: &DrawRecord<f64>| (d.v.phi / 50.0).sin() + d.v.dx)
            .collect();
        let g = gradient_from_draws(&p, &b, &draws, &losses, 0.05, GradientForm::Natural).unwrap();
        let noise: Vec<[f64; VIEW_DIM]> = draws.iter().map(|d| d.r).collect();
        let (gm, gs) = unimodal_nes_gradient(&p.mu[0], &p.sigma[0], &b, &noise, &losses, 0.05);
        for i in 0..VIEW_DIM {
            assert_eq!(g.d_mu[0][i], gm[i], "mu axis {i}");
            assert_eq!(g.d_sigma[0][i], gs[i], "sigma axis {i}");
        }
    }

    #[test]
    fn frozen_axes_get_zero_gradient() {
        let b = plane_bounds();
        let p = mixture(2, 3);
        let g = nes_gradient(&p, &b, &|v: &Viewpoint<f64>| v.psi, 300, 0.1, 1, GradientForm::Exact).unwrap();
        for c in 0..2 {
            for i in [1, 3, 4, 5] {
                assert_eq!(g.d_mu[c][i], 0.0);
                assert_eq!(g.d_sigma[c][i], 0.0);
            }
        }
    }

    fn grad_with(k: usize, d_mu: f64, d_omega: f64) -> GradientEstimate<f64> {
        GradientEstimate {
            d_omega: vec![d_omega; k],
            d_mu: vec![[d_mu; VIEW_DIM]; k],
            d_sigma: vec![[0.0; VIEW_DIM]; k],
            loss_mean: 0.0,
            se_omega: vec![0.0; k],
            se_mu: vec![[0.0; VIEW_DIM]; k],
            se_sigma: vec![[0.0; VIEW_DIM]; k],
        }
    }

    #[test]
    fn adam_zero_gradient_is_identity() {
        let p = mixture(2, 1);
        let (next, _) = adam_update(&p, &grad_with(2, 0.0, 0.0), 0.1, 1, &AdamState::new(2)).unwrap();
        assert_eq!(next, p);
    }

    #[test]
    fn adam_first_step_moves_by_eta() {
        let p = mixture(1, 1);
        let (next, _) = adam_update(&p, &grad_with(1, 3.7, -0.2), 0.05, 1, &AdamState::new(1)).unwrap();
        for i in 0..VIEW_DIM {
            assert!((next.mu[0][i] - p.mu[0][i] - 0.05).abs() < 1e-8);
        }
        assert!((next.omega[0] - p.omega[0] + 0.05).abs() < 1e-8);
    }

    #[test]
    fn adam_is_scale_invariant_after_warmup() {
        let mut p = MixtureParams::single([0.0; VIEW_DIM], 0.5);
        p.omega = vec![1.0];
        let mut state = AdamState::new(1);
        let start = p.clone();
        for t in 1..=50 {
            let mut g = grad_with(1, 0.0, 0.0);
            g.d_mu[0][0] = 0.01;
            g.d_mu[0][1] = 0.1;
            let (n, s) = adam_update(&p, &g, 0.01, t, &state).unwrap();
            p = n;
            state = s;
        }
        let m0 = p.mu[0][0] - start.mu[0][0];
        let m1 = p.mu[0][1] - start.mu[0][1];
        assert!((m0 / m1 - 1.0).abs() < 1e-3, "{m0} vs {m1}");
    }

    #[test]
    fn adam_dimension_mismatch() {
        let p = mixture(2, 1);
        assert!(adam_update(&p, &grad_with(2, 0.0, 0.0), 0.1, 1, &AdamState::new(3)).is_err());
    }

    #[test]
    fn projection_examples() {
        let mut p = mixture(3, 1);
        p.omega = vec![0.4, 0.4, 1.2];
        let q = project_params(&p).unwrap();
        // 1.2 is clamped to 1 before renormalizing
        assert!((q.omega[0] - 0.4 / 1.8).abs() < 1e-15);
        assert!((q.omega[2] - 1.0 / 1.8).abs() < 1e-15);

        p.omega = vec![0.2, 0.2, 0.6];
        let q = project_params(&p).unwrap();
        assert!((q.omega[2] - 0.6).abs() < 1e-15);

        p.omega = vec![1.0, 0.0, 0.0];
        let q = project_params(&p).unwrap();
        assert!((q.omega[0] - 1.0 / 1.002).abs() < 1e-12);
        assert!((q.omega[1] - 0.001 / 1.002).abs() < 1e-12);

        p.omega = vec![1e-5, -0.3, 1e-4];
        let q = project_params(&p).unwrap();
        assert!(q.omega.iter().all(|w| (w - 1.0 / 3.0).abs() < 1e-15));

        p.sigma[1][2] = 1e-9;
        assert_eq!(project_params(&p).unwrap().sigma[1][2], SIGMA_FLOOR);

        p.mu[0][0] = f64::NAN;
        assert!(project_params(&p).is_err());
    }

    #[test]
    fn entropy_only_ascent_increases_entropy() {
        let b = ViewBounds::standard();
        let mut p = MixtureParams::single([0.4, -0.3, 0.2, 0.1, -0.5, 0.3], 0.3);
        let mut state = AdamState::new(1);
        let zero = |_: &Viewpoint<f64>| 0.0;
        let mut prev = entropy_estimate(&p, &b, 20_000, 99).unwrap().mean;
        for t in 1..=20 {
            let g = nes_gradient(&p, &b, &zero, 200, 0.5, t as u64, GradientForm::Natural).unwrap();
            let (n, s) = adam_update(&p, &g, 0.02, t, &state).unwrap();
            p = project_params(&n).unwrap();
            state = s;
            let h = entropy_estimate(&p, &b, 20_000, 99).unwrap().mean;
            assert!(h > prev, "step {t}: {h} <= {prev}");
            prev = h;
        }
    }

    #[test]
    fn constant_oracle_gives_flat_loss_trace() {
        let b = plane_bounds();
        let cfg = AttackConfig {
            iterations: 10,
            samples: 20,
            k: 3,
            ..Default::default()
        };
        let out = run_attack(&|_: &Viewpoint<f64>| 0.8, &b, &cfg).unwrap();
        assert_eq!(out.trace.len(), 11);
        assert!(out.trace.iter().all(|r| (r.loss_mean - 0.8).abs() < 1e-12));
        out.params.validate(&b).unwrap();
    }

    #[test]
    fn attack_is_deterministic() {
        let b = plane_bounds();
        let cfg = AttackConfig {
            iterations: 5,
            samples: 30,
            k: 4,
            seed: 11,
            ..Default::default()
        };
        let f = |v: &Viewpoint<f64>| (v.psi / 60.0).cos() * (v.phi / 40.0).sin();
        let a = run_attack(&f, &b, &cfg).unwrap();
        let c = run_attack(&f, &b, &cfg).unwrap();
        assert_eq!(a, c);
        assert_eq!(a.trace_csv(), c.trace_csv());
    }

    #[test]
    fn success_rate_extremes() {
        struct Always(usize);
        impl ViewpointClassifier<f64> for Always {
            fn predict(&self, _: &Viewpoint<f64>) -> Result<usize> {
                Ok(self.0)
            }
        }
        let b = ViewBounds::standard();
        let p = mixture(2, 5);
        assert_eq!(attack_success_rate(&Always(1), 0, &p, &b, 100, 1).unwrap(), 1.0);
        assert_eq!(attack_success_rate(&Always(0), 0, &p, &b, 100, 1).unwrap(), 0.0);
        assert_eq!(random_search_success_rate(&Always(0), 0, &b, 50, 1).unwrap(), 0.0);
        assert!(attack_success_rate(&Always(0), 0, &p, &b, 0, 1).is_err());
    }

    #[test]
    fn uniform_viewpoints_respect_box() {
        let b = plane_bounds();
        for v in uniform_viewpoints(&b, 500, 3) {
            assert!(b.contains(&v));
            assert_eq!(v.theta, 0.0);
        }
    }

    #[test]
    fn squash_of_mean_within_bounds() {
        let b = ViewBounds::standard();
        let p = mixture(4, 21);
        for mu in &p.mu {
            assert!(b.contains(&squash(mu, &b)));
        }
    }
}
