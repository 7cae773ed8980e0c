//! Tanh-squashed Gaussian mixtures over viewpoints.
//!
//! The pre-squash variable `u` follows `Σ_k ω_k N(μ_k, diag σ_k²)` and the
//! viewpoint is `v = a ⊙ tanh(u) + b`, where `a` and `b` are the half-widths
//! and centers of the [`ViewBounds`]. Frozen axes (`min == max`) are pinned
//! to `b` and carry no density.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ViewBounds, Viewpoint, VIEW_DIM};
use crate::scalar::Real;
use crate::seed::{self, Rng};

/// Lower bound enforced on every standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-4;

/// Lower bound on mixture weights before renormalization.
pub const OMEGA_FLOOR: f64 = 1e-3;

/// Mixture parameters `{ω_k, μ_k, σ_k}` in pre-squash space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MixtureParams<T: Real> {
    pub omega: Vec<T>,
    pub mu: Vec<[T; VIEW_DIM]>,
    pub sigma: Vec<[T; VIEW_DIM]>,
}

impl<T: Real> MixtureParams<T> {
    pub fn k(&self) -> usize {
        self.omega.len()
    }

    /// Uniform weights, means uniform in `[-1.5, 1.5]⁶`, all `σ = 0.5`.
    pub fn init(k: usize, rng: &mut Rng) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        let w = T::one() / T::from_count(k);
        let mu = (0..k)
            .map(|_| std::array::from_fn(|_| T::lit(rng.random_range(-1.5..=1.5))))
            .collect();
        Ok(Self {
            omega: vec![w; k],
            mu,
            sigma: vec![[T::lit(0.5); VIEW_DIM]; k],
        })
    }

    /// Single component with the given mean and a shared standard deviation.
    pub fn single(mu: [T; VIEW_DIM], sigma: T) -> Self {
        Self {
            omega: vec![T::one()],
            mu: vec![mu],
            sigma: vec![[sigma; VIEW_DIM]; 1],
        }
    }

    pub fn validate(&self, bounds: &ViewBounds<T>) -> Result<()> {
        let k = self.k();
        if k == 0 || self.mu.len() != k || self.sigma.len() != k {
            return Err(Error::validation(
                "mixture",
                format!(
                    "component counts disagree: omega {}, mu {}, sigma {}",
                    k,
                    self.mu.len(),
                    self.sigma.len()
                ),
            ));
        }
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(16.0) * T::from_count(k));
        let mut sum = T::zero();
        for (i, w) in self.omega.iter().enumerate() {
            if !(*w >= T::zero() && *w <= T::one()) {
                return Err(Error::validation(format!("omega[{i}]"), format!("{w} not in [0, 1]")));
            }
            sum += *w;
        }
        if (sum - T::one()).abs() > tol {
            return Err(Error::validation("omega", format!("weights sum to {sum}")));
        }
        let floor = T::lit(SIGMA_FLOOR);
        for c in 0..k {
            for i in 0..VIEW_DIM {
                if !self.mu[c][i].is_finite() {
                    return Err(Error::validation(format!("mu[{c}][{i}]"), "must be finite"));
                }
                let s = self.sigma[c][i];
                if !s.is_finite() || (!bounds.is_frozen(i) && s < floor) {
                    return Err(Error::validation(
                        format!("sigma[{c}][{i}]"),
                        format!("{s} below floor {SIGMA_FLOOR}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Index of the heaviest component.
    pub fn dominant(&self) -> usize {
        let mut best = 0;
        for (i, w) in self.omega.iter().enumerate() {
            if *w > self.omega[best] {
                best = i;
            }
        }
        best
    }
}

/// Largest |tanh| value kept so that squashed samples stay strictly inside the box.
fn tanh_limit<T: Real>() -> T {
    T::one() - T::epsilon().sqrt()
}

/// `v = a ⊙ tanh(u) + b`; frozen axes map to their pinned value.
pub fn squash<T: Real>(u: &[T; VIEW_DIM], bounds: &ViewBounds<T>) -> Viewpoint<T> {
    let a = bounds.half_width();
    let b = bounds.center();
    let lim = tanh_limit::<T>();
    Viewpoint::from_array(std::array::from_fn(|i| {
        if bounds.is_frozen(i) {
            bounds.min[i]
        } else {
            a[i] * u[i].tanh().max(-lim).min(lim) + b[i]
        }
    }))
}

/// Normalized coordinates `(v - b) / a` on active axes; errors at or beyond the box.
fn normalized<T: Real>(v: &Viewpoint<T>, bounds: &ViewBounds<T>) -> Result<[T; VIEW_DIM]> {
    let a = bounds.half_width();
    let b = bounds.center();
    let v = v.to_array();
    let mut x = [T::zero(); VIEW_DIM];
    for i in 0..VIEW_DIM {
        if bounds.is_frozen(i) {
            continue;
        }
        let xi = (v[i] - b[i]) / a[i];
        if !(xi > -T::one() && xi < T::one()) {
            return Err(Error::Domain {
                axis: i,
                value: v[i].as_f64(),
            });
        }
        x[i] = xi;
    }
    Ok(x)
}

/// Inverse of [`squash`] on active axes (frozen axes return 0).
pub fn unsquash<T: Real>(v: &Viewpoint<T>, bounds: &ViewBounds<T>) -> Result<[T; VIEW_DIM]> {
    let x = normalized(v, bounds)?;
    Ok(std::array::from_fn(|i| {
        if bounds.is_frozen(i) {
            T::zero()
        } else {
            x[i].atanh()
        }
    }))
}

/// One joint draw `(Γ, r)` and the resulting `u` and `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawRecord<T: Real> {
    /// Index of the selected component (the hot entry of Γ).
    pub component: usize,
    pub r: [T; VIEW_DIM],
    pub u: [T; VIEW_DIM],
    pub v: Viewpoint<T>,
}

impl<T: Real> DrawRecord<T> {
    pub fn gamma(&self, k: usize) -> Vec<T> {
        (0..k)
            .map(|i| if i == self.component { T::one() } else { T::zero() })
            .collect()
    }
}

/// `u = μ_k + σ_k ⊙ r`.
#[inline]
pub fn reparameterize<T: Real>(params: &MixtureParams<T>, k: usize, r: &[T; VIEW_DIM]) -> [T; VIEW_DIM] {
    std::array::from_fn(|i| params.mu[k][i] + params.sigma[k][i] * r[i])
}

fn pick_component<T: Real>(omega: &[T], u01: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in omega.iter().enumerate() {
        let w = w.as_f64();
        if w > 0.0 {
            acc += w;
            last = i;
            if u01 < acc {
                return i;
            }
        }
    }
    last
}

/// Draws `n` records: `Γ ~ Multinomial(ω)`, `r ~ N(0, I)`.
pub fn sample_mixture<T: Real>(
    params: &MixtureParams<T>,
    bounds: &ViewBounds<T>,
    n: usize,
    rng_seed: u64,
) -> Vec<DrawRecord<T>> {
    let mut rng = seed::rng(rng_seed);
    (0..n).map(|_| draw_one(params, bounds, &mut rng)).collect()
}

pub(crate) fn draw_one<T: Real>(params: &MixtureParams<T>, bounds: &ViewBounds<T>, rng: &mut Rng) -> DrawRecord<T> {
    let component = pick_component(&params.omega, rng.random::<f64>());
    let r: [T; VIEW_DIM] = std::array::from_fn(|_| {
        let z: f64 = StandardNormal.sample(rng);
        T::lit(z)
    });
    let u = reparameterize(params, component, &r);
    DrawRecord {
        component,
        r,
        u,
        v: squash(&u, bounds),
    }
}

fn log_normal_pdf<T: Real>(x: T, mu: T, sigma: T) -> T {
    let z = (x - mu) / sigma;
    -T::lit(0.5) * z * z - sigma.ln() - T::lit(0.5) * (T::PI() + T::PI()).ln()
}

/// `log ω_k + log N(u | μ_k, σ_k²)` over active axes, for every component.
pub fn component_log_joint<T: Real>(params: &MixtureParams<T>, bounds: &ViewBounds<T>, u: &[T; VIEW_DIM]) -> Vec<T> {
    (0..params.k())
        .map(|k| {
            let mut s = params.omega[k].ln();
            for i in 0..VIEW_DIM {
                if !bounds.is_frozen(i) {
                    s += log_normal_pdf(u[i], params.mu[k][i], params.sigma[k][i]);
                }
            }
            s
        })
        .collect()
}

pub fn log_sum_exp<T: Real>(xs: &[T]) -> T {
    let m = xs.iter().copied().fold(T::neg_infinity(), T::max);
    if m == T::neg_infinity() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<T>().ln()
}

/// Mixture log-density of `u` over active axes.
pub fn log_density_u<T: Real>(params: &MixtureParams<T>, bounds: &ViewBounds<T>, u: &[T; VIEW_DIM]) -> T {
    log_sum_exp(&component_log_joint(params, bounds, u))
}

/// `∂ log p(u) / ∂u` over active axes (zero on frozen ones).
pub fn grad_log_density_u<T: Real>(
    params: &MixtureParams<T>,
    bounds: &ViewBounds<T>,
    u: &[T; VIEW_DIM],
) -> [T; VIEW_DIM] {
    let joint = component_log_joint(params, bounds, u);
    let lse = log_sum_exp(&joint);
    let mut g = [T::zero(); VIEW_DIM];
    for (k, lj) in joint.iter().enumerate() {
        let resp = (*lj - lse).exp();
        if resp == T::zero() {
            continue;
        }
        for i in 0..VIEW_DIM {
            if !bounds.is_frozen(i) {
                let s = params.sigma[k][i];
                g[i] -= resp * (u[i] - params.mu[k][i]) / (s * s);
            }
        }
    }
    g
}

/// Log-density of the squashed distribution at `v`:
/// `log p_u(u) − Σ_i log(a_i (1 − tanh² u_i))` over active axes.
pub fn log_density_v<T: Real>(params: &MixtureParams<T>, bounds: &ViewBounds<T>, v: &Viewpoint<T>) -> Result<T> {
    let x = normalized(v, bounds)?;
    let a = bounds.half_width();
    let u: [T; VIEW_DIM] = std::array::from_fn(|i| if bounds.is_frozen(i) { T::zero() } else { x[i].atanh() });
    let mut log_jac = T::zero();
    for i in 0..VIEW_DIM {
        if !bounds.is_frozen(i) {
            log_jac += a[i].ln() + ((T::one() - x[i]) * (T::one() + x[i])).ln();
        }
    }
    Ok(log_density_u(params, bounds, &u) - log_jac)
}

/// Monte Carlo entropy with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate<T> {
    pub mean: T,
    pub std_error: T,
}

/// `H = −E[log p(v)]` estimated from `q` draws.
pub fn entropy_estimate<T: Real>(
    params: &MixtureParams<T>,
    bounds: &ViewBounds<T>,
    q: usize,
    rng_seed: u64,
) -> Result<EntropyEstimate<T>> {
    if q == 0 {
        return Err(Error::invalid("entropy estimate needs q >= 1"));
    }
    let draws = sample_mixture(params, bounds, q, rng_seed);
    let mut vals = Vec::with_capacity(q);
    for d in &draws {
        vals.push(-log_density_v(params, bounds, &d.v)?.as_f64());
    }
    let n = q as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = if q > 1 {
        vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(EntropyEstimate {
        mean: T::lit(mean),
        std_error: T::lit((var / n).sqrt()),
    })
}

/// Serialized form of a mixture together with its bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MixtureDump<T: Real> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header: Option<serde_json::Value>,
    #[serde(rename = "K")]
    pub k: usize,
    pub omega: Vec<T>,
    pub mu: Vec<[T; VIEW_DIM]>,
    pub sigma: Vec<[T; VIEW_DIM]>,
    pub bounds: ViewBounds<T>,
}

impl<T: Real> MixtureDump<T> {
    pub fn new(params: &MixtureParams<T>, bounds: &ViewBounds<T>) -> Self {
        Self {
            header: None,
            k: params.k(),
            omega: params.omega.clone(),
            mu: params.mu.clone(),
            sigma: params.sigma.clone(),
            bounds: *bounds,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mixture dump serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: "<mixture dump>".into(),
            reason: e.to_string(),
        })?;
        if dump.k != dump.omega.len() {
            return Err(Error::validation(
                "K",
                format!("{} but {} weights", dump.k, dump.omega.len()),
            ));
        }
        dump.params().validate(&dump.bounds)?;
        Ok(dump)
    }

    pub fn params(&self) -> MixtureParams<T> {
        MixtureParams {
            omega: self.omega.clone(),
            mu: self.mu.clone(),
            sigma: self.sigma.clone(),
        }
    }
}
