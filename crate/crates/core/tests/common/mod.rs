//! Reference implementations used as test oracles. They share no code with
//! the library beyond its public types.

#![allow(dead_code)]

use viewrobust::geometry::{ViewBounds, Viewpoint, VIEW_DIM};
use viewrobust::viewdist::MixtureParams;

/// Smooth surrogate loss: a Gaussian bump on normalized coordinates of ψ and φ.
pub fn surrogate_loss(v: &Viewpoint<f64>, bounds: &ViewBounds<f64>) -> f64 {
    let a = bounds.half_width();
    let b = bounds.center();
    let x0 = (v.psi - b[0]) / a[0];
    let x2 = (v.phi - b[2]) / a[2];
    (-((x0 - 0.3).powi(2) + (x2 + 0.1).powi(2)) / 0.2).exp()
}

/// ψ and φ active, everything else pinned to the natural viewpoint.
pub fn two_axis_bounds() -> ViewBounds<f64> {
    ViewBounds::standard()
        .freeze_except(&[0, 2], &Viewpoint::natural())
        .unwrap()
}

pub fn mixture_k1() -> MixtureParams<f64> {
    let mut mu = [0.0; VIEW_DIM];
    let mut sigma = [0.5; VIEW_DIM];
    mu[0] = 0.3;
    mu[2] = -0.2;
    sigma[0] = 0.4;
    sigma[2] = 0.6;
    MixtureParams {
        omega: vec![1.0],
        mu: vec![mu],
        sigma: vec![sigma],
    }
}

pub fn mixture_k3() -> MixtureParams<f64> {
    let comp = |m0: f64, m2: f64, s0: f64, s2: f64| {
        let mut mu = [0.0; VIEW_DIM];
        let mut sigma = [0.5; VIEW_DIM];
        mu[0] = m0;
        mu[2] = m2;
        sigma[0] = s0;
        sigma[2] = s2;
        (mu, sigma)
    };
    let c = [
        comp(0.3, -0.2, 0.4, 0.6),
        comp(-0.6, 0.4, 0.5, 0.4),
        comp(0.1, 0.8, 0.45, 0.5),
    ];
    MixtureParams {
        omega: vec![0.5, 0.3, 0.2],
        mu: c.iter().map(|x| x.0).collect(),
        sigma: c.iter().map(|x| x.1).collect(),
    }
}

fn gauss_logpdf(x: f64, m: f64, s: f64) -> f64 {
    let z = (x - m) / s;
    -0.5 * z * z - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Log-density of the squashed mixture at pre-squash point `(u0, u2)`,
/// expressed as a density over `(ψ, φ)`.
fn log_pv(p: &MixtureParams<f64>, a: &[f64; VIEW_DIM], u0: f64, u2: f64) -> f64 {
    let terms: Vec<f64> = (0..p.omega.len())
        .map(|k| {
            p.omega[k].ln() + gauss_logpdf(u0, p.mu[k][0], p.sigma[k][0]) + gauss_logpdf(u2, p.mu[k][2], p.sigma[k][2])
        })
        .collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
    let jac = |u: f64, ai: f64| ai.ln() + (1.0 / u.cosh().powi(2)).ln();
    lse - jac(u0, a[0]) - jac(u2, a[2])
}

/// `E[L] + λ H` for a two-axis mixture by trapezoid quadrature in `u`.
pub fn objective_by_quadrature<F: Fn(&Viewpoint<f64>) -> f64>(
    p: &MixtureParams<f64>,
    bounds: &ViewBounds<f64>,
    loss: F,
    lambda: f64,
) -> f64 {
    const N: usize = 241;
    const SPAN: f64 = 9.0;
    let a = bounds.half_width();
    let b = bounds.center();
    let h = 2.0 * SPAN / (N - 1) as f64;
    let nodes: Vec<(f64, f64)> = (0..N)
        .map(|i| {
            let z = -SPAN + h * i as f64;
            let w = if i == 0 || i == N - 1 { 0.5 } else { 1.0 };
            (z, w * h * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt())
        })
        .collect();
    let mut total = 0.0;
    for k in 0..p.omega.len() {
        let mut acc = 0.0;
        for &(z0, w0) in &nodes {
            let u0 = p.mu[k][0] + p.sigma[k][0] * z0;
            for &(z2, w2) in &nodes {
                let u2 = p.mu[k][2] + p.sigma[k][2] * z2;
                let mut v = Viewpoint::natural();
                v.psi = b[0] + a[0] * u0.tanh();
                v.phi = b[2] + a[2] * u2.tanh();
                acc += w0 * w2 * (loss(&v) - lambda * log_pv(p, &a, u0, u2));
            }
        }
        total += p.omega[k] * acc;
    }
    total
}

/// Central differences of the quadrature objective in every active `μ` and
/// `σ` entry, flattened as `[μ_0ψ, μ_0φ, σ_0ψ, σ_0φ, μ_1ψ, ...]`.
pub fn fd_gradient<F: Fn(&Viewpoint<f64>) -> f64 + Copy>(
    p: &MixtureParams<f64>,
    bounds: &ViewBounds<f64>,
    loss: F,
    lambda: f64,
    step: f64,
) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 0..p.omega.len() {
        for field in 0..2 {
            for axis in [0, 2] {
                let shifted = |d: f64| {
                    let mut q = p.clone();
                    if field == 0 {
                        q.mu[k][axis] += d;
                    } else {
                        q.sigma[k][axis] += d;
                    }
                    objective_by_quadrature(&q, bounds, loss, lambda)
                };
                out.push((shifted(step) - shifted(-step)) / (2.0 * step));
            }
        }
    }
    out
}

pub fn relative_l2(est: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = est.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = reference.iter().map(|b| b * b).sum();
    (num / den).sqrt()
}

/// `P[Bin(n, p) ≥ k]` by summing the mass function term by term.
pub fn binomial_tail_by_enumeration(k: u64, n: u64, p: f64) -> f64 {
    let mut log_choose = 0.0f64;
    let mut sum = 0.0;
    for j in 0..=n {
        if j > 0 {
            log_choose += ((n - j + 1) as f64).ln() - (j as f64).ln();
        }
        if j >= k {
            let lp = if p == 0.0 {
                if j == 0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            } else if p == 1.0 {
                if j == n {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            } else {
                log_choose + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()
            };
            sum += lp.exp();
        }
    }
    sum.min(1.0)
}

/// Exact one-sided lower bound by bisection on the enumerated tail.
pub fn lower_bound_by_enumeration(k: u64, n: u64, alpha: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if binomial_tail_by_enumeration(k, n, mid) >= alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
