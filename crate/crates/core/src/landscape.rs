//! Synthetic loss landscapes with known maxima, and grid sweeps over two axes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ViewBounds, Viewpoint, VIEW_DIM};
use crate::scalar::Real;
use crate::target::ViewpointLoss;
use crate::viewdist::{sample_mixture, MixtureParams};

/// Gaussian bump in normalized coordinates `x = (v − b) / a` (active axes only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; VIEW_DIM],
    pub height: f64,
    pub width: f64,
    /// Normalized distance within which a sample counts as hitting this bump.
    pub radius: f64,
}

/// Sum of bumps; the loss is zero far from every bump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PlantedLandscape<T: Real> {
    pub bounds: ViewBounds<T>,
    pub bumps: Vec<Bump>,
}

/// Axes left active by the planted landscapes.
pub const PLANTED_AXES: [usize; 2] = [0, 2];

fn planted_bounds<T: Real>() -> ViewBounds<T> {
    ViewBounds::standard()
        .freeze_except(&PLANTED_AXES, &Viewpoint::natural())
        .expect("natural viewpoint lies in the standard box")
}

fn bump_at(x0: f64, x2: f64, height: f64) -> Bump {
    let mut center = [0.0; VIEW_DIM];
    center[0] = x0;
    center[2] = x2;
    Bump {
        center,
        height,
        width: 0.2,
        radius: 0.3,
    }
}

impl<T: Real> PlantedLandscape<T> {
    /// One bump, off-center on the (ψ, φ) plane.
    pub fn single_bump() -> Self {
        Self {
            bounds: planted_bounds(),
            bumps: vec![bump_at(0.45, -0.35, 1.0)],
        }
    }

    /// Four equal bumps at the corners of a square on the (ψ, φ) plane.
    pub fn four_bumps() -> Self {
        Self {
            bounds: planted_bounds(),
            bumps: vec![
                bump_at(-0.5, -0.5, 1.0),
                bump_at(0.5, -0.5, 1.0),
                bump_at(-0.5, 0.5, 1.0),
                bump_at(0.5, 0.5, 1.0),
            ],
        }
    }

    pub fn normalized(&self, v: &Viewpoint<T>) -> [f64; VIEW_DIM] {
        let a = self.bounds.half_width();
        let b = self.bounds.center();
        let v = v.to_array();
        std::array::from_fn(|i| {
            if self.bounds.is_frozen(i) {
                0.0
            } else {
                ((v[i] - b[i]) / a[i]).as_f64()
            }
        })
    }

    fn distance(&self, x: &[f64; VIEW_DIM], bump: &Bump) -> f64 {
        (0..VIEW_DIM)
            .filter(|&i| !self.bounds.is_frozen(i))
            .map(|i| (x[i] - bump.center[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Index of the bump whose radius contains `v`.
    pub fn bump_of(&self, v: &Viewpoint<T>) -> Option<usize> {
        let x = self.normalized(v);
        self.bumps.iter().position(|b| self.distance(&x, b) <= b.radius)
    }

    pub fn value(&self, v: &Viewpoint<T>) -> f64 {
        let x = self.normalized(v);
        self.bumps
            .iter()
            .map(|b| {
                let d = self.distance(&x, b);
                b.height * (-d * d / (2.0 * b.width * b.width)).exp()
            })
            .sum()
    }

    /// Share of `n` mixture draws landing in each bump.
    pub fn bump_masses(&self, params: &MixtureParams<T>, n: usize, rng_seed: u64) -> Vec<f64> {
        let mut counts = vec![0usize; self.bumps.len()];
        for d in sample_mixture(params, &self.bounds, n, rng_seed) {
            if let Some(i) = self.bump_of(&d.v) {
                counts[i] += 1;
            }
        }
        counts.into_iter().map(|c| c as f64 / n as f64).collect()
    }
}

impl<T: Real> ViewpointLoss<T> for PlantedLandscape<T> {
    fn loss(&self, v: &Viewpoint<T>) -> Result<T> {
        Ok(T::lit(self.value(v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
    pub loss: f64,
}

/// Loss on an `nx × ny` grid of cell centers over axes `(ax, ay)`,
/// other coordinates taken from `base`. Row-major in `y`, then `x`.
pub fn loss_grid<T: Real, L: ViewpointLoss<T> + ?Sized>(
    oracle: &L,
    bounds: &ViewBounds<T>,
    axes: (usize, usize),
    n: (usize, usize),
    base: &Viewpoint<T>,
) -> Result<Vec<GridPoint>> {
    let (ax, ay) = axes;
    if ax >= VIEW_DIM || ay >= VIEW_DIM || ax == ay {
        return Err(Error::invalid(format!("bad grid axes ({ax}, {ay})")));
    }
    if n.0 == 0 || n.1 == 0 {
        return Err(Error::invalid("grid needs at least one cell per axis"));
    }
    let coord = |axis: usize, i: usize, count: usize| {
        let lo = bounds.min[axis].as_f64();
        let hi = bounds.max[axis].as_f64();
        lo + (hi - lo) * (i as f64 + 0.5) / count as f64
    };
    let cells: Vec<(f64, f64)> = (0..n.1)
        .flat_map(|j| (0..n.0).map(move |i| (i, j)))
        .map(|(i, j)| (coord(ax, i, n.0), coord(ay, j, n.1)))
        .collect();
    cells
        .par_iter()
        .map(|&(x, y)| {
            let mut v = base.to_array();
            v[ax] = T::lit(x);
            v[ay] = T::lit(y);
            let loss = oracle.loss(&Viewpoint::from_array(v))?.as_f64();
            Ok(GridPoint { x, y, loss })
        })
        .collect()
}

/// Grid cell with the largest loss.
pub fn grid_argmax(grid: &[GridPoint]) -> Option<GridPoint> {
    grid.iter().copied().fold(None, |best, p| match best {
        Some(b) if b.loss >= p.loss => Some(b),
        _ => Some(p),
    })
}

pub fn grid_csv(grid: &[GridPoint], x_name: &str, y_name: &str) -> String {
    let mut s = format!("{x_name},{y_name},loss\n");
    for p in grid {
        s.push_str(&format!("{},{},{}\n", p.x, p.y, p.loss));
    }
    s
}
