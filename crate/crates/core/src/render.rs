//! Volumetric rendering of analytic density fields.
//!
//! Scenes are unions of constant-density spheres and axis-aligned boxes. A
//! pixel is composited front to back over stratified depth samples:
//!
//! `C = Σ_m T_m · (1 − exp(−τ_m δ_m)) · c_m + T_{M+1} · background`,
//! `T_m = exp(−Σ_{j<m} τ_j δ_j)`, `δ_m = t_{m+1} − t_m`, `δ_M = far − t_M`.

use std::io::Write;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, camera_pose_from_viewpoint, pixel_ray, Ray, Vec3, Viewpoint};
use crate::scalar::Real;
use crate::seed;

pub type Rgb<T> = [T; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", bound = "")]
pub enum Shape<T: Real> {
    Sphere {
        radius: T,
    },
    /// Full edge lengths along x, y and z.
    Box {
        size: Vec3<T>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Primitive<T: Real> {
    #[serde(flatten)]
    pub shape: Shape<T>,
    pub center: Vec3<T>,
    /// Extinction per scene unit.
    pub density: T,
    pub color: Rgb<T>,
}

impl<T: Real> Primitive<T> {
    pub fn sphere(center: Vec3<T>, radius: T, density: T, color: Rgb<T>) -> Self {
        Self {
            shape: Shape::Sphere { radius },
            center,
            density,
            color,
        }
    }

    pub fn cuboid(center: Vec3<T>, size: Vec3<T>, density: T, color: Rgb<T>) -> Self {
        Self {
            shape: Shape::Box { size },
            center,
            density,
            color,
        }
    }

    #[inline]
    pub fn contains(&self, p: &Vec3<T>) -> bool {
        let d = [p[0] - self.center[0], p[1] - self.center[1], p[2] - self.center[2]];
        match self.shape {
            Shape::Sphere { radius } => geometry::dot(&d, &d) < radius * radius,
            Shape::Box { size } => {
                let h = T::lit(0.5);
                d[0].abs() < size[0] * h && d[1].abs() < size[1] * h && d[2].abs() < size[2] * h
            }
        }
    }

    /// Parametric interval where the ray is inside the primitive, if any.
    fn ray_interval(&self, ray: &Ray<T>) -> Option<(T, T)> {
        let oc = [
            ray.origin[0] - self.center[0],
            ray.origin[1] - self.center[1],
            ray.origin[2] - self.center[2],
        ];
        match self.shape {
            Shape::Sphere { radius } => {
                let b = geometry::dot(&oc, &ray.direction);
                let c = geometry::dot(&oc, &oc) - radius * radius;
                let disc = b * b - c;
                if disc <= T::zero() {
                    return None;
                }
                let s = disc.sqrt();
                Some((-b - s, -b + s))
            }
            Shape::Box { size } => {
                let mut lo = T::neg_infinity();
                let mut hi = T::infinity();
                for i in 0..3 {
                    let half = size[i] * T::lit(0.5);
                    let d = ray.direction[i];
                    if d == T::zero() {
                        if oc[i].abs() >= half {
                            return None;
                        }
                        continue;
                    }
                    let t0 = (-half - oc[i]) / d;
                    let t1 = (half - oc[i]) / d;
                    lo = lo.max(t0.min(t1));
                    hi = hi.min(t0.max(t1));
                }
                (lo < hi).then_some((lo, hi))
            }
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        let finite3 = |v: &Vec3<T>| v.iter().all(|x| x.is_finite());
        if !finite3(&self.center) {
            return Err(Error::validation(format!("{path}.center"), "must be finite"));
        }
        if !(self.density.is_finite() && self.density >= T::zero()) {
            return Err(Error::validation(
                format!("{path}.density"),
                format!("must be finite and >= 0, got {}", self.density),
            ));
        }
        for (i, c) in self.color.iter().enumerate() {
            if !(*c >= T::zero() && *c <= T::one()) {
                return Err(Error::validation(
                    format!("{path}.color[{i}]"),
                    format!("must lie in [0, 1], got {c}"),
                ));
            }
        }
        match self.shape {
            Shape::Sphere { radius } => {
                if !(radius.is_finite() && radius > T::zero()) {
                    return Err(Error::validation(
                        format!("{path}.radius"),
                        format!("must be finite and > 0, got {radius}"),
                    ));
                }
            }
            Shape::Box { size } => {
                for (i, s) in size.iter().enumerate() {
                    if !(s.is_finite() && *s > T::zero()) {
                        return Err(Error::validation(
                            format!("{path}.size[{i}]"),
                            format!("must be finite and > 0, got {s}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Scene<T: Real> {
    pub primitives: Vec<Primitive<T>>,
    pub background: Rgb<T>,
    pub label: usize,
    pub near: T,
    pub far: T,
}

impl<T: Real> Scene<T> {
    pub fn empty(background: Rgb<T>, near: T, far: T) -> Self {
        Self {
            primitives: Vec::new(),
            background,
            label: 0,
            near,
            far,
        }
    }

    /// Checks field ranges. `num_classes`, when given, bounds the label.
    pub fn validate(&self, num_classes: Option<usize>) -> Result<()> {
        for (i, p) in self.primitives.iter().enumerate() {
            p.validate(&format!("primitives[{i}]"))?;
        }
        for (i, c) in self.background.iter().enumerate() {
            if !(*c >= T::zero() && *c <= T::one()) {
                return Err(Error::validation(
                    format!("background[{i}]"),
                    format!("must lie in [0, 1], got {c}"),
                ));
            }
        }
        if !(self.near > T::zero() && self.near.is_finite()) {
            return Err(Error::validation("near", format!("must be > 0, got {}", self.near)));
        }
        if !(self.far > self.near && self.far.is_finite()) {
            return Err(Error::validation(
                "far",
                format!("must exceed near ({}), got {}", self.near, self.far),
            ));
        }
        if let Some(c) = num_classes {
            if self.label >= c {
                return Err(Error::validation("label", format!("must be < {c}, got {}", self.label)));
            }
        }
        Ok(())
    }

    /// Density and density-weighted color at a point.
    #[inline]
    pub fn field(&self, p: &Vec3<T>) -> (T, Rgb<T>) {
        field_over(self.primitives.iter(), p)
    }

    pub fn max_channel(&self) -> T {
        self.primitives
            .iter()
            .flat_map(|p| p.color)
            .chain(self.background)
            .fold(T::zero(), T::max)
    }
}

#[inline]
fn field_over<'a, T: Real>(prims: impl Iterator<Item = &'a Primitive<T>>, p: &Vec3<T>) -> (T, Rgb<T>) {
    let mut tau = T::zero();
    let mut acc = [T::zero(); 3];
    for prim in prims {
        if prim.density > T::zero() && prim.contains(p) {
            tau += prim.density;
            for c in 0..3 {
                acc[c] += prim.density * prim.color[c];
            }
        }
    }
    if tau > T::zero() {
        for a in &mut acc {
            *a /= tau;
        }
    }
    (tau, acc)
}

/// Reads and validates a scene file.
pub fn load_scene<T: Real>(path: &Path) -> Result<Scene<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let scene: Scene<T> = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    scene.validate(None)?;
    Ok(scene)
}

pub fn save_scene<T: Real>(scene: &Scene<T>, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(scene).expect("scene serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// How depths are placed inside each stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleMode {
    Midpoint,
    Jittered { seed: u64 },
}

/// One depth per stratum of `[near, far]`, strictly increasing.
pub fn sample_points_stratified<T: Real>(near: T, far: T, m_samples: usize, mode: SampleMode) -> Result<Vec<T>> {
    if m_samples == 0 {
        return Err(Error::invalid("need at least one depth sample"));
    }
    if !(far > near) {
        return Err(Error::invalid(format!("empty depth range [{near}, {far}]")));
    }
    let step = (far - near) / T::from_count(m_samples);
    let mut out = Vec::with_capacity(m_samples);
    match mode {
        SampleMode::Midpoint => {
            let h = T::lit(0.5);
            out.extend((0..m_samples).map(|m| near + (T::from_count(m) + h) * step));
        }
        SampleMode::Jittered { seed } => {
            let mut rng = seed::rng(seed);
            for m in 0..m_samples {
                let u: f64 = rng.random();
                out.push(near + (T::from_count(m) + T::lit(u)) * step);
            }
        }
    }
    Ok(out)
}

/// Composites the samples `ts` along `ray`. Returns the pixel color and the
/// transmittance in front of every sample plus the residual one.
pub fn composite<T: Real>(scene: &Scene<T>, ray: &Ray<T>, ts: &[T]) -> (Rgb<T>, Vec<T>) {
    let mut trans = Vec::with_capacity(ts.len() + 1);
    let rgb = composite_inner(scene, ray, ts, Some(&mut trans));
    (rgb, trans)
}

fn composite_inner<T: Real>(scene: &Scene<T>, ray: &Ray<T>, ts: &[T], mut trace: Option<&mut Vec<T>>) -> Rgb<T> {
    // primitives the ray never enters cannot contribute density
    let hit: Vec<&Primitive<T>> = scene
        .primitives
        .iter()
        .filter(|p| p.density > T::zero())
        .filter(|p| {
            p.ray_interval(ray)
                .is_some_and(|(lo, hi)| hi > scene.near && lo < scene.far)
        })
        .collect();

    let mut rgb = [T::zero(); 3];
    let mut transmittance = T::one();
    if !hit.is_empty() {
        for (m, &t) in ts.iter().enumerate() {
            if let Some(tr) = trace.as_deref_mut() {
                tr.push(transmittance);
            }
            let delta = match ts.get(m + 1) {
                Some(&next) => next - t,
                None => scene.far - t,
            };
            let (tau, color) = field_over(hit.iter().copied(), &ray.at(t));
            if tau > T::zero() {
                let atten = (-tau * delta).exp();
                let w = transmittance * (T::one() - atten);
                for c in 0..3 {
                    rgb[c] += w * color[c];
                }
                transmittance *= atten;
            }
        }
    } else if let Some(tr) = trace.as_deref_mut() {
        tr.extend(std::iter::repeat_n(T::one(), ts.len()));
    }
    if let Some(tr) = trace {
        tr.push(transmittance);
    }
    for c in 0..3 {
        rgb[c] = (rgb[c] + transmittance * scene.background[c])
            .max(T::zero())
            .min(T::one());
    }
    rgb
}

/// Renders one ray with `m_samples` stratified depths.
pub fn render_pixel<T: Real>(scene: &Scene<T>, ray: &Ray<T>, m_samples: usize, mode: SampleMode) -> Result<Rgb<T>> {
    let ts = sample_points_stratified(scene.near, scene.far, m_samples, mode)?;
    Ok(composite_inner(scene, ray, &ts, None))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig<T: Real> {
    pub width: usize,
    pub height: usize,
    /// Vertical field of view in degrees.
    pub fov: T,
    pub m_samples: usize,
    /// `None` samples stratum midpoints; `Some(seed)` jitters per pixel.
    pub seed: Option<u64>,
    pub base_position: Vec3<T>,
}

impl<T: Real> Default for RenderConfig<T> {
    fn default() -> Self {
        Self {
            width: 32,
            height: 32,
            fov: T::lit(50.0),
            m_samples: 48,
            seed: Some(0),
            base_position: geometry::default_base_position(),
        }
    }
}

impl<T: Real> RenderConfig<T> {
    pub fn input_len(&self) -> usize {
        self.width * self.height * 3
    }

    fn pixel_mode(&self, index: usize) -> SampleMode {
        match self.seed {
            None => SampleMode::Midpoint,
            Some(s) => SampleMode::Jittered {
                seed: seed::derive(s, &[index as u64]),
            },
        }
    }
}

/// Row-major RGB image with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage<T: Real> {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<T>,
}

impl<T: Real> RenderedImage<T> {
    pub fn filled(width: usize, height: usize, rgb: Rgb<T>) -> Self {
        let pixels = (0..width * height).flat_map(|_| rgb).collect();
        Self { width, height, pixels }
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb<T> {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|c| (c.as_f64().clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    /// Binary PPM (P6); `comments` become `#` lines after the magic number.
    pub fn write_ppm(&self, w: &mut impl Write, comments: &[String]) -> std::io::Result<()> {
        writeln!(w, "P6")?;
        for c in comments {
            for line in c.lines() {
                writeln!(w, "# {line}")?;
            }
        }
        writeln!(w, "{} {}\n255", self.width, self.height)?;
        w.write_all(&self.to_bytes())
    }

    /// One row per pixel: `x,y,r,g,b`.
    pub fn write_csv(&self, w: &mut impl Write, comments: &[String]) -> std::io::Result<()> {
        for c in comments {
            for line in c.lines() {
                writeln!(w, "# {line}")?;
            }
        }
        writeln!(w, "x,y,r,g,b")?;
        for y in 0..self.height {
            for x in 0..self.width {
                let p = self.pixel(x, y);
                writeln!(w, "{x},{y},{},{},{}", p[0], p[1], p[2])?;
            }
        }
        Ok(())
    }

    /// Tiles equally sized images into a grid `cols` wide.
    pub fn tile(images: &[RenderedImage<T>], cols: usize) -> Option<Self> {
        let first = images.first()?;
        let cols = cols.max(1).min(images.len());
        let rows = images.len().div_ceil(cols);
        let (w, h) = (first.width, first.height);
        let mut out = Self::filled(w * cols, h * rows, [T::zero(); 3]);
        for (n, img) in images.iter().enumerate() {
            let (ox, oy) = ((n % cols) * w, (n / cols) * h);
            for y in 0..h {
                for x in 0..w {
                    let dst = ((oy + y) * out.width + ox + x) * 3;
                    out.pixels[dst..dst + 3].copy_from_slice(&img.pixel(x, y));
                }
            }
        }
        Some(out)
    }
}

/// Renders the scene from viewpoint `v`. Deterministic for a fixed config.
pub fn render_image<T: Real>(scene: &Scene<T>, v: &Viewpoint<T>, config: &RenderConfig<T>) -> Result<RenderedImage<T>> {
    let pose = camera_pose_from_viewpoint(v, &config.base_position)?;
    let (w, h) = (config.width, config.height);
    // validates the frustum once so per-pixel calls cannot fail
    pixel_ray(&pose, 0, 0, w, h, config.fov)?;
    if config.m_samples == 0 {
        return Err(Error::invalid("need at least one depth sample"));
    }
    let midpoints = sample_points_stratified(scene.near, scene.far, config.m_samples, SampleMode::Midpoint)?;
    let pixels = (0..w * h)
        .into_par_iter()
        .flat_map_iter(|i| {
            let ray = pixel_ray(&pose, i % w, i / w, w, h, config.fov).expect("validated frustum");
            let rgb = match config.pixel_mode(i) {
                SampleMode::Midpoint => composite_inner(scene, &ray, &midpoints, None),
                mode => {
                    let ts = sample_points_stratified(scene.near, scene.far, config.m_samples, mode)
                        .expect("validated depth range");
                    composite_inner(scene, &ray, &ts, None)
                }
            };
            rgb.into_iter()
        })
        .collect();
    Ok(RenderedImage {
        width: w,
        height: h,
        pixels,
    })
}
