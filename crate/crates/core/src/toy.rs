//! Bundled toy object suite.
//!
//! Every object has the same gray box body. The class is marked by a small
//! colored tile on top of the box. A ring of colored beads circles the body:
//! the bead facing the natural camera carries the class color and the others
//! cycle through the remaining class colors, so the ring is a spurious cue
//! whose pattern rotates with yaw. A classifier trained only on natural views
//! can key on the ring and break a few degrees off-nominal; a viewpoint-robust
//! one has to read the tile.

use rand::Rng as _;

use crate::render::{Primitive, Rgb, Scene};
use crate::scalar::Real;
use crate::seed;

pub const TOY_CLASSES: usize = 4;

/// Named after the color of the class marker.
pub const CLASS_NAMES: [&str; TOY_CLASSES] = ["red", "green", "blue", "yellow"];

const CLASS_COLORS: [[f64; 3]; TOY_CLASSES] = [[0.9, 0.15, 0.1], [0.1, 0.8, 0.2], [0.15, 0.3, 0.95], [0.95, 0.85, 0.1]];

/// Beads in the color ring.
pub const RING_BEADS: usize = 16;

const BODY_DENSITY: f64 = 25.0;
const BEAD_DENSITY: f64 = 40.0;
const BEAD_RADIUS: f64 = 0.15;
const CAP_HALF: f64 = 0.18;

fn lit<T: Real>(v: [f64; 3]) -> [T; 3] {
    v.map(T::lit)
}

/// One toy object of `class`, with per-object variation drawn from `rng`.
pub fn toy_object<T: Real>(class: usize, rng: &mut seed::Rng) -> Scene<T> {
    assert!(class < TOY_CLASSES, "toy class {class} out of range");
    let scale: f64 = rng.random_range(0.9..1.1);
    let gray: f64 = rng.random_range(0.45..0.65);
    let h = [0.55 * scale, 0.55 * scale, 0.45 * scale];
    let body_color: Rgb<T> = lit([gray, gray, gray * 0.95]);
    let mut primitives = vec![Primitive::cuboid(
        [T::zero(); 3],
        lit(h.map(|x| 2.0 * x)),
        T::lit(BODY_DENSITY),
        body_color,
    )];
    let jitter = |c: [f64; 3], rng: &mut seed::Rng| -> Rgb<T> {
        let d: f64 = rng.random_range(-0.05..0.05);
        lit(c.map(|x| (x + d).clamp(0.0, 1.0)))
    };
    let cap = CAP_HALF * scale;
    primitives.push(Primitive::cuboid(
        lit([0.0, 0.0, h[2] + 0.05]),
        lit([2.0 * cap, 2.0 * cap, 0.1]),
        T::lit(BEAD_DENSITY),
        jitter(CLASS_COLORS[class], rng),
    ));
    // ring clears the body's corners
    let ring = h[0].hypot(h[1]) + BEAD_RADIUS + 0.05;
    for j in 0..RING_BEADS {
        // bead 0 sits on +y, facing the natural camera
        let angle = std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * j as f64 / RING_BEADS as f64;
        let color = jitter(CLASS_COLORS[(class + j) % TOY_CLASSES], rng);
        primitives.push(Primitive::sphere(
            lit([ring * angle.cos(), ring * angle.sin(), 0.0]),
            T::lit(BEAD_RADIUS),
            T::lit(BEAD_DENSITY),
            color,
        ));
    }
    Scene {
        primitives,
        background: lit([0.05, 0.05, 0.08]),
        label: class,
        near: T::lit(1.5),
        far: T::lit(6.5),
    }
}

/// `objects_per_class` objects for each toy class, ordered by class.
pub fn toy_suite<T: Real>(objects_per_class: usize, rng_seed: u64) -> Vec<Scene<T>> {
    (0..TOY_CLASSES)
        .flat_map(|c| {
            let mut rng = seed::rng_for(rng_seed, &[c as u64]);
            (0..objects_per_class)
                .map(|_| toy_object(c, &mut rng))
                .collect::<Vec<_>>()
        })
        .collect()
}
