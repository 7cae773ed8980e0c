//! Viewpoint-robustness toolkit: a differentiable-free volume renderer,
//! tanh-squashed Gaussian-mixture viewpoint distributions, a black-box
//! multimodal viewpoint attack, adversarial training against a pool of such
//! distributions, and randomized-smoothing certification over viewpoints.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases at the crate root pin the common `f64` instantiation.

pub mod classifier;
pub mod error;
pub mod geometry;
pub mod gmvfool;
pub mod landscape;
pub mod render;
pub mod scalar;
pub mod seed;
pub mod stats;
pub mod target;
pub mod toy;
pub mod viat;
pub mod viewdist;
pub mod viewrs;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Viewpoint64 = geometry::Viewpoint<f64>;
pub type ViewBounds64 = geometry::ViewBounds<f64>;
pub type Scene64 = render::Scene<f64>;
pub type RenderConfig64 = render::RenderConfig<f64>;
pub type MixtureParams64 = viewdist::MixtureParams<f64>;
pub type ClassifierParams64 = classifier::ClassifierParams<f64>;

pub type Viewpoint32 = geometry::Viewpoint<f32>;
pub type MixtureParams32 = viewdist::MixtureParams<f32>;
