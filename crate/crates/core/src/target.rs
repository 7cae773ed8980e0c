//! Black-box views of a (scene, classifier) pair as functions of the viewpoint.

use crate::classifier::ClassifierParams;
use crate::error::Result;
use crate::geometry::Viewpoint;
use crate::render::{render_image, RenderConfig, Scene};
use crate::scalar::Real;

/// Scalar objective queried only through evaluations.
pub trait ViewpointLoss<T: Real>: Sync {
    fn loss(&self, v: &Viewpoint<T>) -> Result<T>;
}

/// Hard-label predictor over viewpoints.
pub trait ViewpointClassifier<T: Real>: Sync {
    fn predict(&self, v: &Viewpoint<T>) -> Result<usize>;
}

/// Renders `scene` at the queried viewpoint and feeds the image to `classifier`.
/// The loss is the cross-entropy of the scene's label.
#[derive(Debug, Clone, Copy)]
pub struct RenderedTarget<'a, T: Real> {
    pub scene: &'a Scene<T>,
    pub classifier: &'a ClassifierParams<T>,
    pub render: &'a RenderConfig<T>,
}

impl<'a, T: Real> RenderedTarget<'a, T> {
    pub fn new(scene: &'a Scene<T>, classifier: &'a ClassifierParams<T>, render: &'a RenderConfig<T>) -> Self {
        Self {
            scene,
            classifier,
            render,
        }
    }

    pub fn label(&self) -> usize {
        self.scene.label
    }

    pub fn image(&self, v: &Viewpoint<T>) -> Result<Vec<T>> {
        Ok(render_image(self.scene, v, self.render)?.pixels)
    }
}

impl<T: Real> ViewpointLoss<T> for RenderedTarget<'_, T> {
    fn loss(&self, v: &Viewpoint<T>) -> Result<T> {
        self.classifier.loss(&self.image(v)?, self.scene.label)
    }
}

impl<T: Real> ViewpointClassifier<T> for RenderedTarget<'_, T> {
    fn predict(&self, v: &Viewpoint<T>) -> Result<usize> {
        self.classifier.predict(&self.image(v)?)
    }
}

impl<T: Real, F> ViewpointLoss<T> for F
where
    F: Fn(&Viewpoint<T>) -> T + Sync,
{
    fn loss(&self, v: &Viewpoint<T>) -> Result<T> {
        Ok(self(v))
    }
}
