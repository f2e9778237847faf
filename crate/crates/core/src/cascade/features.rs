use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::shape::{bounding_box, Point, Shape, SymmetryMap};
use crate::synth::Scene;

/// Probe offsets shared by every landmark, in units of the current shape's
/// tight-box size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeLayout {
    pub offsets: Vec<Point>,
}

impl Default for ProbeLayout {
    fn default() -> Self {
        Self::ring(8, 0.15)
    }
}

impl ProbeLayout {
    /// The landmark itself plus `count` probes evenly spaced on a ring.
    pub fn ring(count: usize, radius: f64) -> Self {
        let mut offsets = vec![Point::default()];
        offsets.extend((0..count).map(|j| {
            let theta = 2.0 * PI * j as f64 / count as f64;
            Point::new(radius * theta.cos(), radius * theta.sin())
        }));
        Self { offsets }
    }

    pub fn single() -> Self {
        Self {
            offsets: vec![Point::default()],
        }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    pub fn feature_dim(&self, num_points: usize) -> usize {
        num_points * self.offsets.len()
    }

    /// Index of the horizontally flipped copy of each offset, if the layout is
    /// closed under the flip.
    pub fn flip_permutation(&self) -> Option<Vec<usize>> {
        self.offsets
            .iter()
            .map(|o| {
                self.offsets
                    .iter()
                    .position(|q| (q.x + o.x).abs() < 1e-12 && (q.y - o.y).abs() < 1e-12)
            })
            .collect()
    }

    /// Feature permutation relating a mirrored scene to the original:
    /// `mirrored[i] == original[perm[i]]`.
    pub fn mirror_feature_permutation(&self, map: &SymmetryMap) -> Option<Vec<usize>> {
        let flip = self.flip_permutation()?;
        let p = self.offsets.len();
        Some(
            (0..map.num_points())
                .flat_map(|k| {
                    let src = map.get(k);
                    flip.iter().map(move |&j| src * p + j).collect::<Vec<_>>()
                })
                .collect(),
        )
    }
}

/// Center and size of the frame that shape-indexed features and shape updates
/// are expressed in.
pub fn shape_frame(shape: &Shape) -> (Point, f64) {
    match bounding_box(shape) {
        Ok(b) => (b.center(), b.size()),
        Err(_) => (Point::default(), 0.0),
    }
}

/// Samples channel `k` of the scene at each probe offset around landmark `k`.
/// Layout: landmark-major, `features[k * P + j]`.
pub fn extract_features(scene: &Scene, shape: &Shape, layout: &ProbeLayout) -> Vec<f64> {
    let (_, size) = shape_frame(shape);
    let mut out = Vec::with_capacity(layout.feature_dim(shape.len()));
    for (k, &p) in shape.points().iter().enumerate() {
        for &o in &layout.offsets {
            out.push(scene.probe(p + o * size, k));
        }
    }
    out
}
