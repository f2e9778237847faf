//! Synthetic scenes and simulated detectors.
//!
//! A [`Scene`] stands in for an image: it holds a ground-truth shape and one
//! smooth scalar field per landmark channel. Channel `k` is a Gaussian bump at
//! landmark `k` plus `round(10 d)` distractor bumps, where `d` is the scene
//! difficulty. Mirroring a scene reflects coordinates and swaps channels
//! through the symmetry map, so the mirror is exactly as informative as the
//! original.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cascade::ShapeModel;
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::shape::{
    bounding_box, mirror_shape, BoundingBox, ImageMeta, NormalizationSpec, Point, Shape,
    SymmetryMap,
};

/// Landmark layouts available to the synthetic experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Face17,
    Body14,
}

impl Template {
    pub fn symmetry_map(self) -> SymmetryMap {
        match self {
            Template::Face17 => SymmetryMap::face17(),
            Template::Body14 => SymmetryMap::body14(),
        }
    }

    /// Eye-center distance for faces, tight-box size for bodies.
    pub fn default_normalization(self) -> NormalizationSpec {
        match self {
            Template::Face17 => NormalizationSpec::Interocular(4, 5),
            Template::Body14 => NormalizationSpec::BboxMaxSide,
        }
    }

    /// Frontal reference layout, roughly unit sized and centered at the origin.
    pub fn shape(self) -> Shape {
        let coords: &[(f64, f64)] = match self {
            Template::Face17 => &[
                (-0.40, -0.30), // brow outer
                (-0.12, -0.33), // brow inner
                (0.12, -0.33),
                (0.40, -0.30),
                (-0.22, -0.18), // eye centers
                (0.22, -0.18),
                (0.00, -0.12), // nose bridge
                (0.00, 0.05),  // nose tip
                (-0.08, 0.10), // nostrils
                (0.08, 0.10),
                (-0.18, 0.28), // mouth corners
                (0.18, 0.28),
                (0.00, 0.24), // lips
                (0.00, 0.33),
                (-0.45, 0.15), // jaw
                (0.45, 0.15),
                (0.00, 0.55), // chin
            ],
            Template::Body14 => &[
                (-0.12, 0.50), // ankle
                (-0.11, 0.27), // knee
                (-0.10, 0.05), // hip
                (0.10, 0.05),
                (0.11, 0.27),
                (0.12, 0.50),
                (-0.22, 0.08), // wrist
                (-0.20, -0.10), // elbow
                (-0.15, -0.30), // shoulder
                (0.15, -0.30),
                (0.20, -0.10),
                (0.22, 0.08),
                (0.00, -0.35), // neck
                (0.00, -0.50), // head top
            ],
        };
        Shape::new(coords.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }
}

/// Random deformations of a template, closed under mirroring so that the
/// population mean is bilaterally symmetric.
pub fn shape_population(template: Template, n_pairs: usize, jitter: f64, seed: u64) -> Vec<Shape> {
    let base = template.shape();
    let map = template.symmetry_map();
    let meta = ImageMeta::new("population", 0.0, 0.0);
    let mut rng = substream(seed, "population", 0, false);
    let mut out = Vec::with_capacity(2 * n_pairs);
    for _ in 0..n_pairs {
        let sx = rng.random_range(0.9..1.1);
        let sy = rng.random_range(0.9..1.1);
        let shear = rng.random_range(-0.08..0.08);
        let s = Shape::new(
            base.points()
                .iter()
                .map(|p| {
                    let nx: f64 = rng.sample(StandardNormal);
                    let ny: f64 = rng.sample(StandardNormal);
                    Point::new(
                        sx * p.x + shear * p.y + jitter * nx,
                        sy * p.y + jitter * ny,
                    )
                })
                .collect(),
        );
        // width 0 reflects about x = 0
        let m = mirror_shape(&s, &meta, &map).expect("template matches its map");
        out.push(s);
        out.push(m);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Point,
    pub amplitude: f64,
}

/// Per-channel sums of isotropic Gaussian bumps sharing one width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub width: f64,
    pub channels: Vec<Vec<Bump>>,
}

impl FieldSpec {
    pub fn eval(&self, p: Point, channel: usize) -> f64 {
        let inv = -0.5 / (self.width * self.width);
        self.channels[channel]
            .iter()
            .map(|b| {
                let dx = p.x - b.center.x;
                let dy = p.y - b.center.y;
                b.amplitude * ((dx * dx + dy * dy) * inv).exp()
            })
            .sum()
    }
}

/// Scene generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub width: f64,
    pub height: f64,
    /// Object box size as a fraction of `min(width, height)`.
    pub size_range: (f64, f64),
    pub max_rotation: f64,
    /// Bump width as a fraction of the object box size.
    pub bump_width: f64,
    pub distractors_per_difficulty: f64,
    pub distractor_amplitude: (f64, f64),
    /// Distractors are placed in the object box grown by this fraction of its size.
    pub distractor_spread: f64,
    /// Probability that a distractor is a displaced copy of the whole object
    /// (one bump per channel, shared offset) rather than independent clutter.
    pub distractor_coherence: f64,
    /// Offset range of object copies, as a fraction of the object box size.
    pub copy_offset: (f64, f64),
    pub copy_amplitude: (f64, f64),
    /// Detection box center shift and size change, as a fraction of the box size.
    pub box_jitter: f64,
    pub margin: f64,
    /// Shape coefficients are clamped to this many standard deviations.
    pub coeff_clamp: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            width: 256.0,
            height: 256.0,
            size_range: (0.35, 0.6),
            max_rotation: 0.1,
            bump_width: 0.1,
            distractors_per_difficulty: 10.0,
            distractor_amplitude: (0.6, 1.2),
            distractor_spread: 0.15,
            distractor_coherence: 0.5,
            copy_offset: (0.3, 0.6),
            copy_amplitude: (0.4, 0.9),
            box_jitter: 0.1,
            margin: 0.05,
            coeff_clamp: 2.5,
        }
    }
}

/// Probe-able stand-in for an image.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub ground_truth: Shape,
    pub meta: ImageMeta,
    pub detection_box: BoundingBox,
    pub difficulty: f64,
    field: Arc<FieldSpec>,
    map: Arc<SymmetryMap>,
    mirrored: bool,
}

impl Scene {
    pub fn new(
        ground_truth: Shape,
        meta: ImageMeta,
        detection_box: BoundingBox,
        difficulty: f64,
        field: FieldSpec,
        map: SymmetryMap,
    ) -> Self {
        Self {
            ground_truth,
            meta,
            detection_box,
            difficulty,
            field: Arc::new(field),
            map: Arc::new(map),
            mirrored: false,
        }
    }

    pub fn sample_id(&self) -> &str {
        &self.meta.sample_id
    }

    pub fn is_mirrored(&self) -> bool {
        self.mirrored
    }

    pub fn symmetry_map(&self) -> &SymmetryMap {
        &self.map
    }

    pub fn num_channels(&self) -> usize {
        self.field.channels.len()
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    /// Field value of landmark channel `channel` at `p`.
    pub fn probe(&self, p: Point, channel: usize) -> f64 {
        if self.mirrored {
            self.field.eval(
                Point::new(self.meta.width - p.x, p.y),
                self.map.get(channel),
            )
        } else {
            self.field.eval(p, channel)
        }
    }
}

/// Horizontally flipped copy of `scene`; channels are re-assigned through the
/// symmetry map.
pub fn mirror_scene(scene: &Scene) -> Scene {
    Scene {
        ground_truth: mirror_shape(&scene.ground_truth, &scene.meta, &scene.map)
            .expect("scene ground truth matches its symmetry map"),
        meta: scene.meta.clone(),
        detection_box: scene.detection_box.mirrored(scene.meta.width),
        difficulty: scene.difficulty,
        field: Arc::clone(&scene.field),
        map: Arc::clone(&scene.map),
        mirrored: !scene.mirrored,
    }
}

/// Draws a ground-truth shape from `model`, places it on the canvas with a
/// random similarity transform and builds the probe field around it.
pub fn generate_scene(
    model: &ShapeModel,
    map: &SymmetryMap,
    params: &SceneParams,
    difficulty: f64,
    sample_id: &str,
    seed: u64,
) -> Result<Scene> {
    if !(params.width > 0.0 && params.height > 0.0) {
        return Err(Error::InvalidConfig("canvas must have positive size".into()));
    }
    if !(0.0..=1.0).contains(&params.distractor_coherence) {
        return Err(Error::InvalidConfig(format!(
            "distractor coherence {} is not a probability",
            params.distractor_coherence
        )));
    }
    if model.num_points() != map.num_points() {
        return Err(Error::LengthMismatch {
            expected: map.num_points(),
            found: model.num_points(),
        });
    }
    let mut rng = substream(seed, sample_id, 0, false);
    let coeffs: Vec<f64> = model
        .scales
        .iter()
        .map(|&s| {
            let z: f64 = rng.sample(StandardNormal);
            s * z.clamp(-params.coeff_clamp, params.coeff_clamp)
        })
        .collect();
    let canonical = model.synthesize(&coeffs);
    let canon_box = bounding_box(&canonical)?;
    let canon_size = canon_box.size();
    if !(canon_size > 0.0) {
        return Err(Error::DegenerateShapes("generated shape has zero size".into()));
    }

    let short = params.width.min(params.height);
    let margin = params.margin * short;
    let angle = rng.random_range(-params.max_rotation..=params.max_rotation);
    let mut target = rng.random_range(params.size_range.0..=params.size_range.1) * short;
    let placed = loop {
        let s = canonical.similarity(canon_box.center(), target / canon_size, angle, Point::default());
        let b = bounding_box(&s)?;
        let (lo_x, hi_x) = (margin - b.x_min, params.width - margin - b.x_max);
        let (lo_y, hi_y) = (margin - b.y_min, params.height - margin - b.y_max);
        if lo_x <= hi_x && lo_y <= hi_y {
            let tx = rng.random_range(lo_x..=hi_x);
            let ty = rng.random_range(lo_y..=hi_y);
            break s.similarity(Point::default(), 1.0, 0.0, Point::new(tx, ty));
        }
        target *= 0.9;
    };

    let gt_box = bounding_box(&placed)?;
    let size = gt_box.size();
    let bump_width = params.bump_width * size;
    let n_distractors = (params.distractors_per_difficulty * difficulty).round() as usize;
    let grow = params.distractor_spread * size;
    let mut channels: Vec<Vec<Bump>> = placed
        .points()
        .iter()
        .map(|&center| {
            vec![Bump {
                center,
                amplitude: 1.0,
            }]
        })
        .collect();
    let amplitude = params.distractor_amplitude;
    for _ in 0..n_distractors {
        if rng.random_bool(params.distractor_coherence) {
            // a displaced copy of the whole object
            let r = rng.random_range(params.copy_offset.0..=params.copy_offset.1) * size;
            let phi = rng.random_range(-PI..PI);
            let offset = Point::new(r * phi.cos(), r * phi.sin());
            let a = rng.random_range(params.copy_amplitude.0..=params.copy_amplitude.1);
            for (bumps, &p) in channels.iter_mut().zip(placed.points()) {
                bumps.push(Bump {
                    center: p + offset,
                    amplitude: a,
                });
            }
        } else {
            for bumps in channels.iter_mut() {
                let x = rng.random_range(gt_box.x_min - grow..=gt_box.x_max + grow);
                let y = rng.random_range(gt_box.y_min - grow..=gt_box.y_max + grow);
                bumps.push(Bump {
                    center: Point::new(x, y),
                    amplitude: rng.random_range(amplitude.0..=amplitude.1),
                });
            }
        }
    }

    let j = params.box_jitter;
    let c = gt_box.center();
    let shift = Point::new(
        rng.random_range(-j..=j) * size,
        rng.random_range(-j..=j) * size,
    );
    let grow_box = rng.random_range(1.0 - j..=1.0 + j);
    let half_w = 0.5 * gt_box.width() * grow_box;
    let half_h = 0.5 * gt_box.height() * grow_box;
    let detection_box = BoundingBox {
        x_min: c.x + shift.x - half_w,
        y_min: c.y + shift.y - half_h,
        x_max: c.x + shift.x + half_w,
        y_max: c.y + shift.y + half_h,
    };

    Ok(Scene::new(
        placed,
        ImageMeta::new(sample_id, params.width, params.height),
        detection_box,
        difficulty,
        FieldSpec {
            width: bump_width,
            channels,
        },
        map.clone(),
    ))
}

/// Controlled model of detector error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimDetectorConfig {
    /// Base noise scale, in units of the detection-box size.
    pub sigma0: f64,
    /// Additional noise per unit of difficulty.
    pub sigma1: f64,
    pub outlier_rate: f64,
    pub seed: u64,
}

impl Default for SimDetectorConfig {
    fn default() -> Self {
        Self {
            sigma0: 0.01,
            sigma1: 0.10,
            outlier_rate: 0.0,
            seed: 0,
        }
    }
}

impl SimDetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 >= 0.0 && self.sigma1 >= 0.0) {
            return Err(Error::InvalidConfig("noise scales must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.outlier_rate) {
            return Err(Error::InvalidConfig("outlier_rate must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn sigma(&self, difficulty: f64) -> f64 {
        self.sigma0 + self.sigma1 * difficulty
    }
}

fn noisy_detection<R: Rng>(gt: &Shape, sigma: f64, outlier_rate: f64, s: f64, rng: &mut R) -> Shape {
    Shape::new(
        gt.points()
            .iter()
            .map(|&p| {
                let nx: f64 = rng.sample(StandardNormal);
                let ny: f64 = rng.sample(StandardNormal);
                let mut q = p + Point::new(nx, ny) * (sigma * s);
                if outlier_rate > 0.0 && rng.random::<f64>() < outlier_rate {
                    let theta = rng.random_range(0.0..2.0 * PI);
                    q = q + Point::new(theta.cos(), theta.sin()) * (0.5 * s);
                }
                q
            })
            .collect(),
    )
}

/// Simulated detections on a scene and on its mirror image. Noise has scale
/// `(sigma0 + sigma1 d) s` with `s` the detection-box size; the mirror
/// detection is an independent draw against the mirrored ground truth.
pub fn simulate_detector(scene: &Scene, config: &SimDetectorConfig) -> (Shape, Shape) {
    let s = scene.detection_box.size();
    let sigma = config.sigma(scene.difficulty);
    let mut rng = substream(config.seed, scene.sample_id(), 0, scene.is_mirrored());
    let det = noisy_detection(&scene.ground_truth, sigma, config.outlier_rate, s, &mut rng);
    let mirrored = mirror_scene(scene);
    let mut rng_m = substream(config.seed, scene.sample_id(), 0, mirrored.is_mirrored());
    let det_m = noisy_detection(&mirrored.ground_truth, sigma, config.outlier_rate, s, &mut rng_m);
    (det, det_m)
}

/// Expected per-point alignment error, in units of the detection-box size, of
/// the outlier-free simulated detector: the Rayleigh mean `sigma sqrt(pi/2)`.
pub fn expected_error_oracle(config: &SimDetectorConfig, difficulty: f64) -> Result<f64> {
    if config.outlier_rate != 0.0 {
        return Err(Error::OutlierUnsupported);
    }
    Ok(config.sigma(difficulty) * (PI / 2.0).sqrt())
}

/// Expected mirror error of the outlier-free simulated detector; the difference
/// of two independent draws has per-axis scale `sigma sqrt(2)`.
pub fn expected_mirror_error_oracle(config: &SimDetectorConfig, difficulty: f64) -> Result<f64> {
    expected_error_oracle(config, difficulty).map(|e| e * 2f64.sqrt())
}
