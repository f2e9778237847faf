//! Cascaded shape regression over shape-indexed probe features.
//!
//! Each stage is a ridge-regularized linear map from probe values to a shape
//! update. Updates are expressed in the frame of the current shape's tight
//! box (center and max side), which lets one model serve scenes of any scale
//! and placement.

mod features;
mod model_io;
mod regressor;
mod shape_model;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use features::{extract_features, shape_frame, ProbeLayout};
pub use model_io::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use regressor::{fit_ridge_stage, LinearStage};
pub use shape_model::{canonicalize, fit_shape_model, ShapeModel};

use crate::error::{Error, Result};
use crate::metrics::alignment_error;
use crate::rng::substream;
use crate::shape::{bounding_box, NormalizationSpec, Point, Shape};
use crate::synth::{mirror_scene, Scene};

/// Random placements of the mean shape inside the detection box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitConfig {
    pub n_inits: usize,
    /// Maximum shift per axis as a fraction of the detection-box size.
    pub translation: f64,
    /// Scale factor drawn from `[1 - scale, 1 + scale]`.
    pub scale: f64,
    /// Maximum rotation in radians.
    pub rotation: f64,
    pub seed: u64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            n_inits: 5,
            translation: 0.3,
            scale: 0.1,
            rotation: 0.1,
            seed: 0,
        }
    }
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_inits == 0 {
            return Err(Error::InvalidConfig("n_inits must be at least 1".into()));
        }
        if !(self.translation >= 0.0 && self.scale >= 0.0 && self.rotation >= 0.0) {
            return Err(Error::InvalidConfig("perturbation ranges must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    pub shape_model: ShapeModel,
    pub stages: Vec<LinearStage>,
    pub probe_layout: ProbeLayout,
    pub lambda: f64,
    pub seed: u64,
    pub trained_with_mirror_augmentation: bool,
}

impl CascadeModel {
    pub fn num_points(&self) -> usize {
        self.shape_model.num_points()
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub stages: usize,
    pub lambda: f64,
    pub probe_layout: ProbeLayout,
    pub init: InitConfig,
    pub augment_mirror: bool,
    pub n_components: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            stages: 10,
            lambda: 1.0,
            probe_layout: ProbeLayout::default(),
            init: InitConfig::default(),
            augment_mirror: true,
            n_components: 8,
        }
    }
}

/// Per-stage training diagnostics; index 0 is before the first stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub num_samples: usize,
    /// Mean alignment error over the training set, normalized by the
    /// ground-truth box size.
    pub mean_error: Vec<f64>,
    /// Mean squared regression target (shape residual in the stage frame).
    pub mean_sq_residual: Vec<f64>,
}

/// Places `init.n_inits` perturbed copies of the mean shape in the scene's
/// detection box. The draw is keyed by `(seed, sample id, round, mirrored)`.
pub fn place_initializations(
    model: &ShapeModel,
    scene: &Scene,
    init: &InitConfig,
    round: u64,
) -> Vec<Shape> {
    place_with_label(model, scene, init, scene.sample_id(), round)
}

fn place_with_label(
    model: &ShapeModel,
    scene: &Scene,
    init: &InitConfig,
    label: &str,
    round: u64,
) -> Vec<Shape> {
    let mut rng = substream(init.seed, label, round, scene.is_mirrored());
    let mean_box = bounding_box(&model.mean).expect("mean shape is non-empty");
    let target = scene.detection_box;
    let base_scale = target.size() / mean_box.size();
    (0..init.n_inits)
        .map(|_| {
            let tx = rng.random_range(-init.translation..=init.translation);
            let ty = rng.random_range(-init.translation..=init.translation);
            let sc = rng.random_range(1.0 - init.scale..=1.0 + init.scale);
            let rot = rng.random_range(-init.rotation..=init.rotation);
            let center = target.center() + Point::new(tx, ty) * target.size();
            model
                .mean
                .similarity(mean_box.center(), base_scale * sc, rot, center)
        })
        .collect()
}

fn apply_stage(stage: &LinearStage, layout: &ProbeLayout, scene: &Scene, shape: &Shape) -> Shape {
    let (_, size) = shape_frame(shape);
    let delta = stage.apply(&extract_features(scene, shape, layout));
    Shape::new(
        shape
            .points()
            .iter()
            .zip(delta.chunks_exact(2))
            .map(|(&p, d)| p + Point::new(d[0], d[1]) * size)
            .collect(),
    )
}

fn run_stages(model: &CascadeModel, scene: &Scene, shape: Shape, range: std::ops::Range<usize>) -> Shape {
    model.stages[range]
        .iter()
        .fold(shape, |s, stage| apply_stage(stage, &model.probe_layout, scene, &s))
}

/// Applies every stage in order.
pub fn run_cascade(model: &CascadeModel, scene: &Scene, init_shape: &Shape) -> Shape {
    run_stages(model, scene, init_shape.clone(), 0..model.num_stages())
}

fn update_targets(shape: &Shape, gt: &Shape) -> Vec<f64> {
    let (_, size) = shape_frame(shape);
    let inv = if size > 0.0 { 1.0 / size } else { 0.0 };
    gt.points()
        .iter()
        .zip(shape.points())
        .flat_map(|(g, s)| [(g.x - s.x) * inv, (g.y - s.y) * inv])
        .collect()
}

/// Trains a cascade on scenes with known ground truth.
pub fn train_cascade(scenes: &[Scene], config: &TrainConfig) -> Result<(CascadeModel, TrainReport)> {
    if scenes.len() < 10 {
        return Err(Error::InsufficientData {
            needed: 10,
            found: scenes.len(),
        });
    }
    config.init.validate()?;
    if config.stages == 0 {
        return Err(Error::InvalidConfig("a cascade needs at least one stage".into()));
    }
    let k = scenes[0].ground_truth.len();
    if let Some(bad) = scenes.iter().find(|s| s.ground_truth.len() != k) {
        return Err(Error::LengthMismatch {
            expected: k,
            found: bad.ground_truth.len(),
        });
    }
    let mut training: Vec<Scene> = scenes.to_vec();
    if config.augment_mirror {
        training.extend(scenes.iter().map(mirror_scene));
    }
    let gts: Vec<Shape> = training.iter().map(|s| s.ground_truth.clone()).collect();
    let shape_model = fit_shape_model(&gts, config.n_components.min(2 * k))?;

    let mut rows: Vec<(usize, Shape)> = training
        .iter()
        .enumerate()
        .flat_map(|(i, scene)| {
            let label = format!("train/{}", scene.sample_id());
            place_with_label(&shape_model, scene, &config.init, &label, 0)
                .into_iter()
                .map(move |s| (i, s))
        })
        .collect();

    let norm = NormalizationSpec::BboxMaxSide;
    let mean_error = |rows: &[(usize, Shape)]| -> f64 {
        let errs: Vec<f64> = rows
            .par_iter()
            .map(|(i, s)| alignment_error(s, &training[*i].ground_truth, &norm).unwrap_or(f64::NAN))
            .collect();
        errs.iter().sum::<f64>() / errs.len() as f64
    };

    let d = config.probe_layout.feature_dim(k);
    let n = rows.len();
    let mut report = TrainReport {
        num_samples: n,
        mean_error: vec![mean_error(&rows)],
        mean_sq_residual: Vec::new(),
    };
    let mut stages = Vec::with_capacity(config.stages);
    for t in 0..config.stages {
        let samples: Vec<(Vec<f64>, Vec<f64>)> = rows
            .par_iter()
            .map(|(i, s)| {
                let scene = &training[*i];
                (
                    extract_features(scene, s, &config.probe_layout),
                    update_targets(s, &scene.ground_truth),
                )
            })
            .collect();
        let x = DMatrix::from_fn(n, d, |r, c| samples[r].0[c]);
        let y = DMatrix::from_fn(n, 2 * k, |r, c| samples[r].1[c]);
        report
            .mean_sq_residual
            .push(y.iter().map(|v| v * v).sum::<f64>() / n as f64);
        let stage = fit_ridge_stage(&x, &y, config.lambda, t)?;
        rows = rows
            .into_par_iter()
            .map(|(i, s)| {
                let next = apply_stage(&stage, &config.probe_layout, &training[i], &s);
                (i, next)
            })
            .collect();
        report.mean_error.push(mean_error(&rows));
        stages.push(stage);
    }

    Ok((
        CascadeModel {
            shape_model,
            stages,
            probe_layout: config.probe_layout.clone(),
            lambda: config.lambda,
            seed: config.init.seed,
            trained_with_mirror_augmentation: config.augment_mirror,
        },
        report,
    ))
}

/// Coordinate-wise median (mean of the two middle values for even counts).
pub fn median_shape(shapes: &[Shape]) -> Shape {
    let k = shapes.first().map_or(0, Shape::len);
    let median = |mut v: Vec<f64>| -> f64 {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    };
    Shape::new(
        (0..k)
            .map(|j| {
                Point::new(
                    median(shapes.iter().map(|s| s.points()[j].x).collect()),
                    median(shapes.iter().map(|s| s.points()[j].y).collect()),
                )
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiInitResult {
    pub shape: Shape,
    pub per_init_shapes: Vec<Shape>,
}

/// One round of the multi-initialization scheme: runs the cascade from every
/// placement of round `round` and aggregates with the coordinate-wise median.
pub fn run_multi_init_round(
    model: &CascadeModel,
    scene: &Scene,
    init: &InitConfig,
    round: u64,
) -> MultiInitResult {
    let per_init_shapes: Vec<Shape> = place_initializations(&model.shape_model, scene, init, round)
        .iter()
        .map(|s| run_cascade(model, scene, s))
        .collect();
    MultiInitResult {
        shape: median_shape(&per_init_shapes),
        per_init_shapes,
    }
}

pub fn run_multi_init(model: &CascadeModel, scene: &Scene, init: &InitConfig) -> MultiInitResult {
    run_multi_init_round(model, scene, init, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VarianceRestartConfig {
    pub init: InitConfig,
    /// Fraction of the cascade run before the spread check.
    pub head_fraction: f64,
    #[serde(with = "crate::serde_util")]
    pub var_threshold: f64,
    /// Total number of initialization rounds, the first included.
    pub max_rounds: usize,
}

impl Default for VarianceRestartConfig {
    fn default() -> Self {
        Self {
            init: InitConfig::default(),
            head_fraction: 0.1,
            var_threshold: f64::INFINITY,
            max_rounds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceRestartOutcome {
    pub shape: Shape,
    /// The first round's spread exceeded the threshold.
    pub restarted: bool,
    pub rounds: usize,
    pub spreads: Vec<f64>,
}

/// Number of stages run before the spread check: `ceil(fraction * T)`.
pub fn head_stages(head_fraction: f64, num_stages: usize) -> usize {
    let h = (head_fraction * num_stages as f64 - 1e-9).ceil();
    (h.max(0.0) as usize).min(num_stages)
}

/// Mean over landmarks of the per-landmark standard deviation of positions
/// across `shapes`, divided by `box_size`.
pub fn prediction_spread(shapes: &[Shape], box_size: f64) -> f64 {
    let k = shapes.first().map_or(0, Shape::len);
    if k == 0 || shapes.len() < 2 {
        return 0.0;
    }
    let n = shapes.len() as f64;
    // population variance as half the mean squared pairwise distance, which
    // is exactly zero for identical predictions
    let total: f64 = (0..k)
        .map(|j| {
            let sq: f64 = shapes
                .iter()
                .flat_map(|a| shapes.iter().map(move |b| (a.points()[j] - b.points()[j]).norm().powi(2)))
                .sum();
            (sq / (2.0 * n * n)).sqrt()
        })
        .sum();
    total / k as f64 / box_size
}

/// Smart-restart baseline: run the head of the cascade from every placement,
/// restart with fresh placements while their spread exceeds the threshold,
/// and finish from the last round drawn.
pub fn variance_restart_run(
    model: &CascadeModel,
    scene: &Scene,
    config: &VarianceRestartConfig,
) -> VarianceRestartOutcome {
    let t = model.num_stages();
    let head = head_stages(config.head_fraction, t);
    let max_rounds = config.max_rounds.max(1);
    let box_size = scene.detection_box.size();
    let mut spreads = Vec::new();
    for round in 0..max_rounds {
        let heads: Vec<Shape> =
            place_initializations(&model.shape_model, scene, &config.init, round as u64)
                .into_iter()
                .map(|s| run_stages(model, scene, s, 0..head))
                .collect();
        let spread = prediction_spread(&heads, box_size);
        spreads.push(spread);
        if spread <= config.var_threshold || round + 1 == max_rounds {
            let finals: Vec<Shape> = heads
                .into_iter()
                .map(|s| run_stages(model, scene, s, head..t))
                .collect();
            return VarianceRestartOutcome {
                shape: median_shape(&finals),
                restarted: spreads[0] > config.var_threshold,
                rounds: round + 1,
                spreads,
            };
        }
    }
    unreachable!("the last round always completes")
}
