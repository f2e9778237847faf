//! Reproducible experiment runs driven by JSON configs.
//!
//! Every random draw of an experiment derives from its top-level `seed`: scene
//! generation, training placements and inference initializations. The `seed`
//! fields of nested initialization configs are overwritten with it.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{
    fit_shape_model, train_cascade, CascadeModel, InitConfig, ShapeModel, TrainConfig, TrainReport,
    VarianceRestartConfig,
};
use crate::error::{Error, Result};
use crate::feedback::{
    calibrate_threshold, compare_feedback_vs_baseline, observe_mirror_gate, observe_variance_gate,
    ComparisonConfig, ComparisonReport, FeedbackConfig, GOOD_THRESHOLD,
};
use crate::metrics::{alignment_error, mirror_error, pearson, spearman};
use crate::rng::substream;
use crate::shape::{NormalizationSpec, SymmetryMap};
use crate::synth::{
    expected_error_oracle, expected_mirror_error_oracle, generate_scene, shape_population, simulate_detector,
    Scene, SceneParams, SimDetectorConfig, Template,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationConfig {
    /// Number of mirror pairs in the shape population.
    pub n_pairs: usize,
    /// Per-coordinate noise, in template units.
    pub jitter: f64,
    /// Components of the shape model scenes are drawn from.
    pub components: usize,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            n_pairs: 100,
            jitter: 0.015,
            components: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub num_scenes: usize,
    pub difficulty: (f64, f64),
    pub cascade: TrainConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            num_scenes: 500,
            difficulty: (0.0, 1.0),
            cascade: TrainConfig::default(),
        }
    }
}

/// Scenes the restart gates are calibrated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationSet {
    /// A separate validation set of `validation_scenes` scenes.
    Validation,
    /// The evaluation scenes themselves: every gate is tuned to the same
    /// recall on the data it is compared on.
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub validation_scenes: usize,
    pub test_scenes: usize,
    pub difficulty: (f64, f64),
    /// Recall every restart gate is calibrated to. Without it the thresholds
    /// in the method configs are used as given.
    pub target_recall: Option<f64>,
    pub calibrate_on: CalibrationSet,
    pub good_threshold: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            validation_scenes: 300,
            test_scenes: 300,
            difficulty: (0.0, 1.0),
            target_recall: Some(0.6),
            calibrate_on: CalibrationSet::Test,
            good_threshold: GOOD_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub template: Template,
    pub population: PopulationConfig,
    pub scene: SceneParams,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub no_restart: InitConfig,
    pub variance: VarianceRestartConfig,
    pub feedback_f1: FeedbackConfig,
    pub feedback_f2: FeedbackConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let init = |n_inits| InitConfig {
            n_inits,
            ..InitConfig::default()
        };
        Self {
            seed: 0,
            template: Template::Face17,
            population: PopulationConfig::default(),
            scene: SceneParams::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            no_restart: init(5),
            variance: VarianceRestartConfig {
                init: init(5),
                max_rounds: 3,
                ..Default::default()
            },
            feedback_f1: FeedbackConfig {
                init: init(5),
                mirror_threshold: f64::INFINITY,
                max_rounds: 3,
            },
            feedback_f2: FeedbackConfig {
                init: init(10),
                mirror_threshold: f64::INFINITY,
                max_rounds: 5,
            },
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} range ({lo}, {hi})")))
    }
}

/// Shape model of a mirror-closed template population.
pub fn scene_generator(
    template: Template,
    population: &PopulationConfig,
    seed: u64,
) -> Result<ShapeModel> {
    let shapes = shape_population(template, population.n_pairs, population.jitter, seed);
    fit_shape_model(&shapes, population.components)
}

/// `n` scenes with ids `{prefix}{i}` and difficulties uniform in `difficulty`.
pub fn make_scenes(
    generator: &ShapeModel,
    map: &SymmetryMap,
    params: &SceneParams,
    seed: u64,
    prefix: &str,
    n: usize,
    difficulty: (f64, f64),
) -> Result<Vec<Scene>> {
    check_range("difficulty", difficulty)?;
    let mut rng = substream(seed, &format!("{prefix}difficulty"), 0, false);
    let ds: Vec<f64> = (0..n)
        .map(|_| {
            if difficulty.0 == difficulty.1 {
                difficulty.0
            } else {
                rng.random_range(difficulty.0..difficulty.1)
            }
        })
        .collect();
    ds.into_par_iter()
        .enumerate()
        .map(|(i, d)| generate_scene(generator, map, params, d, &format!("{prefix}{i}"), seed))
        .collect()
}

/// Thresholds chosen by calibration; each gate is calibrated on its own first-round statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub target_recall: f64,
    pub calibrated_on: CalibrationSet,
    pub calibration_scenes: usize,
    pub variance_threshold: f64,
    pub mirror_threshold_f1: f64,
    pub mirror_threshold_f2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvaluation {
    pub calibration: Option<Calibration>,
    pub report: ComparisonReport,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("train difficulty", self.train.difficulty)?;
        check_range("eval difficulty", self.eval.difficulty)?;
        for init in [
            &self.no_restart,
            &self.variance.init,
            &self.feedback_f1.init,
            &self.feedback_f2.init,
            &self.train.cascade.init,
        ] {
            init.validate()?;
        }
        Ok(())
    }

    pub fn symmetry_map(&self) -> SymmetryMap {
        self.template.symmetry_map()
    }

    pub fn normalization(&self) -> NormalizationSpec {
        self.template.default_normalization()
    }

    pub fn generator(&self) -> Result<ShapeModel> {
        scene_generator(self.template, &self.population, self.seed)
    }

    pub fn scenes(&self, generator: &ShapeModel, prefix: &str, n: usize, difficulty: (f64, f64)) -> Result<Vec<Scene>> {
        make_scenes(generator, &self.symmetry_map(), &self.scene, self.seed, prefix, n, difficulty)
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut cfg = self.train.cascade.clone();
        cfg.init.seed = self.seed;
        cfg
    }

    pub fn train(&self) -> Result<(CascadeModel, TrainReport)> {
        self.validate()?;
        let generator = self.generator()?;
        let scenes = self.scenes(&generator, "train-", self.train.num_scenes, self.train.difficulty)?;
        train_cascade(&scenes, &self.train_config())
    }

    /// Method configs with the experiment seed applied.
    pub fn comparison_config(&self) -> ComparisonConfig {
        let seeded = |init: &InitConfig| InitConfig {
            seed: self.seed,
            ..init.clone()
        };
        ComparisonConfig {
            no_restart: seeded(&self.no_restart),
            variance: VarianceRestartConfig {
                init: seeded(&self.variance.init),
                ..self.variance.clone()
            },
            feedback_f1: FeedbackConfig {
                init: seeded(&self.feedback_f1.init),
                ..self.feedback_f1.clone()
            },
            feedback_f2: FeedbackConfig {
                init: seeded(&self.feedback_f2.init),
                ..self.feedback_f2.clone()
            },
            good_threshold: self.eval.good_threshold,
        }
    }

    /// Calibrates every gate of `config` to the target recall on `scenes`.
    pub fn calibrate(
        &self,
        model: &CascadeModel,
        scenes: &[Scene],
        config: &mut ComparisonConfig,
        target_recall: f64,
    ) -> Result<Calibration> {
        let map = self.symmetry_map();
        let norm = self.normalization();
        let g = self.eval.good_threshold;
        let var_obs = observe_variance_gate(model, scenes, &norm, &config.variance, g)?;
        config.variance.var_threshold = calibrate_threshold(&var_obs, target_recall)?;
        let f1_obs = observe_mirror_gate(model, scenes, &map, &norm, &config.feedback_f1.init, g)?;
        config.feedback_f1.mirror_threshold = calibrate_threshold(&f1_obs, target_recall)?;
        let f2_obs = observe_mirror_gate(model, scenes, &map, &norm, &config.feedback_f2.init, g)?;
        config.feedback_f2.mirror_threshold = calibrate_threshold(&f2_obs, target_recall)?;
        Ok(Calibration {
            target_recall,
            calibrated_on: self.eval.calibrate_on,
            calibration_scenes: scenes.len(),
            variance_threshold: config.variance.var_threshold,
            mirror_threshold_f1: config.feedback_f1.mirror_threshold,
            mirror_threshold_f2: config.feedback_f2.mirror_threshold,
        })
    }

    /// No-restart, variance-restart and mirror-feedback inference on held-out
    /// test scenes, with thresholds calibrated first when a target recall is set.
    pub fn feedback_eval(&self, model: &CascadeModel) -> Result<FeedbackEvaluation> {
        self.validate()?;
        let map = self.symmetry_map();
        if model.num_points() != map.num_points() {
            return Err(Error::LengthMismatch {
                expected: map.num_points(),
                found: model.num_points(),
            });
        }
        let generator = self.generator()?;
        let mut config = self.comparison_config();
        let test = self.scenes(&generator, "test-", self.eval.test_scenes, self.eval.difficulty)?;
        let calibration = match self.eval.target_recall {
            None => None,
            Some(r) => {
                let val;
                let scenes = match self.eval.calibrate_on {
                    CalibrationSet::Test => &test,
                    CalibrationSet::Validation => {
                        val = self.scenes(&generator, "val-", self.eval.validation_scenes, self.eval.difficulty)?;
                        &val
                    }
                };
                Some(self.calibrate(model, scenes, &mut config, r)?)
            }
        };
        let report = compare_feedback_vs_baseline(&test, model, &map, &self.normalization(), &config)?;
        Ok(FeedbackEvaluation { calibration, report })
    }
}

/// Simulated-detector correlation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub seed: u64,
    pub template: Template,
    pub population: PopulationConfig,
    pub scene: SceneParams,
    pub detector: SimDetectorConfig,
    pub num_samples: usize,
    pub difficulty: (f64, f64),
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            template: Template::Face17,
            population: PopulationConfig::default(),
            scene: SceneParams {
                distractors_per_difficulty: 0.0,
                ..SceneParams::default()
            },
            detector: SimDetectorConfig::default(),
            num_samples: 1000,
            difficulty: (0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub sample_id: String,
    pub difficulty: f64,
    pub e_m: f64,
    pub e_a: f64,
    pub oracle_e_a: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub num_samples: usize,
    pub mean_e_m: f64,
    pub mean_e_a: f64,
    pub oracle_mean_e_a: Option<f64>,
    pub oracle_mean_e_m: Option<f64>,
    /// Absent when one of the error columns is constant.
    pub pearson_r: Option<f64>,
    pub spearman_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub rows: Vec<SimRow>,
    pub summary: SimSummary,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Runs the simulated detector on generated scenes. Errors are normalized by
/// each scene's detection-box size, the unit of the detector noise.
pub fn run_simulation(config: &SimConfig) -> Result<SimResult> {
    config.detector.validate()?;
    if config.num_samples < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: config.num_samples,
        });
    }
    let map = config.template.symmetry_map();
    let generator = scene_generator(config.template, &config.population, config.seed)?;
    let scenes = make_scenes(
        &generator,
        &map,
        &config.scene,
        config.seed,
        "sim-",
        config.num_samples,
        config.difficulty,
    )?;
    let rows = scenes
        .par_iter()
        .map(|scene| -> Result<SimRow> {
            let (det, det_m) = simulate_detector(scene, &config.detector);
            let norm = NormalizationSpec::Fixed(scene.detection_box.size());
            let id = scene.sample_id();
            Ok(SimRow {
                sample_id: id.to_string(),
                difficulty: scene.difficulty,
                e_m: mirror_error(&det, &det_m, &scene.meta, &map, &norm).map_err(|e| e.for_sample(id))?,
                e_a: alignment_error(&det, &scene.ground_truth, &norm).map_err(|e| e.for_sample(id))?,
                oracle_e_a: expected_error_oracle(&config.detector, scene.difficulty).ok(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let e_m: Vec<f64> = rows.iter().map(|r| r.e_m).collect();
    let e_a: Vec<f64> = rows.iter().map(|r| r.e_a).collect();
    let oracle = |f: fn(&SimDetectorConfig, f64) -> Result<f64>| -> Option<f64> {
        let v: Result<Vec<f64>> = rows.iter().map(|r| f(&config.detector, r.difficulty)).collect();
        v.ok().map(|v| mean(&v))
    };
    let summary = SimSummary {
        num_samples: rows.len(),
        mean_e_m: mean(&e_m),
        mean_e_a: mean(&e_a),
        oracle_mean_e_a: oracle(expected_error_oracle),
        oracle_mean_e_m: oracle(expected_mirror_error_oracle),
        pearson_r: pearson(&e_m, &e_a).ok(),
        spearman_r: spearman(&e_m, &e_a).ok(),
    };
    Ok(SimResult { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"seed": 7, "train": {"num_scenes": 40}}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.train.num_scenes, 40);
        assert_eq!(cfg.train.cascade.stages, 10);
        assert_eq!(cfg.feedback_f2.init.n_inits, 10);
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn scene_sets_are_reproducible() {
        let cfg = ExperimentConfig::default();
        let g = cfg.generator().unwrap();
        let a = cfg.scenes(&g, "t-", 20, (0.0, 1.0)).unwrap();
        let b = cfg.scenes(&g, "t-", 20, (0.0, 1.0)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|s| (0.0..1.0).contains(&s.difficulty)));
        assert!(cfg.scenes(&g, "t-", 2, (0.5, 0.1)).is_err());
    }

    #[test]
    fn noiseless_simulation() {
        let cfg = SimConfig {
            detector: SimDetectorConfig {
                sigma0: 0.0,
                sigma1: 0.0,
                ..Default::default()
            },
            num_samples: 20,
            ..Default::default()
        };
        let res = run_simulation(&cfg).unwrap();
        assert!(res.rows.iter().all(|r| r.e_a == 0.0 && r.e_m < 1e-12));
        assert_eq!(res.summary.oracle_mean_e_a, Some(0.0));
        assert_eq!(res.summary.pearson_r, None);
    }
}
