//! Mirror-error feedback around the multi-initialization cascade, and its
//! precision/recall evaluation against the variance-based smart restart.
//!
//! Each round runs the cascade on the scene and on its mirror with fresh
//! initializations. A round whose mirror error exceeds the threshold triggers
//! a restart; the round with the smallest mirror error is returned, never
//! simply the last one.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{
    run_multi_init, run_multi_init_round, variance_restart_run, CascadeModel, InitConfig,
    VarianceRestartConfig,
};
use crate::error::{Error, Result};
use crate::metrics::{alignment_error, mirror_error};
use crate::shape::{NormalizationSpec, Shape, SymmetryMap};
use crate::synth::{mirror_scene, Scene};

/// Alignment error (inter-ocular units) below which a result counts as good.
pub const GOOD_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeedbackConfig {
    pub init: InitConfig,
    /// Restart while the mirror error is above this value.
    #[serde(with = "crate::serde_util")]
    pub mirror_threshold: f64,
    /// Total number of rounds, the first included.
    pub max_rounds: usize,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            init: InitConfig::default(),
            mirror_threshold: f64::INFINITY,
            max_rounds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub e_m: f64,
    /// Median result on the original image.
    pub shape: Shape,
    /// Median result on the mirror image, in mirror-image coordinates.
    pub mirror_shape: Shape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackOutcome {
    pub shape: Shape,
    pub mirror_shape: Shape,
    pub best_e_m: f64,
    pub best_round: usize,
    pub rounds_used: usize,
    /// The first round's mirror error exceeded the threshold.
    pub triggered: bool,
    pub per_round: Vec<RoundResult>,
}

/// Index of the round with the smallest mirror error; the earliest wins ties.
pub fn best_round(per_round_e_m: &[f64]) -> usize {
    per_round_e_m
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, be), (i, &e)| {
            if e < be {
                (i, e)
            } else {
                (bi, be)
            }
        })
        .0
}

pub fn mirror_feedback_run(
    model: &CascadeModel,
    scene: &Scene,
    map: &SymmetryMap,
    norm: &NormalizationSpec,
    config: &FeedbackConfig,
) -> FeedbackOutcome {
    let mirrored = mirror_scene(scene);
    let max_rounds = config.max_rounds.max(1);
    let mut per_round: Vec<RoundResult> = Vec::with_capacity(max_rounds);
    for round in 0..max_rounds as u64 {
        let (orig, mirr) = rayon::join(
            || run_multi_init_round(model, scene, &config.init, round),
            || run_multi_init_round(model, &mirrored, &config.init, round),
        );
        let e_m = mirror_error(&orig.shape, &mirr.shape, &scene.meta, map, norm)
            .unwrap_or(f64::INFINITY);
        per_round.push(RoundResult {
            e_m,
            shape: orig.shape,
            mirror_shape: mirr.shape,
        });
        if e_m <= config.mirror_threshold {
            break;
        }
    }
    let e_ms: Vec<f64> = per_round.iter().map(|r| r.e_m).collect();
    let best = best_round(&e_ms);
    FeedbackOutcome {
        shape: per_round[best].shape.clone(),
        mirror_shape: per_round[best].mirror_shape.clone(),
        best_e_m: per_round[best].e_m,
        best_round: best,
        rounds_used: per_round.len(),
        triggered: per_round[0].e_m > config.mirror_threshold,
        per_round,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quality {
    Good,
    Bad,
}

/// Good iff `e_a < threshold`; the boundary counts as bad.
pub fn classify_good_bad(e_a: f64, threshold: f64) -> Quality {
    if e_a < threshold {
        Quality::Good
    } else {
        Quality::Bad
    }
}

/// Confusion counts of a restart gate, with "bad" as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
}

impl GateCounts {
    pub fn from_flags(triggers: &[bool], bad: &[bool]) -> Result<Self> {
        if triggers.len() != bad.len() {
            return Err(Error::LengthMismatch {
                expected: bad.len(),
                found: triggers.len(),
            });
        }
        let mut c = GateCounts::default();
        for (&t, &b) in triggers.iter().zip(bad) {
            match (t, b) {
                (true, true) => c.true_pos += 1,
                (true, false) => c.false_pos += 1,
                (false, true) => c.false_neg += 1,
                (false, false) => c.true_neg += 1,
            }
        }
        Ok(c)
    }

    pub fn precision(&self) -> Option<f64> {
        let flagged = self.true_pos + self.false_pos;
        (flagged > 0).then(|| self.true_pos as f64 / flagged as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let bad = self.true_pos + self.false_neg;
        (bad > 0).then(|| self.true_pos as f64 / bad as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
}

/// Precision and recall of restart triggers against bad labels.
pub fn precision_recall(triggers: &[bool], labels: &[Quality]) -> Result<PrecisionRecall> {
    let bad: Vec<bool> = labels.iter().map(|&q| q == Quality::Bad).collect();
    let counts = GateCounts::from_flags(triggers, &bad)?;
    let recall = counts.recall().ok_or(Error::NoBadLabels)?;
    let precision = counts.precision().ok_or(Error::NoPositives)?;
    Ok(PrecisionRecall { precision, recall })
}

/// First-round gate statistic of one validation sample and its label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateObservation {
    pub sample_id: String,
    pub statistic: f64,
    pub e_a: f64,
    pub bad: bool,
}

fn recall_at(obs: &[GateObservation], tau: f64, n_bad: usize) -> f64 {
    let hit = obs.iter().filter(|o| o.bad && o.statistic > tau).count();
    hit as f64 / n_bad as f64
}

/// Largest threshold (among 0 and the distinct observed statistics) whose
/// trigger rule `statistic > tau` reaches `target_recall` on `obs`.
pub fn calibrate_threshold(obs: &[GateObservation], target_recall: f64) -> Result<f64> {
    if !(target_recall > 0.0 && target_recall <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "target recall {target_recall} is outside (0, 1]"
        )));
    }
    let n_bad = obs.iter().filter(|o| o.bad).count();
    if n_bad == 0 {
        return Err(Error::NoBadLabels);
    }
    let mut candidates: Vec<f64> = obs.iter().map(|o| o.statistic).collect();
    candidates.push(0.0);
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    candidates
        .into_iter()
        .rev()
        .find(|&tau| recall_at(obs, tau, n_bad) >= target_recall)
        .ok_or(Error::Unachievable {
            target: target_recall,
        })
}

fn label(e_a: f64, good_threshold: f64) -> bool {
    classify_good_bad(e_a, good_threshold) == Quality::Bad
}

/// First-round mirror errors and the alignment error of the first-round result.
pub fn observe_mirror_gate(
    model: &CascadeModel,
    scenes: &[Scene],
    map: &SymmetryMap,
    norm: &NormalizationSpec,
    init: &InitConfig,
    good_threshold: f64,
) -> Result<Vec<GateObservation>> {
    scenes
        .par_iter()
        .map(|scene| {
            let orig = run_multi_init(model, scene, init);
            let mirr = run_multi_init(model, &mirror_scene(scene), init);
            let statistic = mirror_error(&orig.shape, &mirr.shape, &scene.meta, map, norm)
                .unwrap_or(f64::INFINITY);
            let e_a = alignment_error(&orig.shape, &scene.ground_truth, norm)
                .map_err(|e| e.for_sample(scene.sample_id()))?;
            Ok(GateObservation {
                sample_id: scene.sample_id().to_string(),
                statistic,
                e_a,
                bad: label(e_a, good_threshold),
            })
        })
        .collect()
}

/// First-round prediction spreads and the alignment error of completing that round.
pub fn observe_variance_gate(
    model: &CascadeModel,
    scenes: &[Scene],
    norm: &NormalizationSpec,
    config: &VarianceRestartConfig,
    good_threshold: f64,
) -> Result<Vec<GateObservation>> {
    let single = VarianceRestartConfig {
        var_threshold: f64::INFINITY,
        max_rounds: 1,
        ..config.clone()
    };
    scenes
        .par_iter()
        .map(|scene| {
            let out = variance_restart_run(model, scene, &single);
            let e_a = alignment_error(&out.shape, &scene.ground_truth, norm)
                .map_err(|e| e.for_sample(scene.sample_id()))?;
            Ok(GateObservation {
                sample_id: scene.sample_id().to_string(),
                statistic: out.spreads[0],
                e_a,
                bad: label(e_a, good_threshold),
            })
        })
        .collect()
}

/// The four inference schemes being compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub no_restart: InitConfig,
    pub variance: VarianceRestartConfig,
    pub feedback_f1: FeedbackConfig,
    pub feedback_f2: FeedbackConfig,
    pub good_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub n_inits: usize,
    pub max_rounds: usize,
    pub threshold: Option<f64>,
    pub mean_e_a: f64,
    pub mean_rounds: f64,
    pub trigger_rate: f64,
    pub counts: Option<GateCounts>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSample {
    pub sample_id: String,
    pub difficulty: f64,
    pub e_a_no_restart: f64,
    pub e_a_variance: f64,
    pub e_a_f1: f64,
    pub e_a_f2: f64,
    pub first_spread: f64,
    pub f1_round_e_m: Vec<f64>,
    pub f1_best_e_m: f64,
    pub f2_round_e_m: Vec<f64>,
    pub f2_best_e_m: f64,
    pub variance_rounds: usize,
    pub variance_triggered: bool,
    pub f1_triggered: bool,
    pub f2_triggered: bool,
    /// Labels of the first-round results each gate decides on.
    pub variance_bad: bool,
    pub f1_bad: bool,
    pub f2_bad: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub samples: Vec<ComparisonSample>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Mean alignment error of the no-restart, variance-restart and two
/// mirror-feedback schemes on `scenes`, plus the precision/recall of each
/// restart gate.
pub fn compare_feedback_vs_baseline(
    scenes: &[Scene],
    model: &CascadeModel,
    map: &SymmetryMap,
    norm: &NormalizationSpec,
    config: &ComparisonConfig,
) -> Result<ComparisonReport> {
    let g = config.good_threshold;
    let samples = scenes
        .par_iter()
        .map(|scene| -> Result<ComparisonSample> {
            let err = |s: &Shape| {
                alignment_error(s, &scene.ground_truth, norm).map_err(|e| e.for_sample(scene.sample_id()))
            };
            let o = run_multi_init(model, scene, &config.no_restart);
            let e_o = err(&o.shape)?;
            let v = variance_restart_run(model, scene, &config.variance);
            let v_first = if config.variance.init == config.no_restart {
                e_o
            } else {
                err(&run_multi_init(model, scene, &config.variance.init).shape)?
            };
            let f1 = mirror_feedback_run(model, scene, map, norm, &config.feedback_f1);
            let f2 = mirror_feedback_run(model, scene, map, norm, &config.feedback_f2);
            Ok(ComparisonSample {
                sample_id: scene.sample_id().to_string(),
                difficulty: scene.difficulty,
                e_a_no_restart: e_o,
                e_a_variance: err(&v.shape)?,
                e_a_f1: err(&f1.shape)?,
                e_a_f2: err(&f2.shape)?,
                first_spread: v.spreads[0],
                f1_round_e_m: f1.per_round.iter().map(|r| r.e_m).collect(),
                f1_best_e_m: f1.best_e_m,
                f2_round_e_m: f2.per_round.iter().map(|r| r.e_m).collect(),
                f2_best_e_m: f2.best_e_m,
                variance_rounds: v.rounds,
                variance_triggered: v.restarted,
                f1_triggered: f1.triggered,
                f2_triggered: f2.triggered,
                variance_bad: label(v_first, g),
                f1_bad: label(err(&f1.per_round[0].shape)?, g),
                f2_bad: label(err(&f2.per_round[0].shape)?, g),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = samples.len().max(1) as f64;
    let gate_row = |method: &str,
                    n_inits: usize,
                    max_rounds: usize,
                    threshold: f64,
                    e_a: &dyn Fn(&ComparisonSample) -> f64,
                    rounds: &dyn Fn(&ComparisonSample) -> usize,
                    flags: &dyn Fn(&ComparisonSample) -> (bool, bool)|
     -> Result<ComparisonRow> {
        let (trig, bad): (Vec<bool>, Vec<bool>) = samples.iter().map(flags).unzip();
        let counts = GateCounts::from_flags(&trig, &bad)?;
        Ok(ComparisonRow {
            method: method.to_string(),
            n_inits,
            max_rounds,
            threshold: Some(threshold),
            mean_e_a: mean(samples.iter().map(e_a)),
            mean_rounds: mean(samples.iter().map(|s| rounds(s) as f64)),
            trigger_rate: trig.iter().filter(|&&t| t).count() as f64 / n,
            counts: Some(counts),
            precision: counts.precision(),
            recall: counts.recall(),
        })
    };

    let rows = vec![
        ComparisonRow {
            method: "no_restart".into(),
            n_inits: config.no_restart.n_inits,
            max_rounds: 1,
            threshold: None,
            mean_e_a: mean(samples.iter().map(|s| s.e_a_no_restart)),
            mean_rounds: 1.0,
            trigger_rate: 0.0,
            counts: None,
            precision: None,
            recall: None,
        },
        gate_row(
            "variance_restart",
            config.variance.init.n_inits,
            config.variance.max_rounds,
            config.variance.var_threshold,
            &|s| s.e_a_variance,
            &|s| s.variance_rounds,
            &|s| (s.variance_triggered, s.variance_bad),
        )?,
        gate_row(
            "feedback_f1",
            config.feedback_f1.init.n_inits,
            config.feedback_f1.max_rounds,
            config.feedback_f1.mirror_threshold,
            &|s| s.e_a_f1,
            &|s| s.f1_round_e_m.len(),
            &|s| (s.f1_triggered, s.f1_bad),
        )?,
        gate_row(
            "feedback_f2",
            config.feedback_f2.init.n_inits,
            config.feedback_f2.max_rounds,
            config.feedback_f2.mirror_threshold,
            &|s| s.e_a_f2,
            &|s| s.f2_round_e_m.len(),
            &|s| (s.f2_triggered, s.f2_bad),
        )?,
    ];
    Ok(ComparisonReport { rows, samples })
}
