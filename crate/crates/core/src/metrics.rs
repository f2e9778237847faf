//! Mirror error, alignment error, PCK and correlation statistics.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shape::{
    bounding_box, check_same_len, mirror_shape, normalization_size, ImageMeta, NormalizationSpec,
    Shape, SymmetryMap,
};

/// Which per-sample error a ranking or selection is keyed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorKey {
    MirrorError,
    AlignmentError,
}

impl fmt::Display for ErrorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKey::MirrorError => "e_m",
            ErrorKey::AlignmentError => "e_a",
        })
    }
}

/// Anything that carries a sample id and optional per-sample errors.
pub trait ErrorSource {
    fn sample_id(&self) -> &str;
    fn error(&self, key: ErrorKey) -> Option<f64>;

    fn require(&self, key: ErrorKey) -> Result<f64> {
        self.error(key).ok_or_else(|| Error::MissingError {
            sample_id: self.sample_id().to_string(),
            key: key.to_string(),
        })
    }
}

/// Per-sample detections, optional ground truth and the errors computed on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub det_original: Shape,
    pub det_mirror: Shape,
    pub ground_truth: Option<Shape>,
    pub meta: ImageMeta,
    pub e_m: Option<f64>,
    /// Alignment error on the original image.
    pub e_a: Option<f64>,
    /// Alignment error on the mirror image.
    pub e_a_mirror: Option<f64>,
}

impl SampleRecord {
    pub fn new(
        det_original: Shape,
        det_mirror: Shape,
        ground_truth: Option<Shape>,
        meta: ImageMeta,
    ) -> Self {
        Self {
            sample_id: meta.sample_id.clone(),
            det_original,
            det_mirror,
            ground_truth,
            meta,
            e_m: None,
            e_a: None,
            e_a_mirror: None,
        }
    }
}

impl ErrorSource for SampleRecord {
    fn sample_id(&self) -> &str {
        &self.sample_id
    }

    fn error(&self, key: ErrorKey) -> Option<f64> {
        match key {
            ErrorKey::MirrorError => self.e_m,
            ErrorKey::AlignmentError => self.e_a,
        }
    }
}

/// Errors of one sample without the underlying shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub sample_id: String,
    pub e_m: Option<f64>,
    pub e_a: Option<f64>,
    pub e_a_mirror: Option<f64>,
}

impl ErrorSource for ErrorRow {
    fn sample_id(&self) -> &str {
        &self.sample_id
    }

    fn error(&self, key: ErrorKey) -> Option<f64> {
        match key {
            ErrorKey::MirrorError => self.e_m,
            ErrorKey::AlignmentError => self.e_a,
        }
    }
}

impl From<&SampleRecord> for ErrorRow {
    fn from(r: &SampleRecord) -> Self {
        Self {
            sample_id: r.sample_id.clone(),
            e_m: r.e_m,
            e_a: r.e_a,
            e_a_mirror: r.e_a_mirror,
        }
    }
}

fn point_errors(a: &Shape, b: &Shape, s: f64) -> Vec<f64> {
    a.points()
        .iter()
        .zip(b.points())
        .map(|(p, q)| p.distance(q) / s)
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Normalized per-landmark distance between the original detection and the
/// back-transformed mirror detection. `s` is measured on `det_original`.
pub fn mirror_point_errors(
    det_original: &Shape,
    det_mirror: &Shape,
    meta: &ImageMeta,
    map: &SymmetryMap,
    norm: &NormalizationSpec,
) -> Result<Vec<f64>> {
    check_same_len(det_original, det_mirror)?;
    let back = mirror_shape(det_mirror, meta, map)?;
    let s = normalization_size(det_original, norm)?;
    Ok(point_errors(det_original, &back, s))
}

/// Sample-wise mirror error `e_m`.
pub fn mirror_error(
    det_original: &Shape,
    det_mirror: &Shape,
    meta: &ImageMeta,
    map: &SymmetryMap,
    norm: &NormalizationSpec,
) -> Result<f64> {
    mirror_point_errors(det_original, det_mirror, meta, map, norm).map(|e| mean(&e))
}

pub fn alignment_point_errors(det: &Shape, gt: &Shape, norm: &NormalizationSpec) -> Result<Vec<f64>> {
    check_same_len(gt, det)?;
    let s = normalization_size(gt, norm)?;
    Ok(point_errors(det, gt, s))
}

/// Sample-wise alignment error `e_a`; `s` is measured on the ground truth.
pub fn alignment_error(det: &Shape, gt: &Shape, norm: &NormalizationSpec) -> Result<f64> {
    alignment_point_errors(det, gt, norm).map(|e| mean(&e))
}

fn evaluate_one(record: &SampleRecord, map: &SymmetryMap, norm: &NormalizationSpec) -> Result<SampleRecord> {
    let k = map.num_points();
    for shape in std::iter::once(&record.det_original)
        .chain(std::iter::once(&record.det_mirror))
        .chain(record.ground_truth.as_ref())
    {
        if shape.len() != k {
            return Err(Error::LengthMismatch {
                expected: k,
                found: shape.len(),
            });
        }
    }
    let mut out = record.clone();
    out.e_m = Some(mirror_error(
        &record.det_original,
        &record.det_mirror,
        &record.meta,
        map,
        norm,
    )?);
    if let Some(gt) = &record.ground_truth {
        out.e_a = Some(alignment_error(&record.det_original, gt, norm)?);
        let gt_mirror = mirror_shape(gt, &record.meta, map)?;
        out.e_a_mirror = Some(alignment_error(&record.det_mirror, &gt_mirror, norm)?);
    }
    Ok(out)
}

/// A sample that could not be evaluated.
#[derive(Debug)]
pub struct Skipped {
    pub sample_id: String,
    pub error: Error,
}

/// Fills `e_m` (and `e_a`, `e_a_mirror` when ground truth is present) for
/// every record. Failing samples are reported and skipped; output order
/// follows input order.
pub fn evaluate_records(
    records: &[SampleRecord],
    map: &SymmetryMap,
    norm: &NormalizationSpec,
) -> (Vec<SampleRecord>, Vec<Skipped>) {
    let results: Vec<_> = records
        .par_iter()
        .map(|r| evaluate_one(r, map, norm))
        .collect();
    let mut done = Vec::with_capacity(records.len());
    let mut skipped = Vec::new();
    for (record, result) in records.iter().zip(results) {
        match result {
            Ok(r) => done.push(r),
            Err(error) => skipped.push(Skipped {
                sample_id: record.sample_id.clone(),
                error,
            }),
        }
    }
    (done, skipped)
}

/// Per-landmark statistics over a data set. Standard deviations use the
/// population convention (divide by n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerPointStats {
    pub mirror_mean: Vec<f64>,
    pub mirror_std: Vec<f64>,
    /// Present only when every record carries ground truth.
    pub alignment_mean: Option<Vec<f64>>,
}

pub fn per_point_stats(
    records: &[SampleRecord],
    map: &SymmetryMap,
    norm: &NormalizationSpec,
) -> Result<PerPointStats> {
    if records.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: records.len(),
        });
    }
    let k = map.num_points();
    let n = records.len() as f64;
    let mut sum = vec![0.0; k];
    let mut sum_sq = vec![0.0; k];
    let mut align = Some(vec![0.0; k]);

    // order-invariant: accumulate in sample_id order
    let mut order: Vec<&SampleRecord> = records.iter().collect();
    order.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));

    for r in order {
        let e = mirror_point_errors(&r.det_original, &r.det_mirror, &r.meta, map, norm)
            .map_err(|e| e.for_sample(&r.sample_id))?;
        for (j, v) in e.iter().enumerate() {
            sum[j] += v;
            sum_sq[j] += v * v;
        }
        align = match (align, &r.ground_truth) {
            (Some(mut acc), Some(gt)) => {
                let a = alignment_point_errors(&r.det_original, gt, norm)
                    .map_err(|e| e.for_sample(&r.sample_id))?;
                acc.iter_mut().zip(&a).for_each(|(s, v)| *s += v);
                Some(acc)
            }
            _ => None,
        };
    }
    let mirror_mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let mirror_std = sum_sq
        .iter()
        .zip(&mirror_mean)
        .map(|(sq, m)| (sq / n - m * m).max(0.0).sqrt())
        .collect();
    Ok(PerPointStats {
        mirror_mean,
        mirror_std,
        alignment_mean: align.map(|a| a.iter().map(|s| s / n).collect()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PckResult {
    pub per_point: Vec<f64>,
    pub average: f64,
}

/// Percentage of correct keypoints: point `k` is correct iff its distance to
/// the ground truth is at most `alpha * max(h, w)` of the tight ground-truth box.
pub fn pck(dets: &[Shape], gts: &[Shape], alpha: f64) -> Result<PckResult> {
    if dets.len() != gts.len() {
        return Err(Error::LengthMismatch {
            expected: gts.len(),
            found: dets.len(),
        });
    }
    if dets.is_empty() {
        return Err(Error::InsufficientData { needed: 1, found: 0 });
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
    }
    let k = gts[0].len();
    let mut correct = vec![0usize; k];
    for (det, gt) in dets.iter().zip(gts) {
        if gt.len() != k {
            return Err(Error::LengthMismatch {
                expected: k,
                found: gt.len(),
            });
        }
        check_same_len(gt, det)?;
        let size = bounding_box(gt)?.size();
        if !(size.is_finite() && size > 0.0) {
            return Err(Error::ZeroSize(size));
        }
        let limit = alpha * size;
        for (j, (p, q)) in det.points().iter().zip(gt.points()).enumerate() {
            if p.distance(q) <= limit {
                correct[j] += 1;
            }
        }
    }
    let n = dets.len() as f64;
    let per_point: Vec<f64> = correct.iter().map(|&c| c as f64 / n).collect();
    let average = mean(&per_point);
    Ok(PckResult { per_point, average })
}

/// Pearson product-moment correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: xs.len(),
        });
    }
    let mx = mean(xs);
    let my = mean(ys);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties receiving their average rank.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub rank: usize,
    pub sample_id: String,
    pub e_a: f64,
    pub e_m: f64,
}

/// Samples sorted by ascending alignment error (ties by sample id) with the
/// paired mirror error.
pub fn sorted_error_curve<R: ErrorSource>(records: &[R]) -> Result<Vec<CurveRow>> {
    let mut rows = records
        .iter()
        .map(|r| {
            Ok((
                r.sample_id().to_string(),
                r.require(ErrorKey::AlignmentError)?,
                r.require(ErrorKey::MirrorError)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| match a.1.total_cmp(&b.1) {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(rank, (sample_id, e_a, e_m))| CurveRow {
            rank: rank + 1,
            sample_id,
            e_a,
            e_m,
        })
        .collect())
}
