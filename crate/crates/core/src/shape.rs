//! Landmark shapes, left/right symmetry maps and the mirror transform.
//!
//! Coordinates are continuous and the horizontal flip is `x' = width - x`.
//! Data sets that use 0-based pixel indices should pass the pixel width; the
//! resulting constant shift cancels in every error that compares two mirrored
//! quantities.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

/// Ordered list of K landmark points for one object instance.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Shape {
    points: Vec<Point>,
}

impl Shape {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points }
    }

    /// Builds a shape from interleaved `[x0, y0, x1, y1, ...]` coordinates.
    pub fn from_interleaved(coords: &[f64]) -> Result<Self> {
        if !coords.len().is_multiple_of(2) {
            return Err(Error::LengthMismatch {
                expected: coords.len() + 1,
                found: coords.len(),
            });
        }
        Ok(Self::new(
            coords
                .chunks_exact(2)
                .map(|c| Point::new(c[0], c[1]))
                .collect(),
        ))
    }

    pub fn to_interleaved(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn points_mut(&mut self) -> &mut [Point] {
        &mut self.points
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|p| p.x.is_finite() && p.y.is_finite())
    }

    pub fn centroid(&self) -> Point {
        let n = self.points.len().max(1) as f64;
        let sum = self
            .points
            .iter()
            .fold(Point::default(), |acc, &p| acc + p);
        sum * (1.0 / n)
    }

    /// Applies `p -> center + (p - origin) * scale` rotated by `angle` radians.
    pub fn similarity(&self, origin: Point, scale: f64, angle: f64, center: Point) -> Shape {
        let (s, c) = angle.sin_cos();
        Shape::new(
            self.points
                .iter()
                .map(|&p| {
                    let d = p - origin;
                    Point::new(
                        center.x + scale * (c * d.x - s * d.y),
                        center.y + scale * (s * d.x + c * d.y),
                    )
                })
                .collect(),
        )
    }

    /// Largest point-wise Euclidean distance to `other`.
    pub fn max_distance(&self, other: &Shape) -> f64 {
        self.points
            .iter()
            .zip(&other.points)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn check_same_len(a: &Shape, b: &Shape) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

/// Involutive landmark index permutation pairing left and right parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetryMap {
    mapping: Vec<usize>,
}

impl SymmetryMap {
    /// Validates `mapping` as an involutive permutation.
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        validate_symmetry_map(Self { mapping })
    }

    pub fn identity(num_points: usize) -> Self {
        Self {
            mapping: (0..num_points).collect(),
        }
    }

    /// Builds the map from explicit left/right pairs and self-mapped indices.
    /// Every index in `0..num_points` must be covered exactly once.
    pub fn from_pairs(num_points: usize, pairs: &[(usize, usize)], fixed: &[usize]) -> Result<Self> {
        let mut mapping = vec![usize::MAX; num_points];
        let mut assign = |i: usize, j: usize| -> Result<()> {
            if i >= num_points {
                return Err(Error::NotAPermutation { index: i, target: j });
            }
            if mapping[i] != usize::MAX {
                return Err(Error::NotAPermutation {
                    index: i,
                    target: mapping[i],
                });
            }
            mapping[i] = j;
            Ok(())
        };
        for &(i, j) in pairs {
            assign(i, j)?;
            assign(j, i)?;
        }
        for &k in fixed {
            assign(k, k)?;
        }
        if let Some(k) = mapping.iter().position(|&t| t == usize::MAX) {
            return Err(Error::NotAPermutation {
                index: k,
                target: usize::MAX,
            });
        }
        Self::new(mapping)
    }

    pub fn num_points(&self) -> usize {
        self.mapping.len()
    }

    pub fn get(&self, k: usize) -> usize {
        self.mapping[k]
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    /// Pairs `(i, j)` with `i < j`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.mapping
            .iter()
            .enumerate()
            .filter(|&(i, &j)| i < j)
            .map(|(i, &j)| (i, j))
            .collect()
    }

    pub fn fixed_points(&self) -> Vec<usize> {
        self.mapping
            .iter()
            .enumerate()
            .filter(|&(i, &j)| i == j)
            .map(|(i, _)| i)
            .collect()
    }

    /// 68-point face layout (iBUG / 300-W ordering).
    pub fn face68() -> Self {
        let mut pairs: Vec<(usize, usize)> = (0..8).map(|i| (i, 16 - i)).collect();
        pairs.extend((17..22).map(|i| (i, 43 - i)));
        pairs.extend([(31, 35), (32, 34)]);
        pairs.extend([(36, 45), (37, 44), (38, 43), (39, 42), (40, 47), (41, 46)]);
        pairs.extend([(48, 54), (49, 53), (50, 52), (55, 59), (56, 58)]);
        pairs.extend([(60, 64), (61, 63), (65, 67)]);
        let fixed = [8, 27, 28, 29, 30, 33, 51, 57, 62, 66];
        Self::from_pairs(68, &pairs, &fixed).expect("face68 preset is a valid involution")
    }

    /// 14-joint body layout (LSP ordering: ankles, knees, hips, wrists,
    /// elbows, shoulders, neck, head top).
    pub fn body14() -> Self {
        Self::from_pairs(
            14,
            &[(0, 5), (1, 4), (2, 3), (6, 11), (7, 10), (8, 9)],
            &[12, 13],
        )
        .expect("body14 preset is a valid involution")
    }

    /// Compact 17-point face used by the synthetic experiments.
    pub fn face17() -> Self {
        Self::from_pairs(
            17,
            &[(0, 3), (1, 2), (4, 5), (8, 9), (10, 11), (14, 15)],
            &[6, 7, 12, 13, 16],
        )
        .expect("face17 preset is a valid involution")
    }
}

/// Returns the map iff it is an involutive permutation.
pub fn validate_symmetry_map(map: SymmetryMap) -> Result<SymmetryMap> {
    let k = map.mapping.len();
    let mut seen = vec![false; k];
    for (index, &target) in map.mapping.iter().enumerate() {
        if target >= k || seen[target] {
            return Err(Error::NotAPermutation { index, target });
        }
        seen[target] = true;
    }
    for (index, &target) in map.mapping.iter().enumerate() {
        if map.mapping[target] != index {
            return Err(Error::NotInvolutive { index });
        }
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub sample_id: String,
    pub width: f64,
    pub height: f64,
}

impl ImageMeta {
    pub fn new(sample_id: impl Into<String>, width: f64, height: f64) -> Self {
        Self {
            sample_id: sample_id.into(),
            width,
            height,
        }
    }
}

pub fn mirror_point(x: f64, width: f64) -> f64 {
    width - x
}

/// Flips a shape horizontally and re-assigns part indices through `map`.
///
/// Output point `k` is `(width - x[pi(k)], y[pi(k)])`. Applied to a detection
/// on the mirror image this is the back-transform onto the original image.
pub fn mirror_shape(shape: &Shape, meta: &ImageMeta, map: &SymmetryMap) -> Result<Shape> {
    if shape.len() != map.num_points() {
        return Err(Error::LengthMismatch {
            expected: map.num_points(),
            found: shape.len(),
        });
    }
    Ok(Shape::new(
        map.mapping
            .iter()
            .map(|&src| {
                let p = shape.points[src];
                Point::new(mirror_point(p.x, meta.width), p.y)
            })
            .collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// `max(h, w)`.
    pub fn size(&self) -> f64 {
        self.width().max(self.height())
    }

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn mirrored(&self, width: f64) -> BoundingBox {
        BoundingBox {
            x_min: mirror_point(self.x_max, width),
            y_min: self.y_min,
            x_max: mirror_point(self.x_min, width),
            y_max: self.y_max,
        }
    }
}

/// Tight axis-aligned box around all points.
pub fn bounding_box(shape: &Shape) -> Result<BoundingBox> {
    let first = shape.points.first().ok_or(Error::EmptyShape)?;
    let init = BoundingBox {
        x_min: first.x,
        y_min: first.y,
        x_max: first.x,
        y_max: first.y,
    };
    Ok(shape.points.iter().fold(init, |b, p| BoundingBox {
        x_min: b.x_min.min(p.x),
        y_min: b.y_min.min(p.y),
        x_max: b.x_max.max(p.x),
        y_max: b.y_max.max(p.y),
    }))
}

/// How the object size `s` is measured for error normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NormalizationSpec {
    /// `max(h, w)` of the tight box.
    BboxMaxSide,
    /// Distance between two landmarks, e.g. the eye centers.
    Interocular(usize, usize),
    Fixed(f64),
}

pub fn normalization_size(shape: &Shape, spec: &NormalizationSpec) -> Result<f64> {
    let s = match *spec {
        NormalizationSpec::BboxMaxSide => bounding_box(shape)?.size(),
        NormalizationSpec::Interocular(i, j) => {
            let k = shape.len();
            if i >= k || j >= k {
                return Err(Error::LengthMismatch {
                    expected: i.max(j) + 1,
                    found: k,
                });
            }
            shape.points[i].distance(&shape.points[j])
        }
        NormalizationSpec::Fixed(v) => v,
    };
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::ZeroSize(s));
    }
    Ok(s)
}

impl fmt::Display for NormalizationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizationSpec::BboxMaxSide => write!(f, "bbox"),
            NormalizationSpec::Interocular(i, j) => write!(f, "interocular:{i},{j}"),
            NormalizationSpec::Fixed(v) => write!(f, "fixed:{v}"),
        }
    }
}

impl FromStr for NormalizationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unknown normalization mode '{s}'"));
        if s == "bbox" {
            return Ok(NormalizationSpec::BboxMaxSide);
        }
        if let Some(rest) = s.strip_prefix("interocular:") {
            let (i, j) = rest.split_once(',').ok_or_else(bad)?;
            let i = i.trim().parse().map_err(|_| bad())?;
            let j = j.trim().parse().map_err(|_| bad())?;
            return Ok(NormalizationSpec::Interocular(i, j));
        }
        if let Some(rest) = s.strip_prefix("fixed:") {
            let v: f64 = rest.trim().parse().map_err(|_| bad())?;
            return Ok(NormalizationSpec::Fixed(v));
        }
        Err(bad())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta(width: f64) -> ImageMeta {
        ImageMeta::new("s", width, width)
    }

    fn shape(coords: &[(f64, f64)]) -> Shape {
        Shape::new(coords.iter().map(|&(x, y)| Point::new(x, y)).collect())
    }

    #[test]
    fn symmetry_map_validation() {
        assert!(SymmetryMap::new(vec![1, 0, 2]).is_ok());
        assert!(matches!(
            SymmetryMap::new(vec![1, 2, 0]),
            Err(Error::NotInvolutive { .. })
        ));
        assert!(matches!(
            SymmetryMap::new(vec![0, 0]),
            Err(Error::NotAPermutation { .. })
        ));
        assert!(matches!(
            SymmetryMap::new(vec![0, 5]),
            Err(Error::NotAPermutation { .. })
        ));
    }

    #[test]
    fn presets_are_valid() {
        for map in [SymmetryMap::face68(), SymmetryMap::body14(), SymmetryMap::face17()] {
            assert!(validate_symmetry_map(map.clone()).is_ok());
        }
        let face = SymmetryMap::face68();
        assert_eq!(face.get(36), 45);
        assert_eq!(face.get(30), 30);
        assert_eq!(face.fixed_points().len(), 10);
        assert_eq!(face.pairs().len(), 29);
    }

    #[test]
    fn from_pairs_rejects_gaps_and_overlaps() {
        assert!(SymmetryMap::from_pairs(3, &[(0, 1)], &[]).is_err());
        assert!(SymmetryMap::from_pairs(3, &[(0, 1)], &[1, 2]).is_err());
    }

    #[test]
    fn mirror_point_examples() {
        assert_eq!(mirror_point(30.0, 100.0), 70.0);
        assert_eq!(mirror_point(50.0, 100.0), 50.0);
        assert_eq!(mirror_point(mirror_point(70.0, 100.0), 100.0), 70.0);
    }

    #[test]
    fn mirror_shape_examples() {
        let swap = SymmetryMap::new(vec![1, 0]).unwrap();
        let sym = shape(&[(10.0, 5.0), (90.0, 5.0)]);
        assert_eq!(mirror_shape(&sym, &meta(100.0), &swap).unwrap(), sym);

        let s = shape(&[(10.0, 5.0), (70.0, 5.0)]);
        assert_eq!(
            mirror_shape(&s, &meta(100.0), &swap).unwrap(),
            shape(&[(30.0, 5.0), (90.0, 5.0)])
        );

        let three = shape(&[(1.0, 1.0), (2.0, 2.0), (3.0, 3.0)]);
        assert!(matches!(
            mirror_shape(&three, &meta(10.0), &swap),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn bounding_box_examples() {
        let b = bounding_box(&shape(&[(0.0, 0.0), (4.0, 3.0)])).unwrap();
        assert_eq!(
            b,
            BoundingBox {
                x_min: 0.0,
                y_min: 0.0,
                x_max: 4.0,
                y_max: 3.0
            }
        );
        assert_eq!(b.size(), 4.0);

        let single = bounding_box(&shape(&[(2.0, 2.0)])).unwrap();
        assert_eq!(single.size(), 0.0);
        assert!(matches!(
            normalization_size(&shape(&[(2.0, 2.0)]), &NormalizationSpec::BboxMaxSide),
            Err(Error::ZeroSize(_))
        ));
        assert!(matches!(bounding_box(&Shape::default()), Err(Error::EmptyShape)));
    }

    #[test]
    fn normalization_examples() {
        let s = shape(&[(0.0, 0.0), (3.0, 4.0)]);
        assert_eq!(
            normalization_size(&s, &NormalizationSpec::Interocular(0, 1)).unwrap(),
            5.0
        );
        assert_eq!(normalization_size(&s, &NormalizationSpec::Fixed(1.0)).unwrap(), 1.0);
        let t = shape(&[(0.0, 0.0), (4.0, 3.0)]);
        assert_eq!(normalization_size(&t, &NormalizationSpec::BboxMaxSide).unwrap(), 4.0);
        assert!(normalization_size(&s, &NormalizationSpec::Fixed(0.0)).is_err());
        assert!(normalization_size(&s, &NormalizationSpec::Fixed(f64::NAN)).is_err());
    }

    #[test]
    fn normalization_spec_parsing() {
        for text in ["bbox", "interocular:4,5", "fixed:2.5"] {
            let spec: NormalizationSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
        assert!("interocular:4".parse::<NormalizationSpec>().is_err());
        assert!("median".parse::<NormalizationSpec>().is_err());
    }

    fn random_shape_and_width() -> impl Strategy<Value = (Vec<(f64, f64)>, f64)> {
        (1.0f64..1000.0).prop_flat_map(|w| {
            (
                prop::collection::vec((0.0..w, 0.0..w), 17),
                Just(w),
            )
        })
    }

    proptest! {
        #[test]
        fn mirror_shape_is_an_involution((coords, w) in random_shape_and_width()) {
            let map = SymmetryMap::face17();
            let s = shape(&coords);
            let m = meta(w);
            let back = mirror_shape(&mirror_shape(&s, &m, &map).unwrap(), &m, &map).unwrap();
            prop_assert!(back.max_distance(&s) <= 1e-9 * w);
        }

        #[test]
        fn size_is_mirror_invariant((coords, w) in random_shape_and_width()) {
            let map = SymmetryMap::face17();
            let s = shape(&coords);
            let mirrored = mirror_shape(&s, &meta(w), &map).unwrap();
            let a = bounding_box(&s).unwrap().size();
            let b = bounding_box(&mirrored).unwrap().size();
            prop_assert!((a - b).abs() <= 1e-9 * w);
            // eye pair (4, 5) is swapped by the map, so its distance is preserved
            let io = NormalizationSpec::Interocular(4, 5);
            if let (Ok(x), Ok(y)) = (normalization_size(&s, &io), normalization_size(&mirrored, &io)) {
                prop_assert!((x - y).abs() <= 1e-9 * w);
            }
        }
    }
}
