use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shape::{bounding_box, Point, Shape};

/// Mean shape and principal variation directions in a canonical frame
/// (centroid at the origin, tight-box max side equal to one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeModel {
    pub mean: Shape,
    /// Orthonormal directions over interleaved coordinates, largest variance first.
    pub basis: Vec<Vec<f64>>,
    /// Standard deviation along each direction.
    pub scales: Vec<f64>,
}

/// Moves the centroid to the origin and scales the tight box to unit max side.
pub fn canonicalize(shape: &Shape) -> Result<Shape> {
    let size = bounding_box(shape)?.size();
    if !(size.is_finite() && size > 0.0) {
        return Err(Error::DegenerateShapes(format!("box size {size}")));
    }
    let c = shape.centroid();
    Ok(Shape::new(
        shape.points().iter().map(|&p| (p - c) * (1.0 / size)).collect(),
    ))
}

pub fn fit_shape_model(shapes: &[Shape], n_components: usize) -> Result<ShapeModel> {
    if shapes.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: shapes.len(),
        });
    }
    let k = shapes[0].len();
    if k == 0 {
        return Err(Error::EmptyShape);
    }
    let dim = 2 * k;
    if n_components > dim {
        return Err(Error::InvalidConfig(format!(
            "{n_components} components requested for {dim} coordinates"
        )));
    }
    let canon = shapes
        .iter()
        .map(|s| {
            if s.len() != k {
                return Err(Error::LengthMismatch {
                    expected: k,
                    found: s.len(),
                });
            }
            canonicalize(s).map(|c| DVector::from_vec(c.to_interleaved()))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = canon.len() as f64;
    let mean = canon.iter().fold(DVector::zeros(dim), |acc, v| acc + v) / n;
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for v in &canon {
        let d = v - &mean;
        cov.ger(1.0 / n, &d, &d, 1.0);
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let basis = order[..n_components]
        .iter()
        .map(|&j| eig.eigenvectors.column(j).iter().copied().collect())
        .collect();
    let scales = order[..n_components]
        .iter()
        .map(|&j| eig.eigenvalues[j].max(0.0).sqrt())
        .collect();
    Ok(ShapeModel {
        mean: Shape::from_interleaved(mean.as_slice())?,
        basis,
        scales,
    })
}

impl ShapeModel {
    pub fn num_points(&self) -> usize {
        self.mean.len()
    }

    pub fn num_components(&self) -> usize {
        self.basis.len()
    }

    /// `mean + sum_j coeffs[j] * basis[j]`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Shape {
        let mut coords = self.mean.to_interleaved();
        for (c, dir) in coeffs.iter().zip(&self.basis) {
            coords.iter_mut().zip(dir).for_each(|(x, d)| *x += c * d);
        }
        Shape::new(
            coords
                .chunks_exact(2)
                .map(|c| Point::new(c[0], c[1]))
                .collect(),
        )
    }

    /// Coefficients of a canonical-frame shape along each basis direction.
    pub fn project(&self, canonical: &Shape) -> Vec<f64> {
        let coords = canonical.to_interleaved();
        let mean = self.mean.to_interleaved();
        self.basis
            .iter()
            .map(|dir| {
                dir.iter()
                    .zip(coords.iter().zip(&mean))
                    .map(|(d, (x, m))| d * (x - m))
                    .sum()
            })
            .collect()
    }
}
