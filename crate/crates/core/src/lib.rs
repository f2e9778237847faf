//! # mirrorability
//!
//! Measures how consistently a landmark localization model behaves on an image
//! and its horizontal mirror, and puts that measurement to work.
//!
//! - [`shape`]: shapes, left/right symmetry maps, the mirror transform and
//!   normalization sizes.
//! - [`metrics`]: mirror error `e_m`, alignment error `e_a`, PCK, per-point
//!   statistics and correlation.
//! - [`selection`]: top-M difficult-sample selection and the consistency
//!   between selections.
//! - [`cascade`]: a small cascaded shape regressor with multi-initialization
//!   median aggregation and the variance-based smart restart.
//! - [`feedback`]: restart gating on the mirror error, keep-best rounds and
//!   precision/recall against the variance baseline.
//! - [`synth`]: synthetic scenes and simulated detectors standing in for
//!   images and third-party models.
//! - [`io`] and [`experiment`]: file formats and reproducible experiment runs
//!   used by the `mirrorability` command-line tool.
//!
//! ```
//! use mirrorability::metrics::mirror_error;
//! use mirrorability::shape::{mirror_shape, ImageMeta, NormalizationSpec, Point, Shape, SymmetryMap};
//!
//! let map = SymmetryMap::new(vec![1, 0]).unwrap();
//! let meta = ImageMeta::new("img", 100.0, 80.0);
//! let det = Shape::new(vec![Point::new(10.0, 5.0), Point::new(90.0, 5.0)]);
//! let det_on_mirror = Shape::new(vec![Point::new(10.0, 5.0), Point::new(86.0, 5.0)]);
//! let e_m = mirror_error(&det, &det_on_mirror, &meta, &map, &NormalizationSpec::Fixed(1.0)).unwrap();
//! assert_eq!(e_m, 2.0);
//!
//! // a perfectly equivariant detector has zero mirror error
//! let equivariant = mirror_shape(&det, &meta, &map).unwrap();
//! assert_eq!(mirror_error(&det, &equivariant, &meta, &map, &NormalizationSpec::BboxMaxSide).unwrap(), 0.0);
//! ```

pub mod cascade;
pub mod error;
pub mod experiment;
pub mod feedback;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod selection;
pub mod shape;
pub mod synth;

mod serde_util;

pub use error::{Error, Result};
