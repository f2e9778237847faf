//! File formats: landmark tables, image widths, symmetry maps and reports.
//!
//! All text output uses `,` as the delimiter, `\n` line endings and Rust's
//! shortest round-trip float formatting, so it is locale independent and
//! parses back to the same values.

mod landmarks;
mod report;
mod symmetry_file;

pub use landmarks::{parse_landmarks, parse_widths, read_landmarks, read_widths, write_landmarks};
pub use report::*;
pub use symmetry_file::{parse_symmetry_file, read_symmetry_map, write_symmetry_map, SymmetryFile};
