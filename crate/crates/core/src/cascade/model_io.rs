//! Binary model file.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic "MIRRCASC" | version u32
//! K u32 | components u32 | mean f64[2K] | basis f64[components * 2K] | scales f64[components]
//! probes u32 | offsets f64[2 * probes]
//! lambda f64 | seed u64 | mirror_augmented u8
//! stages u32 | feature_dim u32 | output_dim u32
//! per stage: weights f64[feature_dim * output_dim] (column-major) | intercept f64[output_dim]
//! ```
//!
//! Floats are stored by bit pattern, so a save/load cycle is bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, DVector};

use super::{CascadeModel, LinearStage, ProbeLayout, ShapeModel};
use crate::error::{Error, Result};
use crate::shape::{Point, Shape};

pub const MODEL_MAGIC: &[u8; 8] = b"MIRRCASC";
pub const MODEL_VERSION: u32 = 1;

// guards against absurd allocations from corrupt headers
const MAX_DIM: u32 = 1 << 20;

fn write_f64s<W: Write>(w: &mut W, values: impl IntoIterator<Item = f64>) -> Result<()> {
    for v in values {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    (0..n)
        .map(|_| r.read_f64::<LittleEndian>().map_err(truncated))
        .collect()
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::ModelFormat("file is truncated".into())
    } else {
        Error::Io(e)
    }
}

fn read_dim<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = r.read_u32::<LittleEndian>().map_err(truncated)?;
    if v > MAX_DIM {
        return Err(Error::ModelFormat(format!("{what} = {v} is out of range")));
    }
    Ok(v as usize)
}

pub fn write_model<W: Write>(w: &mut W, model: &CascadeModel) -> Result<()> {
    let sm = &model.shape_model;
    let k = sm.num_points();
    w.write_all(MODEL_MAGIC)?;
    w.write_u32::<LittleEndian>(MODEL_VERSION)?;

    w.write_u32::<LittleEndian>(k as u32)?;
    w.write_u32::<LittleEndian>(sm.num_components() as u32)?;
    write_f64s(w, sm.mean.to_interleaved())?;
    for dir in &sm.basis {
        write_f64s(w, dir.iter().copied())?;
    }
    write_f64s(w, sm.scales.iter().copied())?;

    let offsets = &model.probe_layout.offsets;
    w.write_u32::<LittleEndian>(offsets.len() as u32)?;
    write_f64s(w, offsets.iter().flat_map(|o| [o.x, o.y]))?;

    w.write_f64::<LittleEndian>(model.lambda)?;
    w.write_u64::<LittleEndian>(model.seed)?;
    w.write_u8(model.trained_with_mirror_augmentation as u8)?;

    let d = model.probe_layout.feature_dim(k);
    w.write_u32::<LittleEndian>(model.stages.len() as u32)?;
    w.write_u32::<LittleEndian>(d as u32)?;
    w.write_u32::<LittleEndian>(2 * k as u32)?;
    for stage in &model.stages {
        if stage.feature_dim() != d || stage.output_dim() != 2 * k {
            return Err(Error::ModelFormat("stage dimensions do not match the model".into()));
        }
        write_f64s(w, stage.weights.iter().copied())?;
        write_f64s(w, stage.intercept.iter().copied())?;
    }
    Ok(())
}

pub fn read_model<R: Read>(r: &mut R) -> Result<CascadeModel> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::ModelFormat("bad magic bytes".into()));
    }
    let version = r.read_u32::<LittleEndian>().map_err(truncated)?;
    if version != MODEL_VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }

    let k = read_dim(r, "K")?;
    let n_comp = read_dim(r, "components")?;
    let mean = Shape::from_interleaved(&read_f64s(r, 2 * k)?)?;
    let basis = (0..n_comp)
        .map(|_| read_f64s(r, 2 * k))
        .collect::<Result<Vec<_>>>()?;
    let scales = read_f64s(r, n_comp)?;

    let n_probes = read_dim(r, "probes")?;
    let offsets = read_f64s(r, 2 * n_probes)?
        .chunks_exact(2)
        .map(|c| Point::new(c[0], c[1]))
        .collect();

    let lambda = r.read_f64::<LittleEndian>().map_err(truncated)?;
    let seed = r.read_u64::<LittleEndian>().map_err(truncated)?;
    let augmented = match r.read_u8().map_err(truncated)? {
        0 => false,
        1 => true,
        v => return Err(Error::ModelFormat(format!("bad augmentation flag {v}"))),
    };

    let t = read_dim(r, "stages")?;
    let d = read_dim(r, "feature_dim")?;
    let m = read_dim(r, "output_dim")?;
    if d != k * n_probes || m != 2 * k {
        return Err(Error::ModelFormat("stage dimensions do not match the model".into()));
    }
    let stages = (0..t)
        .map(|_| {
            let weights = DMatrix::from_vec(d, m, read_f64s(r, d * m)?);
            let intercept = DVector::from_vec(read_f64s(r, m)?);
            Ok(LinearStage { weights, intercept })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::ModelFormat("trailing bytes after the last stage".into()));
    }

    Ok(CascadeModel {
        shape_model: ShapeModel {
            mean,
            basis,
            scales,
        },
        stages,
        probe_layout: ProbeLayout { offsets },
        lambda,
        seed,
        trained_with_mirror_augmentation: augmented,
    })
}

pub fn save_model(path: &Path, model: &CascadeModel) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(&mut w, model)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<CascadeModel> {
    read_model(&mut BufReader::new(File::open(path)?))
}
