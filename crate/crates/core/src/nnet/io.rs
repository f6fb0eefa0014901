//! Binary model files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "OBNN"  u32 version=1  u32 layer_count
//! per layer:  u8 kind  <kind fields>  u32 param_count  (u32 rank, rank × u32 dim)*
//! per layer, per param: raw f64 payload
//! trailer:  u32 input_rank  input_rank × u32 dim  u64 seed  u8 trained
//! ```
//!
//! Kind tags and fields: 0 conv (u32 kernel, u32 filters, u32 stride, u8 padding 0=same 1=valid),
//! 1 lrn (u32 n, f64 k, f64 alpha, f64 beta), 2 relu, 3 flatten, 4 fc (u32 units), 5 softmax.

use std::fs;
use std::path::Path;

use super::conv::Padding;
use super::lrn::LrnParams;
use super::model::{LayerSpec, OrientationModel};
use crate::binio::{put_u32, put_usize, Reader};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MODEL_MAGIC: [u8; 4] = *b"OBNN";
pub const MODEL_VERSION: u32 = 1;

fn kind_tag(spec: &LayerSpec) -> u8 {
    match spec {
        LayerSpec::Conv { .. } => 0,
        LayerSpec::Lrn(_) => 1,
        LayerSpec::Relu => 2,
        LayerSpec::Flatten => 3,
        LayerSpec::Fc { .. } => 4,
        LayerSpec::Softmax => 5,
    }
}

pub fn model_to_bytes(model: &OrientationModel) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + model.param_count() * 8);
    out.extend_from_slice(&MODEL_MAGIC);
    put_u32(&mut out, MODEL_VERSION);
    put_usize(&mut out, model.layers.len())?;
    for layer in &model.layers {
        out.push(kind_tag(&layer.spec));
        match &layer.spec {
            LayerSpec::Conv { kernel, filters, stride, padding } => {
                put_usize(&mut out, *kernel)?;
                put_usize(&mut out, *filters)?;
                put_usize(&mut out, *stride)?;
                out.push(match padding {
                    Padding::Same => 0,
                    Padding::Valid => 1,
                });
            }
            LayerSpec::Lrn(p) => {
                put_usize(&mut out, p.n)?;
                for v in [p.k, p.alpha, p.beta] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            LayerSpec::Fc { units } => put_usize(&mut out, *units)?,
            LayerSpec::Relu | LayerSpec::Flatten | LayerSpec::Softmax => {}
        }
        put_usize(&mut out, layer.params.len())?;
        for p in &layer.params {
            put_usize(&mut out, p.rank())?;
            for &d in p.shape() {
                put_usize(&mut out, d)?;
            }
        }
    }
    for p in model.layers.iter().flat_map(|l| &l.params) {
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    put_usize(&mut out, model.input_shape.len())?;
    for &d in &model.input_shape {
        put_usize(&mut out, d)?;
    }
    out.extend_from_slice(&model.seed.to_le_bytes());
    out.push(u8::from(model.trained));
    Ok(out)
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<OrientationModel> {
    let mut r = Reader::new(bytes, "model file");
    r.magic(MODEL_MAGIC)?;
    r.version(MODEL_VERSION)?;
    let layer_count = r.u32()? as usize;
    let mut specs = Vec::new();
    let mut param_shapes: Vec<Vec<Vec<usize>>> = Vec::new();
    for i in 0..layer_count {
        let spec = match r.u8()? {
            0 => {
                let kernel = r.u32()? as usize;
                let filters = r.u32()? as usize;
                let stride = r.u32()? as usize;
                let padding = match r.u8()? {
                    0 => Padding::Same,
                    1 => Padding::Valid,
                    other => return Err(Error::Parse(format!("layer {i}: unknown padding tag {other}"))),
                };
                LayerSpec::Conv { kernel, filters, stride, padding }
            }
            1 => {
                let n = r.u32()? as usize;
                LayerSpec::Lrn(LrnParams { n, k: r.f64()?, alpha: r.f64()?, beta: r.f64()? })
            }
            2 => LayerSpec::Relu,
            3 => LayerSpec::Flatten,
            4 => LayerSpec::Fc { units: r.u32()? as usize },
            5 => LayerSpec::Softmax,
            other => return Err(Error::Parse(format!("layer {i}: unknown kind tag {other}"))),
        };
        let count = r.u32()? as usize;
        let mut shapes = Vec::new();
        for _ in 0..count {
            let rank = r.u32()? as usize;
            shapes.push((0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?);
        }
        specs.push(spec);
        param_shapes.push(shapes);
    }
    let mut payloads = Vec::new();
    for shapes in &param_shapes {
        let mut layer = Vec::new();
        for shape in shapes {
            let len: usize = shape.iter().product();
            let raw = r.take(len.checked_mul(8).ok_or_else(|| Error::Parse("parameter size overflow".into()))?)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            layer.push(Tensor::from_vec(shape, data)?);
        }
        payloads.push(layer);
    }
    let rank = r.u32()? as usize;
    let input_shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let seed = r.u64()?;
    let trained = match r.u8()? {
        0 => false,
        1 => true,
        other => return Err(Error::Parse(format!("bad trained flag {other}"))),
    };
    r.finish()?;

    let mut model = OrientationModel::from_specs(&input_shape, &specs, seed)?;
    for (i, (layer, params)) in model.layers.iter_mut().zip(payloads).enumerate() {
        let expected: Vec<&[usize]> = layer.params.iter().map(|p| p.shape()).collect();
        let found: Vec<&[usize]> = params.iter().map(|p| p.shape()).collect();
        if expected != found {
            return Err(Error::Shape(format!(
                "layer {i}: stored parameter shapes {found:?} do not match architecture {expected:?}"
            )));
        }
        layer.params = params;
    }
    model.trained = trained;
    Ok(model)
}

pub fn save_model(model: &OrientationModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_bytes(model)?).map_err(|e| Error::file(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<OrientationModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    model_from_bytes(&bytes)
}
