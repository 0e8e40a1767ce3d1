//! Checkpoints: a little-endian named-tensor container in the same style as
//! the dataset format, holding parameters, batch-norm running statistics,
//! optimizer moments, run metadata, and the run configuration echoed as text.

use crate::autodiff::{Model, ModelState, Optimizer, ParamStore};
use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 4] = b"CVCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub arch: String,
    /// Complex-domain dataset shape (channels, height, width).
    pub input: (u32, u32, u32),
    pub classes: u32,
    pub epochs_completed: u32,
    pub seed: u64,
    pub opt_step: u64,
    /// RunConfig echoed as `key = value` lines.
    pub config_echo: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub tensors: Vec<NamedTensor>,
}

/// Collect every persistent array of a run under stable names: parameters
/// under their own names, running statistics as `<bn>.running_mean/var`,
/// Adam moments as `opt.m.<param>` / `opt.v.<param>`.
pub fn snapshot(
    meta: CheckpointMeta,
    model: &Model,
    params: &ParamStore,
    state: &ModelState,
    optimizer: Option<&Optimizer>,
) -> Checkpoint {
    let mut tensors = Vec::new();
    for (_, name, shape, data) in params.iter() {
        tensors.push(NamedTensor {
            name: name.to_string(),
            shape: shape.to_vec(),
            data: data.to_vec(),
        });
    }
    for idx in model.bn_nodes() {
        let bn = state.bn(idx);
        let base = &model.nodes[idx].name;
        tensors.push(NamedTensor {
            name: format!("{base}.running_mean"),
            shape: vec![bn.mean.len()],
            data: bn.mean.clone(),
        });
        tensors.push(NamedTensor {
            name: format!("{base}.running_var"),
            shape: vec![bn.var.len()],
            data: bn.var.clone(),
        });
    }
    if let Some(opt) = optimizer {
        let (m, v) = opt.moments();
        for (id, name, _, _) in params.iter() {
            tensors.push(NamedTensor {
                name: format!("opt.m.{name}"),
                shape: vec![m[id].len()],
                data: m[id].clone(),
            });
            tensors.push(NamedTensor {
                name: format!("opt.v.{name}"),
                shape: vec![v[id].len()],
                data: v[id].clone(),
            });
        }
    }
    Checkpoint { meta, tensors }
}

/// Write parameters, statistics, and moments back into a freshly built
/// model of the same architecture. Optimizer restoration is optional.
pub fn restore(
    ckpt: &Checkpoint,
    model: &Model,
    params: &mut ParamStore,
    state: &mut ModelState,
    optimizer: Option<&mut Optimizer>,
) -> Result<()> {
    let by_name: std::collections::HashMap<&str, &NamedTensor> =
        ckpt.tensors.iter().map(|t| (t.name.as_str(), t)).collect();
    let ids: Vec<usize> = (0..params.len()).collect();
    for id in ids {
        let name = params.name(id).to_string();
        let t = by_name
            .get(name.as_str())
            .ok_or_else(|| Error::Invalid(format!("checkpoint is missing tensor {name}")))?;
        if t.data.len() != params.get(id).len() {
            return Err(Error::LengthMismatch {
                expected: params.get(id).len(),
                got: t.data.len(),
            });
        }
        params.get_mut(id).copy_from_slice(&t.data);
    }
    for idx in model.bn_nodes() {
        let base = model.nodes[idx].name.clone();
        let mean = by_name
            .get(format!("{base}.running_mean").as_str())
            .ok_or_else(|| Error::Invalid(format!("checkpoint is missing {base} statistics")))?;
        let var = by_name
            .get(format!("{base}.running_var").as_str())
            .ok_or_else(|| Error::Invalid(format!("checkpoint is missing {base} statistics")))?;
        let bn = state.bn_mut(idx);
        if mean.data.len() != bn.mean.len() || var.data.len() != bn.var.len() {
            return Err(Error::Invalid(format!("{base} statistics have wrong size")));
        }
        bn.mean.copy_from_slice(&mean.data);
        bn.var.copy_from_slice(&var.data);
    }
    if let Some(opt) = optimizer {
        let mut m = Vec::with_capacity(params.len());
        let mut v = Vec::with_capacity(params.len());
        let mut found = true;
        for (_, name, _, data) in params.iter() {
            match (
                by_name.get(format!("opt.m.{name}").as_str()),
                by_name.get(format!("opt.v.{name}").as_str()),
            ) {
                (Some(tm), Some(tv))
                    if tm.data.len() == data.len() && tv.data.len() == data.len() =>
                {
                    m.push(tm.data.clone());
                    v.push(tv.data.clone());
                }
                _ => {
                    found = false;
                    break;
                }
            }
        }
        if found {
            opt.restore(ckpt.meta.opt_step, m, v);
        }
    }
    Ok(())
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let mut out: Vec<u8> = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let put_str = |out: &mut Vec<u8>, s: &str| {
        out.extend_from_slice(&(s.len() as u32).to_le_bytes());
        out.extend_from_slice(s.as_bytes());
    };
    put_str(&mut out, &ckpt.meta.arch);
    for v in [ckpt.meta.input.0, ckpt.meta.input.1, ckpt.meta.input.2] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&ckpt.meta.classes.to_le_bytes());
    out.extend_from_slice(&ckpt.meta.epochs_completed.to_le_bytes());
    out.extend_from_slice(&ckpt.meta.seed.to_le_bytes());
    out.extend_from_slice(&ckpt.meta.opt_step.to_le_bytes());
    put_str(&mut out, &ckpt.meta.config_echo);
    out.extend_from_slice(&(ckpt.tensors.len() as u32).to_le_bytes());
    for t in &ckpt.tensors {
        put_str(&mut out, &t.name);
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    let mut off = 0usize;
    let take = |off: &mut usize, n: usize| -> Result<std::ops::Range<usize>> {
        if *off + n > bytes.len() {
            return Err(Error::Truncated);
        }
        let r = *off..*off + n;
        *off += n;
        Ok(r)
    };
    let r = take(&mut off, 4)?;
    if &bytes[r] != MAGIC {
        return Err(Error::Invalid("not a checkpoint file".into()));
    }
    let u32_at = |r: std::ops::Range<usize>| u32::from_le_bytes(bytes[r].try_into().unwrap());
    let u64_at = |r: std::ops::Range<usize>| u64::from_le_bytes(bytes[r].try_into().unwrap());
    let version = u32_at(take(&mut off, 4)?);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let get_str = |off: &mut usize| -> Result<String> {
        let len = u32_at(take(off, 4)?) as usize;
        let r = take(off, len)?;
        String::from_utf8(bytes[r].to_vec()).map_err(|_| Error::Invalid("bad string".into()))
    };
    let arch = get_str(&mut off)?;
    let input = (
        u32_at(take(&mut off, 4)?),
        u32_at(take(&mut off, 4)?),
        u32_at(take(&mut off, 4)?),
    );
    let classes = u32_at(take(&mut off, 4)?);
    let epochs_completed = u32_at(take(&mut off, 4)?);
    let seed = u64_at(take(&mut off, 8)?);
    let opt_step = u64_at(take(&mut off, 8)?);
    let config_echo = get_str(&mut off)?;
    let count = u32_at(take(&mut off, 4)?) as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name = get_str(&mut off)?;
        let ndim = u32_at(take(&mut off, 4)?) as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(u64_at(take(&mut off, 8)?) as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            let r = take(&mut off, 8)?;
            data.push(f64::from_le_bytes(bytes[r].try_into().unwrap()));
        }
        tensors.push(NamedTensor { name, shape, data });
    }
    if off != bytes.len() {
        return Err(Error::Truncated);
    }
    Ok(Checkpoint {
        meta: CheckpointMeta {
            arch,
            input,
            classes,
            epochs_completed,
            seed,
            opt_step,
            config_echo,
        },
        tensors,
    })
}
