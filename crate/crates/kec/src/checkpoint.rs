//! Checkpoint files: model configuration, named parameter tensors and
//! optional AdamW state.
//!
//! ```text
//! file := "KECK" version:u32 body crc32(everything before):u32
//! body := seed:u64 epoch:u64 config:str count:u64 (name:str shape:[u64] data:[f64])*
//!         has_opt:u8 [lr beta1 beta2 eps weight_decay:f64 step:u64 (m:[f64] v:[f64])*]
//! ```

use std::path::Path;

use kec_core::autodiff::{AdamW, AdamWConfig, ParamSet, Tensor};
use kec_core::model::Model;

use crate::codec::{Reader, Writer};
use crate::config::{parse_model_config, render_model_config};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"KECK";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub optimizer: Option<AdamW>,
    pub seed: u64,
    /// Epoch the parameters were taken from; 0 before training.
    pub epoch: usize,
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(MAGIC);
    w.u32(CHECKPOINT_VERSION);
    w.u64(ck.seed);
    w.usize(ck.epoch);
    w.str(&render_model_config(&ck.model.config));
    w.usize(ck.model.params.len());
    for (_, name, t) in ck.model.params.iter() {
        w.str(name);
        w.usize(t.shape().len());
        for d in t.shape() {
            w.usize(*d);
        }
        w.f64s(t.data());
    }
    match &ck.optimizer {
        None => w.u8(0),
        Some(opt) => {
            w.u8(1);
            let c = &opt.config;
            for v in [c.lr, c.beta1, c.beta2, c.eps, c.weight_decay] {
                w.f64(v);
            }
            w.u64(opt.step);
            for (m, v) in opt.m.iter().zip(&opt.v) {
                w.f64s(m);
                w.f64s(v);
            }
        }
    }
    let crc = crc32fast::hash(&w.buf);
    w.u32(crc);
    w.buf
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 12 {
        return Err(Error::corrupt("checkpoint", "file too short"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let mut r = Reader::new(body, "checkpoint");
    if r.take(4)? != MAGIC {
        return Err(Error::corrupt("checkpoint", "bad magic"));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version { what: "checkpoint", found: version, expected: CHECKPOINT_VERSION });
    }
    if u32::from_le_bytes(tail.try_into().expect("4 bytes")) != crc32fast::hash(body) {
        return Err(Error::corrupt("checkpoint", "checksum mismatch"));
    }
    let seed = r.u64()?;
    let epoch = r.usize()?;
    let config = parse_model_config(&r.str()?)?;
    let count = r.len(1)?;
    let mut loaded = ParamSet::new();
    for _ in 0..count {
        let name = r.str()?;
        let ndim = r.len(8)?;
        let shape = (0..ndim).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
        let data = r.f64s()?;
        loaded.add(name, Tensor::new(shape, data)?);
    }
    let mut model = Model::new(config, 0)?;
    model.params.load_from(&loaded)?;
    let optimizer = if r.bool()? {
        let mut c = [0.0; 5];
        for v in &mut c {
            *v = r.f64()?;
        }
        let [lr, beta1, beta2, eps, weight_decay] = c;
        let mut opt = AdamW::new(&model.params, AdamWConfig { lr, beta1, beta2, eps, weight_decay });
        opt.step = r.u64()?;
        for k in 0..model.params.len() {
            let (m, v) = (r.f64s()?, r.f64s()?);
            if m.len() != opt.m[k].len() || v.len() != opt.v[k].len() {
                return Err(Error::corrupt(
                    "checkpoint",
                    format!("optimizer state size for `{}`", model.params.name(kec_core::autodiff::ParamId(k))),
                ));
            }
            opt.m[k] = m;
            opt.v[k] = v;
        }
        Some(opt)
    } else {
        None
    };
    if !r.is_done() {
        return Err(Error::corrupt("checkpoint", "trailing bytes"));
    }
    Ok(Checkpoint { model, optimizer, seed, epoch })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    std::fs::write(path, encode_checkpoint(ck)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
