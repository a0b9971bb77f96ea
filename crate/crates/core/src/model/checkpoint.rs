//! Versioned binary checkpoints.
//!
//! Layout (little-endian): magic `TATTCKPT`, format version `u32`, config
//! JSON (`u32` length + bytes), seed `u64`, completed epochs `u64`, loss
//! history (`u64` count, then per row `u64` epoch and four `f64`), parameters
//! (`u64` count + `f32`s), optimiser step `u64` and the two moment buffers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig};

use super::arch::Network;
use super::config::ModelConfig;
use super::train::{LossRecord, TrainState};

const MAGIC: &[u8; 8] = b"TATTCKPT";
pub const FORMAT_VERSION: u32 = 1;

fn fmt_err(e: impl ToString) -> Error {
    Error::format("checkpoint", e)
}

fn write_f32s(w: &mut impl Write, v: &[f32]) -> std::io::Result<()> {
    w.write_u64::<LittleEndian>(v.len() as u64)?;
    for x in v {
        w.write_f32::<LittleEndian>(*x)?;
    }
    Ok(())
}

fn read_f32s(r: &mut impl Read, expect: usize) -> Result<Vec<f32>> {
    let n = r.read_u64::<LittleEndian>().map_err(fmt_err)? as usize;
    if n != expect {
        return Err(fmt_err(format!(
            "buffer of {n} values, network needs {expect}"
        )));
    }
    let mut v = vec![0.0f32; n];
    r.read_f32_into::<LittleEndian>(&mut v).map_err(fmt_err)?;
    Ok(v)
}

pub fn save(state: &TrainState, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    // Write to a sibling temp file first so a crash never leaves a torn file.
    let tmp = path.with_extension("tmp");
    let f = File::create(&tmp).map_err(io)?;
    let mut w = BufWriter::new(f);
    let config = serde_json::to_vec(&state.config).map_err(fmt_err)?;
    (|| -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u32::<LittleEndian>(config.len() as u32)?;
        w.write_all(&config)?;
        w.write_u64::<LittleEndian>(state.seed)?;
        w.write_u64::<LittleEndian>(state.epoch as u64)?;
        w.write_u64::<LittleEndian>(state.history.len() as u64)?;
        for rec in &state.history {
            w.write_u64::<LittleEndian>(rec.epoch as u64)?;
            for v in [rec.arc_image, rec.arc_template, rec.rec, rec.total] {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        write_f32s(&mut w, &state.params)?;
        w.write_u64::<LittleEndian>(state.optimizer.step)?;
        write_f32s(&mut w, &state.optimizer.m)?;
        write_f32s(&mut w, &state.optimizer.v)?;
        w.flush()
    })()
    .map_err(io)?;
    drop(w);
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn load(path: &Path) -> Result<TrainState> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(f);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(fmt_err)?;
    if &magic != MAGIC {
        return Err(fmt_err("not a checkpoint file"));
    }
    let version = r.read_u32::<LittleEndian>().map_err(fmt_err)?;
    if version != FORMAT_VERSION {
        return Err(Error::ConfigMismatch(format!(
            "checkpoint format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let len = r.read_u32::<LittleEndian>().map_err(fmt_err)? as usize;
    let mut config = vec![0u8; len];
    r.read_exact(&mut config).map_err(fmt_err)?;
    let config: ModelConfig = serde_json::from_slice(&config).map_err(fmt_err)?;
    let network = Network::new(&config)?;
    let seed = r.read_u64::<LittleEndian>().map_err(fmt_err)?;
    let epoch = r.read_u64::<LittleEndian>().map_err(fmt_err)? as usize;
    let rows = r.read_u64::<LittleEndian>().map_err(fmt_err)? as usize;
    let mut history = Vec::with_capacity(rows.min(1 << 20));
    for _ in 0..rows {
        let ep = r.read_u64::<LittleEndian>().map_err(fmt_err)? as usize;
        let mut v = [0.0f64; 4];
        r.read_f64_into::<LittleEndian>(&mut v).map_err(fmt_err)?;
        history.push(LossRecord {
            epoch: ep,
            arc_image: v[0],
            arc_template: v[1],
            rec: v[2],
            total: v[3],
        });
    }
    let n = network.num_params();
    let params = read_f32s(&mut r, n)?;
    let step = r.read_u64::<LittleEndian>().map_err(fmt_err)?;
    let m = read_f32s(&mut r, n)?;
    let v = read_f32s(&mut r, n)?;
    let adam_config = AdamConfig {
        weight_decay: config.weight_decay() as f32,
        ..Default::default()
    };
    Ok(TrainState {
        config,
        network,
        params,
        optimizer: Adam {
            config: adam_config,
            step,
            m,
            v,
        },
        epoch,
        history,
        seed,
    })
}

/// Loads a checkpoint and refuses it if its embedding size, class count or
/// input side differ from `expected`.
pub fn load_compatible(path: &Path, expected: &ModelConfig) -> Result<TrainState> {
    let state = load(path)?;
    check_compatible(&state.config, expected)?;
    Ok(state)
}

pub fn check_compatible(found: &ModelConfig, expected: &ModelConfig) -> Result<()> {
    let mut diffs = Vec::new();
    if found.embedding_dim != expected.embedding_dim {
        diffs.push(format!(
            "K {} != {}",
            found.embedding_dim, expected.embedding_dim
        ));
    }
    if found.num_classes != expected.num_classes {
        diffs.push(format!(
            "C {} != {}",
            found.num_classes, expected.num_classes
        ));
    }
    if found.input_side != expected.input_side {
        diffs.push(format!(
            "input_side {} != {}",
            found.input_side, expected.input_side
        ));
    }
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(Error::ConfigMismatch(diffs.join(", ")))
    }
}
