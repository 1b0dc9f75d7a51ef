//! Bit-exact run snapshots.
//!
//! A checkpoint stores everything [`TrainState`] cannot re-derive: the
//! config, schedule counters, data cursor, live rng positions, the loss
//! history, every parameter and batch-norm buffer of the three networks,
//! and all Adam moments. Loading reconstructs a state whose next step is
//! bitwise identical to the run that saved it, and saving that loaded
//! state reproduces the file byte for byte.
//!
//! Layout (all integers little-endian): magic `V2SC`, version u16, the
//! config in its text form, counters, four rng positions, the loss
//! history, then named-tensor sections for the three networks and their
//! optimizers. Tensor names follow the networks' parameter visitation
//! order, so files are deterministic.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::ArrayD;

use crate::core::config::TrainConfig;
use crate::core::{RngState, SeededRng};
use crate::error::{Error, Result};
use crate::nn::{Adam, Params};
use crate::training::state::{BatchCursor, TrainState};

const MAGIC: &[u8; 4] = b"V2SC";
pub const CHECKPOINT_VERSION: u16 = 1;

// ---- byte-level plumbing ----------------------------------------------

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Checkpoint(format!(
                "unexpected end of checkpoint: needed {n} more bytes at offset {}",
                self.pos
            )));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::Checkpoint("checkpoint contains non-UTF-8 text".into()))
    }
}

fn put_string(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_tensors(out: &mut Vec<u8>, tensors: &[(String, ArrayD<f32>)]) {
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, values) in tensors {
        put_string(out, name);
        out.extend_from_slice(&(values.ndim() as u32).to_le_bytes());
        for &d in values.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in values.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn read_tensors(r: &mut Reader<'_>) -> Result<Vec<(String, ArrayD<f32>)>> {
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name = r.string()?;
        let ndim = r.u32()? as usize;
        let mut dims = Vec::with_capacity(ndim.min(8));
        for _ in 0..ndim {
            dims.push(r.u64()? as usize);
        }
        let numel: usize = dims.iter().product();
        // Bounds-check against the file before allocating anything big.
        let bytes = r.take(numel.checked_mul(4).ok_or_else(|| {
            Error::Checkpoint(format!("tensor {name:?} has an absurd element count"))
        })?)?;
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let values = ArrayD::from_shape_vec(ndarray::IxDyn(&dims), data)
            .map_err(|e| Error::Checkpoint(format!("tensor {name:?}: {e}")))?;
        tensors.push((name, values));
    }
    Ok(tensors)
}

// ---- network <-> tensor lists -----------------------------------------

fn collect_params(net: &mut impl Params) -> Vec<(String, ArrayD<f32>)> {
    let mut out = Vec::new();
    net.visit_params("", &mut |name, param, _| {
        out.push((name.to_string(), param.to_owned()));
    });
    out
}

fn collect_buffers(net: &mut impl Params) -> Vec<(String, ArrayD<f32>)> {
    let mut out = Vec::new();
    net.visit_buffers("", &mut |name, buffer| {
        out.push((name.to_string(), buffer.to_owned()));
    });
    out
}

fn apply_tensors(
    net: &mut impl Params,
    what: &str,
    tensors: Vec<(String, ArrayD<f32>)>,
    buffers: bool,
) -> Result<()> {
    let mut map: BTreeMap<String, ArrayD<f32>> = tensors.into_iter().collect();
    let mut missing = Vec::new();
    let mut problems = Vec::new();
    let mut fill = |name: &str, mut dst: ndarray::ArrayViewMutD<'_, f32>| match map.remove(name) {
        Some(src) => {
            if src.shape() == dst.shape() {
                dst.assign(&src);
            } else {
                problems.push(format!(
                    "{name}: checkpoint shape {:?}, model expects {:?}",
                    src.shape(),
                    dst.shape()
                ));
            }
        }
        None => missing.push(name.to_string()),
    };
    if buffers {
        net.visit_buffers("", &mut |name, dst| fill(name, dst));
    } else {
        net.visit_params("", &mut |name, dst, _| fill(name, dst));
    }
    if !missing.is_empty() || !map.is_empty() || !problems.is_empty() {
        let unexpected: Vec<String> = map.into_keys().collect();
        return Err(Error::Checkpoint(format!(
            "{what} mismatch: missing {missing:?}, unexpected {unexpected:?}, {problems:?}"
        )));
    }
    Ok(())
}

fn put_rng(out: &mut Vec<u8>, rng: &SeededRng) {
    let state = rng.state();
    out.extend_from_slice(&state.seed.to_le_bytes());
    out.extend_from_slice(&state.stream.to_le_bytes());
    out.extend_from_slice(&state.word_pos.to_le_bytes());
}

fn read_rng(r: &mut Reader<'_>) -> Result<SeededRng> {
    Ok(SeededRng::restore(RngState {
        seed: r.u64()?,
        stream: r.u64()?,
        word_pos: r.u128()?,
    }))
}

fn put_adam(out: &mut Vec<u8>, opt: &Adam) {
    out.extend_from_slice(&opt.t.to_le_bytes());
    let collect = |m: &BTreeMap<String, ArrayD<f32>>| -> Vec<(String, ArrayD<f32>)> {
        m.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    };
    put_tensors(out, &collect(&opt.m));
    put_tensors(out, &collect(&opt.v));
}

fn read_adam_into(r: &mut Reader<'_>, opt: &mut Adam) -> Result<()> {
    opt.t = r.u64()?;
    opt.m = read_tensors(r)?.into_iter().collect();
    opt.v = read_tensors(r)?.into_iter().collect();
    Ok(())
}

// ---- the two public operations ----------------------------------------

pub fn save_checkpoint(state: &mut TrainState, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    put_string(&mut out, &state.config.to_config_string());
    out.extend_from_slice(&state.gen_step.to_le_bytes());
    out.extend_from_slice(&state.critic_step.to_le_bytes());
    out.extend_from_slice(&state.cursor.epoch.to_le_bytes());
    out.extend_from_slice(&(state.cursor.position as u64).to_le_bytes());
    put_rng(&mut out, &state.rngs.augment);
    put_rng(&mut out, &state.rngs.clip_window);
    put_rng(&mut out, &state.rngs.gp_wave);
    put_rng(&mut out, &state.rngs.gp_power);
    out.extend_from_slice(&(state.loss_history.len() as u32).to_le_bytes());
    for &v in &state.loss_history {
        out.extend_from_slice(&v.to_le_bytes());
    }
    put_tensors(&mut out, &collect_params(&mut state.generator));
    put_tensors(&mut out, &collect_buffers(&mut state.generator));
    put_tensors(&mut out, &collect_params(&mut state.wave_critic));
    put_tensors(&mut out, &collect_buffers(&mut state.wave_critic));
    put_tensors(&mut out, &collect_params(&mut state.power_critic));
    put_tensors(&mut out, &collect_buffers(&mut state.power_critic));
    put_adam(&mut out, &state.gen_opt);
    put_adam(&mut out, &state.wave_opt);
    put_adam(&mut out, &state.power_opt);
    std::fs::write(path, out).map_err(|e| Error::io(path.to_path_buf(), e))
}

pub fn load_checkpoint(path: &Path) -> Result<TrainState> {
    let data = std::fs::read(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
    let mut r = Reader {
        data: &data,
        pos: 0,
    };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint(format!(
            "{}: not a V2SC checkpoint file",
            path.display()
        )));
    }
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "checkpoint version {version}; this build reads version {CHECKPOINT_VERSION}"
        )));
    }
    let config = TrainConfig::from_config_str(&r.string()?)?;
    // A fresh state gives us correctly shaped networks to fill in.
    let mut state = TrainState::new(config)?;
    state.gen_step = r.u64()?;
    state.critic_step = r.u64()?;
    state.cursor = BatchCursor {
        epoch: r.u64()?,
        position: r.u64()? as usize,
    };
    state.rngs.augment = read_rng(&mut r)?;
    state.rngs.clip_window = read_rng(&mut r)?;
    state.rngs.gp_wave = read_rng(&mut r)?;
    state.rngs.gp_power = read_rng(&mut r)?;
    let history_len = r.u32()? as usize;
    state.loss_history = Vec::with_capacity(history_len.min(4096));
    for _ in 0..history_len {
        state.loss_history.push(r.f64()?);
    }
    let generator_params = read_tensors(&mut r)?;
    let generator_buffers = read_tensors(&mut r)?;
    let wave_params = read_tensors(&mut r)?;
    let wave_buffers = read_tensors(&mut r)?;
    let power_params = read_tensors(&mut r)?;
    let power_buffers = read_tensors(&mut r)?;
    apply_tensors(&mut state.generator, "generator parameters", generator_params, false)?;
    apply_tensors(&mut state.generator, "generator buffers", generator_buffers, true)?;
    apply_tensors(&mut state.wave_critic, "wave critic parameters", wave_params, false)?;
    apply_tensors(&mut state.wave_critic, "wave critic buffers", wave_buffers, true)?;
    apply_tensors(&mut state.power_critic, "power critic parameters", power_params, false)?;
    apply_tensors(&mut state.power_critic, "power critic buffers", power_buffers, true)?;
    read_adam_into(&mut r, &mut state.gen_opt)?;
    read_adam_into(&mut r, &mut state.wave_opt)?;
    read_adam_into(&mut r, &mut state.power_opt)?;
    if r.pos != data.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint has {} unexpected trailing bytes",
            data.len() - r.pos
        )));
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::config::TrainConfig;
    use crate::nn::{buffer_checksum, param_checksum};
    use crate::training::update::{critic_update, generator_update, synthesize_batch};
    use ndarray::{Array2, Array4};

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            model_width_scale: 0.125,
            clip_seconds: 0.08,
            batch_size: 2,
            ..TrainConfig::default()
        }
    }

    fn tiny_batch() -> (Array4<f32>, Array2<f32>) {
        let videos = Array4::from_shape_fn((2, 2, 96, 96), |(b, t, i, j)| {
            ((b * 37 + t * 17 + i * 5 + j * 3) % 101) as f32 / 100.0
        });
        let real = Array2::from_shape_fn((2, 1280), |(b, i)| {
            0.4 * (2.0 * std::f32::consts::PI * (300.0 + 400.0 * b as f32) * i as f32 / 16_000.0)
                .sin()
        });
        (videos, real)
    }

    /// A state that has actually trained a little, so optimizer moments,
    /// rng positions, counters, and history are all nontrivial.
    fn warmed_state() -> TrainState {
        let mut state = TrainState::new(tiny_config()).unwrap();
        let (videos, real) = tiny_batch();
        let fake = synthesize_batch(&mut state.generator, &videos);
        critic_update(&mut state, &real, &fake).unwrap();
        generator_update(&mut state, &videos, &real).unwrap();
        state
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.v2sc"), dir.path().join("b.v2sc"));
        let mut state = warmed_state();
        save_checkpoint(&mut state, &a).unwrap();
        let mut loaded = load_checkpoint(&a).unwrap();
        save_checkpoint(&mut loaded, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn loaded_state_steps_identically_to_the_original() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.v2sc");
        let mut original = warmed_state();
        save_checkpoint(&mut original, &path).unwrap();
        let mut resumed = load_checkpoint(&path).unwrap();

        let (videos, real) = tiny_batch();
        for state in [&mut original, &mut resumed] {
            let fake = synthesize_batch(&mut state.generator, &videos);
            critic_update(state, &real, &fake).unwrap();
            generator_update(state, &videos, &real).unwrap();
        }
        assert_eq!(
            param_checksum(&mut original.generator),
            param_checksum(&mut resumed.generator)
        );
        assert_eq!(
            buffer_checksum(&mut original.generator),
            buffer_checksum(&mut resumed.generator)
        );
        assert_eq!(
            param_checksum(&mut original.wave_critic),
            param_checksum(&mut resumed.wave_critic)
        );
        assert_eq!(
            param_checksum(&mut original.power_critic),
            param_checksum(&mut resumed.power_critic)
        );
        assert_eq!(original.loss_history, resumed.loss_history);
        assert_eq!(original.cursor, resumed.cursor);
    }

    #[test]
    fn version_mismatch_names_both_versions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.v2sc");
        save_checkpoint(&mut TrainState::new(tiny_config()).unwrap(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 9; // version low byte
        std::fs::write(&path, bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('9') && msg.contains('1'), "{msg}");
    }

    #[test]
    fn truncated_file_is_an_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.v2sc");
        save_checkpoint(&mut TrainState::new(tiny_config()).unwrap(), &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("end of checkpoint"), "{err}");
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("not-a-ckpt");
        std::fs::write(&path, b"JUNKJUNKJUNK").unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("V2SC"), "{err}");
    }

    #[test]
    fn renamed_parameter_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.v2sc");
        save_checkpoint(&mut TrainState::new(tiny_config()).unwrap(), &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // Corrupt the first occurrence of a known parameter name.
        let needle = b"front.conv";
        let at = bytes
            .windows(needle.len())
            .position(|w| w == needle)
            .expect("generator's first parameter name present");
        bytes[at] = b'z';
        std::fs::write(&path, bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mismatch"), "{msg}");
        assert!(msg.contains("zront.conv"), "{msg}");
    }
}
