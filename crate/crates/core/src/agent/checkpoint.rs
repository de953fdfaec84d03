//! Versioned binary checkpoint.
//!
//! Layout, all integers and floats little-endian:
//!
//! | field | encoding |
//! |---|---|
//! | magic | 8 bytes `VGBCKPT1` |
//! | version | u32 |
//! | dtype | string (`f32`) |
//! | agent config | string, `key=value` lines |
//! | action_dim | u64 |
//! | env_steps, grad_steps, actor_updates | 3 × u64 |
//! | log_alpha | f32 |
//! | parameter groups | u32 count, then per group: string name, tensor list |
//! | optimizers | u32 count, then per optimizer: string name, f64 lr, u64 t, tensor list (m), tensor list (v) |
//!
//! A string is a u32 byte length followed by UTF-8 bytes. A tensor list is a
//! u32 count followed by, per tensor, a u64 element count and the elements.

use std::io::{Read, Write};
use std::path::Path;

use super::{Agent, AgentConfig};
use crate::error::{Error, Result};
use crate::nn::{Adam, Params, Scalar};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"VGBCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u32(&mut self, v: u32) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn str(&mut self, s: &str) -> Result<()> {
        self.u32(s.len() as u32)?;
        Ok(self.0.write_all(s.as_bytes())?)
    }
    fn tensors(&mut self, ts: &[&[f32]]) -> Result<()> {
        self.u32(ts.len() as u32)?;
        for t in ts {
            self.u64(t.len() as u64)?;
            let mut buf = Vec::with_capacity(t.len() * 4);
            for v in t.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            self.0.write_all(&buf)?;
        }
        Ok(())
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b).map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
        Ok(b)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes()?))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let mut b = vec![0u8; n];
        self.0.read_exact(&mut b).map_err(|e| Error::Checkpoint(format!("truncated string: {e}")))?;
        String::from_utf8(b).map_err(|_| Error::Checkpoint("string is not UTF-8".into()))
    }
    fn tensors_into(&mut self, what: &str, dst: Vec<&mut [f32]>) -> Result<()> {
        let count = self.u32()? as usize;
        if count != dst.len() {
            return Err(Error::Checkpoint(format!("{what}: expected {} tensors, found {count}", dst.len())));
        }
        for (i, t) in dst.into_iter().enumerate() {
            let len = self.u64()? as usize;
            if len != t.len() {
                return Err(Error::Checkpoint(format!("{what}[{i}]: expected {} values, found {len}", t.len())));
            }
            let mut buf = vec![0u8; len * 4];
            self.0.read_exact(&mut buf).map_err(|e| Error::Checkpoint(format!("truncated tensor: {e}")))?;
            for (v, c) in t.iter_mut().zip(buf.chunks_exact(4)) {
                *v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            }
        }
        Ok(())
    }
}

fn refs(v: &[Vec<f32>]) -> Vec<&[f32]> {
    v.iter().map(|t| t.as_slice()).collect()
}

fn muts(v: &mut [Vec<f32>]) -> Vec<&mut [f32]> {
    v.iter_mut().map(|t| t.as_mut_slice()).collect()
}

const GROUPS: [&str; 6] = ["encoder", "actor", "critics", "target_encoder", "target_critics", "log_alpha"];
const OPTIMIZERS: [&str; 4] = ["encoder", "actor", "critic", "alpha"];

pub fn write_checkpoint<W: Write>(agent: &Agent, w: W) -> Result<()> {
    let mut w = Writer(w);
    w.0.write_all(CHECKPOINT_MAGIC)?;
    w.u32(CHECKPOINT_VERSION)?;
    w.str(f32::NAME)?;
    w.str(&agent.config.to_text())?;
    w.u64(agent.action_dim() as u64)?;
    w.u64(agent.env_steps)?;
    w.u64(agent.grad_steps)?;
    w.u64(agent.actor_updates)?;
    w.0.write_all(&agent.nets.log_alpha.to_le_bytes())?;
    let n = &agent.nets;
    let alpha = [n.log_alpha];
    let groups: [Vec<&[f32]>; 6] = [
        n.encoder.tensors(),
        n.actor.tensors(),
        n.critics.tensors(),
        n.target_encoder.tensors(),
        n.target_critics.tensors(),
        vec![&alpha[..]],
    ];
    w.u32(GROUPS.len() as u32)?;
    for (name, g) in GROUPS.iter().zip(&groups) {
        w.str(name)?;
        w.tensors(g)?;
    }
    let opts: [&Adam<f32>; 4] = [&agent.opt_encoder, &agent.opt_actor, &agent.opt_critic, &agent.opt_alpha];
    w.u32(opts.len() as u32)?;
    for (name, o) in OPTIMIZERS.iter().zip(opts) {
        w.str(name)?;
        w.f64(o.lr)?;
        w.u64(o.t)?;
        w.tensors(&refs(&o.m))?;
        w.tensors(&refs(&o.v))?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<Agent> {
    let mut r = Reader(r);
    if &r.bytes::<8>()? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let dtype = r.str()?;
    if dtype != f32::NAME {
        return Err(Error::Checkpoint(format!("unsupported dtype {dtype}")));
    }
    let config = AgentConfig::from_text(&r.str()?)?;
    let action_dim = r.u64()? as usize;
    let mut agent = Agent::new(config, action_dim, 0)?;
    agent.env_steps = r.u64()?;
    agent.grad_steps = r.u64()?;
    agent.actor_updates = r.u64()?;
    let log_alpha = r.f32()?;
    let count = r.u32()? as usize;
    if count != GROUPS.len() {
        return Err(Error::Checkpoint(format!("expected {} parameter groups, found {count}", GROUPS.len())));
    }
    let mut alpha = [0.0f32];
    for want in GROUPS {
        let name = r.str()?;
        if name != want {
            return Err(Error::Checkpoint(format!("expected group '{want}', found '{name}'")));
        }
        let n = &mut agent.nets;
        let dst = match want {
            "encoder" => n.encoder.tensors_mut(),
            "actor" => n.actor.tensors_mut(),
            "critics" => n.critics.tensors_mut(),
            "target_encoder" => n.target_encoder.tensors_mut(),
            "target_critics" => n.target_critics.tensors_mut(),
            _ => vec![&mut alpha[..]],
        };
        r.tensors_into(want, dst)?;
    }
    if alpha[0].to_bits() != log_alpha.to_bits() {
        return Err(Error::Checkpoint("log_alpha header and group disagree".into()));
    }
    agent.nets.log_alpha = log_alpha;
    let count = r.u32()? as usize;
    if count != OPTIMIZERS.len() {
        return Err(Error::Checkpoint(format!("expected {} optimizers, found {count}", OPTIMIZERS.len())));
    }
    for want in OPTIMIZERS {
        let name = r.str()?;
        if name != want {
            return Err(Error::Checkpoint(format!("expected optimizer '{want}', found '{name}'")));
        }
        let o = match want {
            "encoder" => &mut agent.opt_encoder,
            "actor" => &mut agent.opt_actor,
            "critic" => &mut agent.opt_critic,
            _ => &mut agent.opt_alpha,
        };
        o.lr = r.f64()?;
        o.t = r.u64()?;
        r.tensors_into(want, muts(&mut o.m))?;
        r.tensors_into(want, muts(&mut o.v))?;
    }
    let mut rest = [0u8; 1];
    if r.0.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after checkpoint".into()));
    }
    Ok(agent)
}

pub fn save_checkpoint(agent: &Agent, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(agent, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Agent> {
    let bytes = std::fs::read(path)?;
    read_checkpoint(bytes.as_slice())
}
