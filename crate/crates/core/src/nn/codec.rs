//! Binary weight container.
//!
//! All integers and floats are little-endian.
//!
//! | field            | type             |
//! |------------------|------------------|
//! | magic            | `b"ITCGMLP\0"`   |
//! | format_version   | u32 (= 1)        |
//! | n_sizes          | u32              |
//! | layer_sizes      | n_sizes × u32    |
//! | hidden act.      | u8 (0 id, 1 relu, 2 tanh) |
//! | output act.      | u8               |
//! | has_optimizer    | u8 (0 or 1)      |
//! | reserved         | u8 (0)           |
//! | n_params         | u64              |
//! | params           | n_params × f64   |
//!
//! When `has_optimizer` is 1 the file continues with `step_count: u64`,
//! `learning_rate, beta1, beta2, epsilon: f64`, then the first and second
//! moments as `n_params × f64` each. Trailing bytes are rejected.

use alloc::format;
use alloc::vec::Vec;

use super::{Activation, AdamState, Mlp};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ITCGMLP\0";
pub const FORMAT_VERSION: u32 = 1;

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::Identity => 0,
        Activation::Relu => 1,
        Activation::Tanh => 2,
    }
}

fn activation_from(code: u8) -> Result<Activation> {
    match code {
        0 => Ok(Activation::Identity),
        1 => Ok(Activation::Relu),
        2 => Ok(Activation::Tanh),
        c => Err(Error::Format(format!("unknown activation code {c}"))),
    }
}

pub fn encode(net: &Mlp, opt: Option<&AdamState>) -> Vec<u8> {
    let n = net.n_params();
    let mut out = Vec::with_capacity(40 + 8 * n * 3);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layer_sizes().len() as u32).to_le_bytes());
    for &s in net.layer_sizes() {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.push(activation_code(net.hidden_activation()));
    out.push(activation_code(net.output_activation()));
    out.push(opt.is_some() as u8);
    out.push(0);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    let put = |out: &mut Vec<u8>, xs: &[f64]| {
        for x in xs {
            out.extend_from_slice(&x.to_le_bytes());
        }
    };
    put(&mut out, net.params());
    if let Some(opt) = opt {
        out.extend_from_slice(&opt.step_count.to_le_bytes());
        put(
            &mut out,
            &[opt.learning_rate, opt.beta1, opt.beta2, opt.epsilon],
        );
        put(&mut out, &opt.first_moment);
        put(&mut out, &opt.second_moment);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::Format("length overflow".into()))?,
        )?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<(Mlp, Option<AdamState>)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let n_sizes = r.u32()? as usize;
    if n_sizes > 64 {
        return Err(Error::Format(format!("implausible layer count {n_sizes}")));
    }
    let sizes = (0..n_sizes)
        .map(|_| r.u32().map(|s| s as usize))
        .collect::<Result<Vec<_>>>()?;
    let hidden = activation_from(r.u8()?)?;
    let output = activation_from(r.u8()?)?;
    let has_opt = match r.u8()? {
        0 => false,
        1 => true,
        c => return Err(Error::Format(format!("bad optimizer flag {c}"))),
    };
    r.u8()?;
    let n_params = r.u64()? as usize;
    let params = r.f64s(n_params)?;
    let net = Mlp::from_parts(&sizes, hidden, output, params)
        .map_err(|e| Error::Format(format!("inconsistent network: {e}")))?;
    let opt = if has_opt {
        let step_count = r.u64()?;
        let h = r.f64s(4)?;
        let first_moment = r.f64s(n_params)?;
        let second_moment = r.f64s(n_params)?;
        Some(AdamState {
            first_moment,
            second_moment,
            step_count,
            learning_rate: h[0],
            beta1: h[1],
            beta2: h[2],
            epsilon: h[3],
        })
    } else {
        None
    };
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok((net, opt))
}
