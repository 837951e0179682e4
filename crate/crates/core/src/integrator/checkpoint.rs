//! Little-endian binary checkpoints.
//!
//! ```text
//! "SNS3" | version u16 | config hash u64 | nu f64 | k_max u32 | scheme u8 |
//! time f64 | rng length u32 | rng bytes | mode count u64 |
//! per mode: k 3×i32, coefficient 6×f64 (re, im of each component)
//! ```
//!
//! The RNG blob is the ChaCha8 seed (32 bytes), stream (u64) and word
//! position (u128).

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Scheme, SimConfig, TrajectoryState};
use crate::dynamics::ForcingSpec;
use crate::error::{Error, Result};
use crate::spectral::{SpectralField, Truncation};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SNS3";
pub const CHECKPOINT_VERSION: u16 = 1;
const RNG_BLOB_LEN: usize = 32 + 8 + 16;

/// Everything stored in a checkpoint besides the state itself.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointHeader {
    pub version: u16,
    pub config_hash: u64,
    pub nu: f64,
    pub k_max: u32,
    pub scheme: Scheme,
    pub time: f64,
}

fn rng_blob(rng: &ChaCha8Rng) -> Vec<u8> {
    let mut out = Vec::with_capacity(RNG_BLOB_LEN);
    out.extend_from_slice(&rng.get_seed());
    out.extend_from_slice(&rng.get_stream().to_le_bytes());
    out.extend_from_slice(&rng.get_word_pos().to_le_bytes());
    out
}

fn rng_from_blob(b: &[u8]) -> Result<ChaCha8Rng> {
    if b.len() != RNG_BLOB_LEN {
        return Err(Error::Format(format!(
            "rng state has {} bytes, expected {RNG_BLOB_LEN}",
            b.len()
        )));
    }
    let seed: [u8; 32] = b[..32].try_into().expect("length checked");
    let stream = u64::from_le_bytes(b[32..40].try_into().expect("length checked"));
    let pos = u128::from_le_bytes(b[40..56].try_into().expect("length checked"));
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(pos);
    Ok(rng)
}

pub fn save_checkpoint(
    path: &Path,
    state: &TrajectoryState,
    cfg: &SimConfig,
    spec: &ForcingSpec,
) -> Result<()> {
    let trunc = state.field.truncation();
    let mut buf = Vec::with_capacity(64 + trunc.len() * 60);
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&cfg.config_hash(spec).to_le_bytes());
    buf.extend_from_slice(&cfg.nu.to_le_bytes());
    buf.extend_from_slice(&trunc.k_max().to_le_bytes());
    buf.push(cfg.scheme.code());
    buf.extend_from_slice(&state.time.to_le_bytes());
    let rng = rng_blob(&state.rng);
    buf.extend_from_slice(&(rng.len() as u32).to_le_bytes());
    buf.extend_from_slice(&rng);
    buf.extend_from_slice(&(trunc.len() as u64).to_le_bytes());
    for (k, c) in trunc.modes().iter().zip(state.field.coeffs()) {
        for v in k.components() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for z in c {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    f.sync_all()?;
    Ok(())
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.data.len() - self.pos < n {
            return Err(Error::Format(format!("truncated file while reading {what}")));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn arr<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        Ok(self.take(N, what)?.try_into().expect("exact length"))
    }
    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.arr::<1>(what)?[0])
    }
    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.arr(what)?))
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.arr(what)?))
    }
    fn i32(&mut self, what: &str) -> Result<i32> {
        Ok(i32::from_le_bytes(self.arr(what)?))
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.arr(what)?))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.arr(what)?))
    }
}

pub fn load_checkpoint(path: &Path) -> Result<(TrajectoryState, CheckpointHeader)> {
    let data = fs::read(path)?;
    let mut r = Reader { data: &data, pos: 0 };
    if r.arr::<4>("magic")? != CHECKPOINT_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = r.u16("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let config_hash = r.u64("config hash")?;
    let nu = r.f64("nu")?;
    let k_max = r.u32("k_max")?;
    let scheme_code = r.u8("scheme")?;
    let scheme = Scheme::from_code(scheme_code)
        .ok_or_else(|| Error::Format(format!("unknown scheme code {scheme_code}")))?;
    let time = r.f64("time")?;
    let rng_len = r.u32("rng length")? as usize;
    let rng = rng_from_blob(r.take(rng_len, "rng state")?)?;
    let trunc = Truncation::new(k_max).map_err(|e| Error::Format(e.to_string()))?;
    let count = r.u64("mode count")?;
    if count != trunc.len() as u64 {
        return Err(Error::Format(format!(
            "{count} modes stored, truncation k_max = {k_max} has {}",
            trunc.len()
        )));
    }
    let mut coeffs = Vec::with_capacity(trunc.len());
    for k in trunc.modes() {
        let stored = [r.i32("wavevector")?, r.i32("wavevector")?, r.i32("wavevector")?];
        if stored != k.components() {
            return Err(Error::Format(format!(
                "mode order mismatch: expected {k}, found {stored:?}"
            )));
        }
        let mut c = [Complex64::new(0.0, 0.0); 3];
        for z in c.iter_mut() {
            *z = Complex64::new(r.f64("coefficient")?, r.f64("coefficient")?);
        }
        coeffs.push(c);
    }
    if r.pos != data.len() {
        return Err(Error::Format(format!("{} trailing bytes", data.len() - r.pos)));
    }
    let field = SpectralField::from_coeffs(&trunc, coeffs)
        .map_err(|e| Error::Format(format!("stored field is invalid: {e}")))?;
    let header = CheckpointHeader {
        version,
        config_hash,
        nu,
        k_max,
        scheme,
        time,
    };
    Ok((TrajectoryState { field, time, rng }, header))
}

/// Loads a checkpoint and checks that it was written by the same run
/// configuration.
pub fn resume_checkpoint(
    path: &Path,
    cfg: &SimConfig,
    spec: &ForcingSpec,
) -> Result<TrajectoryState> {
    let (state, header) = load_checkpoint(path)?;
    let expected = cfg.config_hash(spec);
    if header.config_hash != expected {
        return Err(Error::ConfigMismatch {
            expected,
            found: header.config_hash,
        });
    }
    // the hash covers these; a mismatch here means a corrupted header
    if header.nu.to_bits() != cfg.nu.to_bits()
        || header.k_max != cfg.truncation.k_max()
        || header.scheme != cfg.scheme
    {
        return Err(Error::Format("header fields disagree with the config hash".into()));
    }
    Ok(state)
}
