//! Little-endian binary files for pilot sets and scenes.
//!
//! Pilot file: `b"ADPILOT\0"`, `u32` version, `u64` L, N, P, then the L×N
//! frequency pilots row-major as `(re, im)` pairs of `f64`.
//!
//! Scene file: `b"ADSCENE\0"`, `u32` version, `u64` N, M, P, seed, then N
//! activity bytes (0 or 1), then N·M·P taps in `(n, m, p)` order.

use crate::signal::{ChannelRealization, PilotSet, Scene};
use crate::{CMatrix, Error, Result, C64};

pub const PILOT_MAGIC: &[u8; 8] = b"ADPILOT\0";
pub const SCENE_MAGIC: &[u8; 8] = b"ADSCENE\0";
pub const VERSION: u32 = 1;
/// Largest subcarrier count accepted by the decoder.
pub const MAX_SUBCARRIERS: usize = 4096;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Decode(format!("truncated {what}")))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn dim(&mut self, what: &str) -> Result<usize> {
        usize::try_from(self.u64(what)?).map_err(|_| Error::Decode(format!("{what} too large")))
    }

    fn complex(&mut self) -> Result<C64> {
        let b = self.take(16, "complex value")?;
        let re = f64::from_le_bytes(b[..8].try_into().unwrap());
        let im = f64::from_le_bytes(b[8..].try_into().unwrap());
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::Decode("non-finite value".into()));
        }
        Ok(C64::new(re, im))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Decode(format!(
                "{} trailing bytes",
                self.remaining()
            )));
        }
        Ok(())
    }
}

fn header(r: &mut Reader<'_>, magic: &[u8; 8]) -> Result<()> {
    if r.take(8, "magic")? != magic {
        return Err(Error::Decode("bad magic".into()));
    }
    let v = r.u32("version")?;
    if v != VERSION {
        return Err(Error::Decode(format!("unsupported version {v}")));
    }
    Ok(())
}

/// Exact payload size in bytes, or an error if it overflows or disagrees with
/// what is left in the buffer.
fn expect_payload(r: &Reader<'_>, parts: &[usize], what: &str) -> Result<()> {
    let need = parts
        .iter()
        .try_fold(1usize, |acc, &x| acc.checked_mul(x))
        .ok_or_else(|| Error::Decode(format!("{what} size overflows")))?;
    if need != r.remaining() {
        return Err(Error::Decode(format!(
            "{what}: expected {need} bytes, found {}",
            r.remaining()
        )));
    }
    Ok(())
}

fn put_complex(out: &mut Vec<u8>, z: C64) {
    out.extend_from_slice(&z.re.to_le_bytes());
    out.extend_from_slice(&z.im.to_le_bytes());
}

pub fn encode_pilots(pilots: &PilotSet) -> Vec<u8> {
    let freq = pilots.freq_pilots();
    let (l, n) = freq.shape();
    let mut out = Vec::with_capacity(36 + 16 * l * n);
    out.extend_from_slice(PILOT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in [l, n, pilots.taps()] {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for i in 0..l {
        for j in 0..n {
            put_complex(&mut out, freq[(i, j)]);
        }
    }
    out
}

pub fn decode_pilots(bytes: &[u8]) -> Result<PilotSet> {
    let mut r = Reader::new(bytes);
    header(&mut r, PILOT_MAGIC)?;
    let l = r.dim("L")?;
    let n = r.dim("N")?;
    let p = r.dim("P")?;
    if l == 0 || l > MAX_SUBCARRIERS {
        return Err(Error::Decode(format!(
            "L={l} outside 1..={MAX_SUBCARRIERS}"
        )));
    }
    if n == 0 {
        return Err(Error::Decode("N must be positive".into()));
    }
    if p == 0 || p >= l {
        return Err(Error::Decode(format!("need 1 <= P < L, got P={p} L={l}")));
    }
    expect_payload(&r, &[l, n, 16], "pilot matrix")?;
    let mut vals = Vec::with_capacity(l * n);
    for _ in 0..l * n {
        vals.push(r.complex()?);
    }
    r.finish()?;
    let freq = CMatrix::from_row_slice(l, n, &vals);
    PilotSet::from_freq_pilots(freq, p)
}

pub fn encode_scene(scene: &Scene) -> Vec<u8> {
    let (n, m, p) = scene.channel.dims();
    let mut out = Vec::with_capacity(44 + n + 16 * n * m * p);
    out.extend_from_slice(SCENE_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in [n as u64, m as u64, p as u64, scene.seed] {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend(scene.activities.iter().map(|&a| a as u8));
    for &z in scene.channel.coeffs() {
        put_complex(&mut out, z);
    }
    out
}

pub fn decode_scene(bytes: &[u8]) -> Result<Scene> {
    let mut r = Reader::new(bytes);
    header(&mut r, SCENE_MAGIC)?;
    let n = r.dim("N")?;
    let m = r.dim("M")?;
    let p = r.dim("P")?;
    let seed = r.u64("seed")?;
    if n == 0 || m == 0 || p == 0 {
        return Err(Error::Decode(format!(
            "dimensions must be positive, got N={n} M={m} P={p}"
        )));
    }
    let payload = n
        .checked_mul(m)
        .and_then(|x| x.checked_mul(p))
        .and_then(|x| x.checked_mul(16))
        .and_then(|x| x.checked_add(n))
        .ok_or_else(|| Error::Decode("scene size overflows".into()))?;
    expect_payload(&r, &[payload], "scene")?;
    let activities = r
        .take(n, "activities")?
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Decode(format!("activity byte {other}"))),
        })
        .collect::<Result<Vec<bool>>>()?;
    let mut coeffs = Vec::with_capacity(n * m * p);
    for _ in 0..n * m * p {
        coeffs.push(r.complex()?);
    }
    r.finish()?;
    Ok(Scene {
        activities,
        channel: ChannelRealization::from_coeffs(n, m, p, coeffs)?,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::SystemConfig;

    fn cfg() -> SystemConfig {
        SystemConfig::new(6, 3, 8, 2, 0.1, 0.5).unwrap()
    }

    #[test]
    fn pilots_round_trip() {
        let p = PilotSet::generate(&cfg(), 4).unwrap();
        let bytes = encode_pilots(&p);
        assert_eq!(bytes.len(), 36 + 16 * 8 * 6);
        let q = decode_pilots(&bytes).unwrap();
        assert_eq!(p.freq_pilots(), q.freq_pilots());
        assert_eq!(p.stacked(), q.stacked());
    }

    #[test]
    fn scene_round_trip() {
        let s = Scene::generate(&cfg(), 9).unwrap();
        let bytes = encode_scene(&s);
        assert_eq!(decode_scene(&bytes).unwrap(), s);
    }

    #[test]
    fn rejects_malformed_input() {
        let p = encode_pilots(&PilotSet::generate(&cfg(), 1).unwrap());
        assert!(decode_pilots(&p[..p.len() - 1]).is_err());
        let mut extra = p.clone();
        extra.push(0);
        assert!(decode_pilots(&extra).is_err());
        let mut bad_magic = p.clone();
        bad_magic[0] = b'X';
        assert!(decode_pilots(&bad_magic).is_err());
        let mut bad_version = p.clone();
        bad_version[8] = 2;
        assert!(decode_pilots(&bad_version).is_err());
        let mut nan = p.clone();
        nan[36..44].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode_pilots(&nan).is_err());
        // P = L
        let mut p_eq_l = p.clone();
        p_eq_l[28..36].copy_from_slice(&8u64.to_le_bytes());
        assert!(decode_pilots(&p_eq_l).is_err());

        let s = encode_scene(&Scene::generate(&cfg(), 2).unwrap());
        let mut bad_flag = s.clone();
        bad_flag[44] = 7;
        assert!(decode_scene(&bad_flag).is_err());
        let mut huge = s.clone();
        huge[12..20].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(decode_scene(&huge).is_err());
        assert!(decode_scene(&p).is_err());
    }
}
