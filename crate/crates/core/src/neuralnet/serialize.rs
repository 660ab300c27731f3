//! Binary checkpoint format for a [`ParamSet`].
//!
//! Layout (little-endian): magic `V2XP`, format version `u32`, head tag `u8`
//! (0 linear, 1 sigmoid-scaled) followed by the head scale `f64`, layer
//! count `u32`, each layer size `u32`, then every parameter as `f64` in
//! [`ParamSet::to_flat`] order.

use super::params::{Head, ParamSet};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"V2XP";
pub const FORMAT_VERSION: u32 = 1;

pub fn to_bytes(p: &ParamSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 4 * p.sizes.len() + 8 * p.num_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let (tag, scale) = match p.head {
        Head::Linear => (0u8, 0.0),
        Head::SigmoidScaled(s) => (1u8, s),
    };
    out.push(tag);
    out.extend_from_slice(&scale.to_le_bytes());
    out.extend_from_slice(&(p.sizes.len() as u32).to_le_bytes());
    for &s in &p.sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    for v in p.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let s = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<ParamSet> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let tag = r.take(1)?[0];
    let scale = r.f64()?;
    let head = match tag {
        0 => Head::Linear,
        1 => Head::SigmoidScaled(scale),
        t => return Err(Error::Checkpoint(format!("unknown head tag {t}"))),
    };
    let n = r.u32()? as usize;
    if !(2..=64).contains(&n) {
        return Err(Error::Checkpoint(format!("implausible layer count {n}")));
    }
    let sizes = (0..n).map(|_| r.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
    if sizes.contains(&0) {
        return Err(Error::Checkpoint("zero-width layer".into()));
    }
    let template = ParamSet::zeros(&sizes, head);
    let flat = (0..template.num_params()).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    if r.pos != buf.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    template.with_flat(&flat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip(sizes in proptest::collection::vec(1usize..6, 2..5), seed in any::<u64>(), sig in any::<bool>()) {
            let head = if sig { Head::SigmoidScaled(0.2) } else { Head::Linear };
            let p = ParamSet::init(&sizes, head, seed);
            let q = from_bytes(&to_bytes(&p)).unwrap();
            prop_assert_eq!(p.checksum(), q.checksum());
            prop_assert_eq!(p, q);
        }
    }

    #[test]
    fn rejects_corruption() {
        let p = ParamSet::init(&[2, 3, 1], Head::Linear, 0);
        let bytes = to_bytes(&p);
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(from_bytes(&extra).is_err());
    }
}
