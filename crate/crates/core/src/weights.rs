//! Named-tensor weights and the `NTAR1` archive format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "NTAR1\n"
//! u32                      entry count
//! per entry:
//!   u16                    name length in bytes
//!   [u8; len]              UTF-8 name
//!   u8                     rank
//!   [u32; rank]            dims
//!   [f32; product(dims)]   data, row-major
//! ```
//!
//! The file must be consumed exactly. Entry order is preserved, so
//! reading then writing an archive reproduces it byte for byte.

use std::collections::HashMap;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 6] = b"NTAR1\n";

/// An ordered collection of uniquely named tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Weights {
    entries: Vec<(String, Tensor)>,
    index: HashMap<String, usize>,
}

impl Weights {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert or replace `name`.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        let name = name.into();
        match self.index.get(&name) {
            Some(&i) => self.entries[i].1 = tensor,
            None => {
                self.index.insert(name.clone(), self.entries.len());
                self.entries.push((name, tensor));
            }
        }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.index
            .get(name)
            .map(|&i| &self.entries[i].1)
            .ok_or_else(|| Error::MissingWeights(vec![name.to_string()]))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    /// Total number of scalars across all entries.
    pub fn param_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Check that every spec is present with the right shape; all missing
    /// names are reported together.
    pub fn check(&self, specs: &[ParamSpec]) -> Result<()> {
        let missing: Vec<String> = specs
            .iter()
            .filter(|s| !self.contains(&s.name))
            .map(|s| s.name.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingWeights(missing));
        }
        for s in specs {
            let t = self.get(&s.name)?;
            if t.shape() != s.shape.as_slice() {
                return Err(Error::Weights(format!(
                    "`{}` has shape {:?}, expected {:?}",
                    s.name,
                    t.shape(),
                    s.shape
                )));
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(16 + 4 * self.param_count());
        out.extend_from_slice(MAGIC);
        let count = u32::try_from(self.entries.len())
            .map_err(|_| Error::Weights("too many entries".into()))?;
        out.extend_from_slice(&count.to_le_bytes());
        for (name, t) in &self.entries {
            let len = u16::try_from(name.len())
                .map_err(|_| Error::Weights(format!("name too long: {name}")))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            let rank = u8::try_from(t.rank())
                .map_err(|_| Error::Weights(format!("rank too large for {name}")))?;
            out.push(rank);
            for &d in t.shape() {
                let d = u32::try_from(d)
                    .map_err(|_| Error::Weights(format!("dimension too large in {name}")))?;
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::Weights("bad magic, not an NTAR1 archive".into()));
        }
        let count = r.u32()?;
        let mut w = Weights::new();
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Weights("entry name is not UTF-8".into()))?
                .to_string();
            let rank = r.u8()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .and_then(|n| n.checked_mul(4))
                .ok_or_else(|| Error::Weights(format!("`{name}` is too large")))?;
            let data = r
                .take(n)?
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            if w.contains(&name) {
                return Err(Error::Weights(format!("duplicate entry `{name}`")));
            }
            w.insert(name, Tensor::new(shape, data)?);
        }
        if r.pos != bytes.len() {
            return Err(Error::Weights(format!(
                "{} trailing bytes after last entry",
                bytes.len() - r.pos
            )));
        }
        Ok(w)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_bytes(&bytes).map_err(|e| e.in_file(path))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::from(e).in_file(path))
    }
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
            .ok_or_else(|| Error::Weights(format!("truncated archive at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// How a parameter is filled when weights are generated from a seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Zeros,
    Ones,
    /// Uniform on `[-bound, bound)`.
    Uniform(f32),
}

/// Name, shape and seeded initializer of one model parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: &[usize], init: Init) -> Self {
        ParamSpec {
            name: name.into(),
            shape: shape.to_vec(),
            init,
        }
    }

    /// Uniform `±1/√fan_in`.
    pub fn fan_in(name: impl Into<String>, shape: &[usize], fan_in: usize) -> Self {
        Self::new(name, shape, Init::Uniform(1.0 / (fan_in as f32).sqrt()))
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Deterministic weights for `specs`.
///
/// Specs are visited in name order; each uniform draw takes the top 24 bits
/// of one `next_u32()` of a ChaCha8 stream seeded with `seed`, so archives
/// are identical across platforms.
pub fn seeded_weights(specs: &[ParamSpec], seed: u64) -> Weights {
    let mut order: Vec<&ParamSpec> = specs.iter().collect();
    order.sort_by(|a, b| a.name.cmp(&b.name));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Weights::new();
    for s in order {
        let t = match s.init {
            Init::Zeros => Tensor::zeros(&s.shape),
            Init::Ones => Tensor::full(&s.shape, 1.0),
            Init::Uniform(bound) => Tensor::from_fn(&s.shape, |_| {
                let unit = (rng.next_u32() >> 8) as f32 * (1.0 / (1u32 << 24) as f32);
                (2.0 * unit - 1.0) * bound
            }),
        };
        w.insert(s.name.clone(), t);
    }
    w
}

/// Weights with every tensor set to zero, except layer-norm scales (`Ones`).
pub fn zero_weights(specs: &[ParamSpec]) -> Weights {
    let mut w = Weights::new();
    for s in specs {
        let t = match s.init {
            Init::Ones => Tensor::full(&s.shape, 1.0),
            _ => Tensor::zeros(&s.shape),
        };
        w.insert(s.name.clone(), t);
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Weights {
        let mut w = Weights::new();
        w.insert("b.weight", Tensor::from_fn(&[2, 3], |i| i as f32 - 2.5));
        w.insert("a.bias", Tensor::new(vec![1], vec![f32::MIN_POSITIVE]).unwrap());
        w.insert("scalar", Tensor::new(vec![], vec![7.0]).unwrap());
        w
    }

    #[test]
    fn archive_round_trip_is_byte_identical() {
        let bytes = sample().to_bytes().unwrap();
        let back = Weights::from_bytes(&bytes).unwrap();
        assert_eq!(back, sample());
        assert_eq!(back.to_bytes().unwrap(), bytes);
        let names: Vec<&str> = back.iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["b.weight", "a.bias", "scalar"]);
    }

    #[test]
    fn layout_of_one_entry() {
        let mut w = Weights::new();
        w.insert("x", Tensor::new(vec![1], vec![1.0]).unwrap());
        let b = w.to_bytes().unwrap();
        let expect: Vec<u8> = [
            &b"NTAR1\n"[..],
            &[1, 0, 0, 0],
            &[1, 0],
            b"x",
            &[1],
            &[1, 0, 0, 0],
            &1.0f32.to_le_bytes(),
        ]
        .concat();
        assert_eq!(b, expect);
    }

    #[test]
    fn corrupt_archives_rejected() {
        let mut bytes = sample().to_bytes().unwrap();
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(Weights::from_bytes(&bad_magic), Err(Error::Weights(_))));
        bytes.push(0);
        assert!(Weights::from_bytes(&bytes).is_err());
        bytes.truncate(bytes.len() - 5);
        assert!(Weights::from_bytes(&bytes).is_err());
    }

    #[test]
    fn check_lists_every_missing_name() {
        let specs = [
            ParamSpec::new("a.bias", &[1], Init::Zeros),
            ParamSpec::new("c", &[2], Init::Zeros),
            ParamSpec::new("d", &[2], Init::Zeros),
        ];
        match sample().check(&specs) {
            Err(Error::MissingWeights(names)) => assert_eq!(names, ["c", "d"]),
            other => panic!("unexpected {other:?}"),
        }
        let wrong = [ParamSpec::new("b.weight", &[3, 2], Init::Zeros)];
        assert!(matches!(sample().check(&wrong), Err(Error::Weights(_))));
    }

    #[test]
    fn seeded_generation_is_deterministic_and_bounded() {
        let specs = [
            ParamSpec::new("w", &[64, 8], Init::Uniform(0.5)),
            ParamSpec::new("g", &[8], Init::Ones),
            ParamSpec::new("b", &[8], Init::Zeros),
        ];
        let a = seeded_weights(&specs, 7);
        assert_eq!(a, seeded_weights(&specs, 7));
        assert_ne!(a, seeded_weights(&specs, 8));
        assert!(a.get("w").unwrap().data().iter().all(|v| (-0.5..0.5).contains(v)));
        assert!(a.get("g").unwrap().data().iter().all(|&v| v == 1.0));
        assert_eq!(a.param_count(), 64 * 8 + 16);
    }
}
