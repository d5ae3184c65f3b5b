//! Ordered, named parameter collections and their canonical byte layout.
//!
//! Wire layout (all integers little-endian):
//!
//! ```text
//! magic "AESC" | version u16 | entry count u32
//! per entry: name len u16 | UTF-8 name | rank u8 | extents u32[rank] | f32 LE payload
//! ```
//!
//! The layout is positional and dense, so flipping one payload byte changes
//! exactly one scalar of the decoded set.

use crate::nn::NnError;
use crate::tensor::{Scalar, Tensor};

pub const PARAM_FILE_MAGIC: [u8; 4] = *b"AESC";
const PARAM_FORMAT_VERSION: u16 = 1;

/// Ordered list of named parameter tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet<T: Scalar = f32> {
    entries: Vec<(String, Tensor<T>)>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self { entries: Vec::new() }
    }

    /// Appends an entry; names must be unique.
    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor<T>) {
        let name = name.into();
        assert!(
            self.entries.iter().all(|(n, _)| n != &name),
            "duplicate parameter name '{name}'"
        );
        self.entries.push((name, tensor));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn entry(&self, index: usize) -> (&str, &Tensor<T>) {
        let (n, t) = &self.entries[index];
        (n.as_str(), t)
    }

    pub fn entry_mut(&mut self, index: usize) -> &mut Tensor<T> {
        &mut self.entries[index].1
    }

    /// Total number of scalar values across all entries.
    pub fn total_scalars(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Concatenates every entry into one flat tensor, in entry order.
    /// Panics on an empty set.
    pub fn concat_values(&self) -> Tensor<T> {
        assert!(!self.is_empty(), "concat_values on empty parameter set");
        let mut data = Vec::with_capacity(self.total_scalars());
        for (_, t) in &self.entries {
            data.extend_from_slice(t.data());
        }
        let n = data.len();
        Tensor::new(vec![n], data)
    }

    /// Rebuilds a set with this set's names/shapes from a flat value buffer.
    pub fn from_flat_values(&self, values: &[T]) -> Result<Self, NnError> {
        if values.len() != self.total_scalars() {
            return Err(NnError::ParamArchMismatch(format!(
                "expected {} scalars, got {}",
                self.total_scalars(),
                values.len()
            )));
        }
        let mut out = ParamSet::new();
        let mut offset = 0;
        for (name, t) in &self.entries {
            let n = t.len();
            out.push(
                name.clone(),
                Tensor::new(t.shape().to_vec(), values[offset..offset + n].to_vec()),
            );
            offset += n;
        }
        Ok(out)
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.all_finite())
    }

    /// First entry containing a non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.entries
            .iter()
            .find(|(_, t)| !t.all_finite())
            .map(|(n, _)| n.as_str())
    }

    /// Same names and shapes, all values zero.
    pub fn zeros_like(&self) -> Self {
        let mut out = ParamSet::new();
        for (name, t) in &self.entries {
            out.push(name.clone(), Tensor::zeros(t.shape().to_vec()));
        }
        out
    }

    /// Elementwise accumulate, entries must align by position and shape.
    pub fn add_assign(&mut self, rhs: &Self) {
        assert_eq!(self.len(), rhs.len(), "param set size mismatch");
        for (i, (_, t)) in rhs.entries.iter().enumerate() {
            self.entries[i].1.add_assign(t);
        }
    }

    pub fn scale(&mut self, factor: T) {
        for (_, t) in &mut self.entries {
            t.scale(factor);
        }
    }

    /// Converts every entry's element type (used by f64 gradient checks).
    pub fn cast<U: crate::tensor::Scalar>(&self) -> ParamSet<U> {
        let mut out = ParamSet::new();
        for (name, t) in &self.entries {
            out.push(name.clone(), t.cast());
        }
        out
    }
}

fn put_u16(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

/// Canonical byte encoding of a parameter set.
pub fn serialize_params(params: &ParamSet<f32>) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(&PARAM_FILE_MAGIC);
    put_u16(&mut buf, PARAM_FORMAT_VERSION);
    put_u32(&mut buf, params.len() as u32);
    for (name, tensor) in params.iter() {
        put_u16(&mut buf, name.len() as u16);
        buf.extend_from_slice(name.as_bytes());
        buf.push(tensor.rank() as u8);
        for &e in tensor.shape() {
            put_u32(&mut buf, e as u32);
        }
        for &v in tensor.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.buf.len() {
            return Err(NnError::MalformedParams(format!(
                "truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, NnError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8, NnError> {
        Ok(self.take(1)?[0])
    }
}

/// Decodes a parameter set, validating names and shapes against `arch`,
/// the parameter set layout the architecture prescribes.
pub fn deserialize_params(bytes: &[u8], arch: &ParamSet<f32>) -> Result<ParamSet<f32>, NnError> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(4)? != PARAM_FILE_MAGIC {
        return Err(NnError::MalformedParams("bad magic".to_string()));
    }
    let version = r.u16()?;
    if version != PARAM_FORMAT_VERSION {
        return Err(NnError::MalformedParams(format!("unknown version {version}")));
    }
    let count = r.u32()? as usize;
    if count != arch.len() {
        return Err(NnError::ParamArchMismatch(format!(
            "architecture has {} entries, payload has {count}",
            arch.len()
        )));
    }
    let mut out = ParamSet::new();
    for i in 0..count {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| NnError::MalformedParams(format!("entry {i}: name not UTF-8")))?
            .to_string();
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let (expect_name, expect_tensor) = arch.entry(i);
        if name != expect_name || shape != expect_tensor.shape() {
            return Err(NnError::ParamArchMismatch(format!(
                "entry {i}: got '{name}' {shape:?}, architecture wants '{expect_name}' {:?}",
                expect_tensor.shape()
            )));
        }
        let n: usize = shape.iter().product();
        let raw = r.take(4 * n)?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push(name, Tensor::new(shape, data));
    }
    if r.pos != bytes.len() {
        return Err(NnError::MalformedParams(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(out)
}
