//! Named parameter tensors, gradient buffers and the checkpoint format.

use std::collections::HashMap;
use std::io::{Read, Write};

use crc::{Crc, CRC_64_XZ};
use ndarray::Array2;
use rand::Rng;

use super::NnError;

const MAGIC: &[u8; 4] = b"SGGM";
pub const CHECKPOINT_VERSION: u32 = 1;
const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

/// Index of a parameter inside its [`ParameterStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Ordered map from parameter path to tensor. Every tensor is held as a
/// matrix; `shape` keeps the logical rank (biases are rank 1, stored 1×d).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore {
    names: Vec<String>,
    shapes: Vec<Vec<usize>>,
    values: Vec<Array2<f64>>,
    index: HashMap<String, ParamId>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Registers a tensor of the given logical shape (rank 1 or 2).
    pub fn add(
        &mut self,
        name: &str,
        shape: &[usize],
        value: Array2<f64>,
    ) -> Result<ParamId, NnError> {
        if self.index.contains_key(name) {
            return Err(NnError::DuplicateParameter(name.to_string()));
        }
        let expected = matrix_dims(shape)?;
        if value.dim() != expected {
            return Err(NnError::Shape(format!(
                "{name}: value {:?} does not match shape {shape:?}",
                value.dim()
            )));
        }
        let id = ParamId(self.values.len());
        self.names.push(name.to_string());
        self.shapes.push(shape.to_vec());
        self.values.push(value);
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    /// Weight matrix (`fan_in`×`fan_out`) drawn from U(−1/√fan_in, 1/√fan_in).
    pub fn add_uniform<R: Rng>(
        &mut self,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Result<ParamId, NnError> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let value =
            Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..=bound));
        self.add(name, &[fan_in, fan_out], value)
    }

    /// Zero bias vector of length `dim`.
    pub fn add_zeros(&mut self, name: &str, dim: usize) -> Result<ParamId, NnError> {
        self.add(name, &[dim], Array2::zeros((1, dim)))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn shape(&self, id: ParamId) -> &[usize] {
        &self.shapes[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Array2<f64> {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.values[id.0]
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.id(name).map(|id| self.value(id))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    /// Serializes to the checkpoint byte layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.num_scalars() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        for i in 0..self.len() {
            let name = self.names[i].as_bytes();
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name);
            out.extend_from_slice(&(self.shapes[i].len() as u32).to_le_bytes());
            for &d in &self.shapes[i] {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in self.values[i].iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let crc = CRC64.checksum(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Parses checkpoint bytes, verifying magic, version and CRC.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        if bytes.len() < 20 {
            return Err(NnError::Checkpoint("file too short".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
        if CRC64.checksum(body) != stored {
            return Err(NnError::Checkpoint("CRC mismatch".into()));
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(NnError::Checkpoint("bad magic".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported version {version}"
            )));
        }
        let count = r.u32()? as usize;
        let mut store = ParameterStore::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| NnError::Checkpoint("parameter name is not UTF-8".into()))?
                .to_string();
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let (rows, cols) = matrix_dims(&shape)?;
            let data = (0..rows * cols)
                .map(|_| r.f64())
                .collect::<Result<Vec<_>, _>>()?;
            let value = Array2::from_shape_vec((rows, cols), data).expect("sized above");
            store.add(&name, &shape, value)?;
        }
        if r.pos != body.len() {
            return Err(NnError::Checkpoint("trailing bytes before CRC".into()));
        }
        Ok(store)
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<(), NnError> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self, NnError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

fn matrix_dims(shape: &[usize]) -> Result<(usize, usize), NnError> {
    match *shape {
        [d] => Ok((1, d)),
        [r, c] => Ok((r, c)),
        _ => Err(NnError::Shape(format!("unsupported rank {}", shape.len()))),
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| NnError::Checkpoint("truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

/// Gradient accumulator aligned with a store.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    grads: Vec<Array2<f64>>,
}

impl Gradients {
    pub fn zeros_like(store: &ParameterStore) -> Self {
        Self {
            grads: store
                .values
                .iter()
                .map(|v| Array2::zeros(v.dim()))
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.grads[id.0]
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, g: &Array2<f64>) {
        self.grads[id.0] += g;
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.grads {
            *g *= s;
        }
    }

    pub fn zero(&mut self) {
        for g in &mut self.grads {
            g.fill(0.0);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Array2<f64>)> {
        self.grads.iter().enumerate().map(|(i, g)| (ParamId(i), g))
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().all(|g| g.iter().all(|x| x.is_finite()))
    }
}
