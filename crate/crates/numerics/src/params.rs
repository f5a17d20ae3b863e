use std::rc::Rc;

use rand::Rng;

use crate::error::{NumericsError, Result};
use crate::tape::{Gradients, Tape, Var};
use crate::tensor::Tensor2;

/// Index of a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(pub usize);

/// Named trainable matrices, in registration order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Rc<Tensor2>>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor2) -> ParamId {
        self.names.push(name.into());
        self.values.push(Rc::new(value));
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor2 {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor2 {
        Rc::make_mut(&mut self.values[id.0])
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor2)> {
        self.names.iter().map(String::as_str).zip(self.values.iter().map(|v| v.as_ref()))
    }

    pub fn values_mut(&mut self) -> Vec<&mut Tensor2> {
        self.values.iter_mut().map(Rc::make_mut).collect()
    }

    /// FNV-1a hash over names, shapes and value bits.
    pub fn fingerprint(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
            }
        };
        for (name, t) in self.iter() {
            eat(name.as_bytes());
            eat(&(t.rows() as u64).to_le_bytes());
            eat(&(t.cols() as u64).to_le_bytes());
            for v in t.as_slice() {
                eat(&v.to_bits().to_le_bytes());
            }
        }
        h
    }

    /// Records every parameter on `tape` as a differentiable leaf.
    pub fn bind<'t>(&self, tape: &'t Tape) -> Bound<'t> {
        Bound { vars: self.values.iter().map(|v| tape.param_rc(Rc::clone(v))).collect() }
    }

    /// Records every parameter as a constant (frozen weights).
    pub fn bind_frozen<'t>(&self, tape: &'t Tape) -> Bound<'t> {
        Bound { vars: self.values.iter().map(|v| tape.constant_rc(Rc::clone(v))).collect() }
    }

    /// Replaces values from `(name, tensor)` pairs; every parameter must be
    /// present with its current shape.
    pub fn load_named<'a>(&mut self, entries: impl IntoIterator<Item = (&'a str, &'a Tensor2)>) -> Result<()> {
        let mut seen = vec![false; self.len()];
        for (name, t) in entries {
            let Some(id) = self.find(name) else { continue };
            if self.get(id).shape() != t.shape() {
                return Err(NumericsError::Checkpoint(format!(
                    "parameter {name}: stored shape {:?} but model expects {:?}",
                    t.shape(),
                    self.get(id).shape()
                )));
            }
            *self.get_mut(id) = t.clone();
            seen[id.0] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(NumericsError::Checkpoint(format!("missing parameter {}", self.names[missing])));
        }
        Ok(())
    }
}

/// A [`ParamStore`] recorded on one tape.
pub struct Bound<'t> {
    vars: Vec<Var<'t>>,
}

impl<'t> Bound<'t> {
    /// Binds already-recorded variables, one per parameter in store order.
    pub fn from_vars(vars: Vec<Var<'t>>) -> Self {
        Self { vars }
    }

    pub fn var(&self, id: ParamId) -> Var<'t> {
        self.vars[id.0]
    }

    /// Gradients for every parameter in store order (zeros when unreached).
    pub fn grads(&self, g: &Gradients) -> Vec<Tensor2> {
        self.vars.iter().map(|v| g.wrt(v)).collect()
    }
}

/// Glorot/Xavier uniform initialisation.
pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor2 {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Tensor2::from_fn(rows, cols, |_, _| rng.random_range(-limit..=limit))
}

/// Adds `src` into `acc` elementwise, pairing by position.
pub fn accumulate(acc: &mut [Tensor2], src: &[Tensor2]) -> Result<()> {
    for (a, s) in acc.iter_mut().zip(src) {
        a.add_assign(s)?;
    }
    Ok(())
}
