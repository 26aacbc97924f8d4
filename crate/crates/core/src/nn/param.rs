use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::rng::{symmetric_f32, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f32>,
    pub grad: Vec<f32>,
}

impl Param {
    pub fn numel(&self) -> usize {
        self.value.len()
    }
}

/// Flat, ordered owner of every trainable tensor of one network.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: String, shape: Vec<usize>, value: Vec<f32>) -> ParamId {
        let n: usize = shape.iter().product();
        assert_eq!(n, value.len(), "parameter {name} shape/value mismatch");
        debug_assert!(self.params.iter().all(|p| p.name != name));
        self.params.push(Param {
            name,
            shape,
            grad: vec![0.0; n],
            value,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn add_uniform(
        &mut self,
        name: String,
        shape: Vec<usize>,
        bound: f32,
        rng: &mut Rng,
    ) -> ParamId {
        let n = shape.iter().product();
        let value = (0..n).map(|_| symmetric_f32(rng, bound)).collect();
        self.add(name, shape, value)
    }

    pub fn add_constant(&mut self, name: String, shape: Vec<usize>, v: f32) -> ParamId {
        let n = shape.iter().product();
        self.add(name, shape, vec![v; n])
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &[f32] {
        &self.params[id.0].value
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut [f32] {
        &mut self.params[id.0].grad
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn num_values(&self) -> usize {
        self.params.iter().map(Param::numel).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }
}
