//! Named, ordered parameter collections.

use std::collections::HashMap;

use crate::autograd::{Gradients, Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    /// Buffers such as batchnorm running statistics are stored alongside the
    /// weights but never touched by an optimizer.
    pub trainable: bool,
}

/// Ordered collection of named tensors. Order is insertion order and is
/// stable across save/load.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor, trainable: bool) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::contract(format!("duplicate parameter name `{name}`")));
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push(Param { name, value, trainable });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.entries.iter()
    }

    pub fn entries(&self) -> &[Param] {
        &self.entries
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.position(name).map(|i| &self.entries[i].value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.position(name).map(move |i| &mut self.entries[i].value)
    }

    pub(crate) fn value_at_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.entries[index].value
    }

    /// Replaces a tensor, keeping its shape.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let slot = self
            .get_mut(name)
            .ok_or_else(|| Error::contract(format!("unknown parameter `{name}`")))?;
        if slot.shape() != value.shape() {
            return Err(Error::dim(format!(
                "parameter `{name}` has shape {:?}, got {:?}",
                slot.shape(),
                value.shape()
            )));
        }
        *slot = value;
        Ok(())
    }

    /// Total number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.entries.iter().filter(|p| p.trainable).map(|p| p.value.numel()).sum()
    }

    /// Records every entry on `tape`. Trainable entries become gradient leaves
    /// when `trainable` is set; everything else is a constant.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Result<Binding> {
        let vars = self
            .entries
            .iter()
            .map(|p| tape.leaf(p.value.clone(), trainable && p.trainable))
            .collect::<Result<Vec<_>>>()?;
        Ok(Binding { vars, index: self.index.clone() })
    }
}

/// The tape handles of one [`ParamSet`], aligned with its entries.
#[derive(Debug, Clone)]
pub struct Binding {
    vars: Vec<Var>,
    index: HashMap<String, usize>,
}

impl Binding {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.index
            .get(name)
            .map(|&i| self.vars[i])
            .ok_or_else(|| Error::contract(format!("parameter `{name}` is not bound")))
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// Gradients aligned with the parameter entries; `None` for entries that
    /// were bound as constants.
    pub fn collect(&self, grads: &Gradients) -> Vec<Option<Tensor>> {
        self.vars.iter().map(|v| grads.get(*v).cloned()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_names() {
        let mut ps = ParamSet::new();
        ps.insert("w", Tensor::zeros(&[2]), true).unwrap();
        assert!(ps.insert("w", Tensor::zeros(&[2]), true).is_err());
    }

    #[test]
    fn set_checks_shape() {
        let mut ps = ParamSet::new();
        ps.insert("w", Tensor::zeros(&[2]), true).unwrap();
        assert!(ps.set("w", Tensor::zeros(&[3])).is_err());
        ps.set("w", Tensor::ones(&[2])).unwrap();
        assert_eq!(ps.get("w").unwrap().sum(), 2.0);
    }

    #[test]
    fn binding_respects_trainable_flag() {
        let mut ps = ParamSet::new();
        ps.insert("w", Tensor::ones(&[2]), true).unwrap();
        ps.insert("stat", Tensor::ones(&[2]), false).unwrap();
        let mut tape = Tape::new();
        let b = ps.bind(&mut tape, true).unwrap();
        assert!(tape.requires_grad(b.var("w").unwrap()));
        assert!(!tape.requires_grad(b.var("stat").unwrap()));
        let frozen = ps.bind(&mut tape, false).unwrap();
        assert!(!tape.requires_grad(frozen.var("w").unwrap()));
    }
}
