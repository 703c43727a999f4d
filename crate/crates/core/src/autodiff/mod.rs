//! Reverse-mode automatic differentiation over a linear tape.
//!
//! A [`Tape`] records one forward computation; [`Tape::backward`] replays it
//! in reverse, accumulating gradients per node. Parameters are registered
//! through a [`ParamStore`] so a finished backward pass can be mapped straight
//! into an optimizer update. Forward-only graphs (sampling, evaluation) use
//! [`Tape::no_grad`], which skips closure allocation entirely.

mod conv;
mod elementwise;
mod linear;
mod norm;
mod seq;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Handle to a value on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ValueId(pub(crate) usize);

/// Handle to a named parameter in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

/// Named parameter tensors, in insertion order. Insertion order is the
/// serialization order, so checkpoints are deterministic.
#[derive(Debug, Clone)]
pub struct ParamStore<T: Scalar> {
    names: Vec<String>,
    values: Vec<Tensor<T>>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        let name = name.into();
        assert!(
            !self.names.contains(&name),
            "duplicate parameter name {name}"
        );
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<T>)> {
        self.names
            .iter()
            .zip(self.values.iter())
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    pub fn to_f32(&self) -> ParamStore<f32> {
        ParamStore {
            names: self.names.clone(),
            values: self.values.iter().map(|v| v.to_f32()).collect(),
        }
    }
}

/// Backward rule: given the upstream gradient, the parent values, and the
/// node's own output, produce one gradient tensor per parent.
type BackwardFn<T> =
    Box<dyn Fn(&Tensor<T>, &[&Tensor<T>], &Tensor<T>) -> Vec<Tensor<T>> + Send + Sync>;

struct Node<T: Scalar> {
    value: Tensor<T>,
    parents: Vec<ValueId>,
    backward: Option<BackwardFn<T>>,
    needs_grad: bool,
}

pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
    param_nodes: Vec<(ParamId, ValueId)>,
    grad_enabled: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            param_nodes: Vec::new(),
            grad_enabled: true,
        }
    }

    /// Forward-only tape: values are recorded, backward rules are not.
    pub fn no_grad() -> Self {
        Tape {
            nodes: Vec::new(),
            param_nodes: Vec::new(),
            grad_enabled: false,
        }
    }

    pub fn value(&self, id: ValueId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, node: Node<T>) -> ValueId {
        self.nodes.push(node);
        ValueId(self.nodes.len() - 1)
    }

    /// Untracked leaf; never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> ValueId {
        self.push(Node {
            value,
            parents: Vec::new(),
            backward: None,
            needs_grad: false,
        })
    }

    /// Tracked leaf that is not tied to a parameter (used by gradient checks
    /// and tests that differentiate with respect to an input).
    pub fn leaf(&mut self, value: Tensor<T>) -> ValueId {
        let track = self.grad_enabled;
        self.push(Node {
            value,
            parents: Vec::new(),
            backward: None,
            needs_grad: track,
        })
    }

    /// Tracked leaf for a parameter. Repeated loads of the same parameter on
    /// one tape return the same node, so shared weights accumulate gradients.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> ValueId {
        if let Some(&(_, vid)) = self.param_nodes.iter().find(|(pid, _)| *pid == id) {
            return vid;
        }
        let track = self.grad_enabled;
        let vid = self.push(Node {
            value: store.get(id).clone(),
            parents: Vec::new(),
            backward: None,
            needs_grad: track,
        });
        self.param_nodes.push((id, vid));
        vid
    }

    /// Load a parameter as a frozen constant (no gradient ever flows to it).
    pub fn frozen_param(&mut self, store: &ParamStore<T>, id: ParamId) -> ValueId {
        self.constant(store.get(id).clone())
    }

    /// Cut the graph: same value, no history.
    pub fn detach(&mut self, id: ValueId) -> ValueId {
        let v = self.nodes[id.0].value.clone();
        self.constant(v)
    }

    pub(crate) fn push_op(
        &mut self,
        value: Tensor<T>,
        parents: Vec<ValueId>,
        backward: impl Fn(&Tensor<T>, &[&Tensor<T>], &Tensor<T>) -> Vec<Tensor<T>>
            + Send
            + Sync
            + 'static,
    ) -> ValueId {
        if !self.grad_enabled {
            return self.push(Node {
                value,
                parents: Vec::new(),
                backward: None,
                needs_grad: false,
            });
        }
        let needs_grad = parents.iter().any(|p| self.nodes[p.0].needs_grad);
        let backward: Option<BackwardFn<T>> = if needs_grad {
            Some(Box::new(backward))
        } else {
            None
        };
        self.push(Node {
            value,
            parents,
            backward,
            needs_grad,
        })
    }

    /// Reverse pass from a scalar loss. Returns per-node gradients.
    pub fn backward(&self, loss: ValueId) -> Result<Grads<T>> {
        let loss_node = &self.nodes[loss.0];
        if loss_node.value.numel() != 1 {
            return Err(Error::contract(format!(
                "backward from non-scalar value of shape {:?}",
                loss_node.value.shape()
            )));
        }
        if !loss_node.value.all_finite() {
            return Err(Error::numeric("backward from non-finite loss".into()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(T::ONE));
        for i in (0..self.nodes.len()).rev() {
            let node = &self.nodes[i];
            let Some(backward) = node.backward.as_ref() else {
                continue;
            };
            let Some(grad_out) = grads[i].take() else {
                continue;
            };
            let parent_values: Vec<&Tensor<T>> = node
                .parents
                .iter()
                .map(|p| &self.nodes[p.0].value)
                .collect();
            let parent_grads = backward(&grad_out, &parent_values, &node.value);
            debug_assert_eq!(parent_grads.len(), node.parents.len());
            for (pid, g) in node.parents.iter().zip(parent_grads) {
                if !self.nodes[pid.0].needs_grad {
                    continue;
                }
                debug_assert_eq!(
                    g.shape(),
                    self.nodes[pid.0].value.shape(),
                    "gradient shape mismatch into node {}",
                    pid.0
                );
                match &mut grads[pid.0] {
                    Some(acc) => {
                        for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                            *a += *b;
                        }
                    }
                    slot => *slot = Some(g),
                }
            }
            grads[i] = Some(grad_out);
        }
        Ok(Grads {
            by_node: grads,
            param_nodes: self.param_nodes.clone(),
        })
    }
}

/// Gradients produced by one backward pass.
pub struct Grads<T: Scalar> {
    by_node: Vec<Option<Tensor<T>>>,
    param_nodes: Vec<(ParamId, ValueId)>,
}

impl<T: Scalar> Grads<T> {
    /// Gradient of the loss with respect to an arbitrary tape node, if that
    /// node was reached by the reverse sweep.
    pub fn of(&self, id: ValueId) -> Option<&Tensor<T>> {
        self.by_node[id.0].as_ref()
    }

    /// Gradients keyed by parameter, for parameters that received one.
    pub fn params(&self) -> Vec<(ParamId, &Tensor<T>)> {
        self.param_nodes
            .iter()
            .filter_map(|&(pid, vid)| self.by_node[vid.0].as_ref().map(|g| (pid, g)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_mul_chain_gradients() {
        // L = sum((a + b) * a): dL/da = (a + b) + a, dL/db = a
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Tensor::from_vec(vec![2], vec![2.0, 3.0]));
        let b = tape.leaf(Tensor::from_vec(vec![2], vec![5.0, 7.0]));
        let s = tape.add(a, b);
        let p = tape.mul(s, a);
        let loss = tape.sum(p);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.of(a).unwrap().data(), &[9.0, 13.0]);
        assert_eq!(grads.of(b).unwrap().data(), &[2.0, 3.0]);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Tensor::from_vec(vec![2], vec![1.0, 2.0]));
        let c = tape.constant(Tensor::from_vec(vec![2], vec![3.0, 4.0]));
        let p = tape.mul(a, c);
        let loss = tape.sum(p);
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.of(a).unwrap().data(), &[3.0, 4.0]);
        assert!(grads.of(c).is_none());
    }

    #[test]
    fn param_nodes_deduplicate() {
        let mut store = ParamStore::<f64>::new();
        let w = store.add("w", Tensor::from_vec(vec![1], vec![3.0]));
        let mut tape = Tape::new();
        let w1 = tape.param(&store, w);
        let w2 = tape.param(&store, w);
        assert_eq!(w1, w2);
        // L = w * w => dL/dw = 2w
        let p = tape.mul(w1, w2);
        let loss = tape.sum(p);
        let grads = tape.backward(loss).unwrap();
        let pg = grads.params();
        assert_eq!(pg.len(), 1);
        assert_eq!(pg[0].1.data(), &[6.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut tape = Tape::<f64>::new();
        let a = tape.leaf(Tensor::from_vec(vec![2], vec![1.0, 2.0]));
        assert!(tape.backward(a).is_err());
    }
}
