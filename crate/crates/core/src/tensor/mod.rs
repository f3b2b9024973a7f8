//! Dense row-major tensors with a dynamically built reverse-mode graph.
//!
//! Every operation that has at least one input requiring a gradient records a
//! backward closure together with handles to its parents. Calling
//! [`Tensor::backward`] on a scalar walks the graph once in reverse
//! topological order and accumulates gradients into the leaves that were
//! created with `requires_grad`. Intermediate gradients are discarded; the
//! graph itself is released when the last handle to the output is dropped.

mod ops;
mod nn;
mod param;

pub(crate) mod kernels;

pub use nn::LAYER_NORM_EPS;
pub use param::Parameter;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard, RwLockWriteGuard};

use crate::error::{Error, Result};

static NEXT_ID: AtomicUsize = AtomicUsize::new(0);

pub(crate) type BackwardFn = Box<dyn Fn(&[f64]) -> Vec<Option<Vec<f64>>> + Send + Sync>;

struct GradFn {
    op: &'static str,
    parents: Vec<Tensor>,
    backward: BackwardFn,
}

struct Node {
    id: usize,
    shape: Vec<usize>,
    data: RwLock<Vec<f64>>,
    grad: Mutex<Option<Vec<f64>>>,
    requires_grad: bool,
    grad_fn: Option<GradFn>,
}

/// Handle to a node of the computation graph. Cloning is cheap and shares storage.
#[derive(Clone)]
pub struct Tensor(Arc<Node>);

pub fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

impl Tensor {
    fn build(shape: Vec<usize>, data: Vec<f64>, requires_grad: bool, grad_fn: Option<GradFn>) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Tensor(Arc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data: RwLock::new(data),
            grad: Mutex::new(None),
            requires_grad,
            grad_fn,
        }))
    }

    /// Constant tensor. Fails when `data.len()` differs from the product of `shape`.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if numel(shape) != data.len() {
            return Err(Error::shape(
                "new",
                format!("shape {:?} holds {} values, got {}", shape, numel(shape), data.len()),
            ));
        }
        Ok(Self::build(shape.to_vec(), data, false, None))
    }

    /// Trainable leaf.
    pub fn leaf(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let t = Self::new(shape, data)?;
        Ok(t.requires_grad())
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::build(shape.to_vec(), vec![0.0; numel(shape)], false, None)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        Self::build(shape.to_vec(), vec![value; numel(shape)], false, None)
    }

    pub fn scalar(value: f64) -> Self {
        Self::build(Vec::new(), vec![value], false, None)
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let data = (0..numel(shape)).map(&mut f).collect();
        Self::build(shape.to_vec(), data, false, None)
    }

    /// A fresh leaf with the same values that records gradients.
    pub fn requires_grad(self) -> Self {
        if self.0.requires_grad && self.0.grad_fn.is_none() {
            return self;
        }
        Self::build(self.0.shape.clone(), self.to_vec(), true, None)
    }

    /// Copy of the values cut loose from the graph.
    pub fn detach(&self) -> Self {
        Self::build(self.0.shape.clone(), self.to_vec(), false, None)
    }

    /// Records a new graph node. When no parent needs a gradient the result is a plain constant.
    pub(crate) fn from_op(
        op: &'static str,
        shape: Vec<usize>,
        data: Vec<f64>,
        parents: Vec<Tensor>,
        backward: BackwardFn,
    ) -> Self {
        if parents.iter().any(Tensor::is_tracked) {
            Self::build(shape, data, true, Some(GradFn { op, parents, backward }))
        } else {
            Self::build(shape, data, false, None)
        }
    }

    pub fn id(&self) -> usize {
        self.0.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn rank(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        numel(&self.0.shape)
    }

    /// Whether gradients flow through this tensor.
    pub fn is_tracked(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.grad_fn.is_none()
    }

    pub fn op_name(&self) -> &'static str {
        self.0.grad_fn.as_ref().map_or("leaf", |g| g.op)
    }

    pub fn data(&self) -> RwLockReadGuard<'_, Vec<f64>> {
        self.0.data.read().expect("tensor data lock poisoned")
    }

    /// Mutable access to the storage. Meant for optimizers and perturbation
    /// checks on leaves; mutating a tensor that a live graph still references
    /// changes what its backward pass sees.
    pub fn data_mut(&self) -> RwLockWriteGuard<'_, Vec<f64>> {
        self.0.data.write().expect("tensor data lock poisoned")
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.data().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f64 {
        let d = self.data();
        assert_eq!(d.len(), 1, "item() on tensor of shape {:?}", self.shape());
        d[0]
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.grad.lock().expect("grad lock poisoned").clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.lock().expect("grad lock poisoned") = None;
    }

    fn accumulate_grad(&self, g: &[f64]) {
        let mut slot = self.0.grad.lock().expect("grad lock poisoned");
        match slot.as_mut() {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            None => *slot = Some(g.to_vec()),
        }
    }

    /// Reverse-mode sweep from a scalar. Leaf gradients accumulate across calls.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::NonScalarLoss(self.shape().to_vec()));
        }
        if !self.is_tracked() {
            return Ok(());
        }
        let order = self.topo_order();
        let mut pending: HashMap<usize, Vec<f64>> = HashMap::new();
        pending.insert(self.id(), vec![1.0]);
        for node in order.iter().rev() {
            let Some(g) = pending.remove(&node.id()) else {
                continue;
            };
            match &node.0.grad_fn {
                None => node.accumulate_grad(&g),
                Some(gf) => {
                    let grads = (gf.backward)(&g);
                    debug_assert_eq!(grads.len(), gf.parents.len(), "{}", gf.op);
                    for (parent, pg) in gf.parents.iter().zip(grads) {
                        let Some(pg) = pg else { continue };
                        if !parent.is_tracked() {
                            continue;
                        }
                        debug_assert_eq!(pg.len(), parent.numel(), "{} grad size", gf.op);
                        match pending.get_mut(&parent.id()) {
                            Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, b)| *a += b),
                            None => {
                                pending.insert(parent.id(), pg);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Post-order over tracked nodes; each node appears once.
    fn topo_order(&self) -> Vec<Tensor> {
        let mut order = Vec::new();
        let mut seen = HashSet::new();
        let mut stack = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !seen.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(gf) = &t.0.grad_fn {
                for p in &gf.parents {
                    if p.is_tracked() && !seen.contains(&p.id()) {
                        stack.push((p.clone(), false));
                    }
                }
            }
        }
        order
    }

    /// Number of distinct tracked nodes reachable from this tensor.
    pub fn graph_size(&self) -> usize {
        self.topo_order().len()
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.data();
        let preview: Vec<f64> = d.iter().take(8).copied().collect();
        f.debug_struct("Tensor")
            .field("shape", &self.shape())
            .field("op", &self.op_name())
            .field("tracked", &self.is_tracked())
            .field("data", &preview)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_data_must_agree() {
        assert!(Tensor::new(&[2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::new(&[2, 3], vec![0.0; 6]).unwrap();
        assert_eq!(t.numel(), 6);
        assert_eq!(strides(&[2, 3, 4]), vec![12, 4, 1]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let p = Tensor::leaf(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let err = p.scale(2.0).backward().unwrap_err();
        assert!(matches!(err, Error::NonScalarLoss(s) if s == vec![3]));
    }

    #[test]
    fn grad_of_sum_is_ones() {
        let p = Tensor::leaf(&[2, 2], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        p.sum().backward().unwrap();
        assert_eq!(p.grad().unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn grad_of_square_sum_is_twice_input() {
        let vals = vec![1.0, -2.0, 3.0, 0.5];
        let p = Tensor::leaf(&[4], vals.clone()).unwrap();
        p.mul(&p).unwrap().sum().backward().unwrap();
        let expect: Vec<f64> = vals.iter().map(|v| 2.0 * v).collect();
        assert_eq!(p.grad().unwrap(), expect);
    }

    #[test]
    fn repeated_backward_accumulates() {
        let p = Tensor::leaf(&[2], vec![1.0, 2.0]).unwrap();
        p.sum().backward().unwrap();
        p.sum().backward().unwrap();
        assert_eq!(p.grad().unwrap(), vec![2.0, 2.0]);
        p.zero_grad();
        assert!(p.grad().is_none());
    }

    #[test]
    fn shared_subexpression_visited_once() {
        // y = (p + p) * p, both branches reach p through one shared node
        let p = Tensor::leaf(&[1], vec![3.0]).unwrap();
        let s = p.add(&p).unwrap();
        let y = s.mul(&p).unwrap().sum();
        assert_eq!(y.graph_size(), 4);
        y.backward().unwrap();
        // d/dp 2p^2 = 4p
        assert_eq!(p.grad().unwrap(), vec![12.0]);
    }

    #[test]
    fn constants_build_no_graph() {
        let a = Tensor::full(&[2], 1.0);
        let b = a.add(&a).unwrap();
        assert!(!b.is_tracked());
        assert!(b.is_leaf());
    }
}
