use std::cell::RefCell;
use std::rc::Rc;

use ndarray::{ArrayD, LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};

use crate::error::{Error, Result};

/// Element type of tape tensors.
pub trait Scalar:
    Float
    + FromPrimitive
    + ScalarOperand
    + LinalgScalar
    + std::ops::AddAssign
    + std::iter::Sum
    + std::fmt::Debug
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Handle to a node on a [`Tape`]. Only valid for the tape that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

type BackwardFn<T> = Box<dyn Fn(&ArrayD<T>) -> Vec<ArrayD<T>>>;

pub(crate) struct Node<T> {
    pub value: Rc<ArrayD<T>>,
    pub parents: Vec<usize>,
    /// Maps the node's output gradient to parent gradients, aligned with
    /// `parents`. `None` for leaves, constants, and detached nodes.
    pub backward: Option<BackwardFn<T>>,
    pub requires_grad: bool,
}

/// Records one forward pass for reverse-mode differentiation.
pub struct Tape<T: Scalar> {
    nodes: RefCell<Vec<Node<T>>>,
    grads: RefCell<Vec<Option<ArrayD<T>>>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: RefCell::new(Vec::new()), grads: RefCell::new(Vec::new()) }
    }

    fn insert(&self, node: Node<T>) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var(nodes.len() - 1)
    }

    /// Trainable input: participates in gradient computation.
    pub fn leaf(&self, value: ArrayD<T>) -> Var {
        self.insert(Node { value: Rc::new(value), parents: vec![], backward: None, requires_grad: true })
    }

    /// Non-trainable input: gradients never flow into it.
    pub fn constant(&self, value: ArrayD<T>) -> Var {
        self.insert(Node { value: Rc::new(value), parents: vec![], backward: None, requires_grad: false })
    }

    /// Cut the tape: a new node sharing the value of `v` with no history.
    /// Backward passes through the result contribute nothing upstream.
    pub fn detach(&self, v: Var) -> Var {
        let value = self.nodes.borrow()[v.0].value.clone();
        self.insert(Node { value, parents: vec![], backward: None, requires_grad: false })
    }

    pub(crate) fn push_op(
        &self,
        value: ArrayD<T>,
        parents: Vec<usize>,
        backward: BackwardFn<T>,
    ) -> Var {
        let requires_grad = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|&p| nodes[p].requires_grad)
        };
        self.insert(Node {
            value: Rc::new(value),
            parents,
            backward: if requires_grad { Some(backward) } else { None },
            requires_grad,
        })
    }

    pub fn value(&self, v: Var) -> Rc<ArrayD<T>> {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    /// Value of a single-element node.
    pub fn scalar_value(&self, v: Var) -> T {
        let val = self.value(v);
        debug_assert_eq!(val.len(), 1);
        *val.iter().next().expect("scalar node")
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reverse sweep from a scalar root. Gradients for every node that the
    /// root depends on are stored on the tape and can be read with
    /// [`Tape::grad`]; nodes outside the root's history keep `None`.
    pub fn backward(&self, root: Var) -> Result<()> {
        let nodes = self.nodes.borrow();
        if nodes[root.0].value.len() != 1 {
            return Err(Error::usage("backward requires a scalar root"));
        }
        let mut grads: Vec<Option<ArrayD<T>>> = vec![None; nodes.len()];
        grads[root.0] = Some(ArrayD::ones(nodes[root.0].value.raw_dim()));
        for idx in (0..=root.0).rev() {
            let Some(back) = nodes[idx].backward.as_ref() else { continue };
            let Some(g) = grads[idx].clone() else { continue };
            let parent_grads = back(&g);
            debug_assert_eq!(parent_grads.len(), nodes[idx].parents.len());
            for (&p, pg) in nodes[idx].parents.iter().zip(parent_grads) {
                // Constants and detached nodes absorb nothing.
                if !nodes[p].requires_grad {
                    continue;
                }
                match &mut grads[p] {
                    Some(acc) => *acc += &pg,
                    slot @ None => *slot = Some(pg),
                }
            }
        }
        *self.grads.borrow_mut() = grads;
        Ok(())
    }

    /// Gradient of the last [`Tape::backward`] root w.r.t. `v`, if any
    /// gradient flowed into it.
    pub fn grad(&self, v: Var) -> Option<ArrayD<T>> {
        self.grads.borrow().get(v.0).and_then(|g| g.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    fn arr(vals: &[f64]) -> ArrayD<f64> {
        ArrayD::from_shape_vec(IxDyn(&[vals.len()]), vals.to_vec()).unwrap()
    }

    #[test]
    fn gradients_accumulate_across_uses() {
        // y = sum(x * x_again) where both factors are the same leaf:
        // dy/dx = 2x.
        let tape = Tape::<f64>::new();
        let x = tape.leaf(arr(&[1.0, -2.0, 3.0]));
        let prod = tape.mul(x, x).unwrap();
        let y = tape.sum(prod);
        tape.backward(y).unwrap();
        let g = tape.grad(x).unwrap();
        for (gi, xi) in g.iter().zip([1.0, -2.0, 3.0]) {
            assert!((gi - 2.0 * xi).abs() < 1e-12);
        }
    }

    #[test]
    fn detach_blocks_gradient_flow() {
        let tape = Tape::<f64>::new();
        let x = tape.leaf(arr(&[2.0, 3.0]));
        let d = tape.detach(x);
        let prod = tape.mul(x, d).unwrap();
        let y = tape.sum(prod);
        tape.backward(y).unwrap();
        // d(x * stop(x))/dx = stop(x), not 2x.
        let g = tape.grad(x).unwrap();
        assert_eq!(g.as_slice().unwrap(), &[2.0, 3.0]);
        assert!(tape.grad(d).is_none());
    }

    #[test]
    fn constants_receive_no_gradient() {
        let tape = Tape::<f64>::new();
        let x = tape.leaf(arr(&[1.0]));
        let c = tape.constant(arr(&[5.0]));
        let y = tape.sum(tape.mul(x, c).unwrap());
        tape.backward(y).unwrap();
        assert!(tape.grad(c).is_none());
        assert_eq!(tape.grad(x).unwrap().as_slice().unwrap(), &[5.0]);
    }

    #[test]
    fn backward_requires_scalar_root() {
        let tape = Tape::<f64>::new();
        let x = tape.leaf(arr(&[1.0, 2.0]));
        assert!(tape.backward(x).is_err());
    }
}
