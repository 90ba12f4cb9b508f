//! Reverse-mode automatic differentiation over scalar operations.
//!
//! A [`Tape`] records every elementary operation performed on tracked
//! [`DiffScalar`] values together with the local partial derivatives.
//! [`grad`] then runs one backward sweep over the recorded nodes.
//!
//! Scalars that carry no tape slot are plain constants: arithmetic on two
//! constants never touches a tape and produces bit-identical results to the
//! same arithmetic on `f64`.
//!
//! ```
//! use radiotrace::mathdiff::{grad, Tape};
//!
//! let tape = Tape::new();
//! let x = tape.leaf("x", 3.0);
//! let y = x * x;
//! let g = grad(&tape, y).unwrap();
//! assert_eq!(g.get("x"), Some(6.0));
//! ```
//!
//! A tape is single-writer (`!Sync`). Parallel workers each record on
//! a private tape and sum the resulting [`Gradients`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

const NO_PARENT: u32 = u32::MAX;

/// Kind of a recorded node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Sqrt,
    Sin,
    Cos,
    Exp,
    Ln,
    Atan2,
    Abs,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    op: Op,
    parents: [u32; 2],
    partials: [f64; 2],
}

/// Recording of a scalar computation plus its named leaves.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    leaves: RefCell<Vec<(String, u32)>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape")
            .field("nodes", &self.nodes.borrow().len())
            .field("leaves", &self.leaves.borrow().len())
            .finish()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a differentiable input. Leaves sharing a name share a
    /// gradient entry (their adjoints are summed).
    pub fn leaf(&self, name: impl Into<String>, value: f64) -> DiffScalar<'_> {
        let index = self.push(Op::Leaf, [NO_PARENT; 2], [0.0; 2]);
        self.leaves.borrow_mut().push((name.into(), index));
        DiffScalar {
            value,
            slot: Some(Slot { tape: self, index }),
        }
    }

    /// Number of recorded nodes, leaves included.
    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn count(&self, op: Op) -> usize {
        self.nodes.borrow().iter().filter(|n| n.op == op).count()
    }

    pub fn leaf_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.leaves.borrow().iter().map(|(n, _)| n.clone()).collect();
        names.sort();
        names.dedup();
        names
    }

    fn push(&self, op: Op, parents: [u32; 2], partials: [f64; 2]) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let index = u32::try_from(nodes.len()).expect("tape exceeds u32 node capacity");
        assert!(index != NO_PARENT, "tape exceeds u32 node capacity");
        nodes.push(Node { op, parents, partials });
        index
    }
}

#[derive(Clone, Copy)]
struct Slot<'t> {
    tape: &'t Tape,
    index: u32,
}

/// A real value that is optionally tracked on a [`Tape`].
#[derive(Clone, Copy)]
pub struct DiffScalar<'t> {
    value: f64,
    slot: Option<Slot<'t>>,
}

impl fmt::Debug for DiffScalar<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.slot {
            Some(s) => write!(f, "DiffScalar({} @{})", self.value, s.index),
            None => write!(f, "DiffScalar({})", self.value),
        }
    }
}

impl<'t> DiffScalar<'t> {
    /// An untracked constant.
    pub fn constant(value: f64) -> Self {
        Self { value, slot: None }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn is_tracked(&self) -> bool {
        self.slot.is_some()
    }

    /// Tape node index, if tracked.
    pub fn node(&self) -> Option<usize> {
        self.slot.map(|s| s.index as usize)
    }

    fn unary(self, op: Op, value: f64, partial: f64) -> Self {
        match self.slot {
            None => Self::constant(value),
            Some(s) => Self {
                value,
                slot: Some(Slot {
                    tape: s.tape,
                    index: s.tape.push(op, [s.index, NO_PARENT], [partial, 0.0]),
                }),
            },
        }
    }

    fn binary(self, rhs: Self, op: Op, value: f64, da: f64, db: f64) -> Self {
        let (tape, parents, partials) = match (self.slot, rhs.slot) {
            (None, None) => return Self::constant(value),
            (Some(a), None) => (a.tape, [a.index, NO_PARENT], [da, 0.0]),
            (None, Some(b)) => (b.tape, [b.index, NO_PARENT], [db, 0.0]),
            (Some(a), Some(b)) => {
                assert!(
                    std::ptr::eq(a.tape, b.tape),
                    "DiffScalar operands recorded on different tapes"
                );
                (a.tape, [a.index, b.index], [da, db])
            }
        };
        Self {
            value,
            slot: Some(Slot {
                tape,
                index: tape.push(op, parents, partials),
            }),
        }
    }

    pub fn sqrt(self) -> Self {
        let v = self.value.sqrt();
        self.unary(Op::Sqrt, v, 0.5 / v)
    }

    pub fn sin(self) -> Self {
        self.unary(Op::Sin, self.value.sin(), self.value.cos())
    }

    pub fn cos(self) -> Self {
        self.unary(Op::Cos, self.value.cos(), -self.value.sin())
    }

    pub fn exp(self) -> Self {
        let v = self.value.exp();
        self.unary(Op::Exp, v, v)
    }

    pub fn ln(self) -> Self {
        self.unary(Op::Ln, self.value.ln(), 1.0 / self.value)
    }

    pub fn abs(self) -> Self {
        let s = if self.value > 0.0 {
            1.0
        } else if self.value < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(Op::Abs, self.value.abs(), s)
    }

    /// Four-quadrant arctangent of `self / x`.
    pub fn atan2(self, x: Self) -> Self {
        let (y0, x0) = (self.value, x.value);
        let r2 = x0 * x0 + y0 * y0;
        self.binary(x, Op::Atan2, y0.atan2(x0), x0 / r2, -y0 / r2)
    }
}

impl<'t> Add for DiffScalar<'t> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Add, self.value + rhs.value, 1.0, 1.0)
    }
}

impl<'t> Sub for DiffScalar<'t> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Sub, self.value - rhs.value, 1.0, -1.0)
    }
}

impl<'t> Mul for DiffScalar<'t> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, Op::Mul, self.value * rhs.value, rhs.value, self.value)
    }
}

impl<'t> Div for DiffScalar<'t> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.value;
        self.binary(
            rhs,
            Op::Div,
            self.value / rhs.value,
            inv,
            -self.value / (rhs.value * rhs.value),
        )
    }
}

impl<'t> Neg for DiffScalar<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(Op::Neg, -self.value, -1.0)
    }
}

impl<'t> Add<f64> for DiffScalar<'t> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        self + DiffScalar::constant(rhs)
    }
}

impl<'t> Sub<f64> for DiffScalar<'t> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        self - DiffScalar::constant(rhs)
    }
}

impl<'t> Mul<f64> for DiffScalar<'t> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self * DiffScalar::constant(rhs)
    }
}

impl<'t> Div<f64> for DiffScalar<'t> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self / DiffScalar::constant(rhs)
    }
}

impl<'t> Mul<DiffScalar<'t>> for f64 {
    type Output = DiffScalar<'t>;
    fn mul(self, rhs: DiffScalar<'t>) -> DiffScalar<'t> {
        DiffScalar::constant(self) * rhs
    }
}

/// Gradients of one output with respect to every named leaf of a tape.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    by_leaf: BTreeMap<String, f64>,
}

impl Gradients {
    pub fn get(&self, leaf: &str) -> Option<f64> {
        self.by_leaf.get(leaf).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.by_leaf.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.by_leaf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_leaf.is_empty()
    }

    /// Adds `other` into `self`, leaf by leaf.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (k, v) in &other.by_leaf {
            *self.by_leaf.entry(k.clone()).or_insert(0.0) += v;
        }
    }
}

/// Reverse sweep from `output` over `tape`.
///
/// An untracked output does not depend on any leaf, so every gradient is 0.
/// An output recorded on another tape is a usage error.
pub fn grad(tape: &Tape, output: DiffScalar<'_>) -> Result<Gradients> {
    let leaves = tape.leaves.borrow();
    let mut by_leaf: BTreeMap<String, f64> = leaves.iter().map(|(name, _)| (name.clone(), 0.0)).collect();

    let Some(slot) = output.slot else {
        return Ok(Gradients { by_leaf });
    };
    if !std::ptr::eq(slot.tape, tape) {
        return Err(Error::TapeMismatch);
    }

    let nodes = tape.nodes.borrow();
    let top = slot.index as usize;
    let mut adjoint = vec![0.0; top + 1];
    adjoint[top] = 1.0;
    for i in (0..=top).rev() {
        let a = adjoint[i];
        if a == 0.0 {
            continue;
        }
        let node = &nodes[i];
        for k in 0..2 {
            let p = node.parents[k];
            if p != NO_PARENT {
                adjoint[p as usize] += a * node.partials[k];
            }
        }
    }

    for (name, index) in leaves.iter() {
        let i = *index as usize;
        if i <= top {
            *by_leaf.get_mut(name).expect("leaf registered") += adjoint[i];
        }
    }
    Ok(Gradients { by_leaf })
}
