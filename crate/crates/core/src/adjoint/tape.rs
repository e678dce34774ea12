use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Operand {
    Node(u32),
    Const(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Op {
    Input,
    Add(Operand, Operand),
    Sub(Operand, Operand),
    Mul(Operand, Operand),
    Div(Operand, Operand),
    Neg(Operand),
    Sqrt(Operand),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Node {
    pub op: Op,
    pub val: f64,
}

pub(crate) type NodeList = RefCell<Vec<Node>>;

const NO_NODE: u32 = u32::MAX;

/// A scalar that records every operation involving the mass on a tape.
///
/// Values that do not depend on the mass stay plain constants and add
/// nothing to the tape.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    val: f64,
    node: u32,
    tape: Option<&'t NodeList>,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.node == NO_NODE {
            write!(f, "Var(const {})", self.val)
        } else {
            write!(f, "Var(#{} = {})", self.node, self.val)
        }
    }
}

impl<'t> Var<'t> {
    pub(crate) fn input(tape: &'t NodeList, val: f64) -> Self {
        let mut nodes = tape.borrow_mut();
        let node = nodes.len() as u32;
        nodes.push(Node { op: Op::Input, val });
        Var {
            val,
            node,
            tape: Some(tape),
        }
    }

    pub(crate) fn operand(&self) -> Operand {
        if self.node == NO_NODE {
            Operand::Const(self.val)
        } else {
            Operand::Node(self.node)
        }
    }

    fn push(tape: &'t NodeList, op: Op, val: f64) -> Self {
        let mut nodes = tape.borrow_mut();
        let node = u32::try_from(nodes.len()).expect("tape exceeds u32 nodes");
        nodes.push(Node { op, val });
        Var {
            val,
            node,
            tape: Some(tape),
        }
    }

    fn binary(self, rhs: Self, val: f64, op: fn(Operand, Operand) -> Op) -> Self {
        match self.tape.or(rhs.tape) {
            Some(tape) => Self::push(tape, op(self.operand(), rhs.operand()), val),
            None => Self::cst(val),
        }
    }

    fn unary(self, val: f64, op: fn(Operand) -> Op) -> Self {
        match self.tape {
            Some(tape) => Self::push(tape, op(self.operand()), val),
            None => Self::cst(val),
        }
    }
}

impl Scalar for Var<'_> {
    fn cst(v: f64) -> Self {
        Var {
            val: v,
            node: NO_NODE,
            tape: None,
        }
    }

    fn value(self) -> f64 {
        self.val
    }

    fn sqrt(self) -> Self {
        self.unary(self.val.sqrt(), Op::Sqrt)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $assign_trait:ident, $assign:ident, $op:tt, $variant:ident) => {
        impl<'t> $trait for Var<'t> {
            type Output = Var<'t>;
            fn $method(self, rhs: Self) -> Self {
                self.binary(rhs, self.val $op rhs.val, Op::$variant)
            }
        }

        impl $assign_trait for Var<'_> {
            fn $assign(&mut self, rhs: Self) {
                *self = *self $op rhs;
            }
        }
    };
}

binop!(Add, add, AddAssign, add_assign, +, Add);
binop!(Sub, sub, SubAssign, sub_assign, -, Sub);
binop!(Mul, mul, MulAssign, mul_assign, *, Mul);

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Self) -> Self {
        self.binary(rhs, self.val / rhs.val, Op::Div)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self {
        self.unary(-self.val, Op::Neg)
    }
}

fn read(vals: &[f64], o: Operand) -> f64 {
    match o {
        Operand::Node(i) => vals[i as usize],
        Operand::Const(c) => c,
    }
}

/// Re-evaluate every node with a new input value.
pub(crate) fn evaluate(nodes: &[Node], input: f64) -> Vec<f64> {
    let mut vals = Vec::with_capacity(nodes.len());
    for n in nodes {
        let v = match n.op {
            Op::Input => input,
            Op::Add(a, b) => read(&vals, a) + read(&vals, b),
            Op::Sub(a, b) => read(&vals, a) - read(&vals, b),
            Op::Mul(a, b) => read(&vals, a) * read(&vals, b),
            Op::Div(a, b) => read(&vals, a) / read(&vals, b),
            Op::Neg(a) => -read(&vals, a),
            Op::Sqrt(a) => read(&vals, a).sqrt(),
        };
        vals.push(v);
    }
    vals
}

/// Reverse sweep. `adj` holds the seeds on entry and the adjoints of every
/// node on exit.
pub(crate) fn backpropagate(nodes: &[Node], adj: &mut [f64]) {
    fn acc(adj: &mut [f64], o: Operand, g: f64) {
        if let Operand::Node(i) = o {
            adj[i as usize] += g;
        }
    }
    let val = |o: Operand| match o {
        Operand::Node(i) => nodes[i as usize].val,
        Operand::Const(c) => c,
    };
    for i in (0..nodes.len()).rev() {
        let g = adj[i];
        if g == 0.0 {
            continue;
        }
        match nodes[i].op {
            Op::Input => {}
            Op::Add(a, b) => {
                acc(adj, a, g);
                acc(adj, b, g);
            }
            Op::Sub(a, b) => {
                acc(adj, a, g);
                acc(adj, b, -g);
            }
            Op::Mul(a, b) => {
                acc(adj, a, g * val(b));
                acc(adj, b, g * val(a));
            }
            Op::Div(a, b) => {
                let vb = val(b);
                acc(adj, a, g / vb);
                acc(adj, b, -g * nodes[i].val / vb);
            }
            Op::Neg(a) => acc(adj, a, -g),
            Op::Sqrt(a) => acc(adj, a, g * 0.5 / nodes[i].val),
        }
    }
}
