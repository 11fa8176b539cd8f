//! Boolean expressions evaluated homomorphically.
//!
//! Expressions live in an arena so shared subterms are stored once; the
//! reported size is the number of arena nodes.

use serde::{Deserialize, Serialize};

use crate::error::{QheError, Result};

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Node {
    Const(bool),
    Input(usize),
    Xor(NodeId, NodeId),
    And(NodeId, NodeId),
    Not(NodeId),
}

/// A DAG of boolean nodes with one or more designated outputs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuncExpr {
    nodes: Vec<Node>,
    outputs: Vec<NodeId>,
    arity: usize,
}

impl FuncExpr {
    pub fn new(arity: usize) -> Self {
        FuncExpr { nodes: Vec::new(), outputs: Vec::new(), arity }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }

    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn constant(&mut self, b: bool) -> NodeId {
        self.push(Node::Const(b))
    }

    /// Input slot `i`; grows the arity if needed.
    pub fn input(&mut self, i: usize) -> NodeId {
        self.arity = self.arity.max(i + 1);
        self.push(Node::Input(i))
    }

    pub fn xor(&mut self, l: NodeId, r: NodeId) -> NodeId {
        self.push(Node::Xor(l, r))
    }

    pub fn and(&mut self, l: NodeId, r: NodeId) -> NodeId {
        self.push(Node::And(l, r))
    }

    pub fn not(&mut self, e: NodeId) -> NodeId {
        self.push(Node::Not(e))
    }

    /// XOR of a list; `Const(false)` for an empty list.
    pub fn xor_all(&mut self, ids: &[NodeId]) -> NodeId {
        match ids.split_first() {
            None => self.constant(false),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &id| self.xor(acc, id)),
        }
    }

    pub fn add_output(&mut self, id: NodeId) {
        self.outputs.push(id);
    }

    /// Checks that every edge points backwards (hence acyclic), that outputs
    /// exist and that input slots fit the arity.
    pub fn validate(&self) -> Result<()> {
        for (i, node) in self.nodes.iter().enumerate() {
            let ok = match *node {
                Node::Const(_) => true,
                Node::Input(s) => s < self.arity,
                Node::Xor(l, r) | Node::And(l, r) => l < i && r < i,
                Node::Not(e) => e < i,
            };
            if !ok {
                return Err(QheError::Precondition(format!("bad expression node {i}: {node:?}")));
            }
        }
        if self.outputs.iter().any(|&o| o >= self.nodes.len()) {
            return Err(QheError::Precondition("output refers to a missing node".into()));
        }
        Ok(())
    }

    /// Plaintext evaluation of every output.
    pub fn eval(&self, inputs: &[bool]) -> Result<Vec<bool>> {
        let values = self.eval_with(inputs, |b| b, |a, b| a ^ b, |a, b| a & b, |a| !a)?;
        Ok(self.outputs.iter().map(|&o| values[o]).collect())
    }

    /// Evaluates the DAG over an arbitrary value domain.
    pub fn eval_with<T: Clone>(
        &self,
        inputs: &[T],
        konst: impl Fn(bool) -> T,
        xor: impl Fn(&T, &T) -> T,
        and: impl Fn(&T, &T) -> T,
        not: impl Fn(&T) -> T,
    ) -> Result<Vec<T>> {
        if inputs.len() != self.arity {
            return Err(QheError::DimensionMismatch(format!(
                "expression has {} inputs, got {}",
                self.arity,
                inputs.len()
            )));
        }
        self.validate()?;
        let mut values: Vec<T> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match *node {
                Node::Const(b) => konst(b),
                Node::Input(s) => inputs[s].clone(),
                Node::Xor(l, r) => xor(&values[l], &values[r]),
                Node::And(l, r) => and(&values[l], &values[r]),
                Node::Not(e) => not(&values[e]),
            };
            values.push(v);
        }
        Ok(values)
    }

    pub fn uses_nonlinear(&self) -> bool {
        self.nodes.iter().any(|n| matches!(n, Node::And(..) | Node::Not(_)))
    }
}
