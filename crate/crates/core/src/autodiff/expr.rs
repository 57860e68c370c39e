//! Expression graph construction and forward evaluation.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use ndarray::{concatenate, Array2, Axis};

use super::AutodiffError;

/// Dense row-major matrix used for every value in the graph.
pub type Matrix = Array2<f64>;

/// Slope used by [`OpKind::LeakyRelu`] inside attention scoring.
pub const LEAKY_RELU_SLOPE: f64 = 0.2;

/// Probabilities are clamped into `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub(crate) const PROB_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The closed set of differentiable operations.
#[derive(Clone, Debug, PartialEq)]
pub enum OpKind {
    MatMul,
    Add,
    /// Elementwise (Hadamard) product.
    Mul,
    Scale(f64),
    ConcatCols,
    /// Mean over rows: `r×c → 1×c`.
    MeanRows,
    SoftmaxRows,
    Sigmoid,
    Relu,
    LeakyRelu(f64),
    Transpose,
    /// Sum of every entry: `r×c → 1×1`.
    Sum,
    /// Mean binary cross-entropy of `(probabilities, targets)`.
    BinaryCrossEntropy,
    /// Categorical cross-entropy of `(probability rows, one-hot rows)`, averaged over rows.
    CategoricalCrossEntropy,
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::Mul => "mul",
            OpKind::Scale(_) => "scale",
            OpKind::ConcatCols => "concat_cols",
            OpKind::MeanRows => "mean_rows",
            OpKind::SoftmaxRows => "softmax_rows",
            OpKind::Sigmoid => "sigmoid",
            OpKind::Relu => "relu",
            OpKind::LeakyRelu(_) => "leaky_relu",
            OpKind::Transpose => "transpose",
            OpKind::Sum => "sum",
            OpKind::BinaryCrossEntropy => "binary_cross_entropy",
            OpKind::CategoricalCrossEntropy => "categorical_cross_entropy",
        }
    }

    fn arity(&self) -> Arity {
        match self {
            OpKind::MatMul
            | OpKind::Add
            | OpKind::Mul
            | OpKind::BinaryCrossEntropy
            | OpKind::CategoricalCrossEntropy => Arity::Exactly(2),
            OpKind::ConcatCols => Arity::AtLeast(1),
            _ => Arity::Exactly(1),
        }
    }
}

enum Arity {
    Exactly(usize),
    AtLeast(usize),
}

#[derive(Clone, Debug)]
pub(crate) enum NodeKind {
    Input { name: String, trainable: bool },
    Constant(Arc<Matrix>),
    Op { op: OpKind, operands: Vec<NodeId> },
}

#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub(crate) kind: NodeKind,
    pub(crate) shape: (usize, usize),
}

impl Node {
    pub(crate) fn describe(&self, id: usize) -> String {
        match &self.kind {
            NodeKind::Input { name, .. } => format!("input '{name}' (node {id})"),
            NodeKind::Constant(_) => format!("constant (node {id})"),
            NodeKind::Op { op, .. } => format!("{} (node {id})", op.name()),
        }
    }
}

/// Incrementally builds an expression DAG. Operands must already exist, so
/// the node list is always in topological order.
#[derive(Debug, Default, Clone)]
pub struct ExprBuilder {
    nodes: Vec<Node>,
    inputs: HashMap<String, NodeId>,
}

impl ExprBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].shape
    }

    /// Declares a named trainable input.
    pub fn param(&mut self, name: &str, shape: (usize, usize)) -> Result<NodeId, AutodiffError> {
        self.input_node(name, shape, true)
    }

    /// Declares a named non-trainable input (data, labels, masks).
    pub fn input(&mut self, name: &str, shape: (usize, usize)) -> Result<NodeId, AutodiffError> {
        self.input_node(name, shape, false)
    }

    fn input_node(
        &mut self,
        name: &str,
        shape: (usize, usize),
        trainable: bool,
    ) -> Result<NodeId, AutodiffError> {
        if let Some(&id) = self.inputs.get(name) {
            let node = &self.nodes[id.0];
            let same_kind = matches!(&node.kind, NodeKind::Input { trainable: t, .. } if *t == trainable);
            if node.shape != shape || !same_kind {
                return Err(AutodiffError::ShapeMismatch {
                    node: node.describe(id.0),
                    detail: format!(
                        "redeclared as {}×{} (trainable={trainable}), originally {}×{}",
                        shape.0, shape.1, node.shape.0, node.shape.1
                    ),
                });
            }
            return Ok(id);
        }
        let id = self.push(
            NodeKind::Input {
                name: name.to_string(),
                trainable,
            },
            shape,
        );
        self.inputs.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn constant(&mut self, value: Matrix) -> NodeId {
        let shape = value.dim();
        self.push(NodeKind::Constant(Arc::new(value)), shape)
    }

    fn push(&mut self, kind: NodeKind, shape: (usize, usize)) -> NodeId {
        self.nodes.push(Node { kind, shape });
        NodeId(self.nodes.len() - 1)
    }

    pub fn op(&mut self, op: OpKind, operands: &[NodeId]) -> Result<NodeId, AutodiffError> {
        let shape = self.infer_shape(&op, operands)?;
        Ok(self.push(
            NodeKind::Op {
                op,
                operands: operands.to_vec(),
            },
            shape,
        ))
    }

    fn infer_shape(&self, op: &OpKind, operands: &[NodeId]) -> Result<(usize, usize), AutodiffError> {
        let pending = self.nodes.len();
        let mismatch = |detail: String| AutodiffError::ShapeMismatch {
            node: format!("{} (node {pending})", op.name()),
            detail,
        };
        let arity_ok = match op.arity() {
            Arity::Exactly(n) => operands.len() == n,
            Arity::AtLeast(n) => operands.len() >= n,
        };
        if !arity_ok {
            return Err(mismatch(format!("wrong operand count {}", operands.len())));
        }
        if let Some(bad) = operands.iter().find(|id| id.0 >= pending) {
            return Err(mismatch(format!("unknown operand node {}", bad.0)));
        }
        let shapes: Vec<(usize, usize)> = operands.iter().map(|&id| self.shape(id)).collect();
        let fmt_shapes = || {
            shapes
                .iter()
                .map(|(r, c)| format!("{r}×{c}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let shape = match op {
            OpKind::MatMul => {
                let ((r, k1), (k2, c)) = (shapes[0], shapes[1]);
                if k1 != k2 {
                    return Err(mismatch(format!("inner dimensions differ: {}", fmt_shapes())));
                }
                (r, c)
            }
            OpKind::Add | OpKind::Mul => {
                if shapes[0] != shapes[1] {
                    return Err(mismatch(format!("operand shapes differ: {}", fmt_shapes())));
                }
                shapes[0]
            }
            OpKind::BinaryCrossEntropy | OpKind::CategoricalCrossEntropy => {
                if shapes[0] != shapes[1] {
                    return Err(mismatch(format!("prediction/target shapes differ: {}", fmt_shapes())));
                }
                (1, 1)
            }
            OpKind::ConcatCols => {
                let rows = shapes[0].0;
                if shapes.iter().any(|s| s.0 != rows) {
                    return Err(mismatch(format!("row counts differ: {}", fmt_shapes())));
                }
                (rows, shapes.iter().map(|s| s.1).sum())
            }
            OpKind::MeanRows => {
                if shapes[0].0 == 0 {
                    return Err(mismatch("mean over zero rows".into()));
                }
                (1, shapes[0].1)
            }
            OpKind::Transpose => (shapes[0].1, shapes[0].0),
            OpKind::Sum => (1, 1),
            OpKind::Scale(_)
            | OpKind::SoftmaxRows
            | OpKind::Sigmoid
            | OpKind::Relu
            | OpKind::LeakyRelu(_) => shapes[0],
        };
        Ok(shape)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.op(OpKind::MatMul, &[a, b])
    }
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.op(OpKind::Add, &[a, b])
    }
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        self.op(OpKind::Mul, &[a, b])
    }
    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId, AutodiffError> {
        self.op(OpKind::Scale(factor), &[a])
    }
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, AutodiffError> {
        self.op(OpKind::ConcatCols, parts)
    }
    pub fn mean_rows(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        self.op(OpKind::MeanRows, &[a])
    }
    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        self.op(OpKind::SoftmaxRows, &[a])
    }
    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        self.op(OpKind::Sigmoid, &[a])
    }
    pub fn relu(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        self.op(OpKind::Relu, &[a])
    }
    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> Result<NodeId, AutodiffError> {
        self.op(OpKind::LeakyRelu(slope), &[a])
    }
    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        self.op(OpKind::Transpose, &[a])
    }
    pub fn sum(&mut self, a: NodeId) -> Result<NodeId, AutodiffError> {
        self.op(OpKind::Sum, &[a])
    }
    pub fn binary_cross_entropy(&mut self, probs: NodeId, targets: NodeId) -> Result<NodeId, AutodiffError> {
        self.op(OpKind::BinaryCrossEntropy, &[probs, targets])
    }
    pub fn categorical_cross_entropy(
        &mut self,
        probs: NodeId,
        targets: NodeId,
    ) -> Result<NodeId, AutodiffError> {
        self.op(OpKind::CategoricalCrossEntropy, &[probs, targets])
    }

    /// Snapshot of the graph rooted at `root`. The builder stays usable, so
    /// several expressions (e.g. loss and prediction) can share a prefix.
    pub fn finish(&self, root: NodeId) -> Expr {
        let nodes: Arc<[Node]> = self.nodes[..=root.0].to_vec().into();
        let mut live = vec![false; nodes.len()];
        live[root.0] = true;
        for i in (0..nodes.len()).rev() {
            if !live[i] {
                continue;
            }
            if let NodeKind::Op { operands, .. } = &nodes[i].kind {
                for o in operands {
                    live[o.0] = true;
                }
            }
        }
        Expr {
            nodes,
            live: live.into(),
            root,
        }
    }
}

/// Immutable expression DAG with a designated root. Cheap to clone and safe
/// to share across threads.
#[derive(Clone, Debug)]
pub struct Expr {
    pub(crate) nodes: Arc<[Node]>,
    pub(crate) live: Arc<[bool]>,
    pub(crate) root: NodeId,
}

/// Named input values for one evaluation. Values may be borrowed so large
/// parameter matrices are never copied per sample.
#[derive(Clone, Debug, Default)]
pub struct Bindings<'a> {
    values: HashMap<String, Cow<'a, Matrix>>,
}

impl<'a> Bindings<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Matrix) -> &mut Self {
        self.values.insert(name.into(), Cow::Owned(value));
        self
    }

    pub fn insert_ref(&mut self, name: impl Into<String>, value: &'a Matrix) -> &mut Self {
        self.values.insert(name.into(), Cow::Borrowed(value));
        self
    }

    pub fn with(mut self, name: impl Into<String>, value: Matrix) -> Self {
        self.insert(name, value);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.values.get(name).map(|v| v.as_ref())
    }

    pub(crate) fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.values.get_mut(name).map(|v| v.to_mut())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}

/// Values of every live node after a forward pass. Inputs and constants are
/// borrowed, not copied.
pub struct Forward<'e> {
    values: Vec<Option<Cow<'e, Matrix>>>,
    root: NodeId,
}

impl<'e> Forward<'e> {
    pub fn value(&self, id: NodeId) -> Option<&Matrix> {
        self.values.get(id.0).and_then(|v| v.as_deref())
    }

    pub fn root(&self) -> &Matrix {
        self.value(self.root).expect("root is always evaluated")
    }

    pub(crate) fn value_at(&self, index: usize) -> &Matrix {
        self.values[index].as_deref().expect("live node evaluated")
    }

    pub fn into_root(mut self) -> Matrix {
        self.values[self.root.0]
            .take()
            .expect("root is always evaluated")
            .into_owned()
    }
}

impl fmt::Debug for Forward<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Forward").field("root", &self.root).finish()
    }
}

impl Expr {
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn root_shape(&self) -> (usize, usize) {
        self.nodes[self.root.0].shape
    }

    /// Names of live trainable inputs, in node order.
    pub fn trainable_inputs(&self) -> Vec<(&str, (usize, usize))> {
        self.nodes
            .iter()
            .zip(self.live.iter())
            .filter_map(|(n, &live)| match &n.kind {
                NodeKind::Input { name, trainable: true } if live => Some((name.as_str(), n.shape)),
                _ => None,
            })
            .collect()
    }

    /// Names and shapes of every live input, trainable or not.
    pub fn inputs(&self) -> Vec<(&str, (usize, usize), bool)> {
        self.nodes
            .iter()
            .zip(self.live.iter())
            .filter_map(|(n, &live)| match &n.kind {
                NodeKind::Input { name, trainable } if live => Some((name.as_str(), n.shape, *trainable)),
                _ => None,
            })
            .collect()
    }

    pub fn evaluate(&self, bindings: &Bindings<'_>) -> Result<Matrix, AutodiffError> {
        Ok(self.forward(bindings)?.into_root())
    }

    pub fn forward<'e>(&'e self, bindings: &'e Bindings<'_>) -> Result<Forward<'e>, AutodiffError> {
        let mut values: Vec<Option<Cow<'e, Matrix>>> = vec![None; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if !self.live[i] {
                continue;
            }
            let value = match &node.kind {
                NodeKind::Input { name, .. } => {
                    let bound = bindings.get(name).ok_or_else(|| AutodiffError::MissingBinding {
                        name: name.clone(),
                    })?;
                    if bound.dim() != node.shape {
                        return Err(AutodiffError::ShapeMismatch {
                            node: node.describe(i),
                            detail: format!(
                                "expects {}×{}, bound value is {}×{}",
                                node.shape.0,
                                node.shape.1,
                                bound.nrows(),
                                bound.ncols()
                            ),
                        });
                    }
                    Cow::Borrowed(bound)
                }
                NodeKind::Constant(m) => Cow::Borrowed(m.as_ref()),
                NodeKind::Op { op, operands } => {
                    let args: Vec<&Matrix> = operands
                        .iter()
                        .map(|o| values[o.0].as_deref().expect("operands precede their op"))
                        .collect();
                    Cow::Owned(apply_forward(op, &args))
                }
            };
            values[i] = Some(value);
        }
        Ok(Forward {
            values,
            root: self.root,
        })
    }
}

fn apply_forward(op: &OpKind, args: &[&Matrix]) -> Matrix {
    match op {
        OpKind::MatMul => args[0].dot(args[1]),
        OpKind::Add => args[0] + args[1],
        OpKind::Mul => args[0] * args[1],
        OpKind::Scale(c) => args[0] * *c,
        OpKind::ConcatCols => {
            let views: Vec<_> = args.iter().map(|a| a.view()).collect();
            concatenate(Axis(1), &views).expect("shapes checked at construction")
        }
        OpKind::MeanRows => {
            let n = args[0].nrows() as f64;
            let mut out = Matrix::zeros((1, args[0].ncols()));
            for row in args[0].rows() {
                out.row_mut(0).zip_mut_with(&row, |o, &x| *o += x);
            }
            out.mapv_inplace(|x| x / n);
            out
        }
        OpKind::SoftmaxRows => softmax_rows(args[0]),
        OpKind::Sigmoid => args[0].mapv(sigmoid),
        OpKind::Relu => args[0].mapv(|x| if x > 0.0 { x } else { 0.0 }),
        OpKind::LeakyRelu(slope) => args[0].mapv(|x| if x > 0.0 { x } else { slope * x }),
        OpKind::Transpose => args[0].t().to_owned(),
        OpKind::Sum => Matrix::from_elem((1, 1), args[0].iter().sum()),
        OpKind::BinaryCrossEntropy => {
            let n = args[0].len().max(1) as f64;
            let total: f64 = args[0]
                .iter()
                .zip(args[1].iter())
                .map(|(&p, &y)| {
                    let p = clamp_prob(p);
                    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
                })
                .sum();
            Matrix::from_elem((1, 1), total / n)
        }
        OpKind::CategoricalCrossEntropy => {
            let rows = args[0].nrows().max(1) as f64;
            let total: f64 = args[0]
                .iter()
                .zip(args[1].iter())
                .map(|(&p, &y)| -y * clamp_prob(p).ln())
                .sum();
            Matrix::from_elem((1, 1), total / rows)
        }
    }
}

pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|x| (x - max).exp());
        let total: f64 = row.sum();
        row.mapv_inplace(|x| x / total);
    }
    out
}
