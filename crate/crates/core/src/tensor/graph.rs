use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;

use super::{matmul_nn, matmul_nt, matmul_tn, Array, TensorError};
use crate::scalar::{normal_cdf, normal_pdf, Scalar};

/// Index of a trainable parameter in an external parameter store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

type NodeId = usize;

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    MatMul(NodeId, NodeId),
    MatMulNT(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Scale(NodeId, T),
    AddScalar(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    SumRows(NodeId),
    Transpose(NodeId),
    Concat(Vec<NodeId>),
    SelectRows(NodeId, Vec<usize>),
    SqNorm(NodeId),
    Trace(NodeId),
    Softmax(NodeId),
    LogSoftmax(NodeId),
    Log(NodeId),
    Sqrt(NodeId),
    Gelu(NodeId),
    Softplus(NodeId),
    GradReverse(NodeId, T),
    CenterCols(NodeId),
}

struct Node<T> {
    value: Array<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Computation graph for one forward/backward pass.
pub struct Graph<T: Scalar> {
    nodes: RefCell<Vec<Node<T>>>,
    params: RefCell<BTreeMap<ParamId, NodeId>>,
    grads: RefCell<Vec<Option<Array<T>>>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> fmt::Debug for Graph<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("nodes", &self.nodes.borrow().len())
            .field("params", &self.params.borrow().len())
            .finish()
    }
}

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy)]
pub struct Tensor<'g, T: Scalar> {
    graph: &'g Graph<T>,
    id: NodeId,
}

impl<T: Scalar> fmt::Debug for Tensor<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            params: RefCell::new(BTreeMap::new()),
            grads: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Array<T>, op: Op<T>, requires_grad: bool) -> Tensor<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Tensor {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    /// Leaf that never receives gradient.
    pub fn constant(&self, value: Array<T>) -> Tensor<'_, T> {
        self.push(value, Op::Leaf, false)
    }

    /// Leaf that receives gradient.
    pub fn variable(&self, value: Array<T>) -> Tensor<'_, T> {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf bound to an external parameter. Repeated calls with the same id
    /// return the same node, so every use of a shared parameter accumulates
    /// into one gradient.
    pub fn param(&self, id: ParamId, value: &Array<T>) -> Tensor<'_, T> {
        if let Some(&node) = self.params.borrow().get(&id) {
            return Tensor {
                graph: self,
                id: node,
            };
        }
        let t = self.variable(value.clone());
        self.params.borrow_mut().insert(id, t.id);
        t
    }

    /// Gradients of every parameter bound with [`Graph::param`], after backward.
    pub fn param_grads(&self) -> Vec<(ParamId, Array<T>)> {
        let params = self.params.borrow();
        params
            .iter()
            .map(|(&pid, &node)| (pid, Tensor { graph: self, id: node }.grad()))
            .collect()
    }

    fn value_of(&self, id: NodeId) -> std::cell::Ref<'_, Array<T>> {
        std::cell::Ref::map(self.nodes.borrow(), |n| &n[id].value)
    }

    fn backward_from(&self, root: NodeId) -> Result<(), TensorError> {
        let nodes = self.nodes.borrow();
        let root_shape = nodes[root].value.shape().to_vec();
        if nodes[root].value.len() != 1 {
            return Err(TensorError::NotScalar(root_shape));
        }
        let mut grads: Vec<Option<Array<T>>> = vec![None; nodes.len()];
        grads[root] = Some(Array::full(&root_shape, T::one()));

        for id in (0..=root).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if node.requires_grad {
                propagate(&nodes, id, &g, &mut grads);
            }
            grads[id] = Some(g);
        }
        *self.grads.borrow_mut() = grads;
        Ok(())
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Array<T>>], nodes: &[Node<T>], id: NodeId, g: Array<T>) {
    if !nodes[id].requires_grad {
        return;
    }
    match &mut grads[id] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn propagate<T: Scalar>(nodes: &[Node<T>], id: NodeId, g: &Array<T>, grads: &mut [Option<Array<T>>]) {
    let out = &nodes[id].value;
    match &nodes[id].op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let av = &nodes[*a].value;
            let bv = &nodes[*b].value;
            let (n, k) = (av.rows(), av.cols());
            let m = bv.cols();
            if nodes[*a].requires_grad {
                let ga = matmul_nt(g.data(), bv.data(), n, m, k);
                accumulate(grads, nodes, *a, Array::from_shape_vec(&[n, k], ga).unwrap());
            }
            if nodes[*b].requires_grad {
                let gb = matmul_tn(av.data(), g.data(), n, k, m);
                accumulate(grads, nodes, *b, Array::from_shape_vec(&[k, m], gb).unwrap());
            }
        }
        Op::MatMulNT(a, b) => {
            // out = a · bᵀ, a: n×k, b: m×k
            let av = &nodes[*a].value;
            let bv = &nodes[*b].value;
            let (n, k) = (av.rows(), av.cols());
            let m = bv.rows();
            if nodes[*a].requires_grad {
                let ga = matmul_nn(g.data(), bv.data(), n, m, k);
                accumulate(grads, nodes, *a, Array::from_shape_vec(&[n, k], ga).unwrap());
            }
            if nodes[*b].requires_grad {
                let gb = matmul_tn(g.data(), av.data(), n, m, k);
                accumulate(grads, nodes, *b, Array::from_shape_vec(&[m, k], gb).unwrap());
            }
        }
        Op::Add(a, b) => {
            accumulate(grads, nodes, *a, g.clone());
            accumulate(grads, nodes, *b, g.clone());
        }
        Op::Sub(a, b) => {
            accumulate(grads, nodes, *a, g.clone());
            accumulate(grads, nodes, *b, g.map(|x| -x));
        }
        Op::Mul(a, b) => {
            if nodes[*a].requires_grad {
                accumulate(grads, nodes, *a, g.zip_map(&nodes[*b].value, |x, y| x * y));
            }
            if nodes[*b].requires_grad {
                accumulate(grads, nodes, *b, g.zip_map(&nodes[*a].value, |x, y| x * y));
            }
        }
        Op::Div(a, b) => {
            let bv = &nodes[*b].value;
            if nodes[*a].requires_grad {
                accumulate(grads, nodes, *a, g.zip_map(bv, |x, y| x / y));
            }
            if nodes[*b].requires_grad {
                // d(a/b)/db = -(a/b)/b
                let t = g.zip_map(out, |x, q| x * q);
                accumulate(grads, nodes, *b, t.zip_map(bv, |x, y| -x / y));
            }
        }
        Op::AddBias(a, bias) => {
            accumulate(grads, nodes, *a, g.clone());
            if nodes[*bias].requires_grad {
                let cols = column_sums(g);
                let shape = nodes[*bias].value.shape().to_vec();
                accumulate(grads, nodes, *bias, Array::from_shape_vec(&shape, cols).unwrap());
            }
        }
        Op::Scale(a, c) => {
            let c = *c;
            accumulate(grads, nodes, *a, g.map(|x| x * c));
        }
        Op::AddScalar(a) => accumulate(grads, nodes, *a, g.clone()),
        Op::Sum(a) => {
            let s = g.item();
            accumulate(grads, nodes, *a, Array::full(nodes[*a].value.shape(), s));
        }
        Op::Mean(a) => {
            let av = &nodes[*a].value;
            let s = g.item() / T::of(av.len() as f64);
            accumulate(grads, nodes, *a, Array::full(av.shape(), s));
        }
        Op::SumRows(a) => {
            let av = &nodes[*a].value;
            let (r, c) = (av.rows(), av.cols());
            let mut data = Vec::with_capacity(r * c);
            for _ in 0..r {
                data.extend_from_slice(g.data());
            }
            accumulate(grads, nodes, *a, Array::from_shape_vec(&[r, c], data).unwrap());
        }
        Op::Transpose(a) => accumulate(grads, nodes, *a, g.transpose()),
        Op::Concat(parts) => {
            let n = g.rows();
            let total = g.cols();
            let mut offset = 0;
            for &p in parts {
                let w = nodes[p].value.cols();
                if nodes[p].requires_grad {
                    let mut data = Vec::with_capacity(n * w);
                    for i in 0..n {
                        data.extend_from_slice(&g.data()[i * total + offset..i * total + offset + w]);
                    }
                    accumulate(grads, nodes, p, Array::from_shape_vec(&[n, w], data).unwrap());
                }
                offset += w;
            }
        }
        Op::SelectRows(a, idx) => {
            let av = &nodes[*a].value;
            let c = av.cols();
            let mut ga = Array::zeros(av.shape());
            for (r, &src) in idx.iter().enumerate() {
                let dst = &mut ga.data_mut()[src * c..(src + 1) * c];
                for (d, &x) in dst.iter_mut().zip(g.row(r)) {
                    *d += x;
                }
            }
            accumulate(grads, nodes, *a, ga);
        }
        Op::SqNorm(a) => {
            let two_g = T::of(2.0) * g.item();
            accumulate(grads, nodes, *a, nodes[*a].value.map(|x| two_g * x));
        }
        Op::Trace(a) => {
            let n = nodes[*a].value.rows();
            let mut ga = Array::zeros(&[n, n]);
            for i in 0..n {
                ga.set(i, i, g.item());
            }
            accumulate(grads, nodes, *a, ga);
        }
        Op::Softmax(a) => {
            let c = out.cols();
            let mut ga = Array::zeros(out.shape());
            for i in 0..out.rows() {
                let y = out.row(i);
                let gr = g.row(i);
                let dot: T = y.iter().zip(gr).map(|(&p, &q)| p * q).sum();
                for j in 0..c {
                    ga.data_mut()[i * c + j] = y[j] * (gr[j] - dot);
                }
            }
            accumulate(grads, nodes, *a, ga);
        }
        Op::LogSoftmax(a) => {
            let c = out.cols();
            let mut ga = Array::zeros(out.shape());
            for i in 0..out.rows() {
                let gr = g.row(i);
                let total: T = gr.iter().copied().sum();
                let y = out.row(i);
                for j in 0..c {
                    ga.data_mut()[i * c + j] = gr[j] - y[j].exp() * total;
                }
            }
            accumulate(grads, nodes, *a, ga);
        }
        Op::Log(a) => accumulate(grads, nodes, *a, g.zip_map(&nodes[*a].value, |x, v| x / v)),
        Op::Sqrt(a) => {
            // subgradient 0 at the origin keeps zero-variance columns finite
            accumulate(
                grads,
                nodes,
                *a,
                g.zip_map(out, |x, s| if s == T::zero() { T::zero() } else { x / (T::of(2.0) * s) }),
            );
        }
        Op::Gelu(a) => accumulate(
            grads,
            nodes,
            *a,
            g.zip_map(&nodes[*a].value, |x, v| x * (normal_cdf(v) + v * normal_pdf(v))),
        ),
        Op::Softplus(a) => accumulate(grads, nodes, *a, g.zip_map(&nodes[*a].value, |x, v| x * sigmoid(v))),
        Op::GradReverse(a, scale) => {
            let s = -*scale;
            accumulate(grads, nodes, *a, g.map(|x| x * s));
        }
        Op::CenterCols(a) => {
            let means = column_means(g);
            let c = g.cols();
            let mut ga = g.clone();
            for (k, x) in ga.data_mut().iter_mut().enumerate() {
                *x -= means[k % c];
            }
            accumulate(grads, nodes, *a, ga);
        }
    }
}

fn column_sums<T: Scalar>(a: &Array<T>) -> Vec<T> {
    let c = a.cols();
    let mut s = vec![T::zero(); c];
    for i in 0..a.rows() {
        for (acc, &x) in s.iter_mut().zip(a.row(i)) {
            *acc += x;
        }
    }
    s
}

fn column_means<T: Scalar>(a: &Array<T>) -> Vec<T> {
    let n = T::of(a.rows() as f64);
    column_sums(a).into_iter().map(|s| s / n).collect()
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `max(x, 0) + ln(1 + e^{-|x|})`.
pub(crate) fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

fn same_shape<T: Scalar>(op: &'static str, a: &Array<T>, b: &Array<T>) -> Result<(), TensorError> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(TensorError::Shape {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        })
    }
}

impl<'g, T: Scalar> Tensor<'g, T> {
    pub fn graph(&self) -> &'g Graph<T> {
        self.graph
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.value_of(self.id).shape().to_vec()
    }

    /// Copy of the forward value.
    pub fn value(&self) -> Array<T> {
        self.graph.value_of(self.id).clone()
    }

    pub fn with_value<R>(&self, f: impl FnOnce(&Array<T>) -> R) -> R {
        f(&self.graph.value_of(self.id))
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> T {
        self.graph.value_of(self.id).item()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.nodes.borrow()[self.id].requires_grad
    }

    /// Gradient from the most recent backward pass; zeros when unreached.
    pub fn grad(&self) -> Array<T> {
        let grads = self.graph.grads.borrow();
        match grads.get(self.id) {
            Some(Some(g)) => g.clone(),
            _ => Array::zeros(&self.shape()),
        }
    }

    /// Runs reverse-mode differentiation from this scalar.
    pub fn backward(&self) -> Result<(), TensorError> {
        self.graph.backward_from(self.id)
    }

    /// Same value, cut from the graph.
    pub fn detach(&self) -> Tensor<'g, T> {
        self.graph.constant(self.value())
    }

    fn unary(&self, op: Op<T>, f: impl FnOnce(&Array<T>) -> Array<T>) -> Tensor<'g, T> {
        let (value, rg) = {
            let nodes = self.graph.nodes.borrow();
            let n = &nodes[self.id];
            (f(&n.value), n.requires_grad)
        };
        self.graph.push(value, op, rg)
    }

    fn binary(
        &self,
        other: &Tensor<'g, T>,
        op: Op<T>,
        f: impl FnOnce(&Array<T>, &Array<T>) -> Result<Array<T>, TensorError>,
    ) -> Result<Tensor<'g, T>, TensorError> {
        debug_assert!(std::ptr::eq(self.graph, other.graph));
        let (value, rg) = {
            let nodes = self.graph.nodes.borrow();
            let (a, b) = (&nodes[self.id], &nodes[other.id]);
            (f(&a.value, &b.value)?, a.requires_grad || b.requires_grad)
        };
        Ok(self.graph.push(value, op, rg))
    }

    /// Matrix product `self · other`.
    pub fn matmul(&self, other: &Tensor<'g, T>) -> Result<Tensor<'g, T>, TensorError> {
        self.binary(other, Op::MatMul(self.id, other.id), |a, b| {
            let (n, k) = a.dims2()?;
            let (k2, m) = b.dims2()?;
            if k != k2 {
                return Err(TensorError::Shape {
                    op: "matmul",
                    lhs: a.shape().to_vec(),
                    rhs: b.shape().to_vec(),
                });
            }
            Array::from_shape_vec(&[n, m], matmul_nn(a.data(), b.data(), n, k, m))
        })
    }

    /// `self · otherᵀ`, the layout of a linear layer with an `out×in` weight.
    pub fn matmul_t(&self, other: &Tensor<'g, T>) -> Result<Tensor<'g, T>, TensorError> {
        self.binary(other, Op::MatMulNT(self.id, other.id), |a, b| {
            let (n, k) = a.dims2()?;
            let (m, k2) = b.dims2()?;
            if k != k2 {
                return Err(TensorError::Shape {
                    op: "matmul_t",
                    lhs: a.shape().to_vec(),
                    rhs: b.shape().to_vec(),
                });
            }
            Array::from_shape_vec(&[n, m], matmul_nt(a.data(), b.data(), n, k, m))
        })
    }

    pub fn add(&self, other: &Tensor<'g, T>) -> Result<Tensor<'g, T>, TensorError> {
        self.binary(other, Op::Add(self.id, other.id), |a, b| {
            same_shape("add", a, b)?;
            Ok(a.zip_map(b, |x, y| x + y))
        })
    }

    pub fn sub(&self, other: &Tensor<'g, T>) -> Result<Tensor<'g, T>, TensorError> {
        self.binary(other, Op::Sub(self.id, other.id), |a, b| {
            same_shape("sub", a, b)?;
            Ok(a.zip_map(b, |x, y| x - y))
        })
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Tensor<'g, T>) -> Result<Tensor<'g, T>, TensorError> {
        self.binary(other, Op::Mul(self.id, other.id), |a, b| {
            same_shape("mul", a, b)?;
            Ok(a.zip_map(b, |x, y| x * y))
        })
    }

    /// Elementwise quotient.
    pub fn div(&self, other: &Tensor<'g, T>) -> Result<Tensor<'g, T>, TensorError> {
        self.binary(other, Op::Div(self.id, other.id), |a, b| {
            same_shape("div", a, b)?;
            Ok(a.zip_map(b, |x, y| x / y))
        })
    }

    /// Adds a bias vector (`[m]` or `[1, m]`) to every row of an `n×m` matrix.
    pub fn add_bias(&self, bias: &Tensor<'g, T>) -> Result<Tensor<'g, T>, TensorError> {
        self.binary(bias, Op::AddBias(self.id, bias.id), |a, b| {
            let (_, m) = a.dims2()?;
            if b.len() != m || b.rank() > 2 || (b.rank() == 2 && b.rows() != 1) {
                return Err(TensorError::Shape {
                    op: "add_bias",
                    lhs: a.shape().to_vec(),
                    rhs: b.shape().to_vec(),
                });
            }
            let mut out = a.clone();
            for (k, x) in out.data_mut().iter_mut().enumerate() {
                *x += b.data()[k % m];
            }
            Ok(out)
        })
    }

    pub fn scale(&self, c: T) -> Tensor<'g, T> {
        self.unary(Op::Scale(self.id, c), |a| a.map(|x| x * c))
    }

    pub fn neg(&self) -> Tensor<'g, T> {
        self.scale(-T::one())
    }

    pub fn add_scalar(&self, c: T) -> Tensor<'g, T> {
        self.unary(Op::AddScalar(self.id), |a| a.map(|x| x + c))
    }

    /// Sum of all elements, as a rank-0 tensor.
    pub fn sum(&self) -> Tensor<'g, T> {
        self.unary(Op::Sum(self.id), |a| Array::scalar(a.sum()))
    }

    pub fn mean(&self) -> Tensor<'g, T> {
        self.unary(Op::Mean(self.id), |a| {
            Array::scalar(a.sum() / T::of(a.len() as f64))
        })
    }

    /// Column sums of a matrix, shape `[1, cols]`.
    pub fn sum_rows(&self) -> Tensor<'g, T> {
        self.unary(Op::SumRows(self.id), |a| {
            Array::from_shape_vec(&[1, a.cols()], column_sums(a)).unwrap()
        })
    }

    pub fn transpose(&self) -> Tensor<'g, T> {
        self.unary(Op::Transpose(self.id), |a| a.transpose())
    }

    /// Concatenation along the feature axis.
    pub fn concat(parts: &[Tensor<'g, T>]) -> Result<Tensor<'g, T>, TensorError> {
        let first = parts.first().ok_or(TensorError::Empty { op: "concat" })?;
        let graph = first.graph;
        let (value, rg) = {
            let nodes = graph.nodes.borrow();
            let n = nodes[first.id].value.rows();
            let mut width = 0;
            for p in parts {
                let v = &nodes[p.id].value;
                v.dims2()?;
                if v.rows() != n {
                    return Err(TensorError::Shape {
                        op: "concat",
                        lhs: nodes[first.id].value.shape().to_vec(),
                        rhs: v.shape().to_vec(),
                    });
                }
                width += v.cols();
            }
            let mut data = Vec::with_capacity(n * width);
            for i in 0..n {
                for p in parts {
                    data.extend_from_slice(nodes[p.id].value.row(i));
                }
            }
            let rg = parts.iter().any(|p| nodes[p.id].requires_grad);
            (Array::from_shape_vec(&[n, width], data)?, rg)
        };
        Ok(graph.push(value, Op::Concat(parts.iter().map(|p| p.id).collect()), rg))
    }

    /// Gathers rows by index.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Tensor<'g, T>, TensorError> {
        let rows = self.with_value(|a| a.rows());
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(TensorError::RowIndex { index: bad, rows });
        }
        if idx.is_empty() {
            return Err(TensorError::Empty { op: "select_rows" });
        }
        Ok(self.unary(Op::SelectRows(self.id, idx.to_vec()), |a| a.select_rows(idx)))
    }

    /// Sum of squared elements.
    pub fn sq_norm(&self) -> Tensor<'g, T> {
        self.unary(Op::SqNorm(self.id), |a| {
            Array::scalar(a.data().iter().map(|&x| x * x).sum())
        })
    }

    pub fn trace(&self) -> Result<Tensor<'g, T>, TensorError> {
        let (r, c) = self.with_value(|a| a.dims2())?;
        if r != c {
            return Err(TensorError::Shape {
                op: "trace",
                lhs: vec![r, c],
                rhs: vec![r, r],
            });
        }
        Ok(self.unary(Op::Trace(self.id), |a| {
            Array::scalar((0..r).map(|i| a.get(i, i)).sum())
        }))
    }

    /// Row-wise softmax.
    pub fn softmax(&self) -> Tensor<'g, T> {
        self.unary(Op::Softmax(self.id), |a| {
            let mut out = log_softmax_rows(a);
            for x in out.data_mut() {
                *x = x.exp();
            }
            out
        })
    }

    /// Row-wise log-softmax, stable for large scores.
    pub fn log_softmax(&self) -> Tensor<'g, T> {
        self.unary(Op::LogSoftmax(self.id), log_softmax_rows)
    }

    pub fn log(&self) -> Tensor<'g, T> {
        self.unary(Op::Log(self.id), |a| a.map(|x| x.ln()))
    }

    pub fn sqrt(&self) -> Tensor<'g, T> {
        self.unary(Op::Sqrt(self.id), |a| a.map(|x| x.sqrt()))
    }

    /// `x·Φ(x)` with the exact normal CDF.
    pub fn gelu(&self) -> Tensor<'g, T> {
        self.unary(Op::Gelu(self.id), |a| a.map(|x| x * normal_cdf(x)))
    }

    /// `ln(1 + eˣ)` in overflow-free form.
    pub fn softplus(&self) -> Tensor<'g, T> {
        self.unary(Op::Softplus(self.id), |a| a.map(softplus))
    }

    /// Identity forward; backward multiplies the incoming gradient by `-scale`.
    pub fn grad_reverse(&self, scale: T) -> Tensor<'g, T> {
        self.unary(Op::GradReverse(self.id, scale), |a| a.clone())
    }

    /// Subtracts each column's batch mean.
    pub fn center_cols(&self) -> Result<Tensor<'g, T>, TensorError> {
        let (n, _) = self.with_value(|a| a.dims2())?;
        if n < 2 {
            return Err(TensorError::BatchSize {
                op: "batch_standardize",
                n,
            });
        }
        Ok(self.unary(Op::CenterCols(self.id), |a| {
            let means = column_means(a);
            let c = a.cols();
            let mut out = a.clone();
            for (k, x) in out.data_mut().iter_mut().enumerate() {
                *x -= means[k % c];
            }
            out
        }))
    }
}

fn log_softmax_rows<T: Scalar>(a: &Array<T>) -> Array<T> {
    let c = a.cols();
    let mut out = a.clone();
    for row in out.data_mut().chunks_mut(c) {
        let mx = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = mx + row.iter().map(|&x| (x - mx).exp()).sum::<T>().ln();
        for x in row.iter_mut() {
            *x -= lse;
        }
    }
    out
}
