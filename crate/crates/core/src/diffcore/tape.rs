//! Append-only expression tape with reverse-mode gradient replay.

use std::collections::HashMap;

use super::gemm::{gemm, gemm_nt_acc, gemm_tn_acc};
use super::{DiffError, ParamId, Tensor};

/// Index of a node on a [`Tape`]. Only meaningful for the tape that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf { param: Option<ParamId> },
    MatMul { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { a: NodeId, factor: f64 },
    Sin { a: NodeId },
    Cos { a: NodeId },
    Clamp01 { a: NodeId },
    Sum { a: NodeId },
}

struct Node {
    op: Op,
    shape: Vec<usize>,
    value: Vec<f64>,
    needs_grad: bool,
}

/// Gradients of a scalar loss with respect to every parameter leaf on the
/// tape. Parameters the loss never touched map to zero tensors.
#[derive(Debug, Default)]
pub struct GradientMap {
    grads: HashMap<ParamId, Tensor>,
}

impl GradientMap {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(&id)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads.iter().map(|(k, v)| (*k, v))
    }

    fn accumulate(&mut self, id: ParamId, shape: &[usize], data: Vec<f64>) {
        match self.grads.get_mut(&id) {
            Some(existing) => {
                for (dst, src) in existing.data_mut().iter_mut().zip(&data) {
                    *dst += src;
                }
            }
            None => {
                self.grads
                    .insert(id, Tensor::from_vec(shape.to_vec(), data).expect("shape"));
            }
        }
    }
}

/// Records forward primitives and replays them in reverse for gradients.
///
/// Node inputs always precede the node itself, so a single reverse sweep
/// is a valid topological order. Running several forward passes on one
/// tape is fine; their node ranges never interfere.
pub struct Tape {
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, value: Vec<f64>, needs_grad: bool) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            op,
            shape,
            value,
            needs_grad,
        });
        id
    }

    /// Put a tensor on the tape. Parameters (tensors with an id) become
    /// differentiable leaves; everything else is a constant.
    pub fn leaf(&mut self, t: &Tensor) -> NodeId {
        self.push(
            Op::Leaf {
                param: t.param_id(),
            },
            t.shape().to_vec(),
            t.data().to_vec(),
            t.requires_grad(),
        )
    }

    /// Constant leaf from raw parts; avoids building a `Tensor` first.
    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<f64>) -> NodeId {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.push(Op::Leaf { param: None }, shape, data, false)
    }

    fn require_matrix(&self, op: &'static str, id: NodeId) -> Result<(usize, usize), DiffError> {
        let s = self.shape(id);
        if s.len() != 2 {
            return Err(DiffError::NotAMatrix {
                op,
                shape: s.to_vec(),
            });
        }
        Ok((s[0], s[1]))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, DiffError> {
        let (m, ka) = self.require_matrix("matmul", a)?;
        let (kb, n) = self.require_matrix("matmul", b)?;
        if ka != kb {
            return Err(DiffError::ShapeMismatch {
                op: "matmul",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let mut out = vec![0.0; m * n];
        gemm(m, ka, n, self.value(a), self.value(b), &mut out);
        let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        Ok(self.push(Op::MatMul { a, b }, vec![m, n], out, ng))
    }

    fn binary(
        &mut self,
        op_name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<NodeId, DiffError> {
        if self.shape(a) != self.shape(b) {
            return Err(DiffError::ShapeMismatch {
                op: op_name,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let out: Vec<f64> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let ng = self.nodes[a.0].needs_grad || self.nodes[b.0].needs_grad;
        let shape = self.shape(a).to_vec();
        Ok(self.push(op, shape, out, ng))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, DiffError> {
        self.binary("add", a, b, |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, DiffError> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, DiffError> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul { a, b })
    }

    fn unary(&mut self, a: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let out: Vec<f64> = self.value(a).iter().map(|&x| f(x)).collect();
        let ng = self.nodes[a.0].needs_grad;
        let shape = self.shape(a).to_vec();
        self.push(op, shape, out, ng)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        self.unary(a, |x| x * factor, Op::Scale { a, factor })
    }

    pub fn sin(&mut self, a: NodeId) -> NodeId {
        self.unary(a, f64::sin, Op::Sin { a })
    }

    pub fn cos(&mut self, a: NodeId) -> NodeId {
        self.unary(a, f64::cos, Op::Cos { a })
    }

    pub fn clamp01(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| x.clamp(0.0, 1.0), Op::Clamp01 { a })
    }

    /// Sum of all elements; the result has shape `[1]`.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let total: f64 = self.value(a).iter().sum();
        let ng = self.nodes[a.0].needs_grad;
        self.push(Op::Sum { a }, vec![1], vec![total], ng)
    }

    /// Reverse sweep from a scalar loss node. Returns gradients for every
    /// parameter leaf on the tape (zeros where nothing flowed).
    pub fn backward(&self, loss: NodeId) -> Result<GradientMap, DiffError> {
        let loss_node = &self.nodes[loss.0];
        if loss_node.value.len() != 1 {
            return Err(DiffError::NonScalarLoss {
                shape: loss_node.shape.clone(),
            });
        }

        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..self.nodes.len()).rev() {
            if !self.nodes[i].needs_grad {
                grads[i] = None;
                continue;
            }
            // A node's gradient is complete once the sweep reaches it; take
            // it so the buffer is freed as soon as it is consumed.
            let g = match &self.nodes[i].op {
                Op::Leaf { .. } => continue,
                _ => match grads[i].take() {
                    Some(g) => g,
                    None => continue,
                },
            };
            self.backward_node(i, g, &mut grads);
        }

        let mut map = GradientMap::default();
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { param: Some(id) } = node.op {
                let data = grads[i].take().unwrap_or_else(|| vec![0.0; node.value.len()]);
                map.accumulate(id, &node.shape, data);
            }
        }
        Ok(map)
    }

    fn backward_node(&self, i: usize, g: Vec<f64>, grads: &mut [Option<Vec<f64>>]) {
        match self.nodes[i].op {
            Op::Leaf { .. } => unreachable!("leaves are skipped"),
            Op::MatMul { a, b } => {
                let (m, k) = (self.shape(a)[0], self.shape(a)[1]);
                let n = self.shape(b)[1];
                if self.nodes[a.0].needs_grad {
                    let da = ensure(&mut grads[a.0], m * k);
                    gemm_nt_acc(m, n, k, &g, self.value(b), da);
                }
                if self.nodes[b.0].needs_grad {
                    let db = ensure(&mut grads[b.0], k * n);
                    gemm_tn_acc(k, m, n, self.value(a), &g, db);
                }
            }
            Op::Add { a, b } => {
                if self.nodes[a.0].needs_grad {
                    axpy(&mut grads[a.0], 1.0, &g);
                }
                if self.nodes[b.0].needs_grad {
                    axpy(&mut grads[b.0], 1.0, &g);
                }
            }
            Op::Sub { a, b } => {
                if self.nodes[a.0].needs_grad {
                    axpy(&mut grads[a.0], 1.0, &g);
                }
                if self.nodes[b.0].needs_grad {
                    axpy(&mut grads[b.0], -1.0, &g);
                }
            }
            Op::Mul { a, b } => {
                if self.nodes[a.0].needs_grad {
                    acc_product(&mut grads[a.0], &g, self.value(b));
                }
                if self.nodes[b.0].needs_grad {
                    acc_product(&mut grads[b.0], &g, self.value(a));
                }
            }
            Op::Scale { a, factor } => {
                axpy(&mut grads[a.0], factor, &g);
            }
            Op::Sin { a } => {
                let va = self.value(a);
                acc_map(&mut grads[a.0], &g, |idx, gi| gi * va[idx].cos());
            }
            Op::Cos { a } => {
                let va = self.value(a);
                acc_map(&mut grads[a.0], &g, |idx, gi| -gi * va[idx].sin());
            }
            Op::Clamp01 { a } => {
                let va = self.value(a);
                acc_map(&mut grads[a.0], &g, |idx, gi| {
                    if va[idx] > 0.0 && va[idx] < 1.0 {
                        gi
                    } else {
                        0.0
                    }
                });
            }
            Op::Sum { a } => {
                let n = self.nodes[a.0].value.len();
                let gv = g[0];
                match &mut grads[a.0] {
                    Some(buf) => buf.iter_mut().for_each(|x| *x += gv),
                    None => grads[a.0] = Some(vec![gv; n]),
                }
            }
        }
    }
}

fn ensure(slot: &mut Option<Vec<f64>>, len: usize) -> &mut [f64] {
    if slot.is_none() {
        *slot = Some(vec![0.0; len]);
    }
    slot.as_mut().unwrap()
}

fn axpy(slot: &mut Option<Vec<f64>>, alpha: f64, x: &[f64]) {
    match slot {
        Some(buf) => {
            for (dst, src) in buf.iter_mut().zip(x) {
                *dst += alpha * src;
            }
        }
        None => {
            if alpha == 1.0 {
                *slot = Some(x.to_vec());
            } else {
                *slot = Some(x.iter().map(|v| alpha * v).collect());
            }
        }
    }
}

fn acc_product(slot: &mut Option<Vec<f64>>, g: &[f64], other: &[f64]) {
    match slot {
        Some(buf) => {
            for i in 0..buf.len() {
                buf[i] += g[i] * other[i];
            }
        }
        None => *slot = Some(g.iter().zip(other).map(|(a, b)| a * b).collect()),
    }
}

fn acc_map(slot: &mut Option<Vec<f64>>, g: &[f64], f: impl Fn(usize, f64) -> f64) {
    match slot {
        Some(buf) => {
            for (i, dst) in buf.iter_mut().enumerate() {
                *dst += f(i, g[i]);
            }
        }
        None => *slot = Some(g.iter().enumerate().map(|(i, &gi)| f(i, gi)).collect()),
    }
}
