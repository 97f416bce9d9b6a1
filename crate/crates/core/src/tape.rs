//! Define-by-run reverse-mode differentiation.
//!
//! A [`Tape`] records every primitive applied during a forward pass. Nodes are
//! appended in execution order, so the vector itself is a topological order and
//! [`Tape::backward`] is a single reverse sweep. A value consumed by several
//! downstream operations accumulates the sum of their partials. One tape per
//! forward/backward pass; tapes are never shared.

use crate::error::{Error, Result};
use crate::tensor::{self, Tensor};

/// Handle to a value recorded on a tape.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatVec { a: Var, x: Var },
    MatMul { a: Var, b: Var },
    Add { a: Var, b: Var },
    Sub { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { a: Var, s: f64 },
    ScaleVar { s: Var, v: Var },
    Tanh { a: Var },
    Sigmoid { a: Var },
    Softmax { a: Var },
    Slice { a: Var, start: usize },
    Dot { a: Var, b: Var },
    Concat { parts: Vec<Var> },
    Sum { a: Var },
}

struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one scalar output with respect to every tape value.
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> &Tensor {
        &self.grads[v.0]
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(Op::Leaf, value)
    }

    pub fn scalar(&mut self, v: f64) -> Var {
        self.leaf(Tensor::scalar(v))
    }

    pub fn matvec(&mut self, a: Var, x: Var) -> Result<Var> {
        let value = tensor::matvec(self.value(a), self.value(x))?;
        Ok(self.push(Op::MatVec { a, x }, value))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = tensor::matmul(self.value(a), self.value(b))?;
        Ok(self.push(Op::MatMul { a, b }, value))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = tensor::add(self.value(a), self.value(b))?;
        Ok(self.push(Op::Add { a, b }, value))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = tensor::sub(self.value(a), self.value(b))?;
        Ok(self.push(Op::Sub { a, b }, value))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = tensor::mul(self.value(a), self.value(b))?;
        Ok(self.push(Op::Mul { a, b }, value))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let value = tensor::scale(self.value(a), s)?;
        Ok(self.push(Op::Scale { a, s }, value))
    }

    /// Product of a scalar variable and a tensor variable.
    pub fn scale_var(&mut self, s: Var, v: Var) -> Result<Var> {
        let sv = self.value(s).item()?;
        let value = tensor::scale(self.value(v), sv)?;
        Ok(self.push(Op::ScaleVar { s, v }, value))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let value = tensor::tanh(self.value(a))?;
        Ok(self.push(Op::Tanh { a }, value))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = tensor::sigmoid(self.value(a))?;
        Ok(self.push(Op::Sigmoid { a }, value))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let value = tensor::softmax(self.value(a))?;
        Ok(self.push(Op::Softmax { a }, value))
    }

    /// Contiguous sub-range of a vector; gradients scatter back in place.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let src = self.value(a);
        if src.shape().len() != 1 || start + len > src.len() {
            return Err(Error::Shape(format!(
                "slice [{}, {}) of shape {:?}",
                start,
                start + len,
                src.shape()
            )));
        }
        let value = Tensor::vector(src.data()[start..start + len].to_vec());
        Ok(self.push(Op::Slice { a, start }, value))
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = Tensor::scalar(tensor::dot(self.value(a), self.value(b))?);
        value.check_finite("dot")?;
        Ok(self.push(Op::Dot { a, b }, value))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Shape("concat: no parts".into()));
        }
        let mut data = Vec::new();
        for p in parts {
            data.extend_from_slice(self.value(*p).data());
        }
        Ok(self.push(
            Op::Concat {
                parts: parts.to_vec(),
            },
            Tensor::vector(data),
        ))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(a).data().iter().sum());
        value.check_finite("sum")?;
        Ok(self.push(Op::Sum { a }, value))
    }

    /// Reverse sweep from a scalar output. Returns d(output)/d(v) for every
    /// recorded variable `v`.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = self.value(output);
        if !out.is_scalar() {
            return Err(Error::Contract(format!(
                "backward requires a scalar output, got shape {:?}",
                out.shape()
            )));
        }
        let mut grads: Vec<Tensor> = self
            .nodes
            .iter()
            .map(|n| Tensor::zeros(n.value.shape().to_vec()))
            .collect();
        grads[output.0].data_mut()[0] = 1.0;

        for idx in (0..=output.0).rev() {
            let g = grads[idx].clone();
            if g.data().iter().all(|v| *v == 0.0) {
                continue;
            }
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::MatVec { a, x } => {
                    let amat = self.value(*a);
                    let xvec = self.value(*x);
                    let (m, n) = (amat.rows()?, amat.cols()?);
                    {
                        let da = grads[a.0].data_mut();
                        for i in 0..m {
                            for j in 0..n {
                                da[i * n + j] += g.data()[i] * xvec.data()[j];
                            }
                        }
                    }
                    let dx = grads[x.0].data_mut();
                    for j in 0..n {
                        let mut acc = 0.0;
                        for i in 0..m {
                            acc += amat.data()[i * n + j] * g.data()[i];
                        }
                        dx[j] += acc;
                    }
                }
                Op::MatMul { a, b } => {
                    let amat = self.value(*a);
                    let bmat = self.value(*b);
                    let (m, k) = (amat.rows()?, amat.cols()?);
                    let n = bmat.cols()?;
                    {
                        let da = grads[a.0].data_mut();
                        for i in 0..m {
                            for l in 0..k {
                                let mut acc = 0.0;
                                for j in 0..n {
                                    acc += g.data()[i * n + j] * bmat.data()[l * n + j];
                                }
                                da[i * k + l] += acc;
                            }
                        }
                    }
                    let db = grads[b.0].data_mut();
                    for l in 0..k {
                        for j in 0..n {
                            let mut acc = 0.0;
                            for i in 0..m {
                                acc += amat.data()[i * k + l] * g.data()[i * n + j];
                            }
                            db[l * n + j] += acc;
                        }
                    }
                }
                Op::Add { a, b } => {
                    accumulate(&mut grads, *a, g.data());
                    accumulate(&mut grads, *b, g.data());
                }
                Op::Sub { a, b } => {
                    accumulate(&mut grads, *a, g.data());
                    let neg: Vec<f64> = g.data().iter().map(|v| -v).collect();
                    accumulate(&mut grads, *b, &neg);
                }
                Op::Mul { a, b } => {
                    let bv: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(self.value(*b).data())
                        .map(|(g, b)| g * b)
                        .collect();
                    accumulate(&mut grads, *a, &bv);
                    let av: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(self.value(*a).data())
                        .map(|(g, a)| g * a)
                        .collect();
                    accumulate(&mut grads, *b, &av);
                }
                Op::Scale { a, s } => {
                    let scaled: Vec<f64> = g.data().iter().map(|v| v * s).collect();
                    accumulate(&mut grads, *a, &scaled);
                }
                Op::ScaleVar { s, v } => {
                    let sval = self.value(*s).data()[0];
                    let ds: f64 = g
                        .data()
                        .iter()
                        .zip(self.value(*v).data())
                        .map(|(g, v)| g * v)
                        .sum();
                    grads[s.0].data_mut()[0] += ds;
                    let dv: Vec<f64> = g.data().iter().map(|gv| gv * sval).collect();
                    accumulate(&mut grads, *v, &dv);
                }
                Op::Tanh { a } => {
                    let y = &self.nodes[idx].value;
                    let dv: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(g, y)| g * (1.0 - y * y))
                        .collect();
                    accumulate(&mut grads, *a, &dv);
                }
                Op::Sigmoid { a } => {
                    let y = &self.nodes[idx].value;
                    let dv: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(g, y)| g * y * (1.0 - y))
                        .collect();
                    accumulate(&mut grads, *a, &dv);
                }
                Op::Softmax { a } => {
                    let y = &self.nodes[idx].value;
                    let inner: f64 = g.data().iter().zip(y.data()).map(|(g, y)| g * y).sum();
                    let dv: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(g, y)| y * (g - inner))
                        .collect();
                    accumulate(&mut grads, *a, &dv);
                }
                Op::Slice { a, start } => {
                    let da = grads[a.0].data_mut();
                    for (k, gv) in g.data().iter().enumerate() {
                        da[start + k] += gv;
                    }
                }
                Op::Dot { a, b } => {
                    let gs = g.data()[0];
                    let db: Vec<f64> = self.value(*b).data().iter().map(|v| gs * v).collect();
                    accumulate(&mut grads, *a, &db);
                    let da: Vec<f64> = self.value(*a).data().iter().map(|v| gs * v).collect();
                    accumulate(&mut grads, *b, &da);
                }
                Op::Concat { parts } => {
                    let mut offset = 0;
                    for p in parts.clone() {
                        let len = grads[p.0].len();
                        let chunk = g.data()[offset..offset + len].to_vec();
                        accumulate(&mut grads, p, &chunk);
                        offset += len;
                    }
                }
                Op::Sum { a } => {
                    let gs = g.data()[0];
                    let da = grads[a.0].data_mut();
                    for v in da.iter_mut() {
                        *v += gs;
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Tensor], target: Var, partial: &[f64]) {
    let dst = grads[target.0].data_mut();
    debug_assert_eq!(dst.len(), partial.len());
    for (d, p) in dst.iter_mut().zip(partial) {
        *d += p;
    }
}
