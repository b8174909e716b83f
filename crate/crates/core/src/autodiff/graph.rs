use std::borrow::Cow;

use super::dropout::{bernoulli_entropy, keep_gate};
use super::linalg::{col2im3_add, gemm, im2col3};
use super::{logistic, Error, ParamId, ParamStore, RegularizerTerm};
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

/// A differentiable operation defined outside this module.
///
/// The caller computes the forward value itself and hands it to
/// [`Graph::custom`] together with the op, which must later produce the
/// vector-Jacobian product for each input.
pub trait CustomOp: Send + Sync {
    fn name(&self) -> &'static str;

    /// Gradient with respect to each input (in the order passed to
    /// [`Graph::custom`]), given the gradient of the output. `None` means zero.
    fn backward(
        &self,
        inputs: &[&Tensor],
        output: &Tensor,
        grad_out: &Tensor,
    ) -> Vec<Option<Tensor>>;
}

/// Where gate noise comes from during a forward pass.
pub enum GateNoise<'a> {
    /// Fresh uniform draws from the given generator.
    Sample(&'a mut dyn rand::RngCore),
    /// Pre-drawn noise, one tensor per gate in forward order.
    Fixed(&'a [Tensor]),
    /// Gates replaced by their expectation.
    Expectation,
}

enum Op {
    Constant,
    Param(ParamId),
    Dense {
        x: Var,
        w: Var,
        b: Var,
    },
    Conv3x3 {
        x: Var,
        k: Var,
        b: Var,
    },
    Relu(Var),
    Sigmoid(Var),
    Add(Var, Var),
    Sum(Var),
    Scale(Var, f64),
    Gate {
        x: Var,
        logit: Var,
        keep: Vec<f64>,
        temperature: f64,
        broadcast: bool,
    },
    Regularizer(Vec<(Var, Var, RegularizerTerm)>),
    Custom {
        inputs: Vec<Var>,
        op: Box<dyn CustomOp>,
    },
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Per-parameter gradients returned by [`Graph::backward`].
#[derive(Clone, Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (ParamId(i), g)))
    }
}

/// Records a forward computation over parameters borrowed from a [`ParamStore`].
pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node<'p>>,
    param_nodes: Vec<Option<Var>>,
}

fn dim_err(op: &'static str, operand: &'static str, detail: String) -> Error {
    Error::Dimension {
        op,
        operand,
        detail,
    }
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'p, Tensor>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Non-differentiable input.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Cow::Owned(t), Op::Constant, false)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes[id.0] {
            return v;
        }
        let v = self.push(
            Cow::Borrowed(&self.params.get(id).value),
            Op::Param(id),
            true,
        );
        self.param_nodes[id.0] = Some(v);
        v
    }

    /// Affine map over the trailing axis: `[.., f_in] x [f_in, f_out] + [f_out]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var, Error> {
        let (xs, ws, bs) = (
            self.value(x).shape(),
            self.value(w).shape(),
            self.value(b).shape(),
        );
        if ws.len() != 2 {
            return Err(dim_err(
                "dense",
                "weights",
                format!("expected rank 2, got {ws:?}"),
            ));
        }
        let (f_in, f_out) = (ws[0], ws[1]);
        if xs.is_empty() || *xs.last().unwrap() != f_in {
            return Err(dim_err(
                "dense",
                "input",
                format!("trailing axis of {xs:?} must be {f_in}"),
            ));
        }
        if bs != [f_out] {
            return Err(dim_err(
                "dense",
                "bias",
                format!("expected [{f_out}], got {bs:?}"),
            ));
        }
        let rows = self.value(x).len() / f_in;
        let mut out_shape = xs[..xs.len() - 1].to_vec();
        out_shape.push(f_out);
        let mut out = vec![0.0; rows * f_out];
        gemm(
            rows,
            f_in,
            f_out,
            self.value(x).data(),
            false,
            self.value(w).data(),
            false,
            &mut out,
            false,
        );
        let bias = self.value(b).data();
        for row in out.chunks_exact_mut(f_out) {
            for (o, bb) in row.iter_mut().zip(bias) {
                *o += bb;
            }
        }
        let rg = self.requires(x) || self.requires(w) || self.requires(b);
        let value = Tensor::new(out_shape, out)?;
        Ok(self.push(Cow::Owned(value), Op::Dense { x, w, b }, rg))
    }

    /// 3×3 cross-correlation with zero ("same") padding over `[b, h, w, c_in]`.
    pub fn conv3x3(&mut self, x: Var, k: Var, b: Var) -> Result<Var, Error> {
        let (xs, ks, bs) = (
            self.value(x).shape(),
            self.value(k).shape(),
            self.value(b).shape(),
        );
        if xs.len() != 4 {
            return Err(dim_err(
                "conv3x3",
                "input",
                format!("expected [b, h, w, c], got {xs:?}"),
            ));
        }
        if ks.len() != 4 || ks[0] != 3 || ks[1] != 3 {
            return Err(dim_err(
                "conv3x3",
                "kernel",
                format!("expected [3, 3, c_in, c_out], got {ks:?}"),
            ));
        }
        if ks[2] != xs[3] {
            return Err(dim_err(
                "conv3x3",
                "kernel",
                format!(
                    "kernel expects {} input channels, input has {}",
                    ks[2], xs[3]
                ),
            ));
        }
        let c_out = ks[3];
        if bs != [c_out] {
            return Err(dim_err(
                "conv3x3",
                "bias",
                format!("expected [{c_out}], got {bs:?}"),
            ));
        }
        let (nb, h, w, c_in) = (xs[0], xs[1], xs[2], xs[3]);
        let hw = h * w;
        let mut out = vec![0.0; nb * hw * c_out];
        let mut cols = vec![0.0; hw * 9 * c_in];
        let xd = self.value(x).data();
        let kd = self.value(k).data();
        for item in 0..nb {
            im2col3(
                &xd[item * hw * c_in..(item + 1) * hw * c_in],
                h,
                w,
                c_in,
                &mut cols,
            );
            gemm(
                hw,
                9 * c_in,
                c_out,
                &cols,
                false,
                kd,
                false,
                &mut out[item * hw * c_out..(item + 1) * hw * c_out],
                false,
            );
        }
        let bias = self.value(b).data();
        for row in out.chunks_exact_mut(c_out) {
            for (o, bb) in row.iter_mut().zip(bias) {
                *o += bb;
            }
        }
        let rg = self.requires(x) || self.requires(k) || self.requires(b);
        let value = Tensor::new(vec![nb, h, w, c_out], out)?;
        Ok(self.push(Cow::Owned(value), Op::Conv3x3 { x, k, b }, rg))
    }

    /// Rectifier; the subgradient at exactly zero is zero.
    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| if v > 0.0 { v } else { 0.0 });
        let rg = self.requires(x);
        self.push(Cow::Owned(value), Op::Relu(x), rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).map(logistic);
        let rg = self.requires(x);
        self.push(Cow::Owned(value), Op::Sigmoid(x), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, Error> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(dim_err(
                "add",
                "rhs",
                format!("shapes {:?} and {:?} differ", ta.shape(), tb.shape()),
            ));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x + y)
            .collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.requires(a) || self.requires(b);
        Ok(self.push(Cow::Owned(value), Op::Add(a, b), rg))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        let rg = self.requires(x);
        self.push(Cow::Owned(value), Op::Sum(x), rg)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let value = self.value(x).map(|v| v * factor);
        let rg = self.requires(x);
        self.push(Cow::Owned(value), Op::Scale(x, factor), rg)
    }

    /// Concrete dropout gate.
    ///
    /// `logit` is a single-element value holding the logit of the drop rate.
    /// `noise` either matches the shape of `x` (one draw per element) or is
    /// `[x.shape[0], x.shape[last]]`, one draw per leading index and feature,
    /// shared across all middle axes (spatial positions). Every draw must lie
    /// strictly inside (0, 1).
    pub fn concrete_gate(
        &mut self,
        x: Var,
        logit: Var,
        noise: &Tensor,
        temperature: f64,
    ) -> Result<Var, Error> {
        if !(temperature > 0.0) {
            return Err(Error::Domain {
                op: "concrete_gate",
                detail: format!("temperature must be positive, got {temperature}"),
            });
        }
        if self.value(logit).len() != 1 {
            return Err(dim_err(
                "concrete_gate",
                "dropout logit",
                format!("expected a scalar, got {:?}", self.value(logit).shape()),
            ));
        }
        let xs = self.value(x).shape();
        let broadcast = if noise.shape() == xs {
            false
        } else if xs.len() >= 2 && noise.shape() == [xs[0], xs[xs.len() - 1]] {
            true
        } else {
            return Err(dim_err(
                "concrete_gate",
                "noise",
                format!(
                    "noise {:?} matches neither {xs:?} nor its [lead, feature] axes",
                    noise.shape()
                ),
            ));
        };
        if let Some(bad) = noise.data().iter().find(|&&u| !(u > 0.0 && u < 1.0)) {
            return Err(Error::Domain {
                op: "concrete_gate",
                detail: format!("noise value {bad} outside (0, 1)"),
            });
        }
        let l = self.value(logit).item();
        let p = logistic(l);
        let inv_keep = 1.0 / (1.0 - p);
        let keep: Vec<f64> = noise
            .data()
            .iter()
            .map(|&u| keep_gate(l, u, temperature))
            .collect();
        let tx = self.value(x);
        let scaled: Vec<f64> = keep.iter().map(|z| z * inv_keep).collect();
        let mut out = tx.data().to_vec();
        let (c, inner) = gate_layout(tx);
        for (k, row) in out.chunks_exact_mut(c).enumerate() {
            for (o, z) in row
                .iter_mut()
                .zip(gate_row(&scaled, k, broadcast, inner, c))
            {
                *o *= z;
            }
        }
        let value = Tensor::new(tx.shape().to_vec(), out)?;
        let rg = self.requires(x) || self.requires(logit);
        Ok(self.push(
            Cow::Owned(value),
            Op::Gate {
                x,
                logit,
                keep,
                temperature,
                broadcast,
            },
            rg,
        ))
    }

    /// Variational regularizer summed over dropout layers:
    /// `Σ weight_scale·‖W‖²/(1−p) − dropout_scale·K·H(p)`.
    pub fn regularizer(&mut self, terms: &[RegularizerTerm]) -> Var {
        let mut total = 0.0;
        let mut wired = Vec::with_capacity(terms.len());
        for term in terms {
            let w = self.param(term.weight);
            let l = self.param(term.logit);
            let p = logistic(self.value(l).item());
            let sq = self.value(w).sum_squares();
            total += term.weight_scale * sq / (1.0 - p)
                - term.dropout_scale * term.input_dim as f64 * bernoulli_entropy(p);
            wired.push((w, l, term.clone()));
        }
        let rg = !wired.is_empty();
        self.push(
            Cow::Owned(Tensor::scalar(total)),
            Op::Regularizer(wired),
            rg,
        )
    }

    /// Records an externally defined op whose forward value is `value`.
    pub fn custom(&mut self, inputs: &[Var], value: Tensor, op: Box<dyn CustomOp>) -> Var {
        let rg = inputs.iter().any(|&v| self.requires(v));
        self.push(
            Cow::Owned(value),
            Op::Custom {
                inputs: inputs.to_vec(),
                op,
            },
            rg,
        )
    }

    /// Back-propagates from `output`, seeding it with ones (so a
    /// non-scalar output is treated as the sum of its elements).
    pub fn backward(&self, output: Var) -> Gradients {
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Tensor::full(self.value(output).shape(), 1.0));
        let mut param_grads: Vec<Option<Tensor>> = vec![None; self.params.len()];

        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => accumulate(&mut param_grads, id.0, g),
                Op::Dense { x, w, b } => self.dense_backward(&mut grads, *x, *w, *b, &g),
                Op::Conv3x3 { x, k, b } => self.conv_backward(&mut grads, *x, *k, *b, &g),
                Op::Relu(x) => {
                    let mut d = g;
                    for (gv, &y) in d.data_mut().iter_mut().zip(node.value.data()) {
                        if y <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    accumulate(&mut grads, x.0, d);
                }
                Op::Sigmoid(x) => {
                    let mut d = g;
                    for (gv, &y) in d.data_mut().iter_mut().zip(node.value.data()) {
                        *gv *= y * (1.0 - y);
                    }
                    accumulate(&mut grads, x.0, d);
                }
                Op::Add(a, b) => {
                    if self.requires(*b) {
                        accumulate(&mut grads, b.0, g.clone());
                    }
                    accumulate(&mut grads, a.0, g);
                }
                Op::Sum(x) => {
                    let s = g.item();
                    accumulate(&mut grads, x.0, Tensor::full(self.value(*x).shape(), s));
                }
                Op::Scale(x, f) => accumulate(&mut grads, x.0, g.map(|v| v * f)),
                Op::Gate {
                    x,
                    logit,
                    keep,
                    temperature,
                    broadcast,
                } => self.gate_backward(&mut grads, *x, *logit, keep, *temperature, *broadcast, &g),
                Op::Regularizer(terms) => {
                    let up = g.item();
                    for (w, l, term) in terms {
                        let wv = self.value(*w);
                        let lv = self.value(*l).item();
                        let p = logistic(lv);
                        let dw = wv.map(|v| up * term.weight_scale * 2.0 * v / (1.0 - p));
                        // d/dl [‖W‖²/(1-p)] = ‖W‖²·p/(1-p);  d/dl H(p) = -l·p(1-p)
                        let dl = up
                            * (term.weight_scale * wv.sum_squares() * p / (1.0 - p)
                                + term.dropout_scale * term.input_dim as f64 * lv * p * (1.0 - p));
                        accumulate(&mut grads, w.0, dw);
                        accumulate(
                            &mut grads,
                            l.0,
                            Tensor::new(self.value(*l).shape().to_vec(), vec![dl]).unwrap(),
                        );
                    }
                }
                Op::Custom { inputs, op } => {
                    let vals: Vec<&Tensor> = inputs.iter().map(|v| self.value(*v)).collect();
                    let gs = op.backward(&vals, &node.value, &g);
                    for (v, gi) in inputs.iter().zip(gs) {
                        if let Some(gi) = gi {
                            if self.requires(*v) {
                                accumulate(&mut grads, v.0, gi);
                            }
                        }
                    }
                }
            }
        }
        Gradients { grads: param_grads }
    }

    fn dense_backward(&self, grads: &mut [Option<Tensor>], x: Var, w: Var, b: Var, g: &Tensor) {
        let (tx, tw) = (self.value(x), self.value(w));
        let (f_in, f_out) = (tw.shape()[0], tw.shape()[1]);
        let rows = tx.len() / f_in;
        if self.requires(w) {
            let mut dw = vec![0.0; f_in * f_out];
            gemm(
                f_in,
                rows,
                f_out,
                tx.data(),
                true,
                g.data(),
                false,
                &mut dw,
                false,
            );
            accumulate(grads, w.0, Tensor::new(tw.shape().to_vec(), dw).unwrap());
        }
        if self.requires(b) {
            accumulate(grads, b.0, column_sums(g.data(), f_out));
        }
        if self.requires(x) {
            let mut dx = vec![0.0; rows * f_in];
            gemm(
                rows,
                f_out,
                f_in,
                g.data(),
                false,
                tw.data(),
                true,
                &mut dx,
                false,
            );
            accumulate(grads, x.0, Tensor::new(tx.shape().to_vec(), dx).unwrap());
        }
    }

    fn conv_backward(&self, grads: &mut [Option<Tensor>], x: Var, k: Var, b: Var, g: &Tensor) {
        let (tx, tk) = (self.value(x), self.value(k));
        let xs = tx.shape();
        let (nb, h, w, c_in) = (xs[0], xs[1], xs[2], xs[3]);
        let c_out = tk.shape()[3];
        let hw = h * w;
        let need_k = self.requires(k);
        let need_x = self.requires(x);
        let mut dk = vec![0.0; 9 * c_in * c_out];
        let mut dx = if need_x {
            vec![0.0; tx.len()]
        } else {
            Vec::new()
        };
        let mut cols = vec![0.0; hw * 9 * c_in];
        for item in 0..nb {
            let gi = &g.data()[item * hw * c_out..(item + 1) * hw * c_out];
            if need_k {
                im2col3(
                    &tx.data()[item * hw * c_in..(item + 1) * hw * c_in],
                    h,
                    w,
                    c_in,
                    &mut cols,
                );
                gemm(9 * c_in, hw, c_out, &cols, true, gi, false, &mut dk, true);
            }
            if need_x {
                gemm(
                    hw,
                    c_out,
                    9 * c_in,
                    gi,
                    false,
                    tk.data(),
                    true,
                    &mut cols,
                    false,
                );
                col2im3_add(
                    &cols,
                    h,
                    w,
                    c_in,
                    &mut dx[item * hw * c_in..(item + 1) * hw * c_in],
                );
            }
        }
        if need_k {
            accumulate(grads, k.0, Tensor::new(tk.shape().to_vec(), dk).unwrap());
        }
        if self.requires(b) {
            accumulate(grads, b.0, column_sums(g.data(), c_out));
        }
        if need_x {
            accumulate(grads, x.0, Tensor::new(xs.to_vec(), dx).unwrap());
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn gate_backward(
        &self,
        grads: &mut [Option<Tensor>],
        x: Var,
        logit: Var,
        keep: &[f64],
        temperature: f64,
        broadcast: bool,
        g: &Tensor,
    ) {
        let tx = self.value(x);
        let p = logistic(self.value(logit).item());
        let inv_keep = 1.0 / (1.0 - p);
        let (c, inner) = gate_layout(tx);
        let mut dx = if self.requires(x) {
            vec![0.0; tx.len()]
        } else {
            Vec::new()
        };
        let mut dl = 0.0;
        for (k, (gr, xr)) in g
            .data()
            .chunks_exact(c)
            .zip(tx.data().chunks_exact(c))
            .enumerate()
        {
            let zr = gate_row(keep, k, broadcast, inner, c);
            for (j, ((&gv, &xv), &z)) in gr.iter().zip(xr).zip(zr).enumerate() {
                if !dx.is_empty() {
                    dx[k * c + j] = gv * z * inv_keep;
                }
                // out = x·z/(1-p); dz/dl = -z(1-z)/T; d(1/(1-p))/dl = p/(1-p)
                let dz = -z * (1.0 - z) / temperature;
                dl += gv * xv * (dz * inv_keep + z * p * inv_keep);
            }
        }
        if !dx.is_empty() {
            accumulate(grads, x.0, Tensor::new(tx.shape().to_vec(), dx).unwrap());
        }
        if self.requires(logit) {
            accumulate(
                grads,
                logit.0,
                Tensor::new(self.value(logit).shape().to_vec(), vec![dl]).unwrap(),
            );
        }
    }
}

/// Feature width and per-item element count of a gated tensor.
fn gate_layout(t: &Tensor) -> (usize, usize) {
    let c = t.last_dim().max(1);
    let inner = if t.shape().is_empty() {
        1
    } else {
        t.len() / t.shape()[0].max(1)
    };
    (c, inner)
}

/// Gate values for the `k`-th run of `c` features. Broadcast noise holds one
/// row per item, shared by every position of that item.
fn gate_row(gates: &[f64], k: usize, broadcast: bool, inner: usize, c: usize) -> &[f64] {
    let start = if broadcast {
        (k * c / inner) * c
    } else {
        k * c
    };
    &gates[start..start + c]
}

fn column_sums(data: &[f64], cols: usize) -> Tensor {
    let mut s = vec![0.0; cols];
    for row in data.chunks_exact(cols) {
        for (a, b) in s.iter_mut().zip(row) {
            *a += b;
        }
    }
    Tensor::vector(&s)
}

fn accumulate(slots: &mut [Option<Tensor>], i: usize, g: Tensor) {
    match &mut slots[i] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}
