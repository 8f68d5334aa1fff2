//! Reverse-mode differentiation over a recorded sequence of vector operations.
//!
//! A [`Tape`] is filled during the forward pass: every primitive appends one
//! node holding its output value and the indices of its inputs. Nodes can only
//! refer to earlier nodes, so the tape is topologically ordered by construction
//! and [`Tape::backward`] is a single reverse sweep.

use crate::error::{Error, Result};

use super::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Handle to a tensor in a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named, ordered collection of learnable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            !self.names.contains(&name),
            "duplicate parameter name {name}"
        );
        self.names.push(name);
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }
}

/// Gradients aligned with a [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Gradients {
            tensors: params
                .tensors
                .iter()
                .map(|t| Tensor::zeros(t.shape()))
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors
            .iter()
            .map(Tensor::squared_norm)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Rescales all gradients so their global L2 norm is at most `max_norm`.
    /// Returns the norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            let k = max_norm / norm;
            for t in &mut self.tensors {
                t.data_mut().iter_mut().for_each(|g| *g *= k);
            }
        }
        norm
    }
}

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(ParamId),
    Affine { w: Var, x: Var, b: Var },
    MatVec { w: Var, x: Var },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Row { m: Var, row: usize },
    Softmax(Var),
    SumNormalize(Var),
    Sum(Var),
    SquaredDistance(Var, Var),
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// The computation record for one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    // Param nodes already on the tape, by ParamId index.
    params: Vec<Option<Var>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn vals(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    /// A constant leaf; it receives no gradient.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Input)
    }

    /// Places a parameter on the tape, reusing the node if it is already there.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> Var {
        if self.params.len() <= id.0 {
            self.params.resize(id.0 + 1, None);
        }
        if let Some(v) = self.params[id.0] {
            return v;
        }
        let v = self.push(params.get(id).clone(), Op::Param(id));
        self.params[id.0] = Some(v);
        v
    }

    /// `w · x + b` for `w: [m, n]`, `x: [n]`, `b: [m]`.
    pub fn affine(&mut self, w: Var, x: Var, b: Var) -> Result<Var> {
        let y = self.matvec_values(w, x)?;
        let bv = self.vals(b);
        if bv.len() != y.len() {
            return Err(Error::shape(format!(
                "affine bias has {} entries, output has {}",
                bv.len(),
                y.len()
            )));
        }
        let out: Vec<f64> = y.iter().zip(bv).map(|(a, c)| a + c).collect();
        Ok(self.push(Tensor::vector(out), Op::Affine { w, x, b }))
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let y = self.matvec_values(w, x)?;
        Ok(self.push(Tensor::vector(y), Op::MatVec { w, x }))
    }

    fn matvec_values(&self, w: Var, x: Var) -> Result<Vec<f64>> {
        let wt = self.value(w);
        let xv = self.vals(x);
        if wt.shape().len() != 2 || wt.cols() != xv.len() {
            return Err(Error::shape(format!(
                "cannot multiply {:?} by a vector of length {}",
                wt.shape(),
                xv.len()
            )));
        }
        Ok((0..wt.rows())
            .map(|r| wt.row(r).iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect())
    }

    fn check_same(&self, a: Var, b: Var, what: &str) -> Result<()> {
        let (la, lb) = (self.vals(a).len(), self.vals(b).len());
        if la != lb {
            return Err(Error::shape(format!("{what}: lengths {la} and {lb} differ")));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let out: Vec<f64> = self
            .vals(a)
            .iter()
            .zip(self.vals(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.value(a).shape().to_vec();
        self.push(Tensor::new(shape, out).expect("same shape"), op)
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let out: Vec<f64> = self.vals(a).iter().map(|&x| f(x)).collect();
        let shape = self.value(a).shape().to_vec();
        self.push(Tensor::new(shape, out).expect("same shape"), op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "add")?;
        Ok(self.zip_with(a, b, Op::Add(a, b), |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "sub")?;
        Ok(self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "mul")?;
        Ok(self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.map(a, Op::Scale(a, k), |x| k * x)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, Op::Tanh(a), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, Op::Sigmoid(a), logistic)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::shape("concat of zero tensors"));
        }
        let mut out = Vec::new();
        for &p in parts {
            out.extend_from_slice(self.vals(p));
        }
        Ok(self.push(Tensor::vector(out), Op::Concat(parts.to_vec())))
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.vals(x);
        if len == 0 || start + len > xv.len() {
            return Err(Error::shape(format!(
                "slice {start}..{} of length {}",
                start + len,
                xv.len()
            )));
        }
        let out = xv[start..start + len].to_vec();
        Ok(self.push(Tensor::vector(out), Op::Slice { x, start }))
    }

    /// Row `row` of a matrix, as a vector.
    pub fn row(&mut self, m: Var, row: usize) -> Result<Var> {
        let mt = self.value(m);
        if mt.shape().len() != 2 || row >= mt.rows() {
            return Err(Error::shape(format!("row {row} of {:?}", mt.shape())));
        }
        let out = mt.row(row).to_vec();
        Ok(self.push(Tensor::vector(out), Op::Row { m, row }))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let out = softmax(self.vals(a));
        self.push(Tensor::vector(out), Op::Softmax(a))
    }

    /// `a / Σ a`. Unstable when the sum is near zero.
    pub fn sum_normalize(&mut self, a: Var) -> Var {
        let s: f64 = self.vals(a).iter().sum();
        self.map(a, Op::SumNormalize(a), |x| x / s)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.vals(a).iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    /// `Σ (a − b)²` as a scalar.
    pub fn squared_distance(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "squared_distance")?;
        let s = self
            .vals(a)
            .iter()
            .zip(self.vals(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        Ok(self.push(Tensor::scalar(s), Op::SquaredDistance(a, b)))
    }

    /// Sums a list of scalar nodes.
    pub fn add_all(&mut self, terms: &[Var]) -> Result<Var> {
        let mut acc = *terms
            .first()
            .ok_or_else(|| Error::shape("add_all of zero terms"))?;
        for &t in &terms[1..] {
            acc = self.add(acc, t)?;
        }
        Ok(acc)
    }

    /// Gradient of the scalar `loss` with respect to every tensor in `params`.
    /// Parameters that never reached the tape get zero gradients.
    pub fn backward(&self, loss: Var, params: &ParamSet) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::zeros_like(params);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    let dst = out.get_mut(*id).data_mut();
                    for (d, x) in dst.iter_mut().zip(&g) {
                        *d += x;
                    }
                }
                Op::Affine { w, x, b } => {
                    self.back_matvec(&mut grads, *w, *x, &g);
                    accumulate(&mut grads, *b, &g);
                }
                Op::MatVec { w, x } => self.back_matvec(&mut grads, *w, *x, &g),
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, &g);
                    accumulate(&mut grads, *b, &g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, &g);
                    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                    accumulate(&mut grads, *b, &neg);
                }
                Op::Mul(a, b) => {
                    let ga: Vec<f64> = g.iter().zip(self.vals(*b)).map(|(x, y)| x * y).collect();
                    let gb: Vec<f64> = g.iter().zip(self.vals(*a)).map(|(x, y)| x * y).collect();
                    accumulate(&mut grads, *a, &ga);
                    accumulate(&mut grads, *b, &gb);
                }
                Op::Scale(a, k) => {
                    let ga: Vec<f64> = g.iter().map(|x| k * x).collect();
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Tanh(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(node.value.data())
                        .map(|(x, y)| x * (1.0 - y * y))
                        .collect();
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Sigmoid(a) => {
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(node.value.data())
                        .map(|(x, y)| x * y * (1.0 - y))
                        .collect();
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.vals(p).len();
                        accumulate(&mut grads, p, &g[offset..offset + n]);
                        offset += n;
                    }
                }
                Op::Slice { x, start } => {
                    let mut gx = vec![0.0; self.vals(*x).len()];
                    gx[*start..*start + g.len()].copy_from_slice(&g);
                    accumulate(&mut grads, *x, &gx);
                }
                Op::Row { m, row } => {
                    let mt = self.value(*m);
                    let mut gm = vec![0.0; mt.len()];
                    let c = mt.cols();
                    gm[row * c..(row + 1) * c].copy_from_slice(&g);
                    accumulate(&mut grads, *m, &gm);
                }
                Op::Softmax(a) => {
                    let s = node.value.data();
                    let dot: f64 = g.iter().zip(s).map(|(x, y)| x * y).sum();
                    let ga: Vec<f64> = g.iter().zip(s).map(|(x, y)| y * (x - dot)).collect();
                    accumulate(&mut grads, *a, &ga);
                }
                Op::SumNormalize(a) => {
                    // y = a / S; dL/da_j = (g_j − g·y) / S
                    let total: f64 = self.vals(*a).iter().sum();
                    let y = node.value.data();
                    let dot: f64 = g.iter().zip(y).map(|(x, v)| x * v).sum();
                    let ga: Vec<f64> = g.iter().map(|x| (x - dot) / total).collect();
                    accumulate(&mut grads, *a, &ga);
                }
                Op::Sum(a) => {
                    let ga = vec![g[0]; self.vals(*a).len()];
                    accumulate(&mut grads, *a, &ga);
                }
                Op::SquaredDistance(a, b) => {
                    let ga: Vec<f64> = self
                        .vals(*a)
                        .iter()
                        .zip(self.vals(*b))
                        .map(|(x, y)| 2.0 * g[0] * (x - y))
                        .collect();
                    let gb: Vec<f64> = ga.iter().map(|x| -x).collect();
                    accumulate(&mut grads, *a, &ga);
                    accumulate(&mut grads, *b, &gb);
                }
            }
        }
        Ok(out)
    }

    fn back_matvec(&self, grads: &mut [Option<Vec<f64>>], w: Var, x: Var, g: &[f64]) {
        let wt = self.value(w);
        let xv = self.vals(x);
        let cols = wt.cols();
        if self.needs_grad(w) {
            let mut gw = vec![0.0; wt.len()];
            for (r, gr) in g.iter().enumerate() {
                let row = &mut gw[r * cols..(r + 1) * cols];
                for (d, xi) in row.iter_mut().zip(xv) {
                    *d = gr * xi;
                }
            }
            accumulate(grads, w, &gw);
        }
        if self.needs_grad(x) {
            let mut gx = vec![0.0; cols];
            for (r, gr) in g.iter().enumerate() {
                for (d, wi) in gx.iter_mut().zip(wt.row(r)) {
                    *d += gr * wi;
                }
            }
            accumulate(grads, x, &gx);
        }
    }

    fn needs_grad(&self, v: Var) -> bool {
        !matches!(self.nodes[v.0].op, Op::Input)
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
    match &mut grads[v.0] {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, x)| *a += x),
        slot @ None => *slot = Some(g.to_vec()),
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable exp-normalization.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params_with(t: Tensor) -> (ParamSet, ParamId) {
        let mut p = ParamSet::new();
        let id = p.insert("p", t);
        (p, id)
    }

    #[test]
    fn constant_loss_has_zero_gradients() {
        let (params, _) = params_with(Tensor::vector(vec![1.0, 2.0]));
        let mut tape = Tape::new();
        let c = tape.input(Tensor::scalar(3.0));
        let g = tape.backward(c, &params).unwrap();
        assert!(g.get(ParamId(0)).data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sum_of_parameter_has_unit_gradient() {
        let (params, id) = params_with(Tensor::matrix(2, 3, vec![0.5; 6]).unwrap());
        let mut tape = Tape::new();
        let w = tape.param(&params, id);
        let r0 = tape.row(w, 0).unwrap();
        let r1 = tape.row(w, 1).unwrap();
        let both = tape.concat(&[r0, r1]).unwrap();
        let loss = tape.sum(both);
        let g = tape.backward(loss, &params).unwrap();
        assert_eq!(g.get(id).data(), &[1.0; 6]);
    }

    #[test]
    fn unused_parameter_gets_zero_gradient() {
        let mut params = ParamSet::new();
        let used = params.insert("used", Tensor::vector(vec![1.0, -1.0]));
        let unused = params.insert("unused", Tensor::vector(vec![4.0]));
        let mut tape = Tape::new();
        let u = tape.param(&params, used);
        let t = tape.tanh(u);
        let loss = tape.sum(t);
        let g = tape.backward(loss, &params).unwrap();
        assert_eq!(g.get(unused).data(), &[0.0]);
        assert!(g.get(used).data()[0] > 0.0);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let (params, id) = params_with(Tensor::vector(vec![1.0, 2.0]));
        let mut tape = Tape::new();
        let v = tape.param(&params, id);
        assert!(matches!(
            tape.backward(v, &params),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut tape = Tape::new();
        let a = tape.input(Tensor::vector(vec![1.0, 2.0]));
        let b = tape.input(Tensor::vector(vec![1.0]));
        assert!(matches!(tape.add(a, b), Err(Error::Shape(_))));
        let w = tape.input(Tensor::matrix(2, 3, vec![0.0; 6]).unwrap());
        assert!(matches!(tape.matvec(w, a), Err(Error::Shape(_))));
        assert!(tape.slice(a, 1, 2).is_err());
    }

    #[test]
    fn repeated_param_use_reuses_node() {
        let (params, id) = params_with(Tensor::vector(vec![3.0]));
        let mut tape = Tape::new();
        let a = tape.param(&params, id);
        let b = tape.param(&params, id);
        assert_eq!(a, b);
        let sq = tape.mul(a, b).unwrap();
        let g = tape.backward(sq, &params).unwrap();
        assert_eq!(g.get(id).data(), &[6.0]);
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let s = softmax(&[0.0, 0.0, 0.0]);
        for x in s {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_matches_direct_exp_normalize() {
        // e^1, e^2, e^3 over their sum
        let e = [1f64.exp(), 2f64.exp(), 3f64.exp()];
        let z: f64 = e.iter().sum();
        let s = softmax(&[1.0, 2.0, 3.0]);
        for (a, b) in s.iter().zip(e.iter().map(|x| x / z)) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!((s[0] - 0.09003057317038046).abs() < 1e-9);
        assert!((s[2] - 0.6652409557748219).abs() < 1e-9);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        for c in [-50.0, 0.0, 3.5, 700.0] {
            let base = softmax(&[0.0, 1.25, 0.0]);
            let shifted = softmax(&[c, c + 1.25, c]);
            for (a, b) in base.iter().zip(&shifted) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((shifted.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn clip_global_norm_rescales() {
        let (params, id) = params_with(Tensor::vector(vec![0.0, 0.0]));
        let mut g = Gradients::zeros_like(&params);
        g.get_mut(id).data_mut().copy_from_slice(&[3.0, 4.0]);
        let before = g.clip_global_norm(1.0);
        assert_eq!(before, 5.0);
        assert!((g.global_norm() - 1.0).abs() < 1e-12);
        assert!((g.get(id).data()[0] - 0.6).abs() < 1e-12);
    }
}
