//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Graph`] is built fresh for every forward pass. Trainable tensors live in
//! a [`ParamStore`] and enter the graph through [`Graph::param`]; calling
//! [`Graph::backward`] on a `1 x 1` node returns the gradient of every
//! parameter that participated in the computation.

use std::collections::{BTreeMap, HashMap};

use ndarray::{s, Array2, Axis};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Handle to a tensor in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Named, trainable tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor. Panics if `name` is already taken.
    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter name {name}");
        let id = ParamId(self.values.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    /// Total number of scalar entries.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }
}

/// Parameter gradients produced by [`Graph::backward`].
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    grads: BTreeMap<ParamId, Array2<f64>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.grads.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Array2<f64>)> {
        self.grads.iter().map(|(k, v)| (*k, v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (ParamId, &mut Array2<f64>)> {
        self.grads.iter_mut().map(|(k, v)| (*k, v))
    }

    pub fn global_norm(&self) -> f64 {
        self.grads
            .values()
            .map(|g| g.iter().map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales every gradient so the global L2 norm is at most `max_norm`.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm.is_finite() {
            let factor = max_norm / norm;
            for g in self.grads.values_mut() {
                g.mapv_inplace(|x| x * factor);
            }
        }
        norm
    }
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    // Elementwise ops accept a `1 x c` right operand broadcast over rows.
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Square(Var),
    Exp(Var),
    SumAll(Var),
    SumCols(Var),
    MeanRows(Var),
    MaxRows(Var, Vec<usize>),
    GatherRows(Var, Vec<Option<usize>>),
    HCat(Vec<Var>),
    VCat(Vec<Var>),
    Reshape(Var),
    Transpose(Var),
    SliceCols(Var, usize, usize),
    LogSoftmaxRows(Var),
    Pick(Var, Vec<(usize, usize)>),
    MaskMul(Var, Array2<f64>),
    RowNormalize(Var),
    Unfold(Var, usize),
}

struct Node {
    op: Op,
    // `None` for parameter nodes, whose value stays in the store.
    value: Option<Array2<f64>>,
}

/// A single forward computation recorded for differentiation.
pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, Var>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self { params, nodes: Vec::new(), param_nodes: HashMap::new() }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        let node = &self.nodes[v.0];
        match (&node.op, &node.value) {
            (Op::Param(id), _) => self.params.get(*id),
            (_, Some(value)) => value,
            _ => unreachable!("non-parameter node without a value"),
        }
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    /// Value of a `1 x 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        let value = self.value(v);
        assert_eq!(value.dim(), (1, 1), "scalar() on non-scalar node");
        value[[0, 0]]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn push(&mut self, op: Op, value: Array2<f64>) -> Var {
        self.nodes.push(Node { op, value: Some(value) });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(Op::Constant, value)
    }

    pub fn scalar_constant(&mut self, x: f64) -> Var {
        self.constant(Array2::from_elem((1, 1), x))
    }

    /// The graph node for a parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_nodes.get(&id) {
            return v;
        }
        self.nodes.push(Node { op: Op::Param(id), value: None });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes.insert(id, v);
        v
    }

    /// Copies the value of `v` into a new node that blocks gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        self.push(Op::MatMul(a, b), value)
    }

    fn broadcast_binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Array2<f64> {
        let av = self.value(a);
        let bv = self.value(b);
        let (ar, ac) = av.dim();
        let (br, bc) = bv.dim();
        assert_eq!(ac, bc, "column mismatch {:?} vs {:?}", av.dim(), bv.dim());
        assert!(br == ar || br == 1, "row mismatch {:?} vs {:?}", av.dim(), bv.dim());
        let mut out = av.clone();
        if br == ar {
            ndarray::Zip::from(&mut out).and(bv).for_each(|o, &y| *o = f(*o, y));
        } else {
            let row = bv.row(0);
            for mut r in out.rows_mut() {
                ndarray::Zip::from(&mut r).and(&row).for_each(|o, &y| *o = f(*o, y));
            }
        }
        out
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.broadcast_binary(a, b, |x, y| x + y);
        self.push(Op::Add(a, b), value)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.broadcast_binary(a, b, |x, y| x - y);
        self.push(Op::Sub(a, b), value)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.broadcast_binary(a, b, |x, y| x * y);
        self.push(Op::Mul(a, b), value)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).mapv(|x| x * factor);
        self.push(Op::Scale(a, factor), value)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.max(0.0));
        self.push(Op::Relu(a), value)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        self.push(Op::Sigmoid(a), value)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::tanh);
        self.push(Op::Tanh(a), value)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x * x);
        self.push(Op::Square(a), value)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::exp);
        self.push(Op::Exp(a), value)
    }

    /// Row-wise softmax.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let ls = self.log_softmax_rows(a);
        self.exp(ls)
    }

    /// `1 x 1` sum of every entry.
    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(Op::SumAll(a), value)
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n)
    }

    /// `r x 1` row sums.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let value = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(Op::SumCols(a), value)
    }

    /// `1 x c` column means.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        assert!(av.nrows() > 0, "mean over zero rows");
        let value = av.mean_axis(Axis(0)).expect("nonempty").insert_axis(Axis(0));
        self.push(Op::MeanRows(a), value)
    }

    /// `1 x c` column maxima; ties resolve to the lowest row.
    pub fn max_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let (rows, cols) = av.dim();
        assert!(rows > 0, "max over zero rows");
        let mut arg = vec![0usize; cols];
        let mut value = Array2::zeros((1, cols));
        for c in 0..cols {
            let mut best = av[[0, c]];
            for r in 1..rows {
                if av[[r, c]] > best {
                    best = av[[r, c]];
                    arg[c] = r;
                }
            }
            value[[0, c]] = best;
        }
        self.push(Op::MaxRows(a, arg), value)
    }

    /// Selects rows by index; `None` yields a zero row.
    pub fn gather_rows(&mut self, a: Var, rows: Vec<Option<usize>>) -> Var {
        let av = self.value(a);
        let cols = av.ncols();
        let mut value = Array2::zeros((rows.len(), cols));
        for (i, r) in rows.iter().enumerate() {
            if let Some(r) = r {
                value.row_mut(i).assign(&av.row(*r));
            }
        }
        self.push(Op::GatherRows(a, rows), value)
    }

    pub fn row(&mut self, a: Var, r: usize) -> Var {
        self.gather_rows(a, vec![Some(r)])
    }

    pub fn hcat(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("hcat shape mismatch");
        self.push(Op::HCat(parts.to_vec()), value)
    }

    pub fn vcat(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(0), &views).expect("vcat shape mismatch");
        self.push(Op::VCat(parts.to_vec()), value)
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, a: Var, shape: (usize, usize)) -> Var {
        let flat: Vec<f64> = self.value(a).iter().copied().collect();
        let value = Array2::from_shape_vec(shape, flat).expect("reshape size mismatch");
        self.push(Op::Reshape(a), value)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).t().to_owned();
        self.push(Op::Transpose(a), value)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let value = self.value(a).slice(s![.., start..end]).to_owned();
        self.push(Op::SliceCols(a, start, end), value)
    }

    pub fn log_softmax_rows(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for mut r in value.rows_mut() {
            let m = r.fold(f64::NEG_INFINITY, |acc, &x| acc.max(x));
            let lse = m + r.iter().map(|&x| (x - m).exp()).sum::<f64>().ln();
            r.mapv_inplace(|x| x - lse);
        }
        self.push(Op::LogSoftmaxRows(a), value)
    }

    /// `n x 1` column of the selected `(row, col)` entries.
    pub fn pick(&mut self, a: Var, entries: Vec<(usize, usize)>) -> Var {
        let av = self.value(a);
        let value = Array2::from_shape_fn((entries.len(), 1), |(i, _)| av[entries[i]]);
        self.push(Op::Pick(a, entries), value)
    }

    /// Elementwise product with a fixed mask (used for dropout).
    pub fn mask_mul(&mut self, a: Var, mask: Array2<f64>) -> Var {
        let value = self.value(a) * &mask;
        self.push(Op::MaskMul(a, mask), value)
    }

    /// Scales every row to unit L2 norm; all-zero rows stay zero.
    pub fn row_normalize(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for mut r in value.rows_mut() {
            let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                r.mapv_inplace(|x| x / n);
            }
        }
        self.push(Op::RowNormalize(a), value)
    }

    /// Sliding windows of `k` consecutive rows, each flattened into one row:
    /// output row `i` is `[a_i, a_{i+1}, .., a_{i+k-1}]`.
    pub fn unfold(&mut self, a: Var, k: usize) -> Var {
        let av = self.value(a);
        let (rows, cols) = av.dim();
        assert!(rows >= k, "unfold needs at least {k} rows, got {rows}");
        let n = rows - k + 1;
        let mut value = Array2::zeros((n, k * cols));
        for i in 0..n {
            for j in 0..k {
                value.slice_mut(s![i, j * cols..(j + 1) * cols]).assign(&av.row(i + j));
            }
        }
        self.push(Op::Unfold(a, k), value)
    }

    /// Gradients of the `1 x 1` node `root` with respect to every parameter
    /// reachable from it.
    pub fn backward(&self, root: Var) -> Gradients {
        assert_eq!(self.shape(root), (1, 1), "backward from non-scalar node");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Array2::ones((1, 1)));

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Constant => {}
                Op::Param(_) => {
                    grads[idx] = Some(g);
                }
                Op::MatMul(a, b) => {
                    let da = g.dot(&self.value(*b).t());
                    let db = self.value(*a).t().dot(&g);
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, reduce_broadcast(&g, self.value(*b)));
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    let db = reduce_broadcast(&g, self.value(*b)).mapv(|x| -x);
                    accumulate(&mut grads, *b, db);
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let av = self.value(*a);
                    let bv = self.value(*b);
                    let da = if bv.nrows() == av.nrows() { &g * bv } else { &g * &bv.row(0) };
                    let db_full = &g * av;
                    accumulate(&mut grads, *b, reduce_broadcast(&db_full, bv));
                    accumulate(&mut grads, *a, da);
                }
                Op::Scale(a, f) => accumulate(&mut grads, *a, g.mapv(|x| x * f)),
                Op::Relu(a) => {
                    let mut d = g;
                    ndarray::Zip::from(&mut d)
                        .and(self.value(*a))
                        .for_each(|d, &x| if x <= 0.0 { *d = 0.0 });
                    accumulate(&mut grads, *a, d);
                }
                Op::Sigmoid(a) => {
                    let y = self.value(Var(idx));
                    let d = &g * &y.mapv(|s| s * (1.0 - s));
                    accumulate(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let y = self.value(Var(idx));
                    let d = &g * &y.mapv(|t| 1.0 - t * t);
                    accumulate(&mut grads, *a, d);
                }
                Op::Square(a) => {
                    let d = &g * &self.value(*a).mapv(|x| 2.0 * x);
                    accumulate(&mut grads, *a, d);
                }
                Op::Exp(a) => {
                    let d = &g * self.value(Var(idx));
                    accumulate(&mut grads, *a, d);
                }
                Op::SumAll(a) => {
                    let d = Array2::from_elem(self.shape(*a), g[[0, 0]]);
                    accumulate(&mut grads, *a, d);
                }
                Op::SumCols(a) => {
                    let (r, c) = self.shape(*a);
                    let d = Array2::from_shape_fn((r, c), |(i, _)| g[[i, 0]]);
                    accumulate(&mut grads, *a, d);
                }
                Op::MeanRows(a) => {
                    let (r, c) = self.shape(*a);
                    let inv = 1.0 / r as f64;
                    let d = Array2::from_shape_fn((r, c), |(_, j)| g[[0, j]] * inv);
                    accumulate(&mut grads, *a, d);
                }
                Op::MaxRows(a, arg) => {
                    let mut d = Array2::zeros(self.shape(*a));
                    for (c, &r) in arg.iter().enumerate() {
                        d[[r, c]] = g[[0, c]];
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::GatherRows(a, rows) => {
                    let target = a.0;
                    let shape = self.shape(*a);
                    let buf = grads[target].get_or_insert_with(|| Array2::zeros(shape));
                    for (i, r) in rows.iter().enumerate() {
                        if let Some(r) = r {
                            let mut dst = buf.row_mut(*r);
                            dst += &g.row(i);
                        }
                    }
                }
                Op::HCat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let w = self.shape(*p).1;
                        let d = g.slice(s![.., offset..offset + w]).to_owned();
                        accumulate(&mut grads, *p, d);
                        offset += w;
                    }
                }
                Op::VCat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let h = self.shape(*p).0;
                        let d = g.slice(s![offset..offset + h, ..]).to_owned();
                        accumulate(&mut grads, *p, d);
                        offset += h;
                    }
                }
                Op::Reshape(a) => {
                    let flat: Vec<f64> = g.iter().copied().collect();
                    let d = Array2::from_shape_vec(self.shape(*a), flat).expect("reshape");
                    accumulate(&mut grads, *a, d);
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.t().to_owned()),
                Op::SliceCols(a, start, end) => {
                    let mut d = Array2::zeros(self.shape(*a));
                    d.slice_mut(s![.., *start..*end]).assign(&g);
                    accumulate(&mut grads, *a, d);
                }
                Op::LogSoftmaxRows(a) => {
                    let y = self.value(Var(idx));
                    let mut d = g.clone();
                    for (mut dr, (gr, yr)) in
                        d.rows_mut().into_iter().zip(g.rows().into_iter().zip(y.rows()))
                    {
                        let gsum = gr.sum();
                        ndarray::Zip::from(&mut dr)
                            .and(&yr)
                            .for_each(|dv, &yv| *dv -= yv.exp() * gsum);
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::Pick(a, entries) => {
                    let mut d = Array2::zeros(self.shape(*a));
                    for (i, e) in entries.iter().enumerate() {
                        d[*e] += g[[i, 0]];
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::MaskMul(a, mask) => accumulate(&mut grads, *a, &g * mask),
                Op::RowNormalize(a) => {
                    let x = self.value(*a);
                    let y = self.value(Var(idx));
                    let mut d = Array2::zeros(x.dim());
                    for i in 0..x.nrows() {
                        let n = x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                        if n > 0.0 {
                            let gy: f64 = g.row(i).dot(&y.row(i));
                            let row = (&g.row(i) - &y.row(i).mapv(|v| v * gy)).mapv(|v| v / n);
                            d.row_mut(i).assign(&row);
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::Unfold(a, k) => {
                    let (rows, cols) = self.shape(*a);
                    let mut d = Array2::zeros((rows, cols));
                    for i in 0..g.nrows() {
                        for j in 0..*k {
                            let mut dst = d.row_mut(i + j);
                            dst += &g.slice(s![i, j * cols..(j + 1) * cols]);
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
            }
        }

        let mut out = Gradients::default();
        for (&id, &v) in &self.param_nodes {
            if let Some(g) = grads[v.0].take() {
                out.grads.insert(id, g);
            }
        }
        out
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn accumulate(grads: &mut [Option<Array2<f64>>], v: Var, delta: Array2<f64>) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &delta,
        slot @ None => *slot = Some(delta),
    }
}

/// Sums `g` over rows when `target` is a broadcast `1 x c` operand.
fn reduce_broadcast(g: &Array2<f64>, target: &Array2<f64>) -> Array2<f64> {
    if target.nrows() == g.nrows() {
        g.clone()
    } else {
        g.sum_axis(Axis(0)).insert_axis(Axis(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn numeric_grad(
        store: &mut ParamStore,
        id: ParamId,
        f: &dyn Fn(&ParamStore) -> f64,
    ) -> Array2<f64> {
        let h = 1e-5;
        let shape = store.get(id).dim();
        let mut out = Array2::zeros(shape);
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                let orig = store.get(id)[[i, j]];
                store.get_mut(id)[[i, j]] = orig + h;
                let up = f(store);
                store.get_mut(id)[[i, j]] = orig - h;
                let down = f(store);
                store.get_mut(id)[[i, j]] = orig;
                out[[i, j]] = (up - down) / (2.0 * h);
            }
        }
        out
    }

    fn check(store: &mut ParamStore, f: &dyn Fn(&mut Graph) -> Var) {
        let analytic = {
            let mut g = Graph::new(store);
            let root = f(&mut g);
            g.backward(root)
        };
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let num = numeric_grad(store, id, &|s| {
                let mut g = Graph::new(s);
                let root = f(&mut g);
                g.scalar(root)
            });
            let ana = analytic.get(id).cloned().unwrap_or_else(|| Array2::zeros(num.dim()));
            for (a, n) in ana.iter().zip(num.iter()) {
                assert!((a - n).abs() < 1e-6, "{}: analytic {a} vs numeric {n}", store.name(id));
            }
        }
    }

    #[test]
    fn elementwise_and_broadcast_grads() {
        let mut store = ParamStore::new();
        let a = store.add("a", array![[0.3, -0.7, 1.1], [0.5, 0.2, -0.4]]);
        let b = store.add("b", array![[0.9, -0.1, 0.25]]);
        check(&mut store, &|g| {
            let av = g.param(a);
            let bv = g.param(b);
            let x = g.mul(av, bv);
            let y = g.sub(x, bv);
            let z = g.add(y, av);
            let t = g.tanh(z);
            let t = g.softmax_rows(t);
            let s = g.sigmoid(t);
            let q = g.square(s);
            g.sum_all(q)
        });
    }

    #[test]
    fn structural_op_grads() {
        let mut store = ParamStore::new();
        let a = store.add("a", array![[0.3, -0.7], [0.5, 0.2], [1.5, -0.9]]);
        let w = store.add("w", array![[0.4, 0.1], [-0.3, 0.8], [0.2, -0.6], [0.7, 0.05]]);
        check(&mut store, &|g| {
            let av = g.param(a);
            let wv = g.param(w);
            let gathered = g.gather_rows(av, vec![Some(2), None, Some(0), Some(0)]);
            let un = g.unfold(gathered, 2);
            let m = g.matmul(un, wv);
            let mx = g.max_rows(m);
            let tr = g.transpose(m);
            let mr = g.mean_rows(tr);
            let sl = g.slice_cols(mr, 1, 3);
            let cat = g.hcat(&[mx, sl]);
            let rs = g.reshape(cat, (2, 2));
            let lsm = g.log_softmax_rows(rs);
            let p = g.pick(lsm, vec![(0, 1), (1, 1), (1, 0)]);
            let nrm = g.row_normalize(av);
            let sc = g.sum_cols(nrm);
            let st = g.transpose(sc);
            let v = g.vcat(&[st, st]);
            let s1 = g.sum_all(p);
            let s2 = g.mean_all(v);
            g.add(s1, s2)
        });
    }

    #[test]
    fn shared_param_node_accumulates() {
        let mut store = ParamStore::new();
        let a = store.add("a", array![[2.0]]);
        let mut g = Graph::new(&store);
        let x = g.param(a);
        let y = g.param(a);
        assert_eq!(x, y);
        let z = g.mul(x, y);
        let grads = g.backward(z);
        assert_eq!(grads.get(a).unwrap()[[0, 0]], 4.0);
    }

    #[test]
    fn row_normalize_keeps_zero_rows() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g.constant(array![[0.0, 0.0], [3.0, 4.0]]);
        let y = g.row_normalize(x);
        assert_eq!(g.value(y), &array![[0.0, 0.0], [0.6, 0.8]]);
    }

    #[test]
    fn clipping_bounds_global_norm() {
        let mut grads = Gradients::default();
        grads.grads.insert(ParamId(0), array![[3.0, 4.0]]);
        let before = grads.clip_global_norm(1.0);
        assert_eq!(before, 5.0);
        assert!((grads.global_norm() - 1.0).abs() < 1e-12);
    }
}
