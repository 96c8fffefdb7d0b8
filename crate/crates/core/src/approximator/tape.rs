//! Reverse-mode differentiation over dense 2-D arrays.
//!
//! A [`Tape`] records every intermediate value of a forward pass together
//! with the operation that produced it. [`Tape::backward`] then walks the
//! record in reverse and returns exact gradients for every node.
//!
//! Besides the usual dense primitives the tape supports *grouped* operators.
//! A batch of `g` independent hypergraphs over `n` vertices is stored as one
//! `(g*n) x m` matrix; grouped ops act on each `n`-row block separately, which
//! lets a whole minibatch of critics run as a handful of large matmuls.

use ndarray::{s, Array2, ArrayView2, Axis};

use crate::approximator::params::ParamStore;
use crate::scalar::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Element-wise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    ScaleRows(Var, Var),
    Relu(Var),
    Exp(Var),
    ClampPow { a: Var, floor: f64, power: f64 },
    SoftmaxRows(Var),
    ConcatCols(Vec<Var>),
    AssembleRows(Vec<(Var, Vec<usize>)>),
    SelectRows(Var, Vec<usize>),
    TileRows(Var, usize),
    GroupAtB(Var, Var, usize),
    GroupAB(Var, Var, usize),
    GroupABt(Var, Var, usize),
    GroupColSum(Var, usize),
    GroupTranspose(Var, usize),
    FillBlockDiag(Var, usize),
}

#[derive(Debug, Clone)]
struct Node<T> {
    value: Array2<T>,
    op: Op,
}

#[derive(Debug, Clone)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    params: Vec<(String, Var)>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<T>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<T> {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Constant or externally supplied input.
    pub fn leaf(&mut self, value: Array2<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Copies the named parameter onto the tape. Its gradient is routed back
    /// by [`Gradients::accumulate_into`].
    ///
    /// Panics if `name` is not in `store`; parameter names are fixed by the
    /// network layouts that created the store.
    pub fn param(&mut self, store: &ParamStore<T>, name: &str) -> Var {
        let value = store
            .value(name)
            .unwrap_or_else(|| panic!("parameter `{name}` not in store"))
            .clone();
        let v = self.leaf(value);
        self.params.push((name.to_string(), v));
        v
    }

    pub fn params(&self) -> &[(String, Var)] {
        &self.params
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).dot(self.value(b));
        self.push(out, Op::MatMul(a, b))
    }

    /// `a * b^T`
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).dot(&self.value(b).t());
        self.push(out, Op::MatMulBt(a, b))
    }

    /// Adds a `1 x c` row to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Var {
        debug_assert_eq!(self.shape(bias).0, 1);
        let out = self.value(a) + self.value(bias);
        self.push(out, Op::AddBias(a, bias))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) + self.value(b);
        self.push(out, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) * self.value(b);
        self.push(out, Op::Mul(a, b))
    }

    /// Multiplies row `r` of `a` by `v[r]`, with `v` an `r x 1` column.
    pub fn scale_rows(&mut self, a: Var, v: Var) -> Var {
        debug_assert_eq!(self.shape(v), (self.shape(a).0, 1));
        let out = self.value(a) * self.value(v);
        self.push(out, Op::ScaleRows(a, v))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(|x| if x > T::zero() { x } else { T::zero() });
        self.push(out, Op::Relu(a))
    }

    pub fn activate(&mut self, a: Var, act: Activation) -> Var {
        match act {
            Activation::Identity => a,
            Activation::Relu => self.relu(a),
        }
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).mapv(T::exp);
        self.push(out, Op::Exp(a))
    }

    /// `max(a, floor)^power`, element-wise. Clamped entries get zero gradient.
    pub fn clamp_pow(&mut self, a: Var, floor: f64, power: f64) -> Var {
        let (f, p) = (T::lit(floor), T::lit(power));
        let out = self.value(a).mapv(|x| clamp_pow_value(x, f, p));
        self.push(out, Op::ClampPow { a, floor, power })
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for mut row in out.rows_mut() {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            row.mapv_inplace(|x| (x - max).exp());
            let sum: T = row.iter().copied().sum();
            row.mapv_inplace(|x| x / sum);
        }
        self.push(out, Op::SoftmaxRows(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<ArrayView2<T>> = parts.iter().map(|&p| self.value(p).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views).expect("concat_cols: row counts differ");
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// Builds a `rows x c` matrix whose row `dest[k]` is row `k` of the given
    /// part. Every destination row must be written exactly once.
    /// Rows `idx` of `a`, in that order.
    pub fn select_rows(&mut self, a: Var, idx: Vec<usize>) -> Var {
        let out = self.value(a).select(Axis(0), &idx);
        self.push(out, Op::SelectRows(a, idx))
    }

    pub fn assemble_rows(&mut self, rows: usize, parts: Vec<(Var, Vec<usize>)>) -> Var {
        let cols = self.shape(parts[0].0).1;
        let mut out = Array2::zeros((rows, cols));
        let mut seen = vec![false; rows];
        for (v, dest) in &parts {
            let src = self.value(*v);
            assert_eq!(src.nrows(), dest.len(), "assemble_rows: part row count");
            for (k, &d) in dest.iter().enumerate() {
                assert!(!seen[d], "assemble_rows: row {d} written twice");
                seen[d] = true;
                out.row_mut(d).assign(&src.row(k));
            }
        }
        assert!(seen.iter().all(|&x| x), "assemble_rows: unfilled row");
        self.push(out, Op::AssembleRows(parts))
    }

    /// Stacks `a` vertically `times` times.
    pub fn tile_rows(&mut self, a: Var, times: usize) -> Var {
        let src = self.value(a);
        let views = vec![src.view(); times];
        let out = ndarray::concatenate(Axis(0), &views).expect("tile_rows");
        self.push(out, Op::TileRows(a, times))
    }

    /// Per group: `A_g^T B_g`. `a` is `(g*n) x m`, `b` is `(g*n) x f`; result
    /// is `(g*m) x f`.
    pub fn group_at_b(&mut self, a: Var, b: Var, groups: usize) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        let n = av.nrows() / groups;
        let (m, f) = (av.ncols(), bv.ncols());
        let (ad, bd) = (contiguous(av), contiguous(bv));
        let mut out = Array2::zeros((groups * m, f));
        let od = out.as_slice_mut().expect("fresh array");
        for g in 0..groups {
            let a = Strided::new(&ad[g * n * m..], 1, m);
            let b = Strided::new(&bd[g * n * f..], f, 1);
            gemm_acc(m, n, f, a, b, &mut od[g * m * f..]);
        }
        self.push(out, Op::GroupAtB(a, b, groups))
    }

    /// Per group: `A_g B_g`. `a` is `(g*n) x m`, `b` is `(g*m) x f`; result is
    /// `(g*n) x f`.
    pub fn group_ab(&mut self, a: Var, b: Var, groups: usize) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        let n = av.nrows() / groups;
        let (m, f) = (av.ncols(), bv.ncols());
        let (ad, bd) = (contiguous(av), contiguous(bv));
        let mut out = Array2::zeros((groups * n, f));
        let od = out.as_slice_mut().expect("fresh array");
        for g in 0..groups {
            let a = Strided::new(&ad[g * n * m..], m, 1);
            let b = Strided::new(&bd[g * m * f..], f, 1);
            gemm_acc(n, m, f, a, b, &mut od[g * n * f..]);
        }
        self.push(out, Op::GroupAB(a, b, groups))
    }

    /// Per group: `A_g B_g^T`. Both inputs `(g*n) x d`; result `(g*n) x n`.
    pub fn group_abt(&mut self, a: Var, b: Var, groups: usize) -> Var {
        let (av, bv) = (self.value(a), self.value(b));
        let n = av.nrows() / groups;
        let d = av.ncols();
        let (ad, bd) = (contiguous(av), contiguous(bv));
        let mut out = Array2::zeros((groups * n, n));
        let od = out.as_slice_mut().expect("fresh array");
        for g in 0..groups {
            let a = Strided::new(&ad[g * n * d..], d, 1);
            let b = Strided::new(&bd[g * n * d..], 1, d);
            gemm_acc(n, d, n, a, b, &mut od[g * n * n..]);
        }
        self.push(out, Op::GroupABt(a, b, groups))
    }

    /// Per group column sums of a `(g*n) x m` matrix, returned as a
    /// `(g*m) x 1` column.
    pub fn group_col_sum(&mut self, a: Var, groups: usize) -> Var {
        let av = self.value(a);
        let n = av.nrows() / groups;
        let m = av.ncols();
        let mut out = Array2::zeros((groups * m, 1));
        for g in 0..groups {
            for i in 0..n {
                for j in 0..m {
                    out[[g * m + j, 0]] += av[[g * n + i, j]];
                }
            }
        }
        self.push(out, Op::GroupColSum(a, groups))
    }

    /// Transposes each `n x n` block of a `(g*n) x n` matrix.
    pub fn group_transpose(&mut self, a: Var, groups: usize) -> Var {
        let av = self.value(a);
        let out = block_transpose(av, groups);
        self.push(out, Op::GroupTranspose(a, groups))
    }

    /// Overwrites the diagonal of each `n x n` block with one.
    pub fn fill_block_diag_one(&mut self, a: Var, groups: usize) -> Var {
        let mut out = self.value(a).clone();
        let n = out.ncols();
        for g in 0..groups {
            for i in 0..n {
                out[[g * n + i, i]] = T::one();
            }
        }
        self.push(out, Op::FillBlockDiag(a, groups))
    }

    /// Reverse pass from `root`, seeded with `seed = dL/d(root)`.
    pub fn backward(&self, root: Var, seed: Array2<T>) -> Gradients<T> {
        assert_eq!(seed.dim(), self.shape(root), "backward: seed shape");
        let mut grads: Vec<Option<Array2<T>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(seed);
        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.backprop_node(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn backprop_node(&self, idx: usize, g: &Array2<T>, grads: &mut [Option<Array2<T>>]) {
        let node = &self.nodes[idx];
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                acc(grads, *a, g.dot(&val(*b).t()));
                acc(grads, *b, val(*a).t().dot(g));
            }
            Op::MatMulBt(a, b) => {
                acc(grads, *a, g.dot(val(*b)));
                acc(grads, *b, g.t().dot(val(*a)));
            }
            Op::AddBias(a, bias) => {
                acc(grads, *a, g.clone());
                acc(grads, *bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::Add(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.clone());
            }
            Op::Mul(a, b) => {
                acc(grads, *a, g * val(*b));
                acc(grads, *b, g * val(*a));
            }
            Op::ScaleRows(a, v) => {
                acc(grads, *a, g * val(*v));
                let gv = (g * val(*a)).sum_axis(Axis(1)).insert_axis(Axis(1));
                acc(grads, *v, gv);
            }
            Op::Relu(a) => {
                let mut ga = g.clone();
                ndarray::Zip::from(&mut ga)
                    .and(val(*a))
                    .for_each(|x, &inp| {
                        if inp <= T::zero() {
                            *x = T::zero();
                        }
                    });
                acc(grads, *a, ga);
            }
            Op::Exp(a) => acc(grads, *a, g * &node.value),
            Op::ClampPow { a, floor, power } => {
                let (f, p) = (T::lit(*floor), T::lit(*power));
                let mut ga = g.clone();
                ndarray::Zip::from(&mut ga)
                    .and(val(*a))
                    .for_each(|x, &inp| {
                        *x = if inp > f {
                            *x * p * inp.powf(p - T::one())
                        } else {
                            T::zero()
                        };
                    });
                acc(grads, *a, ga);
            }
            Op::SoftmaxRows(a) => {
                let sm = &node.value;
                let mut ga = g * sm;
                for (mut row, srow) in ga.rows_mut().into_iter().zip(sm.rows()) {
                    let dot: T = row.iter().copied().sum();
                    ndarray::Zip::from(&mut row).and(&srow).for_each(|x, &sv| {
                        *x -= sv * dot;
                    });
                }
                acc(grads, *a, ga);
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let c = val(p).ncols();
                    acc(grads, p, g.slice(s![.., off..off + c]).to_owned());
                    off += c;
                }
            }
            Op::AssembleRows(parts) => {
                for (v, dest) in parts {
                    let mut gp = Array2::zeros(val(*v).dim());
                    for (k, &d) in dest.iter().enumerate() {
                        gp.row_mut(k).assign(&g.row(d));
                    }
                    acc(grads, *v, gp);
                }
            }
            Op::SelectRows(a, idx) => {
                let mut ga = Array2::zeros(val(*a).dim());
                for (k, &r) in idx.iter().enumerate() {
                    let mut row = ga.row_mut(r);
                    row += &g.row(k);
                }
                acc(grads, *a, ga);
            }
            Op::TileRows(a, times) => {
                let r = val(*a).nrows();
                let mut ga = Array2::zeros(val(*a).dim());
                for t in 0..*times {
                    ga += &g.slice(s![t * r..(t + 1) * r, ..]);
                }
                acc(grads, *a, ga);
            }
            Op::GroupAtB(a, b, groups) => {
                let (av, bv) = (val(*a), val(*b));
                let n = av.nrows() / groups;
                let (m, f) = (av.ncols(), bv.ncols());
                let (ad, bd, gd) = (contiguous(av), contiguous(bv), contiguous(g));
                let mut ga = Array2::zeros(av.dim());
                let mut gb = Array2::zeros(bv.dim());
                let (gas, gbs) = (ga.as_slice_mut().unwrap(), gb.as_slice_mut().unwrap());
                for gi in 0..*groups {
                    let gg = &gd[gi * m * f..];
                    // dA = B gg^T, dB = A gg
                    let bb = Strided::new(&bd[gi * n * f..], f, 1);
                    gemm_acc(n, f, m, bb, Strided::new(gg, 1, f), &mut gas[gi * n * m..]);
                    let aa = Strided::new(&ad[gi * n * m..], m, 1);
                    gemm_acc(n, m, f, aa, Strided::new(gg, f, 1), &mut gbs[gi * n * f..]);
                }
                acc(grads, *a, ga);
                acc(grads, *b, gb);
            }
            Op::GroupAB(a, b, groups) => {
                let (av, bv) = (val(*a), val(*b));
                let n = av.nrows() / groups;
                let (m, f) = (av.ncols(), bv.ncols());
                let (ad, bd, gd) = (contiguous(av), contiguous(bv), contiguous(g));
                let mut ga = Array2::zeros(av.dim());
                let mut gb = Array2::zeros(bv.dim());
                let (gas, gbs) = (ga.as_slice_mut().unwrap(), gb.as_slice_mut().unwrap());
                for gi in 0..*groups {
                    let gg = &gd[gi * n * f..];
                    // dA = gg B^T, dB = A^T gg
                    let bt = Strided::new(&bd[gi * m * f..], 1, f);
                    gemm_acc(n, f, m, Strided::new(gg, f, 1), bt, &mut gas[gi * n * m..]);
                    let at = Strided::new(&ad[gi * n * m..], 1, m);
                    gemm_acc(m, n, f, at, Strided::new(gg, f, 1), &mut gbs[gi * m * f..]);
                }
                acc(grads, *a, ga);
                acc(grads, *b, gb);
            }
            Op::GroupABt(a, b, groups) => {
                let (av, bv) = (val(*a), val(*b));
                let n = av.nrows() / groups;
                let d = av.ncols();
                let (ad, bd, gd) = (contiguous(av), contiguous(bv), contiguous(g));
                let mut ga = Array2::zeros(av.dim());
                let mut gb = Array2::zeros(bv.dim());
                let (gas, gbs) = (ga.as_slice_mut().unwrap(), gb.as_slice_mut().unwrap());
                for gi in 0..*groups {
                    let gg = &gd[gi * n * n..];
                    // dA = gg B, dB = gg^T A
                    let bb = Strided::new(&bd[gi * n * d..], d, 1);
                    gemm_acc(n, n, d, Strided::new(gg, n, 1), bb, &mut gas[gi * n * d..]);
                    let aa = Strided::new(&ad[gi * n * d..], d, 1);
                    gemm_acc(n, n, d, Strided::new(gg, 1, n), aa, &mut gbs[gi * n * d..]);
                }
                acc(grads, *a, ga);
                acc(grads, *b, gb);
            }
            Op::GroupColSum(a, groups) => {
                let av = val(*a);
                let n = av.nrows() / groups;
                let m = av.ncols();
                let mut ga = Array2::zeros(av.dim());
                for gi in 0..*groups {
                    for i in 0..n {
                        for j in 0..m {
                            ga[[gi * n + i, j]] = g[[gi * m + j, 0]];
                        }
                    }
                }
                acc(grads, *a, ga);
            }
            Op::GroupTranspose(a, groups) => {
                acc(grads, *a, block_transpose(g, *groups));
            }
            Op::FillBlockDiag(a, groups) => {
                let mut ga = g.clone();
                let n = ga.ncols();
                for gi in 0..*groups {
                    for i in 0..n {
                        ga[[gi * n + i, i]] = T::zero();
                    }
                }
                acc(grads, *a, ga);
            }
        }
    }
}

/// Row-major view with arbitrary strides, used to address transposed blocks
/// without copying.
#[derive(Clone, Copy)]
struct Strided<'a, T> {
    data: &'a [T],
    rs: usize,
    cs: usize,
}

impl<'a, T: Copy> Strided<'a, T> {
    fn new(data: &'a [T], rs: usize, cs: usize) -> Self {
        Self { data, rs, cs }
    }

    #[inline(always)]
    fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.rs + c * self.cs]
    }
}

/// `out[r, c] += sum_k a[r, k] b[k, c]` for an `rows x cols` block of a
/// row-major `out` with `cols` columns. Blocks here are a few rows tall,
/// where a plain loop beats a general matmul call.
#[inline]
fn gemm_acc<T: Scalar>(rows: usize, inner: usize, cols: usize, a: Strided<T>, b: Strided<T>, out: &mut [T]) {
    for r in 0..rows {
        let orow = &mut out[r * cols..(r + 1) * cols];
        for k in 0..inner {
            let av = a.at(r, k);
            if b.cs == 1 {
                let brow = &b.data[k * b.rs..k * b.rs + cols];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            } else {
                for (c, o) in orow.iter_mut().enumerate() {
                    *o += av * b.at(k, c);
                }
            }
        }
    }
}

fn contiguous<T: Scalar>(a: &Array2<T>) -> std::borrow::Cow<'_, [T]> {
    match a.as_slice() {
        Some(s) => std::borrow::Cow::Borrowed(s),
        None => std::borrow::Cow::Owned(a.iter().copied().collect()),
    }
}

/// Transposes each `n x n` block of a `(g*n) x n` matrix.
fn block_transpose<T: Scalar>(a: &Array2<T>, groups: usize) -> Array2<T> {
    let n = a.ncols();
    let mut out = Array2::zeros(a.dim());
    for g in 0..groups {
        for i in 0..n {
            for j in 0..n {
                out[[g * n + i, j]] = a[[g * n + j, i]];
            }
        }
    }
    out
}

#[inline]
pub(crate) fn clamp_pow_value<T: Scalar>(x: T, floor: T, power: T) -> T {
    let c = if x > floor { x } else { floor };
    if power == -T::one() {
        T::one() / c
    } else if power == T::lit(-0.5) {
        T::one() / c.sqrt()
    } else {
        c.powf(power)
    }
}

fn acc<T: Scalar>(grads: &mut [Option<Array2<T>>], v: Var, g: Array2<T>) {
    match &mut grads[v.0] {
        Some(existing) => *existing += &g,
        slot @ None => *slot = Some(g),
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Array2<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient with respect to `v`, or `None` if `v` does not influence the
    /// root.
    pub fn get(&self, v: Var) -> Option<&Array2<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    /// Adds the gradient of every parameter bound on `tape` into the
    /// matching gradient slot of `store`.
    pub fn accumulate_into(&self, tape: &Tape<T>, store: &mut ParamStore<T>) {
        for (name, v) in tape.params() {
            if let Some(g) = self.get(*v) {
                store.add_grad(name, g);
            }
        }
    }
}
