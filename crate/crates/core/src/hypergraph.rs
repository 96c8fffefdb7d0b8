//! Soft hypergraphs over agents and the normalized hypergraph convolution.
//!
//! Vertices are agents, hyperedges are neighborhoods. Memberships live in
//! `[0, 1]`, so a vertex can belong partially to several hyperedges. The
//! convolution is
//!
//! ```text
//! X' = act(Dv^-1/2 H W De^-1 H^T Dv^-1/2 X P)
//! ```
//!
//! with `d_e[j] = sum_i H[i][j]` and `d_v[i] = sum_j w[j] H[i][j]`. Both are
//! clamped below by [`EPS_DEG`] before inversion.
//!
//! Every operator has a value-level entry point working on plain arrays and
//! an `*_on_tape` twin used inside the critic, where the same computation is
//! batched over `groups` independent hypergraphs stacked row-wise.

use ndarray::{Array1, Array2};

use crate::approximator::{mlp_forward, Activation, MlpSpec, ParamStore, Tape, Var};
use crate::error::{config_err, Error, Result};
use crate::scalar::Scalar;

/// Lower clamp applied to vertex and hyperedge degrees before inversion.
pub const EPS_DEG: f64 = 1e-8;

/// Hidden width of the incidence-generator MLP.
pub const GENERATOR_HIDDEN: usize = 64;

/// `N x M` soft membership of vertices (rows) in hyperedges (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix<T> {
    entries: Array2<T>,
}

impl<T: Scalar> IncidenceMatrix<T> {
    /// Validates that every entry is finite and lies in `[0, 1]`.
    pub fn new(entries: Array2<T>) -> Result<Self> {
        check_finite("incidence matrix", &entries)?;
        if let Some(((i, j), v)) = entries
            .indexed_iter()
            .find(|(_, &v)| v < T::zero() || v > T::one())
        {
            return Err(config_err(format!("incidence entry ({i}, {j}) = {v} outside [0, 1]")));
        }
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(config_err("incidence matrix needs at least one vertex and one hyperedge"));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &Array2<T> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<T> {
        self.entries
    }

    pub fn n_vertices(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_hyperedges(&self) -> usize {
        self.entries.ncols()
    }

    pub fn get(&self, vertex: usize, hyperedge: usize) -> T {
        self.entries[[vertex, hyperedge]]
    }

    pub fn row_sums(&self) -> Array1<T> {
        self.entries.sum_axis(ndarray::Axis(1))
    }

    /// True when every entry is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.entries
            .iter()
            .all(|&v| v == T::zero() || v == T::one())
    }
}

/// Positive per-hyperedge weights (the diagonal of `W`).
#[derive(Debug, Clone, PartialEq)]
pub struct HyperedgeWeights<T> {
    w: Array1<T>,
    pub learnable: bool,
}

impl<T: Scalar> HyperedgeWeights<T> {
    pub fn new(w: Array1<T>, learnable: bool) -> Result<Self> {
        check_finite("hyperedge weights", &w.view().insert_axis(ndarray::Axis(1)).to_owned())?;
        if let Some((j, v)) = w.iter().enumerate().find(|(_, &v)| v <= T::zero()) {
            return Err(config_err(format!("hyperedge weight {j} = {v} is not positive")));
        }
        Ok(Self { w, learnable })
    }

    pub fn ones(m: usize) -> Self {
        Self {
            w: Array1::ones(m),
            learnable: false,
        }
    }

    /// Weights from unconstrained parameters via `exp`.
    pub fn from_log(raw: &Array1<T>) -> Self {
        Self {
            w: raw.mapv(T::exp),
            learnable: true,
        }
    }

    pub fn values(&self) -> &Array1<T> {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    fn as_column(&self) -> Array2<T> {
        self.w.clone().insert_axis(ndarray::Axis(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVectors<T> {
    pub d_v: Array1<T>,
    pub d_e: Array1<T>,
}

/// Per-layer linear map `P` and the nonlinearity applied after the product.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayerParams<T> {
    pub p: Array2<T>,
    pub activation: Activation,
}

impl<T: Scalar> ConvLayerParams<T> {
    pub fn new(p: Array2<T>, activation: Activation) -> Self {
        Self { p, activation }
    }

    /// Checks `P` against declared `(F_in, F_out)`.
    pub fn check_dims(&self, f_in: usize, f_out: usize) -> Result<()> {
        if self.p.dim() != (f_in, f_out) {
            return Err(config_err(format!(
                "conv layer P is {:?}, expected ({f_in}, {f_out})",
                self.p.dim()
            )));
        }
        Ok(())
    }
}

fn check_finite<T: Scalar>(what: &str, a: &Array2<T>) -> Result<()> {
    match a.indexed_iter().find(|(_, v)| !v.is_finite()) {
        Some(((i, j), _)) => Err(Error::NonFinite {
            what: what.to_string(),
            index: vec![i, j],
        }),
        None => Ok(()),
    }
}

/// Raw degree sums. The [`EPS_DEG`] clamp is applied later, at inversion.
pub fn compute_degrees<T: Scalar>(
    h: &IncidenceMatrix<T>,
    w: &HyperedgeWeights<T>,
) -> Result<DegreeVectors<T>> {
    if w.len() != h.n_hyperedges() {
        return Err(config_err(format!(
            "{} hyperedge weights for {} hyperedges",
            w.len(),
            h.n_hyperedges()
        )));
    }
    let e = h.entries();
    let d_e = e.sum_axis(ndarray::Axis(0));
    let d_v = e.dot(w.values());
    Ok(DegreeVectors { d_v, d_e })
}

/// Records one convolution layer on `tape`.
///
/// `x` is `(groups*N) x F_in`, `h` is `(groups*N) x M`, `w` is an `M x 1`
/// column of positive weights shared by all groups and `p` is `F_in x F_out`.
pub fn convolve_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    h: Var,
    w: Var,
    p: Var,
    activation: Activation,
    groups: usize,
) -> Var {
    let d_v = tape.matmul(h, w);
    let dv_isqrt = tape.clamp_pow(d_v, EPS_DEG, -0.5);
    let d_e = tape.group_col_sum(h, groups);
    let de_inv = tape.clamp_pow(d_e, EPS_DEG, -1.0);
    let w_tiled = tape.tile_rows(w, groups);
    let edge_scale = tape.mul(w_tiled, de_inv);

    let xp = tape.matmul(x, p);
    let y = tape.scale_rows(xp, dv_isqrt);
    let edges = tape.group_at_b(h, y, groups);
    let edges = tape.scale_rows(edges, edge_scale);
    let back = tape.group_ab(h, edges, groups);
    let z = tape.scale_rows(back, dv_isqrt);
    tape.activate(z, activation)
}

/// Value-level convolution of one hypergraph.
pub fn hypergraph_convolve<T: Scalar>(
    x: &Array2<T>,
    h: &IncidenceMatrix<T>,
    w: &HyperedgeWeights<T>,
    layer: &ConvLayerParams<T>,
) -> Result<Array2<T>> {
    check_finite("vertex features", x)?;
    check_finite("conv weights", &layer.p)?;
    if x.nrows() != h.n_vertices() {
        return Err(config_err(format!(
            "{} feature rows for {} vertices",
            x.nrows(),
            h.n_vertices()
        )));
    }
    if w.len() != h.n_hyperedges() {
        return Err(config_err(format!(
            "{} hyperedge weights for {} hyperedges",
            w.len(),
            h.n_hyperedges()
        )));
    }
    layer.check_dims(x.ncols(), layer.p.ncols())?;
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let hv = tape.leaf(h.entries().clone());
    let wv = tape.leaf(w.as_column());
    let pv = tape.leaf(layer.p.clone());
    let out = convolve_on_tape(&mut tape, xv, hv, wv, pv, layer.activation, 1);
    Ok(tape.value(out).clone())
}

/// Generator MLP for `mlp_incidence`: one ReLU hidden layer, linear logits.
pub fn generator_spec(feature_dim: usize, hyperedges: usize) -> Result<MlpSpec> {
    if hyperedges < 1 {
        return Err(config_err("hyperedge count must be at least 1"));
    }
    MlpSpec::new(
        vec![feature_dim, GENERATOR_HIDDEN, hyperedges],
        Activation::Relu,
        Activation::Identity,
    )
}

/// Row-wise `softmax(MLP(features))`; rows are vertices, columns hyperedges.
pub fn mlp_incidence_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    spec: &MlpSpec,
    store: &ParamStore<T>,
    prefix: &str,
    features: Var,
) -> Result<Var> {
    let logits = mlp_forward(tape, spec, store, prefix, features)?;
    Ok(tape.softmax_rows(logits))
}

pub fn mlp_incidence<T: Scalar>(
    features: &Array2<T>,
    store: &ParamStore<T>,
    prefix: &str,
    hyperedges: usize,
) -> Result<IncidenceMatrix<T>> {
    let spec = generator_spec(features.ncols(), hyperedges)?;
    let mut tape = Tape::new();
    let x = tape.leaf(features.clone());
    let h = mlp_incidence_on_tape(&mut tape, &spec, store, prefix, x)?;
    IncidenceMatrix::new(tape.value(h).clone())
}

/// Attention incidence with one hyperedge per vertex.
///
/// For hyperedge `i`, `H[j][i] = softmax_m(f(x_i, x_m))` evaluated at `m = j`
/// with `f(x_i, x_m) = (W_k x_m) . (W_q x_i)`; the softmax runs over every
/// `m` including `i`, then `H[i][i]` is overwritten with exactly 1.
/// `wq` and `wk` are `D x F`.
pub fn attention_incidence_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    wq: Var,
    wk: Var,
    groups: usize,
) -> Var {
    let q = tape.matmul_bt(x, wq);
    let k = tape.matmul_bt(x, wk);
    let scores = tape.group_abt(q, k, groups);
    let attn = tape.softmax_rows(scores);
    let h = tape.group_transpose(attn, groups);
    tape.fill_block_diag_one(h, groups)
}

pub fn attention_incidence<T: Scalar>(
    x: &Array2<T>,
    wq: &Array2<T>,
    wk: &Array2<T>,
) -> Result<IncidenceMatrix<T>> {
    check_finite("vertex features", x)?;
    if wq.dim() != wk.dim() || wq.ncols() != x.ncols() {
        return Err(config_err(format!(
            "attention shapes: features {:?}, W_q {:?}, W_k {:?}",
            x.dim(),
            wq.dim(),
            wk.dim()
        )));
    }
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let q = tape.leaf(wq.clone());
    let k = tape.leaf(wk.clone());
    let h = attention_incidence_on_tape(&mut tape, xv, q, k, 1);
    IncidenceMatrix::new(tape.value(h).clone())
}

/// Hard 0/1 incidence with one hyperedge per group of vertex indices.
pub fn static_incidence<T: Scalar>(groups: &[Vec<usize>], n: usize) -> Result<IncidenceMatrix<T>> {
    if groups.is_empty() {
        return Err(config_err("static hypergraph needs at least one group"));
    }
    let mut h = Array2::zeros((n, groups.len()));
    for (j, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(config_err(format!("static hyperedge {j} is empty")));
        }
        for &v in g {
            if v >= n {
                return Err(config_err(format!(
                    "static hyperedge {j} names vertex {v}, but there are {n}"
                )));
            }
            h[[v, j]] = T::one();
        }
    }
    IncidenceMatrix::new(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.gen_range(lo..hi))
    }

    #[test]
    fn degrees_all_ones_pair() {
        let h = IncidenceMatrix::new(array![[1.0], [1.0]]).unwrap();
        let d = compute_degrees(&h, &HyperedgeWeights::ones(1)).unwrap();
        assert_eq!(d.d_v, array![1.0, 1.0]);
        assert_eq!(d.d_e, array![2.0]);
    }

    #[test]
    fn degrees_identity_weighted() {
        let h = IncidenceMatrix::new(Array2::<f64>::eye(3)).unwrap();
        let w = HyperedgeWeights::new(array![2.0, 2.0, 2.0], true).unwrap();
        let d = compute_degrees(&h, &w).unwrap();
        assert_eq!(d.d_v, array![2.0, 2.0, 2.0]);
        assert_eq!(d.d_e, array![1.0, 1.0, 1.0]);
    }

    #[test]
    fn degrees_match_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let h = rand_mat(&mut rng, 4, 3, 0.0, 1.0);
            let w: Array1<f64> = (0..3).map(|_| rng.gen_range(0.1..3.0)).collect();
            let d = compute_degrees(
                &IncidenceMatrix::new(h.clone()).unwrap(),
                &HyperedgeWeights::new(w.clone(), true).unwrap(),
            )
            .unwrap();
            for i in 0..4 {
                let mut dv = 0.0;
                for j in 0..3 {
                    dv += w[j] * h[[i, j]];
                }
                assert!((d.d_v[i] - dv).abs() <= 1e-12);
            }
            for j in 0..3 {
                let mut de = 0.0;
                for i in 0..4 {
                    de += h[[i, j]];
                }
                assert!((d.d_e[j] - de).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn degree_weight_length_mismatch() {
        let h = IncidenceMatrix::new(Array2::<f64>::eye(3)).unwrap();
        assert!(matches!(
            compute_degrees(&h, &HyperedgeWeights::ones(2)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn identity_hypergraph_returns_input() {
        let x = array![[1.0, -2.0], [0.5, 3.0], [7.0, 0.0]];
        let out = hypergraph_convolve(
            &x,
            &IncidenceMatrix::new(Array2::eye(3)).unwrap(),
            &HyperedgeWeights::ones(3),
            &ConvLayerParams::new(Array2::eye(2), Activation::Identity),
        )
        .unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn single_vertex_is_linear_map() {
        let x: Array2<f64> = array![[0.3, -1.2, 2.0]];
        let p = array![[1.0, 2.0], [0.5, -1.0], [0.25, 4.0]];
        let out = hypergraph_convolve(
            &x,
            &IncidenceMatrix::new(array![[1.0]]).unwrap(),
            &HyperedgeWeights::ones(1),
            &ConvLayerParams::new(p.clone(), Activation::Identity),
        )
        .unwrap();
        let expected = x.dot(&p);
        for (a, b) in out.iter().zip(expected.iter()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn non_finite_feature_reports_index() {
        let mut x = Array2::<f64>::zeros((2, 2));
        x[[1, 0]] = f64::INFINITY;
        let err = hypergraph_convolve(
            &x,
            &IncidenceMatrix::new(Array2::eye(2)).unwrap(),
            &HyperedgeWeights::ones(2),
            &ConvLayerParams::new(Array2::eye(2), Activation::Identity),
        )
        .unwrap_err();
        match err {
            Error::NonFinite { index, .. } => assert_eq!(index, vec![1, 0]),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn zero_logits_give_uniform_rows() {
        let spec = generator_spec(3, 4).unwrap();
        let mut store = ParamStore::<f64>::new();
        spec.init_params(&mut store, "gen", &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        store
            .set_value("gen.l1.weight", Array2::zeros((GENERATOR_HIDDEN, 4)))
            .unwrap();
        let feats = rand_mat(&mut ChaCha8Rng::seed_from_u64(2), 5, 3, -1.0, 1.0);
        let h = mlp_incidence(&feats, &store, "gen", 4).unwrap();
        assert!(h.entries().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn identical_rows_identical_memberships() {
        let spec = generator_spec(3, 3).unwrap();
        let mut store = ParamStore::<f64>::new();
        spec.init_params(&mut store, "gen", &mut ChaCha8Rng::seed_from_u64(5))
            .unwrap();
        let feats = array![[0.1, 0.2, 0.3], [0.9, -0.4, 0.0], [0.1, 0.2, 0.3]];
        let h = mlp_incidence(&feats, &store, "gen", 3).unwrap();
        assert_eq!(h.entries().row(0), h.entries().row(2));
    }

    #[test]
    fn zero_hyperedges_is_config_error() {
        assert!(matches!(generator_spec(3, 0), Err(Error::Config(_))));
    }

    #[test]
    fn attention_uniform_scores() {
        let x = Array2::from_elem((4, 3), 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let wq = rand_mat(&mut rng, 5, 3, -1.0, 1.0);
        let wk = rand_mat(&mut rng, 5, 3, -1.0, 1.0);
        let h = attention_incidence(&x, &wq, &wk).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect: f64 = if i == j { 1.0 } else { 0.25 };
                assert!((h.get(j, i) - expect).abs() <= 1e-15, "({j},{i})");
            }
        }
    }

    #[test]
    fn attention_single_agent() {
        let h = attention_incidence(&array![[0.3, -0.1]], &array![[1.0, 2.0]], &array![[0.5, 0.5]])
            .unwrap();
        assert_eq!(h.entries(), &array![[1.0]]);
    }

    #[test]
    fn static_groups_transcribe() {
        let h = static_incidence::<f64>(&[vec![0, 1], vec![1, 2]], 3).unwrap();
        assert_eq!(h.entries(), &array![[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        let one = static_incidence::<f64>(&[vec![0]], 1).unwrap();
        assert_eq!(one.entries(), &array![[1.0]]);
    }

    #[test]
    fn static_ablation_hypergraph() {
        let groups = vec![(0..6).collect(), vec![6, 7], (0..8).collect()];
        let h = static_incidence::<f64>(&groups, 8).unwrap();
        assert!(h.is_binary());
        assert_eq!(h.n_hyperedges(), 3);
        for v in 0..8 {
            assert_eq!(h.get(v, 0), if v < 6 { 1.0 } else { 0.0 });
            assert_eq!(h.get(v, 1), if v >= 6 { 1.0 } else { 0.0 });
            assert_eq!(h.get(v, 2), 1.0);
        }
    }

    #[test]
    fn static_rejects_bad_groups() {
        assert!(static_incidence::<f64>(&[vec![0], vec![]], 2).is_err());
        assert!(static_incidence::<f64>(&[vec![0, 2]], 2).is_err());
    }

    #[test]
    fn incidence_range_checked() {
        assert!(IncidenceMatrix::new(array![[1.5]]).is_err());
        assert!(IncidenceMatrix::new(array![[-0.1]]).is_err());
        assert!(HyperedgeWeights::new(array![1.0, 0.0], true).is_err());
    }
}
