//! Message-passing layers, readouts and small dense blocks.

use std::sync::Arc;

use jamloc_core::graph::MeasurementGraph;
use ndarray::Array2;
use rand::Rng;

use crate::params::{xavier_uniform, ParamId, ParamStore};
use crate::tape::{Tape, Var};

pub const LEAKY_SLOPE: f64 = 0.2;
const STD_EPS: f64 = 1e-5;

/// Edge lists and per-node constants of one graph, as seen by a model.
#[derive(Debug, Clone)]
pub struct GraphInput {
    pub x: Array2<f64>,
    pub src: Arc<[usize]>,
    pub dst: Arc<[usize]>,
    pub weights: Arc<[f64]>,
    pub num_nodes: usize,
    pub measurement_rows: Arc<[usize]>,
    pub all_rows: Arc<[usize]>,
    pub supernode: Option<usize>,
    pub wcl: [f64; 5],
    pub target: Option<[f64; 5]>,
    pub in_degree: Arc<[f64]>,
    gcn_edge: Arc<[f64]>,
    gcn_self: Arc<[f64]>,
}

/// How supernode edges enter message passing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnEdges {
    Directed,
    Undirected,
    None,
}

impl GraphInput {
    /// `keep_supernode = false` strips a supernode the graph may carry.
    pub fn new(g: &MeasurementGraph, keep_supernode: bool, sn_edges: SnEdges) -> Self {
        let n_meas = g.num_measurements;
        let sn = if keep_supernode {
            g.supernode_index
        } else {
            None
        };
        let num_nodes = if sn.is_some() { g.num_nodes() } else { n_meas };
        let x = Array2::from_shape_vec(
            (num_nodes, g.features.cols),
            g.features.data[..num_nodes * g.features.cols].to_vec(),
        )
        .expect("feature shape");

        let mut edges: Vec<(usize, usize, f64)> = Vec::with_capacity(g.edges.len() * 2);
        for (&(s, d), &w) in g.edges.iter().zip(&g.edge_weights) {
            let touches_sn = s >= n_meas || d >= n_meas;
            if !touches_sn {
                edges.push((s, d, w));
            } else if sn.is_some() {
                match sn_edges {
                    SnEdges::Directed => edges.push((s, d, w)),
                    SnEdges::Undirected => {
                        edges.push((s, d, w));
                        edges.push((d, s, w));
                    }
                    SnEdges::None => {}
                }
            }
        }
        let src: Arc<[usize]> = edges.iter().map(|e| e.0).collect();
        let dst: Arc<[usize]> = edges.iter().map(|e| e.1).collect();
        let weights: Arc<[f64]> = edges.iter().map(|e| e.2).collect();

        let mut in_degree = vec![0.0; num_nodes];
        let mut wdeg = vec![1.0; num_nodes];
        for &(_, d, w) in &edges {
            in_degree[d] += 1.0;
            wdeg[d] += w;
        }
        let gcn_edge: Arc<[f64]> = edges
            .iter()
            .map(|&(s, d, w)| w / (wdeg[s] * wdeg[d]).sqrt())
            .collect();
        let gcn_self: Arc<[f64]> = wdeg.iter().map(|d| 1.0 / d).collect();

        Self {
            x,
            src,
            dst,
            weights,
            num_nodes,
            measurement_rows: (0..n_meas).collect(),
            all_rows: (0..num_nodes).collect(),
            supernode: sn,
            wcl: g.wcl_estimate.to_array(),
            target: g.target.map(|t| t.to_array()),
            in_degree: in_degree.into(),
            gcn_edge,
            gcn_self,
        }
    }

    pub fn num_edges(&self) -> usize {
        self.src.len()
    }

    /// Same graph with nodes relabelled: new node `perm[i]` is old node `i`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.num_nodes;
        let mut x = Array2::zeros(self.x.raw_dim());
        for i in 0..n {
            x.row_mut(perm[i]).assign(&self.x.row(i));
        }
        let remap = |v: &[usize]| -> Arc<[usize]> { v.iter().map(|&i| perm[i]).collect() };
        let mut inv_deg = vec![0.0; n];
        let mut self_c = vec![0.0; n];
        for i in 0..n {
            inv_deg[perm[i]] = self.in_degree[i];
            self_c[perm[i]] = self.gcn_self[i];
        }
        Self {
            x,
            src: remap(&self.src),
            dst: remap(&self.dst),
            weights: self.weights.clone(),
            num_nodes: n,
            measurement_rows: remap(&self.measurement_rows),
            all_rows: self.all_rows.clone(),
            supernode: self.supernode.map(|s| perm[s]),
            wcl: self.wcl,
            target: self.target,
            in_degree: inv_deg.into(),
            gcn_edge: self.gcn_edge.clone(),
            gcn_self: self_c.into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            w: store.xavier(format!("{name}.weight"), fan_in, fan_out, rng),
            b: store.zeros(format!("{name}.bias"), 1, fan_out),
        }
    }

    pub fn forward(&self, t: &mut Tape, x: Var) -> Var {
        let (w, b) = (t.param(self.w), t.param(self.b));
        let y = t.matmul(x, w);
        t.add_bias(y, b)
    }
}

/// Edge-weighted multi-head graph attention.
#[derive(Debug, Clone)]
pub struct GatLayer {
    pub w: ParamId,
    pub att_src: ParamId,
    pub att_dst: ParamId,
    pub bias: ParamId,
    pub heads: usize,
    pub head_dim: usize,
    /// Concatenate heads (hidden layers) or average them (final layer).
    pub concat: bool,
}

impl GatLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        heads: usize,
        head_dim: usize,
        concat: bool,
        rng: &mut R,
    ) -> Self {
        let hd = heads * head_dim;
        let out = if concat { hd } else { head_dim };
        Self {
            w: store.xavier(format!("{name}.weight"), fan_in, hd, rng),
            att_src: store.add(
                format!("{name}.att_src"),
                xavier_uniform(heads, head_dim, (1, hd), rng),
            ),
            att_dst: store.add(
                format!("{name}.att_dst"),
                xavier_uniform(heads, head_dim, (1, hd), rng),
            ),
            bias: store.zeros(format!("{name}.bias"), 1, out),
            heads,
            head_dim,
            concat,
        }
    }

    /// Returns the activated output and the `E×H` attention coefficients.
    pub fn forward(&self, t: &mut Tape, x: Var, g: &GraphInput) -> (Var, Var) {
        let w = t.param(self.w);
        let wh = t.matmul(x, w);
        let (a_s, a_d) = (t.param(self.att_src), t.param(self.att_dst));
        let es = t.head_dot(wh, a_s, self.heads);
        let ed = t.head_dot(wh, a_d, self.heads);
        let ls = t.gather_rows(es, g.src.clone());
        let ld = t.gather_rows(ed, g.dst.clone());
        let logits = t.add(ls, ld);
        let logits = t.leaky_relu(logits, LEAKY_SLOPE);
        let alpha = t.edge_softmax(logits, g.dst.clone(), &g.weights, g.num_nodes);
        let msg = t.gather_rows(wh, g.src.clone());
        let msg = t.head_scale(msg, alpha, self.heads);
        let mut agg = t.scatter_add_rows(msg, g.dst.clone(), g.num_nodes);
        if !self.concat {
            agg = t.head_mean(agg, self.heads);
        }
        let b = t.param(self.bias);
        let out = t.add_bias(agg, b);
        (t.relu(out), alpha)
    }
}

/// Symmetric-normalized convolution with self loops.
#[derive(Debug, Clone)]
pub struct GcnLayer {
    pub lin: Linear,
}

impl GcnLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            lin: Linear::new(store, name, fan_in, fan_out, rng),
        }
    }

    pub fn forward(&self, t: &mut Tape, x: Var, g: &GraphInput) -> Var {
        let w = t.param(self.lin.w);
        let xw = t.matmul(x, w);
        let msg = t.gather_rows(xw, g.src.clone());
        let msg = t.row_scale(msg, g.gcn_edge.clone());
        let agg = t.scatter_add_rows(msg, g.dst.clone(), g.num_nodes);
        let own = t.row_scale(xw, g.gcn_self.clone());
        let h = t.add(agg, own);
        let b = t.param(self.lin.b);
        let h = t.add_bias(h, b);
        t.relu(h)
    }
}

/// Principal neighbourhood aggregation: mean, max and std of edge-weighted
/// messages under identity, amplification and attenuation degree scalers.
#[derive(Debug, Clone)]
pub struct PnaLayer {
    pub msg: ParamId,
    pub post: Linear,
    pub fan_out: usize,
}

impl PnaLayer {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            msg: store.xavier(format!("{name}.msg"), fan_in, fan_out, rng),
            post: Linear::new(
                store,
                &format!("{name}.post"),
                fan_in + 9 * fan_out,
                fan_out,
                rng,
            ),
            fan_out,
        }
    }

    pub fn forward(&self, t: &mut Tape, x: Var, g: &GraphInput, delta: f64) -> Var {
        let w = t.param(self.msg);
        let m = t.matmul(x, w);
        let me = t.gather_rows(m, g.src.clone());
        let me = t.row_scale(me, g.weights.clone());
        let inv: Arc<[f64]> = g
            .in_degree
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 })
            .collect();
        let sum = t.scatter_add_rows(me, g.dst.clone(), g.num_nodes);
        let mean = t.row_scale(sum, inv.clone());
        let sq = t.square(me);
        let sumsq = t.scatter_add_rows(sq, g.dst.clone(), g.num_nodes);
        let meansq = t.row_scale(sumsq, inv);
        let mean2 = t.square(mean);
        let var = t.sub(meansq, mean2);
        let std = t.sqrt_eps(var, STD_EPS);
        let max = t.segment_max(me, &g.dst, g.num_nodes);
        let aggs = t.concat_cols(&[mean, max, std]);
        let logd: Vec<f64> = g.in_degree.iter().map(|d| (d + 1.0).ln()).collect();
        let amp: Arc<[f64]> = logd.iter().map(|l| l / delta).collect();
        let att: Arc<[f64]> = logd
            .iter()
            .map(|&l| if l > 0.0 { delta / l } else { 0.0 })
            .collect();
        let a_amp = t.row_scale(aggs, amp);
        let a_att = t.row_scale(aggs, att);
        let h = t.concat_cols(&[x, aggs, a_amp, a_att]);
        let h = self.post.forward(t, h);
        t.relu(h)
    }
}

/// Mean of `log(d + 1)` over the in-degrees of all given graphs.
pub fn pna_delta<'a>(graphs: impl IntoIterator<Item = &'a GraphInput>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for g in graphs {
        for d in g.in_degree.iter() {
            s += (d + 1.0).ln();
            n += 1;
        }
    }
    if n == 0 || s <= 0.0 {
        1.0
    } else {
        s / n as f64
    }
}

pub fn dropout<R: Rng + ?Sized>(t: &mut Tape, x: Var, p: f64, rng: &mut R) -> Var {
    if p <= 0.0 {
        return x;
    }
    let keep = 1.0 - p;
    let dim = t.value(x).raw_dim();
    let mask = Array2::from_shape_simple_fn(dim, || {
        if rng.random_bool(keep) {
            1.0 / keep
        } else {
            0.0
        }
    });
    t.mul_const(x, Arc::new(mask))
}
