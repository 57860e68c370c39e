//! GCN, GraphSAGE and GAT layers over object co-occurrence graphs, plus
//! global mean pooling to a single graph feature.
//!
//! Layers are expression fragments built on [`ExprBuilder`]; the
//! graph-dependent operators (neighbour averaging matrix, attention mask,
//! edge weights) are computed once per graph by [`GraphOperators`] and bound
//! as constant inputs, so one compiled expression serves every vlog.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Bindings, ExprBuilder, Matrix, NodeId, ParamStore, LEAKY_RELU_SLOPE};
use crate::error::{Error, Result};
use crate::graph::{validate_adjacency, VlogGraph};

pub const INPUT_NEIGHBOR_MEAN: &str = "graph.neighbor_mean";
pub const INPUT_ATTENTION_MASK: &str = "graph.attention_mask";
pub const INPUT_EDGE_WEIGHTS: &str = "graph.edge_weights";

/// Additive score for pairs outside a node's attention set. `exp` of it
/// underflows to exactly zero after the max-shift in softmax.
const MASKED: f64 = -1e30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GnnKind {
    Gcn,
    #[serde(rename = "graphsage")]
    Sage,
    Gat,
}

impl GnnKind {
    pub fn display_name(self) -> &'static str {
        match self {
            GnnKind::Gcn => "GCN",
            GnnKind::Sage => "GraphSAGE",
            GnnKind::Gat => "GAT",
        }
    }
}

impl std::str::FromStr for GnnKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(GnnKind::Gcn),
            "sage" | "graphsage" => Ok(GnnKind::Sage),
            "gat" => Ok(GnnKind::Gat),
            other => Err(Error::Config(format!("unknown GNN variant '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GnnConfig {
    pub kind: GnnKind,
    /// Output width of each layer; the last one is the graph feature size.
    pub widths: Vec<usize>,
    /// GAT attention heads, combined by averaging.
    pub heads: usize,
    /// GAT: scale each message by its edge weight (self-loops weigh 1).
    pub gat_edge_weights: bool,
    /// GCN/GraphSAGE: plain `1/|N(t)|` neighbour mean instead of the
    /// edge-weighted mean.
    pub unweighted_mean: bool,
}

impl Default for GnnConfig {
    fn default() -> Self {
        Self {
            kind: GnnKind::Gat,
            widths: vec![256, 1024],
            heads: 1,
            gat_edge_weights: false,
            unweighted_mean: false,
        }
    }
}

impl GnnConfig {
    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap_or(&0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() {
            return Err(Error::Config("GNN needs at least one layer".into()));
        }
        if self.widths.contains(&0) {
            return Err(Error::Config("GNN layer width must be positive".into()));
        }
        if self.kind == GnnKind::Sage && self.widths.iter().any(|w| w % 2 != 0) {
            return Err(Error::Config(format!(
                "GraphSAGE layer widths must be even (concatenated halves), got {:?}",
                self.widths
            )));
        }
        if self.kind == GnnKind::Gat && self.heads == 0 {
            return Err(Error::Config("GAT needs at least one head".into()));
        }
        Ok(())
    }

    /// Parameter names and shapes for a graph with `nodes` one-hot inputs.
    pub fn param_shapes(&self, nodes: usize) -> Vec<(String, (usize, usize))> {
        let mut shapes = Vec::new();
        let mut input = nodes;
        for (l, &out) in self.widths.iter().enumerate() {
            match self.kind {
                GnnKind::Gcn => {
                    shapes.push((format!("gnn.{l}.w"), (input, out)));
                    shapes.push((format!("gnn.{l}.b"), (input, out)));
                }
                GnnKind::Sage => {
                    shapes.push((format!("gnn.{l}.w"), (input, out / 2)));
                    shapes.push((format!("gnn.{l}.b"), (input, out / 2)));
                }
                GnnKind::Gat => {
                    for h in 0..self.heads {
                        shapes.push((format!("gnn.{l}.head{h}.w"), (input, out)));
                        shapes.push((format!("gnn.{l}.head{h}.a"), (out, 2)));
                    }
                }
            }
            input = out;
        }
        shapes
    }
}

/// Per-graph constant operators derived from the weighted adjacency.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphOperators {
    /// Row `t` holds the averaging weights over `N(t) = {u ≠ t : ã_ut > 0}`;
    /// all zero for isolated nodes.
    pub neighbor_mean: Matrix,
    /// 0 on `N(t) ∪ {t}`, a large negative score elsewhere.
    pub attention_mask: Matrix,
    /// `ã_ut` on neighbours, 1 on the diagonal, 0 elsewhere.
    pub edge_weights: Matrix,
}

impl GraphOperators {
    pub fn new(adjacency: &Matrix, unweighted_mean: bool) -> Result<Self> {
        validate_adjacency(adjacency)?;
        let t = adjacency.nrows();
        let mut neighbor_mean = Matrix::zeros((t, t));
        let mut attention_mask = Matrix::from_elem((t, t), MASKED);
        let mut edge_weights = Matrix::zeros((t, t));
        for target in 0..t {
            attention_mask[[target, target]] = 0.0;
            edge_weights[[target, target]] = 1.0;
            let mut total = 0.0;
            let mut count = 0usize;
            for u in (0..t).filter(|&u| u != target) {
                let w = adjacency[[u, target]];
                if w > 0.0 {
                    attention_mask[[target, u]] = 0.0;
                    edge_weights[[target, u]] = w;
                    neighbor_mean[[target, u]] = if unweighted_mean { 1.0 } else { w };
                    total += neighbor_mean[[target, u]];
                    count += 1;
                }
            }
            if count > 0 {
                neighbor_mean.row_mut(target).mapv_inplace(|w| w / total);
            }
        }
        Ok(Self {
            neighbor_mean,
            attention_mask,
            edge_weights,
        })
    }

    pub fn for_graph(graph: &VlogGraph, cfg: &GnnConfig) -> Result<Self> {
        Self::new(&graph.adjacency, cfg.unweighted_mean)
    }

    pub fn bind<'a>(&'a self, bindings: &mut Bindings<'a>) {
        bindings.insert_ref(INPUT_NEIGHBOR_MEAN, &self.neighbor_mean);
        bindings.insert_ref(INPUT_ATTENTION_MASK, &self.attention_mask);
        bindings.insert_ref(INPUT_EDGE_WEIGHTS, &self.edge_weights);
    }
}

/// `relu(M·H·W + H·B)`.
pub fn gcn_layer(b: &mut ExprBuilder, h: NodeId, neighbor_mean: NodeId, w: NodeId, b_self: NodeId) -> Result<NodeId> {
    let agg = b.matmul(neighbor_mean, h)?;
    let msg = b.matmul(agg, w)?;
    let own = b.matmul(h, b_self)?;
    let pre = b.add(msg, own)?;
    Ok(b.relu(pre)?)
}

/// `relu([M·H·W ∥ H·B])`.
pub fn sage_layer(b: &mut ExprBuilder, h: NodeId, neighbor_mean: NodeId, w: NodeId, b_self: NodeId) -> Result<NodeId> {
    let agg = b.matmul(neighbor_mean, h)?;
    let msg = b.matmul(agg, w)?;
    let own = b.matmul(h, b_self)?;
    let pre = b.concat_cols(&[msg, own])?;
    Ok(b.relu(pre)?)
}

pub struct GatLayerNodes {
    pub output: NodeId,
    /// One `T×T` attention matrix per head; row `t` is the distribution over
    /// source nodes for target `t`.
    pub attention: Vec<NodeId>,
}

/// Single- or multi-head graph attention. Each head scores
/// `e_tu = leaky_relu(a_selfᵀ W h_t + a_nbrᵀ W h_u)` over `N(t) ∪ {t}`,
/// aggregates `Σ_u α_tu W h_u`, and heads are averaged before the ReLU.
pub fn gat_layer(
    b: &mut ExprBuilder,
    h: NodeId,
    mask: NodeId,
    edge_weights: Option<NodeId>,
    heads: &[(NodeId, NodeId)],
) -> Result<GatLayerNodes> {
    if heads.is_empty() {
        return Err(Error::Config("GAT needs at least one head".into()));
    }
    let t = b.shape(h).0;
    let mut pick_self = Matrix::zeros((2, t));
    pick_self.row_mut(0).fill(1.0);
    let mut pick_nbr = Matrix::zeros((2, t));
    pick_nbr.row_mut(1).fill(1.0);
    let pick_self = b.constant(pick_self);
    let pick_nbr = b.constant(pick_nbr);

    let mut outputs = Vec::with_capacity(heads.len());
    let mut attention = Vec::with_capacity(heads.len());
    for &(w, a) in heads {
        let wh = b.matmul(h, w)?;
        let scores = b.matmul(wh, a)?; // T×2: [target half, neighbour half]
        let by_target = b.matmul(scores, pick_self)?; // (t,u) = s_t
        let by_source_t = b.matmul(scores, pick_nbr)?;
        let by_source = b.transpose(by_source_t)?; // (t,u) = s'_u
        let raw = b.add(by_target, by_source)?;
        let e = b.leaky_relu(raw, LEAKY_RELU_SLOPE)?;
        let masked = b.add(e, mask)?;
        let alpha = b.softmax_rows(masked)?;
        attention.push(alpha);
        let weights = match edge_weights {
            Some(ew) => b.mul(alpha, ew)?,
            None => alpha,
        };
        outputs.push(b.matmul(weights, wh)?);
    }
    let combined = if outputs.len() == 1 {
        outputs[0]
    } else {
        let mut acc = outputs[0];
        for &o in &outputs[1..] {
            acc = b.add(acc, o)?;
        }
        b.scale(acc, 1.0 / outputs.len() as f64)?
    };
    Ok(GatLayerNodes {
        output: b.relu(combined)?,
        attention,
    })
}

/// Column-wise mean over nodes: `T×d → 1×d`.
pub fn global_mean_pool(b: &mut ExprBuilder, h: NodeId) -> Result<NodeId> {
    if b.shape(h).0 == 0 {
        return Err(Error::Data("cannot pool a graph with zero nodes".into()));
    }
    Ok(b.mean_rows(h)?)
}

pub struct EncoderNodes {
    pub pooled: NodeId,
    pub layers: Vec<NodeId>,
    /// GAT only: per layer, per head attention matrices.
    pub attention: Vec<Vec<NodeId>>,
}

/// Stacks the configured layers over one-hot node features and pools.
pub fn build_encoder(b: &mut ExprBuilder, cfg: &GnnConfig, nodes: usize) -> Result<EncoderNodes> {
    build_encoder_on(b, cfg, Matrix::eye(nodes))
}

/// Same as [`build_encoder`] over arbitrary `T×F` node features.
pub fn build_encoder_on(b: &mut ExprBuilder, cfg: &GnnConfig, features: Matrix) -> Result<EncoderNodes> {
    cfg.validate()?;
    let (nodes, mut input) = features.dim();
    let mut h = b.constant(features);
    let neighbor_mean = b.input(INPUT_NEIGHBOR_MEAN, (nodes, nodes))?;
    let mask = b.input(INPUT_ATTENTION_MASK, (nodes, nodes))?;
    let edge_weights = if cfg.gat_edge_weights {
        Some(b.input(INPUT_EDGE_WEIGHTS, (nodes, nodes))?)
    } else {
        None
    };
    let mut layers = Vec::new();
    let mut attention = Vec::new();
    for (l, &out) in cfg.widths.iter().enumerate() {
        h = match cfg.kind {
            GnnKind::Gcn => {
                let w = b.param(&format!("gnn.{l}.w"), (input, out))?;
                let bs = b.param(&format!("gnn.{l}.b"), (input, out))?;
                gcn_layer(b, h, neighbor_mean, w, bs)?
            }
            GnnKind::Sage => {
                let w = b.param(&format!("gnn.{l}.w"), (input, out / 2))?;
                let bs = b.param(&format!("gnn.{l}.b"), (input, out / 2))?;
                sage_layer(b, h, neighbor_mean, w, bs)?
            }
            GnnKind::Gat => {
                let heads = (0..cfg.heads)
                    .map(|k| {
                        Ok((
                            b.param(&format!("gnn.{l}.head{k}.w"), (input, out))?,
                            b.param(&format!("gnn.{l}.head{k}.a"), (out, 2))?,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let nodes = gat_layer(b, h, mask, edge_weights, &heads)?;
                attention.push(nodes.attention);
                nodes.output
            }
        };
        layers.push(h);
        input = out;
    }
    let pooled = global_mean_pool(b, h)?;
    Ok(EncoderNodes {
        pooled,
        layers,
        attention,
    })
}

/// Graph feature `F_g` (1×d) for one vlog graph, using its node features.
pub fn encode_graph(graph: &VlogGraph, cfg: &GnnConfig, params: &ParamStore) -> Result<Matrix> {
    if graph.features.nrows() != graph.node_count() {
        return Err(Error::Data(format!(
            "graph '{}' has {} feature rows for {} nodes",
            graph.vlog_id,
            graph.features.nrows(),
            graph.node_count()
        )));
    }
    let mut b = ExprBuilder::new();
    let enc = build_encoder_on(&mut b, cfg, graph.features.clone())?;
    let expr = b.finish(enc.pooled);
    let ops = GraphOperators::for_graph(graph, cfg)?;
    let mut bind = Bindings::new();
    ops.bind(&mut bind);
    for (name, m) in params {
        bind.insert_ref(name.as_str(), m);
    }
    Ok(expr.evaluate(&bind)?)
}
