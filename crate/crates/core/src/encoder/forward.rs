use std::rc::Rc;

use super::adam::Adam;
use super::params::{Activation, ClassifierParams, EncoderParams, GinLayer, Model};
use crate::error::{Error, Result};
use crate::graphdata::Graph;
use crate::numcore::{Adjacency, Dense2D, Tape, Var};

/// Several graphs packed as one block-diagonal graph with row segments.
#[derive(Clone, Debug)]
pub struct GraphBatch {
    features: Dense2D,
    adjacency: Rc<Adjacency>,
    offsets: Rc<Vec<usize>>,
    labels: Vec<usize>,
}

impl GraphBatch {
    pub fn new(graphs: &[&Graph]) -> Result<Self> {
        let first = graphs.first().ok_or_else(|| Error::Shape("empty batch".into()))?;
        let width = first.feature_dim();
        let mut offsets = Vec::with_capacity(graphs.len() + 1);
        offsets.push(0);
        let mut edges = Vec::new();
        for g in graphs {
            if g.feature_dim() != width {
                return Err(Error::Shape(format!(
                    "batch mixes feature widths {width} and {}",
                    g.feature_dim()
                )));
            }
            let base = *offsets.last().unwrap();
            edges.extend(g.edges().iter().map(|&(u, v)| (u + base, v + base)));
            offsets.push(base + g.num_nodes());
        }
        let feats: Vec<&Dense2D> = graphs.iter().map(|g| g.features()).collect();
        let features = Dense2D::vstack(&feats)?;
        let total = *offsets.last().unwrap();
        Ok(Self {
            features,
            adjacency: Rc::new(Adjacency::from_undirected(total, &edges)),
            offsets: Rc::new(offsets),
            labels: graphs.iter().map(|g| g.label()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }
}

/// Parameter leaves of one model on a tape, in [`Model::named_params`] order.
#[derive(Clone, Debug)]
pub struct ModelVars {
    pub vars: Vec<Var>,
    num_layers: usize,
}

impl ModelVars {
    fn layer(&self, l: usize) -> &[Var] {
        &self.vars[5 * l..5 * l + 5]
    }

    fn encoder(&self) -> &[Var] {
        &self.vars[..5 * self.num_layers]
    }

    fn classifier(&self) -> &[Var] {
        &self.vars[5 * self.num_layers..]
    }
}

impl Model {
    pub fn bind(&self, tape: &mut Tape) -> ModelVars {
        let vars = self.params().into_iter().map(|p| tape.leaf(p.clone())).collect();
        ModelVars { vars, num_layers: self.encoder.layers.len() }
    }

    /// Runs the encoder on `batch`, keeping the tape for a later backward pass.
    pub fn forward(&self, batch: &GraphBatch) -> Result<ForwardPass<'_>> {
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape);
        let z = encode_on_tape(&mut tape, &vars, self.encoder.activation, batch)?;
        Ok(ForwardPass { model: self, tape, vars, z })
    }

    /// `(1/B) * sum_n w_n * CE` for a batch, evaluated on a given tape binding.
    pub fn loss_on_tape(
        &self,
        tape: &mut Tape,
        vars: &ModelVars,
        batch: &GraphBatch,
        weights: &[f64],
    ) -> Result<Var> {
        let z = encode_on_tape(tape, vars, self.encoder.activation, batch)?;
        let logits = classify_on_tape(tape, vars.classifier(), self.encoder.activation, z)?;
        tape.softmax_cross_entropy(logits, &batch.labels, weights)
    }
}

pub struct ForwardPass<'m> {
    model: &'m Model,
    tape: Tape,
    vars: ModelVars,
    z: Var,
}

/// Result of a weighted loss evaluation with gradients for every parameter.
#[derive(Clone, Debug)]
pub struct LossGrads {
    pub loss: f64,
    pub logits: Dense2D,
    pub grads: Vec<Dense2D>,
}

impl ForwardPass<'_> {
    /// Graph representations, one row per batch graph.
    pub fn representations(&self) -> &Dense2D {
        self.tape.value(self.z)
    }

    /// Classifier, weighted cross-entropy and backward pass. Weights are constants.
    pub fn weighted_loss_grads(mut self, labels: &[usize], weights: &[f64]) -> Result<LossGrads> {
        let logits = classify_on_tape(&mut self.tape, self.vars.classifier(), self.model.encoder.activation, self.z)?;
        let loss_var = self.tape.softmax_cross_entropy(logits, labels, weights)?;
        let loss = self.tape.value(loss_var).values()[0];
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(format!("weighted loss is {loss}")));
        }
        self.tape.backward(loss_var)?;
        let grads = self.vars.vars.iter().map(|&v| self.tape.grad(v)).collect();
        Ok(LossGrads { loss, logits: self.tape.value(logits).clone(), grads })
    }
}

fn mlp_on_tape(tape: &mut Tape, x: Var, w: &[Var], act: Activation) -> Result<Var> {
    let h = tape.matmul(x, w[0])?;
    let h = tape.add_row_bias(h, w[1])?;
    let h = activate(tape, h, act);
    let out = tape.matmul(h, w[2])?;
    tape.add_row_bias(out, w[3])
}

fn activate(tape: &mut Tape, x: Var, act: Activation) -> Var {
    match act {
        Activation::Relu => tape.relu(x),
        Activation::Identity => x,
    }
}

/// Stacked GIN layers with the activation between layers, then sum pooling
/// per graph.
pub fn encode_on_tape(tape: &mut Tape, vars: &ModelVars, act: Activation, batch: &GraphBatch) -> Result<Var> {
    let mut h = tape.leaf(batch.features.clone());
    let layers = vars.encoder().len() / 5;
    for l in 0..layers {
        let w = vars.layer(l);
        let agg = tape.aggregate(h, w[0], batch.adjacency.clone())?;
        h = mlp_on_tape(tape, agg, &w[1..], act)?;
        if l + 1 < layers {
            h = activate(tape, h, act);
        }
    }
    tape.segment_sum(h, batch.offsets.clone())
}

pub fn classify_on_tape(tape: &mut Tape, clf: &[Var], act: Activation, z: Var) -> Result<Var> {
    mlp_on_tape(tape, z, clf, act)
}

fn bind_layer(tape: &mut Tape, layer: &GinLayer) -> Vec<Var> {
    let m = &layer.mlp;
    [&layer.eps, &m.w1, &m.b1, &m.w2, &m.b2].into_iter().map(|p| tape.leaf(p.clone())).collect()
}

/// One GIN layer: `MLP((1 + eps) h_v + sum_{u in N(v)} h_u)`.
pub fn gin_layer_forward(layer: &GinLayer, act: Activation, node_states: &Dense2D, graph: &Graph) -> Result<Dense2D> {
    if node_states.rows() != graph.num_nodes() {
        return Err(Error::dims("gin_layer_forward", node_states.shape(), (graph.num_nodes(), node_states.cols())));
    }
    if node_states.cols() != layer.mlp.input_dim() {
        return Err(Error::dims("gin_layer_forward", node_states.shape(), layer.mlp.w1.shape()));
    }
    let mut tape = Tape::new();
    let w = bind_layer(&mut tape, layer);
    let h = tape.leaf(node_states.clone());
    let agg = tape.aggregate(h, w[0], Rc::new(graph.adjacency()))?;
    let out = mlp_on_tape(&mut tape, agg, &w[1..], act)?;
    Ok(tape.value(out).clone())
}

/// Representations for each graph, one row per graph in input order.
pub fn encode_batch(params: &EncoderParams, graphs: &[&Graph]) -> Result<Dense2D> {
    if let Some(g) = graphs.iter().find(|g| g.feature_dim() != params.input_dim()) {
        return Err(Error::dims("encode", g.features().shape(), params.layers[0].mlp.w1.shape()));
    }
    let batch = GraphBatch::new(graphs)?;
    let mut tape = Tape::new();
    let mut vars = Vec::new();
    for layer in &params.layers {
        vars.extend(bind_layer(&mut tape, layer));
    }
    let vars = ModelVars { vars, num_layers: params.layers.len() };
    let z = encode_on_tape(&mut tape, &vars, params.activation, &batch)?;
    Ok(tape.value(z).clone())
}

/// Single-graph representation as a `1 x d` row.
pub fn encode(params: &EncoderParams, g: &Graph) -> Result<Dense2D> {
    encode_batch(params, &[g])
}

pub fn classify(params: &ClassifierParams, act: Activation, z: &Dense2D) -> Result<Dense2D> {
    if z.cols() != params.mlp.input_dim() {
        return Err(Error::dims("classify", z.shape(), params.mlp.w1.shape()));
    }
    let mut tape = Tape::new();
    let m = &params.mlp;
    let w: Vec<Var> = [&m.w1, &m.b1, &m.w2, &m.b2].into_iter().map(|p| tape.leaf(p.clone())).collect();
    let zv = tape.leaf(z.clone());
    let out = classify_on_tape(&mut tape, &w, act, zv)?;
    Ok(tape.value(out).clone())
}

/// Logits for a set of graphs.
pub fn predict(model: &Model, graphs: &[&Graph]) -> Result<Dense2D> {
    let z = encode_batch(&model.encoder, graphs)?;
    classify(&model.classifier, model.encoder.activation, &z)
}

/// Loss and parameter gradients without updating anything.
pub fn weighted_loss_grads(model: &Model, batch: &GraphBatch, weights: &[f64]) -> Result<LossGrads> {
    model.forward(batch)?.weighted_loss_grads(&batch.labels, weights)
}

/// One optimizer step on `(1/B) * sum_n w_n * CE(R(Phi(G_n)), y_n)`; the
/// sample weights are held fixed. Returns the pre-step loss and logits.
pub fn weighted_prediction_step(
    model: &mut Model,
    opt: &mut Adam,
    batch: &GraphBatch,
    weights: &[f64],
) -> Result<LossGrads> {
    if weights.len() != batch.len() {
        return Err(Error::Shape(format!("{} weights for a batch of {}", weights.len(), batch.len())));
    }
    let out = weighted_loss_grads(model, batch, weights)?;
    opt.step(model, &out.grads)?;
    Ok(out)
}
