use rand::Rng;

use crate::error::{Error, Result};
use crate::numcore::{glorot_uniform, Dense2D};

/// Nonlinearity used inside and between GIN layers and in the classifier.
/// `Identity` makes the whole model linear, which some tests rely on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

/// Two-layer perceptron `act(x w1 + b1) w2 + b2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub w1: Dense2D,
    pub b1: Dense2D,
    pub w2: Dense2D,
    pub b2: Dense2D,
}

impl Mlp {
    pub fn init<R: Rng + ?Sized>(d_in: usize, d_hidden: usize, d_out: usize, rng: &mut R) -> Self {
        Self {
            w1: glorot_uniform(d_in, d_hidden, rng),
            b1: Dense2D::zeros(1, d_hidden),
            w2: glorot_uniform(d_hidden, d_out, rng),
            b2: Dense2D::zeros(1, d_out),
        }
    }

    pub fn zeros(d_in: usize, d_hidden: usize, d_out: usize) -> Self {
        Self {
            w1: Dense2D::zeros(d_in, d_hidden),
            b1: Dense2D::zeros(1, d_hidden),
            w2: Dense2D::zeros(d_hidden, d_out),
            b2: Dense2D::zeros(1, d_out),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.cols()
    }

    fn validate(&self, what: &str) -> Result<()> {
        let ok = self.b1.shape() == (1, self.w1.cols())
            && self.w2.rows() == self.w1.cols()
            && self.b2.shape() == (1, self.w2.cols());
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: w1 {:?}, b1 {:?}, w2 {:?}, b2 {:?} do not chain",
                self.w1.shape(),
                self.b1.shape(),
                self.w2.shape(),
                self.b2.shape()
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GinLayer {
    /// Learnable self-weight, stored as a 1x1 matrix.
    pub eps: Dense2D,
    pub mlp: Mlp,
}

impl GinLayer {
    pub fn init<R: Rng + ?Sized>(d_in: usize, d_hidden: usize, d_out: usize, rng: &mut R) -> Self {
        Self { eps: Dense2D::scalar(0.0), mlp: Mlp::init(d_in, d_hidden, d_out, rng) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    pub layers: Vec<GinLayer>,
    pub activation: Activation,
}

pub const MIN_LAYERS: usize = 2;
pub const MAX_LAYERS: usize = 6;

impl EncoderParams {
    /// `num_layers` GIN layers, the first mapping `input_dim -> d`, the rest `d -> d`.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, d: usize, num_layers: usize, rng: &mut R) -> Result<Self> {
        if !(MIN_LAYERS..=MAX_LAYERS).contains(&num_layers) {
            return Err(Error::Config(format!(
                "encoder depth {num_layers} outside [{MIN_LAYERS}, {MAX_LAYERS}]"
            )));
        }
        if input_dim == 0 || d == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        let layers = (0..num_layers)
            .map(|l| GinLayer::init(if l == 0 { input_dim } else { d }, d, d, rng))
            .collect();
        Ok(Self { layers, activation: Activation::Relu })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].mlp.input_dim()
    }

    /// Representation dimensionality.
    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.mlp.output_dim())
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Shape("encoder has no layers".into()));
        }
        let mut width = self.input_dim();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.mlp.validate(&format!("encoder layer {i}"))?;
            if layer.eps.shape() != (1, 1) {
                return Err(Error::Shape(format!("encoder layer {i}: eps must be 1x1")));
            }
            if layer.mlp.input_dim() != width {
                return Err(Error::Shape(format!(
                    "encoder layer {i} expects width {}, previous layer gives {width}",
                    layer.mlp.input_dim()
                )));
            }
            width = layer.mlp.output_dim();
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierParams {
    pub mlp: Mlp,
}

impl ClassifierParams {
    /// `d -> d -> num_classes`.
    pub fn init<R: Rng + ?Sized>(d: usize, num_classes: usize, rng: &mut R) -> Self {
        Self { mlp: Mlp::init(d, d, num_classes, rng) }
    }

    pub fn num_classes(&self) -> usize {
        self.mlp.output_dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.mlp.validate("classifier")
    }
}

/// Encoder plus classifier, with a stable flat ordering of named parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub encoder: EncoderParams,
    pub classifier: ClassifierParams,
}

impl Model {
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        d: usize,
        num_layers: usize,
        num_classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let encoder = EncoderParams::init(input_dim, d, num_layers, rng)?;
        let classifier = ClassifierParams::init(d, num_classes, rng);
        Ok(Self { encoder, classifier })
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.classifier.validate()?;
        if self.classifier.mlp.input_dim() != self.encoder.output_dim() {
            return Err(Error::Shape(format!(
                "classifier takes width {}, encoder produces {}",
                self.classifier.mlp.input_dim(),
                self.encoder.output_dim()
            )));
        }
        Ok(())
    }

    pub fn named_params(&self) -> Vec<(String, &Dense2D)> {
        let mut out = Vec::new();
        for (l, layer) in self.encoder.layers.iter().enumerate() {
            out.push((format!("encoder.layer{l}.eps"), &layer.eps));
            push_mlp(&mut out, &format!("encoder.layer{l}"), &layer.mlp);
        }
        push_mlp(&mut out, "classifier", &self.classifier.mlp);
        out
    }

    pub fn params(&self) -> Vec<&Dense2D> {
        self.named_params().into_iter().map(|(_, p)| p).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Dense2D> {
        let mut out: Vec<&mut Dense2D> = Vec::new();
        for layer in &mut self.encoder.layers {
            out.push(&mut layer.eps);
            let m = &mut layer.mlp;
            out.extend([&mut m.w1, &mut m.b1, &mut m.w2, &mut m.b2]);
        }
        let m = &mut self.classifier.mlp;
        out.extend([&mut m.w1, &mut m.b1, &mut m.w2, &mut m.b2]);
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.params().iter().map(|p| p.values().len()).sum()
    }
}

fn push_mlp<'a>(out: &mut Vec<(String, &'a Dense2D)>, prefix: &str, m: &'a Mlp) {
    out.push((format!("{prefix}.w1"), &m.w1));
    out.push((format!("{prefix}.b1"), &m.b1));
    out.push((format!("{prefix}.w2"), &m.w2));
    out.push((format!("{prefix}.b2"), &m.b2));
}
