use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::generate;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GnnKind {
    Gcn,
    #[serde(rename = "graphsage")]
    GraphSage,
    Gat,
    Gin,
}

impl GnnKind {
    pub const ALL: [GnnKind; 4] = [GnnKind::Gcn, GnnKind::GraphSage, GnnKind::Gat, GnnKind::Gin];

    pub fn name(self) -> &'static str {
        match self {
            GnnKind::Gcn => "gcn",
            GnnKind::GraphSage => "graphsage",
            GnnKind::Gat => "gat",
            GnnKind::Gin => "gin",
        }
    }

    /// Whether the aggregation neighborhood contains the vertex itself.
    pub fn includes_self(self) -> bool {
        !matches!(self, GnnKind::Gin)
    }
}

impl std::str::FromStr for GnnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(GnnKind::Gcn),
            "graphsage" | "sage" => Ok(GnnKind::GraphSage),
            "gat" => Ok(GnnKind::Gat),
            "gin" | "ginconv" => Ok(GnnKind::Gin),
            other => Err(Error::Config(format!("unknown model '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Sum,
    Mean,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    None,
    /// Softmax across the features of each vertex.
    Softmax,
}

impl Activation {
    pub fn apply<T: Scalar>(self, row: &mut [T]) {
        match self {
            Activation::None => {}
            Activation::Relu => {
                for v in row.iter_mut() {
                    *v = v.max(T::zero());
                }
            }
            Activation::Softmax => {
                let m = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
                let mut sum = T::zero();
                for v in row.iter_mut() {
                    *v = (*v - m).exp();
                    sum = sum + *v;
                }
                for v in row.iter_mut() {
                    *v = *v / sum;
                }
            }
        }
    }
}

#[inline]
pub fn leaky_relu<T: Scalar>(x: T, slope: T) -> T {
    if x >= T::zero() {
        x
    } else {
        x * slope
    }
}

/// Remaining parameters of the two-layer GINConv MLP. The first layer's
/// weight is [`LayerSpec::weight`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GinMlp<T> {
    pub bias1: Vec<T>,
    pub weight2: Matrix<T>,
    pub bias2: Vec<T>,
}

/// Parameters of one GNN layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec<T> {
    pub kind: GnnKind,
    pub f_in: usize,
    pub f_out: usize,
    /// `f_in × f_out`; for GINConv `f_in × hidden`, the first MLP layer.
    pub weight: Matrix<T>,
    /// `[a1 ‖ a2]`, length `2 · f_out`, GAT only.
    pub attention: Vec<T>,
    pub leaky_slope: T,
    pub epsilon: T,
    pub mlp: Option<GinMlp<T>>,
    pub aggregator: Aggregator,
    pub sample_size: usize,
    pub activation: Activation,
}

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;
pub const DEFAULT_SAMPLE_SIZE: usize = 25;

impl<T: Scalar> LayerSpec<T> {
    /// Layer with default hyperparameters and the given weight. GAT layers
    /// get a zero attention vector and GINConv layers an identity second
    /// MLP layer with zero biases; callers overwrite what they need.
    pub fn new(kind: GnnKind, weight: Matrix<T>) -> Self {
        let f_in = weight.rows();
        let f_out = weight.cols();
        Self {
            kind,
            f_in,
            f_out,
            attention: if kind == GnnKind::Gat {
                vec![T::zero(); 2 * f_out]
            } else {
                Vec::new()
            },
            leaky_slope: T::lit(DEFAULT_LEAKY_SLOPE),
            epsilon: T::zero(),
            mlp: (kind == GnnKind::Gin).then(|| GinMlp {
                bias1: vec![T::zero(); f_out],
                weight2: Matrix::identity(f_out),
                bias2: vec![T::zero(); f_out],
            }),
            aggregator: if kind == GnnKind::GraphSage {
                Aggregator::Max
            } else {
                Aggregator::Sum
            },
            sample_size: DEFAULT_SAMPLE_SIZE,
            activation: if kind == GnnKind::Gin {
                Activation::None
            } else {
                Activation::Relu
            },
            weight,
        }
    }

    /// Randomly initialised layer (Glorot-style uniform scale). GINConv uses
    /// `f_out` for the hidden width.
    pub fn random(kind: GnnKind, f_in: usize, f_out: usize, rng: &mut impl Rng) -> Self {
        let scale = (6.0 / (f_in + f_out) as f64).sqrt();
        let mut spec = Self::new(kind, generate::random_matrix(f_in, f_out, scale, rng));
        match kind {
            GnnKind::Gat => spec.attention = generate::random_vector(2 * f_out, 1.0 / (f_out as f64).sqrt(), rng),
            GnnKind::Gin => {
                spec.epsilon = T::lit(rng.gen_range(-0.5..0.5));
                let s2 = (3.0 / f_out as f64).sqrt();
                spec.mlp = Some(GinMlp {
                    bias1: generate::random_vector(f_out, 0.1, rng),
                    weight2: generate::random_matrix(f_out, f_out, s2, rng),
                    bias2: generate::random_vector(f_out, 0.1, rng),
                });
            }
            _ => {}
        }
        spec
    }

    /// Width of `h · W`, the vector that Aggregation operates on.
    pub fn weighted_width(&self) -> usize {
        self.weight.cols()
    }

    pub fn a1(&self) -> &[T] {
        &self.attention[..self.weighted_width()]
    }

    pub fn a2(&self) -> &[T] {
        &self.attention[self.weighted_width()..]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ShapeMismatch(m));
        if self.weight.rows() != self.f_in {
            return bad(format!("weight has {} rows, f_in={}", self.weight.rows(), self.f_in));
        }
        match self.kind {
            GnnKind::Gin => {
                let Some(mlp) = &self.mlp else {
                    return bad("GINConv layer without MLP parameters".into());
                };
                let hidden = self.weight.cols();
                if mlp.bias1.len() != hidden
                    || mlp.weight2.rows() != hidden
                    || mlp.weight2.cols() != self.f_out
                    || mlp.bias2.len() != self.f_out
                {
                    return bad("inconsistent GINConv MLP shapes".into());
                }
            }
            _ => {
                if self.weight.cols() != self.f_out {
                    return bad(format!("weight has {} cols, f_out={}", self.weight.cols(), self.f_out));
                }
            }
        }
        if self.kind == GnnKind::Gat && self.attention.len() != 2 * self.f_out {
            return bad(format!(
                "attention vector has {} entries, expected {}",
                self.attention.len(),
                2 * self.f_out
            ));
        }
        if self.kind == GnnKind::GraphSage && self.sample_size == 0 {
            return Err(Error::Config("GraphSAGE sample_size must be >= 1".into()));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> LayerSpec<U> {
        LayerSpec {
            kind: self.kind,
            f_in: self.f_in,
            f_out: self.f_out,
            weight: self.weight.cast(),
            attention: self.attention.iter().map(|v| v.cast()).collect(),
            leaky_slope: self.leaky_slope.cast(),
            epsilon: self.epsilon.cast(),
            mlp: self.mlp.as_ref().map(|m| GinMlp {
                bias1: m.bias1.iter().map(|v| v.cast()).collect(),
                weight2: m.weight2.cast(),
                bias2: m.bias2.iter().map(|v| v.cast()).collect(),
            }),
            aggregator: self.aggregator,
            sample_size: self.sample_size,
            activation: self.activation,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_activation_sums_to_one() {
        let mut r = vec![1.0f64, 2.0, 3.0];
        Activation::Softmax.apply(&mut r);
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(r[2] > r[1]);
    }

    #[test]
    fn validate_catches_shapes() {
        let mut rng = generate::rng(1);
        let mut s = LayerSpec::<f64>::random(GnnKind::Gat, 4, 3, &mut rng);
        s.validate().unwrap();
        s.attention.pop();
        assert!(s.validate().is_err());
        let mut s = LayerSpec::<f64>::random(GnnKind::GraphSage, 4, 3, &mut rng);
        s.sample_size = 0;
        assert!(s.validate().is_err());
        let s = LayerSpec::<f64>::random(GnnKind::Gin, 4, 3, &mut rng);
        s.validate().unwrap();
        assert_eq!(s.cast::<f32>().mlp.unwrap().weight2.rows(), 3);
    }

    #[test]
    fn leaky_relu_slope() {
        assert_eq!(leaky_relu(-2.0f64, 0.01), -0.02);
        assert_eq!(leaky_relu(5.0f64, 0.01), 5.0);
    }
}
