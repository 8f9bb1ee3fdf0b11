//! The two auditor backbones.
//!
//! * MLP over `[f(x) || f(x')]`: `2d -> 256 -> 128 -> 64 -> 1`, ReLU between.
//! * CNN over the `(2, L, D)` channel stack: three 3x3 convolutions with 32,
//!   64 and 128 channels (padding 1, ReLU after each), global average pooling,
//!   then a fully connected `128 -> 1` layer.
//!
//! Both emit a single logit per pair.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::features::{pair_feature_map, pair_feature_vector};
use crate::embeddings::{EmbeddingForm, PairExample};
use crate::error::{Error, Result};
use crate::numerics::{
    adaptive_avg_pool_backward, adaptive_avg_pool_forward, affine_backward, affine_forward,
    bce_with_logits_mean, conv3x3_backward, conv3x3_forward, relu_backward, relu_forward, sigmoid,
    DenseArray, RngState,
};

pub const MLP_HIDDEN: [usize; 3] = [256, 128, 64];
pub const CNN_CHANNELS: [usize; 3] = [32, 64, 128];

const MLP_NAMES: [&str; 8] = ["fc1.w", "fc1.b", "fc2.w", "fc2.b", "fc3.w", "fc3.b", "out.w", "out.b"];
const CNN_NAMES: [&str; 8] = [
    "conv1.k", "conv1.b", "conv2.k", "conv2.b", "conv3.k", "conv3.b", "fc.w", "fc.b",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Mlp,
    Cnn,
}

impl Architecture {
    /// Vectors go to the MLP, maps to the CNN.
    pub fn for_form(form: EmbeddingForm) -> Self {
        match form {
            EmbeddingForm::Vector { .. } => Architecture::Mlp,
            EmbeddingForm::Map { .. } => Architecture::Cnn,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Mlp => "mlp",
            Architecture::Cnn => "cnn",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(Architecture::Mlp),
            "cnn" => Ok(Architecture::Cnn),
            other => Err(Error::Validation(format!(
                "unknown architecture '{other}' (expected mlp or cnn)"
            ))),
        }
    }
}

/// Per-feature affine normalization fitted on training pairs and frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Mean and standard deviation of each feature column; constant columns
    /// get unit scale.
    pub fn fit(features: &DenseArray) -> Self {
        let rows = features.dims()[0];
        let width = features.len() / rows;
        let mut mean = vec![0.0; width];
        for row in features.data().chunks_exact(width) {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= rows as f64);
        let mut var = vec![0.0; width];
        for row in features.data().chunks_exact(width) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / rows as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    fn apply(&self, features: &mut DenseArray) {
        let width = self.mean.len();
        for row in features.data_mut().chunks_exact_mut(width) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) / s;
            }
        }
    }
}

/// Weights of one auditor plus what it expects as input.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditorParams {
    arch: Architecture,
    input: EmbeddingForm,
    tensors: Vec<DenseArray>,
    standardizer: Option<Standardizer>,
}

fn tensor_shapes(arch: Architecture, input: EmbeddingForm) -> Vec<Vec<usize>> {
    match arch {
        Architecture::Mlp => {
            let mut widths = vec![2 * input.len()];
            widths.extend(MLP_HIDDEN);
            widths.push(1);
            widths
                .windows(2)
                .flat_map(|w| [vec![w[0], w[1]], vec![w[1]]])
                .collect()
        }
        Architecture::Cnn => {
            let mut channels = vec![2];
            channels.extend(CNN_CHANNELS);
            let mut shapes: Vec<Vec<usize>> = channels
                .windows(2)
                .flat_map(|c| [vec![c[1], c[0], 3, 3], vec![c[1]]])
                .collect();
            shapes.push(vec![CNN_CHANNELS[2], 1]);
            shapes.push(vec![1]);
            shapes
        }
    }
}

fn fan_in(shape: &[usize], arch: Architecture) -> usize {
    match (arch, shape.len()) {
        (Architecture::Cnn, 4) => shape[1] * 9,
        (_, 2) => shape[0],
        _ => unreachable!("fan-in is taken from weight tensors only"),
    }
}

fn check_compatible(arch: Architecture, input: EmbeddingForm) -> Result<()> {
    if Architecture::for_form(input) != arch {
        return Err(Error::Validation(format!(
            "{arch} auditor cannot take {input} embeddings"
        )));
    }
    if input.is_empty() {
        return Err(Error::Validation("empty input embedding".into()));
    }
    Ok(())
}

/// Cached activations of one forward pass.
struct Trace {
    /// Layer inputs, one per layer, in order.
    inputs: Vec<DenseArray>,
    /// Pre-activation outputs of the three hidden layers.
    pre: Vec<DenseArray>,
}

impl AuditorParams {
    /// Uniform `(-sqrt(1/fan_in), sqrt(1/fan_in))` initialization for every
    /// weight and bias, drawn in tensor order.
    pub fn init(arch: Architecture, input: EmbeddingForm, rng: &mut RngState) -> Result<Self> {
        check_compatible(arch, input)?;
        let shapes = tensor_shapes(arch, input);
        let mut tensors = Vec::with_capacity(shapes.len());
        for pair in shapes.chunks(2) {
            let bound = (1.0 / fan_in(&pair[0], arch) as f64).sqrt();
            for shape in pair {
                let n = shape.iter().product();
                let data = (0..n).map(|_| rng.uniform(-bound, bound)).collect();
                tensors.push(DenseArray::new(shape.clone(), data)?);
            }
        }
        Ok(AuditorParams {
            arch,
            input,
            tensors,
            standardizer: None,
        })
    }

    pub fn zeros(arch: Architecture, input: EmbeddingForm) -> Result<Self> {
        check_compatible(arch, input)?;
        Ok(AuditorParams {
            arch,
            input,
            tensors: tensor_shapes(arch, input)
                .iter()
                .map(|s| DenseArray::zeros(s))
                .collect(),
            standardizer: None,
        })
    }

    /// Rebuild from stored tensors, checking every shape.
    pub fn from_parts(
        arch: Architecture,
        input: EmbeddingForm,
        tensors: Vec<DenseArray>,
        standardizer: Option<Standardizer>,
    ) -> Result<Self> {
        check_compatible(arch, input)?;
        let shapes = tensor_shapes(arch, input);
        if shapes.len() != tensors.len() {
            return Err(Error::Validation(format!(
                "{arch} auditor needs {} tensors, got {}",
                shapes.len(),
                tensors.len()
            )));
        }
        for (s, t) in shapes.iter().zip(&tensors) {
            if s.as_slice() != t.dims() {
                return Err(Error::dims("auditor parameter", t.dims(), s));
            }
        }
        if let Some(st) = &standardizer {
            let width = 2 * input.len();
            if st.mean.len() != width || st.scale.len() != width {
                return Err(Error::Validation(format!(
                    "standardizer width {} does not match feature width {width}",
                    st.mean.len()
                )));
            }
        }
        Ok(AuditorParams {
            arch,
            input,
            tensors,
            standardizer,
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn input_form(&self) -> EmbeddingForm {
        self.input
    }

    pub fn tensors(&self) -> &[DenseArray] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [DenseArray] {
        &mut self.tensors
    }

    pub fn tensor_names(&self) -> &'static [&'static str] {
        match self.arch {
            Architecture::Mlp => &MLP_NAMES,
            Architecture::Cnn => &CNN_NAMES,
        }
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    pub fn set_standardizer(&mut self, s: Option<Standardizer>) {
        self.standardizer = s;
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(DenseArray::len).sum()
    }

    /// Unnormalized pair features for a batch: `[B, 2d]` or `[B, 2, L, D]`.
    pub fn raw_features(&self, pairs: &[&PairExample]) -> Result<DenseArray> {
        if pairs.is_empty() {
            return Err(Error::Validation("empty batch".into()));
        }
        let width = 2 * self.input.len();
        let mut data = Vec::with_capacity(pairs.len() * width);
        for p in pairs {
            if p.original.form() != self.input {
                return Err(Error::dims(
                    "auditor input",
                    &p.original.form().dims(),
                    &self.input.dims(),
                ));
            }
            let f = match self.arch {
                Architecture::Mlp => pair_feature_vector(p)?,
                Architecture::Cnn => pair_feature_map(p)?,
            };
            data.extend_from_slice(f.data());
        }
        let dims = match self.input {
            EmbeddingForm::Vector { dim } => vec![pairs.len(), 2 * dim],
            EmbeddingForm::Map { rows, cols } => vec![pairs.len(), 2, rows, cols],
        };
        DenseArray::new(dims, data)
    }

    /// Pair features with the frozen standardization applied, if any.
    pub fn features(&self, pairs: &[&PairExample]) -> Result<DenseArray> {
        let mut f = self.raw_features(pairs)?;
        if let Some(s) = &self.standardizer {
            s.apply(&mut f);
        }
        Ok(f)
    }

    fn check_batch(&self, batch: &DenseArray) -> Result<()> {
        let expected = match self.input {
            EmbeddingForm::Vector { dim } => vec![2 * dim],
            EmbeddingForm::Map { rows, cols } => vec![2, rows, cols],
        };
        if batch.dims().len() != expected.len() + 1 || batch.dims()[1..] != expected[..] {
            return Err(Error::dims("auditor forward", batch.dims(), &expected));
        }
        Ok(())
    }

    fn forward_traced(&self, batch: &DenseArray) -> Result<(Vec<f64>, Trace)> {
        self.check_batch(batch)?;
        let t = &self.tensors;
        let mut inputs = Vec::with_capacity(4);
        let mut pre = Vec::with_capacity(3);
        let mut x = batch.clone();
        match self.arch {
            Architecture::Mlp => {
                for layer in 0..3 {
                    let z = affine_forward(&x, &t[2 * layer], &t[2 * layer + 1])?;
                    inputs.push(x);
                    x = relu_forward(&z);
                    pre.push(z);
                }
                let logits = affine_forward(&x, &t[6], &t[7])?;
                inputs.push(x);
                Ok((logits.into_data(), Trace { inputs, pre }))
            }
            Architecture::Cnn => {
                for layer in 0..3 {
                    let z = conv3x3_forward(&x, &t[2 * layer], &t[2 * layer + 1])?;
                    inputs.push(x);
                    x = relu_forward(&z);
                    pre.push(z);
                }
                let pooled = adaptive_avg_pool_forward(&x)?;
                inputs.push(x);
                let logits = affine_forward(&pooled, &t[6], &t[7])?;
                inputs.push(pooled);
                Ok((logits.into_data(), Trace { inputs, pre }))
            }
        }
    }

    /// One logit per row of an already-featurized batch.
    pub fn forward_batch(&self, batch: &DenseArray) -> Result<Vec<f64>> {
        Ok(self.forward_traced(batch)?.0)
    }

    /// Logits together with which hidden pre-activations are positive. A
    /// finite-difference probe that changes the pattern has crossed a ReLU
    /// kink.
    pub fn forward_with_relu_pattern(&self, batch: &DenseArray) -> Result<(Vec<f64>, Vec<bool>)> {
        let (logits, trace) = self.forward_traced(batch)?;
        let pattern = trace.pre.iter().flat_map(|z| z.data().iter().map(|v| *v > 0.0)).collect();
        Ok((logits, pattern))
    }

    /// Mean BCE-with-logits loss over the batch, the logits, and the gradient
    /// of the mean loss with respect to every parameter tensor.
    pub fn loss_and_grads(
        &self,
        batch: &DenseArray,
        labels: &[f64],
    ) -> Result<(f64, Vec<f64>, Vec<DenseArray>)> {
        let (logits, trace) = self.forward_traced(batch)?;
        if labels.len() != logits.len() {
            return Err(Error::dims("labels", &[labels.len()], &[logits.len()]));
        }
        let (loss, g_logits) = bce_with_logits_mean(&logits, labels);
        let mut grads: Vec<DenseArray> = vec![DenseArray::zeros(&[1]); 8];
        let t = &self.tensors;
        let g_out = DenseArray::new(vec![logits.len(), 1], g_logits)?;

        let head_input = trace.inputs.last().expect("trace has a head input");
        let head = affine_backward(head_input, &t[6], &g_out)?;
        grads[6] = head.weights;
        grads[7] = head.bias;
        let mut g = match self.arch {
            Architecture::Mlp => head.input,
            Architecture::Cnn => adaptive_avg_pool_backward(trace.inputs[3].dims(), &head.input)?,
        };
        for layer in (0..3).rev() {
            let gz = relu_backward(&trace.pre[layer], &g)?;
            let x = &trace.inputs[layer];
            let (gw, gb, gx) = match self.arch {
                Architecture::Mlp => {
                    let r = affine_backward(x, &t[2 * layer], &gz)?;
                    (r.weights, r.bias, r.input)
                }
                Architecture::Cnn => {
                    let r = conv3x3_backward(x, &t[2 * layer], &gz)?;
                    (r.kernels, r.bias, r.input)
                }
            };
            grads[2 * layer] = gw;
            grads[2 * layer + 1] = gb;
            g = gx;
        }
        Ok((loss, logits, grads))
    }

    /// Logits for a batch of pairs.
    pub fn forward(&self, pairs: &[&PairExample]) -> Result<Vec<f64>> {
        self.forward_batch(&self.features(pairs)?)
    }

    /// Membership scores in `(0, 1)`, computed in chunks.
    pub fn score_pairs(&self, pairs: &[PairExample]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(256) {
            let refs: Vec<&PairExample> = chunk.iter().collect();
            out.extend(self.forward(&refs)?.into_iter().map(sigmoid));
        }
        Ok(out)
    }
}

/// Membership score of one pair: the sigmoid of the auditor's logit.
pub fn score(params: &AuditorParams, pair: &PairExample) -> Result<f64> {
    Ok(sigmoid(params.forward(&[pair])?[0]))
}
