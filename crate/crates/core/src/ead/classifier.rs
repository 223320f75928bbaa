use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};

use super::policy::FrameScorer;

/// Fully connected layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.inputs + inp]
    }

    fn apply(&self, x: &[f64], y: &mut Vec<f64>) {
        y.clear();
        y.extend(self.bias.iter().enumerate().map(|(o, b)| {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }
}

/// Feed-forward 3-class classifier: `tanh` hidden layers, softmax output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpClassifier {
    layers: Vec<Layer>,
}

pub const CLASSES: usize = 3;
const FORMAT_TAG: &str = "EADCLF";
const FORMAT_VERSION: &str = "v1";

impl MlpClassifier {
    /// All-zero classifier with the given hidden layer widths.
    pub fn zeros(input_dim: usize, hidden: &[usize]) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(CLASSES);
        if sizes.contains(&0) {
            return Err(Error::invalid(format!(
                "layer sizes {sizes:?} must all be positive"
            )));
        }
        Ok(Self {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    /// Weights drawn uniformly from `[-scale, scale]`, biases zero.
    pub fn random<R: Rng>(
        input_dim: usize,
        hidden: &[usize],
        scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut clf = Self::zeros(input_dim, hidden)?;
        if scale > 0.0 {
            for layer in &mut clf.layers {
                for w in &mut layer.weights {
                    *w = rng.random_range(-scale..=scale);
                }
            }
        }
        Ok(clf)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("classifier needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.inputs == 0
                || l.outputs == 0
                || l.weights.len() != l.inputs * l.outputs
                || l.bias.len() != l.outputs
            {
                return Err(Error::invalid(format!("layer {i} has inconsistent shapes")));
            }
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[0].outputs != w[1].inputs {
                return Err(Error::invalid(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    w[0].outputs,
                    i + 1,
                    w[1].inputs
                )));
            }
        }
        if layers.last().map(|l| l.outputs) != Some(CLASSES) {
            return Err(Error::invalid("final layer must have 3 outputs"));
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.outputs)
            .collect()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// All parameters in layer order, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                params.len()
            )));
        }
        let mut it = params.iter();
        for l in &mut self.layers {
            for p in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *p = *it.next().expect("length checked above");
            }
        }
        Ok(())
    }

    pub(crate) fn check_input(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "feature vector has {} entries, classifier expects {}",
                features.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Activations of every layer: `acts[0]` is the input, the last entry the
    /// output logits (pre-softmax). Hidden entries are post-`tanh`.
    pub(crate) fn activations(&self, features: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(features.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut y = Vec::with_capacity(layer.outputs);
            layer.apply(acts.last().expect("non-empty"), &mut y);
            if i < last {
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(y);
        }
        acts
    }

    pub fn logits(&self, features: &[f64]) -> Result<[f64; 3]> {
        self.check_input(features)?;
        let acts = self.activations(features);
        let out = acts.last().expect("non-empty");
        Ok([out[0], out[1], out[2]])
    }

    /// Softmax of the output logits.
    pub fn forward(&self, features: &[f64]) -> Result<[f64; 3]> {
        Ok(softmax(&self.logits(features)?))
    }

    /// Serializes to the versioned text format:
    ///
    /// ```text
    /// EADCLF v1 <input_dim> <hidden...> 3
    /// <weight row 0 of layer 0>
    /// ...
    /// <bias of layer 0>
    /// ...
    /// ```
    ///
    /// Reals use the shortest decimal form that parses back exactly.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = format!("{FORMAT_TAG} {FORMAT_VERSION} {}", self.input_dim());
        for h in self.hidden_dims() {
            write!(header, " {h}").expect("writing to a String");
        }
        writeln!(out, "{header} {CLASSES}")?;
        for l in &self.layers {
            for row in l.weights.chunks_exact(l.inputs) {
                writeln!(out, "{}", join_reals(row))?;
            }
            writeln!(out, "{}", join_reals(&l.bias))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("ASCII output")
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty classifier file"))?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() < 4 || fields[0] != FORMAT_TAG {
            return Err(Error::parse(
                1,
                format!("expected `{FORMAT_TAG} v1 ...` header"),
            ));
        }
        if fields[1] != FORMAT_VERSION {
            return Err(Error::parse(
                1,
                format!("unsupported version {:?}", fields[1]),
            ));
        }
        let sizes: Vec<usize> = fields[2..]
            .iter()
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::parse(1, format!("bad layer size {s:?}")))
            })
            .collect::<Result<_>>()?;
        if sizes.last() != Some(&CLASSES) {
            return Err(Error::parse(1, "final layer size must be 3"));
        }
        if sizes.contains(&0) {
            return Err(Error::parse(1, "layer sizes must be positive"));
        }

        let mut next_row = |want: usize| -> Result<Vec<f64>> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::parse(0, "classifier file ends early"))?;
            let line = line?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|s| {
                    s.parse()
                        .map_err(|_| Error::parse(no, format!("bad real {s:?}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != want {
                return Err(Error::parse(
                    no,
                    format!("expected {want} values, got {}", vals.len()),
                ));
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(no, "non-finite parameter"));
            }
            Ok(vals)
        };

        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for w in sizes.windows(2) {
            let (inputs, outputs) = (w[0], w[1]);
            let mut weights = Vec::with_capacity(inputs * outputs);
            for _ in 0..outputs {
                weights.extend(next_row(inputs)?);
            }
            let bias = next_row(outputs)?;
            layers.push(Layer {
                inputs,
                outputs,
                weights,
                bias,
            });
        }
        Self::from_layers(layers)
    }
}

impl FrameScorer for MlpClassifier {
    fn score(&self, features: &[f64]) -> Result<[f64; 3]> {
        self.forward(features)
    }
}

fn join_reals(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

pub(crate) fn log_softmax(z: &[f64; 3]) -> [f64; 3] {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    [z[0] - lse, z[1] - lse, z[2] - lse]
}

pub(crate) fn softmax(z: &[f64; 3]) -> [f64; 3] {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = [(z[0] - m).exp(), (z[1] - m).exp(), (z[2] - m).exp()];
    let s: f64 = e.iter().sum();
    [e[0] / s, e[1] / s, e[2] / s]
}
