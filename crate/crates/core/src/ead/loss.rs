//! Cross-entropy, focal loss, their blend, and analytic gradients of the blend
//! with respect to every classifier parameter.

use crate::error::{Error, Result};

use super::classifier::{log_softmax, Layer, MlpClassifier};
use super::{check_distribution, DangerLevel};

/// `-ln p(label)`. `+inf` when the label has probability zero.
pub fn cross_entropy(dist: &[f64; 3], label: DangerLevel) -> Result<f64> {
    check_distribution(dist)?;
    let p = dist[label.ordinal()];
    Ok(if p == 0.0 { f64::INFINITY } else { -p.ln() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalLossConfig {
    pub gamma: f64,
    /// Per-class weights for A, B, C.
    pub alpha: [f64; 3],
}

impl Default for FocalLossConfig {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            alpha: [0.25, 0.5, 1.0],
        }
    }
}

impl FocalLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("focal gamma must be finite and >= 0"));
        }
        if self.alpha.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::invalid(
                "focal alpha weights must be finite and >= 0",
            ));
        }
        Ok(())
    }
}

/// `-alpha[label] * (1 - p)^gamma * ln p` with `p = p(label)`.
pub fn focal_loss(dist: &[f64; 3], label: DangerLevel, cfg: &FocalLossConfig) -> Result<f64> {
    let ce = cross_entropy(dist, label)?;
    let p = dist[label.ordinal()];
    if ce == 0.0 {
        return Ok(0.0);
    }
    Ok(cfg.alpha[label.ordinal()] * (1.0 - p).powf(cfg.gamma) * ce)
}

/// `lambda * CE + (1 - lambda) * FL`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendedLoss {
    pub focal: FocalLossConfig,
    pub lambda: f64,
}

impl Default for BlendedLoss {
    fn default() -> Self {
        Self {
            focal: FocalLossConfig::default(),
            lambda: 0.5,
        }
    }
}

impl BlendedLoss {
    pub fn validate(&self) -> Result<()> {
        self.focal.validate()?;
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid("loss blend lambda must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Loss and `dLoss/dlogits` for one sample, from log-softmax so that
    /// confident predictions do not underflow to `ln 0`.
    fn sample(&self, logits: &[f64; 3], label: DangerLevel) -> (f64, [f64; 3]) {
        let y = label.ordinal();
        let logp = log_softmax(logits);
        let p = [logp[0].exp(), logp[1].exp(), logp[2].exp()];
        let (lp, py) = (logp[y], p[y]);
        let one_minus = (1.0 - py).max(0.0);
        let alpha = self.focal.alpha[y];
        let gamma = self.focal.gamma;

        let ce = -lp;
        let modulator = if gamma == 0.0 {
            1.0
        } else {
            one_minus.powf(gamma)
        };
        let fl = alpha * modulator * ce;
        let loss = self.lambda * ce + (1.0 - self.lambda) * fl;

        // dFL/dz_j = alpha * [gamma (1-p)^(gamma-1) p ln p - (1-p)^gamma] (delta_jy - p_j)
        let first = if gamma == 0.0 || one_minus == 0.0 {
            0.0
        } else {
            gamma * one_minus.powf(gamma - 1.0) * py * lp
        };
        let fl_coeff = alpha * (first - modulator);
        let mut grad = [0.0; 3];
        for (j, g) in grad.iter_mut().enumerate() {
            let delta = if j == y { 1.0 } else { 0.0 };
            *g = self.lambda * (p[j] - delta) + (1.0 - self.lambda) * fl_coeff * (delta - p[j]);
        }
        (loss, grad)
    }
}

/// Gradient of the mean blended loss, shaped like the classifier's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    /// Flattened in the same order as [`MlpClassifier::params`].
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.flatten().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossEvaluation {
    pub loss: f64,
    pub gradients: Gradients,
}

/// Mean blended loss over `batch` and its analytic gradient.
pub fn loss_gradients(
    clf: &MlpClassifier,
    batch: &[(Vec<f64>, DangerLevel)],
    loss: &BlendedLoss,
) -> Result<LossEvaluation> {
    if batch.is_empty() {
        return Err(Error::invalid("loss gradients need a non-empty batch"));
    }
    let layers = clf.layers();
    let mut grads: Vec<Layer> = layers
        .iter()
        .map(|l| Layer::zeros(l.inputs, l.outputs))
        .collect();
    let mut total = 0.0;

    for (features, label) in batch {
        clf.check_input(features)?;
        let acts = clf.activations(features);
        let out = acts.last().expect("non-empty");
        let (l, dz) = loss.sample(&[out[0], out[1], out[2]], *label);
        total += l;

        let mut delta = dz.to_vec();
        for k in (0..layers.len()).rev() {
            let input = &acts[k];
            let g = &mut grads[k];
            for (o, d) in delta.iter().enumerate() {
                g.bias[o] += d;
                let row = &mut g.weights[o * g.inputs..(o + 1) * g.inputs];
                for (w, x) in row.iter_mut().zip(input) {
                    *w += d * x;
                }
            }
            if k > 0 {
                // back through layer k's weights, then tanh of layer k-1
                let layer = &layers[k];
                delta = (0..layer.inputs)
                    .map(|i| {
                        let back: f64 = (0..layer.outputs)
                            .map(|o| layer.weight(o, i) * delta[o])
                            .sum();
                        back * (1.0 - input[i] * input[i])
                    })
                    .collect();
            }
        }
    }

    let n = batch.len() as f64;
    for g in &mut grads {
        g.weights.iter_mut().for_each(|v| *v /= n);
        g.bias.iter_mut().for_each(|v| *v /= n);
    }
    Ok(LossEvaluation {
        loss: total / n,
        gradients: Gradients { layers: grads },
    })
}
