use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::classifier::MlpClassifier;
use super::loss::{loss_gradients, BlendedLoss};
use super::DangerLevel;

/// Hyperparameters for [`train_classifier`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden_dims: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Mini-batch size; one gradient step per batch.
    pub batch_size: usize,
    /// Initial weights are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub seed: u64,
    pub loss: BlendedLoss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dims: vec![8],
            learning_rate: 0.5,
            epochs: 4,
            batch_size: 10,
            init_scale: 0.5,
            seed: 42,
            loss: BlendedLoss::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be finite and >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::invalid("init scale must be finite and >= 0"));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        Ok(())
    }
}

/// Whole-dataset loss and accuracy after one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    pub classifier: MlpClassifier,
    pub history: Vec<EpochStats>,
}

impl TrainedClassifier {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.history.last().map(|s| s.accuracy)
    }
}

/// Fraction of samples whose argmax prediction equals the label.
pub fn accuracy(clf: &MlpClassifier, data: &[(Vec<f64>, DangerLevel)]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("accuracy of an empty dataset"));
    }
    let mut hits = 0usize;
    for (x, y) in data {
        if DangerLevel::argmax(&clf.forward(x)?) == *y {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Mini-batch gradient descent with a fixed learning rate. Shuffling and
/// initialization draw from a ChaCha8 stream seeded with `cfg.seed`, so equal
/// inputs give bitwise-equal results.
pub fn train_classifier(
    data: &[(Vec<f64>, DangerLevel)],
    cfg: &TrainConfig,
) -> Result<TrainedClassifier> {
    cfg.validate()?;
    let Some((first, _)) = data.first() else {
        return Err(Error::invalid("training data is empty"));
    };
    let dim = first.len();
    if dim == 0 {
        return Err(Error::invalid("feature vectors are empty"));
    }
    if let Some(i) = data.iter().position(|(x, _)| x.len() != dim) {
        return Err(Error::invalid(format!(
            "sample {i} has {} features, expected {dim}",
            data[i].0.len()
        )));
    }
    if let Some(i) = data
        .iter()
        .position(|(x, _)| x.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::invalid(format!(
            "sample {i} has non-finite features"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut clf = MlpClassifier::random(dim, &cfg.hidden_dims, cfg.init_scale, &mut rng)?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i].clone()));
            let eval = loss_gradients(&clf, &batch, &cfg.loss)?;
            if !eval.loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    step,
                    message: format!(
                        "batch loss is {}; max |gradient| {}",
                        eval.loss,
                        eval.gradients.max_abs()
                    ),
                });
            }
            for (layer, grad) in clf.layers_mut().iter_mut().zip(&eval.gradients.layers) {
                for (w, g) in layer.weights.iter_mut().zip(&grad.weights) {
                    *w -= cfg.learning_rate * g;
                }
                for (b, g) in layer.bias.iter_mut().zip(&grad.bias) {
                    *b -= cfg.learning_rate * g;
                }
            }
        }

        let full = loss_gradients(&clf, data, &cfg.loss)?;
        if !full.loss.is_finite() {
            return Err(Error::Training {
                epoch,
                step: order.len().div_ceil(cfg.batch_size),
                message: format!("epoch loss is {}", full.loss),
            });
        }
        history.push(EpochStats {
            epoch,
            loss: full.loss,
            accuracy: accuracy(&clf, data)?,
        });
    }

    Ok(TrainedClassifier {
        classifier: clf,
        history,
    })
}
