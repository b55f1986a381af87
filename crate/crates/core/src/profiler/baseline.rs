//! Averaged-embedding classifier: the mean token embedding goes through one
//! linear layer and a sigmoid.

use crate::error::{Error, Result};
use crate::numerics::{axpy, log_sigmoid, matvec, matvec_t_acc, outer_acc, sigmoid, Matrix, RngStream};

use super::model::{PredictionVector, WircnnConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineParams {
    pub embedding: Matrix,
    /// N × E
    pub weight: Matrix,
    /// 1 × N
    pub bias: Matrix,
}

impl BaselineParams {
    pub fn zeros(config: &WircnnConfig, vocab_size: usize) -> Self {
        Self {
            embedding: Matrix::zeros(vocab_size, config.embed_dim),
            weight: Matrix::zeros(config.n_classes, config.embed_dim),
            bias: Matrix::zeros(1, config.n_classes),
        }
    }

    pub fn init(config: &WircnnConfig, vocab_size: usize, rng: &mut RngStream) -> Self {
        let s = config.init_scale;
        Self {
            embedding: Matrix::uniform(vocab_size, config.embed_dim, -s, s, rng),
            weight: Matrix::uniform(config.n_classes, config.embed_dim, -s, s, rng),
            bias: Matrix::zeros(1, config.n_classes),
        }
    }

    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        vec![
            ("embedding".into(), &self.embedding),
            ("weight".into(), &self.weight),
            ("bias".into(), &self.bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        vec![
            ("embedding".into(), &mut self.embedding),
            ("weight".into(), &mut self.weight),
            ("bias".into(), &mut self.bias),
        ]
    }
}

fn mean_embedding(embedding: &Matrix, tokens: &[u32]) -> Result<Vec<f64>> {
    if tokens.is_empty() {
        return Err(Error::Input("empty token sequence".into()));
    }
    let mut mean = vec![0.0; embedding.cols()];
    let w = 1.0 / tokens.len() as f64;
    for &t in tokens {
        if t as usize >= embedding.rows() {
            return Err(Error::Input(format!("token id {t} outside vocabulary of {}", embedding.rows())));
        }
        axpy(&mut mean, w, embedding.row(t as usize));
    }
    Ok(mean)
}

/// Logits `W · mean(e_t) + b`.
pub fn baseline_logits(embedding: &Matrix, weight: &Matrix, bias: &Matrix, tokens: &[u32]) -> Result<Vec<f64>> {
    if weight.cols() != embedding.cols() || bias.shape() != (1, weight.rows()) {
        return Err(Error::Shape {
            op: "baseline_avg_forward",
            left: format!("embedding {} weight {}", embedding.shape_str(), weight.shape_str()),
            right: format!("bias {}", bias.shape_str()),
        });
    }
    let mean = mean_embedding(embedding, tokens)?;
    let mut z = vec![0.0; weight.rows()];
    matvec(weight, &mean, &mut z);
    axpy(&mut z, 1.0, bias.data());
    Ok(z)
}

pub fn baseline_avg_forward(embedding: &Matrix, weight: &Matrix, bias: &Matrix, tokens: &[u32]) -> Result<PredictionVector> {
    Ok(PredictionVector::from_logits(&baseline_logits(embedding, weight, bias, tokens)?))
}

/// Mean-over-classes cross-entropy and its gradient for one example.
pub fn baseline_loss_and_grad(params: &BaselineParams, tokens: &[u32], labels: &[f64]) -> Result<(f64, BaselineParams)> {
    let z = baseline_logits(&params.embedding, &params.weight, &params.bias, tokens)?;
    if labels.len() != z.len() {
        return Err(Error::Input(format!("{} labels for {} classes", labels.len(), z.len())));
    }
    let n = z.len() as f64;
    let mut loss = 0.0;
    let mut dz = vec![0.0; z.len()];
    for (k, (&zk, &y)) in z.iter().zip(labels).enumerate() {
        loss -= y * log_sigmoid(zk) + (1.0 - y) * log_sigmoid(-zk);
        dz[k] = (sigmoid(zk) - y) / n;
    }
    let mean = mean_embedding(&params.embedding, tokens)?;
    let mut grads = BaselineParams {
        embedding: Matrix::zeros(params.embedding.rows(), params.embedding.cols()),
        weight: Matrix::zeros(params.weight.rows(), params.weight.cols()),
        bias: Matrix::from_vec(1, dz.len(), dz.clone())?,
    };
    outer_acc(&mut grads.weight, &dz, &mean);
    let mut d_mean = vec![0.0; mean.len()];
    matvec_t_acc(&params.weight, &dz, &mut d_mean);
    let w = 1.0 / tokens.len() as f64;
    for &t in tokens {
        axpy(grads.embedding.row_mut(t as usize), w, &d_mean);
    }
    Ok((loss / n, grads))
}
