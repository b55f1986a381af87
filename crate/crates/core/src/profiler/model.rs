use serde::{Deserialize, Serialize};

use super::gru::{GruParams, GruTrace, GRU_TENSORS};
use super::interaction::{interact, interact_backward, InteractionState};
use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, log_sigmoid, matvec, matvec_t_acc, outer_acc, sigmoid, Matrix, RngStream};

/// Probabilities are kept this far away from 0 and 1.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WircnnConfig {
    /// Embedding and feature size `E`.
    pub embed_dim: usize,
    /// Number of health tags `N`.
    pub n_classes: usize,
    /// Maximum token sequence length `M`.
    pub max_len: usize,
    /// Hidden size of each recurrent direction.
    pub hidden: usize,
    pub conv_widths: Vec<usize>,
    pub filters_per_width: usize,
    pub learning_rate: f64,
    pub threshold: f64,
    pub batch_size: usize,
    pub init_scale: f64,
}

impl Default for WircnnConfig {
    fn default() -> Self {
        Self {
            embed_dim: 128,
            n_classes: 96,
            max_len: 390,
            hidden: 128,
            conv_widths: vec![2, 3, 4],
            filters_per_width: 64,
            learning_rate: 0.001,
            threshold: 0.5,
            batch_size: 16,
            init_scale: 0.05,
        }
    }
}

impl WircnnConfig {
    /// Reduced sizes that train on a single core in seconds. With only 32
    /// embedding dimensions the ±0.05 initialisation leaves every logit near
    /// zero for dozens of epochs, so the weights start wider.
    pub fn desk(n_classes: usize) -> Self {
        Self {
            embed_dim: 32,
            n_classes,
            max_len: 80,
            hidden: 16,
            conv_widths: vec![2, 3, 4],
            filters_per_width: 8,
            learning_rate: 0.01,
            batch_size: 16,
            init_scale: 0.3,
            ..Self::default()
        }
    }

    /// Epoch count paired with [`Self::desk`].
    pub const DESK_EPOCHS: usize = 30;

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("embed_dim", self.embed_dim),
            ("n_classes", self.n_classes),
            ("max_len", self.max_len),
            ("hidden", self.hidden),
            ("filters_per_width", self.filters_per_width),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.conv_widths.is_empty() || self.conv_widths.iter().any(|&w| w == 0 || w > self.max_len) {
            return Err(Error::Config("conv widths must lie in 1..=max_len".into()));
        }
        if !(self.learning_rate > 0.0 && self.init_scale > 0.0) {
            return Err(Error::Config("learning_rate and init_scale must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config("threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Width of the per-step feature `[h_fwd; h_bwd; w'_e]`.
    pub fn step_dim(&self) -> usize {
        2 * self.hidden + self.embed_dim
    }

    pub fn pooled_dim(&self) -> usize {
        self.conv_widths.len() * self.filters_per_width
    }
}

/// One convolution filter bank: `filters` is K × (width · D), row-major over
/// window offset then feature.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvBank {
    pub width: usize,
    pub filters: Matrix,
    pub bias: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WircnnParams {
    pub embedding: Matrix,
    pub class_matrix: Matrix,
    pub gru_fwd: GruParams,
    pub gru_bwd: GruParams,
    pub conv: Vec<ConvBank>,
    pub proj_weight: Matrix,
    pub proj_bias: Matrix,
    generation: u64,
}

impl WircnnParams {
    pub fn zeros(config: &WircnnConfig, vocab_size: usize) -> Self {
        let (e, h, d, k) = (config.embed_dim, config.hidden, config.step_dim(), config.filters_per_width);
        Self {
            embedding: Matrix::zeros(vocab_size, e),
            class_matrix: Matrix::zeros(config.n_classes, e),
            gru_fwd: GruParams::zeros(e, h),
            gru_bwd: GruParams::zeros(e, h),
            conv: config
                .conv_widths
                .iter()
                .map(|&w| ConvBank {
                    width: w,
                    filters: Matrix::zeros(k, w * d),
                    bias: Matrix::zeros(1, k),
                })
                .collect(),
            proj_weight: Matrix::zeros(e, config.pooled_dim()),
            proj_bias: Matrix::zeros(1, e),
            generation: 0,
        }
    }

    /// Weights uniform in `±init_scale`, biases zero.
    pub fn init(config: &WircnnConfig, vocab_size: usize, rng: &mut RngStream) -> Self {
        let s = config.init_scale;
        let mut p = Self::zeros(config, vocab_size);
        p.embedding = Matrix::uniform(vocab_size, config.embed_dim, -s, s, rng);
        p.class_matrix = Matrix::uniform(config.n_classes, config.embed_dim, -s, s, rng);
        p.gru_fwd = GruParams::init(config.embed_dim, config.hidden, s, rng);
        p.gru_bwd = GruParams::init(config.embed_dim, config.hidden, s, rng);
        for bank in &mut p.conv {
            bank.filters = Matrix::uniform(bank.filters.rows(), bank.filters.cols(), -s, s, rng);
        }
        p.proj_weight = Matrix::uniform(p.proj_weight.rows(), p.proj_weight.cols(), -s, s, rng);
        p
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.tensors_mut().into_iter().for_each(|(_, m)| m.fill(0.0));
        z.generation = 0;
        z
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }

    /// Bumped by every in-place update; forward caches remember it.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn mark_updated(&mut self) {
        self.generation += 1;
    }

    pub fn tensor_names(&self) -> Vec<String> {
        self.tensors().into_iter().map(|(n, _)| n).collect()
    }

    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = vec![
            ("embedding".to_string(), &self.embedding),
            ("class_matrix".to_string(), &self.class_matrix),
        ];
        for (dir, gru) in [("gru_fwd", &self.gru_fwd), ("gru_bwd", &self.gru_bwd)] {
            for (name, m) in GRU_TENSORS.iter().zip(gru.tensors()) {
                out.push((format!("{dir}.{name}"), m));
            }
        }
        for bank in &self.conv {
            out.push((format!("conv{}.filters", bank.width), &bank.filters));
            out.push((format!("conv{}.bias", bank.width), &bank.bias));
        }
        out.push(("proj.weight".to_string(), &self.proj_weight));
        out.push(("proj.bias".to_string(), &self.proj_bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out = vec![
            ("embedding".to_string(), &mut self.embedding),
            ("class_matrix".to_string(), &mut self.class_matrix),
        ];
        for (dir, gru) in [("gru_fwd", &mut self.gru_fwd), ("gru_bwd", &mut self.gru_bwd)] {
            for (name, m) in GRU_TENSORS.iter().zip(gru.tensors_mut()) {
                out.push((format!("{dir}.{name}"), m));
            }
        }
        for bank in &mut self.conv {
            out.push((format!("conv{}.filters", bank.width), &mut bank.filters));
            out.push((format!("conv{}.bias", bank.width), &mut bank.bias));
        }
        out.push(("proj.weight".to_string(), &mut self.proj_weight));
        out.push(("proj.bias".to_string(), &mut self.proj_bias));
        out
    }

    /// Replaces every tensor, in [`Self::tensors`] order.
    pub fn set_tensors(&mut self, values: &[Matrix]) -> Result<()> {
        let mut slots = self.tensors_mut();
        if slots.len() != values.len() {
            return Err(Error::Input(format!("expected {} tensors, got {}", slots.len(), values.len())));
        }
        for ((name, slot), v) in slots.iter_mut().zip(values) {
            if slot.shape() != v.shape() {
                return Err(Error::Shape {
                    op: "set_tensors",
                    left: format!("{name} {}", slot.shape_str()),
                    right: v.shape_str(),
                });
            }
            **slot = v.clone();
        }
        drop(slots);
        self.mark_updated();
        Ok(())
    }

    /// `self += alpha * other`, tensor by tensor.
    pub fn add_scaled(&mut self, alpha: f64, other: &WircnnParams) {
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(dst.data_mut(), alpha, src.data());
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, m)| m.is_finite())
    }

    fn check(&self, config: &WircnnConfig) -> Result<()> {
        let expect = WircnnParams::zeros(config, self.vocab_size());
        for ((name, a), (_, b)) in self.tensors().iter().zip(expect.tensors()) {
            if a.shape() != b.shape() {
                return Err(Error::Shape {
                    op: "wircnn params",
                    left: format!("{name} {}", a.shape_str()),
                    right: b.shape_str(),
                });
            }
        }
        Ok(())
    }
}

/// Class probabilities, each strictly inside (0, 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionVector(pub Vec<f64>);

impl PredictionVector {
    pub fn from_logits(logits: &[f64]) -> Self {
        Self(
            logits
                .iter()
                .map(|&z| sigmoid(z).clamp(PROB_EPS, 1.0 - PROB_EPS))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Classes with probability ≥ `threshold`.
    pub fn above(&self, threshold: f64) -> Vec<u32> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p >= threshold)
            .map(|(i, _)| i as u32)
            .collect()
    }
}

#[derive(Clone, Debug)]
struct ConvTrace {
    argmax: Vec<usize>,
    /// tanh of the max pre-activation per filter.
    pooled: Vec<f64>,
}

/// Everything `backward` needs from one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    generation: u64,
    tokens: Vec<u32>,
    embedded: Matrix,
    pub state: InteractionState,
    fwd: GruTrace,
    bwd: GruTrace,
    steps: Matrix,
    conv: Vec<ConvTrace>,
    pooled: Vec<f64>,
    pub text_feature: Vec<f64>,
    pub logits: Vec<f64>,
}

fn check_tokens(tokens: &[u32], vocab_size: usize) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::Input("empty token sequence".into()));
    }
    if let Some(bad) = tokens.iter().find(|&&t| t as usize >= vocab_size) {
        return Err(Error::Input(format!(
            "token id {bad} outside vocabulary of {vocab_size}; map unknown tokens first"
        )));
    }
    Ok(())
}

/// Number of windows of `width` over `len` steps; a sequence shorter than
/// the window still yields one window, zero-padded on the right.
fn n_windows(len: usize, width: usize) -> usize {
    (len + 1).saturating_sub(width).max(1)
}

/// Embed → interact → bidirectional GRU over the weighted embeddings →
/// per-step `[h_fwd; h_bwd; w'_e]` → convolutions with max-over-time →
/// projection to `v_t` → `p_n = σ(v_t · W'_c[n])`.
///
/// Sequences longer than `max_len` are truncated.
pub fn forward(params: &WircnnParams, config: &WircnnConfig, tokens: &[u32]) -> Result<(PredictionVector, ForwardCache)> {
    params.check(config)?;
    let tokens = &tokens[..tokens.len().min(config.max_len)];
    check_tokens(tokens, params.vocab_size())?;
    let len = tokens.len();
    let (e, h) = (config.embed_dim, config.hidden);
    let d = config.step_dim();

    let embedded = Matrix::from_rows(&tokens.iter().map(|&t| params.embedding.row(t as usize)).collect::<Vec<_>>());
    let state = interact(&embedded, &params.class_matrix)?;
    let xs = &state.weighted_tokens;
    let fwd = params.gru_fwd.run(xs, false);
    let bwd = params.gru_bwd.run(xs, true);

    let mut steps = Matrix::zeros(len, d);
    for m in 0..len {
        let row = steps.row_mut(m);
        row[..h].copy_from_slice(fwd.h.row(m));
        row[h..2 * h].copy_from_slice(bwd.h.row(m));
        row[2 * h..].copy_from_slice(xs.row(m));
    }

    let mut conv = Vec::with_capacity(params.conv.len());
    let mut pooled = Vec::with_capacity(config.pooled_dim());
    for bank in &params.conv {
        let w = bank.width;
        let windows = n_windows(len, w);
        let k = bank.filters.rows();
        let mut best = vec![f64::NEG_INFINITY; k];
        let mut argmax = vec![0; k];
        for f in 0..k {
            let filt = bank.filters.row(f);
            for j in 0..windows {
                let mut acc = bank.bias.data()[f];
                for o in 0..w.min(len - j) {
                    acc += dot(&filt[o * d..(o + 1) * d], steps.row(j + o));
                }
                if acc > best[f] {
                    best[f] = acc;
                    argmax[f] = j;
                }
            }
        }
        let bank_pooled: Vec<f64> = best.iter().map(|b| b.tanh()).collect();
        pooled.extend_from_slice(&bank_pooled);
        conv.push(ConvTrace {
            argmax,
            pooled: bank_pooled,
        });
    }

    let mut text_feature = vec![0.0; e];
    matvec(&params.proj_weight, &pooled, &mut text_feature);
    axpy(&mut text_feature, 1.0, params.proj_bias.data());

    let logits: Vec<f64> = (0..config.n_classes)
        .map(|n| dot(&text_feature, state.weighted_classes.row(n)))
        .collect();
    let p = PredictionVector::from_logits(&logits);
    Ok((
        p,
        ForwardCache {
            generation: params.generation(),
            tokens: tokens.to_vec(),
            embedded,
            state,
            fwd,
            bwd,
            steps,
            conv,
            pooled,
            text_feature,
            logits,
        },
    ))
}

fn check_labels(n: usize, labels: &[f64]) -> Result<()> {
    if labels.len() != n {
        return Err(Error::Input(format!("{} labels for {n} classes", labels.len())));
    }
    Ok(())
}

/// Mean binary cross-entropy over classes.
pub fn loss(p: &PredictionVector, labels: &[f64]) -> Result<f64> {
    check_labels(p.len(), labels)?;
    if let Some(bad) = p.0.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
        return Err(Error::NonFinite(format!("probability {bad} outside (0, 1)")));
    }
    let total: f64 = p
        .0
        .iter()
        .zip(labels)
        .map(|(&p, &y)| -(y * p.ln() + (1.0 - y) * (1.0 - p).ln()))
        .sum();
    Ok(total / p.len() as f64)
}

/// The same loss computed from logits without clamping; this is the quantity
/// `backward` differentiates.
pub fn loss_from_logits(logits: &[f64], labels: &[f64]) -> Result<f64> {
    check_labels(logits.len(), labels)?;
    let total: f64 = logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| -(y * log_sigmoid(z) + (1.0 - y) * log_sigmoid(-z)))
        .sum();
    Ok(total / logits.len() as f64)
}

/// Multi-hot label vector for a tag set.
pub fn multi_hot(tags: &[u32], n_classes: usize) -> Vec<f64> {
    let mut y = vec![0.0; n_classes];
    for &t in tags {
        if (t as usize) < n_classes {
            y[t as usize] = 1.0;
        }
    }
    y
}

/// Gradients of [`loss_from_logits`] w.r.t. every parameter. Max-pooling
/// (interaction maxima and max-over-time) routes gradient to argmax entries
/// only.
pub fn backward(params: &WircnnParams, config: &WircnnConfig, cache: &ForwardCache, labels: &[f64]) -> Result<WircnnParams> {
    if cache.generation != params.generation() {
        return Err(Error::Usage(format!(
            "forward cache is stale (cached generation {}, params at {})",
            cache.generation,
            params.generation()
        )));
    }
    check_labels(config.n_classes, labels)?;
    let len = cache.tokens.len();
    let (e, h) = (config.embed_dim, config.hidden);
    let d = config.step_dim();
    let n_classes = config.n_classes as f64;
    let mut grads = params.zeros_like();

    // Output layer: logit_n = v_t · W'_c[n].
    let mut d_text = vec![0.0; e];
    let mut d_weighted_classes = Matrix::zeros(config.n_classes, e);
    for n in 0..config.n_classes {
        let g = (sigmoid(cache.logits[n]) - labels[n]) / n_classes;
        axpy(&mut d_text, g, cache.state.weighted_classes.row(n));
        axpy(d_weighted_classes.row_mut(n), g, &cache.text_feature);
    }

    // Projection.
    outer_acc(&mut grads.proj_weight, &d_text, &cache.pooled);
    axpy(grads.proj_bias.data_mut(), 1.0, &d_text);
    let mut d_pooled = vec![0.0; config.pooled_dim()];
    matvec_t_acc(&params.proj_weight, &d_text, &mut d_pooled);

    // Convolutions: only the argmax window of each filter receives gradient.
    let mut d_steps = Matrix::zeros(len, d);
    let mut offset = 0;
    for ((bank, trace), gbank) in params.conv.iter().zip(&cache.conv).zip(grads.conv.iter_mut()) {
        let w = bank.width;
        for f in 0..bank.filters.rows() {
            let t = trace.pooled[f];
            let g = d_pooled[offset + f] * (1.0 - t * t);
            if g == 0.0 {
                continue;
            }
            let j = trace.argmax[f];
            gbank.bias.data_mut()[f] += g;
            for o in 0..w.min(len - j) {
                axpy(&mut gbank.filters.row_mut(f)[o * d..(o + 1) * d], g, cache.steps.row(j + o));
                axpy(d_steps.row_mut(j + o), g, &bank.filters.row(f)[o * d..(o + 1) * d]);
            }
        }
        offset += bank.filters.rows();
    }

    // Split step features into the two recurrent streams and the direct path.
    let mut dh_fwd = Matrix::zeros(len, h);
    let mut dh_bwd = Matrix::zeros(len, h);
    let mut d_weighted_tokens = Matrix::zeros(len, e);
    for m in 0..len {
        let row = d_steps.row(m);
        dh_fwd.row_mut(m).copy_from_slice(&row[..h]);
        dh_bwd.row_mut(m).copy_from_slice(&row[h..2 * h]);
        d_weighted_tokens.row_mut(m).copy_from_slice(&row[2 * h..]);
    }
    let xs = &cache.state.weighted_tokens;
    params.gru_fwd.backward(xs, &cache.fwd, &dh_fwd, &mut grads.gru_fwd, &mut d_weighted_tokens);
    params.gru_bwd.backward(xs, &cache.bwd, &dh_bwd, &mut grads.gru_bwd, &mut d_weighted_tokens);

    let (d_embedded, d_classes) = interact_backward(
        &cache.embedded,
        &params.class_matrix,
        &cache.state,
        &d_weighted_tokens,
        &d_weighted_classes,
    );
    grads.class_matrix = d_classes;
    for (m, &t) in cache.tokens.iter().enumerate() {
        axpy(grads.embedding.row_mut(t as usize), 1.0, d_embedded.row(m));
    }
    Ok(grads)
}

/// Tags whose probability reaches the threshold (`p ≥ threshold`).
pub fn predict_tags(params: &WircnnParams, config: &WircnnConfig, tokens: &[u32]) -> Result<Vec<u32>> {
    let (p, _) = forward(params, config, tokens)?;
    Ok(p.above(config.threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;

    pub(crate) fn tiny_config() -> WircnnConfig {
        WircnnConfig {
            embed_dim: 6,
            n_classes: 4,
            max_len: 8,
            hidden: 5,
            conv_widths: vec![2, 3],
            filters_per_width: 3,
            init_scale: 0.5,
            ..WircnnConfig::default()
        }
    }

    #[test]
    fn zero_network_predicts_one_half() {
        let cfg = tiny_config();
        let params = WircnnParams::zeros(&cfg, 10);
        let (p, cache) = forward(&params, &cfg, &[2, 3, 4]).unwrap();
        assert_eq!(cache.text_feature, vec![0.0; 6]);
        assert_eq!(p.0, vec![0.5; 4]);
        assert_eq!(predict_tags(&params, &cfg, &[2, 3]).unwrap(), vec![0, 1, 2, 3]);
        let mut strict = cfg.clone();
        strict.threshold = 1.0;
        assert!(predict_tags(&params, &strict, &[2, 3]).unwrap().is_empty());
    }

    #[test]
    fn shape_contract() {
        let cfg = tiny_config();
        let params = WircnnParams::init(&cfg, 12, &mut RngStream::new(1));
        let (p, _) = forward(&params, &cfg, &[1, 5, 7, 2, 9, 11, 3, 4, 6, 8]).unwrap();
        assert_eq!(p.len(), 4);
        assert!(p.0.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn input_errors() {
        let cfg = tiny_config();
        let params = WircnnParams::zeros(&cfg, 5);
        assert!(matches!(forward(&params, &cfg, &[]), Err(Error::Input(_))));
        assert!(matches!(forward(&params, &cfg, &[5]), Err(Error::Input(_))));
    }

    #[test]
    fn loss_closed_forms() {
        let half = PredictionVector(vec![0.5; 3]);
        assert!((loss(&half, &[1.0, 0.0, 1.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let near = PredictionVector(vec![1.0 - 1e-9, 1e-9]);
        assert!(loss(&near, &[1.0, 0.0]).unwrap() < 1e-8);
        let p = PredictionVector(vec![0.9, 0.2]);
        let expected = (-(0.9f64).ln() - (0.8f64).ln()) / 2.0;
        assert!((loss(&p, &[1.0, 0.0]).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.16425).abs() < 1e-4);
        assert!(loss(&PredictionVector(vec![1.0]), &[1.0]).is_err());
        assert!(loss(&p, &[1.0]).is_err());
    }

    #[test]
    fn logits_loss_agrees_with_probability_loss() {
        let logits = [0.3, -1.2, 2.0];
        let y = [1.0, 0.0, 0.0];
        let a = loss_from_logits(&logits, &y).unwrap();
        let b = loss(&PredictionVector::from_logits(&logits), &y).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn stale_cache_is_rejected() {
        let cfg = tiny_config();
        let mut params = WircnnParams::init(&cfg, 10, &mut RngStream::new(2));
        let (_, cache) = forward(&params, &cfg, &[1, 2, 3]).unwrap();
        params.mark_updated();
        let err = backward(&params, &cfg, &cache, &[1.0, 0.0, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    fn check_gradients(cfg: &WircnnConfig, tokens: &[u32], seed: u64) {
        let vocab = 9;
        let params = WircnnParams::init(cfg, vocab, &mut RngStream::new(seed));
        let labels = [1.0, 0.0, 1.0, 0.0];
        let (_, cache) = forward(&params, cfg, tokens).unwrap();
        let grads = backward(&params, cfg, &cache, &labels).unwrap();
        let values: Vec<Matrix> = params.tensors().into_iter().map(|(_, m)| m.clone()).collect();
        let analytic: Vec<Matrix> = grads.tensors().into_iter().map(|(_, m)| m.clone()).collect();
        let report = grad_check(
            |ps| {
                let mut q = params.clone();
                q.set_tensors(ps)?;
                let (_, c) = forward(&q, cfg, tokens)?;
                loss_from_logits(&c.logits, &labels)
            },
            &values,
            &params.tensor_names(),
            &analytic,
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(report.passed(), "{:#?}", report.failing().collect::<Vec<_>>());
    }

    #[test]
    fn gradients_match_finite_differences() {
        check_gradients(&tiny_config(), &[1, 4, 2, 8, 3, 7, 5], 3);
    }

    #[test]
    fn gradients_with_sequence_shorter_than_window() {
        let cfg = tiny_config();
        check_gradients(&cfg, &[6, 2], 4);
        check_gradients(&cfg, &[6], 5);
    }

    #[test]
    fn zero_network_has_zero_gradient() {
        // v_t and W'_c are both zero, so every path is multiplied by zero.
        let cfg = tiny_config();
        let params = WircnnParams::zeros(&cfg, 6);
        let (_, cache) = forward(&params, &cfg, &[1, 2, 3]).unwrap();
        let grads = backward(&params, &cfg, &cache, &[1.0, 0.0, 1.0, 0.0]).unwrap();
        for (name, m) in grads.tensors() {
            assert!(m.data().iter().all(|&x| x == 0.0), "{name}");
        }
    }
}
