//! Word-class interaction: every token embedding is matched against every
//! class embedding, and the strongest match along each axis re-weights the
//! corresponding rows.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{axpy, dot, Matrix};

/// `I = W_e W_cᵀ`, its row/column maxima and the re-weighted matrices.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InteractionState {
    /// M×N token-class match scores.
    pub interaction: Matrix,
    /// `v_e[m] = max_n I[m][n]`
    pub token_weights: Vec<f64>,
    /// `v_c[n] = max_m I[m][n]`
    pub class_weights: Vec<f64>,
    /// Row m is `v_e[m] · W_e[m]`.
    pub weighted_tokens: Matrix,
    /// Row n is `v_c[n] · W_c[n]`.
    pub weighted_classes: Matrix,
    /// Column index of each row maximum (first on ties).
    pub(crate) token_argmax: Vec<usize>,
    /// Row index of each column maximum (first on ties).
    pub(crate) class_argmax: Vec<usize>,
}

pub fn interact(tokens: &Matrix, classes: &Matrix) -> Result<InteractionState> {
    if tokens.cols() != classes.cols() {
        return Err(Error::Shape {
            op: "interact",
            left: tokens.shape_str(),
            right: classes.shape_str(),
        });
    }
    let (m, n) = (tokens.rows(), classes.rows());
    if m == 0 || n == 0 {
        return Err(Error::Input("interaction needs at least one token and one class".into()));
    }
    let interaction = tokens.matmul_transposed(classes)?;

    let mut token_weights = vec![f64::NEG_INFINITY; m];
    let mut token_argmax = vec![0; m];
    let mut class_weights = vec![f64::NEG_INFINITY; n];
    let mut class_argmax = vec![0; n];
    for i in 0..m {
        for j in 0..n {
            let v = interaction.get(i, j);
            if v > token_weights[i] {
                token_weights[i] = v;
                token_argmax[i] = j;
            }
            if v > class_weights[j] {
                class_weights[j] = v;
                class_argmax[j] = i;
            }
        }
    }

    let mut weighted_tokens = tokens.clone();
    for (i, w) in token_weights.iter().enumerate() {
        weighted_tokens.row_mut(i).iter_mut().for_each(|x| *x *= w);
    }
    let mut weighted_classes = classes.clone();
    for (j, w) in class_weights.iter().enumerate() {
        weighted_classes.row_mut(j).iter_mut().for_each(|x| *x *= w);
    }
    Ok(InteractionState {
        interaction,
        token_weights,
        class_weights,
        weighted_tokens,
        weighted_classes,
        token_argmax,
        class_argmax,
    })
}

/// Routes a gradient through a max-pool: only the argmax slot receives it.
pub fn route_max_grad(len: usize, argmax: usize, grad: f64) -> Vec<f64> {
    let mut out = vec![0.0; len];
    out[argmax] = grad;
    out
}

/// Gradients of the loss w.r.t. `W_e` and `W_c`, given the gradients w.r.t.
/// the weighted matrices. The pooled weights pass gradient only to their
/// argmax entries of `I`.
pub fn interact_backward(
    tokens: &Matrix,
    classes: &Matrix,
    state: &InteractionState,
    d_weighted_tokens: &Matrix,
    d_weighted_classes: &Matrix,
) -> (Matrix, Matrix) {
    let mut d_tokens = Matrix::zeros(tokens.rows(), tokens.cols());
    let mut d_classes = Matrix::zeros(classes.rows(), classes.cols());
    for i in 0..tokens.rows() {
        let g = d_weighted_tokens.row(i);
        axpy(d_tokens.row_mut(i), state.token_weights[i], g);
        // ∂L/∂v_e[i] flows into I[i][argmax], whose partials are c_j and e_i.
        let dv = dot(g, tokens.row(i));
        let j = state.token_argmax[i];
        axpy(d_tokens.row_mut(i), dv, classes.row(j));
        axpy(d_classes.row_mut(j), dv, tokens.row(i));
    }
    for j in 0..classes.rows() {
        let g = d_weighted_classes.row(j);
        axpy(d_classes.row_mut(j), state.class_weights[j], g);
        let dv = dot(g, classes.row(j));
        let i = state.class_argmax[j];
        axpy(d_tokens.row_mut(i), dv, classes.row(j));
        axpy(d_classes.row_mut(j), dv, tokens.row(i));
    }
    (d_tokens, d_classes)
}
