//! Gated recurrent unit with update and reset gates.
//!
//! ```text
//! z = σ(W_z x + U_z h + b_z)
//! r = σ(W_r x + U_r h + b_r)
//! n = tanh(W_n x + U_n (r ⊙ h) + b_n)
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```

use crate::numerics::{axpy, matvec, matvec_t_acc, outer_acc, sigmoid, Matrix, RngStream};

#[derive(Clone, Debug, PartialEq)]
pub struct GruParams {
    pub w_z: Matrix,
    pub w_r: Matrix,
    pub w_n: Matrix,
    pub u_z: Matrix,
    pub u_r: Matrix,
    pub u_n: Matrix,
    pub b_z: Matrix,
    pub b_r: Matrix,
    pub b_n: Matrix,
}

pub(crate) const GRU_TENSORS: [&str; 9] = ["w_z", "w_r", "w_n", "u_z", "u_r", "u_n", "b_z", "b_r", "b_n"];

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_z: Matrix::zeros(hidden, input),
            w_r: Matrix::zeros(hidden, input),
            w_n: Matrix::zeros(hidden, input),
            u_z: Matrix::zeros(hidden, hidden),
            u_r: Matrix::zeros(hidden, hidden),
            u_n: Matrix::zeros(hidden, hidden),
            b_z: Matrix::zeros(1, hidden),
            b_r: Matrix::zeros(1, hidden),
            b_n: Matrix::zeros(1, hidden),
        }
    }

    /// Weights uniform in `(-scale, scale)`, biases zero.
    pub fn init(input: usize, hidden: usize, scale: f64, rng: &mut RngStream) -> Self {
        let mut p = Self::zeros(input, hidden);
        for m in [&mut p.w_z, &mut p.w_r, &mut p.w_n, &mut p.u_z, &mut p.u_r, &mut p.u_n] {
            *m = Matrix::uniform(m.rows(), m.cols(), -scale, scale, rng);
        }
        p
    }

    pub fn hidden(&self) -> usize {
        self.w_z.rows()
    }

    pub fn tensors(&self) -> [&Matrix; 9] {
        [
            &self.w_z, &self.w_r, &self.w_n, &self.u_z, &self.u_r, &self.u_n, &self.b_z, &self.b_r,
            &self.b_n,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix; 9] {
        [
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_n,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_n,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_n,
        ]
    }
}

/// Activations of one pass over a sequence, indexed by sequence position.
#[derive(Clone, Debug)]
pub struct GruTrace {
    pub reverse: bool,
    /// Hidden state emitted at each position.
    pub h: Matrix,
    h_prev: Matrix,
    z: Matrix,
    r: Matrix,
    n: Matrix,
}

/// Positions in processing order.
fn order(len: usize, reverse: bool) -> Box<dyn Iterator<Item = usize>> {
    if reverse {
        Box::new((0..len).rev())
    } else {
        Box::new(0..len)
    }
}

impl GruParams {
    /// Runs over the rows of `xs`, right to left when `reverse`.
    pub fn run(&self, xs: &Matrix, reverse: bool) -> GruTrace {
        let len = xs.rows();
        let hd = self.hidden();
        let mut trace = GruTrace {
            reverse,
            h: Matrix::zeros(len, hd),
            h_prev: Matrix::zeros(len, hd),
            z: Matrix::zeros(len, hd),
            r: Matrix::zeros(len, hd),
            n: Matrix::zeros(len, hd),
        };
        let mut h = vec![0.0; hd];
        let mut a = vec![0.0; hd];
        let mut u = vec![0.0; hd];
        let mut rh = vec![0.0; hd];
        for m in order(len, reverse) {
            let x = xs.row(m);
            trace.h_prev.row_mut(m).copy_from_slice(&h);

            matvec(&self.w_z, x, &mut a);
            matvec(&self.u_z, &h, &mut u);
            let z = trace.z.row_mut(m);
            for j in 0..hd {
                z[j] = sigmoid(a[j] + u[j] + self.b_z.data()[j]);
            }

            matvec(&self.w_r, x, &mut a);
            matvec(&self.u_r, &h, &mut u);
            let r = trace.r.row_mut(m);
            for j in 0..hd {
                r[j] = sigmoid(a[j] + u[j] + self.b_r.data()[j]);
                rh[j] = r[j] * h[j];
            }

            matvec(&self.w_n, x, &mut a);
            matvec(&self.u_n, &rh, &mut u);
            let n = trace.n.row_mut(m);
            for j in 0..hd {
                n[j] = (a[j] + u[j] + self.b_n.data()[j]).tanh();
            }

            let z = trace.z.row(m);
            let n = trace.n.row(m);
            for j in 0..hd {
                h[j] = (1.0 - z[j]) * n[j] + z[j] * h[j];
            }
            trace.h.row_mut(m).copy_from_slice(&h);
        }
        trace
    }

    /// Backpropagation through time. `dh` holds the loss gradient w.r.t. the
    /// hidden state emitted at each position; parameter gradients accumulate
    /// into `grads` and input gradients into `dxs`.
    pub fn backward(&self, xs: &Matrix, trace: &GruTrace, dh: &Matrix, grads: &mut GruParams, dxs: &mut Matrix) {
        let len = xs.rows();
        let hd = self.hidden();
        let mut carry = vec![0.0; hd];
        let mut dh_t = vec![0.0; hd];
        let mut da_z = vec![0.0; hd];
        let mut da_r = vec![0.0; hd];
        let mut da_n = vec![0.0; hd];
        let mut d_rh = vec![0.0; hd];
        let mut rh = vec![0.0; hd];
        for m in order(len, !trace.reverse) {
            let x = xs.row(m);
            let (hp, z, r, n) = (trace.h_prev.row(m), trace.z.row(m), trace.r.row(m), trace.n.row(m));
            for j in 0..hd {
                dh_t[j] = dh.get(m, j) + carry[j];
            }
            let mut dh_prev = vec![0.0; hd];
            for j in 0..hd {
                let dz = dh_t[j] * (hp[j] - n[j]);
                let dn = dh_t[j] * (1.0 - z[j]);
                dh_prev[j] = dh_t[j] * z[j];
                da_z[j] = dz * z[j] * (1.0 - z[j]);
                da_n[j] = dn * (1.0 - n[j] * n[j]);
                rh[j] = r[j] * hp[j];
            }
            d_rh.iter_mut().for_each(|v| *v = 0.0);
            matvec_t_acc(&self.u_n, &da_n, &mut d_rh);
            for j in 0..hd {
                let dr = d_rh[j] * hp[j];
                dh_prev[j] += d_rh[j] * r[j];
                da_r[j] = dr * r[j] * (1.0 - r[j]);
            }

            outer_acc(&mut grads.w_z, &da_z, x);
            outer_acc(&mut grads.w_r, &da_r, x);
            outer_acc(&mut grads.w_n, &da_n, x);
            outer_acc(&mut grads.u_z, &da_z, hp);
            outer_acc(&mut grads.u_r, &da_r, hp);
            outer_acc(&mut grads.u_n, &da_n, &rh);
            axpy(grads.b_z.data_mut(), 1.0, &da_z);
            axpy(grads.b_r.data_mut(), 1.0, &da_r);
            axpy(grads.b_n.data_mut(), 1.0, &da_n);

            matvec_t_acc(&self.u_z, &da_z, &mut dh_prev);
            matvec_t_acc(&self.u_r, &da_r, &mut dh_prev);

            let dx = dxs.row_mut(m);
            matvec_t_acc(&self.w_z, &da_z, dx);
            matvec_t_acc(&self.w_r, &da_r, dx);
            matvec_t_acc(&self.w_n, &da_n, dx);

            carry = dh_prev;
        }
    }
}
