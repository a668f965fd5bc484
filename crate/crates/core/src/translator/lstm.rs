//! Single LSTM cell: forward step, cached forward for training, and the
//! matching backward step.

use crate::linalg::{self, Matrix};
use crate::translator::TranslatorError;

/// Parameters of one LSTM cell. Rows of `w_x` and `w_h` are stacked in gate
/// order input, forget, cell, output, so both are 4h-row matrices.
#[derive(Debug, Clone)]
pub struct LstmCellParams {
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub b: Vec<f64>,
}

impl LstmCellParams {
    pub fn hidden_dim(&self) -> usize {
        self.b.len() / 4
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.cols()
    }

    pub fn validate(&self) -> Result<(), TranslatorError> {
        let h = self.hidden_dim();
        if self.b.len() != 4 * h || h == 0 {
            return Err(TranslatorError::Config(
                "bias length must be a positive multiple of 4".into(),
            ));
        }
        if self.w_x.rows() != 4 * h || self.w_h.rows() != 4 * h || self.w_h.cols() != h {
            return Err(TranslatorError::Config(
                "LSTM weight shapes inconsistent with hidden dim".into(),
            ));
        }
        if !self.all_finite() {
            return Err(TranslatorError::NonFinite("LSTM parameters".into()));
        }
        Ok(())
    }

    fn all_finite(&self) -> bool {
        self.w_x.data().iter().all(|v| v.is_finite())
            && self.w_h.data().iter().all(|v| v.is_finite())
            && self.b.iter().all(|v| v.is_finite())
    }
}

/// Mutable gradient mirror of [`LstmCellParams`].
#[derive(Debug, Clone)]
pub(crate) struct LstmGrads {
    pub w_x: Matrix,
    pub w_h: Matrix,
    pub b: Vec<f64>,
}

impl LstmGrads {
    pub fn zeros_like(cell: &LstmCellParams) -> Self {
        LstmGrads {
            w_x: Matrix::zeros(cell.w_x.rows(), cell.w_x.cols()),
            w_h: Matrix::zeros(cell.w_h.rows(), cell.w_h.cols()),
            b: vec![0.0; cell.b.len()],
        }
    }
}

/// Everything the backward pass needs about one forward step. `gates` holds
/// post-activation values in i,f,g,o order.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub gates: Vec<f64>,
    pub c_new: Vec<f64>,
}

pub(crate) fn forward_step(
    cell: &LstmCellParams,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> (Vec<f64>, StepCache) {
    let h = cell.hidden_dim();
    let mut z = cell.b.clone();
    cell.w_x.matvec_add(x, &mut z);
    cell.w_h.matvec_add(h_prev, &mut z);

    let mut gates = z;
    for j in 0..h {
        gates[j] = linalg::sigmoid(gates[j]);
        gates[h + j] = linalg::sigmoid(gates[h + j]);
        gates[2 * h + j] = gates[2 * h + j].tanh();
        gates[3 * h + j] = linalg::sigmoid(gates[3 * h + j]);
    }

    let mut c_new = vec![0.0; h];
    let mut h_new = vec![0.0; h];
    for j in 0..h {
        let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
        c_new[j] = f * c_prev[j] + i * g;
        h_new[j] = o * c_new[j].tanh();
    }

    let cache = StepCache {
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates,
        c_new,
    };
    (h_new, cache)
}

/// One gate-equation evaluation. Checks inputs for finiteness; use the
/// cached internal path for training loops.
pub fn lstm_step(
    cell: &LstmCellParams,
    x: &[f64],
    h: &[f64],
    c: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), TranslatorError> {
    cell.validate()?;
    if x.len() != cell.input_dim() || h.len() != cell.hidden_dim() || c.len() != cell.hidden_dim()
    {
        return Err(TranslatorError::Config(format!(
            "lstm_step shapes: x={}, h={}, c={} for d={}, h={}",
            x.len(),
            h.len(),
            c.len(),
            cell.input_dim(),
            cell.hidden_dim()
        )));
    }
    if x.iter().chain(h).chain(c).any(|v| !v.is_finite()) {
        return Err(TranslatorError::NonFinite("lstm_step inputs".into()));
    }
    let (h_new, cache) = forward_step(cell, x, h, c);
    Ok((h_new, cache.c_new))
}

/// Backward through one step. `dh` and `dc` carry the loss gradient with
/// respect to this step's outputs; returns gradients for the step's inputs
/// and accumulates parameter gradients into `grads`.
pub(crate) fn backward_step(
    cell: &LstmCellParams,
    cache: &StepCache,
    x: &[f64],
    dh: &[f64],
    dc: &[f64],
    grads: &mut LstmGrads,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let h = cell.hidden_dim();
    let mut dz = vec![0.0; 4 * h];
    let mut dc_prev = vec![0.0; h];

    for j in 0..h {
        let (i, f, g, o) = (
            cache.gates[j],
            cache.gates[h + j],
            cache.gates[2 * h + j],
            cache.gates[3 * h + j],
        );
        let t = cache.c_new[j].tanh();
        let d_o = dh[j] * t;
        dz[3 * h + j] = d_o * o * (1.0 - o);
        let dc_total = dc[j] + dh[j] * o * (1.0 - t * t);
        let d_f = dc_total * cache.c_prev[j];
        dz[h + j] = d_f * f * (1.0 - f);
        let d_i = dc_total * g;
        dz[j] = d_i * i * (1.0 - i);
        let d_g = dc_total * i;
        dz[2 * h + j] = d_g * (1.0 - g * g);
        dc_prev[j] = dc_total * f;
    }

    grads.w_x.add_outer(1.0, &dz, x);
    grads.w_h.add_outer(1.0, &dz, &cache.h_prev);
    linalg::axpy(1.0, &dz, &mut grads.b);

    let mut dx = vec![0.0; cell.input_dim()];
    cell.w_x.matvec_transpose_add(&dz, &mut dx);
    let mut dh_prev = vec![0.0; h];
    cell.w_h.matvec_transpose_add(&dz, &mut dh_prev);

    (dx, dh_prev, dc_prev)
}
