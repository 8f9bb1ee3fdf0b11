use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::DenseArray;

/// AdamW hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-2,
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Vec<DenseArray>,
    pub second: Vec<DenseArray>,
    /// Number of completed steps.
    pub step: u64,
}

impl AdamState {
    pub fn for_params(params: &[DenseArray]) -> Self {
        AdamState {
            first: params.iter().map(|p| DenseArray::zeros(p.dims())).collect(),
            second: params.iter().map(|p| DenseArray::zeros(p.dims())).collect(),
            step: 0,
        }
    }
}

/// One AdamW update with decoupled weight decay:
///
/// `w <- w - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * w`
///
/// where `m_hat`, `v_hat` are the bias-corrected moments at step `t = state.step + 1`.
/// Fails without touching anything if a gradient is non-finite.
pub fn adamw_step(
    params: &mut [DenseArray],
    grads: &[DenseArray],
    state: &mut AdamState,
    hyper: &AdamWConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::Validation(format!(
            "adamw: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if !p.same_shape(g) || !p.same_shape(&state.first[i]) {
            return Err(Error::dims("adamw_step", p.dims(), g.dims()));
        }
        if let Some(j) = g.first_non_finite() {
            return Err(Error::NonFinite(format!(
                "gradient of parameter {i} is {} at element {j} (step {})",
                g.data()[j],
                state.step + 1
            )));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hyper.beta1.powi(t);
    let bc2 = 1.0 - hyper.beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first.iter_mut().zip(state.second.iter_mut()))
    {
        for (((w, &gv), mv), vv) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mv = hyper.beta1 * *mv + (1.0 - hyper.beta1) * gv;
            *vv = hyper.beta2 * *vv + (1.0 - hyper.beta2) * gv * gv;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *w -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps) + hyper.lr * hyper.weight_decay * *w;
        }
    }
    Ok(())
}
