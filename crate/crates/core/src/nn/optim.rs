use serde::{Deserialize, Serialize};

use crate::Scalar;

use super::{GradientSet, Mlp, NnError, Result};

/// Default global-norm clip applied before each optimizer step.
pub const DEFAULT_CLIP_NORM: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    Sgd,
}

impl Default for OptimizerKind {
    fn default() -> Self {
        Self::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment accumulators and step counter for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T> {
    pub kind: OptimizerKind,
    pub learning_rate: T,
    step: u64,
    first: Vec<T>,
    second: Vec<T>,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(net: &Mlp<T>, kind: OptimizerKind, learning_rate: f64) -> Self {
        let n = match kind {
            OptimizerKind::Adam { .. } => net.num_params(),
            OptimizerKind::Sgd => 0,
        };
        Self {
            kind,
            learning_rate: T::lit(learning_rate),
            step: 0,
            first: vec![T::zero(); n],
            second: vec![T::zero(); n],
        }
    }

    pub fn adam(net: &Mlp<T>, learning_rate: f64) -> Self {
        Self::new(net, OptimizerKind::default(), learning_rate)
    }

    pub fn sgd(net: &Mlp<T>, learning_rate: f64) -> Self {
        Self::new(net, OptimizerKind::Sgd, learning_rate)
    }

    pub fn steps(&self) -> u64 {
        self.step
    }
}

/// Applies one update. Non-finite gradients leave `params` and `state`
/// untouched and return an error naming the first offending entry.
pub fn optimizer_step<T: Scalar>(
    params: &mut Mlp<T>,
    grads: &GradientSet<T>,
    state: &mut OptimizerState<T>,
) -> Result<()> {
    if !grads.matches(params) {
        return Err(NnError::Shape("gradient set does not match the network".into()));
    }
    if let Some(idx) = grads.values().position(|g| !g.is_finite()) {
        return Err(NnError::NonFinite(format!("gradient entry {idx}")));
    }
    let lr = state.learning_rate;
    match state.kind {
        OptimizerKind::Sgd => {
            for (p, &g) in params.params_mut().zip(grads.values()) {
                *p -= lr * g;
            }
        }
        OptimizerKind::Adam { beta1, beta2, epsilon } => {
            if state.first.len() != params.num_params() {
                return Err(NnError::Shape("optimizer state does not match the network".into()));
            }
            state.step += 1;
            let (b1, b2, eps) = (T::lit(beta1), T::lit(beta2), T::lit(epsilon));
            let t = state.step as i32;
            let c1 = T::one() - b1.powi(t);
            let c2 = T::one() - b2.powi(t);
            for (((p, &g), m), v) in params
                .params_mut()
                .zip(grads.values())
                .zip(state.first.iter_mut())
                .zip(state.second.iter_mut())
            {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
    if !params.is_finite() {
        return Err(NnError::NonFinite("parameters after update".into()));
    }
    Ok(())
}

/// Rescales `grads` so its global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut GradientSet<T>, max_norm: T) -> T {
    let norm = grads.norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// `target <- kappa * source + (1 - kappa) * target`, element-wise.
pub fn soft_update<T: Scalar>(target: &mut Mlp<T>, source: &Mlp<T>, kappa: T) -> Result<()> {
    if !(kappa >= T::zero() && kappa <= T::one()) {
        return Err(NnError::Config(format!("soft-update coefficient {kappa} outside [0, 1]")));
    }
    if !target.same_shape(source) {
        return Err(NnError::Shape("target and source networks differ in shape".into()));
    }
    let keep = T::one() - kappa;
    for (t, &s) in target.params_mut().zip(source.params()) {
        *t = kappa * s + keep * *t;
    }
    Ok(())
}
