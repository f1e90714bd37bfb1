use serde::{Deserialize, Serialize};

use super::params::{ParamRole, Parameters};
use crate::error::{Error, Result};

/// Plain SGD with coupled L2 weight decay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.005,
            weight_decay: 0.005,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid(format!("weight_decay must be >= 0, got {}", self.weight_decay)));
        }
        Ok(())
    }
}

/// `w ← w − lr · (g + wd · w)` for weights, `b ← b − lr · g` for biases.
pub fn sgd_step<P: Parameters>(params: &mut P, gradients: &P, config: &SgdConfig) -> Result<()> {
    let grads = gradients.params();
    let mut targets = params.params_mut();
    if grads.len() != targets.len() {
        return Err(Error::shape("sgd_step parameter count", targets.len(), grads.len()));
    }
    for (p, g) in targets.iter_mut().zip(&grads) {
        if p.values.len() != g.values.len() || p.name != g.name {
            return Err(Error::shape(
                "sgd_step parameter",
                format!("{} ({})", p.name, p.values.len()),
                format!("{} ({})", g.name, g.values.len()),
            ));
        }
        let decay = match p.role {
            ParamRole::Weight => config.weight_decay,
            ParamRole::Bias => 0.0,
        };
        let lr = config.learning_rate;
        for (w, &d) in p.values.iter_mut().zip(g.values) {
            *w -= lr * (d + decay * *w);
        }
    }
    Ok(())
}
