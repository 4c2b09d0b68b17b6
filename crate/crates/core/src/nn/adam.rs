//! Adam optimizer with bias correction.

use super::params::ModelParams;
use super::{ModelConfig, NnError};

/// Optimizer hyperparameters; defaults are the standard Adam values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First- and second-moment accumulators shaped like the parameters, plus
/// the step counter used for bias correction.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: ModelParams,
    v: ModelParams,
    t: u64,
    pub hyper: AdamHyper,
}

impl AdamState {
    pub fn new(config: &ModelConfig, hyper: AdamHyper) -> Self {
        AdamState {
            m: ModelParams::zeros(config),
            v: ModelParams::zeros(config),
            t: 0,
            hyper,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update: m and v track gradient moments, bias-corrected
    /// estimates drive the parameter step.
    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) -> Result<(), NnError> {
        if params.n_params() != grads.n_params() || params.n_params() != self.m.n_params() {
            return Err(NnError::DimensionMismatch(format!(
                "adam step: params {} vs grads {} vs state {}",
                params.n_params(),
                grads.n_params(),
                self.m.n_params()
            )));
        }
        self.t += 1;
        let AdamHyper {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.hyper;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, g), m), v) in params
            .values_mut()
            .zip(grads.values())
            .zip(self.m.values_mut())
            .zip(self.v.values_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }

    /// Second moments must stay non-negative; used by sanity checks.
    pub fn second_moments_non_negative(&self) -> bool {
        self.v.values().all(|x| x >= 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SequenceMode;

    fn tiny_config() -> ModelConfig {
        let mut cfg = ModelConfig::new(SequenceMode::Ism, 3, 1);
        cfg.embed_dim = 2;
        cfg.hidden = 2;
        cfg.maxlen = 2;
        cfg.dense_hidden = 2;
        cfg
    }

    #[test]
    fn first_step_with_unit_gradient_moves_by_learning_rate() {
        let cfg = tiny_config();
        let mut params = ModelParams::zeros(&cfg);
        let mut grads = ModelParams::zeros(&cfg);
        for g in grads.values_mut() {
            *g = 1.0;
        }
        let mut adam = AdamState::new(&cfg, AdamHyper::default());
        adam.step(&mut params, &grads).unwrap();
        // bias correction makes m_hat = v_hat = 1 at t=1, so the step is
        // -lr / (1 + eps)
        for p in params.values() {
            assert!((p + 0.001).abs() < 1e-9, "step {p}");
        }
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let cfg = tiny_config();
        let mut params = ModelParams::init(&cfg).unwrap();
        let before = params.clone();
        let grads = ModelParams::zeros(&cfg);
        let mut adam = AdamState::new(&cfg, AdamHyper::default());
        adam.step(&mut params, &grads).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn identical_gradient_streams_give_identical_trajectories() {
        let cfg = tiny_config();
        let mut grads = ModelParams::zeros(&cfg);
        for (i, g) in grads.values_mut().enumerate() {
            *g = (i as f64 * 0.37).sin();
        }
        let run = || {
            let mut params = ModelParams::init(&cfg).unwrap();
            let mut adam = AdamState::new(&cfg, AdamHyper::default());
            for _ in 0..25 {
                adam.step(&mut params, &grads).unwrap();
            }
            params
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn second_moments_stay_non_negative() {
        let cfg = tiny_config();
        let mut params = ModelParams::init(&cfg).unwrap();
        let mut grads = ModelParams::zeros(&cfg);
        for (i, g) in grads.values_mut().enumerate() {
            *g = if i % 2 == 0 { -1.5 } else { 2.5 };
        }
        let mut adam = AdamState::new(&cfg, AdamHyper::default());
        for _ in 0..10 {
            adam.step(&mut params, &grads).unwrap();
        }
        assert!(adam.second_moments_non_negative());
        assert_eq!(adam.step_count(), 10);
    }
}
