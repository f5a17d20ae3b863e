use serde::{Deserialize, Serialize};

use crate::error::{shape_err, NumericsError, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdagradConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epsilon: f64,
}

impl Default for AdagradConfig {
    fn default() -> Self {
        Self { learning_rate: 0.05, weight_decay: 5e-4, epsilon: 1e-10 }
    }
}

/// Adagrad with L2 weight decay folded into the gradient.
#[derive(Clone, Debug)]
pub struct AdagradState {
    pub config: AdagradConfig,
    accumulators: Vec<Tensor2>,
}

impl AdagradState {
    pub fn new(config: AdagradConfig, shapes: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let negative = |v: f64| v.is_nan() || v < 0.0;
        if negative(config.learning_rate)
            || negative(config.weight_decay)
            || config.epsilon.is_nan()
            || config.epsilon <= 0.0
        {
            return Err(NumericsError::Config(format!("invalid Adagrad settings {config:?}")));
        }
        let accumulators = shapes.into_iter().map(|(r, c)| Tensor2::zeros(r, c)).collect();
        Ok(Self { config, accumulators })
    }

    pub fn for_store(config: AdagradConfig, store: &ParamStore) -> Result<Self> {
        Self::new(config, store.iter().map(|(_, t)| t.shape()))
    }

    pub fn accumulators(&self) -> &[Tensor2] {
        &self.accumulators
    }

    /// One update: `g' = g + λp`, `acc += g'²`, `p -= lr·g' / (√acc + ε)`.
    pub fn step(&mut self, params: &mut [&mut Tensor2], grads: &[Tensor2]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.accumulators.len() {
            return Err(NumericsError::Config(format!(
                "adagrad: {} params, {} grads, {} accumulators",
                params.len(),
                grads.len(),
                self.accumulators.len()
            )));
        }
        let AdagradConfig { learning_rate: lr, weight_decay: wd, epsilon: eps } = self.config;
        for ((p, g), acc) in params.iter_mut().zip(grads).zip(self.accumulators.iter_mut()) {
            if p.shape() != g.shape() || p.shape() != acc.shape() {
                return Err(shape_err("adagrad_step", p.shape(), g.shape()));
            }
            let ps = p.as_mut_slice();
            for ((w, &gi), a) in ps.iter_mut().zip(g.as_slice()).zip(acc.as_mut_slice()) {
                let gd = gi + wd * *w;
                *a += gd * gd;
                *w -= lr * gd / (a.sqrt() + eps);
            }
        }
        Ok(())
    }

    pub fn step_store(&mut self, store: &mut ParamStore, grads: &[Tensor2]) -> Result<()> {
        let mut params = store.values_mut();
        self.step(&mut params, grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_state(lr: f64) -> AdagradState {
        AdagradState::new(AdagradConfig { learning_rate: lr, weight_decay: 0.0, epsilon: 1e-10 }, [(1, 1)]).unwrap()
    }

    // Scalar recurrence computed by hand: acc_1 = 1, Δ_1 = -lr/(1+ε);
    // acc_2 = 2, Δ_2 = -lr/(√2+ε).
    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut st = scalar_state(0.1);
        let mut p = Tensor2::zeros(1, 1);
        let g = Tensor2::filled(1, 1, 1.0);
        st.step(&mut [&mut p], std::slice::from_ref(&g)).unwrap();
        assert!((p.get(0, 0) + 0.1).abs() < 1e-9);
        let first = p.get(0, 0);
        st.step(&mut [&mut p], &[g]).unwrap();
        let second = p.get(0, 0) - first;
        assert!((second + 0.1 / 2f64.sqrt()).abs() < 1e-9);
        assert!(second.abs() < first.abs());
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut st = scalar_state(0.1);
        let mut p = Tensor2::filled(1, 1, 0.7);
        st.step(&mut [&mut p], &[Tensor2::zeros(1, 1)]).unwrap();
        assert_eq!(p.get(0, 0), 0.7);
    }

    #[test]
    fn weight_decay_enters_the_gradient() {
        let cfg = AdagradConfig { learning_rate: 0.1, weight_decay: 0.5, epsilon: 1e-10 };
        let mut st = AdagradState::new(cfg, [(1, 1)]).unwrap();
        let mut p = Tensor2::filled(1, 1, 2.0);
        st.step(&mut [&mut p], &[Tensor2::zeros(1, 1)]).unwrap();
        // g' = 1, acc = 1
        assert!((p.get(0, 0) - 1.9).abs() < 1e-9);
        assert!((st.accumulators()[0].get(0, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut st = scalar_state(0.1);
        let mut p = Tensor2::zeros(1, 1);
        assert!(st.step(&mut [&mut p], &[Tensor2::zeros(2, 1)]).is_err());
    }
}
