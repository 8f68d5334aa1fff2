use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tape::{Gradients, ParamSet};
use super::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            learning_rate: 0.001,
            decay: 0.9,
            epsilon: 1e-8,
        }
    }
}

/// RMSprop state: one running mean of squared gradients per parameter tensor.
///
/// ```text
/// v ← ρ·v + (1 − ρ)·g²
/// θ ← θ − lr · g / (√v + ε)
/// ```
#[derive(Clone, Debug)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    mean_square: Vec<Tensor>,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig, params: &ParamSet) -> Self {
        RmsProp {
            config,
            mean_square: params
                .iter()
                .map(|(_, _, t)| Tensor::zeros(t.shape()))
                .collect(),
        }
    }

    pub fn mean_square(&self) -> &[Tensor] {
        &self.mean_square
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients) -> Result<()> {
        if grads.len() != params.len() || self.mean_square.len() != params.len() {
            return Err(Error::shape(format!(
                "rmsprop: {} params, {} grads, {} state tensors",
                params.len(),
                grads.len(),
                self.mean_square.len()
            )));
        }
        for id in params.ids() {
            let g = grads.get(id);
            if !g.same_shape(params.get(id)) || !g.same_shape(&self.mean_square[id.index()]) {
                return Err(Error::shape(format!(
                    "rmsprop: gradient for {} has shape {:?}, parameter {:?}",
                    params.name(id),
                    g.shape(),
                    params.get(id).shape()
                )));
            }
        }
        let RmsPropConfig {
            learning_rate,
            decay,
            epsilon,
        } = self.config;
        for id in params.ids() {
            let g = grads.get(id).data();
            let v = self.mean_square[id.index()].data_mut();
            let theta = params.get_mut(id).data_mut();
            for ((t, vi), gi) in theta.iter_mut().zip(v.iter_mut()).zip(g) {
                *vi = decay * *vi + (1.0 - decay) * gi * gi;
                *t -= learning_rate * gi / (vi.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::tape::ParamId;

    fn setup(value: f64) -> (ParamSet, ParamId) {
        let mut p = ParamSet::new();
        let id = p.insert("theta", Tensor::vector(vec![value; 3]));
        (p, id)
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_state() {
        let (mut p, id) = setup(1.5);
        let mut opt = RmsProp::new(RmsPropConfig::default(), &p);
        opt.mean_square[0].data_mut().iter_mut().for_each(|v| *v = 2.0);
        let g = Gradients::zeros_like(&p);
        opt.step(&mut p, &g).unwrap();
        assert_eq!(p.get(id).data(), &[1.5; 3]);
        for v in opt.mean_square()[0].data() {
            assert!((v - 1.8).abs() < 1e-15);
        }
    }

    #[test]
    fn first_unit_step_matches_hand_value() {
        let (mut p, id) = setup(0.0);
        let mut opt = RmsProp::new(RmsPropConfig::default(), &p);
        let mut g = Gradients::zeros_like(&p);
        g.get_mut(id).data_mut().iter_mut().for_each(|x| *x = 1.0);
        opt.step(&mut p, &g).unwrap();
        let expected = -0.001 / (0.1f64.sqrt() + 1e-8);
        for t in p.get(id).data() {
            assert!((t - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn repeated_gradient_step_tends_to_learning_rate() {
        let (mut p, id) = setup(0.0);
        let mut opt = RmsProp::new(RmsPropConfig::default(), &p);
        let mut g = Gradients::zeros_like(&p);
        g.get_mut(id).data_mut().iter_mut().for_each(|x| *x = 0.37);
        let mut last = 0.0;
        let mut step = 0.0;
        for _ in 0..400 {
            opt.step(&mut p, &g).unwrap();
            let now = p.get(id).data()[0];
            step = last - now;
            last = now;
        }
        assert!((step - 0.001).abs() < 1e-9, "step {step}");
        assert!(opt.mean_square()[0].data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn mismatched_gradients_are_rejected() {
        let (mut p, _) = setup(0.0);
        let mut opt = RmsProp::new(RmsPropConfig::default(), &p);
        let mut other = ParamSet::new();
        other.insert("theta", Tensor::vector(vec![0.0; 2]));
        let g = Gradients::zeros_like(&other);
        assert!(matches!(opt.step(&mut p, &g), Err(Error::Shape(_))));
    }
}
