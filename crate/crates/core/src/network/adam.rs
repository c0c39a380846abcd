use ndarray::Zip;

use super::{ConvParams, Gradients, NetworkParams};
use crate::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Adam moment buffers, shaped like the network parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    /// Number of updates applied so far.
    pub step: u64,
    pub first: Vec<ConvParams>,
    pub second: Vec<ConvParams>,
}

impl AdamState {
    pub fn for_layers(layers: &[ConvParams]) -> Self {
        let zeros: Vec<ConvParams> = layers.iter().map(ConvParams::zeros_like).collect();
        Self { step: 0, first: zeros.clone(), second: zeros }
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step(params: &mut NetworkParams, grads: &Gradients, lr: f64) -> Result<()> {
    if grads.layers.len() != params.convs.len() {
        return Err(Error::InvalidDimensions("gradient layer count does not match the network".into()));
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite(format!("gradient at optimizer step {}", params.optimizer.step + 1)));
    }
    let state = &mut params.optimizer;
    state.step += 1;
    let t = state.step as i32;
    let correction1 = 1.0 - ADAM_BETA1.powi(t);
    let correction2 = 1.0 - ADAM_BETA2.powi(t);

    let update = |w: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
    };
    for (((p, m), v), g) in params.convs.iter_mut().zip(&mut state.first).zip(&mut state.second).zip(&grads.layers) {
        Zip::from(&mut p.weight).and(&mut m.weight).and(&mut v.weight).and(&g.weight).for_each(|w, m, v, &g| update(w, m, v, g));
        Zip::from(&mut p.bias).and(&mut m.bias).and(&mut v.bias).and(&g.bias).for_each(|w, m, v, &g| update(w, m, v, g));
    }
    if !params.is_finite() {
        return Err(Error::NonFinite(format!("weights after optimizer step {}", params.optimizer.step)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, LayerSpec};

    fn tiny() -> NetworkParams {
        NetworkParams::new(vec![LayerSpec::conv(3, 3, 1, Activation::Identity)], 11).unwrap()
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = tiny();
        p.convs[0].weight.fill(1.0);
        let mut g = Gradients::zeros_like(&p);
        g.layers[0].weight.fill(1.0);
        adam_step(&mut p, &g, 0.0008).unwrap();
        let expected = 1.0 - 0.0008 / (1.0 + 1e-8);
        assert!((p.convs[0].weight[[0, 0]] - expected).abs() < 1e-15);
        assert!((p.convs[0].weight[[2, 26]] - 0.9992).abs() < 1e-10);
        assert_eq!(p.optimizer.step, 1);
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = tiny();
        let before = p.convs.clone();
        let g = Gradients::zeros_like(&p);
        for _ in 0..3 {
            adam_step(&mut p, &g, 0.01).unwrap();
        }
        assert_eq!(p.convs, before);
    }

    #[test]
    fn identical_inputs_identical_outputs() {
        let mut a = tiny();
        let mut b = a.clone();
        let mut g = Gradients::zeros_like(&a);
        g.layers[0].weight.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64).sin());
        adam_step(&mut a, &g, 0.001).unwrap();
        adam_step(&mut b, &g, 0.001).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nan_gradient_is_rejected() {
        let mut p = tiny();
        let mut g = Gradients::zeros_like(&p);
        g.layers[0].bias[1] = f64::NAN;
        assert!(matches!(adam_step(&mut p, &g, 0.001), Err(Error::NonFinite(_))));
    }

    #[test]
    fn decreases_convex_quadratic() {
        // L(w) = Σ (w - 0.3)²
        let mut p = tiny();
        let loss = |p: &NetworkParams| p.convs[0].weight.iter().map(|w| (w - 0.3).powi(2)).sum::<f64>();
        let before = loss(&p);
        let mut g = Gradients::zeros_like(&p);
        g.layers[0].weight = p.convs[0].weight.mapv(|w| 2.0 * (w - 0.3));
        adam_step(&mut p, &g, 1e-3).unwrap();
        assert!(loss(&p) < before);
    }
}
