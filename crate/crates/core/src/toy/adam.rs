use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{validate_compatibility, ParameterSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, shaped like the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: ParameterSet<T>,
    pub v: ParameterSet<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn zeros_like(weights: &ParameterSet<T>) -> Self {
        Self {
            m: weights.zeros_like(),
            v: weights.zeros_like(),
        }
    }
}

/// One bias-corrected Adam update at step `t` (1-based).
pub fn adam_step<T: Scalar>(
    weights: &mut ParameterSet<T>,
    grads: &ParameterSet<T>,
    state: &mut AdamState<T>,
    t: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    if t == 0 {
        return Err(Error::invalid("adam step index starts at 1"));
    }
    validate_compatibility(weights, grads)?;
    validate_compatibility(weights, &state.m)?;
    let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
    let (one, eps) = (T::one(), T::of(cfg.epsilon));
    let corr1 = T::of(1.0 - cfg.beta1.powi(t as i32));
    let corr2 = T::of(1.0 - cfg.beta2.powi(t as i32));
    let lr = T::of(cfg.learning_rate);
    for (name, w) in weights.iter_mut() {
        let g = grads.get(name).expect("validated");
        let m = state.m.get_mut(name).expect("validated");
        let v = state.v.get_mut(name).expect("validated");
        for (((wi, &gi), mi), vi) in w
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = b1 * *mi + (one - b1) * gi;
            *vi = b2 * *vi + (one - b2) * gi * gi;
            let m_hat = *mi / corr1;
            let v_hat = *vi / corr2;
            *wi -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn scalar(v: f64) -> ParameterSet<f64> {
        ParameterSet::from_tensors([("w", Tensor::vector(vec![v]).unwrap())]).unwrap()
    }

    #[test]
    fn first_step_by_hand() {
        let mut w = scalar(0.0);
        let mut st = AdamState::zeros_like(&w);
        adam_step(&mut w, &scalar(1.0), &mut st, 1, &AdamConfig::new(1e-3)).unwrap();
        assert!((st.m.get("w").unwrap().data()[0] - 0.1).abs() < 1e-15);
        assert!((st.v.get("w").unwrap().data()[0] - 0.001).abs() < 1e-15);
        let expected = -1e-3 * 1.0 / (1.0 + 1e-8);
        assert!((w.get("w").unwrap().data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut w = scalar(0.7);
        let mut st = AdamState::zeros_like(&w);
        adam_step(&mut w, &scalar(0.0), &mut st, 1, &AdamConfig::default()).unwrap();
        assert_eq!(w.get("w").unwrap().data()[0], 0.7);
    }

    #[test]
    fn identical_inputs_update_identically() {
        let mk = |a: f64, b: f64| {
            ParameterSet::from_tensors([("w", Tensor::vector(vec![a, b]).unwrap())]).unwrap()
        };
        let mut w = mk(0.5, 0.5);
        let mut st = AdamState::zeros_like(&w);
        for t in 1..=5 {
            adam_step(&mut w, &mk(0.3, 0.3), &mut st, t, &AdamConfig::default()).unwrap();
        }
        let d = w.get("w").unwrap().data();
        assert_eq!(d[0], d[1]);
    }

    #[test]
    fn step_zero_rejected() {
        let mut w = scalar(0.0);
        let mut st = AdamState::zeros_like(&w);
        assert!(adam_step(&mut w, &scalar(1.0), &mut st, 0, &AdamConfig::default()).is_err());
    }
}
