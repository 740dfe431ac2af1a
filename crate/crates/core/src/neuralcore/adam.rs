//! Bias-corrected Adam.

use crate::neuralcore::tensor::Tensor;
use crate::neuralcore::NetError;
use crate::scalar::{cast, Real};

#[derive(Debug, Clone)]
pub struct Adam<T: Real> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: f64, params: &[Tensor<T>]) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn step(
        &mut self,
        params: &mut [Tensor<T>],
        grads: &[Tensor<T>],
    ) -> Result<(), NetError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NetError::ShapeMismatch(
                "optimizer state does not match parameter list".into(),
            ));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let b1: T = cast(self.beta1);
        let b2: T = cast(self.beta2);
        let one_m_b1: T = cast(1.0 - self.beta1);
        let one_m_b2: T = cast(1.0 - self.beta2);
        let c1: T = cast(1.0 / (1.0 - self.beta1.powi(t)));
        let c2: T = cast(1.0 / (1.0 - self.beta2.powi(t)));
        let lr: T = cast(self.lr);
        let eps: T = cast(self.epsilon);

        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if p.shape() != g.shape() {
                return Err(NetError::ShapeMismatch(format!(
                    "adam: param {:?} vs grad {:?}",
                    p.shape(),
                    g.shape()
                )));
            }
            for ((pv, &gv), (mv, vv)) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()))
            {
                *mv = b1 * *mv + one_m_b1 * gv;
                *vv = b2 * *vv + one_m_b2 * gv * gv;
                let m_hat = *mv * c1;
                let v_hat = *vv * c2;
                *pv = *pv - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Hand-evaluated first step: m_hat = g = 1, v_hat = 1, so
    // delta = -lr / (1 + eps).
    #[test]
    fn first_step_matches_hand_evaluation() {
        let mut params = vec![Tensor::from_vec(&[1], vec![0.0f64])];
        let grads = vec![Tensor::from_vec(&[1], vec![1.0f64])];
        let mut opt = Adam::new(1e-4, &params);
        opt.step(&mut params, &grads).unwrap();
        let expected = -1e-4 / (1.0 + 1e-8);
        assert!((params[0].data()[0] - expected).abs() < 1e-18);
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut params = vec![Tensor::from_vec(&[3], vec![1.0f64, -2.0, 0.5])];
        let before = params.clone();
        let grads = vec![Tensor::zeros(&[3])];
        let mut opt = Adam::new(1e-3, &params);
        for _ in 0..10 {
            opt.step(&mut params, &grads).unwrap();
        }
        assert_eq!(params, before);
    }

    #[test]
    fn identical_runs_produce_identical_trajectories() {
        let run = || {
            let mut params = vec![Tensor::from_vec(&[2], vec![0.3f32, -0.7])];
            let mut opt = Adam::new(1e-2, &params);
            for i in 0..25 {
                let g = 0.1 + (i as f32) * 0.01;
                let grads = vec![Tensor::from_vec(&[2], vec![g, -g])];
                opt.step(&mut params, &grads).unwrap();
            }
            params
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut params = vec![Tensor::<f64>::zeros(&[2])];
        let grads = vec![Tensor::<f64>::zeros(&[3])];
        let mut opt = Adam::new(1e-3, &params);
        assert!(opt.step(&mut params, &grads).is_err());
    }
}
