//! Adam optimizer over any `Params` implementor.

use std::collections::BTreeMap;

use ndarray::ArrayD;

use crate::nn::module::Params;

pub const ADAM_EPS: f32 = 1e-8;

pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Completed steps; bias correction uses t+1 on the next call.
    pub t: u64,
    /// First/second moments keyed by parameter name. BTreeMap keeps the
    /// serialization order stable for checkpoints.
    pub m: BTreeMap<String, ArrayD<f32>>,
    pub v: BTreeMap<String, ArrayD<f32>>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    /// One update from the gradients currently stored in the network.
    pub fn step(&mut self, net: &mut impl Params) {
        self.t += 1;
        let b1 = self.beta1 as f32;
        let b2 = self.beta2 as f32;
        let bias1 = 1.0 - (self.beta1).powi(self.t as i32) as f32;
        let bias2 = 1.0 - (self.beta2).powi(self.t as i32) as f32;
        let lr = self.lr as f32;
        let (m_map, v_map) = (&mut self.m, &mut self.v);
        net.visit_params("", &mut |name, mut param, grad| {
            let m = m_map
                .entry(name.to_string())
                .or_insert_with(|| ArrayD::zeros(param.raw_dim()));
            let v = v_map
                .entry(name.to_string())
                .or_insert_with(|| ArrayD::zeros(param.raw_dim()));
            ndarray::Zip::from(&mut *m).and(&grad).for_each(|mv, &g| {
                *mv = b1 * *mv + (1.0 - b1) * g;
            });
            ndarray::Zip::from(&mut *v).and(&grad).for_each(|vv, &g| {
                *vv = b2 * *vv + (1.0 - b2) * g * g;
            });
            ndarray::Zip::from(&mut param)
                .and(&*m)
                .and(&*v)
                .for_each(|p, &mv, &vv| {
                    let m_hat = mv / bias1;
                    let v_hat = vv / bias2;
                    *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                });
        });
    }
}
