use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ParamStore;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Moment estimates in parameter registration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub names: Vec<String>,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        Self {
            t: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
            names: store.iter().map(|p| p.name.clone()).collect(),
            m: store.iter().map(|p| vec![0.0; p.value.numel()]).collect(),
            v: store.iter().map(|p| vec![0.0; p.value.numel()]).collect(),
        }
    }

    /// Fails unless the moments line up with `store`.
    pub fn check(&self, store: &ParamStore) -> Result<()> {
        let ok = self.names.len() == store.len()
            && self.m.len() == store.len()
            && self.v.len() == store.len()
            && store.iter().enumerate().all(|(k, p)| {
                self.names[k] == p.name
                    && self.m[k].len() == p.value.numel()
                    && self.v[k].len() == p.value.numel()
            });
        if ok {
            Ok(())
        } else {
            Err(Error::Resume("optimizer moments do not match the model parameters".into()))
        }
    }
}

/// One bias-corrected Adam update using the gradients held in `store`.
///
/// Gradients are checked before anything is modified, so a failed step
/// leaves both the parameters and the moments untouched.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState, lr: f64) -> Result<()> {
    state.check(store).map_err(|e| Error::Training(e.to_string()))?;
    if let Some(p) = store.iter().find(|p| !p.grad.all_finite()) {
        return Err(Error::Training(format!("non-finite gradient in parameter '{}'", p.name)));
    }
    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for (k, p) in store.iter_mut().enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        let g = p.grad.data();
        let theta = p.value.data_mut();
        for j in 0..theta.len() {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            theta[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn store(values: &[f64]) -> ParamStore {
        let mut s = ParamStore::new();
        s.add("theta", Tensor::new(vec![values.len()], values.to_vec()).unwrap());
        s
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = store(&[0.5, -2.0, 3.0]);
        for g in s.get_mut(crate::tensor::ParamId(0)).grad.data_mut() {
            *g = 1.0;
        }
        let mut st = AdamState::new(&s);
        adam_step(&mut s, &mut st, 1e-3).unwrap();
        let got = s.iter().next().unwrap().value.data().to_vec();
        for (a, b) in got.iter().zip([0.5, -2.0, 3.0]) {
            assert!(((b - a) - 1e-3 / (1.0 + 1e-8)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = store(&[0.5, -2.0]);
        let before = s.clone();
        let mut st = AdamState::new(&s);
        for _ in 0..5 {
            adam_step(&mut s, &mut st, 1e-2).unwrap();
        }
        assert_eq!(s.iter().next().unwrap().value, before.iter().next().unwrap().value);
    }

    #[test]
    fn quadratic_step_shrinks_theta() {
        let mut s = store(&[1.0]);
        let g = s.iter().next().unwrap().value.data()[0];
        s.get_mut(crate::tensor::ParamId(0)).grad.data_mut()[0] = g;
        let mut st = AdamState::new(&s);
        adam_step(&mut s, &mut st, 0.1).unwrap();
        assert!(s.iter().next().unwrap().value.data()[0].abs() < 1.0);
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut s = store(&[1.0]);
        s.get_mut(crate::tensor::ParamId(0)).grad.data_mut()[0] = f64::NAN;
        let mut st = AdamState::new(&s);
        let msg = adam_step(&mut s, &mut st, 0.1).unwrap_err().to_string();
        assert!(msg.contains("theta"), "{msg}");
        assert_eq!(st.t, 0);
    }
}
