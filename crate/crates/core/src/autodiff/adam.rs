//! Adam with bias correction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::expr::Matrix;
use super::grad::Gradients;
use super::AutodiffError;

/// Named parameter matrices, ordered by name so every traversal is deterministic.
pub type ParamStore = BTreeMap<String, Matrix>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), AutodiffError> {
        let ok = self.lr >= 0.0
            && self.lr.is_finite()
            && self.beta1 > 0.0
            && self.beta1 < 1.0
            && self.beta2 > 0.0
            && self.beta2 < 1.0
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(AutodiffError::InvalidOptimizer(format!("{self:?}")))
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: BTreeMap<String, Matrix>,
    second: BTreeMap<String, Matrix>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Result<Self, AutodiffError> {
        config.validate()?;
        Ok(Self {
            config,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        })
    }

    pub fn first_moment(&self, name: &str) -> Option<&Matrix> {
        self.first.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Matrix> {
        self.second.get(name)
    }
}

/// One Adam update. Gradients are validated before any parameter or moment
/// is touched, so a rejected step leaves everything as it was.
pub fn adam_step(params: &mut ParamStore, grads: &Gradients, state: &mut AdamState) -> Result<(), AutodiffError> {
    for (name, g) in grads {
        let p = params
            .get(name)
            .ok_or_else(|| AutodiffError::MissingBinding { name: name.clone() })?;
        if p.dim() != g.dim() {
            return Err(AutodiffError::ShapeMismatch {
                node: format!("parameter '{name}'"),
                detail: format!("gradient is {:?}, parameter is {:?}", g.dim(), p.dim()),
            });
        }
        if let Some((index, v)) = g.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(AutodiffError::NonFiniteGradient {
                name: name.clone(),
                index,
                value: *v,
            });
        }
    }

    state.step += 1;
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    let t = state.step as i32;
    let bias1 = 1.0 - beta1.powi(t);
    let bias2 = 1.0 - beta2.powi(t);

    for (name, g) in grads {
        let param = params.get_mut(name).expect("checked above");
        let m = state
            .first
            .entry(name.clone())
            .or_insert_with(|| Matrix::zeros(g.dim()));
        let v = state
            .second
            .entry(name.clone())
            .or_insert_with(|| Matrix::zeros(g.dim()));
        ndarray::Zip::from(param)
            .and(m)
            .and(v)
            .and(g)
            .for_each(|p, m, v, &g| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                let delta = lr * m_hat / (v_hat.sqrt() + eps);
                if delta != 0.0 {
                    *p -= delta;
                }
            });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(value: f64) -> ParamStore {
        ParamStore::from([("w".to_string(), Matrix::from_elem((1, 1), value))])
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = single(0.5);
        let mut state = AdamState::new(AdamConfig::with_lr(1e-3)).unwrap();
        let grads = single(1.0);
        adam_step(&mut params, &grads, &mut state).unwrap();
        // m̂ = 1, v̂ = 1 after bias correction.
        let expected = 0.5 - 1e-3 / (1.0 + 1e-8);
        assert_eq!(params["w"][[0, 0]], expected);
        assert!((params["w"][[0, 0]] - (0.5 - 1e-3)).abs() < 1e-10);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut params = single(-1.25);
        let mut state = AdamState::new(AdamConfig::default()).unwrap();
        adam_step(&mut params, &single(0.0), &mut state).unwrap();
        assert_eq!(params["w"][[0, 0]], -1.25);
    }

    #[test]
    fn two_steps_match_hand_trace() {
        // g = 2 both steps, lr = 0.1.
        // t=1: m=0.2, v=0.004, m̂=2, v̂=4 → Δ = 0.1·2/(2+ε)
        // t=2: m=0.38, v=0.007996, m̂=0.38/0.19=2, v̂=0.007996/0.001999=4 → same Δ
        let mut params = single(1.0);
        let mut state = AdamState::new(AdamConfig::with_lr(0.1)).unwrap();
        let grads = single(2.0);
        adam_step(&mut params, &grads, &mut state).unwrap();
        let after_one = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        assert!((params["w"][[0, 0]] - after_one).abs() < 1e-15);
        adam_step(&mut params, &grads, &mut state).unwrap();
        assert!((state.first_moment("w").unwrap()[[0, 0]] - 0.38).abs() < 1e-15);
        assert!((state.second_moment("w").unwrap()[[0, 0]] - 0.007996).abs() < 1e-15);
        let after_two = after_one - 0.1 * 2.0 / (2.0 + 1e-8);
        assert!((params["w"][[0, 0]] - after_two).abs() < 1e-12);
        assert_eq!(state.step, 2);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_bitwise() {
        let mut params = ParamStore::from([(
            "w".to_string(),
            Matrix::from_shape_vec((2, 2), vec![-0.0, 1.5, -3.25, 1e-300]).unwrap(),
        )]);
        let before = params.clone();
        let mut state = AdamState::new(AdamConfig::with_lr(0.0)).unwrap();
        let grads = ParamStore::from([(
            "w".to_string(),
            Matrix::from_shape_vec((2, 2), vec![1.0, -2.0, 0.5, 3.0]).unwrap(),
        )]);
        for _ in 0..3 {
            adam_step(&mut params, &grads, &mut state).unwrap();
        }
        for (a, b) in params["w"].iter().zip(before["w"].iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn non_finite_gradient_aborts_without_mutation() {
        let mut params = single(2.0);
        let mut state = AdamState::new(AdamConfig::default()).unwrap();
        let err = adam_step(&mut params, &single(f64::NAN), &mut state).unwrap_err();
        assert!(matches!(err, AutodiffError::NonFiniteGradient { .. }));
        assert_eq!(state.step, 0);
        assert_eq!(params["w"][[0, 0]], 2.0);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let cfg = AdamConfig {
            beta1: 1.0,
            ..AdamConfig::default()
        };
        assert!(AdamState::new(cfg).is_err());
    }
}
