use serde::{Deserialize, Serialize};

use super::DenseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for one parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<f32>,
    second: Vec<f32>,
    step: u64,
    shape: (usize, usize),
}

impl AdamState {
    pub fn new(rows: usize, cols: usize, config: AdamConfig) -> Self {
        Self {
            config,
            first: vec![0.0; rows * cols],
            second: vec![0.0; rows * cols],
            step: 0,
            shape: (rows, cols),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self) -> &[f32] {
        &self.first
    }

    pub fn second_moment(&self) -> &[f32] {
        &self.second
    }

    /// Zeroes both moments and the step counter.
    pub fn reset(&mut self) {
        self.first.fill(0.0);
        self.second.fill(0.0);
        self.step = 0;
    }

    /// Zeroes the moments of every entry where `keep` is false.
    pub fn clear_masked(&mut self, keep: &[bool]) {
        for ((m, v), &k) in self.first.iter_mut().zip(&mut self.second).zip(keep) {
            if !k {
                *m = 0.0;
                *v = 0.0;
            }
        }
    }

    /// One bias-corrected Adam update of every entry.
    pub fn step(&mut self, params: &mut DenseMatrix, grads: &DenseMatrix) -> Result<()> {
        self.step_masked(params, grads, None)
    }

    /// Adam update restricted to entries where `mask` is true. Masked entries
    /// keep both their value and their moments.
    pub fn step_masked(
        &mut self,
        params: &mut DenseMatrix,
        grads: &DenseMatrix,
        mask: Option<&[bool]>,
    ) -> Result<()> {
        if params.shape() != self.shape || grads.shape() != self.shape {
            return Err(Error::shape(
                format!("{:?}", self.shape),
                format!("params {:?}, grads {:?}", params.shape(), grads.shape()),
            ));
        }
        if let Some(mask) = mask {
            if mask.len() != self.first.len() {
                return Err(Error::shape(self.first.len(), mask.len()));
            }
        }
        if let Some(pos) = grads.as_slice().iter().position(|g| !g.is_finite()) {
            let cols = self.shape.1.max(1);
            return Err(Error::NonFinite(format!(
                "gradient entry ({}, {}) at optimizer step {}",
                pos / cols,
                pos % cols,
                self.step + 1
            )));
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - f64::from(beta1).powi(t);
        let bias2 = 1.0 - f64::from(beta2).powi(t);
        let step_size = (f64::from(lr) / bias1) as f32;
        let bias2_sqrt = bias2.sqrt() as f32;

        let p = params.as_mut_slice();
        let g = grads.as_slice();
        for i in 0..p.len() {
            if mask.is_some_and(|m| !m[i]) {
                continue;
            }
            let m = &mut self.first[i];
            let v = &mut self.second[i];
            *m = beta1 * *m + (1.0 - beta1) * g[i];
            *v = beta2 * *v + (1.0 - beta2) * g[i] * g[i];
            p[i] -= step_size * *m / (v.sqrt() / bias2_sqrt + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![0.5, -0.25], vec![1.0, 2.0]]).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut p = params();
        let mut state = AdamState::new(2, 2, AdamConfig::default());
        let ones = DenseMatrix::from_fn(2, 2, |_, _| 1.0);
        state.step(&mut p, &ones).unwrap();
        let after_first = p.clone();
        let m_before = state.first_moment().to_vec();
        state.step(&mut p, &DenseMatrix::zeros(2, 2)).unwrap();
        // with g = 0 the update is m̂ / (√v̂ + ε) with a decayed m, which is not 0;
        // the moments themselves must shrink
        for (a, b) in state.first_moment().iter().zip(&m_before) {
            assert!(a.abs() < b.abs());
        }
        let mut fresh = params();
        let mut fresh_state = AdamState::new(2, 2, AdamConfig::default());
        fresh_state
            .step(&mut fresh, &DenseMatrix::zeros(2, 2))
            .unwrap();
        assert_eq!(fresh, params());
        assert!(fresh_state.first_moment().iter().all(|&m| m == 0.0));
        assert_ne!(after_first, params());
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = params();
        let before = p.clone();
        let mut state = AdamState::new(2, 2, AdamConfig {
            lr: 0.001,
            ..AdamConfig::default()
        });
        state
            .step(&mut p, &DenseMatrix::from_fn(2, 2, |_, _| 1.0))
            .unwrap();
        for (a, b) in p.as_slice().iter().zip(before.as_slice()) {
            assert!(((b - a) - 0.001).abs() < 1e-6, "{b} -> {a}");
        }
        assert_eq!(state.steps(), 1);
    }

    #[test]
    fn deterministic() {
        let g = DenseMatrix::from_rows(&[vec![0.3, -0.1], vec![2.0, 0.0]]).unwrap();
        let run = || {
            let mut p = params();
            let mut s = AdamState::new(2, 2, AdamConfig::default());
            s.step(&mut p, &g).unwrap();
            s.step(&mut p, &g).unwrap();
            (p, s)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn masked_entries_are_frozen() {
        let mut p = params();
        let mut s = AdamState::new(2, 2, AdamConfig::default());
        let g = DenseMatrix::from_fn(2, 2, |_, _| 1.0);
        s.step_masked(&mut p, &g, Some(&[true, false, false, true]))
            .unwrap();
        assert_eq!(p.get(0, 1), -0.25);
        assert_eq!(p.get(1, 0), 1.0);
        assert_ne!(p.get(0, 0), 0.5);
        assert_eq!(s.first_moment()[1], 0.0);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = params();
        let mut s = AdamState::new(2, 2, AdamConfig::default());
        let mut g = DenseMatrix::zeros(2, 2);
        g.as_mut_slice()[3] = f32::INFINITY;
        assert!(matches!(s.step(&mut p, &g), Err(Error::NonFinite(_))));
        assert_eq!(s.steps(), 0);
        assert_eq!(p, params());
    }
}
