use serde::{Deserialize, Serialize};

use super::{NnError, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates for a list of parameter buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Real> {
    pub config: AdamConfig,
    first_moment: Vec<Vec<T>>,
    second_moment: Vec<Vec<T>>,
    step_count: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(sizes: impl IntoIterator<Item = usize>, config: AdamConfig) -> Self {
        let first_moment: Vec<Vec<T>> = sizes.into_iter().map(|n| vec![T::zero(); n]).collect();
        let second_moment = first_moment.clone();
        Self { config, first_moment, second_moment, step_count: 0 }
    }

    /// Moments shaped like the given parameter buffers.
    pub fn for_params(params: &[&[T]], config: AdamConfig) -> Self {
        Self::new(params.iter().map(|p| p.len()), config)
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[Vec<T>] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Vec<T>] {
        &self.second_moment
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<T: Real>(params: &mut [&mut [T]], grads: &[&[T]], state: &mut AdamState<T>) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(NnError::DimensionMismatch { expected: state.first_moment.len(), got: grads.len() });
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.first_moment) {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(NnError::DimensionMismatch { expected: m.len(), got: g.len() });
        }
    }
    state.step_count += 1;
    let c = state.config;
    let t = state.step_count as i32;
    let cast = |v: f64| T::from_f64(v).expect("representable");
    let (beta1, beta2, eps) = (cast(c.beta1), cast(c.beta2), cast(c.epsilon));
    let one = T::one();
    // Bias corrections folded into the step size: lr·√(1−β2ᵗ)/(1−β1ᵗ).
    let correction1 = 1.0 - c.beta1.powi(t);
    let correction2 = 1.0 - c.beta2.powi(t);
    let step = cast(c.learning_rate / correction1);
    let sqrt_c2 = cast(correction2.sqrt());

    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.first_moment).zip(&mut state.second_moment) {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = beta1 * m[i] + (one - beta1) * gi;
            v[i] = beta2 * v[i] + (one - beta2) * gi * gi;
            p[i] = p[i] - step * m[i] / ((v[i]).sqrt() / sqrt_c2 + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let lr = 1e-4;
        for g in [0.5f64, -3.0, 1e-2, 250.0] {
            let mut w = vec![0.7f64];
            let mut state = AdamState::new([1], AdamConfig { learning_rate: lr, ..Default::default() });
            adam_step(&mut [&mut w[..]], &[&[g][..]], &mut state).unwrap();
            let moved = 0.7 - w[0];
            assert!((moved.abs() - lr).abs() <= lr * 1e-6, "g={g} moved {moved}");
            assert_eq!(moved.signum(), g.signum());
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut w = vec![1.0f32, -2.0];
        let mut state = AdamState::new([2], AdamConfig::default());
        adam_step(&mut [&mut w[..]], &[&[0.0, 0.0][..]], &mut state).unwrap();
        assert_eq!(w, vec![1.0, -2.0]);
        assert_eq!(state.step_count(), 1);
    }

    /// The same recurrence written out on scalars, used as an oracle.
    fn scalar_adam(w0: f64, lr: f64, steps: usize) -> f64 {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut w, mut m, mut v) = (w0, 0.0, 0.0);
        for t in 1..=steps {
            let g = 2.0 * (w - 3.0);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t as i32));
            let v_hat = v / (1.0 - b2.powi(t as i32));
            w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        w
    }

    #[test]
    fn quadratic_converges() {
        let mut w = vec![0.0f64];
        let mut state = AdamState::new([1], AdamConfig { learning_rate: 0.1, ..Default::default() });
        for _ in 0..200 {
            let g = 2.0 * (w[0] - 3.0);
            adam_step(&mut [&mut w[..]], &[&[g][..]], &mut state).unwrap();
        }
        let oracle = scalar_adam(0.0, 0.1, 200);
        assert!((w[0] - oracle).abs() < 1e-9, "{} vs {oracle}", w[0]);
        assert!((w[0] - 3.0).abs() < 0.5);
        assert!(state.second_moment()[0][0] >= 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let mut w = vec![0.0f64; 3];
        let mut state = AdamState::new([3], AdamConfig::default());
        assert!(adam_step(&mut [&mut w[..]], &[&[1.0, 2.0][..]], &mut state).is_err());
        assert_eq!(state.step_count(), 0);
    }
}
