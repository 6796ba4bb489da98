use ndarray::Array2;

use crate::model::Gradients;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Applied,
    /// Gradients were non-finite; parameters and moments are untouched.
    Skipped,
}

/// Scales gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm.is_finite() {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Adam with decoupled weight decay.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub config: AdamWConfig,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: u64,
}

impl AdamW {
    pub fn new(config: AdamWConfig, params: &[Array2<f64>]) -> Self {
        AdamW {
            config,
            m: params.iter().map(|p| Array2::zeros(p.raw_dim())).collect(),
            v: params.iter().map(|p| Array2::zeros(p.raw_dim())).collect(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [Array2<f64>], grads: &[Array2<f64>], lr: f64) -> StepOutcome {
        if grads.iter().any(|g| g.iter().any(|x| !x.is_finite())) {
            return StepOutcome::Skipped;
        }
        self.t += 1;
        let AdamWConfig {
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        let decay = 1.0 - lr * weight_decay;
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let update = (*m / bc1) / ((*v / bc2).sqrt() + eps);
                *p = *p * decay - lr * update;
            });
        }
        StepOutcome::Applied
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamStore;

    fn scalar(x: f64) -> Vec<Array2<f64>> {
        vec![Array2::from_elem((1, 1), x)]
    }

    #[test]
    fn converges_on_quadratic() {
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut x = scalar(0.0);
        let mut opt = AdamW::new(cfg, &x);
        for _ in 0..500 {
            let g = scalar(2.0 * (x[0][[0, 0]] - 3.0));
            opt.step(&mut x, &g, 0.1);
        }
        assert!((x[0][[0, 0]] - 3.0).abs() < 1e-3, "{}", x[0][[0, 0]]);
    }

    #[test]
    fn zero_gradient_decays_exactly() {
        let mut x = scalar(2.0);
        let mut opt = AdamW::new(AdamWConfig::default(), &x);
        let mut expect = 2.0;
        for _ in 0..5 {
            opt.step(&mut x, &scalar(0.0), 0.1);
            expect *= 1.0 - 0.1 * 0.01;
            assert_eq!(x[0][[0, 0]], expect);
        }
    }

    #[test]
    fn non_finite_gradients_skip() {
        let mut x = scalar(1.0);
        let mut opt = AdamW::new(AdamWConfig::default(), &x);
        assert_eq!(opt.step(&mut x, &scalar(f64::NAN), 0.1), StepOutcome::Skipped);
        assert_eq!(x[0][[0, 0]], 1.0);
        assert_eq!(opt.steps(), 0);
    }

    #[test]
    fn clipping() {
        let mut store = ParamStore::new();
        store.add("a", Array2::zeros((1, 2)));
        let mut g = store.zero_grads();
        g.tensors_mut()[0].assign(&ndarray::arr2(&[[3.0, 4.0]]));
        assert_eq!(clip_grad_norm(&mut g, 10.0), 5.0);
        assert_eq!(g.tensors()[0], ndarray::arr2(&[[3.0, 4.0]]));
        g.tensors_mut()[0].assign(&ndarray::arr2(&[[30.0, 40.0]]));
        assert_eq!(clip_grad_norm(&mut g, 5.0), 50.0);
        assert!((g.global_norm() - 5.0).abs() < 1e-12);
    }
}
