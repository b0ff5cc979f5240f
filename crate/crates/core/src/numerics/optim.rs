use super::{ParamStore, Tensor};

/// Adam with bias-corrected first and second moments.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore, learning_rate: f64) -> Self {
        let zeros: Vec<Tensor> = store.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the accumulated gradients, then zeroes them.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((p, m), v) in store
            .iter_mut()
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            let g = p.gradient.data();
            let (m, v) = (m.data_mut(), v.data_mut());
            for (k, w) in p.value.data_mut().iter_mut().enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                *w -= self.learning_rate * mhat / (vhat.sqrt() + self.eps);
            }
        }
        store.zero_grad();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Graph;

    #[test]
    fn minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![3.0, -2.0]));
        let mut adam = Adam::new(&store, 0.1);
        for _ in 0..500 {
            let mut g = Graph::new();
            let x = g.param(&store, w);
            let sq = g.mul(x, x).unwrap();
            let loss = g.sum(sq);
            let grads = g.backward(loss);
            g.accumulate(&grads, &mut store);
            adam.step(&mut store);
        }
        assert!(store.value(w).data().iter().all(|v| v.abs() < 1e-2));
        assert!(store.get(w).gradient.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![1.0]));
        store.get_mut(w).gradient = Tensor::vector(vec![0.5]);
        let mut adam = Adam::new(&store, 1e-3);
        adam.step(&mut store);
        assert!((store.value(w).data()[0] - (1.0 - 1e-3)).abs() < 1e-10);
    }
}
