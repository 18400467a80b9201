//! AdamW with a warmup-then-cosine learning-rate schedule.

use ndarray::Array2;

use crate::params::{Gradients, ParamStore};

/// Linear warmup from 0 to `peak`, then a cosine decay back to 0 at the last step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub peak: f64,
    pub total_steps: usize,
    pub warmup_steps: usize,
}

impl Schedule {
    pub fn new(peak: f64, total_steps: usize, warmup_fraction: f64) -> Self {
        let warmup_steps = ((total_steps as f64) * warmup_fraction).round() as usize;
        Self {
            peak,
            total_steps: total_steps.max(1),
            warmup_steps: warmup_steps.min(total_steps.saturating_sub(1)),
        }
    }

    pub fn lr(&self, step: usize) -> f64 {
        if step < self.warmup_steps {
            return self.peak * step as f64 / self.warmup_steps as f64;
        }
        let span = (self.total_steps - 1)
            .saturating_sub(self.warmup_steps)
            .max(1) as f64;
        let progress = ((step - self.warmup_steps) as f64 / span).min(1.0);
        0.5 * self.peak * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}

#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: i32,
}

impl AdamW {
    pub fn new(params: &ParamStore, weight_decay: f64) -> Self {
        let zeros = || {
            params
                .ids()
                .map(|id| Array2::zeros(params.get(id).raw_dim()))
                .collect::<Vec<_>>()
        };
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients, lr: f64) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let ids: Vec<_> = params.ids().collect();
        for (k, id) in ids.into_iter().enumerate() {
            let g = &grads.values()[k];
            let p = params.get_mut(id);
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            ndarray::Zip::from(p)
                .and(m)
                .and(v)
                .and(g)
                .for_each(|p, m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let update = (*m / c1) / ((*v / c2).sqrt() + self.eps);
                    *p -= lr * (update + self.weight_decay * *p);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn schedule_shape() {
        let s = Schedule::new(1e-3, 1000, 0.2);
        assert_eq!(s.lr(0), 0.0);
        assert!((s.lr(200) - 1e-3).abs() < 1e-15);
        assert!((s.lr(100) - 5e-4).abs() < 1e-15);
        assert!(s.lr(999) < 1e-15);
        let mid = 200 + (999 - 200) / 2;
        assert!((s.lr(mid) - 5e-4).abs() < 1e-5);
        assert!((200..999).all(|i| s.lr(i + 1) <= s.lr(i)));
    }

    #[test]
    fn adamw_first_step_moves_by_lr() {
        let mut store = ParamStore::default();
        let id = store.add("p", array![[1.0, -2.0]]);
        let mut opt = AdamW::new(&store, 0.0);
        let mut g = Gradients::zeros_like(&store);
        g.add(id, &array![[0.5, -3.0]]);
        opt.step(&mut store, &g, 0.1);
        let p = store.get(id);
        assert!((p[[0, 0]] - 0.9).abs() < 1e-6);
        assert!((p[[0, 1]] + 1.9).abs() < 1e-6);
    }

    #[test]
    fn adamw_decay_is_decoupled() {
        let mut store = ParamStore::default();
        let id = store.add("p", array![[2.0]]);
        let mut opt = AdamW::new(&store, 0.1);
        let g = Gradients::zeros_like(&store);
        opt.step(&mut store, &g, 0.5);
        assert!((store.get(id)[[0, 0]] - (2.0 - 0.5 * 0.1 * 2.0)).abs() < 1e-12);
    }
}
