use super::config::OptimizerKind;

pub const ADAM_BETAS: (f64, f64) = (0.9, 0.999);
pub const RMSPROP_DECAY: f64 = 0.99;
pub const EPSILON: f64 = 1e-8;

/// First/second moment state for Adam, running square average for RMSprop.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    steps: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, params: usize) -> Self {
        let first = match kind {
            OptimizerKind::Adam => vec![0.0; params],
            OptimizerKind::Rmsprop => Vec::new(),
        };
        Optimizer { kind, lr, first, second: vec![0.0; params], steps: 0 }
    }

    pub fn step(&mut self, params: &mut [f32], grads: &[f64]) {
        self.steps += 1;
        match self.kind {
            OptimizerKind::Adam => {
                let (b1, b2) = ADAM_BETAS;
                let c1 = 1.0 - b1.powi(self.steps);
                let c2 = 1.0 - b2.powi(self.steps);
                for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let update = self.lr * (*m / c1) / ((*v / c2).sqrt() + EPSILON);
                    *p = (*p as f64 - update) as f32;
                }
            }
            OptimizerKind::Rmsprop => {
                for ((p, &g), v) in params.iter_mut().zip(grads).zip(&mut self.second) {
                    *v = RMSPROP_DECAY * *v + (1.0 - RMSPROP_DECAY) * g * g;
                    let update = self.lr * g / (v.sqrt() + EPSILON);
                    *p = (*p as f64 - update) as f32;
                }
            }
        }
    }
}
