use diglossia_model::checkpoint::OptimizerState;
use diglossia_model::ParamStore;
use ndarray::Array2;

/// Scales trainable gradients so their global L2 norm is at most `max_norm`.
/// Returns `(pre-clip norm, post-clip norm)`.
pub fn clip_grad_norm(params: &mut ParamStore, max_norm: f64) -> (f64, f64) {
    let norm = params.grad_norm();
    if norm > max_norm {
        let scale = max_norm / norm;
        for p in params.iter_mut().filter(|p| !p.frozen) {
            p.grad *= scale;
        }
        (norm, params.grad_norm())
    } else {
        (norm, norm)
    }
}

/// AdamW with decoupled weight decay. Frozen parameters are skipped and
/// parameters flagged `no_decay` are not decayed.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub state: OptimizerState,
}

impl AdamW {
    pub fn new(params: &ParamStore, beta1: f64, beta2: f64, eps: f64, weight_decay: f64) -> Self {
        let zeros = || -> Vec<Array2<f64>> {
            params.iter().map(|p| Array2::zeros(p.value.raw_dim())).collect()
        };
        AdamW {
            beta1,
            beta2,
            eps,
            weight_decay,
            state: OptimizerState {
                step: 0,
                m: zeros(),
                v: zeros(),
            },
        }
    }

    pub fn step(&mut self, params: &mut ParamStore, lr: f64) {
        self.state.step += 1;
        let t = self.state.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for ((p, m), v) in params
            .iter_mut()
            .zip(self.state.m.iter_mut())
            .zip(self.state.v.iter_mut())
        {
            if p.frozen {
                continue;
            }
            if !p.no_decay && self.weight_decay > 0.0 {
                let keep = 1.0 - lr * self.weight_decay;
                p.value *= keep;
            }
            ndarray::Zip::from(&mut p.value)
                .and(m)
                .and(v)
                .and(&p.grad)
                .for_each(|w, m, v, &g| {
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    let mhat = *m / bc1;
                    let vhat = *v / bc2;
                    *w -= lr * mhat / (vhat.sqrt() + eps);
                });
        }
    }
}
