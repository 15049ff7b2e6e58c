//! Central finite-difference check of the analytic gradients.

use diglossia_core::rng;
use rand::Rng as _;

use crate::tokenizer::Encoded;
use crate::transformer::Model;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct GradSample {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradSample {
    /// |a - n| / max(|a|, |n|, floor).
    pub fn relative_error(&self, floor: f64) -> f64 {
        (self.analytic - self.numeric).abs() / self.analytic.abs().max(self.numeric.abs()).max(floor)
    }
}

/// Compares gradients of the dropout-free loss at `per_param` random
/// coordinates of every trainable parameter.
pub fn check_gradients(
    model: &mut Model,
    batch: &[Encoded],
    per_param: usize,
    eps: f64,
    seed: u64,
) -> Result<Vec<GradSample>> {
    model.zero_grad();
    model.loss_and_grad(batch, None, 1.0)?;
    let mut r = rng::stream(seed, rng::label("gradcheck"));
    let mut out = Vec::new();
    for pi in 0..model.params().params.len() {
        let p = model.params().get(pi);
        if p.frozen {
            continue;
        }
        let name = p.name.clone();
        let n = p.len();
        for _ in 0..per_param.min(n) {
            let idx = r.random_range(0..n);
            let analytic = model.params().get(pi).grad.as_slice().unwrap()[idx];
            let original = model.params().get(pi).value.as_slice().unwrap()[idx];
            let at = |v: f64, m: &mut Model| -> Result<f64> {
                m.params_mut().params[pi].value.as_slice_mut().unwrap()[idx] = v;
                m.loss(batch)
            };
            let plus = at(original + eps, model)?;
            let minus = at(original - eps, model)?;
            at(original, model)?;
            out.push(GradSample {
                param: name.clone(),
                index: idx,
                analytic,
                numeric: (plus - minus) / (2.0 * eps),
            });
        }
    }
    Ok(out)
}
