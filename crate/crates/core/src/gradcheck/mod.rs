//! Central finite-difference checks of analytic gradients.
//!
//! The numeric side only ever evaluates forward values; it shares no code
//! with the backward closures it is checking.

mod suite;

pub use suite::{END_TO_END_TOL, OP_TOL, TIGHT_TOL};
pub use suite::{block_suite, check_model, model_suite, op_suite, run_scope, CheckOutcome, Scope};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tensor::Tensor;

/// Perturbation used for central differences.
pub const FD_STEP: f64 = 1e-6;

/// Denominator floor of [`relative_error`]. Below this magnitude the error is
/// effectively absolute, so tiny gradients are not judged on roundoff alone.
pub const REL_ERR_FLOOR: f64 = 1e-3;

/// `|a - b| / max(|a|, |b|, REL_ERR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// Input name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.checked > 0 && self.max_rel_err < tol
    }

    pub fn merge(&mut self, other: GradCheckReport) {
        self.checked += other.checked;
        self.max_abs_err = self.max_abs_err.max(other.max_abs_err);
        if other.max_rel_err > self.max_rel_err || self.worst.is_none() {
            self.max_rel_err = self.max_rel_err.max(other.max_rel_err);
            if other.worst.is_some() {
                self.worst = other.worst;
            }
        }
    }
}

/// Fixed pseudo-random weights in `[-1, 1)` with the shape of `out`.
pub fn projection_weights(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// Collapses any output to a scalar by a fixed pseudo-random weighting, so
/// every output element contributes a distinct coefficient.
pub fn random_projection(out: &Tensor, seed: u64) -> Result<Tensor> {
    Ok(out.mul(&projection_weights(out.shape(), seed))?.sum())
}

/// Compares `backward` of `loss()` against central differences for every
/// coordinate of every named input (or a strided subset when `max_per_input`
/// is set). Inputs must be tracked leaves read by `loss`.
pub fn check_gradients<F>(inputs: &[(String, Tensor)], loss: F, max_per_input: Option<usize>) -> Result<GradCheckReport>
where
    F: Fn() -> Result<Tensor>,
{
    check_core(inputs, loss, None, max_per_input)
}

/// Like [`check_gradients`] for the scalar `Σ r ⊙ output()` with weights `r`
/// from [`projection_weights`], except that the numeric side differences the
/// outputs element by element before weighting. Outputs the perturbation
/// does not reach then cancel exactly instead of adding roundoff.
pub fn check_projected_gradients<F>(
    inputs: &[(String, Tensor)],
    output: F,
    seed: u64,
    max_per_input: Option<usize>,
) -> Result<GradCheckReport>
where
    F: Fn() -> Result<Tensor>,
{
    let shape = output()?.shape().to_vec();
    check_core(inputs, output, Some(projection_weights(&shape, seed)), max_per_input)
}

fn check_core<F>(
    inputs: &[(String, Tensor)],
    eval: F,
    weights: Option<Tensor>,
    max_per_input: Option<usize>,
) -> Result<GradCheckReport>
where
    F: Fn() -> Result<Tensor>,
{
    for (_, t) in inputs {
        t.zero_grad();
    }
    let out = eval()?;
    match &weights {
        Some(r) => out.mul(r)?.sum().backward()?,
        None => out.backward()?,
    }
    drop(out);
    let analytic: Vec<Vec<f64>> = inputs
        .iter()
        .map(|(_, t)| t.grad().unwrap_or_else(|| vec![0.0; t.numel()]))
        .collect();
    let r = weights.map(|w| w.to_vec());

    let mut report = GradCheckReport::default();
    for ((name, t), grad) in inputs.iter().zip(&analytic) {
        let len = t.numel();
        let stride = match max_per_input {
            Some(cap) if cap > 0 && len > cap => len.div_ceil(cap),
            _ => 1,
        };
        for i in (0..len).step_by(stride) {
            let orig = t.data()[i];
            let up = orig + FD_STEP;
            let down = orig - FD_STEP;
            t.data_mut()[i] = up;
            let y_up = eval()?.to_vec();
            t.data_mut()[i] = down;
            let y_down = eval()?.to_vec();
            t.data_mut()[i] = orig;
            let delta: f64 = match &r {
                Some(r) => r.iter().zip(y_up.iter().zip(&y_down)).map(|(w, (a, b))| w * (a - b)).sum(),
                None => y_up[0] - y_down[0],
            };
            let numeric = delta / (up - down);
            let abs = (grad[i] - numeric).abs();
            let rel = relative_error(grad[i], numeric);
            report.checked += 1;
            report.max_abs_err = report.max_abs_err.max(abs);
            if rel > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = report.max_rel_err.max(rel);
                report.worst = Some((name.clone(), i));
            }
        }
        t.zero_grad();
    }
    Ok(report)
}
