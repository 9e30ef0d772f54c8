//! Central finite-difference gradient checking (64-bit only).

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Outcome of [`gradient_check`].
#[derive(Clone, Debug)]
pub struct GradCheck {
    pub max_relative_error: f64,
    /// `(parameter index, flat entry index)` of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub analytic: f64,
    pub numeric: f64,
    pub entries: usize,
}

/// Relative error used throughout: `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares tape gradients of `loss_fn` against central differences with step `h`.
///
/// `loss_fn` receives a fresh tape and one trainable leaf per entry of
/// `params`, and must return a scalar loss node.
pub fn gradient_check<F>(params: &[Tensor<f64>], h: f64, loss_fn: F) -> Result<GradCheck>
where
    F: for<'a> Fn(&mut Tape<'a, f64>, &[Var]) -> Result<Var>,
{
    if !(1e-6..=1e-4).contains(&h) {
        return Err(Error::Config(format!(
            "finite-difference step {h} outside [1e-6, 1e-4]"
        )));
    }

    let eval = |ps: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.param(p)).collect();
        let loss = loss_fn(&mut tape, &vars)?;
        Ok(tape.value(loss).item())
    };

    let analytic: Vec<Tensor<f64>> = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.param(p)).collect();
        let loss = loss_fn(&mut tape, &vars)?;
        let mut grads = tape.backward(loss)?;
        vars.iter()
            .map(|&v| grads.take(v).expect("every param has a gradient"))
            .collect()
    };

    let mut work = params.to_vec();
    let mut report = GradCheck {
        max_relative_error: 0.0,
        worst: None,
        analytic: 0.0,
        numeric: 0.0,
        entries: 0,
    };
    for (pi, grad) in analytic.iter().enumerate() {
        for j in 0..grad.len() {
            let original = work[pi].data()[j];
            work[pi].data_mut()[j] = original + h;
            let plus = eval(&work)?;
            work[pi].data_mut()[j] = original - h;
            let minus = eval(&work)?;
            work[pi].data_mut()[j] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let a = grad.data()[j];
            let err = relative_error(a, numeric);
            report.entries += 1;
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = err;
                report.worst = Some((pi, j));
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
