use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Gradients, ParamId, ParamSet, Tape, Var};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Central difference step.
    pub eps: f64,
    /// Parameters larger than this are checked on an evenly strided subset.
    pub max_per_param: usize,
    /// Magnitude floor in the relative error denominator.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { eps: 1e-5, max_per_param: 64, floor: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = libm::fabs(analytic).max(libm::fabs(numeric)).max(floor);
    libm::fabs(analytic - numeric) / denom
}

/// Compares tape gradients of the scalar built by `f` with central finite
/// differences. `f` must be deterministic (no dropout).
pub fn grad_check<F>(params: &ParamSet, f: F, cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_>) -> Result<Var>,
{
    let mut analytic = Gradients::zeros_like(params);
    {
        let mut tape = Tape::new(params);
        let loss = f(&mut tape)?;
        tape.backward(loss, &mut analytic)?;
    }
    let eval = |p: &ParamSet| -> Result<f64> {
        let mut tape = Tape::new(p);
        let loss = f(&mut tape)?;
        Ok(tape.scalar(loss))
    };
    let mut work = params.clone();
    let mut report =
        GradCheckReport { max_rel_error: 0.0, checked: 0, worst: None, worst_analytic: 0.0, worst_numeric: 0.0 };
    for id in params.ids() {
        for k in sample_indices(params.get(id).numel(), cfg.max_per_param) {
            let numeric = central_difference(&mut work, id, k, cfg.eps, &eval)?;
            let a = analytic.get(id)[k];
            let err = relative_error(a, numeric, cfg.floor);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                if err >= report.max_rel_error {
                    report.worst = Some((params.name(id).to_string(), k));
                    report.worst_analytic = a;
                    report.worst_numeric = numeric;
                }
            }
        }
    }
    Ok(report)
}

fn central_difference(
    work: &mut ParamSet,
    id: ParamId,
    k: usize,
    eps: f64,
    eval: &impl Fn(&ParamSet) -> Result<f64>,
) -> Result<f64> {
    let orig = work.get(id).data()[k];
    work.get_mut(id).data_mut()[k] = orig + eps;
    let plus = eval(work)?;
    work.get_mut(id).data_mut()[k] = orig - eps;
    let minus = eval(work)?;
    work.get_mut(id).data_mut()[k] = orig;
    Ok((plus - minus) / (2.0 * eps))
}

fn sample_indices(n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    // Odd stride so that rows and columns both vary.
    let stride = (n / max) | 1;
    (0..max).map(|s| (s * stride + s / 3) % n).collect()
}
