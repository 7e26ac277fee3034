//! Finite-difference checks of every differentiable tape operation on
//! small random inputs.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{grad_check, GradCheckConfig, GradCheckReport, ParamId, ParamSet, Tape, Tensor, Var};
use crate::error::Result;

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Values at least 0.1 away from zero, so ReLU kinks are never crossed.
fn off_zero(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = rng.gen_range(0.1..1.5);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect()
}

/// Distinct values on a coarse grid, so no column maximum is near a tie.
fn distinct(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|k| k as f64 * 0.1 - 0.5).collect();
    v.shuffle(rng);
    v
}

/// Reduces any output to a scalar through a fixed random weighting.
fn project(t: &mut Tape<'_>, y: Var, weights: &[f64]) -> Result<Var> {
    let shape = t.shape(y).to_vec();
    let n: usize = shape.iter().product();
    let w = t.constant(Tensor::new(shape, weights[..n].to_vec())?);
    let m = t.mul(y, w)?;
    Ok(t.sum(m))
}

struct Case {
    params: ParamSet,
    ids: Vec<ParamId>,
}

impl Case {
    fn new(inputs: Vec<Tensor>) -> Self {
        let mut params = ParamSet::new();
        let ids = inputs.into_iter().enumerate().map(|(k, t)| params.add(alloc::format!("x{k}"), t)).collect();
        Self { params, ids }
    }
}

/// Runs a gradient check for each primitive and returns `(name, report)`.
pub fn check_primitives(seed: u64, cfg: &GradCheckConfig) -> Result<Vec<(&'static str, GradCheckReport)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = uniform(&mut rng, 64, -1.0, 1.0);
    let mut out = Vec::new();

    let mut run = |name: &'static str, case: Case, f: &dyn Fn(&mut Tape<'_>, &[Var]) -> Result<Var>| -> Result<()> {
        let report = grad_check(
            &case.params,
            |t| {
                let xs: Vec<Var> = case.ids.iter().map(|&id| t.param(id)).collect();
                let y = f(t, &xs)?;
                if t.shape(y).iter().product::<usize>() == 1 {
                    Ok(y)
                } else {
                    project(t, y, &w)
                }
            },
            cfg,
        )?;
        out.push((name, report));
        Ok(())
    };

    let mat = |rng: &mut ChaCha8Rng, r: usize, c: usize| Tensor::matrix(r, c, uniform(rng, r * c, -1.0, 1.0));
    let vecn = |rng: &mut ChaCha8Rng, n: usize| Tensor::vector(uniform(rng, n, -1.0, 1.0));

    run("matmul_mv", Case::new(vec![mat(&mut rng, 3, 4)?, vecn(&mut rng, 4)]), &|t, x| t.matmul(x[0], x[1]))?;
    run("matmul_vm", Case::new(vec![vecn(&mut rng, 3), mat(&mut rng, 3, 4)?]), &|t, x| t.matmul(x[0], x[1]))?;
    run("matmul_mm", Case::new(vec![mat(&mut rng, 2, 3)?, mat(&mut rng, 3, 4)?]), &|t, x| t.matmul(x[0], x[1]))?;
    run("add", Case::new(vec![vecn(&mut rng, 5), vecn(&mut rng, 5)]), &|t, x| t.add(x[0], x[1]))?;
    run("sub", Case::new(vec![vecn(&mut rng, 5), vecn(&mut rng, 5)]), &|t, x| t.sub(x[0], x[1]))?;
    run("mul", Case::new(vec![vecn(&mut rng, 5), vecn(&mut rng, 5)]), &|t, x| t.mul(x[0], x[1]))?;
    run("add_row", Case::new(vec![mat(&mut rng, 3, 4)?, vecn(&mut rng, 4)]), &|t, x| t.add_row(x[0], x[1]))?;
    run("add_all", Case::new(vec![vecn(&mut rng, 4), vecn(&mut rng, 4), vecn(&mut rng, 4)]), &|t, x| t.add_all(x))?;
    run("scale", Case::new(vec![vecn(&mut rng, 4)]), &|t, x| Ok(t.scale(x[0], -1.7)))?;
    run("concat", Case::new(vec![vecn(&mut rng, 2), vecn(&mut rng, 3)]), &|t, x| t.concat(x))?;
    run("concat_rows", Case::new(vec![mat(&mut rng, 2, 2)?, mat(&mut rng, 2, 3)?]), &|t, x| t.concat(x))?;
    run("stack", Case::new(vec![vecn(&mut rng, 3), vecn(&mut rng, 3)]), &|t, x| t.stack(x))?;
    run("sigmoid", Case::new(vec![Tensor::vector(uniform(&mut rng, 5, -3.0, 3.0))]), &|t, x| Ok(t.sigmoid(x[0])))?;
    run("tanh", Case::new(vec![Tensor::vector(uniform(&mut rng, 5, -2.0, 2.0))]), &|t, x| Ok(t.tanh(x[0])))?;
    run("relu", Case::new(vec![Tensor::vector(off_zero(&mut rng, 6))]), &|t, x| Ok(t.relu(x[0])))?;
    run("maxpool", Case::new(vec![Tensor::matrix(3, 4, distinct(&mut rng, 12))?]), &|t, x| t.maxpool(x[0]))?;
    run("sum", Case::new(vec![vecn(&mut rng, 4)]), &|t, x| Ok(t.sum(x[0])))?;
    run("masked_softmax", Case::new(vec![vecn(&mut rng, 6)]), &|t, x| t.masked_softmax(x[0], 4))?;
    run("gather_rows", Case::new(vec![mat(&mut rng, 3, 2)?]), &|t, x| t.gather_rows(x[0], &[2, 0, 2]))?;
    run("reshape", Case::new(vec![mat(&mut rng, 2, 3)?]), &|t, x| t.reshape(x[0], &[3, 2]))?;
    run("row", Case::new(vec![mat(&mut rng, 3, 2)?]), &|t, x| t.row(x[0], 1))?;
    run("bce", Case::new(vec![Tensor::vector(uniform(&mut rng, 4, 0.05, 0.95))]), &|t, x| {
        t.bce(x[0], &[1.0, 0.0, 0.0, 1.0])
    })?;
    run("bce_logits", Case::new(vec![Tensor::vector(uniform(&mut rng, 4, -4.0, 4.0))]), &|t, x| {
        t.bce_logits(x[0], &[1.0, 0.0, 1.0, 0.0])
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_primitive_within_tolerance() {
        for seed in 0..3 {
            for (name, r) in check_primitives(seed, &GradCheckConfig::default()).unwrap() {
                assert!(r.checked > 0, "{name}");
                assert!(r.max_rel_error < 1e-6, "{name}: {r:?}");
            }
        }
    }
}
