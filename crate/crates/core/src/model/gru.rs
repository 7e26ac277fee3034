use alloc::format;

use rand::Rng;

use crate::autodiff::{ParamId, ParamSet, Tape, Var};
use crate::error::Result;

/// Gated recurrent unit with input and hidden size `d`:
///
/// ```text
/// z  = sigmoid(Wxz x + Whz h + bz)
/// r  = sigmoid(Wxr x + Whr h + br)
/// n  = tanh(Wxn x + bxn + r * (Whn h + bhn))
/// h' = (1 - z) * h + z * n
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruParams {
    pub wx_z: ParamId,
    pub wh_z: ParamId,
    pub b_z: ParamId,
    pub wx_r: ParamId,
    pub wh_r: ParamId,
    pub b_r: ParamId,
    pub wx_n: ParamId,
    pub wh_n: ParamId,
    pub bx_n: ParamId,
    pub bh_n: ParamId,
}

impl GruParams {
    pub fn register<R: Rng>(params: &mut ParamSet, prefix: &str, d: usize, rng: &mut R) -> Self {
        let mut m = |name: &str, rng: &mut R| params.xavier(format!("{prefix}.{name}"), d, d, rng);
        let (wx_z, wh_z) = (m("wx_z", rng), m("wh_z", rng));
        let (wx_r, wh_r) = (m("wx_r", rng), m("wh_r", rng));
        let (wx_n, wh_n) = (m("wx_n", rng), m("wh_n", rng));
        let mut b = |name: &str| params.zeros(format!("{prefix}.{name}"), &[d]);
        Self { wx_z, wh_z, b_z: b("b_z"), wx_r, wh_r, b_r: b("b_r"), wx_n, wh_n, bx_n: b("bx_n"), bh_n: b("bh_n") }
    }
}

fn affine(t: &mut Tape<'_>, w: ParamId, x: Var) -> Result<Var> {
    let w = t.param(w);
    t.matmul(w, x)
}

pub fn gru_cell(t: &mut Tape<'_>, x: Var, h: Var, p: &GruParams) -> Result<Var> {
    let gate = |t: &mut Tape<'_>, wx, wh, b| -> Result<Var> {
        let a = affine(t, wx, x)?;
        let c = affine(t, wh, h)?;
        let b = t.param(b);
        let s = t.add(a, c)?;
        let s = t.add(s, b)?;
        Ok(t.sigmoid(s))
    };
    let z = gate(t, p.wx_z, p.wh_z, p.b_z)?;
    let r = gate(t, p.wx_r, p.wh_r, p.b_r)?;
    let xn = affine(t, p.wx_n, x)?;
    let bxn = t.param(p.bx_n);
    let xn = t.add(xn, bxn)?;
    let hn = affine(t, p.wh_n, h)?;
    let bhn = t.param(p.bh_n);
    let hn = t.add(hn, bhn)?;
    let rh = t.mul(r, hn)?;
    let pre = t.add(xn, rh)?;
    let n = t.tanh(pre);
    let diff = t.sub(n, h)?;
    let step = t.mul(z, diff)?;
    t.add(h, step)
}
