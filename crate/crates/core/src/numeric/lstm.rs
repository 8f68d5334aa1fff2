//! LSTM cells and bidirectional encoding on a [`Tape`].

use rand::Rng;

use crate::error::{Error, Result};

use super::tape::{ParamId, ParamSet, Tape, Var};
use super::tensor::Tensor;

/// Uniform initialization half-width for gate weights.
pub const INIT_SCALE: f64 = 0.08;
/// Forget-gate bias at initialization.
pub const FORGET_BIAS: f64 = 1.0;

/// Parameters of one LSTM direction.
///
/// `weight` is `[4·hidden, input + hidden]` acting on `[x : h_prev]`; gate blocks
/// are stacked in the order input, forget, candidate, output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LstmParams {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmParams {
    pub fn init<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        Self::init_scaled(params, prefix, input, hidden, INIT_SCALE, rng)
    }

    /// As [`LstmParams::init`] with weights drawn from `±scale`.
    pub fn init_scaled<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        input: usize,
        hidden: usize,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let weight = params.insert(
            format!("{prefix}.weight"),
            Tensor::uniform(&[4 * hidden, input + hidden], -scale, scale, rng),
        );
        let mut b = Tensor::uniform(&[4 * hidden], -scale, scale, rng);
        b.data_mut()[hidden..2 * hidden]
            .iter_mut()
            .for_each(|x| *x = FORGET_BIAS);
        let bias = params.insert(format!("{prefix}.bias"), b);
        LstmParams {
            weight,
            bias,
            input,
            hidden,
        }
    }

    /// Recovers the handles of a direction stored under `prefix`.
    pub fn lookup(params: &ParamSet, prefix: &str) -> Result<Self> {
        let find = |suffix: &str| {
            params
                .id(&format!("{prefix}.{suffix}"))
                .ok_or_else(|| Error::config(format!("missing parameter {prefix}.{suffix}")))
        };
        let weight = find("weight")?;
        let bias = find("bias")?;
        let shape = params.get(weight).shape();
        if shape.len() != 2 || !shape[0].is_multiple_of(4) || shape[1] < shape[0] / 4 {
            return Err(Error::shape(format!("{prefix}.weight has shape {shape:?}")));
        }
        let hidden = shape[0] / 4;
        Ok(LstmParams {
            weight,
            bias,
            input: shape[1] - hidden,
            hidden,
        })
    }
}

/// One LSTM step. Returns `(h, c)`.
pub fn lstm_step(
    tape: &mut Tape,
    params: &ParamSet,
    cell: &LstmParams,
    x: Var,
    h_prev: Var,
    c_prev: Var,
) -> Result<(Var, Var)> {
    let (xl, hl, cl) = (
        tape.value(x).len(),
        tape.value(h_prev).len(),
        tape.value(c_prev).len(),
    );
    if xl != cell.input || hl != cell.hidden || cl != cell.hidden {
        return Err(Error::shape(format!(
            "lstm step expects x:{} h:{} c:{}, got x:{xl} h:{hl} c:{cl}",
            cell.input, cell.hidden, cell.hidden
        )));
    }
    let n = cell.hidden;
    let w = tape.param(params, cell.weight);
    let b = tape.param(params, cell.bias);
    let xh = tape.concat(&[x, h_prev])?;
    let z = tape.affine(w, xh, b)?;
    let zi = tape.slice(z, 0, n)?;
    let zf = tape.slice(z, n, n)?;
    let zg = tape.slice(z, 2 * n, n)?;
    let zo = tape.slice(z, 3 * n, n)?;
    let i = tape.sigmoid(zi);
    let f = tape.sigmoid(zf);
    let g = tape.tanh(zg);
    let o = tape.sigmoid(zo);
    let keep = tape.mul(f, c_prev)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc)?;
    Ok((h, c))
}

/// Runs one direction over `seq`, returning hidden states in input order.
pub fn lstm_encode(
    tape: &mut Tape,
    params: &ParamSet,
    cell: &LstmParams,
    seq: &[Var],
    reverse: bool,
) -> Result<Vec<Var>> {
    if seq.is_empty() {
        return Err(Error::empty("lstm over an empty sequence"));
    }
    let mut h = tape.input(Tensor::zeros(&[cell.hidden]));
    let mut c = tape.input(Tensor::zeros(&[cell.hidden]));
    let mut out = vec![h; seq.len()];
    let order: Vec<usize> = if reverse {
        (0..seq.len()).rev().collect()
    } else {
        (0..seq.len()).collect()
    };
    for t in order {
        let (nh, nc) = lstm_step(tape, params, cell, seq[t], h, c)?;
        h = nh;
        c = nc;
        out[t] = h;
    }
    Ok(out)
}

/// Output of [`bilstm_encode`].
#[derive(Clone, Debug)]
pub struct BiStates {
    /// `[forward_t : backward_t]` for every position.
    pub states: Vec<Var>,
    /// Forward state after the last element.
    pub forward_last: Var,
    /// Backward state after the first element.
    pub backward_first: Var,
}

pub fn bilstm_encode(
    tape: &mut Tape,
    params: &ParamSet,
    forward: &LstmParams,
    backward: &LstmParams,
    seq: &[Var],
) -> Result<BiStates> {
    if seq.is_empty() {
        return Err(Error::empty("bilstm over an empty sequence"));
    }
    let dim = tape.value(seq[0]).len();
    if seq.iter().any(|&v| tape.value(v).len() != dim) {
        return Err(Error::shape("bilstm inputs have mixed dimensions"));
    }
    let fw = lstm_encode(tape, params, forward, seq, false)?;
    let bw = lstm_encode(tape, params, backward, seq, true)?;
    let states = fw
        .iter()
        .zip(&bw)
        .map(|(&f, &b)| tape.concat(&[f, b]))
        .collect::<Result<Vec<_>>>()?;
    Ok(BiStates {
        states,
        forward_last: *fw.last().expect("nonempty"),
        backward_first: bw[0],
    })
}
