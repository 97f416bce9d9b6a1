//! LSTM cell and sequence unrolling, in both plain (inference) and taped
//! (training) form. Sequences are always processed in forward time order.
//!
//! Gate layout inside the stacked weight matrices is fixed as
//! (input i, forget f, cell candidate g, output o), rows `[k*h, (k+1)*h)`.

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};
use crate::tensor::{self, Tensor};
use rand::Rng;

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParameters {
    /// Input weights, 4h x d.
    pub w: Tensor,
    /// Recurrent weights, 4h x h.
    pub u: Tensor,
    /// Biases, 4h.
    pub b: Tensor,
    pub input: usize,
    pub hidden: usize,
}

#[derive(Clone, Debug)]
pub struct LstmState {
    pub h: Tensor,
    pub c: Tensor,
}

impl LstmState {
    pub fn zero(hidden: usize) -> Self {
        LstmState {
            h: Tensor::zeros(vec![hidden]),
            c: Tensor::zeros(vec![hidden]),
        }
    }
}

impl LstmParameters {
    /// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], forget-gate bias 1.0.
    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let wb = 1.0 / (input as f64).sqrt();
        let ub = 1.0 / (hidden as f64).sqrt();
        let w = Tensor::matrix(
            4 * hidden,
            input,
            (0..4 * hidden * input)
                .map(|_| rng.gen_range(-wb..wb))
                .collect(),
        )
        .expect("init shape");
        let u = Tensor::matrix(
            4 * hidden,
            hidden,
            (0..4 * hidden * hidden)
                .map(|_| rng.gen_range(-ub..ub))
                .collect(),
        )
        .expect("init shape");
        let mut bias = vec![0.0; 4 * hidden];
        for v in bias.iter_mut().take(2 * hidden).skip(hidden) {
            *v = 1.0;
        }
        LstmParameters {
            w,
            u,
            b: Tensor::vector(bias),
            input,
            hidden,
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParameters {
            w: Tensor::zeros(vec![4 * hidden, input]),
            u: Tensor::zeros(vec![4 * hidden, hidden]),
            b: Tensor::zeros(vec![4 * hidden]),
            input,
            hidden,
        }
    }

    fn check(&self) -> Result<()> {
        let (h, d) = (self.hidden, self.input);
        if self.w.shape() != [4 * h, d] || self.u.shape() != [4 * h, h] || self.b.shape() != [4 * h]
        {
            return Err(Error::Shape(format!(
                "LSTM parameter shapes inconsistent with d={}, h={}",
                d, h
            )));
        }
        Ok(())
    }
}

/// One LSTM update: i,f,o = sigmoid gates, g = tanh candidate,
/// c' = f*c + i*g, h' = o*tanh(c').
pub fn lstm_step(params: &LstmParameters, state: &LstmState, x: &Tensor) -> Result<LstmState> {
    params.check()?;
    let h = params.hidden;
    let z = tensor::add(
        &tensor::add(&tensor::matvec(&params.w, x)?, &tensor::matvec(&params.u, &state.h)?)?,
        &params.b,
    )?;
    let gate = |k: usize| Tensor::vector(z.data()[k * h..(k + 1) * h].to_vec());
    let i = tensor::sigmoid(&gate(0))?;
    let f = tensor::sigmoid(&gate(1))?;
    let g = tensor::tanh(&gate(2))?;
    let o = tensor::sigmoid(&gate(3))?;
    let c = tensor::add(&tensor::mul(&f, &state.c)?, &tensor::mul(&i, &g)?)?;
    let hh = tensor::mul(&o, &tensor::tanh(&c)?)?;
    Ok(LstmState { h: hh, c })
}

/// Runs a (possibly multi-layer) LSTM over `xs` (T x d) in forward time order
/// from zero initial state. Returns the top layer's hidden states as T x h.
pub fn lstm_sequence(layers: &[LstmParameters], xs: &Tensor) -> Result<Tensor> {
    if layers.is_empty() {
        return Err(Error::Contract("lstm_sequence: no layers".into()));
    }
    let t_len = xs.rows()?;
    if t_len == 0 {
        return Err(Error::Shape("lstm_sequence: empty sequence".into()));
    }
    let mut inputs: Vec<Tensor> = (0..t_len).map(|t| xs.row(t).unwrap()).collect();
    for layer in layers {
        let mut state = LstmState::zero(layer.hidden);
        let mut outputs = Vec::with_capacity(t_len);
        for x in &inputs {
            state = lstm_step(layer, &state, x)?;
            outputs.push(state.h.clone());
        }
        inputs = outputs;
    }
    let h = layers.last().unwrap().hidden;
    let mut data = Vec::with_capacity(t_len * h);
    for o in &inputs {
        data.extend_from_slice(o.data());
    }
    Tensor::matrix(t_len, h, data)
}

/// LSTM parameters registered on a tape for a differentiable pass.
#[derive(Copy, Clone)]
pub struct TapedLstm {
    pub w: Var,
    pub u: Var,
    pub b: Var,
    pub hidden: usize,
}

impl TapedLstm {
    pub fn register(tape: &mut Tape, params: &LstmParameters) -> Self {
        TapedLstm {
            w: tape.leaf(params.w.clone()),
            u: tape.leaf(params.u.clone()),
            b: tape.leaf(params.b.clone()),
            hidden: params.hidden,
        }
    }

    pub fn step(&self, tape: &mut Tape, state: (Var, Var), x: Var) -> Result<(Var, Var)> {
        let h = self.hidden;
        let (hs, cs) = state;
        let wx = tape.matvec(self.w, x)?;
        let uh = tape.matvec(self.u, hs)?;
        let z = tape.add(wx, uh)?;
        let z = tape.add(z, self.b)?;
        let zi = tape.slice(z, 0, h)?;
        let zf = tape.slice(z, h, h)?;
        let zg = tape.slice(z, 2 * h, h)?;
        let zo = tape.slice(z, 3 * h, h)?;
        let i = tape.sigmoid(zi)?;
        let f = tape.sigmoid(zf)?;
        let g = tape.tanh(zg)?;
        let o = tape.sigmoid(zo)?;
        let fc = tape.mul(f, cs)?;
        let ig = tape.mul(i, g)?;
        let c = tape.add(fc, ig)?;
        let tc = tape.tanh(c)?;
        let hh = tape.mul(o, tc)?;
        Ok((hh, c))
    }

    /// Unrolls over `xs` from zero state; returns every hidden-state var.
    pub fn sequence(&self, tape: &mut Tape, xs: &[Var]) -> Result<Vec<Var>> {
        if xs.is_empty() {
            return Err(Error::Shape("lstm sequence: empty input".into()));
        }
        let mut state = (
            tape.leaf(Tensor::zeros(vec![self.hidden])),
            tape.leaf(Tensor::zeros(vec![self.hidden])),
        );
        let mut outs = Vec::with_capacity(xs.len());
        for &x in xs {
            state = self.step(tape, state, x)?;
            outs.push(state.0);
        }
        Ok(outs)
    }
}
