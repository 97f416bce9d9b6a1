//! The RETAIN regressor (two-level attention) and the baseline 2-layer LSTM.
//!
//! The forward pass proceeds in five steps: per-step linear embedding, a
//! recurrent pass producing time-level attention weights alpha (softmax over a
//! learned projection of RNN_alpha hidden states), a second recurrent pass
//! producing variable-level attention weights beta (tanh projection of
//! RNN_beta hidden states), an attention-weighted context vector, and a linear
//! scalar readout. Both attention RNNs run in forward time order.

use crate::error::{Error, Result};
use crate::lstm::{self, LstmParameters, TapedLstm};
use crate::tape::{Tape, Var};
use crate::tensor::{self, Tensor};
use rand::Rng;
use std::io::{Read, Write};
use std::path::Path;

pub const SIGNALS: [&str; 3] = ["glucose", "insulin", "cho"];

/// Input/architecture sizes. Defaults follow the evaluation setup: 3 input
/// signals, 3 h of history at 5-min steps, 30-min horizon, embedding 64,
/// attention RNNs of 128 units.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDimensions {
    /// Input variables per time step (glucose, insulin, CHO).
    pub inputs: usize,
    /// History length in steps.
    pub history: usize,
    /// Prediction horizon in steps.
    pub horizon: usize,
    /// Embedding size.
    pub embed: usize,
    /// Hidden size of the attention RNNs (or of the baseline LSTM layers).
    pub hidden: usize,
}

impl Default for ModelDimensions {
    fn default() -> Self {
        ModelDimensions {
            inputs: 3,
            history: 36,
            horizon: 6,
            embed: 64,
            hidden: 128,
        }
    }
}

impl ModelDimensions {
    pub fn validate(&self) -> Result<()> {
        if self.inputs == 0
            || self.history == 0
            || self.horizon == 0
            || self.embed == 0
            || self.hidden == 0
        {
            return Err(Error::Contract(format!(
                "all model dimensions must be positive: {:?}",
                self
            )));
        }
        Ok(())
    }
}

/// All learnable weights of the RETAIN model.
#[derive(Clone, Debug, PartialEq)]
pub struct RetainParameters {
    pub dims: ModelDimensions,
    /// Embedding matrix, m x r. No bias, matching v_i = W_emb x_i.
    pub w_emb: Tensor,
    pub rnn_alpha: LstmParameters,
    /// Time-attention projection, p.
    pub w_alpha: Tensor,
    /// Time-attention projection bias, scalar.
    pub b_alpha: Tensor,
    pub rnn_beta: LstmParameters,
    /// Variable-attention projection, m x p.
    pub w_beta: Tensor,
    /// Variable-attention projection bias, m.
    pub b_beta: Tensor,
    /// Output weights, 1 x m.
    pub w_out: Tensor,
    /// Output bias, scalar.
    pub b_out: Tensor,
}

impl RetainParameters {
    pub fn init<R: Rng>(dims: ModelDimensions, rng: &mut R) -> Result<Self> {
        dims.validate()?;
        let (r, m, p) = (dims.inputs, dims.embed, dims.hidden);
        let mut uniform = |rows: usize, cols: usize, fan_in: usize| {
            let b = 1.0 / (fan_in as f64).sqrt();
            Tensor::matrix(
                rows,
                cols,
                (0..rows * cols).map(|_| rng.gen_range(-b..b)).collect(),
            )
            .expect("init shape")
        };
        let w_emb = uniform(m, r, r);
        let w_beta = uniform(m, p, p);
        let w_out = uniform(1, m, m);
        let w_alpha = {
            let b = 1.0 / (p as f64).sqrt();
            Tensor::vector((0..p).map(|_| rng.gen_range(-b..b)).collect())
        };
        Ok(RetainParameters {
            dims,
            w_emb,
            rnn_alpha: LstmParameters::init(m, p, rng),
            w_alpha,
            b_alpha: Tensor::scalar(0.0),
            rnn_beta: LstmParameters::init(m, p, rng),
            w_beta,
            b_beta: Tensor::zeros(vec![m]),
            w_out,
            b_out: Tensor::scalar(0.0),
        })
    }

    /// Parameter tensors in the fixed (serialization) order.
    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![
            &self.w_emb,
            &self.rnn_alpha.w,
            &self.rnn_alpha.u,
            &self.rnn_alpha.b,
            &self.w_alpha,
            &self.b_alpha,
            &self.rnn_beta.w,
            &self.rnn_beta.u,
            &self.rnn_beta.b,
            &self.w_beta,
            &self.b_beta,
            &self.w_out,
            &self.b_out,
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.w_emb,
            &mut self.rnn_alpha.w,
            &mut self.rnn_alpha.u,
            &mut self.rnn_alpha.b,
            &mut self.w_alpha,
            &mut self.b_alpha,
            &mut self.rnn_beta.w,
            &mut self.rnn_beta.u,
            &mut self.rnn_beta.b,
            &mut self.w_beta,
            &mut self.b_beta,
            &mut self.w_out,
            &mut self.b_out,
        ]
    }
}

/// Per-prediction record of all intermediates needed for interpretation.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// Embeddings v, H x m.
    pub embeddings: Tensor,
    /// Time-level attention alpha, H (sums to 1).
    pub alphas: Tensor,
    /// Variable-level attention beta, H x m (entries in (-1, 1)).
    pub betas: Tensor,
    /// Context vector, m.
    pub context: Tensor,
    /// Scalar prediction.
    pub prediction: f64,
}

fn check_input(dims: &ModelDimensions, x: &Tensor) -> Result<()> {
    if x.shape() != [dims.history, dims.inputs] {
        return Err(Error::Shape(format!(
            "input shape {:?}, expected [{}, {}]",
            x.shape(),
            dims.history,
            dims.inputs
        )));
    }
    Ok(())
}

/// Full RETAIN forward pass, retaining every intermediate in the trace.
pub fn retain_forward(params: &RetainParameters, x: &Tensor) -> Result<ForwardTrace> {
    let dims = &params.dims;
    check_input(dims, x)?;
    let (h_len, m) = (dims.history, dims.embed);

    // Step 1: embeddings
    let embeddings = tensor::matmul(x, &transpose(&params.w_emb)?)?; // H x m

    // Step 2: time-level attention
    let g = lstm::lstm_sequence(std::slice::from_ref(&params.rnn_alpha), &embeddings)?;
    let b_alpha = params.b_alpha.item()?;
    let mut energies = Vec::with_capacity(h_len);
    for i in 0..h_len {
        energies.push(tensor::dot(&g.row(i)?, &params.w_alpha)? + b_alpha);
    }
    let alphas = tensor::softmax(&Tensor::vector(energies))?;

    // Step 3: variable-level attention
    let hs = lstm::lstm_sequence(std::slice::from_ref(&params.rnn_beta), &embeddings)?;
    let mut beta_data = Vec::with_capacity(h_len * m);
    for i in 0..h_len {
        let proj = tensor::add(&tensor::matvec(&params.w_beta, &hs.row(i)?)?, &params.b_beta)?;
        beta_data.extend_from_slice(tensor::tanh(&proj)?.data());
    }
    let betas = Tensor::matrix(h_len, m, beta_data)?;

    // Step 4: context vector
    let mut context = Tensor::zeros(vec![m]);
    for i in 0..h_len {
        let weighted = tensor::scale(
            &tensor::mul(&betas.row(i)?, &embeddings.row(i)?)?,
            alphas.data()[i],
        )?;
        context = tensor::add(&context, &weighted)?;
    }

    // Step 5: scalar readout
    let prediction = tensor::dot(&params.w_out.row(0)?, &context)? + params.b_out.item()?;
    if !prediction.is_finite() {
        return Err(Error::Numeric("non-finite prediction".into()));
    }

    Ok(ForwardTrace {
        embeddings,
        alphas,
        betas,
        context,
        prediction,
    })
}

fn transpose(a: &Tensor) -> Result<Tensor> {
    let (r, c) = (a.rows()?, a.cols()?);
    let mut data = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            data[j * r + i] = a.at(i, j);
        }
    }
    Tensor::matrix(c, r, data)
}

/// RETAIN registered on a tape for training.
pub struct TapedRetain {
    pub w_emb: Var,
    pub rnn_alpha: TapedLstm,
    pub w_alpha: Var,
    pub b_alpha: Var,
    pub rnn_beta: TapedLstm,
    pub w_beta: Var,
    pub b_beta: Var,
    pub w_out: Var,
    pub b_out: Var,
    dims: ModelDimensions,
}

impl TapedRetain {
    pub fn register(tape: &mut Tape, params: &RetainParameters) -> Self {
        TapedRetain {
            w_emb: tape.leaf(params.w_emb.clone()),
            rnn_alpha: TapedLstm::register(tape, &params.rnn_alpha),
            w_alpha: tape.leaf(params.w_alpha.clone()),
            b_alpha: tape.leaf(params.b_alpha.clone()),
            rnn_beta: TapedLstm::register(tape, &params.rnn_beta),
            w_beta: tape.leaf(params.w_beta.clone()),
            b_beta: tape.leaf(params.b_beta.clone()),
            w_out: tape.leaf(params.w_out.clone()),
            b_out: tape.leaf(params.b_out.clone()),
            dims: params.dims,
        }
    }

    /// Leaves in the same order as [`RetainParameters::tensors`].
    pub fn leaves(&self) -> Vec<Var> {
        vec![
            self.w_emb,
            self.rnn_alpha.w,
            self.rnn_alpha.u,
            self.rnn_alpha.b,
            self.w_alpha,
            self.b_alpha,
            self.rnn_beta.w,
            self.rnn_beta.u,
            self.rnn_beta.b,
            self.w_beta,
            self.b_beta,
            self.w_out,
            self.b_out,
        ]
    }

    /// Differentiable forward pass; returns the scalar prediction var.
    pub fn forward(&self, tape: &mut Tape, x: &Tensor) -> Result<Var> {
        check_input(&self.dims, x)?;
        let h_len = self.dims.history;

        let mut embeds = Vec::with_capacity(h_len);
        for i in 0..h_len {
            let xi = tape.leaf(x.row(i)?);
            embeds.push(tape.matvec(self.w_emb, xi)?);
        }

        let g = self.rnn_alpha.sequence(tape, &embeds)?;
        let mut energies = Vec::with_capacity(h_len);
        for gi in g {
            let e = tape.dot(self.w_alpha, gi)?;
            energies.push(tape.add(e, self.b_alpha)?);
        }
        let evec = tape.concat(&energies)?;
        let alphas = tape.softmax(evec)?;

        let hs = self.rnn_beta.sequence(tape, &embeds)?;
        let mut context: Option<Var> = None;
        for i in 0..h_len {
            let proj = tape.matvec(self.w_beta, hs[i])?;
            let proj = tape.add(proj, self.b_beta)?;
            let beta = tape.tanh(proj)?;
            let bv = tape.mul(beta, embeds[i])?;
            let ai = tape.slice(alphas, i, 1)?;
            let weighted = tape.scale_var(ai, bv)?;
            context = Some(match context {
                Some(c) => tape.add(c, weighted)?,
                None => weighted,
            });
        }
        let context = context.expect("history >= 1");
        let out = tape.matvec(self.w_out, context)?;
        tape.add(out, self.b_out)
    }
}

/// Baseline: per-step linear embedding, 2-layer LSTM, linear head on the last
/// hidden state.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineParameters {
    pub dims: ModelDimensions,
    pub w_emb: Tensor,
    pub layers: Vec<LstmParameters>,
    pub w_out: Tensor,
    pub b_out: Tensor,
}

impl BaselineParameters {
    pub fn init<R: Rng>(dims: ModelDimensions, rng: &mut R) -> Result<Self> {
        dims.validate()?;
        let (r, m, h) = (dims.inputs, dims.embed, dims.hidden);
        let eb = 1.0 / (r as f64).sqrt();
        let w_emb = Tensor::matrix(m, r, (0..m * r).map(|_| rng.gen_range(-eb..eb)).collect())?;
        let layers = vec![
            LstmParameters::init(m, h, rng),
            LstmParameters::init(h, h, rng),
        ];
        let ob = 1.0 / (h as f64).sqrt();
        let w_out = Tensor::matrix(1, h, (0..h).map(|_| rng.gen_range(-ob..ob)).collect())?;
        Ok(BaselineParameters {
            dims,
            w_emb,
            layers,
            w_out,
            b_out: Tensor::scalar(0.0),
        })
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.w_emb];
        for l in &self.layers {
            out.push(&l.w);
            out.push(&l.u);
            out.push(&l.b);
        }
        out.push(&self.w_out);
        out.push(&self.b_out);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = vec![&mut self.w_emb];
        for l in &mut self.layers {
            out.push(&mut l.w);
            out.push(&mut l.u);
            out.push(&mut l.b);
        }
        out.push(&mut self.w_out);
        out.push(&mut self.b_out);
        out
    }
}

pub fn baseline_forward(params: &BaselineParameters, x: &Tensor) -> Result<f64> {
    check_input(&params.dims, x)?;
    let embeddings = tensor::matmul(x, &transpose(&params.w_emb)?)?;
    let hs = lstm::lstm_sequence(&params.layers, &embeddings)?;
    let last = hs.row(params.dims.history - 1)?;
    let y = tensor::dot(&params.w_out.row(0)?, &last)? + params.b_out.item()?;
    if !y.is_finite() {
        return Err(Error::Numeric("non-finite prediction".into()));
    }
    Ok(y)
}

pub struct TapedBaseline {
    pub w_emb: Var,
    pub layers: Vec<TapedLstm>,
    pub w_out: Var,
    pub b_out: Var,
    dims: ModelDimensions,
}

impl TapedBaseline {
    pub fn register(tape: &mut Tape, params: &BaselineParameters) -> Self {
        TapedBaseline {
            w_emb: tape.leaf(params.w_emb.clone()),
            layers: params
                .layers
                .iter()
                .map(|l| TapedLstm::register(tape, l))
                .collect(),
            w_out: tape.leaf(params.w_out.clone()),
            b_out: tape.leaf(params.b_out.clone()),
            dims: params.dims,
        }
    }

    pub fn leaves(&self) -> Vec<Var> {
        let mut out = vec![self.w_emb];
        for l in &self.layers {
            out.push(l.w);
            out.push(l.u);
            out.push(l.b);
        }
        out.push(self.w_out);
        out.push(self.b_out);
        out
    }

    pub fn forward(&self, tape: &mut Tape, x: &Tensor) -> Result<Var> {
        check_input(&self.dims, x)?;
        let h_len = self.dims.history;
        let mut inputs = Vec::with_capacity(h_len);
        for i in 0..h_len {
            let xi = tape.leaf(x.row(i)?);
            inputs.push(tape.matvec(self.w_emb, xi)?);
        }
        for layer in &self.layers {
            inputs = layer.sequence(tape, &inputs)?;
        }
        let last = *inputs.last().unwrap();
        let out = tape.matvec(self.w_out, last)?;
        tape.add(out, self.b_out)
    }
}

/// A trained model of either architecture.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Retain(RetainParameters),
    Baseline(BaselineParameters),
}

impl Model {
    pub fn dims(&self) -> &ModelDimensions {
        match self {
            Model::Retain(p) => &p.dims,
            Model::Baseline(p) => &p.dims,
        }
    }

    pub fn predict(&self, x: &Tensor) -> Result<f64> {
        match self {
            Model::Retain(p) => Ok(retain_forward(p, x)?.prediction),
            Model::Baseline(p) => baseline_forward(p, x),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::Retain(_) => "retain",
            Model::Baseline(_) => "lstm",
        }
    }
}

// --- weight file format ------------------------------------------------
//
// magic "RTNW" | version u32 | kind u8 (1 retain, 2 baseline) |
// r, H, PH, m, p as u32 LE | tensors in declared order, f64 LE | EOF

const MAGIC: &[u8; 4] = b"RTNW";
const FORMAT_VERSION: u32 = 1;

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(MAGIC)?;
    f.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let (kind, dims, tensors) = match model {
        Model::Retain(p) => (1u8, p.dims, p.tensors()),
        Model::Baseline(p) => (2u8, p.dims, p.tensors()),
    };
    f.write_all(&[kind])?;
    for v in [
        dims.inputs,
        dims.history,
        dims.horizon,
        dims.embed,
        dims.hidden,
    ] {
        f.write_all(&(v as u32).to_le_bytes())?;
    }
    for t in tensors {
        for v in t.data() {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)
        .map_err(|_| Error::Format("model file too short".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic bytes, not a model file".into()));
    }
    let mut u32buf = [0u8; 4];
    f.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {}",
            version
        )));
    }
    let mut kind = [0u8; 1];
    f.read_exact(&mut kind)?;
    let mut header = [0usize; 5];
    for slot in header.iter_mut() {
        f.read_exact(&mut u32buf)?;
        *slot = u32::from_le_bytes(u32buf) as usize;
    }
    let dims = ModelDimensions {
        inputs: header[0],
        history: header[1],
        horizon: header[2],
        embed: header[3],
        hidden: header[4],
    };
    dims.validate().map_err(|e| Error::Format(e.to_string()))?;

    let mut model = match kind[0] {
        1 => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
            Model::Retain(RetainParameters::init(dims, &mut rng)?)
        }
        2 => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
            Model::Baseline(BaselineParameters::init(dims, &mut rng)?)
        }
        k => return Err(Error::Format(format!("unknown model kind {}", k))),
    };
    let tensors = match &mut model {
        Model::Retain(p) => p.tensors_mut(),
        Model::Baseline(p) => p.tensors_mut(),
    };
    let mut f64buf = [0u8; 8];
    for t in tensors {
        for slot in t.data_mut() {
            f.read_exact(&mut f64buf).map_err(|_| {
                Error::Format("payload shorter than dimension header implies".into())
            })?;
            *slot = f64::from_le_bytes(f64buf);
            if !slot.is_finite() {
                return Err(Error::Format("non-finite weight in model file".into()));
            }
        }
    }
    // must be exactly at EOF
    let mut extra = [0u8; 1];
    if f.read(&mut extra)? != 0 {
        return Err(Error::Format(
            "payload longer than dimension header implies".into(),
        ));
    }
    Ok(model)
}

use rand::SeedableRng;
