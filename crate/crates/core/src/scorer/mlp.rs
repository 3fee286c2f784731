//! Row-wise two-layer perceptron scorer, its combined classification and
//! pairwise ranking loss, and the binary model file.

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{window_inputs, InputRow, WindowContext, WindowScorer, INPUT_LEN};
use crate::error::{Error, Result};
use crate::ingest::{read_bytes, write_bytes};
use crate::rankcore::{log_softmax, WindowScoreMatrix};

const MAGIC: &[u8; 4] = b"RFM1";
pub const DEFAULT_HIDDEN: usize = 32;

/// Parameters, also used as the gradient container.
///
/// `w1` is `d_in × hidden` and `w2` is `hidden × classes`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerModel {
    pub d_in: usize,
    pub hidden: usize,
    pub classes: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl ScorerModel {
    pub fn zeros(d_in: usize, hidden: usize, classes: usize) -> Self {
        Self {
            d_in,
            hidden,
            classes,
            w1: vec![0.0; d_in * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * classes],
            b2: vec![0.0; classes],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(d_in: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros(d_in, hidden, classes);
        let a1 = (6.0 / (d_in + hidden) as f64).sqrt();
        m.w1.iter_mut().for_each(|w| *w = rng.gen_range(-a1..a1));
        let a2 = (6.0 / (hidden + classes) as f64).sqrt();
        m.w2.iter_mut().for_each(|w| *w = rng.gen_range(-a2..a2));
        m
    }

    /// Model for windows of `window` rows.
    pub fn for_window(window: usize, hidden: usize, seed: u64) -> Self {
        Self::init(INPUT_LEN, hidden, window + 1, seed)
    }

    pub fn window(&self) -> usize {
        self.classes - 1
    }

    pub fn tensors(&self) -> [&Vec<f64>; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn check_shape(&self) -> Result<()> {
        let ok = self.w1.len() == self.d_in * self.hidden
            && self.b1.len() == self.hidden
            && self.w2.len() == self.hidden * self.classes
            && self.b2.len() == self.classes
            && self.classes >= 2;
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(
                "model tensors disagree with header".into(),
            ))
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(16 + 8 * self.tensors().iter().map(|t| t.len()).sum::<usize>());
        out.extend_from_slice(MAGIC);
        for d in [self.d_in, self.hidden, self.classes] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for t in self.tensors() {
            for v in t {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(Error::UnsupportedFormat("not a scorer model file".into()));
        }
        let dim =
            |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let mut m = Self::zeros(dim(0), dim(1), dim(2));
        let body = &bytes[16..];
        let need: usize = m.tensors().iter().map(|t| t.len()).sum::<usize>() * 8;
        if body.len() != need {
            return Err(Error::TruncatedData(format!(
                "model body has {} bytes, header implies {need}",
                body.len()
            )));
        }
        let mut vals = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        for t in m.tensors_mut() {
            t.iter_mut().for_each(|v| *v = vals.next().unwrap());
        }
        m.check_shape()?;
        if !m.is_finite() {
            return Err(Error::invariant("model", "non-finite parameter"));
        }
        Ok(m)
    }
}

pub fn write_model(model: &ScorerModel, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &model.to_bytes())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ScorerModel> {
    ScorerModel::from_bytes(&read_bytes(path.as_ref())?)
}

/// Hidden pre-activations and logits for one row.
fn forward_row(m: &ScorerModel, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (h, c) = (m.hidden, m.classes);
    let mut a = m.b1.clone();
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            let w = &m.w1[i * h..(i + 1) * h];
            a.iter_mut().zip(w).for_each(|(aj, wj)| *aj += xi * wj);
        }
    }
    let mut z = m.b2.clone();
    for (j, &aj) in a.iter().enumerate() {
        if aj > 0.0 {
            let w = &m.w2[j * c..(j + 1) * c];
            z.iter_mut().zip(w).for_each(|(zc, wc)| *zc += aj * wc);
        }
    }
    (a, z)
}

fn check_inputs(m: &ScorerModel, inputs: &[InputRow]) -> Result<()> {
    m.check_shape()?;
    if m.d_in != INPUT_LEN {
        return Err(Error::ShapeMismatch(format!(
            "model expects {} inputs, rows have {INPUT_LEN}",
            m.d_in
        )));
    }
    if inputs.len() + 1 != m.classes {
        return Err(Error::ShapeMismatch(format!(
            "{} rows for a model with {} classes",
            inputs.len(),
            m.classes
        )));
    }
    Ok(())
}

pub fn mlp_forward(model: &ScorerModel, inputs: &[InputRow]) -> Result<WindowScoreMatrix> {
    check_inputs(model, inputs)?;
    let data: Vec<f64> = inputs
        .iter()
        .flat_map(|x| forward_row(model, x).1)
        .collect();
    WindowScoreMatrix::new(inputs.len(), model.classes, data)
}

/// Combined loss: mean cross-entropy over real rows plus `alpha` times the
/// hinge `max(0, m - (y_j - y_i))` summed over real salient pairs with
/// `gt_i < gt_j`, where `y` is each row's expected class index.
pub fn loss_and_grad(
    model: &ScorerModel,
    inputs: &[InputRow],
    gt: &[usize],
    dummy: &[bool],
    alpha: f64,
    margin: f64,
) -> Result<(f64, ScorerModel)> {
    check_inputs(model, inputs)?;
    if gt.len() != inputs.len() || dummy.len() != inputs.len() {
        return Err(Error::ShapeMismatch(
            "labels and rows differ in length".into(),
        ));
    }
    let c = model.classes;
    let real: Vec<usize> = (0..inputs.len()).filter(|&r| !dummy[r]).collect();
    let mut grad = ScorerModel::zeros(model.d_in, model.hidden, c);
    if real.is_empty() {
        return Ok((0.0, grad));
    }

    let fwd: Vec<(Vec<f64>, Vec<f64>)> = inputs.iter().map(|x| forward_row(model, x)).collect();
    let probs: Vec<Vec<f64>> = fwd
        .iter()
        .map(|(_, z)| log_softmax(z).into_iter().map(f64::exp).collect())
        .collect();
    let expected: Vec<f64> = probs
        .iter()
        .map(|p| p.iter().enumerate().map(|(k, pk)| k as f64 * pk).sum())
        .collect();

    let nr = real.len() as f64;
    let mut loss = 0.0;
    // dL/dz per row
    let mut dz = vec![vec![0.0; c]; inputs.len()];
    for &r in &real {
        let logp = log_softmax(&fwd[r].1);
        loss -= logp[gt[r]] / nr;
        for k in 0..c {
            dz[r][k] += (probs[r][k] - if k == gt[r] { 1.0 } else { 0.0 }) / nr;
        }
    }

    let mut dy = vec![0.0; inputs.len()];
    for &i in &real {
        for &j in &real {
            if gt[i] > 0 && gt[j] > 0 && gt[i] < gt[j] {
                let h = margin - (expected[j] - expected[i]);
                if h > 0.0 {
                    loss += alpha * h;
                    dy[j] -= alpha;
                    dy[i] += alpha;
                }
            }
        }
    }
    for &r in &real {
        if dy[r] != 0.0 {
            for k in 0..c {
                dz[r][k] += dy[r] * probs[r][k] * (k as f64 - expected[r]);
            }
        }
    }

    let h = model.hidden;
    for &r in &real {
        let (a, _) = &fwd[r];
        let mut da = vec![0.0; h];
        for j in 0..h {
            if a[j] > 0.0 {
                let w = &model.w2[j * c..(j + 1) * c];
                let g = &mut grad.w2[j * c..(j + 1) * c];
                let mut back = 0.0;
                for k in 0..c {
                    g[k] += a[j] * dz[r][k];
                    back += w[k] * dz[r][k];
                }
                da[j] = back;
            }
        }
        grad.b2.iter_mut().zip(&dz[r]).for_each(|(g, d)| *g += d);
        grad.b1.iter_mut().zip(&da).for_each(|(g, d)| *g += d);
        for (i, &xi) in inputs[r].iter().enumerate() {
            if xi != 0.0 {
                let g = &mut grad.w1[i * h..(i + 1) * h];
                g.iter_mut().zip(&da).for_each(|(gj, dj)| *gj += xi * dj);
            }
        }
    }
    Ok((loss, grad))
}

impl WindowScorer for ScorerModel {
    fn score_window(&self, ctx: &WindowContext<'_>) -> Result<WindowScoreMatrix> {
        if ctx.features.len() != ctx.scene.proposals.len() {
            return Err(Error::ShapeMismatch(format!(
                "scene {} has {} proposals but {} feature vectors",
                ctx.scene.scene_id,
                ctx.scene.proposals.len(),
                ctx.features.len()
            )));
        }
        mlp_forward(self, &window_inputs(ctx.features, ctx.members))
    }
}
