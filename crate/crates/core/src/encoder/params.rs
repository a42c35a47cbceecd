use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EncodeError;
use crate::autodiff::{Tape, Var};
use crate::scalar::Scalar;

/// Number of movement-direction slots: six axis-aligned directions plus "other".
pub const DIRECTIONS: usize = 7;

/// Rows of the agent's token-position table; later positions share the last row.
pub const MAX_POSITIONS: usize = 32;

/// Token vocabulary with a reserved unknown-word id 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

pub const UNK: &str = "<unk>";

impl Vocab {
    /// Sorted, de-duplicated vocabulary over `words` with `<unk>` at id 0.
    pub fn build<'a, I: IntoIterator<Item = &'a str>>(words: I) -> Self {
        let mut ws: Vec<String> = words.into_iter().filter(|w| *w != UNK).map(str::to_string).collect();
        ws.sort();
        ws.dedup();
        let mut tokens = vec![UNK.to_string()];
        tokens.extend(ws);
        Self::from_tokens(tokens).expect("well-formed vocabulary")
    }

    /// Restores a vocabulary in stored order; id 0 must be `<unk>`.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, EncodeError> {
        if tokens.first().map(String::as_str) != Some(UNK) {
            return Err(EncodeError::Shape("vocabulary must start with <unk>".into()));
        }
        let index: HashMap<String, usize> = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != tokens.len() {
            return Err(EncodeError::Shape("duplicate vocabulary entries".into()));
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub vocab: usize,
    pub n_landmarks: usize,
    pub d: usize,
}

impl Dims {
    /// Landmark one-hot, direction one-hot, normalised step index.
    pub fn feature_dim(&self) -> usize {
        self.n_landmarks + DIRECTIONS + 1
    }
}

/// Named blocks of the flat parameter vector, in storage order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    TokenTable,
    StepTable,
    ProjW1,
    ProjB1,
    ProjW2,
    ProjB2,
    PredW,
    PredB,
    AttnCtx,
    AttnObs,
    AttnPrev,
    StateBias,
    Stop,
    ValueW,
    ValueB,
    PosTable,
}

impl Block {
    pub const ALL: [Block; 16] = [
        Block::TokenTable,
        Block::StepTable,
        Block::ProjW1,
        Block::ProjB1,
        Block::ProjW2,
        Block::ProjB2,
        Block::PredW,
        Block::PredB,
        Block::AttnCtx,
        Block::AttnObs,
        Block::AttnPrev,
        Block::StateBias,
        Block::Stop,
        Block::ValueW,
        Block::ValueB,
        Block::PosTable,
    ];

    fn size(self, dims: &Dims) -> usize {
        let d = dims.d;
        match self {
            Block::TokenTable => dims.vocab * d,
            Block::StepTable => dims.feature_dim() * d,
            Block::ProjW1 | Block::ProjW2 | Block::PredW | Block::AttnCtx | Block::AttnObs | Block::AttnPrev => d * d,
            Block::ProjB1 | Block::ProjB2 | Block::PredB | Block::StateBias | Block::Stop | Block::ValueW => d,
            Block::ValueB => 1,
            Block::PosTable => MAX_POSITIONS * d,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    dims: Dims,
    offsets: [usize; Block::ALL.len() + 1],
}

impl Layout {
    pub fn new(dims: Dims) -> Self {
        let mut offsets = [0; Block::ALL.len() + 1];
        for (i, b) in Block::ALL.iter().enumerate() {
            offsets[i + 1] = offsets[i] + b.size(&dims);
        }
        Self { dims, offsets }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.offsets[Block::ALL.len()]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self, b: Block) -> std::ops::Range<usize> {
        let i = b as usize;
        self.offsets[i]..self.offsets[i + 1]
    }
}

/// Flat parameter vector for encoders, projection/predictor heads and the agent.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams<F> {
    layout: Layout,
    data: Vec<F>,
}

impl<F: Scalar> EncoderParams<F> {
    pub fn zeros(dims: Dims) -> Self {
        let layout = Layout::new(dims);
        let data = vec![F::zero(); layout.len()];
        Self { layout, data }
    }

    /// Uniform(-0.1, 0.1) initialisation.
    pub fn init(dims: Dims, seed: u64) -> Self {
        let mut p = Self::zeros(dims);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in &mut p.data {
            *x = F::of(rng.gen_range(-0.1..0.1));
        }
        p
    }

    pub fn from_flat(dims: Dims, data: Vec<F>) -> Result<Self, EncodeError> {
        let layout = Layout::new(dims);
        if data.len() != layout.len() {
            return Err(EncodeError::Shape(format!(
                "expected {} parameters, got {}",
                layout.len(),
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(EncodeError::NonFinite);
        }
        Ok(Self { layout, data })
    }

    pub fn dims(&self) -> Dims {
        self.layout.dims
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block(&self, b: Block) -> &[F] {
        &self.data[self.layout.range(b)]
    }

    pub fn block_mut(&mut self, b: Block) -> &mut [F] {
        let r = self.layout.range(b);
        &mut self.data[r]
    }

    /// Puts every parameter on the tape as a leaf.
    pub fn load(&self, tape: &Tape<F>) -> ParamVars {
        ParamVars {
            vars: tape.leaves(&self.data),
            layout: self.layout.clone(),
        }
    }

    /// Puts every parameter on the tape as a constant (no gradient wanted).
    pub fn load_frozen(&self, tape: &Tape<F>) -> ParamVars {
        ParamVars {
            vars: tape.constants(&self.data),
            layout: self.layout.clone(),
        }
    }
}

/// Tape handles for a loaded parameter vector.
#[derive(Clone, Debug)]
pub struct ParamVars {
    vars: Vec<Var>,
    layout: Layout,
}

impl ParamVars {
    pub fn all(&self) -> &[Var] {
        &self.vars
    }

    pub fn dims(&self) -> Dims {
        self.layout.dims
    }

    pub fn block(&self, b: Block) -> &[Var] {
        &self.vars[self.layout.range(b)]
    }

    pub fn token(&self, id: usize) -> &[Var] {
        let d = self.layout.dims.d;
        &self.block(Block::TokenTable)[id * d..(id + 1) * d]
    }

    /// Position row for token index `i`.
    pub fn position(&self, i: usize) -> &[Var] {
        let d = self.layout.dims.d;
        let k = i.min(MAX_POSITIONS - 1);
        &self.block(Block::PosTable)[k * d..(k + 1) * d]
    }

    pub fn step_row(&self, k: usize) -> &[Var] {
        let d = self.layout.dims.d;
        &self.block(Block::StepTable)[k * d..(k + 1) * d]
    }
}

/// Versioned JSON checkpoint: vocabulary, shapes and the flat parameter array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub vocab: Vec<String>,
    pub dims: Dims,
    pub params: Vec<f64>,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl Checkpoint {
    pub fn new<F: Scalar>(vocab: &Vocab, params: &EncoderParams<F>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            vocab: vocab.tokens().to_vec(),
            dims: params.dims(),
            params: params.as_slice().iter().map(|x| x.as_f64()).collect(),
        }
    }

    pub fn restore<F: Scalar>(&self) -> Result<(Vocab, EncoderParams<F>), EncodeError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(EncodeError::Shape(format!("unsupported checkpoint version {}", self.version)));
        }
        let vocab = Vocab::from_tokens(self.vocab.clone())?;
        if vocab.len() != self.dims.vocab {
            return Err(EncodeError::Shape("vocabulary size does not match dims".into()));
        }
        let data = self.params.iter().map(|&x| F::of(x)).collect();
        Ok((vocab, EncoderParams::from_flat(self.dims, data)?))
    }

    pub fn save(&self, path: &Path) -> Result<(), EncodeError> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EncodeError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
