use std::ops::Range;

use image::RgbImage;
use ndarray::{s, Array2, Array3, Array4, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::layers::{self, Affine, Conv, Linear};
use super::scores::EmotionScores;
use super::shift::{shifted_channels, temporal_shift, temporal_shift_adjoint, ShiftConfig};
use super::ModelError;
use crate::labels::NUM_LABELS;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    /// Bottleneck residual network with stages of 3, 4, 6 and 3 blocks.
    #[default]
    Resnet50,
    /// Small basic-block residual network for CPU-scale runs.
    Tiny(TinySpec),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TinySpec {
    pub stem_channels: usize,
    /// One basic block per entry; every stage after the first halves the resolution.
    pub stage_channels: Vec<usize>,
}

impl Default for TinySpec {
    fn default() -> Self {
        TinySpec { stem_channels: 16, stage_channels: vec![16, 32] }
    }
}

impl TinySpec {
    /// Stem convolution followed directly by the classifier.
    pub fn two_layer() -> Self {
        TinySpec { stem_channels: 8, stage_channels: Vec::new() }
    }
}

impl Architecture {
    pub fn tiny() -> Self {
        Architecture::Tiny(TinySpec::default())
    }

    pub fn id(&self) -> String {
        match self {
            Architecture::Resnet50 => "resnet50".to_string(),
            Architecture::Tiny(spec) => {
                let stages: Vec<String> = spec.stage_channels.iter().map(|c| c.to_string()).collect();
                format!("tiny-{}-[{}]", spec.stem_channels, stages.join(","))
            }
        }
    }

    pub fn parameter_count(&self) -> usize {
        Layout::build(self).0.len
    }

    /// Input channel count of every residual branch, where the shift is applied.
    pub fn branch_input_channels(&self) -> Vec<usize> {
        Layout::build(self).0.blocks.iter().map(|b| b.units[0].conv.in_c).collect()
    }
}

/// Per-channel input normalization applied to `[0, 1]` pixel values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization { mean: [0.0; 3], std: [1.0; 3] }
    }
}

/// Stacks frames into a `[T, 3, H, W]` tensor of normalized values.
pub fn image_to_tensor<'a, I>(frames: I, norm: &Normalization) -> Result<Array4<f64>, ModelError>
where
    I: IntoIterator<Item = &'a RgbImage>,
{
    let frames: Vec<&RgbImage> = frames.into_iter().collect();
    let first = frames.first().ok_or_else(|| ModelError::ShapeMismatch { expected: "at least one frame".into(), got: "0 frames".into() })?;
    let (w, h) = first.dimensions();
    let mut x = Array4::zeros((frames.len(), 3, h as usize, w as usize));
    for (t, frame) in frames.iter().enumerate() {
        if frame.dimensions() != (w, h) {
            return Err(ModelError::ShapeMismatch { expected: format!("{w}x{h}"), got: format!("{}x{}", frame.width(), frame.height()) });
        }
        for (px, py, p) in frame.enumerate_pixels() {
            for c in 0..3 {
                x[[t, c, py as usize, px as usize]] = (p.0[c] as f64 / 255.0 - norm.mean[c]) / norm.std[c];
            }
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
struct Unit {
    conv: Conv,
    affine: Affine,
}

#[derive(Debug, Clone, PartialEq)]
struct Block {
    units: Vec<Unit>,
    shortcut: Option<Unit>,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    stem: Unit,
    max_pool: bool,
    blocks: Vec<Block>,
    fc: Linear,
    len: usize,
}

#[derive(Debug, Clone, Copy)]
enum Init {
    He(usize),
    Const(f64),
    Uniform(f64),
}

#[derive(Default)]
struct Builder {
    len: usize,
    inits: Vec<(Range<usize>, Init)>,
}

impl Builder {
    fn take(&mut self, n: usize, init: Init) -> usize {
        let start = self.len;
        self.len += n;
        self.inits.push((start..self.len, init));
        start
    }

    fn unit(&mut self, in_c: usize, out_c: usize, k: usize, stride: usize, scale: f64) -> Unit {
        let mut conv = Conv { in_c, out_c, k, stride, pad: k / 2, offset: 0 };
        conv.offset = self.take(conv.len(), Init::He(conv.fan_in()));
        let offset = self.take(out_c, Init::Const(scale));
        self.take(out_c, Init::Const(0.0));
        Unit { conv, affine: Affine { c: out_c, offset } }
    }
}

impl Layout {
    fn build(arch: &Architecture) -> (Layout, Vec<(Range<usize>, Init)>) {
        let mut b = Builder::default();
        let (stem, max_pool, blocks, features) = match arch {
            Architecture::Resnet50 => {
                let stem = b.unit(3, 64, 7, 2, 1.0);
                let mut blocks = Vec::new();
                let mut in_c = 64;
                for (stage, (&count, &mid)) in [3usize, 4, 6, 3].iter().zip(&[64usize, 128, 256, 512]).enumerate() {
                    for i in 0..count {
                        let stride = if stage > 0 && i == 0 { 2 } else { 1 };
                        let out_c = mid * 4;
                        let units = vec![b.unit(in_c, mid, 1, 1, 1.0), b.unit(mid, mid, 3, stride, 1.0), b.unit(mid, out_c, 1, 1, 0.0)];
                        let shortcut = (stride != 1 || in_c != out_c).then(|| b.unit(in_c, out_c, 1, stride, 1.0));
                        blocks.push(Block { units, shortcut });
                        in_c = out_c;
                    }
                }
                (stem, true, blocks, in_c)
            }
            Architecture::Tiny(spec) => {
                let stem = b.unit(3, spec.stem_channels, 3, 2, 1.0);
                let mut blocks = Vec::new();
                let mut in_c = spec.stem_channels;
                for (i, &out_c) in spec.stage_channels.iter().enumerate() {
                    let stride = if i == 0 { 1 } else { 2 };
                    let units = vec![b.unit(in_c, out_c, 3, stride, 1.0), b.unit(out_c, out_c, 3, 1, 1.0)];
                    let shortcut = (stride != 1 || in_c != out_c).then(|| b.unit(in_c, out_c, 1, stride, 1.0));
                    blocks.push(Block { units, shortcut });
                    in_c = out_c;
                }
                (stem, false, blocks, in_c)
            }
        };
        let offset = b.take(NUM_LABELS * features, Init::Uniform(1.0 / (features as f64).sqrt()));
        b.take(NUM_LABELS, Init::Const(0.0));
        let fc = Linear { in_f: features, out_f: NUM_LABELS, offset };
        (Layout { stem, max_pool, blocks, fc, len: b.len }, b.inits)
    }
}

struct UnitTrace {
    in_dims: (usize, usize, usize, usize),
    cols: Array2<f64>,
    z: Array4<f64>,
}

struct BlockTrace {
    units: Vec<UnitTrace>,
    /// Rectified outputs of every unit but the last.
    hidden: Vec<Array4<f64>>,
    shortcut: Option<UnitTrace>,
    out: Array4<f64>,
}

/// Intermediate values of one snippet forward pass, consumed by [`Backbone::snippet_backward`].
pub struct SnippetTrace {
    input_dims: (usize, usize, usize, usize),
    stem: UnitTrace,
    stem_out: Array4<f64>,
    pool: Option<(Array4<f64>, Vec<usize>)>,
    blocks: Vec<BlockTrace>,
    features_dims: (usize, usize, usize, usize),
    pooled: Array2<f64>,
    frames: usize,
}

/// Residual backbone with an 8-way linear head and optional temporal shift.
#[derive(Debug, Clone, PartialEq)]
pub struct Backbone {
    pub architecture: Architecture,
    pub shift: Option<ShiftConfig>,
    pub input_size: u32,
    pub params: Vec<f64>,
    layout: Layout,
}

impl Backbone {
    /// Seeded He-normal initialization.
    pub fn new(architecture: Architecture, shift: Option<ShiftConfig>, input_size: u32, seed: u64) -> Result<Self, ModelError> {
        let (layout, inits) = Layout::build(&architecture);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; layout.len];
        for (range, init) in inits {
            match init {
                Init::Const(v) => params[range].fill(v),
                Init::He(fan_in) => {
                    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
                    params[range].iter_mut().for_each(|p| *p = normal.sample(&mut rng));
                }
                Init::Uniform(bound) => {
                    let dist = rand_distr::Uniform::new_inclusive(-bound, bound).expect("finite bound");
                    params[range].iter_mut().for_each(|p| *p = dist.sample(&mut rng));
                }
            }
        }
        Self::from_params(architecture, shift, input_size, params)
    }

    pub fn from_params(architecture: Architecture, shift: Option<ShiftConfig>, input_size: u32, params: Vec<f64>) -> Result<Self, ModelError> {
        let (layout, _) = Layout::build(&architecture);
        if params.len() != layout.len {
            return Err(ModelError::ShapeMismatch { expected: format!("{} parameters", layout.len), got: params.len().to_string() });
        }
        if let Some(cfg) = shift {
            cfg.validate()?;
            for block in &layout.blocks {
                shifted_channels(block.units[0].conv.in_c, cfg.fraction)?;
            }
        }
        if input_size == 0 {
            return Err(ModelError::ShapeMismatch { expected: "positive input size".into(), got: "0".into() });
        }
        Ok(Backbone { architecture, shift, input_size, params, layout })
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn feature_channels(&self) -> usize {
        self.layout.fc.in_f
    }

    fn check_input(&self, x: &Array4<f64>) -> Result<(), ModelError> {
        let (t, c, h, w) = x.dim();
        let s = self.input_size as usize;
        if t == 0 || c != 3 || h != s || w != s {
            return Err(ModelError::ShapeMismatch { expected: format!("[n>=1, 3, {s}, {s}]"), got: format!("{:?}", x.dim()) });
        }
        Ok(())
    }

    /// Frames that enter the network: the middle one without shift, all with shift.
    fn select_frames(&self, snippet: &Array4<f64>) -> Array4<f64> {
        if self.shift.is_some() {
            snippet.clone()
        } else {
            let mid = snippet.dim().0 / 2;
            snippet.slice(s![mid..mid + 1, .., .., ..]).to_owned()
        }
    }

    fn unit_forward(&self, unit: &Unit, x: &Array4<f64>, trace: &mut Option<UnitTrace>, keep: bool) -> Array4<f64> {
        let (z, cols) = unit.conv.forward(&self.params, x);
        let y = unit.affine.forward(&self.params, &z);
        if keep {
            *trace = Some(UnitTrace { in_dims: x.dim(), cols, z });
        }
        y
    }

    fn unit_backward(&self, unit: &Unit, trace: &UnitTrace, dy: &Array4<f64>, grad: &mut [f64]) -> Array4<f64> {
        let dz = unit.affine.backward(&self.params, &trace.z, dy, grad);
        unit.conv.backward(&self.params, trace.in_dims, &trace.cols, &dz, grad)
    }

    fn shift_fraction(&self) -> f64 {
        self.shift.map_or(0.0, |s| s.fraction)
    }

    fn block_forward(&self, block: &Block, x: &Array4<f64>, keep: bool) -> (Array4<f64>, Option<BlockTrace>) {
        let mut u = if self.shift.is_some() { temporal_shift(x, self.shift_fraction()).expect("validated shift") } else { x.clone() };
        let mut units = Vec::new();
        let mut hidden = Vec::new();
        let last = block.units.len() - 1;
        for (i, unit) in block.units.iter().enumerate() {
            let mut tr = None;
            u = self.unit_forward(unit, &u, &mut tr, keep);
            units.extend(tr);
            if i < last {
                layers::relu(&mut u);
                if keep {
                    hidden.push(u.clone());
                }
            }
        }
        let mut short_trace = None;
        let shortcut = match &block.shortcut {
            Some(unit) => self.unit_forward(unit, x, &mut short_trace, keep),
            None => x.clone(),
        };
        u += &shortcut;
        layers::relu(&mut u);
        let trace = keep.then(|| BlockTrace { units, hidden, shortcut: short_trace, out: u.clone() });
        (u, trace)
    }

    fn block_backward(&self, block: &Block, trace: &BlockTrace, dy: &Array4<f64>, grad: &mut [f64]) -> Array4<f64> {
        let mut d = dy.clone();
        layers::relu_backward(&trace.out, &mut d);
        let mut db = d.clone();
        let last = block.units.len() - 1;
        for i in (0..block.units.len()).rev() {
            if i < last {
                layers::relu_backward(&trace.hidden[i], &mut db);
            }
            db = self.unit_backward(&block.units[i], &trace.units[i], &db, grad);
        }
        if self.shift.is_some() {
            db = temporal_shift_adjoint(&db, self.shift_fraction()).expect("validated shift");
        }
        match (&block.shortcut, &trace.shortcut) {
            (Some(unit), Some(tr)) => db += &self.unit_backward(unit, tr, &d, grad),
            _ => db += &d,
        }
        db
    }

    /// Final convolutional features `[T, C, h, w]` and, when `keep`, the trace for backward.
    fn features(&self, x: &Array4<f64>, keep: bool) -> (Array4<f64>, Option<SnippetTrace>) {
        let mut stem = None;
        let mut a = self.unit_forward(&self.layout.stem, x, &mut stem, keep);
        layers::relu(&mut a);
        let stem_out = if keep { a.clone() } else { Array4::zeros((0, 0, 0, 0)) };
        let mut pool = None;
        if self.layout.max_pool {
            let (p, argmax) = layers::max_pool(&a);
            if keep {
                pool = Some((a.clone(), argmax));
            }
            a = p;
        }
        let mut blocks = Vec::new();
        for block in &self.layout.blocks {
            let (out, tr) = self.block_forward(block, &a, keep);
            blocks.extend(tr);
            a = out;
        }
        let trace = keep.then(|| SnippetTrace {
            input_dims: x.dim(),
            stem: stem.expect("kept stem trace"),
            stem_out,
            pool,
            blocks,
            features_dims: a.dim(),
            pooled: Array2::zeros((0, 0)),
            frames: x.dim().0,
        });
        (a, trace)
    }

    fn mean_logits(logits: &Array2<f64>) -> EmotionScores {
        let t = logits.nrows() as f64;
        EmotionScores::logits(std::array::from_fn(|l| logits.column(l).sum() / t))
    }

    /// Per-frame logits `[T, 8]` for a `[T, 3, S, S]` input.
    pub fn frame_logits(&self, x: &Array4<f64>) -> Result<Array2<f64>, ModelError> {
        self.check_input(x)?;
        let (features, _) = self.features(x, false);
        Ok(self.layout.fc.forward(&self.params, &layers::global_avg_pool(&features)))
    }

    /// Logits of one snippet `[n, 3, S, S]`.
    pub fn snippet_forward(&self, snippet: &Array4<f64>) -> Result<EmotionScores, ModelError> {
        self.check_input(snippet)?;
        let logits = self.frame_logits(&self.select_frames(snippet))?;
        Ok(Self::mean_logits(&logits))
    }

    /// Forward pass that keeps every intermediate needed for backpropagation.
    pub fn snippet_trace(&self, snippet: &Array4<f64>) -> Result<(EmotionScores, SnippetTrace), ModelError> {
        self.check_input(snippet)?;
        let x = self.select_frames(snippet);
        let (features, trace) = self.features(&x, true);
        let mut trace = trace.expect("trace kept");
        trace.pooled = layers::global_avg_pool(&features);
        let logits = self.layout.fc.forward(&self.params, &trace.pooled);
        Ok((Self::mean_logits(&logits), trace))
    }

    /// Accumulates into `grad` the parameter gradient for snippet-logit gradient `d_logits`.
    pub fn snippet_backward(&self, trace: &SnippetTrace, d_logits: &[f64; NUM_LABELS], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len(), "gradient buffer length");
        let t = trace.frames;
        let d_frame = Array2::from_shape_fn((t, NUM_LABELS), |(_, l)| d_logits[l] / t as f64);
        let d_pooled = self.layout.fc.backward(&self.params, &trace.pooled, &d_frame, grad);
        let mut d = layers::global_avg_pool_backward(trace.features_dims, &d_pooled);
        for (block, tr) in self.layout.blocks.iter().zip(&trace.blocks).rev() {
            d = self.block_backward(block, tr, &d, grad);
        }
        if let Some((pre_pool, argmax)) = &trace.pool {
            d = layers::max_pool_backward(pre_pool.dim(), argmax, &d);
        }
        layers::relu_backward(&trace.stem_out, &mut d);
        let dx = self.unit_backward(&self.layout.stem, &trace.stem, &d, grad);
        debug_assert_eq!(dx.dim(), trace.input_dims);
    }

    /// Final convolutional activations of the representative frame and the
    /// gradient of the snippet logit for `label` with respect to them, each `[C, h, w]`.
    ///
    /// Without shift that frame is the only one processed; with shift it is the middle frame.
    pub fn final_layer_capture(&self, snippet: &Array4<f64>, label: usize) -> Result<(Array3<f64>, Array3<f64>), ModelError> {
        if label >= NUM_LABELS {
            return Err(ModelError::InvalidLabel(label));
        }
        self.check_input(snippet)?;
        let x = self.select_frames(snippet);
        let (features, _) = self.features(&x, false);
        let t = features.dim().0;
        let mut d_frame = Array2::zeros((t, NUM_LABELS));
        d_frame.column_mut(label).fill(1.0 / t as f64);
        let mut scratch = vec![0.0; self.params.len()];
        let pooled = layers::global_avg_pool(&features);
        let d_pooled = self.layout.fc.backward(&self.params, &pooled, &d_frame, &mut scratch);
        let d_features = layers::global_avg_pool_backward(features.dim(), &d_pooled);
        let mid = t / 2;
        Ok((features.index_axis(Axis(0), mid).to_owned(), d_features.index_axis(Axis(0), mid).to_owned()))
    }
}
