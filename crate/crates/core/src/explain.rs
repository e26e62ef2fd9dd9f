//! Grad-CAM localization maps and heat overlays.

use image::{Rgb, RgbImage};
use ndarray::{Array2, Array3, Array4, Axis};
use serde::{Deserialize, Serialize};

use crate::labels::NUM_LABELS;
use crate::model::{Backbone, ModelError};

/// Non-negative map over the final convolutional grid, max-normalized to 1 unless all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMap {
    pub values: Array2<f64>,
    pub target_label: usize,
    pub layer: String,
}

impl ActivationMap {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Bilinear resize with pixel-center alignment, re-normalized to max 1.
    pub fn upsample(&self, width: usize, height: usize) -> Array2<f64> {
        let mut out = bilinear(&self.values, width, height);
        normalize(&mut out);
        out
    }
}

fn bilinear(src: &Array2<f64>, width: usize, height: usize) -> Array2<f64> {
    let (sh, sw) = src.dim();
    let sample = |pos: f64, n: usize| -> (usize, usize, f64) {
        let p = pos.clamp(0.0, (n - 1) as f64);
        let i0 = p.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, p - i0 as f64)
    };
    Array2::from_shape_fn((height, width), |(y, x)| {
        let (y0, y1, fy) = sample((y as f64 + 0.5) * sh as f64 / height as f64 - 0.5, sh);
        let (x0, x1, fx) = sample((x as f64 + 0.5) * sw as f64 / width as f64 - 0.5, sw);
        let top = src[[y0, x0]] * (1.0 - fx) + src[[y0, x1]] * fx;
        let bottom = src[[y1, x0]] * (1.0 - fx) + src[[y1, x1]] * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

fn normalize(map: &mut Array2<f64>) {
    let max = map.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        map.mapv_inplace(|v| v / max);
    }
}

/// Spatial mean of the gradient per channel of a `[C, h, w]` tensor.
pub fn channel_weights(grads: &Array3<f64>) -> Vec<f64> {
    grads.outer_iter().map(|g| g.mean().unwrap_or(0.0)).collect()
}

/// `sum_c weights[c] * acts[c]` before rectification.
pub fn weighted_sum(acts: &Array3<f64>, weights: &[f64]) -> Array2<f64> {
    let (_, h, w) = acts.dim();
    let mut sum = Array2::zeros((h, w));
    for (a, &wc) in acts.outer_iter().zip(weights) {
        sum.scaled_add(wc, &a);
    }
    sum
}

/// Grad-CAM from captured activations and gradients, both `[C, h, w]`.
pub fn grad_cam_from(acts: &Array3<f64>, grads: &Array3<f64>, target_label: usize, layer: &str) -> Result<ActivationMap, ModelError> {
    if target_label >= NUM_LABELS {
        return Err(ModelError::InvalidLabel(target_label));
    }
    if acts.dim() != grads.dim() {
        return Err(ModelError::ShapeMismatch { expected: format!("{:?}", acts.dim()), got: format!("{:?}", grads.dim()) });
    }
    let mut values = weighted_sum(acts, &channel_weights(grads));
    values.mapv_inplace(|v| v.max(0.0));
    normalize(&mut values);
    Ok(ActivationMap { values, target_label, layer: layer.to_string() })
}

/// Grad-CAM of the pre-sigmoid logit of `target_label` at the final convolutional stage.
///
/// Shift models process every snippet frame; the map of the middle frame is returned.
pub fn grad_cam(model: &Backbone, snippet: &Array4<f64>, target_label: usize) -> Result<ActivationMap, ModelError> {
    let (acts, grads) = model.final_layer_capture(snippet, target_label)?;
    grad_cam_from(&acts, &grads, target_label, "final_conv_stage")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Palette {
    /// Blue, cyan, green, yellow, red.
    #[default]
    Jet,
    Grayscale,
}

const JET_STOPS: [[f64; 3]; 5] = [[0.0, 0.0, 255.0], [0.0, 255.0, 255.0], [0.0, 255.0, 0.0], [255.0, 255.0, 0.0], [255.0, 0.0, 0.0]];

impl Palette {
    pub fn color(&self, v: f64) -> [f64; 3] {
        let v = v.clamp(0.0, 1.0);
        match self {
            Palette::Grayscale => [255.0 * v; 3],
            Palette::Jet => {
                let pos = v * (JET_STOPS.len() - 1) as f64;
                let i = (pos.floor() as usize).min(JET_STOPS.len() - 2);
                let f = pos - i as f64;
                std::array::from_fn(|c| JET_STOPS[i][c] * (1.0 - f) + JET_STOPS[i + 1][c] * f)
            }
        }
    }

    pub fn top(&self) -> [u8; 3] {
        self.color(1.0).map(|c| c.round() as u8)
    }
}

/// Blends the palette color of each map value over the frame with weight equal to the value.
///
/// The map is upsampled to the frame size; zero entries leave pixels untouched.
pub fn render_overlay(frame: &RgbImage, map: &ActivationMap, palette: Palette) -> RgbImage {
    let (w, h) = frame.dimensions();
    let up = map.upsample(w as usize, h as usize);
    let mut out = frame.clone();
    for (x, y, px) in out.enumerate_pixels_mut() {
        let m = up[[y as usize, x as usize]];
        if m <= 0.0 {
            continue;
        }
        let color = palette.color(m);
        *px = Rgb(std::array::from_fn(|c| ((1.0 - m) * px.0[c] as f64 + m * color[c]).round().clamp(0.0, 255.0) as u8));
    }
    out
}

/// Stacks maps for several snippets into `[K, h, w]`.
pub fn stack_maps(maps: &[ActivationMap]) -> Option<Array3<f64>> {
    let views: Vec<_> = maps.iter().map(|m| m.values.view()).collect();
    ndarray::stack(Axis(0), &views).ok()
}

#[cfg(test)]
mod tests {
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::model::{Architecture, ShiftConfig};

    #[test]
    fn zero_gradient_gives_zero_map() {
        let acts = Array3::from_elem((4, 3, 3), 2.0);
        let map = grad_cam_from(&acts, &Array3::zeros((4, 3, 3)), 0, "x").unwrap();
        assert!(map.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_channel_hand_case() {
        let acts = array![[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]]];
        let grads = array![[[1.0, 1.0], [1.0, 1.0]], [[-1.0, -1.0], [-1.0, -1.0]]];
        let map = grad_cam_from(&acts, &grads, 3, "x").unwrap();
        assert_eq!(map.values, array![[1.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn single_channel_is_normalized_relu() {
        let acts = array![[[0.5, -1.0], [2.0, 1.0]]];
        let grads = Array3::from_elem((1, 2, 2), 0.3);
        let map = grad_cam_from(&acts, &grads, 1, "x").unwrap();
        assert_eq!(map.values, array![[0.25, 0.0], [1.0, 0.5]]);
    }

    #[test]
    fn invalid_label() {
        let a = Array3::zeros((1, 1, 1));
        assert!(matches!(grad_cam_from(&a, &a, 8, "x"), Err(ModelError::InvalidLabel(8))));
    }

    #[test]
    fn scale_invariant_and_non_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let acts = Array3::from_shape_fn((5, 4, 4), |_| rng.random_range(-1.0..1.0));
            let grads = Array3::from_shape_fn((5, 4, 4), |_| rng.random_range(-1.0..1.0));
            let c = rng.random_range(0.1..10.0);
            let a = grad_cam_from(&acts, &grads, 0, "x").unwrap();
            let b = grad_cam_from(&(&acts * c), &(&grads * c), 0, "x").unwrap();
            assert!(a.values.iter().all(|&v| v >= 0.0));
            for (x, y) in a.values.iter().zip(b.values.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weighted_sum_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Array3::from_shape_fn((3, 2, 2), |_| rng.random_range(-1.0..1.0));
        let b = Array3::from_shape_fn((3, 2, 2), |_| rng.random_range(-1.0..1.0));
        let w = [0.5, -1.0, 2.0];
        let lhs = weighted_sum(&(&a * 2.0 + &b), &w);
        let rhs = weighted_sum(&a, &w) * 2.0 + weighted_sum(&b, &w);
        for (x, y) in lhs.iter().zip(rhs.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn overlays() {
        let frame = RgbImage::from_fn(8, 8, |x, y| Rgb([(x * 30) as u8, (y * 30) as u8, 77]));
        let zero = ActivationMap { values: Array2::zeros((2, 2)), target_label: 0, layer: "x".into() };
        assert_eq!(render_overlay(&frame, &zero, Palette::Jet), frame);
        let one = ActivationMap { values: Array2::ones((2, 2)), target_label: 0, layer: "x".into() };
        let hot = render_overlay(&frame, &one, Palette::Jet);
        assert!(hot.pixels().all(|p| p.0 == [255, 0, 0]));
        let peak = ActivationMap { values: array![[0.2, 0.0], [0.0, 1.0]], target_label: 0, layer: "x".into() };
        let up = peak.upsample(8, 8);
        let (mut best, mut at) = (0.0, (0, 0));
        for ((y, x), &v) in up.indexed_iter() {
            if v > best {
                best = v;
                at = (x as u32, y as u32);
            }
        }
        let px = render_overlay(&frame, &peak, Palette::Jet).get_pixel(at.0, at.1).0;
        let top = Palette::Jet.top();
        assert!((0..3).all(|c| (px[c] as i32 - top[c] as i32).abs() <= 1));
    }

    #[test]
    fn model_grad_cam() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let snippet = Array4::from_shape_fn((3, 3, 16, 16), |_| rng.random_range(0.0..1.0));
        for shift in [None, Some(ShiftConfig::new(0.25))] {
            let model = Backbone::new(Architecture::tiny(), shift, 16, 2).unwrap();
            let map = grad_cam(&model, &snippet, 5).unwrap();
            assert_eq!(map.values.dim(), (4, 4));
            assert!(map.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!(map.max() == 0.0 || map.max() == 1.0);
            assert!(grad_cam(&model, &snippet, 9).is_err());
        }
    }
}
