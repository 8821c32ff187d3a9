//! Attention maps: a built-in toy attention model, external patch-attention
//! dumps, and the head-average / nearest-neighbour / min-max post-processing
//! that turns patch attention into a pixel map.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dump::{self, Dump, Manifest, Role};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::stats;

/// Lower bound on the toy model's softmax temperature.
pub const TOY_TEMPERATURE_FLOOR: f64 = 1e-12;

/// Nonnegative attention weights per `(head, patch)`, patches row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchAttention {
    heads: usize,
    grid_h: usize,
    grid_w: usize,
    patch_size: usize,
    weights: Vec<f64>,
}

impl PatchAttention {
    pub fn new(
        heads: usize,
        grid_h: usize,
        grid_w: usize,
        patch_size: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if heads == 0 || grid_h == 0 || grid_w == 0 || patch_size == 0 {
            return Err(Error::Shape(format!(
                "patch attention dimensions must be positive: heads={heads} grid={grid_h}x{grid_w} patch={patch_size}"
            )));
        }
        if weights.len() != heads * grid_h * grid_w {
            return Err(Error::Shape(format!(
                "{heads} heads x {grid_h}x{grid_w} grid needs {} weights, got {}",
                heads * grid_h * grid_w,
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "attention weights must be finite and nonnegative, found {w}"
            )));
        }
        Ok(PatchAttention {
            heads,
            grid_h,
            grid_w,
            patch_size,
            weights,
        })
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.grid_h, self.grid_w)
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights of one head, patches row-major.
    pub fn head(&self, h: usize) -> &[f64] {
        let p = self.grid_h * self.grid_w;
        &self.weights[h * p..(h + 1) * p]
    }

    /// Per-patch mean over heads.
    pub fn head_mean(&self) -> Vec<f64> {
        let p = self.grid_h * self.grid_w;
        let inv = 1.0 / self.heads as f64;
        (0..p)
            .map(|i| (0..self.heads).map(|h| self.weights[h * p + i]).sum::<f64>() * inv)
            .collect()
    }

    /// Builds from a `patch_attention` dump of shape `[heads, grid_h, grid_w]`.
    ///
    /// When the manifest has no `patch_size`, it is derived from `image_height`.
    pub fn from_dump(dump: &Dump, image_height: usize) -> Result<Self> {
        let m = &dump.manifest;
        if m.role != Role::PatchAttention {
            return Err(Error::RoleMismatch {
                expected: Role::PatchAttention,
                found: m.role,
            });
        }
        let [heads, grid_h, grid_w] = match m.shape.as_slice() {
            [h, gh, gw] => [*h, *gh, *gw],
            [gh, gw] => [1, *gh, *gw],
            other => {
                return Err(Error::Shape(format!(
                    "patch attention shape must be [heads, grid_h, grid_w], got {other:?}"
                )))
            }
        };
        for (key, declared, actual) in [
            ("heads", m.heads, heads),
            ("grid_h", m.grid_h, grid_h),
            ("grid_w", m.grid_w, grid_w),
        ] {
            if let Some(d) = declared {
                if d != actual {
                    return Err(Error::Shape(format!(
                        "manifest {key}={d} disagrees with shape {:?}",
                        m.shape
                    )));
                }
            }
        }
        let patch_size = match m.patch_size {
            Some(p) => p,
            None if image_height % grid_h == 0 => image_height / grid_h,
            None => {
                return Err(Error::PatchGrid(format!(
                    "grid height {grid_h} does not divide image height {image_height}"
                )))
            }
        };
        let weights = dump.data.iter().map(|&v| f64::from(v)).collect();
        PatchAttention::new(heads, grid_h, grid_w, patch_size, weights)
    }

    pub fn to_manifest(&self) -> Manifest {
        let mut m = Manifest::new(
            Role::PatchAttention,
            vec![self.heads, self.grid_h, self.grid_w],
        );
        m.heads = Some(self.heads);
        m.grid_h = Some(self.grid_h);
        m.grid_w = Some(self.grid_w);
        m.patch_size = Some(self.patch_size);
        m
    }
}

/// Per-pixel attention scores, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelAttentionMap {
    height: usize,
    width: usize,
    scores: Vec<f64>,
}

impl PixelAttentionMap {
    pub fn new(height: usize, width: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != height * width {
            return Err(Error::Shape(format!(
                "{height}x{width} map needs {} scores, got {}",
                height * width,
                scores.len()
            )));
        }
        if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite attention score {s}")));
        }
        Ok(PixelAttentionMap {
            height,
            width,
            scores,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn into_scores(self) -> Vec<f64> {
        self.scores
    }

    /// Same shape, new scores.
    pub fn with_scores(&self, scores: Vec<f64>) -> Result<Self> {
        PixelAttentionMap::new(self.height, self.width, scores)
    }

    pub fn to_manifest(&self) -> Manifest {
        Manifest::new(Role::PixelAttention, vec![self.height, self.width])
    }

    pub fn from_dump(dump: &Dump) -> Result<Self> {
        if dump.manifest.role != Role::PixelAttention {
            return Err(Error::RoleMismatch {
                expected: Role::PixelAttention,
                found: dump.manifest.role,
            });
        }
        match dump.manifest.shape.as_slice() {
            [h, w] => PixelAttentionMap::new(*h, *w, dump.data.iter().map(|&v| f64::from(v)).collect()),
            other => Err(Error::Shape(format!("pixel map shape must be [h, w], got {other:?}"))),
        }
    }
}

/// Rescales to `[0, 1]` in place; a constant slice becomes all zeros.
pub fn min_max_normalize(values: &mut [f64]) {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    values.iter_mut().for_each(|v| *v = (*v - lo) / range);
}

fn check_tiling(height: usize, width: usize, patch_size: usize) -> Result<(usize, usize)> {
    if patch_size == 0 || height % patch_size != 0 || width % patch_size != 0 {
        return Err(Error::PatchGrid(format!(
            "patch size {patch_size} does not divide {height}x{width}"
        )));
    }
    Ok((height / patch_size, width / patch_size))
}

/// Deterministic stand-in for a ViT: one head whose weight for each patch is
/// `softmax(v_p / tau)`, where `v_p` is the population variance of the patch's
/// grayscale values and `tau = max(mean_p v_p, 1e-12)`.
pub fn toy_attention(image: &Image, patch_size: usize) -> Result<PatchAttention> {
    let (gh, gw) = check_tiling(image.height(), image.width(), patch_size)?;
    let gray = image.grayscale();
    let width = image.width();
    let mut block = Vec::with_capacity(patch_size * patch_size);
    let variances: Vec<f64> = (0..gh * gw)
        .map(|p| {
            let (pr, pc) = (p / gw, p % gw);
            block.clear();
            for r in pr * patch_size..(pr + 1) * patch_size {
                let row = &gray[r * width..(r + 1) * width];
                block.extend_from_slice(&row[pc * patch_size..(pc + 1) * patch_size]);
            }
            stats::mean_std(&block).1.powi(2)
        })
        .collect();
    let tau = stats::mean(&variances).max(TOY_TEMPERATURE_FLOOR);
    let peak = variances.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v)) / tau;
    let exps: Vec<f64> = variances.iter().map(|v| (v / tau - peak).exp()).collect();
    let total = stats::pairwise_sum(&exps);
    let weights = exps.into_iter().map(|e| e / total).collect();
    PatchAttention::new(1, gh, gw, patch_size, weights)
}

/// Head average, nearest-neighbour upsampling to `target_h x target_w`, and
/// min-max normalization.
pub fn postprocess(pa: &PatchAttention, target_h: usize, target_w: usize) -> Result<PixelAttentionMap> {
    let (gh, gw) = pa.grid();
    let ps = pa.patch_size();
    if gh * ps != target_h || gw * ps != target_w {
        return Err(Error::PatchGrid(format!(
            "{gh}x{gw} grid of {ps}-pixel patches covers {}x{}, target is {target_h}x{target_w}",
            gh * ps,
            gw * ps
        )));
    }
    let mut patch_values = pa.head_mean();
    min_max_normalize(&mut patch_values);
    let scores = upsample_nearest(&patch_values, gw, ps, target_h, target_w);
    PixelAttentionMap::new(target_h, target_w, scores)
}

/// Every pixel takes the value of the patch that contains it.
pub fn upsample_nearest(patch_values: &[f64], grid_w: usize, patch_size: usize, h: usize, w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        let row = &patch_values[(r / patch_size) * grid_w..(r / patch_size + 1) * grid_w];
        out.extend((0..w).map(|c| row[c / patch_size]));
    }
    out
}

/// Where attention maps come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttentionSource {
    /// The built-in [`toy_attention`] model.
    Toy { patch_size: usize },
    /// `patch_attention` dumps written by an external extractor:
    /// `<dir>/<stem>.json` for the observed image and
    /// `<dir>/<stem>_null<b>.json` for bootstrap replicate `b`.
    External { dir: PathBuf, stem: String },
}

impl AttentionSource {
    pub fn toy(patch_size: usize) -> Self {
        AttentionSource::Toy { patch_size }
    }

    pub fn is_external(&self) -> bool {
        matches!(self, AttentionSource::External { .. })
    }

    /// Manifest path of the dump for `name` (external sources only).
    pub fn dump_path(dir: &std::path::Path, name: &str) -> PathBuf {
        dump::dump_paths(&dir.join(name)).0
    }

    /// Name of replicate `b`'s image and dump for a given stem.
    pub fn replicate_name(stem: &str, b: usize) -> String {
        format!("{stem}_null{b}")
    }

    fn map_for(&self, image: &Image, name: Option<&str>) -> Result<PixelAttentionMap> {
        match self {
            AttentionSource::Toy { patch_size } => {
                let pa = toy_attention(image, *patch_size)?;
                postprocess(&pa, image.height(), image.width())
            }
            AttentionSource::External { dir, stem } => {
                let name = name.unwrap_or(stem);
                let dump = dump::read_dump_as(Self::dump_path(dir, name), Role::PatchAttention)?;
                let pa = PatchAttention::from_dump(&dump, image.height())?;
                postprocess(&pa, image.height(), image.width())
            }
        }
    }

    /// Attention of bootstrap replicate `b` (1-based) whose image is `null_image`.
    pub fn replicate(&self, null_image: &Image, b: usize) -> Result<PixelAttentionMap> {
        match self {
            AttentionSource::Toy { .. } => self.map_for(null_image, None),
            AttentionSource::External { stem, .. } => {
                self.map_for(null_image, Some(&Self::replicate_name(stem, b)))
            }
        }
    }

    pub fn describe(&self) -> serde_json::Value {
        match self {
            AttentionSource::Toy { patch_size } => json!({
                "kind": "toy",
                "patch_size": patch_size,
                "temperature": "max(mean patch variance, 1e-12)",
            }),
            AttentionSource::External { dir, stem } => json!({
                "kind": "external",
                "dir": dir,
                "stem": stem,
            }),
        }
    }
}

/// Observed attention map of `image`.
pub fn attention_for(image: &Image, source: &AttentionSource) -> Result<PixelAttentionMap> {
    source.map_for(image, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_image_gives_uniform_weights() {
        let img = Image::filled(16, 24, [0.4; 3]).unwrap();
        let pa = toy_attention(&img, 8).unwrap();
        assert_eq!(pa.grid(), (2, 3));
        for &w in pa.weights() {
            assert_relative_eq!(w, 1.0 / 6.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_patch_softmax() {
        // Left patch constant (v = 0), right patch alternates 0/1 in grayscale
        // (v = 0.25). tau = 0.125, so logits are 0 and 2.
        let img = Image::from_fn(2, 4, |r, c| {
            if c < 2 {
                [0.5; 3]
            } else {
                [((r + c) % 2) as f64; 3]
            }
        })
        .unwrap();
        let pa = toy_attention(&img, 2).unwrap();
        let e2 = 2f64.exp();
        assert_relative_eq!(pa.weights()[0], 1.0 / (1.0 + e2), epsilon = 1e-15);
        assert_relative_eq!(pa.weights()[1], e2 / (1.0 + e2), epsilon = 1e-15);
    }

    #[test]
    fn toy_rejects_indivisible() {
        let img = Image::filled(10, 16, [0.0; 3]).unwrap();
        assert!(matches!(toy_attention(&img, 4), Err(Error::PatchGrid(_))));
    }

    #[test]
    fn postprocess_blocks() {
        let pa = PatchAttention::new(1, 2, 2, 2, vec![2.0, 4.0, 6.0, 8.0]).unwrap();
        let map = postprocess(&pa, 4, 4).unwrap();
        let t = 1.0 / 3.0;
        let u = 2.0 / 3.0;
        #[rustfmt::skip]
        let expected = [
            0.0, 0.0, t, t,
            0.0, 0.0, t, t,
            u, u, 1.0, 1.0,
            u, u, 1.0, 1.0,
        ];
        for (a, b) in map.scores().iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn postprocess_constant_grid_is_zero() {
        let pa = PatchAttention::new(3, 2, 2, 4, vec![0.25; 12]).unwrap();
        let map = postprocess(&pa, 8, 8).unwrap();
        assert!(map.scores().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn postprocess_shape_mismatch() {
        let pa = PatchAttention::new(1, 59, 60, 8, vec![0.1; 59 * 60]).unwrap();
        assert!(matches!(postprocess(&pa, 480, 480), Err(Error::PatchGrid(_))));
    }

    #[test]
    fn head_mean_single_head_is_identity() {
        let w = vec![0.1, 0.2, 0.3, 0.4];
        let pa = PatchAttention::new(1, 2, 2, 1, w.clone()).unwrap();
        assert_eq!(pa.head_mean(), w);
    }

    #[test]
    fn toy_on_constant_image_is_all_zero() {
        let img = Image::filled(16, 16, [0.3; 3]).unwrap();
        let map = attention_for(&img, &AttentionSource::toy(8)).unwrap();
        assert!(map.scores().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_weights_rejected() {
        assert!(PatchAttention::new(1, 1, 2, 1, vec![0.5, -0.1]).is_err());
    }
}
