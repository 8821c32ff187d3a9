//! Heatmap rendering for attention maps. Rendering rescales for display only;
//! dumps always carry the raw scores.

use std::path::Path;

use image::{GrayImage, Luma, Rgb, RgbImage};

use crate::attention::{min_max_normalize, PixelAttentionMap};
use crate::error::Result;
use crate::image::{save_gray8, save_rgb8, to_u8};
use crate::simulate::RoiMask;

// viridis, sampled at 0, 0.25, 0.5, 0.75, 1
const VIRIDIS: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

fn display_values(map: &PixelAttentionMap) -> Vec<f64> {
    let mut v = map.scores().to_vec();
    min_max_normalize(&mut v);
    v
}

/// Grayscale heatmap with value `round(255 * minmax(a))`.
pub fn heatmap_gray(map: &PixelAttentionMap) -> GrayImage {
    let v = display_values(map);
    GrayImage::from_fn(map.width() as u32, map.height() as u32, |x, y| {
        Luma([to_u8(v[y as usize * map.width() + x as usize])])
    })
}

fn colormap(t: f64) -> [u8; 3] {
    let pos = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (pos.floor() as usize).min(VIRIDIS.len() - 2);
    let f = pos - i as f64;
    let mut out = [0u8; 3];
    for k in 0..3 {
        out[k] = (VIRIDIS[i][k] + (VIRIDIS[i + 1][k] - VIRIDIS[i][k]) * f).round() as u8;
    }
    out
}

/// Colour-mapped heatmap, optionally outlining the ROI in red.
pub fn heatmap_color(map: &PixelAttentionMap, roi: Option<&RoiMask>) -> RgbImage {
    let v = display_values(map);
    let w = map.width();
    let mut img = RgbImage::from_fn(w as u32, map.height() as u32, |x, y| {
        Rgb(colormap(v[y as usize * w + x as usize]))
    });
    if let Some(mask) = roi {
        outline(&mut img, mask);
    }
    img
}

/// Paints ROI pixels that touch a non-ROI pixel or the border.
pub fn outline(img: &mut RgbImage, mask: &RoiMask) {
    let (h, w) = (mask.height(), mask.width());
    for i in mask.indices() {
        let (r, c) = (i / w, i % w);
        let edge = r == 0
            || c == 0
            || r + 1 == h
            || c + 1 == w
            || !mask.contains(i - w)
            || !mask.contains(i + w)
            || !mask.contains(i - 1)
            || !mask.contains(i + 1);
        if edge {
            img.put_pixel(c as u32, r as u32, Rgb([255, 0, 0]));
        }
    }
}

pub fn save_heatmap_gray(map: &PixelAttentionMap, path: impl AsRef<Path>) -> Result<()> {
    save_gray8(&heatmap_gray(map), path.as_ref())
}

pub fn save_heatmap_color(map: &PixelAttentionMap, roi: Option<&RoiMask>, path: impl AsRef<Path>) -> Result<()> {
    save_rgb8(&heatmap_color(map, roi), path.as_ref())
}
