//! Deterministic synthetic test images.
//!
//! Real photographs are not bundled, so tests, benches and the CLI demo use
//! procedurally textured images: a few random oriented gratings and soft
//! blobs with per-channel colour mixing.

use std::f64::consts::TAU;

use crate::image::Image;
use crate::rng::{self, mix, open_unit};

struct Grating {
    fx: f64,
    fy: f64,
    phase: f64,
    colour: [f64; 3],
}

struct Blob {
    row: f64,
    col: f64,
    radius: f64,
    colour: [f64; 3],
}

/// A textured RGB image; same `(height, width, seed)` gives the same image.
pub fn textured_image(height: usize, width: usize, seed: u64) -> Image {
    let mut rng = rng::stream(mix(seed, 0x7e47));
    let mut u = || open_unit(&mut rng);
    let gratings: Vec<Grating> = (0..4)
        .map(|_| {
            let angle = u() * TAU;
            // periods between 6 and 60 pixels
            let freq = 1.0 / (6.0 + 54.0 * u());
            Grating {
                fx: freq * angle.cos(),
                fy: freq * angle.sin(),
                phase: u() * TAU,
                colour: [u() - 0.5, u() - 0.5, u() - 0.5],
            }
        })
        .collect();
    let blobs: Vec<Blob> = (0..5)
        .map(|_| Blob {
            row: u() * height as f64,
            col: u() * width as f64,
            radius: (0.05 + 0.2 * u()) * height.min(width) as f64,
            colour: [u() - 0.5, u() - 0.5, u() - 0.5],
        })
        .collect();
    let base = [0.3 + 0.4 * u(), 0.3 + 0.4 * u(), 0.3 + 0.4 * u()];
    Image::from_fn(height, width, |r, c| {
        let (rf, cf) = (r as f64, c as f64);
        let mut px = base;
        for g in &gratings {
            let s = (TAU * (g.fx * cf + g.fy * rf) + g.phase).sin();
            for k in 0..3 {
                px[k] += 0.18 * g.colour[k] * s;
            }
        }
        for b in &blobs {
            let d2 = ((rf - b.row).powi(2) + (cf - b.col).powi(2)) / (b.radius * b.radius);
            let w = (-0.5 * d2).exp();
            for k in 0..3 {
                px[k] += 0.5 * b.colour[k] * w;
            }
        }
        px.map(|v| v.clamp(0.0, 1.0))
    })
    .expect("synthetic image is valid")
}

/// `n` textured images named `synth_000`, `synth_001`, ...
pub fn textured_corpus(n: usize, height: usize, width: usize, seed: u64) -> Vec<(String, Image)> {
    (0..n)
        .map(|k| {
            (
                format!("synth_{k:03}"),
                textured_image(height, width, mix(seed, k as u64)),
            )
        })
        .collect()
}
