//! Shared fixtures for the pipeline benchmarks.

use attnboot::synthetic::textured_image;
use attnboot::{analyze, inject, AttentionSource, BootstrapConfig, Image, NoiseSpec, RoiMask, UncertaintyReport};

pub const PATCH: usize = 8;

pub fn source() -> AttentionSource {
    AttentionSource::toy(PATCH)
}

/// A textured image with a square noise ROI.
pub fn perturbed(size: usize) -> (Image, RoiMask) {
    let noise = NoiseSpec {
        seed: 2,
        ..NoiseSpec::default()
    };
    inject(&textured_image(size, size, 1), &noise).expect("fixture injection")
}

pub fn report(size: usize, replicates: usize) -> UncertaintyReport {
    let (image, _) = perturbed(size);
    let config = BootstrapConfig {
        replicates,
        seed: 3,
        ..BootstrapConfig::default()
    };
    analyze(&image, &source(), &config).expect("fixture analysis")
}
