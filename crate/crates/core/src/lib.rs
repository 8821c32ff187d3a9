//! Bootstrap-based uncertainty quantification and regularization of
//! vision-transformer attention maps.
//!
//! The pipeline for one image:
//!
//! 1. compute the observed attention map ([`attention`]),
//! 2. build `B` bootstrap null images ([`bootstrap`]) and their attention maps,
//! 3. standardize observed and null scores, then derive p-values, local false
//!    discovery rates and an estimate of the null proportion ([`inference`]),
//! 4. shrink the map with p-, l- or pi0-thresholding ([`regularize`]).
//!
//! [`simulate`] and [`metrics`] implement the noise-injection study used to
//! measure how much attention the regularizers remove from pure noise;
//! [`evaluation`] ties them together per image and per corpus. Tensors cross
//! the process boundary as [`dump`] files.

pub mod attention;
pub mod bootstrap;
pub mod dump;
pub mod error;
pub mod evaluation;
pub mod image;
pub mod inference;
pub mod metrics;
pub mod regularize;
pub mod render;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod synthetic;

pub use attention::{attention_for, postprocess, toy_attention, AttentionSource, PatchAttention, PixelAttentionMap};
pub use bootstrap::{
    channel_stats, generate_ensemble, nonparametric_null, parametric_null, BootstrapConfig, BootstrapMode,
    ChannelStats,
};
pub use dump::{read_dump, read_dump_as, write_dump, Dump, Manifest, Role};
pub use error::{Error, Result};
pub use evaluation::{evaluate_image, summarize, ImageOutcome, SimulationConfig, SuppressionSummary};
pub use image::{load_image, save_png, Image};
pub use inference::{
    analyze, analyze_with_bins, estimate_pi0, lfdr, null_moments, p_values, z_stats, NullEnsemble, NullMoments,
    UncertaintyReport,
};
pub use metrics::{
    mean_percentile, percentile_vs_rest, se_sp_curve, sensitivity, specificity, srmsd, suppression_factor,
    EvalRecord, SeSpCurve,
};
pub use regularize::{
    regularize, threshold_l, threshold_p, threshold_pi0, z_zeroing, ShrinkageMethod, ShrinkageSpec, ThresholdRule,
};
pub use simulate::{diffuse_roi, inject, inject_square, mean_roi_z, passes_z_filter, NoiseKind, NoiseSpec, RoiMask};
