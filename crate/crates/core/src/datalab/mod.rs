//! Datasets, synthetic data, IDX ingestion and membership bookkeeping.

mod dataset;
mod idx;
mod split;
mod synth;

pub use dataset::{Dataset, Membership};
pub use idx::{
    encode_idx_images, encode_idx_labels, load_idx, parse_idx_images, parse_idx_labels, write_idx,
    IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use split::{
    group_eval, make_split, simulate_contributors, CoAttackGroup, ContributorSim, ContributorSpec,
    MembershipSplit, SealedLabels,
};
pub use synth::{
    render_glyph, synth_digits, synth_gaussian_mixture, synth_gaussian_mixture_detailed,
    GlyphStyle, MixtureSample, Stroke, DIGIT_NOISE,
};
