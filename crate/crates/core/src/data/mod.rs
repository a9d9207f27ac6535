//! Ingest, preprocessing, cold-start splitting, batching, and synthetic data.

mod batch;
mod hierarchy;
mod index;
mod log;
mod split;
mod synth;

pub use batch::{log_proportional_quotas, uniform_quotas, Batch, BatchSampler, SamplingMode};
pub use hierarchy::{
    build_all_incidences, build_incidence, load_hierarchy, merge_small_categories, Hierarchy,
    LevelIncidence, OTHER_CATEGORY,
};
pub use index::IdIndex;
pub use log::{binarize, k_core_filter, load_interactions, BadRows, Interaction, InteractionLog};
pub use split::{
    cold_start_split, downsampled_count, load_prepared, save_prepared, ColdStartSplit,
    SplitManifest, SplitParams, SECONDS_PER_DAY,
};
pub use synth::{synth_generate, synth_generate_full, SynthData, SynthParams};
