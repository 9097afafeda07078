//! Scene ingestion, pipeline orchestration, pair persistence and statistics.

mod config;
mod grid;
mod manifest;
mod pairio;
mod pipeline;
mod stats;
mod video;

pub use config::{ConfigError, PipelineConfig};
pub use grid::{extract_patch_grid, grid_axis, ImageTooSmall};
pub use manifest::{Manifest, ManifestError, SceneManifest};
pub use pairio::{
    decode_meta, encode_meta, pair_dir, read_meta, read_pair, validate_pair_meta, write_pair, PairError,
    PairMeta, FRAME_FILES, LABEL_FILE, META_FILE,
};
pub use pipeline::{
    classify_scene, compute_flows, flow_between, load_stack, process_scene, run_pipeline, scan_donors,
    scene_donors, scene_flows, DonorPool, PipelineError, PipelineReport, SceneCounters, SceneError,
    SceneOutput, SceneSummary,
};
pub use stats::{scan_root, stats_report, DatasetStats, StatsError};
pub use video::{list_frames, parse_ev_pattern, triplets_from_frames, VideoError};
