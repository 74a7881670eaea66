//! Monthly panel ingestion, per-variable transforms, and lagged design
//! matrices.

mod design;
mod frame;
mod month;
mod pipeline;
mod split;
mod transform;

pub use design::{
    build_design, build_design_with_query, feature_label, parse_feature_label, DesignMatrix,
    Imputation, LagSpec, Mode, MIN_FIT_ROWS,
};
pub use frame::{load_csv, AuditedPanel, Panel, PanelWindow, SeriesFrame};
pub use month::Month;
pub use pipeline::PipelineSpec;
pub use split::{derive_seed, kfold_partition, train_test_split};
pub use transform::{apply_transforms, TransformKind, TransformSpec};

pub(crate) use split::rng_from_seed;
