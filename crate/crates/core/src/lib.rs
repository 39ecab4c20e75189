//! Diffusion-tensor voxel features, robust normalization, a UMAP embedding
//! and k-NN label transfer in the latent space, with Dice-based evaluation.

pub mod classify;
pub mod error;
pub mod eval;
pub mod manifold;
pub mod matrix;
pub mod normalize;
pub mod store;
pub mod synth;
pub mod tensor;

pub use classify::{classify_points, default_k, knn_vote, LabeledLatentSet, VoteResult};
pub use error::{Error, Result};
pub use eval::{run_crossval, AblationRow, CrossvalConfig, DiceRow, EvaluationReport};
pub use manifold::{EmbeddingModel, KnnMethod, LayoutMode, NeighborCount, UmapParams};
pub use matrix::Matrix;
pub use normalize::RobustScaler;
pub use store::{
    load_dataset, make_folds, Dataset, FeatureGroup, FeatureGroupSpec, FoldPlan, Label, LabelSet,
    VoxelRecord,
};
pub use synth::{generate, SynthSpec};
