use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("degenerate tensor: largest eigenvalue {0} is not positive")]
    DegenerateTensor(f64),

    #[error("zero-length direction vector")]
    ZeroDirection,

    #[error("lattice too small: {0:?} (need at least 2 voxels per axis)")]
    LatticeTooSmall([usize; 3]),

    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: non-finite value in column `{column}` (subject {subject}, voxel ({i}, {j}, {k}))")]
    NonFiniteCell {
        row: usize,
        column: String,
        subject: String,
        i: i64,
        j: i64,
        k: i64,
    },

    #[error("row {row}: cannot parse `{value}` in column `{column}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("unknown label code `{0}`")]
    UnknownLabel(String),

    #[error("feature group {0} was not loaded")]
    GroupNotLoaded(&'static str),

    #[error("unknown feature group `{0}`")]
    UnknownGroup(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("n_neighbors ({k}) must be smaller than the number of points ({n})")]
    TooManyNeighbors { k: usize, n: usize },

    #[error("no default k for latent dimension {0}; an explicit k is required")]
    ExplicitKRequired(usize),

    #[error("curve fit did not converge after {0} iterations")]
    CurveFitDiverged(usize),

    #[error("layout diverged at epoch {epoch}: point {point} has non-finite coordinates")]
    LayoutDiverged { epoch: usize, point: usize },

    #[error("empty labeled set")]
    EmptyLabeledSet,

    #[error("volumes are all zero")]
    ZeroVolume,

    #[error("need at least {need} folds, got {got}")]
    TooFewFolds { need: usize, got: usize },

    #[error("infeasible synthetic spec: {0}")]
    InfeasibleSpec(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed artifact: {0}")]
    Artifact(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short stable identifier, used for machine-readable failure lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFinite(_) | Error::NonFiniteCell { .. } => "non_finite",
            Error::DegenerateTensor(_) => "degenerate_tensor",
            Error::ZeroDirection => "zero_direction",
            Error::LatticeTooSmall(_) => "lattice_too_small",
            Error::MissingColumn(_) => "schema",
            Error::Parse { .. } => "parse",
            Error::UnknownLabel(_) => "unknown_label",
            Error::GroupNotLoaded(_) | Error::UnknownGroup(_) => "feature_group",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::TooManyNeighbors { .. } => "too_many_neighbors",
            Error::ExplicitKRequired(_) => "explicit_k_required",
            Error::CurveFitDiverged(_) => "curve_fit",
            Error::LayoutDiverged { .. } => "layout_diverged",
            Error::EmptyLabeledSet => "empty_labeled_set",
            Error::ZeroVolume => "zero_volume",
            Error::TooFewFolds { .. } => "too_few_folds",
            Error::InfeasibleSpec(_) => "infeasible_spec",
            Error::Fold { source, .. } => source.kind(),
            Error::Artifact(_) => "artifact",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn in_fold(self, fold: usize) -> Error {
        Error::Fold {
            fold,
            source: Box::new(self),
        }
    }
}
