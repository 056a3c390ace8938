use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("elements belong to different group specs ({left:#010x} vs {right:#010x})")]
    SpecMismatch { left: u32, right: u32 },

    #[error("{0} is not represented in the materialized ball")]
    OutOfWindow(String),

    #[error("ball of radius {radius} needs ~{needed_mb} MB, over the {budget_mb} MB budget")]
    Resource {
        radius: u32,
        needed_mb: u64,
        budget_mb: u64,
    },

    #[error("invalid group spec: {0}")]
    InvalidSpec(String),

    #[error("cannot parse word {word:?}: {reason}")]
    ParseWord { word: String, reason: String },

    #[error(transparent)]
    Load(#[from] LoadError),

    #[error("path position {t} outside [0, {len}]")]
    Range { t: usize, len: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("exactness lost: {0}")]
    Exactness(String),

    #[error("ball radius {radius} is below the required margin {required} for {what}")]
    Margin {
        what: String,
        radius: u32,
        required: u32,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("decay fit underdetermined: {0}")]
    FitUnderdetermined(String),

    #[error("no exponential decay detected: {0}")]
    NoDecay(String),

    #[error("p selection failed: {0}")]
    PSelection(String),
}

/// Failures while ingesting a Cayley-ball file.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed ball file: {0}")]
    Malformed(String),

    #[error("edge {src} --{label}--> {dst} has no reverse edge under the inverse generator")]
    NonSymmetric {
        src: String,
        label: String,
        dst: String,
    },

    #[error("basepoint {0:?} is not a vertex")]
    MissingBasepoint(String),

    #[error("declared radius {declared} but BFS from the basepoint reaches radius {measured}")]
    RadiusMismatch { declared: u32, measured: u32 },

    #[error("vertex {vertex} at distance {dist} < radius is missing its {label} edge")]
    IncompleteVertex {
        vertex: String,
        dist: u32,
        label: String,
    },
}

impl Error {
    /// The computation needed vertices beyond a finite ball or margin.
    pub fn is_window(&self) -> bool {
        matches!(self, Error::OutOfWindow(_) | Error::Margin { .. } | Error::Exactness(_))
    }
}
