use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no dynamics: advection and diffusion are both inactive")]
    NoDynamics,

    #[error("cannot scale zero field")]
    ZeroField,

    #[error("simulation unstable: non-finite value at point (j={j}, k={k}) at t={t} s")]
    Unstable { j: usize, k: usize, t: f64 },

    #[error("zero-signal message script: all amplitudes are zero")]
    ZeroSignal,

    #[error("collinear conditioning set")]
    CollinearConditioningSet,

    #[error("insufficient samples: n={n} with conditioning order {order} (need n - order - 3 >= 1)")]
    InsufficientSamples { n: usize, order: usize },

    #[error("run too short: run_len={run_len} but lag window needs at least {required} samples")]
    RunTooShort { run_len: usize, required: usize },

    #[error("shape mismatch in {path}: {detail}")]
    Shape { path: PathBuf, detail: String },

    #[error("malformed file {path}: {detail}")]
    Malformed { path: PathBuf, detail: String },

    #[error("missing sidecar file {0} (expected next to the dataset CSV)")]
    MissingSidecar(PathBuf),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }
}
