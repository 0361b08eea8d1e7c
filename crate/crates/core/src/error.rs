use thiserror::Error;

/// Errors raised by the numerical routines and the scenario runner.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: {detail}")]
    Dimension { context: &'static str, detail: String },

    #[error("matrix is not symmetric (relative asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("rank deficient{}: numerical rank {rank}, required {required}", fmt_context(.context))]
    RankDeficient {
        rank: usize,
        required: usize,
        context: Option<String>,
    },

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("{what} is not Hurwitz (max real eigenvalue {max_real:.3e})")]
    NotHurwitz { what: &'static str, max_real: f64 },

    #[error("no convergence after {iterations} iterations (last metric {last_metric:.3e})")]
    NonConvergence { iterations: usize, last_metric: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn fmt_context(context: &Option<String>) -> String {
    match context {
        Some(c) => format!(" ({c})"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn dim(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            context,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Attach a context label to a rank failure; other variants pass through.
    pub fn with_rank_context(self, label: impl Into<String>) -> Self {
        match self {
            Error::RankDeficient { rank, required, .. } => Error::RankDeficient {
                rank,
                required,
                context: Some(label.into()),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
