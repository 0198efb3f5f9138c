use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A computation failed on a validated configuration, e.g. no admissible
    /// point could be sampled.
    #[error("{context}: {source}")]
    Compute {
        context: String,
        #[source]
        source: finsler_core::FinslerError,
    },
}

impl CliError {
    pub fn compute(context: impl Into<String>) -> impl FnOnce(finsler_core::FinslerError) -> CliError {
        let context = context.into();
        move |source| CliError::Compute { context, source }
    }
}
