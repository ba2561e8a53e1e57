use std::path::PathBuf;

use qvar_core::Error as CoreError;

/// Errors of the tool, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// Bad configuration, flags or input files.
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    /// A numerical failure at one level of a schedule.
    #[error("level n = {n}: {source}")]
    Level { n: usize, source: CoreError },
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type AppResult<T> = Result<T, AppError>;

fn is_numerical(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::NotPsd { .. } | CoreError::Convergence(_) | CoreError::DegenerateKernel(_) | CoreError::Capacity { .. }
    )
}

impl AppError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    /// 2 for configuration and input errors, 3 for numerical failures,
    /// 1 for anything else (such as failing to write output).
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Config(_) => 2,
            AppError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
            AppError::Io { .. } => 1,
            AppError::Level { source, .. } | AppError::Core(source) => {
                if is_numerical(source) {
                    3
                } else {
                    2
                }
            }
        }
    }

    /// Attach the level at which a core error happened.
    pub fn at_level(n: usize) -> impl FnOnce(CoreError) -> AppError {
        move |source| AppError::Level { n, source }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(AppError::config("x").exit_code(), 2);
        let not_psd = CoreError::NotPsd { eigenvalue: -1.0, threshold: -1e-10 };
        assert_eq!(AppError::at_level(64)(not_psd.clone()).exit_code(), 3);
        assert!(AppError::at_level(64)(not_psd).to_string().contains("n = 64"));
        assert_eq!(AppError::from(CoreError::Usage("u".into())).exit_code(), 2);
    }
}
