use std::path::Path;

use thiserror::Error;

/// Failure categories, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Data,
    Numeric,
    Checkpoint,
    Io,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Data => 3,
            Category::Numeric => 4,
            Category::Checkpoint => 5,
            Category::Io => 6,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::Config => "config error",
            Category::Data => "data error",
            Category::Numeric => "numeric divergence",
            Category::Checkpoint => "corrupt checkpoint",
            Category::Io => "io error",
        }
    }
}

#[derive(Debug, Error)]
#[error("{}: {message}", category.label())]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl CliError {
    pub fn new(category: Category, message: impl Into<String>) -> Self {
        Self {
            category,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Category::Config, message)
    }

    pub fn checkpoint(message: impl Into<String>) -> Self {
        Self::new(Category::Checkpoint, message)
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Self::new(Category::Io, format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        self.category.exit_code()
    }
}

impl From<socialgcn::Error> for CliError {
    fn from(err: socialgcn::Error) -> Self {
        use socialgcn::Error as E;
        let category = match &err {
            E::Config(_) => Category::Config,
            E::Divergence(_) => Category::Numeric,
            E::Io { .. } => Category::Io,
            E::Parse { .. } | E::Data(_) | E::Shape { .. } | E::UnknownId { .. } => Category::Data,
        };
        Self::new(category, err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn missing(path: &Path, what: &str) -> CliError {
    CliError::config(format!("{what} file {} does not exist", path.display()))
}
