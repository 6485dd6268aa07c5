use std::fmt::Display;
use std::path::Path;

use fabseg_core::classify::ClassifyError;
use fabseg_core::corpus::CorpusError;
use fabseg_core::mesh::MeshError;
use fabseg_core::shape::ShapeError;
use fabseg_core::spectral::SpectralError;
use fabseg_core::stylize::StyleError;
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Internal,
}

impl ErrorKind {
    pub fn code(self) -> u8 {
        match self {
            ErrorKind::Usage => 1,
            ErrorKind::Data => 2,
            ErrorKind::Internal => 3,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Data => "data",
            ErrorKind::Internal => "internal",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Usage, message)
    }

    pub fn data(message: impl Display) -> Self {
        Self::new(ErrorKind::Data, message.to_string())
    }

    pub fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Self + '_ {
        move |e| Self::data(format!("{}: {e}", path.display()))
    }

    pub fn report(&self, json: bool) {
        if json {
            let body = json!({"error": {"kind": self.kind.name(), "exit_code": self.kind.code(), "message": self.message}});
            eprintln!("{body}");
        } else if self.kind == ErrorKind::Usage {
            eprint!("{}", self.message);
            if !self.message.ends_with('\n') {
                eprintln!();
            }
        } else {
            eprintln!("error: {}", self.message);
        }
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        Self::data(e)
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::NoConvergence { .. } | SpectralError::Factorization { .. } => {
                Self::new(ErrorKind::Internal, e.to_string())
            }
            _ => Self::data(e),
        }
    }
}

impl From<ShapeError> for CliError {
    fn from(e: ShapeError) -> Self {
        Self::data(e)
    }
}

impl From<ClassifyError> for CliError {
    fn from(e: ClassifyError) -> Self {
        Self::data(e)
    }
}

impl From<StyleError> for CliError {
    fn from(e: StyleError) -> Self {
        Self::data(e)
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        Self::data(e)
    }
}
