use std::fmt;

pub const OK: i32 = 0;
pub const TAMPERED: i32 = 1;
pub const INCONCLUSIVE: i32 = 2;
pub const USAGE: i32 = 3;
pub const FAILURE: i32 = 4;

/// An error carrying the process exit status it maps to.
#[derive(Debug)]
pub struct Exit {
    pub code: i32,
    pub message: String,
}

impl Exit {
    pub fn usage(message: impl fmt::Display) -> Self {
        Self {
            code: USAGE,
            message: message.to_string(),
        }
    }

    pub fn failure(message: impl fmt::Display) -> Self {
        Self {
            code: FAILURE,
            message: message.to_string(),
        }
    }
}

impl From<memento_fixity::ConfigError> for Exit {
    fn from(e: memento_fixity::ConfigError) -> Self {
        Self::usage(e)
    }
}

impl From<memento_fixity::AnchorError> for Exit {
    fn from(e: memento_fixity::AnchorError) -> Self {
        use memento_fixity::AnchorError::*;
        match e {
            MalformedHash(_) | EmptyBatch => Self::usage(e),
            NotFound(_) => Self {
                code: TAMPERED,
                message: e.to_string(),
            },
            LedgerUnavailable(_) | CorruptLedger { .. } => Self::failure(e),
        }
    }
}
