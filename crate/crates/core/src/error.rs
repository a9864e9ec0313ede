use thiserror::Error;

/// A single violated parameter constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub rule: String,
    pub observed: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: {} (observed {})",
            self.field, self.rule, self.observed
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network parameters: {}", join(.0))]
    InvalidParams(Vec<Violation>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "integral did not converge ({context}): estimate {value:e}, error estimate {abs_error:e}"
    )]
    NotConverged {
        context: String,
        value: f64,
        abs_error: f64,
    },

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("tail mass bound {tail:e} exceeds {tolerance:e} at i_max = {i_max}; enlarge i_max")]
    TailMass {
        i_max: usize,
        tail: f64,
        tolerance: f64,
    },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
