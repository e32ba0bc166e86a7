use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    CacheMismatch(String),
    #[error(transparent)]
    Core(#[from] shaprank::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        use shaprank::Error as E;
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::CacheMismatch(_) => "cache_mismatch",
            CliError::Core(e) => match e {
                E::InvalidArgument(_) | E::Shape(_) => "usage",
                E::Capacity { .. } => "capacity",
                E::Budget { .. } => "budget",
                E::Singular { .. }
                | E::NonFinite { .. }
                | E::Divergence { .. }
                | E::Evaluation { .. } => "numerical",
                E::Io(_) | E::Parse(_) => "io",
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "usage" => 2,
            "capacity" | "budget" => 3,
            "numerical" => 4,
            _ => 5,
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            exit_code: i32,
            message: String,
        }
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: Body<'a>,
        }
        serde_json::to_string(&Wrapper {
            error: Body {
                kind: self.kind(),
                exit_code: self.exit_code(),
                message: self.to_string(),
            },
        })
        .expect("error serializes")
    }
}
