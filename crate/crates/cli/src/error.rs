use std::fmt;

/// Bad flags, config keys or scenario files. Exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// A pipeline stage that failed at run time. Exit code 3.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: anyhow::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}` failed: {:#}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Exit code for an error returned by a command.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<ConfigError>().is_some() {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}

/// Tags any failure inside `body` with the stage name.
pub fn in_stage<T>(stage: &'static str, body: impl FnOnce() -> anyhow::Result<T>) -> anyhow::Result<T> {
    body().map_err(|source| match source.downcast::<ConfigError>() {
        Ok(config) => anyhow::Error::new(config),
        Err(source) => anyhow::Error::new(StageError { stage, source }),
    })
}
