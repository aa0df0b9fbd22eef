//! CLI errors carry the process exit code, which is part of the
//! interface: scripts branch on it. The codes are
//!
//! | code | meaning                                              |
//! |------|------------------------------------------------------|
//! | 0    | success — every requested output was written         |
//! | 2    | command-line usage error (from the argument parser)  |
//! | 3    | configuration error (config file, flag values)       |
//! | 4    | input error (unreadable or malformed data)           |
//! | 5    | estimation error (a model fit failed)                |
//! | 6    | campaign error (too many replications failed)        |
//! | 7    | output error (an output file could not be written)   |

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_INPUT: i32 = 4;
pub const EXIT_ESTIMATION: i32 = 5;
pub const EXIT_CAMPAIGN: i32 = 6;
pub const EXIT_OUTPUT: i32 = 7;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INPUT, message: message.into() }
    }

    pub fn output(message: impl Into<String>) -> Self {
        CliError { code: EXIT_OUTPUT, message: message.into() }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Pipeline stage, used to map a library error to the exit code of the
/// phase it occurred in.
#[derive(Debug, Clone, Copy)]
pub enum Stage {
    Config,
    Input,
    Estimation,
    Output,
}

/// Adapter for `map_err`: a campaign-tolerance failure keeps its dedicated
/// code regardless of stage; everything else is coded by where it happened.
pub fn in_stage(stage: Stage) -> impl Fn(rdgp::Error) -> CliError {
    move |e| {
        let code = match (&e, stage) {
            (rdgp::Error::CampaignFailure { .. }, _) => EXIT_CAMPAIGN,
            (_, Stage::Config) => EXIT_CONFIG,
            (_, Stage::Input) => EXIT_INPUT,
            (_, Stage::Estimation) => EXIT_ESTIMATION,
            (_, Stage::Output) => EXIT_OUTPUT,
        };
        CliError { code, message: e.to_string() }
    }
}
