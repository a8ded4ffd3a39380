pub mod common;
pub mod decode;
pub mod encode;
pub mod eval;
pub mod fit_fixture;
pub mod gradcheck;
pub mod import;
pub mod infer;
pub mod selftest;

/// Failure classification driving the process exit code: user-input
/// problems exit 2, internal errors and failed checks exit 1.
#[derive(Debug)]
pub enum Failure {
    User(String),
    Internal(String),
}

impl From<graspkit::Error> for Failure {
    fn from(e: graspkit::Error) -> Self {
        Failure::User(e.to_string())
    }
}

pub type CmdResult = Result<(), Failure>;
