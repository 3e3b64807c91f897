use thiserror::Error;

use crate::task::TaskId;

/// Errors raised by the analysis library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedError {
    #[error("empty task set")]
    EmptyTaskSet,

    #[error("invalid task {id}: {reason}")]
    InvalidTask { id: TaskId, reason: String },

    #[error("task {id} has density {density} > 1; no feasible partition exists")]
    DensityExceeded { id: TaskId, density: String },

    #[error("duplicate task id {0}")]
    DuplicateId(TaskId),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{test} requires {required} deadlines: {detail}")]
    DeadlineClass {
        test: &'static str,
        required: &'static str,
        detail: String,
    },

    #[error("resource cap exceeded: {what} (cap {cap})")]
    ResourceCap { what: &'static str, cap: u64 },

    #[error("script error at task {task}: {detail}")]
    Script { task: TaskId, detail: String },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = SchedError> = std::result::Result<T, E>;
