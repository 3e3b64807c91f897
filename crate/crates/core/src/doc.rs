//! JSON documents for task sets and scripted assignments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SchedError};
use crate::partition::FitStrategy;
use crate::task::{SporadicTask, TaskId, TaskRecord, TaskSet};

pub const DOCUMENT_VERSION: &str = "1";

/// On-disk task set: rationals as `"p/q"` or decimal strings, `"inf"` for
/// tasks without a period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSetDocument {
    pub version: String,
    pub tasks: Vec<TaskRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

impl TaskSetDocument {
    pub fn new(ts: &TaskSet, m: Option<usize>) -> Self {
        TaskSetDocument {
            version: DOCUMENT_VERSION.to_string(),
            tasks: ts.iter().cloned().map(TaskRecord::from).collect(),
            m,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TaskSetDocument =
            serde_json::from_str(text).map_err(|e| SchedError::Parse(e.to_string()))?;
        if doc.version != DOCUMENT_VERSION {
            return Err(SchedError::Parse(format!(
                "unsupported document version {:?}",
                doc.version
            )));
        }
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }

    /// Parses every record and admits the set.
    pub fn to_task_set(&self) -> Result<TaskSet> {
        let tasks = self
            .tasks
            .iter()
            .cloned()
            .map(SporadicTask::try_from)
            .collect::<Result<Vec<_>>>()?;
        TaskSet::new(tasks)
    }
}

/// Scripted assignment file: `{"<task id>": <processor>, ...}`.
pub fn parse_script(text: &str) -> Result<FitStrategy> {
    let assignment: BTreeMap<TaskId, usize> =
        serde_json::from_str(text).map_err(|e| SchedError::Parse(format!("script: {e}")))?;
    Ok(FitStrategy::Scripted { assignment })
}

pub fn script_to_json(fit: &FitStrategy) -> Option<String> {
    match fit {
        FitStrategy::Scripted { assignment } => {
            Some(serde_json::to_string_pretty(assignment).expect("maps always serialize"))
        }
        _ => None,
    }
}
