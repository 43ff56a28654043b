use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::config::ServiceConfig;

/// Per-annotator document lists and completion marks. Both members of a
/// group get the same list.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TaskQueue {
    pub assignments: BTreeMap<String, Vec<String>>,
    pub completed: BTreeSet<(String, String)>,
}

impl TaskQueue {
    pub fn from_config<'a>(config: &ServiceConfig, all_docs: impl IntoIterator<Item = &'a String>) -> Self {
        let all: Vec<String> = all_docs.into_iter().cloned().collect();
        let mut assignments = BTreeMap::new();
        for g in config.groups.values() {
            let docs = g.docs.clone().unwrap_or_else(|| all.clone());
            for a in &g.annotators {
                assignments.insert(a.clone(), docs.clone());
            }
        }
        TaskQueue { assignments, completed: BTreeSet::new() }
    }

    pub fn is_registered(&self, annotator: &str) -> bool {
        self.assignments.contains_key(annotator)
    }

    pub fn is_assigned(&self, annotator: &str, doc_id: &str) -> bool {
        self.assignments.get(annotator).map_or(false, |ds| ds.iter().any(|d| d == doc_id))
    }

    /// Position and id of the first uncompleted document, in list order.
    pub fn next(&self, annotator: &str) -> Option<(usize, &str)> {
        self.assignments.get(annotator)?.iter().enumerate().find_map(|(i, d)| {
            (!self.completed.contains(&(annotator.to_string(), d.clone()))).then_some((i, d.as_str()))
        })
    }

    pub fn complete(&mut self, annotator: &str, doc_id: &str) {
        self.completed.insert((annotator.to_string(), doc_id.to_string()));
    }

    pub fn completed_by(&self, annotator: &str) -> BTreeSet<&str> {
        self.completed.iter().filter(|(a, _)| a == annotator).map(|(_, d)| d.as_str()).collect()
    }
}
