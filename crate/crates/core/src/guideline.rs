//! Normative guideline knowledge graph and path enumeration.
//!
//! The guideline graph is loaded from a JSON file with declared entry
//! roots. Candidate treatment workflows are all simple paths from a root to
//! a sink (no outgoing edges), capped by depth and count so enumeration
//! stays total on cyclic inputs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GuidelineError {
    #[error("malformed guideline file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("guideline validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("guideline has no declared roots; add entry step ids to the \"roots\" array")]
    NoRoots,
    #[error("enumeration limits out of range: max_depth and max_paths must be >= 1")]
    LimitsOutOfRange,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Cancer,
    ClinicalSituation,
    Treatment,
    #[serde(alias = "other")]
    Other,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GuidelineNode {
    pub id: String,
    pub kind: NodeKind,
    pub desc: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GuidelineEdge {
    pub src: String,
    pub dst: String,
    pub rel: String,
}

/// Validated guideline graph with declared entry roots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GuidelineKG {
    pub nodes: Vec<GuidelineNode>,
    pub edges: Vec<GuidelineEdge>,
    pub roots: Vec<String>,
}

impl GuidelineKG {
    pub fn from_json_str(json: &str) -> Result<Self, GuidelineError> {
        let graph: GuidelineKG = serde_json::from_str(json)?;
        graph.validate()?;
        Ok(graph)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, GuidelineError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), GuidelineError> {
        let mut issues = Vec::new();
        if self.nodes.is_empty() {
            issues.push("node set is empty".to_string());
        }
        let mut ids = BTreeSet::new();
        for node in &self.nodes {
            if !ids.insert(node.id.as_str()) {
                issues.push(format!("duplicate node id {:?}", node.id));
            }
            if node.desc.trim().is_empty() {
                issues.push(format!("node {:?} has an empty desc", node.id));
            }
        }
        for edge in &self.edges {
            for end in [&edge.src, &edge.dst] {
                if !ids.contains(end.as_str()) {
                    issues.push(format!(
                        "edge {:?} -> {:?} ({:?}) references unknown node {:?}",
                        edge.src, edge.dst, edge.rel, end
                    ));
                }
            }
        }
        for root in &self.roots {
            if !ids.contains(root.as_str()) {
                issues.push(format!("root {root:?} is not a declared node"));
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(GuidelineError::Validation(issues))
        }
    }

    pub fn node(&self, id: &str) -> Option<&GuidelineNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Description of a step id, if the node exists.
    pub fn desc(&self, id: &str) -> Option<&str> {
        self.node(id).map(|n| n.desc.as_str())
    }
}

/// One enumerated root-to-sink workflow through the guideline graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuidelinePath {
    pub path_id: String,
    pub steps: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct PathEnumeration {
    pub paths: Vec<GuidelinePath>,
    pub truncated: bool,
}

/// Enumerate all simple root-to-sink paths with at most `max_depth` steps,
/// in lexicographic order of their step-id sequences, truncated to
/// `max_paths` (with a flag when truncation happened).
pub fn enumerate_paths(
    graph: &GuidelineKG,
    max_depth: usize,
    max_paths: usize,
) -> Result<PathEnumeration, GuidelineError> {
    if max_depth < 1 || max_paths < 1 {
        return Err(GuidelineError::LimitsOutOfRange);
    }
    if graph.roots.is_empty() {
        return Err(GuidelineError::NoRoots);
    }

    let mut adjacency: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for node in &graph.nodes {
        adjacency.entry(node.id.as_str()).or_default();
    }
    for edge in &graph.edges {
        adjacency
            .entry(edge.src.as_str())
            .or_default()
            .insert(edge.dst.as_str());
    }

    let roots: BTreeSet<&str> = graph.roots.iter().map(String::as_str).collect();
    let mut collected: Vec<Vec<String>> = Vec::new();
    let mut stack: Vec<&str> = Vec::new();
    let mut visited: BTreeSet<&str> = BTreeSet::new();

    fn dfs<'a>(
        node: &'a str,
        adjacency: &BTreeMap<&'a str, BTreeSet<&'a str>>,
        max_depth: usize,
        limit: usize,
        stack: &mut Vec<&'a str>,
        visited: &mut BTreeSet<&'a str>,
        collected: &mut Vec<Vec<String>>,
    ) {
        if collected.len() > limit {
            return;
        }
        stack.push(node);
        visited.insert(node);
        let successors = adjacency.get(node).cloned().unwrap_or_default();
        if successors.is_empty() {
            collected.push(stack.iter().map(|s| s.to_string()).collect());
        } else if stack.len() < max_depth {
            for next in successors {
                if !visited.contains(next) {
                    dfs(next, adjacency, max_depth, limit, stack, visited, collected);
                }
            }
        }
        visited.remove(node);
        stack.pop();
    }

    for root in roots {
        dfs(
            root,
            &adjacency,
            max_depth,
            max_paths,
            &mut stack,
            &mut visited,
            &mut collected,
        );
    }

    let truncated = collected.len() > max_paths;
    collected.truncate(max_paths);
    let paths = collected
        .into_iter()
        .enumerate()
        .map(|(i, steps)| GuidelinePath {
            path_id: format!("path-{i:04}"),
            steps,
        })
        .collect();
    Ok(PathEnumeration { paths, truncated })
}
