//! Grouping tags by co-occurrence.
//!
//! Each tag points at its most similar tag(s); the weakly connected pieces of
//! that graph are symmetrized and split by modularity maximization. The
//! resulting groups are the feature dimensions used downstream.

pub mod graph;
pub mod modularity;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalize::FilmTagMatrix;

pub use graph::{build_strong_graph, tag_cosine, weak_components, DirectedEdge, TagGraph};
pub use modularity::{WeightedGraph, DEFAULT_EXACT_LIMIT};

/// A partition of tags into groups. Group ids are dense; groups are ordered by
/// component (smallest tag first) and within a component by smallest member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagGrouping {
    group_of: Vec<u32>,
    members: Vec<Vec<u32>>,
}

impl TagGrouping {
    /// Builds a grouping from a per-tag group id assignment.
    pub fn from_assignment(group_of: Vec<u32>) -> Result<Self> {
        let n_groups = group_of.iter().map(|&g| g as usize + 1).max().unwrap_or(0);
        let mut members = vec![Vec::new(); n_groups];
        for (t, &g) in group_of.iter().enumerate() {
            members[g as usize].push(t as u32);
        }
        if let Some(g) = members.iter().position(Vec::is_empty) {
            return Err(Error::Contract(format!("group {g} has no members")));
        }
        Ok(TagGrouping { group_of, members })
    }

    /// Each tag forms its own group.
    pub fn identity(n_tags: usize) -> Self {
        TagGrouping {
            group_of: (0..n_tags as u32).collect(),
            members: (0..n_tags as u32).map(|t| vec![t]).collect(),
        }
    }

    pub fn n_groups(&self) -> usize {
        self.members.len()
    }

    pub fn n_tags(&self) -> usize {
        self.group_of.len()
    }

    pub fn group_of(&self, tag: u32) -> u32 {
        self.group_of[tag as usize]
    }

    pub fn assignment(&self) -> &[u32] {
        &self.group_of
    }

    pub fn members(&self, group: u32) -> &[u32] {
        &self.members[group as usize]
    }

    pub fn groups(&self) -> &[Vec<u32>] {
        &self.members
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub n_tags: usize,
    pub n_edges: usize,
    pub n_components: usize,
    pub largest_component: usize,
    pub components_solved_exactly: usize,
    pub n_groups: usize,
    pub smallest_group: usize,
    pub largest_group: usize,
}

#[derive(Debug, Clone)]
pub struct Clustering {
    pub graph: TagGraph,
    pub components: Vec<Vec<u32>>,
    pub grouping: TagGrouping,
    pub stats: ClusterStats,
}

/// Splits one weakly connected component into groups of global tag ids.
pub fn partition_component(graph: &TagGraph, component: &[u32], exact_limit: usize) -> Vec<Vec<u32>> {
    let local = graph.undirected(component);
    modularity::partition(&local, exact_limit)
        .into_iter()
        .map(|g| g.into_iter().map(|i| component[i]).collect())
        .collect()
}

/// Runs the whole clustering stage on a film-tag matrix.
pub fn cluster_tags(matrix: &FilmTagMatrix, exact_limit: usize) -> Clustering {
    let graph = build_strong_graph(matrix);
    let components = weak_components(&graph);
    let per_component: Vec<Vec<Vec<u32>>> = components
        .par_iter()
        .map(|c| partition_component(&graph, c, exact_limit))
        .collect();

    let mut group_of = vec![0u32; matrix.n_tags()];
    let mut next = 0u32;
    for groups in &per_component {
        for g in groups {
            for &t in g {
                group_of[t as usize] = next;
            }
            next += 1;
        }
    }
    let grouping = TagGrouping::from_assignment(group_of).expect("every tag lies in one component");
    let sizes = grouping.groups().iter().map(Vec::len);
    let stats = ClusterStats {
        n_tags: matrix.n_tags(),
        n_edges: graph.edges().len(),
        n_components: components.len(),
        largest_component: components.iter().map(Vec::len).max().unwrap_or(0),
        components_solved_exactly: components.iter().filter(|c| c.len() <= exact_limit).count(),
        n_groups: grouping.n_groups(),
        smallest_group: sizes.clone().min().unwrap_or(0),
        largest_group: sizes.max().unwrap_or(0),
    };
    log::info!(
        "tag graph: {} edges, {} components (largest {}); M = {} groups of size {}..={}",
        stats.n_edges,
        stats.n_components,
        stats.largest_component,
        stats.n_groups,
        stats.smallest_group,
        stats.largest_group
    );
    Clustering {
        graph,
        components,
        grouping,
        stats,
    }
}
