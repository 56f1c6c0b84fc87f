//! Tables built from the classification results.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::cluster::TagGrouping;
use crate::features::GroupFrequencyMatrix;
use crate::ingest::{FilmRecord, TagApplication};
use crate::normalize::{canonicalize, FilmTagMatrix, TagStemmer};

use super::artifacts::ResultRecord;

/// Tags whose presence sets the marker column of the neighbor table.
pub const MARKER_TAGS: [&str; 4] = ["noir", "film noir", "neo noir", "noir thriller"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborRow {
    pub item_id: u32,
    pub title: String,
    pub year: Option<i32>,
    pub nn1_id: Option<u32>,
    pub nn1_title: String,
    /// 1 iff the film carries one of [`MARKER_TAGS`].
    pub marker_tag: u8,
}

/// Stem keys of `phrases` with spaces removed, so space variants also match.
pub fn squashed_stems(phrases: &[&str], stemmer: &TagStemmer) -> BTreeSet<String> {
    phrases
        .iter()
        .filter_map(|p| canonicalize(p))
        .map(|c| stemmer.stem(&c).replace(' ', ""))
        .collect()
}

/// Films with at least one tag application whose stem is in `squashed`.
/// `stem_of_raw` maps raw tag text to its stem key.
pub fn films_with_stems(
    apps: &[TagApplication],
    stem_of_raw: &HashMap<String, String>,
    squashed: &BTreeSet<String>,
) -> BTreeSet<u32> {
    apps.iter()
        .filter(|a| {
            stem_of_raw
                .get(&a.raw_tag)
                .is_some_and(|s| squashed.contains(&s.replace(' ', "")))
        })
        .map(|a| a.item_id)
        .collect()
}

/// One row per accepted film, in result order.
pub fn report_neighbors(
    results: &[ResultRecord],
    films: &BTreeMap<u32, &FilmRecord>,
    marked: &BTreeSet<u32>,
) -> Vec<NeighborRow> {
    results
        .iter()
        .filter(|r| r.accepted)
        .map(|r| {
            let nn1 = r.neighbors.first().map(|n| n.item_id);
            NeighborRow {
                item_id: r.item_id,
                title: r.title.clone(),
                year: r.year,
                nn1_id: nn1,
                nn1_title: nn1
                    .and_then(|id| films.get(&id))
                    .map(|f| f.title.clone())
                    .unwrap_or_default(),
                marker_tag: marked.contains(&r.item_id) as u8,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupFrequency {
    pub group_id: u32,
    /// Labels of the tags in the group.
    pub tags: Vec<String>,
    pub frequency: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EraReport {
    pub cutoff: i32,
    pub early_films: usize,
    pub late_films: usize,
    /// Population members without a known year, left out of both eras.
    pub unknown_year: usize,
    /// Most frequent groups among films released before the cutoff.
    pub early: Vec<GroupFrequency>,
    /// Most frequent groups among films released in or after the cutoff year.
    pub late: Vec<GroupFrequency>,
    /// Most frequent late groups that never occur on an early film.
    pub late_exclusive: Vec<GroupFrequency>,
}

/// Ranks tag groups by total occurrence count (sum of λ) in each era.
///
/// `population` lists item ids; each film goes to the era of its own year.
pub fn report_era_groups(
    population: &BTreeSet<u32>,
    years: &BTreeMap<u32, Option<i32>>,
    lambda: &GroupFrequencyMatrix,
    grouping: &TagGrouping,
    matrix: &FilmTagMatrix,
    cutoff: i32,
    top_k: usize,
) -> EraReport {
    let n_groups = lambda.n_groups();
    let (mut early, mut late) = (vec![0u64; n_groups], vec![0u64; n_groups]);
    let (mut early_films, mut late_films, mut unknown_year) = (0, 0, 0);
    for (i, id) in lambda.film_ids().iter().enumerate() {
        if !population.contains(id) {
            continue;
        }
        let sums = match years.get(id).copied().flatten() {
            None => {
                unknown_year += 1;
                continue;
            }
            Some(y) if y < cutoff => {
                early_films += 1;
                &mut early
            }
            Some(_) => {
                late_films += 1;
                &mut late
            }
        };
        for &(g, count) in lambda.row(i) {
            sums[g as usize] += count as u64;
        }
    }
    let labels = |g: u32| -> Vec<String> {
        grouping
            .members(g)
            .iter()
            .map(|&t| matrix.tags()[t as usize].label.clone())
            .collect()
    };
    let ranked = |sums: &[u64], keep: &dyn Fn(usize) -> bool| -> Vec<GroupFrequency> {
        let mut order: Vec<usize> = (0..n_groups).filter(|&g| sums[g] > 0 && keep(g)).collect();
        order.sort_by(|&a, &b| sums[b].cmp(&sums[a]).then(a.cmp(&b)));
        order
            .into_iter()
            .take(top_k)
            .map(|g| GroupFrequency {
                group_id: g as u32,
                tags: labels(g as u32),
                frequency: sums[g],
            })
            .collect()
    };
    EraReport {
        cutoff,
        early_films,
        late_films,
        unknown_year,
        early: ranked(&early, &|_| true),
        late: ranked(&late, &|_| true),
        late_exclusive: ranked(&late, &|g| early[g] == 0),
    }
}
