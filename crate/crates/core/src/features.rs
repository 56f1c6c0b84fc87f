//! Tag-group frequencies and TgFIFF feature weights.
//!
//! `λ[n][m]` counts the tags of group `m` on film `n`; the weight of that entry
//! is `λ · ln(N / FmF(m))` where `FmF(m)` is the number of films carrying the
//! group at all.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cluster::TagGrouping;
use crate::error::{Error, Result};
use crate::normalize::FilmTagMatrix;
use crate::sparse::{SparseVec, UnitVector};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupFrequencyMatrix {
    film_ids: Vec<u32>,
    n_groups: usize,
    rows: Vec<Vec<(u32, u32)>>,
    film_frequency: Vec<u32>,
}

impl GroupFrequencyMatrix {
    pub fn n_films(&self) -> usize {
        self.film_ids.len()
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn film_ids(&self) -> &[u32] {
        &self.film_ids
    }

    /// `(group, λ)` pairs of row `i`, ascending by group, λ > 0.
    pub fn row(&self, i: usize) -> &[(u32, u32)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, group: u32) -> u32 {
        self.rows[i]
            .binary_search_by_key(&group, |&(g, _)| g)
            .map_or(0, |k| self.rows[i][k].1)
    }

    pub fn film_frequency(&self) -> &[u32] {
        &self.film_frequency
    }
}

/// Λ = ΓΨ computed row by row.
pub fn group_frequency(matrix: &FilmTagMatrix, grouping: &TagGrouping) -> Result<GroupFrequencyMatrix> {
    if grouping.n_tags() != matrix.n_tags() {
        return Err(Error::Contract(format!(
            "grouping covers {} tags but the matrix has {}",
            grouping.n_tags(),
            matrix.n_tags()
        )));
    }
    let n_groups = grouping.n_groups();
    let mut film_frequency = vec![0u32; n_groups];
    let rows: Vec<Vec<(u32, u32)>> = matrix
        .rows()
        .iter()
        .map(|row| {
            let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
            for &t in row {
                *counts.entry(grouping.group_of(t)).or_default() += 1;
            }
            for &g in counts.keys() {
                film_frequency[g as usize] += 1;
            }
            counts.into_iter().collect()
        })
        .collect();
    Ok(GroupFrequencyMatrix {
        film_ids: matrix.film_ids().to_vec(),
        n_groups,
        rows,
        film_frequency,
    })
}

/// Inverse film frequency `ln(n_films / film_frequency)`.
pub fn ifmf(film_frequency: u32, n_films: usize) -> Result<f64> {
    if film_frequency == 0 || film_frequency as usize > n_films {
        return Err(Error::Contract(format!(
            "film frequency {film_frequency} outside 1..={n_films}"
        )));
    }
    Ok((n_films as f64 / film_frequency as f64).ln())
}

/// Film-by-group TgFIFF weights. Only positive weights are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    film_ids: Vec<u32>,
    n_groups: usize,
    rows: Vec<SparseVec>,
    /// Groups carried by every film, whose weight is identically zero.
    uninformative_groups: Vec<u32>,
}

impl FeatureMatrix {
    pub fn from_rows(film_ids: Vec<u32>, n_groups: usize, rows: Vec<SparseVec>) -> Result<Self> {
        if film_ids.len() != rows.len() {
            return Err(Error::Contract("film id and row counts differ".into()));
        }
        for (id, r) in film_ids.iter().zip(&rows) {
            if r.values().iter().any(|&v| v < 0.0) {
                return Err(Error::Contract(format!("film {id} has a negative weight")));
            }
            if r.indices().last().is_some_and(|&g| g as usize >= n_groups) {
                return Err(Error::Contract(format!("film {id} references a missing group")));
            }
        }
        Ok(FeatureMatrix {
            film_ids,
            n_groups,
            rows,
            uninformative_groups: Vec::new(),
        })
    }

    pub fn n_films(&self) -> usize {
        self.film_ids.len()
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn film_ids(&self) -> &[u32] {
        &self.film_ids
    }

    pub fn row(&self, i: usize) -> &SparseVec {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[SparseVec] {
        &self.rows
    }

    pub fn norms(&self) -> Vec<f64> {
        self.rows.iter().map(SparseVec::norm).collect()
    }

    pub fn uninformative_groups(&self) -> &[u32] {
        &self.uninformative_groups
    }

    /// Iterates `(item_id, group, weight)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.film_ids
            .iter()
            .zip(&self.rows)
            .flat_map(|(&id, r)| r.iter().map(move |(g, w)| (id, g, w)))
    }
}

/// φ = λ · IFmF for every nonzero λ.
pub fn tgfiff(lambda: &GroupFrequencyMatrix) -> Result<FeatureMatrix> {
    let n = lambda.n_films();
    let weights: Vec<f64> = lambda
        .film_frequency
        .iter()
        .map(|&f| ifmf(f, n))
        .collect::<Result<_>>()?;
    let uninformative_groups: Vec<u32> = weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w == 0.0)
        .map(|(g, _)| g as u32)
        .collect();
    if !uninformative_groups.is_empty() {
        log::warn!(
            "{} tag group(s) appear on every film and carry zero weight",
            uninformative_groups.len()
        );
    }
    let rows = lambda
        .rows
        .iter()
        .map(|row| SparseVec::from_sorted(row.iter().map(|&(g, l)| (g, l as f64 * weights[g as usize]))))
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMatrix {
        film_ids: lambda.film_ids.clone(),
        n_groups: lambda.n_groups,
        rows,
        uninformative_groups,
    })
}

/// Unit-length rows; films whose weights are all zero map to `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFeatures {
    film_ids: Vec<u32>,
    rows: Vec<Option<UnitVector>>,
}

impl NormalizedFeatures {
    pub fn film_ids(&self) -> &[u32] {
        &self.film_ids
    }

    pub fn row(&self, i: usize) -> Option<&UnitVector> {
        self.rows[i].as_ref()
    }

    pub fn by_item(&self, item_id: u32) -> Option<Option<&UnitVector>> {
        self.film_ids
            .binary_search(&item_id)
            .ok()
            .map(|i| self.rows[i].as_ref())
    }

    pub fn zero_rows(&self) -> Vec<u32> {
        self.film_ids
            .iter()
            .zip(&self.rows)
            .filter(|(_, r)| r.is_none())
            .map(|(&id, _)| id)
            .collect()
    }
}

pub fn unit_normalize(features: &FeatureMatrix) -> NormalizedFeatures {
    let rows: Vec<Option<UnitVector>> = features.rows.iter().map(UnitVector::normalize).collect();
    let zeros = rows.iter().filter(|r| r.is_none()).count();
    if zeros > 0 {
        log::warn!("{zeros} film(s) have an all-zero feature vector and are excluded");
    }
    NormalizedFeatures {
        film_ids: features.film_ids.clone(),
        rows,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub n_films: usize,
    pub n_groups: usize,
    pub nonzero_weights: usize,
    pub uninformative_groups: usize,
    pub zero_rows: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::TagInfo;
    use proptest::prelude::*;

    fn matrix(n_tags: usize, rows: Vec<Vec<u32>>) -> FilmTagMatrix {
        let tags = (0..n_tags)
            .map(|i| TagInfo {
                stem: format!("t{i:02}"),
                label: format!("t{i:02}"),
                user_count: 0,
                film_count: 0,
            })
            .collect();
        let ids = (0..rows.len() as u32).collect();
        FilmTagMatrix::from_parts(ids, tags, rows).unwrap()
    }

    #[test]
    fn ifmf_reproduces_worked_example() {
        let n = 34_412;
        assert!((ifmf(1_533, n).unwrap() - 3.1112).abs() < 1e-3);
        assert!((2.0 * ifmf(1_533, n).unwrap() - 6.222).abs() < 1e-3);
        assert!((ifmf(11, n).unwrap() - 8.048).abs() < 1e-3);
        assert_eq!(ifmf(n as u32, n).unwrap(), 0.0);
        assert_eq!(ifmf(0, n).unwrap_err().exit_code(), 4);
        assert!(ifmf(n as u32 + 1, n).is_err());
    }

    #[test]
    fn identity_grouping_reproduces_gamma() {
        let m = matrix(4, vec![vec![0, 2], vec![1], vec![0, 1, 3]]);
        let l = group_frequency(&m, &TagGrouping::identity(4)).unwrap();
        for (i, row) in m.rows().iter().enumerate() {
            let got: Vec<u32> = l.row(i).iter().map(|&(g, _)| g).collect();
            assert_eq!(&got, row);
            assert!(l.row(i).iter().all(|&(_, v)| v == 1));
        }
    }

    #[test]
    fn grouped_tags_add_up() {
        // "based on a book" and "adapted from a book" in one group -> λ = 2.
        let m = matrix(2, vec![vec![0, 1]]);
        let g = TagGrouping::from_assignment(vec![0, 0]).unwrap();
        assert_eq!(group_frequency(&m, &g).unwrap().row(0), &[(0, 2)]);
    }

    #[test]
    fn three_by_four_fixture() {
        // tags {0,1} -> group 0, tags {2,3} -> group 1
        //   film 0: tags 0,1,2   -> λ = (2, 1)
        //   film 1: tags 3       -> λ = (0, 1)
        //   film 2: tags 0,2,3   -> λ = (1, 2)
        let m = matrix(4, vec![vec![0, 1, 2], vec![3], vec![0, 2, 3]]);
        let g = TagGrouping::from_assignment(vec![0, 0, 1, 1]).unwrap();
        let l = group_frequency(&m, &g).unwrap();
        assert_eq!(l.row(0), &[(0, 2), (1, 1)]);
        assert_eq!(l.row(1), &[(1, 1)]);
        assert_eq!(l.row(2), &[(0, 1), (1, 2)]);
        assert_eq!(l.film_frequency(), &[2, 3]);

        // Group 1 is on every film, so only group 0 carries weight ln(3/2).
        let phi = tgfiff(&l).unwrap();
        let w = (3.0f64 / 2.0).ln();
        assert_eq!(phi.row(0).iter().collect::<Vec<_>>(), vec![(0, 2.0 * w)]);
        assert!(phi.row(1).is_zero());
        assert_eq!(phi.row(2).iter().collect::<Vec<_>>(), vec![(0, w)]);
        assert_eq!(phi.uninformative_groups(), &[1]);

        let unit = unit_normalize(&phi);
        assert_eq!(unit.zero_rows(), vec![1]);
        assert_eq!(unit.row(0).unwrap().as_sparse().values(), &[1.0]);
    }

    #[test]
    fn mismatched_grouping_is_a_contract_violation() {
        let m = matrix(2, vec![vec![0, 1]]);
        assert!(group_frequency(&m, &TagGrouping::identity(3)).is_err());
    }

    /// Naive triple-loop Γ·Ψ over dense matrices.
    fn naive_product(gamma: &[Vec<u8>], psi: &[Vec<u8>]) -> Vec<Vec<u32>> {
        let n = gamma.len();
        let l = psi.len();
        let m = psi.first().map_or(0, Vec::len);
        let mut out = vec![vec![0u32; m]; n];
        for i in 0..n {
            for k in 0..m {
                for j in 0..l {
                    out[i][k] += gamma[i][j] as u32 * psi[j][k] as u32;
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn lambda_matches_naive_product(
            n_tags in 1usize..50,
            n_films in 1usize..50,
            seed_rows in proptest::collection::vec(proptest::collection::vec(0usize..50, 1..10), 50),
            assignment_seed in proptest::collection::vec(0usize..50, 50),
        ) {
            let rows: Vec<Vec<u32>> = seed_rows[..n_films]
                .iter()
                .map(|r| {
                    let mut v: Vec<u32> = r.iter().map(|&t| (t % n_tags) as u32).collect();
                    v.sort_unstable();
                    v.dedup();
                    v
                })
                .collect();
            // Every tag of a real matrix occurs on some film.
            let mut rows = rows;
            for t in 0..n_tags as u32 {
                if !rows.iter().any(|r| r.contains(&t)) {
                    let r = &mut rows[t as usize % n_films];
                    r.push(t);
                    r.sort_unstable();
                }
            }
            // Relabel group ids densely.
            let raw: Vec<usize> = assignment_seed[..n_tags].iter().map(|a| a % n_tags).collect();
            let mut seen = BTreeMap::new();
            let group_of: Vec<u32> = raw
                .iter()
                .map(|a| {
                    let next = seen.len() as u32;
                    *seen.entry(*a).or_insert(next)
                })
                .collect();
            let grouping = TagGrouping::from_assignment(group_of.clone()).unwrap();
            let m = matrix(n_tags, rows.clone());
            let l = group_frequency(&m, &grouping).unwrap();

            let gamma: Vec<Vec<u8>> = rows
                .iter()
                .map(|r| (0..n_tags as u32).map(|t| r.contains(&t) as u8).collect())
                .collect();
            let psi: Vec<Vec<u8>> = group_of
                .iter()
                .map(|&g| (0..grouping.n_groups() as u32).map(|k| (k == g) as u8).collect())
                .collect();
            let expected = naive_product(&gamma, &psi);
            for i in 0..n_films {
                for k in 0..grouping.n_groups() {
                    prop_assert_eq!(l.get(i, k as u32), expected[i][k]);
                }
            }
            let phi = tgfiff(&l).unwrap();
            for i in 0..n_films {
                // support(Φ) = support(Λ) minus groups present on every film
                let expect: Vec<u32> = l
                    .row(i)
                    .iter()
                    .filter(|&&(g, _)| l.film_frequency()[g as usize] < n_films as u32)
                    .map(|&(g, _)| g)
                    .collect();
                prop_assert_eq!(phi.row(i).indices(), &expect[..]);
            }
        }

        #[test]
        fn normalized_rows_have_unit_norm(
            entries in proptest::collection::btree_map(0u32..40, 0.001f64..100.0, 1..12),
            scale in 0.01f64..1000.0,
        ) {
            let v = SparseVec::from_sorted(entries.into_iter()).unwrap();
            let u = UnitVector::normalize(&v).unwrap();
            prop_assert!((u.as_sparse().norm() - 1.0).abs() < 1e-12);
            let scaled = UnitVector::normalize(&v.scale(scale)).unwrap();
            for (a, b) in u.as_sparse().values().iter().zip(scaled.as_sparse().values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let again = UnitVector::normalize(u.as_sparse()).unwrap();
            for (a, b) in u.as_sparse().values().iter().zip(again.as_sparse().values()) {
                prop_assert!((a - b).abs() < 1e-15);
            }
        }
    }
}
