//! Splitting the positive training set into a reference set and noise.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{SparseVec, UnitVector};

use super::distance::angular_distance;

/// One labeled positive item.
#[derive(Debug, Clone, Copy)]
pub struct TrainingMember<'a> {
    pub item_id: u32,
    pub vector: Option<&'a UnitVector>,
    pub tag_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberRole {
    NonNoise,
    /// Farther from the center than the third quartile.
    Far,
    TooFewTags,
    /// Both far and short of tags.
    FarAndTooFewTags,
    ZeroVector,
}

impl MemberRole {
    pub fn is_noise(self) -> bool {
        self != MemberRole::NonNoise
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MemberRole::NonNoise => "non_noise",
            MemberRole::Far => "far",
            MemberRole::TooFewTags => "too_few_tags",
            MemberRole::FarAndTooFewTags => "far_and_too_few_tags",
            MemberRole::ZeroVector => "zero_vector",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPartition {
    /// All training ids, ascending.
    pub training: Vec<u32>,
    pub non_noise: Vec<u32>,
    pub noise: Vec<u32>,
    pub center: UnitVector,
    pub q3: f64,
    /// `(item_id, distance to center, role)` for every member, ascending by id.
    pub members: Vec<(u32, Option<f64>, MemberRole)>,
}

impl TrainingPartition {
    /// Assembles a partition from explicit sets, e.g. for synthetic checks.
    pub fn from_sets(non_noise: Vec<u32>, noise: Vec<u32>, center: UnitVector) -> Self {
        let mut members: Vec<(u32, Option<f64>, MemberRole)> = non_noise
            .iter()
            .map(|&i| (i, None, MemberRole::NonNoise))
            .chain(noise.iter().map(|&i| (i, None, MemberRole::Far)))
            .collect();
        members.sort_by_key(|m| m.0);
        let mut non_noise = non_noise;
        let mut noise = noise;
        non_noise.sort_unstable();
        noise.sort_unstable();
        TrainingPartition {
            training: members.iter().map(|m| m.0).collect(),
            non_noise,
            noise,
            center,
            q3: f64::NAN,
            members,
        }
    }
}

/// Quantile by linear interpolation between order statistics: position
/// `1 + p(n - 1)` in the sorted sample (1-based).
pub fn quantile_linear(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Marks as noise every member farther from the normalized center than the
/// third quartile of center distances, and every member with fewer than
/// `min_tags` tags. The center and the quartile use all members that have a
/// nonzero vector.
pub fn split_noise(members: &[TrainingMember], min_tags: usize) -> Result<TrainingPartition> {
    if members.len() < 4 {
        return Err(Error::Data(format!(
            "training set has {} members, at least 4 are needed",
            members.len()
        )));
    }
    let mut members: Vec<TrainingMember> = members.to_vec();
    members.sort_by_key(|m| m.item_id);
    if members.windows(2).any(|w| w[0].item_id == w[1].item_id) {
        return Err(Error::Contract("duplicate training member".into()));
    }

    let with_vectors: Vec<&UnitVector> = members.iter().filter_map(|m| m.vector).collect();
    if with_vectors.is_empty() {
        return Err(Error::Data("no training member has a nonzero feature vector".into()));
    }
    let mut sum: BTreeMap<u32, f64> = BTreeMap::new();
    for v in &with_vectors {
        for (g, x) in v.as_sparse().iter() {
            *sum.entry(g).or_default() += x;
        }
    }
    let count = with_vectors.len() as f64;
    let mean = SparseVec::from_sorted(sum.into_iter().map(|(g, x)| (g, x / count)))?;
    let center = UnitVector::normalize(&mean).expect("mean of nonnegative unit vectors is nonzero");

    let distances: Vec<Option<f64>> = members
        .iter()
        .map(|m| m.vector.map(|v| angular_distance(v, &center)))
        .collect();
    let mut sorted: Vec<f64> = distances.iter().flatten().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let q3 = quantile_linear(&sorted, 0.75);

    let mut out = Vec::with_capacity(members.len());
    let (mut non_noise, mut noise) = (Vec::new(), Vec::new());
    for (m, d) in members.iter().zip(&distances) {
        let few = m.tag_count < min_tags;
        let role = match d {
            None => MemberRole::ZeroVector,
            Some(d) if *d > q3 && few => MemberRole::FarAndTooFewTags,
            Some(d) if *d > q3 => MemberRole::Far,
            Some(_) if few => MemberRole::TooFewTags,
            Some(_) => MemberRole::NonNoise,
        };
        if role.is_noise() {
            noise.push(m.item_id);
        } else {
            non_noise.push(m.item_id);
        }
        out.push((m.item_id, *d, role));
    }
    if non_noise.is_empty() {
        return Err(Error::Data(format!(
            "every one of the {} training members was classified as noise (q3 = {q3})",
            members.len()
        )));
    }
    log::info!(
        "training set: {} members, {} non-noise, {} noise (q3 = {q3:.6})",
        members.len(),
        non_noise.len(),
        noise.len()
    );
    Ok(TrainingPartition {
        training: members.iter().map(|m| m.item_id).collect(),
        non_noise,
        noise,
        center,
        q3,
        members: out,
    })
}
