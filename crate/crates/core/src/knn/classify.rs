//! The J-nearest-neighbor mean-ratio acceptance rule.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::UnitVector;

use super::distance::{angular_distance, MAX_DISTANCE};

/// Distance bound meaning "unbounded"; larger than any attainable distance.
pub const NO_BOUND: f64 = 0.55;

/// `ratio` bounds `r(z)`; `distances[j]` bounds the distance to the `j`-th
/// nearest neighbor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVector {
    pub ratio: f64,
    pub distances: Vec<f64>,
}

impl ThresholdVector {
    pub fn new(ratio: f64, distances: Vec<f64>) -> Result<Self> {
        let t = ThresholdVector { ratio, distances };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio.is_finite()) {
            return Err(Error::Config(format!("ratio bound {} must be positive", self.ratio)));
        }
        if self.distances.is_empty() {
            return Err(Error::Config("threshold vector has no distance bounds".into()));
        }
        if self.distances.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Config(format!(
                "distance bounds {:?} must be nondecreasing",
                self.distances
            )));
        }
        for &d in &self.distances {
            if !(d > 0.0 && d <= MAX_DISTANCE) && d != NO_BOUND {
                return Err(Error::Config(format!(
                    "distance bound {d} must lie in (0, 0.5] or equal {NO_BOUND}"
                )));
            }
        }
        Ok(())
    }

    /// Parses `"1.26,0.43,0.43,0.43"`.
    pub fn parse(s: &str) -> Result<Self> {
        let values: Vec<f64> = s
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad threshold value {x:?}")))
            })
            .collect::<Result<_>>()?;
        match values.split_first() {
            Some((&ratio, rest)) => ThresholdVector::new(ratio, rest.to_vec()),
            None => Err(Error::Config("empty threshold vector".into())),
        }
    }

    /// Lexicographic comparison on `(ratio, distances...)`.
    pub fn lex_cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.ratio
            .total_cmp(&other.ratio)
            .then_with(|| {
                self.distances
                    .iter()
                    .zip(&other.distances)
                    .map(|(a, b)| a.total_cmp(b))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .then(self.distances.len().cmp(&other.distances.len()))
    }
}

impl fmt::Display for ThresholdVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.ratio)?;
        for d in &self.distances {
            write!(f, ", {d}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub item_id: u32,
    /// Distance from the probe.
    pub distance: f64,
    /// Distance from this neighbor to its own nearest neighbor in the reference set.
    pub self_distance: f64,
}

/// The reference set S with each member's nearest other member precomputed.
#[derive(Debug, Clone)]
pub struct ReferenceSet<'a> {
    ids: Vec<u32>,
    vectors: Vec<&'a UnitVector>,
    own_nearest: Vec<(u32, f64)>,
}

impl<'a> ReferenceSet<'a> {
    /// Needs at least `neighbors + 1` members so every neighbor has a neighbor
    /// of its own.
    pub fn new(mut members: Vec<(u32, &'a UnitVector)>, neighbors: usize) -> Result<Self> {
        if neighbors == 0 {
            return Err(Error::Config("neighbor count must be positive".into()));
        }
        if members.len() < neighbors + 1 {
            return Err(Error::Data(format!(
                "reference set has {} members; {} neighbors need at least {}",
                members.len(),
                neighbors,
                neighbors + 1
            )));
        }
        members.sort_by_key(|m| m.0);
        if members.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Contract("duplicate reference member".into()));
        }
        let (ids, vectors): (Vec<u32>, Vec<&UnitVector>) = members.into_iter().unzip();
        let own_nearest = (0..ids.len())
            .map(|i| {
                (0..ids.len())
                    .filter(|&k| k != i)
                    .map(|k| (ids[k], angular_distance(vectors[i], vectors[k])))
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                    .expect("at least two members")
            })
            .collect();
        Ok(ReferenceSet {
            ids,
            vectors,
            own_nearest,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// Nearest other member of the reference set for member `item_id`.
    pub fn own_nearest(&self, item_id: u32) -> Option<(u32, f64)> {
        self.ids.binary_search(&item_id).ok().map(|i| self.own_nearest[i])
    }

    /// The `count` nearest members, ascending by distance then item id.
    pub fn neighbors(&self, z: &UnitVector, count: usize) -> Vec<Neighbor> {
        let mut all: Vec<(f64, usize)> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(k, v)| (angular_distance(z, v), k))
            .collect();
        let count = count.min(all.len());
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if count < all.len() {
            all.select_nth_unstable_by(count, by_distance);
            all.truncate(count);
        }
        all.sort_by(by_distance);
        all.into_iter()
            .map(|(d, k)| Neighbor {
                item_id: self.ids[k],
                distance: d,
                self_distance: self.own_nearest[k].1,
            })
            .collect()
    }
}

/// Mean probe-neighbor distance over mean neighbor-to-own-neighbor distance.
/// A zero denominator gives `+∞`, or `0` when the numerator is zero too.
pub fn ratio(neighbors: &[Neighbor]) -> f64 {
    let j = neighbors.len() as f64;
    let num = neighbors.iter().map(|n| n.distance).sum::<f64>() / j;
    let den = neighbors.iter().map(|n| n.self_distance).sum::<f64>() / j;
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accepted,
    TooFewTags,
    ZeroVector,
    MaxDistance,
    RatioExceeded,
    DistanceExceeded,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Accepted => "accepted",
            Decision::TooFewTags => "too_few_tags",
            Decision::ZeroVector => "zero_vector",
            Decision::MaxDistance => "max_distance",
            Decision::RatioExceeded => "ratio_exceeded",
            Decision::DistanceExceeded => "distance_exceeded",
        }
    }

    pub fn parse(s: &str) -> Option<Decision> {
        [
            Decision::Accepted,
            Decision::TooFewTags,
            Decision::ZeroVector,
            Decision::MaxDistance,
            Decision::RatioExceeded,
            Decision::DistanceExceeded,
        ]
        .into_iter()
        .find(|d| d.as_str() == s)
    }
}

/// An item to classify.
#[derive(Debug, Clone, Copy)]
pub struct Probe<'a> {
    pub item_id: u32,
    pub vector: Option<&'a UnitVector>,
    pub tag_count: usize,
}

/// Everything about a probe that does not depend on the thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct Assessment {
    pub item_id: u32,
    pub tag_count: usize,
    pub neighbors: Vec<Neighbor>,
    pub ratio: Option<f64>,
    /// Set when the probe is rejected whatever the thresholds.
    pub precheck: Option<Decision>,
}

impl Assessment {
    pub fn decide(&self, theta: &ThresholdVector) -> Decision {
        if let Some(d) = self.precheck {
            return d;
        }
        let r = self.ratio.expect("ratio is present when no precheck fired");
        if r >= theta.ratio {
            return Decision::RatioExceeded;
        }
        let within = self
            .neighbors
            .iter()
            .zip(&theta.distances)
            .all(|(n, &bound)| n.distance < bound);
        if within {
            Decision::Accepted
        } else {
            Decision::DistanceExceeded
        }
    }
}

/// Finds the probe's neighbors and ratio against `reference`.
pub fn assess(probe: &Probe, reference: &ReferenceSet, neighbors: usize, min_tags: usize) -> Assessment {
    let (found, r) = match probe.vector {
        Some(z) => {
            let found = reference.neighbors(z, neighbors);
            let r = ratio(&found);
            (found, Some(r))
        }
        None => (Vec::new(), None),
    };
    let precheck = if probe.tag_count < min_tags {
        Some(Decision::TooFewTags)
    } else if probe.vector.is_none() {
        Some(Decision::ZeroVector)
    } else if found.iter().all(|n| n.distance >= MAX_DISTANCE) {
        Some(Decision::MaxDistance)
    } else {
        None
    };
    Assessment {
        item_id: probe.item_id,
        tag_count: probe.tag_count,
        neighbors: found,
        ratio: r,
        precheck,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationResult {
    pub item_id: u32,
    pub accepted: bool,
    pub tag_count: usize,
    pub neighbors: Vec<Neighbor>,
    pub ratio: Option<f64>,
    pub reason: Decision,
}

pub fn classify(
    probe: &Probe,
    reference: &ReferenceSet,
    theta: &ThresholdVector,
    min_tags: usize,
) -> ClassificationResult {
    let a = assess(probe, reference, theta.distances.len(), min_tags);
    let reason = a.decide(theta);
    ClassificationResult {
        item_id: a.item_id,
        accepted: reason == Decision::Accepted,
        tag_count: a.tag_count,
        neighbors: a.neighbors,
        ratio: a.ratio,
        reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseVec;

    fn unit(pairs: &[(u32, f64)]) -> UnitVector {
        UnitVector::normalize(&SparseVec::from_sorted(pairs.iter().copied()).unwrap()).unwrap()
    }

    fn reference_theta() -> ThresholdVector {
        ThresholdVector::new(1.26, vec![0.43, 0.43, 0.43]).unwrap()
    }

    #[test]
    fn threshold_validation() {
        assert!(ThresholdVector::new(1.0, vec![0.3, 0.2, 0.4]).is_err());
        assert!(ThresholdVector::new(0.0, vec![0.3]).is_err());
        assert!(ThresholdVector::new(1.0, vec![0.52]).is_err());
        assert!(ThresholdVector::new(1.0, vec![0.45, 0.55, 0.55]).is_ok());
        assert_eq!(ThresholdVector::parse("1.26, 0.43,0.43,0.43").unwrap(), reference_theta());
        assert_eq!(reference_theta().to_string(), "(1.26, 0.43, 0.43, 0.43)");
    }

    #[test]
    fn reference_set_needs_j_plus_one() {
        let v = unit(&[(0, 1.0)]);
        let members: Vec<_> = (0..3).map(|i| (i, &v)).collect();
        assert!(ReferenceSet::new(members.clone(), 3).is_err());
        assert!(ReferenceSet::new(members, 2).is_ok());
    }

    #[test]
    fn probe_equal_to_member_comes_first() {
        let vs = [unit(&[(0, 1.0)]), unit(&[(0, 1.0), (1, 1.0)]), unit(&[(1, 1.0)]), unit(&[(2, 1.0)])];
        let s = ReferenceSet::new(vs.iter().enumerate().map(|(i, v)| (10 + i as u32, v)).collect(), 3).unwrap();
        let n = s.neighbors(&vs[2], 3);
        assert_eq!(n[0].item_id, 12);
        assert_eq!(n[0].distance, 0.0);
        assert!(n.windows(2).all(|w| w[0].distance <= w[1].distance));
        // 10 and 13 are both at 0.5 from member 12; the smaller id wins.
        assert_eq!(n[2].item_id, 10);
    }

    fn nb(distance: f64, self_distance: f64) -> Neighbor {
        Neighbor { item_id: 0, distance, self_distance }
    }

    #[test]
    fn ratio_conventions() {
        assert_eq!(ratio(&[nb(0.1, 0.1), nb(0.1, 0.1), nb(0.1, 0.1)]), 1.0);
        let r = ratio(&[nb(0.2, 0.1), nb(0.2, 0.1), nb(0.2, 0.1)]);
        assert!((r - 2.0).abs() < 1e-12);
        assert_eq!(ratio(&[nb(0.0, 0.0), nb(0.0, 0.0), nb(0.0, 0.0)]), 0.0);
        assert_eq!(ratio(&[nb(0.1, 0.0), nb(0.0, 0.0), nb(0.0, 0.0)]), f64::INFINITY);
    }

    #[test]
    fn duplicate_member_is_accepted() {
        let v = unit(&[(0, 1.0), (1, 1.0)]);
        let s = ReferenceSet::new((0..4).map(|i| (i, &v)).collect(), 3).unwrap();
        let probe = Probe { item_id: 99, vector: Some(&v), tag_count: 6 };
        let res = classify(&probe, &s, &reference_theta(), 5);
        assert!(res.accepted);
        assert_eq!(res.ratio, Some(0.0));
        assert_eq!(res.reason, Decision::Accepted);
    }

    #[test]
    fn ratio_above_bound_is_rejected() {
        let a = Assessment {
            item_id: 1,
            tag_count: 9,
            neighbors: vec![nb(0.13, 0.1); 3],
            ratio: Some(1.3),
            precheck: None,
        };
        assert_eq!(a.decide(&reference_theta()), Decision::RatioExceeded);
        let b = Assessment { ratio: Some(1.0), neighbors: vec![nb(0.1, 0.1), nb(0.1, 0.1), nb(0.44, 0.1)], ..a };
        assert_eq!(b.decide(&reference_theta()), Decision::DistanceExceeded);
        let unbounded = ThresholdVector::new(1.26, vec![0.43, 0.43, NO_BOUND]).unwrap();
        assert_eq!(b.decide(&unbounded), Decision::Accepted);
    }

    #[test]
    fn prechecks() {
        let v = unit(&[(0, 1.0)]);
        let other = unit(&[(1, 1.0)]);
        let s = ReferenceSet::new((0..4).map(|i| (i, &v)).collect(), 3).unwrap();
        let theta = reference_theta();
        let few = Probe { item_id: 9, vector: Some(&v), tag_count: 4 };
        assert_eq!(classify(&few, &s, &theta, 5).reason, Decision::TooFewTags);
        let zero = Probe { item_id: 9, vector: None, tag_count: 8 };
        assert_eq!(classify(&zero, &s, &theta, 5).reason, Decision::ZeroVector);
        let far = Probe { item_id: 9, vector: Some(&other), tag_count: 8 };
        let res = classify(&far, &s, &theta, 5);
        assert_eq!(res.reason, Decision::MaxDistance);
        assert!(res.neighbors.iter().all(|n| n.distance == 0.5));
    }
}
