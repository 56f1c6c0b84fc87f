mod common;

use proptest::prelude::*;

use tagclass::knn::{
    angular_distance, classify, quantile_linear, split_noise, MemberRole, Probe, ReferenceSet, ThresholdVector,
    TrainingMember,
};
use tagclass::sparse::{SparseVec, UnitVector};

fn unit_vectors(max_len: usize) -> impl Strategy<Value = Vec<UnitVector>> {
    prop::collection::vec(prop::collection::btree_map(0u32..12, 0.05f64..1.0, 1..5), 4..max_len).prop_map(|maps| {
        maps.into_iter()
            .map(|m| UnitVector::normalize(&SparseVec::from_sorted(m).unwrap()).unwrap())
            .collect()
    })
}

fn thresholds() -> impl Strategy<Value = (ThresholdVector, ThresholdVector)> {
    (50u32..200, prop::collection::vec(5u32..=50, 3), 0u32..40, prop::collection::vec(0u32..10, 3)).prop_map(
        |(r, mut d, dr, dd)| {
            d.sort_unstable();
            let tight = ThresholdVector::new(r as f64 / 100.0, d.iter().map(|&x| x as f64 / 100.0).collect()).unwrap();
            let mut loose_d: Vec<f64> = d.iter().zip(&dd).map(|(&x, &e)| ((x + e).min(50)) as f64 / 100.0).collect();
            for k in 1..loose_d.len() {
                loose_d[k] = loose_d[k].max(loose_d[k - 1]);
            }
            let loose = ThresholdVector::new((r + dr) as f64 / 100.0, loose_d).unwrap();
            (tight, loose)
        },
    )
}

/// Normalized mean of the given unit vectors.
fn center_of(vs: &[&UnitVector]) -> UnitVector {
    let mut sum = std::collections::BTreeMap::new();
    for v in vs {
        for (g, x) in v.as_sparse().iter() {
            *sum.entry(g).or_insert(0.0) += x;
        }
    }
    let n = vs.len() as f64;
    UnitVector::normalize(&SparseVec::from_sorted(sum.into_iter().map(|(g, x)| (g, x / n))).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn loosening_thresholds_never_rejects_an_accepted_item(
        vs in unit_vectors(40),
        (tight, loose) in thresholds(),
        split in 4usize..20,
    ) {
        let split = split.min(vs.len() - 1).max(4);
        prop_assume!(split < vs.len());
        let reference: Vec<(u32, &UnitVector)> = vs[..split].iter().enumerate().map(|(i, v)| (i as u32, v)).collect();
        let set = ReferenceSet::new(reference, 3).unwrap();
        for (k, v) in vs[split..].iter().enumerate() {
            let probe = Probe { item_id: 1000 + k as u32, vector: Some(v), tag_count: 5 };
            let a = classify(&probe, &set, &tight, 5);
            let b = classify(&probe, &set, &loose, 5);
            prop_assert!(!a.accepted || b.accepted, "accepted under {} but not {}", tight, loose);
        }
    }

    #[test]
    fn noise_split_is_a_partition_obeying_both_rules(
        vs in unit_vectors(60),
        tags in prop::collection::vec(1usize..10, 60),
        zero_every in 0usize..7,
        min_tags in 1usize..8,
    ) {
        let members: Vec<TrainingMember> = vs
            .iter()
            .enumerate()
            .map(|(i, v)| TrainingMember {
                item_id: (i * 3) as u32,
                vector: if zero_every > 0 && i % zero_every == 1 { None } else { Some(v) },
                tag_count: tags[i],
            })
            .collect();
        let with_vectors: Vec<&UnitVector> = members.iter().filter_map(|m| m.vector).collect();
        prop_assume!(!with_vectors.is_empty());
        let center = center_of(&with_vectors);
        let distances: Vec<f64> = with_vectors.iter().map(|v| angular_distance(v, &center)).collect();
        let mut sorted = distances.clone();
        sorted.sort_by(f64::total_cmp);
        let q3 = quantile_linear(&sorted, 0.75);
        let kept = members
            .iter()
            .filter(|m| m.tag_count >= min_tags && m.vector.is_some_and(|v| angular_distance(v, &center) <= q3))
            .count();

        let p = match split_noise(&members, min_tags) {
            Ok(p) => p,
            Err(e) => {
                // Refused only when nothing would be left for the reference set.
                prop_assert_eq!(kept, 0, "{}", e);
                return Ok(());
            }
        };
        prop_assert_eq!(p.non_noise.len(), kept);
        prop_assert!((p.q3 - q3).abs() < 1e-12);

        let mut all: Vec<u32> = p.non_noise.iter().chain(&p.noise).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(&all, &p.training);
        prop_assert_eq!(p.training.len(), members.len());

        let mut far = 0;
        for (m, &(id, d, role)) in members.iter().zip(&p.members) {
            prop_assert_eq!(m.item_id, id);
            let is_far = d.is_some_and(|d| d > p.q3);
            far += is_far as usize;
            let expected = match (m.vector, is_far, m.tag_count < min_tags) {
                (None, _, _) => MemberRole::ZeroVector,
                (_, true, true) => MemberRole::FarAndTooFewTags,
                (_, true, false) => MemberRole::Far,
                (_, false, true) => MemberRole::TooFewTags,
                (_, false, false) => MemberRole::NonNoise,
            };
            prop_assert_eq!(role, expected);
        }
        // Only order statistics above position 0.75(n-1) can exceed the quartile.
        prop_assert!(far <= (distances.len() - 1).div_ceil(4));
    }
}
