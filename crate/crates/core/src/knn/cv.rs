//! Threshold selection by repeated stratified cross-validation.
//!
//! Non-noise training members act as positives and noise members as negative
//! proxies. Every repetition splits the training set into folds, classifies
//! each fold against the non-noise members of the other folds, and records
//! the grid candidate with the best `√(TPR·TNR)`. The most frequent winner
//! over all repetitions is returned. Candidates are kept sorted
//! lexicographically, so "smallest index" is the tie rule throughout.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::UnitVector;

use super::classify::{assess, Assessment, Decision, Probe, ReferenceSet, ThresholdVector, NO_BOUND};
use super::noise::{TrainingMember, TrainingPartition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub neighbors: usize,
    pub folds: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub grid: Vec<ThresholdVector>,
    /// Run a second, finer grid around the first-stage winner.
    pub refine: bool,
    pub min_tags: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            neighbors: 3,
            folds: 5,
            repetitions: 100,
            seed: 0,
            grid: coarse_grid(3),
            refine: true,
            min_tags: 5,
        }
    }
}

/// Geometric mean of the true positive and true negative rates.
pub fn score(tpr: f64, tnr: f64) -> f64 {
    (tpr * tnr).sqrt()
}

fn hundredths(h: i64) -> f64 {
    h as f64 / 100.0
}

fn to_hundredths(x: f64) -> i64 {
    (x * 100.0).round() as i64
}

/// All nondecreasing `len`-tuples over `values` (which must be sorted).
fn nondecreasing_tuples(values: &[i64], len: usize) -> Vec<Vec<i64>> {
    fn rec(values: &[i64], start: usize, len: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for k in start..values.len() {
            cur.push(values[k]);
            rec(values, k, len, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(values, 0, len, &mut Vec::new(), &mut out);
    out
}

fn grid_from(ratios: &[i64], distances: &[i64], neighbors: usize) -> Vec<ThresholdVector> {
    let tuples = nondecreasing_tuples(distances, neighbors);
    ratios
        .iter()
        .flat_map(|&r| {
            tuples.iter().map(move |t| ThresholdVector {
                ratio: hundredths(r),
                distances: t.iter().map(|&d| hundredths(d)).collect(),
            })
        })
        .collect()
}

/// Ratio bounds 0.80, 0.85, …, 1.50 crossed with nondecreasing distance
/// bounds over 0.25, 0.30, …, 0.55 (0.55 meaning unbounded).
pub fn coarse_grid(neighbors: usize) -> Vec<ThresholdVector> {
    let ratios: Vec<i64> = (80..=150).step_by(5).collect();
    let distances: Vec<i64> = (25..=55).step_by(5).collect();
    grid_from(&ratios, &distances, neighbors)
}

/// Step-0.01 grid within ±0.05 of the winner's ratio bound and of each of its
/// distance bounds. Distance values are kept inside (0, 0.5]; an unbounded
/// entry in the winner keeps the unbounded option available.
pub fn refined_grid(winner: &ThresholdVector) -> Vec<ThresholdVector> {
    let r = to_hundredths(winner.ratio);
    let ratios: Vec<i64> = (r - 5..=r + 5).filter(|&x| x > 0).collect();
    let mut distances: Vec<i64> = Vec::new();
    let no_bound = to_hundredths(NO_BOUND);
    for &d in &winner.distances {
        let c = to_hundredths(d);
        distances.extend((c - 5..=c + 5).filter(|&x| x > 0 && x <= 50));
        if c == no_bound {
            distances.push(no_bound);
        }
    }
    distances.sort_unstable();
    distances.dedup();
    grid_from(&ratios, &distances, winner.distances.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionOutcome {
    pub repetition: usize,
    pub winner: ThresholdVector,
    pub score: f64,
    pub tpr: f64,
    pub tnr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub grid_size: usize,
    pub repetitions: Vec<RepetitionOutcome>,
    /// Vote counts, most votes first (ties in grid order).
    pub histogram: Vec<(ThresholdVector, usize)>,
    pub chosen: ThresholdVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub seed: u64,
    pub folds: usize,
    pub neighbors: usize,
    pub stages: Vec<StageReport>,
    pub chosen: ThresholdVector,
}

/// Stratified fold assignment: non-noise and noise ids are shuffled
/// separately and dealt round-robin, so every fold holds both kinds.
pub fn stratified_folds(partition: &TrainingPartition, folds: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<u32>>> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if partition.non_noise.len() < folds || partition.noise.len() < folds {
        return Err(Error::Data(format!(
            "cannot stratify {} non-noise and {} noise members into {folds} folds that each hold both",
            partition.non_noise.len(),
            partition.noise.len()
        )));
    }
    let mut out = vec![Vec::new(); folds];
    for group in [&partition.non_noise, &partition.noise] {
        let mut ids = group.clone();
        ids.shuffle(rng);
        for (k, id) in ids.into_iter().enumerate() {
            out[k % folds].push(id);
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok(out)
}

struct Lookup<'a> {
    by_id: HashMap<u32, TrainingMember<'a>>,
}

impl<'a> Lookup<'a> {
    fn new(members: &[TrainingMember<'a>]) -> Self {
        Lookup {
            by_id: members.iter().map(|m| (m.item_id, *m)).collect(),
        }
    }

    fn get(&self, id: u32) -> Result<TrainingMember<'a>> {
        self.by_id
            .get(&id)
            .copied()
            .ok_or_else(|| Error::Contract(format!("training member {id} has no feature row")))
    }

    fn vector(&self, id: u32) -> Result<&'a UnitVector> {
        self.get(id)?
            .vector
            .ok_or_else(|| Error::Contract(format!("non-noise member {id} has a zero vector")))
    }
}

/// Assessments of every training member against the other folds' non-noise members.
fn assess_repetition(
    partition: &TrainingPartition,
    lookup: &Lookup,
    config: &CvConfig,
    repetition: usize,
) -> Result<Vec<(Assessment, bool)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(repetition as u64));
    let folds = stratified_folds(partition, config.folds, &mut rng)?;
    let mut out = Vec::with_capacity(partition.training.len());
    for fold in &folds {
        let reference: Vec<(u32, &UnitVector)> = partition
            .non_noise
            .iter()
            .filter(|id| fold.binary_search(id).is_err())
            .map(|&id| lookup.vector(id).map(|v| (id, v)))
            .collect::<Result<_>>()?;
        let reference = ReferenceSet::new(reference, config.neighbors)?;
        for &id in fold {
            let m = lookup.get(id)?;
            let probe = Probe {
                item_id: id,
                vector: m.vector,
                tag_count: m.tag_count,
            };
            let positive = partition.non_noise.binary_search(&id).is_ok();
            out.push((assess(&probe, &reference, config.neighbors, config.min_tags), positive));
        }
    }
    Ok(out)
}

/// TPR and TNR of `theta` over one repetition's assessments.
fn rates(assessments: &[(Assessment, bool)], theta: &ThresholdVector, n_pos: usize, n_neg: usize) -> (f64, f64) {
    let (mut tp, mut tn) = (0usize, 0usize);
    for (a, positive) in assessments {
        let accepted = a.decide(theta) == Decision::Accepted;
        match (positive, accepted) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            _ => {}
        }
    }
    (tp as f64 / n_pos as f64, tn as f64 / n_neg as f64)
}

fn sorted_grid(grid: &[ThresholdVector], neighbors: usize) -> Result<Vec<ThresholdVector>> {
    if grid.is_empty() {
        return Err(Error::Config("threshold grid is empty".into()));
    }
    for t in grid {
        t.validate()?;
        if t.distances.len() != neighbors {
            return Err(Error::Config(format!(
                "candidate {t} has {} distance bounds, expected {neighbors}",
                t.distances.len()
            )));
        }
    }
    let mut g = grid.to_vec();
    g.sort_by(|a, b| a.lex_cmp(b));
    g.dedup_by(|a, b| a.lex_cmp(b).is_eq());
    Ok(g)
}

fn run_stage(
    partition: &TrainingPartition,
    lookup: &Lookup,
    config: &CvConfig,
    grid: &[ThresholdVector],
) -> Result<StageReport> {
    let grid = sorted_grid(grid, config.neighbors)?;
    let (n_pos, n_neg) = (partition.non_noise.len(), partition.noise.len());
    let outcomes: Vec<(usize, RepetitionOutcome)> = (0..config.repetitions)
        .into_par_iter()
        .map(|rep| {
            let assessments = assess_repetition(partition, lookup, config, rep)?;
            let mut best: Option<(usize, f64, f64, f64)> = None;
            for (k, theta) in grid.iter().enumerate() {
                let (tpr, tnr) = rates(&assessments, theta, n_pos, n_neg);
                let s = score(tpr, tnr);
                if best.is_none_or(|b| s > b.1) {
                    best = Some((k, s, tpr, tnr));
                }
            }
            let (k, s, tpr, tnr) = best.expect("grid is nonempty");
            Ok((
                k,
                RepetitionOutcome {
                    repetition: rep,
                    winner: grid[k].clone(),
                    score: s,
                    tpr,
                    tnr,
                },
            ))
        })
        .collect::<Result<_>>()?;

    let mut votes = vec![0usize; grid.len()];
    for (k, _) in &outcomes {
        votes[*k] += 1;
    }
    let mut histogram: Vec<(usize, usize)> = votes
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0)
        .map(|(k, &v)| (k, v))
        .collect();
    histogram.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let chosen = match histogram.first() {
        Some(&(k, _)) => grid[k].clone(),
        // Zero repetitions: fall back to the first candidate.
        None => grid[0].clone(),
    };
    Ok(StageReport {
        grid_size: grid.len(),
        repetitions: outcomes.into_iter().map(|(_, o)| o).collect(),
        histogram: histogram.into_iter().map(|(k, v)| (grid[k].clone(), v)).collect(),
        chosen,
    })
}

/// Chooses the threshold vector by majority vote over repeated CV runs.
pub fn select_threshold(
    partition: &TrainingPartition,
    members: &[TrainingMember],
    config: &CvConfig,
) -> Result<ThresholdReport> {
    if partition.non_noise.is_empty() || partition.noise.is_empty() {
        return Err(Error::Data(
            "threshold selection needs both non-noise and noise training members".into(),
        ));
    }
    let lookup = Lookup::new(members);
    let mut stages = vec![run_stage(partition, &lookup, config, &config.grid)?];
    if config.refine && config.grid.len() > 1 {
        let fine = refined_grid(&stages[0].chosen);
        stages.push(run_stage(partition, &lookup, config, &fine)?);
    }
    let chosen = stages.last().expect("one stage").chosen.clone();
    for (i, s) in stages.iter().enumerate() {
        log::info!(
            "threshold stage {}: {} candidates, winner {} with {} of {} votes",
            i + 1,
            s.grid_size,
            s.chosen,
            s.histogram.first().map_or(0, |h| h.1),
            config.repetitions
        );
    }
    Ok(ThresholdReport {
        seed: config.seed,
        folds: config.folds,
        neighbors: config.neighbors,
        stages,
        chosen,
    })
}

/// `√(TPR·TNR)` of a fixed threshold in each repetition's folds.
pub fn cross_validated_scores(
    partition: &TrainingPartition,
    members: &[TrainingMember],
    config: &CvConfig,
    theta: &ThresholdVector,
) -> Result<Vec<f64>> {
    let lookup = Lookup::new(members);
    (0..config.repetitions)
        .into_par_iter()
        .map(|rep| {
            let a = assess_repetition(partition, &lookup, config, rep)?;
            let (tpr, tnr) = rates(&a, theta, partition.non_noise.len(), partition.noise.len());
            Ok(score(tpr, tnr))
        })
        .collect()
}
