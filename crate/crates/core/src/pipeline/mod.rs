//! Stage orchestration. Every stage reads its inputs from the output
//! directory and writes its artifacts back there, so any stage can be rerun
//! on its own.

pub mod artifacts;
pub mod config;
pub mod report;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{cluster_tags, ClusterStats};
use crate::error::{Error, Result};
use crate::features::{group_frequency, tgfiff, unit_normalize, FeatureMatrix, FeatureStats, NormalizedFeatures};
use crate::ingest::{self, FilmRecord, IdOverrideTable, IngestStats, NarrativeFilterStats};
use crate::knn::{
    classify, coarse_grid, select_threshold, CvConfig, MemberRole, Probe, ReferenceSet, ThresholdReport,
    ThresholdVector, TrainingMember,
};
use crate::normalize::{
    build_matrix, default_stem_overrides, FilmTagMatrix, MatrixParams, MatrixStats, StemLexicon, Stoplist,
    TagStemmer,
};

use artifacts::*;
pub use config::{RunConfig, Stage, ThresholdSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub ingest: IngestStats,
    pub narrative: NarrativeFilterStats,
    pub films: usize,
    pub tag_applications: usize,
    pub tag_applications_dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizeSummary {
    pub matrix: MatrixStats,
    pub space_variants_merged: usize,
    pub raw_tags_empty_after_canonicalization: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub stats: FeatureStats,
    pub uninformative_groups: Vec<u32>,
    pub zero_rows: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSource {
    Fixed,
    Selected,
}

/// Contents of the thresholds artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRecord {
    pub source: ThresholdSource,
    pub seed: u64,
    pub chosen: ThresholdVector,
    pub training: usize,
    pub non_noise: usize,
    pub noise: usize,
    pub q3: f64,
    pub selection: Option<ThresholdReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifySummary {
    pub classified: usize,
    pub with_min_tags: usize,
    pub accepted: usize,
    pub by_reason: BTreeMap<String, usize>,
}

/// Counts gathered from whichever stage artifacts exist.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub films: Option<usize>,
    pub tags: Option<usize>,
    pub components: Option<usize>,
    pub groups: Option<usize>,
    pub training: Option<usize>,
    pub non_noise: Option<usize>,
    pub noise: Option<usize>,
    pub classified: Option<usize>,
    pub classified_with_min_tags: Option<usize>,
    pub accepted: Option<usize>,
    pub thresholds: Option<ThresholdVector>,
    pub threshold_source: Option<ThresholdSource>,
    pub seed: u64,
}

fn read_if_present<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Option<T>> {
    if path.is_file() {
        read_json(path).map(Some)
    } else {
        Ok(None)
    }
}

impl Summary {
    pub fn collect(dir: &Path, seed: u64) -> Result<Summary> {
        let mut s = Summary {
            seed,
            ..Default::default()
        };
        if let Some(n) = read_if_present::<NormalizeSummary>(&dir.join(NORMALIZE_STATS))? {
            s.films = Some(n.matrix.n_films);
            s.tags = Some(n.matrix.n_tags);
        }
        if let Some(c) = read_if_present::<ClusterStats>(&dir.join(CLUSTER_STATS))? {
            s.components = Some(c.n_components);
            s.groups = Some(c.n_groups);
        }
        if let Some(t) = read_if_present::<ThresholdRecord>(&dir.join(THRESHOLDS))? {
            s.training = Some(t.training);
            s.non_noise = Some(t.non_noise);
            s.noise = Some(t.noise);
            s.thresholds = Some(t.chosen);
            s.threshold_source = Some(t.source);
            s.seed = t.seed;
        }
        if let Some(c) = read_if_present::<ClassifySummary>(&dir.join(CLASSIFY_STATS))? {
            s.classified = Some(c.classified);
            s.classified_with_min_tags = Some(c.with_min_tags);
            s.accepted = Some(c.accepted);
        }
        Ok(s)
    }
}

fn stem_overrides(config: &RunConfig) -> Result<BTreeMap<String, String>> {
    let mut table = default_stem_overrides();
    if let Some(p) = &config.stem_overrides {
        table.extend(TagStemmer::load_overrides(p)?);
    }
    Ok(table)
}

fn ingest_stage(config: &RunConfig) -> Result<()> {
    let dir = &config.out_dir;
    let overrides = match &config.id_overrides {
        Some(p) => IdOverrideTable::load(p)?,
        None => IdOverrideTable::default(),
    };
    let path = |p: &Option<std::path::PathBuf>| p.clone().expect("validated");
    let corpus = ingest::load_corpus(&path(&config.links), &path(&config.tags), &path(&config.basics), &overrides)?;
    let (films, narrative) = ingest::filter_narrative(corpus.films);
    let mut apps = corpus.tag_apps;
    let dropped = ingest::retain_tag_apps(&films, &mut apps);
    write_csv(&dir.join(FILMS), films.iter().map(FilmRow::from))?;
    write_csv(
        &dir.join(TAG_APPLICATIONS),
        apps.iter().map(|a| TagApplicationRow {
            user_id: a.user_id,
            item_id: a.item_id,
            tag: a.raw_tag.clone(),
            timestamp: a.timestamp,
        }),
    )?;
    write_json(
        &dir.join(INGEST_STATS),
        &IngestSummary {
            ingest: corpus.stats,
            narrative,
            films: films.len(),
            tag_applications: apps.len(),
            tag_applications_dropped: dropped,
        },
    )
}

fn normalize_stage(config: &RunConfig) -> Result<()> {
    let dir = &config.out_dir;
    let apps = load_tag_applications(dir)?;
    let mut lexicon = StemLexicon::build(&apps, TagStemmer::new(stem_overrides(config)?));
    let merged = lexicon.merge_space_variants();
    let stoplists = config
        .stoplists
        .iter()
        .map(|p| Stoplist::load(p, &lexicon))
        .collect::<Result<Vec<_>>>()?;
    let params = MatrixParams {
        min_users: config.min_users,
        min_films: config.min_films,
    };
    let (matrix, stats) = build_matrix(&apps, &lexicon, params, &stoplists.iter().collect::<Vec<_>>())?;
    write_csv(
        &dir.join(LEXICON),
        lexicon.dump_rows().into_iter().map(|[raw, canonical, stem, label]| LexiconRow {
            raw: raw.into(),
            canonical: canonical.into(),
            stem: stem.into(),
            label: label.into(),
        }),
    )?;
    save_matrix(dir, &matrix)?;
    write_json(
        &dir.join(NORMALIZE_STATS),
        &NormalizeSummary {
            matrix: stats,
            space_variants_merged: merged,
            raw_tags_empty_after_canonicalization: lexicon.dropped_raw().len(),
        },
    )
}

fn cluster_stage(config: &RunConfig) -> Result<()> {
    let dir = &config.out_dir;
    let matrix = load_matrix(dir)?;
    let clustering = cluster_tags(&matrix, config.exact_limit);
    let label = |t: u32| matrix.tags()[t as usize].label.clone();
    write_csv(
        &dir.join(GRAPH),
        clustering.graph.edges().iter().map(|e| EdgeRow {
            from: label(e.from),
            to: label(e.to),
            weight: e.weight,
        }),
    )?;
    write_csv(
        &dir.join(GROUPS),
        matrix.tags().iter().zip(clustering.grouping.assignment()).map(|(t, &g)| GroupRow {
            tag_label: t.label.clone(),
            group_id: g,
        }),
    )?;
    write_json(&dir.join(CLUSTER_STATS), &clustering.stats)
}

fn features_stage(config: &RunConfig) -> Result<()> {
    let dir = &config.out_dir;
    let matrix = load_matrix(dir)?;
    let grouping = load_grouping(dir, &matrix)?;
    let lambda = group_frequency(&matrix, &grouping)?;
    let phi = tgfiff(&lambda)?;
    let zero_rows = unit_normalize(&phi).zero_rows();
    save_features(dir, &phi)?;
    write_json(
        &dir.join(FEATURE_STATS),
        &FeatureSummary {
            stats: FeatureStats {
                n_films: phi.n_films(),
                n_groups: phi.n_groups(),
                nonzero_weights: phi.rows().iter().map(|r| r.nnz()).sum(),
                uninformative_groups: phi.uninformative_groups().len(),
                zero_rows: zero_rows.len(),
            },
            uninformative_groups: phi.uninformative_groups().to_vec(),
            zero_rows,
        },
    )
}

/// Everything the classification stages read back.
struct Model {
    films: Vec<FilmRecord>,
    matrix: FilmTagMatrix,
    normalized: NormalizedFeatures,
}

impl Model {
    fn load(dir: &Path) -> Result<Model> {
        let films = load_films(dir)?;
        let matrix = load_matrix(dir)?;
        let grouping = load_grouping(dir, &matrix)?;
        let phi: FeatureMatrix = load_features(dir, matrix.film_ids(), grouping.n_groups())?;
        let normalized = unit_normalize(&phi);
        Ok(Model {
            films,
            matrix,
            normalized,
        })
    }

    fn film(&self, item_id: u32) -> Option<&FilmRecord> {
        self.films
            .binary_search_by_key(&item_id, |f| f.item_id)
            .ok()
            .map(|i| &self.films[i])
    }

    fn tag_count(&self, item_id: u32) -> usize {
        self.matrix.row_of_item(item_id).map_or(0, |i| self.matrix.row(i).len())
    }

    fn member(&self, item_id: u32) -> TrainingMember<'_> {
        TrainingMember {
            item_id,
            vector: self.normalized.by_item(item_id).flatten(),
            tag_count: self.tag_count(item_id),
        }
    }
}

fn select_threshold_stage(config: &RunConfig) -> Result<()> {
    let dir = &config.out_dir;
    let model = Model::load(dir)?;
    let positives: Vec<u32> = model
        .matrix
        .film_ids()
        .iter()
        .copied()
        .filter(|&id| model.film(id).is_some_and(|f| f.has_genre(&config.positive_genre)))
        .collect();
    log::info!("{} films in the matrix carry the genre {:?}", positives.len(), config.positive_genre);
    let members: Vec<TrainingMember> = positives.iter().map(|&id| model.member(id)).collect();
    let partition = crate::knn::split_noise(&members, config.min_tags)?;
    write_csv(
        &dir.join(PARTITION),
        partition.members.iter().map(|&(item_id, center_distance, role)| PartitionRow {
            item_id,
            center_distance,
            role,
        }),
    )?;
    let (source, chosen, selection) = match &config.thresholds {
        ThresholdSpec::Fixed(t) => (ThresholdSource::Fixed, t.clone(), None),
        ThresholdSpec::Select => {
            let cv = CvConfig {
                neighbors: config.neighbors,
                folds: config.folds,
                repetitions: config.repetitions,
                seed: config.seed,
                grid: coarse_grid(config.neighbors),
                refine: config.refine,
                min_tags: config.min_tags,
            };
            let report = select_threshold(&partition, &members, &cv)?;
            (ThresholdSource::Selected, report.chosen.clone(), Some(report))
        }
    };
    log::info!("thresholds {chosen} ({source:?})");
    write_json(
        &dir.join(THRESHOLDS),
        &ThresholdRecord {
            source,
            seed: config.seed,
            chosen,
            training: partition.training.len(),
            non_noise: partition.non_noise.len(),
            noise: partition.noise.len(),
            q3: partition.q3,
            selection,
        },
    )
}

fn classify_stage(config: &RunConfig) -> Result<()> {
    let dir = &config.out_dir;
    let model = Model::load(dir)?;
    let partition: Vec<PartitionRow> = read_csv(&dir.join(PARTITION))?;
    let thresholds: ThresholdRecord = read_json(&dir.join(THRESHOLDS))?;
    let theta = &thresholds.chosen;
    theta.validate()?;
    let training: BTreeSet<u32> = partition.iter().map(|p| p.item_id).collect();
    let reference: Vec<(u32, &crate::sparse::UnitVector)> = partition
        .iter()
        .filter(|p| p.role == MemberRole::NonNoise)
        .map(|p| {
            model
                .member(p.item_id)
                .vector
                .map(|v| (p.item_id, v))
                .ok_or_else(|| Error::Data(format!("non-noise film {} has no feature vector", p.item_id)))
        })
        .collect::<Result<_>>()?;
    let reference = ReferenceSet::new(reference, theta.distances.len())?;

    let unlabeled: Vec<u32> = model
        .matrix
        .film_ids()
        .iter()
        .copied()
        .filter(|id| !training.contains(id))
        .collect();
    let results: Vec<ResultRecord> = unlabeled
        .par_iter()
        .map(|&id| {
            let m = model.member(id);
            let probe = Probe {
                item_id: id,
                vector: m.vector,
                tag_count: m.tag_count,
            };
            let c = classify(&probe, &reference, theta, config.min_tags);
            let film = model.film(id);
            ResultRecord {
                item_id: id,
                imdb_id: film.map(|f| f.imdb_id.clone()).unwrap_or_default(),
                title: film.map(|f| f.title.clone()).unwrap_or_default(),
                year: film.and_then(|f| f.year),
                accepted: c.accepted,
                reason: c.reason,
                ratio: c.ratio,
                neighbors: c.neighbors,
            }
        })
        .collect();
    save_results(&dir.join(RESULTS), theta.distances.len(), &results)?;

    let mut by_reason: BTreeMap<String, usize> = BTreeMap::new();
    for r in &results {
        *by_reason.entry(r.reason.as_str().to_string()).or_default() += 1;
    }
    let summary = ClassifySummary {
        classified: results.len(),
        with_min_tags: unlabeled.iter().filter(|&&id| model.tag_count(id) >= config.min_tags).count(),
        accepted: results.iter().filter(|r| r.accepted).count(),
        by_reason,
    };
    log::info!(
        "classified {} films ({} with at least {} tags): {} accepted",
        summary.classified,
        summary.with_min_tags,
        config.min_tags,
        summary.accepted
    );
    write_json(&dir.join(CLASSIFY_STATS), &summary)
}

fn report_stage(config: &RunConfig) -> Result<()> {
    let dir = &config.out_dir;
    let films = load_films(dir)?;
    let by_id: BTreeMap<u32, &FilmRecord> = films.iter().map(|f| (f.item_id, f)).collect();
    let apps = load_tag_applications(dir)?;
    let lexicon: Vec<LexiconRow> = read_csv(&dir.join(LEXICON))?;
    let stem_of_raw: HashMap<String, String> = lexicon.into_iter().map(|r| (r.raw, r.stem)).collect();
    let stemmer = TagStemmer::new(stem_overrides(config)?);
    let marked = report::films_with_stems(&apps, &stem_of_raw, &report::squashed_stems(&report::MARKER_TAGS, &stemmer));

    let results = load_results(&dir.join(RESULTS))?;
    write_csv(&dir.join(NEIGHBORS), report::report_neighbors(&results, &by_id, &marked))?;

    let matrix = load_matrix(dir)?;
    let grouping = load_grouping(dir, &matrix)?;
    let lambda = group_frequency(&matrix, &grouping)?;
    let partition: Vec<PartitionRow> = read_csv(&dir.join(PARTITION))?;
    let population: BTreeSet<u32> = partition
        .iter()
        .filter(|p| p.role == MemberRole::NonNoise)
        .map(|p| p.item_id)
        .chain(results.iter().filter(|r| r.accepted).map(|r| r.item_id))
        .collect();
    let years: BTreeMap<u32, Option<i32>> = films.iter().map(|f| (f.item_id, f.year)).collect();
    let era = report::report_era_groups(
        &population,
        &years,
        &lambda,
        &grouping,
        &matrix,
        config.era_cutoff,
        config.top_groups,
    );
    if era.unknown_year > 0 {
        log::warn!("{} films without a release year left out of the era comparison", era.unknown_year);
    }
    write_json(&dir.join(ERA_REPORT), &era)
}

/// Runs one stage against the output directory and refreshes the summary.
pub fn run_stage(config: &RunConfig, stage: Stage) -> Result<()> {
    let start = Instant::now();
    log::info!("stage {stage}: start");
    let outcome = match stage {
        Stage::Ingest => ingest_stage(config),
        Stage::Normalize => normalize_stage(config),
        Stage::Cluster => cluster_stage(config),
        Stage::Features => features_stage(config),
        Stage::SelectThreshold => select_threshold_stage(config),
        Stage::Classify => classify_stage(config),
        Stage::Report => report_stage(config),
    };
    outcome.map_err(|e| e.in_stage(stage.name()))?;
    log::info!("stage {stage}: done in {:.2?}", start.elapsed());
    write_summary(config)?;
    Ok(())
}

pub fn write_summary(config: &RunConfig) -> Result<Summary> {
    let summary = Summary::collect(&config.out_dir, config.seed)?;
    write_json(&config.out_dir.join(SUMMARY), &summary)?;
    Ok(summary)
}

/// Runs every stage up to and including `stop_after`. Artifacts left in the
/// output directory by earlier runs are removed first.
pub fn run(config: &RunConfig, stop_after: Option<Stage>) -> Result<Summary> {
    let stages: Vec<Stage> = Stage::ALL
        .into_iter()
        .take_while(|&s| stop_after.is_none_or(|stop| s <= stop))
        .collect();
    config.validate(&stages)?;
    let dir = &config.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for name in STAGE_FILES.iter().flat_map(|f| f.iter()).chain([&SUMMARY]) {
        let p = dir.join(name);
        if p.is_file() {
            fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
        }
    }
    for &stage in &stages {
        run_stage(config, stage)?;
    }
    let summary = Summary::collect(dir, config.seed)?;
    if let (Some(acc), Some(with_tags), Some(films), Some(training)) = (
        summary.accepted,
        summary.classified_with_min_tags,
        summary.films,
        summary.training,
    ) {
        if !(acc <= with_tags && with_tags <= films - training) {
            return Err(Error::Contract(format!(
                "summary counts out of order: accepted {acc}, classified with enough tags {with_tags}, unlabeled {}",
                films - training
            )));
        }
    }
    Ok(summary)
}

