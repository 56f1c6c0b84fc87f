//! Artifact files: names, row layouts, and atomic reading and writing.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cluster::TagGrouping;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::ingest::{FilmRecord, TagApplication, TitleType};
use crate::knn::{Decision, MemberRole, Neighbor};
use crate::normalize::{FilmTagMatrix, TagInfo};
use crate::sparse::SparseVec;

pub const FILMS: &str = "films.csv";
pub const TAG_APPLICATIONS: &str = "tag_applications.csv";
pub const INGEST_STATS: &str = "ingest_stats.json";
pub const LEXICON: &str = "lexicon.csv";
pub const TAGS: &str = "tags.csv";
pub const FILM_TAGS: &str = "film_tags.csv";
pub const NORMALIZE_STATS: &str = "normalize_stats.json";
pub const GRAPH: &str = "graph.csv";
pub const GROUPS: &str = "groups.csv";
pub const CLUSTER_STATS: &str = "cluster_stats.json";
pub const FEATURES: &str = "features.csv";
pub const FEATURE_STATS: &str = "feature_stats.json";
pub const PARTITION: &str = "partition.csv";
pub const THRESHOLDS: &str = "thresholds.json";
pub const RESULTS: &str = "results.csv";
pub const CLASSIFY_STATS: &str = "classify_stats.json";
pub const NEIGHBORS: &str = "neighbors.csv";
pub const ERA_REPORT: &str = "era_report.json";
pub const SUMMARY: &str = "summary.json";

/// Files written by each stage, in stage order.
pub const STAGE_FILES: [&[&str]; 7] = [
    &[FILMS, TAG_APPLICATIONS, INGEST_STATS],
    &[LEXICON, TAGS, FILM_TAGS, NORMALIZE_STATS],
    &[GRAPH, GROUPS, CLUSTER_STATS],
    &[FEATURES, FEATURE_STATS],
    &[PARTITION, THRESHOLDS],
    &[RESULTS, CLASSIFY_STATS],
    &[NEIGHBORS, ERA_REPORT],
];

/// Writes through a temporary file in the same directory and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        for row in rows {
            out.serialize(row)?;
        }
        out.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))
    })
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| {
        Error::Data(format!(
            "missing upstream artifact {} ({e}); run the earlier stages first",
            path.display()
        ))
    })
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::Data(format!("{}: {e}", path.display()))))
        .collect()
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(std::io::BufReader::new(open(path)?))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilmRow {
    pub item_id: u32,
    pub imdb_id: String,
    pub title: String,
    pub year: Option<i32>,
    pub title_type: TitleType,
    pub is_documentary: bool,
    /// Comma-separated IMDb genres.
    pub genres: String,
    /// Semicolon-separated MovieLens ids merged into this film.
    pub movielens_ids: String,
}

impl From<&FilmRecord> for FilmRow {
    fn from(f: &FilmRecord) -> Self {
        FilmRow {
            item_id: f.item_id,
            imdb_id: f.imdb_id.clone(),
            title: f.title.clone(),
            year: f.year,
            title_type: f.title_type,
            is_documentary: f.is_documentary,
            genres: f.genres.join(","),
            movielens_ids: f.movielens_ids.iter().map(u32::to_string).collect::<Vec<_>>().join(";"),
        }
    }
}

impl FilmRow {
    pub fn into_record(self) -> Result<FilmRecord> {
        let movielens_ids = self
            .movielens_ids
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| Error::Data(format!("bad MovieLens id list {:?}", self.movielens_ids))))
            .collect::<Result<_>>()?;
        Ok(FilmRecord {
            item_id: self.item_id,
            movielens_ids,
            imdb_id: self.imdb_id,
            title: self.title,
            year: self.year,
            title_type: self.title_type,
            is_documentary: self.is_documentary,
            genres: self.genres.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagApplicationRow {
    pub user_id: u32,
    pub item_id: u32,
    pub tag: String,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconRow {
    pub raw: String,
    pub canonical: String,
    pub stem: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagRow {
    pub tag_id: u32,
    pub stem: String,
    pub label: String,
    pub user_count: u32,
    pub film_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilmTagRow {
    pub item_id: u32,
    pub tag_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub from: String,
    pub to: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub tag_label: String,
    pub group_id: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub item_id: u32,
    pub group_id: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRow {
    pub item_id: u32,
    pub center_distance: Option<f64>,
    pub role: MemberRole,
}

pub fn load_films(dir: &Path) -> Result<Vec<FilmRecord>> {
    read_csv::<FilmRow>(&dir.join(FILMS))?
        .into_iter()
        .map(FilmRow::into_record)
        .collect()
}

pub fn load_tag_applications(dir: &Path) -> Result<Vec<TagApplication>> {
    Ok(read_csv::<TagApplicationRow>(&dir.join(TAG_APPLICATIONS))?
        .into_iter()
        .map(|r| TagApplication {
            user_id: r.user_id,
            item_id: r.item_id,
            raw_tag: r.tag,
            timestamp: r.timestamp,
        })
        .collect())
}

pub fn save_matrix(dir: &Path, m: &FilmTagMatrix) -> Result<()> {
    write_csv(
        &dir.join(TAGS),
        m.tags().iter().enumerate().map(|(i, t)| TagRow {
            tag_id: i as u32,
            stem: t.stem.clone(),
            label: t.label.clone(),
            user_count: t.user_count,
            film_count: t.film_count,
        }),
    )?;
    write_csv(
        &dir.join(FILM_TAGS),
        m.film_ids().iter().zip(m.rows()).flat_map(|(&item_id, row)| {
            row.iter().map(move |&tag_id| FilmTagRow { item_id, tag_id })
        }),
    )
}

pub fn load_matrix(dir: &Path) -> Result<FilmTagMatrix> {
    let tag_rows: Vec<TagRow> = read_csv(&dir.join(TAGS))?;
    if tag_rows.iter().enumerate().any(|(i, t)| t.tag_id != i as u32) {
        return Err(Error::Data(format!("{TAGS}: tag ids must be 0, 1, 2, … in order")));
    }
    let tags = tag_rows
        .into_iter()
        .map(|t| TagInfo {
            stem: t.stem,
            label: t.label,
            user_count: t.user_count,
            film_count: t.film_count,
        })
        .collect();
    let mut film_ids: Vec<u32> = Vec::new();
    let mut rows: Vec<Vec<u32>> = Vec::new();
    for r in read_csv::<FilmTagRow>(&dir.join(FILM_TAGS))? {
        if film_ids.last() != Some(&r.item_id) {
            film_ids.push(r.item_id);
            rows.push(Vec::new());
        }
        rows.last_mut().expect("pushed above").push(r.tag_id);
    }
    FilmTagMatrix::from_parts(film_ids, tags, rows)
        .map_err(|e| Error::Data(format!("{FILM_TAGS}: {e}")))
}

pub fn load_grouping(dir: &Path, matrix: &FilmTagMatrix) -> Result<TagGrouping> {
    let rows: Vec<GroupRow> = read_csv(&dir.join(GROUPS))?;
    if rows.len() != matrix.n_tags()
        || rows.iter().zip(matrix.tags()).any(|(r, t)| r.tag_label != t.label)
    {
        return Err(Error::Data(format!("{GROUPS} does not list the tags of {TAGS} in order")));
    }
    TagGrouping::from_assignment(rows.into_iter().map(|r| r.group_id).collect())
        .map_err(|e| Error::Data(format!("{GROUPS}: {e}")))
}

pub fn save_features(dir: &Path, phi: &FeatureMatrix) -> Result<()> {
    write_csv(
        &dir.join(FEATURES),
        phi.triplets().map(|(item_id, group_id, weight)| FeatureRow { item_id, group_id, weight }),
    )
}

/// Rebuilds the weight matrix over `film_ids`; films absent from the file
/// have all-zero rows.
pub fn load_features(dir: &Path, film_ids: &[u32], n_groups: usize) -> Result<FeatureMatrix> {
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); film_ids.len()];
    for r in read_csv::<FeatureRow>(&dir.join(FEATURES))? {
        let i = film_ids
            .binary_search(&r.item_id)
            .map_err(|_| Error::Data(format!("{FEATURES}: film {} is not in the matrix", r.item_id)))?;
        rows[i].push((r.group_id, r.weight));
    }
    let rows = rows
        .into_iter()
        .map(SparseVec::from_sorted)
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::Data(format!("{FEATURES}: {e}")))?;
    FeatureMatrix::from_rows(film_ids.to_vec(), n_groups, rows).map_err(|e| Error::Data(format!("{FEATURES}: {e}")))
}

/// One row of the classification results.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub item_id: u32,
    pub imdb_id: String,
    pub title: String,
    pub year: Option<i32>,
    pub accepted: bool,
    pub reason: Decision,
    pub ratio: Option<f64>,
    pub neighbors: Vec<Neighbor>,
}

pub fn results_header(neighbors: usize) -> Vec<String> {
    let mut h: Vec<String> = ["item_id", "imdb_id", "title", "year", "accepted", "reason", "r"]
        .map(String::from)
        .to_vec();
    for j in 1..=neighbors {
        h.push(format!("nn{j}_id"));
        h.push(format!("nn{j}_d"));
    }
    h
}

pub fn save_results(path: &Path, neighbors: usize, results: &[ResultRecord]) -> Result<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(results_header(neighbors))?;
        for r in results {
            let mut rec = vec![
                r.item_id.to_string(),
                r.imdb_id.clone(),
                r.title.clone(),
                r.year.map(|y| y.to_string()).unwrap_or_default(),
                (r.accepted as u8).to_string(),
                r.reason.as_str().to_string(),
                r.ratio.map(|x| x.to_string()).unwrap_or_default(),
            ];
            for j in 0..neighbors {
                match r.neighbors.get(j) {
                    Some(n) => {
                        rec.push(n.item_id.to_string());
                        rec.push(n.distance.to_string());
                    }
                    None => rec.extend([String::new(), String::new()]),
                }
            }
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    })
}

/// Reads results back. Neighbor self-distances are not stored and come back as NaN.
pub fn load_results(path: &Path) -> Result<Vec<ResultRecord>> {
    let mut reader = csv::Reader::from_reader(open(path)?);
    let header = reader.headers()?.clone();
    let neighbors = header.len().saturating_sub(7) / 2;
    if header.iter().collect::<Vec<_>>() != results_header(neighbors) {
        return Err(Error::Data(format!("{}: unexpected header", path.display())));
    }
    let bad = |what: &str, rec: &csv::StringRecord| {
        Error::Data(format!("{}: bad {what} in row {:?}", path.display(), rec))
    };
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let num = |k: usize| -> Option<f64> { rec[k].parse().ok() };
        let year = match &rec[3] {
            "" => None,
            y => Some(y.parse().map_err(|_| bad("year", &rec))?),
        };
        let mut nn = Vec::new();
        for j in 0..neighbors {
            let (id, d) = (&rec[7 + 2 * j], 8 + 2 * j);
            if id.is_empty() {
                continue;
            }
            nn.push(Neighbor {
                item_id: id.parse().map_err(|_| bad("neighbor id", &rec))?,
                distance: num(d).ok_or_else(|| bad("neighbor distance", &rec))?,
                self_distance: f64::NAN,
            });
        }
        out.push(ResultRecord {
            item_id: rec[0].parse().map_err(|_| bad("item_id", &rec))?,
            imdb_id: rec[1].to_string(),
            title: rec[2].to_string(),
            year,
            accepted: &rec[4] == "1",
            reason: Decision::parse(&rec[5]).ok_or_else(|| bad("reason", &rec))?,
            ratio: if rec[6].is_empty() { None } else { Some(num(6).ok_or_else(|| bad("r", &rec))?) },
            neighbors: nn,
        });
    }
    Ok(out)
}
