//! Loading MovieLens links/tags and IMDb title basics into one film universe.
//!
//! Films are keyed by IMDb id: MovieLens entries that share an IMDb id are
//! merged into a single [`FilmRecord`]. Internal item ids are dense and
//! assigned in lexicographic IMDb id order so every later tie-break is
//! reproducible.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Share of malformed rows above which a file is rejected outright.
pub const MAX_MALFORMED_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TitleType {
    #[serde(rename = "movie")]
    Movie,
    #[serde(rename = "tvMovie")]
    TvMovie,
    #[serde(rename = "other")]
    Other,
}

impl TitleType {
    pub fn parse(s: &str) -> TitleType {
        match s {
            "movie" => TitleType::Movie,
            "tvMovie" => TitleType::TvMovie,
            _ => TitleType::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TitleType::Movie => "movie",
            TitleType::TvMovie => "tvMovie",
            TitleType::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilmRecord {
    pub item_id: u32,
    /// Every MovieLens id resolving to this film, ascending.
    pub movielens_ids: Vec<u32>,
    pub imdb_id: String,
    pub title: String,
    pub year: Option<i32>,
    pub title_type: TitleType,
    pub is_documentary: bool,
    pub genres: Vec<String>,
}

impl FilmRecord {
    pub fn is_narrative(&self) -> bool {
        matches!(self.title_type, TitleType::Movie | TitleType::TvMovie) && !self.is_documentary
    }

    pub fn has_genre(&self, genre: &str) -> bool {
        self.genres.iter().any(|g| g == genre)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagApplication {
    pub user_id: u32,
    pub item_id: u32,
    pub raw_tag: String,
    pub timestamp: i64,
}

/// Manual corrections for stale IMDb ids in the links file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdOverrideTable {
    pub remaps: BTreeMap<String, String>,
    pub exclusions: BTreeSet<String>,
}

impl IdOverrideTable {
    pub fn new(
        remaps: impl IntoIterator<Item = (String, String)>,
        exclusions: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let table = IdOverrideTable {
            remaps: remaps
                .into_iter()
                .map(|(a, b)| (normalize_imdb_id(&a), normalize_imdb_id(&b)))
                .collect(),
            exclusions: exclusions.into_iter().map(|x| normalize_imdb_id(&x)).collect(),
        };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<()> {
        for (stale, target) in &self.remaps {
            if self.exclusions.contains(target) {
                return Err(Error::Config(format!(
                    "override remaps {stale} to {target}, which is itself excluded"
                )));
            }
        }
        Ok(())
    }

    /// Reads `stale_imdb_id,new_imdb_id`; an empty new id excludes the film.
    pub fn load(path: &Path) -> Result<Self> {
        let mut reader = csv_reader(path, b',')?;
        let mut remaps = Vec::new();
        let mut exclusions = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let row = row.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let stale = row.get(0).unwrap_or("").trim();
            let new = row.get(1).unwrap_or("").trim();
            if stale.is_empty() {
                return Err(Error::Config(format!(
                    "{}: line {}: empty stale id",
                    path.display(),
                    i + 2
                )));
            }
            if new.is_empty() {
                exclusions.push(stale.to_string());
            } else {
                remaps.push((stale.to_string(), new.to_string()));
            }
        }
        IdOverrideTable::new(remaps, exclusions)
    }

    /// The current id for `imdb_id`, or `None` if the film is excluded.
    pub fn resolve(&self, imdb_id: &str) -> Option<String> {
        if self.exclusions.contains(imdb_id) {
            return None;
        }
        Some(self.remaps.get(imdb_id).cloned().unwrap_or_else(|| imdb_id.to_string()))
    }
}

/// `"0114709"` and `"tt0114709"` both become `"tt0114709"`.
pub fn normalize_imdb_id(raw: &str) -> String {
    let raw = raw.trim();
    if raw.starts_with("tt") {
        raw.to_string()
    } else {
        format!("tt{raw}")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub link_rows: usize,
    pub remapped_ids: usize,
    pub excluded_ids: usize,
    pub missing_in_basics: usize,
    pub merged_duplicates: usize,
    pub films: usize,
    pub tag_rows: usize,
    pub tags_unknown_film: usize,
    pub malformed_rows: usize,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub films: Vec<FilmRecord>,
    pub tag_apps: Vec<TagApplication>,
    pub stats: IngestStats,
}

struct BasicsRow {
    title_type: TitleType,
    title: String,
    year: Option<i32>,
    genres: Vec<String>,
}

struct RawTag {
    user_id: u32,
    movie_id: u32,
    tag: String,
    timestamp: i64,
}

/// Loads and reconciles the three input files.
pub fn load_corpus(
    links_path: &Path,
    tags_path: &Path,
    basics_path: &Path,
    overrides: &IdOverrideTable,
) -> Result<Corpus> {
    let mut stats = IngestStats::default();

    let (links, bad_links) = read_rows(links_path, b',', |row| {
        let movie_id = parse_field::<u32>(row, 0, "movieId")?;
        let imdb = field(row, 1, "imdbId")?;
        if imdb.is_empty() || !imdb.trim_start_matches("tt").chars().all(|c| c.is_ascii_digit()) {
            return Err(format!("bad imdbId {imdb:?}"));
        }
        Ok((movie_id, normalize_imdb_id(imdb)))
    })?;
    stats.link_rows = links.len() + bad_links;
    stats.malformed_rows += bad_links;

    // movieId -> resolved imdb id
    let mut movie_to_imdb: HashMap<u32, String> = HashMap::with_capacity(links.len());
    for (movie_id, imdb) in links {
        match overrides.resolve(&imdb) {
            None => stats.excluded_ids += 1,
            Some(resolved) => {
                if resolved != imdb {
                    stats.remapped_ids += 1;
                }
                if movie_to_imdb.insert(movie_id, resolved).is_some() {
                    return Err(Error::Data(format!(
                        "{}: movieId {movie_id} listed twice",
                        links_path.display()
                    )));
                }
            }
        }
    }
    let wanted: HashSet<&str> = movie_to_imdb.values().map(String::as_str).collect();

    let (basics, tags) = rayon::join(
        || read_basics(basics_path, &wanted),
        || {
            read_rows(tags_path, b',', |row| {
                Ok(RawTag {
                    user_id: parse_field(row, 0, "userId")?,
                    movie_id: parse_field(row, 1, "movieId")?,
                    tag: field(row, 2, "tag")?.to_string(),
                    timestamp: parse_field(row, 3, "timestamp")?,
                })
            })
        },
    );
    let (basics, bad_basics) = basics?;
    let (tags, bad_tags) = tags?;
    stats.malformed_rows += bad_basics + bad_tags;

    // Group MovieLens ids by resolved IMDb id, keeping only ids known to IMDb.
    let mut by_imdb: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for (&movie_id, imdb) in &movie_to_imdb {
        if basics.contains_key(imdb.as_str()) {
            by_imdb.entry(imdb.as_str()).or_default().push(movie_id);
        } else {
            stats.missing_in_basics += 1;
        }
    }

    let mut films = Vec::with_capacity(by_imdb.len());
    let mut movie_to_item: HashMap<u32, u32> = HashMap::new();
    for (item_id, (imdb, mut ml_ids)) in by_imdb.into_iter().enumerate() {
        let item_id = item_id as u32;
        ml_ids.sort_unstable();
        if ml_ids.len() > 1 {
            stats.merged_duplicates += ml_ids.len() - 1;
        }
        for &m in &ml_ids {
            movie_to_item.insert(m, item_id);
        }
        let b = &basics[imdb];
        films.push(FilmRecord {
            item_id,
            movielens_ids: ml_ids,
            imdb_id: imdb.to_string(),
            title: b.title.clone(),
            year: b.year,
            title_type: b.title_type,
            is_documentary: b.genres.iter().any(|g| g == "Documentary"),
            genres: b.genres.clone(),
        });
    }
    stats.films = films.len();

    stats.tag_rows = tags.len() + bad_tags;
    let mut tag_apps = Vec::with_capacity(tags.len());
    for t in tags {
        match movie_to_item.get(&t.movie_id) {
            Some(&item_id) => tag_apps.push(TagApplication {
                user_id: t.user_id,
                item_id,
                raw_tag: t.tag,
                timestamp: t.timestamp,
            }),
            None => stats.tags_unknown_film += 1,
        }
    }
    if stats.tags_unknown_film > 0 {
        log::info!(
            "dropped {} tag applications for films outside the corpus",
            stats.tags_unknown_film
        );
    }
    log::info!(
        "loaded {} films ({} duplicate MovieLens ids merged, {} missing from basics), {} tag applications",
        films.len(),
        stats.merged_duplicates,
        stats.missing_in_basics,
        tag_apps.len()
    );

    Ok(Corpus {
        films,
        tag_apps,
        stats,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NarrativeFilterStats {
    pub removed_title_type: usize,
    pub removed_documentary: usize,
}

/// Keeps movies and TV movies that are not documentaries.
pub fn filter_narrative(films: Vec<FilmRecord>) -> (Vec<FilmRecord>, NarrativeFilterStats) {
    let mut stats = NarrativeFilterStats::default();
    let kept: Vec<FilmRecord> = films
        .into_iter()
        .filter(|f| {
            if !matches!(f.title_type, TitleType::Movie | TitleType::TvMovie) {
                stats.removed_title_type += 1;
                false
            } else if f.is_documentary {
                stats.removed_documentary += 1;
                false
            } else {
                true
            }
        })
        .collect();
    log::info!(
        "narrative filter: {} removed by title type, {} documentaries removed, {} kept",
        stats.removed_title_type,
        stats.removed_documentary,
        kept.len()
    );
    (kept, stats)
}

/// Drops applications whose film is not in `films`. Returns the dropped count.
pub fn retain_tag_apps(films: &[FilmRecord], apps: &mut Vec<TagApplication>) -> usize {
    let ids: HashSet<u32> = films.iter().map(|f| f.item_id).collect();
    let before = apps.len();
    apps.retain(|a| ids.contains(&a.item_id));
    before - apps.len()
}

fn read_basics(
    path: &Path,
    wanted: &HashSet<&str>,
) -> Result<(HashMap<String, BasicsRow>, usize)> {
    let (rows, bad) = read_rows(path, b'\t', |row| {
        let tconst = field(row, 0, "tconst")?;
        if !wanted.contains(tconst) {
            return Ok(None);
        }
        let year = match field(row, 5, "startYear")? {
            "\\N" | "" => None,
            y => Some(y.parse::<i32>().map_err(|_| format!("bad startYear {y:?}"))?),
        };
        let genres = match field(row, 8, "genres")? {
            "\\N" | "" => Vec::new(),
            g => g.split(',').map(str::to_string).collect(),
        };
        Ok(Some((
            tconst.to_string(),
            BasicsRow {
                title_type: TitleType::parse(field(row, 1, "titleType")?),
                title: field(row, 2, "primaryTitle")?.to_string(),
                year,
                genres,
            },
        )))
    })?;
    Ok((rows.into_iter().flatten().collect(), bad))
}

fn csv_reader(path: &Path, delimiter: u8) -> Result<csv::Reader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut builder = csv::ReaderBuilder::new();
    builder.delimiter(delimiter).has_headers(true).flexible(true);
    if delimiter == b'\t' {
        // IMDb dumps are not quoted; titles may contain stray quote characters.
        builder.quoting(false);
    }
    Ok(builder.from_reader(BufReader::new(file)))
}

fn field<'a>(row: &'a csv::StringRecord, i: usize, name: &str) -> Result<&'a str, String> {
    row.get(i).ok_or_else(|| format!("missing column {name}"))
}

fn parse_field<T: std::str::FromStr>(
    row: &csv::StringRecord,
    i: usize,
    name: &str,
) -> Result<T, String> {
    let raw = field(row, i, name)?;
    raw.trim().parse().map_err(|_| format!("bad {name} {raw:?}"))
}

/// Parses every data row; malformed rows are logged with their line number and
/// skipped unless they exceed [`MAX_MALFORMED_FRACTION`] of the file.
fn read_rows<T>(
    path: &Path,
    delimiter: u8,
    mut parse: impl FnMut(&csv::StringRecord) -> Result<T, String>,
) -> Result<(Vec<T>, usize)> {
    let mut reader = csv_reader(path, delimiter)?;
    let mut out = Vec::new();
    let mut bad: Vec<(u64, String)> = Vec::new();
    let mut total = 0usize;
    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                total += 1;
                let line = record.position().map(|p| p.line()).unwrap_or(line);
                match parse(&record) {
                    Ok(v) => out.push(v),
                    Err(msg) => bad.push((line, msg)),
                }
            }
            Err(e) => {
                if let csv::ErrorKind::Io(_) = e.kind() {
                    return Err(Error::Data(format!("{}: {e}", path.display())));
                }
                total += 1;
                bad.push((line, e.to_string()));
            }
        }
    }
    for (line, msg) in bad.iter().take(20) {
        log::warn!("{}: line {line}: {msg}", path.display());
    }
    if !bad.is_empty() && bad.len() as f64 > MAX_MALFORMED_FRACTION * total as f64 {
        let (first_line, first_message) = bad[0].clone();
        return Err(Error::Malformed {
            file: path.to_path_buf(),
            malformed: bad.len(),
            total,
            first_line,
            first_message,
        });
    }
    Ok((out, bad.len()))
}
