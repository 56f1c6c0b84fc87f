//! Tag canonicalization, stemming and the binary film-tag matrix.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory as Gc};

use crate::error::{Error, Result};
use crate::ingest::TagApplication;

fn is_punct_or_symbol(c: char) -> bool {
    matches!(
        get_general_category(c),
        Gc::ConnectorPunctuation
            | Gc::DashPunctuation
            | Gc::OpenPunctuation
            | Gc::ClosePunctuation
            | Gc::InitialPunctuation
            | Gc::FinalPunctuation
            | Gc::OtherPunctuation
            | Gc::MathSymbol
            | Gc::CurrencySymbol
            | Gc::ModifierSymbol
            | Gc::OtherSymbol
    )
}

/// Lowercases, deletes punctuation and symbols, and collapses whitespace.
/// Returns `None` when nothing is left.
pub fn canonicalize(raw: &str) -> Option<String> {
    let stripped: String = raw
        .chars()
        .flat_map(char::to_lowercase)
        .filter(|&c| !is_punct_or_symbol(c))
        .collect();
    let joined = stripped.split_whitespace().collect::<Vec<_>>().join(" ");
    (!joined.is_empty()).then_some(joined)
}

/// Forced stems applied unless a loaded table says otherwise. The stemmer
/// would otherwise send "heroine" to the stem of "heroin".
pub fn default_stem_overrides() -> BTreeMap<String, String> {
    BTreeMap::from([("heroine".to_string(), "heroine".to_string())])
}

/// Word-by-word English (Porter2) stemming with a table of forced stems.
pub struct TagStemmer {
    stemmer: Stemmer,
    overrides: BTreeMap<String, String>,
}

impl std::fmt::Debug for TagStemmer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TagStemmer").field("overrides", &self.overrides).finish()
    }
}

impl TagStemmer {
    pub fn new(overrides: BTreeMap<String, String>) -> Self {
        TagStemmer {
            stemmer: Stemmer::create(Algorithm::English),
            overrides,
        }
    }

    /// Reads a `tag,stem` CSV with a header row. Both columns are canonicalized.
    pub fn load_overrides(path: &Path) -> Result<BTreeMap<String, String>> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Config(format!("{}: {other:?}", path.display())),
        })?;
        let mut out = BTreeMap::new();
        for row in reader.records() {
            let row = row.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let tag = row.get(0).and_then(canonicalize);
            let stem = row.get(1).and_then(canonicalize);
            match (tag, stem) {
                (Some(t), Some(s)) => {
                    out.insert(t, s);
                }
                _ => {
                    return Err(Error::Config(format!(
                        "{}: override row {:?} has an empty field",
                        path.display(),
                        row
                    )))
                }
            }
        }
        Ok(out)
    }

    pub fn overrides(&self) -> &BTreeMap<String, String> {
        &self.overrides
    }

    /// A whole-tag override wins; otherwise each word is looked up in the
    /// override table and stemmed if absent.
    pub fn stem(&self, canonical: &str) -> String {
        if let Some(forced) = self.overrides.get(canonical) {
            return forced.clone();
        }
        canonical
            .split(' ')
            .map(|w| match self.overrides.get(w) {
                Some(forced) => forced.clone(),
                None => self.stemmer.stem(w).into_owned(),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Maps raw tag text to canonical text, canonical text to stems, and stems to
/// a display label.
#[derive(Debug)]
pub struct StemLexicon {
    canonical_of: BTreeMap<String, String>,
    stem_of: BTreeMap<String, String>,
    label_of: BTreeMap<String, String>,
    /// Applications per canonical text; drives label choice.
    usage: BTreeMap<String, u64>,
    /// Stems absorbed by space-variant merging, mapped to the surviving key.
    merged_into: BTreeMap<String, String>,
    stemmer: TagStemmer,
    dropped_raw: BTreeSet<String>,
}

impl StemLexicon {
    /// Builds a lexicon over every raw tag in `apps`.
    pub fn build(apps: &[TagApplication], stemmer: TagStemmer) -> Self {
        let mut canonical_of = BTreeMap::new();
        let mut usage: BTreeMap<String, u64> = BTreeMap::new();
        let mut dropped_raw = BTreeSet::new();
        for a in apps {
            let canonical = match canonical_of.get(&a.raw_tag) {
                Some(c) => Some(String::clone(c)),
                None if dropped_raw.contains(&a.raw_tag) => None,
                None => match canonicalize(&a.raw_tag) {
                    Some(c) => {
                        canonical_of.insert(a.raw_tag.clone(), c.clone());
                        Some(c)
                    }
                    None => {
                        dropped_raw.insert(a.raw_tag.clone());
                        None
                    }
                },
            };
            if let Some(c) = canonical {
                *usage.entry(c).or_default() += 1;
            }
        }
        if !dropped_raw.is_empty() {
            log::info!("{} raw tags are empty after canonicalization", dropped_raw.len());
        }
        let stem_of = usage.keys().map(|c| (c.clone(), stemmer.stem(c))).collect();
        let mut lexicon = StemLexicon {
            canonical_of,
            stem_of,
            label_of: BTreeMap::new(),
            usage,
            merged_into: BTreeMap::new(),
            stemmer,
            dropped_raw,
        };
        lexicon.relabel();
        lexicon
    }

    /// The label of a stem is its most used canonical text, ties broken by
    /// lexicographic order.
    fn relabel(&mut self) {
        let mut best: BTreeMap<&str, (&str, u64)> = BTreeMap::new();
        for (canonical, stem) in &self.stem_of {
            let n = self.usage.get(canonical).copied().unwrap_or(0);
            best.entry(stem.as_str())
                .and_modify(|cur| {
                    if n > cur.1 {
                        *cur = (canonical.as_str(), n);
                    }
                })
                .or_insert((canonical.as_str(), n));
        }
        self.label_of = best
            .into_iter()
            .map(|(s, (c, _))| (s.to_string(), c.to_string()))
            .collect();
    }

    /// Merges stems that coincide once spaces are deleted ("anti hero" and
    /// "antihero"). The lexicographically smallest stem key survives. Returns
    /// the number of stems absorbed.
    pub fn merge_space_variants(&mut self) -> usize {
        let mut by_squashed: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for stem in self.label_of.keys() {
            by_squashed.entry(stem.replace(' ', "")).or_default().insert(stem.clone());
        }
        let mut absorbed = 0;
        for variants in by_squashed.values().filter(|v| v.len() > 1) {
            let mut it = variants.iter();
            let keep = it.next().expect("nonempty").clone();
            for other in it {
                log::info!("merging space variant {other:?} into {keep:?}");
                self.merged_into.insert(other.clone(), keep.clone());
                absorbed += 1;
            }
        }
        if absorbed > 0 {
            for stem in self.stem_of.values_mut() {
                if let Some(target) = self.merged_into.get(stem) {
                    *stem = target.clone();
                }
            }
            self.relabel();
        }
        absorbed
    }

    pub fn canonical_of(&self, raw: &str) -> Option<&str> {
        self.canonical_of.get(raw).map(String::as_str)
    }

    pub fn stem_of(&self, canonical: &str) -> Option<&str> {
        self.stem_of.get(canonical).map(String::as_str)
    }

    pub fn label_of(&self, stem: &str) -> Option<&str> {
        self.label_of.get(stem).map(String::as_str)
    }

    pub fn stem_of_raw(&self, raw: &str) -> Option<&str> {
        self.canonical_of(raw).and_then(|c| self.stem_of(c))
    }

    /// Resolves arbitrary text (e.g. a stoplist entry) to a stem key using the
    /// same rules as the corpus, including space-variant merges.
    pub fn stem_key_for(&self, text: &str) -> Option<String> {
        let canonical = canonicalize(text)?;
        if let Some(s) = self.stem_of.get(&canonical) {
            return Some(s.clone());
        }
        let stem = self.stemmer.stem(&canonical);
        Some(self.merged_into.get(&stem).cloned().unwrap_or(stem))
    }

    pub fn stems(&self) -> impl Iterator<Item = &str> {
        self.label_of.keys().map(String::as_str)
    }

    pub fn n_stems(&self) -> usize {
        self.label_of.len()
    }

    pub fn dropped_raw(&self) -> &BTreeSet<String> {
        &self.dropped_raw
    }

    /// Rows of the audit dump `raw,canonical,stem,label`, sorted by raw text.
    pub fn dump_rows(&self) -> Vec<[&str; 4]> {
        self.canonical_of
            .iter()
            .map(|(raw, c)| {
                let stem = self.stem_of[c].as_str();
                [raw.as_str(), c.as_str(), stem, self.label_of[stem].as_str()]
            })
            .collect()
    }
}

/// A set of stem keys to remove from the matrix.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stoplist {
    pub stems: BTreeSet<String>,
}

impl Stoplist {
    /// Reads a newline-delimited list; blank lines and `#` comments are skipped.
    /// Entries are resolved to stem keys through `lexicon`.
    pub fn load(path: &Path, lexicon: &StemLexicon) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Stoplist::from_entries(text.lines(), lexicon))
    }

    pub fn from_entries<'a>(entries: impl IntoIterator<Item = &'a str>, lexicon: &StemLexicon) -> Self {
        let stems = entries
            .into_iter()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(|l| lexicon.stem_key_for(l))
            .collect();
        Stoplist { stems }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixParams {
    /// A stem is kept only if strictly more distinct users applied it.
    pub min_users: u32,
    /// A stem is kept only if it is on strictly more distinct films.
    pub min_films: u32,
}

impl Default for MatrixParams {
    fn default() -> Self {
        MatrixParams {
            min_users: 10,
            min_films: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagInfo {
    pub stem: String,
    pub label: String,
    pub user_count: u32,
    pub film_count: u32,
}

/// Sparse binary film-by-tag incidence. Rows are films in ascending item id,
/// columns are stems in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct FilmTagMatrix {
    film_ids: Vec<u32>,
    tags: Vec<TagInfo>,
    rows: Vec<Vec<u32>>,
}

impl FilmTagMatrix {
    /// Validates and assembles a matrix. `rows[i]` holds the sorted tag ids of
    /// film `film_ids[i]`.
    pub fn from_parts(film_ids: Vec<u32>, tags: Vec<TagInfo>, rows: Vec<Vec<u32>>) -> Result<Self> {
        if film_ids.len() != rows.len() {
            return Err(Error::Contract("film id and row counts differ".into()));
        }
        if film_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Contract("film ids must be strictly increasing".into()));
        }
        for (film, row) in film_ids.iter().zip(&rows) {
            if row.is_empty() {
                return Err(Error::Contract(format!("film {film} has no tags")));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&t| t as usize >= tags.len()) {
                return Err(Error::Contract(format!("film {film} has an invalid tag row")));
            }
        }
        Ok(FilmTagMatrix {
            film_ids,
            tags,
            rows,
        })
    }

    pub fn n_films(&self) -> usize {
        self.film_ids.len()
    }

    pub fn n_tags(&self) -> usize {
        self.tags.len()
    }

    pub fn film_ids(&self) -> &[u32] {
        &self.film_ids
    }

    pub fn tags(&self) -> &[TagInfo] {
        &self.tags
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn row_of_item(&self, item_id: u32) -> Option<usize> {
        self.film_ids.binary_search(&item_id).ok()
    }

    pub fn tag_by_stem(&self, stem: &str) -> Option<u32> {
        self.tags
            .binary_search_by(|t| t.stem.as_str().cmp(stem))
            .ok()
            .map(|i| i as u32)
    }

    /// Inverted index: for each tag, the sorted row indices of its films.
    pub fn columns(&self) -> Vec<Vec<u32>> {
        let mut cols = vec![Vec::new(); self.tags.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for &t in row {
                cols[t as usize].push(i as u32);
            }
        }
        cols
    }

    pub fn n_entries(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixStats {
    pub stems_total: usize,
    pub stems_after_thresholds: usize,
    pub films_after_thresholds: usize,
    pub stems_stoplisted: usize,
    pub n_films: usize,
    pub n_tags: usize,
}

/// Per-stem distinct user and film counts over the raw applications.
pub fn stem_counts(apps: &[TagApplication], lexicon: &StemLexicon) -> BTreeMap<String, (u32, u32)> {
    let mut users: HashMap<&str, HashSet<u32>> = HashMap::new();
    let mut films: HashMap<&str, HashSet<u32>> = HashMap::new();
    for a in apps {
        if let Some(stem) = lexicon.stem_of_raw(&a.raw_tag) {
            users.entry(stem).or_default().insert(a.user_id);
            films.entry(stem).or_default().insert(a.item_id);
        }
    }
    users
        .into_iter()
        .map(|(s, u)| (s.to_string(), (u.len() as u32, films[s].len() as u32)))
        .collect()
}

/// Applies the frequency thresholds (on pre-filter counts, all at once) and
/// the stoplists, then drops films left without tags.
pub fn build_matrix(
    apps: &[TagApplication],
    lexicon: &StemLexicon,
    params: MatrixParams,
    stoplists: &[&Stoplist],
) -> Result<(FilmTagMatrix, MatrixStats)> {
    let counts = stem_counts(apps, lexicon);
    let mut stats = MatrixStats {
        stems_total: counts.len(),
        ..Default::default()
    };

    let passing: BTreeMap<&str, (u32, u32)> = counts
        .iter()
        .filter(|(_, &(u, f))| u > params.min_users && f > params.min_films)
        .map(|(s, &c)| (s.as_str(), c))
        .collect();
    stats.stems_after_thresholds = passing.len();
    stats.films_after_thresholds = apps
        .iter()
        .filter(|a| lexicon.stem_of_raw(&a.raw_tag).is_some_and(|s| passing.contains_key(s)))
        .map(|a| a.item_id)
        .collect::<HashSet<_>>()
        .len();

    let kept: Vec<(&str, (u32, u32))> = passing
        .into_iter()
        .filter(|(s, _)| !stoplists.iter().any(|l| l.stems.contains(*s)))
        .collect();
    stats.stems_stoplisted = stats.stems_after_thresholds - kept.len();

    let tag_id: HashMap<&str, u32> = kept.iter().enumerate().map(|(i, (s, _))| (*s, i as u32)).collect();
    let tags: Vec<TagInfo> = kept
        .iter()
        .map(|(s, (u, f))| TagInfo {
            stem: s.to_string(),
            label: lexicon.label_of(s).unwrap_or(s).to_string(),
            user_count: *u,
            film_count: *f,
        })
        .collect();

    let mut by_film: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
    for a in apps {
        if let Some(&t) = lexicon.stem_of_raw(&a.raw_tag).and_then(|s| tag_id.get(s)) {
            by_film.entry(a.item_id).or_default().insert(t);
        }
    }
    if by_film.is_empty() || tags.is_empty() {
        return Err(Error::Data(format!(
            "film-tag matrix is empty after filtering: {} stems seen, {} pass the user/film thresholds (> {} users, > {} films), {} remain after stoplists",
            stats.stems_total, stats.stems_after_thresholds, params.min_users, params.min_films, kept.len()
        )));
    }
    let (film_ids, rows): (Vec<u32>, Vec<Vec<u32>>) = by_film
        .into_iter()
        .map(|(f, ts)| (f, ts.into_iter().collect()))
        .unzip();
    stats.n_films = film_ids.len();
    stats.n_tags = tags.len();
    log::info!(
        "film-tag matrix: {} stems total, {} pass thresholds, {} stoplisted; N = {}, L = {}",
        stats.stems_total,
        stats.stems_after_thresholds,
        stats.stems_stoplisted,
        stats.n_films,
        stats.n_tags
    );
    Ok((FilmTagMatrix::from_parts(film_ids, tags, rows)?, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn app(user: u32, item: u32, tag: &str) -> TagApplication {
        TagApplication {
            user_id: user,
            item_id: item,
            raw_tag: tag.to_string(),
            timestamp: 0,
        }
    }

    fn plain_stemmer() -> TagStemmer {
        TagStemmer::new(BTreeMap::new())
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(canonicalize("funny!").as_deref(), Some("funny"));
        assert_eq!(canonicalize("NOIR").as_deref(), Some("noir"));
        assert_eq!(canonicalize("  art   house ").as_deref(), Some("art house"));
        assert_eq!(canonicalize("art-house").as_deref(), Some("arthouse"));
        assert_eq!(canonicalize("Palme d'Or").as_deref(), Some("palme dor"));
        assert_eq!(canonicalize("1800s").as_deref(), Some("1800s"));
        assert_eq!(canonicalize("$$ + !!"), None);
        assert_eq!(canonicalize("   "), None);
    }

    proptest! {
        #[test]
        fn canonicalize_is_idempotent(raw in "\\PC{0,24}") {
            if let Some(once) = canonicalize(&raw) {
                prop_assert_eq!(canonicalize(&once), Some(once.clone()));
            }
        }
    }

    #[test]
    fn stems_follow_porter_family() {
        let s = plain_stemmer();
        assert_eq!(s.stem("zombies"), "zombi");
        assert_eq!(s.stem("zombie"), "zombi");
        assert_ne!(s.stem("wolf"), s.stem("wolves"));
        assert_eq!(s.stem("art house"), "art hous");
        // Without an override the two words collide.
        assert_eq!(s.stem("heroine"), s.stem("heroin"));
    }

    #[test]
    fn override_separates_heroine_from_heroin() {
        let s = TagStemmer::new([("heroine".to_string(), "heroine".to_string())].into());
        assert_eq!(s.stem("heroine"), "heroine");
        assert_eq!(s.stem("strong heroine"), "strong heroine");
        assert_eq!(s.stem("heroin addiction"), "heroin addict");
        assert_eq!(s.stem("heroin"), "heroin");
    }

    #[test]
    fn labels_pick_most_used_form() {
        let apps = vec![
            app(1, 1, "zombies"),
            app(2, 1, "Zombies!"),
            app(3, 2, "zombie"),
        ];
        let lex = StemLexicon::build(&apps, plain_stemmer());
        assert_eq!(lex.stem_of_raw("Zombies!"), Some("zombi"));
        assert_eq!(lex.label_of("zombi"), Some("zombies"));
        assert_eq!(lex.n_stems(), 1);
    }

    #[test]
    fn space_variants_merge() {
        let apps = vec![
            app(1, 1, "anti hero"),
            app(1, 2, "antihero"),
            app(1, 3, "art house"),
            app(1, 3, "arthouse"),
            app(1, 3, "art-house"),
            app(1, 4, "noir"),
        ];
        let mut lex = StemLexicon::build(&apps, plain_stemmer());
        assert_eq!(lex.n_stems(), 5);
        assert_eq!(lex.merge_space_variants(), 2);
        assert_eq!(lex.n_stems(), 3);
        assert_eq!(lex.stem_of_raw("antihero"), lex.stem_of_raw("anti hero"));
        let house = lex.stem_of_raw("art house").unwrap();
        assert_eq!(lex.stem_of_raw("arthouse"), Some(house));
        assert_eq!(lex.stem_of_raw("art-house"), Some(house));
        assert_eq!(lex.stem_of_raw("noir"), Some("noir"));
        assert_eq!(lex.stem_key_for("Anti-Hero").as_deref(), lex.stem_of_raw("antihero"));
        let label = lex.label_of(house).unwrap();
        assert!(["art house", "arthouse"].contains(&label));
    }

    #[test]
    fn noir_alone_unchanged() {
        let mut lex = StemLexicon::build(&[app(1, 1, "noir")], plain_stemmer());
        assert_eq!(lex.merge_space_variants(), 0);
        assert_eq!(lex.stem_of_raw("noir"), Some("noir"));
    }

    /// 12 users tag 12 films "alpha"; 12 users tag 5 films "beta".
    fn threshold_fixture() -> Vec<TagApplication> {
        let mut apps = Vec::new();
        for u in 0..12 {
            apps.push(app(u, u, "alpha"));
            apps.push(app(u, u % 5, "beta"));
        }
        apps
    }

    #[test]
    fn film_threshold_removes_beta() {
        let apps = threshold_fixture();
        let lex = StemLexicon::build(&apps, plain_stemmer());
        let (m, stats) = build_matrix(&apps, &lex, MatrixParams::default(), &[]).unwrap();
        assert_eq!(m.tags().iter().map(|t| t.stem.as_str()).collect::<Vec<_>>(), vec!["alpha"]);
        assert_eq!(m.n_films(), 12);
        assert_eq!(stats.stems_total, 2);
        assert_eq!(m.tags()[0].user_count, 12);
        assert_eq!(m.tags()[0].film_count, 12);
    }

    #[test]
    fn user_threshold_removes_few_user_tag() {
        // 3 users over 50 films
        let apps: Vec<_> = (0..50).map(|f| app(f % 3, f, "rare")).collect();
        let lex = StemLexicon::build(&apps, plain_stemmer());
        let err = build_matrix(&apps, &lex, MatrixParams::default(), &[]).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn stoplists_match_on_stem_keys() {
        let mut apps = threshold_fixture();
        for u in 0..12 {
            apps.push(app(u, u, "In Netflix queue"));
        }
        let lex = StemLexicon::build(&apps, plain_stemmer());
        let stop = Stoplist::from_entries(["# personal", "in netflix queue"], &lex);
        let (m, stats) = build_matrix(&apps, &lex, MatrixParams::default(), &[&stop]).unwrap();
        assert_eq!(m.n_tags(), 1);
        assert_eq!(stats.stems_stoplisted, 1);
    }

    #[test]
    fn filtering_order_does_not_matter() {
        // Thresholds use pre-filter counts, so any sequential order of the three
        // filters selects the same stems.
        let mut apps = threshold_fixture();
        for u in 0..15 {
            apps.push(app(u, 20 + u, "gamma"));
            apps.push(app(u % 4, 40 + u, "delta"));
            apps.push(app(u, 60 + u, "oscar"));
        }
        let params = MatrixParams::default();
        let lex = StemLexicon::build(&apps, plain_stemmer());
        let stop = Stoplist::from_entries(["oscar"], &lex);
        let counts = stem_counts(&apps, &lex);
        type Filter<'a> = Box<dyn Fn(&str) -> bool + 'a>;
        let filters: Vec<Filter> = vec![
            Box::new(|s| counts[s].0 > params.min_users),
            Box::new(|s| counts[s].1 > params.min_films),
            Box::new(|s| !stop.stems.contains(s)),
        ];
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let (m, _) = build_matrix(&apps, &lex, params, &[&stop]).unwrap();
        let expected: Vec<&str> = m.tags().iter().map(|t| t.stem.as_str()).collect();
        assert_eq!(expected, vec!["alpha", "gamma"]);
        for p in perms {
            let mut stems: Vec<&str> = counts.keys().map(String::as_str).collect();
            for &i in &p {
                stems.retain(|s| filters[i](s));
            }
            assert_eq!(stems, expected, "order {p:?}");
        }
    }

    #[test]
    fn matrix_invariants() {
        let mut apps = threshold_fixture();
        apps.push(app(0, 0, "alpha")); // duplicate application stays binary
        let lex = StemLexicon::build(&apps, plain_stemmer());
        let (m, _) = build_matrix(&apps, &lex, MatrixParams { min_users: 1, min_films: 1 }, &[]).unwrap();
        for row in m.rows() {
            assert!(!row.is_empty());
            assert!(row.windows(2).all(|w| w[0] < w[1]));
        }
        let cols = m.columns();
        for (t, col) in m.tags().iter().zip(&cols) {
            assert_eq!(col.len() as u32, t.film_count);
        }
        assert_eq!(m.tag_by_stem("beta"), Some(1));
    }
}
