use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::knn::ThresholdVector;

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Normalize,
    Cluster,
    Features,
    SelectThreshold,
    Classify,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Normalize,
        Stage::Cluster,
        Stage::Features,
        Stage::SelectThreshold,
        Stage::Classify,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Normalize => "normalize",
            Stage::Cluster => "cluster",
            Stage::Features => "features",
            Stage::SelectThreshold => "select-threshold",
            Stage::Classify => "classify",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage {s:?}")))
    }
}

/// Either a fixed threshold vector or cross-validated selection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ThresholdSpec {
    Select,
    Fixed(ThresholdVector),
}

impl FromStr for ThresholdSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "select" {
            Ok(ThresholdSpec::Select)
        } else {
            ThresholdVector::parse(s).map(ThresholdSpec::Fixed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub links: Option<PathBuf>,
    pub tags: Option<PathBuf>,
    pub basics: Option<PathBuf>,
    pub id_overrides: Option<PathBuf>,
    /// `tag,stem` table added to the built-in stem overrides.
    pub stem_overrides: Option<PathBuf>,
    pub stoplists: Vec<PathBuf>,
    pub out_dir: PathBuf,
    pub thresholds: ThresholdSpec,
    pub min_users: u32,
    pub min_films: u32,
    pub min_tags: usize,
    pub neighbors: usize,
    pub folds: usize,
    pub repetitions: usize,
    pub refine: bool,
    pub seed: u64,
    /// Components up to this many tags are partitioned exactly.
    pub exact_limit: usize,
    /// IMDb genre that marks positive training films.
    pub positive_genre: String,
    pub era_cutoff: i32,
    pub top_groups: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            links: None,
            tags: None,
            basics: None,
            id_overrides: None,
            stem_overrides: None,
            stoplists: Vec::new(),
            out_dir: PathBuf::from("out"),
            thresholds: ThresholdSpec::Select,
            min_users: 10,
            min_films: 10,
            min_tags: 5,
            neighbors: 3,
            folds: 5,
            repetitions: 100,
            refine: true,
            seed: 0,
            exact_limit: crate::cluster::modularity::DEFAULT_EXACT_LIMIT,
            positive_genre: "Film-Noir".into(),
            era_cutoff: 1960,
            top_groups: 5,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config(format!("{key}: expected true or false, got {other:?}"))),
    }
}

impl RunConfig {
    /// Sets one option by its flag name (`min-users` and `min_users` both work).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let path = || Some(PathBuf::from(value.trim()));
        match key.trim().replace('_', "-").as_str() {
            "links" => self.links = path(),
            "tags" => self.tags = path(),
            "basics" => self.basics = path(),
            "id-overrides" => self.id_overrides = path(),
            "stem-overrides" => self.stem_overrides = path(),
            "stoplist" | "stoplists" => {
                self.stoplists = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(PathBuf::from)
                    .collect()
            }
            "out-dir" => self.out_dir = PathBuf::from(value.trim()),
            "thresholds" => self.thresholds = value.parse()?,
            "min-users" => self.min_users = parse_num(key, value)?,
            "min-films" => self.min_films = parse_num(key, value)?,
            "min-tags" => self.min_tags = parse_num(key, value)?,
            "neighbors" => self.neighbors = parse_num(key, value)?,
            "folds" => self.folds = parse_num(key, value)?,
            "repetitions" => self.repetitions = parse_num(key, value)?,
            "refine" => self.refine = parse_bool(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "exact-limit" => self.exact_limit = parse_num(key, value)?,
            "positive-genre" => self.positive_genre = value.trim().to_string(),
            "era-cutoff" => self.era_cutoff = parse_num(key, value)?,
            "top-groups" => self.top_groups = parse_num(key, value)?,
            other => return Err(Error::Config(format!("unknown option {other:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file. Blank lines and `#` comments are ignored;
    /// relative paths are resolved against the file's directory.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{}:{}: expected key = value", path.display(), n + 1))
            })?;
            let before = self.clone();
            self.set(key, value)
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), n + 1)))?;
            self.rebase_paths(&before, base);
        }
        Ok(())
    }

    /// Makes paths that changed since `before` relative to `base`.
    fn rebase_paths(&mut self, before: &RunConfig, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for (now, was) in [
            (&mut self.links, &before.links),
            (&mut self.tags, &before.tags),
            (&mut self.basics, &before.basics),
            (&mut self.id_overrides, &before.id_overrides),
            (&mut self.stem_overrides, &before.stem_overrides),
        ] {
            if now != was {
                if let Some(p) = now.as_mut() {
                    fix(p);
                }
            }
        }
        if self.stoplists != before.stoplists {
            self.stoplists.iter_mut().for_each(fix);
        }
        if self.out_dir != before.out_dir {
            fix(&mut self.out_dir);
        }
    }

    /// Checks numeric ranges and that the files needed by `stages` exist.
    pub fn validate(&self, stages: &[Stage]) -> Result<()> {
        let positive = [
            ("min-tags", self.min_tags),
            ("neighbors", self.neighbors),
            ("repetitions", self.repetitions),
            ("exact-limit", self.exact_limit),
            ("top-groups", self.top_groups),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        if self.positive_genre.is_empty() {
            return Err(Error::Config("positive-genre is empty".into()));
        }
        if let ThresholdSpec::Fixed(t) = &self.thresholds {
            t.validate()?;
            if t.distances.len() != self.neighbors {
                return Err(Error::Config(format!(
                    "thresholds {t} have {} distance bounds but neighbors = {}",
                    t.distances.len(),
                    self.neighbors
                )));
            }
        }
        let require = |name: &str, p: &Option<PathBuf>| -> Result<()> {
            match p {
                None => Err(Error::Config(format!("--{name} is required"))),
                Some(p) if !p.is_file() => Err(Error::Config(format!("{name} file {} not found", p.display()))),
                Some(_) => Ok(()),
            }
        };
        let optional = |name: &str, p: &Option<PathBuf>| -> Result<()> {
            match p {
                Some(p) if !p.is_file() => Err(Error::Config(format!("{name} file {} not found", p.display()))),
                _ => Ok(()),
            }
        };
        if stages.contains(&Stage::Ingest) {
            require("links", &self.links)?;
            require("tags", &self.tags)?;
            require("basics", &self.basics)?;
            optional("id-overrides", &self.id_overrides)?;
        }
        if stages.contains(&Stage::Normalize) || stages.contains(&Stage::Report) {
            optional("stem-overrides", &self.stem_overrides)?;
        }
        if stages.contains(&Stage::Normalize) {
            for s in &self.stoplists {
                if !s.is_file() {
                    return Err(Error::Config(format!("stoplist {} not found", s.display())));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_accept_both_spellings() {
        let mut c = RunConfig::default();
        c.set("min_users", "3").unwrap();
        c.set("min-films", "4").unwrap();
        c.set("thresholds", "1.26, 0.43, 0.43, 0.43").unwrap();
        c.set("stoplist", "a.txt, b.txt").unwrap();
        assert_eq!((c.min_users, c.min_films), (3, 4));
        assert_eq!(c.stoplists.len(), 2);
        assert!(matches!(c.thresholds, ThresholdSpec::Fixed(_)));
        assert_eq!(c.set("bogus", "1").unwrap_err().exit_code(), 2);
        assert_eq!(c.set("seed", "x").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn file_overrides_and_rebases_paths() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.conf");
        fs::write(&cfg, "# comment\nseed = 9\nlinks = data/links.csv\n\nrefine=false\n").unwrap();
        let mut c = RunConfig { seed: 1, ..Default::default() };
        c.apply_file(&cfg).unwrap();
        assert_eq!(c.seed, 9);
        assert!(!c.refine);
        assert_eq!(c.links, Some(dir.path().join("data/links.csv")));

        fs::write(&cfg, "seed 9\n").unwrap();
        assert_eq!(c.apply_file(&cfg).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn validation() {
        let c = RunConfig::default();
        assert!(c.validate(&[Stage::Cluster]).is_ok());
        assert_eq!(c.validate(&[Stage::Ingest]).unwrap_err().exit_code(), 2);
        let bad = RunConfig { folds: 1, ..Default::default() };
        assert!(bad.validate(&[]).is_err());
        let mismatched = RunConfig {
            thresholds: "1.0,0.4".parse().unwrap(),
            ..Default::default()
        };
        assert!(mismatched.validate(&[]).is_err());
        assert_eq!("select-threshold".parse::<Stage>().unwrap(), Stage::SelectThreshold);
    }
}
