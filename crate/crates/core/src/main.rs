use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tagclass::pipeline::{self, RunConfig, Stage};
use tagclass::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "tagclass", version, about = "One-class film classification from user tags")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    options: Options,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Read links, tags and IMDb basics; keep narrative films.
    Ingest,
    /// Canonicalize and stem tags; build the film-tag matrix.
    Normalize,
    /// Link strongly related tags and partition them into groups.
    Cluster,
    /// Compute normalized tag-group weights per film.
    Features,
    /// Split the labeled films into reference set and noise; pick thresholds.
    SelectThreshold,
    /// Classify unlabeled films against the reference set.
    Classify,
    /// Write the nearest-neighbor table and the era comparison.
    Report,
    /// Run every stage in order.
    Run {
        /// Stop after this stage (ingest, normalize, cluster, features, select-threshold, classify).
        #[arg(long, value_parser = parse_stage)]
        stop_after: Option<Stage>,
    },
}

fn parse_stage(s: &str) -> std::result::Result<Stage, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Every flag can also be given as `name = value` in the `--config` file,
/// which takes precedence.
#[derive(Args, Debug)]
struct Options {
    /// key = value file overriding the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// MovieLens links.csv.
    #[arg(long, global = true)]
    links: Option<PathBuf>,
    /// MovieLens tags.csv.
    #[arg(long, global = true)]
    tags: Option<PathBuf>,
    /// IMDb title.basics.tsv.
    #[arg(long, global = true)]
    basics: Option<PathBuf>,
    /// CSV `stale_imdb_id,new_imdb_id`; an empty new id excludes the film.
    #[arg(long, global = true)]
    id_overrides: Option<PathBuf>,
    /// CSV `tag,stem` of forced stems.
    #[arg(long, global = true)]
    stem_overrides: Option<PathBuf>,
    /// Newline-separated tags to remove; repeatable.
    #[arg(long = "stoplist", global = true)]
    stoplists: Vec<PathBuf>,
    /// Directory for all artifacts.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// `select`, or a fixed vector such as `1.26,0.43,0.43,0.43`.
    #[arg(long, global = true)]
    thresholds: Option<String>,
    #[arg(long, global = true)]
    min_users: Option<u32>,
    #[arg(long, global = true)]
    min_films: Option<u32>,
    #[arg(long, global = true)]
    min_tags: Option<usize>,
    /// Number of nearest neighbors.
    #[arg(long, global = true)]
    neighbors: Option<usize>,
    /// Cross-validation folds.
    #[arg(long, global = true)]
    folds: Option<usize>,
    /// Cross-validation repetitions.
    #[arg(long, global = true)]
    repetitions: Option<usize>,
    /// Run the finer second threshold grid (true/false).
    #[arg(long, global = true)]
    refine: Option<bool>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Largest tag component partitioned by exact search.
    #[arg(long, global = true)]
    exact_limit: Option<usize>,
    /// IMDb genre marking the labeled films.
    #[arg(long, global = true)]
    positive_genre: Option<String>,
    #[arg(long, global = true)]
    era_cutoff: Option<i32>,
    #[arg(long, global = true)]
    top_groups: Option<usize>,
}

fn text<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(T::to_string)
}

impl Options {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        let set = |c: &mut RunConfig, key: &str, value: Option<String>| match value {
            Some(v) => c.set(key, &v),
            None => Ok(()),
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        set(&mut c, "links", path(&self.links))?;
        set(&mut c, "tags", path(&self.tags))?;
        set(&mut c, "basics", path(&self.basics))?;
        set(&mut c, "id-overrides", path(&self.id_overrides))?;
        set(&mut c, "stem-overrides", path(&self.stem_overrides))?;
        set(&mut c, "out-dir", path(&self.out_dir))?;
        set(&mut c, "thresholds", self.thresholds.clone())?;
        set(&mut c, "min-users", text(&self.min_users))?;
        set(&mut c, "min-films", text(&self.min_films))?;
        set(&mut c, "min-tags", text(&self.min_tags))?;
        set(&mut c, "neighbors", text(&self.neighbors))?;
        set(&mut c, "folds", text(&self.folds))?;
        set(&mut c, "repetitions", text(&self.repetitions))?;
        set(&mut c, "refine", text(&self.refine))?;
        set(&mut c, "seed", text(&self.seed))?;
        set(&mut c, "exact-limit", text(&self.exact_limit))?;
        set(&mut c, "positive-genre", self.positive_genre.clone())?;
        set(&mut c, "era-cutoff", text(&self.era_cutoff))?;
        set(&mut c, "top-groups", text(&self.top_groups))?;
        if !self.stoplists.is_empty() {
            c.stoplists = self.stoplists.clone();
        }
        if let Some(file) = &self.config {
            c.apply_file(file)?;
        }
        Ok(c)
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let config = cli.options.resolve()?;
    let single = |stage: Stage| -> Result<()> {
        config.validate(&[stage])?;
        pipeline::run_stage(&config, stage)
    };
    match &cli.command {
        Command::Ingest => single(Stage::Ingest),
        Command::Normalize => single(Stage::Normalize),
        Command::Cluster => single(Stage::Cluster),
        Command::Features => single(Stage::Features),
        Command::SelectThreshold => single(Stage::SelectThreshold),
        Command::Classify => single(Stage::Classify),
        Command::Report => single(Stage::Report),
        Command::Run { stop_after } => {
            let summary = pipeline::run(&config, *stop_after)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
