use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use chattymaps::pipeline::{run, Manifest, RunConfig, Stage};
use chattymaps::{par, Error};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    IngestCheck,
    Assign,
    Taxonomy,
    SoundMap,
    EmotionMap,
    PerceptionMap,
    DiversityMap,
    ValidateNoise,
    Report,
}

impl From<Command> for Stage {
    fn from(c: Command) -> Stage {
        match c {
            Command::IngestCheck => Stage::IngestCheck,
            Command::Assign => Stage::Assign,
            Command::Taxonomy => Stage::Taxonomy,
            Command::SoundMap => Stage::SoundMap,
            Command::EmotionMap => Stage::EmotionMap,
            Command::PerceptionMap => Stage::PerceptionMap,
            Command::DiversityMap => Stage::DiversityMap,
            Command::ValidateNoise => Stage::ValidateNoise,
            Command::Report => Stage::Report,
        }
    }
}

/// Street-level sound, emotion, perception and diversity maps from photo tags.
///
/// Settings come from `--manifest` (TOML key = value), then CHATTYMAPS_SEED,
/// then the flags below; later sources win. Input paths may be `-` for stdin.
#[derive(Debug, Parser)]
#[command(name = "chattymaps", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML manifest; relative paths inside it are resolved from its directory.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory shared by all stages.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Photos as JSON lines.
    #[arg(long)]
    photos: Option<PathBuf>,
    /// Street segments as GeoJSON LineStrings.
    #[arg(long)]
    segments: Option<PathBuf>,
    #[arg(long)]
    sound_lexicon: Option<PathBuf>,
    #[arg(long)]
    emotion_lexicon: Option<PathBuf>,
    /// Sound taxonomy CSV; defaults to the output of `taxonomy`.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Noise levels per segment (day, evening, night, optional ewl).
    #[arg(long)]
    noise: Option<PathBuf>,
    /// Soundwalk questionnaire records.
    #[arg(long)]
    soundwalk: Option<PathBuf>,
    /// Community merges and labels applied after clustering.
    #[arg(long)]
    merge_map: Option<PathBuf>,
    /// Taxonomy category to soundwalk category weights.
    #[arg(long)]
    category_map: Option<PathBuf>,
    /// Capsule half-width around each segment, metres.
    #[arg(long)]
    buffer_m: Option<f64>,
    /// Projection reference as lon,lat.
    #[arg(long = "ref", value_parser = parse_ref)]
    reference: Option<[f64; 2]>,
    #[arg(long)]
    seed: Option<u64>,
    /// Communities larger than this are split by modularity refinement.
    #[arg(long)]
    size_threshold: Option<usize>,
    /// Segments with fewer matched tags get no dominant category.
    #[arg(long)]
    min_tags: Option<u64>,
    /// Frequency cut for the tag report.
    #[arg(long)]
    min_count: Option<u64>,
    /// Tag-count thresholds of the noise sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<u64>>,
    /// Collapse photos with identical owner, coordinates and tags.
    #[arg(long)]
    dedup_photos: bool,
    #[arg(long)]
    city: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn parse_ref(s: &str) -> Result<[f64; 2], String> {
    let (lon, lat) = s.split_once(',').ok_or("expected lon,lat")?;
    let lon: f64 = lon.trim().parse().map_err(|e| format!("lon: {e}"))?;
    let lat: f64 = lat.trim().parse().map_err(|e| format!("lat: {e}"))?;
    Ok([lon, lat])
}

fn env_seed() -> Result<Option<u64>, Error> {
    match std::env::var("CHATTYMAPS_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Input(format!("CHATTYMAPS_SEED is not an integer: `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn config(cli: Cli) -> Result<(Stage, RunConfig), Error> {
    let base = match &cli.manifest {
        Some(p) => Manifest::load(p)?,
        None => Manifest::default(),
    };
    let env = Manifest {
        seed: env_seed()?,
        ..Manifest::default()
    };
    let flags = Manifest {
        photos: cli.photos,
        segments: cli.segments,
        sound_lexicon: cli.sound_lexicon,
        emotion_lexicon: cli.emotion_lexicon,
        taxonomy: cli.taxonomy,
        noise: cli.noise,
        soundwalk: cli.soundwalk,
        merge_map: cli.merge_map,
        category_map: cli.category_map,
        out: cli.out,
        buffer_m: cli.buffer_m,
        reference: cli.reference,
        seed: cli.seed,
        size_threshold: cli.size_threshold,
        min_tags: cli.min_tags,
        min_count: cli.min_count,
        thresholds: cli.thresholds,
        dedup_photos: cli.dedup_photos.then_some(true),
        city: cli.city,
    };
    let cfg = RunConfig::from_manifest(base.overlay(env).overlay(flags))?;
    Ok((cli.command.into(), cfg))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    par::set_threads(cli.threads);
    let result = config(cli).and_then(|(stage, cfg)| run(stage, &cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
