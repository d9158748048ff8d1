//! The `chattymaps` subcommands.
//!
//! Every stage reads its inputs from the run configuration and the artifacts
//! of earlier stages from the output directory, and writes its own artifacts
//! plus a `manifest.<stage>.txt` record of the settings it ran with.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use serde_json::{json, Map};

use crate::categories::{Emotion, Perception, SoundCategory, WalkSound};
use crate::error::{Error, Result};
use crate::geo::{
    assign_photos, buffer_segments, dedup_photos, vertex_centroid, LocalProjection, ProjectedPoint, SegmentTagTable,
    SpatialIndex, DEFAULT_BUFFER_M,
};
use crate::ingest::{self, PhotoRecord, Rejection, StreetSegment};
use crate::layers::{
    correlate_columns, diversity, diversity_report, dominant_category, emotion_profiles, sound_profiles,
    street_type_average, zscores, CorrelationCell, EmotionLexicon, SoundProfile, DEFAULT_MIN_TAGS,
};
use crate::lexicon::{coverage_report, filter_by_frequency, matched_tags_histogram, normalize, Lexicon, Taxonomy};
use crate::output::{json6, line_feature, opt6, sig6, write_csv, write_feature_collection};
use crate::par::Exec;
use crate::perception::{
    conditional_probabilities, principal_components, segment_perception, soundwalk_cross_correlations, CategoryMap,
};
use crate::taxonomy::{
    apply_merge, build_cooccurrence, infomap_partition, louvain_refine, parse_merge_map, MergeMap,
    DEFAULT_SIZE_THRESHOLD,
};
use crate::validation::{ewl, noise_correlation_sweep, DEFAULT_THRESHOLDS};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_MIN_COUNT: u64 = 100;
const HISTOGRAM_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
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

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::IngestCheck,
        Stage::Assign,
        Stage::Taxonomy,
        Stage::SoundMap,
        Stage::EmotionMap,
        Stage::PerceptionMap,
        Stage::DiversityMap,
        Stage::ValidateNoise,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::IngestCheck => "ingest-check",
            Stage::Assign => "assign",
            Stage::Taxonomy => "taxonomy",
            Stage::SoundMap => "sound-map",
            Stage::EmotionMap => "emotion-map",
            Stage::PerceptionMap => "perception-map",
            Stage::DiversityMap => "diversity-map",
            Stage::ValidateNoise => "validate-noise",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown subcommand `{s}`"))
    }
}

/// Key-value run description. Every field is optional so that a manifest
/// file and command-line flags can be layered.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub photos: Option<PathBuf>,
    pub segments: Option<PathBuf>,
    pub sound_lexicon: Option<PathBuf>,
    pub emotion_lexicon: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub noise: Option<PathBuf>,
    pub soundwalk: Option<PathBuf>,
    pub merge_map: Option<PathBuf>,
    pub category_map: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub buffer_m: Option<f64>,
    /// Projection reference `[lon, lat]`; defaults to the mean segment vertex.
    #[serde(rename = "ref")]
    pub reference: Option<[f64; 2]>,
    pub seed: Option<u64>,
    pub size_threshold: Option<usize>,
    pub min_tags: Option<u64>,
    pub min_count: Option<u64>,
    pub thresholds: Option<Vec<u64>>,
    pub dedup_photos: Option<bool>,
    pub city: Option<String>,
}

impl Manifest {
    /// Reads a TOML manifest; relative paths are taken from the manifest's directory.
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest =
            toml::from_str(&text).map_err(|e| Error::Input(format!("manifest {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in m.paths_mut().into_iter().flatten() {
            if p.is_relative() && p.as_os_str() != "-" {
                *p = base.join(&*p);
            }
        }
        Ok(m)
    }

    fn paths_mut(&mut self) -> [&mut Option<PathBuf>; 10] {
        [
            &mut self.photos,
            &mut self.segments,
            &mut self.sound_lexicon,
            &mut self.emotion_lexicon,
            &mut self.taxonomy,
            &mut self.noise,
            &mut self.soundwalk,
            &mut self.merge_map,
            &mut self.category_map,
            &mut self.out,
        ]
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: Manifest) -> Manifest {
        Manifest {
            photos: over.photos.or(self.photos),
            segments: over.segments.or(self.segments),
            sound_lexicon: over.sound_lexicon.or(self.sound_lexicon),
            emotion_lexicon: over.emotion_lexicon.or(self.emotion_lexicon),
            taxonomy: over.taxonomy.or(self.taxonomy),
            noise: over.noise.or(self.noise),
            soundwalk: over.soundwalk.or(self.soundwalk),
            merge_map: over.merge_map.or(self.merge_map),
            category_map: over.category_map.or(self.category_map),
            out: over.out.or(self.out),
            buffer_m: over.buffer_m.or(self.buffer_m),
            reference: over.reference.or(self.reference),
            seed: over.seed.or(self.seed),
            size_threshold: over.size_threshold.or(self.size_threshold),
            min_tags: over.min_tags.or(self.min_tags),
            min_count: over.min_count.or(self.min_count),
            thresholds: over.thresholds.or(self.thresholds),
            dedup_photos: over.dedup_photos.or(self.dedup_photos),
            city: over.city.or(self.city),
        }
    }
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub photos: Option<PathBuf>,
    pub segments: Option<PathBuf>,
    pub sound_lexicon: Option<PathBuf>,
    pub emotion_lexicon: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub noise: Option<PathBuf>,
    pub soundwalk: Option<PathBuf>,
    pub merge_map: Option<PathBuf>,
    pub category_map: Option<PathBuf>,
    pub out: PathBuf,
    pub buffer_m: f64,
    pub reference: Option<[f64; 2]>,
    pub seed: u64,
    pub size_threshold: usize,
    pub min_tags: u64,
    pub min_count: u64,
    pub thresholds: Vec<u64>,
    pub dedup_photos: bool,
    pub city: String,
}

impl RunConfig {
    pub fn from_manifest(m: Manifest) -> Result<RunConfig> {
        let buffer_m = m.buffer_m.unwrap_or(DEFAULT_BUFFER_M);
        if !(buffer_m.is_finite() && buffer_m > 0.0) {
            return Err(Error::Input(format!("buffer_m must be positive, got {buffer_m}")));
        }
        let mut thresholds = m.thresholds.unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec());
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input("thresholds must be strictly ascending".into()));
        }
        thresholds.dedup();
        Ok(RunConfig {
            photos: m.photos,
            segments: m.segments,
            sound_lexicon: m.sound_lexicon,
            emotion_lexicon: m.emotion_lexicon,
            taxonomy: m.taxonomy,
            noise: m.noise,
            soundwalk: m.soundwalk,
            merge_map: m.merge_map,
            category_map: m.category_map,
            out: m.out.ok_or_else(|| Error::Input("no output directory: set `out` or pass --out".into()))?,
            buffer_m,
            reference: m.reference,
            seed: m.seed.unwrap_or(DEFAULT_SEED),
            size_threshold: m.size_threshold.unwrap_or(DEFAULT_SIZE_THRESHOLD),
            min_tags: m.min_tags.unwrap_or(DEFAULT_MIN_TAGS),
            min_count: m.min_count.unwrap_or(DEFAULT_MIN_COUNT),
            thresholds,
            dedup_photos: m.dedup_photos.unwrap_or(false),
            city: m.city.unwrap_or_else(|| "city".into()),
        })
    }

    /// `key = value` lines describing this run, in a fixed order.
    pub fn describe(&self, stage: Stage) -> String {
        let path = |p: &Option<PathBuf>| match p {
            Some(p) => format!("\"{}\"", p.display()),
            None => "none".into(),
        };
        let mut lines = vec![
            format!("tool = \"chattymaps {VERSION}\""),
            format!("stage = \"{stage}\""),
            format!("city = \"{}\"", self.city),
        ];
        for (k, v) in [
            ("photos", &self.photos),
            ("segments", &self.segments),
            ("sound_lexicon", &self.sound_lexicon),
            ("emotion_lexicon", &self.emotion_lexicon),
            ("taxonomy", &self.taxonomy),
            ("noise", &self.noise),
            ("soundwalk", &self.soundwalk),
            ("merge_map", &self.merge_map),
            ("category_map", &self.category_map),
        ] {
            lines.push(format!("{k} = {}", path(v)));
        }
        lines.push(format!("out = \"{}\"", self.out.display()));
        lines.push(format!("buffer_m = {}", sig6(self.buffer_m)));
        lines.push(format!(
            "ref = {}",
            self.reference
                .map(|[a, b]| format!("[{a}, {b}]"))
                .unwrap_or_else(|| "\"segment-vertex-mean\"".into())
        ));
        lines.push(format!("seed = {}", self.seed));
        lines.push(format!("size_threshold = {}", self.size_threshold));
        lines.push(format!("min_tags = {}", self.min_tags));
        lines.push(format!("min_count = {}", self.min_count));
        lines.push(format!(
            "thresholds = [{}]",
            self.thresholds.iter().map(u64::to_string).collect::<Vec<_>>().join(", ")
        ));
        lines.push(format!("dedup_photos = {}", self.dedup_photos));
        lines.join("\n") + "\n"
    }

    fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn input<'a>(&'a self, path: &'a Option<PathBuf>, key: &str, stage: Stage) -> Result<&'a Path> {
        path.as_deref()
            .ok_or_else(|| Error::Input(format!("`{stage}` needs input `{key}` (manifest key or --{})", key.replace('_', "-"))))
    }
}

/// Runs one stage and records its settings next to its artifacts.
pub fn run(stage: Stage, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    match stage {
        Stage::IngestCheck => ingest_check(cfg),
        Stage::Assign => assign(cfg),
        Stage::Taxonomy => taxonomy(cfg),
        Stage::SoundMap => sound_map(cfg),
        Stage::EmotionMap => emotion_map(cfg),
        Stage::PerceptionMap => perception_map(cfg),
        Stage::DiversityMap => diversity_map(cfg),
        Stage::ValidateNoise => validate_noise(cfg),
        Stage::Report => report(cfg),
    }?;
    let record = cfg.artifact(&format!("manifest.{stage}.txt"));
    std::fs::write(&record, cfg.describe(stage)).map_err(|e| Error::io(&record, e))
}

// ---------------------------------------------------------------------------
// Loading

/// `-` reads standard input.
fn open(path: &Path) -> Result<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(std::io::stdin())));
    }
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(Box::new(BufReader::new(f)))
}

fn report_rejects(path: &Path, rejects: &[Rejection]) {
    if rejects.is_empty() {
        return;
    }
    log::warn!("{}: {} records skipped", path.display(), rejects.len());
    for r in rejects {
        eprintln!("{r}");
    }
}

fn load_photos(cfg: &RunConfig, stage: Stage) -> Result<Vec<PhotoRecord>> {
    let path = cfg.input(&cfg.photos, "photos", stage)?;
    let parsed = ingest::parse_photos(open(path)?)?;
    report_rejects(path, &parsed.rejects);
    if cfg.dedup_photos {
        let kept = dedup_photos(&parsed.records);
        log::info!("dedup: {} of {} photos kept", kept.len(), parsed.records.len());
        return Ok(kept);
    }
    Ok(parsed.records)
}

fn load_segments(cfg: &RunConfig, stage: Stage) -> Result<Vec<StreetSegment>> {
    let path = cfg.input(&cfg.segments, "segments", stage)?;
    let parsed = ingest::parse_segments(open(path)?)?;
    report_rejects(path, &parsed.rejects);
    Ok(parsed.records)
}

fn load_lexicon(path: &Path, name: &str) -> Result<Lexicon> {
    let (file, rejects) = ingest::parse_lexicon(name, open(path)?)?;
    report_rejects(path, &rejects);
    Lexicon::from_file(&file)
}

fn read_taxonomy(path: &Path) -> Result<Taxonomy> {
    let parsed = ingest::parse_taxonomy_rows(open(path)?)?;
    report_rejects(path, &parsed.rejects);
    Taxonomy::from_rows(parsed.records)
}

/// The taxonomy input wins; otherwise the artifact of the `taxonomy` stage.
fn resolve_taxonomy(cfg: &RunConfig) -> Result<Taxonomy> {
    if let Some(path) = &cfg.taxonomy {
        return read_taxonomy(path);
    }
    let artifact = cfg.artifact("taxonomy.csv");
    if !artifact.exists() {
        return Err(Error::MissingArtifact {
            stage: "taxonomy",
            path: artifact,
        });
    }
    read_taxonomy(&artifact)
}

fn projection(cfg: &RunConfig, segments: &[StreetSegment]) -> Result<LocalProjection> {
    Ok(match cfg.reference {
        Some([lon, lat]) => LocalProjection::new(lon, lat),
        None => LocalProjection::centroid_of(segments)?,
    })
}

/// Per-segment tags written by `assign`, in segment order.
fn read_segment_table(cfg: &RunConfig) -> Result<SegmentTagTable> {
    let photos_path = cfg.artifact("segment_photos.csv");
    let tags_path = cfg.artifact("segment_tags.csv");
    for p in [&photos_path, &tags_path] {
        if !p.exists() {
            return Err(Error::MissingArtifact {
                stage: "assign",
                path: p.clone(),
            });
        }
    }
    let bad = |p: &Path, e: &dyn fmt::Display| Error::Input(format!("{}: {e}", p.display()));
    let mut rows: Vec<crate::geo::SegmentRow> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut rdr = csv::Reader::from_reader(open(&photos_path)?);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(&photos_path, &e))?;
        let count: u64 = rec[1].parse().map_err(|e| bad(&photos_path, &e))?;
        index.insert(rec[0].to_string(), rows.len());
        rows.push((rec[0].to_string(), count, Vec::new()));
    }
    let mut rdr = csv::Reader::from_reader(open(&tags_path)?);
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(&tags_path, &e))?;
        let s = *index
            .get(&rec[0])
            .ok_or_else(|| bad(&tags_path, &format!("unknown segment `{}`", &rec[0])))?;
        let n: u64 = rec[2].parse().map_err(|e| bad(&tags_path, &e))?;
        rows[s].2.push((rec[1].to_string(), n));
    }
    let unassigned = read_summary_value(&cfg.artifact("assign_summary.csv"), "unassigned_photos").unwrap_or(0);
    Ok(SegmentTagTable::from_rows(rows, unassigned))
}

fn read_summary_value(path: &Path, key: &str) -> Option<u64> {
    let mut rdr = csv::Reader::from_reader(File::open(path).ok()?);
    rdr.records()
        .filter_map(|r| r.ok())
        .find(|r| &r[0] == key)
        .and_then(|r| r[1].parse().ok())
}

/// Segments input aligned with the assignment table.
struct SegmentContext {
    segments: Vec<StreetSegment>,
    locations: Vec<ProjectedPoint>,
    table: SegmentTagTable,
}

fn segment_context(cfg: &RunConfig, stage: Stage) -> Result<SegmentContext> {
    let table = read_segment_table(cfg)?;
    let segments = load_segments(cfg, stage)?;
    if segments.len() != table.segments.len()
        || segments.iter().zip(&table.segments).any(|(a, b)| a.segment_id != b.segment_id)
    {
        return Err(Error::Input(
            "segments input does not match the assignment artifacts; rerun `chattymaps assign`".into(),
        ));
    }
    let proj = projection(cfg, &segments)?;
    let locations = segments
        .iter()
        .map(|s| vertex_centroid(&proj.project_polyline(&s.polyline)))
        .collect();
    Ok(SegmentContext {
        segments,
        locations,
        table,
    })
}

fn sound_lexicon_of(tax: &Taxonomy) -> Result<crate::lexicon::SoundLexicon> {
    tax.sound_categories()
}

// ---------------------------------------------------------------------------
// Stages

fn ingest_check(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::IngestCheck;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut row = |input: &str, records: usize, rejects: &[Rejection]| {
        rows.push(vec![input.to_string(), records.to_string(), rejects.len().to_string()]);
    };
    if let Some(path) = &cfg.photos {
        let p = ingest::parse_photos(open(path)?)?;
        report_rejects(path, &p.rejects);
        row("photos", p.records.len(), &p.rejects);
    }
    if let Some(path) = &cfg.segments {
        let p = ingest::parse_segments(open(path)?)?;
        report_rejects(path, &p.rejects);
        row("segments", p.records.len(), &p.rejects);
    }
    for (name, path) in [("sound_lexicon", &cfg.sound_lexicon), ("emotion_lexicon", &cfg.emotion_lexicon)] {
        if let Some(path) = path {
            let (file, rejects) = ingest::parse_lexicon(name, open(path)?)?;
            report_rejects(path, &rejects);
            Lexicon::from_file(&file)?;
            row(name, file.entries.len(), &rejects);
        }
    }
    if let Some(path) = &cfg.taxonomy {
        let p = ingest::parse_taxonomy_rows(open(path)?)?;
        report_rejects(path, &p.rejects);
        row("taxonomy", p.records.len(), &p.rejects);
    }
    if let Some(path) = &cfg.noise {
        let p = ingest::parse_noise(open(path)?)?;
        report_rejects(path, &p.rejects);
        row("noise", p.records.len(), &p.rejects);
    }
    if let Some(path) = &cfg.soundwalk {
        let p = ingest::parse_soundwalk(open(path)?)?;
        report_rejects(path, &p.rejects);
        row("soundwalk", p.records.len(), &p.rejects);
    }
    if rows.is_empty() {
        return Err(Error::Input(format!("`{stage}` found no inputs to check")));
    }
    write_csv(&cfg.artifact("ingest_report.csv"), &["input", "records", "rejected"], rows)
}

fn assign(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::Assign;
    let segments = load_segments(cfg, stage)?;
    let photos = load_photos(cfg, stage)?;
    let proj = projection(cfg, &segments)?;
    let index = SpatialIndex::build(buffer_segments(&segments, &proj, cfg.buffer_m)?);
    let table = assign_photos(&photos, &index, &proj);

    write_csv(
        &cfg.artifact("segment_photos.csv"),
        &["segment_id", "photo_count", "tag_total"],
        table
            .segments
            .iter()
            .map(|s| vec![s.segment_id.clone(), s.photo_count.to_string(), s.tag_total().to_string()]),
    )?;
    write_csv(
        &cfg.artifact("segment_tags.csv"),
        &["segment_id", "tag", "count"],
        (0..table.segments.len()).flat_map(|s| {
            let id = &table.segments[s].segment_id;
            table.tags_of(s).map(move |(t, n)| vec![id.clone(), t.to_string(), n.to_string()])
        }),
    )?;
    let with_photos = table.segments.iter().filter(|s| s.photo_count > 0).count();
    write_csv(
        &cfg.artifact("assign_summary.csv"),
        &["key", "value"],
        [
            ("photos", photos.len().to_string()),
            ("assigned_photos", (photos.len() as u64 - table.unassigned).to_string()),
            ("unassigned_photos", table.unassigned.to_string()),
            ("segments", segments.len().to_string()),
            ("segments_with_photos", with_photos.to_string()),
            ("tags", table.total_tags().to_string()),
            ("reference_lon", format!("{}", proj.ref_lon)),
            ("reference_lat", format!("{}", proj.ref_lat)),
            ("buffer_m", sig6(cfg.buffer_m)),
        ]
        .into_iter()
        .map(|(k, v)| vec![k.to_string(), v]),
    )
}

fn taxonomy(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::Taxonomy;
    let photos = load_photos(cfg, stage)?;
    let lexicon = load_lexicon(cfg.input(&cfg.sound_lexicon, "sound_lexicon", stage)?, "sound")?;
    let co = build_cooccurrence(&photos, &lexicon);
    if co.words.is_empty() {
        return Err(Error::Input("no photo carries a sound-lexicon term; nothing to cluster".into()));
    }
    let graph = co.graph();
    let top = infomap_partition(&graph, cfg.seed)?;
    let hierarchy = louvain_refine(&graph, &top, cfg.size_threshold, cfg.seed)?;
    let merges = match &cfg.merge_map {
        Some(path) => parse_merge_map(open(path)?)?,
        None => MergeMap::default(),
    };
    let tax = apply_merge(&co.words, &hierarchy, &merges)?;
    log::info!(
        "{} words, {} edges, {} top-level communities",
        co.words.len(),
        co.edges.len(),
        top.community_count()
    );

    write_csv(
        &cfg.artifact("cooccurrence.csv"),
        &["word1", "word2", "weight"],
        co.edges
            .iter()
            .map(|&(i, j, w)| vec![co.words[i].clone(), co.words[j].clone(), w.to_string()]),
    )?;
    write_csv(
        &cfg.artifact("partition.csv"),
        &["word", "community_path"],
        co.words
            .iter()
            .enumerate()
            .map(|(i, w)| vec![w.clone(), hierarchy.key_path(i).join("/")]),
    )?;
    write_csv(
        &cfg.artifact("taxonomy.csv"),
        &["term", "path"],
        tax.to_rows().into_iter().map(|(t, p)| vec![t, p]),
    )
}

fn cell_rows(cells: &[CorrelationCell]) -> impl Iterator<Item = Vec<String>> + '_ {
    cells.iter().map(|c| {
        vec![
            c.row.clone(),
            c.column.clone(),
            opt6(c.rho),
            c.n.to_string(),
            opt6(c.n_eff),
            opt6(c.p),
        ]
    })
}

const CELL_HEADER: [&str; 6] = ["row", "column", "rho", "n", "n_eff", "p"];

fn category_names() -> Vec<&'static str> {
    SoundCategory::ALL.iter().map(|c| c.as_str()).collect()
}

fn columns_of<const K: usize>(rows: &[[f64; K]], names: &[&str]) -> Vec<(String, Vec<f64>)> {
    (0..K)
        .map(|k| (names[k].to_string(), rows.iter().map(|r| r[k]).collect()))
        .collect()
}

fn sound_map(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::SoundMap;
    let tax = resolve_taxonomy(cfg)?;
    let ctx = segment_context(cfg, stage)?;
    let lexicon = sound_lexicon_of(&tax)?;
    let profiles = sound_profiles(&ctx.table, &lexicon, Exec::default());
    let fractions: Vec<[f64; 6]> = profiles.iter().map(SoundProfile::fractions).collect();
    let z = zscores(&fractions)?;
    let names = category_names();

    let mut header = vec!["segment_id"];
    header.extend(&names);
    header.push("tag_total");
    write_csv(
        &cfg.artifact("sound_profiles.csv"),
        &header,
        profiles.iter().zip(&fractions).map(|(p, f)| {
            let mut row = vec![p.segment_id.clone()];
            row.extend(f.iter().map(|&v| sig6(v)));
            row.push(p.tag_total.to_string());
            row
        }),
    )?;

    let dominant: Vec<_> = profiles
        .iter()
        .zip(&z.z)
        .map(|(p, zr)| dominant_category(zr, p.tag_total, cfg.min_tags))
        .collect();
    let mut header = vec!["segment_id".to_string()];
    header.extend(names.iter().map(|n| format!("z_{n}")));
    header.push("dominant".into());
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        &cfg.artifact("zscores.csv"),
        &header_ref,
        profiles.iter().zip(&z.z).zip(&dominant).map(|((p, zr), d)| {
            let mut row = vec![p.segment_id.clone()];
            row.extend(zr.iter().map(|&v| sig6(v)));
            row.push(d.to_string());
            row
        }),
    )?;
    write_csv(
        &cfg.artifact("zscore_summary.csv"),
        &["category", "mean", "sd", "degenerate"],
        SoundCategory::ALL.iter().map(|c| {
            let k = c.index();
            vec![c.to_string(), sig6(z.mean[k]), sig6(z.sd[k]), z.degenerate[k].to_string()]
        }),
    )?;

    let types: Vec<_> = profiles.iter().map(|p| ctx.segments[p.segment].street_type).collect();
    write_csv(
        &cfg.artifact("type_averages.csv"),
        &["category", "street_type", "n", "mean", "ci_low", "ci_high"],
        street_type_average(&z.z, &types).into_iter().map(|a| {
            vec![
                a.category.to_string(),
                a.street_type.to_string(),
                a.n.to_string(),
                sig6(a.mean),
                opt6(a.ci.map(|c| c.0)),
                opt6(a.ci.map(|c| c.1)),
            ]
        }),
    )?;

    let locations: Vec<ProjectedPoint> = profiles.iter().map(|p| ctx.locations[p.segment]).collect();
    let columns = columns_of(&fractions, &names);
    let cells = if profiles.len() >= crate::layers::MIN_SHARED_SEGMENTS {
        correlate_columns(&columns, &columns, &locations, Exec::default())?
    } else {
        log::warn!("fewer than {} profiled segments; category correlations skipped", crate::layers::MIN_SHARED_SEGMENTS);
        Vec::new()
    };
    write_csv(&cfg.artifact("category_correlations.csv"), &CELL_HEADER, cell_rows(&cells))?;

    let features = profiles
        .iter()
        .zip(&fractions)
        .zip(&dominant)
        .map(|((p, f), d)| {
            let mut props = Map::new();
            props.insert("segment_id".into(), json!(p.segment_id));
            props.insert("dominant".into(), json!(d.to_string()));
            props.insert("tag_total".into(), json!(p.tag_total));
            props.insert("diversity".into(), json6(diversity(f)));
            for c in SoundCategory::ALL {
                props.insert(c.as_str().into(), json6(f[c.index()]));
            }
            line_feature(&ctx.segments[p.segment].polyline, props)
        })
        .collect();
    write_feature_collection(&cfg.artifact("sound_map.geojson"), features)
}

fn emotion_map(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::EmotionMap;
    let ctx = segment_context(cfg, stage)?;
    let lexicon = EmotionLexicon::from_lexicon(&load_lexicon(
        cfg.input(&cfg.emotion_lexicon, "emotion_lexicon", stage)?,
        "emotion",
    )?);
    let profiles = emotion_profiles(&ctx.table, &lexicon, Exec::default());
    let fractions: Vec<[f64; 8]> = profiles.iter().map(|p| p.fractions()).collect();
    let z = zscores(&fractions)?;
    let names: Vec<&str> = Emotion::ALL.iter().map(|e| e.as_str()).collect();

    let mut header: Vec<String> = vec!["segment_id".into()];
    header.extend(names.iter().map(|n| n.to_string()));
    header.extend(names.iter().map(|n| format!("z_{n}")));
    header.push("tag_total".into());
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        &cfg.artifact("emotion_profiles.csv"),
        &header_ref,
        profiles.iter().zip(&fractions).zip(&z.z).map(|((p, f), zr)| {
            let mut row = vec![p.segment_id.clone()];
            row.extend(f.iter().map(|&v| sig6(v)));
            row.extend(zr.iter().map(|&v| sig6(v)));
            row.push(p.tag_total.to_string());
            row
        }),
    )?;

    // Correlate with the sound layer over the segments where both are defined.
    let tax = match resolve_taxonomy(cfg) {
        Err(Error::MissingArtifact { .. }) => {
            log::warn!("no taxonomy yet; sound-emotion correlations skipped (run `chattymaps taxonomy`)");
            return Ok(());
        }
        other => other?,
    };
    let sound = sound_profiles(&ctx.table, &sound_lexicon_of(&tax)?, Exec::default());
    let sound_z = zscores(&sound.iter().map(SoundProfile::fractions).collect::<Vec<_>>())?;
    let emotion_row: HashMap<usize, usize> = profiles.iter().enumerate().map(|(i, p)| (p.segment, i)).collect();
    let shared: Vec<(usize, usize)> = sound
        .iter()
        .enumerate()
        .filter_map(|(i, p)| emotion_row.get(&p.segment).map(|&j| (i, j)))
        .collect();
    let sound_cols = columns_of(
        &shared.iter().map(|&(i, _)| sound_z.z[i]).collect::<Vec<_>>(),
        &category_names(),
    );
    let emotion_cols = columns_of(&shared.iter().map(|&(_, j)| z.z[j]).collect::<Vec<_>>(), &names);
    let locations: Vec<ProjectedPoint> = shared.iter().map(|&(i, _)| ctx.locations[sound[i].segment]).collect();
    let cells = correlate_columns(&sound_cols, &emotion_cols, &locations, Exec::default())?;
    write_csv(&cfg.artifact("sound_emotion_correlations.csv"), &CELL_HEADER, cell_rows(&cells))
}

fn perception_map(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::PerceptionMap;
    let tax = resolve_taxonomy(cfg)?;
    let ctx = segment_context(cfg, stage)?;
    let walk_path = cfg.input(&cfg.soundwalk, "soundwalk", stage)?;
    let walks = ingest::parse_soundwalk(open(walk_path)?)?;
    report_rejects(walk_path, &walks.rejects);
    let records = walks.records;
    let map = match &cfg.category_map {
        Some(path) => CategoryMap::parse(open(path)?)?,
        None => CategoryMap::default(),
    };

    let table = conditional_probabilities(&records)?;
    let mut rows = Vec::new();
    for c in WalkSound::ALL {
        for f in Perception::ALL {
            let (ci, fi) = (c.index(), f.index());
            rows.push(vec![
                c.to_string(),
                f.to_string(),
                table.q4_sound[ci].to_string(),
                table.q4_perception[fi].to_string(),
                table.q4_joint[ci][fi].to_string(),
                table.q4_sound_total().to_string(),
                table.q4_perception_total().to_string(),
                sig6(table.p_sound[ci]),
                sig6(table.p_perception[fi]),
                sig6(table.p_sound_given_perception[ci][fi]),
                sig6(table.p_perception_given_sound[ci][fi]),
            ]);
        }
    }
    write_csv(
        &cfg.artifact("perception_table.csv"),
        &[
            "sound",
            "perception",
            "q4_sound",
            "q4_perception",
            "q4_joint",
            "q4_sound_total",
            "q4_perception_total",
            "p_sound",
            "p_perception",
            "p_sound_given_perception",
            "p_perception_given_sound",
        ],
        rows,
    )?;

    let corr = soundwalk_cross_correlations(&records)?;
    let mut rows = Vec::new();
    let sound_names: Vec<&str> = WalkSound::ALL.iter().map(|c| c.as_str()).collect();
    let perception_names: Vec<&str> = Perception::ALL.iter().map(|f| f.as_str()).collect();
    for (kind, names, m) in [
        ("sound", &sound_names, &corr.sounds),
        ("perception", &perception_names, &corr.perceptions),
    ] {
        for (i, a) in names.iter().enumerate() {
            for (j, b) in names.iter().enumerate() {
                rows.push(vec![kind.to_string(), a.to_string(), b.to_string(), opt6(m[i][j])]);
            }
        }
    }
    write_csv(&cfg.artifact("soundwalk_correlations.csv"), &["kind", "row", "column", "rho"], rows)?;

    let pca = principal_components(&records)?;
    let mut header = vec!["component", "variance", "explained"];
    header.extend(&perception_names);
    write_csv(
        &cfg.artifact("pca.csv"),
        &header,
        (0..Perception::COUNT).map(|k| {
            let mut row = vec![(k + 1).to_string(), sig6(pca.variances[k]), sig6(pca.explained[k])];
            row.extend(pca.components[k].iter().map(|&v| sig6(v)));
            row
        }),
    )?;

    let profiles = sound_profiles(&ctx.table, &sound_lexicon_of(&tax)?, Exec::default());
    let results = Exec::default().map(&profiles, |p| {
        segment_perception(&p.fractions(), p.tag_total, &table, &map, cfg.min_tags)
    });
    let features = profiles
        .iter()
        .zip(&results)
        .map(|(p, r)| {
            let mut props = Map::new();
            props.insert("segment_id".into(), json!(p.segment_id));
            props.insert(
                "argmax".into(),
                json!(r.argmax.map(|f| f.to_string()).unwrap_or_else(|| "insufficient".into())),
            );
            props.insert("degenerate".into(), json!(r.degenerate));
            for f in Perception::ALL {
                props.insert(format!("p_{f}"), json6(r.p[f.index()]));
            }
            line_feature(&ctx.segments[p.segment].polyline, props)
        })
        .collect();
    write_feature_collection(&cfg.artifact("perception_map.geojson"), features)
}

fn diversity_map(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::DiversityMap;
    let tax = resolve_taxonomy(cfg)?;
    let ctx = segment_context(cfg, stage)?;
    let profiles = sound_profiles(&ctx.table, &sound_lexicon_of(&tax)?, Exec::default());
    let values: Vec<f64> = profiles.iter().map(|p| diversity(&p.fractions())).collect();
    write_csv(
        &cfg.artifact("diversity.csv"),
        &["segment_id", "diversity", "tag_total"],
        profiles
            .iter()
            .zip(&values)
            .map(|(p, &h)| vec![p.segment_id.clone(), sig6(h), p.tag_total.to_string()]),
    )?;
    let rep = diversity_report(&profiles, HISTOGRAM_BINS);
    write_csv(
        &cfg.artifact("diversity_histogram.csv"),
        &["lower", "upper", "segments"],
        rep.histogram
            .iter()
            .map(|&(lo, hi, n)| vec![sig6(lo), sig6(hi), n.to_string()]),
    )?;
    write_csv(
        &cfg.artifact("diversity_by_tags.csv"),
        &["min_tags", "segments", "mean_diversity"],
        rep.by_tags
            .iter()
            .map(|&(edge, n, m)| vec![edge.to_string(), n.to_string(), sig6(m)]),
    )?;
    write_csv(
        &cfg.artifact("diversity_summary.csv"),
        &["key", "value"],
        [
            vec!["segments".to_string(), rep.segments.to_string()],
            vec!["zero_diversity_fraction".to_string(), sig6(rep.zero_fraction)],
        ],
    )?;
    let features = profiles
        .iter()
        .zip(&values)
        .map(|(p, &h)| {
            let mut props = Map::new();
            props.insert("segment_id".into(), json!(p.segment_id));
            props.insert("diversity".into(), json6(h));
            props.insert("tag_total".into(), json!(p.tag_total));
            line_feature(&ctx.segments[p.segment].polyline, props)
        })
        .collect();
    write_feature_collection(&cfg.artifact("diversity_map.geojson"), features)
}

fn validate_noise(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::ValidateNoise;
    let tax = resolve_taxonomy(cfg)?;
    let ctx = segment_context(cfg, stage)?;
    let noise_path = cfg.input(&cfg.noise, "noise", stage)?;
    let noise = ingest::parse_noise(open(noise_path)?)?;
    report_rejects(noise_path, &noise.rejects);

    let by_id: HashMap<&str, &ingest::NoiseRecord> =
        noise.records.iter().map(|r| (r.segment_id.as_str(), r)).collect();
    let mut ewl_rows = Vec::new();
    for r in &noise.records {
        let (value, source) = match r.ewl {
            Some(v) => (v, "file"),
            None => (ewl(r.l_day, r.l_evening, r.l_night), "computed"),
        };
        ewl_rows.push(vec![r.segment_id.clone(), sig6(value), source.to_string()]);
    }
    write_csv(&cfg.artifact("ewl.csv"), &["segment_id", "ewl", "source"], ewl_rows)?;

    let profiles = sound_profiles(&ctx.table, &sound_lexicon_of(&tax)?, Exec::default());
    let matched: Vec<(&SoundProfile, &ingest::NoiseRecord)> = profiles
        .iter()
        .filter_map(|p| by_id.get(p.segment_id.as_str()).map(|r| (p, *r)))
        .collect();
    if matched.len() < profiles.len() {
        log::warn!("{} profiled segments have no noise level", profiles.len() - matched.len());
    }
    let fractions: Vec<[f64; 6]> = matched.iter().map(|(p, _)| p.fractions()).collect();
    let totals: Vec<u64> = matched.iter().map(|(p, _)| p.tag_total).collect();
    let locations: Vec<ProjectedPoint> = matched.iter().map(|(p, _)| ctx.locations[p.segment]).collect();
    let sweep = |levels: Vec<f64>| {
        noise_correlation_sweep(&fractions, &totals, &levels, &locations, &cfg.thresholds, Exec::default())
    };
    let point_row = |p: &crate::validation::SweepPoint| {
        vec![
            p.threshold.to_string(),
            p.category.to_string(),
            opt6(p.rho),
            p.n.to_string(),
            opt6(p.n_eff),
            opt6(p.p),
        ]
    };

    let ewl_levels = matched
        .iter()
        .map(|(_, r)| r.ewl.unwrap_or_else(|| ewl(r.l_day, r.l_evening, r.l_night)))
        .collect();
    write_csv(
        &cfg.artifact("noise_correlation.csv"),
        &["N", "category", "rho", "n", "n_eff", "p"],
        sweep(ewl_levels).iter().map(point_row),
    )?;

    let mut rows = Vec::new();
    for (period, pick) in [
        ("day", (|r: &ingest::NoiseRecord| r.l_day) as fn(&ingest::NoiseRecord) -> f64),
        ("evening", |r| r.l_evening),
        ("night", |r| r.l_night),
    ] {
        for p in sweep(matched.iter().map(|(_, r)| pick(r)).collect()) {
            let mut row = vec![period.to_string()];
            row.extend(point_row(&p));
            rows.push(row);
        }
    }
    write_csv(
        &cfg.artifact("noise_correlation_periods.csv"),
        &["period", "N", "category", "rho", "n", "n_eff", "p"],
        rows,
    )
}

fn report(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::Report;
    let table = read_segment_table(cfg)?;
    let photos = load_photos(cfg, stage)?;
    let mut lexicons = Vec::new();
    if let Some(p) = &cfg.sound_lexicon {
        lexicons.push(load_lexicon(p, "sound")?);
    }
    if let Some(p) = &cfg.emotion_lexicon {
        lexicons.push(load_lexicon(p, "emotion")?);
    }
    let refs: Vec<&Lexicon> = lexicons.iter().collect();
    write_csv(
        &cfg.artifact("coverage.csv"),
        &["city", "lexicon", "matched_tags", "photos_with_match", "segments_with_match"],
        coverage_report(&photos, &table, &refs).into_iter().map(|r| {
            vec![
                cfg.city.clone(),
                r.lexicon,
                r.matched_tags.to_string(),
                r.photos_with_match.to_string(),
                r.segments_with_match.to_string(),
            ]
        }),
    )?;
    let mut rows = Vec::new();
    for lex in &lexicons {
        for (matched, segments) in matched_tags_histogram(&table, lex) {
            rows.push(vec![lex.name.clone(), matched.to_string(), segments.to_string()]);
        }
    }
    write_csv(&cfg.artifact("tag_histogram.csv"), &["lexicon", "matched_tags", "segments"], rows)?;

    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for p in &photos {
        for t in p.tags.iter().filter_map(|t| normalize(t)) {
            *counts.entry(t).or_default() += 1;
        }
    }
    let filter = filter_by_frequency(&counts, cfg.min_count);
    write_csv(
        &cfg.artifact("frequent_tags.csv"),
        &["tag", "count"],
        filter.kept.iter().map(|t| vec![t.clone(), counts[t].to_string()]),
    )?;
    write_csv(
        &cfg.artifact("tag_volume.csv"),
        &["key", "value"],
        [
            vec!["distinct_tags".to_string(), counts.len().to_string()],
            vec!["tag_volume".to_string(), counts.values().sum::<u64>().to_string()],
            vec!["min_count".to_string(), cfg.min_count.to_string()],
            vec!["kept_tags".to_string(), filter.kept.len().to_string()],
            vec!["retained_fraction".to_string(), sig6(filter.retained_fraction)],
        ],
    )?;

    // Every correlation matrix produced so far, in one file.
    let sources = [
        ("sound-map", "category", "category_correlations.csv"),
        ("emotion-map", "sound_emotion", "sound_emotion_correlations.csv"),
        ("perception-map", "soundwalk", "soundwalk_correlations.csv"),
        ("validate-noise", "noise", "noise_correlation.csv"),
    ];
    let mut rows = Vec::new();
    for (_, matrix, file) in sources {
        let path = cfg.artifact(file);
        if !path.exists() {
            continue;
        }
        let mut rdr = csv::Reader::from_reader(open(&path)?);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?
            .iter()
            .map(String::from)
            .collect();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
            let get = |k: &str| header.iter().position(|h| h == k).map(|i| rec[i].to_string());
            let (row, column) = match matrix {
                "noise" => (format!("ewl@N={}", get("N").unwrap_or_default()), get("category").unwrap_or_default()),
                "soundwalk" => (
                    format!("{}:{}", get("kind").unwrap_or_default(), get("row").unwrap_or_default()),
                    get("column").unwrap_or_default(),
                ),
                _ => (get("row").unwrap_or_default(), get("column").unwrap_or_default()),
            };
            let na = || "NA".to_string();
            rows.push(vec![
                matrix.to_string(),
                row,
                column,
                get("rho").unwrap_or_else(na),
                get("n").unwrap_or_else(na),
                get("n_eff").unwrap_or_else(na),
                get("p").unwrap_or_else(na),
            ]);
        }
    }
    if rows.is_empty() {
        return Err(Error::MissingArtifact {
            stage: "sound-map",
            path: cfg.artifact("category_correlations.csv"),
        });
    }
    write_csv(
        &cfg.artifact("correlations.csv"),
        &["matrix", "row", "column", "rho", "n", "n_eff", "p"],
        rows,
    )
}
