//! Synthetic inputs with planted structure: a grid city with sound regimes
//! and noise levels, soundwalk questionnaires and community graphs.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::categories::{Perception, SoundCategory, WalkSound};
use crate::geo::{LocalProjection, ProjectedPoint};
use crate::ingest::{PhotoRecord, SoundwalkRecord, StreetSegment, StreetType};
use crate::lexicon::{Lexicon, Taxonomy};
use crate::taxonomy::Graph;

/// Toy sound lexicon: five terms per top-level category.
pub const SOUND_TERMS: [(&str, SoundCategory); 30] = {
    use SoundCategory::*;
    [
        ("car", Transport),
        ("traffic", Transport),
        ("bus", Transport),
        ("horn", Transport),
        ("train", Transport),
        ("drill", Mechanical),
        ("construction", Mechanical),
        ("engine", Mechanical),
        ("siren", Mechanical),
        ("fan", Mechanical),
        ("laughter", Human),
        ("voices", Human),
        ("footsteps", Human),
        ("crowd", Human),
        ("children", Human),
        ("guitar", Music),
        ("concert", Music),
        ("band", Music),
        ("piano", Music),
        ("singing", Music),
        ("bird", Nature),
        ("birdsong", Nature),
        ("wind", Nature),
        ("water", Nature),
        ("leaves", Nature),
        ("kitchen", Indoor),
        ("doorbell", Indoor),
        ("television", Indoor),
        ("clock", Indoor),
        ("radio", Indoor),
    ]
};

/// Toy emotion lexicon over the eight primary emotions.
pub const EMOTION_TERMS: [(&str, &[&str]); 20] = [
    ("party", &["joy", "anticipation"]),
    ("friends", &["joy", "trust"]),
    ("celebration", &["joy", "surprise"]),
    ("sunshine", &["joy"]),
    ("wedding", &["joy", "trust", "anticipation"]),
    ("accident", &["fear", "sadness", "surprise"]),
    ("danger", &["fear"]),
    ("dark", &["fear", "sadness"]),
    ("storm", &["fear", "anger"]),
    ("protest", &["anger", "anticipation"]),
    ("riot", &["anger", "fear"]),
    ("garbage", &["disgust"]),
    ("dirty", &["disgust"]),
    ("graffiti", &["disgust", "anger"]),
    ("funeral", &["sadness"]),
    ("lonely", &["sadness"]),
    ("market", &["anticipation", "trust"]),
    ("family", &["trust", "joy"]),
    ("surprise", &["surprise"]),
    ("police", &["trust", "fear"]),
];

/// Tags that match no lexicon.
pub const FILLER_TAGS: [&str; 8] = ["street", "city", "architecture", "travel", "urban", "night", "building", "square"];

pub fn sound_lexicon() -> Lexicon {
    let labels: Vec<[&str; 1]> = SOUND_TERMS.iter().map(|(_, c)| [c.as_str()]).collect();
    Lexicon::from_pairs("sound", SOUND_TERMS.iter().zip(&labels).map(|((t, _), l)| (*t, &l[..])))
}

pub fn emotion_lexicon() -> Lexicon {
    Lexicon::from_pairs("emotion", EMOTION_TERMS)
}

/// Every toy sound term under its own category.
pub fn sound_taxonomy() -> Taxonomy {
    Taxonomy::from_rows(SOUND_TERMS.iter().map(|(t, c)| (t.to_string(), vec![c.as_str().to_string()])))
        .expect("toy taxonomy is well formed")
}

fn terms_of(c: SoundCategory) -> impl Iterator<Item = &'static str> {
    SOUND_TERMS.iter().filter(move |(_, k)| *k == c).map(|(t, _)| *t)
}

fn pick(weights: &[f64], rng: &mut impl Rng) -> usize {
    let mut u = rng.gen::<f64>() * weights.iter().sum::<f64>();
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Layout and planted signal of a synthetic grid city.
#[derive(Debug, Clone, PartialEq)]
pub struct CityConfig {
    pub cols: usize,
    pub rows: usize,
    /// Length of every (west-east) segment, meters.
    pub segment_length_m: f64,
    pub spacing_x_m: f64,
    pub spacing_y_m: f64,
    /// Grid origin, `[lon, lat]`.
    pub origin: [f64; 2],
    /// Photos per segment, inclusive range.
    pub photos: (usize, usize),
    /// Share of sound tags drawn from the segment's regime category.
    pub regime_share: f64,
    /// EWL = base + slope·(expected transport share) + N(0, σ).
    pub ewl_base: f64,
    pub ewl_slope: f64,
    pub ewl_sigma: f64,
    pub seed: u64,
}

impl Default for CityConfig {
    /// 20×20 grid of 80 m segments, six regimes in 3×2 blocks.
    fn default() -> Self {
        CityConfig {
            cols: 20,
            rows: 20,
            segment_length_m: 80.0,
            spacing_x_m: 150.0,
            spacing_y_m: 150.0,
            origin: [2.17, 41.39],
            photos: (4, 20),
            regime_share: 0.7,
            ewl_base: 55.0,
            ewl_slope: 15.0,
            ewl_sigma: 2.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCity {
    pub segments: Vec<StreetSegment>,
    pub photos: Vec<PhotoRecord>,
    /// Planted regime of each segment.
    pub regimes: Vec<SoundCategory>,
    /// Expected share of transport tags per segment.
    pub transport_share: Vec<f64>,
    /// Planted EWL per segment, dB.
    pub ewl: Vec<f64>,
}

/// Regime of the grid cell at (`col`, `row`): six blocks, three across and two down.
pub fn regime_of(col: usize, row: usize, cols: usize, rows: usize) -> SoundCategory {
    let block = (row * 2 / rows) * 3 + col * 3 / cols;
    SoundCategory::ALL[block]
}

fn street_type_for(regime: SoundCategory, rng: &mut impl Rng) -> StreetType {
    use SoundCategory::*;
    let options: &[StreetType] = match regime {
        Transport => &[StreetType::Primary, StreetType::Secondary],
        Mechanical => &[StreetType::Construction, StreetType::Tertiary],
        Human | Music => &[StreetType::Pedestrian, StreetType::Footway],
        Nature => &[StreetType::Track, StreetType::Footway],
        Indoor => &[StreetType::Residential],
    };
    options[rng.gen_range(0..options.len())]
}

/// Lon/lat of a point placed uniformly near the axis of a segment, well
/// inside a 22.5 m buffer.
fn segment_geometry(cfg: &CityConfig, col: usize, row: usize) -> (ProjectedPoint, ProjectedPoint) {
    let x0 = col as f64 * cfg.spacing_x_m;
    let y = row as f64 * cfg.spacing_y_m;
    (ProjectedPoint::new(x0, y), ProjectedPoint::new(x0 + cfg.segment_length_m, y))
}

pub fn generate_city(cfg: &CityConfig) -> SyntheticCity {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let proj = LocalProjection::new(cfg.origin[0], cfg.origin[1]);
    let noise = Normal::new(0.0, cfg.ewl_sigma.max(1e-12)).expect("finite sigma");
    let mut city = SyntheticCity {
        segments: Vec::new(),
        photos: Vec::new(),
        regimes: Vec::new(),
        transport_share: Vec::new(),
        ewl: Vec::new(),
    };
    for row in 0..cfg.rows {
        for col in 0..cfg.cols {
            let regime = regime_of(col, row, cfg.cols, cfg.rows);
            let id = format!("s{:04}", city.segments.len());
            let (a, b) = segment_geometry(cfg, col, row);
            // Background mix with random weights, dominated by the regime category.
            let background: Vec<f64> = (0..SoundCategory::COUNT).map(|_| rng.gen::<f64>()).collect();
            let bsum: f64 = background.iter().sum();
            let mut weights: Vec<f64> = background.iter().map(|w| (1.0 - cfg.regime_share) * w / bsum).collect();
            weights[regime.index()] += cfg.regime_share;
            let transport = weights[SoundCategory::Transport.index()];

            let n_photos = rng.gen_range(cfg.photos.0..=cfg.photos.1);
            for k in 0..n_photos {
                let along = rng.gen_range(0.0..cfg.segment_length_m);
                let across = rng.gen_range(-15.0..15.0);
                let [lon, lat] = proj.unproject(ProjectedPoint::new(a.x + along, a.y + across));
                let mut tags = Vec::new();
                for _ in 0..rng.gen_range(1..=2) {
                    let c = SoundCategory::ALL[pick(&weights, &mut rng)];
                    let terms: Vec<&str> = terms_of(c).collect();
                    let term = terms[rng.gen_range(0..terms.len())];
                    tags.push(if rng.gen_bool(0.1) { term.to_uppercase() } else { term.to_string() });
                }
                if rng.gen_bool(0.4) {
                    tags.push(EMOTION_TERMS[rng.gen_range(0..EMOTION_TERMS.len())].0.to_string());
                }
                tags.push(FILLER_TAGS[rng.gen_range(0..FILLER_TAGS.len())].to_string());
                city.photos.push(PhotoRecord {
                    photo_id: format!("{id}-p{k}"),
                    lon,
                    lat,
                    tags,
                    timestamp: Some(1_300_000_000 + rng.gen_range(0..100_000_000)),
                    owner: Some(format!("u{}", rng.gen_range(0..500))),
                });
            }
            city.segments.push(StreetSegment {
                segment_id: id,
                polyline: vec![proj.unproject(a), proj.unproject(b)],
                street_type: street_type_for(regime, &mut rng),
            });
            city.regimes.push(regime);
            city.transport_share.push(transport);
            city.ewl.push(cfg.ewl_base + cfg.ewl_slope * transport + noise.sample(&mut rng));
        }
    }
    city
}

/// Writes `segment_id,l_day,l_evening,l_night,ewl`; period levels sit at
/// fixed offsets below the EWL.
pub fn write_noise<W: Write>(city: &SyntheticCity, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["segment_id", "l_day", "l_evening", "l_night", "ewl"])?;
    for (s, e) in city.segments.iter().zip(&city.ewl) {
        let level = |v: f64| format!("{:.2}", v);
        w.write_record([
            s.segment_id.clone(),
            level(e - 3.0),
            level(e - 6.0),
            level(e - 12.0),
            level(*e),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_lexicon<W: Write>(lexicon: &Lexicon, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["term", "labels"])?;
    for term in lexicon.terms() {
        w.write_record([term.to_string(), lexicon.labels(term).unwrap_or_default().join("|")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_taxonomy<W: Write>(taxonomy: &Taxonomy, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(["term", "path"])?;
    for (term, path) in taxonomy.to_rows() {
        w.write_record([term, path])?;
    }
    w.flush()?;
    Ok(())
}

/// Soundwalk ratings with planted sound-perception links: traffic drives
/// chaotic and annoying, nature drives calm and pleasant, people drive
/// vibrant and eventful, other sounds drive uneventful and monotonous.
pub fn soundwalk(n: usize, seed: u64) -> Vec<SoundwalkRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clamp = |v: f64| v.round().clamp(1.0, 10.0) as u8;
    (0..n)
        .map(|i| {
            let sounds: [u8; WalkSound::COUNT] = std::array::from_fn(|_| rng.gen_range(1..=10));
            let s = |c: WalkSound| f64::from(sounds[c.index()]);
            let people = (s(WalkSound::Individuals) + s(WalkSound::Crowds)) / 2.0;
            let mut jitter = || rng.gen_range(-2.0..2.0);
            let mut perceptions = [0u8; Perception::COUNT];
            for f in Perception::ALL {
                use Perception::*;
                let driver = match f {
                    Chaotic | Annoying => s(WalkSound::Traffic),
                    Calm | Pleasant => s(WalkSound::Nature),
                    Vibrant | Eventful => people,
                    Uneventful | Monotonous => s(WalkSound::Other),
                };
                perceptions[f.index()] = clamp(driver + jitter());
            }
            SoundwalkRecord {
                walk_id: format!("w{}", i / 40),
                participant_id: format!("p{}", i % 20),
                location_id: format!("l{}", i % 8),
                sounds,
                perceptions,
            }
        })
        .collect()
}

/// Ratings where traffic and chaotic are in their upper quartile on the same
/// seven of 28 records, and every other column on records outside those
/// seven. Flag totals are balanced (63 sound flags, 63 perception flags), so
/// the sound-to-perception conditional is exactly 1.
pub fn coupled_soundwalk() -> Vec<SoundwalkRecord> {
    const N: usize = 28;
    let mut records: Vec<SoundwalkRecord> = (0..N)
        .map(|i| SoundwalkRecord {
            walk_id: "w0".into(),
            participant_id: format!("p{i}"),
            location_id: "l0".into(),
            sounds: [1; WalkSound::COUNT],
            perceptions: [1; Perception::COUNT],
        })
        .collect();
    for r in &mut records[..7] {
        r.sounds[WalkSound::Traffic.index()] = 10;
        r.perceptions[Perception::Chaotic.index()] = 10;
    }
    for (k, c) in WalkSound::ALL.iter().filter(|&&c| c != WalkSound::Traffic).enumerate() {
        for j in 0..14 {
            records[7 + (k * 5 + j) % 21].sounds[c.index()] = 10;
        }
    }
    for (k, f) in Perception::ALL.iter().filter(|&&f| f != Perception::Chaotic).enumerate() {
        for j in 0..8 {
            records[7 + (k * 3 + j) % 21].perceptions[f.index()] = 10;
        }
    }
    records
}

/// Independent ratings. In every column exactly the records needed to fill
/// the upper quartile score 10, chosen by an independent shuffle per column;
/// the rest are uniform on 1..=9.
pub fn independent_soundwalk(n: usize, seed: u64) -> Vec<SoundwalkRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = n - 3 * n / 4;
    let column = |rng: &mut ChaCha8Rng| -> Vec<u8> {
        let mut v: Vec<u8> = (0..n).map(|i| if i < top { 10 } else { rng.gen_range(1..=9) }).collect();
        v.shuffle(rng);
        v
    };
    let sounds: Vec<Vec<u8>> = (0..WalkSound::COUNT).map(|_| column(&mut rng)).collect();
    let perceptions: Vec<Vec<u8>> = (0..Perception::COUNT).map(|_| column(&mut rng)).collect();
    (0..n)
        .map(|i| SoundwalkRecord {
            walk_id: "w0".into(),
            participant_id: format!("p{i}"),
            location_id: "l0".into(),
            sounds: std::array::from_fn(|c| sounds[c][i]),
            perceptions: std::array::from_fn(|f| perceptions[f][i]),
        })
        .collect()
}

/// Angle of each perception on the pleasantness/eventfulness circumplex, degrees.
pub fn circumplex_angle(f: Perception) -> f64 {
    use Perception::*;
    match f {
        Pleasant => 0.0,
        Vibrant => 45.0,
        Eventful => 90.0,
        Chaotic => 135.0,
        Annoying => 180.0,
        Monotonous => 225.0,
        Uneventful => 270.0,
        Calm => 315.0,
    }
}

/// Perception ratings driven by two independent latent axes
/// (pleasant–annoying and eventful–uneventful) plus small noise.
pub fn circumplex_ratings(n: usize, noise: f64, seed: u64) -> Vec<[f64; Perception::COUNT]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let latent = Normal::new(0.0, 1.5).expect("valid");
    let jitter = Normal::new(0.0, noise.max(1e-12)).expect("valid");
    (0..n)
        .map(|_| {
            let (u, v) = (latent.sample(&mut rng), latent.sample(&mut rng));
            std::array::from_fn(|i| {
                let a = circumplex_angle(Perception::ALL[i]).to_radians();
                5.5 + u * a.cos() + v * a.sin() + jitter.sample(&mut rng)
            })
        })
        .collect()
}

/// `blocks` groups of `size` nodes; each intra-block pair is linked with
/// probability `p_in`, each inter-block pair with `p_out`.
pub fn planted_graph(blocks: usize, size: usize, p_in: f64, p_out: f64, seed: u64) -> (Graph, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = blocks * size;
    let truth: Vec<usize> = (0..n).map(|i| i / size).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if truth[i] == truth[j] { p_in } else { p_out };
            if rng.gen_bool(p) {
                edges.push((i, j, 1.0));
            }
        }
    }
    (Graph::from_edges(n, edges), truth)
}

/// Writes every input of the synthetic city plus a manifest (`run.toml`)
/// into `dir`, with outputs going to `dir/out`.
pub fn write_city_inputs(city: &SyntheticCity, dir: &Path, seed: u64) -> std::io::Result<()> {
    use std::fs::File;
    use std::io::BufWriter;
    let csv_err = |e: csv::Error| std::io::Error::other(e.to_string());
    std::fs::create_dir_all(dir)?;
    crate::ingest::write_photos(&city.photos, BufWriter::new(File::create(dir.join("photos.jsonl"))?))?;
    crate::ingest::write_segments(&city.segments, BufWriter::new(File::create(dir.join("segments.geojson"))?))?;
    write_noise(city, File::create(dir.join("noise.csv"))?).map_err(csv_err)?;
    write_lexicon(&sound_lexicon(), File::create(dir.join("sound_lexicon.csv"))?).map_err(csv_err)?;
    write_lexicon(&emotion_lexicon(), File::create(dir.join("emotion_lexicon.csv"))?).map_err(csv_err)?;
    write_taxonomy(&sound_taxonomy(), File::create(dir.join("taxonomy.csv"))?).map_err(csv_err)?;
    crate::ingest::write_soundwalk(&soundwalk(342, seed), File::create(dir.join("soundwalk.csv"))?)
        .map_err(csv_err)?;
    std::fs::write(
        dir.join("run.toml"),
        format!(
            "photos = \"photos.jsonl\"\n\
             segments = \"segments.geojson\"\n\
             sound_lexicon = \"sound_lexicon.csv\"\n\
             emotion_lexicon = \"emotion_lexicon.csv\"\n\
             taxonomy = \"taxonomy.csv\"\n\
             noise = \"noise.csv\"\n\
             soundwalk = \"soundwalk.csv\"\n\
             out = \"out\"\n\
             seed = {seed}\n"
        ),
    )
}

/// Streams a large grid city straight to disk: `segments` west-east
/// segments of 50 m and `photos` photos spread uniformly over them, each
/// with one sound tag and one filler tag.
pub fn write_scale_inputs(dir: &Path, segments: usize, photos: usize, seed: u64) -> std::io::Result<()> {
    use std::fs::File;
    use std::io::BufWriter;
    std::fs::create_dir_all(dir)?;
    let cols = (segments as f64).sqrt().ceil() as usize;
    let cfg = CityConfig {
        cols,
        rows: segments.div_ceil(cols),
        segment_length_m: 50.0,
        spacing_x_m: 100.0,
        spacing_y_m: 60.0,
        ..CityConfig::default()
    };
    let proj = LocalProjection::new(cfg.origin[0], cfg.origin[1]);
    let cell = |s: usize| (s % cols, s / cols);

    let segs: Vec<StreetSegment> = (0..segments)
        .map(|s| {
            let (col, row) = cell(s);
            let (a, b) = segment_geometry(&cfg, col, row);
            StreetSegment {
                segment_id: format!("s{s}"),
                polyline: vec![proj.unproject(a), proj.unproject(b)],
                street_type: StreetType::Residential,
            }
        })
        .collect();
    crate::ingest::write_segments(&segs, BufWriter::new(File::create(dir.join("segments.geojson"))?))?;
    drop(segs);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BufWriter::new(File::create(dir.join("photos.jsonl"))?);
    let mut batch = Vec::with_capacity(10_000);
    for p in 0..photos {
        let s = rng.gen_range(0..segments);
        let (col, row) = cell(s);
        let (a, _) = segment_geometry(&cfg, col, row);
        let [lon, lat] = proj.unproject(ProjectedPoint::new(
            a.x + rng.gen_range(0.0..cfg.segment_length_m),
            a.y + rng.gen_range(-15.0..15.0),
        ));
        let regime = regime_of(col, row, cfg.cols, cfg.rows);
        let c = if rng.gen_bool(0.7) { regime } else { SoundCategory::ALL[rng.gen_range(0..6)] };
        let terms: Vec<&str> = terms_of(c).collect();
        batch.push(PhotoRecord {
            photo_id: format!("p{p}"),
            lon,
            lat,
            tags: vec![
                terms[rng.gen_range(0..terms.len())].to_string(),
                FILLER_TAGS[rng.gen_range(0..FILLER_TAGS.len())].to_string(),
            ],
            timestamp: None,
            owner: None,
        });
        if batch.len() == batch.capacity() {
            crate::ingest::write_photos(&batch, &mut out)?;
            batch.clear();
        }
    }
    crate::ingest::write_photos(&batch, &mut out)?;
    out.flush()?;
    let csv_err = |e: csv::Error| std::io::Error::other(e.to_string());
    write_lexicon(&sound_lexicon(), File::create(dir.join("sound_lexicon.csv"))?).map_err(csv_err)?;
    write_taxonomy(&sound_taxonomy(), File::create(dir.join("taxonomy.csv"))?).map_err(csv_err)?;
    std::fs::write(
        dir.join("run.toml"),
        "photos = \"photos.jsonl\"\nsegments = \"segments.geojson\"\nsound_lexicon = \"sound_lexicon.csv\"\n\
         taxonomy = \"taxonomy.csv\"\nout = \"out\"\n",
    )
}
