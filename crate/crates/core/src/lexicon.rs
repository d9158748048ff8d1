//! Tag normalization, word-list matching and coverage statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::categories::SoundCategory;
use crate::error::{Error, Result};
use crate::geo::SegmentTagTable;
use crate::ingest::{LexiconFile, PhotoRecord};
use crate::par::Exec;

fn is_dash(c: char) -> bool {
    matches!(c, '-' | '\u{2010}' | '\u{2011}' | '\u{2012}' | '\u{2013}' | '\u{2014}' | '\u{2212}')
}

/// Lowercases, turns hyphens and whitespace runs into single spaces and strips
/// punctuation around the tag. `None` when nothing is left.
///
/// `"Bird-Song "` becomes `"bird song"`. The function is idempotent.
pub fn normalize(raw: &str) -> Option<String> {
    let lowered = raw.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    let mut pending_space = false;
    for c in lowered.chars() {
        if c.is_whitespace() || is_dash(c) {
            pending_space = true;
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        }
    }
    let trimmed = out.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() {
        return None;
    }
    if trimmed.len() == out.len() {
        return Some(out);
    }
    // stripping punctuation may expose a space at either end
    normalize(trimmed)
}

/// A word list keyed by normalized term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    pub name: String,
    terms: HashMap<String, Vec<String>>,
}

impl Lexicon {
    pub fn from_file(file: &LexiconFile) -> Result<Self> {
        let mut terms = HashMap::with_capacity(file.entries.len());
        for entry in &file.entries {
            let term = normalize(&entry.term)
                .ok_or_else(|| Error::Input(format!("{}: empty term `{}`", file.name, entry.term)))?;
            if terms.insert(term.clone(), entry.labels.clone()).is_some() {
                return Err(Error::Input(format!(
                    "{}: term `{term}` appears twice after normalization",
                    file.name
                )));
            }
        }
        Ok(Lexicon {
            name: file.name.clone(),
            terms,
        })
    }

    /// Builds a lexicon from `(term, labels)` pairs; terms are normalized.
    pub fn from_pairs<'a>(
        name: &str,
        pairs: impl IntoIterator<Item = (&'a str, &'a [&'a str])>,
    ) -> Self {
        let terms = pairs
            .into_iter()
            .filter_map(|(t, labels)| {
                normalize(t).map(|t| (t, labels.iter().map(|l| l.to_string()).collect()))
            })
            .collect();
        Lexicon {
            name: name.to_string(),
            terms,
        }
    }

    pub fn labels(&self, tag: &str) -> Option<&[String]> {
        self.terms.get(tag).map(Vec::as_slice)
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.terms.contains_key(tag)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in sorted order.
    pub fn terms(&self) -> Vec<&str> {
        let mut t: Vec<&str> = self.terms.keys().map(String::as_str).collect();
        t.sort_unstable();
        t
    }
}

/// Label counts for a tag multiset. Matching is exact on the whole normalized
/// tag; a hit adds the tag multiplicity to every label of the term.
pub fn match_tags<'a>(
    tags: impl IntoIterator<Item = (&'a str, u64)>,
    lexicon: &Lexicon,
) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for (tag, n) in tags {
        if let Some(labels) = lexicon.labels(tag) {
            for label in labels {
                *counts.entry(label.clone()).or_insert(0) += n;
            }
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyFilter {
    pub kept: BTreeSet<String>,
    /// Share of the total tag volume carried by the kept terms.
    pub retained_fraction: f64,
}

/// Keeps terms occurring strictly more than `min_count` times.
pub fn filter_by_frequency(counts: &BTreeMap<String, u64>, min_count: u64) -> FrequencyFilter {
    let total: u64 = counts.values().sum();
    let mut kept_volume = 0u64;
    let kept = counts
        .iter()
        .filter(|&(_, &n)| n > min_count)
        .map(|(t, &n)| {
            kept_volume += n;
            t.clone()
        })
        .collect();
    FrequencyFilter {
        kept,
        retained_fraction: if total == 0 {
            0.0
        } else {
            kept_volume as f64 / total as f64
        },
    }
}

/// Hierarchical sound-word classification: every term has exactly one path of
/// 1 to 4 labels, the first one being its top-level category.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Taxonomy {
    paths: BTreeMap<String, Vec<String>>,
}

impl Taxonomy {
    pub fn new() -> Self {
        Taxonomy::default()
    }

    pub fn from_rows(rows: impl IntoIterator<Item = (String, Vec<String>)>) -> Result<Self> {
        let mut tax = Taxonomy::new();
        for (term, path) in rows {
            tax.insert(&term, path)?;
        }
        Ok(tax)
    }

    pub fn insert(&mut self, term: &str, path: Vec<String>) -> Result<()> {
        let term = normalize(term).ok_or_else(|| Error::Input(format!("empty taxonomy term `{term}`")))?;
        if path.is_empty() || path.len() > 4 {
            return Err(Error::Input(format!("taxonomy path for `{term}` must hold 1 to 4 labels")));
        }
        if self.paths.insert(term.clone(), path).is_some() {
            return Err(Error::Input(format!("taxonomy term `{term}` has two paths")));
        }
        Ok(())
    }

    pub fn path(&self, term: &str) -> Option<&[String]> {
        self.paths.get(term).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.paths.iter().map(|(t, p)| (t.as_str(), p.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Distinct top-level labels, sorted.
    pub fn top_levels(&self) -> BTreeSet<&str> {
        self.paths.values().map(|p| p[0].as_str()).collect()
    }

    /// Term to top-level sound category. Fails if any head is not one of the six categories.
    pub fn sound_categories(&self) -> Result<SoundLexicon> {
        let mut map = HashMap::with_capacity(self.paths.len());
        for (term, path) in &self.paths {
            let cat: SoundCategory = path[0].parse().map_err(|_| {
                Error::Input(format!(
                    "taxonomy term `{term}` has top level `{}`, expected one of transport/mechanical/human/music/nature/indoor",
                    path[0]
                ))
            })?;
            map.insert(term.clone(), cat);
        }
        Ok(SoundLexicon { map })
    }

    /// `(term, "top/sub/...")` rows in term order.
    pub fn to_rows(&self) -> Vec<(String, String)> {
        self.paths
            .iter()
            .map(|(t, p)| (t.clone(), p.join("/")))
            .collect()
    }
}

/// Term to top-level sound category, as used by the sound layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SoundLexicon {
    map: HashMap<String, SoundCategory>,
}

impl SoundLexicon {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, SoundCategory)>) -> Self {
        SoundLexicon {
            map: pairs
                .into_iter()
                .filter_map(|(t, c)| normalize(t).map(|t| (t, c)))
                .collect(),
        }
    }

    pub fn category(&self, tag: &str) -> Option<SoundCategory> {
        self.map.get(tag).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageRow {
    pub lexicon: String,
    pub matched_tags: u64,
    pub photos_with_match: u64,
    pub segments_with_match: u64,
}

/// Matched tags, photos with at least one match and segments with at least
/// one match, per lexicon.
pub fn coverage_report(
    photos: &[PhotoRecord],
    table: &SegmentTagTable,
    lexicons: &[&Lexicon],
) -> Vec<CoverageRow> {
    let normalized: Vec<Vec<String>> = Exec::default().map(photos, |p| {
        p.tags.iter().filter_map(|t| normalize(t)).collect()
    });
    lexicons
        .iter()
        .map(|lex| {
            let mut matched_tags = 0;
            let mut photos_with_match = 0;
            for tags in &normalized {
                let hits = tags.iter().filter(|t| lex.contains(t)).count() as u64;
                matched_tags += hits;
                photos_with_match += u64::from(hits > 0);
            }
            let segments_with_match = (0..table.segments.len())
                .filter(|&s| table.tags_of(s).any(|(t, _)| lex.contains(t)))
                .count() as u64;
            CoverageRow {
                lexicon: lex.name.clone(),
                matched_tags,
                photos_with_match,
                segments_with_match,
            }
        })
        .collect()
}

/// Number of segments per count of matched tags (segments with no match left out).
pub fn matched_tags_histogram(table: &SegmentTagTable, lexicon: &Lexicon) -> BTreeMap<u64, u64> {
    let mut hist = BTreeMap::new();
    for s in 0..table.segments.len() {
        let matched: u64 = table
            .tags_of(s)
            .filter(|(t, _)| lexicon.contains(t))
            .map(|(_, n)| n)
            .sum();
        if matched > 0 {
            *hist.entry(matched).or_insert(0) += 1;
        }
    }
    hist
}
