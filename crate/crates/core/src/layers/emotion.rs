use std::collections::HashMap;

use crate::categories::Emotion;
use crate::geo::SegmentTagTable;
use crate::lexicon::Lexicon;
use crate::par::Exec;

/// Term to primary emotions. Labels outside the eight emotions (such as
/// positive/negative sentiment columns) are ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmotionLexicon {
    map: HashMap<String, Vec<Emotion>>,
}

impl EmotionLexicon {
    pub fn from_lexicon(lexicon: &Lexicon) -> Self {
        let mut ignored = 0usize;
        let mut map = HashMap::new();
        for term in lexicon.terms() {
            let mut emotions: Vec<Emotion> = lexicon
                .labels(term)
                .unwrap_or_default()
                .iter()
                .filter_map(|l| match l.parse::<Emotion>() {
                    Ok(e) => Some(e),
                    Err(_) => {
                        ignored += 1;
                        None
                    }
                })
                .collect();
            emotions.sort();
            emotions.dedup();
            if !emotions.is_empty() {
                map.insert(term.to_string(), emotions);
            }
        }
        if ignored > 0 {
            log::info!("emotion lexicon `{}`: ignored {ignored} non-emotion labels", lexicon.name);
        }
        EmotionLexicon { map }
    }

    pub fn emotions(&self, tag: &str) -> &[Emotion] {
        self.map.get(tag).map(Vec::as_slice).unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Emotion-tag counts of one segment. `tag_total` counts every tag on the
/// segment, so the fractions need not sum to one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmotionProfile {
    pub segment: usize,
    pub segment_id: String,
    pub counts: [u64; Emotion::COUNT],
    pub tag_total: u64,
}

impl EmotionProfile {
    pub fn fractions(&self) -> [f64; Emotion::COUNT] {
        self.counts.map(|c| c as f64 / self.tag_total as f64)
    }
}

/// `None` for a segment without tags. A tag with several emotions adds to each.
pub fn emotion_profile<'a>(
    segment: usize,
    segment_id: &str,
    tags: impl IntoIterator<Item = (&'a str, u64)>,
    lexicon: &EmotionLexicon,
) -> Option<EmotionProfile> {
    let mut counts = [0u64; Emotion::COUNT];
    let mut tag_total = 0;
    for (tag, n) in tags {
        tag_total += n;
        for e in lexicon.emotions(tag) {
            counts[e.index()] += n;
        }
    }
    (tag_total > 0).then(|| EmotionProfile {
        segment,
        segment_id: segment_id.to_string(),
        counts,
        tag_total,
    })
}

pub fn emotion_profiles(table: &SegmentTagTable, lexicon: &EmotionLexicon, exec: Exec) -> Vec<EmotionProfile> {
    exec.map_range(table.segments.len(), |s| {
        emotion_profile(s, &table.segments[s].segment_id, table.tags_of(s), lexicon)
    })
    .into_iter()
    .flatten()
    .collect()
}
