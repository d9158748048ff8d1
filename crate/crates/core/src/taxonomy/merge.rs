use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{GraphError, HierarchicalPartition};
use crate::lexicon::Taxonomy;

/// Declarative post-processing of a partition: community merges and labels.
///
/// CSV with header `kind,source,target`:
/// * `merge,c3,c1`: words of community `c3` take the path of `c1`;
/// * `label,c1,nature`: community `c1` is named `nature` in paths.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeMap {
    pub merges: BTreeMap<String, String>,
    pub labels: BTreeMap<String, String>,
}

impl MergeMap {
    pub fn is_empty(&self) -> bool {
        self.merges.is_empty() && self.labels.is_empty()
    }
}

pub fn parse_merge_map<R: std::io::Read>(reader: R) -> Result<MergeMap, GraphError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let bad = |line: usize, reason: String| GraphError::BadMergeMap { line, reason };
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| bad(1, e.to_string()))?
        .iter()
        .map(str::to_lowercase)
        .collect();
    if header != ["kind", "source", "target"] {
        return Err(bad(1, format!("expected header kind,source,target, got {}", header.join(","))));
    }
    let mut map = MergeMap::default();
    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| bad(line, e.to_string()))?;
        if record.len() != 3 {
            return Err(bad(line, format!("expected 3 fields, got {}", record.len())));
        }
        let (source, target) = (record[1].to_string(), record[2].to_string());
        if source.is_empty() || target.is_empty() {
            return Err(bad(line, "empty source or target".into()));
        }
        let table = match record[0].to_lowercase().as_str() {
            "merge" => &mut map.merges,
            "label" => &mut map.labels,
            other => return Err(bad(line, format!("unknown kind `{other}`"))),
        };
        if table.insert(source.clone(), target).is_some() {
            return Err(bad(line, format!("`{source}` listed twice")));
        }
    }
    Ok(map)
}

fn key_path(key: &str) -> Vec<String> {
    match key.split_once('.') {
        Some((top, _)) => vec![top.to_string(), key.to_string()],
        None => vec![key.to_string()],
    }
}

/// Final key path for community `key`, following merges of the key itself or
/// of its parent.
fn resolve(key: &str, merges: &BTreeMap<String, String>) -> Result<Vec<String>, GraphError> {
    let mut seen = HashSet::new();
    let mut current = key.to_string();
    loop {
        if !seen.insert(current.clone()) {
            return Err(GraphError::MergeCycle(current));
        }
        let parent = current.split_once('.').map(|(top, _)| top.to_string());
        if let Some(target) = merges.get(&current) {
            current = target.clone();
        } else if let Some(target) = parent.as_ref().and_then(|p| merges.get(p)) {
            current = target.clone();
        } else {
            return Ok(key_path(&current));
        }
    }
}

/// Applies merges and labels to a hierarchical partition of `words`.
/// Unlabeled communities keep their generated `c<id>` / `c<id>.<sub>` keys.
pub fn apply_merge(
    words: &[String],
    partition: &HierarchicalPartition,
    merge_map: &MergeMap,
) -> crate::Result<Taxonomy> {
    let keys: BTreeSet<String> = partition.keys().into_iter().collect();
    for (source, target) in &merge_map.merges {
        if !keys.contains(source) {
            return Err(GraphError::UnknownCommunity(source.clone()).into());
        }
        if !keys.contains(target) {
            return Err(GraphError::MergeTargetMissing(target.clone()).into());
        }
    }
    if let Some(source) = merge_map.labels.keys().find(|k| !keys.contains(*k)) {
        return Err(GraphError::UnknownCommunity(source.clone()).into());
    }
    let mut tax = Taxonomy::new();
    for (node, word) in words.iter().enumerate() {
        let own = partition.key_path(node);
        let path = resolve(own.last().expect("non-empty key path"), &merge_map.merges)?;
        let labeled = path
            .into_iter()
            .map(|k| merge_map.labels.get(&k).cloned().unwrap_or(k))
            .collect();
        tax.insert(word, labeled)?;
    }
    Ok(tax)
}
