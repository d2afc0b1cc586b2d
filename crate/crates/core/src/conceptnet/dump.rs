//! Ingestion of raw assertion dumps: tab-separated rows with a JSON
//! metadata column carrying the edge weight.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::Deserialize;

use super::{Assertion, ConceptId, RelationId, RelationSet, StoreError};

/// Counters describing one ingestion pass over a dump.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct IngestStats {
    pub lines_read: u64,
    pub retained: u64,
    pub skipped_malformed: u64,
    pub skipped_language: u64,
    pub skipped_relation: u64,
    pub skipped_self_loop: u64,
    pub duplicates_replaced: u64,
}

#[derive(Deserialize)]
struct RowInfo {
    weight: f64,
}

/// Opens `path`, transparently decompressing gzip (sniffed from the two
/// magic bytes, not the file extension).
pub(super) fn open_maybe_gzip(path: &Path) -> Result<Box<dyn BufRead>, StoreError> {
    let mut file = std::fs::File::open(path)?;
    let mut magic = [0u8; 2];
    let n = read_up_to(&mut file, &mut magic)?;
    use std::io::Seek;
    file.seek(std::io::SeekFrom::Start(0))?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(flate2::read::GzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

fn read_up_to<R: Read>(r: &mut R, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

enum RowOutcome {
    Kept(Assertion),
    SkippedLanguage,
    SkippedRelation,
    SkippedSelfLoop,
    Malformed,
}

/// Parses one 5-column dump row, applying the language and relation filters.
fn parse_row(line: &str, language: &str, relations: &RelationSet) -> RowOutcome {
    let mut cols = line.split('\t');
    let fields = (
        cols.next(),
        cols.next(),
        cols.next(),
        cols.next(),
        cols.next(),
    );
    let (Some(_uri), Some(rel), Some(start), Some(end), Some(info)) = fields else {
        return RowOutcome::Malformed;
    };

    let (Ok(relation), Ok(start), Ok(end)) = (
        RelationId::new(rel),
        ConceptId::new(start),
        ConceptId::new(end),
    ) else {
        return RowOutcome::Malformed;
    };
    let Ok(info) = serde_json::from_str::<RowInfo>(info) else {
        return RowOutcome::Malformed;
    };
    if !info.weight.is_finite() {
        return RowOutcome::Malformed;
    }

    if start.language() != language || end.language() != language {
        return RowOutcome::SkippedLanguage;
    }
    if !relations.contains(&relation) {
        return RowOutcome::SkippedRelation;
    }
    if start == end {
        return RowOutcome::SkippedSelfLoop;
    }

    RowOutcome::Kept(Assertion {
        start,
        relation,
        end,
        raw_weight: info.weight,
        norm_weight: None,
    })
}

/// Reads a dump from `reader`, keeping rows whose concepts are both in
/// `language` and whose relation is whitelisted. Later duplicates of a
/// (start, relation, end) triple replace earlier ones.
pub fn ingest_dump<R: BufRead>(
    reader: R,
    language: &str,
    relations: &RelationSet,
) -> Result<(Vec<Assertion>, IngestStats), StoreError> {
    let mut stats = IngestStats::default();
    let mut dedup: std::collections::BTreeMap<(ConceptId, RelationId, ConceptId), Assertion> =
        std::collections::BTreeMap::new();

    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        stats.lines_read += 1;
        match parse_row(&line, language, relations) {
            RowOutcome::Kept(a) => {
                let key = (a.start.clone(), a.relation.clone(), a.end.clone());
                if dedup.insert(key, a).is_some() {
                    stats.duplicates_replaced += 1;
                }
            }
            RowOutcome::SkippedLanguage => stats.skipped_language += 1,
            RowOutcome::SkippedRelation => stats.skipped_relation += 1,
            RowOutcome::SkippedSelfLoop => stats.skipped_self_loop += 1,
            RowOutcome::Malformed => stats.skipped_malformed += 1,
        }
    }

    stats.retained = dedup.len() as u64;
    Ok((dedup.into_values().collect(), stats))
}

/// Convenience wrapper: ingest a dump file (optionally gzipped) from disk.
pub fn load_assertions(
    path: &Path,
    language: &str,
    relations: &RelationSet,
) -> Result<(Vec<Assertion>, IngestStats), StoreError> {
    let reader = open_maybe_gzip(path)?;
    ingest_dump(reader, language, relations)
}
