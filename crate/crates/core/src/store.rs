//! Quadruple store: vocabularies, temporal adjacency index, loaders for
//! ICEWS- and YAGO15K-style TSV files, and the temporal-kNN candidate
//! filter used by the expansion environment.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type EntityId = u32;
pub type RelationId = u32;
pub type TimeId = u32;
/// Position of a quadruple in train-file load order.
pub type QuadId = u32;

/// Sentinel for an absent temporal slot (sparse interval annotation).
/// Sorts after every real `TimeId`.
pub const TIME_NONE: TimeId = u32::MAX;

/// String interner with dense integer ids.
#[derive(Debug, Clone, Default)]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Closest vocabulary entries by edit distance, for error messages.
    pub fn nearest(&self, query: &str, n: usize) -> Vec<String> {
        let mut scored: Vec<(usize, &String)> = self
            .names
            .iter()
            .map(|name| (levenshtein(query, name), name))
            .collect();
        scored.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        scored.into_iter().take(n).map(|(_, s)| s.clone()).collect()
    }
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Whether fact times are single points (ICEWS) or sparse since/until
/// intervals (YAGO15K).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeMode {
    Point,
    Interval,
}

/// A time-stamped fact. Point facts carry `since == until`; interval
/// facts may leave either slot as [`TIME_NONE`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Quadruple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
    pub since: TimeId,
    pub until: TimeId,
}

impl Quadruple {
    pub fn point(subject: EntityId, relation: RelationId, object: EntityId, time: TimeId) -> Self {
        Self {
            subject,
            relation,
            object,
            since: time,
            until: time,
        }
    }

    /// Point-mode timestamp.
    pub fn time(&self) -> TimeId {
        self.since
    }

    /// Representative time for adjacency ordering: earliest present slot,
    /// [`TIME_NONE`] when unannotated.
    pub fn sort_time(&self) -> TimeId {
        self.since.min(self.until)
    }
}

/// Immutable temporal knowledge graph: vocabularies over all splits,
/// traversable quadruples (train split), per-entity adjacency.
#[derive(Debug, Clone)]
pub struct TemporalKG {
    pub entities: Vocab,
    pub relations: Vocab,
    /// Raw timestamps in chronological order; `TimeId` = rank.
    pub times: Vocab,
    pub mode: TimeMode,
    quads: Vec<Quadruple>,
    adjacency: Vec<Vec<QuadId>>,
}

impl TemporalKG {
    pub fn new(
        entities: Vocab,
        relations: Vocab,
        times: Vocab,
        mode: TimeMode,
        quads: Vec<Quadruple>,
    ) -> Self {
        let mut adjacency = vec![Vec::new(); entities.len()];
        for (id, q) in quads.iter().enumerate() {
            adjacency[q.subject as usize].push(id as QuadId);
            if q.object != q.subject {
                adjacency[q.object as usize].push(id as QuadId);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable_by_key(|&id| (quads[id as usize].sort_time(), id));
        }
        Self {
            entities,
            relations,
            times,
            mode,
            quads,
            adjacency,
        }
    }

    pub fn quad(&self, id: QuadId) -> &Quadruple {
        &self.quads[id as usize]
    }

    pub fn quads(&self) -> &[Quadruple] {
        &self.quads
    }

    pub fn n_quads(&self) -> usize {
        self.quads.len()
    }

    /// All quad ids in which `entity` appears as subject or object,
    /// nondecreasing in time.
    pub fn adjacency(&self, entity: EntityId) -> &[QuadId] {
        &self.adjacency[entity as usize]
    }

    /// Upper bound on any chronological index distance; stands in for the
    /// distance of unannotated facts so they order after every dated one.
    pub fn horizon(&self) -> u32 {
        self.times.len() as u32
    }

    /// Chronological-index distance between a fact and a query anchor.
    /// Interval facts use their nearest present slot.
    pub fn time_delta(&self, id: QuadId, anchor: TimeId) -> u32 {
        if anchor == TIME_NONE {
            return self.horizon();
        }
        let q = &self.quads[id as usize];
        let slot = |t: TimeId| (t != TIME_NONE).then(|| t.abs_diff(anchor));
        match (slot(q.since), slot(q.until)) {
            (None, None) => self.horizon(),
            (a, b) => a.into_iter().chain(b).min().unwrap(),
        }
    }

    /// Rows of the temporal embedding table: one per observed timestamp,
    /// plus a reserved null row per interval slot.
    pub fn time_rows(&self) -> usize {
        match self.mode {
            TimeMode::Point => self.times.len(),
            TimeMode::Interval => self.times.len() + 2,
        }
    }

    /// Embedding row for the `since` slot.
    pub fn since_row(&self, t: TimeId) -> usize {
        if t == TIME_NONE {
            self.times.len()
        } else {
            t as usize
        }
    }

    /// Embedding row for the `until` slot.
    pub fn until_row(&self, t: TimeId) -> usize {
        if t == TIME_NONE {
            self.times.len() + 1
        } else {
            t as usize
        }
    }

    pub fn time_label(&self, t: TimeId) -> &str {
        if t == TIME_NONE {
            "-"
        } else {
            self.times.name(t)
        }
    }
}

/// Vocabulary dump written next to checkpoints.
#[derive(Debug, Serialize, Deserialize)]
pub struct VocabDump {
    pub entities: Vec<String>,
    pub relations: Vec<String>,
    pub times: Vec<String>,
    pub mode: TimeMode,
}

impl VocabDump {
    pub fn from_kg(kg: &TemporalKG) -> Self {
        Self {
            entities: kg.entities.names().to_vec(),
            relations: kg.relations.names().to_vec(),
            times: kg.times.names().to_vec(),
            mode: kg.mode,
        }
    }
}

/// Train/valid/test facts plus the filtered-evaluation index over their
/// union: (subject, object, time) -> known relation ids.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: Vec<Quadruple>,
    pub valid: Vec<Quadruple>,
    pub test: Vec<Quadruple>,
    known: HashMap<(EntityId, EntityId, TimeId, TimeId), Vec<RelationId>>,
}

impl Split {
    pub fn new(train: Vec<Quadruple>, valid: Vec<Quadruple>, test: Vec<Quadruple>) -> Self {
        let mut known: HashMap<(EntityId, EntityId, TimeId, TimeId), Vec<RelationId>> =
            HashMap::new();
        for q in train.iter().chain(&valid).chain(&test) {
            known
                .entry((q.subject, q.object, q.since, q.until))
                .or_default()
                .push(q.relation);
        }
        for rels in known.values_mut() {
            rels.sort_unstable();
            rels.dedup();
        }
        Self {
            train,
            valid,
            test,
            known,
        }
    }

    /// Relations known to hold for (subject, object, time) in any split.
    pub fn known_relations(
        &self,
        subject: EntityId,
        object: EntityId,
        since: TimeId,
        until: TimeId,
    ) -> &[RelationId] {
        self.known
            .get(&(subject, object, since, until))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

#[derive(Debug, Clone)]
struct RawFact {
    subject: String,
    relation: String,
    object: String,
    since: Option<String>,
    until: Option<String>,
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let content = fs::read_to_string(path)?;
    Ok(content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

fn parse_icews_file(path: &Path) -> Result<Vec<RawFact>> {
    let mut facts = Vec::new();
    for (line_no, line) in read_lines(path)? {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: line_no,
                msg: format!("expected 4 tab-separated columns, found {}", cols.len()),
            });
        }
        facts.push(RawFact {
            subject: cols[0].to_string(),
            relation: cols[1].to_string(),
            object: cols[2].to_string(),
            since: Some(cols[3].to_string()),
            until: Some(cols[3].to_string()),
        });
    }
    Ok(facts)
}

fn parse_yago_file(path: &Path) -> Result<Vec<RawFact>> {
    let mut facts = Vec::new();
    for (line_no, line) in read_lines(path)? {
        let cols: Vec<&str> = line.split('\t').collect();
        let (since, until) = match cols.len() {
            3 => (None, None),
            5 => {
                let year: i64 = cols[4].parse().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: line_no,
                    msg: format!("invalid year '{}'", cols[4]),
                })?;
                let _ = year;
                match cols[3] {
                    "occursSince" => (Some(cols[4].to_string()), None),
                    "occursUntil" => (None, Some(cols[4].to_string())),
                    other => {
                        return Err(Error::Parse {
                            path: path.display().to_string(),
                            line: line_no,
                            msg: format!("unrecognized temporal keyword '{other}'"),
                        })
                    }
                }
            }
            n => {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: line_no,
                    msg: format!("expected 3 or 5 tab-separated columns, found {n}"),
                })
            }
        };
        facts.push(RawFact {
            subject: cols[0].to_string(),
            relation: cols[1].to_string(),
            object: cols[2].to_string(),
            since,
            until,
        });
    }
    Ok(facts)
}

enum TimeOrder {
    Lexicographic,
    Numeric,
}

fn assemble(
    splits: [Vec<RawFact>; 3],
    mode: TimeMode,
    order: TimeOrder,
) -> Result<(TemporalKG, Split)> {
    if splits[0].is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut entities = Vocab::default();
    let mut relations = Vocab::default();
    let mut time_strings: Vec<String> = Vec::new();
    for raw in splits.iter().flatten() {
        entities.intern(&raw.subject);
        entities.intern(&raw.object);
        relations.intern(&raw.relation);
        for t in raw.since.iter().chain(&raw.until) {
            time_strings.push(t.clone());
        }
    }
    time_strings.sort_unstable();
    time_strings.dedup();
    if let TimeOrder::Numeric = order {
        // lexicographic dedup first, then numeric rank
        time_strings.sort_by_key(|s| s.parse::<i64>().expect("validated during parse"));
    }
    let mut times = Vocab::default();
    for t in &time_strings {
        times.intern(t);
    }

    let to_quad = |raw: &RawFact| -> Quadruple {
        let slot = |s: &Option<String>| {
            s.as_ref()
                .map(|t| times.get(t).expect("time interned"))
                .unwrap_or(TIME_NONE)
        };
        Quadruple {
            subject: entities.get(&raw.subject).expect("entity interned"),
            relation: relations.get(&raw.relation).expect("relation interned"),
            object: entities.get(&raw.object).expect("entity interned"),
            since: slot(&raw.since),
            until: slot(&raw.until),
        }
    };

    let [train_raw, valid_raw, test_raw] = splits;
    let train: Vec<Quadruple> = train_raw.iter().map(to_quad).collect();
    let valid: Vec<Quadruple> = valid_raw.iter().map(to_quad).collect();
    let test: Vec<Quadruple> = test_raw.iter().map(to_quad).collect();

    // The agent traverses the train split only.
    let kg = TemporalKG::new(entities, relations, times, mode, train.clone());
    let split = Split::new(train, valid, test);
    Ok((kg, split))
}

/// Load ICEWS-style TSV files: `subject<TAB>relation<TAB>object<TAB>date`,
/// one fact per line, ISO-8601 dates. Vocabularies cover all three splits;
/// the traversal graph and adjacency cover the train split only.
pub fn load_icews(train: &Path, valid: &Path, test: &Path) -> Result<(TemporalKG, Split)> {
    assemble(
        [
            parse_icews_file(train)?,
            parse_icews_file(valid)?,
            parse_icews_file(test)?,
        ],
        TimeMode::Point,
        TimeOrder::Lexicographic,
    )
}

/// Load YAGO15K-style TSV files: `subject<TAB>relation<TAB>object`
/// optionally followed by `<TAB>occursSince|occursUntil<TAB>year`.
pub fn load_yago15k(train: &Path, valid: &Path, test: &Path) -> Result<(TemporalKG, Split)> {
    assemble(
        [
            parse_yago_file(train)?,
            parse_yago_file(valid)?,
            parse_yago_file(test)?,
        ],
        TimeMode::Interval,
        TimeOrder::Numeric,
    )
}

/// Serialize quadruples back to the TSV format their loader accepts.
pub fn quads_to_tsv(kg: &TemporalKG, quads: &[Quadruple]) -> String {
    let mut out = String::new();
    for q in quads {
        let s = kg.entities.name(q.subject);
        let r = kg.relations.name(q.relation);
        let o = kg.entities.name(q.object);
        match kg.mode {
            TimeMode::Point => {
                writeln!(out, "{s}\t{r}\t{o}\t{}", kg.times.name(q.since)).unwrap();
            }
            TimeMode::Interval => {
                match (q.since, q.until) {
                    (TIME_NONE, TIME_NONE) => writeln!(out, "{s}\t{r}\t{o}").unwrap(),
                    (t, TIME_NONE) => {
                        writeln!(out, "{s}\t{r}\t{o}\toccursSince\t{}", kg.times.name(t)).unwrap()
                    }
                    (TIME_NONE, t) => {
                        writeln!(out, "{s}\t{r}\t{o}\toccursUntil\t{}", kg.times.name(t)).unwrap()
                    }
                    (a, b) => {
                        writeln!(out, "{s}\t{r}\t{o}\toccursSince\t{}", kg.times.name(a)).unwrap();
                        writeln!(out, "{s}\t{r}\t{o}\toccursUntil\t{}", kg.times.name(b)).unwrap();
                    }
                };
            }
        }
    }
    out
}

/// All quad ids with at least one endpoint in `frontier`, excluding
/// `core` (sorted ascending). Output ascending by quad id.
pub fn incident_candidates(
    kg: &TemporalKG,
    frontier: &[EntityId],
    core: &[QuadId],
) -> Vec<QuadId> {
    debug_assert!(core.windows(2).all(|w| w[0] < w[1]), "core must be sorted");
    let mut out = Vec::new();
    for &e in frontier {
        for &q in kg.adjacency(e) {
            if core.binary_search(&q).is_err() {
                out.push(q);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Keep the `min(k, n)` candidates temporally nearest to the query
/// anchor; ties broken by ascending quad id. Output sorted by
/// (distance, quad id).
pub fn temporal_knn_filter(
    kg: &TemporalKG,
    candidates: &[QuadId],
    t_q: TimeId,
    k: usize,
) -> Vec<QuadId> {
    let mut keyed: Vec<(u32, QuadId)> = candidates
        .iter()
        .map(|&q| (kg.time_delta(q, t_q), q))
        .collect();
    keyed.sort_unstable();
    keyed.truncate(k);
    keyed.into_iter().map(|(_, q)| q).collect()
}
