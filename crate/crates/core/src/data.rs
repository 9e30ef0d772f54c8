//! Click-log ingestion: parsing, session assembly and filtering, temporal
//! split, prefix expansion, batching, and the prepared text formats.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::hash::Hasher;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate};
use fnv::FnvHasher;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{build_graph, pad_graph, PaddedGraph};
use crate::tensor::Scalar;

pub const MS_PER_DAY: i64 = 86_400_000;

/// Fraction of skipped rows above which [`ParsedEvents::warning`] fires.
pub const SKIP_WARNING_RATIO: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawEvent {
    pub session_id: String,
    /// Epoch milliseconds.
    pub timestamp: i64,
    pub item_id: String,
}

/// Raw click-log layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogFormat {
    /// `session_id,ISO-8601 timestamp,item_id,category`, no header.
    Yoochoose,
    /// `sessionId;userId;itemId;timeframe;eventdate` with a header row.
    Diginetica,
}

impl FromStr for LogFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "yoochoose" => Ok(LogFormat::Yoochoose),
            "diginetica" => Ok(LogFormat::Diginetica),
            _ => Err(Error::Config(format!(
                "unknown log format `{s}` (expected yoochoose or diginetica)"
            ))),
        }
    }
}

impl fmt::Display for LogFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogFormat::Yoochoose => "yoochoose",
            LogFormat::Diginetica => "diginetica",
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct ParsedEvents {
    pub events: Vec<RawEvent>,
    /// Data rows seen (header excluded).
    pub rows: usize,
    pub skipped: usize,
}

impl ParsedEvents {
    pub fn skipped_ratio(&self) -> f64 {
        if self.rows == 0 {
            0.0
        } else {
            self.skipped as f64 / self.rows as f64
        }
    }

    /// Set when more than 1% of rows were unusable.
    pub fn warning(&self) -> Option<String> {
        (self.skipped_ratio() > SKIP_WARNING_RATIO).then(|| {
            format!(
                "skipped {} of {} rows ({:.2}%)",
                self.skipped,
                self.rows,
                100.0 * self.skipped_ratio()
            )
        })
    }
}

fn parse_yoochoose(line: &str) -> Option<RawEvent> {
    let mut fields = line.split(',');
    let session = fields.next()?.trim();
    let ts = fields.next()?.trim();
    let item = fields.next()?.trim();
    if session.is_empty() || item.is_empty() {
        return None;
    }
    let timestamp = DateTime::parse_from_rfc3339(ts).ok()?.timestamp_millis();
    Some(RawEvent {
        session_id: session.to_string(),
        timestamp,
        item_id: item.to_string(),
    })
}

fn parse_diginetica(line: &str) -> Option<RawEvent> {
    let fields: Vec<&str> = line.split(';').map(str::trim).collect();
    let [session, _user, item, timeframe, date] = fields.as_slice() else {
        return None;
    };
    if session.is_empty() || item.is_empty() {
        return None;
    }
    let offset: i64 = timeframe.parse().ok()?;
    let day = NaiveDate::parse_from_str(date, "%Y-%m-%d").ok()?;
    let midnight = day.and_hms_opt(0, 0, 0)?.and_utc().timestamp_millis();
    Some(RawEvent {
        session_id: session.to_string(),
        timestamp: midnight + offset,
        item_id: item.to_string(),
    })
}

/// Reads one event per data row. Unusable rows are counted, not fatal.
///
/// Diginetica timestamps are `eventdate` midnight (UTC) plus `timeframe`
/// milliseconds.
pub fn parse_events<R: BufRead>(source: R, format: LogFormat) -> Result<ParsedEvents> {
    let mut out = ParsedEvents::default();
    for (lineno, line) in source.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if format == LogFormat::Diginetica && lineno == 0 && line.starts_with("sessionId") {
            continue;
        }
        out.rows += 1;
        let event = match format {
            LogFormat::Yoochoose => parse_yoochoose(line),
            LogFormat::Diginetica => parse_diginetica(line),
        };
        match event {
            Some(e) => out.events.push(e),
            None => out.skipped += 1,
        }
    }
    Ok(out)
}

/// Bijection between external item ids and dense indices `0..m`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ItemVocabulary {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl ItemVocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index of `id`, inserting it if new.
    pub fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), self.ids.len() - 1);
        self.ids.len() - 1
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn external(&self, index: usize) -> Option<&str> {
        self.ids.get(index).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Maps a list of external ids, failing on the first unknown one.
    pub fn encode(&self, ids: &[&str]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| {
                self.index_of(id)
                    .ok_or_else(|| Error::UnknownItem(id.to_string()))
            })
            .collect()
    }

    /// Text form: `index<TAB>external_id` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, id) in self.ids.iter().enumerate() {
            s.push_str(&format!("{i}\t{id}\n"));
        }
        s
    }

    /// FNV-1a (64-bit) of [`ItemVocabulary::to_text`].
    pub fn fingerprint(&self) -> u64 {
        let mut h = FnvHasher::default();
        h.write(self.to_text().as_bytes());
        h.finish()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut vocab = Self::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Parse {
                line: lineno + 1,
                msg: msg.to_string(),
            };
            let (idx, id) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected index<TAB>id"))?;
            let idx: usize = idx.parse().map_err(|_| bad("bad index"))?;
            if idx != vocab.len() {
                return Err(bad("indices must be dense and ascending"));
            }
            if id.is_empty() || vocab.index_of(id).is_some() {
                return Err(bad("empty or duplicate item id"));
            }
            vocab.intern(id);
        }
        Ok(vocab)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// A time-ordered session over vocabulary indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Session {
    pub id: String,
    pub items: Vec<usize>,
    /// Timestamp of the last event, epoch milliseconds.
    pub last_timestamp: i64,
}

#[derive(Clone, Copy, Debug)]
pub struct FilterConfig {
    pub min_item_count: usize,
    pub min_session_length: usize,
    /// Stop after one item pass and one session pass instead of repeating
    /// both until nothing changes.
    pub single_pass: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_item_count: 5,
            min_session_length: 2,
            single_pass: false,
        }
    }
}

/// Sessions keyed by external item id, before vocabulary assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawSession {
    pub id: String,
    pub items: Vec<String>,
    pub last_timestamp: i64,
}

/// Groups events by session and orders each session by timestamp; ties keep
/// input order. Sessions are ordered by first appearance in the input.
pub fn group_sessions(events: &[RawEvent]) -> Vec<RawSession> {
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut grouped: Vec<(&str, Vec<&RawEvent>)> = Vec::new();
    for e in events {
        let i = *slot.entry(&e.session_id).or_insert_with(|| {
            grouped.push((&e.session_id, Vec::new()));
            grouped.len() - 1
        });
        grouped[i].1.push(e);
    }
    grouped
        .into_iter()
        .map(|(id, mut evs)| {
            evs.sort_by_key(|e| e.timestamp);
            RawSession {
                id: id.to_string(),
                last_timestamp: evs.last().map_or(0, |e| e.timestamp),
                items: evs.iter().map(|e| e.item_id.clone()).collect(),
            }
        })
        .collect()
}

/// Drops rare items, then short sessions.
pub fn filter_sessions(mut sessions: Vec<RawSession>, cfg: FilterConfig) -> Vec<RawSession> {
    loop {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for s in &sessions {
            for item in &s.items {
                *counts.entry(item.as_str()).or_default() += 1;
            }
        }
        let rare: std::collections::HashSet<String> = counts
            .into_iter()
            .filter(|&(_, c)| c < cfg.min_item_count)
            .map(|(k, _)| k.to_string())
            .collect();
        let before: usize = sessions.iter().map(|s| s.items.len()).sum::<usize>() + sessions.len();
        for s in &mut sessions {
            s.items.retain(|i| !rare.contains(i));
        }
        sessions.retain(|s| s.items.len() >= cfg.min_session_length);
        let after: usize = sessions.iter().map(|s| s.items.len()).sum::<usize>() + sessions.len();
        if cfg.single_pass || after == before {
            return sessions;
        }
    }
}

/// Groups, filters, and indexes sessions. Vocabulary indices follow first
/// occurrence over the surviving sessions.
pub fn build_and_filter(
    events: &[RawEvent],
    cfg: FilterConfig,
) -> Result<(Vec<Session>, ItemVocabulary)> {
    let kept = filter_sessions(group_sessions(events), cfg);
    if kept.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no session has {} or more items appearing at least {} times",
            cfg.min_session_length, cfg.min_item_count
        )));
    }
    let mut vocab = ItemVocabulary::new();
    let sessions = kept
        .into_iter()
        .map(|s| Session {
            items: s.items.iter().map(|i| vocab.intern(i)).collect(),
            id: s.id,
            last_timestamp: s.last_timestamp,
        })
        .collect();
    Ok((sessions, vocab))
}

/// Splits by the time of each session's last event. Sessions ending after
/// `max_last − test_window_ms` form the test set; test items never seen in
/// training are removed, and test sessions left with fewer than two items
/// are dropped.
pub fn split_by_time(
    sessions: Vec<Session>,
    test_window_ms: i64,
) -> Result<(Vec<Session>, Vec<Session>)> {
    let max_last = sessions
        .iter()
        .map(|s| s.last_timestamp)
        .max()
        .ok_or_else(|| Error::Split("no sessions to split".into()))?;
    let boundary = max_last - test_window_ms;
    let (mut test, train): (Vec<_>, Vec<_>) = sessions
        .into_iter()
        .partition(|s| s.last_timestamp > boundary);
    if train.is_empty() {
        return Err(Error::Split(format!(
            "empty training set at boundary {boundary}"
        )));
    }
    let seen: std::collections::HashSet<usize> =
        train.iter().flat_map(|s| s.items.iter().copied()).collect();
    for s in &mut test {
        s.items.retain(|i| seen.contains(i));
    }
    test.retain(|s| s.items.len() >= 2);
    if test.is_empty() {
        return Err(Error::Split(format!(
            "empty test set at boundary {boundary}"
        )));
    }
    Ok((train, test))
}

/// Exact rational fraction in `(0, 1]`, written `a/b` or as a decimal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub const ONE: Fraction = Fraction { num: 1, den: 1 };

    /// `⌈n · num / den⌉`.
    pub fn of(self, n: usize) -> usize {
        let n = n as u128;
        let (a, b) = (self.num as u128, self.den as u128);
        (n * a).div_ceil(b) as usize
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Fraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "bad fraction `{s}` (expected a/b or a decimal in (0, 1])"
            ))
        };
        let frac = if let Some((a, b)) = s.split_once('/') {
            Fraction {
                num: a.trim().parse().map_err(|_| bad())?,
                den: b.trim().parse().map_err(|_| bad())?,
            }
        } else {
            let s = s.trim();
            let (int, dec) = s.split_once('.').unwrap_or((s, ""));
            if dec.len() > 18 || !dec.chars().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            let den = 10u64.pow(dec.len() as u32);
            let int: u64 = if int.is_empty() {
                0
            } else {
                int.parse().map_err(|_| bad())?
            };
            let dec: u64 = if dec.is_empty() {
                0
            } else {
                dec.parse().map_err(|_| bad())?
            };
            Fraction {
                num: int
                    .checked_mul(den)
                    .and_then(|v| v.checked_add(dec))
                    .ok_or_else(bad)?,
                den,
            }
        };
        if frac.den == 0 || frac.num == 0 || frac.num > frac.den {
            return Err(bad());
        }
        Ok(frac)
    }
}

/// Keeps the most recent `⌈n · fraction⌉` sessions (by last event time,
/// stable), returned in their original relative order.
pub fn select_recent(sessions: Vec<Session>, fraction: Fraction) -> Vec<Session> {
    let keep = fraction.of(sessions.len());
    let mut order: Vec<usize> = (0..sessions.len()).collect();
    order.sort_by_key(|&i| sessions[i].last_timestamp);
    let mut chosen = vec![false; sessions.len()];
    for &i in &order[sessions.len() - keep..] {
        chosen[i] = true;
    }
    sessions
        .into_iter()
        .zip(chosen)
        .filter_map(|(s, c)| c.then_some(s))
        .collect()
}

/// Input prefix and the item that followed it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TrainExample {
    pub prefix: Vec<usize>,
    pub label: usize,
}

/// `[v1..vn]` → `([v1], v2), ([v1, v2], v3), …, ([v1..v(n-1)], vn)`.
pub fn expand_prefixes(items: &[usize]) -> Result<Vec<TrainExample>> {
    if items.len() < 2 {
        return Err(Error::Contract(format!(
            "cannot expand a session of length {}",
            items.len()
        )));
    }
    Ok((1..items.len())
        .map(|k| TrainExample {
            prefix: items[..k].to_vec(),
            label: items[k],
        })
        .collect())
}

pub fn expand_all(sessions: &[Session]) -> Result<Vec<TrainExample>> {
    let mut out = Vec::new();
    for s in sessions {
        out.extend(expand_prefixes(&s.items)?);
    }
    Ok(out)
}

/// Examples of one batch with their graphs padded to a common size.
#[derive(Clone, Debug)]
pub struct Batch<'a, T: Scalar = f32> {
    pub examples: Vec<&'a TrainExample>,
    pub graphs: Vec<PaddedGraph<T>>,
    pub max_nodes: usize,
}

impl<T: Scalar> Batch<'_, T> {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Shuffled batches over a fixed set of examples.
pub struct Batches<'a, T: Scalar = f32> {
    examples: &'a [TrainExample],
    order: Vec<usize>,
    batch_size: usize,
    pad_index: usize,
    pos: usize,
    _scalar: std::marker::PhantomData<T>,
}

impl<'a, T: Scalar> Batches<'a, T> {
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn num_batches(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }
}

impl<'a, T: Scalar> Iterator for Batches<'a, T> {
    type Item = Batch<'a, T>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let examples: Vec<&TrainExample> = self.order[self.pos..end]
            .iter()
            .map(|&i| &self.examples[i])
            .collect();
        self.pos = end;
        let graphs: Vec<_> = examples
            .iter()
            .map(|e| build_graph(&e.prefix).expect("prefixes validated"))
            .collect();
        let max_nodes = graphs.iter().map(|g| g.len()).max().unwrap_or(0);
        let graphs = graphs
            .iter()
            .map(|g| pad_graph(g, max_nodes, self.pad_index).expect("max covers all"))
            .collect();
        Some(Batch {
            examples,
            graphs,
            max_nodes,
        })
    }
}

/// Seeded shuffle into batches of `batch_size`; the last batch may be short.
/// Every batch pads its graphs to the batch's largest node count using
/// `pad_index`.
pub fn make_batches<T: Scalar>(
    examples: &[TrainExample],
    batch_size: usize,
    seed: u64,
    pad_index: usize,
) -> Result<Batches<'_, T>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be at least 1".into()));
    }
    if let Some(i) = examples.iter().position(|e| e.prefix.is_empty()) {
        return Err(Error::Contract(format!("example {i} has an empty prefix")));
    }
    let mut order: Vec<usize> = (0..examples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Batches {
        examples,
        order,
        batch_size,
        pad_index,
        pos: 0,
        _scalar: std::marker::PhantomData,
    })
}

/// One example per line: `label<TAB>item,item,...`.
pub fn examples_to_text(examples: &[TrainExample]) -> String {
    let mut s = String::new();
    for e in examples {
        s.push_str(&e.label.to_string());
        s.push('\t');
        let items: Vec<String> = e.prefix.iter().map(usize::to_string).collect();
        s.push_str(&items.join(","));
        s.push('\n');
    }
    s
}

pub fn parse_examples(text: &str) -> Result<Vec<TrainExample>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            line: lineno + 1,
            msg: msg.to_string(),
        };
        let (label, items) = line
            .split_once('\t')
            .ok_or_else(|| bad("expected label<TAB>items"))?;
        let label = label.parse().map_err(|_| bad("bad label"))?;
        let prefix = items
            .split(',')
            .map(|t| t.parse::<usize>().map_err(|_| bad("bad item index")))
            .collect::<Result<Vec<_>>>()?;
        out.push(TrainExample { prefix, label });
    }
    Ok(out)
}

pub fn save_examples(path: &Path, examples: &[TrainExample]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(examples_to_text(examples).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_examples(path: &Path) -> Result<Vec<TrainExample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_examples(&text)
}

/// Checks every index in `examples` against a vocabulary of `num_items`.
pub fn check_indices(examples: &[TrainExample], num_items: usize) -> Result<()> {
    for (i, e) in examples.iter().enumerate() {
        if e.label >= num_items || e.prefix.iter().any(|&v| v >= num_items) {
            return Err(Error::Contract(format!(
                "example {i} references an item outside the {num_items}-item vocabulary"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(session: &str, ts: i64, item: &str) -> RawEvent {
        RawEvent {
            session_id: session.into(),
            timestamp: ts,
            item_id: item.into(),
        }
    }

    #[test]
    fn yoochoose_row() {
        let src = "1,2014-04-07T10:51:09.277Z,214536502,0\n";
        let parsed = parse_events(src.as_bytes(), LogFormat::Yoochoose).unwrap();
        assert_eq!(parsed.events.len(), 1);
        assert_eq!(parsed.events[0].session_id, "1");
        assert_eq!(parsed.events[0].item_id, "214536502");
        assert_eq!(parsed.events[0].timestamp, 1_396_867_869_277);
    }

    #[test]
    fn empty_stream() {
        let parsed = parse_events(&b""[..], LogFormat::Yoochoose).unwrap();
        assert!(parsed.events.is_empty());
        assert!(parsed.warning().is_none());
    }

    #[test]
    fn diginetica_rows() {
        let src = "sessionId;userId;itemId;timeframe;eventdate\n\
                   1;NA;81766;526309;2016-05-09\n\
                   1;NA;31331;1031018;2016-05-09\n";
        let parsed = parse_events(src.as_bytes(), LogFormat::Diginetica).unwrap();
        assert_eq!(parsed.rows, 2);
        assert_eq!(parsed.events[0].item_id, "81766");
        assert!(parsed.events[0].timestamp < parsed.events[1].timestamp);
    }

    #[test]
    fn bad_timestamps_are_counted() {
        let src = "1,not-a-time,5,0\n1,2014-04-07T10:51:09.277Z,5,0\n";
        let parsed = parse_events(src.as_bytes(), LogFormat::Yoochoose).unwrap();
        assert_eq!(parsed.events.len(), 1);
        assert_eq!(parsed.skipped, 1);
        assert!(parsed.warning().is_some());
    }

    #[test]
    fn unknown_format_rejected() {
        assert!(matches!("csv".parse::<LogFormat>(), Err(Error::Config(_))));
    }

    #[test]
    fn rare_item_removed() {
        let mut events = Vec::new();
        for s in 0..5 {
            let id = format!("s{s}");
            events.push(ev(&id, 1, "a"));
            events.push(ev(&id, 2, "b"));
        }
        for s in 0..4 {
            events.push(ev(&format!("s{s}"), 3, "rare"));
        }
        let (sessions, vocab) = build_and_filter(&events, FilterConfig::default()).unwrap();
        assert!(vocab.index_of("rare").is_none());
        assert_eq!(vocab.len(), 2);
        assert!(sessions.iter().all(|s| s.items.len() == 2));
    }

    #[test]
    fn session_left_with_one_item_dropped() {
        let mut events = Vec::new();
        for s in 0..5 {
            let id = format!("s{s}");
            events.push(ev(&id, 1, "a"));
            events.push(ev(&id, 2, "b"));
        }
        events.push(ev("short", 1, "a"));
        events.push(ev("short", 2, "rare"));
        let (sessions, _) = build_and_filter(&events, FilterConfig::default()).unwrap();
        assert_eq!(sessions.len(), 5);
        assert!(sessions.iter().all(|s| s.id != "short"));
    }

    #[test]
    fn no_survivors_is_error() {
        let events = vec![ev("s", 1, "a"), ev("s", 2, "b")];
        assert!(matches!(
            build_and_filter(&events, FilterConfig::default()),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn ties_keep_input_order() {
        let events = vec![ev("s", 5, "x"), ev("s", 5, "y"), ev("s", 1, "z")];
        let sessions = group_sessions(&events);
        assert_eq!(sessions[0].items, vec!["z", "x", "y"]);
        assert_eq!(sessions[0].last_timestamp, 5);
    }

    fn session(id: &str, items: &[usize], last: i64) -> Session {
        Session {
            id: id.into(),
            items: items.to_vec(),
            last_timestamp: last,
        }
    }

    #[test]
    fn split_one_each_side() {
        let s = vec![
            session("a", &[0, 1], 0),
            session("b", &[1, 0], 10 * MS_PER_DAY),
        ];
        let (train, test) = split_by_time(s, MS_PER_DAY).unwrap();
        assert_eq!((train.len(), test.len()), (1, 1));
    }

    #[test]
    fn split_all_old_is_error() {
        let s = vec![session("a", &[0, 1], 0), session("b", &[1, 0], 0)];
        // Both end at the max timestamp, so everything lands in test.
        assert!(matches!(split_by_time(s, MS_PER_DAY), Err(Error::Split(_))));
    }

    #[test]
    fn split_removes_unseen_test_items() {
        let s = vec![
            session("a", &[0, 1], 0),
            session("b", &[0, 2, 1], 10 * MS_PER_DAY),
        ];
        let (_, test) = split_by_time(s, MS_PER_DAY).unwrap();
        assert_eq!(test[0].items, vec![0, 1]);
    }

    #[test]
    fn expansion() {
        let ex = expand_prefixes(&[7, 8, 9]).unwrap();
        assert_eq!(
            ex,
            vec![
                TrainExample {
                    prefix: vec![7],
                    label: 8
                },
                TrainExample {
                    prefix: vec![7, 8],
                    label: 9
                },
            ]
        );
        assert_eq!(expand_prefixes(&[1, 2]).unwrap().len(), 1);
        assert_eq!(
            expand_prefixes(&(0..10).collect::<Vec<_>>()).unwrap().len(),
            9
        );
        assert!(expand_prefixes(&[1]).is_err());
    }

    #[test]
    fn fraction_parsing_and_ceiling() {
        let f: Fraction = "1/64".parse().unwrap();
        assert_eq!(f.of(128), 2);
        assert_eq!(f.of(129), 3);
        assert_eq!("0.5".parse::<Fraction>().unwrap().of(3), 2);
        assert!("0".parse::<Fraction>().is_err());
        assert!("3/2".parse::<Fraction>().is_err());
    }

    #[test]
    fn select_recent_keeps_latest() {
        let sessions: Vec<Session> = (0..128)
            .map(|i| session(&i.to_string(), &[0, 1], (127 - i) as i64))
            .collect();
        let kept = select_recent(sessions, "1/64".parse().unwrap());
        let ids: Vec<&str> = kept.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, vec!["0", "1"]);
    }

    #[test]
    fn batch_sizes() {
        let examples: Vec<TrainExample> = (0..250)
            .map(|i| TrainExample {
                prefix: vec![i % 7],
                label: 0,
            })
            .collect();
        let sizes: Vec<usize> = make_batches::<f32>(&examples, 100, 1, 7)
            .unwrap()
            .map(|b| b.len())
            .collect();
        assert_eq!(sizes, vec![100, 100, 50]);
    }

    #[test]
    fn batches_pad_to_batch_max() {
        let examples = vec![
            TrainExample {
                prefix: vec![0],
                label: 1,
            },
            TrainExample {
                prefix: vec![0, 1, 2],
                label: 1,
            },
        ];
        let batch = make_batches::<f32>(&examples, 2, 0, 3)
            .unwrap()
            .next()
            .unwrap();
        assert_eq!(batch.max_nodes, 3);
        assert!(batch.graphs.iter().all(|g| g.nodes.len() == 3));
        let masks: Vec<usize> = batch.graphs.iter().map(|g| g.real_nodes()).collect();
        assert!(masks.contains(&1) && masks.contains(&3));
    }

    #[test]
    fn vocabulary_text_round_trip() {
        let mut v = ItemVocabulary::new();
        for id in ["x", "y", "z"] {
            v.intern(id);
        }
        let back = ItemVocabulary::parse(&v.to_text()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.fingerprint(), v.fingerprint());
        assert!(matches!(v.encode(&["x", "q"]), Err(Error::UnknownItem(id)) if id == "q"));
    }

    #[test]
    fn examples_text_round_trip() {
        let ex = vec![
            TrainExample {
                prefix: vec![3, 1],
                label: 2,
            },
            TrainExample {
                prefix: vec![0],
                label: 5,
            },
        ];
        assert_eq!(examples_to_text(&ex), "2\t3,1\n5\t0\n");
        assert_eq!(parse_examples(&examples_to_text(&ex)).unwrap(), ex);
    }
}
