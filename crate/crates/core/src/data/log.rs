use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One timestamped user-item event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub user_id: String,
    pub item_id: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub value: f32,
}

impl Interaction {
    pub fn new(user: impl Into<String>, item: impl Into<String>, timestamp: u64, value: f32) -> Self {
        Self {
            user_id: user.into(),
            item_id: item.into(),
            timestamp,
            value,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InteractionLog {
    pub events: Vec<Interaction>,
}

pub const INTERACTIONS_HEADER: [&str; 4] = ["user_id", "item_id", "timestamp", "value"];

/// Strictness of [`load_interactions`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum BadRows {
    /// The first bad row aborts the load.
    #[default]
    Reject,
    /// Bad rows are counted, logged and dropped.
    Skip,
}

impl InteractionLog {
    pub fn new(events: Vec<Interaction>) -> Self {
        Self { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interaction> {
        self.events.iter()
    }

    /// Events per user id.
    pub fn user_counts(&self) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        for e in &self.events {
            *out.entry(e.user_id.as_str()).or_insert(0) += 1;
        }
        out
    }

    /// Events per item id.
    pub fn item_counts(&self) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        for e in &self.events {
            *out.entry(e.item_id.as_str()).or_insert(0) += 1;
        }
        out
    }

    pub fn time_range(&self) -> Option<(u64, u64)> {
        let min = self.events.iter().map(|e| e.timestamp).min()?;
        let max = self.events.iter().map(|e| e.timestamp).max()?;
        Some((min, max))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(INTERACTIONS_HEADER).map_err(|e| csv_io(path, e))?;
        for e in &self.events {
            w.write_record([
                e.user_id.as_str(),
                e.item_id.as_str(),
                &e.timestamp.to_string(),
                &e.value.to_string(),
            ])
            .map_err(|e| csv_io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    }
}

/// Reads an interactions CSV with header `user_id,item_id,timestamp,value`.
///
/// Column order follows the header. Duplicate events are kept as is.
pub fn load_interactions(path: &Path, bad_rows: BadRows) -> Result<InteractionLog> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_io(path, e))?;
    let headers = reader.headers().map_err(|e| csv_io(path, e))?.clone();
    let mut column = HashMap::new();
    for name in INTERACTIONS_HEADER {
        let idx = headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Data(format!("{}: missing column `{name}`", path.display()))
        })?;
        column.insert(name, idx);
    }

    let mut events = Vec::new();
    let mut skipped = 0usize;
    for (n, record) in reader.records().enumerate() {
        // header is line 1
        let line = n + 2;
        let parsed = record
            .map_err(|e| format!("{e}"))
            .and_then(|r| parse_row(&r, &column));
        match parsed {
            Ok(ev) => events.push(ev),
            Err(message) => match bad_rows {
                BadRows::Reject => return Err(Error::Parse { line, message }),
                BadRows::Skip => {
                    log::warn!("{}:{line}: skipping bad row: {message}", path.display());
                    skipped += 1;
                }
            },
        }
    }
    if skipped > 0 {
        log::warn!("{}: skipped {skipped} bad rows", path.display());
    }
    if events.is_empty() {
        return Err(Error::EmptyData(format!("{} has no events", path.display())));
    }
    Ok(InteractionLog { events })
}

fn parse_row(
    r: &csv::StringRecord,
    column: &HashMap<&str, usize>,
) -> std::result::Result<Interaction, String> {
    let field = |name: &str| r.get(column[name]).ok_or_else(|| format!("missing field `{name}`"));
    let user_id = field("user_id")?;
    let item_id = field("item_id")?;
    if user_id.is_empty() || item_id.is_empty() {
        return Err("empty id".into());
    }
    let ts = field("timestamp")?;
    let timestamp = ts
        .parse::<u64>()
        .map_err(|_| format!("bad timestamp `{ts}`"))?;
    let v = field("value")?;
    let value = v
        .parse::<f32>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("bad value `{v}`"))?;
    Ok(Interaction::new(user_id, item_id, timestamp, value))
}

/// Maps values to `{0, 1}` (`value >= threshold` becomes 1) and drops the
/// zeros.
pub fn binarize(log: &InteractionLog, threshold: f32) -> InteractionLog {
    InteractionLog {
        events: log
            .events
            .iter()
            .filter(|e| e.value >= threshold)
            .map(|e| Interaction {
                value: 1.0,
                ..e.clone()
            })
            .collect(),
    }
}

/// Maximal subset in which every user and every item has at least `k` events.
///
/// Peels users and items alternately until nothing changes.
pub fn k_core_filter(log: &InteractionLog, k: usize) -> Result<InteractionLog> {
    if k == 0 {
        return Err(Error::Parameter("k-core needs k >= 1".into()));
    }
    let mut alive = vec![true; log.events.len()];
    loop {
        let mut users: HashMap<&str, usize> = HashMap::new();
        let mut items: HashMap<&str, usize> = HashMap::new();
        for (e, _) in log.events.iter().zip(&alive).filter(|(_, &a)| a) {
            *users.entry(&e.user_id).or_default() += 1;
            *items.entry(&e.item_id).or_default() += 1;
        }
        let mut changed = false;
        for (e, a) in log.events.iter().zip(alive.iter_mut()) {
            if *a && (users[e.user_id.as_str()] < k || items[e.item_id.as_str()] < k) {
                *a = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let events: Vec<_> = log
        .events
        .iter()
        .zip(&alive)
        .filter(|(_, &a)| a)
        .map(|(e, _)| e.clone())
        .collect();
    if events.is_empty() {
        return Err(Error::EmptyData(format!("{k}-core of the log is empty")));
    }
    Ok(InteractionLog { events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_well_formed_file() {
        let f = write("user_id,item_id,timestamp,value\nu1,i1,10,5\nu1,i2,11,3\nu2,i1,12,1\n");
        let log = load_interactions(f.path(), BadRows::Reject).unwrap();
        assert_eq!(log.len(), 3);
        assert_eq!(log.events[1], Interaction::new("u1", "i2", 11, 3.0));
    }

    #[test]
    fn header_order_is_free() {
        let f = write("timestamp,value,item_id,user_id\n10,1,i1,u1\n");
        let log = load_interactions(f.path(), BadRows::Reject).unwrap();
        assert_eq!(log.events[0], Interaction::new("u1", "i1", 10, 1.0));
    }

    #[test]
    fn malformed_timestamp_names_line() {
        let f = write("user_id,item_id,timestamp,value\nu1,i1,10,5\nu1,i2,yesterday,3\n");
        match load_interactions(f.path(), BadRows::Reject) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("timestamp"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let log = load_interactions(f.path(), BadRows::Skip).unwrap();
        assert_eq!(log.len(), 1);
    }

    #[test]
    fn duplicates_retained() {
        let f = write("user_id,item_id,timestamp,value\nu1,i1,10,1\nu1,i1,10,1\n");
        assert_eq!(load_interactions(f.path(), BadRows::Reject).unwrap().len(), 2);
    }

    #[test]
    fn missing_column_and_file() {
        let f = write("user_id,item_id,value\nu1,i1,1\n");
        let err = load_interactions(f.path(), BadRows::Reject).unwrap_err();
        assert!(err.to_string().contains("timestamp"));
        let err = load_interactions(Path::new("/nonexistent/x.csv"), BadRows::Reject).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        let empty = write("user_id,item_id,timestamp,value\n");
        assert!(matches!(
            load_interactions(empty.path(), BadRows::Reject),
            Err(Error::EmptyData(_))
        ));
    }

    fn ratings(vals: &[f32]) -> InteractionLog {
        InteractionLog::new(
            vals.iter()
                .enumerate()
                .map(|(i, &v)| Interaction::new("u", format!("i{i}"), i as u64, v))
                .collect(),
        )
    }

    #[test]
    fn binarize_is_threshold_inclusive() {
        let out = binarize(&ratings(&[1.0, 3.0, 5.0]), 3.0);
        let kept: Vec<_> = out.iter().map(|e| (e.item_id.as_str(), e.value)).collect();
        assert_eq!(kept, vec![("i1", 1.0), ("i2", 1.0)]);
        let binary = ratings(&[1.0, 1.0]);
        assert_eq!(binarize(&binary, 1.0), binary);
        assert!(binarize(&ratings(&[1.0, 2.0]), 3.0).is_empty());
    }

    fn grid(n: usize, missing: Option<(usize, usize)>) -> InteractionLog {
        let mut events = Vec::new();
        for u in 0..n {
            for i in 0..n {
                if Some((u, i)) != missing {
                    events.push(Interaction::new(format!("u{u}"), format!("i{i}"), 0, 1.0));
                }
            }
        }
        InteractionLog::new(events)
    }

    /// Naive peel: recount everything and remove a single offender at a time.
    fn peel_oracle(log: &InteractionLog, k: usize) -> BTreeSet<(String, String)> {
        let mut events: Vec<_> = log.events.clone();
        loop {
            let users = InteractionLog::new(events.clone());
            let uc = users.user_counts();
            let ic = users.item_counts();
            let bad = events
                .iter()
                .position(|e| uc[e.user_id.as_str()] < k || ic[e.item_id.as_str()] < k);
            match bad {
                Some(p) => {
                    events.remove(p);
                }
                None => break,
            }
        }
        events
            .into_iter()
            .map(|e| (e.user_id, e.item_id))
            .collect()
    }

    #[test]
    fn k_core_fixed_point_unchanged() {
        let g = grid(5, None);
        assert_eq!(k_core_filter(&g, 5).unwrap(), g);
    }

    #[test]
    fn k_core_star_cascades_to_empty() {
        let star = InteractionLog::new(
            (0..10)
                .map(|i| Interaction::new("u", format!("i{i}"), 0, 1.0))
                .collect(),
        );
        assert!(matches!(k_core_filter(&star, 5), Err(Error::EmptyData(_))));
    }

    #[test]
    fn k_core_matches_peel_oracle() {
        let g = grid(6, Some((2, 3)));
        let got: BTreeSet<_> = k_core_filter(&g, 5)
            .unwrap()
            .events
            .into_iter()
            .map(|e| (e.user_id, e.item_id))
            .collect();
        assert_eq!(got, peel_oracle(&g, 5));
        // every user still has 5 of the 6 items
        assert_eq!(got.len(), 35);

        let sparse = InteractionLog::new(
            grid(6, None)
                .events
                .into_iter()
                .enumerate()
                .filter(|(n, _)| n % 7 != 0)
                .map(|(_, e)| e)
                .collect(),
        );
        let got: BTreeSet<_> = k_core_filter(&sparse, 5)
            .map(|l| l.events.into_iter().map(|e| (e.user_id, e.item_id)).collect())
            .unwrap_or_default();
        assert_eq!(got, peel_oracle(&sparse, 5));
    }
}
