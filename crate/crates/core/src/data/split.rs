//! Cold-start train/test split.
//!
//! 1. The final `test_window_days` of the log become the test window.
//! 2. A seeded uniform `cold_fraction` of the items seen in the train window
//!    are marked cold.
//! 3. Each cold item keeps `max(1, floor(downsample * n))` of its `n` train
//!    events, sampled uniformly; warm items keep everything.
//! 4. Test is restricted to events on cold items.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hierarchy::{load_hierarchy, Hierarchy};
use super::index::IdIndex;
use super::log::{Interaction, InteractionLog};
use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: u64 = 86_400;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitParams {
    pub test_window_days: u64,
    pub cold_fraction: f64,
    pub downsample: f64,
    pub seed: u64,
}

impl Default for SplitParams {
    fn default() -> Self {
        Self {
            test_window_days: 14,
            cold_fraction: 0.2,
            downsample: 0.01,
            seed: 0,
        }
    }
}

impl SplitParams {
    pub fn validate(&self) -> Result<()> {
        if self.test_window_days == 0 {
            return Err(Error::Parameter("test_window_days must be >= 1".into()));
        }
        if !(self.cold_fraction > 0.0 && self.cold_fraction < 1.0) {
            return Err(Error::Parameter(format!(
                "cold_fraction must lie in (0, 1), got {}",
                self.cold_fraction
            )));
        }
        if !(self.downsample >= 0.0 && self.downsample <= 1.0) {
            return Err(Error::Parameter(format!(
                "downsample must lie in [0, 1], got {}",
                self.downsample
            )));
        }
        Ok(())
    }
}

/// Number of train events a cold item with `n` of them keeps.
pub fn downsampled_count(n: usize, downsample: f64) -> usize {
    ((downsample * n as f64).floor() as usize).clamp(1, n.max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColdStartSplit {
    pub train: InteractionLog,
    pub test: InteractionLog,
    pub cold_items: BTreeSet<String>,
    pub users: IdIndex,
    pub items: IdIndex,
    pub params: SplitParams,
    /// Last train timestamp boundary: train is `<= cutoff`, test `> cutoff`.
    pub cutoff: u64,
    train_pairs: Vec<(u32, u32)>,
    seen: Vec<Vec<u32>>,
    cold_mask: Vec<bool>,
}

impl ColdStartSplit {
    /// Assembles a split from already partitioned logs.
    ///
    /// Users and items are indexed from `train`. Test events on unknown users,
    /// unknown items or warm items are dropped.
    pub fn from_parts(
        train: InteractionLog,
        test: InteractionLog,
        cold_items: BTreeSet<String>,
        params: SplitParams,
        cutoff: u64,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyData("train window is empty".into()));
        }
        let users = IdIndex::from_ids(train.iter().map(|e| e.user_id.as_str()));
        let items = IdIndex::from_ids(train.iter().map(|e| e.item_id.as_str()));
        if let Some(missing) = cold_items.iter().find(|c| items.get(c).is_none()) {
            return Err(Error::Data(format!(
                "cold item `{missing}` has no train interaction"
            )));
        }
        let test = InteractionLog::new(
            test.events
                .into_iter()
                .filter(|e| {
                    users.get(&e.user_id).is_some()
                        && items.get(&e.item_id).is_some()
                        && cold_items.contains(&e.item_id)
                })
                .collect(),
        );
        let train_pairs: Vec<(u32, u32)> = train
            .iter()
            .map(|e| {
                (
                    users.get(&e.user_id).unwrap() as u32,
                    items.get(&e.item_id).unwrap() as u32,
                )
            })
            .collect();
        let mut seen = vec![Vec::new(); users.len()];
        for &(u, i) in &train_pairs {
            seen[u as usize].push(i);
        }
        for s in &mut seen {
            s.sort_unstable();
            s.dedup();
        }
        let mut cold_mask = vec![false; items.len()];
        for c in &cold_items {
            cold_mask[items.get(c).unwrap()] = true;
        }
        Ok(Self {
            train,
            test,
            cold_items,
            users,
            items,
            params,
            cutoff,
            train_pairs,
            seen,
            cold_mask,
        })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Train events as `(user index, item index)`, in log order.
    pub fn train_pairs(&self) -> &[(u32, u32)] {
        &self.train_pairs
    }

    /// Sorted distinct items the user interacted with in train.
    pub fn seen(&self, user: usize) -> &[u32] {
        &self.seen[user]
    }

    pub fn has_seen(&self, user: usize, item: usize) -> bool {
        self.seen[user].binary_search(&(item as u32)).is_ok()
    }

    pub fn is_cold(&self, item: usize) -> bool {
        self.cold_mask[item]
    }

    pub fn cold_indices(&self) -> Vec<usize> {
        (0..self.n_items()).filter(|&i| self.cold_mask[i]).collect()
    }

    /// Cold items each user interacted with in the test window.
    pub fn test_truth(&self) -> BTreeMap<usize, BTreeSet<usize>> {
        let mut out: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for e in self.test.iter() {
            let u = self.users.get(&e.user_id).unwrap();
            let i = self.items.get(&e.item_id).unwrap();
            out.entry(u).or_default().insert(i);
        }
        out
    }

    /// The same protocol applied to the train window alone, for tuning without
    /// touching test data.
    pub fn validation_split(&self) -> Result<ColdStartSplit> {
        let params = SplitParams {
            seed: self.params.seed ^ 0x5a11_da7e,
            ..self.params
        };
        cold_start_split(&self.train, params)
    }

    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            params: self.params,
            cutoff: self.cutoff,
            n_users: self.n_users(),
            n_items: self.n_items(),
            n_train_events: self.train.len(),
            n_test_events: self.test.len(),
            n_cold_items: self.cold_items.len(),
            cold_items: self.cold_items.iter().cloned().collect(),
        }
    }
}

/// Splits `log` for cold-start evaluation. Deterministic in `params.seed`.
pub fn cold_start_split(log: &InteractionLog, params: SplitParams) -> Result<ColdStartSplit> {
    params.validate()?;
    let (min_ts, max_ts) = log
        .time_range()
        .ok_or_else(|| Error::EmptyData("cannot split an empty log".into()))?;
    let window = params.test_window_days * SECONDS_PER_DAY;
    if max_ts - min_ts <= window {
        return Err(Error::Data(format!(
            "log spans {:.1} days, not more than the {}-day test window",
            (max_ts - min_ts) as f64 / SECONDS_PER_DAY as f64,
            params.test_window_days
        )));
    }
    let cutoff = max_ts - window;
    let (train_raw, test_raw): (Vec<&Interaction>, Vec<&Interaction>) =
        log.iter().partition(|e| e.timestamp <= cutoff);
    if test_raw.is_empty() {
        return Err(Error::EmptyData("test window is empty".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut items: Vec<&str> = train_raw
        .iter()
        .map(|e| e.item_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n_cold = (params.cold_fraction * items.len() as f64).floor() as usize;
    if n_cold == 0 {
        return Err(Error::Data(format!(
            "cold fraction {} of {} items selects no cold items",
            params.cold_fraction,
            items.len()
        )));
    }
    items.shuffle(&mut rng);
    let cold_items: BTreeSet<String> = items[..n_cold].iter().map(|s| s.to_string()).collect();

    // positions of each cold item's train events, in log order
    let mut per_cold: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (pos, e) in train_raw.iter().enumerate() {
        if cold_items.contains(&e.item_id) {
            per_cold.entry(e.item_id.as_str()).or_default().push(pos);
        }
    }
    let mut keep = vec![true; train_raw.len()];
    for positions in per_cold.values() {
        let n = positions.len();
        let k = downsampled_count(n, params.downsample);
        for &p in positions {
            keep[p] = false;
        }
        for j in index::sample(&mut rng, n, k) {
            keep[positions[j]] = true;
        }
    }

    let train = InteractionLog::new(
        train_raw
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(e, _)| (*e).clone())
            .collect(),
    );
    let test = InteractionLog::new(test_raw.into_iter().cloned().collect());
    ColdStartSplit::from_parts(train, test, cold_items, params, cutoff)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub params: SplitParams,
    pub cutoff: u64,
    pub n_users: usize,
    pub n_items: usize,
    pub n_train_events: usize,
    pub n_test_events: usize,
    pub n_cold_items: usize,
    pub cold_items: Vec<String>,
}

const TABLE_MAGIC: &[u8; 4] = b"HGET";
const TABLE_VERSION: u32 = 1;

pub const MANIFEST_FILE: &str = "split.json";
pub const USERS_FILE: &str = "users.txt";
pub const ITEMS_FILE: &str = "items.txt";
pub const TRAIN_FILE: &str = "train.bin";
pub const TEST_FILE: &str = "test.bin";
pub const HIERARCHY_FILE: &str = "hierarchy.csv";

/// Writes the split and its (already filtered) hierarchy to `dir`.
///
/// Event tables are binary: magic `HGET`, u32 version, u64 count, then per
/// event u32 user index, u32 item index, u64 timestamp, f32 value, all little
/// endian.
pub fn save_prepared(dir: &Path, split: &ColdStartSplit, hierarchy: &Hierarchy) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = serde_json::to_string_pretty(&split.manifest())?;
    write_file(&dir.join(MANIFEST_FILE), manifest.as_bytes())?;
    write_file(&dir.join(USERS_FILE), join_lines(split.users.ids()).as_bytes())?;
    write_file(&dir.join(ITEMS_FILE), join_lines(split.items.ids()).as_bytes())?;
    write_table(&dir.join(TRAIN_FILE), &split.train, split)?;
    write_table(&dir.join(TEST_FILE), &split.test, split)?;
    hierarchy.write_csv(&dir.join(HIERARCHY_FILE))
}

/// Reads back what [`save_prepared`] wrote.
pub fn load_prepared(dir: &Path) -> Result<(ColdStartSplit, Hierarchy)> {
    let manifest: SplitManifest = serde_json::from_slice(&read_file(&dir.join(MANIFEST_FILE))?)?;
    let users = read_lines(&dir.join(USERS_FILE))?;
    let items = read_lines(&dir.join(ITEMS_FILE))?;
    let train = read_table(&dir.join(TRAIN_FILE), &users, &items)?;
    let test = read_table(&dir.join(TEST_FILE), &users, &items)?;
    let split = ColdStartSplit::from_parts(
        train,
        test,
        manifest.cold_items.iter().cloned().collect(),
        manifest.params,
        manifest.cutoff,
    )?;
    if split.users.ids() != users.as_slice() || split.items.ids() != items.as_slice() {
        return Err(Error::Data(format!(
            "{}: index tables disagree with the train table",
            dir.display()
        )));
    }
    let hierarchy = load_hierarchy(&dir.join(HIERARCHY_FILE))?;
    Ok((split, hierarchy))
}

fn join_lines(ids: &[String]) -> String {
    let mut s = ids.join("\n");
    s.push('\n');
    s
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = String::from_utf8(read_file(path)?)
        .map_err(|_| Error::Data(format!("{} is not UTF-8", path.display())))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn write_table(path: &Path, log: &InteractionLog, split: &ColdStartSplit) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(TABLE_MAGIC)?;
    put(&TABLE_VERSION.to_le_bytes())?;
    put(&(log.len() as u64).to_le_bytes())?;
    for e in log.iter() {
        let u = split.users.get(&e.user_id).unwrap() as u32;
        let i = split.items.get(&e.item_id).unwrap() as u32;
        put(&u.to_le_bytes())?;
        put(&i.to_le_bytes())?;
        put(&e.timestamp.to_le_bytes())?;
        put(&e.value.to_le_bytes())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_table(path: &Path, users: &[String], items: &[String]) -> Result<InteractionLog> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::Data(format!("{}: {msg}", path.display()));
    if buf.len() < 16 || &buf[..4] != TABLE_MAGIC {
        return Err(bad("not an event table".into()));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != TABLE_VERSION {
        return Err(bad(format!("unsupported table version {version}")));
    }
    let count = u64::from_le_bytes(buf[8..16].try_into().unwrap()) as usize;
    const RECORD: usize = 20;
    if buf.len() != 16 + count * RECORD {
        return Err(bad(format!(
            "expected {} bytes for {count} events, found {}",
            16 + count * RECORD,
            buf.len()
        )));
    }
    let mut events = Vec::with_capacity(count);
    for rec in buf[16..].chunks_exact(RECORD) {
        let u = u32::from_le_bytes(rec[0..4].try_into().unwrap()) as usize;
        let i = u32::from_le_bytes(rec[4..8].try_into().unwrap()) as usize;
        let ts = u64::from_le_bytes(rec[8..16].try_into().unwrap());
        let v = f32::from_le_bytes(rec[16..20].try_into().unwrap());
        let user = users.get(u).ok_or_else(|| bad(format!("user index {u} out of range")))?;
        let item = items.get(i).ok_or_else(|| bad(format!("item index {i} out of range")))?;
        events.push(Interaction::new(user.clone(), item.clone(), ts, v));
    }
    Ok(InteractionLog::new(events))
}
