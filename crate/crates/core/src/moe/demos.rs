//! State-only demonstrations.
//!
//! File format (one record per line after the header):
//!
//! ```text
//! moe-guide-demos v1 state_dim=2 gap=4 source=bfs shortest path
//! 0,0,0.0,0.0
//! 0,5,0.25,0.0
//! ```
//!
//! Each record line is `episode_id,step_index,v1,...,v_state_dim`. The
//! `source=` value runs to the end of the header line and may contain spaces.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{check_len, Error, Result};
use crate::textio::{join_f64, read_file, write_file, Lines};

pub const DEMO_HEADER: &str = "moe-guide-demos v1";

#[derive(Debug, Clone, PartialEq)]
pub struct DemoRecord {
    pub episode: u64,
    pub step: u64,
    pub state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    pub state_dim: usize,
    pub gap: usize,
    pub source: String,
    pub records: Vec<DemoRecord>,
}

impl DemoSet {
    pub fn new(state_dim: usize, source: impl Into<String>) -> Self {
        Self {
            state_dim,
            gap: 0,
            source: source.into(),
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, episode: u64, step: u64, state: Vec<f64>) -> Result<()> {
        check_len("demo state", self.state_dim, state.len())?;
        self.records.push(DemoRecord { episode, step, state });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.records.iter().map(|r| r.state.as_slice())
    }

    /// Records grouped by episode id, preserving file order within each.
    pub fn episodes(&self) -> BTreeMap<u64, Vec<&DemoRecord>> {
        let mut map: BTreeMap<u64, Vec<&DemoRecord>> = BTreeMap::new();
        for r in &self.records {
            map.entry(r.episode).or_default().push(r);
        }
        map
    }

    /// Appends every record of `other`, which must share the state width.
    pub fn extend(&mut self, other: DemoSet) -> Result<()> {
        check_len("demo state", self.state_dim, other.state_dim)?;
        self.records.extend(other.records);
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{DEMO_HEADER} state_dim={} gap={} source={}\n",
            self.state_dim, self.gap, self.source
        );
        for r in &self.records {
            out.push_str(&format!("{},{},{}\n", r.episode, r.step, join_f64(&r.state, ",")));
        }
        out
    }

    pub fn from_text(path: &Path, text: &str) -> Result<Self> {
        let mut lines = Lines::new(path, text);
        let header = lines.next_line()?;
        let rest = header
            .strip_prefix(DEMO_HEADER)
            .ok_or_else(|| lines.err(format!("expected header `{DEMO_HEADER} ...`")))?;
        let (fields, source) = match rest.split_once("source=") {
            Some((f, s)) => (f, s.to_string()),
            None => (rest, String::new()),
        };
        let toks: Vec<&str> = fields.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(lines.err("header needs state_dim= and gap="));
        }
        let state_dim: usize = lines.kv(toks[0], "state_dim")?;
        let gap: usize = lines.kv(toks[1], "gap")?;
        let mut set = DemoSet {
            state_dim,
            gap,
            source,
            records: Vec::new(),
        };
        while let Some(line) = lines.try_next() {
            let parts: Vec<&str> = line.trim().split(',').collect();
            if parts.len() != state_dim + 2 {
                return Err(lines.err(format!(
                    "expected {} comma-separated fields, found {}",
                    state_dim + 2,
                    parts.len()
                )));
            }
            let episode = lines.parse(parts[0], "episode id")?;
            let step = lines.parse(parts[1], "step index")?;
            let state = lines.parse_all(&parts[2..], "state value")?;
            set.records.push(DemoRecord { episode, step, state });
        }
        Ok(set)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "demonstration file not found"),
            ));
        }
        Self::from_text(path, &read_file(path)?)
    }
}

/// Keeps every `(gap + 1)`-th record of each episode, starting with the
/// first. Applying a gap to an already-thinned set composes the strides.
pub fn subsample_demos(full: &DemoSet, gap: usize) -> DemoSet {
    let stride = gap + 1;
    let mut position: BTreeMap<u64, usize> = BTreeMap::new();
    let records = full
        .records
        .iter()
        .filter(|r| {
            let k = position.entry(r.episode).or_insert(0);
            let keep = k.is_multiple_of(stride);
            *k += 1;
            keep
        })
        .cloned()
        .collect();
    DemoSet {
        state_dim: full.state_dim,
        gap: (full.gap + 1) * stride - 1,
        source: full.source.clone(),
        records,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn episode(len: u64) -> DemoSet {
        let mut d = DemoSet::new(2, "test");
        for s in 0..len {
            d.push(0, s, vec![s as f64, -(s as f64) / 3.0]).unwrap();
        }
        d
    }

    fn steps(d: &DemoSet) -> Vec<u64> {
        d.records.iter().map(|r| r.step).collect()
    }

    #[test]
    fn gap_four_keeps_every_fifth() {
        let d = subsample_demos(&episode(20), 4);
        assert_eq!(steps(&d), vec![0, 5, 10, 15]);
        assert_eq!(d.gap, 4);
    }

    #[test]
    fn gap_zero_is_identity() {
        let full = episode(7);
        assert_eq!(subsample_demos(&full, 0), full);
    }

    #[test]
    fn large_gap_keeps_first_state() {
        assert_eq!(steps(&subsample_demos(&episode(20), 19)), vec![0]);
    }

    #[test]
    fn episodes_are_thinned_independently() {
        let mut d = DemoSet::new(1, "two");
        for ep in 0..2 {
            for s in 0..6 {
                d.push(ep, s, vec![s as f64]).unwrap();
            }
        }
        let t = subsample_demos(&d, 2);
        let eps = t.episodes();
        assert_eq!(eps[&0].iter().map(|r| r.step).collect::<Vec<_>>(), vec![0, 3]);
        assert_eq!(eps[&1].iter().map(|r| r.step).collect::<Vec<_>>(), vec![0, 3]);
    }

    #[test]
    fn empty_set_passes_through() {
        let d = DemoSet::new(3, "none");
        assert!(subsample_demos(&d, 4).is_empty());
    }

    #[test]
    fn text_round_trip_is_byte_identical() {
        let mut d = subsample_demos(&episode(11), 1);
        d.source = "bfs shortest path".into();
        let text = d.to_text();
        let back = DemoSet::from_text(Path::new("d"), &text).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn push_rejects_wrong_width() {
        assert!(DemoSet::new(2, "x").push(0, 0, vec![1.0]).is_err());
    }

    #[test]
    fn parse_reports_line_of_bad_record() {
        let text = "moe-guide-demos v1 state_dim=2 gap=0 source=x\n0,0,1.0,2.0\n0,1,1.0\n";
        let err = DemoSet::from_text(Path::new("demo.txt"), text).unwrap_err();
        assert!(err.to_string().starts_with("demo.txt:3"), "{err}");
    }
}
