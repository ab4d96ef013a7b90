//! Daily relationship graph sets and their builders.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calendar::TradingCalendar;
use crate::market::{NewsRecord, Panel};
use crate::rolling;
use crate::{FriError, Result};

/// A sequence of daily graphs over a fixed node set.
///
/// Edges are stored per day as a map from a canonical index pair (i, j)
/// with i < j to the normalized weight ν ∈ (0, 1]; absence of a pair
/// means no edge (μ = 0, ν = 0). On any day with at least one edge the
/// maximum weight is exactly 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSet {
    calendar: TradingCalendar,
    nodes: Vec<String>,
    index: HashMap<String, u32>,
    days: Vec<BTreeMap<(u32, u32), f64>>,
}

/// Per-day edge presence and weight for one pair, over all days.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSeries {
    /// Canonical pair, lexicographically smaller ticker first.
    pub pair: (String, String),
    pub mu: Vec<bool>,
    pub nu: Vec<f64>,
}

/// Nodes with and without incident edges on one day.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePartition {
    pub t: usize,
    /// Node indices with degree >= 1, ascending.
    pub connected: Vec<u32>,
    /// Node indices with degree 0, ascending.
    pub isolated: Vec<u32>,
}

impl GraphSet {
    /// Builds a graph set, validating node ordering, day count, canonical
    /// pair keys, and per-day max-weight normalization.
    pub fn new(
        calendar: TradingCalendar,
        nodes: Vec<String>,
        days: Vec<BTreeMap<(u32, u32), f64>>,
    ) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(FriError::InvalidParameter {
                name: "nodes",
                msg: "need at least 2 nodes".into(),
            });
        }
        for w in nodes.windows(2) {
            if w[0] >= w[1] {
                return Err(FriError::InvalidParameter {
                    name: "nodes",
                    msg: format!("not sorted/unique at {:?} -> {:?}", w[0], w[1]),
                });
            }
        }
        if days.len() != calendar.len() {
            return Err(FriError::CalendarMismatch(format!(
                "{} day maps for {} trading days",
                days.len(),
                calendar.len()
            )));
        }
        let n = nodes.len() as u32;
        for (t, edges) in days.iter().enumerate() {
            let mut max_nu = 0.0f64;
            for (&(i, j), &nu) in edges {
                if i >= j || j >= n {
                    return Err(FriError::InvalidParameter {
                        name: "edges",
                        msg: format!("day {t}: bad pair ({i}, {j}) for {n} nodes"),
                    });
                }
                if !(nu > 0.0 && nu <= 1.0 + 1e-12) {
                    return Err(FriError::InvalidParameter {
                        name: "edges",
                        msg: format!("day {t}: weight {nu} outside (0, 1]"),
                    });
                }
                max_nu = max_nu.max(nu);
            }
            if !edges.is_empty() && (max_nu - 1.0).abs() > 1e-9 {
                return Err(FriError::InvalidParameter {
                    name: "edges",
                    msg: format!("day {t}: maximum weight {max_nu} != 1 (not normalized)"),
                });
            }
        }
        let index = nodes
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        Ok(Self {
            calendar,
            nodes,
            index,
            days,
        })
    }

    pub fn calendar(&self) -> &TradingCalendar {
        &self.calendar
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_index(&self, ticker: &str) -> Option<u32> {
        self.index.get(ticker).copied()
    }

    pub fn node_name(&self, i: u32) -> &str {
        &self.nodes[i as usize]
    }

    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    /// Edge map of day `t`.
    pub fn edges_at(&self, t: usize) -> &BTreeMap<(u32, u32), f64> {
        &self.days[t]
    }

    /// Errors unless this graph's calendar is the returns calendar plus
    /// the one leading day that return computation dropped.
    pub fn check_returns_alignment(&self, returns: &Panel) -> Result<()> {
        if !self.calendar.aligns_with_returns_of(returns.calendar()) {
            return Err(FriError::CalendarMismatch(
                "graph calendar must equal the returns calendar preceded by one day".into(),
            ));
        }
        if self.nodes.iter().any(|n| returns.ticker_index(n).is_none()) {
            return Err(FriError::CalendarMismatch(
                "graph node missing from returns panel".into(),
            ));
        }
        Ok(())
    }

    fn pair_indices(&self, a: &str, b: &str) -> Result<(u32, u32)> {
        let ia = self
            .node_index(a)
            .ok_or_else(|| FriError::UnknownTicker(a.to_string()))?;
        let ib = self
            .node_index(b)
            .ok_or_else(|| FriError::UnknownTicker(b.to_string()))?;
        if ia == ib {
            return Err(FriError::InvalidParameter {
                name: "pair",
                msg: format!("self-pair {a}"),
            });
        }
        Ok((ia.min(ib), ia.max(ib)))
    }

    /// Per-day μ and ν for one pair; all zeros if the pair never connects.
    pub fn edge_series(&self, a: &str, b: &str) -> Result<EdgeSeries> {
        let key = self.pair_indices(a, b)?;
        let mut mu = Vec::with_capacity(self.days.len());
        let mut nu = Vec::with_capacity(self.days.len());
        for edges in &self.days {
            match edges.get(&key) {
                Some(&v) => {
                    mu.push(true);
                    nu.push(v);
                }
                None => {
                    mu.push(false);
                    nu.push(0.0);
                }
            }
        }
        Ok(EdgeSeries {
            pair: (
                self.node_name(key.0).to_string(),
                self.node_name(key.1).to_string(),
            ),
            mu,
            nu,
        })
    }

    /// Splits nodes into connected (degree >= 1) and isolated at day `t`.
    pub fn node_partition(&self, t: usize) -> Result<NodePartition> {
        if t >= self.days.len() {
            return Err(FriError::DayOutOfRange {
                t,
                min: 0,
                max: self.days.len() - 1,
            });
        }
        let mut is_connected = vec![false; self.nodes.len()];
        for &(i, j) in self.days[t].keys() {
            is_connected[i as usize] = true;
            is_connected[j as usize] = true;
        }
        let mut connected = Vec::new();
        let mut isolated = Vec::new();
        for (i, c) in is_connected.iter().enumerate() {
            if *c {
                connected.push(i as u32);
            } else {
                isolated.push(i as u32);
            }
        }
        Ok(NodePartition {
            t,
            connected,
            isolated,
        })
    }

    /// Number of days on which the pair has an edge.
    pub fn edge_count(&self, a: &str, b: &str) -> Result<usize> {
        let key = self.pair_indices(a, b)?;
        Ok(self.days.iter().filter(|e| e.contains_key(&key)).count())
    }

    /// Edge-day counts for every pair that is ever connected.
    pub fn edge_counts(&self) -> BTreeMap<(u32, u32), usize> {
        let mut counts = BTreeMap::new();
        for edges in &self.days {
            for key in edges.keys() {
                *counts.entry(*key).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Relabels edge endpoints through a node permutation; the node list
    /// itself is unchanged, so per-day edge counts are preserved.
    pub fn permute_nodes(&self, perm: &[u32]) -> Result<GraphSet> {
        let n = self.nodes.len();
        if perm.len() != n {
            return Err(FriError::InvalidParameter {
                name: "perm",
                msg: format!("length {} for {} nodes", perm.len(), n),
            });
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if (p as usize) >= n || seen[p as usize] {
                return Err(FriError::InvalidParameter {
                    name: "perm",
                    msg: "not a permutation".into(),
                });
            }
            seen[p as usize] = true;
        }
        let days = self
            .days
            .iter()
            .map(|edges| {
                edges
                    .iter()
                    .map(|(&(i, j), &nu)| {
                        let (a, b) = (perm[i as usize], perm[j as usize]);
                        ((a.min(b), a.max(b)), nu)
                    })
                    .collect()
            })
            .collect();
        GraphSet::new(self.calendar.clone(), self.nodes.clone(), days)
    }

    /// Writes one JSON line per day:
    /// `{"t":0,"date":"2022-01-03","edges":[["A","B",0.5],...]}`, edges
    /// ordered with the lexicographically smaller ticker first.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for (t, edges) in self.days.iter().enumerate() {
            let line = DayLine {
                t,
                date: self.calendar.date_of(t),
                edges: edges
                    .iter()
                    .map(|(&(i, j), &nu)| {
                        (
                            self.node_name(i).to_string(),
                            self.node_name(j).to_string(),
                            nu,
                        )
                    })
                    .collect(),
            };
            let json = serde_json::to_string(&line).expect("day line serializes");
            writeln!(w, "{json}")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a graph set written by `write_jsonl`.
    ///
    /// `nodes` fixes the node universe (nodes may never appear in any
    /// edge); when `None` the universe is the set of tickers seen.
    pub fn read_jsonl(path: &Path, nodes: Option<Vec<String>>) -> Result<GraphSet> {
        let file = BufReader::new(File::open(path)?);
        let mut lines: Vec<DayLine> = Vec::new();
        for (i, line) in file.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let day: DayLine = serde_json::from_str(&line).map_err(|e| FriError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                msg: e.to_string(),
            })?;
            if day.t != lines.len() {
                return Err(FriError::Parse {
                    path: path.display().to_string(),
                    line: i + 1,
                    msg: format!("expected t={}, got t={}", lines.len(), day.t),
                });
            }
            lines.push(day);
        }
        let calendar = TradingCalendar::new(lines.iter().map(|l| l.date).collect())?;
        let nodes = match nodes {
            Some(mut n) => {
                n.sort();
                n.dedup();
                n
            }
            None => {
                let mut n: Vec<String> = lines
                    .iter()
                    .flat_map(|l| l.edges.iter())
                    .flat_map(|(a, b, _)| [a.clone(), b.clone()])
                    .collect();
                n.sort();
                n.dedup();
                n
            }
        };
        let index: HashMap<&str, u32> = nodes
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i as u32))
            .collect();
        let mut days = Vec::with_capacity(lines.len());
        for (li, line) in lines.iter().enumerate() {
            let mut edges = BTreeMap::new();
            for (a, b, nu) in &line.edges {
                let ia = *index.get(a.as_str()).ok_or_else(|| FriError::Parse {
                    path: path.display().to_string(),
                    line: li + 1,
                    msg: format!("edge ticker {a} not in node set"),
                })?;
                let ib = *index.get(b.as_str()).ok_or_else(|| FriError::Parse {
                    path: path.display().to_string(),
                    line: li + 1,
                    msg: format!("edge ticker {b} not in node set"),
                })?;
                edges.insert((ia.min(ib), ia.max(ib)), *nu);
            }
            days.push(edges);
        }
        GraphSet::new(calendar, nodes, days)
    }
}

#[derive(Serialize, Deserialize)]
struct DayLine {
    t: usize,
    date: NaiveDate,
    edges: Vec<(String, String, f64)>,
}

fn sorted_universe(universe: &[String]) -> Result<Vec<String>> {
    let mut nodes = universe.to_vec();
    nodes.sort();
    nodes.dedup();
    if nodes.len() != universe.len() {
        return Err(FriError::InvalidParameter {
            name: "universe",
            msg: "duplicate tickers".into(),
        });
    }
    Ok(nodes)
}

/// Normalizes a day's raw pair counts/weights by the day maximum.
fn normalize_day(raw: BTreeMap<(u32, u32), f64>) -> BTreeMap<(u32, u32), f64> {
    let max = raw.values().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return BTreeMap::new();
    }
    raw.into_iter().map(|(k, v)| (k, v / max)).collect()
}

/// Builds the news co-occurrence graph set: the pair (A, B) is connected
/// on day t when more than `tau` of that day's records mention both, and
/// the weight is the co-occurrence count divided by the day's maximum
/// count among connected pairs.
///
/// Record tickers outside the universe are ignored.
pub fn build_news_graphset(
    news: &[NewsRecord],
    universe: &[String],
    calendar: &TradingCalendar,
    tau: u32,
) -> Result<GraphSet> {
    let nodes = sorted_universe(universe)?;
    let index: HashMap<&str, u32> = nodes
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32))
        .collect();
    let mut counts: Vec<BTreeMap<(u32, u32), u64>> = vec![BTreeMap::new(); calendar.len()];
    for record in news {
        let Some(t) = calendar.index_of(record.date) else {
            return Err(FriError::CalendarMismatch(format!(
                "news record {} dated {} is not on a trading day; align news first",
                record.id, record.date
            )));
        };
        let mut ids: Vec<u32> = record
            .tickers
            .iter()
            .filter_map(|s| index.get(s.as_str()).copied())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        for (a, &i) in ids.iter().enumerate() {
            for &j in &ids[a + 1..] {
                *counts[t].entry((i, j)).or_insert(0) += 1;
            }
        }
    }
    let days = counts
        .into_iter()
        .map(|day| {
            normalize_day(
                day.into_iter()
                    .filter(|&(_, k)| k > u64::from(tau))
                    .map(|(key, k)| (key, k as f64))
                    .collect(),
            )
        })
        .collect();
    GraphSet::new(calendar.clone(), nodes, days)
}

/// Builds the correlation graph set: for each day t >= epsilon, the pair
/// (A, B) is connected when the absolute trailing rolling correlation
/// exceeds `theta`; weights are |correlation| normalized by the day
/// maximum. Days before the first full window have no edges.
pub fn build_corr_graphset(
    returns: &Panel,
    calendar: &TradingCalendar,
    epsilon: usize,
    theta: f64,
) -> Result<GraphSet> {
    if !(0.0..1.0).contains(&theta) {
        return Err(FriError::InvalidParameter {
            name: "theta",
            msg: format!("{theta} outside [0, 1)"),
        });
    }
    if !calendar.aligns_with_returns_of(returns.calendar()) {
        return Err(FriError::CalendarMismatch(
            "calendar must equal the returns calendar preceded by one day".into(),
        ));
    }
    if calendar.len() <= epsilon {
        return Err(FriError::InvalidParameter {
            name: "epsilon",
            msg: format!(
                "window {epsilon} needs more than {} trading days",
                calendar.len()
            ),
        });
    }
    let nodes = returns.tickers().to_vec();
    let n = nodes.len() as u32;
    let pairs: Vec<(u32, u32)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let per_pair: Vec<Result<Vec<(usize, (u32, u32), f64)>>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let series = rolling::rolling_corr(returns, &nodes[i as usize], &nodes[j as usize], epsilon)?;
            let mut hits = Vec::new();
            for t in epsilon..calendar.len() {
                if let Some(v) = series.at_day(t) {
                    let a = v.abs();
                    if a > theta {
                        hits.push((t, (i, j), a));
                    }
                }
            }
            Ok(hits)
        })
        .collect();
    let mut raw: Vec<BTreeMap<(u32, u32), f64>> = vec![BTreeMap::new(); calendar.len()];
    for hits in per_pair {
        for (t, key, a) in hits? {
            raw[t].insert(key, a);
        }
    }
    let days = raw.into_iter().map(normalize_day).collect();
    GraphSet::new(calendar.clone(), nodes, days)
}

/// Replicates one edge map across every day of the calendar. The base
/// weights are renormalized by their maximum.
pub fn build_static_graphset(
    nodes: &[String],
    base: &BTreeMap<(u32, u32), f64>,
    calendar: &TradingCalendar,
) -> Result<GraphSet> {
    let nodes = sorted_universe(nodes)?;
    let n = nodes.len() as u32;
    for (&(i, j), &nu) in base {
        if i >= j || j >= n {
            return Err(FriError::InvalidParameter {
                name: "base",
                msg: format!("bad pair ({i}, {j}) for {n} nodes"),
            });
        }
        if nu <= 0.0 {
            return Err(FriError::InvalidParameter {
                name: "base",
                msg: format!("weight {nu} not positive"),
            });
        }
    }
    let day = normalize_day(base.clone());
    GraphSet::new(calendar.clone(), nodes, vec![day; calendar.len()])
}
