//! Event periods along each pair's edge series and the average event
//! capture rate: does the rolling correlation move unusually much while
//! the pair stays connected?

use rayon::prelude::*;
use serde::Serialize;

use crate::graph::{EdgeSeries, GraphSet};
use crate::market::Panel;
use crate::rolling::{rolling_corr, RollingCorrSeries};
use crate::stats::population_std;
use crate::{FriError, Result};

/// Maximal run of consecutive days on which a pair is connected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventPeriod {
    pub pair: (String, String),
    pub t_start: usize,
    /// Run length in trading days, at least 1.
    pub length: usize,
}

impl EventPeriod {
    /// Last day of the run.
    pub fn t_end(&self) -> usize {
        self.t_start + self.length - 1
    }
}

/// Per-pair capture summary. `ecr` is None when every event was skipped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEcr {
    pub pair: (String, String),
    pub ecr: Option<f64>,
    /// Number of events that produced a capture verdict.
    pub rho: usize,
    pub skipped_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AecrReport {
    pub per_pair: Vec<PairEcr>,
    /// Mean capture rate over pairs with at least one scored event.
    pub aecr: f64,
    /// Number of pairs entering the average.
    pub m: usize,
}

/// Which pairs enter the average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairUniverse {
    /// Every pair with at least one event period (default).
    EventPairs,
    /// Only pairs whose endpoints are connected on every single day.
    StrictIntersection,
}

/// Splits an edge series into its maximal connected runs.
pub fn detect_event_periods(es: &EdgeSeries) -> Vec<EventPeriod> {
    let mut periods = Vec::new();
    let mut run_start: Option<usize> = None;
    for (t, &on) in es.mu.iter().enumerate() {
        match (on, run_start) {
            (true, None) => run_start = Some(t),
            (false, Some(s)) => {
                periods.push(EventPeriod {
                    pair: es.pair.clone(),
                    t_start: s,
                    length: t - s,
                });
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        periods.push(EventPeriod {
            pair: es.pair.clone(),
            t_start: s,
            length: es.mu.len() - s,
        });
    }
    periods
}

/// Scores one event: the correlation range realized around the event
/// (window-end days in [t_start, t_start + length]) relative to the
/// range of the whole series, compared to the series' dispersion.
/// Returns None (skipped) when the full range is zero or fewer than two
/// rolling values fall inside the event window.
pub fn event_capture(series: &RollingCorrSeries, ev: &EventPeriod) -> Option<bool> {
    let mut full_min = f64::INFINITY;
    let mut full_max = f64::NEG_INFINITY;
    for v in series.defined() {
        full_min = full_min.min(v);
        full_max = full_max.max(v);
    }
    let delta_full = full_max - full_min;
    if !(delta_full > 0.0) {
        return None;
    }
    let lo = ev.t_start.max(series.first_day());
    let hi = (ev.t_start + ev.length).min(series.last_day());
    let mut n_inside = 0usize;
    let mut ev_min = f64::INFINITY;
    let mut ev_max = f64::NEG_INFINITY;
    for t in lo..=hi {
        if let Some(v) = series.at_day(t) {
            n_inside += 1;
            ev_min = ev_min.min(v);
            ev_max = ev_max.max(v);
        }
    }
    if n_inside < 2 {
        return None;
    }
    let dispersion = population_std(&series.defined().collect::<Vec<_>>());
    Some((ev_max - ev_min) / delta_full > dispersion)
}

/// Capture rate over one pair's scored events; None when all skipped.
pub fn ecr(captures: &[Option<bool>]) -> (Option<f64>, usize, usize) {
    let scored: Vec<bool> = captures.iter().filter_map(|c| *c).collect();
    let rho = scored.len();
    let skipped = captures.len() - rho;
    if rho == 0 {
        return (None, 0, skipped);
    }
    let rate = scored.iter().filter(|c| **c).count() as f64 / rho as f64;
    (Some(rate), rho, skipped)
}

pub fn aecr(gs: &GraphSet, returns: &Panel, epsilon: usize) -> Result<AecrReport> {
    aecr_with_universe(gs, returns, epsilon, PairUniverse::EventPairs)
}

pub fn aecr_with_universe(
    gs: &GraphSet,
    returns: &Panel,
    epsilon: usize,
    universe: PairUniverse,
) -> Result<AecrReport> {
    gs.check_returns_alignment(returns)?;
    let mut pairs: Vec<(u32, u32)> = gs.edge_counts().into_keys().collect();
    if universe == PairUniverse::StrictIntersection {
        let n = gs.nodes().len() as u32;
        let everyday: Vec<bool> = (0..n)
            .map(|i| (0..gs.n_days()).all(|t| gs.edges_at(t).keys().any(|&(a, b)| a == i || b == i)))
            .collect();
        pairs.retain(|&(i, j)| everyday[i as usize] && everyday[j as usize]);
    }
    let per_pair: Vec<Result<PairEcr>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let es = gs.edge_series(gs.node_name(i), gs.node_name(j))?;
            let series = rolling_corr(returns, gs.node_name(i), gs.node_name(j), epsilon)?;
            let captures: Vec<Option<bool>> = detect_event_periods(&es)
                .iter()
                .map(|ev| event_capture(&series, ev))
                .collect();
            let (ecr, rho, skipped_events) = ecr(&captures);
            Ok(PairEcr {
                pair: es.pair,
                ecr,
                rho,
                skipped_events,
            })
        })
        .collect();
    let per_pair: Vec<PairEcr> = per_pair.into_iter().collect::<Result<_>>()?;
    let rates: Vec<f64> = per_pair.iter().filter_map(|p| p.ecr).collect();
    if rates.is_empty() {
        return Err(FriError::NoEligiblePairs(
            "no pair produced a scored event period".into(),
        ));
    }
    let m = rates.len();
    Ok(AecrReport {
        aecr: rates.iter().sum::<f64>() / m as f64,
        per_pair,
        m,
    })
}
