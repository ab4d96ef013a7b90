//! Correlation stability: per-day tests of whether connected pairs move
//! more than isolated pairs, aggregated into the CSS score.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::graph::GraphSet;
use crate::market::Panel;
use crate::rolling::{corr_delta, rolling_corr, RollingCorrSeries};
use crate::seed::derive_seed;
use crate::stats::welch_one_sided_greater;
use crate::{FriError, Result};

/// Minimum sample size per side; days with fewer usable pairs are skipped.
pub const MIN_PAIRS: usize = 5;
/// Isolated pairs are sampled at this multiple of the connected count.
pub const ISOLATED_SAMPLE_FACTOR: usize = 5;

/// One evaluated day.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsDay {
    pub t: usize,
    /// 1 when the day's test rejects at level alpha.
    pub cs: bool,
    pub p_value: f64,
    /// Connected pairs with a defined correlation change.
    pub n_connected: usize,
    /// Sampled isolated-node pairs with a defined correlation change.
    pub n_isolated_sampled: usize,
}

/// Aggregate correlation-stability result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CssReport {
    pub per_day: Vec<CsDay>,
    /// Fraction of evaluated days whose test rejected.
    pub css: f64,
    pub evaluated_days: usize,
    pub skipped_days: usize,
}

/// Draws `target` distinct unordered pairs of isolated nodes.
fn sample_isolated_pairs<R: Rng>(
    isolated: &[u32],
    target: usize,
    rng: &mut R,
) -> Vec<(u32, u32)> {
    let n = isolated.len();
    if n < 2 {
        return Vec::new();
    }
    let avail = n * (n - 1) / 2;
    let target = target.min(avail);
    if target == 0 {
        return Vec::new();
    }
    let mut picked: Vec<(u32, u32)> = if avail <= 200_000 {
        let all: Vec<(u32, u32)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (isolated[i], isolated[j])))
            .collect();
        rand::seq::index::sample(rng, avail, target)
            .iter()
            .map(|k| all[k])
            .collect()
    } else {
        let mut set = BTreeSet::new();
        while set.len() < target {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            let (a, b) = (isolated[i.min(j)], isolated[i.max(j)]);
            set.insert((a, b));
        }
        set.into_iter().collect()
    };
    picked.sort_unstable();
    picked
}

struct DayOutcome {
    evaluated: Option<CsDay>,
}

/// Day evaluation against a prebuilt correlation-series cache. Returns
/// None when either side has fewer than MIN_PAIRS usable pairs.
fn eval_day(
    gs: &GraphSet,
    cache: &HashMap<(u32, u32), RollingCorrSeries>,
    t: usize,
    alpha: f64,
    isolated_sample: &[(u32, u32)],
) -> Option<CsDay> {
    let deltas = |pairs: &mut dyn Iterator<Item = (u32, u32)>| -> Vec<f64> {
        pairs
            .filter_map(|key| {
                let series = cache.get(&key)?;
                Some(corr_delta(series, t)?.abs())
            })
            .collect()
    };
    let connected: Vec<f64> = deltas(&mut gs.edges_at(t).keys().copied());
    if connected.len() < MIN_PAIRS {
        return None;
    }
    let isolated: Vec<f64> = deltas(&mut isolated_sample.iter().copied());
    if isolated.len() < MIN_PAIRS {
        return None;
    }
    let test = welch_one_sided_greater(&connected, &isolated).ok()?;
    Some(CsDay {
        t,
        cs: test.p_value < alpha,
        p_value: test.p_value,
        n_connected: connected.len(),
        n_isolated_sampled: isolated.len(),
    })
}

fn compute_series(
    returns: &Panel,
    gs: &GraphSet,
    pairs: &BTreeSet<(u32, u32)>,
    epsilon: usize,
) -> Result<HashMap<(u32, u32), RollingCorrSeries>> {
    let list: Vec<(u32, u32)> = pairs.iter().copied().collect();
    let computed: Vec<Result<((u32, u32), RollingCorrSeries)>> = list
        .par_iter()
        .map(|&(i, j)| {
            let series = rolling_corr(returns, gs.node_name(i), gs.node_name(j), epsilon)?;
            Ok(((i, j), series))
        })
        .collect();
    let mut cache = HashMap::with_capacity(list.len());
    for item in computed {
        let (key, series) = item?;
        cache.insert(key, series);
    }
    Ok(cache)
}

/// Evaluates one day's correlation-stability test with a caller-supplied
/// sampler. Returns Ok(None) when the day has too few usable pairs.
pub fn cs_at<R: Rng>(
    gs: &GraphSet,
    returns: &Panel,
    t: usize,
    epsilon: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<Option<CsDay>> {
    gs.check_returns_alignment(returns)?;
    validate_alpha(alpha)?;
    let t_max = gs.n_days() - 1;
    if epsilon * 2 > t_max || t < epsilon || t > t_max - epsilon {
        return Err(FriError::DayOutOfRange {
            t,
            min: epsilon,
            max: t_max.saturating_sub(epsilon),
        });
    }
    let connected_pairs: BTreeSet<(u32, u32)> = gs.edges_at(t).keys().copied().collect();
    let cache = compute_series(returns, gs, &connected_pairs, epsilon)?;
    let n_connected_defined = connected_pairs
        .iter()
        .filter(|key| cache.get(key).and_then(|s| corr_delta(s, t)).is_some())
        .count();
    if n_connected_defined < MIN_PAIRS {
        return Ok(None);
    }
    let partition = gs.node_partition(t)?;
    let sample = sample_isolated_pairs(
        &partition.isolated,
        n_connected_defined * ISOLATED_SAMPLE_FACTOR,
        rng,
    );
    let iso_cache = compute_series(returns, gs, &sample.iter().copied().collect(), epsilon)?;
    let mut cache = cache;
    cache.extend(iso_cache);
    Ok(eval_day(gs, &cache, t, alpha, &sample))
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(FriError::InvalidParameter {
            name: "alpha",
            msg: format!("{alpha} outside (0, 1)"),
        });
    }
    Ok(())
}

/// Runs the per-day test over every day t in [epsilon, T - epsilon] and
/// averages the rejections. Each day draws its isolated sample from an
/// RNG seeded by (seed, day), so results are independent of evaluation
/// order and thread count.
pub fn css(
    gs: &GraphSet,
    returns: &Panel,
    epsilon: usize,
    alpha: f64,
    seed: u64,
) -> Result<CssReport> {
    gs.check_returns_alignment(returns)?;
    validate_alpha(alpha)?;
    let t_max = gs.n_days() - 1;
    if epsilon < 2 || epsilon * 2 > t_max {
        return Err(FriError::NoEvaluableDays(format!(
            "window {epsilon} leaves no day t with both adjacent windows inside 0..={t_max}"
        )));
    }
    let days: Vec<usize> = (epsilon..=t_max - epsilon).collect();

    // Pass 1: series for every pair that is connected on an evaluable day.
    let mut needed: BTreeSet<(u32, u32)> = BTreeSet::new();
    for &t in &days {
        needed.extend(gs.edges_at(t).keys().copied());
    }
    let connected_cache = compute_series(returns, gs, &needed, epsilon)?;

    // Pass 2: per-day connected counts and isolated-pair samples.
    let samples: Vec<Option<Vec<(u32, u32)>>> = days
        .par_iter()
        .map(|&t| {
            let n_defined = gs
                .edges_at(t)
                .keys()
                .filter(|key| {
                    connected_cache
                        .get(key)
                        .and_then(|s| corr_delta(s, t))
                        .is_some()
                })
                .count();
            if n_defined < MIN_PAIRS {
                return None;
            }
            let partition = gs.node_partition(t).expect("t validated");
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "css-day", t as u64));
            Some(sample_isolated_pairs(
                &partition.isolated,
                n_defined * ISOLATED_SAMPLE_FACTOR,
                &mut rng,
            ))
        })
        .collect();

    // Pass 3: series for sampled isolated pairs not already cached.
    let mut iso_needed: BTreeSet<(u32, u32)> = BTreeSet::new();
    for sample in samples.iter().flatten() {
        iso_needed.extend(
            sample
                .iter()
                .filter(|k| !connected_cache.contains_key(k))
                .copied(),
        );
    }
    let iso_cache = compute_series(returns, gs, &iso_needed, epsilon)?;
    let mut cache = connected_cache;
    cache.extend(iso_cache);

    // Pass 4: the per-day tests.
    let outcomes: Vec<DayOutcome> = days
        .par_iter()
        .zip(&samples)
        .map(|(&t, sample)| DayOutcome {
            evaluated: sample
                .as_ref()
                .and_then(|s| eval_day(gs, &cache, t, alpha, s)),
        })
        .collect();

    let per_day: Vec<CsDay> = outcomes.into_iter().filter_map(|o| o.evaluated).collect();
    let evaluated_days = per_day.len();
    let skipped_days = days.len() - evaluated_days;
    if evaluated_days == 0 {
        return Err(FriError::NoEvaluableDays(format!(
            "all {} candidate days lacked {MIN_PAIRS} usable pairs per side",
            days.len()
        )));
    }
    let css = per_day.iter().filter(|d| d.cs).count() as f64 / evaluated_days as f64;
    Ok(CssReport {
        per_day,
        css,
        evaluated_days,
        skipped_days,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::TradingCalendar;
    use crate::graph::GraphSet;
    use crate::synth::{generate, shuffle_graphset, SynthConfig};
    use chrono::NaiveDate;
    use std::collections::BTreeMap;

    fn cal(n: usize) -> TradingCalendar {
        let start: NaiveDate = "2022-01-03".parse().unwrap();
        TradingCalendar::new((0..n as u64).map(|i| start + chrono::Days::new(i)).collect())
            .unwrap()
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("T{i:04}")).collect()
    }

    /// 16 tickers; tickers 0..6 share a common component for the first
    /// half of the sample and decouple afterwards, so their pairwise
    /// correlation collapses at the midpoint.
    fn breaking_panel(epsilon: usize) -> (Panel, usize) {
        let n_ret = 4 * epsilon;
        let t_mid = 2 * epsilon;
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let common: Vec<f64> = (0..n_ret).map(|_| rng.random_range(-1.0f64..1.0)).collect();
        let mut cols = Vec::new();
        for k in 0..16 {
            let col: Vec<f64> = (0..n_ret)
                .map(|i| {
                    let noise = rng.random_range(-1.0f64..1.0);
                    if k < 6 && i < t_mid {
                        common[i] + 0.05 * noise
                    } else {
                        noise
                    }
                })
                .collect();
            cols.push(col);
        }
        let panel = Panel::new(cal(n_ret + 1).drop_first().unwrap(), names(16), cols).unwrap();
        (panel, t_mid)
    }

    fn graph_with_edges(
        calendar: TradingCalendar,
        nodes: Vec<String>,
        edges_by_day: Vec<Vec<(u32, u32)>>,
    ) -> GraphSet {
        let days: Vec<BTreeMap<(u32, u32), f64>> = edges_by_day
            .into_iter()
            .map(|edges| edges.into_iter().map(|k| (k, 1.0)).collect())
            .collect();
        assert_eq!(days.len(), calendar.len());
        GraphSet::new(calendar, nodes, days).unwrap()
    }

    fn clique_edges(members: &[u32]) -> Vec<(u32, u32)> {
        let mut edges = Vec::new();
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                edges.push((i.min(j), i.max(j)));
            }
        }
        edges
    }

    #[test]
    fn separated_distributions_reject() {
        let epsilon = 10;
        let (returns, t_mid) = breaking_panel(epsilon);
        let n_days = returns.n_days() + 1;
        let mut edges_by_day = vec![Vec::new(); n_days];
        edges_by_day[t_mid] = clique_edges(&[0, 1, 2, 3, 4, 5]);
        let gs = graph_with_edges(cal(n_days), names(16), edges_by_day);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let day = cs_at(&gs, &returns, t_mid, epsilon, 0.05, &mut rng)
            .unwrap()
            .expect("day evaluable");
        assert!(day.cs);
        assert!(day.p_value < 1e-4, "p = {}", day.p_value);
        assert_eq!(day.n_connected, 15);
        assert!(day.n_isolated_sampled >= MIN_PAIRS);
    }

    #[test]
    fn too_few_connected_pairs_skips_day() {
        let epsilon = 10;
        let (returns, t_mid) = breaking_panel(epsilon);
        let n_days = returns.n_days() + 1;
        let mut edges_by_day = vec![Vec::new(); n_days];
        edges_by_day[t_mid] = vec![(0, 1), (2, 3)];
        let gs = graph_with_edges(cal(n_days), names(16), edges_by_day);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let day = cs_at(&gs, &returns, t_mid, epsilon, 0.05, &mut rng).unwrap();
        assert!(day.is_none());
    }

    #[test]
    fn undefined_deltas_skip_day() {
        // Constant returns for the connected clique: every window is
        // constant, so no connected delta is defined.
        let epsilon = 4;
        let n_ret = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut cols: Vec<Vec<f64>> = (0..6)
            .map(|_| vec![0.01f64; n_ret])
            .collect();
        for _ in 0..6 {
            cols.push((0..n_ret).map(|_| rng.random_range(-1.0f64..1.0)).collect());
        }
        let returns = Panel::new(cal(n_ret + 1).drop_first().unwrap(), names(12), cols).unwrap();
        let mut edges_by_day = vec![Vec::new(); n_ret + 1];
        edges_by_day[8] = clique_edges(&[0, 1, 2, 3, 4, 5]);
        let gs = graph_with_edges(cal(n_ret + 1), names(12), edges_by_day);
        let day = cs_at(&gs, &returns, 8, epsilon, 0.05, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(day.is_none());
    }

    #[test]
    fn out_of_range_day_errors() {
        let epsilon = 10;
        let (returns, _) = breaking_panel(epsilon);
        let n_days = returns.n_days() + 1;
        let gs = graph_with_edges(cal(n_days), names(16), vec![Vec::new(); n_days]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            cs_at(&gs, &returns, epsilon - 1, epsilon, 0.05, &mut rng),
            Err(FriError::DayOutOfRange { .. })
        ));
        assert!(matches!(
            cs_at(&gs, &returns, n_days - epsilon, epsilon, 0.05, &mut rng),
            Err(FriError::DayOutOfRange { .. })
        ));
    }

    #[test]
    fn css_deterministic_and_in_range() {
        let cfg = SynthConfig {
            n_tickers: 20,
            n_days: 160,
            epsilon: 21,
            n_event_pairs: 8,
            event_length_range: (30, 40),
            corr_boost: 0.8,
            garch_legs: false,
            news_rate_in_event: 1.0,
            news_rate_background: 0.01,
            seed: 7,
        };
        let out = generate(&cfg).unwrap();
        let a = css(&out.truth, &out.returns, cfg.epsilon, 0.05, 99).unwrap();
        let b = css(&out.truth, &out.returns, cfg.epsilon, 0.05, 99).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a.css));
        assert_eq!(a.evaluated_days, a.per_day.len());
    }

    #[test]
    fn planted_graph_beats_shuffled_null() {
        let cfg = SynthConfig {
            n_tickers: 24,
            n_days: 260,
            epsilon: 21,
            n_event_pairs: 14,
            event_length_range: (40, 60),
            corr_boost: 0.85,
            garch_legs: false,
            news_rate_in_event: 1.0,
            news_rate_background: 0.004,
            seed: 11,
        };
        let out = generate(&cfg).unwrap();
        let truth = css(&out.truth, &out.returns, cfg.epsilon, 0.05, 5).unwrap();
        let shuffled_gs = shuffle_graphset(&out.truth, 5);
        let shuffled = css(&shuffled_gs, &out.returns, cfg.epsilon, 0.05, 5).unwrap();
        assert!(
            truth.css > shuffled.css,
            "truth {} vs shuffled {}",
            truth.css,
            shuffled.css
        );
    }

    /// Null calibration: i.i.d. returns and a random graph re-drawn each
    /// day must reject at close to the nominal rate.
    #[test]
    fn null_rejection_rate_near_alpha() {
        let cfg = SynthConfig {
            n_tickers: 24,
            n_days: 1045,
            epsilon: 21,
            n_event_pairs: 0,
            event_length_range: (1, 1),
            corr_boost: 0.5,
            garch_legs: false,
            news_rate_in_event: 0.0,
            news_rate_background: 0.0,
            seed: 3,
        };
        let out = generate(&cfg).unwrap();
        let n_days = cfg.n_days;
        let mut edges_by_day = Vec::with_capacity(n_days);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..n_days {
            let mut day = std::collections::BTreeSet::new();
            while day.len() < 8 {
                let i = rng.random_range(0..24u32);
                let j = rng.random_range(0..24u32);
                if i != j {
                    day.insert((i.min(j), i.max(j)));
                }
            }
            edges_by_day.push(day.into_iter().collect::<Vec<_>>());
        }
        let gs = graph_with_edges(out.truth.calendar().clone(), names(24), edges_by_day);
        let report = css(&gs, &out.returns, cfg.epsilon, 0.05, 12).unwrap();
        assert!(report.evaluated_days >= 900, "only {} days", report.evaluated_days);
        assert!(
            (0.03..=0.07).contains(&report.css),
            "rejection rate {} not near 0.05",
            report.css
        );
    }

    #[test]
    fn all_days_skipped_is_an_error() {
        let cfg = SynthConfig {
            n_tickers: 8,
            n_days: 120,
            epsilon: 21,
            n_event_pairs: 0,
            event_length_range: (1, 1),
            corr_boost: 0.5,
            garch_legs: false,
            news_rate_in_event: 0.0,
            news_rate_background: 0.0,
            seed: 3,
        };
        let out = generate(&cfg).unwrap();
        let gs = graph_with_edges(out.truth.calendar().clone(), names(8), vec![Vec::new(); cfg.n_days]);
        assert!(matches!(
            css(&gs, &out.returns, cfg.epsilon, 0.05, 1),
            Err(FriError::NoEvaluableDays(_))
        ));
    }
}
