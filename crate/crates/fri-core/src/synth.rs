//! Synthetic markets with planted relationship events, plus the
//! label-shuffled null graph used by the separation tests.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::calendar::TradingCalendar;
use crate::graph::{build_news_graphset, GraphSet};
use crate::market::{NewsRecord, Panel};
use crate::seed::derive_seed;
use crate::{FriError, Result};

/// Daily volatility applied to the unit-variance return processes so the
/// emitted price levels look like equity series.
const DAILY_VOL: f64 = 0.02;

/// Configuration of one synthetic market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_tickers: usize,
    /// Number of trading days (graph days 0..=T with T = n_days - 1).
    pub n_days: usize,
    /// Rolling window length; events are placed so their correlation
    /// swings fall inside the measurable range when possible.
    pub epsilon: usize,
    /// Number of distinct pairs that receive planted events.
    pub n_event_pairs: usize,
    /// Inclusive range of event lengths in trading days. Pairs split into
    /// two styles drawn from the ends of the range: two thirds are burst
    /// pairs that co-occur briefly at scattered times, one third are
    /// regime pairs that share one long co-movement episode; a narrow
    /// range degenerates to a near-uniform draw.
    pub event_length_range: (usize, usize),
    /// Common-factor loading lambda during events; the in-event return
    /// correlation is lambda squared.
    pub corr_boost: f64,
    /// Simulate GARCH(1,1) idiosyncratic legs instead of i.i.d. Gaussian.
    pub garch_legs: bool,
    /// Expected co-occurrence count per event day. Clamped up so every
    /// event day emits at least one co-occurrence, which makes the truth
    /// graph's event periods exactly the planted windows at tau = 0.
    pub news_rate_in_event: f64,
    /// Expected spurious co-occurrence count per pair per day.
    pub news_rate_background: f64,
    pub seed: u64,
}

/// One planted event: `pair` shares a common shock on graph days
/// `start..start + len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PlantedEvent {
    pub pair: (u32, u32),
    pub start: usize,
    pub len: usize,
}

impl PlantedEvent {
    pub fn contains(&self, day: usize) -> bool {
        (self.start..self.start + self.len).contains(&day)
    }
}

/// Everything one synthetic market run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    /// Price levels over the full calendar (day 0 starts at 100).
    pub prices: Panel,
    /// Log returns implied by the simulated shocks, over days 1..=T.
    pub returns: Panel,
    pub news: Vec<NewsRecord>,
    /// News co-occurrence graph of the emitted stream at tau = 0.
    pub truth: GraphSet,
    pub events: Vec<PlantedEvent>,
}

fn validate(config: &SynthConfig) -> Result<()> {
    let fail = |name: &'static str, msg: String| Err(FriError::InvalidParameter { name, msg });
    if config.n_tickers < 2 {
        return fail("n_tickers", format!("{} < 2", config.n_tickers));
    }
    if config.n_days < 3 {
        return fail("n_days", format!("{} < 3", config.n_days));
    }
    if config.epsilon < 2 {
        return fail("epsilon", format!("{} < 2", config.epsilon));
    }
    let max_pairs = config.n_tickers * (config.n_tickers - 1) / 2;
    if config.n_event_pairs > max_pairs {
        return fail(
            "n_event_pairs",
            format!("{} exceeds {max_pairs} available pairs", config.n_event_pairs),
        );
    }
    let (lo, hi) = config.event_length_range;
    if config.n_event_pairs > 0 {
        if lo < 1 || lo > hi {
            return fail("event_length_range", format!("bad range [{lo}, {hi}]"));
        }
        // Events live on return days 1..=T; T = n_days - 1.
        if hi > config.n_days - 1 {
            return fail(
                "event_length_range",
                format!("event length {hi} exceeds the {} return days", config.n_days - 1),
            );
        }
    }
    if !(config.corr_boost > 0.0 && config.corr_boost < 1.0) {
        return fail("corr_boost", format!("{} outside (0, 1)", config.corr_boost));
    }
    if config.news_rate_in_event < 0.0 || config.news_rate_background < 0.0 {
        return fail("news_rate", "rates must be non-negative".into());
    }
    Ok(())
}

/// Weekday calendar of `n` trading days starting Monday 2022-01-03.
fn weekday_calendar(n: usize) -> TradingCalendar {
    let mut days = Vec::with_capacity(n);
    let mut d = NaiveDate::from_ymd_opt(2022, 1, 3).expect("valid date");
    while days.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            days.push(d);
        }
        d = d.succ_opt().expect("date range");
    }
    TradingCalendar::new(days).expect("strictly increasing weekdays")
}

fn poisson_count(rate: f64, rng: &mut ChaCha8Rng) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    let p = Poisson::new(rate).expect("positive rate");
    p.sample(rng) as u64
}

/// Generates a synthetic market: unit-variance return legs (i.i.d.
/// Gaussian or GARCH), a common shock of loading `corr_boost` inside each
/// planted event window, and a co-occurrence news stream whose tau = 0
/// graph is returned as the truth graph.
pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    validate(config)?;
    let calendar = weekday_calendar(config.n_days);
    let t_max = config.n_days - 1;
    let n_returns = t_max;
    let tickers: Vec<String> = (0..config.n_tickers).map(|i| format!("T{i:04}")).collect();

    let mut all_pairs: Vec<(u32, u32)> = Vec::new();
    for i in 0..config.n_tickers as u32 {
        for j in i + 1..config.n_tickers as u32 {
            all_pairs.push((i, j));
        }
    }

    // Planted pairs and windows. Regime pairs all hold one long window
    // around a shared center, the way a market regime makes related pairs'
    // correlations rise and fall together; burst pairs co-occur briefly at
    // scattered times, twice each when the calendar has room. Regime pairs
    // are drawn first and kept mutually node-disjoint; burst pairs then
    // avoid regime nodes: concurrent events sharing a node would split that
    // node's shock budget and dilute every involved pair's correlation.
    let mut rng_ev = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "synth-events", 0));
    let (lo_len, hi_len) = config.event_length_range;
    let regime_center = {
        let pref_lo = config.epsilon.min(t_max.saturating_sub(1)).max(1);
        let pref_hi = t_max
            .saturating_sub(config.epsilon + hi_len - 1)
            .max(pref_lo);
        let band = (pref_hi - pref_lo) as f64;
        (pref_lo as f64 + band * rng_ev.random_range(0.35..0.65)).round() as usize
    };
    // Prefer windows whose correlation swing is fully measurable:
    // [epsilon, T - epsilon]; fall back to any placement on return days
    // when the preferred band is too tight.
    let start_band = |len: usize| {
        let pref_lo = config.epsilon;
        let pref_hi = t_max.saturating_sub(config.epsilon + len - 1);
        if pref_hi >= pref_lo {
            (pref_lo, pref_hi)
        } else {
            (1, t_max - len + 1)
        }
    };
    let mut events: Vec<PlantedEvent> = Vec::with_capacity(config.n_event_pairs * 2);
    let mut used_pairs = std::collections::BTreeSet::new();
    let mut busy_nodes = std::collections::BTreeSet::new();
    let is_regime = |k: usize| k % 3 == 2;
    for pass in 0..2 {
        for k in 0..config.n_event_pairs {
            if is_regime(k) != (pass == 0) {
                continue;
            }
            let pair = loop {
                let mut draw = |disjoint: bool| {
                    for _ in 0..256 {
                        let i = rng_ev.random_range(0..config.n_tickers as u32);
                        let j = rng_ev.random_range(0..config.n_tickers as u32);
                        if i == j {
                            continue;
                        }
                        let p = (i.min(j), i.max(j));
                        if used_pairs.contains(&p) {
                            continue;
                        }
                        if disjoint && (busy_nodes.contains(&p.0) || busy_nodes.contains(&p.1)) {
                            continue;
                        }
                        return Some(p);
                    }
                    None
                };
                if let Some(p) = draw(true).or_else(|| draw(false)) {
                    break p;
                }
            };
            used_pairs.insert(pair);
            if pass == 0 {
                busy_nodes.insert(pair.0);
                busy_nodes.insert(pair.1);
                let len = rng_ev.random_range(lo_len.max(hi_len.saturating_sub(4))..=hi_len);
                let (lo_s, hi_s) = start_band(len);
                let start = (regime_center as i64 + rng_ev.random_range(-3..=3))
                    .clamp(lo_s as i64, hi_s as i64) as usize;
                events.push(PlantedEvent { pair, start, len });
            } else {
                let len = rng_ev.random_range(lo_len..=hi_len.min(lo_len + 1));
                let (lo_s, hi_s) = start_band(len);
                // Extra bursts only when each can sit a full correlation
                // window away from the others, so the runs stay distinct.
                let gap = len + config.epsilon;
                let n_bursts = ((hi_s - lo_s) / (2 * gap)).clamp(1, 2);
                let mut starts: Vec<usize> = Vec::with_capacity(n_bursts);
                for _ in 0..n_bursts {
                    let mut s = rng_ev.random_range(lo_s..=hi_s);
                    for _ in 0..64 {
                        if starts.iter().all(|&prev| s.abs_diff(prev) >= gap) {
                            break;
                        }
                        s = rng_ev.random_range(lo_s..=hi_s);
                    }
                    starts.push(s);
                    events.push(PlantedEvent { pair, start: s, len });
                }
            }
        }
    }

    // Factor shocks, one stream per event.
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");
    let factors: Vec<Vec<f64>> = events
        .iter()
        .enumerate()
        .map(|(p, ev)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "synth-factor", p as u64));
            (0..ev.len).map(|_| gauss.sample(&mut rng)).collect()
        })
        .collect();

    // Returns: r_day = vol * (sqrt(1 - l^2) e + l * mean-normalized factor sum).
    let lambda = config.corr_boost;
    let mut returns_cols: Vec<Vec<f64>> = Vec::with_capacity(config.n_tickers);
    for i in 0..config.n_tickers {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "synth-idio", i as u64));
        let idio: Vec<f64> = if config.garch_legs {
            simulate_garch11(0.0, 0.05, 0.10, 0.85, n_returns, &mut rng)?
        } else {
            (0..n_returns).map(|_| gauss.sample(&mut rng)).collect()
        };
        let mut col = Vec::with_capacity(n_returns);
        for k in 0..n_returns {
            let day = k + 1;
            let mut shock_sum = 0.0;
            let mut n_active = 0usize;
            for (p, ev) in events.iter().enumerate() {
                if (ev.pair.0 as usize == i || ev.pair.1 as usize == i) && ev.contains(day) {
                    shock_sum += factors[p][day - ev.start];
                    n_active += 1;
                }
            }
            let r = if n_active == 0 {
                idio[k]
            } else {
                (1.0 - lambda * lambda).sqrt() * idio[k]
                    + lambda * shock_sum / (n_active as f64).sqrt()
            };
            col.push(DAILY_VOL * r);
        }
        returns_cols.push(col);
    }

    // Price levels from 100.
    let prices_cols: Vec<Vec<f64>> = returns_cols
        .iter()
        .map(|rs| {
            let mut p = Vec::with_capacity(config.n_days);
            p.push(100.0);
            for &r in rs {
                let last = *p.last().expect("non-empty");
                p.push(last * r.exp());
            }
            p
        })
        .collect();

    // News stream: guaranteed daily co-occurrence inside events plus
    // Poisson background over all pairs.
    let mut rng_news = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "synth-news", 0));
    let mut news = Vec::new();
    let mut next_id = 0usize;
    let emit = |news: &mut Vec<NewsRecord>, next_id: &mut usize, day: usize, pair: (u32, u32), k: u64| {
        for _ in 0..k {
            news.push(NewsRecord {
                date: calendar.date_of(day),
                id: format!("synth-{:08}", *next_id),
                tickers: vec![
                    tickers[pair.0 as usize].clone(),
                    tickers[pair.1 as usize].clone(),
                ],
                headline: None,
            });
            *next_id += 1;
        }
    };
    for day in 0..config.n_days {
        for ev in &events {
            if ev.contains(day) {
                let extra = poisson_count((config.news_rate_in_event - 1.0).max(0.0), &mut rng_news);
                emit(&mut news, &mut next_id, day, ev.pair, 1 + extra);
            }
        }
        if config.news_rate_background > 0.0 {
            for &pair in &all_pairs {
                let k = poisson_count(config.news_rate_background, &mut rng_news);
                emit(&mut news, &mut next_id, day, pair, k);
            }
        }
    }

    let truth = build_news_graphset(&news, &tickers, &calendar, 0)?;
    let returns = Panel::new(calendar.drop_first()?, tickers.clone(), returns_cols)?;
    let prices = Panel::new(calendar, tickers, prices_cols)?;
    Ok(SynthOutput {
        prices,
        returns,
        news,
        truth,
        events,
    })
}

/// Applies a uniformly random node-label permutation to every edge. This
/// preserves per-day edge counts and the pair edge-count multiset while
/// destroying the alignment between edges and the return series.
pub fn shuffle_graphset(gs: &GraphSet, seed: u64) -> GraphSet {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "shuffle", 0));
    let mut perm: Vec<u32> = (0..gs.nodes().len() as u32).collect();
    perm.shuffle(&mut rng);
    gs.permute_nodes(&perm).expect("permutation is valid")
}

/// Simulates a GARCH(1,1) return series: r_t = mu + sigma_t z_t with
/// sigma_t^2 = omega + alpha1 eps_{t-1}^2 + beta1 sigma_{t-1}^2, started
/// from the stationary variance.
pub fn simulate_garch11(
    mu: f64,
    omega: f64,
    alpha1: f64,
    beta1: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if !(omega > 0.0 && alpha1 >= 0.0 && beta1 >= 0.0 && alpha1 + beta1 < 1.0) {
        return Err(FriError::InvalidParameter {
            name: "garch_params",
            msg: format!("omega={omega}, alpha1={alpha1}, beta1={beta1}"),
        });
    }
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");
    let mut var = omega / (1.0 - alpha1 - beta1);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let eps = var.sqrt() * gauss.sample(rng);
        out.push(mu + eps);
        var = omega + alpha1 * eps * eps + beta1 * var;
    }
    Ok(out)
}

/// Simulates standardized residual pairs from a DCC(1,1) process with
/// unconditional correlation `rho_bar`.
pub fn simulate_dcc11(
    a: f64,
    b: f64,
    rho_bar: f64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(a >= 0.0 && b >= 0.0 && a + b < 1.0) {
        return Err(FriError::InvalidParameter {
            name: "dcc_params",
            msg: format!("a={a}, b={b}"),
        });
    }
    if !(-1.0..=1.0).contains(&rho_bar) || rho_bar.abs() == 1.0 {
        return Err(FriError::InvalidParameter {
            name: "rho_bar",
            msg: format!("{rho_bar} outside (-1, 1)"),
        });
    }
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");
    let (mut q11, mut q12, mut q22) = (1.0f64, rho_bar, 1.0f64);
    let mut za = Vec::with_capacity(n);
    let mut zb = Vec::with_capacity(n);
    for _ in 0..n {
        let rho = (q12 / (q11 * q22).sqrt()).clamp(-0.999_999, 0.999_999);
        let u = gauss.sample(rng);
        let v = gauss.sample(rng);
        let z1 = u;
        let z2 = rho * u + (1.0 - rho * rho).sqrt() * v;
        za.push(z1);
        zb.push(z2);
        q11 = (1.0 - a - b) + a * z1 * z1 + b * q11;
        q12 = (1.0 - a - b) * rho_bar + a * z1 * z2 + b * q12;
        q22 = (1.0 - a - b) + a * z2 * z2 + b * q22;
    }
    Ok((za, zb))
}
