//! Relationship-factor construction and the factor test: pairs grouped
//! by edge count, an HML-style spread series of group mean correlations,
//! per-group regressions on that series, and the average beta increment.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::graph::GraphSet;
use crate::market::Panel;
use crate::rolling::{rolling_corr, RollingCorrSeries};
use crate::seed::derive_seed;
use crate::{FriError, Result};

/// Edge-count group of a sampled pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupLabel {
    High,
    Medium,
    Low,
}

/// Sampled pairs with their edge counts and group labels, in canonical
/// pair order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Grouping {
    pub pairs: Vec<(u32, u32)>,
    pub counts: Vec<usize>,
    pub labels: Vec<GroupLabel>,
    pub max_edges: usize,
    pub sample_exhausted: bool,
}

/// Samples up to `n_pairs` pairs that are connected at least once and
/// labels them by edge count against thresholds phi_h/phi_l times the
/// sample maximum. Degenerate groupings (no edges, or an empty high or
/// low group) are errors.
pub(crate) fn sample_and_group(
    gs: &GraphSet,
    n_pairs: usize,
    phi_h: f64,
    phi_l: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Grouping> {
    if n_pairs == 0 {
        return Err(FriError::InvalidParameter {
            name: "n_pairs",
            msg: "must be positive".into(),
        });
    }
    if !(0.0..=1.0).contains(&phi_l) || !(0.0..=1.0).contains(&phi_h) || phi_l > phi_h {
        return Err(FriError::InvalidParameter {
            name: "phi",
            msg: format!("need 0 <= phi_l <= phi_h <= 1, got ({phi_l}, {phi_h})"),
        });
    }
    let counts_by_pair = gs.edge_counts();
    let candidates: Vec<((u32, u32), usize)> = counts_by_pair.into_iter().collect();
    if candidates.is_empty() {
        return Err(FriError::FactorUndefined(
            "graph has no edges on any day".into(),
        ));
    }
    let sample_exhausted = candidates.len() <= n_pairs;
    let mut sampled: Vec<((u32, u32), usize)> = if sample_exhausted {
        candidates
    } else {
        rand::seq::index::sample(rng, candidates.len(), n_pairs)
            .iter()
            .map(|k| candidates[k].clone())
            .collect()
    };
    sampled.sort_unstable_by_key(|(pair, _)| *pair);
    let max_edges = sampled.iter().map(|(_, c)| *c).max().unwrap();
    if max_edges == 0 {
        return Err(FriError::FactorUndefined(
            "sampled pairs carry no edges".into(),
        ));
    }
    let h = phi_h * max_edges as f64;
    let l = phi_l * max_edges as f64;
    let labels: Vec<GroupLabel> = sampled
        .iter()
        .map(|(_, c)| {
            let c = *c as f64;
            if c >= h - 1e-9 {
                GroupLabel::High
            } else if c <= l + 1e-9 {
                GroupLabel::Low
            } else {
                GroupLabel::Medium
            }
        })
        .collect();
    for side in [GroupLabel::High, GroupLabel::Low] {
        if !labels.contains(&side) {
            return Err(FriError::FactorUndefined(format!(
                "degenerate grouping: {side:?} group empty with thresholds h = {h:.3}, l = {l:.3} \
                 over sampled edge counts {}..={max_edges}",
                sampled.iter().map(|(_, c)| *c).min().unwrap(),
            )));
        }
    }
    let (pairs, counts) = sampled.into_iter().unzip();
    Ok(Grouping {
        pairs,
        counts,
        labels,
        max_edges,
        sample_exhausted,
    })
}

/// The constructed spread factor and its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct HmlFactor {
    /// Spread series h - l on window-end days epsilon..=T; NaN missing.
    pub series: Vec<f64>,
    pub epsilon: usize,
    pub groups: BTreeMap<(String, String), GroupLabel>,
    pub h_series: Vec<f64>,
    pub m_series: Vec<f64>,
    pub l_series: Vec<f64>,
    pub max_edges: usize,
    /// True when fewer candidate pairs existed than requested, so the
    /// whole candidate set was used.
    pub sample_exhausted: bool,
    /// Construction sample in canonical order.
    pub sample: Vec<(String, String)>,
}

/// Per-group regression outcome of the factor test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorTestResult {
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub group_sizes: Vec<usize>,
    /// Average successive beta increment, (last - first)/(g - 1).
    pub delta_beta: f64,
    /// Test sample ordered by ascending edge count; groups follow
    /// `group_sizes` boundaries in this order.
    pub sample: Vec<(String, String)>,
    pub sample_exhausted: bool,
}

/// Univariate least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OlsFit {
    pub alpha: f64,
    pub beta: f64,
    pub r2: f64,
    pub n_obs: usize,
}

/// Closed-form OLS of y on x over pairwise-finite observations.
pub fn ols_fit(y: &[f64], x: &[f64]) -> Result<OlsFit> {
    if y.len() != x.len() {
        return Err(FriError::InvalidParameter {
            name: "ols",
            msg: format!("length mismatch: y {} vs x {}", y.len(), x.len()),
        });
    }
    let obs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| (*a, *b))
        .collect();
    let n = obs.len();
    if n < 3 {
        return Err(FriError::InvalidParameter {
            name: "ols",
            msg: format!("{n} paired observations, need at least 3"),
        });
    }
    let nf = n as f64;
    let mean_x = obs.iter().map(|(a, _)| a).sum::<f64>() / nf;
    let mean_y = obs.iter().map(|(_, b)| b).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (a, b) in &obs {
        let dx = a - mean_x;
        let dy = b - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= 0.0 {
        return Err(FriError::Degenerate(
            "regressor has zero variance".into(),
        ));
    }
    let beta = sxy / sxx;
    let alpha = mean_y - beta * mean_x;
    let ssr = syy - beta * sxy;
    let r2 = if syy > 0.0 { 1.0 - ssr / syy } else { 1.0 };
    Ok(OlsFit {
        alpha,
        beta,
        r2,
        n_obs: n,
    })
}

/// Average successive difference of a beta vector; telescopes to
/// (last - first)/(n - 1) and is computed in that closed form.
pub fn delta_beta(betas: &[f64]) -> Result<f64> {
    if betas.len() < 2 {
        return Err(FriError::InvalidParameter {
            name: "betas",
            msg: format!("{} betas, need at least 2", betas.len()),
        });
    }
    Ok((betas[betas.len() - 1] - betas[0]) / (betas.len() - 1) as f64)
}

/// Slot-wise mean over the given series, skipping non-finite values.
fn group_mean_series(series: &[&RollingCorrSeries], n_slots: usize) -> Vec<f64> {
    (0..n_slots)
        .map(|j| {
            let mut sum = 0.0;
            let mut n = 0usize;
            for s in series {
                let v = s.values()[j];
                if v.is_finite() {
                    sum += v;
                    n += 1;
                }
            }
            if n == 0 {
                f64::NAN
            } else {
                sum / n as f64
            }
        })
        .collect()
}

fn series_cache(
    gs: &GraphSet,
    returns: &Panel,
    pairs: &[(u32, u32)],
    epsilon: usize,
) -> Result<HashMap<(u32, u32), RollingCorrSeries>> {
    let computed: Vec<Result<((u32, u32), RollingCorrSeries)>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let s = rolling_corr(returns, gs.node_name(i), gs.node_name(j), epsilon)?;
            Ok(((i, j), s))
        })
        .collect();
    let mut cache = HashMap::with_capacity(pairs.len());
    for item in computed {
        let (k, s) = item?;
        cache.insert(k, s);
    }
    Ok(cache)
}

/// Builds the spread factor: samples connected pairs, groups them by
/// edge count, and returns the high-minus-low mean-correlation series.
pub fn construct_hml_factor(
    gs: &GraphSet,
    returns: &Panel,
    epsilon: usize,
    n_pairs: usize,
    phi_h: f64,
    phi_l: f64,
    seed: u64,
) -> Result<HmlFactor> {
    gs.check_returns_alignment(returns)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "factor-construct", 0));
    let grouping = sample_and_group(gs, n_pairs, phi_h, phi_l, &mut rng)?;
    let cache = series_cache(gs, returns, &grouping.pairs, epsilon)?;
    let n_slots = returns.n_days() - epsilon + 1;
    let collect = |label: GroupLabel| -> Vec<&RollingCorrSeries> {
        grouping
            .pairs
            .iter()
            .zip(&grouping.labels)
            .filter(|(_, l)| **l == label)
            .map(|(p, _)| &cache[p])
            .collect()
    };
    let h_series = group_mean_series(&collect(GroupLabel::High), n_slots);
    let m_series = group_mean_series(&collect(GroupLabel::Medium), n_slots);
    let l_series = group_mean_series(&collect(GroupLabel::Low), n_slots);
    let series: Vec<f64> = h_series
        .iter()
        .zip(&l_series)
        .map(|(h, l)| h - l)
        .collect();
    let name = |&(i, j): &(u32, u32)| {
        (
            gs.node_name(i).to_string(),
            gs.node_name(j).to_string(),
        )
    };
    let groups: BTreeMap<(String, String), GroupLabel> = grouping
        .pairs
        .iter()
        .zip(&grouping.labels)
        .map(|(p, l)| (name(p), *l))
        .collect();
    let sample: Vec<(String, String)> = grouping.pairs.iter().map(name).collect();
    Ok(HmlFactor {
        series,
        epsilon,
        groups,
        h_series,
        m_series,
        l_series,
        max_edges: grouping.max_edges,
        sample_exhausted: grouping.sample_exhausted,
        sample,
    })
}

/// Group sizes for n items split into k ordered groups; the remainder
/// goes to the last (highest-count) groups.
pub(crate) fn split_sizes(n: usize, k: usize) -> Vec<usize> {
    let base = n / k;
    let rem = n % k;
    (0..k)
        .map(|g| if g >= k - rem { base + 1 } else { base })
        .collect()
}

/// Regresses edge-count-sorted group mean correlations on the factor.
/// The test sample excludes every pair used in construction.
pub fn test_hml_factor(
    gs: &GraphSet,
    returns: &Panel,
    factor: &HmlFactor,
    epsilon: usize,
    n_pairs: usize,
    n_groups: usize,
    seed: u64,
) -> Result<FactorTestResult> {
    gs.check_returns_alignment(returns)?;
    if n_groups < 2 {
        return Err(FriError::InvalidParameter {
            name: "n_groups",
            msg: "need at least 2 groups".into(),
        });
    }
    if factor.epsilon != epsilon {
        return Err(FriError::InvalidParameter {
            name: "epsilon",
            msg: format!(
                "factor built at window {} but test requested {epsilon}",
                factor.epsilon
            ),
        });
    }
    let used: HashSet<&(String, String)> = factor.sample.iter().collect();
    let name = |&(i, j): &(u32, u32)| {
        (
            gs.node_name(i).to_string(),
            gs.node_name(j).to_string(),
        )
    };
    let eligible: Vec<((u32, u32), usize)> = gs
        .edge_counts()
        .into_iter()
        .filter(|(p, _)| !used.contains(&name(p)))
        .collect();
    if eligible.len() < 2 * n_groups {
        return Err(FriError::NoEligiblePairs(format!(
            "{} pairs remain outside the construction sample, need at least {}",
            eligible.len(),
            2 * n_groups
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "factor-test", 0));
    let sample_exhausted = eligible.len() <= n_pairs;
    let mut sampled: Vec<((u32, u32), usize)> = if sample_exhausted {
        eligible
    } else {
        rand::seq::index::sample(&mut rng, eligible.len(), n_pairs)
            .iter()
            .map(|k| eligible[k].clone())
            .collect()
    };
    sampled.sort_unstable_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then(pa.cmp(pb)));
    let pairs: Vec<(u32, u32)> = sampled.iter().map(|(p, _)| *p).collect();
    let cache = series_cache(gs, returns, &pairs, epsilon)?;
    let n_slots = returns.n_days() - epsilon + 1;
    let group_sizes = split_sizes(pairs.len(), n_groups);
    let mut betas = Vec::with_capacity(n_groups);
    let mut alphas = Vec::with_capacity(n_groups);
    let mut offset = 0usize;
    for &size in &group_sizes {
        let members: Vec<&RollingCorrSeries> =
            pairs[offset..offset + size].iter().map(|p| &cache[p]).collect();
        offset += size;
        let mean = group_mean_series(&members, n_slots);
        let fit = ols_fit(&mean, &factor.series)?;
        betas.push(fit.beta);
        alphas.push(fit.alpha);
    }
    let delta = delta_beta(&betas)?;
    Ok(FactorTestResult {
        betas,
        alphas,
        group_sizes,
        delta_beta: delta,
        sample: pairs.iter().map(|p| name(p)).collect(),
        sample_exhausted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::TradingCalendar;
    use crate::synth::{generate, shuffle_graphset, SynthConfig};
    use chrono::NaiveDate;
    use proptest::prelude::*;
    use rand::Rng;

    fn cal(n: usize) -> TradingCalendar {
        let start: NaiveDate = "2022-01-03".parse().unwrap();
        TradingCalendar::new((0..n as u64).map(|i| start + chrono::Days::new(i)).collect())
            .unwrap()
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("T{i:04}")).collect()
    }

    /// Graph over 6 nodes where pair (0,1) is connected on 10 days,
    /// (2,3) on 5 days, (4,5) on 1 day.
    fn counted_graph(n_days: usize) -> GraphSet {
        let mut days: Vec<BTreeMap<(u32, u32), f64>> = vec![BTreeMap::new(); n_days];
        for (t, day) in days.iter_mut().enumerate() {
            if t < 10 {
                day.insert((0, 1), 1.0);
            }
            if t < 5 {
                day.insert((2, 3), 1.0);
            }
            if t < 1 {
                day.insert((4, 5), 1.0);
            }
        }
        GraphSet::new(cal(n_days), names(6), days).unwrap()
    }

    fn noise_panel(n_tickers: usize, n_ret: usize, seed: u64) -> Panel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<f64>> = (0..n_tickers)
            .map(|_| (0..n_ret).map(|_| rng.random_range(-1.0f64..1.0)).collect())
            .collect();
        Panel::new(cal(n_ret + 1).drop_first().unwrap(), names(n_tickers), cols).unwrap()
    }

    #[test]
    fn threshold_arithmetic_groups() {
        let gs = counted_graph(40);
        let returns = noise_panel(6, 39, 1);
        let f = construct_hml_factor(&gs, &returns, 8, 1200, 0.7, 0.3, 0).unwrap();
        assert!(f.sample_exhausted);
        assert_eq!(f.max_edges, 10);
        let g = |a: &str, b: &str| f.groups[&(a.to_string(), b.to_string())];
        assert_eq!(g("T0000", "T0001"), GroupLabel::High);
        assert_eq!(g("T0002", "T0003"), GroupLabel::Medium);
        assert_eq!(g("T0004", "T0005"), GroupLabel::Low);
    }

    #[test]
    fn equal_counts_degenerate() {
        let mut days: Vec<BTreeMap<(u32, u32), f64>> = vec![BTreeMap::new(); 30];
        for day in days.iter_mut().take(4) {
            day.insert((0, 1), 1.0);
            day.insert((2, 3), 1.0);
        }
        let gs = GraphSet::new(cal(30), names(4), days).unwrap();
        let returns = noise_panel(4, 29, 2);
        let err = construct_hml_factor(&gs, &returns, 8, 1200, 0.7, 0.3, 0).unwrap_err();
        match err {
            FriError::FactorUndefined(msg) => assert!(msg.contains("degenerate"), "{msg}"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn no_edges_is_undefined() {
        let gs = GraphSet::new(cal(30), names(4), vec![BTreeMap::new(); 30]).unwrap();
        let returns = noise_panel(4, 29, 2);
        assert!(matches!(
            construct_hml_factor(&gs, &returns, 8, 1200, 0.7, 0.3, 0),
            Err(FriError::FactorUndefined(_))
        ));
    }

    #[test]
    fn spread_equals_high_minus_low() {
        let (gs, returns, cfg) = planted();
        let f = construct_hml_factor(&gs, &returns, cfg.epsilon, 40, 0.7, 0.3, 3).unwrap();
        for ((h, l), s) in f.h_series.iter().zip(&f.l_series).zip(&f.series) {
            if s.is_finite() {
                assert!((h - l - s).abs() < 1e-12);
            } else {
                assert!(!h.is_finite() || !l.is_finite());
            }
        }
    }

    fn planted() -> (GraphSet, Panel, SynthConfig) {
        let cfg = SynthConfig {
            n_tickers: 30,
            n_days: 300,
            epsilon: 21,
            n_event_pairs: 25,
            event_length_range: (40, 70),
            corr_boost: 0.85,
            garch_legs: false,
            news_rate_in_event: 1.0,
            news_rate_background: 0.0005,
            seed: 17,
        };
        let out = generate(&cfg).unwrap();
        (out.truth, out.returns, cfg)
    }

    #[test]
    fn planted_factor_has_positive_mean() {
        let (gs, returns, cfg) = planted();
        let f = construct_hml_factor(&gs, &returns, cfg.epsilon, 40, 0.7, 0.3, 3).unwrap();
        let defined: Vec<f64> = f.series.iter().copied().filter(|v| v.is_finite()).collect();
        assert!(!defined.is_empty());
        let mean = defined.iter().sum::<f64>() / defined.len() as f64;
        assert!(mean > 0.05, "factor mean {mean}");
    }

    #[test]
    fn construction_is_deterministic() {
        let (gs, returns, cfg) = planted();
        let a = construct_hml_factor(&gs, &returns, cfg.epsilon, 30, 0.7, 0.3, 9).unwrap();
        let b = construct_hml_factor(&gs, &returns, cfg.epsilon, 30, 0.7, 0.3, 9).unwrap();
        // Bitwise comparison: NaN slots (e.g. an empty medium group) must
        // also reproduce exactly.
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.series), bits(&b.series));
        assert_eq!(bits(&a.h_series), bits(&b.h_series));
        assert_eq!(bits(&a.m_series), bits(&b.m_series));
        assert_eq!(bits(&a.l_series), bits(&b.l_series));
        assert_eq!(a.groups, b.groups);
        assert_eq!(a.sample, b.sample);
        assert_eq!(a.max_edges, b.max_edges);
    }

    #[test]
    fn test_sample_disjoint_from_construction() {
        let (gs, returns, cfg) = planted();
        let f = construct_hml_factor(&gs, &returns, cfg.epsilon, 40, 0.7, 0.3, 3).unwrap();
        let t = test_hml_factor(&gs, &returns, &f, cfg.epsilon, 30, 5, 3).unwrap();
        let used: HashSet<_> = f.sample.iter().collect();
        assert!(t.sample.iter().all(|p| !used.contains(p)));
        assert_eq!(t.group_sizes.iter().sum::<usize>(), t.sample.len());
    }

    #[test]
    fn planted_betas_trend_upward() {
        let (gs, returns, cfg) = planted();
        let f = construct_hml_factor(&gs, &returns, cfg.epsilon, 40, 0.7, 0.3, 3).unwrap();
        let t = test_hml_factor(&gs, &returns, &f, cfg.epsilon, 30, 5, 3).unwrap();
        assert!(t.delta_beta > 0.0, "delta_beta {}", t.delta_beta);
        assert!(
            t.betas.last().unwrap() > t.betas.first().unwrap(),
            "betas {:?}",
            t.betas
        );
    }

    #[test]
    fn shuffled_graph_flattens_betas() {
        let (gs, returns, cfg) = planted();
        let f = construct_hml_factor(&gs, &returns, cfg.epsilon, 40, 0.7, 0.3, 3).unwrap();
        let t = test_hml_factor(&gs, &returns, &f, cfg.epsilon, 30, 5, 3).unwrap();
        let sgs = shuffle_graphset(&gs, 7);
        let sf = construct_hml_factor(&sgs, &returns, cfg.epsilon, 40, 0.7, 0.3, 7).unwrap();
        let st = test_hml_factor(&sgs, &returns, &sf, cfg.epsilon, 30, 5, 7).unwrap();
        assert!(
            t.delta_beta > st.delta_beta,
            "planted {} vs shuffled {}",
            t.delta_beta,
            st.delta_beta
        );
    }

    #[test]
    fn too_few_eligible_pairs_errors() {
        let gs = counted_graph(40);
        let returns = noise_panel(6, 39, 1);
        let f = construct_hml_factor(&gs, &returns, 8, 3, 0.7, 0.3, 0).unwrap();
        assert!(matches!(
            test_hml_factor(&gs, &returns, &f, 8, 10, 10, 0),
            Err(FriError::NoEligiblePairs(_))
        ));
    }

    #[test]
    fn ols_recovers_exact_line() {
        let x: Vec<f64> = (0..50).map(|k| k as f64 * 0.3 - 4.0).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        let fit = ols_fit(&y, &x).unwrap();
        assert!((fit.beta - 2.0).abs() < 1e-10);
        assert!((fit.alpha - 3.0).abs() < 1e-10);
        assert!((fit.r2 - 1.0).abs() < 1e-10);

        let ident = ols_fit(&x, &x).unwrap();
        assert!((ident.beta - 1.0).abs() < 1e-10);
        assert!(ident.alpha.abs() < 1e-10);
    }

    #[test]
    fn ols_constant_response() {
        let x: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let y = vec![0.7; 20];
        let fit = ols_fit(&y, &x).unwrap();
        assert!(fit.beta.abs() < 1e-12);
        assert!((fit.alpha - 0.7).abs() < 1e-12);
    }

    #[test]
    fn ols_rejects_degenerate_input() {
        let x = vec![1.0; 10];
        let y: Vec<f64> = (0..10).map(|k| k as f64).collect();
        assert!(matches!(ols_fit(&y, &x), Err(FriError::Degenerate(_))));
        assert!(ols_fit(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn ols_skips_missing_pairs() {
        let x = vec![0.0, 1.0, f64::NAN, 2.0, 3.0];
        let y = vec![1.0, 3.0, 10.0, 5.0, f64::NAN];
        let fit = ols_fit(&y, &x).unwrap();
        assert_eq!(fit.n_obs, 3);
        assert!((fit.beta - 2.0).abs() < 1e-12);
        assert!((fit.alpha - 1.0).abs() < 1e-12);
    }

    /// Normal-equations solve with uncentered sums, an independent
    /// algebraic route to the same estimator.
    fn normal_equations(y: &[f64], x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let det = n * sxx - sx * sx;
        let alpha = (sy * sxx - sx * sxy) / det;
        let beta = (n * sxy - sx * sy) / det;
        (alpha, beta)
    }

    #[test]
    fn ols_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..25 {
            let n = rng.random_range(5..60);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0f64..3.0)).collect();
            let y: Vec<f64> = x
                .iter()
                .map(|v| 1.5 * v - 0.3 + rng.random_range(-0.5..0.5))
                .collect();
            let fit = ols_fit(&y, &x).unwrap();
            let (a, b) = normal_equations(&y, &x);
            assert!((fit.alpha - a).abs() < 1e-10, "{} vs {a}", fit.alpha);
            assert!((fit.beta - b).abs() < 1e-10, "{} vs {b}", fit.beta);
        }
    }

    #[test]
    fn factor_regressed_on_itself_is_unit_beta() {
        let (gs, returns, cfg) = planted();
        let f = construct_hml_factor(&gs, &returns, cfg.epsilon, 30, 0.7, 0.3, 3).unwrap();
        let fit = ols_fit(&f.series, &f.series).unwrap();
        assert!((fit.beta - 1.0).abs() < 1e-10);
        assert!(fit.alpha.abs() < 1e-10);
    }

    #[test]
    fn delta_beta_cases() {
        assert_eq!(delta_beta(&[0.4, 0.4, 0.4]).unwrap(), 0.0);
        assert!((delta_beta(&[0.0, 0.9]).unwrap() - 0.9).abs() < 1e-15);
        assert!(delta_beta(&[1.0]).is_err());
    }

    #[test]
    fn group_split_gives_remainder_to_last() {
        assert_eq!(split_sizes(25, 10), vec![2, 2, 2, 2, 2, 3, 3, 3, 3, 3]);
        assert_eq!(split_sizes(30, 10), vec![3; 10]);
        assert_eq!(split_sizes(7, 3), vec![2, 2, 3]);
    }

    proptest! {
        /// The closed form agrees with the naive mean of successive
        /// differences.
        #[test]
        fn delta_beta_matches_naive_sum(betas in proptest::collection::vec(-10.0f64..10.0, 2..12)) {
            let closed = delta_beta(&betas).unwrap();
            let naive = betas.windows(2).map(|w| w[1] - w[0]).sum::<f64>()
                / (betas.len() - 1) as f64;
            prop_assert!((closed - naive).abs() < 1e-12);
        }

        #[test]
        fn split_sizes_partition(n in 2usize..200, k in 2usize..12) {
            prop_assume!(n >= k);
            let sizes = split_sizes(n, k);
            prop_assert_eq!(sizes.len(), k);
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            prop_assert!(sizes.windows(2).all(|w| w[1] >= w[0]));
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
