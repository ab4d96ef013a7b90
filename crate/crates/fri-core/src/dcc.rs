//! DCC-GARCH estimation per pair and the group contrast delta_DCC.
//!
//! Two-stage quasi-maximum likelihood: univariate GARCH(1,1) per return
//! leg, then a DCC(1,1) correlation stage on the standardized residuals.
//! Group-level averages of the correlation-stage parameters over pairs
//! grouped by edge count give the discriminator
//! `delta_dcc = alpha_high - alpha_low + beta_low - beta_high`.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::factor::{sample_and_group, GroupLabel};
use crate::graph::GraphSet;
use crate::market::Panel;
use crate::optim::minimize;
use crate::seed::derive_seed;
use crate::{FriError, Result};

/// Minimum observations for a meaningful volatility fit.
pub const MIN_OBS: usize = 250;

/// Univariate GARCH(1,1) quasi-maximum-likelihood fit of
/// r_t = mu + eps_t, sigma_t^2 = omega + alpha1 eps_{t-1}^2 + beta1 sigma_{t-1}^2.
#[derive(Debug, Clone)]
pub struct GarchFit {
    pub mu: f64,
    pub omega: f64,
    pub alpha1: f64,
    pub beta1: f64,
    /// Conditional variance at each observation; cond_var[0] is the sample
    /// variance initialization.
    pub cond_var: Vec<f64>,
    /// eps_t / sigma_t.
    pub std_resid: Vec<f64>,
    /// Gaussian log-likelihood at the optimum.
    pub loglik: f64,
    /// False when the simplex search hit its iteration cap.
    pub converged: bool,
}

/// DCC(1,1) correlation-stage fit on a pair of standardized residuals.
#[derive(Debug, Clone)]
pub struct DccFit {
    pub a: f64,
    pub b: f64,
    /// Dynamic correlation rho_t, one value per observation.
    pub dyn_corr: Vec<f64>,
    /// Correlation-part log-likelihood at the optimum.
    pub loglik: f64,
    pub converged: bool,
}

/// Mean correlation-stage parameters over the converged pairs of one
/// edge-count group. `alpha`/`beta` are None when nothing converged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupDcc {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub fitted: usize,
    pub failed: usize,
}

/// Group contrast of the DCC parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DccReport {
    pub high: GroupDcc,
    pub medium: GroupDcc,
    pub low: GroupDcc,
    /// alpha_high - alpha_low + beta_low - beta_high.
    pub delta_dcc: f64,
    pub max_edges: usize,
    pub sample_exhausted: bool,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn check_series(name: &'static str, r: &[f64]) -> Result<()> {
    if r.len() < MIN_OBS {
        return Err(FriError::InvalidParameter {
            name,
            msg: format!("need at least {MIN_OBS} observations, got {}", r.len()),
        });
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(FriError::Degenerate(format!(
            "{name} contains non-finite values"
        )));
    }
    Ok(())
}

/// Negative Gaussian log-likelihood of the GARCH(1,1) recursion with the
/// variance initialization fixed at `sigma0_sq`.
fn garch_negloglik(r: &[f64], sigma0_sq: f64, mu: f64, omega: f64, alpha1: f64, beta1: f64) -> f64 {
    const LN_2PI: f64 = 1.8378770664093453;
    let mut var = sigma0_sq;
    let mut prev_eps_sq = 0.0;
    let mut nll = 0.0;
    for (t, &rt) in r.iter().enumerate() {
        if t > 0 {
            var = omega + alpha1 * prev_eps_sq + beta1 * var;
        }
        let eps = rt - mu;
        nll += 0.5 * (LN_2PI + var.ln() + eps * eps / var);
        prev_eps_sq = eps * eps;
    }
    nll
}

/// Fits GARCH(1,1) by quasi-maximum likelihood under Gaussian innovations.
///
/// The search runs over unconstrained coordinates [mu, ln omega, logit s,
/// logit p] with alpha1 = s p and beta1 = s (1 - p), which enforces
/// omega > 0, alpha1, beta1 >= 0 and alpha1 + beta1 < 1 by construction.
/// Initialization: (alpha1, beta1) = (0.05, 0.90) and omega from variance
/// targeting. sigma_0^2 is pinned to the sample variance and not searched.
pub fn fit_garch11(r: &[f64]) -> Result<GarchFit> {
    check_series("r", r)?;
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let var = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var <= 0.0 || r.windows(2).all(|w| w[0] == w[1]) {
        return Err(FriError::Degenerate("constant return series".into()));
    }
    let s0 = 0.95;
    let p0 = 0.05 / 0.95;
    let x0 = [mean, (var * (1.0 - s0)).ln(), logit(s0), logit(p0)];
    let steps = [0.1 * var.sqrt(), 0.5, 0.5, 0.5];
    let unpack = |x: &[f64]| {
        let s = sigmoid(x[2]);
        let p = sigmoid(x[3]);
        (x[0], x[1].exp(), s * p, s * (1.0 - p))
    };
    let res = minimize(
        |x| {
            let (mu, omega, a1, b1) = unpack(x);
            garch_negloglik(r, var, mu, omega, a1, b1)
        },
        &x0,
        &steps,
    );
    let (mu, omega, alpha1, beta1) = unpack(&res.x);
    let mut cond_var = Vec::with_capacity(r.len());
    let mut std_resid = Vec::with_capacity(r.len());
    let mut v = var;
    let mut prev_eps_sq = 0.0;
    for (t, &rt) in r.iter().enumerate() {
        if t > 0 {
            v = omega + alpha1 * prev_eps_sq + beta1 * v;
        }
        let eps = rt - mu;
        cond_var.push(v);
        std_resid.push(eps / v.sqrt());
        prev_eps_sq = eps * eps;
    }
    Ok(GarchFit {
        mu,
        omega,
        alpha1,
        beta1,
        cond_var,
        std_resid,
        loglik: -res.f,
        converged: res.converged,
    })
}

/// Negative correlation-part log-likelihood of the DCC(1,1) recursion
/// Q_t = (1-a-b) Qbar + a z_{t-1} z_{t-1}' + b Q_{t-1}, Q_0 = Qbar.
/// When `corr` is Some, the per-observation dynamic correlation is
/// appended to it.
fn dcc_negloglik(
    za: &[f64],
    zb: &[f64],
    qbar: (f64, f64, f64),
    a: f64,
    b: f64,
    mut corr: Option<&mut Vec<f64>>,
) -> f64 {
    let (q11_bar, q12_bar, q22_bar) = qbar;
    let (mut q11, mut q12, mut q22) = qbar;
    let mut nll = 0.0;
    for t in 0..za.len() {
        if t > 0 {
            let (x, y) = (za[t - 1], zb[t - 1]);
            q11 = (1.0 - a - b) * q11_bar + a * x * x + b * q11;
            q12 = (1.0 - a - b) * q12_bar + a * x * y + b * q12;
            q22 = (1.0 - a - b) * q22_bar + a * y * y + b * q22;
        }
        let denom = (q11 * q22).sqrt();
        if !(denom > 0.0) {
            return f64::INFINITY;
        }
        let rho = q12 / denom;
        let one_m = 1.0 - rho * rho;
        if !(one_m > 0.0) {
            return f64::INFINITY;
        }
        let (x, y) = (za[t], zb[t]);
        nll += 0.5 * (one_m.ln() + (x * x - 2.0 * rho * x * y + y * y) / one_m - (x * x + y * y));
        if let Some(c) = corr.as_deref_mut() {
            c.push(rho);
        }
    }
    nll
}

/// Fits the DCC(1,1) correlation stage on two standardized residual
/// series. Search coordinates are [logit s, logit p] with a = s p and
/// b = s (1 - p), so a, b >= 0 and a + b < 1 hold by construction;
/// initialization (a, b) = (0.05, 0.90).
pub fn fit_dcc11(za: &[f64], zb: &[f64]) -> Result<DccFit> {
    check_series("za", za)?;
    check_series("zb", zb)?;
    if za.len() != zb.len() {
        return Err(FriError::InvalidParameter {
            name: "zb",
            msg: format!("length {} does not match za length {}", zb.len(), za.len()),
        });
    }
    let n = za.len() as f64;
    let ma = za.iter().sum::<f64>() / n;
    let mb = zb.iter().sum::<f64>() / n;
    let mut q11 = 0.0;
    let mut q12 = 0.0;
    let mut q22 = 0.0;
    for (x, y) in za.iter().zip(zb) {
        q11 += (x - ma) * (x - ma);
        q12 += (x - ma) * (y - mb);
        q22 += (y - mb) * (y - mb);
    }
    let qbar = (q11 / n, q12 / n, q22 / n);
    if qbar.0 <= 0.0 || qbar.2 <= 0.0 {
        return Err(FriError::Degenerate("constant residual series".into()));
    }
    let rho_bar = qbar.1 / (qbar.0 * qbar.2).sqrt();
    if rho_bar.abs() > 0.9999 {
        return Err(FriError::Degenerate(format!(
            "residual pair is perfectly correlated (rho = {rho_bar:.6})"
        )));
    }
    let s0 = 0.95;
    let p0 = 0.05 / 0.95;
    let x0 = [logit(s0), logit(p0)];
    let unpack = |x: &[f64]| {
        let s = sigmoid(x[0]);
        let p = sigmoid(x[1]);
        (s * p, s * (1.0 - p))
    };
    let res = minimize(
        |x| {
            let (a, b) = unpack(x);
            dcc_negloglik(za, zb, qbar, a, b, None)
        },
        &x0,
        &[0.5, 0.5],
    );
    let (a, b) = unpack(&res.x);
    let mut dyn_corr = Vec::with_capacity(za.len());
    let loglik = -dcc_negloglik(za, zb, qbar, a, b, Some(&mut dyn_corr));
    Ok(DccFit {
        a,
        b,
        dyn_corr,
        loglik,
        converged: res.converged,
    })
}

/// Group DCC contrast over an edge-count grouping of sampled pairs.
///
/// Pairs are sampled and labeled exactly as for the spread factor
/// (thresholds phi_h/phi_l of the sampled maximum edge count). Each leg
/// gets one GARCH fit (cached per ticker), each pair one DCC fit on the
/// standardized residuals; pairs with a non-converged or degenerate stage
/// are counted as failed and excluded from the group means. Group means
/// run over pairs in lexicographic order, so the result is independent of
/// thread count. A grouping with an empty or fully-failed High or Low
/// group is reported as an edge-factor-undefined error; callers map it to
/// a not-applicable outcome.
pub fn delta_dcc(
    gs: &GraphSet,
    returns: &Panel,
    seed: u64,
    n_pairs: usize,
    phi_h: f64,
    phi_l: f64,
) -> Result<DccReport> {
    gs.check_returns_alignment(returns)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "dcc-group", 0));
    let grouping = sample_and_group(gs, n_pairs, phi_h, phi_l, &mut rng)?;

    let mut leg_ids: Vec<u32> = grouping
        .pairs
        .iter()
        .flat_map(|&(i, j)| [i, j])
        .collect();
    leg_ids.sort_unstable();
    leg_ids.dedup();
    let leg_fits: BTreeMap<u32, Option<GarchFit>> = leg_ids
        .par_iter()
        .map(|&id| {
            let series = returns
                .series_of(gs.node_name(id))
                .expect("aligned panel has every graph node");
            let fit = fit_garch11(series).ok().filter(|f| f.converged);
            (id, fit)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect();

    let pair_fits: Vec<Option<(f64, f64)>> = grouping
        .pairs
        .par_iter()
        .map(|&(i, j)| {
            let (Some(fa), Some(fb)) = (&leg_fits[&i], &leg_fits[&j]) else {
                return None;
            };
            match fit_dcc11(&fa.std_resid, &fb.std_resid) {
                Ok(fit) if fit.converged => Some((fit.a, fit.b)),
                _ => None,
            }
        })
        .collect();

    let summarize = |label: GroupLabel| -> GroupDcc {
        let mut sum_a = 0.0;
        let mut sum_b = 0.0;
        let mut fitted = 0usize;
        let mut failed = 0usize;
        for (k, l) in grouping.labels.iter().enumerate() {
            if *l != label {
                continue;
            }
            match pair_fits[k] {
                Some((a, b)) => {
                    sum_a += a;
                    sum_b += b;
                    fitted += 1;
                }
                None => failed += 1,
            }
        }
        GroupDcc {
            alpha: (fitted > 0).then(|| sum_a / fitted as f64),
            beta: (fitted > 0).then(|| sum_b / fitted as f64),
            fitted,
            failed,
        }
    };
    let high = summarize(GroupLabel::High);
    let medium = summarize(GroupLabel::Medium);
    let low = summarize(GroupLabel::Low);
    let (Some(ah), Some(bh), Some(al), Some(bl)) = (high.alpha, high.beta, low.alpha, low.beta)
    else {
        return Err(FriError::FactorUndefined(
            "no converged DCC fits in the high or low group".into(),
        ));
    };
    Ok(DccReport {
        delta_dcc: ah - al + bl - bh,
        high,
        medium,
        low,
        max_edges: grouping.max_edges,
        sample_exhausted: grouping.sample_exhausted,
    })
}
