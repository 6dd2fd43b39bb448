//! Sensing/covertness trade-off for one-parameter probe families.
//!
//! Both exponents grow with the probe energy, so the constrained problem
//! `max xi_A subject to xi_E <= d` is solved by inverting `xi_E(mu) = d`.
//! The Lagrangian sweep `max_mu xi_A - beta xi_E` traces the same curve and
//! serves as a cross-check.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::photon_stats::{ChannelParams, ProbeFamily};
use crate::sensing::{alice_rate, eve_rate, RateConfig};

/// Default energy bracket for the solvers.
pub const DEFAULT_MU_BRACKET: (f64, f64) = (1e-8, 10.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffPoint {
    pub mu: f64,
    pub xi_e: f64,
    pub xi_a: f64,
    pub delta_xi: f64,
    /// Multiplier that produced the point, for Lagrangian sweeps.
    pub beta: Option<f64>,
    /// The Lagrangian maximum sat on the bracket edge rather than at a
    /// stationary point.
    pub at_bracket_edge: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovertInfoResult {
    /// Best ranging exponent with Eve held to `xi_E <= d`.
    pub i_c: f64,
    pub mu_star: f64,
    pub d: f64,
    /// Eve's exponent at `mu_star`.
    pub xi_e: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub rates: RateConfig,
    /// Relative tolerance on `xi_E` at the root.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Points in the coarse scan used by the Lagrangian sweep.
    pub scan_points: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rates: RateConfig::default(),
            rel_tol: 1e-9,
            max_iter: 300,
            scan_points: 48,
        }
    }
}

// Residual below which a root is reported as converged even when the bracket
// collapsed before reaching rel_tol.
const CONVERGED_RESIDUAL: f64 = 1e-6;

struct Evaluator<'a> {
    ch: &'a ChannelParams,
    family: ProbeFamily,
    cfg: &'a RateConfig,
}

impl Evaluator<'_> {
    fn eve(&self, mu: f64) -> Result<f64> {
        eve_rate(self.ch, &self.family.with_mu(mu), self.cfg)
    }

    fn alice(&self, mu: f64) -> Result<f64> {
        alice_rate(self.ch, &self.family.with_mu(mu), self.cfg)
    }

    fn point(&self, mu: f64) -> Result<TradeoffPoint> {
        let xi_a = self.alice(mu)?;
        let xi_e = self.eve(mu)?;
        Ok(TradeoffPoint {
            mu,
            xi_e,
            xi_a,
            delta_xi: xi_a - xi_e,
            beta: None,
            at_bracket_edge: false,
        })
    }
}

fn check_bracket((lo, hi): (f64, f64)) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
        return domain(format!("mu bracket must satisfy 0 <= lo < hi, got [{lo}, {hi}]"));
    }
    Ok(())
}

/// Midpoint in log space when both ends are positive.
fn split(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 {
        (lo * hi).sqrt()
    } else {
        0.5 * (lo + hi)
    }
}

/// Covert information `I_C(d)`: the largest ranging exponent with Eve's
/// exponent at most `d`, over probe energies in `mu_bracket`.
pub fn covert_information(
    ch: &ChannelParams,
    family: ProbeFamily,
    d: f64,
    mu_bracket: (f64, f64),
    cfg: &SolverConfig,
) -> Result<CovertInfoResult> {
    if !(d > 0.0 && d.is_finite()) {
        return domain(format!("covertness bound d must be positive, got {d}"));
    }
    check_bracket(mu_bracket)?;
    let ev = Evaluator {
        ch,
        family,
        cfg: &cfg.rates,
    };
    let (mut lo, mut hi) = mu_bracket;
    let e_lo = ev.eve(lo)?;
    let e_hi = ev.eve(hi)?;
    let e_mid = ev.eve(split(lo, hi))?;
    if !(e_lo <= e_mid && e_mid <= e_hi) {
        return Err(Error::NonMonotone(format!(
            "xi_E = {e_lo:e}, {e_mid:e}, {e_hi:e} at mu = {lo:e}, {:e}, {hi:e}",
            split(lo, hi)
        )));
    }
    if d < e_lo || d > e_hi {
        return Err(Error::Bracket {
            target: d,
            lo: e_lo,
            hi: e_hi,
        });
    }

    let (mut best_mu, mut best_e) = if d - e_lo < e_hi - d { (lo, e_lo) } else { (hi, e_hi) };
    let mut iterations = 0;
    while (best_e - d).abs() > cfg.rel_tol * d && iterations < cfg.max_iter {
        let mid = split(lo, hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let e = ev.eve(mid)?;
        iterations += 1;
        if (e - d).abs() < (best_e - d).abs() {
            best_mu = mid;
            best_e = e;
        }
        if e < d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let residual = (best_e - d).abs() / d;
    Ok(CovertInfoResult {
        i_c: ev.alice(best_mu)?,
        mu_star: best_mu,
        d,
        xi_e: best_e,
        converged: residual <= cfg.rel_tol.max(CONVERGED_RESIDUAL),
        iterations,
    })
}

fn check_grid(mu_grid: &[f64]) -> Result<()> {
    if mu_grid.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
        return domain("mu grid entries must be positive and finite");
    }
    if mu_grid.windows(2).any(|w| w[1] <= w[0]) {
        return domain("mu grid must be strictly ascending");
    }
    Ok(())
}

/// `(xi_E, xi_A, delta_xi)` along a grid of probe energies, ordered by `xi_E`.
pub fn tradeoff_curve(
    ch: &ChannelParams,
    family: ProbeFamily,
    mu_grid: &[f64],
    cfg: &RateConfig,
) -> Result<Vec<TradeoffPoint>> {
    check_grid(mu_grid)?;
    let ev = Evaluator { ch, family, cfg };
    let mut points = mu_grid
        .par_iter()
        .map(|&mu| ev.point(mu))
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.xi_e.total_cmp(&b.xi_e));
    Ok(points)
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// For each `beta`, the energy maximizing `xi_A - beta xi_E` over the bracket.
/// Maxima on the bracket edge are returned with `at_bracket_edge` set.
pub fn lagrangian_sweep(
    ch: &ChannelParams,
    family: ProbeFamily,
    beta_grid: &[f64],
    mu_bracket: (f64, f64),
    cfg: &SolverConfig,
) -> Result<Vec<TradeoffPoint>> {
    if beta_grid.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return domain("beta values must be finite and >= 0");
    }
    check_bracket(mu_bracket)?;
    if cfg.scan_points < 3 {
        return domain("the coarse scan needs at least 3 points");
    }
    let ev = Evaluator {
        ch,
        family,
        cfg: &cfg.rates,
    };
    let (lo, hi) = mu_bracket;
    let n = cfg.scan_points;
    let log_scale = lo > 0.0;
    let to_mu = |t: f64| if log_scale { lo * (hi / lo).powf(t) } else { lo + (hi - lo) * t };
    let scan = (0..n)
        .into_par_iter()
        .map(|i| ev.point(to_mu(i as f64 / (n - 1) as f64)))
        .collect::<Result<Vec<_>>>()?;

    beta_grid
        .par_iter()
        .map(|&beta| {
            let lagrangian = |p: &TradeoffPoint| p.xi_a - beta * p.xi_e;
            let values: Vec<f64> = scan.iter().map(lagrangian).collect();
            let imax = values
                .iter()
                .enumerate()
                .fold(0, |best, (i, v)| if *v > values[best] { i } else { best });
            let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let slack = 1e-12 * scale;
            let peaks = (1..n - 1)
                .filter(|&i| values[i] > values[i - 1] + slack && values[i] > values[i + 1] + slack)
                .count();
            if peaks > 1 {
                return Err(Error::NonMonotone(format!(
                    "xi_A - {beta} xi_E has {peaks} local maxima over the bracket"
                )));
            }
            if imax == 0 || imax == n - 1 {
                return Ok(TradeoffPoint {
                    beta: Some(beta),
                    at_bracket_edge: true,
                    ..scan[imax]
                });
            }
            // Golden section on the scan cell around the peak, in scan units.
            let t_of = |i: usize| i as f64 / (n - 1) as f64;
            let (mut a, mut b) = (t_of(imax - 1), t_of(imax + 1));
            let eval = |t: f64| ev.point(to_mu(t)).map(|p| (lagrangian(&p), p));
            let mut x1 = b - INV_PHI * (b - a);
            let mut x2 = a + INV_PHI * (b - a);
            let mut f1 = eval(x1)?;
            let mut f2 = eval(x2)?;
            for _ in 0..cfg.max_iter {
                if b - a < 1e-12 {
                    break;
                }
                if f1.0 >= f2.0 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - INV_PHI * (b - a);
                    f1 = eval(x1)?;
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + INV_PHI * (b - a);
                    f2 = eval(x2)?;
                }
            }
            let best = if f1.0 >= f2.0 { f1.1 } else { f2.1 };
            Ok(TradeoffPoint {
                beta: Some(beta),
                ..best
            })
        })
        .collect()
}
