//! Ranging (Alice) and detection (Eve) exponents for a probe and channel.
//!
//! Alice ranges over `m` slots, each a product of a target-present slot and
//! background-only slots. Her exponent is `2 B(P_kappa, P_B)`. Eve
//! passively tests background against background plus the leaked probe.
//! All rates are per mode-group.

use crate::chernoff::{bhattacharyya, chernoff, min_pair_rate, RateResult, DEFAULT_ALPHA_TOL};
use crate::error::{domain, Result};
use crate::photon_stats::{
    convolve, multithermal_pmf, poisson_pair, poisson_pmf, tmsv_joint, ChannelParams,
    Pmf1D, Pmf2D, ProbeFamily, ProbeSpec, DEFAULT_EPS_TAIL,
};

/// TMSV copies used when a sweep does not say otherwise.
pub const DEFAULT_TMSV_COPIES: u64 = 1000;

/// Cells allowed in an explicit m-slot product hypothesis.
const MAX_PRODUCT_CELLS: usize = 1 << 24;

/// Numerical knobs shared by every rate evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConfig {
    pub eps_tail: f64,
    pub alpha_tol: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            eps_tail: DEFAULT_EPS_TAIL,
            alpha_tol: DEFAULT_ALPHA_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioRates {
    pub xi_a: f64,
    pub xi_e: f64,
    /// `xi_a - xi_e`.
    pub delta_xi: f64,
    /// High-background approximation of `xi_e`, for diagnostics.
    pub xi_e_approx: f64,
}

/// Alice's per-slot count laws, target present and absent.
#[derive(Debug, Clone, PartialEq)]
pub enum SlotLaws {
    Counts { present: Pmf1D, absent: Pmf1D },
    /// Signal and idler counts; the idler is uncorrelated when the target is
    /// absent.
    Joint { present: Pmf2D, absent: Pmf2D },
}

impl SlotLaws {
    /// Both laws flattened onto one enumerated cell grid.
    pub fn flattened(&self) -> (Pmf1D, Pmf1D) {
        match self {
            SlotLaws::Counts { present, absent } => {
                let len = present.len().max(absent.len());
                (pad(present, len), pad(absent, len))
            }
            SlotLaws::Joint { present, absent } => {
                let (ps, pi) = present.dims();
                let (as_, ai) = absent.dims();
                let (ns, ni) = (ps.max(as_), pi.max(ai));
                let grid = |p: &Pmf2D| {
                    let probs = (0..ns)
                        .flat_map(|s| (0..ni).map(move |i| (s, i)))
                        .map(|(s, i)| p.get(s, i))
                        .collect();
                    Pmf1D::from_parts(probs, p.tail_mass()).expect("padding keeps a valid pmf")
                };
                (grid(present), grid(absent))
            }
        }
    }

    /// `B(P_kappa, P_B)`.
    pub fn bhattacharyya(&self) -> f64 {
        match self {
            SlotLaws::Counts { present, absent } => bhattacharyya(present, absent),
            SlotLaws::Joint { present, absent } => bhattacharyya(present, absent),
        }
    }
}

fn pad(p: &Pmf1D, len: usize) -> Pmf1D {
    let mut probs = p.probs().to_vec();
    probs.resize(len, 0.0);
    Pmf1D::from_parts(probs, p.tail_mass()).expect("padding keeps a valid pmf")
}

fn validate(ch: &ChannelParams, probe: &ProbeSpec) -> Result<()> {
    ch.validate()?;
    probe.validate()
}

/// Count laws in one of Alice's slots.
pub fn alice_slot_laws(ch: &ChannelParams, probe: &ProbeSpec, cfg: &RateConfig) -> Result<SlotLaws> {
    validate(ch, probe)?;
    let tau = ch.alice_transmittance();
    match probe.family {
        ProbeFamily::Coherent => {
            let (present, absent) = poisson_pair(tau * probe.mu + ch.mu_b, ch.mu_b, cfg.eps_tail)?;
            Ok(SlotLaws::Counts { present, absent })
        }
        ProbeFamily::Tmsv { copies } => {
            // Same tail split as tmsv_joint so both laws share the idler law
            // bit for bit.
            let half = cfg.eps_tail / 2.0;
            let present = tmsv_joint(copies, probe.mu, tau, ch.mu_b, cfg.eps_tail)?;
            let absent = Pmf2D::product(
                &poisson_pmf(ch.mu_b, half)?,
                &multithermal_pmf(copies, probe.mu, half)?,
            );
            Ok(SlotLaws::Joint { present, absent })
        }
    }
}

/// Eve's count laws: background only, and background plus leaked probe.
/// Eve holds no idler.
pub fn eve_laws(ch: &ChannelParams, probe: &ProbeSpec, cfg: &RateConfig) -> Result<(Pmf1D, Pmf1D)> {
    validate(ch, probe)?;
    let tau = ch.eve_transmittance();
    match probe.family {
        ProbeFamily::Coherent => poisson_pair(ch.mu_b, tau * probe.mu + ch.mu_b, cfg.eps_tail),
        ProbeFamily::Tmsv { copies } => {
            // Same background grid on both sides, so a dark probe gives
            // identical laws.
            let background = poisson_pmf(ch.mu_b, cfg.eps_tail / 2.0)?;
            let leaked = convolve(&multithermal_pmf(copies, tau * probe.mu, cfg.eps_tail / 2.0)?, &background);
            Ok((background, leaked))
        }
    }
}

/// Alice's ranging exponent `2 B(P_kappa, P_B)`.
pub fn alice_rate(ch: &ChannelParams, probe: &ProbeSpec, cfg: &RateConfig) -> Result<f64> {
    Ok(2.0 * alice_slot_laws(ch, probe, cfg)?.bhattacharyya())
}

/// Closed form of the coherent ranging exponent,
/// `x + 2 mu_B - 2 sqrt(mu_B) sqrt(mu_B + x)` with `x = kappa eta_A mu`,
/// written as `x^2 / (sqrt(mu_B + x) + sqrt(mu_B))^2` to avoid cancellation.
pub fn alice_rate_coherent_closed(ch: &ChannelParams, mu: f64) -> f64 {
    let x = ch.alice_transmittance() * mu;
    sqrt_gap(x, ch.mu_b)
}

fn sqrt_gap(x: f64, mu_b: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let denom = (mu_b + x).sqrt() + mu_b.sqrt();
    x * x / (denom * denom)
}

/// Builds the `m` ranging hypotheses as explicit slot products over the
/// flattened per-slot grid. Hypothesis `j` has the target in slot `j`.
pub fn ranging_hypotheses(present: &Pmf1D, absent: &Pmf1D, m: usize) -> Result<Vec<Pmf1D>> {
    if m < 2 {
        return domain(format!("ranging needs at least 2 slots, got {m}"));
    }
    let len = present.len().max(absent.len());
    let cells = (0..m).try_fold(1usize, |acc, _| acc.checked_mul(len));
    match cells {
        Some(c) if c <= MAX_PRODUCT_CELLS => {}
        _ => return domain(format!("{m} slots of {len} cells exceed the product size limit")),
    }
    let cells = len.pow(m as u32);
    let represented = (1.0 - present.tail_mass()) * (1.0 - absent.tail_mass()).powi(m as i32 - 1);
    (0..m)
        .map(|j| {
            let mut probs = vec![0.0; cells];
            for (idx, out) in probs.iter_mut().enumerate() {
                let mut rest = idx;
                let mut prob = 1.0;
                for slot in (0..m).rev() {
                    let count = rest % len;
                    rest /= len;
                    prob *= if slot == j { present.get(count) } else { absent.get(count) };
                    if prob == 0.0 {
                        break;
                    }
                }
                *out = prob;
            }
            Pmf1D::from_parts(probs, (1.0 - represented).max(0.0))
        })
        .collect()
}

/// Ranging exponent from the explicit m-slot hypotheses and the
/// closest-pair rule, with a full alpha search. Diagnostic cross-check of
/// [`alice_rate`].
pub fn alice_rate_explicit(ch: &ChannelParams, probe: &ProbeSpec, cfg: &RateConfig) -> Result<RateResult> {
    let (present, absent) = alice_slot_laws(ch, probe, cfg)?.flattened();
    let hyps = ranging_hypotheses(&present, &absent, ch.m_slots)?;
    min_pair_rate(&hyps, cfg.alpha_tol)
}

/// Eve's detection exponent with the full alpha search.
pub fn eve_chernoff(ch: &ChannelParams, probe: &ProbeSpec, cfg: &RateConfig) -> Result<RateResult> {
    let (background, leaked) = eve_laws(ch, probe, cfg)?;
    chernoff(&background, &leaked, cfg.alpha_tol)
}

pub fn eve_rate(ch: &ChannelParams, probe: &ProbeSpec, cfg: &RateConfig) -> Result<f64> {
    Ok(eve_chernoff(ch, probe, cfg)?.rate)
}

/// High-background approximation of Eve's exponent,
/// `x/2 + mu_B - sqrt(mu_B) sqrt(mu_B + x)` with `x = (1 - kappa) eta_E mu`.
pub fn eve_rate_approx(ch: &ChannelParams, mu: f64) -> f64 {
    0.5 * sqrt_gap(ch.eve_transmittance() * mu, ch.mu_b)
}

pub fn delta_xi(ch: &ChannelParams, probe: &ProbeSpec, cfg: &RateConfig) -> Result<ScenarioRates> {
    let xi_a = alice_rate(ch, probe, cfg)?;
    let xi_e = eve_rate(ch, probe, cfg)?;
    Ok(ScenarioRates {
        xi_a,
        xi_e,
        delta_xi: xi_a - xi_e,
        xi_e_approx: eve_rate_approx(ch, probe.mu),
    })
}

/// Per-mode decay rates of a coherent probe that puts all `M mu` photons
/// into one mode, as `M -> inf`: `(kappa eta_A mu, (1 - kappa) eta_E mu)`.
pub fn asymptotic_rates(ch: &ChannelParams, mu: f64) -> (f64, f64) {
    (ch.alice_transmittance() * mu, ch.eve_transmittance() * mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_channel() -> ChannelParams {
        ChannelParams::new(0.2, 1.0, 1.0, 10.0, 2).unwrap()
    }

    fn cfg() -> RateConfig {
        RateConfig::default()
    }

    #[test]
    fn coherent_alice_rate_value() {
        // (sqrt(10.2) - sqrt(10))^2 at 50 digits.
        let expected = 9.901_232_758_440_863e-4;
        let xi = alice_rate(&reference_channel(), &ProbeSpec::coherent(1.0), &cfg()).unwrap();
        assert!((xi - expected).abs() < 1e-12 * expected);
        assert!((alice_rate_coherent_closed(&reference_channel(), 1.0) - expected).abs() < 1e-14 * expected);
    }

    #[test]
    fn vanishing_alice_rate() {
        let mut ch = reference_channel();
        assert_eq!(alice_rate(&ch, &ProbeSpec::coherent(0.0), &cfg()).unwrap(), 0.0);
        assert_eq!(alice_rate(&ch, &ProbeSpec::tmsv(100, 0.0), &cfg()).unwrap(), 0.0);
        ch.kappa = 0.0;
        assert_eq!(alice_rate(&ch, &ProbeSpec::coherent(3.0), &cfg()).unwrap(), 0.0);
        assert!(alice_rate(&ch, &ProbeSpec::tmsv(100, 3.0), &cfg()).unwrap() < 1e-15);
    }

    #[test]
    fn tmsv_beats_coherent_for_alice_at_low_energy() {
        for mu in [1e-3, 1e-2, 0.05, 0.1] {
            let q = alice_rate(&reference_channel(), &ProbeSpec::tmsv(1000, mu), &cfg()).unwrap();
            let c = alice_rate(&reference_channel(), &ProbeSpec::coherent(mu), &cfg()).unwrap();
            assert!(q > c, "mu={mu}: tmsv {q} coherent {c}");
        }
    }

    #[test]
    fn eve_rate_values() {
        assert_eq!(eve_rate(&reference_channel(), &ProbeSpec::coherent(0.0), &cfg()).unwrap(), 0.0);
        assert_eq!(eve_rate(&reference_channel(), &ProbeSpec::tmsv(10, 0.0), &cfg()).unwrap(), 0.0);
        // 50-digit references.
        let exact = eve_rate(&reference_channel(), &ProbeSpec::coherent(1.0), &cfg()).unwrap();
        assert!((exact - 7.695_471_085_280_816e-3).abs() < 1e-10 * exact);
        let approx = eve_rate_approx(&reference_channel(), 1.0);
        assert!((approx - 7.695_154_586_736_239e-3).abs() < 1e-15);
        let faint = eve_rate(&reference_channel(), &ProbeSpec::coherent(1e-3), &cfg()).unwrap();
        assert!((faint - 7.999_680_016_354_617e-9).abs() < 1e-8 * faint);
    }

    #[test]
    fn delta_xi_bundle() {
        let r = delta_xi(&reference_channel(), &ProbeSpec::coherent(0.0), &cfg()).unwrap();
        assert_eq!((r.xi_a, r.xi_e, r.delta_xi, r.xi_e_approx), (0.0, 0.0, 0.0, 0.0));
        let r = delta_xi(&reference_channel(), &ProbeSpec::coherent(0.7), &cfg()).unwrap();
        assert_eq!(r.delta_xi, r.xi_a - r.xi_e);
    }

    #[test]
    fn coherent_delta_xi_negative_on_reference_channel() {
        for i in 0..=25 {
            let mu = 1e-4 * 10f64.powf(i as f64 * 5.0 / 25.0);
            let r = delta_xi(&reference_channel(), &ProbeSpec::coherent(mu), &cfg()).unwrap();
            assert!(r.delta_xi < 0.0, "mu={mu}");
        }
    }

    #[test]
    fn tmsv_delta_xi_has_positive_interior_maximum() {
        let mus: Vec<f64> = (0..=30).map(|i| 1e-4 * 10f64.powf(i as f64 * 4.0 / 30.0)).collect();
        let d: Vec<f64> = mus
            .iter()
            .map(|&mu| delta_xi(&reference_channel(), &ProbeSpec::tmsv(1000, mu), &cfg()).unwrap().delta_xi)
            .collect();
        let (imax, max) = d
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert!(max > 0.0);
        assert!(imax > 0 && imax < d.len() - 1);
        assert!(*d.last().unwrap() < 0.0);
    }

    #[test]
    fn asymptotic_single_mode_rates() {
        assert_eq!(asymptotic_rates(&reference_channel(), 1.0), (0.2, 0.8));
        assert_eq!(asymptotic_rates(&reference_channel(), 0.0), (0.0, 0.0));
    }

    #[test]
    fn monotone_in_parameters() {
        let grid = [0.0, 0.01, 0.1, 0.5, 1.0, 3.0];
        for family in [ProbeFamily::Coherent, ProbeFamily::Tmsv { copies: 100 }] {
            let mut prev_a = 0.0;
            let mut prev_e = 0.0;
            for &mu in &grid {
                let a = alice_rate(&reference_channel(), &family.with_mu(mu), &cfg()).unwrap();
                let e = eve_rate(&reference_channel(), &family.with_mu(mu), &cfg()).unwrap();
                assert!(a >= prev_a - 1e-12 && e >= prev_e - 1e-12);
                prev_a = a;
                prev_e = e;
            }
            let (mut prev_a, mut prev_e) = (0.0, f64::INFINITY);
            for kappa in [0.0, 0.1, 0.3, 0.6, 0.9, 1.0] {
                let ch = ChannelParams { kappa, ..reference_channel() };
                let a = alice_rate(&ch, &family.with_mu(1.0), &cfg()).unwrap();
                let e = eve_rate(&ch, &family.with_mu(1.0), &cfg()).unwrap();
                assert!(a >= prev_a - 1e-12 && e <= prev_e + 1e-12);
                prev_a = a;
                prev_e = e;
            }
            let (mut prev_a, mut prev_e) = (0.0, 0.0);
            for eta in [0.0, 0.2, 0.5, 1.0] {
                let ch = ChannelParams { eta_a: eta, eta_e: eta, ..reference_channel() };
                let a = alice_rate(&ch, &family.with_mu(1.0), &cfg()).unwrap();
                let e = eve_rate(&ch, &family.with_mu(1.0), &cfg()).unwrap();
                assert!(a >= prev_a - 1e-12 && e >= prev_e - 1e-12);
                prev_a = a;
                prev_e = e;
            }
        }
    }

    #[test]
    fn explicit_slot_products_reduce_to_twice_bhattacharyya() {
        for m in [2, 3] {
            let ch = ChannelParams { m_slots: m, mu_b: 2.0, ..reference_channel() };
            let probe = ProbeSpec::coherent(3.0);
            let explicit = alice_rate_explicit(&ch, &probe, &cfg()).unwrap();
            let direct = alice_rate(&ch, &probe, &cfg()).unwrap();
            assert!((explicit.rate - direct).abs() < 1e-10, "m={m}");
            assert!((explicit.alpha_star - 0.5).abs() < 1e-6);
        }
        let ch = ChannelParams { mu_b: 0.5, ..reference_channel() };
        let probe = ProbeSpec::tmsv(50, 0.3);
        let explicit = alice_rate_explicit(&ch, &probe, &cfg()).unwrap();
        let direct = alice_rate(&ch, &probe, &cfg()).unwrap();
        assert!((explicit.rate - direct).abs() < 1e-10);
    }

    #[test]
    fn high_background_approximation() {
        for mu_b in [1.0, 10.0, 100.0] {
            for ratio in [100.0, 1000.0] {
                let mu = mu_b / ratio;
                let ch = ChannelParams { mu_b, ..reference_channel() };
                let exact = eve_rate(&ch, &ProbeSpec::coherent(mu), &cfg()).unwrap();
                let approx = eve_rate_approx(&ch, mu);
                assert!(((exact - approx) / exact).abs() < 0.01);
            }
        }
    }

    #[test]
    fn tmsv_eve_converges_to_coherent() {
        let c = eve_rate(&reference_channel(), &ProbeSpec::coherent(1.0), &cfg()).unwrap();
        let q = eve_rate(&reference_channel(), &ProbeSpec::tmsv(10_000, 1.0), &cfg()).unwrap();
        assert!(((q - c) / c).abs() < 1e-3);
    }

    #[test]
    fn ranging_hypotheses_limits() {
        let p = poisson_pmf(1.0, 1e-12).unwrap();
        assert!(ranging_hypotheses(&p, &p, 1).is_err());
        let big = poisson_pmf(300.0, 1e-12).unwrap();
        assert!(ranging_hypotheses(&big, &big, 4).is_err());
    }
}
