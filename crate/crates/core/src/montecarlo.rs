//! Monte Carlo check of the error exponents.
//!
//! Each trial draws the true hypothesis, simulates `M` mode-groups from the
//! exact count laws and decides by maximum likelihood. Trials use their own
//! ChaCha stream keyed by `(seed, party, M)` and indexed by the trial number,
//! so results do not depend on how rayon schedules the work.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{domain, Error, Result};
use crate::photon_stats::{ChannelParams, Pmf1D, Pmf2D, ProbeSpec};
use crate::sensing::{alice_slot_laws, eve_laws, RateConfig};

/// Inverse-CDF sampler over a truncated pmf. The tail mass is assigned to the
/// last count with positive probability, which biases each draw by at most
/// the tail mass.
#[derive(Debug, Clone)]
pub struct Sampler {
    cdf: Vec<f64>,
}

impl Sampler {
    pub fn new(p: &Pmf1D) -> Self {
        let mut cdf: Vec<f64> = p
            .probs()
            .iter()
            .scan(0.0, |acc, x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        let last = p.probs().iter().rposition(|x| *x > 0.0).unwrap_or(0);
        cdf[last..].iter_mut().for_each(|c| *c = 1.0);
        Self { cdf }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|&c| c <= u)
    }
}

/// `n` iid counts from `p`.
pub fn sample<R: Rng + ?Sized>(p: &Pmf1D, rng: &mut R, n: usize) -> Vec<usize> {
    let s = Sampler::new(p);
    (0..n).map(|_| s.draw(rng)).collect()
}

/// `n` iid `(signal, idler)` pairs from a joint pmf.
pub fn sample_joint<R: Rng + ?Sized>(p: &Pmf2D, rng: &mut R, n: usize) -> Vec<(usize, usize)> {
    let ni = p.dims().1;
    sample(&p.flatten(), rng, n)
        .into_iter()
        .map(|cell| (cell / ni, cell % ni))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Party {
    /// m-slot ranging.
    Alice,
    /// Binary detection of the probe.
    Eve,
}

impl Party {
    pub fn name(&self) -> &'static str {
        match self {
            Party::Alice => "alice",
            Party::Eve => "eve",
        }
    }

    fn tag(&self) -> u64 {
        match self {
            Party::Alice => 0xA11CE,
            Party::Eve => 0xE7E,
        }
    }
}

/// Options for [`fit_exponent`].
///
/// The model is `ln p = a - xi M - gamma ln M`. Bayes error probabilities
/// carry an `M^(-1/2)` prefactor that biases a plain log-linear slope
/// upwards at moderate `M xi`, hence the default `gamma = 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub prefactor_power: f64,
    /// Keep only points with `M * xi_hat >= min_decay` on the second pass.
    pub min_decay: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            prefactor_power: 0.5,
            min_decay: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayPoint {
    pub modes: u32,
    pub p_hat: f64,
    /// Trials behind `p_hat`, when it is an empirical frequency.
    pub trials: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub xi_hat: f64,
    /// 95% confidence half-width on `xi_hat`.
    pub half_width: f64,
    pub intercept: f64,
    pub used_modes: Vec<u32>,
    /// Points left out because no error was observed.
    pub zero_modes: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub modes: u32,
    pub trials: u64,
    pub errors: u64,
    pub p_hat: f64,
    /// `sqrt(p_hat (1 - p_hat) / trials)`.
    pub std_err: f64,
}

impl ErrorEstimate {
    fn new(modes: u32, trials: u64, errors: u64) -> Self {
        let p_hat = errors as f64 / trials as f64;
        Self {
            modes,
            trials,
            errors,
            p_hat,
            std_err: (p_hat * (1.0 - p_hat) / trials as f64).sqrt(),
        }
    }

    pub fn decay_point(&self) -> DecayPoint {
        DecayPoint {
            modes: self.modes,
            p_hat: self.p_hat,
            trials: Some(self.trials),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartyResult {
    pub party: Party,
    pub estimates: Vec<ErrorEstimate>,
    pub fit: Result<ExponentFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub parties: Vec<PartyResult>,
}

impl McResult {
    pub fn party(&self, party: Party) -> Option<&PartyResult> {
        self.parties.iter().find(|r| r.party == party)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub trials: u64,
    /// Mode-groups per decision, ascending.
    pub m_values: Vec<u32>,
    pub seed: u64,
    pub channel: ChannelParams,
    pub probe: ProbeSpec,
    pub parties: Vec<Party>,
    pub rates: RateConfig,
    pub fit: FitOptions,
}

impl McConfig {
    pub fn new(channel: ChannelParams, probe: ProbeSpec, trials: u64, m_values: Vec<u32>, seed: u64) -> Self {
        Self {
            trials,
            m_values,
            seed,
            channel,
            probe,
            parties: vec![Party::Alice, Party::Eve],
            rates: RateConfig::default(),
            fit: FitOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return domain("trials must be >= 1");
        }
        if self.m_values.is_empty() || self.m_values.contains(&0) {
            return domain("M values must be a nonempty list of integers >= 1");
        }
        if self.m_values.windows(2).any(|w| w[1] <= w[0]) {
            return domain("M values must be strictly ascending");
        }
        self.channel.validate()?;
        self.probe.validate()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn trial_rng(seed: u64, party: Party, modes: u32, trial: u64) -> ChaCha8Rng {
    let key = splitmix64(splitmix64(seed ^ party.tag()) ^ modes as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(trial);
    rng
}

/// Per-cell log-likelihood ratio `ln p1 - ln p0`.
fn llr_table(p1: &Pmf1D, p0: &Pmf1D) -> Vec<f64> {
    let len = p1.len().max(p0.len());
    (0..len)
        .map(|x| match (p1.get(x), p0.get(x)) {
            (a, b) if a > 0.0 && b > 0.0 => a.ln() - b.ln(),
            (a, _) if a > 0.0 => f64::INFINITY,
            (_, b) if b > 0.0 => f64::NEG_INFINITY,
            _ => 0.0,
        })
        .collect()
}

fn tie_tolerance(x: f64) -> f64 {
    1e-9 * (1.0 + x.abs())
}

/// Indices whose score ties the maximum within rounding.
fn argmax_set(scores: &[f64]) -> Vec<usize> {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| {
            if best.is_finite() {
                s >= best - tie_tolerance(best)
            } else {
                s == best
            }
        })
        .map(|(i, _)| i)
        .collect()
}

struct RangingModel {
    present: Sampler,
    absent: Sampler,
    llr: Vec<f64>,
    slots: usize,
}

impl RangingModel {
    /// Returns whether the ML slot guess was wrong.
    fn trial(&self, rng: &mut ChaCha8Rng, modes: u32) -> bool {
        let truth = rng.gen_range(0..self.slots);
        let scores: Vec<f64> = (0..self.slots)
            .map(|slot| {
                let sampler = if slot == truth { &self.present } else { &self.absent };
                (0..modes).map(|_| self.llr[sampler.draw(rng)]).sum()
            })
            .collect();
        let best = argmax_set(&scores);
        let guess = best[if best.len() > 1 { rng.gen_range(0..best.len()) } else { 0 }];
        guess != truth
    }
}

struct DetectionModel {
    background: Sampler,
    leaked: Sampler,
    llr: Vec<f64>,
}

impl DetectionModel {
    fn trial(&self, rng: &mut ChaCha8Rng, modes: u32) -> bool {
        let present: bool = rng.gen();
        let sampler = if present { &self.leaked } else { &self.background };
        let score: f64 = (0..modes).map(|_| self.llr[sampler.draw(rng)]).sum();
        let guess = if score > tie_tolerance(0.0) {
            true
        } else if score < -tie_tolerance(0.0) {
            false
        } else {
            rng.gen()
        };
        guess != present
    }
}

fn count_errors(trials: u64, run: impl Fn(u64) -> bool + Sync) -> u64 {
    (0..trials).into_par_iter().map(|t| run(t) as u64).sum()
}

/// Empirical ML error probabilities for each party and `M`, with fitted
/// exponents.
pub fn empirical_error(cfg: &McConfig) -> Result<McResult> {
    cfg.validate()?;
    let mut parties = Vec::with_capacity(cfg.parties.len());
    for &party in &cfg.parties {
        let estimates: Vec<ErrorEstimate> = match party {
            Party::Alice => {
                let (present, absent) = alice_slot_laws(&cfg.channel, &cfg.probe, &cfg.rates)?.flattened();
                let model = RangingModel {
                    present: Sampler::new(&present),
                    absent: Sampler::new(&absent),
                    llr: llr_table(&present, &absent),
                    slots: cfg.channel.m_slots,
                };
                cfg.m_values
                    .iter()
                    .map(|&m| {
                        let errors = count_errors(cfg.trials, |t| {
                            model.trial(&mut trial_rng(cfg.seed, party, m, t), m)
                        });
                        ErrorEstimate::new(m, cfg.trials, errors)
                    })
                    .collect()
            }
            Party::Eve => {
                let (background, leaked) = eve_laws(&cfg.channel, &cfg.probe, &cfg.rates)?;
                let model = DetectionModel {
                    background: Sampler::new(&background),
                    leaked: Sampler::new(&leaked),
                    llr: llr_table(&leaked, &background),
                };
                cfg.m_values
                    .iter()
                    .map(|&m| {
                        let errors = count_errors(cfg.trials, |t| {
                            model.trial(&mut trial_rng(cfg.seed, party, m, t), m)
                        });
                        ErrorEstimate::new(m, cfg.trials, errors)
                    })
                    .collect()
            }
        };
        let points: Vec<DecayPoint> = estimates.iter().map(|e| e.decay_point()).collect();
        parties.push(PartyResult {
            party,
            fit: fit_exponent(&points, &cfg.fit),
            estimates,
        });
    }
    Ok(McResult { parties })
}

struct LineFit {
    slope: f64,
    intercept: f64,
    /// Slope standard error from the stated variances.
    se_model: f64,
    /// Slope standard error from the residual scatter.
    se_resid: f64,
    dof: usize,
}

fn weighted_line(xs: &[f64], ys: &[f64], ws: &[f64]) -> LineFit {
    let sw: f64 = ws.iter().sum();
    let xbar = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / sw;
    let ybar = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(ws).map(|(x, w)| w * (x - xbar).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((x, y), w)| w * (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let dof = xs.len() - 2;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .zip(ws)
        .map(|((x, y), w)| w * (y - intercept - slope * x).powi(2))
        .sum();
    LineFit {
        slope,
        intercept,
        se_model: (1.0 / sxx).sqrt(),
        se_resid: (rss / dof as f64 / sxx).sqrt(),
        dof,
    }
}

fn fit_once(points: &[DecayPoint], opts: &FitOptions) -> Result<(LineFit, bool)> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 points with 0 < p < 1, have {}",
            points.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.modes as f64).collect();
    let ys: Vec<f64> = points
        .iter()
        .map(|p| p.p_hat.ln() + opts.prefactor_power * (p.modes as f64).ln())
        .collect();
    let known = points.iter().all(|p| p.trials.is_some());
    // Inverse variance of ln p_hat under binomial sampling.
    let ws: Vec<f64> = points
        .iter()
        .map(|p| p.trials.unwrap_or(1) as f64 * p.p_hat / (1.0 - p.p_hat))
        .collect();
    if xs.iter().all(|x| *x == xs[0]) {
        return Err(Error::InsufficientData("all points share the same M".into()));
    }
    Ok((weighted_line(&xs, &ys, &ws), known))
}

/// Decay rate from `(M, p_hat)` points by weighted least squares on
/// `ln p_hat + gamma ln M` against `M`.
pub fn fit_exponent(points: &[DecayPoint], opts: &FitOptions) -> Result<ExponentFit> {
    let zero_modes: Vec<u32> = points.iter().filter(|p| p.p_hat <= 0.0).map(|p| p.modes).collect();
    let mut usable: Vec<DecayPoint> = points
        .iter()
        .copied()
        .filter(|p| p.p_hat > 0.0 && p.p_hat < 1.0)
        .collect();
    let (mut line, mut known) = fit_once(&usable, opts)?;
    if opts.min_decay > 0.0 {
        let xi = -line.slope;
        let asymptotic: Vec<DecayPoint> = usable
            .iter()
            .copied()
            .filter(|p| p.modes as f64 * xi >= opts.min_decay)
            .collect();
        if asymptotic.len() >= 3 && asymptotic.len() < usable.len() {
            (line, known) = fit_once(&asymptotic, opts)?;
            usable = asymptotic;
        }
    }
    let half_width = if line.dof == 0 {
        f64::INFINITY
    } else {
        let t = StudentsT::new(0.0, 1.0, line.dof as f64)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(f64::INFINITY);
        let resid = t * line.se_resid;
        if known {
            resid.max(1.959_963_984_540_054 * line.se_model)
        } else {
            resid
        }
    };
    Ok(ExponentFit {
        xi_hat: -line.slope,
        half_width,
        intercept: line.intercept,
        used_modes: usable.iter().map(|p| p.modes).collect(),
        zero_modes,
    })
}
