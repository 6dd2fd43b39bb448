//! Photon-number distributions seen at Alice's and Eve's detectors.
//!
//! Every distribution is a truncated pmf over counts `0..=N_max` that carries
//! the mass it dropped beyond `N_max` in `tail_mass`, so `sum + tail_mass == 1`
//! up to rounding. Constructors pick the smallest `N_max` leaving less than
//! `eps_tail` in the tail and refuse (rather than clip) when that would need
//! more than [`MAX_SUPPORT`] points.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Error, Result};

/// Default tail budget per constructed pmf.
pub const DEFAULT_EPS_TAIL: f64 = 1e-12;

/// Hard ceiling on the support of a single pmf axis.
pub const MAX_SUPPORT: usize = 4096;

/// Supports at or above this length are convolved with an FFT.
const SPECTRAL_THRESHOLD: usize = 256;

// Below this log-probability the count-0 term underflows and construction is
// anchored at the mode instead.
const LOG_UNDERFLOW: f64 = -700.0;

/// Truncated pmf over photon counts with tracked tail mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf1D {
    probs: Vec<f64>,
    tail_mass: f64,
}

impl Pmf1D {
    /// Wraps raw probabilities, checking nonnegativity and normalization.
    pub fn from_parts(probs: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if probs.is_empty() {
            return domain("pmf needs at least one support point");
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return domain("pmf entries must be finite and nonnegative");
        }
        if !tail_mass.is_finite() || tail_mass < 0.0 {
            return domain(format!("tail mass must be finite and >= 0, got {tail_mass}"));
        }
        let total: f64 = probs.iter().sum::<f64>() + tail_mass;
        if (total - 1.0).abs() > 1e-9 {
            return domain(format!("pmf mass sums to {total}, expected 1"));
        }
        Ok(Self { probs, tail_mass })
    }

    /// Point mass at count `n`.
    pub fn delta(n: usize) -> Self {
        let mut probs = vec![0.0; n + 1];
        probs[n] = 1.0;
        Self {
            probs,
            tail_mass: 0.0,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Number of represented counts, `N_max + 1`.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability of count `n`; zero beyond the represented support.
    pub fn get(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    /// Mean over the represented support.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum()
    }

    /// Total-variation distance, counting both tails as disagreeing mass.
    pub fn total_variation(&self, other: &Pmf1D) -> f64 {
        let len = self.len().max(other.len());
        let body: f64 = (0..len).map(|n| (self.get(n) - other.get(n)).abs()).sum();
        0.5 * (body + self.tail_mass + other.tail_mass)
    }

    /// Largest entrywise difference over the union of supports.
    pub fn max_abs_diff(&self, other: &Pmf1D) -> f64 {
        let len = self.len().max(other.len());
        (0..len)
            .map(|n| (self.get(n) - other.get(n)).abs())
            .fold(0.0, f64::max)
    }

    /// Moves trailing entries into the tail while their mass stays within
    /// `budget`. Returns the leaked mass.
    fn retruncate(&mut self, budget: f64) -> f64 {
        let mut leaked = 0.0;
        while self.probs.len() > 1 {
            let last = *self.probs.last().unwrap();
            if leaked + last > budget {
                break;
            }
            leaked += last;
            self.probs.pop();
        }
        self.tail_mass += leaked;
        leaked
    }
}

/// Joint pmf over (signal count, idler count), row-major in the signal count.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf2D {
    probs: Vec<f64>,
    n_signal: usize,
    n_idler: usize,
    tail_mass: f64,
}

impl Pmf2D {
    pub fn from_parts(probs: Vec<f64>, n_signal: usize, n_idler: usize, tail_mass: f64) -> Result<Self> {
        if n_signal == 0 || n_idler == 0 || probs.len() != n_signal * n_idler {
            return domain(format!(
                "joint pmf shape {n_signal}x{n_idler} does not match {} entries",
                probs.len()
            ));
        }
        // Reuse the 1D checks on the flattened view.
        Pmf1D::from_parts(probs.clone(), tail_mass)?;
        Ok(Self {
            probs,
            n_signal,
            n_idler,
            tail_mass,
        })
    }

    /// Independent product of a signal pmf and an idler pmf.
    pub fn product(signal: &Pmf1D, idler: &Pmf1D) -> Self {
        let mut probs = Vec::with_capacity(signal.len() * idler.len());
        for &ps in &signal.probs {
            probs.extend(idler.probs.iter().map(|pi| ps * pi));
        }
        Self {
            probs,
            n_signal: signal.len(),
            n_idler: idler.len(),
            tail_mass: combine_tails(signal.tail_mass, idler.tail_mass),
        }
    }

    /// `(signal, idler)` support sizes.
    pub fn dims(&self) -> (usize, usize) {
        (self.n_signal, self.n_idler)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn get(&self, signal: usize, idler: usize) -> f64 {
        if signal < self.n_signal && idler < self.n_idler {
            self.probs[signal * self.n_idler + idler]
        } else {
            0.0
        }
    }

    pub fn marginal_signal(&self) -> Pmf1D {
        let probs = self
            .probs
            .chunks(self.n_idler)
            .map(|row| row.iter().sum())
            .collect();
        Pmf1D {
            probs,
            tail_mass: self.tail_mass,
        }
    }

    pub fn marginal_idler(&self) -> Pmf1D {
        let mut probs = vec![0.0; self.n_idler];
        for row in self.probs.chunks(self.n_idler) {
            for (acc, p) in probs.iter_mut().zip(row) {
                *acc += p;
            }
        }
        Pmf1D {
            probs,
            tail_mass: self.tail_mass,
        }
    }

    /// Flattens to a pmf over the enumerated cells `signal * n_idler + idler`.
    pub fn flatten(&self) -> Pmf1D {
        Pmf1D {
            probs: self.probs.clone(),
            tail_mass: self.tail_mass,
        }
    }

    /// Distribution of the componentwise sum of two independent pairs.
    pub fn convolve(&self, other: &Pmf2D) -> Pmf2D {
        let ns = self.n_signal + other.n_signal - 1;
        let ni = self.n_idler + other.n_idler - 1;
        let mut probs = vec![0.0; ns * ni];
        for s1 in 0..self.n_signal {
            for i1 in 0..self.n_idler {
                let a = self.probs[s1 * self.n_idler + i1];
                if a == 0.0 {
                    continue;
                }
                for s2 in 0..other.n_signal {
                    let base = (s1 + s2) * ni + i1;
                    let row = &other.probs[s2 * other.n_idler..(s2 + 1) * other.n_idler];
                    for (i2, b) in row.iter().enumerate() {
                        probs[base + i2] += a * b;
                    }
                }
            }
        }
        Pmf2D {
            probs,
            n_signal: ns,
            n_idler: ni,
            tail_mass: combine_tails(self.tail_mass, other.tail_mass),
        }
    }

    /// Convolves the signal axis with an independent count, e.g. background.
    pub fn convolve_signal(&self, noise: &Pmf1D) -> Pmf2D {
        let ns = self.n_signal + noise.len() - 1;
        let mut probs = vec![0.0; ns * self.n_idler];
        for (s, row) in self.probs.chunks(self.n_idler).enumerate() {
            for (j, pn) in noise.probs.iter().enumerate() {
                let out = &mut probs[(s + j) * self.n_idler..(s + j + 1) * self.n_idler];
                for (o, p) in out.iter_mut().zip(row) {
                    *o += p * pn;
                }
            }
        }
        Pmf2D {
            probs,
            n_signal: ns,
            n_idler: self.n_idler,
            tail_mass: combine_tails(self.tail_mass, noise.tail_mass),
        }
    }

    /// `copies`-fold iid sum by repeated squaring, re-truncating each step.
    pub fn iid_power(&self, copies: u64, eps_tail: f64) -> Result<Pmf2D> {
        check_eps(eps_tail)?;
        if copies == 0 {
            return domain("iid_power needs at least one copy");
        }
        let budget = step_budget(copies, eps_tail);
        repeated_squaring(self.clone(), copies, |a, b| {
            let mut c = a.convolve(b);
            c.retruncate(budget);
            c
        })
    }

    fn retruncate(&mut self, budget: f64) {
        let mut leaked = 0.0;
        loop {
            let row: f64 = if self.n_signal > 1 {
                self.probs[(self.n_signal - 1) * self.n_idler..].iter().sum()
            } else {
                f64::INFINITY
            };
            let col: f64 = if self.n_idler > 1 {
                self.probs.iter().skip(self.n_idler - 1).step_by(self.n_idler).sum()
            } else {
                f64::INFINITY
            };
            let drop_row = row <= col;
            let mass = row.min(col);
            if !mass.is_finite() || leaked + mass > budget {
                break;
            }
            leaked += mass;
            if drop_row {
                self.n_signal -= 1;
                self.probs.truncate(self.n_signal * self.n_idler);
            } else {
                let ni = self.n_idler;
                self.probs = self
                    .probs
                    .chunks(ni)
                    .flat_map(|r| r[..ni - 1].iter().copied())
                    .collect();
                self.n_idler -= 1;
            }
        }
        self.tail_mass += leaked;
    }
}

/// Target, environment and detector parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Target reflectance.
    pub kappa: f64,
    /// Alice's collection efficiency.
    pub eta_a: f64,
    /// Eve's collection efficiency.
    pub eta_e: f64,
    /// Mean background photons per mode-group.
    pub mu_b: f64,
    /// Number of ranging slots.
    pub m_slots: usize,
}

impl ChannelParams {
    pub fn new(kappa: f64, eta_a: f64, eta_e: f64, mu_b: f64, m_slots: usize) -> Result<Self> {
        let ch = Self {
            kappa,
            eta_a,
            eta_e,
            mu_b,
            m_slots,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kappa", self.kappa), ("eta_A", self.eta_a), ("eta_E", self.eta_e)] {
            if !(0.0..=1.0).contains(&v) {
                return domain(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !self.mu_b.is_finite() || self.mu_b < 0.0 {
            return domain(format!("mu_B must be finite and >= 0, got {}", self.mu_b));
        }
        if self.m_slots < 2 {
            return domain(format!("m_slots must be >= 2, got {}", self.m_slots));
        }
        Ok(())
    }

    /// Transmittance from probe to Alice's detector, `kappa * eta_A`.
    pub fn alice_transmittance(&self) -> f64 {
        self.kappa * self.eta_a
    }

    /// Transmittance from probe to Eve's detector, `(1 - kappa) * eta_E`.
    pub fn eve_transmittance(&self) -> f64 {
        (1.0 - self.kappa) * self.eta_e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeFamily {
    /// Phase-randomized coherent state.
    Coherent,
    /// `copies` two-mode squeezed vacua sharing the energy equally.
    Tmsv { copies: u64 },
}

impl ProbeFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ProbeFamily::Coherent => "coherent",
            ProbeFamily::Tmsv { .. } => "tmsv",
        }
    }

    pub fn with_mu(self, mu: f64) -> ProbeSpec {
        ProbeSpec { family: self, mu }
    }
}

/// A probe family together with its total mean signal photon number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSpec {
    pub family: ProbeFamily,
    pub mu: f64,
}

impl ProbeSpec {
    pub fn coherent(mu: f64) -> Self {
        Self {
            family: ProbeFamily::Coherent,
            mu,
        }
    }

    pub fn tmsv(copies: u64, mu: f64) -> Self {
        Self {
            family: ProbeFamily::Tmsv { copies },
            mu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() || self.mu < 0.0 {
            return domain(format!("probe mean must be finite and >= 0, got {}", self.mu));
        }
        if let ProbeFamily::Tmsv { copies } = self.family {
            if copies == 0 {
                return domain("TMSV probe needs at least one copy");
            }
        }
        Ok(())
    }

    /// Mean photons per TMSV copy; the full mean for a coherent probe.
    pub fn per_copy_mean(&self) -> f64 {
        match self.family {
            ProbeFamily::Coherent => self.mu,
            ProbeFamily::Tmsv { copies } => self.mu / copies as f64,
        }
    }
}

fn check_eps(eps_tail: f64) -> Result<()> {
    if !(eps_tail > 0.0 && eps_tail < 1e-3) {
        return domain(format!("eps_tail must lie in (0, 1e-3), got {eps_tail}"));
    }
    Ok(())
}

fn check_mean(what: &str, mean: f64) -> Result<()> {
    if !mean.is_finite() || mean < 0.0 {
        return domain(format!("{what} mean must be finite and >= 0, got {mean}"));
    }
    Ok(())
}

fn check_unit(what: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return domain(format!("{what} must lie in [0, 1], got {v}"));
    }
    Ok(())
}

fn combine_tails(a: f64, b: f64) -> f64 {
    a + b - a * b
}

/// Builds a pmf from the mode outwards using `ratio(n) = p(n+1) / p(n)`.
///
/// The right side is extended until the cumulative mass leaves less than
/// `eps_tail`, the support has passed the mode and it holds `min_len` cells.
fn from_ratios(
    what: &str,
    mode: usize,
    log_p_mode: f64,
    ratio: impl Fn(usize) -> f64,
    eps_tail: f64,
    min_len: usize,
) -> Result<Pmf1D> {
    let truncation = || Error::Truncation {
        what: what.to_string(),
        ceiling: MAX_SUPPORT,
        eps_tail,
    };
    if mode >= MAX_SUPPORT {
        return Err(truncation());
    }
    let mut probs = vec![0.0; mode + 1];
    probs[mode] = log_p_mode.exp();
    for n in (0..mode).rev() {
        probs[n] = probs[n + 1] / ratio(n);
    }
    let mut cum: f64 = probs.iter().sum();
    let mut n = mode;
    while 1.0 - cum >= eps_tail || probs.len() < min_len {
        if probs.len() >= MAX_SUPPORT {
            return Err(truncation());
        }
        let next = probs[n] * ratio(n);
        probs.push(next);
        cum += next;
        n += 1;
    }
    Ok(Pmf1D {
        probs,
        tail_mass: (1.0 - cum).max(0.0),
    })
}

/// Poisson pmf with the given mean.
pub fn poisson_pmf(mean: f64, eps_tail: f64) -> Result<Pmf1D> {
    poisson_pmf_padded(mean, eps_tail, 0)
}

/// Poisson pmf kept on at least `min_len` counts even once the tail is below
/// `eps_tail`.
pub fn poisson_pmf_padded(mean: f64, eps_tail: f64, min_len: usize) -> Result<Pmf1D> {
    check_mean("Poisson", mean)?;
    check_eps(eps_tail)?;
    if mean == 0.0 {
        return Ok(Pmf1D::delta(0));
    }
    let ratio = |n: usize| mean / (n + 1) as f64;
    if -mean > LOG_UNDERFLOW {
        from_ratios("poisson", 0, -mean, ratio, eps_tail, min_len)
    } else {
        let mode = mean.floor();
        let log_p = mode * mean.ln() - mean - ln_gamma(mode + 1.0);
        from_ratios("poisson", mode as usize, log_p, ratio, eps_tail, min_len)
    }
}

/// Two Poisson pmfs on a common support, the longer of their natural
/// truncations.
///
/// Past the shorter support the two laws can still differ by a lot when the
/// means are far apart, so comparing them there needs actual values rather
/// than a pooled tail.
pub fn poisson_pair(mean_a: f64, mean_b: f64, eps_tail: f64) -> Result<(Pmf1D, Pmf1D)> {
    let a = poisson_pmf(mean_a, eps_tail)?;
    let b = poisson_pmf(mean_b, eps_tail)?;
    let len = a.len().max(b.len());
    Ok((
        poisson_pmf_padded(mean_a, eps_tail, len)?,
        poisson_pmf_padded(mean_b, eps_tail, len)?,
    ))
}

/// Thermal (geometric) pmf `mean^n / (1 + mean)^(n + 1)`.
pub fn thermal_pmf(mean: f64, eps_tail: f64) -> Result<Pmf1D> {
    check_mean("thermal", mean)?;
    check_eps(eps_tail)?;
    if mean == 0.0 {
        return Ok(Pmf1D::delta(0));
    }
    let q = mean / (1.0 + mean);
    from_ratios("thermal", 0, -mean.ln_1p(), |_| q, eps_tail, 0)
}

/// Counts of `copies` independent thermal modes sharing `total_mean`
/// (negative binomial with `copies` as the shape parameter).
pub fn multithermal_pmf(copies: u64, total_mean: f64, eps_tail: f64) -> Result<Pmf1D> {
    if copies == 0 {
        return domain("multithermal pmf needs at least one copy");
    }
    check_mean("multithermal", total_mean)?;
    check_eps(eps_tail)?;
    if total_mean == 0.0 {
        return Ok(Pmf1D::delta(0));
    }
    let r = copies as f64;
    let per_copy = total_mean / r;
    let q = per_copy / (1.0 + per_copy);
    let log_one_minus_q = -per_copy.ln_1p();
    let ratio = |n: usize| (n as f64 + r) / (n as f64 + 1.0) * q;
    let log_p0 = r * log_one_minus_q;
    if log_p0 > LOG_UNDERFLOW {
        from_ratios("multithermal", 0, log_p0, ratio, eps_tail, 0)
    } else {
        let mode = ((r - 1.0) * per_copy).floor();
        let log_p = ln_gamma(mode + r) - ln_gamma(r) - ln_gamma(mode + 1.0)
            + mode * q.ln()
            + r * log_one_minus_q;
        from_ratios("multithermal", mode as usize, log_p, ratio, eps_tail, 0)
    }
}

/// `Binomial(n, tau)` probabilities for `k = 0..=n`.
pub(crate) fn binomial_row(n: usize, tau: f64) -> Vec<f64> {
    let mut row = vec![0.0; n + 1];
    if tau == 0.0 {
        row[0] = 1.0;
        return row;
    }
    if tau == 1.0 {
        row[n] = 1.0;
        return row;
    }
    let odds = tau / (1.0 - tau);
    let nf = n as f64;
    let log_p0 = nf * (-tau).ln_1p();
    let (mode, log_p_mode) = if log_p0 > LOG_UNDERFLOW {
        (0, log_p0)
    } else {
        let mode = ((nf + 1.0) * tau).floor().min(nf);
        let log_p = ln_gamma(nf + 1.0) - ln_gamma(mode + 1.0) - ln_gamma(nf - mode + 1.0)
            + mode * tau.ln()
            + (nf - mode) * (-tau).ln_1p();
        (mode as usize, log_p)
    };
    row[mode] = log_p_mode.exp();
    for k in (0..mode).rev() {
        row[k] = row[k + 1] * (k + 1) as f64 / ((n - k) as f64 * odds);
    }
    for k in mode..n {
        row[k + 1] = row[k] * (n - k) as f64 / (k + 1) as f64 * odds;
    }
    row
}

/// Binomial thinning: the count law after a pure-loss channel of
/// transmittance `tau`.
pub fn thin(p: &Pmf1D, tau: f64) -> Result<Pmf1D> {
    check_unit("transmittance", tau)?;
    if tau == 1.0 {
        return Ok(p.clone());
    }
    let mut probs = vec![0.0; p.len()];
    for (n, &pn) in p.probs.iter().enumerate() {
        if pn == 0.0 {
            continue;
        }
        for (k, b) in binomial_row(n, tau).into_iter().enumerate() {
            probs[k] += pn * b;
        }
    }
    Ok(Pmf1D {
        probs,
        tail_mass: p.tail_mass,
    })
}

fn convolve_direct(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (o, y) in out[i..].iter_mut().zip(b) {
            *o += x * y;
        }
    }
    out
}

fn convolve_spectral(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |v: &[f64]| {
        let mut buf: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
        buf.resize(n, Complex::new(0.0, 0.0));
        buf
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa[..out_len].iter().map(|c| (c.re * scale).max(0.0)).collect()
}

/// Distribution of the sum of two independent counts.
pub fn convolve(p: &Pmf1D, q: &Pmf1D) -> Pmf1D {
    let probs = if p.len() < SPECTRAL_THRESHOLD && q.len() < SPECTRAL_THRESHOLD {
        convolve_direct(&p.probs, &q.probs)
    } else {
        convolve_spectral(&p.probs, &q.probs)
    };
    Pmf1D {
        probs,
        tail_mass: combine_tails(p.tail_mass, q.tail_mass),
    }
}

fn step_budget(copies: u64, eps_tail: f64) -> f64 {
    let log2 = 64 - (copies - 1).leading_zeros();
    eps_tail / (2 * log2.max(1)) as f64
}

fn repeated_squaring<T: Clone>(base: T, copies: u64, mut combine: impl FnMut(&T, &T) -> T) -> Result<T> {
    let mut acc: Option<T> = None;
    let mut base = base;
    let mut r = copies;
    while r > 0 {
        if r & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => combine(&a, &base),
            });
        }
        r >>= 1;
        if r > 0 {
            base = combine(&base, &base);
        }
    }
    Ok(acc.expect("copies >= 1"))
}

/// `copies`-fold iid sum by repeated squaring. Each convolution step may leak
/// at most `eps_tail / (2 ceil(log2 copies))` into the tail, so re-truncation
/// adds less than `eps_tail` overall; tails already present in `p` are carried.
pub fn iid_power(p: &Pmf1D, copies: u64, eps_tail: f64) -> Result<Pmf1D> {
    check_eps(eps_tail)?;
    if copies == 0 {
        return domain("iid_power needs at least one copy");
    }
    let budget = step_budget(copies, eps_tail);
    repeated_squaring(p.clone(), copies, |a, b| {
        let mut c = convolve(a, b);
        c.retruncate(budget);
        c
    })
}

/// Joint (signal, idler) counts of `copies` TMSV pairs with total mean `mu`
/// after the signal crosses a loss `tau` and mixes with Poisson background.
///
/// The idler arm is kept noiseless. Because photon numbers are perfectly
/// correlated, the idler total `n` is negative-binomial and the surviving
/// signal given `n` is `Binomial(n, tau)`.
pub fn tmsv_joint(copies: u64, mu: f64, tau: f64, mu_b: f64, eps_tail: f64) -> Result<Pmf2D> {
    if copies == 0 {
        return domain("TMSV probe needs at least one copy");
    }
    check_mean("TMSV", mu)?;
    check_unit("transmittance", tau)?;
    check_mean("background", mu_b)?;
    check_eps(eps_tail)?;
    let idler = multithermal_pmf(copies, mu, eps_tail / 2.0)?;
    let background = poisson_pmf(mu_b, eps_tail / 2.0)?;
    let ni = idler.len();
    let mut probs = vec![0.0; ni * ni];
    for (n, &pn) in idler.probs.iter().enumerate() {
        for (k, b) in binomial_row(n, tau).into_iter().enumerate() {
            probs[k * ni + n] = pn * b;
        }
    }
    let clean = Pmf2D {
        probs,
        n_signal: ni,
        n_idler: ni,
        tail_mass: idler.tail_mass,
    };
    Ok(clean.convolve_signal(&background))
}

/// Single-copy TMSV joint before background: idler thermal, signal thinned.
pub fn tmsv_single_copy(per_copy_mean: f64, tau: f64, eps_tail: f64) -> Result<Pmf2D> {
    check_unit("transmittance", tau)?;
    let idler = thermal_pmf(per_copy_mean, eps_tail)?;
    let ni = idler.len();
    let mut probs = vec![0.0; ni * ni];
    for (n, &pn) in idler.probs.iter().enumerate() {
        for (k, b) in binomial_row(n, tau).into_iter().enumerate() {
            probs[k * ni + n] = pn * b;
        }
    }
    Ok(Pmf2D {
        probs,
        n_signal: ni,
        n_idler: ni,
        tail_mass: idler.tail_mass,
    })
}

/// Count law at the receiver for a coherent probe: Poisson with mean
/// `tau * mu + mu_b`.
pub fn coherent_return_pmf(mu: f64, tau: f64, mu_b: f64, eps_tail: f64) -> Result<Pmf1D> {
    check_mean("coherent", mu)?;
    check_unit("transmittance", tau)?;
    check_mean("background", mu_b)?;
    poisson_pmf(tau * mu + mu_b, eps_tail)
}
