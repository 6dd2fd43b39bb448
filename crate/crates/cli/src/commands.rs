//! The five subcommands, each producing a [`Table`].

use rayon::prelude::*;

use covsense::bottleneck::{covert_information, lagrangian_sweep, tradeoff_curve};
use covsense::montecarlo::{empirical_error, McConfig, Party};
use covsense::photon_stats::{ProbeFamily, ProbeSpec};
use covsense::sensing::{alice_rate, asymptotic_rates, delta_xi, eve_rate};

use crate::config::{ConfigError, RunConfig};
use crate::output::{Field, Table};
use crate::CliError;

pub const TRADEOFF_COLUMNS: &[&str] = &["mu", "xi_E", "xi_A", "delta_xi", "xi_A_inf", "xi_E_inf", "family"];
pub const DELTA_XI_COLUMNS: &[&str] = &["mu_B", "family", "mu", "xi_A", "xi_E", "delta_xi", "xi_E_approx"];
pub const PERR_COLUMNS: &[&str] = &["family", "party", "mu", "M", "mu_T", "xi", "p_err"];
pub const COVERT_INFO_COLUMNS: &[&str] =
    &["family", "method", "d", "beta", "i_c", "mu_star", "xi_E_at_star", "converged"];
pub const VALIDATE_COLUMNS: &[&str] = &[
    "party", "family", "M", "trials", "errors", "p_hat", "std_err", "xi_analytic", "xi_hat", "xi_half_width",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Both exponents along the energy grid.
    Tradeoff,
    /// Exponent difference along the energy grid, optionally for several backgrounds.
    DeltaXi,
    /// Asymptotic error probabilities over a grid of mode counts.
    Perr,
    /// Best ranging exponent under a bound on Eve's exponent.
    CovertInfo,
    /// Monte Carlo error rates and fitted exponents.
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Tradeoff => "tradeoff",
            Command::DeltaXi => "delta-xi",
            Command::Perr => "perr",
            Command::CovertInfo => "covert-info",
            Command::Validate => "validate",
        }
    }
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Table, CliError> {
    cfg.validate()?;
    match cmd {
        Command::Tradeoff => tradeoff(cfg),
        Command::DeltaXi => delta_xi_sweep(cfg),
        Command::Perr => perr(cfg),
        Command::CovertInfo => covert_info(cfg),
        Command::Validate => validate(cfg),
    }
}

fn families(cfg: &RunConfig) -> Vec<ProbeFamily> {
    cfg.family.families(cfg.copies)
}

pub fn tradeoff(cfg: &RunConfig) -> Result<Table, CliError> {
    let ch = cfg.channel();
    let grid = cfg.mu_grid.values();
    let mut table = Table::new(TRADEOFF_COLUMNS);
    for family in families(cfg) {
        for p in tradeoff_curve(&ch, family, &grid, &cfg.rates())? {
            let (a_inf, e_inf) = asymptotic_rates(&ch, p.mu);
            table.push(vec![
                p.mu.into(),
                p.xi_e.into(),
                p.xi_a.into(),
                p.delta_xi.into(),
                a_inf.into(),
                e_inf.into(),
                family.name().into(),
            ]);
        }
    }
    Ok(table)
}

pub fn delta_xi_sweep(cfg: &RunConfig) -> Result<Table, CliError> {
    let grid = cfg.mu_grid.values();
    let backgrounds = match cfg.mu_b_sweep.values() {
        v if v.is_empty() => vec![cfg.mu_b],
        v => v,
    };
    let mut table = Table::new(DELTA_XI_COLUMNS);
    for mu_b in backgrounds {
        let ch = covsense::photon_stats::ChannelParams { mu_b, ..cfg.channel() };
        for family in families(cfg) {
            let rows = grid
                .par_iter()
                .map(|&mu| delta_xi(&ch, &family.with_mu(mu), &cfg.rates()))
                .collect::<covsense::Result<Vec<_>>>()?;
            for (mu, r) in grid.iter().zip(rows) {
                table.push(vec![
                    mu_b.into(),
                    family.name().into(),
                    (*mu).into(),
                    r.xi_a.into(),
                    r.xi_e.into(),
                    r.delta_xi.into(),
                    r.xi_e_approx.into(),
                ]);
            }
        }
    }
    Ok(table)
}

/// Mode counts from 1 to 1e6, four per decade.
fn default_perr_modes() -> Vec<u32> {
    let mut out: Vec<u32> = (0..=24).map(|i| 10f64.powf(i as f64 / 4.0).round() as u32).collect();
    out.dedup();
    out
}

pub fn perr(cfg: &RunConfig) -> Result<Table, CliError> {
    let ch = cfg.channel();
    let modes = cfg.explicit_modes()?.unwrap_or_else(default_perr_modes);
    let mut table = Table::new(PERR_COLUMNS);
    for family in families(cfg) {
        let probe = family.with_mu(cfg.mu);
        for party in [Party::Alice, Party::Eve] {
            let xi = party_rate(party, &ch, &probe, cfg)?;
            for &m in &modes {
                let m = m as f64;
                table.push(vec![
                    family.name().into(),
                    party.name().into(),
                    cfg.mu.into(),
                    (m as u64).into(),
                    (m * cfg.mu).into(),
                    xi.into(),
                    (0.5 * (-m * xi).exp()).into(),
                ]);
            }
        }
    }
    Ok(table)
}

fn party_rate(
    party: Party,
    ch: &covsense::photon_stats::ChannelParams,
    probe: &ProbeSpec,
    cfg: &RunConfig,
) -> covsense::Result<f64> {
    match party {
        Party::Alice => alice_rate(ch, probe, &cfg.rates()),
        Party::Eve => eve_rate(ch, probe, &cfg.rates()),
    }
}

pub fn covert_info(cfg: &RunConfig) -> Result<Table, CliError> {
    let ch = cfg.channel();
    let solver = cfg.solver();
    let betas = cfg.beta_grid.values();
    let mut table = Table::new(COVERT_INFO_COLUMNS);
    for family in families(cfg) {
        for d in cfg.d.values() {
            let r = covert_information(&ch, family, d, cfg.bracket(), &solver)?;
            table.push(vec![
                family.name().into(),
                "constraint".into(),
                d.into(),
                Field::Empty,
                r.i_c.into(),
                r.mu_star.into(),
                r.xi_e.into(),
                r.converged.into(),
            ]);
        }
        if betas.is_empty() {
            continue;
        }
        for p in lagrangian_sweep(&ch, family, &betas, cfg.bracket(), &solver)? {
            table.push(vec![
                family.name().into(),
                "lagrangian".into(),
                p.xi_e.into(),
                p.beta.map_or(Field::Empty, Field::Num),
                p.xi_a.into(),
                p.mu.into(),
                p.xi_e.into(),
                (!p.at_bracket_edge).into(),
            ]);
        }
    }
    Ok(table)
}

// Largest mode count the automatic grid may ask for.
const AUTO_MODES_CAP: u32 = 4096;

/// Eight mode counts with `M xi` spread over `[0.5, 5]`.
pub fn auto_modes(xi: f64) -> Result<Vec<u32>, ConfigError> {
    if xi <= 0.0 {
        return Ok((0..8).map(|i| 1u32 << i).collect());
    }
    let lo = (0.5 / xi).ceil().max(1.0);
    let hi = (5.0 / xi).floor().max(lo + 2.0);
    if hi > AUTO_MODES_CAP as f64 {
        return Err(ConfigError {
            key: "M_values".into(),
            msg: format!("exponent {xi:e} would need M up to {hi:e}; give M_values explicitly"),
        });
    }
    let mut out: Vec<u32> = (0..8)
        .map(|i| (lo + (hi - lo) * i as f64 / 7.0).round() as u32)
        .collect();
    out.dedup();
    Ok(out)
}

pub fn validate(cfg: &RunConfig) -> Result<Table, CliError> {
    let ch = cfg.channel();
    let explicit = cfg.explicit_modes()?;
    let mut table = Table::new(VALIDATE_COLUMNS);
    for family in families(cfg) {
        let probe = family.with_mu(cfg.mu);
        for party in [Party::Alice, Party::Eve] {
            let xi = party_rate(party, &ch, &probe, cfg)?;
            let modes = match &explicit {
                Some(m) => m.clone(),
                None => auto_modes(xi)?,
            };
            let mut mc = McConfig::new(ch, probe, cfg.trials, modes, cfg.seed);
            mc.parties = vec![party];
            mc.rates = cfg.rates();
            let res = empirical_error(&mc)?;
            let result = &res.parties[0];
            let (xi_hat, half) = match &result.fit {
                Ok(f) => (Field::Num(f.xi_hat), Field::Num(f.half_width)),
                Err(_) => (Field::Empty, Field::Empty),
            };
            for e in &result.estimates {
                table.push(vec![
                    party.name().into(),
                    family.name().into(),
                    (e.modes as u64).into(),
                    e.trials.into(),
                    e.errors.into(),
                    e.p_hat.into(),
                    e.std_err.into(),
                    xi.into(),
                    xi_hat.clone(),
                    half.clone(),
                ]);
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_modes_span_the_decay_window() {
        let m = auto_modes(0.1).unwrap();
        assert_eq!((m[0], *m.last().unwrap()), (5, 50));
        assert_eq!(m.len(), 8);
        assert_eq!(auto_modes(0.0).unwrap(), vec![1, 2, 4, 8, 16, 32, 64, 128]);
        assert!(auto_modes(10.0).unwrap().len() >= 3);
        assert_eq!(auto_modes(1e-8).unwrap_err().key, "M_values");
    }

    #[test]
    fn perr_mode_grid() {
        let m = default_perr_modes();
        assert_eq!((m[0], *m.last().unwrap()), (1, 1_000_000));
        assert!(m.windows(2).all(|w| w[0] < w[1]));
    }
}
