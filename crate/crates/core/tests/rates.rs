use covsense::bottleneck::{covert_information, SolverConfig, DEFAULT_MU_BRACKET};
use covsense::chernoff::{bhattacharyya, chernoff, poisson_chernoff_closed, DEFAULT_ALPHA_TOL};
use covsense::photon_stats::{poisson_pair, ChannelParams, ProbeFamily, ProbeSpec, DEFAULT_EPS_TAIL};
use covsense::sensing::{alice_rate, alice_rate_coherent_closed, eve_rate, eve_rate_approx, RateConfig};

// Frozen 50-digit references.
const B_10_10P2: f64 = 4.950_616_379_220_431e-4;
const C_10_10P8: f64 = 7.695_471_085_280_816e-3;
const ALPHA_10_10P8: f64 = 0.496_793_448_215_695_26;

fn reference_channel() -> ChannelParams {
    ChannelParams::new(0.2, 1.0, 1.0, 10.0, 2).unwrap()
}

#[test]
fn poisson_references() {
    let (p, q) = poisson_pair(10.0, 10.2, DEFAULT_EPS_TAIL).unwrap();
    assert!((bhattacharyya(&p, &q) / B_10_10P2 - 1.0).abs() < 1e-9);
    let (p, q) = poisson_pair(10.0, 10.8, DEFAULT_EPS_TAIL).unwrap();
    let r = chernoff(&p, &q, DEFAULT_ALPHA_TOL).unwrap();
    assert!((r.rate / C_10_10P8 - 1.0).abs() < 1e-9);
    assert!((r.alpha_star - ALPHA_10_10P8).abs() < 1e-4);
    let closed = poisson_chernoff_closed(10.0, 10.8).unwrap();
    assert!((closed.rate / C_10_10P8 - 1.0).abs() < 1e-14);
}

#[test]
fn coherent_rates_against_closed_forms() {
    let cfg = RateConfig::default();
    for mu in [1e-3, 0.1, 1.0, 10.0] {
        let probe = ProbeSpec::coherent(mu);
        let xa = alice_rate(&reference_channel(), &probe, &cfg).unwrap();
        let closed = alice_rate_coherent_closed(&reference_channel(), mu);
        assert!((xa / closed - 1.0).abs() < 1e-8, "mu={mu}");
        let xe = eve_rate(&reference_channel(), &probe, &cfg).unwrap();
        let exact = poisson_chernoff_closed(10.0, 10.0 + reference_channel().eve_transmittance() * mu).unwrap().rate;
        assert!((xe / exact - 1.0).abs() < 1e-8, "mu={mu}");
    }
}

#[test]
fn eve_anchor_for_faint_probe() {
    let xe = eve_rate(&reference_channel(), &ProbeSpec::coherent(1e-3), &RateConfig::default()).unwrap();
    assert!((xe / 7.999_680_016_354_617e-9 - 1.0).abs() < 1e-8);
    assert!((eve_rate_approx(&reference_channel(), 1e-3) / xe - 1.0).abs() < 1e-3);
}

#[test]
fn covert_information_meets_its_constraint() {
    let cfg = SolverConfig::default();
    for family in [ProbeFamily::Coherent, ProbeFamily::Tmsv { copies: 1000 }] {
        let r = covert_information(&reference_channel(), family, 1e-8, DEFAULT_MU_BRACKET, &cfg).unwrap();
        assert!(r.converged);
        assert!((r.xi_e / r.d - 1.0).abs() < 1e-6);
        let again = alice_rate(&reference_channel(), &family.with_mu(r.mu_star), &cfg.rates).unwrap();
        assert_eq!(again, r.i_c);
    }
}
