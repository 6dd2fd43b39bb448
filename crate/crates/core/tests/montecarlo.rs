use covsense::montecarlo::{empirical_error, McConfig, Party};
use covsense::photon_stats::{ChannelParams, ProbeSpec};

fn channel() -> ChannelParams {
    ChannelParams::new(0.5, 1.0, 1.0, 1.0, 2).unwrap()
}

#[test]
fn dark_probe_leaves_eve_guessing() {
    let mut cfg = McConfig::new(channel(), ProbeSpec::coherent(0.0), 20_000, vec![1, 5, 20], 11);
    cfg.parties = vec![Party::Eve];
    let res = empirical_error(&cfg).unwrap();
    for e in &res.party(Party::Eve).unwrap().estimates {
        assert!((e.p_hat - 0.5).abs() < 3.0 * e.std_err.max(0.5 / (e.trials as f64).sqrt()), "{e:?}");
    }
}

#[test]
fn binary_error_never_worse_than_guessing() {
    for probe in [ProbeSpec::coherent(0.3), ProbeSpec::tmsv(100, 0.3)] {
        let mut cfg = McConfig::new(channel(), probe, 20_000, vec![1, 2, 4, 8], 5);
        cfg.parties = vec![Party::Eve];
        let res = empirical_error(&cfg).unwrap();
        for e in &res.party(Party::Eve).unwrap().estimates {
            assert!(e.p_hat <= 0.5 + 3.0 * e.std_err, "{e:?}");
        }
    }
}

#[test]
fn standard_errors_are_binomial() {
    let cfg = McConfig::new(channel(), ProbeSpec::coherent(2.0), 5_000, vec![2, 4, 8], 3);
    let res = empirical_error(&cfg).unwrap();
    for party in &res.parties {
        for e in &party.estimates {
            assert!((0.0..=1.0).contains(&e.p_hat));
            assert_eq!(e.p_hat, e.errors as f64 / e.trials as f64);
            assert_eq!(e.std_err, (e.p_hat * (1.0 - e.p_hat) / e.trials as f64).sqrt());
        }
    }
}

#[test]
fn same_seed_same_result_under_any_schedule() {
    let cfg = McConfig::new(channel(), ProbeSpec::tmsv(1000, 2.0), 4_000, vec![2, 6, 10, 14], 99);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| empirical_error(&cfg).unwrap())
    };
    let reference = run(1);
    assert_eq!(reference, run(4));
    assert_eq!(reference, run(7));

    let mut other = cfg.clone();
    other.seed = 100;
    let counts = |r: &covsense::montecarlo::McResult| -> Vec<u64> {
        r.parties.iter().flat_map(|p| p.estimates.iter().map(|e| e.errors)).collect()
    };
    assert_ne!(counts(&reference), counts(&empirical_error(&other).unwrap()));
}
