//! File-format round trips on generated instances.

use nfg_core::duality::dualize;
use nfg_core::generate::{self, group_alphabet_pool, random_nfg, NfgParams};
use nfg_core::io::{nfg_to_json, parse_nfg};
use nfg_core::max_deviation;

#[test]
fn random_nfgs_round_trip_through_json() {
    let mut rng = generate::rng(4242);
    let params = NfgParams::default();
    for _ in 0..25 {
        let n = random_nfg(&mut rng, &params);
        let json = nfg_to_json(&n);
        let back = parse_nfg(&json).expect("serialized NFGs parse");
        assert_eq!(n, back);
        assert_eq!(json, nfg_to_json(&back));
    }
}

#[test]
fn dualized_nfgs_serialize_and_evaluate() {
    let mut rng = generate::rng(4343);
    let params = NfgParams {
        alphabets: group_alphabet_pool(),
        ..NfgParams::default()
    };
    for _ in 0..10 {
        let n = random_nfg(&mut rng, &params);
        let dual = dualize(&n).unwrap();
        let back = parse_nfg(&nfg_to_json(&dual)).unwrap();
        let a = dual.exterior().unwrap();
        let b = back.exterior().unwrap();
        assert_eq!(a.ports(), b.ports());
        assert!(max_deviation(a.values(), b.values()) < 1e-12);
    }
}
