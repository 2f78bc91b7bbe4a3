//! Long randomized runs, ignored by default:
//! `cargo test -p nfg-core --release --test stress -- --ignored`

use std::collections::BTreeSet;

use nfg_core::duality::verify_duality;
use nfg_core::generate::{
    self, group_alphabet_pool, random_assembly, random_assignment, random_marked_graph,
    random_nfg, random_planar_graph, random_transformer, NfgParams,
};
use nfg_core::holo::verify_holant;
use nfg_core::nfg::EdgeRef;
use nfg_core::perfmatch::{fkt_perfmatch, perfmatch_brute, verify_decomposition};
use nfg_core::rewrite::{
    dual_vertex_delete, dual_vertex_insert, equality_delete, equality_insert, vertex_group,
    verify_preserved,
};
use nfg_core::{max_deviation, C64};

#[test]
#[ignore = "long fuzz run"]
fn exhaustive_random_sweep() {
    let mut rng = generate::rng(777);
    let mixed = NfgParams::default();
    let grouped = NfgParams {
        alphabets: group_alphabet_pool(),
        max_internal_edges: 6,
        ..NfgParams::default()
    };

    for k in 0..1000 {
        let n = random_nfg(&mut rng, &mixed);
        let brute = n.exterior_brute().unwrap();
        let elim = n.exterior().unwrap();
        assert!(
            max_deviation(brute.values(), elim.values()) < 1e-9,
            "eval mismatch at case {k}"
        );

        let a = random_assignment(&mut rng, &n, 1e3);
        let rep = verify_holant(&n, &a).unwrap();
        assert!(rep.max_deviation < 1e-8, "holant case {k}: {}", rep.max_deviation);
    }

    for k in 0..500 {
        let n = random_nfg(&mut rng, &grouped);
        let rep = verify_duality(&n).unwrap();
        assert!(rep.max_deviation < 1e-8, "duality case {k}: {}", rep.max_deviation);
    }

    use rand::Rng;
    for k in 0..500 {
        let n = random_nfg(&mut rng, &mixed);
        let members: BTreeSet<String> = n
            .vertices()
            .keys()
            .filter(|_| rng.gen_bool(0.5))
            .cloned()
            .collect();
        if !members.is_empty() && members.len() < n.vertices().len() {
            let grouped_nfg = vertex_group(&n, &members, "grouped").unwrap();
            let rep = verify_preserved(&n, &grouped_nfg).unwrap();
            assert!(rep.max_deviation < 1e-9, "group case {k}");
        }

        let n_edges = n.internal_edges().len() + n.dangling().len();
        let pick = rng.gen_range(0..n_edges);
        let edge = if pick < n.internal_edges().len() {
            EdgeRef::Internal(pick)
        } else {
            EdgeRef::Dangling(pick - n.internal_edges().len())
        };
        let (inserted, eq_id) = equality_insert(&n, edge).unwrap();
        let back = equality_delete(&inserted, &eq_id).unwrap();
        assert!(verify_preserved(&n, &back).unwrap().max_deviation < 1e-9);

        let alphabet = n.edge_alphabet(edge).unwrap().clone();
        let t = random_transformer(&mut rng, &alphabet, 1e3);
        let (spliced, p, q) = dual_vertex_insert(
            &n,
            edge,
            &t.as_local_function(),
            &t.invert().as_local_function(),
        )
        .unwrap();
        assert!(verify_preserved(&n, &spliced).unwrap().max_deviation < 1e-9);
        let removed = dual_vertex_delete(&spliced, &p, &q).unwrap();
        assert!(verify_preserved(&n, &removed).unwrap().max_deviation < 1e-9);
    }

    for k in 0..500 {
        let (h, emb) = random_planar_graph(&mut rng, 12);
        let brute = perfmatch_brute(&h).unwrap();
        let fast = fkt_perfmatch(&h, &emb).unwrap();
        let scale = brute.norm().max(1.0);
        assert!(
            (brute - fast).norm() <= 1e-8 * scale,
            "fkt case {k}: {brute} vs {fast}"
        );
    }

    for k in 0..300 {
        let (gates, connections) = random_assembly(&mut rng, 4, 6, 3);
        let rep = verify_decomposition(&gates, &connections).unwrap();
        assert!(rep.max_deviation < 1e-9, "assembly case {k}");
    }

    for k in 0..300 {
        let m = random_marked_graph(&mut rng, 4, 6);
        let n = m.normalize().unwrap();
        let direct = m.eval_direct().unwrap();
        let z = n.exterior().unwrap();
        assert!(
            max_deviation(direct.values(), z.values()) < 1e-9,
            "normalize case {k}"
        );
    }

    // double dualization scale on a separate stream
    let mut rng2 = generate::rng(778);
    for k in 0..200 {
        let n = random_nfg(&mut rng2, &grouped);
        let x_int = nfg_core::duality::internal_space_size(&n).unwrap();
        let x_ext: f64 = n.exterior_ports().iter().map(|a| a.size() as f64).product();
        let dd = nfg_core::duality::dualize(&nfg_core::duality::dualize(&n).unwrap()).unwrap();
        let z_dd = dd.exterior().unwrap();
        let z = n.exterior().unwrap();
        let mut negated = z.clone();
        for (axis, alphabet) in z.ports().iter().enumerate() {
            let g = alphabet.group().unwrap();
            let size = g.size();
            let mut kernel = vec![C64::new(0.0, 0.0); size * size];
            for i in 0..size {
                kernel[i * size + g.neg_index(i)] = C64::new(1.0, 0.0);
            }
            negated = negated.axis_transform(axis, &kernel, alphabet.clone()).unwrap();
        }
        let predicted = negated.scaled(C64::new(x_int.powi(3) * x_ext, 0.0));
        assert!(
            max_deviation(z_dd.values(), predicted.values()) < 1e-8,
            "double dual case {k}"
        );
    }
}
