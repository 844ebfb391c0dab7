//! Property suites for the spec invariants that live across modules:
//! projection preserves separation, edge edits move verdicts monotonically,
//! witnesses revalidate, intrinsic sets re-check independently.

mod common;

use fulllaw::fixing::{intrinsic_sets, Cadmg};
use fulllaw::fixtures;
use fulllaw::graph::{validate, MixedGraph, VertexRole, VertexSet};
use fulllaw::identification::{decide_full_law, find_colluding_paths};
use fulllaw::oracle::{verify_identified, CounterexampleOutcome};
use fulllaw::projection::latent_project;
use fulllaw::separation::is_m_separated;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn projection_preserves_separation_exhaustively() {
    // For graphs with <= 6 vertices, m-separation among kept vertices is the
    // same before and after projecting the rest out.
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..150 {
        let n = rng.gen_range(3..=6);
        let g = common::random_admg(&mut rng, n, 0.3, 0.25);
        let verts: Vec<_> = g.vertices().collect();
        let keep_count = rng.gen_range(2..=n - 1);
        let mut shuffled = verts.clone();
        shuffled.shuffle(&mut rng);
        let keep: VertexSet = shuffled.into_iter().take(keep_count).collect();
        let projected = latent_project(&g, &keep).unwrap();

        let kept: Vec<_> = keep.iter().copied().collect();
        let m = kept.len();
        let mut cat = vec![0usize; m];
        loop {
            let a: VertexSet = (0..m).filter(|&i| cat[i] == 1).map(|i| kept[i]).collect();
            let b: VertexSet = (0..m).filter(|&i| cat[i] == 2).map(|i| kept[i]).collect();
            let z: VertexSet = (0..m).filter(|&i| cat[i] == 3).map(|i| kept[i]).collect();
            if !a.is_empty() && !b.is_empty() {
                let original = is_m_separated(&g, &a, &b, &z).unwrap();
                let pa: VertexSet = a.iter().map(|&v| projected.vertex(g.name(v)).unwrap()).collect();
                let pb: VertexSet = b.iter().map(|&v| projected.vertex(g.name(v)).unwrap()).collect();
                let pz: VertexSet = z.iter().map(|&v| projected.vertex(g.name(v)).unwrap()).collect();
                let after = is_m_separated(&projected, &pa, &pb, &pz).unwrap();
                assert_eq!(original, after, "separation changed under projection");
            }
            let mut k = 0;
            while k < m {
                cat[k] += 1;
                if cat[k] < 4 {
                    break;
                }
                cat[k] = 0;
                k += 1;
            }
            if k == m {
                break;
            }
        }
    }
}

#[test]
fn projection_stage_invariance_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.gen_range(3..=7);
        let g = common::random_admg(&mut rng, n, 0.3, 0.25);
        let verts: Vec<_> = g.vertices().collect();
        let mut shuffled = verts.clone();
        shuffled.shuffle(&mut rng);
        let keep2_size = rng.gen_range(1..n);
        let keep1_size = rng.gen_range(keep2_size..=n);
        let keep1: VertexSet = shuffled.iter().copied().take(keep1_size).collect();
        let keep2: VertexSet = shuffled.iter().copied().take(keep2_size).collect();
        let once = latent_project(&g, &keep2).unwrap();
        let stage1 = latent_project(&g, &keep1).unwrap();
        let keep2_in_stage1: VertexSet = keep2
            .iter()
            .map(|&v| stage1.vertex(g.name(v)).unwrap())
            .collect();
        let staged = latent_project(&stage1, &keep2_in_stage1).unwrap();
        assert_eq!(once, staged, "staged projection differs");
    }
}

/// Legal extra directed/bidirected edges for a missing-data graph.
fn legal_additions(g: &MixedGraph) -> Vec<(usize, usize, bool)> {
    let verts: Vec<_> = g.vertices().collect();
    let order = g.topological_order().expect("fixtures are acyclic");
    let pos = |v| order.iter().position(|&w| w == v).unwrap();
    let mut out = Vec::new();
    for (i, &a) in verts.iter().enumerate() {
        for (j, &b) in verts.iter().enumerate() {
            if i == j {
                continue;
            }
            // Directed a -> b along the topological order keeps acyclicity.
            if pos(a) < pos(b) && !g.has_edge(a, b) {
                let legal = match (g.role(a), g.role(b)) {
                    (VertexRole::MissingnessIndicator(_), VertexRole::MissingnessIndicator(_)) => true,
                    (VertexRole::MissingnessIndicator(_), _) => false,
                    (_, VertexRole::Proxy(_)) => false,
                    (VertexRole::Proxy(_), _) => false,
                    _ => true,
                };
                if legal {
                    out.push((i, j, false));
                }
            }
            if i < j
                && !g.has_biedge(a, b)
                && !g.role(a).is_proxy()
                && !g.role(b).is_proxy()
            {
                out.push((i, j, true));
            }
        }
    }
    out
}

#[test]
fn adding_edges_never_identifies_removing_never_unidentifies() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for trial in 0..300 {
        let g = common::random_missing_data_graph(&mut rng, 3, 1);
        let identified = decide_full_law(&g).is_identified();
        if !identified {
            // Add a random legal edge: the witness path survives, so the graph
            // stays unidentified.
            let adds = legal_additions(g.graph());
            if let Some(&(i, j, bi)) = adds.as_slice().choose(&mut rng) {
                let mut bigger = g.graph().clone();
                let verts: Vec<_> = bigger.vertices().collect();
                if bi {
                    bigger.add_biedge(verts[i], verts[j]).unwrap();
                } else {
                    bigger.add_edge(verts[i], verts[j]).unwrap();
                }
                let bigger = validate(bigger).expect("legal addition stays valid");
                assert!(
                    !decide_full_law(&bigger).is_identified(),
                    "trial {trial}: adding an edge removed a colluding path"
                );
            }
        } else {
            // Remove a random edge: no colluding path can appear.
            let dir_edges: Vec<_> = g.directed_edges().collect();
            let bi_edges: Vec<_> = g.bidirected_edges().collect();
            if dir_edges.is_empty() && bi_edges.is_empty() {
                continue;
            }
            let remove_bi = !bi_edges.is_empty() && (dir_edges.is_empty() || rng.gen_bool(0.5));
            let mut smaller = MixedGraph::new();
            for v in g.vertices() {
                smaller.add_vertex(g.name(v), g.role(v).clone()).unwrap();
            }
            let skip = if remove_bi {
                *bi_edges.as_slice().choose(&mut rng).unwrap()
            } else {
                *dir_edges.as_slice().choose(&mut rng).unwrap()
            };
            for (a, b) in &dir_edges {
                if remove_bi || (*a, *b) != skip {
                    let (na, nb) = (
                        smaller.vertex(g.name(*a)).unwrap(),
                        smaller.vertex(g.name(*b)).unwrap(),
                    );
                    smaller.add_edge(na, nb).unwrap();
                }
            }
            for (a, b) in &bi_edges {
                if !remove_bi || (*a, *b) != skip {
                    let (na, nb) = (
                        smaller.vertex(g.name(*a)).unwrap(),
                        smaller.vertex(g.name(*b)).unwrap(),
                    );
                    smaller.add_biedge(na, nb).unwrap();
                }
            }
            let smaller = validate(smaller).expect("edge removal stays valid");
            assert!(
                decide_full_law(&smaller).is_identified(),
                "trial {trial}: removing an edge created a colluding path"
            );
        }
    }
}

#[test]
fn path_existence_check_agrees_with_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..400 {
        let g = common::random_missing_data_graph(&mut rng, 4, 1);
        for pair in g.pairs() {
            let enumerated = !find_colluding_paths(&g, pair.index).unwrap().is_empty();
            let reachable = fulllaw::identification::has_colluding_path(&g, &pair);
            assert_eq!(enumerated, reachable, "existence check vs enumeration");
        }
    }
}

#[test]
fn witnesses_revalidate_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut witnesses = 0;
    for _ in 0..300 {
        let g = common::random_missing_data_graph(&mut rng, 4, 1);
        for pair in g.pairs() {
            for path in find_colluding_paths(&g, pair.index).unwrap() {
                assert!(path.revalidate(&g), "enumerated path fails revalidation");
                witnesses += 1;
            }
        }
    }
    assert!(witnesses > 100, "generator produced too few colluding paths");
}

#[test]
fn intrinsic_sets_pass_independent_recheck() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..60 {
        let n = rng.gen_range(2..=5);
        let admg = common::random_admg(&mut rng, n, 0.3, 0.35);
        let cadmg = Cadmg::from_admg(admg.clone());
        for intrinsic in intrinsic_sets(&cadmg) {
            // Re-run the recorded sequence from scratch and re-check that the
            // result is a single district equal to the set.
            let reached = cadmg
                .fix_sequence_graph(&intrinsic.sequence)
                .expect("recorded sequence is valid");
            assert_eq!(reached.random(), intrinsic.set);
            let districts = reached.districts();
            assert_eq!(districts.len(), 1);
            assert_eq!(districts[0], intrinsic.set);
            // Head members are childless, tail covers non-head members plus
            // context parents.
            for &h in &intrinsic.head {
                assert!(reached.graph().children(h).next().is_none());
            }
            for v in intrinsic.set.difference(&intrinsic.head) {
                assert!(intrinsic.tail.contains(v));
            }
        }
    }
}

#[test]
fn separation_decomposition_property() {
    // Separation of a union implies separation of each part.
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..300 {
        let n = rng.gen_range(4..=6);
        let g = common::random_admg(&mut rng, n, 0.3, 0.3);
        let verts: Vec<_> = g.vertices().collect();
        let mut shuffled = verts.clone();
        shuffled.shuffle(&mut rng);
        let a: VertexSet = shuffled[0..2].iter().copied().collect();
        let b: VertexSet = [shuffled[2]].into_iter().collect();
        let z: VertexSet = shuffled[3..].iter().copied().collect();
        if is_m_separated(&g, &a, &b, &z).unwrap() {
            for &single in &a {
                let part: VertexSet = [single].into_iter().collect();
                assert!(is_m_separated(&g, &part, &b, &z).unwrap());
            }
        }
    }
}

#[test]
fn identified_graph_yields_no_counterexample() {
    // Consistent with the identification theorem: the null-space search cannot
    // find an observed-law-preserving full-law change for fig1a.
    match fulllaw::oracle::find_counterexample(&fixtures::fig1a(), 0, 10_000) {
        CounterexampleOutcome::BudgetExhausted { directions_tried } => {
            assert!(directions_tried >= 10_000);
        }
        CounterexampleOutcome::Found(pair) => panic!(
            "found a counterexample for an identified graph (distance {})",
            pair.full_law_sup_distance
        ),
    }
}

#[test]
fn verify_identified_smoke_on_admg_fixture() {
    let report = verify_identified(&fixtures::fig2b(), 25, 3, 1e-8).unwrap();
    assert_eq!(report.failures, 0);
    assert!(report.max_full_law_error < 1e-8);
    assert!(!report.recipe_text.is_empty());
}

#[test]
fn elide_commutes_with_validate() {
    // Proxy removal cannot create violations: validating then eliding equals
    // building the elided graph directly and validating it.
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..100 {
        let g = common::random_missing_data_graph(&mut rng, 3, 1).attach_proxies();
        let elided = g.elide_proxies();
        let revalidated = validate(elided.graph().clone()).expect("elided graph stays valid");
        assert_eq!(revalidated.graph(), elided.graph());
    }
}
