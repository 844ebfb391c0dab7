//! Random graph generators shared by the integration suites.

use fulllaw::graph::{validate, MissingDataGraph, MixedGraph, VertexRole};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random ADMG over `n` fully observed vertices: directed edges follow a random
/// topological order, bidirected edges land on arbitrary pairs. Parallel
/// directed/bidirected edges between the same pair are allowed.
pub fn random_admg(rng: &mut impl Rng, n: usize, p_dir: f64, p_bi: f64) -> MixedGraph {
    let mut g = MixedGraph::new();
    let vs: Vec<_> = (0..n)
        .map(|i| g.add_vertex(format!("V{i}"), VertexRole::FullyObserved).unwrap())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p_dir) {
                g.add_edge(vs[order[i]], vs[order[j]]).unwrap();
            }
            if rng.gen_bool(p_bi) {
                g.add_biedge(vs[order[i]], vs[order[j]]).unwrap();
            }
        }
    }
    g
}

/// Random valid missing-data graph with up to `max_pairs` pairs and up to
/// `max_o` fully observed vertices; edge placement respects the structural
/// restrictions (indicators point only at indicators).
pub fn random_missing_data_graph(
    rng: &mut impl Rng,
    max_pairs: usize,
    max_o: usize,
) -> MissingDataGraph {
    let n_pairs = rng.gen_range(1..=max_pairs);
    let n_o = rng.gen_range(0..=max_o);
    let mut g = MixedGraph::new();
    let mut vertices = Vec::new();
    for i in 0..n_pairs {
        vertices.push(g.add_vertex(format!("X{i}"), VertexRole::PotentiallyMissing(i)).unwrap());
        vertices.push(g.add_vertex(format!("R{i}"), VertexRole::MissingnessIndicator(i)).unwrap());
    }
    for j in 0..n_o {
        vertices.push(g.add_vertex(format!("O{j}"), VertexRole::FullyObserved).unwrap());
    }
    let n = vertices.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let p_dir = rng.gen_range(0.1..0.4);
    let p_bi = rng.gen_range(0.05..0.3);
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (vertices[order[i]], vertices[order[j]]);
            let legal = match (g.role(a).clone(), g.role(b).clone()) {
                (VertexRole::MissingnessIndicator(_), VertexRole::MissingnessIndicator(_)) => true,
                (VertexRole::MissingnessIndicator(_), _) => false,
                _ => true,
            };
            if legal && rng.gen_bool(p_dir) {
                g.add_edge(a, b).unwrap();
            }
            if rng.gen_bool(p_bi) {
                g.add_biedge(a, b).unwrap();
            }
        }
    }
    validate(g).expect("construction respects the restrictions")
}
