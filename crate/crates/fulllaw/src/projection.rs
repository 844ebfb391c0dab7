//! Latent projection of hidden-variable graphs onto ADMGs, and the observed-law
//! projection that treats the potentially missing variables as hidden.

use crate::graph::{GraphError, MissingDataGraph, MixedGraph, Vertex, VertexSet};

/// Project `g` onto `keep`.
///
/// `a -> b` appears when a directed path `a -> ... -> b` runs through projected
/// vertices only; `a <-> b` when a collider-free path with both endpoint edges
/// incoming runs through projected vertices only. Roles and pair indices are
/// preserved on the kept vertices; duplicate witness paths collapse to one edge.
pub fn latent_project(g: &MixedGraph, keep: &VertexSet) -> Result<MixedGraph, GraphError> {
    for &v in keep {
        if v.idx() >= g.vertex_count() {
            return Err(GraphError::UnknownVertex(format!("#{}", v.0)));
        }
    }
    let mut out = MixedGraph::new();
    for &v in keep {
        out.add_vertex(g.name(v), g.role(v).clone())?;
    }
    fn resolve_in(out: &MixedGraph, g: &MixedGraph, v: Vertex) -> Vertex {
        out.vertex(g.name(v)).expect("kept vertices added")
    }

    for &a in keep {
        // Directed: forward reachability through projected vertices.
        let mut stack: Vec<Vertex> = g.children(a).collect();
        let mut seen = VertexSet::new();
        while let Some(u) = stack.pop() {
            if !seen.insert(u) {
                continue;
            }
            if keep.contains(&u) {
                let (na, nu) = (resolve_in(&out, g, a), resolve_in(&out, g, u));
                if u != a && !out.has_edge(na, nu) {
                    out.add_edge(na, nu)?;
                }
                continue;
            }
            stack.extend(g.children(u));
        }
    }

    // Bidirected: states (vertex, arrived-with-head-at-vertex?) over projected
    // vertices; a collider-free continuation leaves head-arrivals through
    // directed out-edges only. Both endpoint edges must point at the endpoints.
    for &a in keep {
        let mut reached_keep = VertexSet::new();
        let mut stack: Vec<(Vertex, bool)> = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        // First edge must point into `a`: leave `a` through an incoming directed
        // edge (toward the parent) or a bidirected edge.
        for p in g.parents(a) {
            stack.push((p, false)); // at p, the edge p -> a has a tail
        }
        for s in g.spouses(a) {
            stack.push((s, true));
        }
        while let Some((u, head_at_u)) = stack.pop() {
            if !seen.insert((u, head_at_u)) {
                continue;
            }
            if keep.contains(&u) {
                // Last edge must point into the kept endpoint.
                if head_at_u && u != a {
                    reached_keep.insert(u);
                }
                continue;
            }
            // u is projected out; continue without forming a collider at u.
            if head_at_u {
                // head in, so the next edge must leave with a tail at u.
                for c in g.children(u) {
                    stack.push((c, true));
                }
            } else {
                // tail in: any continuation keeps u a non-collider.
                for c in g.children(u) {
                    stack.push((c, true));
                }
                for p in g.parents(u) {
                    stack.push((p, false));
                }
                for s in g.spouses(u) {
                    stack.push((s, true));
                }
            }
        }
        for b in reached_keep {
            let (na, nb) = (resolve_in(&out, g, a), resolve_in(&out, g, b));
            if !out.has_biedge(na, nb) {
                out.add_biedge(na, nb)?;
            }
        }
    }
    Ok(out)
}

/// Observed-law graph: project onto O ∪ R ∪ X, treating X1 (and hidden) vertices
/// as unobserved. Proxies are attached first if elided.
pub fn observed_law_graph(g: &MissingDataGraph) -> MixedGraph {
    let with_proxies = g.attach_proxies();
    let keep: VertexSet = with_proxies
        .vertices()
        .filter(|&v| {
            use crate::graph::VertexRole::*;
            matches!(
                with_proxies.role(v),
                FullyObserved | MissingnessIndicator(_) | Proxy(_)
            )
        })
        .collect();
    latent_project(with_proxies.graph(), &keep).expect("keep drawn from the graph")
}
