//! d-separation and m-separation queries.
//!
//! The production algorithm is a reachability search over (vertex, arrival-mark)
//! states; the [`reference`] submodule keeps two independent implementations
//! (exhaustive path enumeration and moralization) that guard it in tests.

use crate::graph::{MixedGraph, Vertex, VertexSet};

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum SeparationError {
    #[error("query sets overlap")]
    OverlappingSets,
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("proxy vertex `{0}` in query; elide proxies first")]
    ProxyVertex(String),
}

/// How a path meets a vertex: with an arrowhead at the vertex or with a tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Mark {
    Head,
    Tail,
}

fn check_query(
    g: &MixedGraph,
    a: &VertexSet,
    b: &VertexSet,
    z: &VertexSet,
) -> Result<(), SeparationError> {
    for (s, t) in [(a, b), (a, z), (b, z)] {
        if s.intersection(t).next().is_some() {
            return Err(SeparationError::OverlappingSets);
        }
    }
    for set in [a, b, z] {
        for &v in set {
            if v.idx() >= g.vertex_count() {
                return Err(SeparationError::UnknownVertex(format!("#{}", v.0)));
            }
            if g.role(v).is_proxy() {
                return Err(SeparationError::ProxyVertex(g.name(v).to_string()));
            }
        }
    }
    Ok(())
}

/// True iff every path between `a` and `b` is blocked given `z` (m-separation;
/// on pure DAGs this is d-separation).
///
/// A non-endpoint vertex blocks a path when it is a non-collider in `z`, or a
/// collider (including the mixed forms) with no descendant in `z`.
pub fn is_m_separated(
    g: &MixedGraph,
    a: &VertexSet,
    b: &VertexSet,
    z: &VertexSet,
) -> Result<bool, SeparationError> {
    check_query(g, a, b, z)?;
    if a.is_empty() || b.is_empty() {
        return Ok(true);
    }
    let an_z = g.ancestors(z);
    let n = g.vertex_count();
    // seen[v][mark]
    let mut seen = vec![[false; 2]; n];
    let mut queue: Vec<(Vertex, Mark)> = Vec::new();

    let push = |queue: &mut Vec<(Vertex, Mark)>, seen: &mut Vec<[bool; 2]>, v: Vertex, m: Mark| {
        let mi = match m {
            Mark::Head => 0,
            Mark::Tail => 1,
        };
        if !seen[v.idx()][mi] {
            seen[v.idx()][mi] = true;
            queue.push((v, m));
        }
    };

    for &s in a {
        // Leave an endpoint in every possible way; no constraint applies at it.
        for c in g.children(s) {
            push(&mut queue, &mut seen, c, Mark::Head);
        }
        for p in g.parents(s) {
            push(&mut queue, &mut seen, p, Mark::Tail);
        }
        for sp in g.spouses(s) {
            push(&mut queue, &mut seen, sp, Mark::Head);
        }
    }

    while let Some((v, arrived)) = queue.pop() {
        if b.contains(&v) {
            return Ok(false);
        }
        // Continue through v. Collider steps (head in, head out) need v to be an
        // ancestor of z; non-collider steps need v outside z.
        let non_collider_ok = !z.contains(&v);
        let collider_ok = an_z.contains(&v);
        // Out via directed edge v -> c: tail at v, head at c.
        if non_collider_ok {
            for c in g.children(v) {
                push(&mut queue, &mut seen, c, Mark::Head);
            }
        }
        // Out via edge p -> v traversed backwards: head at v on the outgoing side
        // is a tail... the mark at v for edge (p -> v) is Head; leaving through it
        // means the step at v pairs (arrived, Head).
        let can_leave_headwards = match arrived {
            Mark::Tail => non_collider_ok,
            Mark::Head => collider_ok,
        };
        if can_leave_headwards {
            for p in g.parents(v) {
                push(&mut queue, &mut seen, p, Mark::Tail);
            }
            for sp in g.spouses(v) {
                push(&mut queue, &mut seen, sp, Mark::Head);
            }
        }
    }
    Ok(true)
}

/// Complete Markov blanket: `mb(v)` plus each child together with its `mb`,
/// where `mb` is district-plus-district-parents.
pub fn complete_markov_blanket(g: &MixedGraph, v: Vertex) -> Result<VertexSet, SeparationError> {
    if v.idx() >= g.vertex_count() {
        return Err(SeparationError::UnknownVertex(format!("#{}", v.0)));
    }
    if g.role(v).is_proxy() {
        return Err(SeparationError::ProxyVertex(g.name(v).to_string()));
    }
    let mut out = markov_blanket(g, v);
    for c in g.children(v) {
        out.insert(c);
        out.extend(markov_blanket(g, c));
    }
    out.remove(&v);
    Ok(out)
}

/// Markov blanket in an ADMG: district of `v` plus parents of that district,
/// minus `v` itself.
pub fn markov_blanket(g: &MixedGraph, v: Vertex) -> VertexSet {
    let all: VertexSet = g.vertices().collect();
    let dis = g.district_of_within(v, &all);
    let mut out = dis.clone();
    out.extend(g.parents_of_set(&dis));
    for &d in &dis {
        out.extend(g.parents(d));
    }
    out.remove(&v);
    out
}

/// Reference implementations used as oracles in the test suites.
pub mod reference {
    use super::*;

    /// Kind of an edge as traversed along a path, viewed from the earlier vertex.
    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Step {
        /// `u -> w`: tail at u, head at w.
        Forward,
        /// `u <- w`: head at u, tail at w.
        Backward,
        /// `u <-> w`: head at both.
        Bidirected,
    }

    /// A simple path with its edge kinds.
    #[derive(Debug, Clone, PartialEq, Eq)]
    pub struct MixedPath {
        pub vertices: Vec<Vertex>,
        pub steps: Vec<Step>,
    }

    impl MixedPath {
        /// Interior vertices that are colliders on this path.
        pub fn colliders(&self) -> VertexSet {
            self.interior(|before, after| {
                matches!(before, Step::Forward | Step::Bidirected)
                    && matches!(after, Step::Backward | Step::Bidirected)
            })
        }

        /// Interior vertices that are non-colliders on this path.
        pub fn non_colliders(&self) -> VertexSet {
            self.interior(|before, after| {
                !(matches!(before, Step::Forward | Step::Bidirected)
                    && matches!(after, Step::Backward | Step::Bidirected))
            })
        }

        fn interior(&self, pred: impl Fn(Step, Step) -> bool) -> VertexSet {
            (1..self.vertices.len() - 1)
                .filter(|&i| pred(self.steps[i - 1], self.steps[i]))
                .map(|i| self.vertices[i])
                .collect()
        }

        /// Open given `z` iff colliders are ancestors of `z` and non-colliders avoid `z`.
        pub fn is_open(&self, z: &VertexSet, an_z: &VertexSet) -> bool {
            self.colliders().iter().all(|c| an_z.contains(c))
                && self.non_colliders().iter().all(|n| !z.contains(n))
        }
    }

    /// All simple paths between `from` and `to`, every edge kind expanded
    /// (parallel directed and bidirected edges give distinct paths).
    pub fn enumerate_paths(g: &MixedGraph, from: Vertex, to: Vertex) -> Vec<MixedPath> {
        let mut out = Vec::new();
        let mut on_path = vec![false; g.vertex_count()];
        on_path[from.idx()] = true;
        let mut vertices = vec![from];
        let mut steps = Vec::new();
        dfs(g, to, &mut on_path, &mut vertices, &mut steps, &mut out);
        out
    }

    fn dfs(
        g: &MixedGraph,
        to: Vertex,
        on_path: &mut Vec<bool>,
        vertices: &mut Vec<Vertex>,
        steps: &mut Vec<Step>,
        out: &mut Vec<MixedPath>,
    ) {
        let u = *vertices.last().expect("path never empty");
        let mut neighbors: Vec<(Vertex, Step)> = Vec::new();
        neighbors.extend(g.children(u).map(|c| (c, Step::Forward)));
        neighbors.extend(g.parents(u).map(|p| (p, Step::Backward)));
        neighbors.extend(g.spouses(u).map(|s| (s, Step::Bidirected)));
        for (w, step) in neighbors {
            if w == to {
                let mut vs = vertices.clone();
                vs.push(w);
                let mut ss = steps.clone();
                ss.push(step);
                out.push(MixedPath { vertices: vs, steps: ss });
                continue;
            }
            if on_path[w.idx()] {
                continue;
            }
            on_path[w.idx()] = true;
            vertices.push(w);
            steps.push(step);
            dfs(g, to, on_path, vertices, steps, out);
            steps.pop();
            vertices.pop();
            on_path[w.idx()] = false;
        }
    }

    /// m-separation by exhaustive path enumeration.
    pub fn is_m_separated_by_paths(
        g: &MixedGraph,
        a: &VertexSet,
        b: &VertexSet,
        z: &VertexSet,
    ) -> Result<bool, SeparationError> {
        super::check_query(g, a, b, z)?;
        let an_z = g.ancestors(z);
        for &s in a {
            for &t in b {
                for path in enumerate_paths(g, s, t) {
                    if path.is_open(z, &an_z) {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// m-separation by moralizing the ancestral subgraph: marry parents of each
    /// vertex, marry endpoints of bidirected edges and parents across them, then
    /// test undirected reachability avoiding `z`.
    pub fn is_m_separated_by_moralization(
        g: &MixedGraph,
        a: &VertexSet,
        b: &VertexSet,
        z: &VertexSet,
    ) -> Result<bool, SeparationError> {
        super::check_query(g, a, b, z)?;
        let mut seeds = a.clone();
        seeds.extend(b.iter().copied());
        seeds.extend(z.iter().copied());
        let anc = g.ancestors(&seeds);
        let n = g.vertex_count();
        let mut adj = vec![VertexSet::new(); n];
        let connect = |adj: &mut Vec<VertexSet>, x: Vertex, y: Vertex| {
            if x != y {
                adj[x.idx()].insert(y);
                adj[y.idx()].insert(x);
            }
        };
        // Augment each district-within-ancestors: every pair of vertices joined by
        // a bidirected path is adjacent in the moral graph, and all their parents
        // marry (the district behaves like one big collider family).
        for &v in &anc {
            let dis = g.district_of_within(v, &anc);
            let mut family: Vec<Vertex> = dis.iter().copied().collect();
            let mut pa = VertexSet::new();
            for &d in &dis {
                for p in g.parents(d) {
                    if anc.contains(&p) {
                        pa.insert(p);
                    }
                }
            }
            family.extend(pa.iter().copied());
            for i in 0..family.len() {
                for j in i + 1..family.len() {
                    connect(&mut adj, family[i], family[j]);
                }
            }
        }
        // Ordinary directed edges within ancestors.
        for (x, y) in g.directed_edges() {
            if anc.contains(&x) && anc.contains(&y) {
                connect(&mut adj, x, y);
            }
        }

        // BFS in the moral graph from a to b avoiding z.
        let mut seen = vec![false; n];
        let mut stack: Vec<Vertex> = a.iter().copied().filter(|v| !z.contains(v)).collect();
        for v in &stack {
            seen[v.idx()] = true;
        }
        while let Some(u) = stack.pop() {
            if b.contains(&u) {
                return Ok(false);
            }
            for &w in &adj[u.idx()] {
                if !seen[w.idx()] && !z.contains(&w) {
                    seen[w.idx()] = true;
                    stack.push(w);
                }
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::MissingDataGraph;

    fn sep(g: &MissingDataGraph, a: &[&str], b: &[&str], z: &[&str]) -> bool {
        let e = g.elide_proxies();
        let a = e.resolve(a.iter().copied()).unwrap();
        let b = e.resolve(b.iter().copied()).unwrap();
        let z = e.resolve(z.iter().copied()).unwrap();
        let primary = is_m_separated(e.graph(), &a, &b, &z).unwrap();
        let by_paths = reference::is_m_separated_by_paths(e.graph(), &a, &b, &z).unwrap();
        let by_moral = reference::is_m_separated_by_moralization(e.graph(), &a, &b, &z).unwrap();
        assert_eq!(primary, by_paths, "automaton vs path enumeration");
        assert_eq!(primary, by_moral, "automaton vs moralization");
        primary
    }

    #[test]
    fn fig1a_r1_indep_r3_given_x3_r2() {
        let g = fixtures::fig1a();
        assert!(sep(&g, &["R1"], &["R3"], &["X3", "R2"]));
    }

    #[test]
    fn fig1a_r2_dep_r1_given_x1_r3() {
        let g = fixtures::fig1a();
        assert!(!sep(&g, &["R2"], &["R1"], &["X1", "R3"]));
    }

    #[test]
    fn fig1a_r3_indep_r1_given_x1_r2() {
        // The key independence behind the fig1a odds-ratio argument.
        let g = fixtures::fig1a();
        assert!(sep(&g, &["R3"], &["R1"], &["X1", "R2"]));
    }

    #[test]
    fn edgeless_graph_everything_separated() {
        let g = fixtures::mcar();
        assert!(sep(&g, &["R1"], &["R2"], &[]));
        assert!(sep(&g, &["R1"], &["X1", "X2"], &["R2"]));
    }

    #[test]
    fn fig2b_scenario3_independences() {
        let g = fixtures::fig2b();
        assert!(sep(&g, &["R3"], &["R1"], &["R2", "X1", "X2"]));
        assert!(sep(&g, &["R2"], &["X2"], &["R3", "X1"]));
        assert!(sep(&g, &["R1"], &["R3"], &["X3", "R2"]));
    }

    #[test]
    fn fig2b_dashed_breaks_icin_independences() {
        let g = fixtures::fig2b_dashed();
        assert!(!sep(&g, &["R3"], &["R1"], &["R2", "X1", "X2"]));
    }

    #[test]
    fn collider_opens_on_conditioning() {
        let g = fixtures::colluder();
        assert!(sep(&g, &["X1"], &["R1"], &[]));
        assert!(!sep(&g, &["X1"], &["R1"], &["R2"]));
        // Descendants of a collider open it too: not applicable here (R2 childless).
    }

    #[test]
    fn symmetry_of_separation() {
        let g = fixtures::fig2b_dashed();
        for (a, b, z) in [
            (["R1"], ["R3"], vec![]),
            (["R1"], ["X2"], vec!["R2"]),
            (["X1"], ["X3"], vec!["X2", "R1"]),
        ] {
            assert_eq!(
                sep(&g, &a, &b, &z),
                sep(&g, &b, &a, &z),
                "symmetry at {a:?} {b:?} {z:?}"
            );
        }
    }

    #[test]
    fn overlapping_sets_rejected() {
        let g = fixtures::fig1a();
        let a = g.resolve(["R1"]).unwrap();
        let z = g.resolve(["R1", "X2"]).unwrap();
        let b = g.resolve(["R3"]).unwrap();
        assert_eq!(
            is_m_separated(g.graph(), &a, &b, &z),
            Err(SeparationError::OverlappingSets)
        );
    }

    #[test]
    fn proxies_rejected_in_queries() {
        let g = fixtures::fig5a().attach_proxies();
        let a = g.resolve(["Xp1"]).unwrap();
        let b = g.resolve(["R1"]).unwrap();
        let err = is_m_separated(g.graph(), &a, &b, &VertexSet::new()).unwrap_err();
        assert_eq!(err, SeparationError::ProxyVertex("Xp1".to_string()));
    }

    #[test]
    fn mb_complete_chain() {
        // A -> B -> C: mbc(A) = {B}.
        let mut g = crate::graph::MixedGraph::new();
        let a = g.add_vertex("A", crate::graph::VertexRole::FullyObserved).unwrap();
        let b = g.add_vertex("B", crate::graph::VertexRole::FullyObserved).unwrap();
        let c = g.add_vertex("C", crate::graph::VertexRole::FullyObserved).unwrap();
        g.add_edge(a, b).unwrap();
        g.add_edge(b, c).unwrap();
        let mbc = complete_markov_blanket(&g, a).unwrap();
        assert_eq!(mbc, [b].into_iter().collect());
    }

    #[test]
    fn mb_complete_fig5a_contains_partner() {
        let g = fixtures::fig5a();
        let r1 = g.vertex("R1").unwrap();
        let mbc = complete_markov_blanket(g.graph(), r1).unwrap();
        assert!(mbc.contains(&g.vertex("X1").unwrap()));
    }

    #[test]
    fn mb_complete_fig1a_r3() {
        let g = fixtures::fig1a();
        let r3 = g.vertex("R3").unwrap();
        let mbc = complete_markov_blanket(g.graph(), r3).unwrap();
        let expected = g.resolve(["X1", "R2"]).unwrap();
        assert_eq!(mbc, expected);
    }

    #[test]
    fn mb_complete_soundness_on_fixtures() {
        for g in [
            fixtures::fig1a(),
            fixtures::fig1a_dashed(),
            fixtures::fig2b(),
            fixtures::fig2b_dashed(),
            fixtures::fig5d(),
            fixtures::fig5e(),
        ] {
            let e = g.elide_proxies();
            for v in e.vertices() {
                let mbc = complete_markov_blanket(e.graph(), v).unwrap();
                let rest: VertexSet = e
                    .vertices()
                    .filter(|w| *w != v && !mbc.contains(w))
                    .collect();
                assert!(
                    is_m_separated(e.graph(), &[v].into_iter().collect(), &rest, &mbc).unwrap(),
                    "mbc unsound for {} in fixture",
                    e.name(v)
                );
            }
        }
    }
}
