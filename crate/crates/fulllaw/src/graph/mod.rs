//! Mixed graphs with missing-data vertex roles.
//!
//! A [`MixedGraph`] holds directed and bidirected edges over vertices that carry
//! one of five roles: fully observed (`O`), potentially missing (`X1`), missingness
//! indicator (`R`), observed proxy (`X`), or hidden (`U`). [`validate`] checks the
//! structural restrictions of missing-data graphs and produces a [`MissingDataGraph`],
//! the type every analysis module consumes.

mod parse;

pub use parse::{parse_graph, render_graph, ParseError};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Index of a (potentially missing variable, indicator, proxy) triple.
pub type PairIndex = usize;

/// Role of a vertex in a missing-data graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum VertexRole {
    /// Always observed (`O`).
    FullyObserved,
    /// Potentially missing variable (`X1`), paired with an indicator.
    PotentiallyMissing(PairIndex),
    /// Binary missingness indicator (`R`) of a potentially missing variable.
    MissingnessIndicator(PairIndex),
    /// Observed proxy (`X`); deterministic function of its pair's `X1` and `R`.
    Proxy(PairIndex),
    /// Unobserved variable with a declared finite cardinality.
    Hidden { cardinality: usize },
}

impl VertexRole {
    /// Pair index for `X1`/`R`/`X` roles, `None` otherwise.
    pub fn pair_index(&self) -> Option<PairIndex> {
        match self {
            VertexRole::PotentiallyMissing(i)
            | VertexRole::MissingnessIndicator(i)
            | VertexRole::Proxy(i) => Some(*i),
            _ => None,
        }
    }

    pub fn is_proxy(&self) -> bool {
        matches!(self, VertexRole::Proxy(_))
    }

    pub fn is_hidden(&self) -> bool {
        matches!(self, VertexRole::Hidden { .. })
    }
}

/// Handle to a vertex of a particular [`MixedGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Vertex(pub(crate) u32);

impl Vertex {
    pub(crate) fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Set of vertices, ordered for deterministic iteration.
pub type VertexSet = BTreeSet<Vertex>;

/// Errors raised while building or querying a [`MixedGraph`].
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("duplicate vertex `{0}`")]
    DuplicateVertex(String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("duplicate {kind} edge {a} - {b}")]
    DuplicateEdge { kind: &'static str, a: String, b: String },
}

/// A single violated constraint found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Directed part contains a cycle through the named vertex.
    CycleDetected { witness: String },
    /// Directed edge with an illegal source/target combination.
    IllegalEdge { from: String, to: String, reason: String },
    /// Proxy vertex whose incident edges differ from the required shape.
    MalformedProxy { proxy: String, reason: String },
    /// X1/R/X vertex whose pairing is not a bijection.
    UnpairedVertex { vertex: String, reason: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CycleDetected { witness } => {
                write!(f, "CycleDetected: directed cycle through `{witness}`")
            }
            Violation::IllegalEdge { from, to, reason } => {
                write!(f, "IllegalEdge: `{from} -> {to}` ({reason})")
            }
            Violation::MalformedProxy { proxy, reason } => {
                write!(f, "MalformedProxy: `{proxy}` ({reason})")
            }
            Violation::UnpairedVertex { vertex, reason } => {
                write!(f, "UnpairedVertex: `{vertex}` ({reason})")
            }
        }
    }
}

/// Everything that is wrong with a candidate missing-data graph.
#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub struct ValidationErrors {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} constraint violation(s):", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Mixed graph: directed plus bidirected edges, roles per vertex.
///
/// Vertices are identified by string ids; pair indices are stored explicitly on
/// the role so any naming convention works.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedGraph {
    names: Vec<String>,
    roles: Vec<VertexRole>,
    parents: Vec<BTreeSet<u32>>,
    children: Vec<BTreeSet<u32>>,
    spouses: Vec<BTreeSet<u32>>,
    by_name: BTreeMap<String, u32>,
}

impl Default for MixedGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl MixedGraph {
    pub fn new() -> Self {
        MixedGraph {
            names: Vec::new(),
            roles: Vec::new(),
            parents: Vec::new(),
            children: Vec::new(),
            spouses: Vec::new(),
            by_name: BTreeMap::new(),
        }
    }

    pub fn add_vertex(&mut self, name: impl Into<String>, role: VertexRole) -> Result<Vertex, GraphError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(GraphError::DuplicateVertex(name));
        }
        let id = self.names.len() as u32;
        self.by_name.insert(name.clone(), id);
        self.names.push(name);
        self.roles.push(role);
        self.parents.push(BTreeSet::new());
        self.children.push(BTreeSet::new());
        self.spouses.push(BTreeSet::new());
        Ok(Vertex(id))
    }

    pub fn add_edge(&mut self, from: Vertex, to: Vertex) -> Result<(), GraphError> {
        if from == to {
            return Err(GraphError::SelfLoop(self.name(from).to_string()));
        }
        if !self.children[from.idx()].insert(to.0) {
            return Err(GraphError::DuplicateEdge {
                kind: "directed",
                a: self.name(from).to_string(),
                b: self.name(to).to_string(),
            });
        }
        self.parents[to.idx()].insert(from.0);
        Ok(())
    }

    pub fn add_biedge(&mut self, a: Vertex, b: Vertex) -> Result<(), GraphError> {
        if a == b {
            return Err(GraphError::SelfLoop(self.name(a).to_string()));
        }
        if !self.spouses[a.idx()].insert(b.0) {
            return Err(GraphError::DuplicateEdge {
                kind: "bidirected",
                a: self.name(a).to_string(),
                b: self.name(b).to_string(),
            });
        }
        self.spouses[b.idx()].insert(a.0);
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.names.len() as u32).map(Vertex)
    }

    pub fn vertex(&self, name: &str) -> Option<Vertex> {
        self.by_name.get(name).copied().map(Vertex)
    }

    /// Resolve names to a vertex set, reporting the first unknown name.
    pub fn resolve<I, S>(&self, names: I) -> Result<VertexSet, GraphError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = VertexSet::new();
        for n in names {
            let n = n.as_ref();
            match self.vertex(n) {
                Some(v) => {
                    out.insert(v);
                }
                None => return Err(GraphError::UnknownVertex(n.to_string())),
            }
        }
        Ok(out)
    }

    pub fn name(&self, v: Vertex) -> &str {
        &self.names[v.idx()]
    }

    pub fn names_of<'a>(&'a self, set: &'a VertexSet) -> impl Iterator<Item = &'a str> + 'a {
        set.iter().map(move |&v| self.name(v))
    }

    pub fn role(&self, v: Vertex) -> &VertexRole {
        &self.roles[v.idx()]
    }

    pub fn parents(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.parents[v.idx()].iter().map(|&i| Vertex(i))
    }

    pub fn children(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.children[v.idx()].iter().map(|&i| Vertex(i))
    }

    pub fn spouses(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.spouses[v.idx()].iter().map(|&i| Vertex(i))
    }

    pub fn has_edge(&self, from: Vertex, to: Vertex) -> bool {
        self.children[from.idx()].contains(&to.0)
    }

    pub fn has_biedge(&self, a: Vertex, b: Vertex) -> bool {
        self.spouses[a.idx()].contains(&b.0)
    }

    /// Directed edges as (from, to) pairs, deterministic order.
    pub fn directed_edges(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        self.vertices()
            .flat_map(move |v| self.children(v).map(move |c| (v, c)))
    }

    /// Bidirected edges with endpoints ordered by index, deterministic order.
    pub fn bidirected_edges(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        self.vertices()
            .flat_map(move |v| self.spouses(v).filter(move |s| v < *s).map(move |s| (v, s)))
    }

    /// True when `from -> to` is one of the two deterministic edges into a proxy.
    pub fn is_deterministic_edge(&self, from: Vertex, to: Vertex) -> bool {
        if !self.has_edge(from, to) {
            return false;
        }
        match (self.role(to), self.role(from)) {
            (VertexRole::Proxy(i), VertexRole::MissingnessIndicator(j))
            | (VertexRole::Proxy(i), VertexRole::PotentiallyMissing(j)) => i == j,
            _ => false,
        }
    }

    /// One-step parents of a set.
    pub fn parents_of_set(&self, s: &VertexSet) -> VertexSet {
        let mut out = VertexSet::new();
        for &v in s {
            out.extend(self.parents(v));
        }
        for v in s {
            out.remove(v);
        }
        out
    }

    /// One-step children of a set.
    pub fn children_of_set(&self, s: &VertexSet) -> VertexSet {
        let mut out = VertexSet::new();
        for &v in s {
            out.extend(self.children(v));
        }
        for v in s {
            out.remove(v);
        }
        out
    }

    /// Reflexive transitive closure over parent edges.
    pub fn ancestors(&self, s: &VertexSet) -> VertexSet {
        self.closure(s, |g, v| g.parents[v.idx()].iter().copied().collect())
    }

    /// Reflexive transitive closure over child edges.
    pub fn descendants(&self, s: &VertexSet) -> VertexSet {
        self.closure(s, |g, v| g.children[v.idx()].iter().copied().collect())
    }

    fn closure(&self, s: &VertexSet, step: impl Fn(&Self, Vertex) -> Vec<u32>) -> VertexSet {
        let mut seen: BTreeSet<u32> = s.iter().map(|v| v.0).collect();
        let mut stack: Vec<u32> = seen.iter().copied().collect();
        while let Some(u) = stack.pop() {
            for w in step(self, Vertex(u)) {
                if seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen.into_iter().map(Vertex).collect()
    }

    /// District (bidirected-connected component) of `v`, restricted to `within`.
    pub fn district_of_within(&self, v: Vertex, within: &VertexSet) -> VertexSet {
        let mut seen = VertexSet::new();
        if !within.contains(&v) {
            return seen;
        }
        seen.insert(v);
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for s in self.spouses(u) {
                if within.contains(&s) && seen.insert(s) {
                    stack.push(s);
                }
            }
        }
        seen
    }

    /// Topological order of the directed part, or `None` if it is cyclic.
    pub fn topological_order(&self) -> Option<Vec<Vertex>> {
        let n = self.vertex_count();
        let mut indeg: Vec<usize> = (0..n).map(|i| self.parents[i].len()).collect();
        let mut queue: BTreeSet<u32> = (0..n as u32).filter(|&i| indeg[i as usize] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&u) = queue.iter().next() {
            queue.remove(&u);
            order.push(Vertex(u));
            for &c in &self.children[u as usize] {
                indeg[c as usize] -= 1;
                if indeg[c as usize] == 0 {
                    queue.insert(c);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// All vertices with the given role filter, in index order.
    pub fn vertices_where<'a>(
        &'a self,
        pred: impl Fn(&VertexRole) -> bool + 'a,
    ) -> impl Iterator<Item = Vertex> + 'a {
        self.vertices().filter(move |&v| pred(self.role(v)))
    }

    /// Rename-preserving structural equality up to a role- and pair-preserving
    /// vertex bijection. Default equality (`==`) is id-exact.
    pub fn is_isomorphic(&self, other: &MixedGraph) -> bool {
        if self.vertex_count() != other.vertex_count() {
            return false;
        }
        // Non-hidden vertices must match by pair structure; try all role-compatible
        // assignments (graphs here are small and hidden vertices are few).
        let n = self.vertex_count();
        let mut used = vec![false; n];
        let mut map = vec![u32::MAX; n];
        self.iso_search(other, 0, &mut map, &mut used)
    }

    fn iso_compatible(&self, other: &MixedGraph, a: usize, b: usize) -> bool {
        let ra = &self.roles[a];
        let rb = &other.roles[b];
        match (ra, rb) {
            (VertexRole::Hidden { cardinality: ca }, VertexRole::Hidden { cardinality: cb }) => ca == cb,
            _ => ra == rb,
        }
    }

    fn iso_search(&self, other: &MixedGraph, v: usize, map: &mut Vec<u32>, used: &mut Vec<bool>) -> bool {
        let n = self.vertex_count();
        if v == n {
            return self.iso_check(other, map);
        }
        for cand in 0..n {
            if used[cand] || !self.iso_compatible(other, v, cand) {
                continue;
            }
            if self.parents[v].len() != other.parents[cand].len()
                || self.children[v].len() != other.children[cand].len()
                || self.spouses[v].len() != other.spouses[cand].len()
            {
                continue;
            }
            map[v] = cand as u32;
            used[cand] = true;
            if self.iso_search(other, v + 1, map, used) {
                return true;
            }
            used[cand] = false;
            map[v] = u32::MAX;
        }
        false
    }

    fn iso_check(&self, other: &MixedGraph, map: &[u32]) -> bool {
        for v in 0..self.vertex_count() {
            for &c in &self.children[v] {
                if !other.children[map[v] as usize].contains(&map[c as usize]) {
                    return false;
                }
            }
            for &s in &self.spouses[v] {
                if !other.spouses[map[v] as usize].contains(&map[s as usize]) {
                    return false;
                }
            }
        }
        true
    }

    /// Copy of the graph containing only `keep` vertices and the edges among them.
    pub fn induced_subgraph(&self, keep: &VertexSet) -> MixedGraph {
        let mut g = MixedGraph::new();
        let mut map = BTreeMap::new();
        for &v in keep {
            let nv = g
                .add_vertex(self.name(v), self.role(v).clone())
                .expect("vertex names unique in source graph");
            map.insert(v, nv);
        }
        for (a, b) in self.directed_edges() {
            if let (Some(&na), Some(&nb)) = (map.get(&a), map.get(&b)) {
                g.add_edge(na, nb).expect("source edges unique");
            }
        }
        for (a, b) in self.bidirected_edges() {
            if let (Some(&na), Some(&nb)) = (map.get(&a), map.get(&b)) {
                g.add_biedge(na, nb).expect("source edges unique");
            }
        }
        g
    }
}

/// One (X1, R, optional X) triple of a validated graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub index: PairIndex,
    pub missing: Vertex,
    pub indicator: Vertex,
    pub proxy: Option<Vertex>,
}

/// A [`MixedGraph`] that passed the structural checks of [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingDataGraph {
    g: MixedGraph,
}

impl std::ops::Deref for MissingDataGraph {
    type Target = MixedGraph;

    fn deref(&self) -> &MixedGraph {
        &self.g
    }
}

impl MissingDataGraph {
    pub fn graph(&self) -> &MixedGraph {
        &self.g
    }

    pub fn into_graph(self) -> MixedGraph {
        self.g
    }

    /// Pairs sorted by pair index.
    pub fn pairs(&self) -> Vec<Pair> {
        let mut by_index: BTreeMap<PairIndex, (Option<Vertex>, Option<Vertex>, Option<Vertex>)> =
            BTreeMap::new();
        for v in self.g.vertices() {
            match self.g.role(v) {
                VertexRole::PotentiallyMissing(i) => by_index.entry(*i).or_default().0 = Some(v),
                VertexRole::MissingnessIndicator(i) => by_index.entry(*i).or_default().1 = Some(v),
                VertexRole::Proxy(i) => by_index.entry(*i).or_default().2 = Some(v),
                _ => {}
            }
        }
        by_index
            .into_iter()
            .map(|(index, (m, r, x))| Pair {
                index,
                missing: m.expect("validated: every pair has X1"),
                indicator: r.expect("validated: every pair has R"),
                proxy: x,
            })
            .collect()
    }

    pub fn fully_observed(&self) -> VertexSet {
        self.g
            .vertices_where(|r| matches!(r, VertexRole::FullyObserved))
            .collect()
    }

    pub fn hidden(&self) -> VertexSet {
        self.g.vertices_where(|r| r.is_hidden()).collect()
    }

    pub fn proxies(&self) -> VertexSet {
        self.g.vertices_where(|r| r.is_proxy()).collect()
    }

    /// Remove proxy vertices and their deterministic edges. Pair indices survive
    /// on the X1/R vertices, so proxies can be re-attached later.
    pub fn elide_proxies(&self) -> MissingDataGraph {
        let keep: VertexSet = self.g.vertices_where(|r| !r.is_proxy()).collect();
        MissingDataGraph {
            g: self.g.induced_subgraph(&keep),
        }
    }

    /// Attach one proxy per pair (generated names) where none is present.
    pub fn attach_proxies(&self) -> MissingDataGraph {
        let mut g = self.g.clone();
        for pair in self.pairs() {
            if pair.proxy.is_some() {
                continue;
            }
            let name = free_proxy_name(&g, g.name(pair.missing));
            let x = g
                .add_vertex(name, VertexRole::Proxy(pair.index))
                .expect("proxy name chosen fresh");
            let m = g.vertex(self.g.name(pair.missing)).expect("kept");
            let r = g.vertex(self.g.name(pair.indicator)).expect("kept");
            g.add_edge(r, x).expect("new vertex");
            g.add_edge(m, x).expect("new vertex");
        }
        MissingDataGraph { g }
    }

    /// Vertices over which the full law lives: O, X1 and R (no proxies, no hidden).
    pub fn full_law_vertices(&self) -> VertexSet {
        self.g
            .vertices_where(|r| {
                matches!(
                    r,
                    VertexRole::FullyObserved
                        | VertexRole::PotentiallyMissing(_)
                        | VertexRole::MissingnessIndicator(_)
                )
            })
            .collect()
    }
}

/// Conventional indicator name for a missing variable: `X3 -> R3`, `W -> R_W`.
pub fn indicator_name_for(missing: &str) -> String {
    match missing.strip_prefix('X') {
        Some(tail) if !tail.is_empty() => format!("R{tail}"),
        _ => format!("R_{missing}"),
    }
}

/// Conventional proxy name for a missing variable: `X3 -> Xp3`, `W -> Xp_W`.
pub fn proxy_name_for(missing: &str) -> String {
    match missing.strip_prefix('X') {
        Some(tail) if !tail.is_empty() => format!("Xp{tail}"),
        _ => format!("Xp_{missing}"),
    }
}

fn free_proxy_name(g: &MixedGraph, missing: &str) -> String {
    let base = proxy_name_for(missing);
    if g.vertex(&base).is_none() {
        return base;
    }
    let mut k = 2;
    loop {
        let cand = format!("{base}_{k}");
        if g.vertex(&cand).is_none() {
            return cand;
        }
        k += 1;
    }
}

/// Check every structural constraint and return the validated graph or the full
/// list of violations.
pub fn validate(g: MixedGraph) -> Result<MissingDataGraph, ValidationErrors> {
    let mut violations = Vec::new();

    if g.topological_order().is_none() {
        let witness = cycle_witness(&g);
        violations.push(Violation::CycleDetected { witness });
    }

    // Outgoing directed edges from R may point only at other indicators or at the
    // pair's own proxy. Everything else is flagged (X1 and O per the paper's rule,
    // hidden and foreign proxies conservatively).
    for (from, to) in g.directed_edges() {
        if let VertexRole::MissingnessIndicator(i) = g.role(from) {
            let legal = match g.role(to) {
                VertexRole::MissingnessIndicator(_) => true,
                VertexRole::Proxy(j) => i == j,
                _ => false,
            };
            if !legal {
                violations.push(Violation::IllegalEdge {
                    from: g.name(from).to_string(),
                    to: g.name(to).to_string(),
                    reason: "indicators may point only at other indicators or their own proxy"
                        .to_string(),
                });
            }
        }
    }

    // Proxy shape: parents exactly {R_i, X1_i}, childless, no bidirected edges.
    for v in g.vertices() {
        let VertexRole::Proxy(i) = g.role(v) else { continue };
        let i = *i;
        if g.children(v).next().is_some() {
            violations.push(Violation::MalformedProxy {
                proxy: g.name(v).to_string(),
                reason: "proxies must be childless".to_string(),
            });
        }
        if g.spouses(v).next().is_some() {
            violations.push(Violation::MalformedProxy {
                proxy: g.name(v).to_string(),
                reason: "proxies may not have bidirected edges".to_string(),
            });
        }
        let pa: Vec<Vertex> = g.parents(v).collect();
        let mut has_r = false;
        let mut has_m = false;
        let mut foreign = false;
        for p in &pa {
            match g.role(*p) {
                VertexRole::MissingnessIndicator(j) if *j == i => has_r = true,
                VertexRole::PotentiallyMissing(j) if *j == i => has_m = true,
                _ => foreign = true,
            }
        }
        if foreign || pa.len() > 2 {
            violations.push(Violation::MalformedProxy {
                proxy: g.name(v).to_string(),
                reason: "proxy parents must be exactly its own indicator and missing variable"
                    .to_string(),
            });
        }
        // An observed-law projection keeps R_i -> X_i but loses X1_i; a proxy in a
        // *missing-data* graph needs both parents.
        if !has_r || !has_m {
            violations.push(Violation::MalformedProxy {
                proxy: g.name(v).to_string(),
                reason: "proxy must have both deterministic parents".to_string(),
            });
        }
    }

    // Pairing bijection: every pair index carries exactly one X1, one R, at most one X.
    let mut counts: BTreeMap<PairIndex, (Vec<Vertex>, Vec<Vertex>, Vec<Vertex>)> = BTreeMap::new();
    for v in g.vertices() {
        match g.role(v) {
            VertexRole::PotentiallyMissing(i) => counts.entry(*i).or_default().0.push(v),
            VertexRole::MissingnessIndicator(i) => counts.entry(*i).or_default().1.push(v),
            VertexRole::Proxy(i) => counts.entry(*i).or_default().2.push(v),
            _ => {}
        }
    }
    for (idx, (ms, rs, xs)) in &counts {
        let describe = |vs: &[Vertex]| -> String {
            vs.iter().map(|&v| g.name(v)).collect::<Vec<_>>().join(", ")
        };
        if ms.len() != 1 || rs.len() != 1 {
            let vertex = ms
                .first()
                .or_else(|| rs.first())
                .or_else(|| xs.first())
                .map(|&v| g.name(v).to_string())
                .unwrap_or_else(|| format!("pair {idx}"));
            violations.push(Violation::UnpairedVertex {
                vertex,
                reason: format!(
                    "pair {idx} must have exactly one missing variable and one indicator (found X1: [{}], R: [{}])",
                    describe(ms),
                    describe(rs)
                ),
            });
        }
        if xs.len() > 1 {
            violations.push(Violation::UnpairedVertex {
                vertex: g.name(xs[1]).to_string(),
                reason: format!("pair {idx} has more than one proxy"),
            });
        }
    }

    if violations.is_empty() {
        Ok(MissingDataGraph { g })
    } else {
        Err(ValidationErrors { violations })
    }
}

fn cycle_witness(g: &MixedGraph) -> String {
    // Any vertex left with positive in-degree after Kahn peeling sits on a cycle.
    let n = g.vertex_count();
    let mut indeg: Vec<usize> = (0..n).map(|i| g.parents[i].len()).collect();
    let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut removed = vec![false; n];
    while let Some(u) = queue.pop() {
        removed[u] = true;
        for &c in &g.children[u] {
            indeg[c as usize] -= 1;
            if indeg[c as usize] == 0 {
                queue.push(c as usize);
            }
        }
    }
    (0..n)
        .find(|&i| !removed[i])
        .map(|i| g.names[i].clone())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn empty_graph_is_valid() {
        assert!(validate(MixedGraph::new()).is_ok());
    }

    #[test]
    fn fig1a_is_valid_with_expected_parents() {
        let g = fixtures::fig1a();
        // parents(R1) = {X3, R2}
        let r1 = g.vertex("R1").unwrap();
        let pa: Vec<&str> = g.parents(r1).map(|v| g.name(v)).collect();
        assert_eq!(pa, vec!["R2", "X3"]);
    }

    #[test]
    fn indicator_to_missing_edge_is_illegal() {
        let mut g = MixedGraph::new();
        let x1 = g.add_vertex("X1", VertexRole::PotentiallyMissing(1)).unwrap();
        let r1 = g.add_vertex("R1", VertexRole::MissingnessIndicator(1)).unwrap();
        let x2 = g.add_vertex("X2", VertexRole::PotentiallyMissing(2)).unwrap();
        g.add_vertex("R2", VertexRole::MissingnessIndicator(2)).unwrap();
        g.add_edge(r1, x2).unwrap();
        g.add_edge(x1, r1).ok();
        let err = validate(g).unwrap_err();
        assert!(err
            .violations
            .iter()
            .any(|v| matches!(v, Violation::IllegalEdge { from, to, .. } if from == "R1" && to == "X2")));
    }

    #[test]
    fn indicator_to_observed_edge_is_illegal() {
        let mut g = MixedGraph::new();
        g.add_vertex("X1", VertexRole::PotentiallyMissing(1)).unwrap();
        let r1 = g.add_vertex("R1", VertexRole::MissingnessIndicator(1)).unwrap();
        let o = g.add_vertex("O1", VertexRole::FullyObserved).unwrap();
        g.add_edge(r1, o).unwrap();
        assert!(validate(g).is_err());
    }

    #[test]
    fn cycle_is_detected() {
        let mut g = MixedGraph::new();
        let a = g.add_vertex("A", VertexRole::FullyObserved).unwrap();
        let b = g.add_vertex("B", VertexRole::FullyObserved).unwrap();
        g.add_edge(a, b).unwrap();
        g.add_edge(b, a).unwrap();
        let err = validate(g).unwrap_err();
        assert!(matches!(err.violations[0], Violation::CycleDetected { .. }));
    }

    #[test]
    fn missing_without_indicator_is_unpaired() {
        let mut g = MixedGraph::new();
        g.add_vertex("X1", VertexRole::PotentiallyMissing(1)).unwrap();
        let err = validate(g).unwrap_err();
        assert!(matches!(err.violations[0], Violation::UnpairedVertex { .. }));
    }

    #[test]
    fn elide_then_attach_round_trips_structure() {
        let g = fixtures::fig1a().attach_proxies();
        let elided = g.elide_proxies();
        assert!(elided.proxies().is_empty());
        let back = elided.attach_proxies();
        assert_eq!(back.vertex_count(), g.vertex_count());
        assert_eq!(back.pairs().len(), g.pairs().len());
        // Re-attachment commutes with validation: both remain valid.
        assert!(validate(back.graph().clone()).is_ok());
    }

    #[test]
    fn elide_on_proxyless_graph_is_identity() {
        let g = fixtures::fig5d();
        assert_eq!(g.elide_proxies().graph(), g.graph());
    }

    #[test]
    fn single_pair_elision_leaves_two_vertices() {
        // (X1, R1, Xp1) with X1 <-> R1: elide removes one vertex and two edges.
        let g = fixtures::fig5a().attach_proxies();
        assert_eq!(g.vertex_count(), 3);
        let e = g.elide_proxies();
        assert_eq!(e.vertex_count(), 2);
        let x = e.vertex("X1").unwrap();
        let r = e.vertex("R1").unwrap();
        assert!(e.has_biedge(x, r));
        assert_eq!(e.directed_edges().count(), 0);
    }

    #[test]
    fn ancestors_is_reflexive_transitive() {
        let g = fixtures::fig1a();
        let root = g.vertex("X1").unwrap();
        let just_root: VertexSet = [root].into_iter().collect();
        let anc = g.ancestors(&just_root);
        assert_eq!(anc, just_root);
        let all = g.ancestors(&g.resolve(["R1"]).unwrap());
        assert_eq!(g.ancestors(&all), all);
    }

    #[test]
    fn fig2b_children_of_x1_match_figure() {
        let g = fixtures::fig2b().attach_proxies();
        let x1 = g.vertex("X1").unwrap();
        let ch: Vec<&str> = g.children(x1).map(|v| g.name(v)).collect();
        assert_eq!(ch, vec!["X2", "R2", "R3", "Xp1"]);
    }

    #[test]
    fn pairing_bijection_counts_match() {
        for g in [fixtures::fig1a(), fixtures::fig2b(), fixtures::fig5d()] {
            let n_missing = g
                .vertices_where(|r| matches!(r, VertexRole::PotentiallyMissing(_)))
                .count();
            let n_ind = g
                .vertices_where(|r| matches!(r, VertexRole::MissingnessIndicator(_)))
                .count();
            assert_eq!(n_missing, n_ind);
        }
    }

    #[test]
    fn isomorphism_ignores_hidden_names() {
        let mut a = MixedGraph::new();
        let u = a.add_vertex("U", VertexRole::Hidden { cardinality: 2 }).unwrap();
        let x = a.add_vertex("A", VertexRole::FullyObserved).unwrap();
        a.add_edge(u, x).unwrap();

        let mut b = MixedGraph::new();
        let v = b.add_vertex("Uother", VertexRole::Hidden { cardinality: 2 }).unwrap();
        let y = b.add_vertex("A", VertexRole::FullyObserved).unwrap();
        b.add_edge(v, y).unwrap();

        assert!(a.is_isomorphic(&b));
        assert_ne!(a, b);
    }
}
