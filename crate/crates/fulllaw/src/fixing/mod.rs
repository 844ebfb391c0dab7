//! CADMGs, kernels and the fixing machinery: fixability, the graphical and
//! probabilistic fixing operators, districts and intrinsic-set enumeration.

mod kernel;

pub use kernel::{KernelError, TabularKernel, NORMALIZATION_TOL};

use crate::graph::{MixedGraph, Vertex, VertexSet};
use std::collections::{BTreeMap, VecDeque};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum FixError {
    #[error("`{0}` is not a random vertex")]
    NotRandom(String),
    #[error("`{0}` is not fixable")]
    NotFixable(String),
    #[error("invalid fixing sequence: stuck at `{stuck}`")]
    InvalidSequence { stuck: String },
    #[error("propensity q({vertex} | mb) is zero at some assignment")]
    DivisionByZeroPropensity { vertex: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Graph with a random/fixed vertex partition. Fixed vertices have no incoming
/// edges of either kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cadmg {
    graph: MixedGraph,
    fixed: VertexSet,
}

impl Cadmg {
    /// Wrap an ADMG with every vertex random.
    pub fn from_admg(graph: MixedGraph) -> Cadmg {
        Cadmg { graph, fixed: VertexSet::new() }
    }

    pub fn graph(&self) -> &MixedGraph {
        &self.graph
    }

    pub fn fixed(&self) -> &VertexSet {
        &self.fixed
    }

    pub fn random(&self) -> VertexSet {
        self.graph
            .vertices()
            .filter(|v| !self.fixed.contains(v))
            .collect()
    }

    pub fn is_random(&self, v: Vertex) -> bool {
        !self.fixed.contains(&v)
    }

    /// District of `v` among the random vertices.
    pub fn district_of(&self, v: Vertex) -> VertexSet {
        self.graph.district_of_within(v, &self.random())
    }

    /// Bidirected-connected components of the random vertices, deterministic order.
    pub fn districts(&self) -> Vec<VertexSet> {
        let random = self.random();
        let mut assigned = VertexSet::new();
        let mut out = Vec::new();
        for &v in &random {
            if assigned.contains(&v) {
                continue;
            }
            let d = self.graph.district_of_within(v, &random);
            assigned.extend(d.iter().copied());
            out.push(d);
        }
        out
    }

    /// Markov blanket of a random vertex: its district plus the district's
    /// parents, minus the vertex.
    pub fn markov_blanket(&self, v: Vertex) -> VertexSet {
        let dis = self.district_of(v);
        let mut out = dis.clone();
        for &d in &dis {
            out.extend(self.graph.parents(d));
        }
        out.remove(&v);
        out
    }

    /// A vertex is fixable when no other vertex is reachable from it both by a
    /// directed path and by a bidirected path. Fixed vertices have no incoming
    /// edges, so both kinds of path stay inside the random set automatically.
    pub fn is_fixable(&self, v: Vertex) -> Result<bool, FixError> {
        if !self.is_random(v) {
            return Err(FixError::NotRandom(self.graph.name(v).to_string()));
        }
        let seed: VertexSet = [v].into_iter().collect();
        let desc = self.graph.descendants(&seed);
        let dis = self.district_of(v);
        Ok(desc.intersection(&dis).all(|w| *w == v))
    }

    /// Graphical fixing: move `v` to the fixed set, deleting its incoming
    /// directed edges and all its bidirected edges.
    pub fn fix(&self, v: Vertex) -> Result<Cadmg, FixError> {
        if !self.is_fixable(v)? {
            return Err(FixError::NotFixable(self.graph.name(v).to_string()));
        }
        Ok(self.fix_unchecked(v))
    }

    fn fix_unchecked(&self, v: Vertex) -> Cadmg {
        let mut g = MixedGraph::new();
        for w in self.graph.vertices() {
            g.add_vertex(self.graph.name(w), self.graph.role(w).clone())
                .expect("names unique");
        }
        for (a, b) in self.graph.directed_edges() {
            if b != v {
                g.add_edge(a, b).expect("unique");
            }
        }
        for (a, b) in self.graph.bidirected_edges() {
            if a != v && b != v {
                g.add_biedge(a, b).expect("unique");
            }
        }
        let mut fixed = self.fixed.clone();
        fixed.insert(v);
        Cadmg { graph: g, fixed }
    }

    /// Probabilistic fixing: divide by the propensity q(v | mb(v), W).
    ///
    /// `q`'s random variables must be exactly this CADMG's random vertices.
    pub fn fix_kernel(&self, q: &TabularKernel, v: Vertex) -> Result<(TabularKernel, Cadmg), FixError> {
        if !self.is_fixable(v)? {
            return Err(FixError::NotFixable(self.graph.name(v).to_string()));
        }
        let vname = self.graph.name(v).to_string();
        let mb: Vec<String> = self
            .markov_blanket(v)
            .iter()
            .map(|&w| self.graph.name(w).to_string())
            .collect();
        // Propensity q(v | mb, W): marginalize to {v} ∪ (mb ∩ randoms), then
        // condition on the mb randoms. Context variables stay as they are.
        let mb_random: Vec<String> = mb
            .iter()
            .filter(|n| q.random_index(n).is_some())
            .cloned()
            .collect();
        let mut keep = vec![vname.clone()];
        keep.extend(mb_random.iter().cloned());
        let propensity = q.marginalize(&keep)?.condition(&mb_random).map_err(|e| match e {
            KernelError::ZeroProbabilityEvent => FixError::DivisionByZeroPropensity {
                vertex: vname.clone(),
            },
            other => FixError::Kernel(other),
        })?;

        let new_randoms: Vec<String> = q
            .randoms()
            .iter()
            .filter(|n| **n != vname)
            .cloned()
            .collect();
        let mut new_contexts: Vec<String> = q.contexts().to_vec();
        new_contexts.push(vname.clone());

        let nr_new = 1usize << new_randoms.len();
        let nc_new = 1usize << new_contexts.len();
        let mut values = vec![0.0; nr_new * nc_new];

        let v_pos = q.random_index(&vname).expect("v is random in q");
        let rest_pos: Vec<usize> = new_randoms
            .iter()
            .map(|n| q.random_index(n).expect("subset of randoms"))
            .collect();
        for ctx in 0..q.n_context_states() {
            for r in 0..q.n_random_states() {
                let joint = q.value(r, ctx);
                // Propensity value at this assignment.
                let mut assign: Vec<(&str, bool)> = Vec::with_capacity(q.randoms().len() + q.contexts().len());
                for (i, name) in q.randoms().iter().enumerate() {
                    assign.push((name.as_str(), r >> i & 1 == 1));
                }
                for (i, name) in q.contexts().iter().enumerate() {
                    assign.push((name.as_str(), ctx >> i & 1 == 1));
                }
                let denom = propensity
                    .prob(
                        &assign
                            .iter()
                            .filter(|(n, _)| {
                                propensity.random_index(n).is_some()
                                    || propensity.context_index(n).is_some()
                            })
                            .copied()
                            .collect::<Vec<_>>(),
                    )
                    .expect("assignment covers propensity");
                if denom <= 0.0 {
                    if joint > 0.0 {
                        return Err(FixError::DivisionByZeroPropensity { vertex: vname });
                    }
                    continue;
                }
                let mut new_r = 0usize;
                for (j, &i) in rest_pos.iter().enumerate() {
                    if r >> i & 1 == 1 {
                        new_r |= 1 << j;
                    }
                }
                let v_val = r >> v_pos & 1;
                let new_ctx = ctx | ((v_val as usize) << q.contexts().len());
                values[new_ctx * nr_new + new_r] += joint / denom;
            }
        }
        // Normalization per context is a theorem for nested-Markov inputs; absorb
        // float drift from the division chain, reject anything worse.
        let kernel = TabularKernel::new_renormalizing(new_randoms, new_contexts, values, 1e-6)?;
        Ok((kernel, self.fix_unchecked(v)))
    }

    /// Left-fold of graphical/probabilistic fixing over an ordered sequence.
    pub fn fix_sequence(
        &self,
        q: &TabularKernel,
        sequence: &[Vertex],
    ) -> Result<(TabularKernel, Cadmg), FixError> {
        let mut kernel = q.clone();
        let mut cadmg = self.clone();
        for &v in sequence {
            if !cadmg.is_random(v) || !cadmg.is_fixable(v)? {
                return Err(FixError::InvalidSequence {
                    stuck: cadmg.graph.name(v).to_string(),
                });
            }
            let (k, c) = cadmg.fix_kernel(&kernel, v)?;
            kernel = k;
            cadmg = c;
        }
        Ok((kernel, cadmg))
    }

    /// Graphical-only fixing of a sequence.
    pub fn fix_sequence_graph(&self, sequence: &[Vertex]) -> Result<Cadmg, FixError> {
        let mut cadmg = self.clone();
        for &v in sequence {
            if !cadmg.is_random(v) || !cadmg.is_fixable(v)? {
                return Err(FixError::InvalidSequence {
                    stuck: cadmg.graph.name(v).to_string(),
                });
            }
            cadmg = cadmg.fix_unchecked(v);
        }
        Ok(cadmg)
    }
}

/// An intrinsic set with its head, tail and one valid fixing sequence reaching it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntrinsicSet {
    pub set: VertexSet,
    pub head: VertexSet,
    pub tail: VertexSet,
    /// One valid fixing sequence for the complement of `set`.
    pub sequence: Vec<Vertex>,
}

/// Enumerate every reachable random set of `g` by memoized search over the
/// "fix any fixable vertex" transition system. Returns, per reachable set, the
/// CADMG (identical for every valid sequence) and one witnessing sequence.
pub fn reachable_sets(g: &Cadmg) -> BTreeMap<VertexSet, (Cadmg, Vec<Vertex>)> {
    let mut out: BTreeMap<VertexSet, (Cadmg, Vec<Vertex>)> = BTreeMap::new();
    let mut queue = VecDeque::new();
    out.insert(g.random(), (g.clone(), Vec::new()));
    queue.push_back(g.random());
    while let Some(set) = queue.pop_front() {
        let (cadmg, seq) = out.get(&set).expect("enqueued means stored").clone();
        for &v in &set {
            if cadmg.is_fixable(v).expect("v is random") {
                let mut next_set = set.clone();
                next_set.remove(&v);
                if out.contains_key(&next_set) {
                    continue;
                }
                let next = cadmg.fix_unchecked(v);
                let mut next_seq = seq.clone();
                next_seq.push(v);
                out.insert(next_set.clone(), (next, next_seq));
                queue.push_back(next_set);
            }
        }
    }
    out
}

/// All intrinsic sets of a CADMG: reachable sets that form a single district,
/// with head (childless members), tail, and a witnessing sequence.
///
/// The tail is the head's conditioning set in the Moebius parameter
/// q(H = 0 | T): the non-head members of the set together with the parents of
/// the set in the fixed context.
pub fn intrinsic_sets(g: &Cadmg) -> Vec<IntrinsicSet> {
    let mut out = Vec::new();
    for (set, (cadmg, seq)) in reachable_sets(g) {
        if set.is_empty() {
            continue;
        }
        let districts = cadmg.districts();
        if districts.len() != 1 || districts[0] != set {
            continue;
        }
        out.push(describe_intrinsic(&cadmg, &set, seq));
    }
    out
}

fn describe_intrinsic(cadmg: &Cadmg, set: &VertexSet, sequence: Vec<Vertex>) -> IntrinsicSet {
    let head: VertexSet = set
        .iter()
        .copied()
        .filter(|&v| cadmg.graph().children(v).next().is_none())
        .collect();
    let mut tail: VertexSet = set.difference(&head).copied().collect();
    tail.extend(cadmg.graph().parents_of_set(set));
    IntrinsicSet {
        set: set.clone(),
        head,
        tail,
        sequence,
    }
}
