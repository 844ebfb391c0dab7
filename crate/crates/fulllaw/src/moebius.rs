//! Binary Moebius parameterization of nested Markov models.
//!
//! Parameters are q(H = 0 | T) for every intrinsic head/tail pair. For observed
//! laws of missing-data graphs, an entry whose head contains a proxy and whose
//! tail contains the matching indicator is restricted to indicator = 1, so that
//! tail coordinate contributes no expansion factor. Counting such entries per
//! tail assignment reproduces the paper-trail arithmetic of the completeness
//! proofs; `moebius_invert` reconstructs a joint from parameter values.

use crate::fixing::{intrinsic_sets, Cadmg, FixError, KernelError, TabularKernel};
use crate::graph::{MissingDataGraph, MixedGraph, Vertex, VertexRole, VertexSet};
use crate::projection::observed_law_graph;
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum MoebiusError {
    #[error("chain length must be positive")]
    NonPositive,
    #[error("inconsistent parameters: joint mass {value} at assignment {assignment}")]
    InconsistentParameters { assignment: usize, value: f64 },
    #[error("parameterization does not match graph (missing entry for {0:?})")]
    MissingEntry(Vec<String>),
    #[error("pinned entries cannot be inverted")]
    PinnedInversion,
    #[error(transparent)]
    Fix(#[from] FixError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// One intrinsic head/tail pair with its restriction set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoebiusEntry {
    /// The intrinsic set, sorted by name.
    pub set: Vec<String>,
    /// Childless members of the set in the reached CADMG.
    pub head: Vec<String>,
    /// Conditioning set of the parameter: non-head members plus parents of the set.
    pub tail: Vec<String>,
    /// Tail indicators pinned to 1 because the matching proxy sits in the head.
    pub pinned: Vec<String>,
    /// One valid fixing sequence for the complement of `set`.
    pub sequence: Vec<String>,
}

impl MoebiusEntry {
    /// Number of scalar parameters this entry expands to: one per assignment of
    /// the unpinned tail.
    pub fn count(&self) -> u64 {
        1u64 << (self.tail.len() - self.pinned.len())
    }
}

/// All Moebius entries of a graph, with the total count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoebiusParameterization {
    pub entries: Vec<MoebiusEntry>,
    /// Canonical rendering of the parameterized graph, for report provenance.
    pub graph_fingerprint: String,
}

impl MoebiusParameterization {
    pub fn parameter_count(&self) -> u64 {
        self.entries.iter().map(MoebiusEntry::count).sum()
    }

    pub fn entry_for(&self, set: &[String]) -> Option<&MoebiusEntry> {
        self.entries.iter().find(|e| e.set == set)
    }
}

fn names(g: &MixedGraph, s: &VertexSet) -> Vec<String> {
    let mut v: Vec<String> = s.iter().map(|&x| g.name(x).to_string()).collect();
    v.sort();
    v
}

fn fingerprint(g: &MixedGraph) -> String {
    crate::graph::render_graph(g)
}

/// Enumerate the Moebius entries of an ADMG (or observed-law graph when
/// `apply_missingness_restriction` is set).
pub fn parameterize_graph(g: &MixedGraph, apply_missingness_restriction: bool) -> MoebiusParameterization {
    let cadmg = Cadmg::from_admg(g.clone());
    let mut entries = Vec::new();
    for intrinsic in intrinsic_sets(&cadmg) {
        let head = names(g, &intrinsic.head);
        let tail = names(g, &intrinsic.tail);
        let mut pinned = Vec::new();
        if apply_missingness_restriction {
            for &h in &intrinsic.head {
                if let VertexRole::Proxy(i) = g.role(h) {
                    for &t in &intrinsic.tail {
                        if *g.role(t) == VertexRole::MissingnessIndicator(*i) {
                            pinned.push(g.name(t).to_string());
                        }
                    }
                }
            }
            pinned.sort();
        }
        entries.push(MoebiusEntry {
            set: names(g, &intrinsic.set),
            head,
            tail,
            pinned,
            sequence: intrinsic.sequence.iter().map(|&v| g.name(v).to_string()).collect(),
        });
    }
    entries.sort_by(|a, b| (a.set.len(), &a.set).cmp(&(b.set.len(), &b.set)));
    MoebiusParameterization {
        entries,
        graph_fingerprint: fingerprint(g),
    }
}

/// Moebius entries of the proxy-elided full-law ADMG over {O, X1, R}.
pub fn full_law_parameterization(g: &MissingDataGraph) -> MoebiusParameterization {
    parameterize_graph(g.elide_proxies().graph(), false)
}

/// Moebius entries of the observed-law graph over {O, R, X}, with the
/// indicator-pinning restriction. The count is an upper bound on the observed
/// law's model dimension, which is all the completeness argument needs.
pub fn observed_law_parameterization(g: &MissingDataGraph) -> MoebiusParameterization {
    parameterize_graph(&observed_law_graph(g), true)
}

/// Parameter count of a bidirected chain of length `k`: k(k+1)/2.
pub fn count_bidirected_chain(k: u64) -> Result<u64, MoebiusError> {
    if k == 0 {
        return Err(MoebiusError::NonPositive);
    }
    Ok(k * (k + 1) / 2)
}

/// Parameter values attached to a parameterization: per entry, q(H=0 | T=t)
/// indexed by tail bits in the entry's sorted tail order.
#[derive(Debug, Clone, PartialEq)]
pub struct MoebiusValues {
    pub parameterization: MoebiusParameterization,
    pub tables: Vec<Vec<f64>>,
}

impl MoebiusValues {
    fn value(&self, entry_idx: usize, tail_bits: usize) -> f64 {
        self.tables[entry_idx][tail_bits]
    }
}

/// Read every Moebius parameter off a joint distribution by fixing each
/// intrinsic set's complement and evaluating q(H = 0 | T).
///
/// `joint`'s variables must be exactly the vertices of `g` (an ADMG with every
/// vertex random).
pub fn extract_parameters(joint: &TabularKernel, g: &MixedGraph) -> Result<MoebiusValues, MoebiusError> {
    let parameterization = parameterize_graph(g, false);
    let cadmg = Cadmg::from_admg(g.clone());
    let mut tables = Vec::with_capacity(parameterization.entries.len());
    for entry in &parameterization.entries {
        let sequence: Vec<Vertex> = entry
            .sequence
            .iter()
            .map(|n| g.vertex(n).expect("sequence names come from g"))
            .collect();
        let (kernel, _) = cadmg.fix_sequence(joint, &sequence)?;
        // Condition on the non-head members of the set; the remaining tail names
        // are contexts of the kernel (the fixed complement).
        let non_head: Vec<String> = entry
            .set
            .iter()
            .filter(|n| !entry.head.contains(n))
            .cloned()
            .collect();
        let conditional = if non_head.is_empty() {
            kernel
        } else {
            kernel.condition(&non_head)?
        };
        let mut table = vec![0.0; 1usize << entry.tail.len()];
        for (tail_bits, slot) in table.iter_mut().enumerate() {
            let mut assignment: Vec<(&str, bool)> = Vec::new();
            for h in &entry.head {
                assignment.push((h.as_str(), false));
            }
            for (i, t) in entry.tail.iter().enumerate() {
                assignment.push((t.as_str(), tail_bits >> i & 1 == 1));
            }
            // Context coordinates that are not tail members are irrelevant for a
            // nested Markov law; evaluate them at zero.
            for c in conditional.contexts() {
                if !entry.tail.contains(c) {
                    assignment.push((c.as_str(), false));
                }
            }
            *slot = conditional.prob(&assignment)?;
        }
        tables.push(table);
    }
    Ok(MoebiusValues { parameterization, tables })
}

/// Joint reconstruction from Moebius parameter values.
///
/// Evaluates the nested factorization recursively: the joint is the product of
/// district kernels; a district kernel value is an inclusion-exclusion over
/// head zero-events, each of which either is a stored parameter (times the
/// value of the margin over the non-head members) or reduces to the kernel of
/// a strictly smaller reachable set.
pub fn moebius_invert(values: &MoebiusValues, g: &MixedGraph) -> Result<TabularKernel, MoebiusError> {
    if values.parameterization.entries.iter().any(|e| !e.pinned.is_empty()) {
        return Err(MoebiusError::PinnedInversion);
    }
    let inverter = Inverter::new(values, g)?;
    let vars: Vec<String> = {
        let mut v: Vec<String> = g.vertices().map(|x| g.name(x).to_string()).collect();
        v.sort();
        v
    };
    let n = vars.len();
    let mut probs = vec![0.0; 1usize << n];
    let all_mask: u64 = (1u64 << g.vertex_count()) - 1;
    let mut memo = HashMap::new();
    for (bits, slot) in probs.iter_mut().enumerate() {
        // Map assignment from sorted-name order onto vertex-index order.
        let mut x: u64 = 0;
        for (i, name) in vars.iter().enumerate() {
            if bits >> i & 1 == 1 {
                x |= 1u64 << g.vertex(name).expect("vars from g").0;
            }
        }
        let p = inverter.kernel_value(all_mask, x, &mut memo);
        if p < -1e-9 {
            return Err(MoebiusError::InconsistentParameters {
                assignment: bits,
                value: p,
            });
        }
        *slot = p.max(0.0);
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(MoebiusError::InconsistentParameters {
            assignment: 0,
            value: total,
        });
    }
    for p in &mut probs {
        *p /= total;
    }
    Ok(TabularKernel::joint(vars, probs)?)
}

struct Inverter<'a> {
    values: &'a MoebiusValues,
    g: &'a MixedGraph,
    /// Reachable set -> its CADMG.
    reachable: BTreeMap<VertexSet, Cadmg>,
    /// Entry lookup by set mask.
    entry_by_mask: HashMap<u64, usize>,
}

impl<'a> Inverter<'a> {
    fn new(values: &'a MoebiusValues, g: &'a MixedGraph) -> Result<Self, MoebiusError> {
        let reachable = crate::fixing::reachable_sets(&Cadmg::from_admg(g.clone()))
            .into_iter()
            .map(|(set, (cadmg, _))| (set, cadmg))
            .collect();
        let mut entry_by_mask = HashMap::new();
        for (i, e) in values.parameterization.entries.iter().enumerate() {
            entry_by_mask.insert(Self::mask_of_names(g, &e.set), i);
        }
        Ok(Inverter { values, g, reachable, entry_by_mask })
    }

    fn mask_of_names(g: &MixedGraph, names: &[String]) -> u64 {
        names
            .iter()
            .map(|n| 1u64 << g.vertex(n).expect("names from g").0)
            .fold(0, |a, b| a | b)
    }

    fn set_of_mask(&self, mask: u64) -> VertexSet {
        self.g.vertices().filter(|v| mask >> v.0 & 1 == 1).collect()
    }

    /// q_M evaluated at assignment `x` (bit v.0 = value of vertex v).
    fn kernel_value(&self, m: u64, x: u64, memo: &mut HashMap<(u64, u64), f64>) -> f64 {
        if m == 0 {
            return 1.0;
        }
        // Assignment bits outside M and its parents cannot matter.
        let set = self.set_of_mask(m);
        let mut relevant = m;
        for &v in &set {
            for p in self.g.parents(v) {
                relevant |= 1u64 << p.0;
            }
        }
        let key = (m, x & relevant);
        if let Some(&v) = memo.get(&key) {
            return v;
        }
        let cadmg = self
            .reachable
            .get(&set)
            .unwrap_or_else(|| panic!("set {:?} not reachable", names(self.g, &set)));
        let mut product = 1.0;
        for district in cadmg.districts() {
            let d_mask = district.iter().fold(0u64, |a, v| a | (1u64 << v.0));
            product *= self.intrinsic_value(d_mask, x, memo);
        }
        memo.insert(key, product);
        product
    }

    /// q_S(x_S | context), S intrinsic (a district of a reachable graph).
    fn intrinsic_value(&self, s: u64, x: u64, memo: &mut HashMap<(u64, u64), f64>) -> f64 {
        let set = self.set_of_mask(s);
        let cadmg = self
            .reachable
            .get(&set)
            .unwrap_or_else(|| panic!("intrinsic candidate {:?} not reachable", names(self.g, &set)));
        let head: Vec<Vertex> = set
            .iter()
            .copied()
            .filter(|&v| cadmg.graph().children(v).next().is_none())
            .collect();
        let head_mask = head.iter().fold(0u64, |a, v| a | (1u64 << v.0));
        let ones: Vec<Vertex> = head.iter().copied().filter(|&v| x >> v.0 & 1 == 1).collect();
        let zeros_mask = head_mask & !x;
        let mut total = 0.0;
        for a_bits in 0..(1usize << ones.len()) {
            let mut b_mask = zeros_mask;
            let mut parity = 1.0;
            for (i, &v) in ones.iter().enumerate() {
                if a_bits >> i & 1 == 1 {
                    b_mask |= 1u64 << v.0;
                    parity = -parity;
                }
            }
            total += parity * self.zero_event(s, head_mask, b_mask, x, memo);
        }
        total
    }

    /// q_S(X_B = 0, X_{S\H} = x | context), marginalizing H \ B.
    fn zero_event(
        &self,
        s: u64,
        head_mask: u64,
        b_mask: u64,
        x: u64,
        memo: &mut HashMap<(u64, u64), f64>,
    ) -> f64 {
        if b_mask == head_mask {
            // Stored parameter times the margin over the non-head members.
            let idx = *self
                .entry_by_mask
                .get(&s)
                .unwrap_or_else(|| panic!("no entry for intrinsic set mask {s:#b}"));
            let entry = &self.values.parameterization.entries[idx];
            let mut tail_bits = 0usize;
            for (i, t) in entry.tail.iter().enumerate() {
                let v = self.g.vertex(t).expect("tail names from g");
                if x >> v.0 & 1 == 1 {
                    tail_bits |= 1 << i;
                }
            }
            let nu = self.values.value(idx, tail_bits);
            nu * self.kernel_value(s & !head_mask, x, memo)
        } else {
            // Marginalize the head vertices outside B (childless, so fixable):
            // the remaining set is reachable and strictly smaller.
            let m = (s & !head_mask) | b_mask;
            self.kernel_value(m, x & !b_mask, memo)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn fig5a_full_law_has_three_parameters() {
        let p = full_law_parameterization(&fixtures::fig5a());
        assert_eq!(p.parameter_count(), 3);
    }

    #[test]
    fn fig5a_observed_law_has_two_parameters() {
        let p = observed_law_parameterization(&fixtures::fig5a());
        assert_eq!(p.parameter_count(), 2);
    }

    #[test]
    fn fig5d_counts_are_7_and_6() {
        let g = fixtures::fig5d();
        assert_eq!(full_law_parameterization(&g).parameter_count(), 7);
        assert_eq!(observed_law_parameterization(&g).parameter_count(), 6);
    }

    #[test]
    fn fig5e_counts_are_7_and_6() {
        let g = fixtures::fig5e();
        assert_eq!(full_law_parameterization(&g).parameter_count(), 7);
        assert_eq!(observed_law_parameterization(&g).parameter_count(), 6);
    }

    #[test]
    fn single_observed_vertex_has_one_parameter() {
        let mut g = MixedGraph::new();
        g.add_vertex("A", VertexRole::FullyObserved).unwrap();
        let mdg = crate::graph::validate(g).unwrap();
        assert_eq!(full_law_parameterization(&mdg).parameter_count(), 1);
        assert_eq!(observed_law_parameterization(&mdg).parameter_count(), 1);
    }

    #[test]
    fn chain_formula_and_enumeration_agree() {
        assert_eq!(count_bidirected_chain(1).unwrap(), 1);
        assert_eq!(count_bidirected_chain(3).unwrap(), 6);
        assert_eq!(count_bidirected_chain(5).unwrap(), 15);
        assert!(count_bidirected_chain(0).is_err());
        for k in 1..=6u64 {
            let mut g = MixedGraph::new();
            let vs: Vec<Vertex> = (0..k)
                .map(|i| g.add_vertex(format!("V{i}"), VertexRole::FullyObserved).unwrap())
                .collect();
            for w in vs.windows(2) {
                g.add_biedge(w[0], w[1]).unwrap();
            }
            let p = parameterize_graph(&g, false);
            assert_eq!(p.parameter_count(), count_bidirected_chain(k).unwrap());
        }
    }

    #[test]
    fn counts_invariant_under_relabeling() {
        let g = fixtures::fig5d();
        let mut renamed = MixedGraph::new();
        // Same structure, scrambled names (pair indices preserved).
        let m1 = renamed.add_vertex("Alpha", VertexRole::PotentiallyMissing(0)).unwrap();
        renamed.add_vertex("Beta", VertexRole::MissingnessIndicator(0)).unwrap();
        let m2 = renamed.add_vertex("Gamma", VertexRole::PotentiallyMissing(1)).unwrap();
        let r2 = renamed.add_vertex("Delta", VertexRole::MissingnessIndicator(1)).unwrap();
        renamed.add_edge(m1, m2).unwrap();
        // fig5d has R1 <-> X2; here indicator of pair 0 is Beta.
        let beta = renamed.vertex("Beta").unwrap();
        renamed.add_biedge(beta, m2).unwrap();
        let _ = r2;
        let renamed = crate::graph::validate(renamed).unwrap();
        assert_eq!(
            full_law_parameterization(&g).parameter_count(),
            full_law_parameterization(&renamed).parameter_count()
        );
        assert_eq!(
            observed_law_parameterization(&g).parameter_count(),
            observed_law_parameterization(&renamed).parameter_count()
        );
    }

    #[test]
    fn fig6_catalog_counts() {
        use crate::fixtures::Fig6Form;
        for form in [Fig6Form::A, Fig6Form::B, Fig6Form::C, Fig6Form::D] {
            for span in 0..=4usize {
                let Some((g, companions)) = fixtures::fig6(form, span) else {
                    continue;
                };
                let s = span as u64;
                let expected_full = (s + 2) * (s + 3) / 2 + companions as u64;
                let expected_obs = expected_full - 1;
                assert_eq!(
                    full_law_parameterization(&g).parameter_count(),
                    expected_full,
                    "full count, form {form:?} span {span}"
                );
                assert_eq!(
                    observed_law_parameterization(&g).parameter_count(),
                    expected_obs,
                    "observed count, form {form:?} span {span}"
                );
            }
        }
    }

    #[test]
    fn dag_inversion_is_product_factorization() {
        // A -> B: parameters are q(A=0), q(B=0|A); inversion must reproduce the joint.
        let mut g = MixedGraph::new();
        let a = g.add_vertex("A", VertexRole::FullyObserved).unwrap();
        let b = g.add_vertex("B", VertexRole::FullyObserved).unwrap();
        g.add_edge(a, b).unwrap();
        let joint = TabularKernel::joint(
            vec!["A".into(), "B".into()],
            vec![0.3 * 0.8, 0.7 * 0.4, 0.3 * 0.2, 0.7 * 0.6],
        )
        .unwrap();
        let values = extract_parameters(&joint, &g).unwrap();
        let back = moebius_invert(&values, &g).unwrap();
        assert!(back.max_abs_diff(&joint) < 1e-12);
    }

    #[test]
    fn fig5a_inversion_matches_hidden_variable_algebra() {
        // Table-style construction: p(U=0)=a, p(R1=0|U)=b,c, p(X1=0|U)=d,e.
        let (a, b, c, d, e) = (0.4, 0.3, 0.6, 0.2, 0.7);
        let mut probs = vec![0.0; 4];
        // order sorted: ["R1", "X1"]; bit 0 = R1, bit 1 = X1.
        for r in 0..2 {
            for xv in 0..2 {
                let mut mass = 0.0;
                for u in 0..2 {
                    let pu = if u == 0 { a } else { 1.0 - a };
                    let pr = match (u, r) {
                        (0, 0) => b,
                        (0, _) => 1.0 - b,
                        (_, 0) => c,
                        _ => 1.0 - c,
                    };
                    let px = match (u, xv) {
                        (0, 0) => d,
                        (0, _) => 1.0 - d,
                        (_, 0) => e,
                        _ => 1.0 - e,
                    };
                    mass += pu * pr * px;
                }
                probs[(xv << 1) | r] = mass;
            }
        }
        let joint = TabularKernel::joint(vec!["R1".into(), "X1".into()], probs).unwrap();
        let g = fixtures::fig5a().elide_proxies().graph().clone();
        let values = extract_parameters(&joint, &g).unwrap();
        // q(X1=0) = a*d + (1-a)*e, q(R1=0) = a*b + (1-a)*c, q(X1=0,R1=0) = a*b*d + (1-a)*c*e.
        let p = &values.parameterization;
        for (i, entry) in p.entries.iter().enumerate() {
            let expected = match entry.set.len() {
                1 if entry.set[0] == "X1" => a * d + (1.0 - a) * e,
                1 => a * b + (1.0 - a) * c,
                _ => a * b * d + (1.0 - a) * c * e,
            };
            assert!((values.tables[i][0] - expected).abs() < 1e-12, "entry {entry:?}");
        }
        let back = moebius_invert(&values, &g).unwrap();
        assert!(back.max_abs_diff(&joint) < 1e-10);
    }

    #[test]
    fn inconsistent_parameters_are_rejected() {
        // X <-> R with q(X=0)=q(R=0)=0.1 but q(X=0,R=0)=0.5 forces negative mass.
        let g = fixtures::fig5a().elide_proxies().graph().clone();
        let parameterization = parameterize_graph(&g, false);
        let tables: Vec<Vec<f64>> = parameterization
            .entries
            .iter()
            .map(|e| match e.set.len() {
                1 => vec![0.1],
                _ => vec![0.5],
            })
            .collect();
        let values = MoebiusValues { parameterization, tables };
        assert!(matches!(
            moebius_invert(&values, &g),
            Err(MoebiusError::InconsistentParameters { .. })
        ));
    }
}
