//! Brute-force ground truth: generate random full laws Markov to a graph via
//! explicit latent DAGs, marginalize to observed laws, verify identified
//! verdicts numerically, and search for counterexample pairs certifying
//! non-identified ones.

pub mod exact;

use crate::graph::{
    validate, MissingDataGraph, MixedGraph, Vertex, VertexRole, VertexSet,
};
use crate::odds_ratio::{
    recover_full_law, reconstruct_mechanism, FullLawTable, ObservedLawTable, OrError,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum OracleError {
    #[error("graph is not identified; nothing to verify")]
    NotIdentifiedGraph,
    #[error(transparent)]
    Reconstruction(#[from] OrError),
}

/// Replace every bidirected edge by a fresh hidden common cause.
///
/// `U_e -> A`, `U_e -> B` for each `e = A <-> B`; projecting the result back
/// onto the non-hidden vertices returns the input graph.
pub fn canonical_latent_dag(g: &MissingDataGraph) -> MissingDataGraph {
    let mut out = MixedGraph::new();
    for v in g.vertices() {
        out.add_vertex(g.name(v), g.role(v).clone()).expect("unique");
    }
    for (a, b) in g.directed_edges() {
        let (na, nb) = (out.vertex(g.name(a)).unwrap(), out.vertex(g.name(b)).unwrap());
        out.add_edge(na, nb).expect("unique");
    }
    for (a, b) in g.bidirected_edges() {
        let name = format!("U_{}_{}", g.name(a), g.name(b));
        let u = out
            .add_vertex(name, VertexRole::Hidden { cardinality: 2 })
            .expect("confounder names fresh");
        let (na, nb) = (out.vertex(g.name(a)).unwrap(), out.vertex(g.name(b)).unwrap());
        out.add_edge(u, na).expect("unique");
        out.add_edge(u, nb).expect("unique");
    }
    validate(out).expect("latent expansion preserves validity")
}

/// Conditional probability tables of a latent DAG, one row per parent
/// assignment, states clamped into [0.05, 0.95] for positivity.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentDagTables {
    /// Topological order over all non-proxy vertices (hidden included).
    pub order: Vec<String>,
    pub cardinality: Vec<usize>,
    pub parents: Vec<Vec<usize>>,
    /// tables[v][row * card + state]; rows index parent states mixed-radix in
    /// `parents[v]` order.
    pub tables: Vec<Vec<f64>>,
}

impl LatentDagTables {
    pub fn from_graph(dag: &MissingDataGraph) -> Self {
        let e = dag.elide_proxies();
        let topo: Vec<Vertex> = e
            .topological_order()
            .expect("validated graphs are acyclic");
        let order: Vec<String> = topo.iter().map(|&v| e.name(v).to_string()).collect();
        let pos = |v: Vertex| topo.iter().position(|&w| w == v).unwrap();
        let cardinality: Vec<usize> = topo
            .iter()
            .map(|&v| match e.role(v) {
                VertexRole::Hidden { cardinality } => *cardinality,
                _ => 2,
            })
            .collect();
        let parents: Vec<Vec<usize>> = topo
            .iter()
            .map(|&v| {
                let mut ps: Vec<usize> = e.parents(v).map(pos).collect();
                ps.sort_unstable();
                ps
            })
            .collect();
        let tables = vec![Vec::new(); topo.len()];
        LatentDagTables { order, cardinality, parents, tables }
    }

    pub fn n_rows(&self, v: usize) -> usize {
        self.parents[v]
            .iter()
            .map(|&p| self.cardinality[p])
            .product()
    }

    /// Sample every conditional row, entries in [0.05, 0.95], then normalized.
    pub fn sample(&mut self, rng: &mut impl Rng) {
        for v in 0..self.order.len() {
            let card = self.cardinality[v];
            let rows = self.n_rows(v);
            let mut table = Vec::with_capacity(rows * card);
            for _ in 0..rows {
                if card == 2 {
                    let p0 = rng.gen_range(0.05..=0.95);
                    table.push(p0);
                    table.push(1.0 - p0);
                } else {
                    let mut row: Vec<f64> =
                        (0..card).map(|_| rng.gen_range(0.05..=0.95)).collect();
                    let sum: f64 = row.iter().sum();
                    for x in &mut row {
                        *x /= sum;
                    }
                    table.extend(row);
                }
            }
            self.tables[v] = table;
        }
    }

    fn row_of(&self, v: usize, state: &[usize]) -> usize {
        let mut row = 0usize;
        for &p in &self.parents[v] {
            row = row * self.cardinality[p] + state[p];
        }
        row
    }

    /// Multiply the factorization out and marginalize the hidden vertices,
    /// producing the full law over {O, X1, R}.
    pub fn full_law(&self, g: &MissingDataGraph) -> FullLawTable {
        let e = g.elide_proxies();
        let pairs = e.pairs();
        let o_names: Vec<String> = {
            let mut v: Vec<String> = e
                .fully_observed()
                .iter()
                .map(|&o| e.name(o).to_string())
                .collect();
            v.sort();
            v
        };
        let x1_names: Vec<String> = pairs.iter().map(|p| e.name(p.missing).to_string()).collect();
        let r_names: Vec<String> = pairs.iter().map(|p| e.name(p.indicator).to_string()).collect();
        let n = self.order.len();
        let (no, k) = (o_names.len(), pairs.len());
        let mut probs = vec![0.0; 1usize << (no + 2 * k)];

        // Mixed-radix enumeration over all vertices including hidden.
        let mut state = vec![0usize; n];
        let slot_of = |name: &str| self.order.iter().position(|m| m == name).unwrap();
        let o_slots: Vec<usize> = o_names.iter().map(|s| slot_of(s)).collect();
        let x_slots: Vec<usize> = x1_names.iter().map(|s| slot_of(s)).collect();
        let r_slots: Vec<usize> = r_names.iter().map(|s| slot_of(s)).collect();
        loop {
            let mut mass = 1.0;
            for v in 0..n {
                let row = self.row_of(v, &state);
                mass *= self.tables[v][row * self.cardinality[v] + state[v]];
            }
            let mut o_bits = 0usize;
            for (i, &s) in o_slots.iter().enumerate() {
                o_bits |= state[s] << i;
            }
            let mut x_bits = 0usize;
            for (i, &s) in x_slots.iter().enumerate() {
                x_bits |= state[s] << i;
            }
            let mut r_bits = 0usize;
            for (i, &s) in r_slots.iter().enumerate() {
                r_bits |= state[s] << i;
            }
            probs[o_bits | x_bits << no | r_bits << (no + k)] += mass;

            // Increment mixed-radix counter.
            let mut carry = 0;
            while carry < n {
                state[carry] += 1;
                if state[carry] < self.cardinality[carry] {
                    break;
                }
                state[carry] = 0;
                carry += 1;
            }
            if carry == n {
                break;
            }
        }
        FullLawTable::new(o_names, x1_names, r_names, probs)
    }
}

/// Sample a random positive full law Markov to `g`, deterministic in the seed.
///
/// Bidirected edges go through the canonical latent DAG with the given hidden
/// cardinality (applied to the fresh confounders).
pub fn random_full_law(g: &MissingDataGraph, seed: u64, hidden_card: usize) -> FullLawTable {
    let mut latent = canonical_latent_dag(g);
    if hidden_card != 2 {
        // Re-declare the fresh confounders at the requested cardinality.
        let mut rebuilt = MixedGraph::new();
        for v in latent.vertices() {
            let role = match latent.role(v) {
                VertexRole::Hidden { .. } if latent.name(v).starts_with("U_") => {
                    VertexRole::Hidden { cardinality: hidden_card }
                }
                other => other.clone(),
            };
            rebuilt.add_vertex(latent.name(v), role).unwrap();
        }
        for (a, b) in latent.directed_edges() {
            let (na, nb) = (
                rebuilt.vertex(latent.name(a)).unwrap(),
                rebuilt.vertex(latent.name(b)).unwrap(),
            );
            rebuilt.add_edge(na, nb).unwrap();
        }
        latent = validate(rebuilt).expect("cardinality change preserves validity");
    }
    let mut tables = LatentDagTables::from_graph(&latent);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tables.sample(&mut rng);
    tables.full_law(g)
}

/// Push a full law through the proxy determinism: X_i = X1_i when R_i = 1,
/// placeholder otherwise; the X1 coordinate is summed out within each stratum.
pub fn observe(full: &FullLawTable) -> ObservedLawTable {
    let k = full.n_pairs();
    let no = full.o.len();
    let x_names: Vec<String> = full.x1.iter().map(|n| crate::graph::proxy_name_for(n)).collect();
    let mut probs = vec![0.0; 1usize << (no + 2 * k)];
    for o_bits in 0..(1usize << no) {
        for x_bits in 0..(1usize << k) {
            for r_bits in 0..(1usize << k) {
                let mass = full.mass(o_bits, x_bits, r_bits);
                let seen = x_bits & r_bits; // unobserved coordinates collapse to 0
                probs[o_bits | seen << no | r_bits << (no + k)] += mass;
            }
        }
    }
    ObservedLawTable::new(full.o.clone(), x_names, full.r.clone(), probs)
}

/// Report of a numeric verification run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub trials: u32,
    pub tolerance: f64,
    pub max_mechanism_error: f64,
    pub max_full_law_error: f64,
    pub failures: u32,
    pub recipe_text: Vec<String>,
}

/// For each trial: generate a law, observe it, reconstruct the mechanism and
/// the full law, and compare against the generating truth.
pub fn verify_identified(
    g: &MissingDataGraph,
    trials: u32,
    seed: u64,
    tolerance: f64,
) -> Result<VerifyReport, OracleError> {
    if !crate::identification::decide_full_law(g).is_identified() {
        return Err(OracleError::NotIdentifiedGraph);
    }
    let mut max_mech: f64 = 0.0;
    let mut max_full: f64 = 0.0;
    let mut failures = 0u32;
    let mut recipe_text = Vec::new();
    for trial in 0..trials {
        // Per-trial seeding keeps trials independent of scheduling.
        let law = random_full_law(g, mix_seed(seed, trial), 2);
        let observed = observe(&law);
        let reconstruction = reconstruct_mechanism(&observed, g)?;
        let truth = law.mechanism()?;
        let mech_err = reconstruction.mechanism.max_abs_diff(&truth);
        let recovered = recover_full_law(&observed, &reconstruction.mechanism)?;
        let full_err = recovered.max_abs_diff(&law);
        max_mech = max_mech.max(mech_err);
        max_full = max_full.max(full_err);
        if mech_err > tolerance || full_err > tolerance {
            failures += 1;
        }
        if trial == 0 {
            recipe_text = reconstruction.recipe.lines.clone();
        }
    }
    Ok(VerifyReport {
        trials,
        tolerance,
        max_mechanism_error: max_mech,
        max_full_law_error: max_full,
        failures,
        recipe_text,
    })
}

fn mix_seed(seed: u64, trial: u32) -> u64 {
    // splitmix-style mixing keeps per-trial streams disjoint.
    let mut z = seed ^ (0x9e3779b97f4a7c15u64.wrapping_mul(trial as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A pair of full laws with identical observed laws.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterexamplePair {
    pub law_a: FullLawTable,
    pub law_b: FullLawTable,
    /// Sup distance between the observed laws (0 when certified exactly).
    pub observed_sup_distance: f64,
    pub full_law_sup_distance: f64,
    /// Whether the pair was certified with exact rational arithmetic.
    pub exact: bool,
}

/// Outcome of the counterexample search.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CounterexampleOutcome {
    Found(Box<CounterexamplePair>),
    /// Search ran out of budget. Absence of a found pair proves nothing.
    BudgetExhausted { directions_tried: u64 },
}

/// Search for two full laws Markov to `g` that agree exactly on the observed
/// law and differ on the full law by more than 0.01 in sup norm.
///
/// The search perturbs one conditional table of the canonical latent DAG at a
/// time: the observed law is linear in a single table, so its exact rational
/// null space yields perturbation directions that hold every observed cell
/// fixed while moving the full law. On a graph whose witness is a single
/// bidirected edge this recovers the classical two-point family over the
/// hidden confounder.
pub fn find_counterexample(g: &MissingDataGraph, seed: u64, budget: u64) -> CounterexampleOutcome {
    exact::null_space_search(g, seed, budget)
}

/// Exact conditional-independence check on a table: A ⫫ B | Z for all
/// assignments, up to `tol` on cross-differences.
pub fn table_satisfies_ci(
    law: &FullLawTable,
    a: &str,
    b: &str,
    z: &[String],
    tol: f64,
) -> bool {
    let vars: Vec<String> = law
        .o
        .iter()
        .chain(law.x1.iter())
        .chain(law.r.iter())
        .cloned()
        .collect();
    let pos = |name: &str| vars.iter().position(|v| v == name).expect("law variable");
    let (pa, pb) = (pos(a), pos(b));
    let pz: Vec<usize> = z.iter().map(|n| pos(n)).collect();
    let n = vars.len();
    // p(a, b, z) aggregated over everything else.
    let mut cells = std::collections::BTreeMap::<(usize, usize, usize), f64>::new();
    for idx in 0..(1usize << n) {
        let av = idx >> pa & 1;
        let bv = idx >> pb & 1;
        let mut zv = 0usize;
        for (i, &p) in pz.iter().enumerate() {
            zv |= (idx >> p & 1) << i;
        }
        *cells.entry((av, bv, zv)).or_insert(0.0) += law.probs[idx];
    }
    for zv in 0..(1usize << pz.len()) {
        let at = |a: usize, b: usize| cells.get(&(a, b, zv)).copied().unwrap_or(0.0);
        // p(a,b|z) p(z) == p(a,z) p(b,z): cross-multiplied form avoids division.
        let p00 = at(0, 0);
        let p01 = at(0, 1);
        let p10 = at(1, 0);
        let p11 = at(1, 1);
        if (p00 * p11 - p01 * p10).abs() > tol {
            return false;
        }
    }
    true
}

/// Check that every m-separation of the graph holds as an exact CI in the law
/// (singleton pairs, every conditioning set over the remaining variables).
pub fn law_respects_graph(law: &FullLawTable, g: &MissingDataGraph, tol: f64) -> bool {
    let e = g.elide_proxies();
    let verts: Vec<Vertex> = e.vertices().collect();
    for (i, &a) in verts.iter().enumerate() {
        for &b in verts.iter().skip(i + 1) {
            let rest: Vec<Vertex> = verts
                .iter()
                .copied()
                .filter(|&v| v != a && v != b)
                .collect();
            for z_bits in 0..(1usize << rest.len()) {
                let z: VertexSet = rest
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| z_bits >> j & 1 == 1)
                    .map(|(_, &v)| v)
                    .collect();
                let separated = crate::separation::is_m_separated(
                    e.graph(),
                    &[a].into_iter().collect(),
                    &[b].into_iter().collect(),
                    &z,
                )
                .expect("valid query");
                if separated {
                    let z_names: Vec<String> =
                        z.iter().map(|&v| e.name(v).to_string()).collect();
                    if !table_satisfies_ci(law, e.name(a), e.name(b), &z_names, tol) {
                        return false;
                    }
                }
            }
        }
    }
    true
}
