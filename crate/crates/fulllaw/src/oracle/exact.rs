//! Exact-rational counterexample certification.
//!
//! The observed law is an affine function of any single conditional table of
//! the canonical latent DAG (all other tables held fixed). Directions in the
//! exact null space of that affine map keep every observed cell fixed while
//! moving the full law; a step along one, sized to respect the probability
//! bounds, yields a pair of full laws that agree on the observed law exactly.

use super::{CounterexampleOutcome, CounterexamplePair};
use crate::graph::MissingDataGraph;
use crate::odds_ratio::FullLawTable;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Rat = BigRational;

fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Rational copy of the latent-DAG conditional tables.
#[derive(Clone)]
struct RatTables {
    order: Vec<String>,
    cardinality: Vec<usize>,
    parents: Vec<Vec<usize>>,
    tables: Vec<Vec<Rat>>,
}

impl RatTables {
    fn sample(latent: &MissingDataGraph, rng: &mut impl Rng) -> Self {
        let skeleton = super::LatentDagTables::from_graph(latent);
        let mut tables = Vec::with_capacity(skeleton.order.len());
        for v in 0..skeleton.order.len() {
            let card = skeleton.cardinality[v];
            let rows: usize = skeleton.parents[v]
                .iter()
                .map(|&p| skeleton.cardinality[p])
                .product();
            let mut table = Vec::with_capacity(rows * card);
            for _ in 0..rows {
                if card == 2 {
                    // Grid of hundredths keeps the arithmetic small.
                    let p0 = rng.gen_range(5..=95);
                    table.push(rat(p0, 100));
                    table.push(rat(100 - p0, 100));
                } else {
                    let raw: Vec<i64> = (0..card).map(|_| rng.gen_range(5..=95)).collect();
                    let sum: i64 = raw.iter().sum();
                    for x in raw {
                        table.push(rat(x, sum));
                    }
                }
            }
            tables.push(table);
        }
        RatTables {
            order: skeleton.order,
            cardinality: skeleton.cardinality,
            parents: skeleton.parents,
            tables,
        }
    }

    fn row_of(&self, v: usize, state: &[usize]) -> usize {
        let mut row = 0usize;
        for &p in &self.parents[v] {
            row = row * self.cardinality[p] + state[p];
        }
        row
    }

    /// Full law over (o, x1, r) cells, hidden vertices marginalized; exact.
    fn full_law(&self, layout: &LawLayout) -> Vec<Rat> {
        let n = self.order.len();
        let mut probs = vec![Rat::zero(); 1usize << (layout.no + 2 * layout.k)];
        let mut state = vec![0usize; n];
        loop {
            let mut mass = Rat::one();
            for v in 0..n {
                let row = self.row_of(v, &state);
                mass *= self.tables[v][row * self.cardinality[v] + state[v]].clone();
            }
            probs[layout.index_of(&state)] += mass;
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
        probs
    }
}

/// Slot bookkeeping between latent-DAG order and the (o, x, r) cell layout.
struct LawLayout {
    no: usize,
    k: usize,
    o_slots: Vec<usize>,
    x_slots: Vec<usize>,
    r_slots: Vec<usize>,
    o_names: Vec<String>,
    x1_names: Vec<String>,
    r_names: Vec<String>,
}

impl LawLayout {
    fn new(g: &MissingDataGraph, order: &[String]) -> Self {
        let e = g.elide_proxies();
        let pairs = e.pairs();
        let mut o_names: Vec<String> = e
            .fully_observed()
            .iter()
            .map(|&o| e.name(o).to_string())
            .collect();
        o_names.sort();
        let x1_names: Vec<String> = pairs.iter().map(|p| e.name(p.missing).to_string()).collect();
        let r_names: Vec<String> = pairs.iter().map(|p| e.name(p.indicator).to_string()).collect();
        let slot = |n: &String| order.iter().position(|m| m == n).expect("var in order");
        LawLayout {
            no: o_names.len(),
            k: pairs.len(),
            o_slots: o_names.iter().map(slot).collect(),
            x_slots: x1_names.iter().map(slot).collect(),
            r_slots: r_names.iter().map(slot).collect(),
            o_names,
            x1_names,
            r_names,
        }
    }

    fn index_of(&self, state: &[usize]) -> usize {
        let mut o_bits = 0usize;
        for (i, &s) in self.o_slots.iter().enumerate() {
            o_bits |= state[s] << i;
        }
        let mut x_bits = 0usize;
        for (i, &s) in self.x_slots.iter().enumerate() {
            x_bits |= state[s] << i;
        }
        let mut r_bits = 0usize;
        for (i, &s) in self.r_slots.iter().enumerate() {
            r_bits |= state[s] << i;
        }
        o_bits | x_bits << self.no | r_bits << (self.no + self.k)
    }
}

/// Observed law from a rational full law: proxy collapse within each stratum.
fn observe_exact(full: &[Rat], no: usize, k: usize) -> Vec<Rat> {
    let mut out = vec![Rat::zero(); full.len()];
    for o_bits in 0..(1usize << no) {
        for x_bits in 0..(1usize << k) {
            for r_bits in 0..(1usize << k) {
                let idx = o_bits | x_bits << no | r_bits << (no + k);
                let seen = x_bits & r_bits;
                let tgt = o_bits | seen << no | r_bits << (no + k);
                out[tgt] += full[idx].clone();
            }
        }
    }
    out
}

/// Null space (basis) of the columns-matrix by exact Gaussian elimination.
/// `matrix[row][col]`.
fn null_space(matrix: &[Vec<Rat>], cols: usize) -> Vec<Vec<Rat>> {
    let mut m: Vec<Vec<Rat>> = matrix.to_vec();
    let rows = m.len();
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; cols];
    let mut rank = 0usize;
    for col in 0..cols {
        let Some(p) = (rank..rows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, p);
        let inv = m[rank][col].clone();
        for c in 0..cols {
            m[rank][c] = m[rank][c].clone() / inv.clone();
        }
        for r in 0..rows {
            if r != rank && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in 0..cols {
                    let sub = f.clone() * m[rank][c].clone();
                    m[r][c] = m[r][c].clone() - sub;
                }
            }
        }
        pivot_of_col[col] = Some(rank);
        rank += 1;
        if rank == rows {
            break;
        }
    }
    let mut basis = Vec::new();
    for free in 0..cols {
        if pivot_of_col[free].is_some() {
            continue;
        }
        let mut v = vec![Rat::zero(); cols];
        v[free] = Rat::one();
        for col in 0..cols {
            if let Some(prow) = pivot_of_col[col] {
                v[col] = -m[prow][free].clone();
            }
        }
        basis.push(v);
    }
    basis
}

/// Dof basis vectors for vertex `v`'s table: per row, per state below the last,
/// move mass from the last state to that state.
fn apply_direction(tables: &RatTables, v: usize, direction: &[Rat], t: &Rat) -> RatTables {
    let mut out = tables.clone();
    let card = tables.cardinality[v];
    let dof_per_row = card - 1;
    for (dof, delta) in direction.iter().enumerate() {
        if delta.is_zero() {
            continue;
        }
        let row = dof / dof_per_row;
        let s = dof % dof_per_row;
        let step = t.clone() * delta.clone();
        out.tables[v][row * card + s] += step.clone();
        out.tables[v][row * card + (card - 1)] -= step;
    }
    out
}

/// Admissible symmetric step range keeping `v`'s entries within [1/100, 99/100].
fn step_bounds(tables: &RatTables, v: usize, direction: &[Rat]) -> (Rat, Rat) {
    let card = tables.cardinality[v];
    let dof_per_row = card - 1;
    let lo_bound = rat(1, 100);
    let hi_bound = rat(99, 100);
    let mut t_lo: Option<Rat> = None;
    let mut t_hi: Option<Rat> = None;
    // Effective per-entry slopes: state s gains direction[dof], the last state
    // loses the row total.
    let rows = tables.tables[v].len() / card;
    for row in 0..rows {
        let mut slopes = vec![Rat::zero(); card];
        for s in 0..dof_per_row {
            let d = direction[row * dof_per_row + s].clone();
            slopes[s] = d.clone();
            slopes[card - 1] -= d;
        }
        for s in 0..card {
            if slopes[s].is_zero() {
                continue;
            }
            let value = tables.tables[v][row * card + s].clone();
            let up = (hi_bound.clone() - value.clone()) / slopes[s].clone();
            let down = (lo_bound.clone() - value) / slopes[s].clone();
            let (mut lo, mut hi) = (down, up);
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            t_lo = Some(match t_lo {
                None => lo.clone(),
                Some(old) => old.max(lo.clone()),
            });
            t_hi = Some(match t_hi {
                None => hi.clone(),
                Some(old) => old.min(hi.clone()),
            });
        }
    }
    (
        t_lo.unwrap_or_else(Rat::zero),
        t_hi.unwrap_or_else(Rat::zero),
    )
}

fn sup_distance(a: &[Rat], b: &[Rat]) -> Rat {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.clone() - y.clone()).abs())
        .max()
        .unwrap_or_else(Rat::zero)
}

fn to_f64(r: &Rat) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().expect("law cells fit in f64")
}

fn to_table(probs: &[Rat], layout: &LawLayout) -> FullLawTable {
    FullLawTable::new(
        layout.o_names.clone(),
        layout.x1_names.clone(),
        layout.r_names.clone(),
        probs.iter().map(to_f64).collect(),
    )
}

pub(super) fn null_space_search(
    g: &MissingDataGraph,
    seed: u64,
    budget: u64,
) -> CounterexampleOutcome {
    let latent = super::canonical_latent_dag(g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tried = 0u64;
    let threshold = rat(1, 100);
    while tried < budget {
        let tables = RatTables::sample(&latent, &mut rng);
        let layout = LawLayout::new(g, &tables.order);
        let base_full = tables.full_law(&layout);
        let base_obs = observe_exact(&base_full, layout.no, layout.k);
        for v in 0..tables.order.len() {
            if tried >= budget {
                break;
            }
            // Skip deterministic-in-structure vertices with no freedom.
            let card = tables.cardinality[v];
            let rows = tables.tables[v].len() / card;
            let dofs = rows * (card - 1);
            // Affine map: columns by exact finite differences with unit steps.
            let mut columns: Vec<Vec<Rat>> = Vec::with_capacity(dofs);
            for dof in 0..dofs {
                let mut dir = vec![Rat::zero(); dofs];
                dir[dof] = Rat::one();
                let shifted = apply_direction(&tables, v, &dir, &Rat::one());
                let obs = observe_exact(&shifted.full_law(&layout), layout.no, layout.k);
                columns.push(
                    obs.iter()
                        .zip(&base_obs)
                        .map(|(a, b)| a.clone() - b.clone())
                        .collect(),
                );
            }
            let n_cells = base_obs.len();
            let matrix: Vec<Vec<Rat>> = (0..n_cells)
                .map(|cell| (0..dofs).map(|d| columns[d][cell].clone()).collect())
                .collect();
            let basis = null_space(&matrix, dofs);
            if basis.is_empty() {
                tried += 1;
                continue;
            }
            for dir in basis {
                if tried >= budget {
                    break;
                }
                let (t_lo, t_hi) = step_bounds(&tables, v, &dir);
                for endpoint in [t_hi.clone() * rat(4, 5), t_lo.clone() * rat(4, 5)] {
                    tried += 1;
                    if endpoint.is_zero() {
                        continue;
                    }
                    let moved = apply_direction(&tables, v, &dir, &endpoint);
                    let moved_full = moved.full_law(&layout);
                    let dist = sup_distance(&base_full, &moved_full);
                    if dist <= threshold {
                        continue;
                    }
                    let moved_obs = observe_exact(&moved_full, layout.no, layout.k);
                    assert_eq!(
                        base_obs, moved_obs,
                        "null direction failed exact observed agreement"
                    );
                    let law_a = to_table(&base_full, &layout);
                    let law_b = to_table(&moved_full, &layout);
                    // Independent re-validation: both laws satisfy the graph's
                    // m-separations, and the float observed laws agree.
                    if !super::law_respects_graph(&law_a, g, 1e-9)
                        || !super::law_respects_graph(&law_b, g, 1e-9)
                    {
                        continue;
                    }
                    let obs_a = super::observe(&law_a);
                    let obs_b = super::observe(&law_b);
                    if obs_a.max_abs_diff(&obs_b) > 1e-10 {
                        continue;
                    }
                    let full_dist = law_a.max_abs_diff(&law_b);
                    // Agreement is certified by the exact rational comparison
                    // above; the float re-observation only cross-checks it.
                    return CounterexampleOutcome::Found(Box::new(CounterexamplePair {
                        law_a,
                        law_b,
                        observed_sup_distance: 0.0,
                        full_law_sup_distance: full_dist,
                        exact: true,
                    }));
                }
            }
        }
    }
    CounterexampleOutcome::BudgetExhausted { directions_tried: tried }
}
