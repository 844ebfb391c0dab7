//! Odds-ratio parameterization of the missingness mechanism, and the
//! constructive reconstruction of identified laws from observed data.
//!
//! The mechanism p(R | X1, O) factorizes into univariate pieces at reference
//! level R = 1, pairwise odds ratios, higher-order interaction terms and a
//! normalizer. For graphs without colluding paths every factor is a function
//! of observed data: the univariate piece for R_k drops X1_k by the itemwise
//! independence, and each odds-ratio or interaction term is symmetric in its
//! indicator arguments, hence free of every X1 coordinate it mentions, and can
//! be read off the observed stratum that sets exactly those indicators to 0.

use crate::fixing::{KernelError, TabularKernel};
use crate::graph::MissingDataGraph;
use crate::identification::{decide_full_law, Recipe};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum OrError {
    #[error("graph is not identified; reconstruction undefined")]
    NotIdentifiedGraph,
    #[error("zero-probability conditioning event")]
    ZeroProbabilityEvent,
    #[error("positivity violation: propensity {value} at stratum {stratum}")]
    PositivityViolation { stratum: usize, value: f64 },
    #[error("law variables do not match the graph: {0}")]
    VariableMismatch(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Exact joint table over binary {O, X1, R}.
///
/// Index layout: `o_bits | x_bits << |O| | r_bits << (|O| + K)`, with x and r
/// aligned by pair order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullLawTable {
    pub o: Vec<String>,
    pub x1: Vec<String>,
    pub r: Vec<String>,
    pub probs: Vec<f64>,
}

impl FullLawTable {
    pub fn new(o: Vec<String>, x1: Vec<String>, r: Vec<String>, probs: Vec<f64>) -> Self {
        assert_eq!(x1.len(), r.len(), "x1 and r align by pair");
        assert_eq!(probs.len(), 1usize << (o.len() + x1.len() + r.len()));
        FullLawTable { o, x1, r, probs }
    }

    pub fn n_pairs(&self) -> usize {
        self.r.len()
    }

    #[inline]
    pub fn index(&self, o_bits: usize, x_bits: usize, r_bits: usize) -> usize {
        o_bits | x_bits << self.o.len() | r_bits << (self.o.len() + self.x1.len())
    }

    #[inline]
    pub fn mass(&self, o_bits: usize, x_bits: usize, r_bits: usize) -> f64 {
        self.probs[self.index(o_bits, x_bits, r_bits)]
    }

    /// The mechanism p(R | X1, O) as a kernel: randoms = R (pair order),
    /// contexts = X1 (pair order) then O.
    pub fn mechanism(&self) -> Result<TabularKernel, OrError> {
        let k = self.n_pairs();
        let no = self.o.len();
        let nr = 1usize << k;
        let nctx = 1usize << (k + no);
        let mut values = vec![0.0; nr * nctx];
        for o_bits in 0..(1usize << no) {
            for x_bits in 0..(1usize << k) {
                let ctx = x_bits | o_bits << k;
                let total: f64 = (0..nr).map(|r| self.mass(o_bits, x_bits, r)).sum();
                if total <= 0.0 {
                    return Err(OrError::ZeroProbabilityEvent);
                }
                for r_bits in 0..nr {
                    values[ctx * nr + r_bits] = self.mass(o_bits, x_bits, r_bits) / total;
                }
            }
        }
        let mut contexts = self.x1.clone();
        contexts.extend(self.o.iter().cloned());
        Ok(TabularKernel::new_renormalizing(self.r.clone(), contexts, values, 1e-9)?)
    }

    /// Target law p(O, X1), indicators marginalized.
    pub fn target(&self) -> Vec<f64> {
        let k = self.n_pairs();
        let no = self.o.len();
        let mut out = vec![0.0; 1usize << (no + k)];
        for o_bits in 0..(1usize << no) {
            for x_bits in 0..(1usize << k) {
                for r_bits in 0..(1usize << k) {
                    out[o_bits | x_bits << no] += self.mass(o_bits, x_bits, r_bits);
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &FullLawTable) -> f64 {
        assert_eq!(self.o, other.o);
        assert_eq!(self.x1, other.x1);
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Exact table over the observed variables {O, R, X}, where proxy X_i carries
/// its pair's value when R_i = 1 and the placeholder state otherwise.
///
/// Placeholder cells are canonicalized: all mass with R_i = 0 sits at X_i = 0,
/// and non-canonical cells are exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedLawTable {
    pub o: Vec<String>,
    pub x: Vec<String>,
    pub r: Vec<String>,
    pub probs: Vec<f64>,
}

impl ObservedLawTable {
    pub fn new(o: Vec<String>, x: Vec<String>, r: Vec<String>, probs: Vec<f64>) -> Self {
        assert_eq!(x.len(), r.len());
        assert_eq!(probs.len(), 1usize << (o.len() + x.len() + r.len()));
        let t = ObservedLawTable { o, x, r, probs };
        debug_assert!(t.respects_determinism(1e-15));
        t
    }

    pub fn n_pairs(&self) -> usize {
        self.r.len()
    }

    #[inline]
    pub fn index(&self, o_bits: usize, x_bits: usize, r_bits: usize) -> usize {
        o_bits | x_bits << self.o.len() | r_bits << (self.o.len() + self.x.len())
    }

    #[inline]
    pub fn mass(&self, o_bits: usize, x_bits: usize, r_bits: usize) -> f64 {
        self.probs[self.index(o_bits, x_bits, r_bits)]
    }

    /// Mass on X_i != placeholder with R_i = 0 must be zero.
    pub fn respects_determinism(&self, tol: f64) -> bool {
        let k = self.n_pairs();
        for o_bits in 0..(1usize << self.o.len()) {
            for x_bits in 0..(1usize << k) {
                for r_bits in 0..(1usize << k) {
                    if x_bits & !r_bits != 0 && self.mass(o_bits, x_bits, r_bits).abs() > tol {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &ObservedLawTable) -> f64 {
        assert_eq!(self.o, other.o);
        assert_eq!(self.r, other.r);
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Pairwise odds ratio OR(A, B | C) with reference values A=1, B=1, per the
/// cross-ratio definition. `law` is a joint kernel containing `a` and `b`
/// among its randoms; `context` assigns every other variable.
///
/// Returned as `table[a_val][b_val]`; the reference row and column are 1.
pub fn pairwise_or(
    law: &TabularKernel,
    a: &str,
    b: &str,
    context: &[(&str, bool)],
) -> Result<[[f64; 2]; 2], OrError> {
    let mut joint = [[0.0; 2]; 2];
    for (av, row) in joint.iter_mut().enumerate() {
        for (bv, cell) in row.iter_mut().enumerate() {
            let mut assignment: Vec<(&str, bool)> = vec![(a, av == 1), (b, bv == 1)];
            assignment.extend(context.iter().copied());
            *cell = law.prob(&assignment)?;
        }
    }
    if joint.iter().flatten().any(|&v| v <= 0.0) {
        return Err(OrError::ZeroProbabilityEvent);
    }
    let mut out = [[1.0; 2]; 2];
    // OR(a, b) = [p(a | b) / p(1 | b)] * [p(1 | 1) / p(a | 1)]; conditioning
    // normalizers cancel in the cross ratio.
    out[0][0] = joint[0][0] * joint[1][1] / (joint[1][0] * joint[0][1]);
    Ok(out)
}

/// Odds-ratio factorization of a mechanism p(R | X1, O).
///
/// Term tables are stored over the full (X1, O) context grid; each term's value
/// is constant in the X1 coordinates it is free of only when the mechanism has
/// the corresponding independence (the factorization itself is an identity for
/// any positive mechanism).
#[derive(Debug, Clone, PartialEq)]
pub struct OddsRatioFactorization {
    /// Indicator order R_1 .. R_K of the factorization.
    pub order: Vec<String>,
    /// Context variable names (X1 then O), defining the context index.
    pub context_vars: Vec<String>,
    /// univariate[k][ctx] = p(R_k = 0 | R_{-k} = 1, ctx).
    pub univariate: Vec<Vec<f64>>,
    /// For each indicator subset E (bitmask over `order`, |E| >= 2):
    /// the term's value at R_E = 0 given R_{-E} = 1, per context.
    /// |E| = 2 entries are pairwise odds ratios, larger are interactions.
    pub terms: Vec<(usize, Vec<f64>)>,
    /// Normalizer Z per context.
    pub normalizer: Vec<f64>,
}

impl OddsRatioFactorization {
    pub fn term(&self, mask: usize) -> Option<&Vec<f64>> {
        self.terms.iter().find(|(m, _)| *m == mask).map(|(_, t)| t)
    }

    /// Evaluate the unnormalized weight of an indicator assignment (bit k of
    /// `r_bits` is the value of `order[k]`) in a context.
    fn weight(&self, r_bits: usize, ctx: usize) -> f64 {
        let k = self.order.len();
        let zeros = !r_bits & ((1 << k) - 1);
        let mut w = 1.0;
        for j in 0..k {
            let a = self.univariate[j][ctx];
            w *= if r_bits >> j & 1 == 0 { a } else { 1.0 - a };
        }
        for (mask, table) in &self.terms {
            if mask & zeros == *mask {
                w *= table[ctx];
            }
        }
        w
    }

    /// Recompose the mechanism kernel from the factors.
    pub fn recompose(&self) -> Result<TabularKernel, OrError> {
        let k = self.order.len();
        let nr = 1usize << k;
        let nctx = 1usize << self.context_vars.len();
        let mut values = vec![0.0; nr * nctx];
        for ctx in 0..nctx {
            let z = self.normalizer[ctx];
            if z <= 0.0 {
                return Err(OrError::ZeroProbabilityEvent);
            }
            for r_bits in 0..nr {
                values[ctx * nr + r_bits] = self.weight(r_bits, ctx) / z;
            }
        }
        Ok(TabularKernel::new_renormalizing(
            self.order.clone(),
            self.context_vars.clone(),
            values,
            1e-9,
        )?)
    }
}

/// Mechanism accessor: p(R = r | ctx) with r addressed in `order` positions.
struct MechView<'a> {
    kernel: &'a TabularKernel,
    /// position in kernel's randoms for each order slot
    slots: Vec<usize>,
}

impl<'a> MechView<'a> {
    fn new(kernel: &'a TabularKernel, order: &[String]) -> Result<Self, OrError> {
        let slots = order
            .iter()
            .map(|n| {
                kernel
                    .random_index(n)
                    .ok_or_else(|| OrError::VariableMismatch(n.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(MechView { kernel, slots })
    }

    fn prob(&self, r_bits: usize, ctx: usize) -> f64 {
        let mut raw = 0usize;
        for (j, &s) in self.slots.iter().enumerate() {
            if r_bits >> j & 1 == 1 {
                raw |= 1 << s;
            }
        }
        self.kernel.value(raw, ctx)
    }

    /// Conditional p(R_k = 0 | rest of R per `given_bits`, ctx).
    fn cond_zero(&self, k: usize, given_bits: usize, ctx: usize) -> Result<f64, OrError> {
        let zero = self.prob(given_bits & !(1 << k), ctx);
        let one = self.prob(given_bits | 1 << k, ctx);
        if zero + one <= 0.0 {
            return Err(OrError::ZeroProbabilityEvent);
        }
        Ok(zero / (zero + one))
    }

    /// OR(R_i = 0, R_j = 0 | others per `others_bits`, ctx): cross ratio.
    fn or00(&self, i: usize, j: usize, others_bits: usize, ctx: usize) -> Result<f64, OrError> {
        let base = others_bits & !(1 << i) & !(1 << j);
        let p00 = self.prob(base, ctx);
        let p01 = self.prob(base | 1 << j, ctx);
        let p10 = self.prob(base | 1 << i, ctx);
        let p11 = self.prob(base | 1 << i | 1 << j, ctx);
        if p00 <= 0.0 || p01 <= 0.0 || p10 <= 0.0 || p11 <= 0.0 {
            return Err(OrError::ZeroProbabilityEvent);
        }
        Ok(p00 * p11 / (p01 * p10))
    }
}

/// Interaction term at all-zero arguments, computed from a mechanism view:
/// alternating product of pairwise odds ratios over the extra coordinates.
/// `i`, `j` select the represented pair; the result does not depend on the
/// choice (odds-ratio symmetry), which tests verify.
fn interaction_from_mech(
    mech: &MechView<'_>,
    e_mask: usize,
    i: usize,
    j: usize,
    ctx: usize,
    k_total: usize,
) -> Result<f64, OrError> {
    let extras: Vec<usize> = (0..k_total)
        .filter(|&t| e_mask >> t & 1 == 1 && t != i && t != j)
        .collect();
    let all_ones = (1usize << k_total) - 1;
    let mut value = 1.0;
    for t_bits in 0..(1usize << extras.len()) {
        // Extras in T are pinned to 1, the rest of E sit at 0; everything
        // outside E is 1.
        let mut others = all_ones & !e_mask;
        let mut parity = 0usize;
        for (idx, &coord) in extras.iter().enumerate() {
            if t_bits >> idx & 1 == 1 {
                others |= 1 << coord;
                parity ^= 1;
            }
        }
        let or = mech.or00(i, j, others, ctx)?;
        if parity == 0 {
            value *= or;
        } else {
            value /= or;
        }
    }
    Ok(value)
}

/// Decompose a mechanism kernel into its odds-ratio factorization under the
/// given indicator order. Recomposition reproduces the input exactly for any
/// strictly positive mechanism.
pub fn factorize(mechanism: &TabularKernel, order: &[String]) -> Result<OddsRatioFactorization, OrError> {
    let k = order.len();
    assert_eq!(k, mechanism.randoms().len(), "order must cover the indicators");
    let mech = MechView::new(mechanism, order)?;
    let nctx = mechanism.n_context_states();
    let all_ones = (1usize << k) - 1;

    let mut univariate = vec![vec![0.0; nctx]; k];
    for (j, table) in univariate.iter_mut().enumerate() {
        for (ctx, slot) in table.iter_mut().enumerate() {
            *slot = mech.cond_zero(j, all_ones, ctx)?;
        }
    }

    let mut terms: Vec<(usize, Vec<f64>)> = Vec::new();
    for mask in 1usize..=all_ones {
        let size = (mask as u32).count_ones() as usize;
        if size < 2 {
            continue;
        }
        let members: Vec<usize> = (0..k).filter(|&t| mask >> t & 1 == 1).collect();
        let (i, j) = (members[0], members[1]);
        let mut table = vec![0.0; nctx];
        for (ctx, slot) in table.iter_mut().enumerate() {
            *slot = if size == 2 {
                mech.or00(i, j, all_ones, ctx)?
            } else {
                interaction_from_mech(&mech, mask, i, j, ctx, k)?
            };
        }
        terms.push((mask, table));
    }

    let mut fact = OddsRatioFactorization {
        order: order.to_vec(),
        context_vars: mechanism.contexts().to_vec(),
        univariate,
        terms,
        normalizer: vec![1.0; nctx],
    };
    for ctx in 0..nctx {
        fact.normalizer[ctx] = (0..(1usize << k)).map(|r| fact.weight(r, ctx)).sum();
    }
    Ok(fact)
}

/// Result of reconstructing a mechanism from observed data.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    /// p(R | X1, O): randoms in factorization order, contexts X1 (pair order)
    /// then O.
    pub mechanism: TabularKernel,
    /// The factor tables that built it, for inspection.
    pub factorization: OddsRatioFactorization,
    /// Which independence licensed each step.
    pub recipe: Recipe,
}

/// Reconstruct p(R | X1, O) from the observed law, for identified graphs.
///
/// Univariate pieces drop their own X1 coordinate and are read from the
/// strata where the remaining indicators are 1; each odds-ratio/interaction
/// term is free of the X1 coordinates of its own indicators, so it divides
/// out of its defining stratum equation, which is solved stratum by stratum
/// in increasing subset size.
pub fn reconstruct_mechanism(
    observed: &ObservedLawTable,
    g: &MissingDataGraph,
) -> Result<Reconstruction, OrError> {
    let recipe = match decide_full_law(g) {
        crate::identification::IdentificationVerdict::Identified { recipe } => recipe,
        crate::identification::IdentificationVerdict::NotIdentified { .. } => {
            return Err(OrError::NotIdentifiedGraph)
        }
    };
    // Pair-ordered indicator and X1 names from the graph; they define the
    // context layout of the mechanism.
    let pairs = g.pairs();
    let indicator_names: Vec<String> = pairs.iter().map(|p| g.name(p.indicator).to_string()).collect();
    if indicator_names != observed.r {
        return Err(OrError::VariableMismatch(format!(
            "observed law indicators {:?} do not match graph pairs {:?}",
            observed.r, indicator_names
        )));
    }
    let x1_names: Vec<String> = pairs.iter().map(|p| g.name(p.missing).to_string()).collect();
    let o_names: Vec<String> = {
        let mut v: Vec<String> = g
            .fully_observed()
            .iter()
            .map(|&o| g.name(o).to_string())
            .collect();
        v.sort();
        v
    };
    if o_names != observed.o {
        return Err(OrError::VariableMismatch(format!(
            "observed law O vars {:?} do not match graph {:?}",
            observed.o, o_names
        )));
    }
    reconstruct_with_recipe(observed, recipe, x1_names)
}

fn reconstruct_with_recipe(
    observed: &ObservedLawTable,
    recipe: Recipe,
    x1_names: Vec<String>,
) -> Result<Reconstruction, OrError> {
    let order = recipe.order.clone();
    let k = observed.n_pairs();
    if order.len() != k {
        return Err(OrError::VariableMismatch(format!(
            "order has {} indicators, law has {k}",
            order.len()
        )));
    }
    // Pair slot for each order position: order[j] names observed.r[slots[j]].
    let slots: Vec<usize> = order
        .iter()
        .map(|n| {
            observed
                .r
                .iter()
                .position(|m| m == n)
                .ok_or_else(|| OrError::VariableMismatch(n.clone()))
        })
        .collect::<Result<_, _>>()?;

    let no = observed.o.len();
    let nx = 1usize << k;
    let nobits = 1usize << no;
    let nctx = nx * nobits;
    let all_ones = (1usize << k) - 1;
    let to_pair_bits = |order_bits: usize| -> usize {
        let mut out = 0usize;
        for (j, &s) in slots.iter().enumerate() {
            if order_bits >> j & 1 == 1 {
                out |= 1 << s;
            }
        }
        out
    };
    // tau(x, o) = p_obs(R = 1, X = x, O = o). Context index is x | o << k with
    // x in pair order throughout.
    let tau = |x_bits: usize, o_bits: usize| observed.mass(o_bits, x_bits, all_ones);

    // Univariate pieces alpha[j][ctx], constant in their own X1 coordinate.
    let mut alpha = vec![vec![0.0; nctx]; k];
    for (j, table) in alpha.iter_mut().enumerate() {
        let s = slots[j];
        let r_bits = all_ones & !(1 << s);
        for o_bits in 0..nobits {
            for x_bits in 0..nx {
                if x_bits >> s & 1 == 1 {
                    continue;
                }
                // Stratum R_j = 0, R_{-j} = 1: X_j is unobserved (canonical 0).
                let missing_mass = observed.mass(o_bits, x_bits, r_bits);
                let present_mass = tau(x_bits, o_bits) + tau(x_bits | 1 << s, o_bits);
                let denom = missing_mass + present_mass;
                if denom <= 0.0 {
                    return Err(OrError::ZeroProbabilityEvent);
                }
                for xj in 0..2usize {
                    table[(x_bits | xj << s) | o_bits << k] = missing_mass / denom;
                }
            }
        }
    }

    // rho(x, o) = target mass over normalizer: tau divided by the all-ones weight.
    let mut rho = vec![0.0; nctx];
    for o_bits in 0..nobits {
        for x_bits in 0..nx {
            let ctx = x_bits | o_bits << k;
            let mut w1 = 1.0;
            for a in alpha.iter() {
                w1 *= 1.0 - a[ctx];
            }
            if w1 <= 0.0 {
                return Err(OrError::PositivityViolation { stratum: ctx, value: w1 });
            }
            rho[ctx] = tau(x_bits, o_bits) / w1;
        }
    }

    // Odds-ratio and interaction terms, solved in increasing |E| from the
    // stratum R_E = 0, R_{-E} = 1. Masks live in order positions.
    let mut terms: Vec<(usize, Vec<f64>)> = Vec::new();
    for size in 2..=k {
        for mask in 1usize..=all_ones {
            if (mask as u32).count_ones() as usize != size {
                continue;
            }
            let pair_mask = to_pair_bits(mask);
            let r_bits = all_ones & !pair_mask;
            let e_coords: Vec<usize> = (0..k).filter(|&t| pair_mask >> t & 1 == 1).collect();
            let mut table = vec![0.0; nctx];
            for o_bits in 0..nobits {
                for x_rest in 0..nx {
                    if x_rest & pair_mask != 0 {
                        continue;
                    }
                    let s_val = observed.mass(o_bits, x_rest, r_bits);
                    // Sum over the unobserved X1 coordinates of E.
                    let mut inner = 0.0;
                    for hidden in 0..(1usize << size) {
                        let mut x_bits = x_rest;
                        for (idx, &c) in e_coords.iter().enumerate() {
                            if hidden >> idx & 1 == 1 {
                                x_bits |= 1 << c;
                            }
                        }
                        let ctx = x_bits | o_bits << k;
                        let mut w = rho[ctx];
                        for (j, a) in alpha.iter().enumerate() {
                            w *= if mask >> j & 1 == 1 { a[ctx] } else { 1.0 - a[ctx] };
                        }
                        for (m2, t2) in &terms {
                            if m2 & mask == *m2 {
                                w *= t2[ctx];
                            }
                        }
                        inner += w;
                    }
                    if inner <= 0.0 {
                        return Err(OrError::ZeroProbabilityEvent);
                    }
                    let value = s_val / inner;
                    for hidden in 0..(1usize << size) {
                        let mut x_bits = x_rest;
                        for (idx, &c) in e_coords.iter().enumerate() {
                            if hidden >> idx & 1 == 1 {
                                x_bits |= 1 << c;
                            }
                        }
                        table[x_bits | o_bits << k] = value;
                    }
                }
            }
            terms.push((mask, table));
        }
    }

    let mut context_vars = x1_names;
    context_vars.extend(observed.o.iter().cloned());
    let mut fact = OddsRatioFactorization {
        order,
        context_vars,
        univariate: alpha,
        terms,
        normalizer: vec![1.0; nctx],
    };
    for ctx in 0..nctx {
        fact.normalizer[ctx] = (0..(1usize << k)).map(|r| fact.weight(r, ctx)).sum();
    }
    let mechanism = fact.recompose()?;
    Ok(Reconstruction { mechanism, factorization: fact, recipe })
}

/// Recover the full law from the observed law and a mechanism:
/// p(O, X1, R) = p(O, X1, R=1) / p(R=1 | O, X1) * p(R | O, X1).
pub fn recover_full_law(
    observed: &ObservedLawTable,
    mechanism: &TabularKernel,
) -> Result<FullLawTable, OrError> {
    let k = observed.n_pairs();
    let no = observed.o.len();
    let all_ones = (1usize << k) - 1;
    let x1: Vec<String> = mechanism.contexts()[..k].to_vec();
    let mut probs = vec![0.0; 1usize << (no + 2 * k)];
    // Mechanism layout: randoms = R pair order, contexts = X1 pair order then O.
    let slots: Vec<usize> = observed
        .r
        .iter()
        .map(|n| {
            mechanism
                .random_index(n)
                .ok_or_else(|| OrError::VariableMismatch(n.clone()))
        })
        .collect::<Result<_, _>>()?;
    for o_bits in 0..(1usize << no) {
        for x_bits in 0..(1usize << k) {
            let ctx = x_bits | o_bits << k;
            let mut all1 = 0usize;
            for &s in &slots {
                all1 |= 1 << s;
            }
            let propensity = mechanism.value(all1, ctx);
            if propensity <= 1e-12 {
                return Err(OrError::PositivityViolation {
                    stratum: ctx,
                    value: propensity,
                });
            }
            let target_mass = observed.mass(o_bits, x_bits, all_ones) / propensity;
            for r_bits in 0..(1usize << k) {
                let mut raw = 0usize;
                for (j, &s) in slots.iter().enumerate() {
                    if r_bits >> j & 1 == 1 {
                        raw |= 1 << s;
                    }
                }
                let idx = o_bits | x_bits << no | r_bits << (no + k);
                probs[idx] = target_mass * mechanism.value(raw, ctx);
            }
        }
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(OrError::PositivityViolation { stratum: 0, value: total });
    }
    for p in &mut probs {
        *p /= total;
    }
    Ok(FullLawTable::new(
        observed.o.clone(),
        x1,
        observed.r.clone(),
        probs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::oracle::{observe, random_full_law};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Random strictly positive mechanism over k indicators and c context bits.
    fn random_mechanism(k: usize, c: usize, seed: u64) -> TabularKernel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let randoms: Vec<String> = (0..k).map(|i| format!("R{i}")).collect();
        let contexts: Vec<String> = (0..c).map(|i| format!("C{i}")).collect();
        let nr = 1usize << k;
        let mut values = vec![0.0; nr << c];
        for ctx in 0..(1usize << c) {
            let mut total = 0.0;
            for r in 0..nr {
                let v = rng.gen_range(0.05..1.0);
                values[ctx * nr + r] = v;
                total += v;
            }
            for r in 0..nr {
                values[ctx * nr + r] /= total;
            }
        }
        TabularKernel::new(randoms, contexts, values).unwrap()
    }

    #[test]
    fn k2_factorization_is_eq1() {
        // For two indicators the factorization is exactly the simple form:
        // one pairwise OR and no interactions.
        let mech = random_mechanism(2, 1, 3);
        let order: Vec<String> = mech.randoms().to_vec();
        let fact = factorize(&mech, &order).unwrap();
        assert_eq!(fact.terms.len(), 1);
        assert!(fact.recompose().unwrap().max_abs_diff(&mech) < 1e-12);
    }

    #[test]
    fn recomposition_identity_up_to_k5() {
        for k in 1..=5usize {
            let mech = random_mechanism(k, 1, 40 + k as u64);
            let order: Vec<String> = mech.randoms().to_vec();
            let fact = factorize(&mech, &order).unwrap();
            let err = fact.recompose().unwrap().max_abs_diff(&mech);
            assert!(err < 1e-12, "K={k} recomposition error {err}");
        }
    }

    #[test]
    fn recomposition_is_order_invariant() {
        let mech = random_mechanism(3, 2, 7);
        let mut order: Vec<String> = mech.randoms().to_vec();
        let fact_a = factorize(&mech, &order).unwrap();
        order.reverse();
        let fact_b = factorize(&mech, &order).unwrap();
        let (ra, rb) = (fact_a.recompose().unwrap(), fact_b.recompose().unwrap());
        assert!(ra.max_abs_diff(&rb) < 1e-12);
    }

    #[test]
    fn independent_indicators_have_unit_terms() {
        // Product mechanism: all ORs and interactions are 1, univariate pieces
        // are the marginals.
        let k = 3;
        let margins = [0.3, 0.6, 0.45];
        let nr = 1usize << k;
        let mut values = vec![0.0; nr];
        for r in 0..nr {
            let mut v = 1.0;
            for (j, m) in margins.iter().enumerate() {
                v *= if r >> j & 1 == 0 { *m } else { 1.0 - m };
            }
            values[r] = v;
        }
        let mech = TabularKernel::new(
            (0..k).map(|i| format!("R{i}")).collect(),
            Vec::new(),
            values,
        )
        .unwrap();
        let order: Vec<String> = mech.randoms().to_vec();
        let fact = factorize(&mech, &order).unwrap();
        for (_, table) in &fact.terms {
            for v in table {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
        for (j, m) in margins.iter().enumerate() {
            assert!((fact.univariate[j][0] - m).abs() < 1e-12);
        }
    }

    #[test]
    fn three_way_interaction_is_representation_invariant() {
        // f(R_i, R_j, R_k) computed from any of the three pair choices agrees.
        let mech = random_mechanism(3, 1, 99);
        let view = MechView::new(&mech, mech.randoms()).unwrap();
        for ctx in 0..mech.n_context_states() {
            let f01 = interaction_from_mech(&view, 0b111, 0, 1, ctx, 3).unwrap();
            let f02 = interaction_from_mech(&view, 0b111, 0, 2, ctx, 3).unwrap();
            let f12 = interaction_from_mech(&view, 0b111, 1, 2, ctx, 3).unwrap();
            assert!((f01 - f02).abs() < 1e-10);
            assert!((f01 - f12).abs() < 1e-10);
        }
    }

    #[test]
    fn pairwise_or_examples() {
        // Independent A, B given C: all odds ratios are 1.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut values = vec![0.0; 8];
        for c in 0..2 {
            let (pa, pb) = (rng.gen_range(0.2..0.8), rng.gen_range(0.2..0.8));
            for a in 0..2 {
                for b in 0..2usize {
                    let va: f64 = if a == 0 { pa } else { 1.0 - pa };
                    let vb: f64 = if b == 0 { pb } else { 1.0 - pb };
                    values[(c << 2) | (b << 1) | a] = va * vb * 0.5;
                }
            }
        }
        let law = TabularKernel::joint(
            vec!["A".into(), "B".into(), "C".into()],
            values,
        )
        .unwrap();
        for c in [false, true] {
            let or = pairwise_or(&law, "A", "B", &[("C", c)]).unwrap();
            assert!((or[0][0] - 1.0).abs() < 1e-12);
            assert_eq!(or[0][1], 1.0);
            assert_eq!(or[1][0], 1.0);
        }
        // Symmetry on an arbitrary law.
        let arb = random_mechanism(3, 0, 77);
        let or_ab = pairwise_or(&arb, "R0", "R1", &[("R2", true)]).unwrap();
        let or_ba = pairwise_or(&arb, "R1", "R0", &[("R2", true)]).unwrap();
        assert!((or_ab[0][0] - or_ba[0][0]).abs() < 1e-12);
    }

    #[test]
    fn pairwise_or_hand_value() {
        // p(A=0|B=0)=0.8, p(A=0|B=1)=0.5, B fair: OR(0,0) = (0.8/0.2)/(0.5/0.5) = 4.
        let values = vec![
            0.8 * 0.5, // A=0 B=0
            0.2 * 0.5, // A=1 B=0
            0.5 * 0.5, // A=0 B=1
            0.5 * 0.5, // A=1 B=1
        ];
        let law = TabularKernel::joint(vec!["A".into(), "B".into()], values).unwrap();
        let or = pairwise_or(&law, "A", "B", &[]).unwrap();
        assert!((or[0][0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_matches_truth_on_fig1a() {
        let g = fixtures::fig1a();
        for seed in 0..20u64 {
            let law = random_full_law(&g, seed, 2);
            let observed = observe(&law);
            let rec = reconstruct_mechanism(&observed, &g).unwrap();
            let truth = law.mechanism().unwrap();
            let err = rec.mechanism.max_abs_diff(&truth);
            assert!(err < 1e-9, "seed {seed}: error {err}");
        }
    }

    #[test]
    fn reconstruction_matches_truth_on_fig1a_dashed() {
        let g = fixtures::fig1a_dashed();
        for seed in 0..20u64 {
            let law = random_full_law(&g, seed, 2);
            let observed = observe(&law);
            let rec = reconstruct_mechanism(&observed, &g).unwrap();
            let err = rec.mechanism.max_abs_diff(&law.mechanism().unwrap());
            assert!(err < 1e-9, "seed {seed}: error {err}");
        }
    }

    #[test]
    fn reconstruction_matches_truth_on_fig2b_admg() {
        let g = fixtures::fig2b();
        for seed in 0..20u64 {
            let law = random_full_law(&g, seed, 2);
            let observed = observe(&law);
            let rec = reconstruct_mechanism(&observed, &g).unwrap();
            let err = rec.mechanism.max_abs_diff(&law.mechanism().unwrap());
            assert!(err < 1e-9, "seed {seed}: error {err}");
        }
    }

    #[test]
    fn mcar_reconstruction_is_marginal() {
        let g = fixtures::mcar();
        let law = random_full_law(&g, 2, 2);
        let observed = observe(&law);
        let rec = reconstruct_mechanism(&observed, &g).unwrap();
        let truth = law.mechanism().unwrap();
        assert!(rec.mechanism.max_abs_diff(&truth) < 1e-10);
        // MCAR mechanism is constant in the X1 context.
        let k = g.pairs().len();
        for r in 0..rec.mechanism.n_random_states() {
            let base = rec.mechanism.value(r, 0);
            for ctx in 0..(1usize << k) {
                assert!((rec.mechanism.value(r, ctx) - base).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn reconstruction_refuses_unidentified_graphs() {
        let g = fixtures::fig5a();
        let law = random_full_law(&g, 0, 2);
        let observed = observe(&law);
        assert_eq!(
            reconstruct_mechanism(&observed, &g).unwrap_err(),
            OrError::NotIdentifiedGraph
        );
    }

    #[test]
    fn full_law_round_trip() {
        let g = fixtures::fig1a();
        for seed in 0..10u64 {
            let law = random_full_law(&g, seed, 2);
            let observed = observe(&law);
            let rec = reconstruct_mechanism(&observed, &g).unwrap();
            let recovered = recover_full_law(&observed, &rec.mechanism).unwrap();
            let err = recovered.max_abs_diff(&law);
            assert!(err < 1e-9, "seed {seed}: error {err}");
            // Target law via summation matches too.
            let t_err: f64 = recovered
                .target()
                .iter()
                .zip(law.target())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(t_err < 1e-9);
        }
    }

    #[test]
    fn recover_with_true_mechanism_when_nothing_missing() {
        // R identically 1: the full law equals the observed law restriction.
        // Build a law with the mechanism forced to 1 via direct table surgery.
        let g = fixtures::mcar();
        let law = random_full_law(&g, 9, 2);
        let k = law.n_pairs();
        let all = (1usize << k) - 1;
        let mut probs = vec![0.0; law.probs.len()];
        for x_bits in 0..(1usize << k) {
            let mut mass = 0.0;
            for r_bits in 0..(1usize << k) {
                mass += law.mass(0, x_bits, r_bits);
            }
            probs[law.index(0, x_bits, all)] = mass;
        }
        let forced = FullLawTable::new(law.o.clone(), law.x1.clone(), law.r.clone(), probs);
        let observed = observe(&forced);
        let mech = forced.mechanism();
        // Mechanism has zero-probability strata only in R; conditioning on the
        // X1 context stays positive, so the mechanism table exists.
        let mech = mech.unwrap();
        let recovered = recover_full_law(&observed, &mech).unwrap();
        assert!(recovered.max_abs_diff(&forced) < 1e-12);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        /// The expanded odds-ratio factorization is an identity for any
        /// positive mechanism.
        #[test]
        fn recomposition_identity_proptest(raw in proptest::collection::vec(0.02f64..1.0, 16)) {
            let mut values = raw.clone();
            for ctx in 0..2 {
                let total: f64 = values[ctx * 8..(ctx + 1) * 8].iter().sum();
                for v in &mut values[ctx * 8..(ctx + 1) * 8] {
                    *v /= total;
                }
            }
            let mech = TabularKernel::new(
                vec!["R0".into(), "R1".into(), "R2".into()],
                vec!["C".into()],
                values,
            )
            .unwrap();
            let order: Vec<String> = mech.randoms().to_vec();
            let fact = factorize(&mech, &order).unwrap();
            proptest::prop_assert!(fact.recompose().unwrap().max_abs_diff(&mech) < 1e-11);
        }

        /// OR(A, B | C) = OR(B, A | C) pointwise.
        #[test]
        fn pairwise_or_symmetry_proptest(raw in proptest::collection::vec(0.02f64..1.0, 8)) {
            let total: f64 = raw.iter().sum();
            let values: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let law = TabularKernel::joint(
                vec!["A".into(), "B".into(), "C".into()],
                values,
            )
            .unwrap();
            for c in [false, true] {
                let ab = pairwise_or(&law, "A", "B", &[("C", c)]).unwrap();
                let ba = pairwise_or(&law, "B", "A", &[("C", c)]).unwrap();
                proptest::prop_assert!((ab[0][0] - ba[0][0]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn appendix_worked_example_terms_drop_their_coordinates() {
        // On the worked-example graphs the univariate piece for R_k is free of
        // X1_k and the 3-way interaction is free of all of X1, checked by
        // perturbing the dropped coordinate.
        for g in [fixtures::fig4a(), fixtures::fig4b()] {
            let law = random_full_law(&g, 13, 2);
            let mech = law.mechanism().unwrap();
            let order: Vec<String> = crate::identification::default_indicator_order(&g);
            let fact = factorize(&mech, &order).unwrap();
            let k = order.len();
            // Context bit j is X1 of pair j (pair order X1, X2, X3).
            let pair_slot = |name: &str| match name {
                "R1" => 0usize,
                "R2" => 1,
                "R3" => 2,
                other => panic!("unexpected indicator {other}"),
            };
            for (j, r_name) in order.iter().enumerate() {
                let s = pair_slot(r_name);
                for ctx in 0..fact.univariate[j].len() {
                    let flipped = ctx ^ (1 << s);
                    let d = (fact.univariate[j][ctx] - fact.univariate[j][flipped]).abs();
                    assert!(d < 1e-10, "{r_name} depends on its own X1: {d}");
                }
            }
            let three_way = fact.term((1 << k) - 1).expect("3-way term exists");
            for ctx in 0..three_way.len() {
                for s in 0..k {
                    let d = (three_way[ctx] - three_way[ctx ^ (1 << s)]).abs();
                    assert!(d < 1e-9, "3-way interaction depends on X1_{s}: {d}");
                }
            }
        }
    }
}
