//! Exact probability tables over binary variables.
//!
//! A [`TabularKernel`] is a map from context assignments to normalized densities
//! over its random variables. Variables are referenced by name so the same table
//! can travel across graph transformations.

pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum KernelError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("kernel not normalized: context {context} sums to {sum}")]
    NotNormalized { context: usize, sum: f64 },
    #[error("negative entry {value}")]
    NegativeEntry { value: f64 },
    #[error("conditioning on zero-probability event")]
    ZeroProbabilityEvent,
}

/// Exact table q(randoms | contexts) over binary states.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularKernel {
    randoms: Vec<String>,
    contexts: Vec<String>,
    /// Indexed by `ctx_bits * 2^|randoms| + rand_bits`; bit i of `rand_bits` is
    /// the value of `randoms[i]`, likewise for contexts.
    values: Vec<f64>,
}

impl TabularKernel {
    pub fn new(
        randoms: Vec<String>,
        contexts: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self, KernelError> {
        let k = TabularKernel { randoms, contexts, values };
        assert_eq!(
            k.values.len(),
            1usize << (k.randoms.len() + k.contexts.len()),
            "table size must match variable count"
        );
        k.check()?;
        Ok(k)
    }

    /// Joint distribution (no context) over `vars`, all mass on `values`.
    pub fn joint(vars: Vec<String>, values: Vec<f64>) -> Result<Self, KernelError> {
        Self::new(vars, Vec::new(), values)
    }

    fn check(&self) -> Result<(), KernelError> {
        for &v in &self.values {
            if v < 0.0 {
                return Err(KernelError::NegativeEntry { value: v });
            }
        }
        let nr = 1usize << self.randoms.len();
        for ctx in 0..(1usize << self.contexts.len()) {
            let sum: f64 = (0..nr).map(|r| self.values[ctx * nr + r]).sum();
            // Context blocks with no mass at all are legal (dead branches of a
            // fixing chain); everything else must be normalized.
            if sum != 0.0 && (sum - 1.0).abs() > NORMALIZATION_TOL {
                return Err(KernelError::NotNormalized { context: ctx, sum });
            }
        }
        Ok(())
    }

    /// Build from raw values, absorbing small floating drift per context block
    /// (tolerance `drift_tol`) by renormalizing; larger deviations error.
    pub fn new_renormalizing(
        randoms: Vec<String>,
        contexts: Vec<String>,
        mut values: Vec<f64>,
        drift_tol: f64,
    ) -> Result<Self, KernelError> {
        let nr = 1usize << randoms.len();
        for ctx in 0..(1usize << contexts.len()) {
            let sum: f64 = (0..nr).map(|r| values[ctx * nr + r]).sum();
            if sum == 0.0 {
                continue;
            }
            if (sum - 1.0).abs() > drift_tol {
                return Err(KernelError::NotNormalized { context: ctx, sum });
            }
            for r in 0..nr {
                values[ctx * nr + r] /= sum;
            }
        }
        Self::new(randoms, contexts, values)
    }

    pub fn randoms(&self) -> &[String] {
        &self.randoms
    }

    pub fn contexts(&self) -> &[String] {
        &self.contexts
    }

    pub fn random_index(&self, name: &str) -> Option<usize> {
        self.randoms.iter().position(|n| n == name)
    }

    pub fn context_index(&self, name: &str) -> Option<usize> {
        self.contexts.iter().position(|n| n == name)
    }

    pub fn n_random_states(&self) -> usize {
        1usize << self.randoms.len()
    }

    pub fn n_context_states(&self) -> usize {
        1usize << self.contexts.len()
    }

    #[inline]
    pub fn value(&self, rand_bits: usize, ctx_bits: usize) -> f64 {
        self.values[ctx_bits * self.n_random_states() + rand_bits]
    }

    /// Marginal over the random variables named in `keep` (subset of randoms),
    /// contexts unchanged.
    pub fn marginalize(&self, keep: &[String]) -> Result<TabularKernel, KernelError> {
        let keep_idx: Vec<usize> = keep
            .iter()
            .map(|n| {
                self.random_index(n)
                    .ok_or_else(|| KernelError::UnknownVariable(n.clone()))
            })
            .collect::<Result<_, _>>()?;
        let nr_new = 1usize << keep_idx.len();
        let mut values = vec![0.0; nr_new << self.contexts.len()];
        for ctx in 0..self.n_context_states() {
            for r in 0..self.n_random_states() {
                let mut nb = 0usize;
                for (j, &i) in keep_idx.iter().enumerate() {
                    if r >> i & 1 == 1 {
                        nb |= 1 << j;
                    }
                }
                values[ctx * nr_new + nb] += self.value(r, ctx);
            }
        }
        TabularKernel::new(keep.to_vec(), self.contexts.clone(), values)
    }

    /// Move the random variables in `on` past the conditioning bar:
    /// q(randoms \ on | contexts ∪ on).
    pub fn condition(&self, on: &[String]) -> Result<TabularKernel, KernelError> {
        let on_idx: Vec<usize> = on
            .iter()
            .map(|n| {
                self.random_index(n)
                    .ok_or_else(|| KernelError::UnknownVariable(n.clone()))
            })
            .collect::<Result<_, _>>()?;
        let rest: Vec<String> = self
            .randoms
            .iter()
            .filter(|n| !on.contains(n))
            .cloned()
            .collect();
        let rest_idx: Vec<usize> = rest.iter().map(|n| self.random_index(n).unwrap()).collect();
        let new_contexts: Vec<String> = self
            .contexts
            .iter()
            .cloned()
            .chain(on.iter().cloned())
            .collect();
        let nr_new = 1usize << rest.len();
        let nc_new = 1usize << new_contexts.len();
        let mut values = vec![0.0; nr_new * nc_new];
        for ctx in 0..self.n_context_states() {
            for on_bits in 0..(1usize << on.len()) {
                // Normalizer for this (ctx, on) cell.
                let mut total = 0.0;
                for rest_bits in 0..nr_new {
                    total += self.value(self.assemble(&rest_idx, rest_bits, &on_idx, on_bits), ctx);
                }
                if total <= 0.0 {
                    return Err(KernelError::ZeroProbabilityEvent);
                }
                let new_ctx = ctx | (on_bits << self.contexts.len());
                for rest_bits in 0..nr_new {
                    let v = self.value(self.assemble(&rest_idx, rest_bits, &on_idx, on_bits), ctx);
                    values[new_ctx * nr_new + rest_bits] = v / total;
                }
            }
        }
        TabularKernel::new(rest, new_contexts, values)
    }

    fn assemble(&self, rest_idx: &[usize], rest_bits: usize, on_idx: &[usize], on_bits: usize) -> usize {
        let mut r = 0usize;
        for (j, &i) in rest_idx.iter().enumerate() {
            if rest_bits >> j & 1 == 1 {
                r |= 1 << i;
            }
        }
        for (j, &i) in on_idx.iter().enumerate() {
            if on_bits >> j & 1 == 1 {
                r |= 1 << i;
            }
        }
        r
    }

    /// Look up a probability by named assignment (every random and context
    /// variable must be assigned).
    pub fn prob(&self, assignment: &[(&str, bool)]) -> Result<f64, KernelError> {
        let mut rand_bits = 0usize;
        let mut ctx_bits = 0usize;
        let mut seen = 0usize;
        for (name, value) in assignment {
            if let Some(i) = self.random_index(name) {
                if *value {
                    rand_bits |= 1 << i;
                }
                seen += 1;
            } else if let Some(i) = self.context_index(name) {
                if *value {
                    ctx_bits |= 1 << i;
                }
                seen += 1;
            }
        }
        if seen != self.randoms.len() + self.contexts.len() {
            return Err(KernelError::UnknownVariable(
                "assignment does not cover the kernel".to_string(),
            ));
        }
        Ok(self.value(rand_bits, ctx_bits))
    }

    /// Largest absolute difference over aligned entries. Variable orders may
    /// differ; both kernels must range over the same variable sets.
    pub fn max_abs_diff(&self, other: &TabularKernel) -> f64 {
        let rmap: Vec<usize> = self
            .randoms
            .iter()
            .map(|n| other.random_index(n).expect("same random variables"))
            .collect();
        let cmap: Vec<usize> = self
            .contexts
            .iter()
            .map(|n| other.context_index(n).expect("same context variables"))
            .collect();
        let mut worst: f64 = 0.0;
        for ctx in 0..self.n_context_states() {
            let mut octx = 0usize;
            for (i, &j) in cmap.iter().enumerate() {
                if ctx >> i & 1 == 1 {
                    octx |= 1 << j;
                }
            }
            for r in 0..self.n_random_states() {
                let mut or = 0usize;
                for (i, &j) in rmap.iter().enumerate() {
                    if r >> i & 1 == 1 {
                        or |= 1 << j;
                    }
                }
                worst = worst.max((self.value(r, ctx) - other.value(or, octx)).abs());
            }
        }
        worst
    }

    /// Renormalize contexts blocks (used after floating drift in long chains).
    pub fn renormalized(&self) -> TabularKernel {
        let nr = self.n_random_states();
        let mut values = self.values.clone();
        for ctx in 0..self.n_context_states() {
            let sum: f64 = (0..nr).map(|r| values[ctx * nr + r]).sum();
            if sum > 0.0 {
                for r in 0..nr {
                    values[ctx * nr + r] /= sum;
                }
            }
        }
        TabularKernel {
            randoms: self.randoms.clone(),
            contexts: self.contexts.clone(),
            values,
        }
    }

}
