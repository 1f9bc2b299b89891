//! Counter-based random source: per-variable indexed sample streams.
//!
//! Every sample is a pure function of (seed, variable id, index), so a solver
//! run and a witness-tree replay that address the same indices see the same
//! values, regardless of interleaving across variables.

use thiserror::Error;

use crate::model::{ProblemInstance, VarId, VariableSpec};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("sample index {index} for variable {var} exceeds table depth {depth}")]
    IndexOutOfTable { var: VarId, index: usize, depth: usize },
}

/// Read access to the sample sequence of each variable.
pub trait SampleSource {
    fn peek_at(&self, var: VarId, index: usize) -> Result<usize, SampleError>;
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in [0, 1) from (seed, var, index).
fn unit_sample(seed: u64, var: u64, index: u64) -> f64 {
    let mut z = seed;
    z = mix64(z ^ (var.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = mix64(z ^ (index.wrapping_add(1)).wrapping_mul(0xD1B5_4A32_D192_ED03));
    (mix64(z) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone)]
struct Domain {
    cumulative: Vec<f64>,
}

impl Domain {
    fn new(spec: &VariableSpec) -> Self {
        let d = spec.domain_size;
        let mut cumulative = Vec::with_capacity(d);
        let mut acc = 0.0;
        for v in 0..d {
            acc += spec.weight(v);
            cumulative.push(acc);
        }
        Domain { cumulative }
    }

    /// Inverse CDF: first value whose cumulative weight exceeds u, so ties
    /// between equal cumulative entries resolve to the lower value index.
    fn value_for(&self, u: f64) -> usize {
        let k = self.cumulative.partition_point(|&c| c <= u);
        k.min(self.cumulative.len() - 1)
    }
}

/// Infinite per-variable sample sequences with draw counters.
#[derive(Debug, Clone)]
pub struct SampleStream {
    seed: u64,
    domains: Vec<Domain>,
    counters: Vec<usize>,
}

impl SampleStream {
    pub fn new(instance: &ProblemInstance, seed: u64) -> Self {
        let domains = instance.variables().iter().map(Domain::new).collect();
        SampleStream { seed, domains, counters: vec![0; instance.num_vars()] }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Next unused sample for `var`; advances that variable's counter only.
    pub fn draw(&mut self, var: VarId) -> usize {
        let index = self.counters[var];
        self.counters[var] += 1;
        self.value_at(var, index)
    }

    pub fn counter(&self, var: VarId) -> usize {
        self.counters[var]
    }

    fn value_at(&self, var: VarId, index: usize) -> usize {
        let u = unit_sample(self.seed, var as u64, index as u64);
        self.domains[var].value_for(u)
    }
}

impl SampleSource for SampleStream {
    fn peek_at(&self, var: VarId, index: usize) -> Result<usize, SampleError> {
        Ok(self.value_at(var, index))
    }
}

/// Explicit value table v_i^(j), one row per variable, columns 0..=depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleTable {
    rows: Vec<Vec<usize>>,
}

impl SampleTable {
    pub fn new(rows: Vec<Vec<usize>>) -> Self {
        SampleTable { rows }
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn num_vars(&self) -> usize {
        self.rows.len()
    }
}

impl SampleSource for SampleTable {
    fn peek_at(&self, var: VarId, index: usize) -> Result<usize, SampleError> {
        let row = &self.rows[var];
        row.get(index).copied().ok_or(SampleError::IndexOutOfTable {
            var,
            index,
            depth: row.len().saturating_sub(1),
        })
    }
}

/// Draw cursor over any sample source: hands out consecutive indices per
/// variable starting from zero.
#[derive(Debug)]
pub struct Cursor<'a, S: SampleSource + ?Sized> {
    source: &'a S,
    counters: Vec<usize>,
}

impl<'a, S: SampleSource + ?Sized> Cursor<'a, S> {
    pub fn new(source: &'a S, num_vars: usize) -> Self {
        Cursor { source, counters: vec![0; num_vars] }
    }

    pub fn draw(&mut self, var: VarId) -> Result<usize, SampleError> {
        let index = self.counters[var];
        let value = self.source.peek_at(var, index)?;
        self.counters[var] += 1;
        Ok(value)
    }

    pub fn counter(&self, var: VarId) -> usize {
        self.counters[var]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EventSpec, ProblemInstance, VariableSpec};
    use std::sync::Arc;

    fn instance(n: usize, domain: usize) -> ProblemInstance {
        let vars = (0..n).map(|i| VariableSpec::uniform(i, domain)).collect();
        let ev = EventSpec::new(0, vec![0], 0.5, Arc::new(|v: &[usize]| v[0] == 0));
        ProblemInstance::new(vars, vec![ev]).unwrap()
    }

    #[test]
    fn draw_advances_only_own_counter() {
        let inst = instance(3, 4);
        let mut s = SampleStream::new(&inst, 7);
        s.draw(1);
        s.draw(1);
        assert_eq!(s.counter(0), 0);
        assert_eq!(s.counter(1), 2);
        assert_eq!(s.counter(2), 0);
    }

    #[test]
    fn replay_identical_per_variable_sequences() {
        let inst = instance(2, 5);
        let mut a = SampleStream::new(&inst, 42);
        let mut b = SampleStream::new(&inst, 42);
        let seq_a: Vec<usize> = (0..50).map(|_| a.draw(0)).collect();
        // interleave draws of var 1 in the second stream
        let seq_b: Vec<usize> = (0..50)
            .map(|_| {
                b.draw(1);
                b.draw(0)
            })
            .collect();
        assert_eq!(seq_a, seq_b);
    }

    #[test]
    fn peek_matches_draw_and_does_not_advance() {
        let inst = instance(1, 6);
        let s0 = SampleStream::new(&inst, 9);
        let first = s0.peek_at(0, 0).unwrap();
        let mut s = SampleStream::new(&inst, 9);
        let peeked = s.peek_at(0, 3).unwrap();
        let drawn: Vec<usize> = (0..4).map(|_| s.draw(0)).collect();
        assert_eq!(drawn[0], first);
        assert_eq!(drawn[3], peeked);
    }

    #[test]
    fn different_seeds_differ() {
        let inst = instance(1, 1000);
        let mut a = SampleStream::new(&inst, 1);
        let mut b = SampleStream::new(&inst, 2);
        let sa: Vec<usize> = (0..20).map(|_| a.draw(0)).collect();
        let sb: Vec<usize> = (0..20).map(|_| b.draw(0)).collect();
        assert_ne!(sa, sb);
    }

    #[test]
    fn table_lookup_and_bounds() {
        let t = SampleTable::new(vec![vec![3, 1, 4], vec![1, 5, 9]]);
        assert_eq!(t.peek_at(1, 2), Ok(9));
        assert_eq!(
            t.peek_at(0, 3),
            Err(SampleError::IndexOutOfTable { var: 0, index: 3, depth: 2 })
        );
    }

    #[test]
    fn uniform_marginals_within_three_sigma() {
        let inst = instance(1, 4);
        let mut s = SampleStream::new(&inst, 1234);
        let n = 100_000usize;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[s.draw(0)] += 1;
        }
        let p = 0.25;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for &c in &counts {
            assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sigma, "counts = {counts:?}");
        }
    }

    #[test]
    fn weighted_marginals_within_three_sigma() {
        let weights = vec![0.1, 0.2, 0.7];
        let vars = vec![VariableSpec { id: 0, domain_size: 3, weights: Some(weights.clone()) }];
        let ev = EventSpec::new(0, vec![0], 1.0, Arc::new(|_: &[usize]| false));
        let inst = ProblemInstance::new(vars, vec![ev]).unwrap();
        let mut s = SampleStream::new(&inst, 99);
        let n = 100_000usize;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[s.draw(0)] += 1;
        }
        for (v, &p) in weights.iter().enumerate() {
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((counts[v] as f64 - n as f64 * p).abs() <= 3.0 * sigma);
        }
    }

    #[test]
    fn zero_weight_value_never_drawn() {
        let vars = vec![VariableSpec { id: 0, domain_size: 3, weights: Some(vec![0.5, 0.0, 0.5]) }];
        let ev = EventSpec::new(0, vec![0], 1.0, Arc::new(|_: &[usize]| false));
        let inst = ProblemInstance::new(vars, vec![ev]).unwrap();
        let mut s = SampleStream::new(&inst, 5);
        for _ in 0..10_000 {
            assert_ne!(s.draw(0), 1);
        }
    }

    #[test]
    fn cursor_over_table_errors_past_depth() {
        let t = SampleTable::new(vec![vec![0, 1]]);
        let mut c = Cursor::new(&t, 1);
        assert_eq!(c.draw(0), Ok(0));
        assert_eq!(c.draw(0), Ok(1));
        assert!(c.draw(0).is_err());
    }
}
