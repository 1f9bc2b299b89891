//! Deterministic solver: bound the witness-tree size, enumerate the
//! candidate trees, fix a sample table cell by cell with the method of
//! conditional expectations, then drive the sequential solver from the table.

use thiserror::Error;

use crate::criteria::{check_x_condition, rescale_for_derandomization, resample_budget, XAssignment};
use crate::model::{DependencyGraph, EventId, ProblemInstance, VarId};
use crate::sample::SampleTable;
use crate::sequential::{solve_sequential, SelectionPolicy, SolveError, SolveResult};
use crate::witness::{enumerate_trees, shrink_range_bound, WitnessError, WitnessTree};

pub const DEFAULT_TREE_CAP: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum DerandError {
    #[error("event {event} does not supply a conditional probability")]
    MissingConditional { event: EventId },
    #[error("epsilon must be positive for the deterministic solver")]
    EpsilonNotPositive,
    #[error("x-condition with epsilon slack fails; the size bound does not apply")]
    ConditionFailed,
    #[error(transparent)]
    Witness(#[from] WitnessError),
    #[error("conditional expectation {value} exceeded 1/2 after fixing cell ({var}, {index})")]
    ExpectationExceedsHalf { var: VarId, index: usize, value: f64 },
    #[error("consistent trees remain after fixing the whole table")]
    ConsistentTreesRemain,
    #[error("table exhausted during the final solve run")]
    TableExhausted,
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Fixed-so-far entries of the sample table; `None` cells are still random.
#[derive(Debug, Clone)]
pub struct PartialTable {
    cells: Vec<Vec<Option<usize>>>,
}

impl PartialTable {
    pub fn new(num_vars: usize, depth: usize) -> Self {
        PartialTable { cells: vec![vec![None; depth + 1]; num_vars] }
    }

    pub fn get(&self, var: VarId, index: usize) -> Option<usize> {
        self.cells[var].get(index).copied().flatten()
    }

    pub fn set(&mut self, var: VarId, index: usize, value: usize) {
        self.cells[var][index] = Some(value);
    }

    pub fn depth(&self) -> usize {
        self.cells.first().map_or(0, |r| r.len() - 1)
    }

    fn freeze(&self) -> SampleTable {
        SampleTable::new(
            self.cells
                .iter()
                .map(|row| row.iter().map(|c| c.expect("table fully fixed")).collect())
                .collect(),
        )
    }
}

/// Probability that the tree's replay check passes when the fixed cells are
/// substituted and the remaining samples stay random.
///
/// The tree is traversed bottom-up level by level; a per-variable counter
/// picks the sample index each vertex reads, mirroring the replay check.
pub fn tree_consistency_probability(
    tree: &WitnessTree,
    table: &PartialTable,
    instance: &ProblemInstance,
) -> Result<f64, DerandError> {
    let mut counters = vec![0usize; instance.num_vars()];
    let mut product = 1.0f64;
    let levels = tree.levels();
    for level in levels.iter().rev() {
        for &v in level {
            let event = &instance.events()[tree.label(v)];
            let cond = event
                .conditional_prob
                .as_ref()
                .ok_or(DerandError::MissingConditional { event: event.id })?;
            let mut partial = Vec::with_capacity(event.support.len());
            for &var in &event.support {
                let index = counters[var];
                counters[var] += 1;
                partial.push(table.get(var, index));
            }
            product *= cond(&partial);
            if product == 0.0 {
                return Ok(0.0);
            }
        }
    }
    Ok(product)
}

#[derive(Debug, Clone)]
pub struct DerandReport {
    /// Number of candidate trees enumerated.
    pub tree_list_size: usize,
    /// Size threshold u: no tree of at least this size may stay consistent.
    pub threshold: usize,
    /// Enumerated size window [u, (k+1)u].
    pub range: (usize, usize),
    /// Summed consistency expectation after each fixing step; the first entry
    /// is the all-random starting point.
    pub expectation_trace: Vec<f64>,
    /// Trees in the list consistent with the final table (must be zero).
    pub consistent_after: usize,
    pub table: SampleTable,
}

/// End-to-end deterministic solve. Requires a positive epsilon slack, a
/// passing x-condition and conditional probabilities on every event.
pub fn derandomized_solve(
    instance: &ProblemInstance,
    graph: &DependencyGraph,
    x: &XAssignment,
    epsilon: f64,
    tree_cap: usize,
) -> Result<(SolveResult, DerandReport), DerandError> {
    if epsilon <= 0.0 {
        return Err(DerandError::EpsilonNotPositive);
    }
    for event in instance.events() {
        if event.conditional_prob.is_none() {
            return Err(DerandError::MissingConditional { event: event.id });
        }
    }
    if !check_x_condition(instance, graph, x, epsilon).pass {
        return Err(DerandError::ConditionFailed);
    }

    let (x_scaled, eps_scaled) = rescale_for_derandomization(x, epsilon);
    let budget = resample_budget(&x_scaled);

    // Smallest u >= 1 with (1 - eps')^u * budget <= 1/2: past that size the
    // expected number of consistent trees drops below one half.
    let mut threshold = 1usize;
    while (1.0 - eps_scaled).powi(threshold as i32) * budget > 0.5 {
        threshold += 1;
    }
    let (lo, hi) = shrink_range_bound(threshold, graph.max_degree());
    let trees = enumerate_trees(graph, lo, hi, tree_cap)?;

    let mut table = PartialTable::new(instance.num_vars(), threshold);
    let mut expectation_trace = Vec::new();
    let mut current: f64 = trees
        .iter()
        .map(|t| tree_consistency_probability(t, &table, instance))
        .sum::<Result<f64, _>>()?;
    expectation_trace.push(current);
    if current > 0.5 + 1e-9 {
        return Err(DerandError::ExpectationExceedsHalf { var: 0, index: 0, value: current });
    }

    for var in 0..instance.num_vars() {
        for index in 0..=threshold {
            let domain = instance.variables()[var].domain_size;
            let mut best_value = 0usize;
            let mut best_sum = f64::INFINITY;
            for value in 0..domain {
                table.set(var, index, value);
                let sum: f64 = trees
                    .iter()
                    .map(|t| tree_consistency_probability(t, &table, instance))
                    .sum::<Result<f64, _>>()?;
                if sum < best_sum {
                    best_sum = sum;
                    best_value = value;
                }
            }
            table.set(var, index, best_value);
            if best_sum > current + 1e-9 {
                return Err(DerandError::ExpectationExceedsHalf {
                    var,
                    index,
                    value: best_sum,
                });
            }
            current = best_sum;
            expectation_trace.push(current);
        }
    }

    let mut consistent_after = 0usize;
    for t in &trees {
        let p = tree_consistency_probability(t, &table, instance)?;
        debug_assert!(p == 0.0 || p == 1.0, "fully fixed table must decide each tree");
        if p == 1.0 {
            consistent_after += 1;
        }
    }
    if consistent_after != 0 {
        return Err(DerandError::ConsistentTreesRemain);
    }

    let frozen = table.freeze();
    let result = match solve_sequential(instance, &frozen, SelectionPolicy::LowestId, 0) {
        Ok(r) => r,
        Err(SolveError::Sample(_)) => return Err(DerandError::TableExhausted),
        Err(e) => return Err(e.into()),
    };
    debug_assert!(result.terminated);

    let report = DerandReport {
        tree_list_size: trees.len(),
        threshold,
        range: (lo, hi),
        expectation_trace,
        consistent_after,
        table: frozen,
    };
    Ok((result, report))
}
