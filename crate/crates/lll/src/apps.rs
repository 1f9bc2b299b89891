//! Concrete instance builders: bounded-occurrence CNF satisfiability (with a
//! conflict-based lopsided graph) and hypergraph 2-coloring, plus the
//! elementary-event breakup transform.

use std::sync::Arc;

use thiserror::Error;

use crate::model::{
    for_each_evaluation, EventId, EventSpec, ModelError, ProblemInstance, VarId, VariableSpec,
};

#[derive(Debug, Error)]
pub enum AppError {
    #[error("clause {clause} mentions variable {var} more than once")]
    DuplicateVariable { clause: usize, var: usize },
    #[error("clause {clause} is empty")]
    EmptyClause { clause: usize },
    #[error("clause {clause} references variable {var} outside 0..{num_vars}")]
    VarOutOfRange { clause: usize, var: usize, num_vars: usize },
    #[error("edge {edge} has fewer than 2 distinct vertices")]
    SmallEdge { edge: usize },
    #[error("edge {edge} contains vertex {vertex} more than once")]
    DuplicateVertex { edge: usize, vertex: usize },
    #[error("edge {edge} references vertex {vertex} outside 0..{num_vertices}")]
    VertexOutOfRange { edge: usize, vertex: usize, num_vertices: usize },
}

/// A signed propositional literal over 0-based variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lit {
    pub var: usize,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnfFormula {
    pub num_vars: usize,
    pub clauses: Vec<Vec<Lit>>,
}

impl CnfFormula {
    pub fn new(num_vars: usize, clauses: Vec<Vec<Lit>>) -> Result<Self, AppError> {
        for (ci, clause) in clauses.iter().enumerate() {
            if clause.is_empty() {
                return Err(AppError::EmptyClause { clause: ci });
            }
            let mut seen = Vec::with_capacity(clause.len());
            for lit in clause {
                if lit.var >= num_vars {
                    return Err(AppError::VarOutOfRange {
                        clause: ci,
                        var: lit.var,
                        num_vars,
                    });
                }
                if seen.contains(&lit.var) {
                    return Err(AppError::DuplicateVariable { clause: ci, var: lit.var });
                }
                seen.push(lit.var);
            }
        }
        Ok(CnfFormula { num_vars, clauses })
    }

    pub fn occurrence_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_vars];
        for clause in &self.clauses {
            for lit in clause {
                counts[lit.var] += 1;
            }
        }
        counts
    }

    /// Truth of the formula under boolean values (index = variable).
    pub fn satisfied_by(&self, values: &[bool]) -> bool {
        self.clauses.iter().all(|clause| {
            clause.iter().any(|lit| values[lit.var] == lit.positive)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    pub num_vertices: usize,
    pub edges: Vec<Vec<usize>>,
}

impl Hypergraph {
    pub fn new(num_vertices: usize, edges: Vec<Vec<usize>>) -> Result<Self, AppError> {
        for (ei, edge) in edges.iter().enumerate() {
            if edge.len() < 2 {
                return Err(AppError::SmallEdge { edge: ei });
            }
            let mut seen = Vec::with_capacity(edge.len());
            for &v in edge {
                if v >= num_vertices {
                    return Err(AppError::VertexOutOfRange {
                        edge: ei,
                        vertex: v,
                        num_vertices,
                    });
                }
                if seen.contains(&v) {
                    return Err(AppError::DuplicateVertex { edge: ei, vertex: v });
                }
                seen.push(v);
            }
        }
        Ok(Hypergraph { num_vertices, edges })
    }

    /// True when no edge is monochromatic under the 2-coloring.
    pub fn properly_colored(&self, colors: &[bool]) -> bool {
        self.edges.iter().all(|edge| {
            let first = colors[edge[0]];
            edge.iter().any(|&v| colors[v] != first)
        })
    }
}

/// One fair coin per CNF variable (value 1 = true), one event per clause
/// (violated when every literal is false). Returns the instance together with
/// the conflict-pair adjacency for the lopsided graph: clauses sharing a
/// variable with opposite signs.
pub fn cnf_to_instance(formula: &CnfFormula) -> (ProblemInstance, Vec<(EventId, EventId)>) {
    let variables: Vec<VariableSpec> =
        (0..formula.num_vars).map(|i| VariableSpec::uniform(i, 2)).collect();

    let mut events = Vec::with_capacity(formula.clauses.len());
    for (id, clause) in formula.clauses.iter().enumerate() {
        let mut lits = clause.clone();
        lits.sort_by_key(|l| l.var);
        let support: Vec<VarId> = lits.iter().map(|l| l.var).collect();
        let signs: Vec<bool> = lits.iter().map(|l| l.positive).collect();
        let prob_bound = 0.5f64.powi(clause.len() as i32);

        let pred_signs = signs.clone();
        let predicate: crate::model::Predicate = Arc::new(move |vals: &[usize]| {
            vals.iter().zip(&pred_signs).all(|(&v, &pos)| (v == 1) != pos)
        });
        let cond_signs = signs;
        let conditional: crate::model::ConditionalProb =
            Arc::new(move |vals: &[Option<usize>]| {
                let mut unfixed = 0u32;
                for (v, &pos) in vals.iter().zip(&cond_signs) {
                    match v {
                        None => unfixed += 1,
                        // a fixed literal that is true satisfies the clause
                        Some(val) => {
                            if (*val == 1) == pos {
                                return 0.0;
                            }
                        }
                    }
                }
                0.5f64.powi(unfixed as i32)
            });
        events.push(
            EventSpec::new(id, support, prob_bound, predicate).with_conditional(conditional),
        );
    }

    let mut conflicts = Vec::new();
    for a in 0..formula.clauses.len() {
        for b in (a + 1)..formula.clauses.len() {
            let conflict = formula.clauses[a].iter().any(|la| {
                formula.clauses[b]
                    .iter()
                    .any(|lb| la.var == lb.var && la.positive != lb.positive)
            });
            if conflict {
                conflicts.push((a, b));
            }
        }
    }

    let instance = ProblemInstance::new(variables, events).expect("valid CNF instance");
    (instance, conflicts)
}

/// One fair-coin color per vertex, one event per edge (violated when the edge
/// is monochromatic), prob_bound 2^(1-|e|).
pub fn hypergraph_to_instance(hg: &Hypergraph) -> ProblemInstance {
    let variables: Vec<VariableSpec> =
        (0..hg.num_vertices).map(|i| VariableSpec::uniform(i, 2)).collect();

    let mut events = Vec::with_capacity(hg.edges.len());
    for (id, edge) in hg.edges.iter().enumerate() {
        let mut support: Vec<VarId> = edge.clone();
        support.sort_unstable();
        let prob_bound = 0.5f64.powi(edge.len() as i32 - 1);

        let predicate: crate::model::Predicate =
            Arc::new(|vals: &[usize]| vals.iter().all(|&v| v == vals[0]));
        let conditional: crate::model::ConditionalProb =
            Arc::new(|vals: &[Option<usize>]| {
                let fixed: Vec<usize> = vals.iter().filter_map(|v| *v).collect();
                let unfixed = vals.len() - fixed.len();
                if fixed.is_empty() {
                    // both colors still possible
                    return 2.0 * 0.5f64.powi(vals.len() as i32);
                }
                if fixed.iter().any(|&c| c != fixed[0]) {
                    return 0.0;
                }
                0.5f64.powi(unfixed as i32)
            });
        events.push(
            EventSpec::new(id, support, prob_bound, predicate).with_conditional(conditional),
        );
    }
    ProblemInstance::new(variables, events).expect("valid hypergraph instance")
}

/// Replaces every event by one elementary event per violating evaluation of
/// its support. Avoiding all elementary events is equivalent to avoiding all
/// original events.
pub fn break_into_elementary(instance: &ProblemInstance) -> Result<ProblemInstance, ModelError> {
    let mut events = Vec::new();
    for e in instance.events() {
        let support = e.support.clone();
        let mut violating: Vec<Vec<usize>> = Vec::new();
        for_each_evaluation(instance, &support, |vals| {
            if (e.predicate)(vals) {
                violating.push(vals.to_vec());
            }
            true
        })?;
        for target in violating {
            let mut prob = 1.0;
            for (i, &v) in support.iter().enumerate() {
                prob *= instance.variables()[v].weight(target[i]);
            }
            let pred_target = target.clone();
            let predicate: crate::model::Predicate =
                Arc::new(move |vals: &[usize]| vals == pred_target.as_slice());
            let cond_target = target;
            let weights: Vec<Vec<f64>> = support
                .iter()
                .map(|&v| {
                    let spec = &instance.variables()[v];
                    (0..spec.domain_size).map(|val| spec.weight(val)).collect()
                })
                .collect();
            let conditional: crate::model::ConditionalProb =
                Arc::new(move |vals: &[Option<usize>]| {
                    let mut p = 1.0;
                    for (i, v) in vals.iter().enumerate() {
                        match v {
                            Some(val) => {
                                if *val != cond_target[i] {
                                    return 0.0;
                                }
                            }
                            None => p *= weights[i][cond_target[i]],
                        }
                    }
                    p
                });
            let id = events.len();
            events.push(
                EventSpec::new(id, support.clone(), prob, predicate)
                    .with_conditional(conditional),
            );
        }
    }
    ProblemInstance::new(instance.variables().to_vec(), events)
}
