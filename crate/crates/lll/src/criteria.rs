//! Hypothesis checks for the resampling guarantees: the x-condition (with
//! optional epsilon slack), the resampling budget, and the weight rescaling
//! used by the deterministic solver.

use thiserror::Error;

use crate::model::{DependencyGraph, EventId, ProblemInstance};

/// Relative slack so that legitimate exact-equality cases pass in floating
/// point.
const REL_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error("x assignment has length {got}, expected {expected}")]
    Length { got: usize, expected: usize },
    #[error("x({event}) = {value} outside the open interval (0, 1)")]
    OutOfRange { event: EventId, value: f64 },
}

/// Per-event weights x(A) in (0,1).
#[derive(Debug, Clone)]
pub struct XAssignment {
    x: Vec<f64>,
}

impl XAssignment {
    pub fn new(x: Vec<f64>) -> Result<Self, CriteriaError> {
        for (event, &value) in x.iter().enumerate() {
            if !(value > 0.0 && value < 1.0) {
                return Err(CriteriaError::OutOfRange { event, value });
            }
        }
        Ok(XAssignment { x })
    }

    pub fn for_instance(x: Vec<f64>, instance: &ProblemInstance) -> Result<Self, CriteriaError> {
        if x.len() != instance.num_events() {
            return Err(CriteriaError::Length { got: x.len(), expected: instance.num_events() });
        }
        Self::new(x)
    }

    pub fn get(&self, event: EventId) -> f64 {
        self.x[event]
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }
}

#[derive(Debug, Clone)]
pub struct ConditionEntry {
    pub event: EventId,
    /// Left-hand side: the event's probability bound.
    pub prob_bound: f64,
    /// Right-hand side: (1 - epsilon) x(A) prod over neighbors of (1 - x(B)).
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ConditionReport {
    pub entries: Vec<ConditionEntry>,
    pub pass: bool,
    pub epsilon: f64,
}

/// Checks prob_bound(A) <= (1 - epsilon) x(A) prod_{B in Gamma(A)} (1 - x(B))
/// per event, over whichever graph is supplied (standard or lopsided).
pub fn check_x_condition(
    instance: &ProblemInstance,
    graph: &DependencyGraph,
    x: &XAssignment,
    epsilon: f64,
) -> ConditionReport {
    let mut entries = Vec::with_capacity(instance.num_events());
    let mut pass = true;
    for event in 0..instance.num_events() {
        let mut rhs = (1.0 - epsilon) * x.get(event);
        for &b in graph.neighbors(event) {
            rhs *= 1.0 - x.get(b);
        }
        let lhs = instance.events()[event].prob_bound;
        let ok = lhs <= rhs + rhs.abs() * REL_SLACK;
        pass &= ok;
        entries.push(ConditionEntry { event, prob_bound: lhs, threshold: rhs, pass: ok });
    }
    ConditionReport { entries, pass, epsilon }
}

#[derive(Debug, Clone)]
pub struct SymmetricX {
    pub x: XAssignment,
    /// True when d = 0 forced clamping 1/(d+1) below 1.
    pub clamped: bool,
}

/// The uniform choice x(A) = 1/(d+1) for max degree d. Callers still run
/// [`check_x_condition`]; this is a convenience starting point only.
pub fn symmetric_x(instance: &ProblemInstance, graph: &DependencyGraph) -> SymmetricX {
    let d = graph.max_degree();
    let raw = 1.0 / (d as f64 + 1.0);
    let clamped = raw >= 1.0;
    let value = if clamped { 1.0 - 1e-9 } else { raw };
    let x = XAssignment::new(vec![value; instance.num_events()]).expect("value in (0,1)");
    SymmetricX { x, clamped }
}

/// Sum over events of x(A) / (1 - x(A)): the expected-total-resamples bound.
pub fn resample_budget(x: &XAssignment) -> f64 {
    x.values().iter().map(|&v| v / (1.0 - v)).sum()
}

/// Bounds the weights away from 1: returns ((1 - epsilon/2) x, epsilon/2).
pub fn rescale_for_derandomization(x: &XAssignment, epsilon: f64) -> (XAssignment, f64) {
    assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon must be in (0, 1)");
    let factor = 1.0 - epsilon / 2.0;
    let rescaled: Vec<f64> = x.values().iter().map(|&v| factor * v).collect();
    (XAssignment::new(rescaled).expect("scaling keeps (0,1)"), epsilon / 2.0)
}
