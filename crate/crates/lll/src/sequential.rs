//! Sequential resampling solver: draw an initial assignment, then repeatedly
//! pick a violated event and redraw exactly the variables in its support.

use std::collections::BTreeSet;
use std::ops::Range;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{
    violated_events, Assignment, DependencyGraph, EventId, GraphKind, ProblemInstance,
};
use crate::sample::{Cursor, SampleError, SampleSource};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("expected a {expected:?}-kind dependency graph")]
    WrongGraphKind { expected: GraphKind },
}

/// The journal of resampled events, in order.
#[derive(Debug, Clone, Default)]
pub struct ExecutionLog {
    pub steps: Vec<EventId>,
    /// Segment of the flattened log per parallel round, when applicable.
    pub round_bounds: Option<Vec<Range<usize>>>,
    pub per_event_counts: Vec<usize>,
}

impl ExecutionLog {
    pub fn new(num_events: usize) -> Self {
        ExecutionLog {
            steps: Vec::new(),
            round_bounds: None,
            per_event_counts: vec![0; num_events],
        }
    }

    pub fn push(&mut self, event: EventId) {
        self.steps.push(event);
        self.per_event_counts[event] += 1;
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

pub type CustomPolicy = Arc<dyn Fn(&[EventId]) -> EventId + Send + Sync>;

/// How to pick among the currently violated events.
#[derive(Clone)]
pub enum SelectionPolicy {
    LowestId,
    RandomUniform(Box<ChaCha8Rng>),
    Custom(CustomPolicy),
}

impl SelectionPolicy {
    pub fn random_uniform(seed: u64) -> Self {
        SelectionPolicy::RandomUniform(Box::new(ChaCha8Rng::seed_from_u64(seed)))
    }

    fn select(&mut self, violated: &BTreeSet<EventId>) -> EventId {
        debug_assert!(!violated.is_empty());
        match self {
            SelectionPolicy::LowestId => *violated.iter().next().unwrap(),
            SelectionPolicy::RandomUniform(rng) => {
                let k = rng.gen_range(0..violated.len());
                *violated.iter().nth(k).unwrap()
            }
            SelectionPolicy::Custom(f) => {
                let list: Vec<EventId> = violated.iter().copied().collect();
                let chosen = f(&list);
                debug_assert!(violated.contains(&chosen), "policy must return a violated event");
                chosen
            }
        }
    }
}

impl std::fmt::Debug for SelectionPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SelectionPolicy::LowestId => write!(f, "LowestId"),
            SelectionPolicy::RandomUniform(_) => write!(f, "RandomUniform"),
            SelectionPolicy::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub assignment: Assignment,
    pub log: ExecutionLog,
    /// True when the loop exited with no violated event left.
    pub terminated: bool,
    pub steps_used: usize,
}

/// Default step cap for a given resampling budget. Exceeding 64x the expected
/// total is vanishingly unlikely when the x-condition holds.
pub fn default_max_steps(budget: f64) -> usize {
    (64.0 * budget).ceil() as usize + 1024
}

/// Runs the resampling loop. `max_steps` of 0 means no limit. A step-limited
/// run comes back with `terminated == false` and the partial log.
pub fn solve_sequential<S: SampleSource + ?Sized>(
    instance: &ProblemInstance,
    source: &S,
    policy: SelectionPolicy,
    max_steps: usize,
) -> Result<SolveResult, SolveError> {
    let mut policy = policy;
    let mut cursor = Cursor::new(source, instance.num_vars());
    let mut values = Vec::with_capacity(instance.num_vars());
    for var in 0..instance.num_vars() {
        values.push(cursor.draw(var)?);
    }
    let mut assignment = Assignment::new(values);

    let mut violated: BTreeSet<EventId> =
        violated_events(instance, &assignment).into_iter().collect();
    let mut log = ExecutionLog::new(instance.num_events());

    while let Some(&_first) = violated.iter().next() {
        if max_steps != 0 && log.len() >= max_steps {
            let steps_used = log.len();
            return Ok(SolveResult { assignment, log, terminated: false, steps_used });
        }
        let chosen = policy.select(&violated);
        for &var in &instance.events()[chosen].support {
            assignment.values[var] = cursor.draw(var)?;
        }
        log.push(chosen);
        // only events touching the resampled variables can change status
        let mut affected = BTreeSet::new();
        for &var in &instance.events()[chosen].support {
            affected.extend(instance.events_on_var(var).iter().copied());
        }
        for e in affected {
            if instance.is_violated(e, &assignment) {
                violated.insert(e);
            } else {
                violated.remove(&e);
            }
        }
    }

    let steps_used = log.len();
    Ok(SolveResult { assignment, log, terminated: true, steps_used })
}

/// Same execution as [`solve_sequential`]; the lopsided graph only changes
/// which budget the caller attaches to the run, not the algorithm.
pub fn solve_lopsided<S: SampleSource + ?Sized>(
    instance: &ProblemInstance,
    graph: &DependencyGraph,
    source: &S,
    policy: SelectionPolicy,
    max_steps: usize,
) -> Result<SolveResult, SolveError> {
    if graph.kind() != GraphKind::Lopsided {
        return Err(SolveError::WrongGraphKind { expected: GraphKind::Lopsided });
    }
    solve_sequential(instance, source, policy, max_steps)
}
