//! Parallel-round solver: each round resamples a maximal independent set of
//! the currently violated events. The flattened per-round log is a valid
//! sequential execution, which is what the depth-per-round analysis rests on.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{
    violated_events, Assignment, DependencyGraph, EventId, GraphKind, ProblemInstance, VarId,
};
use crate::sample::{Cursor, SampleSource};
use crate::sequential::{ExecutionLog, SolveError, SolveResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MisPolicy {
    /// Deterministic lowest-id-first greedy, always maximal.
    Greedy,
    /// One priority round: an event survives when its random priority beats
    /// every violated neighbor's. Independent but not necessarily maximal.
    LubyStep,
}

#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub round: usize,
    pub selected: Vec<EventId>,
    pub resampled_vars: Vec<VarId>,
}

#[derive(Debug, Clone)]
pub struct ParallelResult {
    pub result: SolveResult,
    pub rounds: Vec<RoundRecord>,
}

/// Inclusion-maximal independent subset of `violated`, greedy by ascending id.
pub fn greedy_mis(violated: &BTreeSet<EventId>, graph: &DependencyGraph) -> Vec<EventId> {
    let mut selected: Vec<EventId> = Vec::new();
    for &e in violated {
        if selected.iter().all(|&s| !graph.is_edge(e, s)) {
            selected.push(e);
        }
    }
    selected
}

/// A single priority round over the violated events. Ties break toward the
/// lower id, so the survivor set is never empty when `violated` is not.
pub fn luby_step_mis<R: Rng>(
    violated: &BTreeSet<EventId>,
    graph: &DependencyGraph,
    rng: &mut R,
) -> Vec<EventId> {
    let list: Vec<EventId> = violated.iter().copied().collect();
    let priorities: Vec<u64> = list.iter().map(|_| rng.gen()).collect();
    let priority_of = |e: EventId| -> (u64, std::cmp::Reverse<EventId>) {
        let i = list.binary_search(&e).unwrap();
        (priorities[i], std::cmp::Reverse(e))
    };
    list.iter()
        .copied()
        .filter(|&e| {
            graph
                .neighbors(e)
                .iter()
                .filter(|b| violated.contains(b))
                .all(|&b| priority_of(e) > priority_of(b))
        })
        .collect()
}

/// Runs the round loop. `max_rounds` of 0 means no limit; hitting the limit
/// returns `terminated == false` with the partial log. Within a round the
/// selected events have pairwise disjoint supports, so the per-variable
/// redraws are order-free; the flattened log orders them by ascending id.
pub fn solve_parallel<S: SampleSource + ?Sized>(
    instance: &ProblemInstance,
    graph: &DependencyGraph,
    source: &S,
    mis_policy: MisPolicy,
    mis_seed: u64,
    max_rounds: usize,
) -> Result<ParallelResult, SolveError> {
    if graph.kind() != GraphKind::Standard {
        return Err(SolveError::WrongGraphKind { expected: GraphKind::Standard });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mis_seed ^ 0x51BD_5A32_9C1A_55F7);
    let mut cursor = Cursor::new(source, instance.num_vars());
    let mut values = Vec::with_capacity(instance.num_vars());
    for var in 0..instance.num_vars() {
        values.push(cursor.draw(var)?);
    }
    let mut assignment = Assignment::new(values);
    let mut violated: BTreeSet<EventId> =
        violated_events(instance, &assignment).into_iter().collect();

    let mut log = ExecutionLog::new(instance.num_events());
    let mut bounds = Vec::new();
    let mut rounds = Vec::new();

    while !violated.is_empty() {
        if max_rounds != 0 && rounds.len() >= max_rounds {
            log.round_bounds = Some(bounds);
            let steps_used = log.len();
            return Ok(ParallelResult {
                result: SolveResult { assignment, log, terminated: false, steps_used },
                rounds,
            });
        }
        let selected = match mis_policy {
            MisPolicy::Greedy => greedy_mis(&violated, graph),
            MisPolicy::LubyStep => luby_step_mis(&violated, graph, &mut rng),
        };
        debug_assert!(!selected.is_empty());

        let start = log.len();
        let mut resampled_vars: BTreeSet<VarId> = BTreeSet::new();
        for &e in &selected {
            // independence in the graph means disjoint supports
            for &var in &instance.events()[e].support {
                let fresh = resampled_vars.insert(var);
                debug_assert!(fresh, "supports within a round must be disjoint");
                assignment.values[var] = cursor.draw(var)?;
            }
            log.push(e);
        }
        bounds.push(start..log.len());
        rounds.push(RoundRecord {
            round: rounds.len(),
            selected: selected.clone(),
            resampled_vars: resampled_vars.iter().copied().collect(),
        });

        let mut affected = BTreeSet::new();
        for &var in &resampled_vars {
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

    log.round_bounds = Some(bounds);
    let steps_used = log.len();
    Ok(ParallelResult {
        result: SolveResult { assignment, log, terminated: true, steps_used },
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps::{cnf_to_instance, CnfFormula, Lit};
    use crate::model::build_dependency_graph;
    use crate::sample::SampleStream;
    use crate::witness::build_witness_tree;

    fn lit(var: usize, positive: bool) -> Lit {
        Lit { var, positive }
    }

    /// Chain of 2-literal clauses: clause i over variables {i, i+1}.
    fn chain_instance(m: usize, signs: u64) -> (crate::model::ProblemInstance, DependencyGraph) {
        let clauses: Vec<Vec<Lit>> = (0..m)
            .map(|i| {
                vec![
                    lit(i, (signs >> (2 * i)) & 1 == 0),
                    lit(i + 1, (signs >> (2 * i + 1)) & 1 == 0),
                ]
            })
            .collect();
        let f = CnfFormula::new(m + 1, clauses).unwrap();
        let inst = cnf_to_instance(&f).0;
        let g = build_dependency_graph(&inst);
        (inst, g)
    }

    #[test]
    fn zero_events_zero_rounds() {
        use crate::model::{ProblemInstance, VariableSpec};
        let inst = ProblemInstance::new(vec![VariableSpec::uniform(0, 2)], vec![]).unwrap();
        let g = build_dependency_graph(&inst);
        let stream = SampleStream::new(&inst, 0);
        let r = solve_parallel(&inst, &g, &stream, MisPolicy::Greedy, 0, 0).unwrap();
        assert!(r.result.terminated);
        assert!(r.rounds.is_empty());
    }

    #[test]
    fn greedy_mis_picks_lower_id_of_adjacent_pair() {
        let (_, g) = chain_instance(2, 0);
        let violated: BTreeSet<EventId> = [0, 1].into_iter().collect();
        assert_eq!(greedy_mis(&violated, &g), vec![0]);
    }

    #[test]
    fn greedy_mis_keeps_independent_set() {
        let (_, g) = chain_instance(3, 0);
        let violated: BTreeSet<EventId> = [0, 2].into_iter().collect();
        assert_eq!(greedy_mis(&violated, &g), vec![0, 2]);
    }

    #[test]
    fn greedy_mis_maximality_brute_force() {
        let (_, g) = chain_instance(5, 0);
        for mask in 1u32..(1 << 5) {
            let violated: BTreeSet<EventId> =
                (0..5).filter(|&e| mask >> e & 1 == 1).collect();
            let s = greedy_mis(&violated, &g);
            // independent
            for i in 0..s.len() {
                for j in (i + 1)..s.len() {
                    assert!(!g.is_edge(s[i], s[j]));
                }
            }
            // maximal: everything left out has a neighbor inside
            for &e in violated.iter().filter(|e| !s.contains(e)) {
                assert!(s.iter().any(|&a| g.is_edge(e, a)));
            }
        }
    }

    #[test]
    fn luby_step_survivors_independent_and_nonempty() {
        let (_, g) = chain_instance(6, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mask in 1u32..(1 << 6) {
            let violated: BTreeSet<EventId> =
                (0..6).filter(|&e| mask >> e & 1 == 1).collect();
            let s = luby_step_mis(&violated, &g, &mut rng);
            assert!(!s.is_empty());
            for i in 0..s.len() {
                for j in (i + 1)..s.len() {
                    assert!(!g.is_edge(s[i], s[j]));
                }
            }
            for &e in &s {
                assert!(violated.contains(&e));
            }
        }
    }

    #[test]
    fn single_violated_event_always_selected_by_luby() {
        let (_, g) = chain_instance(2, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let violated: BTreeSet<EventId> = [1].into_iter().collect();
        for _ in 0..20 {
            assert_eq!(luby_step_mis(&violated, &g, &mut rng), vec![1]);
        }
    }

    #[test]
    fn depth_equals_round_minus_one_for_greedy_runs() {
        for seed in 0..100u64 {
            let (inst, g) = chain_instance(6, seed.wrapping_mul(0x9E37));
            let stream = SampleStream::new(&inst, seed);
            let r = solve_parallel(&inst, &g, &stream, MisPolicy::Greedy, seed, 0).unwrap();
            assert!(r.result.terminated);
            let bounds = r.result.log.round_bounds.clone().unwrap();
            for (j, seg) in bounds.iter().enumerate() {
                for t in seg.clone() {
                    let tree = build_witness_tree(&r.result.log, t, &g);
                    assert_eq!(tree.depth(), j, "step {t} in round {j}");
                }
            }
        }
    }

    #[test]
    fn flattened_log_is_valid_sequential_execution() {
        for seed in 0..100u64 {
            let (inst, g) = chain_instance(5, seed.wrapping_mul(77));
            let stream = SampleStream::new(&inst, seed);
            let r = solve_parallel(&inst, &g, &stream, MisPolicy::Greedy, seed, 0).unwrap();
            // replay: every logged event violated at its moment, draws aligned
            let mut cursor = Cursor::new(&stream, inst.num_vars());
            let mut a = Assignment::new(
                (0..inst.num_vars()).map(|v| cursor.draw(v).unwrap()).collect(),
            );
            for &e in &r.result.log.steps {
                assert!(inst.is_violated(e, &a));
                for &var in &inst.events()[e].support {
                    a.values[var] = cursor.draw(var).unwrap();
                }
            }
            assert_eq!(a, r.result.assignment);
            assert!(violated_events(&inst, &a).is_empty());
        }
    }

    #[test]
    fn round_records_have_disjoint_supports() {
        for seed in 0..50u64 {
            let (inst, g) = chain_instance(6, seed);
            let stream = SampleStream::new(&inst, seed);
            let r = solve_parallel(&inst, &g, &stream, MisPolicy::Greedy, seed, 0).unwrap();
            for round in &r.rounds {
                let mut seen = BTreeSet::new();
                for &e in &round.selected {
                    for &v in &inst.events()[e].support {
                        assert!(seen.insert(v));
                    }
                }
            }
        }
    }

    #[test]
    fn luby_runs_terminate_and_satisfy() {
        for seed in 0..50u64 {
            let (inst, g) = chain_instance(5, seed);
            let stream = SampleStream::new(&inst, seed);
            let r =
                solve_parallel(&inst, &g, &stream, MisPolicy::LubyStep, seed, 10_000).unwrap();
            assert!(r.result.terminated);
            assert!(violated_events(&inst, &r.result.assignment).is_empty());
        }
    }

    #[test]
    fn lopsided_graph_rejected() {
        let (inst, _) = chain_instance(2, 0);
        let lop = crate::model::build_lopsidependency_graph(&inst, Some(&[])).unwrap();
        let stream = SampleStream::new(&inst, 0);
        assert!(solve_parallel(&inst, &lop, &stream, MisPolicy::Greedy, 0, 0).is_err());
    }

    #[test]
    fn round_limit_reports_partial() {
        use crate::model::{EventSpec, ProblemInstance, VariableSpec};
        use std::sync::Arc;
        let vars = vec![VariableSpec::uniform(0, 2)];
        let ev = EventSpec::new(0, vec![0], 1.0, Arc::new(|_: &[usize]| true));
        let inst = ProblemInstance::new(vars, vec![ev]).unwrap();
        let g = build_dependency_graph(&inst);
        let stream = SampleStream::new(&inst, 0);
        let r = solve_parallel(&inst, &g, &stream, MisPolicy::Greedy, 0, 5).unwrap();
        assert!(!r.result.terminated);
        assert_eq!(r.rounds.len(), 5);
    }

    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
}
